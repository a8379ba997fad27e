//! Lists the built-in profile packs, round-trips one through TOML with a
//! slower link, and queries its lookup table between grid points.

use coforge::design_space::{OpKind, OpShape, Side};
use coforge::profile::{builtin_pack, BucketGrid, System, SystemConfig, BUILTIN_PACKS};

fn main() -> coforge::Result<()> {
    for name in BUILTIN_PACKS {
        let cfg = builtin_pack(name)?;
        println!(
            "{name:<8} device {:<10} edge {:<10} {:>5.0} Mbps  limits {:.0} ms / {:.0} mJ  fingerprint {}",
            cfg.device.name,
            cfg.edge.name,
            cfg.network.bandwidth_bps / 1e6,
            cfg.constraints.latency_s * 1e3,
            cfg.constraints.energy_j * 1e3,
            cfg.fingerprint()
        );
    }

    let mut cfg = builtin_pack("pi-cpu")?;
    cfg.name = "pi-cpu-wifi".into();
    cfg.network.bandwidth_bps = 8e6;
    let text = toml::to_string(&cfg).expect("pack serialises");
    let back = SystemConfig::from_toml_str(&text)?;
    assert_eq!(back, cfg);
    println!("\ncustom pack round-trips through {} bytes of TOML", text.len());

    let sys = System::analytic(back, &BucketGrid::default())?;
    println!("lookup table: {} entries ({})", sys.lut.len(), sys.lut.source);
    for n in [128, 300, 512, 1024] {
        let shape = OpShape { n, f: 64, p: 20 };
        let d = sys.op_perf(OpKind::Sample, shape, Side::Device)?;
        let e = sys.op_perf(OpKind::Sample, shape, Side::Edge)?;
        println!(
            "  sample n={n:<5} device {:8.3} ms {:7.3} mJ   edge {:7.3} ms",
            d.latency_s * 1e3,
            d.energy_j * 1e3,
            e.latency_s * 1e3
        );
    }
    Ok(())
}
