//! Prices a split deployment of the reference point-cloud network on every
//! built-in profile pack.
//!
//! The per-layer breakdown, the transfers and the energy split come from the
//! lookup-table simulator; the lookup-only bound and the fixed-power energy
//! model are shown next to it.

use coforge::cosim::{fixed_power_energy, lut_estimate, simulate};
use coforge::design_space::{dgcnn_reference, Architecture, Layer};
use coforge::profile::{System, BUILTIN_PACKS};

fn split_after_first_block(reference: &Architecture) -> coforge::Result<Architecture> {
    let mut layers = reference.layers.clone();
    let at = layers.iter().position(|l| matches!(l, Layer::Combine { .. })).expect("reference has a combine") + 1;
    layers.insert(at, Layer::Communicate);
    Architecture::new(layers, reference.input)
}

fn main() -> coforge::Result<()> {
    let reference = dgcnn_reference();
    let split = split_after_first_block(&reference)?;
    for pack in BUILTIN_PACKS {
        let sys = System::builtin(pack)?;
        println!("== {pack} ({:.0} Mbps)", sys.config.network.bandwidth_bps / 1e6);
        for (name, arch) in [("device only", &reference), ("split", &split)] {
            let est = simulate(arch, &sys)?;
            println!(
                "  {name:<12} latency {:8.2} ms  energy {:8.2} mJ  (bound {:.2} ms, fixed-power {:.2} mJ)",
                est.latency_s * 1e3,
                est.device_energy_j * 1e3,
                lut_estimate(arch, &sys)? * 1e3,
                fixed_power_energy(arch, &sys)? * 1e3,
            );
        }
        let est = simulate(&split, &sys)?;
        for c in &est.breakdown {
            println!("    layer {:>2} {:<15} {:?} {:7.3} ms", c.layer, c.op.as_str(), c.side, c.latency_s * 1e3);
        }
        for t in &est.transfers {
            println!("    transfer from {:?}: {} B, {:.3} ms on the wire", t.from, t.bytes, t.wire_s * 1e3);
        }
        println!(
            "    energy idle {:.2} / run {:.2} / comm {:.2} mJ",
            est.energy.idle_j * 1e3,
            est.energy.run_j * 1e3,
            est.energy.comm_j * 1e3
        );
    }
    Ok(())
}
