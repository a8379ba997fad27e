//! Times the local compute kernels on a bucket grid and turns the medians into
//! a lookup table for a loopback system.

use coforge::cosim::simulate;
use coforge::design_space::dgcnn_reference;
use coforge::profile::{builtin_pack, BucketGrid};
use coforge::runtime::{profile_endpoint, ProfileConfig};

fn main() -> coforge::Result<()> {
    let cfg = ProfileConfig {
        grid: BucketGrid { n: vec![1, 64, 1024], f: vec![3, 64, 128, 256], k: vec![10, 20], out_dim: vec![64, 128, 256] },
        ..ProfileConfig::default()
    };
    let measured = profile_endpoint(&cfg)?;
    println!(
        "host {} ({} cpus), timer resolution {:.0} ns, {} buckets, {} low-confidence",
        measured.machine.hash(),
        measured.machine.cpus,
        measured.timer_resolution_s * 1e9,
        measured.measurements.len(),
        measured.low_confidence()
    );
    for m in measured.measurements.iter().filter(|m| m.shape.n == 1024).take(8) {
        println!("  {:<15} n={:<5} f={:<4} p={:<4} {:9.3} ms", m.op.as_str(), m.shape.n, m.shape.f, m.shape.p, m.median_s * 1e3);
    }
    let sys = measured.system(builtin_pack("tx2-gpu")?)?;
    let est = simulate(&dgcnn_reference(), &sys)?;
    println!("reference network on this host: {:.1} ms predicted from the measured table", est.latency_s * 1e3);
    Ok(())
}
