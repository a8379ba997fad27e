//! Samples the twelve-layer space, checks validity and prints the device/edge
//! mapping of a few valid architectures.
//!
//! Usage: `cargo run --release --example design_space -- [seed]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coforge::design_space::{check_validity, derive_mapping, sample_valid, Side, SpaceConfig};

fn main() -> coforge::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let space = SpaceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let draws = 5000;
    let mut counts = std::collections::BTreeMap::new();
    let mut valid = 0;
    for _ in 0..draws {
        let report = check_validity(&space.sample_with(&mut rng));
        valid += usize::from(report.is_valid());
        for v in report.violations {
            *counts.entry(v.rule.code()).or_insert(0usize) += 1;
        }
    }
    println!("{valid} of {draws} uniform draws are valid");
    for (rule, n) in counts {
        println!("  {rule}: {n} violations");
    }

    for _ in 0..3 {
        let (arch, tries) = sample_valid(&mut rng, &space, 1_000_000)?;
        let mapping = derive_mapping(&arch)?;
        println!("\n{} (found after {tries} draws)", arch.hash_hex());
        for (layer, side) in arch.layers.iter().zip(&mapping.sides) {
            let at = if *side == Side::Device { "device" } else { "edge" };
            println!("  {at:<6} {layer}");
        }
        println!("  returns output from edge: {}", mapping.implicit_return);
    }
    Ok(())
}
