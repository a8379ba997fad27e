//! Random search against the evolutionary baseline under equal evaluation budgets.

use coforge::design_space::SpaceConfig;
use coforge::profile::System;
use coforge::search::{
    evolutionary_baseline, stage1_operation_search, EvolutionConfig, Evaluator, SearchConfig, SyntheticOracle,
};

fn main() -> coforge::Result<()> {
    let sys = System::builtin("tx2-gpu")?;
    let space = SpaceConfig::default();
    let budget = 1000;
    println!("seed  random  evolution  offspring invalid");
    for seed in 0..5 {
        let cfg = SearchConfig { trials: budget, seed, ..SearchConfig::for_system(&sys.config) };
        let random = stage1_operation_search(&space, &sys, &cfg, Evaluator::Simulator, &SyntheticOracle)?;
        let evo_cfg = EvolutionConfig { trials: budget, seed, ..EvolutionConfig::default() };
        let evo = evolutionary_baseline(&space, &sys, &evo_cfg, &cfg, &SyntheticOracle)?;
        let random_best = random.trace.last().map_or(f64::NEG_INFINITY, |t| t.best_score);
        println!(
            "{seed:>4}  {random_best:6.3}  {:9.3}  {:6.1}%",
            evo.best_score,
            100.0 * evo.invalidity_rate()
        );
    }
    Ok(())
}
