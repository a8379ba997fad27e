//! Builds the predictor graph of an architecture and writes it as Graphviz DOT
//! with the latency features attached.
//!
//! Usage: `cargo run --release --example arch_graph > graph.dot`

use coforge::arch_graph::{build_graph, latency_features, one_hot_features};
use coforge::design_space::{derive_mapping, dgcnn_reference};
use coforge::profile::System;

fn main() -> coforge::Result<()> {
    let arch = dgcnn_reference();
    let sys = System::builtin("tx2-gpu")?;
    let graph = build_graph(&arch)?;
    let mapping = derive_mapping(&arch)?;
    let x = latency_features(&graph, &arch, &mapping, &sys)?;
    eprintln!(
        "{} nodes (global node {}), one-hot width {}, enhanced width {}",
        graph.num_nodes(),
        graph.global_node(),
        one_hot_features(&graph).ncols(),
        x.ncols()
    );
    print!("{}", graph.to_dot(&arch, Some(&x)));
    Ok(())
}
