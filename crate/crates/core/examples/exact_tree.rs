//! Solves one fair MIA tree exactly, then deeper trees under a time limit with a warm
//! start, and prints the incumbent trace.

use fairmip::dataset::synthetic::disparate_missing;
use fairmip::dataset::{sample_batch, BatchSpec};
use fairmip::mip::ModelConfig;
use fairmip::tree::{solve, SolverConfig};
use fairmip::FairnessMetric;

fn main() -> fairmip::Result<()> {
    let ds = disparate_missing(2000, 1);
    let batch = sample_batch(&ds, BatchSpec { batch_size: 80, seed: 3 })?;
    let model = ModelConfig::new(2, 1.0, FairnessMetric::FnrDiff);

    let exact = solve(&batch, &SolverConfig::unlimited(), &model, None)?;
    println!(
        "exact: objective {:.4}, {} nodes, {:.3}s, proven {}",
        exact.objective, exact.nodes_explored, exact.wall_time, exact.proven_optimal
    );
    for (v, b) in exact.tree.branches.iter().enumerate() {
        let name = &exact.tree.feature_names[b.feature];
        let missing = if b.missing_left { "left" } else { "right" };
        println!("  node {v}: {name} <= {:.3}, missing go {missing}", b.threshold);
    }
    println!("  leaves {:?}", exact.tree.leaves);

    // the depth-3 space is too large to exhaust here: run under a budget and warm start
    // the second batch from the first batch's tree
    let deep = ModelConfig { depth: 3, ..model };
    let budget = SolverConfig { t_limit: 0.5, ..SolverConfig::default() };
    let first = solve(&batch, &budget, &deep, None)?;
    let next = sample_batch(&ds, BatchSpec { batch_size: 80, seed: 4 })?;
    let budgeted = solve(&next, &budget, &deep, Some(&first.tree))?;
    println!(
        "budgeted depth 3: objective {:.4} (warm start {:?}), proven {}",
        budgeted.objective, budgeted.warm_start_objective, budgeted.proven_optimal
    );
    for u in &budgeted.trace {
        println!("  {:>9} nodes  {:.3}s  {:.4}", u.nodes, u.elapsed, u.objective);
    }
    Ok(())
}
