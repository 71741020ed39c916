//! Builds the mixed-integer program for a small batch, checks that a solver tree is a
//! feasible point with the same objective, and writes the program in LP format.

use fairmip::dataset::synthetic::disparate_missing;
use fairmip::dataset::{sample_batch, BatchSpec};
use fairmip::mip::{assignment_from_tree, build_program, check_feasibility, export_lp, objective_value, ModelConfig};
use fairmip::tree::{solve, SolverConfig};
use fairmip::FairnessMetric;

fn main() -> fairmip::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "tree.lp".into());
    let batch = sample_batch(&disparate_missing(500, 2), BatchSpec { batch_size: 24, seed: 0 })?;
    let cfg = ModelConfig::new(2, 0.5, FairnessMetric::EqualizedOdds);
    let program = build_program(&batch, &cfg)?;
    println!(
        "{} binaries, {} continuous, {} constraints",
        program.n_binaries(),
        program.n_continuous(),
        program.constraints.len()
    );

    let tree = solve(&batch, &SolverConfig::unlimited(), &cfg, None)?.tree;
    let point = assignment_from_tree(&tree, &batch, &cfg, &program)?;
    let violations = check_feasibility(&program, &point)?;
    println!(
        "solver tree: {} violations, program objective {:.6}",
        violations.len(),
        objective_value(&program, &point)?
    );

    export_lp(&program, &out)?;
    println!("wrote {out}");
    Ok(())
}
