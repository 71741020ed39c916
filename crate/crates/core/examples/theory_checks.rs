//! Runs the imputation-fairness checks: MCAR counterexamples, the constant-imputation
//! gap, the train/test imputation shift bound and the conformal-imputation scan.

use fairmip::theory::{
    check_mcar, conformal_scan, lemma1_counterexamples, run_all, theorem3_witness, threshold_grid, Scope,
    SuiteOptions,
};

fn main() -> fairmip::Result<()> {
    let (first, _) = lemma1_counterexamples();
    let pop = check_mcar(&first, Scope::Population)?;
    println!("population MCAR: {} (largest deviation {:.2})", pop.holds, pop.max_deviation());
    for c in &pop.cells {
        println!("  m={} x={:?}: joint {:.2}, product {:.2}", c.m, c.x, c.joint, c.product);
    }

    let w = theorem3_witness();
    for (name, cls) in [("h1", w.h1), ("h2", w.h2)] {
        let grid = threshold_grid(&w.joint, cls.axis, &[w.fill])?;
        let r = &conformal_scan(&w.joint, cls, &[w.fill], 0.4, &grid)?[0];
        println!("{name} with the witness fill: feasible {}, risk {}", r.feasible, r.min_feasible_risk);
    }

    let report = run_all(&SuiteOptions { monte_carlo_samples: 200_000, random_joints: 200, ..SuiteOptions::default() })?;
    for c in &report.checks {
        println!("{} {}", if c.pass { "pass" } else { "FAIL" }, c.name);
    }
    Ok(())
}
