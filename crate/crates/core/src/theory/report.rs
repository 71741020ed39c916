use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    check_mcar, conformal_scan, dense_fill_grid, lemma1_counterexamples, theorem2_tightness,
    theorem3_witness, threshold_grid, verify_theorem2, Atom, FillRule, FiniteJoint, Scope,
    ThresholdClass, EXACT_TOL,
};
use crate::imputation::{optimal_constant, theorem1_disc, Theorem1Inputs};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCheck {
    pub name: String,
    pub expected: Value,
    pub computed: Value,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub checks: Vec<TheoryCheck>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    pub monte_carlo_samples: usize,
    pub random_joints: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            monte_carlo_samples: 1_000_000,
            random_joints: 1000,
        }
    }
}

fn check(name: &str, expected: Value, computed: Value, pass: bool) -> TheoryCheck {
    TheoryCheck { name: name.into(), expected, computed, pass }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXACT_TOL
}

/// Random joint with up to `max_atoms` atoms, one observed coordinate on a coarse grid
/// and both groups present.
pub fn random_joint(rng: &mut impl Rng, max_atoms: usize) -> FiniteJoint {
    let n = rng.random_range(2..=max_atoms.max(2));
    let mut atoms: Vec<Atom> = (0..n)
        .map(|k| {
            Atom::new(
                if k < 2 { k as u8 } else { u8::from(rng.random_bool(0.5)) },
                vec![f64::from(rng.random_range(0..5u8)) / 4.0],
                f64::from(rng.random_range(0..5u8)) / 4.0,
                u8::from(rng.random_bool(0.6)),
                u8::from(rng.random_bool(0.5)),
                f64::from(rng.random_range(1..10u8)),
            )
        })
        .collect();
    let total: f64 = atoms.iter().map(|a| a.prob).sum();
    atoms.iter_mut().for_each(|a| a.prob /= total);
    FiniteJoint::new(atoms).expect("generated joint is valid")
}

/// Fill rules drawn from constants and indicators on the observed coordinate.
pub fn random_fill(rng: &mut impl Rng) -> FillRule {
    let cut = f64::from(rng.random_range(0..5u8)) / 4.0;
    match rng.random_range(0..3u8) {
        0 => FillRule::Constant { value: rng.random() },
        1 => FillRule::IndicatorLeq { axis: 0, cut },
        _ => FillRule::IndicatorGt { axis: 0, cut },
    }
}

/// Per-group mean squared error of the optimal constant on a Gaussian mixture.
pub fn theorem1_monte_carlo(t: &Theorem1Inputs, samples: usize, seed: u64) -> Result<f64> {
    let alpha = optimal_constant(t.p0_ms, t.p1_ms, t.m0, t.m1)?;
    let dists = [
        Normal::new(t.m0, t.var0.sqrt()).map_err(|e| crate::Error::invalid(e.to_string()))?,
        Normal::new(t.m1, t.var1.sqrt()).map_err(|e| crate::Error::invalid(e.to_string()))?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for _ in 0..samples {
        let s = usize::from(!rng.random_bool(t.p0_ms));
        let x = dists[s].sample(&mut rng);
        sums[s] += (alpha - x) * (alpha - x);
        counts[s] += 1;
    }
    if counts.contains(&0) {
        return Err(crate::Error::invalid("too few samples to reach both groups"));
    }
    Ok((sums[0] / counts[0] as f64 - sums[1] / counts[1] as f64).abs())
}

/// Runs every construction and property check; `all_pass` is false if any fails.
pub fn run_all(opts: &SuiteOptions) -> Result<TheoryReport> {
    let mut checks = Vec::new();

    let (first, second) = lemma1_counterexamples();
    let pop = check_mcar(&first, Scope::Population)?;
    let cell = pop
        .cell(1, &[1.0])
        .ok_or_else(|| crate::Error::Internal("missing (M=1, X=1) cell".into()))?;
    checks.push(check(
        "lemma1_population_cell",
        json!({"joint": 0.41, "product": 0.25}),
        json!({"joint": cell.joint, "product": cell.product}),
        close(cell.joint, 0.41) && close(cell.product, 0.25),
    ));
    let groups_first = [check_mcar(&first, Scope::Group(0))?.holds, check_mcar(&first, Scope::Group(1))?.holds];
    checks.push(check(
        "lemma1_groups_mcar_population_not",
        json!({"groups": [true, true], "population": false}),
        json!({"groups": groups_first, "population": pop.holds}),
        groups_first == [true, true] && !pop.holds,
    ));
    let pop2 = check_mcar(&second, Scope::Population)?.holds;
    let groups_second = [check_mcar(&second, Scope::Group(0))?.holds, check_mcar(&second, Scope::Group(1))?.holds];
    checks.push(check(
        "lemma1_population_mcar_groups_not",
        json!({"groups": [false, false], "population": true}),
        json!({"groups": groups_second, "population": pop2}),
        groups_second == [false, false] && pop2,
    ));

    let t1 = Theorem1Inputs { p0_ms: 0.3, p1_ms: 0.7, m0: 0.0, m1: 1.0, var0: 1.0, var1: 2.0 };
    let closed = theorem1_disc(&t1)?;
    checks.push(check("theorem1_closed_form", json!(0.6), json!(closed), close(closed, 0.6)));
    if opts.monte_carlo_samples > 0 {
        let mc = theorem1_monte_carlo(&t1, opts.monte_carlo_samples, opts.seed)?;
        checks.push(check(
            "theorem1_monte_carlo",
            json!({"value": 0.6, "tolerance": 0.02}),
            json!(mc),
            (mc - 0.6).abs() <= 0.02,
        ));
    }

    let (j, h, train, test) = theorem2_tightness();
    let tight = verify_theorem2(&j, &h, &train, &test)?;
    checks.push(check(
        "theorem2_tightness",
        json!({"lhs": 1.0, "rhs": 1.0}),
        json!({"lhs": tight.lhs, "rhs": tight.rhs}),
        tight.lhs == 1.0 && tight.rhs == 1.0,
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut held = 0;
    for _ in 0..opts.random_joints {
        let j = random_joint(&mut rng, 8);
        let h = ThresholdClass { axis: rng.random_range(0..2) }.member(rng.random());
        let (f1, f2) = (random_fill(&mut rng), random_fill(&mut rng));
        if verify_theorem2(&j, &h, &f1, &f2)?.holds {
            held += 1;
        }
    }
    checks.push(check(
        "theorem2_random_joints",
        json!({"holds": opts.random_joints}),
        json!({"holds": held}),
        held == opts.random_joints,
    ));

    let w = theorem3_witness();
    let fills = dense_fill_grid();
    let grid = threshold_grid(&w.joint, w.h1.axis, &fills)?;
    let h1 = conformal_scan(&w.joint, w.h1, &fills, 0.4, &grid)?;
    let min_h1 = h1.iter().map(|r| r.min_feasible_risk).fold(f64::INFINITY, f64::min);
    checks.push(check(
        "theorem3_h1_all_fills",
        json!({"min_feasible_risk": 1.0, "fills": fills.len()}),
        json!({"min_feasible_risk": min_h1, "fills": h1.len()}),
        min_h1 == 1.0,
    ));
    let grid = threshold_grid(&w.joint, w.h2.axis, &[w.fill])?;
    let h2 = &conformal_scan(&w.joint, w.h2, &[w.fill], 0.4, &grid)?[0];
    checks.push(check(
        "theorem3_h2_witness",
        json!({"min_feasible_risk": 0.0}),
        json!({"min_feasible_risk": h2.min_feasible_risk}),
        h2.feasible && h2.min_feasible_risk == 0.0,
    ));

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(TheoryReport { checks, all_pass })
}
