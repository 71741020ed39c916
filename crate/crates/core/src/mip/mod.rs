//! The full mixed-integer program for a fair MIA tree.
//!
//! The program is never solved here. It is materialized so that trees found by the
//! combinatorial solver can be checked against it: the assignment induced by a tree
//! must be feasible and its objective must match the tree's directly evaluated one.
//!
//! Two encodings differ from the usual printed formulation:
//!
//! * leaf labels use the majority score `s_l = sum_i (2 y_i - 1) z_il` with
//!   `s_l <= M u_l - eps (1 - u_l)` and `s_l >= -M (1 - u_l)`, so `u_l = 1` exactly
//!   when `s_l >= 0` (ties and empty leaves predict 1);
//! * the OR for the branch indicator also gets its upper bound `w <= w1 + w2`.

mod assign;
mod build;
mod lp;

use serde::{Deserialize, Serialize};

use crate::metrics::FairnessMetric;
use crate::{Error, Result};

pub use assign::{assignment_from_tree, check_feasibility, objective_value, TreeAssignment, Violation};
pub use build::build_program;
pub use lp::{export_lp, read_lp, read_lp_str, write_lp_string};

/// Big-M used by the split constraints: thresholds and features live in `[-1, 1]`.
pub const SPLIT_BIG_M: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub depth: usize,
    pub lambda: f64,
    pub metric: FairnessMetric,
    /// Big-M of the counting constraints; `None` uses `n + 1`.
    #[serde(default)]
    pub big_m: Option<f64>,
    #[serde(default = "default_eps_tol")]
    pub eps_tol: f64,
}

fn default_eps_tol() -> f64 {
    1e-6
}

impl ModelConfig {
    pub fn new(depth: usize, lambda: f64, metric: FairnessMetric) -> Self {
        ModelConfig { depth, lambda, metric, big_m: None, eps_tol: default_eps_tol() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=16).contains(&self.depth) {
            return Err(Error::invalid(format!("depth must be in 1..=16, got {}", self.depth)));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.eps_tol > 0.0 && self.eps_tol < 1.0) {
            return Err(Error::invalid(format!("eps_tol must be in (0, 1), got {}", self.eps_tol)));
        }
        Ok(())
    }

    /// Counting big-M for a batch of `n` rows.
    pub fn counting_big_m(&self, n: usize) -> Result<f64> {
        let floor = (n + 1) as f64;
        match self.big_m {
            None => Ok(floor),
            Some(m) if m >= floor.max(SPLIT_BIG_M) => Ok(m),
            Some(m) => Err(Error::invalid(format!("big_m {m} must be at least {}", floor.max(SPLIT_BIG_M)))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    /// `f64::INFINITY` when unbounded above.
    pub ub: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Constraint family, e.g. `branch_3` or `leaf_1`.
    pub tag: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Data needed to interpret a program without the batch that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgramShape {
    pub n: usize,
    pub d: usize,
    pub depth: usize,
    pub metric: FairnessMetric,
    pub lambda: f64,
    pub big_m: f64,
    pub eps_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipProgram {
    pub shape: ProgramShape,
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Linear objective, minimized.
    pub objective: Vec<(usize, f64)>,
}

impl MipProgram {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn n_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn n_continuous(&self) -> usize {
        self.vars.len() - self.n_binaries()
    }

    /// Number of variables whose name starts with `prefix` followed by `_`.
    pub fn count_family(&self, prefix: &str) -> usize {
        self.vars
            .iter()
            .filter(|v| v.name.strip_prefix(prefix).is_some_and(|rest| rest.starts_with('_') || rest.is_empty()))
            .count()
    }
}
