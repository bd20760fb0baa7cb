//! Worst-case risk over Wasserstein and φ-divergence balls.

mod atoms;
mod inflation;
mod phi_dual;
mod rpev;
mod wasserstein;
mod worst_case;

pub use atoms::{discretize, sample_cvar, DiscretizeConfig, WeightedAtoms};
pub use inflation::{inflation_diagnostic, Inflation};
pub use phi_dual::{phi_dual_cvar, SolverConfig};
pub use rpev::{evt_phi_cvar, finite_worst_case, nominal_atoms, rpev_dro_cvar, EvtPhiConfig};
pub use wasserstein::{
    wasserstein_dual_cvar, wasserstein_dual_expectation, wasserstein_worst_cvar, wasserstein_worst_risk,
    Center,
};
pub use worst_case::{
    worst_case_quantile, worst_case_risk, worst_case_survival, SurvivalLaw, WorstCaseSurvival,
};

use crate::divergences::PhiSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Ambiguity {
    Wasserstein { p: f64, delta: f64 },
    PhiBall { phi: PhiSpec, delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    WorstCaseInfinite,
    NonConvergence,
}

/// What the reported value is, relative to the true worst case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    Exact,
    /// Risk of the shifted-quantile law; the worst case may be larger.
    MapInducedLowerBound,
    /// Integral of worst-case quantiles; dominates the worst-case risk.
    QuantileUpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub u: f64,
    pub eta: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustEvalResult {
    pub value: f64,
    pub optimizer: Option<Optimizer>,
    /// Tail shift of the Wasserstein transport map.
    pub shift: Option<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub stderr: Option<f64>,
    pub bound: BoundKind,
    pub ambiguity: Ambiguity,
}

impl RobustEvalResult {
    fn infinite(ambiguity: Ambiguity) -> Self {
        RobustEvalResult {
            value: f64::INFINITY,
            optimizer: None,
            shift: None,
            iterations: 0,
            status: SolveStatus::WorstCaseInfinite,
            stderr: None,
            bound: BoundKind::Exact,
            ambiguity,
        }
    }
}
