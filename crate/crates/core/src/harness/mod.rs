//! Experiment protocols: replication studies with coverage, sweeps, rolling windows, hedging.

mod hedging;
mod windows;

pub use hedging::{
    black_scholes_call, black_scholes_delta, hedging_error_on_path, hedging_frequency_study,
    rebalance_cash, simulate_hedging_error, simulate_path, HedgeConfig, HedgeStudy,
};
pub use windows::{run_rolling_windows, WindowPlan, WindowStudy};

use crate::divergences::PhiSpec;
use crate::error::{check_level, invalid, Error, Result};
use crate::evt::{EmpiricalSample, IntermediateLevel};
use crate::network::{pushforward_losses, FactorLawSpec, NetworkModel};
use crate::rng::{label, StreamKey};
use crate::robust_eval::{
    discretize, evt_phi_cvar, phi_dual_cvar, sample_cvar, wasserstein_worst_cvar, Center,
    DiscretizeConfig, EvtPhiConfig, SolveStatus, SolverConfig, WeightedAtoms,
};
use crate::tail_models::TailLawSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Estimator applied to one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MethodKind {
    /// EVT-spliced nominal with a φ-ball; RPEV when φ is ExpShifted.
    EvtPhi(EvtPhiConfig),
    /// Gaussian nominal fitted by sample mean and standard deviation.
    GaussianPhi { phi: PhiSpec, delta: f64, solver: SolverConfig },
    /// Wasserstein ball around the empirical law.
    Wasserstein { p: f64, delta: f64 },
    /// Plain sample CVaR.
    Saa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    pub kind: MethodKind,
}

impl MethodSpec {
    pub fn new(name: impl Into<String>, kind: MethodKind) -> Self {
        MethodSpec { name: name.into(), kind }
    }

    pub fn rpev(delta: f64, level: IntermediateLevel, regime: crate::evt::RegimeChoice) -> Self {
        let mut cfg = EvtPhiConfig::rpev(delta, level, regime);
        cfg.stderr_batches = 0;
        MethodSpec::new("rpev", MethodKind::EvtPhi(cfg))
    }
}

/// Outcome of one (method, β, rep) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    Infinite,
    NonConvergence,
    Failed(String),
}

impl CellStatus {
    pub fn is_usable(&self) -> bool {
        matches!(self, CellStatus::Ok | CellStatus::Infinite)
    }

    pub fn tag(&self) -> String {
        match self {
            CellStatus::Ok => "ok".into(),
            CellStatus::Infinite => "infinite".into(),
            CellStatus::NonConvergence => "nonconvergence".into(),
            CellStatus::Failed(e) => format!("error: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: String,
    pub beta: f64,
    /// Replication or window index.
    pub rep: usize,
    pub value: Option<f64>,
    pub status: CellStatus,
}

/// Worst-case CVaR of one method on one dataset.
pub fn evaluate_method(
    method: &MethodKind,
    sample: &EmpiricalSample,
    beta: f64,
    key: StreamKey,
) -> Result<(f64, SolveStatus)> {
    check_level(beta)?;
    match method {
        MethodKind::EvtPhi(cfg) => {
            let (r, _) = evt_phi_cvar(sample, beta, cfg, key)?;
            Ok((r.value, r.status))
        }
        MethodKind::GaussianPhi { phi, delta, solver } => {
            let n = sample.n();
            if n < 2 {
                return Err(Error::TooFewTailSamples { k: n, n });
            }
            let mean = sample.values().iter().sum::<f64>() / n as f64;
            let var = sample.values().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            if !(var > 0.0) {
                return Err(Error::DegenerateTail("sample has zero variance".into()));
            }
            let law = TailLawSpec::Normal { mean, sd: var.sqrt() };
            let atoms = discretize(&law, &DiscretizeConfig::default())?;
            let r = phi_dual_cvar(&atoms, *phi, *delta, beta, solver)?;
            Ok((r.value, r.status))
        }
        MethodKind::Wasserstein { p, delta } => {
            let r = wasserstein_worst_cvar(Center::Sample(sample), *p, *delta, beta)?;
            Ok((r.value, r.status))
        }
        MethodKind::Saa => Ok((sample_cvar(&WeightedAtoms::uniform(sample), beta)?, SolveStatus::Converged)),
    }
}

fn record(method: &MethodSpec, beta: f64, rep: usize, out: Result<(f64, SolveStatus)>) -> CellRecord {
    let (value, status) = match out {
        Ok((v, SolveStatus::Converged)) => (Some(v), CellStatus::Ok),
        Ok((_, SolveStatus::WorstCaseInfinite)) => (Some(f64::INFINITY), CellStatus::Infinite),
        Ok((v, SolveStatus::NonConvergence)) => (Some(v), CellStatus::NonConvergence),
        Err(e) => (None, CellStatus::Failed(e.to_string())),
    };
    CellRecord { method: method.name.clone(), beta, rep, value, status }
}

/// Where datasets come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Law(TailLawSpec),
    Network { factors: FactorLawSpec, model: NetworkModel },
}

const DRAW_CHUNK: usize = 1 << 16;

impl DataSource {
    /// n losses; draws are chunked so the result does not depend on thread count.
    pub fn sample(&self, n: usize, key: StreamKey) -> Result<EmpiricalSample> {
        match self {
            DataSource::Law(law) => {
                let chunks: Vec<Result<Vec<f64>>> = (0..n.div_ceil(DRAW_CHUNK))
                    .into_par_iter()
                    .map(|c| {
                        let mut rng = key.child(c as u64).rng();
                        law.sample(DRAW_CHUNK.min(n - c * DRAW_CHUNK), &mut rng)
                    })
                    .collect();
                let mut out = Vec::with_capacity(n);
                for c in chunks {
                    out.extend(c?);
                }
                EmpiricalSample::new(out)
            }
            DataSource::Network { factors, model } => EmpiricalSample::new(pushforward_losses(factors, model, n, key)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub betas: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Monte-Carlo draws for the ground truth.
    pub truth_draws: usize,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(Error::PreconditionViolated(format!("need at least 2 replications, got {}", self.reps)));
        }
        if self.betas.is_empty() {
            return Err(invalid("β grid is empty"));
        }
        for b in &self.betas {
            check_level(*b)?;
        }
        if self.n < 2 || self.truth_draws < 2 {
            return Err(invalid("sample sizes must be at least 2"));
        }
        Ok(())
    }
}

/// Per (method, β) summary across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub method: String,
    pub beta: f64,
    pub ground_truth: f64,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    /// Fraction of usable reps with estimate ≥ truth.
    pub coverage: f64,
    pub reps: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationStudy {
    pub records: Vec<CellRecord>,
    pub summaries: Vec<ReplicationSummary>,
    /// (β, truth) pairs.
    pub truth: Vec<(f64, f64)>,
}

impl ReplicationStudy {
    pub fn summary(&self, method: &str, beta: f64) -> Option<&ReplicationSummary> {
        self.summaries.iter().find(|s| s.method == method && s.beta == beta)
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.status.is_usable()).count()
    }
}

/// Sample quantile with linear interpolation between order statistics (type 7).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let (a, b) = (sorted[lo], sorted[hi]);
    if a == b {
        a
    } else {
        a + (h - lo as f64) * (b - a)
    }
}

/// Fraction of estimates at or above the truth.
pub fn coverage(truth: f64, estimates: &[f64]) -> f64 {
    if estimates.is_empty() {
        return f64::NAN;
    }
    estimates.iter().filter(|e| **e >= truth).count() as f64 / estimates.len() as f64
}

/// Summarise records against per-β reference values.
pub fn summarize(records: &[CellRecord], methods: &[String], truth: &[(f64, f64)]) -> Vec<ReplicationSummary> {
    let mut out = Vec::new();
    for m in methods {
        for &(beta, t) in truth {
            let cells: Vec<&CellRecord> = records.iter().filter(|r| &r.method == m && r.beta == beta).collect();
            let mut vals: Vec<f64> = cells
                .iter()
                .filter(|r| r.status.is_usable())
                .filter_map(|r| r.value)
                .collect();
            vals.sort_by(f64::total_cmp);
            out.push(ReplicationSummary {
                method: m.clone(),
                beta,
                ground_truth: t,
                median: quantile_type7(&vals, 0.5),
                lower_quartile: quantile_type7(&vals, 0.25),
                upper_quartile: quantile_type7(&vals, 0.75),
                coverage: coverage(t, &vals),
                reps: cells.len(),
                failures: cells.len() - vals.len(),
            });
        }
    }
    out
}

/// Monte-Carlo CVaR at each β from `draws` losses.
pub fn ground_truth(source: &DataSource, betas: &[f64], draws: usize, key: StreamKey) -> Result<Vec<(f64, f64)>> {
    let sample = source.sample(draws, key)?;
    let atoms = WeightedAtoms::uniform(&sample);
    betas.iter().map(|b| Ok((*b, sample_cvar(&atoms, *b)?))).collect()
}

fn evaluate_rep(
    sample: &EmpiricalSample,
    methods: &[MethodSpec],
    betas: &[f64],
    rep: usize,
    key: StreamKey,
) -> Vec<CellRecord> {
    let mut out = Vec::with_capacity(methods.len() * betas.len());
    for m in methods {
        for (bi, &beta) in betas.iter().enumerate() {
            // the tail stream depends on (rep, β) only, so methods share draws
            let tkey = key.path(&[label("tail"), rep as u64, bi as u64]);
            out.push(record(m, beta, rep, evaluate_method(&m.kind, sample, beta, tkey)));
        }
    }
    out
}

/// Seeded replications with common random numbers across methods.
pub fn run_replication_study(
    source: &DataSource,
    methods: &[MethodSpec],
    cfg: &StudyConfig,
) -> Result<ReplicationStudy> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(invalid("no methods given"));
    }
    let key = StreamKey::root(cfg.seed);
    let truth = ground_truth(source, &cfg.betas, cfg.truth_draws, key.child(label("truth")))?;
    let per_rep: Vec<Result<Vec<CellRecord>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let data = source.sample(cfg.n, key.path(&[label("data"), rep as u64]))?;
            Ok(evaluate_rep(&data, methods, &cfg.betas, rep, key))
        })
        .collect();
    let mut records = Vec::with_capacity(cfg.reps * methods.len() * cfg.betas.len());
    for r in per_rep {
        records.extend(r?);
    }
    let names: Vec<String> = methods.iter().map(|m| m.name.clone()).collect();
    let summaries = summarize(&records, &names, &truth);
    Ok(ReplicationStudy { records, summaries, truth })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub delta: f64,
    pub theta: f64,
    pub summary: ReplicationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub records: Vec<CellRecord>,
}

/// RPEV over a (δ, θ) grid with β₀ = n^{-θ}; cells are named `d{δ}_t{θ}`.
pub fn run_parameter_sweep(
    source: &DataSource,
    deltas: &[f64],
    thetas: &[f64],
    beta: f64,
    base: &EvtPhiConfig,
    cfg: &StudyConfig,
) -> Result<SweepResult> {
    if deltas.is_empty() || thetas.is_empty() {
        return Err(invalid("sweep grids must be nonempty"));
    }
    let mut methods = Vec::new();
    let mut grid = Vec::new();
    for &d in deltas {
        for &t in thetas {
            let mut c = *base;
            c.delta = d;
            c.level = IntermediateLevel::NPower { theta: t };
            methods.push(MethodSpec::new(format!("d{d}_t{t}"), MethodKind::EvtPhi(c)));
            grid.push((d, t));
        }
    }
    let cfg = StudyConfig { betas: vec![beta], ..cfg.clone() };
    let study = run_replication_study(source, &methods, &cfg)?;
    let cells = grid
        .into_iter()
        .zip(study.summaries)
        .map(|((delta, theta), summary)| SweepCell { delta, theta, summary })
        .collect();
    Ok(SweepResult { cells, records: study.records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evt::RegimeChoice;

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_type7(&v, 0.5), 2.5);
        assert_eq!(quantile_type7(&v, 0.25), 1.75);
        assert_eq!(quantile_type7(&v, 0.75), 3.25);
        assert_eq!(quantile_type7(&[5.0], 0.3), 5.0);
    }

    #[test]
    fn coverage_count() {
        assert_eq!(coverage(10.0, &[9.0, 11.0, 12.0, 8.0]), 0.5);
    }

    #[test]
    fn one_rep_rejected() {
        let cfg = StudyConfig { betas: vec![0.01], n: 100, reps: 1, seed: 1, truth_draws: 1000 };
        let src = DataSource::Law(TailLawSpec::exponential());
        let m = [MethodSpec::new("saa", MethodKind::Saa)];
        assert!(matches!(run_replication_study(&src, &m, &cfg), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn failures_are_counted_not_imputed() {
        let recs = vec![
            CellRecord { method: "a".into(), beta: 0.1, rep: 0, value: Some(1.0), status: CellStatus::Ok },
            CellRecord { method: "a".into(), beta: 0.1, rep: 1, value: None, status: CellStatus::Failed("x".into()) },
            CellRecord { method: "a".into(), beta: 0.1, rep: 2, value: Some(3.0), status: CellStatus::Ok },
        ];
        let s = &summarize(&recs, &["a".into()], &[(0.1, 2.0)])[0];
        assert_eq!(s.failures, 1);
        assert_eq!(s.reps, 3);
        assert_eq!(s.median, 2.0);
        assert_eq!(s.coverage, 0.5);
    }

    #[test]
    fn common_data_across_methods() {
        let cfg = StudyConfig { betas: vec![0.05], n: 200, reps: 3, seed: 9, truth_draws: 10_000 };
        let src = DataSource::Law(TailLawSpec::exponential());
        let m = [
            MethodSpec::new("saa", MethodKind::Saa),
            MethodSpec::new("w0", MethodKind::Wasserstein { p: 1.0, delta: 0.0 }),
        ];
        let s = run_replication_study(&src, &m, &cfg).unwrap();
        for rep in 0..3 {
            let vals: Vec<f64> = s.records.iter().filter(|r| r.rep == rep).map(|r| r.value.unwrap()).collect();
            assert!((vals[0] - vals[1]).abs() < 1e-12);
        }
        let again = run_replication_study(&src, &m, &cfg).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn single_cell_sweep_matches_study() {
        let cfg = StudyConfig { betas: vec![0.01], n: 300, reps: 2, seed: 4, truth_draws: 10_000 };
        let src = DataSource::Law(TailLawSpec::exponential());
        let mut base = EvtPhiConfig::rpev(0.1, IntermediateLevel::NPower { theta: 0.5 }, RegimeChoice::Light);
        base.tail_samples = 500;
        base.stderr_batches = 0;
        let sweep = run_parameter_sweep(&src, &[0.1], &[0.5], 0.01, &base, &cfg).unwrap();
        let m = [MethodSpec::new("d0.1_t0.5", MethodKind::EvtPhi(base))];
        let study = run_replication_study(&src, &m, &cfg).unwrap();
        assert_eq!(sweep.cells[0].summary, study.summaries[0]);
    }
}
