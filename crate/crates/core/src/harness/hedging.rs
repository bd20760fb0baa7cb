use super::{evaluate_method, record, CellRecord, MethodSpec};
use crate::error::{check_level, invalid, Result};
use crate::evt::EmpiricalSample;
use crate::rng::{label, StreamKey};
use crate::robust_eval::{sample_cvar, WeightedAtoms};
use crate::special::normal_cdf;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Discrete delta hedge of a European call over horizon 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeConfig {
    pub s0: f64,
    pub strike: f64,
    pub mu: f64,
    /// Variance rate σ².
    pub sigma2: f64,
    pub rate: f64,
    /// Proportional cost per share traded.
    pub k1: f64,
    /// Rebalance count.
    pub m: usize,
}

impl HedgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) || self.m == 0 || !(self.k1 >= 0.0) || !(self.s0 > 0.0) || !(self.strike > 0.0) {
            return Err(invalid("hedge config needs σ² > 0, m ≥ 1, k₁ ≥ 0 and positive prices"));
        }
        if !self.mu.is_finite() || !self.rate.is_finite() {
            return Err(invalid("drift and rate must be finite"));
        }
        Ok(())
    }

    fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

fn d1(s: f64, k: f64, r: f64, sigma: f64, tau: f64) -> f64 {
    ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / (sigma * tau.sqrt())
}

/// Black–Scholes call delta Φ(d₁) with time to maturity τ > 0.
pub fn black_scholes_delta(s: f64, k: f64, r: f64, sigma: f64, tau: f64) -> f64 {
    normal_cdf(d1(s, k, r, sigma, tau))
}

pub fn black_scholes_call(s: f64, k: f64, r: f64, sigma: f64, tau: f64) -> f64 {
    let a = d1(s, k, r, sigma, tau);
    let b = a - sigma * tau.sqrt();
    s * normal_cdf(a) - k * (-r * tau).exp() * normal_cdf(b)
}

/// One step of the cash recursion.
pub fn rebalance_cash(cash: f64, growth: f64, price: f64, new_delta: f64, old_delta: f64, k1: f64) -> f64 {
    let trade = new_delta - old_delta;
    cash * growth - price * trade - k1 * price * trade.abs()
}

/// Hedging error on a price path S_{t_0}, …, S_{t_m}.
///
/// The position set at t_{m-1} is held to maturity; there is no trade at t_m.
pub fn hedging_error_on_path(cfg: &HedgeConfig, path: &[f64]) -> f64 {
    let m = cfg.m;
    debug_assert_eq!(path.len(), m + 1);
    let (sigma, r) = (cfg.sigma(), cfg.rate);
    let growth = (r / m as f64).exp();
    let mut delta = black_scholes_delta(path[0], cfg.strike, r, sigma, 1.0);
    let mut cash = black_scholes_call(path[0], cfg.strike, r, sigma, 1.0) - delta * path[0];
    for (i, &s) in path.iter().enumerate().take(m).skip(1) {
        let tau = 1.0 - i as f64 / m as f64;
        let next = black_scholes_delta(s, cfg.strike, r, sigma, tau);
        cash = rebalance_cash(cash, growth, s, next, delta, cfg.k1);
        delta = next;
    }
    let s1 = path[m];
    cash *= growth;
    ((s1 - cfg.strike).max(0.0) - cash - delta * s1).abs()
}

/// GBM path at m equal steps.
pub fn simulate_path<R: RngCore + ?Sized>(cfg: &HedgeConfig, rng: &mut R) -> Vec<f64> {
    let dt = 1.0 / cfg.m as f64;
    let drift = (cfg.mu - 0.5 * cfg.sigma2) * dt;
    let vol = (cfg.sigma2 * dt).sqrt();
    let mut path = Vec::with_capacity(cfg.m + 1);
    let mut s = cfg.s0;
    path.push(s);
    for _ in 0..cfg.m {
        let z: f64 = StandardNormal.sample(rng);
        s *= (drift + vol * z).exp();
        path.push(s);
    }
    path
}

pub fn simulate_hedging_error<R: RngCore + ?Sized>(cfg: &HedgeConfig, rng: &mut R) -> f64 {
    hedging_error_on_path(cfg, &simulate_path(cfg, rng))
}

const PATH_CHUNK: usize = 4096;

fn hedging_errors(cfg: &HedgeConfig, count: usize, key: StreamKey) -> Vec<f64> {
    (0..count.div_ceil(PATH_CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = key.child(c as u64).rng();
            let len = PATH_CHUNK.min(count - c * PATH_CHUNK);
            (0..len).map(move |_| simulate_hedging_error(cfg, &mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeStudy {
    pub m_grid: Vec<usize>,
    /// Monte-Carlo CVaR of the hedging error per m.
    pub truth: Vec<f64>,
    /// Per method: worst-case CVaR per m (None on failure).
    pub curves: Vec<(String, Vec<Option<f64>>)>,
    /// Per method: selected m̂ and CVaR(m̂)/min_m CVaR(m).
    pub selections: Vec<(String, Option<usize>, Option<f64>)>,
    pub records: Vec<CellRecord>,
}

impl HedgeStudy {
    /// A decreasing step followed later by an increasing step.
    pub fn truth_is_u_shaped(&self) -> bool {
        let t = &self.truth;
        let Some(min_at) = (0..t.len()).min_by(|a, b| t[*a].total_cmp(&t[*b])) else {
            return false;
        };
        min_at > 0 && min_at + 1 < t.len()
    }
}

/// Per-m truth from `truth_paths` paths and each method's curve from n paths.
pub fn hedging_frequency_study(
    template: &HedgeConfig,
    m_grid: &[usize],
    beta: f64,
    n: usize,
    truth_paths: usize,
    methods: &[MethodSpec],
    seed: u64,
) -> Result<HedgeStudy> {
    check_level(beta)?;
    if m_grid.is_empty() {
        return Err(invalid("m grid is empty"));
    }
    template.validate()?;
    let key = StreamKey::root(seed);
    let mut truth = Vec::with_capacity(m_grid.len());
    let mut records = Vec::new();
    for (mi, &m) in m_grid.iter().enumerate() {
        let cfg = HedgeConfig { m, ..*template };
        cfg.validate()?;
        let big = EmpiricalSample::new(hedging_errors(&cfg, truth_paths, key.path(&[label("truth"), m as u64])))?;
        truth.push(sample_cvar(&WeightedAtoms::uniform(&big), beta)?);
        let data = EmpiricalSample::new(hedging_errors(&cfg, n, key.path(&[label("data"), m as u64])))?;
        let tkey = key.path(&[label("tail"), mi as u64]);
        for method in methods {
            records.push(record(method, beta, m, evaluate_method(&method.kind, &data, beta, tkey)));
        }
    }
    let best = truth.iter().copied().fold(f64::INFINITY, f64::min);
    let mut curves = Vec::new();
    let mut selections = Vec::new();
    for method in methods {
        let curve: Vec<Option<f64>> = m_grid
            .iter()
            .map(|m| {
                records
                    .iter()
                    .find(|r| r.method == method.name && r.rep == *m)
                    .filter(|r| r.status.is_usable())
                    .and_then(|r| r.value)
            })
            .collect();
        let pick = curve
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        selections.push((method.name.clone(), pick.map(|i| m_grid[i]), pick.map(|i| truth[i] / best)));
        curves.push((method.name.clone(), curve));
    }
    Ok(HedgeStudy { m_grid: m_grid.to_vec(), truth, curves, selections, records })
}
