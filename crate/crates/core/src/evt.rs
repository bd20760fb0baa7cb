//! Order statistics, tail-index estimators and the tail-regime diagnostic.

use crate::error::{invalid, Error, Result};
use crate::special::normal_quantile;
use crate::tail_models::TailRegime;
use serde::{Deserialize, Serialize};

/// Losses sorted in descending order: Z_(1) ≥ Z_(2) ≥ … ≥ Z_(n).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid(format!("sample needs at least 2 points, got {}", values.len())));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite loss {bad}")));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(EmpiricalSample { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Z_(i), 1-based.
    pub fn order(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    /// #{Z > x}.
    pub fn count_above(&self, x: f64) -> usize {
        self.values.partition_point(|&z| z > x)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut values: Vec<f64> = self.values.iter().map(|v| v * c).collect();
        if c < 0.0 {
            values.reverse();
        }
        EmpiricalSample { values }
    }
}

// ⌊n·β⌋, robust to β computed as a ratio that lands a hair below an integer.
pub(crate) fn tail_count(n: usize, beta: f64) -> usize {
    let x = n as f64 * beta;
    (x * (1.0 + 1e-12)).floor() as usize
}

/// Z_(⌊nβ₀⌋).
pub fn intermediate_var(sample: &EmpiricalSample, beta0: f64) -> Result<f64> {
    let k = tail_count(sample.n(), beta0).min(sample.n());
    if k < 1 {
        return Err(Error::TooFewTailSamples { k, n: sample.n() });
    }
    Ok(sample.order(k))
}

/// Reciprocal of the Hill estimator on the top k order statistics.
pub fn hill_estimate(sample: &EmpiricalSample, k: usize) -> Result<f64> {
    let n = sample.n();
    if k < 2 || k >= n {
        return Err(Error::TooFewTailSamples { k, n });
    }
    let base = sample.order(k + 1);
    if base <= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "Hill estimator needs Z_(k+1) > 0, got {base}"
        )));
    }
    let s: f64 = sample.values[..k].iter().map(|z| (z / base).ln()).sum();
    if s <= 0.0 {
        return Err(Error::DegenerateTail("top order statistics are all equal".into()));
    }
    Ok(k as f64 / s)
}

/// Weibull-type index from two intermediate order statistics.
pub fn light_tail_estimate(sample: &EmpiricalSample, beta0: f64, kappa1: f64) -> Result<f64> {
    if !(kappa1 > 0.0 && kappa1 < 1.0) {
        return Err(invalid(format!("κ₁ must lie in (0,1), got {kappa1}")));
    }
    let n = sample.n();
    let k = tail_count(n, beta0);
    let k1 = tail_count(n, beta0.powf(kappa1)).min(n);
    if k < 2 {
        return Err(Error::TooFewTailSamples { k, n });
    }
    if k1 <= k {
        return Err(Error::PreconditionViolated(format!(
            "need k1 > k, got k1 = {k1}, k = {k}"
        )));
    }
    let (hi, lo) = (sample.order(k), sample.order(k1));
    if lo <= 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "light-tail estimator needs positive order statistics, got {lo}"
        )));
    }
    let r = (hi / lo).ln();
    if r <= 0.0 {
        return Err(Error::DegenerateTail("intermediate order statistics coincide".into()));
    }
    Ok((1.0 / kappa1).ln() / r)
}

/// Settings for the Weibull-type branch of the diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightTailParams {
    pub beta0: f64,
    pub kappa1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeDecision {
    pub k: usize,
    pub hill_gamma: f64,
    pub threshold: f64,
    pub reject: bool,
    pub regime: TailRegime,
}

fn threshold(k: usize, m_bound: f64, alpha: f64) -> f64 {
    m_bound * (1.0 - normal_quantile(1.0 - alpha) / (k as f64).sqrt())
}

/// Test H₀: γ ≥ M. Rejection points to a heavy (Fréchet) tail.
pub fn regime_test(
    sample: &EmpiricalSample,
    k: usize,
    m_bound: f64,
    alpha: f64,
    light: LightTailParams,
) -> Result<RegimeDecision> {
    if !(m_bound > 0.0) || !(alpha > 0.0 && alpha < 0.5) {
        return Err(invalid(format!("bad diagnostic settings M = {m_bound}, α = {alpha}")));
    }
    let hill_gamma = hill_estimate(sample, k)?;
    let threshold = threshold(k, m_bound, alpha);
    let reject = hill_gamma < threshold;
    let regime = if reject {
        TailRegime::Frechet { gamma: hill_gamma }
    } else {
        TailRegime::Gumbel {
            gamma: light_tail_estimate(sample, light.beta0, light.kappa1)?,
        }
    };
    Ok(RegimeDecision {
        k,
        hill_gamma,
        threshold,
        reject,
        regime,
    })
}

/// Rule fixing the intermediate level β₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IntermediateLevel {
    /// β₀ = n^{-θ}
    NPower { theta: f64 },
    /// β₀ = min(cap, β^exponent)
    Capped { cap: f64, exponent: f64 },
    Fixed { beta0: f64 },
}

impl IntermediateLevel {
    pub fn resolve(&self, n: usize, beta: f64) -> Result<f64> {
        let b0 = match *self {
            IntermediateLevel::NPower { theta } => {
                if !(theta > 0.0 && theta < 1.0) {
                    return Err(invalid(format!("θ must lie in (0,1), got {theta}")));
                }
                (n as f64).powf(-theta)
            }
            IntermediateLevel::Capped { cap, exponent } => cap.min(beta.powf(exponent)),
            IntermediateLevel::Fixed { beta0 } => beta0,
        };
        if b0 > 0.0 && b0 < 1.0 {
            Ok(b0)
        } else {
            Err(invalid(format!("intermediate level {b0} outside (0,1)")))
        }
    }
}

/// How the tail regime is chosen during calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegimeChoice {
    /// Run the diagnostic; `k` defaults to ⌊√n⌋.
    Diagnose { m_bound: f64, alpha: f64, k: Option<usize> },
    Heavy,
    Light,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvtCalibration {
    pub beta0: f64,
    pub k_n: usize,
    pub gamma: f64,
    pub regime: TailRegime,
    /// v̂ = Z_(k_n)
    pub v: f64,
    /// Exceedance fraction #{Z > v̂}/n; equals (k_n - 1)/n without ties.
    pub tail_mass: f64,
    pub diagnostic: Option<RegimeDecision>,
}

pub const DEFAULT_KAPPA1: f64 = 0.5;

pub fn calibrate(
    sample: &EmpiricalSample,
    beta0: f64,
    choice: RegimeChoice,
    kappa1: f64,
) -> Result<EvtCalibration> {
    let n = sample.n();
    let k_n = tail_count(n, beta0);
    if k_n < 2 || k_n >= n {
        return Err(Error::TooFewTailSamples { k: k_n, n });
    }
    let v = sample.order(k_n);
    let above = sample.count_above(v);
    if above == 0 {
        return Err(Error::DegenerateTail(format!("no losses exceed the intermediate quantile {v}")));
    }
    let tail_mass = above as f64 / n as f64;
    let light = LightTailParams { beta0, kappa1 };
    let (regime, diagnostic) = match choice {
        RegimeChoice::Heavy => (TailRegime::Frechet { gamma: hill_estimate(sample, k_n)? }, None),
        RegimeChoice::Light => (
            TailRegime::Gumbel { gamma: light_tail_estimate(sample, beta0, kappa1)? },
            None,
        ),
        RegimeChoice::Diagnose { m_bound, alpha, k } => {
            let k = k.unwrap_or((n as f64).sqrt().floor() as usize);
            let d = regime_test(sample, k, m_bound, alpha, light)?;
            let regime = match d.regime {
                TailRegime::Frechet { .. } => TailRegime::Frechet { gamma: hill_estimate(sample, k_n)? },
                g => g,
            };
            (regime, Some(d))
        }
    };
    Ok(EvtCalibration {
        beta0,
        k_n,
        gamma: regime.gamma(),
        regime,
        v,
        tail_mass,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> EmpiricalSample {
        EmpiricalSample::new(vec![2.0, 8.0, 1.0, 4.0]).unwrap()
    }

    #[test]
    fn intermediate_var_indexing() {
        let s = small();
        assert_eq!(intermediate_var(&s, 0.5).unwrap(), 4.0);
        assert_eq!(intermediate_var(&s, 0.25).unwrap(), 8.0);
        assert_eq!(intermediate_var(&s, 1.0).unwrap(), 1.0);
        assert!(matches!(intermediate_var(&s, 0.2), Err(Error::TooFewTailSamples { .. })));
    }

    #[test]
    fn hill_hand_value() {
        let g = hill_estimate(&small(), 3).unwrap();
        assert_relative_eq!(g, 1.0 / (2.0 * 2f64.ln()), max_relative = 1e-14);
    }

    #[test]
    fn hill_degenerate() {
        let s = EmpiricalSample::new(vec![3.0, 3.0, 3.0, 1.0]).unwrap();
        assert!(matches!(hill_estimate(&s, 2), Err(Error::DegenerateTail(_))));
    }

    #[test]
    fn light_tail_hand_values() {
        // n = 100, β₀ = 0.04: k = 4, k1 = 20
        let mut v = vec![0.5; 100];
        v[3] = 2f64.exp();
        v[19] = 1f64.exp();
        for x in v.iter_mut().take(3) {
            *x = 10.0;
        }
        for x in v.iter_mut().take(19).skip(4) {
            *x = 5.0;
        }
        let s = EmpiricalSample::new(v).unwrap();
        assert_relative_eq!(light_tail_estimate(&s, 0.04, 0.5).unwrap(), 2f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn regime_rule() {
        assert_relative_eq!(threshold(100, 8.0, 0.05), 8.0 * (1.0 - 0.16448536269514722), max_relative = 1e-14);
        assert!((threshold(100, 8.0, 0.05) - 6.684).abs() < 1e-3);
        assert!((threshold(100_000_000, 8.0, 0.05) - 8.0).abs() < 2e-3);
    }

    #[test]
    fn ties_shrink_the_tail_mass() {
        let s = EmpiricalSample::new(vec![10.0, 9.0, 9.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        let c = calibrate(&s, 0.3, RegimeChoice::Heavy, 0.5).unwrap();
        assert_eq!(c.v, 9.0);
        assert_eq!(c.tail_mass, 0.1);
    }
}
