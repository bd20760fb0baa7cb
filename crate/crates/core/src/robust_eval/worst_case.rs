//! Worst-case tail probabilities and quantiles over a φ-ball.

use crate::divergences::PhiSpec;
use crate::error::{check_level, Error, Result};
use crate::nominal::NominalModel;
use crate::tail_models::{risk_measure, TailLawSpec, WeightSpec};

/// A law with survival function and tail quantile.
pub trait SurvivalLaw {
    fn survival(&self, x: f64) -> f64;
    fn quantile(&self, t: f64) -> Result<f64>;
}

impl SurvivalLaw for TailLawSpec {
    fn survival(&self, x: f64) -> f64 {
        TailLawSpec::survival(self, x)
    }
    fn quantile(&self, t: f64) -> Result<f64> {
        TailLawSpec::quantile(self, t)
    }
}

impl SurvivalLaw for NominalModel {
    fn survival(&self, x: f64) -> f64 {
        NominalModel::survival(self, x)
    }
    fn quantile(&self, t: f64) -> Result<f64> {
        NominalModel::quantile(self, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseSurvival {
    /// s·F̄, the largest tail probability reachable within the budget.
    pub value: f64,
    /// Likelihood ratio on the event {Z > x}.
    pub s: f64,
    /// φ^{←}(δ/F̄)·F̄, the small-F̄ approximation.
    pub asymptotic: f64,
}

/// Worst-case tail probability at a center tail probability r ∈ (0,1).
fn worst_at(phi: PhiSpec, delta: f64, r: f64) -> Result<WorstCaseSurvival> {
    let asymptotic = phi.inverse_upper(delta / r)? * r;
    if delta == 0.0 {
        return Ok(WorstCaseSurvival { value: r, s: 1.0, asymptotic });
    }
    let q = 1.0 - r;
    // d = s - 1 ∈ [0, 1/r - 1]; g(d) = q φ(1 - r d / q) + r φ(1 + d), increasing and convex
    let g = |d: f64| q * phi.phi_shifted(-r * d / q) + r * phi.phi_shifted(d);
    let dg = |d: f64| r * (phi.phi_prime_shifted(d) - phi.phi_prime_shifted(-r * d / q));
    let d_max = q / r;
    if g(d_max) < delta {
        return Err(Error::InfeasibleBudget);
    }
    // the asymptotic root ignores a nonnegative term, so it lies right of the root
    let mut d = (asymptotic / r - 1.0).min(d_max);
    for _ in 0..200 {
        let step = (g(d) - delta) / dg(d);
        if !(step > 0.0) || !step.is_finite() {
            break;
        }
        let next = d - step;
        if next <= 0.0 {
            d *= 0.5;
            continue;
        }
        if step <= 1e-15 * d {
            d = next;
            break;
        }
        d = next;
    }
    let s = 1.0 + d;
    Ok(WorstCaseSurvival { value: (s * r).min(1.0), s, asymptotic })
}

/// Worst-case F̄(x) over {Q : D_φ(Q‖P) ≤ δ}; InfeasibleBudget when the ball
/// can push all mass above x.
pub fn worst_case_survival<C: SurvivalLaw + ?Sized>(
    center: &C,
    phi: PhiSpec,
    delta: f64,
    x: f64,
) -> Result<WorstCaseSurvival> {
    let r = center.survival(x);
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::PreconditionViolated(format!("center survival {r} at {x} outside (0,1)")));
    }
    worst_at(phi, delta, r)
}

// H(r): worst-case tail probability as a function of the center's; 1 when saturated.
fn h(phi: PhiSpec, delta: f64, r: f64) -> Result<f64> {
    match worst_at(phi, delta, r) {
        Ok(w) => Ok(w.value),
        Err(Error::InfeasibleBudget) => Ok(1.0),
        Err(e) => Err(e),
    }
}

/// Worst-case VaR at tail level t: center.quantile(r) with H(r) = t.
pub fn worst_case_quantile<C: SurvivalLaw + ?Sized>(center: &C, phi: PhiSpec, delta: f64, t: f64) -> Result<f64> {
    check_level(t)?;
    if delta == 0.0 {
        return center.quantile(t);
    }
    // H(r) ≥ r, so the root is at most t
    let mut lo = t;
    let mut n = 0;
    while h(phi, delta, lo)? > t {
        lo *= 1e-4;
        n += 1;
        if lo < 1e-300 || n > 200 {
            return Err(Error::NonConvergence { what: "worst-case quantile bracketing", iterations: n });
        }
    }
    let (mut a, mut b) = (lo.ln(), t.ln());
    for _ in 0..200 {
        if b - a <= 1e-13 {
            break;
        }
        let m = 0.5 * (a + b);
        if h(phi, delta, m.exp())? > t {
            b = m;
        } else {
            a = m;
        }
    }
    center.quantile(a.exp())
}

/// ∫ w(t) · worst-case VaR at βt: an upper bound on the worst-case risk.
pub fn worst_case_risk<C: SurvivalLaw + ?Sized>(
    center: &C,
    phi: PhiSpec,
    delta: f64,
    w: &WeightSpec,
    beta: f64,
) -> Result<f64> {
    let q = |t: f64| worst_case_quantile(center, phi, delta, t);
    risk_measure(&q, w, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Fixed(f64);
    impl SurvivalLaw for Fixed {
        fn survival(&self, _x: f64) -> f64 {
            self.0
        }
        fn quantile(&self, _t: f64) -> Result<f64> {
            Ok(0.0)
        }
    }

    #[test]
    fn chi_square_hand_root() {
        let w = worst_case_survival(&Fixed(0.5), PhiSpec::ChiSquare, 0.02, 0.0).unwrap();
        assert_relative_eq!(w.s, 1.2, max_relative = 1e-12);
        assert_relative_eq!(w.value, 0.6, max_relative = 1e-12);
        let z = worst_case_survival(&Fixed(0.5), PhiSpec::ChiSquare, 0.0, 0.0).unwrap();
        assert_eq!((z.s, z.value), (1.0, 0.5));
    }

    #[test]
    fn infeasible_budget() {
        assert_eq!(
            worst_case_survival(&Fixed(0.5), PhiSpec::ChiSquare, 10.0, 0.0),
            Err(Error::InfeasibleBudget)
        );
    }

    #[test]
    fn asymptotic_branch_agrees_deep_in_the_tail() {
        let law = TailLawSpec::GeneralizedPareto { alpha: 1.0 / 3.0, sigma: 1.0 };
        let x = law.quantile(1e-6).unwrap();
        for phi in [PhiSpec::ChiSquare, PhiSpec::ExpShifted, PhiSpec::KL] {
            let w = worst_case_survival(&law, phi, 0.1, x).unwrap();
            assert!((w.value / w.asymptotic - 1.0).abs() < 0.05, "{phi:?}");
        }
    }

    #[test]
    fn quantile_round_trip() {
        let law = TailLawSpec::GeneralizedPareto { alpha: 1.0 / 3.0, sigma: 1.0 };
        for &t in &[0.2, 1e-2, 1e-4, 1e-8] {
            let x = worst_case_quantile(&law, PhiSpec::ChiSquare, 0.1, t).unwrap();
            let back = worst_case_survival(&law, PhiSpec::ChiSquare, 0.1, x).unwrap().value;
            assert_relative_eq!(back, t, max_relative = 1e-7);
        }
        let x = worst_case_quantile(&law, PhiSpec::ChiSquare, 0.1, 1e-4).unwrap();
        assert!(x > law.quantile(1e-4).unwrap());
        assert_eq!(worst_case_quantile(&law, PhiSpec::ChiSquare, 0.0, 1e-4).unwrap(), law.quantile(1e-4).unwrap());
    }
}
