//! Analytic loss laws, spectral weights and tail-weighted risk measures.

use crate::error::{check_level, invalid, Error, Result};
use crate::quadrature::integrate;
use crate::rng::open_unit;
use crate::special::{beta as beta_fn, ln_gamma, normal_quantile, normal_sf, normal_upper_quantile};
use rand::RngCore;
use serde::{Deserialize, Serialize};

/// Tail regime of a loss law: regular-variation index of the survival
/// function (`Frechet`) or of the cumulative hazard (`Gumbel`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailRegime {
    Frechet { gamma: f64 },
    Gumbel { gamma: f64 },
}

impl TailRegime {
    pub fn gamma(&self) -> f64 {
        match *self {
            TailRegime::Frechet { gamma } | TailRegime::Gumbel { gamma } => gamma,
        }
    }

    pub fn is_heavy(&self) -> bool {
        matches!(self, TailRegime::Frechet { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.gamma();
        if g > 0.0 && g.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("tail index must be positive, got {g}")))
        }
    }
}

/// Spectral weight w on (0, 1] defining the risk measure ∫ w(t) v_{1-βt} dt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightSpec {
    CVaR,
    Power { k: f64 },
    Wang { lambda: f64 },
    LogPower { p: f64, q: f64 },
    Beta { p: f64, q: f64 },
    PolyLog { q: f64 },
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WeightSpec::CVaR => true,
            WeightSpec::Power { k } => k > 0.0,
            WeightSpec::Wang { lambda } => lambda >= 0.0,
            WeightSpec::LogPower { p, q } => p > 0.0 && q > -1.0,
            WeightSpec::Beta { p, q } => p > 0.0 && q > 0.0,
            WeightSpec::PolyLog { q } => q > -1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("inadmissible weight parameters {self:?}")))
        }
    }

    /// Exponent κ with w(t) = t^κ times a slowly varying factor as t → 0.
    pub fn kappa(&self) -> f64 {
        match *self {
            WeightSpec::Power { k } => k - 1.0,
            WeightSpec::LogPower { p, .. } | WeightSpec::Beta { p, .. } => p - 1.0,
            WeightSpec::CVaR | WeightSpec::Wang { .. } | WeightSpec::PolyLog { .. } => 0.0,
        }
    }

    /// log w(e^{-s}), evaluated without forming 1 - t.
    fn ln_weight_at(&self, s: f64) -> f64 {
        match *self {
            WeightSpec::CVaR => 0.0,
            WeightSpec::Power { k } => k.ln() - (k - 1.0) * s,
            WeightSpec::Wang { lambda } => {
                let z = if s >= std::f64::consts::LN_2 {
                    normal_quantile((-s).exp())
                } else {
                    normal_upper_quantile(-(-s).exp_m1())
                };
                -lambda * z - 0.5 * lambda * lambda
            }
            WeightSpec::LogPower { p, q } => {
                (q + 1.0) * p.ln() - ln_gamma(q + 1.0) - (p - 1.0) * s + q * s.ln()
            }
            WeightSpec::Beta { p, q } => {
                -(p - 1.0) * s + (q - 1.0) * (-(-s).exp_m1()).ln() - beta_fn(p, q).ln()
            }
            WeightSpec::PolyLog { q } => q * s.ln() - ln_gamma(q + 1.0),
        }
    }

    /// w(t) for t in (0, 1].
    pub fn value(&self, t: f64) -> f64 {
        if *self == WeightSpec::CVaR {
            return 1.0;
        }
        self.ln_weight_at(-t.ln()).exp()
    }
}

/// Analytic loss law with explicit survival, quantile and sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TailLawSpec {
    /// F̄(x) = (1 + αx/σ)^{-1/α}, x ≥ 0.
    GeneralizedPareto { alpha: f64, sigma: f64 },
    /// F̄(x) = exp(-c x^q), x ≥ 0.
    Weibull { c: f64, q: f64 },
    /// F̄(x) = k x^{-a} (ln x)^b beyond the splice point, uniform bulk below it.
    SurvivalFormula { k: f64, a: f64, b: f64 },
    /// F̄(x) = exp(-x^q ln^r(1+x)), x ≥ 0.
    HazardFormula { q: f64, r: f64 },
    LognormalStd,
    Normal { mean: f64, sd: f64 },
    Mixture {
        base: Box<TailLawSpec>,
        contaminant: Box<TailLawSpec>,
        epsilon: f64,
    },
}

const MAX_DOUBLINGS: usize = 200;

impl TailLawSpec {
    pub fn exponential() -> Self {
        TailLawSpec::Weibull { c: 1.0, q: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            TailLawSpec::GeneralizedPareto { alpha, sigma } => *alpha > 0.0 && *sigma > 0.0,
            TailLawSpec::Weibull { c, q } => *c > 0.0 && *q > 0.0,
            TailLawSpec::SurvivalFormula { k, a, b } => *k > 0.0 && *a > 0.0 && *b >= 0.0,
            TailLawSpec::HazardFormula { q, r } => *q > 0.0 && *r >= 0.0,
            TailLawSpec::LognormalStd => true,
            TailLawSpec::Normal { mean, sd } => mean.is_finite() && *sd > 0.0,
            TailLawSpec::Mixture {
                base,
                contaminant,
                epsilon,
            } => {
                base.validate()?;
                contaminant.validate()?;
                (0.0..=1.0).contains(epsilon)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("inadmissible law parameters {self:?}")))
        }
    }

    /// Splice point and survival there for the formula families.
    pub fn splice(&self) -> Option<(f64, f64)> {
        match *self {
            TailLawSpec::SurvivalFormula { k, a, b } => {
                let f = |y: f64| k.ln() - a * y + b * y.ln();
                if b == 0.0 {
                    let x0 = k.powf(1.0 / a);
                    return Some((x0, 1.0));
                }
                // decreasing beyond ln x = b/a
                let mut y = b / a;
                if f(y) > 0.0 {
                    let (mut lo, mut hi) = (y, y + 1.0);
                    while f(hi) > 0.0 {
                        hi = hi * 2.0 + 1.0;
                    }
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if f(mid) > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    y = hi;
                }
                Some((y.exp(), f(y).exp().min(1.0)))
            }
            TailLawSpec::HazardFormula { .. } => Some((0.0, 1.0)),
            _ => None,
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        match self {
            TailLawSpec::GeneralizedPareto { alpha, sigma } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-(alpha * x / sigma).ln_1p() / alpha).exp()
                }
            }
            TailLawSpec::Weibull { c, q } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-c * x.powf(*q)).exp()
                }
            }
            TailLawSpec::SurvivalFormula { k, a, b } => {
                let (x0, s0) = self.splice().expect("formula family");
                if x <= 0.0 {
                    1.0
                } else if x < x0 {
                    1.0 - (1.0 - s0) * x / x0
                } else {
                    (k.ln() - a * x.ln() + b * x.ln().ln()).exp()
                }
            }
            TailLawSpec::HazardFormula { q, r } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-(x.powf(*q) * x.ln_1p().powf(*r))).exp()
                }
            }
            TailLawSpec::LognormalStd => {
                if x <= 0.0 {
                    1.0
                } else {
                    normal_sf(x.ln())
                }
            }
            TailLawSpec::Normal { mean, sd } => normal_sf((x - mean) / sd),
            TailLawSpec::Mixture {
                base,
                contaminant,
                epsilon,
            } => (1.0 - epsilon) * base.survival(x) + epsilon * contaminant.survival(x),
        }
    }

    /// Value-at-risk v_{1-t} = inf{u : F̄(u) ≤ t} for a tail probability t.
    pub fn quantile(&self, t: f64) -> Result<f64> {
        check_level(t)?;
        match self {
            TailLawSpec::GeneralizedPareto { alpha, sigma } => {
                Ok(sigma / alpha * (-alpha * t.ln()).exp_m1())
            }
            TailLawSpec::Weibull { c, q } => Ok((-t.ln() / c).powf(1.0 / q)),
            TailLawSpec::SurvivalFormula { k, a, b } => {
                let (x0, s0) = self.splice().expect("formula family");
                if t >= s0 {
                    return Ok(x0 * (1.0 - t) / (1.0 - s0));
                }
                let target = t.ln() - k.ln();
                // g(y) = -a y + b ln y - target, decreasing for y ≥ ln x0
                let g = |y: f64| -a * y + b * y.ln() - target;
                let dg = |y: f64| -a + b / y;
                let lo = x0.ln().max(f64::MIN_POSITIVE);
                let guess = (-target / a).max(lo);
                monotone_root(g, dg, lo, guess, false).map(f64::exp)
            }
            TailLawSpec::HazardFormula { q, r } => {
                let target = (-t.ln()).ln();
                // h(y) = q y + r ln ln(1 + e^y) - target, increasing
                let h = |y: f64| {
                    let l = if y > 36.0 { y + (-y).exp() } else { y.exp().ln_1p() };
                    q * y + r * l.ln() - target
                };
                let dh = |y: f64| {
                    let e = y.exp();
                    let l = if y > 36.0 { y + (-y).exp() } else { e.ln_1p() };
                    q + r * (e / (1.0 + e)) / l
                };
                let guess = target / (q + r.min(1.0) * 0.5);
                monotone_root(h, dh, f64::NEG_INFINITY, guess, true).map(f64::exp)
            }
            TailLawSpec::LognormalStd => Ok(normal_upper_quantile(t).exp()),
            TailLawSpec::Normal { mean, sd } => Ok(mean + sd * normal_upper_quantile(t)),
            TailLawSpec::Mixture {
                base,
                contaminant,
                epsilon,
            } => {
                if *epsilon == 0.0 {
                    return base.quantile(t);
                }
                if *epsilon == 1.0 {
                    return contaminant.quantile(t);
                }
                let q1 = base.quantile(t)?;
                let q2 = contaminant.quantile(t)?;
                let (mut lo, mut hi) = (q1.min(q2), q1.max(q2));
                for _ in 0..400 {
                    if hi - lo <= 1e-14 * hi.abs().max(1e-300) {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if self.survival(mid) <= t {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(hi)
            }
        }
    }

    /// Regime and index of the tail, when the law has one.
    pub fn regime(&self) -> Option<TailRegime> {
        match self {
            TailLawSpec::GeneralizedPareto { alpha, .. } => {
                Some(TailRegime::Frechet { gamma: 1.0 / alpha })
            }
            TailLawSpec::Weibull { q, .. } | TailLawSpec::HazardFormula { q, .. } => {
                Some(TailRegime::Gumbel { gamma: *q })
            }
            TailLawSpec::SurvivalFormula { a, .. } => Some(TailRegime::Frechet { gamma: *a }),
            TailLawSpec::LognormalStd => None,
            TailLawSpec::Normal { .. } => Some(TailRegime::Gumbel { gamma: 2.0 }),
            TailLawSpec::Mixture {
                base,
                contaminant,
                epsilon,
            } => {
                if *epsilon == 0.0 {
                    return base.regime();
                }
                if *epsilon == 1.0 {
                    return contaminant.regime();
                }
                match (base.regime()?, contaminant.regime()?) {
                    (TailRegime::Frechet { gamma: a }, TailRegime::Frechet { gamma: b }) => {
                        Some(TailRegime::Frechet { gamma: a.min(b) })
                    }
                    (f @ TailRegime::Frechet { .. }, _) | (_, f @ TailRegime::Frechet { .. }) => {
                        Some(f)
                    }
                    (TailRegime::Gumbel { gamma: a }, TailRegime::Gumbel { gamma: b }) => {
                        Some(TailRegime::Gumbel { gamma: a.min(b) })
                    }
                }
            }
        }
    }

    /// One inverse-transform draw.
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self {
            TailLawSpec::Mixture {
                base,
                contaminant,
                epsilon,
            } => {
                let branch = open_unit(rng);
                if branch < *epsilon {
                    contaminant.draw(rng)
                } else {
                    base.draw(rng)
                }
            }
            _ => self.quantile(open_unit(rng)),
        }
    }

    /// n inverse-transform draws.
    pub fn sample<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    pub fn risk_measure(&self, w: &WeightSpec, beta: f64) -> Result<f64> {
        if let Some(TailRegime::Frechet { gamma }) = self.regime() {
            if 1.0 / gamma >= w.kappa() + 1.0 {
                return Err(Error::DivergentIntegral);
            }
        }
        risk_measure(self, w, beta)
    }
}

// Safeguarded Newton for a monotone scalar equation f(y) = 0 on [lo, ∞).
fn monotone_root<F, D>(f: F, df: D, lo: f64, guess: f64, increasing: bool) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let sign = if increasing { 1.0 } else { -1.0 };
    let g = |y: f64| sign * f(y);
    // bracket: g(a) < 0 < g(b)
    let mut a = if lo.is_finite() { lo } else { guess - 1.0 };
    let mut b = guess.max(a) + 1.0;
    let mut step = 1.0;
    let mut n = 0;
    while g(a) > 0.0 {
        if lo.is_finite() {
            return Ok(lo);
        }
        step *= 2.0;
        a -= step;
        n += 1;
        if n > MAX_DOUBLINGS {
            return Err(Error::NonConvergence { what: "quantile bracketing", iterations: n });
        }
    }
    step = 1.0;
    while g(b) < 0.0 {
        a = b;
        step *= 2.0;
        b += step;
        n += 1;
        if n > MAX_DOUBLINGS {
            return Err(Error::NonConvergence { what: "quantile bracketing", iterations: n });
        }
    }
    let mut y = guess.clamp(a, b);
    for it in 0..200 {
        let v = g(y);
        if v == 0.0 {
            return Ok(y);
        }
        if v < 0.0 {
            a = y;
        } else {
            b = y;
        }
        let d = sign * df(y);
        let mut next = y - v / d;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        if (next - y).abs() <= 1e-15 * y.abs().max(1.0) || b - a <= 1e-15 * a.abs().max(1.0) {
            return Ok(next);
        }
        y = next;
        let _ = it;
    }
    Ok(y)
}

/// Anything with a tail quantile function t ↦ v_{1-t}.
pub trait TailQuantile {
    fn tail_quantile(&self, t: f64) -> Result<f64>;
}

impl TailQuantile for TailLawSpec {
    fn tail_quantile(&self, t: f64) -> Result<f64> {
        self.quantile(t)
    }
}

impl<F: Fn(f64) -> Result<f64>> TailQuantile for F {
    fn tail_quantile(&self, t: f64) -> Result<f64> {
        self(t)
    }
}

/// Smallest tail level the integrator will query.
pub const MIN_LEVEL: f64 = 1e-300;

/// ∫₀¹ w(t) v_{1-βt} dt by adaptive quadrature in s = -ln t.
pub fn risk_measure<Q: TailQuantile + ?Sized>(q: &Q, w: &WeightSpec, beta: f64) -> Result<f64> {
    check_level(beta)?;
    w.validate()?;
    let s_max = beta.ln() - MIN_LEVEL.ln();
    let failure: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
    let mut integrand = |s: f64| -> f64 {
        if failure.borrow().is_some() {
            return 0.0;
        }
        match q.tail_quantile(beta * (-s).exp()) {
            Ok(v) => {
                if v == 0.0 {
                    0.0
                } else {
                    v * (w.ln_weight_at(s) - s).exp()
                }
            }
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    let mut total = 0.0f64;
    let mut first = 0.0f64;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut last = f64::INFINITY;
    let mut chunk = 0;
    loop {
        let b_clip = b.min(s_max);
        let (c, _) = integrate(&mut integrand, a, b_clip, 1e-15 * total.abs(), 1e-10)?;
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        if !c.is_finite() {
            return Err(Error::DivergentIntegral);
        }
        total += c;
        if chunk == 0 {
            first = c.abs().max(1e-300);
        }
        if total.abs() > 1e12 * first {
            return Err(Error::DivergentIntegral);
        }
        if chunk >= 2 && c.abs() <= 1e-12 * total.abs() {
            break;
        }
        if b_clip >= s_max {
            if c.abs() > 1e-7 * total.abs() {
                return Err(Error::DivergentIntegral);
            }
            break;
        }
        if chunk >= 4 && c.abs() > last && c.abs() > 1e-3 * total.abs() {
            // not decaying
            return Err(Error::DivergentIntegral);
        }
        last = c.abs();
        a = b;
        b *= 2.0;
        chunk += 1;
    }
    Ok(total)
}
