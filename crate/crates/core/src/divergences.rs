//! φ-divergence generators, their convex conjugates and inverses.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhiSpec {
    /// φ(t) = ½(t-1)²
    ChiSquare,
    /// φ(t) = t ln t - t + 1
    KL,
    /// φ(t) = (t^p - 1 - p(t-1)) / (p(p-1)), p > 1
    CressieRead { p: f64 },
    /// φ(t) = e^{t-1} - t
    ExpShifted,
}

/// Growth of φ at infinity: φ ∈ RV(p), or log φ ∈ RV(p).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GrowthClass {
    PolynomialRV(f64),
    SuperPolynomial(f64),
}

// Σ_{k≥2} C(p,k) d^k / (p(p-1)), for small |d|.
fn cressie_series(p: f64, d: f64) -> f64 {
    let mut coef = 0.5; // C(p,2)/(p(p-1))
    let mut pow = d * d;
    let mut sum = coef * pow;
    for k in 3..60 {
        coef *= (p - (k - 1) as f64) / k as f64;
        pow *= d;
        let term = coef * pow;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

impl PhiSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PhiSpec::CressieRead { p } if !(p > 1.0 && p.is_finite()) => Err(Error::InvalidInput(
                format!("Cressie-Read exponent must exceed 1, got {p}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn growth_class(&self) -> GrowthClass {
        match *self {
            PhiSpec::ChiSquare => GrowthClass::PolynomialRV(2.0),
            PhiSpec::KL => GrowthClass::PolynomialRV(1.0),
            PhiSpec::CressieRead { p } => GrowthClass::PolynomialRV(p),
            PhiSpec::ExpShifted => GrowthClass::SuperPolynomial(1.0),
        }
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::DomainError(format!("φ undefined at t = {t}")));
        }
        Ok(self.phi_shifted(t - 1.0))
    }

    /// φ(1 + d) for d ≥ -1, accurate when d is small.
    pub fn phi_shifted(&self, d: f64) -> f64 {
        match *self {
            PhiSpec::ChiSquare => 0.5 * d * d,
            PhiSpec::KL => {
                if d == -1.0 {
                    1.0
                } else if d.abs() < 0.1 {
                    cressie_series(1.0, d)
                } else {
                    (1.0 + d) * d.ln_1p() - d
                }
            }
            PhiSpec::CressieRead { p } => {
                if d.abs() < 0.1 {
                    cressie_series(p, d)
                } else {
                    ((p * d.ln_1p()).exp_m1() - p * d) / (p * (p - 1.0))
                }
            }
            PhiSpec::ExpShifted => {
                if d.abs() < 0.1 {
                    let mut term = d * d / 2.0;
                    let mut sum = term;
                    for k in 3..40 {
                        term *= d / k as f64;
                        sum += term;
                        if term.abs() <= 1e-17 * sum {
                            break;
                        }
                    }
                    sum
                } else {
                    d.exp_m1() - d
                }
            }
        }
    }

    /// φ'(1 + d).
    pub fn phi_prime_shifted(&self, d: f64) -> f64 {
        match *self {
            PhiSpec::ChiSquare => d,
            PhiSpec::KL => d.ln_1p(),
            PhiSpec::CressieRead { p } => ((p - 1.0) * d.ln_1p()).exp_m1() / (p - 1.0),
            PhiSpec::ExpShifted => d.exp_m1(),
        }
    }

    pub fn phi_prime(&self, t: f64) -> f64 {
        self.phi_prime_shifted(t - 1.0)
    }

    pub fn phi_second(&self, t: f64) -> f64 {
        match *self {
            PhiSpec::ChiSquare => 1.0,
            PhiSpec::KL => 1.0 / t,
            PhiSpec::CressieRead { p } => t.powf(p - 2.0),
            PhiSpec::ExpShifted => (t - 1.0).exp(),
        }
    }

    /// φ*(s) = sup_t {st - φ(t)}; +∞ outside the effective domain.
    ///
    /// ChiSquare, KL and Cressie-Read take the supremum over t ≥ 0.
    /// ExpShifted uses (1+s) ln(1+s), the supremum over all real t.
    pub fn conjugate(&self, s: f64) -> f64 {
        match *self {
            PhiSpec::ChiSquare => {
                if s >= -1.0 {
                    s + 0.5 * s * s
                } else {
                    -0.5
                }
            }
            PhiSpec::KL => s.exp_m1(),
            PhiSpec::CressieRead { p } => {
                let a = 1.0 + (p - 1.0) * s;
                if a >= 0.0 {
                    (p / (p - 1.0) * a.ln()).exp_m1() / p
                } else {
                    -1.0 / p
                }
            }
            PhiSpec::ExpShifted => {
                if s > -1.0 {
                    (1.0 + s) * s.ln_1p()
                } else if s == -1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// (φ*)'(s): the optimal likelihood ratio at dual slope s.
    pub fn conjugate_prime(&self, s: f64) -> f64 {
        match *self {
            PhiSpec::ChiSquare => (1.0 + s).max(0.0),
            PhiSpec::KL => s.exp(),
            PhiSpec::CressieRead { p } => {
                let a = 1.0 + (p - 1.0) * s;
                if a > 0.0 {
                    a.powf(1.0 / (p - 1.0))
                } else {
                    0.0
                }
            }
            PhiSpec::ExpShifted => {
                if s > -1.0 {
                    s.ln_1p() + 1.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn conjugate_second(&self, s: f64) -> f64 {
        match *self {
            PhiSpec::ChiSquare => {
                if s >= -1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            PhiSpec::KL => s.exp(),
            PhiSpec::CressieRead { p } => {
                let a = 1.0 + (p - 1.0) * s;
                if a > 0.0 {
                    a.powf((2.0 - p) / (p - 1.0))
                } else {
                    0.0
                }
            }
            PhiSpec::ExpShifted => {
                if s > -1.0 {
                    1.0 / (1.0 + s)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// The unique t ≥ 1 with φ(t) = y.
    pub fn inverse_upper(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::DomainError(format!("φ inverse needs y ≥ 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(1.0);
        }
        if y.is_infinite() {
            return Ok(f64::INFINITY);
        }
        if let PhiSpec::ChiSquare = self {
            return Ok(1.0 + (2.0 * y).sqrt());
        }
        // g(d) = φ(1+d) - y is increasing and convex on d ≥ 0, so Newton from
        // a point right of the root decreases monotonically onto it.
        let mut d: f64 = (2.0 * y).sqrt().min(1.0);
        let mut n = 0;
        while self.phi_shifted(d) < y {
            d *= 2.0;
            n += 1;
            if n > 2000 {
                return Err(Error::NonConvergence { what: "φ inverse bracketing", iterations: n });
            }
        }
        for it in 0..200 {
            let g = self.phi_shifted(d) - y;
            let step = g / self.phi_prime_shifted(d);
            let next = d - step;
            if !(next < d) || next <= 0.0 {
                // round-off floor or root squeezed towards zero
                if next <= 0.0 {
                    d *= 0.5;
                    continue;
                }
                return Ok(1.0 + d);
            }
            if step <= 1e-15 * d {
                return Ok(1.0 + next);
            }
            d = next;
            let _ = it;
        }
        Err(Error::NonConvergence { what: "φ inverse", iterations: 200 })
    }
}
