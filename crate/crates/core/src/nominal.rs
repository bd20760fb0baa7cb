//! EVT-spliced nominal law: bulk below v, power or Weibull-type tail above.

use crate::error::{check_level, invalid, Error, Result};
use crate::evt::{EmpiricalSample, EvtCalibration};
use crate::quadrature::integrate;
use crate::rng::open_unit;
use crate::tail_models::{risk_measure, TailLawSpec, TailQuantile, TailRegime, WeightSpec};
use rand::RngCore;

#[derive(Debug, Clone, PartialEq)]
pub enum NominalBulk {
    /// Analytic law, used below v.
    Law(TailLawSpec),
    /// The full sample; points ≤ v carry weight 1/n each.
    Empirical(EmpiricalSample),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NominalKind {
    Oracle,
    DataDriven,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NominalModel {
    pub bulk: NominalBulk,
    pub v: f64,
    pub tail_mass: f64,
    pub regime: TailRegime,
    pub kind: NominalKind,
}

fn check_splice(v: f64, m: f64, regime: &TailRegime) -> Result<()> {
    regime.validate()?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::PreconditionViolated(format!(
            "tail extrapolation needs a positive splice point, got {v}"
        )));
    }
    if !(m > 0.0 && m < 1.0) {
        return Err(invalid(format!("tail mass {m} outside (0,1)")));
    }
    Ok(())
}

/// Data-driven nominal from a calibration of the same sample.
pub fn build_nominal(cal: &EvtCalibration, sample: &EmpiricalSample) -> Result<NominalModel> {
    check_splice(cal.v, cal.tail_mass, &cal.regime)?;
    Ok(NominalModel {
        bulk: NominalBulk::Empirical(sample.clone()),
        v: cal.v,
        tail_mass: cal.tail_mass,
        regime: cal.regime,
        kind: NominalKind::DataDriven,
    })
}

/// Oracle nominal: true law below v_{1-β₀}, extrapolated tail above.
pub fn oracle_nominal(law: &TailLawSpec, beta0: f64, regime: Option<TailRegime>) -> Result<NominalModel> {
    check_level(beta0)?;
    let regime = regime
        .or_else(|| law.regime())
        .ok_or_else(|| invalid("law has no tail regime; supply one"))?;
    let v = law.quantile(beta0)?;
    check_splice(v, beta0, &regime)?;
    Ok(NominalModel {
        bulk: NominalBulk::Law(law.clone()),
        v,
        tail_mass: beta0,
        regime,
        kind: NominalKind::Oracle,
    })
}

impl NominalModel {
    pub fn survival(&self, x: f64) -> f64 {
        if x >= self.v {
            let r = x / self.v;
            match self.regime {
                TailRegime::Frechet { gamma } => self.tail_mass * r.powf(-gamma),
                TailRegime::Gumbel { gamma } => (r.powf(gamma) * self.tail_mass.ln()).exp(),
            }
        } else {
            match &self.bulk {
                NominalBulk::Law(l) => l.survival(x),
                NominalBulk::Empirical(s) => s.count_above(x) as f64 / s.n() as f64,
            }
        }
    }

    /// Tail-formula quantile, valid for t ≤ tail mass.
    fn tail_inverse(&self, t: f64) -> f64 {
        match self.regime {
            TailRegime::Frechet { gamma } => self.v * (t / self.tail_mass).powf(-1.0 / gamma),
            TailRegime::Gumbel { gamma } => self.v * (t.ln() / self.tail_mass.ln()).powf(1.0 / gamma),
        }
    }

    pub fn quantile(&self, t: f64) -> Result<f64> {
        check_level(t)?;
        if t <= self.tail_mass {
            return Ok(self.tail_inverse(t));
        }
        match &self.bulk {
            NominalBulk::Law(l) => l.quantile(t),
            NominalBulk::Empirical(s) => {
                let j = ((s.n() as f64 * t + 1e-9).floor() as usize + 1).min(s.n());
                Ok(s.order(j))
            }
        }
    }

    /// Map V ∈ (0, tail mass] to a tail draw; V = tail mass gives v.
    pub fn tail_draw(&self, v_level: f64) -> f64 {
        self.tail_inverse(v_level)
    }

    pub fn sample_tail<R: RngCore + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count)
            .map(|_| {
                // V = 1 - U ∈ (0, β̂₀], drawn directly
                let v_level = self.tail_mass * (1.0 - open_unit(rng));
                self.tail_draw(v_level.max(f64::MIN_POSITIVE))
            })
            .collect()
    }

    /// ∫₀^b v_{1-t} dt over the tail part, b ≤ tail mass.
    fn tail_integral(&self, b: f64) -> Result<f64> {
        match self.regime {
            TailRegime::Frechet { gamma } => {
                if gamma <= 1.0 {
                    return Err(Error::DivergentIntegral);
                }
                let e = 1.0 - 1.0 / gamma;
                Ok(self.v * (b / self.tail_mass).powf(-1.0 / gamma) * b / e)
            }
            TailRegime::Gumbel { .. } => {
                let q = |t: f64| -> Result<f64> { Ok(self.tail_inverse(t)) };
                Ok(b * risk_measure(&q, &WeightSpec::CVaR, b)?)
            }
        }
    }

    /// Exact CVaR at level β.
    pub fn cvar(&self, beta: f64) -> Result<f64> {
        check_level(beta)?;
        let m = self.tail_mass;
        if beta <= m {
            return Ok(self.tail_integral(beta)? / beta);
        }
        let mut total = self.tail_integral(m)?;
        match &self.bulk {
            NominalBulk::Law(l) => {
                let mut err = None;
                let (v, _) = integrate(
                    |t| match l.quantile(t) {
                        Ok(x) => x,
                        Err(e) => {
                            err = Some(e);
                            0.0
                        }
                    },
                    m,
                    beta,
                    0.0,
                    1e-12,
                )?;
                if let Some(e) = err {
                    return Err(e);
                }
                total += v;
            }
            NominalBulk::Empirical(s) => {
                let n = s.n() as f64;
                let mut j = (m * n).round() as usize + 1;
                let mut lo = m;
                while lo < beta && j <= s.n() {
                    let hi = (j as f64 / n).min(beta);
                    total += s.order(j) * (hi - lo);
                    lo = hi;
                    j += 1;
                }
            }
        }
        Ok(total / beta)
    }
}

impl TailQuantile for NominalModel {
    fn tail_quantile(&self, t: f64) -> Result<f64> {
        self.quantile(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evt::{calibrate, RegimeChoice};
    use approx::assert_relative_eq;

    fn heavy() -> NominalModel {
        NominalModel {
            bulk: NominalBulk::Law(TailLawSpec::exponential()),
            v: 2.0,
            tail_mass: 0.1,
            regime: TailRegime::Frechet { gamma: 2.0 },
            kind: NominalKind::Oracle,
        }
    }

    fn light() -> NominalModel {
        NominalModel {
            regime: TailRegime::Gumbel { gamma: 1.0 },
            ..heavy()
        }
    }

    #[test]
    fn tail_formula_points() {
        assert_relative_eq!(heavy().quantile(0.001).unwrap(), 20.0, max_relative = 1e-13);
        assert_relative_eq!(light().quantile(0.01).unwrap(), 4.0, max_relative = 1e-13);
        assert_relative_eq!(heavy().survival(20.0), 0.001, max_relative = 1e-13);
        assert_eq!(heavy().survival(2.0), 0.1);
        assert_eq!(heavy().quantile(0.1).unwrap(), 2.0);
    }

    #[test]
    fn sampler_map() {
        assert_eq!(heavy().tail_draw(0.1), 2.0);
        assert_relative_eq!(heavy().tail_draw(1.0 - 0.999), 20.0, max_relative = 1e-10);
        assert_relative_eq!(light().tail_draw(1.0 - 0.99), 4.0, max_relative = 1e-10);
    }

    #[test]
    fn data_mode_splice() {
        let s = EmpiricalSample::new((1..=10).map(|i| i as f64).collect()).unwrap();
        let c = calibrate(&s, 0.3, RegimeChoice::Heavy, 0.5).unwrap();
        assert_eq!(c.k_n, 3);
        let m = build_nominal(&c, &s).unwrap();
        assert_eq!(m.v, 8.0);
        assert_relative_eq!(m.tail_mass, 0.2, max_relative = 1e-15);
        assert_eq!(m.survival(0.5), 1.0);
        assert_eq!(m.survival(8.0), m.tail_mass);
        // bulk quantiles are order statistics
        assert_eq!(m.quantile(0.25).unwrap(), 8.0);
        assert_eq!(m.quantile(0.35).unwrap(), 7.0);
        assert_eq!(m.quantile(0.95).unwrap(), 1.0);
    }

    #[test]
    fn oracle_splice_is_exact() {
        let law = TailLawSpec::GeneralizedPareto { alpha: 1.0 / 3.0, sigma: 1.0 };
        let m = oracle_nominal(&law, 0.05, None).unwrap();
        assert_eq!(m.survival(m.v), 0.05);
        assert_relative_eq!(law.survival(m.v), 0.05, max_relative = 1e-12);
    }

    #[test]
    fn cvar_matches_quadrature() {
        let law = TailLawSpec::GeneralizedPareto { alpha: 1.0 / 3.0, sigma: 1.0 };
        let m = oracle_nominal(&law, 0.05, None).unwrap();
        for beta in [0.3, 0.05, 1e-3] {
            let exact = m.cvar(beta).unwrap();
            let quad = risk_measure(&m, &WeightSpec::CVaR, beta).unwrap();
            assert_relative_eq!(exact, quad, max_relative = 1e-6);
        }
        let l = light();
        assert_relative_eq!(l.cvar(0.01).unwrap(), risk_measure(&l, &WeightSpec::CVaR, 0.01).unwrap(), max_relative = 1e-8);
    }
}
