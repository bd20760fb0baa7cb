use super::Ambiguity;
use crate::divergences::GrowthClass;
use crate::error::{Error, Result};
use crate::tail_models::TailRegime;
use serde::{Deserialize, Serialize};

/// First-order growth of the worst-case risk relative to the nominal as β → 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Inflation {
    /// log ρ_wc / log ρ_nom → value
    LogRatio(f64),
    /// ρ_wc / ρ_nom → value
    ValueRatio(f64),
    Infinite,
}

pub fn inflation_diagnostic(regime: TailRegime, ambiguity: Ambiguity) -> Result<Inflation> {
    regime.validate()?;
    let gamma = regime.gamma();
    Ok(match ambiguity {
        Ambiguity::Wasserstein { p, .. } => match regime {
            TailRegime::Frechet { .. } => {
                if gamma <= p {
                    return Err(Error::PreconditionViolated(format!(
                        "Wasserstein rate needs γ > p, got γ = {gamma}, p = {p}"
                    )));
                }
                Inflation::LogRatio(gamma / p)
            }
            TailRegime::Gumbel { .. } => Inflation::Infinite,
        },
        Ambiguity::PhiBall { phi, .. } => match phi.growth_class() {
            GrowthClass::PolynomialRV(p) if p <= 1.0 => Inflation::Infinite,
            GrowthClass::PolynomialRV(p) => match regime {
                TailRegime::Frechet { .. } => Inflation::LogRatio(p / (p - 1.0)),
                TailRegime::Gumbel { .. } => Inflation::ValueRatio((p / (p - 1.0)).powf(1.0 / gamma)),
            },
            GrowthClass::SuperPolynomial(_) => match regime {
                TailRegime::Frechet { .. } => Inflation::LogRatio(1.0),
                TailRegime::Gumbel { .. } => Inflation::ValueRatio(1.0),
            },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::PhiSpec;
    use approx::assert_relative_eq;

    #[test]
    fn predictions() {
        let w = Ambiguity::Wasserstein { p: 1.0, delta: 0.1 };
        let chi = Ambiguity::PhiBall { phi: PhiSpec::ChiSquare, delta: 0.1 };
        assert_eq!(inflation_diagnostic(TailRegime::Frechet { gamma: 3.0 }, w).unwrap(), Inflation::LogRatio(3.0));
        assert_eq!(inflation_diagnostic(TailRegime::Frechet { gamma: 3.0 }, chi).unwrap(), Inflation::LogRatio(2.0));
        match inflation_diagnostic(TailRegime::Gumbel { gamma: 2.0 }, chi).unwrap() {
            Inflation::ValueRatio(r) => assert_relative_eq!(r, 2f64.sqrt(), max_relative = 1e-15),
            other => panic!("{other:?}"),
        }
        assert_eq!(inflation_diagnostic(TailRegime::Gumbel { gamma: 2.0 }, w).unwrap(), Inflation::Infinite);
        assert!(inflation_diagnostic(TailRegime::Frechet { gamma: 0.8 }, w).is_err());
        let kl = Ambiguity::PhiBall { phi: PhiSpec::KL, delta: 0.1 };
        assert_eq!(inflation_diagnostic(TailRegime::Frechet { gamma: 3.0 }, kl).unwrap(), Inflation::Infinite);
    }
}
