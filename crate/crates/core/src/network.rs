//! Financial-network contagion loss and pushforward of factor samples.

use crate::error::{invalid, Error, Result};
use crate::rng::StreamKey;
use crate::special::student_t_sf;
use crate::tail_models::TailLawSpec;
use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
use rand::RngCore;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

/// A_λ = (1-λ)A₀ + λA₁ with block indicators A₀ and uniform A₁ = 1/K.
pub fn interpolated_exposure(d: usize, k: usize, lambda: f64) -> Result<DMatrix<f64>> {
    if k == 0 || d % k != 0 {
        return Err(Error::DimensionMismatch { expected: k.max(1) * (d / k.max(1)).max(1), got: d });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid(format!("λ must lie in [0,1], got {lambda}")));
    }
    let q = d / k;
    Ok(DMatrix::from_fn(k, d, |i, j| {
        let block = if j / q == i { 1.0 } else { 0.0 };
        (1.0 - lambda) * block + lambda / k as f64
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    exposure: DMatrix<f64>,
    cross: DMatrix<f64>,
    /// Ĉ (I - C)⁻¹ A, formed once.
    transfer: DMatrix<f64>,
    /// Norm order; f64::INFINITY for the max norm.
    pub norm: f64,
    pub normalize: bool,
    pub clamp_negative: bool,
}

impl NetworkModel {
    pub fn new(
        exposure: DMatrix<f64>,
        cross: DMatrix<f64>,
        norm: f64,
        normalize: bool,
        clamp_negative: bool,
    ) -> Result<Self> {
        let k = exposure.nrows();
        if cross.nrows() != k || cross.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, got: cross.nrows() });
        }
        if exposure.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(invalid("exposure entries must lie in [0,1]"));
        }
        if cross.iter().any(|c| *c < 0.0) {
            return Err(invalid("cross-holdings must be nonnegative"));
        }
        if !(norm >= 1.0) {
            return Err(invalid(format!("norm order must be ≥ 1, got {norm}")));
        }
        let col: Vec<f64> = (0..k).map(|j| cross.column(j).sum()).collect();
        if col.iter().any(|s| *s > 1.0) {
            return Err(invalid("cross-holding column sums must not exceed 1"));
        }
        let c_hat = DMatrix::from_diagonal(&DVector::from_iterator(k, col.iter().map(|s| 1.0 - s)));
        let lu = (DMatrix::identity(k, k) - &cross).lu();
        let solved = lu
            .solve(&exposure)
            .ok_or_else(|| Error::SingularSystem("I - C is singular".into()))?;
        if solved.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularSystem("I - C is numerically singular".into()));
        }
        Ok(NetworkModel {
            transfer: c_hat * solved,
            exposure,
            cross,
            norm,
            normalize,
            clamp_negative,
        })
    }

    /// No cross-holdings: F = A z.
    pub fn direct(exposure: DMatrix<f64>, norm: f64, normalize: bool, clamp_negative: bool) -> Result<Self> {
        let k = exposure.nrows();
        Self::new(exposure, DMatrix::zeros(k, k), norm, normalize, clamp_negative)
    }

    pub fn assets(&self) -> usize {
        self.exposure.ncols()
    }

    pub fn firms(&self) -> usize {
        self.exposure.nrows()
    }

    pub fn cross_holdings(&self) -> &DMatrix<f64> {
        &self.cross
    }

    pub fn loss(&self, z: &[f64]) -> Result<f64> {
        let d = self.assets();
        if z.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: z.len() });
        }
        let x = DVector::from_iterator(d, z.iter().map(|v| if self.clamp_negative { v.max(0.0) } else { *v }));
        let f = &self.transfer * x;
        let norm = if self.norm.is_infinite() {
            f.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        } else if self.norm == 1.0 {
            f.iter().map(|v| v.abs()).sum()
        } else {
            f.iter().map(|v| v.abs().powf(self.norm)).sum::<f64>().powf(1.0 / self.norm)
        };
        Ok(if self.normalize { norm / d as f64 } else { norm })
    }
}

pub fn network_loss(model: &NetworkModel, z: &[f64]) -> Result<f64> {
    model.loss(z)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Copula {
    Independent,
    /// Student-t with ν degrees of freedom; holds the Cholesky factor of the correlation.
    StudentT { nu: f64, chol: DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorLawSpec {
    pub marginals: Vec<TailLawSpec>,
    pub copula: Copula,
}

impl FactorLawSpec {
    pub fn independent(marginals: Vec<TailLawSpec>) -> Self {
        FactorLawSpec { marginals, copula: Copula::Independent }
    }

    pub fn student_t(marginals: Vec<TailLawSpec>, nu: f64, correlation: DMatrix<f64>) -> Result<Self> {
        let d = marginals.len();
        if correlation.nrows() != d || correlation.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: correlation.nrows() });
        }
        if !(nu > 0.0) {
            return Err(invalid(format!("degrees of freedom must be positive, got {nu}")));
        }
        for i in 0..d {
            if (correlation[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(invalid("correlation must have unit diagonal"));
            }
            for j in 0..i {
                if (correlation[(i, j)] - correlation[(j, i)]).abs() > 1e-12 {
                    return Err(invalid("correlation must be symmetric"));
                }
            }
        }
        let chol = correlation
            .cholesky()
            .ok_or_else(|| invalid("correlation is not positive definite"))?
            .l();
        Ok(FactorLawSpec { marginals, copula: Copula::StudentT { nu, chol } })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// One factor vector.
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match &self.copula {
            Copula::Independent => self.marginals.iter().map(|m| m.draw(rng)).collect(),
            Copula::StudentT { nu, chol } => {
                let d = self.dim();
                let g = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
                let chi: f64 = ChiSquared::new(*nu).expect("ν > 0").sample(rng);
                let scale = (chi / nu).sqrt();
                let x = chol * g;
                self.marginals
                    .iter()
                    .zip(x.iter())
                    .map(|(m, xi)| {
                        // tail probability of the uniform, P(T > x), without forming 1 - u
                        let t = student_t_sf(xi / scale, *nu).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                        m.quantile(t)
                    })
                    .collect()
            }
        }
    }
}

const CHUNK: usize = 1024;

/// n losses L(ξ_i), sorted descending; chunk c of 1024 draws uses substream c.
pub fn pushforward_losses(
    factors: &FactorLawSpec,
    model: &NetworkModel,
    n: usize,
    key: StreamKey,
) -> Result<Vec<f64>> {
    if factors.dim() != model.assets() {
        return Err(Error::DimensionMismatch { expected: model.assets(), got: factors.dim() });
    }
    let chunks: Vec<Result<Vec<f64>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = key.child(c as u64).rng();
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| model.loss(&factors.draw(&mut rng)?)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for c in chunks {
        out.extend(c?);
    }
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exposure_shapes() {
        let a0 = interpolated_exposure(4, 2, 0.0).unwrap();
        assert_eq!(a0, DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]));
        let a1 = interpolated_exposure(4, 2, 1.0).unwrap();
        assert!(a1.iter().all(|v| *v == 0.5));
        let ah = interpolated_exposure(4, 2, 0.5).unwrap();
        assert_eq!(ah, (a0 + a1) * 0.5);
        assert!(matches!(interpolated_exposure(5, 2, 0.5), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn hand_losses() {
        let a = interpolated_exposure(4, 2, 1.0).unwrap();
        let m = NetworkModel::direct(a.clone(), 1.0, true, false).unwrap();
        assert_relative_eq!(m.loss(&[1.0; 4]).unwrap(), 1.0, max_relative = 1e-15);
        let inf = NetworkModel::direct(a, f64::INFINITY, true, false).unwrap();
        assert_relative_eq!(inf.loss(&[1.0; 4]).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn cross_holdings_solve() {
        let a = interpolated_exposure(2, 2, 0.0).unwrap();
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let m = NetworkModel::new(a, c, 1.0, false, false).unwrap();
        // Ĉ = ½ I, (I - C)⁻¹ (1,1) = (2,2) → F = (1,1)
        assert_relative_eq!(m.loss(&[1.0, 1.0]).unwrap(), 2.0, max_relative = 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(NetworkModel::new(interpolated_exposure(2, 2, 0.0).unwrap(), bad, 1.0, false, false).is_err());
    }

    #[test]
    fn empty_pushforward() {
        let f = FactorLawSpec::independent(vec![TailLawSpec::exponential()]);
        let m = NetworkModel::direct(DMatrix::identity(1, 1), 1.0, false, false).unwrap();
        assert!(pushforward_losses(&f, &m, 0, StreamKey::root(1)).unwrap().is_empty());
    }
}
