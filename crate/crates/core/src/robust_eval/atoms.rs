use crate::error::{check_level, invalid, Result};
use crate::evt::EmpiricalSample;
use crate::tail_models::TailQuantile;

/// Finitely supported law, atoms sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAtoms {
    z: Vec<f64>,
    w: Vec<f64>,
    // cw[j] = Σ_{i<j} w_i and czw[j] = Σ_{i<j} w_i z_i
    cw: Vec<f64>,
    czw: Vec<f64>,
}

impl WeightedAtoms {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(invalid("atoms and weights must be nonempty and of equal length"));
        }
        if values.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("atoms must be finite and weights nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let z = idx.iter().map(|&i| values[i]).collect();
        let w = idx.iter().map(|&i| weights[i] / total).collect();
        Ok(Self::from_sorted(z, w))
    }

    fn from_sorted(z: Vec<f64>, w: Vec<f64>) -> Self {
        let mut cw = Vec::with_capacity(z.len() + 1);
        let mut czw = Vec::with_capacity(z.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        cw.push(0.0);
        czw.push(0.0);
        for (zi, wi) in z.iter().zip(&w) {
            a += wi;
            b += wi * zi;
            cw.push(a);
            czw.push(b);
        }
        WeightedAtoms { z, w, cw, czw }
    }

    pub fn uniform(sample: &EmpiricalSample) -> Self {
        let n = sample.n();
        Self::from_sorted(sample.values().to_vec(), vec![1.0 / n as f64; n])
    }

    /// Merge two descending blocks (e.g. bulk data and tail draws).
    pub fn merge(blocks: &[(&[f64], f64)]) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = blocks
            .iter()
            .flat_map(|(vals, wt)| vals.iter().map(move |&v| (v, *wt)))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (z, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("merged weights sum to {total}, expected 1")));
        }
        Ok(Self::from_sorted(z, w))
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// #{z_i > t}.
    pub fn count_above(&self, t: f64) -> usize {
        self.z.partition_point(|&z| z > t)
    }

    /// Σ_{i<j} w_i: mass of the top j atoms.
    pub fn mass_of_top(&self, j: usize) -> f64 {
        self.cw[j]
    }

    /// E[(Z - t)⁺] in O(log n).
    pub fn expected_excess(&self, t: f64) -> f64 {
        let j = self.count_above(t);
        (self.czw[j] - t * self.cw[j]).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.czw[self.z.len()]
    }

    /// Index of the VaR atom at level β: first j with cumulative weight ≥ β.
    pub fn var_index(&self, beta: f64) -> usize {
        let j = self.cw.partition_point(|&c| c < beta * (1.0 - 1e-15));
        j.max(1).min(self.z.len()) - 1
    }
}

/// Exact CVaR of a discrete law.
pub fn sample_cvar(atoms: &WeightedAtoms, beta: f64) -> Result<f64> {
    check_level(beta)?;
    let u = atoms.z[atoms.var_index(beta)];
    Ok(u + atoms.expected_excess(u) / beta)
}

/// Grid for deterministic discretization of a continuous law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizeConfig {
    /// Equal-probability cells over tail levels (0.5, 1).
    pub bulk_cells: usize,
    /// Log-spaced cells over tail levels (min_level, 0.5].
    pub tail_cells: usize,
    pub min_level: f64,
}

impl Default for DiscretizeConfig {
    fn default() -> Self {
        DiscretizeConfig {
            bulk_cells: 1000,
            tail_cells: 3000,
            min_level: 1e-16,
        }
    }
}

/// Quantile-midpoint discretization: each cell of tail levels becomes one atom.
pub fn discretize<Q: TailQuantile + ?Sized>(law: &Q, cfg: &DiscretizeConfig) -> Result<WeightedAtoms> {
    let mut z = Vec::new();
    let mut w = Vec::new();
    let (lmin, lhalf) = (cfg.min_level.ln(), 0.5f64.ln());
    z.push(law.tail_quantile(0.5 * cfg.min_level)?);
    w.push(cfg.min_level);
    for i in 0..cfg.tail_cells {
        let a = (lmin + (lhalf - lmin) * i as f64 / cfg.tail_cells as f64).exp();
        let b = (lmin + (lhalf - lmin) * (i + 1) as f64 / cfg.tail_cells as f64).exp();
        z.push(law.tail_quantile((a * b).sqrt())?);
        w.push(b - a);
    }
    for i in 0..cfg.bulk_cells {
        let a = 0.5 + 0.5 * i as f64 / cfg.bulk_cells as f64;
        let b = 0.5 + 0.5 * (i + 1) as f64 / cfg.bulk_cells as f64;
        z.push(law.tail_quantile(0.5 * (a + b))?);
        w.push(b - a);
    }
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    WeightedAtoms::new(z, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tail_models::{TailLawSpec, WeightSpec};
    use approx::assert_relative_eq;

    #[test]
    fn cvar_hand_values() {
        let a = WeightedAtoms::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.25; 4]).unwrap();
        assert_relative_eq!(sample_cvar(&a, 0.5).unwrap(), 3.5, max_relative = 1e-15);
        let b = WeightedAtoms::new(vec![0.0, 10.0], vec![0.99, 0.01]).unwrap();
        assert_relative_eq!(sample_cvar(&b, 0.01).unwrap(), 10.0, max_relative = 1e-15);
        let c = WeightedAtoms::new(vec![5.0], vec![1.0]).unwrap();
        assert_eq!(sample_cvar(&c, 0.3).unwrap(), 5.0);
    }

    #[test]
    fn excess_is_exact() {
        let a = WeightedAtoms::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_relative_eq!(a.expected_excess(2.5), 0.3 * 0.5 + 0.4 * 1.5, max_relative = 1e-15);
        assert_relative_eq!(a.expected_excess(-1.0), a.mean() + 1.0, max_relative = 1e-15);
        assert_eq!(a.expected_excess(4.0), 0.0);
    }

    #[test]
    fn discretized_cvar_is_close() {
        let law = TailLawSpec::GeneralizedPareto { alpha: 0.25, sigma: 1.0 };
        let atoms = discretize(&law, &DiscretizeConfig::default()).unwrap();
        let exact = law.risk_measure(&WeightSpec::CVaR, 0.01).unwrap();
        assert_relative_eq!(sample_cvar(&atoms, 0.01).unwrap(), exact, max_relative = 1e-3);
    }
}
