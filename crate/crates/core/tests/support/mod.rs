//! Primal worst-case CVaR over a ChiSquare ball, solved by water-filling.

/// max Σ w L c  s.t.  Σ w L = 1, ½ Σ w (L-1)² ≤ δ, L ≥ 0, by water-filling:
/// L_i = max(0, 1 + (c_i - μ)/ν) with μ fixing the mass and ν the budget.
pub fn primal_inner(w: &[f64], c: &[f64], delta: f64) -> f64 {
    let cmax = c.iter().cloned().fold(f64::MIN, f64::max);
    let top: f64 = w.iter().zip(c).filter(|(_, ci)| **ci == cmax).map(|(wi, _)| wi).sum();
    // all mass on the maximal atoms, if affordable
    let sat = 0.5 * (w.iter().zip(c).filter(|(_, ci)| **ci < cmax).map(|(wi, _)| wi).sum::<f64>()
        + top * (1.0 / top - 1.0).powi(2));
    if sat <= delta {
        return cmax;
    }
    let ratios = |nu: f64| -> Vec<f64> {
        // Σ w max(0, 1 + (c - μ)/ν) = 1, decreasing in μ
        let (mut lo, mut hi) = (c.iter().cloned().fold(f64::MAX, f64::min) - 10.0 * nu - 1.0, cmax + nu);
        for _ in 0..100 {
            let mu = 0.5 * (lo + hi);
            let m: f64 = w.iter().zip(c).map(|(wi, ci)| wi * (1.0 + (ci - mu) / nu).max(0.0)).sum();
            if m > 1.0 {
                lo = mu;
            } else {
                hi = mu;
            }
        }
        let mu = 0.5 * (lo + hi);
        c.iter().map(|ci| (1.0 + (ci - mu) / nu).max(0.0)).collect()
    };
    let div = |l: &[f64]| 0.5 * w.iter().zip(l).map(|(wi, li)| wi * (li - 1.0).powi(2)).sum::<f64>();
    // divergence decreases in ν
    let (mut a, mut b) = (-60.0f64, 60.0f64);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if div(&ratios(m.exp())) > delta {
            a = m;
        } else {
            b = m;
        }
    }
    let l = ratios(b.exp());
    w.iter().zip(&l).zip(c).map(|((wi, li), ci)| wi * li * ci).sum()
}

pub fn primal_worst_cvar(z: &[f64], w: &[f64], delta: f64, beta: f64) -> f64 {
    let h = |u: f64| {
        let c: Vec<f64> = z.iter().map(|zi| (zi - u).max(0.0)).collect();
        u + primal_inner(w, &c, delta) / beta
    };
    let (mut a, mut b) = (
        z.iter().cloned().fold(f64::MAX, f64::min),
        z.iter().cloned().fold(f64::MIN, f64::max),
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..90 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if h(c) <= h(d) {
            b = d;
        } else {
            a = c;
        }
    }
    h(0.5 * (a + b))
}
