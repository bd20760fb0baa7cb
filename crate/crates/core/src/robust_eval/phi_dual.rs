//! Dual of the worst-case CVaR over a φ-divergence ball around a discrete law:
//!
//!   min_{u, η, λ ≥ λ_floor}  u + β⁻¹ (η + δλ + λ E[φ*(((Z-u)⁺ - η)/λ)]).
//!
//! For fixed u the (η, λ) problem is smooth and convex, solved by damped
//! Newton. The outer problem in u is convex and piecewise smooth between
//! atoms; its derivative h'(u) = 1 - β⁻¹ Σ_{z>u} w φ*'(s) locates the cell
//! holding the minimiser, which is then either a kink at an atom or a root
//! of h' inside the cell.

use super::{sample_cvar, Ambiguity, BoundKind, Optimizer, RobustEvalResult, SolveStatus, WeightedAtoms};
use crate::divergences::PhiSpec;
use crate::error::{check_level, invalid, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative tolerance on the objective.
    pub tolerance: f64,
    pub max_iters: usize,
    pub lambda_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-7,
            max_iters: 500,
            lambda_floor: 1e-12,
        }
    }
}

struct Inner<'a> {
    atoms: &'a WeightedAtoms,
    phi: PhiSpec,
    delta: f64,
    cfg: SolverConfig,
    iterations: usize,
    warm: Option<(f64, f64)>,
}

#[derive(Clone, Copy)]
struct Eval {
    g: f64,
    grad: [f64; 2],
    hess: [f64; 3],
}

// Per-u data: excesses of the m active atoms and the mass sitting at or below u.
struct Slice<'b> {
    z: &'b [f64],
    w: &'b [f64],
    u: f64,
    w0: f64,
}

impl<'a> Inner<'a> {
    fn slice(&self, u: f64) -> Slice<'a> {
        let m = self.atoms.count_above(u);
        let w0 = (1.0 - self.atoms.mass_of_top(m)).max(0.0);
        Slice {
            z: &self.atoms.values()[..m],
            w: &self.atoms.weights()[..m],
            u,
            w0,
        }
    }

    fn value(&self, sl: &Slice, eta: f64, lambda: f64) -> f64 {
        let phi = self.phi;
        let mut acc = sl.w0 * phi.conjugate(-eta / lambda);
        for (z, w) in sl.z.iter().zip(sl.w) {
            acc += w * phi.conjugate((z - sl.u - eta) / lambda);
        }
        let g = eta + self.delta * lambda + lambda * acc;
        if g.is_nan() {
            f64::INFINITY
        } else {
            g
        }
    }

    fn eval(&self, sl: &Slice, eta: f64, lambda: f64) -> Eval {
        let phi = self.phi;
        let (mut c, mut ge, mut gl, mut h11, mut h12, mut h22) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let mut add = |w: f64, s: f64| {
            let f = phi.conjugate(s);
            let f1 = phi.conjugate_prime(s);
            let f2 = phi.conjugate_second(s);
            c += w * f;
            ge -= w * f1;
            gl += w * (f - s * f1);
            let t = w * f2;
            h11 += t;
            h12 += t * s;
            h22 += t * s * s;
        };
        add(sl.w0, -eta / lambda);
        for (z, w) in sl.z.iter().zip(sl.w) {
            add(*w, (z - sl.u - eta) / lambda);
        }
        let g = eta + self.delta * lambda + lambda * c;
        Eval {
            g: if g.is_nan() { f64::INFINITY } else { g },
            grad: [1.0 + ge, self.delta + gl],
            hess: [h11 / lambda, h12 / lambda, h22 / lambda],
        }
    }

    /// Minimise over (η, λ) at fixed u; returns (G*, η*, λ*).
    fn solve(&mut self, u: f64) -> Result<(f64, f64, f64)> {
        let sl = self.slice(u);
        let floor = self.cfg.lambda_floor;
        let scale = sl.z.first().map(|z| z - u).unwrap_or(0.0);
        if sl.z.is_empty() {
            // all mass at zero excess: G* = 0 at η = 0
            return Ok((0.0, 0.0, self.warm.map(|w| w.1).unwrap_or(1.0)));
        }
        let mean_x: f64 = sl.z.iter().zip(sl.w).map(|(z, w)| w * (z - u)).sum();
        let cold = (0.0, (mean_x.max(scale / 50.0)).max(floor * 1e3));
        // a warm start from a distant u can sit where the Hessian underflows
        let (mut eta, mut lambda) = match self.warm {
            Some(w) if self.value(&sl, w.0, w.1) <= self.value(&sl, cold.0, cold.1) => w,
            _ => cold,
        };
        let mut e = self.eval(&sl, eta, lambda);
        if !e.g.is_finite() {
            (eta, lambda) = (0.0, scale.max(1.0) * 1e3);
            e = self.eval(&sl, eta, lambda);
        }
        let (mut e, mut eta, mut lambda) = self.newton(&sl, e, eta, lambda, scale)?;
        if lambda <= floor * (1.0 + 1e-9) {
            // the perspective is not smooth at λ = 0, so Newton can stall on the floor
            // while min_η G still decreases in λ
            if let Some((pe, pl)) = self.profile(&sl, scale, e.g) {
                let (e2, eta2, lambda2) = self.newton(&sl, self.eval(&sl, pe, pl), pe, pl, scale)?;
                if e2.g < e.g {
                    (e, eta, lambda) = (e2, eta2, lambda2);
                }
            }
        }
        self.warm = Some((eta, lambda));
        Ok((e.g, eta, lambda))
    }

    /// argmin over η at fixed λ; ∂G/∂η is nondecreasing in η.
    fn eta_at(&self, sl: &Slice, lambda: f64, scale: f64) -> f64 {
        let d_eta = |eta: f64| {
            let mut acc = sl.w0 * self.phi.conjugate_prime(-eta / lambda);
            for (z, w) in sl.z.iter().zip(sl.w) {
                acc += w * self.phi.conjugate_prime((z - sl.u - eta) / lambda);
            }
            1.0 - acc
        };
        let mut hi = scale;
        let mut step = lambda.max(scale);
        while !(d_eta(hi) >= 0.0) && step.is_finite() {
            hi += step;
            step *= 2.0;
        }
        let mut lo = -lambda;
        let mut step = lambda.max(scale);
        while d_eta(lo) > 0.0 && step.is_finite() {
            lo -= step;
            step *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if d_eta(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Golden section over log λ on the profile min_η G; returns a start if it beats `best`.
    fn profile(&self, sl: &Slice, scale: f64, best: f64) -> Option<(f64, f64)> {
        let floor = self.cfg.lambda_floor;
        let p = |t: f64| {
            let lambda = t.exp();
            let eta = self.eta_at(sl, lambda, scale);
            (self.value(sl, eta, lambda), eta)
        };
        let (mut a, mut b) = (floor.ln(), (scale.max(1.0) * 1e6).ln());
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
        let (mut pc, mut pd) = (p(c).0, p(d).0);
        for _ in 0..120 {
            if b - a <= 1e-10 {
                break;
            }
            if pc <= pd {
                b = d;
                d = c;
                pd = pc;
                c = b - r * (b - a);
                pc = p(c).0;
            } else {
                a = c;
                c = d;
                pc = pd;
                d = a + r * (b - a);
                pd = p(d).0;
            }
        }
        let t = 0.5 * (a + b);
        let (v, eta) = p(t);
        (v < best).then(|| (eta, t.exp()))
    }

    fn newton(&mut self, sl: &Slice, mut e: Eval, mut eta: f64, mut lambda: f64, scale: f64) -> Result<(Eval, f64, f64)> {
        let floor = self.cfg.lambda_floor;
        let mut converged = false;
        let mut count = 0;
        for _ in 0..self.cfg.max_iters {
            count += 1;
            let at_floor = lambda <= floor * (1.0 + 1e-9);
            let [h11, h12, h22] = e.hess;
            let [g1, g2] = e.grad;
            // Levenberg-regularised Newton direction
            let tr = (h11 + h22).abs().max(1e-300);
            let mut mu = 1e-12 * tr;
            let (mut d1, mut d2);
            loop {
                let (a, b, c) = (h11 + mu, h12, h22 + mu);
                let det = a * c - b * b;
                if det > 0.0 && a > 0.0 {
                    d1 = -(c * g1 - b * g2) / det;
                    d2 = -(a * g2 - b * g1) / det;
                    break;
                }
                mu = if mu == 0.0 { 1e-12 } else { mu * 10.0 };
                if mu > 1e30 * tr {
                    d1 = -g1;
                    d2 = -g2;
                    break;
                }
            }
            if at_floor && d2 < 0.0 {
                d2 = 0.0;
                d1 = if h11 > 0.0 { -g1 / h11 } else { -g1 };
            }
            let slope = g1 * d1 + g2 * d2;
            let size = eta.abs().max(lambda).max(scale).max(1e-300);
            if -slope <= 1e-15 * (1.0 + e.g.abs()) || (d1.abs() + d2.abs()) <= 1e-15 * size {
                converged = true;
                break;
            }
            if slope >= 0.0 {
                // regularisation failed to give descent; use steepest descent
                d1 = -g1;
                d2 = if at_floor && g2 > 0.0 { 0.0 } else { -g2 };
            }
            let slope = g1 * d1 + g2 * d2;
            let mut alpha = 1.0f64;
            if lambda + d2 < floor {
                alpha = ((floor - lambda) / d2).clamp(0.0, 1.0);
            }
            let mut accepted = false;
            for _ in 0..80 {
                let (ne, nl) = (eta + alpha * d1, (lambda + alpha * d2).max(floor));
                let v = self.value(sl, ne, nl);
                if v.is_finite() && v <= e.g + 1e-4 * alpha * slope {
                    eta = ne;
                    lambda = nl;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // no further decrease representable
                converged = true;
                break;
            }
            let prev = e.g;
            e = self.eval(sl, eta, lambda);
            if (prev - e.g).abs() <= 1e-16 * e.g.abs().max(1e-300) && alpha < 1e-6 {
                converged = true;
                break;
            }
        }
        self.iterations += count;
        if !converged {
            return Err(Error::NonConvergence {
                what: "φ-dual inner Newton",
                iterations: self.cfg.max_iters,
            });
        }
        Ok((e, eta, lambda))
    }

    /// Σ_{z>u} w φ*'(s) at the inner optimum, plus the same term for atoms at u.
    fn slopes(&self, u: f64, eta: f64, lambda: f64) -> (f64, f64) {
        let m = self.atoms.count_above(u);
        let z = self.atoms.values();
        let w = self.atoms.weights();
        let mut above = 0.0;
        for i in 0..m {
            above += w[i] * self.phi.conjugate_prime((z[i] - u - eta) / lambda);
        }
        let at: f64 = z[m..].iter().zip(&w[m..]).take_while(|(zi, _)| **zi == u).map(|(_, wi)| *wi).sum();
        let w0 = (1.0 - self.atoms.mass_of_top(m)).max(0.0);
        let low = self.phi.conjugate_prime(-eta / lambda);
        // normalise the worst-case masses: near the λ floor the raw sum is badly conditioned
        let total = above + w0 * low;
        if !above.is_finite() || !(total > 0.0) || lambda <= self.cfg.lambda_floor * (1.0 + 1e-9) {
            // λ → 0: the worst case sits on the largest excess
            return if m > 0 { (1.0, 0.0) } else { (0.0, if at > 0.0 { 1.0 } else { 0.0 }) };
        }
        (above / total, at * low / total)
    }
}

/// Worst-case CVaR over {Q : D_φ(Q‖P) ≤ δ} for a discrete center P.
pub fn phi_dual_cvar(
    atoms: &WeightedAtoms,
    phi: PhiSpec,
    delta: f64,
    beta: f64,
    cfg: &SolverConfig,
) -> Result<RobustEvalResult> {
    check_level(beta)?;
    phi.validate()?;
    if !(delta >= 0.0) || !(cfg.tolerance > 0.0) || !(cfg.lambda_floor > 0.0) {
        return Err(invalid("need δ ≥ 0, tolerance > 0 and λ floor > 0"));
    }
    let ambiguity = Ambiguity::PhiBall { phi, delta };
    let nominal = sample_cvar(atoms, beta)?;
    let z = atoms.values();
    let distinct: Vec<f64> = {
        let mut d = z.to_vec();
        d.dedup();
        d
    };
    if delta == 0.0 || distinct.len() == 1 {
        let u = z[atoms.var_index(beta)];
        return Ok(RobustEvalResult {
            value: nominal,
            optimizer: Some(Optimizer { u, eta: 0.0, lambda: f64::INFINITY }),
            shift: None,
            iterations: 0,
            status: SolveStatus::Converged,
            stderr: None,
            bound: BoundKind::Exact,
            ambiguity,
        });
    }
    let mut inner = Inner {
        atoms,
        phi,
        delta,
        cfg: *cfg,
        iterations: 0,
        warm: None,
    };
    let k = distinct.len();
    let mid = |j: usize| 0.5 * (distinct[j] + distinct[j + 1]);
    let deriv = |inner: &mut Inner, u: f64| -> Result<f64> {
        let (_, eta, lambda) = inner.solve(u)?;
        Ok(1.0 - inner.slopes(u, eta, lambda).0 / beta)
    };
    // gap j = (d_{j+1}, d_j); h' is nonincreasing in j. Find the last gap
    // (largest j) whose midpoint derivative is still ≥ 0.
    let (mut lo, mut hi) = (0usize, k - 1); // search j in [0, k-2]; answer J in [-1, k-2]
    let mut last_nonneg: Option<usize> = None;
    // start from the VaR cell of the center, which is close to the answer
    while lo < hi {
        let j = lo + (hi - lo) / 2;
        if deriv(&mut inner, mid(j))? >= 0.0 {
            last_nonneg = Some(j);
            lo = j + 1;
        } else {
            hi = j;
        }
    }
    // minimiser lies in [mid_{J+1} or d_{k-1}, mid_J or d_0]; atom a = d_{J+1}
    let j_atom = last_nonneg.map(|j| j + 1).unwrap_or(0);
    let a = distinct[j_atom];
    let upper = match last_nonneg {
        Some(j) => mid(j),
        None => a,
    };
    let lower = if j_atom + 1 < k { mid(j_atom) } else { a };
    let (ga, eta_a, lam_a) = inner.solve(a)?;
    let (above, at) = inner.slopes(a, eta_a, lam_a);
    let right = 1.0 - above / beta;
    let left = 1.0 - (above + at) / beta;
    // With no gap of nonnegative slope, h' < 0 on the top cell (where it is
    // constant by homogeneity) and h' = 1 above the maximum: kink at d_0.
    // The inner problem at u = d_0 itself is degenerate, so skip its slopes.
    let top_kink = last_nonneg.is_none();
    let (u_star, g_star, eta_s, lam_s) = if top_kink || (left <= 0.0 && right >= 0.0) {
        (a, ga, eta_a, lam_a)
    } else {
        let (mut x0, mut x1) = if right < 0.0 { (a, upper) } else { (lower, a) };
        // h' < 0 at x0, > 0 at x1 (one-sided at the atom); bisection with secant steps
        let (mut f0, mut f1) = if right < 0.0 {
            (right, deriv(&mut inner, upper)?)
        } else {
            (deriv(&mut inner, lower)?, left)
        };
        let width = (x1 - x0).abs();
        let mut u = 0.5 * (x0 + x1);
        for it in 0..200 {
            let secant = x0 - f0 * (x1 - x0) / (f1 - f0);
            u = if it % 3 != 2 && secant > x0 && secant < x1 && f1 > f0 {
                secant
            } else {
                0.5 * (x0 + x1)
            };
            if u <= x0 || u >= x1 {
                break;
            }
            let f = deriv(&mut inner, u)?;
            if f < 0.0 {
                x0 = u;
                f0 = f;
            } else {
                x1 = u;
                f1 = f;
            }
            if x1 - x0 <= 1e-13 * width.max(u.abs()) || f.abs() <= 1e-13 {
                break;
            }
        }
        let (g, e, l) = inner.solve(u)?;
        (u, g, e, l)
    };
    let value = u_star + g_star / beta;
    if !value.is_finite() {
        return Err(Error::NonConvergence { what: "φ-dual outer search", iterations: inner.iterations });
    }
    // the center is feasible, so the worst case cannot fall below its CVaR
    if value < nominal * (1.0 - cfg.tolerance) - cfg.tolerance * nominal.abs().max(1e-12) {
        return Err(Error::NonConvergence { what: "φ-dual (value below nominal)", iterations: inner.iterations });
    }
    Ok(RobustEvalResult {
        value: value.max(nominal),
        optimizer: Some(Optimizer { u: u_star, eta: eta_s, lambda: lam_s }),
        shift: None,
        iterations: inner.iterations,
        status: SolveStatus::Converged,
        stderr: None,
        bound: BoundKind::Exact,
        ambiguity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn five() -> WeightedAtoms {
        WeightedAtoms::new(vec![0.0, 1.0, 2.0, 4.0, 9.0], vec![0.3, 0.25, 0.2, 0.15, 0.1]).unwrap()
    }

    #[test]
    fn zero_radius_is_nominal() {
        let a = five();
        let r = phi_dual_cvar(&a, PhiSpec::ChiSquare, 0.0, 0.2, &SolverConfig::default()).unwrap();
        assert_eq!(r.value, sample_cvar(&a, 0.2).unwrap());
        let tiny = phi_dual_cvar(&a, PhiSpec::ChiSquare, 1e-8, 0.2, &SolverConfig::default()).unwrap();
        assert_relative_eq!(tiny.value, r.value, max_relative = 5e-3);
    }

    #[test]
    fn monotone_in_radius() {
        let a = five();
        for phi in [PhiSpec::ChiSquare, PhiSpec::KL, PhiSpec::ExpShifted, PhiSpec::CressieRead { p: 3.0 }] {
            let mut prev = 0.0;
            for d in [0.01, 0.05, 0.1] {
                let v = phi_dual_cvar(&a, phi, d, 0.2, &SolverConfig::default()).unwrap().value;
                assert!(v >= prev, "{phi:?}");
                prev = v;
            }
        }
    }

    #[test]
    fn level_below_top_mass_gives_top_atom() {
        // a large χ² ball reaches the point mass on the top atom
        let a = WeightedAtoms::new(vec![-0.2316, 17.908], vec![0.2464, 0.7536]).unwrap();
        for d in [0.849, 0.982] {
            let r = phi_dual_cvar(&a, PhiSpec::ChiSquare, d, 0.02, &SolverConfig::default()).unwrap();
            assert_relative_eq!(r.value, 17.908, max_relative = 1e-9);
        }
    }

    #[test]
    fn close_top_atoms_stay_below_max() {
        let a = WeightedAtoms::new(
            vec![-3.0039053361258237, 12.578754555208636, 12.623642922523757],
            vec![0.06857539060794286, 0.8002698727127728, 0.13115473667928434],
        )
        .unwrap();
        let r = phi_dual_cvar(&a, PhiSpec::KL, 0.8380436774262419, 0.7467642172807809, &SolverConfig::default()).unwrap();
        assert!(r.value <= 12.623642922523757 && r.value >= 12.58);
    }

    #[test]
    fn kl_large_level_not_stuck_at_floor() {
        let a = WeightedAtoms::new(vec![2.9815, 10.5775, -1.1185, 8.995], vec![0.4074, 0.1487, 0.2616, 0.1823]).unwrap();
        let r = phi_dual_cvar(&a, PhiSpec::KL, 0.9994, 0.8919, &SolverConfig::default()).unwrap();
        assert!(r.value < 10.5775 && r.value > sample_cvar(&a, 0.8919).unwrap());
    }

    #[test]
    fn all_families_solve() {
        let a = five();
        for phi in [PhiSpec::ChiSquare, PhiSpec::KL, PhiSpec::ExpShifted, PhiSpec::CressieRead { p: 3.0 }] {
            let r = phi_dual_cvar(&a, phi, 0.1, 0.1, &SolverConfig::default()).unwrap();
            assert!(r.value >= sample_cvar(&a, 0.1).unwrap() && r.value <= 9.0 + 1e-9, "{phi:?}: {}", r.value);
        }
    }
}
