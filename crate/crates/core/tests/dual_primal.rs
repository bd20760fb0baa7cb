//! φ-dual CVaR against an independent primal computation for ChiSquare balls.

mod support;

use rand::Rng;
use support::primal_worst_cvar;
use tailrisk::divergences::PhiSpec;
use tailrisk::rng::StreamKey;
use tailrisk::robust_eval::{phi_dual_cvar, sample_cvar, SolverConfig, WeightedAtoms};

#[test]
fn five_atom_instance() {
    let z = [0.0, 1.0, 2.0, 4.0, 9.0];
    let w = [0.3, 0.25, 0.2, 0.15, 0.1];
    let atoms = WeightedAtoms::new(z.to_vec(), w.to_vec()).unwrap();
    let dual = phi_dual_cvar(&atoms, PhiSpec::ChiSquare, 0.05, 0.2, &SolverConfig::default()).unwrap();
    let primal = primal_worst_cvar(&z, &w, 0.05, 0.2);
    assert!((dual.value - primal).abs() < 1e-4, "{} vs {}", dual.value, primal);
}

#[test]
fn randomized_small_instances() {
    let mut rng = StreamKey::root(2024).rng();
    for case in 0..50 {
        let m = rng.gen_range(3..=6);
        let z: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..10.0)).collect();
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let delta = rng.gen_range(0.01..0.5);
        let beta = rng.gen_range(0.05..0.5);
        let atoms = WeightedAtoms::new(z.clone(), w.clone()).unwrap();
        let dual = phi_dual_cvar(&atoms, PhiSpec::ChiSquare, delta, beta, &SolverConfig::default()).unwrap();
        let primal = primal_worst_cvar(&z, &w, delta, beta);
        assert!(
            (dual.value - primal).abs() < 1e-4,
            "case {case}: dual {} primal {} (δ={delta}, β={beta})",
            dual.value,
            primal
        );
        assert!(dual.value >= sample_cvar(&atoms, beta).unwrap() - 1e-9);
    }
}

