use proptest::prelude::*;
use tailrisk::divergences::PhiSpec;
use tailrisk_cli::config::{parse_law, parse_phi};
use tailrisk_cli::output::fmt_sig;
use tailrisk_cli::RunConfig;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fmt_sig_round_trips(m in 1.0f64..10.0, e in -30i32..30, neg in any::<bool>()) {
        let x = if neg { -m } else { m } * 10f64.powi(e);
        let back: f64 = fmt_sig(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs(), "{x} -> {}", fmt_sig(x));
    }

    #[test]
    fn config_survives_toml(
        seed in any::<u64>(),
        n in 2usize..100_000,
        betas in prop::collection::vec(1e-6f64..0.5, 1..5),
        delta in 0.0f64..5.0,
        reps in 2usize..500,
        lambda in 0.0f64..1.0,
        clamp in any::<bool>(),
    ) {
        let cfg = RunConfig {
            seed: Some(seed),
            n: Some(n),
            betas: Some(betas),
            delta: Some(delta),
            reps: Some(reps),
            lambda: Some(lambda),
            clamp: Some(clamp),
            law: Some("gpd(3,1)".into()),
            phi: Some("cressie(3)".into()),
            norm: Some("inf".into()),
            ..RunConfig::default()
        };
        match cfg.to_toml() {
            Ok(text) => prop_assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg),
            Err(_) => prop_assert!(seed > i64::MAX as u64),
        }
    }

    #[test]
    fn gpd_spec_reads_tail_index(gamma in 0.05f64..10.0, sigma in 0.01f64..100.0) {
        let law = parse_law(&format!("gpd({gamma},{sigma})")).unwrap();
        let g = law.regime().unwrap().gamma();
        prop_assert!(law.regime().unwrap().is_heavy());
        prop_assert!((g - gamma).abs() <= 1e-12 * gamma);
    }

    #[test]
    fn cressie_spec_keeps_power(p in 1.01f64..10.0) {
        let phi = parse_phi(&format!("cressie({p})")).unwrap();
        prop_assert_eq!(phi, PhiSpec::CressieRead { p });
    }
}
