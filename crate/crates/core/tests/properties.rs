//! Invariants that must hold for arbitrary inputs.

use std::sync::{Arc, OnceLock};

use heatbesov::bands::heat_grid;
use heatbesov::besov::{
    comparison_ratio, increment_i_m, jonsson_seminorm, seminorm_value, BesovParams, Functional,
};
use heatbesov::cli::{ExperimentConfig, SpaceConfig};
use heatbesov::functions::parse_csv;
use heatbesov::hardy::{
    classical_hardy, discrete_holder_check, lemma_sum, log_sum_exp, modified_hardy,
    sequence_digest, subadditive_comparison, HardyParams,
};
use heatbesov::kernel::{make_kernel_set, KernelModel, KernelSet};
use heatbesov::space::{build_space, dyadic_shell, GridFn, SpaceKind};
use heatbesov::spectral::{compute_spectrum, spectral_coeffs, Spectrum};
use proptest::prelude::*;

fn torus_kernel() -> &'static KernelSet {
    static KS: OnceLock<KernelSet> = OnceLock::new();
    KS.get_or_init(|| {
        let space = Arc::new(build_space(SpaceKind::Torus1d, 6).unwrap());
        let prm = BesovParams::new(0.5, 2.0, 2.0).unwrap();
        let grid = heat_grid(2.0, prm.m_max_for(&space).unwrap(), 4, 4.0);
        make_kernel_set(space, KernelModel::GaussianTorus, &grid, 0.5).unwrap()
    })
}

fn gasket_kernel() -> &'static KernelSet {
    static KS: OnceLock<KernelSet> = OnceLock::new();
    KS.get_or_init(|| {
        let space = Arc::new(build_space(SpaceKind::Gasket, 3).unwrap());
        make_kernel_set(space, KernelModel::LazyWalkGasket, &[0.01, 0.04, 0.2], 0.5).unwrap()
    })
}

fn torus_spectrum() -> &'static Spectrum {
    static SP: OnceLock<Spectrum> = OnceLock::new();
    SP.get_or_init(|| compute_spectrum(torus_kernel()).unwrap())
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

fn positive_seq(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-12.0f64..12.0).prop_map(f64::exp), 4..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shell_index_brackets_distance(rho in 1e-6f64..=1.0) {
        let m = dyadic_shell(rho) as i32;
        prop_assert!(rho <= 2f64.powi(-m));
        prop_assert!(rho > 2f64.powi(-(m + 1)));
    }

    #[test]
    fn jonsson_is_absolutely_homogeneous(v in values(64), c in -5.0f64..5.0) {
        let ks = torus_kernel();
        let f = GridFn::new(ks.space(), v).unwrap();
        let prm = BesovParams::new(0.4, 2.0, 2.0).unwrap();
        let a = jonsson_seminorm(&f, ks.space(), &prm).unwrap().total;
        let b = jonsson_seminorm(&f.scaled(c), ks.space(), &prm).unwrap().total;
        prop_assert!((b - c.abs() * a).abs() <= 1e-10 * (1.0 + b.abs()));
    }

    #[test]
    fn increments_shrink_with_scale(v in values(64), p in 1.0f64..3.0) {
        let ks = torus_kernel();
        let f = GridFn::new(ks.space(), v).unwrap();
        let mut prev = f64::INFINITY;
        for m in 0..=6 {
            let i = increment_i_m(&f, ks.space(), m, p).unwrap();
            prop_assert!(i <= prev * (1.0 + 1e-12));
            prev = i;
        }
    }

    #[test]
    fn seminorms_ignore_constant_shifts(v in values(64), shift in -100.0f64..100.0) {
        let ks = torus_kernel();
        let f = GridFn::new(ks.space(), v.clone()).unwrap();
        let g = GridFn::new(ks.space(), v.iter().map(|x| x + shift).collect()).unwrap();
        let prm = BesovParams::new(0.5, 2.0, 2.0).unwrap();
        for functional in [Functional::Jonsson, Functional::HeatI, Functional::DirichletS] {
            let a = seminorm_value(&f, ks, &prm, functional).unwrap();
            let b = seminorm_value(&g, ks, &prm, functional).unwrap();
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a), "{functional}: {a} vs {b}");
        }
    }

    #[test]
    fn norm_ratio_is_scale_invariant(v in values(64), c in 0.01f64..100.0) {
        let ks = torus_kernel();
        let prm = BesovParams::new(0.5, 2.0, 2.0).unwrap();
        let ratio = |f: &GridFn| {
            let base = f.lp_norm(ks.space(), 2.0);
            let l = base + seminorm_value(f, ks, &prm, Functional::Jonsson).unwrap();
            let r = base + seminorm_value(f, ks, &prm, Functional::HeatI).unwrap();
            comparison_ratio(l, r).unwrap()
        };
        let f = GridFn::new(ks.space(), v).unwrap();
        let (a, b) = (ratio(&f), ratio(&f.scaled(c)));
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn semigroup_keeps_values_in_range(v in values(42)) {
        let ks = gasket_kernel();
        let f = GridFn::new(ks.space(), v.clone()).unwrap();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for t in 0..ks.times().len() {
            let g = ks.apply_semigroup(t, &f).unwrap();
            for &x in g.values() {
                prop_assert!(x >= lo - 1e-10 && x <= hi + 1e-10);
            }
        }
    }

    #[test]
    fn gasket_density_is_symmetric(x in 0usize..42, y in 0usize..42) {
        let ks = gasket_kernel();
        for t in 0..ks.times().len() {
            let p = ks.density(t);
            prop_assert!((p.get(x, y) - p.get(y, x)).abs() <= 1e-12 * p.get(x, y).abs().max(1.0));
        }
    }

    #[test]
    fn parseval_holds(v in values(64)) {
        let sp = torus_spectrum();
        let f = GridFn::new(torus_kernel().space(), v).unwrap();
        let c = spectral_coeffs(&f, sp).unwrap();
        let norm2 = f.lp_norm(torus_kernel().space(), 2.0).powi(2);
        prop_assert!(c.parseval_residual <= 1e-10 * (1.0 + norm2));
    }

    #[test]
    fn hardy_constant_is_scale_invariant(
        x in positive_seq(120),
        c in (-20.0f64..20.0).prop_map(f64::exp),
        r in 0.3f64..3.0,
        t in 1.1f64..5.0,
    ) {
        let y: Vec<f64> = x.iter().map(|v| v * c).collect();
        let a = classical_hardy(&x, r, t).unwrap().k_required;
        let b = classical_hardy(&y, r, t).unwrap().k_required;
        prop_assert!((a - b).abs() <= 1e-9 * a);
        prop_assert!(a >= 1.0 - 1e-12);
    }

    #[test]
    fn modified_hardy_is_scale_invariant(
        x in positive_seq(120),
        c in (-20.0f64..20.0).prop_map(f64::exp),
    ) {
        let prm = HardyParams::new(2.0, 2.0, 3.38, 1.0, x.len()).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v * c).collect();
        let a = modified_hardy(&x, &prm).unwrap().k_required;
        let b = modified_hardy(&y, &prm).unwrap().k_required;
        prop_assert!((a - b).abs() <= 1e-9 * a);
    }

    #[test]
    fn split_majorant_dominates_for_small_r(x in positive_seq(120), r in 0.1f64..=1.0) {
        let prm = HardyParams::new(r, 2.0, 3.38, 1.0, x.len()).unwrap();
        let cmp = subadditive_comparison(&x, &prm).unwrap();
        prop_assert!(cmp.log_direct <= cmp.log_split + 1e-9);
    }

    #[test]
    fn discrete_holder_never_negative(
        ab in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..60),
        tau in 0.5f64..1.5,
        p in 1.05f64..8.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = ab.into_iter().unzip();
        let scale: f64 = a.iter().chain(&b).map(|v| v * v).sum::<f64>()
            * tau.max(1.0).powi(a.len() as i32);
        let res = discrete_holder_check(&a, &b, tau, p).unwrap();
        prop_assert!(res >= -1e-12 * (1.0 + scale));
    }

    #[test]
    fn lemma_sum_grows_with_t(
        t1 in 1e-4f64..1.0,
        t2 in 1e-4f64..1.0,
        alpha in 0.2f64..3.0,
        beta in 0.2f64..2.0,
        gamma in 0.5f64..3.0,
    ) {
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let a = lemma_sum(1.0, alpha, beta, gamma, lo);
        let b = lemma_sum(1.0, alpha, beta, gamma, hi);
        prop_assert!(a <= b * (1.0 + 1e-12));
    }

    #[test]
    fn log_sum_exp_matches_naive(terms in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let naive: f64 = terms.iter().map(|a| a.exp()).sum::<f64>().ln();
        prop_assert!((log_sum_exp(&terms) - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }

    #[test]
    fn digest_tracks_every_entry(x in positive_seq(50), i in any::<prop::sample::Index>()) {
        let mut y = x.clone();
        let k = i.index(y.len());
        y[k] *= 1.5;
        prop_assert_eq!(sequence_digest(&x), sequence_digest(&x));
        prop_assert_ne!(sequence_digest(&x), sequence_digest(&y));
    }

    #[test]
    fn csv_round_trip(v in values(30)) {
        let mut text = String::from("index,value\n");
        for (i, x) in v.iter().enumerate().rev() {
            text.push_str(&format!("{i},{x}\n"));
        }
        prop_assert_eq!(parse_csv(&text, v.len()).unwrap(), v);
    }

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        level in 1usize..=6,
        alpha in 0.01f64..3.0,
        p in 1.0f64..4.0,
        q in prop_oneof![Just(f64::INFINITY), 1.0f64..4.0],
        laziness in 0.01f64..0.99,
    ) {
        let mut cfg = ExperimentConfig::from_json(r#"{"space":{"kind":"torus1d","level":1}}"#)
            .unwrap();
        cfg.seed = seed;
        cfg.space = SpaceConfig { kind: SpaceKind::Gasket, level };
        cfg.kernel.laziness = laziness;
        cfg.params = vec![BesovParams::new(alpha, p, q).unwrap()];
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.digest().unwrap(), cfg.digest().unwrap());
    }
}
