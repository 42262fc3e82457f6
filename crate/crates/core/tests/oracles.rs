//! Library values checked against independent reference computations.

use std::f64::consts::PI;
use std::sync::Arc;

use heatbesov::bands::{heat_grid, log_space};
use heatbesov::besov::{
    dirichlet_s, heat_functional, increment_i_m, jonsson_seminorm, pair_energy, singular_seminorm,
    strichartz_seminorm, BesovParams, HeatMode,
};
use heatbesov::functions::{load_function, FunctionSpec};
use heatbesov::hardy::{
    c_beta, case1_majorant, classical_hardy, lemma_sum, lemma_sum_bounds, modified_hardy,
    HardyParams,
};
use heatbesov::kernel::{make_kernel_set, KernelModel, KernelSet};
use heatbesov::space::{build_space, DiscreteSpace, GridFn, SpaceKind};
use heatbesov::spectral::{
    compute_spectrum, hz_seminorm, spectral_coeffs, spectral_seminorm_h, HzParams, HzRoute,
};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma, gamma_lr};

fn torus(level: usize) -> Arc<DiscreteSpace> {
    Arc::new(build_space(SpaceKind::Torus1d, level).unwrap())
}

fn torus_kernel(level: usize, times: &[f64]) -> KernelSet {
    make_kernel_set(torus(level), KernelModel::GaussianTorus, times, 0.5).unwrap()
}

fn arc(n: usize, x: usize, y: usize) -> f64 {
    let k = x.abs_diff(y);
    k.min(n - k) as f64 / n as f64
}

fn sine(space: &DiscreteSpace) -> GridFn {
    let n = space.len() as f64;
    GridFn::from_fn(space, |x| (2.0 * PI * x as f64 / n).sin()).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

#[test]
fn i_m_matches_brute_force_on_sawtooth() {
    let space = torus(10);
    let n = space.len();
    let f = GridFn::from_fn(&space, |x| x as f64 / n as f64).unwrap();
    let radius = 2f64.powi(-5);
    let mut brute = 0.0;
    for x in 0..n {
        for y in 0..n {
            if x != y && arc(n, x, y) <= radius {
                let d = (x as f64 - y as f64) / n as f64;
                brute += d * d / (n * n) as f64;
            }
        }
    }
    let got = increment_i_m(&f, &space, 5, 2.0).unwrap();
    assert!(close(got, brute, 1e-12), "{got} vs {brute}");
}

#[test]
fn jonsson_sine_decays_like_root_half() {
    let space = torus(10);
    let f = sine(&space);
    let prm = BesovParams::new(0.5, 2.0, 2.0).unwrap();
    let b = jonsson_seminorm(&f, &space, &prm).unwrap();
    // Direct a_m from the double sum with the continuum increment formula.
    let n = space.len();
    for m in [2usize, 4, 6] {
        let radius = 2f64.powi(-(m as i32));
        let mut i_m = 0.0;
        for x in 0..n {
            for y in 0..n {
                if x != y && arc(n, x, y) <= radius {
                    i_m += (f.values()[x] - f.values()[y]).powi(2) / (n * n) as f64;
                }
            }
        }
        let a = 2f64.powf(m as f64 * 0.5) * (2f64.powf(m as f64) * i_m).sqrt();
        assert!(close(b.per_m[m], a, 1e-10));
    }
    // For small radii i_m is proportional to Σ_{k≤K} k² with K = n 2^{-m}
    // lattice steps, so a_{m+1}/a_m = 2^α (2 S(K/2)/S(K))^{1/2} → 2^{-1/2}.
    let sq = |k: usize| (k * (k + 1) * (2 * k + 1)) as f64 / 6.0;
    for m in 6..8 {
        let k = n >> m;
        let want = 2f64.sqrt() * (2.0 * sq(k / 2) / sq(k)).sqrt();
        let r = b.per_m[m + 1] / b.per_m[m];
        assert!(close(r, want, 1e-3), "ratio {r} vs {want} at m={m}");
    }
    let r = b.per_m[5] / b.per_m[4];
    assert!((r - 0.5f64.sqrt()).abs() < 0.015);
}

#[test]
fn pair_energy_of_sine_follows_fourier_identity() {
    let times = log_space(1e-4, 1.0, 9);
    let ks = torus_kernel(8, &times);
    let f = sine(ks.space());
    let norm2 = f.lp_norm(ks.space(), 2.0).powi(2);
    for (i, &t) in times.iter().enumerate() {
        let e = pair_energy(&f, &ks, i, 2.0).unwrap();
        let want = 2.0 * (1.0 - (-2.0 * PI * PI * t).exp()) * norm2;
        assert!(close(e, want, 1e-4), "t={t}: {e} vs {want}");
    }
}

#[test]
fn heat_tail_is_bounded_by_the_norm() {
    let prm = BesovParams::new(0.5, 2.0, 2.0).unwrap().with_m_max(5);
    let grid = heat_grid(2.0, 5, prm.bands_per_decade, prm.t_max);
    let ks = torus_kernel(7, &grid);
    let f = load_function(ks.space(), &FunctionSpec::RandomHoelder { h: 0.5, seed: 3 }).unwrap();
    let unit = heat_functional(&f, &ks, &prm, HeatMode::IUnit)
        .unwrap()
        .total;
    let tilde = heat_functional(&f, &ks, &prm, HeatMode::ITilde)
        .unwrap()
        .total;
    // t > 1: E(t) <= 2^p ‖f‖_p^p, integrated against t^{-αq/d_w - 1} on (1, 4].
    let expo = prm.alpha * prm.q / 2.0;
    let bound =
        2f64.powf(prm.p) * f.lp_norm(ks.space(), 2.0).powi(2) * (1.0 - 4f64.powf(-expo)) / expo;
    let tail = tilde - unit;
    let parts = heat_functional(&f, &ks, &prm, HeatMode::ITilde)
        .unwrap()
        .per_m;
    assert!(close(*parts.last().unwrap(), tail, 1e-9));
    assert!(
        tail >= 0.0 && tail <= bound * 1.01,
        "tail {tail} bound {bound}"
    );
}

#[test]
fn dirichlet_sine_approaches_two_pi_squared() {
    let ks = torus_kernel(9, &[1e-4, 1e-3, 1e-2, 0.1]);
    let f = sine(ks.space());
    let norm2 = f.lp_norm(ks.space(), 2.0).powi(2);
    let s = dirichlet_s(&f, &ks).unwrap().total;
    assert!(close(s, 2.0 * PI * PI * norm2, 0.05), "{s}");
}

#[test]
fn singular_matches_brute_force_on_half_indicator() {
    let space = torus(8);
    let n = space.len();
    let f = GridFn::from_fn(&space, |x| if x < n / 2 { 1.0 } else { 0.0 }).unwrap();
    let expo = 1.0 + 2.0 * 0.25;
    let mut brute = 0.0;
    for x in 0..n {
        for y in 0..n {
            if (x < n / 2) != (y < n / 2) {
                brute += arc(n, x, y).powf(-expo) / (n * n) as f64;
            }
        }
    }
    let got = singular_seminorm(&f, &space, 0.25, 2.0).unwrap();
    assert!(close(got, brute, 1e-12));
}

#[test]
fn strichartz_uses_every_level_edge() {
    let space = build_space(SpaceKind::Gasket, 4).unwrap();
    for m in 0..=4 {
        assert_eq!(
            space.level_edges(m).unwrap().len(),
            3usize.pow(m as u32 + 1)
        );
    }
    // A function with unit jumps on exactly one level-0 edge pair.
    let f = GridFn::from_fn(&space, |x| if x == 0 { 1.0 } else { 0.0 }).unwrap();
    let prm = BesovParams::new(0.5, 2.0, 2.0).unwrap().with_m_max(0);
    let b = strichartz_seminorm(&f, &space, &prm).unwrap();
    assert!(close(b.per_m[0], 2f64.sqrt(), 1e-12));
}

#[test]
fn gaussian_exit_tail_matches_normal_tail() {
    let ks = torus_kernel(10, &[1e-4]);
    let tail = ks.exit_tail(0, 0, 0.05).unwrap();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let phi_bar = |z: f64| 1.0 - normal.cdf(z);
    assert!(close(tail, 2.0 * phi_bar(5.0), 0.2));
    // Lattice points beyond δ start at offset 52; the sampled density sums
    // like the integral from the half-step before it.
    let edge = (0.05f64 * 1024.0).floor() + 0.5;
    let want = 2.0 * phi_bar(edge / 1024.0 / 1e-4f64.sqrt());
    assert!(close(tail, want, 0.02), "{tail} vs {want}");
}

#[test]
fn semigroup_damps_sine_exactly() {
    let t = 0.01;
    let ks = torus_kernel(8, &[t]);
    let f = sine(ks.space());
    let g = ks.apply_semigroup(0, &f).unwrap();
    let damp = (-2.0 * PI * PI * t).exp();
    let err = g
        .values()
        .iter()
        .zip(f.values())
        .map(|(a, b)| (a - damp * b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn gasket_diagonal_decay_rate() {
    let space = Arc::new(build_space(SpaceKind::Gasket, 6).unwrap());
    let times = log_space(5f64.powi(-4), 5f64.powi(-2), 5);
    let ks = make_kernel_set(space, KernelModel::LazyWalkGasket, &times, 0.5).unwrap();
    let fit = ks.fit_subgaussian_bounds().unwrap();
    let want = -(3f64.ln() / 5f64.ln());
    assert!((fit.diag_slope - want).abs() < 0.15, "{}", fit.diag_slope);
}

#[test]
fn classical_hardy_geometric_closed_form() {
    let (s, r, t): (f64, f64, f64) = (0.5, 2.0, 2.0);
    let len = 200;
    let x: Vec<f64> = (0..len).map(|m| s.powi(m)).collect();
    let check = classical_hardy(&x, r, t).unwrap();
    // Tails of a truncated geometric series, summed term by term.
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for m in 0..len {
        let tail = (s.powi(m) - s.powi(len)) / (1.0 - s);
        lhs += t.powi(m) * tail.powf(r);
        rhs += t.powi(m) * s.powi(m).powf(r);
    }
    assert!(close(check.k_required, lhs / rhs, 1e-10));
    // Infinite-length limit: (1 - s)^{-r}.
    assert!(close(check.k_required, (1.0 - s).powf(-r), 1e-10));
}

#[test]
fn modified_hardy_single_spike_bounded_by_majorant() {
    let dw = 5f64.ln() / 2f64.ln();
    let kappa = 2f64.powf(dw / (dw - 1.0));
    let (r, t, lambda) = (0.7, 2.0, 1.0);
    let k0 = 20;
    let mut x = vec![1e-300; 64];
    x[k0] = 3.0;
    let prm = HardyParams::new(r, t, kappa, lambda, 64).unwrap();
    let check = modified_hardy(&x, &prm).unwrap();
    let mut direct = 0.0;
    for m in k0..=(2 * k0).min(63) {
        direct +=
            t.powi(m as i32) * (x[k0] * (-lambda * kappa.powi((m - k0) as i32)).exp()).powf(r);
    }
    let rhs = t.powi(k0 as i32) * x[k0].powf(r);
    assert!(close(check.k_required, direct / rhs, 1e-6));
    let maj = case1_majorant(t, r, kappa, lambda).unwrap();
    assert!(check.k_required <= maj * (1.0 + 1e-9));
}

#[test]
fn lemma_sum_unit_parameters() {
    let direct: f64 = (0..200)
        .map(|m| 2f64.powi(-m) * (-(2f64.powi(-m))).exp())
        .sum();
    assert!(close(lemma_sum(1.0, 1.0, 1.0, 1.0, 1.0), direct, 1e-14));
}

#[test]
fn lemma_sum_band_for_gasket_exponents() {
    let d = 3f64.ln() / 2f64.ln();
    let dw = 5f64.ln() / 2f64.ln();
    let grid: Vec<f64> = log_space(1e-4, 1.0, 120)
        .into_iter()
        .map(|t| t.min(1.0))
        .collect();
    let table = lemma_sum_bounds(1.0, d + 1.0, 1.0 / dw, dw / (dw - 1.0), &grid).unwrap();
    assert!(table.k2_hat / table.k1_hat < 10.0);
}

#[test]
fn c_beta_against_gamma() {
    for beta in [0.1, 0.5, 1.0, 1.5, 1.9] {
        let want = gamma(1.0 - beta / 2.0) / (beta / 2.0);
        assert!(close(c_beta(beta).unwrap(), want, 1e-6), "beta {beta}");
    }
    assert!(close(c_beta(1.0).unwrap(), 2.0 * PI.sqrt(), 1e-8));
    assert!(close(c_beta(0.5).unwrap(), 4.9014, 1e-4));
}

#[test]
fn spectral_h_seminorm_of_sine() {
    let ks = torus_kernel(7, &[2e-4]);
    let sp = compute_spectrum(&ks).unwrap();
    let f = sine(ks.space());
    let norm2 = f.lp_norm(ks.space(), 2.0).powi(2);
    let h = spectral_seminorm_h(&f, &sp, 1.0).unwrap();
    let want = (1.0 + 2.0 * PI * PI).sqrt() * norm2;
    assert!(close(h, want, 0.01), "{h} vs {want}");
    assert!(close(
        spectral_seminorm_h(&f, &sp, 0.0).unwrap(),
        norm2,
        1e-10
    ));
}

#[test]
fn hz_single_mode_incomplete_gamma() {
    let ks = torus_kernel(7, &[2e-4]);
    let sp = compute_spectrum(&ks).unwrap();
    let f = sine(ks.space());
    let c = spectral_coeffs(&f, &sp).unwrap();
    let c2: f64 = c.coeffs.iter().map(|c| c * c).sum();
    let lambda = 2.0 * PI * PI;
    for beta in [0.5, 1.0, 1.5] {
        let prm = HzParams::new(beta, 2.0, 2.0);
        let rep = hz_seminorm(&f, &sp, &prm, HzRoute::Spectral).unwrap();
        // ∫ t^{2-β} λ² e^{-2tλ} dt/t = λ^β 2^{β-2} Γ(2-β) P(2-β, 2λt) |_{t_min}^{t_max}
        let a = 2.0 - beta;
        let window = gamma_lr(a, 2.0 * lambda * prm.t_max) - gamma_lr(a, 2.0 * lambda * prm.t_min);
        let want = c2 * lambda.powf(beta) * 2f64.powf(beta - 2.0) * gamma(a) * window;
        assert!(
            close(rep.integral, want, 0.01),
            "beta {beta}: {} vs {want}",
            rep.integral
        );
    }
}

#[test]
fn hz_routes_agree_on_torus_suite() {
    let ks = torus_kernel(6, &[5e-4]);
    let sp = compute_spectrum(&ks).unwrap();
    let prm = HzParams::new(1.0, 2.0, 2.0);
    let specs = [
        FunctionSpec::FourierMode { k: 1 },
        FunctionSpec::FourierMode { k: 3 },
        FunctionSpec::Linear { slope: 1.0 },
    ];
    for spec in &specs {
        let f = load_function(ks.space(), spec).unwrap();
        let a = hz_seminorm(&f, &sp, &prm, HzRoute::Spectral).unwrap().value;
        let b = hz_seminorm(&f, &sp, &prm, HzRoute::FiniteDifference)
            .unwrap()
            .value;
        assert!(close(b, a, 0.01), "{}: {a} vs {b}", spec.label());
    }
}

#[test]
fn hz_and_h_seminorm_are_comparable() {
    let ks = torus_kernel(7, &[2e-4]);
    let sp = compute_spectrum(&ks).unwrap();
    let prm = HzParams::new(1.0, 2.0, 2.0);
    let mut ratios = Vec::new();
    for spec in [
        FunctionSpec::FourierMode { k: 1 },
        FunctionSpec::FourierMode { k: 4 },
        FunctionSpec::CellIndicator {
            cell_level: 1,
            index: 0,
        },
        FunctionSpec::RandomHoelder { h: 0.6, seed: 7 },
    ] {
        let f = load_function(ks.space(), &spec).unwrap();
        let hz = hz_seminorm(&f, &sp, &prm, HzRoute::Spectral).unwrap().value;
        let n2 = f.lp_norm(ks.space(), 2.0).powi(2);
        ratios.push((hz * hz + n2) / spectral_seminorm_h(&f, &sp, 1.0).unwrap());
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    assert!(lo > 0.0 && hi / lo < 4.0, "{ratios:?}");
}
