//! Spectral decomposition of the discrete semigroup, the `H^β_2` and
//! Hu–Zähle seminorms, and the comparison of `Lip(βd_w/4, 2, 2)` with the
//! spectral integral.

use serde::{Deserialize, Serialize};

use crate::besov::{heat_integral_extended, EquivalenceReport};
use crate::error::{invalid, Error, Result};
use crate::hardy::c_beta;
use crate::kernel::KernelSet;
use crate::linalg::{sym_eigen, Matrix};
use crate::space::{GridFn, SpaceId};

pub const EIGEN_MAX_POINTS: usize = 4000;

/// `|ln μ|` below this counts as the eigenvalue `μ = 1`.
const UNIT_TOL: f64 = 1e-11;

/// Eigenpairs of the generator `A = -ln(P_τ)/τ`, with `λ` nondecreasing and
/// modes orthonormal in `Σ u v μ`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub space: SpaceId,
    pub eigenvalues: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub generator_scale: f64,
    weights: Vec<f64>,
}

/// Spectrum from the smallest time of the grid.
pub fn compute_spectrum(ks: &KernelSet) -> Result<Spectrum> {
    compute_spectrum_at(ks, 0)
}

/// Spectrum from grid time `t_idx`. The operator `P_τ` is symmetrized as
/// `μ^{1/2} p(τ,·,·) μ^{1/2}` and diagonalized; each eigenvalue `m` of it
/// becomes `λ = -ln(m)/τ`, so that `e^{-τλ}` reproduces `P_τ` exactly.
pub fn compute_spectrum_at(ks: &KernelSet, t_idx: usize) -> Result<Spectrum> {
    let space = ks.space();
    let n = space.len();
    if n > EIGEN_MAX_POINTS {
        return Err(invalid(format!(
            "space has {n} points; the eigensolver is capped at {EIGEN_MAX_POINTS}"
        )));
    }
    if t_idx >= ks.times().len() {
        return Err(invalid(format!("time index {t_idx} out of range")));
    }
    let tau = ks.times()[t_idx];
    let w = space.weights();
    let root: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let p = ks.density(t_idx);
    let mut s = Matrix::from_fn(n, |x, y| root[x] * p.get(x, y) * root[y]);
    s.symmetrize();
    let eig = sym_eigen(&s)?;

    // Largest operator eigenvalue first, i.e. smallest λ first.
    let mut eigenvalues = Vec::with_capacity(n);
    let mut modes = Vec::with_capacity(n);
    for k in (0..n).rev() {
        let mu = eig.values[k];
        let log_mu = mu.max(f64::MIN_POSITIVE).ln();
        let lambda = if log_mu.abs() < UNIT_TOL {
            0.0
        } else {
            (-log_mu / tau).max(0.0)
        };
        let mut mode: Vec<f64> = eig.vectors[k]
            .iter()
            .zip(&root)
            .map(|(v, r)| v / r)
            .collect();
        if mode.iter().sum::<f64>() < 0.0 {
            mode.iter_mut().for_each(|v| *v = -*v);
        }
        eigenvalues.push(lambda);
        modes.push(mode);
    }
    Ok(Spectrum {
        space: space.id(),
        eigenvalues,
        modes,
        generator_scale: tau,
        weights: w.to_vec(),
    })
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    fn check(&self, f: &GridFn) -> Result<()> {
        if f.space_id() != self.space {
            return Err(Error::SpaceMismatch {
                found: f.space_id().to_string(),
                expected: self.space.to_string(),
            });
        }
        Ok(())
    }

    /// `max |⟨u_i, u_j⟩ - δ_ij|` over all pairs.
    pub fn orthonormality_residual(&self) -> f64 {
        let n = self.len();
        let scaled = Matrix::from_fn(n, |k, x| self.modes[k][x] * self.weights[x]);
        let plain = Matrix::from_fn(n, |x, k| self.modes[k][x]);
        let gram = scaled.matmul(&plain);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram.get(i, j) - target).abs());
            }
        }
        worst
    }

    /// Spectral synthesis `Σ_k c_k u_k`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.weights.len()];
        for (c, mode) in coeffs.iter().zip(&self.modes) {
            if *c != 0.0 {
                for (o, u) in out.iter_mut().zip(mode) {
                    *o += c * u;
                }
            }
        }
        out
    }

    /// `P_t f = Σ_k e^{-tλ_k} f̂_k u_k`.
    pub fn evolve(&self, coeffs: &SpectralCoeffs, t: f64) -> Vec<f64> {
        let c: Vec<f64> = coeffs
            .coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| c * (-t * l).exp())
            .collect();
        self.synthesize(&c)
    }

    /// `‖P_t f - Σ e^{-tλ_k} f̂_k u_k‖₂` at grid time `t_idx`.
    pub fn reconstruction_error(&self, ks: &KernelSet, t_idx: usize, f: &GridFn) -> Result<f64> {
        let coeffs = spectral_coeffs(f, self)?;
        let direct = ks.apply_semigroup(t_idx, f)?;
        let synth = self.evolve(&coeffs, ks.times()[t_idx]);
        Ok(direct
            .values()
            .iter()
            .zip(&synth)
            .zip(&self.weights)
            .map(|((a, b), w)| (a - b).powi(2) * w)
            .sum::<f64>()
            .sqrt())
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,lambda")?;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{k},{l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoeffs {
    pub coeffs: Vec<f64>,
    /// `|Σ f̂_k² - ‖f‖₂²|`.
    pub parseval_residual: f64,
}

pub fn spectral_coeffs(f: &GridFn, sp: &Spectrum) -> Result<SpectralCoeffs> {
    sp.check(f)?;
    let coeffs: Vec<f64> = sp
        .modes
        .iter()
        .map(|u| {
            f.values()
                .iter()
                .zip(u)
                .zip(&sp.weights)
                .map(|((a, b), w)| a * b * w)
                .sum()
        })
        .collect();
    let norm2: f64 = f
        .values()
        .iter()
        .zip(&sp.weights)
        .map(|(v, w)| v * v * w)
        .sum();
    let energy: f64 = coeffs.iter().map(|c| c * c).sum();
    Ok(SpectralCoeffs {
        coeffs,
        parseval_residual: (energy - norm2).abs(),
    })
}

/// `Σ_k (1+λ_k)^{β/2} f̂_k²`, the constant mode included.
pub fn spectral_seminorm_h(f: &GridFn, sp: &Spectrum, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(invalid(format!("beta must be nonnegative, got {beta}")));
    }
    let c = spectral_coeffs(f, sp)?;
    Ok(c.coeffs
        .iter()
        .zip(&sp.eigenvalues)
        .map(|(c, l)| (1.0 + l).powf(beta / 2.0) * c * c)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HzRoute {
    /// `‖∂^k P_t f‖₂² = Σ λ^{2k} e^{-2tλ} f̂²`; `p = 2` only.
    Spectral,
    /// Central differences of `t ↦ P_t f` with step `t/16`.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HzParams {
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub k: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
}

impl HzParams {
    /// Defaults: `k = ⌊β/2⌋ + 1`, times `[1e-4, 1e2]`, 32 nodes per decade.
    pub fn new(beta: f64, p: f64, q: f64) -> Self {
        Self {
            beta,
            p,
            q,
            k: (beta / 2.0).floor() as usize + 1,
            t_min: 1e-4,
            t_max: 1e2,
            per_decade: 32,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(invalid(format!("beta must be positive, got {}", self.beta)));
        }
        let k = (self.beta / 2.0).floor() as usize + 1;
        if self.k != k {
            return Err(invalid(format!(
                "derivative order must be floor(beta/2)+1 = {k}, got {}",
                self.k
            )));
        }
        if !(self.p >= 1.0) || !(self.q >= 1.0) {
            return Err(invalid("p and q must be at least 1"));
        }
        if !(self.t_min > 0.0 && self.t_max > self.t_min) || self.per_decade == 0 {
            return Err(invalid("bad time range for the Hu–Zähle quadrature"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HzBand {
    pub t_lo: f64,
    pub t_hi: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HzReport {
    pub route: HzRoute,
    /// The seminorm, i.e. the integral to the power `1/q`.
    pub value: f64,
    pub integral: f64,
    pub per_band: Vec<HzBand>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(∫ (t^{k-β/2} ‖∂^k_t P_t f‖_p)^q dt/t)^{1/q}` over `[t_min, t_max]`,
/// midpoint rule in `ln t`, with the constant modes removed.
pub fn hz_seminorm(f: &GridFn, sp: &Spectrum, prm: &HzParams, route: HzRoute) -> Result<HzReport> {
    prm.validate()?;
    if route == HzRoute::Spectral && prm.p != 2.0 {
        return Err(Error::Unsupported(
            "the spectral derivative identity holds for p = 2 only".into(),
        ));
    }
    let mut coeffs = spectral_coeffs(f, sp)?;
    for (c, l) in coeffs.coeffs.iter_mut().zip(&sp.eigenvalues) {
        if *l == 0.0 {
            *c = 0.0;
        }
    }
    let k = prm.k;
    let derivative_norm = |t: f64| -> f64 {
        match route {
            HzRoute::Spectral => coeffs
                .coeffs
                .iter()
                .zip(&sp.eigenvalues)
                .map(|(c, l)| l.powi(2 * k as i32) * (-2.0 * t * l).exp() * c * c)
                .sum::<f64>()
                .sqrt(),
            HzRoute::FiniteDifference => {
                let h = t / 16.0;
                let mut d = vec![0.0; sp.weights.len()];
                for j in 0..=k {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let weight = sign * binomial(k, j) / h.powi(k as i32);
                    let shift = (k as f64 / 2.0 - j as f64) * h;
                    for (o, v) in d.iter_mut().zip(sp.evolve(&coeffs, t + shift)) {
                        *o += weight * v;
                    }
                }
                d.iter()
                    .zip(&sp.weights)
                    .map(|(v, w)| v.abs().powf(prm.p) * w)
                    .sum::<f64>()
                    .powf(1.0 / prm.p)
            }
        }
    };

    let decades = (prm.t_max / prm.t_min).log10();
    let count = (decades * prm.per_decade as f64).ceil().max(1.0) as usize;
    let (lo, hi) = (prm.t_min.ln(), prm.t_max.ln());
    let step = (hi - lo) / count as f64;
    let expo = k as f64 - prm.beta / 2.0;
    let mut per_band: Vec<HzBand> = Vec::new();
    let mut sup = 0.0f64;
    for i in 0..count {
        let t = (lo + (i as f64 + 0.5) * step).exp();
        let g = t.powf(expo) * derivative_norm(t);
        sup = sup.max(g);
        let contribution = if prm.q.is_finite() {
            g.powf(prm.q) * step
        } else {
            g
        };
        let band = ((i as f64 * step) / std::f64::consts::LN_10).floor();
        let t_lo = prm.t_min * 10f64.powf(band);
        match per_band.last_mut() {
            Some(b) if b.t_lo == t_lo => {
                b.contribution = if prm.q.is_finite() {
                    b.contribution + contribution
                } else {
                    b.contribution.max(contribution)
                }
            }
            _ => per_band.push(HzBand {
                t_lo,
                t_hi: (t_lo * 10.0).min(prm.t_max),
                contribution,
            }),
        }
    }
    let (integral, value) = if prm.q.is_finite() {
        let total: f64 = per_band.iter().map(|b| b.contribution).sum();
        (total, total.powf(1.0 / prm.q))
    } else {
        (sup, sup)
    };
    Ok(HzReport {
        route,
        value,
        integral,
        per_band,
    })
}

/// Compares `∫_0^∞ t^{-β/2} E(t) dt/t`, the `Lip(βd_w/4, 2, 2)` functional
/// over all times, with `2 C_β Σ_{k≥1} λ_k^{β/2} f̂_k²`. The factor 2 comes
/// from `E(t) = 2⟨f - P_t f, f⟩`.
///
/// The left side is integrated over the kernel's time grid, which should
/// reach down to times where the pair energy is negligible.
pub fn lip_vs_spectral_report(
    f: &GridFn,
    ks: &KernelSet,
    sp: &Spectrum,
    beta: f64,
) -> Result<EquivalenceReport> {
    if !(beta > 0.0 && beta < 2.0) {
        return Err(invalid(format!("beta must lie in (0, 2), got {beta}")));
    }
    let alpha = beta * ks.walk_dim() / 4.0;
    let lhs = heat_integral_extended(f, ks, alpha, 2.0, 2.0)?.total;
    let coeffs = spectral_coeffs(f, sp)?;
    // Coefficients at roundoff level of the eigenbasis are dropped.
    let floor = 1e-12 * coeffs.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let sum: f64 = coeffs
        .coeffs
        .iter()
        .zip(&sp.eigenvalues)
        .filter(|(c, l)| **l > 0.0 && c.abs() > floor)
        .map(|(c, l)| l.powf(beta / 2.0) * c * c)
        .sum();
    let rhs = 2.0 * c_beta(beta)? * sum;
    let mut report = EquivalenceReport::new("heat_i_tilde", "spectral", lhs, rhs)?;
    report.push_level(ks.space().level(), lhs, rhs)?;
    Ok(report)
}
