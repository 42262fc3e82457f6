//! Symmetric Markovian kernel families on the built-in spaces.
//!
//! Densities are stored relative to `μ`, so `p(t,x,y)` is symmetric and
//! `Σ_y p(t,x,y) μ(y) = 1`.
//!
//! * `GaussianTorus`: periodized heat kernel with variance `t` per
//!   coordinate, `d_w = 2`.
//! * `LazyWalkGasket`: powers of the lazy simple random walk on `V_N`, with
//!   `n(t) = max(1, round(t·5^N))` steps, `d_w = log 5 / log 2`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::space::{least_squares, DiscreteSpace, GridFn, SpaceKind};

/// Largest space a kernel set is built on (dense `n × n` per time).
pub const KERNEL_MAX_POINTS: usize = 4096;

/// Image terms of the periodized Gaussian below this are dropped.
const IMAGE_CUTOFF: f64 = 1e-16;

/// Relative tolerance when matching a requested time with the grid.
pub const TIME_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelModel {
    GaussianTorus,
    LazyWalkGasket,
}

impl KernelModel {
    pub fn walk_dim(self) -> f64 {
        match self {
            KernelModel::GaussianTorus => 2.0,
            KernelModel::LazyWalkGasket => 5f64.ln() / 2f64.ln(),
        }
    }

    pub fn for_space(kind: SpaceKind) -> Self {
        match kind {
            SpaceKind::Gasket => KernelModel::LazyWalkGasket,
            _ => KernelModel::GaussianTorus,
        }
    }

    pub fn compatible(self, kind: SpaceKind) -> bool {
        matches!(
            (self, kind),
            (KernelModel::GaussianTorus, SpaceKind::Torus1d)
                | (KernelModel::GaussianTorus, SpaceKind::Torus2d)
                | (KernelModel::LazyWalkGasket, SpaceKind::Gasket)
        )
    }
}

impl fmt::Display for KernelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelModel::GaussianTorus => "gaussian_torus",
            KernelModel::LazyWalkGasket => "lazy_walk_gasket",
        })
    }
}

#[derive(Debug, Clone)]
pub struct KernelSet {
    space: Arc<DiscreteSpace>,
    model: KernelModel,
    laziness: f64,
    times: Vec<f64>,
    /// Walk steps per time (gasket model only).
    steps: Option<Vec<u64>>,
    densities: Vec<Matrix>,
    positive_from: Option<f64>,
}

/// Builds `p(t, ·, ·)` for every time of the grid.
pub fn make_kernel_set(
    space: Arc<DiscreteSpace>,
    model: KernelModel,
    times: &[f64],
    laziness: f64,
) -> Result<KernelSet> {
    if !model.compatible(space.kind()) {
        return Err(Error::IncompatibleModel {
            model: model.to_string(),
            kind: space.kind().to_string(),
        });
    }
    if times.is_empty() {
        return Err(Error::TimeGrid("empty time grid".into()));
    }
    if times.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::TimeGrid("times must be positive and finite".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::TimeGrid("times must be strictly increasing".into()));
    }
    if !(laziness > 0.0 && laziness < 1.0) {
        return Err(invalid(format!(
            "laziness must lie in (0,1), got {laziness}"
        )));
    }
    if space.len() > KERNEL_MAX_POINTS {
        return Err(invalid(format!(
            "space has {} points; kernels are built for at most {KERNEL_MAX_POINTS}",
            space.len()
        )));
    }

    let (densities, steps) = match model {
        KernelModel::GaussianTorus => (
            times.iter().map(|&t| gaussian_density(&space, t)).collect(),
            None,
        ),
        KernelModel::LazyWalkGasket => {
            let steps: Vec<u64> = times.iter().map(|&t| walk_steps(&space, t)).collect();
            (walk_densities(&space, laziness, &steps), Some(steps))
        }
    };
    let positive_from = times
        .iter()
        .zip(&densities)
        .find(|(_, m)| m.min_entry() > 0.0)
        .map(|(&t, _)| t);

    Ok(KernelSet {
        space,
        model,
        laziness,
        times: times.to_vec(),
        steps,
        densities,
        positive_from,
    })
}

/// `n(t) = max(1, round(t · 5^N))`.
pub fn walk_steps(space: &DiscreteSpace, t: f64) -> u64 {
    let scale = 5f64.powi(space.level() as i32);
    (t * scale).round().max(1.0) as u64
}

/// One-dimensional periodized Gaussian `Σ_j (2πt)^{-1/2} exp(-(δ+j)²/2t)`.
pub fn periodized_gaussian(t: f64, delta: f64) -> f64 {
    let norm = (2.0 * std::f64::consts::PI * t).sqrt().recip();
    let term = |j: f64| norm * (-(delta + j).powi(2) / (2.0 * t)).exp();
    let mut sum = term(0.0);
    for dir in [1.0, -1.0] {
        let mut j = dir;
        loop {
            let v = term(j);
            sum += v;
            // Terms decrease once the image is farther than the point itself.
            if v < IMAGE_CUTOFF && (delta + j).abs() > delta.abs() {
                break;
            }
            j += dir;
        }
    }
    sum
}

fn gaussian_density(space: &DiscreteSpace, t: f64) -> Matrix {
    let level = space.level();
    let side = 1usize << level;
    let h = space.spacing();
    // Profile by wrapped lattice offset, mirrored so the matrix is exactly symmetric.
    let mut profile = vec![0.0; side];
    for k in 0..=side / 2 {
        let v = periodized_gaussian(t, k as f64 * h);
        profile[k] = v;
        profile[(side - k) % side] = v;
    }
    match space.kind() {
        SpaceKind::Torus1d => Matrix::from_fn(side, |i, j| profile[(j + side - i) % side]),
        SpaceKind::Torus2d => Matrix::from_fn(side * side, |a, b| {
            let (ax, ay) = (a % side, a / side);
            let (bx, by) = (b % side, b / side);
            profile[(bx + side - ax) % side] * profile[(by + side - ay) % side]
        }),
        SpaceKind::Gasket => unreachable!("checked by compatibility"),
    }
}

/// One step of the lazy walk: `(1-ℓ)I + ℓ·(uniform move to a neighbour)`.
pub fn lazy_walk_matrix(space: &DiscreteSpace, laziness: f64) -> Matrix {
    let n = space.len();
    let mut p = Matrix::identity(n);
    for x in 0..n {
        p.set(x, x, 1.0 - laziness);
        let nb = space.neighbors(x);
        let share = laziness / nb.len() as f64;
        for &y in nb {
            p.set(x, y, p.get(x, y) + share);
        }
    }
    p
}

/// Densities `P^n(x,y)/μ(y)` for each requested step count, built from
/// cached binary powers so that every matrix is an exact product of `P`.
fn walk_densities(space: &DiscreteSpace, laziness: f64, steps: &[u64]) -> Vec<Matrix> {
    let max_step = steps.iter().copied().max().unwrap_or(1);
    let mut binary = vec![lazy_walk_matrix(space, laziness)];
    while (1u64 << binary.len()) <= max_step {
        let last = binary.last().expect("non-empty");
        binary.push(last.matmul(last));
    }

    let mut unique: BTreeMap<u64, Matrix> = BTreeMap::new();
    let mut current: Option<Matrix> = None;
    let mut current_step = 0u64;
    let mut wanted: Vec<u64> = steps.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    for &target in &wanted {
        let mut delta = target - current_step;
        let mut bit = 0;
        while delta > 0 {
            if delta & 1 == 1 {
                current = Some(match current {
                    None => binary[bit].clone(),
                    Some(c) => c.matmul(&binary[bit]),
                });
            }
            delta >>= 1;
            bit += 1;
        }
        current_step = target;
        let power = current.as_ref().expect("target >= 1");
        let mut density = Matrix::from_fn(space.len(), |x, y| power.get(x, y) / space.weight(y));
        density.symmetrize();
        unique.insert(target, density);
    }
    steps.iter().map(|s| unique[s].clone()).collect()
}

impl KernelSet {
    pub fn space(&self) -> &DiscreteSpace {
        &self.space
    }

    pub fn space_arc(&self) -> Arc<DiscreteSpace> {
        Arc::clone(&self.space)
    }

    pub fn model(&self) -> KernelModel {
        self.model
    }

    pub fn laziness(&self) -> f64 {
        self.laziness
    }

    pub fn walk_dim(&self) -> f64 {
        self.model.walk_dim()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> Option<&[u64]> {
        self.steps.as_deref()
    }

    pub fn density(&self, t_idx: usize) -> &Matrix {
        &self.densities[t_idx]
    }

    /// Smallest grid time at which every density entry is strictly positive.
    pub fn positive_from(&self) -> Option<f64> {
        self.positive_from
    }

    fn check_time(&self, t_idx: usize) -> Result<()> {
        if t_idx >= self.times.len() {
            return Err(invalid(format!(
                "time index {t_idx} out of range ({} grid times)",
                self.times.len()
            )));
        }
        Ok(())
    }

    /// Index of the grid time equal to `t` up to [`TIME_MATCH_TOL`].
    pub fn find_time(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= TIME_MATCH_TOL * t.abs().max(1e-300))
    }

    /// `(P_t f)(x) = Σ_y f(y) p(t,x,y) μ(y)`.
    pub fn apply_semigroup(&self, t_idx: usize, f: &GridFn) -> Result<GridFn> {
        self.check_time(t_idx)?;
        f.check_space(&self.space)?;
        let fw: Vec<f64> = f
            .values()
            .iter()
            .zip(self.space.weights())
            .map(|(v, w)| v * w)
            .collect();
        GridFn::new(&self.space, self.densities[t_idx].mat_vec(&fw))
    }

    /// `ℙ_x[ρ(x, B_t) > δ] = Σ_{ρ(x,y) > δ} p(t,x,y) μ(y)`.
    pub fn exit_tail(&self, t_idx: usize, x: usize, delta: f64) -> Result<f64> {
        self.check_time(t_idx)?;
        if x >= self.space.len() {
            return Err(Error::IndexOutOfRange {
                index: x,
                len: self.space.len(),
            });
        }
        if !(delta >= 0.0) {
            return Err(invalid(format!("delta must be nonnegative, got {delta}")));
        }
        let row = self.densities[t_idx].row(x);
        let tail: f64 = (0..self.space.len())
            .filter(|&y| self.space.dist(x, y) > delta)
            .map(|y| row[y] * self.space.weight(y))
            .sum();
        Ok(tail.clamp(0.0, 1.0))
    }

    /// Residuals of (A1)–(A5); the Chapman–Kolmogorov check uses
    /// `times[s_idx] + times[t_idx]`, which must lie on the grid.
    pub fn check_axioms(&self, s_idx: usize, t_idx: usize) -> Result<AxiomReport> {
        self.check_time(s_idx)?;
        self.check_time(t_idx)?;
        let target = self.times[s_idx] + self.times[t_idx];
        let u_idx = self
            .find_time(target)
            .ok_or_else(|| Error::TimeGrid(format!("grid does not contain s + t = {target}")))?;
        let w = self.space.weights();
        let n = self.space.len();

        let mut symmetry_err = 0.0f64;
        let mut stochasticity_err = 0.0f64;
        for m in &self.densities {
            symmetry_err = symmetry_err.max(m.max_asymmetry());
            for x in 0..n {
                let s: f64 = m.row(x).iter().zip(w).map(|(p, w)| p * w).sum();
                stochasticity_err = stochasticity_err.max((s - 1.0).abs());
            }
        }

        let weighted_t = Matrix::from_fn(n, |z, y| w[z] * self.densities[t_idx].get(z, y));
        let composed = self.densities[s_idx].matmul(&weighted_t);
        let target_m = &self.densities[u_idx];
        let mut chapman_err = 0.0f64;
        for x in 0..n {
            for (a, b) in composed.row(x).iter().zip(target_m.row(x)) {
                chapman_err = chapman_err.max((a - b).abs());
            }
        }

        let positivity_min = self.densities.last().expect("non-empty grid").min_entry();

        let test = GridFn::from_fn(&self.space, |x| {
            (2.0 * std::f64::consts::PI * self.space.coords(x)[0]).cos()
        })?;
        let smoothed = self.apply_semigroup(0, &test)?;
        let continuity_err = test
            .values()
            .iter()
            .zip(smoothed.values())
            .zip(w)
            .map(|((a, b), w)| (a - b).powi(2) * w)
            .sum::<f64>()
            .sqrt();

        Ok(AxiomReport {
            symmetry_err,
            stochasticity_err,
            chapman_err,
            positivity_min,
            continuity_err,
        })
    }

    /// Least-squares envelopes for the sub-Gaussian two-sided bound, in the
    /// variables `u = (ρ/t^{1/d_w})^{d_w/(d_w-1)}` and `v = ln(p·t^{d/d_w})`.
    pub fn fit_subgaussian_bounds(&self) -> Result<BoundFit> {
        let t_min = self.times[0];
        let t_max = *self.times.last().expect("non-empty");
        if self.times.len() < 3 || t_max / t_min < 4.0 {
            return Err(Error::TooFewSamples(
                "need at least 3 times spanning two dyadic orders".into(),
            ));
        }
        let dw = self.walk_dim();
        let d = self.space.hausdorff_dim();
        let expo = dw / (dw - 1.0);
        let n = self.space.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EB6_A055);
        let off_diag = 4000.min(n * (n - 1) / 2);

        let mut samples: Vec<(f64, f64)> = Vec::new();
        let mut diag: Vec<(f64, f64)> = Vec::new();
        for (t, m) in self.times.iter().zip(&self.densities) {
            let scale = t.powf(d / dw);
            let push = |x: usize, y: usize, samples: &mut Vec<(f64, f64)>| {
                let p = m.get(x, y);
                if p > 1e-300 {
                    let u = (self.space.dist(x, y) / t.powf(1.0 / dw)).powf(expo);
                    samples.push((u, (p * scale).ln()));
                }
            };
            let mut diag_sum = 0.0;
            for x in 0..n {
                push(x, x, &mut samples);
                diag_sum += m.get(x, x).ln();
            }
            diag.push((t.ln(), diag_sum / n as f64));
            for _ in 0..off_diag {
                let x = rng.random_range(0..n);
                let mut y = rng.random_range(0..n - 1);
                if y >= x {
                    y += 1;
                }
                push(x, y, &mut samples);
            }
        }
        if samples.len() < 10 {
            return Err(Error::TooFewSamples(format!(
                "only {} kernel samples above 1e-300",
                samples.len()
            )));
        }

        let fit = |pts: &[(f64, f64)]| least_squares(pts.iter().map(|&(u, v)| (u, v)));
        let (slope, intercept) = fit(&samples);
        let central_rate = -slope;
        if !(central_rate > 0.0) {
            return Err(Error::TooFewSamples(
                "kernel samples show no spatial decay".into(),
            ));
        }
        let residual_of = |&(u, v): &(f64, f64)| v - (intercept + slope * u);
        let (upper, lower): (Vec<_>, Vec<_>) = samples.iter().partition(|s| residual_of(s) >= 0.0);
        let half_rate = |pts: &[(f64, f64)]| {
            if pts.len() >= 3 {
                let r = -fit(pts).0;
                if r.is_finite() && r > 0.0 {
                    return r;
                }
            }
            central_rate
        };
        let (mut c4, mut c2) = (half_rate(&upper), half_rate(&lower));
        if c4 > c2 {
            c4 = central_rate;
            c2 = central_rate;
        }
        let ln_c3 = samples
            .iter()
            .map(|&(u, v)| v + c4 * u)
            .fold(f64::NEG_INFINITY, f64::max);
        let ln_c1 = samples
            .iter()
            .map(|&(u, v)| v + c2 * u)
            .fold(f64::INFINITY, f64::min);
        let residual = (samples.iter().map(|s| residual_of(s).powi(2)).sum::<f64>()
            / samples.len() as f64)
            .sqrt();
        let (diag_slope, _) = least_squares(diag.iter().copied());

        Ok(BoundFit {
            c1_hat: ln_c1.exp(),
            c2_hat: c2,
            c3_hat: ln_c3.exp(),
            c4_hat: c4,
            residual,
            sample_count: samples.len(),
            exponent: expo,
            diag_slope,
        })
    }

    /// CSV dump of the density matrix at one time: `x,y,p`.
    pub fn write_density_csv<W: std::io::Write>(&self, t_idx: usize, mut w: W) -> Result<()> {
        self.check_time(t_idx)?;
        writeln!(w, "x,y,p")?;
        let m = &self.densities[t_idx];
        for x in 0..m.dim() {
            for (y, p) in m.row(x).iter().enumerate() {
                writeln!(w, "{x},{y},{p}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AxiomReport {
    pub symmetry_err: f64,
    pub stochasticity_err: f64,
    pub chapman_err: f64,
    pub positivity_min: f64,
    pub continuity_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundFit {
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub c3_hat: f64,
    pub c4_hat: f64,
    /// RMS deviation of `v` from the central least-squares line.
    pub residual: f64,
    pub sample_count: usize,
    /// `d_w / (d_w - 1)`.
    pub exponent: f64,
    /// Slope of the mean of `ln p(t,x,x)` against `ln t`.
    pub diag_slope: f64,
}
