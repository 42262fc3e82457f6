//! Discrete Ahlfors-regular metric measure spaces: the dyadic circle, the
//! dyadic flat torus and graph approximations `V_N` of the Sierpiński gasket.
//!
//! Distances are evaluated on demand from integer lattice coordinates, so
//! dyadic distances such as `2^-m` are exact and no `n × n` matrix is stored.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const TORUS1D_MAX_LEVEL: usize = 14;
pub const TORUS2D_MAX_LEVEL: usize = 7;
pub const GASKET_MAX_LEVEL: usize = 8;

/// Relative slack used when comparing a distance with a radius.
const RADIUS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Torus1d,
    Torus2d,
    Gasket,
}

impl SpaceKind {
    pub fn max_level(self) -> usize {
        match self {
            SpaceKind::Torus1d => TORUS1D_MAX_LEVEL,
            SpaceKind::Torus2d => TORUS2D_MAX_LEVEL,
            SpaceKind::Gasket => GASKET_MAX_LEVEL,
        }
    }

    pub fn hausdorff_dim(self) -> f64 {
        match self {
            SpaceKind::Torus1d => 1.0,
            SpaceKind::Torus2d => 2.0,
            SpaceKind::Gasket => 3f64.ln() / 2f64.ln(),
        }
    }

    /// Upper bound on `c2_hat / c1_hat` accepted for this kind.
    pub fn ahlfors_ratio_bound(self) -> f64 {
        match self {
            SpaceKind::Torus1d => 2.0,
            SpaceKind::Torus2d => 3.0,
            SpaceKind::Gasket => 8.0,
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::Torus1d => "torus1d",
            SpaceKind::Torus2d => "torus2d",
            SpaceKind::Gasket => "gasket",
        })
    }
}

impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus1d" => Ok(SpaceKind::Torus1d),
            "torus2d" => Ok(SpaceKind::Torus2d),
            "gasket" => Ok(SpaceKind::Gasket),
            other => Err(invalid(format!("unknown space kind `{other}`"))),
        }
    }
}

/// Identifies the space a [`GridFn`] is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceId {
    pub kind: SpaceKind,
    pub level: usize,
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind, self.level)
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    kind: SpaceKind,
    level: usize,
    /// Integer lattice coordinates in units of `2^-level`. For the gasket
    /// these are coefficients along `(1, 0)` and `(1/2, √3/2)`.
    lattice: Vec<[i64; 2]>,
    weight: Vec<f64>,
    total_measure: f64,
    /// Nearest-neighbour graph (gasket: edges of `V_N`; tori: lattice steps).
    neighbors: Vec<Vec<usize>>,
    /// Gasket only: first level `j` with the vertex in `V_j`.
    vertex_level: Vec<usize>,
    /// Gasket only: endpoints of the edge a vertex bisects when it appears.
    parents: Vec<Option<(usize, usize)>>,
}

/// Builds one of the built-in spaces.
pub fn build_space(kind: SpaceKind, level: usize) -> Result<DiscreteSpace> {
    if level < 1 || level > kind.max_level() {
        return Err(Error::LevelOutOfRange {
            kind: kind.to_string(),
            level,
            max: kind.max_level(),
        });
    }
    Ok(match kind {
        SpaceKind::Torus1d => torus1d(level),
        SpaceKind::Torus2d => torus2d(level),
        SpaceKind::Gasket => gasket(level),
    })
}

fn torus1d(level: usize) -> DiscreteSpace {
    let n = 1usize << level;
    let w = 1.0 / n as f64;
    let neighbors = (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect();
    DiscreteSpace {
        kind: SpaceKind::Torus1d,
        level,
        lattice: (0..n as i64).map(|i| [i, 0]).collect(),
        weight: vec![w; n],
        total_measure: 1.0,
        neighbors,
        vertex_level: Vec::new(),
        parents: Vec::new(),
    }
}

fn torus2d(level: usize) -> DiscreteSpace {
    let side = 1usize << level;
    let n = side * side;
    let w = 1.0 / n as f64;
    let idx = |x: usize, y: usize| (y % side) * side + (x % side);
    let mut lattice = Vec::with_capacity(n);
    let mut neighbors = Vec::with_capacity(n);
    for y in 0..side {
        for x in 0..side {
            lattice.push([x as i64, y as i64]);
            neighbors.push(vec![
                idx(x + side - 1, y),
                idx(x + 1, y),
                idx(x, y + side - 1),
                idx(x, y + 1),
            ]);
        }
    }
    DiscreteSpace {
        kind: SpaceKind::Torus2d,
        level,
        lattice,
        weight: vec![w; n],
        total_measure: 1.0,
        neighbors,
        vertex_level: Vec::new(),
        parents: Vec::new(),
    }
}

/// Gasket cells are triangles with corners `(a,b)`, `(a+s,b)`, `(a,b+s)` in
/// lattice units. Vertices are numbered level by level, so `V_m` is always
/// the prefix of length `3(3^m+1)/2`.
fn gasket(level: usize) -> DiscreteSpace {
    let side = 1i64 << level;
    let mut lattice: Vec<[i64; 2]> = vec![[0, 0], [side, 0], [0, side]];
    let mut vertex_level = vec![0usize; 3];
    let mut parents: Vec<Option<(usize, usize)>> = vec![None; 3];
    let mut lookup: HashMap<[i64; 2], usize> =
        lattice.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let mut cells: Vec<[i64; 3]> = vec![[0, 0, side]];

    for j in 1..=level {
        let mut next = Vec::with_capacity(cells.len() * 3);
        for &[a, b, s] in &cells {
            let h = s / 2;
            let corner_a = lookup[&[a, b]];
            let corner_b = lookup[&[a + s, b]];
            let corner_c = lookup[&[a, b + s]];
            for (p, pair) in [
                ([a + h, b], (corner_a, corner_b)),
                ([a, b + h], (corner_a, corner_c)),
                ([a + h, b + h], (corner_b, corner_c)),
            ] {
                lookup.entry(p).or_insert_with(|| {
                    lattice.push(p);
                    vertex_level.push(j);
                    parents.push(Some(pair));
                    lattice.len() - 1
                });
            }
            next.push([a, b, h]);
            next.push([a + h, b, h]);
            next.push([a, b + h, h]);
        }
        cells = next;
    }

    let n = lattice.len();
    let mut neighbors = vec![Vec::with_capacity(4); n];
    for &[a, b, s] in &cells {
        let tri = [lookup[&[a, b]], lookup[&[a + s, b]], lookup[&[a, b + s]]];
        for (u, v) in [(tri[0], tri[1]), (tri[0], tri[2]), (tri[1], tri[2])] {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
    }
    let degree_sum: usize = neighbors.iter().map(Vec::len).sum();
    let weight = neighbors
        .iter()
        .map(|nb| nb.len() as f64 / degree_sum as f64)
        .collect();
    DiscreteSpace {
        kind: SpaceKind::Gasket,
        level,
        lattice,
        weight,
        total_measure: 1.0,
        neighbors,
        vertex_level,
        parents,
    }
}

/// Number of vertices of the gasket approximation `V_level`.
pub fn gasket_vertex_count(level: usize) -> usize {
    3 * (3usize.pow(level as u32) + 1) / 2
}

/// Dyadic shell index `m` with `2^-(m+1) < rho <= 2^-m`, for `0 < rho <= 1`.
pub fn dyadic_shell(rho: f64) -> usize {
    debug_assert!(rho > 0.0);
    let mut m = (-rho.log2()).floor().max(0.0) as i32;
    while m > 0 && rho > pow2(-m) {
        m -= 1;
    }
    while rho <= pow2(-(m + 1)) {
        m += 1;
    }
    m as usize
}

#[inline]
fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

impl DiscreteSpace {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn id(&self) -> SpaceId {
        SpaceId {
            kind: self.kind,
            level: self.level,
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weight[x]
    }

    pub fn hausdorff_dim(&self) -> f64 {
        self.kind.hausdorff_dim()
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    /// Lattice spacing `2^-level`, the smallest positive distance.
    pub fn spacing(&self) -> f64 {
        pow2(-(self.level as i32))
    }

    pub fn diam(&self) -> f64 {
        match self.kind {
            SpaceKind::Torus1d => 0.5,
            SpaceKind::Torus2d => 0.5 * 2f64.sqrt(),
            SpaceKind::Gasket => 1.0,
        }
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.neighbors[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.neighbors[x].len()
    }

    /// Level at which a gasket vertex first appears (0 for the corners).
    pub fn vertex_level(&self, x: usize) -> Option<usize> {
        self.vertex_level.get(x).copied()
    }

    pub fn parents(&self, x: usize) -> Option<(usize, usize)> {
        self.parents.get(x).copied().flatten()
    }

    pub fn lattice(&self, x: usize) -> [i64; 2] {
        self.lattice[x]
    }

    /// Planar coordinates of a point (the torus1d second coordinate is 0).
    pub fn coords(&self, x: usize) -> [f64; 2] {
        let h = self.spacing();
        let [a, b] = self.lattice[x];
        match self.kind {
            SpaceKind::Torus1d | SpaceKind::Torus2d => [a as f64 * h, b as f64 * h],
            SpaceKind::Gasket => [
                (a as f64 + 0.5 * b as f64) * h,
                0.5 * 3f64.sqrt() * b as f64 * h,
            ],
        }
    }

    pub fn coord_dim(&self) -> usize {
        match self.kind {
            SpaceKind::Torus1d => 1,
            _ => 2,
        }
    }

    #[inline]
    pub fn dist(&self, x: usize, y: usize) -> f64 {
        let [ax, bx] = self.lattice[x];
        let [ay, by] = self.lattice[y];
        let h = self.spacing();
        match self.kind {
            SpaceKind::Torus1d => {
                let side = 1i64 << self.level;
                let k = (ax - ay).rem_euclid(side);
                k.min(side - k) as f64 * h
            }
            SpaceKind::Torus2d => {
                let side = 1i64 << self.level;
                let wrap = |d: i64| {
                    let k = d.rem_euclid(side);
                    k.min(side - k)
                };
                let (dx, dy) = (wrap(ax - ay), wrap(bx - by));
                ((dx * dx + dy * dy) as f64).sqrt() * h
            }
            SpaceKind::Gasket => {
                let (da, db) = (ax - ay, bx - by);
                ((da * da + da * db + db * db) as f64).sqrt() * h
            }
        }
    }

    fn check_index(&self, x: usize) -> Result<()> {
        if x >= self.len() {
            Err(Error::IndexOutOfRange {
                index: x,
                len: self.len(),
            })
        } else {
            Ok(())
        }
    }

    /// `μ(B(x, r))` for the closed ball `dist(x, y) <= r`.
    pub fn ball_measure(&self, x: usize, r: f64) -> Result<f64> {
        self.check_index(x)?;
        if !(r >= 0.0) {
            return Err(invalid(format!("radius must be nonnegative, got {r}")));
        }
        let cut = r * (1.0 + RADIUS_SLACK);
        Ok((0..self.len())
            .filter(|&y| self.dist(x, y) <= cut)
            .map(|y| self.weight[y])
            .sum())
    }

    /// Unordered pairs `x < y` with `2^-(m+1) < dist(x, y) <= 2^-m`.
    pub fn shell_pairs(&self, m: usize) -> Vec<(usize, usize)> {
        if m > self.level {
            return Vec::new();
        }
        let mut out = Vec::new();
        for x in 0..self.len() {
            for y in (x + 1)..self.len() {
                if dyadic_shell(self.dist(x, y)) == m {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// Edges of the level-`m` gasket graph, as unordered index pairs of
    /// vertices of `V_m` at distance `2^-m`.
    pub fn level_edges(&self, m: usize) -> Result<Vec<(usize, usize)>> {
        if self.kind != SpaceKind::Gasket {
            return Err(Error::Unsupported(format!(
                "level edges are defined on the gasket, not {}",
                self.kind
            )));
        }
        if m > self.level {
            return Err(invalid(format!("m = {m} exceeds level {}", self.level)));
        }
        let lookup: HashMap<[i64; 2], usize> = self
            .lattice
            .iter()
            .take(gasket_vertex_count(m))
            .enumerate()
            .map(|(i, p)| (*p, i))
            .collect();
        let side = 1i64 << self.level;
        let mut cells = vec![[0i64, 0, side]];
        for _ in 0..m {
            cells = cells
                .iter()
                .flat_map(|&[a, b, s]| {
                    let h = s / 2;
                    [[a, b, h], [a + h, b, h], [a, b + h, h]]
                })
                .collect();
        }
        let mut edges = Vec::with_capacity(3 * cells.len());
        for [a, b, s] in cells {
            let tri = [lookup[&[a, b]], lookup[&[a + s, b]], lookup[&[a, b + s]]];
            for (u, v) in [(tri[0], tri[1]), (tri[0], tri[2]), (tri[1], tri[2])] {
                edges.push((u.min(v), u.max(v)));
            }
        }
        Ok(edges)
    }

    /// Log-log regression of ball measures against radii over `samples`
    /// seeded draws with `r ∈ [2·2^-level, diam/2]`.
    pub fn ahlfors_fit(&self, samples: usize) -> Result<AhlforsReport> {
        if samples < 10 {
            return Err(invalid(format!(
                "ahlfors_fit needs >= 10 samples, got {samples}"
            )));
        }
        let r_lo = 2.0 * self.spacing();
        let r_hi = 0.5 * self.diam();
        if r_lo >= r_hi {
            return Err(Error::TooFewSamples(format!(
                "radius range [{r_lo}, {r_hi}] is empty at level {}",
                self.level
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0xA41F_0125);
        let (ln_lo, ln_hi) = (r_lo.ln(), r_hi.ln());
        let mut pts = Vec::with_capacity(samples);
        for _ in 0..samples {
            let x = rng.random_range(0..self.len());
            let r = (ln_lo + (ln_hi - ln_lo) * rng.random::<f64>()).exp();
            pts.push((r, self.ball_measure(x, r)?));
        }
        let (slope, _) = least_squares(pts.iter().map(|&(r, m)| (r.ln(), m.ln())));
        let ratios: Vec<f64> = pts.iter().map(|&(r, m)| m / r.powf(slope)).collect();
        let c1 = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let c2 = ratios.iter().copied().fold(0.0, f64::max);
        Ok(AhlforsReport {
            fitted_d: slope,
            c1_hat: c1,
            c2_hat: c2,
            sample_count: samples,
            worst_ratio: c2 / c1,
        })
    }

    pub fn metadata(&self) -> SpaceMetadata {
        SpaceMetadata {
            kind: self.kind,
            level: self.level,
            points: self.len(),
            d: self.hausdorff_dim(),
            diam: self.diam(),
            total_measure: self.total_measure,
        }
    }

    /// CSV with columns `index, x[, y], weight`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if self.coord_dim() == 1 {
            writeln!(w, "index,x,weight")?;
        } else {
            writeln!(w, "index,x,y,weight")?;
        }
        for i in 0..self.len() {
            let c = self.coords(i);
            if self.coord_dim() == 1 {
                writeln!(w, "{i},{},{}", c[0], self.weight[i])?;
            } else {
                writeln!(w, "{i},{},{},{}", c[0], c[1], self.weight[i])?;
            }
        }
        Ok(())
    }
}

/// Ordinary least squares `y = slope·x + intercept`.
pub(crate) fn least_squares(pts: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in pts {
        n += 1.0;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AhlforsReport {
    pub fitted_d: f64,
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub sample_count: usize,
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpaceMetadata {
    pub kind: SpaceKind,
    pub level: usize,
    pub points: usize,
    pub d: f64,
    pub diam: f64,
    pub total_measure: f64,
}

/// A real function sampled on the points of a specific space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    space: SpaceId,
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(space: &DiscreteSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(invalid(format!(
                "function has {} values, space {} has {} points",
                values.len(),
                space.id(),
                space.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "function value at index {i} is not finite"
            )));
        }
        Ok(Self {
            space: space.id(),
            values,
        })
    }

    pub fn from_fn(space: &DiscreteSpace, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new(space, (0..space.len()).map(f).collect())
    }

    pub fn space_id(&self) -> SpaceId {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_space(&self, space: &DiscreteSpace) -> Result<()> {
        if self.space != space.id() || self.values.len() != space.len() {
            return Err(Error::SpaceMismatch {
                found: self.space.to_string(),
                expected: space.id().to_string(),
            });
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            space: self.space,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `‖f‖_{L^p(μ)}`.
    pub fn lp_norm(&self, space: &DiscreteSpace, p: f64) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(space.weights())
            .map(|(v, w)| v.abs().powf(p) * w)
            .sum();
        s.powf(1.0 / p)
    }

    /// Weighted inner product `Σ f g μ`.
    pub fn inner(&self, other: &[f64], space: &DiscreteSpace) -> f64 {
        self.values
            .iter()
            .zip(other)
            .zip(space.weights())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }
}
