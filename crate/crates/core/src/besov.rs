//! Besov-Lipschitz seminorms and heat-kernel functionals.
//!
//! All double integrals run over ordered pairs, so `∬ dμ dμ` is read
//! literally; the diagonal contributes nothing.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bands::{band_nodes, tail_nodes, Node};
use crate::error::{invalid, Error, Result};
use crate::kernel::KernelSet;
use crate::space::{dyadic_shell, DiscreteSpace, GridFn, SpaceKind};

pub const DEFAULT_BANDS_PER_DECADE: usize = 4;
pub const DEFAULT_T_MAX: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub alpha: f64,
    pub p: f64,
    /// `f64::INFINITY` encodes `q = ∞`; serialized as `"inf"`.
    #[serde(with = "q_serde")]
    pub q: f64,
    /// Finest dyadic scale; `None` means `level - 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<usize>,
    #[serde(default = "default_bands")]
    pub bands_per_decade: usize,
    /// Upper end of the tail band used by the `(0, ∞)` functional.
    #[serde(default = "default_t_max")]
    pub t_max: f64,
}

fn default_bands() -> usize {
    DEFAULT_BANDS_PER_DECADE
}

fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}

mod q_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &f64, s: S) -> Result<S::Ok, S::Error> {
        if q.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*q)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "∞") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid q `{t}`"))),
        }
    }
}

impl BesovParams {
    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        let prm = Self {
            alpha,
            p,
            q,
            m_max: None,
            bands_per_decade: DEFAULT_BANDS_PER_DECADE,
            t_max: DEFAULT_T_MAX,
        };
        prm.validate()?;
        Ok(prm)
    }

    pub fn with_m_max(mut self, m_max: usize) -> Self {
        self.m_max = Some(m_max);
        self
    }

    pub fn with_bands(mut self, bands_per_decade: usize) -> Self {
        self.bands_per_decade = bands_per_decade;
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(invalid(format!(
                "p must be finite and >= 1, got {}",
                self.p
            )));
        }
        if !(self.q >= 1.0) {
            return Err(invalid(format!("q must be >= 1 or inf, got {}", self.q)));
        }
        if self.bands_per_decade == 0 {
            return Err(invalid("bands_per_decade must be positive"));
        }
        Ok(())
    }

    pub fn q_is_infinite(&self) -> bool {
        self.q.is_infinite()
    }

    /// Effective finest scale on `space`.
    pub fn m_max_for(&self, space: &DiscreteSpace) -> Result<usize> {
        let m = self.m_max.unwrap_or(space.level().saturating_sub(2));
        if m > space.level() {
            return Err(invalid(format!(
                "m_max = {m} exceeds the space level {}",
                space.level()
            )));
        }
        Ok(m)
    }
}

/// `(Σ a_m^q)^{1/q}`, or `max a_m` for `q = ∞`.
pub fn lq_norm(seq: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        seq.iter().copied().fold(0.0, f64::max)
    } else {
        seq.iter().map(|a| a.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

#[inline]
fn pow_abs(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 2.0 {
        a * a
    } else if p == 1.0 {
        a
    } else {
        a.powf(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeminormMode {
    Jonsson,
    HeatI,
    HeatITilde,
    HeatSup,
    DirichletS,
    Singular,
    Strichartz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormBreakdown {
    pub mode: SeminormMode,
    /// `a_m` per scale, per-band integrals, or per-time values (sup modes).
    pub per_m: Vec<f64>,
    pub total: f64,
}

/// Per-shell sums of `|f(x)-f(y)|^p μ(x)μ(y)` over ordered pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTable {
    pub p: f64,
    /// `shell[m]`: pairs with `2^-(m+1) < ρ <= 2^-m`, for `m = 0..=level`.
    pub shell: Vec<f64>,
    /// Off-diagonal pairs with `ρ > 1` (empty on the built-in spaces).
    pub beyond: f64,
}

impl IncrementTable {
    pub fn new(f: &GridFn, space: &DiscreteSpace, p: f64) -> Result<Self> {
        f.check_space(space)?;
        let v = f.values();
        let w = space.weights();
        let mut shell = vec![0.0; space.level() + 1];
        let mut beyond = 0.0;
        for x in 0..space.len() {
            for y in (x + 1)..space.len() {
                let rho = space.dist(x, y);
                let term = 2.0 * pow_abs(v[x] - v[y], p) * w[x] * w[y];
                if rho > 1.0 {
                    beyond += term;
                } else {
                    let m = dyadic_shell(rho).min(space.level());
                    shell[m] += term;
                }
            }
        }
        Ok(Self { p, shell, beyond })
    }

    /// `i_m = Σ_{ρ <= 2^-m} |f(x)-f(y)|^p dμ dμ`.
    pub fn i_m(&self, m: usize) -> f64 {
        self.shell.iter().skip(m).sum()
    }

    pub fn full(&self) -> f64 {
        self.i_m(0) + self.beyond
    }
}

/// Direct evaluation of `i_m` for a single scale.
pub fn increment_i_m(f: &GridFn, space: &DiscreteSpace, m: usize, p: f64) -> Result<f64> {
    f.check_space(space)?;
    if m > space.level() {
        return Err(invalid(format!("m = {m} exceeds level {}", space.level())));
    }
    let radius = 2f64.powi(-(m as i32));
    let v = f.values();
    let w = space.weights();
    let mut sum = 0.0;
    for x in 0..space.len() {
        for y in (x + 1)..space.len() {
            if space.dist(x, y) <= radius {
                sum += 2.0 * pow_abs(v[x] - v[y], p) * w[x] * w[y];
            }
        }
    }
    Ok(sum)
}

/// `a_m = 2^{mα}(2^{md} i_m)^{1/p}` for `m = 0..=m_max`, aggregated in `ℓ^q`.
pub fn jonsson_from_table(
    table: &IncrementTable,
    d: f64,
    alpha: f64,
    q: f64,
    m_max: usize,
) -> SeminormBreakdown {
    let per_m: Vec<f64> = (0..=m_max)
        .map(|m| {
            let mf = m as f64;
            2f64.powf(mf * alpha) * (2f64.powf(mf * d) * table.i_m(m)).powf(1.0 / table.p)
        })
        .collect();
    let total = lq_norm(&per_m, q);
    SeminormBreakdown {
        mode: SeminormMode::Jonsson,
        per_m,
        total,
    }
}

pub fn jonsson_seminorm(
    f: &GridFn,
    space: &DiscreteSpace,
    prm: &BesovParams,
) -> Result<SeminormBreakdown> {
    prm.validate()?;
    let m_max = prm.m_max_for(space)?;
    let table = IncrementTable::new(f, space, prm.p)?;
    Ok(jonsson_from_table(
        &table,
        space.hausdorff_dim(),
        prm.alpha,
        prm.q,
        m_max,
    ))
}

/// `E(t) = ∬ |f(x)-f(y)|^p p(t,x,y) dμ(x) dμ(y)` at grid time `t_idx`.
pub fn pair_energy(f: &GridFn, ks: &KernelSet, t_idx: usize, p: f64) -> Result<f64> {
    f.check_space(ks.space())?;
    if t_idx >= ks.times().len() {
        return Err(invalid(format!("time index {t_idx} out of range")));
    }
    let v = f.values();
    let w = ks.space().weights();
    let m = ks.density(t_idx);
    let mut total = 0.0;
    for x in 0..v.len() {
        let row = m.row(x);
        let mut acc = 0.0;
        for y in 0..v.len() {
            acc += pow_abs(v[x] - v[y], p) * row[y] * w[y];
        }
        total += acc * w[x];
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatMode {
    /// Integral over `(0, 1]`.
    IUnit,
    /// Integral over `(0, t_max]`.
    ITilde,
    /// `sup_t t^{-pα/d_w} E(t)` over the grid.
    Sup,
}

fn grid_index(ks: &KernelSet, node: &Node) -> Result<usize> {
    ks.find_time(node.t).ok_or_else(|| {
        Error::TimeGrid(format!(
            "kernel grid lacks quadrature time {:.6e}; build it with bands::heat_grid",
            node.t
        ))
    })
}

/// Quadrature of `t^{-αq/d_w} E(t)^{q/p} dt/t` over the given nodes.
fn band_integral(f: &GridFn, ks: &KernelSet, prm: &BesovParams, nodes: &[Node]) -> Result<f64> {
    let dw = ks.walk_dim();
    let mut sum = 0.0;
    for node in nodes {
        let e = pair_energy(f, ks, grid_index(ks, node)?, prm.p)?;
        sum += node.weight * node.t.powf(-prm.alpha * prm.q / dw) * e.powf(prm.q / prm.p);
    }
    Ok(sum)
}

pub fn heat_functional(
    f: &GridFn,
    ks: &KernelSet,
    prm: &BesovParams,
    mode: HeatMode,
) -> Result<SeminormBreakdown> {
    prm.validate()?;
    f.check_space(ks.space())?;
    let dw = ks.walk_dim();
    match mode {
        HeatMode::IUnit | HeatMode::ITilde => {
            if prm.q_is_infinite() {
                return Err(invalid("integral heat functionals need finite q"));
            }
            let m_max = prm.m_max_for(ks.space())?;
            let mut per_m = Vec::with_capacity(m_max + 2);
            for m in 0..=m_max {
                per_m.push(band_integral(
                    f,
                    ks,
                    prm,
                    &band_nodes(dw, m, prm.bands_per_decade),
                )?);
            }
            let tilde = mode == HeatMode::ITilde;
            if tilde {
                let tail = tail_nodes(dw, prm.t_max, prm.bands_per_decade);
                per_m.push(band_integral(f, ks, prm, &tail)?);
            }
            let total = per_m.iter().sum();
            Ok(SeminormBreakdown {
                mode: if tilde {
                    SeminormMode::HeatITilde
                } else {
                    SeminormMode::HeatI
                },
                per_m,
                total,
            })
        }
        HeatMode::Sup => {
            let per_m = ks
                .times()
                .iter()
                .enumerate()
                .map(|(i, &t)| Ok(t.powf(-prm.p * prm.alpha / dw) * pair_energy(f, ks, i, prm.p)?))
                .collect::<Result<Vec<f64>>>()?;
            let total = per_m.iter().copied().fold(0.0, f64::max);
            Ok(SeminormBreakdown {
                mode: SeminormMode::HeatSup,
                per_m,
                total,
            })
        }
    }
}

/// `∫_0^∞ t^{-αq/d_w} E(t)^{q/p} dt/t` from every time of the kernel grid.
///
/// Consecutive grid times are joined by the trapezoid rule in `ln t`. Below
/// the first time `E` is extended as a power law fitted to the two smallest
/// times, above the last time as a constant. `per_m` holds the lower end
/// piece, one entry per grid interval, then the upper end piece.
pub fn heat_integral_extended(
    f: &GridFn,
    ks: &KernelSet,
    alpha: f64,
    p: f64,
    q: f64,
) -> Result<SeminormBreakdown> {
    if !(alpha > 0.0 && p >= 1.0 && q >= 1.0 && q.is_finite()) {
        return Err(invalid(
            "extended heat integral needs alpha > 0, p >= 1, finite q >= 1",
        ));
    }
    let times = ks.times();
    if times.len() < 2 {
        return Err(Error::TimeGrid(
            "extended integral needs at least two times".into(),
        ));
    }
    let s = alpha * q / ks.walk_dim();
    let energy = (0..times.len())
        .map(|i| pair_energy(f, ks, i, p))
        .collect::<Result<Vec<f64>>>()?;
    let g: Vec<f64> = times
        .iter()
        .zip(&energy)
        .map(|(t, e)| t.powf(-s) * e.powf(q / p))
        .collect();

    let (t0, t1) = (times[0], times[1]);
    let low = if energy[0] > 0.0 && energy[1] > 0.0 {
        let gamma = (energy[1] / energy[0]).ln() / (t1 / t0).ln();
        let rate = gamma * q / p - s;
        if rate <= 0.0 {
            return Err(Error::Divergent(format!(
                "energy decays like t^{gamma:.3} at the smallest time; the integral near 0 diverges"
            )));
        }
        g[0] / rate
    } else {
        0.0
    };
    let mut per_m = vec![low];
    for i in 1..times.len() {
        per_m.push(0.5 * (g[i - 1] + g[i]) * (times[i] / times[i - 1]).ln());
    }
    per_m.push(g[times.len() - 1] / s);
    let total = per_m.iter().sum();
    Ok(SeminormBreakdown {
        mode: SeminormMode::HeatITilde,
        per_m,
        total,
    })
}

/// `s(f) = sup_t (1/2t) ∬ (f(x)-f(y))² p(t,x,y) dμ dμ` over the grid.
pub fn dirichlet_s(f: &GridFn, ks: &KernelSet) -> Result<SeminormBreakdown> {
    let per_m = ks
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| Ok(pair_energy(f, ks, i, 2.0)? / (2.0 * t)))
        .collect::<Result<Vec<f64>>>()?;
    let total = per_m.iter().copied().fold(0.0, f64::max);
    Ok(SeminormBreakdown {
        mode: SeminormMode::DirichletS,
        per_m,
        total,
    })
}

/// `∬_{x≠y} |f(x)-f(y)|^p / ρ(x,y)^{d+pα} dμ dμ`.
pub fn singular_seminorm(f: &GridFn, space: &DiscreteSpace, alpha: f64, p: f64) -> Result<f64> {
    f.check_space(space)?;
    if !(p >= 1.0) || !(alpha > 0.0) {
        return Err(invalid("singular seminorm needs p >= 1 and alpha > 0"));
    }
    let expo = space.hausdorff_dim() + p * alpha;
    let v = f.values();
    let w = space.weights();
    let mut sum = 0.0;
    for x in 0..space.len() {
        for y in (x + 1)..space.len() {
            let diff = pow_abs(v[x] - v[y], p);
            if diff != 0.0 {
                sum += 2.0 * diff * w[x] * w[y] / space.dist(x, y).powf(expo);
            }
        }
    }
    Ok(sum)
}

/// Edge-difference seminorm on the gasket graph approximations:
/// `δ_{m,p} = (2^{-md} Σ_{x ~_m y} |f(x)-f(y)|^p)^{1/p}` over unordered
/// level-`m` edges, weighted by `(2^{d_w-d})^{mα}` and aggregated in `ℓ^q`.
pub fn strichartz_seminorm(
    f: &GridFn,
    space: &DiscreteSpace,
    prm: &BesovParams,
) -> Result<SeminormBreakdown> {
    prm.validate()?;
    if space.kind() != SpaceKind::Gasket {
        return Err(Error::Unsupported(format!(
            "the edge-difference seminorm is defined on the gasket, not {}",
            space.kind()
        )));
    }
    f.check_space(space)?;
    let m_max = prm.m_max_for(space)?;
    let d = space.hausdorff_dim();
    let dw = crate::kernel::KernelModel::LazyWalkGasket.walk_dim();
    let v = f.values();
    let mut per_m = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let edges = space.level_edges(m)?;
        let sum: f64 = edges
            .iter()
            .map(|&(x, y)| pow_abs(v[x] - v[y], prm.p))
            .sum();
        let delta = (2f64.powf(-(m as f64) * d) * sum).powf(1.0 / prm.p);
        per_m.push(2f64.powf((dw - d) * m as f64 * prm.alpha) * delta);
    }
    let total = lq_norm(&per_m, prm.q);
    Ok(SeminormBreakdown {
        mode: SeminormMode::Strichartz,
        per_m,
        total,
    })
}

/// Norm-level functionals that can be compared with each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Jonsson,
    HeatI,
    HeatITilde,
    HeatSup,
    DirichletS,
    Singular,
    Strichartz,
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Functional::Jonsson => "jonsson",
            Functional::HeatI => "heat_i",
            Functional::HeatITilde => "heat_i_tilde",
            Functional::HeatSup => "heat_sup",
            Functional::DirichletS => "dirichlet_s",
            Functional::Singular => "singular",
            Functional::Strichartz => "strichartz",
        })
    }
}

impl std::str::FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| invalid(format!("unknown functional `{s}`")))
    }
}

/// 1-homogeneous seminorm value of a functional: the integral functionals
/// are taken to the power `1/q`, the supremum and singular forms to `1/p`,
/// `s(f)` to `1/2`. The edge-difference seminorm is evaluated at exponent
/// `α(d_w - d)`, the value paired with `Lip(α, p, q)`.
pub fn seminorm_value(
    f: &GridFn,
    ks: &KernelSet,
    prm: &BesovParams,
    functional: Functional,
) -> Result<f64> {
    let space = ks.space();
    Ok(match functional {
        Functional::Jonsson => jonsson_seminorm(f, space, prm)?.total,
        Functional::HeatI => heat_functional(f, ks, prm, HeatMode::IUnit)?
            .total
            .powf(1.0 / prm.q),
        Functional::HeatITilde => heat_functional(f, ks, prm, HeatMode::ITilde)?
            .total
            .powf(1.0 / prm.q),
        Functional::HeatSup => heat_functional(f, ks, prm, HeatMode::Sup)?
            .total
            .powf(1.0 / prm.p),
        Functional::DirichletS => dirichlet_s(f, ks)?.total.sqrt(),
        Functional::Singular => singular_seminorm(f, space, prm.alpha, prm.p)?.powf(1.0 / prm.p),
        Functional::Strichartz => {
            let dw = ks.walk_dim();
            let mut sprm = prm.clone();
            sprm.alpha = prm.alpha * (dw - space.hausdorff_dim());
            strichartz_seminorm(f, space, &sprm)?.total
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub lhs_name: String,
    pub rhs_name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub per_level: Vec<LevelRow>,
}

/// `lhs / rhs`, with `0/0 = 1`; a zero `rhs` under a nonzero `lhs` is an error.
pub fn comparison_ratio(lhs: f64, rhs: f64) -> Result<f64> {
    if rhs == 0.0 {
        if lhs == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::DegenerateComparison(format!(
                "rhs vanishes while lhs = {lhs}"
            )))
        }
    } else {
        Ok(lhs / rhs)
    }
}

impl EquivalenceReport {
    pub fn new(
        lhs_name: impl Into<String>,
        rhs_name: impl Into<String>,
        lhs: f64,
        rhs: f64,
    ) -> Result<Self> {
        Ok(Self {
            lhs_name: lhs_name.into(),
            rhs_name: rhs_name.into(),
            lhs,
            rhs,
            ratio: comparison_ratio(lhs, rhs)?,
            per_level: Vec::new(),
        })
    }

    pub fn push_level(&mut self, level: usize, lhs: f64, rhs: f64) -> Result<()> {
        self.per_level.push(LevelRow {
            level,
            lhs,
            rhs,
            ratio: comparison_ratio(lhs, rhs)?,
        });
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,{},{},ratio", self.lhs_name, self.rhs_name)?;
        for r in &self.per_level {
            writeln!(w, "{},{},{},{}", r.level, r.lhs, r.rhs, r.ratio)?;
        }
        Ok(())
    }
}

/// Compares `‖f‖_p + seminorm_lhs` with `‖f‖_p + seminorm_rhs`.
pub fn equivalence_report(
    f: &GridFn,
    ks: &KernelSet,
    prm: &BesovParams,
    lhs: Functional,
    rhs: Functional,
) -> Result<EquivalenceReport> {
    let base = f.lp_norm(ks.space(), prm.p);
    let l = base + seminorm_value(f, ks, prm, lhs)?;
    let r = base + seminorm_value(f, ks, prm, rhs)?;
    let mut report = EquivalenceReport::new(lhs.to_string(), rhs.to_string(), l, r)?;
    report.push_level(ks.space().level(), l, r)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyRow {
    pub alpha: f64,
    pub levels: Vec<usize>,
    pub seminorms: Vec<f64>,
    /// Slope of `log2` seminorm against level.
    pub growth_exponent: f64,
    /// Seminorm ratio between the two finest levels.
    pub top_growth: f64,
    /// Ratio of the finest-scale coefficients `a_{m_max}` of the two finest levels.
    pub top_scale_growth: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub family: String,
    pub kind: SpaceKind,
    pub rows: Vec<DegeneracyRow>,
}

/// Jonsson seminorm of one function family across levels and `α` values.
/// `α` is flagged when the seminorm grows at every refinement step; this is
/// a signal of degeneracy, not a proof of it.
pub fn degeneracy_scan(
    family: &str,
    kind: SpaceKind,
    levels: &[usize],
    alphas: &[f64],
    prm: &BesovParams,
    make_fn: impl Fn(&DiscreteSpace) -> Result<GridFn>,
) -> Result<DegeneracyReport> {
    if levels.len() < 2 {
        return Err(invalid("degeneracy scan needs at least two levels"));
    }
    let mut tables = Vec::with_capacity(levels.len());
    for &level in levels {
        let space = crate::space::build_space(kind, level)?;
        let f = make_fn(&space)?;
        let m_max = prm.m_max_for(&space)?;
        tables.push((
            IncrementTable::new(&f, &space, prm.p)?,
            space.hausdorff_dim(),
            m_max,
        ));
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let breakdowns: Vec<SeminormBreakdown> = tables
            .iter()
            .map(|(t, d, m_max)| jonsson_from_table(t, *d, alpha, prm.q, *m_max))
            .collect();
        let seminorms: Vec<f64> = breakdowns.iter().map(|b| b.total).collect();
        let top: Vec<f64> = breakdowns
            .iter()
            .map(|b| b.per_m.last().copied().unwrap_or(0.0))
            .collect();
        let nonzero = seminorms.iter().all(|&s| s > 0.0);
        let growth_exponent = if nonzero {
            crate::space::least_squares(
                levels
                    .iter()
                    .zip(&seminorms)
                    .map(|(&l, &s)| (l as f64, s.log2())),
            )
            .0
        } else {
            0.0
        };
        let k = seminorms.len();
        let top_growth = if seminorms[k - 2] > 0.0 {
            seminorms[k - 1] / seminorms[k - 2]
        } else {
            1.0
        };
        let top_scale_growth = if top[k - 2] > 0.0 {
            top[k - 1] / top[k - 2]
        } else {
            1.0
        };
        let increasing = seminorms.windows(2).all(|w| w[1] > w[0]);
        rows.push(DegeneracyRow {
            alpha,
            levels: levels.to_vec(),
            seminorms,
            growth_exponent,
            top_growth,
            top_scale_growth,
            flagged: nonzero && growth_exponent > 0.0 && increasing,
        });
    }
    Ok(DegeneracyReport {
        family: family.to_string(),
        kind,
        rows,
    })
}
