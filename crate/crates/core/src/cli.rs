//! Experiment configuration and the command runner behind the binary.
//!
//! Every command writes a JSON summary (`<command>.json`) and one or more
//! CSV tables into the output directory. Files are written to a temporary
//! name and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bands::{heat_grid, log_space};
use crate::besov::{
    degeneracy_scan, dirichlet_s, heat_functional, jonsson_seminorm, seminorm_value,
    singular_seminorm, strichartz_seminorm, BesovParams, Functional, HeatMode, SeminormBreakdown,
};
use crate::error::{Error, Result};
use crate::functions::{load_function, FunctionSpec};
use crate::hardy::{hardy_trials, lemma_sum_bounds, HardyForm, HardyParams};
use crate::kernel::{make_kernel_set, KernelModel, KernelSet};
use crate::space::{build_space, DiscreteSpace, SpaceKind};
use crate::spectral::{
    compute_spectrum_at, hz_seminorm, lip_vs_spectral_report, spectral_coeffs, spectral_seminorm_h,
    HzParams, HzRoute,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status for a completed check whose thresholds were violated.
pub const THRESHOLD_VIOLATION: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SpaceReport,
    KernelCheck,
    Norm,
    Equiv,
    Hardy,
    LemmaSum,
    Degeneracy,
    Spectral,
    Strichartz,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SpaceReport => "space-report",
            Command::KernelCheck => "kernel-check",
            Command::Norm => "norm",
            Command::Equiv => "equiv",
            Command::Hardy => "hardy",
            Command::LemmaSum => "lemma-sum",
            Command::Degeneracy => "degeneracy",
            Command::Spectral => "spectral",
            Command::Strichartz => "strichartz",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceKind,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "grid", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGridConfig {
    /// Union of the quadrature nodes needed by every parameter set.
    Bands,
    List {
        values: Vec<f64>,
    },
    Log {
        lo: f64,
        hi: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// Defaults to the model matching the space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<KernelModel>,
    #[serde(default = "half")]
    pub laziness: f64,
    #[serde(default = "bands_grid")]
    pub times: TimeGridConfig,
}

fn half() -> f64 {
    0.5
}

fn bands_grid() -> TimeGridConfig {
    TimeGridConfig::Bands
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            model: None,
            laziness: 0.5,
            times: TimeGridConfig::Bands,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivConfig {
    #[serde(default = "jonsson")]
    pub lhs: Functional,
    #[serde(default = "heat_i")]
    pub rhs: Functional,
    /// Levels to compare; empty means the configured space level only.
    #[serde(default)]
    pub levels: Vec<usize>,
    /// Largest admissible max/min ratio across functions and levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_band_width: Option<f64>,
}

fn jonsson() -> Functional {
    Functional::Jonsson
}

fn heat_i() -> Functional {
    Functional::HeatI
}

impl Default for EquivConfig {
    fn default() -> Self {
        Self {
            lhs: Functional::Jonsson,
            rhs: Functional::HeatI,
            levels: Vec::new(),
            max_band_width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardyConfig {
    #[serde(default = "hardy_r")]
    pub r: Vec<f64>,
    #[serde(default = "hardy_t")]
    pub t: Vec<f64>,
    /// Defaults to `2^{d_w/(d_w-1)}` for the gasket.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "hardy_lengths")]
    pub lengths: Vec<usize>,
    #[serde(default = "hardy_trials_default")]
    pub trials: usize,
    /// Largest admissible `max_k(M_last)/max_k(M_first)`.
    #[serde(default = "hardy_stability")]
    pub max_stability_ratio: f64,
}

fn hardy_r() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn hardy_t() -> Vec<f64> {
    vec![2.0, 4.0]
}

fn one() -> f64 {
    1.0
}

fn hardy_lengths() -> Vec<usize> {
    vec![500, 1000, 2000]
}

fn hardy_trials_default() -> usize {
    1000
}

fn hardy_stability() -> f64 {
    1.2
}

impl Default for HardyConfig {
    fn default() -> Self {
        Self {
            r: hardy_r(),
            t: hardy_t(),
            kappa: None,
            lambda: 1.0,
            lengths: hardy_lengths(),
            trials: hardy_trials_default(),
            max_stability_ratio: hardy_stability(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSumConfig {
    /// `(C, α, β, γ)` tuples.
    pub tuples: Vec<[f64; 4]>,
    #[serde(default = "lemma_t_min")]
    pub t_min: f64,
    #[serde(default = "one")]
    pub t_max: f64,
    #[serde(default = "lemma_points")]
    pub points: usize,
    #[serde(default = "lemma_width")]
    pub max_band_width: f64,
}

fn lemma_t_min() -> f64 {
    1e-4
}

fn lemma_points() -> usize {
    200
}

fn lemma_width() -> f64 {
    10.0
}

impl Default for LemmaSumConfig {
    fn default() -> Self {
        let d = 3f64.ln() / 2f64.ln();
        let dw = 5f64.ln() / 2f64.ln();
        Self {
            tuples: vec![
                [1.0, d + 1.0, 1.0 / dw, dw / (dw - 1.0)],
                [1.0, 1.0, 1.0, 1.0],
            ],
            t_min: lemma_t_min(),
            t_max: 1.0,
            points: lemma_points(),
            max_band_width: lemma_width(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DegeneracyConfig {
    /// Empty means `level-3 ..= level`.
    #[serde(default)]
    pub levels: Vec<usize>,
    /// Empty means `{0.4, d_w/2 + 0.3}` for the space's walk dimension.
    #[serde(default)]
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    #[serde(default = "one")]
    pub beta: f64,
    /// Grid time whose operator defines the generator; smallest time if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_time: Option<f64>,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            spectrum_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxiomThresholds {
    #[serde(default = "sym_tol")]
    pub symmetry: f64,
    #[serde(default = "stoch_tol")]
    pub stochasticity: f64,
    #[serde(default = "ck_tol")]
    pub chapman: f64,
}

fn sym_tol() -> f64 {
    1e-12
}

fn stoch_tol() -> f64 {
    1e-10
}

fn ck_tol() -> f64 {
    1e-8
}

impl Default for AxiomThresholds {
    fn default() -> Self {
        Self {
            symmetry: sym_tol(),
            stochasticity: stoch_tol(),
            chapman: ck_tol(),
        }
    }
}

/// The whole experiment description. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    #[serde(default)]
    pub params: Vec<BesovParams>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub equiv: EquivConfig,
    #[serde(default)]
    pub hardy: HardyConfig,
    #[serde(default)]
    pub lemma_sum: LemmaSumConfig,
    #[serde(default)]
    pub degeneracy: DegeneracyConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub axioms: AxiomThresholds,
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // serde names the offending field in backticks
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<root>".into());
            config_err(&field, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hex SHA-256 of the compact JSON serialization.
    pub fn digest(&self) -> Result<String> {
        let text = serde_json::to_string(self)?;
        Ok(Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect())
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.space.kind;
        if self.space.level < 1 || self.space.level > kind.max_level() {
            return Err(config_err(
                "space.level",
                format!("must lie in 1..={} for {kind}", kind.max_level()),
            ));
        }
        if let Some(model) = self.kernel.model {
            if !model.compatible(kind) {
                return Err(config_err(
                    "kernel.model",
                    format!("{model} does not apply to {kind}"),
                ));
            }
        }
        if !(self.kernel.laziness > 0.0 && self.kernel.laziness < 1.0) {
            return Err(config_err("kernel.laziness", "must lie in (0, 1)"));
        }
        match &self.kernel.times {
            TimeGridConfig::List { values } if values.is_empty() => {
                return Err(config_err("kernel.times.values", "must not be empty"))
            }
            TimeGridConfig::Log { lo, hi, count } if !(*lo > 0.0 && hi > lo && *count >= 2) => {
                return Err(config_err(
                    "kernel.times",
                    "need 0 < lo < hi and count >= 2",
                ))
            }
            _ => {}
        }
        for (i, prm) in self.params.iter().enumerate() {
            prm.validate()
                .map_err(|e| config_err(&format!("params[{i}]"), e.to_string()))?;
        }
        for (i, spec) in self.functions.iter().enumerate() {
            if let FunctionSpec::GasketHarmonic { .. } = spec {
                if kind != SpaceKind::Gasket {
                    return Err(config_err(
                        &format!("functions[{i}]"),
                        "gasket-harmonic needs a gasket space",
                    ));
                }
            }
        }
        for &l in &self.equiv.levels {
            if l < 1 || l > kind.max_level() {
                return Err(config_err(
                    "equiv.levels",
                    format!("level {l} out of range"),
                ));
            }
        }
        if self.hardy.lengths.is_empty() || self.hardy.r.is_empty() || self.hardy.t.is_empty() {
            return Err(config_err("hardy", "r, t and lengths must be non-empty"));
        }
        if !(self.spectral.beta > 0.0 && self.spectral.beta < 2.0) {
            return Err(config_err("spectral.beta", "must lie in (0, 2)"));
        }
        Ok(())
    }

    fn model(&self) -> KernelModel {
        self.kernel
            .model
            .unwrap_or_else(|| KernelModel::for_space(self.space.kind))
    }

    fn require_functions(&self) -> Result<()> {
        if self.functions.is_empty() {
            return Err(config_err(
                "functions",
                "this command needs at least one function",
            ));
        }
        Ok(())
    }

    fn require_params(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(config_err(
                "params",
                "this command needs at least one parameter set",
            ));
        }
        Ok(())
    }

    fn time_grid(&self, space: &DiscreteSpace) -> Result<Vec<f64>> {
        let mut times = match &self.kernel.times {
            TimeGridConfig::List { values } => values.clone(),
            TimeGridConfig::Log { lo, hi, count } => log_space(*lo, *hi, *count),
            TimeGridConfig::Bands => {
                let dw = self.model().walk_dim();
                let mut all = Vec::new();
                let defaults = [BesovParams::new(0.5, 2.0, 2.0)?];
                let params = if self.params.is_empty() {
                    &defaults[..]
                } else {
                    &self.params[..]
                };
                for prm in params {
                    let m_max = prm.m_max_for(space)?;
                    all.extend(heat_grid(dw, m_max, prm.bands_per_decade, prm.t_max));
                }
                all
            }
        };
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        Ok(times)
    }

    fn kernel_for(&self, space: Arc<DiscreteSpace>) -> Result<KernelSet> {
        let times = self.time_grid(&space)?;
        make_kernel_set(space, self.model(), &times, self.kernel.laziness)
    }
}

/// Collected output of one command.
struct Report {
    command: Command,
    summary: Value,
    tables: Vec<(String, String)>,
    extra: Vec<(String, String)>,
    violated: bool,
}

impl Report {
    fn new(command: Command) -> Self {
        Self {
            command,
            summary: Value::Null,
            tables: Vec::new(),
            extra: Vec::new(),
            violated: false,
        }
    }
}

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs one command and writes its report files. Returns the exit status:
/// 0, or [`THRESHOLD_VIOLATION`] when a check command exceeds a threshold.
pub fn run(cfg: &ExperimentConfig, command: Command) -> Result<u8> {
    cfg.validate()?;
    let report = match command {
        Command::SpaceReport => space_report(cfg)?,
        Command::KernelCheck => kernel_check(cfg)?,
        Command::Norm => norm(cfg)?,
        Command::Equiv => equiv(cfg)?,
        Command::Hardy => hardy(cfg)?,
        Command::LemmaSum => lemma_sum(cfg)?,
        Command::Degeneracy => degeneracy(cfg)?,
        Command::Spectral => spectral(cfg)?,
        Command::Strichartz => strichartz(cfg)?,
    };

    let dir = &cfg.outputs.dir;
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (name, body) in report.tables.iter().chain(&report.extra) {
        write_atomic(&dir.join(name), body.as_bytes())?;
        files.push(name.clone());
    }
    let envelope = json!({
        "command": report.command.name(),
        "version": VERSION,
        "config_digest": cfg.digest()?,
        "seed": cfg.seed,
        "space": { "kind": cfg.space.kind, "level": cfg.space.level },
        "status": if report.violated { "threshold_violation" } else { "ok" },
        "summary": report.summary,
        "files": files,
    });
    let name = format!("{}.json", report.command.name());
    write_atomic(
        &dir.join(name),
        serde_json::to_string_pretty(&envelope)?.as_bytes(),
    )?;
    Ok(if report.violated {
        THRESHOLD_VIOLATION
    } else {
        0
    })
}

fn build(cfg: &ExperimentConfig) -> Result<Arc<DiscreteSpace>> {
    Ok(Arc::new(build_space(cfg.space.kind, cfg.space.level)?))
}

fn q_text(q: f64) -> String {
    if q.is_infinite() {
        "inf".into()
    } else {
        q.to_string()
    }
}

fn space_report(cfg: &ExperimentConfig) -> Result<Report> {
    let space = build(cfg)?;
    let mut report = Report::new(Command::SpaceReport);
    let ahlfors = space.ahlfors_fit(400).ok();
    report.summary = json!({ "metadata": space.metadata(), "ahlfors": ahlfors });
    let mut points = Vec::new();
    space.write_csv(&mut points)?;
    report.tables.push((
        "points.csv".into(),
        String::from_utf8_lossy(&points).into_owned(),
    ));
    Ok(report)
}

fn kernel_check(cfg: &ExperimentConfig) -> Result<Report> {
    let space = build(cfg)?;
    let mut times = cfg.time_grid(&space)?;
    // The Chapman–Kolmogorov check needs s + t on the grid.
    let extra = times[0] + times[times.len().min(2) - 1];
    if !times.iter().any(|&t| (t - extra).abs() <= 1e-12 * extra) {
        times.push(extra);
        times.sort_by(f64::total_cmp);
    }
    let ks = make_kernel_set(space, cfg.model(), &times, cfg.kernel.laziness)?;
    let s_idx = 0;
    let t_idx = ks
        .find_time(times[times.len().min(3) - 2].max(times[0]))
        .unwrap_or(0);
    let (s_idx, t_idx) = if ks
        .find_time(ks.times()[s_idx] + ks.times()[t_idx])
        .is_some()
    {
        (s_idx, t_idx)
    } else {
        (0, 0)
    };
    let axioms = ks.check_axioms(s_idx, t_idx)?;
    let fit = ks.fit_subgaussian_bounds().ok();
    let th = &cfg.axioms;
    let mut report = Report::new(Command::KernelCheck);
    report.violated = axioms.symmetry_err > th.symmetry
        || axioms.stochasticity_err > th.stochasticity
        || axioms.chapman_err > th.chapman;
    report.summary = json!({
        "axioms": axioms,
        "thresholds": th,
        "subgaussian_fit": fit,
        "positive_from": ks.positive_from(),
        "times": ks.times().len(),
    });
    let mut csv = String::from("metric,value,threshold\n");
    writeln!(csv, "symmetry_err,{},{}", axioms.symmetry_err, th.symmetry).ok();
    writeln!(
        csv,
        "stochasticity_err,{},{}",
        axioms.stochasticity_err, th.stochasticity
    )
    .ok();
    writeln!(csv, "chapman_err,{},{}", axioms.chapman_err, th.chapman).ok();
    writeln!(csv, "positivity_min,{},", axioms.positivity_min).ok();
    writeln!(csv, "continuity_err,{},", axioms.continuity_err).ok();
    report.tables.push(("axioms.csv".into(), csv));
    Ok(report)
}

fn breakdowns(
    f: &crate::space::GridFn,
    ks: &KernelSet,
    prm: &BesovParams,
) -> Result<Vec<(&'static str, SeminormBreakdown)>> {
    let space = ks.space();
    let mut out = vec![("jonsson", jonsson_seminorm(f, space, prm)?)];
    if !prm.q_is_infinite() {
        out.push(("heat_i", heat_functional(f, ks, prm, HeatMode::IUnit)?));
        if ks.find_time(1.0).is_none() && prm.t_max > 1.0 {
            out.push((
                "heat_i_tilde",
                heat_functional(f, ks, prm, HeatMode::ITilde)?,
            ));
        }
    }
    out.push(("heat_sup", heat_functional(f, ks, prm, HeatMode::Sup)?));
    out.push(("dirichlet_s", dirichlet_s(f, ks)?));
    let singular = singular_seminorm(f, space, prm.alpha, prm.p)?;
    out.push((
        "singular",
        SeminormBreakdown {
            mode: crate::besov::SeminormMode::Singular,
            per_m: vec![singular],
            total: singular,
        },
    ));
    if space.kind() == SpaceKind::Gasket {
        out.push(("strichartz", strichartz_seminorm(f, space, prm)?));
    }
    Ok(out)
}

fn norm(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.require_functions()?;
    cfg.require_params()?;
    let space = build(cfg)?;
    let ks = cfg.kernel_for(space.clone())?;
    let mut totals = String::from("function,alpha,p,q,mode,total\n");
    let mut parts = String::from("function,alpha,p,q,mode,index,value\n");
    let mut rows = Vec::new();
    for spec in &cfg.functions {
        let f = load_function(&space, spec)?;
        for prm in &cfg.params {
            for (mode, b) in breakdowns(&f, &ks, prm)? {
                let key = format!("{},{},{},{}", spec.label(), prm.alpha, prm.p, q_text(prm.q));
                writeln!(
                    totals,
                    "\"{}\",{},{},{},{mode},{}",
                    spec.label(),
                    prm.alpha,
                    prm.p,
                    q_text(prm.q),
                    b.total
                )
                .ok();
                for (i, v) in b.per_m.iter().enumerate() {
                    writeln!(
                        parts,
                        "\"{}\",{},{},{},{mode},{i},{v}",
                        spec.label(),
                        prm.alpha,
                        prm.p,
                        q_text(prm.q)
                    )
                    .ok();
                }
                rows.push(json!({ "key": key, "mode": mode, "total": b.total }));
            }
        }
    }
    let mut report = Report::new(Command::Norm);
    report.summary = json!({ "rows": rows });
    report.tables.push(("norm.csv".into(), totals));
    report.tables.push(("norm_breakdown.csv".into(), parts));
    Ok(report)
}

fn equiv(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.require_functions()?;
    cfg.require_params()?;
    let levels = if cfg.equiv.levels.is_empty() {
        vec![cfg.space.level]
    } else {
        cfg.equiv.levels.clone()
    };
    let (lhs, rhs) = (cfg.equiv.lhs, cfg.equiv.rhs);
    let mut csv = String::from("function,alpha,p,q,level,lhs_mode,rhs_mode,lhs,rhs,ratio\n");
    let mut widths = Vec::new();
    let mut violated = false;
    for prm in &cfg.params {
        let (lhs, rhs) = (effective(lhs, prm), effective(rhs, prm));
        let mut ratios = Vec::new();
        for &level in &levels {
            let space = Arc::new(build_space(cfg.space.kind, level)?);
            let ks = cfg.kernel_for(space.clone())?;
            for spec in &cfg.functions {
                let f = load_function(&space, spec)?;
                let base = f.lp_norm(&space, prm.p);
                let l = base + seminorm_value(&f, &ks, prm, lhs)?;
                let r = base + seminorm_value(&f, &ks, prm, rhs)?;
                let ratio = crate::besov::comparison_ratio(l, r)?;
                ratios.push(ratio);
                writeln!(
                    csv,
                    "\"{}\",{},{},{},{level},{lhs},{rhs},{l},{r},{ratio}",
                    spec.label(),
                    prm.alpha,
                    prm.p,
                    q_text(prm.q)
                )
                .ok();
            }
        }
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        let width = hi / lo;
        if let Some(limit) = cfg.equiv.max_band_width {
            violated |= width > limit;
        }
        widths.push(json!({
            "alpha": prm.alpha, "p": prm.p, "q": q_text(prm.q), "lhs": lhs, "rhs": rhs,
            "min_ratio": lo, "max_ratio": hi, "band_width": width,
        }));
    }
    let mut report = Report::new(Command::Equiv);
    report.violated = violated;
    report.summary = json!({
        "lhs": cfg.equiv.lhs, "rhs": cfg.equiv.rhs, "levels": levels, "bands": widths,
    });
    report.tables.push(("equiv.csv".into(), csv));
    Ok(report)
}

/// Integral heat functionals have no q = inf form; the sup functional stands in.
fn effective(functional: Functional, prm: &BesovParams) -> Functional {
    match functional {
        Functional::HeatI | Functional::HeatITilde if prm.q.is_infinite() => Functional::HeatSup,
        other => other,
    }
}

fn hardy(cfg: &ExperimentConfig) -> Result<Report> {
    let h = &cfg.hardy;
    let dw = 5f64.ln() / 2f64.ln();
    let kappa = h.kappa.unwrap_or_else(|| 2f64.powf(dw / (dw - 1.0)));
    let mut csv = String::from("form,r,t,M,max_k\n");
    let mut jsonl = String::new();
    let mut points = Vec::new();
    let mut violated = false;
    for form in [HardyForm::Classical, HardyForm::Modified] {
        for &r in &h.r {
            for &t in &h.t {
                let mut maxima = Vec::new();
                for &len in &h.lengths {
                    let prm = HardyParams::new(r, t, kappa, h.lambda, len)?;
                    let summary = hardy_trials(form, &prm, h.trials, cfg.seed)?;
                    let mut buf = Vec::new();
                    summary.write_jsonl(&mut buf)?;
                    jsonl.push_str(&String::from_utf8_lossy(&buf));
                    writeln!(csv, "{},{r},{t},{len},{}", form_name(form), summary.max_k).ok();
                    maxima.push(summary.max_k);
                }
                let ratio = maxima[maxima.len() - 1] / maxima[0];
                let ok = maxima.iter().all(|k| k.is_finite()) && ratio < h.max_stability_ratio;
                violated |= !ok;
                points.push(json!({
                    "form": form, "r": r, "t": t, "max_k": maxima, "stability_ratio": ratio,
                }));
            }
        }
    }
    let mut report = Report::new(Command::Hardy);
    report.violated = violated;
    report.summary = json!({ "kappa": kappa, "lambda": h.lambda, "points": points });
    report.tables.push(("hardy.csv".into(), csv));
    report.extra.push(("hardy_trials.jsonl".into(), jsonl));
    Ok(report)
}

fn form_name(form: HardyForm) -> &'static str {
    match form {
        HardyForm::Classical => "classical",
        HardyForm::Modified => "modified",
    }
}

fn lemma_sum(cfg: &ExperimentConfig) -> Result<Report> {
    let l = &cfg.lemma_sum;
    let grid = log_space(l.t_min, l.t_max, l.points);
    let mut csv = String::from("tuple,t,s,ratio\n");
    let mut tuples = Vec::new();
    let mut violated = false;
    for (i, &[c, a, b, g]) in l.tuples.iter().enumerate() {
        let table = lemma_sum_bounds(c, a, b, g, &grid)?;
        for row in &table.rows {
            writeln!(csv, "{i},{},{},{}", row.t, row.s, row.ratio).ok();
        }
        violated |= table.band_width() >= l.max_band_width;
        tuples.push(json!({
            "c": c, "alpha": a, "beta": b, "gamma": g,
            "k1_hat": table.k1_hat, "k2_hat": table.k2_hat, "band_width": table.band_width(),
        }));
    }
    let mut report = Report::new(Command::LemmaSum);
    report.violated = violated;
    report.summary = json!({ "tuples": tuples });
    report.tables.push(("lemma_sum.csv".into(), csv));
    Ok(report)
}

fn degeneracy(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.require_functions()?;
    let prm = cfg
        .params
        .first()
        .cloned()
        .unwrap_or(BesovParams::new(0.5, 2.0, 2.0)?);
    let level = cfg.space.level;
    let levels = if cfg.degeneracy.levels.is_empty() {
        (level
            .saturating_sub(3)
            .max(prm.m_max.unwrap_or(0) + 2)
            .max(2)..=level)
            .collect()
    } else {
        cfg.degeneracy.levels.clone()
    };
    let dw = cfg.model().walk_dim();
    let alphas = if cfg.degeneracy.alphas.is_empty() {
        vec![0.4, dw / 2.0 + 0.3]
    } else {
        cfg.degeneracy.alphas.clone()
    };
    let mut csv = String::from("function,alpha,level,seminorm\n");
    let mut rows = Vec::new();
    for spec in &cfg.functions {
        let rep = degeneracy_scan(spec.family(), cfg.space.kind, &levels, &alphas, &prm, |s| {
            load_function(s, spec)
        })?;
        for row in &rep.rows {
            for (l, s) in row.levels.iter().zip(&row.seminorms) {
                writeln!(csv, "\"{}\",{},{l},{s}", spec.label(), row.alpha).ok();
            }
            rows.push(json!({
                "function": spec.label(), "alpha": row.alpha,
                "growth_exponent": row.growth_exponent, "top_growth": row.top_growth,
                "top_scale_growth": row.top_scale_growth, "flagged": row.flagged,
            }));
        }
    }
    let mut report = Report::new(Command::Degeneracy);
    report.summary = json!({ "levels": levels, "alphas": alphas, "rows": rows });
    report.tables.push(("degeneracy.csv".into(), csv));
    Ok(report)
}

fn spectral(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.require_functions()?;
    let space = build(cfg)?;
    let ks = cfg.kernel_for(space.clone())?;
    let t_idx = match cfg.spectral.spectrum_time {
        Some(t) => ks
            .find_time(t)
            .ok_or_else(|| config_err("spectral.spectrum_time", "not on the kernel time grid"))?,
        None => 0,
    };
    let sp = compute_spectrum_at(&ks, t_idx)?;
    let beta = cfg.spectral.beta;
    let mut lambdas = Vec::new();
    sp.write_csv(&mut lambdas)?;
    let mut csv = String::from(
        "function,h_seminorm,hz_seminorm,lip_heat,spectral_rhs,ratio,parseval_residual\n",
    );
    let mut rows = Vec::new();
    for spec in &cfg.functions {
        let f = load_function(&space, spec)?;
        let h = spectral_seminorm_h(&f, &sp, beta)?;
        let hz = hz_seminorm(&f, &sp, &HzParams::new(beta, 2.0, 2.0), HzRoute::Spectral)?;
        let parseval = spectral_coeffs(&f, &sp)?.parseval_residual;
        // A rough function can make the heat integral diverge at small times.
        let (cmp, cols) = match lip_vs_spectral_report(&f, &ks, &sp, beta) {
            Ok(c) => {
                let cols = format!("{},{},{}", c.lhs, c.rhs, c.ratio);
                (json!(c), cols)
            }
            Err(Error::Divergent(msg)) => (json!({ "divergent": msg }), ",,".to_string()),
            Err(e) => return Err(e),
        };
        writeln!(
            csv,
            "\"{}\",{h},{},{cols},{parseval}",
            spec.label(),
            hz.value
        )
        .ok();
        rows.push(json!({
            "function": spec.label(), "h_seminorm": h, "hz_seminorm": hz.value,
            "lip_vs_spectral": cmp,
        }));
    }
    let mut report = Report::new(Command::Spectral);
    report.summary = json!({
        "beta": beta, "generator_scale": sp.generator_scale, "modes": sp.len(), "rows": rows,
    });
    report.tables.push(("spectral.csv".into(), csv));
    report.tables.push((
        "eigenvalues.csv".into(),
        String::from_utf8_lossy(&lambdas).into_owned(),
    ));
    Ok(report)
}

fn strichartz(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.require_functions()?;
    cfg.require_params()?;
    if cfg.space.kind != SpaceKind::Gasket {
        return Err(Error::Unsupported(format!(
            "strichartz needs the gasket, not {}",
            cfg.space.kind
        )));
    }
    let space = build(cfg)?;
    let dw = cfg.model().walk_dim();
    let d = space.hausdorff_dim();
    let mut csv = String::from("function,alpha,p,q,m,delta_weighted\n");
    let mut summary_csv = String::from("function,alpha,p,q,strichartz,jonsson,ratio\n");
    let mut rows = Vec::new();
    for spec in &cfg.functions {
        let f = load_function(&space, spec)?;
        for prm in &cfg.params {
            let mut sprm = prm.clone();
            sprm.alpha = prm.alpha * (dw - d);
            let s = strichartz_seminorm(&f, &space, &sprm)?;
            let j = jonsson_seminorm(&f, &space, prm)?;
            let base = f.lp_norm(&space, prm.p);
            let ratio = crate::besov::comparison_ratio(base + s.total, base + j.total)?;
            for (m, v) in s.per_m.iter().enumerate() {
                writeln!(
                    csv,
                    "\"{}\",{},{},{},{m},{v}",
                    spec.label(),
                    prm.alpha,
                    prm.p,
                    q_text(prm.q)
                )
                .ok();
            }
            writeln!(
                summary_csv,
                "\"{}\",{},{},{},{},{},{ratio}",
                spec.label(),
                prm.alpha,
                prm.p,
                q_text(prm.q),
                s.total,
                j.total
            )
            .ok();
            rows.push(json!({
                "function": spec.label(), "alpha": prm.alpha, "strichartz": s.total,
                "jonsson": j.total, "ratio": ratio,
            }));
        }
    }
    let mut report = Report::new(Command::Strichartz);
    report.summary = json!({ "rows": rows });
    report.tables.push(("strichartz.csv".into(), summary_csv));
    report.tables.push(("strichartz_levels.csv".into(), csv));
    Ok(report)
}
