//! Discrete Hardy-type inequalities, the discrete Hölder inequality, the
//! two-sided exponential-sum bound, and the constant `C_β`.
//!
//! The weights `t^m` overflow `f64` long before `m = 2000`, so both sides of
//! the Hardy inequalities are accumulated in log space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

/// Exponents `λκ^j` beyond this make `e^{-λκ^j}` vanish in double precision.
const EXP_CUTOFF: f64 = 800.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyParams {
    pub r: f64,
    pub t: f64,
    pub kappa: f64,
    pub lambda: f64,
    /// Truncation length `M`.
    #[serde(rename = "M")]
    pub len: usize,
}

impl HardyParams {
    pub fn new(r: f64, t: f64, kappa: f64, lambda: f64, len: usize) -> Result<Self> {
        let prm = Self {
            r,
            t,
            kappa,
            lambda,
            len,
        };
        prm.validate()?;
        Ok(prm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(invalid(format!("r must be positive, got {}", self.r)));
        }
        if !(self.t > 1.0 && self.t.is_finite()) {
            return Err(invalid(format!("t must exceed 1, got {}", self.t)));
        }
        if !(self.kappa > 1.0 && self.kappa.is_finite()) {
            return Err(invalid(format!("kappa must exceed 1, got {}", self.kappa)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.len < 4 {
            return Err(invalid(format!("M must be at least 4, got {}", self.len)));
        }
        Ok(())
    }
}

/// Both sides of a Hardy-type inequality. `lhs` and `rhs_raw` are stored
/// divided by `exp(log_scale)`; their ratio is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs_raw: f64,
    pub k_required: f64,
    pub log_scale: f64,
    pub sequence_digest: String,
}

impl InequalityCheck {
    fn from_logs(log_lhs: f64, log_rhs: f64, x: &[f64]) -> Self {
        let log_scale = log_rhs;
        Self {
            lhs: (log_lhs - log_scale).exp(),
            rhs_raw: 1.0,
            k_required: (log_lhs - log_rhs).exp(),
            log_scale,
            sequence_digest: sequence_digest(x),
        }
    }

    pub fn log_lhs(&self) -> f64 {
        self.lhs.ln() + self.log_scale
    }

    pub fn log_rhs(&self) -> f64 {
        self.rhs_raw.ln() + self.log_scale
    }
}

/// Hex SHA-256 of the little-endian bytes of the sequence.
pub fn sequence_digest(x: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in x {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// `ln Σ exp(a_i)`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|a| (a - max).exp()).sum::<f64>().ln()
}

fn check_positive(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(invalid("sequence is empty"));
    }
    if let Some((i, v)) = x
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(invalid(format!(
            "entry {i} = {v} is not positive and finite"
        )));
    }
    Ok(())
}

fn log_rhs(x: &[f64], r: f64, ln_t: f64) -> f64 {
    let terms: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(m, v)| m as f64 * ln_t + r * v.ln())
        .collect();
    log_sum_exp(&terms)
}

/// `Σ_m t^m (Σ_{k≥m} x_k)^r` against `Σ_m t^m x_m^r` over the given range.
pub fn classical_hardy(x: &[f64], r: f64, t: f64) -> Result<InequalityCheck> {
    check_positive(x)?;
    if !(r > 0.0) || !(t > 1.0) {
        return Err(invalid("classical Hardy needs r > 0 and t > 1"));
    }
    let ln_t = t.ln();
    let mut tail = 0.0;
    let mut lhs_terms = vec![0.0; x.len()];
    for m in (0..x.len()).rev() {
        tail += x[m];
        lhs_terms[m] = m as f64 * ln_t + r * tail.ln();
    }
    Ok(InequalityCheck::from_logs(
        log_sum_exp(&lhs_terms),
        log_rhs(x, r, ln_t),
        x,
    ))
}

/// Largest `j` with `λκ^j` below the underflow cutoff.
fn window(prm: &HardyParams) -> usize {
    let mut j = 0usize;
    while prm.lambda * prm.kappa.powi(j as i32 + 1) <= EXP_CUTOFF {
        j += 1;
    }
    j
}

fn modified_inner<'a>(
    x: &'a [f64],
    prm: &'a HardyParams,
    m: usize,
    reach: usize,
) -> impl Iterator<Item = f64> + 'a {
    let lo = m.div_ceil(2).max(m.saturating_sub(reach));
    (lo..=m).map(move |k| x[k] * (-prm.lambda * prm.kappa.powi((m - k) as i32)).exp())
}

/// `Σ_m t^m (Σ_{k=⌈m/2⌉}^m x_k e^{-λκ^{m-k}})^r` against `Σ_m t^m x_m^r`,
/// for `m < M`.
pub fn modified_hardy(x: &[f64], prm: &HardyParams) -> Result<InequalityCheck> {
    prm.validate()?;
    if x.len() < prm.len {
        return Err(invalid(format!(
            "sequence has {} entries, M = {}",
            x.len(),
            prm.len
        )));
    }
    let x = &x[..prm.len];
    check_positive(x)?;
    let ln_t = prm.t.ln();
    let reach = window(prm);
    let lhs_terms: Vec<f64> = (0..x.len())
        .map(|m| {
            let inner: f64 = modified_inner(x, prm, m, reach).sum();
            m as f64 * ln_t + prm.r * inner.ln()
        })
        .collect();
    Ok(InequalityCheck::from_logs(
        log_sum_exp(&lhs_terms),
        log_rhs(x, prm.r, ln_t),
        x,
    ))
}

/// Logs of the modified left side computed directly and through the split
/// `(Σ y)^r ≤ Σ y^r`; for `r ≤ 1` the first never exceeds the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubadditiveComparison {
    pub log_direct: f64,
    pub log_split: f64,
}

pub fn subadditive_comparison(x: &[f64], prm: &HardyParams) -> Result<SubadditiveComparison> {
    let direct = modified_hardy(x, prm)?;
    let x = &x[..prm.len];
    let ln_t = prm.t.ln();
    let reach = window(prm);
    let split: Vec<f64> = (0..x.len())
        .map(|m| {
            let inner: f64 = modified_inner(x, prm, m, reach)
                .map(|y| y.powf(prm.r))
                .sum();
            m as f64 * ln_t + inner.ln()
        })
        .collect();
    Ok(SubadditiveComparison {
        log_direct: direct.log_lhs(),
        log_split: log_sum_exp(&split),
    })
}

/// `Σ_{j≥0} t^j e^{-λ r κ^j}`, the constant bounding the modified
/// inequality for `r ≤ 1` once `r` is replaced by `min(r, 1)`.
pub fn case1_majorant(t: f64, r: f64, kappa: f64, lambda: f64) -> Result<f64> {
    if !(t > 1.0 && r > 0.0 && kappa > 1.0 && lambda > 0.0) {
        return Err(invalid(
            "majorant needs t > 1, r > 0, kappa > 1, lambda > 0",
        ));
    }
    let mut sum = 0.0;
    for j in 0..10_000 {
        let e = lambda * r * kappa.powi(j);
        let log_term = j as f64 * t.ln() - e;
        if log_term < -EXP_CUTOFF {
            return Ok(sum);
        }
        sum += log_term.exp();
    }
    Err(Error::Divergent(
        "majorant series failed to converge".into(),
    ))
}

/// `(Σ A^p τ^m)^{1/p} (Σ B^q τ^m)^{1/q} - Σ A B τ^m` with `1/p + 1/q = 1`.
pub fn discrete_holder_check(a: &[f64], b: &[f64], tau: f64, p: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid(format!(
            "sequence lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if !(p > 1.0 && p.is_finite()) || !(tau > 0.0) {
        return Err(invalid("Hölder check needs p > 1 and tau > 0"));
    }
    if a.iter().chain(b).any(|v| !(*v >= 0.0)) {
        return Err(invalid("Hölder check needs nonnegative sequences"));
    }
    let q = p / (p - 1.0);
    let (mut lhs, mut sa, mut sb) = (0.0, 0.0, 0.0);
    for (m, (&x, &y)) in a.iter().zip(b).enumerate() {
        let w = tau.powi(m as i32);
        lhs += x * y * w;
        sa += x.powf(p) * w;
        sb += y.powf(q) * w;
    }
    Ok(sa.powf(1.0 / p) * sb.powf(1.0 / q) - lhs)
}

/// `S(t) = Σ_{m≥0} 2^{-mα} exp(-(C / (2^m t^β))^γ)`, stopped once the
/// terms are past their peak and below `1e-18` of the partial sum.
pub fn lemma_sum(c: f64, alpha: f64, beta: f64, gamma: f64, t: f64) -> f64 {
    let mut sum = 0.0;
    for m in 0..100_000 {
        let x = c / (2f64.powi(m) * t.powf(beta));
        let term = 2f64.powf(-(m as f64) * alpha) * (-x.powf(gamma)).exp();
        sum += term;
        if x < 1.0 && term < 1e-18 * sum {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub t: f64,
    pub s: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSumTable {
    pub rows: Vec<LemmaRow>,
    pub k1_hat: f64,
    pub k2_hat: f64,
}

impl LemmaSumTable {
    pub fn band_width(&self) -> f64 {
        self.k2_hat / self.k1_hat
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,s,ratio")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.t, r.s, r.ratio)?;
        }
        Ok(())
    }
}

/// Tabulates `S(t)` and `S(t)/t^{αβ}` on `t_grid ⊂ (0, 1]`.
pub fn lemma_sum_bounds(
    c: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    t_grid: &[f64],
) -> Result<LemmaSumTable> {
    if !(c > 0.0 && alpha > 0.0 && beta > 0.0 && gamma > 0.0) {
        return Err(invalid("lemma sum parameters must be positive"));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(invalid("t grid must be a nonempty subset of (0, 1]"));
    }
    let rows: Vec<LemmaRow> = t_grid
        .iter()
        .map(|&t| {
            let s = lemma_sum(c, alpha, beta, gamma, t);
            LemmaRow {
                t,
                s,
                ratio: s / t.powf(alpha * beta),
            }
        })
        .collect();
    let k1_hat = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let k2_hat = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(LemmaSumTable {
        rows,
        k1_hat,
        k2_hat,
    })
}

/// `C_β = ∫_0^∞ (1 - e^{-s}) s^{-1-β/2} ds` for `0 < β < 2`.
///
/// The integral is split at `s = 1`; each half is mapped onto `[0, 1]` by a
/// power substitution that removes the endpoint singularity.
pub fn c_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::Divergent(format!(
            "C_beta diverges for beta = {beta}; need 0 < beta < 2"
        )));
    }
    let tol = 1e-13;
    // s = u^a
    let a = 2.0 / (2.0 - beta);
    let near = quadrature::integrate(
        |u: f64| {
            if u <= 0.0 {
                return a;
            }
            let s = u.powf(a);
            a * (-(-s).exp_m1()) * u.powf(-a * beta / 2.0 - 1.0)
        },
        0.0,
        1.0,
        tol,
    );
    // s = w^{-b}
    let b = 2.0 / beta;
    let far = quadrature::integrate(
        |w: f64| {
            if w <= 0.0 {
                return b;
            }
            b * (-(-w.powf(-b)).exp_m1())
        },
        0.0,
        1.0,
        tol,
    );
    Ok(near.integral + far.integral)
}

/// Log-uniform magnitudes on `[1e-6, 1e6]`.
pub fn random_sequence(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = 1e-6f64.ln();
    let hi = 1e6f64.ln();
    (0..len).map(|_| rng.random_range(lo..hi).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardyForm {
    Classical,
    Modified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub form: HardyForm,
    pub trial: usize,
    pub seed: u64,
    pub params: HardyParams,
    pub digest: String,
    pub k_required: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub form: HardyForm,
    pub params: HardyParams,
    pub trials: usize,
    pub max_k: f64,
    pub records: Vec<TrialRecord>,
}

impl TrialSummary {
    /// One JSON object per line.
    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Runs `trials` random sequences of length `M`; trial `i` uses seed
/// `seed + i`, so shorter and longer runs share prefixes.
pub fn hardy_trials(
    form: HardyForm,
    prm: &HardyParams,
    trials: usize,
    seed: u64,
) -> Result<TrialSummary> {
    prm.validate()?;
    let mut records = Vec::with_capacity(trials);
    for trial in 0..trials {
        let s = seed.wrapping_add(trial as u64);
        let x = random_sequence(prm.len, s);
        let check = match form {
            HardyForm::Classical => classical_hardy(&x, prm.r, prm.t)?,
            HardyForm::Modified => modified_hardy(&x, prm)?,
        };
        if !check.k_required.is_finite() {
            return Err(Error::Divergent(format!(
                "k_required not finite in trial {trial}"
            )));
        }
        records.push(TrialRecord {
            form,
            trial,
            seed: s,
            params: *prm,
            digest: check.sequence_digest,
            k_required: check.k_required,
        });
    }
    let max_k = records.iter().map(|r| r.k_required).fold(0.0, f64::max);
    Ok(TrialSummary {
        form,
        params: *prm,
        trials,
        max_k,
        records,
    })
}
