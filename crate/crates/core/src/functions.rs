//! Built-in test functions and CSV loading.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::space::{DiscreteSpace, GridFn, SpaceKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FunctionSpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// First planar coordinate; a sawtooth on the tori.
    Linear {
        #[serde(default = "one")]
        slope: f64,
    },
    /// `sin(2πk x₀)`.
    FourierMode {
        #[serde(default = "one_i")]
        k: i64,
    },
    /// Indicator of the closed cell with the given address at `cell_level`.
    /// Addresses are read in base 2 (torus1d), 4 (torus2d) or 3 (gasket).
    CellIndicator {
        #[serde(default = "one_u")]
        cell_level: usize,
        #[serde(default)]
        index: usize,
    },
    /// Harmonic extension of corner values on the gasket.
    GasketHarmonic {
        #[serde(default = "default_boundary")]
        boundary: [f64; 3],
    },
    /// Midpoint displacement with level-`j` amplitude `2^{-jh}`.
    RandomHoelder { h: f64, seed: u64 },
    /// Values from a CSV file of `index,value` rows.
    Csv { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

fn one_i() -> i64 {
    1
}

fn one_u() -> usize {
    1
}

fn default_boundary() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

impl FunctionSpec {
    /// Family with default parameters (`random-hoelder` uses `h = 0.5`, seed 0).
    pub fn from_family(name: &str) -> Result<Self> {
        Ok(match name {
            "constant" => FunctionSpec::Constant { value: 1.0 },
            "linear" => FunctionSpec::Linear { slope: 1.0 },
            "fourier-mode" => FunctionSpec::FourierMode { k: 1 },
            "cell-indicator" => FunctionSpec::CellIndicator {
                cell_level: 1,
                index: 0,
            },
            "gasket-harmonic" => FunctionSpec::GasketHarmonic {
                boundary: default_boundary(),
            },
            "random-hoelder" => FunctionSpec::RandomHoelder { h: 0.5, seed: 0 },
            other => return Err(Error::UnknownFamily(other.to_string())),
        })
    }

    pub fn family(&self) -> &'static str {
        match self {
            FunctionSpec::Constant { .. } => "constant",
            FunctionSpec::Linear { .. } => "linear",
            FunctionSpec::FourierMode { .. } => "fourier-mode",
            FunctionSpec::CellIndicator { .. } => "cell-indicator",
            FunctionSpec::GasketHarmonic { .. } => "gasket-harmonic",
            FunctionSpec::RandomHoelder { .. } => "random-hoelder",
            FunctionSpec::Csv { .. } => "csv",
        }
    }

    /// Short label including the parameters that distinguish suite members.
    pub fn label(&self) -> String {
        match self {
            FunctionSpec::Constant { value } => format!("constant(c={value})"),
            FunctionSpec::Linear { slope } => format!("linear(a={slope})"),
            FunctionSpec::FourierMode { k } => format!("fourier-mode(k={k})"),
            FunctionSpec::CellIndicator { cell_level, index } => {
                format!("cell-indicator(level={cell_level},index={index})")
            }
            FunctionSpec::GasketHarmonic { boundary } => format!(
                "gasket-harmonic({},{},{})",
                boundary[0], boundary[1], boundary[2]
            ),
            FunctionSpec::RandomHoelder { h, seed } => {
                format!("random-hoelder(h={h},seed={seed})")
            }
            FunctionSpec::Csv { path } => format!("csv({})", path.display()),
        }
    }
}

/// The standard non-constant suite for a space kind.
pub fn standard_suite(kind: SpaceKind) -> Vec<FunctionSpec> {
    let mut suite = vec![
        FunctionSpec::FourierMode { k: 1 },
        FunctionSpec::CellIndicator {
            cell_level: 1,
            index: 0,
        },
        FunctionSpec::RandomHoelder { h: 0.6, seed: 7 },
        FunctionSpec::Linear { slope: 1.0 },
    ];
    if kind == SpaceKind::Gasket {
        suite.push(FunctionSpec::GasketHarmonic {
            boundary: default_boundary(),
        });
    }
    suite
}

pub fn load_function(space: &DiscreteSpace, spec: &FunctionSpec) -> Result<GridFn> {
    match spec {
        FunctionSpec::Constant { value } => GridFn::from_fn(space, |_| *value),
        FunctionSpec::Linear { slope } => GridFn::from_fn(space, |x| slope * space.coords(x)[0]),
        FunctionSpec::FourierMode { k } => GridFn::from_fn(space, |x| {
            (2.0 * std::f64::consts::PI * *k as f64 * space.coords(x)[0]).sin()
        }),
        FunctionSpec::CellIndicator { cell_level, index } => {
            cell_indicator(space, *cell_level, *index)
        }
        FunctionSpec::GasketHarmonic { boundary } => gasket_harmonic(space, *boundary),
        FunctionSpec::RandomHoelder { h, seed } => random_hoelder(space, *h, *seed),
        FunctionSpec::Csv { path } => {
            let text = std::fs::read_to_string(path)?;
            GridFn::new(space, parse_csv(&text, space.len())?)
        }
    }
}

/// Parses `index,value` rows; a non-numeric first line is taken as a header.
pub fn parse_csv(text: &str, len: usize) -> Result<Vec<f64>> {
    let mut values = vec![f64::NAN; len];
    let mut seen = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: expected `index,value`",
                    lineno + 1
                )))
            }
        };
        let index: usize = match a.parse() {
            Ok(i) => i,
            Err(_) if lineno == 0 => continue,
            Err(_) => {
                return Err(Error::Parse(format!(
                    "line {}: bad index `{a}`",
                    lineno + 1
                )))
            }
        };
        let value: f64 = b
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad value `{b}`", lineno + 1)))?;
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        if !values[index].is_nan() {
            return Err(Error::Parse(format!(
                "line {}: duplicate index {index}",
                lineno + 1
            )));
        }
        values[index] = value;
        seen += 1;
    }
    if seen != len {
        return Err(invalid(format!(
            "CSV has {seen} values, space has {len} points"
        )));
    }
    Ok(values)
}

fn cell_indicator(space: &DiscreteSpace, cell_level: usize, index: usize) -> Result<GridFn> {
    if cell_level > space.level() {
        return Err(invalid(format!(
            "cell level {cell_level} exceeds space level {}",
            space.level()
        )));
    }
    let n = space.level();
    let base: usize = match space.kind() {
        SpaceKind::Torus1d => 2,
        SpaceKind::Torus2d => 4,
        SpaceKind::Gasket => 3,
    };
    let count = base.pow(cell_level as u32);
    if index >= count {
        return Err(Error::IndexOutOfRange { index, len: count });
    }
    let side = 1i64 << (n - cell_level);
    match space.kind() {
        SpaceKind::Torus1d => {
            let lo = index as i64 * side;
            GridFn::from_fn(space, |x| {
                let a = space.lattice(x)[0];
                f64::from(u8::from(a >= lo && a < lo + side))
            })
        }
        SpaceKind::Torus2d => {
            let per_row = 1usize << cell_level;
            let (cx, cy) = (
                (index % per_row) as i64 * side,
                (index / per_row) as i64 * side,
            );
            GridFn::from_fn(space, |x| {
                let [a, b] = space.lattice(x);
                f64::from(u8::from(
                    a >= cx && a < cx + side && b >= cy && b < cy + side,
                ))
            })
        }
        SpaceKind::Gasket => {
            // Address digits, most significant first: 0 keeps the corner,
            // 1 and 2 move along the two lattice directions.
            let (mut a, mut b, mut s) = (0i64, 0i64, 1i64 << n);
            let mut rest = index;
            let mut digits = Vec::with_capacity(cell_level);
            for _ in 0..cell_level {
                digits.push(rest % 3);
                rest /= 3;
            }
            for d in digits.into_iter().rev() {
                s /= 2;
                match d {
                    1 => a += s,
                    2 => b += s,
                    _ => {}
                }
            }
            GridFn::from_fn(space, |x| {
                let [u, v] = space.lattice(x);
                let inside = u >= a && v >= b && (u - a) + (v - b) <= s;
                f64::from(u8::from(inside))
            })
        }
    }
}

/// Solves the graph Laplace equation with the corner values prescribed, by
/// conjugate gradients on the interior vertices.
fn gasket_harmonic(space: &DiscreteSpace, boundary: [f64; 3]) -> Result<GridFn> {
    if space.kind() != SpaceKind::Gasket {
        return Err(Error::Unsupported(format!(
            "gasket-harmonic needs the gasket, not {}",
            space.kind()
        )));
    }
    let n = space.len();
    let interior = n - 3;
    // Interior vertex x is unknown x - 3.
    let apply = |u: &[f64], out: &mut [f64]| {
        for i in 0..interior {
            let x = i + 3;
            let mut acc = space.degree(x) as f64 * u[i];
            for &y in space.neighbors(x) {
                if y >= 3 {
                    acc -= u[y - 3];
                }
            }
            out[i] = acc;
        }
    };
    let rhs: Vec<f64> = (0..interior)
        .map(|i| {
            space
                .neighbors(i + 3)
                .iter()
                .filter(|&&y| y < 3)
                .map(|&y| boundary[y])
                .sum()
        })
        .collect();
    let u = conjugate_gradient(apply, &rhs, 1e-14, 20 * interior + 100)?;
    let mut values = boundary.to_vec();
    values.extend(u);
    GridFn::new(space, values)
}

fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= rel_tol * b_norm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let step = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::LinearAlgebra(
        "conjugate gradients did not converge".into(),
    ))
}

fn random_hoelder(space: &DiscreteSpace, h: f64, seed: u64) -> Result<GridFn> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(invalid(format!(
            "Hölder exponent h must lie in (0, 1], got {h}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let level = space.level();
    match space.kind() {
        SpaceKind::Torus1d => GridFn::new(space, periodic_midpoint(level, h, &mut rng)),
        SpaceKind::Torus2d => {
            let gx = periodic_midpoint(level, h, &mut rng);
            let gy = periodic_midpoint(level, h, &mut rng);
            GridFn::from_fn(space, |x| {
                let [a, b] = space.lattice(x);
                gx[a as usize] + gy[b as usize]
            })
        }
        SpaceKind::Gasket => {
            let mut values = Vec::with_capacity(space.len());
            for x in 0..space.len() {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = match (space.parents(x), space.vertex_level(x)) {
                    (Some((a, b)), Some(j)) => {
                        0.5 * (values[a] + values[b]) + 2f64.powf(-(j as f64) * h) * z
                    }
                    _ => z,
                };
                values.push(v);
            }
            GridFn::new(space, values)
        }
    }
}

/// Periodic midpoint displacement on `2^level` points.
fn periodic_midpoint(level: usize, h: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = 1usize << level;
    let mut v = vec![0.0; n];
    for j in 1..=level {
        let stride = n >> j;
        let sigma = 2f64.powf(-(j as f64) * h);
        for i in (stride..n).step_by(2 * stride) {
            let z: f64 = StandardNormal.sample(rng);
            v[i] = 0.5 * (v[i - stride] + v[(i + stride) % n]) + sigma * z;
        }
    }
    v
}
