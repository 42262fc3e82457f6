//! Log-midpoint quadrature nodes on the dyadic time bands
//! `[2^{-(m+1)d_w}, 2^{-m d_w}]`, plus an optional tail band `[1, t_max]`.

/// One quadrature node: time `t` and weight `Δ ln t` for an integral in `dt/t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub t: f64,
    pub weight: f64,
}

/// Nodes for band `m`, `per_band` equal steps in `ln t`.
pub fn band_nodes(walk_dim: f64, m: usize, per_band: usize) -> Vec<Node> {
    let ln2 = std::f64::consts::LN_2;
    let hi = -(m as f64) * walk_dim * ln2;
    let lo = hi - walk_dim * ln2;
    midpoints(lo, hi, per_band)
}

/// Nodes on `[1, t_max]` with roughly the same log step as the unit bands.
pub fn tail_nodes(walk_dim: f64, t_max: f64, per_band: usize) -> Vec<Node> {
    if t_max <= 1.0 {
        return Vec::new();
    }
    let span = t_max.ln();
    let count = ((per_band as f64) * span / (walk_dim * std::f64::consts::LN_2))
        .ceil()
        .max(1.0) as usize;
    midpoints(0.0, span, count)
}

fn midpoints(ln_lo: f64, ln_hi: f64, count: usize) -> Vec<Node> {
    let step = (ln_hi - ln_lo) / count as f64;
    (0..count)
        .map(|j| Node {
            t: (ln_lo + (j as f64 + 0.5) * step).exp(),
            weight: step,
        })
        .collect()
}

/// Sorted times covering bands `0..=m_max` and, when `t_max > 1`, the tail.
pub fn heat_grid(walk_dim: f64, m_max: usize, per_band: usize, t_max: f64) -> Vec<f64> {
    let mut times: Vec<f64> = (0..=m_max)
        .flat_map(|m| band_nodes(walk_dim, m, per_band))
        .chain(tail_nodes(walk_dim, t_max, per_band))
        .map(|n| n.t)
        .collect();
    times.sort_by(f64::total_cmp);
    times
}

/// Geometric grid of `count` points on `[lo, hi]` (both ends included).
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_nodes_stay_inside_band_and_sum_to_width() {
        let dw = 5f64.ln() / 2f64.ln();
        for m in 0..5 {
            let nodes = band_nodes(dw, m, 4);
            let lo = 2f64.powf(-((m + 1) as f64) * dw);
            let hi = 2f64.powf(-(m as f64) * dw);
            assert!(nodes.iter().all(|n| n.t > lo && n.t < hi));
            let w: f64 = nodes.iter().map(|n| n.weight).sum();
            assert!((w - dw * std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn log_midpoint_integrates_power() {
        // ∫_{1/4}^{1} t^{1/2} dt/t = 2(1 - 1/2) = 1
        let nodes = band_nodes(2.0, 0, 64);
        let v: f64 = nodes.iter().map(|n| n.t.sqrt() * n.weight).sum();
        assert!((v - 1.0).abs() < 1e-4);
    }

    #[test]
    fn tail_covers_one_to_tmax() {
        let nodes = tail_nodes(2.0, 4.0, 4);
        assert_eq!(nodes.len(), 4);
        let w: f64 = nodes.iter().map(|n| n.weight).sum();
        assert!((w - 4f64.ln()).abs() < 1e-12);
        assert!(tail_nodes(2.0, 1.0, 4).is_empty());
    }

    #[test]
    fn grid_is_sorted() {
        let g = heat_grid(2.0, 5, 4, 4.0);
        assert_eq!(g.len(), 6 * 4 + 4);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
