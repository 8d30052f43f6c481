//! Step detection on a sampled, non-decreasing curve.

use serde::{Deserialize, Serialize};

/// Jumps must exceed this multiple of the median increment, and of the rise
/// of the neighbouring treads.
pub const JUMP_RATIO: f64 = 10.0;
/// Relative RMS deviation from the best-fit line below which a curve is linear.
pub const LINEAR_RMS: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tread {
    pub x_start: f64,
    pub x_end: f64,
    /// Mean value over the tread.
    pub level: f64,
    /// Least-squares slope (0 for single-sample treads).
    pub slope: f64,
}

impl Tread {
    pub fn rise(&self) -> f64 {
        (self.slope * (self.x_end - self.x_start)).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseSummary {
    pub steps: usize,
    pub treads: Vec<Tread>,
    /// Size of each jump between consecutive treads.
    pub jumps: Vec<f64>,
    /// Every jump exceeds `JUMP_RATIO` times the rise of both adjacent treads.
    pub jumps_dominate: bool,
    /// RMS deviation from the least-squares line over RMS of the values.
    pub linear_rms_ratio: f64,
    pub is_linear: bool,
    pub non_decreasing: bool,
}

impl StaircaseSummary {
    pub fn is_staircase(&self, steps: usize) -> bool {
        self.steps == steps && self.jumps_dominate
    }
}

fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Summarise `ys` sampled at increasing `xs`.
///
/// An increment is a jump when it exceeds `JUMP_RATIO` times the median
/// absolute increment (with a floor of `1e-9` of the value range);
/// consecutive jump increments form a single jump.
pub fn detect(xs: &[f64], ys: &[f64]) -> StaircaseSummary {
    assert_eq!(xs.len(), ys.len(), "xs and ys must have the same length");
    assert!(xs.len() >= 2, "need at least two samples");
    let d: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
    let mut mags: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.total_cmp(b));
    let median = mags[mags.len() / 2];
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let threshold = (JUMP_RATIO * median).max(1e-9 * (hi - lo));
    let is_jump: Vec<bool> = d.iter().map(|v| v.abs() > threshold).collect();

    // tread = maximal run of samples not separated by a jump increment
    let mut treads = Vec::new();
    let mut jumps = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < d.len() {
        if is_jump[i] {
            let end = i;
            let mut j = i;
            while j < d.len() && is_jump[j] {
                j += 1;
            }
            // samples strictly inside a multi-increment jump belong to no tread
            treads.push(tread(&xs[start..=end], &ys[start..=end]));
            jumps.push(ys[j] - ys[end]);
            start = j;
            i = j;
        } else {
            i += 1;
        }
    }
    treads.push(tread(&xs[start..], &ys[start..]));

    let jumps_dominate = jumps
        .iter()
        .enumerate()
        .all(|(j, size)| size.abs() > JUMP_RATIO * treads[j].rise().max(treads[j + 1].rise()));

    let (slope, icpt) = line_fit(xs, ys);
    let n = ys.len() as f64;
    let dev = (xs.iter().zip(ys).map(|(x, y)| (y - slope * x - icpt).powi(2)).sum::<f64>() / n).sqrt();
    let rms = (ys.iter().map(|y| y * y).sum::<f64>() / n).sqrt();
    let linear_rms_ratio = if rms > 0.0 { dev / rms } else { 0.0 };

    StaircaseSummary {
        steps: treads.len(),
        treads,
        jumps,
        jumps_dominate,
        linear_rms_ratio,
        is_linear: linear_rms_ratio < LINEAR_RMS,
        non_decreasing: d.iter().all(|&v| v >= 0.0),
    }
}

fn tread(xs: &[f64], ys: &[f64]) -> Tread {
    let slope = if xs.len() > 1 { line_fit(xs, ys).0 } else { 0.0 };
    Tread {
        x_start: xs[0],
        x_end: xs[xs.len() - 1],
        level: ys.iter().sum::<f64>() / ys.len() as f64,
        slope,
    }
}
