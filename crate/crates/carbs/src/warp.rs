//! Quantile output transform: maps raw objective values onto an approximately
//! standard-normal scale before GP fitting.
//!
//! The map is piecewise linear between `⌈√t⌉` quantile landmarks of the
//! training outputs, composed with the standard-normal inverse cdf. Quantile
//! levels are clipped to `[1e-7, 1 - 1e-7]` so the extremes stay finite.

use crate::math::{normal_cdf, normal_inv_cdf};

const LEVEL_CLIP: f64 = 1e-7;

/// Monotone map from raw output values to warped (≈ standard normal) values.
#[derive(Debug, Clone)]
pub struct QuantileWarp {
    /// Strictly increasing reference values.
    knots_value: Vec<f64>,
    /// Strictly increasing quantile levels, endpoints clipped.
    knots_level: Vec<f64>,
    /// All training outputs identical (or fewer than two usable values):
    /// everything maps to 0.
    degenerate: bool,
    constant: f64,
}

impl QuantileWarp {
    /// Fit the transform to a set of training outputs. Non-finite values are
    /// ignored; with fewer than two distinct values the warp is degenerate
    /// and maps every input to 0.
    pub fn fit(outputs: &[f64]) -> QuantileWarp {
        let mut sorted: Vec<f64> = outputs.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        let t = sorted.len();
        if t < 2 || sorted[0] == sorted[t - 1] {
            if t > 0 && sorted[0] == sorted[t - 1] {
                log::warn!("quantile warp fit on all-identical outputs; warp is degenerate");
            }
            return QuantileWarp {
                knots_value: Vec::new(),
                knots_level: Vec::new(),
                degenerate: true,
                constant: sorted.first().copied().unwrap_or(0.0),
            };
        }

        let landmarks = ((t as f64).sqrt().ceil() as usize).max(2);
        let mut knots_value = Vec::with_capacity(landmarks);
        let mut knots_level = Vec::with_capacity(landmarks);
        for j in 0..landmarks {
            let level = j as f64 / (landmarks - 1) as f64;
            let value = interpolated_quantile(&sorted, level);
            if let Some(&last) = knots_value.last() {
                if value <= last {
                    // collapse duplicate landmarks, keeping the mean level
                    let li = knots_level.len() - 1;
                    knots_level[li] = 0.5 * (knots_level[li] + level);
                    continue;
                }
            }
            knots_value.push(value);
            knots_level.push(level);
        }
        let m = knots_level.len();
        knots_level[0] = knots_level[0].max(LEVEL_CLIP);
        knots_level[m - 1] = knots_level[m - 1].min(1.0 - LEVEL_CLIP);

        QuantileWarp { knots_value, knots_level, degenerate: false, constant: 0.0 }
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Raw output value -> warped value. Values beyond the training range
    /// clamp to the extreme warped values.
    pub fn warp(&self, value: f64) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        let level = interp(&self.knots_value, &self.knots_level, value);
        normal_inv_cdf(level.clamp(LEVEL_CLIP, 1.0 - LEVEL_CLIP))
    }

    /// Warped value -> raw output value (inverse of [`QuantileWarp::warp`] on
    /// the training range).
    pub fn unwarp(&self, warped: f64) -> f64 {
        if self.degenerate {
            return self.constant;
        }
        let level = normal_cdf(warped);
        interp(&self.knots_level, &self.knots_value, level)
    }
}

/// Quantile of sorted data at `level` in [0, 1], linearly interpolating
/// between order statistics.
fn interpolated_quantile(sorted: &[f64], level: f64) -> f64 {
    let h = level * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Piecewise-linear interpolation through strictly increasing `xs`,
/// clamping beyond the ends.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let m = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[m - 1] {
        return ys[m - 1];
    }
    let idx = match xs.binary_search_by(|probe| probe.total_cmp(&x)) {
        Ok(i) => return ys[i],
        Err(i) => i,
    };
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let (y0, y1) = (ys[idx - 1], ys[idx]);
    y0 + (x - x0) / (x1 - x0) * (y1 - y0)
}
