//! Post-processing of sampled curves: optimum localization and sinusoid
//! fits used to extract exchange rates and ripple frequencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Peak of a sampled curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    /// Seconds.
    pub t_star: f64,
    pub value: f64,
    pub sample_index: usize,
}

/// Best sample, refined by the vertex of the parabola through it and its
/// two neighbours. Assumes uniform sampling.
pub fn locate_maximum(times: &[f64], values: &[f64]) -> Result<Optimum> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::param("values", "need equally long, nonempty time and value arrays"));
    }
    let (i, &best) = values
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
    let coarse = Optimum {
        t_star: times[i],
        value: best,
        sample_index: i,
    };
    if i == 0 || i + 1 >= values.len() {
        return Ok(coarse);
    }
    let (ym, y0, yp) = (values[i - 1], values[i], values[i + 1]);
    let curvature = ym - 2.0 * y0 + yp;
    if curvature >= 0.0 {
        return Ok(coarse);
    }
    let h = 0.5 * (times[i + 1] - times[i - 1]);
    let offset = 0.5 * (ym - yp) / curvature;
    Ok(Optimum {
        t_star: times[i] + offset * h,
        value: y0 - 0.125 * (ym - yp).powi(2) / curvature,
        sample_index: i,
    })
}

/// Least-squares fit of `offset + amplitude * cos(w t + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    /// rad/s.
    pub angular_frequency: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub rms_residual: f64,
}

impl SinusoidFit {
    pub fn frequency_hz(&self) -> f64 {
        self.angular_frequency / (2.0 * std::f64::consts::PI)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (self.angular_frequency * t + self.phase).cos()
    }
}

/// Linear least squares for fixed `w`; returns (offset, cos coeff, sin coeff, rss).
fn linear_fit(times: &[f64], values: &[f64], w: f64) -> (f64, f64, f64, f64) {
    // normal equations of the 3-parameter model [1, cos, sin]
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (&t, &y) in times.iter().zip(values) {
        let (s, c) = (w * t).sin_cos();
        let row = [1.0, c, s];
        for r in 0..3 {
            atb[r] += row[r] * y;
            for k in 0..3 {
                ata[r][k] += row[r] * row[k];
            }
        }
    }
    let x = solve3(ata, atb).unwrap_or([values.iter().sum::<f64>() / values.len() as f64, 0.0, 0.0]);
    let rss = times
        .iter()
        .zip(values)
        .map(|(&t, &y)| {
            let (s, c) = (w * t).sin_cos();
            (y - x[0] - x[1] * c - x[2] * s).powi(2)
        })
        .sum();
    (x[0], x[1], x[2], rss)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    (a[2][2].abs() > 1e-12 * scale).then_some(x)
}

/// Fits a single sinusoid with angular frequency in `[w_lo, w_hi]`: a
/// periodogram scan on a grid fine enough to resolve the record length,
/// then golden-section refinement of the residual around the best point.
pub fn fit_sinusoid(times: &[f64], values: &[f64], w_lo: f64, w_hi: f64) -> Result<SinusoidFit> {
    if times.len() != values.len() || times.len() < 4 {
        return Err(Error::param("values", "need at least four samples"));
    }
    if !(w_lo > 0.0 && w_hi > w_lo) {
        return Err(Error::param("frequency range", format!("invalid range [{w_lo}, {w_hi}]")));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(Error::param("times", "samples must span a positive interval"));
    }
    let step = std::f64::consts::PI / (8.0 * span);
    let n_grid = (((w_hi - w_lo) / step).ceil() as usize).clamp(16, 400_000);
    let grid_step = (w_hi - w_lo) / n_grid as f64;
    let rss_at = |w: f64| linear_fit(times, values, w).3;

    let mut best = (w_lo, f64::INFINITY);
    for k in 0..=n_grid {
        let w = w_lo + grid_step * k as f64;
        let r = rss_at(w);
        if r < best.1 {
            best = (w, r);
        }
    }
    let (mut a, mut b) = ((best.0 - grid_step).max(w_lo), (best.0 + grid_step).min(w_hi));
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - golden * (b - a);
    let mut x2 = a + golden * (b - a);
    let (mut f1, mut f2) = (rss_at(x1), rss_at(x2));
    for _ in 0..100 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = rss_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = rss_at(x2);
        }
        if (b - a) <= 1e-13 * b.abs() {
            break;
        }
    }
    let w = 0.5 * (a + b);
    let (offset, cc, sc, rss) = linear_fit(times, values, w);
    Ok(SinusoidFit {
        angular_frequency: w,
        offset,
        amplitude: (cc * cc + sc * sc).sqrt(),
        // cc cos + sc sin = A cos(wt + phase) with phase = atan2(-sc, cc)
        phase: (-sc).atan2(cc),
        rms_residual: (rss / times.len() as f64).sqrt(),
    })
}

/// Exchange rate `|g'|` from a swap population curve `P(t) ~ sin^2(g' t)`,
/// whose oscillation runs at `2|g'|`. `g_lo..g_hi` bounds the search in rad/s.
pub fn fit_swap_rate(times: &[f64], population: &[f64], g_lo: f64, g_hi: f64) -> Result<SinusoidFit> {
    let fit = fit_sinusoid(times, population, 2.0 * g_lo, 2.0 * g_hi)?;
    Ok(SinusoidFit {
        angular_frequency: 0.5 * fit.angular_frequency,
        ..fit
    })
}
