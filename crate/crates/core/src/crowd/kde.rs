use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of grid points a density is evaluated on.
pub const GRID_POINTS: usize = 512;
/// Minimum number of samples for a density fit.
pub const MIN_SAMPLES: usize = 10;
/// Kernel contributions beyond this many bandwidths are dropped.
const KERNEL_REACH: f64 = 9.0;

/// Gaussian kernel density sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl KdeCurve {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Linearly interpolated density; zero off the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        let (first, last) = match (self.grid.first(), self.grid.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => return 0.0,
        };
        if !(x >= first && x <= last) || self.grid.len() < 2 {
            return 0.0;
        }
        let step = (last - first) / (self.grid.len() - 1) as f64;
        let pos = (x - first) / step;
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let t = pos - i as f64;
        self.density[i] * (1.0 - t) + self.density[i + 1] * t
    }
}

/// Mean and sample (n - 1) standard deviation.
pub fn mean_and_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Silverman's rule: `0.9 * min(std, IQR / 1.34) * m^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    bandwidth_of_sorted(&sorted)
}

fn bandwidth_of_sorted(sorted: &[f64]) -> Result<f64> {
    let (_, std) = mean_and_std(sorted);
    if !(std > 0.0) {
        return Err(Error::ZeroSpread);
    }
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    Ok(0.9 * spread * (sorted.len() as f64).powf(-0.2))
}

/// Fit a Gaussian-kernel density on `GRID_POINTS` points spanning
/// `[min - 3h, max + 3h]`. Silverman's bandwidth is used when none is given.
pub fn fit_kde(samples: &[f64], bandwidth: Option<f64>) -> Result<KdeCurve> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = match bandwidth {
        Some(h) if h.is_finite() && h > 0.0 => {
            if sorted[0] == sorted[sorted.len() - 1] {
                return Err(Error::ZeroSpread);
            }
            h
        }
        Some(h) => {
            return Err(Error::InvalidArgument(format!(
                "bandwidth {h} must be positive"
            )))
        }
        None => bandwidth_of_sorted(&sorted)?,
    };

    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[sorted.len() - 1] + 3.0 * h;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let norm = 1.0 / (sorted.len() as f64 * h * (2.0 * PI).sqrt());
    let reach = KERNEL_REACH * h;

    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let mut start = 0;
    let density = grid
        .iter()
        .map(|&x| {
            while start < sorted.len() && sorted[start] < x - reach {
                start += 1;
            }
            let mut sum = 0.0;
            for &s in &sorted[start..] {
                if s > x + reach {
                    break;
                }
                let z = (x - s) / h;
                sum += (-0.5 * z * z).exp();
            }
            sum * norm
        })
        .collect();
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
    })
}

/// Abscissa of the density's highest point; the smallest one on ties.
pub fn map_level(curve: &KdeCurve) -> f64 {
    let mut best = 0;
    for (i, &d) in curve.density.iter().enumerate() {
        if d > curve.density[best] {
            best = i;
        }
    }
    curve.grid.get(best).copied().unwrap_or(f64::NAN)
}
