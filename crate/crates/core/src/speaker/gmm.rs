use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pca::check_rows;
use crate::{seed, Error, Result};

/// Fraction of the global per-dimension variance below which no component
/// variance may fall.
pub const VARIANCE_FLOOR: f64 = 1e-4;
pub const MAX_ITERATIONS: usize = 200;
/// EM stops once the log-likelihood gain per sample drops below this.
pub const TOLERANCE: f64 = 1e-5;

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl GmmModel {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        let d = self.dim();
        if k == 0 || self.means.len() != k || self.variances.len() != k {
            return Err(Error::Document("mixture has inconsistent component counts".into()));
        }
        if self.means.iter().chain(&self.variances).any(|v| v.len() != d) {
            return Err(Error::Document("mixture has inconsistent dimensions".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Document("mixture weights are not a distribution".into()));
        }
        if self.variances.iter().flatten().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Document("mixture variances must be positive".into()));
        }
        Ok(())
    }

    /// `ln p(x)`.
    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let mut terms = vec![0.0; self.components()];
        self.component_terms(x, &mut terms);
        log_sum_exp(&terms)
    }

    /// Sum of `ln p(x)` over all vectors.
    pub fn total_log_likelihood(&self, data: &[Vec<f64>]) -> f64 {
        let mut terms = vec![0.0; self.components()];
        data.iter()
            .map(|x| {
                self.component_terms(x, &mut terms);
                log_sum_exp(&terms)
            })
            .sum()
    }

    /// `ln w_j + ln N(x; m_j, v_j)` for every component.
    fn component_terms(&self, x: &[f64], out: &mut [f64]) {
        let c = -0.5 * x.len() as f64 * (2.0 * PI).ln();
        for (j, o) in out.iter_mut().enumerate() {
            let mut q = 0.0;
            let mut logdet = 0.0;
            for ((v, m), var) in x.iter().zip(&self.means[j]).zip(&self.variances[j]) {
                q += (v - m) * (v - m) / var;
                logdet += var.ln();
            }
            *o = self.weights[j].ln() + c - 0.5 * (logdet + q);
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// A trained mixture with its training history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGmm {
    pub model: GmmModel,
    /// Total log-likelihood after initialisation and after each EM step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

/// Fit a `k`-component diagonal mixture by EM from a k-means++ start.
pub fn train_gmm(data: &[Vec<f64>], k: usize, seed: u64) -> Result<TrainedGmm> {
    let d = check_rows(data)?;
    if k == 0 {
        return Err(Error::InvalidArgument("a mixture needs at least one component".into()));
    }
    let n = data.len();
    if n < 10 * k {
        return Err(Error::TooFewSamples {
            needed: 10 * k,
            got: n,
        });
    }
    let global = column_variance(data);
    let floor: Vec<f64> = global
        .iter()
        .map(|&v| (VARIANCE_FLOOR * v).max(f64::MIN_POSITIVE))
        .collect();

    if k == 1 {
        let mean = column_mean(data);
        let model = GmmModel {
            weights: vec![1.0],
            variances: vec![global.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect()],
            means: vec![mean],
        };
        let ll = model.total_log_likelihood(data);
        return Ok(TrainedGmm {
            model,
            log_likelihood: vec![ll],
            converged: true,
        });
    }

    let mut model = kmeans_pp_start(data, k, &floor, seed);
    let mut resp = vec![vec![0.0; k]; n];
    let mut trace = vec![e_step(&model, data, &mut resp)];
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        m_step(&mut model, data, &resp, &floor, d);
        let ll = e_step(&model, data, &mut resp);
        let gain = ll - trace[trace.len() - 1];
        trace.push(ll);
        if gain / (n as f64) < TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(TrainedGmm {
        model,
        log_likelihood: trace,
        converged,
    })
}

/// Fill `resp` with posteriors and return the total log-likelihood.
fn e_step(model: &GmmModel, data: &[Vec<f64>], resp: &mut [Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (x, r) in data.iter().zip(resp.iter_mut()) {
        model.component_terms(x, r);
        let l = log_sum_exp(r);
        r.iter_mut().for_each(|t| *t = (*t - l).exp());
        total += l;
    }
    total
}

fn m_step(model: &mut GmmModel, data: &[Vec<f64>], resp: &[Vec<f64>], floor: &[f64], d: usize) {
    let n = data.len() as f64;
    for j in 0..model.components() {
        let nj: f64 = resp.iter().map(|r| r[j]).sum();
        model.weights[j] = nj / n;
        if nj < 1e-10 {
            // An empty component contributes nothing; leave it where it is.
            continue;
        }
        let mut mean = vec![0.0; d];
        for (x, r) in data.iter().zip(resp) {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += r[j] * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nj);
        let mut var = vec![0.0; d];
        for (x, r) in data.iter().zip(resp) {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += r[j] * (v - m) * (v - m);
            }
        }
        for (s, f) in var.iter_mut().zip(floor) {
            *s = (*s / nj).max(*f);
        }
        model.means[j] = mean;
        model.variances[j] = var;
    }
    let total: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= total);
}

/// Centres by k-means++ seeding; weights and variances from the hard
/// nearest-centre partition.
fn kmeans_pp_start(data: &[Vec<f64>], k: usize, floor: &[f64], seed: u64) -> GmmModel {
    let mut rng = seed::rng(seed::derive(seed, "kmeans++"));
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut centres = vec![data[rng.random_range(0..data.len())].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq(x, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = data.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..data.len())
        };
        centres.push(data[pick].clone());
        let c = centres.last().unwrap();
        for (e, x) in d2.iter_mut().zip(data) {
            *e = e.min(sq(x, c));
        }
    }

    let d = floor.len();
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0; d]; k];
    let mut squares = vec![vec![0.0; d]; k];
    for x in data {
        let j = (0..k)
            .min_by(|&a, &b| sq(x, &centres[a]).total_cmp(&sq(x, &centres[b])))
            .unwrap_or(0);
        counts[j] += 1;
        for i in 0..d {
            sums[j][i] += x[i];
            squares[j][i] += x[i] * x[i];
        }
    }
    let n = data.len() as f64;
    let mut model = GmmModel {
        weights: Vec::with_capacity(k),
        means: Vec::with_capacity(k),
        variances: Vec::with_capacity(k),
    };
    for j in 0..k {
        let c = counts[j].max(1) as f64;
        let mean: Vec<f64> = if counts[j] == 0 {
            centres[j].clone()
        } else {
            sums[j].iter().map(|s| s / c).collect()
        };
        let var = (0..d)
            .map(|i| (squares[j][i] / c - mean[i] * mean[i]).max(floor[i]))
            .collect();
        model.weights.push(counts[j].max(1) as f64 / n);
        model.means.push(mean);
        model.variances.push(var);
    }
    let total: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= total);
    model
}

fn column_mean(data: &[Vec<f64>]) -> Vec<f64> {
    let n = data.len() as f64;
    let mut m = vec![0.0; data[0].len()];
    for x in data {
        m.iter_mut().zip(x).for_each(|(a, b)| *a += b);
    }
    m.iter_mut().for_each(|a| *a /= n);
    m
}

/// Maximum-likelihood (`1/n`) variance of each column.
fn column_variance(data: &[Vec<f64>]) -> Vec<f64> {
    let m = column_mean(data);
    let n = data.len() as f64;
    let mut v = vec![0.0; m.len()];
    for x in data {
        for ((s, a), b) in v.iter_mut().zip(x).zip(&m) {
            *s += (a - b) * (a - b);
        }
    }
    v.iter_mut().for_each(|s| *s /= n);
    v
}
