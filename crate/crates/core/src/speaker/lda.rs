use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pca::{check_rows, sorted_eigen};
use crate::{Error, Result};

/// Linear discriminant projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lda {
    /// One direction per output dimension, scaled so the projected
    /// within-class scatter is the identity.
    pub directions: Vec<Vec<f64>>,
    /// Between-class to within-class scatter ratio along each direction.
    pub fisher_ratios: Vec<f64>,
}

impl Lda {
    pub fn output_dim(&self) -> usize {
        self.directions.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.directions
            .iter()
            .map(|d| d.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Fit `d_lda` discriminant directions for integer class labels.
///
/// Solves `S_b w = l (S_w + eps I) w` with `eps = 1e-6 * trace(S_w) / dim`
/// by whitening with the Cholesky factor of the regularised `S_w`.
pub fn fit_lda(data: &[Vec<f64>], labels: &[usize], d_lda: usize) -> Result<Lda> {
    let dim = check_rows(data)?;
    if labels.len() != data.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} vectors",
            labels.len(),
            data.len()
        )));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let max = dim.min(classes.len() - 1);
    if d_lda == 0 || d_lda > max {
        return Err(Error::LdaDimension {
            requested: d_lda,
            max,
        });
    }

    let mut sums = vec![DVector::<f64>::zeros(dim); classes.len()];
    let mut counts = vec![0usize; classes.len()];
    let slot = |l: usize| classes.binary_search(&l).unwrap_or(0);
    for (x, &l) in data.iter().zip(labels) {
        let c = slot(l);
        sums[c] += DVector::from_column_slice(x);
        counts[c] += 1;
    }
    let means: Vec<DVector<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s / n as f64)
        .collect();
    let total = sums.iter().fold(DVector::zeros(dim), |a, s| a + s) / data.len() as f64;

    let mut sw = DMatrix::<f64>::zeros(dim, dim);
    for (x, &l) in data.iter().zip(labels) {
        let d = DVector::from_column_slice(x) - &means[slot(l)];
        sw.ger(1.0, &d, &d, 1.0);
    }
    let mut sb = DMatrix::<f64>::zeros(dim, dim);
    for (m, &n) in means.iter().zip(&counts) {
        let d = m - &total;
        sb.ger(n as f64, &d, &d, 1.0);
    }

    let eps = 1e-6 * sw.trace() / dim as f64;
    for i in 0..dim {
        sw[(i, i)] += eps;
    }
    let chol = sw
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("within-class scatter is singular".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("within-class scatter is singular".into()))?;
    let m = &l_inv * sb * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let pairs = sorted_eigen(m);

    let back = l_inv.transpose();
    let (directions, fisher_ratios) = pairs[..d_lda]
        .iter()
        .map(|(ratio, v)| {
            let w = &back * DVector::from_column_slice(v);
            (w.iter().copied().collect(), ratio.max(0.0))
        })
        .unzip();
    Ok(Lda {
        directions,
        fisher_ratios,
    })
}
