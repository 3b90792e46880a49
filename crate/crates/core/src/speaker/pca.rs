use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Principal-component projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Orthonormal basis vectors, one per output dimension.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component, descending.
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(w, (v, m))| w * (v - m))
                    .sum()
            })
            .collect()
    }
}

/// Column means and the sample covariance (`n - 1` denominator).
pub(crate) fn mean_and_covariance(data: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = data.len();
    let d = data[0].len();
    let mut mean = DVector::zeros(d);
    for x in data {
        mean += DVector::from_column_slice(x);
    }
    mean /= n as f64;
    let centred = DMatrix::from_fn(n, d, |i, j| data[i][j] - mean[j]);
    let cov = centred.transpose() * &centred / (n.max(2) - 1) as f64;
    (mean, cov)
}

/// Eigenpairs of a symmetric matrix, eigenvalue-descending, each vector
/// flipped so its largest-magnitude entry is positive.
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&l, v)| {
            let mut v: Vec<f64> = v.iter().copied().collect();
            let big = v
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            if big < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (l, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

pub(crate) fn check_rows(data: &[Vec<f64>]) -> Result<usize> {
    let d = data.first().map(Vec::len).ok_or(Error::NoFeatures)?;
    if d == 0 {
        return Err(Error::InvalidArgument("feature vectors are empty".into()));
    }
    if data.iter().any(|x| x.len() != d) {
        return Err(Error::InvalidArgument("feature vectors differ in length".into()));
    }
    if data.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("feature vectors must be finite".into()));
    }
    Ok(d)
}

/// Fit the top `d_pca` principal components.
pub fn fit_pca(data: &[Vec<f64>], d_pca: usize) -> Result<Pca> {
    let dim = check_rows(data)?;
    if d_pca == 0 || d_pca > dim {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {d_pca} of {dim} dimensions"
        )));
    }
    if data.len() <= d_pca {
        return Err(Error::RankDeficient(format!(
            "{} samples cannot span {d_pca} dimensions",
            data.len()
        )));
    }
    let (mean, cov) = mean_and_covariance(data);
    let pairs = sorted_eigen(cov);
    let top = pairs[0].0;
    let kept = &pairs[..d_pca];
    if !(top > 0.0) || kept[d_pca - 1].0 <= 1e-12 * top {
        return Err(Error::RankDeficient(format!(
            "data span fewer than {d_pca} dimensions"
        )));
    }
    Ok(Pca {
        mean: mean.iter().copied().collect(),
        components: kept.iter().map(|p| p.1.clone()).collect(),
        eigenvalues: kept.iter().map(|p| p.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, sd: &[f64], s: u64) -> Vec<Vec<f64>> {
        let mut rng = seed::rng(s);
        (0..n)
            .map(|_| {
                sd.iter()
                    .map(|&d| d * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect()
            })
            .collect()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn basis_is_orthonormal_and_sorted() {
        let data = gaussian(500, &[3.0, 1.0, 2.0, 0.5, 1.5], 1);
        let p = fit_pca(&data, 4).unwrap();
        for (i, a) in p.components.iter().enumerate() {
            for (j, b) in p.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8);
            }
            let big = a.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
        assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn first_axis_follows_largest_variance() {
        let data = gaussian(10_000, &[10f64.sqrt(), 1.0, 0.1f64.sqrt()], 2);
        let p = fit_pca(&data, 1).unwrap();
        assert!(p.components[0][0].abs() >= 0.99);
    }

    #[test]
    fn isotropic_rotation_keeps_distances() {
        let data = gaussian(200, &[1.0, 1.0], 3);
        let p = fit_pca(&data, 2).unwrap();
        let proj: Vec<Vec<f64>> = data.iter().map(|x| p.project(x)).collect();
        for i in 0..20 {
            for j in 0..20 {
                assert!((dist(&data[i], &data[j]) - dist(&proj[i], &proj[j])).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn full_rank_keeps_total_variance() {
        let data = gaussian(300, &[2.0, 0.3, 1.0], 4);
        let p = fit_pca(&data, 3).unwrap();
        let (_, cov) = mean_and_covariance(&data);
        assert!((p.eigenvalues.iter().sum::<f64>() - cov.trace()).abs() < 1e-9);
    }

    #[test]
    fn degenerate_data_is_rejected() {
        let flat: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 2.0 * i as f64, 1.0]).collect();
        assert!(matches!(fit_pca(&flat, 2), Err(Error::RankDeficient(_))));
        assert!(fit_pca(&flat, 1).is_ok());
        assert!(matches!(fit_pca(&flat[..2], 2), Err(Error::RankDeficient(_))));
        assert!(fit_pca(&flat, 4).is_err());
        assert!(matches!(fit_pca(&[], 1), Err(Error::NoFeatures)));
    }
}
