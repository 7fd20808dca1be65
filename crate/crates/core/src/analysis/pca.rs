//! Principal component analysis by eigendecomposition of the covariance.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub standardize: bool,
    pub mean: Vec<f64>,
    /// Column standard deviations when standardizing, otherwise ones.
    /// Zero-variance columns keep scale 1.
    pub scale: Vec<f64>,
    /// One loading vector per component, unit length.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

/// Fits PCA on the rows of `x`. Covariance uses the n-1 divisor; each
/// component's largest-magnitude loading is made positive.
pub fn fit_pca(x: &DMatrix<f64>, n_components: usize, standardize: bool) -> Result<Pca> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::InsufficientData(format!("PCA needs 2 rows, got {n}")));
    }
    if n_components == 0 || n_components > (n - 1).min(d) {
        return Err(Error::Invalid(format!(
            "n_components {n_components} outside [1, {}]",
            (n - 1).min(d)
        )));
    }
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    let mut z = x.clone();
    for j in 0..d {
        z.column_mut(j).add_scalar_mut(-mean[j]);
    }
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            if !standardize {
                return 1.0;
            }
            let sd = (z.column(j).norm_squared() / (n - 1) as f64).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    for j in 0..d {
        z.column_mut(j).scale_mut(1.0 / scale[j]);
    }
    let cov = (z.transpose() * &z) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("feature matrix has zero total variance".into()));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(n_components);
    let mut explained_variance = Vec::with_capacity(n_components);
    for &c in order.iter().take(n_components) {
        let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let mut lead = 0;
        for (i, val) in v.iter().enumerate() {
            if val.abs() > v[lead].abs() {
                lead = i;
            }
        }
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[c].max(0.0));
    }
    let explained_variance_ratio = explained_variance.iter().map(|v| v / total).collect();
    Ok(Pca {
        standardize,
        mean,
        scale,
        components,
        explained_variance,
        explained_variance_ratio,
    })
}

impl Pca {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: row.len(),
            });
        }
        let z: Vec<f64> = row
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Maps projections back to the original feature space.
    pub fn inverse_transform(&self, proj: &[f64]) -> Result<Vec<f64>> {
        if proj.len() != self.components.len() {
            return Err(Error::Dimension {
                expected: self.components.len(),
                got: proj.len(),
            });
        }
        let mut z = vec![0.0; self.dim()];
        for (p, c) in proj.iter().zip(&self.components) {
            for (zi, ci) in z.iter_mut().zip(c) {
                *zi += p * ci;
            }
        }
        Ok(z.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| v * s + m)
            .collect())
    }

    pub fn transform_rows(&self, x: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
        (0..x.nrows())
            .map(|i| self.transform(&x.row(i).iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

/// Projects reader centroids with the standardization and loadings fitted
/// on the dataset's texts.
pub fn project_centroids(pca: &Pca, centroids: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    centroids.iter().map(|c| pca.transform(c)).collect()
}
