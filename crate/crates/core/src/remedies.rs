//! Gauge-free alternatives: standardizing the data before training, and
//! measuring similarity on the smoothed matrix `X·A·Bᵀ` instead of on the
//! embeddings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{cosine_of_rows, DataMatrix};
use crate::similarity::{Metric, SimilarityKind, SimilarityMatrix};
use crate::solvers::{predicted_scores, EmbeddingPair};

/// Column means and sample standard deviations (divisor n − 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub column_means: Vec<f64>,
    pub column_stds: Vec<f64>,
}

impl Standardization {
    /// Maps standardized data back to the original scale.
    pub fn invert(&self, z: &DataMatrix) -> Result<DataMatrix> {
        if z.cols() != self.column_means.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns, parameters for {}",
                z.cols(),
                self.column_means.len()
            )));
        }
        Ok(DataMatrix::from_fn(z.rows(), z.cols(), |i, j| {
            z.get(i, j) * self.column_stds[j] + self.column_means[j]
        }))
    }
}

/// Zero mean, unit sample variance per column.
pub fn standardize(x: &DataMatrix) -> Result<(DataMatrix, Standardization)> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "standardization needs at least two rows".into(),
        ));
    }
    let mut means = vec![0.0; p];
    let mut stds = vec![0.0; p];
    for j in 0..p {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        if !(std > 1e-300 && std.is_finite()) {
            return Err(Error::ZeroVariance(j));
        }
        means[j] = mean;
        stds[j] = std;
    }
    let z = DataMatrix::from_fn(n, p, |i, j| (x.get(i, j) - means[j]) / stds[j]);
    Ok((
        z,
        Standardization {
            column_means: means,
            column_stds: stds,
        },
    ))
}

/// Cosine between users represented by their rows of `X·A·Bᵀ`.
pub fn backprojected_user_cosine(x: &DataMatrix, pair: &EmbeddingPair) -> Result<SimilarityMatrix> {
    let smoothed = predicted_scores(x, pair)?;
    Ok(SimilarityMatrix::new(
        cosine_of_rows(&smoothed, &smoothed)?,
        SimilarityKind::UserUser,
        Metric::Cosine,
    ))
}

/// Cosine between items represented by their columns of `X·A·Bᵀ`.
pub fn backprojected_item_cosine(x: &DataMatrix, pair: &EmbeddingPair) -> Result<SimilarityMatrix> {
    let profiles = predicted_scores(x, pair)?.transpose();
    Ok(SimilarityMatrix::new(
        cosine_of_rows(&profiles, &profiles)?,
        SimilarityKind::ItemItem,
        Metric::Cosine,
    ))
}
