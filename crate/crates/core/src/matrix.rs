//! Dense row-major matrices, truncated SVD, and row normalization.
//!
//! Everything downstream (solvers, similarities, remedies) is expressed in
//! terms of [`DataMatrix`]. Products are parallelized over output rows; each
//! output row is accumulated sequentially, so results do not depend on the
//! number of worker threads.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row norms below this are treated as exactly zero.
pub const ZERO_ROW_NORM: f64 = 1e-300;

// Products with fewer multiply-adds than this stay on the calling thread.
const PARALLEL_WORK: usize = 1 << 16;

/// Dense real matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("{rows}x{cols} has an empty dimension")));
        }
        if rows * cols != values.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(n, p, rows.concat())
    }

    /// Builds a matrix from a generator. Panics if the generator yields a
    /// non-finite value or a dimension is zero.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values).expect("from_fn produced an invalid matrix")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(entries: &[f64]) -> Self {
        Self::from_fn(entries.len(), entries.len(), |i, j| {
            if i == j {
                entries[i]
            } else {
                0.0
            }
        })
    }

    // Internal constructor for values produced by arithmetic on finite inputs.
    pub(crate) fn from_parts(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, values.len());
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = vec![0.0; self.values.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        Self::from_parts(self.cols, self.rows, out)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DataMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (inner, p) = (self.cols, other.cols);
        let mut out = vec![0.0; self.rows * p];
        let fill = |(i, out_row): (usize, &mut [f64])| {
            let a_row = &self.values[i * inner..(i + 1) * inner];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.values[k * p..(k + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        if self.rows * inner * p < PARALLEL_WORK {
            out.chunks_mut(p).enumerate().for_each(fill);
        } else {
            out.par_chunks_mut(p).enumerate().for_each(fill);
        }
        Ok(Self::from_parts(self.rows, p, out))
    }

    /// `self · otherᵀ`, i.e. all pairwise row dot products.
    pub fn matmul_transpose(&self, other: &DataMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times transpose of {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let m = other.rows;
        let mut out = vec![0.0; self.rows * m];
        let fill = |(i, out_row): (usize, &mut [f64])| {
            let a = self.row(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = dot(a, other.row(j));
            }
        };
        if self.rows * self.cols * m < PARALLEL_WORK {
            out.chunks_mut(m).enumerate().for_each(fill);
        } else {
            out.par_chunks_mut(m).enumerate().for_each(fill);
        }
        Ok(Self::from_parts(self.rows, m, out))
    }

    /// `self · dMat(diag)`: scales column j by `diag[j]`.
    pub fn scale_columns(&self, diag: &[f64]) -> Result<Self> {
        if diag.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{} column scales for {} columns",
                diag.len(),
                self.cols
            )));
        }
        let mut values = self.values.clone();
        for row in values.chunks_mut(self.cols) {
            for (v, d) in row.iter_mut().zip(diag) {
                *v *= d;
            }
        }
        Ok(Self::from_parts(self.rows, self.cols, values))
    }

    /// `dMat(diag) · self`: scales row i by `diag[i]`.
    pub fn scale_rows(&self, diag: &[f64]) -> Result<Self> {
        if diag.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "{} row scales for {} rows",
                diag.len(),
                self.rows
            )));
        }
        let mut values = self.values.clone();
        for (row, d) in values.chunks_mut(self.cols).zip(diag) {
            row.iter_mut().for_each(|v| *v *= d);
        }
        Ok(Self::from_parts(self.rows, self.cols, values))
    }

    pub fn sub(&self, other: &DataMatrix) -> Result<Self> {
        self.check_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self::from_parts(self.rows, self.cols, values))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let values = self.values.iter().map(|v| v * factor).collect();
        Self::from_parts(self.rows, self.cols, values)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Frobenius norm of `self − other`.
    pub fn frobenius_distance(&self, other: &DataMatrix) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn max_abs_diff(&self, other: &DataMatrix) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self::from_parts(idx.len(), self.cols, values)
    }

    /// Keeps the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        assert!(k >= 1 && k <= self.cols);
        let mut values = Vec::with_capacity(self.rows * k);
        for i in 0..self.rows {
            values.extend_from_slice(&self.row(i)[..k]);
        }
        Self::from_parts(self.rows, k, values)
    }

    /// Simultaneous permutation of rows and columns of a square matrix.
    pub fn permute_symmetric(&self, order: &[usize]) -> Result<Self> {
        if self.rows != self.cols || order.len() != self.rows {
            return Err(Error::DimensionMismatch(
                "symmetric permutation needs a square matrix and a full ordering".into(),
            ));
        }
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            self.get(order[i], order[j])
        }))
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    fn check_same_shape(&self, other: &DataMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    /// Plain CSV: one row per line, comma-separated, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24);
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{}", format_number(*v)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|field| {
                    field.trim().parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: `{}`: {e}", line_no + 1, field.trim()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Shape("empty CSV".into()));
        }
        Self::from_rows(&rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Truncated singular value decomposition `M ≈ left · dMat(σ) · rightᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactors {
    pub left: DataMatrix,
    pub singular_values: Vec<f64>,
    pub right: DataMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DataMatrix {
        self.left
            .scale_columns(&self.singular_values)
            .and_then(|us| us.matmul_transpose(&self.right))
            .expect("svd factors have consistent shapes")
    }

    /// Leading `k` triplets.
    pub fn truncate(&self, k: usize) -> Result<SvdFactors> {
        if k == 0 || k > self.rank() {
            return Err(Error::RankOutOfRange {
                rank: k,
                max: self.rank(),
            });
        }
        Ok(SvdFactors {
            left: self.left.leading_columns(k),
            singular_values: self.singular_values[..k].to_vec(),
            right: self.right.leading_columns(k),
        })
    }

    /// Singular values at or below this are numerically zero.
    pub fn zero_threshold(&self) -> f64 {
        let largest = self.singular_values.first().copied().unwrap_or(0.0);
        largest * (self.left.rows().max(self.right.rows()) as f64) * f64::EPSILON
    }
}

/// Rank-`r` SVD of `m`.
///
/// Singular values come back in descending order. Each singular-vector pair
/// is sign-flipped so the largest-magnitude entry of the right vector is
/// positive.
pub fn svd(m: &DataMatrix, r: usize) -> Result<SvdFactors> {
    let max = m.rows.min(m.cols);
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange { rank: r, max });
    }
    if let Some(pos) = m.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / m.cols,
            col: pos % m.cols,
        });
    }
    let decomposition = m.to_nalgebra().svd(true, true);
    let u = decomposition.u.expect("requested U");
    let v_t = decomposition.v_t.expect("requested V^T");
    let sigma = decomposition.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    order.truncate(r);

    let (n, p) = m.shape();
    let mut left = vec![0.0; n * r];
    let mut right = vec![0.0; p * r];
    let mut singular_values = Vec::with_capacity(r);
    for (col, &idx) in order.iter().enumerate() {
        let mut pivot = 0.0f64;
        for j in 0..p {
            let x = v_t[(idx, j)];
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            right[j * r + col] = sign * v_t[(idx, j)];
        }
        for i in 0..n {
            left[i * r + col] = sign * u[(i, idx)];
        }
        singular_values.push(sigma[idx].max(0.0));
    }
    Ok(SvdFactors {
        left: DataMatrix::from_parts(n, r, left),
        singular_values,
        right: DataMatrix::from_parts(p, r, right),
    })
}

/// Diagonal of `Ω`: entry i is `1 / ‖row_i‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowNormalizer {
    pub scale: Vec<f64>,
}

impl RowNormalizer {
    pub fn of(m: &DataMatrix) -> Result<Self> {
        let scale = m
            .row_norms()
            .into_iter()
            .enumerate()
            .map(|(i, norm)| {
                if norm < ZERO_ROW_NORM {
                    Err(Error::ZeroRow(i))
                } else {
                    Ok(1.0 / norm)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { scale })
    }

    pub fn apply(&self, m: &DataMatrix) -> Result<DataMatrix> {
        m.scale_rows(&self.scale)
    }
}

/// Scales every row to unit Euclidean norm.
pub fn normalize_rows(m: &DataMatrix) -> Result<(DataMatrix, RowNormalizer)> {
    let normalizer = RowNormalizer::of(m)?;
    let normalized = normalizer.apply(m)?;
    Ok((normalized, normalizer))
}

/// Entry (i, j) is the cosine between row i of `m1` and row j of `m2`.
pub fn cosine_of_rows(m1: &DataMatrix, m2: &DataMatrix) -> Result<DataMatrix> {
    if m1.cols != m2.cols {
        return Err(Error::DimensionMismatch(format!(
            "rows of length {} vs {}",
            m1.cols, m2.cols
        )));
    }
    let (n1, _) = normalize_rows(m1)?;
    let (n2, _) = normalize_rows(m2)?;
    let mut sim = n1.matmul_transpose(&n2)?;
    sim.values.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded(rows: usize, cols: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>())
    }

    fn orthonormality_error(m: &DataMatrix) -> f64 {
        let gram = m.transpose().matmul(m).unwrap();
        gram.max_abs_diff(&DataMatrix::identity(m.cols())).unwrap()
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(DataMatrix::new(0, 2, vec![]).is_err());
        assert!(DataMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert_eq!(
            DataMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        );
    }

    #[test]
    fn svd_of_identity() {
        let f = svd(&DataMatrix::identity(3), 3).unwrap();
        for s in &f.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_of_diagonal() {
        let m = DataMatrix::diag(&[3.0, 2.0]);
        let f = svd(&m, 2).unwrap();
        assert!((f.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((f.singular_values[1] - 2.0).abs() < 1e-12);
        for factor in [&f.left, &f.right] {
            for i in 0..2 {
                for j in 0..2 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((factor.get(i, j).abs() - expected).abs() < 1e-12);
                }
            }
        }
        // sign convention pins the right vectors to +e_i
        assert!(f.right.get(0, 0) > 0.0 && f.right.get(1, 1) > 0.0);
    }

    #[test]
    fn svd_reconstructs_seeded_matrix() {
        let m = seeded(6, 4, 11);
        let f = svd(&m, 4).unwrap();
        assert!(f.reconstruct().frobenius_distance(&m).unwrap() < 1e-10);
        assert!(orthonormality_error(&f.left) < 1e-8);
        assert!(orthonormality_error(&f.right) < 1e-8);
        assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_of_wide_matrix() {
        let m = seeded(3, 7, 5);
        let f = svd(&m, 3).unwrap();
        assert_eq!(f.left.shape(), (3, 3));
        assert_eq!(f.right.shape(), (7, 3));
        assert!(f.reconstruct().frobenius_distance(&m).unwrap() < 1e-10);
    }

    #[test]
    fn svd_rank_errors() {
        let m = seeded(4, 3, 1);
        assert_eq!(svd(&m, 0), Err(Error::RankOutOfRange { rank: 0, max: 3 }));
        assert_eq!(svd(&m, 4), Err(Error::RankOutOfRange { rank: 4, max: 3 }));
    }

    #[test]
    fn truncated_svd_is_eckart_young_consistent() {
        let m = seeded(9, 5, 3);
        let full = svd(&m, 5).unwrap();
        let total = m.frobenius_norm_sq();
        for r in 1..=5 {
            let f = full.truncate(r).unwrap();
            let residual = m.frobenius_distance(&f.reconstruct()).unwrap().powi(2);
            let tail: f64 = full.singular_values[r..].iter().map(|s| s * s).sum();
            assert!((residual - tail).abs() < 1e-9 * total, "r={r}");
        }
    }

    #[test]
    fn normalize_rows_examples() {
        let m = DataMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let (n, omega) = normalize_rows(&m).unwrap();
        assert!((n.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((n.get(0, 1) - 0.8).abs() < 1e-15);
        assert!((omega.scale[0] - 0.2).abs() < 1e-15);

        let (n, omega) = normalize_rows(&DataMatrix::identity(3)).unwrap();
        assert_eq!(n, DataMatrix::identity(3));
        assert!(omega.scale.iter().all(|&s| s == 1.0));

        let z = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(normalize_rows(&z).unwrap_err(), Error::ZeroRow(1));
    }

    #[test]
    fn cosine_of_rows_examples() {
        let id = DataMatrix::identity(2);
        assert_eq!(cosine_of_rows(&id, &id).unwrap(), id);

        let a = seeded(5, 3, 21);
        let b = seeded(5, 3, 22);
        let sim = cosine_of_rows(&a, &b).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let (x, y) = (a.row(i), b.row(j));
                let mut num = 0.0;
                let mut nx = 0.0;
                let mut ny = 0.0;
                for t in 0..3 {
                    num += x[t] * y[t];
                    nx += x[t] * x[t];
                    ny += y[t] * y[t];
                }
                let expected = num / (nx.sqrt() * ny.sqrt());
                assert!((sim.get(i, j) - expected).abs() < 1e-12);
            }
        }

        assert!(matches!(
            cosine_of_rows(&a, &seeded(2, 4, 1)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let m = seeded(3, 4, 8);
        assert_eq!(DataMatrix::from_csv(&m.to_csv()).unwrap(), m);
        assert!(DataMatrix::from_csv("1,2\n3\n").is_err());
        assert!(DataMatrix::from_csv("1,x\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix() -> impl Strategy<Value = DataMatrix> {
            (1usize..7, 1usize..7).prop_flat_map(|(r, c)| {
                proptest::collection::vec(-10.0f64..10.0, r * c)
                    .prop_map(move |v| DataMatrix::new(r, c, v).unwrap())
            })
        }

        proptest! {
            #[test]
            fn singular_values_match_transpose(m in matrix()) {
                let r = m.rows().min(m.cols());
                let a = svd(&m, r).unwrap();
                let b = svd(&m.transpose(), r).unwrap();
                for (x, y) in a.singular_values.iter().zip(&b.singular_values) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }

            #[test]
            fn full_svd_reconstructs(m in matrix()) {
                let r = m.rows().min(m.cols());
                let f = svd(&m, r).unwrap();
                prop_assert!(f.reconstruct().frobenius_distance(&m).unwrap() < 1e-9 * (1.0 + m.frobenius_norm()));
                prop_assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
            }

            #[test]
            fn self_cosine_symmetric_unit_diagonal(m in matrix()) {
                prop_assume!(m.row_norms().iter().all(|&n| n > 1e-6));
                let s = cosine_of_rows(&m, &m).unwrap();
                for i in 0..s.rows() {
                    prop_assert!((s.get(i, i) - 1.0).abs() < 1e-12);
                    for j in 0..s.cols() {
                        prop_assert!((s.get(i, j) - s.get(j, i)).abs() < 1e-12);
                        prop_assert!(s.get(i, j).abs() <= 1.0);
                    }
                }
            }

            #[test]
            fn normalize_rows_idempotent(m in matrix()) {
                prop_assume!(m.row_norms().iter().all(|&n| n > 1e-6));
                let (once, _) = normalize_rows(&m).unwrap();
                let (twice, _) = normalize_rows(&once).unwrap();
                prop_assert!(once.max_abs_diff(&twice).unwrap() < 1e-12);
                for n in once.row_norms() {
                    prop_assert!((n - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
