//! Item–item, user–user and user–item similarities of fitted embeddings.
//!
//! Item embeddings are the rows of `B`; user embeddings are the rows of `X·A`.
//! The cosine variants normalize rows after any rescaling has been applied,
//! so they change with the gauge `D` while the dot variant of user–item does
//! not.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{cosine_of_rows, DataMatrix, ZERO_ROW_NORM};
use crate::solvers::EmbeddingPair;

/// Default tie tolerance for [`ranking_equal`].
pub const RANKING_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityKind {
    ItemItem,
    UserUser,
    UserItem,
}

impl SimilarityKind {
    pub fn tag(self) -> &'static str {
        match self {
            SimilarityKind::ItemItem => "item-item",
            SimilarityKind::UserUser => "user-user",
            SimilarityKind::UserItem => "user-item",
        }
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "item-item" => Ok(SimilarityKind::ItemItem),
            "user-user" => Ok(SimilarityKind::UserUser),
            "user-item" => Ok(SimilarityKind::UserItem),
            other => Err(Error::InvalidArgument(format!(
                "unknown similarity kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Dot,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Dot => "dot",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cosine" => Ok(Metric::Cosine),
            "dot" => Ok(Metric::Dot),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: DataMatrix,
    pub kind: SimilarityKind,
    pub metric: Metric,
}

impl SimilarityMatrix {
    pub fn new(values: DataMatrix, kind: SimilarityKind, metric: Metric) -> Self {
        Self {
            values,
            kind,
            metric,
        }
    }
}

fn pairwise(lhs: &DataMatrix, rhs: &DataMatrix, metric: Metric) -> Result<DataMatrix> {
    match metric {
        Metric::Cosine => cosine_of_rows(lhs, rhs),
        Metric::Dot => lhs.matmul_transpose(rhs),
    }
}

fn user_embeddings(x: &DataMatrix, pair: &EmbeddingPair) -> Result<DataMatrix> {
    if x.cols() != pair.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} items but the embeddings cover {}",
            x.cols(),
            pair.n_items()
        )));
    }
    x.matmul(&pair.a)
}

/// Similarities between rows of `B`.
pub fn item_item(pair: &EmbeddingPair, metric: Metric) -> Result<SimilarityMatrix> {
    Ok(SimilarityMatrix::new(
        pairwise(&pair.b, &pair.b, metric)?,
        SimilarityKind::ItemItem,
        metric,
    ))
}

/// Similarities between rows of `X·A`.
pub fn user_user(x: &DataMatrix, pair: &EmbeddingPair, metric: Metric) -> Result<SimilarityMatrix> {
    let users = user_embeddings(x, pair)?;
    Ok(SimilarityMatrix::new(
        pairwise(&users, &users, metric)?,
        SimilarityKind::UserUser,
        metric,
    ))
}

/// Similarities between rows of `X·A` and rows of `B`; the dot metric gives
/// the model's predicted scores.
pub fn user_item(x: &DataMatrix, pair: &EmbeddingPair, metric: Metric) -> Result<SimilarityMatrix> {
    let users = user_embeddings(x, pair)?;
    Ok(SimilarityMatrix::new(
        pairwise(&users, &pair.b, metric)?,
        SimilarityKind::UserItem,
        metric,
    ))
}

pub fn compute(
    x: &DataMatrix,
    pair: &EmbeddingPair,
    kind: SimilarityKind,
    metric: Metric,
) -> Result<SimilarityMatrix> {
    match kind {
        SimilarityKind::ItemItem => item_item(pair, metric),
        SimilarityKind::UserUser => user_user(x, pair, metric),
        SimilarityKind::UserItem => user_item(x, pair, metric),
    }
}

/// Item–item similarity restricted to items with a nonzero embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredItemSimilarity {
    pub similarity: SimilarityMatrix,
    /// Original indices of the rows/columns of `similarity`, ascending.
    pub kept: Vec<usize>,
    /// Items whose row of `B` is zero.
    pub excluded: Vec<usize>,
}

/// Like [`item_item`], but items with an all-zero embedding are dropped and
/// listed instead of failing the whole matrix.
pub fn item_item_excluding_zero(
    pair: &EmbeddingPair,
    metric: Metric,
) -> Result<FilteredItemSimilarity> {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (i, norm) in pair.b.row_norms().into_iter().enumerate() {
        if norm < ZERO_ROW_NORM {
            excluded.push(i);
        } else {
            kept.push(i);
        }
    }
    if kept.is_empty() {
        return Err(Error::ZeroRow(0));
    }
    let b = pair.b.select_rows(&kept);
    Ok(FilteredItemSimilarity {
        similarity: SimilarityMatrix::new(pairwise(&b, &b, metric)?, SimilarityKind::ItemItem, metric),
        kept,
        excluded,
    })
}

/// Per row: true iff no pair of entries is ordered strictly one way in `s1`
/// and strictly the other way in `s2`, where "strictly" means by more than
/// `tol`.
pub fn ranking_equal(s1: &DataMatrix, s2: &DataMatrix, tol: f64) -> Result<Vec<bool>> {
    if s1.shape() != s2.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            s1.rows(),
            s1.cols(),
            s2.rows(),
            s2.cols()
        )));
    }
    Ok((0..s1.rows())
        .map(|u| rows_agree(s1.row(u), s2.row(u), tol))
        .collect())
}

fn rows_agree(r1: &[f64], r2: &[f64], tol: f64) -> bool {
    let mut order: Vec<usize> = (0..r1.len()).collect();
    order.sort_by(|&a, &b| r1[b].total_cmp(&r1[a]));
    for (pos, &hi) in order.iter().enumerate() {
        for &lo in &order[pos + 1..] {
            // r1[hi] >= r1[lo] by construction
            if r1[hi] - r1[lo] > tol && r2[lo] - r2[hi] > tol {
                return false;
            }
        }
    }
    true
}
