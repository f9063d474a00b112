//! The gauge freedom of a factorization: diagonal rescalings `(A·D, B·D⁻¹)`
//! and joint rotations `(A·R, B·R)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::solvers::EmbeddingPair;

/// Diagonal of `D`; strictly positive so `D⁻¹` exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalScaling {
    entries: Vec<f64>,
}

impl DiagonalScaling {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidScaling("empty diagonal".into()));
        }
        if let Some((i, v)) = entries
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidScaling(format!(
                "entry {i} is {v}, must be finite and > 0"
            )));
        }
        Ok(Self { entries })
    }

    pub fn ones(k: usize) -> Self {
        Self {
            entries: vec![1.0; k],
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn inverse(&self) -> Vec<f64> {
        self.entries.iter().map(|d| 1.0 / d).collect()
    }

    /// Elementwise product, i.e. `D1·D2`.
    pub fn compose(&self, other: &DiagonalScaling) -> Result<DiagonalScaling> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch(format!(
                "composing scalings of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        DiagonalScaling::new(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    /// Every number in the text, in order, whether separated by commas or
    /// newlines.
    pub fn from_csv(text: &str) -> Result<Self> {
        let entries = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("scaling entry `{t}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }
}

/// Named choices of `D` derived from the training spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingFamily {
    /// `D = I`.
    Identity,
    /// `D = dMat((1 + λ/σ²)^{-1/2})`: for objective 1 this turns `B` into
    /// plain `V_k`.
    Collapse,
    /// `D = dMat((1 + λ/σ²)^{1/2})`: for objective 1 this turns `A` into `V_k`.
    Inverse,
    /// `D = dMat(σ^{-1/2})`, mirroring the objective-2 split.
    SymmetricMatching,
}

impl ScalingFamily {
    pub const ALL: [ScalingFamily; 4] = [
        ScalingFamily::Identity,
        ScalingFamily::Collapse,
        ScalingFamily::Inverse,
        ScalingFamily::SymmetricMatching,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ScalingFamily::Identity => "identity",
            ScalingFamily::Collapse => "collapse",
            ScalingFamily::Inverse => "inverse",
            ScalingFamily::SymmetricMatching => "symmetric-matching",
        }
    }
}

impl fmt::Display for ScalingFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ScalingFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScalingFamily::ALL
            .into_iter()
            .find(|f| f.tag() == s.trim())
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown scaling family `{s}` (expected identity, collapse, inverse or symmetric-matching)"
                ))
            })
    }
}

/// `(A·D, B·D⁻¹)`. The product `A·Bᵀ` is unchanged.
pub fn apply_scaling(pair: &EmbeddingPair, d: &DiagonalScaling) -> Result<EmbeddingPair> {
    if d.len() != pair.rank {
        return Err(Error::DimensionMismatch(format!(
            "scaling of length {} for rank {}",
            d.len(),
            pair.rank
        )));
    }
    let mut out = pair.clone();
    out.a = pair.a.scale_columns(d.entries())?;
    out.b = pair.b.scale_columns(&d.inverse())?;
    out.scaled = true;
    Ok(out)
}

/// The diagonal for a named family, computed from `pair.sigma` and
/// `pair.lambda`.
pub fn named_scaling(pair: &EmbeddingPair, family: ScalingFamily) -> Result<DiagonalScaling> {
    let lambda = pair.lambda;
    let shrink = |s: f64| {
        if lambda == 0.0 {
            1.0
        } else {
            1.0 / (1.0 + lambda / (s * s))
        }
    };
    let needs_positive = |i: usize, s: f64| {
        if s > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidScaling(format!(
                "family {family} needs a positive singular value, dimension {i} has {s}"
            )))
        }
    };
    let mut entries = Vec::with_capacity(pair.rank);
    for (i, &s) in pair.sigma.iter().enumerate() {
        let entry = match family {
            ScalingFamily::Identity => 1.0,
            ScalingFamily::Collapse => shrink(s).sqrt(),
            ScalingFamily::Inverse => {
                needs_positive(i, s)?;
                1.0 / shrink(s).sqrt()
            }
            ScalingFamily::SymmetricMatching => {
                needs_positive(i, s)?;
                (1.0 / s).sqrt()
            }
        };
        entries.push(entry);
    }
    DiagonalScaling::new(entries)
}

/// Seeded diagonal with entries `exp(u)`, `u ~ Uniform(−log_range, log_range)`.
pub fn random_scaling(k: usize, seed: u64, log_range: f64) -> DiagonalScaling {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let entries = (0..k)
        .map(|_| {
            if log_range > 0.0 {
                rng.gen_range(-log_range..log_range).exp()
            } else {
                1.0
            }
        })
        .collect();
    DiagonalScaling::new(entries).expect("exponentials are positive")
}

/// Orthogonal k×k matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationMatrix {
    values: DataMatrix,
}

impl RotationMatrix {
    /// Accepts `r` if `rᵀr` is the identity within 1e-8.
    pub fn new(r: DataMatrix) -> Result<Self> {
        if r.rows() != r.cols() {
            return Err(Error::Shape(format!(
                "rotation must be square, got {}x{}",
                r.rows(),
                r.cols()
            )));
        }
        let deviation = orthogonality_deviation(&r);
        if deviation > 1e-8 {
            return Err(Error::NotOrthogonal(deviation));
        }
        Ok(Self { values: r })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            values: DataMatrix::identity(k),
        }
    }

    pub fn matrix(&self) -> &DataMatrix {
        &self.values
    }

    pub fn size(&self) -> usize {
        self.values.rows()
    }
}

/// Max entry of `|rᵀr − I|`.
pub fn orthogonality_deviation(r: &DataMatrix) -> f64 {
    let gram = r.transpose().matmul(r).expect("square");
    gram.max_abs_diff(&DataMatrix::identity(r.cols()))
        .expect("same shape")
}

/// Orthonormalized seeded Gaussian matrix (modified Gram–Schmidt, applied
/// twice).
pub fn random_rotation(k: usize, seed: u64) -> RotationMatrix {
    assert!(k >= 1, "rotation size must be at least 1");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        // columns stored contiguously
        let mut cols: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let mut ok = true;
        for j in 0..k {
            for _ in 0..2 {
                for i in 0..j {
                    let proj: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                    let (done, rest) = cols.split_at_mut(j);
                    for (v, q) in rest[0].iter_mut().zip(&done[i]) {
                        *v -= proj * q;
                    }
                }
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            let values = DataMatrix::from_fn(k, k, |i, j| cols[j][i]);
            return RotationMatrix { values };
        }
    }
}

/// `(A·R, B·R)`.
pub fn apply_rotation(pair: &EmbeddingPair, r: &RotationMatrix) -> Result<EmbeddingPair> {
    if r.size() != pair.rank {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} rotation for rank {}",
            r.size(),
            r.size(),
            pair.rank
        )));
    }
    let mut out = pair.clone();
    out.a = pair.a.matmul(r.matrix())?;
    out.b = pair.b.matmul(r.matrix())?;
    out.rotated = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::normalize_rows;
    use crate::solvers::{
        objective1_loss, objective2_loss, predicted_scores, solve_objective1, solve_objective2,
        Objective,
    };

    fn seeded(rows: usize, cols: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        DataMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>())
    }

    fn pair_with_sigma(sigma: Vec<f64>, lambda: f64) -> EmbeddingPair {
        let k = sigma.len();
        let m = DataMatrix::identity(k);
        EmbeddingPair::new(m.clone(), m, lambda, Objective::ProductReg, sigma).unwrap()
    }

    #[test]
    fn scaling_validation() {
        assert!(DiagonalScaling::new(vec![1.0, 0.0]).is_err());
        assert!(DiagonalScaling::new(vec![-1.0]).is_err());
        assert!(DiagonalScaling::new(vec![f64::INFINITY]).is_err());
        assert!(DiagonalScaling::new(vec![]).is_err());
        let d = DiagonalScaling::from_csv("1.5\n2,0.25\n").unwrap();
        assert_eq!(d.entries(), &[1.5, 2.0, 0.25]);
    }

    #[test]
    fn unit_scaling_leaves_pair_unchanged() {
        let x = seeded(8, 5, 1);
        let pair = solve_objective1(&x, 3, 1.0).unwrap();
        let scaled = apply_scaling(&pair, &DiagonalScaling::ones(3)).unwrap();
        assert_eq!(scaled.a, pair.a);
        assert_eq!(scaled.b, pair.b);
        assert!(scaled.scaled);
        assert_eq!(scaled.objective, pair.objective);
        assert!(apply_scaling(&pair, &DiagonalScaling::ones(2)).is_err());
    }

    #[test]
    fn named_families() {
        let pair = pair_with_sigma(vec![2.0, 1.0], 1.0);
        let collapse = named_scaling(&pair, ScalingFamily::Collapse).unwrap();
        assert!((collapse.entries()[0] - 0.8f64.sqrt()).abs() < 1e-15);
        assert!((collapse.entries()[1] - 0.5f64.sqrt()).abs() < 1e-15);
        let inverse = named_scaling(&pair, ScalingFamily::Inverse).unwrap();
        assert!((inverse.entries()[0] - 1.25f64.sqrt()).abs() < 1e-15);
        assert!((inverse.entries()[1] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            named_scaling(&pair, ScalingFamily::Identity).unwrap(),
            DiagonalScaling::ones(2)
        );

        let pair = pair_with_sigma(vec![4.0, 1.0], 1.0);
        let sym = named_scaling(&pair, ScalingFamily::SymmetricMatching).unwrap();
        assert_eq!(sym.entries(), &[0.5, 1.0]);

        let degenerate = pair_with_sigma(vec![1.0, 0.0], 1.0);
        assert!(named_scaling(&degenerate, ScalingFamily::Inverse).is_err());
        assert!(named_scaling(&degenerate, ScalingFamily::SymmetricMatching).is_err());
    }

    #[test]
    fn family_tags_round_trip() {
        for family in ScalingFamily::ALL {
            assert_eq!(family.tag().parse::<ScalingFamily>().unwrap(), family);
        }
        assert!("bogus".parse::<ScalingFamily>().is_err());
    }

    #[test]
    fn scaling_changes_objective2_loss() {
        let x = seeded(8, 6, 2);
        let lambda = 0.5;
        let pair = solve_objective2(&x, 3, lambda).unwrap();
        let base = objective2_loss(&x, &pair.a, &pair.b, lambda).unwrap();
        let mut any_greater = false;
        for seed in 0..5 {
            let scaled = apply_scaling(&pair, &random_scaling(3, seed, 1.0)).unwrap();
            let l = objective2_loss(&x, &scaled.a, &scaled.b, lambda).unwrap();
            assert!(l >= base - 1e-12 * base);
            any_greater |= l > base * (1.0 + 1e-9);
        }
        assert!(any_greater);
    }

    #[test]
    fn rotations_are_orthogonal_and_seeded() {
        let r1 = random_rotation(1, 3);
        assert_eq!(r1.matrix().get(0, 0).abs(), 1.0);
        for k in [2, 5, 20] {
            let r = random_rotation(k, 7);
            assert!(orthogonality_deviation(r.matrix()) < 1e-10);
            assert_eq!(r, random_rotation(k, 7));
            let other = random_rotation(k, 8);
            assert!(r.matrix().frobenius_distance(other.matrix()).unwrap() > 1e-3);
        }
        assert!(matches!(
            RotationMatrix::new(DataMatrix::diag(&[1.0, 2.0])),
            Err(Error::NotOrthogonal(_))
        ));
    }

    #[test]
    fn rotation_keeps_scores() {
        let x = seeded(9, 6, 4);
        let pair = solve_objective2(&x, 4, 0.2).unwrap();
        let same = apply_rotation(&pair, &RotationMatrix::identity(4)).unwrap();
        assert_eq!(same.a, pair.a);
        let rotated = apply_rotation(&pair, &random_rotation(4, 1)).unwrap();
        let before = predicted_scores(&x, &pair).unwrap();
        let after = predicted_scores(&x, &rotated).unwrap();
        assert!(before.max_abs_diff(&after).unwrap() < 1e-10);
    }

    #[test]
    fn scalings_compose() {
        let x = seeded(8, 6, 5);
        let pair = solve_objective1(&x, 4, 0.3).unwrap();
        let (d1, d2) = (random_scaling(4, 1, 2.0), random_scaling(4, 2, 2.0));
        let twice = apply_scaling(&apply_scaling(&pair, &d1).unwrap(), &d2).unwrap();
        let once = apply_scaling(&pair, &d1.compose(&d2).unwrap()).unwrap();
        assert!(twice.a.max_abs_diff(&once.a).unwrap() < 1e-10);
        assert!(twice.b.max_abs_diff(&once.b).unwrap() < 1e-10);
    }

    #[test]
    fn normalization_cannot_absorb_scaling() {
        let x = seeded(10, 6, 6);
        let pair = solve_objective1(&x, 3, 1.0).unwrap();
        let d = random_scaling(3, 3, 1.5);
        let (lhs, _) = normalize_rows(&pair.b.scale_columns(&d.inverse()).unwrap()).unwrap();
        let (nb, _) = normalize_rows(&pair.b).unwrap();
        let rhs = nb.scale_columns(&d.inverse()).unwrap();
        assert!(lhs.frobenius_distance(&rhs).unwrap() > 1e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn product_and_loss_invariant_under_scaling(
                seed in 0u64..1000,
                entries in proptest::collection::vec(-3.0f64..3.0, 3),
                lambda in 0.0f64..5.0,
            ) {
                let x = seeded(7, 5, seed);
                let pair = solve_objective1(&x, 3, lambda).unwrap();
                let d = DiagonalScaling::new(entries.iter().map(|e| e.exp()).collect()).unwrap();
                let scaled = apply_scaling(&pair, &d).unwrap();
                prop_assert!(pair.product().max_abs_diff(&scaled.product()).unwrap() < 1e-10);
                let before = objective1_loss(&x, &pair.a, &pair.b, lambda).unwrap();
                let after = objective1_loss(&x, &scaled.a, &scaled.b, lambda).unwrap();
                prop_assert!((before - after).abs() <= 1e-9 * before);
                let s_before = predicted_scores(&x, &pair).unwrap();
                let s_after = predicted_scores(&x, &scaled).unwrap();
                prop_assert!(s_before.max_abs_diff(&s_after).unwrap() < 1e-10);
            }
        }
    }
}
