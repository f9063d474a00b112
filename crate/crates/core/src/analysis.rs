//! Audits of how modeling choices move item–item similarities.
//!
//! [`cluster_contrast`] scores how well a similarity matrix separates the
//! planted clusters. [`audit_full_rank`] checks the exact identities that hold
//! for the product-regularized model at `k = p`. [`compare_configurations`]
//! runs a plan of (objective, λ, k, D family) entries against one dataset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{cosine_of_rows, svd, DataMatrix, SvdFactors, ZERO_ROW_NORM};
use crate::rescale::{apply_scaling, named_scaling, random_scaling, ScalingFamily};
use crate::similarity::{
    item_item, item_item_excluding_zero, ranking_equal, user_item, user_user, Metric,
    SimilarityKind, SimilarityMatrix, RANKING_TIE_TOL,
};
use crate::solvers::{predicted_scores, solve_from_svd, Objective};
use crate::synthgen::GroundTruth;

/// Tolerance for the collapse and raw-data identities.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Relative tolerance for score invariance under rescaling.
pub const PRODUCT_INVARIANCE_TOL: f64 = 1e-8;
/// Number of random diagonals tried by the invariance check.
pub const INVARIANCE_TRIALS: u64 = 5;

/// Mean same-cluster similarity minus mean cross-cluster similarity, over
/// off-diagonal pairs. A mean with no pairs to average is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterContrast {
    pub within_mean: Option<f64>,
    pub between_mean: Option<f64>,
    pub contrast: Option<f64>,
}

pub fn cluster_contrast(s: &SimilarityMatrix, gt: &GroundTruth) -> Result<ClusterContrast> {
    if s.kind != SimilarityKind::ItemItem {
        return Err(Error::InvalidArgument(format!(
            "cluster contrast needs an item-item matrix, got {}",
            s.kind.tag()
        )));
    }
    let p = gt.n_items();
    if s.values.shape() != (p, p) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} similarity for {p} items",
            s.values.rows(),
            s.values.cols()
        )));
    }
    let (mut within, mut n_within) = (0.0, 0usize);
    let (mut between, mut n_between) = (0.0, 0usize);
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let v = s.values.get(i, j);
            if gt.item_cluster[i] == gt.item_cluster[j] {
                within += v;
                n_within += 1;
            } else {
                between += v;
                n_between += 1;
            }
        }
    }
    let within_mean = (n_within > 0).then(|| within / n_within as f64);
    let between_mean = (n_between > 0).then(|| between / n_between as f64);
    let contrast = match (within_mean, between_mean) {
        (Some(w), Some(b)) => Some(w - b),
        _ => None,
    };
    Ok(ClusterContrast {
        within_mean,
        between_mean,
        contrast,
    })
}

/// One pass/fail line of the full-rank audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub description: String,
    /// Measured deviation (or agreement fraction for the ranking check).
    pub value: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
    /// Why the check did not apply, if it did not.
    pub skipped: Option<String>,
}

impl IdentityCheck {
    fn at_most(name: &str, description: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            value: Some(value),
            threshold,
            passed: value.is_finite() && value <= threshold,
            skipped: None,
        }
    }

    fn skipped(name: &str, description: &str, threshold: f64, reason: String) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            value: None,
            threshold,
            passed: true,
            skipped: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullRankReport {
    pub lambda: f64,
    pub n_users: usize,
    pub n_items: usize,
    /// Number of latent dimensions actually fitted.
    pub rank: usize,
    /// Latent dimensions dropped because their singular value is zero.
    pub zero_sigma_dimensions: Vec<usize>,
    pub checks: Vec<IdentityCheck>,
}

impl FullRankReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Checks the exact full-rank identities of the product-regularized model:
///
/// * (a) `collapse` turns item–item cosine into the identity,
/// * (b) `inverse` turns user–user cosine into the cosine of the raw rows of X,
/// * (c) under `collapse`, user–item cosine ranks items like the dot product,
/// * (d) predicted scores do not move under random diagonal rescalings.
///
/// Dimensions with a zero singular value are dropped and listed; (a) and (c)
/// only hold when none are dropped and are skipped otherwise.
pub fn audit_full_rank(x: &DataMatrix, lambda: f64) -> Result<FullRankReport> {
    let (n, p) = x.shape();
    let factors = svd(x, n.min(p))?;
    let threshold = factors.zero_threshold();
    let rank = factors
        .singular_values
        .iter()
        .take_while(|&&s| s > threshold)
        .count();
    if rank == 0 {
        return Err(Error::InvalidArgument("X has no positive singular value".into()));
    }
    let zero_sigma_dimensions: Vec<usize> = (rank..p).collect();
    let pair = solve_from_svd(&factors, rank, lambda, Objective::ProductReg)?;
    let full = rank == p;
    let not_full = || {
        format!(
            "identity requires k = p = {p}; {} zero-sigma dimensions were dropped",
            zero_sigma_dimensions.len()
        )
    };

    let collapse = apply_scaling(&pair, &named_scaling(&pair, ScalingFamily::Collapse)?)?;
    let inverse = apply_scaling(&pair, &named_scaling(&pair, ScalingFamily::Inverse)?)?;

    let (a_name, a_desc) = (
        "collapse_item_identity",
        "max |off-diagonal| of item-item cosine under the collapse scaling",
    );
    let check_a = if full {
        let s = item_item(&collapse, Metric::Cosine)?;
        let off = s.values.max_abs_diff(&DataMatrix::identity(p))?;
        IdentityCheck::at_most(a_name, a_desc, off, IDENTITY_TOL)
    } else {
        IdentityCheck::skipped(a_name, a_desc, IDENTITY_TOL, not_full())
    };

    let uu = user_user(x, &inverse, Metric::Cosine)?;
    let raw = cosine_of_rows(x, x)?;
    let check_b = IdentityCheck::at_most(
        "inverse_user_raw",
        "Frobenius distance between user-user cosine under the inverse scaling and cosine of the rows of X",
        uu.values.frobenius_distance(&raw)?,
        IDENTITY_TOL,
    );

    let (c_name, c_desc) = (
        "collapse_ranking",
        "fraction of users whose user-item cosine ranking equals the dot-product ranking under the collapse scaling",
    );
    let check_c = if full {
        let cos = user_item(x, &collapse, Metric::Cosine)?;
        let dot = user_item(x, &collapse, Metric::Dot)?;
        let agree = ranking_equal(&cos.values, &dot.values, RANKING_TIE_TOL)?;
        let fraction = agree.iter().filter(|&&b| b).count() as f64 / agree.len() as f64;
        IdentityCheck {
            name: c_name.into(),
            description: c_desc.into(),
            value: Some(fraction),
            threshold: 1.0,
            passed: fraction == 1.0,
            skipped: None,
        }
    } else {
        IdentityCheck::skipped(c_name, c_desc, 1.0, not_full())
    };

    let base = predicted_scores(x, &pair)?;
    let base_norm = base.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for seed in 0..INVARIANCE_TRIALS {
        let scaled = apply_scaling(&pair, &random_scaling(rank, seed, 2.0))?;
        let moved = predicted_scores(x, &scaled)?.frobenius_distance(&base)?;
        worst = worst.max(moved / base_norm);
    }
    let check_d = IdentityCheck::at_most(
        "product_invariance",
        "max relative Frobenius change of predicted scores over seeded random diagonal scalings",
        worst,
        PRODUCT_INVARIANCE_TOL,
    );

    Ok(FullRankReport {
        lambda,
        n_users: n,
        n_items: p,
        rank,
        zero_sigma_dimensions,
        checks: vec![check_a, check_b, check_c, check_d],
    })
}

/// One configuration to fit and compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub objective: Objective,
    pub lambda: f64,
    pub rank: usize,
    #[serde(default = "default_family")]
    pub family: ScalingFamily,
    #[serde(default = "default_metric")]
    pub metric: Metric,
}

fn default_family() -> ScalingFamily {
    ScalingFamily::Identity
}

fn default_metric() -> Metric {
    Metric::Cosine
}

impl PlanEntry {
    pub fn new(objective: Objective, lambda: f64, rank: usize, family: ScalingFamily) -> Self {
        Self {
            objective,
            lambda,
            rank,
            family,
            metric: Metric::Cosine,
        }
    }

    /// File-name friendly identifier, e.g. `obj1-lambda10000-k50-collapse-cosine`.
    pub fn label(&self) -> String {
        format!(
            "obj{}-lambda{}-k{}-{}-{}",
            self.objective.number(),
            self.lambda,
            self.rank,
            self.family,
            self.metric
        )
    }
}

/// Product regularization at λ = 10,000 under the collapse, identity and
/// inverse scalings, plus split regularization at λ = 100.
pub fn default_plan(rank: usize) -> Vec<PlanEntry> {
    let mut plan: Vec<PlanEntry> = [
        ScalingFamily::Collapse,
        ScalingFamily::Identity,
        ScalingFamily::Inverse,
    ]
    .into_iter()
    .map(|family| PlanEntry::new(Objective::ProductReg, 10_000.0, rank, family))
    .collect();
    plan.push(PlanEntry::new(
        Objective::SplitReg,
        100.0,
        rank,
        ScalingFamily::Identity,
    ));
    plan
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub label: String,
    pub entry: PlanEntry,
    /// Diagonal of the applied scaling.
    pub scaling: Vec<f64>,
    pub contrast: ClusterContrast,
    /// Items left out because their embedding is zero.
    pub excluded_items: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub n_users: usize,
    pub n_items: usize,
    pub n_clusters: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub provenance: Provenance,
    pub entries: Vec<EntryReport>,
    pub full_rank: Option<FullRankReport>,
}

/// Item–item similarity of one plan entry, rows and columns in display order
/// (cluster, then descending popularity).
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSimilarity {
    pub label: String,
    pub similarity: SimilarityMatrix,
    /// Original item index of each row/column.
    pub item_order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub report: AuditReport,
    /// One per entry with at least one nonzero item embedding.
    pub matrices: Vec<OrderedSimilarity>,
}

fn run_entry(
    factors: &SvdFactors,
    gt: &GroundTruth,
    display: &[usize],
    entry: &PlanEntry,
) -> Result<(EntryReport, Option<OrderedSimilarity>)> {
    let p = gt.n_items();
    let pair = solve_from_svd(factors, entry.rank, entry.lambda, entry.objective)?;
    let d = named_scaling(&pair, entry.family)?;
    let pair = apply_scaling(&pair, &d)?;
    let label = entry.label();
    let mut report = EntryReport {
        label: label.clone(),
        entry: entry.clone(),
        scaling: d.entries().to_vec(),
        contrast: ClusterContrast {
            within_mean: None,
            between_mean: None,
            contrast: None,
        },
        excluded_items: Vec::new(),
        warnings: pair.warnings.clone(),
    };
    if pair.b.row_norms().iter().all(|&r| r < ZERO_ROW_NORM) {
        report.excluded_items = (0..p).collect();
        report
            .warnings
            .push("every item embedding is zero; similarity is undefined".into());
        return Ok((report, None));
    }
    let filtered = item_item_excluding_zero(&pair, entry.metric)?;
    report.contrast = cluster_contrast(&filtered.similarity, &gt.select_items(&filtered.kept))?;

    let mut position = vec![usize::MAX; p];
    for (pos, &item) in filtered.kept.iter().enumerate() {
        position[item] = pos;
    }
    let item_order: Vec<usize> = display
        .iter()
        .copied()
        .filter(|&i| position[i] != usize::MAX)
        .collect();
    let local: Vec<usize> = item_order.iter().map(|&i| position[i]).collect();
    let ordered = SimilarityMatrix::new(
        filtered.similarity.values.permute_symmetric(&local)?,
        SimilarityKind::ItemItem,
        entry.metric,
    );
    report.excluded_items = filtered.excluded;
    Ok((
        report,
        Some(OrderedSimilarity {
            label,
            similarity: ordered,
            item_order,
        }),
    ))
}

/// Fits every plan entry on `x` and scores its item–item similarity against
/// the planted clusters. Entries run in parallel; output order follows the
/// plan. When an entry has `k = p` with the product objective, the full-rank
/// audit is attached for the first such λ.
pub fn compare_configurations(
    x: &DataMatrix,
    gt: &GroundTruth,
    plan: &[PlanEntry],
) -> Result<Comparison> {
    let (n, p) = x.shape();
    if gt.n_items() != p {
        return Err(Error::DimensionMismatch(format!(
            "ground truth covers {} items, X has {p}",
            gt.n_items()
        )));
    }
    let max_rank = n.min(p);
    let mut needed = 0;
    for entry in plan {
        if entry.rank == 0 || entry.rank > max_rank {
            return Err(Error::RankOutOfRange {
                rank: entry.rank,
                max: max_rank,
            });
        }
        needed = needed.max(entry.rank);
    }
    let factors = if plan.is_empty() {
        None
    } else {
        Some(svd(x, needed)?)
    };
    let display = gt.display_order();

    let factors = factors.as_ref();
    let results = plan
        .par_iter()
        .map(|entry| run_entry(factors.expect("non-empty plan"), gt, &display, entry))
        .collect::<Result<Vec<_>>>()?;

    let full_rank = plan
        .iter()
        .find(|e| e.rank == p && e.objective == Objective::ProductReg)
        .map(|e| audit_full_rank(x, e.lambda))
        .transpose()?;

    let (entries, matrices): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let matrices = matrices.into_iter().flatten().collect();
    Ok(Comparison {
        report: AuditReport {
            provenance: Provenance {
                n_users: n,
                n_items: p,
                n_clusters: gt.n_clusters(),
                seed: None,
            },
            entries,
            full_rank,
        },
        matrices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{ground_truth_similarity, sample_interactions, SimConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded(rows: usize, cols: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>())
    }

    fn toy_truth(clusters: &[usize]) -> GroundTruth {
        GroundTruth {
            item_cluster: clusters.to_vec(),
            item_popularity: vec![1.0; clusters.len()],
            cluster_exponents: vec![1.0; clusters.iter().max().unwrap() + 1],
            user_prefs: vec![],
        }
    }

    fn item_matrix(values: DataMatrix) -> SimilarityMatrix {
        SimilarityMatrix::new(values, SimilarityKind::ItemItem, Metric::Cosine)
    }

    #[test]
    fn contrast_of_ground_truth_is_one() {
        let gt = toy_truth(&[0, 1, 0, 2, 1, 1]);
        let c = cluster_contrast(&item_matrix(ground_truth_similarity(&gt)), &gt).unwrap();
        assert_eq!(c.within_mean, Some(1.0));
        assert_eq!(c.between_mean, Some(0.0));
        assert_eq!(c.contrast, Some(1.0));
    }

    #[test]
    fn constant_similarity_has_no_contrast() {
        let gt = toy_truth(&[0, 1, 0, 1]);
        let s = item_matrix(DataMatrix::from_fn(4, 4, |_, _| 0.3));
        let c = cluster_contrast(&s, &gt).unwrap();
        assert!(c.contrast.unwrap().abs() < 1e-15);
    }

    #[test]
    fn undefined_means_are_absent() {
        let gt = toy_truth(&[0, 0, 0]);
        let c = cluster_contrast(&item_matrix(DataMatrix::identity(3)), &gt).unwrap();
        assert_eq!(c.between_mean, None);
        assert_eq!(c.contrast, None);
        let gt = toy_truth(&[0, 1, 2]);
        let c = cluster_contrast(&item_matrix(DataMatrix::identity(3)), &gt).unwrap();
        assert_eq!(c.within_mean, None);
    }

    #[test]
    fn contrast_rejects_wrong_inputs() {
        let gt = toy_truth(&[0, 1]);
        let user = SimilarityMatrix::new(DataMatrix::identity(2), SimilarityKind::UserUser, Metric::Cosine);
        assert!(cluster_contrast(&user, &gt).is_err());
        assert!(cluster_contrast(&item_matrix(DataMatrix::identity(3)), &gt).is_err());
    }

    #[test]
    fn full_rank_audit_passes_on_dense_data() {
        let x = seeded(60, 12, 1);
        let report = audit_full_rank(&x, 5.0).unwrap();
        assert!(report.all_passed(), "{report:#?}");
        assert!(report.zero_sigma_dimensions.is_empty());
        assert_eq!(report.checks.len(), 4);
        for check in &report.checks {
            assert!(check.value.unwrap().is_finite() && check.value.unwrap() >= 0.0);
        }
    }

    #[test]
    fn full_rank_audit_without_regularization() {
        let x = seeded(40, 10, 2);
        let report = audit_full_rank(&x, 0.0).unwrap();
        assert!(report.checks[0].passed && report.checks[2].passed);
    }

    #[test]
    fn full_rank_audit_reports_zero_sigma_dimensions() {
        let base = seeded(30, 5, 3);
        // sixth column repeats the first, so one singular value is zero
        let x = DataMatrix::from_fn(30, 6, |i, j| base.get(i, if j == 5 { 0 } else { j }));
        let report = audit_full_rank(&x, 1.0).unwrap();
        assert_eq!(report.rank, 5);
        assert_eq!(report.zero_sigma_dimensions, vec![5]);
        assert!(report.checks[0].skipped.is_some());
        assert!(report.checks[2].skipped.is_some());
        assert!(report.all_passed(), "{report:#?}");
    }

    #[test]
    fn labels_are_stable() {
        let e = PlanEntry::new(Objective::ProductReg, 10_000.0, 50, ScalingFamily::Collapse);
        assert_eq!(e.label(), "obj1-lambda10000-k50-collapse-cosine");
        let e = PlanEntry::new(Objective::SplitReg, 0.5, 3, ScalingFamily::SymmetricMatching);
        assert_eq!(e.label(), "obj2-lambda0.5-k3-symmetric-matching-cosine");
    }

    #[test]
    fn default_plan_shape() {
        let plan = default_plan(50);
        assert_eq!(plan.len(), 4);
        assert!(plan[..3].iter().all(|e| e.objective == Objective::ProductReg && e.lambda == 10_000.0));
        assert_eq!(plan[3].objective, Objective::SplitReg);
        assert_eq!(plan[3].lambda, 100.0);
        assert!(plan.iter().all(|e| e.rank == 50));
    }

    #[test]
    fn single_entry_comparison() {
        let (sample, gt) = sample_interactions(&SimConfig::uniform(300, 40, 3, 5)).unwrap();
        let plan = vec![PlanEntry::new(Objective::ProductReg, 10.0, 5, ScalingFamily::Identity)];
        let cmp = compare_configurations(&sample.matrix, &gt, &plan).unwrap();
        assert_eq!(cmp.report.entries.len(), 1);
        assert_eq!(cmp.matrices.len(), 1);
        assert!(cmp.report.full_rank.is_none());
        let ordered = &cmp.matrices[0];
        assert_eq!(ordered.item_order, gt.display_order());
        let again = compare_configurations(&sample.matrix, &gt, &plan).unwrap();
        assert_eq!(cmp, again);
    }

    #[test]
    fn comparison_attaches_full_rank_audit() {
        let (sample, gt) = sample_interactions(&SimConfig::uniform(400, 12, 2, 6)).unwrap();
        let plan = vec![PlanEntry::new(Objective::ProductReg, 1.0, 12, ScalingFamily::Collapse)];
        let cmp = compare_configurations(&sample.matrix, &gt, &plan).unwrap();
        assert!(cmp.report.full_rank.is_some());
    }

    #[test]
    fn fully_shrunk_entry_has_no_contrast() {
        let (sample, gt) = sample_interactions(&SimConfig::uniform(60, 10, 2, 8)).unwrap();
        let plan = vec![
            PlanEntry::new(Objective::SplitReg, 1e6, 3, ScalingFamily::Identity),
            PlanEntry::new(Objective::ProductReg, 1.0, 3, ScalingFamily::Identity),
        ];
        let cmp = compare_configurations(&sample.matrix, &gt, &plan).unwrap();
        let first = &cmp.report.entries[0];
        assert_eq!(first.contrast.contrast, None);
        assert_eq!(first.excluded_items.len(), 10);
        assert!(!first.warnings.is_empty());
        assert_eq!(cmp.matrices.len(), 1);
        assert_eq!(cmp.matrices[0].label, plan[1].label());
    }

    #[test]
    fn comparison_validates_rank() {
        let (sample, gt) = sample_interactions(&SimConfig::uniform(50, 10, 2, 7)).unwrap();
        let plan = vec![PlanEntry::new(Objective::ProductReg, 1.0, 11, ScalingFamily::Identity)];
        assert!(matches!(
            compare_configurations(&sample.matrix, &gt, &plan),
            Err(Error::RankOutOfRange { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::{prop_assert, proptest};

        proptest! {
            #[test]
            fn contrast_is_permutation_invariant(
                clusters in proptest::collection::vec(0usize..3, 2..12),
                seed in 0u64..1000,
                perm_seed in 0u64..1000,
            ) {
                let p = clusters.len();
                let gt = toy_truth(&clusters);
                let raw = seeded(p, p, seed);
                let sym = DataMatrix::from_fn(p, p, |i, j| raw.get(i, j) + raw.get(j, i));
                let s = item_matrix(sym.clone());
                let before = cluster_contrast(&s, &gt).unwrap();

                let mut order: Vec<usize> = (0..p).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
                for i in (1..p).rev() {
                    order.swap(i, rng.gen_range(0..=i));
                }
                let permuted = item_matrix(sym.permute_symmetric(&order).unwrap());
                let permuted_gt = gt.select_items(&order);
                let after = cluster_contrast(&permuted, &permuted_gt).unwrap();
                match (before.contrast, after.contrast) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                    (None, None) => {}
                    other => prop_assert!(false, "{other:?}"),
                }
            }
        }
    }
}
