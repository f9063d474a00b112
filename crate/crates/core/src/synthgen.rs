//! Synthetic user-item interactions with planted item clusters.
//!
//! Items are assigned to clusters, each cluster gets a power-law exponent,
//! and items receive a Zipf-shaped baseline popularity by their rank within
//! their cluster. Each user draws cluster preferences from a symmetric
//! Dirichlet, an activity level from a bounded power law, and then that many
//! distinct items.
//!
//! Randomness comes from ChaCha20 seeded with `SimConfig::seed`. Every stage
//! reads its own ChaCha stream, in this order:
//!
//! | stream | stage                          |
//! |--------|--------------------------------|
//! | 0      | item cluster assignment        |
//! | 1      | per-cluster exponents          |
//! | 2      | popularities (deterministic)   |
//! | 3      | user cluster preferences       |
//! | 4      | per-user activity `k_u`        |
//! | 5      | per-user item picks            |

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// Smallest number of items any user interacts with.
pub const MIN_ITEMS_PER_USER: usize = 5;

/// Concentration of the symmetric Dirichlet over user cluster preferences.
pub const PREFERENCE_CONCENTRATION: f64 = 0.5;

#[derive(Debug, Clone, Copy)]
enum Stream {
    Clusters = 0,
    Exponents = 1,
    Preferences = 3,
    Activity = 4,
    Picks = 5,
}

fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    #[serde(rename = "C")]
    pub clusters: usize,
    pub cluster_probs: Vec<f64>,
    pub beta_item_min: f64,
    pub beta_item_max: f64,
    pub beta_user: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    /// 20,000 users, 1,000 items, 5 equally likely clusters.
    fn default() -> Self {
        Self::uniform(20_000, 1_000, 5, 0)
    }
}

impl SimConfig {
    /// Uniform cluster probabilities, item exponents in [0.25, 1.5], user
    /// exponent 0.5.
    pub fn uniform(n: usize, p: usize, clusters: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            clusters,
            cluster_probs: vec![1.0 / clusters.max(1) as f64; clusters],
            beta_item_min: 0.25,
            beta_item_max: 1.5,
            beta_user: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| {
            Err(Error::InvalidConfig {
                key: key.into(),
                reason,
            })
        };
        if self.n < 1 {
            return bad("n", "must be at least 1".into());
        }
        if self.p < 1 {
            return bad("p", "must be at least 1".into());
        }
        if self.clusters < 1 {
            return bad("C", "must be at least 1".into());
        }
        if self.cluster_probs.len() != self.clusters {
            return bad(
                "cluster_probs",
                format!("expected {} entries, got {}", self.clusters, self.cluster_probs.len()),
            );
        }
        if self.cluster_probs.iter().any(|&q| !q.is_finite() || q < 0.0) {
            return bad("cluster_probs", "entries must be finite and nonnegative".into());
        }
        let total: f64 = self.cluster_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad("cluster_probs", format!("sums to {total}, expected 1"));
        }
        if !self.beta_item_min.is_finite() || self.beta_item_min < 0.0 {
            return bad("beta_item_min", "must be finite and nonnegative".into());
        }
        if !self.beta_item_max.is_finite() || self.beta_item_max < self.beta_item_min {
            return bad("beta_item_max", "must be finite and >= beta_item_min".into());
        }
        if !self.beta_user.is_finite() || self.beta_user < 0.0 {
            return bad("beta_user", "must be finite and nonnegative".into());
        }
        Ok(())
    }

    /// Inclusive bounds on `k_u`: `[min(5, p/2), max(p/2, 1)]`.
    pub fn activity_bounds(&self) -> (usize, usize) {
        let k_max = (self.p / 2).max(1);
        (MIN_ITEMS_PER_USER.min(k_max), k_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub item_cluster: Vec<usize>,
    pub item_popularity: Vec<f64>,
    pub cluster_exponents: Vec<f64>,
    /// n rows of C cluster preferences, each summing to 1.
    pub user_prefs: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn n_items(&self) -> usize {
        self.item_cluster.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_prefs.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_exponents.len()
    }

    /// Items sorted by cluster, then by descending popularity, then by index.
    pub fn display_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_items()).collect();
        order.sort_by(|&a, &b| {
            self.item_cluster[a]
                .cmp(&self.item_cluster[b])
                .then(self.item_popularity[b].total_cmp(&self.item_popularity[a]))
                .then(a.cmp(&b))
        });
        order
    }

    /// Restriction to a subset of items (indices into the original order).
    pub fn select_items(&self, items: &[usize]) -> GroundTruth {
        GroundTruth {
            item_cluster: items.iter().map(|&i| self.item_cluster[i]).collect(),
            item_popularity: items.iter().map(|&i| self.item_popularity[i]).collect(),
            cluster_exponents: self.cluster_exponents.clone(),
            user_prefs: self.user_prefs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSample {
    /// n×p binary matrix.
    pub matrix: DataMatrix,
    pub items_per_user: Vec<usize>,
}

fn sample_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (c, &q) in probs.iter().enumerate() {
        if q > 0.0 {
            last_positive = c;
            acc += q;
            if u < acc {
                return c;
            }
        }
    }
    last_positive
}

/// Cluster labels, exponents, Zipf popularities and user preferences.
pub fn sample_ground_truth(config: &SimConfig) -> Result<GroundTruth> {
    config.validate()?;
    let c = config.clusters;

    let mut rng = stream_rng(config.seed, Stream::Clusters);
    let item_cluster: Vec<usize> = (0..config.p)
        .map(|_| sample_categorical(&mut rng, &config.cluster_probs))
        .collect();

    let mut rng = stream_rng(config.seed, Stream::Exponents);
    let cluster_exponents: Vec<f64> = (0..c)
        .map(|_| {
            if config.beta_item_max > config.beta_item_min {
                rng.gen_range(config.beta_item_min..config.beta_item_max)
            } else {
                config.beta_item_min
            }
        })
        .collect();

    // p_i ∝ rank^(-β_c), rank counted in generation order within the cluster,
    // normalized so each cluster's popularities sum to 1.
    let mut item_popularity = vec![0.0; config.p];
    let mut cluster_mass = vec![0.0; c];
    let mut seen = vec![0usize; c];
    for (i, &ci) in item_cluster.iter().enumerate() {
        seen[ci] += 1;
        let weight = (seen[ci] as f64).powf(-cluster_exponents[ci]);
        item_popularity[i] = weight;
        cluster_mass[ci] += weight;
    }
    for (i, &ci) in item_cluster.iter().enumerate() {
        item_popularity[i] /= cluster_mass[ci];
    }

    let mut rng = stream_rng(config.seed, Stream::Preferences);
    let gamma = Gamma::new(PREFERENCE_CONCENTRATION, 1.0).expect("valid gamma parameters");
    let user_prefs = (0..config.n)
        .map(|_| loop {
            let draws: Vec<f64> = (0..c).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            if total > 0.0 && total.is_finite() {
                break draws.into_iter().map(|g| g / total).collect::<Vec<_>>();
            }
        })
        .collect();

    Ok(GroundTruth {
        item_cluster,
        item_popularity,
        cluster_exponents,
        user_prefs,
    })
}

/// `p_ui = p_{u,c_i}·p_i / Σ_i p_{u,c_i}·p_i`.
pub fn user_item_probabilities(gt: &GroundTruth, user: usize) -> Result<Vec<f64>> {
    let prefs = gt.user_prefs.get(user).ok_or_else(|| {
        Error::InvalidArgument(format!("user {user} out of range 0..{}", gt.n_users()))
    })?;
    let weights: Vec<f64> = gt
        .item_cluster
        .iter()
        .zip(&gt.item_popularity)
        .map(|(&c, &pop)| prefs[c] * pop)
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        // All preference mass sits on empty clusters.
        let uniform = 1.0 / gt.n_items() as f64;
        return Ok(vec![uniform; gt.n_items()]);
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

fn sample_activity<R: Rng>(rng: &mut R, config: &SimConfig) -> usize {
    let (k_min, k_max) = config.activity_bounds();
    let u: f64 = rng.gen();
    let raw = (k_min as f64) * u.powf(-config.beta_user);
    if !raw.is_finite() || raw >= k_max as f64 {
        return k_max;
    }
    (raw.round() as usize).clamp(k_min, k_max)
}

/// Sequential draws without replacement, renormalizing over the items not yet
/// picked. Falls back to uniform over the remainder once its mass is zero.
fn sample_without_replacement<R: Rng>(rng: &mut R, probs: &[f64], k: usize) -> Vec<usize> {
    let mut taken = vec![false; probs.len()];
    let mut picks = Vec::with_capacity(k);
    for _ in 0..k {
        let mass: f64 = probs
            .iter()
            .zip(&taken)
            .filter(|(_, &t)| !t)
            .map(|(q, _)| q)
            .sum();
        let use_uniform = mass <= 0.0;
        let remaining = probs.len() - picks.len();
        let target = rng.gen::<f64>() * if use_uniform { remaining as f64 } else { mass };
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_free = 0;
        for (i, &q) in probs.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let w = if use_uniform { 1.0 } else { q };
            if w <= 0.0 {
                continue;
            }
            last_free = i;
            acc += w;
            if target < acc {
                chosen = Some(i);
                break;
            }
        }
        let pick = chosen.unwrap_or(last_free);
        taken[pick] = true;
        picks.push(pick);
    }
    picks
}

/// Draws the full interaction matrix together with its ground truth.
pub fn sample_interactions(config: &SimConfig) -> Result<(InteractionSample, GroundTruth)> {
    let gt = sample_ground_truth(config)?;

    let mut rng = stream_rng(config.seed, Stream::Activity);
    let items_per_user: Vec<usize> = (0..config.n)
        .map(|_| sample_activity(&mut rng, config))
        .collect();

    let mut rng = stream_rng(config.seed, Stream::Picks);
    let mut values = vec![0.0; config.n * config.p];
    for (u, &k_u) in items_per_user.iter().enumerate() {
        let probs = user_item_probabilities(&gt, u)?;
        for item in sample_without_replacement(&mut rng, &probs, k_u) {
            values[u * config.p + item] = 1.0;
        }
    }
    let matrix = DataMatrix::new(config.n, config.p, values)?;
    Ok((
        InteractionSample {
            matrix,
            items_per_user,
        },
        gt,
    ))
}

/// Dense `rows × cols` matrix with entries uniform in [0, 1), for checks that
/// need a generic full-rank X.
pub fn dense_uniform(rows: usize, cols: usize, seed: u64) -> Result<DataMatrix> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let values = (0..rows * cols).map(|_| rng.gen::<f64>()).collect();
    DataMatrix::new(rows, cols, values)
}

/// p×p indicator of shared cluster membership.
pub fn ground_truth_similarity(gt: &GroundTruth) -> DataMatrix {
    let p = gt.n_items();
    DataMatrix::from_fn(p, p, |i, j| {
        if gt.item_cluster[i] == gt.item_cluster[j] {
            1.0
        } else {
            0.0
        }
    })
}
