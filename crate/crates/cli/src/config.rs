//! JSON run configuration. Every section and key is optional; command-line
//! flags are folded in before defaults are filled.

use std::path::{Path, PathBuf};

use cosine_audit::analysis::PlanEntry;
use cosine_audit::synthgen::SimConfig;
use cosine_audit::{Error, Metric, Objective, ScalingFamily, SimilarityKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Rank used when neither the config nor `--rank` gives one.
pub const DEFAULT_RANK: usize = 50;
/// λ for the full-rank check when none is given.
pub const DEFAULT_FULLRANK_LAMBDA: f64 = 100.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Vec<PlanEntry>>,
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_item_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_item_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_user: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SimSection {
    /// Fills gaps from the default setup (uniform cluster probabilities) and
    /// validates.
    pub fn resolve(&self) -> CliResult<SimConfig> {
        let base = SimConfig::default();
        let clusters = self.clusters.unwrap_or(base.clusters);
        let mut cfg = SimConfig::uniform(
            self.n.unwrap_or(base.n),
            self.p.unwrap_or(base.p),
            clusters,
            self.seed.unwrap_or(base.seed),
        );
        if let Some(probs) = &self.cluster_probs {
            cfg.cluster_probs = probs.clone();
        }
        cfg.beta_item_min = self.beta_item_min.unwrap_or(cfg.beta_item_min);
        cfg.beta_item_max = self.beta_item_max.unwrap_or(cfg.beta_item_max);
        cfg.beta_user = self.beta_user.unwrap_or(cfg.beta_user);
        cfg.validate().map_err(|e| match e {
            Error::InvalidConfig { key, reason } => CliError::config(format!("sim.{key}"), reason),
            other => CliError::config("sim", other),
        })?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<ScalingFamily>,
    /// CSV file holding a literal diagonal; takes precedence over `family`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardize: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<SimilarityKind>,
    /// Similarity on rows/columns of `X·A·Bᵀ` instead of the embeddings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backproject: Option<bool>,
}

impl SolveSection {
    pub fn objective(&self) -> Objective {
        self.objective.unwrap_or(Objective::ProductReg)
    }

    /// 10,000 for objective 1, 100 for objective 2.
    pub fn lambda(&self) -> CliResult<f64> {
        let lambda = self.lambda.unwrap_or(match self.objective() {
            Objective::ProductReg => 10_000.0,
            Objective::SplitReg => 100.0,
        });
        check_lambda("solve.lambda", lambda)?;
        Ok(lambda)
    }

    pub fn rank(&self) -> usize {
        self.rank.unwrap_or(DEFAULT_RANK)
    }

    pub fn family(&self) -> ScalingFamily {
        self.family.unwrap_or(ScalingFamily::Identity)
    }

    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or(Metric::Cosine)
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind.unwrap_or(SimilarityKind::ItemItem)
    }
}

pub fn check_lambda(key: &str, lambda: f64) -> CliResult<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(CliError::config(key, format!("must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

pub fn check_rank(key: &str, rank: usize, n: usize, p: usize) -> CliResult<()> {
    let max = n.min(p);
    if rank == 0 || rank > max {
        return Err(CliError::config(
            key,
            format!("rank {rank} outside 1..={max} for a {n}x{p} matrix"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Interaction matrix CSV. When absent, data is simulated from `sim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    /// Embedding directory written by `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    /// Seeded dense uniform [0, 1) matrix, used by `fullrank-check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<DenseInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseInput {
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write PGM heatmaps next to similarity CSVs (default true).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmaps: Option<bool>,
}

impl OutputSection {
    pub fn dir(&self) -> PathBuf {
        self.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn heatmaps(&self) -> bool {
        self.heatmaps.unwrap_or(true)
    }
}

/// Parses a config, reporting the dotted path of the first bad key.
pub fn parse_config(text: &str) -> CliResult<Config> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let msg = inner.to_string();
        // an unknown top-level key leaves the path empty
        let key = match unknown_field(&msg) {
            Some(field) if path == "." => field,
            _ => path,
        };
        CliError::config(key, msg)
    })
}

fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

pub fn load_config(path: Option<&Path>) -> CliResult<Config> {
    match path {
        None => Ok(Config::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
            parse_config(&text)
        }
    }
}
