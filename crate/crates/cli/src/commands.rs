//! The five subcommands. Each resolves its inputs, computes in memory, and
//! writes through a [`Staging`] area on the main thread.

use std::collections::BTreeSet;
use std::path::Path;

use cosine_audit::analysis::{compare_configurations, default_plan, PlanEntry};
use cosine_audit::io::{
    read_json, read_pair, to_pgm, write_pair, HeatmapMapping, SimilarityProvenance,
    SimilaritySidecar,
};
use cosine_audit::matrix::format_number;
use cosine_audit::similarity::{compute, item_item_excluding_zero};
use cosine_audit::synthgen::{dense_uniform, sample_interactions, GroundTruth};
use cosine_audit::{
    apply_rotation, apply_scaling, audit_full_rank, backprojected_item_cosine,
    backprojected_user_cosine, named_scaling, random_rotation, solve, standardize, DataMatrix,
    DiagonalScaling, EmbeddingPair, Metric, SimilarityKind, SimilarityMatrix,
};

use crate::config::{check_lambda, check_rank, Config, DEFAULT_FULLRANK_LAMBDA};
use crate::error::{CliError, CliResult};
use crate::output::{Manifest, Staging};

pub const X_FILE: &str = "X.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const STANDARDIZATION_FILE: &str = "standardization.json";
pub const EMBEDDINGS_DIR: &str = "embeddings";
pub const REPORT_FILE: &str = "report.json";
pub const FULLRANK_REPORT_FILE: &str = "fullrank_report.json";
pub const SIMILARITY_DIR: &str = "similarity";

/// Interaction data plus where it came from.
struct Dataset {
    x: DataMatrix,
    gt: Option<GroundTruth>,
    seed: Option<u64>,
}

fn load_data(config: &Config) -> CliResult<Dataset> {
    let input = &config.input;
    if let Some(path) = &input.x {
        let x = DataMatrix::read_csv(path)
            .map_err(|e| CliError::config("input.x", format!("{}: {e}", path.display())))?;
        let gt = match &input.ground_truth {
            Some(path) => Some(
                read_json::<GroundTruth>(path).map_err(|e| CliError::config("input.ground_truth", e))?,
            ),
            None => None,
        };
        if let Some(gt) = &gt {
            if gt.n_items() != x.cols() {
                return Err(CliError::config(
                    "input.ground_truth",
                    format!("covers {} items, X has {}", gt.n_items(), x.cols()),
                ));
            }
        }
        return Ok(Dataset { x, gt, seed: None });
    }
    if let Some(dense) = &input.dense {
        let x = dense_uniform(dense.rows, dense.cols, dense.seed)
            .map_err(|e| CliError::config("input.dense", e))?;
        return Ok(Dataset {
            x,
            gt: None,
            seed: Some(dense.seed),
        });
    }
    let sim = config.sim.resolve()?;
    let (sample, gt) = sample_interactions(&sim)?;
    Ok(Dataset {
        x: sample.matrix,
        gt: Some(gt),
        seed: Some(sim.seed),
    })
}

fn require_gt(data: &Dataset) -> CliResult<&GroundTruth> {
    data.gt.as_ref().ok_or_else(|| {
        CliError::config(
            "input.ground_truth",
            "required when input.x is given (or omit input.x to simulate)",
        )
    })
}

/// Standardizes X in place when requested; returns the parameters.
fn maybe_standardize(config: &Config, x: &mut DataMatrix) -> CliResult<Option<cosine_audit::Standardization>> {
    if !config.solve.standardize.unwrap_or(false) {
        return Ok(None);
    }
    let (z, params) = standardize(x)?;
    *x = z;
    Ok(Some(params))
}

/// Closed-form solve followed by the configured scaling and rotation.
fn build_pair(config: &Config, x: &DataMatrix) -> CliResult<EmbeddingPair> {
    let solve_cfg = &config.solve;
    let rank = solve_cfg.rank();
    check_rank("solve.rank", rank, x.rows(), x.cols())?;
    let pair = solve(x, rank, solve_cfg.lambda()?, solve_cfg.objective())?;
    let d = match &solve_cfg.scaling_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config("solve.scaling_file", format!("{}: {e}", path.display())))?;
            let d = DiagonalScaling::from_csv(&text).map_err(|e| CliError::config("solve.scaling_file", e))?;
            if d.len() != rank {
                return Err(CliError::config(
                    "solve.scaling_file",
                    format!("{} entries for rank {rank}", d.len()),
                ));
            }
            d
        }
        None => named_scaling(&pair, solve_cfg.family())?,
    };
    let mut pair = apply_scaling(&pair, &d)?;
    if let Some(seed) = solve_cfg.rotation_seed {
        pair = apply_rotation(&pair, &random_rotation(rank, seed))?;
    }
    Ok(pair)
}

fn print_manifest(manifest: &Manifest, out: &Path) {
    println!("wrote {} files to {}", manifest.files.len() + 1, out.display());
    println!("config sha256 {}", manifest.config_sha256);
}

pub fn simulate(config: &Config) -> CliResult<()> {
    let sim = config.sim.resolve()?;
    let (sample, gt) = sample_interactions(&sim)?;
    let out = config.output.dir();
    let staging = Staging::new(&out)?;
    staging.write(X_FILE, sample.matrix.to_csv())?;
    staging.write_json(GROUND_TRUTH_FILE, &gt)?;
    let manifest = staging.commit("simulate", config, Some(sim.seed))?;
    let interactions: f64 = sample.matrix.values().iter().sum();
    println!(
        "simulated {} users x {} items, {} clusters, {} interactions",
        sim.n, sim.p, sim.clusters, interactions as u64
    );
    print_manifest(&manifest, &out);
    Ok(())
}

pub fn solve_cmd(config: &Config) -> CliResult<()> {
    let mut data = load_data(config)?;
    let params = maybe_standardize(config, &mut data.x)?;
    let pair = build_pair(config, &data.x)?;
    let out = config.output.dir();
    let staging = Staging::new(&out)?;
    write_pair(staging.path(EMBEDDINGS_DIR)?, &pair)?;
    if let Some(params) = &params {
        staging.write_json(STANDARDIZATION_FILE, params)?;
    }
    let manifest = staging.commit("solve", config, data.seed)?;
    println!(
        "objective {} lambda {} rank {}",
        pair.objective,
        format_number(pair.lambda),
        pair.rank
    );
    for warning in &pair.warnings {
        eprintln!("warning: {warning}");
    }
    print_manifest(&manifest, &out);
    Ok(())
}

fn write_matrix_outputs(
    staging: &Staging,
    stem: &str,
    s: &SimilarityMatrix,
    provenance: SimilarityProvenance,
    heatmap: bool,
) -> CliResult<()> {
    let mapping = heatmap.then(|| HeatmapMapping::for_matrix(s));
    staging.write(&format!("{stem}.csv"), s.values.to_csv())?;
    staging.write_json(
        &format!("{stem}.json"),
        &SimilaritySidecar {
            kind: s.kind,
            metric: s.metric,
            rows: s.values.rows(),
            cols: s.values.cols(),
            provenance,
            heatmap: mapping,
        },
    )?;
    if let Some(mapping) = &mapping {
        staging.write(&format!("{stem}.pgm"), to_pgm(s, mapping))?;
    }
    Ok(())
}

/// Reorders an item-item matrix over `kept` items into display order.
fn display_ordered(s: &SimilarityMatrix, kept: &[usize], gt: &GroundTruth) -> CliResult<(SimilarityMatrix, Vec<usize>)> {
    let kept_set: BTreeSet<usize> = kept.iter().copied().collect();
    let order: Vec<usize> = gt
        .display_order()
        .into_iter()
        .filter(|i| kept_set.contains(i))
        .collect();
    let local: Vec<usize> = order
        .iter()
        .map(|i| kept.binary_search(i).expect("kept is sorted"))
        .collect();
    Ok((
        SimilarityMatrix::new(s.values.permute_symmetric(&local)?, s.kind, s.metric),
        order,
    ))
}

pub fn similarity(config: &Config) -> CliResult<()> {
    let mut data = load_data(config)?;
    let params = maybe_standardize(config, &mut data.x)?;
    let pair = match &config.input.embeddings {
        Some(dir) => {
            let pair = read_pair(dir).map_err(|e| CliError::config("input.embeddings", e))?;
            if pair.n_items() != data.x.cols() {
                return Err(CliError::config(
                    "input.embeddings",
                    format!("{} items, X has {}", pair.n_items(), data.x.cols()),
                ));
            }
            pair
        }
        None => build_pair(config, &data.x)?,
    };
    let kind = config.solve.kind();
    let metric = config.solve.metric();
    let backproject = config.solve.backproject.unwrap_or(false);

    let mut kept: Option<Vec<usize>> = None;
    let s = if backproject {
        if metric != Metric::Cosine {
            return Err(CliError::config("solve.metric", "back-projection uses cosine only"));
        }
        match kind {
            SimilarityKind::UserUser => backprojected_user_cosine(&data.x, &pair)?,
            SimilarityKind::ItemItem => backprojected_item_cosine(&data.x, &pair)?,
            SimilarityKind::UserItem => {
                return Err(CliError::config(
                    "solve.backproject",
                    "only user-user and item-item can be back-projected",
                ))
            }
        }
    } else if kind == SimilarityKind::ItemItem {
        let filtered = item_item_excluding_zero(&pair, metric)?;
        if !filtered.excluded.is_empty() {
            eprintln!("warning: {} items with zero embeddings excluded", filtered.excluded.len());
        }
        kept = Some(filtered.kept);
        filtered.similarity
    } else {
        compute(&data.x, &pair, kind, metric)?
    };

    let mut provenance = SimilarityProvenance {
        objective: Some(pair.objective),
        lambda: Some(pair.lambda),
        rank: Some(pair.rank),
        family: Some(match (&config.solve.scaling_file, &config.input.embeddings) {
            (_, Some(_)) => "from-embeddings".to_string(),
            (Some(_), None) => "file".to_string(),
            (None, None) => config.solve.family().to_string(),
        }),
        item_order: None,
    };
    let s = match (kind, &data.gt) {
        (SimilarityKind::ItemItem, Some(gt)) => {
            let all: Vec<usize> = (0..data.x.cols()).collect();
            let (ordered, order) = display_ordered(&s, kept.as_deref().unwrap_or(&all), gt)?;
            provenance.item_order = Some(order);
            ordered
        }
        (SimilarityKind::ItemItem, None) => {
            provenance.item_order = kept;
            s
        }
        _ => s,
    };

    let out = config.output.dir();
    let staging = Staging::new(&out)?;
    write_matrix_outputs(&staging, "similarity", &s, provenance, config.output.heatmaps())?;
    if let Some(params) = &params {
        staging.write_json(STANDARDIZATION_FILE, params)?;
    }
    let manifest = staging.commit("similarity", config, data.seed)?;
    println!(
        "{} {} similarity, {}x{}{}",
        kind.tag(),
        metric,
        s.values.rows(),
        s.values.cols(),
        if backproject { " (back-projected)" } else { "" }
    );
    print_manifest(&manifest, &out);
    Ok(())
}

/// Plan from config, else a single entry from `solve` when it names a model,
/// else the default four-entry plan at `solve.rank`.
pub fn resolve_plan(config: &Config) -> CliResult<Vec<PlanEntry>> {
    if let Some(plan) = &config.plan {
        if plan.is_empty() {
            return Err(CliError::config("plan", "must not be empty"));
        }
        return Ok(plan.clone());
    }
    let solve_cfg = &config.solve;
    if solve_cfg.objective.is_some() || solve_cfg.lambda.is_some() || solve_cfg.family.is_some() {
        let mut entry = PlanEntry::new(
            solve_cfg.objective(),
            solve_cfg.lambda()?,
            solve_cfg.rank(),
            solve_cfg.family(),
        );
        entry.metric = solve_cfg.metric();
        return Ok(vec![entry]);
    }
    let mut plan = default_plan(solve_cfg.rank());
    if let Some(metric) = solve_cfg.metric {
        plan.iter_mut().for_each(|e| e.metric = metric);
    }
    Ok(plan)
}

pub fn audit(config: &Config) -> CliResult<()> {
    let mut data = load_data(config)?;
    require_gt(&data)?;
    maybe_standardize(config, &mut data.x)?;
    let plan = resolve_plan(config)?;
    let from_config = config.plan.is_some();
    let mut labels = BTreeSet::new();
    for (i, entry) in plan.iter().enumerate() {
        let key = |field: &str| {
            if from_config {
                format!("plan[{i}].{field}")
            } else {
                format!("solve.{field}")
            }
        };
        check_rank(&key("rank"), entry.rank, data.x.rows(), data.x.cols())?;
        check_lambda(&key("lambda"), entry.lambda)?;
        if !labels.insert(entry.label()) {
            return Err(CliError::config(format!("plan[{i}]"), format!("duplicate entry {}", entry.label())));
        }
    }

    let gt = require_gt(&data)?;
    let mut comparison = compare_configurations(&data.x, gt, &plan)?;
    comparison.report.provenance.seed = data.seed;

    let out = config.output.dir();
    let staging = Staging::new(&out)?;
    let heatmaps = config.output.heatmaps();
    for m in &comparison.matrices {
        let entry = plan
            .iter()
            .find(|e| e.label() == m.label)
            .expect("matrix label comes from the plan");
        write_matrix_outputs(
            &staging,
            &format!("{SIMILARITY_DIR}/{}", m.label),
            &m.similarity,
            SimilarityProvenance {
                objective: Some(entry.objective),
                lambda: Some(entry.lambda),
                rank: Some(entry.rank),
                family: Some(entry.family.to_string()),
                item_order: Some(m.item_order.clone()),
            },
            heatmaps,
        )?;
    }
    staging.write_json(REPORT_FILE, &comparison.report)?;
    let manifest = staging.commit("audit", config, data.seed)?;

    for e in &comparison.report.entries {
        let contrast = e
            .contrast
            .contrast
            .map(format_number)
            .unwrap_or_else(|| "undefined".into());
        println!("{} contrast {}", e.label, contrast);
        for warning in &e.warnings {
            eprintln!("warning: {}: {warning}", e.label);
        }
    }
    if let Some(full) = &comparison.report.full_rank {
        for c in &full.checks {
            println!("full-rank {} {}", c.name, if c.passed { "pass" } else { "FAIL" });
        }
    }
    print_manifest(&manifest, &out);
    Ok(())
}

pub fn fullrank_check(config: &Config) -> CliResult<()> {
    let data = load_data(config)?;
    let (n, p) = data.x.shape();
    if p > n {
        return Err(CliError::config(
            "input",
            format!("full-rank check needs p <= n, got {n}x{p}"),
        ));
    }
    if let Some(rank) = config.solve.rank {
        if rank != p {
            return Err(CliError::config("solve.rank", format!("must equal p = {p}, got {rank}")));
        }
    }
    let lambda = config.solve.lambda.unwrap_or(DEFAULT_FULLRANK_LAMBDA);
    check_lambda("solve.lambda", lambda)?;
    let report = audit_full_rank(&data.x, lambda)?;

    let out = config.output.dir();
    let staging = Staging::new(&out)?;
    staging.write_json(FULLRANK_REPORT_FILE, &report)?;
    let manifest = staging.commit("fullrank-check", config, data.seed)?;
    if !report.zero_sigma_dimensions.is_empty() {
        println!("zero-sigma dimensions dropped: {:?}", report.zero_sigma_dimensions);
    }
    for c in &report.checks {
        let status = match (&c.skipped, c.passed) {
            (Some(_), _) => "skipped",
            (None, true) => "pass",
            (None, false) => "FAIL",
        };
        let value = c.value.map(format_number).unwrap_or_else(|| "-".into());
        println!("{} {status} value {value} threshold {}", c.name, format_number(c.threshold));
    }
    print_manifest(&manifest, &out);
    match report.first_failure() {
        Some(c) => Err(CliError::Identity {
            check: c.name.clone(),
            detail: format!(
                "{} = {} (threshold {})",
                c.description,
                c.value.map(format_number).unwrap_or_else(|| "-".into()),
                format_number(c.threshold)
            ),
        }),
        None => Ok(()),
    }
}
