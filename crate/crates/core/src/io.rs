//! On-disk formats: embedding directories, similarity CSVs with a JSON
//! sidecar, plain PGM heatmaps and small JSON helpers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::similarity::{Metric, SimilarityKind, SimilarityMatrix};
use crate::solvers::{EmbeddingPair, Objective};

pub const PAIR_A_FILE: &str = "A.csv";
pub const PAIR_B_FILE: &str = "B.csv";
pub const PAIR_META_FILE: &str = "meta.json";

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub lambda: f64,
    pub rank: usize,
    pub objective: Objective,
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub scaled: bool,
    #[serde(default)]
    pub rotated: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Writes `A.csv`, `B.csv` and `meta.json` into `dir`, creating it if needed.
pub fn write_pair(dir: impl AsRef<Path>, pair: &EmbeddingPair) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    pair.a.write_csv(dir.join(PAIR_A_FILE))?;
    pair.b.write_csv(dir.join(PAIR_B_FILE))?;
    write_json(
        dir.join(PAIR_META_FILE),
        &PairMeta {
            lambda: pair.lambda,
            rank: pair.rank,
            objective: pair.objective,
            sigma: pair.sigma.clone(),
            scaled: pair.scaled,
            rotated: pair.rotated,
            warnings: pair.warnings.clone(),
        },
    )
}

pub fn read_pair(dir: impl AsRef<Path>) -> Result<EmbeddingPair> {
    let dir = dir.as_ref();
    let a = DataMatrix::read_csv(dir.join(PAIR_A_FILE))?;
    let b = DataMatrix::read_csv(dir.join(PAIR_B_FILE))?;
    let meta: PairMeta = read_json(dir.join(PAIR_META_FILE))?;
    let mut pair = EmbeddingPair::new(a, b, meta.lambda, meta.objective, meta.sigma)?;
    if pair.rank != meta.rank {
        return Err(Error::DimensionMismatch(format!(
            "meta.json says rank {}, embeddings have {}",
            meta.rank, pair.rank
        )));
    }
    pair.scaled = meta.scaled;
    pair.rotated = meta.rotated;
    pair.warnings = meta.warnings;
    Ok(pair)
}

/// Model settings a similarity matrix was computed from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityProvenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Original index of each row/column when the matrix was reordered.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub item_order: Option<Vec<usize>>,
}

/// Linear map from similarity values to gray levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMapping {
    /// Value drawn as gray level 0.
    pub low: f64,
    /// Value drawn as `max_gray`.
    pub high: f64,
    pub max_gray: u8,
}

impl HeatmapMapping {
    /// `[-1, 1]` for cosine, the observed `[min, max]` for dot products.
    pub fn for_matrix(s: &SimilarityMatrix) -> Self {
        let (low, high) = match s.metric {
            Metric::Cosine => (-1.0, 1.0),
            Metric::Dot => s
                .values
                .values()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
        };
        Self {
            low,
            high,
            max_gray: 255,
        }
    }

    pub fn gray(&self, v: f64) -> u8 {
        let span = self.high - self.low;
        if span <= 0.0 {
            return 0;
        }
        let t = ((v - self.low) / span).clamp(0.0, 1.0);
        (t * self.max_gray as f64).round() as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySidecar {
    pub kind: SimilarityKind,
    pub metric: Metric,
    pub rows: usize,
    pub cols: usize,
    pub provenance: SimilarityProvenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<HeatmapMapping>,
}

/// Sidecar path for a matrix file: `foo.csv` → `foo.json`.
pub fn sidecar_path(csv: impl AsRef<Path>) -> PathBuf {
    csv.as_ref().with_extension("json")
}

pub fn write_similarity(
    csv: impl AsRef<Path>,
    s: &SimilarityMatrix,
    provenance: SimilarityProvenance,
    heatmap: Option<HeatmapMapping>,
) -> Result<()> {
    let csv = csv.as_ref();
    s.values.write_csv(csv)?;
    write_json(
        sidecar_path(csv),
        &SimilaritySidecar {
            kind: s.kind,
            metric: s.metric,
            rows: s.values.rows(),
            cols: s.values.cols(),
            provenance,
            heatmap,
        },
    )
}

pub fn read_similarity(csv: impl AsRef<Path>) -> Result<(SimilarityMatrix, SimilaritySidecar)> {
    let csv = csv.as_ref();
    let values = DataMatrix::read_csv(csv)?;
    let sidecar: SimilaritySidecar = read_json(sidecar_path(csv))?;
    if values.shape() != (sidecar.rows, sidecar.cols) {
        return Err(Error::DimensionMismatch(format!(
            "{} is {}x{}, sidecar says {}x{}",
            csv.display(),
            values.rows(),
            values.cols(),
            sidecar.rows,
            sidecar.cols
        )));
    }
    Ok((
        SimilarityMatrix::new(values, sidecar.kind, sidecar.metric),
        sidecar,
    ))
}

/// Plain (P2) PGM, one pixel per matrix entry, lines kept under 70 chars.
pub fn to_pgm(s: &SimilarityMatrix, mapping: &HeatmapMapping) -> String {
    let (rows, cols) = s.values.shape();
    let mut out = format!("P2\n{cols} {rows}\n{}\n", mapping.max_gray);
    for i in 0..rows {
        let mut line = String::new();
        for &v in s.values.row(i) {
            let px = mapping.gray(v).to_string();
            if !line.is_empty() && line.len() + 1 + px.len() > 69 {
                out.push_str(&line);
                out.push('\n');
                line.clear();
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&px);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Parses a plain PGM back into gray levels (rows of pixels).
pub fn parse_pgm(text: &str) -> Result<Vec<Vec<u8>>> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::Parse("not a plain PGM".into()));
    }
    let mut number = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("PGM missing {what}")))?
            .parse()
            .map_err(|_| Error::Parse(format!("PGM bad {what}")))
    };
    let cols = number("width")?;
    let rows = number("height")?;
    let max = number("max gray")?;
    let mut pixels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for _ in 0..cols {
            let v = number("pixel")?;
            if v > max || v > 255 {
                return Err(Error::Parse(format!("PGM pixel {v} above max {max}")));
            }
            row.push(v as u8);
        }
        pixels.push(row);
    }
    Ok(pixels)
}
