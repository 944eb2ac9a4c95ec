//! Per-episode CSV records and the JSON run summary.
//!
//! CSV: header `episode,seed,realized_loss,expected_value,cum_regret`, one
//! row per `(seed, episode)` ordered by the config's seed list and then by
//! episode (1-based), `\n` line endings, floats in `{:.16e}` (17 significant
//! digits). The summary sits next to the CSV with extension `.summary.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use aggbandit_core::BoundTracker;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{io_error, Error, Result};
use crate::sweep::SlopeFit;

pub const CSV_HEADER: [&str; 5] = ["episode", "seed", "realized_loss", "expected_value", "cum_regret"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub seed: u64,
    pub realized_loss: f64,
    /// `V^{π^k}_1(s_init; ℓ^k)`.
    pub expected_value: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// `Σ_k V^{π*}(ℓ^k)`.
    pub comparator_value: f64,
    /// Per-episode `V^{π*}(ℓ^k)`, so `cum_regret` can be rebuilt from the CSV.
    pub comparator_values: Vec<f64>,
    /// `π*` as `actions[h][s]`.
    pub comparator_actions: Vec<Vec<usize>>,
    pub comparator_hash: String,
    pub final_regret: f64,
    pub wall_seconds: f64,
    pub bounds: BoundSummary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub updates: usize,
    pub max_local_bonus: f64,
    pub max_exploration_bonus: f64,
    pub max_transition_bonus: f64,
    pub max_backup: f64,
    pub max_exponent: f64,
}

impl From<&BoundTracker> for BoundSummary {
    fn from(t: &BoundTracker) -> Self {
        Self {
            updates: t.updates,
            max_local_bonus: t.max_local_bonus,
            max_exploration_bonus: t.max_exploration_bonus,
            max_transition_bonus: t.max_transition_bonus,
            max_backup: t.max_backup,
            max_exponent: t.max_exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub eta: f64,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub epsilon: Option<f64>,
    pub episodes: usize,
    pub seeds: Vec<SeedSummary>,
    pub mean_final_regret: f64,
    pub std_error_final_regret: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slope_fit: Option<SlopeFit>,
}

pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.json")
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    File::create(path).map_err(|e| io_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_error(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

pub fn write_csv(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let file = create(path)?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    writer.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
    for r in records {
        writer
            .write_record([
                r.episode.to_string(),
                r.seed.to_string(),
                float(r.realized_loss),
                float(r.expected_value),
                float(r.cum_regret),
            ])
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let bad = |line: usize, what: &str| Error::Parse {
        path: path.to_path_buf(),
        message: format!("record {line}: bad {what}"),
    };
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let field = |j: usize| row.get(j).unwrap_or("");
        out.push(EpisodeRecord {
            episode: field(0).parse().map_err(|_| bad(i + 1, "episode"))?,
            seed: field(1).parse().map_err(|_| bad(i + 1, "seed"))?,
            realized_loss: field(2).parse().map_err(|_| bad(i + 1, "realized_loss"))?,
            expected_value: field(3).parse().map_err(|_| bad(i + 1, "expected_value"))?,
            cum_regret: field(4).parse().map_err(|_| bad(i + 1, "cum_regret"))?,
        });
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut file, value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    file.write_all(b"\n").and_then(|_| file.flush()).map_err(|e| io_error(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes the CSV at `path` and the summary beside it.
pub fn write_records(records: &[EpisodeRecord], summary: &RunSummary, path: &Path) -> Result<()> {
    write_csv(path, records)?;
    write_json(&summary_path(path), summary)
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    read_json(path)
}
