//! Dataset evaluation: enhance every noisy file, score it against the clean
//! file of the same name, and collect a JSON-ready report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::GeneratorModel;
use crate::metrics::{self, MetricsReport, UtteranceMetrics};
use crate::scalar::Scalar;
use crate::streaming::{process_stream, ChunkPlan};

use super::wav::read_wav;

/// Clean and noisy directories paired by identical file name.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalManifest {
    pub clean_dir: PathBuf,
    pub noisy_dir: PathBuf,
    pub sample_rate: u32,
}

/// One clean/noisy pair, identified by the file stem.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPair {
    pub id: String,
    pub clean: PathBuf,
    pub noisy: PathBuf,
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

impl EvalManifest {
    pub fn new(clean_dir: impl Into<PathBuf>, noisy_dir: impl Into<PathBuf>) -> Self {
        Self { clean_dir: clean_dir.into(), noisy_dir: noisy_dir.into(), sample_rate: 16_000 }
    }

    /// Paired files, plus noisy file names that have no clean counterpart.
    pub fn pairs(&self) -> Result<(Vec<EvalPair>, Vec<String>)> {
        let mut pairs = Vec::new();
        let mut unpaired = Vec::new();
        for noisy in wav_files(&self.noisy_dir)? {
            let file = noisy.file_name().expect("listed file").to_owned();
            let clean = self.clean_dir.join(&file);
            if clean.is_file() {
                let id = noisy.file_stem().expect("listed file").to_string_lossy().into_owned();
                pairs.push(EvalPair { id, clean, noisy });
            } else {
                unpaired.push(file.to_string_lossy().into_owned());
            }
        }
        Ok((pairs, unpaired))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Offline,
    Stream(ChunkPlan),
}

impl EvalMode {
    pub fn name(&self) -> &'static str {
        match self {
            EvalMode::Offline => "offline",
            EvalMode::Stream(_) => "stream",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub utterances: Vec<UtteranceMetrics>,
    pub aggregate: BTreeMap<String, f64>,
    pub count: usize,
    pub mode: String,
    pub chunk: Option<usize>,
    /// Noisy files skipped for lack of a clean counterpart.
    pub skipped: Vec<String>,
    pub warnings: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Reads `utterance_id,pesq,csig,cbak,covl` rows (any subset of the metric
/// columns; blank cells are ignored).
pub fn read_external_metrics(path: impl AsRef<Path>) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let path = path.as_ref();
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let id_col = headers.iter().position(|h| h == "utterance_id").ok_or_else(|| bad("no utterance_id column".into()))?;
    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let mut values = BTreeMap::new();
        for (i, (h, cell)) in headers.iter().zip(row.iter()).enumerate() {
            if i == id_col || cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| bad(format!("column {h}: '{cell}' is not a number")))?;
            values.insert(h.to_string(), v);
        }
        out.insert(row.get(id_col).unwrap_or_default().to_string(), values);
    }
    Ok(out)
}

/// Enhances and scores every pair. Utterances run in parallel; the report is
/// sorted by id so it does not depend on scheduling.
pub fn run_eval<T: Scalar>(
    manifest: &EvalManifest,
    model: &GeneratorModel<T>,
    mode: EvalMode,
    external: Option<&Path>,
) -> Result<EvalReport> {
    let (pairs, skipped) = manifest.pairs()?;
    let extra = external.map(read_external_metrics).transpose()?.unwrap_or_default();
    let scored: Vec<UtteranceMetrics> = pairs
        .par_iter()
        .map(|p| {
            let clean = read_wav::<T>(&p.clean)?;
            let noisy = read_wav::<T>(&p.noisy)?;
            for a in [&clean, &noisy] {
                if a.sample_rate() != manifest.sample_rate {
                    return Err(Error::SampleRate { expected: manifest.sample_rate, actual: a.sample_rate() });
                }
            }
            let enhanced = match mode {
                EvalMode::Offline => model.enhance(&noisy)?,
                EvalMode::Stream(plan) => process_stream(model, &noisy, &plan)?,
            };
            let mut m = metrics::evaluate(&p.id, &clean, &enhanced)?;
            if let Some(values) = extra.get(&p.id) {
                for (k, &v) in values {
                    m.set(k, v);
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let mut report = MetricsReport { utterances: scored };
    report.sort_by_id();
    Ok(EvalReport {
        aggregate: report.aggregate(),
        count: report.count(),
        utterances: report.utterances,
        mode: mode.name().to_string(),
        chunk: match mode {
            EvalMode::Offline => None,
            EvalMode::Stream(p) => Some(p.chunk_len()),
        },
        warnings: skipped.len(),
        skipped,
    })
}
