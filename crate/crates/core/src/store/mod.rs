//! Corpus generation and the on-disk dataset layout.
//!
//! ```text
//! <out>/manifest.json
//! <out>/records/<id>.csv        t,va,vb,vc,ia,ib,ic
//! <out>/records/<id>.meta.json  scenario, seeds, config hash
//! <out>/features/<id>.csv       start,<feature names>
//! ```
//!
//! Numbers are written in shortest round-trip form, so regenerating a corpus
//! with the same configuration reproduces every file byte for byte.

mod grid;
pub mod metrics;
pub mod split;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSpec, LabelSet};
use crate::pipeline::RecordWindows;
use crate::rng::{hex_digest, PRNG_ALGORITHM};
use crate::sim::{FaultScenario, SimConfig, SwitchSet, WaveformRecord};

pub use grid::{Cell, ExperimentGrid, ScenarioKind};
pub use metrics::{compute_metrics, ClassMetrics, ConfusionMatrix, MetricsReport};
pub use split::{split_records, Split, SplitConfig};

pub const MANIFEST_FORMAT: &str = "faultnet-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const RECORD_HEADER: [&str; 7] = ["t", "va", "vb", "vc", "ia", "ib", "ic"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub scenario: Option<ScenarioKind>,
    pub case: String,
    pub label: LabelSet,
    pub switches: SwitchSet,
    pub f_amplitude: Option<f64>,
    pub load_level: f64,
    pub replicate: usize,
    pub seed: u64,
    pub fault_time: Option<f64>,
    pub inject_time: Option<f64>,
    pub n_windows: usize,
    pub record: String,
    pub meta: String,
    pub features: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub prng: String,
    pub config_hash: String,
    pub sim: SimConfig,
    pub grid: ExperimentGrid,
    pub feature_spec: FeatureSpec,
    pub feature_names: Vec<String>,
    pub cells: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("manifest serializes");
        v.push(b'\n');
        v
    }

    pub fn hash(&self) -> String {
        hex_digest(&self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let format = value.get("format").and_then(|v| v.as_str());
        let version = value.get("version").and_then(|v| v.as_u64());
        if format != Some(MANIFEST_FORMAT) || version != Some(u64::from(MANIFEST_VERSION)) {
            return Err(Error::Compatibility(format!(
                "{}: not a {MANIFEST_FORMAT} v{MANIFEST_VERSION} file",
                path.display()
            )));
        }
        serde_json::from_value(value).map_err(|e| Error::json(path, e))
    }
}

/// Sidecar describing how a record was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub id: String,
    pub scenario: Option<ScenarioKind>,
    pub fault: FaultScenario,
    pub label: LabelSet,
    pub seed: u64,
    pub prng: String,
    pub config_hash: String,
    pub sim: SimConfig,
}

impl RecordMeta {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// Hash of everything that determines the corpus contents.
pub fn config_hash(sim: &SimConfig, grid: &ExperimentGrid, spec: &FeatureSpec) -> String {
    let json = serde_json::to_vec(&(sim, grid, spec)).expect("config serializes");
    hex_digest(&json)
}

pub fn record_to_csv(record: &WaveformRecord) -> String {
    let mut out = String::with_capacity(record.len() * 80);
    out.push_str(&RECORD_HEADER.join(","));
    out.push('\n');
    let ch = record.channels();
    for k in 0..record.len() {
        write!(out, "{}", record.t[k]).unwrap();
        for (_, c) in &ch {
            write!(out, ",{}", c[k]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn features_to_csv(windows: &RecordWindows, spec: &FeatureSpec) -> String {
    let mut out = String::from("start");
    for name in spec.feature_names() {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for (start, row) in windows.starts.iter().zip(&windows.rows) {
        write!(out, "{start}").unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn parse_cell(path: &Path, line: usize, column: &str, text: &str) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| {
        Error::schema(
            path,
            format!("line {line}, column {column}: cannot parse `{text}` as a number"),
        )
    })?;
    if !v.is_finite() {
        return Err(Error::schema(
            path,
            format!("line {line}, column {column}: non-finite value"),
        ));
    }
    Ok(v)
}

/// Reads a CSV whose first row must equal `header`. Returns the data rows.
fn read_numeric_csv(path: &Path, header: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => return Err(Error::schema(path, "empty file, expected a header row")),
    };
    let found: Vec<&str> = first.iter().map(str::trim).collect();
    if found != header {
        return Err(Error::schema(
            path,
            format!(
                "line 1: header must be `{}`, found `{}`",
                header.join(","),
                found.join(",")
            ),
        ));
    }
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() != header.len() {
            return Err(Error::schema(
                path,
                format!(
                    "line {line}: expected {} columns, found {}",
                    header.len(),
                    rec.len()
                ),
            ));
        }
        rows.push(
            rec.iter()
                .zip(header)
                .map(|(text, col)| parse_cell(path, line, col, text))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::schema(path, e.to_string())
    }
}

/// Path of the metadata sidecar belonging to a record CSV.
pub fn meta_path(record_csv: &Path) -> PathBuf {
    let stem = record_csv
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.strip_suffix(".csv").unwrap_or(n))
        .unwrap_or("record");
    record_csv.with_file_name(format!("{stem}.meta.json"))
}

/// Reads a waveform CSV. Scenario and configuration come from the sidecar
/// when there is one; otherwise the record is taken as unlabelled with the
/// sampling rate inferred from the time column and the other settings from
/// `fallback`.
pub fn read_record(path: &Path, fallback: &SimConfig) -> Result<WaveformRecord> {
    let header: Vec<String> = RECORD_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = read_numeric_csv(path, &header)?;
    if rows.len() < 2 {
        return Err(Error::schema(
            path,
            format!("need at least 2 samples, found {}", rows.len()),
        ));
    }
    for (i, w) in rows.windows(2).enumerate() {
        if w[1][0] <= w[0][0] {
            return Err(Error::schema(
                path,
                format!("line {}, column t: time must increase", i + 3),
            ));
        }
    }
    let n = rows.len();
    let sidecar = meta_path(path);
    let (config, scenario) = if sidecar.exists() {
        let meta = RecordMeta::load(&sidecar)?;
        if meta.sim.n_samples() != n {
            return Err(Error::schema(
                path,
                format!(
                    "{n} samples, sidecar configuration implies {}",
                    meta.sim.n_samples()
                ),
            ));
        }
        (meta.sim, meta.fault)
    } else {
        let span = rows[n - 1][0] - rows[0][0];
        let fs = (n - 1) as f64 / span;
        let fs = if (fs / fallback.fs - 1.0).abs() < 1e-6 {
            fallback.fs
        } else {
            fs
        };
        let config = SimConfig {
            fs,
            duration: n as f64 / fs,
            ..fallback.clone()
        };
        (config, FaultScenario::healthy())
    };
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let record = WaveformRecord {
        t: col(0),
        v_abc: [col(1), col(2), col(3)],
        i_abc: [col(4), col(5), col(6)],
        scenario,
        config,
    };
    record.validate()?;
    Ok(record)
}

/// Reads a features CSV written with `spec`; a header for another spec is a
/// compatibility error.
pub fn read_features(path: &Path, spec: &FeatureSpec) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let mut header = vec!["start".to_string()];
    header.extend(spec.feature_names());
    let rows = read_numeric_csv(path, &header).map_err(|e| match e {
        Error::Schema { message, .. } if message.starts_with("line 1: header") => {
            Error::Compatibility(format!("{}: {message}", path.display()))
        }
        e => e,
    })?;
    let mut starts = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for mut r in rows {
        starts.push(r[0] as usize);
        r.remove(0);
        values.push(r);
    }
    Ok((starts, values))
}

/// A loaded or freshly generated corpus. `records[i]` belongs to
/// `manifest.cells[i]`.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: Manifest,
    pub records: Vec<RecordWindows>,
}

impl Corpus {
    pub fn manifest_hash(&self) -> String {
        self.manifest.hash()
    }

    pub fn entry(&self, i: usize) -> &ManifestEntry {
        &self.manifest.cells[i]
    }

    /// Indices of the records of the given scenarios plus every healthy record.
    pub fn scenario_subset(&self, scenarios: &[ScenarioKind]) -> Vec<usize> {
        self.manifest
            .cells
            .iter()
            .enumerate()
            .filter(|(_, e)| e.scenario.map_or(true, |s| scenarios.contains(&s)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Scenarios with at least one record, in grid order.
    pub fn scenarios(&self) -> Vec<ScenarioKind> {
        self.manifest
            .grid
            .scenarios
            .iter()
            .copied()
            .filter(|s| self.manifest.cells.iter().any(|e| e.scenario == Some(*s)))
            .collect()
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = Manifest::load(manifest_path)?;
        let root = manifest_path.parent().unwrap_or(Path::new("."));
        let spec = &manifest.feature_spec;
        spec.validate()?;
        let sim = &manifest.sim;
        let axis = sim.time_axis();
        let onset = |t: Option<f64>| t.map(|t| axis.partition_point(|&x| x < t));
        let records = manifest
            .cells
            .par_iter()
            .map(|e| {
                let (starts, rows) = read_features(&root.join(&e.features), spec)?;
                if rows.len() != e.n_windows {
                    return Err(Error::schema(
                        root.join(&e.features),
                        format!("{} windows, manifest lists {}", rows.len(), e.n_windows),
                    ));
                }
                Ok(RecordWindows {
                    id: e.id.clone(),
                    label: e.label.clone(),
                    starts,
                    rows,
                    window_len: spec.window_len,
                    fault_onset: onset(e.fault_time),
                    anomaly_onset: onset(e.inject_time),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus { manifest, records })
    }
}

struct Generated {
    entry: ManifestEntry,
    windows: RecordWindows,
}

fn generate_cell(
    cell: &Cell,
    sim: &SimConfig,
    grid: &ExperimentGrid,
    spec: &FeatureSpec,
    hash: &str,
    out: Option<&Path>,
) -> Result<Generated> {
    let record = cell.simulate(sim, grid)?;
    let windows = RecordWindows::from_record(cell.id.clone(), &record, spec)?;
    let rel = |dir: &str, ext: &str| format!("{dir}/{}{ext}", cell.id);
    let (record_path, meta_rel, features_path) = (
        rel("records", ".csv"),
        rel("records", ".meta.json"),
        rel("features", ".csv"),
    );
    let mut record_sha256 = None;
    if let Some(root) = out {
        let csv = record_to_csv(&record);
        record_sha256 = Some(hex_digest(csv.as_bytes()));
        let meta = RecordMeta {
            id: cell.id.clone(),
            scenario: cell.scenario,
            fault: record.scenario.clone(),
            label: windows.label.clone(),
            seed: cell.seed,
            prng: PRNG_ALGORITHM.to_string(),
            config_hash: hash.to_string(),
            sim: record.config.clone(),
        };
        let mut meta_json = serde_json::to_vec_pretty(&meta).expect("meta serializes");
        meta_json.push(b'\n');
        for (p, bytes) in [
            (&record_path, csv.as_bytes()),
            (&meta_rel, &meta_json[..]),
            (&features_path, features_to_csv(&windows, spec).as_bytes()),
        ] {
            let full = root.join(p);
            fs::write(&full, bytes).map_err(|e| Error::io(&full, e))?;
        }
    }
    let scenario = &record.scenario;
    let entry = ManifestEntry {
        id: cell.id.clone(),
        scenario: cell.scenario,
        case: windows.label.case_name(),
        label: windows.label.clone(),
        switches: cell.switches.clone(),
        f_amplitude: cell.f_amplitude,
        load_level: cell.load_level,
        replicate: cell.replicate,
        seed: cell.seed,
        fault_time: (!scenario.switches.is_empty()).then_some(scenario.fault_time),
        inject_time: scenario
            .anomaly
            .as_ref()
            .filter(|a| !a.is_inert())
            .map(|a| a.inject_time),
        n_windows: windows.rows.len(),
        record: record_path,
        meta: meta_rel,
        features: features_path,
        record_sha256,
    };
    Ok(Generated { entry, windows })
}

/// Simulates every grid cell and extracts its window features. With `out`
/// set, records, sidecars, feature tables and the manifest are written there.
pub fn generate_corpus(
    sim: &SimConfig,
    grid: &ExperimentGrid,
    spec: &FeatureSpec,
    out: Option<&Path>,
) -> Result<Corpus> {
    sim.validate()?;
    spec.validate()?;
    let cells = grid.cells()?;
    let hash = config_hash(sim, grid, spec);
    if let Some(root) = out {
        for dir in ["records", "features"] {
            let d = root.join(dir);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    let generated = cells
        .par_iter()
        .map(|c| generate_cell(c, sim, grid, spec, &hash, out))
        .collect::<Result<Vec<_>>>()?;
    let (cells, records): (Vec<_>, Vec<_>) =
        generated.into_iter().map(|g| (g.entry, g.windows)).unzip();
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        prng: PRNG_ALGORITHM.into(),
        config_hash: hash,
        sim: sim.clone(),
        grid: grid.clone(),
        feature_spec: spec.clone(),
        feature_names: spec.feature_names(),
        cells,
    };
    if let Some(root) = out {
        let path = root.join("manifest.json");
        fs::write(&path, manifest.to_bytes()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(Corpus { manifest, records })
}
