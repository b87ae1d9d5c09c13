//! File formats and the run output directory.
//!
//! Every file a run produces is written through [`OutputDir`], which records
//! its SHA-256 so the manifest lists exactly what was written. Floats are
//! written in shortest round-trip form, so identical runs give identical
//! bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::stats::{FtCurve, Histogram};
use crate::trajectory::{MeasurementRecord, Trajectory};
use crate::unravel::{Basis, Channel, StepSummary, UnraveledTrajectory};

pub const GENERATOR_VERSION: &str = concat!("qarrow ", env!("CARGO_PKG_VERSION"));

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("parameters serialize");
    hex_digest(&bytes)
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub generator: String,
    pub command: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub seed: u64,
    /// Resolved configuration in config-file syntax.
    pub config: String,
    pub config_fingerprint: String,
    pub outputs: Vec<ManifestEntry>,
    pub steps_simulated: u64,
    pub wall_clock_s: f64,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Output directory that checksums everything written into it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(OutputDir {
            root,
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.entries.retain(|e| e.path != rel);
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            sha256: hex_digest(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }

    pub fn write_rows(&mut self, rel: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<PathBuf> {
        let bytes = csv_bytes(header, rows)?;
        self.write_bytes(rel, &bytes)
    }

    /// Write `manifest.json` and consume the directory handle.
    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.outputs = self.entries;
        let path = self.root.join(MANIFEST_NAME);
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(path, bytes)?;
        Ok(manifest)
    }
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub dt: f64,
    pub strength: f64,
    pub seed: u64,
    pub generator_version: String,
}

/// `dir/name.csv` → `dir/name.meta.json`.
pub fn meta_path(record_path: &Path) -> PathBuf {
    let stem = record_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    record_path.with_file_name(format!("{stem}.meta.json"))
}

/// Write `rel` (a `.csv` path) and its `.meta.json` sidecar.
pub fn write_record(out: &mut OutputDir, rel: &str, record: &MeasurementRecord, seed: u64) -> Result<()> {
    let rows = record
        .values
        .iter()
        .enumerate()
        .map(|(k, r)| vec![k.to_string(), fmt_f64(*r)])
        .collect();
    out.write_rows(rel, &["step", "r"], rows)?;
    let meta = RecordMeta {
        dt: record.dt,
        strength: record.strength,
        seed,
        generator_version: GENERATOR_VERSION.to_string(),
    };
    let meta_rel = meta_path(Path::new(rel));
    out.write_json(&meta_rel.to_string_lossy(), &meta)?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<(MeasurementRecord, RecordMeta)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let meta_file = meta_path(path);
    if !meta_file.exists() {
        return Err(Error::MissingFile(meta_file));
    }
    let meta: RecordMeta = serde_json::from_slice(&fs::read(&meta_file)?)?;
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let r_col = column(&headers, "r", path)?;
    let step_col = column(&headers, "step", path)?;
    let mut values = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let step: usize = parse_field(&row, step_col, path, i)?;
        if step != i {
            return Err(Error::Format(format!(
                "{}: row {} has step {step}, expected {i}",
                path.display(),
                i + 1
            )));
        }
        values.push(parse_field(&row, r_col, path, i)?);
    }
    Ok((MeasurementRecord::new(values, meta.dt, meta.strength)?, meta))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Format(format!("{}: missing `{name}` column", path.display())))
}

fn parse_field<T: std::str::FromStr>(row: &csv::StringRecord, col: usize, path: &Path, i: usize) -> Result<T> {
    let raw = row.get(col).unwrap_or("").trim();
    raw.parse().map_err(|_| {
        Error::Format(format!("{}: row {}: cannot parse `{raw}`", path.display(), i + 1))
    })
}

pub const TRAJECTORY_HEADER: [&str; 6] = ["step", "x", "y", "z", "r", "q_inc"];

/// Row `k` holds the state after step `k` with the readout and Q increment
/// that produced it; row 0 is the initial state.
pub fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    traj.states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let (r, q) = if k == 0 {
                (String::new(), String::new())
            } else {
                (fmt_f64(traj.record.values[k - 1]), fmt_f64(traj.q_increments[k - 1]))
            };
            vec![k.to_string(), fmt_f64(s.x), fmt_f64(s.y), fmt_f64(s.z), r, q]
        })
        .collect()
}

/// Channel letter in exports: `a` for Alice, `b` for the hidden observer
/// in either limiting basis, and `r` for Rob when both hidden observers act.
pub fn channel_letter(channel: Channel, basis: Basis) -> char {
    match (channel, basis) {
        (Channel::Rob, Basis::IncompatiblePhi) => 'b',
        (c, _) => c.letter(),
    }
}

/// Like [`trajectory_rows`] plus a `channel` column; `q_inc` is Alice's
/// increment on her steps and empty otherwise.
pub fn unraveled_rows(traj: &UnraveledTrajectory, basis: Basis, strength: f64, dt: f64) -> Vec<Vec<String>> {
    traj.states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut row = vec![k.to_string(), fmt_f64(s.x), fmt_f64(s.y), fmt_f64(s.z)];
            if k == 0 {
                row.extend([String::new(), String::new(), String::new()]);
            } else {
                let c = traj.channels[k - 1];
                let r = traj.readouts[k - 1];
                let q = if c == Channel::Alice {
                    fmt_f64(crate::trajectory::arrow_increment(
                        &traj.states[k - 1],
                        &traj.post_update[k - 1],
                        r,
                        strength,
                        dt,
                    ))
                } else {
                    String::new()
                };
                row.extend([fmt_f64(r), q, channel_letter(c, basis).to_string()]);
            }
            row
        })
        .collect()
}

pub const UNRAVELED_HEADER: [&str; 7] = ["step", "x", "y", "z", "r", "q_inc", "channel"];

pub const SUMMARY_HEADER: [&str; 7] = ["step", "mean_x", "mean_y", "mean_z", "stderr_x", "stderr_y", "stderr_z"];

pub fn summary_rows(summary: &[StepSummary]) -> Vec<Vec<String>> {
    summary
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut row = vec![k.to_string()];
            row.extend(s.mean.iter().chain(&s.stderr).map(|v| fmt_f64(*v)));
            row
        })
        .collect()
}

pub const HISTOGRAM_HEADER: [&str; 3] = ["bin_center", "count", "density"];

pub fn histogram_rows(hist: &Histogram) -> Vec<Vec<String>> {
    hist.centers()
        .iter()
        .zip(&hist.counts)
        .zip(hist.densities())
        .map(|((c, n), d)| vec![fmt_f64(*c), n.to_string(), fmt_f64(d)])
        .collect()
}

pub const FT_HEADER: [&str; 3] = ["q", "ln_ratio", "stderr"];

pub fn ft_rows(curve: &FtCurve) -> Vec<Vec<String>> {
    curve
        .points
        .iter()
        .map(|p| vec![fmt_f64(p.q), fmt_f64(p.ln_ratio), fmt_f64(p.stderr)])
        .collect()
}

pub const Q_ENSEMBLE_HEADER: [&str; 3] = ["index", "q", "q_continuous"];

pub fn q_ensemble_rows(exact: &[f64], continuous: &[f64]) -> Vec<Vec<String>> {
    exact
        .iter()
        .zip(continuous)
        .enumerate()
        .map(|(i, (q, c))| vec![i.to_string(), fmt_f64(*q), fmt_f64(*c)])
        .collect()
}

/// Read the `q` column of a Q-ensemble CSV.
pub fn read_q_values(path: &Path) -> Result<Vec<f64>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = column(&headers, "q", path)?;
    reader
        .records()
        .enumerate()
        .map(|(i, row)| parse_field(&row?, col, path, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn record_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let rec = MeasurementRecord::new(vec![0.5, -1.25e-7, 3.0e20, 0.0], 16e-9, 1.97e6).unwrap();
        write_record(&mut out, "rec.csv", &rec, 42).unwrap();
        assert!(dir.path().join("rec.meta.json").exists());
        let (back, meta) = read_record(&dir.path().join("rec.csv")).unwrap();
        assert_eq!(back, rec);
        assert_eq!(meta.seed, 42);
        assert_eq!(out.entries().len(), 2);
    }

    #[test]
    fn missing_sidecar_names_expected_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("alone.csv");
        fs::write(&path, "step,r\n0,1.0\n").unwrap();
        let err = read_record(&path).unwrap_err();
        assert!(err.to_string().contains("alone.meta.json"), "{err}");
    }

    #[test]
    fn malformed_record_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let rec = MeasurementRecord::new(vec![1.0], 16e-9, 1.97e6).unwrap();
        write_record(&mut out, "rec.csv", &rec, 0).unwrap();
        fs::write(dir.path().join("rec.csv"), "step,r\n0,abc\n").unwrap();
        assert!(matches!(read_record(&dir.path().join("rec.csv")), Err(Error::Format(_))));
        fs::write(dir.path().join("rec.csv"), "step,value\n0,1\n").unwrap();
        assert!(matches!(read_record(&dir.path().join("rec.csv")), Err(Error::Format(_))));
    }

    #[test]
    fn manifest_checksums_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_rows("a/b.csv", &["x"], vec![vec!["1".into()]]).unwrap();
        out.write_json("s.json", &vec![1, 2]).unwrap();
        let m = out
            .finish(RunManifest {
                generator: GENERATOR_VERSION.into(),
                command: "test".into(),
                status: RunStatus::Complete,
                error: None,
                seed: 0,
                config: String::new(),
                config_fingerprint: String::new(),
                outputs: vec![],
                steps_simulated: 0,
                wall_clock_s: 0.0,
            })
            .unwrap();
        assert_eq!(m.outputs.len(), 2);
        for e in &m.outputs {
            let bytes = fs::read(dir.path().join(&e.path)).unwrap();
            assert_eq!(hex_digest(&bytes), e.sha256);
        }
        let on_disk: RunManifest =
            serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_NAME)).unwrap()).unwrap();
        assert_eq!(on_disk, m);
    }

    #[test]
    fn q_values_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let q = vec![0.1, -2.5, 1e-300];
        out.write_rows("q.csv", &Q_ENSEMBLE_HEADER, q_ensemble_rows(&q, &q)).unwrap();
        assert_eq!(read_q_values(&dir.path().join("q.csv")).unwrap(), q);
        assert!(matches!(read_q_values(&dir.path().join("nope.csv")), Err(Error::MissingFile(_))));
    }

    #[test]
    fn phi_basis_hidden_observer_is_b() {
        assert_eq!(channel_letter(Channel::Rob, Basis::IncompatiblePhi), 'b');
        assert_eq!(channel_letter(Channel::Rob, Basis::Split), 'r');
        assert_eq!(channel_letter(Channel::Alice, Basis::CompatibleZ), 'a');
    }

    proptest! {
        #[test]
        fn float_format_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
