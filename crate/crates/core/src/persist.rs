//! Trajectory CSVs, ensemble/audit JSON and the run manifest.
//!
//! A run directory holds `config.json`, one `traj_<hash8>_seed<seed>.csv` per
//! trajectory, optionally `ensemble.json` / `audit.json`, and `manifest.json`.
//! Persisting the same (config hash, seeds) twice is a no-op; a manifest for
//! anything else at the same path is never overwritten.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::conservation::AuditReport;
use crate::error::{Error, Result};
use crate::integrator::{EnsembleStats, TrajectoryRecord};
use crate::scenario::ScenarioConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";
pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const AUDIT_FILE: &str = "audit.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub scenario: String,
    pub seeds: Vec<u64>,
    /// Paths relative to the run directory.
    pub files: Vec<String>,
    pub tool_version: String,
    pub created_unix: u64,
}

impl RunManifest {
    fn same_run(&self, other: &RunManifest) -> bool {
        self.config_hash == other.config_hash && self.seeds == other.seeds
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PersistOutcome {
    Written(RunManifest),
    /// An identical run was already on disk; nothing was touched.
    Unchanged(RunManifest),
}

impl PersistOutcome {
    pub fn manifest(&self) -> &RunManifest {
        match self {
            PersistOutcome::Written(m) | PersistOutcome::Unchanged(m) => m,
        }
    }
}

pub fn trajectory_file_name(config_hash: &str, seed: u64) -> String {
    format!("traj_{}_seed{seed}.csv", &config_hash[..8.min(config_hash.len())])
}

/// Shortest round-trip text; scientific outside `[1e-4, 1e15)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// CSV bytes with header `t,norm_pre,<columns>`; floats use shortest
/// round-trip formatting.
pub fn trajectory_csv(record: &TrajectoryRecord) -> Result<Vec<u8>> {
    let cols = record.columns();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "norm_pre".to_string()];
    header.extend(cols.iter().map(|(n, _)| n.clone()));
    w.write_record(&header)?;
    for k in 0..record.times.len() {
        let mut row = vec![format_float(record.times[k]), format_float(record.norms_pre_renorm[k])];
        row.extend(cols.iter().map(|(_, v)| format_float(v[k])));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Header and columns of a trajectory CSV.
pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for row in r.records() {
        let row = row?;
        for (c, field) in cols.iter_mut().zip(row.iter()) {
            c.push(field.parse::<f64>().map_err(|e| Error::Manifest(format!("bad number `{field}`: {e}")))?);
        }
    }
    Ok((header, cols))
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    schema_version: u32,
    seed: u64,
    times: &'a [f64],
    norm_pre: &'a [f64],
    columns: serde_json::Map<String, serde_json::Value>,
    collapse: &'a Option<crate::integrator::CollapseEvent>,
    terminal_branch: &'a Option<String>,
    norm_drift: crate::integrator::NormDrift,
}

pub fn trajectory_json(record: &TrajectoryRecord) -> Result<String> {
    let columns = record
        .columns()
        .into_iter()
        .map(|(n, v)| (n, serde_json::json!(v)))
        .collect();
    Ok(serde_json::to_string_pretty(&TrajectoryJson {
        schema_version: SCHEMA_VERSION,
        seed: record.seed,
        times: &record.times,
        norm_pre: &record.norms_pre_renorm,
        columns,
        collapse: &record.collapse,
        terminal_branch: &record.terminal_branch,
        norm_drift: record.norm_drift,
    })?)
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

pub fn ensemble_json(stats: &EnsembleStats) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body: stats,
    })?)
}

pub fn audit_json(report: &AuditReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Reads a manifest; malformed content is an error, never a silent reset.
pub fn load_manifest(dir: impl AsRef<Path>) -> Result<Option<RunManifest>> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::Manifest(format!("{} is corrupted: {e}", path.display())))
}

pub fn load_run_config(dir: impl AsRef<Path>) -> Result<ScenarioConfig> {
    crate::scenario::load_config(dir.as_ref().join(CONFIG_FILE))
}

/// Writes a run. `records` must be in seed order.
pub fn persist_run(
    config: &ScenarioConfig,
    records: &[TrajectoryRecord],
    ensemble: Option<&EnsembleStats>,
    out_dir: impl AsRef<Path>,
) -> Result<PersistOutcome> {
    let dir = out_dir.as_ref();
    let hash = config.hash()?;
    let seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
    let mut files = vec![CONFIG_FILE.to_string()];
    files.extend(seeds.iter().map(|&s| trajectory_file_name(&hash, s)));
    if ensemble.is_some() {
        files.push(ENSEMBLE_FILE.into());
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        config_hash: hash.clone(),
        scenario: config.name.clone(),
        seeds,
        files,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    if let Some(existing) = load_manifest(dir)? {
        if existing.same_run(&manifest) && existing.files.iter().all(|f| dir.join(f).exists()) {
            return Ok(PersistOutcome::Unchanged(existing));
        }
        return Err(Error::Manifest(format!(
            "{} already holds a different run (config {}, seeds {:?}); refusing to overwrite",
            dir.display(),
            &existing.config_hash[..8.min(existing.config_hash.len())],
            existing.seeds
        )));
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), config.to_json_pretty()?)?;
    for r in records {
        fs::write(dir.join(trajectory_file_name(&hash, r.seed)), trajectory_csv(r)?)?;
    }
    if let Some(stats) = ensemble {
        fs::write(dir.join(ENSEMBLE_FILE), ensemble_json(stats)?)?;
    }
    // The manifest goes last so a partial write never looks complete.
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(PersistOutcome::Written(manifest))
}

pub fn write_audit(report: &AuditReport, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    let path = out_dir.as_ref().join(AUDIT_FILE);
    fs::create_dir_all(out_dir.as_ref())?;
    fs::write(&path, audit_json(report)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::qnd_two_level;

    fn short_run(seed: u64) -> (ScenarioConfig, TrajectoryRecord) {
        let mut cfg = qnd_two_level(0.3);
        cfg.plan.n_steps = 200;
        cfg.plan.record_every = 10;
        let rec = cfg.build().unwrap().run(Some(seed)).unwrap();
        (cfg, rec)
    }

    #[test]
    fn float_text_round_trips() {
        for x in [0.0, -0.0, 1.0, 0.3, 1.5e-68, -2.5e-5, 1e15, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(format_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits(), "{x}");
        }
        assert_eq!(format_float(1.5e-68), "1.5e-68");
    }

    #[test]
    fn csv_round_trip() {
        let (cfg, rec) = short_run(3);
        let dir = tempfile::tempdir().unwrap();
        persist_run(&cfg, std::slice::from_ref(&rec), None, dir.path()).unwrap();
        let name = trajectory_file_name(&cfg.hash().unwrap(), 3);
        let (header, cols) = read_trajectory_csv(dir.path().join(name)).unwrap();
        assert_eq!(&header[..2], ["t", "norm_pre"]);
        assert_eq!(cols[0], rec.times);
        for (i, (n, v)) in rec.columns().into_iter().enumerate() {
            assert_eq!(header[i + 2], n);
            assert_eq!(cols[i + 2], v);
        }
        assert_eq!(load_run_config(dir.path()).unwrap(), cfg);
    }

    #[test]
    fn idempotent_and_refusing() {
        let (cfg, rec) = short_run(5);
        let dir = tempfile::tempdir().unwrap();
        let first = persist_run(&cfg, std::slice::from_ref(&rec), None, dir.path()).unwrap();
        assert!(matches!(first, PersistOutcome::Written(_)));
        let again = persist_run(&cfg, std::slice::from_ref(&rec), None, dir.path()).unwrap();
        assert_eq!(again, PersistOutcome::Unchanged(first.manifest().clone()));
        let (_, other) = short_run(6);
        assert!(matches!(
            persist_run(&cfg, std::slice::from_ref(&other), None, dir.path()),
            Err(Error::Manifest(_))
        ));
    }

    #[test]
    fn corrupted_manifest_is_an_error() {
        let (cfg, rec) = short_run(1);
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), "{ not json").unwrap();
        assert!(matches!(load_manifest(dir.path()), Err(Error::Manifest(_))));
        assert!(persist_run(&cfg, std::slice::from_ref(&rec), None, dir.path()).is_err());
        assert_eq!(fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap(), "{ not json");
    }
}
