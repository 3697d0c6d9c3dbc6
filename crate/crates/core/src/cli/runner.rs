//! Runs the configured experiments and writes their outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::experiments::{run_experiment, Check, Fit, Outcome};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
struct ManifestEntry<'a> {
    outputs: Vec<String>,
    fits: &'a BTreeMap<String, Fit>,
    checks: &'a [Check],
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    started: u64,
    finished: u64,
    experiments: BTreeMap<&'static str, ManifestEntry<'a>>,
    errors: Vec<String>,
}

/// Everything a run produced. Failed experiments are in `errors`, already
/// tagged with their name.
#[derive(Debug)]
pub struct RunSummary {
    pub outcomes: Vec<Outcome>,
    pub errors: Vec<Error>,
    pub output_dir: Option<PathBuf>,
}

impl RunSummary {
    pub fn checks(&self) -> impl Iterator<Item = (ExperimentKind, &Check)> {
        self.outcomes.iter().flat_map(|o| o.checks.iter().map(move |c| (o.kind, c)))
    }

    pub fn all_passed(&self) -> bool {
        self.errors.is_empty() && self.outcomes.iter().all(Outcome::passed)
    }

    /// One `PASS`/`FAIL` line per check, then one per failed experiment.
    pub fn report_lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .checks()
            .map(|(kind, c)| {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                format!("{tag} {kind}: {} ({})", c.name, c.detail)
            })
            .collect();
        lines.extend(self.errors.iter().map(|e| format!("FAIL {e}")));
        lines
    }

    /// Collapses the experiment errors into one.
    pub fn into_result(self) -> Result<Vec<Outcome>> {
        if self.errors.is_empty() {
            Ok(self.outcomes)
        } else {
            Err(Error::Experiments(self.errors))
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
{
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        fill(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs the experiments without touching the disk.
pub fn evaluate(cfg: &ExperimentConfig) -> RunSummary {
    let mut outcomes = Vec::new();
    let mut errors = Vec::new();
    for &kind in &cfg.experiments {
        info!("running {kind}");
        let start = std::time::Instant::now();
        match run_experiment(cfg, kind) {
            Ok(o) => {
                info!("{kind} done in {:.1} s", start.elapsed().as_secs_f64());
                outcomes.push(o);
            }
            Err(e) => {
                warn!("{kind} failed: {e}");
                errors.push(e.tagged(kind.name()));
            }
        }
    }
    RunSummary {
        outcomes,
        errors,
        output_dir: None,
    }
}

/// Runs the experiments and writes one CSV per table plus `manifest.json`
/// into the resolved output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.resolved_output_dir();
    fs::create_dir_all(&dir)?;
    let started = unix_now();
    let mut summary = evaluate(cfg);
    let mut experiments = BTreeMap::new();
    for o in &summary.outcomes {
        let mut outputs = Vec::new();
        for t in &o.tables {
            let path = dir.join(t.file_name());
            write_atomic(&path, |w| t.write(w))?;
            outputs.push(t.file_name());
        }
        experiments.insert(
            o.kind.name(),
            ManifestEntry {
                outputs,
                fits: &o.fits,
                checks: &o.checks,
            },
        );
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        started,
        finished: unix_now(),
        experiments,
        errors: summary.errors.iter().map(|e| e.to_string()).collect(),
    };
    write_atomic(&dir.join(MANIFEST_NAME), |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)?;
        Ok(())
    })?;
    summary.output_dir = Some(dir);
    Ok(summary)
}
