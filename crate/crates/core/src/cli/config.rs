//! Run configuration, read from TOML. Every key has a default, so an empty
//! file runs all experiments with the standard parameters.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CuspProfile;
use crate::operator::GridSpec;
use crate::spectral::default_truncation;

/// Environment variable holding the root for relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "CUSPWALK_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    EssSpectrum,
    GapScan,
    BottomCheck,
    Quasimode,
    Contraction,
    Smoothing,
    TemperedGap,
    TvDecay,
    Escape,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::EssSpectrum,
        ExperimentKind::GapScan,
        ExperimentKind::BottomCheck,
        ExperimentKind::Quasimode,
        ExperimentKind::Contraction,
        ExperimentKind::Smoothing,
        ExperimentKind::TemperedGap,
        ExperimentKind::TvDecay,
        ExperimentKind::Escape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EssSpectrum => "ess-spectrum",
            ExperimentKind::GapScan => "gap-scan",
            ExperimentKind::BottomCheck => "bottom-check",
            ExperimentKind::Quasimode => "quasimode",
            ExperimentKind::Contraction => "contraction",
            ExperimentKind::Smoothing => "smoothing",
            ExperimentKind::TemperedGap => "tempered-gap",
            ExperimentKind::TvDecay => "tv-decay",
            ExperimentKind::Escape => "escape",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiments: Vec<ExperimentKind>,
    /// Relative paths are taken under `$CUSPWALK_OUT` when it is set.
    pub output_dir: PathBuf,
    /// Sweep step sizes in parallel.
    pub parallel: bool,
    pub profile: ProfileSection,
    pub grid: GridSection,
    pub scan: ScanSection,
    pub ess_spectrum: EssSpectrumSection,
    pub bottom_check: BottomSection,
    pub quasimode: QuasimodeSection,
    pub contraction: ContractionSection,
    pub smoothing: SmoothingSection,
    pub tempered_gap: TemperedSection,
    pub tv_decay: TvSection,
    pub escape: EscapeSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiments: ExperimentKind::ALL.to_vec(),
            output_dir: PathBuf::from("results"),
            parallel: false,
            profile: ProfileSection::default(),
            grid: GridSection::default(),
            scan: ScanSection::default(),
            ess_spectrum: EssSpectrumSection::default(),
            bottom_check: BottomSection::default(),
            quasimode: QuasimodeSection::default(),
            contraction: ContractionSection::default(),
            smoothing: SmoothingSection::default(),
            tempered_gap: TemperedSection::default(),
            tv_decay: TvSection::default(),
            escape: EscapeSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub ell: f64,
    pub t0: f64,
    /// Truncation height for the scans; by default `max(t_h, t0) + 6`, at
    /// least 20.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            ell: 1.0,
            t0: 1.0,
            t_max: None,
        }
    }
}

impl ProfileSection {
    pub fn profile(&self) -> Result<CuspProfile> {
        CuspProfile::new(self.ell, self.t0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// `delta = delta_ratio * h`.
    pub delta_ratio: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { delta_ratio: 0.125 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub h: Vec<f64>,
    pub k_max: i64,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            h: vec![0.4, 0.2, 0.1, 0.05],
            k_max: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EssSpectrumSection {
    pub h: f64,
    pub t_max: Vec<f64>,
}

impl Default for EssSpectrumSection {
    fn default() -> Self {
        EssSpectrumSection {
            h: 0.2,
            t_max: vec![10.0, 20.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BottomSection {
    pub k: Vec<i64>,
    pub floor: f64,
}

impl Default for BottomSection {
    fn default() -> Self {
        BottomSection {
            k: vec![0, 1, 2, 4, 8],
            floor: -0.9,
        }
    }
}

/// The quasimode runs on its own profile: the default one has no Laplace
/// eigenvalue of the `y`-invariant mode in `(0, 4/3)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuasimodeSection {
    pub ell: f64,
    pub t0: f64,
    pub k: i64,
    pub h: Vec<f64>,
    /// The Laplace problem is solved on `[-span, span]`.
    pub span: f64,
    pub spacing: f64,
    /// Truncation for the walk eigenvalue search.
    pub t_max: f64,
}

impl Default for QuasimodeSection {
    fn default() -> Self {
        QuasimodeSection {
            ell: 20.0,
            t0: 1.0,
            k: 1,
            h: vec![0.4, 0.2, 0.1],
            span: 5.0,
            spacing: 0.001,
            t_max: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractionSection {
    pub k: Vec<i64>,
    pub tau: Vec<f64>,
}

impl Default for ContractionSection {
    fn default() -> Self {
        ContractionSection {
            k: vec![1, 2, 4, 8],
            tau: vec![2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSection {
    pub k: Vec<i64>,
}

impl Default for SmoothingSection {
    fn default() -> Self {
        SmoothingSection { k: vec![0, 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperedSection {
    /// `exp`, `exp-half` or `uniform`.
    pub densities: Vec<String>,
    pub h: Vec<f64>,
}

impl Default for TemperedSection {
    fn default() -> Self {
        TemperedSection {
            densities: vec!["exp".into(), "exp-half".into()],
            h: vec![0.4, 0.2, 0.1, 0.04],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvSection {
    pub h: f64,
    pub walkers: usize,
    pub steps: usize,
    pub seed: u64,
    /// Start height; the start is `(start, 0)`.
    pub start: f64,
    /// Steps of the noise-free evolution used for the rate.
    pub deterministic_steps: usize,
    /// Start heights for the prefactor trend.
    pub prefactor_tau: Vec<f64>,
}

impl Default for TvSection {
    fn default() -> Self {
        TvSection {
            h: 0.5,
            walkers: 10_000,
            steps: 200,
            seed: 1,
            start: 0.5,
            deterministic_steps: 1000,
            prefactor_tau: vec![0.5, 2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscapeSection {
    pub h: f64,
    pub n: usize,
    pub walkers: usize,
    pub seed: u64,
}

impl Default for EscapeSection {
    fn default() -> Self {
        EscapeSection {
            h: 0.2,
            n: 40,
            walkers: 10_000,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("{field}: {why}")));
        self.profile.profile().map_err(|e| Error::Config(format!("profile: {e}")))?;
        if !(self.grid.delta_ratio > 0.0 && self.grid.delta_ratio <= 0.25) {
            return bad("grid.delta_ratio", "must lie in (0, 1/4]");
        }
        if self.scan.h.len() < 2 || self.scan.h.iter().any(|&h| !(h > 0.0)) {
            return bad("scan.h", "needs at least two positive step sizes");
        }
        if self.scan.k_max < 1 {
            return bad("scan.k_max", "must be at least 1");
        }
        if self.ess_spectrum.t_max.len() < 2 {
            return bad("ess_spectrum.t_max", "needs at least two truncations");
        }
        if self.quasimode.h.len() < 2 {
            return bad("quasimode.h", "needs at least two step sizes");
        }
        if self.tempered_gap.h.len() < 2 {
            return bad("tempered_gap.h", "needs at least two step sizes");
        }
        for d in &self.tempered_gap.densities {
            crate::tempered::RhoSpec::from_name(d).map_err(|e| Error::Config(format!("tempered_gap.densities: {e}")))?;
        }
        if self.tv_decay.walkers < 1000 {
            return bad("tv_decay.walkers", "must be at least 1000");
        }
        if self.escape.walkers < 1000 {
            return bad("escape.walkers", "must be at least 1000");
        }
        Ok(())
    }

    /// Grid for step `h` on the main profile.
    pub fn grid_for(&self, profile: &CuspProfile, h: f64) -> Result<GridSpec> {
        let delta = self.grid.delta_ratio * h;
        let t_max = self
            .profile
            .t_max
            .unwrap_or_else(|| default_truncation(profile, h));
        GridSpec::symmetric(t_max, delta)
    }

    /// Output directory after applying `$CUSPWALK_OUT`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.experiments.len(), 9);
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.experiments = vec![ExperimentKind::GapScan, ExperimentKind::TvDecay];
        cfg.profile.t_max = Some(12.0);
        cfg.tv_decay.seed = 99;
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let plain = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&plain.to_toml().unwrap()).unwrap(), plain);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::from_toml("[scan]\nk_max = \"many\"\n").unwrap_err().to_string();
        assert!(err.contains("k_max") && err.contains("line 2"), "{err}");
        let err = ExperimentConfig::from_toml("[scan]\nhh = [0.1]\n").unwrap_err().to_string();
        assert!(err.contains("hh"), "{err}");
        let err = ExperimentConfig::from_toml("experiments = [\"gap\"]\n").unwrap_err().to_string();
        assert!(err.contains("gap"), "{err}");
        let err = ExperimentConfig::from_toml("[grid]\ndelta_ratio = 0.5\n").unwrap_err().to_string();
        assert!(err.contains("grid.delta_ratio"), "{err}");
    }

    #[test]
    fn kinds_parse() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("nope".parse::<ExperimentKind>().is_err());
    }
}
