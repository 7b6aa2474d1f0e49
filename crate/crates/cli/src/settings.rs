use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Deserialize;
use vfmodal::adaptive::FitConfig;
use vfmodal::modal::{DEFAULT_DOMINANCE_RATIO, DEFAULT_PF_THRESHOLD};
use vfmodal::pipeline::IdentifyConfig;
use vfmodal::reduction::DEFAULT_SIGMA_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Tuning flags shared by every subcommand. Unset flags fall back to the
/// `--config` file, then to the library defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Overrides {
    /// RMS fit tolerance [default: 1e-6]
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Initial pole count per entry [default: 2]
    #[arg(long, global = true)]
    pub init_order: Option<usize>,
    /// Cap on poles per entry [default: 60]
    #[arg(long, global = true)]
    pub max_order: Option<usize>,
    /// Relocation iterations per expansion round [default: 3]
    #[arg(long, global = true)]
    pub inner_iters: Option<usize>,
    /// Relative Hankel singular value cutoff [default: 5e-4]
    #[arg(long, global = true)]
    pub sigma_tol: Option<f64>,
    /// Participation magnitudes at or below this are not reported [default: 0.005]
    #[arg(long, global = true)]
    pub pf_threshold: Option<f64>,
    /// Participation ratio for wb/bb dominance [default: 4]
    #[arg(long, global = true)]
    pub dominance_ratio: Option<f64>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for synthetic data [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report format [default: csv]
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Record wall-clock timings (makes outputs run-dependent)
    #[arg(long, global = true)]
    #[serde(skip)]
    pub timing: bool,
    /// JSON file with any of the flags above, kebab-case keys
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Overrides {
    fn or(self, base: Overrides) -> Overrides {
        Overrides {
            tol: self.tol.or(base.tol),
            init_order: self.init_order.or(base.init_order),
            max_order: self.max_order.or(base.max_order),
            inner_iters: self.inner_iters.or(base.inner_iters),
            sigma_tol: self.sigma_tol.or(base.sigma_tol),
            pf_threshold: self.pf_threshold.or(base.pf_threshold),
            dominance_ratio: self.dominance_ratio.or(base.dominance_ratio),
            jobs: self.jobs.or(base.jobs),
            seed: self.seed.or(base.seed),
            format: self.format.or(base.format),
            timing: self.timing,
            config: self.config,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub identify: IdentifyConfig<f64>,
    pub pf_threshold: f64,
    pub dominance_ratio: f64,
    pub jobs: Option<usize>,
    pub seed: u64,
    pub format: OutputFormat,
    pub timing: bool,
}

fn load_config(path: &Path) -> anyhow::Result<Overrides> {
    let file = File::open(path).with_context(|| format!("opening config {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing config {}", path.display()))
}

impl Settings {
    pub fn resolve(flags: Overrides) -> anyhow::Result<Self> {
        let merged = match &flags.config {
            Some(path) => {
                let base = load_config(path)?;
                flags.or(base)
            }
            None => flags,
        };
        let defaults = IdentifyConfig::<f64>::default();
        let fit = FitConfig {
            tol: merged.tol.unwrap_or(defaults.fit.tol),
            inner_iters: merged.inner_iters.unwrap_or(defaults.fit.inner_iters),
            max_order: merged.max_order.unwrap_or(defaults.fit.max_order),
            ..defaults.fit
        };
        Ok(Self {
            identify: IdentifyConfig {
                fit,
                init_order: merged.init_order.unwrap_or(defaults.init_order),
                sigma_tol: merged.sigma_tol.unwrap_or(DEFAULT_SIGMA_TOL),
            },
            pf_threshold: merged.pf_threshold.unwrap_or(DEFAULT_PF_THRESHOLD),
            dominance_ratio: merged.dominance_ratio.unwrap_or(DEFAULT_DOMINANCE_RATIO),
            jobs: merged.jobs,
            seed: merged.seed.unwrap_or(0),
            format: merged.format.unwrap_or(OutputFormat::Csv),
            timing: merged.timing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library() {
        let s = Settings::resolve(Overrides::default()).unwrap();
        assert_eq!(s.identify, IdentifyConfig::default());
        assert_eq!(s.pf_threshold, 0.005);
        assert_eq!(s.dominance_ratio, 4.0);
        assert_eq!(s.format, OutputFormat::Csv);
    }

    #[test]
    fn flags_beat_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"tol": 1e-3, "sigma-tol": 1e-2, "format": "json"}"#).unwrap();
        let flags = Overrides {
            tol: Some(1e-5),
            config: Some(path),
            ..Overrides::default()
        };
        let s = Settings::resolve(flags).unwrap();
        assert_eq!(s.identify.fit.tol, 1e-5);
        assert_eq!(s.identify.sigma_tol, 1e-2);
        assert_eq!(s.format, OutputFormat::Json);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"tolerance": 1}"#).unwrap();
        let flags = Overrides {
            config: Some(path),
            ..Overrides::default()
        };
        assert!(Settings::resolve(flags).is_err());
    }
}
