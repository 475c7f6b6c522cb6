//! Experiment configuration: one TOML file per run.
//!
//! Relative paths are resolved against the directory holding the config.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bntsp_core::dataset::SplitSpec;
use bntsp_core::hdtsp::OracleMode;
use bntsp_core::scoring::Metric;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Dp,
    Kopt2,
    #[default]
    Kopt3,
    LkhExternal,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Dp => "dp",
            Solver::Kopt2 => "kopt2",
            Solver::Kopt3 => "kopt3",
            Solver::LkhExternal => "lkh-external",
        })
    }
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dp" => Ok(Solver::Dp),
            "kopt2" => Ok(Solver::Kopt2),
            "kopt3" => Ok(Solver::Kopt3),
            "lkh-external" | "lkh" => Ok(Solver::LkhExternal),
            other => Err(format!(
                "unknown solver `{other}` (expected dp, kopt2, kopt3 or lkh-external)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub target: String,
    #[serde(default)]
    pub evidence: Vec<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_k() -> usize {
    3
}

fn default_restarts() -> usize {
    10
}

fn default_max_no_improve() -> usize {
    5000
}

fn default_alpha() -> f64 {
    1.0
}

fn default_lkh_runs() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: PathBuf,
    pub data: PathBuf,
    pub output_dir: PathBuf,
    pub split: SplitSpec,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "default_k")]
    pub max_in_degree: usize,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub oracle: OracleMode,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_no_improve")]
    pub max_no_improve: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub paper_phi_convention: bool,
    #[serde(default)]
    pub lkh_path: Option<PathBuf>,
    #[serde(default = "default_lkh_runs")]
    pub lkh_runs: usize,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

/// Command-line values that replace their config counterparts.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub solver: Option<Solver>,
    pub output_dir: Option<PathBuf>,
    pub lkh_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(CliError::config)?;
        for path in [&mut cfg.schema, &mut cfg.data, &mut cfg.output_dir] {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(lkh) = cfg.lkh_path.as_mut() {
            if lkh.is_relative() && lkh.components().count() > 1 {
                *lkh = base.join(&*lkh);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(solver) = overrides.solver {
            self.solver = solver;
        }
        if let Some(out) = &overrides.output_dir {
            self.output_dir = out.clone();
        }
        if let Some(lkh) = &overrides.lkh_path {
            self.lkh_path = Some(lkh.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(CliError::Config(format!("alpha must be ≥ 0, got {}", self.alpha)));
        }
        if self.split.test_count == 0 {
            return Err(CliError::Config("split.test_count must be positive".into()));
        }
        if self.solver == Solver::LkhExternal && self.lkh_path.is_none() {
            return Err(CliError::Config(
                "solver lkh-external needs lkh_path (or --lkh-path)".into(),
            ));
        }
        for task in &self.tasks {
            if !(0.0..=1.0).contains(&task.threshold) {
                return Err(CliError::Config(format!(
                    "task `{}` threshold must lie in [0, 1]",
                    task.name
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        schema = "s.toml"
        data = "d.csv"
        output_dir = "out"
        [split]
        test_count = 10
    "#;

    #[test]
    fn defaults_and_path_resolution() {
        let cfg = RunConfig::from_toml_str(MINIMAL, Path::new("/exp")).unwrap();
        assert_eq!(cfg.schema, PathBuf::from("/exp/s.toml"));
        assert_eq!(cfg.output_dir, PathBuf::from("/exp/out"));
        assert_eq!(cfg.max_in_degree, 3);
        assert_eq!(cfg.solver, Solver::Kopt3);
        assert_eq!(cfg.oracle, OracleMode::Greedy);
        assert_eq!(cfg.alpha, 1.0);
        assert!(!cfg.paper_phi_convention);
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::from_toml_str(MINIMAL, Path::new("/exp")).unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            solver: Some(Solver::Dp),
            output_dir: Some("/tmp/x".into()),
            lkh_path: None,
        })
        .unwrap();
        assert_eq!((cfg.seed, cfg.solver), (9, Solver::Dp));
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x"));
        let err = cfg.apply(&Overrides {
            solver: Some(Solver::LkhExternal),
            ..Default::default()
        });
        assert!(matches!(err, Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        let text = MINIMAL.replace("[split]", "bogus = 1\n[split]");
        assert!(RunConfig::from_toml_str(&text, Path::new(".")).is_err());
        let text = format!("{MINIMAL}\nbogus = 1\n");
        assert!(RunConfig::from_toml_str(&text, Path::new(".")).is_err());
        let text = MINIMAL.replace("[split]", "alpha = -1.0\n[split]");
        assert!(RunConfig::from_toml_str(&text, Path::new(".")).is_err());
        assert_eq!("kopt2".parse::<Solver>().unwrap(), Solver::Kopt2);
        assert!("annealing".parse::<Solver>().is_err());
    }
}
