//! Experiment configuration files.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;

/// A scalar or a list of values to sweep over.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::One(x) => vec![*x],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum WorkingSet {
    #[default]
    Lscc,
    /// Nodes reachable from randomly chosen seeds, explored with teleports.
    Reachable,
    /// The graph exactly as loaded.
    AsIs,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    #[default]
    Uniform,
    Indegree,
    Evc,
    Custom,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    #[default]
    Static,
    Dynamic,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    #[default]
    Constant,
    Polynomial,
    Subexponential,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InDegreeKind {
    #[default]
    Exact,
    Online,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MergeKind {
    #[default]
    Pooled,
    Averaged,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    MhMax,
    MhSrw,
    Durw,
}

fn default_seed_count() -> usize {
    300
}

fn default_p_follow() -> f64 {
    0.95
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    #[serde(default)]
    pub working_set: WorkingSet,
    /// Number of seeds for the reachable working set.
    #[serde(default = "default_seed_count")]
    pub seeds: usize,
    /// Random seed for choosing those seeds.
    #[serde(default)]
    pub seed_choice: u64,
    #[serde(default = "default_p_follow")]
    pub p_follow: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub target: TargetKind,
    /// `node,probability` file for a custom target, keyed by original IDs.
    pub custom: Option<PathBuf>,
    #[serde(default)]
    pub mode: ModeKind,
    /// Updating probability for dynamic mode; a list sweeps.
    pub p: Option<OneOrMany>,
    #[serde(default)]
    pub schedule: ScheduleKind,
    /// Polynomial exponent; a list sweeps.
    pub alpha: Option<OneOrMany>,
    #[serde(default = "one")]
    pub agents: usize,
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub indegree: InDegreeKind,
    pub checkpoint_stride: Option<u64>,
    pub checkpoints_per_decade: Option<u32>,
    #[serde(default)]
    pub merge: MergeKind,
    #[serde(default)]
    pub shared_c: bool,
    #[serde(default = "one")]
    pub repetitions: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub method: BaselineMethod,
    /// Target of the MH walks; DURW always estimates the uniform law.
    #[serde(default)]
    pub target: TargetKind,
    #[serde(default = "one")]
    pub agents: usize,
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    /// DURW jump weight; a list sweeps.
    pub w: Option<OneOrMany>,
    /// DURW cost per jump; a list sweeps.
    pub c_jump: Option<OneOrMany>,
    pub checkpoint_stride: Option<u64>,
    pub checkpoints_per_decade: Option<u32>,
    /// Also run the `[run]` section and compare at equal query budgets.
    #[serde(default)]
    pub compare: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub run: Option<RunSection>,
    pub baseline: Option<BaselineSection>,
    #[serde(default)]
    pub output: OutputSection,
    /// Digest of the configuration text, embedded in every output file.
    #[serde(skip)]
    pub source_hash: String,
}

impl ExperimentConfig {
    /// Parses and checks a configuration without touching the filesystem.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text)?;
        cfg.check()?;
        cfg.source_hash = nmmc_core::metrics::config_hash(text);
        Ok(cfg)
    }

    /// Loads a file, resolves relative paths against its directory and
    /// checks that every input exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        ensure!(cfg.dataset.path.is_file(), "dataset {} not found", cfg.dataset.path.display());
        if let Some(custom) = cfg.run.as_ref().and_then(|r| r.custom.as_ref()) {
            ensure!(custom.is_file(), "custom target {} not found", custom.display());
        }
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.path);
        fix(&mut self.output.dir);
        if let Some(custom) = self.run.as_mut().and_then(|r| r.custom.as_mut()) {
            fix(custom);
        }
    }

    fn check(&self) -> Result<()> {
        let d = &self.dataset;
        ensure!(d.p_follow > 0.0 && d.p_follow < 1.0, "p_follow must lie in (0, 1)");
        if d.working_set == WorkingSet::Reachable {
            ensure!(d.seeds > 0, "reachable working set needs at least one seed");
        }
        if let Some(run) = &self.run {
            ensure!(run.steps > 0, "run.steps must be positive");
            ensure!(run.agents > 0, "run.agents must be positive");
            ensure!(run.repetitions > 0, "run.repetitions must be positive");
            match (run.mode, &run.p) {
                (ModeKind::Dynamic, None) => bail!("dynamic mode needs run.p"),
                (ModeKind::Static, Some(_)) => bail!("run.p only applies to dynamic mode"),
                _ => {}
            }
            for p in run.p.iter().flat_map(OneOrMany::values) {
                ensure!((0.0..=1.0).contains(&p), "updating probability {p} outside [0, 1]");
            }
            match (run.schedule, &run.alpha) {
                (ScheduleKind::Polynomial, None) => bail!("polynomial schedule needs run.alpha"),
                (ScheduleKind::Constant | ScheduleKind::Subexponential, Some(_)) => {
                    bail!("run.alpha only applies to the polynomial schedule")
                }
                _ => {}
            }
            for a in run.alpha.iter().flat_map(OneOrMany::values) {
                ensure!(a.is_finite() && a >= 0.0, "polynomial exponent {a} must be finite and >= 0");
            }
            ensure!(
                (run.target == TargetKind::Custom) == run.custom.is_some(),
                "run.custom is required exactly when target = \"custom\""
            );
            ensure!(
                !(run.target == TargetKind::Evc && d.working_set == WorkingSet::Reachable),
                "eigenvector centrality needs a strongly connected working set"
            );
            check_checkpoints(run.checkpoint_stride, run.checkpoints_per_decade)?;
        }
        if let Some(b) = &self.baseline {
            ensure!(b.steps > 0, "baseline.steps must be positive");
            ensure!(b.agents > 0, "baseline.agents must be positive");
            ensure!(b.target != TargetKind::Custom, "baselines take uniform, indegree or evc targets");
            if b.method == BaselineMethod::Durw {
                ensure!(b.target == TargetKind::Uniform, "DURW estimates the uniform distribution only");
                let w = b.w.as_ref().map(OneOrMany::values).unwrap_or_default();
                let c = b.c_jump.as_ref().map(OneOrMany::values).unwrap_or_default();
                ensure!(!w.is_empty() && !c.is_empty(), "DURW needs baseline.w and baseline.c_jump");
                ensure!(w.iter().all(|&x| x > 0.0 && x.is_finite()), "DURW jump weight must be positive");
                ensure!(c.iter().all(|&x| (1.0..f64::INFINITY).contains(&x)), "DURW jump cost must be at least 1");
            } else {
                ensure!(b.w.is_none() && b.c_jump.is_none(), "w and c_jump only apply to DURW");
            }
            ensure!(!b.compare || self.run.is_some(), "baseline.compare needs a [run] section");
            check_checkpoints(b.checkpoint_stride, b.checkpoints_per_decade)?;
        }
        Ok(())
    }
}

fn check_checkpoints(stride: Option<u64>, per_decade: Option<u32>) -> Result<()> {
    ensure!(
        stride.is_none() || per_decade.is_none(),
        "set checkpoint_stride or checkpoints_per_decade, not both"
    );
    ensure!(stride != Some(0) && per_decade != Some(0), "checkpoint spacing must be positive");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[dataset]\npath = \"g.txt\"\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.dataset.working_set, WorkingSet::Lscc);
        assert_eq!(cfg.output.dir, PathBuf::from("out"));
        assert!(cfg.run.is_none());
    }

    #[test]
    fn sweeps_accept_scalars_and_lists() {
        let text = format!(
            "{MINIMAL}[run]\nsteps = 10\nmode = \"dynamic\"\np = [1, 0.1, 0.01]\nschedule = \"polynomial\"\nalpha = 3\n"
        );
        let run = ExperimentConfig::from_toml_str(&text).unwrap().run.unwrap();
        assert_eq!(run.p.unwrap().values(), vec![1.0, 0.1, 0.01]);
        assert_eq!(run.alpha.unwrap().values(), vec![3.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str(&format!("{MINIMAL}colour = 1\n")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("{MINIMAL}[run]\nsteps = 1\nstep = 2\n")).is_err());
    }

    #[test]
    fn inconsistent_settings_are_rejected() {
        for bad in [
            "[run]\nsteps = 10\nmode = \"dynamic\"\n",
            "[run]\nsteps = 10\np = 0.5\n",
            "[run]\nsteps = 10\nschedule = \"polynomial\"\n",
            "[run]\nsteps = 0\n",
            "[run]\nsteps = 10\ntarget = \"custom\"\n",
            "[run]\nsteps = 10\ncheckpoint_stride = 5\ncheckpoints_per_decade = 3\n",
            "[baseline]\nmethod = \"durw\"\nsteps = 10\n",
            "[baseline]\nmethod = \"durw\"\nsteps = 10\nw = 1\nc_jump = 0.5\n",
            "[baseline]\nmethod = \"mh-max\"\nsteps = 10\ncompare = true\n",
        ] {
            let text = format!("{MINIMAL}{bad}");
            assert!(ExperimentConfig::from_toml_str(&text).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn load_resolves_paths_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.txt"), "0 1\n1 0\n").unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.dataset.path, dir.path().join("g.txt"));
        assert_eq!(cfg.output.dir, dir.path().join("out"));
        std::fs::write(&path, "[dataset]\npath = \"missing.txt\"\n").unwrap();
        assert!(ExperimentConfig::load(&path).is_err());
    }
}
