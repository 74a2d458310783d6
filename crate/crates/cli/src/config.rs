//! TOML run and bench configurations.
//!
//! Unknown keys are rejected and every numeric field is checked when the file
//! is loaded, with errors naming the field as `section.key`.

use std::path::{Path, PathBuf};

use relaxvi::problems::ProblemRecipe;
use relaxvi::solver::{SolverOptions, StepRule, StepsizeSchedule, StopRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Explicit,
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Harmonic,
    Power,
    Constant,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub rule: RuleKind,
    /// Numerator of the rule; the constant value for `constant`.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Required for `power`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

fn default_theta() -> f64 {
    1.0
}

fn default_max_inner() -> usize {
    relaxvi::innerloop::DEFAULT_MAX_INNER
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
    /// Starting point; the origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            theta: default_theta(),
            max_inner: default_max_inner(),
            x0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    pub max_outer: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_dist: Option<f64>,
}

fn default_cadence() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default)]
    pub snapshots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            cadence: default_cadence(),
            snapshots: false,
            dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemRecipe,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub stop: StopConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn positive(field: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{field} must be finite and > 0, got {v}"
        )))
    }
}

fn at_least_one(field: &str, v: usize) -> CliResult<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field} must be >= 1, got {v}")))
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

impl ScheduleConfig {
    pub fn validate(&self) -> CliResult<()> {
        positive("schedule.scale", self.scale)?;
        match (self.rule, self.exponent) {
            (RuleKind::Power, None) => Err(CliError::Config(
                "schedule.exponent is required for the power rule".into(),
            )),
            (RuleKind::Power, Some(p)) if !(p > 0.5 && p <= 1.0) => Err(CliError::Config(format!(
                "schedule.exponent must lie in (0.5, 1], got {p}"
            ))),
            (RuleKind::Harmonic | RuleKind::Constant, Some(_)) => Err(CliError::Config(
                "schedule.exponent only applies to the power rule".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn to_schedule(&self) -> StepsizeSchedule {
        let rule = match self.rule {
            RuleKind::Harmonic => StepRule::Harmonic { scale: self.scale },
            RuleKind::Power => StepRule::Power {
                scale: self.scale,
                exponent: self.exponent.unwrap_or(1.0),
            },
            RuleKind::Constant => StepRule::Constant { value: self.scale },
        };
        match self.kind {
            ScheduleKind::Explicit => StepsizeSchedule::Explicit(rule),
            ScheduleKind::Adaptive => StepsizeSchedule::Adaptive(rule),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&read(path)?)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.schedule.validate()?;
        positive("solver.theta", self.solver.theta)?;
        at_least_one("solver.max_inner", self.solver.max_inner)?;
        if let Some(x0) = &self.solver.x0 {
            if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Config(
                    "solver.x0 must be a nonempty finite vector".into(),
                ));
            }
        }
        at_least_one("stop.max_outer", self.stop.max_outer)?;
        if let Some(t) = self.stop.target_err {
            positive("stop.target_err", t)?;
        }
        if let Some(t) = self.stop.target_dist {
            positive("stop.target_dist", t)?;
        }
        at_least_one("output.cadence", self.output.cadence)?;
        if let ProblemRecipe::QuadraticBall { m, radius, .. } = &self.problem {
            at_least_one("problem.m", *m)?;
            positive("problem.radius", *radius)?;
        }
        if let ProblemRecipe::AffinePolyhedron { m, dim, .. } = &self.problem {
            at_least_one("problem.m", *m)?;
            at_least_one("problem.dim", *dim)?;
        }
        Ok(())
    }

    /// Replaces the seed of seeded problem families.
    pub fn set_seed(&mut self, new_seed: u64) {
        if let ProblemRecipe::AffinePolyhedron { seed, .. } = &mut self.problem {
            *seed = new_seed;
        }
    }

    pub fn seed(&self) -> u64 {
        match &self.problem {
            ProblemRecipe::AffinePolyhedron { seed, .. } => *seed,
            _ => 0,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            theta: self.solver.theta,
            max_inner: self.solver.max_inner,
            stop: StopRule {
                max_outer: self.stop.max_outer,
                target_err: self.stop.target_err,
                target_dist: self.stop.target_dist,
            },
            cadence: self.output.cadence,
            snapshots: self.output.snapshots,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchFamily {
    /// Unit ball in the plane.
    Ball,
    /// A single affine constraint, where one inner step is always exact.
    Affine,
}

fn default_reps() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub family: BenchFamily,
    /// Values of `θα`.
    pub grid: Vec<f64>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl BenchConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&read(path)?)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: BenchConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.grid.is_empty() {
            return Err(CliError::Config("grid must not be empty".into()));
        }
        for g in &cfg.grid {
            positive("grid", *g)?;
        }
        at_least_one("repetitions", cfg.repetitions)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BALL: &str = r#"
[problem]
family = "quadratic-ball"
target = [2.0, 0.0]

[schedule]
kind = "explicit"
rule = "power"
exponent = 0.55

[stop]
max_outer = 1000
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::parse(BALL).unwrap();
        assert_eq!(cfg.solver.theta, 1.0);
        assert_eq!(cfg.output.cadence, 1);
        assert_eq!(cfg.schedule.scale, 1.0);
        assert_eq!(cfg.solver_options().stop.max_outer, 1000);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::parse(BALL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = format!("{BALL}\n[extra]\nfoo = 1\n");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
        let text = BALL.replace("max_outer = 1000", "max_outer = 1000\nmax_outr = 3");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn errors_name_the_field() {
        let text = format!("{BALL}\n[solver]\ntheta = -1.0\n");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("solver.theta"), "{err}");

        let text = BALL.replace("exponent = 0.55", "exponent = 0.4");
        assert!(RunConfig::parse(&text)
            .unwrap_err()
            .to_string()
            .contains("schedule.exponent"));

        let text = BALL.replace("max_outer = 1000", "max_outer = 0");
        assert!(RunConfig::parse(&text)
            .unwrap_err()
            .to_string()
            .contains("stop.max_outer"));
    }

    #[test]
    fn bench_config() {
        let cfg = BenchConfig::parse("family = \"ball\"\ngrid = [0.2, 0.1]\n").unwrap();
        assert_eq!(cfg.repetitions, 50);
        assert!(BenchConfig::parse("family = \"ball\"\ngrid = []\n").is_err());
        assert!(BenchConfig::parse("family = \"ball\"\ngrid = [0.1, -1.0]\n").is_err());
    }
}
