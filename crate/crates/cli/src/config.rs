//! Job configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use orbits_core::solver::SolveOptions;
use orbits_core::verify::VerifyOptions;
use orbits_core::{HalfInt, PresetConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Verify,
    Continue,
    Map,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Continue => "continue",
            Command::Map => "map",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    Csv,
    #[serde(alias = "svg")]
    SvgPath,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedSpec {
    /// `radius * e^{2 pi i winding tau}`.
    Circle { radius: f64, winding: f64 },
    /// `amplitude * cos(2 pi winding tau)`, a loop through the origin.
    CollisionSeed { amplitude: f64, winding: f64 },
    /// The `z` loop of an orbit file, or a bare loop file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub amplitude: f64,
    /// Keep real seeds real.
    #[serde(default)]
    pub real: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationConfig {
    /// Model parameter varied along the family.
    pub parameter: String,
    #[serde(default)]
    pub from: f64,
    #[serde(default = "one")]
    pub to: f64,
    pub steps: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    #[serde(default)]
    pub formats: Vec<ExportFormat>,
    /// Number of uniform time nodes; 0 means twice the loop resolution.
    #[serde(default)]
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    /// Optional; must agree with the subcommand when present.
    pub command: Option<Command>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Orbit file read by `verify` and `map`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    pub model: Option<PresetConfig>,
    /// Exactly one seed variant.
    pub seed: Option<SeedSpec>,
    pub perturbation: Option<Perturbation>,
    /// Seed of the perturbation generator; required with `perturbation`.
    pub random_seed: Option<u64>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    pub continuation: Option<ContinuationConfig>,
    pub export: Option<ExportConfig>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<JobConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = JobConfig::parse(&text)?;
        // relative paths inside the config are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(SeedSpec::File { path }) = &mut config.seed {
            anchor(path);
        }
        if let Some(p) = &mut config.input {
            anchor(p);
        }
        if let Some(p) = &mut config.output {
            anchor(p);
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<JobConfig, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Checks everything `command` needs before any work starts.
    pub fn validate(&self, command: Command) -> Result<(), ConfigError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(invalid(format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )));
            }
        }
        match command {
            Command::Solve | Command::Continue => {
                if self.model.is_none() {
                    return Err(invalid("missing [model]"));
                }
                self.solver.validate().map_err(|e| invalid(e.to_string()))?;
                let seed = self.seed.as_ref().ok_or_else(|| invalid("missing [seed]"))?;
                self.validate_seed(seed)?;
                if let Some(p) = &self.perturbation {
                    if !(p.amplitude >= 0.0 && p.amplitude.is_finite()) {
                        return Err(invalid("perturbation amplitude must be a finite nonnegative number"));
                    }
                    if self.random_seed.is_none() {
                        return Err(invalid("a perturbation needs an explicit random_seed"));
                    }
                }
                if command == Command::Continue {
                    let c = self
                        .continuation
                        .as_ref()
                        .ok_or_else(|| invalid("missing [continuation]"))?;
                    if c.steps < 2 {
                        return Err(invalid("continuation needs at least two steps"));
                    }
                    if !(c.from.is_finite() && c.to.is_finite()) {
                        return Err(invalid("continuation range must be finite"));
                    }
                }
            }
            Command::Verify | Command::Map => {
                if self.input.is_none() {
                    return Err(invalid("missing `input` orbit file"));
                }
            }
        }
        Ok(())
    }

    fn validate_seed(&self, seed: &SeedSpec) -> Result<(), ConfigError> {
        let winding = match seed {
            SeedSpec::Circle { radius, winding } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("circle radius must be positive"));
                }
                *winding
            }
            SeedSpec::CollisionSeed { amplitude, winding } => {
                if !(*amplitude > 0.0 && amplitude.is_finite()) {
                    return Err(invalid("collision seed amplitude must be positive"));
                }
                if *winding == 0.0 {
                    return Err(invalid("collision seed winding must be nonzero"));
                }
                *winding
            }
            SeedSpec::File { .. } => return Ok(()),
        };
        let w = HalfInt::nearest(winding)
            .filter(|w| w.value() == winding)
            .ok_or_else(|| invalid(format!("winding {winding} is not a half-integer")))?;
        if w.parity() != self.solver.parity {
            return Err(invalid(format!(
                "winding {w} needs parity {} but the solver asks for {}",
                w.parity(),
                self.solver.parity
            )));
        }
        Ok(())
    }
}
