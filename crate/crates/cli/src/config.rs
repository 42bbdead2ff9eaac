//! Experiment config files and command-line overrides.
//!
//! A config is one JSON object. Only `lambda`, `delay` and `horizon` are
//! required:
//!
//! ```json
//! {
//!   "lambda": 20.0,
//!   "delay": { "type": "uniform", "h0": 1.0, "h1": 11.0 },
//!   "horizon": 300.0,
//!   "n_runs": 150,
//!   "seed": 5
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tangle_fluid::fluid::DEFAULT_LAMBDA_REF;
use tangle_fluid::stationary::DEFAULT_TOLERANCE;
use tangle_fluid::{
    ArrivalProcess, DelayModel, DelaySpec, FluidOptions, SimConfig, StationaryWindow,
};

use crate::error::CliError;

pub const SEED_ENV: &str = "TANGLE_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lambda: f64,
    pub delay: DelayModel,
    pub horizon: f64,
    #[serde(default)]
    pub arrival: ArrivalProcess,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "default_fluid_step")]
    pub fluid_step: f64,
    #[serde(default = "default_tolerance")]
    pub stationary_tol: f64,
    #[serde(default = "default_lambda_ref")]
    pub lambda_ref: f64,
    /// Averaging window for the stationary MC mean. Second half of the
    /// horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<StationaryWindow>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Also write `run_<k>.csv` for every replicate.
    #[serde(default)]
    pub write_runs: bool,
    /// Keep every k-th row of `l(t)` in `fluid.csv`.
    #[serde(default = "default_fluid_stride")]
    pub fluid_stride: usize,
}

fn default_sample_interval() -> f64 {
    1.0
}

fn default_runs() -> usize {
    1
}

fn default_fluid_step() -> f64 {
    0.01
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_lambda_ref() -> f64 {
    DEFAULT_LAMBDA_REF
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_fluid_stride() -> usize {
    10
}

/// Values given on the command line. Each one replaces the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_runs: Option<usize>,
    pub lambda: Option<f64>,
    pub horizon: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub arrival: Option<ArrivalProcess>,
    pub delay: Option<DelayModel>,
    pub fluid_step: Option<f64>,
    pub stationary_tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Builds a config from an optional file plus overrides, then fills in
    /// the seed (`--seed`, then the file, then `TANGLE_SEED`, then 1) and
    /// validates the result.
    pub fn resolve(
        path: Option<&Path>,
        overrides: &Overrides,
        env_seed: Option<&str>,
    ) -> Result<Self, CliError> {
        let mut config = match path {
            Some(p) => Self::load(p)?,
            None => {
                let missing = |flag: &str| {
                    CliError::Config(format!("no --config given and --{flag} is missing"))
                };
                Self::from_parts(
                    overrides.lambda.ok_or_else(|| missing("lambda"))?,
                    overrides.delay.ok_or_else(|| missing("type"))?,
                    overrides.horizon.ok_or_else(|| missing("horizon"))?,
                )
            }
        };
        config.apply(overrides);
        if config.seed.is_none() {
            config.seed = Some(match env_seed {
                Some(s) => s.trim().parse().map_err(|_| {
                    CliError::Config(format!("{SEED_ENV} must be an unsigned integer, got {s:?}"))
                })?,
                None => DEFAULT_SEED,
            });
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_parts(lambda: f64, delay: DelayModel, horizon: f64) -> Self {
        Self {
            lambda,
            delay,
            horizon,
            arrival: ArrivalProcess::default(),
            seed: None,
            sample_interval: default_sample_interval(),
            n_runs: default_runs(),
            fluid_step: default_fluid_step(),
            stationary_tol: default_tolerance(),
            lambda_ref: default_lambda_ref(),
            window: None,
            output_dir: default_output_dir(),
            write_runs: false,
            fluid_stride: default_fluid_stride(),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = Some(v);
        }
        if let Some(v) = o.n_runs {
            self.n_runs = v;
        }
        if let Some(v) = o.lambda {
            self.lambda = v;
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.arrival {
            self.arrival = v;
        }
        if let Some(v) = o.delay {
            self.delay = v;
        }
        if let Some(v) = o.fluid_step {
            self.fluid_step = v;
        }
        if let Some(v) = o.stationary_tol {
            self.stationary_tol = v;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.sim_config().validate()?;
        let bad = |field: &str, value: String, reason: &str| {
            Err(CliError::Config(format!("{field} = {value}: {reason}")))
        };
        if self.n_runs == 0 {
            return bad("n_runs", "0".into(), "need at least one run");
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.fluid_step) {
            return bad(
                "fluid_step",
                self.fluid_step.to_string(),
                "must be finite and positive",
            );
        }
        if !positive(self.stationary_tol) {
            return bad(
                "stationary_tol",
                self.stationary_tol.to_string(),
                "must be finite and positive",
            );
        }
        if !positive(self.lambda_ref) {
            return bad(
                "lambda_ref",
                self.lambda_ref.to_string(),
                "must be finite and positive",
            );
        }
        if self.fluid_stride == 0 {
            return bad("fluid_stride", "0".into(), "must be at least 1");
        }
        if let Some(w) = self.window {
            if !(w.start >= 0.0 && w.start < w.end && w.end <= self.horizon) {
                return bad(
                    "window",
                    format!("[{}, {}]", w.start, w.end),
                    "need 0 <= start < end <= horizon",
                );
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig::new(self.lambda, self.delay, self.horizon)
            .with_seed(self.seed())
            .with_arrival(self.arrival)
            .with_sample_interval(self.sample_interval)
    }

    pub fn fluid_options(&self) -> FluidOptions {
        FluidOptions::new(self.fluid_step, self.horizon).with_lambda_ref(self.lambda_ref)
    }

    pub fn stationary_window(&self) -> StationaryWindow {
        self.window
            .unwrap_or_else(|| StationaryWindow::second_half(self.horizon))
    }
}

/// Builds a delay law from `--type` and its parameter flags.
pub fn delay_from_flags(
    kind: Option<&str>,
    h: Option<f64>,
    mu: Option<f64>,
    h0: Option<f64>,
    h1: Option<f64>,
) -> Result<Option<DelayModel>, CliError> {
    let need = |name: &str, v: Option<f64>, kind: &str| {
        v.ok_or_else(|| CliError::Config(format!("--type {kind} needs --{name}")))
    };
    let spec = match kind {
        None => {
            if h.is_some() || mu.is_some() || h0.is_some() || h1.is_some() {
                return Err(CliError::Config(
                    "delay parameters given without --type".into(),
                ));
            }
            return Ok(None);
        }
        Some("fixed") => DelaySpec::Fixed {
            h: need("h", h, "fixed")?,
        },
        Some("exponential") => DelaySpec::Exponential {
            mu: need("mu", mu, "exponential")?,
        },
        Some("uniform") => DelaySpec::Uniform {
            h0: need("h0", h0, "uniform")?,
            h1: need("h1", h1, "uniform")?,
        },
        Some(other) => {
            return Err(CliError::Config(format!(
                "unknown delay type {other:?}; expected fixed, exponential or uniform"
            )))
        }
    };
    Ok(Some(DelayModel::try_from(spec)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"lambda": 20, "delay": {"type": "fixed", "h": 5}, "horizon": 300}"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.n_runs, 1);
        assert_eq!(c.arrival, ArrivalProcess::Poisson);
        assert_eq!(c.seed, None);
        assert_eq!(c.stationary_window(), StationaryWindow::second_half(300.0));
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let err = ExperimentConfig::from_json(
            "{\"lambda\": 20,\n \"delay\": {\"type\": \"fixed\", \"h\": 5},\n \"horizn\": 3}",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("horizn") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn invalid_delay_in_file_is_a_config_error() {
        let err = ExperimentConfig::from_json(
            r#"{"lambda": 20, "delay": {"type": "fixed", "h": 0}, "horizon": 300}"#,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("degenerate"));
    }

    #[test]
    fn seed_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, MINIMAL.replace("300}", "300, \"seed\": 9}")).unwrap();

        let flag = Overrides {
            seed: Some(4),
            ..Default::default()
        };
        let c = ExperimentConfig::resolve(Some(&path), &flag, Some("7")).unwrap();
        assert_eq!(c.seed, Some(4));
        let c = ExperimentConfig::resolve(Some(&path), &Overrides::default(), Some("7")).unwrap();
        assert_eq!(c.seed, Some(9));

        fs::write(&path, MINIMAL).unwrap();
        let c = ExperimentConfig::resolve(Some(&path), &Overrides::default(), Some("7")).unwrap();
        assert_eq!(c.seed, Some(7));
        let c = ExperimentConfig::resolve(Some(&path), &Overrides::default(), None).unwrap();
        assert_eq!(c.seed, Some(DEFAULT_SEED));
        assert!(ExperimentConfig::resolve(Some(&path), &Overrides::default(), Some("x")).is_err());
    }

    #[test]
    fn flags_alone_need_core_fields() {
        let o = Overrides {
            lambda: Some(20.0),
            delay: Some(DelayModel::fixed(5.0).unwrap()),
            ..Default::default()
        };
        let err = ExperimentConfig::resolve(None, &o, None).unwrap_err();
        assert!(err.to_string().contains("--horizon"));
        let o = Overrides {
            horizon: Some(50.0),
            ..o
        };
        assert!(ExperimentConfig::resolve(None, &o, None).is_ok());
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.n_runs = 0;
        assert!(c.validate().unwrap_err().to_string().contains("n_runs"));
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.window = Some(StationaryWindow {
            start: 100.0,
            end: 400.0,
        });
        assert!(c.validate().unwrap_err().to_string().contains("window"));
    }

    #[test]
    fn delay_flags() {
        assert_eq!(
            delay_from_flags(None, None, None, None, None).unwrap(),
            None
        );
        assert_eq!(
            delay_from_flags(Some("uniform"), None, None, Some(1.0), Some(11.0)).unwrap(),
            Some(DelayModel::uniform(1.0, 11.0).unwrap())
        );
        assert!(delay_from_flags(Some("uniform"), None, None, Some(1.0), None).is_err());
        assert!(delay_from_flags(None, Some(1.0), None, None, None).is_err());
        let err = delay_from_flags(Some("fixed"), Some(0.0), None, None, None).unwrap_err();
        assert!(err.to_string().contains("degenerate"));
    }

    #[test]
    fn json_round_trip() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.seed = Some(11);
        c.window = Some(StationaryWindow {
            start: 10.0,
            end: 20.0,
        });
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }
}
