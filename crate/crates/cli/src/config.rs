//! Experiment configuration: defaults, JSON file, command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fraclobc_core::barrier::{validate_exponents, ExponentWindow};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    LocalExistence,
    LobcSweep,
    EigenStability,
    BarrierReport,
    ConvolutionProps,
    FdiffValidation,
}

pub const EXPERIMENTS: [Experiment; 6] = [
    Experiment::LocalExistence,
    Experiment::LobcSweep,
    Experiment::EigenStability,
    Experiment::BarrierReport,
    Experiment::ConvolutionProps,
    Experiment::FdiffValidation,
];

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::LocalExistence => "local_existence",
            Self::LobcSweep => "lobc_sweep",
            Self::EigenStability => "eigen_stability",
            Self::BarrierReport => "barrier_report",
            Self::ConvolutionProps => "convolution_props",
            Self::FdiffValidation => "fdiff_validation",
        }
    }

    fn default_n(self) -> u64 {
        match self {
            Self::EigenStability => 1024,
            Self::FdiffValidation => 2048,
            Self::ConvolutionProps => 120,
            _ => 512,
        }
    }

    fn default_t(self) -> f64 {
        match self {
            Self::LocalExistence => 0.5,
            _ => 2.0,
        }
    }

    /// Experiment-specific parameters and their defaults.
    pub fn default_overrides(self) -> BTreeMap<String, Value> {
        use serde_json::json;
        let pairs: Vec<(&str, Value)> = match self {
            Self::LocalExistence => vec![
                ("amplitude", json!(0.05)),
                ("gamma", json!(1.0)),
                ("cfl", json!(0.9)),
                ("lobc_threshold", json!(0.05)),
                ("record_every", json!(20)),
                ("snapshot_every", json!(50)),
            ],
            Self::LobcSweep => vec![
                ("amplitude", json!(1.0)),
                ("scales", json!([0.5, 1.0, 2.0, 4.0, 8.0])),
                ("gamma", json!(1.0)),
                ("cfl", json!(0.9)),
                ("lobc_threshold", json!(0.05)),
                ("record_every", json!(200)),
            ],
            Self::EigenStability => vec![
                ("etas", json!([0.2, 0.1, 0.05, 0.025, 0.0])),
                ("collar", json!(0.1)),
            ],
            Self::BarrierReport => vec![
                ("alpha", json!(0.55)),
                ("beta", json!(0.6)),
                ("M", json!(1.0)),
                ("f_samples", json!(200)),
            ],
            Self::ConvolutionProps => vec![
                ("eps", json!(4e-3)),
                ("kappa", json!(1e-2)),
                ("delta", json!(1e-3)),
            ],
            Self::FdiffValidation => vec![("orders", json!([0.65, 0.75, 0.9]))],
        };
        pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EXPERIMENTS
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = EXPERIMENTS.iter().map(|e| e.name()).collect();
                ConfigError::new(
                    "experiment",
                    format!(
                        "unknown experiment '{s}' (expected one of {})",
                        names.join(", ")
                    ),
                )
            })
    }
}

/// Contents of a JSON config file; every field optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<Experiment>,
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub n: Option<u64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new("config", format!("cannot read {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line.
#[derive(Debug, Default, Clone)]
pub struct FlagConfig {
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub n: Option<u64>,
    pub t: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub overrides: Vec<(String, Value)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub s: f64,
    pub p: f64,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub overrides: BTreeMap<String, Value>,
    pub window: ExponentWindow,
}

/// Merges defaults, file and flags (later wins) and validates the result.
pub fn parse_config(
    experiment: Option<Experiment>,
    file: Option<&FileConfig>,
    flags: &FlagConfig,
) -> Result<ExperimentConfig, ConfigError> {
    let empty = FileConfig::default();
    let file = file.unwrap_or(&empty);
    let experiment = match (experiment, file.experiment) {
        (Some(a), Some(b)) if a != b => {
            return Err(ConfigError::new(
                "experiment",
                format!("command line names {a} but the config file names {b}"),
            ))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(ConfigError::new("experiment", "experiment is not given")),
    };
    let s = flags.s.or(file.s).unwrap_or(0.75);
    let p = flags.p.or(file.p).unwrap_or(2.0);
    let n = flags.n.or(file.n).unwrap_or(experiment.default_n());
    let t = flags.t.or(file.t).unwrap_or(experiment.default_t());
    let seed = flags.seed.or(file.seed).unwrap_or(0);
    let out_dir = flags
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));

    let mut overrides = experiment.default_overrides();
    for (k, v) in file
        .overrides
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .chain(flags.overrides.iter().cloned())
    {
        if !overrides.contains_key(&k) {
            let known: Vec<_> = overrides.keys().cloned().collect();
            return Err(ConfigError::new(
                format!("overrides.{k}"),
                format!(
                    "unknown parameter '{k}' for {experiment} (known: {})",
                    known.join(", ")
                ),
            ));
        }
        overrides.insert(k, v);
    }

    if !(s > 0.0 && s < 1.0) {
        return Err(ConfigError::new("s", "s must be in (0,1)"));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(ConfigError::new("p", "p must be a finite number above 1"));
    }
    if n < 16 || n > 1 << 16 {
        return Err(ConfigError::new("n", "n must lie between 16 and 65536"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(ConfigError::new("T", "T must be positive and finite"));
    }
    let cfg = ExperimentConfig {
        experiment,
        s,
        p,
        n: n as usize,
        t,
        seed,
        out_dir,
        overrides,
        window: validate_exponents(s, p),
    };
    cfg.check_overrides()?;
    Ok(cfg)
}

/// Parses `key=value`, reading the value as JSON when possible.
pub fn parse_override(arg: &str) -> Result<(String, Value), ConfigError> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| ConfigError::new("set", format!("expected key=value, got '{arg}'")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_owned()));
    Ok((k.trim().to_owned(), value))
}

impl ExperimentConfig {
    pub fn number(&self, key: &str) -> Result<f64, ConfigError> {
        self.overrides
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| {
                ConfigError::new(
                    format!("overrides.{key}"),
                    format!("overrides.{key} must be a number"),
                )
            })
    }

    pub fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.number(key)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(ConfigError::new(
                format!("overrides.{key}"),
                format!("overrides.{key} must be positive"),
            ))
        }
    }

    pub fn count(&self, key: &str) -> Result<usize, ConfigError> {
        self.overrides
            .get(key)
            .and_then(Value::as_u64)
            .filter(|&v| v >= 1)
            .map(|v| v as usize)
            .ok_or_else(|| {
                ConfigError::new(
                    format!("overrides.{key}"),
                    format!("overrides.{key} must be a positive integer"),
                )
            })
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let err = || {
            ConfigError::new(
                format!("overrides.{key}"),
                format!("overrides.{key} must be a list of numbers"),
            )
        };
        let arr = self
            .overrides
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(err)?;
        let v: Vec<f64> = arr
            .iter()
            .map(Value::as_f64)
            .collect::<Option<_>>()
            .ok_or_else(err)?;
        if v.is_empty() {
            return Err(err());
        }
        Ok(v)
    }

    /// Experiment-specific completeness and range checks.
    fn check_overrides(&self) -> Result<(), ConfigError> {
        let bad = |k: &str, m: &str| {
            Err(ConfigError::new(
                format!("overrides.{k}"),
                format!("overrides.{k} {m}"),
            ))
        };
        match self.experiment {
            Experiment::LocalExistence | Experiment::LobcSweep => {
                self.positive("amplitude")?;
                self.positive("gamma")?;
                self.positive("lobc_threshold")?;
                self.count("record_every")?;
                if self.experiment == Experiment::LocalExistence {
                    self.count("snapshot_every")?;
                } else if self.list("scales")?.iter().any(|&v| !(v > 0.0)) {
                    return bad("scales", "must be positive");
                }
                let cfl = self.positive("cfl")?;
                if cfl > 1.0 {
                    return bad("cfl", "must not exceed 1");
                }
            }
            Experiment::EigenStability => {
                let etas = self.list("etas")?;
                if etas.windows(2).any(|w| w[1] >= w[0])
                    || etas.iter().any(|&e| e < 0.0 || e >= 0.5)
                {
                    return bad("etas", "must be strictly decreasing values in [0, 0.5)");
                }
                let collar = self.positive("collar")?;
                if collar >= 0.5 - etas[0] {
                    return bad(
                        "collar",
                        "must be smaller than the half width of the smallest domain",
                    );
                }
            }
            Experiment::BarrierReport => {
                self.positive("alpha")?;
                self.positive("beta")?;
                self.positive("M")?;
                self.count("f_samples")?;
            }
            Experiment::ConvolutionProps => {
                let eps = self.positive("eps")?;
                self.positive("kappa")?;
                if self.positive("delta")? > eps {
                    return bad("delta", "must not exceed eps");
                }
            }
            Experiment::FdiffValidation => {
                if self.list("orders")?.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
                    return bad("orders", "must lie in (0,1)");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_then_file_then_flags() {
        let file = FileConfig {
            n: Some(512),
            s: Some(0.6),
            ..Default::default()
        };
        let flags = FlagConfig {
            n: Some(1024),
            ..Default::default()
        };
        let cfg = parse_config(Some(Experiment::LobcSweep), Some(&file), &flags).unwrap();
        assert_eq!(cfg.n, 1024);
        assert_eq!(cfg.s, 0.6);
        assert_eq!(cfg.p, 2.0);
        assert_eq!(cfg.t, 2.0);
    }

    #[test]
    fn rejects_bad_order() {
        let flags = FlagConfig {
            s: Some(1.2),
            ..Default::default()
        };
        let err = parse_config(Some(Experiment::LobcSweep), None, &flags).unwrap_err();
        assert_eq!(err.to_string(), "s must be in (0,1)");
        assert_eq!(err.field, "s");
    }

    #[test]
    fn window_attached() {
        let flags = FlagConfig {
            s: Some(0.75),
            p: Some(2.0),
            n: Some(1024),
            t: Some(2.0),
            ..Default::default()
        };
        let cfg = parse_config(Some(Experiment::LobcSweep), None, &flags).unwrap();
        assert_eq!(cfg.window.zone, fraclobc_core::barrier::Zone::Inside);
    }

    #[test]
    fn override_checks() {
        let flags = FlagConfig {
            overrides: vec![parse_override("bogus=1").unwrap()],
            ..Default::default()
        };
        let err = parse_config(Some(Experiment::LocalExistence), None, &flags).unwrap_err();
        assert_eq!(err.field, "overrides.bogus");
        let flags = FlagConfig {
            overrides: vec![parse_override("amplitude=-1").unwrap()],
            ..Default::default()
        };
        let err = parse_config(Some(Experiment::LocalExistence), None, &flags).unwrap_err();
        assert_eq!(err.field, "overrides.amplitude");
        let flags = FlagConfig {
            overrides: vec![parse_override("etas=[0.1,0.2]").unwrap()],
            ..Default::default()
        };
        assert!(parse_config(Some(Experiment::EigenStability), None, &flags).is_err());
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in EXPERIMENTS {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("nope".parse::<Experiment>().is_err());
    }
}
