//! Flat `key = value` experiment configuration with dotted section keys.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! skipped. Organisations appear as `org.<id>.path = <csv>` and keep their
//! file order. Every training field defaults to the standard experiment
//! values (3 epochs, batch 2048, local learning rate 0.001, 10 rounds,
//! server Adam at 0.05), so a minimal config is just organisations plus an
//! output directory.

use std::fmt;
use std::path::{Path, PathBuf};

use fednids_core::federation::ServerOptimizer;
use fednids_core::model::{AdamHyper, TrainingConfig};

/// Configuration or config-file error; the front end maps these to the
/// input-error exit status.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(message: impl Into<String>) -> ConfigError {
    ConfigError(message.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Federated,
    Centralised,
    Localised,
    All,
}

impl Scenario {
    pub fn parse(value: &str) -> Result<Self, ConfigError> {
        match value {
            "federated" => Ok(Scenario::Federated),
            "centralised" => Ok(Scenario::Centralised),
            "localised" => Ok(Scenario::Localised),
            "all" => Ok(Scenario::All),
            other => Err(err(format!(
                "unknown scenario {other:?} (expected federated, centralised, localised or all)"
            ))),
        }
    }

    /// The concrete scenarios to execute, with `all` expanded.
    pub fn expand(self) -> Vec<Scenario> {
        match self {
            Scenario::All => vec![
                Scenario::Federated,
                Scenario::Centralised,
                Scenario::Localised,
            ],
            one => vec![one],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Scenario::Federated => "federated",
            Scenario::Centralised => "centralised",
            Scenario::Localised => "localised",
            Scenario::All => "all",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrgConfig {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub train_fraction: f64,
    /// Per-organisation row cap applied after balancing, split equally
    /// between the classes; `None` keeps everything.
    pub subsample_cap: Option<usize>,
    pub local: TrainingConfig,
    pub rounds: usize,
    pub server: ServerOptimizer,
    /// Organisations in config-file order.
    pub orgs: Vec<OrgConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::All,
            seed: 42,
            out_dir: None,
            train_fraction: 0.7,
            subsample_cap: Some(20_000),
            local: TrainingConfig::default(),
            rounds: 10,
            server: ServerOptimizer::default(),
            orgs: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
            .map_err(|e| err(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = ExperimentConfig::default();
        let mut server_learning_rate: Option<f64> = None;
        let mut server_kind: Option<String> = None;
        let mut seen: Vec<String> = Vec::new();

        for (index, raw) in text.lines().enumerate() {
            let line_no = index + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {line_no}: expected `key = value`")))?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(err(format!("line {line_no}: empty value for {key:?}")));
            }
            if seen.iter().any(|k| k == key) {
                return Err(err(format!("line {line_no}: duplicate key {key:?}")));
            }
            seen.push(key.to_string());

            let fail = |detail: String| err(format!("line {line_no}: {detail}"));
            match key {
                "scenario" => config.scenario = Scenario::parse(value).map_err(|e| fail(e.0))?,
                "seed" => config.seed = parse_num(key, value).map_err(|e| fail(e.0))?,
                "out" => config.out_dir = Some(PathBuf::from(value)),
                "train_fraction" => {
                    config.train_fraction = parse_num(key, value).map_err(|e| fail(e.0))?
                }
                "subsample_cap" => {
                    config.subsample_cap = if value == "none" {
                        None
                    } else {
                        Some(parse_num(key, value).map_err(|e| fail(e.0))?)
                    }
                }
                "local.epochs" => config.local.epochs = parse_num(key, value).map_err(|e| fail(e.0))?,
                "local.batch_size" => {
                    config.local.batch_size = parse_num(key, value).map_err(|e| fail(e.0))?
                }
                "local.learning_rate" => {
                    config.local.learning_rate = parse_num(key, value).map_err(|e| fail(e.0))?
                }
                "local.dropout_rate" => {
                    config.local.dropout_rate = parse_num(key, value).map_err(|e| fail(e.0))?
                }
                "local.beta1" => config.local.beta1 = parse_num(key, value).map_err(|e| fail(e.0))?,
                "local.beta2" => config.local.beta2 = parse_num(key, value).map_err(|e| fail(e.0))?,
                "local.epsilon" => {
                    config.local.epsilon = parse_num(key, value).map_err(|e| fail(e.0))?
                }
                "federated.rounds" => config.rounds = parse_num(key, value).map_err(|e| fail(e.0))?,
                "federated.server" => server_kind = Some(value.to_string()),
                "federated.server_learning_rate" => {
                    server_learning_rate = Some(parse_num(key, value).map_err(|e| fail(e.0))?)
                }
                other => {
                    if let Some(rest) = other.strip_prefix("org.") {
                        let id = rest.strip_suffix(".path").ok_or_else(|| {
                            fail(format!("unknown key {other:?} (expected org.<id>.path)"))
                        })?;
                        if id.is_empty() {
                            return Err(fail("empty organisation id".to_string()));
                        }
                        config.orgs.push(OrgConfig {
                            id: id.to_string(),
                            path: PathBuf::from(value),
                        });
                    } else {
                        return Err(fail(format!("unknown key {other:?}")));
                    }
                }
            }
        }

        config.server = match (server_kind.as_deref(), server_learning_rate) {
            (Some("assignment"), None) => ServerOptimizer::Assignment,
            (Some("assignment"), Some(_)) => {
                return Err(err(
                    "federated.server_learning_rate is meaningless with an assignment server",
                ))
            }
            (Some("adam") | None, rate) => {
                let mut hyper = match ServerOptimizer::default() {
                    ServerOptimizer::Adam(h) => h,
                    ServerOptimizer::Assignment => unreachable!("default server is Adam"),
                };
                if let Some(rate) = rate {
                    hyper.learning_rate = rate;
                }
                ServerOptimizer::Adam(hyper)
            }
            (Some(other), _) => {
                return Err(err(format!(
                    "unknown federated.server {other:?} (expected adam or assignment)"
                )))
            }
        };
        config.local.seed = config.seed;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.orgs.is_empty() {
            return Err(err("at least one org.<id>.path entry is required"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(err(format!(
                "train_fraction must be inside (0, 1), got {}",
                self.train_fraction
            )));
        }
        if let Some(cap) = self.subsample_cap {
            if cap < 2 {
                return Err(err("subsample_cap must be at least 2 (one row per class)"));
            }
        }
        if self.local.epochs == 0 || self.local.batch_size == 0 || self.rounds == 0 {
            return Err(err("epochs, batch size and rounds must all be at least 1"));
        }
        if !(0.0..1.0).contains(&self.local.dropout_rate) {
            return Err(err(format!(
                "local.dropout_rate must be in [0, 1), got {}",
                self.local.dropout_rate
            )));
        }
        Ok(())
    }

    /// Server Adam hyper-parameters, if the server optimizer is Adam.
    pub fn server_adam(&self) -> Option<AdamHyper> {
        match self.server {
            ServerOptimizer::Adam(h) => Some(h),
            ServerOptimizer::Assignment => None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| err(format!("invalid value {value:?} for {key}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# two organisations
org.enterprise.path = /data/enterprise.csv
org.iot.path = /data/iot.csv
out = /tmp/run
";

    #[test]
    fn minimal_config_gets_standard_defaults() {
        let config = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(config.scenario, Scenario::All);
        assert_eq!(config.seed, 42);
        assert_eq!(config.local.epochs, 3);
        assert_eq!(config.local.batch_size, 2048);
        assert_eq!(config.local.learning_rate, 0.001);
        assert_eq!(config.local.dropout_rate, 0.4);
        assert_eq!(config.rounds, 10);
        assert_eq!(config.subsample_cap, Some(20_000));
        assert_eq!(config.train_fraction, 0.7);
        match config.server {
            ServerOptimizer::Adam(h) => assert_eq!(h.learning_rate, 0.05),
            ServerOptimizer::Assignment => panic!("default server must be Adam"),
        }
        let ids: Vec<&str> = config.orgs.iter().map(|o| o.id.as_str()).collect();
        assert_eq!(ids, ["enterprise", "iot"]);
    }

    #[test]
    fn overrides_are_applied() {
        let text = format!(
            "{MINIMAL}\nscenario = federated\nseed = 7\nfederated.rounds = 3\n\
             local.batch_size = 64\nsubsample_cap = none\nfederated.server = assignment\n"
        );
        let config = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(config.scenario, Scenario::Federated);
        assert_eq!(config.seed, 7);
        assert_eq!(config.rounds, 3);
        assert_eq!(config.local.batch_size, 64);
        assert_eq!(config.subsample_cap, None);
        assert_eq!(config.server, ServerOptimizer::Assignment);
        assert_eq!(config.local.seed, 7);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "org.a.path = x\nnot a pair\n";
        let message = ExperimentConfig::parse(bad).unwrap_err().to_string();
        assert!(message.contains("line 2"), "{message}");

        let unknown = "org.a.path = x\nout = y\nbatch = 9\n";
        let message = ExperimentConfig::parse(unknown).unwrap_err().to_string();
        assert!(message.contains("line 3") && message.contains("batch"), "{message}");
    }

    #[test]
    fn rejects_structural_mistakes() {
        assert!(ExperimentConfig::parse("out = /tmp\n").is_err());
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}train_fraction = 1.0\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}local.dropout_rate = 1.0\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}subsample_cap = 1\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}seed = 42\nseed = 43\n")).is_err());
        assert!(ExperimentConfig::parse(&format!(
            "{MINIMAL}federated.server = assignment\nfederated.server_learning_rate = 0.1\n"
        ))
        .is_err());
    }

    #[test]
    fn scenario_expansion() {
        assert_eq!(Scenario::All.expand().len(), 3);
        assert_eq!(Scenario::Federated.expand(), vec![Scenario::Federated]);
    }
}
