use std::env;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::active::InitialPool;
use crate::error::{Error, Result};
use crate::eval::TiePolicy;
use crate::pairs::Mode;
use crate::sampling::{Gamma, Strategy};
use crate::solver::SolverOptions;

/// Environment variable naming the directory searched for relative dataset paths.
pub const DATA_DIR_VAR: &str = "ASRANK_DATA_DIR";

/// A learner evaluated by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Active(Strategy),
    /// Point-wise weighted SVM on all pseudo-pairs.
    Wsvm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Active(s) => write!(f, "{s}"),
            Method::Wsvm => f.write_str("wsvm"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("wsvm") {
            return Ok(Method::Wsvm);
        }
        s.parse::<Strategy>()
            .map(Method::Active)
            .map_err(|_| Error::config(format!("unknown strategy '{s}'")))
    }
}

/// A gamma value as written in a config file: a number or `"uniform"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Number(f64),
    Text(String),
}

impl GammaSpec {
    fn resolve(&self) -> Result<Gamma> {
        match self {
            GammaSpec::Number(g) => g.to_string().parse(),
            GammaSpec::Text(s) => s.parse(),
        }
    }
}

/// One layer of experiment settings. Every field is optional so that a
/// config file and command-line flags can be stacked.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub datasets: Option<Vec<PathBuf>>,
    /// Held-out evaluation file; when absent, k-fold cross validation is used.
    pub test: Option<PathBuf>,
    pub folds: Option<usize>,
    pub strategies: Option<Vec<String>>,
    pub gammas: Option<Vec<GammaSpec>>,
    pub budget: Option<usize>,
    pub batch: Option<usize>,
    pub c: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub tie_policy: Option<String>,
    pub mode: Option<String>,
    pub output: Option<PathBuf>,
    /// One-vs-rest: instances with this label are positive.
    pub positive_label: Option<f64>,
    pub bias_correction: Option<bool>,
    pub initial_pool: Option<String>,
    pub max_attempts: Option<u32>,
    pub tol: Option<f64>,
    pub max_sweeps: Option<usize>,
    /// Method name used as the t-test reference in the summary.
    pub reference: Option<String>,
    /// Record wall-clock seconds in the curve file. Off by default so that
    /// outputs are byte-identical across runs.
    pub timing: Option<bool>,
    pub save_models: Option<bool>,
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: ConfigLayer) -> ConfigLayer {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigLayer { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            datasets,
            test,
            folds,
            strategies,
            gammas,
            budget,
            batch,
            c,
            seeds,
            tie_policy,
            mode,
            output,
            positive_label,
            bias_correction,
            initial_pool,
            max_attempts,
            tol,
            max_sweeps,
            reference,
            timing,
            save_models
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalMode {
    Holdout(PathBuf),
    CrossValidation(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub datasets: Vec<PathBuf>,
    pub eval: EvalMode,
    pub methods: Vec<Method>,
    pub gammas: Vec<Gamma>,
    pub budget: usize,
    pub batch: usize,
    pub c: f64,
    pub seeds: Vec<u64>,
    pub tie_policy: TiePolicy,
    pub mode: Mode,
    pub output: PathBuf,
    pub positive_label: Option<f64>,
    pub bias_correction: bool,
    pub initial_pool: InitialPool,
    pub max_attempts: u32,
    pub solver: SolverOptions,
    pub reference: Option<Method>,
    pub timing: bool,
    pub save_models: bool,
}

/// Looks `p` up relative to the data directory when it does not exist as given.
pub fn resolve_data_path(p: &Path) -> PathBuf {
    if p.is_relative() && !p.exists() {
        if let Some(dir) = env::var_os(DATA_DIR_VAR) {
            let candidate = Path::new(&dir).join(p);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    p.to_path_buf()
}

impl ExperimentConfig {
    pub fn from_layer(layer: ConfigLayer) -> Result<Self> {
        let datasets: Vec<PathBuf> = layer
            .datasets
            .ok_or_else(|| Error::config("no dataset given"))?
            .iter()
            .map(|p| resolve_data_path(p))
            .collect();
        if datasets.is_empty() {
            return Err(Error::config("no dataset given"));
        }
        let eval = match layer.test {
            Some(p) => EvalMode::Holdout(resolve_data_path(&p)),
            None => {
                let k = layer.folds.unwrap_or(5);
                if k < 2 {
                    return Err(Error::config(format!(
                        "cross validation needs k >= 2, got {k}"
                    )));
                }
                EvalMode::CrossValidation(k)
            }
        };
        let methods = layer
            .strategies
            .unwrap_or_else(|| vec!["soft-close".into()])
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Method>>>()?;
        if methods.is_empty() {
            return Err(Error::config("no strategies given"));
        }
        let gammas = match layer.gammas {
            Some(g) => g
                .iter()
                .map(GammaSpec::resolve)
                .collect::<Result<Vec<_>>>()?,
            None => vec![Gamma::Value(1.0)],
        };
        if gammas.is_empty() {
            return Err(Error::config("no gamma values given"));
        }
        let seeds = layer.seeds.unwrap_or_else(|| (0..10).collect());
        if seeds.is_empty() {
            return Err(Error::config("no seeds given"));
        }
        let budget = layer.budget.unwrap_or(8000);
        let batch = layer.batch.unwrap_or(100);
        if budget == 0 || batch == 0 || batch > budget {
            return Err(Error::config(format!(
                "need 0 < batch <= budget, got batch {batch} and budget {budget}"
            )));
        }
        let c = layer.c.unwrap_or(0.1);
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::config(format!("C must be positive, got {c}")));
        }
        let initial_pool = match layer.initial_pool.as_deref() {
            None | Some("strategy") => InitialPool::Strategy,
            Some("uniform") => InitialPool::Uniform,
            Some(other) => {
                return Err(Error::config(format!("unknown initial pool '{other}'")));
            }
        };
        let defaults = SolverOptions::default();
        let solver = SolverOptions {
            tol: layer.tol.unwrap_or(defaults.tol),
            max_sweeps: layer.max_sweeps.unwrap_or(defaults.max_sweeps),
        };
        if !(solver.tol > 0.0) {
            return Err(Error::config("solver tolerance must be positive"));
        }
        let max_attempts = layer.max_attempts.unwrap_or(10_000);
        if max_attempts == 0 {
            return Err(Error::config("max_attempts must be positive"));
        }
        Ok(Self {
            datasets,
            eval,
            methods,
            gammas,
            budget,
            batch,
            c,
            seeds,
            tie_policy: match layer.tie_policy {
                Some(t) => t.parse()?,
                None => TiePolicy::default(),
            },
            mode: match layer.mode {
                Some(m) => m.parse()?,
                None => Mode::Plain,
            },
            output: layer.output.unwrap_or_else(|| PathBuf::from("out")),
            positive_label: layer.positive_label,
            bias_correction: layer.bias_correction.unwrap_or(true),
            initial_pool,
            max_attempts,
            solver,
            reference: layer.reference.map(|r| r.parse()).transpose()?,
            timing: layer.timing.unwrap_or(false),
            save_models: layer.save_models.unwrap_or(true),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_layer_and_overrides() {
        let file = ConfigLayer::from_toml(
            r#"
            datasets = ["a.txt"]
            strategies = ["SoftClose", "random", "wsvm"]
            gammas = [1, 0.5, "uniform"]
            budget = 200
            batch = 20
            seeds = [1, 2]
            mode = "threshold"
            "#,
        )
        .unwrap();
        let cli = ConfigLayer {
            budget: Some(400),
            folds: Some(3),
            ..ConfigLayer::default()
        };
        let cfg = ExperimentConfig::from_layer(file.overlay(cli)).unwrap();
        assert_eq!(cfg.budget, 400);
        assert_eq!(cfg.batch, 20);
        assert_eq!(cfg.eval, EvalMode::CrossValidation(3));
        assert_eq!(
            cfg.methods,
            vec![
                Method::Active(Strategy::SoftClose),
                Method::Active(Strategy::Random),
                Method::Wsvm
            ]
        );
        assert_eq!(
            cfg.gammas,
            vec![Gamma::Value(1.0), Gamma::Value(0.5), Gamma::Uniform]
        );
        assert_eq!(cfg.mode, Mode::Threshold);
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert!(!cfg.timing);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let base = ConfigLayer {
            datasets: Some(vec!["a".into()]),
            ..ConfigLayer::default()
        };
        assert!(ExperimentConfig::from_layer(base.clone()).is_ok());
        let bad =
            |over: ConfigLayer| ExperimentConfig::from_layer(base.clone().overlay(over)).is_err();
        assert!(bad(ConfigLayer {
            folds: Some(1),
            ..Default::default()
        }));
        assert!(bad(ConfigLayer {
            seeds: Some(vec![]),
            ..Default::default()
        }));
        assert!(bad(ConfigLayer {
            strategies: Some(vec!["greedy".into()]),
            ..Default::default()
        }));
        assert!(bad(ConfigLayer {
            gammas: Some(vec![GammaSpec::Number(2.0)]),
            ..Default::default()
        }));
        assert!(bad(ConfigLayer {
            batch: Some(9000),
            ..Default::default()
        }));
        assert!(ConfigLayer::from_toml("bogus = 1").is_err());
        assert!(ExperimentConfig::from_layer(ConfigLayer::default()).is_err());
    }
}
