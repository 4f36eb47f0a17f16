//! Run configuration: a versioned JSON document with unknown keys rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hierpop::det;
use hierpop::experiments::DEFAULT_TRAJECTORIES;
use hierpop::qsd::QsdConfig;
use hierpop::sim::{InitSpec, SimOptions};
use hierpop::{BirthLaw, GrowthLaw, ModelParams};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 2024;

/// Problems with the configuration itself. Exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub numerics: QsdConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Model parameters as written in a config. Linear fertility may be given
/// by its slope or by the deterministic stationary birth rate it should produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub mu: f64,
    pub birth: BirthSpec,
    pub growth: GrowthLaw,
    pub area: f64,
    #[serde(default)]
    pub x_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BirthSpec {
    Linear {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_bbar: Option<f64>,
    },
    Constant {
        rate: f64,
    },
    Tabulated {
        size: Vec<f64>,
        rate: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn resolve(&self) -> anyhow::Result<ModelParams> {
        let mut params = ModelParams {
            mu: self.mu,
            birth: BirthLaw::Linear { beta0: 1.0 },
            growth: self.growth.clone(),
            area: self.area,
            x_m: self.x_m,
        };
        params.birth = match &self.birth {
            BirthSpec::Linear {
                beta0: Some(b),
                target_bbar: None,
            } => BirthLaw::Linear { beta0: *b },
            BirthSpec::Linear {
                beta0: None,
                target_bbar: Some(t),
            } => {
                if !(*t > 0.0 && t.is_finite()) {
                    return Err(config_error(format!(
                        "model.birth.target_bbar must be > 0, got {t}"
                    )));
                }
                params
                    .validate()
                    .map_err(|e| config_error(format!("model: {e}")))?;
                BirthLaw::Linear {
                    beta0: det::beta0_for_bbar(*t, &params)?,
                }
            }
            BirthSpec::Linear { .. } => {
                return Err(config_error(
                    "model.birth: give exactly one of beta0 and target_bbar",
                ));
            }
            BirthSpec::Constant { rate } => BirthLaw::Constant { rate: *rate },
            BirthSpec::Tabulated { size, rate } => BirthLaw::Tabulated {
                size: size.clone(),
                rate: rate.clone(),
            },
        };
        params
            .validate()
            .map_err(|e| config_error(format!("model: {e}")))?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub simulate: SimulateConfig,
    pub ensemble: EnsembleConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Defaults to a Poisson birth history at the deterministic rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
    pub options: SimOptions,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
    pub n_traj: usize,
    pub t_end: f64,
    /// Defaults to five mean lifetimes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    /// Defaults to a twentieth of a mean lifetime.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_dt: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            init: None,
            n_traj: DEFAULT_TRAJECTORIES,
            t_end: 30.0,
            burn_in: None,
            snapshot_dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub areas: Vec<f64>,
    /// Add a Monte Carlo estimate per area using the ensemble settings.
    pub simulate: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            areas: (0..9).map(|i| 0.01 + 0.1 * i as f64).collect(),
            simulate: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(format!("at `{path}`: {}", e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn preset(name: &str) -> anyhow::Result<Self> {
        let text = match name {
            "fig2-rowA" => include_str!("../presets/fig2-rowA.json"),
            "fig2-rowB" => include_str!("../presets/fig2-rowB.json"),
            "fig2-rowC" => include_str!("../presets/fig2-rowC.json"),
            "fig3" => include_str!("../presets/fig3.json"),
            other => {
                return Err(config_error(format!(
                    "unknown preset `{other}`; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Self::from_json(text).with_context(|| format!("in preset {name}"))
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(ConfigError(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.numerics
            .validate()
            .map_err(|e| config_error(format!("numerics: {e}")))?;
        self.experiment
            .simulate
            .options
            .validate()
            .map_err(|e| config_error(format!("experiment.simulate.options: {e}")))?;
        let ens = &self.experiment.ensemble;
        if ens.n_traj == 0 {
            bail!(ConfigError(
                "experiment.ensemble.n_traj must be >= 1".into()
            ));
        }
        if !(ens.t_end > 0.0 && ens.t_end.is_finite()) {
            bail!(ConfigError(format!(
                "experiment.ensemble.t_end must be > 0, got {}",
                ens.t_end
            )));
        }
        if self
            .experiment
            .sweep
            .areas
            .iter()
            .any(|a| !(*a > 0.0 && a.is_finite()))
        {
            bail!(ConfigError("experiment.sweep.areas must all be > 0".into()));
        }
        Ok(())
    }
}

pub const PRESETS: [&str; 4] = ["fig2-rowA", "fig2-rowB", "fig2-rowC", "fig3"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_resolve() {
        for name in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            cfg.model.resolve().unwrap();
        }
    }

    #[test]
    fn target_bbar_gives_slope_from_closed_form() {
        let cfg = RunConfig::preset("fig2-rowB").unwrap();
        let p = cfg.model.resolve().unwrap();
        let beta0 = p.beta0().unwrap();
        // b̄ μ / (g0 z0 ln(1 + b̄/(μ z0))) with μ = 1, g0 = 10, z0 = 1, b̄ = 30
        let expected = 30.0 / (10.0 * 31f64.ln());
        assert!(
            (beta0 - expected).abs() < 1e-9 * expected,
            "{beta0} vs {expected}"
        );
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let text = r#"{"schema_version":1,"model":{"mu":1,"birth":{"kind":"linear","beta0":3},
            "growth":{"kind":"hyperbolic","g0":10,"z0":1},"area":1,"bogus":2}}"#;
        let err = RunConfig::from_json(text).unwrap_err().to_string();
        assert!(err.contains("model"), "{err}");
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn both_slope_and_target_rejected() {
        let spec = ModelSpec {
            mu: 1.0,
            birth: BirthSpec::Linear {
                beta0: Some(1.0),
                target_bbar: Some(30.0),
            },
            growth: GrowthLaw::hyperbolic(10.0, 1.0),
            area: 1.0,
            x_m: 0.0,
        };
        assert!(spec.resolve().is_err());
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let text = include_str!("../presets/fig3.json")
            .replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(RunConfig::from_json(&text).is_err());
    }
}
