//! JSON run configuration and variant-name parsing.

use serde::{Deserialize, Serialize};

use adukf::ad_model::{IntegratorConfig, ModelParams};
use adukf::scenario::{FeedPeak, ScenarioConfig};
use adukf::sigma_points::UkfTuning;
use adukf::ukf::{Formulation, NoiseMode};

use crate::AppError;

/// Valid variant names; constrained names may carry a formulation suffix.
pub const VARIANT_NAMES: [&str; 7] = [
    "ukf-add",
    "ukf-sr",
    "ukf-aug",
    "ukf-fully-aug",
    "cukf-add",
    "cukf-aug",
    "cukf-fully-aug",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedEntry {
    pub flow_l_per_d: f64,
    pub start_d: f64,
    pub duration_d: f64,
}

impl Default for FeedEntry {
    fn default() -> Self {
        Self {
            flow_l_per_d: 0.0,
            start_d: 0.0,
            duration_d: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioBlock {
    pub horizon_days: f64,
    pub dt_hours: f64,
    pub feeds: Vec<FeedEntry>,
    pub sigma: [f64; 3],
    pub seed: u64,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        Self {
            horizon_days: 7.0,
            dt_hours: 0.5,
            feeds: vec![
                FeedEntry {
                    flow_l_per_d: 168.0,
                    start_d: 2.5,
                    duration_d: 0.5,
                },
                FeedEntry {
                    flow_l_per_d: 72.0,
                    start_d: 5.5,
                    duration_d: 1.0,
                },
            ],
            sigma: [0.8, 1.0, 0.4],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterBlock {
    pub variant: String,
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub gamma_override: Option<f64>,
    /// Formulation for bare constrained variant names.
    pub formulation: String,
    pub solver_tol: f64,
}

impl Default for FilterBlock {
    fn default() -> Self {
        Self {
            variant: "ukf-add".to_string(),
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
            gamma_override: None,
            formulation: "qp".to_string(),
            solver_tol: 1e-8,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

fn default_gammas() -> Vec<Option<f64>> {
    vec![None, Some(1.0)]
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioBlock,
    pub filter: FilterBlock,
    /// Seed list for the benchmark sweep.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Scaling overrides swept for the unconstrained variants
    /// (`null` = nominal).
    #[serde(default = "default_gammas")]
    pub gamma_overrides: Vec<Option<f64>>,
}

impl RunConfig {
    pub fn load(path: Option<&std::path::Path>) -> Result<Self, AppError> {
        match path {
            None => Ok(Self {
                seeds: default_seeds(),
                gamma_overrides: default_gammas(),
                ..Self::default()
            }),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    AppError::usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| AppError::usage(format!("invalid config {}: {e}", p.display())))
            }
        }
    }

    pub fn scenario_config(&self, seed_override: Option<u64>) -> ScenarioConfig<f64> {
        let s = &self.scenario;
        ScenarioConfig {
            horizon_days: s.horizon_days,
            dt_hours: s.dt_hours,
            feeds: s
                .feeds
                .iter()
                .map(|f| FeedPeak {
                    flow: f.flow_l_per_d,
                    start: f.start_d,
                    duration: f.duration_d,
                })
                .collect(),
            sigma: s.sigma,
            seed: seed_override.unwrap_or(s.seed),
            true_params: ModelParams::plant(),
            filter_params: ModelParams::filter(),
            integ: IntegratorConfig::default(),
        }
    }

    pub fn tuning(&self) -> UkfTuning<f64> {
        let mut t = UkfTuning {
            alpha: self.filter.alpha,
            beta: self.filter.beta,
            kappa: self.filter.kappa,
            gamma_override: None,
        };
        if let Some(g) = self.filter.gamma_override {
            t = t.with_gamma(g);
        }
        t
    }
}

/// Resolved variant: either an unconstrained mode or a constrained mode with
/// a formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Unconstrained {
        noise_mode: NoiseMode,
        square_root: bool,
    },
    Constrained {
        noise_mode: NoiseMode,
        formulation: Formulation,
    },
}

pub fn parse_formulation(name: &str) -> Result<Formulation, AppError> {
    match name {
        "nlp-fd" => Ok(Formulation::NlpFd),
        "nlp-grad" => Ok(Formulation::NlpGrad),
        "nlp-grad-hess" => Ok(Formulation::NlpGradHess),
        "qp" => Ok(Formulation::Qp),
        other => Err(AppError::usage(format!(
            "unknown formulation '{other}'; valid: nlp-fd, nlp-grad, nlp-grad-hess, qp"
        ))),
    }
}

/// Parses a variant name; bare constrained names use `default_formulation`.
pub fn parse_variant(name: &str, default_formulation: Formulation) -> Result<Variant, AppError> {
    let unconstrained = |mode, sr| {
        Ok(Variant::Unconstrained {
            noise_mode: mode,
            square_root: sr,
        })
    };
    match name {
        "ukf-add" => unconstrained(NoiseMode::Additive, false),
        "ukf-sr" => unconstrained(NoiseMode::Additive, true),
        "ukf-aug" => unconstrained(NoiseMode::Augmented, false),
        "ukf-fully-aug" => unconstrained(NoiseMode::FullyAugmented, false),
        _ => {
            let mode = name
                .strip_prefix("cukf-add")
                .map(|rest| (NoiseMode::Additive, rest))
                .or_else(|| {
                    name.strip_prefix("cukf-aug")
                        .map(|rest| (NoiseMode::Augmented, rest))
                })
                .or_else(|| {
                    name.strip_prefix("cukf-fully-aug")
                        .map(|rest| (NoiseMode::FullyAugmented, rest))
                });
            match mode {
                Some((noise_mode, "")) => Ok(Variant::Constrained {
                    noise_mode,
                    formulation: default_formulation,
                }),
                Some((noise_mode, rest)) => {
                    let formulation = rest
                        .strip_prefix('-')
                        .ok_or_else(|| unknown_variant(name))
                        .and_then(parse_formulation)
                        .map_err(|_| unknown_variant(name))?;
                    Ok(Variant::Constrained {
                        noise_mode,
                        formulation,
                    })
                }
                None => Err(unknown_variant(name)),
            }
        }
    }
}

fn unknown_variant(name: &str) -> AppError {
    AppError::usage(format!(
        "unknown variant '{name}'; valid names: {} (constrained names accept the suffixes \
         -nlp-fd, -nlp-grad, -nlp-grad-hess, -qp)",
        VARIANT_NAMES.join(", ")
    ))
}
