//! State estimation for a simplified anaerobic digestion process.
//!
//! The crate provides a family of unscented Kalman filter variants —
//! additive, augmented, fully augmented, square-root, and constrained
//! (per-sigma-point NLP/QP) — together with the six-state digestion model,
//! a reproducible benchmark scenario, and the error metrics used to compare
//! the variants.
//!
//! All numerics are generic over the scalar type through the [`Scalar`]
//! trait (`f32` or `f64`); the `*64` aliases at the crate root pin the
//! double-precision instantiations used by the benchmark CLI.
//!
//! ```
//! use adukf::scenario::{self, ScenarioConfig};
//! use adukf::ukf::{run_filter, EstimatorState, NoiseModel, VariantConfig};
//! use adukf::{ad_model::AdModel, sigma_points::UkfTuning};
//!
//! let cfg = ScenarioConfig::<f64>::nominal(42);
//! let truth = scenario::simulate_truth(&cfg).unwrap();
//! let series = scenario::synthesize_measurements(&truth, &cfg.sigma, cfg.seed);
//! let steps = scenario::filter_steps(&series);
//!
//! let tuning = scenario::default_tuning::<f64>();
//! let model = AdModel::new(cfg.filter_params.clone());
//! let noise = NoiseModel { q: tuning.q.clone(), r: tuning.r.clone() };
//! let init = EstimatorState::new(tuning.x0_hat.to_vec(), tuning.p0.clone(), 0.0);
//! let run = run_filter(
//!     &VariantConfig::additive(UkfTuning::default()),
//!     &model,
//!     &noise,
//!     init,
//!     cfg.dt_days(),
//!     &steps[..8],
//! )
//! .unwrap();
//! assert_eq!(run.states.len(), 9);
//! ```

use num_traits::{Float, FromPrimitive};

pub mod ad_model;
pub mod evaluation;
pub mod matrix;
pub mod model;
pub mod optimizers;
pub mod psd_linalg;
pub mod scenario;
pub mod sigma_points;
pub mod ukf;

/// Floating-point scalar the whole crate is generic over.
pub trait Scalar: Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + 'static {}

/// Double-precision aliases used by the CLI and most call sites.
pub type Mat64 = matrix::Mat<f64>;
pub type SymMatrix64 = psd_linalg::SymMatrix<f64>;
pub type LowerTriangular64 = psd_linalg::LowerTriangular<f64>;
pub type UkfTuning64 = sigma_points::UkfTuning<f64>;
pub type EstimatorState64 = ukf::EstimatorState<f64>;
pub type NoiseModel64 = ukf::NoiseModel<f64>;
pub type VariantConfig64 = ukf::VariantConfig<f64>;
pub type ConstrainedSetup64 = ukf::ConstrainedSetup<f64>;
pub type ScenarioConfig64 = scenario::ScenarioConfig<f64>;
