//! Unscented Kalman filter variants.
//!
//! All variants share the reformulated measurement update: every sigma point
//! is corrected individually with the innovation, and the posterior mean and
//! covariance are aggregated from the corrected points. The noise handling
//! differs per variant (additive covariance terms versus noise carried by
//! augmented sigma points), as do the covariance correction terms applied
//! after aggregation.

mod constrained;
mod unconstrained;

pub use constrained::{
    constrained_measurement_update, nlp_cost, nlp_gradient, nlp_hessian, qp_objective,
    run_constrained_filter, ConstrainedRun, ConstrainedSetup, Formulation, SolveStatsSummary,
};
pub use unconstrained::{
    measurement_update, run_filter, sr_step, time_update, trajectory_max_relative_difference,
};

use thiserror::Error;

use crate::model::IntegrationError;
use crate::optimizers::SolveError;
use crate::psd_linalg::{psd_cholesky_default, LinalgError, LowerTriangular, SymMatrix};
use crate::sigma_points::{SigmaError, UkfTuning};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    /// The innovation covariance lost positive definiteness.
    #[error("innovation covariance is singular")]
    SingularInnovation,
    /// The variant configuration is inconsistent (e.g. square-root with
    /// non-additive noise).
    #[error("invalid variant configuration: {0}")]
    InvalidVariant(&'static str),
    #[error(transparent)]
    Sigma(#[from] SigmaError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Solver(#[from] SolveError),
}

/// How process and measurement noise enter the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Noise covariances added to the aggregated covariances.
    Additive,
    /// Process noise stacked into the sampled state (order `2n`).
    Augmented,
    /// Process and measurement noise stacked (order `2n+q`).
    FullyAugmented,
}

/// Process and measurement noise covariances.
#[derive(Debug, Clone)]
pub struct NoiseModel<T> {
    pub q: SymMatrix<T>,
    pub r: SymMatrix<T>,
}

/// Posterior state estimate.
#[derive(Debug, Clone)]
pub struct EstimatorState<T> {
    pub mean: Vec<T>,
    pub cov: SymMatrix<T>,
    /// Maintained by the square-root variant; `cov` is then derived from it.
    pub sqrt_factor: Option<LowerTriangular<T>>,
    /// Time stamp in days.
    pub time: T,
}

impl<T: Scalar> EstimatorState<T> {
    pub fn new(mean: Vec<T>, cov: SymMatrix<T>, time: T) -> Self {
        assert_eq!(mean.len(), cov.dim());
        Self {
            mean,
            cov,
            sqrt_factor: None,
            time,
        }
    }

    /// Attaches the Cholesky factor of the current covariance.
    pub fn with_sqrt_factor(mut self) -> Result<Self, LinalgError> {
        let (l, _) = psd_cholesky_default(&self.cov)?;
        self.sqrt_factor = Some(l);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Configuration of an unconstrained filter variant.
#[derive(Debug, Clone)]
pub struct VariantConfig<T> {
    pub noise_mode: NoiseMode,
    /// Square-root covariance propagation (additive noise only).
    pub square_root: bool,
    pub tuning: UkfTuning<T>,
    /// For the augmented modes, sample a fresh augmented point set around
    /// the prior before the measurement update instead of reusing the
    /// propagated points. The additive variant always represents its prior
    /// with a fresh draw, so the flag has no effect there.
    pub redraw_before_measurement: bool,
}

impl<T: Scalar> VariantConfig<T> {
    pub fn additive(tuning: UkfTuning<T>) -> Self {
        Self {
            noise_mode: NoiseMode::Additive,
            square_root: false,
            tuning,
            redraw_before_measurement: false,
        }
    }

    pub fn square_root(tuning: UkfTuning<T>) -> Self {
        Self {
            square_root: true,
            ..Self::additive(tuning)
        }
    }

    pub fn augmented(tuning: UkfTuning<T>) -> Self {
        Self {
            noise_mode: NoiseMode::Augmented,
            ..Self::additive(tuning)
        }
    }

    pub fn fully_augmented(tuning: UkfTuning<T>) -> Self {
        Self {
            noise_mode: NoiseMode::FullyAugmented,
            ..Self::additive(tuning)
        }
    }

    pub(crate) fn validate(&self) -> Result<(), FilterError> {
        if self.square_root && self.noise_mode != NoiseMode::Additive {
            return Err(FilterError::InvalidVariant(
                "square-root propagation requires additive noise",
            ));
        }
        Ok(())
    }
}

/// One sample of the measurement series: the zero-order-hold input over the
/// preceding interval and the measurement at its end.
#[derive(Debug, Clone)]
pub struct MeasurementStep<T> {
    pub u: T,
    pub y: Vec<T>,
}

/// Filter trajectory over a measurement series.
#[derive(Debug, Clone)]
pub struct FilterRun<T> {
    /// Posterior states, starting with the initial estimate.
    pub states: Vec<EstimatorState<T>>,
}

impl<T: Scalar> FilterRun<T> {
    pub fn means(&self) -> Vec<Vec<T>> {
        self.states.iter().map(|s| s.mean.clone()).collect()
    }
}
