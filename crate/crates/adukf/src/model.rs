//! State-space model interface shared by all filter variants.

use thiserror::Error;

use crate::matrix::Mat;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    /// The adaptive step size underflowed before reaching the error target.
    #[error("integration step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    /// The step budget ran out before the interval was covered.
    #[error("integration exceeded {max_steps} steps")]
    TooManySteps { max_steps: usize },
}

/// Discrete-time view of a (possibly continuous) process with a scalar
/// control input and an output map.
pub trait StateSpaceModel<T: Scalar> {
    fn state_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    /// Advances the state over `dt` under a zero-order-hold input `u`.
    fn propagate(&self, x: &[T], u: T, dt: T) -> Result<Vec<T>, IntegrationError>;

    fn output(&self, x: &[T]) -> Vec<T>;

    /// Constant output matrix when the output map is linear, `None` otherwise.
    fn output_matrix(&self) -> Option<Mat<T>> {
        None
    }
}
