//! Estimation-error metric, timing, and benchmark record assembly.

use std::time::Instant;

use thiserror::Error;

use crate::ukf::SolveStatsSummary;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    /// The normalizing signal is identically zero.
    #[error("normalizer is identically zero")]
    ZeroNormalizer,
}

/// Squared-energy error ratio `Σ(x̂ᵢ−xᵢ)² / Σxᵢ²`.
///
/// Kept as the plain ratio without a square root: all reference results were
/// produced with this form, and offering a rooted variant alongside would
/// invite silent mismatches.
pub fn nrmse<T: Scalar>(est: &[T], truth: &[T]) -> Result<T, EvalError> {
    assert_eq!(est.len(), truth.len(), "series lengths must agree");
    let mut err = T::zero();
    let mut norm = T::zero();
    for (&e, &t) in est.iter().zip(truth) {
        err = err + (e - t) * (e - t);
        norm = norm + t * t;
    }
    if norm == T::zero() {
        return Err(EvalError::ZeroNormalizer);
    }
    Ok(err / norm)
}

/// Component indices of the non-measured states (carbohydrates, proteins,
/// lipids); their error average is the state metric.
pub const UNMEASURED_STATE_INDICES: [usize; 3] = [2, 3, 4];
/// Component indices of the measured states (CH₄, CO₂, biomass).
pub const MEASURED_STATE_INDICES: [usize; 3] = [0, 1, 5];

/// Arithmetic mean of the per-component error ratio over `indices`.
///
/// Trajectories are sample-major: `traj[k][i]` is component `i` at sample
/// `k`. The sum runs over every sample including the initial one.
pub fn group_nrmse<T: Scalar>(
    est_traj: &[Vec<T>],
    truth_traj: &[Vec<T>],
    indices: &[usize],
) -> Result<T, EvalError> {
    assert_eq!(
        est_traj.len(),
        truth_traj.len(),
        "trajectory lengths must agree"
    );
    assert!(!indices.is_empty());
    let mut acc = T::zero();
    for &i in indices {
        let est: Vec<T> = est_traj.iter().map(|s| s[i]).collect();
        let truth: Vec<T> = truth_traj.iter().map(|s| s[i]).collect();
        acc = acc + nrmse(&est, &truth)?;
    }
    Ok(acc / T::from_usize(indices.len()).unwrap())
}

/// Runs a closure and reports its monotonic wall-clock time in seconds.
pub fn timed_run<R>(f: impl FnOnce() -> R) -> (R, f64) {
    let start = Instant::now();
    let result = f();
    (result, start.elapsed().as_secs_f64())
}

/// One benchmark result row.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub variant: String,
    pub gamma: f64,
    pub nrmse_x: f64,
    pub nrmse_y: f64,
    pub wall_time_s: f64,
    pub solve_stats: Option<SolveStatsSummary>,
}
