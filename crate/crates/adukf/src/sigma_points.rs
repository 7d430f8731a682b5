//! Sigma-point scaling, weights, sampling, and state augmentation.
//!
//! The scaling factor is always computed from the nominal state order, while
//! the aggregation weights use the (possibly augmented) order of the sampled
//! distribution. Keeping those two orders separate is what makes the
//! augmented filter variants behave like their additive counterpart during
//! sampling.

use std::ops::Range;

use thiserror::Error;

use crate::matrix::{vec_add, vec_scale, vec_sub};
use crate::psd_linalg::{psd_cholesky_default, LinalgError, SymMatrix};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SigmaError {
    /// `n + λ` is negative and no scaling override was given.
    #[error("negative radicand in scaling factor: n + lambda < 0")]
    NegativeRadicand,
    /// `L + λ` is not positive, so the weights are undefined.
    #[error("degenerate weights: L + lambda <= 0")]
    DegenerateWeights,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Tuning parameters of the scaled unscented transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkfTuning<T> {
    pub alpha: T,
    pub beta: T,
    pub kappa: T,
    /// Replaces the nominal `√(n+λ)` spread when set; weights are unaffected.
    pub gamma_override: Option<T>,
}

impl<T: Scalar> Default for UkfTuning<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            beta: T::from_f64(2.0).unwrap(),
            kappa: T::zero(),
            gamma_override: None,
        }
    }
}

impl<T: Scalar> UkfTuning<T> {
    pub fn with_gamma(mut self, gamma: T) -> Self {
        assert!(gamma > T::zero(), "gamma override must be positive");
        self.gamma_override = Some(gamma);
        self
    }
}

/// Aggregation weights for a sigma-point set of order `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet<T> {
    /// Mean weights, length `2L+1`.
    pub wx: Vec<T>,
    /// Covariance weights, length `2L+1`.
    pub wc: Vec<T>,
    pub order_l: usize,
    pub lambda: T,
}

impl<T: Scalar> WeightSet<T> {
    pub fn len(&self) -> usize {
        self.wx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wx.is_empty()
    }
}

/// Index ranges of the state and noise blocks inside an augmented vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub state: Range<usize>,
    pub process_noise: Range<usize>,
    pub measurement_noise: Range<usize>,
}

impl Partition {
    /// Plain (unaugmented) layout: the whole vector is state.
    pub fn state_only(n: usize) -> Self {
        Self {
            state: 0..n,
            process_noise: n..n,
            measurement_noise: n..n,
        }
    }

    pub fn dim(&self) -> usize {
        self.measurement_noise.end
    }
}

/// `2L+1` sigma points with their weights and block layout.
#[derive(Debug, Clone)]
pub struct SigmaPointSet<T> {
    pub points: Vec<Vec<T>>,
    pub partition: Partition,
    pub weights: WeightSet<T>,
}

impl<T: Scalar> SigmaPointSet<T> {
    /// State block of point `i`.
    pub fn state_block(&self, i: usize) -> &[T] {
        &self.points[i][self.partition.state.clone()]
    }

    pub fn process_noise_block(&self, i: usize) -> &[T] {
        &self.points[i][self.partition.process_noise.clone()]
    }

    pub fn measurement_noise_block(&self, i: usize) -> &[T] {
        &self.points[i][self.partition.measurement_noise.clone()]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Scaling parameters `(λ, γ)` for nominal order `n`.
///
/// `λ = α²(n+κ) − n`; `γ = √(n+λ)` unless overridden.
pub fn scaling<T: Scalar>(n: usize, tuning: &UkfTuning<T>) -> Result<(T, T), SigmaError> {
    assert!(n >= 1);
    assert!(tuning.alpha > T::zero(), "alpha must be positive");
    let nf = T::from_usize(n).unwrap();
    let lambda = tuning.alpha * tuning.alpha * (nf + tuning.kappa) - nf;
    let gamma = match tuning.gamma_override {
        Some(g) => g,
        None => {
            let rad = nf + lambda;
            if rad < T::zero() {
                return Err(SigmaError::NegativeRadicand);
            }
            rad.sqrt()
        }
    };
    Ok((lambda, gamma))
}

/// Aggregation weights for order `L` and scaling parameter `λ`.
pub fn weights<T: Scalar>(
    order_l: usize,
    lambda: T,
    alpha: T,
    beta: T,
) -> Result<WeightSet<T>, SigmaError> {
    let lf = T::from_usize(order_l).unwrap();
    let denom = lf + lambda;
    if denom <= T::zero() {
        return Err(SigmaError::DegenerateWeights);
    }
    let w0x = lambda / denom;
    let w0c = w0x + T::one() - alpha * alpha + beta;
    let wi = T::one() / (T::from_f64(2.0).unwrap() * denom);
    let count = 2 * order_l + 1;
    let mut wx = vec![wi; count];
    let mut wc = vec![wi; count];
    wx[0] = w0x;
    wc[0] = w0c;
    Ok(WeightSet {
        wx,
        wc,
        order_l,
        lambda,
    })
}

/// Samples `2L+1` sigma points around `mean` with spread `γ·chol(cov)`.
pub fn draw<T: Scalar>(
    mean: &[T],
    cov: &SymMatrix<T>,
    gamma: T,
    weights: &WeightSet<T>,
) -> Result<SigmaPointSet<T>, SigmaError> {
    draw_partitioned(mean, cov, gamma, weights, Partition::state_only(mean.len()))
}

/// [`draw`] with an explicit block layout (used after [`augment`]).
pub fn draw_partitioned<T: Scalar>(
    mean: &[T],
    cov: &SymMatrix<T>,
    gamma: T,
    weights: &WeightSet<T>,
    partition: Partition,
) -> Result<SigmaPointSet<T>, SigmaError> {
    let n = mean.len();
    assert_eq!(cov.dim(), n, "mean and covariance order must agree");
    assert_eq!(
        weights.order_l, n,
        "weight order must match the sampled dimension"
    );
    assert_eq!(
        partition.dim(),
        n,
        "partition must cover the sampled dimension"
    );
    let (l, _) = psd_cholesky_default(cov)?;
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(mean.to_vec());
    for j in 0..n {
        let spread = vec_scale(&l.col(j), gamma);
        points.push(vec_add(mean, &spread));
    }
    for j in 0..n {
        let spread = vec_scale(&l.col(j), gamma);
        points.push(vec_sub(mean, &spread));
    }
    Ok(SigmaPointSet {
        points,
        partition,
        weights: weights.clone(),
    })
}

/// Stacks the state with zero-mean process (and optionally measurement)
/// noise: block-diagonal covariance and a zero-padded mean.
pub fn augment<T: Scalar>(
    mean: &[T],
    p: &SymMatrix<T>,
    q: &SymMatrix<T>,
    r: Option<&SymMatrix<T>>,
) -> (Vec<T>, SymMatrix<T>, Partition) {
    let n = mean.len();
    assert_eq!(p.dim(), n);
    let nq = q.dim();
    let nr = r.map_or(0, |r| r.dim());
    let mut aug_mean = mean.to_vec();
    aug_mean.resize(n + nq + nr, T::zero());
    let aug_cov = match r {
        Some(r) => SymMatrix::block_diag(&[p, q, r]),
        None => SymMatrix::block_diag(&[p, q]),
    };
    let partition = Partition {
        state: 0..n,
        process_noise: n..n + nq,
        measurement_noise: n + nq..n + nq + nr,
    };
    (aug_mean, aug_cov, partition)
}

/// Weighted mean of sigma points (or any transformed copies of them).
pub fn weighted_mean<T: Scalar>(points: &[Vec<T>], wx: &[T]) -> Vec<T> {
    assert_eq!(points.len(), wx.len());
    let dim = points[0].len();
    let mut mean = vec![T::zero(); dim];
    for (p, &w) in points.iter().zip(wx) {
        for (m, &x) in mean.iter_mut().zip(p) {
            *m = *m + w * x;
        }
    }
    mean
}

/// Weighted covariance `Σ wcᵢ (pᵢ−mean)(qᵢ−mean_q)ᵀ` restricted to the
/// symmetric case `p == q` (exactly symmetric output).
pub fn weighted_covariance<T: Scalar>(points: &[Vec<T>], mean: &[T], wc: &[T]) -> SymMatrix<T> {
    assert_eq!(points.len(), wc.len());
    let n = mean.len();
    let mut out = crate::matrix::Mat::zeros(n, n);
    for (p, &w) in points.iter().zip(wc) {
        let dev = vec_sub(p, mean);
        for i in 0..n {
            for j in 0..=i {
                let v = out[(i, j)] + w * dev[i] * dev[j];
                out[(i, j)] = v;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            out[(j, i)] = out[(i, j)];
        }
    }
    SymMatrix::symmetrize(&out)
}

/// Weighted cross-covariance between two transformed point families.
pub fn weighted_cross_covariance<T: Scalar>(
    xs: &[Vec<T>],
    x_mean: &[T],
    ys: &[Vec<T>],
    y_mean: &[T],
    wc: &[T],
) -> crate::matrix::Mat<T> {
    assert_eq!(xs.len(), ys.len());
    assert_eq!(xs.len(), wc.len());
    let n = x_mean.len();
    let m = y_mean.len();
    let mut out = crate::matrix::Mat::zeros(n, m);
    for ((x, y), &w) in xs.iter().zip(ys).zip(wc) {
        let dx = vec_sub(x, x_mean);
        let dy = vec_sub(y, y_mean);
        for i in 0..n {
            for j in 0..m {
                out[(i, j)] = out[(i, j)] + w * dx[i] * dy[j];
            }
        }
    }
    out
}
