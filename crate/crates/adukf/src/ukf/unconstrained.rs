//! Time and measurement updates for the additive, augmented, fully augmented
//! and square-root variants.

use crate::matrix::{norm_inf, vec_add, vec_scale, vec_sub, Mat};
use crate::model::StateSpaceModel;
use crate::psd_linalg::{
    chol_rank1, psd_cholesky_default, solve_spd, triangularize, LinalgError, LowerTriangular,
    SymMatrix, UpdateSign,
};
use crate::sigma_points::{
    augment, draw, draw_partitioned, scaling, weighted_cross_covariance, weighted_mean, weights,
    SigmaPointSet, WeightSet,
};
use crate::Scalar;

use super::{
    EstimatorState, FilterError, FilterRun, MeasurementStep, NoiseMode, NoiseModel, VariantConfig,
};

/// Scaling and weights for a variant: γ always uses the nominal order `n`,
/// the weights use the sampled order (augmented where applicable).
fn variant_weights<T: Scalar>(
    n: usize,
    q_dim: usize,
    cfg: &VariantConfig<T>,
) -> Result<(T, WeightSet<T>), FilterError> {
    let (lambda, gamma) = scaling(n, &cfg.tuning)?;
    let order = match cfg.noise_mode {
        NoiseMode::Additive => n,
        NoiseMode::Augmented => 2 * n,
        NoiseMode::FullyAugmented => 2 * n + q_dim,
    };
    let w = weights(order, lambda, cfg.tuning.alpha, cfg.tuning.beta)?;
    Ok((gamma, w))
}

/// Predicts the prior estimate and returns the sigma points the measurement
/// update will consume.
///
/// Additive: state points are propagated, the process noise is added to the
/// aggregated covariance, and a fresh point set is drawn from the prior (the
/// gain then sees a point spread consistent with the full prior covariance).
/// Augmented modes: the noise blocks ride along as sigma-point partitions;
/// the propagated points (with process noise added after integration) are
/// returned unless `redraw_before_measurement` asks for a fresh augmented
/// draw around the prior.
pub fn time_update<T: Scalar, M: StateSpaceModel<T>>(
    state: &EstimatorState<T>,
    u: T,
    dt: T,
    noise: &NoiseModel<T>,
    model: &M,
    cfg: &VariantConfig<T>,
) -> Result<(EstimatorState<T>, SigmaPointSet<T>), FilterError> {
    let (prior, propagated) = predict(state, u, dt, noise, model, cfg)?;
    if cfg.noise_mode == NoiseMode::Additive {
        let n = state.dim();
        let (gamma, w) = variant_weights(n, noise.r.dim(), cfg)?;
        let prior_points = draw(&prior.mean, &prior.cov, gamma, &w)?;
        Ok((prior, prior_points))
    } else {
        Ok((prior, propagated))
    }
}

/// Shared prediction: aggregates the prior and returns the propagated point
/// set itself (the constrained update anchors its per-point programs on
/// these, so the spread can contract as the estimate converges).
pub(crate) fn predict<T: Scalar, M: StateSpaceModel<T>>(
    state: &EstimatorState<T>,
    u: T,
    dt: T,
    noise: &NoiseModel<T>,
    model: &M,
    cfg: &VariantConfig<T>,
) -> Result<(EstimatorState<T>, SigmaPointSet<T>), FilterError> {
    assert!(dt > T::zero(), "time step must be positive");
    let n = state.dim();
    let (gamma, w) = variant_weights(n, noise.r.dim(), cfg)?;
    let time = state.time + dt;
    match cfg.noise_mode {
        NoiseMode::Additive => {
            let mut points = draw(&state.mean, &state.cov, gamma, &w)?;
            for p in &mut points.points {
                *p = model.propagate(p, u, dt)?;
            }
            let mean = weighted_mean(&points.points, &w.wx);
            let spread = crate::sigma_points::weighted_covariance(&points.points, &mean, &w.wc);
            let cov = SymMatrix::symmetrize(&spread.as_mat().add(noise.q.as_mat()));
            let prior = EstimatorState::new(mean, cov, time);
            Ok((prior, points))
        }
        NoiseMode::Augmented | NoiseMode::FullyAugmented => {
            let r = (cfg.noise_mode == NoiseMode::FullyAugmented).then_some(&noise.r);
            let (aug_mean, aug_cov, partition) = augment(&state.mean, &state.cov, &noise.q, r);
            let mut points = draw_partitioned(&aug_mean, &aug_cov, gamma, &w, partition)?;
            // Propagate the state block; process noise enters after
            // integration.
            for p in &mut points.points {
                let x = &p[points.partition.state.clone()];
                let v = p[points.partition.process_noise.clone()].to_vec();
                let propagated = model.propagate(x, u, dt)?;
                for (i, xi) in points.partition.state.clone().enumerate() {
                    p[xi] = propagated[i] + v[i];
                }
            }
            let states: Vec<Vec<T>> = (0..points.len())
                .map(|i| points.state_block(i).to_vec())
                .collect();
            let mean = weighted_mean(&states, &w.wx);
            let cov = crate::sigma_points::weighted_covariance(&states, &mean, &w.wc);
            let prior = EstimatorState::new(mean, cov, time);
            if cfg.redraw_before_measurement {
                let (am, ac, part) = augment(&prior.mean, &prior.cov, &noise.q, r);
                points = draw_partitioned(&am, &ac, gamma, &w, part)?;
            }
            Ok((prior, points))
        }
    }
}

/// Measurement outputs of the sigma points for the given noise mode.
fn point_outputs<T: Scalar, M: StateSpaceModel<T>>(
    points: &SigmaPointSet<T>,
    model: &M,
    mode: NoiseMode,
) -> Vec<Vec<T>> {
    (0..points.len())
        .map(|i| {
            let mut y = model.output(points.state_block(i));
            if mode == NoiseMode::FullyAugmented {
                let wn = points.measurement_noise_block(i);
                for (yi, &wi) in y.iter_mut().zip(wn) {
                    *yi = *yi + wi;
                }
            }
            y
        })
        .collect()
}

/// Kalman gain `P_xy P_yy⁻¹`, failing when the innovation covariance is not
/// positive definite.
fn gain<T: Scalar>(p_xy: &Mat<T>, p_yy: &SymMatrix<T>) -> Result<Mat<T>, FilterError> {
    match solve_spd(p_yy, &p_xy.transpose()) {
        Ok(sol) => Ok(sol.transpose()),
        Err(LinalgError::SingularMatrix { .. }) | Err(LinalgError::IndefiniteMatrix { .. }) => {
            Err(FilterError::SingularInnovation)
        }
        Err(e) => Err(e.into()),
    }
}

/// Corrects every sigma point with the innovation and aggregates the
/// posterior, applying the per-mode covariance correction terms.
pub fn measurement_update<T: Scalar, M: StateSpaceModel<T>>(
    prior: &EstimatorState<T>,
    points: &SigmaPointSet<T>,
    y: &[T],
    noise: &NoiseModel<T>,
    model: &M,
    cfg: &VariantConfig<T>,
) -> Result<EstimatorState<T>, FilterError> {
    assert_eq!(y.len(), noise.r.dim(), "measurement dimension mismatch");
    let w = &points.weights;
    let outputs = point_outputs(points, model, cfg.noise_mode);
    let y_mean = weighted_mean(&outputs, &w.wx);
    let mut p_yy = crate::sigma_points::weighted_covariance(&outputs, &y_mean, &w.wc);
    if cfg.noise_mode != NoiseMode::FullyAugmented {
        p_yy = SymMatrix::symmetrize(&p_yy.as_mat().add(noise.r.as_mat()));
    }
    let states: Vec<Vec<T>> = (0..points.len())
        .map(|i| points.state_block(i).to_vec())
        .collect();
    let p_xy = weighted_cross_covariance(&states, &prior.mean, &outputs, &y_mean, &w.wc);
    let k = gain(&p_xy, &p_yy)?;

    let updated: Vec<Vec<T>> = states
        .iter()
        .zip(&outputs)
        .map(|(x, yi)| vec_add(x, &k.matvec(&vec_sub(y, yi))))
        .collect();
    let mean = weighted_mean(&updated, &w.wx);
    let mut cov = crate::sigma_points::weighted_covariance(&updated, &mean, &w.wc).into_mat();
    let krk = k.matmul(noise.r.as_mat()).matmul(&k.transpose());
    match cfg.noise_mode {
        NoiseMode::Additive => {
            cov = cov.add(noise.q.as_mat()).add(&krk);
        }
        NoiseMode::Augmented => {
            cov = cov.add(&krk);
        }
        NoiseMode::FullyAugmented => {}
    }
    Ok(EstimatorState::new(
        mean,
        SymMatrix::symmetrize(&cov),
        prior.time,
    ))
}

fn points_from_factor<T: Scalar>(mean: &[T], factor: &LowerTriangular<T>, gamma: T) -> Vec<Vec<T>> {
    let n = mean.len();
    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(mean.to_vec());
    for j in 0..n {
        points.push(vec_add(mean, &vec_scale(&factor.col(j), gamma)));
    }
    for j in 0..n {
        points.push(vec_sub(mean, &vec_scale(&factor.col(j), gamma)));
    }
    points
}

/// Compresses weighted deviations plus noise factor columns into a fresh
/// covariance factor, folding in the (possibly negative) central weight via
/// a rank-1 modification.
fn factor_from_deviations<T: Scalar>(
    deviations: &[Vec<T>],
    w: &WeightSet<T>,
    extra_cols: &[&Mat<T>],
) -> Result<LowerTriangular<T>, LinalgError> {
    let n = deviations[0].len();
    let wings = deviations.len() - 1;
    let extra: usize = extra_cols.iter().map(|m| m.cols()).sum();
    let mut compound = Mat::zeros(n, wings + extra);
    let sqrt_wi = w.wc[1].sqrt();
    for (c, dev) in deviations.iter().skip(1).enumerate() {
        compound.set_col(c, &vec_scale(dev, sqrt_wi));
    }
    let mut off = wings;
    for m in extra_cols {
        for j in 0..m.cols() {
            compound.set_col(off + j, &m.col(j));
        }
        off += m.cols();
    }
    let factor = triangularize(&compound);
    let w0c = w.wc[0];
    if w0c == T::zero() {
        return Ok(factor);
    }
    let scaled0 = vec_scale(&deviations[0], w0c.abs().sqrt());
    let sign = if w0c > T::zero() {
        UpdateSign::Update
    } else {
        UpdateSign::Downdate
    };
    chol_rank1(&factor, &scaled0, sign)
}

/// One full predict/correct step of the square-root variant.
///
/// Numerically equivalent to the additive variant, but the covariance is
/// never formed during the recursion: the factor is maintained through QR
/// compression and rank-1 updates, and `cov` is only reconstructed for
/// reporting.
pub fn sr_step<T: Scalar, M: StateSpaceModel<T>>(
    state: &EstimatorState<T>,
    u: T,
    y: &[T],
    dt: T,
    noise: &NoiseModel<T>,
    model: &M,
    cfg: &VariantConfig<T>,
) -> Result<EstimatorState<T>, FilterError> {
    cfg.validate()?;
    if !cfg.square_root {
        return Err(FilterError::InvalidVariant("sr_step requires square_root"));
    }
    let n = state.dim();
    let (lambda, gamma) = scaling(n, &cfg.tuning)?;
    let w = weights(n, lambda, cfg.tuning.alpha, cfg.tuning.beta)?;
    let factor = match &state.sqrt_factor {
        Some(f) => f.clone(),
        None => psd_cholesky_default(&state.cov)?.0,
    };
    let (q_factor, _) = psd_cholesky_default(&noise.q)?;
    let (r_factor, _) = psd_cholesky_default(&noise.r)?;

    // Time update in factored form.
    let points = points_from_factor(&state.mean, &factor, gamma);
    let propagated: Vec<Vec<T>> = points
        .iter()
        .map(|p| model.propagate(p, u, dt))
        .collect::<Result<_, _>>()?;
    let prior_mean = weighted_mean(&propagated, &w.wx);
    let devs: Vec<Vec<T>> = propagated.iter().map(|p| vec_sub(p, &prior_mean)).collect();
    let prior_factor = factor_from_deviations(&devs, &w, &[q_factor.as_mat()])?;

    // Fresh prior points, as in the additive variant.
    let prior_points = points_from_factor(&prior_mean, &prior_factor, gamma);
    let outputs: Vec<Vec<T>> = prior_points.iter().map(|p| model.output(p)).collect();
    let y_mean = weighted_mean(&outputs, &w.wx);
    let y_devs: Vec<Vec<T>> = outputs.iter().map(|o| vec_sub(o, &y_mean)).collect();
    let y_factor = factor_from_deviations(&y_devs, &w, &[r_factor.as_mat()])
        .map_err(|_| FilterError::SingularInnovation)?;
    let p_xy = weighted_cross_covariance(&prior_points, &prior_mean, &outputs, &y_mean, &w.wc);

    // K = P_xy (S_y S_yᵀ)⁻¹ via two triangular solves per column.
    let p_yx = p_xy.transpose();
    let mut k_t = Mat::zeros(y.len(), n);
    for j in 0..n {
        let z = y_factor
            .forward_solve(&p_yx.col(j))
            .map_err(|_| FilterError::SingularInnovation)?;
        let col = y_factor
            .back_solve(&z)
            .map_err(|_| FilterError::SingularInnovation)?;
        k_t.set_col(j, &col);
    }
    let k = k_t.transpose();

    let updated: Vec<Vec<T>> = prior_points
        .iter()
        .zip(&outputs)
        .map(|(x, yi)| vec_add(x, &k.matvec(&vec_sub(y, yi))))
        .collect();
    let mean = weighted_mean(&updated, &w.wx);
    let post_devs: Vec<Vec<T>> = updated.iter().map(|p| vec_sub(p, &mean)).collect();
    let kr = k.matmul(r_factor.as_mat());
    let post_factor = factor_from_deviations(&post_devs, &w, &[q_factor.as_mat(), &kr])?;

    let cov = post_factor.product();
    Ok(EstimatorState {
        mean,
        cov,
        sqrt_factor: Some(post_factor),
        time: state.time + dt,
    })
}

/// Runs the configured variant over a measurement series.
///
/// The first trajectory entry is the initial estimate; each step performs
/// one time update over `dt` (zero-order-hold input) and one measurement
/// update. Deterministic for identical inputs.
pub fn run_filter<T: Scalar, M: StateSpaceModel<T>>(
    cfg: &VariantConfig<T>,
    model: &M,
    noise: &NoiseModel<T>,
    init: EstimatorState<T>,
    dt: T,
    steps: &[MeasurementStep<T>],
) -> Result<FilterRun<T>, FilterError> {
    cfg.validate()?;
    let mut state = if cfg.square_root && init.sqrt_factor.is_none() {
        init.with_sqrt_factor()?
    } else {
        init
    };
    let mut states = Vec::with_capacity(steps.len() + 1);
    states.push(state.clone());
    for step in steps {
        state = if cfg.square_root {
            sr_step(&state, step.u, &step.y, dt, noise, model, cfg)?
        } else {
            let (prior, points) = time_update(&state, step.u, dt, noise, model, cfg)?;
            measurement_update(&prior, &points, &step.y, noise, model, cfg)?
        };
        states.push(state.clone());
    }
    Ok(FilterRun { states })
}

/// Largest componentwise trajectory deviation relative to the trajectory
/// scale; used by the equivalence checks.
pub fn trajectory_max_relative_difference<T: Scalar>(a: &FilterRun<T>, b: &FilterRun<T>) -> T {
    assert_eq!(a.states.len(), b.states.len());
    let scale = a
        .states
        .iter()
        .map(|s| norm_inf(&s.mean))
        .fold(T::zero(), T::max)
        .max(T::one());
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| norm_inf(&vec_sub(&x.mean, &y.mean)))
        .fold(T::zero(), T::max)
        / scale
}
