//! Constrained measurement update: each sigma point is replaced by the
//! solution of a small inequality-constrained program that trades prior
//! deviation against measurement fit, then the posterior is aggregated from
//! the solved points with no further covariance correction terms (the
//! measurement noise already enters through the objective).

use crate::matrix::{dot, vec_sub, Mat};
use crate::model::StateSpaceModel;
use crate::optimizers::{
    solve_nlp, solve_qp, GradientFn, HessianFn, LinearConstraints, NlpOptions, SolveStats,
};
use crate::psd_linalg::{spd_inverse, LinalgError, SymMatrix};
use crate::sigma_points::{weighted_covariance, weighted_mean, SigmaPointSet};
use crate::Scalar;

use super::unconstrained::predict;
use super::{
    EstimatorState, FilterError, FilterRun, MeasurementStep, NoiseMode, NoiseModel, VariantConfig,
};

/// How the per-point program is posed and differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Nonlinear program, gradients by central differences.
    NlpFd,
    /// Nonlinear program with the analytic gradient.
    NlpGrad,
    /// Nonlinear program with analytic gradient and Hessian.
    NlpGradHess,
    /// Quadratic program (requires a linear output map).
    Qp,
}

impl Formulation {
    pub const ALL: [Formulation; 4] = [
        Formulation::NlpFd,
        Formulation::NlpGrad,
        Formulation::NlpGradHess,
        Formulation::Qp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Formulation::NlpFd => "nlp-fd",
            Formulation::NlpGrad => "nlp-grad",
            Formulation::NlpGradHess => "nlp-grad-hess",
            Formulation::Qp => "qp",
        }
    }
}

/// Configuration of a constrained filter variant.
#[derive(Debug, Clone)]
pub struct ConstrainedSetup<T> {
    pub formulation: Formulation,
    pub noise_mode: NoiseMode,
    pub constraints: LinearConstraints<T>,
    pub tuning: crate::sigma_points::UkfTuning<T>,
    pub nlp_options: NlpOptions<T>,
    pub qp_tol: T,
}

impl<T: Scalar> ConstrainedSetup<T> {
    pub fn new(
        formulation: Formulation,
        noise_mode: NoiseMode,
        constraints: LinearConstraints<T>,
    ) -> Self {
        Self {
            formulation,
            noise_mode,
            constraints,
            tuning: crate::sigma_points::UkfTuning::default(),
            nlp_options: NlpOptions::default(),
            qp_tol: T::from_f64(1e-8).unwrap(),
        }
    }

    fn variant_config(&self) -> VariantConfig<T> {
        VariantConfig {
            noise_mode: self.noise_mode,
            square_root: false,
            tuning: self.tuning,
            redraw_before_measurement: false,
        }
    }
}

/// Two-term objective: measurement misfit weighted by `R⁻¹` plus deviation
/// from the prior point weighted by `(P⁻)⁻¹`.
pub fn nlp_cost<T: Scalar>(
    chi: &[T],
    chi_prior: &[T],
    p_prior: &SymMatrix<T>,
    y: &[T],
    r: &SymMatrix<T>,
    h: &dyn Fn(&[T]) -> Vec<T>,
) -> Result<T, LinalgError> {
    let p_inv = spd_inverse(p_prior)?;
    let r_inv = spd_inverse(r)?;
    Ok(cost_with_inverses(chi, chi_prior, &p_inv, y, &r_inv, h))
}

fn quad_form<T: Scalar>(v: &[T], m: &SymMatrix<T>) -> T {
    dot(v, &m.as_mat().matvec(v))
}

fn cost_with_inverses<T: Scalar>(
    chi: &[T],
    chi_prior: &[T],
    p_inv: &SymMatrix<T>,
    y: &[T],
    r_inv: &SymMatrix<T>,
    h: &dyn Fn(&[T]) -> Vec<T>,
) -> T {
    let misfit = vec_sub(y, &h(chi));
    let deviation = vec_sub(chi, chi_prior);
    quad_form(&misfit, r_inv) + quad_form(&deviation, p_inv)
}

/// Analytic gradient of [`nlp_cost`] as a column vector:
/// `−2 (y − h(χ))ᵀ R⁻¹ ∂h/∂χ + 2 (χ − χ⁻)ᵀ (P⁻)⁻¹`.
pub fn nlp_gradient<T: Scalar>(
    chi: &[T],
    chi_prior: &[T],
    p_prior: &SymMatrix<T>,
    y: &[T],
    r: &SymMatrix<T>,
    h: &dyn Fn(&[T]) -> Vec<T>,
    dh_dx: &Mat<T>,
) -> Result<Vec<T>, LinalgError> {
    let p_inv = spd_inverse(p_prior)?;
    let r_inv = spd_inverse(r)?;
    Ok(gradient_with_inverses(
        chi, chi_prior, &p_inv, y, &r_inv, h, dh_dx,
    ))
}

fn gradient_with_inverses<T: Scalar>(
    chi: &[T],
    chi_prior: &[T],
    p_inv: &SymMatrix<T>,
    y: &[T],
    r_inv: &SymMatrix<T>,
    h: &dyn Fn(&[T]) -> Vec<T>,
    dh_dx: &Mat<T>,
) -> Vec<T> {
    let two = T::from_f64(2.0).unwrap();
    let misfit = vec_sub(y, &h(chi));
    let weighted_misfit = r_inv.as_mat().matvec(&misfit);
    let meas_term = dh_dx.transpose().matvec(&weighted_misfit);
    let deviation = vec_sub(chi, chi_prior);
    let prior_term = p_inv.as_mat().matvec(&deviation);
    meas_term
        .iter()
        .zip(&prior_term)
        .map(|(&m, &p)| two * (p - m))
        .collect()
}

/// Hessian of the objective (constant for a linear output map):
/// `2 (P⁻)⁻¹ + 2 (R⁻¹ ∂h/∂χ)ᵀ ∂h/∂χ`.
pub fn nlp_hessian<T: Scalar>(
    p_prior: &SymMatrix<T>,
    r: &SymMatrix<T>,
    dh_dx: &Mat<T>,
) -> Result<SymMatrix<T>, LinalgError> {
    let p_inv = spd_inverse(p_prior)?;
    let r_inv = spd_inverse(r)?;
    Ok(hessian_with_inverses(&p_inv, &r_inv, dh_dx))
}

fn hessian_with_inverses<T: Scalar>(
    p_inv: &SymMatrix<T>,
    r_inv: &SymMatrix<T>,
    dh_dx: &Mat<T>,
) -> SymMatrix<T> {
    let two = T::from_f64(2.0).unwrap();
    let rc = r_inv.as_mat().matmul(dh_dx);
    let meas = rc.transpose().matmul(dh_dx);
    SymMatrix::symmetrize(&p_inv.as_mat().scale(two).add(&meas.scale(two)))
}

/// Quadratic-program form of the objective for a linear output map:
/// `H = 2(CᵀR⁻¹C + (P⁻)⁻¹)`, `g = −2(CᵀR⁻¹y + (P⁻)⁻¹χ⁻)`, so that
/// `½χᵀHχ + gᵀχ` matches the χ-dependent part of the objective.
pub fn qp_objective<T: Scalar>(
    c: &Mat<T>,
    r: &SymMatrix<T>,
    p_prior: &SymMatrix<T>,
    y: &[T],
    chi_prior: &[T],
) -> Result<(SymMatrix<T>, Vec<T>), LinalgError> {
    let p_inv = spd_inverse(p_prior)?;
    let r_inv = spd_inverse(r)?;
    let h = hessian_with_inverses(&p_inv, &r_inv, c);
    let g = qp_gradient_with_inverses(c, &r_inv, &p_inv, y, chi_prior);
    Ok((h, g))
}

fn qp_gradient_with_inverses<T: Scalar>(
    c: &Mat<T>,
    r_inv: &SymMatrix<T>,
    p_inv: &SymMatrix<T>,
    y: &[T],
    chi_prior: &[T],
) -> Vec<T> {
    let two = T::from_f64(2.0).unwrap();
    let ct_rinv_y = c.transpose().matvec(&r_inv.as_mat().matvec(y));
    let pinv_chi = p_inv.as_mat().matvec(chi_prior);
    ct_rinv_y
        .iter()
        .zip(&pinv_chi)
        .map(|(&a, &b)| -two * (a + b))
        .collect()
}

/// Replaces every sigma point by its constrained solution and aggregates the
/// posterior mean and covariance from the solved points only.
pub fn constrained_measurement_update<T: Scalar, M: StateSpaceModel<T>>(
    prior: &EstimatorState<T>,
    points: &SigmaPointSet<T>,
    y: &[T],
    noise: &NoiseModel<T>,
    setup: &ConstrainedSetup<T>,
    model: &M,
) -> Result<(EstimatorState<T>, Vec<SolveStats>), FilterError> {
    let p_inv = spd_inverse(&prior.cov).map_err(|e| match e {
        LinalgError::SingularMatrix { .. } => FilterError::SingularInnovation,
        other => other.into(),
    })?;
    let r_inv = spd_inverse(&noise.r)?;
    let output_matrix = model.output_matrix();
    if setup.formulation != Formulation::NlpFd && output_matrix.is_none() {
        return Err(FilterError::InvalidVariant(
            "derivative-based formulations require a linear output map",
        ));
    }
    // Shared per-step pieces; only the prior-point dependent parts vary.
    let hessian = output_matrix
        .as_ref()
        .map(|c| hessian_with_inverses(&p_inv, &r_inv, c));

    let mut solved = Vec::with_capacity(points.len());
    let mut stats = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let chi_prior = points.state_block(i).to_vec();
        let start = setup.constraints.clip_to_bounds(&chi_prior);
        let (chi_opt, stat) = match setup.formulation {
            Formulation::Qp => {
                let c = output_matrix.as_ref().unwrap();
                let h = hessian.as_ref().unwrap();
                let g = qp_gradient_with_inverses(c, &r_inv, &p_inv, y, &chi_prior);
                let (x, _mu, stat) = solve_qp(h, &g, &setup.constraints, &start, setup.qp_tol)?;
                (x, stat)
            }
            _ => {
                let h_fn = |x: &[T]| model.output(x);
                let cost = |x: &[T]| cost_with_inverses(x, &chi_prior, &p_inv, y, &r_inv, &h_fn);
                let grad = |x: &[T]| {
                    gradient_with_inverses(
                        x,
                        &chi_prior,
                        &p_inv,
                        y,
                        &r_inv,
                        &h_fn,
                        output_matrix.as_ref().unwrap(),
                    )
                };
                let hess = |_: &[T]| hessian.clone().unwrap();
                let (gradient, hess_opt): (Option<GradientFn<'_, T>>, Option<HessianFn<'_, T>>) =
                    match setup.formulation {
                        Formulation::NlpFd => (None, None),
                        Formulation::NlpGrad => (Some(&grad), None),
                        Formulation::NlpGradHess => (Some(&grad), Some(&hess)),
                        Formulation::Qp => unreachable!(),
                    };
                solve_nlp(
                    &cost,
                    gradient,
                    hess_opt,
                    &setup.constraints,
                    &start,
                    &setup.nlp_options,
                )?
            }
        };
        solved.push(chi_opt);
        stats.push(stat);
    }
    let w = &points.weights;
    let mean = weighted_mean(&solved, &w.wx);
    let cov = weighted_covariance(&solved, &mean, &w.wc);
    Ok((EstimatorState::new(mean, cov, prior.time), stats))
}

/// Aggregate over the per-point solver statistics of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStatsSummary {
    pub solves: usize,
    pub median_iterations: f64,
    pub median_cost_evaluations: f64,
    pub total_cost_evaluations: usize,
    pub total_wall_time_s: f64,
}

impl SolveStatsSummary {
    pub fn from_stats(stats: &[SolveStats]) -> Self {
        let median = |mut v: Vec<f64>| -> f64 {
            if v.is_empty() {
                return f64::NAN;
            }
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        };
        Self {
            solves: stats.len(),
            median_iterations: median(stats.iter().map(|s| s.iterations as f64).collect()),
            median_cost_evaluations: median(
                stats.iter().map(|s| s.cost_evaluations as f64).collect(),
            ),
            total_cost_evaluations: stats.iter().map(|s| s.cost_evaluations).sum(),
            total_wall_time_s: stats.iter().map(|s| s.wall_time_s).sum(),
        }
    }
}

/// A constrained filter trajectory with its solver instrumentation.
#[derive(Debug, Clone)]
pub struct ConstrainedRun<T> {
    pub run: FilterRun<T>,
    /// One entry per sigma-point solve over the whole trajectory.
    pub solve_stats: Vec<SolveStats>,
}

impl<T: Scalar> ConstrainedRun<T> {
    pub fn summary(&self) -> SolveStatsSummary {
        SolveStatsSummary::from_stats(&self.solve_stats)
    }
}

/// Runs the constrained variant: per step a prediction for the noise mode
/// followed by the per-point constrained measurement update.
///
/// The per-point programs are anchored on the propagated sigma points (no
/// fresh draw from the prior): the prior covariance enters through the
/// objective, while the point spread is free to contract as the solved
/// points cluster. A fresh draw would re-inject the full process-noise
/// spread every step and, with active bounds, bias the aggregate away from
/// the constraint surface permanently.
pub fn run_constrained_filter<T: Scalar, M: StateSpaceModel<T>>(
    setup: &ConstrainedSetup<T>,
    model: &M,
    noise: &NoiseModel<T>,
    init: EstimatorState<T>,
    dt: T,
    steps: &[MeasurementStep<T>],
) -> Result<ConstrainedRun<T>, FilterError> {
    let cfg = setup.variant_config();
    let mut state = init;
    let mut states = Vec::with_capacity(steps.len() + 1);
    states.push(state.clone());
    let mut all_stats = Vec::new();
    for step in steps {
        let (prior, points) = predict(&state, step.u, dt, noise, model, &cfg)?;
        let (post, stats) =
            constrained_measurement_update(&prior, &points, &step.y, noise, setup, model)?;
        all_stats.extend(stats);
        state = post;
        states.push(state.clone());
    }
    Ok(ConstrainedRun {
        run: FilterRun { states },
        solve_stats: all_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::vec_add;
    use crate::optimizers::fd_gradient;
    use crate::psd_linalg::solve_spd;
    use approx::assert_relative_eq;

    fn identity_h() -> impl Fn(&[f64]) -> Vec<f64> {
        |x: &[f64]| x.to_vec()
    }

    /// Linear two-state toy: `x' = x`, `y = x` on both components.
    struct IdentityModel;

    impl StateSpaceModel<f64> for IdentityModel {
        fn state_dim(&self) -> usize {
            2
        }
        fn output_dim(&self) -> usize {
            2
        }
        fn propagate(
            &self,
            x: &[f64],
            _u: f64,
            _dt: f64,
        ) -> Result<Vec<f64>, crate::model::IntegrationError> {
            Ok(x.to_vec())
        }
        fn output(&self, x: &[f64]) -> Vec<f64> {
            x.to_vec()
        }
        fn output_matrix(&self) -> Option<Mat<f64>> {
            Some(Mat::identity(2))
        }
    }

    #[test]
    fn slack_constraints_reduce_to_kalman_update() {
        // Bounds far below the iterates never activate, so the aggregated
        // posterior mean must equal the closed-form gain update of the
        // prior mean.
        let model = IdentityModel;
        let prior_cov = SymMatrix::symmetrize(&Mat::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]));
        let prior = EstimatorState::new(vec![1.0, 2.0], prior_cov.clone(), 0.0);
        let r = SymMatrix::from_diag(&[0.5, 0.8]);
        let noise = NoiseModel {
            q: SymMatrix::identity(2),
            r: r.clone(),
        };
        let (lambda, gamma) = crate::sigma_points::scaling(2, &Default::default()).unwrap();
        let w = crate::sigma_points::weights(2, lambda, 1.0, 2.0).unwrap();
        let points = crate::sigma_points::draw(&prior.mean, &prior.cov, gamma, &w).unwrap();
        let y = vec![1.6, 1.1];
        let slack = LinearConstraints::new(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
            vec![1e6, 1e6],
            &prior.mean,
        )
        .unwrap();
        for formulation in Formulation::ALL {
            let setup = ConstrainedSetup::new(formulation, NoiseMode::Additive, slack.clone());
            let (post, stats) =
                constrained_measurement_update(&prior, &points, &y, &noise, &setup, &model)
                    .unwrap();
            // Closed-form: χ⁻ + K(y − χ⁻) with K = P(P+R)⁻¹.
            let p_yy = SymMatrix::symmetrize(&prior.cov.as_mat().add(r.as_mat()));
            let k = solve_spd(&p_yy, prior.cov.as_mat()).unwrap().transpose();
            let want = vec_add(&prior.mean, &k.matvec(&vec_sub(&y, &prior.mean)));
            for (a, b) in post.mean.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-6, "{formulation:?}: {a} vs {b}");
            }
            assert_eq!(stats.len(), points.len());
        }
    }

    #[test]
    fn binding_nonnegativity_clips_solved_points() {
        // A prior pushing the second component negative: every solved point
        // must respect the bound, and so must the aggregated mean.
        let model = IdentityModel;
        let prior_cov = SymMatrix::from_diag(&[1.0, 1.0]);
        let prior = EstimatorState::new(vec![1.0, -0.8], prior_cov.clone(), 0.0);
        let noise = NoiseModel {
            q: SymMatrix::identity(2),
            r: SymMatrix::from_diag(&[0.5, 0.5]),
        };
        let w = crate::sigma_points::weights(2, 0.0, 1.0, 2.0).unwrap();
        let points =
            crate::sigma_points::draw(&prior.mean, &prior.cov, 2.0_f64.sqrt(), &w).unwrap();
        let setup = ConstrainedSetup::new(
            Formulation::Qp,
            NoiseMode::Additive,
            LinearConstraints::nonnegative(2),
        );
        let (post, _) =
            constrained_measurement_update(&prior, &points, &[1.0, -0.5], &noise, &setup, &model)
                .unwrap();
        for &m in &post.mean {
            assert!(m >= -1e-8, "aggregated mean component {m} below bound");
        }
    }

    #[test]
    fn cost_vanishes_at_consistent_point() {
        let p = SymMatrix::from_diag(&[1.0, 2.0]);
        let r = SymMatrix::from_diag(&[1.0, 1.0]);
        let chi = [0.3, -0.4];
        let h = identity_h();
        let y = h(&chi);
        let c = nlp_cost(&chi, &chi, &p, &y, &r, &h).unwrap();
        assert_relative_eq!(c, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn cost_scalar_hand_value() {
        let p = SymMatrix::from_diag(&[1.0]);
        let r = SymMatrix::from_diag(&[1.0]);
        let h = identity_h();
        let c = nlp_cost(&[1.0], &[0.0], &p, &[0.0], &r, &h).unwrap();
        assert_relative_eq!(c, 2.0, epsilon = 1e-14);
        // Doubling R halves only the measurement term.
        let r2 = SymMatrix::from_diag(&[2.0]);
        let c2 = nlp_cost(&[1.0], &[0.0], &p, &[0.0], &r2, &h).unwrap();
        assert_relative_eq!(c2, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn gradient_scalar_hand_value() {
        let p = SymMatrix::from_diag(&[1.0]);
        let r = SymMatrix::from_diag(&[1.0]);
        let h = identity_h();
        let c = Mat::identity(1);
        let g = nlp_gradient(&[1.0], &[0.0], &p, &[0.0], &r, &h, &c).unwrap();
        assert_relative_eq!(g[0], 4.0, epsilon = 1e-13);
    }

    #[test]
    fn gradient_vanishes_at_unconstrained_optimum() {
        // Closed-form optimum for linear h: χ* = χ⁻ + K(y − Cχ⁻).
        let p = SymMatrix::from_diag(&[2.0, 1.0]);
        let r = SymMatrix::from_diag(&[0.5, 0.5]);
        let c = Mat::identity(2);
        let chi_prior = [1.0, -1.0];
        let y = [2.0, 0.5];
        // K = P Cᵀ (C P Cᵀ + R)⁻¹
        let p_yy = SymMatrix::symmetrize(&p.as_mat().add(r.as_mat()));
        let k = solve_spd(&p_yy, p.as_mat()).unwrap().transpose();
        let innov = vec_sub(&y, &chi_prior);
        let chi_star = vec_add(&chi_prior, &k.matvec(&innov));
        let h = identity_h();
        let g = nlp_gradient(&chi_star, &chi_prior, &p, &y, &r, &h, &c).unwrap();
        assert!(crate::matrix::norm_inf(&g) < 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::scenario::SplitMix64::new(11);
        let a = Mat::from_fn(3, 3, |_, _| rng.next_f64() - 0.5);
        let p = SymMatrix::symmetrize(&a.matmul(&a.transpose()))
            .add(&SymMatrix::identity(3).scale(0.5));
        let r = SymMatrix::from_diag(&[0.9, 1.4, 0.5]);
        let c = Mat::identity(3);
        let h = identity_h();
        let chi_prior: Vec<f64> = (0..3).map(|_| rng.next_f64()).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.next_f64()).collect();
        let chi: Vec<f64> = (0..3).map(|_| rng.next_f64() + 0.2).collect();
        let g = nlp_gradient(&chi, &chi_prior, &p, &y, &r, &h, &c).unwrap();
        let cost = |x: &[f64]| nlp_cost(x, &chi_prior, &p, &y, &r, &h).unwrap();
        let g_fd = fd_gradient(cost, &chi, 1e-6);
        for (a, b) in g.iter().zip(&g_fd) {
            assert_relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-8);
        }
    }

    #[test]
    fn hessian_hand_values() {
        let p = SymMatrix::<f64>::identity(2);
        let r = SymMatrix::identity(2);
        let c = Mat::identity(2);
        let h = nlp_hessian(&p, &r, &c).unwrap();
        for i in 0..2 {
            assert_relative_eq!(h[(i, i)], 4.0, epsilon = 1e-13);
        }
        // Without measurement sensitivity only the prior term remains.
        let c0 = Mat::zeros(2, 2);
        let h0 = nlp_hessian(&p, &r, &c0).unwrap();
        for i in 0..2 {
            assert_relative_eq!(h0[(i, i)], 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn hessian_matches_differenced_gradient() {
        let p = SymMatrix::from_diag(&[2.0, 0.7]);
        let r = SymMatrix::from_diag(&[1.1, 0.6]);
        let c = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let hess = nlp_hessian(&p, &r, &c).unwrap();
        let chi_prior = [0.4, 0.8];
        let y = [0.2, 1.0];
        let h = identity_h();
        let chi = [0.9, 0.1];
        let step = 1e-6;
        for j in 0..2 {
            let mut xp = chi;
            xp[j] += step;
            let gp = nlp_gradient(&xp, &chi_prior, &p, &y, &r, &h, &c).unwrap();
            xp[j] = chi[j] - step;
            let gm = nlp_gradient(&xp, &chi_prior, &p, &y, &r, &h, &c).unwrap();
            for i in 0..2 {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                assert_relative_eq!(hess[(i, j)], fd, max_relative = 1e-5, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn qp_objective_minimizer_is_kalman_update() {
        // Scalar example: P⁻ = 2, C = 1, R = 2, y = 2, χ⁻ = 0 → minimizer 1.
        let p = SymMatrix::from_diag(&[2.0]);
        let r = SymMatrix::from_diag(&[2.0]);
        let c = Mat::identity(1);
        let (h, g) = qp_objective(&c, &r, &p, &[2.0], &[0.0]).unwrap();
        let x = solve_spd(&h, &Mat::column(&[-g[0]])).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0, epsilon = 1e-12);
        // Zero innovation keeps the prior point.
        let (h, g) = qp_objective(&c, &r, &p, &[0.0], &[0.0]).unwrap();
        let x = solve_spd(&h, &Mat::column(&[-g[0]])).unwrap();
        assert_relative_eq!(x[(0, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn qp_objective_matches_closed_form_gain() {
        let mut rng = crate::scenario::SplitMix64::new(3);
        let a = Mat::from_fn(3, 3, |_, _| rng.next_f64() - 0.5);
        let p = SymMatrix::symmetrize(&a.matmul(&a.transpose()))
            .add(&SymMatrix::identity(3).scale(0.4));
        let r = SymMatrix::from_diag(&[0.96, 1.5, 0.24]);
        let c = Mat::identity(3);
        let chi_prior: Vec<f64> = (0..3).map(|_| rng.next_f64() * 2.0).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.next_f64() * 2.0).collect();
        let (h, g) = qp_objective(&c, &r, &p, &y, &chi_prior).unwrap();
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let x = solve_spd(&h, &Mat::column(&neg_g)).unwrap().col(0);
        // K = P Cᵀ (C P Cᵀ + R)⁻¹ on the same data.
        let p_yy = SymMatrix::symmetrize(&p.as_mat().add(r.as_mat()));
        let k = solve_spd(&p_yy, p.as_mat()).unwrap().transpose();
        let want = vec_add(&chi_prior, &k.matvec(&vec_sub(&y, &chi_prior)));
        for (a, b) in x.iter().zip(&want) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-10);
        }
    }
}
