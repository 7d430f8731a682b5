//! Convex QP active-set solver and an SQP solver with three derivative
//! modes, instrumented with iteration and cost-evaluation counts.
//!
//! Problem sizes here are tiny (a handful of variables, bound-style
//! constraints), so both solvers use dense Cholesky-backed KKT solves and
//! favor exact complementarity over scalability.

use std::cell::Cell;
use std::time::Instant;

use thiserror::Error;

use crate::matrix::{dot, norm_inf, vec_add, vec_scale, vec_sub, Mat};
use crate::psd_linalg::{solve_spd, LinalgError, SymMatrix};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("iteration limit reached without convergence")]
    MaxIterations,
    #[error("start point violates the constraints")]
    InfeasibleStart,
    #[error("line search could not make progress")]
    LineSearchFailure,
    #[error(transparent)]
    Numerical(#[from] LinalgError),
}

/// Linear inequality constraints `A x ≤ b`, stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraints<T> {
    rows: Vec<Vec<T>>,
    bounds: Vec<T>,
    dim: usize,
}

impl<T: Scalar> LinearConstraints<T> {
    /// Builds the constraint set and checks it is satisfiable at `witness`.
    pub fn new(rows: Vec<Vec<T>>, bounds: Vec<T>, witness: &[T]) -> Result<Self, SolveError> {
        assert_eq!(rows.len(), bounds.len());
        let dim = witness.len();
        assert!(
            rows.iter().all(|r| r.len() == dim),
            "constraint row length mismatch"
        );
        let cons = Self { rows, bounds, dim };
        let tol = T::from_f64(1e-9).unwrap();
        if !cons.is_feasible(witness, tol) {
            return Err(SolveError::InfeasibleStart);
        }
        Ok(cons)
    }

    /// No constraints at all.
    pub fn unconstrained(dim: usize) -> Self {
        Self {
            rows: Vec::new(),
            bounds: Vec::new(),
            dim,
        }
    }

    /// Componentwise nonnegativity `x ≥ 0` as `−x ≤ 0`.
    pub fn nonnegative(dim: usize) -> Self {
        let rows = (0..dim)
            .map(|i| {
                let mut r = vec![T::zero(); dim];
                r[i] = -T::one();
                r
            })
            .collect();
        Self {
            rows,
            bounds: vec![T::zero(); dim],
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i]
    }

    pub fn bound(&self, i: usize) -> T {
        self.bounds[i]
    }

    /// Largest violation `max(A x − b)`, negative when strictly interior.
    pub fn max_violation(&self, x: &[T]) -> T {
        self.rows
            .iter()
            .zip(&self.bounds)
            .map(|(r, &b)| dot(r, x) - b)
            .fold(T::neg_infinity(), T::max)
    }

    pub fn is_feasible(&self, x: &[T], tol: T) -> bool {
        self.rows
            .iter()
            .zip(&self.bounds)
            .all(|(r, &b)| dot(r, x) - b <= tol * (T::one() + b.abs()))
    }

    /// Projects `x` onto rows that are simple bounds (a single nonzero
    /// coefficient); rows coupling several variables are left alone.
    pub fn clip_to_bounds(&self, x: &[T]) -> Vec<T> {
        let mut out = x.to_vec();
        for (r, &b) in self.rows.iter().zip(&self.bounds) {
            let nonzero: Vec<usize> = (0..self.dim).filter(|&j| r[j] != T::zero()).collect();
            if let [j] = nonzero[..] {
                let limit = b / r[j];
                if r[j] > T::zero() {
                    out[j] = out[j].min(limit);
                } else {
                    out[j] = out[j].max(limit);
                }
            }
        }
        out
    }
}

/// Per-solve instrumentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub cost_evaluations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

/// Equality-constrained step from the current working set, by a range-space
/// (Schur complement) solve on the KKT system.
fn eqp_step<T: Scalar>(
    h: &SymMatrix<T>,
    grad: &[T],
    cons: &LinearConstraints<T>,
    working: &[usize],
) -> Result<(Vec<T>, Vec<T>), LinalgError> {
    let n = grad.len();
    let hinv_g = solve_spd(h, &Mat::column(grad))?.col(0);
    if working.is_empty() {
        return Ok((vec_scale(&hinv_g, -T::one()), Vec::new()));
    }
    let k = working.len();
    let mut at = Mat::zeros(n, k);
    for (c, &wi) in working.iter().enumerate() {
        at.set_col(c, cons.row(wi));
    }
    let hinv_at = solve_spd(h, &at)?;
    let schur = SymMatrix::symmetrize(&at.transpose().matmul(&hinv_at));
    let rhs: Vec<T> = working
        .iter()
        .map(|&wi| -dot(cons.row(wi), &hinv_g))
        .collect();
    let lambda = solve_spd(&schur, &Mat::column(&rhs))?.col(0);
    // p = −H⁻¹(g + Aᵀλ)
    let at_lambda = at.matvec(&lambda);
    let mut p = vec![T::zero(); n];
    let corr = solve_spd(h, &Mat::column(&at_lambda))?.col(0);
    for i in 0..n {
        p[i] = -hinv_g[i] - corr[i];
    }
    Ok((p, lambda))
}

/// Minimizes `½ xᵀHx + gᵀx` subject to `A x ≤ b` with a primal active-set
/// method. Returns the minimizer, the full multiplier vector and stats.
pub fn solve_qp<T: Scalar>(
    h: &SymMatrix<T>,
    g: &[T],
    cons: &LinearConstraints<T>,
    x0: &[T],
    tol: T,
) -> Result<(Vec<T>, Vec<T>, SolveStats), SolveError> {
    let start = Instant::now();
    let n = g.len();
    assert_eq!(h.dim(), n);
    assert_eq!(cons.dim(), n);
    if !cons.is_feasible(x0, tol) {
        return Err(SolveError::InfeasibleStart);
    }
    let h_scale = h.as_mat().max_abs() * T::from_usize(n).unwrap();
    let step_tol = tol / (T::one() + h_scale);
    let max_iterations = 200;

    let mut x = x0.to_vec();
    let mut working: Vec<usize> = (0..cons.len())
        .filter(|&i| {
            (dot(cons.row(i), &x) - cons.bound(i)).abs() <= tol * (T::one() + cons.bound(i).abs())
        })
        .collect();
    for iter in 1..=max_iterations {
        let grad = vec_add(&h.as_mat().matvec(&x), g);
        let (p, lambda) = eqp_step(h, &grad, cons, &working)?;
        if norm_inf(&p) <= step_tol * (T::one() + norm_inf(&x)) {
            if let Some((pos, _)) = lambda
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < -tol)
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            {
                working.remove(pos);
                continue;
            }
            let mut mu = vec![T::zero(); cons.len()];
            for (c, &wi) in working.iter().enumerate() {
                mu[wi] = lambda[c];
            }
            let stats = SolveStats {
                iterations: iter,
                cost_evaluations: 0,
                converged: true,
                wall_time_s: start.elapsed().as_secs_f64(),
            };
            return Ok((x, mu, stats));
        }
        // Ratio test against the inactive constraints.
        let mut alpha = T::one();
        let mut blocking = None;
        for i in 0..cons.len() {
            if working.contains(&i) {
                continue;
            }
            let dir = dot(cons.row(i), &p);
            if dir <= T::zero() {
                continue;
            }
            let gap = cons.bound(i) - dot(cons.row(i), &x);
            let ai = (gap / dir).max(T::zero());
            if ai < alpha {
                alpha = ai;
                blocking = Some(i);
            }
        }
        for (xi, &pi) in x.iter_mut().zip(&p) {
            *xi = *xi + alpha * pi;
        }
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(SolveError::MaxIterations)
}

/// Central-difference gradient with per-coordinate step
/// `max(h_rel, h_rel·|xᵢ|)`.
pub fn fd_gradient<T: Scalar>(cost: impl Fn(&[T]) -> T, x: &[T], h_rel: T) -> Vec<T> {
    let mut g = vec![T::zero(); x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = h_rel.max(h_rel * x[i].abs());
        xp[i] = x[i] + h;
        let fp = cost(&xp);
        xp[i] = x[i] - h;
        let fm = cost(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (h + h);
    }
    g
}

/// Analytic gradient callback for [`solve_nlp`].
pub type GradientFn<'a, T> = &'a dyn Fn(&[T]) -> Vec<T>;
/// Analytic Hessian callback for [`solve_nlp`].
pub type HessianFn<'a, T> = &'a dyn Fn(&[T]) -> SymMatrix<T>;

/// Options for [`solve_nlp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlpOptions<T> {
    /// Relative step tolerance for first-order convergence.
    pub tol: T,
    pub max_iterations: usize,
    /// Relative finite-difference step.
    pub fd_step: T,
}

impl<T: Scalar> Default for NlpOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::from_f64(1e-8).unwrap(),
            max_iterations: 100,
            fd_step: T::from_f64(1e-6).unwrap(),
        }
    }
}

/// SQP with backtracking line search over linear inequality constraints.
///
/// The derivative mode is picked from the supplied closures: with no
/// `gradient`, central differences are used (every probe is counted as a
/// cost evaluation); with no `hessian`, a damped BFGS model replaces it.
/// Every subproblem is solved with [`solve_qp`], so iterates stay feasible.
pub fn solve_nlp<T: Scalar>(
    cost: &dyn Fn(&[T]) -> T,
    gradient: Option<GradientFn<'_, T>>,
    hessian: Option<HessianFn<'_, T>>,
    cons: &LinearConstraints<T>,
    x0: &[T],
    opts: &NlpOptions<T>,
) -> Result<(Vec<T>, SolveStats), SolveError> {
    let start = Instant::now();
    let n = x0.len();
    assert_eq!(cons.dim(), n);
    if !cons.is_feasible(x0, opts.tol) {
        return Err(SolveError::InfeasibleStart);
    }
    let evals = Cell::new(0usize);
    let eval = |x: &[T]| -> T {
        evals.set(evals.get() + 1);
        cost(x)
    };
    let grad_at = |x: &[T]| -> Vec<T> {
        match gradient {
            Some(g) => g(x),
            None => fd_gradient(eval, x, opts.fd_step),
        }
    };
    let armijo = T::from_f64(1e-4).unwrap();
    let half = T::from_f64(0.5).unwrap();
    let loose = opts.tol.sqrt();
    // Predicted-reduction floor: below this the model decrease is round-off.
    let pred_floor = T::from_f64(100.0).unwrap() * T::epsilon();

    let mut x = x0.to_vec();
    let mut fx = eval(&x);
    let mut bfgs = SymMatrix::identity(n);
    let mut prev_step: Option<(Vec<T>, Vec<T>)> = None;
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let g = grad_at(&x);
        if hessian.is_none() {
            if let Some((s, g_old)) = prev_step.take() {
                bfgs = bfgs_update(&bfgs, &s, &vec_sub(&g, &g_old));
            }
        }
        let b = match hessian {
            Some(h) => h(&x),
            None => bfgs.clone(),
        };
        iterations += 1;
        // Local QP: min ½dᵀBd + gᵀd  s.t.  A(x+d) ≤ b.
        let shifted: Vec<T> = (0..cons.len())
            .map(|i| cons.bound(i) - dot(cons.row(i), &x))
            .collect();
        let sub = LinearConstraints {
            rows: cons.rows.clone(),
            bounds: shifted,
            dim: n,
        };
        let (d, _mu, _) = solve_qp(&b, &g, &sub, &vec![T::zero(); n], opts.tol)?;
        let scale = T::one() + norm_inf(&x);
        if norm_inf(&d) <= opts.tol * scale {
            converged = true;
            break;
        }
        let pred = dot(&g, &d);
        if pred.abs() <= pred_floor * (T::one() + fx.abs()) && norm_inf(&d) <= loose * scale {
            converged = true;
            break;
        }
        // Backtracking Armijo search; the segment stays feasible because
        // both endpoints are.
        let mut alpha = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let trial = vec_add(&x, &vec_scale(&d, alpha));
            let ft = eval(&trial);
            if ft <= fx + armijo * alpha * pred {
                accepted = Some((trial, ft));
                break;
            }
            alpha = alpha * half;
        }
        let Some((x_new, f_new)) = accepted else {
            if norm_inf(&d) <= loose * scale {
                converged = true;
                break;
            }
            return Err(SolveError::LineSearchFailure);
        };
        prev_step = Some((vec_sub(&x_new, &x), g));
        x = x_new;
        fx = f_new;
    }
    if !converged {
        return Err(SolveError::MaxIterations);
    }
    let stats = SolveStats {
        iterations,
        cost_evaluations: evals.get(),
        converged: true,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((x, stats))
}

/// Damped BFGS update that keeps the model positive definite (curvature
/// pairs that would break it are blended toward `B s`).
fn bfgs_update<T: Scalar>(b: &SymMatrix<T>, s: &[T], y: &[T]) -> SymMatrix<T> {
    let bs = b.as_mat().matvec(s);
    let s_bs = dot(s, &bs);
    let s_y = dot(s, y);
    if s_bs <= T::epsilon() {
        return b.clone();
    }
    let point_two = T::from_f64(0.2).unwrap();
    let y_eff: Vec<T> = if s_y >= point_two * s_bs {
        y.to_vec()
    } else {
        let theta = (T::one() - point_two) * s_bs / (s_bs - s_y);
        y.iter()
            .zip(&bs)
            .map(|(&yi, &bsi)| theta * yi + (T::one() - theta) * bsi)
            .collect()
    };
    let s_y_eff = dot(s, &y_eff);
    if s_y_eff <= T::epsilon() * s_bs {
        return b.clone();
    }
    let mut m = b.as_mat().clone();
    let n = s.len();
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)] + y_eff[i] * y_eff[j] / s_y_eff - bs[i] * bs[j] / s_bs;
            m[(i, j)] = v;
        }
    }
    SymMatrix::symmetrize(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn qp_hand_problem() -> (SymMatrix<f64>, Vec<f64>, LinearConstraints<f64>) {
        let h = SymMatrix::from_diag(&[2.0, 2.0]);
        let g = vec![2.0, -2.0];
        let cons = LinearConstraints::nonnegative(2);
        (h, g, cons)
    }

    #[test]
    fn qp_hand_kkt_solution() {
        let (h, g, cons) = qp_hand_problem();
        let (x, mu, stats) = solve_qp(&h, &g, &cons, &[1.0, 1.0], 1e-8).unwrap();
        assert_relative_eq!(x[0], 0.0, epsilon = 1e-10);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-10);
        assert_relative_eq!(mu[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(mu[1], 0.0, epsilon = 1e-10);
        assert!(stats.converged);
    }

    #[test]
    fn qp_unconstrained_stationary_point() {
        let h = SymMatrix::from_diag(&[2.0, 2.0]);
        let (x, mu, _) = solve_qp(
            &h,
            &[2.0, -2.0],
            &LinearConstraints::unconstrained(2),
            &[0.0, 0.0],
            1e-8,
        )
        .unwrap();
        assert_relative_eq!(x[0], -1.0, epsilon = 1e-10);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-10);
        assert!(mu.is_empty());
    }

    #[test]
    fn qp_origin_optimal() {
        let h = SymMatrix::<f64>::identity(3);
        let cons = LinearConstraints::nonnegative(3);
        let (x, _, _) = solve_qp(&h, &[0.0; 3], &cons, &[0.5, 0.0, 1.0], 1e-8).unwrap();
        for v in x {
            assert!(v.abs() <= 1e-10);
        }
    }

    #[test]
    fn qp_rejects_infeasible_start() {
        let (h, g, cons) = qp_hand_problem();
        let err = solve_qp(&h, &g, &cons, &[-1.0, 1.0], 1e-8).unwrap_err();
        assert_eq!(err, SolveError::InfeasibleStart);
    }

    #[test]
    fn qp_kkt_conditions_random() {
        let mut rng = crate::scenario::SplitMix64::new(7);
        for _ in 0..50 {
            let n = 4;
            let a = Mat::from_fn(n, n, |_, _| rng.next_f64() * 2.0 - 1.0);
            let mut h = SymMatrix::symmetrize(&a.matmul(&a.transpose()));
            h = h.add(&SymMatrix::identity(n).scale(0.5));
            let g: Vec<f64> = (0..n).map(|_| rng.next_f64() * 4.0 - 2.0).collect();
            let cons = LinearConstraints::nonnegative(n);
            let x0: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let tol = 1e-8;
            let (x, mu, _) = solve_qp(&h, &g, &cons, &x0, tol).unwrap();
            // Stationarity.
            let mut r = vec_add(&h.as_mat().matvec(&x), &g);
            for (i, &mu_i) in mu.iter().enumerate() {
                for (j, rj) in r.iter_mut().enumerate() {
                    *rj += mu_i * cons.row(i)[j];
                }
            }
            assert!(norm_inf(&r) <= tol * 10.0, "stationarity {:?}", r);
            // Primal and dual feasibility, complementarity.
            for (i, &mu_i) in mu.iter().enumerate() {
                let slack = dot(cons.row(i), &x) - cons.bound(i);
                assert!(slack <= tol);
                assert!(mu_i >= -tol);
                assert!((mu_i * slack).abs() <= tol * 10.0);
            }
        }
    }

    fn quadratic_cost(h: &SymMatrix<f64>, g: &[f64]) -> impl Fn(&[f64]) -> f64 {
        let h = h.clone();
        let g = g.to_vec();
        move |x: &[f64]| 0.5 * dot(x, &h.as_mat().matvec(x)) + dot(&g, x)
    }

    #[test]
    fn nlp_modes_agree_with_qp() {
        let (h, g, cons) = qp_hand_problem();
        let (x_qp, _, _) = solve_qp(&h, &g, &cons, &[1.0, 1.0], 1e-10).unwrap();
        let cost = quadratic_cost(&h, &g);
        let grad = |x: &[f64]| vec_add(&h.as_mat().matvec(x), &g);
        let hess = |_: &[f64]| h.clone();
        let opts = NlpOptions::default();

        let (x_fd, s_fd) = solve_nlp(&cost, None, None, &cons, &[1.0, 1.0], &opts).unwrap();
        let (x_gr, s_gr) = solve_nlp(&cost, Some(&grad), None, &cons, &[1.0, 1.0], &opts).unwrap();
        let (x_nh, s_nh) =
            solve_nlp(&cost, Some(&grad), Some(&hess), &cons, &[1.0, 1.0], &opts).unwrap();
        for xs in [&x_fd, &x_gr, &x_nh] {
            for (a, b) in xs.iter().zip(&x_qp) {
                assert!((a - b).abs() <= 1e-8, "{xs:?} vs {x_qp:?}");
            }
        }
        assert!(s_fd.cost_evaluations > s_gr.cost_evaluations);
        assert!(s_gr.cost_evaluations >= s_nh.cost_evaluations);
    }

    #[test]
    fn nlp_converges_immediately_at_optimum() {
        let h = SymMatrix::from_diag(&[2.0, 2.0]);
        let g = vec![-2.0, -4.0];
        // Unconstrained optimum (1, 2), interior for x ≥ 0.
        let cons = LinearConstraints::nonnegative(2);
        let cost = quadratic_cost(&h, &g);
        let grad = |x: &[f64]| vec_add(&h.as_mat().matvec(x), &g);
        let (x, stats) = solve_nlp(
            &cost,
            Some(&grad),
            None,
            &cons,
            &[1.0, 2.0],
            &NlpOptions::default(),
        )
        .unwrap();
        assert_eq!(stats.iterations, 1);
        assert!(stats.cost_evaluations <= 2);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fd_gradient_known_values() {
        let cost = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let g = fd_gradient(cost, &[1.0, 2.0], 1e-6);
        assert_relative_eq!(g[0], 2.0, max_relative = 1e-6);
        assert_relative_eq!(g[1], 4.0, max_relative = 1e-6);
        let flat = |_: &[f64]| 3.5;
        let g = fd_gradient(flat, &[1.0, -2.0, 0.3], 1e-6);
        assert!(norm_inf(&g) == 0.0);
    }

    #[test]
    fn clip_to_bounds_projects_box_rows() {
        let cons = LinearConstraints::<f64>::nonnegative(3);
        let clipped = cons.clip_to_bounds(&[-1.0, 0.5, -0.2]);
        assert_eq!(clipped, vec![0.0, 0.5, 0.0]);
    }
}
