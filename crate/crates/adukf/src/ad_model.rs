//! Six-state anaerobic digestion core model.
//!
//! The model tracks mass concentrations (kg/m³) of dissolved methane and
//! carbon dioxide, carbohydrates, proteins, lipids and microbial biomass in a
//! continuously stirred reactor. Macro nutrients ferment directly to the
//! dissolved gases with yields from a stoichiometric (Petersen) table, and
//! decaying biomass is recycled back into the nutrient pools. Dissolved CH₄,
//! dissolved CO₂ and biomass are measurable; the output map is linear.
//!
//! All rates are per day and feed flow is in L/d for a 100 L reactor.

use crate::matrix::Mat;
use crate::model::{IntegrationError, StateSpaceModel};
use crate::Scalar;

/// Number of state variables.
pub const STATE_DIM: usize = 6;
/// Number of measured outputs.
pub const OUTPUT_DIM: usize = 3;

/// State component indices.
pub const S_CH4: usize = 0;
pub const S_CO2: usize = 1;
pub const X_CH: usize = 2;
pub const X_PR: usize = 3;
pub const X_LI: usize = 4;
pub const X_BAC: usize = 5;

/// Reaction and transport parameters.
///
/// `c1` is the inverse liquid volume (1/L), `c2..c5` are first-order rate
/// constants (1/d) for carbohydrate, protein and lipid fermentation and for
/// biomass decay. `petersen` holds the signed stoichiometric table with one
/// row per process (three fermentations, one decay) and one column per state
/// component. `xi` is the inlet concentration of each component (kg/m³).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
    pub c5: T,
    pub petersen: [[T; STATE_DIM]; 4],
    pub xi: [T; STATE_DIM],
}

/// Stoichiometric yields shared by both parameter sets.
fn petersen_table<T: Scalar>() -> [[T; STATE_DIM]; 4] {
    let k = |v: f64| T::from_f64(v).unwrap();
    [
        // Fermentation of carbohydrates, proteins, lipids; biomass decay.
        [k(0.2482), k(0.6809), k(-1.0), k(0.0), k(0.0), k(0.1372)],
        [k(0.3221), k(0.7954), k(0.0), k(-1.0), k(0.0), k(0.1723)],
        [k(0.6393), k(0.5817), k(0.0), k(0.0), k(-1.0), k(0.2286)],
        [k(0.0), k(0.0), k(0.18), k(0.77), k(0.05), k(-1.0)],
    ]
}

/// Inlet concentrations for a maize silage / cattle manure substrate mix.
fn inlet_concentrations<T: Scalar>() -> [T; STATE_DIM] {
    let k = |v: f64| T::from_f64(v).unwrap();
    [k(0.0), k(0.0), k(23.398), k(4.750), k(1.381), k(0.0)]
}

impl<T: Scalar> ModelParams<T> {
    fn with_rates(c2: f64, c3: f64, c4: f64, c5: f64) -> Self {
        let k = |v: f64| T::from_f64(v).unwrap();
        Self {
            c1: k(0.01),
            c2: k(c2),
            c3: k(c3),
            c4: k(c4),
            c5: k(c5),
            petersen: petersen_table(),
            xi: inlet_concentrations(),
        }
    }

    /// Rates of the simulated plant.
    pub fn plant() -> Self {
        Self::with_rates(0.25, 0.20, 0.10, 0.020)
    }

    /// Deliberately biased rates used inside the filters (plant-model
    /// mismatch of roughly +28%).
    pub fn filter() -> Self {
        Self::with_rates(0.3196, 0.2557, 0.1278, 0.0256)
    }

    fn rates(&self) -> [T; 4] {
        [self.c2, self.c3, self.c4, self.c5]
    }
}

/// Time derivative of the state under feed flow `u` (L/d).
///
/// Defined for any real state, including negative excursions produced by
/// unconstrained filters.
pub fn rhs<T: Scalar>(x: &[T], u: T, params: &ModelParams<T>) -> [T; STATE_DIM] {
    assert_eq!(x.len(), STATE_DIM);
    let rate_states = [X_CH, X_PR, X_LI, X_BAC];
    let mut dx = [T::zero(); STATE_DIM];
    for (i, dxi) in dx.iter_mut().enumerate() {
        *dxi = params.c1 * (params.xi[i] - x[i]) * u;
    }
    for (j, &s) in rate_states.iter().enumerate() {
        let r = params.rates()[j] * x[s];
        for (dxi, &yield_coef) in dx.iter_mut().zip(&params.petersen[j]) {
            *dxi = *dxi + yield_coef * r;
        }
    }
    dx
}

/// Measured outputs: dissolved CH₄, dissolved CO₂ and biomass.
pub fn output<T: Scalar>(x: &[T]) -> [T; OUTPUT_DIM] {
    assert_eq!(x.len(), STATE_DIM);
    [x[S_CH4], x[S_CO2], x[X_BAC]]
}

/// Constant output matrix of the (linear) measurement map.
pub fn output_matrix<T: Scalar>() -> Mat<T> {
    let mut c = Mat::zeros(OUTPUT_DIM, STATE_DIM);
    c[(0, S_CH4)] = T::one();
    c[(1, S_CO2)] = T::one();
    c[(2, X_BAC)] = T::one();
    c
}

/// Adaptive integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_steps: usize,
}

impl<T: Scalar> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::from_f64(1e-8).unwrap(),
            abs_tol: T::from_f64(1e-10).unwrap(),
            max_steps: 100_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One embedded Dormand-Prince step of size `h`: returns the fifth-order
/// solution and the normalized error estimate against the tolerances.
pub(crate) fn embedded_step<T: Scalar>(
    f: &impl Fn(&[T]) -> Vec<T>,
    x: &[T],
    h: T,
    cfg: &IntegratorConfig<T>,
) -> (Vec<T>, T) {
    let n = x.len();
    let a = DP_A.map(|row| row.map(|v| T::from_f64(v).unwrap()));
    let b5 = DP_B5.map(|v| T::from_f64(v).unwrap());
    let b4 = DP_B4.map(|v| T::from_f64(v).unwrap());
    let mut k: Vec<Vec<T>> = Vec::with_capacity(7);
    k.push(f(x));
    for coeffs in &a {
        let mut xs = x.to_vec();
        for (kj, &c) in k.iter().zip(coeffs) {
            if c == T::zero() {
                continue;
            }
            for (xi, &kji) in xs.iter_mut().zip(kj) {
                *xi = *xi + h * c * kji;
            }
        }
        k.push(f(&xs));
    }
    let mut x5 = x.to_vec();
    let mut err = T::zero();
    for i in 0..n {
        let mut s5 = T::zero();
        let mut s4 = T::zero();
        for (j, kj) in k.iter().enumerate() {
            s5 = s5 + b5[j] * kj[i];
            s4 = s4 + b4[j] * kj[i];
        }
        x5[i] = x[i] + h * s5;
        let scale = cfg.abs_tol + cfg.rel_tol * x[i].abs().max(x5[i].abs());
        err = err.max((h * (s5 - s4)).abs() / scale);
    }
    (x5, err)
}

/// Integrates `dx = f(x)` over `[0, dt]` with an embedded Dormand-Prince 5(4)
/// pair and standard step-size control.
pub fn integrate_adaptive<T: Scalar>(
    f: impl Fn(&[T]) -> Vec<T>,
    x0: &[T],
    dt: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Vec<T>, IntegrationError> {
    assert!(dt > T::zero(), "integration interval must be positive");
    let safety = T::from_f64(0.9).unwrap();
    let min_scale = T::from_f64(0.2).unwrap();
    let max_scale = T::from_f64(5.0).unwrap();
    let fifth = T::from_f64(0.2).unwrap();
    let h_min = dt * T::from_f64(1e-14).unwrap();

    let mut x = x0.to_vec();
    let mut t = T::zero();
    let mut h = dt;
    let mut steps = 0;
    while t < dt {
        if steps >= cfg.max_steps {
            return Err(IntegrationError::TooManySteps {
                max_steps: cfg.max_steps,
            });
        }
        steps += 1;
        if h > dt - t {
            h = dt - t;
        }
        let (x5, err) = embedded_step(&f, &x, h, cfg);
        if err <= T::one() {
            t = t + h;
            x = x5;
            let grow = if err == T::zero() {
                max_scale
            } else {
                (safety * (T::one() / err).powf(fifth)).min(max_scale)
            };
            h = h * grow.max(min_scale);
        } else {
            h = h * (safety * (T::one() / err).powf(fifth)).max(min_scale);
            if h < h_min {
                return Err(IntegrationError::StepSizeUnderflow {
                    t: t.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    Ok(x)
}

/// The digestion model bound to a parameter set and integrator settings.
#[derive(Debug, Clone)]
pub struct AdModel<T> {
    pub params: ModelParams<T>,
    pub integ: IntegratorConfig<T>,
}

impl<T: Scalar> AdModel<T> {
    pub fn new(params: ModelParams<T>) -> Self {
        Self {
            params,
            integ: IntegratorConfig::default(),
        }
    }

    pub fn with_integrator(params: ModelParams<T>, integ: IntegratorConfig<T>) -> Self {
        Self { params, integ }
    }
}

impl<T: Scalar> StateSpaceModel<T> for AdModel<T> {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn output_dim(&self) -> usize {
        OUTPUT_DIM
    }

    fn propagate(&self, x: &[T], u: T, dt: T) -> Result<Vec<T>, IntegrationError> {
        integrate_adaptive(|x| rhs(x, u, &self.params).to_vec(), x, dt, &self.integ)
    }

    fn output(&self, x: &[T]) -> Vec<T> {
        output(x).to_vec()
    }

    fn output_matrix(&self) -> Option<Mat<T>> {
        Some(output_matrix())
    }
}
