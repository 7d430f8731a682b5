//! Benchmark scenario: truth simulation, feed schedule, seeded measurement
//! synthesis, and the common filter tuning with plant-model mismatch.
//!
//! Reproducibility contract: the noise generator is a SplitMix64 stream fed
//! through a Box-Muller transform, drawn channel-major (all samples of
//! channel 1, then channel 2, ...). The generator id is recorded in the
//! output metadata so a series can always be regenerated.

use crate::ad_model::{AdModel, IntegratorConfig, ModelParams, OUTPUT_DIM, STATE_DIM};
use crate::model::{IntegrationError, StateSpaceModel};
use crate::psd_linalg::SymMatrix;
use crate::ukf::MeasurementStep;
use crate::Scalar;

/// Identifier of the measurement-noise generator, stored in CSV metadata.
pub const NOISE_GENERATOR_ID: &str = "splitmix64-box-muller-v1-channel-major";

/// SplitMix64: tiny shift-based 64-bit generator with full reproducibility
/// across platforms and versions.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random mantissa bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Standard normal stream via the Box-Muller transform.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: SplitMix64::new(seed),
            spare: None,
        }
    }

    pub fn next_gauss(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.rng.next_f64();
        let u2 = self.rng.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// One feeding interval: constant flow over `[start, start+duration)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedPeak<T> {
    /// Flow in L/d.
    pub flow: T,
    /// Start time in days.
    pub start: T,
    /// Duration in days.
    pub duration: T,
}

/// Full benchmark scenario description.
#[derive(Debug, Clone)]
pub struct ScenarioConfig<T> {
    pub horizon_days: T,
    /// Sample interval in hours; grid times are `k·dt_hours/24` days so the
    /// feed switch times land exactly on grid points.
    pub dt_hours: T,
    pub feeds: Vec<FeedPeak<T>>,
    /// Measurement noise standard deviations (kg/m³).
    pub sigma: [T; OUTPUT_DIM],
    pub seed: u64,
    pub true_params: ModelParams<T>,
    pub filter_params: ModelParams<T>,
    pub integ: IntegratorConfig<T>,
}

impl<T: Scalar> ScenarioConfig<T> {
    /// One-week dynamic feeding scenario: steady state start, two feed
    /// peaks, half-hour sampling.
    pub fn nominal(seed: u64) -> Self {
        let k = |v: f64| T::from_f64(v).unwrap();
        Self {
            horizon_days: k(7.0),
            dt_hours: k(0.5),
            feeds: vec![
                FeedPeak {
                    flow: k(168.0),
                    start: k(2.5),
                    duration: k(0.5),
                },
                FeedPeak {
                    flow: k(72.0),
                    start: k(5.5),
                    duration: k(1.0),
                },
            ],
            sigma: [k(0.8), k(1.0), k(0.4)],
            seed,
            true_params: ModelParams::plant(),
            filter_params: ModelParams::filter(),
            integ: IntegratorConfig::default(),
        }
    }

    /// Number of grid samples including `t = 0`.
    pub fn n_samples(&self) -> usize {
        let hours = self.horizon_days * T::from_f64(24.0).unwrap();
        let n = (hours / self.dt_hours).round().to_f64().unwrap() as usize;
        n + 1
    }

    /// Grid time of sample `k`, in days.
    pub fn sample_time(&self, k: usize) -> T {
        T::from_usize(k).unwrap() * self.dt_hours / T::from_f64(24.0).unwrap()
    }

    /// Sample interval in days.
    pub fn dt_days(&self) -> T {
        self.dt_hours / T::from_f64(24.0).unwrap()
    }
}

/// Feed flow at time `t` (days); intervals are half-open.
pub fn feed_profile<T: Scalar>(t: T, feeds: &[FeedPeak<T>]) -> T {
    for f in feeds {
        if t >= f.start && t < f.start + f.duration {
            return f.flow;
        }
    }
    T::zero()
}

/// Steady-state initial condition of the simulated plant.
pub fn initial_true_state<T: Scalar>() -> [T; STATE_DIM] {
    let k = |v: f64| T::from_f64(v).unwrap();
    [k(4.09), k(10.52), k(11.04), k(2.57), k(0.96), k(2.02)]
}

/// Deliberately offset initial estimate shared by all filters.
pub fn initial_estimate<T: Scalar>() -> [T; STATE_DIM] {
    let k = |v: f64| T::from_f64(v).unwrap();
    [k(2.20), k(19.30), k(24.94), k(2.22), k(0.31), k(2.64)]
}

/// One truth sample on the measurement grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSample<T> {
    /// Time in days.
    pub t: T,
    /// Feed flow applied from this sample onward (L/d).
    pub u: T,
    pub x: [T; STATE_DIM],
    pub y_clean: [T; OUTPUT_DIM],
}

/// Simulates the plant with the true parameters over the full horizon.
pub fn simulate_truth<T: Scalar>(
    cfg: &ScenarioConfig<T>,
) -> Result<Vec<TruthSample<T>>, IntegrationError> {
    let model = AdModel::with_integrator(cfg.true_params.clone(), cfg.integ);
    let n = cfg.n_samples();
    let dt = cfg.dt_days();
    let mut x = initial_true_state::<T>().to_vec();
    let mut samples = Vec::with_capacity(n);
    let push = |samples: &mut Vec<TruthSample<T>>, cfg: &ScenarioConfig<T>, k: usize, x: &[T]| {
        let t = cfg.sample_time(k);
        let mut xs = [T::zero(); STATE_DIM];
        xs.copy_from_slice(x);
        samples.push(TruthSample {
            t,
            u: feed_profile(t, &cfg.feeds),
            x: xs,
            y_clean: crate::ad_model::output(x),
        });
    };
    push(&mut samples, cfg, 0, &x);
    for k in 1..n {
        let u = feed_profile(cfg.sample_time(k - 1), &cfg.feeds);
        x = model.propagate(&x, u, dt)?;
        push(&mut samples, cfg, k, &x);
    }
    Ok(samples)
}

/// One noisy measurement sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSample<T> {
    pub t: T,
    pub u: T,
    pub y: [T; OUTPUT_DIM],
}

/// Adds seeded zero-mean Gaussian noise to the clean outputs.
///
/// Channel-major draw order: the full series of channel 1 first, then
/// channel 2, then channel 3, all from one stream.
pub fn synthesize_measurements<T: Scalar>(
    truth: &[TruthSample<T>],
    sigma: &[T; OUTPUT_DIM],
    seed: u64,
) -> Vec<MeasurementSample<T>> {
    let mut out: Vec<MeasurementSample<T>> = truth
        .iter()
        .map(|s| MeasurementSample {
            t: s.t,
            u: s.u,
            y: s.y_clean,
        })
        .collect();
    let mut stream = GaussianStream::new(seed);
    for (c, &sigma_c) in sigma.iter().enumerate() {
        for (m, s) in out.iter_mut().zip(truth) {
            let w = T::from_f64(stream.next_gauss()).unwrap() * sigma_c;
            m.y[c] = s.y_clean[c] + w;
        }
    }
    out
}

/// Shared filter tuning: all variants start from the same offset estimate,
/// a covariance matched to the initial error, inflated measurement noise and
/// unit process noise.
#[derive(Debug, Clone)]
pub struct Tuning<T> {
    pub x0_true: [T; STATE_DIM],
    pub x0_hat: [T; STATE_DIM],
    pub p0: SymMatrix<T>,
    pub q: SymMatrix<T>,
    pub r: SymMatrix<T>,
}

pub fn default_tuning<T: Scalar>() -> Tuning<T> {
    let x0_true = initial_true_state::<T>();
    let x0_hat = initial_estimate::<T>();
    let p0_diag: Vec<T> = x0_hat
        .iter()
        .zip(&x0_true)
        .map(|(&a, &b)| (a - b) * (a - b))
        .collect();
    let inflation = T::from_f64(1.5).unwrap();
    let sigma = ScenarioConfig::<T>::nominal(0).sigma;
    let r_diag: Vec<T> = sigma.iter().map(|&s| inflation * s * s).collect();
    Tuning {
        x0_true,
        x0_hat,
        p0: SymMatrix::from_diag(&p0_diag),
        q: SymMatrix::identity(STATE_DIM),
        r: SymMatrix::from_diag(&r_diag),
    }
}

/// Converts a measurement series into filter steps: step `k` holds the feed
/// applied over `[t_{k-1}, t_k)` and the measurement taken at `t_k`.
pub fn filter_steps<T: Scalar>(series: &[MeasurementSample<T>]) -> Vec<MeasurementStep<T>> {
    series
        .windows(2)
        .map(|w| MeasurementStep {
            u: w[0].u,
            y: w[1].y.to_vec(),
        })
        .collect()
}
