//! Subcommand implementations.

use std::path::Path;

use adukf::ad_model::AdModel;
use adukf::evaluation::{group_nrmse, timed_run, MEASURED_STATE_INDICES, UNMEASURED_STATE_INDICES};
use adukf::optimizers::{LinearConstraints, NlpOptions};
use adukf::scenario::{self, ScenarioConfig};
use adukf::sigma_points::{scaling, UkfTuning};
use adukf::ukf::{
    run_constrained_filter, run_filter, ConstrainedSetup, EstimatorState, Formulation,
    MeasurementStep, NoiseModel, SolveStatsSummary, VariantConfig,
};

use crate::config::{parse_formulation, parse_variant, RunConfig, Variant, VARIANT_NAMES};
use crate::io::{self, EstimateRow, SummaryRow};
use crate::AppError;

pub fn simulate(config: &RunConfig, out_dir: &Path, seed: Option<u64>) -> Result<(), AppError> {
    let cfg = config.scenario_config(seed);
    std::fs::create_dir_all(out_dir)
        .map_err(|e| AppError::usage(format!("{}: {e}", out_dir.display())))?;
    let truth = scenario::simulate_truth(&cfg)
        .map_err(|e| AppError::numerical(format!("truth simulation failed: {e}")))?;
    let series = scenario::synthesize_measurements(&truth, &cfg.sigma, cfg.seed);
    io::write_truth(&out_dir.join("truth.csv"), cfg.seed, &truth)?;
    io::write_measurements(&out_dir.join("measurements.csv"), cfg.seed, &series)?;
    println!(
        "wrote {} samples to {}/truth.csv and {}/measurements.csv (seed {})",
        truth.len(),
        out_dir.display(),
        out_dir.display(),
        cfg.seed
    );
    Ok(())
}

struct VariantRun {
    states: Vec<EstimatorState<f64>>,
    stats: Option<SolveStatsSummary>,
}

fn run_variant(
    variant: Variant,
    tuning: UkfTuning<f64>,
    solver_tol: f64,
    scenario_cfg: &ScenarioConfig<f64>,
    steps: &[MeasurementStep<f64>],
) -> Result<VariantRun, AppError> {
    let tuning_block = scenario::default_tuning::<f64>();
    let model = AdModel::with_integrator(scenario_cfg.filter_params.clone(), scenario_cfg.integ);
    let noise = NoiseModel {
        q: tuning_block.q.clone(),
        r: tuning_block.r.clone(),
    };
    let init = EstimatorState::new(tuning_block.x0_hat.to_vec(), tuning_block.p0.clone(), 0.0);
    let dt = scenario_cfg.dt_days();
    let numerical = |e: adukf::ukf::FilterError| AppError::numerical(format!("filter failed: {e}"));
    match variant {
        Variant::Unconstrained {
            noise_mode,
            square_root,
        } => {
            let cfg = VariantConfig {
                noise_mode,
                square_root,
                tuning,
                redraw_before_measurement: false,
            };
            let run = run_filter(&cfg, &model, &noise, init, dt, steps).map_err(numerical)?;
            Ok(VariantRun {
                states: run.states,
                stats: None,
            })
        }
        Variant::Constrained {
            noise_mode,
            formulation,
        } => {
            let mut setup = ConstrainedSetup::new(
                formulation,
                noise_mode,
                LinearConstraints::nonnegative(adukf::ad_model::STATE_DIM),
            );
            setup.tuning = tuning;
            setup.qp_tol = solver_tol;
            setup.nlp_options = NlpOptions {
                tol: solver_tol,
                ..NlpOptions::default()
            };
            let run = run_constrained_filter(&setup, &model, &noise, init, dt, steps)
                .map_err(numerical)?;
            let stats = run.summary();
            Ok(VariantRun {
                states: run.run.states,
                stats: Some(stats),
            })
        }
    }
}

fn estimate_rows(times: &[f64], states: &[EstimatorState<f64>]) -> Vec<EstimateRow> {
    times
        .iter()
        .zip(states)
        .map(|(&t, s)| EstimateRow {
            t,
            mean: s.mean.clone(),
            p_diag: s.cov.diag(),
        })
        .collect()
}

pub fn estimate(
    config: &RunConfig,
    measurements_path: &Path,
    out_path: &Path,
    variant_name: Option<&str>,
    gamma: Option<f64>,
) -> Result<(), AppError> {
    let cfg = config.scenario_config(None);
    let file = io::read_measurements(measurements_path)?;
    // The series must sit on the configured sample grid.
    for (k, row) in file.rows.iter().enumerate() {
        let expected = cfg.sample_time(k);
        if (row.0 - expected).abs() > 1e-9 {
            return Err(AppError::usage(format!(
                "{}: row {k} time {} is off the dt grid (expected {expected})",
                measurements_path.display(),
                row.0
            )));
        }
    }
    let steps: Vec<MeasurementStep<f64>> = file
        .rows
        .windows(2)
        .map(|w| MeasurementStep {
            u: w[0].1,
            y: w[1].2.to_vec(),
        })
        .collect();

    let default_formulation = parse_formulation(&config.filter.formulation)?;
    let name = variant_name.unwrap_or(&config.filter.variant);
    let variant = parse_variant(name, default_formulation)?;
    let mut tuning = config.tuning();
    if let Some(g) = gamma {
        tuning = tuning.with_gamma(g);
    }
    let run = run_variant(variant, tuning, config.filter.solver_tol, &cfg, &steps)?;
    let times: Vec<f64> = file.rows.iter().map(|r| r.0).collect();
    io::write_estimates(out_path, &estimate_rows(&times, &run.states))?;
    println!(
        "wrote {} estimate rows to {}",
        run.states.len(),
        out_path.display()
    );
    Ok(())
}

/// Benchmark cell: a named variant with a scaling override.
struct Cell {
    name: String,
    variant: Variant,
    gamma: Option<f64>,
}

fn benchmark_cells(
    config: &RunConfig,
    variant_filter: Option<&str>,
    gamma_filter: Option<f64>,
) -> Result<Vec<Cell>, AppError> {
    let mut cells = Vec::new();
    let gammas: Vec<Option<f64>> = match gamma_filter {
        Some(g) => vec![Some(g)],
        None => config.gamma_overrides.clone(),
    };
    for base in ["ukf-add", "ukf-sr", "ukf-aug", "ukf-fully-aug"] {
        for &g in &gammas {
            cells.push(Cell {
                name: base.to_string(),
                variant: parse_variant(base, Formulation::Qp)?,
                gamma: g,
            });
        }
    }
    for base in ["cukf-add", "cukf-aug", "cukf-fully-aug"] {
        for form in Formulation::ALL {
            let name = format!("{base}-{}", form.as_str());
            cells.push(Cell {
                name: name.clone(),
                variant: parse_variant(&name, form)?,
                gamma: None,
            });
        }
    }
    if let Some(f) = variant_filter {
        // Validate the filter itself so typos are reported, then keep
        // matching cells (exact or prefix match on the cell name).
        parse_variant(f, Formulation::Qp)?;
        cells.retain(|c| c.name == f || c.name.starts_with(&format!("{f}-")));
    }
    Ok(cells)
}

pub fn benchmark(
    config: &RunConfig,
    out_dir: &Path,
    seed: Option<u64>,
    variant_filter: Option<&str>,
    gamma_filter: Option<f64>,
) -> Result<(), AppError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| AppError::usage(format!("{}: {e}", out_dir.display())))?;
    let seeds: Vec<u64> = match seed {
        Some(s) => vec![s],
        None => config.seeds.clone(),
    };
    if seeds.is_empty() {
        return Err(AppError::usage("benchmark needs a non-empty seed list"));
    }
    let cells = benchmark_cells(config, variant_filter, gamma_filter)?;
    if cells.is_empty() {
        return Err(AppError::usage(format!(
            "no benchmark cells match '{}'; valid names: {}",
            variant_filter.unwrap_or(""),
            VARIANT_NAMES.join(", ")
        )));
    }

    let base_cfg = config.scenario_config(None);
    let truth = scenario::simulate_truth(&base_cfg)
        .map_err(|e| AppError::numerical(format!("truth simulation failed: {e}")))?;
    let truth_means: Vec<Vec<f64>> = truth.iter().map(|s| s.x.to_vec()).collect();
    let times: Vec<f64> = truth.iter().map(|s| s.t).collect();

    let mut rows = Vec::new();
    for &s in &seeds {
        let cfg = config.scenario_config(Some(s));
        let series = scenario::synthesize_measurements(&truth, &cfg.sigma, s);
        let steps = scenario::filter_steps(&series);
        for cell in &cells {
            let mut tuning = config.tuning();
            tuning.gamma_override = None;
            if let Some(g) = cell.gamma {
                tuning = tuning.with_gamma(g);
            }
            let gamma_value = match cell.gamma {
                Some(g) => g,
                None => {
                    scaling(adukf::ad_model::STATE_DIM, &tuning)
                        .map_err(|e| AppError::numerical(format!("scaling failed: {e}")))?
                        .1
                }
            };
            let (result, wall) = timed_run(|| {
                run_variant(cell.variant, tuning, config.filter.solver_tol, &cfg, &steps)
            });
            match result {
                Ok(run) => {
                    let means: Vec<Vec<f64>> =
                        run.states.iter().map(|st| st.mean.clone()).collect();
                    let nx = group_nrmse(&means, &truth_means, &UNMEASURED_STATE_INDICES)
                        .map_err(|e| AppError::numerical(format!("metric failed: {e}")))?;
                    let ny = group_nrmse(&means, &truth_means, &MEASURED_STATE_INDICES)
                        .map_err(|e| AppError::numerical(format!("metric failed: {e}")))?;
                    let file = out_dir.join(format!(
                        "estimates_{}_g{gamma_value:.4}_s{s}.csv",
                        cell.name
                    ));
                    io::write_estimates(&file, &estimate_rows(&times, &run.states))?;
                    rows.push(SummaryRow {
                        seed: s,
                        variant: cell.name.clone(),
                        gamma: gamma_value,
                        nrmse_x: Some(nx),
                        nrmse_y: Some(ny),
                        wall_time_s: Some(wall),
                        median_cost_evals: run.stats.map(|st| st.median_cost_evaluations),
                        median_iters: run.stats.map(|st| st.median_iterations),
                        error: None,
                    });
                }
                Err(e) => {
                    rows.push(SummaryRow {
                        seed: s,
                        variant: cell.name.clone(),
                        gamma: gamma_value,
                        nrmse_x: None,
                        nrmse_y: None,
                        wall_time_s: None,
                        median_cost_evals: None,
                        median_iters: None,
                        error: Some(format!("{e}")),
                    });
                }
            }
        }
    }
    io::write_summary(&out_dir.join("summary.csv"), &rows)?;
    println!(
        "wrote {} summary rows ({} seeds x {} cells) to {}/summary.csv",
        rows.len(),
        seeds.len(),
        cells.len(),
        out_dir.display()
    );
    Ok(())
}
