use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use tangle_fluid::export::{write_ensemble, write_fluid, write_trajectory};
use tangle_fluid::stationary::SolveMethod;
use tangle_fluid::{
    ensemble, solve_pde, solve_stationary, DelayModel, EnsembleSummary, FluidGrid, StationaryWindow,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const COMPARE_HEADER: &str = "t,mc_mean,mc_std,fluid_L,predicted_L";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub stationary_window: StationaryWindow,
    /// Time average of the ensemble mean of L over the window.
    #[serde(rename = "time_avg_L")]
    pub time_avg_l: f64,
    /// Spread of the per-run window averages.
    #[serde(rename = "time_avg_L_std")]
    pub time_avg_l_std: f64,
    #[serde(rename = "final_mean_L")]
    pub final_mean_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub delay: DelayModel,
    pub lambda: f64,
    pub l: f64,
    #[serde(rename = "L")]
    pub tip_count: f64,
    pub residual: f64,
    pub iterations: usize,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineFailure {
    pub pipeline: String,
    pub exit_code: u8,
    pub message: String,
}

/// Monte Carlo versus theory for one parameter set. Relative errors are
/// `|x − mc| / mc` with the MC stationary mean as reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub stationary_window: StationaryWindow,
    #[serde(rename = "predicted_L")]
    pub predicted: Option<f64>,
    #[serde(rename = "fluid_L")]
    pub fluid: Option<f64>,
    #[serde(rename = "mc_mean_L")]
    pub mc_mean: Option<f64>,
    #[serde(rename = "mc_std_L")]
    pub mc_std: Option<f64>,
    pub rel_err_prediction: Option<f64>,
    pub rel_err_fluid: Option<f64>,
    /// False when any pipeline failed; the failures are listed and the
    /// corresponding fields are null.
    pub complete: bool,
    pub failures: Vec<PipelineFailure>,
}

fn create_output_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_file<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut out = BufWriter::new(file);
    body(&mut out).map_err(CliError::io(path))?;
    out.flush().map_err(CliError::io(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_file(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)
    })
}

struct EnsembleRun {
    summary: EnsembleSummary,
    window: StationaryWindow,
    mean: f64,
    std: f64,
}

fn run_ensemble(config: &ExperimentConfig) -> Result<EnsembleRun, CliError> {
    let window = config.stationary_window();
    let custom_window = config.window.is_some();
    info!(
        "running {} replicates: lambda = {}, delay {}, horizon {}",
        config.n_runs, config.lambda, config.delay, config.horizon
    );
    let summary = ensemble(
        &config.sim_config(),
        config.n_runs,
        config.write_runs || custom_window,
    )?;
    let mean = summary.stationary_mean(window).ok_or_else(|| {
        CliError::Runtime(format!(
            "no samples inside the window [{}, {}]",
            window.start, window.end
        ))
    })?;
    let std = if custom_window {
        let averages: Vec<f64> = summary
            .runs
            .iter()
            .flatten()
            .filter_map(|r| r.time_average(window.start, window.end))
            .collect();
        sample_std(&averages)
    } else {
        summary.stationary_std()
    };
    Ok(EnsembleRun {
        summary,
        window,
        mean,
        std,
    })
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn write_ensemble_outputs(config: &ExperimentConfig, run: &EnsembleRun) -> Result<(), CliError> {
    let dir = &config.output_dir;
    write_file(&dir.join("ensemble.csv"), |out| {
        write_ensemble(out, &run.summary)
    })?;
    if config.write_runs {
        for (k, traj) in run.summary.runs.iter().flatten().enumerate() {
            write_file(&dir.join(format!("run_{k}.csv")), |out| {
                write_trajectory(out, traj)
            })?;
        }
    }
    Ok(())
}

pub fn simulate(config: &ExperimentConfig) -> Result<SimulateSummary, CliError> {
    create_output_dir(&config.output_dir)?;
    let run = run_ensemble(config)?;
    write_ensemble_outputs(config, &run)?;
    let summary = SimulateSummary {
        config: config.clone(),
        seeds: run.summary.seeds.clone(),
        stationary_window: run.window,
        time_avg_l: run.mean,
        time_avg_l_std: run.std,
        final_mean_l: run.summary.final_mean(),
    };
    write_json(&config.output_dir.join("summary.json"), &summary)?;
    println!(
        "L over [{}, {}]: {:.3} (std across runs {:.3}, {} runs)",
        run.window.start, run.window.end, run.mean, run.std, config.n_runs
    );
    println!("wrote {}", config.output_dir.display());
    Ok(summary)
}

fn solve_fluid(config: &ExperimentConfig) -> Result<FluidGrid, CliError> {
    info!(
        "fluid solve: delay {}, step {}, horizon {}",
        config.delay, config.fluid_step, config.horizon
    );
    let grid = solve_pde(&config.delay, &config.fluid_options())?;
    Ok(grid)
}

pub fn fluid(config: &ExperimentConfig) -> Result<FluidGrid, CliError> {
    create_output_dir(&config.output_dir)?;
    let grid = solve_fluid(config)?;
    let path = config.output_dir.join("fluid.csv");
    write_file(&path, |out| write_fluid(out, &grid, config.fluid_stride))?;
    println!(
        "l({}) = {}, L = lambda * l = {}",
        grid.final_time(),
        grid.final_l(),
        config.lambda * grid.final_l()
    );
    println!("wrote {}", path.display());
    Ok(grid)
}

pub fn stationary(delay: &DelayModel, lambda: f64, tol: f64) -> Result<StationaryReport, CliError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(CliError::Config(format!(
            "lambda must be finite and positive, got {lambda}"
        )));
    }
    let result = solve_stationary(delay, tol)?;
    let method = match result.method {
        SolveMethod::ClosedForm => "closed_form",
        SolveMethod::Bisection => "bisection",
    };
    let report = StationaryReport {
        delay: *delay,
        lambda,
        l: result.l,
        tip_count: lambda * result.l,
        residual: result.residual,
        iterations: result.iterations,
        method: method.into(),
    };
    println!("delay = {delay}");
    println!("l = {}", report.l);
    println!("L = {}", report.tip_count);
    println!("residual = {:e}", report.residual);
    println!("iterations = {}", report.iterations);
    println!("method = {}", report.method);
    Ok(report)
}

fn failure(pipeline: &str, e: &CliError) -> PipelineFailure {
    warn!("{pipeline} failed: {e}");
    PipelineFailure {
        pipeline: pipeline.into(),
        exit_code: e.exit_code(),
        message: e.to_string(),
    }
}

/// Runs the stationary, fluid and Monte Carlo pipelines on one config.
/// Whatever succeeded is written out; on any failure the report is still
/// written, marked incomplete, and the first failure is returned.
pub fn compare(config: &ExperimentConfig) -> Result<ComparisonReport, CliError> {
    create_output_dir(&config.output_dir)?;
    let dir = &config.output_dir;
    let mut failures = Vec::new();
    let mut first_error = None;
    let mut record = |name: &str, e: CliError| {
        failures.push(failure(name, &e));
        first_error.get_or_insert(e);
    };

    let predicted = match solve_stationary(&config.delay, config.stationary_tol) {
        Ok(r) => Some(config.lambda * r.l),
        Err(e) => {
            record("stationary", e.into());
            None
        }
    };

    let grid = match solve_fluid(config) {
        Ok(g) => {
            let path = dir.join("fluid.csv");
            match write_file(&path, |out| write_fluid(out, &g, config.fluid_stride)) {
                Ok(()) => Some(g),
                Err(e) => {
                    record("fluid", e);
                    None
                }
            }
        }
        Err(e) => {
            record("fluid", e);
            None
        }
    };
    let fluid = grid.as_ref().map(|g| config.lambda * g.final_l());

    let mc = match run_ensemble(config).and_then(|r| write_ensemble_outputs(config, &r).map(|_| r))
    {
        Ok(r) => Some(r),
        Err(e) => {
            record("monte_carlo", e);
            None
        }
    };

    let mc_mean = mc.as_ref().map(|r| r.mean);
    let rel = |x: Option<f64>| Some((x? - mc_mean?).abs() / mc_mean?);
    let report = ComparisonReport {
        config: config.clone(),
        seeds: mc
            .as_ref()
            .map(|r| r.summary.seeds.clone())
            .unwrap_or_default(),
        stationary_window: config.stationary_window(),
        predicted,
        fluid,
        mc_mean,
        mc_std: mc.as_ref().map(|r| r.std),
        rel_err_prediction: rel(predicted),
        rel_err_fluid: rel(fluid),
        complete: failures.is_empty(),
        failures,
    };

    if let (Some(run), Some(grid), Some(pred)) = (&mc, &grid, predicted) {
        let path = dir.join("compare.csv");
        write_file(&path, |out| {
            writeln!(out, "{COMPARE_HEADER}")?;
            let s = &run.summary;
            for k in 0..s.times.len() {
                let t = s.times[k];
                let l = grid
                    .l_at(t.min(grid.final_time()))
                    .unwrap_or_else(|| grid.final_l());
                writeln!(
                    out,
                    "{t},{},{},{},{pred}",
                    s.mean[k],
                    s.std[k],
                    config.lambda * l
                )?;
            }
            Ok(())
        })?;
    }
    write_json(&dir.join("report.json"), &report)?;

    let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    let pct = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
    println!("predicted L = {}", show(report.predicted));
    println!("fluid L     = {}", show(report.fluid));
    println!(
        "MC mean L   = {} (std {})",
        show(report.mc_mean),
        show(report.mc_std)
    );
    println!(
        "relative error vs MC: prediction {}, fluid {}",
        pct(report.rel_err_prediction),
        pct(report.rel_err_fluid)
    );
    println!("wrote {}", dir.display());

    match first_error {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
