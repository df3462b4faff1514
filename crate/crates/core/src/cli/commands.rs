//! Subcommand bodies. Each writes its outputs plus `provenance.json` into
//! the output directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{build_channel, watts_to_dbm, NodePlacement, NodePosition, Scenario, ScenarioConfig};
use crate::optimizer::{SolveResult, SolverOptions};

use super::config::RunConfig;
use super::experiment::{run_sweep, run_trial, thread_pool, Aggregate, ExperimentSpec, SweepParam, TrialOutcome};
use super::gradcheck::{gradient_check, GradCheckReport, GradCheckSpec};

/// The scenario as written to outputs, in both watts and dBm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub carrier_frequency_hz: f64,
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_targets: usize,
    pub noise_power_w: f64,
    pub noise_power_dbm: f64,
    pub max_power_w: f64,
    pub max_power_dbm: f64,
    pub beampattern_thresholds_w: Vec<f64>,
    pub beampattern_thresholds_dbm: Vec<f64>,
    pub rate_thresholds: Vec<f64>,
    pub user_region_center: (f64, f64),
    pub user_region_radius: f64,
    pub target_angles_deg: Vec<f64>,
    pub target_range_interval: (f64, f64),
    pub rng_seed: u64,
}

impl From<&ScenarioConfig> for ConfigEcho {
    fn from(c: &ScenarioConfig) -> Self {
        Self {
            carrier_frequency_hz: c.carrier_frequency,
            num_antennas: c.num_antennas,
            num_users: c.num_users,
            num_targets: c.num_targets,
            noise_power_w: c.noise_power,
            noise_power_dbm: watts_to_dbm(c.noise_power),
            max_power_w: c.max_power,
            max_power_dbm: watts_to_dbm(c.max_power),
            beampattern_thresholds_w: c.beampattern_thresholds.clone(),
            beampattern_thresholds_dbm: c.beampattern_thresholds.iter().map(|&w| watts_to_dbm(w)).collect(),
            rate_thresholds: c.rate_thresholds.clone(),
            user_region_center: c.user_region.center,
            user_region_radius: c.user_region.radius,
            target_angles_deg: c.target_angles.clone(),
            target_range_interval: c.target_range_interval,
            rng_seed: c.rng_seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub trials: usize,
    pub workers: usize,
    pub scenario: Option<ConfigEcho>,
    pub solver: Option<&'a SolverOptions>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub config: ConfigEcho,
    pub solver: SolverOptions,
    pub seed: u64,
    pub method: String,
    pub sum_rate: f64,
    pub rate_per_user: Vec<f64>,
    pub sinr_db: Vec<f64>,
    pub gain_dbm: Vec<f64>,
    pub gain_watts: Vec<f64>,
    pub power_watts: f64,
    pub feasible: bool,
    /// Largest scaled residual.
    pub max_violation: f64,
    pub residual_sensing_watts: Vec<f64>,
    pub residual_sinr: Vec<f64>,
    pub fp_rounds: usize,
    pub alm_rounds: usize,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub placement: Option<NodePlacement>,
    pub aggregate: Option<Aggregate>,
    pub wall_time_s: f64,
}

impl SolveSummary {
    pub fn new(cfg: &ScenarioConfig, opts: &SolverOptions, scenario: &Scenario, r: &SolveResult) -> Self {
        let p = &r.performance;
        Self {
            config: ConfigEcho::from(cfg),
            solver: opts.clone(),
            seed: cfg.rng_seed,
            method: opts.method.to_string(),
            sum_rate: p.sum_rate,
            rate_per_user: p.sinr.iter().map(|g| g.ln_1p() / std::f64::consts::LN_2).collect(),
            sinr_db: p.sinr.iter().map(|g| 10.0 * g.log10()).collect(),
            gain_dbm: p.beampattern_gain.iter().map(|&w| watts_to_dbm(w)).collect(),
            gain_watts: p.beampattern_gain.clone(),
            power_watts: p.power,
            feasible: r.feasible,
            max_violation: r.max_violation,
            residual_sensing_watts: r.residuals.sensing.clone(),
            residual_sinr: r.residuals.sinr.clone(),
            fp_rounds: r.fp_rounds,
            alm_rounds: r.alm_rounds,
            iterations: r.inner_iterations,
            final_grad_norm: r.final_grad_norm,
            placement: scenario.placement.clone(),
            aggregate: None,
            wall_time_s: r.wall_time_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeampatternRow {
    pub angle_deg: f64,
    pub gain_watts: f64,
    pub gain_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelRow {
    pub node_id: usize,
    pub node_kind: &'static str,
    pub antenna_index: usize,
    pub re: f64,
    pub im: f64,
}

/// Settings shared by every command after flags have been resolved.
#[derive(Debug, Clone)]
pub struct RunContext<'a> {
    pub command: &'a str,
    pub out: &'a Path,
    pub seed: u64,
    pub trials: usize,
    pub workers: usize,
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn prepare(ctx: &RunContext<'_>, scenario: Option<&ScenarioConfig>, solver: Option<&SolverOptions>) -> Result<()> {
    fs::create_dir_all(ctx.out)?;
    write_json(
        &ctx.out.join("provenance.json"),
        &Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: ctx.command,
            seed: ctx.seed,
            trials: ctx.trials,
            workers: ctx.workers,
            scenario: scenario.map(ConfigEcho::from),
            solver,
        },
    )
}

pub fn channel_rows(scenario: &Scenario) -> Vec<ChannelRow> {
    let ch = &scenario.channels;
    let kinds = ch
        .users()
        .iter()
        .enumerate()
        .map(|(i, f)| (i, "user", f))
        .chain(ch.targets().iter().enumerate().map(|(i, f)| (i, "target", f)));
    kinds
        .flat_map(|(id, kind, f)| {
            f.iter().enumerate().map(move |(m, z)| ChannelRow {
                node_id: id,
                node_kind: kind,
                antenna_index: m,
                re: z.re,
                im: z.im,
            })
        })
        .collect()
}

/// Gain `‖gᴴV‖²` toward probe channels at `probe_range` on an angle grid
/// from −90° to 90°.
pub fn beampattern_rows(cfg: &ScenarioConfig, r: &SolveResult, step_deg: f64, probe_range: f64) -> Result<Vec<BeampatternRow>> {
    if !(step_deg > 0.0 && step_deg <= 180.0) {
        return Err(Error::InvalidArgument(format!("angle step must lie in (0, 180], got {step_deg}")));
    }
    let count = (180.0 / step_deg + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| {
            let angle = (-90.0 + i as f64 * step_deg).min(90.0);
            let g = build_channel(
                &NodePosition {
                    range: probe_range,
                    angle_deg: angle,
                },
                cfg,
            )?;
            let gain = g.ad_mul(&r.beamformer).norm_squared();
            Ok(BeampatternRow {
                angle_deg: angle,
                gain_watts: gain,
                gain_dbm: watts_to_dbm(gain),
            })
        })
        .collect()
}

/// Result of `solve`: the summary of the first trial and whether every
/// trial was feasible.
pub struct SolveOutcome {
    pub summary: SolveSummary,
    pub all_feasible: bool,
}

fn solve_trials(
    run: &RunConfig,
    ctx: &RunContext<'_>,
    record_trace: bool,
) -> Result<Vec<(ScenarioConfig, Scenario, SolveResult)>> {
    if ctx.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let opts = SolverOptions {
        record_trace,
        ..run.solver.clone()
    };
    thread_pool(ctx.workers)?.install(|| {
        (0..ctx.trials)
            .into_par_iter()
            .map(|i| {
                let seed = ctx.seed.wrapping_add(i as u64);
                let (scenario, result) = run_trial(&run.scenario, &opts, seed)?;
                let cfg = ScenarioConfig {
                    rng_seed: seed,
                    ..run.scenario.clone()
                };
                Ok((cfg, scenario, result))
            })
            .collect()
    })
}

fn summary_of(run: &RunConfig, results: &[(ScenarioConfig, Scenario, SolveResult)]) -> SolveSummary {
    let (cfg, scenario, first) = &results[0];
    let mut summary = SolveSummary::new(cfg, &run.solver, scenario, first);
    if results.len() > 1 {
        let outcomes = trial_rows(results);
        summary.aggregate = Some(Aggregate::from_outcomes(&outcomes));
    }
    summary
}

fn trial_rows(results: &[(ScenarioConfig, Scenario, SolveResult)]) -> Vec<TrialOutcome> {
    results
        .iter()
        .enumerate()
        .map(|(i, (c, _, r))| TrialOutcome {
            trial: i,
            seed: c.rng_seed,
            sum_rate: r.performance.sum_rate,
            feasible: r.feasible,
            max_violation: r.max_violation,
            inner_iterations: r.inner_iterations,
            wall_time_s: r.wall_time_s,
        })
        .collect()
}

pub fn cmd_solve(run: &RunConfig, ctx: &RunContext<'_>, trace: bool, dump_channels: bool) -> Result<SolveOutcome> {
    prepare(ctx, Some(&run.scenario), Some(&run.solver))?;
    let results = solve_trials(run, ctx, trace)?;
    let summary = summary_of(run, &results);
    write_json(&ctx.out.join("summary.json"), &summary)?;
    if results.len() > 1 {
        write_csv(&ctx.out.join("trials.csv"), &trial_rows(&results))?;
    }
    if trace {
        write_csv(&ctx.out.join("trace.csv"), &results[0].2.trace)?;
    }
    if dump_channels {
        write_csv(&ctx.out.join("channels.csv"), &channel_rows(&results[0].1))?;
    }
    Ok(SolveOutcome {
        all_feasible: results.iter().all(|(_, _, r)| r.feasible),
        summary,
    })
}

pub fn cmd_beampattern(run: &RunConfig, ctx: &RunContext<'_>, step_deg: f64, probe_range: f64) -> Result<Vec<BeampatternRow>> {
    prepare(ctx, Some(&run.scenario), Some(&run.solver))?;
    let single = RunContext { trials: 1, ..ctx.clone() };
    let results = solve_trials(run, &single, false)?;
    let (cfg, _, result) = &results[0];
    let rows = beampattern_rows(cfg, result, step_deg, probe_range)?;
    write_csv(&ctx.out.join("beampattern.csv"), &rows)?;
    write_json(&ctx.out.join("summary.json"), &summary_of(run, &results))?;
    Ok(rows)
}

pub fn cmd_convergence(run: &RunConfig, ctx: &RunContext<'_>) -> Result<SolveSummary> {
    prepare(ctx, Some(&run.scenario), Some(&run.solver))?;
    let single = RunContext { trials: 1, ..ctx.clone() };
    let results = solve_trials(run, &single, true)?;
    write_csv(&ctx.out.join("trace.csv"), &results[0].2.trace)?;
    let summary = summary_of(run, &results);
    write_json(&ctx.out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn cmd_sweep(run: &RunConfig, ctx: &RunContext<'_>, param: SweepParam, values: &[String]) -> Result<Vec<super::experiment::SweepRow>> {
    let spec = ExperimentSpec {
        scenario: run.scenario.clone(),
        solver: run.solver.clone(),
        param,
        values: values.to_vec(),
        trials: ctx.trials,
        base_seed: ctx.seed,
    };
    spec.validate()?;
    prepare(ctx, Some(&run.scenario), Some(&run.solver))?;
    let rows = run_sweep(&spec, ctx.workers)?;
    write_csv(&ctx.out.join("sweep.csv"), &rows)?;
    Ok(rows)
}

pub fn cmd_gradcheck(spec: &GradCheckSpec, ctx: &RunContext<'_>) -> Result<GradCheckReport> {
    prepare(ctx, None, None)?;
    let report = gradient_check(spec)?;
    write_json(&ctx.out.join("gradcheck.json"), &report)?;
    Ok(report)
}
