//! Monte Carlo trials and one-parameter sweeps.
//!
//! Trial `i` of a run with base seed `s` draws its geometry and its solver
//! stream from seed `s + i`, so every sweep point sees the same placements.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{dbm_to_watts, Scenario, ScenarioConfig};
use crate::optimizer::{solve, Method, SolveResult, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub sum_rate: f64,
    pub feasible: bool,
    pub max_violation: f64,
    pub inner_iterations: usize,
    pub wall_time_s: f64,
}

/// Builds the scenario for `seed` and solves it with the same seed.
pub fn run_trial(cfg: &ScenarioConfig, opts: &SolverOptions, seed: u64) -> Result<(Scenario, SolveResult)> {
    let mut cfg = cfg.clone();
    cfg.rng_seed = seed;
    let scenario = Scenario::from_config(&cfg)?;
    let opts = SolverOptions {
        rng_seed: seed,
        ..opts.clone()
    };
    let result = solve(&scenario, &opts)?;
    Ok((scenario, result))
}

fn outcome(trial: usize, seed: u64, r: &SolveResult) -> TrialOutcome {
    TrialOutcome {
        trial,
        seed,
        sum_rate: r.performance.sum_rate,
        feasible: r.feasible,
        max_violation: r.max_violation,
        inner_iterations: r.inner_iterations,
        wall_time_s: r.wall_time_s,
    }
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// Runs `trials` independent solves on `workers` threads, in trial order.
pub fn run_trials(
    cfg: &ScenarioConfig,
    opts: &SolverOptions,
    base_seed: u64,
    trials: usize,
    workers: usize,
) -> Result<Vec<TrialOutcome>> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    thread_pool(workers)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let seed = base_seed.wrapping_add(i as u64);
                let (_, r) = run_trial(cfg, opts, seed)?;
                Ok(outcome(i, seed, &r))
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub trials: usize,
    pub mean_sum_rate: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std_sum_rate: f64,
    pub feasibility_rate: f64,
    pub mean_wall_time_s: f64,
}

impl Aggregate {
    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Self {
        let n = outcomes.len();
        if n == 0 {
            return Self {
                trials: 0,
                mean_sum_rate: f64::NAN,
                std_sum_rate: f64::NAN,
                feasibility_rate: f64::NAN,
                mean_wall_time_s: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = outcomes.iter().map(|o| o.sum_rate).sum::<f64>() / nf;
        let std = if n > 1 {
            (outcomes.iter().map(|o| (o.sum_rate - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            trials: n,
            mean_sum_rate: mean,
            std_sum_rate: std,
            feasibility_rate: outcomes.iter().filter(|o| o.feasible).count() as f64 / nf,
            mean_wall_time_s: outcomes.iter().map(|o| o.wall_time_s).sum::<f64>() / nf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Number of antennas `M`.
    Antennas,
    /// Common beampattern gain floor, dBm.
    OmegaDbm,
    Method,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Antennas => "num_antennas",
            SweepParam::OmegaDbm => "omega_dbm",
            SweepParam::Method => "method",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "antennas" | "num_antennas" => Ok(SweepParam::Antennas),
            "omega" | "omega_dbm" | "gain_floor_dbm" => Ok(SweepParam::OmegaDbm),
            "method" => Ok(SweepParam::Method),
            other => Err(Error::Config(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub solver: SolverOptions,
    pub param: SweepParam,
    pub values: Vec<String>,
    pub trials: usize,
    pub base_seed: u64,
}

impl ExperimentSpec {
    /// Scenario and options at one sweep value.
    pub fn point(&self, value: &str) -> Result<(ScenarioConfig, SolverOptions)> {
        let bad = |what: &str| Error::Config(format!("sweep value '{value}' is not a valid {what}"));
        let mut cfg = self.scenario.clone();
        let mut opts = self.solver.clone();
        match self.param {
            SweepParam::Antennas => cfg.num_antennas = value.trim().parse().map_err(|_| bad("antenna count"))?,
            SweepParam::OmegaDbm => {
                let dbm: f64 = value.trim().parse().map_err(|_| bad("gain floor"))?;
                cfg.beampattern_thresholds = vec![dbm_to_watts(dbm); cfg.num_targets];
            }
            SweepParam::Method => opts.method = value.parse::<Method>().map_err(|_| bad("method"))?,
        }
        cfg.validate().map_err(|e| Error::Config(format!("sweep value '{value}': {e}")))?;
        Ok((cfg, opts))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        for v in &self.values {
            self.point(v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_value: String,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
    pub feasibility_rate: f64,
    pub mean_wall_time_s: f64,
}

/// Every (value, trial) job goes to one pool; rows come back in value order.
pub fn run_sweep(spec: &ExperimentSpec, workers: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec
        .values
        .iter()
        .map(|v| spec.point(v))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = thread_pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(p, t)| {
                let (cfg, opts) = &points[p];
                let seed = spec.base_seed.wrapping_add(t as u64);
                let (_, r) = run_trial(cfg, opts, seed)?;
                Ok(outcome(t, seed, &r))
            })
            .collect::<Result<_>>()
    })?;
    Ok(spec
        .values
        .iter()
        .zip(outcomes.chunks(spec.trials))
        .map(|(value, chunk)| {
            let agg = Aggregate::from_outcomes(chunk);
            SweepRow {
                sweep_value: value.trim().to_string(),
                mean_sum_rate: agg.mean_sum_rate,
                std_sum_rate: agg.std_sum_rate,
                feasibility_rate: agg.feasibility_rate,
                mean_wall_time_s: agg.mean_wall_time_s,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(rate: f64, feasible: bool) -> TrialOutcome {
        TrialOutcome {
            trial: 0,
            seed: 0,
            sum_rate: rate,
            feasible,
            max_violation: 0.0,
            inner_iterations: 1,
            wall_time_s: 2.0,
        }
    }

    #[test]
    fn single_trial_has_zero_std() {
        let agg = Aggregate::from_outcomes(&[outcome(3.0, true)]);
        assert_eq!(agg.std_sum_rate, 0.0);
        assert_eq!(agg.mean_sum_rate, 3.0);
        assert_eq!(agg.feasibility_rate, 1.0);
    }

    #[test]
    fn sample_std_and_rates() {
        let agg = Aggregate::from_outcomes(&[outcome(1.0, true), outcome(3.0, false)]);
        assert_eq!(agg.mean_sum_rate, 2.0);
        assert!((agg.std_sum_rate - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(agg.feasibility_rate, 0.5);
        assert_eq!(agg.mean_wall_time_s, 2.0);
    }

    #[test]
    fn sweep_points_modify_the_right_field() {
        let spec = ExperimentSpec {
            scenario: ScenarioConfig::desk(),
            solver: SolverOptions::default(),
            param: SweepParam::Antennas,
            values: vec!["65".into()],
            trials: 1,
            base_seed: 0,
        };
        assert_eq!(spec.point("65").unwrap().0.num_antennas, 65);
        assert!(spec.point("64").is_err());
        let spec = ExperimentSpec {
            param: SweepParam::OmegaDbm,
            ..spec
        };
        let (cfg, _) = spec.point("0").unwrap();
        assert!(cfg.beampattern_thresholds.iter().all(|&w| (w - 1e-3).abs() < 1e-15));
        let spec = ExperimentSpec {
            param: SweepParam::Method,
            ..spec
        };
        assert_eq!(spec.point("cg").unwrap().1.method, Method::ConjugateGradient);
        assert!(spec.point("newton").is_err());
    }

    #[test]
    fn param_names_round_trip() {
        for p in [SweepParam::Antennas, SweepParam::OmegaDbm, SweepParam::Method] {
            assert_eq!(p.to_string().parse::<SweepParam>().unwrap(), p);
        }
    }
}
