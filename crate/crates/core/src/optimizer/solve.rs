use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::manifold::{extract, lift, random_point, LiftedBeamformer};
use crate::metrics::{self, ConstraintResiduals, Performance};
use crate::model::Scenario;
use crate::CMat;

use super::inner::{inner_minimize, TraceContext};
use super::lagrangian::{update_mu, Lagrangian};
use super::{update_multipliers, update_penalty, Init, MultiplierState, SolverOptions};

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub fp_round: usize,
    pub alm_round: usize,
    pub inner_iter: usize,
    pub objective: f64,
    pub lagrangian: f64,
    pub grad_norm: f64,
    pub max_violation: f64,
    pub step: f64,
    pub rho: f64,
    pub method: String,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub point: LiftedBeamformer,
    pub beamformer: CMat,
    pub performance: Performance,
    /// Raw residuals (watts, linear SINR).
    pub residuals: ConstraintResiduals,
    /// Largest scaled residual, the quantity compared with `feasibility_tol`.
    pub max_violation: f64,
    pub feasible: bool,
    pub fp_rounds: usize,
    pub alm_rounds: usize,
    pub inner_iterations: usize,
    /// Full Riemannian gradient norm of `L_ρ` at the last iterate.
    pub final_grad_norm: f64,
    pub wall_time_s: f64,
    pub trace: Vec<TraceRow>,
}

struct Candidate {
    point: LiftedBeamformer,
    sum_rate: f64,
    violation: f64,
}

impl Candidate {
    fn better_than(&self, other: &Candidate, tol: f64) -> bool {
        match (self.violation <= tol, other.violation <= tol) {
            (true, true) => self.sum_rate > other.sum_rate,
            (true, false) => true,
            (false, true) => false,
            (false, false) => self.violation < other.violation,
        }
    }
}

/// Equal-power matched-filter beams at full budget, lifted.
pub fn matched_filter_start(scenario: &Scenario) -> Result<LiftedBeamformer> {
    let ch = &scenario.channels;
    let streams = scenario.num_streams();
    let amp = (scenario.max_power() / streams as f64).sqrt();
    let columns: Vec<_> = ch
        .users()
        .iter()
        .chain(ch.targets())
        .map(|f| f * Complex64::new(amp / f.norm(), 0.0))
        .collect();
    lift(&CMat::from_columns(&columns), scenario.max_power())
}

/// Runs the full FP / ALM / Riemannian-descent scheme.
///
/// Returns the best iterate seen at the end of an ALM round: the feasible one
/// with the highest sum rate, or the least-violating one when none was
/// feasible.
pub fn solve(scenario: &Scenario, opts: &SolverOptions) -> Result<SolveResult> {
    opts.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let lag = Lagrangian::new(scenario, opts.scaling).with_fp_normalization(opts.fp_weighting.normalizes(scenario.num_users()));
    let p_max = scenario.max_power();

    let mut x = match opts.init {
        Init::Random => random_point(scenario.num_antennas() + 1, scenario.num_streams(), &mut rng),
        Init::MatchedFilter => matched_filter_start(scenario)?,
    };
    let mut mult = MultiplierState::new(scenario.num_targets(), scenario.num_users(), opts);
    let mut trace_rows = Vec::new();
    let mut trace = TraceContext {
        fp_round: 0,
        alm_round: 0,
        next_iter: 0,
        rows: opts.record_trace.then_some(&mut trace_rows),
    };

    let mut best: Option<Candidate> = None;
    let mut prev_rate: Option<f64> = None;
    let mut prev_violation = f64::INFINITY;
    let mut alm_total = 0;
    let mut inner_total = 0;
    let mut fp_rounds = 0;
    let mut final_grad_norm = f64::NAN;

    for fp_round in 0..opts.max_outer {
        fp_rounds += 1;
        let fp = update_mu(&x, scenario);
        for alm_round in 0..opts.max_alm_rounds {
            trace.fp_round = fp_round;
            trace.alm_round = alm_round;
            let tol = opts.grad_tolerance(alm_total);
            let outcome = inner_minimize(&lag, x, &fp, &mult, opts, tol, &mut rng, &mut trace)?;
            alm_total += 1;
            inner_total += outcome.iterations;
            x = outcome.point;
            final_grad_norm = outcome.grad_norm;

            let scaled = lag.scaled_residuals(&x);
            let violation = scaled.max_violation();
            let candidate = Candidate {
                sum_rate: metrics::sum_rate(&extract(&x, p_max), scenario.channels.users(), scenario.noise_power)?,
                point: x.clone(),
                violation,
            };
            if best.as_ref().is_none_or(|b| candidate.better_than(b, opts.feasibility_tol)) {
                best = Some(candidate);
            }

            if outcome.grad_norm <= tol && violation <= opts.feasibility_tol {
                break;
            }
            if (alm_round + 1) % opts.multiplier_cadence == 0 {
                mult = update_multipliers(&mult, &scaled);
                mult = update_penalty(&mult, violation, prev_violation);
                prev_violation = violation;
            }
        }
        let rate = metrics::sum_rate(&extract(&x, p_max), scenario.channels.users(), scenario.noise_power)?;
        let settled = opts.grad_tolerance(alm_total) <= opts.grad_tol_final;
        if settled && prev_rate.is_some_and(|p| (rate - p).abs() < opts.rate_tol) {
            break;
        }
        prev_rate = Some(rate);
    }

    let best = best.expect("at least one ALM round runs");
    let beamformer = extract(&best.point, p_max);
    let performance = metrics::evaluate(&beamformer, scenario)?;
    let residuals = metrics::residuals(&best.point, scenario)?;
    Ok(SolveResult {
        feasible: best.violation <= opts.feasibility_tol,
        max_violation: best.violation,
        point: best.point,
        beamformer,
        performance,
        residuals,
        fp_rounds,
        alm_rounds: alm_total,
        inner_iterations: inner_total,
        final_grad_norm,
        wall_time_s: started.elapsed().as_secs_f64(),
        trace: trace_rows,
    })
}
