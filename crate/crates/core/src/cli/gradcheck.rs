//! Analytic gradient of `L_ρ` against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::manifold::{random_point, LiftedBeamformer};
use crate::model::{Scenario, ScenarioConfig};
use crate::optimizer::{FpState, Lagrangian, MultiplierState, Scaling};
use crate::oracle::{finite_difference_gradient, relative_error, FdSpec};

pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

/// Hinge arguments closer to zero than this are redrawn: the penalty has a
/// kink there and central differences straddling it are meaningless.
const HINGE_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckSpec {
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_targets: usize,
    pub trials: usize,
    pub seed: u64,
    pub normalize_fp: bool,
    /// Scales user 0's FP gradient term; `None` checks the real gradient.
    pub corrupt: Option<f64>,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        Self {
            num_antennas: 17,
            num_users: 2,
            num_targets: 2,
            trials: 20,
            seed: 0,
            normalize_fp: false,
            corrupt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub trials: usize,
    pub pass: bool,
}

/// One randomized evaluation state.
#[derive(Debug, Clone)]
pub struct GradState {
    pub scenario: Scenario,
    pub point: LiftedBeamformer,
    pub fp: FpState,
    pub mult: MultiplierState,
}

/// Near-field scenario with `num_targets` evenly spread target angles.
pub fn check_scenario(num_antennas: usize, num_users: usize, num_targets: usize, seed: u64) -> Result<Scenario> {
    let base = ScenarioConfig::desk();
    let angles = (0..num_targets)
        .map(|n| -60.0 + 120.0 * (n as f64 + 0.5) / num_targets.max(1) as f64)
        .collect();
    let cfg = ScenarioConfig {
        num_antennas,
        num_users,
        num_targets,
        beampattern_thresholds: vec![0.0; num_targets],
        rate_thresholds: vec![0.0; num_users],
        target_angles: angles,
        rng_seed: seed,
        ..base
    };
    Scenario::from_config(&cfg)
}

/// Draws a point, FP weights, multipliers and floors such that every hinge
/// is clearly on or clearly off. Floors are set around the values at the
/// point, so roughly half the penalties are active.
pub fn random_state<R: Rng + ?Sized>(base: &Scenario, rng: &mut R) -> GradState {
    let (k, n) = (base.num_users(), base.num_targets());
    loop {
        let point = random_point(base.num_antennas() + 1, base.num_streams(), rng);
        let probe = Lagrangian::new(base, Scaling::Unit);
        let gains: Vec<f64> = probe
            .scaled_residuals(&point)
            .sensing
            .iter()
            .map(|r| -r)
            .collect();
        let sinrs = probe.sinrs(&point);
        let mut scenario = base.clone();
        scenario.beampattern_thresholds = gains.iter().map(|g| g * rng.random_range(0.5..1.5)).collect();
        scenario.sinr_thresholds = sinrs.iter().map(|g| g * rng.random_range(0.5..1.5)).collect();

        let fp = FpState {
            mu: (0..k).map(|_| rng.random_range(0.0..5.0)).collect(),
        };
        let mut mult = MultiplierState::initial(n, k);
        mult.rho = rng.random_range(0.5..5.0);
        let draw = |rng: &mut R| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..3.0) };
        mult.lambda = (0..n).map(|_| draw(rng)).collect();
        mult.kappa = (0..k).map(|_| draw(rng)).collect();

        let psi = Lagrangian::new(&scenario, Scaling::Relative).scaled_residuals(&point);
        let clear = psi
            .sensing
            .iter()
            .zip(&mult.lambda)
            .chain(psi.sinr.iter().zip(&mult.kappa))
            .all(|(r, m)| (m / mult.rho + r).abs() > HINGE_MARGIN);
        if clear {
            return GradState {
                scenario,
                point,
                fp,
                mult,
            };
        }
    }
}

/// Relative error between the analytic and finite-difference gradients of
/// `L_ρ` at one state.
pub fn state_error(state: &GradState, normalize_fp: bool, corrupt: Option<f64>) -> Result<f64> {
    let mut lag = Lagrangian::new(&state.scenario, Scaling::Relative).with_fp_normalization(normalize_fp);
    if let Some(f) = corrupt {
        lag = lag.with_corrupted_gradient(f);
    }
    let analytic = lag.full_gradient(&state.point, &state.fp, &state.mult);
    let numeric = finite_difference_gradient(
        |y| lag.lagrangian(&LiftedBeamformer::ambient(y.clone()), &state.fp, &state.mult),
        state.point.matrix(),
        FdSpec::default(),
    )?;
    Ok(relative_error(&analytic, &numeric))
}

pub fn gradient_check(spec: &GradCheckSpec) -> Result<GradCheckReport> {
    if spec.num_antennas < 3 || spec.num_antennas % 2 == 0 {
        return Err(invalid("gradcheck needs an odd antenna count of at least 3"));
    }
    if spec.num_users == 0 || spec.trials == 0 {
        return Err(invalid("gradcheck needs at least one user and one trial"));
    }
    let base = check_scenario(spec.num_antennas, spec.num_users, spec.num_targets, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut errors = Vec::with_capacity(spec.trials);
    for _ in 0..spec.trials {
        let state = random_state(&base, &mut rng);
        errors.push(state_error(&state, spec.normalize_fp, spec.corrupt)?);
    }
    let max_rel_err = errors.iter().copied().fold(0.0, f64::max);
    let mean_rel_err = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(GradCheckReport {
        max_rel_err,
        mean_rel_err,
        trials: spec.trials,
        pass: max_rel_err <= GRADCHECK_TOLERANCE,
    })
}
