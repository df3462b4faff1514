//! The beamforming solver.
//!
//! Three nested loops:
//!
//! 1. fractional programming: `μ ← γ̂(Ṽ)` turns the sum of logarithms into a
//!    weighted sum of signal-to-total ratios;
//! 2. augmented Lagrangian: minimize `L_ρ` for fixed multipliers, then move
//!    `λ, κ` along the residuals (clipped) and grow `ρ` if the violation
//!    stalls;
//! 3. Riemannian descent on the sphere: stochastic gradient (the default),
//!    steepest descent or conjugate gradient, each step followed by a
//!    normalization retraction.

mod inner;
mod lagrangian;
mod solve;

pub use inner::{inner_minimize, InnerOutcome, TraceContext};
pub use lagrangian::{
    fp_rate_objective, update_mu, ConstraintScaling, Lagrangian, LagrangianValue, Scaling, TermBatch,
};
pub use solve::{matched_filter_start, solve, SolveResult, TraceRow};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::Projection;
use crate::metrics::ConstraintResiduals;

/// Auxiliary SINR variables of the FP transform.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpState {
    pub mu: Vec<f64>,
}

impl FpState {
    pub fn zeros(num_users: usize) -> Self {
        Self { mu: vec![0.0; num_users] }
    }

    /// `μ̂_k = 1 + μ_k`.
    pub fn weight(&self, k: usize) -> f64 {
        1.0 + self.mu[k]
    }
}

/// Lagrange multipliers and penalty parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierState {
    /// Sensing multipliers, one per target.
    pub lambda: Vec<f64>,
    /// SINR multipliers, one per user.
    pub kappa: Vec<f64>,
    pub rho: f64,
    pub bounds: (f64, f64),
    pub growth: f64,
    pub rho_max: f64,
    /// Required violation shrink factor per round before `ρ` grows.
    pub shrink: f64,
}

impl MultiplierState {
    pub fn new(num_targets: usize, num_users: usize, opts: &SolverOptions) -> Self {
        Self {
            lambda: vec![opts.multiplier_bounds.0; num_targets],
            kappa: vec![opts.multiplier_bounds.0; num_users],
            rho: opts.rho0,
            bounds: opts.multiplier_bounds,
            growth: opts.penalty_growth,
            rho_max: opts.rho_max,
            shrink: opts.violation_shrink,
        }
    }

    /// Zero multipliers, `ρ = 1`, bounds `[0, 100]`.
    pub fn initial(num_targets: usize, num_users: usize) -> Self {
        Self::new(num_targets, num_users, &SolverOptions::default())
    }
}

/// `ϑ ← clip(ϑ + ρ ψ)` for every multiplier.
pub fn update_multipliers(state: &MultiplierState, residuals: &ConstraintResiduals) -> MultiplierState {
    let (lo, hi) = state.bounds;
    let step = |m: f64, r: f64| (m + state.rho * r).clamp(lo, hi);
    MultiplierState {
        lambda: state.lambda.iter().zip(&residuals.sensing).map(|(&m, &r)| step(m, r)).collect(),
        kappa: state.kappa.iter().zip(&residuals.sinr).map(|(&m, &r)| step(m, r)).collect(),
        ..state.clone()
    }
}

/// Grows `ρ` by `growth` (capped at `rho_max`) unless the violation shrank
/// to at most `shrink × previous`.
pub fn update_penalty(state: &MultiplierState, violation: f64, previous: f64) -> MultiplierState {
    let rho = if violation <= state.shrink * previous {
        state.rho
    } else {
        (state.rho * state.growth).min(state.rho_max)
    };
    MultiplierState { rho, ..state.clone() }
}

/// `α_t = α₀ / (1 + α₀ · decay · t)`.
pub fn step_size(t: usize, step0: f64, decay: f64) -> f64 {
    step0 / (1.0 + step0 * decay * t as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Mini-batch Riemannian SGD on the decaying schedule.
    #[default]
    StochasticGradient,
    /// Full-gradient descent with Armijo backtracking.
    SteepestDescent,
    /// Fletcher–Reeves conjugate gradient with Armijo backtracking.
    ConjugateGradient,
}

impl Method {
    pub fn short_name(self) -> &'static str {
        match self {
            Method::StochasticGradient => "sgd",
            Method::SteepestDescent => "sd",
            Method::ConjugateGradient => "cg",
        }
    }

    pub fn is_deterministic(self) -> bool {
        !matches!(self, Method::StochasticGradient)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" | "stochastic-gradient" | "stochastic_gradient" => Ok(Method::StochasticGradient),
            "sd" | "steepest-descent" | "steepest_descent" => Ok(Method::SteepestDescent),
            "cg" | "conjugate-gradient" | "conjugate_gradient" => Ok(Method::ConjugateGradient),
            other => Err(Error::InvalidOptions(format!("unknown method '{other}'"))),
        }
    }
}

/// How the FP weights `μ̂_k` enter `L_ρ`.
///
/// Raw weights grow like the SINRs, so at high SNR the fraction terms dwarf
/// the clipped multipliers and the interference directions become very stiff.
/// Normalizing them to sum to one fixes that for several users, but with a
/// single user it leaves only the nearly flat `S/D` and stalls the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpWeighting {
    Raw,
    Normalized,
    /// Normalized with two or more users, raw otherwise.
    #[default]
    Auto,
}

impl FpWeighting {
    pub fn normalizes(self, num_users: usize) -> bool {
        match self {
            FpWeighting::Raw => false,
            FpWeighting::Normalized => true,
            FpWeighting::Auto => num_users >= 2,
        }
    }
}

impl FromStr for FpWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(FpWeighting::Raw),
            "normalized" => Ok(FpWeighting::Normalized),
            "auto" => Ok(FpWeighting::Auto),
            other => Err(Error::InvalidOptions(format!("unknown fp weighting '{other}'"))),
        }
    }
}

/// Starting point of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Random,
    /// `w_k ∝ h_k`, `s_n ∝ g_n`, equal power split at full budget.
    MatchedFilter,
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Init::Random),
            "matched" | "matched_filter" | "matched-filter" => Ok(Init::MatchedFilter),
            other => Err(Error::InvalidOptions(format!("unknown init '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: Method,
    /// `α₀`.
    pub step0: f64,
    pub decay: f64,
    /// Fraction of the `2K + N` gradient terms sampled per SGD step.
    pub batch_fraction: f64,
    /// Cap on `‖α_t ξ‖` for stochastic steps.
    pub max_displacement: f64,
    /// Floor of the SGD step scale, which halves whenever `L_ρ` rises
    /// between two full-gradient checks.
    pub min_step_scale: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub max_alm_rounds: usize,
    /// `ε₀` of the inner tolerance schedule `ε_t = max(ε₀ 0.5^t, ε_final)`.
    pub grad_tol_initial: f64,
    pub grad_tol_final: f64,
    /// Largest scaled residual accepted as feasible.
    pub feasibility_tol: f64,
    /// Outer loop stops when the sum rate moves less than this.
    pub rate_tol: f64,
    /// SGD iterations between full-gradient checks.
    pub check_interval: usize,
    pub armijo_slope: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    pub init: Init,
    pub projection: Projection,
    pub scaling: Scaling,
    pub fp_weighting: FpWeighting,
    pub rho0: f64,
    pub multiplier_bounds: (f64, f64),
    pub penalty_growth: f64,
    pub rho_max: f64,
    pub violation_shrink: f64,
    /// ALM rounds between multiplier updates.
    pub multiplier_cadence: usize,
    pub record_trace: bool,
    pub rng_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::StochasticGradient,
            step0: 1.0,
            decay: 0.01,
            batch_fraction: 0.5,
            max_displacement: 0.3,
            min_step_scale: 1e-6,
            max_inner: 300,
            max_outer: 30,
            max_alm_rounds: 10,
            grad_tol_initial: 1e-2,
            grad_tol_final: 1e-6,
            feasibility_tol: 1e-3,
            rate_tol: 1e-4,
            check_interval: 10,
            armijo_slope: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 40,
            init: Init::Random,
            projection: Projection::Sphere,
            scaling: Scaling::Relative,
            fp_weighting: FpWeighting::Auto,
            rho0: 1.0,
            multiplier_bounds: (0.0, 100.0),
            penalty_growth: 2.0,
            rho_max: 1e6,
            violation_shrink: 0.9,
            multiplier_cadence: 1,
            record_trace: false,
            rng_seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// `ε_t` for ALM round `t`.
    pub fn grad_tolerance(&self, t: usize) -> f64 {
        (self.grad_tol_initial * 0.5f64.powi(t.min(1000) as i32)).max(self.grad_tol_final)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidOptions(msg.to_string()));
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return bad("step0 must be positive");
        }
        if !(self.decay >= 0.0) {
            return bad("decay must be nonnegative");
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return bad("batch_fraction must lie in (0, 1]");
        }
        if !(self.max_displacement > 0.0) {
            return bad("max_displacement must be positive");
        }
        if !(self.min_step_scale > 0.0 && self.min_step_scale <= 1.0) {
            return bad("min_step_scale must lie in (0, 1]");
        }
        if self.max_outer == 0 || self.max_alm_rounds == 0 {
            return bad("max_outer and max_alm_rounds must be positive");
        }
        if !(self.grad_tol_initial > 0.0 && self.grad_tol_final > 0.0) {
            return bad("gradient tolerances must be positive");
        }
        if self.grad_tol_final > self.grad_tol_initial {
            return bad("grad_tol_final must not exceed grad_tol_initial");
        }
        if !(self.feasibility_tol > 0.0 && self.rate_tol > 0.0) {
            return bad("feasibility_tol and rate_tol must be positive");
        }
        if self.check_interval == 0 || self.multiplier_cadence == 0 {
            return bad("check_interval and multiplier_cadence must be positive");
        }
        if !(self.armijo_slope > 0.0 && self.armijo_slope < 1.0) {
            return bad("armijo_slope must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.rho0 > 0.0 && self.rho_max >= self.rho0 && self.penalty_growth >= 1.0) {
            return bad("need rho0 > 0, rho_max >= rho0, penalty_growth >= 1");
        }
        let (lo, hi) = self.multiplier_bounds;
        if !(lo >= 0.0 && hi >= lo) {
            return bad("multiplier bounds must satisfy 0 <= min <= max");
        }
        if !(self.violation_shrink > 0.0 && self.violation_shrink <= 1.0) {
            return bad("violation_shrink must lie in (0, 1]");
        }
        Ok(())
    }
}
