//! Independent checks for the solver: central finite differences, loop-based
//! metric recomputation and a random-search baseline for tiny instances.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{mismatch, Error, Result};
use crate::manifold::{extract, random_point};
use crate::metrics;
use crate::model::Scenario;
use crate::{CMat, CVec};

/// Central-difference settings. The step for a coordinate `x` is
/// `max(relative_step · |x|, floor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSpec {
    pub relative_step: f64,
    pub floor: f64,
}

impl Default for FdSpec {
    fn default() -> Self {
        Self {
            relative_step: 1e-6,
            floor: 1e-8,
        }
    }
}

/// Finite-difference gradient of a real function of a complex matrix, in the
/// convention `f(X + Δ) ≈ f(X) + Re Tr(Gᴴ Δ)`: real and imaginary parts are
/// perturbed separately and recombined as `∂f/∂Re + j ∂f/∂Im`.
pub fn finite_difference_gradient<F>(f: F, x: &CMat, spec: FdSpec) -> Result<CMat>
where
    F: Fn(&CMat) -> f64,
{
    if !(spec.relative_step > 0.0 && spec.floor > 0.0) {
        return Err(Error::InvalidArgument("finite-difference steps must be positive".into()));
    }
    let mut probe = x.clone();
    let mut grad = CMat::zeros(x.nrows(), x.ncols());
    for idx in 0..x.len() {
        let orig = x[idx];
        let mut partial = |component: Complex64, magnitude: f64| -> Result<f64> {
            let h = (spec.relative_step * magnitude.abs()).max(spec.floor);
            probe[idx] = orig + component * h;
            let plus = f(&probe);
            probe[idx] = orig - component * h;
            let minus = f(&probe);
            probe[idx] = orig;
            if !(plus.is_finite() && minus.is_finite()) {
                return Err(Error::NonFiniteEvaluation(idx));
            }
            Ok((plus - minus) / (2.0 * h))
        };
        let d_re = partial(Complex64::new(1.0, 0.0), orig.re)?;
        let d_im = partial(Complex64::new(0.0, 1.0), orig.im)?;
        grad[idx] = Complex64::new(d_re, d_im);
    }
    Ok(grad)
}

/// `‖a − b‖_F / max(‖a‖_F, ‖b‖_F)`; zero when both vanish.
pub fn relative_error(a: &CMat, b: &CMat) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// SINRs, beampattern gains and power from explicit loops.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceMetrics {
    pub sinr: Vec<f64>,
    pub beampattern_gain: Vec<f64>,
    pub power: f64,
}

fn inner_product(f: &CVec, v: &CMat, col: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..f.len() {
        acc += f[m].conj() * v[(m, col)];
    }
    acc
}

fn abs2(z: Complex64) -> f64 {
    z.re * z.re + z.im * z.im
}

pub fn bruteforce_metrics(v: &CMat, users: &[CVec], targets: &[CVec], noise_power: f64) -> Result<BruteForceMetrics> {
    let rows = v.nrows();
    if users.iter().chain(targets).any(|f| f.len() != rows) {
        return Err(mismatch("channel length differs from beamformer rows"));
    }
    if users.len() > v.ncols() {
        return Err(mismatch("more users than beamformer columns"));
    }
    let cols = v.ncols();
    let mut sinr = Vec::with_capacity(users.len());
    for (k, h) in users.iter().enumerate() {
        let signal = abs2(inner_product(h, v, k));
        let mut interference = 0.0;
        for i in 0..cols {
            if i != k {
                interference += abs2(inner_product(h, v, i));
            }
        }
        sinr.push(signal / (interference + noise_power));
    }
    let mut beampattern_gain = Vec::with_capacity(targets.len());
    for g in targets {
        let mut gain = 0.0;
        for i in 0..cols {
            gain += abs2(inner_product(g, v, i));
        }
        beampattern_gain.push(gain);
    }
    let mut power = 0.0;
    for i in 0..cols {
        for m in 0..rows {
            power += abs2(v[(m, i)]);
        }
    }
    Ok(BruteForceMetrics {
        sinr,
        beampattern_gain,
        power,
    })
}

#[derive(Debug, Clone)]
pub struct RandomSearchOutcome {
    /// Best feasible physical beamformer and its sum rate.
    pub best: Option<(CMat, f64)>,
    pub samples: usize,
    pub feasible_samples: usize,
}

/// Samples `budget` uniform points on the sphere and keeps the feasible one
/// (every raw residual `≤ 0`) with the highest sum rate.
pub fn random_search_baseline<R: Rng + ?Sized>(scenario: &Scenario, budget: usize, rng: &mut R) -> Result<RandomSearchOutcome> {
    if budget == 0 {
        return Err(Error::InvalidBudget);
    }
    let rows = scenario.num_antennas() + 1;
    let cols = scenario.num_streams();
    let mut best: Option<(CMat, f64)> = None;
    let mut feasible_samples = 0;
    for _ in 0..budget {
        let point = random_point(rows, cols, rng);
        if !metrics::residuals(&point, scenario)?.is_satisfied() {
            continue;
        }
        feasible_samples += 1;
        let v = extract(&point, scenario.max_power());
        let rate = metrics::sum_rate(&v, scenario.channels.users(), scenario.noise_power)?;
        if best.as_ref().is_none_or(|(_, r)| rate > *r) {
            best = Some((v, rate));
        }
    }
    Ok(RandomSearchOutcome {
        best,
        samples: budget,
        feasible_samples,
    })
}
