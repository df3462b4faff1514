#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sgalm::model::{ChannelSet, Scenario, ScenarioConfig};
use sgalm::{CMat, CVec};

pub fn cn<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Complex64 {
    let s = sigma / 2f64.sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

pub fn cn_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, sigma: f64) -> CVec {
    CVec::from_fn(len, |_, _| cn(rng, sigma))
}

pub fn cn_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, sigma: f64) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cn(rng, sigma))
}

/// Rayleigh channels with unit-variance entries, `p_max = 1`, `σ² = 0.1`.
/// Floors: `Ω_n = frac_gain · ‖g_n‖²`, `Γ_k = sinr_floor`.
pub fn gaussian_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    k: usize,
    n: usize,
    frac_gain: f64,
    sinr_floor: f64,
) -> Scenario {
    let users: Vec<CVec> = (0..k).map(|_| cn_vec(rng, m, 1.0)).collect();
    let targets: Vec<CVec> = (0..n).map(|_| cn_vec(rng, m, 1.0)).collect();
    let omega = targets.iter().map(|g| frac_gain * g.norm_squared()).collect();
    let channels = ChannelSet::new(users, targets, 1.0).unwrap();
    Scenario::new(channels, 0.1, omega, vec![sinr_floor; k]).unwrap()
}

/// Desk preset with a different antenna count and seed.
pub fn desk(m: usize, seed: u64) -> Scenario {
    let cfg = ScenarioConfig {
        num_antennas: m,
        rng_seed: seed,
        ..ScenarioConfig::desk()
    };
    Scenario::from_config(&cfg).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}
