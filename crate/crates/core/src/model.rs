//! Scenario geometry and near-field spherical-wave channels.
//!
//! The base station is a `M = 2M̃ + 1` element ULA with half-wavelength
//! spacing laid out along the y-axis and centered at the origin. A node at
//! polar position `(r, θ)` (θ measured from broadside, the +x axis) sees
//! element `m` at distance
//!
//! ```text
//! r_m(r, θ) = sqrt(r² + δ_m² d² − 2 r δ_m d sin θ),   δ_m = m − M̃
//! ```
//!
//! and its channel is `f = β · a(r, θ)` with `[a]_m = exp(−j 2π/λ (r_m − r))`
//! and `β = sqrt(λ / 4π) / r · exp(−j 2π r / λ)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::{CMat, CVec};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts watts to dBm. Zero power maps to `-inf`.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Converts a rate floor in bits/s/Hz to the equivalent SINR floor `2^R − 1`.
pub fn rate_to_sinr(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

/// Circular region in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: (f64, f64),
    pub radius: f64,
}

/// Every physical and geometric parameter of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Hz.
    pub carrier_frequency: f64,
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_targets: usize,
    /// Watts.
    pub noise_power: f64,
    /// Watts.
    pub max_power: f64,
    /// Per-target beampattern gain floor, watts.
    pub beampattern_thresholds: Vec<f64>,
    /// Per-user rate floor, bits/s/Hz.
    pub rate_thresholds: Vec<f64>,
    pub user_region: Disc,
    /// Degrees, one per target.
    pub target_angles: Vec<f64>,
    /// Meters, `(min, max)`.
    pub target_range_interval: (f64, f64),
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// The full-size parameter set: 54 GHz, 257 antennas, 2 users, 4 targets,
    /// −90 dBm noise, 30 dBm budget, 10 dBm gain floors, 15 bits/s/Hz rate floors.
    ///
    /// With the `sqrt(λ/4π)/r` amplitude the 10 dBm gain floor is above what
    /// the array can deliver at 10–30 m, so solves report infeasibility.
    pub fn full_size() -> Self {
        Self {
            carrier_frequency: 54e9,
            num_antennas: 257,
            num_users: 2,
            num_targets: 4,
            noise_power: dbm_to_watts(-90.0),
            max_power: dbm_to_watts(30.0),
            beampattern_thresholds: vec![dbm_to_watts(10.0); 4],
            rate_thresholds: vec![15.0; 2],
            user_region: Disc {
                center: (40.0, 10.0),
                radius: 10.0,
            },
            target_angles: vec![-65.0, -45.0, 30.0, 60.0],
            target_range_interval: (10.0, 30.0),
            rng_seed: 1,
        }
    }

    /// Desk-scale scenario: 33 antennas, 2 users, 2 targets (−45°, 30°),
    /// −30 dBm gain floors and 8 bits/s/Hz rate floors. Both floors sit
    /// comfortably inside what unconstrained solves achieve.
    pub fn desk() -> Self {
        Self {
            num_antennas: 33,
            num_targets: 2,
            beampattern_thresholds: vec![dbm_to_watts(DESK_GAIN_FLOOR_DBM); 2],
            rate_thresholds: vec![DESK_RATE_FLOOR; 2],
            target_angles: vec![-45.0, 30.0],
            ..Self::full_size()
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn antenna_spacing(&self) -> f64 {
        self.wavelength() / 2.0
    }

    pub fn sinr_thresholds(&self) -> Vec<f64> {
        self.rate_thresholds.iter().map(|&r| rate_to_sinr(r)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency.is_finite() && self.carrier_frequency > 0.0) {
            return Err(invalid("carrier_frequency must be positive"));
        }
        if self.num_antennas < 3 || self.num_antennas % 2 == 0 {
            return Err(invalid(format!(
                "num_antennas must be odd and >= 3, got {}",
                self.num_antennas
            )));
        }
        if self.num_users == 0 {
            return Err(invalid("num_users must be positive"));
        }
        if !(self.noise_power > 0.0) {
            return Err(invalid("noise_power must be positive"));
        }
        if !(self.max_power > 0.0) {
            return Err(invalid("max_power must be positive"));
        }
        if self.beampattern_thresholds.len() != self.num_targets {
            return Err(invalid(format!(
                "beampattern_thresholds has {} entries, expected {}",
                self.beampattern_thresholds.len(),
                self.num_targets
            )));
        }
        if self.beampattern_thresholds.iter().any(|&x| !(x >= 0.0)) {
            return Err(invalid("beampattern_thresholds must be nonnegative"));
        }
        if self.rate_thresholds.len() != self.num_users {
            return Err(invalid(format!(
                "rate_thresholds has {} entries, expected {}",
                self.rate_thresholds.len(),
                self.num_users
            )));
        }
        if self.rate_thresholds.iter().any(|&x| !(x >= 0.0)) {
            return Err(invalid("rate_thresholds must be nonnegative"));
        }
        if self.target_angles.len() != self.num_targets {
            return Err(invalid(format!(
                "target_angles has {} entries, expected {}",
                self.target_angles.len(),
                self.num_targets
            )));
        }
        if self.target_angles.iter().any(|a| !(-90.0..=90.0).contains(a)) {
            return Err(invalid("target_angles must lie in [-90, 90] degrees"));
        }
        if !(self.user_region.radius >= 0.0) {
            return Err(invalid("user_region radius must be nonnegative"));
        }
        let (lo, hi) = self.target_range_interval;
        if !(lo > 0.0 && hi >= lo) {
            return Err(invalid("target_range_interval must satisfy 0 < min <= max"));
        }
        Ok(())
    }
}

pub const DESK_GAIN_FLOOR_DBM: f64 = -30.0;
pub const DESK_RATE_FLOOR: f64 = 8.0;

/// Polar position of one node relative to the array center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    /// Meters.
    pub range: f64,
    /// Degrees.
    pub angle_deg: f64,
}

impl NodePosition {
    pub fn from_cartesian(x: f64, y: f64) -> Self {
        Self {
            range: x.hypot(y),
            angle_deg: y.atan2(x).to_degrees(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePlacement {
    pub users: Vec<NodePosition>,
    pub targets: Vec<NodePosition>,
}

/// Near-field array response for a node at `(range, angle_deg)`.
pub fn array_response(range: f64, angle_deg: f64, num_antennas: usize, wavelength: f64) -> Result<CVec> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(invalid(format!("range must be positive, got {range}")));
    }
    if num_antennas == 0 || num_antennas % 2 == 0 {
        return Err(invalid(format!("num_antennas must be odd, got {num_antennas}")));
    }
    if !(wavelength > 0.0) {
        return Err(invalid("wavelength must be positive"));
    }
    let half = (num_antennas / 2) as f64;
    let d = wavelength / 2.0;
    let sin_t = angle_deg.to_radians().sin();
    let k = 2.0 * PI / wavelength;
    Ok(CVec::from_fn(num_antennas, |m, _| {
        let offset = (m as f64 - half) * d;
        let r_m = (range * range + offset * offset - 2.0 * range * offset * sin_t).sqrt();
        // r_m − r without cancellation at large range
        let excess = (offset * offset - 2.0 * range * offset * sin_t) / (r_m + range);
        Complex64::from_polar(1.0, -k * excess)
    }))
}

/// Free-space gain between the array center and a node at `range`.
pub fn path_gain(range: f64, wavelength: f64) -> Result<Complex64> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(invalid(format!("range must be positive, got {range}")));
    }
    let amplitude = (wavelength / (4.0 * PI)).sqrt() / range;
    Ok(Complex64::from_polar(amplitude, -2.0 * PI * range / wavelength))
}

pub fn build_channel(node: &NodePosition, cfg: &ScenarioConfig) -> Result<CVec> {
    let lambda = cfg.wavelength();
    let beta = path_gain(node.range, lambda)?;
    Ok(array_response(node.range, node.angle_deg, cfg.num_antennas, lambda)? * beta)
}

/// Draws node positions (users uniform over the user disc, targets at the
/// configured angles with uniform ranges) and builds every channel.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<(NodePlacement, ChannelSet)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let users = (0..cfg.num_users)
        .map(|_| {
            let rho = cfg.user_region.radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            let (cx, cy) = cfg.user_region.center;
            NodePosition::from_cartesian(cx + rho * phi.cos(), cy + rho * phi.sin())
        })
        .collect::<Vec<_>>();
    let (lo, hi) = cfg.target_range_interval;
    let targets = cfg
        .target_angles
        .iter()
        .map(|&angle_deg| NodePosition {
            range: if hi > lo { rng.random_range(lo..=hi) } else { lo },
            angle_deg,
        })
        .collect::<Vec<_>>();

    let user_channels = users
        .iter()
        .map(|u| build_channel(u, cfg))
        .collect::<Result<Vec<_>>>()?;
    let target_channels = targets
        .iter()
        .map(|t| build_channel(t, cfg))
        .collect::<Result<Vec<_>>>()?;
    let channels = ChannelSet::new(user_channels, target_channels, cfg.max_power)?;
    Ok((NodePlacement { users, targets }, channels))
}

/// User and target channels, plus their lifted copies `sqrt(p_max) · [f; 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    users: Vec<CVec>,
    targets: Vec<CVec>,
    lifted_users: CMat,
    lifted_targets: CMat,
    max_power: f64,
}

impl ChannelSet {
    pub fn new(users: Vec<CVec>, targets: Vec<CVec>, max_power: f64) -> Result<Self> {
        let m = users
            .first()
            .map(|h| h.len())
            .ok_or_else(|| invalid("at least one user channel is required"))?;
        if m == 0 {
            return Err(invalid("channels must have at least one antenna"));
        }
        if users.iter().chain(targets.iter()).any(|f| f.len() != m) {
            return Err(mismatch(format!("all channels must have length {m}")));
        }
        if !(max_power > 0.0) {
            return Err(invalid("max_power must be positive"));
        }
        let lift = |set: &[CVec]| {
            let scale = Complex64::new(max_power.sqrt(), 0.0);
            DMatrix::from_fn(m + 1, set.len(), |i, j| {
                if i < m {
                    set[j][i] * scale
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        };
        let lifted_users = lift(&users);
        let lifted_targets = lift(&targets);
        Ok(Self {
            users,
            targets,
            lifted_users,
            lifted_targets,
            max_power,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.users[0].len()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn max_power(&self) -> f64 {
        self.max_power
    }

    pub fn users(&self) -> &[CVec] {
        &self.users
    }

    pub fn targets(&self) -> &[CVec] {
        &self.targets
    }

    /// `(M+1) × K`, column `k` is `ĥ_k`.
    pub fn lifted_users(&self) -> &CMat {
        &self.lifted_users
    }

    /// `(M+1) × N`, column `n` is `ĝ_n`.
    pub fn lifted_targets(&self) -> &CMat {
        &self.lifted_targets
    }

    /// Every channel multiplied by `factor` (powers scale by `factor²`).
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |set: &[CVec]| set.iter().map(|f| f * Complex64::new(factor, 0.0)).collect();
        Self::new(scale(&self.users), scale(&self.targets), self.max_power)
            .expect("scaling preserves validity")
    }
}

/// Solver input: channels, noise and the constraint floors in linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub channels: ChannelSet,
    /// Watts.
    pub noise_power: f64,
    /// Watts, one per target.
    pub beampattern_thresholds: Vec<f64>,
    /// Linear SINR, one per user.
    pub sinr_thresholds: Vec<f64>,
    pub placement: Option<NodePlacement>,
}

impl Scenario {
    pub fn new(
        channels: ChannelSet,
        noise_power: f64,
        beampattern_thresholds: Vec<f64>,
        sinr_thresholds: Vec<f64>,
    ) -> Result<Self> {
        if !(noise_power > 0.0) {
            return Err(invalid("noise_power must be positive"));
        }
        if beampattern_thresholds.len() != channels.num_targets() {
            return Err(mismatch("one beampattern threshold per target"));
        }
        if sinr_thresholds.len() != channels.num_users() {
            return Err(mismatch("one SINR threshold per user"));
        }
        if beampattern_thresholds
            .iter()
            .chain(sinr_thresholds.iter())
            .any(|&x| !(x >= 0.0 && x.is_finite()))
        {
            return Err(invalid("thresholds must be finite and nonnegative"));
        }
        Ok(Self {
            channels,
            noise_power,
            beampattern_thresholds,
            sinr_thresholds,
            placement: None,
        })
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let (placement, channels) = generate_scenario(cfg)?;
        let mut scenario = Self::new(
            channels,
            cfg.noise_power,
            cfg.beampattern_thresholds.clone(),
            cfg.sinr_thresholds(),
        )?;
        scenario.placement = Some(placement);
        Ok(scenario)
    }

    pub fn num_antennas(&self) -> usize {
        self.channels.num_antennas()
    }

    pub fn num_users(&self) -> usize {
        self.channels.num_users()
    }

    pub fn num_targets(&self) -> usize {
        self.channels.num_targets()
    }

    /// `K + N`.
    pub fn num_streams(&self) -> usize {
        self.num_users() + self.num_targets()
    }

    pub fn max_power(&self) -> f64 {
        self.channels.max_power()
    }

    /// Same scenario with every floor removed.
    pub fn unconstrained(&self) -> Self {
        Self {
            beampattern_thresholds: vec![0.0; self.num_targets()],
            sinr_thresholds: vec![0.0; self.num_users()],
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    const LAMBDA_54GHZ: f64 = SPEED_OF_LIGHT / 54e9;

    #[test]
    fn center_element_has_zero_phase() {
        for &(r, t) in &[(1.0, 0.0), (7.5, -63.0), (120.0, 89.0)] {
            let a = array_response(r, t, 9, LAMBDA_54GHZ).unwrap();
            assert_eq!(a[4], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn edge_phase_at_broadside_matches_closed_form() {
        let a = array_response(10.0, 0.0, 3, LAMBDA_54GHZ).unwrap();
        let d = LAMBDA_54GHZ / 2.0;
        let exact = -(2.0 * PI / LAMBDA_54GHZ) * ((100.0 + d * d).sqrt() - 10.0);
        let taylor = -(2.0 * PI / LAMBDA_54GHZ) * d * d / 20.0;
        for m in [0, 2] {
            assert!((a[m].arg() - exact).abs() < 1e-6 * exact.abs());
            assert!((a[m].arg() - taylor).abs() < 1e-9);
            assert!((a[m].arg() + 4.36e-4).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(array_response(0.0, 0.0, 3, LAMBDA_54GHZ).is_err());
        assert!(array_response(-1.0, 0.0, 3, LAMBDA_54GHZ).is_err());
        assert!(array_response(1.0, 0.0, 4, LAMBDA_54GHZ).is_err());
        assert!(path_gain(0.0, LAMBDA_54GHZ).is_err());
    }

    #[test]
    fn path_gain_formula() {
        let g1 = path_gain(1.0, LAMBDA_54GHZ).unwrap();
        assert!(close(g1.norm(), (LAMBDA_54GHZ / (4.0 * PI)).sqrt(), 1e-14));
        let r = 13.7;
        let ratio = path_gain(2.0 * r, LAMBDA_54GHZ).unwrap().norm() / path_gain(r, LAMBDA_54GHZ).unwrap().norm();
        assert!(close(ratio, 0.5, 1e-14));
        let at_lambda = path_gain(LAMBDA_54GHZ, LAMBDA_54GHZ).unwrap();
        assert!(at_lambda.im.abs() / at_lambda.norm() < 1e-12);
        assert!(at_lambda.re > 0.0);
    }

    #[test]
    fn channel_matches_per_entry_recomputation() {
        let cfg = ScenarioConfig {
            num_antennas: 5,
            ..ScenarioConfig::desk()
        };
        let node = NodePosition {
            range: 20.0,
            angle_deg: 30.0,
        };
        let f = build_channel(&node, &cfg).unwrap();
        let lambda = cfg.wavelength();
        let d = lambda / 2.0;
        let theta = 30f64.to_radians();
        for m in 0..5 {
            let delta = m as f64 - 2.0;
            let rm = (400.0 + delta * delta * d * d - 40.0 * delta * d * theta.sin()).sqrt();
            let amp = (lambda / (4.0 * PI)).sqrt() / 20.0;
            let phase = -2.0 * PI / lambda * 20.0 - 2.0 * PI / lambda * (rm - 20.0);
            let expected = Complex64::from_polar(amp, phase);
            assert!((f[m] - expected).norm() < 1e-9 * amp, "entry {m}");
        }
        let norm2 = f.norm_squared();
        assert!(close(norm2, 5.0 * lambda / (4.0 * PI * 400.0), 1e-12));
    }

    #[test]
    fn dbm_conversions() {
        assert!(close(dbm_to_watts(30.0), 1.0, 1e-15));
        assert!(close(dbm_to_watts(0.0), 1e-3, 1e-15));
        assert!(close(dbm_to_watts(-90.0), 1e-12, 1e-12));
        assert!(watts_to_dbm(1e-3).abs() < 1e-12);
        assert!(close(rate_to_sinr(15.0), 32767.0, 1e-15));
    }

    #[test]
    fn scenario_is_deterministic_and_respects_geometry() {
        let cfg = ScenarioConfig {
            num_antennas: 17,
            ..ScenarioConfig::full_size()
        };
        let (p1, c1) = generate_scenario(&cfg).unwrap();
        let (p2, c2) = generate_scenario(&cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(c1, c2);
        let angles: Vec<f64> = p1.targets.iter().map(|t| t.angle_deg).collect();
        assert_eq!(angles, vec![-65.0, -45.0, 30.0, 60.0]);
        for t in &p1.targets {
            assert!((10.0..=30.0).contains(&t.range));
        }
        for seed in 0..200 {
            let (p, _) = generate_scenario(&ScenarioConfig { rng_seed: seed, ..cfg.clone() }).unwrap();
            for u in &p.users {
                let (x, y) = (u.range * u.angle_deg.to_radians().cos(), u.range * u.angle_deg.to_radians().sin());
                assert!((x - 40.0).hypot(y - 10.0) <= 10.0 + 1e-9);
            }
        }
    }

    #[test]
    fn scenario_rejects_wrong_angle_count() {
        let cfg = ScenarioConfig {
            target_angles: vec![10.0],
            ..ScenarioConfig::full_size()
        };
        assert!(generate_scenario(&cfg).is_err());
        let cfg = ScenarioConfig {
            num_antennas: 256,
            ..ScenarioConfig::full_size()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn lifted_channels_have_zero_tail() {
        let (_, ch) = generate_scenario(&ScenarioConfig::desk()).unwrap();
        let m = ch.num_antennas();
        for k in 0..ch.num_users() {
            assert_eq!(ch.lifted_users()[(m, k)], Complex64::new(0.0, 0.0));
            for i in 0..m {
                let expected = ch.users()[k][i] * ch.max_power().sqrt();
                assert_eq!(ch.lifted_users()[(i, k)], expected);
            }
        }
        for n in 0..ch.num_targets() {
            assert_eq!(ch.lifted_targets()[(m, n)], Complex64::new(0.0, 0.0));
        }
    }
}
