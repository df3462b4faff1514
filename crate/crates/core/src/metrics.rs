//! Communication and sensing metrics.
//!
//! Column `k < K` of a beamformer `V` is the data beam `w_k`; column `K + n`
//! is the sensing beam `s_n`. Every other column (data and sensing) interferes
//! at user `k`.

use serde::Serialize;

use crate::error::{mismatch, Result};
use crate::manifold::LiftedBeamformer;
use crate::model::Scenario;
use crate::{CMat, CVec};

fn check_rows(v: &CMat, f: &CVec) -> Result<()> {
    if v.nrows() != f.len() {
        return Err(mismatch(format!(
            "beamformer has {} rows but channel has length {}",
            v.nrows(),
            f.len()
        )));
    }
    Ok(())
}

/// `|fᴴ v_i|²` for every column `i`.
pub fn received_powers(v: &CMat, f: &CVec) -> Result<Vec<f64>> {
    check_rows(v, f)?;
    Ok(v.column_iter().map(|col| f.dotc(&col).norm_sqr()).collect())
}

/// SINR of user `k` whose channel is `h`.
pub fn sinr(v: &CMat, h: &CVec, k: usize, noise_power: f64) -> Result<f64> {
    if k >= v.ncols() {
        return Err(mismatch(format!("user index {k} out of {} columns", v.ncols())));
    }
    let powers = received_powers(v, h)?;
    let total: f64 = powers.iter().sum();
    Ok(powers[k] / (total - powers[k] + noise_power))
}

/// Per-user SINRs; `users[k]` is the channel of the user served by column `k`.
pub fn sinrs(v: &CMat, users: &[CVec], noise_power: f64) -> Result<Vec<f64>> {
    if users.len() > v.ncols() {
        return Err(mismatch("more users than beamformer columns"));
    }
    users
        .iter()
        .enumerate()
        .map(|(k, h)| sinr(v, h, k, noise_power))
        .collect()
}

/// `Σ_k log₂(1 + γ_k)`, bits/s/Hz.
pub fn sum_rate(v: &CMat, users: &[CVec], noise_power: f64) -> Result<f64> {
    Ok(sinrs(v, users, noise_power)?.iter().map(|g| g.ln_1p()).sum::<f64>() / std::f64::consts::LN_2)
}

/// Transmit beampattern gain toward channel `g`: `‖gᴴ V‖²`.
pub fn beampattern_gain(v: &CMat, g: &CVec) -> Result<f64> {
    check_rows(v, g)?;
    Ok(g.ad_mul(v).norm_squared())
}

/// `Tr(V Vᴴ)`.
pub fn transmit_power(v: &CMat) -> f64 {
    v.norm_squared()
}

/// Constraint residuals; an entry `≤ 0` means the constraint holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintResiduals {
    /// `Ω_n − p(θ_n)`, watts.
    pub sensing: Vec<f64>,
    /// `Γ_k − γ_k`, linear SINR.
    pub sinr: Vec<f64>,
}

impl ConstraintResiduals {
    /// Largest positive residual, zero if every constraint holds.
    pub fn max_violation(&self) -> f64 {
        self.sensing
            .iter()
            .chain(self.sinr.iter())
            .fold(0.0, |acc, &r| acc.max(r))
    }

    pub fn is_satisfied(&self) -> bool {
        self.max_violation() <= 0.0
    }
}

/// Residuals evaluated on the lifted beamformer with the lifted channels.
pub fn residuals(point: &LiftedBeamformer, scenario: &Scenario) -> Result<ConstraintResiduals> {
    let x = point.matrix();
    let ch = &scenario.channels;
    if x.nrows() != ch.num_antennas() + 1 || x.ncols() != scenario.num_streams() {
        return Err(mismatch(format!(
            "lifted beamformer is {}x{}, scenario needs {}x{}",
            x.nrows(),
            x.ncols(),
            ch.num_antennas() + 1,
            scenario.num_streams()
        )));
    }
    let a = ch.lifted_users().ad_mul(x);
    let b = ch.lifted_targets().ad_mul(x);
    let sensing = (0..scenario.num_targets())
        .map(|n| scenario.beampattern_thresholds[n] - b.row(n).norm_squared())
        .collect();
    let sinr = (0..scenario.num_users())
        .map(|k| {
            let row = a.row(k);
            let signal = row[k].norm_sqr();
            let total = row.norm_squared();
            scenario.sinr_thresholds[k] - signal / (total - signal + scenario.noise_power)
        })
        .collect();
    Ok(ConstraintResiduals { sensing, sinr })
}

/// Summary metrics of a physical beamformer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Performance {
    pub sum_rate: f64,
    pub sinr: Vec<f64>,
    pub beampattern_gain: Vec<f64>,
    pub power: f64,
}

pub fn evaluate(v: &CMat, scenario: &Scenario) -> Result<Performance> {
    let ch = &scenario.channels;
    let sinr = sinrs(v, ch.users(), scenario.noise_power)?;
    let sum_rate = sinr.iter().map(|g| g.ln_1p()).sum::<f64>() / std::f64::consts::LN_2;
    let beampattern_gain = ch
        .targets()
        .iter()
        .map(|g| beampattern_gain(v, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(Performance {
        sum_rate,
        sinr,
        beampattern_gain,
        power: transmit_power(v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        })
    }

    fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> CVec {
        CVec::from_fn(len, |_, _| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
    }

    #[test]
    fn single_user_no_interference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_matrix(6, 1, &mut rng);
        let h = random_vec(6, &mut rng);
        let expected = h.dotc(&v.column(0)).norm_sqr() / 0.25;
        assert!((sinr(&v, &h, 0, 0.25).unwrap() - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn zero_beamformer_gives_zero_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_vec(5, &mut rng);
        let v = CMat::zeros(5, 3);
        assert_eq!(sinr(&v, &h, 1, 1.0).unwrap(), 0.0);
        assert_eq!(sum_rate(&v, &[h.clone(), h.clone()], 1.0).unwrap(), 0.0);
        assert_eq!(beampattern_gain(&v, &h).unwrap(), 0.0);
        assert_eq!(transmit_power(&v), 0.0);
    }

    #[test]
    fn unit_snr_gives_one_bit() {
        let h = CVec::from_element(4, Complex64::new(0.5, 0.0));
        // hᴴw = 4 · 0.5 · 0.5 = 1
        let v = CMat::from_element(4, 1, Complex64::new(0.5, 0.0));
        assert!((sum_rate(&v, &[h], 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matched_beam_reaches_cauchy_schwarz_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_vec(9, &mut rng);
        let p_max: f64 = 2.5;
        let w = &g * Complex64::new(p_max.sqrt() / g.norm(), 0.0);
        let v = CMat::from_columns(&[w]);
        let gain = beampattern_gain(&v, &g).unwrap();
        assert!((gain - p_max * g.norm_squared()).abs() <= 1e-12 * gain);
    }

    #[test]
    fn beampattern_column_sum_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random_matrix(7, 4, &mut rng);
        let g = random_vec(7, &mut rng);
        let by_columns: f64 = received_powers(&v, &g).unwrap().iter().sum();
        let by_row = beampattern_gain(&v, &g).unwrap();
        assert!((by_columns - by_row).abs() <= 1e-12 * by_row);
    }

    #[test]
    fn power_of_scaled_orthonormal_columns() {
        let p: f64 = 0.7;
        let v = CMat::identity(5, 3) * Complex64::new(p.sqrt(), 0.0);
        assert!((transmit_power(&v) - 3.0 * p).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = random_matrix(4, 3, &mut rng);
        let entrywise: f64 = v.iter().map(|z| z.re * z.re + z.im * z.im).sum();
        assert!((transmit_power(&v) - entrywise).abs() <= 1e-13 * entrywise);
    }

    #[test]
    fn sinr_invariant_to_column_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = random_matrix(6, 3, &mut rng);
        let h = random_vec(6, &mut rng);
        let before = sinr(&v, &h, 0, 0.3).unwrap();
        for col in 0..3 {
            let mut rotated = v.clone();
            let phase = Complex64::from_polar(1.0, 1.234 + col as f64);
            for z in rotated.column_mut(col).iter_mut() {
                *z *= phase;
            }
            let after = sinr(&rotated, &h, 0, 0.3).unwrap();
            assert!((after - before).abs() <= 1e-9 * before);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let v = CMat::zeros(4, 2);
        let h = CVec::zeros(5);
        assert!(sinr(&v, &h, 0, 1.0).is_err());
        assert!(sinr(&CMat::zeros(5, 2), &h, 2, 1.0).is_err());
        assert!(beampattern_gain(&v, &h).is_err());
    }

    #[test]
    fn violation_summary() {
        let r = ConstraintResiduals {
            sensing: vec![-1.0, 0.25],
            sinr: vec![-3.0],
        };
        assert_eq!(r.max_violation(), 0.25);
        assert!(!r.is_satisfied());
    }
}
