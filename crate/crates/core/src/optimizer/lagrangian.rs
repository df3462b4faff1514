//! Fractional-programming objective, augmented Lagrangian and its gradient.
//!
//! For user `k` write `a_{k,i} = ĥ_kᴴ ṽ_i`, `S_k = |a_{k,k}|²`,
//! `D_k = Σ_i |a_{k,i}|² + σ²` (signal column included) and `I_k = D_k − S_k`.
//! For target `n` write `b_{n,i} = ĝ_nᴴ ṽ_i` and `p_n = Σ_i |b_{n,i}|²`.
//!
//! ```text
//! f(Ṽ)   = −Σ_k μ̂_k S_k / D_k
//! ψ_n    = s_n (Ω_n − p_n)          (scaled sensing residual)
//! ψ_K+k  = s_k (Γ_k − S_k / I_k)    (scaled SINR residual)
//! L_ρ(Ṽ) = f + ρ/2 Σ_n max(0, λ_n/ρ + ψ_n)² + ρ/2 Σ_k max(0, κ_k/ρ + ψ_K+k)²
//! ```
//!
//! Gradients are conjugate-Wirtinger: `L(Ṽ + Δ) ≈ L(Ṽ) + Re Tr(Gᴴ Δ)`.
//! The gradient of `|fᴴ ṽ_i|²` in this convention is `2 (fᴴ ṽ_i) f e_iᵀ`.
//! With unit scales `s = 1` the penalties use the raw residuals.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::manifold::LiftedBeamformer;
use crate::metrics::ConstraintResiduals;
use crate::model::Scenario;
use crate::CMat;

use super::{FpState, MultiplierState};

/// How constraint residuals are scaled inside the augmented Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Raw residuals: watts for sensing, linear SINR for users.
    Unit,
    /// Residuals divided by their floor, `1 − p_n/Ω_n` and `1 − γ_k/Γ_k`.
    /// Floors of zero (and SINR floors below one) fall back to unit scale.
    #[default]
    Relative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintScaling {
    pub sensing: Vec<f64>,
    pub sinr: Vec<f64>,
}

impl ConstraintScaling {
    pub fn new(kind: Scaling, scenario: &Scenario) -> Self {
        match kind {
            Scaling::Unit => Self {
                sensing: vec![1.0; scenario.num_targets()],
                sinr: vec![1.0; scenario.num_users()],
            },
            Scaling::Relative => Self {
                sensing: scenario
                    .beampattern_thresholds
                    .iter()
                    .map(|&w| if w > 0.0 { 1.0 / w } else { 1.0 })
                    .collect(),
                sinr: scenario.sinr_thresholds.iter().map(|&g| 1.0 / g.max(1.0)).collect(),
            },
        }
    }

    pub fn apply(&self, raw: &ConstraintResiduals) -> ConstraintResiduals {
        ConstraintResiduals {
            sensing: raw.sensing.iter().zip(&self.sensing).map(|(r, s)| r * s).collect(),
            sinr: raw.sinr.iter().zip(&self.sinr).map(|(r, s)| r * s).collect(),
        }
    }
}

/// Subset of the `2K + N` gradient terms with per-term weights.
///
/// Term indices: `0..K` are the FP fractions, `K..K+N` the sensing penalties,
/// `K+N..2K+N` the SINR penalties.
#[derive(Debug, Clone, PartialEq)]
pub struct TermBatch {
    pub fp: Vec<(usize, f64)>,
    pub sensing: Vec<(usize, f64)>,
    pub sinr: Vec<(usize, f64)>,
}

impl TermBatch {
    pub fn population(num_users: usize, num_targets: usize) -> usize {
        2 * num_users + num_targets
    }

    pub fn full(num_users: usize, num_targets: usize) -> Self {
        Self {
            fp: (0..num_users).map(|k| (k, 1.0)).collect(),
            sensing: (0..num_targets).map(|n| (n, 1.0)).collect(),
            sinr: (0..num_users).map(|k| (k, 1.0)).collect(),
        }
    }

    /// Terms `indices`, each weighted `population / indices.len()` so the
    /// estimate is unbiased under uniform sampling without replacement.
    pub fn from_indices(indices: &[usize], num_users: usize, num_targets: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let population = Self::population(num_users, num_targets);
        let weight = population as f64 / indices.len() as f64;
        let mut batch = Self {
            fp: Vec::new(),
            sensing: Vec::new(),
            sinr: Vec::new(),
        };
        for &t in indices {
            if t < num_users {
                batch.fp.push((t, weight));
            } else if t < num_users + num_targets {
                batch.sensing.push((t - num_users, weight));
            } else if t < population {
                batch.sinr.push((t - num_users - num_targets, weight));
            } else {
                return Err(invalid(format!("term index {t} outside population {population}")));
            }
        }
        Ok(batch)
    }

    /// Uniform sample of `size` distinct terms.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, size: usize, num_users: usize, num_targets: usize) -> Result<Self> {
        let population = Self::population(num_users, num_targets);
        if size == 0 {
            return Err(Error::EmptyBatch);
        }
        let mut picked = index::sample(rng, population, size.min(population)).into_vec();
        picked.sort_unstable();
        Self::from_indices(&picked, num_users, num_targets)
    }

    pub fn len(&self) -> usize {
        self.fp.len() + self.sensing.len() + self.sinr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Objective, penalties and residual values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianValue {
    pub objective: f64,
    pub lagrangian: f64,
    /// Scaled residuals `ψ`.
    pub residuals: ConstraintResiduals,
}

/// The augmented Lagrangian of one scenario under a fixed constraint scaling.
#[derive(Debug, Clone)]
pub struct Lagrangian<'a> {
    scenario: &'a Scenario,
    scaling: ConstraintScaling,
    normalize_fp: bool,
    fp_term_scale: Option<f64>,
}

impl<'a> Lagrangian<'a> {
    pub fn new(scenario: &'a Scenario, scaling: Scaling) -> Self {
        Self {
            scenario,
            scaling: ConstraintScaling::new(scaling, scenario),
            normalize_fp: false,
            fp_term_scale: None,
        }
    }

    /// Divides the FP weights by `Σ_k μ̂_k`, keeping `f` in `[−1, 0]` so it
    /// stays comparable with the clipped multipliers at high SNR.
    pub fn with_fp_normalization(mut self, on: bool) -> Self {
        self.normalize_fp = on;
        self
    }

    /// Test hook: multiplies user 0's FP gradient term by `factor`, leaving
    /// the value untouched, so gradient checks can be shown to fail.
    #[doc(hidden)]
    pub fn with_corrupted_gradient(mut self, factor: f64) -> Self {
        self.fp_term_scale = Some(factor);
        self
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn scaling(&self) -> &ConstraintScaling {
        &self.scaling
    }

    fn user_row(&self, x: &CMat, k: usize) -> Vec<Complex64> {
        let h = self.scenario.channels.lifted_users().column(k);
        x.column_iter().map(|col| h.dotc(&col)).collect()
    }

    fn target_row(&self, x: &CMat, n: usize) -> Vec<Complex64> {
        let g = self.scenario.channels.lifted_targets().column(n);
        x.column_iter().map(|col| g.dotc(&col)).collect()
    }

    /// Weight of user `k`'s fraction, `μ̂_k` or `μ̂_k / Σ_j μ̂_j`.
    pub fn fp_weight(&self, fp: &FpState, k: usize) -> f64 {
        if self.normalize_fp {
            let total: f64 = (0..fp.mu.len()).map(|j| fp.weight(j)).sum();
            fp.weight(k) / total
        } else {
            fp.weight(k)
        }
    }

    /// `(S_k, D_k)` for one user row.
    fn signal_and_total(&self, row: &[Complex64], k: usize) -> (f64, f64) {
        let total = row.iter().map(|a| a.norm_sqr()).sum::<f64>() + self.scenario.noise_power;
        (row[k].norm_sqr(), total)
    }

    /// `f(Ṽ) = −Σ μ̂_k S_k / D_k` (weights normalized if enabled).
    pub fn fp_objective(&self, point: &LiftedBeamformer, fp: &FpState) -> f64 {
        let x = point.matrix();
        (0..self.scenario.num_users())
            .map(|k| {
                let (s, d) = self.signal_and_total(&self.user_row(x, k), k);
                -self.fp_weight(fp, k) * s / d
            })
            .sum()
    }

    /// Lifted SINRs `γ̂_k`.
    pub fn sinrs(&self, point: &LiftedBeamformer) -> Vec<f64> {
        let x = point.matrix();
        (0..self.scenario.num_users())
            .map(|k| {
                let (s, d) = self.signal_and_total(&self.user_row(x, k), k);
                s / (d - s)
            })
            .collect()
    }

    /// Scaled residuals `ψ`.
    pub fn scaled_residuals(&self, point: &LiftedBeamformer) -> ConstraintResiduals {
        let x = point.matrix();
        let sc = self.scenario;
        let sensing = (0..sc.num_targets())
            .map(|n| {
                let p: f64 = self.target_row(x, n).iter().map(|b| b.norm_sqr()).sum();
                self.scaling.sensing[n] * (sc.beampattern_thresholds[n] - p)
            })
            .collect();
        let sinr = self
            .sinrs(point)
            .iter()
            .enumerate()
            .map(|(k, g)| self.scaling.sinr[k] * (sc.sinr_thresholds[k] - g))
            .collect();
        ConstraintResiduals { sensing, sinr }
    }

    pub fn value(&self, point: &LiftedBeamformer, fp: &FpState, mult: &MultiplierState) -> LagrangianValue {
        let objective = self.fp_objective(point, fp);
        let residuals = self.scaled_residuals(point);
        let rho = mult.rho;
        let hinge = |m: f64, r: f64| (m / rho + r).max(0.0);
        let penalty: f64 = residuals
            .sensing
            .iter()
            .zip(&mult.lambda)
            .chain(residuals.sinr.iter().zip(&mult.kappa))
            .map(|(&r, &m)| hinge(m, r).powi(2))
            .sum::<f64>()
            * rho
            / 2.0;
        LagrangianValue {
            objective,
            lagrangian: objective + penalty,
            residuals,
        }
    }

    pub fn lagrangian(&self, point: &LiftedBeamformer, fp: &FpState, mult: &MultiplierState) -> f64 {
        self.value(point, fp, mult).lagrangian
    }

    /// Euclidean (conjugate-Wirtinger) gradient of `L_ρ` restricted to `batch`.
    pub fn gradient(
        &self,
        point: &LiftedBeamformer,
        fp: &FpState,
        mult: &MultiplierState,
        batch: &TermBatch,
    ) -> Result<CMat> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let x = point.matrix();
        let sc = self.scenario;
        let ch = &sc.channels;
        let cols = x.ncols();
        let rho = mult.rho;
        let mut grad = CMat::zeros(x.nrows(), cols);
        let mut coef = vec![Complex64::new(0.0, 0.0); cols];

        // user rows are shared by the FP and SINR terms
        let mut user_rows: Vec<Option<Vec<Complex64>>> = vec![None; sc.num_users()];
        let mut row_for = |k: usize| -> Vec<Complex64> {
            user_rows[k].get_or_insert_with(|| self.user_row(x, k)).clone()
        };

        for &(k, weight) in &batch.fp {
            let row = row_for(k);
            let (s, d) = self.signal_and_total(&row, k);
            let mut scale = -weight * self.fp_weight(fp, k);
            if k == 0 {
                if let Some(f) = self.fp_term_scale {
                    scale *= f;
                }
            }
            for (i, c) in coef.iter_mut().enumerate() {
                let mut v = -row[i] * (2.0 * s / (d * d));
                if i == k {
                    v += row[k] * (2.0 / d);
                }
                *c = v * scale;
            }
            accumulate(&mut grad, ch.lifted_users().column(k), &coef);
        }

        for &(n, weight) in &batch.sensing {
            let row = self.target_row(x, n);
            let p: f64 = row.iter().map(|b| b.norm_sqr()).sum();
            let s_n = self.scaling.sensing[n];
            let active = mult.lambda[n] / rho + s_n * (sc.beampattern_thresholds[n] - p);
            if active <= 0.0 {
                continue;
            }
            // ρ·t·s_n·∇u_n with ∇u_n = −Σ_i 2 b_i ĝ e_iᵀ
            let scale = -2.0 * weight * rho * active * s_n;
            for (c, b) in coef.iter_mut().zip(&row) {
                *c = b * scale;
            }
            accumulate(&mut grad, ch.lifted_targets().column(n), &coef);
        }

        for &(k, weight) in &batch.sinr {
            let row = row_for(k);
            let (s, d) = self.signal_and_total(&row, k);
            let i_k = d - s;
            let s_k = self.scaling.sinr[k];
            let active = mult.kappa[k] / rho + s_k * (sc.sinr_thresholds[k] - s / i_k);
            if active <= 0.0 {
                continue;
            }
            // ρ·t·s_k·∇c_k with ∇c_k = −∇(S/I)
            let scale = -weight * rho * active * s_k;
            for (i, c) in coef.iter_mut().enumerate() {
                *c = if i == k {
                    row[k] * (2.0 / i_k) * scale
                } else {
                    -row[i] * (2.0 * s / (i_k * i_k)) * scale
                };
            }
            accumulate(&mut grad, ch.lifted_users().column(k), &coef);
        }
        Ok(grad)
    }

    pub fn full_gradient(&self, point: &LiftedBeamformer, fp: &FpState, mult: &MultiplierState) -> CMat {
        let batch = TermBatch::full(self.scenario.num_users(), self.scenario.num_targets());
        self.gradient(point, fp, mult, &batch)
            .expect("full batch is never empty")
    }
}

/// `grad[:, i] += coef[i] · f` for every column `i`.
fn accumulate(grad: &mut CMat, f: nalgebra::DVectorView<'_, Complex64>, coef: &[Complex64]) {
    for (i, &c) in coef.iter().enumerate() {
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        grad.column_mut(i).axpy(c, &f, Complex64::new(1.0, 0.0));
    }
}

/// `μ_k = γ̂_k`, the maximizer of the FP objective for fixed `Ṽ`.
pub fn update_mu(point: &LiftedBeamformer, scenario: &Scenario) -> FpState {
    FpState {
        mu: Lagrangian::new(scenario, Scaling::Unit).sinrs(point),
    }
}

/// The full FP objective in bits/s/Hz,
/// `(1/ln 2) Σ_k [ln(1 + μ_k) − μ_k + (1 + μ_k) S_k / D_k]`.
/// At `μ = γ̂(Ṽ)` it equals `Σ_k log₂(1 + γ̂_k)`.
pub fn fp_rate_objective(point: &LiftedBeamformer, fp: &FpState, scenario: &Scenario) -> f64 {
    let lag = Lagrangian::new(scenario, Scaling::Unit);
    let fraction_sum = -lag.fp_objective(point, fp);
    let log_terms: f64 = fp.mu.iter().map(|&m| m.ln_1p() - m).sum();
    (log_terms + fraction_sum) / LN_2
}
