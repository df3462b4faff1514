//! The complex unit sphere of lifted beamformers.
//!
//! A lifted beamformer `Ṽ ∈ ℂ^{(M+1)×(K+N)}` stacks the power-normalized
//! physical beams `V / sqrt(p_max)` on top of an auxiliary row `z` that
//! absorbs unused power, so the budget `Tr(VVᴴ) ≤ p_max` becomes the sphere
//! constraint `‖Ṽ‖_F = 1`. The metric is `⟨A, B⟩ = Re Tr(Aᴴ B)`, which makes
//! the tangent space at `Ṽ` the set of `ξ` with `Re Tr(Ṽᴴ ξ) = 0`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::CMat;

/// Relative slack allowed when lifting a beamformer at full power.
const POWER_SLACK: f64 = 1e-9;

/// Point on the sphere `{Ṽ : ‖Ṽ‖_F = 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedBeamformer(CMat);

impl LiftedBeamformer {
    /// Normalizes `x` onto the sphere.
    pub fn normalized(x: CMat) -> Result<Self> {
        let norm = x.norm();
        if !(norm >= 1e-14) || !norm.is_finite() {
            return Err(Error::DegenerateStep(norm));
        }
        Ok(Self(x.unscale(norm)))
    }

    /// Wraps `x` without renormalizing; the caller guarantees `‖x‖_F = 1`.
    pub fn from_unit_matrix(x: CMat) -> Self {
        debug_assert!((x.norm() - 1.0).abs() < 1e-8);
        Self(x)
    }

    /// Wraps any matrix, on the sphere or not. Only for evaluating ambient
    /// functions, e.g. finite differences around a point.
    pub fn ambient(x: CMat) -> Self {
        Self(x)
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    /// Physical antennas `M` (one less than the number of rows).
    pub fn num_antennas(&self) -> usize {
        self.0.nrows() - 1
    }

    pub fn num_streams(&self) -> usize {
        self.0.ncols()
    }

    /// The auxiliary row `z`.
    pub fn auxiliary(&self) -> Vec<Complex64> {
        self.0.row(self.0.nrows() - 1).iter().copied().collect()
    }

    /// `‖z‖²`, the fraction of the budget left unused.
    pub fn slack(&self) -> f64 {
        self.0.row(self.0.nrows() - 1).norm_squared()
    }
}

/// Tangent direction at a particular base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(CMat);

impl TangentVector {
    /// Wraps an ambient matrix the caller already knows to be tangent.
    pub fn from_matrix(m: CMat) -> Self {
        Self(m)
    }

    pub fn zeros_like(base: &LiftedBeamformer) -> Self {
        Self(CMat::zeros(base.0.nrows(), base.0.ncols()))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.scale(factor))
    }
}

/// Riemannian metric `Re Tr(Aᴴ B)`.
pub fn inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Which tangent projection the solver applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// `G − Re Tr(ṼᴴG) Ṽ`, the projection onto the sphere's tangent space.
    #[default]
    Sphere,
    /// `G − Re(G ∘ Ṽ*) ∘ Ṽ`, entrywise; the projection for a product of
    /// circles. Kept for comparison only: its output is generally not tangent
    /// to the sphere.
    Hadamard,
}

/// Lifts a physical beamformer, filling `z` with equal real entries so that
/// the result has unit norm.
pub fn lift(v: &CMat, max_power: f64) -> Result<LiftedBeamformer> {
    let power = v.norm_squared();
    if power > max_power * (1.0 + POWER_SLACK) {
        return Err(Error::PowerExceeded {
            power,
            budget: max_power,
        });
    }
    let m = v.nrows();
    let cols = v.ncols();
    let scale = 1.0 / max_power.sqrt();
    let slack = (1.0 - power / max_power).max(0.0);
    let z = (slack / cols as f64).sqrt();
    let x = CMat::from_fn(m + 1, cols, |i, j| {
        if i < m {
            v[(i, j)] * scale
        } else {
            Complex64::new(z, 0.0)
        }
    });
    Ok(LiftedBeamformer(x))
}

/// Recovers the physical beamformer `sqrt(p_max) · Ṽ[0..M, :]`.
pub fn extract(point: &LiftedBeamformer, max_power: f64) -> CMat {
    let x = &point.0;
    x.rows(0, x.nrows() - 1).scale(max_power.sqrt())
}

/// Projects an ambient direction onto the tangent space at `point`.
pub fn project_tangent(point: &LiftedBeamformer, g: &CMat) -> TangentVector {
    let radial = inner(&point.0, g);
    TangentVector(g - point.0.scale(radial))
}

/// Entrywise variant of the projection (see [`Projection::Hadamard`]).
pub fn project_hadamard(point: &LiftedBeamformer, g: &CMat) -> TangentVector {
    let x = &point.0;
    TangentVector(x.zip_map(g, |v, gi| gi - v * (gi * v.conj()).re))
}

pub fn project(kind: Projection, point: &LiftedBeamformer, g: &CMat) -> TangentVector {
    match kind {
        Projection::Sphere => project_tangent(point, g),
        Projection::Hadamard => project_hadamard(point, g),
    }
}

/// Retraction by normalization: `(Ṽ + αξ) / ‖Ṽ + αξ‖_F`.
pub fn retract(point: &LiftedBeamformer, xi: &TangentVector, step: f64) -> Result<LiftedBeamformer> {
    if point.0.shape() != xi.0.shape() {
        return Err(mismatch("tangent vector shape differs from base point"));
    }
    LiftedBeamformer::normalized(&point.0 + xi.0.scale(step))
}

/// Uniformly distributed point: i.i.d. circular Gaussian entries, normalized.
pub fn random_point<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> LiftedBeamformer {
    loop {
        let x = CMat::from_fn(rows, cols, |_, _| {
            Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        });
        if let Ok(p) = LiftedBeamformer::normalized(x) {
            return p;
        }
    }
}

/// Real dimension of the sphere in `ℂ^{rows × cols}`.
pub fn real_dimension(rows: usize, cols: usize) -> usize {
    2 * rows * cols - 1
}
