use rand::Rng;

use crate::error::Result;
use crate::manifold::{inner, project, retract, LiftedBeamformer, TangentVector};

use super::lagrangian::{Lagrangian, LagrangianValue, TermBatch};
use super::solve::TraceRow;
use super::{step_size, FpState, Method, MultiplierState, SolverOptions};

/// Where inner iterations sit in the overall solve, for trace rows.
#[derive(Debug)]
pub struct TraceContext<'t> {
    pub fp_round: usize,
    pub alm_round: usize,
    /// Global iteration counter, advanced by every recorded row.
    pub next_iter: usize,
    pub rows: Option<&'t mut Vec<TraceRow>>,
}

impl TraceContext<'_> {
    pub fn detached() -> Self {
        Self {
            fp_round: 0,
            alm_round: 0,
            next_iter: 0,
            rows: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        inner_iter: usize,
        value: &LagrangianValue,
        grad_norm: f64,
        step: f64,
        rho: f64,
        method: Method,
    ) {
        let iter = self.next_iter;
        self.next_iter += 1;
        if let Some(rows) = self.rows.as_deref_mut() {
            rows.push(TraceRow {
                iter,
                fp_round: self.fp_round,
                alm_round: self.alm_round,
                inner_iter,
                objective: value.objective,
                lagrangian: value.lagrangian,
                grad_norm,
                max_violation: value.residuals.max_violation(),
                step,
                rho,
                method: method.short_name().to_string(),
            });
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub point: LiftedBeamformer,
    /// Accepted steps.
    pub iterations: usize,
    /// Full-batch Riemannian gradient norm at `point`.
    pub grad_norm: f64,
    pub converged: bool,
    /// A line search failed to find any decrease.
    pub stalled: bool,
}

/// Minimizes `L_ρ` over the sphere for fixed `μ`, `λ`, `κ`, `ρ`, stopping when
/// the full Riemannian gradient norm drops to `tol` or after `opts.max_inner`
/// steps.
#[allow(clippy::too_many_arguments)]
pub fn inner_minimize<R: Rng + ?Sized>(
    lag: &Lagrangian<'_>,
    start: LiftedBeamformer,
    fp: &FpState,
    mult: &MultiplierState,
    opts: &SolverOptions,
    tol: f64,
    rng: &mut R,
    trace: &mut TraceContext<'_>,
) -> Result<InnerOutcome> {
    match opts.method {
        Method::StochasticGradient => stochastic(lag, start, fp, mult, opts, tol, rng, trace),
        Method::SteepestDescent | Method::ConjugateGradient => deterministic(lag, start, fp, mult, opts, tol, trace),
    }
}

#[allow(clippy::too_many_arguments)]
fn stochastic<R: Rng + ?Sized>(
    lag: &Lagrangian<'_>,
    start: LiftedBeamformer,
    fp: &FpState,
    mult: &MultiplierState,
    opts: &SolverOptions,
    tol: f64,
    rng: &mut R,
    trace: &mut TraceContext<'_>,
) -> Result<InnerOutcome> {
    let sc = lag.scenario();
    let (k, n) = (sc.num_users(), sc.num_targets());
    let population = TermBatch::population(k, n);
    let batch_size = ((opts.batch_fraction * population as f64).ceil() as usize).clamp(1, population);
    let full = TermBatch::full(k, n);

    let mut x = start;
    let mut t = 0;
    let mut last_step = 0.0;
    // Checkpoint from the last full evaluation; a rise in L_ρ between
    // checkpoints sends the iterate back and halves the step scale, a
    // decrease doubles it again (up to one).
    let mut anchor: Option<(LiftedBeamformer, f64)> = None;
    let mut scale = 1.0;
    loop {
        if t % opts.check_interval == 0 || t >= opts.max_inner {
            let mut value = lag.value(&x, fp, mult);
            if let Some((prev, prev_l)) = &anchor {
                if value.lagrangian > prev_l + 1e-3 * prev_l.abs().max(1e-3) && scale > opts.min_step_scale {
                    x = prev.clone();
                    value = lag.value(&x, fp, mult);
                    scale *= 0.5;
                } else {
                    scale = (scale * 2.0).min(1.0);
                }
            }
            let g = lag.gradient(&x, fp, mult, &full)?;
            let grad_norm = project(opts.projection, &x, &g).norm();
            trace.record(t, &value, grad_norm, last_step, mult.rho, opts.method);
            if grad_norm <= tol || t >= opts.max_inner {
                return Ok(InnerOutcome {
                    point: x,
                    iterations: t,
                    grad_norm,
                    converged: grad_norm <= tol,
                    stalled: false,
                });
            }
            anchor = Some((x.clone(), value.lagrangian));
        }
        let batch = if batch_size == population {
            full.clone()
        } else {
            TermBatch::sample(rng, batch_size, k, n)?
        };
        let g = lag.gradient(&x, fp, mult, &batch)?;
        let mut xi = project(opts.projection, &x, &g);
        last_step = scale * step_size(t, opts.step0, opts.decay);
        let norm = xi.norm();
        let cap = scale * opts.max_displacement;
        if last_step * norm > cap {
            xi = xi.scaled(cap / (last_step * norm));
        }
        x = retract(&x, &xi, -last_step)?;
        t += 1;
    }
}

fn deterministic(
    lag: &Lagrangian<'_>,
    start: LiftedBeamformer,
    fp: &FpState,
    mult: &MultiplierState,
    opts: &SolverOptions,
    tol: f64,
    trace: &mut TraceContext<'_>,
) -> Result<InnerOutcome> {
    let mut x = start;
    let mut value = lag.value(&x, fp, mult);
    let mut g = lag.full_gradient(&x, fp, mult);
    let mut rgrad = project(opts.projection, &x, &g);
    let mut prev: Option<(TangentVector, f64)> = None; // (direction, ‖grad‖²)
    let mut t = 0;
    let mut last_step = 0.0;
    loop {
        let grad_norm = rgrad.norm();
        trace.record(t, &value, grad_norm, last_step, mult.rho, opts.method);
        if grad_norm <= tol || t >= opts.max_inner {
            return Ok(InnerOutcome {
                point: x,
                iterations: t,
                grad_norm,
                converged: grad_norm <= tol,
                stalled: false,
            });
        }

        let steepest = rgrad.scaled(-1.0);
        let mut direction = steepest.clone();
        if opts.method == Method::ConjugateGradient {
            if let Some((prev_dir, prev_sq)) = &prev {
                let beta = grad_norm * grad_norm / prev_sq;
                let transported = project(opts.projection, &x, prev_dir.matrix());
                let candidate = steepest.matrix() + transported.matrix().scale(beta);
                let candidate = TangentVector::from_matrix(candidate);
                if inner(&g, candidate.matrix()) < 0.0 {
                    direction = candidate;
                }
            }
        }
        let mut slope = inner(&g, direction.matrix());
        if slope >= 0.0 {
            direction = steepest;
            slope = inner(&g, direction.matrix());
        }

        let mut alpha = step_size(t, opts.step0, opts.decay);
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let candidate = retract(&x, &direction, alpha)?;
            let cand_value = lag.value(&candidate, fp, mult);
            if cand_value.lagrangian <= value.lagrangian + opts.armijo_slope * alpha * slope {
                accepted = Some((candidate, cand_value));
                break;
            }
            alpha *= opts.backtrack_factor;
        }
        let Some((next, next_value)) = accepted else {
            return Ok(InnerOutcome {
                point: x,
                iterations: t,
                grad_norm,
                converged: false,
                stalled: true,
            });
        };

        prev = Some((direction, grad_norm * grad_norm));
        x = next;
        value = next_value;
        g = lag.full_gradient(&x, fp, mult);
        rgrad = project(opts.projection, &x, &g);
        last_step = alpha;
        t += 1;
    }
}
