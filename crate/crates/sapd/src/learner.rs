//! One-step accelerated primal-dual learner with backtracking, and the
//! accelerated projected-gradient routine used by the multiple-solutions
//! solver's auxiliary sequence.
//!
//! The learner is the oracle invoked once per outer solver iteration: each
//! call performs exactly one accepted iteration and keeps its own step-size
//! schedule; step sizes of the outer solver do not enter here.

use crate::error::SolverError;
use crate::geometry::{bregman_dist, prox_step, BregmanGeometry, Vector};
use crate::problem::LearningProblem;

/// Relative tolerance of the acceptance test; absorbs floating-point
/// cancellation when all terms vanish near a stationary point.
const ACCEPT_TOL: f64 = 1e-12;

/// Persistent state of the backtracking learner.
#[derive(Clone, Debug)]
pub struct LearnerState {
    pub theta: Vector,
    pub w: Vector,
    pub theta_prev: Vector,
    pub w_prev: Vector,
    /// Current primal step tau'.
    pub tau: f64,
    /// Accumulation factor gamma'.
    pub gamma: f64,
    /// Previous accepted dual step sigma'_{k-1}.
    pub sigma_prev: f64,
    pub k: usize,
    /// Rejected trials in the most recent accepted step.
    pub backtracks_last: usize,
}

impl LearnerState {
    pub fn new(theta0: Vector, w0: Vector, tau_bar: f64, gamma0: f64) -> Self {
        assert!(tau_bar > 0.0 && gamma0 > 0.0);
        LearnerState {
            theta_prev: theta0.clone(),
            w_prev: w0.clone(),
            theta: theta0,
            w: w0,
            tau: tau_bar,
            gamma: gamma0,
            sigma_prev: gamma0 * tau_bar,
            k: 0,
            backtracks_last: 0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LearnerConfig {
    /// Step shrink factor rho' in (0, 1).
    pub rho: f64,
    /// Trials allowed before the step is declared stuck.
    pub backtrack_cap: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            rho: 0.5,
            backtrack_cap: 60,
        }
    }
}

/// One accepted iteration of the backtracking learner.
///
/// The inner loop recomputes the dual extrapolation, the `w` ascent prox and
/// the `theta` descent prox from the same incoming state on every trial,
/// shrinking `tau'` until the smoothness test passes; acceptance then applies
/// the `gamma'`/`tau'` schedule update and advances the iterate history.
pub fn learner_step(
    state: &mut LearnerState,
    lp: &LearningProblem,
    cfg: &LearnerConfig,
) -> Result<(), SolverError> {
    assert!(lp.strong_convexity > 0.0, "learner needs mu' > 0");
    let geom = BregmanGeometry::SquaredEuclidean;
    let grad_w_cur = lp.grad_w(&state.theta, &state.w);
    let grad_w_prev = lp.grad_w(&state.theta_prev, &state.w_prev);

    for trial in 0..=cfg.backtrack_cap {
        let sigma = state.gamma * state.tau;
        let eta = state.sigma_prev / sigma;
        // Ascent direction for w; the prox minimizes h'(w) - <s, w> + D/sigma.
        let s = &grad_w_cur * (1.0 + eta) - &grad_w_prev * eta;
        let w_next = prox_step(geom, lp.prox_hprime.as_ref(), &(-&s), &state.w, sigma);
        let theta_next = prox_step(
            geom,
            lp.prox_fprime.as_ref(),
            &lp.grad_theta(&state.theta, &w_next),
            &state.theta,
            state.tau,
        );

        let dtheta = &theta_next - &state.theta;
        let a = (lp.grad_theta(&theta_next, &w_next) - lp.grad_theta(&state.theta, &w_next))
            .dot(&dtheta);
        let b = -dtheta.norm_squared() / state.tau;
        let c = if lp.w_dim > 0 {
            0.5 * sigma
                * (lp.grad_w(&theta_next, &w_next) - lp.grad_w(&state.theta, &w_next))
                    .norm_squared()
        } else {
            0.0
        };
        let scale = a.abs().max(b.abs()).max(c.abs());
        if a + b + c <= ACCEPT_TOL * (1.0 + scale) {
            let gamma_next = state.gamma * (1.0 + lp.strong_convexity * state.tau);
            let tau_next = state.tau * (state.gamma / gamma_next).sqrt();
            state.theta_prev = std::mem::replace(&mut state.theta, theta_next);
            state.w_prev = std::mem::replace(&mut state.w, w_next);
            state.sigma_prev = sigma;
            state.gamma = gamma_next;
            state.tau = tau_next;
            state.k += 1;
            state.backtracks_last = trial;
            return Ok(());
        }
        state.tau *= cfg.rho;
    }
    Err(SolverError::BacktrackCapExceeded {
        k: state.k,
        cap: cfg.backtrack_cap,
    })
}

/// Iterates the learner until the standardized successive-iterate residual
/// drops below `tol` or `max_iter` steps elapse. Returns the final estimate
/// and whether the tolerance was met.
pub fn learner_run_until(
    state: &mut LearnerState,
    lp: &LearningProblem,
    cfg: &LearnerConfig,
    tol: f64,
    max_iter: usize,
) -> Result<(Vector, bool), SolverError> {
    assert!(tol > 0.0, "learner_run_until: nonpositive tolerance");
    for _ in 0..max_iter {
        let before = state.theta.clone();
        learner_step(state, lp, cfg)?;
        let residual = (&state.theta - &before).norm() / before.norm().max(1.0);
        if residual <= tol {
            return Ok((state.theta.clone(), true));
        }
    }
    Ok((state.theta.clone(), false))
}

/// Auxiliary accelerated projected-gradient state.
#[derive(Clone, Debug)]
pub struct ApgdState {
    pub theta: Vector,
    pub theta_prev: Vector,
    pub k: usize,
    /// Fixed step, at most the reciprocal gradient Lipschitz modulus.
    pub step: f64,
}

impl ApgdState {
    pub fn new(theta0: Vector, step: f64) -> Self {
        assert!(step > 0.0);
        ApgdState {
            theta_prev: theta0.clone(),
            theta: theta0,
            k: 0,
            step,
        }
    }
}

/// One accelerated projected-gradient step; returns the new objective value.
pub fn apgd_step(
    state: &mut ApgdState,
    loss: impl Fn(&Vector) -> f64,
    grad: impl Fn(&Vector) -> Vector,
    project: impl Fn(&Vector) -> Vector,
) -> f64 {
    let k = state.k as f64;
    let momentum = (k - 2.0) / (k + 1.0);
    let zeta = &state.theta + (&state.theta - &state.theta_prev) * momentum;
    let next = project(&(&zeta - grad(&zeta) * state.step));
    state.theta_prev = std::mem::replace(&mut state.theta, next);
    state.k += 1;
    (loss)(&state.theta)
}

/// Bregman distance between successive learner iterates, exposed for step
/// diagnostics.
pub fn learner_progress(state: &LearnerState) -> f64 {
    bregman_dist(
        BregmanGeometry::SquaredEuclidean,
        &state.theta,
        &state.theta_prev,
    )
}
