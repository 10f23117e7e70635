//! Outer primal-dual solvers: the constant-step scheme that substitutes the
//! evolving parameter estimate directly, and the backtracking scheme whose
//! dual extrapolation tracks the parameter's motion and whose step sizes are
//! chosen by an acceptance test instead of global constants.

use crate::error::SolverError;
use crate::geometry::{bregman_dist, prox_step, BregmanGeometry, Vector};
use crate::learner::{learner_step, LearnerConfig, LearnerState};
use crate::problem::{LipschitzConstants, SaddleProblem};

/// Relative tolerance of the step acceptance test.
pub const E_ACCEPT_TOL: f64 = 1e-10;

/// Source of the parameter estimate consumed by the outer solvers: either a
/// frozen value (reference runs) or the persistent backtracking learner.
pub trait ParamLearner {
    /// Performs exactly one accepted learning iteration.
    fn advance(&mut self) -> Result<(), SolverError>;
    /// Current estimate.
    fn theta(&self) -> &Vector;
    fn backtracks_last(&self) -> usize {
        0
    }
}

/// A constant parameter; `advance` is a no-op.
pub struct FixedParam(pub Vector);

impl ParamLearner for FixedParam {
    fn advance(&mut self) -> Result<(), SolverError> {
        Ok(())
    }
    fn theta(&self) -> &Vector {
        &self.0
    }
}

/// The backtracking learner driven one accepted step per invocation.
pub struct ApdLearner {
    pub state: LearnerState,
    pub problem: crate::problem::LearningProblem,
    pub config: LearnerConfig,
}

impl ParamLearner for ApdLearner {
    fn advance(&mut self) -> Result<(), SolverError> {
        learner_step(&mut self.state, &self.problem, &self.config)
    }
    fn theta(&self) -> &Vector {
        &self.state.theta
    }
    fn backtracks_last(&self) -> usize {
        self.state.backtracks_last
    }
}

/// Primal-dual iterate pair with the history the momentum terms need.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub x: Vector,
    pub y: Vector,
    pub x_prev: Vector,
    pub y_prev: Vector,
    /// Parameter estimate at the current outer clock.
    pub theta: Vector,
    /// Dual gradient at the previous point and previous parameter; the
    /// constant-step scheme re-evaluates at the current parameter instead.
    pub grad_y_prev: Vector,
    pub k: usize,
}

impl SolverState {
    pub fn new(problem: &SaddleProblem, x0: Vector, y0: Vector, theta0: Vector) -> Self {
        let grad_y_prev = problem.grad_y(&x0, &y0, &theta0);
        SolverState {
            x_prev: x0.clone(),
            y_prev: y0.clone(),
            x: x0,
            y: y0,
            theta: theta0,
            grad_y_prev,
            k: 0,
        }
    }
}

/// Step-size state: current steps, the free-parameter ladder, and the
/// ergodic weights.
#[derive(Clone, Copy, Debug)]
pub struct StepState {
    pub tau: f64,
    pub sigma: f64,
    pub eta: f64,
    pub gamma: f64,
    /// alpha_k, beta_k from the previously accepted iteration.
    pub alpha: f64,
    pub beta: f64,
    /// alpha_{k+1}, beta_{k+1} for the candidate step.
    pub alpha_next: f64,
    pub beta_next: f64,
    pub sigma_prev: f64,
    /// Accepted sigma_0; ergodic weights are t_k = sigma_k / sigma_0.
    pub sigma0: Option<f64>,
    pub t: f64,
    pub t_sum: f64,
}

/// Constant-step parameters.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy {
    pub tau: f64,
    pub sigma: f64,
}

/// Backtracking parameters.
#[derive(Clone, Copy, Debug)]
pub struct BacktrackingPolicy {
    pub c_alpha: f64,
    pub c_beta: f64,
    pub rho: f64,
    pub tau_bar: f64,
    pub gamma0: f64,
    pub backtrack_cap: usize,
}

impl Default for BacktrackingPolicy {
    fn default() -> Self {
        BacktrackingPolicy {
            c_alpha: 0.5,
            c_beta: 0.0,
            rho: 0.7,
            tau_bar: 1.0,
            gamma0: 1.0,
            backtrack_cap: 60,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum StepPolicy {
    Constant(ConstantPolicy),
    Backtracking(BacktrackingPolicy),
}

impl StepPolicy {
    pub fn validate(&self, c: &LipschitzConstants) -> Result<(), SolverError> {
        match self {
            StepPolicy::Constant(p) => {
                if p.tau <= 0.0 || p.sigma <= 0.0 {
                    return Err(SolverError::InvalidInput(
                        "constant policy: tau and sigma must be positive".into(),
                    ));
                }
            }
            StepPolicy::Backtracking(p) => {
                if p.c_alpha <= 0.0 {
                    return Err(SolverError::InvalidInput(
                        "backtracking policy: c_alpha must be positive".into(),
                    ));
                }
                if p.c_alpha + p.c_beta > 1.0 + 1e-15 {
                    return Err(SolverError::InvalidInput(
                        "backtracking policy: c_alpha + c_beta must not exceed 1".into(),
                    ));
                }
                if (c.l_yy > 0.0) != (p.c_beta > 0.0) {
                    return Err(SolverError::InvalidInput(
                        "backtracking policy: c_beta must be positive exactly when L_yy > 0"
                            .into(),
                    ));
                }
                if !(0.0 < p.rho && p.rho < 1.0) || p.tau_bar <= 0.0 || p.gamma0 <= 0.0 {
                    return Err(SolverError::InvalidInput(
                        "backtracking policy: rho in (0,1), tau_bar > 0, gamma0 > 0 required"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Per-iteration report: accepted steps, test value, backtrack counts.
#[derive(Clone, Copy, Debug)]
pub struct IterationReport {
    pub k: usize,
    pub tau: f64,
    pub sigma: f64,
    pub eta: f64,
    pub t: f64,
    pub backtracks: usize,
    pub learner_backtracks: usize,
    /// Acceptance-test value and term scale; absent under the constant
    /// policy, which runs no test.
    pub e_value: Option<f64>,
    pub e_scale: f64,
}

/// Value and magnitude scale of an acceptance test evaluation.
#[derive(Clone, Copy, Debug)]
pub struct TestValue {
    pub value: f64,
    pub scale: f64,
}

impl TestValue {
    pub fn accepted(&self) -> bool {
        self.value <= E_ACCEPT_TOL * (1.0 + self.scale)
    }
}

/// The step acceptance test: a computable surrogate whose nonpositivity
/// certifies that the candidate steps respect the local smoothness of the
/// coupling function.
///
/// The term carrying `1/beta_{k+1}` compares dual gradients at the *prior*
/// parameter estimate; when `c_beta = 0` that term must vanish identically,
/// and a nonzero difference reports a misdeclared `L_yy`.
#[allow(clippy::too_many_arguments)]
pub fn eval_e(
    problem: &SaddleProblem,
    x_new: &Vector,
    y_new: &Vector,
    theta_new: &Vector,
    x_k: &Vector,
    y_k: &Vector,
    theta_k: &Vector,
    steps: &StepState,
) -> Result<TestValue, SolverError> {
    let geom = BregmanGeometry::SquaredEuclidean;
    let t1 = (problem.grad_x(x_new, y_new, theta_new) - problem.grad_x(x_k, y_new, theta_new))
        .dot(&(x_new - x_k));
    let t2 = (problem.grad_y(x_new, y_new, theta_new) - problem.grad_y(x_k, y_new, theta_new))
        .norm_squared()
        / (2.0 * steps.alpha_next);
    let t3 = -(1.0 / steps.sigma - steps.eta * (steps.alpha + steps.beta))
        * bregman_dist(geom, y_new, y_k);
    let ydiff = problem.grad_y(x_k, y_new, theta_k) - problem.grad_y(x_k, y_k, theta_k);
    let t4 = if steps.beta_next > 0.0 {
        ydiff.norm_squared() / steps.beta_next
    } else {
        let scale = problem.grad_y(x_k, y_k, theta_k).norm();
        if ydiff.norm() > 1e-12 * (1.0 + scale) {
            return Err(SolverError::BetaTermMisdeclared);
        }
        0.0
    };
    let t5 = -bregman_dist(geom, x_new, x_k) / steps.tau;
    let scale = t1
        .abs()
        .max(t2.abs())
        .max(t3.abs())
        .max(t4.abs())
        .max(t5.abs());
    Ok(TestValue {
        value: t1 + t2 + t3 + t4 + t5,
        scale,
    })
}

/// One constant-step iteration: dual extrapolation with both gradient
/// evaluations at the current parameter estimate, dual ascent prox, primal
/// descent prox, then one learning step.
pub fn naive_step(
    state: &mut SolverState,
    steps: &mut StepState,
    problem: &SaddleProblem,
    learner: &mut dyn ParamLearner,
) -> Result<IterationReport, SolverError> {
    let geom = BregmanGeometry::SquaredEuclidean;
    let g_cur = problem.grad_y(&state.x, &state.y, &state.theta);
    let g_prev = problem.grad_y(&state.x_prev, &state.y_prev, &state.theta);
    let s = &g_cur * (1.0 + steps.eta) - &g_prev * steps.eta;
    let y_new = prox_step(geom, problem.prox_h.as_ref(), &(-s), &state.y, steps.sigma);
    let x_new = prox_step(
        geom,
        problem.prox_f.as_ref(),
        &problem.grad_x(&state.x, &y_new, &state.theta),
        &state.x,
        steps.tau,
    );
    learner.advance()?;

    state.x_prev = std::mem::replace(&mut state.x, x_new);
    state.y_prev = std::mem::replace(&mut state.y, y_new);
    state.theta = learner.theta().clone();
    state.k += 1;
    steps.t = 1.0;
    steps.t_sum += 1.0;

    Ok(IterationReport {
        k: state.k,
        tau: steps.tau,
        sigma: steps.sigma,
        eta: steps.eta,
        t: steps.t,
        backtracks: 0,
        learner_backtracks: learner.backtracks_last(),
        e_value: None,
        e_scale: 0.0,
    })
}

/// One backtracking iteration.
///
/// The learner advances exactly once and the resulting estimate is reused
/// across retries; re-invoking it inside the retry loop would advance the
/// learning clock a data-dependent number of times. The dual extrapolation
/// combines the current gradient at the current estimate with the cached
/// gradient at the previous point and previous estimate.
pub fn aware_step(
    state: &mut SolverState,
    steps: &mut StepState,
    problem: &SaddleProblem,
    learner: &mut dyn ParamLearner,
    policy: &BacktrackingPolicy,
) -> Result<IterationReport, SolverError> {
    let geom = BregmanGeometry::SquaredEuclidean;
    learner.advance()?;
    let theta_new = learner.theta().clone();
    let g_cur = problem.grad_y(&state.x, &state.y, &state.theta);

    for trial in 0..=policy.backtrack_cap {
        let sigma = steps.gamma * steps.tau;
        let eta = steps.sigma_prev / sigma;
        let alpha_next = policy.c_alpha / sigma;
        let beta_next = policy.c_beta / sigma;
        steps.sigma = sigma;
        steps.eta = eta;
        steps.alpha_next = alpha_next;
        steps.beta_next = beta_next;

        let s = &g_cur * (1.0 + eta) - &state.grad_y_prev * eta;
        let y_new = prox_step(geom, problem.prox_h.as_ref(), &(-s), &state.y, sigma);
        let x_new = prox_step(
            geom,
            problem.prox_f.as_ref(),
            &problem.grad_x(&state.x, &y_new, &theta_new),
            &state.x,
            steps.tau,
        );
        let test = eval_e(
            problem,
            &x_new,
            &y_new,
            &theta_new,
            &state.x,
            &state.y,
            &state.theta,
            steps,
        )?;
        if test.accepted() {
            state.x_prev = std::mem::replace(&mut state.x, x_new);
            state.y_prev = std::mem::replace(&mut state.y, y_new);
            state.grad_y_prev = g_cur;
            state.theta = theta_new;
            state.k += 1;

            steps.alpha = steps.alpha_next;
            steps.beta = steps.beta_next;
            steps.sigma_prev = sigma;
            let sigma0 = *steps.sigma0.get_or_insert(sigma);
            steps.t = sigma / sigma0;
            steps.t_sum += steps.t;
            // gamma_{k+1} = gamma_k, so tau carries over unchanged.

            return Ok(IterationReport {
                k: state.k,
                tau: steps.tau,
                sigma,
                eta,
                t: steps.t,
                backtracks: trial,
                learner_backtracks: learner.backtracks_last(),
                e_value: Some(test.value),
                e_scale: test.scale,
            });
        }
        steps.tau *= policy.rho;
    }
    Err(SolverError::BacktrackCapExceeded {
        k: state.k,
        cap: policy.backtrack_cap,
    })
}

/// Streaming weighted average `(sum t_k z_{k+1}) / (sum t_k)`.
#[derive(Clone, Debug)]
pub struct WeightedAverage {
    sum: Vector,
    weight: f64,
}

impl WeightedAverage {
    pub fn new(dim: usize) -> Self {
        WeightedAverage {
            sum: Vector::zeros(dim),
            weight: 0.0,
        }
    }

    pub fn push(&mut self, z: &Vector, t: f64) {
        assert!(t > 0.0, "ergodic weight must be positive");
        self.sum.axpy(t, z, 1.0);
        self.weight += t;
    }

    pub fn mean(&self) -> Vector {
        assert!(self.weight > 0.0, "no samples pushed");
        &self.sum / self.weight
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// Everything an observer may want from one accepted iteration.
pub struct IterationRecord<'a> {
    pub report: IterationReport,
    pub x: &'a Vector,
    pub y: &'a Vector,
    pub x_avg: &'a Vector,
    pub y_avg: &'a Vector,
    pub theta_prev: &'a Vector,
    pub theta: &'a Vector,
}

/// Record from one accepted iteration of the multiple-solutions solver.
pub struct MultiIterationRecord<'a> {
    pub report: IterationReport,
    pub x_avg: &'a Vector,
    pub y_avg: &'a Vector,
    pub theta_avg: &'a Vector,
    pub w_avg: &'a Vector,
    pub theta_prev: &'a Vector,
    pub theta: &'a Vector,
    pub w: f64,
    /// Auxiliary learning-value estimate at this iteration.
    pub ell_estimate: f64,
}

/// Sink for per-iteration rows; one run streams to exactly one observer.
pub trait RunObserver {
    fn record(&mut self, _rec: &IterationRecord<'_>) {}
    fn record_multi(&mut self, _rec: &MultiIterationRecord<'_>) {}
}

/// Discards every record.
pub struct NullObserver;

impl RunObserver for NullObserver {}

/// Ergodic and final iterates of a finished run.
#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub x_avg: Vector,
    pub y_avg: Vector,
    pub x_last: Vector,
    pub y_last: Vector,
    pub theta_last: Vector,
    pub iterations: usize,
}

/// Runs `iters` iterations of the stepper selected by the policy, streaming
/// a record per accepted iteration to the observer. Any step error aborts
/// the run; rows already streamed stay with the observer.
pub fn solve(
    problem: &SaddleProblem,
    learner: &mut dyn ParamLearner,
    policy: &StepPolicy,
    x0: Vector,
    y0: Vector,
    iters: usize,
    observer: &mut dyn RunObserver,
) -> Result<SolveOutput, SolverError> {
    if iters == 0 {
        return Err(SolverError::InvalidInput(
            "iteration budget must be at least 1".into(),
        ));
    }
    policy.validate(&problem.constants)?;
    let mut state = SolverState::new(problem, x0, y0, learner.theta().clone());
    let mut steps = match policy {
        StepPolicy::Constant(p) => StepState {
            tau: p.tau,
            sigma: p.sigma,
            eta: 1.0,
            gamma: 0.0,
            alpha: 0.0,
            beta: 0.0,
            alpha_next: 0.0,
            beta_next: 0.0,
            sigma_prev: p.sigma,
            sigma0: Some(p.sigma),
            t: 1.0,
            t_sum: 0.0,
        },
        StepPolicy::Backtracking(p) => {
            let sigma_prev = p.gamma0 * p.tau_bar;
            StepState {
                tau: p.tau_bar,
                sigma: sigma_prev,
                eta: 1.0,
                gamma: p.gamma0,
                alpha: p.c_alpha / sigma_prev,
                beta: p.c_beta / sigma_prev,
                alpha_next: 0.0,
                beta_next: 0.0,
                sigma_prev,
                sigma0: None,
                t: 1.0,
                t_sum: 0.0,
            }
        }
    };

    let mut x_acc = WeightedAverage::new(problem.x_dim);
    let mut y_acc = WeightedAverage::new(problem.y_dim);
    for _ in 0..iters {
        let theta_prev = state.theta.clone();
        let report = match policy {
            StepPolicy::Constant(_) => naive_step(&mut state, &mut steps, problem, learner)?,
            StepPolicy::Backtracking(p) => {
                aware_step(&mut state, &mut steps, problem, learner, p)?
            }
        };
        x_acc.push(&state.x, steps.t);
        y_acc.push(&state.y, steps.t);
        let x_avg = x_acc.mean();
        let y_avg = y_acc.mean();
        observer.record(&IterationRecord {
            report,
            x: &state.x,
            y: &state.y,
            x_avg: &x_avg,
            y_avg: &y_avg,
            theta_prev: &theta_prev,
            theta: &state.theta,
        });
    }
    Ok(SolveOutput {
        x_avg: x_acc.mean(),
        y_avg: y_acc.mean(),
        x_last: state.x,
        y_last: state.y,
        theta_last: state.theta,
        iterations: iters,
    })
}
