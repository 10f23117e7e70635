//! Problem descriptions, Lipschitz metadata, closed-form step-size recipes
//! and the validation helpers (finite-difference gradient checks, linearity
//! checks, step-size threshold formulas).

use crate::error::SolverError;
use crate::geometry::{Proxable, Vector};
use crate::kernels;

/// Gradient Lipschitz moduli of the coupling function, plus the value
/// Lipschitz modulus in the learned parameter.
#[derive(Clone, Copy, Debug)]
pub struct LipschitzConstants {
    pub l_xx: f64,
    pub l_yx: f64,
    pub l_yy: f64,
    pub l_xtheta: f64,
    pub l_ytheta: f64,
    pub l_phitheta: f64,
}

impl LipschitzConstants {
    pub fn new(
        l_xx: f64,
        l_yx: f64,
        l_yy: f64,
        l_xtheta: f64,
        l_ytheta: f64,
        l_phitheta: f64,
    ) -> Self {
        let c = LipschitzConstants {
            l_xx,
            l_yx,
            l_yy,
            l_xtheta,
            l_ytheta,
            l_phitheta,
        };
        assert!(
            [l_xx, l_yx, l_yy, l_xtheta, l_ytheta, l_phitheta]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0),
            "Lipschitz constants must be finite and nonnegative"
        );
        c
    }
}

pub type Fn3Scalar = Box<dyn Fn(&Vector, &Vector, &Vector) -> f64 + Send + Sync>;
pub type Fn3Vector = Box<dyn Fn(&Vector, &Vector, &Vector) -> Vector + Send + Sync>;
pub type Fn2Scalar = Box<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;
pub type Fn2Vector = Box<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;
pub type Fn1Scalar = Box<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type Fn1Vector = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// The saddle-point side of the coupled problem: evaluators for the
/// coupling function and its partial gradients, proximal handles for the
/// nonsmooth terms, and Lipschitz metadata.
///
/// Convexity in `x` and concavity in `y` are assumed, not checked; the
/// gradients are validated against central finite differences by
/// [`check_saddle_gradients`].
pub struct SaddleProblem {
    pub x_dim: usize,
    pub y_dim: usize,
    pub theta_dim: usize,
    pub phi: Fn3Scalar,
    pub grad_x: Fn3Vector,
    pub grad_y: Fn3Vector,
    pub prox_f: Box<dyn Proxable>,
    pub prox_h: Box<dyn Proxable>,
    pub constants: LipschitzConstants,
    /// Primal objective `F(x; theta)` used by the metrics module to report
    /// suboptimality; not every instance has a natural one.
    pub objective: Option<Fn2Scalar>,
}

impl SaddleProblem {
    pub fn phi(&self, x: &Vector, y: &Vector, theta: &Vector) -> f64 {
        (self.phi)(x, y, theta)
    }
    pub fn grad_x(&self, x: &Vector, y: &Vector, theta: &Vector) -> Vector {
        (self.grad_x)(x, y, theta)
    }
    pub fn grad_y(&self, x: &Vector, y: &Vector, theta: &Vector) -> Vector {
        (self.grad_y)(x, y, theta)
    }
}

/// The learning side: a strongly convex-in-theta, linear-in-w saddle
/// problem solved by the one-step backtracking learner.
pub struct LearningProblem {
    pub theta_dim: usize,
    /// Zero is allowed: pure minimization without a multiplier block.
    pub w_dim: usize,
    pub loss: Fn2Scalar,
    pub grad_theta: Fn2Vector,
    pub grad_w: Fn2Vector,
    pub prox_fprime: Box<dyn Proxable>,
    pub prox_hprime: Box<dyn Proxable>,
    /// Strong convexity modulus of the loss in theta.
    pub strong_convexity: f64,
}

impl LearningProblem {
    pub fn loss(&self, theta: &Vector, w: &Vector) -> f64 {
        (self.loss)(theta, w)
    }
    pub fn grad_theta(&self, theta: &Vector, w: &Vector) -> Vector {
        (self.grad_theta)(theta, w)
    }
    pub fn grad_w(&self, theta: &Vector, w: &Vector) -> Vector {
        (self.grad_w)(theta, w)
    }
}

/// Lipschitz moduli for the structured coupling `g1(x, theta) + g2(x, y)`
/// and the scalar learning objective, used by the multiple-solutions solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct StructuredConstants {
    pub g1_xx: f64,
    pub g1_xtheta: f64,
    pub g2_xx: f64,
    pub g2_xy: f64,
    pub g2_yx: f64,
    pub g2_yy: f64,
    pub g1_thetax: f64,
    pub g1_thetatheta: f64,
    pub ell_theta: f64,
    pub ell_w: f64,
}

/// Structured problem for the multiple-learning-solutions regime:
/// the coupling splits as `g1(x, theta) + g2(x, y)` and the learning
/// objective is a plain convex function of theta.
pub struct StructuredProblem {
    pub x_dim: usize,
    pub y_dim: usize,
    pub theta_dim: usize,
    pub g1: Fn2Scalar,
    pub g2: Fn2Scalar,
    pub grad_x_g1: Fn2Vector,
    pub grad_theta_g1: Fn2Vector,
    pub grad_x_g2: Fn2Vector,
    pub grad_y_g2: Fn2Vector,
    pub ell: Fn1Scalar,
    pub grad_ell: Fn1Vector,
    /// Gradient Lipschitz modulus of `ell`; the auxiliary learner uses a
    /// step no larger than its reciprocal.
    pub grad_ell_lipschitz: f64,
    /// Slater relaxation of the learning constraint.
    pub epsilon: f64,
    pub project_theta: Fn1Vector,
    pub prox_f: Box<dyn Proxable>,
    pub prox_h: Box<dyn Proxable>,
    pub constants: StructuredConstants,
    /// Analytic value of `sup_x [g1(x, theta_S) - inf_theta g1(x, theta)]`
    /// when the instance can provide it; the dual bound is then
    /// `1 + hint / epsilon` with no sampling.
    pub dual_bound_hint: Option<f64>,
}

/// Constant step sizes matching the closed-form recipe: `eta = 1`,
/// `tau = (L_yx^2 / alpha + L_xx)^-1`, `sigma = (alpha + beta + 2 L_yy^2 / beta)^-1`,
/// with the `beta` term dropped when `L_yy = 0` and `beta = 0`.
pub fn step_sizes_constant(
    c: &LipschitzConstants,
    alpha: f64,
    beta: f64,
) -> Result<(f64, f64, f64), SolverError> {
    if alpha <= 0.0 {
        return Err(SolverError::InvalidInput(
            "step_sizes_constant: alpha must be positive".into(),
        ));
    }
    if c.l_yy > 0.0 && beta <= 0.0 {
        return Err(SolverError::InvalidInput(
            "step_sizes_constant: beta must be positive when L_yy > 0".into(),
        ));
    }
    let tau = 1.0 / (c.l_yx * c.l_yx / alpha + c.l_xx);
    let sigma_denom = if beta > 0.0 {
        alpha + beta + 2.0 * c.l_yy * c.l_yy / beta
    } else {
        alpha
    };
    Ok((tau, 1.0 / sigma_denom, 1.0))
}

/// The backtracking step threshold: the largest `tau` for which the
/// constant-free acceptance test is guaranteed to pass. Accepted steps then
/// satisfy `tau >= rho * tau_hat`.
pub fn tau_threshold(
    c: &LipschitzConstants,
    gamma: f64,
    c_alpha: f64,
    c_beta: f64,
) -> Result<f64, SolverError> {
    if gamma <= 0.0 || c_alpha <= 0.0 {
        return Err(SolverError::InvalidInput(
            "tau_threshold: gamma and c_alpha must be positive".into(),
        ));
    }
    if c_alpha + c_beta > 1.0 + 1e-15 {
        return Err(SolverError::InvalidInput(
            "tau_threshold: c_alpha + c_beta must not exceed 1".into(),
        ));
    }
    if (c.l_yy > 0.0) != (c_beta > 0.0) {
        return Err(SolverError::InvalidInput(
            "tau_threshold: c_beta must be positive exactly when L_yy > 0".into(),
        ));
    }
    let quad = c.l_yx * c.l_yx * gamma / c_alpha;
    let psi1 = if quad > 0.0 {
        (-c.l_xx + (c.l_xx * c.l_xx + 4.0 * quad).sqrt()) / (2.0 * quad)
    } else if c.l_xx > 0.0 {
        1.0 / c.l_xx
    } else {
        f64::INFINITY
    };
    let tau_hat = if c.l_yy > 0.0 {
        let psi2 = (c_beta * (1.0 - (c_alpha + c_beta))).sqrt() / (2f64.sqrt() * gamma * c.l_yy);
        psi1.min(psi2)
    } else {
        psi1
    };
    Ok(tau_hat)
}

/// Literal re-evaluation of the two step-size inequalities of the constant
/// threshold derivation, used by tests to cross-check `tau_threshold`.
pub fn step_inequalities_hold(
    c: &LipschitzConstants,
    gamma: f64,
    c_alpha: f64,
    c_beta: f64,
    tau: f64,
    slack: f64,
) -> bool {
    let first = -1.0 + c.l_xx * tau + c.l_yx * c.l_yx / c_alpha * gamma * tau * tau;
    let second = if c.l_yy > 0.0 {
        2.0 * c.l_yy * c.l_yy / c_beta * gamma * gamma * tau * tau - (1.0 - (c_alpha + c_beta))
    } else {
        0.0
    };
    first <= slack && second <= slack
}

/// Both max-form inequalities of the multiple-solutions step condition.
#[allow(clippy::too_many_arguments)]
pub fn validate_step_multisol(
    c: &StructuredConstants,
    tau: f64,
    sigma: f64,
    eta: f64,
    alpha_k: f64,
    alpha_next: f64,
    beta_k: f64,
    beta_next: f64,
) -> bool {
    // A zero coefficient with a zero denominator contributes nothing; a
    // positive coefficient over a zero denominator can never be satisfied.
    let ratio = |num: f64, den: f64| -> f64 {
        if num == 0.0 {
            0.0
        } else if den > 0.0 {
            num / den
        } else {
            f64::INFINITY
        }
    };
    let tau_rhs = f64::max(
        ratio(
            c.g2_yx * c.g2_yx + 2.0 * c.g1_thetax * c.g1_thetax,
            alpha_next,
        ) + c.g1_xx
            + c.g2_xx,
        ratio(2.0 * c.ell_w * c.ell_w, beta_next),
    );
    let sigma_rhs = f64::max(
        eta * (alpha_k + beta_k) + ratio(c.g2_yy * c.g2_yy, beta_next),
        eta * (alpha_k + beta_k)
            + ratio(2.0 * c.g1_thetatheta * c.g1_thetatheta, alpha_next)
            + ratio(2.0 * c.ell_theta * c.ell_theta, beta_next),
    );
    1.0 / tau >= tau_rhs && 1.0 / sigma >= sigma_rhs
}

/// Per-coordinate comparison of an analytic gradient against central finite
/// differences of `f` at `point`.
#[derive(Clone, Debug)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub worst_coord: usize,
    /// Coordinates whose relative error exceeds 1e-6.
    pub flagged: Vec<usize>,
}

impl FdReport {
    pub fn passes(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Central-difference check of one gradient block. The relative error of
/// coordinate `i` is `|g_i - fd_i| / max(1, |g_i|, |fd_i|)`.
pub fn fd_check_block(
    f: impl Fn(&Vector) -> f64 + Sync,
    grad: &Vector,
    point: &Vector,
    h: f64,
) -> FdReport {
    assert!(h > 0.0, "fd_check_block: nonpositive step");
    let n = point.len();
    let errs = kernels::tabulate(n, |i| {
        let mut plus = point.clone();
        let mut minus = point.clone();
        plus[i] += h;
        minus[i] -= h;
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        let g = grad[i];
        (g - fd).abs() / g.abs().max(fd.abs()).max(1.0)
    });
    let mut max_rel_err = 0.0;
    let mut worst_coord = 0;
    let mut flagged = Vec::new();
    for (i, &e) in errs.iter().enumerate() {
        if e > max_rel_err {
            max_rel_err = e;
            worst_coord = i;
        }
        if e > 1e-6 {
            flagged.push(i);
        }
    }
    FdReport {
        max_rel_err,
        worst_coord,
        flagged,
    }
}

/// Finite-difference validation of both partial gradients of a saddle
/// problem at one point.
pub fn check_saddle_gradients(
    p: &SaddleProblem,
    x: &Vector,
    y: &Vector,
    theta: &Vector,
    h: f64,
) -> (FdReport, FdReport) {
    let gx = p.grad_x(x, y, theta);
    let rx = fd_check_block(|xx| p.phi(xx, y, theta), &gx, x, h);
    let gy = p.grad_y(x, y, theta);
    let ry = fd_check_block(|yy| p.phi(x, yy, theta), &gy, y, h);
    (rx, ry)
}

/// Finite-difference validation of both partial gradients of a learning
/// problem at one point.
pub fn check_learning_gradients(
    p: &LearningProblem,
    theta: &Vector,
    w: &Vector,
    h: f64,
) -> (FdReport, FdReport) {
    let gt = p.grad_theta(theta, w);
    let rt = fd_check_block(|tt| p.loss(tt, w), &gt, theta, h);
    let gw = p.grad_w(theta, w);
    let rw = if p.w_dim == 0 {
        FdReport {
            max_rel_err: 0.0,
            worst_coord: 0,
            flagged: Vec::new(),
        }
    } else {
        fd_check_block(|ww| p.loss(theta, ww), &gw, w, h)
    };
    (rt, rw)
}

/// Finite-difference validation of the structured problem's gradients.
pub fn check_structured_gradients(
    p: &StructuredProblem,
    x: &Vector,
    y: &Vector,
    theta: &Vector,
    h: f64,
) -> Vec<FdReport> {
    vec![
        fd_check_block(|v| (p.g1)(v, theta), &(p.grad_x_g1)(x, theta), x, h),
        fd_check_block(|v| (p.g1)(x, v), &(p.grad_theta_g1)(x, theta), theta, h),
        fd_check_block(|v| (p.g2)(v, y), &(p.grad_x_g2)(x, y), x, h),
        fd_check_block(|v| (p.g2)(x, v), &(p.grad_y_g2)(x, y), y, h),
        fd_check_block(|v| (p.ell)(v), &(p.grad_ell)(theta), theta, h),
    ]
}

/// Verifies the linear-in-w structure on random triples: the w-dependent
/// part of the loss must combine linearly.
pub fn check_linear_in_w(
    p: &LearningProblem,
    theta: &Vector,
    w1: &Vector,
    w2: &Vector,
    a: f64,
    b: f64,
) -> f64 {
    if p.w_dim == 0 {
        return 0.0;
    }
    let zero = Vector::zeros(p.w_dim);
    let base = p.loss(theta, &zero);
    let combined = p.loss(theta, &(w1 * a + w2 * b)) - base;
    let parts = a * (p.loss(theta, w1) - base) + b * (p.loss(theta, w2) - base);
    (combined - parts).abs()
}
