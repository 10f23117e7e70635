//! Reference solutions, the plotted convergence metrics, trace assembly and
//! rate-exponent fitting.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::geometry::Vector;
use crate::learner::{learner_run_until, LearnerConfig, LearnerState};
use crate::portfolio::{MultisolInstance, SaddleInstance};
use crate::problem::SaddleProblem;
use crate::solvers::{
    solve, BacktrackingPolicy, FixedParam, IterationRecord, MultiIterationRecord, RunObserver,
    StepPolicy,
};

/// Converged parameter and saddle used as the yardstick for suboptimality
/// and the gap surrogate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub theta_star: Vector,
    pub x_star: Vector,
    pub y_star: Vector,
    pub f_star: f64,
    /// "analytic" or "long-run".
    pub provenance: String,
    pub learner_residual: f64,
    pub saddle_residual: f64,
    pub low_confidence: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ReferenceConfig {
    /// Iterations of the frozen-parameter solver run.
    pub k_ref: usize,
    /// Learner stopping tolerance on the standardized successive residual.
    pub tol: f64,
    pub learner_max_iter: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            k_ref: 10_000,
            tol: 1e-10,
            learner_max_iter: 300_000,
        }
    }
}

/// Fixed-point residual of the saddle conditions at `(x, y)` with probe
/// step 1: how far the point moves under one prox-gradient sweep.
fn saddle_residual(p: &SaddleProblem, x: &Vector, y: &Vector, theta: &Vector) -> f64 {
    let x_next = p.prox_f.prox(&(x - p.grad_x(x, y, theta)), 1.0);
    let y_next = p.prox_h.prox(&(y + p.grad_y(x, y, theta)), 1.0);
    ((x - x_next).norm_squared() + (y - y_next).norm_squared()).sqrt()
}

/// Computes the reference: the learner run to tolerance, then the
/// backtracking solver with the parameter frozen at the learned value. An
/// instance with an analytic solution short-circuits both runs.
pub fn compute_reference(
    inst: &SaddleInstance,
    cfg: &ReferenceConfig,
) -> Result<ReferenceSolution, SolverError> {
    if let Some(a) = &inst.analytic {
        let res = saddle_residual(&inst.problem, &a.x_star, &a.y_star, &a.theta_star);
        return Ok(ReferenceSolution {
            theta_star: a.theta_star.clone(),
            x_star: a.x_star.clone(),
            y_star: a.y_star.clone(),
            f_star: a.f_star,
            provenance: "analytic".into(),
            learner_residual: 0.0,
            saddle_residual: res,
            low_confidence: res > 1e-8,
        });
    }

    let mut learner = LearnerState::new(inst.theta0.clone(), inst.w0.clone(), 1.0, 1.0);
    let lcfg = LearnerConfig::default();
    let (theta_star, converged) = learner_run_until(
        &mut learner,
        &inst.learning,
        &lcfg,
        cfg.tol,
        cfg.learner_max_iter,
    )?;
    let learner_residual =
        (&learner.theta - &learner.theta_prev).norm() / learner.theta_prev.norm().max(1.0);

    // Track the best objective among sector-feasible iterates; the frozen
    // run's last iterate is the saddle estimate.
    struct BestFeasible<'a> {
        problem: &'a SaddleProblem,
        sectors: Option<&'a (DMatrix<f64>, Vector)>,
        theta: &'a Vector,
        best: f64,
    }
    impl RunObserver for BestFeasible<'_> {
        fn record(&mut self, rec: &IterationRecord<'_>) {
            if let Some(obj) = &self.problem.objective {
                let infeas = self
                    .sectors
                    .map(|(a, b)| pos_part_norm(&(a * rec.x - b)))
                    .unwrap_or(0.0);
                if infeas <= 1e-8 {
                    self.best = self.best.min(obj(rec.x, self.theta));
                }
            }
        }
    }
    let mut observer = BestFeasible {
        problem: &inst.problem,
        sectors: inst.sectors.as_ref(),
        theta: &theta_star,
        best: f64::INFINITY,
    };
    let c = &inst.problem.constants;
    let policy = StepPolicy::Backtracking(BacktrackingPolicy {
        c_alpha: if c.l_yy > 0.0 { 0.25 } else { 0.5 },
        c_beta: if c.l_yy > 0.0 { 0.25 } else { 0.0 },
        ..Default::default()
    });
    let mut frozen = FixedParam(theta_star.clone());
    let out = solve(
        &inst.problem,
        &mut frozen,
        &policy,
        inst.x0.clone(),
        inst.y0.clone(),
        cfg.k_ref,
        &mut observer,
    )?;
    let res = saddle_residual(&inst.problem, &out.x_last, &out.y_last, &theta_star);
    let f_last = inst
        .problem
        .objective
        .as_ref()
        .map(|obj| obj(&out.x_last, &theta_star))
        .unwrap_or(f64::NAN);
    let f_star = if observer.best.is_finite() {
        observer.best.min(f_last)
    } else {
        f_last
    };
    Ok(ReferenceSolution {
        theta_star,
        x_star: out.x_last,
        y_star: out.y_last,
        f_star,
        provenance: "long-run".into(),
        learner_residual,
        saddle_residual: res,
        low_confidence: !converged || res > 1e-8,
    })
}

/// `|F(x; theta*) - F*|`.
pub fn suboptimality(
    x: &Vector,
    reference: &ReferenceSolution,
    problem: &SaddleProblem,
) -> Result<f64, SolverError> {
    let obj = problem
        .objective
        .as_ref()
        .ok_or_else(|| SolverError::InvalidInput("problem exposes no primal objective".into()))?;
    Ok((obj(x, &reference.theta_star) - reference.f_star).abs())
}

fn pos_part_norm(v: &Vector) -> f64 {
    v.iter().map(|&x| x.max(0.0).powi(2)).sum::<f64>().sqrt()
}

/// `|| (A x - b)_+ ||_2`.
pub fn infeasibility(x: &Vector, a: &DMatrix<f64>, b: &Vector) -> f64 {
    pos_part_norm(&(a * x - b))
}

/// Standardized successive-iterate residual of the learning sequence.
pub fn learning_residual(theta_next: &Vector, theta: &Vector) -> f64 {
    assert_eq!(theta_next.len(), theta.len(), "dimension mismatch");
    (theta_next - theta).norm() / theta.norm().max(1.0)
}

/// Fixed-saddle gap surrogate `L(x_avg, y*; theta*) - L(x*, y_avg; theta*)`
/// with `L = f + phi - h`: a lower bound of the gap over any compact set
/// containing the saddle, vanishing exactly there.
pub fn gap_surrogate(
    x_avg: &Vector,
    y_avg: &Vector,
    reference: &ReferenceSolution,
    problem: &SaddleProblem,
) -> Result<f64, SolverError> {
    let f_avg = problem.prox_f.eval(x_avg);
    let h_avg = problem.prox_h.eval(y_avg);
    if !f_avg.is_finite() || !h_avg.is_finite() {
        return Err(SolverError::InfeasibleEvaluation(
            "ergodic iterate lies outside the nonsmooth terms' domains".into(),
        ));
    }
    let th = &reference.theta_star;
    let lhs = f_avg + problem.phi(x_avg, &reference.y_star, th)
        - problem.prox_h.eval(&reference.y_star);
    let rhs = problem.prox_f.eval(&reference.x_star) + problem.phi(&reference.x_star, y_avg, th)
        - h_avg;
    Ok(lhs - rhs)
}

/// Least-squares slope of `log(value)` against `log(k)` over the window.
pub fn rate_fit(series: &[(f64, f64)], lo: f64, hi: f64) -> Result<f64, SolverError> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(k, _)| *k >= lo && *k <= hi)
        .cloned()
        .collect();
    if pts.len() < 10 {
        return Err(SolverError::InvalidInput(format!(
            "rate fit needs at least 10 points in the window, found {}",
            pts.len()
        )));
    }
    if pts.iter().any(|(k, v)| *k <= 0.0 || *v <= 0.0) {
        return Err(SolverError::InvalidInput(
            "rate fit requires positive abscissas and values".into(),
        ));
    }
    let n = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (k, v) in &pts {
        let x = k.ln();
        let y = v.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// One emitted row; `k` is 1-based and strictly increasing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub tau: f64,
    pub sigma: f64,
    pub eta: f64,
    pub backtracks: usize,
    pub subopt: f64,
    pub infeas: f64,
    pub learn_residual: f64,
    pub gap: f64,
}

pub const TRACE_HEADER: &str = "k,tau,sigma,eta,backtracks,subopt,infeas,learn_residual,gap";

/// Metric rows plus configuration provenance (emitted into the summary, not
/// the CSV, whose schema is fixed).
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub provenance: BTreeMap<String, String>,
}

impl Trace {
    pub fn push(&mut self, row: TraceRow) {
        if let Some(last) = self.rows.last() {
            assert!(row.k > last.k, "trace rows must be strictly k-ordered");
        }
        assert!(
            [row.tau, row.sigma, row.eta, row.subopt, row.infeas, row.learn_residual, row.gap]
                .iter()
                .all(|v| v.is_finite()),
            "trace entries must be finite at k={}",
            row.k
        );
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.k,
                r.tau,
                r.sigma,
                r.eta,
                r.backtracks,
                r.subopt,
                r.infeas,
                r.learn_residual,
                r.gap
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())
    }

    /// Series of `(k, column)` pairs for rate fitting.
    pub fn series(&self, pick: impl Fn(&TraceRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.k as f64, pick(r))).collect()
    }
}

/// Parses a trace CSV produced by `to_csv_string`.
pub fn parse_trace_csv(text: &str) -> Result<Trace, SolverError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_HEADER => {}
        other => {
            return Err(SolverError::InvalidInput(format!(
                "bad trace header: {other:?}"
            )))
        }
    }
    let mut trace = Trace::default();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 9 {
            return Err(SolverError::InvalidInput(format!(
                "trace row {} has {} cells",
                i + 2,
                cells.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64, SolverError> {
            s.parse()
                .map_err(|_| SolverError::InvalidInput(format!("bad number {s:?} in trace")))
        };
        trace.push(TraceRow {
            k: cells[0]
                .parse()
                .map_err(|_| SolverError::InvalidInput("bad k".into()))?,
            tau: parse_f(cells[1])?,
            sigma: parse_f(cells[2])?,
            eta: parse_f(cells[3])?,
            backtracks: cells[4]
                .parse()
                .map_err(|_| SolverError::InvalidInput("bad backtracks".into()))?,
            subopt: parse_f(cells[5])?,
            infeas: parse_f(cells[6])?,
            learn_residual: parse_f(cells[7])?,
            gap: parse_f(cells[8])?,
        });
    }
    Ok(trace)
}

/// Observer assembling trace rows for the two saddle solvers. The gap
/// column uses the instance's exact gap when it has one and the fixed-saddle
/// surrogate otherwise.
pub struct TraceBuilder<'a> {
    instance: &'a SaddleInstance,
    reference: &'a ReferenceSolution,
    pub trace: Trace,
}

impl<'a> TraceBuilder<'a> {
    pub fn new(
        instance: &'a SaddleInstance,
        reference: &'a ReferenceSolution,
    ) -> Result<Self, SolverError> {
        if instance.problem.objective.is_none() {
            return Err(SolverError::InvalidInput(
                "tracing needs a primal objective on the problem".into(),
            ));
        }
        let mut trace = Trace::default();
        trace.provenance = instance.provenance.clone();
        trace
            .provenance
            .insert("reference".into(), reference.provenance.clone());
        Ok(TraceBuilder {
            instance,
            reference,
            trace,
        })
    }
}

impl RunObserver for TraceBuilder<'_> {
    fn record(&mut self, rec: &IterationRecord<'_>) {
        let subopt = suboptimality(rec.x_avg, self.reference, &self.instance.problem)
            .expect("objective checked at construction");
        let infeas = self
            .instance
            .sectors
            .as_ref()
            .map(|(a, b)| infeasibility(rec.x_avg, a, b))
            .unwrap_or(0.0);
        let gap = match &self.instance.analytic_gap {
            Some(g) => g(rec.x_avg, rec.y_avg),
            None => gap_surrogate(rec.x_avg, rec.y_avg, self.reference, &self.instance.problem)
                .expect("ergodic iterates stay feasible"),
        };
        self.trace.push(TraceRow {
            k: rec.report.k,
            tau: rec.report.tau,
            sigma: rec.report.sigma,
            eta: rec.report.eta,
            backtracks: rec.report.backtracks,
            subopt,
            infeas,
            learn_residual: learning_residual(rec.theta, rec.theta_prev),
            gap,
        });
    }
}

/// Observer assembling trace rows for the multiple-solutions solver: the
/// suboptimality column carries the learning-value residual
/// `ell(theta_avg) - ell*`, the quantity its guarantees bound.
pub struct MultiTraceBuilder<'a> {
    instance: &'a MultisolInstance,
    epsilon: f64,
    dual_bound: f64,
    pub trace: Trace,
}

impl<'a> MultiTraceBuilder<'a> {
    pub fn new(instance: &'a MultisolInstance, epsilon: f64, dual_bound: f64) -> Self {
        let mut trace = Trace::default();
        trace.provenance = instance.provenance.clone();
        trace
            .provenance
            .insert("epsilon".into(), format!("{epsilon}"));
        trace
            .provenance
            .insert("dual_bound".into(), format!("{dual_bound}"));
        MultiTraceBuilder {
            instance,
            epsilon,
            dual_bound,
            trace,
        }
    }
}

impl RunObserver for MultiTraceBuilder<'_> {
    fn record_multi(&mut self, rec: &MultiIterationRecord<'_>) {
        let subopt = ((self.instance.problem.ell)(rec.theta_avg) - self.instance.ell_star).abs();
        let infeas = self
            .instance
            .sectors
            .as_ref()
            .map(|(a, b)| infeasibility(rec.x_avg, a, b))
            .unwrap_or(0.0);
        let gap = (self.instance.analytic_gap)(
            rec.x_avg,
            rec.w_avg[0],
            rec.y_avg,
            rec.theta_avg,
            self.epsilon,
            self.dual_bound,
        );
        self.trace.push(TraceRow {
            k: rec.report.k,
            tau: rec.report.tau,
            sigma: rec.report.sigma,
            eta: rec.report.eta,
            backtracks: rec.report.backtracks,
            subopt,
            infeas,
            learn_residual: learning_residual(rec.theta, rec.theta_prev),
            gap,
        });
    }
}
