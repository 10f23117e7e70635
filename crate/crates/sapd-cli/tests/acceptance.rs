//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities (visible under `--nocapture`).
//!
//! Budgets assume optimized code; the workspace builds tests at opt-level 2.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sapd::geometry::{
    bregman_dist, project_psd_floor, project_simplex, prox_step, BoxSet, BregmanGeometry,
    OffdiagL1, Proxable, PsdCone, SimplexSet, SymMat, Vector,
};
use sapd::learner::{learner_run_until, learner_step, LearnerConfig, LearnerState};
use sapd::metrics::{compute_reference, rate_fit, MultiTraceBuilder, ReferenceConfig, Trace, TraceBuilder};
use sapd::multisol::{dual_bound_b, multisol_solve, MultisolConfig};
use sapd::portfolio::{
    build_scs_learning, markowitz_instance, synthetic_instance, toy_multisol_instance,
    toy_saddle_instance, PortfolioInstance, SaddleInstance,
};
use sapd::problem::{
    check_learning_gradients, check_saddle_gradients, check_structured_gradients, tau_threshold,
};
use sapd::solvers::{
    solve, ApdLearner, BacktrackingPolicy, ConstantPolicy, IterationRecord, MultiIterationRecord,
    RunObserver, StepPolicy,
};

fn scs_instance_n5() -> PortfolioInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let raw = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
    PortfolioInstance {
        mu: Vector::zeros(5),
        kappa: 0.1,
        sector_a: DMatrix::identity(1, 5),
        sector_b: Vector::from_element(1, 1.0),
        sample_cov: SymMat::new(&raw * raw.transpose()),
        v: 0.4,
        eps_psd: 0.1,
        y_cap: 10.0,
    }
}

fn portfolio_instance_n20() -> (PortfolioInstance, SaddleInstance) {
    let (mut pinst, ds, _, _) = synthetic_instance(20, 3, 42).unwrap();
    assert_eq!(ds.returns.nrows(), 10, "p = n/2 samples");
    pinst.kappa = 0.1;
    pinst.v = 0.4;
    let inst = markowitz_instance(&pinst).unwrap();
    (pinst, inst)
}

fn fresh_learner(inst: &SaddleInstance, learning: sapd::problem::LearningProblem) -> ApdLearner {
    ApdLearner {
        state: LearnerState::new(inst.theta0.clone(), inst.w0.clone(), 1.0, 1.0),
        problem: learning,
        config: LearnerConfig::default(),
    }
}

/// Criterion 1: central finite differences validate every shipped
/// instance's gradients at 20 random feasible points.
#[test]
fn criterion_01_gradient_fidelity() {
    let start = Instant::now();
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;

    let toy = toy_saddle_instance();
    for _ in 0..20 {
        let x = Vector::from_vec(vec![rng.random_range(-5.0..5.0)]);
        let y = Vector::from_vec(vec![rng.random_range(-5.0..5.0)]);
        let th = Vector::from_vec(vec![rng.random_range(0.0..3.0)]);
        let (rx, ry) = check_saddle_gradients(&toy.problem, &x, &y, &th, h);
        let (rt, rw) = check_learning_gradients(&toy.learning, &th, &Vector::zeros(0), h);
        worst = worst.max(rx.max_rel_err).max(ry.max_rel_err);
        worst = worst.max(rt.max_rel_err).max(rw.max_rel_err);
    }

    let (pinst, inst) = portfolio_instance_n20();
    let scs = build_scs_learning(&pinst);
    for _ in 0..20 {
        let x = project_simplex(&Vector::from_fn(20, |_, _| rng.random_range(0.0..1.0)));
        let y = Vector::from_fn(3, |_, _| rng.random_range(0.0..1.0));
        let th = SymMat::new(DMatrix::from_fn(20, 20, |_, _| rng.random_range(-0.5..0.5))).to_flat();
        let (rx, ry) = check_saddle_gradients(&inst.problem, &x, &y, &th, h);
        worst = worst.max(rx.max_rel_err).max(ry.max_rel_err);
        let w = SymMat::new(DMatrix::from_fn(20, 20, |_, _| rng.random_range(-0.5..0.5))).to_flat();
        let (rt, rw) = check_learning_gradients(&scs, &th, &w, h);
        worst = worst.max(rt.max_rel_err).max(rw.max_rel_err);
    }

    let small = scs_instance_n5();
    let scs5 = build_scs_learning(&small);
    for _ in 0..20 {
        let th = SymMat::new(DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0))).to_flat();
        let w = SymMat::new(DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0))).to_flat();
        let (rt, rw) = check_learning_gradients(&scs5, &th, &w, h);
        worst = worst.max(rt.max_rel_err).max(rw.max_rel_err);
    }

    let ms = toy_multisol_instance();
    for _ in 0..20 {
        let x = project_simplex(&Vector::from_fn(3, |_, _| rng.random_range(0.0..1.0)));
        let y = Vector::from_fn(1, |_, _| rng.random_range(0.0..10.0));
        let th = Vector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        for report in check_structured_gradients(&ms.problem, &x, &y, &th, h) {
            worst = worst.max(report.max_rel_err);
        }
    }

    let elapsed = start.elapsed();
    assert!(worst <= 1e-6, "max relative gradient error {worst}");
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("criterion 01 PASS: gradient fidelity, max rel err {worst:.3e} in {elapsed:?}");
}

/// Criterion 2: projection and prox oracles.
#[test]
fn criterion_02_prox_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);

    // Simplex projection against an independent sort-and-threshold
    // transcription.
    let mut worst_simplex: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=50);
        let v = Vector::from_fn(n, |_, _| rng.random_range(-4.0..4.0));
        let got = project_simplex(&v);
        let mut sorted: Vec<f64> = v.iter().cloned().collect();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut cumulative = 0.0;
        let mut lambda = 0.0;
        for (j, &u) in sorted.iter().enumerate() {
            cumulative += u;
            let candidate = (cumulative - 1.0) / (j + 1) as f64;
            if u > candidate {
                lambda = candidate;
            }
        }
        let want = Vector::from_iterator(n, v.iter().map(|&x| (x - lambda).max(0.0)));
        worst_simplex = worst_simplex.max((got - want).amax());
    }
    assert!(worst_simplex <= 1e-10, "simplex deviation {worst_simplex}");

    // PSD floor: idempotence and spectrum on 50 random 8x8 matrices.
    let floor = 0.05;
    for _ in 0..50 {
        let m = SymMat::new(DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0)));
        let p = project_psd_floor(&m, floor).unwrap();
        let pp = project_psd_floor(&p, floor).unwrap();
        assert!((pp.as_matrix() - p.as_matrix()).norm() <= 1e-8, "not idempotent");
        assert!(p.min_eigenvalue().unwrap() >= floor - 1e-8, "spectrum below floor");
    }

    // Prox inequality at 20 sampled points per operator.
    let geom = BregmanGeometry::SquaredEuclidean;
    let ops: Vec<(&str, Box<dyn Proxable>, usize)> = vec![
        ("simplex", Box::new(SimplexSet), 6),
        ("box", Box::new(BoxSet { lo: -1.0, hi: 2.0 }), 6),
        ("offdiag-l1", Box::new(OffdiagL1 { n: 3, level: 0.4 }), 9),
        ("psd-cone", Box::new(PsdCone { n: 3 }), 9),
    ];
    for (name, op, dim) in &ops {
        for _ in 0..20 {
            let t = rng.random_range(0.2..3.0);
            let anchor = op.prox(&Vector::from_fn(*dim, |_, _| rng.random_range(-1.0..1.0)), 1.0);
            let grad = Vector::from_fn(*dim, |_, _| rng.random_range(-1.0..1.0));
            let xp = prox_step(geom, op.as_ref(), &grad, &anchor, 1.0 / t);
            let x = op.prox(&Vector::from_fn(*dim, |_, _| rng.random_range(-1.0..1.0)), 1.0);
            let lhs = op.eval(&x) + grad.dot(&x) + t * bregman_dist(geom, &x, &anchor);
            let rhs = op.eval(&xp)
                + grad.dot(&xp)
                + t * bregman_dist(geom, &xp, &anchor)
                + t * bregman_dist(geom, &x, &xp);
            assert!(lhs - rhs >= -1e-8, "prox inequality violated for {name}");
        }
    }

    let elapsed = start.elapsed();
    println!(
        "criterion 02 PASS: prox oracles, simplex dev {worst_simplex:.2e}, in {elapsed:?}"
    );
}

#[derive(Default)]
struct StepAudit {
    rows: Vec<(f64, f64, f64, f64, usize)>, // (t, tau, sigma, eta, backtracks)
    worst_e_slack: f64,
    max_backtracks: usize,
}

impl RunObserver for StepAudit {
    fn record(&mut self, rec: &IterationRecord<'_>) {
        let r = rec.report;
        if let Some(e) = r.e_value {
            self.worst_e_slack = self.worst_e_slack.max(e - 1e-10 * (1.0 + r.e_scale));
        }
        self.max_backtracks = self.max_backtracks.max(r.backtracks);
        self.rows.push((r.t, r.tau, r.sigma, r.eta, r.backtracks));
    }
    fn record_multi(&mut self, rec: &MultiIterationRecord<'_>) {
        let r = rec.report;
        if let Some(e) = r.e_value {
            self.worst_e_slack = self.worst_e_slack.max(e - 1e-10 * (1.0 + r.e_scale));
        }
        self.max_backtracks = self.max_backtracks.max(r.backtracks);
        self.rows.push((r.t, r.tau, r.sigma, r.eta, r.backtracks));
    }
}

impl StepAudit {
    fn check_ledger(&self) {
        for (t, _, _, _, _) in &self.rows {
            assert!(*t <= 1.0 + 1e-12, "ergodic weight above 1");
        }
        for pair in self.rows.windows(2) {
            let (t0, tau0, s0, _, _) = pair[0];
            let (t1, tau1, s1, eta1, _) = pair[1];
            assert!(s1 <= s0 + 1e-12 * s0, "sigma increased between iterations");
            assert!(eta1 >= 1.0 - 1e-12, "eta fell below 1");
            assert!(t0 / tau0 >= t1 / tau1 - 1e-12 * (t0 / tau0), "t/tau ledger violated");
            assert!(t0 / s0 >= t1 / s1 - 1e-12 * (t0 / s0), "t/sigma ledger violated");
            assert!((t0 / t1 - eta1).abs() <= 1e-12 * eta1, "t ratio != eta");
        }
    }
}

/// Criterion 3: backtracking soundness on the bilinear toy and the n = 20
/// portfolio.
#[test]
fn criterion_03_backtracking_soundness() {
    let start = Instant::now();
    let policy = BacktrackingPolicy::default();

    let toy = toy_saddle_instance();
    let tau_hat_toy =
        tau_threshold(&toy.problem.constants, policy.gamma0, policy.c_alpha, policy.c_beta).unwrap();
    let mut audit_toy = StepAudit::default();
    let mut learner = fresh_learner(&toy, toy_saddle_instance().learning);
    solve(
        &toy.problem,
        &mut learner,
        &StepPolicy::Backtracking(policy),
        toy.x0.clone(),
        toy.y0.clone(),
        1000,
        &mut audit_toy,
    )
    .unwrap();

    let (pinst, inst) = portfolio_instance_n20();
    let tau_hat_pf =
        tau_threshold(&inst.problem.constants, policy.gamma0, policy.c_alpha, policy.c_beta)
            .unwrap();
    let mut audit_pf = StepAudit::default();
    let mut learner = fresh_learner(&inst, build_scs_learning(&pinst));
    solve(
        &inst.problem,
        &mut learner,
        &StepPolicy::Backtracking(policy),
        inst.x0.clone(),
        inst.y0.clone(),
        1000,
        &mut audit_pf,
    )
    .unwrap();

    for (audit, tau_hat, name) in [(&audit_toy, tau_hat_toy, "toy"), (&audit_pf, tau_hat_pf, "portfolio")] {
        assert!(
            audit.worst_e_slack <= 0.0,
            "{name}: accepted step failed the test by {}",
            audit.worst_e_slack
        );
        assert!(audit.max_backtracks <= 60, "{name}: backtracks exceeded 60");
        for (_, tau, _, _, _) in &audit.rows {
            assert!(
                *tau >= policy.rho * tau_hat,
                "{name}: accepted tau {tau} below rho * tau_hat {}",
                policy.rho * tau_hat
            );
        }
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 03 PASS: backtracking sound on both instances (max backtracks {} / {}), in {elapsed:?}",
        audit_toy.max_backtracks, audit_pf.max_backtracks
    );
}

/// Criterion 4: learner rate on the 5-asset covariance selection problem
/// and the scalar quadratic.
#[test]
fn criterion_04_learner_rate() {
    let start = Instant::now();
    let cfg = LearnerConfig::default();

    // Scalar quadratic ell(theta) = (theta - 1)^2 / 2.
    let quad = sapd::problem::LearningProblem {
        theta_dim: 1,
        w_dim: 0,
        loss: Box::new(|t, _| 0.5 * (t[0] - 1.0) * (t[0] - 1.0)),
        grad_theta: Box::new(|t, _| Vector::from_vec(vec![t[0] - 1.0])),
        grad_w: Box::new(|_, _| Vector::zeros(0)),
        prox_fprime: Box::new(sapd::geometry::ZeroFn),
        prox_hprime: Box::new(sapd::geometry::ZeroFn),
        strong_convexity: 1.0,
    };
    let theta_star_quad = Vector::from_vec(vec![1.0]);

    let scs_inst = scs_instance_n5();
    let scs = build_scs_learning(&scs_inst);
    let mut reference = LearnerState::new(scs_inst.sample_cov.to_flat(), Vector::zeros(25), 1.0, 1.0);
    let (theta_star_scs, converged) =
        learner_run_until(&mut reference, &scs, &cfg, 1e-10, 300_000).unwrap();
    assert!(converged, "reference learner did not converge");

    let cases: Vec<(&str, sapd::problem::LearningProblem, Vector, Vector, usize)> = vec![
        ("quadratic", quad, theta_star_quad, Vector::zeros(0), 1),
        ("scs-n5", scs, theta_star_scs, Vector::zeros(25), 25),
    ];
    for (name, lp, theta_star, w0, dim) in cases {
        let theta0 = if name == "quadratic" {
            Vector::zeros(1)
        } else {
            scs_instance_n5().sample_cov.to_flat()
        };
        assert_eq!(theta0.len(), if dim == 1 { 1 } else { 25 });
        // Start the rate run below 1/L so early steps contract rather than
        // jumping straight onto the minimizer.
        let mut state = LearnerState::new(theta0, w0, 0.5, 1.0);
        let mut series = Vec::new();
        let mut scaled_at_10 = 0.0;
        let mut worst_ratio: f64 = 0.0;
        for k in 1..=1000 {
            learner_step(&mut state, &lp, &cfg).unwrap();
            let err = (&state.theta - &theta_star).norm();
            series.push((k as f64, err));
            let scaled = ((k + 1) as f64).powi(2) * err * err;
            if k == 10 {
                scaled_at_10 = scaled;
            }
            if k >= 10 {
                worst_ratio = worst_ratio.max(scaled / scaled_at_10);
            }
        }
        assert!(
            worst_ratio <= 10.0,
            "{name}: (k+1)^2 error^2 grew by {worst_ratio} over its k=10 value"
        );
        let slope = rate_fit(&series, 100.0, 1000.0).unwrap();
        assert!(slope <= -0.9, "{name}: error slope {slope} above -0.9");
        println!("criterion 04 [{name}]: slope {slope:.3}, scaled-growth {worst_ratio:.3}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("criterion 04 PASS: learner rate, in {elapsed:?}");
}

fn run_toy(solver: &str, iters: usize) -> (Trace, f64) {
    let inst = toy_saddle_instance();
    let reference = compute_reference(&inst, &ReferenceConfig::default()).unwrap();
    let mut learner = fresh_learner(&inst, toy_saddle_instance().learning);
    let policy = match solver {
        "naive" => {
            let c = &inst.problem.constants;
            let (tau, sigma, _) = sapd::problem::step_sizes_constant(c, c.l_yx, 0.0).unwrap();
            StepPolicy::Constant(ConstantPolicy { tau, sigma })
        }
        _ => StepPolicy::Backtracking(BacktrackingPolicy::default()),
    };
    let mut builder = TraceBuilder::new(&inst, &reference).unwrap();
    solve(
        &inst.problem,
        &mut learner,
        &policy,
        inst.x0.clone(),
        inst.y0.clone(),
        iters,
        &mut builder,
    )
    .unwrap();
    let final_gap = builder.trace.rows.last().unwrap().gap;
    (builder.trace, final_gap)
}

/// Criterion 5: ergodic gap decay on the toy for both solvers.
#[test]
fn criterion_05_outer_rate() {
    let start = Instant::now();
    let iters = 5000;
    let (trace_naive, gap_naive) = run_toy("naive", iters);
    let (trace_aware, gap_aware) = run_toy("aware", iters);
    let slope_naive = rate_fit(&trace_naive.series(|r| r.gap), 100.0, iters as f64).unwrap();
    let slope_aware = rate_fit(&trace_aware.series(|r| r.gap), 100.0, iters as f64).unwrap();
    assert!(slope_naive <= -0.9, "constant-step gap slope {slope_naive}");
    assert!(slope_aware <= -0.9, "backtracking gap slope {slope_aware}");
    assert!(
        gap_aware <= gap_naive,
        "backtracking final gap {gap_aware} exceeds constant-step {gap_naive}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "criterion 05 PASS: slopes {slope_naive:.3}/{slope_aware:.3}, final gaps {gap_naive:.3e} >= {gap_aware:.3e}, in {elapsed:?}"
    );
}

/// Criterion 6: desk-scale qualitative reproduction on the synthetic
/// portfolio (n = 20, p = 10, s = 3).
#[test]
fn criterion_06_portfolio_desk_scale() {
    let start = Instant::now();
    let (pinst, inst) = portfolio_instance_n20();
    let reference = compute_reference(&inst, &ReferenceConfig::default()).unwrap();
    assert!(!reference.low_confidence, "reference did not converge");

    let mut traces = Vec::new();
    for solver in ["naive", "aware"] {
        let inst = markowitz_instance(&pinst).unwrap();
        let mut learner = fresh_learner(&inst, build_scs_learning(&pinst));
        let policy = match solver {
            "naive" => {
                let c = &inst.problem.constants;
                let (tau, sigma, _) = sapd::problem::step_sizes_constant(c, c.l_yx, 0.0).unwrap();
                StepPolicy::Constant(ConstantPolicy { tau, sigma })
            }
            _ => StepPolicy::Backtracking(BacktrackingPolicy::default()),
        };
        let mut builder = TraceBuilder::new(&inst, &reference).unwrap();
        solve(
            &inst.problem,
            &mut learner,
            &policy,
            inst.x0.clone(),
            inst.y0.clone(),
            1000,
            &mut builder,
        )
        .unwrap();
        builder.trace.provenance.insert("solver".into(), solver.into());
        traces.push(builder.trace);
    }

    // (a) decreasing trend: final <= initial / 10 for both columns.
    for trace in &traces {
        let solver = &trace.provenance["solver"];
        let first = trace.rows.first().unwrap();
        let last = trace.rows.last().unwrap();
        assert!(
            last.subopt <= 0.1 * first.subopt,
            "{solver}: suboptimality {} -> {} not a 10x decrease",
            first.subopt,
            last.subopt
        );
        assert!(
            last.infeas <= 0.1 * first.infeas,
            "{solver}: infeasibility {} -> {} not a 10x decrease",
            first.infeas,
            last.infeas
        );
    }
    // (b) the backtracking solver ends at least as low.
    let (naive_last, aware_last) = (
        traces[0].rows.last().unwrap(),
        traces[1].rows.last().unwrap(),
    );
    assert!(aware_last.subopt <= naive_last.subopt);
    assert!(aware_last.infeas <= naive_last.infeas);
    // (c) the learning residual columns coincide row-wise.
    let mut worst: f64 = 0.0;
    for (a, b) in traces[0].rows.iter().zip(&traces[1].rows) {
        worst = worst.max((a.learn_residual - b.learn_residual).abs());
    }
    assert!(worst <= 1e-12, "learning residual columns differ by {worst}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "criterion 06 PASS: subopt {:.2e}->{:.2e} (const) / {:.2e}->{:.2e} (backtracking), residual columns agree to {worst:.1e}, in {elapsed:?}",
        traces[0].rows[0].subopt, naive_last.subopt, traces[1].rows[0].subopt, aware_last.subopt
    );
}

/// Criterion 7: multiple-solutions regime with the default relaxation.
#[test]
fn criterion_07_multisol() {
    let start = Instant::now();
    let mut scaled = Vec::new();
    let mut gap_slope = 0.0;
    for iters in [100usize, 1000, 10_000] {
        let inst = toy_multisol_instance();
        let cfg = MultisolConfig::default();
        let epsilon = 1.0 / (iters as f64).sqrt();
        let (bound, _) = dual_bound_b(&inst.problem, &inst.theta0, epsilon, 0, 32).unwrap();
        struct Audit<'a> {
            inner: StepAudit,
            builder: MultiTraceBuilder<'a>,
            max_w: f64,
            min_w: f64,
        }
        impl RunObserver for Audit<'_> {
            fn record_multi(&mut self, rec: &MultiIterationRecord<'_>) {
                self.inner.record_multi(rec);
                self.builder.record_multi(rec);
                self.max_w = self.max_w.max(rec.w);
                self.min_w = self.min_w.min(rec.w);
            }
        }
        let mut audit = Audit {
            inner: StepAudit::default(),
            builder: MultiTraceBuilder::new(&inst, epsilon, bound),
            max_w: 0.0,
            min_w: 0.0,
        };
        let out = multisol_solve(
            &inst.problem,
            &cfg,
            inst.x0.clone(),
            inst.y0.clone(),
            inst.theta0.clone(),
            inst.w0,
            iters,
            &mut audit,
        )
        .unwrap();
        assert!(audit.inner.worst_e_slack <= 0.0, "accepted step failed the test");
        assert!(audit.min_w >= 0.0 && audit.max_w <= out.dual_bound, "multiplier left [0, B]");
        scaled.push((iters as f64).sqrt() * (out.ell_of_theta_avg - inst.ell_star));
        if iters == 10_000 {
            gap_slope = rate_fit(&audit.builder.trace.series(|r| r.gap), 100.0, 10_000.0).unwrap();
        }
    }
    let base = scaled[0];
    for (i, s) in scaled.iter().enumerate() {
        assert!(
            *s <= 3.0 * base,
            "scaled learning residual {s} at run {i} exceeds 3x the K=100 value {base}"
        );
    }
    assert!(gap_slope <= -0.45, "gap slope {gap_slope} above -0.45");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 180.0, "took {elapsed:?}");
    println!(
        "criterion 07 PASS: scaled residuals {scaled:?}, gap slope {gap_slope:.3}, in {elapsed:?}"
    );
}

/// Criterion 8: streamed ergodic averages equal brute-force recomputation.
#[test]
fn criterion_08_ergodic_averaging() {
    #[derive(Default)]
    struct Store {
        xs: Vec<Vector>,
        ys: Vec<Vector>,
        ts: Vec<f64>,
    }
    impl RunObserver for Store {
        fn record(&mut self, rec: &IterationRecord<'_>) {
            self.xs.push(rec.x.clone());
            self.ys.push(rec.y.clone());
            self.ts.push(rec.report.t);
        }
    }
    for solver in ["naive", "aware"] {
        let inst = toy_saddle_instance();
        let mut learner = fresh_learner(&inst, toy_saddle_instance().learning);
        let policy = match solver {
            "naive" => {
                let c = &inst.problem.constants;
                let (tau, sigma, _) = sapd::problem::step_sizes_constant(c, c.l_yx, 0.0).unwrap();
                StepPolicy::Constant(ConstantPolicy { tau, sigma })
            }
            _ => StepPolicy::Backtracking(BacktrackingPolicy::default()),
        };
        let mut store = Store::default();
        let out = solve(
            &inst.problem,
            &mut learner,
            &policy,
            inst.x0.clone(),
            inst.y0.clone(),
            1000,
            &mut store,
        )
        .unwrap();
        let t_sum: f64 = store.ts.iter().sum();
        let mut x_bar = Vector::zeros(1);
        let mut y_bar = Vector::zeros(1);
        for i in 0..store.ts.len() {
            x_bar += &store.xs[i] * store.ts[i];
            y_bar += &store.ys[i] * store.ts[i];
        }
        x_bar /= t_sum;
        y_bar /= t_sum;
        assert!((out.x_avg[0] - x_bar[0]).abs() <= 1e-12, "{solver}: x average drifted");
        assert!((out.y_avg[0] - y_bar[0]).abs() <= 1e-12, "{solver}: y average drifted");
    }
    println!("criterion 08 PASS: streamed averages match brute force to 1e-12");
}

/// Criterion 9: the solve verb is byte-deterministic under a fixed config
/// and seed.
#[test]
fn criterion_09_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_sapd");
    let dir = std::env::temp_dir().join(format!("sapd-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let run = |tag: &str| -> Vec<u8> {
        let trace = dir.join(format!("trace-{tag}.csv"));
        let summary = dir.join(format!("summary-{tag}.json"));
        let status = std::process::Command::new(bin)
            .args([
                "solve",
                "--problem",
                "portfolio-synthetic",
                "--solver",
                "aware",
                "--iters",
                "200",
                "--seed",
                "7",
                "--n",
                "20",
                "--sectors",
                "3",
                "--out-trace",
                trace.to_str().unwrap(),
                "--out-summary",
                summary.to_str().unwrap(),
            ])
            .status()
            .expect("spawn solver binary");
        assert!(status.success(), "solve exited with {status}");
        std::fs::read(&trace).unwrap()
    };
    let first = run("a");
    let second = run("b");
    assert_eq!(first, second, "trace bytes differ between identical runs");
    std::fs::remove_dir_all(&dir).ok();
    println!("criterion 09 PASS: identical trace bytes across repeated runs ({} bytes)", first.len());
}

/// Criterion 10: step-ledger identities along backtracking and
/// multiple-solutions runs.
#[test]
fn criterion_10_step_ledger() {
    let policy = BacktrackingPolicy::default();

    let toy = toy_saddle_instance();
    let mut audit = StepAudit::default();
    let mut learner = fresh_learner(&toy, toy_saddle_instance().learning);
    solve(
        &toy.problem,
        &mut learner,
        &StepPolicy::Backtracking(policy),
        toy.x0.clone(),
        toy.y0.clone(),
        1000,
        &mut audit,
    )
    .unwrap();
    audit.check_ledger();

    let (pinst, inst) = portfolio_instance_n20();
    let mut audit_pf = StepAudit::default();
    let mut learner = fresh_learner(&inst, build_scs_learning(&pinst));
    solve(
        &inst.problem,
        &mut learner,
        &StepPolicy::Backtracking(policy),
        inst.x0.clone(),
        inst.y0.clone(),
        500,
        &mut audit_pf,
    )
    .unwrap();
    audit_pf.check_ledger();

    let ms = toy_multisol_instance();
    let mut audit_ms = StepAudit::default();
    multisol_solve(
        &ms.problem,
        &MultisolConfig::default(),
        ms.x0.clone(),
        ms.y0.clone(),
        ms.theta0.clone(),
        ms.w0,
        1000,
        &mut audit_ms,
    )
    .unwrap();
    audit_ms.check_ledger();

    println!("criterion 10 PASS: ledger identities hold along all three runs");
}
