//! Instance assembly and the four verbs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use sapd::learner::{LearnerConfig, LearnerState};
use sapd::metrics::{
    compute_reference, parse_trace_csv, rate_fit, MultiTraceBuilder, ReferenceConfig,
    ReferenceSolution, Trace, TraceBuilder,
};
use sapd::multisol::{dual_bound_b, multisol_solve, MultisolConfig};
use sapd::portfolio::{
    load_returns_csv, markowitz_instance, sample_stats, synthetic_instance, toy_multisol_instance,
    toy_saddle_instance, write_returns_csv, PortfolioInstance, SaddleInstance,
};
use sapd::problem::step_sizes_constant;
use sapd::solvers::{
    solve, ApdLearner, BacktrackingPolicy, ConstantPolicy, StepPolicy,
};

use crate::config::RunConfig;
use crate::{CliError, CompareArgs, GenArgs, ReferenceArgs, SolveArgs};

pub fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let (inst, ds, _, mu0) = synthetic_instance(args.n, args.sectors, args.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    write_returns_csv(&args.out_data, &ds)?;
    if let Some(meta_path) = &args.out_meta {
        let meta = json!({
            "n": args.n,
            "sectors": args.sectors,
            "seed": args.seed,
            "samples": ds.returns.nrows(),
            "kappa": inst.kappa,
            "v": inst.v,
            "eps_psd": inst.eps_psd,
            "y_cap": inst.y_cap,
            "true_mean": mu0.iter().cloned().collect::<Vec<f64>>(),
            "true_covariance": "banded: sigma_ij = max(1 - |i-j|/10, 0)",
        });
        write_text(meta_path, &format!("{}\n", serde_json::to_string_pretty(&meta).unwrap()))?;
    }
    Ok(())
}

/// Builds the saddle instance named by the config.
fn build_instance(cfg: &RunConfig) -> Result<SaddleInstance, CliError> {
    match cfg.problem.as_str() {
        "toy-saddle" => Ok(toy_saddle_instance()),
        "portfolio-synthetic" => {
            let (mut pinst, _, _, _) = synthetic_instance(cfg.n, cfg.sectors, cfg.seed)
                .map_err(|e| CliError::Config(e.to_string()))?;
            pinst.kappa = cfg.kappa;
            pinst.v = cfg.v;
            pinst.eps_psd = cfg.eps_psd;
            pinst.y_cap = cfg.y_cap;
            Ok(markowitz_instance(&pinst)?)
        }
        "portfolio-csv" => {
            let path = cfg.data.as_ref().expect("validated");
            let ds = load_returns_csv(path)?;
            let (mean, cov) = sample_stats(&ds)?;
            let n = mean.len();
            if cfg.sectors == 0 || cfg.sectors > n {
                return Err(CliError::Config(format!(
                    "sector count must lie in 1..={n}"
                )));
            }
            let (a, b) = sapd::portfolio::contiguous_sectors(n, cfg.sectors);
            let pinst = PortfolioInstance {
                mu: mean,
                kappa: cfg.kappa,
                sector_a: a,
                sector_b: b,
                sample_cov: cov,
                v: cfg.v,
                eps_psd: cfg.eps_psd,
                y_cap: cfg.y_cap,
            };
            Ok(markowitz_instance(&pinst)?)
        }
        other => Err(CliError::Config(format!(
            "problem {other:?} is not a saddle instance"
        ))),
    }
}

/// Deterministic cache file name from the fields the reference depends on.
fn reference_cache_name(cfg: &RunConfig, tol: f64) -> String {
    format!(
        "ref-{}-n{}-s{}-seed{}-kappa{}-v{}-eps{}-ycap{}-tol{:e}.json",
        cfg.problem, cfg.n, cfg.sectors, cfg.seed, cfg.kappa, cfg.v, cfg.eps_psd, cfg.y_cap, tol
    )
}

fn load_or_compute_reference(
    cfg: &RunConfig,
    inst: &SaddleInstance,
) -> Result<ReferenceSolution, CliError> {
    let ref_cfg = ReferenceConfig::default();
    let cache_path = cfg
        .cache_dir
        .as_ref()
        .map(|dir| dir.join(reference_cache_name(cfg, ref_cfg.tol)));
    if let Some(path) = &cache_path {
        if path.exists() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read cached reference: {e}")))?;
            let reference: ReferenceSolution = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("corrupt reference cache {}: {e}", path.display())))?;
            return Ok(reference);
        }
    }
    let reference = compute_reference(inst, &ref_cfg)?;
    if let Some(path) = &cache_path {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("cannot create cache dir: {e}")))?;
        }
        write_text(path, &serde_json::to_string(&reference).unwrap())?;
    }
    Ok(reference)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn summary_to_json(entries: Vec<(String, Value)>) -> String {
    let map: BTreeMap<String, Value> = entries.into_iter().collect();
    format!("{}\n", serde_json::to_string_pretty(&map).unwrap())
}

/// Final metrics plus a fitted gap slope over the trailing window.
fn trace_summary_entries(trace: &Trace, iters: usize) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    if let Some(last) = trace.rows.last() {
        out.push(("final.subopt".into(), json!(last.subopt)));
        out.push(("final.infeas".into(), json!(last.infeas)));
        out.push(("final.gap".into(), json!(last.gap)));
        out.push(("final.learn_residual".into(), json!(last.learn_residual)));
        out.push(("final.tau".into(), json!(last.tau)));
        out.push(("final.sigma".into(), json!(last.sigma)));
    }
    let window_lo = (iters / 10).max(10) as f64;
    for (name, pick) in [
        ("slope.gap", Box::new(|r: &sapd::metrics::TraceRow| r.gap) as Box<dyn Fn(&sapd::metrics::TraceRow) -> f64>),
        ("slope.subopt", Box::new(|r: &sapd::metrics::TraceRow| r.subopt)),
    ] {
        let slope = rate_fit(&trace.series(&pick), window_lo, iters as f64)
            .map(|s| json!(s))
            .unwrap_or(Value::Null);
        out.push((name.into(), slope));
    }
    for (k, v) in &trace.provenance {
        out.push((format!("instance.{k}"), json!(v)));
    }
    out
}

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let cfg = args.overrides.resolve()?;
    let mut entries = cfg.echo();

    let trace = if cfg.solver == "multisol" {
        run_multisol(&cfg, &mut entries)?
    } else {
        run_saddle(&cfg, &mut entries)?
    };

    trace
        .write_csv(&args.out_trace)
        .map_err(|e| CliError::Io(format!("cannot write trace: {e}")))?;
    entries.extend(trace_summary_entries(&trace, cfg.iters));
    write_text(&args.out_summary, &summary_to_json(entries))?;
    Ok(())
}

fn run_saddle(cfg: &RunConfig, entries: &mut Vec<(String, Value)>) -> Result<Trace, CliError> {
    let inst = build_instance(cfg)?;
    let reference = load_or_compute_reference(cfg, &inst)?;
    entries.push(("reference.provenance".into(), json!(reference.provenance)));
    entries.push(("reference.f_star".into(), json!(reference.f_star)));
    entries.push((
        "reference.low_confidence".into(),
        json!(reference.low_confidence),
    ));

    let policy = match cfg.solver.as_str() {
        "naive" => {
            let c = &inst.problem.constants;
            let alpha = cfg.alpha.unwrap_or(c.l_yx);
            let beta = cfg
                .beta
                .unwrap_or(if c.l_yy > 0.0 { 2f64.sqrt() * c.l_yy } else { 0.0 });
            let (tau, sigma, _) = step_sizes_constant(c, alpha, beta)?;
            entries.push(("steps.tau".into(), json!(tau)));
            entries.push(("steps.sigma".into(), json!(sigma)));
            StepPolicy::Constant(ConstantPolicy { tau, sigma })
        }
        "aware" => {
            let c = &inst.problem.constants;
            StepPolicy::Backtracking(BacktrackingPolicy {
                c_alpha: cfg.c_alpha.unwrap_or(if c.l_yy > 0.0 { 0.25 } else { 0.5 }),
                c_beta: cfg.c_beta.unwrap_or(if c.l_yy > 0.0 { 0.25 } else { 0.0 }),
                rho: cfg.rho,
                tau_bar: cfg.tau_bar,
                gamma0: cfg.gamma0,
                backtrack_cap: 60,
            })
        }
        other => return Err(CliError::Config(format!("solver {other:?} needs a saddle problem"))),
    };

    let mut learner = ApdLearner {
        state: LearnerState::new(inst.theta0.clone(), inst.w0.clone(), 1.0, 1.0),
        problem: build_instance(cfg)?.learning,
        config: LearnerConfig {
            rho: 0.5,
            backtrack_cap: 60,
        },
    };
    let mut builder = TraceBuilder::new(&inst, &reference)?;
    solve(
        &inst.problem,
        &mut learner,
        &policy,
        inst.x0.clone(),
        inst.y0.clone(),
        cfg.iters,
        &mut builder,
    )?;
    Ok(builder.trace)
}

fn run_multisol(cfg: &RunConfig, entries: &mut Vec<(String, Value)>) -> Result<Trace, CliError> {
    let inst = toy_multisol_instance();
    let epsilon = cfg.eps_relax.unwrap_or(1.0 / (cfg.iters as f64).sqrt());
    let ms_cfg = MultisolConfig {
        policy: BacktrackingPolicy {
            c_alpha: cfg.c_alpha.unwrap_or(0.4),
            c_beta: cfg.c_beta.unwrap_or(0.4),
            rho: cfg.rho,
            tau_bar: cfg.tau_bar,
            gamma0: cfg.gamma0,
            backtrack_cap: 60,
        },
        epsilon: Some(epsilon),
        apgd_step: None,
        dual_bound: None,
        seed: cfg.seed,
    };
    let (bound, provenance) = dual_bound_b(&inst.problem, &inst.theta0, epsilon, cfg.seed, 32)?;
    entries.push(("multisol.epsilon".into(), json!(epsilon)));
    entries.push(("multisol.dual_bound".into(), json!(bound)));
    entries.push(("multisol.dual_bound_provenance".into(), json!(provenance)));
    entries.push(("reference.provenance".into(), json!("analytic")));

    let mut builder = MultiTraceBuilder::new(&inst, epsilon, bound);
    let out = multisol_solve(
        &inst.problem,
        &ms_cfg,
        inst.x0.clone(),
        inst.y0.clone(),
        inst.theta0.clone(),
        inst.w0,
        cfg.iters,
        &mut builder,
    )?;
    entries.push(("multisol.ell_of_theta_avg".into(), json!(out.ell_of_theta_avg)));
    entries.push(("multisol.ell_star".into(), json!(inst.ell_star)));
    entries.push(("multisol.w_avg".into(), json!(out.w_avg)));
    Ok(builder.trace)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let mut labeled: Vec<(String, Trace)> = Vec::new();
    for item in &args.traces {
        let (label, path) = item.split_once('=').ok_or_else(|| {
            CliError::Config(format!("trace argument {item:?} must look like label=path"))
        })?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read trace {path}: {e}")))?;
        let trace =
            parse_trace_csv(&text).map_err(|e| CliError::Data(format!("trace {path}: {e}")))?;
        labeled.push((label.to_string(), trace));
    }
    if labeled.len() < 2 {
        return Err(CliError::Config("compare needs at least two traces".into()));
    }
    let grid: Vec<usize> = labeled[0].1.rows.iter().map(|r| r.k).collect();
    for (label, trace) in &labeled[1..] {
        let other: Vec<usize> = trace.rows.iter().map(|r| r.k).collect();
        if other != grid {
            return Err(CliError::Data(format!(
                "trace {label:?} has a different iteration grid ({} rows vs {})",
                other.len(),
                grid.len()
            )));
        }
    }
    let mut out = String::from("k");
    for (label, _) in &labeled {
        for metric in ["subopt", "infeas", "learn_residual", "gap"] {
            out.push_str(&format!(",{metric}_{label}"));
        }
    }
    out.push('\n');
    for (i, k) in grid.iter().enumerate() {
        out.push_str(&format!("{k}"));
        for (_, trace) in &labeled {
            let r = &trace.rows[i];
            out.push_str(&format!(
                ",{},{},{},{}",
                r.subopt, r.infeas, r.learn_residual, r.gap
            ));
        }
        out.push('\n');
    }
    write_text(&args.out, &out)
}

pub fn cmd_reference(args: &ReferenceArgs) -> Result<(), CliError> {
    let cfg = args.overrides.resolve()?;
    if cfg.solver == "multisol" {
        return Err(CliError::Config(
            "reference applies to the saddle problems; the multisol toy has an analytic optimum"
                .into(),
        ));
    }
    let inst = build_instance(&cfg)?;
    let reference = load_or_compute_reference(&cfg, &inst)?;
    write_text(&args.out, &format!("{}\n", serde_json::to_string_pretty(&reference).unwrap()))
}
