//! Markowitz portfolio instance with sparse covariance selection as the
//! learning side, synthetic data generation, returns-CSV ingestion, and the
//! small closed-form instances used for validation.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::SolverError;
use crate::geometry::{
    spectral_norm, BoxSet, OffdiagL1, Proxable, PsdCone, SimplexSet, SymMat, Vector,
};
use crate::kernels;
use crate::problem::{
    LearningProblem, LipschitzConstants, SaddleProblem, StructuredConstants, StructuredProblem,
};

/// Errors from dataset ingestion, each carrying enough position context to
/// locate the offending cell.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("returns file is empty")]
    Empty,
    #[error("row {row} has {got} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-numeric cell at row {row}, column {col}: {content:?}")]
    NonNumeric {
        row: usize,
        col: usize,
        content: String,
    },
    #[error("need at least 2 observation rows, found {0}")]
    TooFewRows(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Weekly return observations: `T x n`, one row per period.
#[derive(Clone, Debug)]
pub struct ReturnsDataset {
    pub returns: DMatrix<f64>,
    pub tickers: Vec<String>,
}

/// Parses a returns CSV: a header row of ticker labels followed by one
/// comma-separated row of decimal returns per period. Row and column
/// numbers in errors are 1-based over the whole file.
pub fn load_returns_csv(path: &Path) -> Result<ReturnsDataset, DataError> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(DataError::Empty),
    };
    let tickers: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if tickers.is_empty() || tickers.iter().all(|t| t.is_empty()) {
        return Err(DataError::Empty);
    }
    let n = tickers.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let file_row = idx + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n {
            return Err(DataError::RaggedRow {
                row: file_row,
                expected: n,
                got: cells.len(),
            });
        }
        let mut parsed = Vec::with_capacity(n);
        for (col, cell) in cells.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| DataError::NonNumeric {
                row: file_row,
                col: col + 1,
                content: cell.trim().to_string(),
            })?;
            parsed.push(value);
        }
        rows.push(parsed);
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let t = rows.len();
    let returns = DMatrix::from_fn(t, n, |i, j| rows[i][j]);
    Ok(ReturnsDataset { returns, tickers })
}

/// Writes the dataset in the same format `load_returns_csv` reads.
pub fn write_returns_csv(path: &Path, ds: &ReturnsDataset) -> Result<(), DataError> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "{}", ds.tickers.join(","))?;
    for i in 0..ds.returns.nrows() {
        let row: Vec<String> = (0..ds.returns.ncols())
            .map(|j| format!("{}", ds.returns[(i, j)]))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Per-asset mean and unbiased sample covariance (divisor `T - 1`).
pub fn sample_stats(ds: &ReturnsDataset) -> Result<(Vector, SymMat), DataError> {
    let t = ds.returns.nrows();
    let n = ds.returns.ncols();
    if t < 2 {
        return Err(DataError::TooFewRows(t));
    }
    let mut mean = Vector::zeros(n);
    for j in 0..n {
        mean[j] = ds.returns.column(j).sum() / t as f64;
    }
    let mut centered = ds.returns.clone();
    for i in 0..t {
        for j in 0..n {
            centered[(i, j)] -= mean[j];
        }
    }
    let cov = centered.transpose() * &centered / (t as f64 - 1.0);
    Ok((mean, SymMat::new(cov)))
}

/// One Markowitz/SCS problem instance.
#[derive(Clone, Debug)]
pub struct PortfolioInstance {
    pub mu: Vector,
    pub kappa: f64,
    /// 0/1 sector membership, one row per sector.
    pub sector_a: DMatrix<f64>,
    /// Sector caps.
    pub sector_b: Vector,
    pub sample_cov: SymMat,
    /// Off-diagonal l1 weight of the covariance estimator.
    pub v: f64,
    /// Eigenvalue floor of the covariance estimator.
    pub eps_psd: f64,
    /// Box bound on the sector multipliers.
    pub y_cap: f64,
}

pub const DEFAULT_V: f64 = 0.4;
pub const DEFAULT_KAPPA: f64 = 0.1;
pub const DEFAULT_EPS_PSD: f64 = 0.1;
pub const DEFAULT_Y_CAP: f64 = 1e3;

/// Contiguous sector blocks: `s` groups of nearly equal size with caps
/// `2/s`, so the sector constraints are feasible but active.
pub fn contiguous_sectors(n: usize, s: usize) -> (DMatrix<f64>, Vector) {
    assert!(s >= 1 && s <= n);
    let mut a = DMatrix::zeros(s, n);
    for i in 0..n {
        let j = (i * s / n).min(s - 1);
        a[(j, i)] = 1.0;
    }
    let b = Vector::from_element(s, 2.0 / s as f64);
    (a, b)
}

/// Synthetic market: banded true covariance
/// `sigma_ij = max(1 - |i - j| / 10, 0)`, uniform mean on `[-1, 1]^n`,
/// `p = n/2` Gaussian samples, and contiguous sectors. Deterministic under
/// the seed.
pub fn synthetic_instance(
    n: usize,
    s: usize,
    seed: u64,
) -> Result<(PortfolioInstance, ReturnsDataset, SymMat, Vector), SolverError> {
    if n < 2 || n % 2 != 0 {
        return Err(SolverError::InvalidInput(format!(
            "synthetic instance needs even n >= 2, got {n}"
        )));
    }
    if s == 0 || s > n {
        return Err(SolverError::InvalidInput(format!(
            "sector count must lie in 1..=n, got {s}"
        )));
    }
    let sigma0 = SymMat::new(DMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j) as f64;
        (1.0 - d / 10.0).max(0.0)
    }));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu0 = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));

    // The banded matrix is PSD but can be numerically singular.
    let jittered = sigma0.as_matrix() + DMatrix::identity(n, n) * 1e-12;
    let chol = jittered
        .cholesky()
        .ok_or_else(|| SolverError::InvalidInput("true covariance is not PSD".into()))?;
    let l = chol.l();
    let p = n / 2;
    let mut returns = DMatrix::zeros(p, n);
    for i in 0..p {
        let z = gaussian_vector(&mut rng, n);
        let r = &mu0 + &l * z;
        for j in 0..n {
            returns[(i, j)] = r[j];
        }
    }
    let tickers: Vec<String> = (1..=n).map(|i| format!("A{i:04}")).collect();
    let ds = ReturnsDataset { returns, tickers };
    let (_, sample_cov) = sample_stats(&ds).map_err(|e| SolverError::InvalidInput(e.to_string()))?;
    let (sector_a, sector_b) = contiguous_sectors(n, s);
    let inst = PortfolioInstance {
        mu: mu0.clone(),
        kappa: DEFAULT_KAPPA,
        sector_a,
        sector_b,
        sample_cov,
        v: DEFAULT_V,
        eps_psd: DEFAULT_EPS_PSD,
        y_cap: DEFAULT_Y_CAP,
    };
    Ok((inst, ds, sigma0, mu0))
}

/// Standard normal draws via Box-Muller, avoiding an extra dependency and
/// keeping the stream reproducible.
fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    let mut out = Vector::zeros(n);
    let mut i = 0;
    while i < n {
        let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        out[i] = radius * angle.cos();
        i += 1;
        if i < n {
            out[i] = radius * angle.sin();
            i += 1;
        }
    }
    out
}

/// Builds the saddle side: `phi(x, y; Sigma) = x' Sigma x / 2 - kappa mu' x
/// + y' (A x - b)` with the simplex as the primal domain and a box on the
/// sector multipliers.
///
/// `L_xx` is a static envelope `2 (||S||_2 + v n + eps)` dominating the
/// spectral norm of any covariance the learner can produce; only the
/// constant-step solver consumes it.
pub fn build_markowitz_sp(inst: &PortfolioInstance) -> Result<SaddleProblem, SolverError> {
    let n = inst.mu.len();
    let s = inst.sector_a.nrows();
    if inst.sector_a.ncols() != n {
        return Err(SolverError::InvalidInput(
            "sector matrix width must match asset count".into(),
        ));
    }
    for j in 0..s {
        if inst.sector_a.row(j).iter().all(|v| *v == 0.0) {
            return Err(SolverError::InvalidInput(format!(
                "sector row {j} is all zero"
            )));
        }
    }
    let l_yx = spectral_norm(&inst.sector_a);
    let l_xx = 2.0 * (spectral_norm(inst.sample_cov.as_matrix()) + inst.v * n as f64 + inst.eps_psd);
    let constants = LipschitzConstants::new(l_xx, l_yx, 0.0, 1.0, 0.0, 0.5);

    let a1 = inst.sector_a.clone();
    let a2 = inst.sector_a.clone();
    let a3 = inst.sector_a.clone();
    let b1 = inst.sector_b.clone();
    let b2 = inst.sector_b.clone();
    let mu1 = inst.mu.clone();
    let mu2 = inst.mu.clone();
    let mu3 = inst.mu.clone();
    let kappa = inst.kappa;

    let quad = move |x: &Vector, theta: &Vector| -> f64 {
        let sx = kernels::matvec(x.len(), theta.as_slice(), x.as_slice());
        let mut acc = 0.0;
        for i in 0..x.len() {
            acc += x[i] * sx[i];
        }
        0.5 * acc
    };
    let quad_phi = quad.clone();
    let quad_obj = quad;

    Ok(SaddleProblem {
        x_dim: n,
        y_dim: s,
        theta_dim: n * n,
        phi: Box::new(move |x, y, theta| {
            quad_phi(x, theta) - kappa * mu1.dot(x) + y.dot(&(&a1 * x - &b1))
        }),
        grad_x: Box::new(move |x, y, theta| {
            let sx = kernels::matvec(x.len(), theta.as_slice(), x.as_slice());
            Vector::from_vec(sx) - &mu2 * kappa + a2.transpose() * y
        }),
        grad_y: Box::new(move |x, _, _| &a3 * x - &b2),
        prox_f: Box::new(SimplexSet),
        prox_h: Box::new(BoxSet {
            lo: 0.0,
            hi: inst.y_cap,
        }),
        constants,
        objective: Some(Box::new(move |x, theta| {
            quad_obj(x, theta) - kappa * mu3.dot(x)
        })),
    })
}

/// Builds the learning side: sparse covariance selection. The estimate is
/// fit to the sample covariance in Frobenius norm with off-diagonal l1
/// shrinkage, and the eigenvalue floor enters through a PSD multiplier
/// block: `loss(Sigma, W) = ||Sigma - S||_F^2 / 2 - <W, Sigma - eps I>`.
pub fn build_scs_learning(inst: &PortfolioInstance) -> LearningProblem {
    let n = inst.sample_cov.dim();
    let s_flat = inst.sample_cov.to_flat();
    let floor_flat = SymMat::identity(n).to_flat() * inst.eps_psd;
    let s1 = s_flat.clone();
    let s2 = s_flat;
    let f1 = floor_flat.clone();
    let f2 = floor_flat;
    LearningProblem {
        theta_dim: n * n,
        w_dim: n * n,
        loss: Box::new(move |theta, w| {
            0.5 * (theta - &s1).norm_squared() - w.dot(&(theta - &f1))
        }),
        grad_theta: Box::new(move |theta, w| theta - &s2 - w),
        grad_w: Box::new(move |theta, _| -(theta - &f2)),
        prox_fprime: Box::new(OffdiagL1 {
            n,
            level: inst.v,
        }),
        prox_hprime: Box::new(PsdCone { n }),
        strong_convexity: 1.0,
    }
}

/// Analytic reference attached to instances that have one.
#[derive(Clone, Debug)]
pub struct AnalyticSolution {
    pub theta_star: Vector,
    pub x_star: Vector,
    pub y_star: Vector,
    pub f_star: f64,
}

pub type GapFn = Box<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;

/// A ready-to-solve bundle: both problem sides, starting points, optional
/// analytic reference and gap, and provenance notes for the trace header.
pub struct SaddleInstance {
    pub label: String,
    pub problem: SaddleProblem,
    pub learning: LearningProblem,
    pub x0: Vector,
    pub y0: Vector,
    pub theta0: Vector,
    pub w0: Vector,
    pub sectors: Option<(DMatrix<f64>, Vector)>,
    pub analytic: Option<AnalyticSolution>,
    /// Exact gap function over the instance's compact domain, when the
    /// supremum has a closed form.
    pub analytic_gap: Option<GapFn>,
    pub provenance: BTreeMap<String, String>,
}

/// Bundles the Markowitz saddle problem with its SCS learner. The learner
/// starts from the sample covariance with a zero multiplier; the portfolio
/// starts concentrated in the first asset so the sector constraints bind.
pub fn markowitz_instance(inst: &PortfolioInstance) -> Result<SaddleInstance, SolverError> {
    let problem = build_markowitz_sp(inst)?;
    let learning = build_scs_learning(inst);
    let n = inst.mu.len();
    let mut x0 = Vector::zeros(n);
    x0[0] = 1.0;
    let y0 = Vector::zeros(inst.sector_a.nrows());
    let theta0 = inst.sample_cov.to_flat();
    let w0 = Vector::zeros(n * n);
    let mut provenance = BTreeMap::new();
    provenance.insert("instance".into(), "portfolio".into());
    provenance.insert("l_xx_envelope".into(), format!("{}", problem.constants.l_xx));
    provenance.insert("kappa".into(), format!("{}", inst.kappa));
    provenance.insert("v".into(), format!("{}", inst.v));
    provenance.insert("eps_psd".into(), format!("{}", inst.eps_psd));
    provenance.insert("y_cap".into(), format!("{}", inst.y_cap));
    provenance.insert("sectors".into(), format!("{}", inst.sector_a.nrows()));
    Ok(SaddleInstance {
        label: "portfolio".into(),
        problem,
        learning,
        x0,
        y0,
        theta0,
        w0,
        sectors: Some((inst.sector_a.clone(), inst.sector_b.clone())),
        analytic: None,
        analytic_gap: None,
        provenance,
    })
}

/// Bilinear toy with an interior saddle: `phi = theta x y + 2x - 2y` on
/// box domains `[-5, 5]`, learning `ell(theta) = (theta - 2)^2 / 2`. The
/// saddle at `theta* = 2` is `(x*, y*) = (1, -1)` from the stationarity
/// conditions, and the gap over the box has the closed form used here.
pub fn toy_saddle_instance() -> SaddleInstance {
    const THETA_STAR: f64 = 2.0;
    let problem = SaddleProblem {
        x_dim: 1,
        y_dim: 1,
        theta_dim: 1,
        phi: Box::new(|x, y, t| t[0] * x[0] * y[0] + 2.0 * x[0] - 2.0 * y[0]),
        grad_x: Box::new(|_, y, t| Vector::from_vec(vec![t[0] * y[0] + 2.0])),
        grad_y: Box::new(|x, _, t| Vector::from_vec(vec![t[0] * x[0] - 2.0])),
        prox_f: Box::new(BoxSet { lo: -5.0, hi: 5.0 }),
        prox_h: Box::new(BoxSet { lo: -5.0, hi: 5.0 }),
        // Bilinear coupling: L_yx = sup |theta| over the parameter box
        // [0, 3], L_xtheta = sup |y| and L_ytheta = sup |x| over the
        // [-5, 5] decision boxes, L_phitheta = sup |x y|.
        constants: LipschitzConstants::new(0.0, 3.0, 0.0, 5.0, 5.0, 25.0),
        objective: Some(Box::new(|x, t| {
            // F(x; theta) = max_y in box of phi = 2x + 5 |theta x - 2|.
            2.0 * x[0] + 5.0 * (t[0] * x[0] - 2.0).abs()
        })),
    };
    let learning = LearningProblem {
        theta_dim: 1,
        w_dim: 0,
        loss: Box::new(|t, _| 0.5 * (t[0] - THETA_STAR) * (t[0] - THETA_STAR)),
        grad_theta: Box::new(|t, _| Vector::from_vec(vec![t[0] - THETA_STAR])),
        grad_w: Box::new(|_, _| Vector::zeros(0)),
        prox_fprime: Box::new(BoxSet { lo: 0.0, hi: 3.0 }),
        prox_hprime: Box::new(crate::geometry::ZeroFn),
        strong_convexity: 1.0,
    };
    let mut provenance = BTreeMap::new();
    provenance.insert("instance".into(), "toy-saddle".into());
    provenance.insert("theta_star".into(), format!("{THETA_STAR}"));
    SaddleInstance {
        label: "toy-saddle".into(),
        problem,
        learning,
        x0: Vector::zeros(1),
        y0: Vector::zeros(1),
        theta0: Vector::from_vec(vec![1.0]),
        w0: Vector::zeros(0),
        sectors: None,
        analytic: Some(AnalyticSolution {
            theta_star: Vector::from_vec(vec![THETA_STAR]),
            x_star: Vector::from_vec(vec![1.0]),
            y_star: Vector::from_vec(vec![-1.0]),
            f_star: 2.0,
        }),
        analytic_gap: Some(Box::new(|x, y| {
            // sup over the box of L(x_bar, .) minus inf over the box of
            // L(., y_bar) at theta* = 2; both extrema are closed-form for
            // the bilinear coupling.
            let sup_y = 2.0 * x[0] + 5.0 * (THETA_STAR * x[0] - 2.0).abs();
            let inf_x = -2.0 * y[0] - 5.0 * (THETA_STAR * y[0] + 2.0).abs();
            sup_y - inf_x
        })),
        provenance,
    }
}

/// Everything the multiple-solutions validation run needs.
pub struct MultisolInstance {
    pub label: String,
    pub problem: StructuredProblem,
    pub x0: Vector,
    pub y0: Vector,
    pub theta0: Vector,
    pub w0: f64,
    /// Optimal learning value, from least squares.
    pub ell_star: f64,
    pub sectors: Option<(DMatrix<f64>, Vector)>,
    /// Exact gap over the compact product domain, parameterized by the
    /// run's epsilon and dual bound: `(x_avg, w_avg, y_avg, theta_avg,
    /// epsilon, bound) -> gap`.
    pub analytic_gap: Box<dyn Fn(&Vector, f64, &Vector, &Vector, f64, f64) -> f64 + Send + Sync>,
    pub provenance: BTreeMap<String, String>,
}

/// Structured toy whose learning problem has a segment of minimizers:
/// `ell(theta) = ||P theta - q||^2 / 2` with rank-deficient `P`, so
/// `argmin = {(1, t) : t in [-2, 2]}` over the box and `ell* = 0`.
pub fn toy_multisol_instance() -> MultisolInstance {
    let m = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.5, 0.5, 0.3, -0.2]);
    let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
    let b = Vector::from_vec(vec![0.7]);
    let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let q = Vector::from_vec(vec![1.0, 0.0]);
    let y_cap = 10.0;
    let theta_box = BoxSet { lo: -2.0, hi: 2.0 };

    let norm_m = spectral_norm(&m);
    let norm_a = spectral_norm(&a);
    let norm_ptp = spectral_norm(&(p.transpose() * &p));
    // sup_theta ||grad ell|| over the box: |theta_1 - 1| <= 3.
    let ell_w = 3.0;

    let (m1, m2, m3) = (m.clone(), m.clone(), m.clone());
    let (a1, a2, a3) = (a.clone(), a.clone(), a.clone());
    let (b1, b2) = (b.clone(), b.clone());
    let (p1, p2, p3) = (p.clone(), p.clone(), p.clone());
    let (q1, q2) = (q.clone(), q.clone());

    // Dual-bound numerator by vertex enumeration: g1 is linear in x, so the
    // supremum over the simplex sits at a vertex, and the box infimum over
    // theta is coordinatewise. With theta_S = (1, 0) the maximum is 4.
    let dual_hint = 4.0;

    let problem = StructuredProblem {
        x_dim: 3,
        y_dim: 1,
        theta_dim: 2,
        g1: Box::new(move |x, t| (t.transpose() * &m1 * x)[(0, 0)]),
        g2: Box::new(move |x, y| (y.transpose() * (&a1 * x - &b1))[(0, 0)]),
        grad_x_g1: Box::new(move |_, t| m2.transpose() * t),
        grad_theta_g1: Box::new(move |x, _| &m3 * x),
        grad_x_g2: Box::new(move |_, y| a2.transpose() * y),
        grad_y_g2: Box::new(move |x, _| &a3 * x - &b2),
        ell: Box::new(move |t| 0.5 * (&p1 * t - &q1).norm_squared()),
        grad_ell: Box::new(move |t| p2.transpose() * (&p3 * t - &q2)),
        grad_ell_lipschitz: norm_ptp,
        epsilon: 0.1,
        project_theta: Box::new(move |t| theta_box.prox(t, 1.0)),
        prox_f: Box::new(SimplexSet),
        prox_h: Box::new(BoxSet { lo: 0.0, hi: y_cap }),
        constants: StructuredConstants {
            g1_xtheta: norm_m,
            g1_thetax: norm_m,
            g2_xy: norm_a,
            g2_yx: norm_a,
            // Per unit of multiplier; the uniform constant over [0, B]
            // scales with the dual bound.
            ell_theta: norm_ptp,
            ell_w,
            ..Default::default()
        },
        dual_bound_hint: Some(dual_hint),
    };

    let m_gap = m.clone();
    let a_gap = a.clone();
    let b_gap = b.clone();
    let analytic_gap = Box::new(
        move |x_avg: &Vector, w_avg: f64, y_avg: &Vector, theta_avg: &Vector, eps: f64, bound: f64| {
            // sup over (y, theta) of L(x_avg, w_avg, y, theta) minus
            // inf over (x, w) of L(x, w, y_avg, theta_avg), with
            // L = g1 + g2 - w (ell(theta) - ell* - eps) and ell* = 0.
            // Every block extremum is separable and closed-form.
            let mx = &m_gap * x_avg;
            let sector = &a_gap * x_avg - &b_gap;
            let sup_y: f64 = y_cap * sector.iter().map(|v| v.max(0.0)).sum::<f64>();
            let sup_t1 = max_concave_quadratic_on_box(mx[0], w_avg, eps, -2.0, 2.0);
            let sup_t2 = 2.0 * mx[1].abs();
            let sup_part = sup_y + sup_t1 + sup_t2;

            let ell_avg = 0.5 * (theta_avg[0] - 1.0) * (theta_avg[0] - 1.0);
            let mut inf_x = f64::INFINITY;
            for i in 0..3 {
                let mut x = Vector::zeros(3);
                x[i] = 1.0;
                let val = (theta_avg.transpose() * &m_gap * &x)[(0, 0)]
                    + (y_avg.transpose() * (&a_gap * &x - &b_gap))[(0, 0)];
                inf_x = inf_x.min(val);
            }
            let inf_w = -bound * (ell_avg - eps).max(0.0);
            sup_part - (inf_x + inf_w)
        },
    );

    let mut provenance = BTreeMap::new();
    provenance.insert("instance".into(), "toy-multisol".into());
    provenance.insert("ell_star".into(), "0".into());
    MultisolInstance {
        label: "toy-multisol".into(),
        problem,
        x0: Vector::from_vec(vec![1.0, 0.0, 0.0]),
        y0: Vector::zeros(1),
        theta0: Vector::zeros(2),
        w0: 0.0,
        ell_star: 0.0,
        sectors: Some((a, b)),
        analytic_gap,
        provenance,
    }
}

/// Exact maximum of `t -> c t - w ((t - 1)^2 / 2 - eps)` over `[lo, hi]`
/// for `w >= 0`; linear when `w = 0`, else the clamped vertex.
fn max_concave_quadratic_on_box(c: f64, w: f64, eps: f64, lo: f64, hi: f64) -> f64 {
    let f = |t: f64| c * t - w * (0.5 * (t - 1.0) * (t - 1.0) - eps);
    if w <= 0.0 {
        f(lo).max(f(hi))
    } else {
        f((1.0 + c / w).clamp(lo, hi))
    }
}
