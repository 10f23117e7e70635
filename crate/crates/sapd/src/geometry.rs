//! Vector/matrix primitives, the squared-Euclidean Bregman distance, and the
//! projection and proximal operators used by every solver update.

use nalgebra::{DMatrix, DVector};

use crate::error::SolverError;
use crate::kernels;

/// Dense coordinate vector. Decision variables, gradients and flattened
/// symmetric matrices all use this representation.
pub type Vector = DVector<f64>;

/// Dense real symmetric matrix. Construction re-symmetrizes via
/// `(M + M^T) / 2` so floating-point drift never reaches the eigensolvers.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat {
    data: DMatrix<f64>,
}

impl SymMat {
    pub fn new(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "SymMat requires a square matrix");
        let sym = (&m + m.transpose()) * 0.5;
        assert!(
            sym.iter().all(|v| v.is_finite()),
            "SymMat entries must be finite"
        );
        SymMat { data: sym }
    }

    pub fn zeros(n: usize) -> Self {
        SymMat {
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        SymMat {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(d: &Vector) -> Self {
        SymMat {
            data: DMatrix::from_diagonal(d),
        }
    }

    /// Reinterprets a flat column-major `n*n` vector as a symmetric matrix.
    pub fn from_flat(n: usize, v: &Vector) -> Self {
        assert_eq!(v.len(), n * n, "flat vector length must be n^2");
        Self::new(DMatrix::from_column_slice(n, n, v.as_slice()))
    }

    /// Column-major flattening. The l2 norm of the result equals the
    /// Frobenius norm of the matrix, so squared-Euclidean machinery on flat
    /// vectors agrees with Frobenius geometry on matrices.
    pub fn to_flat(&self) -> Vector {
        DVector::from_column_slice(self.data.as_slice())
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.norm()
    }

    /// Symmetric eigendecomposition, (eigenvalues, eigenvectors).
    pub fn eigen(&self) -> Result<(Vector, DMatrix<f64>), SolverError> {
        let n = self.dim();
        let eig = self
            .data
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 10_000 * n.max(1))
            .ok_or(SolverError::EigenFailure { n })?;
        Ok((eig.eigenvalues, eig.eigenvectors))
    }

    pub fn min_eigenvalue(&self) -> Result<f64, SolverError> {
        let (vals, _) = self.eigen()?;
        Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// Reference geometry for Bregman distances. Only the squared-Euclidean
/// case is instantiated; it is 1-strongly convex so `D(u, v) >= ||u-v||^2/2`
/// holds with equality.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BregmanGeometry {
    #[default]
    SquaredEuclidean,
}

/// `D(u, v) = ||u - v||^2 / 2`. Panics on dimension mismatch.
pub fn bregman_dist(geom: BregmanGeometry, u: &Vector, v: &Vector) -> f64 {
    let BregmanGeometry::SquaredEuclidean = geom;
    assert_eq!(u.len(), v.len(), "bregman_dist: dimension mismatch");
    let mut acc = 0.0;
    for i in 0..u.len() {
        let d = u[i] - v[i];
        acc += d * d;
    }
    0.5 * acc
}

/// Euclidean projection onto the unit simplex, by the exact sort-and-shift
/// method. Panics on an empty vector.
pub fn project_simplex(v: &Vector) -> Vector {
    assert!(!v.is_empty(), "project_simplex: empty vector");
    let n = v.len();
    let mut sorted: Vec<f64> = v.iter().cloned().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("non-finite entry"));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j as f64 + 1.0);
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }
    let mut out = v.clone();
    for i in 0..n {
        out[i] = (v[i] - shift).max(0.0);
    }
    out
}

/// Componentwise `max(v_i, 0)`.
pub fn project_nonneg(v: &Vector) -> Vector {
    let mut out = v.clone();
    kernels::map_inplace(out.as_mut_slice(), |x| x.max(0.0));
    out
}

/// Scalar clamp onto `[lo, hi]`. Panics when `lo > hi`.
pub fn project_box(v: f64, lo: f64, hi: f64) -> f64 {
    assert!(lo <= hi, "project_box: lo > hi");
    v.clamp(lo, hi)
}

/// Frobenius projection onto `{X : X >= floor * I}` via symmetric
/// eigendecomposition: eigenvalues are clamped at `floor` and the matrix is
/// reassembled.
pub fn project_psd_floor(m: &SymMat, floor: f64) -> Result<SymMat, SolverError> {
    assert!(floor >= 0.0, "project_psd_floor: negative floor");
    let (mut vals, vecs) = m.eigen()?;
    let mut clamped = false;
    for v in vals.iter_mut() {
        if *v < floor {
            *v = floor;
            clamped = true;
        }
    }
    if !clamped {
        return Ok(m.clone());
    }
    let scaled = &vecs * DMatrix::from_diagonal(&vals);
    Ok(SymMat::new(scaled * vecs.transpose()))
}

/// Proximal map of `v * ||.||_{1,offdiag}` with step `weight`: shrinks every
/// off-diagonal entry toward zero by `v * weight`, leaving the diagonal
/// untouched.
pub fn soft_threshold_offdiag(m: &SymMat, v: f64, weight: f64) -> SymMat {
    assert!(v >= 0.0, "soft_threshold_offdiag: negative level");
    assert!(weight > 0.0, "soft_threshold_offdiag: nonpositive weight");
    let n = m.dim();
    let amount = v * weight;
    let mut data = m.as_matrix().clone();
    kernels::map_offdiag(n, data.as_mut_slice(), |x| {
        x.signum() * (x.abs() - amount).max(0.0)
    });
    SymMat { data }
}

/// A convex function whose proximal map is available in closed form.
///
/// `prox(p, step)` returns `argmin_x { f(x) + ||x - p||^2 / (2 step) }`,
/// and `eval` returns the function value (infinite outside an indicator's
/// set, tested up to a small tolerance).
pub trait Proxable: Send + Sync {
    fn prox(&self, point: &Vector, step: f64) -> Vector;
    fn eval(&self, point: &Vector) -> f64;
}

const FEAS_TOL: f64 = 1e-9;

/// The zero function; its prox is the identity.
pub struct ZeroFn;

impl Proxable for ZeroFn {
    fn prox(&self, point: &Vector, _step: f64) -> Vector {
        point.clone()
    }
    fn eval(&self, _point: &Vector) -> f64 {
        0.0
    }
}

/// Indicator of the unit simplex.
pub struct SimplexSet;

impl Proxable for SimplexSet {
    fn prox(&self, point: &Vector, _step: f64) -> Vector {
        project_simplex(point)
    }
    fn eval(&self, point: &Vector) -> f64 {
        let sum: f64 = point.iter().sum();
        let nonneg = point.iter().all(|&x| x >= -FEAS_TOL);
        if nonneg && (sum - 1.0).abs() <= FEAS_TOL * point.len() as f64 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Indicator of the box `[lo, hi]^n` (use `hi = f64::INFINITY` for a
/// one-sided constraint).
pub struct BoxSet {
    pub lo: f64,
    pub hi: f64,
}

impl Proxable for BoxSet {
    fn prox(&self, point: &Vector, _step: f64) -> Vector {
        let mut out = point.clone();
        let (lo, hi) = (self.lo, self.hi);
        kernels::map_inplace(out.as_mut_slice(), |x| x.clamp(lo, hi));
        out
    }
    fn eval(&self, point: &Vector) -> f64 {
        let inside = point
            .iter()
            .all(|&x| x >= self.lo - FEAS_TOL && x <= self.hi + FEAS_TOL);
        if inside {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `v * ||.||_1` over the off-diagonal entries of a flattened `n x n`
/// symmetric matrix.
pub struct OffdiagL1 {
    pub n: usize,
    pub level: f64,
}

impl Proxable for OffdiagL1 {
    fn prox(&self, point: &Vector, step: f64) -> Vector {
        if self.level == 0.0 {
            return point.clone();
        }
        soft_threshold_offdiag(&SymMat::from_flat(self.n, point), self.level, step).to_flat()
    }
    fn eval(&self, point: &Vector) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    acc += point[i + j * n].abs();
                }
            }
        }
        self.level * acc
    }
}

/// Indicator of the positive semidefinite cone over flattened `n x n`
/// symmetric matrices.
pub struct PsdCone {
    pub n: usize,
}

impl Proxable for PsdCone {
    fn prox(&self, point: &Vector, _step: f64) -> Vector {
        let m = SymMat::from_flat(self.n, point);
        project_psd_floor(&m, 0.0)
            .expect("eigendecomposition failed in PSD projection")
            .to_flat()
    }
    fn eval(&self, point: &Vector) -> f64 {
        let m = SymMat::from_flat(self.n, point);
        let lmin = m
            .min_eigenvalue()
            .expect("eigendecomposition failed in PSD membership test");
        if lmin >= -FEAS_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `argmin_x { f(x) + <gradient_term, x> + D(x, anchor) / step }`.
///
/// In the squared-Euclidean geometry this composes a gradient step with the
/// proximal map of `f`.
pub fn prox_step(
    geom: BregmanGeometry,
    f: &dyn Proxable,
    gradient_term: &Vector,
    anchor: &Vector,
    step: f64,
) -> Vector {
    let BregmanGeometry::SquaredEuclidean = geom;
    assert!(step > 0.0, "prox_step: nonpositive step");
    assert_eq!(
        gradient_term.len(),
        anchor.len(),
        "prox_step: dimension mismatch"
    );
    f.prox(&(anchor - gradient_term * step), step)
}

/// Spectral norm of a rectangular matrix by power iteration on `A^T A`,
/// with a deterministic start vector.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0) * 1e-3);
    v /= v.norm();
    let mut last = 0.0;
    for _ in 0..500 {
        let w = a.transpose() * (a * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let est = norm.sqrt();
        if (est - last).abs() <= 1e-12 * est.max(1.0) {
            return est;
        }
        last = est;
    }
    last
}
