//! Data-parallel kernels with a sequential fallback.
//!
//! Every kernel exists in a `_seq` and (with the `parallel` feature) a `_par`
//! variant; the unsuffixed entry points dispatch on the `parallel` feature
//! and a size threshold. All parallel variants are elementwise or
//! row-partitioned, so results are bit-identical to the sequential ones.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many elements the sequential path is used even when the
/// `parallel` feature is on; rayon overhead dominates for small inputs.
pub const PAR_THRESHOLD: usize = 16_384;

pub fn map_inplace_seq(data: &mut [f64], f: impl Fn(f64) -> f64 + Sync) {
    for v in data.iter_mut() {
        *v = f(*v);
    }
}

#[cfg(feature = "parallel")]
pub fn map_inplace_par(data: &mut [f64], f: impl Fn(f64) -> f64 + Sync) {
    data.par_iter_mut().for_each(|v| *v = f(*v));
}

pub fn map_inplace(data: &mut [f64], f: impl Fn(f64) -> f64 + Sync) {
    #[cfg(feature = "parallel")]
    if data.len() >= PAR_THRESHOLD {
        return map_inplace_par(data, f);
    }
    map_inplace_seq(data, f)
}

/// Applies `f` to every off-diagonal entry of a column-major `n x n` matrix.
pub fn map_offdiag_seq(n: usize, data: &mut [f64], f: impl Fn(f64) -> f64 + Sync) {
    debug_assert_eq!(data.len(), n * n);
    for (j, col) in data.chunks_mut(n).enumerate() {
        for (i, v) in col.iter_mut().enumerate() {
            if i != j {
                *v = f(*v);
            }
        }
    }
}

#[cfg(feature = "parallel")]
pub fn map_offdiag_par(n: usize, data: &mut [f64], f: impl Fn(f64) -> f64 + Sync) {
    debug_assert_eq!(data.len(), n * n);
    data.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        for (i, v) in col.iter_mut().enumerate() {
            if i != j {
                *v = f(*v);
            }
        }
    });
}

pub fn map_offdiag(n: usize, data: &mut [f64], f: impl Fn(f64) -> f64 + Sync) {
    #[cfg(feature = "parallel")]
    if data.len() >= PAR_THRESHOLD {
        return map_offdiag_par(n, data, f);
    }
    map_offdiag_seq(n, data, f)
}

/// `y = M x` for a column-major `n x n` matrix, one row per task.
pub fn matvec_seq(n: usize, m: &[f64], x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.len(), n * n);
    debug_assert_eq!(x.len(), n);
    (0..n).map(|i| row_dot(n, m, x, i)).collect()
}

#[cfg(feature = "parallel")]
pub fn matvec_par(n: usize, m: &[f64], x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.len(), n * n);
    debug_assert_eq!(x.len(), n);
    (0..n).into_par_iter().map(|i| row_dot(n, m, x, i)).collect()
}

pub fn matvec(n: usize, m: &[f64], x: &[f64]) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    if m.len() >= PAR_THRESHOLD {
        return matvec_par(n, m, x);
    }
    matvec_seq(n, m, x)
}

#[inline]
fn row_dot(n: usize, m: &[f64], x: &[f64], i: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..n {
        acc += m[i + j * n] * x[j];
    }
    acc
}

/// Evaluates `f(i)` for `i in 0..n`, in order. Used for per-coordinate
/// finite-difference sweeps where each coordinate is independent.
pub fn tabulate_seq(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn tabulate_par(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
    (0..n).into_par_iter().map(f).collect()
}

/// Threshold is lower here: each `f(i)` is typically two full function
/// evaluations, not one flop.
pub fn tabulate(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    if n >= 64 {
        return tabulate_par(n, f);
    }
    tabulate_seq(n, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offdiag_map_leaves_diagonal() {
        let n = 3;
        let mut data: Vec<f64> = (0..9).map(|v| v as f64).collect();
        map_offdiag_seq(n, &mut data, |v| -v);
        // Column-major: diagonal entries are 0, 4, 8.
        assert_eq!(data[0], 0.0);
        assert_eq!(data[4], 4.0);
        assert_eq!(data[8], 8.0);
        assert_eq!(data[1], -1.0);
        assert_eq!(data[3], -3.0);
    }

    #[test]
    fn matvec_matches_reference() {
        let n = 4;
        let m: Vec<f64> = (0..16).map(|v| (v as f64).sin()).collect();
        let x: Vec<f64> = (0..4).map(|v| v as f64 + 0.5).collect();
        let y = matvec_seq(n, &m, &x);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += m[i + j * n] * x[j];
            }
            assert_eq!(y[i], acc);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_variants_are_bit_identical() {
        let n = 57;
        let m: Vec<f64> = (0..n * n).map(|v| ((v * 37 % 101) as f64).cos()).collect();
        let x: Vec<f64> = (0..n).map(|v| (v as f64).tan().fract()).collect();
        assert_eq!(matvec_seq(n, &m, &x), matvec_par(n, &m, &x));

        let mut a = m.clone();
        let mut b = m.clone();
        map_inplace_seq(&mut a, |v| v.exp().recip());
        map_inplace_par(&mut b, |v| v.exp().recip());
        assert_eq!(a, b);

        let mut a = m.clone();
        let mut b = m;
        map_offdiag_seq(n, &mut a, |v| v * 0.25 - 1.0);
        map_offdiag_par(n, &mut b, |v| v * 0.25 - 1.0);
        assert_eq!(a, b);
    }
}
