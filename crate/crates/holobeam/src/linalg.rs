//! Small dense linear-algebra routines shared by the solvers.
//!
//! Everything here is written for the problem sizes this crate actually
//! meets (tens to a few thousand unknowns), so plain triple loops over
//! row-major storage are good enough and keep the crate dependency-free
//! beyond `ndarray`.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
}

/// In-place lower Cholesky factorization of a symmetric positive definite
/// matrix stored row-major in `a` (n x n). Only the lower triangle is read;
/// on success it holds `L` with `A = L L^T`.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), LinalgError> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        let inv_d = 1.0 / d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            let (row_i, row_j) = (i * n, j * n);
            for k in 0..j {
                s -= a[row_i + k] * a[row_j + k];
            }
            a[i * n + j] = s * inv_d;
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` in place given the factor from [`cholesky_in_place`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    debug_assert_eq!(b.len(), n);
    // forward: L y = b
    for i in 0..n {
        let mut s = b[i];
        let row = i * n;
        for k in 0..i {
            s -= l[row + k] * b[k];
        }
        b[i] = s / l[row + i];
    }
    // backward: L^T x = y
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Lower Cholesky factor of a Hermitian positive definite complex matrix.
pub fn cholesky_complex(a: &Array2<Complex64>) -> Result<Array2<Complex64>, LinalgError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky_complex needs a square matrix");
    let mut l = Array2::<Complex64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `A x = b` for Hermitian positive definite `A` via complex Cholesky.
pub fn hermitian_solve(
    a: &Array2<Complex64>,
    b: &Array1<Complex64>,
) -> Result<Array1<Complex64>, LinalgError> {
    let l = cholesky_complex(a)?;
    Ok(cholesky_solve_complex(&l, b))
}

/// Solves `L L^H x = b` given a lower complex Cholesky factor.
pub fn cholesky_solve_complex(l: &Array2<Complex64>, b: &Array1<Complex64>) -> Array1<Complex64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)].conj() * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Watts to dBm; zero and negative map to -inf.
pub fn watts_to_dbm(p_watts: f64) -> f64 {
    if p_watts <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (p_watts * 1e3).log10()
    }
}

/// dBm to watts.
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn real_cholesky_solves_spd_system() {
        // A = M^T M + I with a fixed M
        let m = [1.0, 2.0, 0.5, -1.0, 0.3, 2.0, 0.0, 1.0, -0.7];
        let n = 3;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += m[k * n + i] * m[k * n + j];
                }
                a[i * n + j] = s;
            }
        }
        let a_copy = a.clone();
        cholesky_in_place(&mut a, n).unwrap();
        let mut x = vec![1.0, -2.0, 0.25];
        let b = x.clone();
        cholesky_solve(&a, n, &mut x);
        // check A x = b
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += a_copy[i * n + j] * x[j];
            }
            assert_relative_eq!(s, b[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn real_cholesky_rejects_indefinite() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0]; // eigenvalues 3, -1
        assert!(cholesky_in_place(&mut a, 2).is_err());
    }

    #[test]
    fn complex_cholesky_reconstructs() {
        let a = array![
            [Complex64::new(4.0, 0.0), Complex64::new(1.0, -2.0)],
            [Complex64::new(1.0, 2.0), Complex64::new(6.0, 0.0)],
        ];
        let l = cholesky_complex(&a).unwrap();
        let mut lh = l.t().to_owned();
        lh.mapv_inplace(|z| z.conj());
        let back = l.dot(&lh);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(back[(i, j)].re, a[(i, j)].re, max_relative = 1e-12);
                assert_relative_eq!(back[(i, j)].im, a[(i, j)].im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_solve_roundtrip() {
        let a = array![
            [Complex64::new(3.0, 0.0), Complex64::new(0.5, 1.0)],
            [Complex64::new(0.5, -1.0), Complex64::new(2.0, 0.0)],
        ];
        let x_true = array![Complex64::new(1.0, -1.0), Complex64::new(0.0, 2.0)];
        let b = a.dot(&x_true);
        let x = hermitian_solve(&a, &b).unwrap();
        for i in 0..2 {
            assert_relative_eq!(x[i].re, x_true[i].re, epsilon = 1e-12);
            assert_relative_eq!(x[i].im, x_true[i].im, epsilon = 1e-12);
        }
    }

    #[test]
    fn dbm_conversions() {
        assert_relative_eq!(watts_to_dbm(1e-3), 0.0, epsilon = 1e-12);
        assert_relative_eq!(dbm_to_watts(0.0), 1e-3, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(watts_to_dbm(0.02)), 0.02, max_relative = 1e-12);
    }
}
