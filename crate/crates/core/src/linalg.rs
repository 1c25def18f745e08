//! Dense Hermitian helpers on top of nalgebra.

use nalgebra::{Cholesky, Complex, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{real, CMatrix, Real};

/// Relative diagonal loading applied when a factorization fails.
const JITTER: f64 = 1e-12;

/// Real part of the trace.
pub fn trace_re<T: Real>(a: &CMatrix<T>) -> T {
    a.diagonal().iter().fold(T::zero(), |acc, z| acc + z.re)
}

/// Squared Frobenius norm.
pub fn frobenius_sq<T: Real>(a: &CMatrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    (a + a.adjoint()) * real(T::lit(0.5))
}

fn cholesky<T: Real>(a: &CMatrix<T>) -> Option<Cholesky<Complex<T>, Dyn>> {
    Cholesky::new(hermitian_part(a))
}

/// Solves `A X = B` for Hermitian positive (semi)definite `A`.
///
/// A plain Cholesky factorization is attempted first; on failure the
/// diagonal is loaded with `1e-12 * tr(A) / n` and the factorization retried
/// once.
pub fn hermitian_solve<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, what: &'static str) -> Result<CMatrix<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(format!(
            "{what}: system {}x{}, right-hand side {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if n == 0 {
        return Ok(b.clone());
    }
    if let Some(chol) = cholesky(a) {
        return Ok(chol.solve(b));
    }
    let load = T::lit(JITTER) * trace_re(a) / T::from_count(n);
    if load > T::zero() {
        let mut loaded = a.clone();
        for i in 0..n {
            loaded[(i, i)] += real(load);
        }
        if let Some(chol) = cholesky(&loaded) {
            return Ok(chol.solve(b));
        }
    }
    Err(Error::Singular(what))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues<T: Real>(a: &CMatrix<T>) -> DVector<T> {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut vals: Vec<T> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    DVector::from_vec(vals)
}

/// Hermitian square root `V diag(sqrt(max(λ, 0))) Vᴴ`.
pub fn hermitian_sqrt<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    // eigenvalues at rounding level are treated as exact zeros
    let top = eig.eigenvalues.iter().fold(T::zero(), |m, &l| m.max(l.abs()));
    let floor = top * T::default_epsilon() * T::from_count(4 * n);
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = if lambda > floor { lambda.sqrt() } else { T::zero() };
        scaled.column_mut(j).iter_mut().for_each(|z| *z = z.scale(s));
    }
    &scaled * eig.eigenvectors.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn sample_psd() -> CMatrix<f64> {
        let a = CMatrix::<f64>::from_fn(4, 3, |i, j| cplx((i + 2 * j) as f64 * 0.3 - 0.5, (i as f64 - j as f64) * 0.2));
        &a * a.adjoint() + CMatrix::identity(4, 4) * real(0.1)
    }

    #[test]
    fn solve_matches_product() {
        let a = sample_psd();
        let b = CMatrix::<f64>::from_fn(4, 2, |i, j| cplx(i as f64 + 1.0, j as f64 - 0.5));
        let x = hermitian_solve(&a, &b, "test").unwrap();
        assert!(frobenius_sq(&(&a * &x - &b)) < 1e-20);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = sample_psd();
        let r = hermitian_sqrt(&a);
        assert!(frobenius_sq(&(&r * &r - &a)).sqrt() < 1e-12);
        assert!(frobenius_sq(&(&r - r.adjoint())) < 1e-24);
    }

    #[test]
    fn sqrt_of_zero_is_zero() {
        let z = CMatrix::<f64>::zeros(3, 3);
        assert_eq!(hermitian_sqrt(&z), z);
    }

    #[test]
    fn singular_zero_system_is_reported() {
        let z = CMatrix::<f64>::zeros(2, 2);
        let b = CMatrix::<f64>::identity(2, 1);
        assert_eq!(hermitian_solve(&z, &b, "zero"), Err(Error::Singular("zero")));
    }

    #[test]
    fn rank_deficient_system_uses_loading() {
        let v = CMatrix::<f64>::from_column_slice(2, 1, &[cplx(1.0, 0.0), cplx(0.0, 1.0)]);
        let a = &v * v.adjoint();
        assert!(hermitian_solve(&a, &v, "rank-one").is_ok());
    }
}
