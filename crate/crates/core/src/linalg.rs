//! Dense Hermitian positive-definite solves.

use ndarray::Array2;

use crate::scalar::{Real, C};

/// Lower-triangular Cholesky factor `G` with `A = G Gᴴ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T: Real> {
    g: Array2<C<T>>,
}

impl<T: Real> Cholesky<T> {
    /// Factors the Hermitian matrix `a`; only its lower triangle is read.
    /// Returns `None` when a pivot is not strictly positive.
    pub fn factor(a: &Array2<C<T>>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(a.ncols(), n, "Cholesky needs a square matrix");
        let mut g = Array2::from_elem((n, n), C::new(T::zero(), T::zero()));
        for j in 0..n {
            let mut d = a[[j, j]].re;
            for k in 0..j {
                d = d - g[[j, k]].norm_sqr();
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            g[[j, j]] = C::new(djj, T::zero());
            for i in j + 1..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s = s - g[[i, k]] * g[[j, k]].conj();
                }
                g[[i, j]] = s / djj;
            }
        }
        Some(Self { g })
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &Array2<C<T>>) -> Array2<C<T>> {
        let n = self.g.nrows();
        assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
        let mut x = b.clone();
        for col in 0..x.ncols() {
            // forward: G w = b
            for i in 0..n {
                let mut s = x[[i, col]];
                for k in 0..i {
                    s = s - self.g[[i, k]] * x[[k, col]];
                }
                x[[i, col]] = s / self.g[[i, i]].re;
            }
            // backward: Gᴴ x = w
            for i in (0..n).rev() {
                let mut s = x[[i, col]];
                for k in i + 1..n {
                    s = s - self.g[[k, i]].conj() * x[[k, col]];
                }
                x[[i, col]] = s / self.g[[i, i]].re;
            }
        }
        x
    }
}

/// Factors `a`, adding `eps·I` (starting at 1e-12, growing tenfold) until the
/// factorization succeeds. The flag reports whether a ridge was needed.
pub fn factor_regularized<T: Real>(a: &Array2<C<T>>) -> (Cholesky<T>, bool) {
    if let Some(c) = Cholesky::factor(a) {
        return (c, false);
    }
    let mut eps = 1e-12;
    loop {
        let mut r = a.clone();
        for i in 0..r.nrows() {
            r[[i, i]] = r[[i, i]] + C::new(T::of(eps), T::zero());
        }
        if let Some(c) = Cholesky::factor(&r) {
            return (c, true);
        }
        eps *= 10.0;
        assert!(eps < 1e12, "matrix cannot be regularized to positive definite");
    }
}

/// `Aᴴ B`.
pub fn herm_mul<T: Real>(a: &Array2<C<T>>, b: &Array2<C<T>>) -> Array2<C<T>> {
    assert_eq!(a.nrows(), b.nrows());
    let (k, n) = a.dim();
    let m = b.ncols();
    let mut out = Array2::from_elem((n, m), C::new(T::zero(), T::zero()));
    for row in 0..k {
        for i in 0..n {
            let ai = a[[row, i]].conj();
            for j in 0..m {
                out[[i, j]] = out[[i, j]] + ai * b[[row, j]];
            }
        }
    }
    out
}

/// `A B`.
pub fn mul<T: Real>(a: &Array2<C<T>>, b: &Array2<C<T>>) -> Array2<C<T>> {
    assert_eq!(a.ncols(), b.nrows());
    let (n, k) = a.dim();
    let m = b.ncols();
    let mut out = Array2::from_elem((n, m), C::new(T::zero(), T::zero()));
    for i in 0..n {
        for kk in 0..k {
            let aik = a[[i, kk]];
            for j in 0..m {
                out[[i, j]] = out[[i, j]] + aik * b[[kk, j]];
            }
        }
    }
    out
}
