//! Small dense helpers generic over [`Real`]: elimination-based inverse and
//! rank, and max-norm distances. Exact scalars get exact answers.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::scalar::Real;

/// Inverse by Gauss-Jordan elimination with partial pivoting; `None` when a
/// pivot has magnitude at most `tol`.
pub fn inverse<R: Real + nalgebra::Scalar>(m: &DMatrix<R>, tol: &R) -> Option<DMatrix<R>> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "inverse of a non-square matrix");
    let mut a = m.clone();
    let mut inv = DMatrix::from_fn(n, n, |i, j| if i == j { R::one() } else { R::zero() });
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap())?;
        if a[(piv, col)].abs() <= *tol {
            return None;
        }
        a.swap_rows(col, piv);
        inv.swap_rows(col, piv);
        let p = a[(col, col)].clone();
        for j in 0..n {
            a[(col, j)] = a[(col, j)].clone() / p.clone();
            inv[(col, j)] = inv[(col, j)].clone() / p.clone();
        }
        for i in 0..n {
            if i == col || a[(i, col)].is_zero() {
                continue;
            }
            let f = a[(i, col)].clone();
            for j in 0..n {
                let da = f.clone() * a[(col, j)].clone();
                a[(i, j)] -= da;
                let di = f.clone() * inv[(col, j)].clone();
                inv[(i, j)] -= di;
            }
        }
    }
    Some(inv)
}

/// Rank by row echelon reduction, treating pivots of magnitude at most
/// `tol` as zero.
pub fn rank<R: Real + nalgebra::Scalar>(m: &DMatrix<R>, tol: &R) -> usize {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let piv = (r..rows).max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap()).unwrap();
        if a[(piv, col)].abs() <= *tol {
            continue;
        }
        a.swap_rows(r, piv);
        for i in r + 1..rows {
            if a[(i, col)].is_zero() {
                continue;
            }
            let f = a[(i, col)].clone() / a[(r, col)].clone();
            for j in col..cols {
                let d = f.clone() * a[(r, j)].clone();
                a[(i, j)] -= d;
            }
        }
        r += 1;
    }
    r
}

pub fn max_abs<R: Real + nalgebra::Scalar>(m: &DMatrix<R>) -> R {
    m.iter().fold(R::zero(), |acc, x| if x.abs() > acc { x.abs() } else { acc })
}

pub fn max_abs_diff<R: Real + nalgebra::Scalar>(a: &DMatrix<R>, b: &DMatrix<R>) -> R {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(R::zero(), |acc, (x, y)| {
        let d = (x.clone() - y.clone()).abs();
        if d > acc {
            d
        } else {
            acc
        }
    })
}

/// Converts to `f64` entrywise.
pub fn to_f64<R: Real + nalgebra::Scalar>(m: &DMatrix<R>) -> DMatrix<f64> {
    m.map(|x| x.to_f64_lossy())
}

pub fn mat_vec<R: Real + nalgebra::Scalar>(m: &DMatrix<R>, x: &[R]) -> Vec<R> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).fold(R::zero(), |acc, j| acc + m[(i, j)].clone() * x[j].clone()))
        .collect()
}

/// `x ↦ Mᵀ x`.
pub fn mat_t_vec<R: Real + nalgebra::Scalar>(m: &DMatrix<R>, x: &[R]) -> Vec<R> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).fold(R::zero(), |acc, i| acc + m[(i, j)].clone() * x[i].clone()))
        .collect()
}

pub fn identity<R: Real + nalgebra::Scalar>(n: usize) -> DMatrix<R> {
    DMatrix::from_fn(n, n, |i, j| if i == j { R::one() } else { R::zero() })
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of the Hermitian
/// matrix `iE` for a real antisymmetric `E`.
pub fn spectrum_of_ie(e: &DMatrix<f64>) -> (Vec<f64>, DMatrix<Complex<f64>>) {
    let ie = e.map(|x| Complex::new(0.0, x));
    let eig = nalgebra::SymmetricEigen::new(ie);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(e.nrows(), order.len(), |i, k| eig.eigenvectors[(i, order[k])]);
    (values, vectors)
}
