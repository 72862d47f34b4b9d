//! Small dense linear algebra on `ndarray` containers.
//!
//! The matrices handled here are tiny (channel counts, 2^M with M <= 4), so the
//! routines favour clarity over blocking.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::Real;

pub type CMatrix<T> = Array2<Complex<T>>;
pub type CVector<T> = Array1<Complex<T>>;

fn one_norm<T: Real>(a: &CMatrix<T>) -> T {
    let mut best = T::zero();
    for col in a.columns() {
        let s: T = col.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    let half = T::lit(0.5);
    let mut squarings = 0u32;
    if norm > half {
        squarings = (norm / half).log2().ceil().to_u32().unwrap_or(0);
    }
    let scale = T::lit(2.0).powi(squarings as i32);
    let scaled = a.mapv(|z| z / scale);

    let mut result = CMatrix::<T>::eye(n);
    let mut term = CMatrix::<T>::eye(n);
    let tol = T::epsilon();
    for k in 1..=30 {
        term = term.dot(&scaled).mapv(|z| z / T::of_usize(k));
        result = &result + &term;
        if one_norm(&term) <= tol * one_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

trait ToU32 {
    fn to_u32(self) -> Option<u32>;
}

impl<T: Real> ToU32 for T {
    fn to_u32(self) -> Option<u32> {
        num_traits::ToPrimitive::to_u32(&self)
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` for a numerically singular system.
pub fn solve<T: Real>(a: &CMatrix<T>, b: &CVector<T>) -> Option<CVector<T>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let (pivot, pmag) = (col..n)
            .map(|r| (r, m[[r, col]].norm()))
            .fold((col, T::zero()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if pmag <= T::min_positive_value() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap([col, k], [pivot, k]);
            }
            x.swap(col, pivot);
        }
        let d = m[[col, col]];
        for r in (col + 1)..n {
            let f = m[[r, col]] / d;
            if f.is_zero() {
                continue;
            }
            for k in col..n {
                let v = m[[col, k]];
                m[[r, k]] -= f * v;
            }
            let xv = x[col];
            x[r] -= f * xv;
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in (col + 1)..n {
            acc -= m[[col, k]] * x[k];
        }
        x[col] = acc / m[[col, col]];
    }
    Some(x)
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns.
pub fn symmetric_eigen<T: Real>(a: &Array2<T>) -> (Array1<T>, Array2<T>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<T>::eye(n);
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let diag: T = (0..n).map(|i| m[[i, i]] * m[[i, i]]).sum();
        if off <= T::epsilon() * T::epsilon() * (diag + off) || off.is_zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.is_zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta.is_zero() { T::one() } else { t };
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = cs * mkp - sn * mkq;
                    m[[k, q]] = sn * mkp + cs * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = cs * mpk - sn * mqk;
                    m[[q, k]] = sn * mpk + cs * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = cs * vkp - sn * vkq;
                    v[[k, q]] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    let evals = Array1::from_iter((0..n).map(|i| m[[i, i]]));
    (evals, v)
}

pub fn adjoint<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    a.t().mapv(|z| z.conj())
}

pub fn trace<T: Real>(a: &CMatrix<T>) -> Complex<T> {
    (0..a.nrows()).map(|i| a[[i, i]]).fold(Complex::zero(), |s, z| s + z)
}

/// Largest entry-wise deviation from the identity.
pub fn distance_from_identity<T: Real>(a: &CMatrix<T>) -> T {
    let mut worst = T::zero();
    for ((i, j), z) in a.indexed_iter() {
        let target = if i == j { Complex::one() } else { Complex::zero() };
        worst = worst.max((*z - target).norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn expm_of_diagonal_matches_scalar_exponentials() {
        let a: CMatrix<f64> = array![
            [Complex::new(-0.3, 1.2), Complex::zero()],
            [Complex::zero(), Complex::new(2.5, -0.7)]
        ];
        let e = expm(&a);
        assert!((e[[0, 0]] - a[[0, 0]].exp()).norm() < 1e-13);
        assert!((e[[1, 1]] - a[[1, 1]].exp()).norm() < 1e-12);
        assert!(e[[0, 1]].norm() < 1e-15);
    }

    #[test]
    fn expm_of_rotation_generator() {
        // exp(-i x sigma_x) = cos x I - i sin x sigma_x
        let x = 2.3_f64;
        let a: CMatrix<f64> = array![
            [Complex::zero(), Complex::new(0.0, -x)],
            [Complex::new(0.0, -x), Complex::zero()]
        ];
        let e = expm(&a);
        assert!((e[[0, 0]] - Complex::new(x.cos(), 0.0)).norm() < 1e-13);
        assert!((e[[0, 1]] - Complex::new(0.0, -x.sin())).norm() < 1e-13);
    }

    #[test]
    fn solve_recovers_known_vector() {
        let a: CMatrix<f64> = array![
            [Complex::new(0.0, 0.0), Complex::new(2.0, 1.0), Complex::new(1.0, 0.0)],
            [Complex::new(1.0, -1.0), Complex::new(0.5, 0.0), Complex::new(0.0, 3.0)],
            [Complex::new(4.0, 0.0), Complex::new(0.0, 0.0), Complex::new(1.0, 1.0)]
        ];
        let x: CVector<f64> = array![Complex::new(1.0, 2.0), Complex::new(-1.0, 0.5), Complex::new(0.3, 0.0)];
        let b = a.dot(&x);
        let got = solve(&a, &b).unwrap();
        for (g, w) in got.iter().zip(x.iter()) {
            assert!((g - w).norm() < 1e-13);
        }
    }

    #[test]
    fn solve_flags_singular() {
        let a: CMatrix<f64> = CMatrix::zeros((2, 2));
        let b: CVector<f64> = CVector::zeros(2);
        assert!(solve(&a, &b).is_none());
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = array![[2.0, 0.5, -0.3], [0.5, 1.0, 0.2], [-0.3, 0.2, 0.1_f64]];
        let (w, v) = symmetric_eigen(&a);
        let recon = v.dot(&Array2::from_diag(&w)).dot(&v.t());
        for (x, y) in recon.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
