//! Small dense matrices.
//!
//! The systems in this crate have a handful of ports, so everything here is a
//! plain row-major `Vec`. Determinant, adjugate and inverse are generic over any
//! ordered signed field, which lets the mixing step run on exact rationals as
//! well as floats.

use std::ops::{Index, IndexMut};

use num_traits::{Float, Num, Signed};

/// Ordered signed field: `f32`, `f64`, `Ratio<i64>`, ...
pub trait Field: Num + Signed + Copy + PartialOrd {}
impl<T: Num + Signed + Copy + PartialOrd> Field for T {}

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Mat<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Builds from rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix rows");
        Mat::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix with row `skip_r` and column `skip_c` removed.
    pub fn minor(&self, skip_r: usize, skip_c: usize) -> Self {
        Mat::from_fn(self.rows - 1, self.cols - 1, |i, j| {
            let ii = if i >= skip_r { i + 1 } else { i };
            let jj = if j >= skip_c { j + 1 } else { j };
            self[(ii, jj)]
        })
    }
}

impl<T: Num + Copy> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat::from_fn(rows, cols, |_, _| T::zero())
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diag(d: &[T]) -> Self {
        Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { T::zero() })
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn mul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        Mat::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).fold(T::zero(), |acc, k| acc + self[(i, k)] * other[(k, j)])
        })
    }

    pub fn scale(&self, s: T) -> Mat<T> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * s)
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &[T]) -> T {
        let mv = self.mul_vec(v);
        v.iter().zip(&mv).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Determinant. Cofactor expansion for `n <= 3`, partial-pivot elimination above.
pub fn det<T: Field>(m: &Mat<T>) -> T {
    assert!(m.is_square(), "determinant of a non-square matrix");
    match m.rows {
        0 => T::one(),
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        n => {
            let mut a = m.clone();
            let mut d = T::one();
            for k in 0..n {
                let p = (k..n)
                    .max_by(|&x, &y| {
                        a[(x, k)]
                            .abs()
                            .partial_cmp(&a[(y, k)].abs())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .unwrap_or(k);
                if a[(p, k)].is_zero() {
                    return T::zero();
                }
                if p != k {
                    for j in 0..n {
                        let tmp = a[(k, j)];
                        a[(k, j)] = a[(p, j)];
                        a[(p, j)] = tmp;
                    }
                    d = -d;
                }
                let piv = a[(k, k)];
                d = d * piv;
                for i in (k + 1)..n {
                    let f = a[(i, k)] / piv;
                    for j in k..n {
                        let v = a[(k, j)];
                        a[(i, j)] = a[(i, j)] - f * v;
                    }
                }
            }
            d
        }
    }
}

/// Adjugate (transposed cofactor matrix). Defined for singular matrices too.
pub fn adjugate<T: Field>(m: &Mat<T>) -> Mat<T> {
    assert!(m.is_square(), "adjugate of a non-square matrix");
    let n = m.rows;
    if n == 1 {
        return Mat::identity(1);
    }
    Mat::from_fn(n, n, |i, j| {
        let c = det(&m.minor(j, i));
        if (i + j) % 2 == 0 {
            c
        } else {
            -c
        }
    })
}

/// Inverse by Gauss-Jordan elimination; `None` when singular.
pub fn inverse<T: Field>(m: &Mat<T>) -> Option<Mat<T>> {
    assert!(m.is_square(), "inverse of a non-square matrix");
    let n = m.rows;
    let mut a = m.clone();
    let mut inv = Mat::identity(n);
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| {
            a[(x, k)]
                .abs()
                .partial_cmp(&a[(y, k)].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[(p, k)].is_zero() {
            return None;
        }
        for j in 0..n {
            let (t1, t2) = (a[(k, j)], inv[(k, j)]);
            a[(k, j)] = a[(p, j)];
            inv[(k, j)] = inv[(p, j)];
            a[(p, j)] = t1;
            inv[(p, j)] = t2;
        }
        let piv = a[(k, k)];
        for j in 0..n {
            a[(k, j)] = a[(k, j)] / piv;
            inv[(k, j)] = inv[(k, j)] / piv;
        }
        for i in 0..n {
            if i == k {
                continue;
            }
            let f = a[(i, k)];
            if f.is_zero() {
                continue;
            }
            for j in 0..n {
                let (ak, ik) = (a[(k, j)], inv[(k, j)]);
                a[(i, j)] = a[(i, j)] - f * ak;
                inv[(i, j)] = inv[(i, j)] - f * ik;
            }
        }
    }
    Some(inv)
}

pub fn is_symmetric<T: Float>(m: &Mat<T>, tol: T) -> bool {
    m.is_square()
        && (0..m.rows).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Float>(m: &Mat<T>) -> Vec<T> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    let n = m.rows;
    let mut a = m.clone();
    let two = T::one() + T::one();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + a[(i, j)] * a[(i, j)]);
        let scale: T = (0..n).fold(T::zero(), |acc, i| acc + a[(i, i)] * a[(i, i)]);
        if off <= T::epsilon() * T::epsilon() * (scale + off) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn det_small_and_large_agree_with_cofactor_expansion() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(det(&m), -2.0);
        let m3 = Mat::from_rows(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ]);
        assert!((det(&m3) - 4.0_f64).abs() < 1e-14);
        // 4x4 tridiagonal Laplacian has det n+1 = 5
        let m4 = Mat::from_fn(4, 4, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        assert!((det(&m4) - 5.0_f64).abs() < 1e-12);
    }

    #[test]
    fn adjugate_times_matrix_is_det_identity_exactly() {
        let r = |n: i64| Ratio::from_integer(n);
        let m = Mat::from_fn(4, 4, |i, j| r(((i * 7 + j * 3) % 5) as i64 - 2 + (i == j) as i64 * 3));
        let d = det(&m);
        let prod = adjugate(&m).mul(&m);
        assert_eq!(prod, Mat::identity(4).scale(d));
    }

    #[test]
    fn inverse_roundtrip_and_singular() {
        let m = Mat::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]);
        let inv = inverse(&m).unwrap();
        let id = m.mul(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let e: f64 = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-14);
            }
        }
        let s = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(inverse(&s).is_none());
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        let m3 = Mat::from_rows(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ]);
        let ev = symmetric_eigenvalues(&m3);
        let s2 = 2.0_f64.sqrt();
        for (got, want) in ev.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }
}
