//! Small dense complex matrices. Sizes here never exceed a few dozen, so
//! everything is plain row-major storage and Gaussian elimination.

use std::ops::{Index, IndexMut, Mul};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Cx, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct CMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Cx::<T>::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cx::<T>::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn try_from_fn<E>(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> std::result::Result<Cx<T>, E>,
    ) -> std::result::Result<Self, E> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j)?);
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<Cx<T>>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn diag(d: &[Cx<T>]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
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

    pub fn row(&self, i: usize) -> &[Cx<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<Cx<T>>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(Cx<T>) -> Cx<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| f(*v)).collect() }
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        self.map(|v| v * s)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + other[(i, j)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Cx<T>]) -> Vec<Cx<T>> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| self.row(i).iter().zip(v).fold(Cx::<T>::zero(), |acc, (a, b)| acc + *a * *b)).collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Solves `self * X = rhs` by partial-pivot elimination.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        assert!(self.is_square() && rhs.rows == self.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = a.max_abs();
        if scale.is_zero() || !scale.is_finite() {
            return Err(Error::SingularStab);
        }
        let tiny = scale * T::epsilon() * T::from_usize(n).unwrap_or_else(T::one);
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[(r, col)].norm() > a[(piv, col)].norm() {
                    piv = r;
                }
            }
            if a[(piv, col)].norm() <= tiny {
                return Err(Error::SingularStab);
            }
            if piv != col {
                a.swap_rows(piv, col);
                b.swap_rows(piv, col);
            }
            let p = a[(col, col)];
            for r in col + 1..n {
                let f = a[(r, col)] / p;
                if f.is_zero() {
                    continue;
                }
                for c in col..n {
                    let v = a[(col, c)];
                    a[(r, c)] = a[(r, c)] - f * v;
                }
                for c in 0..b.cols {
                    let v = b[(col, c)];
                    b[(r, c)] = b[(r, c)] - f * v;
                }
            }
        }
        for col in (0..n).rev() {
            let p = a[(col, col)];
            for c in 0..b.cols {
                let mut acc = b[(col, c)];
                for k in col + 1..n {
                    acc = acc - a[(col, k)] * b[(k, c)];
                }
                b[(col, c)] = acc / p;
            }
        }
        Ok(b)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.solve(&Self::identity(self.rows))
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    /// Entrywise `max |self - other| / max(|other|, floor)`.
    pub fn rel_diff(&self, other: &Self) -> T {
        let denom = other.max_abs().max(T::min_positive_value());
        self.sub(other).max_abs() / denom
    }
}

impl<T> Index<(usize, usize)> for CMat<T> {
    type Output = Cx<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Cx<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &CMat<T> {
    type Output = CMat<T>;
    fn mul(self, rhs: Self) -> CMat<T> {
        self.matmul(rhs)
    }
}

/// Relative difference of two complex numbers with an absolute floor.
pub fn rel_err<T: Real>(got: Cx<T>, want: Cx<T>) -> T {
    let d = (got - want).norm();
    let s = want.norm();
    if s > T::zero() {
        d / s
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn inverse_roundtrip() {
        let m = CMat::<f64>::from_rows(vec![
            vec![cx(1.0, 2.0), cx(0.5, -1.0), cx(0.0, 0.3)],
            vec![cx(-2.0, 0.1), cx(3.0, 0.0), cx(1.0, 1.0)],
            vec![cx(0.2, 0.2), cx(0.0, -4.0), cx(2.0, -0.5)],
        ]);
        let inv = m.inverse().unwrap();
        assert!(m.matmul(&inv).rel_diff(&CMat::identity(3)) < 1e-14);
    }

    #[test]
    fn singular_is_rejected() {
        let m = CMat::<f64>::from_rows(vec![vec![cx(1.0, 0.0), cx(2.0, 0.0)], vec![cx(2.0, 0.0), cx(4.0, 0.0)]]);
        assert_eq!(m.inverse(), Err(Error::SingularStab));
    }
}
