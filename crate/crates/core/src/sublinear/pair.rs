use std::ops::{Add, Neg};

use nalgebra::{DMatrix, DVector};

use super::sqrt::{frobenius_dot, symmetrize};
use crate::error::{Error, Result};

/// A gradient/Hessian pair `(p, S)` in `R^N x Sym^N`.
///
/// The inner product is `((p,S),(p',S')) = 1/2 <S,S'> + p.p'`. `S` is
/// symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPS {
    p: DVector<f64>,
    s: DMatrix<f64>,
}

impl PairPS {
    pub fn new(p: DVector<f64>, s: DMatrix<f64>) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::DimensionMismatch {
                expected: s.nrows(),
                got: s.ncols(),
            });
        }
        if s.nrows() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: s.nrows(),
            });
        }
        Ok(PairPS {
            p,
            s: symmetrize(&s),
        })
    }

    pub fn from_slices(p: &[f64], s_row_major: &[f64]) -> Result<Self> {
        let n = p.len();
        if s_row_major.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: s_row_major.len(),
            });
        }
        Self::new(
            DVector::from_column_slice(p),
            DMatrix::from_row_slice(n, n, s_row_major),
        )
    }

    pub fn zero(n: usize) -> Self {
        PairPS {
            p: DVector::zeros(n),
            s: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn inner(&self, other: &PairPS) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(0.5 * frobenius_dot(&self.s, &other.s) + self.p.dot(&other.p))
    }

    pub fn norm(&self) -> f64 {
        (0.5 * frobenius_dot(&self.s, &self.s) + self.p.dot(&self.p)).sqrt()
    }

    pub fn scale(&self, delta: f64) -> PairPS {
        PairPS {
            p: &self.p * delta,
            s: &self.s * delta,
        }
    }

    /// Dimension of the coordinate space, `N + N(N+1)/2`.
    pub fn coordinate_dim(n: usize) -> usize {
        n + n * (n + 1) / 2
    }

    /// Coordinates in an orthonormal basis of `R^N x Sym^N`, so that the
    /// pair inner product becomes the Euclidean dot product:
    /// `[p_1..p_N, S_11/sqrt2 .. S_NN/sqrt2, S_ij (i<j)]`.
    pub fn coordinates(&self) -> Vec<f64> {
        let n = self.dim();
        let mut c = Vec::with_capacity(Self::coordinate_dim(n));
        c.extend(self.p.iter().cloned());
        for i in 0..n {
            c.push(self.s[(i, i)] / std::f64::consts::SQRT_2);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                c.push(self.s[(i, j)]);
            }
        }
        c
    }

    pub fn from_coordinates(n: usize, c: &[f64]) -> Result<Self> {
        if c.len() != Self::coordinate_dim(n) {
            return Err(Error::DimensionMismatch {
                expected: Self::coordinate_dim(n),
                got: c.len(),
            });
        }
        let p = DVector::from_column_slice(&c[..n]);
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            s[(i, i)] = c[n + i] * std::f64::consts::SQRT_2;
        }
        let mut idx = 2 * n;
        for i in 0..n {
            for j in (i + 1)..n {
                s[(i, j)] = c[idx];
                s[(j, i)] = c[idx];
                idx += 1;
            }
        }
        Ok(PairPS { p, s })
    }
}

impl Add for &PairPS {
    type Output = PairPS;

    fn add(self, rhs: &PairPS) -> PairPS {
        assert_eq!(self.dim(), rhs.dim(), "pair dimensions differ");
        PairPS {
            p: &self.p + &rhs.p,
            s: &self.s + &rhs.s,
        }
    }
}

impl Neg for &PairPS {
    type Output = PairPS;

    fn neg(self) -> PairPS {
        PairPS {
            p: -&self.p,
            s: -&self.s,
        }
    }
}

/// `((p,S),(p',S'))`.
pub fn inner_ps(u: &PairPS, v: &PairPS) -> Result<f64> {
    u.inner(v)
}
