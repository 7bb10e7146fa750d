use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Radial search range and resolution for `gamma_min`.
const RADIAL_MAX: f64 = 1e3;
const RADIAL_POINTS: usize = 1_000_001;

/// `phi(x) = (1 + |x|^2)^(c/2)` with its derivatives and the smallest
/// admissible `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthTransform {
    pub c: f64,
    pub mu: f64,
    pub ell: f64,
    pub dim: usize,
    /// `mu + ell sup_x [(1+|x|) |D phi| / phi + (1+|x|^2) |D^2 phi| / phi]`,
    /// Frobenius norm for the Hessian.
    pub gamma_min: f64,
    /// Radius where the supremum is attained.
    pub argsup: f64,
}

pub fn growth_transform(c: f64, mu: f64, ell: f64, dim: usize) -> Result<GrowthTransform> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("growth exponent must be >= 0, got {c}")));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mut t = GrowthTransform {
        c,
        mu,
        ell,
        dim,
        gamma_min: mu,
        argsup: 0.0,
    };
    let h = RADIAL_MAX / (RADIAL_POINTS - 1) as f64;
    let (mut best, mut at) = (f64::NEG_INFINITY, 0.0);
    for i in 0..RADIAL_POINTS {
        let r = i as f64 * h;
        let v = t.radial_ratio(r);
        if v > best {
            best = v;
            at = r;
        }
    }
    t.gamma_min = mu + ell * best;
    t.argsup = at;
    Ok(t)
}

impl GrowthTransform {
    /// `(1+r) |D phi|/phi + (1+r^2) |D^2 phi|_F/phi` at `|x| = r`.
    pub fn radial_ratio(&self, r: f64) -> f64 {
        let q = 1.0 + r * r;
        let grad = self.c * r / q;
        // eigenvalues of D^2 phi / phi: alpha (n-1 times) and alpha + beta r^2
        let alpha = self.c / q;
        let beta = self.c * (self.c - 2.0) / (q * q);
        let radial = alpha + beta * r * r;
        let hess = ((self.dim - 1) as f64 * alpha * alpha + radial * radial).sqrt();
        (1.0 + r) * grad + q * hess
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        (1.0 + sq(x)).powf(0.5 * self.c)
    }

    /// `c phi(x) x / (1 + |x|^2)`.
    pub fn grad_phi(&self, x: &[f64]) -> DVector<f64> {
        let s = self.c * self.phi(x) / (1.0 + sq(x));
        DVector::from_iterator(x.len(), x.iter().map(|v| s * v))
    }

    /// `phi(x) (c/(1+|x|^2) I + c(c-2)/(1+|x|^2)^2 x x^T)`.
    pub fn hess_phi(&self, x: &[f64]) -> DMatrix<f64> {
        let q = 1.0 + sq(x);
        let phi = self.phi(x);
        let v = DVector::from_column_slice(x);
        let mut h = DMatrix::identity(x.len(), x.len()) * (self.c / q);
        h += &v * v.transpose() * (self.c * (self.c - 2.0) / (q * q));
        h * phi
    }
}

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
