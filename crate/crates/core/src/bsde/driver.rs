use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::CheckReport;
use crate::sublinear::{spectral_norm, Diffusion};

pub type DriverFn = Arc<dyn Fn(f64, &[f64], f64, &[f64]) -> f64 + Send + Sync>;
pub type TerminalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// BSDE driver `f(t, x, y, z)` with declared constants.
///
/// * `ell`: Lipschitz constant in `(x, z)` and linear-growth constant,
/// * `mu`: one-sided (monotonicity) constant in `y`,
/// * `lip_y`: Lipschitz constant in `y`, used by step-size guards,
/// * `lip_z`: Lipschitz constant in `z` alone.
#[derive(Clone)]
pub struct Driver {
    func: DriverFn,
    pub ell: f64,
    pub mu: f64,
    pub lip_y: f64,
    pub lip_z: f64,
    label: String,
}

impl fmt::Debug for Driver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Driver")
            .field("label", &self.label)
            .field("ell", &self.ell)
            .field("mu", &self.mu)
            .field("lip_y", &self.lip_y)
            .field("lip_z", &self.lip_z)
            .finish()
    }
}

/// Named drivers available to scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverKind {
    Zero,
    /// `-rate * y`
    Discount { rate: f64 },
    /// `c`
    Constant { c: f64 },
    /// `-rate * y + c * min(|z|_1, cap)`
    DiscountGradient { rate: f64, c: f64, cap: f64 },
}

impl Driver {
    pub fn new(
        func: DriverFn,
        ell: f64,
        mu: f64,
        lip_y: f64,
        lip_z: f64,
        label: impl Into<String>,
    ) -> Self {
        Driver {
            func,
            ell,
            mu,
            lip_y,
            lip_z,
            label: label.into(),
        }
    }

    pub fn zero() -> Self {
        Self::new(Arc::new(|_, _, _, _| 0.0), 0.0, 0.0, 0.0, 0.0, "zero")
    }

    pub fn discount(rate: f64) -> Self {
        Self::new(
            Arc::new(move |_, _, y, _| -rate * y),
            rate.abs(),
            -rate,
            rate.abs(),
            0.0,
            format!("discount({rate})"),
        )
    }

    pub fn constant(c: f64) -> Self {
        Self::new(
            Arc::new(move |_, _, _, _| c),
            c.abs(),
            0.0,
            0.0,
            0.0,
            format!("constant({c})"),
        )
    }

    pub fn discount_gradient(rate: f64, c: f64, cap: f64, dim: usize) -> Self {
        let lip_z = c.abs() * (dim as f64).sqrt();
        Self::new(
            Arc::new(move |_, _, y, z: &[f64]| {
                let l1: f64 = z.iter().map(|v| v.abs()).sum();
                -rate * y + c * l1.min(cap)
            }),
            rate.abs().max(lip_z).max(c.abs() * cap),
            -rate,
            rate.abs(),
            lip_z,
            format!("discount_gradient({rate},{c},{cap})"),
        )
    }

    pub fn from_kind(kind: DriverKind, dim: usize) -> Result<Self> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("driver parameter {name} must be finite")))
            }
        };
        match kind {
            DriverKind::Zero => Ok(Self::zero()),
            DriverKind::Discount { rate } => {
                finite(rate, "rate")?;
                Ok(Self::discount(rate))
            }
            DriverKind::Constant { c } => {
                finite(c, "c")?;
                Ok(Self::constant(c))
            }
            DriverKind::DiscountGradient { rate, c, cap } => {
                finite(rate, "rate")?;
                finite(c, "c")?;
                if !(cap >= 0.0 && cap.is_finite()) {
                    return Err(Error::InvalidArgument("driver cap must be finite and >= 0".into()));
                }
                Ok(Self::discount_gradient(rate, c, cap, dim))
            }
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64], y: f64, z: &[f64]) -> f64 {
        (self.func)(t, x, y, z)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `f + c`.
    pub fn shifted(&self, c: f64) -> Driver {
        let inner = self.func.clone();
        Driver::new(
            Arc::new(move |t, x, y, z| inner(t, x, y, z) + c),
            self.ell + c.abs(),
            self.mu,
            self.lip_y,
            self.lip_z,
            format!("{}+{c}", self.label),
        )
    }

    /// Sampled audit of the declared constants on `(t, x, y, z)` pairs.
    pub fn check_constants(&self, samples: &[(f64, Vec<f64>, f64, Vec<f64>)]) -> CheckReport {
        let mut r = CheckReport::new();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for (i, (t, x, y, z)) in samples.iter().enumerate() {
            let f0 = self.eval(*t, x, *y, z);
            let growth = self.ell.max(self.lip_y) * (1.0 + norm(x) + y.abs() + norm(z));
            r.record_le(i, "growth", f0.abs(), growth, 1e-12);
            for (j, (_, x2, y2, z2)) in samples.iter().enumerate().skip(i + 1).take(4) {
                let fxz = self.eval(*t, x2, *y, z2);
                let dxz = norm(&diff(x, x2)) + norm(&diff(z, z2));
                r.record_le(j, "lipschitz_xz", (f0 - fxz).abs(), self.ell * dxz, 1e-12);
                let fy = self.eval(*t, x, *y2, z);
                let dy = y - y2;
                r.record_le(j, "monotone_y", dy * (f0 - fy), self.mu * dy * dy, 1e-12);
            }
        }
        r
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Terminal condition `g(x)` with its declared Lipschitz/growth constant.
/// Quadratic catalog entries carry `ell = inf`.
#[derive(Clone)]
pub struct TerminalCondition {
    func: TerminalFn,
    pub ell: f64,
    label: String,
}

impl fmt::Debug for TerminalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalCondition")
            .field("label", &self.label)
            .field("ell", &self.ell)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalKind {
    /// `|x|^2`
    Square,
    /// `-|x|^2`
    NegSquare,
    /// `|x|`
    Abs,
    /// `offset + slope . x`
    Affine { offset: f64, slope: Vec<f64> },
}

impl TerminalCondition {
    pub fn new(func: TerminalFn, ell: f64, label: impl Into<String>) -> Self {
        TerminalCondition {
            func,
            ell,
            label: label.into(),
        }
    }

    pub fn square() -> Self {
        Self::new(
            Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum()),
            f64::INFINITY,
            "square",
        )
    }

    pub fn neg_square() -> Self {
        Self::new(
            Arc::new(|x: &[f64]| -x.iter().map(|v| v * v).sum::<f64>()),
            f64::INFINITY,
            "neg_square",
        )
    }

    pub fn abs() -> Self {
        Self::new(
            Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt()),
            1.0,
            "abs",
        )
    }

    pub fn affine(offset: f64, slope: Vec<f64>) -> Self {
        let ell = offset.abs().max(slope.iter().map(|v| v * v).sum::<f64>().sqrt());
        let label = format!("affine({offset};{slope:?})");
        Self::new(
            Arc::new(move |x: &[f64]| offset + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()),
            ell,
            label,
        )
    }

    pub fn from_kind(kind: &TerminalKind, dim: usize) -> Result<Self> {
        match kind {
            TerminalKind::Square => Ok(Self::square()),
            TerminalKind::NegSquare => Ok(Self::neg_square()),
            TerminalKind::Abs => Ok(Self::abs()),
            TerminalKind::Affine { offset, slope } => {
                if slope.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: slope.len(),
                    });
                }
                Ok(Self::affine(*offset, slope.clone()))
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.func)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `delta * g + c`.
    pub fn affine_map(&self, delta: f64, c: f64) -> Self {
        let inner = self.func.clone();
        Self::new(
            Arc::new(move |x: &[f64]| delta * inner(x) + c),
            self.ell * delta.abs() + c.abs(),
            format!("{}*{delta}+{c}", self.label),
        )
    }
}

/// Square-root diffusion used by [`transform_driver`].
fn inverse_of(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    let smallest = if n == 1 {
        sigma[(0, 0)].abs()
    } else {
        sigma.clone().svd(false, false).singular_values.min()
    };
    if !(smallest > 1e-12) {
        return Err(Error::Singular);
    }
    sigma.clone().try_inverse().ok_or(Error::Singular)
}

fn right_mul(z: &[f64], inv: &DMatrix<f64>, out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = z.iter().enumerate().map(|(i, zi)| zi * inv[(i, j)]).sum();
    }
}

/// `f_sigma(t,x,y,z) = f(t,x,y, z sigma(t,x)^{-1})`.
///
/// The Lipschitz constant in `z` is rescaled by the true `|sigma^{-1}|`
/// (spectral norm) for constant coefficients and by the ellipticity bound
/// `1 / sqrt(2 lambda)` otherwise.
pub fn transform_driver(f: &Driver, sigma: &Diffusion, lambda: f64) -> Result<Driver> {
    let inner = f.func.clone();
    match sigma {
        Diffusion::Constant { sigma, .. } => {
            let inv = inverse_of(sigma)?;
            let scale = spectral_norm(&inv);
            let is_identity = (&inv - DMatrix::identity(inv.nrows(), inv.ncols())).norm() == 0.0;
            let func: DriverFn = if is_identity {
                inner
            } else {
                Arc::new(move |t, x, y, z: &[f64]| {
                    let mut zs = [0.0f64; 8];
                    if z.len() <= 8 {
                        right_mul(z, &inv, &mut zs[..z.len()]);
                        inner(t, x, y, &zs[..z.len()])
                    } else {
                        let mut v = vec![0.0; z.len()];
                        right_mul(z, &inv, &mut v);
                        inner(t, x, y, &v)
                    }
                })
            };
            Ok(Driver::new(
                func,
                f.ell * scale.max(1.0),
                f.mu,
                f.lip_y,
                f.lip_z * scale,
                format!("{}_sigma", f.label),
            ))
        }
        Diffusion::Field(field) => {
            let field = field.clone();
            if !(lambda > 0.0) {
                return Err(Error::Singular);
            }
            let scale = 1.0 / (2.0 * lambda).sqrt();
            Ok(Driver::new(
                Arc::new(move |t, x, y, z: &[f64]| {
                    let sigma = match crate::sublinear::psd_sqrt(&field(t, x)) {
                        Ok(s) => s,
                        Err(_) => return f64::NAN,
                    };
                    match inverse_of(&sigma) {
                        Ok(inv) => {
                            let mut v = vec![0.0; z.len()];
                            right_mul(z, &inv, &mut v);
                            inner(t, x, y, &v)
                        }
                        Err(_) => f64::NAN,
                    }
                }),
                f.ell * scale.max(1.0),
                f.mu,
                f.lip_y,
                f.lip_z * scale,
                format!("{}_sigma", f.label),
            ))
        }
    }
}
