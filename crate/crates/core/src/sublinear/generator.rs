use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::pair::PairPS;
use super::sqrt::{frobenius_dot, min_eigenvalue, psd_sqrt, symmetrize};
use crate::error::{Error, Result};

pub type VectorField = Arc<dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;

/// Drift coefficient `b(t, x)`.
#[derive(Clone)]
pub enum Drift {
    Constant(DVector<f64>),
    /// `offset + linear * x`
    Affine {
        offset: DVector<f64>,
        linear: DMatrix<f64>,
    },
    Field(VectorField),
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Constant(b) => f.debug_tuple("Constant").field(&b.as_slice()).finish(),
            Drift::Affine { offset, linear } => f
                .debug_struct("Affine")
                .field("offset", &offset.as_slice())
                .field("linear", &linear.as_slice())
                .finish(),
            Drift::Field(_) => f.write_str("Field(..)"),
        }
    }
}

impl Drift {
    pub fn zero(n: usize) -> Self {
        Drift::Constant(DVector::zeros(n))
    }

    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self {
            Drift::Constant(b) => out.copy_from_slice(b.as_slice()),
            Drift::Affine { offset, linear } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut v = offset[i];
                    for (j, xj) in x.iter().enumerate() {
                        v += linear[(i, j)] * xj;
                    }
                    *o = v;
                }
            }
            Drift::Field(fun) => out.copy_from_slice(fun(t, x).as_slice()),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        self.eval_into(t, x, out.as_mut_slice());
        out
    }

    fn dim_hint(&self) -> Option<usize> {
        match self {
            Drift::Constant(b) => Some(b.len()),
            Drift::Affine { offset, .. } => Some(offset.len()),
            Drift::Field(_) => None,
        }
    }
}

/// Diffusion coefficient `a(t, x) = sigma sigma`. Constant coefficients keep
/// their square root precomputed.
#[derive(Clone)]
pub enum Diffusion {
    Constant {
        a: DMatrix<f64>,
        sigma: DMatrix<f64>,
    },
    Field(MatrixField),
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Constant { a, .. } => {
                f.debug_struct("Constant").field("a", &a.as_slice()).finish()
            }
            Diffusion::Field(_) => f.write_str("Field(..)"),
        }
    }
}

impl Diffusion {
    pub fn constant(a: DMatrix<f64>) -> Result<Self> {
        let a = symmetrize(&a);
        let sigma = psd_sqrt(&a)?;
        Ok(Diffusion::Constant { a, sigma })
    }

    pub fn a(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        match self {
            Diffusion::Constant { a, .. } => a.clone(),
            Diffusion::Field(fun) => symmetrize(&fun(t, x)),
        }
    }

    pub fn sigma(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            Diffusion::Constant { sigma, .. } => Ok(sigma.clone()),
            Diffusion::Field(fun) => psd_sqrt(&fun(t, x)),
        }
    }

    /// `out += sigma(t,x) * dw`. A field that fails to produce a PSD matrix
    /// poisons `out` with NaN so the caller's finiteness check trips.
    pub fn sigma_mul_add(&self, t: f64, x: &[f64], dw: &[f64], out: &mut [f64]) {
        match self {
            Diffusion::Constant { sigma, .. } => mul_add(sigma, dw, out),
            Diffusion::Field(fun) => match psd_sqrt(&fun(t, x)) {
                Ok(sigma) => mul_add(&sigma, dw, out),
                Err(_) => out.iter_mut().for_each(|o| *o = f64::NAN),
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Diffusion::Constant { .. })
    }

    fn dim_hint(&self) -> Option<usize> {
        match self {
            Diffusion::Constant { a, .. } => Some(a.nrows()),
            Diffusion::Field(_) => None,
        }
    }
}

fn mul_add(m: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, vj) in v.iter().enumerate() {
            acc += m[(i, j)] * vj;
        }
        *o += acc;
    }
}

/// One linear second-order operator `1/2 <a, S> + p.b`.
#[derive(Debug, Clone)]
pub struct LinearGenerator {
    dim: usize,
    pub drift: Drift,
    pub diffusion: Diffusion,
}

impl LinearGenerator {
    pub fn new(dim: usize, drift: Drift, diffusion: Diffusion) -> Result<Self> {
        for got in [drift.dim_hint(), diffusion.dim_hint()].into_iter().flatten() {
            if got != dim {
                return Err(Error::DimensionMismatch { expected: dim, got });
            }
        }
        if let Drift::Affine { linear, .. } = &drift {
            if linear.nrows() != dim || linear.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: linear.nrows(),
                });
            }
        }
        Ok(LinearGenerator {
            dim,
            drift,
            diffusion,
        })
    }

    /// Constant coefficients `(b, a)`.
    pub fn constant(b: &[f64], a: DMatrix<f64>) -> Result<Self> {
        Self::new(
            b.len(),
            Drift::Constant(DVector::from_column_slice(b)),
            Diffusion::constant(a)?,
        )
    }

    /// Driftless 1D generator with diffusion square `a`.
    pub fn scalar(a: f64) -> Result<Self> {
        Self::constant(&[0.0], DMatrix::from_element(1, 1, a))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.drift, Drift::Constant(_)) && self.diffusion.is_constant()
    }

    pub fn linear_value(&self, t: f64, x: &[f64], q: &PairPS) -> f64 {
        let a = self.diffusion.a(t, x);
        let b = self.drift.eval(t, x);
        0.5 * frobenius_dot(&a, q.s()) + q.p().dot(&b)
    }
}

/// How ties in the generator argmax are broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Lowest,
    /// Only used to self-test the property harness.
    Highest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub argmax: usize,
}

/// A sublinear operator `F(t,x,p,S) = max_i 1/2 <a_i,S> + p.b_i` given by a
/// finite family of linear generators sharing an ellipticity floor `lambda`
/// (eigenvalues of every `a_i` are at least `2 lambda`) and a Lipschitz
/// budget `ell`.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    generators: Vec<LinearGenerator>,
    lambda: f64,
    ell: f64,
    degenerate: bool,
    tie_break: TieBreak,
}

/// Times at which coefficient invariants are sampled.
const SAMPLE_TIMES: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

impl GeneratorSet {
    pub fn new(generators: Vec<LinearGenerator>, lambda: f64, ell: f64) -> Result<Self> {
        let set = Self::unchecked(generators, lambda, ell, false)?;
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ellipticity floor must be positive, got {lambda}"
            )));
        }
        set.check_invariants()?;
        Ok(set)
    }

    /// Test mode: ellipticity and Lipschitz checks are skipped, so `sigma = 0`
    /// is allowed.
    pub fn degenerate(generators: Vec<LinearGenerator>) -> Result<Self> {
        Self::unchecked(generators, 0.0, 0.0, true)
    }

    fn unchecked(
        generators: Vec<LinearGenerator>,
        lambda: f64,
        ell: f64,
        degenerate: bool,
    ) -> Result<Self> {
        let first = generators.first().ok_or(Error::EmptyGeneratorSet)?;
        let dim = first.dim();
        for g in &generators {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: g.dim(),
                });
            }
        }
        if !(ell >= 0.0) || !ell.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz budget must be finite and nonnegative, got {ell}"
            )));
        }
        Ok(GeneratorSet {
            generators,
            lambda,
            ell,
            degenerate,
            tie_break: TieBreak::Lowest,
        })
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }

    pub fn dim(&self) -> usize {
        self.generators[0].dim()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn generators(&self) -> &[LinearGenerator] {
        &self.generators
    }

    pub fn generator(&self, index: usize) -> Result<&LinearGenerator> {
        self.generators.get(index).ok_or(Error::GeneratorIndex {
            index,
            count: self.generators.len(),
        })
    }

    /// Subset of generators, keeping the shared constants.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let gens = indices
            .iter()
            .map(|&i| self.generator(i).cloned())
            .collect::<Result<Vec<_>>>()?;
        let mut s = Self::unchecked(gens, self.lambda, self.ell, self.degenerate)?;
        s.tie_break = self.tie_break;
        Ok(s)
    }

    /// `max_i 1/2 <a_i(t,x), S> + p.b_i(t,x)` and the maximizing index.
    pub fn evaluate(&self, t: f64, x: &[f64], q: &PairPS) -> Result<Evaluation> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: q.dim(),
            });
        }
        let values: Vec<f64> = self
            .generators
            .iter()
            .map(|g| g.linear_value(t, x, q))
            .collect();
        Ok(argmax(&values, self.tie_break))
    }

    /// Largest eigenvalue of any `a_i(t, x)`.
    pub fn max_diffusion_eigenvalue(&self, t: f64, x: &[f64]) -> f64 {
        self.generators
            .iter()
            .map(|g| super::sqrt::max_eigenvalue(&g.diffusion.a(t, x)))
            .fold(0.0, f64::max)
    }

    /// Sampled coefficient invariants: `eig(a) >= 2 lambda`,
    /// `Lip(b) <= 2 ell`, `Lip(a) <= 2 sqrt2 ell`.
    pub fn check_invariants(&self) -> Result<()> {
        if self.degenerate {
            return Ok(());
        }
        let n = self.dim();
        let cloud = sample_cloud(n);
        let tol = 1e-12;
        for (index, g) in self.generators.iter().enumerate() {
            for &t in &SAMPLE_TIMES {
                let evals: Vec<(DVector<f64>, DMatrix<f64>)> = cloud
                    .iter()
                    .map(|x| (g.drift.eval(t, x), g.diffusion.a(t, x)))
                    .collect();
                for (x, (_, a)) in cloud.iter().zip(&evals) {
                    let m = min_eigenvalue(a);
                    if m < 2.0 * self.lambda - tol {
                        return Err(Error::GeneratorInvariant {
                            index,
                            property: "ellipticity",
                            detail: format!(
                                "min eigenvalue {m} < 2*lambda = {} at t={t}, x={x:?}",
                                2.0 * self.lambda
                            ),
                        });
                    }
                }
                for i in 0..cloud.len() {
                    for j in (i + 1)..cloud.len() {
                        let dx = dist(&cloud[i], &cloud[j]);
                        let db = (&evals[i].0 - &evals[j].0).norm();
                        let da = (&evals[i].1 - &evals[j].1).norm();
                        if db > 2.0 * self.ell * dx + tol {
                            return Err(Error::GeneratorInvariant {
                                index,
                                property: "drift Lipschitz bound",
                                detail: format!("|db| = {db} > 2 ell |dx| = {}", 2.0 * self.ell * dx),
                            });
                        }
                        let bound = 2.0 * std::f64::consts::SQRT_2 * self.ell * dx;
                        if da > bound + tol {
                            return Err(Error::GeneratorInvariant {
                                index,
                                property: "diffusion Lipschitz bound",
                                detail: format!("|da| = {da} > 2 sqrt2 ell |dx| = {bound}"),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Deterministic argmax over a value list.
pub fn argmax(values: &[f64], tie_break: TieBreak) -> Evaluation {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        let better = match tie_break {
            TieBreak::Lowest => *v > values[best],
            TieBreak::Highest => *v >= values[best],
        };
        if better {
            best = i;
        }
    }
    Evaluation {
        value: values[best],
        argmax: best,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn sample_cloud(n: usize) -> Vec<Vec<f64>> {
    let mut cloud = vec![vec![0.0; n]];
    for j in 0..n {
        for r in [-2.0, -0.5, 1.0, 3.0] {
            let mut x = vec![0.0; n];
            x[j] = r;
            cloud.push(x);
        }
    }
    cloud.push(vec![1.0; n]);
    cloud.push((0..n).map(|j| if j % 2 == 0 { -1.5 } else { 0.7 }).collect());
    cloud
}

/// `F(t,x,q)` for a generator set.
pub fn evaluate_f(set: &GeneratorSet, t: f64, x: &[f64], q: &PairPS) -> Result<Evaluation> {
    set.evaluate(t, x, q)
}
