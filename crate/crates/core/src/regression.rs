//! Least-squares conditional expectations on a finite basis.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ridge added to the normalized normal equations.
pub const RIDGE: f64 = 1e-8;

/// Smallest admissible eigenvalue ratio of the normalized Gram matrix.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    /// Tensor-product monomials with every exponent at most `degree`, in
    /// standardized coordinates.
    Polynomial { degree: usize },
    /// Piecewise constants on an equal-width hypercube partition of the
    /// sample range, `per_dim` cells per dimension.
    Bins { per_dim: usize },
}

impl Default for Basis {
    fn default() -> Self {
        Basis::Polynomial { degree: 3 }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Basis::Polynomial { degree } => write!(f, "poly{degree}"),
            Basis::Bins { per_dim } => write!(f, "bins{per_dim}"),
        }
    }
}

#[derive(Debug, Clone)]
enum Model {
    Poly {
        mean: Vec<f64>,
        scale: Vec<f64>,
        active: Vec<usize>,
        degree: usize,
        exponents: Vec<Vec<usize>>,
        coef: DMatrix<f64>,
    },
    Bins {
        lower: Vec<f64>,
        width: Vec<f64>,
        per_dim: usize,
        values: Vec<Vec<f64>>,
    },
}

/// A fitted regression with `outputs` response columns.
#[derive(Debug, Clone)]
pub struct Fit {
    dim: usize,
    outputs: usize,
    model: Model,
}

fn column_stats(xs: &[f64], dim: usize, rows: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; dim];
    let mut min = vec![f64::INFINITY; dim];
    let mut max = vec![f64::NEG_INFINITY; dim];
    for r in 0..rows {
        for j in 0..dim {
            let v = xs[r * dim + j];
            mean[j] += v;
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut var = vec![0.0; dim];
    for r in 0..rows {
        for j in 0..dim {
            let d = xs[r * dim + j] - mean[j];
            var[j] += d * d;
        }
    }
    let std = var.iter().map(|v| (v / rows as f64).sqrt()).collect();
    (mean, std, min, max)
}

/// A coordinate carries information when its sample range is not at
/// rounding level; the sample mean of many equal values is not exact.
fn is_active(min: f64, max: f64) -> bool {
    max - min > 1e-9 * (1.0 + min.abs().max(max.abs()))
}

fn tensor_exponents(active: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..active {
        let mut next = Vec::with_capacity(out.len() * (degree + 1));
        for e in &out {
            for p in 0..=degree {
                let mut v = e.clone();
                v.push(p);
                next.push(v);
            }
        }
        out = next;
    }
    // constant term first
    out.sort_by_key(|e| (e.iter().sum::<usize>(), e.clone()));
    out
}

fn poly_features(
    x: &[f64],
    mean: &[f64],
    scale: &[f64],
    active: &[usize],
    degree: usize,
    exponents: &[Vec<usize>],
    out: &mut [f64],
) {
    let mut powers = vec![1.0; active.len() * (degree + 1)];
    for (a, &j) in active.iter().enumerate() {
        let z = (x[j] - mean[j]) / scale[j];
        for p in 1..=degree {
            powers[a * (degree + 1) + p] = powers[a * (degree + 1) + p - 1] * z;
        }
    }
    for (o, e) in out.iter_mut().zip(exponents) {
        *o = e
            .iter()
            .enumerate()
            .map(|(a, &p)| powers[a * (degree + 1) + p])
            .product();
    }
}

fn cell_index(x: &[f64], lower: &[f64], width: &[f64], per_dim: usize) -> usize {
    let mut cell = 0;
    for (j, xj) in x.iter().enumerate() {
        let b = if width[j] > 0.0 {
            ((xj - lower[j]) / width[j])
                .floor()
                .clamp(0.0, (per_dim - 1) as f64) as usize
        } else {
            0
        };
        cell = cell * per_dim + b;
    }
    cell
}

fn unflatten(mut cell: usize, per_dim: usize, dim: usize) -> Vec<usize> {
    let mut idx = vec![0; dim];
    for j in (0..dim).rev() {
        idx[j] = cell % per_dim;
        cell /= per_dim;
    }
    idx
}

/// Fill empty cells from the nearest nonempty cell in index space; ties go
/// to the lower flat index. Returns the number of cells filled.
pub(crate) fn fill_empty_cells<T: Clone>(cells: &mut [Option<T>], per_dim: usize, dim: usize) -> usize {
    let filled: Vec<usize> = (0..cells.len()).filter(|&c| cells[c].is_some()).collect();
    if filled.is_empty() {
        return 0;
    }
    let mut count = 0;
    for c in 0..cells.len() {
        if cells[c].is_some() {
            continue;
        }
        let ic = unflatten(c, per_dim, dim);
        let mut best = filled[0];
        let mut best_d = usize::MAX;
        for &f in &filled {
            let iff = unflatten(f, per_dim, dim);
            let d: usize = ic.iter().zip(&iff).map(|(a, b)| a.abs_diff(*b).pow(2)).sum();
            if d < best_d {
                best_d = d;
                best = f;
            }
        }
        cells[c] = cells[best].clone();
        count += 1;
    }
    count
}

/// Regress each column of `targets` (each of length `rows`) on the basis
/// evaluated at `xs` (`rows x dim`, row-major). `step` only labels errors.
pub fn fit(basis: Basis, xs: &[f64], dim: usize, targets: &[Vec<f64>], step: usize) -> Result<Fit> {
    if dim == 0 || xs.len() % dim != 0 {
        return Err(Error::InvalidArgument("state matrix has inconsistent shape".into()));
    }
    let rows = xs.len() / dim;
    if rows == 0 {
        return Err(Error::RankDeficient { step });
    }
    for t in targets {
        if t.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                got: t.len(),
            });
        }
    }
    let outputs = targets.len();
    let (mean, std, min, max) = column_stats(xs, dim, rows);
    let model = match basis {
        Basis::Polynomial { degree } => {
            let active: Vec<usize> = (0..dim).filter(|&j| is_active(min[j], max[j])).collect();
            let exponents = tensor_exponents(active.len(), degree);
            let p = exponents.len();
            let scale: Vec<f64> = std.iter().map(|s| if *s > 0.0 { *s } else { 1.0 }).collect();
            let mut design = vec![0.0; rows * p];
            design.par_chunks_mut(p).enumerate().for_each(|(r, row)| {
                poly_features(&xs[r * dim..(r + 1) * dim], &mean, &scale, &active, degree, &exponents, row);
            });
            let a = DMatrix::from_row_slice(rows, p, &design);
            let y = DMatrix::from_fn(rows, outputs, |r, c| targets[c][r]);
            let inv_rows = 1.0 / rows as f64;
            let mut gram = a.tr_mul(&a) * inv_rows;
            let rhs = a.tr_mul(&y) * inv_rows;
            if p > 1 {
                let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
                let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = eig.iter().cloned().fold(0.0, f64::max);
                if !(lo > RANK_TOL * hi) {
                    return Err(Error::RankDeficient { step });
                }
            }
            // the intercept is not penalized, so constant shifts pass through
            for i in 1..p {
                gram[(i, i)] += RIDGE;
            }
            let chol = gram.cholesky().ok_or(Error::RankDeficient { step })?;
            let coef = chol.solve(&rhs);
            Model::Poly {
                mean,
                scale,
                active,
                degree,
                exponents,
                coef,
            }
        }
        Basis::Bins { per_dim } => {
            if per_dim == 0 {
                return Err(Error::InvalidArgument("bin count must be positive".into()));
            }
            let width: Vec<f64> = (0..dim)
                .map(|j| {
                    if is_active(min[j], max[j]) {
                        (max[j] - min[j]) / per_dim as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            let cells = per_dim.pow(dim as u32);
            let mut sums = vec![vec![0.0; outputs]; cells];
            let mut counts = vec![0usize; cells];
            for r in 0..rows {
                let c = cell_index(&xs[r * dim..(r + 1) * dim], &min, &width, per_dim);
                counts[c] += 1;
                for (o, t) in targets.iter().enumerate() {
                    sums[c][o] += t[r];
                }
            }
            let mut values: Vec<Option<Vec<f64>>> = sums
                .into_iter()
                .zip(&counts)
                .map(|(s, &n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
                .collect();
            fill_empty_cells(&mut values, per_dim, dim);
            Model::Bins {
                lower: min,
                width,
                per_dim,
                values: values.into_iter().map(|v| v.expect("filled")).collect(),
            }
        }
    };
    Ok(Fit { dim, outputs, model })
}

impl Fit {
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.model {
            Model::Poly {
                mean,
                scale,
                active,
                degree,
                exponents,
                coef,
            } => {
                let mut phi = vec![0.0; exponents.len()];
                poly_features(x, mean, scale, active, *degree, exponents, &mut phi);
                for (o, v) in out.iter_mut().enumerate() {
                    *v = phi.iter().enumerate().map(|(i, f)| f * coef[(i, o)]).sum();
                }
            }
            Model::Bins {
                lower,
                width,
                per_dim,
                values,
            } => {
                let c = cell_index(x, lower, width, *per_dim);
                out.copy_from_slice(&values[c]);
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        self.predict_into(x, &mut out);
        out
    }

    /// First output column at `x`.
    pub fn predict_first(&self, x: &[f64]) -> f64 {
        match &self.model {
            Model::Poly {
                mean,
                scale,
                active,
                degree,
                exponents,
                coef,
            } => {
                let mut phi = vec![0.0; exponents.len()];
                poly_features(x, mean, scale, active, *degree, exponents, &mut phi);
                phi.iter().enumerate().map(|(i, f)| f * coef[(i, 0)]).sum()
            }
            Model::Bins {
                lower,
                width,
                per_dim,
                values,
            } => values[cell_index(x, lower, width, *per_dim)][0],
        }
    }
}
