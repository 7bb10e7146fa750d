//! Support functions and the Hausdorff distance between convex hulls of
//! finite point sets in `R^N x Sym^N`.

use statrs::distribution::{ContinuousCDF, Normal};

use super::pair::PairPS;
use crate::error::{Error, Result};

pub const DEFAULT_DIRECTIONS: usize = 10_000;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Unit directions in the orthonormal coordinates of `R^N x Sym^N`
/// (see [`PairPS::coordinates`]).
#[derive(Debug, Clone)]
pub struct SphereDirections {
    dim: usize,
    dirs: Vec<Vec<f64>>,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

impl SphereDirections {
    /// Low-discrepancy directions: van der Corput angles on the circle, and
    /// Halton points pushed through the Gaussian quantile and normalized in
    /// higher dimension.
    pub fn low_discrepancy(dim: usize, count: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "sphere dimension must be at least 2, got {dim}"
            )));
        }
        if dim > PRIMES.len() {
            return Err(Error::InvalidArgument(format!(
                "sphere dimension {dim} exceeds supported maximum {}",
                PRIMES.len()
            )));
        }
        let mut dirs = Vec::with_capacity(count);
        if dim == 2 {
            for i in 0..count {
                let theta = std::f64::consts::TAU * radical_inverse(i as u64 + 1, 2);
                dirs.push(vec![theta.cos(), theta.sin()]);
            }
        } else {
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            let mut i = 1u64;
            while dirs.len() < count {
                let v: Vec<f64> = PRIMES[..dim]
                    .iter()
                    .map(|&b| normal.inverse_cdf(radical_inverse(i, b)))
                    .collect();
                i += 1;
                let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm > 1e-12 && norm.is_finite() {
                    dirs.push(v.into_iter().map(|c| c / norm).collect());
                }
            }
        }
        Ok(SphereDirections { dim, dirs })
    }

    /// Directions for pairs over `R^n`.
    pub fn for_pairs(n: usize, count: usize) -> Result<Self> {
        Self::low_discrepancy(PairPS::coordinate_dim(n), count)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.dirs.iter().map(|d| d.as_slice())
    }
}

fn support(points: &[Vec<f64>], d: &[f64]) -> f64 {
    points
        .iter()
        .map(|c| c.iter().zip(d).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `max_d |h_A(d) - h_B(d)|` over the sampled unit directions. This is a lower
/// bound on the Hausdorff distance of the convex hulls and converges to it as
/// the directions densify.
pub fn hausdorff_support(a: &[PairPS], b: &[PairPS], directions: &SphereDirections) -> Result<f64> {
    let n = a.first().ok_or(Error::EmptyPointSet)?.dim();
    if b.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    for q in a.iter().chain(b) {
        if q.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: q.dim(),
            });
        }
    }
    if directions.dim() != PairPS::coordinate_dim(n) {
        return Err(Error::DimensionMismatch {
            expected: PairPS::coordinate_dim(n),
            got: directions.dim(),
        });
    }
    let ca: Vec<Vec<f64>> = a.iter().map(PairPS::coordinates).collect();
    let cb: Vec<Vec<f64>> = b.iter().map(PairPS::coordinates).collect();
    Ok(directions
        .iter()
        .map(|d| (support(&ca, d) - support(&cb, d)).abs())
        .fold(0.0, f64::max))
}
