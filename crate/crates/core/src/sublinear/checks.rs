//! Sampled audits of the structural assumptions on `F`.

use nalgebra::{DMatrix, DVector};

use super::generator::GeneratorSet;
use super::pair::PairPS;
use super::sqrt::min_eigenvalue;
use crate::error::{Error, Result};
use crate::report::CheckReport;

/// Absolute tolerance for algebraic identities, scaled by the magnitude of
/// the terms involved when those exceed one.
pub const ALGEBRAIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SublinearitySample {
    pub t: f64,
    pub x: Vec<f64>,
    pub q: PairPS,
    pub q2: PairPS,
}

#[derive(Debug, Clone)]
pub struct EllipticitySample {
    pub t: f64,
    pub x: Vec<f64>,
    pub q: PairPS,
    /// Positive semidefinite increment `S'`.
    pub increment: DMatrix<f64>,
}

/// Scaling factors used for the homogeneity check at sample `i`; always
/// includes the endpoints `0` and `4` plus one low-discrepancy point.
fn deltas(i: usize) -> [f64; 3] {
    let golden = 0.618_033_988_749_894_9_f64;
    let frac = ((i as f64 + 1.0) * golden).fract();
    [0.0, 4.0, 4.0 * frac]
}

/// Subadditivity `F(q+q') <= F(q) + F(q')` and positive homogeneity
/// `F(delta q) = delta F(q)` at every sample.
pub fn check_sublinearity(set: &GeneratorSet, samples: &[SublinearitySample]) -> Result<CheckReport> {
    let mut report = CheckReport::new();
    for (i, s) in samples.iter().enumerate() {
        let fq = set.evaluate(s.t, &s.x, &s.q)?.value;
        let fq2 = set.evaluate(s.t, &s.x, &s.q2)?.value;
        let sum = &s.q + &s.q2;
        let fsum = set.evaluate(s.t, &s.x, &sum)?.value;
        let scale = 1f64.max(fq.abs()).max(fq2.abs()).max(fsum.abs());
        report.record_le(i, "subadditivity", fsum, fq + fq2, ALGEBRAIC_TOL * scale);

        for delta in deltas(i) {
            let fd = set.evaluate(s.t, &s.x, &s.q.scale(delta))?.value;
            let scale = 1f64.max(fd.abs()).max((delta * fq).abs());
            report.record_eq(i, "homogeneity", fd, delta * fq, ALGEBRAIC_TOL * scale);
        }
    }
    Ok(report)
}

/// `F(p, S+S') - F(p, S) >= lambda |S'|` for PSD increments `S'`.
pub fn check_ellipticity(set: &GeneratorSet, samples: &[EllipticitySample]) -> Result<CheckReport> {
    let mut report = CheckReport::new();
    for (i, s) in samples.iter().enumerate() {
        let m = min_eigenvalue(&s.increment);
        if m < -1e-12 {
            return Err(Error::NotPsd { min_eigenvalue: m });
        }
        let shifted = PairPS::new(s.q.p().clone(), s.q.s() + &s.increment)?;
        let lo = set.evaluate(s.t, &s.x, &s.q)?.value;
        let hi = set.evaluate(s.t, &s.x, &shifted)?.value;
        let bound = set.lambda() * s.increment.norm();
        let scale = 1f64.max(lo.abs()).max(hi.abs());
        // lambda |S'| <= increment
        report.record_le(i, "ellipticity", bound, hi - lo, ALGEBRAIC_TOL * scale);
    }
    Ok(report)
}

/// Deterministic PSD matrix from a coefficient stream, `B B^T` scaled.
pub fn psd_from(n: usize, coeffs: &[f64]) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |i, j| coeffs[(i * n + j) % coeffs.len()]);
    &b * b.transpose()
}

/// Pair with entries drawn from `coeffs`.
pub fn pair_from(n: usize, coeffs: &[f64]) -> PairPS {
    let p = DVector::from_fn(n, |i, _| coeffs[i % coeffs.len()]);
    let s = DMatrix::from_fn(n, n, |i, j| coeffs[(n + i * n + j) % coeffs.len()]);
    PairPS::new(p, s).expect("square by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sublinear::LinearGenerator;

    fn singleton() -> GeneratorSet {
        GeneratorSet::new(vec![LinearGenerator::scalar(0.25).unwrap()], 0.125, 1.0).unwrap()
    }

    #[test]
    fn zero_increment_and_equality_case() {
        let set = singleton();
        let q = PairPS::from_slices(&[0.3], &[-1.0]).unwrap();
        let samples = vec![
            EllipticitySample {
                t: 0.0,
                x: vec![0.0],
                q: q.clone(),
                increment: DMatrix::zeros(1, 1),
            },
            EllipticitySample {
                t: 0.0,
                x: vec![0.0],
                q,
                increment: DMatrix::from_element(1, 1, 2.0),
            },
        ];
        let r = check_ellipticity(&set, &samples).unwrap();
        assert!(r.passed(), "{r}");
        // the second sample is the equality case 0.25 = 0.125 * 2
        assert!(r.worst_margin.abs() < 1e-15);
    }

    #[test]
    fn non_psd_increment_is_an_error() {
        let set = singleton();
        let samples = vec![EllipticitySample {
            t: 0.0,
            x: vec![0.0],
            q: PairPS::zero(1),
            increment: DMatrix::from_element(1, 1, -1.0),
        }];
        assert!(matches!(
            check_ellipticity(&set, &samples),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn homogeneity_at_zero_and_opposite_pairs() {
        let set = GeneratorSet::new(
            vec![
                LinearGenerator::scalar(0.25).unwrap(),
                LinearGenerator::constant(&[0.5], DMatrix::from_element(1, 1, 1.0)).unwrap(),
            ],
            0.125,
            1.0,
        )
        .unwrap();
        let q = PairPS::from_slices(&[1.0], &[-3.0]).unwrap();
        assert_eq!(set.evaluate(0.0, &[0.0], &q.scale(0.0)).unwrap().value, 0.0);
        let neg = -&q;
        let total = set.evaluate(0.0, &[0.0], &q).unwrap().value
            + set.evaluate(0.0, &[0.0], &neg).unwrap().value;
        assert!(total >= 0.0);
        let r = check_sublinearity(
            &set,
            &[SublinearitySample {
                t: 0.0,
                x: vec![0.0],
                q: q.clone(),
                q2: neg,
            }],
        )
        .unwrap();
        assert!(r.passed(), "{r}");
    }
}
