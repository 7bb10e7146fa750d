use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use nlfk::fd::SpatialGrid;
use nlfk::harness::polygon_hausdorff;
use nlfk::sublinear::{psd_sqrt, GeneratorSet, LinearGenerator, PairPS};

fn spd(entries: Vec<f64>, n: usize, floor: f64) -> DMatrix<f64> {
    let b = DMatrix::from_vec(n, n, entries);
    &b * b.transpose() + DMatrix::identity(n, n) * floor
}

fn pair(p: Vec<f64>, s: Vec<f64>) -> PairPS {
    let m = DMatrix::from_vec(2, 2, s);
    PairPS::new(DVector::from_vec(p), (&m + m.transpose()) * 0.5).unwrap()
}

fn set() -> GeneratorSet {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    GeneratorSet::new(
        vec![
            LinearGenerator::constant(&[0.2, -0.1], a).unwrap(),
            LinearGenerator::constant(&[0.0, 0.4], DMatrix::identity(2, 2) * 0.3).unwrap(),
        ],
        0.1,
        1.0,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psd_sqrt_squares_back(e in prop::collection::vec(-2.0f64..2.0, 9)) {
        let a = spd(e, 3, 0.0);
        let r = psd_sqrt(&a).unwrap();
        prop_assert!((&r * &r - &a).norm() <= 1e-9 * (1.0 + a.norm()));
        prop_assert!((&r - r.transpose()).norm() <= 1e-12);
    }

    #[test]
    fn operator_is_sublinear(
        p1 in prop::collection::vec(-3.0f64..3.0, 2),
        s1 in prop::collection::vec(-3.0f64..3.0, 4),
        p2 in prop::collection::vec(-3.0f64..3.0, 2),
        s2 in prop::collection::vec(-3.0f64..3.0, 4),
        c in 0.0f64..10.0,
    ) {
        let set = set();
        let q1 = pair(p1, s1);
        let q2 = pair(p2, s2);
        let f = |q: &PairPS| set.evaluate(0.0, &[0.0, 0.0], q).unwrap().value;
        let sum = PairPS::new(q1.p() + q2.p(), q1.s() + q2.s()).unwrap();
        prop_assert!(f(&sum) <= f(&q1) + f(&q2) + 1e-10);
        let scaled = q1.scale(c);
        prop_assert!((f(&scaled) - c * f(&q1)).abs() <= 1e-10 * (1.0 + c * f(&q1).abs()));
    }

    #[test]
    fn interpolation_is_exact_for_affine_data(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
        x in -1.5f64..1.5, y in -1.5f64..1.5,
    ) {
        let g = SpatialGrid::centered(&[0.0, 0.0], 1.0, 9).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|i| { let p = g.point(i); a + b * p[0] + c * p[1] }).collect();
        prop_assert!((g.interpolate(&v, &[x, y]) - (a + b * x + c * y)).abs() <= 1e-12);
    }

    #[test]
    fn polygon_hausdorff_is_a_metric(
        a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6),
        b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6),
        c in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6),
    ) {
        let pts = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>();
        let (a, b, c) = (pts(&a), pts(&b), pts(&c));
        prop_assert_eq!(polygon_hausdorff(&a, &a), 0.0);
        prop_assert!((polygon_hausdorff(&a, &b) - polygon_hausdorff(&b, &a)).abs() <= 1e-12);
        prop_assert!(polygon_hausdorff(&a, &c) <= polygon_hausdorff(&a, &b) + polygon_hausdorff(&b, &c) + 1e-12);
    }
}
