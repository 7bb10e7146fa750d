//! Monotone explicit finite differences for the Bellman-form PDE, and the
//! growth-transform utilities used in the comparison argument.

mod grid;
mod scheme;
mod transform;

pub use grid::SpatialGrid;
pub use scheme::{check_fd_comparison, solve_fd, FdScheme, ValueField, CFL_LIMIT};
pub use transform::{growth_transform, GrowthTransform};

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::bsde::{Driver, TerminalCondition};
    use crate::sublinear::{GeneratorSet, LinearGenerator};
    use crate::value::ParabolicProblem;

    fn problem(a: &[f64], f: Driver, g: TerminalCondition) -> ParabolicProblem {
        let gens = a.iter().map(|&v| LinearGenerator::scalar(v).unwrap()).collect();
        let lambda = a.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
        ParabolicProblem::new(GeneratorSet::new(gens, lambda, 1.0).unwrap(), f, g, 1.0).unwrap()
    }

    fn line() -> SpatialGrid {
        SpatialGrid::centered(&[0.0], 6.0, 241).unwrap()
    }

    #[test]
    fn heat_and_gheat_closed_forms() {
        let cases = [
            (vec![1.0], Driver::zero(), TerminalCondition::square(), 1.0),
            (vec![0.25, 1.0], Driver::zero(), TerminalCondition::square(), 1.0),
            (vec![0.25, 1.0], Driver::zero(), TerminalCondition::neg_square(), -0.25),
            (vec![1.0], Driver::discount(1.0), TerminalCondition::square(), (-1.0f64).exp()),
        ];
        for (a, f, g, exact) in cases {
            let u = solve_fd(&problem(&a, f, g), &line(), 2000).unwrap();
            let v = u.probe(0.0, &[0.0]);
            assert!((v - exact).abs() <= 0.01, "{a:?}: {v} vs {exact}");
        }
    }

    #[test]
    fn cfl_violation_reports_min_steps() {
        let err = solve_fd(&problem(&[1.0], Driver::zero(), TerminalCondition::square()), &line(), 100).unwrap_err();
        match err {
            crate::Error::Cfl { ratio, min_steps } => {
                assert!(ratio > CFL_LIMIT);
                assert!(solve_fd(&problem(&[1.0], Driver::zero(), TerminalCondition::square()), &line(), min_steps).is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comparison_examples() {
        let p = problem(&[0.25, 1.0], Driver::discount_gradient(0.5, 0.3, 2.0, 1), TerminalCondition::abs());
        let grid = SpatialGrid::centered(&[0.0], 6.0, 121).unwrap();
        let g1 = TerminalCondition::abs();
        assert!(check_fd_comparison(&p, &g1, &g1, &grid, 600).unwrap().passed());
        let neg = g1.affine_map(-1.0, 0.0);
        assert!(check_fd_comparison(&p, &neg, &g1, &grid, 600).unwrap().passed());
        assert!(!check_fd_comparison(&p, &g1, &neg, &grid, 600).unwrap().passed());

        let q = problem(&[0.25, 1.0], Driver::zero(), TerminalCondition::abs());
        let u1 = solve_fd(&q, &grid, 600).unwrap();
        let u2 = solve_fd(&q.with_terminal(g1.affine_map(1.0, 1.0)), &grid, 600).unwrap();
        for (a, b) in u1.initial().iter().zip(u2.initial()) {
            assert!((b - a - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_g_doubles_u() {
        let p = problem(&[0.25, 1.0], Driver::zero(), TerminalCondition::abs());
        let grid = SpatialGrid::centered(&[0.0], 5.0, 101).unwrap();
        let u = solve_fd(&p, &grid, 500).unwrap();
        let v = solve_fd(&p.with_terminal(p.g.affine_map(2.0, 0.0)), &grid, 500).unwrap();
        for (a, b) in u.initial().iter().zip(v.initial()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn singleton_matches_plain_linear_scheme() {
        let p = problem(&[0.7], Driver::zero(), TerminalCondition::abs());
        let grid = SpatialGrid::centered(&[0.0], 4.0, 81).unwrap();
        let n = 400;
        let u = solve_fd(&p, &grid, n).unwrap();
        let dx = grid.dx(0);
        let dt = 1.0 / n as f64;
        let mut v: Vec<f64> = (0..grid.len()).map(|i| grid.point(i)[0].abs()).collect();
        for _ in 0..n {
            let prev = v.clone();
            for i in 1..grid.len() - 1 {
                let lin = 0.5 * 0.7 * (prev[i + 1] - 2.0 * prev[i] + prev[i - 1]) / (dx * dx) + 0.0 * (prev[i + 1] - prev[i]) / dx;
                v[i] = prev[i] + dt * (lin + 0.0);
            }
        }
        assert_eq!(u.initial(), v.as_slice());
    }

    #[test]
    fn consistency_order_on_heat() {
        let exact = (-0.5f64).exp();
        let p = problem(
            &[1.0],
            Driver::zero(),
            TerminalCondition::new(Arc::new(|x: &[f64]| x[0].cos()), 1.0, "cos"),
        );
        let coarse = solve_fd(&p, &SpatialGrid::centered(&[0.0], 8.0, 81).unwrap(), 100).unwrap();
        let fine = solve_fd(&p, &SpatialGrid::centered(&[0.0], 8.0, 161).unwrap(), 400).unwrap();
        let e1 = (coarse.probe(0.0, &[0.0]) - exact).abs();
        let e2 = (fine.probe(0.0, &[0.0]) - exact).abs();
        assert!(e1 / e2 >= 3.0, "{e1} {e2}");
    }

    #[test]
    fn step_is_monotone() {
        let p = problem(&[0.25, 1.0], Driver::discount_gradient(0.5, 0.3, 2.0, 1), TerminalCondition::abs());
        let scheme = FdScheme::new(&p, SpatialGrid::centered(&[0.0], 5.0, 101).unwrap(), 600).unwrap();
        let base = scheme.terminal();
        let mut out = vec![0.0; base.len()];
        scheme.step(10, &base, &mut out);
        for node in [3, 40, 50, 77] {
            let mut bumped = base.clone();
            bumped[node] += 0.37;
            let mut o2 = vec![0.0; base.len()];
            scheme.step(10, &bumped, &mut o2);
            for (a, b) in out.iter().zip(&o2) {
                assert!(b - a >= -1e-14);
            }
        }
    }

    #[test]
    fn two_dimensional_cross_stencil() {
        use nalgebra::DMatrix;
        let a1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        let a2 = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, 0.2, 0.6]);
        let set = GeneratorSet::new(
            vec![
                LinearGenerator::constant(&[0.0, 0.0], a1).unwrap(),
                LinearGenerator::constant(&[0.0, 0.0], a2).unwrap(),
            ],
            0.2,
            1.0,
        )
        .unwrap();
        let p = ParabolicProblem::new(set, Driver::zero(), TerminalCondition::square(), 1.0).unwrap();
        let grid = SpatialGrid::centered(&[0.0, 0.0], 6.0, 61).unwrap();
        let u = solve_fd(&p, &grid, 800).unwrap();
        // sup of trace over the set: max(1.5, 1.2)
        assert!((u.probe(0.0, &[0.0, 0.0]) - 1.5).abs() < 0.01);

        let strong = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let set = GeneratorSet::new(vec![LinearGenerator::constant(&[0.0, 0.0], strong).unwrap()], 0.05, 1.0).unwrap();
        let p = ParabolicProblem::new(set, Driver::discount_gradient(0.0, 1.0, 1.0, 2), TerminalCondition::abs(), 1.0)
            .unwrap();
        assert!(matches!(
            solve_fd(&p, &SpatialGrid::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![5, 41]).unwrap(), 4000),
            Err(crate::Error::NonMonotone(_))
        ));
    }

    #[test]
    fn slice_csv_and_probe() {
        let p = problem(&[1.0], Driver::zero(), TerminalCondition::square());
        let u = solve_fd(&p, &SpatialGrid::centered(&[0.0], 6.0, 61).unwrap(), 200).unwrap();
        assert!((u.probe(1.0, &[0.4]) - 0.16).abs() < 1e-12);
        assert!((u.probe(1.0, &[0.5]) - 0.26).abs() < 1e-12);
        let mut buf = Vec::new();
        u.write_slice_csv(0, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 62);
        assert!(u.write_slice_csv(1, Vec::new()).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let t = growth_transform(2.5, 0.0, 1.0, 2).unwrap();
        let x = [0.7, -1.3];
        let h = 1e-5;
        let g = t.grad_phi(&x);
        let hs = t.hess_phi(&x);
        for j in 0..2 {
            let mut p = x;
            let mut m = x;
            p[j] += h;
            m[j] -= h;
            assert!(((t.phi(&p) - t.phi(&m)) / (2.0 * h) - g[j]).abs() < 1e-6);
            let gp = t.grad_phi(&p);
            let gm = t.grad_phi(&m);
            for i in 0..2 {
                assert!(((gp[i] - gm[i]) / (2.0 * h) - hs[(i, j)]).abs() < 1e-6);
            }
        }
    }
}
