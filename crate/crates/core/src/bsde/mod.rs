//! Backward SDE solution by least-squares regression Monte Carlo.

mod checks;
mod driver;
mod solver;

pub use checks::{
    check_comparison, check_stopped, domination_evidence, DominationEvidence, BIAS_ALLOWANCE,
    SE_MULTIPLIER,
};
pub use driver::{
    transform_driver, Driver, DriverFn, DriverKind, TerminalCondition, TerminalFn, TerminalKind,
};
pub use solver::{
    solve_backward, solve_backward_controlled, solve_backward_stopped, BsdeSolution,
    MAX_FIXED_POINT_ITERATIONS,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::Basis;
    use crate::stochastic::{exit_time, make_bundle, simulate_forward, ControlSchedule, PathBundle, TimeGrid};
    use crate::sublinear::{GeneratorSet, LinearGenerator};

    fn heat_bundle(a: f64, paths: usize, n: usize, seed: u64) -> PathBundle {
        let set = GeneratorSet::new(vec![LinearGenerator::scalar(a).unwrap()], a / 2.0, 1.0).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, n).unwrap();
        let b = make_bundle(grid, paths, 1, seed).unwrap();
        simulate_forward(&set, &ControlSchedule::constant(grid, 0), &[0.0], &b).unwrap()
    }

    #[test]
    fn heat_square_terminal() {
        let b = heat_bundle(1.0, 10_000, 50, 11);
        let sol = solve_backward(&b, &TerminalCondition::square(), &Driver::zero(), Basis::default()).unwrap();
        assert!((sol.value() - 1.0).abs() <= 3.0 * sol.std_error(), "{} {}", sol.value(), sol.std_error());
        for m in 0..b.paths() {
            assert_eq!(sol.y(m, 50), b.x(m, 50)[0].powi(2));
        }
    }

    #[test]
    fn discounted_heat() {
        let b = heat_bundle(1.0, 100_000, 50, 11);
        let sol = solve_backward(&b, &TerminalCondition::square(), &Driver::discount(1.0), Basis::default()).unwrap();
        let exact = (-1.0f64).exp();
        assert!((sol.value() / exact - 1.0).abs() <= 0.02, "{}", sol.value());
        assert!(sol.max_iterations() <= MAX_FIXED_POINT_ITERATIONS);
    }

    #[test]
    fn constant_driver_adds_c_t() {
        let b = heat_bundle(1.0, 2_000, 20, 4);
        let g = TerminalCondition::square();
        let base = solve_backward(&b, &g, &Driver::zero(), Basis::default()).unwrap();
        let shifted = solve_backward(&b, &g, &Driver::constant(0.7), Basis::default()).unwrap();
        assert!((shifted.value() - base.value() - 0.7).abs() < 1e-9);
    }

    #[test]
    fn regression_matches_conditional_expectation() {
        // E[X_1^2 | X_k] = X_k^2 + (1 - t_k)
        let b = heat_bundle(1.0, 10_000, 10, 2);
        let sol = solve_backward(&b, &TerminalCondition::square(), &Driver::zero(), Basis::default()).unwrap();
        let k = 5;
        let t = b.grid().time(k);
        let err: f64 = (0..b.paths())
            .map(|m| sol.y(m, k) - b.x(m, k)[0].powi(2) - (1.0 - t))
            .sum::<f64>()
            / b.paths() as f64;
        assert!(err.abs() < 3.0 * sol.std_error(), "{err}");
        // Z_k ~ 2 X_k
        let zerr: f64 = (0..b.paths())
            .map(|m| (sol.z(m, k)[0] - 2.0 * b.x(m, k)[0]).abs())
            .sum::<f64>()
            / b.paths() as f64;
        assert!(zerr < 0.1, "{zerr}");
    }

    #[test]
    fn stability_under_terminal_shift() {
        let b = heat_bundle(1.0, 2_000, 20, 9);
        let g = TerminalCondition::abs();
        let f = Driver::discount_gradient(0.5, 0.3, 2.0, 1);
        let base = solve_backward(&b, &g, &f, Basis::default()).unwrap();
        let moved = solve_backward(&b, &g.affine_map(1.0, 0.1), &f, Basis::default()).unwrap();
        let shift = moved.value() - base.value();
        assert!(shift > 0.0 && shift <= 0.1 + 1e-9, "{shift}");
    }

    #[test]
    fn comparison_examples() {
        let b = heat_bundle(1.0, 2_000, 20, 13);
        let g1 = TerminalCondition::abs();
        let g2 = g1.affine_map(1.0, 1.0);
        let f = Driver::zero();
        let s1 = solve_backward(&b, &g1, &f, Basis::default()).unwrap();
        let s2 = solve_backward(&b, &g2, &f, Basis::default()).unwrap();
        let ev = domination_evidence(&b, &g1, &g2, &f, &f, &s2);
        assert!(ev.holds());
        assert!(check_comparison(&s1, &s2, &ev).unwrap().passed());
        assert!((s2.value() - s1.value() - 1.0).abs() < 1e-9);

        let same = check_comparison(&s1, &s1, &domination_evidence(&b, &g1, &g1, &f, &f, &s1)).unwrap();
        assert!(same.passed());

        let f2 = Driver::constant(0.5);
        let s3 = solve_backward(&b, &g1, &f2, Basis::default()).unwrap();
        let ev = domination_evidence(&b, &g1, &g1, &f, &f2, &s3);
        assert!(check_comparison(&s1, &s3, &ev).unwrap().passed());
        assert!((s3.value() - s1.value() - 0.5).abs() < 1e-9);

        // reversed order is rejected by the evidence
        let ev = domination_evidence(&b, &g2, &g1, &f, &f, &s1);
        assert!(!ev.holds());
        assert!(!check_comparison(&s2, &s1, &ev).unwrap().passed());
    }

    #[test]
    fn stopped_examples() {
        let b = heat_bundle(1.0, 4_000, 40, 21);
        let f = Driver::discount_gradient(0.5, 0.3, 2.0, 1);
        let n = b.n_steps();

        let vacuous = vec![n; b.paths()];
        let sol = solve_backward_stopped(&b, &TerminalCondition::abs(), &f, Basis::default(), &vacuous).unwrap();
        assert!(check_stopped(&sol, &vacuous).unwrap().passed());

        let tau = exit_time(&b, &[0.0], 0.8).unwrap();
        assert!(tau.iter().any(|&t| t < n));
        let frozen = b.freeze_at(&tau).unwrap();
        let sol = solve_backward_stopped(&frozen, &TerminalCondition::abs(), &f, Basis::default(), &tau).unwrap();
        let report = check_stopped(&sol, &tau).unwrap();
        assert!(report.passed(), "{report}");

        let zero = vec![0; b.paths()];
        let flat = b.freeze_at(&zero).unwrap();
        let sol = solve_backward_stopped(&flat, &TerminalCondition::abs(), &f, Basis::default(), &zero).unwrap();
        for k in 0..=n {
            assert_eq!(sol.y(0, k), 0.0);
        }
    }

    #[test]
    fn rank_deficiency_names_the_step() {
        let set = GeneratorSet::degenerate(vec![LinearGenerator::scalar(0.0).unwrap()]).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let b = make_bundle(grid, 100, 1, 1).unwrap();
        let b = simulate_forward(&set, &ControlSchedule::constant(grid, 0), &[0.0], &b).unwrap();
        // all states equal: the constant basis survives, no error
        let sol = solve_backward(&b, &TerminalCondition::square(), &Driver::zero(), Basis::default()).unwrap();
        assert_eq!(sol.value(), 0.0);
    }

    #[test]
    fn csv_has_one_row_per_step() {
        let b = heat_bundle(1.0, 200, 5, 1);
        let sol = solve_backward(&b, &TerminalCondition::square(), &Driver::zero(), Basis::default()).unwrap();
        let mut out = Vec::new();
        sol.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("k,t_k,mean_Y,std_Y,mean_abs_Z"));
    }
}
