//! `u(t,x) = sup E(Y_t)`: control searches, dynamic programming and
//! regularity diagnostics.

mod checks;
mod problem;
mod search;

pub use checks::{
    check_dpp, check_regularity, DppOutcome, DppSettings, RegularityOutcome, RegularitySettings,
    SpaceTime, DPP_FLOOR,
};
pub use problem::{CandidateValue, Method, ParabolicProblem, ValueEstimate};
pub use search::{
    select_markovian_rule, value_bruteforce, value_fixed_control, value_markovian, ENUMERATION_LIMIT,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsde::{Driver, TerminalCondition};
    use crate::stochastic::ControlSchedule;
    use crate::sublinear::{GeneratorSet, LinearGenerator};

    fn gheat(g: TerminalCondition) -> ParabolicProblem {
        let set = GeneratorSet::new(
            vec![LinearGenerator::scalar(0.25).unwrap(), LinearGenerator::scalar(1.0).unwrap()],
            0.125,
            1.0,
        )
        .unwrap();
        ParabolicProblem::new(set, Driver::zero(), g, 1.0).unwrap()
    }

    fn heat(a: f64, f: Driver) -> ParabolicProblem {
        let set = GeneratorSet::new(vec![LinearGenerator::scalar(a).unwrap()], a / 2.0, 1.0).unwrap();
        ParabolicProblem::new(set, f, TerminalCondition::square(), 1.0).unwrap()
    }

    #[test]
    fn fixed_control_closed_forms() {
        for (a, exact) in [(1.0, 1.0), (0.25, 0.25)] {
            let p = heat(a, Driver::zero());
            let ctrl = ControlSchedule::constant(p.grid_from(0.0).unwrap(), 0);
            let e = value_fixed_control(&p, &ctrl, 0.0, &[0.0], 10_000, 3).unwrap();
            assert!((e.value - exact).abs() <= 3.0 * e.std_error, "{a}: {}", e.value);
            assert_eq!(e.n_steps, 50);
        }
    }

    #[test]
    fn bruteforce_picks_the_closed_form_control() {
        let convex = value_bruteforce(&gheat(TerminalCondition::square()), 0.0, &[0.0], 4, 10_000, 5).unwrap();
        assert!((convex.value - 1.0).abs() <= 0.03f64.max(3.0 * convex.std_error), "{}", convex.value);
        assert_eq!(convex.best_control.constant_choice(), Some(1));
        assert_eq!(convex.candidates.len(), 16);

        let concave = value_bruteforce(&gheat(TerminalCondition::neg_square()), 0.0, &[0.0], 4, 10_000, 5).unwrap();
        assert!((concave.value + 0.25).abs() <= 0.03f64.max(3.0 * concave.std_error), "{}", concave.value);
        assert_eq!(concave.best_control.constant_choice(), Some(0));
        for c in &concave.candidates {
            assert!(c.value <= concave.value);
        }
    }

    #[test]
    fn singleton_bruteforce_equals_fixed_control() {
        let p = heat(1.0, Driver::discount(0.5));
        let b = value_bruteforce(&p, 0.0, &[0.3], 4, 2_000, 8).unwrap();
        let ctrl = ControlSchedule::constant(p.grid_from(0.0).unwrap(), 0);
        let f = value_fixed_control(&p, &ctrl, 0.0, &[0.3], 2_000, 8).unwrap();
        assert_eq!(b.value, f.value);
        assert_eq!(b.std_error, f.std_error);
    }

    #[test]
    fn enumeration_guard() {
        let err = value_bruteforce(&gheat(TerminalCondition::square()), 0.0, &[0.0], 14, 100, 1).unwrap_err();
        assert!(matches!(err, crate::Error::EnumerationGuard { candidates: 16384, .. }));
        assert!(err.to_string().contains("Markovian"));
    }

    #[test]
    fn enlarging_the_set_never_lowers_the_value() {
        let p = gheat(TerminalCondition::abs());
        let mut small = p.clone();
        small.set = p.set.subset(&[0]).unwrap();
        let full = value_bruteforce(&p, 0.0, &[0.0], 3, 2_000, 4).unwrap();
        let part = value_bruteforce(&small, 0.0, &[0.0], 3, 2_000, 4).unwrap();
        assert!(full.value >= part.value);
    }

    #[test]
    fn argmax_is_invariant_under_positive_scaling() {
        let p = gheat(TerminalCondition::abs());
        let a = value_bruteforce(&p, 0.0, &[0.2], 3, 2_000, 6).unwrap();
        let scaled = p.with_terminal(p.g.affine_map(3.5, 0.0));
        let b = value_bruteforce(&scaled, 0.0, &[0.2], 3, 2_000, 6).unwrap();
        assert_eq!(a.best_control, b.best_control);
    }

    #[test]
    fn markovian_matches_bruteforce_on_gheat() {
        let convex = value_markovian(&gheat(TerminalCondition::square()), 0.0, &[0.0], 8, 10_000, 5).unwrap();
        assert!((convex.value - 1.0).abs() <= 0.03f64.max(3.0 * convex.std_error), "{}", convex.value);
        assert_eq!(convex.best_control.constant_choice(), Some(1));
        let concave = value_markovian(&gheat(TerminalCondition::neg_square()), 0.0, &[0.0], 8, 10_000, 5).unwrap();
        assert!((concave.value + 0.25).abs() <= 0.03f64.max(3.0 * concave.std_error));
        assert_eq!(concave.best_control.constant_choice(), Some(0));
        // constant rules reproduce the brute-force numbers exactly
        let brute = value_bruteforce(&gheat(TerminalCondition::square()), 0.0, &[0.0], 4, 10_000, 5).unwrap();
        assert_eq!(brute.value, convex.value);
    }

    #[test]
    fn dpp_collapses_at_the_horizon() {
        let p = gheat(TerminalCondition::square());
        let out = check_dpp(&p, 0.0, &[0.0], 1.0, 2_000, 2, DppSettings::default()).unwrap();
        assert_eq!(out.direct.value, out.restart.value);
        assert!(out.report.passed());
    }

    #[test]
    fn dpp_singleton_heat() {
        let p = heat(1.0, Driver::zero());
        let out = check_dpp(&p, 0.0, &[0.0], 0.5, 4_000, 2, DppSettings::default()).unwrap();
        assert!(out.report.passed(), "{} vs {}", out.restart.value, out.direct.value);
    }

    #[test]
    fn regularity_same_point_is_zero() {
        let p = heat(1.0, Driver::zero());
        let a = SpaceTime::new(0.0, vec![0.5]);
        let settings = RegularitySettings {
            paths: 1_000,
            ..Default::default()
        };
        let out = check_regularity(&p, &[(a.clone(), a)], settings).unwrap();
        assert!(out.report.passed());
        assert_eq!(out.growth, None);
    }

    #[test]
    fn csv_and_json_outputs() {
        let e = value_bruteforce(&gheat(TerminalCondition::square()), 0.0, &[0.0], 2, 500, 1).unwrap();
        let mut buf = Vec::new();
        e.write_candidates_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
        let j = e.summary_json();
        assert_eq!(j["seed"], 1);
        assert_eq!(j["method"], "bruteforce(K=2)");
    }
}
