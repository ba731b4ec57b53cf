//! Randomized invariants: comparison, monotonicity in the penalties and the
//! expression printer.

mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rbsde::diagnostics::comparison_check;
use rbsde::engine::{NodeProblem, Reflection};
use rbsde::expr::{eval, parse, Env, Var};
use rbsde::model::{build_lattice, Barrier, BarrierPair, Driver, TerminalCondition};

fn problem(steps: usize, shift: f64, slope: f64, lower: f64, upper: f64) -> NodeProblem {
    let l = build_lattice(1.0, steps).unwrap();
    NodeProblem::new(
        &l,
        Arc::new(
            Driver::new(1.0 + shift.abs(), move |_, y, z| {
                shift + slope * z - 0.5 * y
            })
            .with_lipschitz(1.0),
        ),
        &BarrierPair::new(Barrier::constant(lower), Barrier::constant(upper)),
        &TerminalCondition::new(move |x: f64| x.clamp(lower, upper)),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn larger_driver_gives_larger_solution(
        steps in 5usize..30,
        shift in -1.0f64..1.0,
        bump in 0.0f64..1.0,
        slope in -0.9f64..0.9,
    ) {
        let a = problem(steps, shift, slope, -0.4, 0.4).solve(Reflection::CLAMP).unwrap();
        let b = problem(steps, shift + bump, slope, -0.4, 0.4).solve(Reflection::CLAMP).unwrap();
        prop_assert!(comparison_check(&a.y, &b.y, None).unwrap().passed());
    }

    #[test]
    fn penalized_solution_monotone_in_penalties(
        steps in 5usize..25,
        shift in -1.5f64..1.5,
        m in 1.0f64..200.0,
        factor in 1.0f64..8.0,
    ) {
        let p = problem(steps, shift, 0.3, -0.3, 0.3);
        let base = p.solve(Reflection::penalized(m, m)).unwrap();
        let more_m = p.solve(Reflection::penalized(m * factor, m)).unwrap();
        let more_n = p.solve(Reflection::penalized(m, m * factor)).unwrap();
        prop_assert!(comparison_check(&base.y, &more_m.y, None).unwrap().passed());
        prop_assert!(comparison_check(&more_n.y, &base.y, None).unwrap().passed());
    }

    #[test]
    fn reflected_solution_respects_barriers_and_identity(
        steps in 2usize..40,
        shift in -2.0f64..2.0,
        lower in -1.0f64..0.0,
        width in 0.0f64..1.0,
    ) {
        let q = problem(steps, shift, 0.5, lower, lower + width).solve(Reflection::CLAMP).unwrap();
        for (_, y) in q.y.iter() {
            prop_assert!(y >= lower - 1e-12 && y <= lower + width + 1e-12);
        }
        prop_assert!(q.identity_residual() <= 1e-10);
        prop_assert!(q.worst_decrease() <= 0.0);
    }
}

fn arb_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| format!("{}", n as f64 / 8.0)),
        Just("t".to_string()),
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z".to_string()),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (
                inner.clone(),
                inner.clone(),
                prop::sample::select(vec!["+", "-", "*"])
            )
                .prop_map(|(a, b, op)| format!("({a} {op} {b})")),
            inner.clone().prop_map(|a| format!("-{a}")),
            (
                inner.clone(),
                prop::sample::select(vec!["abs", "pos", "sin", "cos", "exp"])
            )
                .prop_map(|(a, f)| format!("{f}({a})")),
            (
                inner.clone(),
                inner,
                prop::sample::select(vec!["min", "max"])
            )
                .prop_map(|(a, b, f)| format!("{f}({a}, {b})")),
        ]
    })
}

proptest! {
    #[test]
    fn printed_expressions_reparse_to_the_same_tree(src in arb_expr()) {
        let e = parse(&src).unwrap();
        let again = parse(&e.to_string()).unwrap();
        prop_assert_eq!(&again, &e);
        let env = Env::new().with(Var::T, 0.3).with(Var::X, -0.7).with(Var::Y, 0.2).with(Var::Z, 1.1);
        let (a, b) = (eval(&e, &env), eval(&again, &env));
        match (a, b) {
            (Ok(u), Ok(v)) => prop_assert!(u.to_bits() == v.to_bits() || (u.is_nan() && v.is_nan())),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "evaluation disagreed"),
        }
    }
}
