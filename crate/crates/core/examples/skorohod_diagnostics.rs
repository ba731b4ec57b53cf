// Complementarity residuals, the penalization sandwich and minimality
// against random supersolutions.

use std::sync::Arc;

use rbsde::diagnostics::{
    minimality_check, penalized_skorohod_residual, random_supersolutions, sample_test_pairs,
    sandwich_check, skorohod_residual,
};
use rbsde::engine::{NodeProblem, Reflection};
use rbsde::model::{build_lattice, Barrier, BarrierPair, Driver, TerminalCondition};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = build_lattice(1.0, 80)?;
    let problem = NodeProblem::new(
        &lattice,
        Arc::new(Driver::new(1.0, |_, y, z| z - y).with_lipschitz(1.0)),
        &BarrierPair::new(
            Barrier::from_fn(|t, _| -0.3 + 0.4 * t * (1.0 - t)),
            Barrier::from_fn(|t, _| 0.3 - 0.4 * t * (1.0 - t)),
        ),
        &TerminalCondition::new(|x: f64| x.clamp(-0.3, 0.3)),
    );
    let oracle = problem.solve(Reflection::CLAMP)?;
    let thetas = [0.0, 0.25, 0.5, 0.75, 1.0];
    for pair in sample_test_pairs(&oracle, &problem.lower, &problem.upper, &thetas)? {
        let (ra, rk) = skorohod_residual(&oracle, &pair)?;
        println!(
            "theta {:.2}: r_A = {ra:e}, r_K = {rk:e}",
            pair.theta.unwrap_or(f64::NAN)
        );
    }

    for m in [4.0, 64.0, 1024.0] {
        let q = problem.solve(Reflection::penalized(m, m))?;
        let (ra, rk) = penalized_skorohod_residual(&q, &problem.lower, &problem.upper, 0.0)?;
        let s = sandwich_check(&problem, &oracle, m, m)?;
        println!(
            "m = n = {m:>5}: residuals ({ra:.3e}, {rk:.3e}), {:.6} <= {:.6} <= {:.6} holds: {}",
            s.y_minus0,
            s.y0,
            s.y_plus0,
            s.passed()
        );
    }

    let lower_only = problem.clone().without_upper();
    let reflected = lower_only.solve(Reflection::CLAMP)?;
    let candidates = random_supersolutions(&lower_only, 50, 1, 0.05)?;
    let report = minimality_check(&lower_only, &reflected, &candidates)?;
    println!(
        "{} supersolutions dominating L, {} fall below the reflected solution",
        report.candidates, report.violations
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
