// The American put as a lower-reflected BSDE: clamped oracle against the
// penalized solutions.

use rbsde::engine::{NodeProblem, Reflection};
use rbsde::model::{
    validate_problem, Barrier, BarrierPair, Driver, ProblemSpec, TerminalCondition, TimeGrid,
};

fn obstacle(t: f64, x: f64) -> f64 {
    (1.0 - (x - 0.5 * t).exp()).max(0.0)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ProblemSpec::new(
        TimeGrid::new(1.0, 100)?,
        Driver::linear(-0.05),
        BarrierPair::lower_only(Barrier::from_fn(obstacle)),
        TerminalCondition::new(|x| obstacle(1.0, x)),
    );
    let report = validate_problem(&spec)?;
    for c in &report.checks {
        println!("{:<24} {:?}", c.assumption.to_string(), c.status);
    }

    let problem = NodeProblem::from_spec(&spec);
    let oracle = problem.solve(Reflection::CLAMP)?;
    println!(
        "oracle Y0 = {:.10}, E[A_T] = {:.6}",
        oracle.y0(),
        oracle.mean_a.last().unwrap()
    );
    for m in [4.0, 16.0, 64.0, 256.0, 1024.0] {
        let q = problem.solve(Reflection::penalized(m, m))?;
        let gap = oracle.y0() - q.y0();
        println!(
            "m = {m:>6}: Y0 = {:.10}, gap {gap:.3e}, m * gap {:.4}",
            q.y0(),
            m * gap
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
