// Removing the driver, or a nondecreasing process, by shifting the data.

use rbsde::engine::{driver_shift_transform, k_shift_transform, KProcess, NodeProblem, Reflection};
use rbsde::model::{Barrier, BarrierPair, Driver, ProblemSpec, TerminalCondition, TimeGrid};

fn obstacle(t: f64, x: f64) -> f64 {
    (1.0 - (x - 0.5 * t).exp()).max(0.0)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ProblemSpec::new(
        TimeGrid::new(1.0, 12)?,
        Driver::linear(-0.05),
        BarrierPair::lower_only(Barrier::from_fn(obstacle)),
        TerminalCondition::new(|x| obstacle(1.0, x)),
    );
    let problem = NodeProblem::from_spec(&spec);
    let q = problem.solve(Reflection::CLAMP)?;

    let shifted = driver_shift_transform(&problem, &q);
    let gap = shifted.target_gap(Reflection::CLAMP)?.unwrap_or(f64::NAN);
    println!("zero-driver re-solve, max gap to the shifted solution: {gap:.2e}");
    let w = shifted.solve(Reflection::CLAMP)?;
    let tree = shifted.tree_discrepancy(&w.y, Reflection::CLAMP)?;
    println!("same problem solved path by path on the full tree: {tree:.2e}");

    // feed a penalized run's own K back in
    let two_sided = problem
        .clone()
        .with_driver(std::sync::Arc::new(Driver::zero()));
    let pen = two_sided.solve(Reflection::penalized(50.0, 50.0))?;
    let k_shift = k_shift_transform(&two_sided, &KProcess::Increments(pen.dk.clone()))?;
    let solved = k_shift.solve(Reflection::penalized(50.0, 0.0))?;
    println!(
        "K-shifted Y0 {:.8} vs Y0 - K_0 {:.8}",
        solved.y0(),
        pen.y0()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
