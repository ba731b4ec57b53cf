// Regression Monte Carlo on coin-flip paths against the lattice.

use rbsde::engine::{NodeProblem, PenalizedDriver, Reflection};
use rbsde::mc::{simulate_paths, solve_penalized_mc, IncrementMode, RegressionBasis};
use rbsde::model::{Barrier, BarrierPair, Driver, ProblemSpec, TerminalCondition, TimeGrid};

fn obstacle(t: f64, x: f64) -> f64 {
    (1.0 - (x - 0.5 * t).exp()).max(0.0)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let steps = 6;
    let grid = TimeGrid::new(1.0, steps)?;
    let barriers = BarrierPair::lower_only(Barrier::from_fn(obstacle));
    let spec = ProblemSpec::new(
        grid,
        Driver::linear(-0.05),
        barriers.clone(),
        TerminalCondition::new(|x| obstacle(1.0, x)),
    );
    let m = 256.0;
    let lattice_y0 = NodeProblem::from_spec(&spec)
        .solve(Reflection::penalized(m, m))?
        .y0();
    let driver = PenalizedDriver::new(spec.driver.clone(), m, m, barriers);

    for paths in [1_000, 10_000, 100_000] {
        let bundle = simulate_paths(grid, paths, 11, IncrementMode::Coin)?;
        // degree N spans every function of the lattice state
        let mc = solve_penalized_mc(
            &bundle,
            &driver,
            &spec.terminal,
            RegressionBasis::new(steps),
        )?;
        let z = (mc.y0.mean - lattice_y0) / mc.y0.stderr;
        println!(
            "{paths:>7} paths: Y0 = {:.6} +- {:.6} (lattice {:.6}, {z:+.2} se), E[A_T] = {:.5}",
            mc.y0.mean, mc.y0.stderr, lattice_y0, mc.a_terminal.mean
        );
    }

    let bundle = simulate_paths(TimeGrid::new(1.0, 20)?, 20_000, 11, IncrementMode::Gaussian)?;
    let basis = RegressionBasis::new(4).with_barrier_feature();
    let spec20 = spec
        .clone()
        .with_terminal(TerminalCondition::new(|x| obstacle(1.0, x)));
    let mc = solve_penalized_mc(&bundle, &driver, &spec20.terminal, basis)?;
    println!(
        "Gaussian increments, N = 20: Y0 = {:.6} +- {:.6}",
        mc.y0.mean, mc.y0.stderr
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
