// Unreflected BSDEs on the binomial lattice.

use rbsde::engine::solve_bsde;
use rbsde::model::{build_lattice, Driver, Node, TerminalCondition};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = build_lattice(1.0, 200)?;

    let (y, _) = solve_bsde(
        &lattice,
        &Driver::zero(),
        &TerminalCondition::new(|x| x * x),
    )?;
    println!("E[B_T^2] on the tree: {:.15}", y.get(Node::ROOT));

    let (y, _) = solve_bsde(
        &lattice,
        &Driver::linear(0.1),
        &TerminalCondition::constant(1.0),
    )?;
    println!(
        "f = 0.1 y, xi = 1: Y0 = {:.6} (e^0.1 = {:.6})",
        y.get(Node::ROOT),
        0.1f64.exp()
    );

    // a driver that depends on z: xi = B_T gives Z = 1
    let f = Driver::new(1.0, |_, _, z| 0.5 * z).with_lipschitz(0.5);
    let (y, z) = solve_bsde(&lattice, &f, &TerminalCondition::new(|x| x))?;
    println!(
        "f = z/2, xi = B_T: Y0 = {:.6}, Z0 = {:.6}",
        y.get(Node::ROOT),
        z.get(Node::ROOT)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
