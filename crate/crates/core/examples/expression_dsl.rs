// Parsing, printing and evaluating driver expressions.

use rbsde::expr::{eval, parse, parse_restricted, slope_bounds, Env, Var};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let e = parse("-0.05*y + 0.2*abs(z) - pos(t - 0.5)")?;
    println!("parsed:  {e}");
    let env = Env::new()
        .with(Var::T, 0.75)
        .with(Var::Y, 1.0)
        .with(Var::Z, -2.0);
    println!("value at t=0.75, y=1, z=-2: {}", eval(&e, &env)?);
    if let Some((ly, lz)) = slope_bounds(&e) {
        println!("Lipschitz bounds: y {ly}, z {lz}");
    }
    // printing and reparsing gives the same tree
    assert_eq!(parse(&e.to_string())?, e);

    match parse_restricted("max(x, y)", &[Var::T, Var::X]) {
        Err(err) => println!("barrier rejected: {err}"),
        Ok(_) => unreachable!("barriers may not depend on y"),
    }
    match parse("1 + * 2") {
        Err(err) => println!("syntax error: {err}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
