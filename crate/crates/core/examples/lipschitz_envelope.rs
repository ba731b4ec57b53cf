// Inf-convolution approximants of the non-Lipschitz driver sqrt(|y|).

use rbsde::lipschitz::{lipschitz_probe, monotonicity_probe, ApproxFamily, ProbePoint};
use rbsde::model::Driver;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let f = Driver::new(1.0, |_, y: f64, _| y.abs().sqrt()).with_dependence(true, false);
    let levels = vec![2.0, 4.0, 8.0, 16.0];
    let family = ApproxFamily::new(f, levels.clone())?;

    println!(
        "{:>6} {:>9} {}",
        "y",
        "f(y)",
        levels
            .iter()
            .map(|p| format!("{:>9}", format!("f_{p}")))
            .collect::<String>()
    );
    for y in [-0.5, -0.05, 0.0, 0.01, 0.05, 0.25, 1.0] {
        let pt = ProbePoint::new(0.0, y, 0.0);
        let row: String = levels
            .iter()
            .map(|&p| family.inf_convolve(p, pt).map(|v| format!("{v:>9.5}")))
            .collect::<Result<_, _>>()?;
        println!("{y:>6} {:>9.5} {row}", y.abs().sqrt());
    }

    let points: Vec<ProbePoint> = (-20..=20)
        .map(|i| ProbePoint::new(0.0, i as f64 * 0.05, 0.0))
        .collect();
    let mono = monotonicity_probe(&family, &points)?;
    println!("ascending in p and below f: {}", mono.passed);
    let pairs: Vec<_> = points.windows(2).map(|w| (w[0], w[1])).collect();
    for &p in &levels {
        let r = lipschitz_probe(&family, p, &pairs)?;
        println!(
            "p = {p:>4}: largest slope {:.4}, slack {:.3}",
            r.max_ratio, r.slack
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
