// Penalization sweep over (m, n) for a double-barrier problem, followed by
// the iterated-limit study.

use rbsde::diagnostics::SupSampler;
use rbsde::model::{Barrier, BarrierPair, Driver, ProblemSpec, TerminalCondition, TimeGrid};
use rbsde::runner::{double_limit_study, run_schedule, PenalizationSchedule};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ProblemSpec::new(
        TimeGrid::new(1.0, 60)?,
        Driver::new(2.5, |t, y, z| {
            z - y + 2.5 * (std::f64::consts::PI * t).cos()
        })
        .with_lipschitz(1.0),
        BarrierPair::new(
            Barrier::from_fn(|t, _| -0.3 + 0.1 * t),
            Barrier::constant(0.3),
        ),
        TerminalCondition::new(|x: f64| x.clamp(-0.2, 0.3)),
    );
    let schedule = PenalizationSchedule::diagonal(vec![4.0, 16.0, 64.0, 256.0, 1024.0])?;
    let report = run_schedule(&spec, &schedule, SupSampler::default())?;
    println!("oracle Y0 = {:.8}", report.oracle_y0);
    println!("{:>6} {:>6} {:>12} {:>10}", "m", "n", "Y0", "gap");
    for r in report.records.iter().filter(|r| r.m == r.n) {
        println!(
            "{:>6} {:>6} {:>12.8} {:>10.3e}",
            r.m, r.n, r.y0, r.gap_vs_oracle
        );
    }
    if let Some(fit) = &report.decay {
        println!("log-log slope {:.3}", fit.slope);
    }
    println!(
        "monotonicity violations: m {}, n {}; envelope ok: {}",
        report.mono_viol_m, report.mono_viol_n, report.envelope.passed
    );

    let study = double_limit_study(&spec, &schedule)?;
    for r in &study.intermediates {
        println!(
            "m = {:>6}: Y0 at n = {} is {:.8}, extrapolated {:.8}",
            r.m, r.n_max, r.y0_at_n_max, r.extrapolated
        );
    }
    println!(
        "gap of the m-limit to the oracle: {:.3e}",
        study.m_limit_gap
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
