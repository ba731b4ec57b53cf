#![allow(dead_code)]

use rbsde::model::{Barrier, BarrierPair, Driver, ProblemSpec, TerminalCondition, TimeGrid};

pub const STRIKE: f64 = 1.0;
pub const RATE: f64 = 0.05;

pub fn put_obstacle(t: f64, x: f64) -> f64 {
    (STRIKE - (x - 0.5 * t).exp()).max(0.0)
}

/// American put on the lattice, discounted through the driver `-r y`.
pub fn american_put(steps: usize) -> ProblemSpec {
    ProblemSpec::new(
        TimeGrid::new(1.0, steps).unwrap(),
        Driver::linear(-RATE).with_lipschitz(RATE),
        BarrierPair::lower_only(Barrier::from_fn(put_obstacle)),
        TerminalCondition::new(|x| put_obstacle(1.0, x)),
    )
}

/// Textbook backward induction in stock-price form, discounting by
/// `1 / (1 + r dt)`.
pub fn put_dynamic_program(steps: usize) -> Vec<Vec<f64>> {
    let dt = 1.0 / steps as f64;
    let s =
        |k: usize, j: usize| ((2.0 * j as f64 - k as f64) * dt.sqrt() - 0.5 * k as f64 * dt).exp();
    let mut levels = vec![Vec::new(); steps + 1];
    levels[steps] = (0..=steps)
        .map(|j| (STRIKE - s(steps, j)).max(0.0))
        .collect();
    for k in (0..steps).rev() {
        levels[k] = (0..=k)
            .map(|j| {
                let cont = 0.5 * (levels[k + 1][j] + levels[k + 1][j + 1]) / (1.0 + RATE * dt);
                cont.max(STRIKE - s(k, j))
            })
            .collect();
    }
    levels
}

/// The double-barrier toy exactly as stated: `f = z - y`, zero terminal.
pub fn literal_toy(steps: usize) -> ProblemSpec {
    ProblemSpec::new(
        TimeGrid::new(1.0, steps).unwrap(),
        Driver::new(1.0, |_, y, z| z - y).with_lipschitz(1.0),
        BarrierPair::new(
            Barrier::from_fn(|t, _| -0.3 + 0.1 * t),
            Barrier::constant(0.3),
        ),
        TerminalCondition::constant(0.0),
    )
}

/// Same barriers with a forcing term strong enough to reach both of them.
pub fn forced_toy(steps: usize) -> ProblemSpec {
    ProblemSpec::new(
        TimeGrid::new(1.0, steps).unwrap(),
        Driver::new(2.5, |t, y, z| {
            z - y + 2.5 * (std::f64::consts::PI * t).cos()
        })
        .with_lipschitz(1.0),
        BarrierPair::new(
            Barrier::from_fn(|t, _| -0.3 + 0.1 * t),
            Barrier::constant(0.3),
        ),
        TerminalCondition::new(|x: f64| x.clamp(-0.2, 0.3)),
    )
}

pub const SWEEP: [f64; 5] = [4.0, 16.0, 64.0, 256.0, 1024.0];
