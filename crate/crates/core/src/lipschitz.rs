//! Inf-convolution approximants `f_p(x) = inf_x' { f(x') + p |x - x'|_1 }`.
//!
//! For a continuous `f` with `|f(t,y,z)| <= K(1 + |y| + |z|)` and `p > K` the
//! approximants are `p`-Lipschitz in `(y, z)`, bounded by the same growth
//! envelope, nondecreasing in `p` and converge to `f` from below. The
//! convolution runs jointly over `(y, z)` with `t` held fixed.
//!
//! The infimum is taken over a finite grid of step `h` anchored at the
//! integer multiples of `h`, plus the query point itself, restricted to the
//! l1 ball of radius `R = 2K(1+|y|+|z|)/(p-K) + 1` around the query. Every
//! minimizer of the exact problem lies in that ball, so the grid value
//! overestimates the true infimum by at most `(p + K) h`.

use thiserror::Error;

use crate::model::Driver;

pub const DEFAULT_GRID_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproxError {
    #[error("approximation level {level} must exceed the growth constant {growth}")]
    LevelTooLow { level: f64, growth: f64 },
    #[error("grid step must be positive, got {0}")]
    BadGridStep(f64),
    #[error("approximation family needs at least {needed} levels, has {found}")]
    TooFewLevels { needed: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePoint {
    pub t: f64,
    pub y: f64,
    pub z: f64,
}

impl ProbePoint {
    pub fn new(t: f64, y: f64, z: f64) -> Self {
        Self { t, y, z }
    }

    fn l1_to(&self, other: &ProbePoint) -> f64 {
        (self.y - other.y).abs() + (self.z - other.z).abs()
    }
}

/// A driver together with the ascending levels at which it is approximated.
#[derive(Debug, Clone)]
pub struct ApproxFamily {
    driver: Driver,
    levels: Vec<f64>,
    grid_step: f64,
}

impl ApproxFamily {
    pub fn new(driver: Driver, levels: Vec<f64>) -> Result<Self, ApproxError> {
        Self::with_grid_step(driver, levels, DEFAULT_GRID_STEP)
    }

    pub fn with_grid_step(
        driver: Driver,
        mut levels: Vec<f64>,
        grid_step: f64,
    ) -> Result<Self, ApproxError> {
        if !(grid_step > 0.0) {
            return Err(ApproxError::BadGridStep(grid_step));
        }
        let growth = driver.growth();
        if let Some(&level) = levels.iter().find(|&&p| !(p > growth)) {
            return Err(ApproxError::LevelTooLow { level, growth });
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Ok(Self {
            driver,
            levels,
            grid_step,
        })
    }

    pub fn driver(&self) -> &Driver {
        &self.driver
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    /// Worst-case overestimate of the exact infimum at level `p`.
    pub fn slack(&self, p: f64) -> f64 {
        (p + self.driver.growth()) * self.grid_step
    }

    /// `f_p(t, y, z)`.
    pub fn inf_convolve(&self, p: f64, point: ProbePoint) -> Result<f64, ApproxError> {
        let growth = self.driver.growth();
        if !(p > growth) {
            return Err(ApproxError::LevelTooLow { level: p, growth });
        }
        Ok(self.eval_unchecked(p, point))
    }

    fn eval_unchecked(&self, p: f64, ProbePoint { t, y, z }: ProbePoint) -> f64 {
        let f = &self.driver;
        // A p-Lipschitz f is its own inf-convolution.
        if f.lipschitz().is_some_and(|lip| lip <= p) {
            return f.eval(t, y, z);
        }
        let growth = f.growth();
        let radius = 2.0 * growth * (1.0 + y.abs() + z.abs()) / (p - growth) + 1.0;
        let h = self.grid_step;
        let mut best = f.eval(t, y, z);
        match (f.uses_y(), f.uses_z()) {
            (false, false) => {}
            (true, false) => {
                for yy in anchored(y, radius, h) {
                    best = best.min(f.eval(t, yy, z) + p * (y - yy).abs());
                }
            }
            (false, true) => {
                for zz in anchored(z, radius, h) {
                    best = best.min(f.eval(t, y, zz) + p * (z - zz).abs());
                }
            }
            (true, true) => {
                for yy in anchored(y, radius, h) {
                    let dy = (y - yy).abs();
                    let rest = radius - dy;
                    for zz in anchored(z, rest, h) {
                        let d = dy + (z - zz).abs();
                        best = best.min(f.eval(t, yy, zz) + p * d);
                    }
                }
            }
        }
        best
    }

    /// The approximant at level `p` packaged as a driver.
    ///
    /// The result declares Lipschitz constant `min(p, declared)`, which is
    /// what the lattice stability gate checks.
    pub fn driver_at(&self, p: f64) -> Result<Driver, ApproxError> {
        let growth = self.driver.growth();
        if !(p > growth) {
            return Err(ApproxError::LevelTooLow { level: p, growth });
        }
        let lip = self.driver.lipschitz().map_or(p, |l| l.min(p));
        let (uy, uz) = (self.driver.uses_y(), self.driver.uses_z());
        let label = format!("{}_{p}", self.driver.label());
        let family = self.clone();
        Ok(Driver::new(growth, move |t, y, z| {
            family.eval_unchecked(p, ProbePoint { t, y, z })
        })
        .with_lipschitz(lip)
        .with_dependence(uy, uz)
        .with_label(label))
    }
}

/// Grid points `i * h` within `radius` of `center`.
fn anchored(center: f64, radius: f64, h: f64) -> impl Iterator<Item = f64> {
    let lo = ((center - radius) / h).ceil() as i64;
    let hi = ((center + radius) / h).floor() as i64;
    (lo..=hi).map(move |i| i as f64 * h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// Largest measured ratio `|f_p(a) - f_p(b)| / |a - b|_1`.
    pub max_ratio: f64,
    /// Largest `|f_p(a) - f_p(b)| - p |a - b|_1`; must stay below `slack`.
    pub worst_excess: f64,
    pub slack: f64,
    pub pairs: usize,
    pub passed: bool,
}

pub fn lipschitz_probe(
    family: &ApproxFamily,
    p: f64,
    pairs: &[(ProbePoint, ProbePoint)],
) -> Result<ProbeReport, ApproxError> {
    let slack = family.slack(p);
    let mut max_ratio: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    for (a, b) in pairs {
        let d = a.l1_to(b);
        if d == 0.0 {
            continue;
        }
        let diff = (family.inf_convolve(p, *a)? - family.inf_convolve(p, *b)?).abs();
        max_ratio = max_ratio.max(diff / d);
        worst_excess = worst_excess.max(diff - p * d);
    }
    let worst_excess = worst_excess.max(0.0);
    Ok(ProbeReport {
        max_ratio,
        worst_excess,
        slack,
        pairs: pairs.len(),
        passed: worst_excess <= slack,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// Largest `f_p - f_q` over probed points and consecutive levels `p < q`.
    pub worst_descent: f64,
    /// Largest `f_p - f` over probed points and levels.
    pub worst_domination: f64,
    /// Largest gap `f - f_p` at the top level.
    pub top_gap: f64,
    /// `values[i][l]` is `f_{levels[l]}` at point `i`.
    pub values: Vec<Vec<f64>>,
    pub passed: bool,
}

pub fn monotonicity_probe(
    family: &ApproxFamily,
    points: &[ProbePoint],
) -> Result<MonotonicityReport, ApproxError> {
    let levels = family.levels();
    if levels.len() < 2 {
        return Err(ApproxError::TooFewLevels {
            needed: 2,
            found: levels.len(),
        });
    }
    let mut worst_descent = f64::NEG_INFINITY;
    let mut worst_domination = f64::NEG_INFINITY;
    let mut top_gap: f64 = 0.0;
    let mut passed = true;
    let mut values = Vec::with_capacity(points.len());
    for pt in points {
        let exact = family.driver().eval(pt.t, pt.y, pt.z);
        let row: Vec<f64> = levels
            .iter()
            .map(|&p| family.inf_convolve(p, *pt))
            .collect::<Result<_, _>>()?;
        for (l, w) in row.windows(2).enumerate() {
            let descent = w[0] - w[1];
            worst_descent = worst_descent.max(descent);
            passed &= descent <= family.slack(levels[l + 1]);
        }
        for (l, v) in row.iter().enumerate() {
            let dom = v - exact;
            worst_domination = worst_domination.max(dom);
            passed &= dom <= family.slack(levels[l]);
        }
        top_gap = top_gap.max(exact - row[row.len() - 1]);
        values.push(row);
    }
    Ok(MonotonicityReport {
        worst_descent: worst_descent.max(0.0),
        worst_domination: worst_domination.max(0.0),
        top_gap,
        values,
        passed,
    })
}

/// Largest `|f_p| - K(1 + |y| + |z|)` over the points (`<= 0` when the
/// growth envelope holds).
pub fn growth_excess(
    family: &ApproxFamily,
    p: f64,
    points: &[ProbePoint],
) -> Result<f64, ApproxError> {
    let k = family.driver().growth();
    let mut worst = f64::NEG_INFINITY;
    for pt in points {
        let v = family.inf_convolve(p, *pt)?;
        worst = worst.max(v.abs() - k * (1.0 + pt.y.abs() + pt.z.abs()));
    }
    Ok(worst)
}
