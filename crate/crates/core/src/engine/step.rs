//! Scalar root finding for the semi-implicit backward step.
//!
//! At a node the step solves `F(y) = y - h(y) = 0` with
//! `h(y) = center + dt * [f(y) + m (L - y)^+ - n (y - U)^+]`.
//! Under `dt * Lip_y(f) <= 1/2` the map `F` has slope at least `1/2`, and the
//! penalty terms only steepen it, so a bracket always exists and Newton with
//! bisection fallback converges for any `m, n >= 0`.

const TOL: f64 = 1e-13;
const MAX_ITER: usize = 200;
const MAX_EXPANSIONS: usize = 64;

/// Outcome of one scalar solve. When `converged`, `|y - h(y)| <= 1e-12` or
/// the bracket has shrunk to adjacent floats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSolution {
    pub y: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

pub(crate) struct StepMap<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    pub uses_y: bool,
    pub center: f64,
    pub dt: f64,
    pub z: f64,
    pub growth: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub m: f64,
    pub n: f64,
}

impl StepMap<'_> {
    fn penalty(&self, y: f64) -> f64 {
        let mut p = 0.0;
        if let Some(l) = self.lower {
            if self.m > 0.0 {
                p += self.m * (l - y).max(0.0);
            }
        }
        if let Some(u) = self.upper {
            if self.n > 0.0 {
                p -= self.n * (y - u).max(0.0);
            }
        }
        p
    }

    /// `dt * [f(y) + penalties(y)]`.
    pub fn increment(&self, y: f64) -> f64 {
        self.dt * ((self.f)(y) + self.penalty(y))
    }

    fn residual(&self, y: f64) -> f64 {
        y - self.center - self.increment(y)
    }

    fn slope(&self, y: f64) -> f64 {
        let mut s = 1.0;
        if self.uses_y {
            let h = 1e-7 * y.abs().max(1.0);
            s -= self.dt * ((self.f)(y + h) - (self.f)(y - h)) / (2.0 * h);
        }
        if self.lower.is_some_and(|l| y < l) {
            s += self.dt * self.m;
        }
        if self.upper.is_some_and(|u| y > u) {
            s += self.dt * self.n;
        }
        s
    }

    fn half_width(&self) -> f64 {
        let c = self.center;
        let mut b = self.growth * (1.0 + c.abs() + self.z.abs()) + 1.0;
        if let Some(l) = self.lower {
            b += self.m * (l - c).abs();
        }
        if let Some(u) = self.upper {
            b += self.n * (c - u).abs();
        }
        self.dt * b
    }

    pub fn solve(&self) -> Option<StepSolution> {
        let c = self.center;
        if !c.is_finite() {
            return None;
        }
        let b = self.half_width();
        let mut lo = c - b;
        let mut hi = c + b;
        let mut f_lo = self.residual(lo);
        let mut f_hi = self.residual(hi);
        let mut width = b;
        let mut expansions = 0;
        while !(f_lo <= 0.0) || !(f_hi >= 0.0) {
            expansions += 1;
            if expansions > MAX_EXPANSIONS || !width.is_finite() {
                return None;
            }
            width *= 2.0;
            if !(f_lo <= 0.0) {
                lo = c - width;
                f_lo = self.residual(lo);
            }
            if !(f_hi >= 0.0) {
                hi = c + width;
                f_hi = self.residual(hi);
            }
        }
        if f_lo == 0.0 {
            return Some(done(lo, 0, 0.0));
        }
        if f_hi == 0.0 {
            return Some(done(hi, 0, 0.0));
        }

        let mut y = c.clamp(lo, hi);
        let mut fy = self.residual(y);
        let mut last_abs = f64::INFINITY;
        for it in 1..=MAX_ITER {
            if !fy.is_finite() {
                return None;
            }
            if fy.abs() <= TOL {
                return Some(done(y, it, fy));
            }
            if fy < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            if hi - lo <= 2.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
                let (fl, fh) = (self.residual(lo), self.residual(hi));
                let (yb, fb) = if fl.abs() <= fh.abs() {
                    (lo, fl)
                } else {
                    (hi, fh)
                };
                return Some(StepSolution {
                    y: yb,
                    converged: true,
                    iterations: it,
                    residual: fb,
                });
            }
            let d = self.slope(y);
            let newton = y - fy / d;
            let progressing = fy.abs() <= 0.5 * last_abs;
            last_abs = fy.abs();
            y = if d > 0.0 && newton > lo && newton < hi && progressing {
                newton
            } else {
                0.5 * (lo + hi)
            };
            fy = self.residual(y);
        }
        Some(StepSolution {
            y,
            converged: fy.abs() <= 1e-12,
            iterations: MAX_ITER,
            residual: fy,
        })
    }
}

fn done(y: f64, iterations: usize, residual: f64) -> StepSolution {
    StepSolution {
        y,
        converged: true,
        iterations,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map<'a>(f: &'a dyn Fn(f64) -> f64, center: f64, m: f64, l: Option<f64>) -> StepMap<'a> {
        StepMap {
            f,
            uses_y: true,
            center,
            dt: 0.01,
            z: 0.0,
            growth: 1.0,
            lower: l,
            upper: None,
            m,
            n: 0.0,
        }
    }

    #[test]
    fn linear_step_closed_form() {
        let f = |y: f64| -0.05 * y;
        let s = map(&f, 1.0, 0.0, None).solve().unwrap();
        assert!(s.converged);
        assert!((s.y - 1.0 / (1.0 + 0.05 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn huge_penalty_converges() {
        let f = |_y: f64| 0.0;
        for m in [1e2, 1e4, 1e6] {
            let s = map(&f, 0.0, m, Some(1.0)).solve().unwrap();
            assert!(s.converged, "m={m}: {s:?}");
            // y = dt m (1 - y)  =>  y = dt m / (1 + dt m)
            let want = 0.01 * m / (1.0 + 0.01 * m);
            assert!((s.y - want).abs() < 1e-12, "m={m}: {} vs {want}", s.y);
        }
    }

    #[test]
    fn kinked_driver() {
        let f = |y: f64| 3.0 * (0.2 - y).max(0.0) - (y + 0.1).abs();
        let s = map(&f, 0.15, 0.0, None).solve().unwrap();
        assert!(s.converged);
        assert!((s.y - 0.15 - 0.01 * f(s.y)).abs() <= 1e-12);
    }

    #[test]
    fn non_finite_center_fails() {
        let f = |_y: f64| 0.0;
        assert!(map(&f, f64::NAN, 0.0, None).solve().is_none());
    }
}
