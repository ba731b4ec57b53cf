use std::fmt;

use super::lattice::{Lattice, Node};
use super::problem::ProblemSpec;
use super::witness::check_mokobodzki_witness;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Terminal value finite and square integrable.
    TerminalIntegrability,
    /// Linear growth `|f| <= K(1 + |y| + |z|)`.
    LinearGrowth,
    /// `L <= U` everywhere and `L_T <= xi <= U_T`.
    BarrierOrder,
    /// `E[ess sup (L^+)^2] < inf` and the same for `U`.
    BarrierIntegrability,
    /// A semimartingale between the barriers exists.
    Mokobodzki,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::TerminalIntegrability => "terminal integrability",
            Assumption::LinearGrowth => "linear growth",
            Assumption::BarrierOrder => "barrier order",
            Assumption::BarrierIntegrability => "barrier integrability",
            Assumption::Mokobodzki => "Mokobodzki condition",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    /// Vacuous on a finite lattice.
    AutoPass,
    /// Non-fatal: reported but the problem is still accepted.
    Warning,
    Fail,
    NotSupplied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub status: CheckStatus,
    pub detail: String,
    /// Size of the worst violation found (0 when none).
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn status(&self, assumption: Assumption) -> Option<CheckStatus> {
        self.checks
            .iter()
            .find(|c| c.assumption == assumption)
            .map(|c| c.status)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Warning)
    }

    pub fn has_growth_warning(&self) -> bool {
        self.status(Assumption::LinearGrowth) == Some(CheckStatus::Warning)
    }
}

const GROWTH_TIMES: usize = 5;
const GROWTH_Y: usize = 21;
const GROWTH_Z: usize = 11;
const PROBE_RANGE: f64 = 10.0;
/// Rounding slack when comparing barriers and terminal values.
const ORDER_TOL: f64 = 1e-12;

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Checks the standing assumptions on the lattice.
///
/// Ordering failures reject the problem with [`ModelError::HardViolation`]
/// (worst node, ties broken by the first node in level order). A growth
/// violation only downgrades the report to a warning.
pub fn validate_problem(spec: &ProblemSpec) -> Result<ValidationReport, ModelError> {
    let lattice = spec.lattice();
    let mut checks = Vec::with_capacity(5);

    let terminal = spec.terminal.resolve(&lattice);
    let n = lattice.steps();
    if let Some(j) = terminal.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::HardViolation {
            assumption: Assumption::TerminalIntegrability,
            node: Node::new(n, j),
            detail: format!("terminal value {} is not finite", terminal[j]),
        });
    }
    checks.push(AssumptionCheck {
        assumption: Assumption::TerminalIntegrability,
        status: CheckStatus::AutoPass,
        detail: "finite at every terminal node; square integrability is automatic".into(),
        worst: 0.0,
    });

    checks.push(growth_check(spec));

    let order = order_check(spec, &lattice, &terminal);
    if let Some((node, gap, detail)) = order {
        return Err(ModelError::HardViolation {
            assumption: Assumption::BarrierOrder,
            node,
            detail: format!("{detail} (by {gap})"),
        });
    }
    checks.push(AssumptionCheck {
        assumption: Assumption::BarrierOrder,
        status: CheckStatus::Pass,
        detail: "L <= U at every node, L_T <= xi <= U_T".into(),
        worst: 0.0,
    });
    checks.push(AssumptionCheck {
        assumption: Assumption::BarrierIntegrability,
        status: CheckStatus::AutoPass,
        detail: "finitely many nodes".into(),
        worst: 0.0,
    });

    let witness = match &spec.witness {
        None => AssumptionCheck {
            assumption: Assumption::Mokobodzki,
            status: CheckStatus::NotSupplied,
            detail: "no witness supplied".into(),
            worst: 0.0,
        },
        Some(w) => {
            let ok = check_mokobodzki_witness(spec, w)?;
            AssumptionCheck {
                assumption: Assumption::Mokobodzki,
                status: if ok {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail
                },
                detail: if ok {
                    "witness verified".into()
                } else {
                    "witness rejected".into()
                },
                worst: 0.0,
            }
        }
    };
    checks.push(witness);
    Ok(ValidationReport { checks })
}

fn growth_check(spec: &ProblemSpec) -> AssumptionCheck {
    let k_growth = spec.driver.growth();
    let horizon = spec.grid.horizon();
    let mut worst = 0.0;
    let mut worst_at = None;
    for t in linspace(0.0, horizon, GROWTH_TIMES) {
        for y in linspace(-PROBE_RANGE, PROBE_RANGE, GROWTH_Y) {
            for z in linspace(-PROBE_RANGE, PROBE_RANGE, GROWTH_Z) {
                let v = spec.driver.eval(t, y, z);
                let bound = k_growth * (1.0 + y.abs() + z.abs());
                let excess = if v.is_finite() {
                    v.abs() - bound
                } else {
                    f64::INFINITY
                };
                if excess > 1e-12 * bound.max(1.0) && excess > worst {
                    worst = excess;
                    worst_at = Some((t, y, z, v, bound));
                }
            }
        }
    }
    match worst_at {
        None => AssumptionCheck {
            assumption: Assumption::LinearGrowth,
            status: CheckStatus::Pass,
            detail: format!(
                "{} probes within K(1+|y|+|z|), K = {k_growth}",
                GROWTH_TIMES * GROWTH_Y * GROWTH_Z
            ),
            worst: 0.0,
        },
        Some((t, y, z, v, bound)) => AssumptionCheck {
            assumption: Assumption::LinearGrowth,
            status: CheckStatus::Warning,
            detail: format!("|f({t}, {y}, {z})| = {} exceeds {bound}", v.abs()),
            worst,
        },
    }
}

fn order_check(
    spec: &ProblemSpec,
    lattice: &Lattice,
    terminal: &[f64],
) -> Option<(Node, f64, String)> {
    let mut worst: Option<(Node, f64, String)> = None;
    let mut record = |node: Node, gap: f64, detail: String| {
        let gap = if gap.is_nan() { f64::INFINITY } else { gap };
        if gap > ORDER_TOL && worst.as_ref().is_none_or(|w| gap > w.1) {
            worst = Some((node, gap, detail));
        }
    };
    let n = lattice.steps();
    for node in lattice.nodes() {
        let lo = spec.barriers.lower.at_node(lattice, node);
        let hi = spec.barriers.upper.at_node(lattice, node);
        if let (Some(l), Some(u)) = (lo, hi) {
            record(node, l - u, format!("L = {l} > U = {u}"));
        }
        if node.step == n {
            let xi = terminal[node.index];
            if let Some(l) = lo {
                record(node, l - xi, format!("L_T = {l} > xi = {xi}"));
            }
            if let Some(u) = hi {
                record(node, xi - u, format!("xi = {xi} > U_T = {u}"));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Barrier, BarrierPair, Driver, TerminalCondition, TimeGrid};

    fn spec(lower: f64, upper: f64, xi: f64) -> ProblemSpec {
        ProblemSpec::new(
            TimeGrid::new(1.0, 10).unwrap(),
            Driver::zero(),
            BarrierPair::new(Barrier::constant(lower), Barrier::constant(upper)),
            TerminalCondition::constant(xi),
        )
    }

    #[test]
    fn ordered_problem_passes() {
        let report = validate_problem(&spec(-1.0, 1.0, 0.0)).unwrap();
        assert_eq!(
            report.status(Assumption::BarrierOrder),
            Some(CheckStatus::Pass)
        );
        assert_eq!(
            report.status(Assumption::TerminalIntegrability),
            Some(CheckStatus::AutoPass)
        );
        assert_eq!(
            report.status(Assumption::Mokobodzki),
            Some(CheckStatus::NotSupplied)
        );
        assert!(!report.has_growth_warning());
    }

    #[test]
    fn crossed_barriers_rejected_at_root() {
        match validate_problem(&spec(1.0, 0.0, 0.5)) {
            Err(ModelError::HardViolation {
                assumption, node, ..
            }) => {
                assert_eq!(assumption, Assumption::BarrierOrder);
                assert_eq!(node, Node::ROOT);
            }
            other => panic!("expected hard violation, got {other:?}"),
        }
    }

    #[test]
    fn terminal_outside_barriers_rejected() {
        let err = validate_problem(&spec(-1.0, 1.0, 2.0)).unwrap_err();
        match err {
            ModelError::HardViolation { node, .. } => assert_eq!(node.step, 10),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn quadratic_driver_warns() {
        let s = spec(-1.0, 1.0, 0.0).with_driver(Driver::new(1.0, |_, y, _| y * y));
        let report = validate_problem(&s).unwrap();
        assert!(report.has_growth_warning());
        let w = report.warnings().next().unwrap();
        // worst probe is at |y| = 10, |z| = 0: 100 - 11
        assert!((w.worst - 89.0).abs() < 1e-9, "{}", w.worst);
    }

    #[test]
    fn validation_is_idempotent() {
        let s = spec(-1.0, 1.0, 0.0);
        assert_eq!(validate_problem(&s).unwrap(), validate_problem(&s).unwrap());
    }
}
