use serde::Serialize;

use super::{same_steps, DiagnosticsError, ROOT_TOL};
use crate::engine::{NodeProblem, Reflection, Side};
use crate::model::{Node, NodeField, SolutionQuadruple};

/// Probed evidence that problem A is dominated by problem B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderCertificate {
    /// `max (xi_A - xi_B)` over terminal nodes.
    pub terminal_excess: f64,
    /// `max (f_A - f_B)` over nodes and probe points.
    pub driver_excess: f64,
    pub probes: usize,
}

impl OrderCertificate {
    pub fn probe(a: &NodeProblem, b: &NodeProblem, ys: &[f64], zs: &[f64]) -> Self {
        let terminal_excess = a
            .terminal
            .iter()
            .zip(&b.terminal)
            .map(|(x, y)| x - y)
            .fold(f64::NEG_INFINITY, f64::max);
        let lattice = &a.lattice;
        let mut driver_excess = f64::NEG_INFINITY;
        let mut probes = 0;
        for node in lattice.nodes().filter(|n| n.step < lattice.steps()) {
            let t = lattice.time(node.step);
            for &y in ys {
                for &z in zs {
                    let d = a.driver.value(node, t, y, z) - b.driver.value(node, t, y, z);
                    driver_excess = driver_excess.max(d);
                    probes += 1;
                }
            }
        }
        Self {
            terminal_excess,
            driver_excess,
            probes,
        }
    }

    pub fn holds(&self) -> bool {
        self.terminal_excess <= 0.0 && self.driver_excess <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub violations: usize,
    /// Largest `Y_A - Y_B` (may be negative when B dominates strictly).
    pub worst: f64,
    pub first: Option<Node>,
    pub certified: bool,
}

impl ViolationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Counts nodes where `Y_A > Y_B + 1e-10`.
pub fn comparison_check(
    a: &NodeField,
    b: &NodeField,
    certificate: Option<&OrderCertificate>,
) -> Result<ViolationReport, DiagnosticsError> {
    same_steps(a.steps(), b.steps())?;
    let mut report = ViolationReport {
        violations: 0,
        worst: f64::NEG_INFINITY,
        first: None,
        certified: certificate.is_some_and(OrderCertificate::holds),
    };
    for (node, ya) in a.iter() {
        let d = ya - b.get(node);
        report.worst = report.worst.max(d);
        if d > ROOT_TOL {
            report.violations += 1;
            report.first.get_or_insert(node);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub below: ViolationReport,
    pub above: ViolationReport,
    pub y_minus0: f64,
    pub y0: f64,
    pub y_plus0: f64,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.below.passed() && self.above.passed()
    }
}

/// Brackets the penalized solution between two one-sided problems:
/// `Y+` keeps the lower penalty and adds the oracle's `A*` as an exogenous
/// push, `Y-` keeps the upper penalty and subtracts the oracle's `K*`.
pub fn sandwich_check(
    problem: &NodeProblem,
    oracle: &SolutionQuadruple,
    m: f64,
    n: f64,
) -> Result<SandwichReport, DiagnosticsError> {
    same_steps(problem.lattice.steps(), oracle.steps())?;
    let penalized = problem.solve(Reflection::penalized(m, n))?;
    let plus = problem
        .clone()
        .without_upper()
        .with_exogenous(oracle.da.clone())
        .solve(Reflection {
            lower: Side::Penalty(m),
            upper: Side::Ignore,
        })?;
    let minus = problem
        .clone()
        .without_lower()
        .with_exogenous(oracle.dk.map(|_, v| -v))
        .solve(Reflection {
            lower: Side::Ignore,
            upper: Side::Penalty(n),
        })?;
    Ok(SandwichReport {
        below: comparison_check(&minus.y, &penalized.y, None)?,
        above: comparison_check(&penalized.y, &plus.y, None)?,
        y_minus0: minus.y0(),
        y0: penalized.y0(),
        y_plus0: plus.y0(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lattice, Barrier, BarrierPair, Driver, TerminalCondition};
    use std::sync::Arc;

    fn problem(shift: f64) -> NodeProblem {
        let l = build_lattice(1.0, 30).unwrap();
        NodeProblem::new(
            &l,
            Arc::new(Driver::new(1.0, |_, y, z| 0.5 * z - y).with_lipschitz(1.0)),
            &BarrierPair::new(
                Barrier::constant(-0.25),
                Barrier::from_fn(|_, x| 0.2 + x.abs()),
            ),
            &TerminalCondition::new(move |x: f64| x.clamp(-0.2, 0.4) + shift),
        )
    }

    #[test]
    fn identical_and_shifted() {
        let a = problem(0.0);
        let b = problem(1.0);
        let ya = a.solve(Reflection::NONE).unwrap().y;
        let yb = b.solve(Reflection::NONE).unwrap().y;
        let cert = OrderCertificate::probe(&a, &b, &[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0]);
        assert!(cert.holds());
        assert!(comparison_check(&ya, &ya, None).unwrap().passed());
        let r = comparison_check(&ya, &yb, Some(&cert)).unwrap();
        assert!(r.passed() && r.certified);
        let back = comparison_check(&yb, &ya, None).unwrap();
        assert_eq!(back.violations, ya.iter().count());
        assert_eq!(back.first, Some(Node::ROOT));
    }

    #[test]
    fn sandwich_holds() {
        let p = problem(0.0);
        let oracle = p.solve(Reflection::CLAMP).unwrap();
        for (m, n) in [(4.0, 4.0), (64.0, 16.0), (1024.0, 1024.0)] {
            let r = sandwich_check(&p, &oracle, m, n).unwrap();
            assert!(r.passed(), "{r:?}");
            assert!(r.y_minus0 <= r.y0 && r.y0 <= r.y_plus0);
        }
    }
}
