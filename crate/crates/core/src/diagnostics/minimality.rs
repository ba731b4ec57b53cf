use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{same_steps, DiagnosticsError, ROOT_TOL};
use crate::engine::{step_node, NodeProblem, Reflection};
use crate::model::{Node, NodeField, SolutionQuadruple};

/// A discrete supersolution: `Y_k - dA_k` solves the unreflected step from
/// the successors of `Y`, with `dA >= 0`, and `Y_N` equals the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Supersolution {
    pub y: NodeField,
    pub da: NodeField,
}

impl Supersolution {
    pub fn from_quadruple(q: &SolutionQuadruple) -> Self {
        Self {
            y: q.y.clone(),
            da: q.da.clone(),
        }
    }

    /// Largest defect of the supersolution identity, `dA >= 0`, terminal
    /// match and domination of `L`.
    pub fn defect(&self, problem: &NodeProblem) -> f64 {
        let lattice = &problem.lattice;
        let (dt, sd) = (lattice.dt(), lattice.sqrt_dt());
        let n = lattice.steps();
        let mut worst: f64 = 0.0;
        for (j, xi) in problem.terminal.iter().enumerate() {
            worst = worst.max((self.y.get(Node::new(n, j)) - xi).abs());
        }
        for (node, y) in self.y.iter() {
            if let Some(l) = problem.lower.get(node) {
                worst = worst.max(l - y);
            }
            if node.step == n {
                continue;
            }
            let (up, down) = (self.y.get(node.up()), self.y.get(node.down()));
            let z = (up - down) / (2.0 * sd);
            let da = self.da.get(node);
            let raw = y - da;
            let t = lattice.time(node.step);
            let e = problem.exogenous.as_ref().map_or(0.0, |f| f.get(node));
            let r = raw - 0.5 * (up + down) - e - dt * problem.driver.value(node, t, raw, z);
            worst = worst.max(r.abs()).max(-da);
        }
        worst
    }
}

/// Random supersolutions dominating `L`: at each node the unreflected step
/// is lifted to `max(y, L)` plus, with probability one half, a uniform
/// extra in `[0, scale]`.
pub fn random_supersolutions(
    problem: &NodeProblem,
    count: usize,
    seed: u64,
    scale: f64,
) -> Result<Vec<Supersolution>, DiagnosticsError> {
    let lattice = &problem.lattice;
    let n = lattice.steps();
    let (dt, sd) = (lattice.dt(), lattice.sqrt_dt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut y = NodeField::zeros(lattice);
        let mut da = NodeField::zeros(lattice);
        y.level_mut(n).copy_from_slice(&problem.terminal);
        for k in (0..n).rev() {
            for j in 0..=k {
                let node = Node::new(k, j);
                let (up, down) = (y.get(node.up()), y.get(node.down()));
                let e = problem.exogenous.as_ref().map_or(0.0, |f| f.get(node));
                let step = step_node(
                    problem.driver.as_ref(),
                    node,
                    lattice.time(k),
                    dt,
                    0.5 * (up + down) + e,
                    (up - down) / (2.0 * sd),
                    None,
                    None,
                    Reflection::NONE,
                    0.0,
                    0.0,
                )?;
                let mut v = problem.lower.get(node).map_or(step.y, |l| step.y.max(l));
                if rng.random::<bool>() {
                    v += scale * rng.random::<f64>();
                }
                y.set(node, v);
                da.set(node, v - step.y);
            }
        }
        out.push(Supersolution { y, da });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimalityReport {
    pub candidates: usize,
    pub violations: usize,
    /// Largest `Y_oracle - Y_candidate`.
    pub worst: f64,
    pub first: Option<(usize, Node)>,
}

impl MinimalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `Y_oracle <= Y_candidate` node-wise for every verified candidate.
pub fn minimality_check(
    problem: &NodeProblem,
    oracle: &SolutionQuadruple,
    candidates: &[Supersolution],
) -> Result<MinimalityReport, DiagnosticsError> {
    let mut report = MinimalityReport {
        candidates: candidates.len(),
        violations: 0,
        worst: f64::NEG_INFINITY,
        first: None,
    };
    for (index, c) in candidates.iter().enumerate() {
        same_steps(oracle.steps(), c.y.steps())?;
        let defect = c.defect(problem);
        if defect > ROOT_TOL {
            return Err(DiagnosticsError::NotASupersolution {
                index,
                detail: format!("defect {defect:e}"),
            });
        }
        let mut bad = false;
        for (node, yo) in oracle.y.iter() {
            let d = yo - c.y.get(node);
            report.worst = report.worst.max(d);
            if d > ROOT_TOL {
                bad = true;
                report.first.get_or_insert((index, node));
            }
        }
        report.violations += usize::from(bad);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lattice, Barrier, BarrierPair, Driver, TerminalCondition};
    use std::sync::Arc;

    fn put(n: usize) -> NodeProblem {
        let l = build_lattice(1.0, n).unwrap();
        let obstacle = |t: f64, x: f64| (1.0 - (x - 0.5 * t).exp()).max(0.0);
        NodeProblem::new(
            &l,
            Arc::new(Driver::linear(-0.05).with_lipschitz(0.05)),
            &BarrierPair::lower_only(Barrier::from_fn(obstacle)),
            &TerminalCondition::new(move |x| obstacle(1.0, x)),
        )
    }

    #[test]
    fn oracle_is_its_own_candidate() {
        let p = put(30);
        let q = p.solve(Reflection::CLAMP).unwrap();
        let r = minimality_check(&p, &q, &[Supersolution::from_quadruple(&q)]).unwrap();
        assert!(r.passed());
        assert!(r.worst.abs() < 1e-15);
    }

    #[test]
    fn inflated_root_push() {
        let p = put(30);
        let q = p.solve(Reflection::CLAMP).unwrap();
        let mut c = Supersolution::from_quadruple(&q);
        c.y.set(Node::ROOT, c.y.get(Node::ROOT) + 0.1);
        c.da.set(Node::ROOT, c.da.get(Node::ROOT) + 0.1);
        let r = minimality_check(&p, &q, &[c]).unwrap();
        assert!(r.passed());
        assert!((r.worst - 0.0).abs() < 1e-15);
    }

    #[test]
    fn random_candidates_dominate() {
        let p = put(40);
        let q = p.solve(Reflection::CLAMP).unwrap();
        let cands = random_supersolutions(&p, 20, 5, 0.05).unwrap();
        let r = minimality_check(&p, &q, &cands).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn broken_candidate_rejected() {
        let p = put(10);
        let q = p.solve(Reflection::CLAMP).unwrap();
        let mut c = Supersolution::from_quadruple(&q);
        c.y.set(Node::ROOT, c.y.get(Node::ROOT) - 0.1);
        assert!(matches!(
            minimality_check(&p, &q, &[c]),
            Err(DiagnosticsError::NotASupersolution { index: 0, .. })
        ));
    }
}
