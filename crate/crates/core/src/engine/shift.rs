//! Shift transforms and their path-tree check.
//!
//! A shifted problem lives on paths: its data at step `k` carry an additive
//! offset `S_k = sum_{i<k} s(node_i)` that depends on the whole history. Writing
//! the path value as `W(node_k) + S_k` turns it into a node problem for `W`
//! with the offset increments entering as an exogenous drift. [`ShiftedProblem`]
//! stores that reduced node problem together with the offset, and can also
//! solve the original path problem on the full `2^N` tree to confirm the
//! reduction.

use std::sync::Arc;

use super::{
    step_node, EngineError, NodeDriver, NodeProblem, Reflection, StepDriver, MAX_TREE_STEPS,
};
use crate::model::{BoundField, LatticePath, Node, NodeField, SolutionQuadruple};

/// A nondecreasing process used to shift the state.
#[derive(Debug, Clone, PartialEq)]
pub enum KProcess {
    /// Function of the node; must vanish at the root and grow along every edge.
    Markov(NodeField),
    /// Per-node increments `K_{k+1} - K_k`, all nonnegative.
    Increments(NodeField),
}

#[derive(Clone)]
pub struct ShiftedProblem {
    /// Node problem in reduced coordinates. Its exogenous increments equal
    /// `offset`.
    pub reduced: NodeProblem,
    /// Increments of the path offset `S`.
    pub offset: NodeField,
    /// Expected reduced solution, when the transform knows it.
    pub target: Option<NodeField>,
}

impl ShiftedProblem {
    fn new(reduced: NodeProblem, offset: NodeField, target: Option<NodeField>) -> Self {
        let reduced = reduced.with_exogenous(offset.clone());
        Self {
            reduced,
            offset,
            target,
        }
    }

    pub fn solve(&self, reflection: Reflection) -> Result<SolutionQuadruple, EngineError> {
        self.reduced.solve(reflection)
    }

    pub fn offset_along(&self, path: &LatticePath) -> Vec<f64> {
        path.cumulate(&self.offset)
    }

    /// Path value `W(node_k) + S_k` of a reduced field.
    pub fn lift(&self, w: &NodeField, path: &LatticePath) -> Vec<f64> {
        self.offset_along(path)
            .into_iter()
            .zip(path.nodes())
            .map(|(s, node)| w.get(node) + s)
            .collect()
    }

    /// Shifted terminal value on a path.
    pub fn terminal_on(&self, path: &LatticePath) -> f64 {
        let n = path.steps();
        self.reduced.terminal[path.node(n).index] + self.offset_along(path)[n]
    }

    /// Shifted lower barrier along a path.
    pub fn lower_on(&self, path: &LatticePath) -> Vec<Option<f64>> {
        self.offset_along(path)
            .into_iter()
            .zip(path.nodes())
            .map(|(s, node)| self.reduced.lower.get(node).map(|l| l + s))
            .collect()
    }

    /// Max node-wise gap between a reduced re-solve and [`Self::target`].
    pub fn target_gap(&self, reflection: Reflection) -> Result<Option<f64>, EngineError> {
        match &self.target {
            None => Ok(None),
            Some(t) => Ok(Some(self.solve(reflection)?.y.max_abs_diff(t))),
        }
    }

    /// Solves the path problem on the full tree (no reduction) and returns
    /// the max gap to the lifted `reference` over all tree nodes.
    pub fn tree_discrepancy(
        &self,
        reference: &NodeField,
        reflection: Reflection,
    ) -> Result<f64, EngineError> {
        let lattice = &self.reduced.lattice;
        let n = lattice.steps();
        if n > MAX_TREE_STEPS {
            return Err(EngineError::TreeTooLarge(n));
        }
        let (m, pen_n) = reflection.coefficients()?;
        let dt = lattice.dt();
        let sd = lattice.sqrt_dt();
        // Tree node at level k is a prefix `p < 2^k`; bit i set means move i went up.
        let node_of = |k: usize, p: usize| Node::new(k, p.count_ones() as usize);
        let mut offs: Vec<Vec<f64>> = vec![vec![0.0]];
        for k in 0..n {
            let prev = &offs[k];
            let mut next = vec![0.0; prev.len() * 2];
            for (p, s) in prev.iter().enumerate() {
                let inc = self.offset.get(node_of(k, p));
                next[p] = s + inc;
                next[p | 1 << k] = s + inc;
            }
            offs.push(next);
        }
        let mut vals: Vec<f64> = offs[n]
            .iter()
            .enumerate()
            .map(|(p, s)| self.reduced.terminal[node_of(n, p).index] + s)
            .collect();
        let mut worst = vals
            .iter()
            .enumerate()
            .map(|(p, v)| (v - reference.get(node_of(n, p)) - offs[n][p]).abs())
            .fold(0.0, f64::max);
        let inner = self.reduced.driver.clone();
        for k in (0..n).rev() {
            let t = lattice.time(k);
            let mut level = vec![0.0; 1 << k];
            for (p, slot) in level.iter_mut().enumerate() {
                let node = node_of(k, p);
                let s = offs[k][p];
                let (up, down) = (vals[p | 1 << k], vals[p]);
                let path_driver = OffsetDriver {
                    inner: inner.as_ref(),
                    offset: s,
                };
                let out = step_node(
                    &path_driver,
                    node,
                    t,
                    dt,
                    0.5 * (up + down),
                    (up - down) / (2.0 * sd),
                    self.reduced.lower.get(node).map(|l| l + s),
                    self.reduced.upper.get(node).map(|u| u + s),
                    reflection,
                    m,
                    pen_n,
                )?;
                *slot = out.y;
                worst = worst.max((out.y - reference.get(node) - s).abs());
            }
            vals = level;
        }
        Ok(worst)
    }
}

/// Reduced driver seen in path coordinates: `g(node, t, y - S, z)`.
struct OffsetDriver<'a> {
    inner: &'a dyn StepDriver,
    offset: f64,
}

impl StepDriver for OffsetDriver<'_> {
    fn value(&self, node: Node, t: f64, y: f64, z: f64) -> f64 {
        self.inner.value(node, t, y - self.offset, z)
    }

    fn growth(&self) -> f64 {
        self.inner.growth() * (1.0 + self.offset.abs())
    }

    fn lipschitz_y(&self) -> Option<f64> {
        self.inner.lipschitz_y()
    }

    fn uses_y(&self) -> bool {
        self.inner.uses_y()
    }
}

/// Removes the driver by absorbing its realized values into the state:
/// `Yhat_t = Y_t + sum_{s<t} dt f_s`, with terminal and barriers shifted by
/// the same sum. The reduced problem has a zero driver and the realized
/// drift as exogenous increment, so its clamped solution must equal `Y`.
pub fn driver_shift_transform(problem: &NodeProblem, solved: &SolutionQuadruple) -> ShiftedProblem {
    let lattice = &problem.lattice;
    let own = problem.exogenous.as_ref();
    let fhat = solved
        .drift
        .map(|node, d| d - own.map_or(0.0, |e| e.get(node)));
    let reduced = NodeProblem {
        lattice: lattice.clone(),
        driver: Arc::new(crate::model::Driver::zero()),
        terminal: problem.terminal.clone(),
        lower: problem.lower.clone(),
        upper: problem.upper.clone(),
        exogenous: None,
    };
    let mut offset = fhat;
    if let Some(e) = own {
        offset = offset.map(|node, v| v + e.get(node));
    }
    ShiftedProblem::new(reduced, offset, Some(solved.y.clone()))
}

/// Shifts the state by a nondecreasing process `K`: driver `f(t, y + K, z)`,
/// lower barrier `L - K`, terminal `xi - K_T`. The upper barrier is dropped.
pub fn k_shift_transform(
    problem: &NodeProblem,
    process: &KProcess,
) -> Result<ShiftedProblem, EngineError> {
    let lattice = &problem.lattice;
    let n = lattice.steps();
    let fits = |f: &NodeField| {
        if f.fits(lattice) {
            Ok(())
        } else {
            Err(EngineError::DimensionMismatch {
                what: "shift process",
                expected: n,
                found: f.steps(),
            })
        }
    };
    match process {
        KProcess::Increments(dk) => {
            fits(dk)?;
            if let Some((node, v)) = dk
                .iter()
                .filter(|(_, v)| *v < 0.0)
                .min_by(|a, b| a.1.total_cmp(&b.1))
            {
                return Err(EngineError::NotNondecreasing { node, by: -v });
            }
            let reduced = problem.clone().without_upper();
            let reduced = NodeProblem {
                exogenous: None,
                ..reduced
            };
            let offset =
                dk.map(|node, v| -v + problem.exogenous.as_ref().map_or(0.0, |e| e.get(node)));
            Ok(ShiftedProblem::new(reduced, offset, None))
        }
        KProcess::Markov(kf) => {
            fits(kf)?;
            let root = kf.get(Node::ROOT);
            if root != 0.0 {
                return Err(EngineError::NotNondecreasing {
                    node: Node::ROOT,
                    by: root.abs(),
                });
            }
            for k in 0..n {
                for j in 0..=k {
                    let node = Node::new(k, j);
                    for child in [node.up(), node.down()] {
                        let d = kf.get(child) - kf.get(node);
                        if d < 0.0 {
                            return Err(EngineError::NotNondecreasing {
                                node: child,
                                by: -d,
                            });
                        }
                    }
                }
            }
            let base = problem.driver.clone();
            let shift = kf.clone();
            let driver = NodeDriver::new(
                base.growth() * 2.0,
                base.lipschitz_y(),
                move |node, t, y, z| base.value(node, t, y + shift.get(node), z),
            );
            let terminal = problem
                .terminal
                .iter()
                .enumerate()
                .map(|(j, v)| v - kf.get(Node::new(n, j)))
                .collect();
            let lower = problem.lower.shifted(|node| -kf.get(node));
            let reduced = NodeProblem {
                lattice: lattice.clone(),
                driver: Arc::new(driver),
                terminal,
                lower,
                upper: BoundField::unbounded(lattice),
                exogenous: None,
            };
            let offset = problem
                .exogenous
                .clone()
                .unwrap_or_else(|| NodeField::zeros(lattice));
            Ok(ShiftedProblem::new(reduced, offset, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Side;
    use crate::model::{build_lattice, Barrier, BarrierPair, Driver, TerminalCondition};

    fn put_like(n: usize) -> NodeProblem {
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
    fn zero_driver_shift_is_identity() {
        let l = build_lattice(1.0, 8).unwrap();
        let p = NodeProblem::new(
            &l,
            Arc::new(Driver::zero()),
            &BarrierPair::lower_only(Barrier::constant(0.1)),
            &TerminalCondition::new(|x| x),
        );
        let q = p.solve(Reflection::CLAMP).unwrap();
        let s = driver_shift_transform(&p, &q);
        assert!(s.offset.iter().all(|(_, v)| v == 0.0));
        assert_eq!(s.solve(Reflection::CLAMP).unwrap().y, q.y);
    }

    #[test]
    fn unit_driver_shift_is_constant() {
        let l = build_lattice(1.0, 10).unwrap();
        let p = NodeProblem::new(
            &l,
            Arc::new(Driver::constant(1.0)),
            &BarrierPair::none(),
            &TerminalCondition::constant(0.0),
        );
        let q = p.solve(Reflection::NONE).unwrap();
        let s = driver_shift_transform(&p, &q);
        for path in LatticePath::enumerate(10).iter().step_by(37) {
            assert!((s.terminal_on(path) - 1.0).abs() < 1e-12);
            for v in s.lift(&q.y, path) {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn driver_shift_reproduces_solution() {
        let p = put_like(12);
        let q = p.solve(Reflection::CLAMP).unwrap();
        let s = driver_shift_transform(&p, &q);
        assert!(s.target_gap(Reflection::CLAMP).unwrap().unwrap() < 1e-12);
        assert!(s.tree_discrepancy(&q.y, Reflection::CLAMP).unwrap() < 1e-12);
    }

    #[test]
    fn k_shift_identity_and_deterministic_time() {
        let l = build_lattice(1.0, 6).unwrap();
        let p = NodeProblem::new(
            &l,
            Arc::new(Driver::linear(1.0).with_lipschitz(1.0)),
            &BarrierPair::lower_only(Barrier::constant(0.2)),
            &TerminalCondition::constant(1.0),
        );
        let zero = k_shift_transform(&p, &KProcess::Markov(NodeField::zeros(&l))).unwrap();
        assert_eq!(
            zero.solve(Reflection::CLAMP).unwrap().y,
            p.solve(Reflection::CLAMP).unwrap().y
        );
        let kt = NodeField::from_fn(&l, |n| l.time(n.step));
        let s = k_shift_transform(&p, &KProcess::Markov(kt)).unwrap();
        let node = Node::new(3, 1);
        let t = l.time(3);
        assert!((s.reduced.driver.value(node, t, 0.4, 0.0) - (0.4 + t)).abs() < 1e-15);
        assert!((s.reduced.lower.get(node).unwrap() - (0.2 - t)).abs() < 1e-15);
        assert!((s.reduced.terminal[2] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn k_shift_rejects_decrease() {
        let l = build_lattice(1.0, 3).unwrap();
        let p = put_like(3);
        let bad = NodeField::from_fn(&l, |n| {
            if n.step == 2 && n.index == 0 {
                -0.1
            } else {
                0.0
            }
        });
        assert!(matches!(
            k_shift_transform(&p, &KProcess::Markov(bad.clone())),
            Err(EngineError::NotNondecreasing { .. })
        ));
        assert!(matches!(
            k_shift_transform(&p, &KProcess::Increments(bad)),
            Err(EngineError::NotNondecreasing { .. })
        ));
    }

    #[test]
    fn penalized_k_fed_back() {
        let l = build_lattice(1.0, 10).unwrap();
        let p = NodeProblem::new(
            &l,
            Arc::new(Driver::new(1.0, |_, y, z| z - y).with_lipschitz(1.0)),
            &BarrierPair::new(
                Barrier::constant(-0.2),
                Barrier::from_fn(|_, x| 0.1 + 0.5 * x),
            ),
            &TerminalCondition::new(|x| x),
        );
        let (m, n) = (40.0, 40.0);
        let q = p.solve(Reflection::penalized(m, n)).unwrap();
        let s = k_shift_transform(&p, &KProcess::Increments(q.dk.clone())).unwrap();
        let lower = Reflection {
            lower: Side::Penalty(m),
            upper: Side::Ignore,
        };
        let w = s.solve(lower).unwrap();
        assert!(w.y.max_abs_diff(&q.y) < 1e-12);
        assert!(s.tree_discrepancy(&q.y, lower).unwrap() < 1e-12);
        let path = LatticePath::from_moves(&[
            true, false, false, true, true, false, true, true, false, false,
        ]);
        let lifted = s.lift(&w.y, &path);
        let k = q.k_along(&path);
        for (i, node) in path.nodes().enumerate() {
            assert!((lifted[i] - (q.y.get(node) - k[i])).abs() < 1e-12);
        }
    }
}
