use super::{same_steps, DiagnosticsError, ALGEBRAIC_TOL};
use crate::model::{BoundField, Node, NodeField, SolutionQuadruple};

/// Intermediate barriers `L <= L* <= Y <= U* <= U`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkorohodTestPair {
    pub lower: NodeField,
    pub upper: NodeField,
    pub theta: Option<f64>,
}

/// Max over all lattice paths of `sum_k w(node_k)`, `k < N`, by dynamic
/// programming from the leaves.
pub fn max_path_sum(weights: &NodeField) -> f64 {
    let n = weights.steps();
    let mut best: Vec<f64> = vec![0.0; n + 1];
    for k in (0..n).rev() {
        best = (0..=k)
            .map(|j| weights.get(Node::new(k, j)) + best[j].max(best[j + 1]))
            .collect();
    }
    best[0]
}

fn interpolate(bound: f64, y: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        bound
    } else if theta == 1.0 {
        y
    } else {
        y - (1.0 - theta) * (y - bound)
    }
}

/// Canonical family `L* = L + theta (Y - L)`, `U* = U - theta (U - Y)`.
/// An unbounded side is replaced by the probe `Y -+ (1 - theta)`.
pub fn sample_test_pairs(
    q: &SolutionQuadruple,
    lower: &BoundField,
    upper: &BoundField,
    thetas: &[f64],
) -> Result<Vec<SkorohodTestPair>, DiagnosticsError> {
    same_steps(q.steps(), lower.steps())?;
    same_steps(q.steps(), upper.steps())?;
    for (node, y) in q.y.iter() {
        if let Some(l) = lower.get(node) {
            if y < l - ALGEBRAIC_TOL {
                return Err(DiagnosticsError::OrderingViolated {
                    node,
                    detail: format!("Y = {y} below L = {l}"),
                });
            }
        }
        if let Some(u) = upper.get(node) {
            if y > u + ALGEBRAIC_TOL {
                return Err(DiagnosticsError::OrderingViolated {
                    node,
                    detail: format!("Y = {y} above U = {u}"),
                });
            }
        }
    }
    Ok(thetas
        .iter()
        .map(|&theta| SkorohodTestPair {
            lower: q
                .y
                .map(|node, y| interpolate(lower.get(node).unwrap_or(y - 1.0), y, theta)),
            upper: q
                .y
                .map(|node, y| interpolate(upper.get(node).unwrap_or(y + 1.0), y, theta)),
            theta: Some(theta),
        })
        .collect())
}

/// `(r_A, r_K)`: max over paths of `sum (Y - L*) dA` and `sum (U* - Y) dK`.
pub fn skorohod_residual(
    q: &SolutionQuadruple,
    pair: &SkorohodTestPair,
) -> Result<(f64, f64), DiagnosticsError> {
    same_steps(q.steps(), pair.lower.steps())?;
    same_steps(q.steps(), pair.upper.steps())?;
    for (node, y) in q.y.iter() {
        let (l, u) = (pair.lower.get(node), pair.upper.get(node));
        if l > y + ALGEBRAIC_TOL || u < y - ALGEBRAIC_TOL {
            return Err(DiagnosticsError::InadmissiblePair {
                node,
                detail: format!("L* = {l}, Y = {y}, U* = {u}"),
            });
        }
    }
    let wa =
        q.y.map(|node, y| ((y - pair.lower.get(node)) * q.da.get(node)).max(0.0));
    let wk =
        q.y.map(|node, y| ((pair.upper.get(node) - y) * q.dk.get(node)).max(0.0));
    Ok((max_path_sum(&wa), max_path_sum(&wk)))
}

/// Residuals for a penalized solution, which may sit on the wrong side of a
/// barrier: `sum |Y - L*| dA` with `L* = L + theta (Y - L)`, and likewise for
/// `K`. No admissibility is required.
pub fn penalized_skorohod_residual(
    q: &SolutionQuadruple,
    lower: &BoundField,
    upper: &BoundField,
    theta: f64,
) -> Result<(f64, f64), DiagnosticsError> {
    same_steps(q.steps(), lower.steps())?;
    same_steps(q.steps(), upper.steps())?;
    let w = |bound: &BoundField, inc: &NodeField| {
        q.y.map(|node, y| match bound.get(node) {
            Some(b) => (1.0 - theta) * (y - b).abs() * inc.get(node),
            None => 0.0,
        })
    };
    Ok((
        max_path_sum(&w(lower, &q.da)),
        max_path_sum(&w(upper, &q.dk)),
    ))
}
