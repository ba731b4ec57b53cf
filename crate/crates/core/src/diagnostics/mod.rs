//! Checks of the defining conditions on solver output.

mod comparison;
mod minimality;
mod skorohod;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineError;
use crate::model::{dot, Lattice, LatticePath, Node, NodeField, SolutionQuadruple};

pub use comparison::{
    comparison_check, sandwich_check, OrderCertificate, SandwichReport, ViolationReport,
};
pub use minimality::{minimality_check, random_supersolutions, MinimalityReport, Supersolution};
pub use skorohod::{
    max_path_sum, penalized_skorohod_residual, sample_test_pairs, skorohod_residual,
    SkorohodTestPair,
};

/// Absolute tolerance for identities limited by the root finder.
pub const ROOT_TOL: f64 = 1e-10;
/// Absolute tolerance for algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("test pair is not admissible at node {node}: {detail}")]
    InadmissiblePair { node: Node, detail: String },
    #[error("solution leaves the barriers at node {node}: {detail}")]
    OrderingViolated { node: Node, detail: String },
    #[error("candidate {index} is not a supersolution: {detail}")]
    NotASupersolution { index: usize, detail: String },
    #[error("runs live on different lattices ({expected} vs {found} steps)")]
    MismatchedLattices { expected: usize, found: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// How `E[sup_k Y_k^2]` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupSampler {
    pub paths: usize,
    pub seed: u64,
    /// All `2^N` paths are used up to this many steps.
    pub exhaustive_max_steps: usize,
}

impl Default for SupSampler {
    fn default() -> Self {
        Self {
            paths: 10_000,
            seed: 0,
            exhaustive_max_steps: 12,
        }
    }
}

/// The four bounded quantities of the a priori estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsRecord {
    pub e_sup_y2: f64,
    /// Zero when the supremum moment is exact.
    pub e_sup_y2_stderr: f64,
    pub e_int_z2: f64,
    pub e_a_t2: f64,
    pub e_k_t2: f64,
}

impl BoundsRecord {
    pub fn total(&self) -> f64 {
        self.e_sup_y2 + self.e_int_z2 + self.e_a_t2 + self.e_k_t2
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.e_sup_y2, self.e_int_z2, self.e_a_t2, self.e_k_t2]
    }
}

/// `E[(sum_k inc_k)^2]` along paths, by a backward sweep of the first two
/// conditional moments of the remaining sum.
pub fn terminal_second_moment(increments: &NodeField) -> f64 {
    let n = increments.steps();
    let mut first = vec![0.0; n + 1];
    let mut second = vec![0.0; n + 1];
    for k in (0..n).rev() {
        let mut f = vec![0.0; k + 1];
        let mut s = vec![0.0; k + 1];
        for j in 0..=k {
            let d = increments.get(Node::new(k, j));
            let a = 0.5 * (first[j] + first[j + 1]);
            let b = 0.5 * (second[j] + second[j + 1]);
            f[j] = d + a;
            s[j] = d * d + 2.0 * d * a + b;
        }
        first = f;
        second = s;
    }
    second[0]
}

/// `E[sum_k dt Z_k^2]` on the tree.
pub fn integrated_z2(lattice: &Lattice, z: &NodeField) -> f64 {
    let probs = lattice.probabilities();
    let dt = lattice.dt();
    (0..lattice.steps())
        .map(|k| {
            let sq: Vec<f64> = z.level(k).iter().map(|v| v * v).collect();
            dt * dot(probs.level(k), &sq)
        })
        .sum()
}

/// `E[max_k Y_k^2]` with its standard error.
pub fn sup_second_moment(y: &NodeField, sampler: SupSampler) -> (f64, f64) {
    let n = y.steps();
    let path_max = |p: &LatticePath| {
        p.nodes()
            .map(|node| y.get(node).powi(2))
            .fold(0.0, f64::max)
    };
    if n <= sampler.exhaustive_max_steps {
        let paths = LatticePath::enumerate(n);
        let total: f64 = paths.iter().map(path_max).sum();
        return (total / paths.len() as f64, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let samples: Vec<f64> = (0..sampler.paths.max(1))
        .map(|_| path_max(&LatticePath::sample(n, &mut rng)))
        .collect();
    let e = crate::mc::Estimate::from_samples(&samples);
    (e.mean, e.stderr)
}

pub fn apriori_bounds(
    lattice: &Lattice,
    q: &SolutionQuadruple,
    sampler: SupSampler,
) -> BoundsRecord {
    let (e_sup_y2, e_sup_y2_stderr) = sup_second_moment(&q.y, sampler);
    BoundsRecord {
        e_sup_y2,
        e_sup_y2_stderr,
        e_int_z2: integrated_z2(lattice, &q.z),
        e_a_t2: terminal_second_moment(&q.da),
        e_k_t2: terminal_second_moment(&q.dk),
    }
}

pub(crate) fn same_steps(expected: usize, found: usize) -> Result<(), DiagnosticsError> {
    if expected == found {
        Ok(())
    } else {
        Err(DiagnosticsError::MismatchedLattices { expected, found })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{solve_reflected_oracle, NodeProblem, Reflection};
    use crate::model::{build_lattice, Barrier, BarrierPair, Driver, TerminalCondition};
    use std::sync::Arc;

    fn plain(n: usize, xi: TerminalCondition) -> (Lattice, SolutionQuadruple) {
        let l = build_lattice(1.0, n).unwrap();
        let q = solve_reflected_oracle(&l, &Driver::zero(), &BarrierPair::none(), &xi).unwrap();
        (l, q)
    }

    #[test]
    fn constant_terminal_record() {
        let (l, q) = plain(20, TerminalCondition::constant(1.0));
        let b = apriori_bounds(&l, &q, SupSampler::default());
        assert_eq!(b.as_array(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn brownian_terminal_record() {
        for n in [10, 50] {
            let (l, q) = plain(n, TerminalCondition::new(|x| x));
            let b = apriori_bounds(&l, &q, SupSampler::default());
            assert!((b.e_int_z2 - 1.0).abs() < 1e-12);
            assert!(b.e_sup_y2 >= 1.0);
        }
    }

    #[test]
    fn second_moment_matches_enumeration() {
        let l = build_lattice(1.0, 9).unwrap();
        let inc = NodeField::from_fn(&l, |n| ((n.step * 7 + n.index * 3) % 5) as f64 * 0.1);
        let brute: f64 = LatticePath::enumerate(9)
            .iter()
            .map(|p| p.cumulate(&inc)[9].powi(2))
            .sum::<f64>()
            / 512.0;
        assert!((terminal_second_moment(&inc) - brute).abs() < 1e-12);
    }

    #[test]
    fn sampled_sup_close_to_exhaustive() {
        let l = build_lattice(1.0, 12).unwrap();
        let p = NodeProblem::new(
            &l,
            Arc::new(Driver::zero()),
            &BarrierPair::lower_only(Barrier::constant(0.0)),
            &TerminalCondition::new(|x| x),
        );
        let q = p.solve(Reflection::CLAMP).unwrap();
        let (exact, se0) = sup_second_moment(&q.y, SupSampler::default());
        assert_eq!(se0, 0.0);
        let sampled = SupSampler {
            exhaustive_max_steps: 0,
            ..SupSampler::default()
        };
        let (est, se) = sup_second_moment(&q.y, sampled);
        assert!((est - exact).abs() < 4.0 * se, "{est} {exact} {se}");
    }
}
