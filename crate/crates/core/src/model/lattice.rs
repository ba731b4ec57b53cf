use std::ops::{Index, IndexMut};

use super::ModelError;

/// Uniform partition of `[0, T]` into `N` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, ModelError> {
        if steps == 0 || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(ModelError::InvalidGrid { horizon, steps });
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid point `t_k`. The last point is the horizon itself, bit for bit.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.steps as f64
        }
    }
}

/// A node `(k, j)` of the recombining lattice: `j` up-moves out of `k` steps.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct Node {
    pub step: usize,
    pub index: usize,
}

impl Node {
    pub const ROOT: Node = Node { step: 0, index: 0 };

    pub fn new(step: usize, index: usize) -> Self {
        Self { step, index }
    }

    pub fn up(self) -> Node {
        Node::new(self.step + 1, self.index + 1)
    }

    pub fn down(self) -> Node {
        Node::new(self.step + 1, self.index)
    }
}

impl std::fmt::Display for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.step, self.index)
    }
}

/// Recombining binomial discretization of a scalar Brownian motion.
///
/// The Brownian value at `(k, j)` is `(2j - k) * sqrt(dt)`; both successors
/// carry probability one half.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    grid: TimeGrid,
    sqrt_dt: f64,
}

impl Lattice {
    pub fn new(grid: TimeGrid) -> Self {
        Self {
            grid,
            sqrt_dt: grid.dt().sqrt(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.grid.steps
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    pub fn sqrt_dt(&self) -> f64 {
        self.sqrt_dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.grid.time(k)
    }

    pub fn node_count(&self) -> usize {
        let n = self.steps();
        (n + 1) * (n + 2) / 2
    }

    pub fn brownian(&self, node: Node) -> f64 {
        (2 * node.index as i64 - node.step as i64) as f64 * self.sqrt_dt
    }

    pub fn terminal_values(&self) -> Vec<f64> {
        let n = self.steps();
        (0..=n).map(|j| self.brownian(Node::new(n, j))).collect()
    }

    /// Iterates all nodes level by level.
    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..=self.steps()).flat_map(|k| (0..=k).map(move |j| Node::new(k, j)))
    }

    /// Node occupation probabilities `C(k,j) / 2^k`, built by a forward sweep.
    pub fn probabilities(&self) -> NodeField {
        let n = self.steps();
        let mut levels = Vec::with_capacity(n + 1);
        levels.push(vec![1.0]);
        for k in 0..n {
            let prev: &Vec<f64> = &levels[k];
            let mut next = vec![0.0; k + 2];
            for (j, p) in prev.iter().enumerate() {
                next[j] += 0.5 * p;
                next[j + 1] += 0.5 * p;
            }
            levels.push(next);
        }
        NodeField { levels }
    }

    /// Tree expectation of a level of `field`.
    pub fn expectation(&self, field: &NodeField, k: usize) -> f64 {
        let probs = self.probabilities();
        dot(probs.level(k), field.level(k))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds the lattice for horizon `T` and `N` steps.
pub fn build_lattice(horizon: f64, steps: usize) -> Result<Lattice, ModelError> {
    Ok(Lattice::new(TimeGrid::new(horizon, steps)?))
}

/// Real values indexed by lattice node, stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField {
    levels: Vec<Vec<f64>>,
}

impl NodeField {
    pub fn zeros(lattice: &Lattice) -> Self {
        Self::constant(lattice, 0.0)
    }

    pub fn constant(lattice: &Lattice, value: f64) -> Self {
        Self {
            levels: (0..=lattice.steps()).map(|k| vec![value; k + 1]).collect(),
        }
    }

    pub fn from_fn(lattice: &Lattice, mut f: impl FnMut(Node) -> f64) -> Self {
        Self {
            levels: (0..=lattice.steps())
                .map(|k| (0..=k).map(|j| f(Node::new(k, j))).collect())
                .collect(),
        }
    }

    /// Wraps raw levels; level `k` must hold `k + 1` values.
    pub fn from_levels(levels: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        for (k, level) in levels.iter().enumerate() {
            if level.len() != k + 1 {
                return Err(ModelError::DimensionMismatch {
                    what: "node field level",
                    expected: k + 1,
                    found: level.len(),
                });
            }
        }
        if levels.is_empty() {
            return Err(ModelError::DimensionMismatch {
                what: "node field levels",
                expected: 1,
                found: 0,
            });
        }
        Ok(Self { levels })
    }

    pub fn steps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn fits(&self, lattice: &Lattice) -> bool {
        self.steps() == lattice.steps()
    }

    pub fn get(&self, node: Node) -> f64 {
        self.levels[node.step][node.index]
    }

    pub fn set(&mut self, node: Node, value: f64) {
        self.levels[node.step][node.index] = value;
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn iter(&self) -> impl Iterator<Item = (Node, f64)> + '_ {
        self.levels.iter().enumerate().flat_map(|(k, level)| {
            level
                .iter()
                .enumerate()
                .map(move |(j, v)| (Node::new(k, j), *v))
        })
    }

    pub fn map(&self, mut f: impl FnMut(Node, f64) -> f64) -> NodeField {
        NodeField {
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(k, level)| {
                    level
                        .iter()
                        .enumerate()
                        .map(|(j, v)| f(Node::new(k, j), *v))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &NodeField) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|((_, a), (_, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<Node> for NodeField {
    type Output = f64;

    fn index(&self, node: Node) -> &f64 {
        &self.levels[node.step][node.index]
    }
}

impl IndexMut<Node> for NodeField {
    fn index_mut(&mut self, node: Node) -> &mut f64 {
        &mut self.levels[node.step][node.index]
    }
}

/// Barrier values per node. `None` marks an unbounded side at that node.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundField {
    levels: Vec<Vec<Option<f64>>>,
}

impl BoundField {
    pub fn unbounded(lattice: &Lattice) -> Self {
        Self {
            levels: (0..=lattice.steps()).map(|k| vec![None; k + 1]).collect(),
        }
    }

    pub fn from_fn(lattice: &Lattice, mut f: impl FnMut(Node) -> Option<f64>) -> Self {
        Self {
            levels: (0..=lattice.steps())
                .map(|k| (0..=k).map(|j| f(Node::new(k, j))).collect())
                .collect(),
        }
    }

    pub fn from_field(field: &NodeField) -> Self {
        Self {
            levels: field
                .levels()
                .iter()
                .map(|l| l.iter().map(|v| Some(*v)).collect())
                .collect(),
        }
    }

    pub fn get(&self, node: Node) -> Option<f64> {
        self.levels[node.step][node.index]
    }

    pub fn is_unbounded(&self) -> bool {
        self.levels.iter().flatten().all(Option::is_none)
    }

    pub fn steps(&self) -> usize {
        self.levels.len() - 1
    }

    /// Shifts every finite entry by `offset(node)`.
    pub fn shifted(&self, mut offset: impl FnMut(Node) -> f64) -> BoundField {
        BoundField {
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(k, level)| {
                    level
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v.map(|b| b + offset(Node::new(k, j))))
                        .collect()
                })
                .collect(),
        }
    }
}

/// A path through the lattice, stored as the node index at every step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticePath {
    indices: Vec<usize>,
}

impl LatticePath {
    pub fn from_moves(ups: &[bool]) -> Self {
        let mut indices = Vec::with_capacity(ups.len() + 1);
        let mut j = 0;
        indices.push(0);
        for &up in ups {
            if up {
                j += 1;
            }
            indices.push(j);
        }
        Self { indices }
    }

    /// All `2^N` paths; only sensible for small `N`.
    pub fn enumerate(steps: usize) -> Vec<LatticePath> {
        assert!(steps < 31, "exhaustive path enumeration needs N < 31");
        (0u64..(1u64 << steps))
            .map(|bits| {
                let ups: Vec<bool> = (0..steps).map(|i| bits >> i & 1 == 1).collect();
                LatticePath::from_moves(&ups)
            })
            .collect()
    }

    pub fn sample<R: rand::Rng>(steps: usize, rng: &mut R) -> Self {
        let ups: Vec<bool> = (0..steps).map(|_| rng.random::<bool>()).collect();
        Self::from_moves(&ups)
    }

    pub fn steps(&self) -> usize {
        self.indices.len() - 1
    }

    pub fn node(&self, k: usize) -> Node {
        Node::new(k, self.indices[k])
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        self.indices
            .iter()
            .enumerate()
            .map(|(k, j)| Node::new(k, *j))
    }

    /// Cumulative sums of a node-indexed increment along the path, `S_0 = 0`
    /// and `S_{k+1} = S_k + inc(node_k)`.
    pub fn cumulate(&self, increments: &NodeField) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.indices.len());
        let mut acc = 0.0;
        out.push(acc);
        for k in 0..self.steps() {
            acc += increments.get(self.node(k));
            out.push(acc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts_and_terminal_values() {
        let l = build_lattice(1.0, 1).unwrap();
        assert_eq!(l.node_count(), 3);
        assert_eq!(l.terminal_values(), vec![-1.0, 1.0]);

        let l = build_lattice(1.0, 2).unwrap();
        assert_eq!(l.node_count(), 6);
        let s = 2.0 * 0.5f64.sqrt();
        let tv = l.terminal_values();
        assert!((tv[0] + s).abs() < 1e-15 && tv[1] == 0.0 && (tv[2] - s).abs() < 1e-15);

        let l = build_lattice(4.0, 4).unwrap();
        assert_eq!(l.terminal_values(), vec![-4.0, -2.0, 0.0, 2.0, 4.0]);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(matches!(
            build_lattice(1.0, 0),
            Err(ModelError::InvalidGrid { .. })
        ));
        assert!(matches!(
            build_lattice(0.0, 3),
            Err(ModelError::InvalidGrid { .. })
        ));
        assert!(matches!(
            build_lattice(-1.0, 3),
            Err(ModelError::InvalidGrid { .. })
        ));
        assert!(build_lattice(f64::NAN, 3).is_err());
    }

    #[test]
    fn tree_moments_are_exact() {
        let l = build_lattice(1.0, 200).unwrap();
        let x2 = NodeField::from_fn(&l, |n| l.brownian(n).powi(2));
        let x1 = NodeField::from_fn(&l, |n| l.brownian(n));
        assert!((l.expectation(&x2, 200) - 1.0).abs() < 1e-12);
        assert!(l.expectation(&x1, 200).abs() < 1e-12);
        // one-step increments: mean 0, variance dt
        let dt = l.dt();
        assert!(((l.sqrt_dt().powi(2)) - dt).abs() < 1e-15);
        let probs = l.probabilities();
        for k in 0..=200 {
            let total: f64 = probs.level(k).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn time_grid_ends_on_horizon() {
        let g = TimeGrid::new(0.3, 7).unwrap();
        assert_eq!(g.time(7), 0.3);
        assert_eq!(g.time(0), 0.0);
    }

    #[test]
    fn path_cumulation() {
        let l = build_lattice(1.0, 3).unwrap();
        let inc = NodeField::from_fn(&l, |n| n.index as f64 + 1.0);
        let p = LatticePath::from_moves(&[true, false, true]);
        assert_eq!(p.node(3), Node::new(3, 2));
        assert_eq!(p.cumulate(&inc), vec![0.0, 1.0, 3.0, 5.0]);
        assert_eq!(LatticePath::enumerate(3).len(), 8);
    }
}
