use std::fmt;
use std::sync::Arc;

use super::lattice::{BoundField, Lattice, LatticePath, Node, NodeField, TimeGrid};
use super::witness::MokobodzkiWitness;
use super::ModelError;

pub type DriverFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;
pub type BarrierFn = dyn Fn(f64, f64) -> f64 + Send + Sync;
pub type TerminalFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Driver `f(t, y, z)` with its linear-growth constant `K`.
///
/// `lipschitz` is an optional declared bound on the l1 Lipschitz constant in
/// `(y, z)`. When present it feeds the stability gate of the lattice engine
/// and lets the inf-convolution approximants short-circuit to `f` itself.
#[derive(Clone)]
pub struct Driver {
    func: Arc<DriverFn>,
    growth: f64,
    lipschitz: Option<f64>,
    uses_y: bool,
    uses_z: bool,
    label: String,
}

impl Driver {
    pub fn new(growth: f64, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            func: Arc::new(f),
            growth,
            lipschitz: None,
            uses_y: true,
            uses_z: true,
            label: String::from("f"),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c.abs(), move |_, _, _| c)
            .with_lipschitz(0.0)
            .with_dependence(false, false)
            .with_label(format!("{c}"))
    }

    /// `f(t, y, z) = rate * y`.
    pub fn linear(rate: f64) -> Self {
        Self::new(rate.abs(), move |_, y, _| rate * y)
            .with_lipschitz(rate.abs())
            .with_dependence(true, false)
            .with_label(format!("{rate}*y"))
    }

    pub fn with_lipschitz(mut self, bound: f64) -> Self {
        self.lipschitz = Some(bound);
        self
    }

    /// Declares which of `y`, `z` the driver actually reads.
    pub fn with_dependence(mut self, uses_y: bool, uses_z: bool) -> Self {
        self.uses_y = uses_y;
        self.uses_z = uses_z;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, y: f64, z: f64) -> f64 {
        (self.func)(t, y, z)
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn uses_y(&self) -> bool {
        self.uses_y
    }

    pub fn uses_z(&self) -> bool {
        self.uses_z
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Driver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Driver")
            .field("label", &self.label)
            .field("growth", &self.growth)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// One side of the obstacle. `Unbounded` is the +/- infinity sentinel.
#[derive(Clone)]
pub enum Barrier {
    Unbounded,
    Function(Arc<BarrierFn>),
    /// Arbitrary node table; allows discontinuous, merely measurable barriers.
    Table(NodeField),
}

impl Barrier {
    pub fn constant(c: f64) -> Self {
        Barrier::Function(Arc::new(move |_, _| c))
    }

    pub fn from_fn(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Barrier::Function(Arc::new(f))
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, Barrier::Unbounded)
    }

    pub fn at_node(&self, lattice: &Lattice, node: Node) -> Option<f64> {
        match self {
            Barrier::Unbounded => None,
            Barrier::Function(f) => Some(f(lattice.time(node.step), lattice.brownian(node))),
            Barrier::Table(field) => Some(field.get(node)),
        }
    }

    /// Value at an arbitrary `(t, x)`. Tables can only be read through a
    /// lattice node.
    pub fn at_point(&self, t: f64, x: f64, node: Option<Node>) -> Result<Option<f64>, ModelError> {
        match self {
            Barrier::Unbounded => Ok(None),
            Barrier::Function(f) => Ok(Some(f(t, x))),
            Barrier::Table(field) => match node {
                Some(n) => Ok(Some(field.get(n))),
                None => Err(ModelError::TableOffLattice { t, x }),
            },
        }
    }

    pub fn resolve(&self, lattice: &Lattice) -> BoundField {
        match self {
            Barrier::Unbounded => BoundField::unbounded(lattice),
            _ => BoundField::from_fn(lattice, |n| self.at_node(lattice, n)),
        }
    }
}

impl fmt::Debug for Barrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Barrier::Unbounded => write!(f, "Unbounded"),
            Barrier::Function(_) => write!(f, "Function(..)"),
            Barrier::Table(t) => write!(f, "Table({} steps)", t.steps()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarrierPair {
    pub lower: Barrier,
    pub upper: Barrier,
}

impl BarrierPair {
    pub fn new(lower: Barrier, upper: Barrier) -> Self {
        Self { lower, upper }
    }

    pub fn none() -> Self {
        Self::new(Barrier::Unbounded, Barrier::Unbounded)
    }

    pub fn lower_only(lower: Barrier) -> Self {
        Self::new(lower, Barrier::Unbounded)
    }
}

/// Terminal condition `xi` as a function of the terminal Brownian value.
#[derive(Clone)]
pub struct TerminalCondition(Arc<TerminalFn>);

impl TerminalCondition {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }

    pub fn resolve(&self, lattice: &Lattice) -> Vec<f64> {
        lattice
            .terminal_values()
            .into_iter()
            .map(|x| self.eval(x))
            .collect()
    }
}

impl fmt::Debug for TerminalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TerminalCondition(..)")
    }
}

/// Everything that defines one reflected BSDE instance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: TimeGrid,
    pub driver: Driver,
    pub barriers: BarrierPair,
    pub terminal: TerminalCondition,
    pub witness: Option<MokobodzkiWitness>,
}

impl ProblemSpec {
    pub fn new(
        grid: TimeGrid,
        driver: Driver,
        barriers: BarrierPair,
        terminal: TerminalCondition,
    ) -> Self {
        Self {
            grid,
            driver,
            barriers,
            terminal,
            witness: None,
        }
    }

    pub fn with_witness(mut self, witness: MokobodzkiWitness) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn with_driver(mut self, driver: Driver) -> Self {
        self.driver = driver;
        self
    }

    pub fn with_barriers(mut self, barriers: BarrierPair) -> Self {
        self.barriers = barriers;
        self
    }

    pub fn with_terminal(mut self, terminal: TerminalCondition) -> Self {
        self.terminal = terminal;
        self
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.grid)
    }
}

/// Discrete solution `(Y, Z, A, K)` on the lattice.
///
/// `A` and `K` are stored as per-node increments: the increment at `(k, j)`
/// accrues between `t_k` and `t_{k+1}`, so the cumulative processes along any
/// path start at zero and are nondecreasing iff every increment is `>= 0`.
/// `drift` holds `dt * f` as actually used by the step at each node, plus any
/// exogenous increment, which
/// makes the one-step identity
/// `Y_k = E[Y_{k+1} | k] + drift_k + dA_k - dK_k` checkable node by node.
/// Terminal-level entries of `z`, `drift`, `da`, `dk` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionQuadruple {
    pub y: NodeField,
    pub z: NodeField,
    pub drift: NodeField,
    pub da: NodeField,
    pub dk: NodeField,
    /// `E[A_{t_k}]`, `k = 0..=N`.
    pub mean_a: Vec<f64>,
    /// `E[K_{t_k}]`, `k = 0..=N`.
    pub mean_k: Vec<f64>,
}

impl SolutionQuadruple {
    pub fn assemble(
        lattice: &Lattice,
        y: NodeField,
        z: NodeField,
        drift: NodeField,
        da: NodeField,
        dk: NodeField,
    ) -> Self {
        let probs = lattice.probabilities();
        let cumulant = |inc: &NodeField| {
            let mut out = vec![0.0; lattice.steps() + 1];
            for k in 0..lattice.steps() {
                out[k + 1] = out[k] + super::lattice::dot(probs.level(k), inc.level(k));
            }
            out
        };
        let mean_a = cumulant(&da);
        let mean_k = cumulant(&dk);
        Self {
            y,
            z,
            drift,
            da,
            dk,
            mean_a,
            mean_k,
        }
    }

    pub fn y0(&self) -> f64 {
        self.y.get(Node::ROOT)
    }

    pub fn steps(&self) -> usize {
        self.y.steps()
    }

    pub fn a_along(&self, path: &LatticePath) -> Vec<f64> {
        path.cumulate(&self.da)
    }

    pub fn k_along(&self, path: &LatticePath) -> Vec<f64> {
        path.cumulate(&self.dk)
    }

    /// Largest negative increment of `A` or `K` (0 when both are nondecreasing).
    pub fn worst_decrease(&self) -> f64 {
        self.da
            .iter()
            .chain(self.dk.iter())
            .map(|(_, v)| (-v).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Max over nodes of `|Y_k - E[Y_{k+1}] - drift_k - dA_k + dK_k|`.
    pub fn identity_residual(&self) -> f64 {
        let n = self.steps();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for j in 0..=k {
                let node = Node::new(k, j);
                let cont = 0.5 * (self.y.get(node.up()) + self.y.get(node.down()));
                let r = self.y.get(node) - cont - self.drift.get(node) - self.da.get(node)
                    + self.dk.get(node);
                worst = worst.max(r.abs());
            }
        }
        worst
    }
}
