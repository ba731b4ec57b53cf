//! Backward induction on the binomial lattice.
//!
//! Every solver here runs the same node step: average the two successors to
//! get the continuation `c`, read `Z = (Y_up - Y_down) / (2 sqrt(dt))`
//! explicitly, solve `y = c + e + dt [f(t, y, Z) + m (L - y)^+ - n (y - U)^+]`
//! for `y` (semi-implicit), and optionally project onto `[L, U]`. What varies
//! is how each barrier side is treated, see [`Reflection`].

mod shift;
mod step;

use std::sync::Arc;

use thiserror::Error;

use crate::model::{
    BarrierPair, BoundField, Driver, Lattice, ModelError, Node, NodeField, ProblemSpec,
    SolutionQuadruple, TerminalCondition,
};

pub use shift::{driver_shift_transform, k_shift_transform, KProcess, ShiftedProblem};
pub use step::StepSolution;

/// Largest tree the exhaustive path solver accepts.
pub const MAX_TREE_STEPS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("root finder failed at node {node}: {detail}")]
    StepDiverged { node: Node, detail: String },
    #[error("penalty coefficients must be finite and nonnegative, got m={lower}, n={upper}")]
    InvalidPenalty { lower: f64, upper: f64 },
    #[error("stability gate violated: dt * Lip = {product} > 0.5")]
    StabilityGate { product: f64 },
    #[error("process must be nondecreasing with zero start; violated at node {node} by {by}")]
    NotNondecreasing { node: Node, by: f64 },
    #[error("{what} does not match the lattice ({expected} steps, found {found})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("path tree with {0} steps is too large for exhaustive solving")]
    TreeTooLarge(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A driver as seen by the node step; may depend on the node.
pub trait StepDriver: Send + Sync {
    fn value(&self, node: Node, t: f64, y: f64, z: f64) -> f64;

    fn growth(&self) -> f64;

    /// Bound on the y-slope, when known. Drives the stability gate.
    fn lipschitz_y(&self) -> Option<f64>;

    fn uses_y(&self) -> bool {
        true
    }
}

impl StepDriver for Driver {
    fn value(&self, _node: Node, t: f64, y: f64, z: f64) -> f64 {
        self.eval(t, y, z)
    }

    fn growth(&self) -> f64 {
        Driver::growth(self)
    }

    fn lipschitz_y(&self) -> Option<f64> {
        self.lipschitz()
    }

    fn uses_y(&self) -> bool {
        Driver::uses_y(self)
    }
}

type NodeFn = dyn Fn(Node, f64, f64, f64) -> f64 + Send + Sync;

/// Node-dependent driver built from a closure.
#[derive(Clone)]
pub struct NodeDriver {
    func: Arc<NodeFn>,
    growth: f64,
    lipschitz: Option<f64>,
}

impl NodeDriver {
    pub fn new(
        growth: f64,
        lipschitz: Option<f64>,
        f: impl Fn(Node, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            func: Arc::new(f),
            growth,
            lipschitz,
        }
    }
}

impl StepDriver for NodeDriver {
    fn value(&self, node: Node, t: f64, y: f64, z: f64) -> f64 {
        (self.func)(node, t, y, z)
    }

    fn growth(&self) -> f64 {
        self.growth
    }

    fn lipschitz_y(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// Treatment of one barrier side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Side {
    Ignore,
    Penalty(f64),
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub lower: Side,
    pub upper: Side,
}

impl Reflection {
    pub const NONE: Reflection = Reflection {
        lower: Side::Ignore,
        upper: Side::Ignore,
    };

    /// Exact projection onto `[L, U]` after the unreflected step.
    pub const CLAMP: Reflection = Reflection {
        lower: Side::Clamp,
        upper: Side::Clamp,
    };

    pub fn penalized(m: f64, n: f64) -> Self {
        Self {
            lower: Side::Penalty(m),
            upper: Side::Penalty(n),
        }
    }

    /// Upper side reflected exactly, lower side penalized with `m`.
    pub fn upper_clamped(m: f64) -> Self {
        Self {
            lower: Side::Penalty(m),
            upper: Side::Clamp,
        }
    }

    fn coefficients(&self) -> Result<(f64, f64), EngineError> {
        let coef = |s: Side| match s {
            Side::Penalty(c) => c,
            _ => 0.0,
        };
        let (m, n) = (coef(self.lower), coef(self.upper));
        if !(m >= 0.0 && m.is_finite() && n >= 0.0 && n.is_finite()) {
            return Err(EngineError::InvalidPenalty { lower: m, upper: n });
        }
        Ok((m, n))
    }
}

/// A lattice problem with all data resolved to nodes.
#[derive(Clone)]
pub struct NodeProblem {
    pub lattice: Lattice,
    pub driver: Arc<dyn StepDriver>,
    pub terminal: Vec<f64>,
    pub lower: BoundField,
    pub upper: BoundField,
    /// Extra increment added to the continuation at each node.
    pub exogenous: Option<NodeField>,
}

impl NodeProblem {
    pub fn new(
        lattice: &Lattice,
        driver: Arc<dyn StepDriver>,
        barriers: &BarrierPair,
        terminal: &TerminalCondition,
    ) -> Self {
        Self {
            lattice: lattice.clone(),
            driver,
            terminal: terminal.resolve(lattice),
            lower: barriers.lower.resolve(lattice),
            upper: barriers.upper.resolve(lattice),
            exogenous: None,
        }
    }

    pub fn from_spec(spec: &ProblemSpec) -> Self {
        Self::new(
            &spec.lattice(),
            Arc::new(spec.driver.clone()),
            &spec.barriers,
            &spec.terminal,
        )
    }

    pub fn with_driver(mut self, driver: Arc<dyn StepDriver>) -> Self {
        self.driver = driver;
        self
    }

    pub fn with_exogenous(mut self, increments: NodeField) -> Self {
        self.exogenous = Some(increments);
        self
    }

    pub fn without_upper(mut self) -> Self {
        self.upper = BoundField::unbounded(&self.lattice);
        self
    }

    pub fn without_lower(mut self) -> Self {
        self.lower = BoundField::unbounded(&self.lattice);
        self
    }

    fn check_shapes(&self) -> Result<(), EngineError> {
        let n = self.lattice.steps();
        let mismatch = |what, found| EngineError::DimensionMismatch {
            what,
            expected: n,
            found,
        };
        if self.terminal.len() != n + 1 {
            return Err(mismatch(
                "terminal values",
                self.terminal.len().saturating_sub(1),
            ));
        }
        if self.lower.steps() != n {
            return Err(mismatch("lower barrier", self.lower.steps()));
        }
        if self.upper.steps() != n {
            return Err(mismatch("upper barrier", self.upper.steps()));
        }
        if let Some(e) = &self.exogenous {
            if !e.fits(&self.lattice) {
                return Err(mismatch("exogenous increments", e.steps()));
            }
        }
        Ok(())
    }

    /// Runs backward induction under `reflection`.
    pub fn solve(&self, reflection: Reflection) -> Result<SolutionQuadruple, EngineError> {
        self.check_shapes()?;
        let (m, n_pen) = reflection.coefficients()?;
        let lattice = &self.lattice;
        let dt = lattice.dt();
        if let Some(lip) = self.driver.lipschitz_y() {
            if dt * lip > 0.5 {
                return Err(EngineError::StabilityGate { product: dt * lip });
            }
        }
        let steps = lattice.steps();
        let sd = lattice.sqrt_dt();
        let mut y = NodeField::zeros(lattice);
        let mut z = NodeField::zeros(lattice);
        let mut drift = NodeField::zeros(lattice);
        let mut da = NodeField::zeros(lattice);
        let mut dk = NodeField::zeros(lattice);
        y.level_mut(steps).copy_from_slice(&self.terminal);

        for k in (0..steps).rev() {
            let t = lattice.time(k);
            for j in 0..=k {
                let node = Node::new(k, j);
                let (up, down) = (y.get(node.up()), y.get(node.down()));
                let c = 0.5 * (up + down);
                let zz = (up - down) / (2.0 * sd);
                let e = self.exogenous.as_ref().map_or(0.0, |f| f.get(node));
                let lower = self.lower.get(node);
                let upper = self.upper.get(node);
                let out = step_node(
                    self.driver.as_ref(),
                    node,
                    t,
                    dt,
                    c + e,
                    zz,
                    lower,
                    upper,
                    reflection,
                    m,
                    n_pen,
                )?;
                y.set(node, out.y);
                z.set(node, zz);
                drift.set(node, out.drift + e);
                da.set(node, out.da);
                dk.set(node, out.dk);
            }
        }
        Ok(SolutionQuadruple::assemble(lattice, y, z, drift, da, dk))
    }
}

pub(crate) struct NodeStep {
    pub y: f64,
    pub drift: f64,
    pub da: f64,
    pub dk: f64,
}

/// One semi-implicit step followed by the side treatments of `reflection`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_node(
    driver: &dyn StepDriver,
    node: Node,
    t: f64,
    dt: f64,
    center: f64,
    z: f64,
    lower: Option<f64>,
    upper: Option<f64>,
    reflection: Reflection,
    m: f64,
    n: f64,
) -> Result<NodeStep, EngineError> {
    let f = |y: f64| driver.value(node, t, y, z);
    let map = step::StepMap {
        f: &f,
        uses_y: driver.uses_y(),
        center,
        dt,
        z,
        growth: driver.growth(),
        lower: if matches!(reflection.lower, Side::Penalty(_)) {
            lower
        } else {
            None
        },
        upper: if matches!(reflection.upper, Side::Penalty(_)) {
            upper
        } else {
            None
        },
        m,
        n,
    };
    let sol = map.solve().ok_or_else(|| EngineError::StepDiverged {
        node,
        detail: format!("no bracket around continuation {center}"),
    })?;
    if !sol.converged {
        return Err(EngineError::StepDiverged {
            node,
            detail: format!(
                "residual {} after {} iterations",
                sol.residual, sol.iterations
            ),
        });
    }
    let raw = sol.y;
    let drift = dt * f(raw);
    let mut da = 0.0;
    let mut dk = 0.0;
    if let (Side::Penalty(_), Some(l)) = (reflection.lower, lower) {
        da += dt * m * (l - raw).max(0.0);
    }
    if let (Side::Penalty(_), Some(u)) = (reflection.upper, upper) {
        dk += dt * n * (raw - u).max(0.0);
    }
    let mut yv = raw;
    if let (Side::Clamp, Some(l)) = (reflection.lower, lower) {
        if yv < l {
            da += l - yv;
            yv = l;
        }
    }
    if let (Side::Clamp, Some(u)) = (reflection.upper, upper) {
        if yv > u {
            dk += yv - u;
            yv = u;
        }
    }
    Ok(NodeStep {
        y: yv,
        drift,
        da,
        dk,
    })
}

/// Classical BSDE (no reflection): returns `(Y, Z)`.
pub fn solve_bsde(
    lattice: &Lattice,
    driver: &Driver,
    terminal: &TerminalCondition,
) -> Result<(NodeField, NodeField), EngineError> {
    let q = NodeProblem::new(
        lattice,
        Arc::new(driver.clone()),
        &BarrierPair::none(),
        terminal,
    )
    .solve(Reflection::NONE)?;
    Ok((q.y, q.z))
}

/// Driver `g = f + m (L - y)^+ - n (y - U)^+` of the doubly penalized equation.
#[derive(Debug, Clone)]
pub struct PenalizedDriver {
    pub base: Driver,
    pub lower_penalty: f64,
    pub upper_penalty: f64,
    pub barriers: BarrierPair,
}

impl PenalizedDriver {
    pub fn new(
        base: Driver,
        lower_penalty: f64,
        upper_penalty: f64,
        barriers: BarrierPair,
    ) -> Self {
        Self {
            base,
            lower_penalty,
            upper_penalty,
            barriers,
        }
    }

    /// `g(t, y, z)` at a point with Brownian value `x`.
    pub fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> f64 {
        let mut g = self.base.eval(t, y, z);
        if let Ok(Some(l)) = self.barriers.lower.at_point(t, x, None) {
            g += self.lower_penalty * (l - y).max(0.0);
        }
        if let Ok(Some(u)) = self.barriers.upper.at_point(t, x, None) {
            g -= self.upper_penalty * (y - u).max(0.0);
        }
        g
    }
}

/// Doubly penalized equation; `A`, `K` are the accumulated penalty terms.
pub fn solve_penalized(
    lattice: &Lattice,
    pd: &PenalizedDriver,
    terminal: &TerminalCondition,
) -> Result<SolutionQuadruple, EngineError> {
    NodeProblem::new(lattice, Arc::new(pd.base.clone()), &pd.barriers, terminal)
        .solve(Reflection::penalized(pd.lower_penalty, pd.upper_penalty))
}

/// Doubly reflected solution by exact projection at every node.
pub fn solve_reflected_oracle(
    lattice: &Lattice,
    driver: &Driver,
    barriers: &BarrierPair,
    terminal: &TerminalCondition,
) -> Result<SolutionQuadruple, EngineError> {
    NodeProblem::new(lattice, Arc::new(driver.clone()), barriers, terminal).solve(Reflection::CLAMP)
}

/// Upper barrier reflected exactly, lower barrier penalized with `m`: the
/// `n -> infinity` limit of the doubly penalized equation at fixed `m`.
pub fn solve_upper_reflected(
    lattice: &Lattice,
    driver: &Driver,
    barriers: &BarrierPair,
    terminal: &TerminalCondition,
    m: f64,
) -> Result<SolutionQuadruple, EngineError> {
    NodeProblem::new(lattice, Arc::new(driver.clone()), barriers, terminal)
        .solve(Reflection::upper_clamped(m))
}

pub fn oracle(spec: &ProblemSpec) -> Result<SolutionQuadruple, EngineError> {
    NodeProblem::from_spec(spec).solve(Reflection::CLAMP)
}

pub fn penalized(spec: &ProblemSpec, m: f64, n: f64) -> Result<SolutionQuadruple, EngineError> {
    NodeProblem::from_spec(spec).solve(Reflection::penalized(m, n))
}
