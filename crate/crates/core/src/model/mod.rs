//! Problem data for doubly reflected BSDEs on a binomial lattice.
//!
//! The lattice discretizes a scalar Brownian motion; drivers, barriers and
//! terminal conditions are Markovian in `(t, B_t)`, with node tables for
//! barriers that are not given by a formula.

mod lattice;
mod problem;
mod validate;
mod witness;

use thiserror::Error;

pub use lattice::{build_lattice, BoundField, Lattice, LatticePath, Node, NodeField, TimeGrid};
pub use problem::{
    Barrier, BarrierFn, BarrierPair, Driver, DriverFn, ProblemSpec, SolutionQuadruple,
    TerminalCondition, TerminalFn,
};
pub use validate::{validate_problem, Assumption, AssumptionCheck, CheckStatus, ValidationReport};
pub use witness::{check_mokobodzki_witness, forward_clamp_witness, MokobodzkiWitness};

pub(crate) use lattice::dot;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid time grid: horizon {horizon}, steps {steps}")]
    InvalidGrid { horizon: f64, steps: usize },
    #[error("{assumption} violated at node {node}: {detail}")]
    HardViolation {
        assumption: Assumption,
        node: Node,
        detail: String,
    },
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("barrier table queried off the lattice at t={t}, x={x}")]
    TableOffLattice { t: f64, x: f64 },
}
