use super::lattice::{Lattice, Node, NodeField};
use super::problem::ProblemSpec;
use super::ModelError;

const WITNESS_TOL: f64 = 1e-10;

/// A process `X0 = X0_0 + A0 - K0 + int Z0 dB` squeezed between the barriers.
///
/// `da`/`dk` are per-node increments of `A0`/`K0` accruing over
/// `[t_k, t_{k+1}]`, so `A0_0 = K0_0 = 0` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MokobodzkiWitness {
    pub x: NodeField,
    pub da: NodeField,
    pub dk: NodeField,
    pub z: NodeField,
}

/// True iff the witness lies between the barriers, has nondecreasing `A0`,
/// `K0`, and decomposes along every lattice edge, all within `1e-10`.
pub fn check_mokobodzki_witness(
    spec: &ProblemSpec,
    w: &MokobodzkiWitness,
) -> Result<bool, ModelError> {
    let lattice = spec.lattice();
    for (what, field) in [
        ("witness X0", &w.x),
        ("witness A0", &w.da),
        ("witness K0", &w.dk),
        ("witness Z0", &w.z),
    ] {
        if !field.fits(&lattice) {
            return Err(ModelError::DimensionMismatch {
                what,
                expected: lattice.steps(),
                found: field.steps(),
            });
        }
    }
    let sd = lattice.sqrt_dt();
    for node in lattice.nodes() {
        let x = w.x.get(node);
        if let Some(l) = spec.barriers.lower.at_node(&lattice, node) {
            if x < l - WITNESS_TOL {
                return Ok(false);
            }
        }
        if let Some(u) = spec.barriers.upper.at_node(&lattice, node) {
            if x > u + WITNESS_TOL {
                return Ok(false);
            }
        }
        if node.step == lattice.steps() {
            continue;
        }
        let (da, dk, z) = (w.da.get(node), w.dk.get(node), w.z.get(node));
        if da < -WITNESS_TOL || dk < -WITNESS_TOL {
            return Ok(false);
        }
        for (child, db) in [(node.up(), sd), (node.down(), -sd)] {
            let residual = w.x.get(child) - x - da + dk - z * db;
            if residual.abs() > WITNESS_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Builds a witness by clamping the constant `start` into `[L, U]` node by
/// node and reading off the binomial decomposition of the result.
///
/// On a binomial lattice every node function splits into a predictable
/// drift and a martingale part, so this succeeds whenever the barriers are
/// ordered; it is not a recipe for the continuous-time condition.
pub fn forward_clamp_witness(spec: &ProblemSpec, start: f64) -> MokobodzkiWitness {
    let lattice = spec.lattice();
    let x = NodeField::from_fn(&lattice, |node| {
        let mut v = start;
        if let Some(l) = spec.barriers.lower.at_node(&lattice, node) {
            v = v.max(l);
        }
        if let Some(u) = spec.barriers.upper.at_node(&lattice, node) {
            v = v.min(u);
        }
        v
    });
    decompose(&lattice, x)
}

fn decompose(lattice: &Lattice, x: NodeField) -> MokobodzkiWitness {
    let n = lattice.steps();
    let sd = lattice.sqrt_dt();
    let mut da = NodeField::zeros(lattice);
    let mut dk = NodeField::zeros(lattice);
    let mut z = NodeField::zeros(lattice);
    for k in 0..n {
        for j in 0..=k {
            let node = Node::new(k, j);
            let (up, down) = (x.get(node.up()), x.get(node.down()));
            let drift = 0.5 * (up + down) - x.get(node);
            z.set(node, (up - down) / (2.0 * sd));
            da.set(node, drift.max(0.0));
            dk.set(node, (-drift).max(0.0));
        }
    }
    MokobodzkiWitness { x, da, dk, z }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Barrier, BarrierPair, Driver, TerminalCondition, TimeGrid};

    fn spec(barriers: BarrierPair) -> ProblemSpec {
        ProblemSpec::new(
            TimeGrid::new(1.0, 8).unwrap(),
            Driver::zero(),
            barriers,
            TerminalCondition::constant(0.0),
        )
    }

    fn constant_witness(lattice: &Lattice, c: f64) -> MokobodzkiWitness {
        MokobodzkiWitness {
            x: NodeField::constant(lattice, c),
            da: NodeField::zeros(lattice),
            dk: NodeField::zeros(lattice),
            z: NodeField::zeros(lattice),
        }
    }

    #[test]
    fn constant_witness_between_constant_barriers() {
        let s = spec(BarrierPair::new(
            Barrier::constant(-1.0),
            Barrier::constant(1.0),
        ));
        let l = s.lattice();
        assert!(check_mokobodzki_witness(&s, &constant_witness(&l, 0.0)).unwrap());
        assert!(!check_mokobodzki_witness(&s, &constant_witness(&l, 2.0)).unwrap());
    }

    #[test]
    fn forward_clamp_with_moving_barriers() {
        let s = spec(BarrierPair::new(
            Barrier::from_fn(|_, x| x.min(0.0)),
            Barrier::from_fn(|_, x| x.max(0.0) + 1.0),
        ));
        let w = forward_clamp_witness(&s, 0.0);
        assert!(check_mokobodzki_witness(&s, &w).unwrap());

        // a start value that forces genuine clamping on both sides
        let s2 = spec(BarrierPair::new(
            Barrier::from_fn(|_, x| x - 0.5),
            Barrier::from_fn(|_, x| x + 0.5),
        ));
        let w2 = forward_clamp_witness(&s2, 0.0);
        assert!(check_mokobodzki_witness(&s2, &w2).unwrap());
        assert!(w2.da.iter().any(|(_, v)| v > 0.0) || w2.dk.iter().any(|(_, v)| v > 0.0));
    }

    #[test]
    fn broken_decomposition_detected() {
        let s = spec(BarrierPair::new(
            Barrier::constant(-1.0),
            Barrier::constant(1.0),
        ));
        let l = s.lattice();
        let mut w = constant_witness(&l, 0.0);
        w.z.set(Node::new(2, 1), 0.3);
        assert!(!check_mokobodzki_witness(&s, &w).unwrap());
        let mut w = constant_witness(&l, 0.0);
        w.da.set(Node::new(1, 0), -0.1);
        w.dk.set(Node::new(1, 0), -0.1);
        assert!(!check_mokobodzki_witness(&s, &w).unwrap());
    }

    #[test]
    fn wrong_shape_is_an_error() {
        let s = spec(BarrierPair::none());
        let small = crate::model::build_lattice(1.0, 3).unwrap();
        let w = constant_witness(&small, 0.0);
        assert!(matches!(
            check_mokobodzki_witness(&s, &w),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }
}
