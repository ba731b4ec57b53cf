//! Least-squares Monte Carlo on simulated Brownian paths.
//!
//! Conditional expectations are regressions on a polynomial basis in the
//! standardized state `u = x / sqrt(t)`; `Z` comes from regressing
//! `Y_{k+1} dB_k / dt`. The per-path step is the lattice engine's
//! semi-implicit step, so the two methods differ only in how the
//! continuation and `Z` are estimated. With coin-flip increments and a basis
//! rich enough to separate the `k + 1` reachable states, the regressions are
//! exact sample means per node.

mod regression;

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{step_node, EngineError, PenalizedDriver, Reflection, StepDriver};
use crate::model::{
    BarrierPair, Driver, Lattice, LatticePath, ModelError, Node, TerminalCondition, TimeGrid,
};

pub use regression::{least_squares, LeastSquaresFit, RELATIVE_CUTOFF};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("regression at step {step} is rank deficient: rank {rank} with {columns} columns and {paths} paths")]
    SingularRegression {
        step: usize,
        rank: usize,
        columns: usize,
        paths: usize,
    },
    #[error("at least one path is required")]
    NoPaths,
    #[error("lattice-table barriers need coin-flip increments")]
    TableNeedsCoin,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncrementMode {
    /// `+-sqrt(dt)` with probability one half; same law as the lattice.
    Coin,
    Gaussian,
}

impl FromStr for IncrementMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coin" => Ok(Self::Coin),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(format!(
                "unknown increment mode `{other}` (expected coin or gaussian)"
            )),
        }
    }
}

/// Simulated Brownian paths, stored step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    lattice: Lattice,
    seed: u64,
    mode: IncrementMode,
    n_paths: usize,
    /// `increments[k][i] = B_{k+1} - B_k` on path `i`.
    increments: Vec<Vec<f64>>,
    states: Vec<Vec<f64>>,
    /// Up-move counts per step (coin mode).
    ups: Option<Vec<Vec<u32>>>,
}

/// Draws `n_paths` paths. Path `i` uses ChaCha8 stream `i` of `seed`, so the
/// bundle does not depend on the worker count.
pub fn simulate_paths(
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
    mode: IncrementMode,
) -> Result<PathBundle, McError> {
    if n_paths == 0 {
        return Err(McError::NoPaths);
    }
    let lattice = Lattice::new(grid);
    let n = lattice.steps();
    let sd = lattice.sqrt_dt();
    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (0..n)
                .map(|_| match mode {
                    IncrementMode::Coin => {
                        if rng.random::<bool>() {
                            sd
                        } else {
                            -sd
                        }
                    }
                    IncrementMode::Gaussian => sd * rng.sample::<f64, _>(StandardNormal),
                })
                .collect()
        })
        .collect();
    let increments: Vec<Vec<f64>> = (0..n)
        .map(|k| per_path.iter().map(|p| p[k]).collect())
        .collect();
    let mut states = vec![vec![0.0; n_paths]];
    let mut ups = (mode == IncrementMode::Coin).then(|| vec![vec![0u32; n_paths]]);
    for k in 0..n {
        match ups.as_mut() {
            Some(u) => {
                let next: Vec<u32> = u[k]
                    .iter()
                    .zip(&increments[k])
                    .map(|(c, d)| c + u32::from(*d > 0.0))
                    .collect();
                states.push(
                    next.iter()
                        .map(|c| lattice.brownian(Node::new(k + 1, *c as usize)))
                        .collect(),
                );
                u.push(next);
            }
            None => {
                let next = states[k]
                    .iter()
                    .zip(&increments[k])
                    .map(|(x, d)| x + d)
                    .collect();
                states.push(next);
            }
        }
    }
    Ok(PathBundle {
        lattice,
        seed,
        mode,
        n_paths,
        increments,
        states,
        ups,
    })
}

impl PathBundle {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn grid(&self) -> &TimeGrid {
        self.lattice.grid()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> IncrementMode {
        self.mode
    }

    pub fn steps(&self) -> usize {
        self.lattice.steps()
    }

    pub fn increment(&self, path: usize, k: usize) -> f64 {
        self.increments[k][path]
    }

    /// `B_{t_k}` across all paths.
    pub fn states(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    /// Lattice node visited at step `k` (coin mode only).
    pub fn node(&self, path: usize, k: usize) -> Option<Node> {
        self.ups.as_ref().map(|u| Node::new(k, u[k][path] as usize))
    }

    /// The lattice path traced by a coin-mode path.
    pub fn lattice_path(&self, path: usize) -> Option<LatticePath> {
        self.ups.as_ref()?;
        let moves: Vec<bool> = (0..self.steps())
            .map(|k| self.increments[k][path] > 0.0)
            .collect();
        Some(LatticePath::from_moves(&moves))
    }
}

/// Polynomial basis in `u = x / sqrt(t)`, optionally with `pos(L(t, x))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionBasis {
    pub degree: usize,
    pub barrier_feature: bool,
}

impl RegressionBasis {
    pub fn new(degree: usize) -> Self {
        Self {
            degree,
            barrier_feature: false,
        }
    }

    pub fn with_barrier_feature(mut self) -> Self {
        self.barrier_feature = true;
        self
    }

    pub fn columns(&self) -> usize {
        self.degree + 1 + usize::from(self.barrier_feature)
    }
}

impl Default for RegressionBasis {
    fn default() -> Self {
        Self::new(4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSolution {
    /// `Y_0` with stderr of the pathwise representation
    /// `xi + sum (drift + dA - dK)`, whose mean equals `Y_0`.
    pub y0: Estimate,
    /// Per-path `Y`, indexed `[k][path]`.
    pub y: Vec<Vec<f64>>,
    /// Per-path `Z`, indexed `[k][path]`, `k < N`.
    pub z: Vec<Vec<f64>>,
    pub a_terminal: Estimate,
    pub k_terminal: Estimate,
    pub a_terminal_sq: Estimate,
    pub k_terminal_sq: Estimate,
    pub sup_y_sq: Estimate,
    pub int_z_sq: Estimate,
    /// Per-path `max_k (L_k^+)^2`; an estimate of the essential-supremum moment.
    pub sup_lower_pos_sq: Option<Estimate>,
    /// Rank of each step's regression.
    pub ranks: Vec<usize>,
}

/// Classical BSDE by regression.
pub fn solve_bsde_mc(
    bundle: &PathBundle,
    driver: &Driver,
    terminal: &TerminalCondition,
    basis: RegressionBasis,
) -> Result<McSolution, McError> {
    backward(
        bundle,
        driver,
        &BarrierPair::none(),
        terminal,
        basis,
        Reflection::NONE,
    )
}

/// Doubly penalized equation by regression.
pub fn solve_penalized_mc(
    bundle: &PathBundle,
    pd: &PenalizedDriver,
    terminal: &TerminalCondition,
    basis: RegressionBasis,
) -> Result<McSolution, McError> {
    backward(
        bundle,
        &pd.base,
        &pd.barriers,
        terminal,
        basis,
        Reflection::penalized(pd.lower_penalty, pd.upper_penalty),
    )
}

fn barrier_values(
    bundle: &PathBundle,
    barrier: &crate::model::Barrier,
    k: usize,
) -> Result<Vec<Option<f64>>, McError> {
    if matches!(barrier, crate::model::Barrier::Table(_)) && bundle.mode != IncrementMode::Coin {
        return Err(McError::TableNeedsCoin);
    }
    let t = bundle.lattice.time(k);
    (0..bundle.n_paths)
        .map(|i| {
            barrier
                .at_point(t, bundle.states[k][i], bundle.node(i, k))
                .map_err(McError::from)
        })
        .collect()
}

fn design(
    bundle: &PathBundle,
    k: usize,
    basis: RegressionBasis,
    lower: &[Option<f64>],
) -> DMatrix<f64> {
    let t = bundle.lattice.time(k);
    let scale = if t > 0.0 { 1.0 / t.sqrt() } else { 0.0 };
    let xs = &bundle.states[k];
    DMatrix::from_fn(bundle.n_paths, basis.columns(), |i, c| {
        if c <= basis.degree {
            (xs[i] * scale).powi(c as i32)
        } else {
            lower[i].map_or(0.0, |l| l.max(0.0))
        }
    })
}

struct PathStep {
    y: f64,
    drift: f64,
    da: f64,
    dk: f64,
}

fn backward(
    bundle: &PathBundle,
    driver: &Driver,
    barriers: &BarrierPair,
    terminal: &TerminalCondition,
    basis: RegressionBasis,
    reflection: Reflection,
) -> Result<McSolution, McError> {
    let lattice = &bundle.lattice;
    let n = lattice.steps();
    let np = bundle.n_paths;
    let dt = lattice.dt();
    if let Some(lip) = driver.lipschitz() {
        if dt * lip > 0.5 {
            return Err(EngineError::StabilityGate { product: dt * lip }.into());
        }
    }
    let (m, pen_n) = match (reflection.lower, reflection.upper) {
        (crate::engine::Side::Penalty(a), crate::engine::Side::Penalty(b)) => (a, b),
        _ => (0.0, 0.0),
    };
    if !(m >= 0.0 && m.is_finite() && pen_n >= 0.0 && pen_n.is_finite()) {
        return Err(EngineError::InvalidPenalty {
            lower: m,
            upper: pen_n,
        }
        .into());
    }
    if np < basis.columns() {
        return Err(McError::SingularRegression {
            step: n,
            rank: 0,
            columns: basis.columns(),
            paths: np,
        });
    }

    let mut y = vec![Vec::new(); n + 1];
    let mut z = vec![Vec::new(); n];
    y[n] = bundle.states[n].iter().map(|x| terminal.eval(*x)).collect();
    let mut theta = y[n].clone();
    let mut a_t = vec![0.0; np];
    let mut k_t = vec![0.0; np];
    let mut int_z = vec![0.0; np];
    let mut sup_y: Vec<f64> = y[n].iter().map(|v| v * v).collect();
    let has_lower = !barriers.lower.is_unbounded();
    let mut sup_l: Vec<f64> = if has_lower {
        barrier_values(bundle, &barriers.lower, n)?
            .iter()
            .map(|l| l.map_or(0.0, |v| v.max(0.0).powi(2)))
            .collect()
    } else {
        Vec::new()
    };
    let mut ranks = vec![0; n];

    for k in (0..n).rev() {
        let t = lattice.time(k);
        let lower = barrier_values(bundle, &barriers.lower, k)?;
        let upper = barrier_values(bundle, &barriers.upper, k)?;
        let x = design(bundle, k, basis, &lower);
        let rhs = DMatrix::from_fn(np, 2, |i, c| {
            if c == 0 {
                y[k + 1][i]
            } else {
                y[k + 1][i] * bundle.increments[k][i] / dt
            }
        });
        let fit = least_squares(&x, &rhs).ok_or(McError::SingularRegression {
            step: k,
            rank: 0,
            columns: basis.columns(),
            paths: np,
        })?;
        ranks[k] = fit.rank;
        let steps: Vec<PathStep> = (0..np)
            .into_par_iter()
            .map(|i| {
                let node = bundle.node(i, k).unwrap_or(Node::new(k, 0));
                let (c, zz) = (fit.fitted[(i, 0)], fit.fitted[(i, 1)]);
                let out = step_node(
                    driver as &dyn StepDriver,
                    node,
                    t,
                    dt,
                    c,
                    zz,
                    lower[i],
                    upper[i],
                    reflection,
                    m,
                    pen_n,
                )?;
                Ok(PathStep {
                    y: out.y,
                    drift: out.drift,
                    da: out.da,
                    dk: out.dk,
                })
            })
            .collect::<Result<_, EngineError>>()?;
        z[k] = (0..np).map(|i| fit.fitted[(i, 1)]).collect();
        y[k] = steps.iter().map(|s| s.y).collect();
        for (i, s) in steps.iter().enumerate() {
            theta[i] += s.drift + s.da - s.dk;
            a_t[i] += s.da;
            k_t[i] += s.dk;
            int_z[i] += dt * z[k][i] * z[k][i];
            sup_y[i] = sup_y[i].max(s.y * s.y);
            if has_lower {
                sup_l[i] = sup_l[i].max(lower[i].map_or(0.0, |v| v.max(0.0).powi(2)));
            }
        }
    }

    let y0_mean = y[0].iter().sum::<f64>() / np as f64;
    let sq = |v: &[f64]| v.iter().map(|a| a * a).collect::<Vec<_>>();
    Ok(McSolution {
        y0: Estimate {
            mean: y0_mean,
            stderr: Estimate::from_samples(&theta).stderr,
        },
        a_terminal: Estimate::from_samples(&a_t),
        k_terminal: Estimate::from_samples(&k_t),
        a_terminal_sq: Estimate::from_samples(&sq(&a_t)),
        k_terminal_sq: Estimate::from_samples(&sq(&k_t)),
        sup_y_sq: Estimate::from_samples(&sup_y),
        int_z_sq: Estimate::from_samples(&int_z),
        sup_lower_pos_sq: has_lower.then(|| Estimate::from_samples(&sup_l)),
        y,
        z,
        ranks,
    })
}
