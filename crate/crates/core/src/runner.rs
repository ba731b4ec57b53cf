//! Penalization sweeps and the two-stage limit `n -> inf`, then `m -> inf`.
//!
//! Every study runs on one fixed lattice: the limits checked here are limits
//! in the penalty coefficients, not in the time step.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::{
    apriori_bounds, terminal_second_moment, BoundsRecord, DiagnosticsError, SupSampler, ROOT_TOL,
};
use crate::engine::{EngineError, NodeProblem, Reflection, Side, StepDriver};
use crate::lipschitz::{ApproxError, ApproxFamily};
use crate::model::{CheckStatus, Driver, Node, NodeField, ProblemSpec, SolutionQuadruple};

/// Envelope factor on the oracle's a priori statistics.
pub const ENVELOPE_FACTOR: f64 = 10.0;
/// Minimum number of positive gaps for a decay fit.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunnerError {
    #[error("schedule list `{0}` is empty")]
    EmptyList(&'static str),
    #[error("schedule list `{0}` must be strictly ascending, finite and nonnegative")]
    BadList(&'static str),
    #[error("oracle failed: {0}")]
    Oracle(EngineError),
    #[error("cell p={p:?}, m={m}, n={n} failed: {source}")]
    Cell {
        p: Option<f64>,
        m: f64,
        n: f64,
        source: EngineError,
    },
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Grid of approximation levels `p` and penalty coefficients `m`, `n`.
/// An empty `p` list means the raw driver is used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenalizationSchedule {
    pub p: Vec<f64>,
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    pub tie_p_to_m: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellKey {
    pub p: Option<f64>,
    pub m: f64,
    pub n: f64,
}

fn ascending(name: &'static str, xs: &[f64], allow_empty: bool) -> Result<(), RunnerError> {
    if xs.is_empty() && !allow_empty {
        return Err(RunnerError::EmptyList(name));
    }
    let ok = xs.iter().all(|x| x.is_finite() && *x >= 0.0) && xs.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(RunnerError::BadList(name))
    }
}

impl PenalizationSchedule {
    pub fn new(
        p: Vec<f64>,
        m: Vec<f64>,
        n: Vec<f64>,
        tie_p_to_m: bool,
    ) -> Result<Self, RunnerError> {
        ascending("p", &p, true)?;
        ascending("m", &m, false)?;
        ascending("n", &n, false)?;
        Ok(Self {
            p,
            m,
            n,
            tie_p_to_m,
        })
    }

    /// `m = n` over the given values.
    pub fn diagonal(values: Vec<f64>) -> Result<Self, RunnerError> {
        Self::new(Vec::new(), values.clone(), values, false)
    }

    /// Checks the approximation levels against the growth constant.
    pub fn check_levels(&self, growth: f64) -> Result<(), RunnerError> {
        let levels = if self.tie_p_to_m { &self.m } else { &self.p };
        if let Some(&level) = levels.iter().find(|&&p| !(p > growth)) {
            return Err(ApproxError::LevelTooLow { level, growth }.into());
        }
        Ok(())
    }

    fn levels(&self) -> Vec<Option<f64>> {
        if self.tie_p_to_m || self.p.is_empty() {
            vec![None]
        } else {
            self.p.iter().copied().map(Some).collect()
        }
    }

    /// Cells in ascending `(p, m, n)` order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for p in self.levels() {
            for &m in &self.m {
                for &n in &self.n {
                    let p = if self.tie_p_to_m { Some(m) } else { p };
                    out.push(CellKey { p, m, n });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub p: Option<f64>,
    pub m: f64,
    pub n: f64,
    pub y0: f64,
    pub e_a_t: f64,
    pub e_k_t: f64,
    pub bounds: BoundsRecord,
    pub gap_vs_oracle: f64,
    /// Nodes where `Y` dropped below the previous `m` in the same row.
    pub mono_viol_m: usize,
    /// Nodes where `Y` rose above the previous `n` in the same column.
    pub mono_viol_n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares line through `(log x, log y)`; needs at least
/// [`MIN_FIT_POINTS`] points, all positive.
pub fn fit_log_log(points: &[(f64, f64)]) -> Option<DecayFit> {
    if points.len() < MIN_FIT_POINTS || points.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(DecayFit {
        slope,
        intercept: my - slope * mx,
        points: logs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub baseline: [f64; 4],
    pub realized_max: [f64; 4],
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub oracle_y0: f64,
    pub baseline: BoundsRecord,
    pub records: Vec<CellRecord>,
    pub mono_viol_m: usize,
    pub mono_viol_n: usize,
    /// `(m, gap)` along the decay series (diagonal `m = n` when available).
    pub decay_series: Vec<(f64, f64)>,
    pub gaps_strictly_decreasing: bool,
    pub decay: Option<DecayFit>,
    pub envelope: Envelope,
    pub double_limit: Option<DoubleLimitReport>,
}

pub(crate) fn driver_for(spec: &ProblemSpec, p: Option<f64>) -> Result<Driver, RunnerError> {
    match p {
        None => Ok(spec.driver.clone()),
        Some(p) => Ok(ApproxFamily::new(spec.driver.clone(), vec![p])?.driver_at(p)?),
    }
}

fn count_below(a: &NodeField, b: &NodeField) -> usize {
    a.iter()
        .filter(|(node, v)| *v < b.get(*node) - ROOT_TOL)
        .count()
}

/// Solves every schedule cell and compares against the clamped oracle.
pub fn run_schedule(
    spec: &ProblemSpec,
    schedule: &PenalizationSchedule,
    sampler: SupSampler,
) -> Result<ConvergenceReport, RunnerError> {
    schedule.check_levels(spec.driver.growth())?;
    let base = NodeProblem::from_spec(spec);
    let lattice = base.lattice.clone();
    let oracle = base.solve(Reflection::CLAMP).map_err(RunnerError::Oracle)?;
    let baseline = apriori_bounds(&lattice, &oracle, sampler);

    let cells = schedule.cells();
    let solved: Vec<(CellKey, SolutionQuadruple)> = cells
        .par_iter()
        .map(|key| {
            let tag = |source| RunnerError::Cell {
                p: key.p,
                m: key.m,
                n: key.n,
                source,
            };
            let driver = driver_for(spec, key.p)?;
            let q = base
                .clone()
                .with_driver(Arc::new(driver))
                .solve(Reflection::penalized(key.m, key.n))
                .map_err(tag)?;
            Ok((*key, q))
        })
        .collect::<Result<_, RunnerError>>()?;

    let index = |p: Option<f64>, m: f64, n: f64| {
        solved
            .iter()
            .position(|(k, _)| k.p == p && k.m == m && k.n == n)
    };
    let mut records = Vec::with_capacity(solved.len());
    for (i, (key, q)) in solved.iter().enumerate() {
        let prev_m = schedule
            .m
            .iter()
            .position(|&m| m == key.m)
            .and_then(|im| im.checked_sub(1))
            .map(|im| schedule.m[im])
            .and_then(|m| {
                let p = if schedule.tie_p_to_m { Some(m) } else { key.p };
                index(p, m, key.n)
            });
        let prev_n = schedule
            .n
            .iter()
            .position(|&n| n == key.n)
            .and_then(|jn| jn.checked_sub(1))
            .and_then(|jn| index(key.p, key.m, schedule.n[jn]));
        let mono_viol_m = prev_m.map_or(0, |j| count_below(&q.y, &solved[j].1.y));
        let mono_viol_n = prev_n.map_or(0, |j| count_below(&solved[j].1.y, &q.y));
        debug_assert_eq!(index(key.p, key.m, key.n), Some(i));
        records.push(CellRecord {
            p: key.p,
            m: key.m,
            n: key.n,
            y0: q.y0(),
            e_a_t: *q.mean_a.last().unwrap_or(&0.0),
            e_k_t: *q.mean_k.last().unwrap_or(&0.0),
            bounds: apriori_bounds(&lattice, q, sampler),
            gap_vs_oracle: (q.y0() - oracle.y0()).abs(),
            mono_viol_m,
            mono_viol_n,
        });
    }

    let top_p = records.last().and_then(|r| r.p);
    let mut decay_series: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.m == r.n && (schedule.tie_p_to_m || r.p == top_p))
        .map(|r| (r.m, r.gap_vs_oracle))
        .collect();
    if decay_series.len() < MIN_FIT_POINTS {
        let n_top = *schedule.n.last().unwrap_or(&0.0);
        decay_series = records
            .iter()
            .filter(|r| r.n == n_top && (schedule.tie_p_to_m || r.p == top_p))
            .map(|r| (r.m, r.gap_vs_oracle))
            .collect();
    }
    let gaps_strictly_decreasing =
        decay_series.len() >= 2 && decay_series.windows(2).all(|w| w[1].1 < w[0].1);
    let decay = fit_log_log(&decay_series);

    let base4 = baseline.as_array();
    let mut realized = [0.0f64; 4];
    for r in &records {
        for (slot, v) in realized.iter_mut().zip(r.bounds.as_array()) {
            *slot = slot.max(v);
        }
    }
    let passed = realized
        .iter()
        .zip(base4)
        .all(|(v, b)| *v <= ENVELOPE_FACTOR * b + 1e-12);

    Ok(ConvergenceReport {
        oracle_y0: oracle.y0(),
        baseline,
        mono_viol_m: records.iter().map(|r| r.mono_viol_m).sum(),
        mono_viol_n: records.iter().map(|r| r.mono_viol_n).sum(),
        records,
        decay_series,
        gaps_strictly_decreasing,
        decay,
        envelope: Envelope {
            baseline: base4,
            realized_max: realized,
            passed,
        },
        double_limit: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntermediateRecord {
    pub m: f64,
    pub n_max: f64,
    pub y0_at_n_max: f64,
    /// Richardson extrapolation in `1/n` from the two largest `n`.
    pub extrapolated: f64,
    pub hybrid_y0: f64,
    pub gap_at_n_max: f64,
    pub extrapolated_gap: f64,
    pub nodewise_gap: f64,
    /// `extrapolated_gap <= 2 / n_max`.
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleLimitReport {
    pub intermediates: Vec<IntermediateRecord>,
    /// Nodes where the `U`-reflected solution decreases as `m` grows.
    pub hybrid_monotone_violations: usize,
    pub oracle_y0: f64,
    /// `|Y^m_0 - Y_0|` at the largest `m`.
    pub m_limit_gap: f64,
}

/// For each `m`, takes `n -> inf` by comparing against the `U`-reflected,
/// `L`-penalized solution, then follows that family as `m` grows.
pub fn double_limit_study(
    spec: &ProblemSpec,
    schedule: &PenalizationSchedule,
) -> Result<DoubleLimitReport, RunnerError> {
    schedule.check_levels(spec.driver.growth())?;
    let base = NodeProblem::from_spec(spec);
    let oracle = base.solve(Reflection::CLAMP).map_err(RunnerError::Oracle)?;
    let top_p = schedule.p.last().copied();
    let rows: Vec<(IntermediateRecord, NodeField)> = schedule
        .m
        .par_iter()
        .map(|&m| {
            let p = if schedule.tie_p_to_m { Some(m) } else { top_p };
            let problem = base.clone().with_driver(Arc::new(driver_for(spec, p)?));
            let tag = |n: f64| move |source| RunnerError::Cell { p, m, n, source };
            let mut column = Vec::with_capacity(schedule.n.len());
            for &n in &schedule.n {
                column.push(problem.solve(Reflection::penalized(m, n)).map_err(tag(n))?);
            }
            let hybrid = problem
                .solve(Reflection::upper_clamped(m))
                .map_err(tag(f64::INFINITY))?;
            let ns = &schedule.n;
            let last = column.last().expect("nonempty n list");
            let n_max = *ns.last().expect("nonempty n list");
            let extrapolated = if ns.len() >= 2 {
                let n1 = ns[ns.len() - 2];
                let y1 = column[column.len() - 2].y0();
                last.y0() + (last.y0() - y1) * n1 / (n_max - n1)
            } else {
                last.y0()
            };
            let gap = (last.y0() - hybrid.y0()).abs();
            let extrapolated_gap = (extrapolated - hybrid.y0()).abs();
            Ok((
                IntermediateRecord {
                    m,
                    n_max,
                    y0_at_n_max: last.y0(),
                    extrapolated,
                    hybrid_y0: hybrid.y0(),
                    gap_at_n_max: gap,
                    extrapolated_gap,
                    nodewise_gap: last.y.max_abs_diff(&hybrid.y),
                    within_bound: extrapolated_gap <= 2.0 / n_max,
                },
                hybrid.y,
            ))
        })
        .collect::<Result<_, RunnerError>>()?;
    let hybrid_monotone_violations = rows.windows(2).map(|w| count_below(&w[1].1, &w[0].1)).sum();
    let last = rows.last().expect("nonempty m list");
    Ok(DoubleLimitReport {
        oracle_y0: oracle.y0(),
        m_limit_gap: (last.0.hybrid_y0 - oracle.y0()).abs(),
        hybrid_monotone_violations,
        intermediates: rows.into_iter().map(|r| r.0).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub label: &'static str,
    pub description: &'static str,
    pub status: CheckStatus,
    pub worst: f64,
    /// Run index and node of the first violation.
    pub first: Option<(usize, Node)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub conditions: Vec<ConditionResult>,
}

impl ConditionReport {
    pub fn get(&self, label: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.label == label)
    }

    pub fn passed(&self) -> bool {
        self.conditions
            .iter()
            .all(|c| matches!(c.status, CheckStatus::Pass | CheckStatus::AutoPass))
    }
}

fn condition(
    label: &'static str,
    description: &'static str,
    worst: f64,
    first: Option<(usize, Node)>,
) -> ConditionResult {
    ConditionResult {
        label,
        description,
        status: if first.is_none() && worst.is_finite() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        worst,
        first,
    }
}

/// Discrete hypotheses of the monotone limit theorem on runs with ascending
/// penalty index. Increments are per node, so the domination of increments
/// over every path segment reduces to `dK^i >= dK^j` at every node.
pub fn monotone_limit_check(
    runs: &[SolutionQuadruple],
    sampler: SupSampler,
) -> Result<ConditionReport, RunnerError> {
    let steps = runs.first().map_or(0, SolutionQuadruple::steps);
    for r in runs {
        if r.steps() != steps {
            return Err(DiagnosticsError::MismatchedLattices {
                expected: steps,
                found: r.steps(),
            }
            .into());
        }
    }
    let negative = |field: fn(&SolutionQuadruple) -> &NodeField| {
        let mut worst: f64 = 0.0;
        let mut first = None;
        for (i, r) in runs.iter().enumerate() {
            for (node, v) in field(r).iter() {
                if v < 0.0 {
                    worst = worst.max(-v);
                    first.get_or_insert((i, node));
                }
            }
        }
        (worst, first)
    };
    let dominated = |field: fn(&SolutionQuadruple) -> &NodeField, tol: f64| {
        let mut worst: f64 = 0.0;
        let mut first = None;
        for (i, w) in runs.windows(2).enumerate() {
            for (node, v) in field(&w[1]).iter() {
                let d = field(&w[0]).get(node) - v;
                if d > tol {
                    worst = worst.max(d);
                    first.get_or_insert((i + 1, node));
                }
            }
        }
        (worst, first)
    };

    let (wa, fa) = negative(|r| &r.da);
    let a2 = runs
        .iter()
        .map(|r| terminal_second_moment(&r.da))
        .fold(0.0, f64::max);
    let (wk, fk) = negative(|r| &r.dk);
    let (wd, fd) = dominated(|r| &r.dk, ROOT_TOL);
    let k2 = runs
        .iter()
        .map(|r| terminal_second_moment(&r.dk))
        .fold(0.0, f64::max);
    let (wy, fy) = dominated(|r| &r.y, ROOT_TOL);
    let sup = runs
        .iter()
        .map(|r| crate::diagnostics::sup_second_moment(&r.y, sampler).0)
        .fold(0.0, f64::max);

    let mut conditions = vec![
        condition("i", "A nondecreasing from 0 with finite E[A_T^2]", wa, fa),
        condition("ii", "K nondecreasing from 0", wk, fk),
        condition("iii", "K increments dominate those of earlier runs", wd, fd),
        condition("iv", "E[K_T^2] bounded across runs", k2, None),
        ConditionResult {
            label: "v",
            description: "weak convergence of (g, z); vacuous in finite dimension",
            status: CheckStatus::AutoPass,
            worst: 0.0,
            first: None,
        },
        condition(
            "vi",
            "Y nondecreasing across runs with bounded E[sup Y^2]",
            wy,
            fy,
        ),
    ];
    if !a2.is_finite() {
        conditions[0].status = CheckStatus::Fail;
    }
    if !sup.is_finite() {
        conditions[5].status = CheckStatus::Fail;
    }
    Ok(ConditionReport { conditions })
}

/// The `U`-reflected, `L`-penalized problem at one `m`.
pub fn upper_reflected(
    problem: &NodeProblem,
    driver: Arc<dyn StepDriver>,
    m: f64,
) -> Result<SolutionQuadruple, EngineError> {
    problem.clone().with_driver(driver).solve(Reflection {
        lower: Side::Penalty(m),
        upper: Side::Clamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Barrier, BarrierPair, TerminalCondition, TimeGrid};

    fn toy(steps: usize, xi: TerminalCondition) -> ProblemSpec {
        ProblemSpec::new(
            TimeGrid::new(1.0, steps).unwrap(),
            Driver::new(1.5, |t, y, z| {
                z - y + 1.5 * (std::f64::consts::PI * t).cos()
            })
            .with_lipschitz(1.0),
            BarrierPair::new(
                Barrier::from_fn(|t, _| -0.3 + 0.1 * t),
                Barrier::constant(0.3),
            ),
            xi,
        )
    }

    #[test]
    fn schedule_validation() {
        assert!(PenalizationSchedule::new(vec![], vec![], vec![1.0], false).is_err());
        assert!(PenalizationSchedule::new(vec![], vec![4.0, 4.0], vec![1.0], false).is_err());
        assert!(PenalizationSchedule::new(vec![], vec![-1.0], vec![1.0], false).is_err());
        let s =
            PenalizationSchedule::new(vec![2.0, 3.0], vec![4.0, 16.0], vec![1.0], false).unwrap();
        assert_eq!(s.cells().len(), 4);
        let tied =
            PenalizationSchedule::new(vec![], vec![4.0, 16.0, 64.0], vec![64.0], true).unwrap();
        assert_eq!(
            tied.cells().iter().map(|c| c.p).collect::<Vec<_>>(),
            vec![Some(4.0), Some(16.0), Some(64.0)]
        );
        assert!(s.check_levels(2.0).is_err());
    }

    #[test]
    fn log_log_fit() {
        let pts: Vec<(f64, f64)> = [4.0, 16.0, 64.0, 256.0]
            .iter()
            .map(|m| (*m, 3.0 / m))
            .collect();
        let fit = fit_log_log(&pts).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(fit_log_log(&pts[..3]).is_none());
    }

    #[test]
    fn inactive_barriers_identical_records() {
        let spec = toy(30, TerminalCondition::constant(0.0))
            .with_driver(Driver::new(1.0, |_, y, z| z - y).with_lipschitz(1.0))
            .with_barriers(BarrierPair::new(
                Barrier::constant(-5.0),
                Barrier::constant(5.0),
            ));
        let s = PenalizationSchedule::diagonal(vec![4.0, 16.0, 64.0]).unwrap();
        let r = run_schedule(&spec, &s, SupSampler::default()).unwrap();
        assert_eq!(r.records.len(), 9);
        assert!(r
            .records
            .iter()
            .all(|c| c.y0 == 0.0 && c.gap_vs_oracle == 0.0));
        assert_eq!(r.mono_viol_m + r.mono_viol_n, 0);
        let d = double_limit_study(&spec, &s).unwrap();
        assert!(d.intermediates.iter().all(|i| i.gap_at_n_max == 0.0));
    }

    #[test]
    fn nondegenerate_toy_converges() {
        let spec = toy(40, TerminalCondition::new(|x: f64| x.clamp(-0.2, 0.3)));
        let s = PenalizationSchedule::diagonal(vec![4.0, 16.0, 64.0, 256.0, 1024.0]).unwrap();
        let r = run_schedule(&spec, &s, SupSampler::default()).unwrap();
        assert_eq!(r.mono_viol_m + r.mono_viol_n, 0);
        assert!(r.gaps_strictly_decreasing, "{:?}", r.decay_series);
        let fit = r.decay.unwrap();
        assert!((-1.5..=-0.5).contains(&fit.slope), "{fit:?}");
        let d = double_limit_study(&spec, &s).unwrap();
        assert_eq!(d.hybrid_monotone_violations, 0);
        assert!(d.intermediates.iter().all(|i| i.within_bound), "{d:?}");
        assert!(d.m_limit_gap <= 1e-2);
    }

    #[test]
    fn monotone_conditions() {
        let spec = toy(20, TerminalCondition::new(|x: f64| x.clamp(-0.2, 0.3)));
        let base = NodeProblem::from_spec(&spec);
        let runs: Vec<_> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&m| base.solve(Reflection::upper_clamped(m)).unwrap())
            .collect();
        let rep = monotone_limit_check(&runs, SupSampler::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.get("v").unwrap().status, CheckStatus::AutoPass);
        let same = monotone_limit_check(&[runs[0].clone(), runs[0].clone()], SupSampler::default())
            .unwrap();
        assert!(same.passed());
        let shuffled = vec![runs[2].clone(), runs[0].clone(), runs[1].clone()];
        let bad = monotone_limit_check(&shuffled, SupSampler::default()).unwrap();
        let vi = bad.get("vi").unwrap();
        assert_eq!(vi.status, CheckStatus::Fail);
        assert_eq!(vi.first.unwrap().0, 1);
    }
}
