use std::collections::BTreeMap;
use std::sync::Arc;

use super::problem::{ParabolicProblem, ValueEstimate};
use super::search::value_markovian;
use crate::bsde::{TerminalCondition, BIAS_ALLOWANCE, SE_MULTIPLIER};
use crate::error::{Error, Result};
use crate::fd::SpatialGrid;
use crate::report::CheckReport;

/// Floor of the DPP agreement band.
pub const DPP_FLOOR: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DppSettings {
    pub state_bins: usize,
    /// Nodes per dimension of the state grid carrying `u(s, .)`.
    pub grid_nodes: usize,
    /// Half-width of that grid in units of `sqrt(abar (s - t))`.
    pub width_sds: f64,
}

impl Default for DppSettings {
    fn default() -> Self {
        DppSettings {
            state_bins: 8,
            grid_nodes: 17,
            width_sds: 4.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DppOutcome {
    pub report: CheckReport,
    pub direct: ValueEstimate,
    pub restart: ValueEstimate,
    pub tolerance: f64,
}

/// Dynamic programming check: the value at `(t, x)` over `[t, T]` must match
/// the value over `[t, s]` with terminal data `u(s, .)`, itself computed
/// node by node on a state grid and interpolated multilinearly.
pub fn check_dpp(
    prob: &ParabolicProblem,
    t: f64,
    x: &[f64],
    s: f64,
    paths: usize,
    seed: u64,
    settings: DppSettings,
) -> Result<DppOutcome> {
    if !(t < s && s <= prob.horizon()) {
        return Err(Error::InvalidArgument(format!(
            "intermediate time {s} must lie in ({t}, {}]",
            prob.horizon()
        )));
    }
    let direct = value_markovian(prob, t, x, settings.state_bins, paths, seed)?;
    let terminal = if s >= prob.horizon() {
        prob.g.clone()
    } else {
        let abar = prob.set.max_diffusion_eigenvalue(t, x);
        let drift_reach = prob
            .set
            .generators()
            .iter()
            .map(|g| g.drift.eval(t, x).amax())
            .fold(0.0, f64::max)
            * (s - t);
        let half = (settings.width_sds * (abar * (s - t)).sqrt() + drift_reach).max(0.5);
        let grid = SpatialGrid::centered(x, half, settings.grid_nodes)?;
        let mut nodal = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let v = value_markovian(prob, s, &grid.point(i), settings.state_bins, paths, seed)?;
            nodal.push(v.value);
        }
        TerminalCondition::new(
            Arc::new(move |y: &[f64]| grid.interpolate(&nodal, y)),
            f64::INFINITY,
            format!("u({s},.)"),
        )
    };
    let restart_prob = prob.with_horizon(s)?.with_terminal(terminal);
    let restart = value_markovian(&restart_prob, t, x, settings.state_bins, paths, seed)?;
    let combined = (direct.std_error.powi(2) + restart.std_error.powi(2)).sqrt();
    let tolerance = DPP_FLOOR.max(SE_MULTIPLIER * combined);
    let mut report = CheckReport::new();
    report.record_eq(0, "restart=direct", restart.value, direct.value, tolerance);
    Ok(DppOutcome {
        report,
        direct,
        restart,
        tolerance,
    })
}

/// A point `(t, x)` of the value function.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTime {
    pub t: f64,
    pub x: Vec<f64>,
}

impl SpaceTime {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        SpaceTime { t, x }
    }

    fn key(&self) -> Vec<u64> {
        std::iter::once(self.t.to_bits())
            .chain(self.x.iter().map(|v| v.to_bits()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularitySettings {
    pub state_bins: usize,
    pub paths: usize,
    pub seed: u64,
    /// Known constant of `|u(t,x) - u(t',x)| <= C1 |t - t'|^(1/2)`; fitted
    /// when absent.
    pub hoelder: Option<f64>,
    /// Known constant of `|u(t,x) - u(t,x')| <= C2 |x - x'|`; fitted when
    /// absent.
    pub lipschitz: Option<f64>,
}

impl Default for RegularitySettings {
    fn default() -> Self {
        RegularitySettings {
            state_bins: 8,
            paths: 10_000,
            seed: 0,
            hoelder: None,
            lipschitz: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegularityOutcome {
    pub report: CheckReport,
    pub hoelder: f64,
    pub lipschitz: f64,
    /// `c` in `u^2 <= c (1 + |x|^2)`; `None` when `g` has no finite growth
    /// constant and the check is skipped.
    pub growth: Option<f64>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Empirical Hoelder-in-time and Lipschitz-in-space diagnostics. Constants
/// that are not supplied are fitted on the widest pairs of each kind that
/// start at the first pair's base point, then tested on all pairs. Every
/// bound carries
/// `3` combined standard errors plus the bias allowance.
pub fn check_regularity(
    prob: &ParabolicProblem,
    pairs: &[(SpaceTime, SpaceTime)],
    settings: RegularitySettings,
) -> Result<RegularityOutcome> {
    let mut cache: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
    let mut value = |p: &SpaceTime| -> Result<(f64, f64)> {
        if let Some(v) = cache.get(&p.key()) {
            return Ok(*v);
        }
        if p.x.len() != prob.dim() {
            return Err(Error::DimensionMismatch {
                expected: prob.dim(),
                got: p.x.len(),
            });
        }
        let v = if p.t >= prob.horizon() {
            (prob.g.eval(&p.x), 0.0)
        } else {
            let e = value_markovian(prob, p.t, &p.x, settings.state_bins, settings.paths, settings.seed)?;
            (e.value, e.std_error)
        };
        cache.insert(p.key(), v);
        Ok(v)
    };

    struct Row {
        dt: f64,
        dx: f64,
        diff: f64,
        tol: f64,
    }
    let mut rows = Vec::with_capacity(pairs.len());
    let mut points = Vec::new();
    for (a, b) in pairs {
        let (ua, sa) = value(a)?;
        let (ub, sb) = value(b)?;
        rows.push(Row {
            dt: (a.t - b.t).abs(),
            dx: distance(&a.x, &b.x),
            diff: (ua - ub).abs(),
            tol: SE_MULTIPLIER * (sa * sa + sb * sb).sqrt() + BIAS_ALLOWANCE,
        });
        points.push((a.x.clone(), ua, sa));
        points.push((b.x.clone(), ub, sb));
    }

    // constants come from the largest increment of each kind anchored at
    // the first point; every pair is then checked against them
    let anchor = pairs.first().map(|(a, _)| a.key());
    let anchored: Vec<bool> = pairs.iter().map(|(a, _)| Some(a.key()) == anchor).collect();
    let fit_from = |select: &dyn Fn(&Row) -> Option<(f64, f64)>| -> f64 {
        let cand: Vec<(&Row, f64, f64)> = rows
            .iter()
            .zip(&anchored)
            .filter(|(_, &a)| a)
            .filter_map(|(r, _)| select(r).map(|(inc, scale)| (r, inc, scale)))
            .collect();
        let widest = cand.iter().map(|c| c.1).fold(0.0, f64::max);
        cand.iter()
            .filter(|c| c.1 >= widest * (1.0 - 1e-12))
            .map(|(r, _, scale)| (r.diff - r.tol).max(0.0) / scale)
            .fold(0.0, f64::max)
            * (1.0 + 1e-9)
    };
    let hoelder = settings
        .hoelder
        .unwrap_or_else(|| fit_from(&|r| (r.dx == 0.0 && r.dt > 0.0).then(|| (r.dt, r.dt.sqrt()))));
    let lipschitz = settings
        .lipschitz
        .unwrap_or_else(|| fit_from(&|r| (r.dt == 0.0 && r.dx > 0.0).then_some((r.dx, r.dx))));

    let mut report = CheckReport::new();
    for (i, r) in rows.iter().enumerate() {
        let bound = hoelder * r.dt.sqrt() + lipschitz * r.dx;
        let what = match (r.dt > 0.0, r.dx > 0.0) {
            (false, false) => "same point",
            (true, false) => "hoelder_t",
            (false, true) => "lipschitz_x",
            (true, true) => "joint",
        };
        report.record_le(i, what, r.diff, bound, r.tol);
    }

    let growth = if prob.g.ell.is_finite() {
        let c = points
            .iter()
            .step_by(2)
            .map(|(x, u, _)| u * u / (1.0 + x.iter().map(|v| v * v).sum::<f64>()))
            .fold(0.0, f64::max);
        for (i, (x, u, se)) in points.iter().enumerate() {
            let cap = (c * (1.0 + x.iter().map(|v| v * v).sum::<f64>())).sqrt();
            report.record_le(rows.len() + i, "growth", u.abs(), cap, SE_MULTIPLIER * se + BIAS_ALLOWANCE);
        }
        Some(c)
    } else {
        None
    };
    Ok(RegularityOutcome {
        report,
        hoelder,
        lipschitz,
        growth,
    })
}
