use super::driver::{Driver, TerminalCondition};
use super::solver::BsdeSolution;
use crate::error::{Error, Result};
use crate::report::CheckReport;
use crate::stochastic::PathBundle;

/// Fixed regression-bias allowance added to statistical tolerances.
pub const BIAS_ALLOWANCE: f64 = 1e-2;

/// Number of standard errors in statistical tolerances.
pub const SE_MULTIPLIER: f64 = 3.0;

/// Sampled evidence that instance 1 is dominated by instance 2:
/// `g1 <= g2` at the terminal states and `f1 <= f2` along `(Y^2, Z^2)`.
#[derive(Debug, Clone)]
pub struct DominationEvidence {
    pub terminal: CheckReport,
    pub driver: CheckReport,
}

impl DominationEvidence {
    pub fn holds(&self) -> bool {
        self.terminal.passed() && self.driver.passed()
    }
}

pub fn domination_evidence(
    bundle: &PathBundle,
    g1: &TerminalCondition,
    g2: &TerminalCondition,
    f1: &Driver,
    f2: &Driver,
    sol2: &BsdeSolution,
) -> DominationEvidence {
    let n = bundle.n_steps();
    let mut terminal = CheckReport::new();
    let mut driver = CheckReport::new();
    for m in 0..bundle.paths() {
        let x = bundle.x(m, n);
        terminal.record_le(m, "g1<=g2", g1.eval(x), g2.eval(x), 0.0);
        for k in 0..n {
            let t = bundle.grid().time(k);
            let x = bundle.x(m, k);
            let (y, z) = (sol2.y(m, k), sol2.z(m, k));
            driver.record_le(m, "f1<=f2", f1.eval(t, x, y, z), f2.eval(t, x, y, z), 0.0);
        }
    }
    DominationEvidence { terminal, driver }
}

/// Ordering `Y^1_k <= Y^2_k` in the mean at every step, up to three standard
/// errors of the pathwise difference plus the bias allowance. Both solutions
/// must live on the same bundle.
pub fn check_comparison(
    sol1: &BsdeSolution,
    sol2: &BsdeSolution,
    evidence: &DominationEvidence,
) -> Result<CheckReport> {
    if sol1.paths() != sol2.paths() || sol1.grid() != sol2.grid() {
        return Err(Error::InvalidArgument(
            "comparison needs both solutions on the same path bundle".into(),
        ));
    }
    let mut report = CheckReport::new();
    if !evidence.holds() {
        report.fail(0, "domination evidence does not hold");
        return Ok(report);
    }
    let m_count = sol1.paths();
    for k in 0..=sol1.grid().n_steps() {
        let diffs: Vec<f64> = (0..m_count).map(|m| sol1.y(m, k) - sol2.y(m, k)).collect();
        let mean = diffs.iter().sum::<f64>() / m_count as f64;
        let var = if m_count > 1 {
            diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (m_count - 1) as f64
        } else {
            0.0
        };
        let eps = SE_MULTIPLIER * (var / m_count as f64).sqrt() + BIAS_ALLOWANCE;
        report.record_le(k, "mean(Y1-Y2)<=0", mean, 0.0, eps);
    }
    Ok(report)
}

/// After the stopping step, `Y` must stay at `Y_tau` and `Z` must vanish up
/// to regression noise. Checked on the mean over stopped paths against
/// `3 * sd * sqrt(P / |S|)` (the standard error of a least-squares fitted
/// value with `P` basis functions on `|S|` samples) plus the bias allowance.
pub fn check_stopped(sol: &BsdeSolution, tau: &[usize]) -> Result<CheckReport> {
    if tau.len() != sol.paths() {
        return Err(Error::DimensionMismatch {
            expected: sol.paths(),
            got: tau.len(),
        });
    }
    let n = sol.grid().n_steps();
    let dt = sol.grid().dt();
    let stopped: Vec<usize> = (0..sol.paths()).filter(|&m| tau[m] < n).collect();
    let mut report = CheckReport::new();
    if stopped.is_empty() {
        return Ok(report);
    }
    let s = stopped.len() as f64;
    let terms = sol.stopped_terms().unwrap_or(1) as f64;
    let terminal: Vec<f64> = stopped.iter().map(|&m| sol.y(m, n)).collect();
    let mean_t = terminal.iter().sum::<f64>() / s;
    let sd = (terminal.iter().map(|v| (v - mean_t).powi(2)).sum::<f64>() / s).sqrt();
    let rms = (terminal.iter().map(|v| v * v).sum::<f64>() / s).sqrt();

    let mut flat = 0.0;
    let mut zdev = 0.0;
    let mut zcount = 0usize;
    for &m in &stopped {
        let anchor = sol.y(m, tau[m]);
        flat += (tau[m]..=n)
            .map(|k| (sol.y(m, k) - anchor).abs())
            .fold(0.0, f64::max);
        for k in tau[m]..n {
            zdev += sol.z(m, k).iter().map(|v| v * v).sum::<f64>().sqrt();
            zcount += 1;
        }
    }
    flat /= s;
    let leverage = (terms / s).sqrt();
    let tol_y = SE_MULTIPLIER * sd * leverage + BIAS_ALLOWANCE;
    report.record_le(0, "flat_Y_after_tau", flat, 0.0, tol_y);
    if zcount > 0 {
        let tol_z = SE_MULTIPLIER * rms / dt.sqrt() * leverage + BIAS_ALLOWANCE;
        report.record_le(1, "Z_after_tau", zdev / zcount as f64, 0.0, tol_z);
    }
    Ok(report)
}
