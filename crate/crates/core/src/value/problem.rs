use std::io::Write;

use serde_json::json;

use crate::bsde::{transform_driver, Driver, TerminalCondition};
use crate::error::{Error, Result};
use crate::regression::Basis;
use crate::stochastic::{ControlSchedule, TimeGrid};
use crate::sublinear::GeneratorSet;

/// `d_t u + F(t,x,Du,D^2u) + f(t,x,u,Du) = 0`, `u(T,.) = g`, together with the
/// discretization used to evaluate it.
#[derive(Debug, Clone)]
pub struct ParabolicProblem {
    pub set: GeneratorSet,
    pub f: Driver,
    pub g: TerminalCondition,
    horizon: f64,
    /// Fine steps over `[0, T]`; shorter horizons keep the same `dt`.
    pub n_steps: usize,
    pub basis: Basis,
}

impl ParabolicProblem {
    pub fn new(set: GeneratorSet, f: Driver, g: TerminalCondition, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "terminal time must be positive and finite, got {horizon}"
            )));
        }
        for (what, v) in [("f.ell", f.ell), ("f.mu", f.mu), ("f.lip_y", f.lip_y), ("f.lip_z", f.lip_z)] {
            if !v.is_finite() || (what != "f.mu" && v < 0.0) {
                return Err(Error::InvalidArgument(format!("driver constant {what} = {v} is invalid")));
            }
        }
        if !(g.ell >= 0.0) {
            return Err(Error::InvalidArgument(format!("terminal constant ell = {} is invalid", g.ell)));
        }
        Ok(ParabolicProblem {
            set,
            f,
            g,
            horizon,
            n_steps: 50,
            basis: Basis::default(),
        })
    }

    pub fn with_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self
    }

    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = basis;
        self
    }

    pub fn with_terminal(&self, g: TerminalCondition) -> Self {
        ParabolicProblem { g, ..self.clone() }
    }

    /// Same problem on `[0, horizon]` with the step size kept.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let n = ((self.n_steps as f64) * horizon / self.horizon).round().max(1.0) as usize;
        Ok(Self::new(self.set.clone(), self.f.clone(), self.g.clone(), horizon)?
            .with_steps(n)
            .with_basis(self.basis))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn lambda(&self) -> f64 {
        self.set.lambda()
    }

    /// Largest of the declared Lipschitz constants of `F`, `f` and `g`.
    pub fn ell(&self) -> f64 {
        self.set.ell().max(self.f.ell).max(self.g.ell)
    }

    pub fn mu(&self) -> f64 {
        self.f.mu
    }

    /// Grid on `[t, T]` with step close to `T / n_steps`.
    pub fn grid_from(&self, t: f64) -> Result<TimeGrid> {
        if !(t >= 0.0 && t < self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "evaluation time {t} must lie in [0, {})",
                self.horizon
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        let n = ((self.n_steps as f64) * (self.horizon - t) / self.horizon).round().max(1.0) as usize;
        TimeGrid::new(t, self.horizon, n)
    }

    /// `f_sigma_i` for every generator. A driver that ignores `z` is used
    /// as is, so degenerate diffusions are allowed then.
    pub fn transformed_drivers(&self) -> Result<Vec<Driver>> {
        self.set
            .generators()
            .iter()
            .map(|gen| {
                if self.f.lip_z == 0.0 {
                    Ok(self.f.clone())
                } else {
                    transform_driver(&self.f, &gen.diffusion, self.set.lambda())
                }
            })
            .collect()
    }
}

/// One evaluated candidate of a control search.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateValue {
    pub encoding: String,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fixed,
    BruteForce { blocks: usize },
    Markovian { state_bins: usize },
}

impl Method {
    fn describe(&self) -> String {
        match self {
            Method::Fixed => "fixed".into(),
            Method::BruteForce { blocks } => format!("bruteforce(K={blocks})"),
            Method::Markovian { state_bins } => format!("markovian(bins={state_bins})"),
        }
    }
}

/// Monte Carlo estimate of `u(t, x)` with everything needed to rerun it.
#[derive(Debug, Clone)]
pub struct ValueEstimate {
    pub value: f64,
    pub std_error: f64,
    pub best_control: ControlSchedule,
    pub t: f64,
    pub x: Vec<f64>,
    pub paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub method: Method,
    pub basis: Basis,
    /// Every candidate, in enumeration order (brute force only).
    pub candidates: Vec<CandidateValue>,
    /// State bins that were empty in the selection sample and took a
    /// neighbour's choice (Markovian only).
    pub filled_bins: usize,
}

impl ValueEstimate {
    /// CSV `schedule,value,se`, one row per candidate (or the best control
    /// alone when nothing was enumerated).
    pub fn write_candidates_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["schedule", "value", "se"])?;
        if self.candidates.is_empty() {
            out.write_record([
                self.best_control.encode(),
                format!("{:.12e}", self.value),
                format!("{:.12e}", self.std_error),
            ])?;
        }
        for c in &self.candidates {
            out.write_record([
                c.encoding.clone(),
                format!("{:.12e}", c.value),
                format!("{:.12e}", c.std_error),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        json!({
            "value": self.value,
            "std_error": self.std_error,
            "best_control": self.best_control.encode(),
            "t": self.t,
            "x": self.x,
            "paths": self.paths,
            "n_steps": self.n_steps,
            "seed": self.seed,
            "method": self.method.describe(),
            "basis": self.basis.to_string(),
            "candidates": self.candidates.len(),
            "filled_bins": self.filled_bins,
        })
    }
}
