use std::io::Write;

use rayon::prelude::*;

use super::driver::{Driver, TerminalCondition};
use crate::error::{Error, Result};
use crate::regression::{fit, Basis};
use crate::stochastic::{PathBundle, TimeGrid};

/// Iteration cap of the implicit-in-`y` fixed point.
pub const MAX_FIXED_POINT_ITERATIONS: usize = 50;

/// Backward solution `(Y, Z)` along a path bundle.
///
/// `y[m * (n+1) + k]`, `z[(m * n + k) * dim + j]`.
#[derive(Debug, Clone)]
pub struct BsdeSolution {
    grid: TimeGrid,
    paths: usize,
    dim: usize,
    y: Vec<f64>,
    z: Vec<f64>,
    pathwise: Vec<f64>,
    basis: Basis,
    max_iterations: usize,
    stopped_terms: Option<usize>,
}

/// Where each path's driver applies. `Single` ignores recorded choices.
#[derive(Clone, Copy)]
enum Drivers<'a> {
    Single(&'a Driver),
    /// One driver per generator index, selected by the bundle's recorded
    /// control choices.
    PerGenerator(&'a [Driver]),
}

/// Solve `Y_k = E_k[Y_{k+1}] + dt f(t_k, X_k, Y_k, Z_k)`,
/// `Z_k = E_k[Y_{k+1} dW_k^T] / dt` backward from `Y_n = g(X_n)`.
pub fn solve_backward(
    bundle: &PathBundle,
    g: &TerminalCondition,
    f: &Driver,
    basis: Basis,
) -> Result<BsdeSolution> {
    solve(bundle, g, Drivers::Single(f), basis, None)
}

/// As [`solve_backward`] with the driver picked per path and step from the
/// generator the forward simulation used.
pub fn solve_backward_controlled(
    bundle: &PathBundle,
    g: &TerminalCondition,
    drivers: &[Driver],
    basis: Basis,
) -> Result<BsdeSolution> {
    solve(bundle, g, Drivers::PerGenerator(drivers), basis, None)
}

/// Stopped BSDE: the driver is switched off from step `tau[m]` on and the
/// conditional expectations are taken separately on running and stopped
/// paths (the stopped indicator is part of the Markov state).
pub fn solve_backward_stopped(
    bundle: &PathBundle,
    g: &TerminalCondition,
    f: &Driver,
    basis: Basis,
    tau: &[usize],
) -> Result<BsdeSolution> {
    if tau.len() != bundle.paths() {
        return Err(Error::DimensionMismatch {
            expected: bundle.paths(),
            got: tau.len(),
        });
    }
    solve(bundle, g, Drivers::Single(f), basis, Some(tau))
}

fn basis_terms(basis: Basis, dim: usize) -> usize {
    match basis {
        Basis::Polynomial { degree } => (degree + 1).pow(dim as u32),
        Basis::Bins { per_dim } => per_dim.pow(dim as u32),
    }
}

/// Coarsen the basis for small groups so the design stays identifiable.
fn basis_for_group(basis: Basis, dim: usize, rows: usize) -> Basis {
    match basis {
        Basis::Polynomial { degree } => {
            let mut d = degree;
            while d > 0 && rows <= 2 * (d + 1).pow(dim as u32) {
                d -= 1;
            }
            Basis::Polynomial { degree: d }
        }
        Basis::Bins { per_dim } => {
            let mut b = per_dim;
            while b > 1 && rows < 2 * b.pow(dim as u32) {
                b -= 1;
            }
            Basis::Bins { per_dim: b }
        }
    }
}

fn solve(
    bundle: &PathBundle,
    g: &TerminalCondition,
    drivers: Drivers<'_>,
    basis: Basis,
    tau: Option<&[usize]>,
) -> Result<BsdeSolution> {
    if !bundle.has_states() {
        return Err(Error::InvalidArgument("bundle has no simulated states".into()));
    }
    let grid = *bundle.grid();
    let n = grid.n_steps();
    let dim = bundle.dim();
    let paths = bundle.paths();
    let dt = grid.dt();
    if let Drivers::PerGenerator(list) = drivers {
        if bundle.choice(0, 0).is_none() {
            return Err(Error::InvalidArgument(
                "bundle carries no control choices for per-generator drivers".into(),
            ));
        }
        let max = (0..paths)
            .flat_map(|m| (0..n).map(move |k| (m, k)))
            .map(|(m, k)| bundle.choice(m, k).unwrap_or(0) as usize)
            .max()
            .unwrap_or(0);
        if max >= list.len() {
            return Err(Error::GeneratorIndex {
                index: max,
                count: list.len(),
            });
        }
    }
    let driver_at = |m: usize, k: usize| -> &Driver {
        match drivers {
            Drivers::Single(f) => f,
            Drivers::PerGenerator(list) => {
                &list[bundle.choice(m, k).expect("checked above") as usize]
            }
        }
    };
    let stopped = |m: usize, k: usize| tau.is_some_and(|t| k >= t[m]);

    let mut y = vec![0.0; paths * (n + 1)];
    let mut z = vec![0.0; paths * n * dim];
    let mut drift_sum = vec![0.0; paths];
    for m in 0..paths {
        y[m * (n + 1) + n] = g.eval(bundle.x(m, n));
    }
    if y.iter().skip(n).step_by(n + 1).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: n });
    }

    let mut max_iterations = 0;
    for k in (0..n).rev() {
        let t = grid.time(k);
        let groups: Vec<Vec<usize>> = match tau {
            None => vec![(0..paths).collect()],
            Some(_) => {
                let (s, r): (Vec<usize>, Vec<usize>) = (0..paths).partition(|&m| stopped(m, k));
                vec![r, s]
            }
        };
        // (E[Y_{k+1}], Z_k) per path
        let mut cond = vec![0.0; paths * (1 + dim)];
        for (gi, rows) in groups.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let group_basis = if gi == 0 {
                basis
            } else {
                basis_for_group(basis, dim, rows.len())
            };
            let mut xs = Vec::with_capacity(rows.len() * dim);
            for &m in rows {
                xs.extend_from_slice(bundle.x(m, k));
            }
            let mut targets = vec![Vec::with_capacity(rows.len()); 1 + dim];
            for &m in rows {
                let next = y[m * (n + 1) + k + 1];
                targets[0].push(next);
                let dw = bundle.dw(m, k);
                for j in 0..dim {
                    targets[1 + j].push(next * dw[j] / dt);
                }
            }
            let model = fit(group_basis, &xs, dim, &targets, k)?;
            let preds: Vec<(usize, Vec<f64>)> = rows
                .par_iter()
                .map(|&m| (m, model.predict(bundle.x(m, k))))
                .collect();
            for (m, p) in preds {
                cond[m * (1 + dim)..(m + 1) * (1 + dim)].copy_from_slice(&p);
            }
        }

        let results: Vec<Result<(f64, usize, f64)>> = (0..paths)
            .into_par_iter()
            .map(|m| {
                let c = &cond[m * (1 + dim)..(m + 1) * (1 + dim)];
                let expected = c[0];
                let zk = &c[1..];
                if stopped(m, k) {
                    return Ok((expected, 0, 0.0));
                }
                let x = bundle.x(m, k);
                let f = driver_at(m, k);
                let mut yk = expected;
                for it in 1..=MAX_FIXED_POINT_ITERATIONS {
                    let next = expected + dt * f.eval(t, x, yk, zk);
                    if !next.is_finite() {
                        return Err(Error::NonFinite { step: k });
                    }
                    let done = (next - yk).abs() <= 1e-13 * (1.0 + next.abs());
                    yk = next;
                    if done {
                        let fk = f.eval(t, x, yk, zk);
                        return Ok((yk, it, dt * fk));
                    }
                }
                Err(Error::FixedPointDiverged {
                    step: k,
                    path: m,
                    iterations: MAX_FIXED_POINT_ITERATIONS,
                })
            })
            .collect();
        for (m, r) in results.into_iter().enumerate() {
            let (yk, it, incr) = r?;
            max_iterations = max_iterations.max(it);
            y[m * (n + 1) + k] = yk;
            drift_sum[m] += incr;
            z[(m * n + k) * dim..(m * n + k + 1) * dim]
                .copy_from_slice(&cond[m * (1 + dim) + 1..(m + 1) * (1 + dim)]);
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
    }

    let pathwise = (0..paths)
        .map(|m| y[m * (n + 1) + n] + drift_sum[m])
        .collect();
    Ok(BsdeSolution {
        grid,
        paths,
        dim,
        y,
        z,
        pathwise,
        basis,
        max_iterations,
        stopped_terms: tau.map(|_| basis_terms(basis, dim)),
    })
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt(), n)
}

impl BsdeSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Largest number of fixed-point iterations used by any `(path, step)`.
    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }

    #[inline]
    pub fn y(&self, m: usize, k: usize) -> f64 {
        self.y[m * (self.grid.n_steps() + 1) + k]
    }

    #[inline]
    pub fn z(&self, m: usize, k: usize) -> &[f64] {
        let i = (m * self.grid.n_steps() + k) * self.dim;
        &self.z[i..i + self.dim]
    }

    pub fn mean_y(&self, k: usize) -> f64 {
        mean_std((0..self.paths).map(|m| self.y(m, k))).0
    }

    pub fn std_y(&self, k: usize) -> f64 {
        mean_std((0..self.paths).map(|m| self.y(m, k))).1
    }

    pub fn mean_abs_z(&self, k: usize) -> f64 {
        (0..self.paths)
            .map(|m| self.z(m, k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            / self.paths as f64
    }

    /// `mean Y_0`.
    pub fn value(&self) -> f64 {
        self.mean_y(0)
    }

    /// Standard error of `mean Y_0`, estimated from the pathwise
    /// representation `g(X_T) + sum_k dt f(t_k, X_k, Y_k, Z_k)` (whose mean is
    /// `Y_0`; `Y_0` itself is constant across paths started at one point).
    pub fn std_error(&self) -> f64 {
        let (_, sd, n) = mean_std(self.pathwise.iter().copied());
        sd / (n as f64).sqrt()
    }

    pub fn pathwise(&self) -> &[f64] {
        &self.pathwise
    }

    pub(crate) fn stopped_terms(&self) -> Option<usize> {
        self.stopped_terms
    }

    /// CSV with columns `k,t_k,mean_Y,std_Y,mean_abs_Z`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "t_k", "mean_Y", "std_Y", "mean_abs_Z"])?;
        let n = self.grid.n_steps();
        for k in 0..=n {
            let z = if k < n {
                format!("{:.12e}", self.mean_abs_z(k))
            } else {
                String::new()
            };
            out.write_record([
                k.to_string(),
                format!("{:.12e}", self.grid.time(k)),
                format!("{:.12e}", self.mean_y(k)),
                format!("{:.12e}", self.std_y(k)),
                z,
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
