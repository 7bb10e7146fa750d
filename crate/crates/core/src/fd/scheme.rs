use std::io::Write;

use rayon::prelude::*;

use super::grid::SpatialGrid;
use crate::error::{Error, Result};
use crate::report::CheckReport;
use crate::stochastic::TimeGrid;
use crate::sublinear::{max_eigenvalue, LinearGenerator};
use crate::value::ParabolicProblem;

/// Largest admissible CFL ratio.
pub const CFL_LIMIT: f64 = 0.9;

/// Time slices kept in a [`ValueField`] (plus the terminal one).
const STORED_SLICES: usize = 100;

/// Coefficients of one generator at one node: `a` row-major, `b`.
#[derive(Debug, Clone)]
struct Coeffs {
    a: Vec<f64>,
    b: Vec<f64>,
}

fn coeffs_of(gen: &LinearGenerator, t: f64, x: &[f64]) -> Coeffs {
    let a = gen.diffusion.a(t, x);
    Coeffs {
        a: a.transpose().as_slice().to_vec(),
        b: gen.drift.eval(t, x).as_slice().to_vec(),
    }
}

/// Explicit monotone scheme
/// `u_k = u_{k+1} + dt (max_i L_i u_{k+1} + f(t_{k+1}, x, u_{k+1}, D_h u_{k+1}))`
/// with central second differences, the seven-point cross stencil in 2D,
/// upwind drift differences, central gradients inside `f`, and `u = g` on
/// the boundary.
#[derive(Debug, Clone)]
pub struct FdScheme {
    prob: ParabolicProblem,
    grid: SpatialGrid,
    time: TimeGrid,
    /// Per generator: coefficients shared by all nodes when constant.
    constant: Vec<Option<Coeffs>>,
    boundary: Vec<bool>,
    cfl_ratio: f64,
}

impl FdScheme {
    pub fn new(prob: &ParabolicProblem, grid: SpatialGrid, n_steps: usize) -> Result<Self> {
        let dim = prob.dim();
        if grid.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: grid.dim(),
            });
        }
        if dim > 2 {
            return Err(Error::InvalidArgument(format!(
                "finite differences support 1 or 2 dimensions, got {dim}"
            )));
        }
        let time = TimeGrid::new(0.0, prob.horizon(), n_steps.max(1))?;
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        let constant = prob
            .set
            .generators()
            .iter()
            .map(|g| g.is_constant().then(|| coeffs_of(g, 0.0, &vec![0.0; dim])))
            .collect();
        let boundary = (0..grid.len()).map(|i| grid.is_boundary(i)).collect();
        let mut scheme = FdScheme {
            prob: prob.clone(),
            grid,
            time,
            constant,
            boundary,
            cfl_ratio: 0.0,
        };
        let rate = scheme.stability_rate()?;
        let ratio = time.dt() * rate;
        if ratio > CFL_LIMIT {
            let min_steps = (prob.horizon() * rate / CFL_LIMIT).ceil() as usize;
            return Err(Error::Cfl { ratio, min_steps });
        }
        scheme.cfl_ratio = ratio;
        Ok(scheme)
    }

    /// Interior nodes and sample times at which coefficient bounds are taken.
    fn sampled_coeffs(&self) -> Vec<Coeffs> {
        let mut out = Vec::new();
        for (i, gen) in self.prob.set.generators().iter().enumerate() {
            if let Some(c) = &self.constant[i] {
                out.push(c.clone());
                continue;
            }
            for t in [0.0, 0.5 * self.time.t_end(), self.time.t_end()] {
                for node in 0..self.grid.len() {
                    out.push(coeffs_of(gen, t, &self.grid.point(node)));
                }
            }
        }
        out
    }

    /// `dt`-free rate of the CFL condition:
    /// `2 max eig(a) / dx_min^2 + |b|_1 / dx_min + lip_y(f)`. Also refuses
    /// stencils that are not monotone.
    fn stability_rate(&self) -> Result<f64> {
        let dim = self.grid.dim();
        let dx_min = (0..dim).map(|j| self.grid.dx(j)).fold(f64::INFINITY, f64::min);
        let lip_z = self.prob.f.lip_z;
        let mut rate: f64 = 0.0;
        for c in self.sampled_coeffs() {
            let a = nalgebra::DMatrix::from_row_slice(dim, dim, &c.a);
            let eig = max_eigenvalue(&a);
            let b1: f64 = c.b.iter().map(|v| v.abs()).sum();
            rate = rate.max(2.0 * eig / (dx_min * dx_min) + b1 / dx_min);
            for j in 0..dim {
                let dxj = self.grid.dx(j);
                let mut weight = 0.5 * c.a[j * dim + j] / (dxj * dxj);
                if dim == 2 {
                    let other = self.grid.dx(1 - j);
                    weight -= 0.5 * c.a[1].abs() / (dxj * other);
                }
                if weight < 0.5 * lip_z / dxj - 1e-12 {
                    return Err(Error::NonMonotone(format!(
                        "stencil weight {weight:.4e} in dimension {j} is below the gradient \
                         coupling {:.4e}; refine the grid or reduce the cross diffusion",
                        0.5 * lip_z / dxj
                    )));
                }
            }
        }
        Ok(rate + self.prob.f.lip_y)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn cfl_ratio(&self) -> f64 {
        self.cfl_ratio
    }

    /// `g` on the nodes.
    pub fn terminal(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|i| self.prob.g.eval(&self.grid.point(i))).collect()
    }

    /// Linear operator of one generator at interior node `node`.
    fn linear(&self, c: &Coeffs, next: &[f64], node: usize) -> f64 {
        let dim = self.grid.dim();
        let u = next[node];
        if dim == 1 {
            let dx = self.grid.dx(0);
            let (dn, up) = (next[node - 1], next[node + 1]);
            let diffusion = 0.5 * c.a[0] * (up - 2.0 * u + dn) / (dx * dx);
            let b = c.b[0];
            let drift = if b >= 0.0 { b * (up - u) / dx } else { b * (u - dn) / dx };
            return diffusion + drift;
        }
        let (hx, hy) = (self.grid.dx(0), self.grid.dx(1));
        let sx = self.grid.stride(0);
        let at = |di: isize, dj: isize| next[(node as isize + di * sx as isize + dj) as usize];
        let (a11, a12, a22) = (c.a[0], c.a[1], c.a[3]);
        let d11 = (at(1, 0) - 2.0 * u + at(-1, 0)) / (hx * hx);
        let d22 = (at(0, 1) - 2.0 * u + at(0, -1)) / (hy * hy);
        let d12 = if a12 >= 0.0 {
            (at(1, 1) - at(1, 0) - at(0, 1) + 2.0 * u - at(-1, 0) - at(0, -1) + at(-1, -1)) / (2.0 * hx * hy)
        } else {
            -(at(1, -1) - at(1, 0) - at(0, -1) + 2.0 * u - at(-1, 0) - at(0, 1) + at(-1, 1)) / (2.0 * hx * hy)
        };
        let diffusion = 0.5 * (a11 * d11 + 2.0 * a12 * d12 + a22 * d22);
        let mut drift = 0.0;
        for (j, h, s) in [(0usize, hx, (1isize, 0isize)), (1, hy, (0, 1))] {
            let b = c.b[j];
            drift += if b >= 0.0 {
                b * (at(s.0, s.1) - u) / h
            } else {
                b * (u - at(-s.0, -s.1)) / h
            };
        }
        diffusion + drift
    }

    fn central_gradient(&self, next: &[f64], node: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let s = self.grid.stride(j);
            *o = (next[node + s] - next[node - s]) / (2.0 * self.grid.dx(j));
        }
    }

    /// One backward step from slice `k + 1` (`next`) to slice `k` (`out`).
    pub fn step(&self, k: usize, next: &[f64], out: &mut [f64]) {
        let t_next = self.time.time(k + 1);
        let dt = self.time.dt();
        let dim = self.grid.dim();
        let gens = self.prob.set.generators();
        out.par_iter_mut().enumerate().for_each(|(node, o)| {
            let x = self.grid.point(node);
            if self.boundary[node] {
                *o = self.prob.g.eval(&x);
                return;
            }
            let mut best = f64::NEG_INFINITY;
            for (i, gen) in gens.iter().enumerate() {
                let v = match &self.constant[i] {
                    Some(c) => self.linear(c, next, node),
                    None => self.linear(&coeffs_of(gen, t_next, &x), next, node),
                };
                if v > best {
                    best = v;
                }
            }
            let mut grad = [0.0; 2];
            self.central_gradient(next, node, &mut grad[..dim]);
            let f = self.prob.f.eval(t_next, &x, next[node], &grad[..dim]);
            *o = next[node] + dt * (best + f);
        });
    }

    /// Run the scheme from `terminal` to `t = 0`, calling `visit(k, slice)`
    /// on every slice from `n` down to `0`.
    pub fn run(&self, terminal: Vec<f64>, mut visit: impl FnMut(usize, &[f64]) -> Result<()>) -> Result<Vec<f64>> {
        let n = self.time.n_steps();
        let mut next = terminal;
        visit(n, &next)?;
        let mut out = vec![0.0; next.len()];
        for k in (0..n).rev() {
            self.step(k, &next, &mut out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: k });
            }
            std::mem::swap(&mut next, &mut out);
            visit(k, &next)?;
        }
        Ok(next)
    }
}

/// Stored time slices of a finite-difference solution.
#[derive(Debug, Clone)]
pub struct ValueField {
    grid: SpatialGrid,
    /// `(time index, t_k, nodal values)`, increasing in time.
    slices: Vec<(usize, f64, Vec<f64>)>,
    n_steps: usize,
    cfl_ratio: f64,
}

/// Solve on `grid` with `n_steps` explicit steps over `[0, T]`.
pub fn solve_fd(prob: &ParabolicProblem, grid: &SpatialGrid, n_steps: usize) -> Result<ValueField> {
    let scheme = FdScheme::new(prob, grid.clone(), n_steps)?;
    let stride = (n_steps / STORED_SLICES).max(1);
    let mut slices = Vec::new();
    scheme.run(scheme.terminal(), |k, u| {
        if k % stride == 0 || k == n_steps {
            slices.push((k, scheme.time().time(k), u.to_vec()));
        }
        Ok(())
    })?;
    slices.reverse();
    Ok(ValueField {
        grid: grid.clone(),
        slices,
        n_steps,
        cfl_ratio: scheme.cfl_ratio(),
    })
}

impl ValueField {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn cfl_ratio(&self) -> f64 {
        self.cfl_ratio
    }

    /// Stored `(time index, t)` pairs.
    pub fn times(&self) -> Vec<(usize, f64)> {
        self.slices.iter().map(|s| (s.0, s.1)).collect()
    }

    /// Slice at a stored time index.
    pub fn slice(&self, k: usize) -> Option<&[f64]> {
        self.slices.iter().find(|s| s.0 == k).map(|s| s.2.as_slice())
    }

    pub fn initial(&self) -> &[f64] {
        &self.slices[0].2
    }

    /// `u(t, x)`: multilinear in space, linear in time between stored slices.
    pub fn probe(&self, t: f64, x: &[f64]) -> f64 {
        let pos = self.slices.partition_point(|s| s.1 <= t);
        if pos == 0 {
            return self.grid.interpolate(&self.slices[0].2, x);
        }
        if pos == self.slices.len() {
            return self.grid.interpolate(&self.slices[pos - 1].2, x);
        }
        let (lo, hi) = (&self.slices[pos - 1], &self.slices[pos]);
        let w = (t - lo.1) / (hi.1 - lo.1);
        (1.0 - w) * self.grid.interpolate(&lo.2, x) + w * self.grid.interpolate(&hi.2, x)
    }

    /// CSV `x0[,x1],u` of a stored slice.
    pub fn write_slice_csv<W: Write>(&self, k: usize, w: W) -> Result<()> {
        let values = self
            .slice(k)
            .ok_or_else(|| Error::InvalidArgument(format!("time index {k} is not stored")))?;
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.grid.dim()).map(|j| format!("x{j}")).collect();
        header.push("u".into());
        out.write_record(&header)?;
        for (i, v) in values.iter().enumerate() {
            let mut row: Vec<String> = self.grid.point(i).iter().map(|c| format!("{c:.12e}")).collect();
            row.push(format!("{v:.12e}"));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Numerical comparison principle: with `g1 <= g2` on the nodes, the
/// solutions stay ordered on every time slice (up to `1e-12`).
pub fn check_fd_comparison(
    prob: &ParabolicProblem,
    g1: &crate::bsde::TerminalCondition,
    g2: &crate::bsde::TerminalCondition,
    grid: &SpatialGrid,
    n_steps: usize,
) -> Result<CheckReport> {
    let s1 = FdScheme::new(&prob.with_terminal(g1.clone()), grid.clone(), n_steps)?;
    let s2 = FdScheme::new(&prob.with_terminal(g2.clone()), grid.clone(), n_steps)?;
    let mut report = CheckReport::new();
    let (mut u1, mut u2) = (s1.terminal(), s2.terminal());
    let n = s1.time().n_steps();
    let worst = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);
    report.record_le(n, "g1<=g2", worst(&u1, &u2), 0.0, 0.0);
    if !report.passed() {
        return Ok(report);
    }
    let mut o1 = vec![0.0; u1.len()];
    let mut o2 = vec![0.0; u2.len()];
    for k in (0..n).rev() {
        s1.step(k, &u1, &mut o1);
        s2.step(k, &u2, &mut o2);
        std::mem::swap(&mut u1, &mut o1);
        std::mem::swap(&mut u2, &mut o2);
        report.record_le(k, "u1<=u2", worst(&u1, &u2), 0.0, 1e-12);
    }
    Ok(report)
}
