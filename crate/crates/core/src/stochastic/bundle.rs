use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;

use super::control::ControlSchedule;
use super::grid::TimeGrid;
use super::rng::{fill_standard_normal, path_rng};
use crate::error::{Error, Result};
use crate::sublinear::GeneratorSet;

/// Simulated Brownian increments and, once simulated, the forward states.
///
/// Layouts are path-major: `dw[(m * n_steps + k) * dim + j]` and
/// `x[(m * (n_steps + 1) + k) * dim + j]`. Increments are shared between
/// clones so that several controls can be simulated on common random
/// numbers.
#[derive(Debug, Clone)]
pub struct PathBundle {
    grid: TimeGrid,
    paths: usize,
    dim: usize,
    seed: u64,
    stream: u64,
    dw: Arc<Vec<f64>>,
    x: Option<Arc<Vec<f64>>>,
    choices: Option<Arc<Vec<u32>>>,
}

/// Draw `M` paths of `Normal(0, dt I)` increments keyed by `(seed, path)`.
pub fn make_bundle(grid: TimeGrid, paths: usize, dim: usize, seed: u64) -> Result<PathBundle> {
    make_bundle_stream(grid, paths, dim, seed, 0)
}

/// As [`make_bundle`] on an independent stream of the same seed.
pub fn make_bundle_stream(
    grid: TimeGrid,
    paths: usize,
    dim: usize,
    seed: u64,
    stream: u64,
) -> Result<PathBundle> {
    if paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("state dimension must be positive".into()));
    }
    let per_path = grid.n_steps() * dim;
    let scale = grid.dt().sqrt();
    let mut dw = vec![0.0; paths * per_path];
    dw.par_chunks_mut(per_path).enumerate().for_each(|(m, chunk)| {
        let mut rng = path_rng(seed, stream, m as u64);
        fill_standard_normal(&mut rng, chunk);
        chunk.iter_mut().for_each(|v| *v *= scale);
    });
    Ok(PathBundle {
        grid,
        paths,
        dim,
        seed,
        stream,
        dw: Arc::new(dw),
        x: None,
        choices: None,
    })
}

impl PathBundle {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    #[inline]
    pub fn dw(&self, m: usize, k: usize) -> &[f64] {
        let i = (m * self.grid.n_steps() + k) * self.dim;
        &self.dw[i..i + self.dim]
    }

    pub fn dw_raw(&self) -> &[f64] {
        &self.dw
    }

    pub fn has_states(&self) -> bool {
        self.x.is_some()
    }

    /// State of path `m` at grid index `k`. Panics if the bundle has not been
    /// simulated.
    #[inline]
    pub fn x(&self, m: usize, k: usize) -> &[f64] {
        let x = self.x.as_ref().expect("bundle has no simulated states");
        let i = (m * (self.grid.n_steps() + 1) + k) * self.dim;
        &x[i..i + self.dim]
    }

    pub fn x_raw(&self) -> Option<&[f64]> {
        self.x.as_ref().map(|v| v.as_slice())
    }

    /// Generator index used on `[t_k, t_{k+1})` by path `m`.
    pub fn choice(&self, m: usize, k: usize) -> Option<u32> {
        self.choices
            .as_ref()
            .map(|c| c[m * self.grid.n_steps() + k])
    }

    /// States of all paths at step `k`, packed `paths x dim`.
    pub fn states_at(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.paths * self.dim);
        for m in 0..self.paths {
            out.extend_from_slice(self.x(m, k));
        }
        out
    }

    /// Bundle with paths frozen after their stopping step: `X_k = X_tau` for
    /// `k >= tau`. Increments are kept.
    pub fn freeze_at(&self, tau: &[usize]) -> Result<PathBundle> {
        if tau.len() != self.paths {
            return Err(Error::DimensionMismatch {
                expected: self.paths,
                got: tau.len(),
            });
        }
        let x = self
            .x
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("bundle has no simulated states".into()))?;
        let n = self.grid.n_steps();
        let d = self.dim;
        let mut frozen = x.as_ref().clone();
        frozen
            .par_chunks_mut((n + 1) * d)
            .zip(tau.par_iter())
            .for_each(|(path, &t)| {
                let t = t.min(n);
                let (head, tail) = path.split_at_mut((t + 1) * d);
                let stop = &head[t * d..];
                for chunk in tail.chunks_mut(d) {
                    chunk.copy_from_slice(stop);
                }
            });
        Ok(PathBundle {
            x: Some(Arc::new(frozen)),
            ..self.clone()
        })
    }

    /// Mean over paths of `max_k |X_k|^2`.
    pub fn mean_sup_sq(&self) -> f64 {
        let n = self.grid.n_steps();
        let per_path: Vec<f64> = (0..self.paths)
            .into_par_iter()
            .map(|m| {
                (0..=n)
                    .map(|k| self.x(m, k).iter().map(|v| v * v).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .collect();
        per_path.iter().sum::<f64>() / self.paths as f64
    }
}

/// Euler-Maruyama under a control schedule:
/// `X_{k+1} = X_k + sigma_i(t_k, X_k) dW_k + b_i(t_k, X_k) dt` with
/// `i = ctrl.choose(m, k, X_k)`.
pub fn simulate_forward(
    set: &GeneratorSet,
    ctrl: &ControlSchedule,
    x0: &[f64],
    bundle: &PathBundle,
) -> Result<PathBundle> {
    if x0.len() != bundle.dim || set.dim() != bundle.dim {
        return Err(Error::DimensionMismatch {
            expected: bundle.dim,
            got: if x0.len() != bundle.dim { x0.len() } else { set.dim() },
        });
    }
    if ctrl.grid() != bundle.grid() {
        return Err(Error::InvalidArgument(
            "control schedule and path bundle use different time grids".into(),
        ));
    }
    let max = ctrl.max_index();
    if max >= set.len() {
        return Err(Error::GeneratorIndex {
            index: max,
            count: set.len(),
        });
    }
    let n = bundle.grid.n_steps();
    let d = bundle.dim;
    let dt = bundle.grid.dt();
    let gens = set.generators();
    let mut x = vec![0.0; bundle.paths * (n + 1) * d];
    let mut choices = vec![0u32; bundle.paths * n];
    x.par_chunks_mut((n + 1) * d)
        .zip(choices.par_chunks_mut(n))
        .enumerate()
        .for_each(|(m, (path, chosen))| {
            path[..d].copy_from_slice(x0);
            let mut drift = vec![0.0; d];
            for k in 0..n {
                let t = bundle.grid.time(k);
                let (head, tail) = path.split_at_mut((k + 1) * d);
                let xk = &head[k * d..];
                let next = &mut tail[..d];
                let i = ctrl.choose(m, k, xk);
                chosen[k] = i as u32;
                let g = &gens[i];
                g.drift.eval_into(t, xk, &mut drift);
                for j in 0..d {
                    next[j] = xk[j] + drift[j] * dt;
                }
                g.diffusion.sigma_mul_add(t, xk, bundle.dw(m, k), next);
            }
        });
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step: (pos / d) % (n + 1),
        });
    }
    Ok(PathBundle {
        x: Some(Arc::new(x)),
        choices: Some(Arc::new(choices)),
        ..bundle.clone()
    })
}

/// First grid index with `|X_k - center| >= radius`, or `n_steps` if the
/// path never leaves the ball.
pub fn exit_time(bundle: &PathBundle, center: &[f64], radius: f64) -> Result<Vec<usize>> {
    if center.len() != bundle.dim {
        return Err(Error::DimensionMismatch {
            expected: bundle.dim,
            got: center.len(),
        });
    }
    if !bundle.has_states() {
        return Err(Error::InvalidArgument("bundle has no simulated states".into()));
    }
    let n = bundle.grid.n_steps();
    Ok((0..bundle.paths)
        .into_par_iter()
        .map(|m| {
            (0..=n)
                .find(|&k| {
                    let r2: f64 = bundle
                        .x(m, k)
                        .iter()
                        .zip(center)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    r2.sqrt() >= radius
                })
                .unwrap_or(n)
        })
        .collect())
}

const DUMP_MAGIC: &[u8; 8] = b"NLFKPB01";

/// Debug dump: magic, then little-endian `seed, stream (u64), t0, T (f64),
/// n_steps, M, N (u64), has_states (u8)`, then `dW` and optionally `X` as
/// path-major little-endian `f64`.
pub fn write_dump<W: Write>(bundle: &PathBundle, mut w: W) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&bundle.seed.to_le_bytes())?;
    w.write_all(&bundle.stream.to_le_bytes())?;
    w.write_all(&bundle.grid.t0().to_le_bytes())?;
    w.write_all(&bundle.grid.t_end().to_le_bytes())?;
    w.write_all(&(bundle.grid.n_steps() as u64).to_le_bytes())?;
    w.write_all(&(bundle.paths as u64).to_le_bytes())?;
    w.write_all(&(bundle.dim as u64).to_le_bytes())?;
    w.write_all(&[bundle.x.is_some() as u8])?;
    for v in bundle.dw.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(x) = &bundle.x {
        for v in x.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> Result<PathBundle> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Io("not a path bundle dump".into()));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let seed = next_u64(&mut r)?;
    let stream = next_u64(&mut r)?;
    let t0 = f64::from_bits(next_u64(&mut r)?);
    let t_end = f64::from_bits(next_u64(&mut r)?);
    let n_steps = next_u64(&mut r)? as usize;
    let paths = next_u64(&mut r)? as usize;
    let dim = next_u64(&mut r)? as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let grid = TimeGrid::new(t0, t_end, n_steps)?;
    let read_vec = |r: &mut R, len: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; len * 8];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    };
    let dw = read_vec(&mut r, paths * n_steps * dim)?;
    let x = if flag[0] == 1 {
        Some(Arc::new(read_vec(&mut r, paths * (n_steps + 1) * dim)?))
    } else {
        None
    };
    Ok(PathBundle {
        grid,
        paths,
        dim,
        seed,
        stream,
        dw: Arc::new(dw),
        x,
        choices: None,
    })
}
