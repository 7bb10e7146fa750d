use rayon::prelude::*;

use super::problem::{CandidateValue, Method, ParabolicProblem, ValueEstimate};
use crate::bsde::{solve_backward_controlled, Driver};
use crate::error::{Error, Result};
use crate::regression::{fill_empty_cells, fit, Fit};
use crate::stochastic::rng::mix64;
use crate::stochastic::{
    make_bundle, make_bundle_stream, simulate_forward, ControlSchedule, FeedbackRule, PathBundle,
    StatePartition,
};
use crate::sublinear::argmax;

/// Largest number of block sequences [`value_bruteforce`] will enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000;

/// Noise stream of the Markovian selection sample; evaluation uses stream 0.
const SELECTION_STREAM: u64 = 1;

fn check_point(prob: &ParabolicProblem, x: &[f64], paths: usize) -> Result<()> {
    if x.len() != prob.dim() {
        return Err(Error::DimensionMismatch {
            expected: prob.dim(),
            got: x.len(),
        });
    }
    if paths < 2 {
        return Err(Error::InvalidArgument("at least 2 paths are needed".into()));
    }
    Ok(())
}

fn evaluate(
    prob: &ParabolicProblem,
    ctrl: &ControlSchedule,
    x: &[f64],
    noise: &PathBundle,
    drivers: &[Driver],
) -> Result<(f64, f64)> {
    let sim = simulate_forward(&prob.set, ctrl, x, noise)?;
    let sol = solve_backward_controlled(&sim, &prob.g, drivers, prob.basis)?;
    Ok((sol.value(), sol.std_error()))
}

/// Value of one control: `mean Y_0` of the BSDE with driver `f_sigma` along
/// the forward paths steered by `ctrl`.
pub fn value_fixed_control(
    prob: &ParabolicProblem,
    ctrl: &ControlSchedule,
    t: f64,
    x: &[f64],
    paths: usize,
    seed: u64,
) -> Result<ValueEstimate> {
    check_point(prob, x, paths)?;
    let grid = *ctrl.grid();
    if grid.t0() != t || grid.t_end() != prob.horizon() {
        return Err(Error::InvalidArgument(format!(
            "control grid [{}, {}] does not span [{t}, {}]",
            grid.t0(),
            grid.t_end(),
            prob.horizon()
        )));
    }
    let noise = make_bundle(grid, paths, prob.dim(), seed)?;
    let drivers = prob.transformed_drivers()?;
    let (value, std_error) = evaluate(prob, ctrl, x, &noise, &drivers)?;
    Ok(ValueEstimate {
        value,
        std_error,
        best_control: ctrl.clone(),
        t,
        x: x.to_vec(),
        paths,
        n_steps: grid.n_steps(),
        seed,
        method: Method::Fixed,
        basis: prob.basis,
        candidates: Vec::new(),
        filled_bins: 0,
    })
}

fn block_digits(mut c: u128, base: u128, blocks: usize) -> Vec<u32> {
    let mut digits = vec![0u32; blocks];
    for d in digits.iter_mut().rev() {
        *d = (c % base) as u32;
        c /= base;
    }
    digits
}

/// Exhaustive search over path-independent schedules that are constant on
/// each of `blocks` equal blocks of the fine grid. Every candidate runs on
/// the same Brownian increments; the best one is picked by the generator
/// set's tie-break.
pub fn value_bruteforce(
    prob: &ParabolicProblem,
    t: f64,
    x: &[f64],
    blocks: usize,
    paths: usize,
    seed: u64,
) -> Result<ValueEstimate> {
    check_point(prob, x, paths)?;
    let base = prob.set.len() as u128;
    let count = u32::try_from(blocks)
        .ok()
        .and_then(|k| base.checked_pow(k))
        .unwrap_or(u128::MAX);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            candidates: count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let grid = prob.grid_from(t)?;
    let noise = make_bundle(grid, paths, prob.dim(), seed)?;
    let drivers = prob.transformed_drivers()?;
    let results: Vec<Result<(ControlSchedule, f64, f64)>> = (0..count)
        .into_par_iter()
        .map(|c| {
            let ctrl = ControlSchedule::from_blocks(grid, &block_digits(c, base, blocks))?;
            let (v, se) = evaluate(prob, &ctrl, x, &noise, &drivers)?;
            Ok((ctrl, v, se))
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.1).collect();
    let best = argmax(&values, prob.set.tie_break()).argmax;
    let candidates = results
        .iter()
        .map(|(ctrl, v, se)| CandidateValue {
            encoding: ctrl.encode(),
            value: *v,
            std_error: *se,
        })
        .collect();
    let (ctrl, value, std_error) = results[best].clone();
    Ok(ValueEstimate {
        value,
        std_error,
        best_control: ctrl,
        t,
        x: x.to_vec(),
        paths,
        n_steps: grid.n_steps(),
        seed,
        method: Method::BruteForce { blocks },
        basis: prob.basis,
        candidates,
        filled_bins: 0,
    })
}

/// Probabilists' Gauss-Hermite rules (weights sum to one).
fn hermite_rule(points: usize) -> (&'static [f64], &'static [f64]) {
    const N5: [f64; 5] = [-2.856_970_013_872_805_6, -1.355_626_179_974_265_7, 0.0, 1.355_626_179_974_265_7, 2.856_970_013_872_805_6];
    const W5: [f64; 5] = [0.011_257_411_327_720_691, 0.222_075_922_005_612_6, 0.533_333_333_333_333_3, 0.222_075_922_005_612_6, 0.011_257_411_327_720_691];
    const N3: [f64; 3] = [-1.732_050_807_568_877_2, 0.0, 1.732_050_807_568_877_2];
    const W3: [f64; 3] = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
    if points == 5 {
        (&N5, &W5)
    } else {
        (&N3, &W3)
    }
}

/// Tensor quadrature nodes `(weight, xi)` for a standard normal in `dim`.
fn quadrature(dim: usize) -> Vec<(f64, Vec<f64>)> {
    let (nodes, weights) = hermite_rule(if dim <= 2 { 5 } else { 3 });
    let mut out = vec![(1.0, Vec::new())];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * nodes.len());
        for (w, xi) in &out {
            for (n, wn) in nodes.iter().zip(weights) {
                let mut v = xi.clone();
                v.push(*n);
                next.push((w * wn, v));
            }
        }
        out = next;
    }
    out
}

enum Continuation<'a> {
    Terminal(&'a ParabolicProblem),
    Fitted(Fit),
}

impl Continuation<'_> {
    fn at(&self, x: &[f64]) -> f64 {
        match self {
            Continuation::Terminal(p) => p.g.eval(x),
            Continuation::Fitted(f) => f.predict_first(x),
        }
    }
}

/// Backward greedy selection of a Markovian rule. Returns the rule and the
/// number of state bins that were filled from a neighbour.
pub fn select_markovian_rule(
    prob: &ParabolicProblem,
    t: f64,
    x: &[f64],
    state_bins: usize,
    paths: usize,
    seed: u64,
) -> Result<(ControlSchedule, usize)> {
    check_point(prob, x, paths)?;
    if state_bins == 0 {
        return Err(Error::InvalidArgument("state_bins must be at least 1".into()));
    }
    let grid = prob.grid_from(t)?;
    let n = grid.n_steps();
    let dt = grid.dt();
    let dim = prob.dim();
    let count = prob.set.len();
    let gens = prob.set.generators();
    let drivers = prob.transformed_drivers()?;
    let explore = ControlSchedule::randomized(grid, count as u32, mix64(seed ^ SELECTION_STREAM));
    let noise = make_bundle_stream(grid, paths, dim, seed, SELECTION_STREAM)?;
    let sample = simulate_forward(&prob.set, &explore, x, &noise)?;
    let rule_nodes = quadrature(dim);
    let sqrt_dt = dt.sqrt();

    let mut partitions: Vec<Option<StatePartition>> = vec![None; n];
    let mut filled_total = 0;
    let mut cont = Continuation::Terminal(prob);
    for k in (0..n).rev() {
        let tk = grid.time(k);
        // y[m * count + i]: one-step value of generator i at X_k^m
        let per_path: Vec<Result<Vec<f64>>> = (0..paths)
            .into_par_iter()
            .map(|m| {
                let xk = sample.x(m, k);
                let mut out = Vec::with_capacity(count);
                let mut drift = vec![0.0; dim];
                let mut point = vec![0.0; dim];
                let mut dw = vec![0.0; dim];
                for (gen, f) in gens.iter().zip(&drivers) {
                    gen.drift.eval_into(tk, xk, &mut drift);
                    let mut e = 0.0;
                    let mut z = vec![0.0; dim];
                    for (w, xi) in &rule_nodes {
                        for j in 0..dim {
                            point[j] = xk[j] + drift[j] * dt;
                            dw[j] = sqrt_dt * xi[j];
                        }
                        gen.diffusion.sigma_mul_add(tk, xk, &dw, &mut point);
                        let v = cont.at(&point);
                        e += w * v;
                        for j in 0..dim {
                            z[j] += w * v * xi[j] / sqrt_dt;
                        }
                    }
                    out.push(implicit_step(e, dt, |y| f.eval(tk, xk, y, &z), k, m)?);
                }
                Ok(out)
            })
            .collect();
        let values = per_path.into_iter().collect::<Result<Vec<_>>>()?;

        let states = sample.states_at(k);
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        for p in states.chunks(dim) {
            for j in 0..dim {
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
            }
        }
        let spread = (0..dim).any(|j| upper[j] - lower[j] > 1e-12 * (1.0 + upper[j].abs()));
        let bins = if spread { state_bins } else { 1 };
        let cells = bins.pow(dim as u32);
        let probe = StatePartition::new(lower.clone(), upper.clone(), bins, vec![0; cells])?;
        let mut sums = vec![vec![0.0; count]; cells];
        let mut hits = vec![0usize; cells];
        for (m, v) in values.iter().enumerate() {
            let c = probe.cell_of(sample.x(m, k));
            hits[c] += 1;
            for i in 0..count {
                sums[c][i] += v[i];
            }
        }
        let mut choices: Vec<Option<u32>> = sums
            .iter()
            .zip(&hits)
            .map(|(s, &h)| {
                (h > 0).then(|| {
                    let avg: Vec<f64> = s.iter().map(|v| v / h as f64).collect();
                    argmax(&avg, prob.set.tie_break()).argmax as u32
                })
            })
            .collect();
        let filled = fill_empty_cells(&mut choices, bins, dim);
        if filled > 0 {
            log::info!("step {k}: {filled} empty state bins took a neighbour's choice");
        }
        filled_total += filled;
        let partition = StatePartition::new(
            lower,
            upper,
            bins,
            choices.into_iter().map(|c| c.expect("filled")).collect(),
        )?;

        if k > 0 {
            let chosen: Vec<f64> = values
                .iter()
                .enumerate()
                .map(|(m, v)| v[partition.choose(sample.x(m, k)) as usize])
                .collect();
            cont = Continuation::Fitted(fit(prob.basis, &states, dim, &[chosen], k)?);
        }
        partitions[k] = Some(partition);
    }
    let rule = FeedbackRule::new(partitions.into_iter().map(|p| p.expect("every step")).collect());
    Ok((ControlSchedule::feedback(grid, rule)?, filled_total))
}

fn implicit_step(e: f64, dt: f64, f: impl Fn(f64) -> f64, step: usize, path: usize) -> Result<f64> {
    let mut y = e;
    for _ in 0..crate::bsde::MAX_FIXED_POINT_ITERATIONS {
        let next = e + dt * f(y);
        if !next.is_finite() {
            return Err(Error::NonFinite { step });
        }
        if (next - y).abs() <= 1e-13 * (1.0 + next.abs()) {
            return Ok(next);
        }
        y = next;
    }
    Err(Error::FixedPointDiverged {
        step,
        path,
        iterations: crate::bsde::MAX_FIXED_POINT_ITERATIONS,
    })
}

/// Markovian state-feedback search: select a rule by backward greedy
/// comparison on a separate sample, then evaluate it on fresh paths.
pub fn value_markovian(
    prob: &ParabolicProblem,
    t: f64,
    x: &[f64],
    state_bins: usize,
    paths: usize,
    seed: u64,
) -> Result<ValueEstimate> {
    let (ctrl, filled) = select_markovian_rule(prob, t, x, state_bins, paths, seed)?;
    let mut est = value_fixed_control(prob, &ctrl, t, x, paths, seed)?;
    est.method = Method::Markovian { state_bins };
    est.filled_bins = filled;
    Ok(est)
}
