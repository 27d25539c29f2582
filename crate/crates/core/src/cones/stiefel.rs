//! Riemannian gradient descent on the Stiefel manifold of orthonormal
//! `k`-frames in `R^m`, with seeded multistart.
//!
//! Frames are stored as row-major `k x m` arrays with orthonormal rows. A step
//! moves along the tangent projection of the Euclidean gradient,
//! `xi = G - sym(G X^T) X`, and retracts by Gram–Schmidt on the rows. Step
//! sizes come from the Barzilai–Borwein rule with Armijo backtracking.

use rayon::prelude::*;

use crate::rng::{gaussian, stream};

use super::functional::{Eval, FrameObjective};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSettings {
    pub max_iter: usize,
    /// Stop when `|xi| <= grad_tol * scale`.
    pub grad_tol: f64,
    /// Stop when the objective stalls below `stall_tol * scale` for `stall_window` iterations.
    pub stall_tol: f64,
    pub stall_window: usize,
}

impl Default for LocalSettings {
    fn default() -> Self {
        Self {
            max_iter: 3000,
            grad_tol: 1e-9,
            stall_tol: 1e-15,
            stall_window: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub eval: Eval,
    pub iterations: usize,
    pub converged: bool,
}

/// How random starting frames are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartSampler {
    /// Haar-uniform on the Stiefel manifold.
    Uniform,
    /// Odd-numbered starts shrink the coordinates `>= base` by a random factor
    /// before orthonormalizing, so frames lying mostly in the first `base`
    /// coordinates are well represented. Even-numbered starts are uniform.
    Tilted { base: usize },
}

/// Orthonormalizes the rows of a `k x m` array in place (two Gram–Schmidt passes).
/// Returns false if the rows are numerically dependent.
pub fn orthonormalize_rows(x: &mut [f64], k: usize, m: usize) -> bool {
    for _pass in 0..2 {
        for a in 0..k {
            for b in 0..a {
                let d: f64 = (0..m).map(|i| x[a * m + i] * x[b * m + i]).sum();
                for i in 0..m {
                    x[a * m + i] -= d * x[b * m + i];
                }
            }
            let nrm = (0..m).map(|i| x[a * m + i].powi(2)).sum::<f64>().sqrt();
            if !(nrm > 1e-12) {
                return false;
            }
            for i in 0..m {
                x[a * m + i] /= nrm;
            }
        }
    }
    true
}

/// `xi = g - sym(g x^T) x`.
fn tangent_project(x: &[f64], g: &[f64], k: usize, m: usize, out: &mut [f64]) {
    out.copy_from_slice(g);
    for a in 0..k {
        for b in 0..k {
            let gxab: f64 = (0..m).map(|i| g[a * m + i] * x[b * m + i]).sum();
            let gxba: f64 = (0..m).map(|i| g[b * m + i] * x[a * m + i]).sum();
            let s = 0.5 * (gxab + gxba);
            for i in 0..m {
                out[a * m + i] -= s * x[b * m + i];
            }
        }
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Local descent from `x0` (which is orthonormalized first).
pub fn local_minimize<O: FrameObjective + ?Sized>(
    obj: &O,
    x0: &[f64],
    settings: &LocalSettings,
) -> LocalResult {
    let (k, m) = (obj.rows(), obj.dim());
    let len = k * m;
    let mut x = x0.to_vec();
    if !orthonormalize_rows(&mut x, k, m) {
        // degenerate start: fall back to coordinate vectors
        x.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..k {
            x[a * m + a] = 1.0;
        }
    }
    let scale = obj.scale();
    let mut g = vec![0.0; len];
    let mut xi = vec![0.0; len];
    let mut eval = obj.eval(&x, Some(&mut g));
    tangent_project(&x, &g, k, m, &mut xi);

    let mut trial = vec![0.0; len];
    let mut g_new = vec![0.0; len];
    let mut xi_new = vec![0.0; len];
    let mut step = 0.1 / scale;
    let mut stall = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iter {
        let xi_sq = norm_sq(&xi);
        if xi_sq.sqrt() <= settings.grad_tol * scale {
            converged = true;
            break;
        }
        iterations += 1;
        // Armijo backtracking along -xi
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..len {
                trial[i] = x[i] - t * xi[i];
            }
            if orthonormalize_rows(&mut trial, k, m) {
                let e = obj.eval(&trial, None);
                if e.value <= eval.value - 1e-4 * t * xi_sq {
                    accepted = Some(e);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(_) = accepted else {
            // no decrease possible at any step size: numerically stationary
            converged = true;
            break;
        };
        let e_new = obj.eval(&trial, Some(&mut g_new));
        tangent_project(&trial, &g_new, k, m, &mut xi_new);

        // Barzilai–Borwein step from ambient differences
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..len {
            let s = trial[i] - x[i];
            let y = xi_new[i] - xi[i];
            ss += s * s;
            sy += s * y;
        }
        step = if sy > 0.0 { ss / sy } else { 2.0 * t };
        step = step.clamp(1e-8 / scale, 1e3 / scale);

        let decrease = eval.value - e_new.value;
        if decrease <= settings.stall_tol * scale.max(eval.value.abs()) {
            stall += 1;
        } else {
            stall = 0;
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut xi, &mut xi_new);
        eval = e_new;
        if stall >= settings.stall_window {
            converged = true;
            break;
        }
    }
    LocalResult {
        x,
        eval,
        iterations,
        converged,
    }
}

/// A random starting frame drawn from stream `index` under `seed`.
pub fn random_start(k: usize, m: usize, seed: u64, index: u64, sampler: StartSampler) -> Vec<f64> {
    let mut rng = stream(seed, index);
    let mut x: Vec<f64> = (0..k * m).map(|_| gaussian(&mut rng)).collect();
    if let StartSampler::Tilted { base } = sampler {
        if index % 2 == 1 && base < m {
            let shrink: f64 = rand::Rng::random::<f64>(&mut rng);
            for a in 0..k {
                for i in base..m {
                    x[a * m + i] *= shrink;
                }
            }
        }
    }
    orthonormalize_rows(&mut x, k, m);
    x
}

#[derive(Debug, Clone)]
pub struct MultistartResult {
    pub best: LocalResult,
    /// Index of the winning start; warm starts come first.
    pub best_index: usize,
    pub starts: usize,
    pub any_converged: bool,
}

/// Runs `warm.len() + starts` local descents and keeps the lowest value.
///
/// Ties are broken by start index, so the result does not depend on the
/// number of worker threads.
pub fn multistart<O: FrameObjective + ?Sized>(
    obj: &O,
    warm: &[Vec<f64>],
    starts: usize,
    seed: u64,
    sampler: StartSampler,
    settings: &LocalSettings,
) -> MultistartResult {
    let (k, m) = (obj.rows(), obj.dim());
    let total = warm.len() + starts;
    assert!(total > 0, "multistart needs at least one start");
    let results: Vec<LocalResult> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let x0 = if idx < warm.len() {
                warm[idx].clone()
            } else {
                random_start(k, m, seed, (idx - warm.len()) as u64, sampler)
            };
            local_minimize(obj, &x0, settings)
        })
        .collect();
    let any_converged = results.iter().any(|r| r.converged);
    let (best_index, _) = results
        .iter()
        .enumerate()
        .fold((0usize, f64::INFINITY), |(bi, bv), (i, r)| {
            if r.eval.value < bv {
                (i, r.eval.value)
            } else {
                (bi, bv)
            }
        });
    let best = results.into_iter().nth(best_index).expect("index in range");
    MultistartResult {
        best,
        best_index,
        starts: total,
        any_converged,
    }
}
