//! Derivative-free minimization (Nelder-Mead) with an optional projection
//! applied to every trial point.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop when every vertex lies within this distance of the best one.
    pub diameter_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evals: 5000, diameter_tol: 1e-7, initial_step: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from `x0`.
///
/// The reported point only moves on a strict improvement of more than
/// `1e-12` relative, so on a flat ridge the earliest point seen wins.
pub fn nelder_mead<F, P>(mut f: F, project: P, x0: &[f64], cfg: &NelderMeadConfig) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
    P: Fn(&mut [f64]),
{
    let d = x0.len();
    let mut evals = 0usize;
    let mut best_x = x0.to_vec();
    project(&mut best_x);
    let mut best_v = f64::INFINITY;
    let mut eval = |x: &[f64], evals: &mut usize, best_x: &mut Vec<f64>, best_v: &mut f64| -> f64 {
        *evals += 1;
        let v = f(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < *best_v - 1e-12 * best_v.abs().max(1e-300) || !best_v.is_finite() {
            *best_v = v;
            best_x.copy_from_slice(x);
        }
        v
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let start = best_x.clone();
    let v0 = eval(&start, &mut evals, &mut best_x, &mut best_v);
    simplex.push((start.clone(), v0));
    for i in 0..d {
        let mut x = start.clone();
        x[i] += cfg.initial_step;
        project(&mut x);
        if (x[i] - start[i]).abs() < 0.5 * cfg.initial_step {
            x[i] = start[i] - cfg.initial_step;
            project(&mut x);
        }
        let v = eval(&x, &mut evals, &mut best_x, &mut best_v);
        simplex.push((x, v));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals < cfg.max_evals {
        // stable sort keeps earlier vertices first among ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diam = simplex[1..]
            .iter()
            .map(|(x, _)| dist(x, &simplex[0].0))
            .fold(0.0, f64::max);
        if diam < cfg.diameter_tol {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let worst = &simplex[d].0;
            let mut x: Vec<f64> = centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect();
            project(&mut x);
            x
        };
        let xr = along(alpha);
        let vr = eval(&xr, &mut evals, &mut best_x, &mut best_v);
        if vr < simplex[0].1 {
            let xe = along(alpha * gamma);
            let ve = eval(&xe, &mut evals, &mut best_x, &mut best_v);
            simplex[d] = if ve < vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr < simplex[d - 1].1 {
            simplex[d] = (xr, vr);
            continue;
        }
        let (xc, vc) = if vr < simplex[d].1 {
            let x = along(alpha * rho);
            let v = eval(&x, &mut evals, &mut best_x, &mut best_v);
            (x, v)
        } else {
            let x = along(-rho);
            let v = eval(&x, &mut evals, &mut best_x, &mut best_v);
            (x, v)
        };
        if vc < simplex[d].1.min(vr) {
            simplex[d] = (xc, vc);
            continue;
        }
        let x0 = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&x0) {
                *xi = bi + sigma * (*xi - bi);
            }
            project(x);
            *v = eval(x, &mut evals, &mut best_x, &mut best_v);
        }
    }
    NelderMeadResult { x: best_x, value: best_v, evaluations: evals, converged }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Radial clamp onto the closed ball of radius `r`.
pub fn clamp_to_ball(x: &mut [f64], r: f64) {
    let n = dist(x, &vec![0.0; x.len()]);
    if n > r {
        x.iter_mut().for_each(|v| *v *= r / n);
    }
}
