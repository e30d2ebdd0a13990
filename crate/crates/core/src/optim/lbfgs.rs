use std::collections::VecDeque;

use crate::error::Result;

const MEMORY: usize = 8;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
/// Largest move of any coordinate in one step, in log units.
const STEP_CAP: f64 = 3.0;
const STEEPEST_CAP: f64 = 1.0;

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Coordinates pinned at a bound with the gradient pushing outward.
fn pinned(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<bool> {
    (0..x.len())
        .map(|i| (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))
        .collect()
}

fn two_loop(g: &[f64], fixed: &[bool], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().zip(fixed).map(|(v, &f)| if f { 0.0 } else { *v }).collect();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter()
        .zip(fixed)
        .map(|(v, &f)| if f { 0.0 } else { -v })
        .collect()
}

fn cap(d: &mut [f64], limit: f64) {
    let m = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > limit {
        d.iter_mut().for_each(|v| *v *= limit / m);
    }
}

/// Minimizes `f` over the box `[lo, hi]` with a projected limited-memory BFGS
/// iteration and backtracking on the projected path.
///
/// Failed evaluations during a line search count as `+inf`. Only a failure at
/// `x0` is returned as an error.
pub(crate) fn minimize<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], max_iter: usize, tol: f64) -> Result<Outcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let project = |x: &mut [f64]| {
        for i in 0..x.len() {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;
    let mut stalls = 0;

    while iterations < max_iter {
        let fixed = pinned(&x, &g, lo, hi);
        let pg = g
            .iter()
            .zip(&fixed)
            .fold(0.0f64, |m, (v, &p)| if p { m } else { m.max(v.abs()) });
        if pg <= 1e-10 * (1.0 + fx.abs()) {
            return Ok(Outcome { x, f: fx, iterations, converged: true });
        }

        let mut d = two_loop(&g, &fixed, &mem);
        if mem.is_empty() || dot(&d, &g) >= 0.0 {
            mem.clear();
            d = g.iter().zip(&fixed).map(|(v, &p)| if p { 0.0 } else { -v }).collect();
            cap(&mut d, STEEPEST_CAP);
        } else {
            cap(&mut d, STEP_CAP);
        }

        let mut step = None;
        let mut alpha = 1.0;
        for _ in 0..MAX_BACKTRACKS {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            project(&mut xn);
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let slope = dot(&g, &s);
            if slope < 0.0 {
                if let Ok((fn_, gn)) = f(&xn) {
                    if fn_.is_finite() && fn_ <= fx + ARMIJO * slope {
                        step = Some((xn, s, fn_, gn));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }

        let Some((xn, s, fn_, gn)) = step else {
            if mem.is_empty() {
                return Ok(Outcome { x, f: fx, iterations, converged: false });
            }
            mem.clear();
            continue;
        };
        iterations += 1;
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == MEMORY {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if improvement <= tol * fx.abs().max(1.0) {
            stalls += 1;
            if stalls >= 2 {
                return Ok(Outcome { x, f: fx, iterations, converged: true });
            }
        } else {
            stalls = 0;
        }
    }
    Ok(Outcome { x, f: fx, iterations, converged: false })
}
