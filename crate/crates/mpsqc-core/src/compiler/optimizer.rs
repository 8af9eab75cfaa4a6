//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub max_iters: usize,
    pub history: usize,
    /// Length of the first trial step along `−g/‖g‖`.
    pub initial_step: f64,
    /// Stop once the objective falls below this value.
    pub f_target: f64,
    pub grad_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { max_iters: 200, history: 10, initial_step: 0.1, f_target: 0.0, grad_tol: 1e-14 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
    /// Objective at every accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Point {
    alpha: f64,
    f: f64,
    d: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Minimizes `f`, which writes the gradient into its second argument and returns the value.
pub fn lbfgs<F>(mut f: F, x0: &[f64], cfg: &LbfgsConfig) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evals = 1;
    let mut trace = vec![fx];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iters = 0;
    while iters < cfg.max_iters && fx > cfg.f_target && dot(&g, &g).sqrt() > cfg.grad_tol {
        let mut dir = two_loop(&g, &mem);
        let mut d0 = dot(&dir, &g);
        if !(d0 < 0.0) {
            mem.clear();
            dir = g.iter().map(|v| -v).collect();
            d0 = dot(&dir, &g);
        }
        let a0 = if mem.is_empty() { cfg.initial_step / dot(&dir, &dir).sqrt() } else { 1.0 };
        let found = {
            let mut phi = |alpha: f64| {
                let xa: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
                let mut ga = vec![0.0; n];
                let fa = f(&xa, &mut ga);
                evals += 1;
                let da = dot(&ga, &dir);
                Point { alpha, f: fa, d: da, x: xa, g: ga }
            };
            strong_wolfe(&mut phi, fx, d0, a0)
        };
        let Some(p) = found else {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if mem.len() == cfg.history {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let progress = fx - p.f;
        x = p.x;
        g = p.g;
        fx = p.f;
        trace.push(fx);
        iters += 1;
        if progress <= 0.0 {
            break;
        }
    }
    Minimum { x, f: fx, iters, evals, trace }
}

fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Bracketing phase followed by zoom; returns a point with sufficient decrease and
/// `|φ'(α)| ≤ c₂|φ'(0)|`, or `None` when no decrease could be found.
fn strong_wolfe<P>(phi: &mut P, f0: f64, d0: f64, a_init: f64) -> Option<Point>
where
    P: FnMut(f64) -> Point,
{
    let mut prev = Point { alpha: 0.0, f: f0, d: d0, x: Vec::new(), g: Vec::new() };
    let mut alpha = a_init;
    let mut best: Option<Point> = None;
    for i in 0..20 {
        let cur = phi(alpha);
        if !cur.f.is_finite() {
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        }
        if cur.f > f0 + C1 * alpha * d0 || (i > 0 && cur.f >= prev.f) {
            return zoom(phi, f0, d0, prev, cur).or(best);
        }
        if cur.d.abs() <= -C2 * d0 {
            return Some(cur);
        }
        if cur.d >= 0.0 {
            return zoom(phi, f0, d0, cur, prev).or(best);
        }
        alpha *= 2.0;
        best = Some(Point { alpha: cur.alpha, f: cur.f, d: cur.d, x: cur.x.clone(), g: cur.g.clone() });
        prev = cur;
    }
    best
}

fn zoom<P>(phi: &mut P, f0: f64, d0: f64, mut lo: Point, mut hi: Point) -> Option<Point>
where
    P: FnMut(f64) -> Point,
{
    for _ in 0..30 {
        let a = cubic_min(&lo, &hi);
        let cur = phi(a);
        if cur.f > f0 + C1 * a * d0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.d.abs() <= -C2 * d0 {
                return Some(cur);
            }
            if cur.d * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
        if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1e-300) {
            break;
        }
    }
    // accept the best sufficient-decrease point even if the curvature test never passed
    if lo.alpha > 0.0 && lo.f < f0 { Some(lo) } else { None }
}

/// Minimizer of the cubic through both end points, kept inside the interval.
fn cubic_min(a: &Point, b: &Point) -> f64 {
    let (lo, hi) = if a.alpha < b.alpha { (a.alpha, b.alpha) } else { (b.alpha, a.alpha) };
    let d1 = a.d + b.d - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.d * b.d;
    let mid = 0.5 * (lo + hi);
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let t = b.alpha - (b.alpha - a.alpha) * (b.d + d2 - d1) / (b.d - a.d + 2.0 * d2);
    let margin = 0.1 * (hi - lo);
    if t.is_finite() && t > lo + margin && t < hi - margin {
        t
    } else {
        mid
    }
}
