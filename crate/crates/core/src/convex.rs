//! Small dense log-barrier interior-point method for smooth convex programs
//! `min f(x) s.t. g_i(x) <= 0`. Derivatives come from hyper-dual numbers, so
//! a program only has to write its functions once, generically.

use nalgebra::{DMatrix, DVector};
use num_dual::{DualNum, HyperDual64};

pub trait Real: DualNum<Primitive = f64> + Copy {}
impl<T: DualNum<Primitive = f64> + Copy> Real for T {}

pub trait ConvexProgram {
    fn dim(&self) -> usize;
    fn objective<T: Real>(&self, x: &[T]) -> T;
    /// Pushes every `g_i(x)`; feasibility means all are `<= 0`.
    fn constraints<T: Real>(&self, x: &[T], out: &mut Vec<T>);
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Stop once the duality-gap bound `m / tau` falls below this.
    pub gap_tol: f64,
    pub tau0: f64,
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            gap_tol: 1e-10,
            tau0: 1.0,
            mu: 20.0,
            max_newton: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConvexError {
    #[error("starting point is outside the domain of the program")]
    BadStart,
    #[error("no strictly feasible point; constraint {0} stays violated")]
    Infeasible(usize),
}

pub fn eval<P: ConvexProgram>(p: &P, x: &[f64]) -> (f64, Vec<f64>) {
    let mut g = Vec::new();
    p.constraints(x, &mut g);
    (p.objective(x), g)
}

pub fn max_violation<P: ConvexProgram>(p: &P, x: &[f64]) -> f64 {
    let (_, g) = eval(p, x);
    g.into_iter().fold(f64::NEG_INFINITY, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
}

/// Minimises `p` starting from `x0`, running a phase-I search first when `x0`
/// is not strictly feasible.
pub fn minimize<P: ConvexProgram>(
    p: &P,
    x0: &[f64],
    opts: &BarrierOptions,
) -> Result<Solution, ConvexError> {
    let (f0, g0) = eval(p, x0);
    if !f0.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(ConvexError::BadStart);
    }
    let start = if g0.iter().all(|&v| v < 0.0) {
        x0.to_vec()
    } else {
        phase_one(p, x0, &g0, opts)?
    };
    Ok(barrier(p, start, opts, |_| false))
}

struct PhaseOne<'a, P> {
    inner: &'a P,
}

impl<P: ConvexProgram> ConvexProgram for PhaseOne<'_, P> {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }

    fn objective<T: Real>(&self, x: &[T]) -> T {
        x[x.len() - 1]
    }

    fn constraints<T: Real>(&self, x: &[T], out: &mut Vec<T>) {
        let n = self.inner.dim();
        let s = x[n];
        let start = out.len();
        self.inner.constraints(&x[..n], out);
        for v in &mut out[start..] {
            *v -= s;
        }
        out.push(-s - T::from(1.0));
    }
}

fn phase_one<P: ConvexProgram>(
    p: &P,
    x0: &[f64],
    g0: &[f64],
    opts: &BarrierOptions,
) -> Result<Vec<f64>, ConvexError> {
    let n = p.dim();
    let worst = g0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut x = x0.to_vec();
    x.push(worst.max(0.0) + 1.0);
    let aux = PhaseOne { inner: p };
    let strictly = |x: &[f64]| max_violation(p, &x[..n]) < 0.0;
    let sol = barrier(&aux, x, opts, strictly);
    let xs = sol.x[..n].to_vec();
    let (_, g) = eval(p, &xs);
    if g.iter().all(|&v| v < 0.0) {
        Ok(xs)
    } else {
        let (idx, _) = g
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        Err(ConvexError::Infeasible(idx))
    }
}

struct Derivs {
    f: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    g: Vec<f64>,
    g_grad: Vec<DVector<f64>>,
    g_hess: Vec<DMatrix<f64>>,
}

fn derivs<P: ConvexProgram>(p: &P, x: &[f64]) -> Derivs {
    let n = x.len();
    let mut d = Derivs {
        f: 0.0,
        grad: DVector::zeros(n),
        hess: DMatrix::zeros(n, n),
        g: Vec::new(),
        g_grad: Vec::new(),
        g_hess: Vec::new(),
    };
    let mut xs = vec![HyperDual64::from(0.0); n];
    let mut gs: Vec<HyperDual64> = Vec::new();
    for i in 0..n {
        for j in i..n {
            for (k, xk) in xs.iter_mut().enumerate() {
                let e1 = if k == i { 1.0 } else { 0.0 };
                let e2 = if k == j { 1.0 } else { 0.0 };
                *xk = HyperDual64::new(x[k], e1, e2, 0.0);
            }
            let f = p.objective(&xs);
            gs.clear();
            p.constraints(&xs, &mut gs);
            if i == 0 && j == 0 {
                d.f = f.re;
                d.g = gs.iter().map(|v| v.re).collect();
                d.g_grad = vec![DVector::zeros(n); gs.len()];
                d.g_hess = vec![DMatrix::zeros(n, n); gs.len()];
            }
            if i == j {
                d.grad[i] = f.eps1;
            }
            d.hess[(i, j)] = f.eps1eps2;
            d.hess[(j, i)] = f.eps1eps2;
            for (c, v) in gs.iter().enumerate() {
                if i == j {
                    d.g_grad[c][i] = v.eps1;
                }
                d.g_hess[c][(i, j)] = v.eps1eps2;
                d.g_hess[c][(j, i)] = v.eps1eps2;
            }
        }
    }
    d
}

fn barrier_value<P: ConvexProgram>(p: &P, x: &[f64], tau: f64) -> f64 {
    let (f, g) = eval(p, x);
    if !f.is_finite() {
        return f64::INFINITY;
    }
    let mut phi = tau * f;
    for v in g {
        if !(v < 0.0) {
            return f64::INFINITY;
        }
        phi -= (-v).ln();
    }
    phi
}

fn newton_direction(h: DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..40 {
        let mut m = h.clone();
        for i in 0..n {
            m[(i, i)] += reg;
        }
        if let Some(ch) = m.cholesky() {
            let dx = ch.solve(&(-grad));
            if dx.iter().all(|v| v.is_finite()) {
                return Some(dx);
            }
        }
        reg = if reg == 0.0 { 1e-12 * scale } else { reg * 10.0 };
    }
    None
}

fn barrier<P: ConvexProgram>(
    p: &P,
    mut x: Vec<f64>,
    opts: &BarrierOptions,
    stop: impl Fn(&[f64]) -> bool,
) -> Solution {
    let n = x.len();
    let mut tau = opts.tau0;
    let mut steps = 0;
    let m = {
        let (_, g) = eval(p, &x);
        g.len().max(1) as f64
    };
    loop {
        // centering
        for _ in 0..opts.max_newton {
            let d = derivs(p, &x);
            let mut grad = &d.grad * tau;
            let mut hess = &d.hess * tau;
            for c in 0..d.g.len() {
                let gi = d.g[c];
                let inv = -1.0 / gi;
                grad += &d.g_grad[c] * inv;
                hess += &d.g_grad[c] * d.g_grad[c].transpose() * (inv * inv);
                hess += &d.g_hess[c] * inv;
            }
            let Some(dx) = newton_direction(hess, &grad) else {
                break;
            };
            let lambda2 = -grad.dot(&dx);
            if !(lambda2 > 1e-11) {
                break;
            }
            let phi0 = barrier_value(p, &x, tau);
            let mut alpha = 1.0;
            let mut accepted = false;
            let mut trial = vec![0.0; n];
            while alpha > 1e-16 {
                for i in 0..n {
                    trial[i] = x[i] + alpha * dx[i];
                }
                let phi = barrier_value(p, &trial, tau);
                if phi <= phi0 - 0.25 * alpha * lambda2 {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
            x.copy_from_slice(&trial);
            steps += 1;
            if stop(&x) {
                let (f, _) = eval(p, &x);
                return Solution {
                    x,
                    objective: f,
                    newton_steps: steps,
                };
            }
        }
        if m / tau < opts.gap_tol {
            break;
        }
        tau *= opts.mu;
    }
    let (f, _) = eval(p, &x);
    Solution {
        x,
        objective: f,
        newton_steps: steps,
    }
}
