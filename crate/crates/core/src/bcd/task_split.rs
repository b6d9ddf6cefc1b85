//! Task-split block: optimise `(rho1, rho2)` with `t` and `d` fixed.

use super::surrogate::exp_tangent;
use super::{feasible_energy, run_sca, ScaOptions, SubproblemCoefficients};
use crate::convex::{minimize, BarrierOptions, ConvexProgram, Real};
use crate::energy::ConstraintId;
use crate::error::{ModelError, Result};
use crate::model::{channel_gains, remote_window, Decision, Regime, Scheme, SystemConfig, UeProfile};
use crate::power::{airtime_share, log_snr_factors, noise_share, EvalMode};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplitResult {
    pub rho: [f64; 2],
    pub energy: f64,
    /// Slack bounding the SIC-failure denominators (NOMA finite only, else 1).
    pub mu_tilde: [f64; 2],
    /// `ln(1 - mu_tilde)`.
    pub lambda_tilde: [f64; 2],
    pub sca_trace: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Law {
    NomaInf,
    NomaFin,
    Orthogonal,
}

impl Law {
    pub(crate) fn of(scheme: Scheme, regime: Regime) -> Law {
        match (scheme, regime) {
            (Scheme::Noma, Regime::Infinite) => Law::NomaInf,
            (Scheme::Noma, Regime::Finite) => Law::NomaFin,
            _ => Law::Orthogonal,
        }
    }
}

struct SplitProgram {
    law: Law,
    active: [bool; 2],
    var: [usize; 2],
    mu: [usize; 2],
    n: usize,
    coef: SubproblemCoefficients,
    l0: [f64; 2],
    hb: [f64; 2],
    ns: [f64; 2],
    air: [f64; 2],
    t: f64,
    e1: f64,
    p_max: [f64; 2],
    /// Remote CPU frequency per unit offloaded share.
    load: [f64; 2],
    f_u_max: f64,
    lo: [f64; 2],
    scale: f64,
}

impl SplitProgram {
    fn rho<T: Real>(&self, x: &[T], k: usize) -> T {
        if self.active[k] {
            x[self.var[k]]
        } else {
            T::from(0.0)
        }
    }

    fn ell<T: Real>(&self, x: &[T], k: usize) -> T {
        if self.active[k] {
            x[self.var[k]] * self.coef.omega[k] + self.coef.v[k]
        } else {
            T::from(0.0)
        }
    }

    fn powers<T: Real>(&self, x: &[T]) -> [T; 2] {
        let zero = T::from(0.0);
        let l = [self.ell(x, 0), self.ell(x, 1)];
        match self.law {
            Law::Orthogonal => {
                let mut p = [zero; 2];
                for k in 0..2 {
                    if self.active[k] {
                        p[k] = (l[k].exp() - 1.0) * (self.ns[k] / self.hb[k]);
                    }
                }
                p
            }
            Law::NomaInf | Law::NomaFin => {
                let mut hat = [zero; 2];
                if self.active[0] {
                    hat[0] = ((l[0] + l[1]).exp() - exp_tangent(l[1], self.l0[1])) / self.hb[0];
                }
                if self.active[1] {
                    hat[1] = (l[1].exp() - 1.0) / self.hb[1];
                }
                if self.law == Law::NomaInf {
                    return hat;
                }
                let mut p = [zero; 2];
                for k in 0..2 {
                    if self.active[k] {
                        let check = (x[self.mu[k]].recip() - 1.0) * (self.e1 / self.hb[k]);
                        p[k] = hat[k] * (1.0 - self.e1) + check;
                    }
                }
                p
            }
        }
    }

    /// Inner approximation of the SIC-failure denominator of UE `k`.
    fn varsigma<T: Real>(&self, x: &[T], k: usize) -> T {
        let j = 1 - k;
        let lk = self.ell(x, k);
        let lj = self.ell(x, j);
        -lj.exp() + 1.0 + exp_tangent(lj - lk, self.l0[j] - self.l0[k])
    }
}

impl ConvexProgram for SplitProgram {
    fn dim(&self) -> usize {
        self.n
    }

    fn objective<T: Real>(&self, x: &[T]) -> T {
        let p = self.powers(x);
        let mut f = T::from(0.0);
        for k in 0..2 {
            let r = self.rho(x, k);
            f += (-r + 1.0).powi(3) * self.coef.xi[k] + r.powi(3) * self.coef.zeta[k];
            f += p[k] * (self.t * self.air[k]);
        }
        f * self.scale
    }

    fn constraints<T: Real>(&self, x: &[T], out: &mut Vec<T>) {
        let p = self.powers(x);
        let mut cpu = T::from(0.0);
        for k in 0..2 {
            if !self.active[k] {
                continue;
            }
            let r = x[self.var[k]];
            out.push(-r + self.lo[k]);
            out.push(r - 1.0);
            out.push(p[k] / self.p_max[k] - 1.0);
            cpu += r * (self.load[k] / self.f_u_max);
            if self.law == Law::NomaFin {
                let m = x[self.mu[k]];
                out.push(m - self.varsigma(x, k));
                out.push(m - 1.0);
                out.push(-m);
            }
        }
        out.push(cpu - 1.0);
    }
}

/// Exact SIC-failure denominators `(1 - Y1 Y2) / (1 + Y_k)` for finite NOMA.
pub(crate) fn true_varsigma(l: [f64; 2]) -> [f64; 2] {
    [
        1.0 - l[1].exp() + (l[1] - l[0]).exp(),
        1.0 - l[0].exp() + (l[0] - l[1]).exp(),
    ]
}

pub fn solve_task_split(
    scheme: Scheme,
    regime: Regime,
    t: f64,
    d: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    init_rho: [f64; 2],
) -> Result<TaskSplitResult> {
    solve_task_split_with(scheme, regime, t, d, cfg, ues, init_rho, &ScaOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn solve_task_split_with(
    scheme: Scheme,
    regime: Regime,
    t: f64,
    d: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    init_rho: [f64; 2],
    opts: &ScaOptions,
) -> Result<TaskSplitResult> {
    let energy_of = |rho: &[f64; 2]| {
        feasible_energy(scheme, regime, &Decision { rho: *rho, t, d }, cfg, ues, EvalMode::Strict)
    };
    let floor = [ues[0].rho_floor(cfg.t_max), ues[1].rho_floor(cfg.t_max)];
    let init_e = energy_of(&init_rho);
    let mut best: Option<TaskSplitResult> = init_e.map(|e| TaskSplitResult {
        rho: init_rho,
        energy: e,
        mu_tilde: [1.0; 2],
        lambda_tilde: [f64::NEG_INFINITY; 2],
        sca_trace: vec![e],
        iterations: 0,
    });

    let can_idle = [floor[0] == 0.0, floor[1] == 0.0];
    let has_data = [ues[0].task_bits > 0.0, ues[1].task_bits > 0.0];
    let mut cases: Vec<[bool; 2]> = Vec::new();
    if t > 0.0 {
        for mask in [[true, true], [true, false], [false, true]] {
            let ok = (0..2).all(|k| if mask[k] { has_data[k] } else { can_idle[k] });
            if ok {
                cases.push(mask);
            }
        }
    }

    let consider = |cand: TaskSplitResult, best: &mut Option<TaskSplitResult>| {
        let better = match best {
            Some(b) => cand.energy < b.energy,
            None => true,
        };
        if better {
            *best = Some(cand);
        }
    };

    if can_idle[0] && can_idle[1] {
        if let Some(e) = energy_of(&[0.0, 0.0]) {
            consider(
                TaskSplitResult {
                    rho: [0.0; 2],
                    energy: e,
                    mu_tilde: [1.0; 2],
                    lambda_tilde: [f64::NEG_INFINITY; 2],
                    sca_trace: vec![e],
                    iterations: 0,
                },
                &mut best,
            );
        }
    }

    let ctx = SplitContext::new(scheme, regime, t, d, cfg, ues)?;
    for mask in cases {
        let mut start = [0.0; 2];
        for k in 0..2 {
            if mask[k] {
                let r = if init_rho[k] > 0.0 { init_rho[k] } else { 0.5 };
                start[k] = r.clamp(floor[k].max(1e-3), 1.0 - 1e-9);
            }
        }
        let start_e = if init_rho == start { init_e } else { energy_of(&start) };
        let mut last_mu = [1.0; 2];
        let run = run_sca(
            start,
            start_e,
            opts,
            |rho: &[f64; 2]| {
                let (r, mu) = ctx.step(mask, *rho, floor)?;
                last_mu = mu;
                Some(r)
            },
            |rho| energy_of(rho),
            |a, b, th| [a[0] + th * (b[0] - a[0]), a[1] + th * (b[1] - a[1])],
        );
        if let Some(run) = run {
            let mu = if ctx.law == Law::NomaFin {
                let l = log_snr_factors(scheme, regime, run.state, t, cfg, ues)?;
                let s = true_varsigma(l);
                [s[0].min(1.0), s[1].min(1.0)]
            } else {
                last_mu
            };
            consider(
                TaskSplitResult {
                    rho: run.state,
                    energy: run.energy,
                    mu_tilde: mu,
                    lambda_tilde: [(1.0 - mu[0]).ln(), (1.0 - mu[1]).ln()],
                    sca_trace: run.trace,
                    iterations: run.iterations,
                },
                &mut best,
            );
        }
    }

    best.ok_or_else(|| {
        let dec = Decision {
            rho: init_rho,
            t,
            d,
        };
        let rep = crate::energy::check_constraints(scheme, regime, &dec, cfg, ues);
        let id = rep.violations().next().map(|e| e.id).unwrap_or(ConstraintId::UavCpu);
        ModelError::Infeasible(id)
    })
}

/// Everything about the reduced problem that does not depend on the expansion point.
struct SplitContext {
    law: Law,
    coef: SubproblemCoefficients,
    hb: [f64; 2],
    ns: [f64; 2],
    air: [f64; 2],
    t: f64,
    e1: f64,
    p_max: [f64; 2],
    load: [f64; 2],
    f_u_max: f64,
}

impl SplitContext {
    fn new(
        scheme: Scheme,
        regime: Regime,
        t: f64,
        d: f64,
        cfg: &SystemConfig,
        ues: &[UeProfile; 2],
    ) -> Result<Self> {
        let ch = channel_gains(d, cfg)?;
        let coef = if t > 0.0 {
            SubproblemCoefficients::new(scheme, regime, [1.0, 1.0], t, cfg, ues)?
        } else {
            SubproblemCoefficients::default()
        };
        let mut load = [0.0; 2];
        for k in 0..2 {
            let w = remote_window(scheme, k, t, cfg);
            load[k] = if w > 0.0 { ues[k].cycles() / w } else { f64::INFINITY };
        }
        Ok(SplitContext {
            law: Law::of(scheme, regime),
            coef,
            hb: ch.hbar,
            ns: [noise_share(scheme, 0, cfg), noise_share(scheme, 1, cfg)],
            air: [airtime_share(scheme, 0, cfg), airtime_share(scheme, 1, cfg)],
            t,
            e1: ues[0].eps,
            p_max: [ues[0].p_max, ues[1].p_max],
            load,
            f_u_max: cfg.f_u_max,
        })
    }

    /// One convexified solve around `rho0`; returns the new split and the slack values.
    fn step(&self, active: [bool; 2], rho0: [f64; 2], floor: [f64; 2]) -> Option<([f64; 2], [f64; 2])> {
        if self.load.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut var = [usize::MAX; 2];
        let mut mu = [usize::MAX; 2];
        let mut n = 0;
        for k in 0..2 {
            if active[k] {
                var[k] = n;
                n += 1;
            }
        }
        if self.law == Law::NomaFin {
            for k in 0..2 {
                if active[k] {
                    mu[k] = n;
                    n += 1;
                }
            }
        }
        let mut l0 = [0.0; 2];
        for k in 0..2 {
            if active[k] {
                l0[k] = self.coef.omega[k] * rho0[k] + self.coef.v[k];
            }
        }
        let mut prog = SplitProgram {
            law: self.law,
            active,
            var,
            mu,
            n,
            coef: self.coef,
            l0,
            hb: self.hb,
            ns: self.ns,
            air: self.air,
            t: self.t,
            e1: self.e1,
            p_max: self.p_max,
            load: self.load,
            f_u_max: self.f_u_max,
            lo: floor,
            scale: 1.0,
        };
        let mut x0 = vec![0.0; n];
        for k in 0..2 {
            if active[k] {
                x0[var[k]] = rho0[k];
            }
        }
        if self.law == Law::NomaFin {
            let s = true_varsigma(l0);
            for k in 0..2 {
                if active[k] {
                    x0[mu[k]] = if s[k] > 0.0 { (s[k] * (1.0 - 1e-9)).min(1.0 - 1e-12) } else { 0.5 };
                }
            }
        }
        let f0 = prog.objective(&x0);
        prog.scale = if f0.is_finite() && f0 > 0.0 { 1.0 / f0 } else { 1.0 };
        let sol = minimize(&prog, &x0, &BarrierOptions::default()).ok()?;
        let mut rho = [0.0; 2];
        let mut mu_v = [1.0; 2];
        for k in 0..2 {
            if active[k] {
                rho[k] = sol.x[var[k]].clamp(0.0, 1.0);
                if self.law == Law::NomaFin {
                    mu_v[k] = sol.x[mu[k]];
                }
            }
        }
        Some((rho, mu_v))
    }
}
