//! Offloading-time block: optimise `t` with `rho` and `d` fixed.

use super::surrogate::{bilinear_upper, linear};
use super::task_split::{true_varsigma, Law};
use super::{feasible_energy, run_sca, ScaOptions, SubproblemCoefficients};
use crate::convex::{minimize, BarrierOptions, ConvexProgram, Real};
use crate::energy::ConstraintId;
use crate::error::{ModelError, Result};
use crate::model::{channel_gains, Decision, Regime, Scheme, SystemConfig, UeProfile};
use crate::power::{airtime_share, min_powers, noise_share, EvalMode};

#[derive(Debug, Clone, PartialEq)]
pub struct OffloadTimeResult {
    pub t: f64,
    pub energy: f64,
    /// Power slacks at the returned point (W).
    pub p_breve: [f64; 2],
    /// SIC-failure denominator slacks (NOMA finite only, else 1).
    pub varsigma_breve: [f64; 2],
    /// Offloading-energy slacks `p_breve * t` (J).
    pub e_breve: [f64; 2],
    pub sca_trace: Vec<f64>,
    pub iterations: usize,
}

/// Largest offloading time allowed by the singularity guard and the UAV CPU
/// cap; `None` when the cap cannot be met even at `t = 0`.
pub fn time_upper_bound(
    scheme: Scheme,
    rho: [f64; 2],
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> Option<f64> {
    let off = [rho[0] * ues[0].cycles(), rho[1] * ues[1].cycles()];
    if off[0] + off[1] == 0.0 {
        return Some(cfg.t_max);
    }
    let hi = cfg.t_upper();
    let bound = match scheme {
        Scheme::Tdma => {
            let freq = |t: f64| off[0] / (cfg.t_max - cfg.delta * t) + off[1] / (cfg.t_max - t);
            if freq(0.0) > cfg.f_u_max {
                return None;
            }
            if freq(hi) <= cfg.f_u_max {
                hi
            } else {
                let (mut a, mut b) = (0.0, hi);
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if freq(m) <= cfg.f_u_max {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                a
            }
        }
        _ => hi.min(cfg.t_max - (off[0] + off[1]) / cfg.f_u_max),
    };
    (bound > 0.0).then_some(bound)
}

struct TimeProgram {
    law: Law,
    active: [bool; 2],
    p_var: [usize; 2],
    s_var: [usize; 2],
    n: usize,
    z: [f64; 2],
    s: [f64; 2],
    t_max: f64,
    tau_hi: f64,
    cube: [f64; 2],
    /// Remote window of UE k is `t_max - win[k] * t`.
    win: [f64; 2],
    hb: [f64; 2],
    ns: [f64; 2],
    air: [f64; 2],
    p_max: [f64; 2],
    e1: f64,
    tau0: f64,
    p0: [f64; 2],
    /// Value and slope at t0 of `exp(l2(t))`.
    tan_l2: (f64, f64),
    /// Value and slope at t0 of `exp(l_j(t) - l_k(t))` for UE k.
    tan_ratio: [(f64, f64); 2],
    scale: f64,
}

/// `l(t) = z / t + s / sqrt(t)` and its slope.
fn ell_f64(z: f64, s: f64, t: f64) -> (f64, f64) {
    (z / t + s / t.sqrt(), -z / (t * t) - 0.5 * s / (t * t.sqrt()))
}

impl TimeProgram {
    fn ell<T: Real>(&self, t: T, k: usize) -> T {
        if self.active[k] {
            t.recip() * self.z[k] + t.sqrt().recip() * self.s[k]
        } else {
            T::from(0.0)
        }
    }

    fn powers<T: Real>(&self, x: &[T]) -> [T; 2] {
        let zero = T::from(0.0);
        let t = x[0] * self.t_max;
        let l = [self.ell(t, 0), self.ell(t, 1)];
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
                let t0 = self.tau0 * self.t_max;
                let mut hat = [zero; 2];
                if self.active[0] {
                    let lin = linear(t, t0, self.tan_l2.0, self.tan_l2.1);
                    hat[0] = ((l[0] + l[1]).exp() - lin) / self.hb[0];
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
                        let check = (x[self.s_var[k]].recip() - 1.0) * (self.e1 / self.hb[k]);
                        p[k] = hat[k] * (1.0 - self.e1) + check;
                    }
                }
                p
            }
        }
    }
}

impl ConvexProgram for TimeProgram {
    fn dim(&self) -> usize {
        self.n
    }

    fn objective<T: Real>(&self, x: &[T]) -> T {
        let t = x[0] * self.t_max;
        let mut f = T::from(0.0);
        for k in 0..2 {
            if self.cube[k] > 0.0 {
                f += (-t * self.win[k] + self.t_max).powi(2).recip() * self.cube[k];
            }
            if self.active[k] {
                let pt = bilinear_upper(x[self.p_var[k]], x[0], self.p0[k], self.tau0);
                f += pt * (self.air[k] * self.p_max[k] * self.t_max);
            }
        }
        f * self.scale
    }

    fn constraints<T: Real>(&self, x: &[T], out: &mut Vec<T>) {
        out.push(x[0] - self.tau_hi);
        out.push(-x[0]);
        let p = self.powers(x);
        let t = x[0] * self.t_max;
        let t0 = self.tau0 * self.t_max;
        for k in 0..2 {
            if !self.active[k] {
                continue;
            }
            let pv = x[self.p_var[k]];
            out.push(p[k] / self.p_max[k] - pv);
            out.push(pv - 1.0);
            if self.law == Law::NomaFin {
                let j = 1 - k;
                let sv = x[self.s_var[k]];
                let (f0, df0) = self.tan_ratio[k];
                let bound = -self.ell(t, j).exp() + 1.0 + linear(t, t0, f0, df0);
                out.push(sv - bound);
                out.push(sv - 1.0);
                out.push(-sv);
            }
        }
    }
}

pub fn solve_offload_time(
    scheme: Scheme,
    regime: Regime,
    rho: [f64; 2],
    d: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    init_t: f64,
) -> Result<OffloadTimeResult> {
    solve_offload_time_with(scheme, regime, rho, d, cfg, ues, init_t, &ScaOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn solve_offload_time_with(
    scheme: Scheme,
    regime: Regime,
    rho: [f64; 2],
    d: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    init_t: f64,
    opts: &ScaOptions,
) -> Result<OffloadTimeResult> {
    let energy_of = |t: &f64| {
        feasible_energy(scheme, regime, &Decision { rho, t: *t, d }, cfg, ues, EvalMode::Strict)
    };
    let active = [rho[0] * ues[0].task_bits > 0.0, rho[1] * ues[1].task_bits > 0.0];
    if !active[0] && !active[1] {
        // nothing is transmitted: the energy does not depend on t
        let t = init_t.clamp(0.0, cfg.t_max);
        let e = energy_of(&t).ok_or_else(|| infeasible_at(scheme, regime, rho, t, d, cfg, ues))?;
        return Ok(OffloadTimeResult {
            t,
            energy: e,
            p_breve: [0.0; 2],
            varsigma_breve: [1.0; 2],
            e_breve: [0.0; 2],
            sca_trace: vec![e],
            iterations: 0,
        });
    }
    let hi = time_upper_bound(scheme, rho, cfg, ues)
        .ok_or(ModelError::Infeasible(ConstraintId::UavCpu))?;
    let start = init_t.clamp(1e-6 * hi, hi);
    let start_e = energy_of(&start);
    let ctx = TimeContext::new(scheme, regime, rho, d, hi, cfg, ues)?;
    let run = run_sca(
        start,
        start_e,
        opts,
        |t: &f64| ctx.step(*t),
        |t| energy_of(t),
        |a, b, th| a + th * (b - a),
    )
    .ok_or_else(|| infeasible_at(scheme, regime, rho, start, d, cfg, ues))?;

    let t = run.state;
    let dec = Decision { rho, t, d };
    let pw = min_powers(scheme, regime, &dec, cfg, ues, EvalMode::Strict)?;
    let mut vs = [1.0; 2];
    if ctx.law == Law::NomaFin {
        let coef = SubproblemCoefficients::new(scheme, regime, rho, t, cfg, ues)?;
        let mut l = [0.0; 2];
        for k in 0..2 {
            if active[k] {
                l[k] = ell_f64(coef.z[k], coef.s[k], t).0;
            }
        }
        let s = true_varsigma(l);
        vs = [s[0].min(1.0), s[1].min(1.0)];
    }
    Ok(OffloadTimeResult {
        t,
        energy: run.energy,
        p_breve: pw.p,
        varsigma_breve: vs,
        e_breve: [pw.p[0] * t, pw.p[1] * t],
        sca_trace: run.trace,
        iterations: run.iterations,
    })
}

fn infeasible_at(
    scheme: Scheme,
    regime: Regime,
    rho: [f64; 2],
    t: f64,
    d: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> ModelError {
    let rep = crate::energy::check_constraints(scheme, regime, &Decision { rho, t, d }, cfg, ues);
    let id = rep.violations().next().map(|e| e.id).unwrap_or(ConstraintId::TimeBounds);
    ModelError::Infeasible(id)
}

struct TimeContext {
    law: Law,
    active: [bool; 2],
    coef: SubproblemCoefficients,
    t_max: f64,
    t_hi: f64,
    cube: [f64; 2],
    win: [f64; 2],
    hb: [f64; 2],
    ns: [f64; 2],
    air: [f64; 2],
    p_max: [f64; 2],
    e1: f64,
}

impl TimeContext {
    fn new(
        scheme: Scheme,
        regime: Regime,
        rho: [f64; 2],
        d: f64,
        t_hi: f64,
        cfg: &SystemConfig,
        ues: &[UeProfile; 2],
    ) -> Result<Self> {
        let ch = channel_gains(d, cfg)?;
        let coef = SubproblemCoefficients::new(scheme, regime, rho, t_hi, cfg, ues)?;
        let mut cube = [0.0; 2];
        let mut win = [1.0; 2];
        for k in 0..2 {
            cube[k] = cfg.kappa_u * (rho[k] * ues[k].cycles()).powi(3);
            if scheme == Scheme::Tdma && k == 0 {
                win[k] = cfg.delta;
            }
        }
        Ok(TimeContext {
            law: Law::of(scheme, regime),
            active: [rho[0] * ues[0].task_bits > 0.0, rho[1] * ues[1].task_bits > 0.0],
            coef,
            t_max: cfg.t_max,
            t_hi,
            cube,
            win,
            hb: ch.hbar,
            ns: [noise_share(scheme, 0, cfg), noise_share(scheme, 1, cfg)],
            air: [airtime_share(scheme, 0, cfg), airtime_share(scheme, 1, cfg)],
            p_max: [ues[0].p_max, ues[1].p_max],
            e1: ues[0].eps,
        })
    }

    fn step(&self, t0: f64) -> Option<f64> {
        let mut p_var = [usize::MAX; 2];
        let mut s_var = [usize::MAX; 2];
        let mut n = 1;
        for k in 0..2 {
            if self.active[k] {
                p_var[k] = n;
                n += 1;
            }
        }
        if self.law == Law::NomaFin {
            for k in 0..2 {
                if self.active[k] {
                    s_var[k] = n;
                    n += 1;
                }
            }
        }
        let mut l0 = [(0.0, 0.0); 2];
        for k in 0..2 {
            if self.active[k] {
                l0[k] = ell_f64(self.coef.z[k], self.coef.s[k], t0);
            }
        }
        let e2 = l0[1].0.exp();
        let tan_l2 = (e2, e2 * l0[1].1);
        let mut tan_ratio = [(0.0, 0.0); 2];
        for k in 0..2 {
            let j = 1 - k;
            let r = (l0[j].0 - l0[k].0).exp();
            tan_ratio[k] = (r, r * (l0[j].1 - l0[k].1));
        }
        let tau0 = t0 / self.t_max;
        let mut prog = TimeProgram {
            law: self.law,
            active: self.active,
            p_var,
            s_var,
            n,
            z: self.coef.z,
            s: self.coef.s,
            t_max: self.t_max,
            tau_hi: self.t_hi / self.t_max,
            cube: self.cube,
            win: self.win,
            hb: self.hb,
            ns: self.ns,
            air: self.air,
            p_max: self.p_max,
            e1: self.e1,
            tau0,
            p0: [0.0; 2],
            tan_l2,
            tan_ratio,
            scale: 1.0,
        };
        let mut x0 = vec![0.0; n];
        x0[0] = tau0;
        if self.law == Law::NomaFin {
            let s = true_varsigma([l0[0].0, l0[1].0]);
            for k in 0..2 {
                if self.active[k] {
                    x0[s_var[k]] = if s[k] > 0.0 { (s[k] * (1.0 - 1e-9)).min(1.0 - 1e-12) } else { 0.5 };
                }
            }
        }
        // expand the bilinear bound at the smallest admissible power slack
        let p = prog.powers(&x0);
        for k in 0..2 {
            if self.active[k] {
                let pv = p[k] / self.p_max[k];
                prog.p0[k] = pv;
                x0[p_var[k]] = pv * (1.0 + 1e-9) + 1e-15;
            }
        }
        let f0 = prog.objective(&x0);
        prog.scale = if f0.is_finite() && f0 > 0.0 { 1.0 / f0 } else { 1.0 };
        let sol = minimize(&prog, &x0, &BarrierOptions::default()).ok()?;
        Some((sol.x[0] * self.t_max).min(self.t_hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(b: f64) -> (SystemConfig, [UeProfile; 2]) {
        let cfg = SystemConfig {
            bandwidth: b,
            ..SystemConfig::default()
        };
        (cfg, [UeProfile::default(), UeProfile::default()])
    }

    fn grid_min(scheme: Scheme, regime: Regime, rho: [f64; 2], d: f64, cfg: &SystemConfig, ues: &[UeProfile; 2], step: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        let n = (cfg.t_max / step).round() as usize;
        for i in 0..=n {
            let t = i as f64 * step;
            if let Some(e) = feasible_energy(scheme, regime, &Decision { rho, t, d }, cfg, ues, EvalMode::Strict) {
                if e < best.0 {
                    best = (e, t);
                }
            }
        }
        best
    }

    #[test]
    fn tdma_infinite_matches_grid() {
        let (cfg, ues) = setup(3e6);
        let rho = [0.5, 0.5];
        let r = solve_offload_time(Scheme::Tdma, Regime::Infinite, rho, 25.0, &cfg, &ues, 5e-4).unwrap();
        let (g, _) = grid_min(Scheme::Tdma, Regime::Infinite, rho, 25.0, &cfg, &ues, 1e-6);
        assert!(r.energy <= g * 1.01 && r.energy >= g * 0.99, "{} vs {}", r.energy, g);
    }

    #[test]
    fn all_laws_close_to_grid() {
        let (cfg, ues) = setup(3e6);
        for scheme in Scheme::ALL {
            for regime in Regime::ALL {
                let rho = [0.45, 0.5];
                let d = if scheme == Scheme::Noma { 30.0 } else { 50.0 };
                let r = solve_offload_time(scheme, regime, rho, d, &cfg, &ues, 5e-4).unwrap();
                let (g, _) = grid_min(scheme, regime, rho, d, &cfg, &ues, 1e-6);
                assert!(r.energy <= g * (1.0 + 1e-3), "{scheme} {regime}: {} vs {}", r.energy, g);
                for w in r.sca_trace.windows(2) {
                    assert!(w[1] <= w[0]);
                }
            }
        }
    }

    #[test]
    fn zero_offload_keeps_time() {
        let (cfg, _) = setup(3e6);
        let ue = UeProfile { task_bits: 800.0, ..UeProfile::default() };
        let ues = [ue.clone(), ue];
        let r = solve_offload_time(Scheme::Noma, Regime::Finite, [0.0, 0.0], 20.0, &cfg, &ues, 4e-4).unwrap();
        assert_eq!(r.t, 4e-4);
        assert_eq!(r.sca_trace.len(), 1);
    }

    #[test]
    fn time_bound_respects_uav_cap() {
        let cfg = SystemConfig { f_u_max: 2e9, ..SystemConfig::default() };
        let ues = [UeProfile::default(), UeProfile::default()];
        let hi = time_upper_bound(Scheme::Fdma, [0.5, 0.5], &cfg, &ues).unwrap();
        assert!((hi - (1e-3 - 1.2e6 / 2e9)).abs() < 1e-15);
        let hi = time_upper_bound(Scheme::Tdma, [0.5, 0.5], &cfg, &ues).unwrap();
        let f = 6e5 / (1e-3 - 0.5 * hi) + 6e5 / (1e-3 - hi);
        assert!((f - 2e9).abs() < 1e-3 * 2e9);
        assert!(time_upper_bound(Scheme::Fdma, [1.0, 1.0], &SystemConfig { f_u_max: 1e9, ..cfg }, &ues).is_none());
    }
}
