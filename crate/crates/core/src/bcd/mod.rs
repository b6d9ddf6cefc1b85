//! Block coordinate descent over task split, offloading time and UAV
//! location, with SCA inner loops for the non-convex blocks.

pub mod location;
pub mod offload_time;
pub mod surrogate;
pub mod task_split;

use std::f64::consts::LN_2;

use crate::energy::{check_constraints, check_constraints_in, total_energy, EnergyBreakdown};
use crate::error::{ModelError, Result};
use crate::model::{inverse_q, remote_window, validate_all, Decision, Regime, Scheme, SystemConfig, UeProfile};
use crate::power::{blocklength_share, sic_margin, EvalMode};

pub use location::{solve_uav_location, solve_uav_location_in, LocationProblem};
pub use offload_time::{solve_offload_time, time_upper_bound, OffloadTimeResult};
pub use task_split::{solve_task_split, TaskSplitResult};

/// Coefficients of the reduced problems. With `N_k` the blocklength of UE k:
/// `ln(1 + Y_k) = omega_k * rho_k + v_k = z_k / t + s_k / sqrt(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubproblemCoefficients {
    /// Remote-computing energy per unit `rho_k^3`.
    pub zeta: [f64; 2],
    /// Local-computing energy per unit `(1 - rho_k)^3`.
    pub xi: [f64; 2],
    pub omega: [f64; 2],
    pub v: [f64; 2],
    pub z: [f64; 2],
    pub s: [f64; 2],
}

impl SubproblemCoefficients {
    pub fn new(
        scheme: Scheme,
        regime: Regime,
        rho: [f64; 2],
        t: f64,
        cfg: &SystemConfig,
        ues: &[UeProfile; 2],
    ) -> Result<Self> {
        let mut c = SubproblemCoefficients::default();
        for k in 0..2 {
            let ue = &ues[k];
            let cyc3 = ue.cycles().powi(3);
            let w = remote_window(scheme, k, t, cfg);
            c.zeta[k] = cfg.kappa_u * cyc3 / (w * w);
            c.xi[k] = ue.kappa * cyc3 / (cfg.t_max * cfg.t_max);
            let share_b = blocklength_share(scheme, k, cfg) * cfg.bandwidth;
            let n = share_b * t;
            let (rate_scale, disp) = match regime {
                Regime::Infinite => (1.0, 0.0),
                Regime::Finite => (1.0 / (1.0 - ue.eps), cfg.dispersion.sqrt() * inverse_q(ue.eps)?),
            };
            c.omega[k] = LN_2 * ue.task_bits * rate_scale / n;
            c.v[k] = disp / n.sqrt();
            c.z[k] = LN_2 * rho[k] * ue.task_bits * rate_scale / share_b;
            c.s[k] = disp / share_b.sqrt();
        }
        Ok(c)
    }
}

/// Slack variables of the reformulated subproblems at the last accepted point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackState {
    pub lambda_tilde: [f64; 2],
    pub mu_tilde: [f64; 2],
    pub p_breve: [f64; 2],
    pub varsigma_breve: [f64; 2],
    pub e_breve: [f64; 2],
}

impl Default for SlackState {
    fn default() -> Self {
        SlackState {
            lambda_tilde: [f64::NEG_INFINITY; 2],
            mu_tilde: [1.0; 2],
            p_breve: [0.0; 2],
            varsigma_breve: [1.0; 2],
            e_breve: [0.0; 2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            max_iter: 50,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blocks {
    pub rho: bool,
    pub time: bool,
    pub location: bool,
}

impl Blocks {
    pub const ALL: Blocks = Blocks {
        rho: true,
        time: true,
        location: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdOptions {
    pub max_outer: usize,
    /// Relative stopping accuracy; `None` uses the configuration's `sigma_conv`.
    pub sigma: Option<f64>,
    pub blocks: Blocks,
    pub inner: ScaOptions,
}

impl Default for BcdOptions {
    fn default() -> Self {
        BcdOptions {
            max_outer: 30,
            sigma: None,
            blocks: Blocks::ALL,
            inner: ScaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub decision: Decision,
    pub energy: EnergyBreakdown,
    /// Objective at the start and after every outer iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub slack: SlackState,
}

/// Energy of a decision that passes every constraint in `mode`, else `None`.
pub(crate) fn feasible_energy(
    scheme: Scheme,
    regime: Regime,
    dec: &Decision,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    mode: EvalMode,
) -> Option<f64> {
    if !check_constraints_in(scheme, regime, dec, cfg, ues, mode).is_feasible() {
        return None;
    }
    total_energy(scheme, regime, dec, cfg, ues, mode)
        .ok()
        .map(|e| e.total)
        .filter(|e| e.is_finite())
}

pub(crate) struct ScaRun<S> {
    pub state: S,
    pub energy: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Generic SCA driver. Each surrogate solution is accepted only if the true
/// objective does not increase; otherwise the step is shortened towards the
/// current point.
pub(crate) fn run_sca<S: Clone>(
    start: S,
    start_energy: Option<f64>,
    opts: &ScaOptions,
    mut solve: impl FnMut(&S) -> Option<S>,
    energy: impl Fn(&S) -> Option<f64>,
    blend: impl Fn(&S, &S, f64) -> S,
) -> Option<ScaRun<S>> {
    let mut cur = start;
    let mut cur_e = start_energy;
    let mut trace: Vec<f64> = cur_e.into_iter().collect();
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        let Some(cand) = solve(&cur) else { break };
        iterations += 1;
        let accepted = match (cur_e, energy(&cand)) {
            (None, Some(e)) => Some((cand, e)),
            (Some(c), Some(e)) if e <= c => Some((cand, e)),
            (Some(c), _) => (1..=30).find_map(|i| {
                let b = blend(&cur, &cand, 0.5f64.powi(i));
                energy(&b).filter(|&e| e <= c).map(|e| (b, e))
            }),
            (None, None) => None,
        };
        let Some((next, e)) = accepted else { break };
        let rel = cur_e.map_or(f64::INFINITY, |c| (c - e).abs() / e.abs().max(f64::MIN_POSITIVE));
        cur = next;
        cur_e = Some(e);
        trace.push(e);
        if rel <= opts.rel_tol {
            break;
        }
    }
    cur_e.map(|energy| ScaRun {
        state: cur,
        energy,
        trace,
        iterations,
    })
}

pub fn bcd_solve(
    scheme: Scheme,
    regime: Regime,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    init: &Decision,
) -> Result<OptResult> {
    bcd_solve_with(scheme, regime, cfg, ues, init, &BcdOptions::default())
}

pub fn bcd_solve_with(
    scheme: Scheme,
    regime: Regime,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    init: &Decision,
    opts: &BcdOptions,
) -> Result<OptResult> {
    validate_all(cfg, ues)?;
    let rep = check_constraints(scheme, regime, init, cfg, ues);
    if let Some(v) = rep.violations().next() {
        return Err(ModelError::Infeasible(v.id));
    }
    let sigma = opts.sigma.unwrap_or(cfg.sigma_conv);
    let mut dec = *init;
    let mut e = total_energy(scheme, regime, &dec, cfg, ues, EvalMode::Strict)?.total;
    let mut trace = vec![e];
    let mut slack = SlackState::default();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_outer {
        let prev = e;
        iterations += 1;
        if opts.blocks.rho {
            if let Ok(r) = task_split::solve_task_split_with(
                scheme, regime, dec.t, dec.d, cfg, ues, dec.rho, &opts.inner,
            ) {
                if r.energy <= e {
                    dec.rho = r.rho;
                    e = r.energy;
                    slack.mu_tilde = r.mu_tilde;
                    slack.lambda_tilde = r.lambda_tilde;
                }
            }
        }
        if opts.blocks.time {
            if let Ok(r) = offload_time::solve_offload_time_with(
                scheme, regime, dec.rho, dec.d, cfg, ues, dec.t, &opts.inner,
            ) {
                if r.energy <= e {
                    dec.t = r.t;
                    e = r.energy;
                    slack.p_breve = r.p_breve;
                    slack.varsigma_breve = r.varsigma_breve;
                    slack.e_breve = r.e_breve;
                }
            }
        }
        if opts.blocks.location {
            if let Ok(d) = solve_uav_location(scheme, regime, dec.rho, dec.t, cfg, ues) {
                let cand = Decision { d, ..dec };
                if let Some(ec) = feasible_energy(scheme, regime, &cand, cfg, ues, EvalMode::Strict) {
                    if ec <= e {
                        dec = cand;
                        e = ec;
                    }
                }
            }
        }
        if opts.blocks.rho && opts.blocks.time && scheme == Scheme::Noma && regime == Regime::Finite {
            if let Some((cand, ec)) = sic_boundary_step(&dec, e, cfg, ues) {
                dec = cand;
                e = ec;
            }
        }
        trace.push(e);
        if (prev - e).abs() <= sigma * e.abs() {
            converged = true;
            break;
        }
    }
    let energy = total_energy(scheme, regime, &dec, cfg, ues, EvalMode::Strict)?;
    Ok(OptResult {
        decision: dec,
        energy,
        trace,
        iterations,
        converged,
        slack,
    })
}

/// Margin kept by points placed on the SIC boundary.
const SIC_TARGET: f64 = 1e-9;

/// Smallest offloading time with SIC margin `SIC_TARGET`.
fn sic_boundary_time(rho: [f64; 2], hi: f64, cfg: &SystemConfig, ues: &[UeProfile; 2]) -> Option<f64> {
    let margin = |t: f64| sic_margin(rho, t, cfg, ues).unwrap_or(f64::NEG_INFINITY);
    if margin(hi) < SIC_TARGET {
        return None;
    }
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if margin(m) >= SIC_TARGET {
            b = m;
        } else {
            a = m;
        }
    }
    Some(b)
}

/// Joint move for NOMA with finite blocklength. Near the SIC boundary the
/// task-split and time blocks pin each other, so the split is scaled along
/// its ray with the best `t` above the boundary and `d` re-solved. Returns the
/// best point found if it lowers the energy.
fn sic_boundary_step(
    dec: &Decision,
    e: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> Option<(Decision, f64)> {
    let (scheme, regime) = (Scheme::Noma, Regime::Finite);
    if !dec.rho.iter().all(|&r| r > 0.0) {
        return None;
    }
    let r0 = dec.rho;
    let floor = [ues[0].rho_floor(cfg.t_max), ues[1].rho_floor(cfg.t_max)];
    let s_lo = (floor[0] / r0[0]).max(floor[1] / r0[1]);
    let s_hi = (1.0 / r0[0]).min(1.0 / r0[1]);
    if !(s_lo < s_hi) {
        return None;
    }
    let at = |rho: [f64; 2], t: f64| -> Option<(Decision, f64)> {
        let d = solve_uav_location(scheme, regime, rho, t, cfg, ues).ok()?;
        let cand = Decision { rho, t, d };
        feasible_energy(scheme, regime, &cand, cfg, ues, EvalMode::Strict).map(|e| (cand, e))
    };
    let point = |s: f64| -> Option<(Decision, f64)> {
        let rho = [(s * r0[0]).min(1.0), (s * r0[1]).min(1.0)];
        let hi = time_upper_bound(scheme, rho, cfg, ues)?;
        let lo = sic_boundary_time(rho, hi, cfg, ues)?;
        let t = location::golden_section(
            |t| at(rho, t).map_or(f64::INFINITY, |p| p.1),
            lo,
            hi,
            1e-6 * (hi - lo),
        );
        at(rho, t)
    };
    let f = |s: f64| point(s).map_or(f64::INFINITY, |p| p.1);
    let n = 24;
    let grid: Vec<f64> = (0..=n).map(|i| s_lo + (s_hi - s_lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&s| f(s)).collect();
    let (i, _) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(n)];
    let s = location::golden_section(f, lo, hi, 1e-6 * (s_hi - s_lo));
    let best = [s, grid[i]]
        .into_iter()
        .filter_map(point)
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    (best.1 < e).then_some(best)
}

/// Starting point for the optimiser: the midpoint plan `rho = 0.5`,
/// `t = T_max / 2`, `d = D / 4`, then pure local computing, then a coarse scan
/// for any feasible plan.
pub fn default_init(
    scheme: Scheme,
    regime: Regime,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> Result<Decision> {
    let mid = Decision::new(0.5, 0.5, 0.5 * cfg.t_max, 0.25 * cfg.ue_distance);
    let idle = Decision::new(0.0, 0.0, 0.0, 0.25 * cfg.ue_distance);
    for dec in [mid, idle] {
        if check_constraints(scheme, regime, &dec, cfg, ues).is_feasible() {
            return Ok(dec);
        }
    }
    feasible_init(scheme, regime, cfg, ues, None, None)
}

/// First feasible plan of a deterministic scan, with the task split and/or the
/// offloading time held at the given values. Tries `d = D / 4` and then the
/// location solver at each `(rho, t)`.
pub fn feasible_init(
    scheme: Scheme,
    regime: Regime,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    rho: Option<[f64; 2]>,
    t: Option<f64>,
) -> Result<Decision> {
    let ok = |d: &Decision| check_constraints(scheme, regime, d, cfg, ues).is_feasible();
    let floor = [ues[0].rho_floor(cfg.t_max), ues[1].rho_floor(cfg.t_max)];
    let rhos: Vec<[f64; 2]> = match rho {
        Some(r) => vec![r],
        None => {
            let mut v = vec![[0.5f64.max(floor[0]), 0.5f64.max(floor[1])]];
            v.extend((1..=10).map(|i| {
                let a = i as f64 / 10.0;
                [floor[0] + a * (1.0 - floor[0]), floor[1] + a * (1.0 - floor[1])]
            }));
            v.push(floor);
            v
        }
    };
    // outward from the middle of the window
    let ts: Vec<f64> = match t {
        Some(t) => vec![t],
        None => (1..100)
            .map(|i| if i % 2 == 1 { 50 + i / 2 } else { 50 - i / 2 })
            .map(|i| i as f64 * cfg.t_max / 100.0)
            .collect(),
    };
    for &rho in &rhos {
        for &t in &ts {
            let dec = Decision { rho, t, d: 0.25 * cfg.ue_distance };
            if ok(&dec) {
                return Ok(dec);
            }
            if let Ok(d) = solve_uav_location(scheme, regime, rho, t, cfg, ues) {
                let dec = Decision { rho, t, d };
                if ok(&dec) {
                    return Ok(dec);
                }
            }
        }
    }
    let probe = Decision {
        rho: rhos[0],
        t: ts[ts.len() / 2],
        d: 0.25 * cfg.ue_distance,
    };
    let rep = check_constraints(scheme, regime, &probe, cfg, ues);
    let id = rep.violations().next().map(|v| v.id).unwrap_or(crate::energy::ConstraintId::UavCpu);
    Err(ModelError::Infeasible(id))
}

/// `default_init` followed by `bcd_solve`.
pub fn optimize(
    scheme: Scheme,
    regime: Regime,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> Result<OptResult> {
    let init = default_init(scheme, regime, cfg, ues)?;
    bcd_solve(scheme, regime, cfg, ues, &init)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_reproduce_thresholds() {
        let cfg = SystemConfig::default();
        let ues = [UeProfile::default(), UeProfile { task_bits: 900.0, eps: 1e-3, ..UeProfile::default() }];
        let rho = [0.4, 0.7];
        let t = 4e-4;
        for scheme in Scheme::ALL {
            for regime in Regime::ALL {
                let c = SubproblemCoefficients::new(scheme, regime, rho, t, &cfg, &ues).unwrap();
                let l = crate::power::log_snr_factors(scheme, regime, rho, t, &cfg, &ues).unwrap();
                for k in 0..2 {
                    let a = c.omega[k] * rho[k] + c.v[k];
                    let b = c.z[k] / t + c.s[k] / t.sqrt();
                    assert!((a - l[k]).abs() < 1e-12 * l[k]);
                    assert!((b - l[k]).abs() < 1e-12 * l[k]);
                }
            }
        }
    }

    #[test]
    fn default_init_is_midpoint_when_feasible() {
        let cfg = SystemConfig::default();
        let ues = [UeProfile::default(), UeProfile::default()];
        let d = default_init(Scheme::Noma, Regime::Finite, &cfg, &ues).unwrap();
        assert_eq!(d, Decision::new(0.5, 0.5, 5e-4, 25.0));
    }

    #[test]
    fn default_init_falls_back_for_large_tasks() {
        let cfg = SystemConfig::default();
        let ue = UeProfile { task_bits: 2400.0, ..UeProfile::default() };
        let ues = [ue.clone(), ue];
        for scheme in Scheme::ALL {
            for regime in Regime::ALL {
                let d = default_init(scheme, regime, &cfg, &ues).unwrap();
                assert!(check_constraints(scheme, regime, &d, &cfg, &ues).is_feasible());
            }
        }
    }

    #[test]
    fn bcd_trace_is_monotone() {
        let cfg = SystemConfig::default();
        let ues = [UeProfile::default(), UeProfile::default()];
        for scheme in Scheme::ALL {
            for regime in Regime::ALL {
                let r = optimize(scheme, regime, &cfg, &ues).unwrap();
                for w in r.trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12, "{scheme} {regime}: {:?}", r.trace);
                }
                assert!(check_constraints(scheme, regime, &r.decision, &cfg, &ues).is_feasible());
            }
        }
    }

    #[test]
    fn infeasible_init_rejected() {
        let cfg = SystemConfig::default();
        let ues = [UeProfile::default(), UeProfile::default()];
        let bad = Decision::new(0.0, 0.0, 0.0, 25.0);
        let err = bcd_solve(Scheme::Fdma, Regime::Infinite, &cfg, &ues, &bad).unwrap_err();
        assert!(matches!(err, ModelError::Infeasible(_)));
    }
}
