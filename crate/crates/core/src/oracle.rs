//! Exhaustive grid search over the task split and offloading time, used as the
//! global benchmark and as brute-force oracles for the subproblem solvers.

use rayon::prelude::*;

use crate::bcd::location::LocationProblem;
use crate::bcd::{feasible_energy, OptResult, SlackState};
use crate::energy::{check_constraints_in, total_energy, ConstraintId};
use crate::error::{domain, ModelError, Result};
use crate::model::{validate_all, Decision, Regime, Scheme, SystemConfig, UeProfile};
use crate::power::EvalMode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub rho_step: f64,
    pub t_step: f64,
    /// Step of a d grid used instead of golden-section search when the
    /// location has no closed form. `None` uses the location solver.
    pub d_step: Option<f64>,
    pub eval_mode: EvalMode,
}

impl GridSpec {
    pub fn for_config(cfg: &SystemConfig) -> Self {
        GridSpec {
            rho_step: 0.02,
            t_step: cfg.t_max / 100.0,
            d_step: None,
            eval_mode: EvalMode::Strict,
        }
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if !(self.rho_step > 0.0 && self.rho_step <= 1.0) {
            return Err(domain("rho_step", self.rho_step, "(0, 1]"));
        }
        if !(self.t_step > 0.0 && self.t_step <= cfg.t_max) {
            return Err(domain("t_step", self.t_step, "(0, T_max]"));
        }
        if let Some(s) = self.d_step {
            if !(s > 0.0 && s <= cfg.ue_distance) {
                return Err(domain("d_step", s, "(0, D]"));
            }
        }
        Ok(())
    }
}

/// Points `0, step, 2 step, ...` up to `hi`, with `hi` itself appended when
/// the step does not divide the range.
pub(crate) fn grid_points(hi: f64, step: f64) -> Vec<f64> {
    let n = (hi / step * (1.0 + 1e-12)).floor() as usize;
    let mut v: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(hi)).collect();
    if hi - v[n] > 1e-12 * hi {
        v.push(hi);
    }
    v
}

fn locate(
    scheme: Scheme,
    regime: Regime,
    rho: [f64; 2],
    t: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    spec: &GridSpec,
) -> Option<f64> {
    let lp = LocationProblem::new(scheme, regime, rho, t, cfg, ues, spec.eval_mode).ok()?;
    if lp.closed_form {
        return Some(lp.closed_form(cfg));
    }
    match spec.d_step {
        None => Some(lp.search(cfg)),
        Some(step) => {
            let mut best = (f64::INFINITY, lp.lo);
            for x in grid_points(lp.hi - lp.lo, step) {
                let d = lp.lo + x;
                let f = lp.objective(d, cfg);
                if f < best.0 {
                    best = (f, d);
                }
            }
            Some(best.1)
        }
    }
}

fn evaluate(
    scheme: Scheme,
    regime: Regime,
    rho: [f64; 2],
    t: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    spec: &GridSpec,
) -> Option<(f64, Decision)> {
    let d = if rho == [0.0, 0.0] {
        0.25 * cfg.ue_distance
    } else {
        locate(scheme, regime, rho, t, cfg, ues, spec)?
    };
    let dec = Decision { rho, t, d };
    feasible_energy(scheme, regime, &dec, cfg, ues, spec.eval_mode).map(|e| (e, dec))
}

type Best = Option<(f64, usize, Decision)>;

fn better(a: Best, b: Best) -> Best {
    match (a, b) {
        (Some(x), Some(y)) => Some(if (y.0, y.1) < (x.0, x.1) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn finish(
    scheme: Scheme,
    regime: Regime,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    spec: &GridSpec,
    best: Best,
    probe: Decision,
) -> Result<OptResult> {
    let Some((e, _, dec)) = best else {
        let rep = check_constraints_in(scheme, regime, &probe, cfg, ues, spec.eval_mode);
        let id = rep.violations().next().map(|v| v.id).unwrap_or(ConstraintId::UavCpu);
        return Err(ModelError::Infeasible(id));
    };
    Ok(OptResult {
        decision: dec,
        energy: total_energy(scheme, regime, &dec, cfg, ues, spec.eval_mode)?,
        trace: vec![e],
        iterations: 0,
        converged: true,
        slack: SlackState::default(),
    })
}

/// Minimum-energy feasible point of the `(rho1, rho2, t)` grid, with the UAV
/// location resolved per point. Ties go to the earliest point in scan order
/// (`rho1` outer, then `rho2`, then `t`).
pub fn grid_search(
    scheme: Scheme,
    regime: Regime,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    spec: &GridSpec,
) -> Result<OptResult> {
    validate_all(cfg, ues)?;
    spec.validate(cfg)?;
    let rhos = grid_points(1.0, spec.rho_step);
    let ts = grid_points(cfg.t_max, spec.t_step);
    let (nr, nt) = (rhos.len(), ts.len());
    let best = (0..nr)
        .into_par_iter()
        .map(|i| {
            let mut best: Best = None;
            for (j, &r2) in rhos.iter().enumerate() {
                for (l, &t) in ts.iter().enumerate() {
                    if let Some((e, dec)) = evaluate(scheme, regime, [rhos[i], r2], t, cfg, ues, spec) {
                        best = better(best, Some((e, (i * nr + j) * nt + l, dec)));
                    }
                }
            }
            best
        })
        .reduce(|| None, better);
    let probe = Decision::new(0.5, 0.5, 0.5 * cfg.t_max, 0.25 * cfg.ue_distance);
    finish(scheme, regime, cfg, ues, spec, best, probe)
}

/// Which block a subproblem oracle enumerates; the other variables stay frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Subproblem {
    /// Grid over `(rho1, rho2)` at fixed `t` and `d`.
    TaskSplit { t: f64, d: f64 },
    /// Grid over `t` at fixed `rho` and `d`.
    Time { rho: [f64; 2], d: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub decision: Decision,
    pub energy: f64,
}

/// Brute-force minimum of one subproblem at the given step.
pub fn subproblem_oracle(
    kind: Subproblem,
    scheme: Scheme,
    regime: Regime,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    step: f64,
    mode: EvalMode,
) -> Result<OracleResult> {
    validate_all(cfg, ues)?;
    let eval = |dec: Decision| feasible_energy(scheme, regime, &dec, cfg, ues, mode).map(|e| (e, dec));
    let (best, probe): (Best, Decision) = match kind {
        Subproblem::TaskSplit { t, d } => {
            if !(step > 0.0 && step <= 1.0) {
                return Err(domain("step", step, "(0, 1]"));
            }
            let rhos = grid_points(1.0, step);
            let n = rhos.len();
            let best = (0..n)
                .into_par_iter()
                .map(|i| {
                    rhos.iter().enumerate().fold(None, |b, (j, &r2)| {
                        better(b, eval(Decision { rho: [rhos[i], r2], t, d }).map(|(e, x)| (e, i * n + j, x)))
                    })
                })
                .reduce(|| None, better);
            (best, Decision { rho: [0.5, 0.5], t, d })
        }
        Subproblem::Time { rho, d } => {
            if !(step > 0.0 && step <= cfg.t_max) {
                return Err(domain("step", step, "(0, T_max]"));
            }
            let best = grid_points(cfg.t_max, step)
                .into_iter()
                .enumerate()
                .fold(None, |b, (i, t)| better(b, eval(Decision { rho, t, d }).map(|(e, x)| (e, i, x))));
            (best, Decision { rho, t: 0.5 * cfg.t_max, d })
        }
    };
    match best {
        Some((energy, _, decision)) => Ok(OracleResult { decision, energy }),
        None => {
            let rep = check_constraints_in(scheme, regime, &probe, cfg, ues, mode);
            let id = rep.violations().next().map(|v| v.id).unwrap_or(ConstraintId::UavCpu);
            Err(ModelError::Infeasible(id))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::check_constraints;

    fn small() -> (SystemConfig, [UeProfile; 2]) {
        let ue = UeProfile { task_bits: 800.0, ..UeProfile::default() };
        (SystemConfig::default(), [ue.clone(), ue])
    }

    #[test]
    fn grid_points_cover_range() {
        assert_eq!(grid_points(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(grid_points(1.0, 0.4), vec![0.0, 0.4, 0.8, 1.0]);
        assert_eq!(grid_points(1.0, 0.02).len(), 51);
        assert_eq!(grid_points(1.0, 2.0), vec![0.0, 1.0]);
    }

    #[test]
    fn single_point_grid_is_pure_local() {
        let (cfg, ues) = small();
        let spec = GridSpec {
            rho_step: 1.0,
            t_step: cfg.t_max,
            d_step: None,
            eval_mode: EvalMode::Strict,
        };
        // rho in {0, 1}, t in {0, T}; only the all-local point is feasible
        let r = grid_search(Scheme::Fdma, Regime::Finite, &cfg, &ues, &spec).unwrap();
        assert_eq!(r.decision.rho, [0.0, 0.0]);
        assert_eq!(r.decision.t, 0.0);
        let local = 2.0 * 1e-28 * 1e-3 * (0.8e6 / 1e-3f64).powi(3);
        assert!((r.energy.total - local).abs() < 1e-12 * local);
    }

    #[test]
    fn coarse_grid_result_is_feasible() {
        let cfg = SystemConfig::default();
        let ues = [UeProfile::default(), UeProfile::default()];
        let spec = GridSpec {
            rho_step: 0.1,
            t_step: cfg.t_max / 20.0,
            ..GridSpec::for_config(&cfg)
        };
        for scheme in Scheme::ALL {
            for regime in Regime::ALL {
                let r = grid_search(scheme, regime, &cfg, &ues, &spec).unwrap();
                assert!(check_constraints(scheme, regime, &r.decision, &cfg, &ues).is_feasible());
                let finer = GridSpec {
                    rho_step: 0.05,
                    t_step: cfg.t_max / 40.0,
                    ..spec
                };
                let f = grid_search(scheme, regime, &cfg, &ues, &finer).unwrap();
                assert!(f.energy.total <= r.energy.total);
            }
        }
    }

    #[test]
    fn d_grid_close_to_search() {
        let cfg = SystemConfig::default();
        let ues = [UeProfile::default(), UeProfile::default()];
        let spec = GridSpec {
            rho_step: 0.1,
            t_step: cfg.t_max / 20.0,
            ..GridSpec::for_config(&cfg)
        };
        let a = grid_search(Scheme::Tdma, Regime::Finite, &cfg, &ues, &spec).unwrap();
        let b = grid_search(Scheme::Tdma, Regime::Finite, &cfg, &ues, &GridSpec { d_step: Some(0.01), ..spec }).unwrap();
        assert!((a.energy.total - b.energy.total).abs() < 1e-6 * a.energy.total);
    }

    #[test]
    fn task_split_oracle_symmetric() {
        let (cfg, ues) = (SystemConfig::default(), [UeProfile::default(), UeProfile::default()]);
        let r = subproblem_oracle(
            Subproblem::TaskSplit { t: 5e-4, d: 50.0 },
            Scheme::Fdma,
            Regime::Finite,
            &cfg,
            &ues,
            0.01,
            EvalMode::Strict,
        )
        .unwrap();
        assert_eq!(r.decision.rho[0], r.decision.rho[1]);
    }

    #[test]
    fn time_oracle_without_offloading() {
        let (cfg, ues) = small();
        let r = subproblem_oracle(
            Subproblem::Time { rho: [0.0, 0.0], d: 25.0 },
            Scheme::Noma,
            Regime::Finite,
            &cfg,
            &ues,
            cfg.t_max / 100.0,
            EvalMode::Strict,
        )
        .unwrap();
        assert_eq!(r.decision.t, 0.0);
        let local = 2.0 * 1e-28 * 1e-3 * (0.8e6 / 1e-3f64).powi(3);
        assert!((r.energy - local).abs() < 1e-12 * local);
    }

    #[test]
    fn bad_spec_rejected() {
        let cfg = SystemConfig::default();
        let ues = [UeProfile::default(), UeProfile::default()];
        let spec = GridSpec { rho_step: 0.0, ..GridSpec::for_config(&cfg) };
        assert!(matches!(
            grid_search(Scheme::Noma, Regime::Finite, &cfg, &ues, &spec),
            Err(ModelError::Domain { .. })
        ));
    }
}
