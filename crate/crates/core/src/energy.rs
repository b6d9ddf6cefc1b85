//! Total MEC-related energy and constraint evaluation.

use std::fmt;

use crate::error::Result;
use crate::model::{
    computation_energies, cpu_frequencies, Decision, Regime, Scheme, SystemConfig, UeProfile,
};
use crate::power::{airtime_share, min_powers, sic_margin, EvalMode, PowerSolution, SIC_GUARD};

/// Relative tolerance used when deciding whether a constraint holds.
pub const FEAS_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UeEnergy {
    pub local: f64,
    pub remote: f64,
    pub offload: f64,
}

impl UeEnergy {
    pub fn sum(&self) -> f64 {
        self.local + self.remote + self.offload
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub ue: [UeEnergy; 2],
    pub total: f64,
    pub powers: PowerSolution,
    /// NOMA finite-blocklength point evaluated with success-branch powers only.
    pub success_only: bool,
}

pub fn total_energy(
    scheme: Scheme,
    regime: Regime,
    dec: &Decision,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    mode: EvalMode,
) -> Result<EnergyBreakdown> {
    dec.check_bounds(cfg)?;
    let comp = computation_energies(scheme, dec.rho, dec.t, cfg, ues)?;
    let powers = min_powers(scheme, regime, dec, cfg, ues, mode)?;
    let mut ue = [UeEnergy::default(); 2];
    for k in 0..2 {
        ue[k] = UeEnergy {
            local: comp[k].local,
            remote: comp[k].remote,
            offload: airtime_share(scheme, k, cfg) * powers.p[k] * dec.t,
        };
    }
    Ok(EnergyBreakdown {
        ue,
        total: ue[0].sum() + ue[1].sum(),
        powers,
        success_only: powers.success_only,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintId {
    UavCpu,
    LocalCpu(usize),
    Power(usize),
    RhoBounds(usize),
    TimeBounds,
    LocationBounds,
    NomaOrder,
    SicMargin,
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintId::UavCpu => write!(f, "UAV CPU cap"),
            ConstraintId::LocalCpu(k) => write!(f, "UE {} local CPU cap", k + 1),
            ConstraintId::Power(k) => write!(f, "UE {} power cap", k + 1),
            ConstraintId::RhoBounds(k) => write!(f, "UE {} offload share bounds", k + 1),
            ConstraintId::TimeBounds => write!(f, "offloading time bounds"),
            ConstraintId::LocationBounds => write!(f, "UAV location bounds"),
            ConstraintId::NomaOrder => write!(f, "NOMA decoding order (d <= D/2)"),
            ConstraintId::SicMargin => write!(f, "SIC margin (Y1*Y2 < 1)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintEntry {
    pub id: ConstraintId,
    pub satisfied: bool,
    /// Distance to the bound in the constraint's own unit; negative when violated.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub entries: Vec<ConstraintEntry>,
    pub mode: EvalMode,
}

impl ConstraintReport {
    /// True when every entry that matters in the report's mode is satisfied.
    /// Success-only reports ignore the SIC-margin entry.
    pub fn is_feasible(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConstraintEntry> + '_ {
        self.entries.iter().filter(move |e| {
            !e.satisfied && !(self.mode == EvalMode::SuccessOnly && e.id == ConstraintId::SicMargin)
        })
    }

    pub fn get(&self, id: ConstraintId) -> Option<&ConstraintEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    fn push(&mut self, id: ConstraintId, slack: f64, scale: f64) {
        let satisfied = slack.is_finite() && slack >= -FEAS_RTOL * scale.abs().max(f64::MIN_POSITIVE);
        self.entries.push(ConstraintEntry { id, satisfied, slack });
    }

    /// `lo <= x <= hi`; slack is the distance to the nearer bound.
    fn push_interval(&mut self, id: ConstraintId, x: f64, lo: f64, hi: f64, scale: f64) {
        self.push(id, (x - lo).min(hi - x), scale);
    }
}

pub fn check_constraints(
    scheme: Scheme,
    regime: Regime,
    dec: &Decision,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> ConstraintReport {
    check_constraints_in(scheme, regime, dec, cfg, ues, EvalMode::Strict)
}

/// Constraint report in the given evaluation mode. Power caps use the same
/// powers that `total_energy` would charge in that mode.
pub fn check_constraints_in(
    scheme: Scheme,
    regime: Regime,
    dec: &Decision,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    mode: EvalMode,
) -> ConstraintReport {
    let mut r = ConstraintReport {
        entries: Vec::with_capacity(12),
        mode,
    };
    for k in 0..2 {
        r.push_interval(ConstraintId::RhoBounds(k), dec.rho[k], 0.0, 1.0, 1.0);
    }
    let t_hi = if dec.offloads() { cfg.t_upper() } else { cfg.t_max };
    r.push_interval(ConstraintId::TimeBounds, dec.t, 0.0, t_hi, cfg.t_max);
    r.push_interval(ConstraintId::LocationBounds, dec.d, 0.0, cfg.ue_distance, cfg.ue_distance);
    if scheme == Scheme::Noma {
        let half = 0.5 * cfg.ue_distance;
        r.push(ConstraintId::NomaOrder, half - dec.d, half);
    }

    match cpu_frequencies(scheme, dec.rho, dec.t, cfg, ues) {
        Ok(f) => {
            r.push(ConstraintId::UavCpu, cfg.f_u_max - f[0].remote - f[1].remote, cfg.f_u_max);
            for k in 0..2 {
                r.push(ConstraintId::LocalCpu(k), ues[k].f_max - f[k].local, ues[k].f_max);
            }
        }
        Err(_) => {
            r.push(ConstraintId::UavCpu, f64::NEG_INFINITY, cfg.f_u_max);
            for k in 0..2 {
                let local = (1.0 - dec.rho[k]) * ues[k].cycles() / cfg.t_max;
                r.push(ConstraintId::LocalCpu(k), ues[k].f_max - local, ues[k].f_max);
            }
        }
    }

    if scheme == Scheme::Noma && regime == Regime::Finite {
        let a = if dec.offloads() {
            sic_margin(dec.rho, dec.t, cfg, ues).unwrap_or(f64::NEG_INFINITY)
        } else {
            1.0
        };
        r.push(ConstraintId::SicMargin, a - SIC_GUARD, 1.0);
    }

    let in_bounds = dec.check_bounds(cfg).is_ok();
    let powers = if in_bounds {
        min_powers(scheme, regime, dec, cfg, ues, mode).ok()
    } else {
        None
    };
    for k in 0..2 {
        let slack = match powers {
            Some(p) => ues[k].p_max - p.p[k],
            None => f64::NEG_INFINITY,
        };
        r.push(ConstraintId::Power(k), slack, ues[k].p_max);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::channel_gains;
    use approx::assert_relative_eq;

    fn setup(b: f64) -> (SystemConfig, [UeProfile; 2]) {
        let cfg = SystemConfig {
            bandwidth: b,
            ..SystemConfig::default()
        };
        (cfg, [UeProfile::default(), UeProfile::default()])
    }

    #[test]
    fn noma_infinite_total_example() {
        let (cfg, ues) = setup(0.5e6);
        let dec = Decision::new(0.5, 0.5, 3e-4, 25.0);
        let e = total_energy(Scheme::Noma, Regime::Infinite, &dec, &cfg, &ues, EvalMode::Strict).unwrap();
        // independent composition of the same quantities
        let eloc = 1e-28 * 1e-3 * (600.0 * 1000.0 / 1e-3f64).powi(3);
        let erem = 1e-28 * (600.0 * 1000.0f64).powi(3) / (7e-4f64).powi(2);
        let ch = channel_gains(25.0, &cfg).unwrap();
        let p1 = 15.0 * 16.0 / ch.hbar[0];
        let p2 = 15.0 / ch.hbar[1];
        let expect = 2.0 * eloc + 2.0 * erem + (p1 + p2) * 3e-4;
        assert_relative_eq!(e.total, expect, max_relative = 1e-12);
        assert_relative_eq!(eloc, 2.16e-5, max_relative = 1e-9);
        assert!((erem - 4.408e-5).abs() < 1e-8);
        assert!((e.total - 1.330e-4).abs() < 1e-7);
    }

    #[test]
    fn pure_local_energy() {
        let (cfg, _) = setup(3e6);
        // small tasks so that the local CPUs can finish everything in time
        let ue = UeProfile { task_bits: 800.0, ..UeProfile::default() };
        let ues = [ue.clone(), ue];
        let local = 2.0 * 1e-28 * 1e-3 * (0.8e6 / 1e-3f64).powi(3);
        for scheme in Scheme::ALL {
            for regime in Regime::ALL {
                let dec = Decision::new(0.0, 0.0, 0.0, 20.0);
                let e = total_energy(scheme, regime, &dec, &cfg, &ues, EvalMode::Strict).unwrap();
                assert_relative_eq!(e.total, local, max_relative = 1e-12);
                assert_eq!(e.ue[0].remote + e.ue[1].offload, 0.0);
                let rep = check_constraints(scheme, regime, &dec, &cfg, &ues);
                assert!(rep.is_feasible(), "{scheme} {regime}: {rep:?}");
            }
        }
    }

    #[test]
    fn tdma_offload_uses_airtime_share() {
        let (cfg, ues) = setup(3e6);
        let dec = Decision::new(0.5, 0.3, 4e-4, 40.0);
        let e = total_energy(Scheme::Tdma, Regime::Finite, &dec, &cfg, &ues, EvalMode::Strict).unwrap();
        assert_relative_eq!(e.ue[0].offload, 0.5 * e.powers.p[0] * 4e-4, max_relative = 1e-12);
        assert_relative_eq!(e.ue[1].offload, 0.5 * e.powers.p[1] * 4e-4, max_relative = 1e-12);
    }

    #[test]
    fn report_examples() {
        let (cfg, ues) = setup(0.5e6);
        let dec = Decision::new(0.5, 0.5, 3e-4, 25.0);
        let rep = check_constraints(Scheme::Noma, Regime::Finite, &dec, &cfg, &ues);
        let sic = rep.get(ConstraintId::SicMargin).unwrap();
        assert!(!sic.satisfied);
        assert!((sic.slack + 468.3).abs() < 0.5);
        assert!(!rep.is_feasible());

        let dec = Decision::new(0.2, 0.2, 5e-4, 60.0);
        let rep = check_constraints(Scheme::Noma, Regime::Infinite, &dec, &cfg, &ues);
        assert!(!rep.get(ConstraintId::NomaOrder).unwrap().satisfied);
        let rep = check_constraints(Scheme::Fdma, Regime::Infinite, &dec, &cfg, &ues);
        assert!(rep.get(ConstraintId::NomaOrder).is_none());
    }

    #[test]
    fn success_only_report_ignores_margin() {
        let (cfg, ues) = setup(0.5e6);
        let dec = Decision::new(0.5, 0.5, 3e-4, 25.0);
        let rep = check_constraints_in(Scheme::Noma, Regime::Finite, &dec, &cfg, &ues, EvalMode::SuccessOnly);
        assert!(rep.violations().all(|e| e.id != ConstraintId::SicMargin));
    }
}
