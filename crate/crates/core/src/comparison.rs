//! Analytical comparison between the access schemes: the feasibility and
//! advantage fields `A`, `B`, the NOMA/FDMA finite-blocklength gap and
//! optimum-level scheme gaps.

use std::fmt;

use rayon::prelude::*;

use crate::bcd::{optimize, OptResult};
use crate::energy::total_energy;
use crate::error::{domain, ModelError, Result};
use crate::model::{
    channel_gains, inverse_q, snr_threshold, Decision, Regime, Scheme, SystemConfig, UeProfile,
};
use crate::power::EvalMode;

/// `Y + 1` without the zero-offload override.
fn ybar_literal(rho_l: f64, n: f64, eps: f64) -> Result<f64> {
    Ok((std::f64::consts::LN_2 * rho_l / (n * (1.0 - eps)) + inverse_q(eps)? / n.sqrt()).exp())
}

fn ybar(rho_l: f64, n: f64, eps: f64, zero_override: bool) -> Result<f64> {
    if zero_override {
        Ok(snr_threshold(Regime::Finite, rho_l, n, eps)? + 1.0)
    } else {
        ybar_literal(rho_l, n, eps)
    }
}

/// `A = 1 - Y1 Y2` at blocklength `n` and
/// `B = (Y1 + 1)(Y2 + 1) - ((Y1 + 1) + (Y2 + 1)) / 2` with the second pair taken
/// at `n / 2`. With `zero_override` a UE that offloads nothing has `Y = 0`.
pub fn ab_fields(
    rho1_l1: f64,
    rho2_l2: f64,
    n: f64,
    eps: [f64; 2],
    zero_override: bool,
) -> Result<(f64, f64)> {
    if !(n >= 2.0) {
        return Err(domain("N", n, "[2, inf)"));
    }
    for (name, v) in [("rho1*L1", rho1_l1), ("rho2*L2", rho2_l2)] {
        if !(v >= 0.0) {
            return Err(domain(name, v, "[0, inf)"));
        }
    }
    let full = [ybar(rho1_l1, n, eps[0], zero_override)?, ybar(rho2_l2, n, eps[1], zero_override)?];
    let half = [
        ybar(rho1_l1, 0.5 * n, eps[0], zero_override)?,
        ybar(rho2_l2, 0.5 * n, eps[1], zero_override)?,
    ];
    let a = 1.0 - (full[0] - 1.0) * (full[1] - 1.0);
    let b = full[0] * full[1] - 0.5 * (half[0] + half[1]);
    Ok((a, b))
}

/// Gap between finite-blocklength NOMA and FDMA (`eta = 1/2`) at one decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaReport {
    pub point: Decision,
    /// Success-branch NOMA communication energy minus FDMA communication energy.
    pub delta: f64,
    /// Full NOMA minus FDMA total energy (both at `point`).
    pub exact: f64,
}

/// Evaluates the NOMA/FDMA gap at `dec` (normally a NOMA optimum). FDMA uses
/// the half-and-half bandwidth split regardless of `cfg.eta`.
pub fn noma_fdma_finite_delta(
    dec: &Decision,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    mode: EvalMode,
) -> Result<DeltaReport> {
    let half = SystemConfig { eta: 0.5, ..cfg.clone() };
    let noma = total_energy(Scheme::Noma, Regime::Finite, dec, &half, ues, mode)?;
    let fdma = total_energy(Scheme::Fdma, Regime::Finite, dec, &half, ues, mode)?;
    if dec.t <= 0.0 {
        return Ok(DeltaReport {
            point: *dec,
            delta: 0.0,
            exact: noma.total - fdma.total,
        });
    }
    let hb = channel_gains(dec.d, cfg)?.hbar;
    let n = cfg.bandwidth * dec.t;
    let mut y = [0.0; 2];
    let mut y_half = [0.0; 2];
    for k in 0..2 {
        let rl = dec.rho[k] * ues[k].task_bits;
        y[k] = snr_threshold(Regime::Finite, rl, n, ues[k].eps)?;
        y_half[k] = snr_threshold(Regime::Finite, rl, 0.5 * n, ues[k].eps)?;
    }
    let bracket = y[0] * (y[1] + 1.0) / hb[0] + y[1] / hb[1]
        - y_half[0] / (2.0 * hb[0])
        - y_half[1] / (2.0 * hb[1]);
    Ok(DeltaReport {
        point: *dec,
        delta: bracket * n / cfg.bandwidth,
        exact: noma.total - fdma.total,
    })
}

/// The gap for equal channels, loads and error targets:
/// `N / (hbar B) * ((Y(N) + 1)^2 - (Y(N/2) + 1))`.
pub fn symmetric_delta(rho_l: f64, n: f64, eps: f64, hbar: f64, bandwidth: f64) -> Result<f64> {
    let full = snr_threshold(Regime::Finite, rho_l, n, eps)? + 1.0;
    let half = snr_threshold(Regime::Finite, rho_l, 0.5 * n, eps)? + 1.0;
    Ok(n / (hbar * bandwidth) * (full * full - half))
}

/// FDMA minus TDMA energy at the same decision. Requires `eta == delta`.
pub fn fdma_tdma_gap(
    regime: Regime,
    dec: &Decision,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> Result<f64> {
    if cfg.eta != cfg.delta {
        return Err(domain("delta", cfg.delta, "equal to eta"));
    }
    let f = total_energy(Scheme::Fdma, regime, dec, cfg, ues, EvalMode::Strict)?;
    let t = total_energy(Scheme::Tdma, regime, dec, cfg, ues, EvalMode::Strict)?;
    Ok(f.total - t.total)
}

/// The ordering a pairwise gap is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `E_TDMA <= E_FDMA` (needs `eta == delta`).
    TdmaBelowFdma,
    /// `E_NOMA <= E_FDMA` with infinite blocklength (needs `eta == 1/2`).
    NomaBelowFdma,
    /// NOMA against FDMA with finite blocklength; no ordering is implied.
    Undetermined,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::TdmaBelowFdma => "tdma<=fdma",
            Relation::NomaBelowFdma => "noma<=fdma",
            Relation::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub scheme: Scheme,
    pub regime: Regime,
    pub result: std::result::Result<OptResult, ModelError>,
}

impl Cell {
    pub fn energy(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|r| r.energy.total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGap {
    pub regime: Regime,
    /// The gap is `energy(minuend) - energy(subtrahend)`.
    pub minuend: Scheme,
    pub subtrahend: Scheme,
    pub gap: f64,
    pub relation: Relation,
    /// Whether the configuration meets the relation's preconditions.
    pub applicable: bool,
    /// `Some(true)` when the relation holds within `tol`; `None` if undetermined or not applicable.
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub cells: Vec<Cell>,
    pub gaps: Vec<PairGap>,
}

impl ComparisonReport {
    pub fn cell(&self, scheme: Scheme, regime: Regime) -> Option<&Cell> {
        self.cells.iter().find(|c| c.scheme == scheme && c.regime == regime)
    }
}

/// Relative slack allowed when checking orderings between optimised energies.
pub const ORDER_TOL: f64 = 0.01;

/// Optimises every requested scheme/regime cell and tabulates the pairwise
/// gaps `FDMA - TDMA` and `FDMA - NOMA`. Failed cells keep their error.
pub fn scheme_gaps(
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    regimes: &[Regime],
    schemes: &[Scheme],
) -> ComparisonReport {
    let pairs: Vec<(Scheme, Regime)> = regimes
        .iter()
        .flat_map(|&r| schemes.iter().map(move |&s| (s, r)))
        .collect();
    let cells: Vec<Cell> = pairs
        .par_iter()
        .map(|&(scheme, regime)| Cell {
            scheme,
            regime,
            result: optimize(scheme, regime, cfg, ues),
        })
        .collect();
    let mut gaps = Vec::new();
    for &regime in regimes {
        let get = |s: Scheme| cells.iter().find(|c| c.scheme == s && c.regime == regime);
        let Some(fdma) = get(Scheme::Fdma) else { continue };
        for other in [Scheme::Tdma, Scheme::Noma] {
            let Some(cell) = get(other) else { continue };
            let (Some(ef), Some(eo)) = (fdma.energy(), cell.energy()) else { continue };
            let (relation, applicable) = match (other, regime) {
                (Scheme::Tdma, _) => (Relation::TdmaBelowFdma, cfg.eta == cfg.delta),
                (_, Regime::Infinite) => {
                    let t = cell.result.as_ref().map(|r| r.decision.t).unwrap_or(0.0);
                    (Relation::NomaBelowFdma, cfg.eta == 0.5 && cfg.bandwidth * t >= 2.0)
                }
                _ => (Relation::Undetermined, true),
            };
            let holds = (applicable && relation != Relation::Undetermined)
                .then(|| eo <= ef * (1.0 + ORDER_TOL));
            gaps.push(PairGap {
                regime,
                minuend: Scheme::Fdma,
                subtrahend: other,
                gap: ef - eo,
                relation,
                applicable,
                holds,
            });
        }
    }
    ComparisonReport { cells, gaps }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: [f64; 2] = [1e-5, 1e-5];

    #[test]
    fn ab_symmetric_example() {
        let (a, b) = ab_fields(600.0, 600.0, 300.0, E, true).unwrap();
        assert!((a + 15.95).abs() < 0.01, "{a}");
        assert!((b - 3.52).abs() < 0.01, "{b}");
    }

    #[test]
    fn ab_zero_offload() {
        let (a, b) = ab_fields(1200.0, 0.0, 300.0, E, true).unwrap();
        assert_eq!(a, 1.0);
        let y1 = snr_threshold(Regime::Finite, 1200.0, 300.0, 1e-5).unwrap();
        let y1h = snr_threshold(Regime::Finite, 1200.0, 150.0, 1e-5).unwrap();
        assert!((b - ((y1 + 1.0) - 0.5 * (y1h + 2.0))).abs() < 1e-9 * b.abs());
        let (_, b) = ab_fields(1200.0, 0.0, 300.0, E, false).unwrap();
        assert!((b + 155.8).abs() < 0.2, "{b}");
    }

    #[test]
    fn ab_needs_two_symbols() {
        assert!(ab_fields(1.0, 1.0, 1.5, E, true).is_err());
    }

    #[test]
    fn symmetric_delta_terms() {
        let y = snr_threshold(Regime::Finite, 600.0, 150.0, 1e-5).unwrap() + 1.0;
        let yh = snr_threshold(Regime::Finite, 600.0, 75.0, 1e-5).unwrap() + 1.0;
        assert!((y * y - 513.7).abs() < 0.1);
        assert!((yh - 418.9).abs() < 0.1);
        assert!(symmetric_delta(600.0, 3000.0, 1e-5, 1.0, 3e6).unwrap() > 0.0);
    }

    #[test]
    fn delta_matches_symmetric_form() {
        let cfg = SystemConfig::default();
        let ues = [UeProfile::default(), UeProfile::default()];
        let dec = Decision::new(0.5, 0.5, 9e-4, 50.0);
        let r = noma_fdma_finite_delta(&dec, &cfg, &ues, EvalMode::Strict).unwrap();
        let hb = channel_gains(50.0, &cfg).unwrap().hbar[0];
        let s = symmetric_delta(600.0, 2700.0, 1e-5, hb, 3e6).unwrap();
        assert!((r.delta - s).abs() < 1e-9 * s);
        assert!(r.exact > r.delta);
    }

    #[test]
    fn pointwise_tdma_gap() {
        let cfg = SystemConfig::default();
        let ues = [UeProfile::default(), UeProfile::default()];
        let dec = Decision::new(0.5, 0.5, 4e-4, 50.0);
        assert!(fdma_tdma_gap(Regime::Finite, &dec, &cfg, &ues).unwrap() > 0.0);
        let dec = Decision::new(0.0, 0.5, 4e-4, 50.0);
        let ue0 = UeProfile { task_bits: 800.0, ..UeProfile::default() };
        let ues = [ue0, UeProfile::default()];
        assert!(fdma_tdma_gap(Regime::Finite, &dec, &cfg, &ues).unwrap().abs() < 1e-18);
        let uneven = SystemConfig { delta: 0.4, ..cfg };
        assert!(fdma_tdma_gap(Regime::Finite, &dec, &uneven, &ues).is_err());
    }

    #[test]
    fn gaps_report_default() {
        let cfg = SystemConfig::default();
        let ues = [UeProfile::default(), UeProfile::default()];
        let rep = scheme_gaps(&cfg, &ues, &Regime::ALL, &Scheme::ALL);
        assert_eq!(rep.cells.len(), 6);
        assert_eq!(rep.gaps.len(), 4);
        for g in &rep.gaps {
            let a = rep.cell(g.minuend, g.regime).unwrap().energy().unwrap();
            let b = rep.cell(g.subtrahend, g.regime).unwrap().energy().unwrap();
            assert!((g.gap - (a - b)).abs() <= 1e-12);
            assert_ne!(g.holds, Some(false), "{g:?}");
        }
    }
}
