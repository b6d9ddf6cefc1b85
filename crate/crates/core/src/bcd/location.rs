//! UAV placement for fixed task split and offloading time.

use crate::energy::ConstraintId;
use crate::error::{ModelError, Result};
use crate::model::{Regime, Scheme, SystemConfig, UeProfile};
use crate::power::{airtime_share, log_snr_factors, noise_share, EvalMode, SIC_GUARD};

/// Golden-section stopping width (m).
pub const LOCATION_TOL: f64 = 1e-4;

/// Sum-power objective `c1 * (H^2 + d^2) + c2 * (H^2 + (D - d)^2)` scaled by
/// `B * N0 / beta0`, plus the weights the energy puts on each power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationProblem {
    /// Power of UE k is `coef[k] * dist_k^2 * B * N0 / beta0`.
    pub coef: [f64; 2],
    /// Energy weight of each power (airtime share).
    pub weight: [f64; 2],
    pub lo: f64,
    pub hi: f64,
    pub closed_form: bool,
}

impl LocationProblem {
    pub fn new(
        scheme: Scheme,
        regime: Regime,
        rho: [f64; 2],
        t: f64,
        cfg: &SystemConfig,
        ues: &[UeProfile; 2],
        mode: EvalMode,
    ) -> Result<Self> {
        let l = log_snr_factors(scheme, regime, rho, t, cfg, ues)?;
        let y = [l[0].exp_m1(), l[1].exp_m1()];
        let mut closed_form = false;
        let coef = match scheme {
            Scheme::Noma => {
                let hat = [y[0] * (y[1] + 1.0), y[1]];
                if regime == Regime::Infinite {
                    hat
                } else {
                    let a = 1.0 - y[0] * y[1];
                    if a <= SIC_GUARD {
                        if mode == EvalMode::Strict {
                            return Err(ModelError::SicInfeasible { margin: a });
                        }
                        hat
                    } else {
                        closed_form = true;
                        let e1 = ues[0].eps;
                        let phi = (1.0 - e1) * hat[0] + e1 * hat[0] / a;
                        let psi = (1.0 - e1) * hat[1] + e1 * y[1] * (y[0] + 1.0) / a;
                        [phi, psi]
                    }
                }
            }
            _ => [noise_share(scheme, 0, cfg) * y[0], noise_share(scheme, 1, cfg) * y[1]],
        };
        let weight = [airtime_share(scheme, 0, cfg), airtime_share(scheme, 1, cfg)];

        let dd = cfg.ue_distance;
        let hh = cfg.altitude * cfg.altitude;
        let unit = cfg.bandwidth * cfg.n0 / cfg.beta0;
        let mut lo: f64 = 0.0;
        let mut hi: f64 = if scheme == Scheme::Noma { 0.5 * dd } else { dd };
        // power caps: coef_k * dist_k^2 * unit <= P_max
        if coef[0] > 0.0 {
            let r2 = ues[0].p_max / (unit * coef[0]) - hh;
            if r2 < 0.0 {
                return Err(ModelError::Infeasible(ConstraintId::Power(0)));
            }
            hi = hi.min(r2.sqrt());
        }
        if coef[1] > 0.0 {
            let r2 = ues[1].p_max / (unit * coef[1]) - hh;
            if r2 < 0.0 {
                return Err(ModelError::Infeasible(ConstraintId::Power(1)));
            }
            lo = lo.max(dd - r2.sqrt());
        }
        if lo > hi {
            let which = if coef[0] >= coef[1] { 0 } else { 1 };
            return Err(ModelError::Infeasible(ConstraintId::Power(which)));
        }
        Ok(LocationProblem {
            coef,
            weight,
            lo,
            hi,
            closed_form,
        })
    }

    /// Weighted sum-power objective, in units of `B * N0 / beta0` watts.
    pub fn objective(&self, d: f64, cfg: &SystemConfig) -> f64 {
        let hh = cfg.altitude * cfg.altitude;
        let d2 = cfg.ue_distance - d;
        self.weight[0] * self.coef[0] * (hh + d * d) + self.weight[1] * self.coef[1] * (hh + d2 * d2)
    }

    /// Stationary point of the NOMA finite-blocklength sum power, clamped to the feasible interval.
    pub fn closed_form(&self, cfg: &SystemConfig) -> f64 {
        let (phi, psi) = (self.coef[0], self.coef[1]);
        if phi + psi <= 0.0 {
            return self.lo;
        }
        (psi * cfg.ue_distance / (phi + psi)).clamp(self.lo, self.hi)
    }

    pub fn search(&self, cfg: &SystemConfig) -> f64 {
        let flat = self.weight[0] * self.coef[0] + self.weight[1] * self.coef[1] == 0.0;
        if flat {
            return self.lo;
        }
        golden_section(|d| self.objective(d, cfg), self.lo, self.hi, LOCATION_TOL)
    }

    pub fn solve(&self, cfg: &SystemConfig) -> f64 {
        if self.closed_form {
            self.closed_form(cfg)
        } else {
            self.search(cfg)
        }
    }
}

/// Minimiser of a unimodal function on `[lo, hi]`, bracketed to width `tol`.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    if b - a <= tol {
        return 0.5 * (a + b);
    }
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    // the interval ends are candidates too (minimiser on the boundary)
    let mid = 0.5 * (a + b);
    let mut best = (f(mid), mid);
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.0 {
            best = (fx, x);
        }
    }
    best.1
}

/// UAV location minimising the (weighted) sum transmit power.
pub fn solve_uav_location(
    scheme: Scheme,
    regime: Regime,
    rho: [f64; 2],
    t: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> Result<f64> {
    solve_uav_location_in(scheme, regime, rho, t, cfg, ues, EvalMode::Strict)
}

pub fn solve_uav_location_in(
    scheme: Scheme,
    regime: Regime,
    rho: [f64; 2],
    t: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    mode: EvalMode,
) -> Result<f64> {
    Ok(LocationProblem::new(scheme, regime, rho, t, cfg, ues, mode)?.solve(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{snr_threshold, Decision};
    use crate::power::min_powers;

    fn setup(b: f64) -> (SystemConfig, [UeProfile; 2]) {
        let cfg = SystemConfig {
            bandwidth: b,
            ..SystemConfig::default()
        };
        (cfg, [UeProfile::default(), UeProfile::default()])
    }

    #[test]
    fn golden_section_on_parabola() {
        let x = golden_section(|x| (x - 1.2345).powi(2), 0.0, 10.0, 1e-6);
        assert!((x - 1.2345).abs() < 1e-6);
        let x = golden_section(|x| x, 2.0, 10.0, 1e-6);
        assert_eq!(x, 2.0);
    }

    #[test]
    fn symmetric_orthogonal_midpoint() {
        let (cfg, ues) = setup(3e6);
        for scheme in [Scheme::Fdma, Scheme::Tdma] {
            for regime in Regime::ALL {
                let d = solve_uav_location(scheme, regime, [0.5, 0.5], 5e-4, &cfg, &ues).unwrap();
                assert!((d - 50.0).abs() < 1e-3, "{scheme} {regime}: {d}");
            }
        }
    }

    #[test]
    fn noma_finite_closed_form_example() {
        // N = 3000, 600 bits each -> Y ~ 0.2417, d* ~ 44.6 m
        let (cfg, ues) = setup(3e6);
        let y = snr_threshold(Regime::Finite, 600.0, 3000.0, 1e-5).unwrap();
        let a = 1.0 - y * y;
        let e = 1e-5;
        let phi = (1.0 - e) * y * (y + 1.0) + e * y * (y + 1.0) / a;
        let psi = (1.0 - e) * y + e * y * (y + 1.0) / a;
        assert!((psi / (phi + psi) - 0.4461).abs() < 1e-4);
        let d = solve_uav_location(Scheme::Noma, Regime::Finite, [0.5, 0.5], 1e-3, &cfg, &ues).unwrap();
        assert!((d - 100.0 * psi / (phi + psi)).abs() < 1e-9);
        assert!((d - 44.6).abs() < 0.05);
    }

    #[test]
    fn coefficients_reproduce_powers() {
        let (cfg, ues) = setup(2e6);
        let unit = cfg.bandwidth * cfg.n0 / cfg.beta0;
        for scheme in Scheme::ALL {
            for regime in Regime::ALL {
                let rho = [0.45, 0.3];
                let t = 6e-4;
                let lp = LocationProblem::new(scheme, regime, rho, t, &cfg, &ues, EvalMode::Strict).unwrap();
                let d = 20.0;
                let p = min_powers(scheme, regime, &Decision::new(rho[0], rho[1], t, d), &cfg, &ues, EvalMode::Strict)
                    .unwrap()
                    .p;
                let p1 = lp.coef[0] * (2500.0 + d * d) * unit;
                let p2 = lp.coef[1] * (2500.0 + (100.0 - d).powi(2)) * unit;
                assert!((p1 - p[0]).abs() <= 1e-12 * p[0].max(1e-30), "{scheme} {regime}");
                assert!((p2 - p[1]).abs() <= 1e-12 * p[1].max(1e-30), "{scheme} {regime}");
            }
        }
    }

    #[test]
    fn noma_clamps_to_half_distance() {
        // UE 1 offloads nothing: all weight on UE 2, optimum would be d = D
        let (cfg, ues) = setup(3e6);
        let d = solve_uav_location(Scheme::Noma, Regime::Finite, [0.0, 0.5], 5e-4, &cfg, &ues).unwrap();
        assert_eq!(d, 50.0);
        let d = solve_uav_location(Scheme::Noma, Regime::Infinite, [0.0, 0.5], 5e-4, &cfg, &ues).unwrap();
        assert!((d - 50.0).abs() < 1e-3);
    }

    #[test]
    fn unreachable_caps_are_reported() {
        let (cfg, ues) = setup(0.5e6);
        let err = solve_uav_location(Scheme::Fdma, Regime::Finite, [1.0, 1.0], 1e-4, &cfg, &ues).unwrap_err();
        assert!(matches!(err, ModelError::Infeasible(ConstraintId::Power(_))));
    }
}
