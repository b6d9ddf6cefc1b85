//! Minimum transmit powers for every scheme and rate regime.

use crate::error::{domain, ModelError, Result};
use crate::model::{channel_gains, log_snr_factor, Decision, Regime, Scheme, SystemConfig, UeProfile};

/// Failure-branch denominators below this value count as SIC-infeasible.
pub const SIC_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EvalMode {
    #[default]
    Strict,
    /// Evaluate NOMA finite-blocklength points with a non-positive SIC margin
    /// using the success-branch powers only.
    SuccessOnly,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Strict => "strict",
            EvalMode::SuccessOnly => "success-only",
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [EvalMode::Strict, EvalMode::SuccessOnly]
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown eval mode {s:?} (strict, success-only)"))
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NomaBranches {
    /// Powers when SIC succeeds.
    pub p_hat: [f64; 2],
    /// Powers when UE 1 is not decoded; absent when the SIC margin is not positive.
    pub p_check: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSolution {
    pub p: [f64; 2],
    pub sinr: [f64; 2],
    pub noma_branches: Option<NomaBranches>,
    /// Set when `p` holds success-branch powers because the SIC margin was not positive.
    pub success_only: bool,
}

/// Fraction of the `B * t` symbols available to UE `k`.
pub fn blocklength_share(scheme: Scheme, k: usize, cfg: &SystemConfig) -> f64 {
    match scheme {
        Scheme::Noma => 1.0,
        Scheme::Fdma => share(cfg.eta, k),
        Scheme::Tdma => share(cfg.delta, k),
    }
}

/// Fraction of the `t` window during which UE `k` transmits.
pub fn airtime_share(scheme: Scheme, k: usize, cfg: &SystemConfig) -> f64 {
    match scheme {
        Scheme::Tdma => share(cfg.delta, k),
        _ => 1.0,
    }
}

/// Fraction of the noise bandwidth seen by UE `k`.
pub fn noise_share(scheme: Scheme, k: usize, cfg: &SystemConfig) -> f64 {
    match scheme {
        Scheme::Fdma => share(cfg.eta, k),
        _ => 1.0,
    }
}

fn share(x: f64, k: usize) -> f64 {
    if k == 0 {
        x
    } else {
        1.0 - x
    }
}

/// `ln(1 + Y_k)` for both UEs at the given decision.
pub fn log_snr_factors(
    scheme: Scheme,
    regime: Regime,
    rho: [f64; 2],
    t: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for k in 0..2 {
        let rl = rho[k] * ues[k].task_bits;
        let n = blocklength_share(scheme, k, cfg) * cfg.bandwidth * t;
        out[k] = log_snr_factor(regime, rl, n, ues[k].eps, cfg.dispersion)?;
    }
    Ok(out)
}

/// `1 - Y1 * Y2` with both thresholds taken at the full blocklength `B * t`.
pub fn sic_margin(
    rho: [f64; 2],
    t: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("t", t, "(0, T_max]"));
    }
    let l = log_snr_factors(Scheme::Noma, Regime::Finite, rho, t, cfg, ues)?;
    Ok(1.0 - l[0].exp_m1() * l[1].exp_m1())
}

pub fn min_powers(
    scheme: Scheme,
    regime: Regime,
    dec: &Decision,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
    mode: EvalMode,
) -> Result<PowerSolution> {
    let ch = channel_gains(dec.d, cfg)?;
    let l = log_snr_factors(scheme, regime, dec.rho, dec.t, cfg, ues)?;
    let y = [l[0].exp_m1(), l[1].exp_m1()];
    let hb = ch.hbar;
    let mut sol = PowerSolution {
        p: [0.0; 2],
        sinr: y,
        noma_branches: None,
        success_only: false,
    };
    match scheme {
        Scheme::Noma => {
            let p_hat = [y[0] * (y[1] + 1.0) / hb[0], y[1] / hb[1]];
            if regime == Regime::Infinite {
                sol.p = p_hat;
                return Ok(sol);
            }
            let a = 1.0 - y[0] * y[1];
            if a <= SIC_GUARD {
                if mode == EvalMode::Strict {
                    return Err(ModelError::SicInfeasible { margin: a });
                }
                sol.p = p_hat;
                sol.success_only = true;
                sol.noma_branches = Some(NomaBranches {
                    p_hat,
                    p_check: None,
                });
                return Ok(sol);
            }
            let p_check = [p_hat[0] / a, y[1] * (y[0] + 1.0) / (hb[1] * a)];
            // SIC success probability is set by UE 1's decoding error
            let e1 = ues[0].eps;
            for k in 0..2 {
                sol.p[k] = (1.0 - e1) * p_hat[k] + e1 * p_check[k];
            }
            sol.noma_branches = Some(NomaBranches {
                p_hat,
                p_check: Some(p_check),
            });
        }
        Scheme::Fdma | Scheme::Tdma => {
            for k in 0..2 {
                sol.p[k] = noise_share(scheme, k, cfg) * y[k] / hb[k];
            }
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{inverse_q, snr_threshold};
    use approx::assert_relative_eq;

    fn setup(b: f64) -> (SystemConfig, [UeProfile; 2]) {
        let cfg = SystemConfig {
            bandwidth: b,
            ..SystemConfig::default()
        };
        (cfg, [UeProfile::default(), UeProfile::default()])
    }

    #[test]
    fn noma_infinite_example() {
        let (cfg, ues) = setup(0.5e6);
        let dec = Decision::new(0.5, 0.5, 3e-4, 25.0);
        let s = min_powers(Scheme::Noma, Regime::Infinite, &dec, &cfg, &ues, EvalMode::Strict).unwrap();
        // 600 bits over 150 symbols -> Y = 15 for both UEs
        let noise = 0.5e6 * cfg.n0;
        let hb1 = 1e-6 / 3125.0 / noise;
        let hb2 = 1e-6 / 8125.0 / noise;
        assert_relative_eq!(s.p[0], 15.0 * 16.0 / hb1, max_relative = 1e-9);
        assert_relative_eq!(s.p[1], 15.0 / hb2, max_relative = 1e-9);
        assert!((s.p[0] - 4.721e-3).abs() < 1e-6);
        assert!((s.p[1] - 7.671e-4).abs() < 1e-7);
    }

    #[test]
    fn tdma_infinite_example() {
        let (cfg, ues) = setup(0.5e6);
        let dec = Decision::new(0.5, 0.5, 3e-4, 25.0);
        let s = min_powers(Scheme::Tdma, Regime::Infinite, &dec, &cfg, &ues, EvalMode::Strict).unwrap();
        assert_relative_eq!(s.sinr[0], 255.0, max_relative = 1e-9);
        let hb1 = 1e-6 / 3125.0 / (0.5e6 * cfg.n0);
        assert_relative_eq!(s.p[0], 255.0 / hb1, max_relative = 1e-9);
        assert!((s.p[0] - 5.016e-3).abs() < 1e-6);
    }

    #[test]
    fn zero_offload_is_silent() {
        let (cfg, ues) = setup(3e6);
        for scheme in Scheme::ALL {
            for regime in Regime::ALL {
                let dec = Decision::new(0.0, 0.0, 0.0, 10.0);
                let s = min_powers(scheme, regime, &dec, &cfg, &ues, EvalMode::Strict).unwrap();
                assert_eq!(s.p, [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn noma_finite_branches() {
        // equal channels at d = D/2; N = 3000 symbols from B = 3 MHz and t = 1 ms
        let (cfg, ues) = setup(3e6);
        let dec = Decision::new(0.5, 0.5, 1e-3, 50.0);
        let s = min_powers(Scheme::Noma, Regime::Finite, &dec, &cfg, &ues, EvalMode::Strict).unwrap();
        let q = inverse_q(1e-5).unwrap();
        let y = (std::f64::consts::LN_2 * 600.0 / (3000.0 * (1.0 - 1e-5)) + q / 3000f64.sqrt()).exp() - 1.0;
        assert!((y - 0.2417).abs() < 1e-4);
        let hb = channel_gains(50.0, &cfg).unwrap().hbar[0];
        let br = s.noma_branches.unwrap();
        let pc = br.p_check.unwrap();
        assert_relative_eq!(br.p_hat[0] * hb, y * (y + 1.0), max_relative = 1e-9);
        assert_relative_eq!(pc[0] * hb, y * (y + 1.0) / (1.0 - y * y), max_relative = 1e-9);
        assert!((br.p_hat[0] * hb - 0.3001).abs() < 1e-3);
        assert!((pc[0] * hb - 0.3188).abs() < 1e-3);
        assert_relative_eq!(s.p[0], (1.0 - 1e-5) * br.p_hat[0] + 1e-5 * pc[0], max_relative = 1e-12);
        assert_relative_eq!(sic_margin(dec.rho, dec.t, &cfg, &ues).unwrap(), 1.0 - y * y, max_relative = 1e-12);
    }

    #[test]
    fn sic_margin_examples() {
        let (cfg, ues) = setup(0.5e6);
        let a = sic_margin([0.5, 0.5], 3e-4, &cfg, &ues).unwrap();
        let y = snr_threshold(Regime::Finite, 600.0, 150.0, 1e-5).unwrap();
        assert_relative_eq!(a, 1.0 - y * y, max_relative = 1e-12);
        assert!((a + 468.3).abs() < 0.5);
        assert_eq!(sic_margin([0.0, 0.0], 3e-4, &cfg, &ues).unwrap(), 1.0);
        let (cfg, ues) = setup(3e6);
        assert!((sic_margin([0.5, 0.5], 1e-3, &cfg, &ues).unwrap() - 0.9416).abs() < 1e-3);
    }

    #[test]
    fn strict_mode_rejects_negative_margin() {
        let (cfg, ues) = setup(0.5e6);
        let dec = Decision::new(0.5, 0.5, 3e-4, 25.0);
        let err = min_powers(Scheme::Noma, Regime::Finite, &dec, &cfg, &ues, EvalMode::Strict).unwrap_err();
        assert!(matches!(err, ModelError::SicInfeasible { .. }));
        let s = min_powers(Scheme::Noma, Regime::Finite, &dec, &cfg, &ues, EvalMode::SuccessOnly).unwrap();
        assert!(s.success_only);
        assert_eq!(s.p, s.noma_branches.unwrap().p_hat);
    }

    #[test]
    fn symmetric_orthogonal_power_ratio() {
        let (cfg, ues) = setup(3e6);
        let dec = Decision::new(0.4, 0.4, 5e-4, 30.0);
        let hb = channel_gains(30.0, &cfg).unwrap().hbar;
        for scheme in [Scheme::Fdma, Scheme::Tdma] {
            for regime in Regime::ALL {
                let s = min_powers(scheme, regime, &dec, &cfg, &ues, EvalMode::Strict).unwrap();
                assert_relative_eq!(s.p[0] / s.p[1], hb[1] / hb[0], max_relative = 1e-12);
            }
        }
    }
}
