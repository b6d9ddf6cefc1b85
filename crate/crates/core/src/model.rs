//! Physical model: geometry, channels, CPU frequencies, computation energy
//! and the SNR thresholds of the two rate regimes.

use std::f64::consts::{LN_2, SQRT_2};
use std::fmt;

use statrs::function::erf;

use crate::error::{domain, ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Noma,
    Fdma,
    Tdma,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Noma, Scheme::Fdma, Scheme::Tdma];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Noma => "noma",
            Scheme::Fdma => "fdma",
            Scheme::Tdma => "tdma",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scheme {s:?} (noma, fdma, tdma)"))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    Infinite,
    Finite,
}

impl Regime {
    pub const ALL: [Regime; 2] = [Regime::Infinite, Regime::Finite];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Infinite => "inf",
            Regime::Finite => "fin",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Regime::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown regime {s:?} (inf, fin)"))
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Global constants shared by both UEs. All values are SI.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Distance between the two UEs (m).
    pub ue_distance: f64,
    /// UAV altitude (m).
    pub altitude: f64,
    /// Channel power gain at the 1 m reference distance.
    pub beta0: f64,
    /// Noise power spectral density (W/Hz).
    pub n0: f64,
    pub bandwidth: f64,
    pub t_max: f64,
    pub f_u_max: f64,
    pub kappa_u: f64,
    /// FDMA bandwidth share of UE 1.
    pub eta: f64,
    /// TDMA time share of UE 1.
    pub delta: f64,
    pub sigma_conv: f64,
    /// Offloading time is capped at `(1 - t_guard) * t_max` once any data is offloaded.
    pub t_guard: f64,
    /// Channel dispersion used by the finite-blocklength rate.
    pub dispersion: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            ue_distance: 100.0,
            altitude: 50.0,
            beta0: 1e-6,
            n0: dbm_per_hz_to_w(-169.0),
            bandwidth: 3e6,
            t_max: 1e-3,
            f_u_max: 9e9,
            kappa_u: 1e-28,
            eta: 0.5,
            delta: 0.5,
            sigma_conv: 1e-3,
            t_guard: 1e-3,
            dispersion: 1.0,
        }
    }
}

pub fn dbm_per_hz_to_w(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(name, v, "(0, inf)"))
    }
}

fn unit_closed(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(domain(name, v, "[0, 1]"))
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        positive("D", self.ue_distance)?;
        positive("H", self.altitude)?;
        positive("beta0", self.beta0)?;
        positive("N0", self.n0)?;
        positive("B", self.bandwidth)?;
        positive("T_max", self.t_max)?;
        positive("f_U_max", self.f_u_max)?;
        if !(self.kappa_u >= 0.0 && self.kappa_u.is_finite()) {
            return Err(domain("kappa_U", self.kappa_u, "[0, inf)"));
        }
        unit_closed("eta", self.eta)?;
        unit_closed("delta", self.delta)?;
        if !(self.sigma_conv > 0.0 && self.sigma_conv < 1.0) {
            return Err(domain("sigma_conv", self.sigma_conv, "(0, 1)"));
        }
        if !(self.t_guard > 0.0 && self.t_guard < 1.0) {
            return Err(domain("t_guard", self.t_guard, "(0, 1)"));
        }
        positive("dispersion", self.dispersion)?;
        Ok(())
    }

    /// Largest admissible offloading time when some data is offloaded.
    pub fn t_upper(&self) -> f64 {
        (1.0 - self.t_guard) * self.t_max
    }
}

/// Per-UE task and hardware parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct UeProfile {
    /// Task size (bits).
    pub task_bits: f64,
    pub cycles_per_bit: f64,
    pub kappa: f64,
    pub f_max: f64,
    pub p_max: f64,
    /// Decoding error probability (finite blocklength only).
    pub eps: f64,
}

impl Default for UeProfile {
    fn default() -> Self {
        UeProfile {
            task_bits: 1200.0,
            cycles_per_bit: 1000.0,
            kappa: 1e-28,
            f_max: 1e9,
            p_max: 0.1,
            eps: 1e-5,
        }
    }
}

impl UeProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.task_bits >= 0.0 && self.task_bits.is_finite()) {
            return Err(domain("L", self.task_bits, "[0, inf)"));
        }
        positive("c", self.cycles_per_bit)?;
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(domain("kappa", self.kappa, "[0, inf)"));
        }
        positive("f_max", self.f_max)?;
        positive("P_max", self.p_max)?;
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(domain("eps", self.eps, "(0, 0.5)"));
        }
        Ok(())
    }

    /// Total CPU cycles of the task.
    pub fn cycles(&self) -> f64 {
        self.cycles_per_bit * self.task_bits
    }

    /// Smallest offloaded share that keeps the local CPU within `f_max`.
    pub fn rho_floor(&self, t_max: f64) -> f64 {
        if self.cycles() == 0.0 {
            0.0
        } else {
            (1.0 - self.f_max * t_max / self.cycles()).max(0.0)
        }
    }
}

pub fn validate_all(cfg: &SystemConfig, ues: &[UeProfile; 2]) -> Result<()> {
    cfg.validate()?;
    ues[0].validate()?;
    ues[1].validate()
}

/// Offloading plan of one scheme/regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub rho: [f64; 2],
    pub t: f64,
    pub d: f64,
}

impl Decision {
    pub fn new(rho1: f64, rho2: f64, t: f64, d: f64) -> Self {
        Decision {
            rho: [rho1, rho2],
            t,
            d,
        }
    }

    pub fn offloads(&self) -> bool {
        self.rho[0] > 0.0 || self.rho[1] > 0.0
    }

    pub fn check_bounds(&self, cfg: &SystemConfig) -> Result<()> {
        for (k, &r) in self.rho.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(domain(if k == 0 { "rho1" } else { "rho2" }, r, "[0, 1]"));
            }
        }
        if !(0.0..=cfg.t_max).contains(&self.t) {
            return Err(domain("t", self.t, "[0, T_max]"));
        }
        if !(0.0..=cfg.ue_distance).contains(&self.d) {
            return Err(domain("d", self.d, "[0, D]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub h: [f64; 2],
    /// Gains normalised by the noise power `B * N0`.
    pub hbar: [f64; 2],
}

pub fn channel_gains(d: f64, cfg: &SystemConfig) -> Result<ChannelState> {
    if !(0.0..=cfg.ue_distance).contains(&d) {
        return Err(domain("d", d, "[0, D]"));
    }
    let hh = cfg.altitude * cfg.altitude;
    let h1 = cfg.beta0 / (hh + d * d);
    let h2 = cfg.beta0 / (hh + (cfg.ue_distance - d).powi(2));
    let noise = cfg.bandwidth * cfg.n0;
    Ok(ChannelState {
        h: [h1, h2],
        hbar: [h1 / noise, h2 / noise],
    })
}

/// Time the UAV has left to compute UE `k`'s offloaded bits.
pub fn remote_window(scheme: Scheme, k: usize, t: f64, cfg: &SystemConfig) -> f64 {
    match (scheme, k) {
        (Scheme::Tdma, 0) => cfg.t_max - cfg.delta * t,
        _ => cfg.t_max - t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpuFrequencies {
    pub local: f64,
    pub remote: f64,
}

pub fn cpu_frequencies(
    scheme: Scheme,
    rho: [f64; 2],
    t: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> Result<[CpuFrequencies; 2]> {
    let mut out = [CpuFrequencies {
        local: 0.0,
        remote: 0.0,
    }; 2];
    for k in 0..2 {
        let cyc = ues[k].cycles();
        out[k].local = (1.0 - rho[k]) * cyc / cfg.t_max;
        let off = rho[k] * cyc;
        if off > 0.0 {
            let window = remote_window(scheme, k, t, cfg);
            if window <= 0.0 {
                return Err(ModelError::InfeasibleTime { ue: k + 1, window });
            }
            out[k].remote = off / window;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputationEnergy {
    pub local: f64,
    pub remote: f64,
}

pub fn computation_energies(
    scheme: Scheme,
    rho: [f64; 2],
    t: f64,
    cfg: &SystemConfig,
    ues: &[UeProfile; 2],
) -> Result<[ComputationEnergy; 2]> {
    let f = cpu_frequencies(scheme, rho, t, cfg, ues)?;
    let mut out = [ComputationEnergy {
        local: 0.0,
        remote: 0.0,
    }; 2];
    for k in 0..2 {
        out[k].local = ues[k].kappa * cfg.t_max * f[k].local.powi(3);
        if f[k].remote > 0.0 {
            let window = remote_window(scheme, k, t, cfg);
            out[k].remote = cfg.kappa_u * window * f[k].remote.powi(3);
        }
    }
    Ok(out)
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erf::erfc(x / SQRT_2)
}

/// Inverse of the Gaussian tail probability.
pub fn inverse_q(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain("eps", eps, "(0, 1)"));
    }
    let mut x = SQRT_2 * erf::erfc_inv(2.0 * eps);
    // a couple of Newton steps on Q(x) - eps remove the residual of the
    // rational approximation
    for _ in 0..2 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf <= 0.0 {
            break;
        }
        x += (q_function(x) - eps) / pdf;
    }
    Ok(x)
}

/// `ln(1 + Y)` for the minimum SINR `Y`; zero when nothing is offloaded.
pub fn log_snr_factor(
    regime: Regime,
    rho_l: f64,
    n: f64,
    eps: f64,
    dispersion: f64,
) -> Result<f64> {
    if rho_l == 0.0 {
        return Ok(0.0);
    }
    if !(rho_l > 0.0) {
        return Err(domain("rho*L", rho_l, "[0, inf)"));
    }
    if !(n > 0.0) {
        return Err(domain("blocklength", n, "(0, inf)"));
    }
    Ok(match regime {
        Regime::Infinite => LN_2 * rho_l / n,
        Regime::Finite => {
            if !(eps > 0.0 && eps < 0.5) {
                return Err(domain("eps", eps, "(0, 0.5)"));
            }
            LN_2 * rho_l / (n * (1.0 - eps)) + dispersion.sqrt() * inverse_q(eps)? / n.sqrt()
        }
    })
}

/// Minimum SINR/SNR needed to deliver `rho_l` bits in `n` symbols.
pub fn snr_threshold(regime: Regime, rho_l: f64, n: f64, eps: f64) -> Result<f64> {
    snr_threshold_with_dispersion(regime, rho_l, n, eps, 1.0)
}

pub fn snr_threshold_with_dispersion(
    regime: Regime,
    rho_l: f64,
    n: f64,
    eps: f64,
    dispersion: f64,
) -> Result<f64> {
    Ok(log_snr_factor(regime, rho_l, n, eps, dispersion)?.exp_m1())
}

/// Bits delivered in `n` symbols at SINR `gamma` (inverse of the threshold).
pub fn achievable_bits(regime: Regime, gamma: f64, n: f64, eps: f64, dispersion: f64) -> f64 {
    let shannon = n * gamma.ln_1p() / LN_2;
    match regime {
        Regime::Infinite => shannon,
        Regime::Finite => {
            let q = inverse_q(eps).unwrap_or(f64::NAN);
            (1.0 - eps) * (shannon - dispersion.sqrt() * q * n.sqrt() / LN_2)
        }
    }
}
