//! Scenario files: TOML with `[system]`, `[ue1]`, `[ue2]` and `[solver]`
//! sections. Values are either bare numbers in SI units or strings carrying a
//! unit suffix, e.g. `N0 = "-169 dBmHz"`, `T_max = "1 ms"`, `L = "1.2 kbit"`.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;
use uavmec_core::model::{db_to_linear, dbm_per_hz_to_w};
use uavmec_core::{ModelError, SystemConfig, UeProfile};

/// The bundled default scenario.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub system: SystemConfig,
    pub ues: [UeProfile; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Quantity {
    Number(f64),
    Text(String),
}

type Field = Option<Spanned<Quantity>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    system: Option<RawSystem>,
    ue1: Option<RawUe>,
    ue2: Option<RawUe>,
    solver: Option<RawSolver>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(rename = "D")]
    d: Field,
    #[serde(rename = "H")]
    h: Field,
    beta0: Field,
    #[serde(rename = "N0")]
    n0: Field,
    #[serde(rename = "B")]
    b: Field,
    #[serde(rename = "T_max")]
    t_max: Field,
    #[serde(rename = "f_U_max")]
    f_u_max: Field,
    #[serde(rename = "kappa_U")]
    kappa_u: Field,
    eta: Field,
    delta: Field,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUe {
    #[serde(rename = "L")]
    l: Field,
    c: Field,
    kappa: Field,
    f_max: Field,
    #[serde(rename = "P_max")]
    p_max: Field,
    eps: Field,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    sigma_conv: Field,
    t_guard: Field,
    dispersion: Field,
}

#[derive(Debug, Clone, Copy)]
enum Unit {
    Plain,
    Length,
    Gain,
    Density,
    Frequency,
    Time,
    Power,
    Bits,
    CyclesPerBit,
}

fn line_of(src: &str, span: Range<usize>) -> usize {
    1 + src.as_bytes()[..span.start.min(src.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
}

fn scale(unit: Unit, suffix: &str, x: f64) -> Option<f64> {
    let s = suffix;
    Some(match unit {
        Unit::Plain => match s {
            "" => x,
            _ => return None,
        },
        Unit::Length => match s {
            "" | "m" => x,
            "km" => x * 1e3,
            _ => return None,
        },
        Unit::Gain => match s {
            "" => x,
            "dB" => db_to_linear(x),
            _ => return None,
        },
        Unit::Density => match s {
            "" | "W/Hz" => x,
            "dBmHz" | "dBm/Hz" => dbm_per_hz_to_w(x),
            _ => return None,
        },
        Unit::Frequency => match s {
            "" | "Hz" => x,
            "kHz" => x * 1e3,
            "MHz" => x * 1e6,
            "GHz" => x * 1e9,
            _ => return None,
        },
        Unit::Time => match s {
            "" | "s" => x,
            "ms" => x * 1e-3,
            "us" => x * 1e-6,
            _ => return None,
        },
        Unit::Power => match s {
            "" | "W" => x,
            "mW" => x * 1e-3,
            "dBm" => 1e-3 * db_to_linear(x),
            _ => return None,
        },
        Unit::Bits => match s {
            "" | "bit" | "bits" => x,
            "kbit" => x * 1e3,
            "Mbit" => x * 1e6,
            _ => return None,
        },
        Unit::CyclesPerBit => match s {
            "" | "cycles/bit" => x,
            _ => return None,
        },
    })
}

fn convert(src: &str, key: &str, field: &Field, unit: Unit, target: &mut f64) -> Result<(), ScenarioError> {
    let Some(sp) = field else { return Ok(()) };
    let line = line_of(src, sp.span());
    let bad = |message: String| ScenarioError::Parse { line, message };
    let value = match sp.get_ref() {
        Quantity::Number(x) => scale(unit, "", *x),
        Quantity::Text(t) => {
            let t = t.trim();
            let split = t.find(|c: char| c.is_whitespace()).unwrap_or(t.len());
            let (num, suffix) = t.split_at(split);
            let x: f64 = num
                .parse()
                .map_err(|_| bad(format!("{key}: cannot read a number from {t:?}")))?;
            scale(unit, suffix.trim(), x)
                .ok_or_else(|| bad(format!("{key}: unit {:?} not accepted", suffix.trim())))?
                .into()
        }
    };
    let value = value.ok_or_else(|| bad(format!("{key}: a bare number is not accepted")))?;
    if !value.is_finite() {
        return Err(bad(format!("{key}: value is not finite")));
    }
    *target = value;
    Ok(())
}

fn apply_ue(src: &str, raw: &RawUe, ue: &mut UeProfile) -> Result<(), ScenarioError> {
    convert(src, "L", &raw.l, Unit::Bits, &mut ue.task_bits)?;
    convert(src, "c", &raw.c, Unit::CyclesPerBit, &mut ue.cycles_per_bit)?;
    convert(src, "kappa", &raw.kappa, Unit::Plain, &mut ue.kappa)?;
    convert(src, "f_max", &raw.f_max, Unit::Frequency, &mut ue.f_max)?;
    convert(src, "P_max", &raw.p_max, Unit::Power, &mut ue.p_max)?;
    convert(src, "eps", &raw.eps, Unit::Plain, &mut ue.eps)
}

fn validation(section: &str, e: ModelError) -> ScenarioError {
    match e {
        ModelError::Domain { name, value, expected } => ScenarioError::Validation {
            field: format!("{section}.{name}"),
            message: format!("{value} is outside {expected}"),
        },
        other => ScenarioError::Validation {
            field: section.to_string(),
            message: other.to_string(),
        },
    }
}

/// Parses scenario text. Missing keys keep the built-in defaults.
pub fn parse_scenario_str(src: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawFile = toml::from_str(src).map_err(|e| ScenarioError::Parse {
        line: e.span().map_or(1, |s| line_of(src, s)),
        message: e.message().to_string(),
    })?;
    let mut sc = Scenario::default();
    if let Some(s) = &raw.system {
        let c = &mut sc.system;
        convert(src, "D", &s.d, Unit::Length, &mut c.ue_distance)?;
        convert(src, "H", &s.h, Unit::Length, &mut c.altitude)?;
        convert(src, "beta0", &s.beta0, Unit::Gain, &mut c.beta0)?;
        convert(src, "N0", &s.n0, Unit::Density, &mut c.n0)?;
        convert(src, "B", &s.b, Unit::Frequency, &mut c.bandwidth)?;
        convert(src, "T_max", &s.t_max, Unit::Time, &mut c.t_max)?;
        convert(src, "f_U_max", &s.f_u_max, Unit::Frequency, &mut c.f_u_max)?;
        convert(src, "kappa_U", &s.kappa_u, Unit::Plain, &mut c.kappa_u)?;
        convert(src, "eta", &s.eta, Unit::Plain, &mut c.eta)?;
        convert(src, "delta", &s.delta, Unit::Plain, &mut c.delta)?;
    }
    if let Some(s) = &raw.solver {
        let c = &mut sc.system;
        convert(src, "sigma_conv", &s.sigma_conv, Unit::Plain, &mut c.sigma_conv)?;
        convert(src, "t_guard", &s.t_guard, Unit::Plain, &mut c.t_guard)?;
        convert(src, "dispersion", &s.dispersion, Unit::Plain, &mut c.dispersion)?;
    }
    for (k, ue) in [&raw.ue1, &raw.ue2].into_iter().enumerate() {
        if let Some(u) = ue {
            apply_ue(src, u, &mut sc.ues[k])?;
        }
    }
    sc.system.validate().map_err(|e| validation("system", e))?;
    for k in 0..2 {
        sc.ues[k].validate().map_err(|e| validation(&format!("ue{}", k + 1), e))?;
    }
    Ok(sc)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let src = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&src)
}

/// SI values of a scenario, laid out so that the TOML form parses back.
#[derive(Debug, Serialize)]
pub struct ScenarioRecord {
    pub system: SystemRecord,
    pub ue1: UeRecord,
    pub ue2: UeRecord,
    pub solver: SolverRecord,
}

#[derive(Debug, Serialize)]
pub struct SystemRecord {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub beta0: f64,
    #[serde(rename = "N0")]
    pub n0: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "T_max")]
    pub t_max: f64,
    #[serde(rename = "f_U_max")]
    pub f_u_max: f64,
    #[serde(rename = "kappa_U")]
    pub kappa_u: f64,
    pub eta: f64,
    pub delta: f64,
}

#[derive(Debug, Serialize)]
pub struct UeRecord {
    #[serde(rename = "L")]
    pub l: f64,
    pub c: f64,
    pub kappa: f64,
    pub f_max: f64,
    #[serde(rename = "P_max")]
    pub p_max: f64,
    pub eps: f64,
}

#[derive(Debug, Serialize)]
pub struct SolverRecord {
    pub sigma_conv: f64,
    pub t_guard: f64,
    pub dispersion: f64,
}

impl From<&Scenario> for ScenarioRecord {
    fn from(sc: &Scenario) -> Self {
        let c = &sc.system;
        let ue = |u: &UeProfile| UeRecord {
            l: u.task_bits,
            c: u.cycles_per_bit,
            kappa: u.kappa,
            f_max: u.f_max,
            p_max: u.p_max,
            eps: u.eps,
        };
        ScenarioRecord {
            system: SystemRecord {
                d: c.ue_distance,
                h: c.altitude,
                beta0: c.beta0,
                n0: c.n0,
                b: c.bandwidth,
                t_max: c.t_max,
                f_u_max: c.f_u_max,
                kappa_u: c.kappa_u,
                eta: c.eta,
                delta: c.delta,
            },
            ue1: ue(&sc.ues[0]),
            ue2: ue(&sc.ues[1]),
            solver: SolverRecord {
                sigma_conv: c.sigma_conv,
                t_guard: c.t_guard,
                dispersion: c.dispersion,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_default_matches_builtin() {
        let sc = parse_scenario_str(DEFAULT_SCENARIO).unwrap();
        assert!((sc.system.n0 - 1.2589e-20).abs() < 1e-24);
        assert!((sc.system.beta0 - 1e-6).abs() < 1e-18);
        let d = Scenario::default();
        assert!((sc.system.n0 / d.system.n0 - 1.0).abs() < 1e-12);
        assert_eq!(sc.ues, d.ues);
        assert_eq!(sc.system.bandwidth, d.system.bandwidth);
        assert_eq!(sc.system.t_max, d.system.t_max);
    }

    #[test]
    fn empty_is_default() {
        assert_eq!(parse_scenario_str("").unwrap(), Scenario::default());
    }

    #[test]
    fn units() {
        let sc = parse_scenario_str(
            "[system]\nB = \"4 MHz\"\nT_max = \"800 us\"\nD = \"0.1 km\"\n[ue2]\nL = \"1.8 kbit\"\nP_max = \"20 dBm\"\n",
        )
        .unwrap();
        assert_eq!(sc.system.bandwidth, 4e6);
        assert!((sc.system.t_max - 8e-4).abs() < 1e-18);
        assert_eq!(sc.system.ue_distance, 100.0);
        assert_eq!(sc.ues[1].task_bits, 1800.0);
        assert!((sc.ues[1].p_max - 0.1).abs() < 1e-15);
        assert_eq!(sc.ues[0].task_bits, 1200.0);
    }

    #[test]
    fn eps_out_of_range() {
        let err = parse_scenario_str("[ue1]\neps = 0.7\n").unwrap_err();
        match err {
            ScenarioError::Validation { field, .. } => assert_eq!(field, "ue1.eps"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn errors_carry_lines() {
        let err = parse_scenario_str("[system]\nB = 3e6\nT_max = \"1 parsec\"\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 3, .. }), "{err}");
        let err = parse_scenario_str("[system]\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 3, .. }), "{err}");
        let err = parse_scenario_str("[ue1]\nL = [1, 2]\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }), "{err}");
        let err = parse_scenario_str("[ue1]\nL = \"x kbit\"\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }), "{err}");
        let err = parse_scenario_str("[ue1]\nL = \n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn record_parses_back() {
        let sc = parse_scenario_str("[system]\nB = \"2 MHz\"\n[ue1]\neps = 1e-3\n").unwrap();
        let text = toml::to_string(&ScenarioRecord::from(&sc)).unwrap();
        assert_eq!(parse_scenario_str(&text).unwrap(), sc);
    }
}
