//! Parameter sweeps and benchmark runs. Every cell becomes one `SweepRow`;
//! cell failures are recorded in the row and never abort a run.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use uavmec_core::{
    bcd_solve_with, check_constraints_in, feasible_init, grid_search, optimize, total_energy, BcdOptions, Blocks,
    Decision, EvalMode, GridSpec, ModelError, OptResult, Regime, Scheme,
};

use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Task size of both UEs (bits).
    L,
    /// Task size of UE 2 (bits).
    L2,
    TMax,
    B,
    /// Decoding error target of both UEs.
    Eps,
    /// UE 2's offloaded share at a fixed decision.
    Rho2,
    /// UAV location at a fixed decision.
    D,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::L,
        SweepParam::L2,
        SweepParam::TMax,
        SweepParam::B,
        SweepParam::Eps,
        SweepParam::Rho2,
        SweepParam::D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::L => "L",
            SweepParam::L2 => "L2",
            SweepParam::TMax => "T_max",
            SweepParam::B => "B",
            SweepParam::Eps => "eps",
            SweepParam::Rho2 => "rho2",
            SweepParam::D => "d",
        }
    }

    /// Sweeps that evaluate a fixed decision instead of optimising.
    pub fn is_fixed_decision(self) -> bool {
        matches!(self, SweepParam::Rho2 | SweepParam::D)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown sweep parameter {s:?} (L, L2, T_max, B, eps, rho2, d)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub log: bool,
}

impl SweepSpec {
    /// Linear spacing, except for `eps` which is spaced logarithmically.
    pub fn new(param: SweepParam, from: f64, to: f64, steps: usize) -> Self {
        SweepSpec {
            param,
            from,
            to,
            steps,
            log: param == SweepParam::Eps,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.from];
        }
        let n = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let a = i as f64 / n;
                if i + 1 == self.steps {
                    self.to
                } else if self.log {
                    self.from * (self.to / self.from).powf(a)
                } else {
                    self.from + a * (self.to - self.from)
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.steps == 0 {
            return Err("steps must be at least 1".into());
        }
        if !(self.from.is_finite() && self.to.is_finite()) {
            return Err("sweep bounds must be finite".into());
        }
        if self.log && !(self.from > 0.0 && self.to > 0.0) {
            return Err("logarithmic sweeps need positive bounds".into());
        }
        Ok(())
    }
}

/// Decision used by fixed-decision sweeps; unset `t` and `d` default to
/// `T_max / 2` and `D / 4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub rho: [f64; 2],
    pub t: Option<f64>,
    pub d: Option<f64>,
}

impl Default for FixedPoint {
    fn default() -> Self {
        FixedPoint {
            rho: [0.5, 0.5],
            t: None,
            d: None,
        }
    }
}

impl FixedPoint {
    pub fn resolve(&self, sc: &Scenario) -> Decision {
        Decision {
            rho: self.rho,
            t: self.t.unwrap_or(0.5 * sc.system.t_max),
            d: self.d.unwrap_or(0.25 * sc.system.ue_distance),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Full,
    /// `rho = (0.5, 0.5)` held fixed.
    FixedRho,
    /// `t = T_max / 2` held fixed.
    FixedTime,
    Exhaustive,
    FixedDecision,
}

impl Method {
    pub const BENCHMARKS: [Method; 4] = [Method::Full, Method::FixedRho, Method::FixedTime, Method::Exhaustive];

    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::FixedRho => "fixed-rho",
            Method::FixedTime => "fixed-t",
            Method::Exhaustive => "exhaustive",
            Method::FixedDecision => "fixed-decision",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Method::FixedDecision]
            .into_iter()
            .chain(Method::BENCHMARKS)
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Infeasible,
    Error,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Infeasible => "infeasible",
            Status::Error => "error",
        }
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Status::Ok, Status::Infeasible, Status::Error]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown status {s:?}"))
    }
}

/// Per-UE energy split `[local, remote, offload]`.
pub type UeSplit = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Swept parameter and its value; `None` outside sweeps.
    pub param: Option<SweepParam>,
    pub value: Option<f64>,
    pub scheme: Scheme,
    pub regime: Regime,
    pub method: Method,
    pub eval_mode: EvalMode,
    pub status: Status,
    pub decision: Option<Decision>,
    pub powers: Option<[f64; 2]>,
    pub energy: Option<[UeSplit; 2]>,
    pub total: Option<f64>,
    /// All constraints hold in the row's evaluation mode.
    pub feasible: bool,
    pub success_only: bool,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

impl SweepRow {
    fn empty(scheme: Scheme, regime: Regime, method: Method, eval_mode: EvalMode) -> Self {
        SweepRow {
            param: None,
            value: None,
            scheme,
            regime,
            method,
            eval_mode,
            status: Status::Error,
            decision: None,
            powers: None,
            energy: None,
            total: None,
            feasible: false,
            success_only: false,
            iterations: 0,
            converged: false,
            message: String::new(),
        }
    }

    fn fill(&mut self, sc: &Scenario, dec: Decision) -> Result<(), ModelError> {
        let e = total_energy(self.scheme, self.regime, &dec, &sc.system, &sc.ues, self.eval_mode)?;
        let rep = check_constraints_in(self.scheme, self.regime, &dec, &sc.system, &sc.ues, self.eval_mode);
        self.decision = Some(dec);
        self.powers = Some(e.powers.p);
        self.energy = Some(e.ue.map(|u| [u.local, u.remote, u.offload]));
        self.total = Some(e.total);
        self.success_only = e.success_only;
        self.feasible = rep.is_feasible();
        self.status = if self.feasible { Status::Ok } else { Status::Infeasible };
        if !self.feasible {
            let v: Vec<String> = rep.violations().map(|v| v.id.to_string()).collect();
            self.message = format!("violates {}", v.join("; "));
        }
        Ok(())
    }

    fn fail(&mut self, e: &ModelError) {
        self.status = match e {
            ModelError::Infeasible(_) | ModelError::SicInfeasible { .. } | ModelError::InfeasibleTime { .. } => {
                Status::Infeasible
            }
            _ => Status::Error,
        };
        self.message = e.to_string();
    }
}

/// Row for an optimiser result computed elsewhere.
pub fn row_from_result(sc: &Scenario, scheme: Scheme, regime: Regime, r: Result<OptResult, ModelError>) -> SweepRow {
    let mut row = SweepRow::empty(scheme, regime, Method::Full, EvalMode::Strict);
    from_opt(&mut row, sc, r);
    row
}

fn from_opt(row: &mut SweepRow, sc: &Scenario, r: Result<OptResult, ModelError>) {
    match r {
        Ok(r) => {
            row.iterations = r.iterations;
            row.converged = r.converged;
            if let Err(e) = row.fill(sc, r.decision) {
                row.fail(&e);
            }
        }
        Err(e) => row.fail(&e),
    }
}

/// Optimises (or enumerates) one scheme/regime cell with the given method.
pub fn run_cell(sc: &Scenario, scheme: Scheme, regime: Regime, method: Method, grid: Option<&GridSpec>) -> SweepRow {
    let (cfg, ues) = (&sc.system, &sc.ues);
    let mut row = SweepRow::empty(scheme, regime, method, EvalMode::Strict);
    let partial = |rho: Option<[f64; 2]>, t: Option<f64>, blocks: Blocks| {
        let init = feasible_init(scheme, regime, cfg, ues, rho, t)?;
        let opts = BcdOptions { blocks, ..BcdOptions::default() };
        bcd_solve_with(scheme, regime, cfg, ues, &init, &opts)
    };
    let res = match method {
        Method::Full => optimize(scheme, regime, cfg, ues),
        Method::FixedRho => partial(Some([0.5, 0.5]), None, Blocks { rho: false, ..Blocks::ALL }),
        Method::FixedTime => partial(None, Some(0.5 * cfg.t_max), Blocks { time: false, ..Blocks::ALL }),
        Method::Exhaustive => {
            let g = grid.copied().unwrap_or_else(|| GridSpec::for_config(cfg));
            row.eval_mode = g.eval_mode;
            grid_search(scheme, regime, cfg, ues, &g)
        }
        Method::FixedDecision => unreachable!("fixed decisions go through evaluate_cell"),
    };
    from_opt(&mut row, sc, res);
    row
}

/// Evaluates a fixed decision without optimising.
pub fn evaluate_cell(sc: &Scenario, scheme: Scheme, regime: Regime, dec: Decision, mode: EvalMode) -> SweepRow {
    let mut row = SweepRow::empty(scheme, regime, Method::FixedDecision, mode);
    if let Err(e) = row.fill(sc, dec) {
        row.decision = Some(dec);
        row.fail(&e);
    }
    row
}

/// Scenario with the swept quantity set to `v`. Fixed-decision parameters
/// leave the scenario unchanged.
pub fn apply(sc: &Scenario, param: SweepParam, v: f64) -> Scenario {
    let mut s = sc.clone();
    match param {
        SweepParam::L => {
            s.ues[0].task_bits = v;
            s.ues[1].task_bits = v;
        }
        SweepParam::L2 => s.ues[1].task_bits = v,
        SweepParam::TMax => s.system.t_max = v,
        SweepParam::B => s.system.bandwidth = v,
        SweepParam::Eps => {
            s.ues[0].eps = v;
            s.ues[1].eps = v;
        }
        SweepParam::Rho2 | SweepParam::D => {}
    }
    s
}

fn cells(schemes: &[Scheme], regimes: &[Regime]) -> Vec<(Scheme, Regime)> {
    schemes
        .iter()
        .flat_map(|&s| regimes.iter().map(move |&r| (s, r)))
        .collect()
}

/// One row per (value x scheme x regime), in sweep order. Optimising sweeps
/// run the full optimiser; `rho2` and `d` sweeps evaluate `fixed` with the
/// swept coordinate replaced, in `mode`.
pub fn run_sweep(
    sc: &Scenario,
    spec: &SweepSpec,
    schemes: &[Scheme],
    regimes: &[Regime],
    mode: EvalMode,
    fixed: &FixedPoint,
) -> Vec<SweepRow> {
    let jobs: Vec<(f64, Scheme, Regime)> = spec
        .values()
        .into_iter()
        .flat_map(|v| cells(schemes, regimes).into_iter().map(move |(s, r)| (v, s, r)))
        .collect();
    jobs.par_iter()
        .map(|&(v, scheme, regime)| {
            let local = apply(sc, spec.param, v);
            let mut row = if spec.param.is_fixed_decision() {
                let mut dec = fixed.resolve(&local);
                match spec.param {
                    SweepParam::Rho2 => dec.rho[1] = v,
                    _ => dec.d = v,
                }
                evaluate_cell(&local, scheme, regime, dec, mode)
            } else {
                run_cell(&local, scheme, regime, Method::Full, None)
            };
            row.param = Some(spec.param);
            row.value = Some(v);
            row
        })
        .collect()
}

/// Full optimisation next to the fixed-split, fixed-time and exhaustive
/// benchmarks, optionally along a sweep.
pub fn run_benchmarks(
    sc: &Scenario,
    sweep: Option<&SweepSpec>,
    schemes: &[Scheme],
    regimes: &[Regime],
    grid: Option<&GridSpec>,
) -> Vec<SweepRow> {
    let values: Vec<Option<f64>> = match sweep {
        Some(s) => s.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let jobs: Vec<(Option<f64>, Scheme, Regime, Method)> = values
        .into_iter()
        .flat_map(|v| {
            cells(schemes, regimes)
                .into_iter()
                .flat_map(move |(s, r)| Method::BENCHMARKS.into_iter().map(move |m| (v, s, r, m)))
        })
        .collect();
    jobs.par_iter()
        .map(|&(v, scheme, regime, method)| {
            let local = match (sweep, v) {
                (Some(s), Some(v)) => apply(sc, s.param, v),
                _ => sc.clone(),
            };
            let mut row = run_cell(&local, scheme, regime, method, grid);
            row.param = sweep.map(|s| s.param);
            row.value = v;
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_spacing() {
        let s = SweepSpec::new(SweepParam::L, 600.0, 2400.0, 4);
        assert_eq!(s.values(), vec![600.0, 1200.0, 1800.0, 2400.0]);
        let s = SweepSpec::new(SweepParam::Eps, 1e-7, 1e-1, 7);
        let v = s.values();
        assert_eq!(v.len(), 7);
        for (i, x) in v.iter().enumerate() {
            let want = 10f64.powi(i as i32 - 7);
            assert!((x / want - 1.0).abs() < 1e-12, "{x} vs {want}");
        }
        assert_eq!(SweepSpec::new(SweepParam::B, 2e6, 4e6, 1).values(), vec![2e6]);
    }

    #[test]
    fn param_names_round_trip() {
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert!("x".parse::<SweepParam>().is_err());
    }

    #[test]
    fn single_step_matches_optimizer() {
        let sc = Scenario::default();
        let spec = SweepSpec::new(SweepParam::B, 3e6, 3e6, 1);
        let rows = run_sweep(&sc, &spec, &[Scheme::Tdma], &[Regime::Finite], EvalMode::Strict, &FixedPoint::default());
        assert_eq!(rows.len(), 1);
        let direct = optimize(Scheme::Tdma, Regime::Finite, &sc.system, &sc.ues).unwrap();
        assert_eq!(rows[0].total, Some(direct.energy.total));
        assert_eq!(rows[0].decision, Some(direct.decision));
    }

    #[test]
    fn infeasible_cell_is_recorded() {
        let mut sc = Scenario::default();
        sc.ues[0].task_bits = 2400.0;
        sc.ues[1].task_bits = 2400.0;
        let row = run_cell(&sc, Scheme::Fdma, Regime::Finite, Method::FixedRho, None);
        assert_eq!(row.status, Status::Infeasible);
        assert!(row.total.is_none());
        assert!(!row.message.is_empty());
    }
}
