//! CSV artifacts and their `.meta.toml` sidecars.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use uavmec_core::{Decision, EvalMode};

use crate::scenario::{Scenario, ScenarioRecord};
use crate::sweep::{Status, SweepRow};

pub const OUT_DIR_ENV: &str = "UAVMEC_OUT_DIR";

pub const COLUMNS: [&str; 28] = [
    "param",
    "value",
    "scheme",
    "regime",
    "method",
    "eval_mode",
    "status",
    "rho1",
    "rho2",
    "t",
    "d",
    "p1",
    "p2",
    "e1_loc",
    "e1_rem",
    "e1_off",
    "e2_loc",
    "e2_rem",
    "e2_off",
    "e_total",
    "feasible",
    "success_only",
    "iterations",
    "converged",
    "message",
    "l1",
    "l2",
    "bandwidth",
];

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: bad {column} value {value:?}")]
    Field { row: usize, column: &'static str, value: String },
}

fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Scenario context repeated on every row so a sweep file stands alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowContext {
    pub l: [f64; 2],
    pub bandwidth: f64,
}

fn record(row: &SweepRow, ctx: RowContext) -> Vec<String> {
    let d = row.decision;
    let e = row.energy;
    let split = |k: usize, j: usize| opt(e.map(|e| e[k][j]));
    vec![
        row.param.map(|p| p.name().to_string()).unwrap_or_default(),
        opt(row.value),
        row.scheme.to_string(),
        row.regime.to_string(),
        row.method.name().to_string(),
        row.eval_mode.to_string(),
        row.status.name().to_string(),
        opt(d.map(|d| d.rho[0])),
        opt(d.map(|d| d.rho[1])),
        opt(d.map(|d| d.t)),
        opt(d.map(|d| d.d)),
        opt(row.powers.map(|p| p[0])),
        opt(row.powers.map(|p| p[1])),
        split(0, 0),
        split(0, 1),
        split(0, 2),
        split(1, 0),
        split(1, 1),
        split(1, 2),
        opt(row.total),
        row.feasible.to_string(),
        row.success_only.to_string(),
        row.iterations.to_string(),
        row.converged.to_string(),
        row.message.clone(),
        num(ctx.l[0]),
        num(ctx.l[1]),
        num(ctx.bandwidth),
    ]
}

/// Writes rows in a fixed column order; missing values are empty fields.
pub fn write_csv<W: Write>(w: W, rows: &[(SweepRow, RowContext)]) -> Result<(), OutputError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COLUMNS)?;
    for (row, ctx) in rows {
        out.write_record(record(row, *ctx))?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<(SweepRow, RowContext)>, OutputError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        rows.push(from_record(i + 1, &rec?)?);
    }
    Ok(rows)
}

/// Inverse of the row writer.
pub fn from_record(idx: usize, rec: &csv::StringRecord) -> Result<(SweepRow, RowContext), OutputError> {
    let col = |c: usize| rec.get(c).unwrap_or("");
    let bad = |c: usize| OutputError::Field {
        row: idx,
        column: COLUMNS[c],
        value: col(c).to_string(),
    };
    let parse = |c: usize| -> Result<f64, OutputError> { col(c).parse::<f64>().map_err(|_| bad(c)) };
    let maybe = |c: usize| -> Result<Option<f64>, OutputError> {
        if col(c).is_empty() {
            Ok(None)
        } else {
            parse(c).map(Some)
        }
    };
    let flag = |c: usize| col(c).parse::<bool>().map_err(|_| bad(c));
    let named = |c: usize| -> Result<String, OutputError> { Ok(col(c).to_string()) };

    let param = match col(0) {
        "" => None,
        s => Some(s.parse().map_err(|_| bad(0))?),
    };
    let rho = [maybe(7)?, maybe(8)?];
    let decision = match (rho, maybe(9)?, maybe(10)?) {
        ([Some(r1), Some(r2)], Some(t), Some(d)) => Some(Decision::new(r1, r2, t, d)),
        _ => None,
    };
    let powers = match (maybe(11)?, maybe(12)?) {
        (Some(a), Some(b)) => Some([a, b]),
        _ => None,
    };
    let e: Vec<Option<f64>> = (13..19).map(maybe).collect::<Result<_, _>>()?;
    let energy = if e.iter().all(Option::is_some) {
        let v: Vec<f64> = e.into_iter().flatten().collect();
        Some([[v[0], v[1], v[2]], [v[3], v[4], v[5]]])
    } else {
        None
    };
    let row = SweepRow {
        param,
        value: maybe(1)?,
        scheme: named(2)?.parse().map_err(|_| bad(2))?,
        regime: named(3)?.parse().map_err(|_| bad(3))?,
        method: named(4)?.parse().map_err(|_| bad(4))?,
        eval_mode: named(5)?.parse::<EvalMode>().map_err(|_| bad(5))?,
        status: named(6)?.parse::<Status>().map_err(|_| bad(6))?,
        decision,
        powers,
        energy,
        total: maybe(19)?,
        feasible: flag(20)?,
        success_only: flag(21)?,
        iterations: col(22).parse().map_err(|_| bad(22))?,
        converged: flag(23)?,
        message: named(24)?,
    };
    let ctx = RowContext {
        l: [parse(25)?, parse(26)?],
        bandwidth: parse(27)?,
    };
    Ok((row, ctx))
}

#[derive(Debug, Serialize)]
pub struct ArtifactMeta {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Serialize)]
pub struct RunMeta {
    pub command: String,
    pub schemes: Vec<String>,
    pub regimes: Vec<String>,
    pub eval_mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Tolerances {
    pub sigma_conv: f64,
    pub sca_rel_tol: f64,
    pub location_tol: f64,
    pub t_guard: f64,
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    artifact: ArtifactMeta,
    run: RunMeta,
    tolerances: Tolerances,
    #[serde(flatten)]
    scenario: &'a ScenarioRecord,
}

/// Resolves relative output paths against `UAVMEC_OUT_DIR` when it is set.
pub fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta.toml");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `path` and its sidecar.
pub fn write_artifact(path: &Path, rows: &[(SweepRow, RowContext)], run: RunMeta, sc: &Scenario) -> Result<(), OutputError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    fs::write(path, buf).map_err(io_err(path))?;

    let record = ScenarioRecord::from(sc);
    let meta = Meta {
        artifact: ArtifactMeta {
            file: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            columns: COLUMNS.iter().map(|c| c.to_string()).collect(),
            rows: rows.len(),
        },
        run,
        tolerances: Tolerances {
            sigma_conv: sc.system.sigma_conv,
            sca_rel_tol: uavmec_core::ScaOptions::default().rel_tol,
            location_tol: uavmec_core::bcd::location::LOCATION_TOL,
            t_guard: sc.system.t_guard,
        },
        scenario: &record,
    };
    let text = toml::to_string(&meta).map_err(|e| OutputError::Io {
        path: meta_path(path),
        source: io::Error::other(e),
    })?;
    let mp = meta_path(path);
    fs::write(&mp, text).map_err(io_err(&mp))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{run_cell, Method};
    use uavmec_core::{Regime, Scheme};

    #[test]
    fn rows_round_trip() {
        let sc = Scenario::default();
        let ctx = RowContext {
            l: [sc.ues[0].task_bits, sc.ues[1].task_bits],
            bandwidth: sc.system.bandwidth,
        };
        let mut big = sc.clone();
        big.ues[0].task_bits = 2400.0;
        big.ues[1].task_bits = 2400.0;
        let rows = vec![
            (run_cell(&sc, Scheme::Noma, Regime::Finite, Method::Full, None), ctx),
            (run_cell(&big, Scheme::Fdma, Regime::Finite, Method::FixedRho, None), ctx),
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for ((a, _), (b, c)) in rows.iter().zip(&back) {
            assert_eq!(a.status, b.status);
            assert_eq!(a.message, b.message);
            assert_eq!(*c, ctx);
            match (a.total, b.total) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-10 * x),
                (x, y) => assert_eq!(x, y),
            }
        }
        // the formatted text is a fixed point
        let mut again = Vec::new();
        write_csv(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn meta_path_appends_suffix() {
        assert_eq!(meta_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.meta.toml"));
    }
}
