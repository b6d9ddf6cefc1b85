use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uavmec_core::comparison::scheme_gaps;
use uavmec_core::{EvalMode, GridSpec, Regime, Scheme};
use uavmec_harness::output::{resolve_out, write_artifact, write_csv, RowContext, RunMeta};
use uavmec_harness::scenario::{parse_scenario, Scenario};
use uavmec_harness::sweep::{
    run_benchmarks, run_cell, run_sweep, row_from_result, FixedPoint, Method, Status, SweepParam, SweepRow, SweepSpec,
};

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_SOLVER: u8 = 4;

#[derive(Parser)]
#[command(name = "uavmec", version, about = "Energy minimisation for two-UE UAV edge computing")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise each scheme/regime once.
    Run(Common),
    /// Sweep one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: SweepArgs,
        #[command(flatten)]
        fixed: FixedArgs,
    },
    /// Full optimisation next to the fixed-rho, fixed-t and exhaustive benchmarks.
    Benchmarks {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: OptSweepArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Optimised energies and the pairwise scheme gaps.
    Compare(Common),
    /// Exhaustive grid search.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Args)]
struct Common {
    /// Comma-separated schemes (noma, fdma, tdma); all by default.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
    /// Comma-separated regimes (inf, fin); both by default.
    #[arg(long, value_delimiter = ',')]
    regime: Vec<Regime>,
    /// Scenario file; the bundled default scenario otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path. Writes a `.meta.toml` sidecar next to it. Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluation mode for fixed decisions and the grid search.
    #[arg(long, default_value = "strict")]
    eval_mode: EvalMode,
}

#[derive(Args)]
struct SweepArgs {
    /// L, L2, T_max, B, eps, rho2 or d.
    #[arg(long)]
    param: SweepParam,
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Force logarithmic (true) or linear (false) spacing.
    #[arg(long)]
    log: Option<bool>,
}

#[derive(Args)]
struct OptSweepArgs {
    #[arg(long, requires_all = ["from", "to"])]
    param: Option<SweepParam>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    #[arg(long, default_value_t = 4)]
    steps: usize,
    #[arg(long)]
    log: Option<bool>,
}

#[derive(Args)]
struct FixedArgs {
    #[arg(long, default_value_t = 0.5)]
    rho1: f64,
    #[arg(long, default_value_t = 0.5)]
    rho2: f64,
    /// Offloading time (s); T_max / 2 by default.
    #[arg(long)]
    t: Option<f64>,
    /// UAV location (m); D / 4 by default.
    #[arg(long)]
    d: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    rho_step: Option<f64>,
    /// Time step (s); T_max / 100 by default.
    #[arg(long)]
    t_step: Option<f64>,
    /// Location step (m); the location is solved exactly when absent.
    #[arg(long)]
    d_step: Option<f64>,
}

struct Fail(u8, String);

impl Fail {
    fn usage(msg: impl ToString) -> Self {
        Fail(EXIT_USAGE, msg.to_string())
    }
}

fn or_all<T: Copy>(v: &[T], all: &[T]) -> Vec<T> {
    if v.is_empty() {
        all.to_vec()
    } else {
        v.to_vec()
    }
}

fn load(c: &Common) -> Result<Scenario, Fail> {
    match &c.config {
        Some(p) => parse_scenario(p).map_err(Fail::usage),
        None => Ok(Scenario::default()),
    }
}

fn grid_spec(sc: &Scenario, g: &GridArgs, mode: EvalMode) -> Result<GridSpec, Fail> {
    let base = GridSpec::for_config(&sc.system);
    let spec = GridSpec {
        rho_step: g.rho_step.unwrap_or(base.rho_step),
        t_step: g.t_step.unwrap_or(base.t_step),
        d_step: g.d_step,
        eval_mode: mode,
    };
    spec.validate(&sc.system).map_err(Fail::usage)?;
    Ok(spec)
}

fn sweep_spec(param: SweepParam, from: f64, to: f64, steps: usize, log: Option<bool>) -> Result<SweepSpec, Fail> {
    let mut s = SweepSpec::new(param, from, to, steps);
    if let Some(l) = log {
        s.log = l;
    }
    s.validate().map_err(Fail::usage)?;
    Ok(s)
}

fn context(sc: &Scenario, row: &SweepRow) -> RowContext {
    let local = match (row.param, row.value) {
        (Some(p), Some(v)) => uavmec_harness::sweep::apply(sc, p, v),
        _ => sc.clone(),
    };
    RowContext {
        l: [local.ues[0].task_bits, local.ues[1].task_bits],
        bandwidth: local.system.bandwidth,
    }
}

fn emit(c: &Common, sc: &Scenario, command: &str, sweep: Option<&SweepSpec>, rows: Vec<SweepRow>) -> Result<(), Fail> {
    let rows: Vec<(SweepRow, RowContext)> = rows
        .into_iter()
        .map(|r| {
            let ctx = context(sc, &r);
            (r, ctx)
        })
        .collect();
    let io_fail = |e: uavmec_harness::output::OutputError| Fail(EXIT_SOLVER, e.to_string());
    match &c.out {
        Some(p) => {
            let run = RunMeta {
                command: command.to_string(),
                schemes: or_all(&c.scheme, &Scheme::ALL).iter().map(|s| s.to_string()).collect(),
                regimes: or_all(&c.regime, &Regime::ALL).iter().map(|r| r.to_string()).collect(),
                eval_mode: c.eval_mode.to_string(),
                sweep: sweep.map(|s| format!("{} {}..{} x{}{}", s.param, s.from, s.to, s.steps, if s.log { " log" } else { "" })),
            };
            let path = resolve_out(p);
            write_artifact(&path, &rows, run, sc).map_err(io_fail)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
            Ok(())
        }
        None => write_csv(io::stdout().lock(), &rows).map_err(io_fail),
    }
}

/// Single solves fail on any bad cell; sweeps only when nothing succeeded.
fn status(rows: &[SweepRow], strict: bool) -> Result<(), Fail> {
    let bad = |s: Status| rows.iter().filter(|r| r.status == s).collect::<Vec<_>>();
    if let Some(r) = bad(Status::Error).first() {
        return Err(Fail(EXIT_SOLVER, format!("{} {}: {}", r.scheme, r.regime, r.message)));
    }
    let inf = bad(Status::Infeasible);
    if (strict && !inf.is_empty()) || (!rows.is_empty() && inf.len() == rows.len()) {
        let r = inf[0];
        return Err(Fail(EXIT_INFEASIBLE, format!("{} {} infeasible: {}", r.scheme, r.regime, r.message)));
    }
    Ok(())
}

fn cells(c: &Common) -> Vec<(Scheme, Regime)> {
    let regimes = or_all(&c.regime, &Regime::ALL);
    or_all(&c.scheme, &Scheme::ALL)
        .into_iter()
        .flat_map(|s| regimes.iter().map(move |&r| (s, r)))
        .collect()
}

fn run(cli: Cli) -> Result<(), Fail> {
    match cli.cmd {
        Command::Run(c) => {
            let sc = load(&c)?;
            let rows: Vec<SweepRow> = cells(&c)
                .into_iter()
                .map(|(s, r)| run_cell(&sc, s, r, Method::Full, None))
                .collect();
            emit(&c, &sc, "run", None, rows.clone())?;
            status(&rows, true)
        }
        Command::Oracle { common: c, grid } => {
            let sc = load(&c)?;
            let g = grid_spec(&sc, &grid, c.eval_mode)?;
            let rows: Vec<SweepRow> = cells(&c)
                .into_iter()
                .map(|(s, r)| run_cell(&sc, s, r, Method::Exhaustive, Some(&g)))
                .collect();
            emit(&c, &sc, "oracle", None, rows.clone())?;
            status(&rows, true)
        }
        Command::Sweep { common: c, sweep, fixed } => {
            let sc = load(&c)?;
            let spec = sweep_spec(sweep.param, sweep.from, sweep.to, sweep.steps, sweep.log)?;
            let fp = FixedPoint {
                rho: [fixed.rho1, fixed.rho2],
                t: fixed.t,
                d: fixed.d,
            };
            let rows = run_sweep(
                &sc,
                &spec,
                &or_all(&c.scheme, &Scheme::ALL),
                &or_all(&c.regime, &Regime::ALL),
                c.eval_mode,
                &fp,
            );
            emit(&c, &sc, "sweep", Some(&spec), rows.clone())?;
            status(&rows, false)
        }
        Command::Benchmarks { common: c, sweep, grid } => {
            let sc = load(&c)?;
            let g = grid_spec(&sc, &grid, c.eval_mode)?;
            let spec = match sweep.param {
                Some(p) => Some(sweep_spec(p, sweep.from.unwrap_or(0.0), sweep.to.unwrap_or(0.0), sweep.steps, sweep.log)?),
                None => None,
            };
            if spec.as_ref().is_some_and(|s| s.param.is_fixed_decision()) {
                return Err(Fail::usage("benchmarks sweep only optimising parameters"));
            }
            let rows = run_benchmarks(
                &sc,
                spec.as_ref(),
                &or_all(&c.scheme, &Scheme::ALL),
                &or_all(&c.regime, &Regime::ALL),
                Some(&g),
            );
            emit(&c, &sc, "benchmarks", spec.as_ref(), rows.clone())?;
            status(&rows, false)
        }
        Command::Compare(c) => {
            let sc = load(&c)?;
            let rep = scheme_gaps(
                &sc.system,
                &sc.ues,
                &or_all(&c.regime, &Regime::ALL),
                &or_all(&c.scheme, &Scheme::ALL),
            );
            for g in &rep.gaps {
                let holds = match g.holds {
                    Some(true) => "holds",
                    Some(false) => "violated",
                    None => "n/a",
                };
                eprintln!(
                    "{}: E({}) - E({}) = {:.6e} J [{}] {}",
                    g.regime, g.minuend, g.subtrahend, g.gap, g.relation, holds
                );
            }
            let rows: Vec<SweepRow> = rep
                .cells
                .into_iter()
                .map(|cell| row_from_result(&sc, cell.scheme, cell.regime, cell.result))
                .collect();
            emit(&c, &sc, "compare", None, rows.clone())?;
            status(&rows, false)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
