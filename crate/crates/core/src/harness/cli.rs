//! `async-mel` command line.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 infeasible instance.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::config::Config;
use super::output::{divergence_table, fmt_sig, sweep_table, Cell, Format, Table};
use super::{generate_scenario, run_divergence_experiment, run_scheme, run_sweep, Scenario, Scheme, SweepGrid};
use crate::allocator::{brute_force_oracle, integerize_sai, relaxed_solve, AllocationProblem, IntegerAllocation};
use crate::exec::Execution;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "async-mel", version, about = "Staleness-aware task allocation for asynchronous edge learning")]
struct Cli {
    /// Configuration file (dotted keys, TOML syntax).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `scenario.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tabular output format; `solve` and `oracle` print text when unset.
    #[arg(long, global = true)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Allocate one instance and print the result.
    Solve {
        #[arg(long, default_value = "HA-async")]
        scheme: Scheme,
    },
    /// Run the scheme grid from `sweep.*` and emit one row per cell.
    Sweep {
        /// Evaluate cells one at a time.
        #[arg(long)]
        sequential: bool,
    },
    /// Compare the heuristic against exhaustive search.
    Oracle,
    /// Divergence traces of each scheme on synthetic convex learners.
    Simulate,
    /// Per-learner time-law coefficients.
    Profile,
}

/// Runs the CLI on `argv` (including the program name).
pub fn cli_main<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_infeasible() {
                2
            } else {
                1
            }
        }
    }
}

fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.scenario.seed = seed;
    }
    let mut buf = Vec::new();
    match &cli.command {
        Command::Solve { scheme } => solve(&cfg, *scheme, cli.format, &mut buf)?,
        Command::Sweep { sequential } => {
            let exec = if *sequential { Execution::Sequential } else { Execution::Parallel };
            sweep(&cfg, exec, cli.format.unwrap_or_default(), &mut buf)?
        }
        Command::Oracle => oracle(&cfg, cli.format, &mut buf)?,
        Command::Simulate => simulate(&cfg, cli.format.unwrap_or_default(), &mut buf)?,
        Command::Profile => profile(&cfg, cli.format.unwrap_or_default(), &mut buf)?,
    }
    // Output is buffered so a failing run writes nothing.
    match &cli.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            w.write_all(&buf)?;
            w.flush()?;
        }
        None => stdout.write_all(&buf)?,
    }
    Ok(())
}

/// The explicit `problem.*` instance if given, else a generated scenario.
fn instance(cfg: &Config) -> Result<(AllocationProblem, Option<Scenario>)> {
    match &cfg.problem {
        Some(p) => Ok((p.clone(), None)),
        None => {
            let s = generate_scenario(&cfg.scenario)?;
            Ok((s.problem.clone(), Some(s)))
        }
    }
}

fn allocation_table(alloc: &IntegerAllocation) -> Table {
    let mut t = Table::new(vec!["learner", "tau", "batch", "time_s"]);
    for i in 0..alloc.taus.len() {
        t.push(vec![
            Cell::Int(i as u64 + 1),
            Cell::Int(alloc.taus[i]),
            Cell::Int(alloc.batches[i]),
            Cell::Float(alloc.times[i]),
        ]);
    }
    t
}

fn list(v: &[u64]) -> String {
    let items: Vec<String> = v.iter().map(u64::to_string).collect();
    format!("[{}]", items.join(", "))
}

fn solve(cfg: &Config, scheme: Scheme, format: Option<Format>, out: &mut dyn Write) -> Result<()> {
    let (problem, _) = instance(cfg)?;
    let alloc = run_scheme(scheme, &problem, cfg.oracle_tau_cap)?;
    if let Some(f) = format {
        return allocation_table(&alloc).write(f, out);
    }
    writeln!(out, "scheme = {scheme}")?;
    writeln!(out, "learners = {}", problem.learners())?;
    writeln!(out, "cycle_budget_s = {}", fmt_sig(problem.cycle_budget_s))?;
    writeln!(out, "dataset_size = {}", problem.dataset_size)?;
    if scheme == Scheme::HaAsync {
        let cont = relaxed_solve(&problem)?;
        writeln!(out, "relaxed_common_tau = {}", fmt_sig(cont.common_tau))?;
        writeln!(out, "relaxed_slack_z = {}", fmt_sig(cont.slack_z))?;
    }
    writeln!(out, "taus = {}", list(&alloc.taus))?;
    writeln!(out, "batches = {}", list(&alloc.batches))?;
    let times: Vec<String> = alloc.times.iter().map(|&t| fmt_sig(t)).collect();
    writeln!(out, "times_s = [{}]", times.join(", "))?;
    writeln!(out, "max_staleness = {}", fmt_sig(alloc.report.max_staleness))?;
    writeln!(out, "avg_staleness = {}", fmt_sig(alloc.report.avg_staleness))?;
    Ok(())
}

fn sweep(cfg: &Config, exec: Execution, format: Format, out: &mut dyn Write) -> Result<()> {
    let seeds = (0..cfg.sweep.num_seeds).map(|i| cfg.scenario.seed + i).collect();
    let grid = SweepGrid {
        base: cfg.scenario.clone(),
        learner_counts: cfg.sweep.learner_counts.clone(),
        cycle_budgets_s: cfg.sweep.cycle_budgets_s.clone(),
        seeds,
        schemes: cfg.sweep.schemes.clone(),
        oracle_tau_cap: cfg.oracle_tau_cap,
    };
    cfg.scenario.validate()?;
    sweep_table(&run_sweep(&grid, exec)).write(format, out)
}

fn oracle(cfg: &Config, format: Option<Format>, out: &mut dyn Write) -> Result<()> {
    let (problem, _) = instance(cfg)?;
    let exact = brute_force_oracle(&problem, cfg.oracle_tau_cap, Execution::Parallel)?;
    let heuristic = integerize_sai(&relaxed_solve(&problem)?, &problem)?;
    for (a, name) in [(&exact, "oracle"), (&heuristic, "heuristic")] {
        a.check_feasible(&problem)
            .map_err(|v| Error::InfeasibleProblem(format!("{name} produced an invalid allocation: {v}")))?;
    }
    let gap = heuristic.report.max_staleness - exact.report.max_staleness;
    if let Some(f) = format {
        let mut t = Table::new(vec!["method", "max_staleness", "avg_staleness", "taus", "batches"]);
        for (name, a) in [("HA-async", &heuristic), ("HA-async-oracle", &exact)] {
            t.push(vec![
                Cell::Str(name.into()),
                Cell::Float(a.report.max_staleness),
                Cell::Float(a.report.avg_staleness),
                Cell::List(a.taus.clone()),
                Cell::List(a.batches.clone()),
            ]);
        }
        return t.write(f, out);
    }
    writeln!(out, "learners = {}", problem.learners())?;
    writeln!(out, "oracle_tau_cap = {}", cfg.oracle_tau_cap)?;
    writeln!(out, "heuristic_taus = {}", list(&heuristic.taus))?;
    writeln!(out, "heuristic_batches = {}", list(&heuristic.batches))?;
    writeln!(out, "heuristic_max_staleness = {}", fmt_sig(heuristic.report.max_staleness))?;
    writeln!(out, "heuristic_avg_staleness = {}", fmt_sig(heuristic.report.avg_staleness))?;
    writeln!(out, "oracle_taus = {}", list(&exact.taus))?;
    writeln!(out, "oracle_batches = {}", list(&exact.batches))?;
    writeln!(out, "oracle_max_staleness = {}", fmt_sig(exact.report.max_staleness))?;
    writeln!(out, "oracle_avg_staleness = {}", fmt_sig(exact.report.avg_staleness))?;
    writeln!(out, "max_staleness_gap = {}", fmt_sig(gap))?;
    writeln!(out, "optimal = {}", gap == 0.0)?;
    Ok(())
}

fn simulate(cfg: &Config, format: Format, out: &mut dyn Write) -> Result<()> {
    let synthetic = crate::divergence::SyntheticConfig {
        seed: cfg.scenario.seed,
        ..cfg.simulate.synthetic
    };
    let rows = run_divergence_experiment(
        &cfg.scenario,
        &cfg.simulate.schemes,
        cfg.simulate.cycles,
        &synthetic,
        cfg.oracle_tau_cap,
    )?;
    divergence_table(&rows).write(format, out)
}

fn profile(cfg: &Config, format: Format, out: &mut dyn Write) -> Result<()> {
    let (problem, scenario) = instance(cfg)?;
    let mut t = Table::new(vec!["learner", "clock_hz", "distance_m", "rate_bps", "c2", "c1", "c0"]);
    for (i, c) in problem.coefficients.iter().enumerate() {
        let (clock, dist, rate) = match &scenario {
            Some(s) => (
                Cell::Float(s.learners[i].compute.clock_hz),
                Cell::Float(s.distances_m[i]),
                Cell::Float(s.rates_bps[i]),
            ),
            None => (Cell::Empty, Cell::Empty, Cell::Empty),
        };
        t.push(vec![
            Cell::Int(i as u64 + 1),
            clock,
            dist,
            rate,
            Cell::Float(c.c2),
            Cell::Float(c.c1),
            Cell::Float(c.c0),
        ]);
    }
    t.write(format, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("async-mel").chain(args.iter().copied());
        let code = cli_main(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_one_and_help_exits_zero() {
        assert_eq!(run_args(&["frobnicate"]).0, 1);
        assert_eq!(run_args(&["sweep", "--format", "xml"]).0, 1);
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("solve"));
    }

    #[test]
    fn missing_config_is_a_config_error() {
        let (code, _, err) = run_args(&["solve", "--config", "/nonexistent/x.toml"]);
        assert_eq!(code, 1);
        assert!(err.contains("--config"), "{err}");
    }

    #[test]
    fn profile_default_scenario() {
        let (code, out, _) = run_args(&["profile", "--seed", "3"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "learner,clock_hz,distance_m,rate_bps,c2,c1,c0");
        assert_eq!(lines.len(), 21);
    }
}
