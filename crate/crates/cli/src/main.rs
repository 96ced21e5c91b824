use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use horizon_ez::mcverify::Outcome;
use horizon_ez::Verdict;
use horizon_ez_cli::{
    run_check_assumption, run_density, run_solve, run_strategy_export, run_verify, PipelineError, RunConfig,
};

/// Random-horizon Epstein-Zin consumption-investment toolkit.
#[derive(Debug, Parser)]
#[command(name = "horizon-ez", version)]
struct Cli {
    /// TOML configuration; defaults reproduce the reference experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides mc.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Probe point `w,y`; repeatable. Replaces mc.probes for `verify`.
    #[arg(long, global = true, value_parser = parse_probe)]
    probe: Vec<(f64, f64)>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the Dirichlet problem; write the grid CSV and a summary.
    Solve,
    /// Survival and density of the exit time.
    Density {
        #[arg(long)]
        w0: Option<f64>,
        #[arg(long)]
        y0: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Exponential-moment conditions for every q of the ladder.
    CheckAssumption,
    /// Monte Carlo exit-law and Feynman-Kac checks.
    Verify,
    /// Optimal portfolio and consumption fields.
    StrategyExport,
}

fn parse_probe(s: &str) -> Result<(f64, f64), String> {
    let (w, y) = s.split_once(',').ok_or_else(|| format!("expected w,y, got {s:?}"))?;
    let w = w.trim().parse().map_err(|e| format!("bad w in {s:?}: {e}"))?;
    let y = y.trim().parse().map_err(|e| format!("bad y in {s:?}: {e}"))?;
    Ok((w, y))
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HORIZON_EZ_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| format!("HORIZON_EZ_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("HORIZON_EZ_THREADS must be a positive integer, got 0".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<bool, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    match cli.command {
        Command::Solve => {
            let s = run_solve(&cfg, &out)?;
            eprintln!(
                "solved {}x{} in {} iterations, residual {:.3e}, max u {:.6e}, min u {:.6e}",
                s.summary.nw, s.summary.ny, s.summary.iterations, s.summary.residual, s.summary.max_u, s.summary.min_u
            );
            if !s.summary.feller_satisfied {
                eprintln!("warning: Feller condition 2αm² > k² fails; variance paths use full truncation");
            }
            Ok(true)
        }
        Command::Density {
            w0,
            y0,
            t_max,
            n_points,
        } => {
            let d = &cfg.density;
            let r = run_density(
                &cfg,
                w0.unwrap_or(d.w0),
                y0.unwrap_or(d.y0),
                t_max.unwrap_or(d.t_max),
                n_points.unwrap_or(d.n_points),
                &out,
            )?;
            eprintln!("density integral {:.6}, tail rate {:.4}", r.integral, r.tail_rate);
            Ok(true)
        }
        Command::CheckAssumption => {
            let r = run_check_assumption(&cfg, &out)?;
            for m in &r.reports {
                eprintln!(
                    "q = {}: g1 = {:.4}, g2 = {:.4}, tail rate = {:.4} -> {:?}",
                    m.q_used,
                    m.growth_rate_1,
                    m.growth_rate_2,
                    m.tail_rate,
                    m.verdict()
                );
            }
            eprintln!("overall: {:?}", r.overall);
            Ok(r.overall == Verdict::Verified)
        }
        Command::Verify => {
            let probes = (!cli.probe.is_empty()).then_some(cli.probe.as_slice());
            let r = run_verify(&cfg, probes, &out)?;
            if let Some(ks) = r.ks_distance {
                eprintln!("KS distance {ks:.5} (tolerance {})", r.ks_tolerance);
            }
            for p in &r.fk {
                eprintln!(
                    "FK ({}, {}): u = {:.6e}, mc = {:.6e}, residual {:.2e} vs 3se + C dt = {:.2e} -> {}",
                    p.w0,
                    p.y0,
                    p.u_pde,
                    p.fk_mean,
                    p.fk_residual,
                    3.0 * p.fk_stderr + p.bias_allowance,
                    if p.passed { "pass" } else { "fail" }
                );
            }
            eprintln!("verdict: {:?}", r.verdict);
            Ok(r.verdict != Outcome::Fail)
        }
        Command::StrategyExport => {
            let s = run_strategy_export(&cfg, &out)?;
            eprintln!(
                "fixed-horizon pi = {}, random-horizon pi in [{:.6}, {:.6}]",
                s.fixed_horizon_pi, s.pi_min, s.pi_max
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
