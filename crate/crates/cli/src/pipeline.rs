//! Subcommand bodies. Each `run_*` writes its files into `out` and returns
//! the in-memory result.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use horizon_ez::mcverify::{self, SimOptions, VerificationReport, VerifyConfig};
use horizon_ez::passage::{exit_density, moment_condition_check, survival, tail_rate, MomentReport};
use horizon_ez::pde::sup_bounds;
use horizon_ez::strategy::fixed_horizon_portfolio;
use horizon_ez::{
    market_constants, solve_dirichlet, strategy_field, validate_feller, ExitLaw, McError, ModelError, PassageError,
    PdeError, Solution, StrategyError, StrategyField, Verdict,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Model, RunConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver: {0}")]
    Pde(#[from] PdeError),
    #[error("exit law: {0}")]
    Passage(#[from] PassageError),
    #[error("monte carlo: {0}")]
    Mc(#[from] McError),
    #[error("strategy: {0}")]
    Strategy(#[from] StrategyError),
    #[error("{0}")]
    Argument(String),
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn prepare(cfg: &RunConfig, out: &Path) -> Result<Model, PipelineError> {
    let model = cfg.model()?;
    fs::create_dir_all(out)?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub nw: usize,
    pub ny: usize,
    /// Grid maximum of u.
    pub c_tilde: f64,
    pub zhat_sq_max: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub residual: f64,
    pub iterations: usize,
    pub scheme: horizon_ez::Scheme,
    pub c_bar: f64,
    pub feller_satisfied: bool,
    pub fixed_horizon_pi: f64,
    pub pi_min: f64,
    pub pi_max: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub solution: Solution,
    pub strategy: StrategyField,
    pub summary: SolveSummary,
}

/// Solves the Dirichlet problem and derives the strategy fields.
pub fn solve(model: &Model) -> Result<SolveOutput, PipelineError> {
    let solution = solve_dirichlet(&model.grid, &model.coeffs, &model.prefs, &model.solver)?;
    let strategy = strategy_field(&solution, &model.coeffs, &model.prefs);
    let bounds = sup_bounds(&solution);
    let (pi_min, pi_max) = strategy
        .pi_star
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });
    let summary = SolveSummary {
        nw: model.grid.nw,
        ny: model.grid.ny,
        c_tilde: bounds.c_tilde_sup,
        zhat_sq_max: bounds.zhat_sq_max,
        min_u: solution.min_u(),
        max_u: bounds.c_tilde_sup,
        residual: solution.residual_norm,
        iterations: solution.iterations,
        scheme: solution.scheme,
        c_bar: solution.c_bar,
        feller_satisfied: validate_feller(&model.params)?,
        fixed_horizon_pi: fixed_horizon_portfolio(&model.coeffs, &model.prefs)?,
        pi_min,
        pi_max,
    };
    Ok(SolveOutput {
        solution,
        strategy,
        summary,
    })
}

fn write_solution_csv(path: &Path, s: &SolveOutput) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["w", "y", "u", "Z", "Zhat", "pi_star", "c_tilde_star"])?;
    let g = &s.solution.grid;
    for (i, j, wv, yv) in g.nodes() {
        let k = g.idx(i, j);
        w.write_record([
            fmt17(wv),
            fmt17(yv),
            fmt17(s.solution.u[k]),
            fmt17(s.solution.z_field[k]),
            fmt17(s.solution.zhat_field[k]),
            fmt17(s.strategy.pi_star[k]),
            fmt17(s.strategy.c_tilde_star[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `solve`: solution.csv and solve_summary.json.
pub fn run_solve(cfg: &RunConfig, out: &Path) -> Result<SolveOutput, PipelineError> {
    let model = prepare(cfg, out)?;
    let s = solve(&model)?;
    if cfg.output.csv() {
        write_solution_csv(&out.join("solution.csv"), &s)?;
    }
    if cfg.output.json() {
        write_json(&out.join("solve_summary.json"), &s.summary)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityOutput {
    pub w0: f64,
    pub y0: f64,
    /// (t, survival, density) rows.
    pub rows: Vec<[f64; 3]>,
    /// Trapezoid integral of the density column.
    pub integral: f64,
    pub tail_rate: f64,
}

/// `density`: survival and density of τ from (w0, y0) on [0, t_max].
pub fn run_density(
    cfg: &RunConfig,
    w0: f64,
    y0: f64,
    t_max: f64,
    n_points: usize,
    out: &Path,
) -> Result<DensityOutput, PipelineError> {
    let model = prepare(cfg, out)?;
    let h = model.domain.half_width();
    if !(w0.abs() < h) || !(y0 > 0.0) || !y0.is_finite() {
        return Err(PipelineError::Argument(format!(
            "start ({w0}, {y0}) must satisfy |w0| < L/2 = {h} and y0 > 0"
        )));
    }
    if !(t_max > 0.0) || !t_max.is_finite() || n_points < 2 {
        return Err(PipelineError::Argument("need t_max > 0 and at least 2 points".into()));
    }
    let law = ExitLaw::new(&model.params, model.domain.l, horizon_ez::passage::MOMENT_TERMS)?;
    let dt = t_max / (n_points - 1) as f64;
    let rows = (0..n_points)
        .map(|i| {
            let t = if i + 1 == n_points { t_max } else { i as f64 * dt };
            Ok([t, survival(w0, y0, t, &law)?, exit_density(w0, y0, t, &law)?])
        })
        .collect::<Result<Vec<_>, PassageError>>()?;
    let integral = rows
        .windows(2)
        .map(|p| 0.5 * (p[1][0] - p[0][0]) * (p[0][2] + p[1][2]))
        .sum::<f64>();
    let result = DensityOutput {
        w0,
        y0,
        rows,
        integral,
        tail_rate: tail_rate(&law),
    };
    if cfg.output.csv() {
        let path = out.join("density.csv");
        {
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["t", "survival", "density"])?;
            for r in &result.rows {
                w.write_record(r.map(fmt17))?;
            }
            w.flush()?;
        }
        let mut f = fs::OpenOptions::new().append(true).open(&path)?;
        writeln!(f, "# trapezoid_integral={}", fmt17(result.integral))?;
    }
    if cfg.output.json() {
        #[derive(Serialize)]
        struct Meta {
            w0: f64,
            y0: f64,
            t_max: f64,
            n_points: usize,
            integral: f64,
            tail_rate: f64,
        }
        write_json(
            &out.join("density_summary.json"),
            &Meta {
                w0,
                y0,
                t_max,
                n_points,
                integral,
                tail_rate: result.tail_rate,
            },
        )?;
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionOutput {
    pub eps: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub c_tilde_sup: f64,
    pub zhat_sq_max: f64,
    pub tail_rate: f64,
    pub feller_satisfied: bool,
    pub reports: Vec<MomentReport>,
    /// Verified iff some q verifies both conditions.
    pub overall: Verdict,
}

/// `check-assumption`: solves, then evaluates both moment conditions for
/// every q of the ladder.
pub fn run_check_assumption(cfg: &RunConfig, out: &Path) -> Result<AssumptionOutput, PipelineError> {
    let model = prepare(cfg, out)?;
    let s = solve(&model)?;
    let bounds = sup_bounds(&s.solution);
    let constants = market_constants(&model.coeffs, &model.domain, &model.prefs)?;
    let law = ExitLaw::new(&model.params, model.domain.l, cfg.assumption.n_terms)?;
    let start = (cfg.assumption.start[0], cfg.assumption.start[1]);
    let reports = cfg
        .assumption
        .q_ladder
        .iter()
        .map(|&q| moment_condition_check(&model.prefs, &constants, &bounds, &law, q, start))
        .collect::<Result<Vec<_>, _>>()?;
    let overall = if reports.iter().any(|r| r.verdict() == Verdict::Verified) {
        Verdict::Verified
    } else {
        Verdict::NotVerified
    };
    let result = AssumptionOutput {
        eps: model.params.eps,
        l: model.domain.l,
        c_tilde_sup: bounds.c_tilde_sup,
        zhat_sq_max: bounds.zhat_sq_max,
        tail_rate: tail_rate(&law),
        feller_satisfied: validate_feller(&model.params)?,
        reports,
        overall,
    };
    if cfg.output.json() {
        write_json(&out.join("assumption.json"), &result)?;
    }
    Ok(result)
}

/// `verify`: KS comparison of exit times with the series law and the
/// Feynman-Kac check at every probe. `probes` replaces the configured list.
pub fn run_verify(
    cfg: &RunConfig,
    probes: Option<&[(f64, f64)]>,
    out: &Path,
) -> Result<VerificationReport, PipelineError> {
    let model = prepare(cfg, out)?;
    let probes: Vec<(f64, f64)> = match probes {
        Some(p) if !p.is_empty() => p.to_vec(),
        _ => cfg.mc.probes.iter().map(|p| (p[0], p[1])).collect(),
    };
    for &(w, y) in &probes {
        if !model.domain.contains(w, y) {
            return Err(PipelineError::Argument(format!(
                "probe ({w}, {y}) must lie strictly inside the domain"
            )));
        }
    }
    let s = solve(&model)?;
    let law = ExitLaw::new(&model.params, model.domain.l, horizon_ez::passage::DEFAULT_TERMS)?;
    let vcfg = VerifyConfig {
        n_paths: cfg.mc.n_paths,
        dt: cfg.mc.dt,
        seed: cfg.mc.seed,
        monitoring: model.monitoring,
        start: (cfg.mc.start[0], cfg.mc.start[1]),
        probes,
        ks_tolerance: cfg.mc.ks_tolerance,
        max_steps: cfg.mc.max_steps,
    };
    let report = mcverify::verify(&s.solution, &model.params, &model.prefs, &law, &vcfg)?;
    if cfg.output.json() {
        write_json(&out.join("verify.json"), &report)?;
    }
    if cfg.mc.dump_samples && cfg.output.csv() {
        let opts = SimOptions {
            dt: cfg.mc.dt,
            band_only: true,
            max_steps: cfg.mc.max_steps,
            monitoring: model.monitoring,
        };
        let samples = mcverify::sample_exit_times(
            cfg.mc.n_paths,
            vcfg.start.0,
            vcfg.start.1,
            &model.params,
            &model.domain,
            &opts,
            cfg.mc.seed,
        )?;
        let mut w = csv::Writer::from_path(out.join("exit_times.csv"))?;
        w.write_record(["tau"])?;
        for t in &samples.times {
            w.write_record([fmt17(*t)])?;
        }
        w.flush()?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub fixed_horizon_pi: f64,
    pub pi_min: f64,
    pub pi_max: f64,
    /// Extremes of π* over the nodes with w < 0 (resp. w > 0) in the
    /// lowest interior y row.
    pub near_y1_left: [f64; 2],
    pub near_y1_right: [f64; 2],
}

/// `strategy-export`: the solution CSV with the π* and c̃* columns, plus a
/// summary against the fixed-horizon weight.
pub fn run_strategy_export(cfg: &RunConfig, out: &Path) -> Result<StrategySummary, PipelineError> {
    let model = prepare(cfg, out)?;
    let s = solve(&model)?;
    let g = &s.solution.grid;
    let (mut left, mut right) = ([f64::INFINITY, f64::NEG_INFINITY], [f64::INFINITY, f64::NEG_INFINITY]);
    for (i, j, w, _) in g.nodes() {
        if j != 1 || g.is_boundary(i, j) {
            continue;
        }
        let p = s.strategy.pi_star[g.idx(i, j)];
        let side = if w < 0.0 {
            &mut left
        } else if w > 0.0 {
            &mut right
        } else {
            continue;
        };
        side[0] = side[0].min(p);
        side[1] = side[1].max(p);
    }
    let summary = StrategySummary {
        fixed_horizon_pi: s.summary.fixed_horizon_pi,
        pi_min: s.summary.pi_min,
        pi_max: s.summary.pi_max,
        near_y1_left: left,
        near_y1_right: right,
    };
    if cfg.output.csv() {
        write_solution_csv(&out.join("solution.csv"), &s)?;
    }
    if cfg.output.json() {
        write_json(&out.join("strategy_summary.json"), &summary)?;
    }
    Ok(summary)
}
