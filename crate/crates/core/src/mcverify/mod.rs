//! Monte Carlo oracles: exit-time sampling for the (𝒲, Y) state, the
//! Kolmogorov-Smirnov comparison with the series law, the Feynman-Kac
//! check of a PDE solution, and a deterministic utility recursion.
//!
//! Path `i` of a run with master seed `s` draws from ChaCha8 seeded with
//! `s` on stream `i`, and reductions run in path order, so results do not
//! depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::McError;
use crate::generators::{aggregator_f, pde_generator_g};
use crate::model::{heston_coefficients, HestonParams, Preferences, RectDomain};
use crate::passage::{survival, ExitLaw, MOMENT_TERMS};
use crate::pde::Solution;

/// Minimum sample size for the KS comparison.
pub const MIN_KS_SAMPLES: usize = 10_000;

/// How exits between grid times are detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitoring {
    /// Exit only when a simulated point leaves the domain.
    Discrete,
    /// Also exit with the Brownian-bridge probability of an unobserved
    /// crossing during the step.
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOptions {
    pub dt: f64,
    /// Ignore the y-walls (samples τ rather than τ_{w,y}).
    pub band_only: bool,
    pub max_steps: usize,
    pub monitoring: Monitoring,
}

impl SimOptions {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            band_only: false,
            max_steps: 50_000_000,
            monitoring: Monitoring::Bridge,
        }
    }

    pub fn band(dt: f64) -> Self {
        Self {
            band_only: true,
            ..Self::new(dt)
        }
    }

    fn validate(&self) -> Result<(), McError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(McError::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.max_steps == 0 {
            return Err(McError::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitSide {
    /// w = -L/2.
    Left,
    /// w = L/2.
    Right,
    /// y = y1.
    Lower,
    /// y = y2.
    Upper,
    /// Step budget exhausted before exit.
    Censored,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatePath {
    pub times: Vec<f64>,
    pub w_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// Increments of W (driving Y) between consecutive points.
    pub dw: Vec<f64>,
    /// Increments of Ŵ (driving 𝒲) between consecutive points.
    pub dw_hat: Vec<f64>,
    /// Index of the exit point; the last stored point.
    pub exit_index: usize,
    pub exit_side: ExitSide,
    pub seed: u64,
}

/// Generator for path `stream` of a run with master seed `seed`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_interior(w: f64, y: f64, domain: &RectDomain, band_only: bool) -> Result<(), McError> {
    let inside_w = w.abs() < domain.half_width();
    let inside_y = y > domain.y1 && y < domain.y2;
    if inside_w && (band_only && y > 0.0 || inside_y) {
        Ok(())
    } else {
        Err(McError::NotInterior { w, y })
    }
}

/// The simulator also accepts k = 0 (deterministic variance).
fn check_sim_params(p: &HestonParams) -> Result<(), McError> {
    if p.k == 0.0 {
        HestonParams { k: 1.0, ..*p }.validate()?;
        Ok(())
    } else {
        Ok(p.validate()?)
    }
}

/// One discretised copy of (𝒲, Y) under Euler / full-truncation Euler.
#[derive(Debug, Clone)]
struct Walker {
    w: f64,
    y: f64,
    t: f64,
    exit: Option<ExitSide>,
}

/// Outcome of one step: length actually travelled and whether it ended
/// on the boundary.
struct Step {
    dt: f64,
    exited: bool,
}

struct Dynamics<'a> {
    p: &'a HestonParams,
    d: &'a RectDomain,
    band_only: bool,
    monitoring: Monitoring,
}

impl Dynamics<'_> {
    fn advance(&self, wk: &mut Walker, dw: f64, dw_hat: f64, dt: f64, u: f64) -> Step {
        let p = self.p;
        let yp = wk.y.max(0.0);
        let var_w = yp + p.eps;
        let w1 = wk.w + var_w.sqrt() * dw_hat;
        let y1 = wk.y - p.alpha * (yp - p.m2) * dt + p.k * yp.sqrt() * dw;
        let h = self.d.half_width();

        // (fraction of the step, side) for every wall crossed by the chord
        let mut hit: Option<(f64, ExitSide)> = None;
        let mut consider = |frac: f64, side: ExitSide| {
            if hit.is_none_or(|(f, _)| frac < f) {
                hit = Some((frac, side));
            }
        };
        if w1 >= h {
            consider((h - wk.w) / (w1 - wk.w), ExitSide::Right);
        }
        if w1 <= -h {
            consider((-h - wk.w) / (w1 - wk.w), ExitSide::Left);
        }
        if !self.band_only {
            if y1 <= self.d.y1 {
                consider((self.d.y1 - wk.y) / (y1 - wk.y), ExitSide::Lower);
            }
            if y1 >= self.d.y2 {
                consider((self.d.y2 - wk.y) / (y1 - wk.y), ExitSide::Upper);
            }
        }
        if hit.is_none() && self.monitoring == Monitoring::Bridge {
            // survival of the bridge against each wall, diffusion frozen
            // at the left end of the step
            let mut walls: [(f64, ExitSide); 4] = [(0.0, ExitSide::Censored); 4];
            let vw = var_w * dt;
            walls[0] = (bridge_crossing(h - wk.w, h - w1, vw), ExitSide::Right);
            walls[1] = (bridge_crossing(wk.w + h, w1 + h, vw), ExitSide::Left);
            if !self.band_only {
                let vy = p.k2() * yp * dt;
                walls[2] = (bridge_crossing(wk.y - self.d.y1, y1 - self.d.y1, vy), ExitSide::Lower);
                walls[3] = (bridge_crossing(self.d.y2 - wk.y, self.d.y2 - y1, vy), ExitSide::Upper);
            }
            let stay: f64 = walls.iter().map(|(q, _)| 1.0 - q).product();
            if u < 1.0 - stay {
                let side = walls
                    .iter()
                    .max_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|w| w.1)
                    .unwrap_or(ExitSide::Right);
                hit = Some((0.5, side));
            }
        }
        match hit {
            Some((frac, side)) => {
                let frac = frac.clamp(0.0, 1.0);
                wk.t += frac * dt;
                let (wn, yn) = (wk.w + frac * (w1 - wk.w), wk.y + frac * (y1 - wk.y));
                match side {
                    ExitSide::Right => (wk.w, wk.y) = (h, yn),
                    ExitSide::Left => (wk.w, wk.y) = (-h, yn),
                    ExitSide::Lower => (wk.w, wk.y) = (wn, self.d.y1),
                    ExitSide::Upper => (wk.w, wk.y) = (wn, self.d.y2),
                    ExitSide::Censored => unreachable!("censoring is not a wall"),
                }
                wk.exit = Some(side);
                Step {
                    dt: frac * dt,
                    exited: true,
                }
            }
            None => {
                wk.t += dt;
                wk.w = w1;
                wk.y = y1;
                Step { dt, exited: false }
            }
        }
    }
}

/// Probability that a Brownian bridge with variance `var` between
/// distances `a` and `b` from a wall (both positive) touches it.
fn bridge_crossing(a: f64, b: f64, var: f64) -> f64 {
    if var <= 0.0 || a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    (-2.0 * a * b / var).exp()
}

struct Noise {
    dw: f64,
    dw_hat: f64,
    u: f64,
}

fn draw(rng: &mut ChaCha8Rng, sqrt_dt: f64) -> Noise {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    Noise {
        dw: sqrt_dt * z1,
        dw_hat: sqrt_dt * z2,
        u: rng.random::<f64>(),
    }
}

/// Simulates one path from (w0, y0) to its exit, on stream 0 of `seed`.
pub fn simulate_state(
    w0: f64,
    y0: f64,
    params: &HestonParams,
    domain: &RectDomain,
    opts: &SimOptions,
    seed: u64,
) -> Result<StatePath, McError> {
    simulate_stream(w0, y0, params, domain, opts, seed, 0)
}

pub fn simulate_stream(
    w0: f64,
    y0: f64,
    params: &HestonParams,
    domain: &RectDomain,
    opts: &SimOptions,
    seed: u64,
    stream: u64,
) -> Result<StatePath, McError> {
    opts.validate()?;
    check_sim_params(params)?;
    check_interior(w0, y0, domain, opts.band_only)?;
    let dynamics = Dynamics {
        p: params,
        d: domain,
        band_only: opts.band_only,
        monitoring: opts.monitoring,
    };
    let mut rng = path_rng(seed, stream);
    let sqrt_dt = opts.dt.sqrt();
    let mut wk = Walker {
        w: w0,
        y: y0,
        t: 0.0,
        exit: None,
    };
    let mut path = StatePath {
        times: vec![0.0],
        w_values: vec![w0],
        y_values: vec![y0],
        dw: Vec::new(),
        dw_hat: Vec::new(),
        exit_index: 0,
        exit_side: ExitSide::Censored,
        seed,
    };
    for _ in 0..opts.max_steps {
        let n = draw(&mut rng, sqrt_dt);
        let step = dynamics.advance(&mut wk, n.dw, n.dw_hat, opts.dt, n.u);
        let frac = step.dt / opts.dt;
        path.dw.push(frac * n.dw);
        path.dw_hat.push(frac * n.dw_hat);
        path.times.push(wk.t);
        path.w_values.push(wk.w);
        path.y_values.push(wk.y);
        if step.exited {
            break;
        }
    }
    path.exit_index = path.times.len() - 1;
    path.exit_side = wk.exit.unwrap_or(ExitSide::Censored);
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct FaceCounts {
    pub left: usize,
    pub right: usize,
    pub lower: usize,
    pub upper: usize,
    pub censored: usize,
}

impl FaceCounts {
    fn add(&mut self, side: ExitSide) {
        match side {
            ExitSide::Left => self.left += 1,
            ExitSide::Right => self.right += 1,
            ExitSide::Lower => self.lower += 1,
            ExitSide::Upper => self.upper += 1,
            ExitSide::Censored => self.censored += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitSamples {
    pub times: Vec<f64>,
    pub sides: Vec<ExitSide>,
    pub faces: FaceCounts,
}

/// Independent exit times; path `i` uses stream `i` of `seed`.
pub fn sample_exit_times(
    n_paths: usize,
    w0: f64,
    y0: f64,
    params: &HestonParams,
    domain: &RectDomain,
    opts: &SimOptions,
    seed: u64,
) -> Result<ExitSamples, McError> {
    if n_paths == 0 {
        return Err(McError::InvalidArgument("n_paths must be at least 1".into()));
    }
    opts.validate()?;
    check_sim_params(params)?;
    check_interior(w0, y0, domain, opts.band_only)?;
    let dynamics = Dynamics {
        p: params,
        d: domain,
        band_only: opts.band_only,
        monitoring: opts.monitoring,
    };
    let sqrt_dt = opts.dt.sqrt();
    let out: Vec<(f64, ExitSide)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut wk = Walker {
                w: w0,
                y: y0,
                t: 0.0,
                exit: None,
            };
            for _ in 0..opts.max_steps {
                let n = draw(&mut rng, sqrt_dt);
                if dynamics.advance(&mut wk, n.dw, n.dw_hat, opts.dt, n.u).exited {
                    break;
                }
            }
            (wk.t, wk.exit.unwrap_or(ExitSide::Censored))
        })
        .collect();
    let mut faces = FaceCounts::default();
    for (_, s) in &out {
        faces.add(*s);
    }
    Ok(ExitSamples {
        times: out.iter().map(|o| o.0).collect(),
        sides: out.iter().map(|o| o.1).collect(),
        faces,
    })
}

/// Two-sided Kolmogorov-Smirnov distance between the empirical law of
/// `samples` and a continuous CDF.
pub fn ks_distance<E>(samples: &[f64], mut cdf: impl FnMut(f64) -> Result<f64, E>) -> Result<f64, E> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x)?;
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// KS distance between exit-time samples and 1 - survival(w0, y0, ·).
pub fn empirical_vs_series(samples: &[f64], law: &ExitLaw, w0: f64, y0: f64) -> Result<f64, McError> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(McError::TooFewSamples {
            needed: MIN_KS_SAMPLES,
            got: samples.len(),
        });
    }
    let law = if law.n_terms < MOMENT_TERMS {
        law.with_terms(MOMENT_TERMS)?
    } else {
        law.clone()
    };
    Ok(ks_distance(samples, |t| survival(w0, y0, t, &law).map(|s| 1.0 - s))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FkOptions {
    /// Finest step; the coarser levels use 4 and 16 times this step.
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub monitoring: Monitoring,
    pub max_steps: usize,
}

/// Feynman-Kac comparison at one probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FkProbe {
    pub w0: f64,
    pub y0: f64,
    pub u_pde: f64,
    /// MC means at steps 16dt, 4dt and dt.
    pub level_dt: [f64; 3],
    pub level_means: [f64; 3],
    /// Standard errors of the coupled level differences (coarse - fine).
    pub level_diff_stderr: [f64; 2],
    pub fk_mean: f64,
    pub fk_stderr: f64,
    pub fk_residual: f64,
    /// C·dt with C estimated from the two finest levels.
    pub bias_allowance: f64,
    /// |mean(4dt) - mean(dt)| is not significantly larger than
    /// |mean(16dt) - mean(4dt)|.
    pub bias_shrinks: bool,
    pub passed: bool,
}

/// Estimates E[∫₀^τ G(Y, u, Z, Ẑ) ds] from (w0, y0) with fields taken from
/// `solution`, at three coupled step sizes, and compares with u(w0, y0).
pub fn feynman_kac_check(
    solution: &Solution,
    params: &HestonParams,
    prefs: &Preferences,
    probe: (f64, f64),
    opts: &FkOptions,
) -> Result<FkProbe, McError> {
    let (w0, y0) = probe;
    let coeffs = heston_coefficients(params)?;
    let g = &solution.grid;
    let integrand = |w: f64, y: f64| -> f64 {
        let u = g.interpolate(&solution.u, w, y).unwrap_or(0.0);
        let z = g.interpolate(&solution.z_field, w, y).unwrap_or(0.0);
        let zh = g.interpolate(&solution.zhat_field, w, y).unwrap_or(0.0);
        pde_generator_g(y, u, z, zh, &coeffs, prefs)
    };
    let per_path = fk_levels(&g.domain, params, &integrand, probe, opts)?;
    let u_pde = solution
        .u_at(w0, y0)
        .map_err(|_| McError::NotInterior { w: w0, y: y0 })?;
    Ok(summarise(u_pde, probe, opts.dt, &per_path))
}

const FK_FACTORS: [usize; 3] = [16, 4, 1];
const COARSE_SEED_MASK: u64 = 0x9E37_79B9_7F4A_7C15;

/// Pathwise left-endpoint integrals at steps 16dt, 4dt and dt, driven by
/// the same Brownian increments.
fn fk_levels(
    domain: &RectDomain,
    params: &HestonParams,
    integrand: &(dyn Fn(f64, f64) -> f64 + Sync),
    (w0, y0): (f64, f64),
    opts: &FkOptions,
) -> Result<Vec<[f64; 3]>, McError> {
    if opts.n_paths < 2 {
        return Err(McError::TooFewSamples {
            needed: 2,
            got: opts.n_paths,
        });
    }
    SimOptions {
        dt: opts.dt,
        band_only: false,
        max_steps: opts.max_steps,
        monitoring: opts.monitoring,
    }
    .validate()?;
    check_sim_params(params)?;
    check_interior(w0, y0, domain, false)?;
    let dynamics = Dynamics {
        p: params,
        d: domain,
        band_only: false,
        monitoring: opts.monitoring,
    };
    let sqrt_dt = opts.dt.sqrt();
    Ok((0..opts.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(opts.seed, i);
            let mut coarse_rng = path_rng(opts.seed ^ COARSE_SEED_MASK, i);
            let mut walkers: [Walker; 3] = std::array::from_fn(|_| Walker {
                w: w0,
                y: y0,
                t: 0.0,
                exit: None,
            });
            let mut acc = [0.0; 3];
            let mut pending = [(0.0f64, 0.0f64); 3];
            for step in 0..opts.max_steps {
                let n = draw(&mut rng, sqrt_dt);
                for l in 0..3 {
                    if walkers[l].exit.is_some() {
                        continue;
                    }
                    pending[l].0 += n.dw;
                    pending[l].1 += n.dw_hat;
                    if (step + 1) % FK_FACTORS[l] != 0 {
                        continue;
                    }
                    let h = opts.dt * FK_FACTORS[l] as f64;
                    // the fine level sees exactly the noise of `sample_exit_times`
                    let u = if l == 2 { n.u } else { coarse_rng.random::<f64>() };
                    let (w, y) = (walkers[l].w, walkers[l].y);
                    let s = dynamics.advance(&mut walkers[l], pending[l].0, pending[l].1, h, u);
                    acc[l] += integrand(w, y) * s.dt;
                    pending[l] = (0.0, 0.0);
                }
                if walkers.iter().all(|w| w.exit.is_some()) {
                    break;
                }
            }
            acc
        })
        .collect())
}

fn summarise(u_pde: f64, (w0, y0): (f64, f64), dt: f64, per_path: &[[f64; 3]]) -> FkProbe {
    let n = per_path.len() as f64;
    let mean_of = |f: &dyn Fn(&[f64; 3]) -> f64| per_path.iter().map(f).sum::<f64>() / n;
    let stderr_of = |f: &dyn Fn(&[f64; 3]) -> f64, m: f64| {
        (per_path.iter().map(|x| (f(x) - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    };
    let means = [mean_of(&|x| x[0]), mean_of(&|x| x[1]), mean_of(&|x| x[2])];
    let d01 = mean_of(&|x| x[0] - x[1]);
    let d12 = mean_of(&|x| x[1] - x[2]);
    let se_d = [stderr_of(&|x| x[0] - x[1], d01), stderr_of(&|x| x[1] - x[2], d12)];
    let fk_stderr = stderr_of(&|x| x[2], means[2]);
    let fk_residual = (u_pde - means[2]).abs();
    // bias(h) ≈ C h, so mean(4dt) - mean(dt) ≈ 3 C dt
    let bias_allowance = d12.abs() / 3.0;
    // the fine difference may not exceed the coarse one beyond 2 combined standard errors
    let bias_shrinks = d12.abs() <= d01.abs() + 2.0 * se_d[0].hypot(se_d[1]);
    FkProbe {
        w0,
        y0,
        u_pde,
        level_dt: [16.0 * dt, 4.0 * dt, dt],
        level_means: means,
        level_diff_stderr: se_d,
        fk_mean: means[2],
        fk_stderr,
        fk_residual,
        bias_allowance,
        bias_shrinks,
        passed: bias_shrinks && fk_residual <= 3.0 * fk_stderr + bias_allowance,
    }
}

/// Backward RK4 solution of dV/dt = -f(c, V) on [0, T] from V(T) = `terminal_v`.
pub fn utility_ode_eval(
    c_const: f64,
    horizon: f64,
    terminal_v: f64,
    prefs: &Preferences,
    dt: f64,
) -> Result<f64, McError> {
    utility_ode_path(c_const, horizon, terminal_v, prefs, dt).map(|p| p[p.len() - 1])
}

/// Values V(T), V(T - h), ..., V(0) of the backward integration.
pub fn utility_ode_path(
    c_const: f64,
    horizon: f64,
    terminal_v: f64,
    prefs: &Preferences,
    dt: f64,
) -> Result<Vec<f64>, McError> {
    if !(c_const > 0.0) || !(terminal_v <= 0.0) || !(horizon >= 0.0) || !(dt > 0.0) {
        return Err(McError::InvalidArgument(format!(
            "need c > 0, V_T <= 0, T >= 0, dt > 0; got c = {c_const}, V_T = {terminal_v}, T = {horizon}, dt = {dt}"
        )));
    }
    let steps = (horizon / dt).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    // backward in time: d/ds V(T - s) = f(c, V)
    let rhs = |v: f64| aggregator_f(c_const, v.min(0.0), prefs).map_err(|e| McError::InvalidArgument(e.to_string()));
    let mut v = terminal_v;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(v);
    for _ in 0..steps {
        let k1 = rhs(v)?;
        let k2 = rhs(v + 0.5 * h * k1)?;
        let k3 = rhs(v + 0.5 * h * k2)?;
        let k4 = rhs(v + h * k3)?;
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Pass,
    Fail,
    /// Sample too small for a verdict.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub monitoring: Monitoring,
    pub w0: f64,
    pub y0: f64,
    pub ks_distance: Option<f64>,
    pub ks_tolerance: f64,
    pub exit_faces: FaceCounts,
    pub fk: Vec<FkProbe>,
    pub verdict: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub monitoring: Monitoring,
    /// Start of the exit-time sample.
    pub start: (f64, f64),
    pub probes: Vec<(f64, f64)>,
    pub ks_tolerance: f64,
    pub max_steps: usize,
}

/// Runs the KS comparison and the Feynman-Kac check at every probe.
pub fn verify(
    solution: &Solution,
    params: &HestonParams,
    prefs: &Preferences,
    law: &ExitLaw,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, McError> {
    let domain = solution.grid.domain;
    let (w0, y0) = cfg.start;
    let sim = SimOptions {
        dt: cfg.dt,
        band_only: true,
        max_steps: cfg.max_steps,
        monitoring: cfg.monitoring,
    };
    let samples = sample_exit_times(cfg.n_paths, w0, y0, params, &domain, &sim, cfg.seed)?;
    let rect = SimOptions {
        band_only: false,
        ..sim
    };
    let rect_samples = sample_exit_times(cfg.n_paths, w0, y0, params, &domain, &rect, cfg.seed)?;
    let enough = cfg.n_paths >= MIN_KS_SAMPLES;
    let ks = if enough {
        Some(empirical_vs_series(&samples.times, law, w0, y0)?)
    } else {
        None
    };
    let fk_opts = FkOptions {
        dt: cfg.dt,
        n_paths: cfg.n_paths.max(2),
        seed: cfg.seed,
        monitoring: cfg.monitoring,
        max_steps: cfg.max_steps,
    };
    let fk = cfg
        .probes
        .iter()
        .map(|&p| feynman_kac_check(solution, params, prefs, p, &fk_opts))
        .collect::<Result<Vec<_>, _>>()?;
    let verdict = if !enough {
        Outcome::Inconclusive
    } else if ks.is_some_and(|d| d <= cfg.ks_tolerance) && fk.iter().all(|p| p.passed) {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(VerificationReport {
        n_paths: cfg.n_paths,
        dt: cfg.dt,
        seed: cfg.seed,
        monitoring: cfg.monitoring,
        w0,
        y0,
        ks_distance: ks,
        ks_tolerance: cfg.ks_tolerance,
        exit_faces: rect_samples.faces,
        fk,
        verdict,
    })
}
