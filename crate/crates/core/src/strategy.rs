//! Optimal portfolio and consumption fields, the fixed-horizon baseline,
//! and wealth simulation along simulated state paths.

use serde::Serialize;

use crate::error::{PdeError, StrategyError};
use crate::generators::guarded_exp;
use crate::mcverify::StatePath;
use crate::model::{CoefficientSet, Preferences};
use crate::pde::{Grid, Solution};

/// Nodal strategy fields on the solution grid.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyField {
    pub grid: Grid,
    pub pi_star: Vec<f64>,
    /// Consumption per unit wealth and time.
    pub c_tilde_star: Vec<f64>,
    /// The constant fixed-horizon weight λ/γ, when defined.
    pub baseline_pi: Option<f64>,
}

impl StrategyField {
    pub fn pi_at(&self, w: f64, y: f64) -> Result<f64, StrategyError> {
        self.grid.interpolate(&self.pi_star, w, y).map_err(outside)
    }

    pub fn c_tilde_at(&self, w: f64, y: f64) -> Result<f64, StrategyError> {
        self.grid.interpolate(&self.c_tilde_star, w, y).map_err(outside)
    }
}

fn outside(e: PdeError) -> StrategyError {
    match e {
        PdeError::OutsideDomain { w, y } => StrategyError::OutsideDomain { w, y },
        _ => StrategyError::OutsideDomain {
            w: f64::NAN,
            y: f64::NAN,
        },
    }
}

fn portfolio_formula(y: f64, z: f64, zhat: f64, coeffs: &dyn CoefficientSet, prefs: &Preferences) -> f64 {
    let sigma = coeffs.sigma(y);
    (coeffs.lambda(y) + sigma * (coeffs.rho(y) * z + coeffs.rhohat(y) * zhat)) / (prefs.gamma() * sigma * sigma)
}

/// π* = (λ + σ(ρZ + ρ̂Ẑ))/(γσ²) with Z, Ẑ interpolated from the solution.
pub fn optimal_portfolio(
    w: f64,
    y: f64,
    solution: &Solution,
    coeffs: &dyn CoefficientSet,
    prefs: &Preferences,
) -> Result<f64, StrategyError> {
    let z = solution.z_at(w, y).map_err(outside)?;
    let zhat = solution.zhat_at(w, y).map_err(outside)?;
    Ok(portfolio_formula(y, z, zhat, coeffs, prefs))
}

/// Heston form π* = (λ + u_w)/γ.
pub fn heston_portfolio(
    w: f64,
    y: f64,
    solution: &Solution,
    coeffs: &dyn CoefficientSet,
    prefs: &Preferences,
) -> Result<f64, StrategyError> {
    let p = coeffs.heston().ok_or(StrategyError::NotHeston)?;
    let uw = solution.du_dw_at(w, y).map_err(outside)?;
    Ok((p.lambda + uw) / prefs.gamma())
}

/// c̃* = δ^ψ e^{-(ψ/θ)u}.
pub fn optimal_consumption_ratio(
    w: f64,
    y: f64,
    solution: &Solution,
    prefs: &Preferences,
) -> Result<f64, StrategyError> {
    let u = solution.u_at(w, y).map_err(outside)?;
    Ok(consumption_formula(u, prefs))
}

fn consumption_formula(u: f64, prefs: &Preferences) -> f64 {
    prefs.delta_pow_psi() * guarded_exp(prefs.exp_slope() * u)
}

/// Constant weight λ/γ optimal on a fixed horizon in the Heston market.
pub fn fixed_horizon_portfolio(coeffs: &dyn CoefficientSet, prefs: &Preferences) -> Result<f64, StrategyError> {
    let p = coeffs.heston().ok_or(StrategyError::NotHeston)?;
    Ok(p.lambda / prefs.gamma())
}

pub fn strategy_field(solution: &Solution, coeffs: &dyn CoefficientSet, prefs: &Preferences) -> StrategyField {
    let g = &solution.grid;
    let mut pi_star = vec![0.0; g.len()];
    let mut c_tilde_star = vec![0.0; g.len()];
    for (i, j, _, y) in g.nodes() {
        let k = g.idx(i, j);
        pi_star[k] = portfolio_formula(y, solution.z_field[k], solution.zhat_field[k], coeffs, prefs);
        c_tilde_star[k] = consumption_formula(solution.u[k], prefs);
    }
    StrategyField {
        grid: *g,
        pi_star,
        c_tilde_star,
        baseline_pi: fixed_horizon_portfolio(coeffs, prefs).ok(),
    }
}

/// Any feedback rule for (π, c̃) as a function of the state.
pub trait StrategyEval {
    fn controls(&self, w: f64, y: f64) -> (f64, f64);
}

impl StrategyEval for StrategyField {
    fn controls(&self, w: f64, y: f64) -> (f64, f64) {
        let d = &self.grid.domain;
        let w = w.clamp(-d.half_width(), d.half_width());
        let y = y.clamp(d.y1, d.y2);
        // clamped points lie in the closed domain, so interpolation succeeds
        (
            self.pi_at(w, y).unwrap_or(f64::NAN),
            self.c_tilde_at(w, y).unwrap_or(f64::NAN),
        )
    }
}

/// Constant controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantStrategy {
    pub pi: f64,
    pub c_tilde: f64,
}

impl StrategyEval for ConstantStrategy {
    fn controls(&self, _w: f64, _y: f64) -> (f64, f64) {
        (self.pi, self.c_tilde)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WealthPath {
    pub times: Vec<f64>,
    pub wealth: Vec<f64>,
}

/// Log-Euler wealth along a state path, stopped at its exit:
/// ln X += (r + πλ - c̃ - ½π²σ²)Δt + πσ(ρΔW + ρ̂ΔŴ), with controls
/// evaluated at the left end of each step.
pub fn simulate_wealth(
    path: &StatePath,
    strategy: &dyn StrategyEval,
    x0: f64,
    coeffs: &dyn CoefficientSet,
) -> WealthPath {
    let steps = path.exit_index.min(path.times.len() - 1);
    let mut wealth = Vec::with_capacity(steps + 1);
    let mut log_x = x0.ln();
    wealth.push(x0);
    for k in 0..steps {
        let (w, y) = (path.w_values[k], path.y_values[k]);
        let dt = path.times[k + 1] - path.times[k];
        let (pi, c) = strategy.controls(w, y);
        let sigma = coeffs.sigma(y);
        log_x += (coeffs.r(y) + pi * coeffs.lambda(y) - c - 0.5 * pi * pi * sigma * sigma) * dt
            + pi * sigma * (coeffs.rho(y) * path.dw[k] + coeffs.rhohat(y) * path.dw_hat[k]);
        wealth.push(log_x.exp());
    }
    WealthPath {
        times: path.times[..=steps].to_vec(),
        wealth,
    }
}
