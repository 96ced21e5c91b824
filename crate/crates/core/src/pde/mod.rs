//! Finite-difference solver for the semilinear Dirichlet problem
//!
//! ```text
//! ℒu + G(y, u, b u_y + β u_w, Γ u_w) = 0  in D,    u = 0 on ∂D,
//! ℒ = a ∂_y + α_W ∂_w + ½b² ∂_yy + ½(β² + Γ²) ∂_ww + bβ ∂_yw,
//! ```
//!
//! on the rectangle D = (-L/2, L/2) × (y1, y2), plus the representation
//! fields Z = b u_y + β u_w and Ẑ = Γ u_w.
//!
//! The exponential in G is replaced by its Lipschitz truncation at level
//! `c_bar` during the iteration; a converged solution with |u| ≤ `c_bar`
//! therefore solves the untruncated problem.

mod band;
mod grid;

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::PdeError;
use crate::generators::{rearranged, rearranged_partials, ExpTerm, PointCoefficients};
use crate::model::{CoefficientSet, Preferences};
use band::BandMatrix;

pub use grid::{build_grid, Grid, MIN_NODES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Newton,
    Picard,
}

impl FromStr for Scheme {
    type Err = PdeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "newton" => Ok(Scheme::Newton),
            "picard" => Ok(Scheme::Picard),
            _ => Err(PdeError::InvalidOption("scheme must be \"newton\" or \"picard\"")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Max-norm residual target.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial Newton step length, in (0, 1].
    pub damping: f64,
    /// Initial truncation level; doubled on escape up to `c_bar_max`.
    pub c_bar: f64,
    pub c_bar_max: f64,
    pub scheme: Scheme,
    /// Rounds the four corners with this radius, in units of the side
    /// lengths. Nodes cut off by the rounding are pinned to zero.
    pub corner_radius: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 50,
            damping: 1.0,
            c_bar: 5.0,
            c_bar_max: 40.0,
            scheme: Scheme::Newton,
            corner_radius: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), PdeError> {
        if !(self.tolerance > 0.0) {
            return Err(PdeError::InvalidOption("tolerance must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(PdeError::InvalidOption("damping must lie in (0, 1]"));
        }
        if !(self.c_bar > 0.0) || self.c_bar_max < self.c_bar {
            return Err(PdeError::InvalidOption("need 0 < c_bar <= c_bar_max"));
        }
        if self.max_iterations == 0 {
            return Err(PdeError::InvalidOption("max_iterations must be positive"));
        }
        if let Some(r) = self.corner_radius {
            if !(r > 0.0 && r <= 0.5) {
                return Err(PdeError::InvalidOption("corner_radius must lie in (0, 0.5]"));
            }
        }
        Ok(())
    }
}

/// Converged field with its representation fields and summary bounds.
#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub grid: Grid,
    pub u: Vec<f64>,
    pub du_dw: Vec<f64>,
    pub du_dy: Vec<f64>,
    pub z_field: Vec<f64>,
    pub zhat_field: Vec<f64>,
    pub c_tilde_sup: f64,
    pub zhat_sq_max: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Scheme that produced the final iterate.
    pub scheme: Scheme,
    /// Truncation level in force at convergence.
    pub c_bar: f64,
}

impl Solution {
    pub fn u_at(&self, w: f64, y: f64) -> Result<f64, PdeError> {
        self.grid.interpolate(&self.u, w, y)
    }

    pub fn du_dw_at(&self, w: f64, y: f64) -> Result<f64, PdeError> {
        self.grid.interpolate(&self.du_dw, w, y)
    }

    pub fn z_at(&self, w: f64, y: f64) -> Result<f64, PdeError> {
        self.grid.interpolate(&self.z_field, w, y)
    }

    pub fn zhat_at(&self, w: f64, y: f64) -> Result<f64, PdeError> {
        self.grid.interpolate(&self.zhat_field, w, y)
    }

    pub fn min_u(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_u(&self) -> f64 {
        max_norm(&self.u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupBounds {
    /// Grid maximum of u, boundary included (a grid estimate of the
    /// essential supremum).
    pub c_tilde_sup: f64,
    /// Grid maximum of Ẑ².
    pub zhat_sq_max: f64,
}

pub fn sup_bounds(solution: &Solution) -> SupBounds {
    SupBounds {
        c_tilde_sup: solution.u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        zhat_sq_max: solution.zhat_field.iter().fold(0.0f64, |m, v| m.max(v * v)),
    }
}

#[derive(Debug, Clone, Copy)]
struct NodeCoef {
    a: f64,
    b: f64,
    aw: f64,
    bw: f64,
    gw: f64,
    pc: PointCoefficients,
}

struct Problem<'a> {
    grid: &'a Grid,
    prefs: &'a Preferences,
    nodes: Vec<NodeCoef>,
    /// True for nodes held at zero (boundary or cut corner).
    pinned: Vec<bool>,
    forcing: Option<&'a [f64]>,
    has_cross: bool,
}

impl<'a> Problem<'a> {
    fn new(
        grid: &'a Grid,
        coeffs: &dyn CoefficientSet,
        prefs: &'a Preferences,
        corner_radius: Option<f64>,
        forcing: Option<&'a [f64]>,
    ) -> Self {
        let nodes: Vec<NodeCoef> = grid
            .nodes()
            .map(|(_, _, w, y)| NodeCoef {
                a: coeffs.a(y),
                b: coeffs.b(y),
                aw: coeffs.alpha_w(w, y),
                bw: coeffs.beta_w(w, y),
                gw: coeffs.gamma_w(w, y),
                pc: PointCoefficients::at(coeffs, y),
            })
            .collect();
        let pinned = grid
            .nodes()
            .map(|(i, j, w, y)| grid.is_boundary(i, j) || corner_radius.is_some_and(|r| cut_corner(grid, w, y, r)))
            .collect();
        let has_cross = nodes.iter().any(|n| n.bw != 0.0);
        Self {
            grid,
            prefs,
            nodes,
            pinned,
            forcing,
            has_cross,
        }
    }

    fn stencil(&self, u: &[f64], i: usize, j: usize) -> Stencil {
        let g = self.grid;
        let at = |a: usize, b: usize| u[g.idx(a, b)];
        let c = at(i, j);
        let (e, wst, n, s) = (at(i + 1, j), at(i - 1, j), at(i, j + 1), at(i, j - 1));
        Stencil {
            u: c,
            uw: (e - wst) / (2.0 * g.hw),
            uy: (n - s) / (2.0 * g.hy),
            uww: (e - 2.0 * c + wst) / (g.hw * g.hw),
            uyy: (n - 2.0 * c + s) / (g.hy * g.hy),
            uwy: (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4.0 * g.hw * g.hy),
        }
    }

    fn linear_part(nc: &NodeCoef, s: &Stencil) -> f64 {
        nc.a * s.uy
            + nc.aw * s.uw
            + 0.5 * nc.b * nc.b * s.uyy
            + 0.5 * (nc.bw * nc.bw + nc.gw * nc.gw) * s.uww
            + nc.b * nc.bw * s.uwy
    }

    fn source(&self, k: usize, y: f64, s: &Stencil, term: ExpTerm) -> f64 {
        let nc = &self.nodes[k];
        let z = nc.b * s.uy + nc.bw * s.uw;
        let zhat = nc.gw * s.uw;
        let f = self.forcing.map_or(0.0, |f| f[k]);
        rearranged(y, s.u, z, zhat, &nc.pc, self.prefs, term) + f
    }

    /// Residual at every node; zero on pinned nodes.
    fn residual(&self, u: &[f64], term: ExpTerm) -> Vec<f64> {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        out.par_chunks_mut(g.row_len()).enumerate().for_each(|(j, row)| {
            if j == 0 || j == g.ny + 1 {
                return;
            }
            let y = g.y(j);
            for (i, r) in row.iter_mut().enumerate() {
                let k = g.idx(i, j);
                if self.pinned[k] {
                    continue;
                }
                let s = self.stencil(u, i, j);
                *r = Self::linear_part(&self.nodes[k], &s) + self.source(k, y, &s, term);
            }
        });
        out
    }

    fn unknowns(&self) -> usize {
        self.grid.nw * self.grid.ny
    }

    fn unknown(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.grid.nw + (i - 1)
    }

    fn bandwidth(&self) -> usize {
        if self.has_cross {
            self.grid.nw + 1
        } else {
            self.grid.nw
        }
    }

    /// Assembles the Jacobian of the residual (with `with_source`) or of
    /// the linear operator alone.
    fn matrix(&self, u: &[f64], term: ExpTerm, with_source: bool) -> BandMatrix {
        let g = self.grid;
        let bw = self.bandwidth();
        let mut m = BandMatrix::zeros(self.unknowns(), bw, bw);
        let (hw, hy) = (g.hw, g.hy);
        for j in 1..=g.ny {
            for i in 1..=g.nw {
                let k = g.idx(i, j);
                let row = self.unknown(i, j);
                if self.pinned[k] {
                    m.add(row, row, 1.0);
                    continue;
                }
                let nc = &self.nodes[k];
                let (gd, gz, gzh) = if with_source {
                    let s = self.stencil(u, i, j);
                    let z = nc.b * s.uy + nc.bw * s.uw;
                    let zhat = nc.gw * s.uw;
                    rearranged_partials(s.u, z, zhat, &nc.pc, self.prefs, term)
                } else {
                    (0.0, 0.0, 0.0)
                };
                let dw = nc.aw + gz * nc.bw + gzh * nc.gw;
                let dy = nc.a + gz * nc.b;
                let diff_w = 0.5 * (nc.bw * nc.bw + nc.gw * nc.gw) / (hw * hw);
                let diff_y = 0.5 * nc.b * nc.b / (hy * hy);
                let cross = nc.b * nc.bw / (4.0 * hw * hy);
                let mut put = |ii: usize, jj: usize, v: f64| {
                    if !g.is_boundary(ii, jj) && v != 0.0 {
                        m.add(row, self.unknown(ii, jj), v);
                    }
                };
                put(i, j, -2.0 * diff_w - 2.0 * diff_y + gd);
                put(i + 1, j, diff_w + dw / (2.0 * hw));
                put(i - 1, j, diff_w - dw / (2.0 * hw));
                put(i, j + 1, diff_y + dy / (2.0 * hy));
                put(i, j - 1, diff_y - dy / (2.0 * hy));
                if cross != 0.0 {
                    put(i + 1, j + 1, cross);
                    put(i - 1, j - 1, cross);
                    put(i + 1, j - 1, -cross);
                    put(i - 1, j + 1, -cross);
                }
            }
        }
        m
    }

    fn gather(&self, field: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let mut v = Vec::with_capacity(self.unknowns());
        for j in 1..=g.ny {
            for i in 1..=g.nw {
                v.push(field[g.idx(i, j)]);
            }
        }
        v
    }

    fn scatter_add(&self, u: &mut [f64], delta: &[f64], step: f64) {
        let g = self.grid;
        for j in 1..=g.ny {
            for i in 1..=g.nw {
                let k = g.idx(i, j);
                if !self.pinned[k] {
                    u[k] += step * delta[self.unknown(i, j)];
                }
            }
        }
    }
}

struct Stencil {
    u: f64,
    uw: f64,
    uy: f64,
    uww: f64,
    uyy: f64,
    uwy: f64,
}

fn cut_corner(grid: &Grid, w: f64, y: f64, r: f64) -> bool {
    let d = &grid.domain;
    let s = (w + d.half_width()) / d.l;
    let t = (y - d.y1) / (d.y2 - d.y1);
    let cs = if s < r {
        r
    } else if s > 1.0 - r {
        1.0 - r
    } else {
        return false;
    };
    let ct = if t < r {
        r
    } else if t > 1.0 - r {
        1.0 - r
    } else {
        return false;
    };
    (s - cs).powi(2) + (t - ct).powi(2) > r * r
}

/// Max-norm that propagates non-finite entries as infinity.
fn max_norm(v: &[f64]) -> f64 {
    v.iter()
        .fold(0.0f64, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

/// Discrete residual ℒu + G(y, u, Z, Ẑ) at every node (zero on the boundary).
pub fn assemble_residual(u: &[f64], grid: &Grid, coeffs: &dyn CoefficientSet, prefs: &Preferences) -> Vec<f64> {
    Problem::new(grid, coeffs, prefs, None, None).residual(u, ExpTerm::Exact)
}

/// Nodal derivatives (u_w, u_y): central differences inside, one-sided
/// second-order differences on the boundary.
pub fn derivatives(u: &[f64], grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let (nw1, ny1) = (grid.nw + 1, grid.ny + 1);
    let mut dw = vec![0.0; grid.len()];
    let mut dy = vec![0.0; grid.len()];
    let at = |i: usize, j: usize| u[grid.idx(i, j)];
    for j in 0..=ny1 {
        for i in 0..=nw1 {
            let k = grid.idx(i, j);
            dw[k] = if i == 0 {
                (-3.0 * at(0, j) + 4.0 * at(1, j) - at(2, j)) / (2.0 * grid.hw)
            } else if i == nw1 {
                (3.0 * at(nw1, j) - 4.0 * at(nw1 - 1, j) + at(nw1 - 2, j)) / (2.0 * grid.hw)
            } else {
                (at(i + 1, j) - at(i - 1, j)) / (2.0 * grid.hw)
            };
            dy[k] = if j == 0 {
                (-3.0 * at(i, 0) + 4.0 * at(i, 1) - at(i, 2)) / (2.0 * grid.hy)
            } else if j == ny1 {
                (3.0 * at(i, ny1) - 4.0 * at(i, ny1 - 1) + at(i, ny1 - 2)) / (2.0 * grid.hy)
            } else {
                (at(i, j + 1) - at(i, j - 1)) / (2.0 * grid.hy)
            };
        }
    }
    (dw, dy)
}

/// Representation fields Z = b u_y + β u_w and Ẑ = Γ u_w.
pub fn gradient_fields(u: &[f64], grid: &Grid, coeffs: &dyn CoefficientSet) -> (Vec<f64>, Vec<f64>) {
    let (dw, dy) = derivatives(u, grid);
    fields_from_derivatives(&dw, &dy, grid, coeffs)
}

fn fields_from_derivatives(dw: &[f64], dy: &[f64], grid: &Grid, coeffs: &dyn CoefficientSet) -> (Vec<f64>, Vec<f64>) {
    let mut z = vec![0.0; grid.len()];
    let mut zhat = vec![0.0; grid.len()];
    for (i, j, w, y) in grid.nodes() {
        let k = grid.idx(i, j);
        z[k] = coeffs.b(y) * dy[k] + coeffs.beta_w(w, y) * dw[k];
        zhat[k] = coeffs.gamma_w(w, y) * dw[k];
    }
    (z, zhat)
}

/// Solves the Dirichlet problem, raising the truncation level on escape.
pub fn solve_dirichlet(
    grid: &Grid,
    coeffs: &dyn CoefficientSet,
    prefs: &Preferences,
    opts: &SolverOptions,
) -> Result<Solution, PdeError> {
    solve_inner(grid, coeffs, prefs, opts, None)
}

/// As [`solve_dirichlet`] with an extra source term `forcing` (a node
/// field) added to the equation.
pub fn solve_dirichlet_forced(
    grid: &Grid,
    coeffs: &dyn CoefficientSet,
    prefs: &Preferences,
    opts: &SolverOptions,
    forcing: &[f64],
) -> Result<Solution, PdeError> {
    if forcing.len() != grid.len() {
        return Err(PdeError::InvalidOption("forcing must have one value per grid node"));
    }
    solve_inner(grid, coeffs, prefs, opts, Some(forcing))
}

fn solve_inner(
    grid: &Grid,
    coeffs: &dyn CoefficientSet,
    prefs: &Preferences,
    opts: &SolverOptions,
    forcing: Option<&[f64]>,
) -> Result<Solution, PdeError> {
    opts.validate()?;
    let problem = Problem::new(grid, coeffs, prefs, opts.corner_radius, forcing);
    let mut c_bar = opts.c_bar;
    loop {
        let outcome = iterate(&problem, opts, c_bar)?;
        let max_abs = max_norm(&outcome.u);
        if max_abs <= c_bar {
            let (du_dw, du_dy) = derivatives(&outcome.u, grid);
            let (z_field, zhat_field) = fields_from_derivatives(&du_dw, &du_dy, grid, coeffs);
            let mut sol = Solution {
                grid: *grid,
                u: outcome.u,
                du_dw,
                du_dy,
                z_field,
                zhat_field,
                c_tilde_sup: 0.0,
                zhat_sq_max: 0.0,
                residual_norm: outcome.residual,
                iterations: outcome.iterations,
                scheme: outcome.scheme,
                c_bar,
            };
            let b = sup_bounds(&sol);
            sol.c_tilde_sup = b.c_tilde_sup;
            sol.zhat_sq_max = b.zhat_sq_max;
            return Ok(sol);
        }
        if 2.0 * c_bar > opts.c_bar_max {
            return Err(PdeError::CBarExceeded { c_bar, max_abs });
        }
        c_bar *= 2.0;
    }
}

struct Outcome {
    u: Vec<f64>,
    residual: f64,
    iterations: usize,
    scheme: Scheme,
}

fn iterate(problem: &Problem, opts: &SolverOptions, c_bar: f64) -> Result<Outcome, PdeError> {
    let term = ExpTerm::Phi { c_bar };
    let u0 = vec![0.0; problem.grid.len()];
    match opts.scheme {
        Scheme::Picard => picard(problem, opts, term, u0, 0),
        Scheme::Newton => match newton(problem, opts, term, u0)? {
            NewtonResult::Converged(out) => Ok(out),
            NewtonResult::Stalled { u, iterations } => picard(problem, opts, term, u, iterations),
        },
    }
}

enum NewtonResult {
    Converged(Outcome),
    Stalled { u: Vec<f64>, iterations: usize },
}

fn newton(problem: &Problem, opts: &SolverOptions, term: ExpTerm, mut u: Vec<f64>) -> Result<NewtonResult, PdeError> {
    let mut res = problem.residual(&u, term);
    let mut norm = max_norm(&res);
    for it in 0..opts.max_iterations {
        if norm <= opts.tolerance {
            return Ok(NewtonResult::Converged(Outcome {
                u,
                residual: norm,
                iterations: it,
                scheme: Scheme::Newton,
            }));
        }
        let lu = problem.matrix(&u, term, true).factor()?;
        let mut delta: Vec<f64> = problem.gather(&res).iter().map(|r| -r).collect();
        lu.solve_in_place(&mut delta);
        let mut step = opts.damping;
        let mut accepted = None;
        while step >= 1.0 / 1024.0 {
            let mut trial = u.clone();
            problem.scatter_add(&mut trial, &delta, step);
            let trial_res = problem.residual(&trial, term);
            let trial_norm = max_norm(&trial_res);
            if trial_norm.is_finite() && trial_norm < (1.0 - 1e-4 * step) * norm {
                accepted = Some((trial, trial_res, trial_norm));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((t, r, n)) => {
                u = t;
                res = r;
                norm = n;
            }
            None => return Ok(NewtonResult::Stalled { u, iterations: it + 1 }),
        }
    }
    if norm <= opts.tolerance {
        return Ok(NewtonResult::Converged(Outcome {
            u,
            residual: norm,
            iterations: opts.max_iterations,
            scheme: Scheme::Newton,
        }));
    }
    Ok(NewtonResult::Stalled {
        u,
        iterations: opts.max_iterations,
    })
}

/// Fixed-point iteration ℒu_{k+1} = -G(y, u_k, Z_k, Ẑ_k) with the linear
/// operator factorised once.
fn picard(
    problem: &Problem,
    opts: &SolverOptions,
    term: ExpTerm,
    mut u: Vec<f64>,
    spent: usize,
) -> Result<Outcome, PdeError> {
    let g = problem.grid;
    let lu = problem.matrix(&u, term, false).factor()?;
    let mut norm = f64::INFINITY;
    for it in 0..opts.max_iterations {
        norm = max_norm(&problem.residual(&u, term));
        if norm <= opts.tolerance {
            return Ok(Outcome {
                u,
                residual: norm,
                iterations: spent + it,
                scheme: Scheme::Picard,
            });
        }
        let mut rhs = vec![0.0; problem.unknowns()];
        for j in 1..=g.ny {
            let y = g.y(j);
            for i in 1..=g.nw {
                let k = g.idx(i, j);
                if !problem.pinned[k] {
                    let s = problem.stencil(&u, i, j);
                    rhs[problem.unknown(i, j)] = -problem.source(k, y, &s, term);
                }
            }
        }
        lu.solve_in_place(&mut rhs);
        for j in 1..=g.ny {
            for i in 1..=g.nw {
                let k = g.idx(i, j);
                if !problem.pinned[k] {
                    u[k] = rhs[problem.unknown(i, j)];
                }
            }
        }
        if !norm.is_finite() {
            break;
        }
    }
    let final_norm = max_norm(&problem.residual(&u, term));
    if final_norm <= opts.tolerance {
        return Ok(Outcome {
            u,
            residual: final_norm,
            iterations: spent + opts.max_iterations,
            scheme: Scheme::Picard,
        });
    }
    Err(PdeError::NotConverged {
        iterations: spent + opts.max_iterations,
        residual: if final_norm.is_finite() { final_norm } else { norm },
    })
}

#[cfg(test)]
mod tests;
