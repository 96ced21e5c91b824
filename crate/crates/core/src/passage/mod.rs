//! Exit law of the zero-mean return from the band (-L/2, L/2) under the
//! ε-modified Heston dynamics, and the exponential-moment checker.
//!
//! With s = αt and v = 2αy/k² the survival probability is the cosine series
//!
//! ```text
//! P(w, v, s) = Σ_n 4(-1)ⁿ/(π(2n+1)) · exp(-A_n(s) - B_n(s) v) · cos((2n+1)πw/L)
//! ```
//!
//! where B_n solves B' = -B - B² + (β_n/2L)², B(0) = 0, and A_n' = μB_n + ε_n.

pub mod quadrature;

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::PassageError;
use crate::model::{HestonParams, MarketConstants, Preferences};
use crate::pde::SupBounds;

pub const DEFAULT_TERMS: usize = 64;
pub const DEFAULT_SERIES_TOL: f64 = 1e-10;

/// Map from physical time t to the series argument s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScale {
    /// s = αt; densities carry the Jacobian α.
    Alpha,
    /// s = t. Kept only as a negative control.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitLaw {
    pub params: HestonParams,
    pub l: f64,
    pub mu: f64,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub eps_n: Vec<f64>,
    pub n_terms: usize,
    pub time_scale: TimeScale,
    /// Largest admissible tail estimate of a truncated series.
    pub tolerance: f64,
}

impl ExitLaw {
    pub fn new(params: &HestonParams, l: f64, n_terms: usize) -> Result<Self, PassageError> {
        params.validate()?;
        if !(l > 0.0) || !l.is_finite() {
            return Err(PassageError::InvalidArgument(format!(
                "band width L must be positive, got {l}"
            )));
        }
        if n_terms == 0 {
            return Err(PassageError::InvalidArgument("n_terms must be positive".into()));
        }
        let (alpha, k) = (params.alpha, params.k);
        let odd = |n: usize| (2 * n + 1) as f64 * PI;
        let beta: Vec<f64> = (0..n_terms).map(|n| k / alpha * odd(n)).collect();
        let delta = beta.iter().map(|b| (1.0 + (b / l).powi(2)).sqrt()).collect();
        let eps_n = (0..n_terms)
            .map(|n| (odd(n) / ((2.0 * alpha).sqrt() * l)).powi(2) * params.eps)
            .collect();
        Ok(Self {
            params: *params,
            l,
            mu: 2.0 * alpha * params.m2 / params.k2(),
            beta,
            delta,
            eps_n,
            n_terms,
            time_scale: TimeScale::Alpha,
            tolerance: DEFAULT_SERIES_TOL,
        })
    }

    pub fn with_time_scale(mut self, scale: TimeScale) -> Self {
        self.time_scale = scale;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Same law with a different truncation length.
    pub fn with_terms(&self, n_terms: usize) -> Result<Self, PassageError> {
        Ok(Self::new(&self.params, self.l, n_terms)?
            .with_time_scale(self.time_scale)
            .with_tolerance(self.tolerance))
    }

    /// ds/dt.
    pub fn time_factor(&self) -> f64 {
        match self.time_scale {
            TimeScale::Alpha => self.params.alpha,
            TimeScale::Unit => 1.0,
        }
    }

    fn scaled_state(&self, y: f64) -> f64 {
        2.0 * self.params.alpha * y / self.params.k2()
    }

    fn check_point(&self, w: f64, y: f64, t: f64) -> Result<(), PassageError> {
        if !(w.abs() <= 0.5 * self.l) {
            return Err(PassageError::InvalidArgument(format!(
                "|w| must not exceed L/2, got w = {w}"
            )));
        }
        if !(y > 0.0) || !y.is_finite() {
            return Err(PassageError::InvalidArgument(format!("y must be positive, got {y}")));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(PassageError::InvalidArgument(format!("t must be nonnegative, got {t}")));
        }
        Ok(())
    }

    fn on_edge(&self, w: f64) -> bool {
        w.abs() >= 0.5 * self.l
    }

    /// Sums `weight(n) · 4(-1)ⁿ/(π(2n+1)) · e^{-A_n - B_n v} · cos(...)` until
    /// the bound on the remaining terms falls below the tolerance.
    fn series(&self, w: f64, y: f64, s: f64, weight: impl Fn(usize, f64) -> f64) -> Result<f64, PassageError> {
        let v = self.scaled_state(y);
        let stop = 1e-3 * self.tolerance;
        let mut sum = 0.0;
        let mut last = f64::INFINITY;
        for n in 0..self.n_terms {
            let b = riccati_bn(n, s, self);
            let coef = 4.0 / (PI * (2 * n + 1) as f64);
            let decay = (-amplitude_an(n, s, self) - b * v).exp();
            let weight = weight(n, b);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let cos = ((2 * n + 1) as f64 * PI * w / self.l).cos();
            sum += sign * coef * decay * weight * cos;
            let envelope = coef * decay * weight.abs().max(1.0);
            last = envelope;
            if envelope < stop && n > 0 {
                return Ok(sum);
            }
        }
        if last < self.tolerance {
            Ok(sum)
        } else {
            Err(PassageError::SeriesNotConverged {
                n_terms: self.n_terms,
                tail: last,
            })
        }
    }

    /// Survival probability P(τ > t | 𝒲₀ = w, Y₀ = y), clamped to [0, 1].
    pub fn survival(&self, w: f64, y: f64, t: f64) -> Result<f64, PassageError> {
        survival(w, y, t, self)
    }

    pub fn density(&self, w: f64, y: f64, t: f64) -> Result<f64, PassageError> {
        exit_density(w, y, t, self)
    }
}

/// Closed-form solution of the Riccati equation for mode `n`.
pub fn riccati_bn(n: usize, s: f64, law: &ExitLaw) -> f64 {
    let d = law.delta[n];
    let e = (-d * s).exp();
    let b = law.beta[n];
    b * b / (2.0 * law.l * law.l) * (1.0 - e) / ((d + 1.0) + (d - 1.0) * e)
}

/// A_n(s) = μ ln(((Δ+1) + (Δ-1)e^{-Δs})/(2Δ)) + (αm²(Δ-1)/k² + ε_n) s.
pub fn amplitude_an(n: usize, s: f64, law: &ExitLaw) -> f64 {
    let d = law.delta[n];
    let p = &law.params;
    let e = (-d * s).exp();
    law.mu * (((d + 1.0) + (d - 1.0) * e) / (2.0 * d)).ln() + (p.alpha * p.m2 * (d - 1.0) / p.k2() + law.eps_n[n]) * s
}

pub fn survival(w: f64, y: f64, t: f64, law: &ExitLaw) -> Result<f64, PassageError> {
    law.check_point(w, y, t)?;
    if law.on_edge(w) {
        return Ok(0.0);
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let s = law.time_factor() * t;
    Ok(law.series(w, y, s, |_, _| 1.0)?.clamp(0.0, 1.0))
}

/// Density of τ per unit physical time: -∂P/∂t.
pub fn exit_density(w: f64, y: f64, t: f64, law: &ExitLaw) -> Result<f64, PassageError> {
    law.check_point(w, y, t)?;
    if law.on_edge(w) || t == 0.0 {
        return Ok(0.0);
    }
    let s = law.time_factor() * t;
    let v = law.scaled_state(y);
    // -∂/∂s of each mode: A_n' + B_n' v with the Riccati equation substituted
    let per_s = law.series(w, y, s, |n, b| {
        let q = (law.beta[n] / (2.0 * law.l)).powi(2);
        (law.mu - v) * b + v * (q - b * b) + law.eps_n[n]
    })?;
    Ok(law.time_factor() * per_s)
}

/// Exponential decay rate of the density in physical time (leading mode).
pub fn tail_rate(law: &ExitLaw) -> f64 {
    let p = &law.params;
    law.time_factor() * (p.alpha * p.m2 * (law.delta[0] - 1.0) / p.k2() + law.eps_n[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Verified,
    NotVerified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub q_used: f64,
    pub w0: f64,
    pub y0: f64,
    /// E[exp(growth_rate_1 · τ)], an upper bound of the first expectation.
    pub integral_1: f64,
    pub integral_2: f64,
    pub tail_rate: f64,
    pub growth_rate_1: f64,
    pub growth_rate_2: f64,
    pub quadrature_converged: bool,
    pub verdict_1: Verdict,
    pub verdict_2: Verdict,
}

impl MomentReport {
    pub fn verdict(&self) -> Verdict {
        if self.verdict_1 == Verdict::Verified && self.verdict_2 == Verdict::Verified {
            Verdict::Verified
        } else {
            Verdict::NotVerified
        }
    }
}

/// Coefficient of τ in the first exponential functional once
/// ∫Z̃² ds is bounded by `zhat_sq_max`·τ.
pub fn growth_rate_1(prefs: &Preferences, c: &MarketConstants, zhat_sq_max: f64, q: f64) -> f64 {
    let (pp, g2) = (prefs.p_plus(), prefs.gamma().powi(2));
    q * (2.0 * c.r_bar * pp + (pp + 4.0 * pp * pp / g2) * c.c_lam_sig) + 4.0 * q * pp * pp / g2 * zhat_sq_max
}

pub fn growth_rate_2(prefs: &Preferences, c: &MarketConstants, zhat_sq_max: f64, c_tilde: f64) -> f64 {
    let (pm, g2) = (prefs.p_minus(), prefs.gamma().powi(2));
    let delta = prefs.delta();
    -pm * delta / (1.0 - 1.0 / prefs.psi()) + 2.0 * c.r_under * pm
        - 2.0 * pm * prefs.delta_pow_psi() * (prefs.exp_slope() * c_tilde).exp()
        + (pm.abs() + 4.0 * pm * pm / g2) * c.c_lam_sig
        + (4.0 * pm * pm - 2.0 * pm) / g2 * zhat_sq_max
}

/// Minimum series length used inside the moment quadrature.
pub const MOMENT_TERMS: usize = 2048;

/// E[e^{g τ}] for τ started at (w, y), or `None` if the quadrature did not
/// converge. Infinite when g reaches the tail rate.
pub fn exponential_moment(law: &ExitLaw, w: f64, y: f64, g: f64) -> Result<Option<f64>, PassageError> {
    let kappa = tail_rate(law);
    if g >= kappa {
        return Ok(Some(f64::INFINITY));
    }
    let law = if law.n_terms < MOMENT_TERMS {
        law.with_terms(MOMENT_TERMS)?
    } else {
        law.clone()
    };
    let integrand = |t: f64| -> Result<f64, PassageError> { Ok((g * t).exp() * exit_density(w, y, t, &law)?) };
    let mut t_cut = 10.0 / kappa;
    let mut acc = 0.0;
    let mut lo = 0.0;
    let mut converged = true;
    for _ in 0..60 {
        let q = quadrature::integrate(integrand, lo, t_cut, 1e-13, 1e-11, 400)?;
        converged &= q.converged;
        acc += q.value;
        // beyond T the survival decays at rate κ, so
        // ∫_T^∞ e^{gt} f dt ≈ e^{gT} P(T) κ/(κ - g)
        let tail = (g * t_cut).exp() * survival(w, y, t_cut, &law)? * kappa / (kappa - g);
        if tail <= 1e-10 * acc.abs() {
            return Ok(if converged { Some(acc + tail) } else { None });
        }
        lo = t_cut;
        t_cut *= 2.0;
    }
    Ok(None)
}

/// Checks both exponential-moment conditions for one Hölder exponent `q`,
/// using τ started at (w0, y0).
pub fn moment_condition_check(
    prefs: &Preferences,
    constants: &MarketConstants,
    bounds: &SupBounds,
    law: &ExitLaw,
    q: f64,
    start: (f64, f64),
) -> Result<MomentReport, PassageError> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(PassageError::InvalidQ(q));
    }
    if !bounds.c_tilde_sup.is_finite() || !bounds.zhat_sq_max.is_finite() {
        return Err(PassageError::UnconvergedPde);
    }
    let (w0, y0) = start;
    let g1 = growth_rate_1(prefs, constants, bounds.zhat_sq_max, q);
    let g2 = growth_rate_2(prefs, constants, bounds.zhat_sq_max, bounds.c_tilde_sup);
    let kappa = tail_rate(law);
    let i1 = exponential_moment(law, w0, y0, g1)?;
    let i2 = exponential_moment(law, w0, y0, g2)?;
    let verdict = |g: f64, i: Option<f64>| match i {
        Some(v) if g < kappa && v.is_finite() => Verdict::Verified,
        _ => Verdict::NotVerified,
    };
    Ok(MomentReport {
        q_used: q,
        w0,
        y0,
        integral_1: i1.unwrap_or(f64::NAN),
        integral_2: i2.unwrap_or(f64::NAN),
        tail_rate: kappa,
        growth_rate_1: g1,
        growth_rate_2: g2,
        quadrature_converged: i1.is_some() && i2.is_some(),
        verdict_1: verdict(g1, i1),
        verdict_2: verdict(g2, i2),
    })
}
