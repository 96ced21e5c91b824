//! Scalar generators: the Epstein-Zin aggregator, its monotone transform,
//! the quadratic-exponential BSDE driver and its truncated, dominating and
//! PDE variants.
//!
//! Every generator shares the same nonlinearity e^{-(ψ/θ)d}. Its argument is
//! clamped to ±[`EXP_CLAMP`]; each clamp increments a process-wide counter
//! readable through [`exp_clamp_events`].

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::GeneratorError;
use crate::model::{CoefficientSet, MarketConstants, Preferences};

pub const EXP_CLAMP: f64 = 700.0;

static CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of exponent clamps performed since start-up.
pub fn exp_clamp_events() -> u64 {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

pub(crate) fn guarded_exp(x: f64) -> f64 {
    if x > EXP_CLAMP {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
        EXP_CLAMP.exp()
    } else if x < -EXP_CLAMP {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
        (-EXP_CLAMP).exp()
    } else {
        x.exp()
    }
}

/// Point at which a generator is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorInputs {
    /// Decomposition value D (or u on the PDE side).
    pub d: f64,
    /// Loading on the state noise W.
    pub z: f64,
    /// Loading on the orthogonal noise Ŵ.
    pub zhat: f64,
    /// State value.
    pub y: f64,
}

impl GeneratorInputs {
    pub fn new(d: f64, z: f64, zhat: f64, y: f64) -> Self {
        Self { d, z, zhat, y }
    }
}

/// Market coefficients frozen at one state value, with the helper scalars
/// M, M̂ and h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCoefficients {
    pub r: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub rho: f64,
    pub rhohat: f64,
}

impl PointCoefficients {
    pub fn at(coeffs: &dyn CoefficientSet, y: f64) -> Self {
        Self {
            r: coeffs.r(y),
            lambda: coeffs.lambda(y),
            sigma: coeffs.sigma(y),
            rho: coeffs.rho(y),
            rhohat: coeffs.rhohat(y),
        }
    }

    /// M = 1 + ((1-γ)/γ) ρ².
    pub fn m(&self, prefs: &Preferences) -> f64 {
        let g = prefs.gamma();
        1.0 + (1.0 - g) / g * self.rho * self.rho
    }

    /// M̂ = 1 + ((1-γ)/γ) ρ̂².
    pub fn mhat(&self, prefs: &Preferences) -> f64 {
        let g = prefs.gamma();
        1.0 + (1.0 - g) / g * self.rhohat * self.rhohat
    }

    /// h = (1-γ)(r + λ²/(2γσ²)).
    pub fn h(&self, prefs: &Preferences) -> f64 {
        let g = prefs.gamma();
        (1.0 - g) * (self.r + self.lambda * self.lambda / (2.0 * g * self.sigma * self.sigma))
    }

    /// (1-γ)λ / (γσ), the coefficient of the linear loading terms.
    fn linear_coef(&self, prefs: &Preferences) -> f64 {
        let g = prefs.gamma();
        (1.0 - g) * self.lambda / (g * self.sigma)
    }
}

/// How the exponential term e^{-(ψ/θ)d} is represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpTerm {
    Exact,
    /// Tangent linearisation above `n` (the truncation J).
    Truncated {
        n: f64,
    },
    /// Unit-slope continuation outside [-c̄, c̄] (the Lipschitz truncation φ).
    Phi {
        c_bar: f64,
    },
}

impl ExpTerm {
    pub fn value(&self, d: f64, prefs: &Preferences) -> f64 {
        match *self {
            ExpTerm::Exact => guarded_exp(prefs.exp_slope() * d),
            ExpTerm::Truncated { n } => truncation_j(d, n, prefs),
            ExpTerm::Phi { c_bar } => phi_truncation(d, c_bar, prefs),
        }
    }

    pub fn derivative(&self, d: f64, prefs: &Preferences) -> f64 {
        let a = prefs.exp_slope();
        match *self {
            ExpTerm::Exact => a * guarded_exp(a * d),
            ExpTerm::Truncated { n } => {
                if d <= n {
                    a * guarded_exp(a * d)
                } else {
                    a
                }
            }
            ExpTerm::Phi { c_bar } => {
                if d.abs() <= c_bar {
                    a * guarded_exp(a * d)
                } else {
                    1.0
                }
            }
        }
    }
}

/// Epstein-Zin aggregator f(c, v) in its separated form
/// δ c^{1-1/ψ}/(1-1/ψ) ((1-γ)v)^{1-1/θ} - δθv.
pub fn aggregator_f(c: f64, v: f64, prefs: &Preferences) -> Result<f64, GeneratorError> {
    if v > 0.0 {
        return Err(GeneratorError::PositiveUtility(v));
    }
    if c < 0.0 {
        return Err(GeneratorError::NegativeConsumption(c));
    }
    let one_m_inv_psi = 1.0 - 1.0 / prefs.psi();
    let theta = prefs.theta();
    let scaled = (1.0 - prefs.gamma()) * v;
    let consumption = prefs.delta() * c.powf(one_m_inv_psi) / one_m_inv_psi * scaled.powf(1.0 - 1.0 / theta);
    Ok(consumption - prefs.delta() * theta * v)
}

/// F(t, c, y) = δθ e^{-δt} c^{1-1/ψ} y |y|^{-1/θ}, decreasing in y ≥ 0.
pub fn transformed_f(t: f64, c: f64, y: f64, prefs: &Preferences) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let theta = prefs.theta();
    prefs.delta()
        * theta
        * (-prefs.delta() * t).exp()
        * c.powf(1.0 - 1.0 / prefs.psi())
        * y
        * y.abs().powf(-1.0 / theta)
}

/// Generator H of the decomposition BSDE, evaluated from the form obtained
/// by substituting the first-order controls (before rearranging).
pub fn generator_h(inputs: &GeneratorInputs, coeffs: &dyn CoefficientSet, prefs: &Preferences) -> f64 {
    let pc = PointCoefficients::at(coeffs, inputs.y);
    generator_h_with(inputs, &pc, prefs, ExpTerm::Exact)
}

fn generator_h_with(inputs: &GeneratorInputs, pc: &PointCoefficients, prefs: &Preferences, term: ExpTerm) -> f64 {
    let g = prefs.gamma();
    let theta = prefs.theta();
    let excess = pc.lambda + pc.sigma * (pc.rho * inputs.z + pc.rhohat * inputs.zhat);
    0.5 * (inputs.z * inputs.z + inputs.zhat * inputs.zhat) + (1.0 - g) * pc.r - prefs.delta() * theta
        + prefs.delta_pow_psi() * theta / prefs.psi() * term.value(inputs.d, prefs)
        + (1.0 - g) * excess * excess / (2.0 * g * pc.sigma * pc.sigma)
}

/// The expression minimised over (π, c̃) in the Bellman equation.
pub fn bellman_infimand(
    pi: f64,
    c_tilde: f64,
    inputs: &GeneratorInputs,
    coeffs: &dyn CoefficientSet,
    prefs: &Preferences,
) -> f64 {
    let pc = PointCoefficients::at(coeffs, inputs.y);
    let g = prefs.gamma();
    let theta = prefs.theta();
    let base = (1.0 - g) * pc.r + 0.5 * (inputs.z * inputs.z + inputs.zhat * inputs.zhat) - prefs.delta() * theta;
    let consumption = -(1.0 - g) * c_tilde
        + prefs.delta() * theta * c_tilde.powf(1.0 - 1.0 / prefs.psi()) * guarded_exp(-inputs.d / theta);
    let excess = pc.lambda + pc.sigma * (pc.rho * inputs.z + pc.rhohat * inputs.zhat);
    let portfolio = (1.0 - g) * pi * excess - 0.5 * g * (1.0 - g) * pi * pi * pc.sigma * pc.sigma;
    base + consumption + portfolio
}

/// First-order points (π*, c̃*) of the Bellman infimand.
pub fn optimal_controls(inputs: &GeneratorInputs, coeffs: &dyn CoefficientSet, prefs: &Preferences) -> (f64, f64) {
    let pc = PointCoefficients::at(coeffs, inputs.y);
    let pi =
        (pc.lambda + pc.sigma * (pc.rho * inputs.z + pc.rhohat * inputs.zhat)) / (prefs.gamma() * pc.sigma * pc.sigma);
    let c = prefs.delta_pow_psi() * guarded_exp(prefs.exp_slope() * inputs.d);
    (pi, c)
}

/// Truncation J: exponential up to `n`, tangent line above.
pub fn truncation_j(d: f64, n: f64, prefs: &Preferences) -> f64 {
    let a = prefs.exp_slope();
    if d <= n {
        guarded_exp(a * d)
    } else {
        guarded_exp(a * n) + a * (d - n)
    }
}

/// Hⁿ: H with the exponential replaced by J.
pub fn truncated_hn(n: f64, inputs: &GeneratorInputs, coeffs: &dyn CoefficientSet, prefs: &Preferences) -> f64 {
    let pc = PointCoefficients::at(coeffs, inputs.y);
    rearranged(
        inputs.y,
        inputs.d,
        inputs.z,
        inputs.zhat,
        &pc,
        prefs,
        ExpTerm::Truncated { n },
    )
}

/// Linear-growth generator dominating every Hⁿ.
pub fn upper_bound_h(d: f64, z: f64, zhat: f64, constants: &MarketConstants, prefs: &Preferences) -> f64 {
    1.5 * (z * z + zhat * zhat) - prefs.delta_pow_psi() * d + constants.c1
}

/// PDE generator G(y, d, z, ẑ) in its rearranged form.
pub fn pde_generator_g(y: f64, d: f64, z: f64, zhat: f64, coeffs: &dyn CoefficientSet, prefs: &Preferences) -> f64 {
    let pc = PointCoefficients::at(coeffs, y);
    rearranged(y, d, z, zhat, &pc, prefs, ExpTerm::Exact)
}

pub(crate) fn rearranged(
    _y: f64,
    d: f64,
    z: f64,
    zhat: f64,
    pc: &PointCoefficients,
    prefs: &Preferences,
    term: ExpTerm,
) -> f64 {
    let g = prefs.gamma();
    let lin = pc.linear_coef(prefs);
    pc.m(prefs) * 0.5 * z * z
        + pc.mhat(prefs) * 0.5 * zhat * zhat
        + lin * (pc.rho * z + pc.rhohat * zhat)
        + (1.0 - g) / g * pc.rho * pc.rhohat * z * zhat
        + prefs.delta_pow_psi() * prefs.theta() / prefs.psi() * term.value(d, prefs)
        + pc.h(prefs)
        - prefs.delta() * prefs.theta()
}

/// Partial derivatives (∂/∂d, ∂/∂z, ∂/∂ẑ) of the rearranged generator.
pub(crate) fn rearranged_partials(
    d: f64,
    z: f64,
    zhat: f64,
    pc: &PointCoefficients,
    prefs: &Preferences,
    term: ExpTerm,
) -> (f64, f64, f64) {
    let g = prefs.gamma();
    let lin = pc.linear_coef(prefs);
    let cross = (1.0 - g) / g * pc.rho * pc.rhohat;
    let dd = prefs.delta_pow_psi() * prefs.theta() / prefs.psi() * term.derivative(d, prefs);
    let dz = pc.m(prefs) * z + lin * pc.rho + cross * zhat;
    let dzhat = pc.mhat(prefs) * zhat + lin * pc.rhohat + cross * z;
    (dd, dz, dzhat)
}

/// Lipschitz truncation φ of the exponential at level `c_bar`.
pub fn phi_truncation(d: f64, c_bar: f64, prefs: &Preferences) -> f64 {
    let a = prefs.exp_slope();
    if d > c_bar {
        d + (guarded_exp(a * c_bar) - c_bar)
    } else if d < -c_bar {
        d + (guarded_exp(-a * c_bar) + c_bar)
    } else {
        guarded_exp(a * d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{heston_coefficients, market_constants, HestonCoefficients, HestonParams, RectDomain};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn prefs() -> Preferences {
        Preferences::new(2.0, 1.5, 0.08).unwrap()
    }

    fn heston() -> HestonCoefficients {
        heston_coefficients(&HestonParams::reference()).unwrap()
    }

    /// Golden-section search driven by an exact difference `diff(a, b) = f(a) - f(b)`.
    /// Comparing raw function values cannot resolve an argmin below ~1e-8.
    fn golden_min(diff: impl Fn(f64, f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        for _ in 0..400 {
            if diff(x1, x2) < 0.0 {
                hi = x2;
                x2 = x1;
                x1 = hi - inv_phi * (hi - lo);
            } else {
                lo = x1;
                x1 = x2;
                x2 = lo + inv_phi * (hi - lo);
            }
            if hi - lo < 1e-15 * (1.0 + lo.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn ternary_min(diff: impl Fn(f64, f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..400 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if diff(m1, m2) < 0.0 {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        0.5 * (lo + hi)
    }

    /// Differences of the two brackets of the Bellman infimand.
    fn consumption_diff(inputs: &GeneratorInputs, p: &Preferences) -> impl Fn(f64, f64) -> f64 {
        let g = p.gamma();
        let k = p.delta() * p.theta() * (-inputs.d / p.theta()).exp();
        let e = 1.0 - 1.0 / p.psi();
        move |a: f64, b: f64| {
            let pow_diff = if b > 0.0 {
                b.powf(e) * (e * ((a - b) / b).ln_1p()).exp_m1()
            } else {
                a.powf(e)
            };
            -(1.0 - g) * (a - b) + k * pow_diff
        }
    }

    fn portfolio_diff(inputs: &GeneratorInputs, c: &dyn CoefficientSet, p: &Preferences) -> impl Fn(f64, f64) -> f64 {
        let g = p.gamma();
        let (lam, sig) = (c.lambda(inputs.y), c.sigma(inputs.y));
        let excess = lam + sig * (c.rho(inputs.y) * inputs.z + c.rhohat(inputs.y) * inputs.zhat);
        move |a: f64, b: f64| (a - b) * ((1.0 - g) * excess - 0.5 * g * (1.0 - g) * sig * sig * (a + b))
    }

    #[test]
    fn aggregator_stationary_point() {
        let p = prefs();
        for c in [0.1f64, 1.0, 2.5, 10.0] {
            let v = c.powf(1.0 - p.gamma()) / (1.0 - p.gamma());
            assert!(aggregator_f(c, v, &p).unwrap().abs() < 1e-12);
        }
        assert!(aggregator_f(1.0, -1.0, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn aggregator_two_term_evaluation() {
        let p = prefs();
        // δ c^{1/3}/(1/3) (-v)^{4/3} - δθv at c = 2, v = -1
        let first = 0.08 * 2f64.powf(1.0 / 3.0) / (1.0 / 3.0) * 1f64.powf(4.0 / 3.0);
        let second = -(0.08 * 3.0);
        assert_relative_eq!(aggregator_f(2.0, -1.0, &p).unwrap(), first + second, epsilon = 1e-14);
        // zero consumption leaves the linear term
        assert_relative_eq!(
            aggregator_f(0.0, -2.0, &p).unwrap(),
            -0.08 * -3.0 * -2.0,
            epsilon = 1e-15
        );
        assert!(aggregator_f(1.0, 0.5, &p).is_err());
    }

    #[test]
    fn transformed_generator() {
        let p = prefs();
        assert_eq!(transformed_f(0.3, 1.0, 0.0, &p), 0.0);
        assert_relative_eq!(transformed_f(0.0, 1.0, 1.0, &p), -0.24, epsilon = 1e-15);
        let mut prev = transformed_f(1.0, 2.0, 1e-3, &p);
        for i in 1..200 {
            let y = 1e-3 + i as f64 * 0.05;
            let v = transformed_f(1.0, 2.0, y, &p);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn h_at_zero_loading() {
        let p = prefs();
        let c = heston();
        for y in [0.001, 0.0225, 0.3, 1.0] {
            let expected = p.delta_pow_psi() * p.theta() / p.psi()
                + (1.0 - 2.0) * (0.05 + 0.47 * 0.47 * y / (2.0 * 2.0))
                - 0.08 * -3.0;
            let got = generator_h(&GeneratorInputs::new(0.0, 0.0, 0.0, y), &c, &p);
            assert_relative_eq!(got, expected, epsilon = 1e-14);
            assert_relative_eq!(pde_generator_g(y, 0.0, 0.0, 0.0, &c, &p), expected, epsilon = 1e-14);
        }
        // closed form at y = m² - ε with ε = 0
        let g0 = pde_generator_g(0.0225, 0.0, 0.0, 0.0, &c, &p);
        assert_relative_eq!(
            g0,
            -0.08f64.powf(1.5) * 2.0 - 0.05 - 0.2209 * 0.0225 / 4.0 + 0.24,
            epsilon = 1e-14
        );
    }

    #[test]
    fn cross_term_vanishes_without_correlation() {
        let p = prefs();
        let c = heston();
        let g = |z: f64, zh: f64| pde_generator_g(0.04, 0.1, z, zh, &c, &p);
        // with ρ = 0 the generator separates: G(z, ẑ) - G(z, 0) - G(0, ẑ) + G(0, 0) = 0
        let mixed = g(0.7, -0.4) - g(0.7, 0.0) - g(0.0, -0.4) + g(0.0, 0.0);
        assert!(mixed.abs() < 1e-14);
    }

    #[test]
    fn quadratic_scaling_in_loadings() {
        let p = prefs();
        let c = heston();
        let (z, zh, y, d) = (0.3, -0.8, 0.2, 0.05);
        let f = |t: f64| pde_generator_g(y, d, t * z, t * zh, &c, &p) - pde_generator_g(y, d, 0.0, 0.0, &c, &p);
        // fit a t + b t² through t = 1, 2 and check at t = 3
        let (f1, f2) = (f(1.0), f(2.0));
        let b = (f2 - 2.0 * f1) / 2.0;
        let a = f1 - b;
        assert_relative_eq!(f(3.0), 3.0 * a + 9.0 * b, epsilon = 1e-13);
        assert_relative_eq!(f(-1.5), -1.5 * a + 2.25 * b, epsilon = 1e-13);
    }

    #[test]
    fn consumption_bracket_is_convex() {
        let p = prefs();
        let c = heston();
        let inputs = GeneratorInputs::new(0.2, 0.1, -0.3, 0.05);
        let (pi, cs) = optimal_controls(&inputs, &c, &p);
        let h = 1e-4 * cs;
        let f = |x: f64| bellman_infimand(pi, x, &inputs, &c, &p);
        let second = (f(cs + h) - 2.0 * f(cs) + f(cs - h)) / (h * h);
        assert!(second > 0.0);
    }

    #[test]
    fn argmins_match_first_order_conditions() {
        let p = prefs();
        let c = heston();
        for &(d, z, zh, y) in &[(0.0, 0.0, 0.0, 0.04), (0.3, 0.2, -0.5, 0.01), (-0.7, -0.1, 0.9, 0.6)] {
            let inputs = GeneratorInputs::new(d, z, zh, y);
            let (pi, cs) = optimal_controls(&inputs, &c, &p);
            let c_arg = golden_min(consumption_diff(&inputs, &p), 0.0, 10.0 * cs + 1.0);
            assert!((c_arg - cs).abs() < 1e-10, "consumption argmin {c_arg} vs {cs}");
            let pi_arg = ternary_min(portfolio_diff(&inputs, &c, &p), pi - 50.0, pi + 50.0);
            assert!((pi_arg - pi).abs() < 1e-10, "portfolio argmin {pi_arg} vs {pi}");
        }
    }

    #[test]
    fn truncation_properties() {
        let p = prefs();
        let n = 2.0;
        let left = truncation_j(n - 1e-13, n, &p);
        let right = truncation_j(n + 1e-13, n, &p);
        assert!((left - right).abs() < 1e-12);
        let mut prev = truncation_j(-10.0 * n, n, &p);
        for i in 1..=4000 {
            let d = -10.0 * n + 20.0 * n * i as f64 / 4000.0;
            let v = truncation_j(d, n, &p);
            assert!(v > prev);
            prev = v;
        }
        let c = heston();
        for d in [-2.0, -0.5, 0.0, 1.3, 2.0] {
            let inputs = GeneratorInputs::new(d, 0.3, -0.2, 0.1);
            assert_eq!(
                truncated_hn(n, &inputs, &c, &p),
                pde_generator_g(0.1, d, 0.3, -0.2, &c, &p)
            );
        }
        // exact once n exceeds |d|
        let inputs = GeneratorInputs::new(7.5, 0.1, 0.1, 0.3);
        assert!(truncated_hn(5.0, &inputs, &c, &p) != generator_h(&inputs, &c, &p));
        assert_relative_eq!(
            truncated_hn(8.0, &inputs, &c, &p),
            generator_h(&inputs, &c, &p),
            max_relative = 1e-13
        );
    }

    #[test]
    fn upper_bound_shape() {
        let p = prefs();
        let c = heston();
        let mc = market_constants(&c, &RectDomain::new(0.02, 0.001, 1.0).unwrap(), &p).unwrap();
        assert_eq!(upper_bound_h(0.0, 0.0, 0.0, &mc, &p), mc.c1);
        let slope = upper_bound_h(1.0, 0.2, 0.3, &mc, &p) - upper_bound_h(0.0, 0.2, 0.3, &mc, &p);
        assert_relative_eq!(slope, -p.delta_pow_psi(), epsilon = 1e-15);
    }

    #[test]
    fn phi_continuity_and_value() {
        let p = prefs();
        let cb = 3.0;
        assert_eq!(phi_truncation(0.0, cb, &p), 1.0);
        for edge in [cb, -cb] {
            let inside = phi_truncation(edge, cb, &p);
            let outside = phi_truncation(edge + edge.signum() * 1e-14, cb, &p);
            assert!((inside - outside).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_term_derivatives_match_differences() {
        let p = prefs();
        for term in [
            ExpTerm::Exact,
            ExpTerm::Truncated { n: 1.0 },
            ExpTerm::Phi { c_bar: 1.0 },
        ] {
            for d in [-2.0, -0.3, 0.4, 2.5] {
                let h = 1e-6;
                let fd = (term.value(d + h, &p) - term.value(d - h, &p)) / (2.0 * h);
                assert_relative_eq!(term.derivative(d, &p), fd, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn clamp_is_counted() {
        let before = exp_clamp_events();
        let v = guarded_exp(1e4);
        assert!(v.is_finite());
        assert!(exp_clamp_events() > before);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn infimand_attains_h(d in -3.0f64..3.0, z in -2.0f64..2.0, zh in -2.0f64..2.0, y in 0.001f64..1.0) {
            let p = prefs();
            let c = heston();
            let inputs = GeneratorInputs::new(d, z, zh, y);
            let (pi, cs) = optimal_controls(&inputs, &c, &p);
            let h = generator_h(&inputs, &c, &p);
            let inf = bellman_infimand(pi, cs, &inputs, &c, &p);
            prop_assert!((inf - h).abs() <= 1e-10 * (1.0 + h.abs()));
        }

        #[test]
        fn infimand_dominates_h(d in -3.0f64..3.0, z in -2.0f64..2.0, zh in -2.0f64..2.0, y in 0.001f64..1.0,
                               pi in -20.0f64..20.0, ct in 0.0f64..5.0) {
            let p = prefs();
            let c = heston();
            let inputs = GeneratorInputs::new(d, z, zh, y);
            let h = generator_h(&inputs, &c, &p);
            prop_assert!(bellman_infimand(pi, ct, &inputs, &c, &p) >= h - 1e-12 * (1.0 + h.abs()));
        }

        #[test]
        fn g_equals_h(d in -3.0f64..3.0, z in -2.0f64..2.0, zh in -2.0f64..2.0, y in 0.001f64..1.0, eps in 0.0f64..0.1) {
            let p = prefs();
            let c = heston_coefficients(&HestonParams::reference().with_eps(eps)).unwrap();
            let h = generator_h(&GeneratorInputs::new(d, z, zh, y), &c, &p);
            let g = pde_generator_g(y, d, z, zh, &c, &p);
            prop_assert!((h - g).abs() <= 1e-12 * (1.0 + h.abs()));
        }

        #[test]
        fn upper_bound_dominates(d in -20.0f64..20.0, z in -5.0f64..5.0, zh in -5.0f64..5.0,
                                 y in 0.001f64..1.0, n in 0.1f64..10.0, gamma in 1.05f64..6.0) {
            let p = Preferences::new(gamma, 1.5, 0.08).unwrap();
            let c = heston();
            let mc = market_constants(&c, &RectDomain::new(0.02, 0.001, 1.0).unwrap(), &p).unwrap();
            let hn = truncated_hn(n, &GeneratorInputs::new(d, z, zh, y), &c, &p);
            prop_assert!(upper_bound_h(d, z, zh, &mc, &p) >= hn - 1e-12 * (1.0 + hn.abs()));
        }

        #[test]
        fn phi_lipschitz(a in -10.0f64..10.0, b in -10.0f64..10.0, cb in 0.1f64..5.0) {
            let p = prefs();
            let slope = p.exp_slope();
            let k = 1f64.max(slope * (slope * cb).exp());
            let lhs = (phi_truncation(a, cb, &p) - phi_truncation(b, cb, &p)).abs();
            prop_assert!(lhs <= k * (a - b).abs() * (1.0 + 1e-12) + 1e-15);
        }
    }
}
