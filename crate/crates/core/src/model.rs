//! Preferences, market coefficients and the scalar market constants.
//!
//! The market is a riskless asset plus one risky asset whose coefficients
//! depend on a scalar state `y`. The concrete instance used throughout is the
//! (optionally ε-shifted) Heston model with zero correlation:
//!
//! ```text
//! dY = -α(Y - m²) dt + k √Y dW
//! dS/S = (r + λ(Y + ε)) dt + √(Y + ε) dŴ
//! d𝒲  = √(Y + ε) dŴ            (zero-mean return)
//! ```

use serde::Serialize;

use crate::error::ModelError;

/// Epstein-Zin preference parameters together with the derived exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preferences {
    gamma: f64,
    psi: f64,
    delta: f64,
    theta: f64,
    p_plus: f64,
    p_minus: f64,
}

impl Preferences {
    /// Requires `gamma > 1`, `psi > 1` and `delta > 0`.
    pub fn new(gamma: f64, psi: f64, delta: f64) -> Result<Self, ModelError> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(ModelError::OutOfRange {
                name: "gamma",
                value: gamma,
                bound: "must exceed 1",
            });
        }
        if !(psi > 1.0) || !psi.is_finite() {
            return Err(ModelError::OutOfRange {
                name: "psi",
                value: psi,
                bound: "must exceed 1",
            });
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(ModelError::OutOfRange {
                name: "delta",
                value: delta,
                bound: "must be positive",
            });
        }
        let theta = (1.0 - gamma) / (1.0 - 1.0 / psi);
        let p_plus = 2.0 * (1.0 - 1.0 / psi);
        let p_minus = 2.0 * (2.0 - 1.0 / theta) * (1.0 - gamma);
        Ok(Self {
            gamma,
            psi,
            delta,
            theta,
            p_plus,
            p_minus,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// θ = (1-γ)/(1-1/ψ), negative for γ, ψ > 1.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    /// δ^ψ, the consumption-wealth ratio when the decomposition value is zero.
    pub fn delta_pow_psi(&self) -> f64 {
        self.delta.powf(self.psi)
    }

    /// Exponent slope -ψ/θ of the term e^{-(ψ/θ)d}; strictly positive.
    pub fn exp_slope(&self) -> f64 {
        -self.psi / self.theta
    }
}

/// Heston market parameters. `k` is the vol-of-vol, `m2` the long-run variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HestonParams {
    pub alpha: f64,
    pub k: f64,
    pub m2: f64,
    pub r: f64,
    pub lambda: f64,
    pub eps: f64,
    pub rho: f64,
}

impl HestonParams {
    pub fn new(alpha: f64, k: f64, m2: f64, r: f64, lambda: f64, eps: f64) -> Result<Self, ModelError> {
        let params = Self {
            alpha,
            k,
            m2,
            r,
            lambda,
            eps,
            rho: 0.0,
        };
        params.validate()?;
        Ok(params)
    }

    /// The parameter set of the reference experiment (ε = 0).
    pub fn reference() -> Self {
        Self {
            alpha: 5.0,
            k: 0.5,
            m2: 0.0225,
            r: 0.05,
            lambda: 0.47,
            eps: 0.0,
            rho: 0.0,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [("alpha", self.alpha), ("k", self.k), ("m2", self.m2)];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::OutOfRange {
                    name,
                    value,
                    bound: "must be positive",
                });
            }
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(ModelError::OutOfRange {
                name: "eps",
                value: self.eps,
                bound: "must be non-negative",
            });
        }
        for (name, value) in [("r", self.r), ("lambda", self.lambda)] {
            if !value.is_finite() {
                return Err(ModelError::OutOfRange {
                    name,
                    value,
                    bound: "must be finite",
                });
            }
        }
        if self.rho != 0.0 {
            return Err(ModelError::OutOfRange {
                name: "rho",
                value: self.rho,
                bound: "only zero correlation is supported",
            });
        }
        Ok(())
    }

    pub fn k2(&self) -> f64 {
        self.k * self.k
    }
}

/// Feller condition 2αm² > k².
///
/// The reference parameters fail it (0.225 < 0.25). Callers are expected to
/// warn and continue: the variance simulator uses full truncation and the
/// PDE domain stays above `y1 > 0`.
pub fn validate_feller(params: &HestonParams) -> Result<bool, ModelError> {
    params.validate()?;
    Ok(2.0 * params.alpha * params.m2 > params.k2())
}

/// Rectangle (-L/2, L/2) × (y1, y2) in (zero-mean return, variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RectDomain {
    pub l: f64,
    pub y1: f64,
    pub y2: f64,
}

impl RectDomain {
    pub fn new(l: f64, y1: f64, y2: f64) -> Result<Self, ModelError> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(ModelError::OutOfRange {
                name: "L",
                value: l,
                bound: "must be positive",
            });
        }
        if !(y1 > 0.0) {
            return Err(ModelError::OutOfRange {
                name: "y1",
                value: y1,
                bound: "must be positive",
            });
        }
        if !(y2 > y1) || !y2.is_finite() {
            return Err(ModelError::OutOfRange {
                name: "y1",
                value: y1,
                bound: "must be less than y2",
            });
        }
        Ok(Self { l, y1, y2 })
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.l
    }

    pub fn contains(&self, w: f64, y: f64) -> bool {
        w.abs() < self.half_width() && y > self.y1 && y < self.y2
    }

    pub fn contains_closed(&self, w: f64, y: f64) -> bool {
        w.abs() <= self.half_width() && y >= self.y1 && y <= self.y2
    }
}

/// Coefficient functions of the state-driven market.
///
/// Market coefficients depend on `y` only; the drift/diffusions of the extra
/// state 𝒲 may depend on `(w, y)`.
pub trait CoefficientSet: Sync {
    fn r(&self, y: f64) -> f64;
    /// Excess drift of the risky asset.
    fn lambda(&self, y: f64) -> f64;
    fn sigma(&self, y: f64) -> f64;
    fn rho(&self, y: f64) -> f64;
    fn rhohat(&self, y: f64) -> f64;
    /// Drift of the state Y.
    fn a(&self, y: f64) -> f64;
    /// Diffusion of the state Y.
    fn b(&self, y: f64) -> f64;
    fn alpha_w(&self, w: f64, y: f64) -> f64;
    fn beta_w(&self, w: f64, y: f64) -> f64;
    fn gamma_w(&self, w: f64, y: f64) -> f64;

    /// `Some` when the set is the Heston instance, enabling closed forms.
    fn heston(&self) -> Option<&HestonParams> {
        None
    }
}

/// The ε-modified Heston coefficients with ρ = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonCoefficients {
    params: HestonParams,
}

pub fn heston_coefficients(params: &HestonParams) -> Result<HestonCoefficients, ModelError> {
    params.validate()?;
    Ok(HestonCoefficients { params: *params })
}

impl HestonCoefficients {
    pub fn params(&self) -> &HestonParams {
        &self.params
    }
}

impl CoefficientSet for HestonCoefficients {
    fn r(&self, _y: f64) -> f64 {
        self.params.r
    }

    fn lambda(&self, y: f64) -> f64 {
        self.params.lambda * (y + self.params.eps)
    }

    fn sigma(&self, y: f64) -> f64 {
        (y + self.params.eps).max(0.0).sqrt()
    }

    fn rho(&self, _y: f64) -> f64 {
        0.0
    }

    fn rhohat(&self, _y: f64) -> f64 {
        1.0
    }

    fn a(&self, y: f64) -> f64 {
        -self.params.alpha * (y - self.params.m2)
    }

    fn b(&self, y: f64) -> f64 {
        self.params.k * y.max(0.0).sqrt()
    }

    fn alpha_w(&self, _w: f64, _y: f64) -> f64 {
        0.0
    }

    fn beta_w(&self, _w: f64, _y: f64) -> f64 {
        0.0
    }

    fn gamma_w(&self, _w: f64, y: f64) -> f64 {
        (y + self.params.eps).max(0.0).sqrt()
    }

    fn heston(&self) -> Option<&HestonParams> {
        Some(&self.params)
    }
}

/// Suprema/infima of market quantities over the domain closure and the
/// constant C₁ of the dominating generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketConstants {
    /// sup (λ/σ)².
    pub c_lam_sig: f64,
    pub r_bar: f64,
    pub r_under: f64,
    pub c1: f64,
}

/// Resolution of the fallback scan for generic coefficient sets.
pub const SCAN_POINTS: usize = 1024;

pub fn market_constants(
    coeffs: &dyn CoefficientSet,
    domain: &RectDomain,
    prefs: &Preferences,
) -> Result<MarketConstants, ModelError> {
    let (c_lam_sig, r_bar, r_under) = match coeffs.heston() {
        // λ²(y+ε) is increasing in y and r is constant.
        Some(p) => (p.lambda * p.lambda * (domain.y2 + p.eps), p.r, p.r),
        None => {
            let mut sup_ls = f64::NEG_INFINITY;
            let mut sup_r = f64::NEG_INFINITY;
            let mut inf_r = f64::INFINITY;
            for i in 0..SCAN_POINTS {
                let y = domain.y1 + (domain.y2 - domain.y1) * i as f64 / (SCAN_POINTS - 1) as f64;
                let ratio = coeffs.lambda(y) / coeffs.sigma(y);
                let r = coeffs.r(y);
                if !ratio.is_finite() || !r.is_finite() {
                    return Err(ModelError::NonFinite { y });
                }
                sup_ls = sup_ls.max(ratio * ratio);
                sup_r = sup_r.max(r);
                inf_r = inf_r.min(r);
            }
            (sup_ls, sup_r, inf_r)
        }
    };
    if !c_lam_sig.is_finite() || !r_bar.is_finite() || !r_under.is_finite() {
        return Err(ModelError::NonFinite { y: domain.y2 });
    }
    let gamma = prefs.gamma();
    let base = (1.0 - gamma) * (r_under - prefs.delta() / (1.0 - 1.0 / prefs.psi()));
    let c1 = if gamma <= 2.0 {
        base
    } else {
        base + (1.0 - gamma) * (2.0 - gamma) / (2.0 * gamma * gamma) * c_lam_sig
    };
    Ok(MarketConstants {
        c_lam_sig,
        r_bar,
        r_under,
        c1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_prefs() -> Preferences {
        Preferences::new(2.0, 1.5, 0.08).unwrap()
    }

    #[test]
    fn derived_exponents() {
        let p = reference_prefs();
        assert_relative_eq!(p.theta(), -3.0, epsilon = 1e-14);
        assert_relative_eq!(p.p_plus(), 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(p.p_minus(), -14.0 / 3.0, epsilon = 1e-13);
        let q = Preferences::new(3.0, 2.0, 0.05).unwrap();
        assert_relative_eq!(q.theta(), -4.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_out_of_range_preferences() {
        let err = Preferences::new(1.0, 1.5, 0.08).unwrap_err();
        assert!(err.to_string().contains("gamma"));
        assert!(Preferences::new(2.0, 1.0, 0.08).is_err());
        assert!(Preferences::new(2.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn heston_coefficient_values() {
        let c = heston_coefficients(&HestonParams::reference()).unwrap();
        assert_eq!(c.a(0.0225), 0.0);
        let y = 0.0225;
        assert_relative_eq!(c.lambda(y) / c.sigma(y), 0.0705, epsilon = 1e-12);
        let shifted = heston_coefficients(&HestonParams::reference().with_eps(0.05)).unwrap();
        assert_relative_eq!(shifted.sigma(0.001), 0.051f64.sqrt(), epsilon = 1e-15);
        for i in 0..100 {
            let y = 0.001 + i as f64 * 0.01;
            let s = c.rho(y).powi(2) + c.rhohat(y).powi(2);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_for_reference_market() {
        let prefs = reference_prefs();
        let c = heston_coefficients(&HestonParams::reference()).unwrap();
        let d = RectDomain::new(0.02, 0.001, 1.0).unwrap();
        let mc = market_constants(&c, &d, &prefs).unwrap();
        assert_relative_eq!(mc.c_lam_sig, 0.2209, epsilon = 1e-14);
        assert_eq!(mc.r_bar, 0.05);
        assert_eq!(mc.r_under, 0.05);
        assert_relative_eq!(mc.c1, 0.19, epsilon = 1e-14);
    }

    /// Heston behind a wrapper that hides the closed form, forcing the scan.
    struct Opaque(HestonCoefficients);

    impl CoefficientSet for Opaque {
        fn r(&self, y: f64) -> f64 {
            self.0.r(y)
        }
        fn lambda(&self, y: f64) -> f64 {
            self.0.lambda(y)
        }
        fn sigma(&self, y: f64) -> f64 {
            self.0.sigma(y)
        }
        fn rho(&self, y: f64) -> f64 {
            self.0.rho(y)
        }
        fn rhohat(&self, y: f64) -> f64 {
            self.0.rhohat(y)
        }
        fn a(&self, y: f64) -> f64 {
            self.0.a(y)
        }
        fn b(&self, y: f64) -> f64 {
            self.0.b(y)
        }
        fn alpha_w(&self, w: f64, y: f64) -> f64 {
            self.0.alpha_w(w, y)
        }
        fn beta_w(&self, w: f64, y: f64) -> f64 {
            self.0.beta_w(w, y)
        }
        fn gamma_w(&self, w: f64, y: f64) -> f64 {
            self.0.gamma_w(w, y)
        }
    }

    #[test]
    fn scan_agrees_with_closed_form() {
        let prefs = Preferences::new(3.0, 1.5, 0.08).unwrap();
        let c = heston_coefficients(&HestonParams::reference().with_eps(0.05)).unwrap();
        let d = RectDomain::new(0.08, 0.001, 1.0).unwrap();
        let exact = market_constants(&c, &d, &prefs).unwrap();
        let scanned = market_constants(&Opaque(c), &d, &prefs).unwrap();
        assert_relative_eq!(exact.c_lam_sig, scanned.c_lam_sig, epsilon = 1e-12);
        assert_relative_eq!(exact.c1, scanned.c1, epsilon = 1e-12);
        // γ > 2 branch picks up the C_{λ/σ} term
        assert!(exact.c1 != (1.0 - 3.0) * (0.05 - 0.08 / (1.0 - 1.0 / 1.5)));
    }

    #[test]
    fn constants_monotone_under_nested_domains() {
        let prefs = reference_prefs();
        let c = Opaque(heston_coefficients(&HestonParams::reference()).unwrap());
        let mut prev: Option<MarketConstants> = None;
        for (y1, y2) in [(0.2, 0.3), (0.1, 0.5), (0.01, 0.8), (0.001, 1.0)] {
            let mc = market_constants(&c, &RectDomain::new(0.02, y1, y2).unwrap(), &prefs).unwrap();
            if let Some(p) = prev {
                assert!(mc.c_lam_sig >= p.c_lam_sig);
                assert!(mc.r_bar >= p.r_bar);
                assert!(mc.r_under <= p.r_under);
            }
            prev = Some(mc);
        }
    }

    #[test]
    fn feller_flags() {
        assert!(!validate_feller(&HestonParams::reference()).unwrap());
        let mut p = HestonParams::reference();
        p.m2 = 0.03;
        assert!(validate_feller(&p).unwrap());
        p.alpha = 0.0;
        assert!(validate_feller(&p).is_err());
    }

    #[test]
    fn domain_validation() {
        assert!(RectDomain::new(0.02, 0.5, 0.5).is_err());
        let err = RectDomain::new(0.02, 1.0, 0.5).unwrap_err();
        assert!(err.to_string().contains("y1"));
        assert!(RectDomain::new(0.0, 0.001, 1.0).is_err());
    }
}
