//! Benchmark fixtures shared by the criterion targets.

use horizon_ez::{heston_coefficients, HestonCoefficients, HestonParams, Preferences, RectDomain};

pub fn reference() -> (Preferences, HestonCoefficients, RectDomain) {
    let prefs = Preferences::new(2.0, 1.5, 0.08).expect("reference preferences");
    let coeffs = heston_coefficients(&HestonParams::reference()).expect("reference market");
    let domain = RectDomain::new(0.02, 0.001, 1.0).expect("reference domain");
    (prefs, coeffs, domain)
}
