//! Numerical toolkit for optimal consumption and investment under
//! Epstein-Zin preferences on a random horizon given by the exit time of
//! market states from a rectangle.
//!
//! * [`model`]: preferences, Heston coefficients, market constants
//! * [`generators`]: aggregator and BSDE/PDE generators
//! * [`pde`]: finite-difference Dirichlet solver for the decomposition field
//! * [`passage`]: explicit exit-time law and exponential-moment checks
//! * [`strategy`]: optimal portfolio/consumption fields and wealth simulation
//! * [`mcverify`]: Monte Carlo oracles

pub mod error;
pub mod generators;
pub mod mcverify;
pub mod model;
pub mod passage;
pub mod pde;
pub mod strategy;

pub use error::{GeneratorError, McError, ModelError, PassageError, PdeError, StrategyError};
pub use mcverify::{
    feynman_kac_check, sample_exit_times, simulate_state, utility_ode_eval, ExitSide, Monitoring, SimOptions,
    StatePath, VerificationReport,
};
pub use model::{
    heston_coefficients, market_constants, validate_feller, CoefficientSet, HestonCoefficients, HestonParams,
    MarketConstants, Preferences, RectDomain,
};
pub use passage::{ExitLaw, MomentReport, TimeScale, Verdict};
pub use pde::{build_grid, solve_dirichlet, Grid, Scheme, Solution, SolverOptions, SupBounds};
pub use strategy::{strategy_field, StrategyField};
