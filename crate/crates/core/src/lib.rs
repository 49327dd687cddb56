//! Numerical study of jump energies with periodically oscillating
//! coefficients.
//!
//! The library models symmetric pure-jump processes whose jump density is a
//! stable-like kernel modulated by a periodic coefficient evaluated at a
//! small scale, `a(x / delta) nu(x)`. It provides the integrability
//! classification of such measures, their characteristic exponents with
//! honest error bounds, the associated quadratic energy forms on two
//! independent routes, a reproducible compound-Poisson sampler with
//! characteristic-function checks, and a battery of small-scale averaging
//! checks that track how the oscillation homogenizes to its cell mean.

pub mod coeff;
pub mod error;
pub mod exponent;
pub mod form;
pub mod measure;
pub mod quad;
pub mod report;
pub mod simulate;

pub use coeff::{CoeffValue, PeriodicCoefficient};
pub use error::{Error, Result};
pub use exponent::{exponent_convergence_scan, psi_homogenized, ExponentSpec};
pub use form::{
    default_spectral_catalog, form_direct, form_direct_bilinear, form_spectral,
    lp_bound_check, m1_necessary_check, mosco_m2_check, off_diagonal_limit_check,
    spectral_normalization, vague_convergence_check, weak_lp_check, FormMethod, FormValue,
    LpBoundReport, LpBoundRow, M1Family, M1Report, OffDiagonalRegion, TestFunction,
};
pub use measure::{
    check_levy_integrability, profile_pair_constants, IntegrabilityReport, LevyClassification,
    LevyDensitySpec, MeasurePart, ModulatedMeasure,
};
pub use quad::{
    integrate_singular, periodic_tail_sum, QuadratureConfig, QuadratureOutcome, Verdict,
};
pub use report::{ConvergenceReport, ConvergenceRow};
pub use simulate::{
    empirical_cf, fdd_convergence_experiment, rescaling_identity_check, sample_increments,
    CfCheckResult, CfRow, FactorizationRow, FddReport, FddRow, IncrementSample, RescalingReport,
    RescalingRow, SimulationPlan, SmallJumpMode,
};
