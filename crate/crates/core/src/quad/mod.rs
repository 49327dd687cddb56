//! Adaptive quadrature with graded meshes and divergence detection.

mod adaptive;
mod filon;
mod gauss;
mod series;
mod singular;

pub(crate) use adaptive::{integrate_smooth, SmoothIssue, DEFAULT_PANEL_BUDGET};
pub(crate) use filon::{
    cheb_coefficients, cheb_to_monomial, osc_monomials, osc_weighted, FILON_DEG,
};
pub(crate) use gauss::panel as gauss_panel;
pub(crate) use series::{cell_tail_from_moments, osc_lattice_sum};
pub use series::{hurwitz_zeta, periodic_tail_sum};
pub use singular::integrate_singular;

use crate::error::{Error, Result};

/// Merges two sorted-or-unsorted point lists into one sorted list without
/// near-duplicates, for assembling quadrature singularity and panel lists.
pub(crate) fn merge_points(mut xs: Vec<f64>, ys: Vec<f64>) -> Vec<f64> {
    xs.extend(ys);
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    xs
}

/// Tolerances and budgets shared by every integration routine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Relative tolerance on returned values.
    pub rel_tol: f64,
    /// Absolute tolerance floor.
    pub abs_tol: f64,
    /// Maximum number of graded shells per singular endpoint.
    pub max_refinements: u32,
    /// Partial values beyond this magnitude are declared divergent outright.
    pub divergence_cap: f64,
    /// Geometric shrink factor of successive shells approaching a singular
    /// point.
    pub grading_ratio: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_refinements: 30,
            divergence_cap: 1e12,
            grading_ratio: 0.25,
        }
    }
}

impl QuadratureConfig {
    pub(crate) fn validate(&self) {
        assert!(self.rel_tol > 0.0 && self.abs_tol > 0.0, "tolerances must be positive");
        assert!(
            self.grading_ratio > 0.0 && self.grading_ratio < 1.0,
            "grading ratio must lie in (0, 1)"
        );
        assert!(self.max_refinements >= 10, "at least 10 refinement shells are required");
        assert!(self.divergence_cap > 1.0, "divergence cap must exceed 1");
    }

    /// A copy with tolerances loosened by `factor` (> 1 loosens).
    pub fn loosened(&self, factor: f64) -> Self {
        QuadratureConfig {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// Classification of an integral attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    /// Finite value with an error estimate no larger than the requested
    /// tolerance.
    Converged { value: f64, error: f64 },
    /// Partial values grow without bound; the exponent describes how the
    /// partials scale with the distance to the singularity (zero means
    /// logarithmic growth).
    Divergent { growth_exponent: f64 },
    /// The budget was exhausted before either convergence or divergence
    /// could be established.
    Inconclusive,
}

/// Result of an integration attempt together with its cost.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOutcome {
    pub verdict: Verdict,
    pub evaluations: u64,
}

impl QuadratureOutcome {
    pub fn converged(&self) -> Option<(f64, f64)> {
        match self.verdict {
            Verdict::Converged { value, error } => Some((value, error)),
            _ => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self.verdict, Verdict::Divergent { .. })
    }

    /// Unwraps the converged value or reports a failure naming `context`.
    pub fn expect_converged(&self, context: &str) -> Result<(f64, f64)> {
        match self.verdict {
            Verdict::Converged { value, error } => Ok((value, error)),
            Verdict::Divergent { growth_exponent } => Err(Error::QuadratureFailure(format!(
                "{context}: integral diverges (growth exponent {growth_exponent:.3})"
            ))),
            Verdict::Inconclusive => {
                Err(Error::QuadratureFailure(format!("{context}: inconclusive")))
            }
        }
    }
}

/// Integrates a bounded piecewise-smooth integrand, wrapping the result in
/// the same outcome type as the singular routine.
pub fn integrate_bounded(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> QuadratureOutcome {
    cfg.validate();
    match integrate_smooth(f, lo, hi, breakpoints, cfg.rel_tol, cfg.abs_tol, DEFAULT_PANEL_BUDGET)
    {
        Ok(r) => QuadratureOutcome {
            verdict: if r.converged {
                Verdict::Converged { value: r.value, error: r.error }
            } else {
                Verdict::Inconclusive
            },
            evaluations: r.evaluations,
        },
        Err(SmoothIssue::NonFinite { .. }) => {
            QuadratureOutcome { verdict: Verdict::Inconclusive, evaluations: 0 }
        }
    }
}

/// Iterated (tensor) quadrature over an axis-aligned box, dimensions 2 or 3.
///
/// Inner axes are integrated to a tighter tolerance than the requested one
/// so that the outer adaptive loop sees a consistent integrand.
pub fn tensor_integrate(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    cfg: &QuadratureConfig,
) -> Result<(f64, f64, u64)> {
    let dim = lo.len();
    if dim != hi.len() || !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension { op: "tensor_integrate", dim });
    }
    cfg.validate();
    let evals = std::cell::Cell::new(0u64);
    let inner_cfg = QuadratureConfig {
        rel_tol: cfg.rel_tol * 0.2,
        abs_tol: cfg.abs_tol * 0.2,
        ..*cfg
    };
    let value_err = tensor_rec(f, lo, hi, &vec![0.0; dim], 0, cfg, &inner_cfg, &evals)?;
    Ok((value_err.0, value_err.1, evals.get()))
}

fn tensor_rec(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    point: &[f64],
    axis: usize,
    outer_cfg: &QuadratureConfig,
    inner_cfg: &QuadratureConfig,
    evals: &std::cell::Cell<u64>,
) -> Result<(f64, f64)> {
    let dim = lo.len();
    let cfg = if axis == 0 { outer_cfg } else { inner_cfg };
    let err_cell = std::cell::Cell::new(0.0f64);
    let slice: Box<dyn Fn(f64) -> f64 + '_> = if axis + 1 == dim {
        let base = point.to_vec();
        Box::new(move |x| {
            let mut p = base.clone();
            p[axis] = x;
            evals.set(evals.get() + 1);
            f(&p)
        })
    } else {
        let base = point.to_vec();
        let inner_err = &err_cell;
        Box::new(move |x| {
            let mut p = base.clone();
            p[axis] = x;
            match tensor_rec(f, lo, hi, &p, axis + 1, outer_cfg, inner_cfg, evals) {
                Ok((v, e)) => {
                    inner_err.set(inner_err.get().max(e));
                    v
                }
                Err(_) => f64::NAN,
            }
        })
    };
    let r = integrate_smooth(
        &*slice,
        lo[axis],
        hi[axis],
        &[],
        cfg.rel_tol,
        cfg.abs_tol,
        DEFAULT_PANEL_BUDGET,
    )
    .map_err(|SmoothIssue::NonFinite { x }| {
        Error::QuadratureFailure(format!("tensor quadrature hit a non-finite value near {x}"))
    })?;
    let propagated = err_cell.get() * (hi[axis] - lo[axis]).abs();
    Ok((r.value, r.error + propagated))
}
