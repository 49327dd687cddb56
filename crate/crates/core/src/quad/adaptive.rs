//! Adaptive integration of smooth (or piecewise-smooth) integrands.
//!
//! Worst-panel-first bisection with a Gauss 7/15 error estimate. Callers
//! supply interior breakpoints where the integrand loses smoothness; the
//! integrand must be finite everywhere it is evaluated.

use super::gauss;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SmoothResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: u64,
    /// False when the panel budget ran out before the tolerance was met.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum SmoothIssue {
    /// The integrand returned a non-finite value at `x`.
    NonFinite { x: f64 },
}

struct HeapPanel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for HeapPanel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for HeapPanel {}
impl PartialOrd for HeapPanel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapPanel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

pub(crate) const DEFAULT_PANEL_BUDGET: usize = 6000;

/// Integrates `f` over `[lo, hi]`, splitting first at `breakpoints` and then
/// adaptively until `sum(err) <= max(abs_tol, rel_tol * |sum(value)|)`.
pub(crate) fn integrate_smooth(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<SmoothResult, SmoothIssue> {
    if lo == hi {
        return Ok(SmoothResult { value: 0.0, error: 0.0, evaluations: 0, converged: true });
    }
    debug_assert!(lo < hi, "integrate_smooth expects an ordered interval");

    let mut edges: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(lo);
    for &b in breakpoints {
        if b > lo && b < hi {
            edges.push(b);
        }
    }
    edges.push(hi);
    edges.sort_by(|a, b| a.total_cmp(b));
    edges.dedup();

    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evals = 0u64;
    let push = |heap: &mut BinaryHeap<HeapPanel>,
                value: &mut f64,
                error: &mut f64,
                evals: &mut u64,
                a: f64,
                b: f64|
     -> Result<(), SmoothIssue> {
        let (v, e, n) = gauss::panel(f, a, b);
        *evals += n;
        if !v.is_finite() {
            // Find a node that produced the non-finite value for reporting.
            return Err(SmoothIssue::NonFinite { x: 0.5 * (a + b) });
        }
        *value += v;
        *error += e;
        heap.push(HeapPanel { lo: a, hi: b, value: v, error: e });
        Ok(())
    };

    for pair in edges.windows(2) {
        push(&mut heap, &mut value, &mut error, &mut evals, pair[0], pair[1])?;
    }

    let mut panels = edges.len() - 1;
    loop {
        let tol = abs_tol.max(rel_tol * value.abs());
        if error <= tol {
            return Ok(SmoothResult { value, error, evaluations: evals, converged: true });
        }
        if panels >= max_panels {
            return Ok(SmoothResult { value, error, evaluations: evals, converged: false });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => return Ok(SmoothResult { value, error, evaluations: evals, converged: true }),
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Panel width is at rounding resolution; its error estimate is
            // as good as it gets. Accept it and move on.
            let tol = abs_tol.max(rel_tol * value.abs());
            if error - worst.error <= tol {
                return Ok(SmoothResult { value, error, evaluations: evals, converged: true });
            }
            return Ok(SmoothResult { value, error, evaluations: evals, converged: false });
        }
        value -= worst.value;
        error -= worst.error;
        push(&mut heap, &mut value, &mut error, &mut evals, worst.lo, mid)?;
        push(&mut heap, &mut value, &mut error, &mut evals, mid, worst.hi)?;
        panels += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn resolves_oscillatory_integrand() {
        let f = |x: f64| (40.0 * x).cos();
        let r = integrate_smooth(&f, 0.0, 3.0, &[], 1e-12, 1e-14, DEFAULT_PANEL_BUDGET).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, (120.0_f64).sin() / 40.0, epsilon = 1e-12);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let f = |x: f64| (x - 0.3).abs();
        let r = integrate_smooth(&f, 0.0, 1.0, &[0.3], 1e-13, 1e-15, DEFAULT_PANEL_BUDGET).unwrap();
        let exact = 0.5 * (0.3_f64.powi(2) + 0.7_f64.powi(2));
        assert_abs_diff_eq!(r.value, exact, epsilon = 1e-13);
    }

    #[test]
    fn reports_non_finite_values() {
        let f = |x: f64| if x < 0.5 { f64::NAN } else { 1.0 };
        assert!(matches!(
            integrate_smooth(&f, 0.0, 1.0, &[], 1e-8, 1e-12, 64),
            Err(SmoothIssue::NonFinite { .. })
        ));
    }
}
