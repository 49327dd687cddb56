//! Graded-mesh integration toward listed singular points, with divergence
//! detection.
//!
//! Each approach to a singular point is covered by geometrically shrinking
//! shells. On shell `j` of width proportional to `ratio^j` the integrand is
//! smooth and is handled by the adaptive panel integrator. For an integrand
//! behaving like `|x - s|^{-g}` the shell increments form a geometric
//! sequence with quotient `ratio^{1-g}`, which makes the three regimes
//! directly observable:
//!
//! * quotient bounded below 1: the partial sums converge and the remaining
//!   mass is estimated by geometric extrapolation;
//! * quotient stable above 1: the partials grow like a power of the distance
//!   to the singularity and the integral is declared divergent;
//! * quotient pinned at 1: the partials grow logarithmically, which is also
//!   divergence, reported with growth exponent zero.
//!
//! Shell placement depends only on the interval and the grading ratio, never
//! on the integrand, so verdicts are stable under tolerance changes.

use super::adaptive::{integrate_smooth, SmoothIssue, DEFAULT_PANEL_BUDGET};
use super::{QuadratureConfig, QuadratureOutcome, Verdict};

const RATIO_WINDOW: usize = 6;
/// Relative half-width of the band around 1 that separates a logarithmic
/// divergence from a slow power law.
const LOG_BAND: f64 = 1e-4;
/// Maximum relative scatter of the shell quotients before they are trusted.
const STABLE_SPREAD: f64 = 0.02;

enum SegmentOutcome {
    Converged { value: f64, error: f64 },
    Divergent { growth_exponent: f64 },
    Inconclusive,
}

struct SegmentResult {
    outcome: SegmentOutcome,
    evaluations: u64,
}

/// Integrates over `[lo, hi]` where `f` may blow up at the listed points
/// (and nowhere else). Points outside the interval are ignored; points at
/// the interval ends are honored. `breakpoints` marks finite kinks of the
/// integrand, which become panel edges so the error estimates stay honest.
pub fn integrate_singular(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    singular_points: &[f64],
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> QuadratureOutcome {
    assert!(lo.is_finite() && hi.is_finite() && lo < hi, "invalid interval");
    cfg.validate();

    let span = hi - lo;
    // Points within rounding distance of an interval end are treated as
    // endpoint singularities. The graded mesh then approaches them from the
    // resolvable side and the extrapolation recovers the mass that floating
    // point cannot separate from the endpoint.
    let snap = span * 1e-12;
    let mut sings: Vec<f64> = singular_points
        .iter()
        .copied()
        .filter(|&s| s >= lo - snap && s <= hi + snap)
        .map(|s| {
            if (s - lo).abs() <= snap {
                lo
            } else if (s - hi).abs() <= snap {
                hi
            } else {
                s
            }
        })
        .collect();
    sings.sort_by(|a, b| a.total_cmp(b));
    sings.dedup_by(|a, b| (*a - *b).abs() <= span * 1e-15);

    let mut edges = Vec::with_capacity(sings.len() + 2);
    edges.push(lo);
    edges.extend(sings.iter().copied().filter(|&s| s > lo && s < hi));
    edges.push(hi);

    let is_sing = |x: f64| sings.iter().any(|&s| s == x || (s - x).abs() <= span * 1e-15);

    let n_seg = edges.len() - 1;
    let seg_abs = cfg.abs_tol / (2.0 * n_seg as f64);

    let mut value = 0.0;
    let mut l1 = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0u64;
    let mut worst_growth: Option<f64> = None;
    let mut inconclusive = false;

    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let results: Vec<SegmentResult> = match (is_sing(a), is_sing(b)) {
            (false, false) => {
                let r = match integrate_smooth(
                    f,
                    a,
                    b,
                    breakpoints,
                    cfg.rel_tol * 0.5,
                    seg_abs,
                    DEFAULT_PANEL_BUDGET,
                ) {
                    Ok(r) => r,
                    Err(SmoothIssue::NonFinite { .. }) => {
                        inconclusive = true;
                        continue;
                    }
                };
                vec![SegmentResult {
                    outcome: SegmentOutcome::Converged { value: r.value, error: r.error },
                    evaluations: r.evaluations,
                }]
            }
            (true, false) => vec![graded(f, a, b, breakpoints, seg_abs, cfg)],
            (false, true) => vec![graded(f, b, a, breakpoints, seg_abs, cfg)],
            (true, true) => {
                let mid = 0.5 * (a + b);
                vec![
                    graded(f, a, mid, breakpoints, 0.5 * seg_abs, cfg),
                    graded(f, b, mid, breakpoints, 0.5 * seg_abs, cfg),
                ]
            }
        };
        for r in results {
            evaluations += r.evaluations;
            match r.outcome {
                SegmentOutcome::Converged { value: v, error: e } => {
                    value += v;
                    l1 += v.abs();
                    error += e;
                }
                SegmentOutcome::Divergent { growth_exponent } => {
                    let g = worst_growth.get_or_insert(growth_exponent);
                    *g = g.max(growth_exponent);
                }
                SegmentOutcome::Inconclusive => inconclusive = true,
            }
        }
    }

    let verdict = if let Some(growth_exponent) = worst_growth {
        Verdict::Divergent { growth_exponent }
    // Acceptance is measured against the L1 mass of the segments, so a total
    // that nearly cancels (an odd moment of a symmetric density, say) still
    // converges; the reported error stays absolute.
    } else if inconclusive || error > cfg.abs_tol.max(cfg.rel_tol * l1) {
        Verdict::Inconclusive
    } else {
        Verdict::Converged { value, error }
    };
    QuadratureOutcome { verdict, evaluations }
}

/// Integrates from `other` toward the singular endpoint `sing` over
/// geometrically graded shells.
fn graded(
    f: &dyn Fn(f64) -> f64,
    sing: f64,
    other: f64,
    breakpoints: &[f64],
    abs_share: f64,
    cfg: &QuadratureConfig,
) -> SegmentResult {
    let w = other - sing;
    let ratio = cfg.grading_ratio;
    let mut partial = 0.0;
    let mut err_shells = 0.0;
    let mut evaluations = 0u64;
    let mut increments: Vec<f64> = Vec::new();
    let mut quotients: Vec<f64> = Vec::new();

    let mut scale = 1.0;
    for j in 0..cfg.max_refinements as usize {
        let outer = sing + w * scale;
        let inner = sing + w * scale * ratio;
        scale *= ratio;
        if outer == inner || inner == sing {
            // Shell width fell below rounding resolution.
            break;
        }
        let (s_lo, s_hi) = if inner < outer { (inner, outer) } else { (outer, inner) };
        let shell_abs = 0.5 * abs_share / ((j + 1) as f64 * (j + 2) as f64);
        let shell = match integrate_smooth(
            f,
            s_lo,
            s_hi,
            breakpoints,
            cfg.rel_tol * 0.25,
            shell_abs,
            DEFAULT_PANEL_BUDGET,
        ) {
            Ok(r) => r,
            Err(SmoothIssue::NonFinite { .. }) => {
                return SegmentResult { outcome: SegmentOutcome::Inconclusive, evaluations }
            }
        };
        evaluations += shell.evaluations;
        partial += shell.value;
        err_shells += shell.error;

        if let Some(&prev) = increments.last() {
            if prev.abs() > 0.0 {
                quotients.push(shell.value.abs() / prev.abs());
            } else {
                quotients.push(0.0);
            }
        }
        increments.push(shell.value);

        if partial.abs() > cfg.divergence_cap {
            let growth = quotients
                .last()
                .map(|&q| (q.ln() / (1.0 / ratio).ln()).max(0.0))
                .unwrap_or(0.0);
            return SegmentResult {
                outcome: SegmentOutcome::Divergent { growth_exponent: growth },
                evaluations,
            };
        }

        // Divergence test: a full window of stable quotients at or above 1.
        if quotients.len() >= RATIO_WINDOW {
            let window = &quotients[quotients.len() - RATIO_WINDOW..];
            if window.iter().all(|&q| q > 0.0) {
                let ln_mean = window.iter().map(|&q| q.ln()).sum::<f64>() / RATIO_WINDOW as f64;
                let rho = ln_mean.exp();
                let spread = window.iter().map(|&q| (q - rho).abs()).fold(0.0, f64::max);
                if spread <= STABLE_SPREAD * rho {
                    if rho >= 1.0 + LOG_BAND {
                        return SegmentResult {
                            outcome: SegmentOutcome::Divergent {
                                growth_exponent: rho.ln() / (1.0 / ratio).ln(),
                            },
                            evaluations,
                        };
                    }
                    if (rho - 1.0).abs() < LOG_BAND {
                        return SegmentResult {
                            outcome: SegmentOutcome::Divergent { growth_exponent: 0.0 },
                            evaluations,
                        };
                    }
                }
            }
        }

        // Convergence test: stable quotients below 1 allow geometric
        // extrapolation of the remaining mass.
        let gate = abs_share.max(cfg.rel_tol * 0.5 * partial.abs());
        if quotients.len() >= 4 {
            if let Some(outcome) =
                try_extrapolate(&increments, &quotients, partial, err_shells, gate)
            {
                return SegmentResult { outcome, evaluations };
            }
            // Integrand vanishes toward the singular point.
            let n = increments.len();
            if increments[n - 1] == 0.0 && increments[n - 2] == 0.0 {
                return SegmentResult {
                    outcome: SegmentOutcome::Converged { value: partial, error: err_shells },
                    evaluations,
                };
            }
        }
    }

    // Budget exhausted: accept only if the last quotients still justify an
    // extrapolated remainder within tolerance.
    if quotients.len() >= 4 {
        let gate = abs_share.max(cfg.rel_tol * 0.5 * partial.abs());
        if let Some(outcome) = try_extrapolate(&increments, &quotients, partial, err_shells, gate)
        {
            return SegmentResult { outcome, evaluations };
        }
    }
    SegmentResult { outcome: SegmentOutcome::Inconclusive, evaluations }
}

/// Geometric extrapolation of the remaining shell mass from the last four
/// quotients. Returns `None` when the quotients are unstable, too close to
/// 1 to separate from a logarithmic divergence, or when the bracketed
/// remainder misses the tolerance gate.
fn try_extrapolate(
    increments: &[f64],
    quotients: &[f64],
    partial: f64,
    err_shells: f64,
    gate: f64,
) -> Option<SegmentOutcome> {
    let window = &quotients[quotients.len() - 4..];
    let rho = *window.last().unwrap();
    if rho >= 1.0 - 10.0 * LOG_BAND {
        return None;
    }
    let spread = window
        .iter()
        .map(|&q| (q - rho).abs())
        .fold(0.0, f64::max)
        .max(32.0 * f64::EPSILON * rho);
    if spread > 0.05 * rho + 1e-12 {
        return None;
    }
    let incs = &increments[increments.len() - 4..];
    let last = incs[3];
    let hi_q = (rho + spread).min(0.9995);
    let lo_q = (rho - spread).max(0.0);
    let rem_hi = last.abs() * hi_q / (1.0 - hi_q);
    let rem_lo = last.abs() * lo_q / (1.0 - lo_q);
    // The midpoint extrapolation assumes a single-signed geometric tail;
    // with mixed signs only the magnitude bound survives.
    let same_sign = incs.iter().all(|&v| v.signum() == last.signum() || v == 0.0);
    let (remainder, bracket) = if same_sign {
        (last.signum() * 0.5 * (rem_hi + rem_lo), 0.5 * (rem_hi - rem_lo))
    } else {
        (0.0, rem_hi)
    };
    let rem_err = bracket + f64::EPSILON * partial.abs();
    if err_shells + rem_err <= gate {
        Some(SegmentOutcome::Converged {
            value: partial + remainder,
            error: err_shells + rem_err,
        })
    } else {
        None
    }
}
