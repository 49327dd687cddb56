//! Frequency-independent quadrature of oscillatory integrals
//! `int g(h) e^{i omega h} dh`.
//!
//! Resolving each oscillation with panels costs `O(omega)` evaluations and
//! dies on a panel budget once the frequency is large. Here the panel size
//! is set by the smooth factor alone: `g` is interpolated by a degree-12
//! Chebyshev polynomial per panel and the oscillatory monomial moments
//! `int s^n e^{iws} ds` are evaluated in closed form, so the error is the
//! measured interpolation residual and the cost does not grow with the
//! frequency. Integrable singularities of `g` are crossed by a geometric
//! ladder of such panels; the final tip is narrower than a thousandth of a
//! period, where the phase is frozen and the existing graded integrator
//! finishes the job.

use num_complex::Complex64;

use super::singular::integrate_singular;
use super::{QuadratureConfig, Verdict};

/// Interpolation degree of an oscillatory panel. Panels are sized so the
/// smooth factor is analytic on them; coefficients past this order sit at
/// rounding level there, and the residual is measured, never assumed.
pub(crate) const FILON_DEG: usize = 12;

/// Chebyshev coefficients on the degree-12 Lobatto grid; the interpolant is
/// `sum_j out[j] T_j(x)` with no separate halving of the end terms.
pub(crate) fn cheb_coefficients(vals: &[f64; FILON_DEG + 1]) -> [f64; FILON_DEG + 1] {
    let n = FILON_DEG;
    let mut out = [0.0; FILON_DEG + 1];
    for (j, o) in out.iter_mut().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let mut s = 0.5 * (vals[0] + sign * vals[n]);
        for (k, v) in vals.iter().enumerate().take(n).skip(1) {
            s += v * (std::f64::consts::PI * ((j * k) % (2 * n)) as f64 / n as f64).cos();
        }
        *o = s * 2.0 / n as f64;
    }
    out[0] *= 0.5;
    out[FILON_DEG] *= 0.5;
    out
}

/// Monomial coefficients of `sum_j c[j] T_j`.
pub(crate) fn cheb_to_monomial(c: &[f64; FILON_DEG + 1]) -> [f64; FILON_DEG + 1] {
    let mut t = [[0.0f64; FILON_DEG + 1]; FILON_DEG + 1];
    t[0][0] = 1.0;
    t[1][1] = 1.0;
    for j in 2..=FILON_DEG {
        for n in 0..FILON_DEG {
            t[j][n + 1] = 2.0 * t[j - 1][n];
        }
        for n in 0..=FILON_DEG {
            t[j][n] -= t[j - 2][n];
        }
    }
    let mut out = [0.0; FILON_DEG + 1];
    for (j, cj) in c.iter().enumerate() {
        for (n, o) in out.iter_mut().enumerate() {
            *o += cj * t[j][n];
        }
    }
    out
}

/// The oscillatory monomial integrals `X_n(w) = int_{-1}^{1} s^n e^{iws}
/// ds`: a parity series inside `|w| <= 10`, the integration-by-parts
/// recurrence outside, where the `n / w` amplification stays harmless.
pub(crate) fn osc_monomials(w: f64) -> [Complex64; FILON_DEG + 1] {
    let mut out = [Complex64::new(0.0, 0.0); FILON_DEG + 1];
    if w.abs() <= 10.0 {
        let iw = Complex64::new(0.0, w);
        for (n, o) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = Complex64::new(0.0, 0.0);
            for k in 0..=56usize {
                if (n + k) % 2 == 0 {
                    sum += term * (2.0 / (n + k + 1) as f64);
                }
                term *= iw / (k + 1) as f64;
            }
            *o = sum;
        }
    } else {
        let iw = Complex64::new(0.0, w);
        let eiw = Complex64::from_polar(1.0, w);
        out[0] = (eiw - eiw.conj()) / iw;
        for n in 1..=FILON_DEG {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            out[n] = (eiw - sign * eiw.conj()) / iw
                - Complex64::new(n as f64, 0.0) / iw * out[n - 1];
        }
    }
    out
}

/// `int_lo^hi g(h) e^{i omega h} dh` for `g` smooth on the interval, with
/// panels split where the measured Chebyshev residual says `g` still has
/// structure; whatever residual survives the depth cap is charged to the
/// error bound.
pub(crate) fn filon_osc(
    g: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    omega: f64,
) -> (Complex64, f64) {
    let mut stack: Vec<(f64, f64, u8)> = vec![(lo, hi, 0)];
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    while let Some((a, b, depth)) = stack.pop() {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut vals = [0.0; FILON_DEG + 1];
        for (k, v) in vals.iter_mut().enumerate() {
            let node = (std::f64::consts::PI * k as f64 / FILON_DEG as f64).cos();
            *v = g(c + h * node);
        }
        let coef = cheb_coefficients(&vals);
        let mass: f64 = coef.iter().map(|c| c.abs()).sum();
        let resid = 3.0 * (coef[FILON_DEG - 1].abs() + coef[FILON_DEG].abs())
            + 8.0 * f64::EPSILON * mass;
        if resid > 1e-11 * mass && depth < 9 {
            stack.push((c, b, depth + 1));
            stack.push((a, c, depth + 1));
            continue;
        }
        let mono = cheb_to_monomial(&coef);
        let xn = osc_monomials(omega * h);
        let mut s = Complex64::new(0.0, 0.0);
        for (p, x) in mono.iter().zip(&xn) {
            s += x * *p;
        }
        value += Complex64::from_polar(h, omega * c) * s;
        error += resid * (b - a);
    }
    (value, error)
}

/// `int_lo^hi g(h) e^{i omega h} dh` for a weight with integrable
/// singularities at `sings` and kinks at `breaks`, or `None` when the
/// singular tips refuse to converge.
///
/// Smooth stretches go to [`filon_osc`] directly. Each singular point is
/// approached by a geometric ladder of oscillatory panels; the leftover tip
/// is narrower than `1e-6` periods, so the phase is frozen at its midpoint
/// and the graded adaptive integrator supplies the tip mass, with the
/// freezing slack `|mass| omega width` charged to the error.
pub(crate) fn osc_weighted(
    g: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    sings: &[f64],
    breaks: &[f64],
    omega: f64,
    cfg: &QuadratureConfig,
) -> Option<(Complex64, f64)> {
    assert!(omega > 0.0 && omega.is_finite(), "frequency must be positive");
    if !(hi > lo) {
        return Some((Complex64::new(0.0, 0.0), 0.0));
    }
    let scale = hi.abs().max(lo.abs()).max(1.0);
    let near = |x: f64, y: f64| (x - y).abs() <= 1e-12 * scale;

    let mut edges: Vec<f64> = vec![lo, hi];
    edges.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    edges.extend(sings.iter().copied().filter(|&q| q > lo && q < hi));
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| near(*a, *b));

    let is_sing = |x: f64| sings.iter().any(|&q| near(q, x));
    let tip_width = 1e-6 * std::f64::consts::TAU / omega;

    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pieces: Vec<(f64, f64)> = if is_sing(a) && is_sing(b) {
            let mid = 0.5 * (a + b);
            vec![(a, mid), (mid, b)]
        } else {
            vec![(a, b)]
        };
        for (pa, pb) in pieces {
            let sing_lo = is_sing(pa);
            let sing_hi = is_sing(pb);
            if !sing_lo && !sing_hi {
                let (v, e) = filon_osc(g, pa, pb, omega);
                value += v;
                error += e;
                continue;
            }
            // Geometric ladder toward the singular end.
            let q = if sing_lo { pa } else { pb };
            let full = pb - pa;
            let mut dist = full;
            while dist > tip_width.min(full * 0.5) {
                let next = (dist * cfg.grading_ratio).max(tip_width.min(full * 0.5));
                let (panel_lo, panel_hi) = if sing_lo {
                    (pa + next, pa + dist)
                } else {
                    (pb - dist, pb - next)
                };
                let (v, e) = filon_osc(g, panel_lo, panel_hi, omega);
                value += v;
                error += e;
                dist = next;
                if next <= tip_width {
                    break;
                }
            }
            let (tip_lo, tip_hi) = if sing_lo { (pa, pa + dist) } else { (pb - dist, pb) };
            match integrate_singular(g, tip_lo, tip_hi, &[q], &[], cfg).verdict {
                Verdict::Converged { value: tv, error: te } => {
                    let mid = 0.5 * (tip_lo + tip_hi);
                    value += Complex64::from_polar(tv, omega * mid);
                    error += te + tv.abs() * omega * (tip_hi - tip_lo) * 0.5;
                }
                _ => return None,
            }
        }
    }
    Some((value, error))
}
