//! Jump-energy forms evaluated on two independent routes, plus the
//! small-scale averaging checks built on top of them.
//!
//! The energy of a test function under a symmetric jump density `rho` is
//! `E(u, v) = iint (u(x) - u(y)) (v(x) - v(y)) rho(y - x) dy dx`. In the
//! difference variable `z = y - x` the inner integral is a correlation
//! `g(z) = int (u(x + z) - u(x)) (v(x + z) - v(x)) dx`, a piecewise
//! polynomial for kinked test functions that two-point Gauss cells integrate
//! exactly. Once `|z|` exceeds the joint support span, `g` is the constant
//! `2 int u v` and the remaining density mass is summed in closed form by
//! [`ModulatedMeasure::mass_above`], so the outer integral is never
//! truncated.
//!
//! The transform route evaluates `const * int |u_hat|^2 psi` with the
//! exponent `psi` supplied by [`crate::exponent`]. Transform conventions are
//! a classic source of silent constant mismatches, so the pairing constant
//! is not trusted blindly: a one-time calibration compares both routes on a
//! reference pair and must land on the closed form `2 (2 pi)^d` within
//! quadrature accuracy, else every spectral evaluation reports
//! [`Error::NormalizationMismatch`].
//!
//! The averaging checks compare a rapidly oscillating coefficient with its
//! cell mean: testing the oscillation against a fixed kinked function,
//! against a window in the weak sense, through the `L^p` bound on expanding
//! intervals, through off-diagonal double integrals, and finally at the
//! level of the energies themselves, both as recovery sequences and as a
//! lower-semicontinuity catalog. Each check returns rows of
//! (scale, value, limit); pass/fail gates stay with the caller.

use std::cell::RefCell;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coeff::PeriodicCoefficient;
use crate::error::{Error, Result};
use crate::exponent::ExponentSpec;
use crate::measure::{require_levy_measure, LevyDensitySpec, ModulatedMeasure};
use crate::quad::{
    cheb_coefficients, cheb_to_monomial, integrate_bounded, integrate_singular, merge_points,
    osc_monomials, QuadratureConfig, FILON_DEG,
};
use crate::report::{ConvergenceReport, ConvergenceRow};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Gauss-Legendre node of the two-point rule, exact through cubics.
const GL2_NODE: f64 = 0.577_350_269_189_625_8;

/// A compactly supported function the forms are evaluated on.
///
/// The kinked kinds (tent and general piecewise-linear) admit exact inner
/// integration and a closed-form transform; the smooth bump exercises the
/// adaptive fallback paths.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// The hat `max(0, 1 - |x - center| / halfwidth)`.
    Tent { center: f64, halfwidth: f64 },
    /// Linear interpolation through `(x, value)` knots, zero outside; the
    /// first and last knot values are zero.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// The mollifier profile `exp(1 - 1/(1 - s^2))` of `s = (x - center) /
    /// radius`, which is smooth and vanishes to all orders at the edges.
    SmoothBump { center: f64, radius: f64 },
}

impl TestFunction {
    pub fn tent(center: f64, halfwidth: f64) -> Result<Self> {
        if !(halfwidth > 0.0 && halfwidth.is_finite() && center.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tent needs a finite center and positive halfwidth, got ({center}, {halfwidth})"
            )));
        }
        Ok(TestFunction::Tent { center, halfwidth })
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParameter(
                "a piecewise-linear function needs at least two knots".into(),
            ));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter(format!(
                    "knot abscissae must increase strictly, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if knots.iter().any(|&(x, v)| !(x.is_finite() && v.is_finite())) {
            return Err(Error::InvalidParameter("knots must be finite".into()));
        }
        if knots[0].1 != 0.0 || knots[knots.len() - 1].1 != 0.0 {
            return Err(Error::InvalidParameter(
                "the first and last knot values must be zero for compact support".into(),
            ));
        }
        Ok(TestFunction::PiecewiseLinear { knots })
    }

    pub fn smooth_bump(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bump needs a finite center and positive radius, got ({center}, {radius})"
            )));
        }
        Ok(TestFunction::SmoothBump { center, radius })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::Tent { center, halfwidth } => {
                (1.0 - (x - center).abs() / halfwidth).max(0.0)
            }
            TestFunction::PiecewiseLinear { knots } => pl_eval(knots, x),
            TestFunction::SmoothBump { center, radius } => {
                let s = (x - center) / radius;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
        }
    }

    /// The closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match self {
            TestFunction::Tent { center, halfwidth } => {
                (center - halfwidth, center + halfwidth)
            }
            TestFunction::PiecewiseLinear { knots } => (knots[0].0, knots[knots.len() - 1].0),
            TestFunction::SmoothBump { center, radius } => (center - radius, center + radius),
        }
    }

    /// A Lipschitz constant: exact slope maxima for the kinked kinds, a
    /// scanned derivative maximum (within a tenth of a percent) for the
    /// bump.
    pub fn lipschitz(&self) -> f64 {
        match self {
            TestFunction::Tent { halfwidth, .. } => 1.0 / halfwidth,
            TestFunction::PiecewiseLinear { knots } => knots
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max),
            TestFunction::SmoothBump { radius, .. } => {
                let mut best = 0.0f64;
                for i in 1..4000 {
                    let s = i as f64 / 4000.0;
                    let q = 1.0 - s * s;
                    let d = (1.0 - 1.0 / q).exp() * 2.0 * s / (q * q);
                    best = best.max(d);
                }
                best * 1.001 / radius
            }
        }
    }

    /// Points where the function is not smooth, as quadrature panel edges.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            TestFunction::Tent { center, halfwidth } => {
                vec![center - halfwidth, *center, center + halfwidth]
            }
            TestFunction::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
            TestFunction::SmoothBump { center, radius } => {
                vec![center - radius, center + radius]
            }
        }
    }

    /// `int u`, exact for the kinked kinds.
    pub fn integral(&self) -> f64 {
        match self.knots() {
            Some(k) => k
                .windows(2)
                .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
                .sum(),
            None => {
                let (lo, hi) = self.support();
                let f = |x: f64| self.eval(x);
                integrate_bounded(&f, lo, hi, &[], &QuadratureConfig::default())
                    .expect_converged("bump integral")
                    .expect("a smooth compactly supported integrand converges")
                    .0
            }
        }
    }

    /// Squared transform magnitude `|u_hat(xi)|^2` under the convention
    /// `u_hat(xi) = (2 pi)^-1 int e^{-i xi x} u(x) dx`, available for the
    /// kinked kinds.
    pub fn fourier_abs2(&self, xi: f64) -> Option<f64> {
        FourierData::new(self).map(|fd| fd.abs2(xi))
    }

    pub fn translated(&self, t: f64) -> TestFunction {
        assert!(t.is_finite(), "translation must be finite");
        match self {
            TestFunction::Tent { center, halfwidth } => {
                TestFunction::Tent { center: center + t, halfwidth: *halfwidth }
            }
            TestFunction::PiecewiseLinear { knots } => TestFunction::PiecewiseLinear {
                knots: knots.iter().map(|&(x, v)| (x + t, v)).collect(),
            },
            TestFunction::SmoothBump { center, radius } => {
                TestFunction::SmoothBump { center: center + t, radius: *radius }
            }
        }
    }

    /// The function `x -> u(factor x)`; the support shrinks by `factor`.
    pub fn dilated(&self, factor: f64) -> TestFunction {
        assert!(factor > 0.0 && factor.is_finite(), "dilation factor must be positive");
        match self {
            TestFunction::Tent { center, halfwidth } => TestFunction::Tent {
                center: center / factor,
                halfwidth: halfwidth / factor,
            },
            TestFunction::PiecewiseLinear { knots } => TestFunction::PiecewiseLinear {
                knots: knots.iter().map(|&(x, v)| (x / factor, v)).collect(),
            },
            TestFunction::SmoothBump { center, radius } => TestFunction::SmoothBump {
                center: center / factor,
                radius: radius / factor,
            },
        }
    }

    /// `c u` for the kinked kinds; the bump profile has a fixed peak and
    /// cannot represent its own multiples.
    pub fn scaled(&self, c: f64) -> Result<TestFunction> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter("scale factor must be finite".into()));
        }
        let k = self.knots().ok_or_else(|| {
            Error::InvalidParameter("scaling is only represented for kinked functions".into())
        })?;
        TestFunction::piecewise_linear(k.into_iter().map(|(x, v)| (x, c * v)).collect())
    }

    /// `u + c v`, exact on the merged knot set; kinked kinds only.
    pub fn combine(&self, other: &TestFunction, c: f64) -> Result<TestFunction> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter("combination weight must be finite".into()));
        }
        let (a, b) = match (self.knots(), other.knots()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::InvalidParameter(
                    "combining is only represented for kinked functions".into(),
                ))
            }
        };
        let mut xs: Vec<f64> = a.iter().chain(b.iter()).map(|k| k.0).collect();
        xs.sort_by(|p, q| p.total_cmp(q));
        xs.dedup();
        let knots = xs
            .into_iter()
            .map(|x| (x, pl_eval(&a, x) + c * pl_eval(&b, x)))
            .collect();
        TestFunction::piecewise_linear(knots)
    }

    /// The clamp `min(max(u, 0), 1)`, with knots inserted at the level
    /// crossings so the result is exact; kinked kinds only.
    pub fn unit_contraction(&self) -> Result<TestFunction> {
        let k = self.knots().ok_or_else(|| {
            Error::InvalidParameter("contraction is only represented for kinked functions".into())
        })?;
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(k.len() + 4);
        for (i, &(x1, v1)) in k.iter().enumerate() {
            if i > 0 {
                let (x0, v0) = k[i - 1];
                let mut crossings: Vec<(f64, f64)> = Vec::new();
                for level in [0.0, 1.0] {
                    if (v0 - level) * (v1 - level) < 0.0 {
                        let xc = x0 + (level - v0) / (v1 - v0) * (x1 - x0);
                        crossings.push((xc, level));
                    }
                }
                crossings.sort_by(|p, q| p.0.total_cmp(&q.0));
                for (xc, level) in crossings {
                    if xc > out.last().expect("nonempty").0 && xc < x1 {
                        out.push((xc, level));
                    }
                }
            }
            out.push((x1, v1.clamp(0.0, 1.0)));
        }
        TestFunction::piecewise_linear(out)
    }

    /// The knot list of the kinked kinds; `None` for the bump.
    pub(crate) fn knots(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            TestFunction::Tent { center, halfwidth } => Some(vec![
                (center - halfwidth, 0.0),
                (*center, 1.0),
                (center + halfwidth, 0.0),
            ]),
            TestFunction::PiecewiseLinear { knots } => Some(knots.clone()),
            TestFunction::SmoothBump { .. } => None,
        }
    }
}

fn pl_eval(knots: &[(f64, f64)], x: f64) -> f64 {
    let n = knots.len();
    if x < knots[0].0 || x > knots[n - 1].0 {
        return 0.0;
    }
    if x == knots[0].0 {
        return knots[0].1;
    }
    let i = knots.partition_point(|k| k.0 <= x).min(n - 1);
    let (x0, v0) = knots[i - 1];
    let (x1, v1) = knots[i];
    v0 + (v1 - v0) * ((x - x0) / (x1 - x0))
}

/// Which route produced a form value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormMethod {
    Direct,
    Spectral,
}

/// An evaluated energy with its error bound.
#[derive(Debug, Clone, Copy)]
pub struct FormValue {
    pub value: f64,
    pub error: f64,
    pub method: FormMethod,
}

impl FormValue {
    /// Whether two evaluations agree within their combined bounds.
    pub fn agrees_with(&self, other: &FormValue) -> bool {
        (self.value - other.value).abs() <= self.error + other.error
    }
}

/// The correlation `int (u(x+z) - u(x)) (v(x+z) - v(x)) dx` over an optional
/// window, cell-exact for two kinked functions.
fn poly_cross(
    uk: &[(f64, f64)],
    vk: &[(f64, f64)],
    z: f64,
    window: Option<(f64, f64)>,
) -> f64 {
    let (ulo, uhi) = (uk[0].0, uk[uk.len() - 1].0);
    let (vlo, vhi) = (vk[0].0, vk[vk.len() - 1].0);
    let mut lo = ulo.min(vlo).min(ulo - z).min(vlo - z);
    let mut hi = uhi.max(vhi).max(uhi - z).max(vhi - z);
    if let Some((wl, wh)) = window {
        lo = lo.max(wl);
        hi = hi.min(wh);
    }
    if !(hi > lo) {
        return 0.0;
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(2 * (uk.len() + vk.len()) + 2);
    cuts.push(lo);
    cuts.push(hi);
    for k in uk.iter().chain(vk.iter()) {
        for c in [k.0, k.0 - z] {
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let f = |x: f64| {
        (pl_eval(uk, x + z) - pl_eval(uk, x)) * (pl_eval(vk, x + z) - pl_eval(vk, x))
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let c = 0.5 * (w[0] + w[1]);
        let h = 0.5 * (w[1] - w[0]);
        if h > 0.0 {
            total += h * (f(c - h * GL2_NODE) + f(c + h * GL2_NODE));
        }
    }
    total
}

/// Adaptive fallback for the same correlation when a bump is involved. The
/// first failure is parked in `issue` and surfaces after the outer
/// quadrature returns, since the integrand signature cannot carry errors.
fn numeric_cross(
    u: &TestFunction,
    v: &TestFunction,
    z: f64,
    window: Option<(f64, f64)>,
    cfg: &QuadratureConfig,
    issue: &RefCell<Option<Error>>,
) -> f64 {
    let (ulo, uhi) = u.support();
    let (vlo, vhi) = v.support();
    let mut lo = ulo.min(vlo).min(ulo - z).min(vlo - z);
    let mut hi = uhi.max(vhi).max(uhi - z).max(vhi - z);
    if let Some((wl, wh)) = window {
        lo = lo.max(wl);
        hi = hi.min(wh);
    }
    if !(hi > lo) {
        return 0.0;
    }
    let mut breaks = Vec::new();
    for k in u.kinks().into_iter().chain(v.kinks()) {
        for c in [k, k - z] {
            if c > lo && c < hi {
                breaks.push(c);
            }
        }
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    let f = |x: f64| (u.eval(x + z) - u.eval(x)) * (v.eval(x + z) - v.eval(x));
    match integrate_bounded(&f, lo, hi, &breaks, cfg).expect_converged("energy inner integral") {
        Ok((value, _)) => value,
        Err(e) => {
            let mut slot = issue.borrow_mut();
            if slot.is_none() {
                *slot = Some(e);
            }
            f64::NAN
        }
    }
}

/// `int u v` with its error, exact for two kinked functions.
fn product_integral(
    u: &TestFunction,
    v: &TestFunction,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let (ulo, uhi) = u.support();
    let (vlo, vhi) = v.support();
    let lo = ulo.max(vlo);
    let hi = uhi.min(vhi);
    if !(hi > lo) {
        return Ok((0.0, 0.0));
    }
    match (u.knots(), v.knots()) {
        (Some(a), Some(b)) => {
            let mut cuts: Vec<f64> = vec![lo, hi];
            for k in a.iter().chain(b.iter()) {
                if k.0 > lo && k.0 < hi {
                    cuts.push(k.0);
                }
            }
            cuts.sort_by(|p, q| p.total_cmp(q));
            cuts.dedup();
            let mut total = 0.0;
            let mut mass = 0.0;
            for w in cuts.windows(2) {
                let c = 0.5 * (w[0] + w[1]);
                let h = 0.5 * (w[1] - w[0]);
                let s = h
                    * (pl_eval(&a, c - h * GL2_NODE) * pl_eval(&b, c - h * GL2_NODE)
                        + pl_eval(&a, c + h * GL2_NODE) * pl_eval(&b, c + h * GL2_NODE));
                total += s;
                mass += s.abs();
            }
            Ok((total, 8.0 * f64::EPSILON * mass))
        }
        _ => {
            let mut breaks: Vec<f64> = u
                .kinks()
                .into_iter()
                .chain(v.kinks())
                .filter(|&x| x > lo && x < hi)
                .collect();
            breaks.sort_by(|p, q| p.total_cmp(q));
            let f = |x: f64| u.eval(x) * v.eval(x);
            integrate_bounded(&f, lo, hi, &breaks, cfg)
                .expect_converged("test-function product integral")
        }
    }
}

fn pair_differences(points: &[f64], max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, &x) in points.iter().enumerate() {
        for &y in &points[i + 1..] {
            let d = (x - y).abs();
            if d > 1e-12 && d < max {
                out.push(d);
            }
        }
    }
    out
}

/// The energy `E(u, u)` by direct double integration.
pub fn form_direct(
    u: &TestFunction,
    m: &ModulatedMeasure,
    cfg: &QuadratureConfig,
) -> Result<FormValue> {
    form_direct_bilinear(u, u, m, cfg)
}

/// The bilinear energy `E(u, v)` by direct double integration.
///
/// The inner correlation is exact for kinked test functions; the outer
/// integral runs on a graded mesh over the density's singular points with
/// the origin included, and the tail beyond the joint support span is the
/// closed-form product `2 (int u v) * mass_above(span)`.
pub fn form_direct_bilinear(
    u: &TestFunction,
    v: &TestFunction,
    m: &ModulatedMeasure,
    cfg: &QuadratureConfig,
) -> Result<FormValue> {
    cfg.validate();
    let dim = m.dim();
    if dim != 1 {
        return Err(Error::UnsupportedDimension { op: "form_direct", dim });
    }
    require_levy_measure(m, cfg)?;
    let uk = u.knots();
    let vk = v.knots();
    let exact_inner = uk.is_some() && vk.is_some();
    let inner_cfg = QuadratureConfig {
        rel_tol: (cfg.rel_tol * 0.3).max(1e-13),
        abs_tol: cfg.abs_tol * 0.1,
        ..*cfg
    };
    let (ulo, uhi) = u.support();
    let (vlo, vhi) = v.support();
    let span = uhi.max(vhi) - ulo.min(vlo);
    let issue: RefCell<Option<Error>> = RefCell::new(None);
    let g = |z: f64| {
        let w = match (&uk, &vk) {
            (Some(a), Some(b)) => poly_cross(a, b, z, None),
            _ => numeric_cross(u, v, z, None, &inner_cfg, &issue),
        };
        if w == 0.0 {
            0.0
        } else {
            w * m.density_value(z)
        }
    };
    let mut sings = m.singular_points_in(0.0, span);
    sings.push(0.0);
    let kink_all = merge_points(u.kinks(), v.kinks());
    let breaks = merge_points(
        merge_points(
            m.breakpoints_in(0.0, span),
            pair_differences(&kink_all, span),
        ),
        m.coefficient().resolution_panels_in(0.0, span, m.delta()),
    );
    let head = integrate_singular(&g, 0.0, span, &sings, &breaks, cfg);
    if let Some(e) = issue.borrow_mut().take() {
        return Err(e);
    }
    let (hv, he) = head.expect_converged("energy head integral")?;
    let (pv, pe) = product_integral(u, v, cfg)?;
    let tail_const = 2.0 * pv;
    let (tm, tme) = m.mass_above(span, cfg).expect_converged("energy tail mass")?;
    let value = 2.0 * hv + tail_const * tm;
    let mut error = 2.0 * he + tail_const.abs() * tme + 2.0 * pe * tm;
    if !exact_inner {
        error += (2.0 * hv).abs() * inner_cfg.rel_tol;
    }
    error += value.abs() * 1e-13;
    Ok(FormValue { value, error, method: FormMethod::Direct })
}

/// Knot geometry and exact moments backing the closed-form transform of a
/// kinked test function.
struct FourierData {
    xs: Vec<f64>,
    jumps: Vec<f64>,
    center: f64,
    halfspan: f64,
    central: Vec<f64>,
    jump_mass: f64,
}

/// Central moments past this order are negligible inside the series radius
/// `|xi| halfspan < 1/2`, where term `n` is below `mass / 2^n n!`.
const FT_MOMENTS: usize = 26;

impl FourierData {
    fn new(u: &TestFunction) -> Option<Self> {
        let knots = u.knots()?;
        let n = knots.len();
        let center = 0.5 * (knots[0].0 + knots[n - 1].0);
        let halfspan = 0.5 * (knots[n - 1].0 - knots[0].0);
        let slopes: Vec<f64> = knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        let mut xs = Vec::with_capacity(n);
        let mut jumps = Vec::with_capacity(n);
        for i in 0..n {
            let before = if i == 0 { 0.0 } else { slopes[i - 1] };
            let after = if i == n - 1 { 0.0 } else { slopes[i] };
            xs.push(knots[i].0);
            jumps.push(after - before);
        }
        let jump_mass = jumps.iter().map(|j| j.abs()).sum();
        // Central moments int (x - center)^n u dx, closed form per segment
        // from u(x) = v0 + B (s - s0) in s = x - center.
        let mut central = vec![0.0; FT_MOMENTS + 1];
        for (w, &slope) in knots.windows(2).zip(&slopes) {
            let (s0, v0) = (w[0].0 - center, w[0].1);
            let s1 = w[1].0 - center;
            let mut p0 = s0;
            let mut p1 = s1;
            for (m, c) in central.iter_mut().enumerate() {
                let q0 = p0 * s0;
                let q1 = p1 * s1;
                *c += (v0 - slope * s0) * (p1 - p0) / (m as f64 + 1.0)
                    + slope * (q1 - q0) / (m as f64 + 2.0);
                p0 = q0;
                p1 = q1;
            }
        }
        Some(FourierData { xs, jumps, center, halfspan, central, jump_mass })
    }

    /// `U(xi) = int e^{-i xi x} u dx`. Inside the series radius the central
    /// moment expansion converges to machine precision; outside it the
    /// second derivative is a sum of point masses at the knots, giving
    /// `U = -xi^{-2} sum jump_k e^{-i xi x_k}`.
    fn transform(&self, xi: f64) -> Complex64 {
        if xi.abs() * self.halfspan < 0.5 {
            let step = Complex64::new(0.0, -xi);
            let mut coef = Complex64::new(1.0, 0.0);
            let mut sum = Complex64::new(self.central[0], 0.0);
            for (m, &mu) in self.central.iter().enumerate().skip(1) {
                coef *= step / m as f64;
                sum += coef * mu;
            }
            sum * Complex64::from_polar(1.0, -xi * self.center)
        } else {
            let mut sum = Complex64::new(0.0, 0.0);
            for (&x, &j) in self.xs.iter().zip(&self.jumps) {
                sum += Complex64::from_polar(j, -xi * x);
            }
            -sum / (xi * xi)
        }
    }

    fn abs2(&self, xi: f64) -> f64 {
        self.transform(xi).norm_sqr() / (TAU * TAU)
    }
}

/// The pairing constant between the two routes: calibrated once per process
/// on a reference pair, stored as the measured ratio when it fails to land
/// on the closed form.
static CALIBRATION: OnceLock<std::result::Result<f64, f64>> = OnceLock::new();

/// The constant `C` in `E(u, u) = C int |u_hat|^2 psi`, verified by a
/// one-time self-test.
///
/// With the convention `u_hat = (2 pi)^-d int e^{-i xi x} u dx` and the form
/// written without a symmetrizing half, the closed form is `2 (2 pi)^d`.
/// The calibration evaluates both routes on a tent against the flat
/// unit-stable density and accepts only if their ratio lands on that
/// constant within `5e-5`; otherwise every spectral evaluation fails with
/// the measured ratio, which is the signature of a convention mismatch.
pub fn spectral_normalization() -> Result<f64> {
    match *CALIBRATION.get_or_init(calibrate) {
        Ok(c) => Ok(c),
        Err(measured) => Err(Error::NormalizationMismatch { measured }),
    }
}

fn calibrate() -> std::result::Result<f64, f64> {
    let target = 2.0 * TAU;
    let run = || -> Result<f64> {
        let cfg = QuadratureConfig::default();
        let u = TestFunction::tent(0.0, 1.0)?;
        let m = ModulatedMeasure::new(
            PeriodicCoefficient::constant(1.0)?,
            LevyDensitySpec::stable_like(1.0)?,
            1.0,
        )?;
        let direct = form_direct(&u, &m, &cfg)?;
        let e = ExponentSpec::new(m, &cfg)?;
        let (naive, _) = spectral_unnormalized(&u, &e, &cfg)?;
        Ok(direct.value / naive)
    };
    match run() {
        Ok(ratio) if (ratio / target - 1.0).abs() <= 5e-5 => Ok(target),
        Ok(ratio) => Err(ratio),
        Err(_) => Err(f64::NAN),
    }
}

/// The distinct knot differences `|x_j - x_k|` with their cosine weights:
/// `|sum_k m_k e^{-i xi x_k}|^2 = sum over (d, w) of w cos(d xi)`.
fn knot_difference_weights(fd: &FourierData) -> Vec<(f64, f64)> {
    let n = fd.xs.len();
    let mut raw: Vec<(f64, f64)> =
        vec![(0.0, fd.jumps.iter().map(|j| j * j).sum())];
    for i in 0..n {
        for k in i + 1..n {
            raw.push(((fd.xs[k] - fd.xs[i]).abs(), 2.0 * fd.jumps[i] * fd.jumps[k]));
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
    let tol = 1e-12 * (2.0 * fd.halfspan).max(1.0);
    for (d, w) in raw {
        match out.last_mut() {
            Some(last) if (d - last.0).abs() <= tol => last.1 += w,
            _ => out.push((d, w)),
        }
    }
    out.retain(|&(_, w)| w != 0.0);
    out
}

/// `int_lo^hi g(xi) sum_d w_d cos(d xi) dxi` by Chebyshev interpolation of
/// the smooth factor and closed-form cosine moments, so the panel size
/// never has to resolve the oscillation. Panels split where the measured
/// interpolation residual says `g` has structure (the coefficient's
/// lattice frequencies put weak kinks into `psi`); what remains at the
/// depth cap is charged to the error.
fn filon_interval<G: FnMut(f64) -> f64>(
    g: &mut G,
    lo: f64,
    hi: f64,
    diffs: &[(f64, f64)],
    abs_weight: f64,
) -> (f64, f64) {
    let mid = 0.5 * (lo + hi);
    let mut stack: Vec<(f64, f64, u8)> = vec![(mid, hi, 0), (lo, mid, 0)];
    let mut value = 0.0;
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
        if resid > 1e-11 * coef[0].abs() && depth < 8 {
            stack.push((c, b, depth + 1));
            stack.push((a, c, depth + 1));
            continue;
        }
        let mono = cheb_to_monomial(&coef);
        let mut acc = 0.0;
        for &(d, w) in diffs {
            let xn = osc_monomials(d * h);
            let mut s = Complex64::new(0.0, 0.0);
            for (p, x) in mono.iter().zip(&xn) {
                s += x * *p;
            }
            acc += w * (Complex64::from_polar(1.0, d * c) * s).re;
        }
        value += h * acc;
        error += resid * abs_weight * (b - a);
    }
    (value, error)
}

/// `int_R |u_hat|^2 psi` with its error bound, before the pairing constant.
///
/// Below the series radius of the transform the integrand is smooth and
/// handled adaptively; above it, `|u_hat|^2 xi^4` is an exact trigonometric
/// polynomial in the knot differences, so dyadic blocks are integrated by
/// the Filon rule with only the smooth factor `psi / xi^4` sampled. Blocks
/// are appended until the closed tail bound - from `|U| <= jump mass /
/// xi^2` and the quadratic comparability bound on `psi` - drops below the
/// target, and half the bound is charged to value and error alike.
fn spectral_unnormalized(
    u: &TestFunction,
    e: &ExponentSpec,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let fd = FourierData::new(u).ok_or_else(|| {
        Error::Domain(
            "the smooth bump has no represented transform; evaluate it on the direct route"
                .into(),
        )
    })?;
    let m = e.measure();
    let near_cfg = QuadratureConfig { rel_tol: cfg.rel_tol.max(1e-9), ..*cfg };
    let (l2u, _) = product_integral(u, u, cfg)?;
    let diffs = knot_difference_weights(&fd);
    let abs_weight: f64 = diffs.iter().map(|(_, w)| w.abs()).sum();

    let xi_b = 0.5 / fd.halfspan;
    let (psi_b, _) = e.psi(xi_b)?;
    let floor = psi_b.abs() * 1e-3 + f64::MIN_POSITIVE;
    let worst_rel = RefCell::new(0.0f64);
    let issue: RefCell<Option<Error>> = RefCell::new(None);
    let track = |xi: f64| -> f64 {
        match e.psi(xi) {
            Ok((v, err)) => {
                let r = err / v.max(floor);
                if r > *worst_rel.borrow() {
                    *worst_rel.borrow_mut() = r;
                }
                v
            }
            Err(err) => {
                let mut slot = issue.borrow_mut();
                if slot.is_none() {
                    *slot = Some(err);
                }
                f64::NAN
            }
        }
    };

    let f_near = |xi: f64| fd.abs2(xi) * track(xi);
    let near = integrate_singular(&f_near, 0.0, xi_b, &[0.0], &[], &near_cfg);
    if let Some(err) = issue.borrow_mut().take() {
        return Err(err);
    }
    let (nv, ne) = near.expect_converged("transform-side energy integral")?;

    let mut g = |xi: f64| track(xi) / (xi * xi * xi * xi);
    let mut x = xi_b;
    let mut osc = 0.0;
    let mut osc_err = 0.0;
    for _ in 0..48 {
        let (bv, be) = filon_interval(&mut g, x, 2.0 * x, &diffs, abs_weight);
        if let Some(err) = issue.borrow_mut().take() {
            return Err(err);
        }
        osc += bv;
        osc_err += be;
        x *= 2.0;

        let inv = 1.0 / x;
        let (m2, m2e) = m
            .second_moment_below(inv, cfg)
            .expect_converged("comparability second moment")?;
        let (ma, mae) = m.mass_above(inv, cfg).expect_converged("comparability tail mass")?;
        let a_mass = x * x * (m2 + m2e) + 2.0 * (ma + mae);
        let tail = 2.0 * fd.jump_mass * fd.jump_mass * a_mass / (TAU * TAU * x * x * x);

        let s = nv + osc / (TAU * TAU);
        if tail <= 2e-8 * (2.0 * s).abs() || tail <= cfg.abs_tol {
            let rel = *worst_rel.borrow();
            let value = 2.0 * s + 0.5 * tail;
            let error = 2.0
                * (ne + osc_err / (TAU * TAU) + rel * (s.abs() + floor * 0.5 * l2u / TAU))
                + 0.5 * tail;
            return Ok((value, error));
        }
    }
    Err(Error::QuadratureFailure(
        "transform-side tail bound refused to shrink".into(),
    ))
}

/// The energy `E(u, u)` through the exponent: `C int |u_hat|^2 psi_delta`.
pub fn form_spectral(
    u: &TestFunction,
    e: &ExponentSpec,
    cfg: &QuadratureConfig,
) -> Result<FormValue> {
    cfg.validate();
    let dim = e.measure().dim();
    if dim != 1 {
        return Err(Error::UnsupportedDimension { op: "form_spectral", dim });
    }
    let c = spectral_normalization()?;
    let (value, error) = spectral_unnormalized(u, e, cfg)?;
    Ok(FormValue { value: c * value, error: c * error, method: FormMethod::Spectral })
}

fn validate_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("the delta grid is empty".into()));
    }
    for &d in deltas {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "oscillation scales must be positive and finite, got {d}"
            )));
        }
    }
    Ok(())
}

fn require_dim_one(coefficient: &PeriodicCoefficient, op: &'static str) -> Result<()> {
    let dim = coefficient.dim();
    if dim != 1 {
        return Err(Error::UnsupportedDimension { op, dim });
    }
    Ok(())
}

/// Tests the oscillating coefficient against a fixed compactly supported
/// function: rows of `int g a(x / delta) dx` against the limit
/// `mean(a) int g`, one per scale.
pub fn vague_convergence_check(
    g: &TestFunction,
    coefficient: &PeriodicCoefficient,
    deltas: &[f64],
    cfg: &QuadratureConfig,
) -> Result<ConvergenceReport> {
    cfg.validate();
    require_dim_one(coefficient, "vague_convergence_check")?;
    validate_deltas(deltas)?;
    let limit = coefficient.mean_exact() * g.integral();
    let (lo, hi) = g.support();
    let rows = deltas
        .par_iter()
        .map(|&d| {
            let f = |x: f64| {
                let gv = g.eval(x);
                if gv == 0.0 {
                    0.0
                } else {
                    gv * coefficient.eval(x / d).or_infinite()
                }
            };
            let sings = coefficient.singular_points_in(lo, hi, d);
            let breaks = merge_points(
                merge_points(coefficient.breakpoints_in(lo, hi, d), g.kinks()),
                coefficient.resolution_panels_in(lo, hi, d),
            );
            let (v, _) = integrate_singular(&f, lo, hi, &sings, &breaks, cfg)
                .expect_converged("vague test integral")?;
            Ok(ConvergenceRow::new(d, 0.0, v, limit))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::new(rows))
}

/// Tests the oscillation against a window function `g` on `[k_lo, k_hi]` in
/// the weak sense: rows of `int_K g a(x / delta) dx` against
/// `mean(a) int_K g`. The exponent gate `1 < p < p_max(a)` is what makes
/// the pairing legitimate for discontinuous `g`; `g_breaks` lists its jump
/// or kink points for the quadrature.
#[allow(clippy::too_many_arguments)]
pub fn weak_lp_check(
    g: &(dyn Fn(f64) -> f64 + Sync),
    g_breaks: &[f64],
    window: (f64, f64),
    coefficient: &PeriodicCoefficient,
    p: f64,
    deltas: &[f64],
    cfg: &QuadratureConfig,
) -> Result<ConvergenceReport> {
    cfg.validate();
    require_dim_one(coefficient, "weak_lp_check")?;
    validate_deltas(deltas)?;
    let (lo, hi) = window;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "the window must be a bounded interval, got [{lo}, {hi}]"
        )));
    }
    let p_max = coefficient.p_max();
    if !(p > 1.0 && p < p_max) {
        return Err(Error::ExponentOutOfRange { p, p_max });
    }
    let mut base_breaks: Vec<f64> = g_breaks.to_vec();
    base_breaks.retain(|b| b.is_finite());
    let g_int = {
        let f = |x: f64| g(x);
        integrate_singular(&f, lo, hi, &[], &base_breaks, cfg)
            .expect_converged("window integral")?
            .0
    };
    let limit = coefficient.mean_exact() * g_int;
    let rows = deltas
        .par_iter()
        .map(|&d| {
            let f = |x: f64| {
                let gv = g(x);
                if gv == 0.0 {
                    0.0
                } else {
                    gv * coefficient.eval(x / d).or_infinite()
                }
            };
            let sings = coefficient.singular_points_in(lo, hi, d);
            let breaks = merge_points(
                merge_points(coefficient.breakpoints_in(lo, hi, d), base_breaks.clone()),
                coefficient.resolution_panels_in(lo, hi, d),
            );
            let (v, _) = integrate_singular(&f, lo, hi, &sings, &breaks, cfg)
                .expect_converged("weak window integral")?;
            Ok(ConvergenceRow::new(d, 0.0, v, limit))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::new(rows))
}

/// One scale of the `L^p` bound comparison.
#[derive(Debug, Clone, Copy)]
pub struct LpBoundRow {
    pub delta: f64,
    /// `int_{-N}^{N} a(x / delta)^p dx`.
    pub lhs: f64,
    /// Quadrature error of the left side.
    pub error: f64,
    /// `rhs - lhs`; nonnegative slack means the bound holds outright.
    pub slack: f64,
    /// Whether the bound holds within the combined quadrature error.
    pub holds: bool,
}

/// The `L^p` bound `int_{-N}^{N} a_delta^p <= 2 (N + 1) int_0^1 a^p` over a
/// grid of scales in `(0, 1)`.
#[derive(Debug, Clone)]
pub struct LpBoundReport {
    pub rows: Vec<LpBoundRow>,
    /// The right side `2 (N + 1) int_0^1 a^p`, shared by every row.
    pub rhs: f64,
    pub p: f64,
    pub half_width: u32,
}

impl LpBoundReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.holds).count()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

/// Verifies `int_{-N}^{N} a(x / delta)^p dx <= 2 (N + 1) int_0^1 a^p dx`
/// for every scale in the grid; scales outside `(0, 1)` are rejected since
/// the periodic covering argument behind the right side needs them there.
pub fn lp_bound_check(
    coefficient: &PeriodicCoefficient,
    p: f64,
    half_width: u32,
    deltas: &[f64],
    cfg: &QuadratureConfig,
) -> Result<LpBoundReport> {
    cfg.validate();
    require_dim_one(coefficient, "lp_bound_check")?;
    validate_deltas(deltas)?;
    if half_width == 0 {
        return Err(Error::InvalidParameter("the interval half-width must be positive".into()));
    }
    let p_max = coefficient.p_max();
    if !(p >= 1.0 && p < p_max) {
        return Err(Error::ExponentOutOfRange { p, p_max });
    }
    for &d in deltas {
        if d >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "the bound is asserted for scales in (0, 1), got {d}"
            )));
        }
    }
    let n = half_width as f64;
    let unit = {
        let f = |x: f64| match coefficient.eval(x).finite() {
            Some(v) => v.powf(p),
            None => f64::INFINITY,
        };
        integrate_singular(
            &f,
            0.0,
            1.0,
            &coefficient.singular_points_in(0.0, 1.0, 1.0),
            &coefficient.breakpoints_in(0.0, 1.0, 1.0),
            cfg,
        )
        .expect_converged("unit-cell p-th power")?
    };
    let rhs = 2.0 * (n + 1.0) * unit.0;
    let rhs_err = 2.0 * (n + 1.0) * unit.1;
    let rows = deltas
        .par_iter()
        .map(|&d| {
            let f = |x: f64| match coefficient.eval(x / d).finite() {
                Some(v) => v.powf(p),
                None => f64::INFINITY,
            };
            let sings = coefficient.singular_points_in(-n, n, d);
            let breaks = merge_points(
                coefficient.breakpoints_in(-n, n, d),
                coefficient.resolution_panels_in(-n, n, d),
            );
            let (lhs, err) = integrate_singular(&f, -n, n, &sings, &breaks, cfg)
                .expect_converged("windowed p-th power")?;
            let slack = rhs - lhs;
            Ok(LpBoundRow { delta: d, lhs, error: err, slack, holds: lhs <= rhs + err + rhs_err })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LpBoundReport { rows, rhs, p, half_width })
}

/// A compact off-diagonal region `{(x, y) : |x| <= x_max, z_min <= |x - y|
/// <= z_max}`, bounded away from the diagonal so the density stays locally
/// integrable on it.
#[derive(Debug, Clone, Copy)]
pub struct OffDiagonalRegion {
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl OffDiagonalRegion {
    pub fn new(x_max: f64, z_min: f64, z_max: f64) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "x_max must be positive and finite, got {x_max}"
            )));
        }
        if !(z_min > 0.0 && z_min < z_max && z_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "the gap interval needs 0 < z_min < z_max, got [{z_min}, {z_max}]"
            )));
        }
        Ok(OffDiagonalRegion { x_max, z_min, z_max })
    }
}

/// Double integrals of `(u(x) - u(y))^2 nu(y - x) a_delta(x - y)` over an
/// off-diagonal region, with the integrand sequence perturbed by the factor
/// `1 + perturbation / n` in row `n`, against the mean-coefficient limit.
///
/// This is the integrand class of the lower-semicontinuity argument: both
/// the scale and the integrand move at once, and the limit is still the
/// mean. With `perturbation = 0` the rows isolate pure scale convergence.
pub fn off_diagonal_limit_check(
    u: &TestFunction,
    coefficient: &PeriodicCoefficient,
    density: &LevyDensitySpec,
    region: &OffDiagonalRegion,
    perturbation: f64,
    deltas: &[f64],
    cfg: &QuadratureConfig,
) -> Result<ConvergenceReport> {
    cfg.validate();
    require_dim_one(coefficient, "off_diagonal_limit_check")?;
    validate_deltas(deltas)?;
    if !(perturbation >= 0.0 && perturbation.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "the perturbation weight must be nonnegative and finite, got {perturbation}"
        )));
    }
    let uk = u.knots();
    let window = Some((-region.x_max, region.x_max));
    let inner_cfg = QuadratureConfig {
        rel_tol: (cfg.rel_tol * 0.3).max(1e-13),
        abs_tol: cfg.abs_tol * 0.1,
        ..*cfg
    };
    let mut edge_points = u.kinks();
    edge_points.push(-region.x_max);
    edge_points.push(region.x_max);
    let structural = pair_differences(&edge_points, region.z_max);

    let base = |mm: &ModulatedMeasure| -> Result<f64> {
        let issue: RefCell<Option<Error>> = RefCell::new(None);
        let f = |z: f64| {
            let w = match &uk {
                Some(k) => poly_cross(k, k, z, window) + poly_cross(k, k, -z, window),
                None => {
                    numeric_cross(u, u, z, window, &inner_cfg, &issue)
                        + numeric_cross(u, u, -z, window, &inner_cfg, &issue)
                }
            };
            if w == 0.0 {
                0.0
            } else {
                w * mm.density_value(z)
            }
        };
        let sings = mm.singular_points_in(region.z_min, region.z_max);
        let breaks = merge_points(
            merge_points(
                mm.breakpoints_in(region.z_min, region.z_max),
                structural.clone(),
            ),
            mm.coefficient().resolution_panels_in(region.z_min, region.z_max, mm.delta()),
        );
        let out = integrate_singular(&f, region.z_min, region.z_max, &sings, &breaks, cfg);
        if let Some(e) = issue.borrow_mut().take() {
            return Err(e);
        }
        Ok(out.expect_converged("off-diagonal double integral")?.0)
    };

    let flat = ModulatedMeasure::new(PeriodicCoefficient::constant(1.0)?, density.clone(), 1.0)?;
    let limit = coefficient.mean_exact() * base(&flat)?;
    let rows = deltas
        .iter()
        .enumerate()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(i, &d)| {
            let mm = ModulatedMeasure::new(coefficient.clone(), density.clone(), d)?;
            let scale = 1.0 + perturbation / (i as f64 + 1.0);
            Ok(ConvergenceRow::new(d, 0.0, scale * base(&mm)?, limit))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::new(rows))
}

/// Recovery-sequence energies: rows of `E^delta(u, u)` against the
/// homogenized limit `mean(a) E^flat(u, u)`, one per scale. This is the
/// constructive half (M2) of form convergence in the sense of Mosco: the
/// fixed function `u` is its own recovery sequence.
pub fn mosco_m2_check(
    u: &TestFunction,
    coefficient: &PeriodicCoefficient,
    density: &LevyDensitySpec,
    deltas: &[f64],
    cfg: &QuadratureConfig,
) -> Result<ConvergenceReport> {
    cfg.validate();
    require_dim_one(coefficient, "mosco_m2_check")?;
    validate_deltas(deltas)?;
    let flat = ModulatedMeasure::new(PeriodicCoefficient::constant(1.0)?, density.clone(), 1.0)?;
    let limit = coefficient.mean_exact() * form_direct(u, &flat, cfg)?.value;
    let rows = deltas
        .par_iter()
        .map(|&d| {
            let mm = ModulatedMeasure::new(coefficient.clone(), density.clone(), d)?;
            Ok(ConvergenceRow::new(d, 0.0, form_direct(u, &mm, cfg)?.value, limit))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::new(rows))
}

/// One cataloged weakly convergent sequence with its energy rows.
#[derive(Debug, Clone)]
pub struct M1Family {
    pub name: &'static str,
    /// Row `n` pairs `deltas[n]` with `E^{delta_n}(u_n, u_n)`; the limit
    /// column is the energy of the weak limit.
    pub rows: Vec<ConvergenceRow>,
    pub target: f64,
    pub passed: bool,
}

/// Lower-semicontinuity catalog results.
#[derive(Debug, Clone)]
pub struct M1Report {
    pub slack: f64,
    pub families: Vec<M1Family>,
}

impl M1Report {
    pub fn violations(&self) -> usize {
        self.families.iter().filter(|f| !f.passed).count()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

/// Checks the necessary lower-semicontinuity condition (M1) on a catalog of
/// hand-built weakly convergent sequences: for each family,
/// `liminf E^{delta_n}(u_n, u_n) >= E(u, u) - slack`, with the liminf read
/// off the later half of the computed rows.
///
/// The quantifier over all weakly convergent sequences is not machine
/// checkable; a catalog of necessary instances is. A violation would
/// falsify the implementation, not the limit statement.
pub fn m1_necessary_check(
    u: &TestFunction,
    coefficient: &PeriodicCoefficient,
    density: &LevyDensitySpec,
    deltas: &[f64],
    slack: f64,
    cfg: &QuadratureConfig,
) -> Result<M1Report> {
    cfg.validate();
    require_dim_one(coefficient, "m1_necessary_check")?;
    validate_deltas(deltas)?;
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "slack must be nonnegative and finite, got {slack}"
        )));
    }
    if u.knots().is_none() {
        return Err(Error::InvalidParameter(
            "the ripple family adds a shrinking kinked ridge; use a kinked base function"
                .into(),
        ));
    }
    let flat = ModulatedMeasure::new(PeriodicCoefficient::constant(1.0)?, density.clone(), 1.0)?;
    let target_full = coefficient.mean_exact() * form_direct(u, &flat, cfg)?.value;
    let (lo, hi) = u.support();
    let mid = 0.5 * (lo + hi);
    let span = hi - lo;

    let sequences: Vec<(&'static str, f64, Vec<TestFunction>)> = vec![
        (
            "constant recovery sequence",
            target_full,
            deltas.iter().map(|_| u.clone()).collect(),
        ),
        (
            "shrinking ripple",
            target_full,
            (1..=deltas.len())
                .map(|n| {
                    let width = (0.5 * span).min(1.0 / n as f64);
                    let ripple = TestFunction::tent(mid, width)?;
                    u.combine(&ripple, (n as f64).powf(-0.5))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        (
            "escaping translates",
            0.0,
            (1..=deltas.len())
                .map(|n| u.translated(2.0 * span * n as f64))
                .collect(),
        ),
    ];

    let mut families = Vec::with_capacity(sequences.len());
    for (name, target, seq) in sequences {
        let rows = deltas
            .par_iter()
            .zip(seq.par_iter())
            .map(|(&d, un)| {
                let mm = ModulatedMeasure::new(coefficient.clone(), density.clone(), d)?;
                Ok(ConvergenceRow::new(d, 0.0, form_direct(un, &mm, cfg)?.value, target))
            })
            .collect::<Result<Vec<_>>>()?;
        let half = rows.len().div_ceil(2);
        let passed = rows[rows.len() - half..]
            .iter()
            .all(|r| r.value >= target - slack);
        families.push(M1Family { name, rows, target, passed });
    }
    Ok(M1Report { slack, families })
}

/// A varied catalog of (test function, measure) pairs on which the direct
/// and transform routes must agree: flat, smooth oscillating, and singular
/// coefficients against scale-free, profiled, and compactly supported
/// densities.
pub fn default_spectral_catalog() -> Result<Vec<(TestFunction, ModulatedMeasure)>> {
    Ok(vec![
        (
            TestFunction::tent(0.0, 1.0)?,
            ModulatedMeasure::new(
                PeriodicCoefficient::constant(1.0)?,
                LevyDensitySpec::stable_like(1.0)?,
                1.0,
            )?,
        ),
        (
            TestFunction::tent(0.5, 2.0)?,
            ModulatedMeasure::new(
                PeriodicCoefficient::constant(2.0)?,
                LevyDensitySpec::stable_like(0.6)?,
                1.0,
            )?,
        ),
        (
            TestFunction::tent(0.0, 1.0)?,
            ModulatedMeasure::new(
                PeriodicCoefficient::smooth_cosine(1.0, 0.5)?,
                LevyDensitySpec::stable_like(1.0)?,
                0.25,
            )?,
        ),
        (
            TestFunction::piecewise_linear(vec![
                (-1.0, 0.0),
                (-0.25, 0.6),
                (0.3, 1.0),
                (1.2, 0.0),
            ])?,
            ModulatedMeasure::new(
                PeriodicCoefficient::smooth_cosine(1.0, 0.9)?,
                LevyDensitySpec::stable_like(1.5)?,
                0.5,
            )?,
        ),
        (
            TestFunction::tent(-1.0, 1.5)?,
            ModulatedMeasure::new(
                PeriodicCoefficient::reflected_power(0.3, 0.0)?,
                LevyDensitySpec::profiled_stable(1.0, 0.3)?,
                0.5,
            )?,
        ),
        (
            TestFunction::tent(0.0, 1.0)?,
            ModulatedMeasure::new(
                PeriodicCoefficient::constant(1.0)?,
                LevyDensitySpec::truncated_stable(1.2, 2.5)?,
                1.0,
            )?,
        ),
        (
            TestFunction::tent(0.0, 0.75)?,
            ModulatedMeasure::new(
                PeriodicCoefficient::reflected_power(0.45, 0.0)?,
                LevyDensitySpec::stable_like(0.8)?,
                1.0 / 3.0,
            )?,
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn cauchy_flat() -> ModulatedMeasure {
        ModulatedMeasure::new(
            PeriodicCoefficient::constant(1.0).unwrap(),
            LevyDensitySpec::stable_like(1.0).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_function_has_zero_energy() {
        let zero =
            TestFunction::piecewise_linear(vec![(-1.0, 0.0), (1.0, 0.0)]).unwrap();
        let f = form_direct(&zero, &cauchy_flat(), &cfg()).unwrap();
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn tent_energy_matches_its_closed_form() {
        // For the flat unit-Cauchy density, psi = pi |xi| and the tent's
        // transform is sinc^4, giving E = 8 ln 2 exactly.
        let u = TestFunction::tent(0.0, 1.0).unwrap();
        let f = form_direct(&u, &cauchy_flat(), &cfg()).unwrap();
        let exact = 8.0 * std::f64::consts::LN_2;
        assert!(
            (f.value - exact).abs() <= f.error + 1e-9,
            "value {} vs exact {exact}, error {}",
            f.value,
            f.error
        );
        assert!(f.error <= 1e-5 * exact);
    }

    #[test]
    fn energy_matches_a_stratified_monte_carlo_oracle() {
        // E = 2 iint over (x, z) in [-3,1] x [0,2] of (u(x+z)-u(x))^2 / z^2
        // plus the exact far-range term 2 int u^2 * mass beyond 2; the x
        // hull is [-3, 1] because x + z can land in the support from below.
        let u = TestFunction::tent(0.0, 1.0).unwrap();
        let f = form_direct(&u, &cauchy_flat(), &cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (nx, nz, per) = (200usize, 200usize, 250usize);
        let (dx, dz) = (4.0 / nx as f64, 2.0 / nz as f64);
        let mut total = 0.0;
        let mut variance = 0.0;
        for ix in 0..nx {
            for iz in 0..nz {
                let (x0, z0) = (-3.0 + ix as f64 * dx, iz as f64 * dz);
                let mut s = 0.0;
                let mut s2 = 0.0;
                for _ in 0..per {
                    let x = x0 + rng.random::<f64>() * dx;
                    let z = z0 + rng.random::<f64>() * dz;
                    let d = u.eval(x + z) - u.eval(x);
                    let val = if z > 0.0 { d * d / (z * z) } else { 0.0 };
                    s += val;
                    s2 += val * val;
                }
                let mean = s / per as f64;
                let var = (s2 / per as f64 - mean * mean).max(0.0) / per as f64;
                let area = dx * dz;
                total += area * mean;
                variance += area * area * var;
            }
        }
        let mc = 2.0 * total + 4.0 / 3.0;
        let sigma = 2.0 * variance.sqrt();
        assert!(
            (f.value - mc).abs() <= 3.0 * sigma + f.error,
            "direct {} vs monte carlo {mc} (3 sigma = {})",
            f.value,
            3.0 * sigma
        );
    }

    #[test]
    fn bilinear_polarization_identity() {
        let u = TestFunction::tent(0.0, 1.0).unwrap();
        let v = TestFunction::tent(0.4, 0.7).unwrap();
        let m = ModulatedMeasure::new(
            PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap(),
            LevyDensitySpec::stable_like(1.1).unwrap(),
            0.3,
        )
        .unwrap();
        let c = cfg();
        let sum = u.combine(&v, 1.0).unwrap();
        let diff = u.combine(&v, -1.0).unwrap();
        let (es, ed) = (
            form_direct(&sum, &m, &c).unwrap(),
            form_direct(&diff, &m, &c).unwrap(),
        );
        let (eu, ev) = (form_direct(&u, &m, &c).unwrap(), form_direct(&v, &m, &c).unwrap());
        let lhs = es.value + ed.value;
        let rhs = 2.0 * (eu.value + ev.value);
        let budget = es.error + ed.error + 2.0 * (eu.error + ev.error);
        assert!((lhs - rhs).abs() <= budget + 1e-9 * rhs.abs());

        let cross = form_direct_bilinear(&u, &v, &m, &c).unwrap();
        let polarized = 0.25 * (es.value - ed.value);
        assert!((cross.value - polarized).abs() <= cross.error + 0.25 * (es.error + ed.error));
    }

    #[test]
    fn energy_scales_quadratically_and_ignores_translation() {
        let u = TestFunction::tent(0.0, 1.0).unwrap();
        let m = ModulatedMeasure::new(
            PeriodicCoefficient::smooth_cosine(1.0, 0.8).unwrap(),
            LevyDensitySpec::stable_like(1.1).unwrap(),
            0.3,
        )
        .unwrap();
        let c = cfg();
        let base = form_direct(&u, &m, &c).unwrap();
        let scaled = form_direct(&u.scaled(2.5).unwrap(), &m, &c).unwrap();
        assert!((scaled.value - 6.25 * base.value).abs() <= 1e-8 * scaled.value);
        let moved = form_direct(&u.translated(3.2), &m, &c).unwrap();
        assert!((moved.value - base.value).abs() <= moved.error + base.error + 1e-10);
    }

    #[test]
    fn unit_contraction_does_not_increase_energy() {
        let u = TestFunction::tent(0.0, 1.0).unwrap().scaled(1.8).unwrap();
        let v = u.unit_contraction().unwrap();
        assert_eq!(v.eval(0.0), 1.0);
        let m = cauchy_flat();
        let c = cfg();
        let eu = form_direct(&u, &m, &c).unwrap();
        let ev = form_direct(&v, &m, &c).unwrap();
        assert!(ev.value <= eu.value + eu.error + ev.error);
    }

    #[test]
    fn transform_matches_the_sinc_formula() {
        // Independent closed form for the unit tent:
        // |u_hat|^2 = (2 pi)^-2 sinc^4(xi / 2).
        let u = TestFunction::tent(0.0, 1.0).unwrap();
        let pl = TestFunction::piecewise_linear(vec![(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)])
            .unwrap();
        for &xi in &[1e-6f64, 1e-3, 0.3, 2.7, 40.0] {
            let s = (0.5 * xi).sin() / (0.5 * xi);
            let exact = s.powi(4) / (TAU * TAU);
            let got = u.fourier_abs2(xi).unwrap();
            assert!((got - exact).abs() <= 1e-9 * exact, "xi = {xi}: {got} vs {exact}");
            let got_pl = pl.fourier_abs2(xi).unwrap();
            assert!((got_pl - exact).abs() <= 1e-9 * exact);
        }
        assert!(TestFunction::smooth_bump(0.0, 1.0).unwrap().fourier_abs2(1.0).is_none());
    }

    #[test]
    fn calibration_lands_on_the_closed_form_constant() {
        let c = spectral_normalization().unwrap();
        assert!((c - 2.0 * TAU).abs() <= 1e-12);
    }

    #[test]
    fn direct_and_transform_routes_agree() {
        let c = cfg();
        for (i, (u, m)) in default_spectral_catalog().unwrap().into_iter().take(3).enumerate()
        {
            let d = form_direct(&u, &m, &c).unwrap();
            let e = ExponentSpec::new(m, &c).unwrap();
            let s = form_spectral(&u, &e, &c).unwrap();
            assert!(
                d.agrees_with(&s),
                "pair {i}: direct {} +- {} vs spectral {} +- {}",
                d.value,
                d.error,
                s.value,
                s.error
            );
            assert!((d.value - s.value).abs() <= 1e-3 * d.value.abs());
        }
    }

    #[test]
    fn smooth_bump_runs_on_the_direct_route_only() {
        let u = TestFunction::smooth_bump(0.0, 1.0).unwrap();
        let m = cauchy_flat();
        let c = cfg();
        let d = form_direct(&u, &m, &c).unwrap();
        assert!(d.value > 0.0);
        let e = ExponentSpec::new(m, &c).unwrap();
        match form_spectral(&u, &e, &c) {
            Err(Error::Domain(msg)) => assert!(msg.contains("direct route")),
            other => panic!("expected a domain error, got {other:?}"),
        }
    }

    #[test]
    fn vague_convergence_for_smooth_and_singular_coefficients() {
        let g = TestFunction::tent(0.0, 1.0).unwrap();
        let c = cfg();
        let deltas: Vec<f64> = (1..=10).map(|n| 0.5f64.powi(n)).collect();

        let flat = vague_convergence_check(
            &g,
            &PeriodicCoefficient::constant(3.0).unwrap(),
            &deltas,
            &c,
        )
        .unwrap();
        assert!(flat.rows.iter().all(|r| r.abs_err <= 1e-8));

        let smooth = vague_convergence_check(
            &g,
            &PeriodicCoefficient::smooth_cosine(1.0, 0.7).unwrap(),
            &deltas,
            &c,
        )
        .unwrap();
        assert!(smooth.rows.last().unwrap().abs_err <= 1e-2);
        assert!(smooth.errors_decreasing(4, 1e-9));

        let singular = vague_convergence_check(
            &g,
            &PeriodicCoefficient::reflected_power(0.3, 0.0).unwrap(),
            &deltas,
            &c,
        )
        .unwrap();
        assert!(singular.rows.last().unwrap().abs_err <= 1e-2);
        assert!(singular.rows.last().unwrap().abs_err < singular.rows[0].abs_err);
    }

    #[test]
    fn weak_window_limits_and_gates() {
        let c = cfg();
        // Scales 1/(k + 1/2) keep the boundary oscillation at full swing,
        // so the errors decrease like the scale itself instead of hitting
        // accidental zeros.
        let deltas: Vec<f64> = (1..=10).map(|k| 1.0 / (k as f64 + 0.5)).collect();
        let indicator = |x: f64| if (0.0..0.5).contains(&x) { 1.0 } else { 0.0 };
        let a = PeriodicCoefficient::smooth_cosine(1.0, 0.7).unwrap();
        let report =
            weak_lp_check(&indicator, &[0.0, 0.5], (-1.0, 1.0), &a, 2.0, &deltas, &c).unwrap();
        assert!(report.rows.last().unwrap().abs_err <= 0.02);
        assert!(report.errors_decreasing(4, 1e-6));

        // A flat window against an integer-cell scale is exact.
        let ones = |_: f64| 1.0;
        let exact = weak_lp_check(&ones, &[], (-1.0, 1.0), &a, 2.0, &[0.5], &c).unwrap();
        assert!(exact.rows[0].abs_err <= 1e-8);

        let singular = PeriodicCoefficient::reflected_power(0.4, 0.0).unwrap();
        let ok = weak_lp_check(
            &indicator,
            &[0.0, 0.5],
            (-1.0, 1.0),
            &singular,
            2.0,
            &deltas,
            &c,
        )
        .unwrap();
        assert!(ok.rows.last().unwrap().abs_err < ok.rows[0].abs_err.max(1e-3));
        match weak_lp_check(&indicator, &[0.0, 0.5], (-1.0, 1.0), &singular, 3.0, &deltas, &c) {
            Err(Error::ExponentOutOfRange { p, p_max }) => {
                assert_eq!(p, 3.0);
                assert!((p_max - 2.5).abs() < 1e-12);
            }
            other => panic!("expected an exponent gate, got {other:?}"),
        }
    }

    #[test]
    fn lp_bound_holds_on_the_singular_cell() {
        let c = cfg();
        let a = PeriodicCoefficient::reflected_power(0.4, 0.0).unwrap();
        let report = lp_bound_check(
            &a,
            2.0,
            3,
            &[0.7, 0.3, 0.11, 0.05, 0.999],
            &c,
        )
        .unwrap();
        assert!(report.passed(), "violations: {}", report.violations());
        assert!(report.rows.iter().all(|r| r.slack > 0.0));
        // Closed form of the cell integral: the profile's p-th power is
        // u^{-p gamma} on the first quarter, the plateau on the middle half,
        // mirrored on the last quarter.
        let gp = 2.0 * 0.4;
        let exact_cell = 2.0 * 0.25f64.powf(1.0 - gp) / (1.0 - gp) + 0.5 * 4.0f64.powf(gp);
        assert!((report.rhs - 2.0 * 4.0 * exact_cell).abs() <= 1e-8 * report.rhs);

        let flat = lp_bound_check(
            &PeriodicCoefficient::constant(2.0).unwrap(),
            4.0,
            3,
            &[0.5],
            &c,
        )
        .unwrap();
        assert!(flat.passed());
        // 2 N c^p against 2 (N + 1) c^p.
        assert!((flat.rows[0].slack - 2.0 * 16.0).abs() <= 1e-8 * flat.rhs);
    }

    #[test]
    fn off_diagonal_double_integrals_approach_the_mean() {
        let c = cfg();
        let u = TestFunction::tent(0.0, 1.0).unwrap();
        let region = OffDiagonalRegion::new(2.0, 0.25, 2.0).unwrap();
        let density = LevyDensitySpec::stable_like(1.0).unwrap();

        let flat = off_diagonal_limit_check(
            &u,
            &PeriodicCoefficient::constant(2.0).unwrap(),
            &density,
            &region,
            0.0,
            &[0.5, 0.25],
            &c,
        )
        .unwrap();
        assert!(flat.rows.iter().all(|r| r.rel_err <= 1e-8));

        let deltas: Vec<f64> = (1..=6).map(|n| 0.5f64.powi(n)).collect();
        let osc = PeriodicCoefficient::smooth_cosine(1.0, 0.6).unwrap();
        let pure = off_diagonal_limit_check(&u, &osc, &density, &region, 0.0, &deltas, &c)
            .unwrap();
        assert!(pure.final_max_rel() <= 2e-2);
        assert!(
            pure.rows.last().unwrap().abs_err < pure.rows[0].abs_err,
            "no decay: first {} last {}",
            pure.rows[0].abs_err,
            pure.rows.last().unwrap().abs_err
        );

        let moving = off_diagonal_limit_check(&u, &osc, &density, &region, 1.0, &deltas, &c)
            .unwrap();
        // The integrand perturbation decays like 1/n, so the final row
        // carries that residue on top of the scale error.
        assert!(moving.final_max_rel() <= 1.0 / 6.0 + 3e-2);
        assert!(moving.rows.last().unwrap().abs_err < moving.rows[0].abs_err);
    }

    #[test]
    fn recovery_energies_converge_to_the_mean_form() {
        let c = cfg();
        let u = TestFunction::tent(0.0, 1.0).unwrap();
        let density = LevyDensitySpec::stable_like(1.0).unwrap();

        let flat = mosco_m2_check(
            &u,
            &PeriodicCoefficient::constant(2.0).unwrap(),
            &density,
            &[0.5, 0.3],
            &c,
        )
        .unwrap();
        assert!(flat.rows.iter().all(|r| r.rel_err <= 1e-8));

        let deltas: Vec<f64> = (1..=7).map(|n| 0.5f64.powi(n)).collect();
        let report = mosco_m2_check(
            &u,
            &PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap(),
            &density,
            &deltas,
            &c,
        )
        .unwrap();
        assert!(report.passed(2e-2), "final rel {}", report.final_max_rel());
        assert!(report.errors_decreasing(3, 1e-4));
    }

    #[test]
    fn lower_semicontinuity_catalog_has_no_violations() {
        let c = cfg();
        let u = TestFunction::tent(0.0, 1.0).unwrap();
        let deltas: Vec<f64> = (1..=6).map(|n| 0.5f64.powi(n)).collect();
        let report = m1_necessary_check(
            &u,
            &PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap(),
            &LevyDensitySpec::stable_like(1.0).unwrap(),
            &deltas,
            0.05 * 8.0 * std::f64::consts::LN_2,
            &c,
        )
        .unwrap();
        assert!(report.passed(), "violations: {}", report.violations());
        assert_eq!(report.families.len(), 3);
        let escaping = &report.families[2];
        assert_eq!(escaping.target, 0.0);
        assert!(escaping.rows.iter().all(|r| r.value > 0.0));
    }

    #[test]
    fn rejected_inputs_explain_themselves() {
        let c = cfg();
        let u = TestFunction::tent(0.0, 1.0).unwrap();
        let tensor = PeriodicCoefficient::tensor(vec![
            PeriodicCoefficient::constant(1.0).unwrap(),
            PeriodicCoefficient::constant(1.0).unwrap(),
        ])
        .unwrap();
        let m2 = ModulatedMeasure::new(tensor, LevyDensitySpec::stable_like(1.0).unwrap(), 0.5)
            .unwrap();
        match form_direct(&u, &m2, &c) {
            Err(Error::UnsupportedDimension { dim, .. }) => assert_eq!(dim, 2),
            other => panic!("expected a dimension error, got {other:?}"),
        }
        assert!(OffDiagonalRegion::new(2.0, 0.0, 2.0).is_err());
        assert!(TestFunction::piecewise_linear(vec![(0.0, 0.1), (1.0, 0.0)]).is_err());
        assert!(TestFunction::piecewise_linear(vec![(1.0, 0.0), (0.0, 0.0)]).is_err());
        let bump = TestFunction::smooth_bump(0.0, 1.0).unwrap();
        assert!(bump.scaled(2.0).is_err());
        assert!(m1_necessary_check(
            &bump,
            &PeriodicCoefficient::constant(1.0).unwrap(),
            &LevyDensitySpec::stable_like(1.0).unwrap(),
            &[0.5],
            0.1,
            &c
        )
        .is_err());
    }
}
