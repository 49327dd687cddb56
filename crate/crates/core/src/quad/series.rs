//! Series helpers for periodic tails.
//!
//! The lattice sums behind every tail computation in the crate live here:
//! `sum_{l >= start} l^{-1-beta}` style sums via partial sums with an
//! integral-test bracket, the Hurwitz zeta function via Euler-Maclaurin with
//! a rigorous remainder, summed cell weights via moment expansions, and
//! Abel-accelerated oscillatory sums used by the characteristic exponent
//! tail. Every function returns a `(value, error_bound)` pair.

use super::adaptive::{integrate_smooth, DEFAULT_PANEL_BUDGET};
use super::QuadratureConfig;
use num_complex::Complex64;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Pochhammer symbol `s (s+1) ... (s+m-1)`.
pub(crate) fn pochhammer(s: f64, m: usize) -> f64 {
    let mut acc = 1.0;
    for k in 0..m {
        acc *= s + k as f64;
    }
    acc
}

/// Hurwitz zeta `sum_{k >= 0} (x + k)^{-s}` for `s > 1`, `x > 0`.
///
/// Euler-Maclaurin with three correction terms; the reported error is the
/// magnitude of the first omitted term.
pub fn hurwitz_zeta(s: f64, x: f64) -> (f64, f64) {
    assert!(s > 1.0 && x > 0.0, "hurwitz_zeta requires s > 1, x > 0");
    let shift = (64.0 - x).ceil().max(0.0);
    let k_max = shift as u64;
    let mut head = 0.0;
    for k in 0..k_max {
        head += (x + k as f64).powf(-s);
    }
    let y = x + shift;
    let tail = y.powf(1.0 - s) / (s - 1.0) + 0.5 * y.powf(-s) + s * y.powf(-s - 1.0) / 12.0
        - pochhammer(s, 3) * y.powf(-s - 3.0) / 720.0;
    let err = pochhammer(s, 5) * y.powf(-s - 5.0) / 30240.0;
    (head + tail, err)
}

/// Multiplies `period_integral` by `sum_{l >= start} l^{-1-beta}`.
///
/// Partial sums with the integral-test bracket for the remainder: the true
/// remainder past `K` lies between the integrals from `K+1` and from `K`, so
/// the midpoint is taken as the value and the half-width enters the error.
pub fn periodic_tail_sum(
    period_integral: f64,
    beta: f64,
    start: u64,
    cfg: &QuadratureConfig,
) -> (f64, f64) {
    assert!(beta > 0.0, "periodic_tail_sum requires beta > 0");
    assert!(start >= 1, "periodic_tail_sum starts at l >= 1");
    let s = 1.0 + beta;
    let mut partial = 0.0;
    let mut k = start;
    let mut block = 64u64;
    loop {
        let stop = k + block;
        while k < stop {
            partial += (k as f64).powf(-s);
            k += 1;
        }
        // partial covers l < k, so the remainder sum_{l >= k} is bracketed by
        // the integrals from k and from k-1.
        let lo = (k as f64).powf(-beta) / beta;
        let hi = (k as f64 - 1.0).powf(-beta) / beta;
        let mid = 0.5 * (hi + lo);
        let half = 0.5 * (hi - lo);
        let total = partial + mid;
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs()) / period_integral.abs().max(1e-300);
        if half <= tol || k >= 4_000_000 {
            return (period_integral * total, period_integral.abs() * half);
        }
        block *= 2;
    }
}

/// Tail of the moment expansion: given the moments
/// `m[r] = int_0^1 P(h) (h - 1/2)^r dh` of a 1-periodic profile `P`, returns
/// `sum_{l >= start} int_0^1 P(h) (h + l)^{-s} dh`.
///
/// Expanding `(h + l)^{-s}` around `h = 1/2` turns each cell integral into a
/// power series in `1/(l + 1/2)` whose lattice sums are Hurwitz zetas. The
/// truncation error is bounded by the first omitted envelope term times a
/// geometric safety factor.
pub(crate) fn cell_tail_from_moments(
    s: f64,
    moments: &[f64],
    p_l1: f64,
    start: u64,
) -> (f64, f64) {
    assert!(start >= 1);
    let base = start as f64 + 0.5;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut coef = 1.0; // (-1)^r poch(s, r) / r!
    for (r, &m) in moments.iter().enumerate() {
        let (zeta, zeta_err) = hurwitz_zeta(s + r as f64, base);
        value += coef * m * zeta;
        err += coef.abs() * m.abs() * zeta_err;
        coef *= -(s + r as f64) / (r as f64 + 1.0);
    }
    let r_next = moments.len();
    let (zeta_next, _) = hurwitz_zeta(s + r_next as f64, base);
    let env = coef.abs() * 0.5_f64.powi(r_next as i32) * p_l1 * zeta_next;
    let ratio = 0.5 / base * (s + r_next as f64) / (r_next as f64 + 1.0);
    let guard = if ratio < 0.9 { 1.0 / (1.0 - ratio) } else { 10.0 };
    (value, err + env * guard)
}

/// Abel-accelerated oscillatory lattice sum
/// `sum_{l >= start} e^{i theta l} g(l)`.
///
/// Repeated summation by parts: each pass trades one forward difference of
/// `g` for a factor `1/(1 - e^{i theta})`. After `levels` passes the
/// remaining sum is dropped and bounded by `env(levels, start)`, which must
/// dominate `sum_{l >= start} |Delta^levels g(l)|`.
pub(crate) fn abel_osc_sum(
    theta: f64,
    start: u64,
    levels: usize,
    g: &mut dyn FnMut(u64) -> Complex64,
    env: &dyn Fn(usize, u64) -> f64,
) -> (Complex64, f64) {
    let z = Complex64::from_polar(1.0, theta);
    let one_minus_z = Complex64::new(1.0, 0.0) - z;
    if one_minus_z.norm() < 1e-9 {
        // Resonant frequency: no cancellation to exploit.
        return (Complex64::new(0.0, 0.0), f64::INFINITY);
    }

    // Forward-difference table of g at start..=start+levels.
    let mut table: Vec<Complex64> = (0..=levels as u64).map(|j| g(start + j)).collect();
    let g_max = table.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut diffs: Vec<Complex64> = Vec::with_capacity(levels + 1);
    diffs.push(table[0]);
    for _ in 0..levels {
        for i in 0..table.len() - 1 {
            table[i] = table[i + 1] - table[i];
        }
        table.pop();
        diffs.push(table[0]);
    }

    let z_start = Complex64::from_polar(1.0, theta * start as f64);
    let inv = 1.0 / one_minus_z.norm();
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = env(levels, start);
    for m in (0..levels).rev() {
        value = (z_start * diffs[m] + z * value) / one_minus_z;
        err *= inv;
        // Rounding noise from the difference table amplifies the same way.
        err += (1u64 << m.min(52)) as f64 * f64::EPSILON * g_max * inv;
    }
    (value, err)
}

/// The same lattice sum by the Abel-Plana formula, for phases too close to
/// zero for summation by parts to gain anything.
///
/// With `f(u) = e^{i theta u} (u + 1/2)^{-s}`,
///
/// ```text
/// sum_{l >= a} f(l) = int_a^inf f(u) du + f(a)/2
///                     + i int_0^inf (f(a+it) - f(a-it)) / (e^{2 pi t} - 1) dt
/// ```
///
/// The half-line integral is rotated onto the upward ray where the phase
/// decays like `e^{-theta t}`; with `w = (c + it)^{-s}` the bridge integrand
/// collapses to `-2 Re(w) sinh(theta t) + 2i Im(w) cosh(theta t)` over
/// `e^{2 pi t} - 1`, which is smooth down to `t = 0`. Requires
/// `0 < theta < 1` and `s > 1`.
pub(crate) fn abel_plana_sum(theta: f64, s: f64, start: u64) -> (Complex64, f64) {
    assert!(theta > 0.0 && theta < 1.0, "abel_plana_sum needs 0 < theta < 1");
    assert!(s > 1.0);
    let a = start as f64;
    let c = a + 0.5;
    let q0 = c.powf(-s);
    let phase_a = Complex64::from_polar(1.0, theta * a);
    let rel = 1e-12;
    let abs = 1e-16 * q0;

    // Rotated half-line integral, in the scaled variable `w = theta c v`:
    // e^{i theta a} i c^{1-s} int_0^V e^{-theta c v} (1 + iv)^{-s} dv. The
    // scaling keeps the integrand's structure at v = O(1) for every order s,
    // where a raw-variable version concentrates into a spike of width
    // `theta c` that large orders hide from the panel refinement entirely.
    // Truncate where either decay factor alone is below e^{-46}, and seed
    // geometric panels so the first sweep always sees the structure.
    let tc = theta * c;
    let v_pow = ((92.0 / s).exp() - 1.0).sqrt();
    let v_max = v_pow.min(46.0 / tc).max(8.0);
    let mut seeds = Vec::new();
    let mut edge = 1.0;
    while edge < v_max {
        seeds.push(edge);
        edge *= 4.0;
    }
    let ray = |v: f64| Complex64::new(1.0, v).powf(-s) * (-tc * v).exp();
    let abs_v = 1e-16 * v_max;
    let ray_re =
        integrate_smooth(&|v| ray(v).re, 0.0, v_max, &seeds, rel, abs_v, DEFAULT_PANEL_BUDGET);
    let ray_im =
        integrate_smooth(&|v| ray(v).im, 0.0, v_max, &seeds, rel, abs_v, DEFAULT_PANEL_BUDGET);
    let (ray_re, ray_im) = match (ray_re, ray_im) {
        (Ok(re), Ok(im)) => (re, im),
        // Non-finite evaluations cannot occur for this integrand; treat a
        // refusal as a failed plan and report a crude but safe bound.
        _ => {
            let slack = 8.0 * theta.powf((s - 1.0).min(1.0)) * q0.max(1.0) / (s - 1.0);
            return (Complex64::new(hurwitz_zeta(s, c).0, 0.0), slack);
        }
    };
    let scale = c.powf(1.0 - s);
    let mut err = scale * (ray_re.error + ray_im.error + 3e-20 * v_max);
    if !ray_re.converged || !ray_im.converged {
        err += scale * (ray_re.value.abs() + ray_im.value.abs()) * 1e-9;
    }
    let i1 = phase_a
        * Complex64::new(0.0, scale)
        * Complex64::new(ray_re.value, ray_im.value);

    // Bridge integral over the vertical cut, cut at t = 10 where the
    // integrand is below e^{-52} q0.
    let bridge_re = integrate_smooth(
        &|t| -2.0 * Complex64::new(c, t).powf(-s).re * (theta * t).sinh() / (TAU * t).exp_m1(),
        0.0,
        10.0,
        &[],
        rel,
        abs,
        DEFAULT_PANEL_BUDGET,
    );
    let bridge_im = integrate_smooth(
        &|t| 2.0 * Complex64::new(c, t).powf(-s).im * (theta * t).cosh() / (TAU * t).exp_m1(),
        0.0,
        10.0,
        &[],
        rel,
        abs,
        DEFAULT_PANEL_BUDGET,
    );
    let (bridge_re, bridge_im) = match (bridge_re, bridge_im) {
        (Ok(re), Ok(im)) => (re, im),
        _ => {
            let slack = 8.0 * theta.powf((s - 1.0).min(1.0)) * q0.max(1.0) / (s - 1.0);
            return (Complex64::new(hurwitz_zeta(s, c).0, 0.0), slack);
        }
    };
    err += bridge_re.error + bridge_im.error + 1e-22 * q0;
    let i3 = Complex64::new(0.0, 1.0) * phase_a * Complex64::new(bridge_re.value, bridge_im.value);

    let value = i1 + 0.5 * phase_a * q0 + i3;
    (value, err + 4.0 * f64::EPSILON * value.norm())
}

/// Oscillatory lattice sum `sum_{l >= start} e^{i theta l} (l + 1/2)^{-s}`
/// with automatic method choice.
///
/// Away from resonance the sum is split into an explicit prefix plus an
/// Abel-accelerated tail whose starting index and depth are planned from the
/// envelope `poch(s,m) zeta(s+m, a+1/2) / |1-z|^m`. Within `0.05` of a
/// multiple of `2 pi` that envelope is useless and the Abel-Plana contour
/// formula takes over; at exact phase zero the sum is a Hurwitz zeta.
pub(crate) fn osc_lattice_sum(theta: f64, s: f64, start: u64, target_abs: f64) -> (Complex64, f64) {
    assert!(start >= 1 && s > 1.0);
    let mut th = theta.rem_euclid(TAU);
    if th > std::f64::consts::PI {
        th -= TAU;
    }
    if th == 0.0 {
        let (z, e) = hurwitz_zeta(s, start as f64 + 0.5);
        return (Complex64::new(z, 0.0), e);
    }
    if th.abs() < 0.05 {
        let (value, err) = abel_plana_sum(th.abs(), s, start);
        return (if th < 0.0 { value.conj() } else { value }, err);
    }

    let z = Complex64::from_polar(1.0, th);
    let inv = 1.0 / (Complex64::new(1.0, 0.0) - z).norm();
    let mut plan: Option<(u64, usize, f64)> = None;
    let mut a = start.max(32).next_power_of_two();
    loop {
        let mut best_here = (1usize, f64::INFINITY);
        for m in 1..=36usize {
            let env = pochhammer(s, m) * hurwitz_zeta(s + m as f64, a as f64 + 0.5).0;
            let noise =
                (2.0 * inv.max(1.0)).powi(m as i32) * f64::EPSILON * (a as f64 + 0.5).powf(-s);
            let e = env * inv.powi(m as i32) + noise;
            if e < best_here.1 {
                best_here = (m, e);
            }
        }
        if plan.map_or(true, |p| best_here.1 < p.2) {
            plan = Some((a, best_here.0, best_here.1));
        }
        if best_here.1 <= target_abs || a >= (1 << 17) {
            break;
        }
        a *= 2;
    }
    let (a, levels, _) = plan.expect("at least one plan candidate");

    let mut prefix = Complex64::new(0.0, 0.0);
    for l in start..a {
        prefix += Complex64::from_polar((l as f64 + 0.5).powf(-s), th * l as f64);
    }
    let prefix_noise = (a - start) as f64 * f64::EPSILON * (start as f64 + 0.5).powf(-s);

    let mut g = |l: u64| Complex64::new((l as f64 + 0.5).powf(-s), 0.0);
    let env = |m: usize, at: u64| pochhammer(s, m) * hurwitz_zeta(s + m as f64, at as f64 + 0.5).0;
    let (tail, tail_err) = abel_osc_sum(th, a, levels, &mut g, &env);
    (prefix + tail, tail_err + prefix_noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hurwitz_matches_brute_force() {
        for &(s, x) in &[(2.0, 1.0), (1.5, 3.5), (2.7, 0.25), (11.0, 4.5)] {
            let brute: f64 = (0..40_000_000u64).map(|k| (x + k as f64).powf(-s)).sum::<f64>()
                + (x + 40_000_000.0).powf(1.0 - s) / (s - 1.0);
            let (value, err) = hurwitz_zeta(s, x);
            assert!(
                (value - brute).abs() <= err + 1e-9 * brute.abs(),
                "s={s} x={x}: {value} vs {brute}"
            );
        }
    }

    #[test]
    fn lattice_sum_small_phase_matches_brute_force() {
        let theta = 0.01;
        let s = 2.3;
        let brute: Complex64 = (2..10_000_000u64)
            .map(|l| Complex64::from_polar((l as f64 + 0.5).powf(-s), theta * l as f64))
            .sum();
        // Abel bound on the discarded remainder: q(N) / |1 - e^{i theta}|.
        let rem = (1e7 + 0.5f64).powf(-s) / theta;
        let (value, err) = osc_lattice_sum(theta, s, 2, 1e-12);
        assert!(err < 1e-9, "error bound too weak: {err}");
        assert!((value - brute).norm() <= err + rem + 1e-11);
    }

    #[test]
    fn lattice_sum_small_phase_high_orders() {
        // High orders at a tiny phase concentrate the Abel-Plana ray
        // integral near its endpoint; the brute sums converge absolutely in
        // a few hundred terms, so they are exact oracles here.
        for s in [10.0f64, 12.0, 15.0, 19.0] {
            let theta = 0.0025;
            let brute: Complex64 = (2..4000u64)
                .map(|l| Complex64::from_polar((l as f64 + 0.5).powf(-s), theta * l as f64))
                .sum();
            let (value, err) = osc_lattice_sum(theta, s, 2, 1e-14);
            assert!(
                (value - brute).norm() <= err + 1e-15,
                "s={s}: {value} vs {brute} (err {err:.2e})"
            );
        }
    }

    #[test]
    fn cell_tail_matches_brute_force() {
        // Oracle: sum the cell integrals of P(h) (h + l)^{-s} directly with
        // fine Simpson panels, far enough out that the remainder bracket is
        // below the bound under test.
        let profile = |h: f64| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * h).cos();
        let simpson_cell = |l: f64, s: f64| {
            let n = 400;
            let h = 1.0 / n as f64;
            let f = |x: f64| profile(x) * (x + l).powf(-s);
            let mut acc = f(0.0) + f(1.0);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(k as f64 * h);
            }
            acc * h / 3.0
        };
        for &s in &[1.7, 2.0, 2.9] {
            let mut moments = Vec::new();
            for r in 0..18 {
                let m = simpson_cell_moment(&profile, r);
                moments.push(m);
            }
            let mut brute = 0.0;
            for l in 2..40_000u64 {
                brute += simpson_cell(l as f64, s);
            }
            // Dropped cells: the profile has unit mean and its oscillating
            // part cancels to O(L^{-s-2}) per cell, so Euler-Maclaurin on
            // (l + 1/2)^{-s} covers the remainder to ~1e-9 absolute.
            brute += (40_000.5f64).powf(1.0 - s) / (s - 1.0) + 0.5 * (40_000.5f64).powf(-s);
            let (value, err) = cell_tail_from_moments(s, &moments, 1.0, 2);
            assert!(
                (value - brute).abs() <= err + 1e-8 * brute,
                "s={s}: {value} vs {brute} (err {err:.2e})"
            );
        }
    }

    fn simpson_cell_moment(profile: &dyn Fn(f64) -> f64, r: usize) -> f64 {
        let n = 400;
        let h = 1.0 / n as f64;
        let f = |x: f64| profile(x) * (x - 0.5).powi(r as i32);
        let mut acc = f(0.0) + f(1.0);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn lattice_sum_branches_agree() {
        let theta = 0.3;
        let s = 2.0;
        let brute: Complex64 = (1..3_000_000u64)
            .map(|l| Complex64::from_polar((l as f64 + 0.5).powf(-s), theta * l as f64))
            .sum();
        let rem = (3e6 + 0.5f64).powf(-s) / (Complex64::from_polar(1.0, theta) - 1.0).norm();
        let (accel, accel_err) = osc_lattice_sum(theta, s, 1, 1e-12);
        let (contour, contour_err) = abel_plana_sum(theta, s, 1);
        assert!((accel - contour).norm() <= accel_err + contour_err + 1e-11);
        assert!((accel - brute).norm() <= accel_err + rem + 1e-11);
    }

    #[test]
    fn lattice_sum_zero_phase_is_hurwitz() {
        let (value, _) = osc_lattice_sum(0.0, 2.2, 3, 1e-12);
        assert_abs_diff_eq!(value.re, hurwitz_zeta(2.2, 3.5).0, epsilon = 1e-14);
        assert_eq!(value.im, 0.0);
    }

    #[test]
    fn lattice_sum_conjugates_under_phase_flip() {
        for &theta in &[0.02, 0.9] {
            let (plus, _) = osc_lattice_sum(theta, 1.6, 1, 1e-12);
            let (minus, _) = osc_lattice_sum(-theta, 1.6, 1, 1e-12);
            assert_abs_diff_eq!(plus.re, minus.re, epsilon = 1e-13);
            assert_abs_diff_eq!(plus.im, -minus.im, epsilon = 1e-13);
        }
    }

    #[test]
    fn abel_sum_matches_brute_force() {
        let theta = 1.3;
        let s = 2.2;
        let brute: Complex64 = (32..3_000_000u64)
            .map(|l| Complex64::from_polar((l as f64 + 0.5).powf(-s), theta * l as f64))
            .sum();
        let mut g = |l: u64| Complex64::new((l as f64 + 0.5).powf(-s), 0.0);
        let env = |m: usize, a: u64| {
            pochhammer(s, m) * hurwitz_zeta(s + m as f64, a as f64 + 0.5).0
        };
        let (value, err) = abel_osc_sum(theta, 32, 10, &mut g, &env);
        assert!(err < 1e-10, "error bound too weak: {err}");
        assert_abs_diff_eq!(value.re, brute.re, epsilon = 1e-8);
        assert_abs_diff_eq!(value.im, brute.im, epsilon = 1e-8);
    }
}
