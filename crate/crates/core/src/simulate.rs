//! Monte Carlo sampling of the modulated processes and the statistical
//! checks built on top of it.
//!
//! The sampler follows the classical compound-Poisson construction: jumps
//! smaller than a cutoff `r` are removed from the measure, the remainder has
//! finite mass `lambda_r`, and an increment of the truncated process is a
//! Poisson number of i.i.d. jumps drawn from the normalized restriction.
//! The characteristic function of that truncated process is known in closed
//! form (it is `exp(-t psi_r)` with the truncated exponent computed by
//! [`ExponentSpec::psi_truncated`]), so the empirical characteristic function
//! of the samples can be compared against an exact model rather than against
//! another approximation. The discarded small jumps can either be dropped
//! outright or replaced by a Gaussian with the matching variance, in which
//! case the model is the full exponent up to a bias of order `xi^4 r^{3-beta}`
//! that the comparison tolerances absorb.
//!
//! Jumps are drawn in the substituted variable `u = h / delta`, where the
//! one-sided density is `a(u) u^{-1-beta}` and independent of `delta`. A
//! monotone cubic Hermite table of the CDF covers the head of the range and
//! is inverted by a safeguarded Newton iteration; the build verifies its own
//! accuracy and fails loudly if the sup-norm error of the CDF cannot be
//! pushed below a fixed fraction of the total mass. Beyond the head the
//! density is sandwiched between power laws, and draws use rejection from an
//! exact Pareto proposal, so the far tail costs no table space at all.
//!
//! Each sample path gets its own counter-based RNG stream derived from the
//! plan seed. Streams are assigned by path index, not by worker thread, so a
//! run is bit-for-bit reproducible regardless of how the work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::coeff::PeriodicCoefficient;
use crate::error::{Error, Result};
use crate::exponent::ExponentSpec;
use crate::form::{form_direct_bilinear, FormValue, TestFunction};
use crate::measure::{LevyDensitySpec, ModulatedMeasure};
use crate::quad::{
    cell_tail_from_moments, gauss_panel, hurwitz_zeta, integrate_bounded, merge_points,
    QuadratureConfig,
};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Accuracy target for the jump table: the sup-norm error of the sampled CDF,
/// relative to the one-sided jump mass, must stay below this.
const CDF_TARGET: f64 = 1e-10;

/// Boundary between the tabulated head and the rejection-sampled far region,
/// in the substituted variable. Far cells start at this integer.
const FAR_START: u64 = 4;

/// Number of profile moments used for the far-region mass.
const TAIL_MOMENTS: usize = 18;

/// Jump cutoff used by the scaling-limit experiment, as a fraction of the
/// period cell.
const FDD_CUTOFF: f64 = 1.0 / 64.0;

/// What to do with the jumps below the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallJumpMode {
    /// Discard them. The sampled process is exactly the truncated one, so its
    /// characteristic function is `exp(-t psi_r)` with no bias at all.
    Drop,
    /// Replace them with a centered Gaussian whose variance matches the
    /// second moment of the discarded part. The samples then approximate the
    /// full process with a bias of order `xi^4 r^{3-beta} t`.
    GaussianSubstitute,
}

/// A fully validated description of one sampling run: the measure, the time
/// horizon, the sample count, the jump cutoff, the small-jump treatment, and
/// the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    measure: ModulatedMeasure,
    time: f64,
    n_samples: usize,
    jump_cutoff: f64,
    mode: SmallJumpMode,
    seed: u64,
}

impl SimulationPlan {
    /// Validates and freezes the parameters of a sampling run.
    ///
    /// The cutoff must be positive, at most an eighth of both the period cell
    /// and the unit ball (the table builder relies on the head region being
    /// genuinely wider than one cell), and strictly inside the support for a
    /// compactly supported density.
    pub fn new(
        measure: ModulatedMeasure,
        time: f64,
        n_samples: usize,
        jump_cutoff: f64,
        mode: SmallJumpMode,
        seed: u64,
    ) -> Result<Self> {
        if measure.dim() != 1 {
            return Err(Error::UnsupportedDimension {
                op: "increment sampling",
                dim: measure.dim(),
            });
        }
        if !time.is_finite() || time <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "time horizon must be positive and finite, got {time}"
            )));
        }
        if n_samples == 0 {
            return Err(Error::InvalidParameter(
                "sample count must be at least 1".into(),
            ));
        }
        if n_samples > 100_000_000 {
            return Err(Error::InvalidParameter(format!(
                "sample count {n_samples} exceeds the 1e8 budget"
            )));
        }
        let cap = measure.delta().min(1.0) / 8.0;
        if !jump_cutoff.is_finite() || jump_cutoff <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "jump cutoff must be positive and finite, got {jump_cutoff}"
            )));
        }
        if jump_cutoff > cap * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "jump cutoff {jump_cutoff} exceeds an eighth of the smaller of \
                 the period cell and the unit ball ({cap:.6e})"
            )));
        }
        if let LevyDensitySpec::TruncatedStable { radius, .. } = measure.density() {
            if jump_cutoff >= *radius {
                return Err(Error::InvalidParameter(format!(
                    "jump cutoff {jump_cutoff} is not below the support radius {radius}"
                )));
            }
        }
        Ok(Self {
            measure,
            time,
            n_samples,
            jump_cutoff,
            mode,
            seed,
        })
    }

    /// The modulated measure being sampled.
    pub fn measure(&self) -> &ModulatedMeasure {
        &self.measure
    }

    /// Time horizon of one increment.
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Number of independent increments to draw.
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Jump sizes below this are removed from the measure.
    pub fn jump_cutoff(&self) -> f64 {
        self.jump_cutoff
    }

    /// Treatment of the removed small jumps.
    pub fn small_jump_mode(&self) -> SmallJumpMode {
        self.mode
    }

    /// Base seed; path `k` uses RNG stream `k + 1` on top of it.
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Rising factorial `s (s+1) ... (s+m-1)`.
fn rising(s: f64, m: usize) -> f64 {
    (0..m).map(|k| s + k as f64).product()
}

/// Upper bound for the k-th derivative of the coefficient on the line.
/// Only the bounded kinds ever reach the sampler.
fn coeff_deriv_bound(a: &PeriodicCoefficient, k: usize) -> f64 {
    match a {
        PeriodicCoefficient::Constant { level } => {
            if k == 0 {
                *level
            } else {
                0.0
            }
        }
        PeriodicCoefficient::SmoothCosine { offset, amplitude } => {
            if k == 0 {
                offset + amplitude.abs()
            } else {
                amplitude.abs() * TAU.powi(k as i32)
            }
        }
        _ => f64::INFINITY,
    }
}

/// Inverse-CDF table for the one-sided jump density in the substituted
/// variable, plus the rejection sampler for the far region.
///
/// `knots`, `cdf` and `pdf` describe the head `[cutoff/delta, far edge]`:
/// `cdf[i]` is the exact-to-target mass below `knots[i]`, and the density is
/// interpolated between knots by the cubic Hermite matching `pdf` at both
/// ends. `head_mass + far_mass` is the one-sided mass of the whole truncated
/// measure in the substituted variable.
#[derive(Debug, Clone)]
struct JumpTable {
    knots: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
    head_mass: f64,
    far_mass: f64,
    far_edge: f64,
    beta: f64,
    a_sup: f64,
    coeff: PeriodicCoefficient,
    delta: f64,
    lambda_half: f64,
    sup_err: f64,
}

impl JumpTable {
    fn build(measure: &ModulatedMeasure, cutoff: f64, cfg: &QuadratureConfig) -> Result<Self> {
        let coeff = measure.coefficient().clone();
        if !coeff.is_bounded() {
            return Err(Error::TableBuildFailure(
                "the coefficient is unbounded at lattice points; the jump CDF cannot be \
                 tabulated to its accuracy target near an integrable singularity"
                    .into(),
            ));
        }
        let (beta, compact_radius) = match measure.density() {
            LevyDensitySpec::StableLike { beta } => (*beta, None),
            LevyDensitySpec::TruncatedStable { beta, radius } => (*beta, Some(*radius)),
            LevyDensitySpec::ProfiledStable { .. } => {
                return Err(Error::TableBuildFailure(
                    "the profiled density carries singular factors that the jump CDF \
                     table cannot resolve to its accuracy target"
                        .into(),
                ));
            }
        };
        let delta = measure.delta();
        let s = 1.0 + beta;
        let u_lo = cutoff / delta;
        let u_hi = match compact_radius {
            Some(radius) => radius / delta,
            None => FAR_START as f64,
        };
        let a_sup = coeff
            .range()
            .1
            .expect("bounded coefficient kinds report a finite supremum");
        let g = |u: f64| coeff.eval(u).or_infinite() * u.powf(-s);

        let (far_mass, far_err) = if compact_radius.is_none() {
            far_cell_mass(&coeff, s, cfg)?
        } else {
            (0.0, 0.0)
        };

        let breaks = coeff.breakpoints_in(u_lo, u_hi, 1.0);
        let mut mass_estimate = coarse_mass(&g, u_lo, u_hi) + far_mass;
        for attempt in 0..2 {
            let head = build_head(&g, &coeff, s, u_lo, u_hi, &breaks, mass_estimate)?;
            let head_mass = *head.cdf.last().expect("head table is never empty");
            let total = head_mass + far_mass;
            let sup_err = 1.3 * head.herm_max + head.gl_sum + far_err;
            if sup_err <= CDF_TARGET * total {
                return Ok(Self {
                    knots: head.knots,
                    cdf: head.cdf,
                    pdf: head.pdf,
                    head_mass,
                    far_mass,
                    far_edge: u_hi,
                    beta,
                    a_sup,
                    coeff,
                    delta,
                    lambda_half: delta.powf(-beta) * total,
                    sup_err: sup_err / total,
                });
            }
            if attempt == 0 && total < mass_estimate {
                mass_estimate = total;
                continue;
            }
            return Err(Error::TableBuildFailure(format!(
                "jump CDF accuracy stalled at {:.3e} relative, above the {CDF_TARGET:.0e} target",
                sup_err / total
            )));
        }
        unreachable!("the retry loop either returns or errors");
    }

    /// One signed jump in physical units.
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let m = rng.random::<f64>() * (self.head_mass + self.far_mass);
        let u = if m <= self.head_mass {
            self.invert_head(m)
        } else {
            self.draw_far(rng)
        };
        let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        sign * self.delta * u
    }

    /// Inverts the tabulated CDF at mass level `m` by a safeguarded Newton
    /// iteration on the cubic Hermite interpolant of one cell.
    fn invert_head(&self, m: f64) -> f64 {
        let idx = self.cdf.partition_point(|&c| c < m);
        let i = idx.max(1).min(self.knots.len() - 1) - 1;
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let w = x1 - x0;
        let mass = self.cdf[i + 1] - self.cdf[i];
        let (d0, d1) = (self.pdf[i] * w, self.pdf[i + 1] * w);
        let target = m - self.cdf[i];
        // Cumulative mass of the Hermite cell over [0, t] in cell units.
        let cum = |t: f64| {
            let t2 = t * t;
            mass * t2 * (3.0 - 2.0 * t) + t * (1.0 - t) * (d0 * (1.0 - t) - d1 * t)
        };
        let density = |t: f64| {
            let omt = 1.0 - t;
            mass * 6.0 * t * omt + d0 * omt * (1.0 - 3.0 * t) + d1 * t * (3.0 * t - 2.0)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = if mass > 0.0 {
            (target / mass).clamp(0.0, 1.0)
        } else {
            0.5
        };
        for _ in 0..80 {
            let f = cum(t) - target;
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if f.abs() <= 1e-16 * mass.max(1e-300) || hi - lo <= 1e-15 {
                break;
            }
            let d = density(t);
            let mut next = if d > 0.0 { t - f / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            t = next;
        }
        x0 + t * w
    }

    /// Pareto-proposal rejection sampler for the far region `[far edge, inf)`.
    ///
    /// The proposal has density proportional to `u^{-s}` and is inverted in
    /// closed form; acceptance is `a(u) / sup a`, at least one half for every
    /// admissible coefficient, so the expected number of proposals is at most
    /// two.
    fn draw_far(&self, rng: &mut ChaCha8Rng) -> f64 {
        let l0 = self.far_edge;
        loop {
            let v = 1.0 - rng.random::<f64>();
            let u = l0 * v.powf(-1.0 / self.beta);
            if !u.is_finite() {
                continue;
            }
            let a = self.coeff.eval(u).or_infinite();
            if rng.random::<f64>() * self.a_sup <= a {
                return u;
            }
        }
    }

    /// Tabulated head mass below `u`, for test oracles.
    #[cfg(test)]
    fn head_cdf_at(&self, u: f64) -> f64 {
        if u <= self.knots[0] {
            return 0.0;
        }
        if u >= *self.knots.last().unwrap() {
            return self.head_mass;
        }
        let idx = self.knots.partition_point(|&k| k < u);
        let i = idx.max(1) - 1;
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let w = x1 - x0;
        let t = (u - x0) / w;
        let mass = self.cdf[i + 1] - self.cdf[i];
        let (d0, d1) = (self.pdf[i] * w, self.pdf[i + 1] * w);
        let cum = mass * t * t * (3.0 - 2.0 * t) + t * (1.0 - t) * (d0 * (1.0 - t) - d1 * t);
        self.cdf[i] + cum
    }
}

struct HeadTable {
    knots: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
    gl_sum: f64,
    herm_max: f64,
}

/// Coarse first pass over the head mass, used only to set error budgets.
fn coarse_mass(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 160;
    let ratio = (hi / lo).powf(1.0 / n as f64);
    let mut total = 0.0;
    let mut left = lo;
    for _ in 0..n {
        let right = (left * ratio).min(hi);
        total += gauss_panel(g, left, right).0;
        left = right;
    }
    total
}

/// Mass of the far region `[FAR_START, inf)` of `a(u) u^{-s}`, summed cell by
/// cell through the periodic moment expansion, with the quadrature error of
/// each moment propagated through the expansion coefficients.
fn far_cell_mass(
    coeff: &PeriodicCoefficient,
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let tight = QuadratureConfig {
        rel_tol: cfg.rel_tol.min(1e-12),
        abs_tol: cfg.abs_tol.min(1e-14),
        ..*cfg
    };
    let breaks = coeff.breakpoints_in(0.0, 1.0, 1.0);
    let mut moments = Vec::with_capacity(TAIL_MOMENTS);
    let mut moment_errs = Vec::with_capacity(TAIL_MOMENTS);
    for r in 0..TAIL_MOMENTS {
        let f = |h: f64| coeff.eval(h).or_infinite() * (h - 0.5).powi(r as i32);
        let (v, e) = integrate_bounded(&f, 0.0, 1.0, &breaks, &tight)
            .expect_converged("far-region profile moment")?;
        moments.push(v);
        moment_errs.push(e);
    }
    let (value, mut err) = cell_tail_from_moments(s, &moments, moments[0].abs(), FAR_START);
    let mut coef = 1.0f64;
    for (r, &me) in moment_errs.iter().enumerate() {
        err += coef.abs() * me * hurwitz_zeta(s + r as f64, FAR_START as f64 + 0.5).0;
        coef *= -(s + r as f64) / (r as f64 + 1.0);
    }
    Ok((value, err))
}

/// Builds the head table between `u_lo` and `u_hi`: seeds knots from a
/// fourth-derivative bound so the Hermite cells start near their budget, then
/// refines every cell until both the Hermite interpolation error and the
/// quadrature error of its mass are within budget.
fn build_head(
    g: &dyn Fn(f64) -> f64,
    coeff: &PeriodicCoefficient,
    s: f64,
    u_lo: f64,
    u_hi: f64,
    breaks: &[f64],
    mass_estimate: f64,
) -> Result<HeadTable> {
    let herm_budget = 0.35 * CDF_TARGET * mass_estimate;
    let gl_scale = 0.15 * CDF_TARGET;
    let gl_floor = 1e-6 * herm_budget;

    // Bound on the fourth derivative of a(u) u^{-s} via the product rule.
    let fourth = |u: f64| -> f64 {
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        let mut acc = 0.0;
        for (k, b) in binom.iter().enumerate() {
            let a_k = coeff_deriv_bound(coeff, k);
            if a_k > 0.0 {
                acc += b * a_k * rising(s, 4 - k) * u.powf(-(s + (4 - k) as f64));
            }
        }
        acc
    };
    let oscillating = coeff_deriv_bound(coeff, 1) > 0.0;

    let mut seeds = vec![u_lo];
    let mut x = u_lo;
    while x < u_hi {
        let bound = fourth(x).max(1e-300);
        let mut h = 0.8 * (384.0 * herm_budget / bound).powf(0.25);
        if oscillating {
            // Never step past a quarter period, or the derivative bound
            // stops seeing the oscillation.
            h = h.min(0.29);
        }
        h = h.min(0.25 * x).max(1e-9 * x);
        x = (x + h).min(u_hi);
        seeds.push(x);
        if seeds.len() > 400_000 {
            return Err(Error::TableBuildFailure(
                "knot budget exhausted while seeding the jump CDF table".into(),
            ));
        }
    }
    let seeds = merge_points(seeds, breaks.to_vec());

    let mut table = HeadTable {
        knots: vec![seeds[0]],
        cdf: vec![0.0],
        pdf: vec![g(seeds[0])],
        gl_sum: 0.0,
        herm_max: 0.0,
    };
    let mut d_left = table.pdf[0];
    for w in seeds.windows(2) {
        let d_right = g(w[1]);
        refine_cell(
            g, w[0], w[1], d_left, d_right, herm_budget, gl_scale, gl_floor, 0, &mut table,
        )?;
        d_left = d_right;
    }
    Ok(table)
}

/// Accepts or bisects one candidate cell. On acceptance the cell's mass
/// (15-point Gauss over both halves) and right-edge density are appended.
#[allow(clippy::too_many_arguments)]
fn refine_cell(
    g: &dyn Fn(f64) -> f64,
    x0: f64,
    x1: f64,
    d0: f64,
    d1: f64,
    herm_budget: f64,
    gl_scale: f64,
    gl_floor: f64,
    depth: u32,
    table: &mut HeadTable,
) -> Result<()> {
    let mid = 0.5 * (x0 + x1);
    let (left, le, _) = gauss_panel(g, x0, mid);
    let (right, re, _) = gauss_panel(g, mid, x1);
    let mass = left + right;
    let gl_err = le + re;
    let w = x1 - x0;
    // Half-cell mass of the Hermite interpolant, compared against the
    // quadrature of the true density over the same half.
    let herm_mid = 0.5 * mass + (d0 - d1) * w / 8.0;
    let herm_err = (herm_mid - left).abs();
    let at_floor = w <= 1e-13 * x1.abs() || depth >= 48;
    if !at_floor && (herm_err > herm_budget || gl_err > gl_scale * mass + gl_floor) {
        let dm = g(mid);
        refine_cell(
            g, x0, mid, d0, dm, herm_budget, gl_scale, gl_floor, depth + 1, table,
        )?;
        refine_cell(
            g, mid, x1, dm, d1, herm_budget, gl_scale, gl_floor, depth + 1, table,
        )?;
        return Ok(());
    }
    table.gl_sum += gl_err;
    table.herm_max = table.herm_max.max(herm_err);
    table.knots.push(x1);
    table.pdf.push(d1);
    let last = *table.cdf.last().expect("cdf starts non-empty");
    table.cdf.push(last + mass);
    Ok(())
}

/// One batch of independent increments of the truncated process, along with
/// the diagnostics needed to audit it.
#[derive(Debug, Clone)]
pub struct IncrementSample {
    values: Vec<f64>,
    jump_counts: Vec<u64>,
    plan: SimulationPlan,
    jump_rate: f64,
    small_jump_sd: f64,
    cdf_sup_error: f64,
}

impl IncrementSample {
    /// The sampled increments, one per path, in path order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of jumps on each path, aligned with [`values`](Self::values).
    pub fn jump_counts(&self) -> &[u64] {
        &self.jump_counts
    }

    /// The plan that produced this sample.
    pub fn plan(&self) -> &SimulationPlan {
        &self.plan
    }

    /// Total jump intensity `lambda_r` of the truncated measure.
    pub fn jump_rate(&self) -> f64 {
        self.jump_rate
    }

    /// Standard deviation of the Gaussian substitute over the full horizon;
    /// zero when small jumps are dropped.
    pub fn small_jump_sd(&self) -> f64 {
        self.small_jump_sd
    }

    /// Verified relative sup-norm error of the jump CDF table.
    pub fn cdf_sup_error(&self) -> f64 {
        self.cdf_sup_error
    }

    /// Fraction of paths that saw no jump at all.
    pub fn zero_jump_fraction(&self) -> f64 {
        let zeros = self.jump_counts.iter().filter(|&&c| c == 0).count();
        zeros as f64 / self.jump_counts.len() as f64
    }

    /// Z-score of an odd sample moment against zero; the sampled law is
    /// symmetric, so these should be noise.
    pub fn odd_moment_zscore(&self, power: u32) -> f64 {
        let n = self.values.len() as f64;
        let (mut mean, mut m2) = (0.0f64, 0.0f64);
        for (i, &x) in self.values.iter().enumerate() {
            let y = x.powi(power as i32);
            let d = y - mean;
            mean += d / (i as f64 + 1.0);
            m2 += d * (y - mean);
        }
        let sd = (m2 / (n * (n - 1.0).max(1.0))).sqrt();
        if mean == 0.0 {
            0.0
        } else {
            mean.abs() / sd.max(1e-300)
        }
    }
}

/// Mean and three-sigma half-width of the mean over an iterator of samples.
fn mean_ci3(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut mean, mut m2, mut n) = (0.0f64, 0.0f64, 0u64);
    for x in values {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var_mean = m2 / ((n - 1) as f64 * n as f64);
    (mean, 3.0 * var_mean.sqrt())
}

/// Draws the increments described by `plan`.
///
/// Builds the verified jump table, then runs the paths in parallel. Path `k`
/// seeds its own RNG stream `k + 1`, so the output is identical for any
/// thread count.
pub fn sample_increments(plan: &SimulationPlan, cfg: &QuadratureConfig) -> Result<IncrementSample> {
    cfg.validate();
    let table = JumpTable::build(plan.measure(), plan.jump_cutoff(), cfg)?;
    let jump_rate = 2.0 * table.lambda_half;
    let expected = plan.time() * jump_rate;
    if expected > 1e7 {
        return Err(Error::InvalidParameter(format!(
            "expected jump count per path is {expected:.3e}; refusing budgets beyond 1e7"
        )));
    }
    let poisson = Poisson::new(expected).map_err(|e| {
        Error::InvalidParameter(format!("invalid Poisson intensity {expected:.6e}: {e}"))
    })?;
    let small_jump_sd = match plan.small_jump_mode() {
        SmallJumpMode::Drop => 0.0,
        SmallJumpMode::GaussianSubstitute => {
            let (variance, _) = plan
                .measure()
                .second_moment_below(plan.jump_cutoff(), cfg)
                .expect_converged("small-jump variance")?;
            (plan.time() * variance).sqrt()
        }
    };
    let normal = Normal::new(0.0, small_jump_sd).map_err(|e| {
        Error::InvalidParameter(format!("invalid Gaussian substitute width: {e}"))
    })?;
    let use_gaussian = plan.small_jump_mode() == SmallJumpMode::GaussianSubstitute;
    let seed = plan.seed();
    let rows: Vec<(f64, u64)> = (0..plan.n_samples())
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            let jumps = poisson.sample(&mut rng) as u64;
            let mut x = 0.0;
            for _ in 0..jumps {
                x += table.draw(&mut rng);
            }
            if use_gaussian {
                x += normal.sample(&mut rng);
            }
            (x, jumps)
        })
        .collect();
    let values = rows.iter().map(|r| r.0).collect();
    let jump_counts = rows.iter().map(|r| r.1).collect();
    Ok(IncrementSample {
        values,
        jump_counts,
        plan: plan.clone(),
        jump_rate,
        small_jump_sd,
        cdf_sup_error: table.sup_err,
    })
}

/// One frequency of the characteristic-function comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CfRow {
    /// Frequency where the characteristic functions are compared.
    pub xi: f64,
    /// Sample mean of `cos(xi X)`.
    pub empirical: f64,
    /// Model value `exp(-t psi)` with the exponent matching the plan's
    /// small-jump mode.
    pub model: f64,
    /// Three-sigma half-width of the empirical mean.
    pub ci_half: f64,
    /// Whether the model lies within the confidence band plus its own error.
    pub inside: bool,
    /// Magnitude of the sample mean of `sin(xi X)`; the law is symmetric, so
    /// this is pure noise.
    pub imag_abs: f64,
    /// Three-sigma half-width of the imaginary part.
    pub imag_ci: f64,
}

/// Empirical characteristic function of a sample against its exact model.
#[derive(Debug, Clone, PartialEq)]
pub struct CfCheckResult {
    /// One row per requested frequency.
    pub rows: Vec<CfRow>,
    /// Largest imaginary component seen across the grid.
    pub max_imag_abs: f64,
}

impl CfCheckResult {
    /// True when every frequency is inside its confidence band.
    pub fn all_inside(&self) -> bool {
        self.rows.iter().all(|r| r.inside)
    }

    /// Fraction of frequencies inside their confidence bands.
    pub fn pass_fraction(&self) -> f64 {
        let hits = self.rows.iter().filter(|r| r.inside).count();
        hits as f64 / self.rows.len() as f64
    }

    /// True when every imaginary part is within its own confidence band of
    /// zero.
    pub fn imag_within_ci(&self) -> bool {
        self.rows.iter().all(|r| r.imag_abs <= r.imag_ci)
    }
}

/// Compares the empirical characteristic function of `sample` against the
/// exact model on `xi_grid`.
///
/// In [`SmallJumpMode::Drop`] the model is the truncated exponent and the
/// comparison is exact up to Monte Carlo noise; with the Gaussian substitute
/// the model is the full exponent and the small-jump bias is left to the
/// band, which is the right test of whether the substitute is doing its job.
pub fn empirical_cf(
    sample: &IncrementSample,
    xi_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<CfCheckResult> {
    if xi_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "characteristic-function grid is empty".into(),
        ));
    }
    if xi_grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "characteristic-function grid contains non-finite frequencies".into(),
        ));
    }
    let spec = ExponentSpec::new(sample.plan().measure().clone(), cfg)?;
    let t = sample.plan().time();
    let r = sample.plan().jump_cutoff();
    let mut rows = Vec::with_capacity(xi_grid.len());
    for &xi in xi_grid {
        let (psi, psi_err) = match sample.plan().small_jump_mode() {
            SmallJumpMode::Drop => spec.psi_truncated(xi, r)?,
            SmallJumpMode::GaussianSubstitute => spec.psi(xi)?,
        };
        let model = (-t * psi).exp();
        let model_err = t * model * psi_err;
        let (empirical, ci_half) = mean_ci3(sample.values().iter().map(|&x| (xi * x).cos()));
        let (imag, imag_ci) = mean_ci3(sample.values().iter().map(|&x| (xi * x).sin()));
        rows.push(CfRow {
            xi,
            empirical,
            model,
            ci_half,
            inside: (empirical - model).abs() <= ci_half + model_err,
            imag_abs: imag.abs(),
            imag_ci,
        });
    }
    let max_imag_abs = rows.iter().map(|r| r.imag_abs).fold(0.0, f64::max);
    Ok(CfCheckResult { rows, max_imag_abs })
}

/// One scale of the rescaling identity check.
#[derive(Debug, Clone)]
pub struct RescalingRow {
    /// Spatial scale of this row.
    pub epsilon: f64,
    /// `eps^{1-alpha}` times the form of the dilated pair under the
    /// period-one measure.
    pub lhs: FormValue,
    /// Form of the original pair under the period-`eps` measure.
    pub rhs: FormValue,
    /// Relative deviation between the two sides.
    pub rel_dev: f64,
}

/// Outcome of the rescaling identity check across a grid of scales.
#[derive(Debug, Clone)]
pub struct RescalingReport {
    /// One row per scale, in input order.
    pub rows: Vec<RescalingRow>,
}

impl RescalingReport {
    /// True when both sides agree within their combined error bars at every
    /// scale.
    pub fn agrees_everywhere(&self) -> bool {
        self.rows.iter().all(|r| r.lhs.agrees_with(&r.rhs))
    }

    /// Largest relative deviation across the grid.
    pub fn max_rel_dev(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_dev).fold(0.0, f64::max)
    }

    /// True when every relative deviation is at most `tol`.
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_dev() <= tol
    }
}

/// Checks the exact scaling identity tying dilated test functions to a
/// rescaled period: `eps^{1-alpha} E_1(u(eps x), v(eps x))` must equal the
/// form of `(u, v)` under the same coefficient with period `eps`.
///
/// Both sides are evaluated by the direct double integral, so this exercises
/// the substitution `x -> x / eps` end to end with no shared code path.
pub fn rescaling_identity_check(
    a: &PeriodicCoefficient,
    alpha: f64,
    eps_grid: &[f64],
    u: &TestFunction,
    v: &TestFunction,
    cfg: &QuadratureConfig,
) -> Result<RescalingReport> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidParameter("scale grid is empty".into()));
    }
    let density = LevyDensitySpec::stable_like(alpha)?;
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scales must be positive and finite, got {eps}"
            )));
        }
        let unit = ModulatedMeasure::new(a.clone(), density.clone(), 1.0)?;
        let lhs_raw = form_direct_bilinear(&u.dilated(eps), &v.dilated(eps), &unit, cfg)?;
        let scale = eps.powf(1.0 - alpha);
        let lhs = FormValue {
            value: scale * lhs_raw.value,
            error: scale * lhs_raw.error,
            method: lhs_raw.method,
        };
        let scaled = ModulatedMeasure::new(a.clone(), density.clone(), eps)?;
        let rhs = form_direct_bilinear(u, v, &scaled, cfg)?;
        let denom = lhs.value.abs().max(rhs.value.abs()).max(1e-300);
        let rel_dev = (lhs.value - rhs.value).abs() / denom;
        rows.push(RescalingRow {
            epsilon: eps,
            lhs,
            rhs,
            rel_dev,
        });
    }
    Ok(RescalingReport { rows })
}

/// One `(scale, time, frequency)` cell of the scaling-limit experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct FddRow {
    /// Spatial scale of the rescaled process.
    pub epsilon: f64,
    /// Macroscopic time of the increment.
    pub t: f64,
    /// Frequency where the marginal law is probed.
    pub xi: f64,
    /// Sample mean of `cos(xi eps X(t eps^{-alpha}))`.
    pub empirical: f64,
    /// Limit value `exp(-t abar psi_stable(xi))`.
    pub limit: f64,
    /// Three-sigma half-width of the empirical mean.
    pub ci_half: f64,
    /// Whether the limit lies inside the band plus its own error.
    pub inside: bool,
}

/// Factorization check of the joint law over two increments.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationRow {
    /// Scale the check ran at.
    pub epsilon: f64,
    /// The two observation times, `t1 < t2`.
    pub times: (f64, f64),
    /// The frequency attached to each observation.
    pub frequencies: (f64, f64),
    /// Sample mean of `cos(xi1 x(t1) + xi2 x(t2))`.
    pub joint: f64,
    /// Real part of the product of the two increment characteristic
    /// functions.
    pub product: f64,
    /// Statistical tolerance combining all five sample means involved.
    pub tolerance: f64,
    /// Whether the joint value matches the product within tolerance.
    pub inside: bool,
}

/// Results of the scaling-limit experiment.
#[derive(Debug, Clone)]
pub struct FddReport {
    /// One row per `(scale, time, frequency)`, scales in input order.
    pub rows: Vec<FddRow>,
    /// Independence checks at the smallest scale.
    pub factorization: Vec<FactorizationRow>,
    /// Mean of the coefficient, fixed by the limit law.
    pub mean_coefficient: f64,
}

impl FddReport {
    /// The smallest scale in the experiment.
    pub fn final_epsilon(&self) -> f64 {
        self.rows.last().map(|r| r.epsilon).unwrap_or(f64::NAN)
    }

    /// Rows belonging to the smallest scale.
    pub fn final_rows(&self) -> Vec<&FddRow> {
        let eps = self.final_epsilon();
        self.rows.iter().filter(|r| r.epsilon == eps).collect()
    }

    /// True when every row at the smallest scale is inside its band.
    pub fn final_all_inside(&self) -> bool {
        self.final_rows().iter().all(|r| r.inside)
    }

    /// True when every factorization check passed.
    pub fn factorization_all_inside(&self) -> bool {
        self.factorization.iter().all(|r| r.inside)
    }

    /// Worst absolute deviation from the limit at each scale, in input
    /// order.
    pub fn per_epsilon_worst_dev(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for row in &self.rows {
            let dev = (row.empirical - row.limit).abs();
            match out.last_mut() {
                Some(last) if last.0 == row.epsilon => last.1 = last.1.max(dev),
                _ => out.push((row.epsilon, dev)),
            }
        }
        out
    }
}

/// One step of the splitmix64 sequence, used to derive independent sub-seeds.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Simulates the rescaled processes `eps X(t eps^{-alpha})` down a sequence
/// of scales and compares their marginal characteristic functions against
/// the stable law with the averaged coefficient, then checks that the joint
/// law over two increments factorizes at the smallest scale.
///
/// The process is sampled at period one: by the exact rescaling identity the
/// law of the rescaled process equals that of the period-`eps` process, so a
/// single table per `(scale, time)` pair suffices.
#[allow(clippy::too_many_arguments)]
pub fn fdd_convergence_experiment(
    a: &PeriodicCoefficient,
    alpha: f64,
    eps_sequence: &[f64],
    t_grid: &[f64],
    xi_grid: &[f64],
    n_samples: usize,
    seed: u64,
    cfg: &QuadratureConfig,
) -> Result<FddReport> {
    if a.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            op: "scaling-limit experiment",
            dim: a.dim(),
        });
    }
    if eps_sequence.is_empty() || t_grid.is_empty() || xi_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "scales, times and frequencies must all be non-empty".into(),
        ));
    }
    if eps_sequence.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "scales must be strictly decreasing".into(),
        ));
    }
    if eps_sequence
        .iter()
        .any(|&e| !e.is_finite() || e <= 0.0 || e > 1.0)
    {
        return Err(Error::InvalidParameter(
            "scales must lie in (0, 1]".into(),
        ));
    }
    if t_grid.iter().any(|&t| !t.is_finite() || t <= 0.0) {
        return Err(Error::InvalidParameter(
            "times must be positive and finite".into(),
        ));
    }
    if xi_grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "frequency grid contains non-finite entries".into(),
        ));
    }
    let density = LevyDensitySpec::stable_like(alpha)?;
    let abar = a.mean_exact();
    let stable = ExponentSpec::new(
        ModulatedMeasure::new(PeriodicCoefficient::constant(1.0)?, density.clone(), 1.0)?,
        cfg,
    )?;
    let psi_stable: Vec<(f64, f64)> = xi_grid
        .iter()
        .map(|&xi| stable.psi(xi))
        .collect::<Result<_>>()?;
    let measure = ModulatedMeasure::new(a.clone(), density, 1.0)?;

    let mut state = seed;
    let mut rows = Vec::new();
    for &eps in eps_sequence {
        for &t in t_grid {
            let horizon = t * eps.powf(-alpha);
            let plan = SimulationPlan::new(
                measure.clone(),
                horizon,
                n_samples,
                FDD_CUTOFF,
                SmallJumpMode::Drop,
                splitmix64(&mut state),
            )?;
            let sample = sample_increments(&plan, cfg)?;
            for (k, &xi) in xi_grid.iter().enumerate() {
                let (psi, psi_err) = psi_stable[k];
                let limit = (-t * abar * psi).exp();
                let limit_err = t * abar * limit * psi_err;
                let (empirical, ci_half) =
                    mean_ci3(sample.values().iter().map(|&x| (xi * eps * x).cos()));
                rows.push(FddRow {
                    epsilon: eps,
                    t,
                    xi,
                    empirical,
                    limit,
                    ci_half,
                    inside: (empirical - limit).abs() <= ci_half + limit_err,
                });
            }
        }
    }

    // Independence of increments at the smallest scale: the joint
    // characteristic function over (t1, t2) must factorize into the product
    // of the increment characteristic functions.
    let eps = *eps_sequence.last().expect("sequence checked non-empty");
    let t1 = t_grid[0];
    let t2 = match t_grid.iter().find(|&&t| t > t1) {
        Some(&t) => t,
        None => 2.0 * t1,
    };
    let (xi1, xi2) = (xi_grid[0], *xi_grid.last().expect("grid non-empty"));
    let scale_pow = eps.powf(-alpha);
    let plan1 = SimulationPlan::new(
        measure.clone(),
        t1 * scale_pow,
        n_samples,
        FDD_CUTOFF,
        SmallJumpMode::Drop,
        splitmix64(&mut state),
    )?;
    let plan2 = SimulationPlan::new(
        measure,
        (t2 - t1) * scale_pow,
        n_samples,
        FDD_CUTOFF,
        SmallJumpMode::Drop,
        splitmix64(&mut state),
    )?;
    let y1 = sample_increments(&plan1, cfg)?;
    let y2 = sample_increments(&plan2, cfg)?;
    let (joint, joint_ci) = mean_ci3(
        y1.values()
            .iter()
            .zip(y2.values())
            .map(|(&a1, &a2)| (xi1 * eps * a1 + xi2 * eps * (a1 + a2)).cos()),
    );
    let theta1 = (xi1 + xi2) * eps;
    let theta2 = xi2 * eps;
    let (re1, re1_ci) = mean_ci3(y1.values().iter().map(|&x| (theta1 * x).cos()));
    let (im1, im1_ci) = mean_ci3(y1.values().iter().map(|&x| (theta1 * x).sin()));
    let (re2, re2_ci) = mean_ci3(y2.values().iter().map(|&x| (theta2 * x).cos()));
    let (im2, im2_ci) = mean_ci3(y2.values().iter().map(|&x| (theta2 * x).sin()));
    let product = re1 * re2 - im1 * im2;
    let tolerance = joint_ci
        + re2.abs() * re1_ci
        + re1.abs() * re2_ci
        + im2.abs() * im1_ci
        + im1.abs() * im2_ci
        + re1_ci * re2_ci
        + im1_ci * im2_ci;
    let factorization = vec![FactorizationRow {
        epsilon: eps,
        times: (t1, t2),
        frequencies: (xi1, xi2),
        joint,
        product,
        tolerance,
        inside: (joint - product).abs() <= tolerance,
    }];
    Ok(FddReport {
        rows,
        factorization,
        mean_coefficient: abar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_singular;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn tent() -> TestFunction {
        TestFunction::tent(0.0, 1.0).unwrap()
    }

    fn plan_for(
        coeff: PeriodicCoefficient,
        beta: f64,
        delta: f64,
        time: f64,
        n: usize,
        cutoff: f64,
        mode: SmallJumpMode,
        seed: u64,
    ) -> SimulationPlan {
        let m = ModulatedMeasure::new(coeff, LevyDensitySpec::stable_like(beta).unwrap(), delta)
            .unwrap();
        SimulationPlan::new(m, time, n, cutoff, mode, seed).unwrap()
    }

    #[test]
    fn plan_validation_rejects_bad_parameters() {
        let m = ModulatedMeasure::new(
            PeriodicCoefficient::constant(1.0).unwrap(),
            LevyDensitySpec::stable_like(1.0).unwrap(),
            0.5,
        )
        .unwrap();
        let ok = SimulationPlan::new(m.clone(), 1.0, 10, 1.0 / 16.0, SmallJumpMode::Drop, 7);
        assert!(ok.is_ok());
        assert!(SimulationPlan::new(m.clone(), 0.0, 10, 0.05, SmallJumpMode::Drop, 7).is_err());
        assert!(SimulationPlan::new(m.clone(), 1.0, 0, 0.05, SmallJumpMode::Drop, 7).is_err());
        assert!(SimulationPlan::new(m.clone(), 1.0, 10, 0.0, SmallJumpMode::Drop, 7).is_err());
        // An eighth of the period cell is the widest admissible cutoff.
        assert!(SimulationPlan::new(m.clone(), 1.0, 10, 0.1, SmallJumpMode::Drop, 7).is_err());
        assert!(
            SimulationPlan::new(m, 1.0, 10, 0.5 / 8.0, SmallJumpMode::Drop, 7).is_ok()
        );
        let compact = ModulatedMeasure::new(
            PeriodicCoefficient::constant(1.0).unwrap(),
            LevyDensitySpec::truncated_stable(1.0, 0.05).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(SimulationPlan::new(compact, 1.0, 10, 0.0625, SmallJumpMode::Drop, 7).is_err());
    }

    #[test]
    fn table_rejects_singular_coefficients() {
        let singular = ModulatedMeasure::new(
            PeriodicCoefficient::reflected_power(0.4, 0.5).unwrap(),
            LevyDensitySpec::stable_like(1.0).unwrap(),
            1.0,
        )
        .unwrap();
        let err = JumpTable::build(&singular, 1.0 / 16.0, &cfg()).unwrap_err();
        assert!(matches!(err, Error::TableBuildFailure(_)));

        let profiled = ModulatedMeasure::new(
            PeriodicCoefficient::constant(1.0).unwrap(),
            LevyDensitySpec::profiled_stable(1.0, 0.3).unwrap(),
            1.0,
        )
        .unwrap();
        let err = JumpTable::build(&profiled, 1.0 / 16.0, &cfg()).unwrap_err();
        assert!(matches!(err, Error::TableBuildFailure(_)));
    }

    #[test]
    fn table_cdf_matches_closed_form_for_constant_coefficient() {
        // With a(x) = c and beta = 1 the one-sided head CDF in the
        // substituted variable is F(u) = c (1/u_lo - 1/u).
        let level = 0.7;
        let delta = 0.25;
        let cutoff = delta / 8.0;
        let m = ModulatedMeasure::new(
            PeriodicCoefficient::constant(level).unwrap(),
            LevyDensitySpec::stable_like(1.0).unwrap(),
            delta,
        )
        .unwrap();
        let table = JumpTable::build(&m, cutoff, &cfg()).unwrap();
        let u_lo = cutoff / delta;
        assert_eq!(table.knots[0], u_lo);
        let total = table.head_mass + table.far_mass;
        assert!(table.sup_err <= CDF_TARGET);
        for k in 0..=40 {
            let u = u_lo * (4.0 / u_lo).powf(k as f64 / 40.0);
            let exact = level * (1.0 / u_lo - 1.0 / u);
            let got = table.head_cdf_at(u);
            assert!(
                (got - exact).abs() <= 1e-9 * total,
                "u = {u}: cdf {got} vs exact {exact}"
            );
        }
        // Head + far must reproduce the full one-sided mass c / u_lo.
        let full = level / u_lo;
        assert!((total - full).abs() <= 1e-9 * full);
        // And the physical rate carries the delta^{-beta} factor.
        assert!((table.lambda_half - total / delta).abs() <= 1e-9 * table.lambda_half);
    }

    #[test]
    fn table_cdf_matches_quadrature_for_oscillating_coefficient() {
        let delta = 0.25;
        let cutoff = delta / 8.0;
        let beta = 1.3;
        let coeff = PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap();
        let m = ModulatedMeasure::new(
            coeff.clone(),
            LevyDensitySpec::stable_like(beta).unwrap(),
            delta,
        )
        .unwrap();
        let table = JumpTable::build(&m, cutoff, &cfg()).unwrap();
        let u_lo = cutoff / delta;
        let s = 1.0 + beta;
        let g = move |u: f64| coeff.eval(u).or_infinite() * u.powf(-s);
        for k in 1..=60 {
            let u = u_lo * (4.0 / u_lo).powf(k as f64 / 60.0);
            let (exact, qerr) = integrate_singular(&g, u_lo, u, &[], &[], &cfg())
                .expect_converged("oscillating head CDF oracle")
                .unwrap();
            let got = table.head_cdf_at(u);
            assert!(
                (got - exact).abs() <= qerr + 1e-9 * table.head_mass,
                "u = {u}: cdf {got} vs quadrature {exact}"
            );
        }
    }

    #[test]
    fn table_mass_consistent_with_measure() {
        for (coeff, beta, delta) in [
            (PeriodicCoefficient::constant(1.0).unwrap(), 0.7, 1.0),
            (
                PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap(),
                1.3,
                0.25,
            ),
        ] {
            let cutoff = delta / 16.0;
            let m = ModulatedMeasure::new(
                coeff,
                LevyDensitySpec::stable_like(beta).unwrap(),
                delta,
            )
            .unwrap();
            let table = JumpTable::build(&m, cutoff, &cfg()).unwrap();
            let (mass, err) = m
                .mass_above(cutoff, &cfg())
                .expect_converged("two-sided mass oracle")
                .unwrap();
            let rate = 2.0 * table.lambda_half;
            assert!(
                (rate - mass).abs() <= err + 1e-8 * mass,
                "beta {beta}: table rate {rate} vs measure mass {mass}"
            );
        }
        // Compact support: the far region is empty and the mass stops at the
        // radius.
        let m = ModulatedMeasure::new(
            PeriodicCoefficient::smooth_cosine(1.0, -0.25).unwrap(),
            LevyDensitySpec::truncated_stable(0.9, 1.5).unwrap(),
            1.0,
        )
        .unwrap();
        let table = JumpTable::build(&m, 1.0 / 16.0, &cfg()).unwrap();
        assert_eq!(table.far_mass, 0.0);
        let (mass, err) = m
            .mass_above(1.0 / 16.0, &cfg())
            .expect_converged("compact mass oracle")
            .unwrap();
        let rate = 2.0 * table.lambda_half;
        assert!((rate - mass).abs() <= err + 1e-8 * mass);
    }

    #[test]
    fn far_region_cell_occupancy_matches_weights() {
        let coeff = PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap();
        let beta = 1.0;
        let m = ModulatedMeasure::new(
            coeff.clone(),
            LevyDensitySpec::stable_like(beta).unwrap(),
            1.0,
        )
        .unwrap();
        let table = JumpTable::build(&m, 1.0 / 8.0, &cfg()).unwrap();
        let s = 1.0 + beta;
        let g = move |u: f64| coeff.eval(u).or_infinite() * u.powf(-s);
        // Cell weights for [4,5), [5,6), [6,7) by quadrature; the remainder
        // of the far mass is the tail bin.
        let mut probs = Vec::new();
        let mut covered = 0.0;
        for l in 4..7 {
            let (w, _) = integrate_bounded(&g, l as f64, l as f64 + 1.0, &[], &cfg())
                .expect_converged("far cell weight")
                .unwrap();
            probs.push(w / table.far_mass);
            covered += w;
        }
        probs.push((table.far_mass - covered) / table.far_mass);

        let n = 40_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(0x00C0FFEE);
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let u = table.draw_far(&mut rng);
            assert!(u >= 4.0);
            let bin = ((u.floor() as usize).saturating_sub(4)).min(3);
            counts[bin] += 1;
        }
        for (bin, (&c, &p)) in counts.iter().zip(probs.iter()).enumerate() {
            let freq = c as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() <= 4.0 * sd,
                "bin {bin}: frequency {freq:.5} vs weight {p:.5} (sd {sd:.5})"
            );
        }
    }

    #[test]
    fn samples_reproducible_across_thread_counts() {
        let plan = plan_for(
            PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap(),
            1.0,
            0.5,
            0.3,
            400,
            1.0 / 32.0,
            SmallJumpMode::GaussianSubstitute,
            0xABCD,
        );
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let serial = pool.install(|| sample_increments(&plan, &cfg())).unwrap();
        let parallel = sample_increments(&plan, &cfg()).unwrap();
        assert_eq!(serial.values(), parallel.values());
        assert_eq!(serial.jump_counts(), parallel.jump_counts());
    }

    #[test]
    fn zero_jump_fraction_matches_poisson_rate() {
        let plan = plan_for(
            PeriodicCoefficient::constant(1.0).unwrap(),
            1.0,
            1.0,
            0.05,
            30_000,
            1.0 / 8.0,
            SmallJumpMode::Drop,
            11,
        );
        let sample = sample_increments(&plan, &cfg()).unwrap();
        // lambda_r = 2 * 8 = 16, so P(no jump) = exp(-0.8).
        assert!((sample.jump_rate() - 16.0).abs() <= 1e-8);
        let p0 = (-plan.time() * sample.jump_rate()).exp();
        let sd = (p0 * (1.0 - p0) / plan.n_samples() as f64).sqrt();
        assert!((sample.zero_jump_fraction() - p0).abs() <= 4.0 * sd);

        // As t -> 0 the increment collapses to zero and the empirical
        // characteristic function is identically one.
        let tiny = plan_for(
            PeriodicCoefficient::constant(1.0).unwrap(),
            1.0,
            1.0,
            1e-12,
            500,
            1.0 / 8.0,
            SmallJumpMode::Drop,
            11,
        );
        let sample = sample_increments(&tiny, &cfg()).unwrap();
        assert!(sample.values().iter().all(|&x| x == 0.0));
        let check = empirical_cf(&sample, &[0.5, 2.0], &cfg()).unwrap();
        for row in &check.rows {
            assert_eq!(row.empirical, 1.0);
            assert_eq!(row.imag_abs, 0.0);
            // The model collapses to one as well; the confidence band is
            // degenerate here (zero sample variance), so compare directly.
            assert!((row.model - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn sign_symmetry_and_jump_count_diagnostics() {
        let plan = plan_for(
            PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap(),
            1.2,
            0.5,
            0.4,
            20_000,
            1.0 / 32.0,
            SmallJumpMode::Drop,
            2024,
        );
        let sample = sample_increments(&plan, &cfg()).unwrap();
        assert!(sample.odd_moment_zscore(1) <= 4.0);
        assert!(sample.odd_moment_zscore(3) <= 4.0);
        let lambda_t = plan.time() * sample.jump_rate();
        let mean_count =
            sample.jump_counts().iter().sum::<u64>() as f64 / plan.n_samples() as f64;
        let sd = (lambda_t / plan.n_samples() as f64).sqrt();
        assert!(
            (mean_count - lambda_t).abs() <= 4.0 * sd,
            "mean count {mean_count} vs intensity {lambda_t}"
        );
    }

    #[test]
    fn cf_matches_full_exponent_with_gaussian_substitute() {
        let plan = plan_for(
            PeriodicCoefficient::constant(1.0).unwrap(),
            1.0,
            1.0,
            0.5,
            100_000,
            1.0 / 64.0,
            SmallJumpMode::GaussianSubstitute,
            99,
        );
        let sample = sample_increments(&plan, &cfg()).unwrap();
        let check = empirical_cf(&sample, &[0.5, 1.0, 2.0], &cfg()).unwrap();
        assert!(check.all_inside(), "rows: {:?}", check.rows);
        assert!(check.imag_within_ci());
        // The model at xi = 1 is the exact stable value exp(-t pi).
        let model = check.rows[1].model;
        let exact = (-0.5 * std::f64::consts::PI).exp();
        assert!((model - exact).abs() <= 1e-6);
    }

    #[test]
    fn cf_drop_mode_uses_truncated_exponent() {
        // A wide cutoff makes the truncated and full exponents visibly
        // different; the sample must follow the truncated one.
        let plan = plan_for(
            PeriodicCoefficient::constant(1.0).unwrap(),
            1.0,
            1.0,
            0.5,
            100_000,
            1.0 / 8.0,
            SmallJumpMode::Drop,
            321,
        );
        let sample = sample_increments(&plan, &cfg()).unwrap();
        let check = empirical_cf(&sample, &[1.0], &cfg()).unwrap();
        let row = &check.rows[0];
        assert!(row.inside, "row: {row:?}");
        let full = (-0.5 * std::f64::consts::PI).exp();
        // Dropping mass can only raise the characteristic function.
        assert!(row.model > full);
        // And the gap is statistically resolvable: the sample rejects the
        // full exponent.
        assert!((row.empirical - full).abs() > row.ci_half);
    }

    #[test]
    fn cf_smooth_cosine_matches_homogenized_model() {
        // Fast oscillation: the sampled law should already sit close to the
        // averaged one. The margin adds the truncation bias sup(a) xi^2 r t.
        let delta = 1.0 / 64.0;
        let cutoff = delta / 8.0;
        let t = 0.25;
        let plan = plan_for(
            PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap(),
            1.0,
            delta,
            t,
            20_000,
            cutoff,
            SmallJumpMode::Drop,
            555,
        );
        let sample = sample_increments(&plan, &cfg()).unwrap();
        let stable = ExponentSpec::new(
            ModulatedMeasure::new(
                PeriodicCoefficient::constant(1.0).unwrap(),
                LevyDensitySpec::stable_like(1.0).unwrap(),
                1.0,
            )
            .unwrap(),
            &cfg(),
        )
        .unwrap();
        for &xi in &[0.5, 1.0, 2.0] {
            let (psi, _) = stable.psi(xi).unwrap();
            let limit = (-t * psi).exp();
            let (emp, ci) = mean_ci3(sample.values().iter().map(|&x| (xi * x).cos()));
            let bias = t * 1.5 * xi * xi * cutoff;
            assert!(
                (emp - limit).abs() <= ci + bias,
                "xi {xi}: empirical {emp} vs averaged {limit} (ci {ci}, bias {bias})"
            );
        }
    }

    #[test]
    fn cutoff_halving_keeps_pass_rate() {
        for &cutoff in &[1.0 / 16.0, 1.0 / 32.0] {
            let plan = plan_for(
                PeriodicCoefficient::constant(1.0).unwrap(),
                1.0,
                1.0,
                0.5,
                30_000,
                cutoff,
                SmallJumpMode::Drop,
                777,
            );
            let sample = sample_increments(&plan, &cfg()).unwrap();
            let check = empirical_cf(&sample, &[0.5, 1.0, 2.0, 4.0], &cfg()).unwrap();
            assert!(
                check.all_inside(),
                "cutoff {cutoff}: rows {:?}",
                check.rows
            );
        }
    }

    #[test]
    fn rescaling_identity_holds() {
        // Constant coefficient: the identity is exact at every scale, and at
        // eps = 1 both sides are literally the same computation.
        let a = PeriodicCoefficient::constant(1.3).unwrap();
        let report =
            rescaling_identity_check(&a, 1.0, &[1.0, 0.25], &tent(), &tent(), &cfg()).unwrap();
        assert!(report.agrees_everywhere());
        assert!(report.passed(1e-7), "max dev {}", report.max_rel_dev());
        assert_eq!(report.rows[0].lhs.value, report.rows[0].rhs.value);

        let osc = PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap();
        let report =
            rescaling_identity_check(&osc, 1.0, &[1.0 / 16.0], &tent(), &tent(), &cfg()).unwrap();
        assert!(report.agrees_everywhere());
        assert!(report.passed(1e-6), "max dev {}", report.max_rel_dev());
    }

    #[test]
    fn fdd_experiment_converges_and_factorizes() {
        // Constant coefficient 2: the rescaled law is the limit law exactly
        // (up to the small-jump truncation), so every scale must pass.
        let a = PeriodicCoefficient::constant(2.0).unwrap();
        let report = fdd_convergence_experiment(
            &a,
            1.0,
            &[0.5, 0.25],
            &[0.25],
            &[1.0],
            6_000,
            42,
            &cfg(),
        )
        .unwrap();
        assert_eq!(report.mean_coefficient, 2.0);
        assert!(report.rows.iter().all(|r| r.inside), "rows: {:?}", report.rows);
        assert!(report.factorization_all_inside());

        // Oscillating coefficient: by the final scale the marginals must be
        // inside their bands around the averaged limit.
        let osc = PeriodicCoefficient::smooth_cosine(1.0, 0.5).unwrap();
        let report = fdd_convergence_experiment(
            &osc,
            1.0,
            &[0.5, 0.125],
            &[0.5],
            &[0.5, 1.0],
            6_000,
            43,
            &cfg(),
        )
        .unwrap();
        assert_eq!(report.final_epsilon(), 0.125);
        assert!(report.final_all_inside(), "rows: {:?}", report.final_rows());
        assert!(report.factorization_all_inside());
        let devs = report.per_epsilon_worst_dev();
        assert_eq!(devs.len(), 2);
        assert!(devs[0].0 > devs[1].0);
    }
}
