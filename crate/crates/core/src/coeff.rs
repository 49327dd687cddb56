//! Periodic coefficients on the unit cell.
//!
//! A coefficient is a nonnegative 1-periodic function used to modulate a
//! jump density. The bounded kinds are classical; [`PeriodicCoefficient::ReflectedPower`]
//! carries an integrable power singularity at one point of the cell, which
//! is the feature that makes the modulated measures here interesting.

use crate::error::{Error, Result};
use crate::quad::{integrate_singular, QuadratureConfig};

/// Value of a coefficient at a point. Singular kinds blow up on a null set
/// and report [`CoeffValue::Unbounded`] there instead of an arbitrary float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoeffValue {
    Finite(f64),
    Unbounded,
}

impl CoeffValue {
    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            CoeffValue::Finite(v) => Some(v),
            CoeffValue::Unbounded => None,
        }
    }

    /// Collapses to `f64`, mapping `Unbounded` to positive infinity. Handy
    /// inside integrands, where the graded mesh never touches the singular
    /// point itself.
    pub fn or_infinite(self) -> f64 {
        match self {
            CoeffValue::Finite(v) => v,
            CoeffValue::Unbounded => f64::INFINITY,
        }
    }
}

/// A nonnegative 1-periodic coefficient.
///
/// Build values through the checked constructors; the fields stay public so
/// downstream code can match on the kind.
#[derive(Debug, Clone, PartialEq)]
pub enum PeriodicCoefficient {
    /// `a(x) = level`.
    Constant { level: f64 },
    /// `a(x) = offset + amplitude cos(2 pi x)`.
    SmoothCosine { offset: f64, amplitude: f64 },
    /// The even profile with power blow-ups on the integer lattice,
    /// translated by `shift`: with `u = frac(x - shift)`,
    ///
    /// * `u in (0, 1/4]`: `u^{-gamma}`,
    /// * `u in (1/4, 3/4)`: the plateau `4^gamma`,
    /// * `u in [3/4, 1)`: `(1 - u)^{-gamma}`,
    /// * `u = 0`: unbounded.
    ///
    /// Continuous away from the singularity, even about it, with minimum
    /// `4^gamma` on the plateau.
    ReflectedPower { gamma: f64, shift: f64 },
    /// Product of bounded one-dimensional profiles, one per axis.
    TensorProduct { factors: Vec<PeriodicCoefficient> },
}

fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

impl PeriodicCoefficient {
    pub fn constant(level: f64) -> Result<Self> {
        if !(level > 0.0) || !level.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "constant coefficient level must be positive and finite, got {level}"
            )));
        }
        Ok(PeriodicCoefficient::Constant { level })
    }

    pub fn smooth_cosine(offset: f64, amplitude: f64) -> Result<Self> {
        if !(offset > 0.0) || !offset.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cosine offset must be positive and finite, got {offset}"
            )));
        }
        if !amplitude.is_finite() || amplitude.abs() > offset {
            return Err(Error::InvalidParameter(format!(
                "cosine amplitude must satisfy |amplitude| <= offset, got {amplitude} vs {offset}"
            )));
        }
        Ok(PeriodicCoefficient::SmoothCosine { offset, amplitude })
    }

    pub fn reflected_power(gamma: f64, shift: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "reflected power exponent must lie in (0, 1), got {gamma}"
            )));
        }
        if !shift.is_finite() {
            return Err(Error::InvalidParameter("shift must be finite".into()));
        }
        Ok(PeriodicCoefficient::ReflectedPower { gamma, shift: frac(shift) })
    }

    pub fn tensor(factors: Vec<PeriodicCoefficient>) -> Result<Self> {
        if !(2..=3).contains(&factors.len()) {
            return Err(Error::InvalidParameter(format!(
                "tensor coefficients support 2 or 3 axes, got {}",
                factors.len()
            )));
        }
        for f in &factors {
            if f.dim() != 1 {
                return Err(Error::InvalidParameter("tensor factors must be one-dimensional".into()));
            }
            if !f.is_bounded() {
                return Err(Error::InvalidParameter(
                    "tensor factors must be bounded profiles".into(),
                ));
            }
        }
        Ok(PeriodicCoefficient::TensorProduct { factors })
    }

    /// Spatial dimension the coefficient lives in.
    pub fn dim(&self) -> usize {
        match self {
            PeriodicCoefficient::TensorProduct { factors } => factors.len(),
            _ => 1,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, PeriodicCoefficient::ReflectedPower { .. })
    }

    /// Evaluates a one-dimensional coefficient.
    ///
    /// # Panics
    /// On tensor coefficients; those are evaluated with [`Self::eval_nd`].
    pub fn eval(&self, x: f64) -> CoeffValue {
        match self {
            PeriodicCoefficient::Constant { level } => CoeffValue::Finite(*level),
            PeriodicCoefficient::SmoothCosine { offset, amplitude } => {
                CoeffValue::Finite(offset + amplitude * (2.0 * std::f64::consts::PI * x).cos())
            }
            PeriodicCoefficient::ReflectedPower { gamma, shift } => {
                let u = frac(x - shift);
                if u == 0.0 {
                    CoeffValue::Unbounded
                } else if u <= 0.25 {
                    CoeffValue::Finite(u.powf(-gamma))
                } else if u < 0.75 {
                    CoeffValue::Finite(4.0_f64.powf(*gamma))
                } else {
                    CoeffValue::Finite((1.0 - u).powf(-gamma))
                }
            }
            PeriodicCoefficient::TensorProduct { .. } => {
                panic!("eval called on a tensor coefficient; use eval_nd")
            }
        }
    }

    /// Evaluates at a point whose dimension matches [`Self::dim`].
    pub fn eval_nd(&self, x: &[f64]) -> CoeffValue {
        match self {
            PeriodicCoefficient::TensorProduct { factors } => {
                assert_eq!(x.len(), factors.len(), "dimension mismatch");
                let mut acc = 1.0;
                for (f, &xi) in factors.iter().zip(x) {
                    match f.eval(xi) {
                        CoeffValue::Finite(v) => acc *= v,
                        CoeffValue::Unbounded => return CoeffValue::Unbounded,
                    }
                }
                CoeffValue::Finite(acc)
            }
            _ => {
                assert_eq!(x.len(), 1, "dimension mismatch");
                self.eval(x[0])
            }
        }
    }

    /// Mean over the unit cell, in closed form.
    pub fn mean_exact(&self) -> f64 {
        match self {
            PeriodicCoefficient::Constant { level } => *level,
            PeriodicCoefficient::SmoothCosine { offset, .. } => *offset,
            PeriodicCoefficient::ReflectedPower { gamma, .. } => {
                // Two power wings plus the plateau:
                // 2 int_0^{1/4} u^{-gamma} du + 4^gamma / 2.
                2.0 * 4.0_f64.powf(gamma - 1.0) * (2.0 - gamma) / (1.0 - gamma)
            }
            PeriodicCoefficient::TensorProduct { factors } => {
                factors.iter().map(|f| f.mean_exact()).product()
            }
        }
    }

    /// Mean over the unit cell by graded quadrature, as `(value, error)`.
    /// Exists so the closed forms can be cross-checked; prefer
    /// [`Self::mean_exact`] elsewhere.
    pub fn mean_quadrature(&self, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
        if self.dim() != 1 {
            return Err(Error::UnsupportedDimension { op: "mean_quadrature", dim: self.dim() });
        }
        let sings = self.singular_points_in(0.0, 1.0, 1.0);
        let kinks = self.breakpoints_in(0.0, 1.0, 1.0);
        let f = |x: f64| self.eval(x).or_infinite();
        integrate_singular(&f, 0.0, 1.0, &sings, &kinks, cfg).expect_converged("coefficient mean")
    }

    /// Essential range `(inf, sup)` over the cell; `sup` is `None` for the
    /// unbounded kind.
    pub fn range(&self) -> (f64, Option<f64>) {
        match self {
            PeriodicCoefficient::Constant { level } => (*level, Some(*level)),
            PeriodicCoefficient::SmoothCosine { offset, amplitude } => {
                (offset - amplitude.abs(), Some(offset + amplitude.abs()))
            }
            PeriodicCoefficient::ReflectedPower { gamma, .. } => (4.0_f64.powf(*gamma), None),
            PeriodicCoefficient::TensorProduct { factors } => {
                let mut lo = 1.0;
                let mut hi = 1.0;
                for f in factors {
                    let (l, h) = f.range();
                    lo *= l;
                    hi *= h.expect("tensor factors are bounded");
                }
                (lo, Some(hi))
            }
        }
    }

    /// Supremum of the exponents `p` with `a` in `L^p` of the unit cell.
    pub fn p_max(&self) -> f64 {
        match self {
            PeriodicCoefficient::ReflectedPower { gamma, .. } => 1.0 / gamma,
            _ => f64::INFINITY,
        }
    }

    /// Points of the unit cell `[0, 1)` where the coefficient is unbounded.
    pub fn singular_points_unit(&self) -> Vec<f64> {
        match self {
            PeriodicCoefficient::ReflectedPower { shift, .. } => vec![*shift],
            _ => Vec::new(),
        }
    }

    /// Points of the unit cell where the coefficient is finite but not
    /// smooth, as quadrature panel edges.
    pub fn breakpoints_unit(&self) -> Vec<f64> {
        match self {
            PeriodicCoefficient::ReflectedPower { shift, .. } => {
                vec![frac(shift + 0.25), frac(shift + 0.75)]
            }
            _ => Vec::new(),
        }
    }

    /// All `h` in `[lo, hi]` where `a(h / delta)` is unbounded, sorted.
    /// These are the points `delta (k + s)` over integers `k` and unit-cell
    /// singular points `s`.
    pub fn singular_points_in(&self, lo: f64, hi: f64, delta: f64) -> Vec<f64> {
        lattice_points(&self.singular_points_unit(), lo, hi, delta)
    }

    /// Kink locations of `a(h / delta)` within `[lo, hi]`, sorted.
    pub fn breakpoints_in(&self, lo: f64, hi: f64, delta: f64) -> Vec<f64> {
        lattice_points(&self.breakpoints_unit(), lo, hi, delta)
    }

    /// Panel seeds matching the oscillation of `a(h / delta)` so adaptive
    /// quadrature starts from cells it can resolve. The kinds whose
    /// structural points already delimit the cells return nothing; the
    /// smooth oscillating kind returns its half-period lattice, thinned to
    /// at most 4096 seeds so extreme spans degrade to plain refinement
    /// instead of exhausting the panel budget.
    pub(crate) fn resolution_panels_in(&self, lo: f64, hi: f64, delta: f64) -> Vec<f64> {
        match self {
            PeriodicCoefficient::SmoothCosine { amplitude, .. } if *amplitude != 0.0 => {
                assert!(delta > 0.0 && lo <= hi);
                let mut stride = 0.5 * delta;
                let cells = (hi - lo) / stride;
                if cells > 4096.0 {
                    stride *= (cells / 4096.0).ceil();
                }
                let mut out = Vec::new();
                let mut k = (lo / stride).floor() + 1.0;
                while k * stride < hi {
                    if k * stride > lo {
                        out.push(k * stride);
                    }
                    k += 1.0;
                }
                out
            }
            _ => Vec::new(),
        }
    }
}

/// Expands unit-cell points `s` to all `delta (k + s)` inside `[lo, hi]`.
fn lattice_points(unit: &[f64], lo: f64, hi: f64, delta: f64) -> Vec<f64> {
    assert!(delta > 0.0 && lo <= hi);
    let mut out = Vec::new();
    for &s in unit {
        let k_lo = (lo / delta - s).ceil() as i64;
        let k_hi = (hi / delta - s).floor() as i64;
        for k in k_lo..=k_hi {
            let h = delta * (k as f64 + s);
            if h >= lo && h <= hi {
                out.push(h);
            }
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Verdict;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn reflected_power_piecewise_values() {
        let a = PeriodicCoefficient::reflected_power(0.5, 0.0).unwrap();
        assert_eq!(a.eval(0.0), CoeffValue::Unbounded);
        assert_eq!(a.eval(1.0), CoeffValue::Unbounded);
        assert_eq!(a.eval(-2.0), CoeffValue::Unbounded);
        assert_abs_diff_eq!(a.eval(1.0 / 16.0).finite().unwrap(), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a.eval(0.25).finite().unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a.eval(0.3).finite().unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a.eval(0.9).finite().unwrap(), 0.1_f64.powf(-0.5), epsilon = 1e-12);
    }

    #[test]
    fn reflected_power_is_even_and_periodic() {
        // Dyadic sample points keep the reflections exact in floating point.
        let a = PeriodicCoefficient::reflected_power(0.37, 0.0).unwrap();
        for &x in &[0.03125, 0.1875, 0.265625, 0.484375, 0.71875, 0.96875] {
            assert_eq!(a.eval(x), a.eval(-x), "evenness at {x}");
            assert_eq!(a.eval(x), a.eval(x + 1.0), "periodicity at {x}");
            assert_eq!(a.eval(x), a.eval(x - 3.0), "periodicity at {x}");
        }
    }

    #[test]
    fn shift_moves_the_singularity() {
        let b = PeriodicCoefficient::reflected_power(0.5, 0.5).unwrap();
        assert_eq!(b.eval(0.5), CoeffValue::Unbounded);
        assert_eq!(b.eval(-0.5), CoeffValue::Unbounded);
        assert_abs_diff_eq!(b.eval(0.5 + 1.0 / 16.0).finite().unwrap(), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b.eval(0.0).finite().unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn closed_form_mean_at_half() {
        // gamma = 1/2 gives mean 2 * 4^{-1/2} * (3/2) / (1/2) = 3 exactly.
        let a = PeriodicCoefficient::reflected_power(0.5, 0.0).unwrap();
        assert_abs_diff_eq!(a.mean_exact(), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_mean_matches_closed_form() {
        let cfg = QuadratureConfig::default();
        let cases = vec![
            PeriodicCoefficient::reflected_power(0.5, 0.0).unwrap(),
            PeriodicCoefficient::reflected_power(0.8, 0.25).unwrap(),
            PeriodicCoefficient::smooth_cosine(2.0, 1.5).unwrap(),
            PeriodicCoefficient::constant(0.7).unwrap(),
        ];
        for a in cases {
            let (value, error) = a.mean_quadrature(&cfg).unwrap();
            let exact = a.mean_exact();
            assert!(
                (value - exact).abs() <= error + 1e-10 * exact,
                "{a:?}: {value} vs {exact}"
            );
        }
    }

    #[test]
    fn lp_membership_boundary() {
        // a^p integrates iff p < p_max; probe both sides of the boundary.
        let a = PeriodicCoefficient::reflected_power(0.5, 0.0).unwrap();
        assert_abs_diff_eq!(a.p_max(), 2.0, epsilon = 1e-15);
        let cfg = QuadratureConfig::default();
        let below = |x: f64| a.eval(x).or_infinite().powf(1.9);
        let above = |x: f64| a.eval(x).or_infinite().powf(2.1);
        let sings = a.singular_points_in(0.0, 1.0, 1.0);
        let kinks = a.breakpoints_in(0.0, 1.0, 1.0);
        assert!(integrate_singular(&below, 0.0, 1.0, &sings, &kinks, &cfg).converged().is_some());
        let out = integrate_singular(&above, 0.0, 1.0, &sings, &kinks, &cfg);
        match out.verdict {
            Verdict::Divergent { growth_exponent } => {
                assert_abs_diff_eq!(growth_exponent, 0.05, epsilon = 1e-3)
            }
            v => panic!("expected divergence, got {v:?}"),
        }
    }

    #[test]
    fn modulated_singularity_lattice() {
        let a = PeriodicCoefficient::reflected_power(0.5, 0.0).unwrap();
        let pts = a.singular_points_in(0.0, 2.0, 0.5);
        assert_eq!(pts, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let b = PeriodicCoefficient::reflected_power(0.5, 0.5).unwrap();
        let pts = b.singular_points_in(-1.2, 1.2, 1.0);
        assert_eq!(pts, vec![-0.5, 0.5]);
        let c = PeriodicCoefficient::constant(1.0).unwrap();
        assert!(c.singular_points_in(0.0, 10.0, 0.1).is_empty());
    }

    #[test]
    fn constructor_validation() {
        assert!(PeriodicCoefficient::constant(0.0).is_err());
        assert!(PeriodicCoefficient::smooth_cosine(1.0, 1.5).is_err());
        assert!(PeriodicCoefficient::smooth_cosine(-1.0, 0.5).is_err());
        assert!(PeriodicCoefficient::reflected_power(1.0, 0.0).is_err());
        assert!(PeriodicCoefficient::reflected_power(0.0, 0.0).is_err());
        // Shifts wrap into the unit cell.
        let a = PeriodicCoefficient::reflected_power(0.5, 1.75).unwrap();
        assert_eq!(a.singular_points_unit(), vec![0.75]);
    }

    #[test]
    fn tensor_products() {
        let f1 = PeriodicCoefficient::smooth_cosine(2.0, 1.0).unwrap();
        let f2 = PeriodicCoefficient::constant(3.0).unwrap();
        let t = PeriodicCoefficient::tensor(vec![f1.clone(), f2.clone()]).unwrap();
        assert_eq!(t.dim(), 2);
        assert_abs_diff_eq!(t.eval_nd(&[0.0, 0.4]).finite().unwrap(), 9.0, epsilon = 1e-14);
        assert_relative_eq!(t.mean_exact(), 6.0, max_relative = 1e-15);
        let sing = PeriodicCoefficient::reflected_power(0.5, 0.0).unwrap();
        assert!(PeriodicCoefficient::tensor(vec![f1, sing]).is_err());
        assert!(PeriodicCoefficient::tensor(vec![f2]).is_err());
    }
}
