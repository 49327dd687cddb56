//! Tabulated convergence experiments.

/// One measurement: the quantity at scale `delta` and frequency `xi`
/// against its claimed limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub delta: f64,
    pub xi: f64,
    pub value: f64,
    pub limit: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

impl ConvergenceRow {
    pub fn new(delta: f64, xi: f64, value: f64, limit: f64) -> Self {
        let abs_err = (value - limit).abs();
        let rel_err = if limit != 0.0 { abs_err / limit.abs() } else { f64::INFINITY };
        ConvergenceRow { delta, xi, value, limit, abs_err, rel_err }
    }
}

/// Rows grouped by a decreasing sequence of scales.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn new(rows: Vec<ConvergenceRow>) -> Self {
        ConvergenceReport { rows }
    }

    /// The distinct scales in first-appearance order.
    pub fn deltas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for row in &self.rows {
            if out.last() != Some(&row.delta) && !out.contains(&row.delta) {
                out.push(row.delta);
            }
        }
        out
    }

    /// Worst relative error across the grid at one scale.
    pub fn max_rel_for_delta(&self, delta: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.delta == delta)
            .map(|r| r.rel_err)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(delta, worst relative error)` per scale, in scale order.
    pub fn per_delta_max_rel(&self) -> Vec<(f64, f64)> {
        self.deltas().into_iter().map(|d| (d, self.max_rel_for_delta(d))).collect()
    }

    /// Worst relative error at the final (smallest) scale.
    pub fn final_max_rel(&self) -> f64 {
        match self.deltas().last() {
            Some(&d) => self.max_rel_for_delta(d),
            None => f64::INFINITY,
        }
    }

    pub fn deltas_strictly_decreasing(&self) -> bool {
        self.deltas().windows(2).all(|w| w[1] < w[0])
    }

    /// Whether the per-scale errors keep shrinking over the last `window`
    /// scales. Once errors drop to the noise `floor` of the underlying
    /// evaluations, they are allowed to wander below it without failing the
    /// trend.
    pub fn errors_decreasing(&self, window: usize, floor: f64) -> bool {
        let per = self.per_delta_max_rel();
        if per.len() < 2 {
            return true;
        }
        let start = per.len().saturating_sub(window);
        per[start.max(1) - 1..]
            .windows(2)
            .all(|w| w[1].1 <= w[0].1.max(floor) || w[1].1 <= floor)
    }

    /// Final-scale worst relative error within `tol`.
    pub fn passed(&self, tol: f64) -> bool {
        self.final_max_rel() <= tol
    }
}
