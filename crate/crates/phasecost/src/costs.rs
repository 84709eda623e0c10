//! Transport costs: cost per unit length for moving mass `w` along a
//! network edge. Admissible costs are nondecreasing, concave, continuous,
//! with `tau(0) = 0`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A transport cost `tau` on `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TransportCost {
    /// `tau(w) = w^alpha`, the classical branched-transport cost.
    Power { alpha: f64 },
    /// `tau(w) = min(a w, b w + d)`, the urban-planning cost.
    UrbanPlanning { a: f64, b: f64, d: f64 },
    /// Piecewise affine with `tau(0) = 0`. `breakpoints` starts at 0 and has
    /// one entry more than the number of kinks; `slopes` has one entry per
    /// segment including the final unbounded one.
    PiecewiseAffine { breakpoints: Vec<f64>, slopes: Vec<f64> },
    /// Values on a grid, interpolated linearly and extended with the last
    /// slope beyond the grid.
    Sampled { w: Vec<f64>, tau: Vec<f64> },
}

/// A value of the Legendre-Fenchel conjugate `[-tau(-.)]^*` at slope `t`.
/// `value` may be infinite (urban planning below `b`, any power cost at 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateValue {
    pub t: f64,
    pub value: f64,
}

/// Per-property admissibility check results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub zero_at_origin: bool,
    pub nondecreasing: bool,
    pub concave: bool,
    pub continuous_at_zero: bool,
    /// Worst (most positive) relative second difference observed.
    pub max_second_difference: f64,
}

impl AdmissibilityReport {
    pub fn pass(&self) -> bool {
        self.zero_at_origin && self.nondecreasing && self.concave && self.continuous_at_zero
    }
}

impl TransportCost {
    /// Validate structural invariants of the representation itself.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Power { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::Validation(format!("power alpha must be in (0,1), got {alpha}")));
                }
            }
            Self::UrbanPlanning { a, b, d } => {
                if !(*a > 0.0 && *b >= 0.0 && a > b && *d > 0.0) {
                    return Err(Error::Validation(format!(
                        "urban planning needs a > b >= 0 and d > 0, got a={a} b={b} d={d}"
                    )));
                }
            }
            Self::PiecewiseAffine { breakpoints, slopes } => {
                if breakpoints.is_empty() || breakpoints[0] != 0.0 {
                    return Err(Error::Validation("breakpoints must start at 0".into()));
                }
                if slopes.len() != breakpoints.len() {
                    return Err(Error::Validation(format!(
                        "need one slope per segment: {} breakpoints require {} slopes, got {}",
                        breakpoints.len(),
                        breakpoints.len(),
                        slopes.len()
                    )));
                }
                if breakpoints.windows(2).any(|p| !(p[1] > p[0])) {
                    return Err(Error::Validation("breakpoints must be strictly increasing".into()));
                }
                if slopes.windows(2).any(|p| !(p[1] < p[0])) {
                    return Err(Error::Validation("slopes must be strictly decreasing".into()));
                }
                if slopes.iter().any(|s| *s < 0.0 || !s.is_finite()) {
                    return Err(Error::Validation("slopes must be finite and nonnegative".into()));
                }
            }
            Self::Sampled { w, tau } => {
                if w.len() != tau.len() || w.len() < 2 {
                    return Err(Error::Validation("sampled cost needs >= 2 aligned samples".into()));
                }
                if w.windows(2).any(|p| !(p[1] > p[0])) || w[0] < 0.0 {
                    return Err(Error::Validation("sample grid must be nonnegative and increasing".into()));
                }
            }
        }
        Ok(())
    }

    /// Evaluate `tau(w)`.
    pub fn eval(&self, w: f64) -> Result<f64> {
        if w < 0.0 {
            return Err(Error::Domain(format!("mass must be nonnegative, got {w}")));
        }
        Ok(match self {
            Self::Power { alpha } => w.powf(*alpha),
            Self::UrbanPlanning { a, b, d } => (a * w).min(b * w + d),
            Self::PiecewiseAffine { breakpoints, slopes } => {
                let mut value = 0.0;
                let mut prev = 0.0;
                for (i, &bp) in breakpoints.iter().enumerate().skip(1) {
                    if w <= bp {
                        return Ok(value + slopes[i - 1] * (w - prev));
                    }
                    value += slopes[i - 1] * (bp - prev);
                    prev = bp;
                }
                value + slopes[breakpoints.len() - 1] * (w - prev)
            }
            Self::Sampled { w: grid, tau } => {
                let n = grid.len();
                if w <= grid[0] {
                    if grid[0] == 0.0 {
                        tau[0]
                    } else {
                        // interpolate towards tau(0) = 0
                        tau[0] * w / grid[0]
                    }
                } else if w >= grid[n - 1] {
                    let slope = (tau[n - 1] - tau[n - 2]) / (grid[n - 1] - grid[n - 2]);
                    tau[n - 1] + slope * (w - grid[n - 1])
                } else {
                    let i = grid.partition_point(|&g| g < w);
                    let t = (w - grid[i - 1]) / (grid[i] - grid[i - 1]);
                    tau[i - 1] + t * (tau[i] - tau[i - 1])
                }
            }
        })
    }

    /// Right derivative `tau'(w)`; may be infinite at 0 (power costs).
    pub fn right_derivative(&self, w: f64) -> Result<f64> {
        if w < 0.0 {
            return Err(Error::Domain(format!("mass must be nonnegative, got {w}")));
        }
        Ok(match self {
            Self::Power { alpha } => {
                if w == 0.0 {
                    f64::INFINITY
                } else {
                    alpha * w.powf(alpha - 1.0)
                }
            }
            Self::UrbanPlanning { a, b, d } => {
                if w < d / (a - b) {
                    *a
                } else {
                    *b
                }
            }
            Self::PiecewiseAffine { breakpoints, slopes } => {
                let i = breakpoints.partition_point(|&bp| bp <= w);
                slopes[(i - 1).min(slopes.len() - 1).max(0)]
            }
            Self::Sampled { w: grid, tau } => {
                let n = grid.len();
                let i = grid.partition_point(|&g| g <= w).clamp(1, n - 1);
                (tau[i] - tau[i - 1]) / (grid[i] - grid[i - 1])
            }
        })
    }

    /// Left derivative at `w > 0` (equals the right derivative away from kinks).
    pub fn left_derivative(&self, w: f64) -> Result<f64> {
        if w <= 0.0 {
            return self.right_derivative(0.0);
        }
        match self {
            Self::UrbanPlanning { a, b, d } => Ok(if w <= d / (a - b) { *a } else { *b }),
            Self::PiecewiseAffine { breakpoints, slopes } => {
                let i = breakpoints.partition_point(|&bp| bp < w);
                Ok(slopes[(i - 1).min(slopes.len() - 1)])
            }
            Self::Sampled { w: grid, tau } => {
                let n = grid.len();
                let i = grid.partition_point(|&g| g < w).clamp(1, n - 1);
                Ok((tau[i] - tau[i - 1]) / (grid[i] - grid[i - 1]))
            }
            _ => self.right_derivative(w),
        }
    }

    /// Legendre-Fenchel conjugate of `-tau(-.)`: `sup_{w>=0} tau(w) - t w`.
    pub fn conjugate(&self, t: f64) -> Result<ConjugateValue> {
        if t < 0.0 {
            return Err(Error::Domain(format!("slope must be nonnegative, got {t}")));
        }
        let value = match self {
            Self::Power { alpha } => {
                if t == 0.0 {
                    f64::INFINITY
                } else {
                    (1.0 - alpha) * (t / alpha).powf(alpha / (alpha - 1.0))
                }
            }
            Self::UrbanPlanning { a, b, d } => {
                if t < *b {
                    f64::INFINITY
                } else if t < *a {
                    d * (a - t) / (a - b)
                } else {
                    0.0
                }
            }
            Self::PiecewiseAffine { breakpoints, slopes } => {
                if t < *slopes.last().unwrap() {
                    f64::INFINITY
                } else {
                    // concave pw-affine: the sup is attained at a breakpoint
                    let mut best = 0.0f64;
                    let mut value = 0.0;
                    for i in 1..breakpoints.len() {
                        value += slopes[i - 1] * (breakpoints[i] - breakpoints[i - 1]);
                        best = best.max(value - t * breakpoints[i]);
                    }
                    best
                }
            }
            Self::Sampled { w, tau } => {
                let n = w.len();
                let last_slope = (tau[n - 1] - tau[n - 2]) / (w[n - 1] - w[n - 2]);
                if t < last_slope {
                    f64::INFINITY
                } else {
                    w.iter()
                        .zip(tau)
                        .map(|(&wk, &tk)| tk - t * wk)
                        .fold(0.0f64, f64::max)
                }
            }
        };
        Ok(ConjugateValue { t, value })
    }

    /// Dyadic piecewise-affine interpolant at level `n`: breakpoints `i/2^n`
    /// covering `[0, w_max]`, extended beyond the last breakpoint with its
    /// final slope. By concavity the result never exceeds `tau`.
    pub fn interpolate_affine(&self, n: u32, w_max: f64) -> Result<TransportCost> {
        let h = 0.5f64.powi(n as i32);
        let count = (w_max / h).ceil().max(1.0) as usize;
        let mut breakpoints = Vec::with_capacity(count + 1);
        let mut slopes: Vec<f64> = Vec::with_capacity(count);
        let mut prev_val = 0.0;
        let mut prev_w = 0.0;
        breakpoints.push(0.0);
        for i in 1..=count {
            let w = i as f64 * h;
            let val = self.eval(w)?;
            let slope = (val - prev_val) / (w - prev_w);
            // merge segments whose slopes agree (linear stretches of tau)
            if let Some(&last) = slopes.last() {
                if slope >= last - 1e-12 * last.abs().max(1.0) {
                    // keep strict decrease: extend the previous segment
                    let start = breakpoints[breakpoints.len() - 2];
                    let merged = (val - self.eval(start)?) / (w - start);
                    *slopes.last_mut().unwrap() = merged;
                    *breakpoints.last_mut().unwrap() = w;
                    prev_val = val;
                    prev_w = w;
                    continue;
                }
            }
            breakpoints.push(w);
            slopes.push(slope);
            prev_val = val;
            prev_w = w;
        }
        // the final grid point does not start a new segment: the tail
        // continues with the last slope
        breakpoints.pop();
        let cost = TransportCost::PiecewiseAffine { breakpoints, slopes };
        cost.validate()?;
        Ok(cost)
    }

    /// Check admissibility on a sample grid: `tau(0) = 0`, monotone, concave
    /// (nonpositive second differences up to tolerance), continuous at 0.
    pub fn validate_admissible(&self, grid: &[f64]) -> Result<AdmissibilityReport> {
        if grid.len() < 3 || grid.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::Validation("grid must be sorted with >= 3 points".into()));
        }
        let tol = match self {
            Self::Sampled { .. } => 1e-6,
            _ => 1e-9,
        };
        let values: Vec<f64> = grid.iter().map(|&w| self.eval(w)).collect::<Result<_>>()?;
        let zero_at_origin = self.eval(0.0)?.abs() <= 1e-14;
        let scale = values.iter().fold(1e-300, |m, v| v.abs().max(m));
        let nondecreasing = values.windows(2).all(|p| p[1] >= p[0] - tol * scale);
        let mut max_second_difference = f64::NEG_INFINITY;
        for k in 1..grid.len() - 1 {
            let (w0, w1, w2) = (grid[k - 1], grid[k], grid[k + 1]);
            let sl = (values[k] - values[k - 1]) / (w1 - w0);
            let sr = (values[k + 1] - values[k]) / (w2 - w1);
            max_second_difference = max_second_difference.max((sr - sl) / scale);
        }
        let concave = max_second_difference <= tol;
        // tau(w_min) should be comparable with w_min * local slope; a jump at 0
        // shows up as a value that stays large as w_min shrinks.
        let w_min = grid.iter().copied().find(|&w| w > 0.0).unwrap_or(grid[0]);
        let continuous_at_zero = {
            let probe = self.eval(1e-9 * w_min.max(1e-9))?;
            probe <= 1e-3 * scale.max(1.0)
        };
        Ok(AdmissibilityReport {
            zero_at_origin,
            nondecreasing,
            concave,
            continuous_at_zero,
            max_second_difference,
        })
    }
}
