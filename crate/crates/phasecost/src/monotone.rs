//! Nonincreasing lower semi-continuous functions on `[0, inf)` and their
//! generalized inverses.
//!
//! Two representations are used throughout the toolkit: exact step functions
//! (left-closed intervals, so lower semi-continuity is encoded structurally)
//! and sampled functions with linear interpolation. The generalized inverse
//! `f^-1(x) = inf { y >= 0 | f(y) <= x }` (with `inf {} = inf`) is an exact
//! involution on step functions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A nonincreasing step function on `[0, inf)`.
///
/// The value is `levels[i]` on `[thresholds[i-1], thresholds[i])` (with an
/// implicit leading threshold 0) and `final_level` on the unbounded tail.
/// Levels may be `f64::INFINITY`; since levels decrease strictly, only the
/// first one can be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFn {
    thresholds: Vec<f64>,
    #[serde(with = "crate::infjson::vec")]
    levels: Vec<f64>,
    #[serde(with = "crate::infjson::scalar")]
    final_level: f64,
}

impl StepFn {
    /// Build a step function and validate monotonicity.
    pub fn new(thresholds: Vec<f64>, levels: Vec<f64>, final_level: f64) -> Result<Self> {
        if thresholds.len() != levels.len() {
            return Err(Error::Validation(format!(
                "step function needs one level per threshold, got {} thresholds and {} levels",
                thresholds.len(),
                levels.len()
            )));
        }
        let mut prev_t = 0.0;
        for &t in &thresholds {
            if !(t > prev_t) || !t.is_finite() {
                return Err(Error::Validation(format!(
                    "thresholds must be finite and strictly increasing from 0, got {t} after {prev_t}"
                )));
            }
            prev_t = t;
        }
        let mut prev_l = f64::INFINITY;
        for (i, &l) in levels.iter().chain(std::iter::once(&final_level)).enumerate() {
            if l.is_nan() || l < 0.0 {
                return Err(Error::Validation(format!("level {i} is {l}, must be in [0, inf]")));
            }
            if i > 0 && !(l < prev_l) {
                return Err(Error::Validation(format!(
                    "levels must be strictly decreasing, got {l} after {prev_l}"
                )));
            }
            prev_l = l;
        }
        Ok(Self { thresholds, levels, final_level })
    }

    /// Constant function.
    pub fn constant(value: f64) -> Self {
        Self { thresholds: Vec::new(), levels: Vec::new(), final_level: value }
    }

    /// Build from interval starts and values, merging equal neighbouring
    /// values and dropping empty intervals. `starts[0]` must be 0.
    pub fn from_intervals(starts: &[f64], values: &[f64]) -> Result<Self> {
        if starts.is_empty() || starts[0] != 0.0 || starts.len() != values.len() {
            return Err(Error::Validation(
                "interval list must start at 0 and pair each start with a value".into(),
            ));
        }
        let mut thresholds = Vec::new();
        let mut levels = Vec::new();
        let mut current = values[0];
        for i in 1..starts.len() {
            if starts[i] <= *thresholds.last().unwrap_or(&0.0) {
                return Err(Error::Validation("interval starts must be strictly increasing".into()));
            }
            if values[i] == current {
                continue; // merge
            }
            thresholds.push(starts[i]);
            levels.push(current);
            current = values[i];
        }
        Self::new(thresholds, levels, current)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn final_level(&self) -> f64 {
        self.final_level
    }

    /// Number of proper steps (intervals before the tail).
    pub fn num_steps(&self) -> usize {
        self.thresholds.len()
    }

    /// All interval values including the tail, in decreasing order.
    pub fn interval_values(&self) -> Vec<f64> {
        let mut v = self.levels.clone();
        v.push(self.final_level);
        v
    }

    /// Interval starts (including the leading 0), aligned with
    /// [`Self::interval_values`].
    pub fn interval_starts(&self) -> Vec<f64> {
        let mut s = vec![0.0];
        s.extend_from_slice(&self.thresholds);
        s
    }

    /// Evaluate at `y >= 0` (left-closed intervals).
    pub fn eval(&self, y: f64) -> f64 {
        debug_assert!(y >= 0.0);
        match self.thresholds.iter().position(|&t| y < t) {
            Some(i) => self.levels[i],
            None => self.final_level,
        }
    }

    /// Limit as the argument tends to 0 from the right (equals the first
    /// interval value).
    pub fn limit_at_zero(&self) -> f64 {
        self.levels.first().copied().unwrap_or(self.final_level)
    }

    /// Limit at infinity (the tail value).
    pub fn limit_at_infinity(&self) -> f64 {
        self.final_level
    }

    /// The generalized inverse `inf { y | f(y) <= x }`, again a step function.
    /// An exact involution: threshold and level values are swapped verbatim.
    pub fn generalized_inverse(&self) -> Self {
        let vals = self.interval_values();
        let starts = self.interval_starts();
        let k = self.thresholds.len();
        let mut xstarts = vec![0.0];
        let mut xvals = Vec::new();
        // Below the tail value nothing satisfies f(y) <= x.
        let tail = vals[k];
        if tail > 0.0 {
            xvals.push(f64::INFINITY);
            if tail.is_finite() {
                xstarts.push(tail);
            } else {
                // f is identically infinity after validation only when constant.
                return Self::constant(f64::INFINITY);
            }
        }
        // On [vals[i], vals[i-1]) the inverse equals starts[i], i = k..1.
        for i in (1..=k).rev() {
            xvals.push(starts[i]);
            if vals[i - 1].is_finite() {
                xstarts.push(vals[i - 1]);
            }
        }
        // At and above the first interval value the inverse is 0, unless that
        // value is infinite (then the previous interval extends forever).
        if vals[0].is_finite() {
            xvals.push(0.0);
        }
        debug_assert_eq!(xstarts.len(), xvals.len());
        Self::from_intervals(&xstarts, &xvals).expect("inverse of a valid step function is valid")
    }

    /// Apply a strictly increasing map to every level (tail included).
    pub fn map_levels(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.thresholds.clone(),
            self.levels.iter().map(|&l| f(l)).collect(),
            f(self.final_level),
        )
    }

    /// Apply a strictly increasing map with `f(0) = 0` to every threshold.
    pub fn map_thresholds(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.thresholds.iter().map(|&t| f(t)).collect(),
            self.levels.clone(),
            self.final_level,
        )
    }

    /// `int_0^inf f`, infinite unless the function has compact support
    /// (zero tail) and finite levels.
    pub fn integral(&self) -> f64 {
        if self.final_level > 0.0 {
            return f64::INFINITY;
        }
        let starts = self.interval_starts();
        let mut total = 0.0;
        for i in 0..self.levels.len() {
            total += self.levels[i] * (self.thresholds[i] - starts[i]);
        }
        total
    }
}

/// A sampled nonincreasing function with linear interpolation between nodes.
/// Constant before the first node and after the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFn {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl SampledFn {
    /// Build from samples; `x` must be strictly increasing and nonnegative.
    /// `y` is projected onto the nonincreasing cone (isotonic regression),
    /// so mild noise from upstream quadrature does not invalidate inversion.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::Validation("sampled function needs >= 2 aligned samples".into()));
        }
        if x.windows(2).any(|p| !(p[1] > p[0])) || x[0] < 0.0 {
            return Err(Error::Validation("sample grid must be nonnegative and strictly increasing".into()));
        }
        if y.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Validation("sample values must be in [0, inf]".into()));
        }
        let y = pav_nonincreasing(&y);
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn eval(&self, q: f64) -> f64 {
        let n = self.x.len();
        if q <= self.x[0] {
            return self.y[0];
        }
        if q >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&q).unwrap()) {
            Ok(i) => return self.y[i],
            Err(i) => i,
        };
        let (x0, x1) = (self.x[i - 1], self.x[i]);
        let t = (q - x0) / (x1 - x0);
        self.y[i - 1] + t * (self.y[i] - self.y[i - 1])
    }

    pub fn limit_at_zero(&self) -> f64 {
        self.y[0]
    }

    pub fn limit_at_infinity(&self) -> f64 {
        *self.y.last().unwrap()
    }

    /// Generalized inverse by axis reflection. Strictly decreasing stretches
    /// invert exactly; plateaus map to their left endpoint (the infimum).
    pub fn generalized_inverse(&self) -> Self {
        let mut xs = Vec::with_capacity(self.x.len());
        let mut ys = Vec::with_capacity(self.x.len());
        // Walk from the right so the x-axis of the inverse increases; keep
        // the smallest y achieving each value (inf in the definition).
        for i in (0..self.x.len()).rev() {
            let val = self.y[i];
            if xs.last().is_some_and(|&last| val <= last) {
                continue;
            }
            xs.push(val);
            ys.push(self.x[i]);
        }
        if xs.len() < 2 {
            // Constant input: inverse is a step, approximate with a steep ramp.
            let v = self.y[0];
            let eps = (v.abs() * 1e-12).max(1e-300);
            xs = vec![v, v + eps];
            ys = vec![self.x[0], 0.0];
        }
        Self { x: xs, y: pav_nonincreasing(&ys) }
    }
}

/// Project onto nonincreasing sequences (pool adjacent violators, L2).
pub fn pav_nonincreasing(y: &[f64]) -> Vec<f64> {
    // PAV for nonincreasing fit == negated PAV for nondecreasing fit.
    let mut blocks: Vec<(f64, f64)> = Vec::with_capacity(y.len()); // (sum, count) of -y
    for &v in y {
        let mut sum = -v;
        let mut count = 1.0;
        while let Some(&(ps, pc)) = blocks.last() {
            if ps / pc > sum / count {
                blocks.pop();
                sum += ps;
                count += pc;
            } else {
                break;
            }
        }
        blocks.push((sum, count));
    }
    let mut out = Vec::with_capacity(y.len());
    for (sum, count) in blocks {
        let mean = -(sum / count);
        for _ in 0..count as usize {
            out.push(mean);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn eval_is_left_closed() {
        let f = StepFn::new(vec![1.0], vec![2.0], 0.0).unwrap();
        assert_eq!(f.eval(0.0), 2.0);
        assert_eq!(f.eval(0.999), 2.0);
        assert_eq!(f.eval(1.0), 0.0);
    }

    #[test]
    fn inverse_of_two_level_step() {
        // z = 2 on [0,1), 0 after  =>  z^-1 = 1 on [0,2), 0 after
        let z = StepFn::new(vec![1.0], vec![2.0], 0.0).unwrap();
        let inv = z.generalized_inverse();
        assert_eq!(inv.eval(0.0), 1.0);
        assert_eq!(inv.eval(1.9), 1.0);
        assert_eq!(inv.eval(2.0), 0.0);
        assert_eq!(inv.eval(5.0), 0.0);
    }

    #[test]
    fn inverse_of_constant() {
        // z == a  =>  z^-1 = inf below a, 0 at and above a
        let z = StepFn::constant(3.0);
        let inv = z.generalized_inverse();
        assert_eq!(inv.eval(0.0), f64::INFINITY);
        assert_eq!(inv.eval(2.9), f64::INFINITY);
        assert_eq!(inv.eval(3.0), 0.0);
    }

    #[test]
    fn inverse_with_infinite_head() {
        // g = inf on [0, 0.5), 7 on [0.5, 1), 0 after
        let g = StepFn::new(vec![0.5, 1.0], vec![f64::INFINITY, 7.0], 0.0).unwrap();
        let inv = g.generalized_inverse();
        // inv: inf{y | g(y) <= x}: x < 7 -> 1; x in [7, inf) -> 0.5
        assert_eq!(inv.eval(0.0), 1.0);
        assert_eq!(inv.eval(6.9), 1.0);
        assert_eq!(inv.eval(7.0), 0.5);
        assert_eq!(inv.eval(1e9), 0.5);
        assert_eq!(inv.generalized_inverse(), g);
    }

    #[test]
    fn integral_equality_on_compact_step() {
        let z = StepFn::new(vec![0.5, 2.0, 3.5], vec![4.0, 1.5, 0.25], 0.0).unwrap();
        let inv = z.generalized_inverse();
        assert_relative_eq!(z.integral(), inv.integral(), max_relative = 1e-12);
    }

    #[test]
    fn sampled_ramp_inverse_is_symmetric() {
        // z(phi) = 1 - phi on [0,1], 0 after -> inverse is the same ramp
        let x: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| 1.0 - v).collect();
        let f = SampledFn::new(x, y).unwrap();
        let inv = f.generalized_inverse();
        for q in [0.0, 0.25, 0.5, 0.99] {
            assert_relative_eq!(inv.eval(q), 1.0 - q, epsilon = 1e-12);
        }
    }

    #[test]
    fn pav_projects_noise() {
        let y = vec![3.0, 3.1, 2.0, 2.2, 1.0];
        let p = pav_nonincreasing(&y);
        assert!(p.windows(2).all(|w| w[0] >= w[1]));
        assert_relative_eq!(p[0], 3.05, epsilon = 1e-12);
    }

    fn arb_step() -> impl Strategy<Value = StepFn> {
        (1usize..6).prop_flat_map(|k| {
            (
                proptest::collection::vec(0.01f64..1.0, k),
                proptest::collection::vec(0.01f64..1.0, k + 1),
            )
                .prop_map(|(dt, dl)| {
                    let mut t = 0.0;
                    let thresholds: Vec<f64> = dt
                        .iter()
                        .map(|d| {
                            t += d;
                            t
                        })
                        .collect();
                    let mut acc = 0.0;
                    let mut levels: Vec<f64> = dl
                        .iter()
                        .map(|d| {
                            acc += d;
                            acc
                        })
                        .collect();
                    levels.reverse();
                    let final_level = levels.pop().unwrap();
                    StepFn::new(thresholds, levels, final_level).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn involution_is_exact(z in arb_step()) {
            prop_assert_eq!(z.generalized_inverse().generalized_inverse(), z);
        }

        #[test]
        fn inverse_is_nonincreasing(z in arb_step()) {
            let inv = z.generalized_inverse();
            let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
            for p in grid.windows(2) {
                prop_assert!(inv.eval(p[0]) >= inv.eval(p[1]));
            }
        }

        #[test]
        fn inverse_matches_inf_definition(z in arb_step(), x in 0.0f64..6.0) {
            // brute-force the inf over a fine y-grid
            let inv = z.generalized_inverse();
            let upper = z.thresholds().last().copied().unwrap_or(0.0) + 1.0;
            let mut inf_y = f64::INFINITY;
            let n = 20_000;
            for i in 0..=n {
                let y = upper * i as f64 / n as f64;
                if z.eval(y) <= x {
                    inf_y = y;
                    break;
                }
            }
            if z.final_level() <= x && inf_y.is_infinite() {
                inf_y = upper;
            }
            let got = inv.eval(x);
            if inf_y.is_finite() {
                prop_assert!((got - inf_y).abs() <= upper / n as f64 + 1e-12,
                    "inverse {} vs brute force {}", got, inf_y);
            } else {
                prop_assert!(got.is_infinite());
            }
        }
    }
}
