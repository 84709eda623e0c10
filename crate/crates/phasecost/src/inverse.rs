//! Inverse solvers: recover a phase-field cost `c` inducing a prescribed
//! transport cost `tau`, either in closed form (power law, urban planning),
//! by the piecewise-affine recursion, or by numerical deconvolution of
//! `[-tau(-.)]^* = g * r` with the kernel `r(s) = 2 sqrt(2) / (3 sqrt(-s))`.

use crate::costs::TransportCost;
use crate::error::{Error, Result};
use crate::forward;
use crate::monotone::{SampledFn, StepFn};
use crate::phase_costs::{
    g_from_z, z_from_g, AnalyticG, AnalyticZ, GTransform, MassSpecificCost, PhaseFieldCost,
};
use crate::quad;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

/// `4 sqrt(2) / 3`: the exact kernel integral over a cell is
/// `int_{s_lo}^{s_hi} r(t - s) ds = (4 sqrt(2)/3)(sqrt(s_hi - t) - sqrt(s_lo - t))`.
const CELL_COEF: f64 = 4.0 * std::f64::consts::SQRT_2 / 3.0;

fn cell_kernel(t: f64, s_lo: f64, s_hi: f64) -> f64 {
    let lo = (s_lo - t).max(0.0);
    let hi = (s_hi - t).max(0.0);
    CELL_COEF * (hi.sqrt() - lo.sqrt())
}

/// Recover the step cost `z` for a piecewise-affine `tau` by the recursion
/// `phi_j^{3/2} - phi_{j-1}^{3/2} = (3 w_j / (4 sqrt(2))
///   - sum_{i<j} (phi_i^{3/2} - phi_{i-1}^{3/2}) / (sqrt(a_i - a_{j+1}) + sqrt(a_i - a_j)))
///   * sqrt(a_j - a_{j+1})`,
/// where `a_j` are the slopes in decreasing order and `w_j` the kink masses.
pub fn invert_piecewise_affine(tau: &TransportCost) -> Result<StepFn> {
    let TransportCost::PiecewiseAffine { breakpoints, slopes } = tau else {
        return Err(Error::UnsupportedForm(
            "the affine recursion needs a piecewise-affine cost".into(),
        ));
    };
    tau.validate()?;
    let n = slopes.len();
    if n == 1 {
        return Ok(StepFn::constant(slopes[0]));
    }
    // d[j-1] = phi_j^{3/2} - phi_{j-1}^{3/2}
    let mut d: Vec<f64> = Vec::with_capacity(n - 1);
    let mut thresholds = Vec::with_capacity(n - 1);
    let mut phi32 = 0.0;
    let coef = 3.0 / (4.0 * std::f64::consts::SQRT_2);
    for j in 1..n {
        let wj = breakpoints[j];
        let mut paren = coef * wj;
        for (i, &di) in d.iter().enumerate() {
            // paper index i+1 <-> slope a_{i+1} = slopes[i]
            paren -= di / ((slopes[i] - slopes[j]).sqrt() + (slopes[i] - slopes[j - 1]).sqrt());
        }
        if !(paren > 0.0) {
            return Err(Error::Numeric(format!(
                "affine recursion inconsistent at kink {j}: parenthesis {paren} <= 0"
            )));
        }
        let dj = paren * (slopes[j - 1] - slopes[j]).sqrt();
        phi32 += dj;
        d.push(dj);
        thresholds.push(phi32.powf(2.0 / 3.0));
    }
    StepFn::new(thresholds, slopes[..n - 1].to_vec(), slopes[n - 1])
}

/// Which of the two known urban-planning phase-field costs to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UrbanVariant {
    /// Piecewise-constant `z`: `a` below the threshold `P`, `b` beyond
    /// (exactly representable, the default).
    #[default]
    Step,
    /// Smooth `c(phi) = max(a phi - (2 pi^2/9)(d/(a-b))^2 phi^4, b phi)`.
    Smooth,
}

/// The urban-planning step threshold `P = (1/2) (9 d^2 / (4(a-b)))^{1/3}`.
pub fn urban_step_threshold(a: f64, b: f64, d: f64) -> f64 {
    0.5 * (9.0 * d * d / (4.0 * (a - b))).cbrt()
}

/// Closed-form inverses for the power-law and urban-planning costs.
pub fn analytic_inverse(tau: &TransportCost, variant: UrbanVariant) -> Result<PhaseFieldCost> {
    tau.validate()?;
    let z = match tau {
        TransportCost::Power { alpha } => {
            let a = *alpha;
            let beta = 0.5 + a / (1.0 - a);
            let k = a.powf(1.0 / (1.0 - a)) / (2.0 * std::f64::consts::PI).sqrt() * 3.0
                * gamma(beta)
                / (2.0 * gamma(beta + 0.5));
            // c(phi) = K^{2(1-a)/(1+a)} phi^{2(2a-1)/(1+a)}, z = c / phi
            MassSpecificCost::Analytic(AnalyticZ::PowerLaw {
                coeff: k.powf(2.0 * (1.0 - a) / (1.0 + a)),
                exponent: 3.0 * (a - 1.0) / (1.0 + a),
            })
        }
        TransportCost::UrbanPlanning { a, b, d } => match variant {
            UrbanVariant::Step => MassSpecificCost::Step(StepFn::new(
                vec![urban_step_threshold(*a, *b, *d)],
                vec![*a],
                *b,
            )?),
            UrbanVariant::Smooth => {
                MassSpecificCost::Analytic(AnalyticZ::UrbanPlanningSmooth { a: *a, b: *b, d: *d })
            }
        },
        _ => {
            return Err(Error::UnsupportedForm(
                "closed-form inverses exist for power and urban-planning costs; \
                 use the affine or deconvolution route"
                    .into(),
            ))
        }
    };
    PhaseFieldCost::new(z)
}

/// `[g * r](t) = (4/3) int_0^inf g(t + q^2/2) dq`, exact for step and
/// analytic `g`, adaptive quadrature for sampled `g`.
pub fn abel_forward(g: &GTransform, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("slope must be nonnegative, got {t}")));
    }
    match g {
        GTransform::Step(f) => {
            let starts = f.interval_starts();
            let values = f.interval_values();
            if *values.last().unwrap() > 0.0 {
                return Err(Error::Numeric(
                    "step g does not vanish at infinity: [g*r] diverges".into(),
                ));
            }
            let mut total = 0.0;
            for (i, &v) in values.iter().enumerate() {
                let s_lo = starts[i];
                let s_hi = starts.get(i + 1).copied().unwrap_or(f64::INFINITY);
                if s_hi <= t || v == 0.0 {
                    continue;
                }
                if v.is_infinite() {
                    return Ok(f64::INFINITY);
                }
                total += v * cell_kernel(t, s_lo, s_hi);
            }
            Ok(total)
        }
        GTransform::Analytic(AnalyticG::PowerLaw { coeff, exponent }) => {
            let beta = -exponent;
            if !(beta > 0.5) {
                return Err(Error::Numeric(format!(
                    "power-law g with exponent {exponent} is not kernel-integrable"
                )));
            }
            if t == 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok(abel_power_unit(beta, t) * coeff)
        }
        GTransform::Analytic(AnalyticG::SqrtBand { a, b, coeff }) => {
            if t < *b {
                Ok(f64::INFINITY)
            } else if t >= *a {
                Ok(0.0)
            } else {
                // int_t^a sqrt((a-s)/(s-t)) ds = (pi/2)(a - t)
                Ok(coeff / std::f64::consts::SQRT_2 * (4.0 / 3.0) * std::f64::consts::FRAC_PI_2
                    * (a - t))
            }
        }
        GTransform::Sampled(f) => {
            let s_max = *f.x().last().unwrap();
            let g_end = *f.y().last().unwrap();
            let g_max = f.y().iter().cloned().fold(0.0f64, f64::max);
            if g_end > 1e-9 * (1.0 + g_max) {
                return Err(Error::Numeric(
                    "sampled g does not vanish at its right end: [g*r] diverges \
                     under constant extension"
                        .into(),
                ));
            }
            if t >= s_max {
                return Ok(0.0);
            }
            let q_max = (2.0 * (s_max - t)).sqrt();
            let integrand = |q: f64| f.eval(t + 0.5 * q * q);
            let rough = g_max * q_max;
            let tol = 1e-10 * (1.0 + rough);
            Ok(4.0 / 3.0 * quad::adaptive_simpson(&integrand, 0.0, q_max, tol))
        }
    }
}

/// `[g * r](t)` for the unit power law `g(s) = s^{-beta}`:
/// `(4/(3 sqrt 2)) (2/(2 beta - 1)) (Gamma(beta + 1/2)/Gamma(beta)) sqrt(pi) t^{1/2 - beta}`.
fn abel_power_unit(beta: f64, t: f64) -> f64 {
    4.0 / (3.0 * std::f64::consts::SQRT_2)
        * (2.0 / (2.0 * beta - 1.0))
        * (gamma(beta + 0.5) / gamma(beta))
        * std::f64::consts::PI.sqrt()
        * t.powf(0.5 - beta)
}

/// A power-law fit `g(s) ~ coeff * s^exponent` used for head/tail extension.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerFit {
    pub coeff: f64,
    pub exponent: f64,
}

impl PowerFit {
    pub fn eval(&self, s: f64) -> f64 {
        self.coeff * s.powf(self.exponent)
    }
}

/// Log-log least squares; `None` unless all samples are positive.
fn power_fit(s: &[f64], g: &[f64]) -> Option<PowerFit> {
    if s.len() < 3 || g.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let n = s.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&si, &gi) in s.iter().zip(g) {
        let x = si.ln();
        let y = gi.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-14 {
        return None;
    }
    let exponent = (n * sxy - sx * sy) / denom;
    let coeff = ((sy - exponent * sx) / n).exp();
    Some(PowerFit { coeff, exponent })
}

/// The discretized first-kind equation `[g * r](t_j) = rhs_j` on a slope
/// grid, with `g` represented as piecewise constant on the grid cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeconvolutionProblem {
    /// Strictly increasing slope grid `t_0 < ... < t_M`.
    pub t_grid: Vec<f64>,
    /// Conjugate values `[-tau(-.)]^*(t_k)`, finite, nonincreasing, convex.
    pub rhs: Vec<f64>,
    /// Optional ridge weight; 0 selects plain back substitution plus the
    /// monotone projection.
    pub regularization: f64,
}

impl DeconvolutionProblem {
    pub fn new(t_grid: Vec<f64>, rhs: Vec<f64>, regularization: f64) -> Result<Self> {
        if t_grid.len() != rhs.len() || t_grid.len() < 3 {
            return Err(Error::Validation(
                "grid and rhs must match with at least 3 points".into(),
            ));
        }
        if t_grid.windows(2).any(|p| !(p[1] > p[0])) || !(t_grid[0] >= 0.0) {
            return Err(Error::Validation("slope grid must be nonnegative and increasing".into()));
        }
        if rhs.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("rhs must be finite and nonnegative".into()));
        }
        let scale = rhs[0].max(1.0);
        if rhs.windows(2).any(|p| p[1] > p[0] + 1e-9 * scale) {
            return Err(Error::Validation("rhs must be nonincreasing".into()));
        }
        if !(regularization >= 0.0) {
            return Err(Error::Validation("regularization must be nonnegative".into()));
        }
        Ok(Self { t_grid, rhs, regularization })
    }

    /// Sample the conjugate of `tau` on `[t_min, t_max]` with `n` cells.
    /// `grading >= 1` clusters points near `t_max` (where the conjugate
    /// vanishes and the kernel mass concentrates): `grading = 1` is uniform,
    /// `2` quadratic.
    pub fn from_transport_cost(
        tau: &TransportCost,
        t_min: f64,
        t_max: f64,
        n: usize,
        grading: f64,
    ) -> Result<Self> {
        if !(t_max > t_min && t_min >= 0.0) || n < 3 {
            return Err(Error::Validation(format!(
                "need 0 <= t_min < t_max and n >= 3, got [{t_min}, {t_max}] with {n}"
            )));
        }
        let range = t_max - t_min;
        let mut t_grid: Vec<f64> = (0..=n)
            .map(|k| t_max - range * ((n - k) as f64 / n as f64).powf(grading))
            .collect();
        // pin the endpoints exactly: rounding must not push t_0 below t_min,
        // where the conjugate may be infinite
        t_grid[0] = t_min;
        t_grid[n] = t_max;
        let mut rhs = Vec::with_capacity(n + 1);
        for &t in &t_grid {
            let v = tau.conjugate(t)?.value;
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "conjugate is infinite at t = {t}; start the grid at the smallest slope"
                )));
            }
            rhs.push(v);
        }
        Self::new(t_grid, rhs, 0.0)
    }
}

/// Output of [`deconvolve`]: `g` sampled at the grid nodes, the collocation
/// residual, and power fits of the recovered `g` near both grid ends (for
/// extension beyond the grid).
#[derive(Debug, Clone)]
pub struct DeconvolutionResult {
    pub g: SampledFn,
    /// `max_j |sum_k g_k A_jk + tail_j - rhs_j| / (1 + rhs_0)`.
    pub residual: f64,
    pub head_fit: Option<PowerFit>,
    pub tail_fit: Option<PowerFit>,
}

impl DeconvolutionResult {
    /// The recovered `g` extended by the head/tail power fits down to
    /// `t_0 / factor` and (if a tail fit exists) up to `t_M * factor`.
    pub fn extended_g(&self, factor: f64) -> Result<SampledFn> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let x0 = self.g.x()[0];
        let g0 = self.g.y()[0];
        if let Some(fit) = self.head_fit {
            let lo = x0 / factor;
            let m = 48;
            for k in 0..m {
                let s = lo * (x0 / lo).powf(k as f64 / m as f64);
                x.push(s);
                // never below the first recovered value: keep monotone
                y.push(fit.eval(s).max(g0));
            }
        }
        x.extend_from_slice(self.g.x());
        y.extend_from_slice(self.g.y());
        if let Some(fit) = self.tail_fit {
            let xe = *self.g.x().last().unwrap();
            let ge = *self.g.y().last().unwrap();
            let hi = xe * factor;
            let m = 48;
            for k in 1..=m {
                let s = xe * (hi / xe).powf(k as f64 / m as f64);
                x.push(s);
                y.push(fit.eval(s).min(ge));
            }
        }
        SampledFn::new(x, y)
    }
}

/// Kernel moments of cell `[p, q]` against collocation point `t_j <= p`:
/// contribution of a linear `g` with nodal values `(g_lo, g_hi)` is
/// `(2 sqrt 2 / 3) (g_lo (m0 - w1) + g_hi w1)`.
fn cell_moments(t_j: f64, p: f64, q: f64) -> (f64, f64) {
    let u0 = (p - t_j).max(0.0);
    let u1 = (q - t_j).max(0.0);
    let m0 = 2.0 * (u1.sqrt() - u0.sqrt());
    let m1 = 2.0 / 3.0 * (u1 * u1.sqrt() - u0 * u0.sqrt());
    let w1 = (m1 - u0 * m0) / (q - p);
    (m0 - w1, w1)
}

const NODE_COEF: f64 = 2.0 * std::f64::consts::SQRT_2 / 3.0;

/// Solve `[g * r] = rhs` by product-trapezoid collocation: `g` is piecewise
/// linear on the grid with nodal unknowns, and the kernel moments over each
/// cell are exact, making the scheme second-order consistent. The system is
/// upper triangular and solved by back substitution from the boundary value
/// `g(t_M)`; a positive ridge weight switches to regularized least squares.
/// The result is projected onto nonnegative nonincreasing functions. When
/// the rhs has not decayed at `t_M`, the tail of `g` beyond the grid is
/// fitted as a power law (calibrated so that it reproduces `rhs_M` exactly)
/// and its contribution subtracted from the rhs.
pub fn deconvolve(problem: &DeconvolutionProblem) -> Result<DeconvolutionResult> {
    let t = &problem.t_grid;
    let m = t.len() - 1;
    let rhs = &problem.rhs;
    let scale = rhs[0].max(1.0);

    // tail beyond t_M: the conjugate decays like t^{1/2 - beta} for a
    // power-law g, so read beta off the rhs decay and match rhs_M exactly
    let mut tail = vec![0.0; m];
    let mut tail_fit = None;
    if rhs[m] > 1e-10 * scale {
        let lo = t[m] / 4.0;
        let (ts, vs): (Vec<f64>, Vec<f64>) = t
            .iter()
            .zip(rhs)
            .filter(|(&tk, &vk)| tk >= lo && vk > 0.0)
            .map(|(&tk, &vk)| (tk, vk))
            .unzip();
        let fit = power_fit(&ts, &vs).ok_or_else(|| {
            Error::Numeric("rhs has not decayed at t_max and no power tail fits".into())
        })?;
        let beta = 0.5 - fit.exponent;
        if !(beta > 0.5) {
            return Err(Error::Numeric(format!(
                "rhs decay exponent {} is too slow for a kernel-integrable tail",
                fit.exponent
            )));
        }
        let coeff = rhs[m] / abel_power_unit(beta, t[m]);
        let tail_g = PowerFit { coeff, exponent: -beta };
        for (j, tj) in t[..m].iter().enumerate() {
            let q0 = (2.0 * (t[m] - tj)).sqrt();
            let f = |q: f64| tail_g.eval(tj + 0.5 * q * q);
            tail[j] = 4.0 / 3.0 * quad::integrate_to_infinity(&f, q0, 1e-12 * scale)?;
        }
        tail_fit = Some(tail_g);
    }

    // nodal values g[0..=m]; boundary: g at t_M comes from the tail fit
    let mut g = vec![0.0; m + 1];
    g[m] = tail_fit.map_or(0.0, |f| f.eval(t[m]));
    if problem.regularization > 0.0 {
        // ridge least squares on the nodal unknowns g_0..g_{m-1} with the
        // boundary value folded into the rhs
        let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
        let mut b = nalgebra::DVector::<f64>::zeros(m);
        for j in 0..m {
            b[j] = rhs[j] - tail[j];
            for k in j..m {
                let (w_lo, w_hi) = cell_moments(t[j], t[k], t[k + 1]);
                a[(j, k)] += NODE_COEF * w_lo;
                if k + 1 < m {
                    a[(j, k + 1)] += NODE_COEF * w_hi;
                } else {
                    b[j] -= NODE_COEF * w_hi * g[m];
                }
            }
        }
        let ata = a.transpose() * &a
            + nalgebra::DMatrix::identity(m, m) * problem.regularization;
        let atb = a.transpose() * b;
        let sol = ata
            .cholesky()
            .ok_or_else(|| Error::Numeric("ridge normal equations are singular".into()))?
            .solve(&atb);
        g[..m].copy_from_slice(sol.as_slice());
    } else {
        for j in (0..m).rev() {
            let mut acc = tail[j];
            let mut diag = 0.0;
            for k in j..m {
                let (w_lo, w_hi) = cell_moments(t[j], t[k], t[k + 1]);
                if k == j {
                    diag = NODE_COEF * w_lo;
                } else {
                    acc += NODE_COEF * w_lo * g[k];
                }
                acc += NODE_COEF * w_hi * g[k + 1];
            }
            g[j] = (rhs[j] - acc) / diag;
        }
    }

    for v in g.iter_mut() {
        *v = v.max(0.0);
    }
    // SampledFn projects onto nonincreasing values (PAV) on construction
    let g_fn = SampledFn::new(t.clone(), g)?;

    let mut residual = 0.0f64;
    for j in 0..m {
        let mut pred = tail[j];
        for k in j..m {
            let (w_lo, w_hi) = cell_moments(t[j], t[k], t[k + 1]);
            pred += NODE_COEF * (w_lo * g_fn.y()[k] + w_hi * g_fn.y()[k + 1]);
        }
        residual = residual.max((pred - rhs[j]).abs());
    }
    let residual = residual / (1.0 + rhs[0]);

    let head_hi = (t[0].max(1e-300) * 2.0).max(t[2]);
    let head: Vec<usize> = (0..=m).filter(|&k| t[k] <= head_hi).collect();
    let head_fit = power_fit(
        &head.iter().map(|&k| t[k]).collect::<Vec<_>>(),
        &head.iter().map(|&k| g_fn.y()[k]).collect::<Vec<_>>(),
    )
    .filter(|f| f.exponent < 0.0);

    Ok(DeconvolutionResult { g: g_fn, residual, head_fit, tail_fit })
}

/// Inversion route selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseRoute {
    #[default]
    Auto,
    Affine,
    Analytic,
    Deconvolve,
}

#[derive(Debug, Clone)]
pub struct InverseOptions {
    pub variant: UrbanVariant,
    /// Slope-grid bounds for the deconvolution route; inferred from the
    /// extreme slopes of `tau` when absent.
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    /// Number of deconvolution cells.
    pub grid: usize,
    /// Grid grading exponent (1 uniform, 2 clusters near `t_max`).
    pub grading: f64,
    /// Power-law extension factor for `g` beyond the slope grid.
    pub head_factor: f64,
    pub regularization: f64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            variant: UrbanVariant::Step,
            t_min: None,
            t_max: None,
            grid: 800,
            grading: 2.0,
            head_factor: 100.0,
            regularization: 0.0,
        }
    }
}

/// Post-solve diagnostics serialized next to the recovered cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseReport {
    pub route: String,
    /// Deconvolution residual (absent on closed-form routes).
    pub residual: Option<f64>,
    /// Max gap `|[g*r](t) - [-tau(-.)]^*(t)|` over sampled differentiable
    /// slopes.
    pub necessary_gap: Option<f64>,
    /// Max relative forward-map error over the check masses.
    pub roundtrip_rel_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct InverseSolution {
    pub c: PhaseFieldCost,
    pub report: InverseReport,
}

/// Masses used for the roundtrip/necessary checks: kinks where available,
/// otherwise a geometric sweep.
fn check_masses(tau: &TransportCost) -> Vec<f64> {
    match tau {
        TransportCost::PiecewiseAffine { breakpoints, .. } => {
            let mut ws: Vec<f64> = breakpoints[1..].to_vec();
            // interior points of each segment, where tau is differentiable
            let mut mids: Vec<f64> =
                breakpoints.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
            mids.push(breakpoints.last().unwrap() + 1.0);
            ws.extend(mids);
            ws
        }
        TransportCost::Sampled { w, .. } => {
            let hi = *w.last().unwrap();
            (1..8).map(|k| hi * k as f64 / 8.0).collect()
        }
        _ => vec![0.25, 0.5, 1.0, 2.0, 4.0],
    }
}

/// Max `|[g*r](t) - [-tau(-.)]^*(t)|` over slopes `t = tau'(w)` at
/// differentiability points among the given masses (Thm: the convolution
/// identity is necessary exactly there).
pub fn necessary_condition_gap(
    z: &MassSpecificCost,
    tau: &TransportCost,
    ws: &[f64],
) -> Result<f64> {
    let g = g_from_z(z)?;
    let mut gap = 0.0f64;
    for &w in ws {
        let right = tau.right_derivative(w)?;
        let left = tau.left_derivative(w)?;
        if (left - right).abs() > 1e-9 * (1.0 + left.abs()) || !right.is_finite() {
            continue; // kink or infinite slope: condition not required
        }
        let lhs = tau.conjugate(right)?.value;
        let rhs = abel_forward(&g, right)?;
        if lhs.is_infinite() && rhs.is_infinite() {
            continue;
        }
        gap = gap.max((lhs - rhs).abs());
    }
    Ok(gap)
}

fn roundtrip_error(c: &PhaseFieldCost, tau: &TransportCost, ws: &[f64]) -> Result<f64> {
    let mut err = 0.0f64;
    for &w in ws {
        if !(w > 0.0) {
            continue;
        }
        let predicted = match &c.z {
            MassSpecificCost::Step(s) => forward::tau_closed_form(s, w)?.tau_value,
            z => forward::tau_modica_mortola(z, w, None)?.tau_value,
        };
        let target = tau.eval(w)?;
        err = err.max((predicted - target).abs() / (1.0 + target.abs()));
    }
    Ok(err)
}

/// Solve the inverse problem for an admissible `tau` along the requested
/// route (`Auto` picks the most specific applicable one).
pub fn solve_inverse(
    tau: &TransportCost,
    route: InverseRoute,
    opts: &InverseOptions,
) -> Result<InverseSolution> {
    tau.validate()?;
    let grid: Vec<f64> = (0..=64).map(|k| 8.0 * (k as f64 / 64.0).powi(2)).collect();
    let adm = tau.validate_admissible(&grid)?;
    if !adm.pass() {
        return Err(Error::Validation(format!("transport cost is not admissible: {adm:?}")));
    }
    let picked = if route == InverseRoute::Auto {
        match tau {
            TransportCost::Power { .. } | TransportCost::UrbanPlanning { .. } => {
                InverseRoute::Analytic
            }
            TransportCost::PiecewiseAffine { .. } => InverseRoute::Affine,
            TransportCost::Sampled { .. } => InverseRoute::Deconvolve,
        }
    } else {
        route
    };
    let ws = check_masses(tau);
    let (c, residual, route_name) = match picked {
        InverseRoute::Auto => unreachable!(),
        InverseRoute::Affine => {
            let z = invert_piecewise_affine(tau)?;
            (PhaseFieldCost::new(MassSpecificCost::Step(z))?, None, "affine")
        }
        InverseRoute::Analytic => (analytic_inverse(tau, opts.variant)?, None, "analytic"),
        InverseRoute::Deconvolve => {
            let t_min = match opts.t_min {
                Some(v) => v,
                None => {
                    let hi = match tau {
                        TransportCost::Sampled { w, .. } => *w.last().unwrap(),
                        TransportCost::PiecewiseAffine { breakpoints, .. } => {
                            breakpoints.last().unwrap() * 2.0
                        }
                        _ => 16.0,
                    };
                    tau.left_derivative(hi)?
                }
            };
            let t_max = match opts.t_max {
                Some(v) => v,
                None => {
                    let s0 = tau.right_derivative(0.0)?;
                    if s0.is_finite() {
                        s0
                    } else {
                        return Err(Error::Validation(
                            "tau'(0) is infinite: pass an explicit t_max for the slope grid"
                                .into(),
                        ));
                    }
                }
            };
            let problem = DeconvolutionProblem {
                regularization: opts.regularization,
                ..DeconvolutionProblem::from_transport_cost(
                    tau,
                    t_min,
                    t_max,
                    opts.grid,
                    opts.grading,
                )?
            };
            let result = deconvolve(&problem)?;
            let g = GTransform::Sampled(result.extended_g(opts.head_factor)?);
            (PhaseFieldCost::new(z_from_g(&g)?)?, Some(result.residual), "deconvolve")
        }
    };
    let necessary_gap = necessary_condition_gap(&c.z, tau, &ws).ok();
    let roundtrip_rel_error = roundtrip_error(&c, tau, &ws).ok();
    Ok(InverseSolution {
        c,
        report: InverseReport {
            route: route_name.to_string(),
            residual,
            necessary_gap,
            roundtrip_rel_error,
        },
    })
}
