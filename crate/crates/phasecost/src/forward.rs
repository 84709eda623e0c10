//! Forward maps: the induced transport cost `tau^z` computed by three
//! independent routes (closed form for step costs, the Modica-Mortola
//! identity, and direct discretized minimization) for cross-validation.

use crate::error::{Error, Result};
use crate::monotone::StepFn;
use crate::phase_costs::{MassSpecificCost, PhaseFieldCost};
use crate::profiles;
use crate::quad;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    ClosedForm,
    ModicaMortola,
    DirectMinimization,
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Route::ClosedForm => "closed_form",
            Route::ModicaMortola => "modica_mortola",
            Route::DirectMinimization => "direct",
        })
    }
}

/// One evaluation of the forward map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardResult {
    pub w: f64,
    pub tau_value: f64,
    pub route: Route,
    /// Maximum of the (implied) optimal profile, when available.
    pub profile_max: Option<f64>,
    /// Estimate of `tau'(w)` (the Lagrange multiplier), when available.
    pub lagrange_slope: Option<f64>,
}

/// Closed-form scan over the branches of the step formula
/// `F_j = a_j w + 4 sum_{i<j} sqrt(ell_i (a_i - a_j))`.
#[derive(Debug, Clone, Copy)]
pub struct StepTauScan {
    pub tau: f64,
    /// 0-based optimal branch (largest minimizer): plateau height
    /// `starts[j_opt]`, slope `vals[j_opt]`.
    pub j_opt: usize,
    /// `tau'(w)` (slope of the flattest optimal branch).
    pub right_slope: f64,
    /// Left derivative (slope of the steepest optimal branch).
    pub left_slope: f64,
}

pub fn step_tau_scan(z: &StepFn, w: f64) -> Result<StepTauScan> {
    if w < 0.0 {
        return Err(Error::Domain(format!("mass must be nonnegative, got {w}")));
    }
    let vals = z.interval_values();
    let starts = z.interval_starts();
    if w == 0.0 {
        return Ok(StepTauScan { tau: 0.0, j_opt: 0, right_slope: vals[0], left_slope: vals[0] });
    }
    let mut best = f64::INFINITY;
    let mut j_min = usize::MAX;
    let mut j_max = usize::MAX;
    let mut barrier = 0.0; // 4 sum_i sqrt(ell_i (a_i - a_j)) accumulated per j
    for (j, &aj) in vals.iter().enumerate() {
        if aj.is_infinite() {
            continue;
        }
        barrier = 0.0;
        for i in 0..j {
            barrier += 4.0 * (profiles::ell(starts[i], starts[i + 1]) * (vals[i] - aj)).sqrt();
            if barrier.is_infinite() {
                break;
            }
        }
        let f = aj * w + barrier;
        if f < best * (1.0 - 1e-12) {
            best = f;
            j_min = j;
            j_max = j;
        } else if f <= best * (1.0 + 1e-12) {
            j_max = j;
            best = best.min(f);
        }
        // levels decrease and barriers grow; once the barrier alone exceeds
        // the current best no later branch can win
        if barrier > best {
            break;
        }
    }
    let _ = barrier;
    if !best.is_finite() {
        return Err(Error::Domain(
            "tau is infinite: z has an infinite level on a set of positive measure".into(),
        ));
    }
    Ok(StepTauScan { tau: best, j_opt: j_max, right_slope: vals[j_max], left_slope: vals[j_min] })
}

/// Route 1: exact piecewise-affine formula for step costs.
pub fn tau_closed_form(z: &StepFn, w: f64) -> Result<ForwardResult> {
    let scan = step_tau_scan(z, w)?;
    Ok(ForwardResult {
        w,
        tau_value: scan.tau,
        route: Route::ClosedForm,
        profile_max: Some(z.interval_starts()[scan.j_opt]),
        lagrange_slope: Some(scan.right_slope),
    })
}

/// `G(t) = t w + 2 int_0^{z^-1(t)} sqrt(2 max(0, z - t) phi) dphi`,
/// the Modica-Mortola value at candidate slope `t`.
fn mm_value(z: &MassSpecificCost, w: f64, t: f64) -> Result<f64> {
    let upper = z.inverse_at(t)?;
    if upper.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if upper == 0.0 {
        return Ok(t * w);
    }
    let f = |phi: f64| {
        if phi <= 0.0 {
            return 0.0;
        }
        let zv = z.eval(phi).unwrap_or(f64::INFINITY);
        if zv.is_infinite() {
            return f64::INFINITY;
        }
        (2.0 * (zv - t).max(0.0) * phi).sqrt()
    };
    let splits: Vec<f64> = match z {
        MassSpecificCost::Step(s) => s.thresholds().to_vec(),
        MassSpecificCost::Sampled(s) => s.x().to_vec(),
        _ => Vec::new(),
    };
    // tolerance relative to a crude size estimate, so huge inversion ranges
    // (tiny t) terminate with relative rather than absolute accuracy
    let rough = f(0.5 * upper) * upper;
    let tol = 1e-11 * (1.0 + rough.abs());
    let integral = quad::adaptive_simpson_split(&f, 0.0, upper, &splits, tol);
    if !integral.is_finite() {
        return Err(Error::Numeric(format!("Modica-Mortola integral diverged at t={t}")));
    }
    Ok(t * w + 2.0 * integral)
}

/// Route 2: minimize `G(t)` over candidate slopes `t` (or evaluate at a
/// given `t_guess`). The minimum is attained at `t = tau'(w)`.
pub fn tau_modica_mortola(
    z: &MassSpecificCost,
    w: f64,
    t_guess: Option<f64>,
) -> Result<ForwardResult> {
    if !(w > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {w}")));
    }
    z.validate()?;
    let done = |t: f64, tau: f64| -> Result<ForwardResult> {
        Ok(ForwardResult {
            w,
            tau_value: tau,
            route: Route::ModicaMortola,
            profile_max: Some(z.inverse_at(t)?),
            lagrange_slope: Some(t),
        })
    };
    if let Some(t) = t_guess {
        return done(t, mm_value(z, w, t)?);
    }

    // candidate slopes: z's own values bracket tau'(w) = z(psi_hat)
    let mut cand: Vec<f64> = Vec::new();
    match z {
        MassSpecificCost::Step(s) => {
            cand.extend(s.interval_values().iter().filter(|v| v.is_finite()));
        }
        MassSpecificCost::Sampled(s) => {
            cand.extend(s.y().iter().copied());
        }
        _ => {}
    }
    let scale = w.max(1e-6);
    for k in -40..=40 {
        let phi = scale * (10.0f64).powf(k as f64 / 8.0);
        let v = z.eval(phi)?;
        if v.is_finite() && v > 0.0 {
            cand.push(v);
        }
    }
    let hi = z.limit_at_zero();
    if hi.is_finite() {
        cand.push(hi);
    }
    let lo = z.limit_at_infinity();
    cand.push(lo.max(1e-300));
    cand.retain(|v| v.is_finite() && *v >= lo);
    cand.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cand.dedup();
    if cand.is_empty() {
        return Err(Error::Numeric("no finite candidate slopes for the minimization".into()));
    }
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    let mut values = Vec::with_capacity(cand.len());
    for (i, &t) in cand.iter().enumerate() {
        let v = mm_value(z, w, t)?;
        values.push(v);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    // refine between the neighbours of the best candidate by golden section
    let mut a = if best_i == 0 { cand[0] } else { cand[best_i - 1] };
    let mut b = if best_i + 1 == cand.len() { cand[best_i] } else { cand[best_i + 1] };
    let mut best_t = cand[best_i];
    if b > a {
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = mm_value(z, w, x1)?;
        let mut f2 = mm_value(z, w, x2)?;
        for _ in 0..120 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = mm_value(z, w, x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = mm_value(z, w, x2)?;
            }
            if (b - a) <= 1e-14 * b.abs().max(1.0) {
                break;
            }
        }
        let (t_ref, v_ref) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if v_ref < best_v {
            best_v = v_ref;
            best_t = t_ref;
        }
    }
    done(best_t, best_v)
}

/// Discretization settings for the direct minimization oracle.
#[derive(Debug, Clone, Copy)]
pub struct DirectOptions {
    /// Half-width of the symmetric domain; `None` sizes it from the optimal
    /// profile support estimate.
    pub half_width: Option<f64>,
    /// Number of grid nodes (forced odd).
    pub points: usize,
    pub max_iters: usize,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self { half_width: None, points: 2001, max_iters: 4000 }
    }
}

fn direct_energy(psi: &[f64], h: f64, c: &PhaseFieldCost) -> f64 {
    let mut e = 0.0;
    for k in 0..psi.len() - 1 {
        let d = (psi[k + 1] - psi[k]) / h;
        e += 0.5 * d * d * h;
    }
    for &p in psi {
        e += c.eval_c(p).unwrap_or(f64::INFINITY) * h;
    }
    e
}

fn rescale_mass(psi: &mut [f64], w: f64, h: f64) {
    let mass: f64 = psi.iter().sum::<f64>() * h;
    if mass > 0.0 {
        let s = w / mass;
        for p in psi.iter_mut() {
            *p *= s;
        }
    }
}

/// Route 3: brute-force upper-bound oracle. Projected gradient descent on
/// the discretized functional starting from the analytic profile (step
/// costs) or the Modica-Mortola layer construction.
pub fn tau_direct(c: &PhaseFieldCost, w: f64, opts: DirectOptions) -> Result<ForwardResult> {
    if w == 0.0 {
        return Ok(ForwardResult {
            w,
            tau_value: 0.0,
            route: Route::DirectMinimization,
            profile_max: Some(0.0),
            lagrange_slope: None,
        });
    }
    if !(w > 0.0) {
        return Err(Error::Domain(format!("mass must be nonnegative, got {w}")));
    }
    let m = opts.points | 1;
    // initial guess: exact optimal profile for step z, else plateau plus the
    // Theta-layer built on the tilted potential c - t* phi
    let prof = optimal_profile(c, w, None)?;
    let support = prof.support_radius();
    let init = move |y: f64| prof.eval(y);
    let l = opts.half_width.unwrap_or(1.15 * support).max(1e-6);
    let h = 2.0 * l / (m - 1) as f64;
    let mut psi: Vec<f64> = (0..m).map(|k| init(-l + k as f64 * h)).collect();
    psi[0] = 0.0;
    psi[m - 1] = 0.0;
    rescale_mass(&mut psi, w, h);

    let dc = |p: f64| -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let e = (1e-7 * p).max(1e-12);
        let lo = (p - e).max(p * 0.5);
        (c.eval_c(p + e).unwrap_or(f64::INFINITY) - c.eval_c(lo).unwrap_or(0.0)) / (p + e - lo)
    };

    let mut energy = direct_energy(&psi, h, c);
    // the discrete Hessian scale is ~2/h, so h/4 is a safe starting step
    let mut step = 0.25 * h;
    let mut grad = vec![0.0; m];
    let mut trial = vec![0.0; m];
    let mut stall = 0usize;
    for _ in 0..opts.max_iters {
        for k in 1..m - 1 {
            grad[k] = (2.0 * psi[k] - psi[k - 1] - psi[k + 1]) / h + dc(psi[k]) * h;
        }
        let mut accepted = false;
        for _ in 0..40 {
            for k in 0..m {
                trial[k] = (psi[k] - step * grad[k]).max(0.0);
            }
            trial[0] = 0.0;
            trial[m - 1] = 0.0;
            rescale_mass(&mut trial, w, h);
            let e_new = direct_energy(&trial, h, c);
            if e_new < energy {
                std::mem::swap(&mut psi, &mut trial);
                let improved = (energy - e_new) > 1e-12 * energy.abs();
                energy = e_new;
                step *= 1.2;
                accepted = true;
                if improved {
                    stall = 0;
                } else {
                    stall += 1;
                }
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        if !accepted {
            stall += 1;
            step = (step * 4.0).max(1e-12);
        }
        if stall > 60 {
            break;
        }
    }
    let psi_hat = psi.iter().cloned().fold(0.0f64, f64::max);
    // sanity: the discrete value respects the analytic lower bounds
    let lower_cube = 2.0 * (psi_hat / 2.0).powi(3) / w;
    if energy < lower_cube * (1.0 - 1e-6) {
        return Err(Error::Numeric(format!(
            "direct minimizer violates the energy lower bound: {energy} < {lower_cube}"
        )));
    }
    let lambda = c.z.eval(psi_hat).ok().filter(|v| v.is_finite());
    Ok(ForwardResult {
        w,
        tau_value: energy,
        route: Route::DirectMinimization,
        profile_max: Some(psi_hat),
        lagrange_slope: lambda,
    })
}

/// The (near-)optimal profile at mass `w`: exact plateau-plus-arcs assembly
/// for step costs, otherwise a central plateau at `psi_hat = z^{-1}(tau'(w))`
/// glued to the Theta layer of the tilted potential `c - tau'(w) phi`.
/// `delta` bounds the suboptimality of tent substitutes where no minimizer
/// exists (defaults to `1e-3 tau(w)`).
pub fn optimal_profile(c: &PhaseFieldCost, w: f64, delta: Option<f64>) -> Result<profiles::Profile> {
    match &c.z {
        MassSpecificCost::Step(s) => {
            let scan = step_tau_scan(s, w)?;
            let d = delta.unwrap_or(1e-3 * scan.tau.max(1e-6));
            profiles::build_step_profile(s, w, Some(d))
        }
        _ => {
            let mm = tau_modica_mortola(&c.z, w, None)?;
            let psi_hat = mm.profile_max.unwrap_or(0.0);
            if !(psi_hat.is_finite() && psi_hat > 1e-12) {
                // initial linear region: no minimizer exists, so return a
                // tent whose excess Dirichlet energy hat^3/w is at most delta
                let d = delta.unwrap_or(1e-3 * mm.tau_value.max(1e-9));
                let hat = (d * w).cbrt();
                let r = w / hat;
                let n = 512usize;
                let y: Vec<f64> = (0..=n).map(|k| r * k as f64 / n as f64).collect();
                let psi: Vec<f64> = y.iter().map(|&v| hat * (1.0 - v / r)).collect();
                let pot = quad::adaptive_simpson(&|p| c.eval_c(p).unwrap_or(0.0), 0.0, hat, 1e-12);
                let energy = hat.powi(3) / w + 2.0 * w / (hat * hat) * pot;
                return Ok(profiles::Profile {
                    form: profiles::ProfileForm::Sampled { y, psi },
                    mass: w,
                    energy,
                    psi_max: hat,
                    epsilon_minimizer: true,
                });
            }
            let t_star = mm.lagrange_slope.unwrap();
            let tilted = tilted_cost(c, t_star);
            let tail = profiles::theta_profile(&tilted, psi_hat, 1e-4 * mm.tau_value.max(1e-9))?;
            let plateau = ((w - tail.mass) / (2.0 * psi_hat)).max(0.0);
            let r = tail.support_radius();
            let n = 512usize;
            let mut y = Vec::with_capacity(n + 2);
            let mut psi = Vec::with_capacity(n + 2);
            y.push(0.0);
            psi.push(psi_hat);
            if plateau > 0.0 {
                y.push(plateau);
                psi.push(psi_hat);
            }
            for k in 1..=n {
                let s = r * k as f64 / n as f64;
                y.push(plateau + s);
                psi.push(tail.eval(s));
            }
            let mass = tail.mass + 2.0 * plateau * psi_hat;
            // the tail energy is measured against the tilted cost; undo the
            // tilt (the plateau itself has zero tilted energy density)
            let energy = tail.energy + t_star * mass;
            Ok(profiles::Profile {
                form: profiles::ProfileForm::Sampled { y, psi },
                mass,
                energy,
                psi_max: psi_hat,
                epsilon_minimizer: plateau == 0.0 && tail.mass > w * (1.0 + 1e-9),
            })
        }
    }
}

/// The tilted potential `max(c(phi) - t phi, 0)` as a sampled cost usable by
/// the Theta construction.
fn tilted_cost(c: &PhaseFieldCost, t: f64) -> PhaseFieldCost {
    let z = c.z.clone();
    // represent z - t clamped at 0 on a fine grid up to the inverse at t
    let upper = z.inverse_at(t).unwrap_or(1.0).max(1e-9);
    let upper = if upper.is_finite() { upper } else { 1.0 };
    let n = 4000;
    let grid: Vec<f64> = (1..=n).map(|k| upper * k as f64 / n as f64).collect();
    let vals: Vec<f64> = grid
        .iter()
        .map(|&p| (z.eval(p).unwrap_or(f64::INFINITY) - t).max(0.0))
        .map(|v| if v.is_finite() { v } else { 1e12 })
        .collect();
    let zs = crate::monotone::SampledFn::new(grid, vals).expect("grid is valid");
    PhaseFieldCost { z: MassSpecificCost::Sampled(zs) }
}

/// `(tau')(0)` and `lim_{w -> inf} tau'` equal the limits of z at 0 and
/// infinity.
pub fn slope_limits(z: &MassSpecificCost) -> (f64, f64) {
    (z.limit_at_zero(), z.limit_at_infinity())
}

/// Dispatch a single forward evaluation along the requested route.
pub fn tau_forward(c: &PhaseFieldCost, w: f64, route: Route) -> Result<ForwardResult> {
    match route {
        Route::ClosedForm => match &c.z {
            MassSpecificCost::Step(s) => tau_closed_form(s, w),
            _ => Err(Error::UnsupportedForm(
                "closed form needs a step cost; use the Modica-Mortola or direct route".into(),
            )),
        },
        Route::ModicaMortola => tau_modica_mortola(&c.z, w, None),
        Route::DirectMinimization => tau_direct(c, w, DirectOptions::default()),
    }
}

/// Evaluate the forward map over a whole mass grid. Runs data-parallel when
/// the `parallel` feature is enabled.
pub fn tau_sweep(c: &PhaseFieldCost, ws: &[f64], route: Route) -> Result<Vec<ForwardResult>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ws.par_iter().map(|&w| tau_forward(c, w, route)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ws.iter().map(|&w| tau_forward(c, w, route)).collect()
    }
}
