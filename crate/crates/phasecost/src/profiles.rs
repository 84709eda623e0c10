//! Optimal 1D phase-field profiles: parabolic arc segments, the stacked
//! plateau-and-arcs construction for step costs, the Theta-construction for
//! general potentials, and existence diagnostics.

use crate::error::{Error, Result};
use crate::monotone::StepFn;
use crate::phase_costs::{MassSpecificCost, PhaseFieldCost};

/// `ell(phi_l, phi_r) = 2 (phi_r^{3/2} - phi_l^{3/2})^2 / 9`, the optimal
/// Dirichlet cost density of a transition layer.
pub fn ell(phi_l: f64, phi_r: f64) -> f64 {
    2.0 * (phi_r.powf(1.5) - phi_l.powf(1.5)).powi(2) / 9.0
}

/// The optimal transition arc between two densities carrying a given mass.
#[derive(Debug, Clone, Copy)]
pub struct SegmentSolution {
    pub phi_l: f64,
    pub phi_r: f64,
    pub w_seg: f64,
    /// Optimal length `T_hat = 3 w / (phi_l + sqrt(phi_l phi_r) + phi_r)`.
    pub t_hat: f64,
    /// Curvature coefficient of the arc
    /// `phi(t) = (t/T) phi_r + ((T-t)/T) phi_l + (lambda/2) t (t-T)`.
    pub lambda: f64,
    /// Minimal Dirichlet energy `int |phi'|^2 = (4/9)(phi_r^{3/2}-phi_l^{3/2})^2 / w`.
    pub energy: f64,
}

impl SegmentSolution {
    /// Arc value at `t in [0, t_hat]` (`phi_l` at 0, `phi_r` at `t_hat`).
    pub fn arc(&self, t: f64) -> f64 {
        let big_t = self.t_hat;
        (t / big_t) * self.phi_r + ((big_t - t) / big_t) * self.phi_l
            + 0.5 * self.lambda * t * (t - big_t)
    }
}

/// Minimize `int_0^T |phi'|^2` over arcs `phi_l -> phi_r` of mass `w_seg`
/// with free length `T`.
pub fn optimal_segment(phi_l: f64, phi_r: f64, w_seg: f64) -> Result<SegmentSolution> {
    if !(phi_r > phi_l && phi_l >= 0.0) {
        return Err(Error::Validation(format!(
            "segment needs phi_r > phi_l >= 0, got phi_l={phi_l} phi_r={phi_r}"
        )));
    }
    if !(w_seg > 0.0) {
        return Err(Error::Validation(format!("segment mass must be positive, got {w_seg}")));
    }
    let s = phi_l + (phi_l * phi_r).sqrt() + phi_r;
    let t_hat = 3.0 * w_seg / s;
    let delta32 = phi_r.powf(1.5) - phi_l.powf(1.5);
    // mass constraint int_0^T phi = w fixes the curvature:
    // lambda = 6 ((phi_l + phi_r) T - 2w) / T^3 = (2/9) delta32^2 / w^2
    let lambda = 6.0 * ((phi_l + phi_r) * t_hat - 2.0 * w_seg) / t_hat.powi(3);
    let energy = 4.0 / 9.0 * delta32 * delta32 / w_seg;
    Ok(SegmentSolution { phi_l, phi_r, w_seg, t_hat, lambda, energy })
}

/// One parabolic piece of a profile at radii `[y_inner, y_outer]`, rising
/// from `phi_lo` at the outer end to `phi_hi` at the inner end.
#[derive(Debug, Clone, Copy)]
pub struct ArcSegment {
    pub y_inner: f64,
    pub y_outer: f64,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub lambda: f64,
}

impl ArcSegment {
    fn eval(&self, r: f64) -> f64 {
        let big_t = self.y_outer - self.y_inner;
        let t = self.y_outer - r;
        (t / big_t) * self.phi_hi + ((big_t - t) / big_t) * self.phi_lo
            + 0.5 * self.lambda * t * (t - big_t)
    }
}

#[derive(Debug, Clone)]
pub enum ProfileForm {
    /// Central plateau plus stacked parabolic arcs (arcs ordered from the
    /// plateau outwards); exact mass and energy.
    PiecewiseQuadratic {
        plateau_half_width: f64,
        plateau_height: f64,
        arcs: Vec<ArcSegment>,
    },
    /// Half-profile samples at radii `y[0] = 0 <= y[1] <= ...`, extended
    /// evenly; zero beyond the last radius.
    Sampled { y: Vec<f64>, psi: Vec<f64> },
}

/// An even, nonincreasing-on-`[0, inf)` profile with its mass and energy.
#[derive(Debug, Clone)]
pub struct Profile {
    pub form: ProfileForm,
    pub mass: f64,
    pub energy: f64,
    pub psi_max: f64,
    /// True when the profile is only a delta-suboptimal construction (the
    /// tent family in the linear region, where no minimizer exists).
    pub epsilon_minimizer: bool,
}

impl Profile {
    pub fn eval(&self, y: f64) -> f64 {
        let r = y.abs();
        match &self.form {
            ProfileForm::PiecewiseQuadratic { plateau_half_width, plateau_height, arcs } => {
                if r <= *plateau_half_width {
                    return *plateau_height;
                }
                for arc in arcs {
                    if r <= arc.y_outer {
                        return arc.eval(r.max(arc.y_inner));
                    }
                }
                0.0
            }
            ProfileForm::Sampled { y, psi } => {
                if r >= *y.last().unwrap() {
                    return if r > *y.last().unwrap() { 0.0 } else { *psi.last().unwrap() };
                }
                let i = y.partition_point(|&v| v < r).max(1);
                let t = (r - y[i - 1]) / (y[i] - y[i - 1]);
                psi[i - 1] + t * (psi[i] - psi[i - 1])
            }
        }
    }

    /// Radius beyond which the profile vanishes.
    pub fn support_radius(&self) -> f64 {
        match &self.form {
            ProfileForm::PiecewiseQuadratic { plateau_half_width, arcs, .. } => {
                arcs.last().map(|a| a.y_outer).unwrap_or(*plateau_half_width)
            }
            ProfileForm::Sampled { y, .. } => *y.last().unwrap(),
        }
    }

    /// Sample the full even profile on `n` points over `[-r, r]`.
    pub fn sample(&self, n: usize, r: f64) -> (Vec<f64>, Vec<f64>) {
        let ys: Vec<f64> = (0..n).map(|k| -r + 2.0 * r * k as f64 / (n - 1) as f64).collect();
        let psis = ys.iter().map(|&y| self.eval(y)).collect();
        (ys, psis)
    }
}

/// Assemble the optimal profile for a step cost at mass `w` (Theorem
/// construction: plateau at the level boundary plus stacked arcs).
///
/// In the initial linear region of `tau` no minimizer exists; there the
/// function returns the tent family within `tent_delta` of the infimum when
/// one is provided, and a `NoMinimizer` error otherwise.
pub fn build_step_profile(z: &StepFn, w: f64, tent_delta: Option<f64>) -> Result<Profile> {
    if !(w > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {w}")));
    }
    let scan = crate::forward::step_tau_scan(z, w)?;
    let vals = z.interval_values();
    let starts = z.interval_starts();
    let j = scan.j_opt; // 0-based: plateau height starts[j], slope vals[j]
    if j == 0 {
        let delta = tent_delta.ok_or(Error::NoMinimizer {
            slope: vals[0],
            w_end: linear_region_end(z).unwrap_or(f64::INFINITY),
        })?;
        return build_tent(z, w, delta);
    }
    let mut arc_masses = Vec::with_capacity(j);
    let mut sum_w = 0.0;
    for i in 0..j {
        let wi = (ell(starts[i], starts[i + 1]) / (vals[i] - vals[j])).sqrt();
        arc_masses.push(wi);
        sum_w += wi;
    }
    let plateau_height = starts[j];
    let mut half = w / 2.0 - sum_w;
    if half < 0.0 {
        if half < -1e-9 * w {
            return Err(Error::Numeric(format!(
                "step profile infeasible at w={w}: arc masses exceed w/2 by {:.3e}",
                -half
            )));
        }
        half = 0.0;
    }
    let plateau_half_width = half / plateau_height;
    // stack the arcs from the plateau edge outwards: segment i covers
    // densities [starts[i], starts[i+1]] with mass arc_masses[i]
    let mut arcs = Vec::with_capacity(j);
    let mut inner = plateau_half_width;
    for i in (0..j).rev() {
        let seg = optimal_segment(starts[i], starts[i + 1], arc_masses[i])?;
        arcs.push(ArcSegment {
            y_inner: inner,
            y_outer: inner + seg.t_hat,
            phi_lo: seg.phi_l,
            phi_hi: seg.phi_r,
            lambda: seg.lambda,
        });
        inner += seg.t_hat;
    }
    Ok(Profile {
        form: ProfileForm::PiecewiseQuadratic { plateau_half_width, plateau_height, arcs },
        mass: w,
        energy: scan.tau,
        psi_max: plateau_height,
        epsilon_minimizer: false,
    })
}

/// Tent `psi(y) = w eta max(0, 1 - eta |y|)` with `eta` sized so the energy
/// excess over `a_1 w` is at most `delta` (and the tent stays inside the
/// first level interval).
fn build_tent(z: &StepFn, w: f64, delta: f64) -> Result<Profile> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("tent delta must be positive, got {delta}")));
    }
    let a1 = z.limit_at_zero();
    let mut eta = (delta / (w * w)).cbrt();
    if let Some(&phi1) = z.thresholds().first() {
        eta = eta.min(0.5 * phi1 / w);
    }
    let height = w * eta;
    Ok(Profile {
        form: ProfileForm::PiecewiseQuadratic {
            plateau_half_width: 0.0,
            plateau_height: height,
            arcs: vec![ArcSegment {
                y_inner: 0.0,
                y_outer: 1.0 / eta,
                phi_lo: 0.0,
                phi_hi: height,
                lambda: 0.0,
            }],
        },
        mass: w,
        energy: a1 * w + w * w * eta.powi(3),
        psi_max: height,
        epsilon_minimizer: true,
    })
}

/// Near-optimal descending layer via `Theta(phi) = int_0^phi 1/(sqrt(2c)+dt)`
/// with `dt = delta/psi_hat`; returns the even profile whose halves are
/// `Theta^{-1}(T - |y|)`, so `|psi'| = sqrt(2c(psi)) + dt` (the equality case
/// of Young's inequality). Per-side energy is at most
/// `int_0^psi_hat sqrt(2 c) + delta`.
pub fn theta_profile(c: &PhaseFieldCost, psi_hat: f64, delta: f64) -> Result<Profile> {
    if !(psi_hat > 0.0) {
        return Err(Error::Domain(format!("psi_hat must be positive, got {psi_hat}")));
    }
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "theta construction needs delta > 0 to stay invertible, got {delta}"
        )));
    }
    let dt = delta / psi_hat;
    let n = 4000usize;
    let hs = 1.0 / n as f64;
    let speed = |phi: f64| -> Result<f64> { Ok((2.0 * c.eval_c(phi)?.max(0.0)).sqrt() + dt) };
    // tabulate on a smoothstep-graded phi-grid: phi(s) = psi_hat s^2 (3 - 2s),
    // whose weight phi'(s) = 6 psi_hat s (1 - s) vanishes at both ends and
    // cancels the 1/sqrt(2c) blowup where c vanishes (a uniform grid there
    // grossly overestimates Theta and the mass)
    let grid_phi = |s: f64| psi_hat * s * s * (3.0 - 2.0 * s);
    let grid_w = |s: f64| 6.0 * psi_hat * s * (1.0 - s);
    // Theta' = 1/(sqrt(2c)+dt); mass density phi/speed; energy density
    // speed/2 + c/speed, all against the substitution weight phi'(s)
    let mut theta = Vec::with_capacity(n + 1);
    theta.push(0.0);
    let mut big_t = 0.0;
    let mut mass_half = 0.0;
    let mut energy_half = 0.0;
    let (mut prev_t, mut prev_m, mut prev_e) = (0.0, 0.0, 0.0);
    for k in 1..=n {
        let s = k as f64 * hs;
        let phi = grid_phi(s);
        let wgt = grid_w(s);
        let sp = speed(phi)?;
        let cv = c.eval_c(phi)?;
        let cur_t = wgt / sp;
        let cur_m = wgt * phi / sp;
        let cur_e = wgt * (0.5 * sp + cv / sp);
        big_t += 0.5 * (prev_t + cur_t) * hs;
        theta.push(big_t);
        mass_half += 0.5 * (prev_m + cur_m) * hs;
        energy_half += 0.5 * (prev_e + cur_e) * hs;
        prev_t = cur_t;
        prev_m = cur_m;
        prev_e = cur_e;
    }
    // half-profile: radius y = T - Theta(phi), value phi
    let mut y: Vec<f64> = theta.iter().rev().map(|&t| big_t - t).collect();
    let psi: Vec<f64> = (0..=n).rev().map(|k| grid_phi(k as f64 * hs)).collect();
    // exact at the ends despite rounding
    y[0] = 0.0;
    *y.last_mut().unwrap() = big_t;
    Ok(Profile {
        form: ProfileForm::Sampled { y, psi },
        mass: 2.0 * mass_half,
        energy: 2.0 * energy_half,
        psi_max: psi_hat,
        epsilon_minimizer: true,
    })
}

/// End of the initial linear region of `tau^z` for a step cost: the first
/// mass where some `j >= 2` branch of the closed form beats `a_1 w`.
pub fn linear_region_end(z: &StepFn) -> Option<f64> {
    let vals = z.interval_values();
    let starts = z.interval_starts();
    if vals[0].is_infinite() {
        return Some(0.0);
    }
    let mut best: Option<f64> = None;
    for j in 1..vals.len() {
        let barrier: f64 = (0..j)
            .map(|i| (ell(starts[i], starts[i + 1]) * (vals[i] - vals[j])).sqrt())
            .sum();
        let w_cross = 4.0 * barrier / (vals[0] - vals[j]);
        best = Some(best.map_or(w_cross, |b: f64| b.min(w_cross)));
    }
    best
}

/// Existence diagnostics for the constrained 1D problem at mass `w`.
#[derive(Debug, Clone)]
pub struct ExistenceReport {
    pub exists: bool,
    pub tau: f64,
    /// `tau'(0) = lim_{phi -> 0} z(phi)`.
    pub slope_at_zero: f64,
    /// End of the initial linear region when known (step costs).
    pub linear_region_end: Option<f64>,
}

/// A minimizer exists iff `tau(w) != tau'(0) w`, i.e. `w` lies beyond the
/// initial linear region.
pub fn exists_minimizer(z: &MassSpecificCost, w: f64) -> Result<ExistenceReport> {
    if !(w > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {w}")));
    }
    let slope_at_zero = z.limit_at_zero();
    let (tau, linear_region_end) = match z {
        MassSpecificCost::Step(f) => {
            (crate::forward::step_tau_scan(f, w)?.tau, linear_region_end(f))
        }
        _ => (crate::forward::tau_modica_mortola(z, w, None)?.tau_value, None),
    };
    let exists = if slope_at_zero.is_infinite() {
        tau.is_finite()
    } else {
        tau < slope_at_zero * w * (1.0 - 1e-12)
    };
    Ok(ExistenceReport { exists, tau, slope_at_zero, linear_region_end })
}

/// The Lagrange multiplier of a profile, `lambda = z(psi(0))`, together with
/// the slope sandwich `tau'(w) <= lambda <= tau^l(w)`.
#[derive(Debug, Clone)]
pub struct LagrangeReport {
    pub lambda: f64,
    pub tau_right_slope: f64,
    pub tau_left_slope: f64,
    pub consistent: bool,
}

pub fn lagrange_slope(profile: &Profile, z: &MassSpecificCost) -> Result<LagrangeReport> {
    let lambda = z.eval(profile.psi_max)?;
    let w = profile.mass;
    let (right, left, tol) = match z {
        MassSpecificCost::Step(f) => {
            let scan = crate::forward::step_tau_scan(f, w)?;
            (scan.right_slope, scan.left_slope, 1e-9)
        }
        _ => {
            let h = 1e-4 * w;
            let t0 = crate::forward::tau_modica_mortola(z, w, None)?.tau_value;
            let tp = crate::forward::tau_modica_mortola(z, w + h, None)?.tau_value;
            let tm = crate::forward::tau_modica_mortola(z, w - h, None)?.tau_value;
            ((tp - t0) / h, (t0 - tm) / h, 1e-2)
        }
    };
    let scale = right.abs().max(left.abs()).max(1e-300);
    let consistent = lambda >= right - tol * scale && lambda <= left + tol * scale;
    Ok(LagrangeReport { lambda, tau_right_slope: right, tau_left_slope: left, consistent })
}
