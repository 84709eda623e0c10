//! 2D phase-field network simulator: minimize the rescaled energy
//! `E_eps[sigma] = int (eps^3/2)|grad sigma|^2 + (1/eps) c(eps |sigma|) dx`
//! over flux fields satisfying `div sigma = mu_0 - mu_1` (mollified).
//!
//! Discretization: stream-increment formulation on a MAC-staggered grid.
//! The scalar `u` lives on nodes; its discrete rotation `rot u = (d_y u,
//! -d_x u)` lives on faces and is exactly divergence-free at cells, so
//! `sigma = sigma_0 + rot u` keeps the constraint exact for any `u` once the
//! particular solution `sigma_0 = grad v`, `div grad v = f`, is computed.

use crate::error::{Error, Result};
use crate::phase_costs::PhaseFieldCost;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A weighted point in the unit square.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MassPoint {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

/// An atomic measure with Gaussian mollification radius `rho`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Measure2D {
    pub points: Vec<MassPoint>,
    pub rho: f64,
}

impl Measure2D {
    pub fn total_mass(&self) -> f64 {
        self.points.iter().map(|p| p.w).sum()
    }
}

/// Simulation settings; the exponents of the functional are fixed to
/// `alpha = 3`, `beta = gamma = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub epsilon_schedule: Vec<f64>,
    pub cost: PhaseFieldCost,
    pub sources: Vec<MassPoint>,
    pub sinks: Vec<MassPoint>,
    pub iters: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::Validation(format!("grid must have n >= 8 cells, got {}", self.n)));
        }
        if self.epsilon_schedule.is_empty()
            || self.epsilon_schedule.iter().any(|&e| !(e > 0.0))
            || self.epsilon_schedule.windows(2).any(|p| !(p[1] < p[0]))
        {
            return Err(Error::Validation(
                "epsilon schedule must be positive and strictly decreasing".into(),
            ));
        }
        if self.iters == 0 {
            return Err(Error::Validation("need at least one iteration".into()));
        }
        Ok(())
    }
}

/// Face-staggered vector field: `sx[(n+1) x n]` on vertical faces, `sy[n x
/// (n+1)]` on horizontal faces.
#[derive(Debug, Clone)]
pub struct FaceField {
    pub n: usize,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
}

impl FaceField {
    pub fn zeros(n: usize) -> Self {
        Self { n, sx: vec![0.0; (n + 1) * n], sy: vec![0.0; n * (n + 1)] }
    }
}

/// The state of a run: nodal stream increment `u`, the particular solution
/// on faces, and the mollified source (cell-centered) it solves for.
#[derive(Debug, Clone)]
pub struct GridField2D {
    pub n: usize,
    pub h: f64,
    pub u: Vec<f64>,
    pub sigma0: FaceField,
    pub source: Vec<f64>,
}

#[inline]
fn cid(n: usize, i: usize, j: usize) -> usize {
    j * n + i
}
#[inline]
fn nid(n: usize, i: usize, j: usize) -> usize {
    j * (n + 1) + i
}
#[inline]
fn fxid(n: usize, i: usize, j: usize) -> usize {
    j * (n + 1) + i
}
#[inline]
fn fyid(n: usize, i: usize, j: usize) -> usize {
    j * n + i
}

/// `rot u = (d_y u, -d_x u)` on faces; exactly divergence-free at cells.
fn rot(n: usize, h: f64, u: &[f64], out: &mut FaceField) {
    for j in 0..n {
        for i in 0..=n {
            out.sx[fxid(n, i, j)] = (u[nid(n, i, j + 1)] - u[nid(n, i, j)]) / h;
        }
    }
    for j in 0..=n {
        for i in 0..n {
            out.sy[fyid(n, i, j)] = -(u[nid(n, i + 1, j)] - u[nid(n, i, j)]) / h;
        }
    }
}

/// Discrete divergence of a face field at cells.
fn divergence(n: usize, h: f64, f: &FaceField, out: &mut [f64]) {
    for j in 0..n {
        for i in 0..n {
            out[cid(n, i, j)] = (f.sx[fxid(n, i + 1, j)] - f.sx[fxid(n, i, j)]
                + f.sy[fyid(n, i, j + 1)]
                - f.sy[fyid(n, i, j)])
                / h;
        }
    }
}

/// Zero-Neumann 5-point Laplacian on cell values.
fn laplacian(n: usize, h: f64, v: &[f64], out: &mut [f64]) {
    let h2 = h * h;
    for j in 0..n {
        for i in 0..n {
            let c = v[cid(n, i, j)];
            let mut acc = 0.0;
            if i > 0 {
                acc += v[cid(n, i - 1, j)] - c;
            }
            if i + 1 < n {
                acc += v[cid(n, i + 1, j)] - c;
            }
            if j > 0 {
                acc += v[cid(n, i, j - 1)] - c;
            }
            if j + 1 < n {
                acc += v[cid(n, i, j + 1)] - c;
            }
            out[cid(n, i, j)] = acc / h2;
        }
    }
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Conjugate gradient for the Neumann Poisson problem `lap v = f` on cells
/// (`f` is projected onto mean zero). Returns `(v, final residual norm)`.
fn poisson_cg(n: usize, h: f64, f: &[f64], tol: f64) -> (Vec<f64>, f64) {
    let m = n * n;
    let mut rhs = f.to_vec();
    subtract_mean(&mut rhs);
    let mut v = vec![0.0; m];
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let mut rr: f64 = r.iter().map(|x| x * x).sum();
    let target = tol * tol;
    for _ in 0..20 * m {
        if rr <= target {
            break;
        }
        laplacian(n, h, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap.abs() < 1e-300 {
            break;
        }
        let alpha = rr / pap;
        for k in 0..m {
            v[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new: f64 = r.iter().map(|x| x * x).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..m {
            p[k] = r[k] + beta * p[k];
        }
        subtract_mean(&mut p);
    }
    (v, rr.sqrt())
}

/// Mollified cell-centered density of `mu0 - mu1` with per-point discrete
/// normalization (each point contributes exactly its weight).
pub fn mollified_source(mu0: &Measure2D, mu1: &Measure2D, n: usize) -> Result<Vec<f64>> {
    let h = 1.0 / n as f64;
    let total: f64 = mu0.total_mass() - mu1.total_mass();
    let scale: f64 = mu0.points.iter().chain(&mu1.points).map(|p| p.w.abs()).sum::<f64>();
    if total.abs() > 1e-9 * scale.max(1.0) {
        return Err(Error::Validation(format!(
            "measures are unbalanced: net mass {total}"
        )));
    }
    let rho = mu0.rho.max(mu1.rho).max(2.0 * h);
    let mut f = vec![0.0; n * n];
    let mut kernel = vec![0.0; n * n];
    for (p, sign) in mu0
        .points
        .iter()
        .map(|p| (p, 1.0))
        .chain(mu1.points.iter().map(|p| (p, -1.0)))
    {
        let mut sum = 0.0;
        for j in 0..n {
            let y = (j as f64 + 0.5) * h;
            for i in 0..n {
                let x = (i as f64 + 0.5) * h;
                let r2 = (x - p.x).powi(2) + (y - p.y).powi(2);
                let k = (-r2 / (2.0 * rho * rho)).exp();
                kernel[cid(n, i, j)] = k;
                sum += k;
            }
        }
        let w = sign * p.w / (sum * h * h);
        for (fk, &kk) in f.iter_mut().zip(&kernel) {
            *fk += w * kk;
        }
    }
    Ok(f)
}

/// Particular solution `sigma_0 = grad v`, `div grad v = mollified(mu0 -
/// mu1)`, with zero-Neumann boundary fluxes.
pub fn particular_solution(mu0: &Measure2D, mu1: &Measure2D, n: usize) -> Result<GridField2D> {
    let h = 1.0 / n as f64;
    let source = mollified_source(mu0, mu1, n)?;
    let (v, _res) = poisson_cg(n, h, &source, 1e-12);
    let mut sigma0 = FaceField::zeros(n);
    for j in 0..n {
        for i in 1..n {
            sigma0.sx[fxid(n, i, j)] = (v[cid(n, i, j)] - v[cid(n, i - 1, j)]) / h;
        }
    }
    for j in 1..n {
        for i in 0..n {
            sigma0.sy[fyid(n, i, j)] = (v[cid(n, i, j)] - v[cid(n, i, j - 1)]) / h;
        }
    }
    Ok(GridField2D { n, h, u: vec![0.0; (n + 1) * (n + 1)], sigma0, source })
}

impl GridField2D {
    /// Cell-centered components of `sigma = sigma_0 + rot u`.
    pub fn sigma_cells(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut faces = FaceField::zeros(n);
        rot(n, self.h, &self.u, &mut faces);
        for (a, b) in faces.sx.iter_mut().zip(&self.sigma0.sx) {
            *a += b;
        }
        for (a, b) in faces.sy.iter_mut().zip(&self.sigma0.sy) {
            *a += b;
        }
        face_to_cells(n, &faces)
    }

    /// Discrete L2 norm of `div(sigma) - f`; the rotation part contributes
    /// exactly zero, so this equals the Poisson solve residual.
    pub fn div_residual(&self) -> f64 {
        let n = self.n;
        let mut faces = FaceField::zeros(n);
        rot(n, self.h, &self.u, &mut faces);
        for (a, b) in faces.sx.iter_mut().zip(&self.sigma0.sx) {
            *a += b;
        }
        for (a, b) in faces.sy.iter_mut().zip(&self.sigma0.sy) {
            *a += b;
        }
        let mut div = vec![0.0; n * n];
        divergence(n, self.h, &faces, &mut div);
        div.iter()
            .zip(&self.source)
            .map(|(d, f)| (d - f) * (d - f) * self.h * self.h)
            .sum::<f64>()
            .sqrt()
    }
}

fn face_to_cells(n: usize, f: &FaceField) -> (Vec<f64>, Vec<f64>) {
    let mut cx = vec![0.0; n * n];
    let mut cy = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            cx[cid(n, i, j)] = 0.5 * (f.sx[fxid(n, i, j)] + f.sx[fxid(n, i + 1, j)]);
            cy[cid(n, i, j)] = 0.5 * (f.sy[fyid(n, i, j)] + f.sy[fyid(n, i, j + 1)]);
        }
    }
    (cx, cy)
}

/// Adjoint of [`face_to_cells`].
fn cells_to_faces(n: usize, cx: &[f64], cy: &[f64], out: &mut FaceField) {
    out.sx.iter_mut().for_each(|v| *v = 0.0);
    out.sy.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..n {
        for i in 0..n {
            let vx = 0.5 * cx[cid(n, i, j)];
            out.sx[fxid(n, i, j)] += vx;
            out.sx[fxid(n, i + 1, j)] += vx;
            let vy = 0.5 * cy[cid(n, i, j)];
            out.sy[fyid(n, i, j)] += vy;
            out.sy[fyid(n, i, j + 1)] += vy;
        }
    }
}

/// Adjoint of [`rot`]: accumulate the nodal gradient from face sensitivities.
fn rot_adjoint(n: usize, h: f64, f: &FaceField, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..n {
        for i in 0..=n {
            let v = f.sx[fxid(n, i, j)] / h;
            out[nid(n, i, j + 1)] += v;
            out[nid(n, i, j)] -= v;
        }
    }
    for j in 0..=n {
        for i in 0..n {
            let v = f.sy[fyid(n, i, j)] / h;
            out[nid(n, i + 1, j)] -= v;
            out[nid(n, i, j)] += v;
        }
    }
}

/// `E = sum_cells [(eps^3/2)|grad sigma|^2 + (1/eps) c(eps |sigma|)] h^2`,
/// with the gradient term over adjacent-cell differences of each component.
pub fn energy_cells(
    n: usize,
    h: f64,
    cx: &[f64],
    cy: &[f64],
    eps: f64,
    c: &PhaseFieldCost,
) -> f64 {
    let mut dir = 0.0;
    for comp in [cx, cy] {
        for j in 0..n {
            for i in 0..n {
                if i + 1 < n {
                    let d = comp[cid(n, i + 1, j)] - comp[cid(n, i, j)];
                    dir += d * d;
                }
                if j + 1 < n {
                    let d = comp[cid(n, i, j + 1)] - comp[cid(n, i, j)];
                    dir += d * d;
                }
            }
        }
    }
    // (d/h)^2 * h^2 = d^2
    let dir = 0.5 * eps.powi(3) * dir;
    let pot = potential_sum(n, h, cx, cy, eps, c);
    dir + pot
}

fn potential_cell(cx: f64, cy: f64, eps: f64, h2: f64, c: &PhaseFieldCost) -> f64 {
    let m = cx.hypot(cy);
    c.eval_c(eps * m).unwrap_or(f64::INFINITY) / eps * h2
}

#[cfg(feature = "parallel")]
fn potential_sum(n: usize, h: f64, cx: &[f64], cy: &[f64], eps: f64, c: &PhaseFieldCost) -> f64 {
    let h2 = h * h;
    (0..n * n)
        .into_par_iter()
        .map(|k| potential_cell(cx[k], cy[k], eps, h2, c))
        .sum()
}

#[cfg(not(feature = "parallel"))]
fn potential_sum(n: usize, h: f64, cx: &[f64], cy: &[f64], eps: f64, c: &PhaseFieldCost) -> f64 {
    let h2 = h * h;
    (0..n * n).map(|k| potential_cell(cx[k], cy[k], eps, h2, c)).sum()
}

/// Spec-level energy of a run state.
pub fn energy_2d(field: &GridField2D, eps: f64, c: &PhaseFieldCost) -> f64 {
    let (cx, cy) = field.sigma_cells();
    energy_cells(field.n, field.h, &cx, &cy, eps, c)
}

/// One-sided smoothed derivative of `c`, matching the descent in the 1D
/// direct oracle: step discontinuities are crossed with a relative-width
/// secant so the line search does not stall on subgradient selection.
fn dc(c: &PhaseFieldCost, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let e = (0.02 * p).max(1e-12);
    let lo = (p - e).max(p * 0.5);
    (c.eval_c(p + e).unwrap_or(f64::INFINITY) - c.eval_c(lo).unwrap_or(0.0)) / (p + e - lo)
}

/// Gradient of [`energy_cells`] with respect to the cell components. `delta`
/// Huber-smooths the magnitude kink at zero so cells on the edge of the flux
/// support do not thrash subgradient directions.
fn energy_grad_cells(
    n: usize,
    h: f64,
    cx: &[f64],
    cy: &[f64],
    eps: f64,
    c: &PhaseFieldCost,
    delta: f64,
    gx: &mut [f64],
    gy: &mut [f64],
) {
    let h2 = h * h;
    let e3 = eps.powi(3);
    let pointwise = |k: usize, out_x: &mut f64, out_y: &mut f64| {
        let m = (cx[k] * cx[k] + cy[k] * cy[k] + delta * delta).sqrt();
        if m > 0.0 {
            let d = dc(c, eps * m) * h2 / m;
            *out_x = d * cx[k];
            *out_y = d * cy[k];
        } else {
            *out_x = 0.0;
            *out_y = 0.0;
        }
    };
    #[cfg(feature = "parallel")]
    {
        gx.par_iter_mut()
            .zip(gy.par_iter_mut())
            .enumerate()
            .for_each(|(k, (ox, oy))| pointwise(k, ox, oy));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for k in 0..n * n {
            pointwise(k, &mut gx[k], &mut gy[k]);
        }
    }
    for (comp, grad) in [(cx, gx), (cy, gy)] {
        for j in 0..n {
            for i in 0..n {
                let k = cid(n, i, j);
                if i + 1 < n {
                    let d = e3 * (comp[cid(n, i + 1, j)] - comp[k]);
                    grad[k] -= d;
                    grad[cid(n, i + 1, j)] += d;
                }
                if j + 1 < n {
                    let d = e3 * (comp[cid(n, i, j + 1)] - comp[k]);
                    grad[k] -= d;
                    grad[cid(n, i, j + 1)] += d;
                }
            }
        }
    }
}

/// Loose CG solve of the nodal Dirichlet Poisson problem `-lap p = g`
/// (boundary fixed at zero), used as an H1 preconditioner for the descent
/// direction: the map from `u` to cell fluxes differentiates twice, so the
/// raw L2 gradient is mesh-conditioned while the Sobolev gradient is not.
fn precondition_h1(n: usize, g: &[f64], out: &mut [f64], sweeps: usize) {
    let nodes = (n + 1) * (n + 1);
    let apply = |p: &[f64], out: &mut [f64]| {
        for j in 0..=n {
            for i in 0..=n {
                let k = nid(n, i, j);
                if i == 0 || j == 0 || i == n || j == n {
                    out[k] = p[k];
                    continue;
                }
                out[k] = 4.0 * p[k]
                    - p[nid(n, i - 1, j)]
                    - p[nid(n, i + 1, j)]
                    - p[nid(n, i, j - 1)]
                    - p[nid(n, i, j + 1)];
            }
        }
    };
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut r = g.to_vec();
    for j in 0..=n {
        for i in [0, n] {
            r[nid(n, i, j)] = 0.0;
            r[nid(n, j, i)] = 0.0;
        }
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; nodes];
    let mut rr: f64 = r.iter().map(|x| x * x).sum();
    if rr == 0.0 {
        return;
    }
    for _ in 0..sweeps {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for k in 0..nodes {
            out[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new: f64 = r.iter().map(|x| x * x).sum();
        if rr_new <= 1e-6 * rr {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..nodes {
            p[k] = r[k] + beta * p[k];
        }
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub epsilon: f64,
    pub energy: f64,
    pub div_residual: f64,
}

#[derive(Debug)]
pub struct SimResult {
    pub field: GridField2D,
    pub trace: Vec<TraceRow>,
    pub final_energy: f64,
    /// False when the line search failed persistently and the best iterate
    /// was returned as-is.
    pub line_search_ok: bool,
}

/// Minimize the phase-field energy by gradient descent on the stream
/// increment `u` (the divergence constraint holds exactly for every iterate)
/// with epsilon continuation across the schedule. Sources and sinks are
/// mollified at radius `3h`.
pub fn minimize_2d(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let n = config.n;
    let h = 1.0 / n as f64;
    let rho = 3.0 * h;
    let mu0 = Measure2D { points: config.sources.clone(), rho };
    let mu1 = Measure2D { points: config.sinks.clone(), rho };
    let mut field = particular_solution(&mu0, &mu1, n)?;
    let div_residual = field.div_residual();

    let stages = config.epsilon_schedule.len();
    let iters_per_stage = (config.iters / stages).max(1);
    let mut trace = Vec::new();
    let mut iter = 0usize;
    let mut total_accepts = 0usize;
    let mut last_gnorm = 0.0f64;
    let nn = n * n;
    let mut gx = vec![0.0; nn];
    let mut gy = vec![0.0; nn];
    let mut grad_u = vec![0.0; (n + 1) * (n + 1)];
    let mut dir = vec![0.0; (n + 1) * (n + 1)];
    let mut faces = FaceField::zeros(n);
    let mut trial = vec![0.0; (n + 1) * (n + 1)];
    let mut prev_u: Vec<f64> = Vec::new();
    let mut prev_g: Vec<f64> = Vec::new();

    for &eps in &config.epsilon_schedule {
        let (cx, cy) = field.sigma_cells();
        let mut energy = energy_cells(n, h, &cx, &cy, eps, &config.cost);
        let mut step = 1.0;
        let mut fails = 0usize;
        prev_u.clear();
        prev_g.clear();
        for _ in 0..iters_per_stage {
            let (cx, cy) = field.sigma_cells();
            let max_m = cx
                .iter()
                .zip(&cy)
                .map(|(a, b)| a.hypot(*b))
                .fold(0.0f64, f64::max);
            let delta = 1e-2 * max_m;
            energy_grad_cells(n, h, &cx, &cy, eps, &config.cost, delta, &mut gx, &mut gy);
            cells_to_faces(n, &gx, &gy, &mut faces);
            rot_adjoint(n, h, &faces, &mut grad_u);
            // boundary nodes stay fixed: no flux through the domain boundary
            for i in 0..=n {
                grad_u[nid(n, i, 0)] = 0.0;
                grad_u[nid(n, i, n)] = 0.0;
                grad_u[nid(n, 0, i)] = 0.0;
                grad_u[nid(n, n, i)] = 0.0;
            }
            precondition_h1(n, &grad_u, &mut dir, 200);
            // Barzilai-Borwein step seed <du,du>/<du,dg>, safeguarded by
            // monotone backtracking below
            if !prev_u.is_empty() {
                let mut uu = 0.0;
                let mut ug = 0.0;
                for k in 0..dir.len() {
                    let du = field.u[k] - prev_u[k];
                    let dg = dir[k] - prev_g[k];
                    uu += du * du;
                    ug += du * dg;
                }
                if ug > 0.0 && uu > 0.0 {
                    step = (uu / ug).clamp(1e-14, 1e6);
                }
            }
            prev_u = field.u.clone();
            prev_g = dir.clone();
            let mut accepted = false;
            for _ in 0..40 {
                for k in 0..trial.len() {
                    trial[k] = field.u[k] - step * dir[k];
                }
                std::mem::swap(&mut field.u, &mut trial);
                let (cx, cy) = field.sigma_cells();
                let e_new = energy_cells(n, h, &cx, &cy, eps, &config.cost);
                if e_new < energy {
                    energy = e_new;
                    accepted = true;
                    break;
                }
                std::mem::swap(&mut field.u, &mut trial);
                step *= 0.5;
                if step < 1e-18 {
                    break;
                }
            }
            if accepted {
                fails = 0;
                total_accepts += 1;
            } else {
                fails += 1;
                step = (step * 8.0).max(1e-14);
                if fails > 20 {
                    // persistent stalling: the stage has converged (a
                    // nonsmooth energy offers no descent at its minimizer)
                    last_gnorm = grad_u.iter().map(|g| g * g).sum::<f64>().sqrt();
                    break;
                }
            }
            trace.push(TraceRow { iter, epsilon: eps, energy, div_residual });
            iter += 1;
        }
    }
    let eps_last = *config.epsilon_schedule.last().unwrap();
    let final_energy = energy_2d(&field, eps_last, &config.cost);
    // a run that never improved on the particular solution despite a
    // non-negligible gradient indicates a genuine line-search failure
    let line_search_ok =
        total_accepts > 0 || last_gnorm <= 1e-6 * (1.0 + final_energy);
    Ok(SimResult { field, trace, final_energy, line_search_ok })
}

/// Fraction of the superlevel mass `{|sigma| > frac * max}` carried by its
/// largest 4-connected component (1.0 means a fully connected skeleton).
pub fn connectivity_fraction(n: usize, cx: &[f64], cy: &[f64], frac: f64) -> f64 {
    let mag: Vec<f64> = cx.iter().zip(cy).map(|(a, b)| a.hypot(*b)).collect();
    let max = mag.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 1.0;
    }
    let thresh = frac * max;
    let mut label = vec![usize::MAX; n * n];
    let mut best = 0.0f64;
    let mut total = 0.0f64;
    let mut stack = Vec::new();
    let mut next = 0usize;
    for start in 0..n * n {
        if mag[start] <= thresh {
            continue;
        }
        total += mag[start];
        if label[start] != usize::MAX {
            continue;
        }
        let mut mass = 0.0;
        stack.push(start);
        label[start] = next;
        while let Some(k) = stack.pop() {
            mass += mag[k];
            let (i, j) = (k % n, k / n);
            let mut push = |ii: usize, jj: usize| {
                let kk = cid(n, ii, jj);
                if mag[kk] > thresh && label[kk] == usize::MAX {
                    label[kk] = next;
                    stack.push(kk);
                }
            };
            if i > 0 {
                push(i - 1, j);
            }
            if i + 1 < n {
                push(i + 1, j);
            }
            if j > 0 {
                push(i, j - 1);
            }
            if j + 1 < n {
                push(i, j + 1);
            }
        }
        best = best.max(mass);
        next += 1;
    }
    best / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotone::StepFn;
    use crate::phase_costs::MassSpecificCost;
    use crate::profiles;
    use approx::assert_relative_eq;

    fn dipole(n_rho: usize) -> (Measure2D, Measure2D) {
        let rho = 3.0 / n_rho as f64;
        (
            Measure2D { points: vec![MassPoint { x: 0.25, y: 0.5, w: 1.0 }], rho },
            Measure2D { points: vec![MassPoint { x: 0.75, y: 0.5, w: 1.0 }], rho },
        )
    }

    fn urban_cost() -> PhaseFieldCost {
        let z = StepFn::new(vec![0.52002], vec![1.0], 0.5).unwrap();
        PhaseFieldCost::new(MassSpecificCost::Step(z)).unwrap()
    }

    #[test]
    fn particular_solution_dipole() {
        let n = 64;
        let (mu0, mu1) = dipole(n);
        let field = particular_solution(&mu0, &mu1, n).unwrap();
        assert!(field.div_residual() <= 1e-8, "residual {}", field.div_residual());
        // discrete flux through the mid-vertical line equals the source
        // mass left of it (telescoping of the divergence identity)
        let h = field.h;
        let flux: f64 = (0..n).map(|j| field.sigma0.sx[fxid(n, n / 2, j)] * h).sum();
        assert_relative_eq!(flux, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn particular_solution_balanced_zero() {
        let n = 32;
        let rho = 3.0 / n as f64;
        let mu = Measure2D { points: vec![MassPoint { x: 0.5, y: 0.5, w: 1.0 }], rho };
        let field = particular_solution(&mu, &mu.clone(), n).unwrap();
        assert!(field.sigma0.sx.iter().all(|&v| v.abs() < 1e-10));
        assert!(field.sigma0.sy.iter().all(|&v| v.abs() < 1e-10));
    }

    #[test]
    fn unbalanced_rejected() {
        let n = 32;
        let rho = 3.0 / n as f64;
        let mu0 = Measure2D { points: vec![MassPoint { x: 0.3, y: 0.5, w: 2.0 }], rho };
        let mu1 = Measure2D { points: vec![MassPoint { x: 0.7, y: 0.5, w: 1.0 }], rho };
        assert!(matches!(particular_solution(&mu0, &mu1, n), Err(Error::Validation(_))));
    }

    #[test]
    fn rot_is_exactly_divergence_free() {
        let n = 24;
        let h = 1.0 / n as f64;
        let u: Vec<f64> = (0..(n + 1) * (n + 1))
            .map(|k| ((k * 2654435761) % 1000) as f64 / 1000.0)
            .collect();
        let mut faces = FaceField::zeros(n);
        rot(n, h, &u, &mut faces);
        let mut div = vec![0.0; n * n];
        divergence(n, h, &faces, &mut div);
        assert!(div.iter().all(|&d| d.abs() < 1e-10));
    }

    #[test]
    fn adjoints_match() {
        // <rot u, f> = <u, rot^T f> and <A f, c> = <f, A^T c>
        let n = 8;
        let h = 1.0 / n as f64;
        let u: Vec<f64> = (0..(n + 1) * (n + 1)).map(|k| (k as f64).sin()).collect();
        let mut f = FaceField::zeros(n);
        for (k, v) in f.sx.iter_mut().enumerate() {
            *v = (k as f64 * 0.7).cos();
        }
        for (k, v) in f.sy.iter_mut().enumerate() {
            *v = (k as f64 * 1.3).sin();
        }
        let mut ru = FaceField::zeros(n);
        rot(n, h, &u, &mut ru);
        let lhs: f64 = ru.sx.iter().zip(&f.sx).map(|(a, b)| a * b).sum::<f64>()
            + ru.sy.iter().zip(&f.sy).map(|(a, b)| a * b).sum::<f64>();
        let mut rtf = vec![0.0; (n + 1) * (n + 1)];
        rot_adjoint(n, h, &f, &mut rtf);
        let rhs: f64 = u.iter().zip(&rtf).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);

        let (cx, cy) = face_to_cells(n, &f);
        let dx: Vec<f64> = (0..n * n).map(|k| (k as f64 * 0.31).cos()).collect();
        let dy: Vec<f64> = (0..n * n).map(|k| (k as f64 * 0.17).sin()).collect();
        let lhs2: f64 = cx.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>()
            + cy.iter().zip(&dy).map(|(a, b)| a * b).sum::<f64>();
        let mut atf = FaceField::zeros(n);
        cells_to_faces(n, &dx, &dy, &mut atf);
        let rhs2: f64 = atf.sx.iter().zip(&f.sx).map(|(a, b)| a * b).sum::<f64>()
            + atf.sy.iter().zip(&f.sy).map(|(a, b)| a * b).sum::<f64>();
        assert_relative_eq!(lhs2, rhs2, max_relative = 1e-12);
    }

    #[test]
    fn energy_zero_field() {
        let c = urban_cost();
        let n = 16;
        let z = vec![0.0; n * n];
        assert_eq!(energy_cells(n, 1.0 / n as f64, &z, &z, 0.1, &c), 0.0);
    }

    #[test]
    fn energy_epsilon_scaling() {
        // doubling eps at fixed sigma scales the Dirichlet term by 8 and the
        // c-argument by 2
        let c = urban_cost();
        let n = 16;
        let h = 1.0 / n as f64;
        let cx: Vec<f64> = (0..n * n).map(|k| (k as f64 * 0.2).sin()).collect();
        let cy = vec![0.0; n * n];
        let eps = 0.1;
        let e1 = energy_cells(n, h, &cx, &cy, eps, &c);
        let e2 = energy_cells(n, h, &cx, &cy, 2.0 * eps, &c);
        // recompute the two pieces directly to check the split
        let pot1: f64 = cx
            .iter()
            .map(|&v| c.eval_c(eps * v.abs()).unwrap() / eps * h * h)
            .sum();
        let pot2: f64 = cx
            .iter()
            .map(|&v| c.eval_c(2.0 * eps * v.abs()).unwrap() / (2.0 * eps) * h * h)
            .sum();
        let dir1 = e1 - pot1;
        let dir2 = e2 - pot2;
        assert_relative_eq!(dir2, 8.0 * dir1, max_relative = 1e-10);
    }

    #[test]
    fn strip_test_reproduces_tau() {
        // a vertical strip carrying mass w reproduces tau(w) per unit length
        let n = 256;
        let h = 1.0 / n as f64;
        let eps = 0.05;
        let w = 2.0;
        let c = urban_cost();
        let MassSpecificCost::Step(z) = &c.z else { unreachable!() };
        let profile = profiles::build_step_profile(z, w, None).unwrap();
        let tau = crate::forward::tau_closed_form(z, w).unwrap().tau_value;
        let mut cx = vec![0.0; n * n];
        let mut cy = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let x = (i as f64 + 0.5) * h;
                cy[cid(n, i, j)] = profile.eval((x - 0.5) / eps) / eps;
            }
        }
        let energy = energy_cells(n, h, &cx, &cy, eps, &c);
        let _ = &mut cx;
        assert_relative_eq!(energy, tau, max_relative = 0.05);
    }

    #[test]
    fn minimize_identical_measures_stays_zero() {
        let n = 16;
        let p = vec![MassPoint { x: 0.5, y: 0.5, w: 1.0 }];
        let config = SimConfig {
            n,
            epsilon_schedule: vec![0.2, 0.1],
            cost: urban_cost(),
            sources: p.clone(),
            sinks: p,
            iters: 20,
        };
        let r = minimize_2d(&config).unwrap();
        assert!(r.final_energy.abs() < 1e-12);
        assert!(r.field.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn minimize_dipole_linear_cost() {
        // z == a: linear cost, so the minimum is the W1 distance a * w * dist
        // and is approached from above as eps shrinks
        let n = 64;
        let (mu0, mu1) = dipole(n);
        let a = 1.0;
        let cost = PhaseFieldCost::new(MassSpecificCost::Step(StepFn::constant(a))).unwrap();
        let config = SimConfig {
            n,
            epsilon_schedule: vec![0.1, 0.063, 0.04, 0.025, 0.02],
            cost,
            sources: mu0.points.clone(),
            sinks: mu1.points.clone(),
            iters: 1500,
        };
        let r = minimize_2d(&config).unwrap();
        assert!(r.line_search_ok);
        let target = a * 1.0 * 0.5;
        assert!(
            r.final_energy >= target * 0.99,
            "energy {} fell below the W1 bound {}",
            r.final_energy,
            target
        );
        assert!(
            r.final_energy <= target * 1.10,
            "energy {} is not within 10% of {}",
            r.final_energy,
            target
        );
        // the trace is nonincreasing within each stage and the divergence
        // constraint held for every iterate
        assert!(r.trace.windows(2).all(|p| {
            p[1].energy <= p[0].energy + 1e-12 || p[1].epsilon != p[0].epsilon
        }));
        assert!(r.trace.iter().all(|row| row.div_residual <= 1e-8));
        let (cx, cy) = r.field.sigma_cells();
        assert!(connectivity_fraction(n, &cx, &cy, 0.2) >= 0.9);
    }

    #[test]
    fn connectivity_of_trivial_field() {
        let n = 8;
        let cx = vec![1.0; n * n];
        let cy = vec![0.0; n * n];
        assert_eq!(connectivity_fraction(n, &cx, &cy, 0.2), 1.0);
    }
}
