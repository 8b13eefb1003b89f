//! Huber-TV solver: damped Newton with CG-solved Hessian systems.

use crate::error::Result;
use crate::filter::FilterArray;
use crate::image::Image;
use crate::solvers::cg::{self, conjugate_gradient};
use crate::solvers::gradient::{div_slice, grad_slice};
use crate::solvers::{
    check_solver_inputs, l2, merge_channels, per_pixel_attenuation, ChannelDiag, Norm,
    SeparationResult, SolverConfig,
};

/// Huber penalty: `x²/(2δ)` inside `|x| < δ`, `|x| − δ/2` outside.
/// At δ = 1 this is the classic ½x² / |x|−½ form.
pub fn huber_value(x: f64, delta: f64) -> f64 {
    if x.abs() < delta {
        x * x / (2.0 * delta)
    } else {
        x.abs() - delta / 2.0
    }
}

/// Derivative of [`huber_value`], continuous at ±δ.
pub fn huber_grad(x: f64, delta: f64) -> f64 {
    if x.abs() < delta {
        x / delta
    } else {
        x.signum()
    }
}

/// Second derivative of [`huber_value`]: `1/δ` inside the quadratic zone, 0 outside.
fn huber_curvature(x: f64, delta: f64) -> f64 {
    if x.abs() < delta {
        1.0 / delta
    } else {
        0.0
    }
}

/// Full Huber-TV objective `‖y − Sz‖² + γ_d·ΣL(Dz_d) + γ_s·ΣL(Dz_s)`,
/// summed over channels.
pub fn huber_objective(
    diffuse: &Image,
    specular: &Image,
    y: &Image,
    array: &FilterArray,
    phase: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_solver_inputs(y, array, cfg, None)?;
    let atten = per_pixel_attenuation(array, phase);
    let (w, h) = (y.width(), y.height());
    let n = w * h;
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut total = 0.0;
    for c in 0..y.channels() {
        let mut z = Vec::with_capacity(2 * n);
        z.extend_from_slice(diffuse.channel(c));
        z.extend_from_slice(specular.channel(c));
        total += objective_channel(y.channel(c), &atten, &z, w, h, cfg, &mut gx, &mut gy);
    }
    Ok(total)
}

/// Analytic gradient of [`huber_objective`] with respect to `(z_d, z_s)`.
pub fn huber_objective_gradient(
    diffuse: &Image,
    specular: &Image,
    y: &Image,
    array: &FilterArray,
    phase: f64,
    cfg: &SolverConfig,
) -> Result<(Image, Image)> {
    check_solver_inputs(y, array, cfg, None)?;
    let atten = per_pixel_attenuation(array, phase);
    let (w, h) = (y.width(), y.height());
    let n = w * h;
    let mut scratch = GradScratch::new(n);
    let mut gd = Image::zeros(h, w, y.channels())?;
    let mut gs = Image::zeros(h, w, y.channels())?;
    for c in 0..y.channels() {
        let mut z = Vec::with_capacity(2 * n);
        z.extend_from_slice(diffuse.channel(c));
        z.extend_from_slice(specular.channel(c));
        let mut g = vec![0.0; 2 * n];
        gradient_channel(y.channel(c), &atten, &z, w, h, cfg, &mut g, &mut scratch);
        gd.channel_mut(c).copy_from_slice(&g[..n]);
        gs.channel_mut(c).copy_from_slice(&g[n..]);
    }
    Ok((gd, gs))
}

/// Minimizes the Huber-TV objective by damped Newton, starting from the
/// quadratic-TV solution. Each step solves the Hessian system by CG and
/// backtracks (halving, at most 30 times) until the objective strictly
/// decreases; a failed line search stops the iteration with
/// `converged = false`. Stops when `‖∇F‖ < outer_tol·(1 + F)`.
pub fn separate_huber(
    y: &Image,
    array: &FilterArray,
    phase: f64,
    cfg: &SolverConfig,
) -> Result<SeparationResult> {
    check_solver_inputs(y, array, cfg, Some(Norm::Huber))?;
    let atten = per_pixel_attenuation(array, phase);
    let (w, h) = (y.width(), y.height());
    let mut solutions = Vec::with_capacity(y.channels());
    let mut diags = Vec::with_capacity(y.channels());
    for c in 0..y.channels() {
        let (x, diag) = solve_channel(y.channel(c), &atten, w, h, cfg);
        solutions.push(x);
        diags.push(diag);
    }
    merge_channels(y, solutions, diags)
}

struct GradScratch {
    gx: Vec<f64>,
    gy: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
    dv: Vec<f64>,
}

impl GradScratch {
    fn new(n: usize) -> Self {
        Self {
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            fx: vec![0.0; n],
            fy: vec![0.0; n],
            dv: vec![0.0; n],
        }
    }
}

fn solve_channel(y: &[f64], atten: &[f64], w: usize, h: usize, cfg: &SolverConfig) -> (Vec<f64>, ChannelDiag) {
    let n = w * h;
    let (mut z, init) =
        l2::solve_channel(y, atten, w, h, cfg.gamma_d, cfg.gamma_s, cfg.cg_tol, cfg.cg_max_iter);
    let mut cg_converged = init.cg_converged;

    let mut scratch = GradScratch::new(n);
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut f = objective_channel(y, atten, &z, w, h, cfg, &mut gx, &mut gy);
    let mut objective_trace = vec![f];

    let mut g = vec![0.0; 2 * n];
    let mut weights = HessianWeights::new(n);
    let mut z_try = vec![0.0; 2 * n];
    let mut converged = false;
    let mut grad_measure = f64::INFINITY;
    let mut steps = 0;

    for _ in 0..cfg.outer_max_iter {
        gradient_channel(y, atten, &z, w, h, cfg, &mut g, &mut scratch);
        let gnorm = cg::norm(&g);
        grad_measure = gnorm / (1.0 + f);
        if gnorm <= cfg.outer_tol * (1.0 + f) {
            converged = true;
            break;
        }

        weights.fill(&z, w, h, cfg, &mut gx, &mut gy);
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut step = vec![0.0; 2 * n];
        let mut hessian = HessianSystem { atten, w, h, weights: &weights, scratch: GradScratch::new(n), t: vec![0.0; n] };
        let summary = conjugate_gradient(
            |v, out| hessian.apply(v, out),
            &neg_g,
            &mut step,
            cfg.cg_tol,
            cfg.cg_max_iter,
        );
        cg_converged &= summary.converged;

        // Backtracking until strict decrease.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            for i in 0..2 * n {
                z_try[i] = z[i] + t * step[i];
            }
            let f_try = objective_channel(y, atten, &z_try, w, h, cfg, &mut gx, &mut gy);
            if f_try < f {
                z.copy_from_slice(&z_try);
                f = f_try;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        steps += 1;
        objective_trace.push(f);
    }

    let diag = ChannelDiag {
        iterations: steps,
        final_residual: grad_measure,
        objective_trace,
        constraint_trace: Vec::new(),
        converged,
        cg_converged,
    };
    (z, diag)
}

/// Curvature weights γ·L″ on each gradient plane, refreshed every Newton step.
struct HessianWeights {
    wxd: Vec<f64>,
    wyd: Vec<f64>,
    wxs: Vec<f64>,
    wys: Vec<f64>,
}

impl HessianWeights {
    fn new(n: usize) -> Self {
        Self {
            wxd: vec![0.0; n],
            wyd: vec![0.0; n],
            wxs: vec![0.0; n],
            wys: vec![0.0; n],
        }
    }

    fn fill(&mut self, z: &[f64], w: usize, h: usize, cfg: &SolverConfig, gx: &mut [f64], gy: &mut [f64]) {
        let n = w * h;
        let delta = cfg.huber_delta;
        for (comp, gamma) in [(0usize, cfg.gamma_d), (1usize, cfg.gamma_s)] {
            grad_slice(&z[comp * n..(comp + 1) * n], w, h, gx, gy);
            let (wx, wy) = if comp == 0 {
                (&mut self.wxd, &mut self.wyd)
            } else {
                (&mut self.wxs, &mut self.wys)
            };
            for p in 0..n {
                wx[p] = gamma * huber_curvature(gx[p], delta);
                wy[p] = gamma * huber_curvature(gy[p], delta);
            }
        }
    }
}

struct HessianSystem<'a> {
    atten: &'a [f64],
    w: usize,
    h: usize,
    weights: &'a HessianWeights,
    scratch: GradScratch,
    t: Vec<f64>,
}

impl HessianSystem<'_> {
    /// `Hv = 2SᵀSv + Dᵀ diag(γL″) D v`, per component.
    fn apply(&mut self, v: &[f64], out: &mut [f64]) {
        let n = self.w * self.h;
        let (vd, vs) = v.split_at(n);
        let (od, os) = out.split_at_mut(n);
        for p in 0..n {
            self.t[p] = 0.5 * vd[p] + self.atten[p] * vs[p];
        }
        for p in 0..n {
            od[p] = self.t[p]; // 2 · ½ · t
            os[p] = 2.0 * self.atten[p] * self.t[p];
        }
        for (comp, plane, out_plane) in [(0usize, vd, od), (1usize, vs, os)] {
            let (wx, wy) = if comp == 0 {
                (&self.weights.wxd, &self.weights.wyd)
            } else {
                (&self.weights.wxs, &self.weights.wys)
            };
            let s = &mut self.scratch;
            grad_slice(plane, self.w, self.h, &mut s.gx, &mut s.gy);
            for p in 0..n {
                s.fx[p] = wx[p] * s.gx[p];
                s.fy[p] = wy[p] * s.gy[p];
            }
            div_slice(&s.fx, &s.fy, self.w, self.h, &mut s.dv);
            for p in 0..n {
                out_plane[p] -= s.dv[p];
            }
        }
    }
}

/// Objective contribution of one channel.
fn objective_channel(
    y: &[f64],
    atten: &[f64],
    z: &[f64],
    w: usize,
    h: usize,
    cfg: &SolverConfig,
    gx: &mut [f64],
    gy: &mut [f64],
) -> f64 {
    let n = y.len();
    let (zd, zs) = z.split_at(n);
    let mut data = 0.0;
    for p in 0..n {
        let r = y[p] - (0.5 * zd[p] + atten[p] * zs[p]);
        data += r * r;
    }
    let delta = cfg.huber_delta;
    let mut tv = 0.0;
    for (plane, gamma) in [(zd, cfg.gamma_d), (zs, cfg.gamma_s)] {
        grad_slice(plane, w, h, gx, gy);
        let sum: f64 = gx
            .iter()
            .chain(gy.iter())
            .map(|&v| huber_value(v, delta))
            .sum();
        tv += gamma * sum;
    }
    data + tv
}

/// `∇F = 2Sᵀ(Sz − y) + γ·DᵀL′(Dz)` for one channel, written into `g`.
fn gradient_channel(
    y: &[f64],
    atten: &[f64],
    z: &[f64],
    w: usize,
    h: usize,
    cfg: &SolverConfig,
    g: &mut [f64],
    scratch: &mut GradScratch,
) {
    let n = y.len();
    let (zd, zs) = z.split_at(n);
    let (gd, gs) = g.split_at_mut(n);
    for p in 0..n {
        let r = 0.5 * zd[p] + atten[p] * zs[p] - y[p];
        gd[p] = r; // 2 · ½ · r
        gs[p] = 2.0 * atten[p] * r;
    }
    let delta = cfg.huber_delta;
    for (plane, gamma, out_plane) in [(zd, cfg.gamma_d, gd), (zs, cfg.gamma_s, gs)] {
        grad_slice(plane, w, h, &mut scratch.gx, &mut scratch.gy);
        for p in 0..n {
            scratch.fx[p] = huber_grad(scratch.gx[p], delta);
            scratch.fy[p] = huber_grad(scratch.gy[p], delta);
        }
        div_slice(&scratch.fx, &scratch.fy, w, h, &mut scratch.dv);
        for p in 0..n {
            out_plane[p] -= gamma * scratch.dv[p];
        }
    }
}
