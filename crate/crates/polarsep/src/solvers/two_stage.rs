//! Two-stage baseline: interpolate each orientation image, then fit the
//! per-pixel cosine model.

use crate::error::{Error, Result};
use crate::filter::{FilterArray, OrientationSet};
use crate::image::Image;
use crate::solvers::cg::conjugate_gradient;
use crate::solvers::gradient::add_scaled_graph_laplacian;
use crate::solvers::{
    check_solver_inputs, merge_channels, ChannelDiag, SeparationResult, SolverConfig,
};

/// Separates by first inpainting every orientation image from its sampled
/// pixels (quadratic-TV interpolation with weight `cfg.gamma_d`) and then
/// solving the per-pixel least squares `x_k ≈ z_d/2 + z_s·cos²(φ−θ_k)`.
pub fn separate_two_stage(
    y: &Image,
    array: &FilterArray,
    phase: f64,
    cfg: &SolverConfig,
) -> Result<SeparationResult> {
    check_solver_inputs(y, array, cfg, None)?;
    let counts = array.class_counts();
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "orientation {k} has no pixels; two-stage interpolation needs every class"
        )));
    }
    let atten = array.attenuation_table(phase);
    check_distinct_attenuations(&atten)?;

    let (w, h) = (y.width(), y.height());
    let n = w * h;
    let k = array.orientation_count();
    let indices = array.indices();

    let mut solutions = Vec::with_capacity(y.channels());
    let mut diags = Vec::with_capacity(y.channels());
    for c in 0..y.channels() {
        let plane = y.channel(c);
        // Stage 1: one masked interpolation per orientation.
        let mut stack: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut iterations = 0;
        let mut final_residual: f64 = 0.0;
        let mut cg_converged = true;
        for class in 0..k {
            let mask: Vec<f64> = indices
                .iter()
                .map(|&i| if i as usize == class { 1.0 } else { 0.0 })
                .collect();
            let (x, summary_iters, summary_res, summary_ok) =
                inpaint_channel(plane, &mask, w, h, cfg.gamma_d, cfg.cg_tol, cfg.cg_max_iter);
            iterations = iterations.max(summary_iters);
            final_residual = final_residual.max(summary_res);
            cg_converged &= summary_ok;
            stack.push(x);
        }
        // Stage 2: closed-form 2×2 least squares per pixel.
        let mut x = vec![0.0; 2 * n];
        fit_planes(&stack, &atten, &mut x)?;
        solutions.push(x);
        diags.push(ChannelDiag {
            iterations,
            final_residual,
            objective_trace: Vec::new(),
            constraint_trace: Vec::new(),
            converged: cg_converged,
            cg_converged,
        });
    }
    merge_channels(y, solutions, diags)
}

/// Fits `(z_d, z_s)` per pixel to a full stack of orientation images against
/// the model `x_k = z_d/2 + z_s·cos²(φ−θ_k)`.
///
/// The stack must hold one image per orientation, all the same shape. This is
/// the second stage of [`separate_two_stage`], exposed so a full (unmosaiced)
/// stack can be fit directly.
pub fn fit_diffuse_specular(
    stack: &[Image],
    orientations: &OrientationSet,
    phase: f64,
) -> Result<(Image, Image)> {
    if stack.len() != orientations.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} images for {} orientations",
            stack.len(),
            orientations.len()
        )));
    }
    let first = &stack[0];
    if stack.iter().any(|img| !img.same_shape(first)) {
        return Err(Error::ShapeMismatch("stack images differ in shape".into()));
    }
    let atten: Vec<f64> = orientations
        .angles()
        .iter()
        .map(|&theta| crate::forward::malus_attenuation(phase, theta))
        .collect();
    check_distinct_attenuations(&atten)?;

    let n = first.pixel_count();
    let mut diffuse = Image::zeros(first.height(), first.width(), first.channels())?;
    let mut specular = diffuse.clone();
    for c in 0..first.channels() {
        let planes: Vec<&[f64]> = stack.iter().map(|img| img.channel(c)).collect();
        let mut x = vec![0.0; 2 * n];
        fit_planes_refs(&planes, &atten, &mut x)?;
        diffuse.channel_mut(c).copy_from_slice(&x[..n]);
        specular.channel_mut(c).copy_from_slice(&x[n..]);
    }
    Ok((diffuse, specular))
}

/// Rejects stacks whose cos² values are all (numerically) equal: the
/// per-pixel 2×2 system is singular in that case.
fn check_distinct_attenuations(atten: &[f64]) -> Result<()> {
    let min = atten.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = atten.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max - min < 1e-9 {
        return Err(Error::Numerical(
            "fewer than 2 distinct cos² values; per-pixel fit is singular".into(),
        ));
    }
    Ok(())
}

fn fit_planes(stack: &[Vec<f64>], atten: &[f64], out: &mut [f64]) -> Result<()> {
    let planes: Vec<&[f64]> = stack.iter().map(|v| v.as_slice()).collect();
    fit_planes_refs(&planes, atten, out)
}

fn fit_planes_refs(stack: &[&[f64]], atten: &[f64], out: &mut [f64]) -> Result<()> {
    let k = stack.len();
    let n = stack[0].len();
    // Normal matrix of the design rows [½, c_k]; shared by every pixel.
    let a11 = k as f64 * 0.25;
    let mut a12 = 0.0;
    let mut a22 = 0.0;
    for &c in atten {
        a12 += 0.5 * c;
        a22 += c * c;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-12 * a11.max(a22).powi(2) {
        return Err(Error::Numerical("per-pixel normal equations singular".into()));
    }
    let (out_d, out_s) = out.split_at_mut(n);
    for p in 0..n {
        let mut r1 = 0.0;
        let mut r2 = 0.0;
        for (plane, &c) in stack.iter().zip(atten) {
            let v = plane[p];
            r1 += 0.5 * v;
            r2 += c * v;
        }
        out_d[p] = (a22 * r1 - a12 * r2) / det;
        out_s[p] = (a11 * r2 - a12 * r1) / det;
    }
    Ok(())
}

/// Quadratic-TV inpainting of one plane from masked samples:
/// `(A + γ·DᵀD)x = A·y`, warm-started at the mean of the sampled values.
fn inpaint_channel(
    y: &[f64],
    mask: &[f64],
    w: usize,
    h: usize,
    gamma: f64,
    cg_tol: f64,
    cg_max_iter: usize,
) -> (Vec<f64>, usize, f64, bool) {
    let n = w * h;
    let mut b = vec![0.0; n];
    let mut sampled_sum = 0.0;
    let mut sampled_count = 0.0;
    for p in 0..n {
        b[p] = mask[p] * y[p];
        sampled_sum += b[p];
        sampled_count += mask[p];
    }
    let mean = if sampled_count > 0.0 { sampled_sum / sampled_count } else { 0.0 };
    let mut x = vec![mean; n];

    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut dv = vec![0.0; n];
    let summary = conjugate_gradient(
        |v, out| {
            for p in 0..n {
                out[p] = mask[p] * v[p];
            }
            add_scaled_graph_laplacian(v, w, h, gamma, &mut gx, &mut gy, &mut dv, out);
        },
        &b,
        &mut x,
        cg_tol,
        cg_max_iter,
    );
    (x, summary.iterations, summary.relative_residual, summary.converged)
}
