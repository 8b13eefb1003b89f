//! Anisotropic-TV solver via split Bregman.

use crate::error::Result;
use crate::filter::FilterArray;
use crate::image::Image;
use crate::solvers::cg::{self, conjugate_gradient};
use crate::solvers::gradient::{div_slice, grad_slice};
use crate::solvers::{
    adjoint_channel, check_solver_inputs, l2, merge_channels, per_pixel_attenuation, ChannelDiag,
    Norm, PairSystem, SeparationResult, SolverConfig,
};

/// Soft-thresholding `sign(v)·max(|v|−t, 0)`, the closed-form minimizer of
/// `γ|d| + λ(d−v)²` at `t = γ/(2λ)`.
pub fn shrink(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Minimizes `‖y − Sz‖² + γ_d‖Dz_d‖₁ + γ_s‖Dz_s‖₁` with the split Bregman
/// iteration: a quadratic z-step solved by CG, a componentwise shrinkage
/// d-step, and the Bregman variable update `b ← b + (Dz − d)`.
///
/// Starts from the quadratic-TV solution with `d = Dz` and `b = 0`; stops when
/// the relative change of `z` drops below `cfg.outer_tol` or after
/// `cfg.outer_max_iter` outer iterations.
pub fn separate_l1(
    y: &Image,
    array: &FilterArray,
    phase: f64,
    cfg: &SolverConfig,
) -> Result<SeparationResult> {
    check_solver_inputs(y, array, cfg, Some(Norm::L1))?;
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

fn solve_channel(y: &[f64], atten: &[f64], w: usize, h: usize, cfg: &SolverConfig) -> (Vec<f64>, ChannelDiag) {
    let n = w * h;
    let lambda = cfg.lambda;
    let threshold = [cfg.gamma_d / (2.0 * lambda), cfg.gamma_s / (2.0 * lambda)];

    // z⁰ from the quadratic-TV problem, d⁰ = Dz⁰, b⁰ = 0.
    let (mut z, init_diag) =
        l2::solve_channel(y, atten, w, h, cfg.gamma_d, cfg.gamma_s, cfg.cg_tol, cfg.cg_max_iter);
    let mut cg_converged = init_diag.cg_converged;

    // Four gradient planes per variable: (dx, dy) × (diffuse, specular).
    let mut d = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut b = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    {
        let (zd, zs) = z.split_at(n);
        let [dxd, dyd, dxs, dys] = &mut d;
        grad_slice(zd, w, h, dxd, dyd);
        grad_slice(zs, w, h, dxs, dys);
    }

    let mut adj = vec![0.0; 2 * n];
    {
        let (ad, as_) = adj.split_at_mut(n);
        adjoint_channel(y, atten, ad, as_);
    }

    let mut system = PairSystem::new(atten, w, h, lambda, lambda);
    let mut rhs = vec![0.0; 2 * n];
    let mut diff = [vec![0.0; n], vec![0.0; n]];
    let mut dv = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut z_prev = vec![0.0; 2 * n];

    let mut objective_trace = vec![objective(y, atten, &z, w, h, cfg, &mut gx, &mut gy)];
    let mut constraint_trace = Vec::new();
    let mut rel_change = f64::INFINITY;
    let mut converged = false;
    let mut outer = 0;

    while outer < cfg.outer_max_iter {
        outer += 1;

        // z-step: (SᵀS + λDᵀD) z = Sᵀy + λDᵀ(d − b).
        rhs.copy_from_slice(&adj);
        for comp in 0..2 {
            for p in 0..n {
                diff[0][p] = d[2 * comp][p] - b[2 * comp][p];
                diff[1][p] = d[2 * comp + 1][p] - b[2 * comp + 1][p];
            }
            div_slice(&diff[0], &diff[1], w, h, &mut dv);
            let block = &mut rhs[comp * n..(comp + 1) * n];
            for p in 0..n {
                block[p] -= lambda * dv[p]; // Dᵀ = −div
            }
        }
        z_prev.copy_from_slice(&z);
        let summary = conjugate_gradient(
            |v, out| system.apply(v, out),
            &rhs,
            &mut z,
            cfg.cg_tol,
            cfg.cg_max_iter,
        );
        cg_converged &= summary.converged;

        // d-step: componentwise shrinkage of Dz + b, then b ← (Dz + b) − d.
        let mut constraint_sq = 0.0;
        for comp in 0..2 {
            let plane = &z[comp * n..(comp + 1) * n];
            grad_slice(plane, w, h, &mut gx, &mut gy);
            let t = threshold[comp];
            for (axis, g) in [&gx, &gy].into_iter().enumerate() {
                let dk = &mut d[2 * comp + axis];
                let bk = &mut b[2 * comp + axis];
                for p in 0..n {
                    let v = g[p] + bk[p];
                    let shrunk = shrink(v, t);
                    dk[p] = shrunk;
                    bk[p] = v - shrunk;
                    let c = g[p] - shrunk;
                    constraint_sq += c * c;
                }
            }
        }
        constraint_trace.push(constraint_sq.sqrt());
        objective_trace.push(objective(y, atten, &z, w, h, cfg, &mut gx, &mut gy));

        let dz: f64 = z.iter().zip(&z_prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        rel_change = dz / cg::norm(&z_prev).max(1e-300);
        if rel_change < cfg.outer_tol {
            converged = true;
            break;
        }
    }

    let diag = ChannelDiag {
        iterations: outer,
        final_residual: rel_change,
        objective_trace,
        constraint_trace,
        converged,
        cg_converged,
    };
    (z, diag)
}

/// `‖y − Sz‖² + γ_d‖Dz_d‖₁ + γ_s‖Dz_s‖₁` for one channel.
#[allow(clippy::too_many_arguments)]
fn objective(
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
    let mut tv = 0.0;
    for (plane, gamma) in [(zd, cfg.gamma_d), (zs, cfg.gamma_s)] {
        grad_slice(plane, w, h, gx, gy);
        let l1: f64 = gx.iter().chain(gy.iter()).map(|v| v.abs()).sum();
        tv += gamma * l1;
    }
    data + tv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrink_inside_dead_zone() {
        assert_eq!(shrink(0.5, 1.0), 0.0);
        assert_eq!(shrink(-0.5, 1.0), -0.0);
    }

    #[test]
    fn shrink_outside_dead_zone() {
        assert_eq!(shrink(2.0, 0.5), 1.5);
        assert_eq!(shrink(-2.0, 0.5), -1.5);
    }
}
