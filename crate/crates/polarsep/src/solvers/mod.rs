//! Joint demosaic-and-separate solvers.
//!
//! All three direct solvers minimize a data term `‖y − Sz‖²` plus a total
//! variation penalty on the diffuse and specular components, differing only in
//! the norm applied to the image gradients: quadratic (`l2`), anisotropic
//! absolute value via split Bregman (`l1`), or Huber via damped Newton.
//! [`separate_two_stage`] is the baseline that first interpolates each
//! orientation image and then fits the per-pixel cosine model.

mod cg;
mod gradient;
mod huber;
mod l1;
mod l2;
mod two_stage;

pub use cg::{conjugate_gradient, CgSummary};
pub use gradient::{div, grad, GradientField};
pub use huber::{huber_grad, huber_objective, huber_objective_gradient, huber_value, separate_huber};
pub use l1::{separate_l1, shrink};
pub use l2::separate_l2;
pub use two_stage::{fit_diffuse_specular, separate_two_stage};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterArray;
use crate::image::Image;

/// Which total-variation norm the direct solver applies to the gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    L1,
    Huber,
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Norm::L2 => write!(f, "l2"),
            Norm::L1 => write!(f, "l1"),
            Norm::Huber => write!(f, "huber"),
        }
    }
}

/// Solver weights and stopping rules. Fields absent from a JSON config fall
/// back to these defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// TV weight on the diffuse component.
    pub gamma_d: f64,
    /// TV weight on the specular component.
    pub gamma_s: f64,
    pub norm: Norm,
    /// Coupling weight of the split Bregman quadratic penalty (`l1` only).
    pub lambda: f64,
    /// Huber transition point (`huber` only).
    pub huber_delta: f64,
    /// Relative residual tolerance of the inner conjugate gradient.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub outer_max_iter: usize,
    /// Relative-change (`l1`) or gradient-norm (`huber`) outer tolerance.
    pub outer_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma_d: 0.01,
            gamma_s: 0.002,
            norm: Norm::L2,
            lambda: 0.1,
            huber_delta: 0.05,
            cg_tol: 1e-8,
            cg_max_iter: 2000,
            outer_max_iter: 50,
            outer_tol: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_d", self.gamma_d),
            ("gamma_s", self.gamma_s),
            ("lambda", self.lambda),
            ("huber_delta", self.huber_delta),
            ("cg_tol", self.cg_tol),
            ("outer_tol", self.outer_tol),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.cg_max_iter == 0 || self.outer_max_iter == 0 {
            return Err(Error::InvalidArgument("iteration limits must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: SolverConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Output of a separation solve.
///
/// `final_residual` is the solver's own stopping measure: the CG relative
/// residual for `l2` and the two-stage baseline, the relative z-change for
/// `l1`, and the scaled gradient norm for `huber`. `objective_trace` holds the
/// objective per iterate (per CG step for `l2`, per outer iteration
/// otherwise); `constraint_trace` holds the split Bregman constraint residual
/// ‖Dz − d‖ per outer iteration and is empty for the other solvers.
/// Multi-channel inputs are solved independently per channel; counts are the
/// worst over channels, traces are summed across channels.
#[derive(Debug, Clone)]
pub struct SeparationResult {
    pub diffuse: Image,
    pub specular: Image,
    pub iterations: usize,
    pub final_residual: f64,
    pub objective_trace: Vec<f64>,
    pub constraint_trace: Vec<f64>,
    /// Outer stopping rule met everywhere.
    pub converged: bool,
    /// Every inner conjugate gradient solve reached its tolerance.
    pub cg_converged: bool,
}

/// Dispatches to the solver selected by `cfg.norm`.
pub fn separate(
    y: &Image,
    array: &FilterArray,
    phase: f64,
    cfg: &SolverConfig,
) -> Result<SeparationResult> {
    match cfg.norm {
        Norm::L2 => separate_l2(y, array, phase, cfg),
        Norm::L1 => separate_l1(y, array, phase, cfg),
        Norm::Huber => separate_huber(y, array, phase, cfg),
    }
}

/// Per-channel solver diagnostics prior to merging.
#[derive(Debug, Clone)]
pub(crate) struct ChannelDiag {
    pub iterations: usize,
    pub final_residual: f64,
    pub objective_trace: Vec<f64>,
    pub constraint_trace: Vec<f64>,
    pub converged: bool,
    pub cg_converged: bool,
}

pub(crate) fn check_solver_inputs(
    y: &Image,
    array: &FilterArray,
    cfg: &SolverConfig,
    expected_norm: Option<Norm>,
) -> Result<()> {
    cfg.validate()?;
    if let Some(norm) = expected_norm {
        if cfg.norm != norm {
            return Err(Error::InvalidArgument(format!(
                "config selects {} but the {norm} solver was called",
                cfg.norm
            )));
        }
    }
    if y.height() != array.height() || y.width() != array.width() {
        return Err(Error::ShapeMismatch(format!(
            "measurement {}x{} vs filter array {}x{}",
            y.height(),
            y.width(),
            array.height(),
            array.width()
        )));
    }
    Ok(())
}

/// Flattened per-pixel attenuation cos²(φ−θ_{k(p)}).
pub(crate) fn per_pixel_attenuation(array: &FilterArray, phase: f64) -> Vec<f64> {
    let table = array.attenuation_table(phase);
    array.indices().iter().map(|&i| table[i as usize]).collect()
}

/// Writes `Sᵀy` for one channel into `(out_d, out_s)`.
pub(crate) fn adjoint_channel(y: &[f64], atten: &[f64], out_d: &mut [f64], out_s: &mut [f64]) {
    for p in 0..y.len() {
        out_d[p] = 0.5 * y[p];
        out_s[p] = atten[p] * y[p];
    }
}

/// Matrix-free application of `SᵀS + w_d·DᵀD ⊕ w_s·DᵀD` on a stacked
/// `[z_d; z_s]` channel vector.
pub(crate) struct PairSystem<'a> {
    atten: &'a [f64],
    w: usize,
    h: usize,
    weight_d: f64,
    weight_s: f64,
    t: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    dv: Vec<f64>,
}

impl<'a> PairSystem<'a> {
    pub fn new(atten: &'a [f64], w: usize, h: usize, weight_d: f64, weight_s: f64) -> Self {
        let n = w * h;
        Self {
            atten,
            w,
            h,
            weight_d,
            weight_s,
            t: vec![0.0; n],
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            dv: vec![0.0; n],
        }
    }

    pub fn apply(&mut self, x: &[f64], out: &mut [f64]) {
        let n = self.w * self.h;
        let (xd, xs) = x.split_at(n);
        let (od, os) = out.split_at_mut(n);
        let Self { atten, w, h, weight_d, weight_s, t, gx, gy, dv } = self;
        for p in 0..n {
            t[p] = 0.5 * xd[p] + atten[p] * xs[p];
        }
        for p in 0..n {
            od[p] = 0.5 * t[p];
            os[p] = atten[p] * t[p];
        }
        gradient::add_scaled_graph_laplacian(xd, *w, *h, *weight_d, gx, gy, dv, od);
        gradient::add_scaled_graph_laplacian(xs, *w, *h, *weight_s, gx, gy, dv, os);
    }
}

/// Assembles the final result from per-channel solutions `[z_d; z_s]`.
pub(crate) fn merge_channels(
    y: &Image,
    solutions: Vec<Vec<f64>>,
    diags: Vec<ChannelDiag>,
) -> Result<SeparationResult> {
    let n = y.pixel_count();
    let channels = y.channels();
    let mut diffuse = vec![0.0; n * channels];
    let mut specular = vec![0.0; n * channels];
    for (c, x) in solutions.iter().enumerate() {
        diffuse[c * n..(c + 1) * n].copy_from_slice(&x[..n]);
        specular[c * n..(c + 1) * n].copy_from_slice(&x[n..]);
    }
    let diffuse = Image::from_data(y.height(), y.width(), channels, diffuse)
        .map_err(|e| Error::Numerical(format!("solver produced invalid diffuse output: {e}")))?;
    let specular = Image::from_data(y.height(), y.width(), channels, specular)
        .map_err(|e| Error::Numerical(format!("solver produced invalid specular output: {e}")))?;

    let iterations = diags.iter().map(|d| d.iterations).max().unwrap_or(0);
    let final_residual = diags.iter().map(|d| d.final_residual).fold(0.0, f64::max);
    let converged = diags.iter().all(|d| d.converged);
    let cg_converged = diags.iter().all(|d| d.cg_converged);
    let objective_trace = sum_padded(diags.iter().map(|d| d.objective_trace.as_slice()));
    let constraint_trace = sum_padded(diags.iter().map(|d| d.constraint_trace.as_slice()));

    Ok(SeparationResult {
        diffuse,
        specular,
        iterations,
        final_residual,
        objective_trace,
        constraint_trace,
        converged,
        cg_converged,
    })
}

/// Element-wise sum of traces, each padded with its final value to the longest
/// length; a sum of non-increasing sequences stays non-increasing.
fn sum_padded<'a>(traces: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let traces: Vec<&[f64]> = traces.filter(|t| !t.is_empty()).collect();
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    let mut out = vec![0.0; len];
    for t in traces {
        for (i, o) in out.iter_mut().enumerate() {
            *o += *t.get(i).unwrap_or(t.last().expect("non-empty"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_from_empty_json() {
        let cfg = SolverConfig::from_json("{}").unwrap();
        assert_eq!(cfg, SolverConfig::default());
        assert_eq!(cfg.gamma_d, 0.01);
        assert_eq!(cfg.gamma_s, 0.002);
        assert_eq!(cfg.norm, Norm::L2);
        assert_eq!(cfg.lambda, 0.1);
        assert_eq!(cfg.huber_delta, 0.05);
        assert_eq!(cfg.cg_tol, 1e-8);
        assert_eq!(cfg.cg_max_iter, 2000);
        assert_eq!(cfg.outer_max_iter, 50);
        assert_eq!(cfg.outer_tol, 1e-4);
    }

    #[test]
    fn config_partial_json_overrides() {
        let cfg = SolverConfig::from_json(r#"{"norm":"huber","gamma_d":0.05}"#).unwrap();
        assert_eq!(cfg.norm, Norm::Huber);
        assert_eq!(cfg.gamma_d, 0.05);
        assert_eq!(cfg.gamma_s, 0.002);
    }

    #[test]
    fn config_rejects_nonpositive_weights() {
        assert!(SolverConfig::from_json(r#"{"gamma_d":0.0}"#).is_err());
        assert!(SolverConfig::from_json(r#"{"cg_tol":-1.0}"#).is_err());
    }

    #[test]
    fn trace_sum_pads_with_last_value() {
        let a = vec![4.0, 2.0, 1.0];
        let b = vec![10.0, 5.0];
        let sum = sum_padded([a.as_slice(), b.as_slice()].into_iter());
        assert_eq!(sum, vec![14.0, 7.0, 6.0]);
    }
}
