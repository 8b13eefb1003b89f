//! Forward-difference gradient and its exact negative adjoint.

use crate::image::Image;

/// Per-pixel forward differences of an image, one (dx, dy) pair per channel.
///
/// The out-of-range direction on the last row/column carries a zero
/// difference (replicate boundary).
#[derive(Debug, Clone)]
pub struct GradientField {
    pub dx: Image,
    pub dy: Image,
}

/// Forward differences with replicate boundary.
pub fn grad(img: &Image) -> GradientField {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut dx = Image::zeros(h, w, ch).expect("same valid shape");
    let mut dy = Image::zeros(h, w, ch).expect("same valid shape");
    for c in 0..ch {
        grad_slice(img.channel(c), w, h, dx.channel_mut(c), dy.channel_mut(c));
    }
    GradientField { dx, dy }
}

/// Discrete divergence, the exact negative adjoint of [`grad`]:
/// ⟨grad u, g⟩ = −⟨u, div g⟩ for every u, g.
pub fn div(g: &GradientField) -> Image {
    let (h, w, ch) = (g.dx.height(), g.dx.width(), g.dx.channels());
    let mut out = Image::zeros(h, w, ch).expect("same valid shape");
    for c in 0..ch {
        div_slice(g.dx.channel(c), g.dy.channel(c), w, h, out.channel_mut(c));
    }
    out
}

pub(crate) fn grad_slice(u: &[f64], w: usize, h: usize, dx: &mut [f64], dy: &mut [f64]) {
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let p = row + x;
            dx[p] = if x + 1 < w { u[p + 1] - u[p] } else { 0.0 };
            dy[p] = if y + 1 < h { u[p + w] - u[p] } else { 0.0 };
        }
    }
}

pub(crate) fn div_slice(dx: &[f64], dy: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let p = row + x;
            let mut v = 0.0;
            if x + 1 < w {
                v += dx[p];
            }
            if x > 0 {
                v -= dx[p - 1];
            }
            if y + 1 < h {
                v += dy[p];
            }
            if y > 0 {
                v -= dy[p - w];
            }
            out[p] = v;
        }
    }
}

/// `out += scale · DᵀD u` for one channel plane, with scratch provided by the caller.
pub(crate) fn add_scaled_graph_laplacian(
    u: &[f64],
    w: usize,
    h: usize,
    scale: f64,
    gx: &mut [f64],
    gy: &mut [f64],
    dv: &mut [f64],
    out: &mut [f64],
) {
    grad_slice(u, w, h, gx, gy);
    div_slice(gx, gy, w, h, dv);
    for (o, &d) in out.iter_mut().zip(dv.iter()) {
        *o -= scale * d; // DᵀD = −div∘grad
    }
}
