//! Linear forward model: a diffuse/specular pair seen through the filter array.
//!
//! A pixel with polarizer angle θ under light polarized at φ measures
//! `y = z_d/2 + z_s·cos²(φ−θ)`: the diffuse term is unpolarized and loses half
//! its energy to the filter, the specular term preserves polarization and is
//! attenuated by Malus' law. Stacking the per-pixel equations gives a sparse
//! sampling operator `S`; [`apply_operator`] and [`apply_adjoint`] evaluate
//! `S` and `Sᵀ` matrix-free, and [`build_dense_operator`] materializes `S`
//! for small images as a test oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::filter::{CaptureConfig, FilterArray};
use crate::image::Image;

/// Malus' law attenuation cos²(phase − theta). π-periodic in both arguments.
pub fn malus_attenuation(phase: f64, theta: f64) -> f64 {
    (phase - theta).cos().powi(2)
}

fn check_capture_shapes(diffuse: &Image, specular: &Image, array: &FilterArray) -> Result<()> {
    if !diffuse.same_shape(specular) {
        return Err(Error::ShapeMismatch(format!(
            "diffuse {}x{}x{} vs specular {}x{}x{}",
            diffuse.height(),
            diffuse.width(),
            diffuse.channels(),
            specular.height(),
            specular.width(),
            specular.channels()
        )));
    }
    if diffuse.height() != array.height() || diffuse.width() != array.width() {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} vs filter array {}x{}",
            diffuse.height(),
            diffuse.width(),
            array.height(),
            array.width()
        )));
    }
    Ok(())
}

/// Noiseless forward model `y = S·[z_d; z_s]`, applied independently per channel.
pub fn apply_operator(
    diffuse: &Image,
    specular: &Image,
    array: &FilterArray,
    phase: f64,
) -> Result<Image> {
    check_capture_shapes(diffuse, specular, array)?;
    let atten = array.attenuation_table(phase);
    let indices = array.indices();
    let n = diffuse.pixel_count();
    let mut out = vec![0.0; n * diffuse.channels()];
    for c in 0..diffuse.channels() {
        let zd = diffuse.channel(c);
        let zs = specular.channel(c);
        let plane = &mut out[c * n..(c + 1) * n];
        for p in 0..n {
            plane[p] = 0.5 * zd[p] + atten[indices[p] as usize] * zs[p];
        }
    }
    Image::from_data(diffuse.height(), diffuse.width(), diffuse.channels(), out)
}

/// Adjoint `Sᵀy = (y/2, y·cos²(φ−θ))`, per channel.
pub fn apply_adjoint(y: &Image, array: &FilterArray, phase: f64) -> Result<(Image, Image)> {
    if y.height() != array.height() || y.width() != array.width() {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} vs filter array {}x{}",
            y.height(),
            y.width(),
            array.height(),
            array.width()
        )));
    }
    let atten = array.attenuation_table(phase);
    let indices = array.indices();
    let n = y.pixel_count();
    let mut diffuse = vec![0.0; n * y.channels()];
    let mut specular = vec![0.0; n * y.channels()];
    for c in 0..y.channels() {
        let plane = y.channel(c);
        let d = &mut diffuse[c * n..(c + 1) * n];
        let s = &mut specular[c * n..(c + 1) * n];
        for p in 0..n {
            d[p] = 0.5 * plane[p];
            s[p] = atten[indices[p] as usize] * plane[p];
        }
    }
    Ok((
        Image::from_data(y.height(), y.width(), y.channels(), diffuse)?,
        Image::from_data(y.height(), y.width(), y.channels(), specular)?,
    ))
}

/// Simulates a mosaiced capture: forward model plus seeded iid Gaussian noise.
///
/// With `noise_sigma == 0` this is exactly [`apply_operator`]. Noise samples
/// are drawn sequentially in planar data order, so a fixed seed reproduces
/// the capture bit for bit.
pub fn mosaic_capture(
    diffuse: &Image,
    specular: &Image,
    array: &FilterArray,
    config: &CaptureConfig,
) -> Result<Image> {
    let mut y = apply_operator(diffuse, specular, array, config.phase)?;
    if config.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, config.noise_sigma)
            .map_err(|e| Error::InvalidArgument(format!("noise sigma: {e}")))?;
        for v in y.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(y)
}

/// Pixel-count guard for [`build_dense_operator`].
pub const DENSE_OPERATOR_MAX_PIXELS: usize = 4096;

/// Dense row-major matrix, only used to cross-check the matrix-free paths.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            out[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }
}

/// Materializes the N²×2N² sampling matrix `S` for a single channel.
///
/// Row `p` has exactly two nonzeros: ½ in the diffuse block and
/// cos²(φ−θ_{k(p)}) in the specular block. Guarded to small images; this is
/// an oracle, not a production path.
pub fn build_dense_operator(array: &FilterArray, phase: f64) -> Result<DenseOperator> {
    let n = array.height() * array.width();
    if n > DENSE_OPERATOR_MAX_PIXELS {
        return Err(Error::InvalidArgument(format!(
            "dense operator limited to {DENSE_OPERATOR_MAX_PIXELS} pixels, got {n}"
        )));
    }
    let atten = array.attenuation_table(phase);
    let indices = array.indices();
    let cols = 2 * n;
    let mut data = vec![0.0; n * cols];
    for p in 0..n {
        data[p * cols + p] = 0.5;
        data[p * cols + n + p] = atten[indices[p] as usize];
    }
    Ok(DenseOperator { rows: n, cols, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::OrientationSet;
    use std::f64::consts::PI;

    fn tiny_array() -> FilterArray {
        let set = OrientationSet::new(vec![0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0]).unwrap();
        FilterArray::new(2, 2, vec![0, 1, 2, 3], set).unwrap()
    }

    #[test]
    fn malus_aligned_crossed_diagonal() {
        assert!((malus_attenuation(0.3, 0.3) - 1.0).abs() < 1e-15);
        assert!(malus_attenuation(0.3, 0.3 + PI / 2.0).abs() < 1e-15);
        assert!((malus_attenuation(0.0, PI / 4.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_specular_gives_half_diffuse() {
        let array = tiny_array();
        let diffuse = Image::constant(2, 2, 1, 0.8).unwrap();
        let specular = Image::zeros(2, 2, 1).unwrap();
        let y = apply_operator(&diffuse, &specular, &array, 0.9).unwrap();
        for &v in y.data() {
            assert!((v - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn aligned_pixel_example() {
        // θ = φ at pixel 0: y = 0.4/2 + 0.2·1 = 0.4
        let array = tiny_array();
        let diffuse = Image::constant(2, 2, 1, 0.4).unwrap();
        let specular = Image::constant(2, 2, 1, 0.2).unwrap();
        let y = apply_operator(&diffuse, &specular, &array, 0.0).unwrap();
        assert!((y.get(0, 0, 0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let array = tiny_array();
        let diffuse = Image::zeros(2, 2, 1).unwrap();
        let specular = Image::zeros(2, 3, 1).unwrap();
        assert!(apply_operator(&diffuse, &specular, &array, 0.0).is_err());
        let three = Image::zeros(3, 3, 1).unwrap();
        assert!(apply_operator(&three, &three.clone(), &array, 0.0).is_err());
    }

    #[test]
    fn dense_single_pixel() {
        let set = OrientationSet::new(vec![0.7, 0.7 + PI / 2.0]).unwrap();
        let array = FilterArray::new(1, 1, vec![0], set).unwrap();
        let s = build_dense_operator(&array, 0.7).unwrap();
        assert_eq!(s.rows(), 1);
        assert_eq!(s.cols(), 2);
        assert!((s.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((s.get(0, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_two_pixel_crossed() {
        let set = OrientationSet::new(vec![0.0, PI / 2.0]).unwrap();
        let array = FilterArray::new(2, 1, vec![0, 1], set).unwrap();
        let s = build_dense_operator(&array, 0.0).unwrap();
        let expected = [[0.5, 0.0, 1.0, 0.0], [0.0, 0.5, 0.0, 0.0]];
        for r in 0..2 {
            for c in 0..4 {
                assert!(
                    (s.get(r, c) - expected[r][c]).abs() < 1e-15,
                    "entry ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn dense_guard() {
        let set = OrientationSet::new(vec![0.0, 1.0]).unwrap();
        let array = FilterArray::new(80, 80, vec![0; 6400], set).unwrap();
        assert!(build_dense_operator(&array, 0.0).is_err());
    }

    #[test]
    fn noise_is_seeded_and_sequential() {
        let array = tiny_array();
        let diffuse = Image::constant(2, 2, 1, 0.5).unwrap();
        let specular = Image::constant(2, 2, 1, 0.1).unwrap();
        let cfg = CaptureConfig::new(0.3, 0.05, 42).unwrap();
        let a = mosaic_capture(&diffuse, &specular, &array, &cfg).unwrap();
        let b = mosaic_capture(&diffuse, &specular, &array, &cfg).unwrap();
        assert_eq!(a.data(), b.data());
        let clean = apply_operator(&diffuse, &specular, &array, 0.3).unwrap();
        assert!(a.data() != clean.data());
    }
}
