//! Lambertian photometric stereo and normal-map error metrics.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::{dot3, norm3, solve3};
use crate::synth::Scene;

/// Observations at or below this intensity are treated as shadowed and left
/// out of the per-pixel fit.
pub const SHADOW_THRESHOLD: f64 = 0.01;

/// Per-pixel surface orientation and albedo. Pixels without enough
/// unshadowed observations are flagged invalid and carry the placeholder
/// normal `(0, 0, 1)` with zero albedo.
#[derive(Debug, Clone)]
pub struct NormalMap {
    height: usize,
    width: usize,
    pub normals: Vec<[f64; 3]>,
    pub albedo: Vec<f64>,
    pub valid: Vec<bool>,
}

impl NormalMap {
    pub fn new(
        height: usize,
        width: usize,
        normals: Vec<[f64; 3]>,
        albedo: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let n = height * width;
        if normals.len() != n || albedo.len() != n || valid.len() != n {
            return Err(Error::ShapeMismatch("normal map field lengths differ".into()));
        }
        Ok(Self { height, width, normals, albedo, valid })
    }

    /// Reference map from analytic scene normals; all pixels valid, albedo is
    /// the scene's luma albedo.
    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            height: scene.height(),
            width: scene.width(),
            normals: scene.normals().to_vec(),
            albedo: scene.albedo().to_luma().data().to_vec(),
            valid: vec![true; scene.height() * scene.width()],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Recovers per-pixel normals and albedo from L images under known
/// directional lights, assuming Lambertian shading `i = albedo·(n·l)`.
///
/// Per pixel, observations above [`SHADOW_THRESHOLD`] are kept; with at least
/// three the least squares `L·g = i` is solved and `g` split into
/// `albedo = ‖g‖`, `n = g/‖g‖`. Multi-channel inputs are reduced to luma
/// first. Needs L ≥ 3 lights spanning all three dimensions.
pub fn photometric_stereo(images: &[Image], lights: &[[f64; 3]]) -> Result<NormalMap> {
    if images.len() != lights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} images for {} lights",
            images.len(),
            lights.len()
        )));
    }
    if lights.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "photometric stereo needs at least 3 lights, got {}",
            lights.len()
        )));
    }
    for l in lights {
        if (norm3(*l) - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument("light directions must be unit length".into()));
        }
    }
    let first = &images[0];
    if images.iter().any(|img| !img.same_shape(first)) {
        return Err(Error::ShapeMismatch("stack images differ in shape".into()));
    }
    // Rank check on the full light matrix.
    let gram = light_gram(lights);
    if gram_near_singular(&gram) {
        return Err(Error::InvalidArgument(
            "light directions are rank deficient (coplanar)".into(),
        ));
    }

    let stack: Vec<Image> = images.iter().map(|img| img.to_luma()).collect();
    let (h, w) = (first.height(), first.width());
    let n_px = h * w;
    let mut normals = vec![[0.0, 0.0, 1.0]; n_px];
    let mut albedo = vec![0.0; n_px];
    let mut valid = vec![false; n_px];

    let mut selected: Vec<usize> = Vec::with_capacity(lights.len());
    for p in 0..n_px {
        selected.clear();
        for (i, img) in stack.iter().enumerate() {
            if img.data()[p] > SHADOW_THRESHOLD {
                selected.push(i);
            }
        }
        if selected.len() < 3 {
            continue;
        }
        let mut a = [[0.0f64; 3]; 3];
        let mut b = [0.0f64; 3];
        for &i in &selected {
            let l = lights[i];
            let v = stack[i].data()[p];
            for r in 0..3 {
                for c in 0..3 {
                    a[r][c] += l[r] * l[c];
                }
                b[r] += l[r] * v;
            }
        }
        let Some(g) = solve3(&a, &b) else {
            continue; // selected lights degenerate at this pixel
        };
        let mag = norm3(g);
        if mag > 1e-8 {
            normals[p] = [g[0] / mag, g[1] / mag, g[2] / mag];
            albedo[p] = mag;
            valid[p] = true;
        }
    }
    NormalMap::new(h, w, normals, albedo, valid)
}

fn light_gram(lights: &[[f64; 3]]) -> [[f64; 3]; 3] {
    let mut a = [[0.0f64; 3]; 3];
    for l in lights {
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += l[r] * l[c];
            }
        }
    }
    a
}

fn gram_near_singular(a: &[[f64; 3]; 3]) -> bool {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let scale = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    det.abs() < 1e-9 * scale.powi(3).max(1e-300)
}

/// Angular-error summary between two normal maps over jointly valid pixels.
#[derive(Debug, Clone)]
pub struct AngularError {
    pub mean_deg: f64,
    pub median_deg: f64,
    /// Per-pixel error in degrees; zero where either map is invalid.
    pub map: Image,
}

/// Per-pixel angle `arccos(n̂·n)` in degrees, aggregated over pixels valid in
/// both maps. Errors if the maps share no valid pixel.
pub fn angular_error(estimate: &NormalMap, truth: &NormalMap) -> Result<AngularError> {
    if estimate.height != truth.height || estimate.width != truth.width {
        return Err(Error::ShapeMismatch(format!(
            "normal maps {}x{} vs {}x{}",
            estimate.height, estimate.width, truth.height, truth.width
        )));
    }
    let n_px = estimate.height * estimate.width;
    let mut map = vec![0.0; n_px];
    let mut errors = Vec::new();
    for p in 0..n_px {
        if estimate.valid[p] && truth.valid[p] {
            let cos = dot3(estimate.normals[p], truth.normals[p]).clamp(-1.0, 1.0);
            let deg = cos.acos().to_degrees();
            map[p] = deg;
            errors.push(deg);
        }
    }
    if errors.is_empty() {
        return Err(Error::Numerical("no jointly valid pixels".into()));
    }
    let mean_deg = errors.iter().sum::<f64>() / errors.len() as f64;
    let mut sorted = errors;
    sorted.sort_by(f64::total_cmp);
    let median_deg = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    Ok(AngularError {
        mean_deg,
        median_deg,
        map: Image::from_data(estimate.height, estimate.width, 1, map)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::normalize3;
    use crate::synth::{make_scene, render_layers, LightDome, SceneKind};

    fn lambertian_stack(scene: &Scene, lights: &[[f64; 3]]) -> Vec<Image> {
        lights
            .iter()
            .map(|&l| render_layers(scene, l).unwrap().0)
            .collect()
    }

    #[test]
    fn flat_scene_exact_recovery() {
        let scene = make_scene(SceneKind::FlatTextured, 16, 1)
            .unwrap()
            .with_specular(0.0, 1.0)
            .unwrap();
        let lights = [
            normalize3([0.4, 0.1, 0.9]),
            normalize3([-0.3, 0.4, 0.85]),
            normalize3([0.1, -0.5, 0.8]),
        ];
        let stack = lambertian_stack(&scene, &lights);
        let map = photometric_stereo(&stack, &lights).unwrap();
        let truth = NormalMap::from_scene(&scene);
        let err = angular_error(&map, &truth).unwrap();
        assert!(err.mean_deg < 1e-10, "mean error {}", err.mean_deg);
        for (p, &v) in map.valid.iter().enumerate() {
            if v {
                assert!((map.albedo[p] - truth.albedo[p]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn too_few_lights_rejected() {
        let img = Image::constant(4, 4, 1, 0.5).unwrap();
        let lights = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        assert!(photometric_stereo(&[img.clone(), img], &lights).is_err());
    }

    #[test]
    fn coplanar_lights_rejected() {
        let img = Image::constant(4, 4, 1, 0.5).unwrap();
        let l1 = normalize3([1.0, 0.0, 1.0]);
        let l2 = normalize3([0.0, 0.0, 1.0]);
        let l3 = normalize3([-1.0, 0.0, 1.0]);
        let stack = vec![img.clone(), img.clone(), img];
        assert!(photometric_stereo(&stack, &[l1, l2, l3]).is_err());
    }

    #[test]
    fn all_shadow_pixel_is_invalid() {
        let mut imgs = Vec::new();
        for _ in 0..3 {
            imgs.push(Image::constant(2, 2, 1, 0.005).unwrap());
        }
        let lights = [
            normalize3([0.4, 0.1, 0.9]),
            normalize3([-0.3, 0.4, 0.85]),
            normalize3([0.1, -0.5, 0.8]),
        ];
        let map = photometric_stereo(&imgs, &lights).unwrap();
        assert_eq!(map.valid_count(), 0);
        assert!(map.normals.iter().all(|&n| n == [0.0, 0.0, 1.0]));
    }

    #[test]
    fn sphere_recovery_under_dome() {
        let scene = make_scene(SceneKind::Sphere, 32, 3)
            .unwrap()
            .with_specular(0.0, 1.0)
            .unwrap();
        let dome = LightDome::golden_spiral(10).unwrap();
        let stack = lambertian_stack(&scene, dome.directions());
        let map = photometric_stereo(&stack, dome.directions()).unwrap();
        let truth = NormalMap::from_scene(&scene);
        let err = angular_error(&map, &truth).unwrap();
        assert!(err.mean_deg < 1.0, "mean error {}", err.mean_deg);
    }

    #[test]
    fn rotated_normals_report_the_rotation_angle() {
        let scene = make_scene(SceneKind::FlatTextured, 8, 2).unwrap();
        let truth = NormalMap::from_scene(&scene);
        let mut rotated = truth.clone();
        let angle = 5.0f64.to_radians();
        let (s, c) = angle.sin_cos();
        for n in &mut rotated.normals {
            // rotate about the x-axis
            let (y, z) = (n[1], n[2]);
            n[1] = c * y - s * z;
            n[2] = s * y + c * z;
        }
        let err = angular_error(&rotated, &truth).unwrap();
        assert!((err.mean_deg - 5.0).abs() < 1e-6);
        assert!((err.median_deg - 5.0).abs() < 1e-6);
    }

    #[test]
    fn intensity_scaling_only_scales_albedo() {
        let scene = make_scene(SceneKind::HeightMap, 16, 4)
            .unwrap()
            .with_specular(0.0, 1.0)
            .unwrap();
        let dome = LightDome::golden_spiral(6).unwrap();
        let stack = lambertian_stack(&scene, dome.directions());
        let scaled: Vec<Image> = stack.iter().map(|img| img.map(|v| 2.0 * v)).collect();
        let a = photometric_stereo(&stack, dome.directions()).unwrap();
        let b = photometric_stereo(&scaled, dome.directions()).unwrap();
        for p in 0..a.normals.len() {
            if a.valid[p] && b.valid[p] {
                for axis in 0..3 {
                    assert!((a.normals[p][axis] - b.normals[p][axis]).abs() < 1e-9);
                }
                assert!((b.albedo[p] - 2.0 * a.albedo[p]).abs() < 1e-9);
            }
        }
    }
}
