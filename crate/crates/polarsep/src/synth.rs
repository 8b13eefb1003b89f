//! Procedural ground truth: scenes with separate diffuse and specular layers,
//! and multi-light dome capture simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{CaptureConfig, FilterArray};
use crate::forward::mosaic_capture;
use crate::image::Image;
use crate::linalg::{dot3, norm3, normalize3};

/// Default number of dome lights.
pub const DEFAULT_LIGHT_COUNT: usize = 58;

/// Procedural scene kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SceneKind {
    #[serde(rename = "sphere")]
    Sphere,
    #[serde(rename = "heightmap")]
    HeightMap,
    #[serde(rename = "flat")]
    FlatTextured,
}

impl std::fmt::Display for SceneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SceneKind::Sphere => write!(f, "sphere"),
            SceneKind::HeightMap => write!(f, "heightmap"),
            SceneKind::FlatTextured => write!(f, "flat"),
        }
    }
}

/// Geometry and material of a synthetic scene: per-pixel unit normals,
/// diffuse albedo, and a single Blinn-Phong specular lobe.
#[derive(Debug, Clone)]
pub struct Scene {
    normals: Vec<[f64; 3]>,
    albedo: Image,
    specular_coeff: f64,
    shininess: f64,
}

impl Scene {
    pub fn new(
        normals: Vec<[f64; 3]>,
        albedo: Image,
        specular_coeff: f64,
        shininess: f64,
    ) -> Result<Self> {
        if normals.len() != albedo.pixel_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} normals for {} pixels",
                normals.len(),
                albedo.pixel_count()
            )));
        }
        for n in &normals {
            if (norm3(*n) - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument("normals must be unit length".into()));
            }
        }
        if albedo.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidArgument("albedo must lie in [0,1]".into()));
        }
        if !(specular_coeff >= 0.0) || !specular_coeff.is_finite() {
            return Err(Error::InvalidArgument("specular coefficient must be >= 0".into()));
        }
        if !(shininess >= 1.0) || !shininess.is_finite() {
            return Err(Error::InvalidArgument("shininess must be >= 1".into()));
        }
        Ok(Self { normals, albedo, specular_coeff, shininess })
    }

    pub fn height(&self) -> usize {
        self.albedo.height()
    }

    pub fn width(&self) -> usize {
        self.albedo.width()
    }

    pub fn normals(&self) -> &[[f64; 3]] {
        &self.normals
    }

    pub fn albedo(&self) -> &Image {
        &self.albedo
    }

    pub fn specular_coeff(&self) -> f64 {
        self.specular_coeff
    }

    pub fn shininess(&self) -> f64 {
        self.shininess
    }

    /// Same geometry with a different specular lobe.
    pub fn with_specular(self, specular_coeff: f64, shininess: f64) -> Result<Self> {
        Self::new(self.normals, self.albedo, specular_coeff, shininess)
    }
}

/// Builds a deterministic procedural scene; the same seed gives the same scene.
pub fn make_scene(kind: SceneKind, size: usize, seed: u64) -> Result<Scene> {
    if size < 16 {
        return Err(Error::InvalidArgument(format!("scene size {size} < 16")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SceneKind::Sphere => sphere_scene(size, &mut rng),
        SceneKind::HeightMap => heightmap_scene(size, &mut rng),
        SceneKind::FlatTextured => flat_scene(size, &mut rng),
    }
}

fn sphere_scene(size: usize, rng: &mut ChaCha8Rng) -> Result<Scene> {
    let albedo_data = value_noise(size, 6, 0.30, 0.85, rng);
    let albedo = Image::from_data(size, size, 1, albedo_data)?;
    let center = (size as f64 - 1.0) / 2.0;
    let radius = 0.42 * size as f64;
    let mut normals = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let u = (x as f64 - center) / radius;
            let v = (center - y as f64) / radius;
            let rho2 = u * u + v * v;
            if rho2 < 1.0 {
                normals.push(normalize3([u, v, (1.0 - rho2).sqrt()]));
            } else {
                normals.push([0.0, 0.0, 1.0]);
            }
        }
    }
    Scene::new(normals, albedo, 0.4, 30.0)
}

fn heightmap_scene(size: usize, rng: &mut ChaCha8Rng) -> Result<Scene> {
    let mut height: Vec<f64> = (0..size * size).map(|_| rng.random_range(0.0..1.0)).collect();
    let radius = (size / 16).max(2);
    for _ in 0..3 {
        height = box_blur(&height, size, size, radius);
    }
    let (lo, hi) = min_max(&height);
    let span = (hi - lo).max(1e-12);
    for v in &mut height {
        *v = (*v - lo) / span;
    }
    // Height amplitude in pixel units controls the bumpiness.
    let amplitude = size as f64 / 4.0;
    let mut normals = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let at = |xx: isize, yy: isize| {
                let xx = xx.clamp(0, size as isize - 1) as usize;
                let yy = yy.clamp(0, size as isize - 1) as usize;
                height[yy * size + xx]
            };
            let hx = (at(x as isize + 1, y as isize) - at(x as isize - 1, y as isize)) / 2.0;
            let hy = (at(x as isize, y as isize + 1) - at(x as isize, y as isize - 1)) / 2.0;
            normals.push(normalize3([-amplitude * hx, amplitude * hy, 1.0]));
        }
    }
    let albedo_data = value_noise(size, 5, 0.30, 0.90, rng);
    let albedo = Image::from_data(size, size, 1, albedo_data)?;
    Scene::new(normals, albedo, 0.4, 30.0)
}

fn flat_scene(size: usize, rng: &mut ChaCha8Rng) -> Result<Scene> {
    let mut albedo_data = value_noise(size, 5, 0.25, 0.75, rng);
    // A few constant patches give the texture piecewise-constant regions.
    for _ in 0..4 {
        let w = rng.random_range(size / 8..size / 3);
        let h = rng.random_range(size / 8..size / 3);
        let x0 = rng.random_range(0..size - w);
        let y0 = rng.random_range(0..size - h);
        let level = rng.random_range(0.1..0.9);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                albedo_data[y * size + x] = level;
            }
        }
    }
    let albedo = Image::from_data(size, size, 1, albedo_data)?;
    let normals = vec![[0.0, 0.0, 1.0]; size * size];
    Scene::new(normals, albedo, 0.4, 30.0)
}

/// Bilinearly interpolated lattice noise in `[lo, hi]`.
fn value_noise(size: usize, cells: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lattice: Vec<f64> = (0..(cells + 1) * (cells + 1))
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    let mut out = Vec::with_capacity(size * size);
    let scale = cells as f64 / (size as f64 - 1.0);
    for y in 0..size {
        for x in 0..size {
            let fx = x as f64 * scale;
            let fy = y as f64 * scale;
            let x0 = (fx as usize).min(cells - 1);
            let y0 = (fy as usize).min(cells - 1);
            let tx = fx - x0 as f64;
            let ty = fy - y0 as f64;
            let l = |xx: usize, yy: usize| lattice[yy * (cells + 1) + xx];
            let v = l(x0, y0) * (1.0 - tx) * (1.0 - ty)
                + l(x0 + 1, y0) * tx * (1.0 - ty)
                + l(x0, y0 + 1) * (1.0 - tx) * ty
                + l(x0 + 1, y0 + 1) * tx * ty;
            out.push(lo + v * (hi - lo));
        }
    }
    out
}

fn box_blur(data: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; w * h];
    let mut out = vec![0.0; w * h];
    let r = radius as isize;
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0;
            for dx in -r..=r {
                let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                sum += data[y * w + xx];
            }
            tmp[y * w + x] = sum / (2 * radius + 1) as f64;
        }
    }
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0;
            for dy in -r..=r {
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                sum += tmp[yy * w + x];
            }
            out[y * w + x] = sum / (2 * radius + 1) as f64;
        }
    }
    out
}

fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Renders the diffuse and specular layers of a scene under one directional
/// light: Lambertian `albedo·max(0, n·l)` and Blinn-Phong
/// `k_s·max(0, n·h)^α` with the viewer at `(0, 0, 1)`. Both layers are
/// clipped to `[0, 1]`.
pub fn render_layers(scene: &Scene, light: [f64; 3]) -> Result<(Image, Image)> {
    if (norm3(light) - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument("light direction must be unit length".into()));
    }
    let view = [0.0, 0.0, 1.0];
    let half = normalize3([light[0] + view[0], light[1] + view[1], light[2] + view[2]]);
    let (h, w, ch) = (scene.height(), scene.width(), scene.albedo().channels());
    let n_px = h * w;

    let mut shade = vec![0.0; n_px];
    let mut spec = vec![0.0; n_px];
    for (p, n) in scene.normals().iter().enumerate() {
        shade[p] = dot3(*n, light).max(0.0);
        spec[p] = (scene.specular_coeff() * dot3(*n, half).max(0.0).powf(scene.shininess()))
            .clamp(0.0, 1.0);
    }

    let mut diffuse = Image::zeros(h, w, ch)?;
    for c in 0..ch {
        let albedo = scene.albedo().channel(c);
        let plane = diffuse.channel_mut(c);
        for p in 0..n_px {
            plane[p] = (albedo[p] * shade[p]).clamp(0.0, 1.0);
        }
    }
    let mut specular = Image::zeros(h, w, ch)?;
    for c in 0..ch {
        specular.channel_mut(c).copy_from_slice(&spec);
    }
    Ok((diffuse, specular))
}

/// Directional lights on the upper hemisphere, camera at the zenith.
#[derive(Debug, Clone)]
pub struct LightDome {
    directions: Vec<[f64; 3]>,
}

impl LightDome {
    /// Golden-spiral placement of `count` lights covering the hemisphere.
    pub fn golden_spiral(count: usize) -> Result<Self> {
        if count < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 lights, got {count}")));
        }
        let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        let directions = (0..count)
            .map(|i| {
                let z = 1.0 - (i as f64 + 0.5) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden_angle * i as f64;
                [r * phi.cos(), r * phi.sin(), z]
            })
            .collect();
        Ok(Self { directions })
    }

    pub fn new(directions: Vec<[f64; 3]>) -> Result<Self> {
        if directions.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 lights, got {}",
                directions.len()
            )));
        }
        for d in &directions {
            if (norm3(*d) - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument("light directions must be unit length".into()));
            }
            if d[2] <= 0.0 {
                return Err(Error::InvalidArgument(
                    "light directions must have positive z".into(),
                ));
            }
        }
        Ok(Self { directions })
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// One mosaiced capture per dome light, plus the ground-truth layers used for
/// evaluation.
#[derive(Debug, Clone)]
pub struct DomeCaptures {
    pub mosaics: Vec<Image>,
    pub diffuse: Vec<Image>,
    pub specular: Vec<Image>,
}

/// Renders and mosaics the scene under every dome light with the shared
/// filter array and phase. Capture `i` uses noise seed `config.seed + i`, so
/// each exposure carries an independent but reproducible noise draw.
pub fn simulate_dome_captures(
    scene: &Scene,
    dome: &LightDome,
    array: &FilterArray,
    config: &CaptureConfig,
) -> Result<DomeCaptures> {
    if scene.height() != array.height() || scene.width() != array.width() {
        return Err(Error::ShapeMismatch(format!(
            "scene {}x{} vs filter array {}x{}",
            scene.height(),
            scene.width(),
            array.height(),
            array.width()
        )));
    }
    let mut captures = DomeCaptures {
        mosaics: Vec::with_capacity(dome.len()),
        diffuse: Vec::with_capacity(dome.len()),
        specular: Vec::with_capacity(dome.len()),
    };
    for (i, &light) in dome.directions().iter().enumerate() {
        let (diffuse, specular) = render_layers(scene, light)?;
        let per_light = CaptureConfig {
            seed: config.seed.wrapping_add(i as u64),
            ..*config
        };
        let mosaic = mosaic_capture(&diffuse, &specular, array, &per_light)?;
        captures.mosaics.push(mosaic);
        captures.diffuse.push(diffuse);
        captures.specular.push(specular);
    }
    Ok(captures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{generate_pattern, PatternKind, PatternSpec};

    #[test]
    fn sphere_apex_points_at_camera() {
        let scene = make_scene(SceneKind::Sphere, 33, 1).unwrap();
        let center = scene.normals()[16 * 33 + 16];
        assert!((center[0]).abs() < 1e-9);
        assert!((center[1]).abs() < 1e-9);
        assert!((center[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn heightmap_normals_are_unit() {
        let scene = make_scene(SceneKind::HeightMap, 32, 5).unwrap();
        for n in scene.normals() {
            assert!((norm3(*n) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn scenes_are_deterministic() {
        for kind in [SceneKind::Sphere, SceneKind::HeightMap, SceneKind::FlatTextured] {
            let a = make_scene(kind, 24, 9).unwrap();
            let b = make_scene(kind, 24, 9).unwrap();
            assert_eq!(a.normals(), b.normals());
            assert_eq!(a.albedo().data(), b.albedo().data());
        }
    }

    #[test]
    fn aligned_light_reproduces_albedo_and_ks() {
        let size = 16;
        let scene = make_scene(SceneKind::FlatTextured, size, 3)
            .unwrap()
            .with_specular(0.25, 10.0)
            .unwrap();
        let (diffuse, specular) = render_layers(&scene, [0.0, 0.0, 1.0]).unwrap();
        for (d, a) in diffuse.data().iter().zip(scene.albedo().data()) {
            assert!((d - a).abs() < 1e-12);
        }
        for &s in specular.data() {
            assert!((s - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn backfacing_light_is_shadowed() {
        let scene = make_scene(SceneKind::Sphere, 32, 2).unwrap();
        let light = normalize3([0.9, 0.0, 0.1]);
        let (diffuse, _) = render_layers(&scene, light).unwrap();
        // Pixels whose normal faces away from the light render to zero.
        for (p, n) in scene.normals().iter().enumerate() {
            if dot3(*n, light) <= 0.0 {
                assert_eq!(diffuse.data()[p], 0.0);
            } else {
                let expected = (scene.albedo().data()[p] * dot3(*n, light)).clamp(0.0, 1.0);
                assert!((diffuse.data()[p] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn golden_spiral_is_well_spread() {
        let dome = LightDome::golden_spiral(DEFAULT_LIGHT_COUNT).unwrap();
        assert_eq!(dome.len(), 58);
        let mut min_angle = f64::INFINITY;
        for i in 0..dome.len() {
            assert!(dome.directions()[i][2] > 0.0);
            assert!((norm3(dome.directions()[i]) - 1.0).abs() < 1e-12);
            for j in (i + 1)..dome.len() {
                let cos = dot3(dome.directions()[i], dome.directions()[j]).clamp(-1.0, 1.0);
                min_angle = min_angle.min(cos.acos());
            }
        }
        assert!(min_angle.to_degrees() > 5.0, "min angle {}", min_angle.to_degrees());
    }

    #[test]
    fn dome_capture_composes_from_parts() {
        let scene = make_scene(SceneKind::Sphere, 24, 7).unwrap();
        let dome = LightDome::golden_spiral(4).unwrap();
        let array = generate_pattern(&PatternSpec {
            kind: PatternKind::Random,
            k: 4,
            seed: 2,
            height: 24,
            width: 24,
        })
        .unwrap();
        let config = CaptureConfig::new(0.5, 0.01, 40).unwrap();
        let captures = simulate_dome_captures(&scene, &dome, &array, &config).unwrap();
        assert_eq!(captures.mosaics.len(), 4);
        for (i, &light) in dome.directions().iter().enumerate() {
            let (diffuse, specular) = render_layers(&scene, light).unwrap();
            let per_light = CaptureConfig { seed: config.seed + i as u64, ..config };
            let manual = mosaic_capture(&diffuse, &specular, &array, &per_light).unwrap();
            assert_eq!(manual.data(), captures.mosaics[i].data());
        }
    }

    #[test]
    fn pure_diffuse_capture_is_half_diffuse() {
        let scene = make_scene(SceneKind::FlatTextured, 16, 11)
            .unwrap()
            .with_specular(0.0, 1.0)
            .unwrap();
        let dome = LightDome::golden_spiral(3).unwrap();
        let array = generate_pattern(&PatternSpec {
            kind: PatternKind::Random,
            k: 4,
            seed: 3,
            height: 16,
            width: 16,
        })
        .unwrap();
        let config = CaptureConfig::exact(0.3).unwrap();
        let captures = simulate_dome_captures(&scene, &dome, &array, &config).unwrap();
        for (mosaic, diffuse) in captures.mosaics.iter().zip(&captures.diffuse) {
            for (m, d) in mosaic.data().iter().zip(diffuse.data()) {
                assert!((m - 0.5 * d).abs() < 1e-12);
            }
        }
    }
}
