//! Polarizer orientations, the per-pixel micro-filter array, and capture settings.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `[0, π)`. Polarizer orientation is π-periodic.
pub fn wrap_angle_pi(angle: f64) -> f64 {
    let mut a = angle % PI;
    if a < 0.0 {
        a += PI;
    }
    // -1e-17 % PI can round to PI itself.
    if a >= PI {
        a -= PI;
    }
    a
}

/// The K distinct polarizer angles carried by a filter array, radians in `[0, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationSet {
    angles: Vec<f64>,
}

impl OrientationSet {
    /// Validates: K ≥ 2, all angles in `[0, π)`, strictly increasing.
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 orientations, got {}",
                angles.len()
            )));
        }
        for &a in &angles {
            if !a.is_finite() || !(0.0..PI).contains(&a) {
                return Err(Error::InvalidArgument(format!(
                    "orientation {a} outside [0, pi)"
                )));
            }
        }
        if angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "orientations must be strictly increasing".into(),
            ));
        }
        Ok(Self { angles })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn angle(&self, k: usize) -> f64 {
        self.angles[k]
    }
}

/// Per-pixel polarizer orientation index plus the shared angle table.
///
/// Every pixel carries exactly one orientation index, so the implied
/// selection masks partition the sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterArray {
    height: usize,
    width: usize,
    orientation_index: Vec<u16>,
    orientations: OrientationSet,
}

impl FilterArray {
    pub fn new(
        height: usize,
        width: usize,
        orientation_index: Vec<u16>,
        orientations: OrientationSet,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(
                "filter array dimensions must be positive".into(),
            ));
        }
        if orientation_index.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "orientation index length {} != {}x{}",
                orientation_index.len(),
                height,
                width
            )));
        }
        let k = orientations.len() as u16;
        if orientation_index.iter().any(|&i| i >= k) {
            return Err(Error::InvalidArgument(format!(
                "orientation index out of range (K = {k})"
            )));
        }
        Ok(Self { height, width, orientation_index, orientations })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of distinct orientations K.
    pub fn orientation_count(&self) -> usize {
        self.orientations.len()
    }

    pub fn orientations(&self) -> &OrientationSet {
        &self.orientations
    }

    /// Row-major per-pixel orientation indices.
    pub fn indices(&self) -> &[u16] {
        &self.orientation_index
    }

    pub fn index_at(&self, x: usize, y: usize) -> usize {
        self.orientation_index[y * self.width + x] as usize
    }

    /// cos²(phase − θ_k) for every k, the per-orientation attenuation under Malus' law.
    pub fn attenuation_table(&self, phase: f64) -> Vec<f64> {
        self.orientations
            .angles()
            .iter()
            .map(|&theta| crate::forward::malus_attenuation(phase, theta))
            .collect()
    }

    /// Pixel count per orientation class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.orientation_count()];
        for &i in &self.orientation_index {
            counts[i as usize] += 1;
        }
        counts
    }

    pub fn to_json(&self) -> Result<String> {
        let file = FilterArrayFile {
            height: self.height,
            width: self.width,
            angles_deg: self
                .orientations
                .angles()
                .iter()
                .map(|a| a.to_degrees())
                .collect(),
            orientation_index: self.orientation_index.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: FilterArrayFile = serde_json::from_str(json)?;
        let angles = file.angles_deg.iter().map(|a| a.to_radians()).collect();
        Self::new(
            file.height,
            file.width,
            file.orientation_index,
            OrientationSet::new(angles)?,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk form: angles in degrees, indices row-major.
#[derive(Serialize, Deserialize)]
struct FilterArrayFile {
    height: usize,
    width: usize,
    angles_deg: Vec<f64>,
    orientation_index: Vec<u16>,
}

/// Capture settings: incident light polarization phase and sensor noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureConfig {
    /// Light polarization angle φ, radians in `[0, π)`.
    pub phase: f64,
    /// Standard deviation of additive Gaussian noise, linear units.
    pub noise_sigma: f64,
    /// Seed for the noise stream.
    pub seed: u64,
}

impl CaptureConfig {
    pub fn new(phase: f64, noise_sigma: f64, seed: u64) -> Result<Self> {
        if !phase.is_finite() || !(0.0..PI).contains(&phase) {
            return Err(Error::InvalidArgument(format!("phase {phase} outside [0, pi)")));
        }
        if !noise_sigma.is_finite() || noise_sigma < 0.0 {
            return Err(Error::InvalidArgument("noise sigma must be >= 0".into()));
        }
        Ok(Self { phase, noise_sigma, seed })
    }

    /// Noiseless capture with a given phase.
    pub fn exact(phase: f64) -> Result<Self> {
        Self::new(phase, 0.0, 0)
    }
}
