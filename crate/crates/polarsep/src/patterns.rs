//! Filter-array layout generation: regular tiles and seeded random mosaics.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FilterArray, OrientationSet};

/// Layout family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    /// √K×√K tile repeated periodically; K must be a perfect square.
    Regular,
    /// Per-pixel orientation drawn iid uniform from the seeded generator.
    Random,
}

impl std::fmt::Display for PatternKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PatternKind::Regular => write!(f, "regular"),
            PatternKind::Random => write!(f, "random"),
        }
    }
}

/// Recipe for a filter-array layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub k: usize,
    /// Only used by `Random`.
    #[serde(default)]
    pub seed: u64,
    pub height: usize,
    pub width: usize,
}

/// K equally spaced orientations θ_j = j·π/K over `[0, π)`.
pub fn generate_orientations(k: usize) -> Result<OrientationSet> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 orientations, got {k}"
        )));
    }
    OrientationSet::new((0..k).map(|j| j as f64 * PI / k as f64).collect())
}

/// Builds the layout described by `spec`. Identical specs produce identical arrays.
///
/// Random draws that miss an orientation entirely are rejected and redrawn
/// with an incremented seed, so every orientation class is non-empty.
pub fn generate_pattern(spec: &PatternSpec) -> Result<FilterArray> {
    let orientations = generate_orientations(spec.k)?;
    match spec.kind {
        PatternKind::Regular => {
            let tile = integer_sqrt(spec.k).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "regular pattern requires a perfect-square K, got {}",
                    spec.k
                ))
            })?;
            if spec.height < tile || spec.width < tile {
                return Err(Error::InvalidArgument(format!(
                    "array {}x{} smaller than the {tile}x{tile} tile",
                    spec.height, spec.width
                )));
            }
            let mut indices = Vec::with_capacity(spec.height * spec.width);
            for y in 0..spec.height {
                for x in 0..spec.width {
                    indices.push(((y % tile) * tile + (x % tile)) as u16);
                }
            }
            FilterArray::new(spec.height, spec.width, indices, orientations)
        }
        PatternKind::Random => {
            let n = spec.height * spec.width;
            if n < spec.k {
                return Err(Error::InvalidArgument(format!(
                    "{}x{} array cannot cover {} orientations",
                    spec.height, spec.width, spec.k
                )));
            }
            // Bounded redraw; for any reasonable size the first draw covers all classes.
            for attempt in 0..100u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(attempt));
                let indices: Vec<u16> =
                    (0..n).map(|_| rng.random_range(0..spec.k) as u16).collect();
                let mut seen = vec![false; spec.k];
                for &i in &indices {
                    seen[i as usize] = true;
                }
                if seen.iter().all(|&s| s) {
                    return FilterArray::new(spec.height, spec.width, indices, orientations);
                }
            }
            Err(Error::Numerical(format!(
                "could not draw a random pattern covering all {} orientations",
                spec.k
            )))
        }
    }
}

fn integer_sqrt(k: usize) -> Option<usize> {
    let r = (k as f64).sqrt().round() as usize;
    (r * r == k).then_some(r)
}
