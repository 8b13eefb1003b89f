//! Light-polarization phase estimation from per-orientation pixel means.
//!
//! Averaging the mosaic over each orientation class gives K means obeying
//! `μ_k = μ_d + μ_s·cos²(φ−θ_k)`; a coarse grid over φ followed by
//! Gauss–Newton refinement recovers the phase without any calibration target.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::filter::{wrap_angle_pi, FilterArray, OrientationSet};
use crate::image::Image;
use crate::linalg::solve3;

/// Result of fitting the per-orientation mean model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate {
    /// Estimated light polarization phase, radians in `[0, π)`.
    pub phase: f64,
    /// Mean diffuse level (precisely: half-diffuse mean plus any common offset).
    pub mu_d: f64,
    /// Mean specular level, clamped to be non-negative.
    pub mu_s: f64,
    /// RMS residual of the fit.
    pub residual: f64,
    /// False when the specular mean is too small to pin down the phase.
    pub identifiable: bool,
    /// True when K = 3 made the fit exactly determined rather than overdetermined.
    pub exactly_determined: bool,
}

/// Mean measurement per orientation class, averaged over channels.
pub fn orientation_means(y: &Image, array: &FilterArray) -> Result<Vec<f64>> {
    if y.height() != array.height() || y.width() != array.width() {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} vs filter array {}x{}",
            y.height(),
            y.width(),
            array.height(),
            array.width()
        )));
    }
    let k = array.orientation_count();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let indices = array.indices();
    for c in 0..y.channels() {
        let plane = y.channel(c);
        for (p, &i) in indices.iter().enumerate() {
            sums[i as usize] += plane[p];
            counts[i as usize] += 1;
        }
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "orientation {class} has no pixels"
        )));
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| s / c as f64)
        .collect())
}

/// Grid step of the coarse phase search: 1 degree.
const GRID_STEP_DEG: usize = 180;

/// Specular means below `1e-6 · max(μ_k)` leave the phase unidentifiable.
const IDENTIFIABILITY_FLOOR: f64 = 1e-6;

/// Fits `(φ, μ_d, μ_s)` to the K orientation means by minimizing
/// `Σ_k (μ_k − μ_d − μ_s·cos²(φ−θ_k))²`.
///
/// A 1° grid over `[0, π)` with a linear sub-solve in `(μ_d, μ_s)` locates the
/// basin; Gauss–Newton refinement from the best grid point restores continuous
/// accuracy. Needs K ≥ 3; K = 3 is exactly determined and flagged.
pub fn estimate_phase(means: &[f64], orientations: &OrientationSet) -> Result<PhaseEstimate> {
    let k = means.len();
    if k != orientations.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} means for {} orientations",
            k,
            orientations.len()
        )));
    }
    if k < 3 {
        return Err(Error::InvalidArgument(format!(
            "phase estimation needs K >= 3 orientations, got {k}"
        )));
    }
    let thetas = orientations.angles();

    // Coarse grid with per-φ linear least squares for (μ_d, μ_s).
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for step in 0..GRID_STEP_DEG {
        let phi = step as f64 * PI / GRID_STEP_DEG as f64;
        if let Some((mu_d, mu_s, rss)) = linear_fit(means, thetas, phi) {
            if rss < best.0 {
                best = (rss, phi, mu_d, mu_s);
            }
        }
    }
    let (_, mut phi, mut mu_d, mut mu_s) = best;

    // Gauss–Newton on (φ, μ_d, μ_s).
    for _ in 0..60 {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (&mu, &theta) in means.iter().zip(thetas) {
            let c = (phi - theta).cos();
            let c2 = c * c;
            let r = mu - mu_d - mu_s * c2;
            // ∂model/∂φ = −μ_s·sin(2(φ−θ)); residual derivative flips the sign.
            let jp = mu_s * (2.0 * (phi - theta)).sin();
            let j = [jp, -1.0, -c2];
            for a in 0..3 {
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
                jtr[a] += j[a] * r;
            }
        }
        let Some(step) = solve3(&jtj, &[-jtr[0], -jtr[1], -jtr[2]]) else {
            break;
        };
        phi += step[0];
        mu_d += step[1];
        mu_s += step[2];
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-14 {
            break;
        }
    }

    // The model is invariant under (φ+π/2, μ_d+μ_s, −μ_s); normalize to μ_s ≥ 0.
    if mu_s < 0.0 {
        mu_d += mu_s;
        mu_s = -mu_s;
        phi += PI / 2.0;
    }
    phi = wrap_angle_pi(phi);

    let rss: f64 = means
        .iter()
        .zip(thetas)
        .map(|(&mu, &theta)| {
            let r = mu - mu_d - mu_s * (phi - theta).cos().powi(2);
            r * r
        })
        .sum();
    let residual = (rss / k as f64).sqrt();

    let scale = means.iter().cloned().fold(0.0, |a: f64, b| a.max(b.abs()));
    let identifiable = mu_s > IDENTIFIABILITY_FLOOR * scale;

    Ok(PhaseEstimate {
        phase: phi,
        mu_d,
        mu_s: mu_s.max(0.0),
        residual,
        identifiable,
        exactly_determined: k == 3,
    })
}

/// Least squares `(μ_d, μ_s)` for a fixed φ; returns the residual sum of squares.
fn linear_fit(means: &[f64], thetas: &[f64], phi: f64) -> Option<(f64, f64, f64)> {
    let k = means.len() as f64;
    let mut sc = 0.0;
    let mut scc = 0.0;
    let mut sm = 0.0;
    let mut smc = 0.0;
    for (&mu, &theta) in means.iter().zip(thetas) {
        let c2 = (phi - theta).cos().powi(2);
        sc += c2;
        scc += c2 * c2;
        sm += mu;
        smc += mu * c2;
    }
    let det = k * scc - sc * sc;
    if det.abs() < 1e-12 {
        return None;
    }
    let mu_d = (scc * sm - sc * smc) / det;
    let mu_s = (k * smc - sc * sm) / det;
    let rss = means
        .iter()
        .zip(thetas)
        .map(|(&mu, &theta)| {
            let r = mu - mu_d - mu_s * (phi - theta).cos().powi(2);
            r * r
        })
        .sum();
    Some((mu_d, mu_s, rss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::generate_orientations;

    fn synthetic_means(phi: f64, mu_d: f64, mu_s: f64, orientations: &OrientationSet) -> Vec<f64> {
        orientations
            .angles()
            .iter()
            .map(|&theta| mu_d + mu_s * (phi - theta).cos().powi(2))
            .collect()
    }

    #[test]
    fn recovers_exact_parameters() {
        let orientations = generate_orientations(8).unwrap();
        let means = synthetic_means(0.6, 0.4, 0.3, &orientations);
        let est = estimate_phase(&means, &orientations).unwrap();
        assert!((est.phase - 0.6).abs() < 1e-3, "phase {}", est.phase);
        assert!((est.mu_d - 0.4).abs() < 1e-4);
        assert!((est.mu_s - 0.3).abs() < 1e-4);
        assert!(est.residual < 1e-10);
        assert!(est.identifiable);
        assert!(!est.exactly_determined);
    }

    #[test]
    fn flat_means_are_unidentifiable() {
        let orientations = generate_orientations(8).unwrap();
        let means = vec![0.25; 8];
        let est = estimate_phase(&means, &orientations).unwrap();
        assert!(!est.identifiable);
    }

    #[test]
    fn aligned_orientation_has_largest_mean() {
        let orientations = generate_orientations(8).unwrap();
        let phi = orientations.angle(2);
        let means = synthetic_means(phi, 0.3, 0.4, &orientations);
        let argmax = means
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 2);
    }

    #[test]
    fn k3_is_flagged_exactly_determined() {
        let orientations = generate_orientations(3).unwrap();
        let means = synthetic_means(0.9, 0.2, 0.25, &orientations);
        let est = estimate_phase(&means, &orientations).unwrap();
        assert!(est.exactly_determined);
        assert!((est.phase - 0.9).abs() < 1e-3);
    }

    #[test]
    fn k2_rejected() {
        let orientations = generate_orientations(2).unwrap();
        assert!(estimate_phase(&[0.1, 0.2], &orientations).is_err());
    }

    #[test]
    fn orientation_means_constant_image() {
        let orientations = generate_orientations(4).unwrap();
        let array = crate::filter::FilterArray::new(
            2,
            2,
            vec![0, 1, 2, 3],
            orientations,
        )
        .unwrap();
        let img = Image::constant(2, 2, 1, 0.7).unwrap();
        let means = orientation_means(&img, &array).unwrap();
        for &m in &means {
            assert!((m - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn orientation_means_match_brute_force() {
        let spec = crate::patterns::PatternSpec {
            kind: crate::patterns::PatternKind::Random,
            k: 4,
            seed: 5,
            height: 8,
            width: 8,
        };
        let array = crate::patterns::generate_pattern(&spec).unwrap();
        let data: Vec<f64> = (0..64).map(|i| (i as f64 * 0.313) % 1.0).collect();
        let img = Image::from_data(8, 8, 1, data.clone()).unwrap();
        let means = orientation_means(&img, &array).unwrap();
        for class in 0..4 {
            let vals: Vec<f64> = (0..64)
                .filter(|&p| array.indices()[p] as usize == class)
                .map(|p| data[p])
                .collect();
            let expected = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((means[class] - expected).abs() < 1e-12);
        }
    }
}
