//! Polar sampling of the maximizing sets `M_{x,n} ⊂ B*_x Σ`.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::surface::{Point, Surface};
use crate::variation::form::{default_tolerance, definiteness, Classification};
use crate::variation::jacobi::form_at_speed;

/// One grid point of the polar sample.
#[derive(Clone, Debug)]
pub struct MaximizerSample {
    pub direction: usize,
    pub radial: usize,
    /// `|v|`.
    pub speed: f64,
    pub v_hat: f64,
    /// `None` when the orbit could not be computed (near-tangent ray).
    pub classification: Option<Classification>,
    pub max_eigenvalue: f64,
    /// Smallest `sin φ_k` over the interior vertices of the segment.
    pub min_interior_sin: f64,
}

impl MaximizerSample {
    pub fn is_maximizing(&self) -> Option<bool> {
        self.classification.map(Classification::is_maximizing)
    }

    pub fn is_negative_definite(&self) -> Option<bool> {
        self.classification.map(|c| c == Classification::NegativeDefinite)
    }
}

#[derive(Clone, Debug)]
pub struct MaximizerSetSample {
    pub x: Point,
    pub n: usize,
    /// Unit tangent directions at `x`.
    pub directions: Vec<DVector<f64>>,
    /// Radial grid of `|v|` values.
    pub speeds: Vec<f64>,
    /// Row-major in (direction, radial).
    pub samples: Vec<MaximizerSample>,
    /// `(direction, |v|)` midpoints where membership in `M_{x,n}` changes.
    pub boundary_points: Vec<(usize, f64)>,
    /// Lower bound for `sin φ` at interior vertices of maximizing segments.
    pub grazing_floor: f64,
    /// Indices of maximizing samples with an interior vertex below the floor.
    pub grazing_violations: Vec<usize>,
}

/// Nesting comparison between the samples at lengths `n` and `n + 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NestingCheck {
    pub compared: usize,
    /// Grid points in `M_{x,n+1}` but not in `M_{x,n}`.
    pub inclusion_violations: Vec<usize>,
    /// Grid points in `M'_{x,n+1}` (negative definite) but not in `M_{x,n}`.
    pub definite_violations: Vec<usize>,
}

impl NestingCheck {
    pub fn is_clean(&self) -> bool {
        self.inclusion_violations.is_empty() && self.definite_violations.is_empty()
    }
}

impl MaximizerSetSample {
    pub fn sample(&self, direction: usize, radial: usize) -> &MaximizerSample {
        &self.samples[direction * self.speeds.len() + radial]
    }

    pub fn unresolved(&self) -> usize {
        self.samples.iter().filter(|s| s.classification.is_none()).count()
    }

    /// Smallest grid `v̂` among maximizing samples.
    pub fn min_maximizing_v_hat(&self) -> Option<f64> {
        self.samples
            .iter()
            .filter(|s| s.is_maximizing() == Some(true))
            .map(|s| s.v_hat)
            .min_by(f64::total_cmp)
    }

    /// Compares against the sample of length `n + 1` on the same grid.
    pub fn nesting(&self, longer: &MaximizerSetSample) -> Result<NestingCheck> {
        if longer.n != self.n + 1
            || longer.speeds != self.speeds
            || longer.directions != self.directions
            || longer.x != self.x
        {
            return Err(Error::invalid(
                "nesting",
                "samples must share the grid and have lengths n and n + 1",
            ));
        }
        let mut check = NestingCheck::default();
        for (i, (short, long)) in self.samples.iter().zip(&longer.samples).enumerate() {
            let (Some(in_short), Some(in_long), Some(definite_long)) =
                (short.is_maximizing(), long.is_maximizing(), long.is_negative_definite())
            else {
                continue;
            };
            check.compared += 1;
            if in_long && !in_short {
                check.inclusion_violations.push(i);
            }
            if definite_long && !in_short {
                check.definite_violations.push(i);
            }
        }
        Ok(check)
    }
}

/// `sqrt(k_min / (2 K_max))`: below this `sin φ` the transversal one-bounce
/// value `k_min/sin φ - 2 K_max sin φ` is positive, so no interior vertex of a
/// maximizing segment can be that close to grazing. Planar billiards have no
/// transversal directions and get a zero floor.
///
/// Curvature extremes are exact for spheres and ellipsoids and sampled
/// (`samples` radial points) otherwise.
pub fn grazing_floor(surface: &Surface, samples: usize) -> Result<f64> {
    if surface.dimension() < 3 {
        return Ok(0.0);
    }
    let (k_min, k_max) = match surface.curvature_extremes() {
        Some(extremes) => extremes,
        None => sampled_curvature_extremes(surface, samples)?,
    };
    Ok((k_min / (2.0 * k_max)).sqrt())
}

fn sampled_curvature_extremes(surface: &Surface, samples: usize) -> Result<(f64, f64)> {
    let d = surface.dimension();
    let mut k_min = f64::INFINITY;
    let mut k_max: f64 = 0.0;
    // golden-angle spiral over the first two coordinates, cycled through the rest
    let golden = PI * (3.0 - 5f64.sqrt());
    for i in 0..samples.max(1) {
        let t = (i as f64 + 0.5) / samples.max(1) as f64;
        let mut u = DVector::zeros(d);
        let z = 1.0 - 2.0 * t;
        let r = (1.0 - z * z).sqrt();
        let theta = golden * i as f64;
        u[0] = r * theta.cos();
        u[1] = r * theta.sin();
        u[2 + i % (d - 2)] = z;
        let x = surface.radial_point(&u)?;
        let k = surface.principal_curvatures(&x)?;
        k_min = k_min.min(k[0]);
        k_max = k_max.max(k[k.len() - 1]);
    }
    Ok((k_min, k_max))
}

/// Tangent directions for the polar grid: evenly spaced in the plane of the
/// first two frame vectors, or `±e` for planar billiards.
fn grid_directions(surface: &Surface, x: &Point, count: usize) -> Result<Vec<DVector<f64>>> {
    let frame = surface.tangent_frame(x)?;
    if frame.rank() == 1 {
        let e = frame.vectors[0].clone();
        return Ok(vec![e.clone(), -e].into_iter().take(count).collect());
    }
    Ok((0..count)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / count as f64;
            &frame.vectors[0] * theta.cos() + &frame.vectors[1] * theta.sin()
        })
        .collect())
}

/// Classifies `δ²Φ_{1,n}` on the polar grid `directions × {i / radial_grid}`
/// of `B*_x Σ`, with the grazing floor of [`grazing_floor`].
pub fn maximizer_set_sample(
    surface: &Surface,
    x: &Point,
    n: usize,
    directions: usize,
    radial_grid: usize,
) -> Result<MaximizerSetSample> {
    let floor = grazing_floor(surface, 512)?;
    maximizer_set_sample_with_floor(surface, x, n, directions, radial_grid, floor)
}

pub fn maximizer_set_sample_with_floor(
    surface: &Surface,
    x: &Point,
    n: usize,
    directions: usize,
    radial_grid: usize,
    grazing_floor: f64,
) -> Result<MaximizerSetSample> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if directions < 2 || radial_grid < 2 {
        return Err(Error::invalid("grid", "directions and radial_grid must be at least 2"));
    }
    let dirs = grid_directions(surface, x, directions)?;
    let speeds: Vec<f64> = (0..radial_grid).map(|i| i as f64 / radial_grid as f64).collect();
    let grid: Vec<(usize, usize)> = (0..dirs.len())
        .flat_map(|j| (0..speeds.len()).map(move |i| (j, i)))
        .collect();

    let samples: Vec<MaximizerSample> = grid
        .par_iter()
        .map(|&(j, i)| {
            let speed = speeds[i];
            let v_hat = (1.0 - speed * speed).sqrt();
            match form_at_speed(surface, x, &dirs[j], n, speed) {
                Ok(form) => {
                    let report = definiteness(&form.matrix, default_tolerance(&form.matrix));
                    let min_interior_sin = form.segment.phases[1..=n]
                        .iter()
                        .map(|p| p.v_hat)
                        .fold(f64::INFINITY, f64::min);
                    MaximizerSample {
                        direction: j,
                        radial: i,
                        speed,
                        v_hat,
                        classification: Some(report.classification),
                        max_eigenvalue: report.max_eigenvalue(),
                        min_interior_sin,
                    }
                }
                Err(_) => MaximizerSample {
                    direction: j,
                    radial: i,
                    speed,
                    v_hat,
                    classification: None,
                    max_eigenvalue: f64::NAN,
                    min_interior_sin: f64::NAN,
                },
            }
        })
        .collect();

    let mut boundary_points = Vec::new();
    for j in 0..dirs.len() {
        let row = &samples[j * speeds.len()..(j + 1) * speeds.len()];
        for pair in row.windows(2) {
            if let (Some(a), Some(b)) = (pair[0].is_maximizing(), pair[1].is_maximizing()) {
                if a != b {
                    boundary_points.push((j, 0.5 * (pair[0].speed + pair[1].speed)));
                }
            }
        }
    }
    let grazing_violations = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_maximizing() == Some(true) && s.min_interior_sin < grazing_floor)
        .map(|(i, _)| i)
        .collect();

    Ok(MaximizerSetSample {
        x: x.clone(),
        n,
        directions: dirs,
        speeds,
        samples,
        boundary_points,
        grazing_floor,
        grazing_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn sphere_floor_is_forty_five_degrees() {
        let f = grazing_floor(&Surface::unit_sphere(3), 0).unwrap();
        assert!((f - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(grazing_floor(&Surface::unit_sphere(2), 0).unwrap(), 0.0);
    }

    #[test]
    fn sphere_single_bounce_set_is_a_disc() {
        let s = Surface::unit_sphere(3);
        let x = dvector![0.0, 0.0, 1.0];
        let m = maximizer_set_sample(&s, &x, 1, 4, 40).unwrap();
        for sample in &m.samples {
            // maximizing iff α ≥ π/4 iff |v| ≤ √2/2
            let expected = sample.speed <= 0.5f64.sqrt();
            assert_eq!(sample.is_maximizing(), Some(expected), "speed {}", sample.speed);
        }
        assert_eq!(m.boundary_points.len(), 4);
        assert!(m.grazing_violations.is_empty());
    }

    #[test]
    fn rejects_small_grids() {
        let s = Surface::unit_sphere(3);
        let x = dvector![0.0, 0.0, 1.0];
        assert!(maximizer_set_sample(&s, &x, 1, 1, 10).is_err());
        assert!(maximizer_set_sample(&s, &x, 0, 4, 10).is_err());
    }
}
