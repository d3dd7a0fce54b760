use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::{Check, ExperimentReport};
use crate::output::fmt_f64;
use crate::surface::{Point, Surface, SurfaceKind};
use crate::variation::{grazing_floor, OneBounce};

/// Tangent directions tried at every sampled point.
pub const DIRECTIONS_PER_POINT: usize = 8;

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let u = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..=1.0));
        let r = u.norm();
        if r > 1e-3 && r <= 1.0 {
            return u / r;
        }
    }
}

/// Whether the one-bounce form at `x` with reflection angle `phi` along the
/// tangent direction `t` is positive on every transversal direction and
/// negative on the longitudinal one.
fn sign_pattern(surface: &Surface, x: &Point, normal: &DVector<f64>, t: &DVector<f64>, phi: f64) -> Result<bool> {
    let (x1, _) = surface.intersect_ray(x, &(t * phi.cos() + normal * phi.sin()))?;
    let (x_prev, _) = surface.intersect_ray(x, &(t * -phi.cos() + normal * phi.sin()))?;
    let form = OneBounce::new(surface, &x_prev, x, &x1)?;
    let transversal = form.transversal_range().is_none_or(|(min, _)| min > 0.0);
    let longitudinal = form.longitudinal().is_none_or(|l| l < 0.0);
    Ok(transversal && longitudinal)
}

/// Index of the last grid angle `j h` such that the sign pattern holds at
/// every grid angle up to it, for one point and tangent direction.
fn last_passing_index(surface: &Surface, x: &Point, t: &DVector<f64>, angle_grid: usize) -> Result<usize> {
    let normal = surface.inward_normal(x)?;
    let h = FRAC_PI_2 / angle_grid as f64;
    for j in 1..=angle_grid {
        if !sign_pattern(surface, x, &normal, t, j as f64 * h)? {
            return Ok(j - 1);
        }
    }
    Ok(angle_grid)
}

fn point_directions(surface: &Surface, x: &Point, offset: f64) -> Result<Vec<DVector<f64>>> {
    let frame = surface.tangent_frame(x)?;
    if frame.rank() == 1 {
        let e = frame.vectors[0].clone();
        return Ok(vec![e.clone(), -e]);
    }
    Ok((0..DIRECTIONS_PER_POINT)
        .map(|k| {
            let theta = offset + 2.0 * PI * k as f64 / DIRECTIONS_PER_POINT as f64;
            &frame.vectors[0] * theta.cos() + &frame.vectors[1] * theta.sin()
        })
        .collect())
}

/// Scans reflection angles `j·(π/2)/angle_grid` at `point_samples` random
/// points, eight tangent directions each, and reports the largest grid angle
/// up to which the one-bounce form is positive transversally and negative
/// longitudinally everywhere.
pub fn angle_threshold_estimate(
    surface: &Surface,
    angle_grid: usize,
    point_samples: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    if angle_grid < 8 {
        return Err(Error::invalid("angle_grid", "must be at least 8"));
    }
    if point_samples < 1 {
        return Err(Error::invalid("point_samples", "must be at least 1"));
    }
    let d = surface.dimension();
    let h = FRAC_PI_2 / angle_grid as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<(DVector<f64>, f64)> = (0..point_samples)
        .map(|_| (random_direction(&mut rng, d), rng.gen_range(0.0..2.0 * PI)))
        .collect();

    let per_point: Vec<(Point, usize)> = seeds
        .par_iter()
        .map(|(u, offset)| {
            let x = surface.radial_point(u)?;
            let mut best = angle_grid;
            for t in point_directions(surface, &x, *offset)? {
                best = best.min(last_passing_index(surface, &x, &t, angle_grid)?);
            }
            Ok((x, best))
        })
        .collect::<Result<_>>()?;

    let index = per_point.iter().map(|(_, j)| *j).min().unwrap_or(0);
    let threshold = index as f64 * h;
    let floor = grazing_floor(surface, 512)?;

    let mut csv = String::from("point");
    for i in 1..=d {
        csv.push_str(&format!(",x{i}"));
    }
    csv.push_str(",threshold\n");
    for (i, (x, j)) in per_point.iter().enumerate() {
        csv.push_str(&i.to_string());
        for c in x.iter() {
            csv.push(',');
            csv.push_str(&fmt_f64(*c));
        }
        csv.push_str(&format!(",{}\n", fmt_f64(*j as f64 * h)));
    }

    let mut report = ExperimentReport::new("angle-threshold");
    report
        .parameter("surface", surface.to_json())
        .parameter("angle_grid", angle_grid as u64)
        .parameter("point_samples", point_samples as u64)
        .parameter("seed", seed)
        .result("threshold", threshold)
        .result("grid_step", h)
        .result("curvature_floor_angle", floor.asin());
    report.push(Check::greater_than("threshold positive", 0.0, threshold));
    if matches!(surface.kind(), SurfaceKind::Sphere { .. }) && d >= 3 {
        report.push(Check::close(
            "sphere threshold within one grid step of π/4",
            FRAC_PI_4,
            threshold,
            h * (1.0 + 1e-9),
        ));
    }
    report.attach_csv("angle_threshold_points.csv", csv);
    Ok(report)
}
