use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{dvector, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::experiments::{Check, ExperimentReport};
use crate::output::fmt_f64;
use crate::surface::Surface;
use crate::variation::{one_bounce_form, OneBounce};

/// Smallest sampled reflection angle.
const MIN_ANGLE: f64 = 0.05;

/// One-bounce segments through the endpoint `A = (a1, 0, 0)` of the shortest
/// axis of the ellipsoid `(a1, a2, a3)`. When `2 a1 a3 < a2²` every
/// transversal direction at `A` is positive, so no segment through `A` can be
/// maximizing.
pub fn ellipsoid_flat_point_check(a1: f64, a2: f64, a3: f64, samples: usize, seed: u64) -> Result<ExperimentReport> {
    if !(a1 > 0.0 && a1 <= a2 && a2 <= a3) {
        return Err(Error::invalid(
            "semi_axes",
            format!("need 0 < a1 <= a2 <= a3, got ({a1}, {a2}, {a3})"),
        ));
    }
    if !(2.0 * a1 * a3 < a2 * a2) {
        return Err(Error::invalid(
            "semi_axes",
            format!("2 a1 a3 = {} is not below a2² = {}", 2.0 * a1 * a3, a2 * a2),
        ));
    }
    if samples == 0 {
        return Err(Error::invalid("samples", "must be at least 1"));
    }
    let s = Surface::ellipsoid(&[a1, a2, a3])?;
    let a: DVector<f64> = dvector![a1, 0.0, 0.0];
    let n = s.inward_normal(&a)?;
    let curvatures = s.principal_curvatures(&a)?;
    let k_max = curvatures[curvatures.len() - 1];
    let diameter = s.diameter_bound();
    let bound = 2.0 / diameter - 2.0 * k_max;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    let mut min_margin = f64::INFINITY;
    let mut formula_gap: f64 = 0.0;
    let mut semidefinite = 0usize;
    let mut csv = String::from("sample,phi,theta,transversal,bound,longitudinal\n");
    for i in 0..samples {
        let phi = rng.gen_range(MIN_ANGLE..=FRAC_PI_2);
        let theta = rng.gen_range(0.0..2.0 * PI);
        let t = dvector![0.0, theta.cos(), theta.sin()];
        let xi = dvector![0.0, -theta.sin(), theta.cos()];
        let (x1, _) = s.intersect_ray(&a, &(&t * phi.cos() + &n * phi.sin()))?;
        let (x_prev, _) = s.intersect_ray(&a, &(&t * -phi.cos() + &n * phi.sin()))?;

        let value = one_bounce_form(&s, &x_prev, &a, &x1, &xi)?;
        let matrix = OneBounce::new(&s, &x_prev, &a, &x1)?;
        formula_gap = formula_gap.max((matrix.value(&xi) - value).abs());
        let local_bound = 2.0 / diameter - 2.0 * k_max * matrix.v0_hat;
        min_value = min_value.min(value);
        min_margin = min_margin.min(value - local_bound);
        if crate::variation::definiteness(&matrix.matrix, 0.0)
            .classification
            .is_maximizing()
        {
            semidefinite += 1;
        }
        let long = matrix.longitudinal().unwrap_or(f64::NAN);
        csv.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            fmt_f64(phi),
            fmt_f64(theta),
            fmt_f64(value),
            fmt_f64(local_bound),
            fmt_f64(long)
        ));
    }

    let mut report = ExperimentReport::new("ellipsoid-flat");
    report
        .parameter("a1", a1)
        .parameter("a2", a2)
        .parameter("a3", a3)
        .parameter("samples", samples as u64)
        .parameter("seed", seed)
        .result("k_max", k_max)
        .result("diameter", diameter)
        .result("bound", bound)
        .result("min_transversal", min_value);
    report
        .push(Check::close(
            "curvature a1/a2² at A",
            a1 / (a2 * a2),
            curvatures[curvatures.len() - 1],
            1e-10,
        ))
        .push(Check::close(
            "curvature a1/a3² at A",
            a1 / (a3 * a3),
            curvatures[0],
            1e-10,
        ))
        .push(Check::less_than("k_max · D below 1", 1.0, k_max * diameter))
        .push(Check::at_most(
            "one-bounce formula matches the operator matrix",
            0.0,
            formula_gap,
            1e-10,
        ))
        .push(Check::at_least(
            "transversal value ≥ 2/D − 2 k_max sin φ₀ on every sample",
            0.0,
            min_margin,
            1e-12,
        ))
        .push(Check::at_least(
            "minimum transversal value ≥ 2/D − 2 k_max",
            bound,
            min_value,
            0.0,
        ))
        .push(Check::greater_than(
            "minimum transversal value positive",
            0.0,
            min_value,
        ))
        .push(Check::close(
            "segments with negative semidefinite one-bounce form",
            0.0,
            semidefinite as f64,
            0.0,
        ));
    report.attach_csv("ellipsoid_flat_samples.csv", csv);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_triple_passes() {
        let r = ellipsoid_flat_point_check(0.3, 1.0, 1.2, 50, 42).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let bound = r.results["bound"].as_f64().unwrap();
        assert!((bound - (2.0 / 2.4 - 0.6)).abs() < 1e-12);
    }

    #[test]
    fn sphere_is_rejected() {
        let err = ellipsoid_flat_point_check(1.0, 1.0, 1.0, 10, 42).unwrap_err();
        assert!(err.to_string().contains("semi_axes"));
        assert!(ellipsoid_flat_point_check(1.0, 0.5, 1.2, 10, 42).is_err());
    }

    #[test]
    fn same_seed_same_report() {
        let a = ellipsoid_flat_point_check(0.3, 1.0, 1.2, 20, 7).unwrap();
        let b = ellipsoid_flat_point_check(0.3, 1.0, 1.2, 20, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
