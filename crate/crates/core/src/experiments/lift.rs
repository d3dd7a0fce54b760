use std::f64::consts::PI;

use nalgebra::{dvector, DVector};
use serde::Serialize;

use crate::dynamics::{orbit, OrbitSegment, PhasePoint};
use crate::error::{Error, Result};
use crate::experiments::{Check, ExperimentReport, CURVATURE_GRID};
use crate::output::fmt_f64;
use crate::surface::Surface;
use crate::variation::{assemble_form, default_tolerance, definiteness, Classification};

/// Caustic parameter of the tangency point used to start the orbit.
const TANGENCY_PARAMETER: f64 = 0.3;

/// Sampled constants of the scalar dominance test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureBounds {
    /// Largest curvature of the planar section.
    pub k1: f64,
    /// Smallest normal curvature orthogonal to the plane along the section.
    pub k2: f64,
    /// Smallest `sin φ` along the orbit.
    pub c1: f64,
}

impl CurvatureBounds {
    /// `K1/C1 - 2 K2`, an upper bound for the transverse diagonal entries.
    pub fn a(&self) -> f64 {
        self.k1 / self.c1 - 2.0 * self.k2
    }

    /// `K1/(2 C1)`, an upper bound for the transverse off-diagonal entries.
    pub fn b(&self) -> f64 {
        self.k1 / (2.0 * self.c1)
    }

    pub fn dominance(&self) -> bool {
        let a = self.a();
        a < 0.0 && -a > 2.0 * self.b()
    }
}

fn validate(a: f64, b: f64, c: f64, lambda: f64, n_bounces: usize) -> Result<()> {
    for (name, v) in [("A", a), ("B", b), ("C", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, format!("semi-axis {v} must be positive")));
        }
    }
    let limit = (a * a).min(b * b);
    if !(lambda > 0.0 && lambda < limit) {
        return Err(Error::invalid(
            "caustic_parameter",
            format!("{lambda} is not in (0, {limit})"),
        ));
    }
    if n_bounces < 2 {
        return Err(Error::invalid("n_bounces", "must be at least 2"));
    }
    Ok(())
}

/// The equatorial orbit of the ellipsoid `(a, b, c)` whose chords are tangent
/// to the confocal caustic `x²/(a²-λ) + y²/(b²-λ) = 1`.
pub fn caustic_orbit(a: f64, b: f64, c: f64, lambda: f64, n_bounces: usize) -> Result<(Surface, OrbitSegment)> {
    validate(a, b, c, lambda, n_bounces)?;
    let s = Surface::ellipsoid(&[a, b, c])?;
    let (ca, cb) = ((a * a - lambda).sqrt(), (b * b - lambda).sqrt());
    let t0 = TANGENCY_PARAMETER;
    let (px, py) = (ca * t0.cos(), cb * t0.sin());
    let (dx, dy) = (-ca * t0.sin(), cb * t0.cos());
    let norm = dx.hypot(dy);
    let (dx, dy) = (dx / norm, dy / norm);
    // back along the tangent line to the ellipse
    let qa = dx * dx / (a * a) + dy * dy / (b * b);
    let qb = 2.0 * (px * dx / (a * a) + py * dy / (b * b));
    let qc = px * px / (a * a) + py * py / (b * b) - 1.0;
    let s_back = (-qb - (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
    let x0 = dvector![px + s_back * dx, py + s_back * dy, 0.0];
    let p = PhasePoint::from_direction(&s, x0, &dvector![dx, dy, 0.0])?;
    let seg = orbit(&s, &p, n_bounces)?;
    Ok((s, seg))
}

/// Relative discriminant of the chord line against the caustic; zero for tangency.
fn tangency_defect(p: &DVector<f64>, u: &DVector<f64>, ca: f64, cb: f64) -> f64 {
    let qa = u[0] * u[0] / (ca * ca) + u[1] * u[1] / (cb * cb);
    let qb = 2.0 * (p[0] * u[0] / (ca * ca) + p[1] * u[1] / (cb * cb));
    let qc = p[0] * p[0] / (ca * ca) + p[1] * p[1] / (cb * cb) - 1.0;
    (qb * qb - 4.0 * qa * qc).abs() / (qb * qb + (4.0 * qa * qc).abs())
}

/// `K1`, `K2` on a grid of the equator and `C1` along `segment`.
pub fn curvature_bounds(
    surface: &Surface,
    a: f64,
    b: f64,
    segment: &OrbitSegment,
    grid: usize,
) -> Result<CurvatureBounds> {
    let mut k1: f64 = 0.0;
    let mut k2 = f64::INFINITY;
    let e3 = dvector![0.0, 0.0, 1.0];
    for i in 0..grid {
        let theta = 2.0 * PI * i as f64 / grid as f64;
        let x = dvector![a * theta.cos(), b * theta.sin(), 0.0];
        let n = surface.inward_normal(&x)?;
        let planar = dvector![-n[1], n[0], 0.0];
        k1 = k1.max(surface.second_fundamental_form(&x, &planar)?);
        k2 = k2.min(surface.second_fundamental_form(&x, &e3)?);
    }
    let c1 = segment.phases.iter().map(|p| p.v_hat).fold(f64::INFINITY, f64::min);
    Ok(CurvatureBounds { k1, k2, c1 })
}

/// Lifts a planar caustic orbit of the ellipse `(a, b)` to the equator of the
/// ellipsoid `(a, b, c)` and splits its second variation into the planar and
/// transverse line fields.
pub fn symmetric_lift_check(a: f64, b: f64, c: f64, lambda: f64, n_bounces: usize) -> Result<ExperimentReport> {
    let (s, seg) = caustic_orbit(a, b, c, lambda, n_bounces)?;
    let form = assemble_form(&s, &seg)?;
    let m = form.interior_count();
    let e3 = dvector![0.0, 0.0, 1.0];
    let planar: Vec<DVector<f64>> = seg.points[1..=m]
        .iter()
        .map(|x| s.inward_normal(x).map(|n| dvector![-n[1], n[0], 0.0]))
        .collect::<Result<_>>()?;
    let transverse = vec![e3; m];
    let q_planar = form.restrict(&planar);
    let q_transverse = form.restrict(&transverse);
    let mixed = form.restrict_pair(&planar, &transverse).amax();

    let planar_class = definiteness(&q_planar, default_tolerance(&q_planar)).classification;
    let transverse_class = definiteness(&q_transverse, default_tolerance(&q_transverse)).classification;
    let full = form.definiteness(form.default_tolerance());
    let bounds = curvature_bounds(&s, a, b, &seg, CURVATURE_GRID)?;

    let height = seg.points.iter().map(|x| x[2].abs()).fold(0.0, f64::max);
    let (ca, cb) = ((a * a - lambda).sqrt(), (b * b - lambda).sqrt());
    let tangency = seg
        .chords
        .iter()
        .map(|ch| tangency_defect(&ch.x, &ch.direction(), ca, cb))
        .fold(0.0, f64::max);
    // Blaschke-type chord bound L > 2 sin φ / K1 along the planar section
    let chord_margin = seg
        .chords
        .iter()
        .map(|ch| ch.length - 2.0 * ch.v_hat / bounds.k1)
        .fold(f64::INFINITY, f64::min);
    let diagonal: Vec<f64> = (0..m).map(|i| q_transverse[(i, i)]).collect();
    let min_diagonal = diagonal.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut csv = String::from("vertex,a_n,b_n,sin_phi\n");
    for i in 0..m {
        let off = if i + 1 < m {
            fmt_f64(q_transverse[(i, i + 1)])
        } else {
            String::new()
        };
        csv.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            fmt_f64(diagonal[i]),
            off,
            fmt_f64(seg.phases[i + 1].v_hat)
        ));
    }

    let mut report = ExperimentReport::new("symmetric-lift");
    report
        .parameter("A", a)
        .parameter("B", b)
        .parameter("C", c)
        .parameter("caustic_parameter", lambda)
        .parameter("n_bounces", n_bounces as u64)
        .result("curvature_bounds", serde_json::to_value(bounds).expect("plain struct"))
        .result("a", bounds.a())
        .result("b", bounds.b())
        .result("dominance", bounds.dominance())
        .result("planar_classification", planar_class.as_str())
        .result("transverse_classification", transverse_class.as_str())
        .result("classification", full.classification.as_str())
        .result("max_eigenvalue", full.max_eigenvalue())
        .result("min_transverse_diagonal", min_diagonal);
    report
        .push(Check::at_most("orbit stays on the equator", 0.0, height, 1e-12))
        .push(Check::at_most("chords tangent to the caustic", 0.0, tangency, 1e-8))
        .push(Check::at_most(
            "mixed planar/transverse block vanishes",
            0.0,
            mixed,
            1e-8,
        ))
        .push(Check::holds(
            "planar block negative definite",
            planar_class == Classification::NegativeDefinite,
        ))
        .push(Check::greater_than(
            "chord length exceeds 2 sin φ / K1",
            0.0,
            chord_margin,
        ));
    if bounds.dominance() {
        report
            .push(Check::holds(
                "transverse block negative definite under dominance",
                transverse_class == Classification::NegativeDefinite,
            ))
            .push(Check::holds(
                "full form negative definite",
                full.classification == Classification::NegativeDefinite,
            ));
    } else if min_diagonal > 0.0 {
        report.push(Check::holds(
            "full form not negative semidefinite",
            !full.classification.is_maximizing(),
        ));
    }
    report.attach_csv("symmetric_lift_orbit.csv", seg.to_csv_string());
    report.attach_csv("symmetric_lift_transverse.csv", csv);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_is_tangent_to_caustic() {
        let (_, seg) = caustic_orbit(1.5, 1.0, 0.2, 0.5, 10).unwrap();
        let (ca, cb) = (1.75f64.sqrt(), 0.5f64.sqrt());
        for ch in &seg.chords {
            assert!(tangency_defect(&ch.x, &ch.direction(), ca, cb) < 1e-8);
        }
    }

    #[test]
    fn bounds_at_example_axes() {
        let (s, seg) = caustic_orbit(1.5, 1.0, 0.2, 0.5, 10).unwrap();
        let k = curvature_bounds(&s, 1.5, 1.0, &seg, 512).unwrap();
        // ellipse curvature peaks at (A, 0): A/B²; transverse curvature is smallest at (0, B): B/C²
        assert!((k.k1 - 1.5).abs() < 1e-10);
        assert!((k.k2 - 25.0).abs() < 1e-8);
        assert!(k.dominance());
    }

    #[test]
    fn rejects_bad_caustic() {
        let err = symmetric_lift_check(1.5, 1.0, 0.2, 1.0, 10).unwrap_err();
        assert!(err.to_string().contains("caustic_parameter"));
        assert!(symmetric_lift_check(1.5, 1.0, 0.2, 0.0, 10).is_err());
    }
}
