//! The billiard ball map on the unit-ball tangent bundle and orbit segments.
//!
//! A [`PhasePoint`] stores the *outgoing* projected velocity at a collision
//! point; [`billiard_step`] consumes and produces this convention. The chord
//! record keeps the pre-reflection tangent `w = π_y((y - x)/L)`, which the
//! reflection law makes equal to the next outgoing tangent.

use std::io::{self, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::output::fmt_f64;
use crate::surface::{Point, Surface, TangentFrame};

/// Steps with `sin φ` below this are refused as grazing.
pub const GRAZING_SIN_FLOOR: f64 = 1e-6;

/// Chords shorter than this are degenerate.
pub const MIN_CHORD_LENGTH: f64 = 1e-9;

/// Tolerance on the reflection law when validating a segment.
pub const REFLECTION_TOLERANCE: f64 = 1e-10;

/// A point of `B*Σ`: base point, tangent velocity `v` with `|v| < 1`, and `v̂ = sin φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: Point,
    pub v: DVector<f64>,
    pub v_hat: f64,
}

impl PhasePoint {
    /// Phase point from a tangent velocity of norm below one.
    pub fn new(surface: &Surface, x: Point, v: DVector<f64>) -> Result<Self> {
        let n = surface.inward_normal(&x)?;
        if v.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: v.len(),
            });
        }
        if v.dot(&n).abs() > 1e-10 {
            return Err(Error::invalid("v", "velocity is not tangent to the surface"));
        }
        let speed2 = v.norm_squared();
        if speed2 >= 1.0 {
            return Err(Error::invalid("v", format!("|v| = {} is not below 1", speed2.sqrt())));
        }
        Ok(Self {
            x,
            v,
            v_hat: (1.0 - speed2).sqrt(),
        })
    }

    /// Phase point of the inward direction `z` (normalized internally).
    pub fn from_direction(surface: &Surface, x: Point, z: &DVector<f64>) -> Result<Self> {
        let norm = z.norm();
        if !(norm > 0.0) {
            return Err(Error::invalid("direction", "must be nonzero"));
        }
        let (v, v_hat) = surface.project_tangent(&x, &(z / norm))?;
        Ok(Self { x, v, v_hat })
    }

    /// Phase point leaving `x` at reflection angle `phi` (from the tangent
    /// plane) in the tangential direction of `direction`.
    pub fn from_angle(surface: &Surface, x: Point, direction: &DVector<f64>, phi: f64) -> Result<Self> {
        if !(phi > 0.0 && phi <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid("angle", format!("must lie in (0, pi/2], got {phi}")));
        }
        let t = unit_tangent(surface, &x, direction)?;
        Ok(Self {
            x,
            v: t * phi.cos(),
            v_hat: phi.sin(),
        })
    }

    /// Phase point at `x` with `|v| = speed` along a tangential direction.
    pub fn from_speed(surface: &Surface, x: Point, direction: &DVector<f64>, speed: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&speed) {
            return Err(Error::invalid("speed", format!("|v| must lie in [0, 1), got {speed}")));
        }
        let t = unit_tangent(surface, &x, direction)?;
        Ok(Self {
            x,
            v: t * speed,
            v_hat: (1.0 - speed * speed).sqrt(),
        })
    }

    /// Reflection angle `φ ∈ (0, π/2]`.
    pub fn angle(&self) -> f64 {
        self.v_hat.atan2(self.v.norm())
    }

    /// The inward unit direction `z = v + v̂ n_x`.
    pub fn direction(&self, surface: &Surface) -> Result<DVector<f64>> {
        let n = surface.inward_normal(&self.x)?;
        Ok(&self.v + n * self.v_hat)
    }
}

/// Projects `direction` onto `T_x Σ` and normalizes it.
pub fn unit_tangent(surface: &Surface, x: &DVector<f64>, direction: &DVector<f64>) -> Result<DVector<f64>> {
    let n = surface.inward_normal(x)?;
    if direction.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: direction.len(),
        });
    }
    let t = direction - &n * direction.dot(&n);
    let norm = t.norm();
    if !(norm > 1e-12) {
        return Err(Error::invalid("direction", "has no tangential component"));
    }
    Ok(t / norm)
}

/// One chord `x → y` with the tangential data entering the generating-function identities.
#[derive(Clone, Debug, PartialEq)]
pub struct ChordData {
    pub x: Point,
    pub y: Point,
    pub length: f64,
    /// `π_x((y - x)/L)`, the outgoing tangent at `x`.
    pub v: DVector<f64>,
    /// `π_y((y - x)/L)`, the incoming tangent at `y` (before reflection).
    pub w: DVector<f64>,
    pub v_hat: f64,
    pub w_hat: f64,
}

impl ChordData {
    pub fn between(surface: &Surface, x: &Point, y: &Point) -> Result<Self> {
        let d = y - x;
        let length = d.norm();
        if !(length >= MIN_CHORD_LENGTH) {
            return Err(Error::DegenerateChord { length });
        }
        let u = d / length;
        let nx = surface.inward_normal(x)?;
        let ny = surface.inward_normal(y)?;
        let v_hat = u.dot(&nx);
        let w_hat = -u.dot(&ny);
        Ok(Self {
            x: x.clone(),
            y: y.clone(),
            length,
            v: &u - nx * v_hat,
            w: &u - ny * (-w_hat),
            v_hat,
            w_hat,
        })
    }

    /// Unit direction of travel `(y - x)/L`.
    pub fn direction(&self) -> DVector<f64> {
        (&self.y - &self.x) / self.length
    }
}

/// Elastic reflection at `y` of a direction of travel arriving at `y`.
pub fn reflect(surface: &Surface, y: &Point, incoming: &DVector<f64>) -> Result<DVector<f64>> {
    let n = surface.inward_normal(y)?;
    let norm = incoming.norm();
    if !(norm > 0.0) {
        return Err(Error::invalid("incoming", "must be nonzero"));
    }
    let u = incoming / norm;
    let c = u.dot(&n);
    if c.abs() < 1e-12 {
        return Err(Error::TangentIncidence { normal_component: c });
    }
    if c > 0.0 {
        return Err(Error::invalid("incoming", "direction is not arriving at the surface"));
    }
    Ok(&u - n * (2.0 * c))
}

/// One application of the billiard ball map `T: (x, v) ↦ (y, w)`.
pub fn billiard_step(surface: &Surface, p: &PhasePoint) -> Result<(PhasePoint, ChordData)> {
    if p.v_hat < GRAZING_SIN_FLOOR {
        return Err(Error::NearTangentRay { sin_phi: p.v_hat });
    }
    let z = p.direction(surface)?;
    let z = &z / z.norm();
    let (y, _) = surface.intersect_ray(&p.x, &z)?;
    let chord = ChordData::between(surface, &p.x, &y)?;
    let outgoing = reflect(surface, &y, &chord.direction())?;
    let (w, w_hat) = surface.project_tangent(&y, &outgoing)?;
    Ok((
        PhasePoint {
            x: y,
            v: w,
            v_hat: w_hat,
        },
        chord,
    ))
}

/// A finite piece of billiard trajectory `x_0, …, x_m` with per-vertex data.
#[derive(Clone, Debug)]
pub struct OrbitSegment {
    pub points: Vec<Point>,
    pub chords: Vec<ChordData>,
    pub frames: Vec<TangentFrame>,
    /// Reflection angle `φ_k` at each point.
    pub angles: Vec<f64>,
    /// Outgoing phase point at each point.
    pub phases: Vec<PhasePoint>,
}

/// Iterates the billiard map `n_bounces` times from `p`.
pub fn orbit(surface: &Surface, p: &PhasePoint, n_bounces: usize) -> Result<OrbitSegment> {
    if n_bounces == 0 {
        return Err(Error::invalid("n", "at least one bounce is required"));
    }
    let mut phases = Vec::with_capacity(n_bounces + 1);
    let mut chords = Vec::with_capacity(n_bounces);
    phases.push(p.clone());
    for i in 0..n_bounces {
        let (q, chord) = billiard_step(surface, &phases[i]).map_err(|e| e.at_bounce(i))?;
        phases.push(q);
        chords.push(chord);
    }
    let points: Vec<Point> = phases.iter().map(|q| q.x.clone()).collect();
    let frames = points
        .iter()
        .enumerate()
        .map(|(i, x)| surface.tangent_frame(x).map_err(|e| e.at_bounce(i)))
        .collect::<Result<Vec<_>>>()?;
    let angles = phases.iter().map(PhasePoint::angle).collect();
    Ok(OrbitSegment {
        points,
        chords,
        frames,
        angles,
        phases,
    })
}

impl OrbitSegment {
    /// Builds a segment from an explicit sequence of surface points. The
    /// reflection law is not enforced; see [`OrbitSegment::reflection_defect`].
    pub fn from_points(surface: &Surface, points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("points", "a segment needs at least two points"));
        }
        let chords = points
            .windows(2)
            .enumerate()
            .map(|(i, w)| ChordData::between(surface, &w[0], &w[1]).map_err(|e| e.at_bounce(i)))
            .collect::<Result<Vec<_>>>()?;
        let frames = points
            .iter()
            .map(|x| surface.tangent_frame(x))
            .collect::<Result<Vec<_>>>()?;
        let mut phases: Vec<PhasePoint> = chords
            .iter()
            .map(|c| PhasePoint {
                x: c.x.clone(),
                v: c.v.clone(),
                v_hat: c.v_hat,
            })
            .collect();
        let last = chords.last().expect("at least one chord");
        phases.push(PhasePoint {
            x: last.y.clone(),
            v: last.w.clone(),
            v_hat: last.w_hat,
        });
        let angles = phases.iter().map(PhasePoint::angle).collect();
        Ok(Self {
            points,
            chords,
            frames,
            angles,
            phases,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of interior vertices `x_1 … x_{m-1}`.
    pub fn interior_count(&self) -> usize {
        self.points.len().saturating_sub(2)
    }

    pub fn dimension(&self) -> usize {
        self.points[0].len()
    }

    /// Reflection-law defect at interior vertex `k`: mismatch of the
    /// tangential parts plus failure of the normal parts to flip sign.
    pub fn reflection_defect(&self, surface: &Surface, k: usize) -> Result<f64> {
        if k == 0 || k + 1 >= self.points.len() {
            return Err(Error::invalid("vertex", format!("{k} is not an interior vertex")));
        }
        let n = surface.inward_normal(&self.points[k])?;
        let incoming = self.chords[k - 1].direction();
        let outgoing = self.chords[k].direction();
        let ci = incoming.dot(&n);
        let co = outgoing.dot(&n);
        let tangential = ((&incoming - &n * ci) - (&outgoing - &n * co)).norm();
        Ok(tangential + (ci + co).abs())
    }

    pub fn check_reflection_law(&self, surface: &Surface, tol: f64) -> Result<()> {
        for k in 1..self.points.len().saturating_sub(1) {
            let defect = self.reflection_defect(surface, k)?;
            if !(defect <= tol) {
                return Err(Error::NotAnOrbit { index: k, defect });
            }
        }
        Ok(())
    }

    /// Phase point that retraces this segment backwards from its last point.
    pub fn reverse_start(&self) -> PhasePoint {
        let last = self.chords.last().expect("segment has a chord");
        PhasePoint {
            x: last.y.clone(),
            v: -&last.w,
            v_hat: last.w_hat,
        }
    }

    /// CSV with header `n,x1,…,xd,phi,chord_length`; the last row has an
    /// empty chord length.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let d = self.dimension();
        let mut header = String::from("n");
        for i in 1..=d {
            header.push_str(&format!(",x{i}"));
        }
        header.push_str(",phi,chord_length");
        writeln!(out, "{header}")?;
        for (k, x) in self.points.iter().enumerate() {
            let mut row = k.to_string();
            for c in x.iter() {
                row.push(',');
                row.push_str(&fmt_f64(*c));
            }
            row.push(',');
            row.push_str(&fmt_f64(self.angles[k]));
            row.push(',');
            if let Some(chord) = self.chords.get(k) {
                row.push_str(&fmt_f64(chord.length));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    /// The first `points` points of the segment.
    pub fn prefix(&self, points: usize) -> Result<OrbitSegment> {
        if points < 2 || points > self.points.len() {
            return Err(Error::invalid(
                "points",
                format!("prefix of {points} points out of range"),
            ));
        }
        Ok(OrbitSegment {
            points: self.points[..points].to_vec(),
            chords: self.chords[..points - 1].to_vec(),
            frames: self.frames[..points].to_vec(),
            angles: self.angles[..points].to_vec(),
            phases: self.phases[..points].to_vec(),
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn normal_incidence_reverses() {
        let s = Surface::unit_sphere(3);
        let y = dvector![0.0, 0.0, -1.0];
        let n = s.inward_normal(&y).unwrap();
        let out = reflect(&s, &y, &(-&n)).unwrap();
        assert!((out - n).norm() < 1e-15);
    }

    #[test]
    fn reflection_square_orbit_corner() {
        let s = Surface::unit_sphere(2);
        let y = dvector![0.0, 1.0];
        let incoming = dvector![-1.0, 1.0] / 2f64.sqrt();
        let out = reflect(&s, &y, &incoming).unwrap();
        let expected = dvector![-1.0, -1.0] / 2f64.sqrt();
        assert!((out - expected).norm() < 1e-15);
    }

    #[test]
    fn tangent_incidence_is_rejected() {
        let s = Surface::unit_sphere(3);
        let err = reflect(&s, &dvector![0.0, 0.0, 1.0], &dvector![1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::TangentIncidence { .. }));
    }

    #[test]
    fn diameter_step() {
        let s = Surface::unit_sphere(3);
        let p = PhasePoint::new(&s, dvector![0.0, 0.0, 1.0], DVector::zeros(3)).unwrap();
        let (q, chord) = billiard_step(&s, &p).unwrap();
        assert!((&q.x - dvector![0.0, 0.0, -1.0]).norm() < 1e-14);
        assert!(q.v.norm() < 1e-14);
        assert!((chord.length - 2.0).abs() < 1e-14);
        let (r, _) = billiard_step(&s, &q).unwrap();
        assert!((r.x - p.x).norm() < 1e-14);
    }

    #[test]
    fn circle_quarter_step() {
        let s = Surface::unit_sphere(2);
        let p = PhasePoint::from_angle(&s, dvector![1.0, 0.0], &dvector![0.0, 1.0], FRAC_PI_4).unwrap();
        let (q, chord) = billiard_step(&s, &p).unwrap();
        assert!((&q.x - dvector![0.0, 1.0]).norm() < 1e-14);
        assert!((chord.length - 2f64.sqrt()).abs() < 1e-14);
        assert!((q.angle() - FRAC_PI_4).abs() < 1e-14);
    }

    #[test]
    fn inscribed_square_closes() {
        let s = Surface::unit_sphere(2);
        let p = PhasePoint::from_angle(&s, dvector![1.0, 0.0], &dvector![0.0, 1.0], FRAC_PI_4).unwrap();
        let seg = orbit(&s, &p, 4).unwrap();
        assert_eq!(seg.len(), 5);
        assert!((&seg.points[4] - &seg.points[0]).norm() < 1e-12);
    }

    #[test]
    fn sphere_angles_are_constant() {
        let s = Surface::unit_sphere(3);
        let x = dvector![0.0, 0.0, 1.0];
        let p = PhasePoint::from_angle(&s, x, &dvector![1.0, 0.3, 0.0], 0.37).unwrap();
        let seg = orbit(&s, &p, 25).unwrap();
        for (k, a) in seg.angles.iter().enumerate() {
            assert!((a - 0.37).abs() < 1e-10, "vertex {k}");
        }
        for c in &seg.chords {
            assert!((c.length - 2.0 * 0.37f64.sin()).abs() < 1e-10);
        }
        seg.check_reflection_law(&s, REFLECTION_TOLERANCE).unwrap();
    }

    #[test]
    fn orbit_requires_a_bounce() {
        let s = Surface::unit_sphere(3);
        let p = PhasePoint::from_angle(&s, dvector![0.0, 0.0, 1.0], &dvector![1.0, 0.0, 0.0], 0.5).unwrap();
        assert!(orbit(&s, &p, 0).is_err());
    }

    #[test]
    fn grazing_step_reports_bounce_index() {
        let s = Surface::unit_sphere(3);
        let p = PhasePoint::from_angle(&s, dvector![0.0, 0.0, 1.0], &dvector![1.0, 0.0, 0.0], 1e-8).unwrap();
        let err = orbit(&s, &p, 3).unwrap_err();
        assert_eq!(err.bounce_index(), Some(0));
        assert!(matches!(err.root(), Error::NearTangentRay { .. }));
    }

    #[test]
    fn from_angle_validates() {
        let s = Surface::unit_sphere(3);
        let x = dvector![0.0, 0.0, 1.0];
        assert!(PhasePoint::from_angle(&s, x.clone(), &dvector![1.0, 0.0, 0.0], 0.0).is_err());
        assert!(PhasePoint::from_angle(&s, x.clone(), &dvector![1.0, 0.0, 0.0], 2.0).is_err());
        assert!(PhasePoint::from_angle(&s, x.clone(), &dvector![0.0, 0.0, 1.0], 0.5).is_err());
        let p = PhasePoint::from_angle(&s, x, &dvector![1.0, 0.0, 0.0], FRAC_PI_2).unwrap();
        assert!((p.v_hat - 1.0).abs() < 1e-16);
    }

    #[test]
    fn csv_layout() {
        let s = Surface::unit_sphere(2);
        let p = PhasePoint::from_angle(&s, dvector![1.0, 0.0], &dvector![0.0, 1.0], FRAC_PI_4).unwrap();
        let csv = orbit(&s, &p, 2).unwrap().to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,x1,x2,phi,chord_length");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].ends_with(','));
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 5);
        assert!((fields[4].parse::<f64>().unwrap() - 2f64.sqrt()).abs() < 1e-14);
    }
}
