//! Implicit strictly convex hypersurfaces and their differential geometry.
//!
//! A surface is the zero set of a scalar field `F` that is negative inside
//! the body and positive outside. All normals are taken inward, so the second
//! fundamental form `B(ξ, ξ) = <S ξ, ξ>` is positive on a convex body.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// A point of the ambient space `R^d`.
pub type Point = DVector<f64>;

/// Points passed to geometric queries must satisfy `|F(x)|` below this bound.
pub const SURFACE_TOLERANCE: f64 = 1e-8;

/// Residual `|F(y)|` accepted for the far end of a chord.
pub const INTERSECTION_TOLERANCE: f64 = 1e-10;

/// Outward directions with `<z, n> < -DIRECTION_TOLERANCE` are rejected.
pub const DIRECTION_TOLERANCE: f64 = 1e-12;

/// Smallest ray parameter probed when bracketing the second intersection.
pub const MIN_RAY_PARAMETER: f64 = 1e-7;

type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type HessianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// User-supplied implicit function together with its first and second derivatives.
#[derive(Clone)]
pub struct ImplicitField {
    value: ScalarFn,
    gradient: GradientFn,
    hessian: HessianFn,
}

impl ImplicitField {
    pub fn new<F, G, H>(value: F, gradient: G, hessian: H) -> Self
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        H: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }
}

impl fmt::Debug for ImplicitField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ImplicitField { .. }")
    }
}

#[derive(Clone, Debug)]
pub enum SurfaceKind {
    /// `F(x) = |x|^2 - r^2`.
    Sphere {
        radius: f64,
    },
    /// `F(x) = sum x_i^2 / a_i^2 - 1`.
    Ellipsoid {
        semi_axes: Vec<f64>,
    },
    GenericImplicit(ImplicitField),
}

/// A smooth strictly convex hypersurface in `R^d`.
#[derive(Clone, Debug)]
pub struct Surface {
    kind: SurfaceKind,
    dimension: usize,
    diameter_bound: f64,
}

/// Orthonormal basis of `T_x Σ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame {
    pub base_point: Point,
    pub vectors: Vec<DVector<f64>>,
}

impl TangentFrame {
    /// `d × (d-1)` matrix whose columns are the frame vectors.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.vectors)
    }

    /// Coordinates of a tangent vector in this frame.
    pub fn coords(&self, ambient: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.vectors.len(), self.vectors.iter().map(|e| e.dot(ambient)))
    }

    pub fn ambient(&self, coords: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.base_point.len());
        for (e, c) in self.vectors.iter().zip(coords.iter()) {
            out.axpy(*c, e, 1.0);
        }
        out
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }
}

impl Surface {
    pub fn sphere(radius: f64, dimension: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        check_dimension(dimension)?;
        Ok(Self {
            kind: SurfaceKind::Sphere { radius },
            dimension,
            diameter_bound: 2.0 * radius,
        })
    }

    pub fn unit_sphere(dimension: usize) -> Self {
        Self::sphere(1.0, dimension).expect("unit sphere is valid for dimension >= 2")
    }

    pub fn ellipsoid(semi_axes: &[f64]) -> Result<Self> {
        check_dimension(semi_axes.len())?;
        if let Some(bad) = semi_axes.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::invalid("semi_axes", format!("must be positive, got {bad}")));
        }
        let max = semi_axes.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            kind: SurfaceKind::Ellipsoid {
                semi_axes: semi_axes.to_vec(),
            },
            dimension: semi_axes.len(),
            diameter_bound: 2.0 * max,
        })
    }

    /// A surface given by a user-supplied field. `diameter_bound` must bound
    /// the Euclidean diameter of the enclosed body.
    pub fn implicit(dimension: usize, diameter_bound: f64, field: ImplicitField) -> Result<Self> {
        check_dimension(dimension)?;
        if !(diameter_bound.is_finite() && diameter_bound > 0.0) {
            return Err(Error::invalid("diameter_bound", "must be positive"));
        }
        Ok(Self {
            kind: SurfaceKind::GenericImplicit(field),
            dimension,
            diameter_bound,
        })
    }

    /// Parses `{"kind":"sphere","radius":1.0}` (optional `"dimension"`, default 3)
    /// or `{"kind":"ellipsoid","semi_axes":[0.3,1.0,1.2]}`.
    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::invalid("surface", "expected a JSON object"))?;
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::invalid("surface.kind", "missing or not a string"))?;
        match kind {
            "sphere" => {
                let radius = obj
                    .get("radius")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| Error::invalid("surface.radius", "missing or not a number"))?;
                let dimension = match obj.get("dimension") {
                    None => 3,
                    Some(d) => d
                        .as_u64()
                        .ok_or_else(|| Error::invalid("surface.dimension", "not a positive integer"))?
                        as usize,
                };
                Self::sphere(radius, dimension)
            }
            "ellipsoid" => {
                let axes = obj
                    .get("semi_axes")
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::invalid("surface.semi_axes", "missing or not an array"))?;
                let axes = axes
                    .iter()
                    .map(|a| {
                        a.as_f64()
                            .ok_or_else(|| Error::invalid("surface.semi_axes", "entries must be numbers"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::ellipsoid(&axes)
            }
            other => Err(Error::invalid("surface.kind", format!("unknown surface kind: {other}"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match &self.kind {
            SurfaceKind::Sphere { radius } => {
                json!({"kind": "sphere", "radius": radius, "dimension": self.dimension})
            }
            SurfaceKind::Ellipsoid { semi_axes } => json!({"kind": "ellipsoid", "semi_axes": semi_axes}),
            SurfaceKind::GenericImplicit(_) => json!({
                "kind": "implicit",
                "dimension": self.dimension,
                "diameter_bound": self.diameter_bound,
            }),
        }
    }

    pub fn kind(&self) -> &SurfaceKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn diameter_bound(&self) -> f64 {
        self.diameter_bound
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match &self.kind {
            SurfaceKind::Sphere { radius } => x.norm_squared() - radius * radius,
            SurfaceKind::Ellipsoid { semi_axes } => {
                x.iter().zip(semi_axes).map(|(xi, a)| (xi / a).powi(2)).sum::<f64>() - 1.0
            }
            SurfaceKind::GenericImplicit(f) => (f.value)(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            SurfaceKind::Sphere { .. } => x * 2.0,
            SurfaceKind::Ellipsoid { semi_axes } => {
                DVector::from_iterator(x.len(), x.iter().zip(semi_axes).map(|(xi, a)| 2.0 * xi / (a * a)))
            }
            SurfaceKind::GenericImplicit(f) => (f.gradient)(x),
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            SurfaceKind::Sphere { .. } => DMatrix::identity(x.len(), x.len()) * 2.0,
            SurfaceKind::Ellipsoid { semi_axes } => DMatrix::from_diagonal(&DVector::from_iterator(
                x.len(),
                semi_axes.iter().map(|a| 2.0 / (a * a)),
            )),
            SurfaceKind::GenericImplicit(f) => (f.hessian)(x),
        }
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        let residual = self.eval(x).abs();
        if residual.is_nan() || residual > SURFACE_TOLERANCE {
            return Err(Error::OffSurface { residual });
        }
        Ok(())
    }

    /// Gradient at a surface point together with its norm; fails at critical points.
    fn surface_gradient(&self, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        self.check_point(x)?;
        let g = self.gradient(x);
        let norm = g.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::DegeneratePoint);
        }
        Ok((g, norm))
    }

    /// Inward unit normal `n_x = -∇F / |∇F|`.
    pub fn inward_normal(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (g, norm) = self.surface_gradient(x)?;
        Ok(g / -norm)
    }

    /// Splits an inward unit vector into its tangential part `v` and its
    /// normal component `v̂ = sin φ`, so that `z = v + v̂ n_x`.
    pub fn project_tangent(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let n = self.inward_normal(x)?;
        if z.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: z.len(),
            });
        }
        let v_hat = z.dot(&n);
        if v_hat < -DIRECTION_TOLERANCE {
            return Err(Error::OutwardDirection {
                normal_component: v_hat,
            });
        }
        Ok((z - &n * v_hat, v_hat))
    }

    /// Deterministic orthonormal frame of `T_x Σ`: Gram–Schmidt on the
    /// coordinate axes with the axis most parallel to the normal removed
    /// (lowest index wins ties).
    pub fn tangent_frame(&self, x: &DVector<f64>) -> Result<TangentFrame> {
        let n = self.inward_normal(x)?;
        let d = self.dimension;
        let mut drop = 0;
        for i in 1..d {
            if n[i].abs() > n[drop].abs() {
                drop = i;
            }
        }
        let mut vectors: Vec<DVector<f64>> = Vec::with_capacity(d - 1);
        for i in (0..d).filter(|&i| i != drop) {
            let mut u = DVector::zeros(d);
            u[i] = 1.0;
            // two passes keep the frame orthonormal to working precision
            for _ in 0..2 {
                let c = u.dot(&n);
                u.axpy(-c, &n, 1.0);
                for e in &vectors {
                    let c = u.dot(e);
                    u.axpy(-c, e, 1.0);
                }
            }
            let norm = u.norm();
            vectors.push(u / norm);
        }
        Ok(TangentFrame {
            base_point: x.clone(),
            vectors,
        })
    }

    /// Ambient matrix of the shape operator, `P H P / |∇F|` with `P` the
    /// tangential projector. It maps `T_x Σ` into itself and kills the normal.
    pub fn shape_matrix(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (g, norm) = self.surface_gradient(x)?;
        let n = &g / norm;
        let d = self.dimension;
        let p = DMatrix::identity(d, d) - &n * n.transpose();
        Ok(&p * self.hessian(x) * &p / norm)
    }

    /// `S(ξ) = -∇_ξ n` for a tangent vector `ξ`.
    pub fn shape_operator(&self, x: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.shape_matrix(x)? * xi)
    }

    /// Shape operator in the coordinates of `frame`.
    pub fn shape_in_frame(&self, frame: &TangentFrame) -> Result<DMatrix<f64>> {
        let (_, norm) = self.surface_gradient(&frame.base_point)?;
        let e = frame.matrix();
        let s = e.transpose() * self.hessian(&frame.base_point) * &e / norm;
        Ok((&s + s.transpose()) * 0.5)
    }

    /// `B(ξ, ξ) = <S ξ, ξ>`.
    pub fn second_fundamental_form(&self, x: &DVector<f64>, xi: &DVector<f64>) -> Result<f64> {
        Ok(self.shape_operator(x, xi)?.dot(xi))
    }

    /// Principal curvatures at `x`, ascending.
    pub fn principal_curvatures(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        let frame = self.tangent_frame(x)?;
        let s = self.shape_in_frame(&frame)?;
        let mut k: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().cloned().collect();
        k.sort_by(f64::total_cmp);
        Ok(k)
    }

    /// Global minimum and maximum normal curvature when they are known in
    /// closed form (spheres and ellipsoids).
    pub fn curvature_extremes(&self) -> Option<(f64, f64)> {
        match &self.kind {
            SurfaceKind::Sphere { radius } => Some((1.0 / radius, 1.0 / radius)),
            SurfaceKind::Ellipsoid { semi_axes } => {
                let min = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = semi_axes.iter().cloned().fold(0.0, f64::max);
                Some((min / (max * max), max / (min * min)))
            }
            SurfaceKind::GenericImplicit(_) => None,
        }
    }

    /// Second intersection of the ray `x + t z, t > 0` with the surface.
    ///
    /// Safeguarded Newton on `t ↦ F(x + t z)` inside the bracket
    /// `[MIN_RAY_PARAMETER, 2 D]`, started from the root of the local
    /// quadratic model (exact for quadrics).
    pub fn intersect_ray(&self, x: &DVector<f64>, z: &DVector<f64>) -> Result<(Point, f64)> {
        let n = self.inward_normal(x)?;
        let sin_phi = z.dot(&n);
        if sin_phi < -DIRECTION_TOLERANCE {
            return Err(Error::OutwardDirection {
                normal_component: sin_phi,
            });
        }
        if sin_phi <= 0.0 {
            return Err(Error::NearTangentRay { sin_phi });
        }
        let along = |t: f64| {
            let mut p = x.clone();
            p.axpy(t, z, 1.0);
            p
        };
        let g = |t: f64| self.eval(&along(t));

        let mut lo = MIN_RAY_PARAMETER;
        let mut hi = 2.0 * self.diameter_bound;
        if g(lo) >= 0.0 {
            return Err(Error::NearTangentRay { sin_phi });
        }
        if g(hi) <= 0.0 {
            return Err(Error::invalid(
                "diameter_bound",
                "ray does not leave the body within twice the diameter bound",
            ));
        }

        let f0 = self.eval(x);
        let slope = self.gradient(x).dot(z);
        let curvature = z.dot(&(self.hessian(x) * z));
        let disc = slope * slope - 2.0 * curvature * f0;
        let mut t = if curvature > 0.0 && disc >= 0.0 {
            (disc.sqrt() - slope) / curvature
        } else {
            0.5 * (lo + hi)
        };
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }

        for _ in 0..200 {
            let p = along(t);
            let gt = self.eval(&p);
            if gt == 0.0 {
                break;
            }
            if gt < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let dg = self.gradient(&p).dot(z);
            let mut next = t - gt / dg;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - t).abs() <= 4.0 * f64::EPSILON * t || hi - lo <= 4.0 * f64::EPSILON * hi;
            t = next;
            if done {
                break;
            }
        }

        let y = along(t);
        let residual = self.eval(&y).abs();
        if !(residual < INTERSECTION_TOLERANCE) {
            return Err(Error::NearTangentRay { sin_phi });
        }
        let length = (&y - x).norm();
        Ok((y, length))
    }

    /// The surface point on the ray from the origin through `direction`.
    /// Requires the origin to lie inside the body.
    pub fn radial_point(&self, direction: &DVector<f64>) -> Result<Point> {
        let norm = direction.norm();
        if !(norm > 0.0) {
            return Err(Error::invalid("direction", "must be nonzero"));
        }
        let u = direction / norm;
        match &self.kind {
            SurfaceKind::Sphere { radius } => Ok(u * *radius),
            SurfaceKind::Ellipsoid { semi_axes } => {
                let q: f64 = u.iter().zip(semi_axes).map(|(ui, a)| (ui / a).powi(2)).sum();
                Ok(u / q.sqrt())
            }
            SurfaceKind::GenericImplicit(_) => {
                let origin = DVector::zeros(self.dimension);
                if self.eval(&origin) >= 0.0 {
                    return Err(Error::invalid("surface", "origin is not inside the body"));
                }
                let (mut lo, mut hi) = (0.0, self.diameter_bound);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.eval(&(&u * mid)) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let mut t = 0.5 * (lo + hi);
                for _ in 0..3 {
                    let p = &u * t;
                    let dg = self.gradient(&p).dot(&u);
                    if dg > 0.0 {
                        t -= self.eval(&p) / dg;
                    }
                }
                Ok(u * t)
            }
        }
    }
}

fn check_dimension(dimension: usize) -> Result<()> {
    if dimension < 2 {
        return Err(Error::invalid(
            "dimension",
            format!("must be at least 2, got {dimension}"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn ellipsoid_031() -> Surface {
        Surface::ellipsoid(&[0.3, 1.0, 1.2]).unwrap()
    }

    #[test]
    fn eval_sign_convention() {
        let s = Surface::unit_sphere(3);
        assert_eq!(s.eval(&dvector![1.0, 0.0, 0.0]), 0.0);
        assert_eq!(s.eval(&dvector![0.0, 0.0, 0.0]), -1.0);
        assert_eq!(ellipsoid_031().eval(&dvector![0.3, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn inward_normals_on_axes() {
        let s = Surface::unit_sphere(3);
        assert_eq!(
            s.inward_normal(&dvector![1.0, 0.0, 0.0]).unwrap(),
            dvector![-1.0, 0.0, 0.0]
        );
        assert_eq!(
            s.inward_normal(&dvector![0.0, 0.0, 1.0]).unwrap(),
            dvector![0.0, 0.0, -1.0]
        );
        let e = ellipsoid_031();
        assert_eq!(
            e.inward_normal(&dvector![0.3, 0.0, 0.0]).unwrap(),
            dvector![-1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn off_surface_points_are_rejected() {
        let s = Surface::unit_sphere(3);
        assert!(matches!(
            s.inward_normal(&dvector![0.5, 0.0, 0.0]),
            Err(Error::OffSurface { .. })
        ));
        assert!(matches!(
            s.inward_normal(&dvector![1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let s = Surface::unit_sphere(3);
        let x = dvector![1.0, 0.0, 0.0];
        let h = 0.5f64.sqrt();
        let (v, v_hat) = s.project_tangent(&x, &dvector![-h, h, 0.0]).unwrap();
        assert!((v - dvector![0.0, h, 0.0]).norm() < 1e-15);
        assert!((v_hat - h).abs() < 1e-15);

        let (v, v_hat) = s.project_tangent(&x, &dvector![-1.0, 0.0, 0.0]).unwrap();
        assert_eq!(v.norm(), 0.0);
        assert_eq!(v_hat, 1.0);

        let (v, v_hat) = s.project_tangent(&x, &dvector![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(v, dvector![0.0, 0.0, 1.0]);
        assert_eq!(v_hat, 0.0);

        assert!(matches!(
            s.project_tangent(&x, &dvector![1.0, 0.0, 0.0]),
            Err(Error::OutwardDirection { .. })
        ));
    }

    #[test]
    fn frame_at_pole_is_axis_aligned() {
        let s = Surface::unit_sphere(3);
        let f = s.tangent_frame(&dvector![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.vectors, vec![dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0]]);
    }

    #[test]
    fn frame_is_orthonormal_and_deterministic() {
        let e = ellipsoid_031();
        let x = e.radial_point(&dvector![0.4, -1.3, 0.7]).unwrap();
        let f = e.tangent_frame(&x).unwrap();
        let n = e.inward_normal(&x).unwrap();
        for (i, a) in f.vectors.iter().enumerate() {
            assert!((a.norm() - 1.0).abs() < 1e-12);
            assert!(a.dot(&n).abs() < 1e-12);
            for b in &f.vectors[i + 1..] {
                assert!(a.dot(b).abs() < 1e-12);
            }
        }
        assert_eq!(f, e.tangent_frame(&x).unwrap());
    }

    #[test]
    fn frame_tie_break_prefers_lowest_index() {
        let s = Surface::unit_sphere(2);
        let h = 0.5f64.sqrt();
        let f = s.tangent_frame(&dvector![h, h]).unwrap();
        // axis 0 dropped, the remaining axis e_1 is projected
        assert!((&f.vectors[0] - dvector![-h, h]).norm() < 1e-15);
    }

    #[test]
    fn sphere_is_umbilic() {
        let s = Surface::sphere(2.5, 3).unwrap();
        let x = dvector![0.0, 2.5, 0.0];
        let xi = dvector![0.3, 0.0, -0.7];
        let sx = s.shape_operator(&x, &xi).unwrap();
        assert!((sx - &xi / 2.5).norm() < 1e-15);
    }

    #[test]
    fn ellipsoid_curvatures_at_short_axis() {
        let e = ellipsoid_031();
        let a = dvector![0.3, 0.0, 0.0];
        let s2 = e.shape_operator(&a, &dvector![0.0, 1.0, 0.0]).unwrap();
        let s3 = e.shape_operator(&a, &dvector![0.0, 0.0, 1.0]).unwrap();
        assert!((s2 - dvector![0.0, 0.3, 0.0]).norm() < 1e-10);
        assert!((s3 - dvector![0.0, 0.0, 0.3 / 1.44]).norm() < 1e-10);
        let k = e.principal_curvatures(&a).unwrap();
        assert!((k[0] - 0.3 / 1.44).abs() < 1e-10 && (k[1] - 0.3).abs() < 1e-10);
    }

    #[test]
    fn diameter_chord() {
        let s = Surface::unit_sphere(3);
        let (y, l) = s
            .intersect_ray(&dvector![1.0, 0.0, 0.0], &dvector![-1.0, 0.0, 0.0])
            .unwrap();
        assert!((y - dvector![-1.0, 0.0, 0.0]).norm() < 1e-14);
        assert!((l - 2.0).abs() < 1e-14);
    }

    #[test]
    fn circle_quarter_chord() {
        let s = Surface::unit_sphere(2);
        let h = 0.5f64.sqrt();
        let (y, l) = s.intersect_ray(&dvector![1.0, 0.0], &dvector![-h, h]).unwrap();
        assert!((y - dvector![0.0, 1.0]).norm() < 1e-14);
        assert!((l - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sphere_chord_length_closed_form() {
        let s = Surface::unit_sphere(3);
        let x = dvector![0.0, 0.0, 1.0];
        for k in 1..=40 {
            let phi = k as f64 * std::f64::consts::FRAC_PI_2 / 40.0;
            let z = dvector![phi.cos(), 0.0, -phi.sin()];
            let (y, l) = s.intersect_ray(&x, &z).unwrap();
            assert!((l - 2.0 * phi.sin()).abs() < 1e-13, "phi={phi}");
            assert!(s.eval(&y).abs() < 1e-10);
        }
    }

    #[test]
    fn tangent_ray_is_rejected() {
        let s = Surface::unit_sphere(3);
        let err = s
            .intersect_ray(&dvector![0.0, 0.0, 1.0], &dvector![1.0, 0.0, 0.0])
            .unwrap_err();
        assert!(matches!(err, Error::NearTangentRay { .. }));
        let err = s
            .intersect_ray(&dvector![0.0, 0.0, 1.0], &dvector![1.0, 0.0, -1e-9])
            .unwrap_err();
        assert!(matches!(err, Error::NearTangentRay { .. }));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let s = Surface::from_json(&json!({"kind": "sphere", "radius": 1.0})).unwrap();
        assert_eq!(s.dimension(), 3);
        assert_eq!(s.diameter_bound(), 2.0);
        let e = Surface::from_json(&json!({"kind": "ellipsoid", "semi_axes": [0.3, 1.0, 1.2]})).unwrap();
        assert_eq!(e.diameter_bound(), 2.4);
        let again = Surface::from_json(&e.to_json()).unwrap();
        assert_eq!(again.diameter_bound(), 2.4);
        let err = Surface::from_json(&json!({"kind": "torus"})).unwrap_err();
        assert!(err.to_string().contains("unknown surface kind: torus"));
        assert!(Surface::from_json(&json!({"kind": "sphere", "radius": -1.0})).is_err());
    }
}
