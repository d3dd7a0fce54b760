//! Second derivatives of the chord length `L(x, y) = |x - y|` on `Σ × Σ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dynamics::{ChordData, OrbitSegment, REFLECTION_TOLERANCE};
use crate::error::{Error, Result};
use crate::surface::{Point, Surface, TangentFrame};

/// Below this `|v_0|` a vertex is treated as normal incidence and every
/// tangent direction counts as transversal.
pub const NORMAL_INCIDENCE_SPEED: f64 = 1e-9;

/// The four second-derivative operators of `L` at a chord, in frame coordinates.
///
/// `l11` acts on `T_x Σ`, `l22` on `T_y Σ`; `l12` maps `frame(y)` coordinates
/// to `frame(x)` coordinates and `l21` the reverse.
#[derive(Clone, Debug, PartialEq)]
pub struct ChordOperators {
    pub l11: DMatrix<f64>,
    pub l22: DMatrix<f64>,
    pub l12: DMatrix<f64>,
    pub l21: DMatrix<f64>,
}

impl ChordOperators {
    /// `max |l12ᵀ - l21|`.
    pub fn adjointness_defect(&self) -> f64 {
        (self.l12.transpose() - &self.l21).amax()
    }

    /// Smallest singular value of `l12`; positive under the twist condition.
    pub fn twist_singular_value(&self) -> f64 {
        self.l12.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Realizes
///
/// ```text
/// l11 ξ = (ξ - <v,ξ> v)/L - v̂ S ξ        l12 η = (-π_x η + <w,η> v)/L
/// l22 η = (η - <w,η> w)/L - ŵ S η        l21 ξ = (-π_y ξ + <v,ξ> w)/L
/// ```
///
/// in the given frames.
pub fn chord_operators(
    surface: &Surface,
    chord: &ChordData,
    frame_x: &TangentFrame,
    frame_y: &TangentFrame,
) -> Result<ChordOperators> {
    let length = chord.length;
    if !(length >= 1e-9) {
        return Err(Error::DegenerateChord { length });
    }
    if (&frame_x.base_point - &chord.x).amax() > 1e-12 || (&frame_y.base_point - &chord.y).amax() > 1e-12 {
        return Err(Error::invalid("frame", "frames must be based at the chord endpoints"));
    }
    let ex = frame_x.matrix();
    let ey = frame_y.matrix();
    let k = ex.ncols();
    let id = DMatrix::<f64>::identity(k, k);
    let vx = ex.transpose() * &chord.v;
    let wy = ey.transpose() * &chord.w;
    let sx = surface.shape_in_frame(frame_x)?;
    let sy = surface.shape_in_frame(frame_y)?;

    let l11 = (&id - &vx * vx.transpose()) / length - sx * chord.v_hat;
    let l22 = (&id - &wy * wy.transpose()) / length - sy * chord.w_hat;
    let cross = ex.transpose() * &ey;
    let l12 = (&vx * wy.transpose() - &cross) / length;
    let l21 = (&wy * vx.transpose() - cross.transpose()) / length;
    Ok(ChordOperators { l11, l22, l12, l21 })
}

/// Operators for every chord of a segment.
pub fn segment_operators(surface: &Surface, segment: &OrbitSegment) -> Result<Vec<ChordOperators>> {
    segment
        .chords
        .iter()
        .enumerate()
        .map(|(i, c)| {
            chord_operators(surface, c, &segment.frames[i], &segment.frames[i + 1]).map_err(|e| e.at_bounce(i))
        })
        .collect()
}

/// `δ²Φ₀₀(ξ)` for the one-reflection segment `x_prev → x0 → x1`:
///
/// ```text
/// (|ξ|² - <v₀,ξ>²)(1/L(x_prev,x0) + 1/L(x0,x1)) - 2 B(ξ,ξ) v̂₀
/// ```
///
/// Fails with `NotAnOrbit` (index 1, the middle point) when the reflection
/// law does not hold at `x0`.
pub fn one_bounce_form(surface: &Surface, x_prev: &Point, x0: &Point, x1: &Point, xi: &DVector<f64>) -> Result<f64> {
    let seg = OrbitSegment::from_points(surface, vec![x_prev.clone(), x0.clone(), x1.clone()])?;
    seg.check_reflection_law(surface, REFLECTION_TOLERANCE)?;
    let n = surface.inward_normal(x0)?;
    if xi.dot(&n).abs() > 1e-10 * xi.norm().max(1.0) {
        return Err(Error::invalid("xi", "variation is not tangent at x0"));
    }
    let incoming = &seg.chords[0];
    let outgoing = &seg.chords[1];
    let v0 = &outgoing.v;
    let b = surface.second_fundamental_form(x0, xi)?;
    let along = v0.dot(xi);
    Ok(
        (xi.norm_squared() - along * along) * (1.0 / incoming.length + 1.0 / outgoing.length)
            - 2.0 * b * outgoing.v_hat,
    )
}

/// The one-bounce form as a matrix `l11(x0,x1) + l22(x_prev,x0)` in the frame at `x0`.
#[derive(Clone, Debug)]
pub struct OneBounce {
    pub frame: TangentFrame,
    pub matrix: DMatrix<f64>,
    /// Outgoing tangent velocity at `x0`.
    pub v0: DVector<f64>,
    pub v0_hat: f64,
    pub incoming_length: f64,
    pub outgoing_length: f64,
}

impl OneBounce {
    pub fn new(surface: &Surface, x_prev: &Point, x0: &Point, x1: &Point) -> Result<Self> {
        let seg = OrbitSegment::from_points(surface, vec![x_prev.clone(), x0.clone(), x1.clone()])?;
        seg.check_reflection_law(surface, REFLECTION_TOLERANCE)?;
        let ops = segment_operators(surface, &seg)?;
        let matrix = &ops[1].l11 + &ops[0].l22;
        Ok(Self {
            frame: seg.frames[1].clone(),
            matrix: (&matrix + matrix.transpose()) * 0.5,
            v0: seg.chords[1].v.clone(),
            v0_hat: seg.chords[1].v_hat,
            incoming_length: seg.chords[0].length,
            outgoing_length: seg.chords[1].length,
        })
    }

    /// Value of the form on an ambient tangent vector.
    pub fn value(&self, xi: &DVector<f64>) -> f64 {
        let c = self.frame.coords(xi);
        c.dot(&(&self.matrix * &c))
    }

    /// Unit longitudinal direction `v₀/|v₀|`, absent at normal incidence.
    pub fn longitudinal_direction(&self) -> Option<DVector<f64>> {
        let speed = self.v0.norm();
        (speed >= NORMAL_INCIDENCE_SPEED).then(|| &self.v0 / speed)
    }

    /// Value on the unit longitudinal direction.
    pub fn longitudinal(&self) -> Option<f64> {
        self.longitudinal_direction().map(|u| self.value(&u))
    }

    /// Orthonormal basis (frame coordinates) of the transversal subspace.
    fn transversal_basis(&self) -> DMatrix<f64> {
        let k = self.frame.rank();
        match self.longitudinal_direction() {
            None => DMatrix::identity(k, k),
            Some(u) => {
                let uc = self.frame.coords(&u);
                let uc = &uc / uc.norm();
                let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k - 1);
                for i in 0..k {
                    let mut e = DVector::zeros(k);
                    e[i] = 1.0;
                    for _ in 0..2 {
                        let c = e.dot(&uc);
                        e.axpy(-c, &uc, 1.0);
                        for b in &basis {
                            let c = e.dot(b);
                            e.axpy(-c, b, 1.0);
                        }
                    }
                    let norm = e.norm();
                    if norm > 1e-6 && basis.len() < k - 1 {
                        basis.push(e / norm);
                    }
                }
                if basis.is_empty() {
                    DMatrix::zeros(k, 0)
                } else {
                    DMatrix::from_columns(&basis)
                }
            }
        }
    }

    /// Minimum and maximum of the form over unit transversal vectors, or
    /// `None` when the transversal subspace is trivial (planar billiards).
    pub fn transversal_range(&self) -> Option<(f64, f64)> {
        let q = self.transversal_basis();
        if q.ncols() == 0 {
            return None;
        }
        let restricted = q.transpose() * &self.matrix * &q;
        let eig = SymmetricEigen::new((&restricted + restricted.transpose()) * 0.5).eigenvalues;
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some((min, max))
    }
}
