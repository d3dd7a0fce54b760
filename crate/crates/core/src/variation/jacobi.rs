//! Jacobi fields along orbit segments and conjugate-point detection.
//!
//! A Jacobi field solves, at every interior vertex `k`,
//!
//! ```text
//! (l22(x_{k-1},x_k) + l11(x_k,x_{k+1})) ξ_k + l21(x_{k-1},x_k) ξ_{k-1} + l12(x_k,x_{k+1}) ξ_{k+1} = 0
//! ```
//!
//! which is exactly the kernel equation of the second variation once the
//! end vectors are pinned to zero.

use nalgebra::DVector;

use crate::dynamics::{orbit, unit_tangent, OrbitSegment, PhasePoint};
use crate::error::{Error, Result};
use crate::surface::{Point, Surface};
use crate::variation::form::{assemble_form, sorted_eigen, SecondVariationForm};
use crate::variation::operators::{segment_operators, ChordOperators};

/// Minimum singular value of `l12` accepted by the forward recurrence.
pub const TWIST_TOLERANCE: f64 = 1e-12;

/// Residual bound for a field flagged as exact.
pub const EXACT_RESIDUAL: f64 = 1e-8;

/// Width of the final bisection bracket in `|v|`.
pub const BISECTION_WIDTH: f64 = 1e-10;

/// Certification window for the kernel eigenvalue and the Jacobi residuals.
pub const KERNEL_WINDOW: f64 = 1e-6;

/// Number of cells in the coarse scan preceding bisection.
pub const COARSE_SCAN_CELLS: usize = 64;

#[derive(Clone, Debug)]
pub struct JacobiField {
    /// `ξ_0 … ξ_m` in the frame coordinates of the segment points.
    pub vectors: Vec<DVector<f64>>,
    /// Norm of the Jacobi equation at interior vertices `1 … m-1`.
    pub residuals: Vec<f64>,
    pub exact: bool,
}

impl JacobiField {
    fn with_residuals(vectors: Vec<DVector<f64>>, operators: &[ChordOperators]) -> Self {
        let residuals = jacobi_residuals(operators, &vectors);
        let exact = residuals.iter().all(|r| *r < EXACT_RESIDUAL);
        Self {
            vectors,
            residuals,
            exact,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// The field as ambient vectors.
    pub fn ambient(&self, segment: &OrbitSegment) -> Vec<DVector<f64>> {
        self.vectors
            .iter()
            .zip(&segment.frames)
            .map(|(c, f)| f.ambient(c))
            .collect()
    }
}

/// Residuals of the three-term recurrence for a full field `ξ_0 … ξ_m`
/// against the operators of chords `0 … m-1`.
pub fn jacobi_residuals(operators: &[ChordOperators], vectors: &[DVector<f64>]) -> Vec<f64> {
    (1..vectors.len().saturating_sub(1))
        .map(|k| {
            let before = &operators[k - 1];
            let after = &operators[k];
            let r =
                (&before.l22 + &after.l11) * &vectors[k] + &before.l21 * &vectors[k - 1] + &after.l12 * &vectors[k + 1];
            r.norm()
        })
        .collect()
}

/// Forward recurrence `ξ_{k+1} = -l12⁻¹ [(l22 + l11) ξ_k + l21 ξ_{k-1}]`
/// from `ξ_0 = start`, `ξ_1 = next` (frame coordinates at `x_0`, `x_1`).
pub fn jacobi_propagate(
    surface: &Surface,
    segment: &OrbitSegment,
    start: &DVector<f64>,
    next: &DVector<f64>,
) -> Result<JacobiField> {
    let operators = segment_operators(surface, segment)?;
    propagate_with(&operators, start, next)
}

pub(crate) fn propagate_with(
    operators: &[ChordOperators],
    start: &DVector<f64>,
    next: &DVector<f64>,
) -> Result<JacobiField> {
    let block = operators
        .first()
        .map(|o| o.l11.nrows())
        .ok_or_else(|| Error::invalid("segment", "needs at least one chord"))?;
    for v in [start, next] {
        if v.len() != block {
            return Err(Error::DimensionMismatch {
                expected: block,
                found: v.len(),
            });
        }
    }
    let mut vectors = vec![start.clone(), next.clone()];
    for k in 1..operators.len() {
        let before = &operators[k - 1];
        let after = &operators[k];
        let sigma = after.twist_singular_value();
        if !(sigma >= TWIST_TOLERANCE) {
            return Err(Error::TwistFailure { index: k, sigma });
        }
        let rhs = (&before.l22 + &after.l11) * &vectors[k] + &before.l21 * &vectors[k - 1];
        let step = after
            .l12
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::TwistFailure { index: k, sigma })?;
        vectors.push(-step);
    }
    Ok(JacobiField::with_residuals(vectors, operators))
}

/// Zero-padded Jacobi field from a stacked interior vector of `form`.
pub fn kernel_field(form: &SecondVariationForm, stacked: &DVector<f64>) -> JacobiField {
    let zero = DVector::zeros(form.block);
    let mut vectors = Vec::with_capacity(form.interior_count() + 2);
    vectors.push(zero.clone());
    vectors.extend(form.unstack(stacked));
    vectors.push(zero);
    JacobiField::with_residuals(vectors, &form.operators)
}

/// A phase point at `x` whose segment `x_0 = x, …, x_{n+1}` carries a
/// Jacobi field vanishing at both ends.
#[derive(Clone, Debug)]
pub struct ConjugatePoint {
    pub phase: PhasePoint,
    /// `|v|` at the crossing.
    pub speed: f64,
    pub eigenvalue: f64,
    pub eigenvalues: Vec<f64>,
    pub field: JacobiField,
    pub form: SecondVariationForm,
}

impl ConjugatePoint {
    pub fn v_hat(&self) -> f64 {
        self.phase.v_hat
    }
}

/// The second variation `δ²Φ_{1,n}` of the segment leaving `x` with `|v| = speed`.
pub fn form_at_speed(
    surface: &Surface,
    x: &Point,
    direction: &DVector<f64>,
    n: usize,
    speed: f64,
) -> Result<SecondVariationForm> {
    let p = PhasePoint::from_speed(surface, x.clone(), direction, speed)?;
    let seg = orbit(surface, &p, n + 1)?;
    assemble_form(surface, &seg)
}

fn positive_count(surface: &Surface, x: &Point, direction: &DVector<f64>, n: usize, speed: f64) -> Result<usize> {
    let form = form_at_speed(surface, x, direction, n, speed)?;
    let (values, _) = sorted_eigen(&form.matrix);
    Ok(values.iter().filter(|&&l| l > 0.0).count())
}

/// Locates a phase point `(x, |v| d)` where an eigenvalue of `δ²Φ_{1,n}`
/// crosses zero, searching `|v| ∈ [search.0, search.1]`.
///
/// The inertia (count of positive eigenvalues) is scanned on a coarse grid
/// from the grazing end `search.1` inward; the first cell where it changes is
/// refined by bisection to width [`BISECTION_WIDTH`]. The kernel eigenvector
/// at the crossing, padded with zeros, is returned as a Jacobi field.
pub fn detect_conjugate(
    surface: &Surface,
    x: &Point,
    direction: &DVector<f64>,
    n: usize,
    search: (f64, f64),
) -> Result<ConjugatePoint> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let (lo, hi) = search;
    if !(0.0 <= lo && lo < hi && hi < 1.0) {
        return Err(Error::invalid(
            "search",
            format!("interval [{lo}, {hi}] must lie inside [0, 1)"),
        ));
    }
    let d = unit_tangent(surface, x, direction)?;
    let count = |speed: f64| positive_count(surface, x, &d, n, speed);

    let reference = count(hi)?;
    let step = (hi - lo) / COARSE_SCAN_CELLS as f64;
    let mut bracket = None;
    let mut prev = hi;
    for j in 1..=COARSE_SCAN_CELLS {
        let r = if j == COARSE_SCAN_CELLS {
            lo
        } else {
            hi - j as f64 * step
        };
        if count(r)? != reference {
            bracket = Some((r, prev));
            break;
        }
        prev = r;
    }
    // `inner` has a different inertia than the grazing end, `outer` the same
    let (mut inner, mut outer) = bracket.ok_or(Error::NotFound)?;
    while outer - inner > BISECTION_WIDTH {
        let mid = 0.5 * (inner + outer);
        if count(mid)? == reference {
            outer = mid;
        } else {
            inner = mid;
        }
    }
    let speed = 0.5 * (inner + outer);
    let form = form_at_speed(surface, x, &d, n, speed)?;
    let (values, vectors) = sorted_eigen(&form.matrix);
    let (idx, eigenvalue) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, l)| (i, *l))
        .expect("nonempty spectrum");
    let field = kernel_field(&form, &vectors[idx]);
    let residual = field.max_residual();
    if !(eigenvalue.abs() < KERNEL_WINDOW && residual < KERNEL_WINDOW) {
        return Err(Error::Uncertified { eigenvalue, residual });
    }
    Ok(ConjugatePoint {
        phase: form.segment.phases[0].clone(),
        speed,
        eigenvalue,
        eigenvalues: values,
        field,
        form,
    })
}
