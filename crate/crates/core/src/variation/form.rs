//! The block-tridiagonal second variation of the chord-length functional and
//! its spectral classification.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::dynamics::OrbitSegment;
use crate::error::{Error, Result};
use crate::surface::Surface;
use crate::variation::operators::{segment_operators, ChordOperators, NORMAL_INCIDENCE_SPEED};

/// Relative scale of the default semidefiniteness tolerance.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-9;

/// `δ²Φ` of a segment `x_0 … x_{m+1}` with both endpoints frozen; the
/// variables are the interior vertices `x_1 … x_m`.
#[derive(Clone, Debug)]
pub struct SecondVariationForm {
    pub segment: OrbitSegment,
    pub operators: Vec<ChordOperators>,
    /// Size of one block, `d - 1`.
    pub block: usize,
    pub matrix: DMatrix<f64>,
}

/// Assembles the matrix with diagonal blocks `l11(x_k,x_{k+1}) + l22(x_{k-1},x_k)`
/// and off-diagonal blocks `l12(x_k,x_{k+1})` (and their transposes).
pub fn assemble_form(surface: &Surface, segment: &OrbitSegment) -> Result<SecondVariationForm> {
    let m = segment.interior_count();
    if m == 0 {
        return Err(Error::invalid("segment", "needs at least one interior vertex"));
    }
    let operators = segment_operators(surface, segment)?;
    let block = segment.dimension() - 1;
    let mut matrix = DMatrix::zeros(m * block, m * block);
    for i in 0..m {
        // interior vertex k = i + 1 sits between chords i and i + 1
        let diag = &operators[i + 1].l11 + &operators[i].l22;
        matrix
            .view_mut((i * block, i * block), (block, block))
            .copy_from(&((&diag + diag.transpose()) * 0.5));
        if i + 1 < m {
            let off = &operators[i + 1].l12;
            matrix
                .view_mut((i * block, (i + 1) * block), (block, block))
                .copy_from(off);
            matrix
                .view_mut(((i + 1) * block, i * block), (block, block))
                .copy_from(&off.transpose());
        }
    }
    Ok(SecondVariationForm {
        segment: segment.clone(),
        operators,
        block,
        matrix,
    })
}

impl SecondVariationForm {
    pub fn interior_count(&self) -> usize {
        self.matrix.nrows() / self.block
    }

    /// Block `(i, j)` of the matrix (interior indices counted from zero).
    pub fn block_at(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.matrix
            .view((i * self.block, j * self.block), (self.block, self.block))
            .into_owned()
    }

    /// Stacks ambient tangent vectors at the interior vertices into frame coordinates.
    pub fn stack(&self, ambient: &[DVector<f64>]) -> DVector<f64> {
        assert_eq!(ambient.len(), self.interior_count(), "one vector per interior vertex");
        let mut out = DVector::zeros(self.matrix.nrows());
        for (i, xi) in ambient.iter().enumerate() {
            let c = self.segment.frames[i + 1].coords(xi);
            out.rows_mut(i * self.block, self.block).copy_from(&c);
        }
        out
    }

    /// Splits a stacked coordinate vector into per-vertex frame coordinates.
    pub fn unstack(&self, stacked: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.interior_count())
            .map(|i| stacked.rows(i * self.block, self.block).into_owned())
            .collect()
    }

    /// `δ²Φ(ξ, ξ)` on ambient tangent vectors at the interior vertices.
    pub fn quadratic(&self, ambient: &[DVector<f64>]) -> f64 {
        let c = self.stack(ambient);
        c.dot(&(&self.matrix * &c))
    }

    /// Scalar form `Q_ij = δ²Φ(a_i e_i, b_j e_j)` for one direction per interior vertex on each side.
    pub fn restrict_pair(&self, left: &[DVector<f64>], right: &[DVector<f64>]) -> DMatrix<f64> {
        let m = self.interior_count();
        let columns = |dirs: &[DVector<f64>]| {
            let mut p = DMatrix::zeros(self.matrix.nrows(), m);
            for (i, d) in dirs.iter().enumerate() {
                let c = self.segment.frames[i + 1].coords(d);
                p.view_mut((i * self.block, i), (self.block, 1)).copy_from(&c);
            }
            p
        };
        let pl = columns(left);
        let pr = columns(right);
        pl.transpose() * &self.matrix * pr
    }

    /// Restriction to the line field spanned by one tangent direction per interior vertex.
    pub fn restrict(&self, directions: &[DVector<f64>]) -> DMatrix<f64> {
        self.restrict_pair(directions, directions)
    }

    /// Unit longitudinal direction `v_k/|v_k|` at each interior vertex;
    /// `None` at normal incidence.
    pub fn longitudinal_directions(&self) -> Vec<Option<DVector<f64>>> {
        (1..=self.interior_count())
            .map(|k| {
                let v = &self.segment.chords[k].v;
                let speed = v.norm();
                (speed >= NORMAL_INCIDENCE_SPEED).then(|| v / speed)
            })
            .collect()
    }

    pub fn default_tolerance(&self) -> f64 {
        default_tolerance(&self.matrix)
    }

    pub fn definiteness(&self, tol: f64) -> DefinitenessReport {
        definiteness(&self.matrix, tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    NegativeDefinite,
    NegativeSemidefinite,
    Indefinite,
    PositiveSemidefinite,
    PositiveDefinite,
}

impl Classification {
    /// Negative semidefinite in the wide sense (the maximizing test).
    pub fn is_maximizing(self) -> bool {
        matches!(
            self,
            Classification::NegativeDefinite | Classification::NegativeSemidefinite
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::NegativeDefinite => "negative-definite",
            Classification::NegativeSemidefinite => "negative-semidefinite",
            Classification::Indefinite => "indefinite",
            Classification::PositiveSemidefinite => "positive-semidefinite",
            Classification::PositiveDefinite => "positive-definite",
        }
    }
}

#[derive(Clone, Debug)]
pub struct DefinitenessReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub classification: Classification,
    /// Unit eigenvectors with `|λ| <= tolerance`, sign-normalized so the
    /// first non-negligible entry is positive.
    pub kernel_basis: Vec<DVector<f64>>,
    pub tolerance: f64,
}

impl DefinitenessReport {
    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Number of eigenvalues above the tolerance.
    pub fn positive_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > self.tolerance).count()
    }
}

/// `1e-9 · max |M_ij|`.
pub fn default_tolerance(matrix: &DMatrix<f64>) -> f64 {
    DEFAULT_RELATIVE_TOLERANCE * matrix.amax().max(f64::MIN_POSITIVE)
}

/// Sorted eigenpairs of a symmetric matrix.
pub fn sorted_eigen(matrix: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| normalize_sign(eig.eigenvectors.column(i).into_owned()))
        .collect();
    (values, vectors)
}

fn normalize_sign(mut v: DVector<f64>) -> DVector<f64> {
    let scale = v.amax();
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-8 * scale).copied() {
        if first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Full symmetric eigendecomposition and classification with kernel window `|λ| <= tol`.
pub fn definiteness(matrix: &DMatrix<f64>, tol: f64) -> DefinitenessReport {
    assert!(
        matrix.is_square() && matrix.nrows() > 0,
        "definiteness needs a nonempty square matrix"
    );
    let (eigenvalues, vectors) = sorted_eigen(matrix);
    let negative = eigenvalues.iter().filter(|&&l| l < -tol).count();
    let positive = eigenvalues.iter().filter(|&&l| l > tol).count();
    let zero = eigenvalues.len() - negative - positive;
    let classification = match (negative, zero, positive) {
        (_, _, 0) if zero == 0 => Classification::NegativeDefinite,
        (_, _, 0) => Classification::NegativeSemidefinite,
        (0, 0, _) => Classification::PositiveDefinite,
        (0, _, _) => Classification::PositiveSemidefinite,
        _ => Classification::Indefinite,
    };
    let kernel_basis = eigenvalues
        .iter()
        .zip(vectors)
        .filter(|(l, _)| l.abs() <= tol)
        .map(|(_, v)| v)
        .collect();
    DefinitenessReport {
        eigenvalues,
        classification,
        kernel_basis,
        tolerance: tol,
    }
}

/// Symmetric tridiagonal Toeplitz matrix with diagonal `a` and off-diagonal `b`.
pub fn tridiagonal(a: f64, b: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            a
        } else if i.abs_diff(j) == 1 {
            b
        } else {
            0.0
        }
    })
}
