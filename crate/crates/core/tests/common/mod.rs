//! Independent oracles: finite differences that only call `Surface::eval`,
//! and an LDLᵀ inertia count.

#![allow(dead_code)]

use billiards::Surface;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;

/// Inward unit normal from a central-difference gradient of `F`.
pub fn fd_normal(s: &Surface, x: &DVector<f64>) -> DVector<f64> {
    let h = 1e-6;
    let g = DVector::from_fn(x.len(), |i, _| {
        let mut p = x.clone();
        let mut m = x.clone();
        p[i] += h;
        m[i] -= h;
        (s.eval(&p) - s.eval(&m)) / (2.0 * h)
    });
    -&g / g.norm()
}

/// Point `x + t ξ + σ n` on the surface, with `n` the finite-difference normal at
/// `x`; its acceleration at `t = 0` is normal, so second differences of a
/// function along it give the surface Hessian.
pub fn surface_curve(s: &Surface, x: &DVector<f64>, n: &DVector<f64>, xi: &DVector<f64>, t: f64) -> DVector<f64> {
    let base = x + xi * t;
    let f = |sigma: f64| s.eval(&(&base + n * sigma));
    // secant iteration on σ ↦ F(base + σ n)
    let (mut s0, mut s1) = (0.0, 1e-3 * t.abs().max(1e-8));
    let (mut f0, mut f1) = (f(s0), f(s1));
    for _ in 0..100 {
        if f1 == 0.0 || f1 == f0 {
            break;
        }
        let s2 = s1 - f1 * (s1 - s0) / (f1 - f0);
        s0 = s1;
        f0 = f1;
        s1 = s2;
        f1 = f(s1);
        if (s1 - s0).abs() < 1e-17 {
            break;
        }
    }
    &base + n * s1
}

/// Tangent basis at `x` orthogonal to the finite-difference normal.
pub fn fd_tangent(s: &Surface, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let n = fd_normal(s, x);
    v - &n * v.dot(&n)
}

fn chord(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (y - x).norm()
}

/// Second derivative of `L(·, y)` along `a`, `b` at `x` (polarized).
pub fn fd_hessian_x(s: &Surface, x: &DVector<f64>, y: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = fd_normal(s, x);
    let q = |xi: &DVector<f64>| {
        let h = FD_STEP;
        let p = surface_curve(s, x, &n, xi, h);
        let m = surface_curve(s, x, &n, xi, -h);
        (chord(&p, y) - 2.0 * chord(x, y) + chord(&m, y)) / (h * h)
    };
    (q(&(a + b)) - q(&(a - b))) / 4.0
}

/// Mixed derivative `∂²L/∂x∂y` along `a` at `x` and `b` at `y`.
pub fn fd_mixed(s: &Surface, x: &DVector<f64>, y: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let h = FD_STEP;
    let nx = fd_normal(s, x);
    let ny = fd_normal(s, y);
    let xp = surface_curve(s, x, &nx, a, h);
    let xm = surface_curve(s, x, &nx, a, -h);
    let yp = surface_curve(s, y, &ny, b, h);
    let ym = surface_curve(s, y, &ny, b, -h);
    (chord(&xp, &yp) - chord(&xp, &ym) - chord(&xm, &yp) + chord(&xm, &ym)) / (4.0 * h * h)
}

/// Finite-difference versions of `l11, l22, l12` in the given tangent bases.
pub fn fd_operators(
    s: &Surface,
    x: &DVector<f64>,
    y: &DVector<f64>,
    ex: &[DVector<f64>],
    ey: &[DVector<f64>],
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let k = ex.len();
    let l11 = DMatrix::from_fn(k, k, |i, j| fd_hessian_x(s, x, y, &ex[i], &ex[j]));
    let l22 = DMatrix::from_fn(k, k, |i, j| fd_hessian_x(s, y, x, &ey[i], &ey[j]));
    let l12 = DMatrix::from_fn(k, k, |i, j| fd_mixed(s, x, y, &ex[i], &ey[j]));
    (l11, l22, l12)
}

/// Total chord length of a polygon.
pub fn total_length(points: &[DVector<f64>]) -> f64 {
    points.windows(2).map(|w| chord(&w[0], &w[1])).sum()
}

/// Second difference of the total length when every interior vertex moves
/// along its surface curve with velocity `xi[k]`.
pub fn fd_second_variation(s: &Surface, points: &[DVector<f64>], xi: &[DVector<f64>]) -> f64 {
    let h = FD_STEP;
    let moved = |t: f64| {
        let mut p = points.to_vec();
        for (k, v) in xi.iter().enumerate() {
            let x = &points[k + 1];
            p[k + 1] = surface_curve(s, x, &fd_normal(s, x), v, t);
        }
        total_length(&p)
    };
    (moved(h) - 2.0 * total_length(points) + moved(-h)) / (h * h)
}

/// `(negative, zero, positive)` eigenvalue counts of `m - shift·I` from the
/// signs of an LDLᵀ factorization with symmetric 1×1 pivots.
pub fn ldl_inertia(m: &DMatrix<f64>, shift: f64) -> (usize, usize, usize) {
    let n = m.nrows();
    let mut a = m.clone() - DMatrix::identity(n, n) * shift;
    let (mut neg, mut zero, mut pos) = (0, 0, 0);
    let scale = m.amax().max(1.0);
    for k in 0..n {
        // largest remaining diagonal entry in magnitude as pivot
        let p = (k..n)
            .max_by(|&i, &j| a[(i, i)].abs().total_cmp(&a[(j, j)].abs()))
            .unwrap();
        a.swap_rows(k, p);
        a.swap_columns(k, p);
        let d = a[(k, k)];
        if d.abs() <= 1e-13 * scale {
            zero += 1;
            continue;
        }
        if d > 0.0 {
            pos += 1;
        } else {
            neg += 1;
        }
        for i in k + 1..n {
            let f = a[(i, k)] / d;
            for j in k + 1..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    (neg, zero, pos)
}

/// Uniform direction on the sphere `S^{d-1}` by rejection.
pub fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let u = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..=1.0));
        let r = u.norm();
        if r > 1e-2 && r <= 1.0 {
            return u / r;
        }
    }
}

/// Relative error `max |a - b| / max |b|`.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-300)
}
