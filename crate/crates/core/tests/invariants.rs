mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use billiards::dynamics::{orbit, PhasePoint};
use billiards::variation::{assemble_form, definiteness, jacobi_propagate, kernel_field, one_bounce_form, OneBounce};
use billiards::Surface;
use nalgebra::{dvector, DVector};
use proptest::prelude::*;

fn unit(v: Vec<f64>) -> DVector<f64> {
    let v = DVector::from_vec(v);
    let n = v.norm();
    v / n
}

fn direction3() -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3)
        .prop_filter("nonzero", |v| v.iter().map(|c| c * c).sum::<f64>() > 1e-2)
        .prop_map(unit)
}

fn ellipsoid3() -> impl Strategy<Value = Surface> {
    prop::collection::vec(0.6f64..1.6, 3).prop_map(|a| Surface::ellipsoid(&a).unwrap())
}

/// Reflected one-bounce triple through `x` at angle `phi` along tangent `t`.
fn triple(s: &Surface, x: &DVector<f64>, t: &DVector<f64>, phi: f64) -> (DVector<f64>, DVector<f64>) {
    let n = s.inward_normal(x).unwrap();
    let (x1, _) = s.intersect_ray(x, &(t * phi.cos() + &n * phi.sin())).unwrap();
    let (xp, _) = s.intersect_ray(x, &(t * -phi.cos() + &n * phi.sin())).unwrap();
    (xp, x1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn second_fundamental_form_is_positive(s in ellipsoid3(), u in direction3(), w in direction3()) {
        let x = s.radial_point(&u).unwrap();
        let n = s.inward_normal(&x).unwrap();
        let xi = &w - &n * w.dot(&n);
        prop_assume!(xi.norm() > 1e-3);
        prop_assert!(s.second_fundamental_form(&x, &xi).unwrap() > 0.0);
    }

    #[test]
    fn tangent_frames_are_orthonormal(s in ellipsoid3(), u in direction3()) {
        let x = s.radial_point(&u).unwrap();
        let f = s.tangent_frame(&x).unwrap();
        let n = s.inward_normal(&x).unwrap();
        let m = f.matrix();
        let gram = m.transpose() * &m;
        prop_assert!((gram - nalgebra::DMatrix::identity(2, 2)).amax() < 1e-12);
        prop_assert!((m.transpose() * n).amax() < 1e-12);
        prop_assert_eq!(f, s.tangent_frame(&x).unwrap());
    }

    #[test]
    fn orbits_obey_reflection_and_reverse(
        s in ellipsoid3(), u in direction3(), dir in direction3(), phi in 0.2f64..FRAC_PI_2, n in 2usize..12
    ) {
        let x = s.radial_point(&u).unwrap();
        let p = PhasePoint::from_angle(&s, x, &dir, phi).unwrap();
        let seg = orbit(&s, &p, n).unwrap();
        for y in &seg.points {
            prop_assert!(s.eval(y).abs() < 1e-9);
        }
        for q in &seg.phases {
            prop_assert!(q.v.norm() < 1.0);
            prop_assert!((q.v.norm_squared() + q.v_hat * q.v_hat - 1.0).abs() < 1e-12);
        }
        seg.check_reflection_law(&s, 1e-9).unwrap();
        let back = orbit(&s, &seg.reverse_start(), n).unwrap();
        for (a, b) in back.points.iter().zip(seg.points.iter().rev()) {
            prop_assert!((a - b).norm() < 1e-7);
        }
    }

    #[test]
    fn adjointness_and_form_symmetry(
        s in ellipsoid3(), u in direction3(), dir in direction3(), phi in 0.2f64..FRAC_PI_2, m in 1usize..6
    ) {
        let x = s.radial_point(&u).unwrap();
        let p = PhasePoint::from_angle(&s, x, &dir, phi).unwrap();
        let form = assemble_form(&s, &orbit(&s, &p, m + 1).unwrap()).unwrap();
        for ops in &form.operators {
            prop_assert!(ops.adjointness_defect() <= 1e-10);
        }
        prop_assert!((&form.matrix - form.matrix.transpose()).amax() <= 1e-10);
    }

    #[test]
    fn shorter_form_is_a_principal_submatrix(
        s in ellipsoid3(), u in direction3(), dir in direction3(), phi in 0.2f64..FRAC_PI_2, m in 1usize..6
    ) {
        let x = s.radial_point(&u).unwrap();
        let p = PhasePoint::from_angle(&s, x, &dir, phi).unwrap();
        let long = orbit(&s, &p, m + 2).unwrap();
        let a = assemble_form(&s, &long.prefix(m + 2).unwrap()).unwrap();
        let b = assemble_form(&s, &long).unwrap();
        let k = a.matrix.nrows();
        prop_assert_eq!(a.matrix.clone(), b.matrix.view((0, 0), (k, k)).into_owned());
    }

    #[test]
    fn one_bounce_formula_matches_matrix(s in ellipsoid3(), u in direction3(), w in direction3(), phi in 0.1f64..FRAC_PI_2) {
        let x = s.radial_point(&u).unwrap();
        let f = s.tangent_frame(&x).unwrap();
        let t = f.ambient(&f.coords(&w));
        prop_assume!(t.norm() > 1e-2);
        let t = &t / t.norm();
        let (xp, x1) = triple(&s, &x, &t, phi);
        let ob = OneBounce::new(&s, &xp, &x, &x1).unwrap();
        for xi in &f.vectors {
            let direct = one_bounce_form(&s, &xp, &x, &x1, xi).unwrap();
            prop_assert!((direct - ob.value(xi)).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn sphere_one_bounce_closed_forms(alpha in 0.05f64..FRAC_PI_2 - 1e-3, theta in 0.0f64..2.0 * PI) {
        let s = Surface::unit_sphere(3);
        let x = dvector![0.0, 0.0, 1.0];
        let t = dvector![theta.cos(), theta.sin(), 0.0];
        let perp = dvector![-theta.sin(), theta.cos(), 0.0];
        let (xp, x1) = triple(&s, &x, &t, alpha);
        let transversal = one_bounce_form(&s, &xp, &x, &x1, &perp).unwrap();
        let longitudinal = one_bounce_form(&s, &xp, &x, &x1, &t).unwrap();
        prop_assert!((transversal - (2.0 * alpha).cos() / alpha.sin()).abs() < 1e-12);
        prop_assert!((longitudinal + alpha.sin()).abs() < 1e-12);
        if alpha < FRAC_PI_4 {
            prop_assert!(transversal > 0.0 && longitudinal < 0.0);
        }
    }

    #[test]
    fn transversal_values_clear_the_diameter_bound(
        a1 in 0.2f64..0.5, a2 in 0.9f64..1.1, a3 in 1.1f64..1.3, phi in 0.05f64..FRAC_PI_2, theta in 0.0f64..2.0 * PI
    ) {
        prop_assume!(2.0 * a1 * a3 < a2 * a2);
        let s = Surface::ellipsoid(&[a1, a2, a3]).unwrap();
        let x = dvector![a1, 0.0, 0.0];
        let k_max = a1 / (a2 * a2);
        prop_assume!(k_max * s.diameter_bound() < 1.0);
        let t = dvector![0.0, theta.cos(), theta.sin()];
        let perp = dvector![0.0, -theta.sin(), theta.cos()];
        let (xp, x1) = triple(&s, &x, &t, phi);
        let value = one_bounce_form(&s, &xp, &x, &x1, &perp).unwrap();
        prop_assert!(value >= 2.0 / s.diameter_bound() - 2.0 * k_max - 1e-12);
    }

    #[test]
    fn sphere_kernels_are_jacobi_fields(n in 2usize..9, k in 1usize..9) {
        prop_assume!(k <= n && 2 * k > n + 1);
        // cos 2α = -cos(kπ/(n+1)) puts a zero transversal eigenvalue in δ²Φ_{1,n}
        let alpha = 0.5 * (PI - k as f64 * PI / (n as f64 + 1.0));
        let s = Surface::unit_sphere(3);
        let p = PhasePoint::from_angle(&s, dvector![0.0, 0.0, 1.0], &dvector![1.0, 0.0, 0.0], alpha).unwrap();
        let seg = orbit(&s, &p, n + 1).unwrap();
        let form = assemble_form(&s, &seg).unwrap();
        let report = definiteness(&form.matrix, 1e-8);
        prop_assert!(!report.kernel_basis.is_empty());
        for kernel in &report.kernel_basis {
            let field = kernel_field(&form, kernel);
            prop_assert!(field.max_residual() < 1e-6);
            let propagated = jacobi_propagate(&s, &seg, &DVector::zeros(2), &field.vectors[1]).unwrap();
            for (a, b) in propagated.vectors.iter().zip(&field.vectors) {
                prop_assert!((a - b).amax() < 1e-6);
            }
        }
    }
}
