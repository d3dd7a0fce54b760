use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{dvector, DMatrix, DVector};

use crate::dynamics::{orbit, PhasePoint};
use crate::error::{Error, Result};
use crate::experiments::{Check, ExperimentReport};
use crate::output::fmt_f64;
use crate::surface::Surface;
use crate::variation::{assemble_form, default_tolerance, definiteness, sorted_eigen, tridiagonal, Classification};

const BLOCK_TOLERANCE: f64 = 1e-8;
const KERNEL_EIGENVALUE: f64 = 1e-8;

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Second variation along the great-circle orbit of the unit sphere `S² ⊂ R³`
/// with constant reflection angle `alpha`, split into the transversal and
/// longitudinal line fields and compared with the closed-form tridiagonal
/// matrices for every `n = 1 … n_max`.
pub fn sphere_report(alpha: f64, n_max: usize) -> Result<ExperimentReport> {
    if !(alpha > 0.0 && alpha <= FRAC_PI_2) {
        return Err(Error::invalid("alpha", format!("{alpha} is not in (0, π/2]")));
    }
    if n_max == 0 {
        return Err(Error::invalid("n_max", "must be at least 1"));
    }
    let s = Surface::unit_sphere(3);
    let start = PhasePoint::from_angle(&s, dvector![0.0, 0.0, 1.0], &dvector![1.0, 0.0, 0.0], alpha)?;
    let full = orbit(&s, &start, n_max + 1)?;
    let normal_incidence = (FRAC_PI_2 - alpha).abs() < 1e-12;

    let sin = alpha.sin();
    let (ta, tb) = ((2.0 * alpha).cos() / sin, -0.5 / sin);
    // at normal incidence both line fields are "transversal" to a zero velocity
    let (la, lb) = if normal_incidence { (ta, tb) } else { (-sin, 0.5 * sin) };
    let e2: DVector<f64> = dvector![0.0, 1.0, 0.0];

    let mut trans_block_err: f64 = 0.0;
    let mut long_block_err: f64 = 0.0;
    let mut mixed_err: f64 = 0.0;
    let mut eigen_err: f64 = 0.0;
    let mut long_not_definite = Vec::new();
    let mut first_nonmax_observed = None;
    let mut first_nonmax_predicted = None;
    let mut kernel_lengths = Vec::new();
    let mut union_err: f64 = 0.0;
    let mut csv = String::from("n,k,transversal,transversal_closed_form,longitudinal\n");

    for n in 1..=n_max {
        let seg = full.prefix(n + 2)?;
        let form = assemble_form(&s, &seg)?;
        let trans: Vec<DVector<f64>> = vec![e2.clone(); n];
        let long: Vec<DVector<f64>> = if normal_incidence {
            vec![dvector![1.0, 0.0, 0.0]; n]
        } else {
            form.longitudinal_directions()
                .into_iter()
                .map(|d| d.ok_or_else(|| Error::invalid("alpha", "unexpected normal incidence")))
                .collect::<Result<_>>()?
        };
        let qt = form.restrict(&trans);
        let ql = form.restrict(&long);
        trans_block_err = trans_block_err.max(max_abs_diff(&qt, &tridiagonal(ta, tb, n)));
        long_block_err = long_block_err.max(max_abs_diff(&ql, &tridiagonal(la, lb, n)));
        mixed_err = mixed_err.max(form.restrict_pair(&trans, &long).amax());

        let (t_values, _) = sorted_eigen(&qt);
        let (l_values, _) = sorted_eigen(&ql);
        let mut closed: Vec<f64> = (1..=n)
            .map(|k| ta + 2.0 * tb * (k as f64 * PI / (n as f64 + 1.0)).cos())
            .collect();
        closed.sort_by(f64::total_cmp);
        for (k, (t, c)) in t_values.iter().zip(&closed).enumerate() {
            eigen_err = eigen_err.max((t - c).abs());
            csv.push_str(&format!(
                "{n},{},{},{},{}\n",
                k + 1,
                fmt_f64(*t),
                fmt_f64(*c),
                fmt_f64(l_values[k])
            ));
        }

        // the full spectrum is the union of the two line-field spectra
        let (full_values, _) = sorted_eigen(&form.matrix);
        let mut union: Vec<f64> = t_values.iter().chain(&l_values).copied().collect();
        union.sort_by(f64::total_cmp);
        for (a, b) in full_values.iter().zip(&union) {
            union_err = union_err.max((a - b).abs());
        }

        if definiteness(&ql, default_tolerance(&ql)).classification != Classification::NegativeDefinite {
            long_not_definite.push(n);
        }
        let classification = definiteness(&form.matrix, default_tolerance(&form.matrix)).classification;
        if first_nonmax_observed.is_none() && !classification.is_maximizing() {
            first_nonmax_observed = Some(n);
        }
        if first_nonmax_predicted.is_none() && closed[n - 1] > default_tolerance(&form.matrix) {
            first_nonmax_predicted = Some(n);
        }
        if t_values.iter().any(|l| l.abs() < KERNEL_EIGENVALUE) {
            kernel_lengths.push(n);
        }
    }

    let mut report = ExperimentReport::new("sphere");
    report
        .parameter("alpha", alpha)
        .parameter("n_max", n_max as u64)
        .result("transversal_diagonal", ta)
        .result("transversal_off_diagonal", tb)
        .result("longitudinal_diagonal", la)
        .result("longitudinal_off_diagonal", lb)
        .result("first_non_maximizing_n", first_nonmax_observed.map(|n| n as u64))
        .result(
            "transversal_kernel_n",
            kernel_lengths.iter().map(|&n| n as u64).collect::<Vec<_>>(),
        );
    report
        .push(Check::at_most(
            "transversal block matches closed form",
            0.0,
            trans_block_err,
            BLOCK_TOLERANCE,
        ))
        .push(Check::at_most(
            "longitudinal block matches closed form",
            0.0,
            long_block_err,
            BLOCK_TOLERANCE,
        ))
        .push(Check::at_most(
            "mixed transversal/longitudinal block vanishes",
            0.0,
            mixed_err,
            BLOCK_TOLERANCE,
        ))
        .push(Check::at_most(
            "transversal eigenvalues match a + 2b cos(kπ/(n+1))",
            0.0,
            eigen_err,
            BLOCK_TOLERANCE,
        ))
        .push(Check::at_most(
            "full spectrum is the union of both line fields",
            0.0,
            union_err,
            BLOCK_TOLERANCE,
        ))
        .push(Check::holds(
            "longitudinal form negative definite for every n",
            long_not_definite.is_empty(),
        ))
        .push(Check::close(
            "first non-maximizing n matches the closed-form spectrum",
            first_nonmax_predicted.map_or(0.0, |n| n as f64),
            first_nonmax_observed.map_or(0.0, |n| n as f64),
            0.0,
        ));
    report.attach_csv("sphere_spectrum.csv", csv);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    #[test]
    fn sixty_degrees() {
        let r = sphere_report(FRAC_PI_3, 4).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.results["first_non_maximizing_n"], 3);
        assert_eq!(r.results["transversal_kernel_n"][0], 2);
    }

    #[test]
    fn normal_incidence() {
        let r = sphere_report(FRAC_PI_2, 5).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        assert!(r.results["first_non_maximizing_n"].is_null());
    }

    #[test]
    fn invalid_alpha() {
        assert!(sphere_report(0.0, 3).is_err());
        assert!(sphere_report(2.0, 3).is_err());
    }
}
