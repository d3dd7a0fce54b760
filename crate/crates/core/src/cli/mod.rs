//! The `billiards` command line: configuration, dispatch and report output.
//!
//! Exit status is 0 on success, 1 when an experiment check fails and 2 for
//! configuration or runtime errors.

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

pub use config::{parse_config, parse_surface, Command, Experiment, RawConfig, RunConfig, Trajectory, SEED_VARIABLE};

use crate::dynamics::{orbit, PhasePoint};
use crate::error::{Error, Result};
use crate::experiments::{self, Check, ExperimentReport};
use crate::output::fmt_f64;
use crate::variation::{
    assemble_form, detect_conjugate, kernel_field, maximizer_set_sample, Classification, KERNEL_WINDOW,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "billiards",
    version,
    about = "Billiards in smooth strictly convex hypersurfaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<CommandArg>,

    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum CommandArg {
    /// Iterate the billiard map and write the orbit as CSV.
    Orbit,
    /// Assemble and classify the second variation along an orbit segment.
    Variation,
    /// Locate a conjugate point along a radial ray of the unit ball bundle.
    Conjugate,
    /// Classify the second variation on a polar grid of the unit ball.
    MaximizerScan,
    /// Run a scripted experiment.
    Experiment {
        #[command(subcommand)]
        which: ExperimentArg,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum ExperimentArg {
    Sphere,
    EllipsoidFlat,
    AngleThreshold,
    SymmetricLift,
}

impl ExperimentArg {
    fn name(self) -> &'static str {
        match self {
            ExperimentArg::Sphere => "sphere",
            ExperimentArg::EllipsoidFlat => "ellipsoid-flat",
            ExperimentArg::AngleThreshold => "angle-threshold",
            ExperimentArg::SymmetricLift => "symmetric-lift",
        }
    }
}

/// One flag per configuration field.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// `sphere[:R[:d]]`, `ellipsoid:a,b,c` or a JSON object.
    #[arg(long, global = true)]
    pub surface: Option<String>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,
    /// Reflection angle in (0, π/2].
    #[arg(long, global = true)]
    pub angle: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// `lo,hi` bounds on |v| for the conjugate-point search.
    #[arg(long, global = true, value_delimiter = ',')]
    pub search: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub directions: Option<usize>,
    #[arg(long, global = true)]
    pub radial_grid: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub semi_axes: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub angle_grid: Option<usize>,
    #[arg(long, global = true)]
    pub point_samples: Option<usize>,
    #[arg(long, global = true)]
    pub caustic_parameter: Option<f64>,
    #[arg(long, global = true)]
    pub n_bounces: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(short = 'o', long, global = true)]
    pub output_dir: Option<PathBuf>,
}

impl Cli {
    /// Merges the configuration file (if any) with the flags and validates.
    pub fn into_config(self) -> Result<RunConfig> {
        let mut raw = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::invalid("config", format!("{}: {e}", path.display())))?;
                serde_json::from_str::<RawConfig>(&text).map_err(|e| Error::invalid("config", e.to_string()))?
            }
            None => RawConfig::default(),
        };
        let f = self.flags;
        let (command, experiment) = match self.command {
            None => (None, None),
            Some(CommandArg::Orbit) => (Some("orbit"), None),
            Some(CommandArg::Variation) => (Some("variation"), None),
            Some(CommandArg::Conjugate) => (Some("conjugate"), None),
            Some(CommandArg::MaximizerScan) => (Some("maximizer-scan"), None),
            Some(CommandArg::Experiment { which }) => (Some("experiment"), Some(which.name())),
        };
        raw.overlay(RawConfig {
            surface: f.surface.as_deref().map(parse_surface).transpose()?,
            command: command.map(String::from),
            experiment: experiment.map(String::from),
            start: f.start,
            direction: f.direction,
            angle: f.angle,
            n: f.n,
            search: f.search,
            directions: f.directions,
            radial_grid: f.radial_grid,
            alpha: f.alpha,
            n_max: f.n_max,
            semi_axes: f.semi_axes,
            samples: f.samples,
            angle_grid: f.angle_grid,
            point_samples: f.point_samples,
            caustic_parameter: f.caustic_parameter,
            n_bounces: f.n_bounces,
            seed: f.seed,
            output_dir: f.output_dir,
        });
        raw.validate()
    }
}

/// Parses process arguments, runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.into_config() {
        Ok(config) => run(&config),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Executes a validated configuration, writes its files and returns the exit status.
pub fn run(config: &RunConfig) -> i32 {
    match execute(config) {
        Ok((report, path)) => {
            if report.passed() {
                println!("{}", path.display());
                EXIT_OK
            } else {
                for c in report.failures() {
                    eprintln!(
                        "FAIL {}: {}: expected {}, observed {}, tolerance {}",
                        report.name,
                        c.description,
                        fmt_f64(c.expected),
                        fmt_f64(c.observed),
                        fmt_f64(c.tolerance)
                    );
                }
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(index) = e.bounce_index() {
                eprintln!("failing index: {index}");
            }
            EXIT_ERROR
        }
    }
}

/// Runs the command and writes its report, returning it with the report path.
pub fn execute(config: &RunConfig) -> Result<(ExperimentReport, PathBuf)> {
    let mut report = match &config.command {
        Command::Orbit(t) => orbit_report(config, t)?,
        Command::Variation(t) => variation_report(config, t)?,
        Command::Conjugate {
            start,
            direction,
            n,
            search,
        } => conjugate_report(config, start, direction, *n, *search)?,
        Command::MaximizerScan {
            start,
            n,
            directions,
            radial_grid,
        } => maximizer_report(config, start, *n, *directions, *radial_grid)?,
        Command::Experiment(e) => experiment_report(config, e)?,
    };
    let path = write(&mut report, &config.output_dir)?;
    Ok((report, path))
}

fn write(report: &mut ExperimentReport, dir: &Path) -> Result<PathBuf> {
    report
        .write(dir)
        .map_err(|e| Error::invalid("output_dir", format!("{}: {e}", dir.display())))
}

fn vector(v: &nalgebra::DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn base_report(name: &str, config: &RunConfig) -> ExperimentReport {
    let mut r = ExperimentReport::new(name);
    r.parameter("surface", config.surface.to_json())
        .parameter("seed", config.seed);
    r
}

fn trajectory_parameters(r: &mut ExperimentReport, t: &Trajectory) {
    r.parameter("start", vector(&t.start))
        .parameter("direction", vector(&t.direction))
        .parameter("angle", t.angle)
        .parameter("n", t.n as u64);
}

fn orbit_report(config: &RunConfig, t: &Trajectory) -> Result<ExperimentReport> {
    let s = &config.surface;
    let p = PhasePoint::from_angle(s, t.start.clone(), &t.direction, t.angle)?;
    let seg = orbit(s, &p, t.n)?;
    let defect = (1..seg.len() - 1)
        .map(|k| seg.reflection_defect(s, k))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut r = base_report("orbit", config);
    trajectory_parameters(&mut r, t);
    r.result("bounces", seg.chords.len() as u64)
        .result("total_length", seg.chords.iter().map(|c| c.length).sum::<f64>());
    r.push(Check::at_most("reflection law at every bounce", 0.0, defect, 1e-10));
    r.attach_csv("orbit.csv", seg.to_csv_string());
    Ok(r)
}

fn variation_report(config: &RunConfig, t: &Trajectory) -> Result<ExperimentReport> {
    let s = &config.surface;
    let p = PhasePoint::from_angle(s, t.start.clone(), &t.direction, t.angle)?;
    let seg = orbit(s, &p, t.n + 1)?;
    let form = assemble_form(s, &seg)?;
    let report = form.definiteness(form.default_tolerance());
    let adjoint = form
        .operators
        .iter()
        .map(|o| o.adjointness_defect())
        .fold(0.0, f64::max);
    let residuals: Vec<f64> = report
        .kernel_basis
        .iter()
        .map(|k| kernel_field(&form, k).max_residual())
        .collect();
    let mut r = base_report("variation", config);
    trajectory_parameters(&mut r, t);
    r.result("eigenvalues", report.eigenvalues.clone())
        .result("classification", report.classification.as_str())
        .result("tolerance", report.tolerance)
        .result(
            "kernel_vectors",
            report.kernel_basis.iter().map(vector).collect::<Vec<_>>(),
        )
        .result("jacobi_residuals", residuals.clone())
        .result("orbit_csv", "variation_orbit.csv");
    r.push(Check::at_most("l12 transpose equals l21", 0.0, adjoint, 1e-10));
    r.push(Check::at_most(
        "kernel vectors solve the Jacobi recurrence",
        0.0,
        residuals.iter().cloned().fold(0.0, f64::max),
        KERNEL_WINDOW,
    ));
    r.attach_csv("variation_orbit.csv", seg.to_csv_string());
    Ok(r)
}

fn conjugate_report(
    config: &RunConfig,
    start: &nalgebra::DVector<f64>,
    direction: &nalgebra::DVector<f64>,
    n: usize,
    search: (f64, f64),
) -> Result<ExperimentReport> {
    let c = detect_conjugate(&config.surface, start, direction, n, search)?;
    let field = c.field.ambient(&c.form.segment);
    let ends = field[0].norm().max(field[field.len() - 1].norm());
    let mut r = base_report("conjugate", config);
    r.parameter("start", vector(start))
        .parameter("direction", vector(direction))
        .parameter("n", n as u64)
        .parameter("search", json!([search.0, search.1]));
    r.result("v_hat", c.v_hat())
        .result("speed", c.speed)
        .result("eigenvalue", c.eigenvalue)
        .result("lambda_min", c.eigenvalues[0])
        .result("eigenvalues", c.eigenvalues.clone())
        .result("jacobi_residuals", c.field.residuals.clone())
        .result("jacobi_field", field.iter().map(vector).collect::<Vec<_>>())
        .result("orbit_csv", "conjugate_orbit.csv");
    r.push(Check::at_most(
        "kernel eigenvalue",
        0.0,
        c.eigenvalue.abs(),
        KERNEL_WINDOW,
    ))
    .push(Check::at_most(
        "Jacobi residual",
        0.0,
        c.field.max_residual(),
        KERNEL_WINDOW,
    ))
    .push(Check::close("field vanishes at both ends", 0.0, ends, 0.0));
    r.attach_csv("conjugate_orbit.csv", c.form.segment.to_csv_string());
    Ok(r)
}

fn maximizer_report(
    config: &RunConfig,
    start: &nalgebra::DVector<f64>,
    n: usize,
    directions: usize,
    radial_grid: usize,
) -> Result<ExperimentReport> {
    let s = &config.surface;
    let short = maximizer_set_sample(s, start, n, directions, radial_grid)?;
    let long = maximizer_set_sample(s, start, n + 1, directions, radial_grid)?;
    let nesting = short.nesting(&long)?;
    let mut csv = String::from("direction,speed,v_hat,classification,max_eigenvalue,min_interior_sin\n");
    for sample in &short.samples {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sample.direction,
            fmt_f64(sample.speed),
            fmt_f64(sample.v_hat),
            sample.classification.map_or("unresolved", Classification::as_str),
            fmt_f64(sample.max_eigenvalue),
            fmt_f64(sample.min_interior_sin)
        ));
    }
    let mut r = base_report("maximizer-scan", config);
    r.parameter("start", vector(start))
        .parameter("n", n as u64)
        .parameter("directions", directions as u64)
        .parameter("radial_grid", radial_grid as u64);
    r.result(
        "boundary_points",
        short
            .boundary_points
            .iter()
            .map(|(j, v)| json!([j, v]))
            .collect::<Vec<_>>(),
    )
    .result("grazing_floor", short.grazing_floor)
    .result("unresolved", short.unresolved() as u64)
    .result("min_maximizing_v_hat", short.min_maximizing_v_hat())
    .result("nesting_compared", nesting.compared as u64);
    r.push(Check::close(
        "samples below the grazing floor",
        0.0,
        short.grazing_violations.len() as f64,
        0.0,
    ))
    .push(Check::close(
        "points maximizing at n + 1 but not at n",
        0.0,
        nesting.inclusion_violations.len() as f64,
        0.0,
    ))
    .push(Check::close(
        "points negative definite at n + 1 but not maximizing at n",
        0.0,
        nesting.definite_violations.len() as f64,
        0.0,
    ));
    r.attach_csv("maximizer_scan.csv", csv);
    Ok(r)
}

fn experiment_report(config: &RunConfig, e: &Experiment) -> Result<ExperimentReport> {
    match *e {
        Experiment::Sphere { alpha, n_max } => experiments::sphere_report(alpha, n_max),
        Experiment::EllipsoidFlat {
            semi_axes: [a1, a2, a3],
            samples,
        } => experiments::ellipsoid_flat_point_check(a1, a2, a3, samples, config.seed),
        Experiment::AngleThreshold {
            angle_grid,
            point_samples,
        } => experiments::angle_threshold_estimate(&config.surface, angle_grid, point_samples, config.seed),
        Experiment::SymmetricLift {
            semi_axes: [a, b, c],
            caustic_parameter,
            n_bounces,
        } => experiments::symmetric_lift_check(a, b, c, caustic_parameter, n_bounces),
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        fs::write(&file, r#"{"command":"orbit","n":3,"angle":0.3}"#).unwrap();
        let cli = Cli::try_parse_from(["billiards", "--config", file.to_str().unwrap(), "--n", "5"]).unwrap();
        let config = cli.into_config().unwrap();
        match config.command {
            Command::Orbit(t) => {
                assert_eq!(t.n, 5);
                assert_eq!(t.angle, 0.3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn experiment_subcommand_with_trailing_output_flag() {
        let cli = Cli::try_parse_from([
            "billiards",
            "experiment",
            "sphere",
            "--alpha",
            "1.0472",
            "--n-max",
            "4",
            "-o",
            "x",
        ])
        .unwrap();
        let config = cli.into_config().unwrap();
        assert_eq!(config.output_dir, PathBuf::from("x"));
        assert_eq!(
            config.command,
            Command::Experiment(Experiment::Sphere {
                alpha: 1.0472,
                n_max: 4
            })
        );
    }

    #[test]
    fn negative_direction_components_parse() {
        let cli = Cli::try_parse_from(["billiards", "orbit", "--direction", "-1,0,0"]).unwrap();
        assert_eq!(cli.flags.direction, Some(vec![-1.0, 0.0, 0.0]));
    }
}
