use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};
use std::path::PathBuf;

use nalgebra::DVector;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::DEFAULT_SEED;
use crate::surface::{Point, Surface};

/// Environment variable replacing the default seed.
pub const SEED_VARIABLE: &str = "BILLIARDS_SEED";

/// Unvalidated configuration as read from JSON or assembled from flags.
/// Every field is optional; [`RawConfig::validate`] fills defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub surface: Option<Value>,
    pub command: Option<String>,
    pub experiment: Option<String>,
    pub start: Option<Vec<f64>>,
    pub direction: Option<Vec<f64>>,
    pub angle: Option<f64>,
    pub n: Option<usize>,
    pub search: Option<Vec<f64>>,
    pub directions: Option<usize>,
    pub radial_grid: Option<usize>,
    pub alpha: Option<f64>,
    pub n_max: Option<usize>,
    pub semi_axes: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub angle_grid: Option<usize>,
    pub point_samples: Option<usize>,
    pub caustic_parameter: Option<f64>,
    pub n_bounces: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl RawConfig {
    /// Fields set in `other` replace the ones here.
    pub fn overlay(&mut self, other: RawConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $(if other.$f.is_some() { self.$f = other.$f; })* };
        }
        take!(
            surface,
            command,
            experiment,
            start,
            direction,
            angle,
            n,
            search,
            directions,
            radial_grid,
            alpha,
            n_max,
            semi_axes,
            samples,
            angle_grid,
            point_samples,
            caustic_parameter,
            n_bounces,
            seed,
            output_dir
        );
    }

    pub fn validate(self) -> Result<RunConfig> {
        let surface = match &self.surface {
            Some(v) => Surface::from_json(v)?,
            None => Surface::unit_sphere(3),
        };
        let command_name = self
            .command
            .as_deref()
            .ok_or_else(|| Error::invalid("command", "missing"))?;
        let n = |default: usize| -> Result<usize> {
            let n = self.n.unwrap_or(default);
            if n == 0 {
                return Err(Error::invalid("n", "must be at least 1"));
            }
            Ok(n)
        };
        let command = match command_name {
            "orbit" | "variation" => {
                let start = start_point(&surface, self.start.as_deref())?;
                let direction = direction(&surface, &start, self.direction.as_deref())?;
                let angle = self.angle.unwrap_or(FRAC_PI_4);
                if !(angle > 0.0 && angle <= FRAC_PI_2) {
                    return Err(Error::invalid("angle", format!("{angle} is not in (0, π/2]")));
                }
                let trajectory = Trajectory {
                    start,
                    direction,
                    angle,
                    n: n(10)?,
                };
                if command_name == "orbit" {
                    Command::Orbit(trajectory)
                } else {
                    Command::Variation(trajectory)
                }
            }
            "conjugate" => {
                let start = start_point(&surface, self.start.as_deref())?;
                let direction = direction(&surface, &start, self.direction.as_deref())?;
                let search = match self.search.as_deref() {
                    None => (1e-3, 0.999),
                    Some([lo, hi]) if 0.0 <= *lo && lo < hi && *hi < 1.0 => (*lo, *hi),
                    Some(other) => {
                        return Err(Error::invalid(
                            "search",
                            format!("{other:?} is not an interval inside [0, 1)"),
                        ))
                    }
                };
                Command::Conjugate {
                    start,
                    direction,
                    n: n(2)?,
                    search,
                }
            }
            "maximizer-scan" => {
                let start = start_point(&surface, self.start.as_deref())?;
                let directions = at_least("directions", self.directions.unwrap_or(8), 2)?;
                let radial_grid = at_least("radial_grid", self.radial_grid.unwrap_or(64), 2)?;
                Command::MaximizerScan {
                    start,
                    n: n(2)?,
                    directions,
                    radial_grid,
                }
            }
            "experiment" => Command::Experiment(self.experiment()?),
            other => return Err(Error::invalid("command", format!("unknown command: {other}"))),
        };
        let seed = match self.seed {
            Some(s) => s,
            None => seed_from_env()?,
        };
        Ok(RunConfig {
            surface,
            command,
            seed,
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        })
    }

    fn experiment(&self) -> Result<Experiment> {
        let name = self
            .experiment
            .as_deref()
            .ok_or_else(|| Error::invalid("experiment", "missing"))?;
        Ok(match name {
            "sphere" => {
                let alpha = self.alpha.unwrap_or(FRAC_PI_3);
                if !(alpha > 0.0 && alpha <= FRAC_PI_2) {
                    return Err(Error::invalid("alpha", format!("{alpha} is not in (0, π/2]")));
                }
                Experiment::Sphere {
                    alpha,
                    n_max: at_least("n_max", self.n_max.unwrap_or(10), 1)?,
                }
            }
            "ellipsoid-flat" => Experiment::EllipsoidFlat {
                semi_axes: three("semi_axes", self.semi_axes.as_deref(), [0.3, 1.0, 1.2])?,
                samples: at_least("samples", self.samples.unwrap_or(200), 1)?,
            },
            "angle-threshold" => Experiment::AngleThreshold {
                angle_grid: at_least("angle_grid", self.angle_grid.unwrap_or(64), 8)?,
                point_samples: at_least("point_samples", self.point_samples.unwrap_or(16), 1)?,
            },
            "symmetric-lift" => {
                let semi_axes = three("semi_axes", self.semi_axes.as_deref(), [1.5, 1.0, 0.2])?;
                let lambda = self.caustic_parameter.unwrap_or(0.5);
                let limit = semi_axes[0].min(semi_axes[1]).powi(2);
                if !(lambda > 0.0 && lambda < limit) {
                    return Err(Error::invalid(
                        "caustic_parameter",
                        format!("{lambda} is not in (0, {limit})"),
                    ));
                }
                Experiment::SymmetricLift {
                    semi_axes,
                    caustic_parameter: lambda,
                    n_bounces: at_least("n_bounces", self.n_bounces.unwrap_or(30), 2)?,
                }
            }
            other => return Err(Error::invalid("experiment", format!("unknown experiment: {other}"))),
        })
    }
}

fn at_least(name: &str, value: usize, min: usize) -> Result<usize> {
    if value < min {
        return Err(Error::invalid(name, format!("must be at least {min}, got {value}")));
    }
    Ok(value)
}

fn three(name: &str, value: Option<&[f64]>, default: [f64; 3]) -> Result<[f64; 3]> {
    match value {
        None => Ok(default),
        Some([a, b, c]) if [a, b, c].iter().all(|v| **v > 0.0 && v.is_finite()) => Ok([*a, *b, *c]),
        Some(other) => Err(Error::invalid(
            name,
            format!("expected three positive numbers, got {other:?}"),
        )),
    }
}

fn start_point(surface: &Surface, start: Option<&[f64]>) -> Result<Point> {
    let d = surface.dimension();
    let x = match start {
        Some(s) => DVector::from_column_slice(s),
        None => {
            let mut axis = DVector::zeros(d);
            axis[d - 1] = 1.0;
            surface.radial_point(&axis)?
        }
    };
    if x.len() != d {
        return Err(Error::invalid(
            "start",
            format!("expected {d} coordinates, got {}", x.len()),
        ));
    }
    surface
        .inward_normal(&x)
        .map_err(|e| Error::invalid("start", e.to_string()))?;
    Ok(x)
}

fn direction(surface: &Surface, x: &Point, direction: Option<&[f64]>) -> Result<DVector<f64>> {
    match direction {
        None => Ok(surface.tangent_frame(x)?.vectors[0].clone()),
        Some(v) => {
            let v = DVector::from_column_slice(v);
            crate::dynamics::unit_tangent(surface, x, &v).map_err(|e| Error::invalid("direction", e.to_string()))
        }
    }
}

fn seed_from_env() -> Result<u64> {
    match std::env::var(SEED_VARIABLE) {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| Error::invalid(SEED_VARIABLE, format!("{text:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Parses a `--surface` flag: `sphere[:R[:d]]`, `ellipsoid:a,b,...` or a JSON object.
pub fn parse_surface(text: &str) -> Result<Value> {
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| Error::invalid("surface", format!("malformed JSON: {e}")));
    }
    let mut parts = text.splitn(2, ':');
    let kind = parts.next().unwrap_or_default();
    let rest = parts.next();
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::invalid("surface", format!("{s:?} is not a number")))
    };
    match kind {
        "sphere" => {
            let mut fields = rest.unwrap_or("1").split(':');
            let radius = number(fields.next().unwrap_or("1"))?;
            let dimension = match fields.next() {
                None => 3,
                Some(d) => d
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid("surface.dimension", format!("{d:?} is not an integer")))?,
            };
            Ok(json!({"kind": "sphere", "radius": radius, "dimension": dimension}))
        }
        "ellipsoid" => {
            let axes = rest
                .ok_or_else(|| Error::invalid("surface.semi_axes", "missing"))?
                .split(',')
                .map(number)
                .collect::<Result<Vec<_>>>()?;
            Ok(json!({"kind": "ellipsoid", "semi_axes": axes}))
        }
        other => Err(Error::invalid("surface.kind", format!("unknown surface kind: {other}"))),
    }
}

/// Parses and validates a JSON configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::invalid("config", format!("malformed JSON: {e}")))?;
    // the surface is checked first so its diagnostics win over missing fields
    if let Some(surface) = value.get("surface") {
        Surface::from_json(surface)?;
    }
    let raw: RawConfig = serde_json::from_value(value).map_err(|e| Error::invalid("config", e.to_string()))?;
    raw.validate()
}

/// A fully validated run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub surface: Surface,
    pub command: Command,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub start: Point,
    /// Unit tangent direction at `start`.
    pub direction: DVector<f64>,
    pub angle: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Orbit(Trajectory),
    Variation(Trajectory),
    Conjugate {
        start: Point,
        direction: DVector<f64>,
        n: usize,
        search: (f64, f64),
    },
    MaximizerScan {
        start: Point,
        n: usize,
        directions: usize,
        radial_grid: usize,
    },
    Experiment(Experiment),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    Sphere {
        alpha: f64,
        n_max: usize,
    },
    EllipsoidFlat {
        semi_axes: [f64; 3],
        samples: usize,
    },
    AngleThreshold {
        angle_grid: usize,
        point_samples: usize,
    },
    SymmetricLift {
        semi_axes: [f64; 3],
        caustic_parameter: f64,
        n_bounces: usize,
    },
}
