//! Scripted numerical experiments with pass/fail checks.
//!
//! Each runner returns an [`ExperimentReport`] that can be written to an
//! output directory as `<name>.report.json` plus CSV artifacts.

mod flat_point;
mod lift;
mod sphere;
mod threshold;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::output::write_json;

pub use flat_point::ellipsoid_flat_point_check;
pub use lift::{caustic_orbit, curvature_bounds, symmetric_lift_check, CurvatureBounds};
pub use sphere::sphere_report;
pub use threshold::angle_threshold_estimate;

/// Seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 42;

/// Grid size for sampled curvature bounds.
pub const CURVATURE_GRID: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|observed - expected| <= tolerance`
    AbsDiff,
    /// `observed >= expected - tolerance`
    AtLeast,
    /// `observed <= expected + tolerance`
    AtMost,
    /// `observed > expected`
    GreaterThan,
    /// `observed < expected`
    LessThan,
    /// boolean check, `observed == 1`
    Holds,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub description: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    fn new(
        description: impl Into<String>,
        expected: f64,
        observed: f64,
        tolerance: f64,
        comparison: Comparison,
    ) -> Self {
        let pass = match comparison {
            Comparison::AbsDiff => (observed - expected).abs() <= tolerance,
            Comparison::AtLeast => observed >= expected - tolerance,
            Comparison::AtMost => observed <= expected + tolerance,
            Comparison::GreaterThan => observed > expected,
            Comparison::LessThan => observed < expected,
            Comparison::Holds => observed == 1.0,
        };
        Self {
            description: description.into(),
            expected,
            observed,
            tolerance,
            comparison,
            pass,
        }
    }

    pub fn close(description: impl Into<String>, expected: f64, observed: f64, tolerance: f64) -> Self {
        Self::new(description, expected, observed, tolerance, Comparison::AbsDiff)
    }

    pub fn at_least(description: impl Into<String>, bound: f64, observed: f64, tolerance: f64) -> Self {
        Self::new(description, bound, observed, tolerance, Comparison::AtLeast)
    }

    pub fn at_most(description: impl Into<String>, bound: f64, observed: f64, tolerance: f64) -> Self {
        Self::new(description, bound, observed, tolerance, Comparison::AtMost)
    }

    pub fn greater_than(description: impl Into<String>, bound: f64, observed: f64) -> Self {
        Self::new(description, bound, observed, 0.0, Comparison::GreaterThan)
    }

    pub fn less_than(description: impl Into<String>, bound: f64, observed: f64) -> Self {
        Self::new(description, bound, observed, 0.0, Comparison::LessThan)
    }

    pub fn holds(description: impl Into<String>, condition: bool) -> Self {
        Self::new(
            description,
            1.0,
            if condition { 1.0 } else { 0.0 },
            0.0,
            Comparison::Holds,
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub results: BTreeMap<String, Value>,
    pub passed: bool,
    #[serde(skip)]
    tables: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            parameters: BTreeMap::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
            results: BTreeMap::new(),
            passed: true,
            tables: Vec::new(),
        }
    }

    pub fn parameter(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn result(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.results.insert(key.to_string(), value.into());
        self
    }

    pub fn push(&mut self, check: Check) -> &mut Self {
        self.passed &= check.pass;
        self.checks.push(check);
        self
    }

    /// Queues a CSV table to be written next to the report.
    pub fn attach_csv(&mut self, file_name: &str, contents: String) -> &mut Self {
        self.tables.push((file_name.to_string(), contents));
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, description: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.description == description)
    }

    /// Writes the CSV tables and `<name>.report.json` into `dir`, returning
    /// the path of the JSON report.
    pub fn write(&mut self, dir: &Path) -> io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        for (file, contents) in &self.tables {
            fs::write(dir.join(file), contents)?;
            if !self.artifacts.contains(file) {
                self.artifacts.push(file.clone());
            }
        }
        self.passed = self.passed();
        let path = dir.join(format!("{}.report.json", self.name));
        write_json(&path, self)?;
        Ok(path)
    }
}
