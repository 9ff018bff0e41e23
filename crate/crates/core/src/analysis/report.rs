use serde::Serialize;

/// Labelled `(x, y)` data attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            x,
            y,
        }
    }
}

/// Outcome of one check in the form written to JSON reports.
///
/// `margin` is signed so that the check passes iff `margin ≥ −tolerance`, unless a
/// report says otherwise in its name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub tolerance: f64,
    pub evidence_series: Vec<Series>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, margin: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            pass: margin >= -tolerance,
            margin,
            tolerance,
            evidence_series: Vec::new(),
        }
    }

    pub fn with_series(mut self, s: Series) -> Self {
        self.evidence_series.push(s);
        self
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }
}
