//! Pass/fail records shared by runs and suites.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::DiagnosticSeries;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: &str, value: f64, comparison: Comparison, threshold: f64) -> Self {
        let passed = match comparison {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
            Comparison::Below => value < threshold,
        };
        Self {
            name: name.to_string(),
            value,
            comparison,
            threshold,
            passed,
            detail: None,
        }
    }

    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Comparison::AtMost, threshold)
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Comparison::AtLeast, threshold)
    }

    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, Comparison::Below, threshold)
    }

    /// A boolean outcome, recorded as `1 >= 1` or `0 >= 1`.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn line(&self) -> String {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
            Comparison::Below => "<",
        };
        let mut s = format!(
            "{} {}: {:.6e} {} {:.6e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            op,
            self.threshold
        );
        if let Some(d) = &self.detail {
            s.push_str(&format!(" ({d})"));
        }
        s
    }
}

/// Rows `time,name,value` with 17 significant digits.
pub fn write_csv(path: &Path, series: &[&DiagnosticSeries]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "time,name,value")?;
    for s in series {
        for (t, v) in s.times.iter().zip(&s.values) {
            writeln!(out, "{t:.16e},{},{v:.16e}", s.name)?;
        }
    }
    out.flush()?;
    Ok(())
}
