//! Experiment records whose verdict is recomputable from the stored series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fit::{fit_rate, RateFit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
    Inconclusive,
}

impl Verdict {
    /// Only `Fail` counts against a run.
    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "N/A",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        f.write_str(s)
    }
}

/// How the checks of a report are turned into a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Assert,
    /// Checks are recorded but the outcome is reported as inconclusive.
    Inconclusive,
    /// The experiment has nothing to measure (e.g. zero data).
    NotApplicable,
}

/// Table of samples `t, value, value2, ...`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesTable {
    pub t: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new(width: usize) -> Self {
        Self { t: Vec::new(), columns: vec![Vec::new(); width] }
    }

    pub fn push(&mut self, t: f64, values: &[f64]) {
        assert_eq!(values.len(), self.columns.len());
        self.t.push(t);
        for (c, v) in self.columns.iter_mut().zip(values) {
            c.push(*v);
        }
    }

    pub fn pairs(&self, column: usize) -> Vec<(f64, f64)> {
        self.t.iter().copied().zip(self.columns[column].iter().copied()).collect()
    }

    fn window(&self, column: usize, window: (f64, f64)) -> Vec<(f64, f64)> {
        let (lo, hi) = window;
        self.pairs(column)
            .into_iter()
            .filter(|(t, _)| *t >= lo * (1.0 - 1e-12) && *t <= hi * (1.0 + 1e-12))
            .collect()
    }

    /// Header names: `t,value,value2,...`.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for i in 0..self.columns.len() {
            h.push(if i == 0 { "value".into() } else { format!("value{}", i + 1) });
        }
        h
    }
}

/// Declarative pass condition over a [`SeriesTable`] or a stored scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// `|slope - target| ≤ rel_tol |target|` and `rms ≤ max_rms`.
    Slope { column: usize, window: (f64, f64), target: f64, rel_tol: f64, max_rms: f64 },
    /// `lo ≤ slope ≤ hi` and `rms ≤ max_rms`.
    SlopeRange { column: usize, window: (f64, f64), lo: f64, hi: f64, max_rms: f64 },
    /// Last over first sample in the window is at most `max_ratio`.
    RatioAtMost { column: usize, window: (f64, f64), max_ratio: f64 },
    /// Last over first sample in the window is at least `min_ratio`.
    RatioAtLeast { column: usize, window: (f64, f64), min_ratio: f64 },
    /// Consecutive samples never increase (relative slack `slack`).
    NonIncreasing { column: usize, window: (f64, f64), slack: f64 },
    /// Consecutive samples strictly increase.
    StrictlyIncreasing { column: usize, window: (f64, f64) },
    /// Max over min of the column in the window is at most `max_factor`.
    SpreadAtMost { column: usize, window: (f64, f64), max_factor: f64 },
    /// Every sample of the column lies in `[lo, hi]`.
    Bounded { column: usize, lo: f64, hi: f64 },
    /// Stored scalar lies in `[lo, hi]`.
    Scalar { name: String, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub rule: Rule,
    pub passed: bool,
    /// Non-finite values are written as `null`.
    #[serde(deserialize_with = "nullable_f64")]
    pub measured: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn first_last(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    match (pts.first(), pts.last()) {
        (Some(a), Some(b)) if pts.len() >= 2 => Ok((a.1, b.1)),
        _ => Err(Error::Degenerate("fewer than two samples in window".into())),
    }
}

impl Rule {
    /// Evaluates the rule; evaluation errors count as failures.
    pub fn evaluate(&self, label: &str, table: &SeriesTable, scalars: &BTreeMap<String, f64>) -> Check {
        let mut fit = None;
        let outcome: Result<(bool, f64)> = (|| match self {
            Rule::Slope { column, window, target, rel_tol, max_rms } => {
                let f = fit_rate(&table.pairs(*column), *window)?;
                fit = Some(f);
                Ok(((f.slope - target).abs() <= rel_tol * target.abs() && f.rms_residual <= *max_rms, f.slope))
            }
            Rule::SlopeRange { column, window, lo, hi, max_rms } => {
                let f = fit_rate(&table.pairs(*column), *window)?;
                fit = Some(f);
                Ok((f.slope >= *lo && f.slope <= *hi && f.rms_residual <= *max_rms, f.slope))
            }
            Rule::RatioAtMost { column, window, max_ratio } => {
                let (a, b) = first_last(&table.window(*column, *window))?;
                let ratio = b / a;
                Ok((ratio <= *max_ratio, ratio))
            }
            Rule::RatioAtLeast { column, window, min_ratio } => {
                let (a, b) = first_last(&table.window(*column, *window))?;
                let ratio = b / a;
                Ok((ratio >= *min_ratio, ratio))
            }
            Rule::NonIncreasing { column, window, slack } => {
                let pts = table.window(*column, *window);
                let worst = pts
                    .windows(2)
                    .map(|w| (w[1].1 - w[0].1) / w[0].1.abs().max(f64::MIN_POSITIVE))
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok((pts.len() >= 2 && worst <= *slack, worst))
            }
            Rule::StrictlyIncreasing { column, window } => {
                let pts = table.window(*column, *window);
                let worst = pts.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::INFINITY, f64::min);
                Ok((pts.len() >= 2 && worst > 0.0, worst))
            }
            Rule::SpreadAtMost { column, window, max_factor } => {
                let pts = table.window(*column, *window);
                let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
                Ok((pts.len() >= 2 && spread <= *max_factor, spread))
            }
            Rule::Bounded { column, lo, hi } => {
                let col = &table.columns[*column];
                let worst = col.iter().copied().fold(f64::NEG_INFINITY, |m, v| {
                    if v < *lo || v > *hi || v.is_nan() {
                        f64::INFINITY
                    } else {
                        m.max(v)
                    }
                });
                Ok((worst.is_finite() || col.is_empty(), worst))
            }
            Rule::Scalar { name, lo, hi } => {
                let v = *scalars.get(name).ok_or_else(|| Error::Config(format!("missing scalar {name}")))?;
                Ok((v >= *lo && v <= *hi, v))
            }
        })();
        match outcome {
            Ok((passed, measured)) => Check { label: label.into(), rule: self.clone(), passed, measured, fit, error: None },
            Err(e) => Check {
                label: label.into(),
                rule: self.clone(),
                passed: false,
                measured: f64::NAN,
                fit,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Record of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub experiment: String,
    /// Effective parameters, echoed for reproducibility.
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub theoretical_exponent: Option<f64>,
    /// Fit of the primary rate, when there is one.
    pub fit: Option<RateFit>,
    /// Relative slope tolerance of the primary rate.
    pub tolerance: Option<f64>,
    pub mode: Mode,
    /// Meaning of `value`, `value2`, ... in the series file.
    pub columns: Vec<String>,
    #[serde(skip)]
    pub series: SeriesTable,
    pub scalars: BTreeMap<String, f64>,
    pub rules: Vec<(String, Rule)>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub series_file: Option<String>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(id: impl Into<String>, experiment: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            experiment: experiment.into(),
            parameters: BTreeMap::new(),
            theoretical_exponent: None,
            fit: None,
            tolerance: None,
            mode: Mode::Assert,
            columns: Vec::new(),
            series: SeriesTable::default(),
            scalars: BTreeMap::new(),
            rules: Vec::new(),
            checks: Vec::new(),
            verdict: Verdict::Inconclusive,
            series_file: None,
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters.insert(key.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn with_series(mut self, columns: &[&str], table: SeriesTable) -> Self {
        assert_eq!(columns.len(), table.columns.len());
        self.columns = columns.iter().map(|c| c.to_string()).collect();
        self.series = table;
        self
    }

    pub fn scalar(mut self, name: &str, value: f64) -> Self {
        self.scalars.insert(name.into(), value);
        self
    }

    pub fn rule(mut self, label: &str, rule: Rule) -> Self {
        self.rules.push((label.into(), rule));
        self
    }

    /// Declares the primary rate; the matching `Slope` rule must be added separately.
    pub fn primary(mut self, theoretical: f64, tolerance: f64) -> Self {
        self.theoretical_exponent = Some(theoretical);
        self.tolerance = Some(tolerance);
        self
    }

    pub fn mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    /// Evaluates every rule and sets the verdict.
    pub fn finish(mut self) -> Self {
        self.checks = evaluate(&self.rules, &self.series, &self.scalars);
        self.verdict = verdict_of(self.mode, &self.checks);
        let target = self.theoretical_exponent;
        self.fit = self
            .checks
            .iter()
            .filter_map(|c| match (&c.rule, c.fit) {
                (Rule::Slope { target: t, .. }, Some(f)) if Some(*t) == target => Some(f),
                _ => None,
            })
            .next()
            .or_else(|| self.checks.iter().find_map(|c| c.fit));
        self
    }

    /// Verdict recomputed from a series table, e.g. one read back from CSV.
    pub fn recompute(&self, table: &SeriesTable) -> Verdict {
        verdict_of(self.mode, &evaluate(&self.rules, table, &self.scalars))
    }
}

pub fn evaluate(rules: &[(String, Rule)], table: &SeriesTable, scalars: &BTreeMap<String, f64>) -> Vec<Check> {
    rules.iter().map(|(label, rule)| rule.evaluate(label, table, scalars)).collect()
}

pub fn verdict_of(mode: Mode, checks: &[Check]) -> Verdict {
    match mode {
        Mode::NotApplicable => Verdict::NotApplicable,
        Mode::Inconclusive => Verdict::Inconclusive,
        Mode::Assert if checks.iter().all(|c| c.passed) => Verdict::Pass,
        Mode::Assert => Verdict::Fail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::fit::log_times;

    fn table() -> SeriesTable {
        let mut t = SeriesTable::new(2);
        for s in log_times(10.0, 1e4, 16) {
            t.push(s, &[3.0 * s.powf(-2.5), s.powf(0.1)]);
        }
        t
    }

    #[test]
    fn verdict_follows_rules() {
        let r = Report::new("x", "test")
            .with_series(&["a", "b"], table())
            .primary(-2.5, 0.1)
            .rule("rate", Rule::Slope { column: 0, window: (10.0, 1e4), target: -2.5, rel_tol: 0.1, max_rms: 0.1 })
            .rule("grows", Rule::StrictlyIncreasing { column: 1, window: (10.0, 1e4) })
            .finish();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.fit.unwrap().slope + 2.5).abs() < 1e-12);
        let r = r.rule("decays", Rule::RatioAtMost { column: 1, window: (10.0, 1e4), max_ratio: 0.2 }).finish();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.recompute(&r.series), Verdict::Fail);
    }

    #[test]
    fn modes_override() {
        let r = Report::new("x", "test").with_series(&["a", "b"], table()).mode(Mode::NotApplicable).finish();
        assert_eq!(r.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn missing_scalar_fails() {
        let r = Report::new("x", "test").rule("s", Rule::Scalar { name: "nope".into(), lo: 0.0, hi: 1.0 }).finish();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.checks[0].error.is_some());
    }
}
