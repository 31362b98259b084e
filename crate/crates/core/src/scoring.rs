//! Error points, Translation Quality Index and grades.
//!
//! `TQI = 100 − 100 · points / words`, clamped at 0. Everything here is
//! generic over [`Scalar`]; use the exact [`crate::Rational`] aliases at the
//! crate root for reproducible results.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{word_count, MarkedDocument, Severity, Taxonomy, Violation};
use crate::scalar::{literal, Scalar};

/// Points per severity, used when no override matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SeverityPoints<T> {
    #[serde(with = "literal")]
    pub minor: T,
    #[serde(with = "literal")]
    pub major: T,
    #[serde(with = "literal")]
    pub critical: T,
}

impl<T: Scalar> SeverityPoints<T> {
    pub fn get(&self, severity: Severity) -> &T {
        match severity {
            Severity::Minor => &self.minor,
            Severity::Major => &self.major,
            Severity::Critical => &self.critical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WeightOverride<T> {
    pub category: String,
    pub severity: Severity,
    #[serde(with = "literal")]
    pub points: T,
}

/// Error-point matrix: per-severity defaults plus (category, severity)
/// overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WeightConfig<T> {
    pub defaults: SeverityPoints<T>,
    #[serde(default)]
    pub overrides: Vec<WeightOverride<T>>,
}

impl<T: Scalar> Default for WeightConfig<T> {
    /// minor = 1, major = 2, critical = 3.
    fn default() -> Self {
        WeightConfig {
            defaults: SeverityPoints {
                minor: T::from_count(1),
                major: T::from_count(2),
                critical: T::from_count(3),
            },
            overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeightError {
    #[error("negative points for {0}")]
    Negative(String),
    #[error("duplicate override for ({0}, {1})")]
    DuplicateOverride(String, Severity),
}

impl<T: Scalar> WeightConfig<T> {
    pub fn points_for(&self, category_id: &str, severity: Severity) -> T {
        self.overrides
            .iter()
            .find(|o| o.category == category_id && o.severity == severity)
            .map(|o| o.points.clone())
            .unwrap_or_else(|| self.defaults.get(severity).clone())
    }

    pub fn validate(&self) -> Result<(), WeightError> {
        let zero = T::zero();
        for s in Severity::ALL {
            if *self.defaults.get(s) < zero {
                return Err(WeightError::Negative(s.to_string()));
            }
        }
        for (i, o) in self.overrides.iter().enumerate() {
            if o.points < zero {
                return Err(WeightError::Negative(format!("{}/{}", o.category, o.severity)));
            }
            if self.overrides[..i]
                .iter()
                .any(|p| p.category == o.category && p.severity == o.severity)
            {
                return Err(WeightError::DuplicateOverride(o.category.clone(), o.severity));
            }
        }
        Ok(())
    }

    /// Every point value multiplied by `k`.
    pub fn scaled(&self, k: &T) -> Self {
        let mul = |v: &T| v.clone() * k.clone();
        WeightConfig {
            defaults: SeverityPoints {
                minor: mul(&self.defaults.minor),
                major: mul(&self.defaults.major),
                critical: mul(&self.defaults.critical),
            },
            overrides: self
                .overrides
                .iter()
                .map(|o| WeightOverride {
                    category: o.category.clone(),
                    severity: o.severity,
                    points: mul(&o.points),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum RoundingMode {
    /// Exact TQI rounded half-up to two decimals.
    #[default]
    #[serde(rename = "exact-2dp")]
    Exact2dp,
    /// `100 − floor(error percentage)`: the integer error percentage is
    /// truncated before subtracting.
    #[serde(rename = "truncate-error-percentage")]
    TruncateErrorPercentage,
}

impl RoundingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RoundingMode::Exact2dp => "exact-2dp",
            RoundingMode::TruncateErrorPercentage => "truncate-error-percentage",
        }
    }

    /// Decimal places shown for values in this mode.
    pub fn places(self) -> usize {
        match self {
            RoundingMode::Exact2dp => 2,
            RoundingMode::TruncateErrorPercentage => 0,
        }
    }
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rounding mode `{0}` (expected exact-2dp or truncate-error-percentage)")]
pub struct ParseRoundingModeError(pub String);

impl FromStr for RoundingMode {
    type Err = ParseRoundingModeError;

    /// Accepts the canonical names and the short forms `exact` / `truncate`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact-2dp" | "exact" => Ok(RoundingMode::Exact2dp),
            "truncate-error-percentage" | "truncate" => Ok(RoundingMode::TruncateErrorPercentage),
            other => Err(ParseRoundingModeError(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GradeBand<T> {
    #[serde(with = "literal")]
    pub lower: T,
    #[serde(with = "literal")]
    pub upper: T,
    pub label: String,
}

/// Ordered partition of `[0, 100]` into labelled TQI bands. Bands are
/// lower-inclusive and upper-exclusive, except the last which includes 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GradeScale<T> {
    pub name: String,
    pub bands: Vec<GradeBand<T>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScaleError {
    #[error("scale `{0}` has no bands")]
    Empty(String),
    #[error("scale `{0}` must start at 0")]
    BadStart(String),
    #[error("scale `{0}` must end at 100")]
    BadEnd(String),
    #[error("scale `{0}`: band `{1}` is empty or reversed")]
    EmptyBand(String, String),
    #[error("scale `{0}`: band `{1}` does not start where the previous band ends")]
    Gap(String, String),
}

impl<T: Scalar> GradeScale<T> {
    /// Builds a scale from `(lower bound, label)` pairs; each band ends where
    /// the next begins and the last ends at 100.
    pub fn from_thresholds(name: &str, thresholds: &[(T, &str)]) -> Self {
        let hundred = T::from_count(100);
        let bands = thresholds
            .iter()
            .enumerate()
            .map(|(i, (lower, label))| GradeBand {
                lower: lower.clone(),
                upper: thresholds
                    .get(i + 1)
                    .map(|(next, _)| next.clone())
                    .unwrap_or_else(|| hundred.clone()),
                label: label.to_string(),
            })
            .collect();
        GradeScale {
            name: name.to_string(),
            bands,
        }
    }

    pub fn validate(&self) -> Result<(), ScaleError> {
        let name = || self.name.clone();
        let (first, last) = match (self.bands.first(), self.bands.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(ScaleError::Empty(name())),
        };
        if first.lower != T::zero() {
            return Err(ScaleError::BadStart(name()));
        }
        if last.upper != T::from_count(100) {
            return Err(ScaleError::BadEnd(name()));
        }
        for (i, band) in self.bands.iter().enumerate() {
            if band.lower >= band.upper {
                return Err(ScaleError::EmptyBand(name(), band.label.clone()));
            }
            if i > 0 && self.bands[i - 1].upper != band.lower {
                return Err(ScaleError::Gap(name(), band.label.clone()));
            }
        }
        Ok(())
    }

    /// Label of the band containing `tqi`. Values outside `[0, 100]` are
    /// clamped to the first/last band.
    pub fn assign(&self, tqi: &T) -> &str {
        let last = self.bands.len() - 1;
        self.bands
            .iter()
            .enumerate()
            .find(|(i, b)| *tqi < b.upper || *i == last)
            .map(|(_, b)| b.label.as_str())
            .expect("scale has bands")
    }
}

pub fn assign_grade<'a, T: Scalar>(tqi: &T, scale: &'a GradeScale<T>) -> &'a str {
    scale.assign(tqi)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("cannot compute TQI for zero words")]
    ZeroWords,
    #[error("text contains no words")]
    EmptyText,
    #[error("document is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidDocument(Vec<Violation>),
}

impl ScoreError {
    pub fn code(&self) -> &'static str {
        match self {
            ScoreError::ZeroWords => "ZeroWords",
            ScoreError::EmptyText => "EmptyText",
            ScoreError::InvalidDocument(_) => "InvalidDocument",
        }
    }
}

/// Sum of error points over all annotations.
pub fn error_points<T: Scalar>(doc: &MarkedDocument, weights: &WeightConfig<T>) -> T {
    doc.annotations
        .iter()
        .fold(T::zero(), |acc, a| acc + weights.points_for(&a.category_id, a.severity))
}

/// Unrounded TQI, clamped below at 0.
pub fn tqi_exact<T: Scalar>(points: &T, words: usize) -> Result<T, ScoreError> {
    if words == 0 {
        return Err(ScoreError::ZeroWords);
    }
    let hundred = T::from_count(100);
    let tqi = hundred.clone() - points.clone() * hundred / T::from_count(words);
    Ok(clamp_low(tqi))
}

fn clamp_low<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        T::zero()
    } else {
        v
    }
}

/// Rounds half-up to two decimals.
pub fn round_2dp<T: Scalar>(v: &T) -> T {
    let hundred = T::from_count(100);
    let half = T::one() / T::from_count(2);
    (v.clone() * hundred.clone() + half).floor() / hundred
}

/// TQI as reported under `mode`.
pub fn compute_tqi<T: Scalar>(points: &T, words: usize, mode: RoundingMode) -> Result<T, ScoreError> {
    match mode {
        RoundingMode::Exact2dp => Ok(round_2dp(&tqi_exact(points, words)?)),
        RoundingMode::TruncateErrorPercentage => {
            if words == 0 {
                return Err(ScoreError::ZeroWords);
            }
            let hundred = T::from_count(100);
            let error_pct = (points.clone() * hundred.clone() / T::from_count(words)).floor();
            Ok(clamp_low(hundred - error_pct))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BreakdownEntry<T> {
    pub category_id: String,
    pub severity: Severity,
    pub count: usize,
    #[serde(with = "literal")]
    pub points: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScoreReport<T> {
    pub doc_id: String,
    #[serde(with = "literal")]
    pub total_error_points: T,
    pub word_count: usize,
    #[serde(with = "literal")]
    pub tqi_exact: T,
    #[serde(with = "literal::number")]
    pub tqi_display: T,
    pub rounding_mode: RoundingMode,
    pub scale: String,
    pub grade: String,
    /// One entry per (category, severity) present, in taxonomy order then
    /// severity order.
    pub breakdown: Vec<BreakdownEntry<T>>,
}

impl<T: Scalar> ScoreReport<T> {
    /// The display TQI formatted for humans: `92.45` or `93`.
    pub fn tqi_text(&self) -> String {
        self.tqi_display.to_fixed(self.rounding_mode.places())
    }
}

/// Scores a document: error points, word count, TQI and grade.
pub fn score<T: Scalar>(
    doc: &MarkedDocument,
    taxonomy: &Taxonomy,
    weights: &WeightConfig<T>,
    scale: &GradeScale<T>,
    mode: RoundingMode,
) -> Result<ScoreReport<T>, ScoreError> {
    let violations = doc.validate(taxonomy);
    if !violations.is_empty() {
        return Err(ScoreError::InvalidDocument(violations));
    }
    let words = word_count(&doc.plain_text);
    if words == 0 {
        return Err(ScoreError::EmptyText);
    }

    let mut breakdown: Vec<BreakdownEntry<T>> = Vec::new();
    for category in &taxonomy.categories {
        for severity in Severity::ALL {
            let count = doc
                .annotations
                .iter()
                .filter(|a| a.category_id == category.id && a.severity == severity)
                .count();
            if count > 0 {
                let unit = weights.points_for(&category.id, severity);
                breakdown.push(BreakdownEntry {
                    category_id: category.id.clone(),
                    severity,
                    count,
                    points: unit * T::from_count(count),
                });
            }
        }
    }

    let total = error_points(doc, weights);
    let exact = tqi_exact(&total, words)?;
    let display = compute_tqi(&total, words, mode)?;
    let grade = scale.assign(&display).to_string();
    Ok(ScoreReport {
        doc_id: doc.meta.doc_id.clone(),
        total_error_points: total,
        word_count: words,
        tqi_exact: exact,
        tqi_display: display,
        rounding_mode: mode,
        scale: scale.name.clone(),
        grade,
        breakdown,
    })
}
