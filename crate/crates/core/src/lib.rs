//! Descriptive mark-up for translation mistakes.
//!
//! A critic marks mistakes in a translation with tags from a configurable
//! dialect (`<content_mistake weight='minor'>…</content_mistake>`). This crate
//! holds the stand-off document model, the dialect parser and serializer,
//! Translation Quality Index scoring, multi-representation rendering and
//! on-disk corpora with mistake queries.
//!
//! Scoring is generic over [`scalar::Scalar`]; the aliases below fix it to
//! exact rationals, which is what the CLI and service use.

pub mod config;
pub mod corpus;
pub mod dialect;
pub mod model;
pub mod render;
pub mod scalar;
pub mod scoring;

pub use config::{AssessmentConfig, ConfigError};
pub use corpus::{Corpus, CorpusError, CorpusStats, Query, QueryHit};
pub use dialect::{
    canonicalize, export_dtd, parse, parse_with, roundtrip_check, serialize, DiagnosticKind,
    ParseDiagnostic, ParseFailure, ParseOptions, SerializeError,
};
pub use model::{
    word_count, Annotation, AnnotationError, DocumentMeta, MarkedDocument, MistakeCategory,
    Severity, Span, Taxonomy, Violation, ViolationKind,
};
pub use render::{default_stylesheet, render, OutputMode, RenderError, Representation};
pub use scoring::{assign_grade, compute_tqi, error_points, score, RoundingMode, ScoreError};

/// Exact rational used for error points and TQI.
pub type Rational = num_rational::Ratio<i64>;
/// Arbitrary-precision rational, for very large weight tables.
pub type BigRational = num_rational::BigRational;

pub type WeightConfig = scoring::WeightConfig<Rational>;
pub type GradeScale = scoring::GradeScale<Rational>;
pub type GradeBand = scoring::GradeBand<Rational>;
pub type ScoreReport = scoring::ScoreReport<Rational>;

pub type FloatWeightConfig = scoring::WeightConfig<f64>;
pub type FloatGradeScale = scoring::GradeScale<f64>;
pub type FloatScoreReport = scoring::ScoreReport<f64>;

/// Pretty JSON for a score report, newline-terminated. The CLI and the
/// service both emit exactly this text.
pub fn report_json(report: &ScoreReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}
