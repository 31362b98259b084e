//! Domain model: the mistake taxonomy ("dialect"), stand-off annotations and
//! marked documents.
//!
//! A [`MarkedDocument`] keeps the target text untouched and records every
//! mistake as a character span over it. Inline tags are only a serialization
//! of this model (see [`crate::dialect`]).

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mistake value. Ordered `Minor < Major < Critical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Minor,
    Major,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Minor, Severity::Major, Severity::Critical];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Minor => "minor",
            Severity::Major => "major",
            Severity::Critical => "critical",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown severity `{0}` (expected minor, major or critical)")]
pub struct ParseSeverityError(pub String);

impl FromStr for Severity {
    type Err = ParseSeverityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minor" => Ok(Severity::Minor),
            "major" => Ok(Severity::Major),
            "critical" => Ok(Severity::Critical),
            other => Err(ParseSeverityError(other.to_string())),
        }
    }
}

/// Element/attribute name syntax: a letter or `_`, then letters, digits,
/// `_` or `-`.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MistakeCategory {
    pub id: String,
    pub tag_name: String,
    pub label: String,
    #[serde(default)]
    pub description: String,
    pub allowed_severities: BTreeSet<Severity>,
}

impl MistakeCategory {
    /// A category allowing every severity.
    pub fn new(id: &str, tag_name: &str, label: &str, description: &str) -> Self {
        MistakeCategory {
            id: id.to_string(),
            tag_name: tag_name.to_string(),
            label: label.to_string(),
            description: description.to_string(),
            allowed_severities: Severity::ALL.into_iter().collect(),
        }
    }
}

fn default_severity_attribute() -> String {
    "weight".to_string()
}

/// A dialect: the set of mistake tags a critic may use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub name: String,
    pub version: String,
    #[serde(default = "default_severity_attribute")]
    pub severity_attribute: String,
    #[serde(default)]
    pub categories: Vec<MistakeCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("category #{0} has an empty id")]
    EmptyId(usize),
    #[error("category `{0}` has an invalid tag name `{1}`")]
    InvalidTagName(String, String),
    #[error("duplicate category id `{0}`")]
    DuplicateId(String),
    #[error("duplicate tag name `{0}`")]
    DuplicateTagName(String),
    #[error("category `{0}` allows no severities")]
    NoSeverities(String),
    #[error("invalid severity attribute name `{0}`")]
    InvalidSeverityAttribute(String),
}

impl Taxonomy {
    /// Content, form and style mistakes, each allowing minor/major/critical,
    /// tagged `<content_mistake weight='…'>` and so on.
    pub fn default_dialect() -> Self {
        Taxonomy {
            name: "content-form-style".to_string(),
            version: "1".to_string(),
            severity_attribute: default_severity_attribute(),
            categories: vec![
                MistakeCategory::new(
                    "content",
                    "content_mistake",
                    "Content mistake",
                    "Distortion of factual or communicative information",
                ),
                MistakeCategory::new(
                    "form",
                    "form_mistake",
                    "Form mistake",
                    "Violation of target-language norms",
                ),
                MistakeCategory::new(
                    "style",
                    "style_mistake",
                    "Style mistake",
                    "Incorrect transmission of stylistic devices",
                ),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), TaxonomyError> {
        if !is_valid_name(&self.severity_attribute) {
            return Err(TaxonomyError::InvalidSeverityAttribute(
                self.severity_attribute.clone(),
            ));
        }
        let mut ids = HashSet::new();
        let mut tags = HashSet::new();
        for (i, c) in self.categories.iter().enumerate() {
            if c.id.is_empty() {
                return Err(TaxonomyError::EmptyId(i));
            }
            if !is_valid_name(&c.tag_name) {
                return Err(TaxonomyError::InvalidTagName(c.id.clone(), c.tag_name.clone()));
            }
            if c.allowed_severities.is_empty() {
                return Err(TaxonomyError::NoSeverities(c.id.clone()));
            }
            if !ids.insert(c.id.as_str()) {
                return Err(TaxonomyError::DuplicateId(c.id.clone()));
            }
            if !tags.insert(c.tag_name.as_str()) {
                return Err(TaxonomyError::DuplicateTagName(c.tag_name.clone()));
            }
        }
        Ok(())
    }

    pub fn category(&self, id: &str) -> Option<&MistakeCategory> {
        self.categories.iter().find(|c| c.id == id)
    }

    pub fn category_by_tag(&self, tag_name: &str) -> Option<&MistakeCategory> {
        self.categories.iter().find(|c| c.tag_name == tag_name)
    }
}

/// Half-open range of character (Unicode scalar value) offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// True when the spans overlap without one containing the other.
    pub fn crosses(&self, other: &Span) -> bool {
        (self.start < other.start && other.start < self.end && self.end < other.end)
            || (other.start < self.start && self.start < other.end && other.end < self.end)
    }

    /// Document order: by start, longer spans first.
    fn order_key(&self) -> (usize, std::cmp::Reverse<usize>) {
        (self.start, std::cmp::Reverse(self.end))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: String,
    pub category_id: String,
    pub severity: Severity,
    pub span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_lang: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_lang: Option<String>,
    pub created_at: DateTime<Utc>,
    pub version: u64,
}

impl DocumentMeta {
    pub fn new(doc_id: impl Into<String>) -> Self {
        DocumentMeta {
            doc_id: doc_id.into(),
            student: None,
            cohort: None,
            source_lang: None,
            target_lang: None,
            created_at: Utc::now(),
            version: 1,
        }
    }
}

/// Errors from editing a document's annotations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("severity `{severity}` is not allowed for category `{category_id}`")]
    SeverityNotAllowed {
        category_id: String,
        severity: Severity,
    },
    #[error("invalid span {span} for text of {len} characters")]
    InvalidSpan { span: Span, len: usize },
    #[error("span {span} partially overlaps annotation `{existing}`")]
    OverlapViolation { span: Span, existing: String },
    #[error("unknown annotation `{0}`")]
    UnknownAnnotation(String),
}

impl AnnotationError {
    /// Stable token naming the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            AnnotationError::UnknownCategory(_) => "UnknownCategory",
            AnnotationError::SeverityNotAllowed { .. } => "SeverityNotAllowed",
            AnnotationError::InvalidSpan { .. } => "InvalidSpan",
            AnnotationError::OverlapViolation { .. } => "OverlapViolation",
            AnnotationError::UnknownAnnotation(_) => "UnknownAnnotation",
        }
    }
}

/// One broken rule found by [`MarkedDocument::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// `None` for document-level rules.
    pub annotation_id: Option<String>,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule")]
pub enum ViolationKind {
    UnknownCategory { category_id: String },
    SeverityNotAllowed { category_id: String, severity: Severity },
    InvalidSpan { span: Span, text_len: usize },
    OverlapViolation { other_id: String },
    DuplicateId,
    InvalidMeta { reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(id) = &self.annotation_id {
            write!(f, "annotation `{id}`: ")?;
        }
        match &self.kind {
            ViolationKind::UnknownCategory { category_id } => {
                write!(f, "unknown category `{category_id}`")
            }
            ViolationKind::SeverityNotAllowed { category_id, severity } => {
                write!(f, "severity `{severity}` not allowed for `{category_id}`")
            }
            ViolationKind::InvalidSpan { span, text_len } => {
                write!(f, "span {span} invalid for {text_len} characters")
            }
            ViolationKind::OverlapViolation { other_id } => {
                write!(f, "partially overlaps `{other_id}`")
            }
            ViolationKind::DuplicateId => f.write_str("duplicate annotation id"),
            ViolationKind::InvalidMeta { reason } => write!(f, "invalid metadata: {reason}"),
        }
    }
}

/// Target text plus stand-off mistake annotations.
///
/// Annotations are kept in document order (start ascending, longer spans
/// first, insertion order for identical spans), which is also the order in
/// which their start tags are serialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedDocument {
    pub meta: DocumentMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
    pub plain_text: String,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
}

impl MarkedDocument {
    pub fn new(meta: DocumentMeta, plain_text: impl Into<String>) -> Self {
        MarkedDocument {
            meta,
            source_text: None,
            plain_text: plain_text.into(),
            annotations: Vec::new(),
        }
    }

    /// Length of the plain text in characters.
    pub fn char_len(&self) -> usize {
        self.plain_text.chars().count()
    }

    /// Text covered by `span`, or `None` when the span is out of bounds.
    pub fn span_text(&self, span: Span) -> Option<&str> {
        char_slice(&self.plain_text, span)
    }

    pub fn annotation(&self, id: &str) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.id == id)
    }

    fn fresh_annotation_id(&self) -> String {
        let taken: HashSet<&str> = self.annotations.iter().map(|a| a.id.as_str()).collect();
        let mut n = self
            .annotations
            .iter()
            .filter_map(|a| a.id.strip_prefix('a')?.parse::<u64>().ok())
            .max()
            .unwrap_or(0)
            + 1;
        loop {
            let id = format!("a{n}");
            if !taken.contains(id.as_str()) {
                return id;
            }
            n += 1;
        }
    }

    /// Index at which an annotation with `span` keeps document order.
    fn insertion_index(&self, span: Span) -> usize {
        self.annotations
            .partition_point(|a| a.span.order_key() <= span.order_key())
    }

    /// Marks a new mistake. Returns the updated document (version bumped)
    /// and the created annotation.
    pub fn add_annotation(
        &self,
        taxonomy: &Taxonomy,
        category_id: &str,
        severity: Severity,
        span: Span,
        note: Option<String>,
    ) -> Result<(MarkedDocument, Annotation), AnnotationError> {
        let category = taxonomy
            .category(category_id)
            .ok_or_else(|| AnnotationError::UnknownCategory(category_id.to_string()))?;
        if !category.allowed_severities.contains(&severity) {
            return Err(AnnotationError::SeverityNotAllowed {
                category_id: category_id.to_string(),
                severity,
            });
        }
        let len = self.char_len();
        if span.is_empty() || span.end > len {
            return Err(AnnotationError::InvalidSpan { span, len });
        }
        if let Some(existing) = self.annotations.iter().find(|a| a.span.crosses(&span)) {
            return Err(AnnotationError::OverlapViolation {
                span,
                existing: existing.id.clone(),
            });
        }

        let annotation = Annotation {
            id: self.fresh_annotation_id(),
            category_id: category_id.to_string(),
            severity,
            span,
            note,
        };
        let mut doc = self.clone();
        let at = doc.insertion_index(span);
        doc.annotations.insert(at, annotation.clone());
        doc.meta.version += 1;
        Ok((doc, annotation))
    }

    /// Drops an annotation; the text and other annotations are untouched.
    pub fn remove_annotation(&self, annotation_id: &str) -> Result<MarkedDocument, AnnotationError> {
        let index = self
            .annotations
            .iter()
            .position(|a| a.id == annotation_id)
            .ok_or_else(|| AnnotationError::UnknownAnnotation(annotation_id.to_string()))?;
        let mut doc = self.clone();
        doc.annotations.remove(index);
        doc.meta.version += 1;
        Ok(doc)
    }

    /// Checks every structural invariant and the taxonomy rules. An empty
    /// result means the document is valid.
    pub fn validate(&self, taxonomy: &Taxonomy) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.meta.doc_id.is_empty() {
            out.push(Violation {
                annotation_id: None,
                kind: ViolationKind::InvalidMeta {
                    reason: "empty doc_id".to_string(),
                },
            });
        }
        if self.meta.version == 0 {
            out.push(Violation {
                annotation_id: None,
                kind: ViolationKind::InvalidMeta {
                    reason: "version must be at least 1".to_string(),
                },
            });
        }

        let len = self.char_len();
        let mut seen = HashSet::new();
        for a in &self.annotations {
            let id = Some(a.id.clone());
            if !seen.insert(a.id.as_str()) {
                out.push(Violation {
                    annotation_id: id.clone(),
                    kind: ViolationKind::DuplicateId,
                });
            }
            match taxonomy.category(&a.category_id) {
                None => out.push(Violation {
                    annotation_id: id.clone(),
                    kind: ViolationKind::UnknownCategory {
                        category_id: a.category_id.clone(),
                    },
                }),
                Some(c) if !c.allowed_severities.contains(&a.severity) => out.push(Violation {
                    annotation_id: id.clone(),
                    kind: ViolationKind::SeverityNotAllowed {
                        category_id: a.category_id.clone(),
                        severity: a.severity,
                    },
                }),
                Some(_) => {}
            }
            if a.span.is_empty() || a.span.end > len {
                out.push(Violation {
                    annotation_id: id,
                    kind: ViolationKind::InvalidSpan {
                        span: a.span,
                        text_len: len,
                    },
                });
            }
        }

        for (i, a) in self.annotations.iter().enumerate() {
            for b in &self.annotations[i + 1..] {
                if a.span.crosses(&b.span) {
                    out.push(Violation {
                        annotation_id: Some(a.id.clone()),
                        kind: ViolationKind::OverlapViolation {
                            other_id: b.id.clone(),
                        },
                    });
                }
            }
        }
        out
    }

    /// Restores document order after direct edits to `annotations`.
    pub fn sort_annotations(&mut self) {
        self.annotations.sort_by_key(|a| a.span.order_key());
    }

    /// Identity-free view of the annotations: (category, severity, span,
    /// note) in document order. Two documents with equal signatures carry the
    /// same mark-up even if annotation ids differ.
    pub fn annotation_signature(&self) -> Vec<(String, Severity, Span, Option<String>)> {
        let mut sig: Vec<_> = self
            .annotations
            .iter()
            .map(|a| (a.category_id.clone(), a.severity, a.span, a.note.clone()))
            .collect();
        sig.sort_by(|x, y| x.2.order_key().cmp(&y.2.order_key()).then_with(|| x.cmp(y)));
        sig
    }
}

/// Slices `text` by character offsets.
pub fn char_slice(text: &str, span: Span) -> Option<&str> {
    if span.start > span.end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let start = indices.nth(span.start)?;
    let end = if span.end == span.start {
        start
    } else {
        indices.nth(span.end - span.start - 1)?
    };
    Some(&text[start..end])
}

/// Maximal runs of alphanumeric characters with their character spans.
/// Everything else (whitespace, punctuation, quotes, guillemets, hyphens)
/// separates words.
pub fn words(text: &str) -> impl Iterator<Item = (Span, &str)> + '_ {
    let mut chars = text.char_indices().enumerate().peekable();
    std::iter::from_fn(move || {
        while let Some(&(_, (_, c))) = chars.peek() {
            if c.is_alphanumeric() {
                break;
            }
            chars.next();
        }
        let (start_char, (start_byte, _)) = chars.next()?;
        let mut end_char = start_char + 1;
        let mut end_byte = text.len();
        while let Some(&(ci, (bi, c))) = chars.peek() {
            if !c.is_alphanumeric() {
                end_byte = bi;
                break;
            }
            end_char = ci + 1;
            chars.next();
        }
        Some((Span::new(start_char, end_char), &text[start_byte..end_byte]))
    })
}

pub fn word_count(text: &str) -> usize {
    words(text).count()
}
