//! On-disk corpora of marked documents.
//!
//! ```text
//! <root>/manifest            JSON index: corpus name, doc_id -> file + meta
//! <root>/taxonomy            JSON snapshot of the corpus dialect
//! <root>/docs/<doc_id>.tqm   the document in the inline dialect
//! <root>/docs/<doc_id>.meta  JSON sidecar: meta, source text, annotation ids
//! ```
//!
//! Every file is replaced by write-to-temp-then-rename, so a crash leaves
//! either the old or the new version. Writers must be serialized by the
//! caller; concurrent readers are fine.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use num_traits::Zero;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialect::{parse_with, serialize, ParseFailure, ParseOptions};
use crate::model::{words, DocumentMeta, MarkedDocument, Severity, Span, Taxonomy, Violation};
use crate::scoring::{error_points, round_2dp, tqi_exact};
use crate::scalar::literal;
use crate::{Rational, WeightConfig};

const MANIFEST: &str = "manifest";
const TAXONOMY: &str = "taxonomy";
const DOCS: &str = "docs";
const CONTEXT_CHARS: usize = 40;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{0} exists and is not empty")]
    PathOccupied(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt corpus file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("document is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidDocument(Vec<Violation>),
    #[error("invalid document id `{0}` (use letters, digits, '.', '_' or '-')")]
    InvalidDocId(String),
    #[error("stale version for `{doc_id}`: stored {stored}, incoming {incoming}")]
    StaleVersion {
        doc_id: String,
        stored: u64,
        incoming: u64,
    },
    #[error("no document `{0}`")]
    NotFound(String),
    #[error("stored document `{doc_id}` does not parse: {failure}")]
    Unparsable { doc_id: String, failure: ParseFailure },
    #[error("query must set at least one field")]
    EmptyQuery,
    #[error("unknown category `{0}` in query")]
    UnknownCategoryInQuery(String),
    #[error("malformed segment file: {0}")]
    MalformedSegmentFile(String),
    #[error("translation unit {unit} has {found} language variant(s); expected 2")]
    MissingVariant { unit: usize, found: usize },
    #[error("document `{0}` already exists")]
    DocumentExists(String),
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::PathOccupied(_) => "PathOccupied",
            CorpusError::Io { .. } => "IoFailure",
            CorpusError::Corrupt { .. } => "CorruptCorpus",
            CorpusError::InvalidDocument(_) => "InvalidDocument",
            CorpusError::InvalidDocId(_) => "InvalidDocId",
            CorpusError::StaleVersion { .. } => "StaleVersion",
            CorpusError::NotFound(_) => "NotFound",
            CorpusError::Unparsable { .. } => "UnparsableDocument",
            CorpusError::EmptyQuery => "EmptyQuery",
            CorpusError::UnknownCategoryInQuery(_) => "UnknownCategoryInQuery",
            CorpusError::MalformedSegmentFile(_) => "MalformedSegmentFile",
            CorpusError::MissingVariant { .. } => "MissingVariant",
            CorpusError::DocumentExists(_) => "DocumentExists",
        }
    }

    /// True for failures of the environment rather than of the request.
    pub fn is_environmental(&self) -> bool {
        matches!(
            self,
            CorpusError::Io { .. } | CorpusError::Corrupt { .. } | CorpusError::PathOccupied(_)
        )
    }
}

type Result<T, E = CorpusError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

/// Document ids double as file names.
pub fn is_valid_doc_id(id: &str) -> bool {
    let mut chars = id.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphanumeric())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        && id.len() <= 200
}

fn sanitize_doc_id(raw: &str) -> String {
    let mut id: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '-' })
        .collect();
    if !id.starts_with(|c: char| c.is_ascii_alphanumeric()) {
        id.insert(0, 'd');
    }
    id
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub meta: DocumentMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub taxonomy: String,
    pub documents: BTreeMap<String, ManifestEntry>,
}

/// Sidecar stored next to each `.tqm` file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Sidecar {
    meta: DocumentMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_text: Option<String>,
    /// Annotation ids in start-tag order of the `.tqm` file.
    annotation_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
    /// Whole-word, case-insensitive match inside the annotated text. Several
    /// words must appear consecutively.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains_word: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
}

impl Query {
    pub fn is_empty(&self) -> bool {
        self.category_id.is_none()
            && self.severity.is_none()
            && self.contains_word.is_none()
            && self.cohort.is_none()
            && self.doc_id.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryHit {
    pub doc_id: String,
    pub annotation_id: String,
    pub category_id: String,
    pub severity: Severity,
    pub span: Span,
    pub span_text: String,
    pub context_before: String,
    pub context_after: String,
}

/// True when the word sequence of `needle` occurs as consecutive whole words
/// of `haystack`, ignoring case.
pub fn contains_words(haystack: &str, needle: &str) -> bool {
    let needle: Vec<String> = words(needle).map(|(_, w)| w.to_lowercase()).collect();
    if needle.is_empty() {
        return false;
    }
    let hay: Vec<String> = words(haystack).map(|(_, w)| w.to_lowercase()).collect();
    hay.windows(needle.len()).any(|w| w == needle.as_slice())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category_id: String,
    pub severity: Severity,
    pub count: usize,
}

/// TQI aggregates, each rounded half-up to two decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TqiSummary {
    pub documents: usize,
    #[serde(with = "literal::number")]
    pub mean: Rational,
    #[serde(with = "literal::number")]
    pub min: Rational,
    #[serde(with = "literal::number")]
    pub max: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub document_count: usize,
    pub annotation_count: usize,
    pub counts: Vec<CategoryCount>,
    /// Absent when no document has any words.
    pub tqi: Option<TqiSummary>,
}

/// One translation unit from a segment file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentPair {
    pub unit_id: Option<String>,
    pub source_lang: String,
    pub source: String,
    pub target_lang: String,
    pub target: String,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
    manifest: Manifest,
    taxonomy: Taxonomy,
}

impl Corpus {
    /// Creates a corpus in `path`, which must be missing or empty.
    pub fn init(path: impl AsRef<Path>, name: &str, taxonomy: &Taxonomy) -> Result<Corpus> {
        let root = path.as_ref().to_path_buf();
        if root.exists() {
            let mut entries = fs::read_dir(&root).map_err(io_err(&root))?;
            if entries.next().is_some() {
                return Err(CorpusError::PathOccupied(root));
            }
        }
        let docs = root.join(DOCS);
        fs::create_dir_all(&docs).map_err(io_err(&docs))?;
        write_atomic(&root.join(TAXONOMY), &to_json(taxonomy))?;
        let corpus = Corpus {
            manifest: Manifest {
                name: name.to_string(),
                taxonomy: TAXONOMY.to_string(),
                documents: BTreeMap::new(),
            },
            root,
            taxonomy: taxonomy.clone(),
        };
        corpus.write_manifest()?;
        Ok(corpus)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Corpus> {
        let root = path.as_ref().to_path_buf();
        let manifest: Manifest = read_json(&root.join(MANIFEST))?;
        let taxonomy = Self::read_taxonomy(&root.join(&manifest.taxonomy))?;
        Ok(Corpus {
            root,
            manifest,
            taxonomy,
        })
    }

    fn read_taxonomy(path: &Path) -> Result<Taxonomy> {
        let taxonomy: Taxonomy = read_json(path)?;
        taxonomy.validate().map_err(|e| CorpusError::Corrupt {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(taxonomy)
    }

    /// Rebuilds the manifest from the document sidecars and writes it.
    pub fn rebuild(path: impl AsRef<Path>) -> Result<Corpus> {
        let root = path.as_ref().to_path_buf();
        let taxonomy = Self::read_taxonomy(&root.join(TAXONOMY))?;
        let name = match read_json::<Manifest>(&root.join(MANIFEST)) {
            Ok(m) => m.name,
            Err(_) => root
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "corpus".to_string()),
        };
        let docs_dir = root.join(DOCS);
        let mut documents = BTreeMap::new();
        for entry in fs::read_dir(&docs_dir).map_err(io_err(&docs_dir))? {
            let path = entry.map_err(io_err(&docs_dir))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("meta") {
                continue;
            }
            let sidecar: Sidecar = read_json(&path)?;
            let doc_id = sidecar.meta.doc_id.clone();
            documents.insert(
                doc_id.clone(),
                ManifestEntry {
                    file: format!("{DOCS}/{doc_id}.tqm"),
                    meta: sidecar.meta,
                },
            );
        }
        let corpus = Corpus {
            root,
            manifest: Manifest {
                name,
                taxonomy: TAXONOMY.to_string(),
                documents,
            },
            taxonomy,
        };
        corpus.write_manifest()?;
        Ok(corpus)
    }

    fn write_manifest(&self) -> Result<()> {
        write_atomic(&self.root.join(MANIFEST), &to_json(&self.manifest))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn name(&self) -> &str {
        &self.manifest.name
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn len(&self) -> usize {
        self.manifest.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.documents.is_empty()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.manifest.documents.contains_key(doc_id)
    }

    /// Manifest entries ordered by doc id.
    pub fn entries(&self) -> impl Iterator<Item = (&String, &ManifestEntry)> {
        self.manifest.documents.iter()
    }

    pub fn stored_version(&self, doc_id: &str) -> Option<u64> {
        self.manifest.documents.get(doc_id).map(|e| e.meta.version)
    }

    /// Stores `doc`. Replacing an existing document requires a strictly
    /// greater version.
    pub fn put_document(&mut self, doc: &MarkedDocument) -> Result<()> {
        let doc_id = &doc.meta.doc_id;
        if !is_valid_doc_id(doc_id) {
            return Err(CorpusError::InvalidDocId(doc_id.clone()));
        }
        let violations = doc.validate(&self.taxonomy);
        if !violations.is_empty() {
            return Err(CorpusError::InvalidDocument(violations));
        }
        if let Some(stored) = self.stored_version(doc_id) {
            if doc.meta.version <= stored {
                return Err(CorpusError::StaleVersion {
                    doc_id: doc_id.clone(),
                    stored,
                    incoming: doc.meta.version,
                });
            }
        }
        let text = serialize(doc, &self.taxonomy).map_err(|e| match e {
            crate::dialect::SerializeError::InvalidDocument(v) => CorpusError::InvalidDocument(v),
        })?;

        let mut ordered: Vec<_> = doc.annotations.iter().collect();
        ordered.sort_by_key(|a| (a.span.start, std::cmp::Reverse(a.span.end)));
        let sidecar = Sidecar {
            meta: doc.meta.clone(),
            source_text: doc.source_text.clone(),
            annotation_ids: ordered.iter().map(|a| a.id.clone()).collect(),
        };

        let docs = self.root.join(DOCS);
        write_atomic(&docs.join(format!("{doc_id}.tqm")), text.as_bytes())?;
        write_atomic(&docs.join(format!("{doc_id}.meta")), &to_json(&sidecar))?;
        self.manifest.documents.insert(
            doc_id.clone(),
            ManifestEntry {
                file: format!("{DOCS}/{doc_id}.tqm"),
                meta: doc.meta.clone(),
            },
        );
        self.write_manifest()
    }

    pub fn get_document(&self, doc_id: &str) -> Result<MarkedDocument> {
        let entry = self
            .manifest
            .documents
            .get(doc_id)
            .ok_or_else(|| CorpusError::NotFound(doc_id.to_string()))?;
        let tqm = self.root.join(&entry.file);
        let text = fs::read_to_string(&tqm).map_err(io_err(&tqm))?;
        let sidecar: Sidecar = read_json(&self.root.join(DOCS).join(format!("{doc_id}.meta")))?;
        let mut doc = parse_with(&text, &self.taxonomy, sidecar.meta, ParseOptions::default())
            .map_err(|failure| CorpusError::Unparsable {
                doc_id: doc_id.to_string(),
                failure,
            })?;
        if sidecar.annotation_ids.len() == doc.annotations.len() {
            for (a, id) in doc.annotations.iter_mut().zip(sidecar.annotation_ids) {
                a.id = id;
            }
        }
        doc.source_text = sidecar.source_text;
        Ok(doc)
    }

    /// Every document, ordered by doc id.
    pub fn load_all(&self) -> Result<Vec<MarkedDocument>> {
        self.manifest
            .documents
            .keys()
            .map(|id| self.get_document(id))
            .collect()
    }

    /// Annotations matching every set field of `q`, ordered by doc id then
    /// span start.
    pub fn query(&self, q: &Query) -> Result<Vec<QueryHit>> {
        if q.is_empty() {
            return Err(CorpusError::EmptyQuery);
        }
        if let Some(c) = &q.category_id {
            if self.taxonomy.category(c).is_none() {
                return Err(CorpusError::UnknownCategoryInQuery(c.clone()));
            }
        }
        let mut hits = Vec::new();
        for (doc_id, entry) in &self.manifest.documents {
            if q.doc_id.as_ref().is_some_and(|d| d != doc_id) {
                continue;
            }
            if q.cohort.is_some() && entry.meta.cohort != q.cohort {
                continue;
            }
            let doc = self.get_document(doc_id)?;
            let chars: Vec<char> = doc.plain_text.chars().collect();
            let mut doc_hits: Vec<QueryHit> = Vec::new();
            for a in &doc.annotations {
                if q.category_id.as_ref().is_some_and(|c| *c != a.category_id)
                    || q.severity.is_some_and(|s| s != a.severity)
                {
                    continue;
                }
                let span_text: String = chars[a.span.start..a.span.end].iter().collect();
                if q.contains_word.as_ref().is_some_and(|w| !contains_words(&span_text, w)) {
                    continue;
                }
                let before_start = a.span.start.saturating_sub(CONTEXT_CHARS);
                let after_end = (a.span.end + CONTEXT_CHARS).min(chars.len());
                doc_hits.push(QueryHit {
                    doc_id: doc_id.clone(),
                    annotation_id: a.id.clone(),
                    category_id: a.category_id.clone(),
                    severity: a.severity,
                    span: a.span,
                    span_text,
                    context_before: chars[before_start..a.span.start].iter().collect(),
                    context_after: chars[a.span.end..after_end].iter().collect(),
                });
            }
            doc_hits.sort_by_key(|h| h.span.start);
            hits.extend(doc_hits);
        }
        Ok(hits)
    }

    /// Annotation counts and exact TQI aggregates under `weights`, optionally
    /// restricted to one cohort.
    pub fn stats(&self, weights: &WeightConfig, cohort: Option<&str>) -> Result<CorpusStats> {
        let mut counts: BTreeMap<(usize, Severity), usize> = BTreeMap::new();
        let mut tqis: Vec<Rational> = Vec::new();
        let mut document_count = 0;
        let mut annotation_count = 0;
        for (doc_id, entry) in &self.manifest.documents {
            if cohort.is_some() && entry.meta.cohort.as_deref() != cohort {
                continue;
            }
            let doc = self.get_document(doc_id)?;
            document_count += 1;
            annotation_count += doc.annotations.len();
            for a in &doc.annotations {
                let pos = self
                    .taxonomy
                    .categories
                    .iter()
                    .position(|c| c.id == a.category_id)
                    .unwrap_or(usize::MAX);
                *counts.entry((pos, a.severity)).or_default() += 1;
            }
            let n = crate::model::word_count(&doc.plain_text);
            if n > 0 {
                tqis.push(tqi_exact(&error_points(&doc, weights), n).expect("n > 0"));
            }
        }
        let tqi = if tqis.is_empty() {
            None
        } else {
            let sum = tqis.iter().fold(Rational::zero(), |acc, t| acc + t);
            let mean = sum / Rational::from_integer(tqis.len() as i64);
            let min = tqis.iter().min().expect("non-empty");
            let max = tqis.iter().max().expect("non-empty");
            Some(TqiSummary {
                documents: tqis.len(),
                mean: round_2dp(&mean),
                min: round_2dp(min),
                max: round_2dp(max),
            })
        };
        let counts = counts
            .into_iter()
            .map(|((pos, severity), count)| CategoryCount {
                category_id: self.taxonomy.categories[pos].id.clone(),
                severity,
                count,
            })
            .collect();
        Ok(CorpusStats {
            document_count,
            annotation_count,
            counts,
            tqi,
        })
    }

    /// Imports every translation unit of a segment file as an unannotated
    /// document. Ids are `<file stem>-<tuid>` (or `<file stem>-<n>`).
    pub fn import_segments(&mut self, path: &Path) -> Result<Vec<String>> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "segments".to_string());
        self.import_segment_text(&stem, &text)
    }

    pub fn import_segment_text(&mut self, prefix: &str, text: &str) -> Result<Vec<String>> {
        let pairs = parse_segments(text)?;
        let mut docs = Vec::with_capacity(pairs.len());
        for (i, pair) in pairs.into_iter().enumerate() {
            let suffix = pair.unit_id.clone().unwrap_or_else(|| format!("{:04}", i + 1));
            let doc_id = sanitize_doc_id(&format!("{prefix}-{suffix}"));
            if self.contains(&doc_id) || docs.iter().any(|d: &MarkedDocument| d.meta.doc_id == doc_id) {
                return Err(CorpusError::DocumentExists(doc_id));
            }
            let mut meta = DocumentMeta::new(doc_id);
            meta.source_lang = Some(pair.source_lang);
            meta.target_lang = Some(pair.target_lang);
            let mut doc = MarkedDocument::new(meta, pair.target);
            doc.source_text = Some(pair.source);
            docs.push(doc);
        }
        for doc in &docs {
            self.put_document(doc)?;
        }
        Ok(docs.into_iter().map(|d| d.meta.doc_id).collect())
    }
}

/// Reads `<tu>/<tuv>/<seg>` units from a TMX-like file. Each unit needs
/// exactly two variants; the source is the one matching the header's
/// `srclang`, else the first. Inline native-code elements inside `<seg>`
/// (`bpt`, `ept`, `it`, `ph`, `ut`) are dropped, other inline text is kept.
pub fn parse_segments(text: &str) -> Result<Vec<SegmentPair>> {
    struct Variant {
        lang: String,
        seg: String,
    }

    let malformed = |msg: String| CorpusError::MalformedSegmentFile(msg);
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(false);

    let mut srclang: Option<String> = None;
    let mut units: Vec<(Option<String>, Vec<Variant>)> = Vec::new();
    let mut in_tu = false;
    let mut lang: Option<String> = None;
    let mut in_seg = false;
    let mut skip_depth = 0usize;
    let mut seg = String::new();

    let decoder = reader.decoder();
    let attr = |e: &quick_xml::events::BytesStart, names: &[&[u8]]| -> Result<Option<String>> {
        for a in e.attributes() {
            let a = a.map_err(|err| malformed(err.to_string()))?;
            if names.contains(&a.key.as_ref()) {
                let v = a
                    .decode_and_unescape_value(decoder)
                    .map_err(|err| malformed(err.to_string()))?;
                return Ok(Some(v.into_owned()));
            }
        }
        Ok(None)
    };

    loop {
        let event = reader
            .read_event()
            .map_err(|e| malformed(format!("at byte {}: {e}", reader.error_position())))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                match e.name().as_ref() {
                    b"header" => srclang = attr(e, &[b"srclang"])?,
                    b"tu" if !empty => {
                        in_tu = true;
                        units.push((attr(e, &[b"tuid"])?, Vec::new()));
                    }
                    b"tuv" if in_tu && !empty => {
                        lang = Some(
                            attr(e, &[b"xml:lang", b"lang"])?
                                .ok_or_else(|| malformed(format!("unit {}: <tuv> without xml:lang", units.len())))?,
                        );
                    }
                    b"seg" if lang.is_some() && !empty => {
                        in_seg = true;
                        seg.clear();
                    }
                    b"seg" if lang.is_some() => {
                        seg.clear();
                        let lang = lang.clone().expect("checked");
                        units.last_mut().expect("inside tu").1.push(Variant { lang, seg: String::new() });
                    }
                    b"bpt" | b"ept" | b"it" | b"ph" | b"ut" if in_seg && !empty => skip_depth += 1,
                    _ => {}
                }
            }
            Event::End(ref e) => match e.name().as_ref() {
                b"tu" => in_tu = false,
                b"tuv" => lang = None,
                b"seg" if in_seg => {
                    in_seg = false;
                    let lang = lang.clone().expect("inside tuv");
                    units
                        .last_mut()
                        .expect("inside tu")
                        .1
                        .push(Variant { lang, seg: std::mem::take(&mut seg) });
                }
                b"bpt" | b"ept" | b"it" | b"ph" | b"ut" if skip_depth > 0 => skip_depth -= 1,
                _ => {}
            },
            Event::Text(t) if in_seg && skip_depth == 0 => {
                seg.push_str(&t.unescape().map_err(|e| malformed(e.to_string()))?);
            }
            Event::CData(t) if in_seg && skip_depth == 0 => {
                seg.push_str(&String::from_utf8_lossy(&t));
            }
            Event::Eof => break,
            _ => {}
        }
    }

    if units.is_empty() {
        return Err(malformed("no <tu> translation units found".to_string()));
    }
    units
        .into_iter()
        .enumerate()
        .map(|(i, (unit_id, mut variants))| {
            let unit = i + 1;
            match variants.len() {
                0 | 1 => return Err(CorpusError::MissingVariant { unit, found: variants.len() }),
                2 => {}
                n => return Err(malformed(format!("unit {unit} has {n} variants; expected 2"))),
            }
            if srclang.as_ref().is_some_and(|s| variants[1].lang.eq_ignore_ascii_case(s))
                && !srclang.as_ref().is_some_and(|s| variants[0].lang.eq_ignore_ascii_case(s))
            {
                variants.swap(0, 1);
            }
            let target = variants.pop().expect("two variants");
            let source = variants.pop().expect("two variants");
            Ok(SegmentPair {
                unit_id,
                source_lang: source.lang,
                source: source.seg,
                target_lang: target.lang,
                target: target.seg,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_UNITS: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<tmx version="1.4">
  <header srclang="en" datatype="plaintext"/>
  <body>
    <tu tuid="1">
      <tuv xml:lang="en"><seg>Machine translation.</seg></tuv>
      <tuv xml:lang="ru"><seg>Машинный перевод.</seg></tuv>
    </tu>
    <tu tuid="2">
      <tuv xml:lang="ru"><seg>Поисковые &lt;машины&gt;</seg></tuv>
      <tuv xml:lang="en"><seg>Search <ph x="1">&lt;b&gt;</ph>engines</seg></tuv>
    </tu>
    <tu>
      <tuv lang="en"><seg><![CDATA[A & B]]></seg></tuv>
      <tuv lang="ru"><seg>А и Б</seg></tuv>
    </tu>
  </body>
</tmx>"#;

    #[test]
    fn parses_units() {
        let pairs = parse_segments(THREE_UNITS).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].source, "Machine translation.");
        assert_eq!(pairs[0].target, "Машинный перевод.");
        assert_eq!(pairs[1].source_lang, "en", "srclang decides the source");
        assert_eq!(pairs[1].source, "Search engines");
        assert_eq!(pairs[1].target, "Поисковые <машины>");
        assert_eq!(pairs[2].source, "A & B");
        assert_eq!(pairs[2].unit_id, None);
    }

    #[test]
    fn rejects_bad_files() {
        let one = "<tmx><body><tu><tuv xml:lang='en'><seg>x</seg></tuv></tu></body></tmx>";
        assert!(matches!(parse_segments(one), Err(CorpusError::MissingVariant { unit: 1, found: 1 })));
        assert!(matches!(parse_segments("<tmx><body/></tmx>"), Err(CorpusError::MalformedSegmentFile(_))));
        assert!(matches!(parse_segments("<tmx><body><tu>"), Err(CorpusError::MalformedSegmentFile(_)) | Err(CorpusError::MissingVariant { .. })));
        let no_lang = "<tmx><body><tu><tuv><seg>x</seg></tuv></tu></body></tmx>";
        assert!(matches!(parse_segments(no_lang), Err(CorpusError::MalformedSegmentFile(_))));
    }

    #[test]
    fn doc_id_rules() {
        assert!(is_valid_doc_id("seg-0001"));
        assert!(is_valid_doc_id("a.b_c"));
        assert!(!is_valid_doc_id("../x"));
        assert!(!is_valid_doc_id(".hidden"));
        assert!(!is_valid_doc_id(""));
        assert_eq!(sanitize_doc_id("my file/1"), "my-file-1");
        assert_eq!(sanitize_doc_id("_x"), "d_x");
    }

    #[test]
    fn whole_word_matching() {
        assert!(contains_words("the Magazine article", "magazine"));
        assert!(!contains_words("magazines", "magazine"));
        assert!(contains_words("a new-magazine", "magazine"));
        assert!(contains_words("the magazine article", "MAGAZINE article"));
        assert!(!contains_words("the magazine big article", "magazine article"));
        assert!(!contains_words("anything", " ,"));
    }
}
