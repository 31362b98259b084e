//! Test support: random valid documents and independent oracles.
//!
//! Nothing here calls the code paths it is used to check: documents are
//! assembled field by field, and the query oracle matches words with regular
//! expressions instead of the crate's tokenizer.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use regex::Regex;
use tqamark_core::{Annotation, DocumentMeta, MarkedDocument, Severity, Span, Taxonomy};

const VOCAB: &[&str] = &[
    "the", "magazine", "Magazine", "article", "translation", "critic", "machine", "перевод",
    "журнал", "статья", "ничего", "«голубой", "мечтой»", "R&D", "a<b", "x>y", "it's", "\"quoted\"",
    "term", "grail", "42", "state-of-the-art", "\u{2014}", ",", ".", "café", "naïve",
];

const NOTES: &[&str] = &["addition of information", "it's <odd> & \"quoted\"", "слово", "x"];

/// Path of a file in the repository's `fixtures/` directory.
pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn random_text<R: Rng>(rng: &mut R, words: usize) -> String {
    let mut out = String::new();
    for i in 0..words {
        if i > 0 {
            out.push(if rng.gen_bool(0.1) { '\n' } else { ' ' });
        }
        out.push_str(VOCAB.choose(rng).unwrap());
    }
    out
}

fn nested_spans<R: Rng>(
    rng: &mut R,
    range: (usize, usize),
    depth: usize,
    max_depth: usize,
    budget: &mut usize,
    out: &mut Vec<Span>,
) {
    let (lo, hi) = range;
    let mut cursor = lo;
    while *budget > 0 && cursor < hi && rng.gen_bool(0.6) {
        let start = rng.gen_range(cursor..hi);
        let end = rng.gen_range(start + 1..=hi);
        out.push(Span::new(start, end));
        *budget -= 1;
        if depth < max_depth && end - start > 1 {
            nested_spans(rng, (start, end), depth + 1, max_depth, budget, out);
        }
        if rng.gen_bool(0.1) && *budget > 0 {
            // identical span, allowed
            out.push(Span::new(start, end));
            *budget -= 1;
        }
        cursor = end;
    }
}

/// A valid document under `taxonomy`: random text, up to `max_annotations`
/// properly nested mistakes, nesting depth at most `max_depth`.
pub fn random_document<R: Rng>(
    rng: &mut R,
    taxonomy: &Taxonomy,
    doc_id: &str,
    max_annotations: usize,
    max_depth: usize,
) -> MarkedDocument {
    let words = rng.gen_range(1..40);
    let text = random_text(rng, words);
    let len = text.chars().count();
    let mut spans = Vec::new();
    let mut budget = rng.gen_range(0..=max_annotations);
    nested_spans(rng, (0, len), 1, max_depth, &mut budget, &mut spans);

    let mut meta = DocumentMeta::new(doc_id);
    meta.cohort = Some(["freshman", "senior"].choose(rng).unwrap().to_string());
    let mut doc = MarkedDocument::new(meta, text);
    for (i, span) in spans.into_iter().enumerate() {
        let category = taxonomy.categories.choose(rng).expect("taxonomy has categories");
        let allowed: Vec<Severity> = category.allowed_severities.iter().copied().collect();
        doc.annotations.push(Annotation {
            id: format!("a{}", i + 1),
            category_id: category.id.clone(),
            severity: *allowed.choose(rng).unwrap(),
            span,
            note: rng.gen_bool(0.15).then(|| NOTES.choose(rng).unwrap().to_string()),
        });
    }
    doc.sort_annotations();
    doc
}

/// One brute-force hit: (doc id, annotation id, span).
pub type OracleHit = (String, String, Span);

/// Linear scan over in-memory documents. Word filters use a Unicode
/// word-boundary regex rather than the crate's tokenizer.
pub fn brute_force_query(
    docs: &[MarkedDocument],
    category: Option<&str>,
    severity: Option<Severity>,
    word: Option<&str>,
    cohort: Option<&str>,
) -> Vec<OracleHit> {
    let word_re = word.map(|w| {
        let parts: Vec<String> = w.split_whitespace().map(regex::escape).collect();
        Regex::new(&format!(r"(?i)(^|[^\p{{L}}\p{{N}}]){}($|[^\p{{L}}\p{{N}}])", parts.join(r"[^\p{L}\p{N}]+"))).unwrap()
    });
    let mut sorted: Vec<&MarkedDocument> = docs.iter().collect();
    sorted.sort_by(|a, b| a.meta.doc_id.cmp(&b.meta.doc_id));
    let mut hits = Vec::new();
    for doc in sorted {
        if cohort.is_some() && doc.meta.cohort.as_deref() != cohort {
            continue;
        }
        let chars: Vec<char> = doc.plain_text.chars().collect();
        let mut doc_hits = Vec::new();
        for a in &doc.annotations {
            if category.is_some_and(|c| c != a.category_id) || severity.is_some_and(|s| s != a.severity) {
                continue;
            }
            let text: String = chars[a.span.start..a.span.end].iter().collect();
            if let Some(re) = &word_re {
                if !re.is_match(&text) {
                    continue;
                }
            }
            doc_hits.push((doc.meta.doc_id.clone(), a.id.clone(), a.span));
        }
        doc_hits.sort_by_key(|h| h.2.start);
        hits.extend(doc_hits);
    }
    hits
}

/// Removes tags and resolves the five predefined entities.
pub fn strip_markup(s: &str) -> String {
    let tags = Regex::new(r#"<[^'">]*(?:'[^']*'[^'">]*|"[^"]*"[^'">]*)*>"#).unwrap();
    unescape(&tags.replace_all(s, ""))
}

/// Removes ANSI SGR escape sequences.
pub fn strip_ansi(s: &str) -> String {
    Regex::new("\x1b\\[[0-9;]*m").unwrap().replace_all(s, "").into_owned()
}

fn unescape(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

/// Checks that `<span …>` / `</span>` wrappers are balanced.
pub fn spans_balanced(html: &str) -> bool {
    let re = Regex::new(r"<(/?)span\b[^>]*>").unwrap();
    let mut depth: i64 = 0;
    for cap in re.captures_iter(html) {
        depth += if cap[1].is_empty() { 1 } else { -1 };
        if depth < 0 {
            return false;
        }
    }
    depth == 0
}
