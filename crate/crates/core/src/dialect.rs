//! The inline mistake dialect: plain text with mistake tags such as
//! `<content_mistake weight='minor'>…</content_mistake>`.
//!
//! [`parse`] turns tagged text into a [`MarkedDocument`]; [`serialize`] does
//! the reverse. The scanner is self-contained because dialect files are
//! mixed-content fragments without a root element.
//!
//! Character rules:
//! - `&` and `<` in text must be escaped (`&amp;`, `&lt;`); `>` may appear
//!   literally. `&gt;`, `&apos;`, `&quot;` and numeric references are
//!   accepted on input.
//! - Attribute values may use single or double quotes; output always uses
//!   single quotes.
//! - Besides the taxonomy's severity attribute, a tag may carry an optional
//!   `note` attribute.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    is_valid_name, Annotation, DocumentMeta, MarkedDocument, Severity, Span, Taxonomy, Violation,
};

pub const NOTE_ATTRIBUTE: &str = "note";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticKind {
    MalformedTag,
    UnknownTag,
    MissingSeverityAttribute,
    BadSeverityValue,
    UnbalancedTags,
    BadEscape,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A problem found while parsing; `offset` is the character position of the
/// offending character in the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub kind: DiagnosticKind,
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.offset, self.kind, self.message)
    }
}

/// All diagnostics from a failed parse. A failed parse never yields a
/// document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} parse diagnostic(s); first: {}", .0.len(), .0[0])]
pub struct ParseFailure(pub Vec<ParseDiagnostic>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("document is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidDocument(Vec<Violation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject attributes other than the severity attribute and `note`.
    pub strict_attributes: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            strict_attributes: true,
        }
    }
}

#[derive(Debug, Clone)]
struct Attribute {
    name: String,
    value: String,
    name_offset: usize,
    value_offset: usize,
}

#[derive(Debug, Clone)]
enum Token {
    Text(String),
    Start {
        name: String,
        attributes: Vec<Attribute>,
        offset: usize,
    },
    End {
        name: String,
        offset: usize,
    },
}

struct Lexer<'a> {
    chars: &'a [char],
    pos: usize,
    tokens: Vec<Token>,
    text: String,
    diagnostics: Vec<ParseDiagnostic>,
}

impl<'a> Lexer<'a> {
    fn run(chars: &'a [char]) -> (Vec<Token>, Vec<ParseDiagnostic>) {
        let mut lexer = Lexer {
            chars,
            pos: 0,
            tokens: Vec::new(),
            text: String::new(),
            diagnostics: Vec::new(),
        };
        while lexer.pos < chars.len() {
            match chars[lexer.pos] {
                '<' => match lexer.tag() {
                    Ok(token) => {
                        lexer.flush_text();
                        lexer.tokens.push(token);
                    }
                    Err(diag) => {
                        lexer.diagnostics.push(diag);
                        lexer.text.push('<');
                        lexer.pos += 1;
                    }
                },
                '&' => {
                    let at = lexer.pos;
                    match decode_entity(chars, at) {
                        Some((c, next)) => {
                            lexer.text.push(c);
                            lexer.pos = next;
                        }
                        None => {
                            lexer.diagnostics.push(bad_escape(at));
                            lexer.text.push('&');
                            lexer.pos += 1;
                        }
                    }
                }
                c => {
                    lexer.text.push(c);
                    lexer.pos += 1;
                }
            }
        }
        lexer.flush_text();
        (lexer.tokens, lexer.diagnostics)
    }

    fn flush_text(&mut self) {
        if !self.text.is_empty() {
            self.tokens.push(Token::Text(std::mem::take(&mut self.text)));
        }
    }

    fn peek(&self, at: usize) -> Option<char> {
        self.chars.get(at).copied()
    }

    fn name_at(&self, mut at: usize) -> (String, usize) {
        let start = at;
        while let Some(c) = self.peek(at) {
            let ok = if at == start {
                c.is_alphabetic() || c == '_'
            } else {
                c.is_alphanumeric() || c == '_' || c == '-' || c == ':'
            };
            if !ok {
                break;
            }
            at += 1;
        }
        (self.chars[start..at].iter().collect(), at)
    }

    fn skip_ws(&self, mut at: usize) -> usize {
        while self.peek(at).is_some_and(char::is_whitespace) {
            at += 1;
        }
        at
    }

    /// Scans a tag starting at the current `<`. On success the position is
    /// moved past the closing `>`.
    fn tag(&mut self) -> Result<Token, ParseDiagnostic> {
        let open = self.pos;
        let malformed = |offset: usize, message: &str| ParseDiagnostic {
            kind: DiagnosticKind::MalformedTag,
            offset,
            message: message.to_string(),
        };

        if self.peek(open + 1) == Some('/') {
            let (name, at) = self.name_at(open + 2);
            if name.is_empty() {
                return Err(malformed(open, "unescaped '<' (use &lt;)"));
            }
            let at = self.skip_ws(at);
            if self.peek(at) != Some('>') {
                return Err(malformed(open, &format!("end tag </{name}> is not closed by '>'")));
            }
            self.pos = at + 1;
            return Ok(Token::End { name, offset: open });
        }

        let (name, mut at) = self.name_at(open + 1);
        if name.is_empty() {
            return Err(malformed(open, "unescaped '<' (use &lt;)"));
        }
        let mut attributes: Vec<Attribute> = Vec::new();
        loop {
            let after_ws = self.skip_ws(at);
            match self.peek(after_ws) {
                Some('>') => {
                    self.pos = after_ws + 1;
                    return Ok(Token::Start {
                        name,
                        attributes,
                        offset: open,
                    });
                }
                Some('/') if self.peek(after_ws + 1) == Some('>') => {
                    return Err(malformed(open, &format!("empty element <{name}/> marks no text")));
                }
                None => return Err(malformed(open, &format!("tag <{name}> is not closed"))),
                Some(_) if after_ws == at => {
                    return Err(malformed(at, "expected whitespace before attribute"));
                }
                Some(_) => {}
            }
            let name_offset = after_ws;
            let (attr, next) = self.name_at(name_offset);
            if attr.is_empty() {
                return Err(malformed(name_offset, "expected attribute name"));
            }
            let eq = self.skip_ws(next);
            if self.peek(eq) != Some('=') {
                return Err(malformed(eq.min(self.chars.len() - 1), &format!("attribute `{attr}` has no value")));
            }
            let quote_at = self.skip_ws(eq + 1);
            let quote = match self.peek(quote_at) {
                Some(q @ ('\'' | '"')) => q,
                _ => {
                    return Err(malformed(
                        quote_at.min(self.chars.len() - 1),
                        &format!("value of `{attr}` must be quoted"),
                    ))
                }
            };
            let value_offset = quote_at + 1;
            let mut value = String::new();
            let mut i = value_offset;
            loop {
                match self.peek(i) {
                    None => return Err(malformed(open, &format!("unterminated value for `{attr}`"))),
                    Some(c) if c == quote => break,
                    Some('<') => return Err(malformed(i, "'<' inside attribute value")),
                    Some('&') => match decode_entity(self.chars, i) {
                        Some((c, next)) => {
                            value.push(c);
                            i = next;
                        }
                        None => return Err(bad_escape(i)),
                    },
                    Some(c) => {
                        value.push(c);
                        i += 1;
                    }
                }
            }
            if attributes.iter().any(|a| a.name == attr) {
                return Err(malformed(name_offset, &format!("duplicate attribute `{attr}`")));
            }
            attributes.push(Attribute {
                name: attr,
                value,
                name_offset,
                value_offset,
            });
            at = i + 1;
        }
    }
}

fn bad_escape(offset: usize) -> ParseDiagnostic {
    ParseDiagnostic {
        kind: DiagnosticKind::BadEscape,
        offset,
        message: "bare '&' or unknown entity (use &amp;)".to_string(),
    }
}

/// Decodes the entity starting at `chars[at] == '&'`; returns the character
/// and the position after the `;`.
fn decode_entity(chars: &[char], at: usize) -> Option<(char, usize)> {
    let semi = chars[at..].iter().take(12).position(|&c| c == ';')? + at;
    let body: String = chars[at + 1..semi].iter().collect();
    let c = match body.as_str() {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "apos" => '\'',
        "quot" => '"',
        _ => {
            let code = if let Some(hex) = body.strip_prefix("#x").or_else(|| body.strip_prefix("#X")) {
                u32::from_str_radix(hex, 16).ok()?
            } else {
                body.strip_prefix('#')?.parse().ok()?
            };
            char::from_u32(code).filter(|&c| c != '\0')?
        }
    };
    Some((c, semi + 1))
}

/// Parses tagged text with default options and a placeholder document id.
pub fn parse(marked_text: &str, taxonomy: &Taxonomy) -> Result<MarkedDocument, ParseFailure> {
    parse_with(
        marked_text,
        taxonomy,
        DocumentMeta::new("document"),
        ParseOptions::default(),
    )
}

pub fn parse_with(
    marked_text: &str,
    taxonomy: &Taxonomy,
    meta: DocumentMeta,
    options: ParseOptions,
) -> Result<MarkedDocument, ParseFailure> {
    struct Open {
        name: String,
        offset: usize,
        start: usize,
        /// Index into `annotations`, when the tag produced one.
        slot: Option<usize>,
    }

    let chars: Vec<char> = marked_text.chars().collect();
    let (tokens, mut diagnostics) = Lexer::run(&chars);

    let mut plain = String::with_capacity(marked_text.len());
    let mut plain_len = 0usize;
    let mut stack: Vec<Open> = Vec::new();
    let mut annotations: Vec<Annotation> = Vec::new();

    for token in tokens {
        match token {
            Token::Text(t) => {
                plain_len += t.chars().count();
                plain.push_str(&t);
            }
            Token::Start {
                name,
                attributes,
                offset,
            } => {
                let slot = match start_annotation(taxonomy, &name, &attributes, offset, options) {
                    Ok((category_id, severity, note)) => {
                        annotations.push(Annotation {
                            id: format!("a{}", annotations.len() + 1),
                            category_id,
                            severity,
                            span: Span::new(plain_len, plain_len),
                            note,
                        });
                        Some(annotations.len() - 1)
                    }
                    Err(mut diags) => {
                        diagnostics.append(&mut diags);
                        None
                    }
                };
                stack.push(Open {
                    name,
                    offset,
                    start: plain_len,
                    slot,
                });
            }
            Token::End { name, offset } => {
                let Some(depth) = stack.iter().rposition(|o| o.name == name) else {
                    diagnostics.push(ParseDiagnostic {
                        kind: DiagnosticKind::UnbalancedTags,
                        offset,
                        message: format!("end tag </{name}> has no matching start tag"),
                    });
                    continue;
                };
                if depth != stack.len() - 1 {
                    let top = &stack[stack.len() - 1];
                    diagnostics.push(ParseDiagnostic {
                        kind: DiagnosticKind::UnbalancedTags,
                        offset,
                        message: format!(
                            "end tag </{name}> crosses open <{}> (mistakes must nest)",
                            top.name
                        ),
                    });
                }
                while stack.len() > depth {
                    let open = stack.pop().expect("depth < len");
                    if let Some(slot) = open.slot {
                        annotations[slot].span.end = plain_len;
                        if plain_len == open.start {
                            diagnostics.push(ParseDiagnostic {
                                kind: DiagnosticKind::MalformedTag,
                                offset: open.offset,
                                message: format!("<{}> encloses no text", open.name),
                            });
                        }
                    }
                }
            }
        }
    }
    for open in stack {
        diagnostics.push(ParseDiagnostic {
            kind: DiagnosticKind::UnbalancedTags,
            offset: open.offset,
            message: format!("<{}> is never closed", open.name),
        });
    }

    if !diagnostics.is_empty() {
        diagnostics.sort_by_key(|d| d.offset);
        return Err(ParseFailure(diagnostics));
    }
    Ok(MarkedDocument {
        meta,
        source_text: None,
        plain_text: plain,
        annotations,
    })
}

type StartInfo = (String, Severity, Option<String>);

fn start_annotation(
    taxonomy: &Taxonomy,
    name: &str,
    attributes: &[Attribute],
    offset: usize,
    options: ParseOptions,
) -> Result<StartInfo, Vec<ParseDiagnostic>> {
    let Some(category) = taxonomy.category_by_tag(name) else {
        return Err(vec![ParseDiagnostic {
            kind: DiagnosticKind::UnknownTag,
            offset,
            message: format!("<{name}> is not a mistake tag of dialect `{}`", taxonomy.name),
        }]);
    };
    let mut diags = Vec::new();
    let mut severity = None;
    let mut note = None;
    for attr in attributes {
        if attr.name == taxonomy.severity_attribute {
            match attr.value.parse::<Severity>() {
                Ok(s) if category.allowed_severities.contains(&s) => severity = Some(s),
                Ok(s) => diags.push(ParseDiagnostic {
                    kind: DiagnosticKind::BadSeverityValue,
                    offset: attr.value_offset,
                    message: format!("severity `{s}` is not allowed for <{name}>"),
                }),
                Err(_) => diags.push(ParseDiagnostic {
                    kind: DiagnosticKind::BadSeverityValue,
                    offset: attr.value_offset,
                    message: format!(
                        "`{}` is not a severity (expected minor, major or critical)",
                        attr.value
                    ),
                }),
            }
        } else if attr.name == NOTE_ATTRIBUTE {
            note = Some(attr.value.clone());
        } else if options.strict_attributes {
            diags.push(ParseDiagnostic {
                kind: DiagnosticKind::MalformedTag,
                offset: attr.name_offset,
                message: format!("unknown attribute `{}` on <{name}>", attr.name),
            });
        }
    }
    let has_severity_attr = attributes
        .iter()
        .any(|a| a.name == taxonomy.severity_attribute);
    if !has_severity_attr {
        diags.push(ParseDiagnostic {
            kind: DiagnosticKind::MissingSeverityAttribute,
            offset,
            message: format!("<{name}> lacks the `{}` attribute", taxonomy.severity_attribute),
        });
    }
    match severity {
        Some(severity) if diags.is_empty() => Ok((category.id.clone(), severity, note)),
        _ => Err(diags),
    }
}

fn escape_text(out: &mut String, text: &str) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            c => out.push(c),
        }
    }
}

fn escape_attribute(out: &mut String, value: &str) {
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
}

fn write_start_tag(
    out: &mut String,
    tag_name: &str,
    severity_attribute: &str,
    severity: &str,
    note: Option<&str>,
) {
    out.push('<');
    out.push_str(tag_name);
    out.push(' ');
    out.push_str(severity_attribute);
    out.push_str("='");
    escape_attribute(out, severity);
    out.push('\'');
    if let Some(note) = note {
        out.push(' ');
        out.push_str(NOTE_ATTRIBUTE);
        out.push_str("='");
        escape_attribute(out, note);
        out.push('\'');
    }
    out.push('>');
}

/// Writes the document as tagged text. Output is deterministic: at equal
/// start offsets the longer annotation opens first.
pub fn serialize(doc: &MarkedDocument, taxonomy: &Taxonomy) -> Result<String, SerializeError> {
    let violations = doc.validate(taxonomy);
    if !violations.is_empty() {
        return Err(SerializeError::InvalidDocument(violations));
    }

    let mut order: Vec<&Annotation> = doc.annotations.iter().collect();
    order.sort_by_key(|a| (a.span.start, std::cmp::Reverse(a.span.end)));

    let mut out = String::with_capacity(doc.plain_text.len() + 48 * order.len());
    let mut open: Vec<(&Annotation, &str)> = Vec::new();
    let mut next = order.into_iter().peekable();
    let char_count = doc.char_len();
    let mut chars = doc.plain_text.chars();

    for pos in 0..=char_count {
        while let Some((a, tag)) = open.last() {
            if a.span.end != pos {
                break;
            }
            out.push_str("</");
            out.push_str(tag);
            out.push('>');
            open.pop();
        }
        while let Some(a) = next.next_if(|a| a.span.start == pos) {
            let tag = taxonomy
                .category(&a.category_id)
                .map(|c| c.tag_name.as_str())
                .expect("validated");
            write_start_tag(
                &mut out,
                tag,
                &taxonomy.severity_attribute,
                a.severity.as_str(),
                a.note.as_deref(),
            );
            open.push((a, tag));
        }
        if let Some(c) = chars.next() {
            match c {
                '&' => out.push_str("&amp;"),
                '<' => out.push_str("&lt;"),
                c => out.push(c),
            }
        }
    }
    Ok(out)
}

/// Rewrites tagged text into the canonical form `serialize` produces:
/// single-quoted attributes in fixed order, minimal escaping. Unknown
/// attributes are dropped when `options` allow them.
pub fn canonicalize(
    marked_text: &str,
    taxonomy: &Taxonomy,
    options: ParseOptions,
) -> Result<String, ParseFailure> {
    // Validates structure (balance, tag names, severities) first.
    parse_with(marked_text, taxonomy, DocumentMeta::new("document"), options)?;
    let chars: Vec<char> = marked_text.chars().collect();
    let (tokens, _) = Lexer::run(&chars);
    let mut out = String::with_capacity(marked_text.len());
    for token in tokens {
        match token {
            Token::Text(t) => escape_text(&mut out, &t),
            Token::Start {
                name, attributes, ..
            } => {
                let find = |n: &str| attributes.iter().find(|a| a.name == n).map(|a| a.value.as_str());
                write_start_tag(
                    &mut out,
                    &name,
                    &taxonomy.severity_attribute,
                    find(&taxonomy.severity_attribute).unwrap_or_default(),
                    find(NOTE_ATTRIBUTE),
                );
            }
            Token::End { name, .. } => {
                out.push_str("</");
                out.push_str(&name);
                out.push('>');
            }
        }
    }
    Ok(out)
}

/// True when `serialize(parse(text))` reproduces the canonical form of
/// `text`.
pub fn roundtrip_check(marked_text: &str, taxonomy: &Taxonomy) -> Result<bool, ParseFailure> {
    let doc = parse(marked_text, taxonomy)?;
    let canonical = canonicalize(marked_text, taxonomy, ParseOptions::default())?;
    Ok(serialize(&doc, taxonomy).is_ok_and(|s| s == canonical))
}

/// Document-type definition for the dialect: each mistake element has mixed
/// content (text and nested mistakes), a required severity attribute listing
/// the allowed values and an optional note.
pub fn export_dtd(taxonomy: &Taxonomy) -> String {
    let mut out = format!(
        "<!-- mistake dialect {} version {} -->\n",
        comment_safe(&taxonomy.name),
        comment_safe(&taxonomy.version)
    );
    let content: String = std::iter::once("#PCDATA")
        .chain(taxonomy.categories.iter().map(|c| c.tag_name.as_str()))
        .collect::<Vec<_>>()
        .join("|");
    for c in &taxonomy.categories {
        debug_assert!(is_valid_name(&c.tag_name));
        let severities: Vec<&str> = c.allowed_severities.iter().map(|s| s.as_str()).collect();
        out.push_str(&format!("<!ELEMENT {} ({content})*>\n", c.tag_name));
        out.push_str(&format!(
            "<!ATTLIST {} {} ({}) #REQUIRED>\n",
            c.tag_name,
            taxonomy.severity_attribute,
            severities.join("|")
        ));
        out.push_str(&format!(
            "<!ATTLIST {} {NOTE_ATTRIBUTE} CDATA #IMPLIED>\n",
            c.tag_name
        ));
    }
    out
}

fn comment_safe(s: &str) -> String {
    let mut s = s.replace("--", "- -");
    if s.ends_with('-') {
        s.push(' ');
    }
    s
}
