//! Representations: filtered, styled views of a marked document.
//!
//! Styling lives only in a [`Representation`] (and the stylesheet); the
//! document carries no presentation. Whatever the representation, the text
//! characters are emitted exactly once and in order.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{Annotation, MarkedDocument, Severity, Taxonomy, Violation};

/// Either everything or an explicit set. Written as `"all"` or a list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Filter<T: Ord> {
    All,
    Only(BTreeSet<T>),
}

impl<T: Ord> Filter<T> {
    pub fn accepts(&self, value: &T) -> bool {
        match self {
            Filter::All => true,
            Filter::Only(set) => set.contains(value),
        }
    }
}

impl<T: Ord + Serialize> Serialize for Filter<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Filter::All => s.serialize_str("all"),
            Filter::Only(set) => set.serialize(s),
        }
    }
}

impl<'de, T: Ord + DeserializeOwned> Deserialize<'de> for Filter<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T: Ord> {
            Keyword(String),
            List(BTreeSet<T>),
        }
        match Repr::<T>::deserialize(d)? {
            Repr::Keyword(k) if k == "all" => Ok(Filter::All),
            Repr::Keyword(k) => Err(serde::de::Error::custom(format!(
                "expected \"all\" or a list, found `{k}`"
            ))),
            Repr::List(set) => Ok(Filter::Only(set)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    #[default]
    None,
    Green,
    Yellow,
    Red,
}

impl Color {
    fn css(self) -> Option<&'static str> {
        match self {
            Color::None => None,
            Color::Green => Some("lightgreen"),
            Color::Yellow => Some("yellow"),
            Color::Red => Some("red"),
        }
    }

    /// SGR background code.
    fn ansi(self) -> Option<u8> {
        match self {
            Color::None => None,
            Color::Green => Some(42),
            Color::Yellow => Some(43),
            Color::Red => Some(41),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Color::None => "none",
            Color::Green => "green",
            Color::Yellow => "yellow",
            Color::Red => "red",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StyleSpec {
    #[serde(default)]
    pub background: Color,
    #[serde(default)]
    pub bold: bool,
}

impl StyleSpec {
    pub const fn new(background: Color, bold: bool) -> Self {
        StyleSpec { background, bold }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryStyle {
    pub category: String,
    /// Applies to every severity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
    pub style: StyleSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    #[default]
    Html,
    Ansi,
    Plain,
}

impl std::str::FromStr for OutputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "html" => Ok(OutputMode::Html),
            "ansi" => Ok(OutputMode::Ansi),
            "plain" => Ok(OutputMode::Plain),
            other => Err(format!("unknown output mode `{other}` (expected html, ansi or plain)")),
        }
    }
}

/// A named rendering configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representation {
    pub name: String,
    #[serde(default = "all_filter")]
    pub include_categories: Filter<String>,
    #[serde(default = "all_filter")]
    pub include_severities: Filter<Severity>,
    #[serde(default)]
    pub styles: BTreeMap<Severity, StyleSpec>,
    #[serde(default)]
    pub category_styles: Vec<CategoryStyle>,
    #[serde(default)]
    pub mode: OutputMode,
}

fn all_filter<T: Ord>() -> Filter<T> {
    Filter::All
}

impl Representation {
    /// Every mistake, minor green, major yellow, critical red, all bold.
    pub fn severity_highlight() -> Self {
        Representation {
            name: "severity-highlight".to_string(),
            include_categories: Filter::All,
            include_severities: Filter::All,
            styles: default_severity_styles(),
            category_styles: Vec::new(),
            mode: OutputMode::Html,
        }
    }

    pub fn critical_only() -> Self {
        Representation {
            name: "critical-only".to_string(),
            include_severities: Filter::Only([Severity::Critical].into_iter().collect()),
            ..Self::severity_highlight()
        }
    }

    /// Only mistakes of one category.
    pub fn category_only(category: &str) -> Self {
        Representation {
            name: format!("{category}-only"),
            include_categories: Filter::Only([category.to_string()].into_iter().collect()),
            ..Self::severity_highlight()
        }
    }

    /// No mark-up at all.
    pub fn plain() -> Self {
        Representation {
            name: "plain".to_string(),
            include_categories: Filter::All,
            include_severities: Filter::Only(BTreeSet::new()),
            styles: BTreeMap::new(),
            category_styles: Vec::new(),
            mode: OutputMode::Plain,
        }
    }

    pub fn with_mode(&self, mode: OutputMode) -> Self {
        Representation {
            mode,
            ..self.clone()
        }
    }

    fn includes(&self, a: &Annotation) -> bool {
        self.include_categories.accepts(&a.category_id) && self.include_severities.accepts(&a.severity)
    }

    fn style_for(&self, a: &Annotation) -> StyleSpec {
        let specific = self
            .category_styles
            .iter()
            .find(|c| c.category == a.category_id && c.severity == Some(a.severity))
            .or_else(|| {
                self.category_styles
                    .iter()
                    .find(|c| c.category == a.category_id && c.severity.is_none())
            });
        specific
            .map(|c| c.style)
            .or_else(|| self.styles.get(&a.severity).copied())
            .unwrap_or_default()
    }

    /// Category ids named by the representation but absent from `taxonomy`.
    pub fn unknown_categories(&self, taxonomy: &Taxonomy) -> Vec<String> {
        let mut names: BTreeSet<&str> = self.category_styles.iter().map(|c| c.category.as_str()).collect();
        if let Filter::Only(set) = &self.include_categories {
            names.extend(set.iter().map(String::as_str));
        }
        names
            .into_iter()
            .filter(|n| taxonomy.category(n).is_none())
            .map(str::to_string)
            .collect()
    }
}

fn default_severity_styles() -> BTreeMap<Severity, StyleSpec> {
    [
        (Severity::Minor, StyleSpec::new(Color::Green, true)),
        (Severity::Major, StyleSpec::new(Color::Yellow, true)),
        (Severity::Critical, StyleSpec::new(Color::Red, true)),
    ]
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("document is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidDocument(Vec<Violation>),
    #[error("representation names unknown categories: {}", .0.join(", "))]
    UnknownRepresentationFields(Vec<String>),
}

enum Event<'a> {
    Open(&'a Annotation, StyleSpec),
    Close,
}

/// Renders `doc` under `repr`.
///
/// - `html`: text escaped, each included mistake wrapped in
///   `<span class="mistake cat-… sev-… [bg-…] [bold]" data-annotation="…">`.
/// - `ansi`: SGR bold/background codes; nested mistakes show the innermost
///   background.
/// - `plain`: the plain text unchanged.
pub fn render(doc: &MarkedDocument, taxonomy: &Taxonomy, repr: &Representation) -> Result<String, RenderError> {
    let violations = doc.validate(taxonomy);
    if !violations.is_empty() {
        return Err(RenderError::InvalidDocument(violations));
    }
    let unknown = repr.unknown_categories(taxonomy);
    if !unknown.is_empty() {
        return Err(RenderError::UnknownRepresentationFields(unknown));
    }
    if repr.mode == OutputMode::Plain {
        return Ok(doc.plain_text.clone());
    }

    let mut included: Vec<&Annotation> = doc.annotations.iter().filter(|a| repr.includes(a)).collect();
    included.sort_by_key(|a| (a.span.start, std::cmp::Reverse(a.span.end)));

    // Events keyed by character position: closes before opens.
    let mut events: BTreeMap<usize, (usize, Vec<Event>)> = BTreeMap::new();
    let mut stack: Vec<&Annotation> = Vec::new();
    for a in included {
        while let Some(top) = stack.last() {
            if top.span.end <= a.span.start {
                events.entry(top.span.end).or_default().0 += 1;
                stack.pop();
            } else {
                break;
            }
        }
        events.entry(a.span.start).or_default().1.push(Event::Open(a, repr.style_for(a)));
        stack.push(a);
    }
    while let Some(top) = stack.pop() {
        events.entry(top.span.end).or_default().0 += 1;
    }

    let mut out = String::with_capacity(doc.plain_text.len() * 2);
    let mut ansi_stack: Vec<StyleSpec> = Vec::new();
    let mut pending = events.into_iter().peekable();
    for (pos, c) in doc.plain_text.chars().chain(std::iter::once('\0')).enumerate() {
        if let Some((_, (closes, opens))) = pending.next_if(|(p, _)| *p == pos) {
            for _ in 0..closes {
                emit(&mut out, repr.mode, Event::Close, &mut ansi_stack);
            }
            for open in opens {
                emit(&mut out, repr.mode, open, &mut ansi_stack);
            }
        }
        if pos == doc.char_len() {
            break;
        }
        match (repr.mode, c) {
            (OutputMode::Html, '&') => out.push_str("&amp;"),
            (OutputMode::Html, '<') => out.push_str("&lt;"),
            (OutputMode::Html, '>') => out.push_str("&gt;"),
            (_, c) => out.push(c),
        }
    }
    Ok(out)
}

fn emit(out: &mut String, mode: OutputMode, event: Event, ansi_stack: &mut Vec<StyleSpec>) {
    match (mode, event) {
        (OutputMode::Html, Event::Open(a, style)) => {
            out.push_str("<span class=\"mistake cat-");
            out.push_str(&a.category_id);
            out.push_str(" sev-");
            out.push_str(a.severity.as_str());
            if style.background != Color::None {
                out.push_str(" bg-");
                out.push_str(style.background.name());
            }
            if style.bold {
                out.push_str(" bold");
            }
            out.push_str("\" data-annotation=\"");
            for c in a.id.chars() {
                match c {
                    '&' => out.push_str("&amp;"),
                    '<' => out.push_str("&lt;"),
                    '"' => out.push_str("&quot;"),
                    c => out.push(c),
                }
            }
            out.push_str("\">");
        }
        (OutputMode::Html, Event::Close) => out.push_str("</span>"),
        (OutputMode::Ansi, event) => {
            let before = effective(ansi_stack);
            match event {
                Event::Open(_, style) => ansi_stack.push(style),
                Event::Close => {
                    ansi_stack.pop();
                }
            }
            let after = effective(ansi_stack);
            if before != after {
                if before != StyleSpec::default() {
                    out.push_str("\x1b[0m");
                }
                push_sgr(out, after);
            }
        }
        (OutputMode::Plain, _) => {}
    }
}

/// Innermost background wins; bold if any enclosing style is bold.
fn effective(stack: &[StyleSpec]) -> StyleSpec {
    StyleSpec {
        background: stack
            .iter()
            .rev()
            .map(|s| s.background)
            .find(|c| *c != Color::None)
            .unwrap_or_default(),
        bold: stack.iter().any(|s| s.bold),
    }
}

fn push_sgr(out: &mut String, style: StyleSpec) {
    let mut codes = Vec::new();
    if style.bold {
        codes.push(1);
    }
    if let Some(bg) = style.background.ansi() {
        codes.push(bg);
    }
    if !codes.is_empty() {
        let joined: Vec<String> = codes.iter().map(u8::to_string).collect();
        out.push_str(&format!("\x1b[{}m", joined.join(";")));
    }
}

/// Companion stylesheet for html output.
pub fn default_stylesheet() -> String {
    let mut css = String::from(".mistake {\n  border-radius: 2px;\n}\n");
    for (severity, style) in default_severity_styles() {
        css.push_str(&format!(
            ".sev-{} {{\n  background-color: {};\n  font-weight: bold;\n}}\n",
            severity.as_str(),
            style.background.css().expect("default styles are colored")
        ));
    }
    for color in [Color::Green, Color::Yellow, Color::Red] {
        css.push_str(&format!(
            ".bg-{} {{\n  background-color: {};\n}}\n",
            color.name(),
            color.css().expect("palette color")
        ));
    }
    css.push_str(".bold {\n  font-weight: bold;\n}\n");
    css
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DocumentMeta, Span};

    fn sample() -> (MarkedDocument, Taxonomy) {
        let tax = Taxonomy::default_dialect();
        let d = MarkedDocument::new(DocumentMeta::new("d"), "x <y> & z w");
        let (d, _) = d.add_annotation(&tax, "style", Severity::Critical, Span::new(0, 5), None).unwrap();
        let (d, _) = d.add_annotation(&tax, "content", Severity::Minor, Span::new(2, 5), None).unwrap();
        let (d, _) = d.add_annotation(&tax, "form", Severity::Major, Span::new(8, 9), None).unwrap();
        (d, tax)
    }

    #[test]
    fn html_nesting_and_escaping() {
        let (d, tax) = sample();
        let out = render(&d, &tax, &Representation::severity_highlight()).unwrap();
        assert_eq!(
            out,
            "<span class=\"mistake cat-style sev-critical bg-red bold\" data-annotation=\"a1\">x \
<span class=\"mistake cat-content sev-minor bg-green bold\" data-annotation=\"a2\">&lt;y&gt;</span></span> &amp; \
<span class=\"mistake cat-form sev-major bg-yellow bold\" data-annotation=\"a3\">z</span> w"
        );
    }

    #[test]
    fn filters_leave_no_trace() {
        let (d, tax) = sample();
        let out = render(&d, &tax, &Representation::critical_only()).unwrap();
        assert_eq!(out.matches("<span").count(), 1);
        assert!(!out.contains("sev-minor"));
        let out = render(&d, &tax, &Representation::category_only("form")).unwrap();
        assert_eq!(out.matches("<span").count(), 1);
        assert!(out.contains("cat-form"));
    }

    #[test]
    fn plain_is_identity() {
        let (d, tax) = sample();
        assert_eq!(render(&d, &tax, &Representation::plain()).unwrap(), d.plain_text);
        let html = render(&d, &tax, &Representation::plain().with_mode(OutputMode::Html)).unwrap();
        assert_eq!(html, "x &lt;y&gt; &amp; z w");
    }

    #[test]
    fn ansi_codes() {
        let (d, tax) = sample();
        let out = render(&d, &tax, &Representation::severity_highlight().with_mode(OutputMode::Ansi)).unwrap();
        assert_eq!(
            out,
            "\x1b[1;41mx \x1b[0m\x1b[1;42m<y>\x1b[0m\x1b[1;41m\x1b[0m & \x1b[1;43mz\x1b[0m w"
        );
    }

    #[test]
    fn category_style_overrides() {
        let (d, tax) = sample();
        let mut repr = Representation::severity_highlight();
        repr.category_styles.push(CategoryStyle {
            category: "form".into(),
            severity: None,
            style: StyleSpec::new(Color::None, false),
        });
        let out = render(&d, &tax, &repr).unwrap();
        assert!(out.contains("<span class=\"mistake cat-form sev-major\" data-annotation=\"a3\">"));
    }

    #[test]
    fn unknown_categories_rejected() {
        let (d, tax) = sample();
        let repr = Representation::category_only("term");
        assert_eq!(
            render(&d, &tax, &repr),
            Err(RenderError::UnknownRepresentationFields(vec!["term".into()]))
        );
    }

    #[test]
    fn stylesheet_rules() {
        let css = default_stylesheet();
        assert!(css.contains(".sev-critical {\n  background-color: red;\n  font-weight: bold;\n}"));
        assert!(css.contains(".sev-minor {\n  background-color: lightgreen;\n  font-weight: bold;\n}"));
        assert!(css.contains(".sev-major {\n  background-color: yellow;"));
    }

    #[test]
    fn filter_serde() {
        let all: Filter<Severity> = serde_json::from_str("\"all\"").unwrap();
        assert_eq!(all, Filter::All);
        let only: Filter<Severity> = serde_json::from_str("[\"critical\"]").unwrap();
        assert!(only.accepts(&Severity::Critical) && !only.accepts(&Severity::Minor));
        assert!(serde_json::from_str::<Filter<Severity>>("\"some\"").is_err());
        assert_eq!(serde_json::to_string(&Filter::<Severity>::All).unwrap(), "\"all\"");
    }
}
