//! The critic's worked example: a student's Russian translation with one
//! critical style mistake and one minor content mistake.

use tqamark_core::{
    compute_tqi, error_points, parse, roundtrip_check, score, serialize, word_count, AssessmentConfig,
    DocumentMeta, MarkedDocument, Rational, RoundingMode, Severity, Span, Taxonomy, WeightConfig,
};
use tqamark_testkit::read_fixture;

const STYLE_SPAN: &str = "«ничего» не делая";
const CONTENT_SPAN: &str = "И хотя результаты машинного перевода оставляют желать лучшего";

fn char_span(text: &str, needle: &str) -> Span {
    let byte = text.find(needle).expect("needle present");
    let start = text[..byte].chars().count();
    Span::new(start, start + needle.chars().count())
}

#[test]
fn parse_yields_two_mistakes() {
    let tax = Taxonomy::default_dialect();
    let doc = parse(&read_fixture("example.tqm"), &tax).unwrap();
    assert_eq!(doc.annotations.len(), 2);

    let style = &doc.annotations[0];
    assert_eq!((style.category_id.as_str(), style.severity), ("style", Severity::Critical));
    assert_eq!(doc.span_text(style.span), Some(STYLE_SPAN));

    let content = &doc.annotations[1];
    assert_eq!((content.category_id.as_str(), content.severity), ("content", Severity::Minor));
    assert_eq!(doc.span_text(content.span), Some(CONTENT_SPAN));

    assert!(doc.plain_text.starts_with("Два способа переводить «ничего» не делая. Уже"));
    assert!(!doc.plain_text.contains('<'));
    assert!(doc.validate(&tax).is_empty());
}

#[test]
fn fifty_three_words() {
    let doc = parse(&read_fixture("example.tqm"), &Taxonomy::default_dialect()).unwrap();
    assert_eq!(word_count(&doc.plain_text), 53);
}

#[test]
fn built_by_hand_matches_parsed() {
    let tax = Taxonomy::default_dialect();
    let parsed = parse(&read_fixture("example.tqm"), &tax).unwrap();
    let text = parsed.plain_text.clone();

    let doc = MarkedDocument::new(DocumentMeta::new("example"), text.clone());
    let (doc, _) = doc
        .add_annotation(&tax, "style", Severity::Critical, char_span(&text, STYLE_SPAN), None)
        .unwrap();
    let (doc, _) = doc
        .add_annotation(&tax, "content", Severity::Minor, char_span(&text, CONTENT_SPAN), None)
        .unwrap();
    assert_eq!(doc.annotation_signature(), parsed.annotation_signature());
    assert_eq!(serialize(&doc, &tax).unwrap(), read_fixture("example.tqm"));
}

#[test]
fn serialize_reproduces_the_marked_passage() {
    let tax = Taxonomy::default_dialect();
    let source = read_fixture("example.tqm");
    let doc = parse(&source, &tax).unwrap();
    assert_eq!(serialize(&doc, &tax).unwrap(), source);
    assert!(roundtrip_check(&source, &tax).unwrap());
}

#[test]
fn scoring_end_to_end() {
    let config = AssessmentConfig::default();
    let doc = parse(&read_fixture("example.tqm"), &config.taxonomy).unwrap();
    let weights = WeightConfig::default();
    assert_eq!(error_points(&doc, &weights), Rational::from_integer(4));

    assert_eq!(
        compute_tqi(&Rational::from_integer(4), 53, RoundingMode::Exact2dp).unwrap(),
        Rational::new(9245, 100)
    );
    let scale = config.scale("freshman").unwrap();
    let report = score(&doc, &config.taxonomy, &weights, scale, RoundingMode::TruncateErrorPercentage).unwrap();
    assert_eq!(report.total_error_points, Rational::from_integer(4));
    assert_eq!(report.word_count, 53);
    assert_eq!(report.tqi_display, Rational::from_integer(93));
    assert_eq!(report.tqi_exact, Rational::new(4900, 53));
    assert_eq!(report.grade, "good");

    let exact = score(&doc, &config.taxonomy, &weights, scale, RoundingMode::Exact2dp).unwrap();
    assert_eq!(exact.tqi_text(), "92.45");
    assert_eq!(exact.grade, "good");
}
