use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tqamark_core::{
    canonicalize, parse, render, serialize, DiagnosticKind, OutputMode, ParseOptions, Representation,
    Taxonomy,
};
use tqamark_testkit::{random_document, strip_ansi, strip_markup};

fn tax() -> Taxonomy {
    Taxonomy::default_dialect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn parse_inverts_serialize(seed in any::<u64>()) {
        let t = tax();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let doc = random_document(&mut rng, &t, "p", 20, 3);
        let text = serialize(&doc, &t).unwrap();
        let back = parse(&text, &t).unwrap();
        prop_assert_eq!(&back.plain_text, &doc.plain_text);
        prop_assert_eq!(back.annotation_signature(), doc.annotation_signature());
        prop_assert_eq!(strip_markup(&text), doc.plain_text.clone());
        prop_assert_eq!(serialize(&back, &t).unwrap(), text.clone());
        prop_assert_eq!(canonicalize(&text, &t, ParseOptions::default()).unwrap(), text);
    }

    #[test]
    fn render_preserves_text(seed in any::<u64>(), which in 0usize..4) {
        let t = tax();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let doc = random_document(&mut rng, &t, "r", 20, 3);
        let repr = [
            Representation::severity_highlight(),
            Representation::critical_only(),
            Representation::plain(),
            Representation::category_only("form"),
        ][which].clone();
        let html = render(&doc, &t, &repr.with_mode(OutputMode::Html)).unwrap();
        prop_assert_eq!(strip_markup(&html), doc.plain_text.clone());
        prop_assert!(tqamark_testkit::spans_balanced(&html));
        let ansi = render(&doc, &t, &repr.with_mode(OutputMode::Ansi)).unwrap();
        prop_assert_eq!(strip_ansi(&ansi), doc.plain_text.clone());
        prop_assert_eq!(render(&doc, &t, &repr.with_mode(OutputMode::Plain)).unwrap(), doc.plain_text.clone());
        // deterministic
        prop_assert_eq!(render(&doc, &t, &repr.with_mode(OutputMode::Html)).unwrap(), html);
    }

    #[test]
    fn shrinking_filters_only_removes_wrappers(seed in any::<u64>()) {
        let t = tax();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let doc = random_document(&mut rng, &t, "f", 20, 3);
        let all = render(&doc, &t, &Representation::severity_highlight()).unwrap();
        let crit = render(&doc, &t, &Representation::critical_only()).unwrap();
        prop_assert_eq!(strip_markup(&all), strip_markup(&crit));
        let critical = doc.annotations.iter().filter(|a| a.severity == tqamark_core::Severity::Critical).count();
        prop_assert_eq!(crit.matches("<span").count(), critical);
        prop_assert_eq!(all.matches("<span").count(), doc.annotations.len());
    }

    /// Corrupting valid mark-up either still parses into a valid document or
    /// fails with diagnostics pointing inside the input.
    #[test]
    fn corrupted_input_never_yields_invalid_document(seed in any::<u64>(), cuts in prop::collection::vec((0usize..400, 0usize..6), 1..4)) {
        let t = tax();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let doc = random_document(&mut rng, &t, "z", 10, 3);
        let mut chars: Vec<char> = serialize(&doc, &t).unwrap().chars().collect();
        for (at, what) in cuts {
            let at = at % (chars.len() + 1);
            match what {
                0 => { chars.insert(at, '<'); }
                1 => { chars.insert(at, '&'); }
                2 if at < chars.len() => { chars.remove(at); }
                3 => { chars.splice(at..at, "</form_mistake>".chars()); }
                4 => { chars.splice(at..at, "<style_mistake weight='major'>".chars()); }
                _ => { chars.insert(at, '\''); }
            }
        }
        let input: String = chars.iter().collect();
        match parse(&input, &t) {
            Ok(d) => prop_assert!(d.validate(&t).is_empty()),
            Err(failure) => {
                prop_assert!(!failure.0.is_empty());
                for d in &failure.0 {
                    prop_assert!(d.offset < chars.len(), "offset {} out of bounds", d.offset);
                    let c = chars[d.offset];
                    match d.kind {
                        DiagnosticKind::BadEscape => prop_assert_eq!(c, '&'),
                        DiagnosticKind::UnknownTag
                        | DiagnosticKind::MissingSeverityAttribute
                        | DiagnosticKind::UnbalancedTags => prop_assert_eq!(c, '<'),
                        _ => {}
                    }
                }
            }
        }
    }
}
