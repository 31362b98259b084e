//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;
use tqamark_core::corpus::Query;
use tqamark_core::{
    compute_tqi, error_points, parse, parse_with, render, score, serialize, word_count, AssessmentConfig, Corpus,
    DiagnosticKind, DocumentMeta, OutputMode, ParseOptions, Rational, Representation, RoundingMode, Severity,
    Span, Taxonomy,
};
use tqamark_service::{router, AppState};
use tqamark_testkit::{brute_force_query, random_document, read_fixture, strip_ansi, strip_markup};

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, Box<dyn FnOnce() -> Check>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let detail = f()?;
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(format!("{detail} ({} ms)", took.as_millis()))
}

fn ac1_worked_example() -> Check {
    timed(Duration::from_secs(1), || {
        let config = AssessmentConfig::default();
        let tax = &config.taxonomy;
        let doc = parse(&read_fixture("example.tqm"), tax).map_err(|e| e.to_string())?;
        let kinds: Vec<_> = doc.annotations.iter().map(|a| (a.category_id.as_str(), a.severity)).collect();
        ensure(kinds == [("style", Severity::Critical), ("content", Severity::Minor)], || format!("annotations {kinds:?}"))?;
        let words = word_count(&doc.plain_text);
        ensure(words == 53, || format!("word count {words}"))?;
        let points = error_points(&doc, &config.weights);
        ensure(points == Rational::from_integer(4), || format!("error points {points}"))?;
        let scale = config.scale("freshman").ok_or("no freshman scale")?;
        let exact = score(&doc, tax, &config.weights, scale, RoundingMode::Exact2dp).map_err(|e| e.to_string())?;
        let tqi = exact.tqi_display.to_f64().unwrap();
        ensure((tqi - 92.45).abs() <= 0.005, || format!("exact TQI {tqi}"))?;
        let trunc = score(&doc, tax, &config.weights, scale, RoundingMode::TruncateErrorPercentage)
            .map_err(|e| e.to_string())?;
        ensure(trunc.tqi_display == Rational::from_integer(93), || format!("truncated TQI {}", trunc.tqi_display))?;
        ensure(exact.grade == "good" && trunc.grade == "good", || format!("grades {} / {}", exact.grade, trunc.grade))?;
        Ok(format!("2 annotations, 53 words, 4 points, TQI {} / {}, grade good", exact.tqi_text(), trunc.tqi_text()))
    })
}

fn ac2_cohort_grading() -> Check {
    let config = AssessmentConfig::default();
    let doc = parse(&read_fixture("tqi90.tqm"), &config.taxonomy).map_err(|e| e.to_string())?;
    let mut grades = Vec::new();
    for name in ["freshman", "senior"] {
        let scale = config.scale(name).ok_or(format!("no {name} scale"))?;
        let r = score(&doc, &config.taxonomy, &config.weights, scale, RoundingMode::Exact2dp).map_err(|e| e.to_string())?;
        ensure(r.tqi_display == Rational::from_integer(90), || format!("fixture TQI {}", r.tqi_display))?;
        grades.push(r.grade);
    }
    ensure(grades == ["good", "satisfactory"], || format!("grades {grades:?}"))?;
    Ok("TQI 90: freshman good, senior satisfactory".into())
}

fn ac3_round_trip() -> Check {
    timed(Duration::from_secs(10), || {
        let tax = Taxonomy::default_dialect();
        let mut rng = ChaCha8Rng::seed_from_u64(0x7a11);
        let mut annotations = 0;
        for i in 0..1000 {
            let doc = random_document(&mut rng, &tax, "d", 20, 3);
            annotations += doc.annotations.len();
            let text = serialize(&doc, &tax).map_err(|e| format!("doc {i}: {e}"))?;
            let back = parse(&text, &tax).map_err(|e| format!("doc {i}: {e}"))?;
            ensure(back.plain_text == doc.plain_text && back.annotation_signature() == doc.annotation_signature(), || {
                format!("doc {i}: parse(serialize(d)) != d for {text:?}")
            })?;
            ensure(strip_markup(&text) == doc.plain_text, || format!("doc {i}: strip mismatch for {text:?}"))?;
        }
        Ok(format!("1000 documents, {annotations} annotations, 0 failures"))
    })
}

fn ac4_rendering() -> Check {
    let config = AssessmentConfig::default();
    let doc = parse(&read_fixture("example.tqm"), &config.taxonomy).map_err(|e| e.to_string())?;
    let mut outputs = 0;
    for name in ["severity-highlight", "critical-only", "plain"] {
        let repr = config.representation(name).ok_or(format!("no representation {name}"))?;
        for mode in [OutputMode::Html, OutputMode::Ansi] {
            let out = render(&doc, &config.taxonomy, &repr.with_mode(mode)).map_err(|e| e.to_string())?;
            let stripped = match mode {
                OutputMode::Html => strip_markup(&out),
                _ => strip_ansi(&out),
            };
            ensure(stripped == doc.plain_text, || format!("{name}/{mode:?} does not reproduce the text"))?;
            outputs += 1;
        }
    }
    let html = render(&doc, &config.taxonomy, &Representation::critical_only()).map_err(|e| e.to_string())?;
    let crit = html.matches("sev-critical").count();
    let minor = html.matches("sev-minor").count();
    ensure(crit == 1 && minor == 0, || format!("critical-only: {crit} sev-critical, {minor} sev-minor"))?;
    Ok(format!("{outputs} outputs reproduce plain text; critical-only has 1 sev-critical, 0 sev-minor"))
}

fn battery() -> Vec<Query> {
    let q = |c: Option<&str>, s: Option<Severity>, w: Option<&str>| Query {
        category_id: c.map(String::from),
        severity: s,
        contains_word: w.map(String::from),
        ..Query::default()
    };
    use Severity::*;
    vec![
        q(Some("content"), None, Some("magazine")),
        q(Some("content"), None, None),
        q(Some("form"), None, None),
        q(Some("style"), None, None),
        q(None, Some(Minor), None),
        q(None, Some(Major), None),
        q(None, Some(Critical), None),
        q(Some("content"), Some(Critical), None),
        q(Some("form"), Some(Minor), None),
        q(Some("style"), Some(Major), None),
        q(None, None, Some("magazine")),
        q(None, None, Some("MAGAZINE")),
        q(None, None, Some("перевод")),
        q(None, None, Some("the magazine")),
        q(Some("form"), None, Some("article")),
        q(Some("style"), Some(Critical), Some("the")),
        q(None, Some(Minor), Some("state")),
        q(None, None, Some("café")),
        q(Some("content"), Some(Minor), Some("magazine")),
        q(None, None, Some("zeppelin")),
    ]
}

fn ac5_query_oracle() -> Check {
    let tax = Taxonomy::default_dialect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut corpus = Corpus::init(dir.path().join("c"), "seeded", &tax).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let docs: Vec<_> = (0..50)
        .map(|i| random_document(&mut rng, &tax, &format!("doc-{i:02}"), 20, 3))
        .collect();
    for d in &docs {
        corpus.put_document(d).map_err(|e| e.to_string())?;
    }
    let queries = battery();
    let mut total = 0;
    let mut magazine = 0;
    for (i, q) in queries.iter().enumerate() {
        let got: Vec<_> = corpus
            .query(q)
            .map_err(|e| format!("query {i}: {e}"))?
            .into_iter()
            .map(|h| (h.doc_id, h.annotation_id, h.span))
            .collect();
        let expected = brute_force_query(
            &docs,
            q.category_id.as_deref(),
            q.severity,
            q.contains_word.as_deref(),
            q.cohort.as_deref(),
        );
        ensure(got == expected, || format!("query {i} {q:?}: {} hits, oracle {}", got.len(), expected.len()))?;
        if i == 0 {
            magazine = got.len();
        }
        total += got.len();
    }
    ensure(magazine > 0, || "content/magazine query matched nothing".into())?;
    Ok(format!(
        "{} queries over 50 documents, {total} hits ({magazine} content/magazine), all equal to the linear scan",
        queries.len()
    ))
}

fn ac6_scoring_properties() -> Check {
    let config = AssessmentConfig::default();
    let tax = &config.taxonomy;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    for i in 0..500 {
        let doc = random_document(&mut rng, tax, "m", 10, 3);
        let words = word_count(&doc.plain_text);
        if words == 0 {
            continue;
        }
        let before = compute_tqi(&error_points(&doc, &config.weights), words, RoundingMode::Exact2dp).unwrap();
        let len = doc.char_len();
        let start = rng.gen_range(0..len);
        let end = rng.gen_range(start + 1..=len);
        let cat = &tax.categories[rng.gen_range(0..tax.categories.len())].id;
        let sev = Severity::ALL[rng.gen_range(0..3)];
        if let Ok((more, _)) = doc.add_annotation(tax, cat, sev, Span::new(start, end), None) {
            let after = compute_tqi(&error_points(&more, &config.weights), words, RoundingMode::Exact2dp).unwrap();
            ensure(after <= before, || format!("doc {i}: TQI rose from {before} to {after}"))?;
            checked += 1;
        }
        let k = Rational::new(rng.gen_range(1..50), rng.gen_range(1..10));
        let scaled = error_points(&doc, &config.weights.scaled(&k));
        let base = error_points(&doc, &config.weights);
        ensure(scaled == base * k, || format!("doc {i}: scaling by {k} gave {scaled}, expected {}", base * k))?;
    }
    for mode in [RoundingMode::Exact2dp, RoundingMode::TruncateErrorPercentage] {
        let t = compute_tqi(&Rational::from_integer(12), 10, mode).map_err(|e| e.to_string())?;
        ensure(t.is_zero(), || format!("12 points / 10 words gave {t} in {mode}"))?;
    }
    let mut samples = 0;
    for scale in &config.scales {
        for n in 0..10_000 {
            let tqi = match n {
                0 => Rational::zero(),
                1 => Rational::from_integer(100),
                _ => Rational::new(rng.gen_range(0..=1_000_000), 10_000),
            };
            let grade = scale.assign(&tqi);
            let containing: Vec<_> = scale
                .bands
                .iter()
                .filter(|b| b.lower <= tqi && (tqi < b.upper || (b.upper == Rational::from_integer(100) && tqi == b.upper)))
                .collect();
            ensure(containing.len() == 1 && containing[0].label == grade, || {
                format!("scale {}: TQI {tqi} -> {grade:?}, {} containing bands", scale.name, containing.len())
            })?;
            samples += 1;
        }
    }
    Ok(format!("{checked} monotonic additions, 500 scalings exact, clamp at 0, {samples} grade samples total"))
}

fn char_offset(text: &str, needle: &str) -> usize {
    text[..text.find(needle).expect("needle")].chars().count()
}

fn ac7_rejections() -> Check {
    let tax = Taxonomy::default_dialect();
    let cases: Vec<(&str, &str, DiagnosticKind, &str)> = vec![
        ("unknown tag", "Перевод <term_mistake weight='minor'>x</term_mistake>", DiagnosticKind::UnknownTag, "<term_mistake"),
        ("missing weight", "«ничего» <form_mistake>x</form_mistake>", DiagnosticKind::MissingSeverityAttribute, "<form_mistake"),
        ("bad severity", "слово <style_mistake weight='fatal'>y</style_mistake>", DiagnosticKind::BadSeverityValue, "fatal"),
        ("unclosed", "текст <content_mistake weight='major'>без конца", DiagnosticKind::UnbalancedTags, "<content_mistake"),
        ("stray end tag", "конец</form_mistake>", DiagnosticKind::UnbalancedTags, "</form_mistake>"),
        (
            "partial overlap",
            "a <form_mistake weight='minor'>b <style_mistake weight='major'>в</form_mistake> c</style_mistake>",
            DiagnosticKind::UnbalancedTags,
            "</form_mistake>",
        ),
    ];
    for (label, input, kind, at) in &cases {
        let expected = char_offset(input, at);
        match parse_with(input, &tax, DocumentMeta::new("r"), ParseOptions::default()) {
            Ok(_) => return Err(format!("{label}: yielded a document")),
            Err(f) => {
                let first = &f.0[0];
                ensure(first.kind == *kind && first.offset == expected, || {
                    format!("{label}: got {:?} at {}, expected {kind:?} at {expected}", first.kind, first.offset)
                })?;
            }
        }
    }
    Ok(format!("{} rejection cases, kinds and offsets exact, no documents", cases.len()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8_lossy(&bytes).into_owned())
}

fn cli_score_json(fixture: &Path, cwd: &Path) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tqamark"))
        .args(["score", "--json"])
        .arg(fixture)
        .current_dir(cwd)
        .env_remove("TQAMARK_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

async fn ac8_service_contract() -> Check {
    let config = AssessmentConfig::default();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().join("corpus");
    let mut corpus = Corpus::init(&root, "acc", &config.taxonomy).map_err(|e| e.to_string())?;
    let doc = parse_with(&read_fixture("example.tqm"), &config.taxonomy, DocumentMeta::new("example"), ParseOptions::default())
        .map_err(|e| e.to_string())?;
    corpus.put_document(&doc).map_err(|e| e.to_string())?;
    let app = router(AppState::new(corpus, config));

    let uri = "/api/documents/example/annotations";
    // the closing period of the first sentence, outside both mistakes
    let dot = char_offset(&doc.plain_text, "делая.") + "делая".chars().count();
    let body = |start: usize, end: usize| {
        format!(r#"{{"category_id":"form","severity":"minor","span":{{"start":{start},"end":{end}}},"base_version":1}}"#)
    };
    let (a, b) = tokio::join!(
        tokio::spawn({
            let app = app.clone();
            let body = body(dot, dot + 1);
            async move { call(&app, Method::POST, uri, Some(body)).await }
        }),
        tokio::spawn({
            let app = app.clone();
            let body = body(0, 3);
            async move { call(&app, Method::POST, uri, Some(body)).await }
        }),
    );
    let (a, b) = (a.unwrap(), b.unwrap());
    let mut statuses = [a.0, b.0];
    statuses.sort();
    ensure(statuses == [StatusCode::CREATED, StatusCode::CONFLICT], || format!("concurrent posts gave {statuses:?}"))?;
    let created = if a.0 == StatusCode::CREATED { &a.1 } else { &b.1 };
    let created: serde_json::Value = serde_json::from_str(created).map_err(|e| e.to_string())?;
    ensure(created["version"] == 2, || format!("version after post {}", created["version"]))?;
    let aid = created["annotation"]["id"].as_str().ok_or("no annotation id")?.to_string();

    let (s, _) = call(&app, Method::DELETE, &format!("{uri}/{aid}?base_version=1"), None).await;
    ensure(s == StatusCode::CONFLICT, || format!("stale delete gave {s}"))?;
    let (s, _) = call(&app, Method::DELETE, &format!("{uri}/{aid}?base_version=2"), None).await;
    ensure(s == StatusCode::OK, || format!("delete gave {s}"))?;

    let cli = cli_score_json(&tqamark_testkit::fixture("example.tqm"), dir.path())?;
    let (s, api) = call(&app, Method::GET, "/api/documents/example/score", None).await;
    ensure(s == StatusCode::OK, || format!("score endpoint gave {s}"))?;
    ensure(api == cli, || format!("score bodies differ:\nservice: {api}\ncli: {cli}"))?;
    Ok(format!("one 201 + one 409, stale delete 409, score body identical to CLI ({} bytes)", api.len()))
}

fn main() {
    let runtime = tokio::runtime::Runtime::new().expect("runtime");
    let criteria: Vec<Criterion> = vec![
        ("AC1", "worked example end to end", Box::new(ac1_worked_example)),
        ("AC2", "cohort grading", Box::new(ac2_cohort_grading)),
        ("AC3", "round-trip property", Box::new(ac3_round_trip)),
        ("AC4", "rendering invariance", Box::new(ac4_rendering)),
        ("AC5", "query oracle equivalence", Box::new(ac5_query_oracle)),
        ("AC6", "scoring properties", Box::new(ac6_scoring_properties)),
        ("AC7", "parser rejection suite", Box::new(ac7_rejections)),
        ("AC8", "service contract", Box::new(move || runtime.block_on(ac8_service_contract()))),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        match check() {
            Ok(detail) => println!("[PASS] {id} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
