//! `tqamark`: validate, score, render and query marked-up translations.
//!
//! Exit codes: 0 success, 1 domain failure (invalid mark-up, unknown scale,
//! bad query), 2 environment or configuration failure.

use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tqamark_core::scalar::Scalar;
use tqamark_core::{
    default_stylesheet, export_dtd, parse_with, render, report_json, score, AssessmentConfig, ConfigError,
    Corpus, CorpusError, DocumentMeta, MarkedDocument, OutputMode, ParseFailure, ParseOptions, Query,
    RoundingMode, ScoreReport, Severity,
};
use tqamark_service::AppState;

const CONFIG_ENV: &str = "TQAMARK_CONFIG";
const LOCAL_CONFIG: &str = "tqamark.config";

#[derive(Parser)]
#[command(name = "tqamark", version, about = "Translation mistake mark-up toolkit")]
struct Cli {
    /// Assessment config (TOML). Falls back to $TQAMARK_CONFIG, then
    /// ./tqamark.config, then built-in defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a marked-up file; diagnostics go to stderr.
    Validate { file: PathBuf },
    /// Compute error points, TQI and grade.
    Score {
        file: PathBuf,
        #[arg(long)]
        scale: Option<String>,
        /// exact-2dp (exact) or truncate-error-percentage (truncate).
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Render a file under a named representation.
    Render {
        file: PathBuf,
        #[arg(long, short = 'r', default_value = "severity-highlight")]
        representation: String,
        /// Overrides the representation's own output mode.
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Write here instead of stdout. HTML output also gets a stylesheet
        /// next to it.
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
    /// Create an empty corpus.
    Init {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Store a marked-up file in a corpus.
    Add {
        #[arg(long)]
        corpus: PathBuf,
        file: PathBuf,
        /// Document id; defaults to the file stem.
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        student: Option<String>,
        #[arg(long)]
        cohort: Option<String>,
    },
    /// Find marked mistakes in a corpus.
    Query {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        filter: QueryArgs,
        #[arg(long)]
        json: bool,
    },
    /// Mistake counts and TQI aggregates for a corpus.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        cohort: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Import source/target pairs from a TMX segment file.
    Import {
        #[arg(long)]
        corpus: PathBuf,
        file: PathBuf,
    },
    /// Rebuild a corpus manifest from its document files.
    Reindex {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Run the HTTP annotation service.
    Serve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory with the built annotation UI.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Print a DTD for the configured dialect.
    ExportDtd,
    /// Print the default stylesheet for HTML output.
    Stylesheet,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    category: Option<String>,
    #[arg(long)]
    severity: Option<Severity>,
    #[arg(long)]
    word: Option<String>,
    #[arg(long)]
    cohort: Option<String>,
    #[arg(long)]
    doc: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Html,
    Ansi,
    Plain,
}

impl From<Format> for OutputMode {
    fn from(f: Format) -> Self {
        match f {
            Format::Html => OutputMode::Html,
            Format::Ansi => OutputMode::Ansi,
            Format::Plain => OutputMode::Plain,
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn domain(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    fn env(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    /// Exit 1 without a message; details were already printed.
    fn silent() -> Self {
        Failure { code: 1, message: String::new() }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        if e.is_environmental() {
            Failure::env(e.to_string())
        } else {
            Failure::domain(e.to_string())
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::env(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn load_config(explicit: Option<&Path>) -> Result<AssessmentConfig, Failure> {
    if let Some(path) = explicit {
        return Ok(AssessmentConfig::load(path)?);
    }
    let local = Path::new(LOCAL_CONFIG);
    if local.is_file() {
        return Ok(AssessmentConfig::load(local)?);
    }
    Ok(AssessmentConfig::default())
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::env(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::env(format!("cannot write {}: {e}", path.display())))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "document".into())
}

fn report_diagnostics(failure: &ParseFailure) {
    for d in &failure.0 {
        eprintln!("{d}");
    }
}

fn load_document(path: &Path, config: &AssessmentConfig, meta: DocumentMeta) -> Result<MarkedDocument, Failure> {
    let text = read_file(path)?;
    parse_with(&text, &config.taxonomy, meta, ParseOptions::default()).map_err(|f| {
        report_diagnostics(&f);
        Failure::silent()
    })
}

fn validate(config: &AssessmentConfig, file: &Path) -> Outcome {
    load_document(file, config, DocumentMeta::new(file_stem(file))).map(|_| ())
}

fn human_report(report: &ScoreReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "document: {}", report.doc_id);
    let _ = writeln!(out, "words: {}", report.word_count);
    let _ = writeln!(out, "error points: {}", report.total_error_points.to_literal());
    let _ = writeln!(out, "TQI: {}", report.tqi_text());
    let _ = writeln!(out, "grade: {}", report.grade);
    let _ = writeln!(out, "scale: {}", report.scale);
    let _ = writeln!(out, "mode: {}", report.rounding_mode);
    if !report.breakdown.is_empty() {
        let _ = writeln!(out, "breakdown:");
        for b in &report.breakdown {
            let label = format!("{}/{}", b.category_id, b.severity);
            let _ = writeln!(out, "  {label:<18} {:>3}  {}", b.count, b.points.to_literal());
        }
    }
    out
}

fn score_cmd(config: &AssessmentConfig, file: &Path, scale: Option<&str>, mode: Option<&str>, json: bool) -> Outcome {
    let scale_name = scale.unwrap_or(&config.default_scale);
    let scale = config
        .scale(scale_name)
        .ok_or_else(|| Failure::domain(format!("unknown scale `{scale_name}`")))?;
    let mode = match mode {
        Some(m) => m.parse::<RoundingMode>().map_err(|e| Failure::domain(e.to_string()))?,
        None => config.rounding_mode,
    };
    let doc = load_document(file, config, DocumentMeta::new(file_stem(file)))?;
    let report = score(&doc, &config.taxonomy, &config.weights, scale, mode).map_err(|e| Failure::domain(e.to_string()))?;
    if json {
        print!("{}", report_json(&report));
    } else {
        print!("{}", human_report(&report));
    }
    Ok(())
}

fn html_page(fragment: &str, css_name: &str) -> String {
    format!(
        "<!doctype html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<link rel=\"stylesheet\" href=\"{css_name}\">\n</head>\n<body>\n<div class=\"translation\">{fragment}</div>\n</body>\n</html>\n"
    )
}

fn render_cmd(config: &AssessmentConfig, file: &Path, name: &str, format: Option<Format>, out: Option<&Path>) -> Outcome {
    let repr = config
        .representation(name)
        .ok_or_else(|| Failure::domain(format!("unknown representation `{name}`")))?;
    let repr = match format {
        Some(f) => repr.with_mode(f.into()),
        None => repr.clone(),
    };
    let doc = load_document(file, config, DocumentMeta::new(file_stem(file)))?;
    let output = render(&doc, &config.taxonomy, &repr).map_err(|e| Failure::domain(e.to_string()))?;
    match out {
        None => print!("{output}"),
        Some(path) if repr.mode == OutputMode::Html => {
            let css = path.with_extension("css");
            let css_name = css.file_name().unwrap_or_default().to_string_lossy().into_owned();
            write_file(&css, &default_stylesheet())?;
            write_file(path, &html_page(&output, &css_name))?;
        }
        Some(path) => write_file(path, &output)?,
    }
    Ok(())
}

fn add_cmd(config: &AssessmentConfig, corpus: &Path, file: &Path, id: Option<String>, student: Option<String>, cohort: Option<String>) -> Outcome {
    let mut corpus = Corpus::open(corpus)?;
    let mut meta = DocumentMeta::new(id.unwrap_or_else(|| file_stem(file)));
    meta.student = student;
    meta.cohort = cohort;
    if corpus.contains(&meta.doc_id) {
        return Err(CorpusError::DocumentExists(meta.doc_id).into());
    }
    let doc = load_document(file, config, meta)?;
    corpus.put_document(&doc)?;
    println!("added {}", doc.meta.doc_id);
    Ok(())
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\t', '\r'], " ")
}

fn query_cmd(corpus: &Path, filter: QueryArgs, json: bool) -> Outcome {
    let corpus = Corpus::open(corpus)?;
    let query = Query {
        category_id: filter.category,
        severity: filter.severity,
        contains_word: filter.word,
        cohort: filter.cohort,
        doc_id: filter.doc,
    };
    let hits = corpus.query(&query)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&hits).expect("hits serialize"));
        return Ok(());
    }
    for h in hits {
        println!(
            "{}\t{}-{}\t{}\t{}\t{}",
            h.doc_id,
            h.span.start,
            h.span.end,
            h.category_id,
            h.severity,
            one_line(&h.span_text)
        );
    }
    Ok(())
}

fn stats_cmd(config: &AssessmentConfig, corpus: &Path, cohort: Option<&str>, json: bool) -> Outcome {
    let corpus = Corpus::open(corpus)?;
    let stats = corpus.stats(&config.weights, cohort)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
        return Ok(());
    }
    println!("documents: {}", stats.document_count);
    println!("annotations: {}", stats.annotation_count);
    for c in &stats.counts {
        println!("  {}/{}: {}", c.category_id, c.severity, c.count);
    }
    if let Some(t) = &stats.tqi {
        println!("mean TQI: {}", t.mean.to_fixed(2));
        println!("min TQI: {}", t.min.to_fixed(2));
        println!("max TQI: {}", t.max.to_fixed(2));
    }
    Ok(())
}

fn serve_cmd(config: AssessmentConfig, corpus: &Path, addr: SocketAddr, ui: Option<PathBuf>) -> Outcome {
    let corpus = Corpus::open(corpus)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::env(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tqamark_service::bind(addr)
            .await
            .map_err(|e| Failure::env(format!("cannot listen on {addr}: {e}")))?;
        let mut state = AppState::new(corpus, config);
        if let Some(dir) = ui {
            state = state.with_ui_dir(dir);
        }
        eprintln!("listening on http://{addr}");
        tqamark_service::serve(listener, state)
            .await
            .map_err(|e| Failure::env(e.to_string()))
    })
}

fn run(cli: Cli) -> Outcome {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Validate { file } => validate(&config, &file),
        Command::Score { file, scale, mode, json } => score_cmd(&config, &file, scale.as_deref(), mode.as_deref(), json),
        Command::Render { file, representation, format, out } => {
            render_cmd(&config, &file, &representation, format, out.as_deref())
        }
        Command::Init { corpus, name } => {
            let name = name.unwrap_or_else(|| file_stem(&corpus));
            Corpus::init(&corpus, &name, &config.taxonomy)?;
            println!("initialized corpus {} at {}", name, corpus.display());
            Ok(())
        }
        Command::Add { corpus, file, id, student, cohort } => add_cmd(&config, &corpus, &file, id, student, cohort),
        Command::Query { corpus, filter, json } => query_cmd(&corpus, filter, json),
        Command::Stats { corpus, cohort, json } => stats_cmd(&config, &corpus, cohort.as_deref(), json),
        Command::Import { corpus, file } => {
            let mut corpus = Corpus::open(&corpus)?;
            let ids = corpus.import_segments(&file)?;
            println!("imported {} documents", ids.len());
            Ok(())
        }
        Command::Reindex { corpus } => {
            let corpus = Corpus::rebuild(&corpus)?;
            println!("indexed {} documents", corpus.len());
            Ok(())
        }
        Command::Serve { corpus, port, host, ui } => serve_cmd(config, &corpus, SocketAddr::new(host, port), ui),
        Command::ExportDtd => {
            print!("{}", export_dtd(&config.taxonomy));
            Ok(())
        }
        Command::Stylesheet => {
            print!("{}", default_stylesheet());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("tqamark: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
