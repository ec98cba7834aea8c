use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use clipse_core::ingest::{
    ingest_predictions, parse_i2b2_xml, parse_standoff, read_standoff_jsonl, read_standoff_tsv,
    StandoffRow,
};
use clipse_core::tagger::REF_TAGGER;
use clipse_core::{
    builtin_label_map, builtin_profile, encode_component, evaluate_detached, generate_corpus,
    merge_annotations, read_corpus, render_report, scrub_document, tag_corpus, write_corpus_as,
    Corpus, DetachedCorpus, Error, EvalResult, Evaluator, LabelMap, MergeStrategy, ScenarioConfig,
    ScrubStyle, Split, StoreFormat, TaggerProfile, TemplateSet, Tokenizer, UnknownPolicy, GOLD,
};

#[derive(Parser)]
#[command(
    name = "clipse",
    version,
    about = "Storage, evaluation and scrubbing of PHI annotations on clinical notes"
)]
struct Cli {
    /// Worker threads for per-document work
    #[arg(long, global = true, env = "CLIPSE_JOBS", default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import notes and annotations into the canonical corpus layout
    Convert(ConvertArgs),
    /// Run the rule-based reference tagger
    Tag(TagArgs),
    /// Token-level evaluation of one annotation set against another
    Eval(EvalArgs),
    /// Merge several annotation sets into one
    Merge(MergeArgs),
    /// Write deidentified copies of every note
    Scrub(ScrubArgs),
    /// Export text-free token labels
    Detach(DetachArgs),
    /// Render an HTML report of hits and misses
    Report(ReportArgs),
    /// Generate a synthetic annotated corpus
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// Directory of i2b2-style XML notes
    I2b2Xml,
    /// Directory of .txt notes plus a standoff table (--annotations)
    Standoff,
    /// One JSON object per note with inline annotations
    Jsonl,
    /// Standoff TSV/JSONL predictions added to an existing corpus
    Predictions,
}

#[derive(Args)]
struct Scoring {
    /// Scenario preset: binary, hipaa-strict, multiclass or name-only
    #[arg(long, default_value = "binary", value_parser = parse_scenario)]
    scenario: ScenarioConfig,
    #[arg(long, default_value = "wordpunct", value_parser = parse_tokenizer)]
    tokenizer: Tokenizer,
    #[command(flatten)]
    labels: Labels,
}

#[derive(Args)]
struct Labels {
    /// TSV of raw_label -> category rules replacing the builtin map
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// What to do with raw labels the map does not know: error, drop or pass
    #[arg(long, value_parser = parse_policy)]
    unknown: Option<UnknownPolicy>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    format: InputFormat,
    /// Input directory (i2b2-xml, standoff) or file (jsonl, predictions)
    #[arg(long = "in")]
    input: PathBuf,
    /// Output corpus directory; must be new or empty
    #[arg(long)]
    out: PathBuf,
    /// Standoff annotation table (.tsv or .jsonl) for --format standoff
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Existing corpus for --format predictions
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Name of the imported annotation set
    #[arg(long, default_value = GOLD)]
    annotator: String,
    /// Replace an existing annotation set of the same name
    #[arg(long)]
    overwrite: bool,
    #[arg(long, default_value = "parquet", value_parser = parse_store)]
    store_format: StoreFormat,
}

#[derive(Args)]
struct TagArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TOML tagger profile; the builtin profile when absent
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value = REF_TAGGER)]
    annotator: String,
    #[arg(long)]
    overwrite: bool,
    #[arg(long, default_value = "parquet", value_parser = parse_store)]
    store_format: StoreFormat,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "detached")]
    corpus: Option<PathBuf>,
    /// Evaluate a detached JSONL export instead of a corpus
    #[arg(long, conflicts_with = "corpus")]
    detached: Option<PathBuf>,
    #[arg(long, default_value = GOLD)]
    gold: String,
    #[arg(long)]
    pred: String,
    #[command(flatten)]
    scoring: Scoring,
    /// Add entity-level exact-cover scores
    #[arg(long)]
    entity: bool,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated annotation sets to merge
    #[arg(long, value_delimiter = ',', required = true)]
    annotators: Vec<String>,
    /// union, intersection or majority:K
    #[arg(long, default_value = "union", value_parser = parse_strategy)]
    strategy: MergeStrategy,
    /// Name of the merged set
    #[arg(long = "as", default_value = "merged")]
    name: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    labels: Labels,
    #[arg(long, default_value = "parquet", value_parser = parse_store)]
    store_format: StoreFormat,
}

#[derive(Args)]
struct ScrubArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = GOLD)]
    annotator: String,
    #[arg(long, default_value = "placeholder", value_parser = parse_style)]
    style: ScrubStyle,
    /// Output directory for <doc_id>.txt files and offset_map.jsonl
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    labels: Labels,
}

#[derive(Args)]
struct DetachArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated annotation sets to export
    #[arg(long, value_delimiter = ',', default_value = GOLD)]
    annotators: Vec<String>,
    #[command(flatten)]
    scoring: Scoring,
    /// Output JSONL file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = GOLD)]
    gold: String,
    #[arg(long)]
    pred: String,
    #[command(flatten)]
    scoring: Scoring,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value = "mixed", value_parser = parse_templates)]
    templates: TemplateSet,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "parquet", value_parser = parse_store)]
    store_format: StoreFormat,
}

fn parse_scenario(s: &str) -> Result<ScenarioConfig, String> {
    ScenarioConfig::preset(s).map_err(|e| e.to_string())
}

fn parse_tokenizer(s: &str) -> Result<Tokenizer, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<UnknownPolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_store(s: &str) -> Result<StoreFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_strategy(s: &str) -> Result<MergeStrategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_style(s: &str) -> Result<ScrubStyle, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_templates(s: &str) -> Result<TemplateSet, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

type CliResult<T> = Result<T, Error>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(1);
    }
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global();
    match run(cli.command, cli.jobs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Usage(_)) { 1 } else { 2 })
        }
    }
}

fn run(command: Command, jobs: usize) -> CliResult<()> {
    match command {
        Command::Convert(a) => convert(a),
        Command::Tag(a) => tag(a),
        Command::Eval(a) => eval(a, jobs),
        Command::Merge(a) => merge(a),
        Command::Scrub(a) => scrub(a),
        Command::Detach(a) => detach(a, jobs),
        Command::Report(a) => report(a, jobs),
        Command::Synth(a) => {
            let corpus = generate_corpus(a.seed, a.n, a.templates)?;
            write_corpus_as(&corpus, &a.out, a.store_format)
        }
    }
}

impl Labels {
    fn load(&self, default_policy: UnknownPolicy) -> CliResult<LabelMap> {
        let policy = self.unknown.unwrap_or(default_policy);
        match &self.label_map {
            Some(path) => LabelMap::load_tsv(path, policy),
            None => Ok(builtin_label_map().with_policy(policy)),
        }
    }
}

impl Scoring {
    fn evaluator(&self, jobs: usize) -> CliResult<Evaluator> {
        Ok(Evaluator::new(self.scenario, self.tokenizer)
            .with_label_map(self.labels.load(UnknownPolicy::Error)?)
            .with_jobs(jobs))
    }
}

/// Refuses outputs that would land inside an input directory.
fn ensure_outside(input: &Path, out: &Path) -> CliResult<()> {
    let abs = |p: &Path| -> PathBuf {
        let p = if p.is_absolute() {
            p.to_path_buf()
        } else {
            std::env::current_dir().unwrap_or_default().join(p)
        };
        // resolve the deepest existing ancestor so symlinks compare equal
        let mut existing = p.as_path();
        let mut rest = Vec::new();
        while !existing.exists() {
            match (existing.parent(), existing.file_name()) {
                (Some(parent), Some(name)) => {
                    rest.push(name.to_owned());
                    existing = parent;
                }
                _ => break,
            }
        }
        let mut resolved = existing
            .canonicalize()
            .unwrap_or_else(|_| existing.to_path_buf());
        resolved.extend(rest.iter().rev());
        resolved
    };
    if abs(out).starts_with(abs(input)) {
        return Err(Error::Usage(format!(
            "refusing to write {} inside input {}",
            out.display(),
            input.display()
        )));
    }
    Ok(())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write(path: &Path, content: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, content).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn sorted_files(dir: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
        .collect();
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read_rows(path: &Path) -> CliResult<Vec<StandoffRow>> {
    let content = read(path)?;
    if path
        .extension()
        .is_some_and(|x| x.eq_ignore_ascii_case("jsonl"))
    {
        read_standoff_jsonl(&content)
    } else {
        read_standoff_tsv(&content)
    }
}

#[derive(Deserialize)]
struct JsonlNote {
    doc_id: String,
    text: String,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    split: Option<String>,
    #[serde(default)]
    annotations: Vec<JsonlSpan>,
}

#[derive(Deserialize)]
struct JsonlSpan {
    start: usize,
    stop: usize,
    raw_label: String,
    #[serde(default)]
    literal: Option<String>,
}

fn convert(a: ConvertArgs) -> CliResult<()> {
    ensure_outside(&a.input, &a.out)?;
    let mut corpus = Corpus::new();
    let mut annotations = Vec::new();
    match a.format {
        InputFormat::I2b2Xml => {
            for path in sorted_files(&a.input, "xml")? {
                let (doc, anns) = parse_i2b2_xml(&read(&path)?, &stem(&path), &a.annotator)?;
                corpus.add_document(doc.with_source("i2b2-xml"))?;
                annotations.extend(anns);
            }
        }
        InputFormat::Standoff => {
            let table = a.annotations.as_deref().ok_or_else(|| {
                Error::Usage("--format standoff needs --annotations <table>".into())
            })?;
            let mut rows = read_rows(table)?;
            rows.sort_by(|x, y| x.doc_id.cmp(&y.doc_id));
            for path in sorted_files(&a.input, "txt")? {
                let doc_id = stem(&path);
                let mine: Vec<StandoffRow> = rows
                    .iter()
                    .filter(|r| r.doc_id == doc_id)
                    .cloned()
                    .collect();
                let (doc, anns) = parse_standoff(&read(&path)?, &mine, &doc_id, &a.annotator)?;
                corpus.add_document(doc.with_source("standoff"))?;
                annotations.extend(anns);
            }
            if let Some(orphan) = rows.iter().find(|r| corpus.document(&r.doc_id).is_none()) {
                return Err(Error::UnknownDocument(orphan.doc_id.clone()));
            }
        }
        InputFormat::Jsonl => {
            let content = read(&a.input)?;
            for (n, line) in content.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let note: JsonlNote = serde_json::from_str(line).map_err(|e| Error::Parse {
                    context: format!("{}:{}", a.input.display(), n + 1),
                    detail: e.to_string(),
                })?;
                let rows: Vec<StandoffRow> = note
                    .annotations
                    .into_iter()
                    .map(|s| StandoffRow {
                        doc_id: note.doc_id.clone(),
                        start: s.start,
                        stop: s.stop,
                        raw_label: s.raw_label,
                        literal: s.literal.filter(|l| !l.is_empty()),
                    })
                    .collect();
                let (mut doc, anns) =
                    parse_standoff(&note.text, &rows, &note.doc_id, &a.annotator)?;
                doc = doc.with_source(note.source.unwrap_or_else(|| "jsonl".into()));
                if let Some(split) = note.split {
                    doc = doc.with_split(split.parse::<Split>()?);
                }
                corpus.add_document(doc)?;
                annotations.extend(anns);
            }
        }
        InputFormat::Predictions => {
            let base = a
                .corpus
                .as_deref()
                .ok_or_else(|| Error::Usage("--format predictions needs --corpus <dir>".into()))?;
            ensure_outside(base, &a.out)?;
            let corpus = read_corpus(base)?;
            let rows = read_rows(&a.input)?;
            let out = ingest_predictions(&corpus, &rows, &a.annotator, a.overwrite)?;
            return write_corpus_as(&out, &a.out, a.store_format);
        }
    }
    corpus.set_annotations(&a.annotator, annotations);
    corpus.validate()?;
    write_corpus_as(&corpus, &a.out, a.store_format)
}

fn tag(a: TagArgs) -> CliResult<()> {
    ensure_outside(&a.corpus, &a.out)?;
    let corpus = read_corpus(&a.corpus)?;
    let profile = match &a.profile {
        Some(path) => TaggerProfile::load(path)?,
        None => builtin_profile(),
    };
    let profile = profile.with_gazetteers(&corpus.gazetteers)?;
    let tagged = tag_corpus(&corpus, &profile, &a.annotator, a.overwrite)?;
    write_corpus_as(&tagged, &a.out, a.store_format)
}

fn eval(a: EvalArgs, jobs: usize) -> CliResult<()> {
    let evaluator = a.scoring.evaluator(jobs)?;
    let report = match (&a.corpus, &a.detached) {
        (Some(dir), _) => {
            if let Some(out) = &a.out {
                ensure_outside(dir, out)?;
            }
            let corpus = read_corpus(dir)?;
            let result = evaluator.evaluate_corpus(&corpus, &a.gold, &a.pred)?;
            let mut report = report_json(&evaluator, &a.gold, &a.pred, &result)?;
            if a.entity {
                let entity = evaluator.evaluate_entities_corpus(&corpus, &a.gold, &a.pred)?;
                report["entity"] = to_json(&entity)?;
            }
            report
        }
        (None, Some(path)) => {
            if a.entity {
                return Err(Error::Usage(
                    "--entity needs the corpus, not a detached export".into(),
                ));
            }
            let detached = DetachedCorpus::read_jsonl(path)?;
            detached.check_fingerprint(&evaluator)?;
            let result = evaluate_detached(&detached, &a.gold, &a.pred)?;
            report_json(&evaluator, &a.gold, &a.pred, &result)?
        }
        (None, None) => return Err(Error::Usage("--corpus or --detached is required".into())),
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(json_err)?;
    text.push('\n');
    match &a.out {
        Some(out) => write(out, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            }),
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse {
        context: "json".into(),
        detail: e.to_string(),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(value).map_err(json_err)
}

fn report_json(
    evaluator: &Evaluator,
    gold: &str,
    pred: &str,
    result: &EvalResult,
) -> CliResult<serde_json::Value> {
    Ok(serde_json::json!({
        "gold": gold,
        "pred": pred,
        "tokenizer": evaluator.tokenizer.name(),
        "scenario": to_json(&evaluator.scenario)?,
        "fingerprint": evaluator.fingerprint(),
        "counts": to_json(&result.counts)?,
        "per_class": to_json(&result.per_class)?,
        "micro": to_json(&result.micro)?,
        "micro_f1": result.micro.f1,
        "fn_per_1000": result.micro.fn_per_1000,
        "documents": to_json(&result.documents)?,
    }))
}

fn merge(a: MergeArgs) -> CliResult<()> {
    ensure_outside(&a.corpus, &a.out)?;
    let mut corpus = read_corpus(&a.corpus)?;
    let map = a.labels.load(UnknownPolicy::Error)?;
    let names: Vec<&str> = a.annotators.iter().map(String::as_str).collect();
    // categories are resolved on a working copy; stored sets stay as read
    let mut working = corpus.clone();
    for name in &names {
        let harmonized = map.harmonize(working.annotations(name)?)?;
        working.set_annotations(name, harmonized);
    }
    let merged = merge_annotations(&working, &names, a.strategy, &a.name)?;
    corpus.set_annotations(&a.name, merged.annotations(&a.name)?.to_vec());
    write_corpus_as(&corpus, &a.out, a.store_format)
}

#[derive(serde::Serialize)]
struct OffsetLine<'a> {
    doc_id: &'a str,
    original_start: usize,
    original_stop: usize,
    new_start: usize,
    new_stop: usize,
}

fn scrub(a: ScrubArgs) -> CliResult<()> {
    ensure_outside(&a.corpus, &a.out)?;
    if a.out.exists()
        && fs::read_dir(&a.out)
            .map(|mut d| d.next().is_some())
            .unwrap_or(true)
    {
        return Err(Error::Usage(format!(
            "output directory {} is not empty",
            a.out.display()
        )));
    }
    let corpus = read_corpus(&a.corpus)?;
    // unknown labels still get scrubbed, as generic PHI
    let map = a.labels.load(UnknownPolicy::PassAsIs)?;
    let by_doc = corpus.annotations_by_document(&a.annotator)?;
    let mut offsets = String::new();
    let mut files = Vec::new();
    for doc in corpus.documents.values() {
        let anns = map.harmonize(by_doc.get(doc.doc_id.as_str()).copied().unwrap_or(&[]))?;
        let scrubbed = scrub_document(doc, &anns, a.style)?;
        for m in &scrubbed.offset_map {
            let line = OffsetLine {
                doc_id: &doc.doc_id,
                original_start: m.original_start,
                original_stop: m.original_stop,
                new_start: m.new_start,
                new_stop: m.new_stop,
            };
            offsets.push_str(&serde_json::to_string(&line).map_err(json_err)?);
            offsets.push('\n');
        }
        files.push((
            format!("{}.txt", encode_component(&doc.doc_id)),
            scrubbed.text,
        ));
    }
    for (name, text) in files {
        write(&a.out.join(name), text.as_bytes())?;
    }
    write(&a.out.join("offset_map.jsonl"), offsets.as_bytes())
}

fn detach(a: DetachArgs, jobs: usize) -> CliResult<()> {
    ensure_outside(&a.corpus, &a.out)?;
    let corpus = read_corpus(&a.corpus)?;
    let names: Vec<&str> = a.annotators.iter().map(String::as_str).collect();
    let detached = a.scoring.evaluator(jobs)?.detach(&corpus, &names)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    detached.write_jsonl(&a.out)
}

fn report(a: ReportArgs, jobs: usize) -> CliResult<()> {
    ensure_outside(&a.corpus, &a.out)?;
    let corpus = read_corpus(&a.corpus)?;
    let evaluator = a.scoring.evaluator(jobs)?;
    let result = if corpus.documents.is_empty() {
        corpus.annotations(&a.gold)?;
        corpus.annotations(&a.pred)?;
        EvalResult::from_documents(evaluator.scenario.mode, Default::default())
    } else {
        evaluator.evaluate_corpus(&corpus, &a.gold, &a.pred)?
    };
    let html = render_report(&corpus, &a.gold, &a.pred, &evaluator, &result)?;
    write(&a.out, html.as_bytes())
}
