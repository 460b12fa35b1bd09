use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use ifl_core::corpus::{build_deterministic, build_with_generator, CorpusRecord, CritiqueExample, CritiqueRecord};
use ifl_core::critic::{
    evaluate_critic, thresholds_from_report, train_critic as train, AnswerContext, AspectEvaluation, Critic,
    CriticParams, EpochRecord,
};
use ifl_core::feedback::{BandThresholds, FeedbackItem};
use ifl_core::gateway::{ChatClient, Generator, MockGenerator, MockScript};
use ifl_core::ifl::{
    aggregate_report, default_references, read_run_log, run_batch, write_run_log, EvalSettings, IflReport, RunManifest,
    REPORT_COLUMNS,
};
use ifl_core::jsonl::{read_jsonl, write_jsonl};
use ifl_core::metrics::{ItemMetrics, LexicalJudge};
use ifl_core::synthetic::synthetic_corpus;
use serde::{Deserialize, Serialize};

use crate::config::{FileConfig, GeneratorConfig};
use crate::{BuildMode, GeneratorChoice, ReferenceSource};

fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>> {
    let records: Vec<CorpusRecord> = read_jsonl(path).with_context(|| format!("corpus {}", path.display()))?;
    ensure!(!records.is_empty(), "corpus {} is empty", path.display());
    Ok(records)
}

fn read_critiques(path: &Path) -> Result<Vec<CritiqueExample>> {
    let records: Vec<CritiqueRecord> = read_jsonl(path).with_context(|| format!("critique data {}", path.display()))?;
    ensure!(!records.is_empty(), "critique data {} is empty", path.display());
    Ok(records.into_iter().map(CritiqueExample::from).collect())
}

fn read_params(path: &Path) -> Result<CriticParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read params {}", path.display()))?;
    CriticParams::from_json(&text).with_context(|| format!("schema violation in params {}", path.display()))
}

fn read_thresholds(path: &Path) -> Result<BandThresholds> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read thresholds {}", path.display()))?;
    let t: BandThresholds =
        serde_json::from_str(&text).with_context(|| format!("schema violation in thresholds {}", path.display()))?;
    t.validate()
        .with_context(|| format!("invalid thresholds in {}", path.display()))?;
    Ok(t)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_thresholds(path: &Path, evaluation: &[AspectEvaluation]) -> Result<BandThresholds> {
    let thresholds =
        thresholds_from_report(evaluation).context("measured rewards do not separate positives from negatives")?;
    write_json(path, &thresholds)?;
    ensure!(
        read_thresholds(path)? == thresholds,
        "thresholds file {} did not round-trip",
        path.display()
    );
    Ok(thresholds)
}

fn make_generator(
    config: &GeneratorConfig,
    choice: Option<GeneratorChoice>,
    corpus: &[CorpusRecord],
    seed: u64,
) -> Result<Box<dyn Generator>> {
    let config = match (choice, config) {
        (None, c) => c.clone(),
        (Some(GeneratorChoice::Chat), c @ GeneratorConfig::Chat(_)) => c.clone(),
        (Some(GeneratorChoice::Chat), _) => {
            bail!("--generator chat needs a [generator] config section with kind = \"chat\"")
        }
        (Some(GeneratorChoice::MockFeedback), _) => GeneratorConfig::MockFeedback,
        (Some(GeneratorChoice::MockEcho), _) => GeneratorConfig::MockEcho,
    };
    Ok(match config {
        GeneratorConfig::Chat(c) => Box::new(ChatClient::new(c).context("chat client")?),
        GeneratorConfig::MockFeedback => Box::new(MockGenerator::new(MockScript::feedback_responsive_from_corpus(
            corpus, seed,
        ))),
        GeneratorConfig::MockEcho => Box::new(MockGenerator::new(MockScript::echo_from_corpus(corpus))),
        GeneratorConfig::MockScript { path } => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read mock script {}", path.display()))?;
            let script: MockScript = serde_json::from_str(&text)
                .with_context(|| format!("schema violation in mock script {}", path.display()))?;
            Box::new(MockGenerator::new(script))
        }
    })
}

pub fn build_corpus(input: &Path, out: &Path, mode: BuildMode, seed: Option<u64>, config: Option<&Path>) -> Result<()> {
    let config = FileConfig::load(config)?;
    let seed = seed.or(config.seed).unwrap_or(0);
    let records = read_corpus(input)?;
    let examples = match mode {
        BuildMode::Deterministic => build_deterministic(&records, seed)?,
        BuildMode::Llm => {
            let generator = make_generator(&config.generator, None, &records, seed)?;
            build_with_generator(&records, generator.as_ref(), config.decode, seed)?
        }
    };
    let wire: Vec<CritiqueRecord> = examples.iter().map(CritiqueRecord::from).collect();
    write_jsonl(out, &wire)?;
    let back: Vec<CritiqueRecord> = read_jsonl(out).with_context(|| format!("re-reading {}", out.display()))?;
    ensure!(back == wire, "critique file {} did not round-trip", out.display());
    println!(
        "wrote {} critique examples for {} questions to {}",
        wire.len(),
        records.len(),
        out.display()
    );
    Ok(())
}

pub struct TrainArgs {
    pub data: PathBuf,
    pub out: PathBuf,
    pub epochs: Option<usize>,
    pub rate: Option<f64>,
    pub seed: Option<u64>,
    pub l2: Option<f64>,
    pub holdout: Option<f64>,
    pub batch_size: Option<usize>,
    pub report: Option<PathBuf>,
    pub thresholds_out: Option<PathBuf>,
    pub config: Option<PathBuf>,
}

fn critic_table(evaluation: &[AspectEvaluation]) -> String {
    let mut out = format!(
        "| {:<11} | {:>12} | {:>21} | {:>21} |\n|{}|{}|{}|{}|\n",
        "Aspect",
        "Accuracy (%)",
        "Avg Reward (positive)",
        "Avg Reward (negative)",
        "-".repeat(13),
        "-".repeat(14),
        "-".repeat(23),
        "-".repeat(23)
    );
    for e in evaluation {
        out.push_str(&format!(
            "| {:<11} | {:>12.2} | {:>21.2} | {:>21.2} |\n",
            e.aspect.title(),
            e.accuracy * 100.0,
            e.avg_positive,
            e.avg_negative
        ));
    }
    out
}

pub fn train_critic(args: TrainArgs) -> Result<()> {
    let config = FileConfig::load(args.config.as_deref())?;
    let mut train_config = config.train;
    train_config.seed = args.seed.or(config.seed).unwrap_or(train_config.seed);
    if let Some(v) = args.epochs {
        train_config.epochs = v;
    }
    if let Some(v) = args.rate {
        train_config.rate = v;
    }
    if let Some(v) = args.l2 {
        train_config.l2 = v;
    }
    if let Some(v) = args.holdout {
        train_config.holdout = v;
    }
    if args.batch_size.is_some() {
        train_config.batch_size = args.batch_size;
    }
    let examples = read_critiques(&args.data)?;
    let (params, report) = train(&examples, &train_config)?;

    write_text(&args.out, &params.to_json())?;
    ensure!(
        read_params(&args.out)? == params,
        "params file {} did not round-trip",
        args.out.display()
    );
    if let Some(path) = &args.report {
        write_jsonl(path, &report.epochs)?;
        let back: Vec<EpochRecord> = read_jsonl(path).with_context(|| format!("re-reading {}", path.display()))?;
        ensure!(
            back.len() == report.epochs.len(),
            "training report {} is incomplete",
            path.display()
        );
    }
    if let Some(path) = &args.thresholds_out {
        write_thresholds(path, &report.evaluation)?;
    }
    println!(
        "trained on {} questions, evaluated on {} held-out questions",
        report.train_questions, report.heldout_questions
    );
    print!("{}", critic_table(&report.evaluation));
    Ok(())
}

pub fn eval_critic(data: &Path, params: &Path, json: Option<&Path>, thresholds_out: Option<&Path>) -> Result<()> {
    let examples = read_critiques(data)?;
    let params = read_params(params)?;
    let evaluation = evaluate_critic(&params, &examples);
    if let Some(path) = json {
        write_json(path, &evaluation)?;
        let text = std::fs::read_to_string(path)?;
        let back: Vec<AspectEvaluation> = serde_json::from_str(&text)?;
        ensure!(
            back.len() == evaluation.len(),
            "evaluation file {} is incomplete",
            path.display()
        );
    }
    if let Some(path) = thresholds_out {
        write_thresholds(path, &evaluation)?;
    }
    print!("{}", critic_table(&evaluation));
    Ok(())
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    id: &'a str,
    feedback: Vec<FeedbackItem>,
}

pub fn score(
    params: &Path,
    question_file: &Path,
    thresholds: Option<&Path>,
    config: Option<&Path>,
    json: bool,
) -> Result<()> {
    let config = FileConfig::load(config)?;
    let thresholds = match thresholds {
        Some(p) => read_thresholds(p)?,
        None => config.thresholds,
    };
    let params = read_params(params)?;
    let text = std::fs::read_to_string(question_file)
        .with_context(|| format!("cannot read question file {}", question_file.display()))?;
    let record: CorpusRecord = serde_json::from_str(&text)
        .with_context(|| format!("schema violation in question file {}", question_file.display()))?;
    let answer = record
        .answer
        .clone()
        .ok_or_else(|| anyhow!("question file {} has no answer to score", question_file.display()))?;
    let ctx = AnswerContext::new(record.to_question(), record.docs.clone(), answer);
    if !ctx.citations_valid() {
        log::warn!("answer cites documents that are not in the question file");
    }
    let feedback: Vec<FeedbackItem> = params
        .score_all(&ctx)
        .into_iter()
        .map(|s| FeedbackItem::from_score(s, &thresholds))
        .collect();
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&ScoreOutput {
                id: &record.id,
                feedback
            })?
        );
        return Ok(());
    }
    println!(
        "| {:<11} | {:>8} | {:>8} | {:<10} |",
        "Aspect", "Raw", "Clipped", "Band"
    );
    for f in &feedback {
        println!(
            "| {:<11} | {:>8.2} | {:>8.2} | {:<10} |",
            f.aspect.title(),
            f.score.raw,
            f.score.clipped,
            format!("{:?}", f.band)
        );
    }
    println!();
    for f in &feedback {
        println!("{}", f.text);
    }
    Ok(())
}

pub struct RunArgs {
    pub corpus: PathBuf,
    pub params: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub manifest: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_iterations: Option<usize>,
    pub parallelism: Option<usize>,
    pub generator: Option<GeneratorChoice>,
    pub thresholds: Option<PathBuf>,
    pub no_early_stop: bool,
}

fn manifest_path(runs: &Path) -> PathBuf {
    runs.with_extension("manifest.json")
}

pub fn run_ifl(args: RunArgs) -> Result<()> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let config = FileConfig::load(args.config.as_deref())?;
    let mut ifl_config = config.ifl;
    ifl_config.seed = args.seed.or(config.seed).unwrap_or(ifl_config.seed);
    if let Some(v) = args.max_iterations {
        ifl_config.max_iterations = v;
    }
    if let Some(v) = args.parallelism {
        ifl_config.parallelism = v;
    }
    if args.no_early_stop {
        ifl_config.early_stop_all_praise = false;
    }
    ifl_config.decode = config.decode;
    let thresholds = match &args.thresholds {
        Some(p) => read_thresholds(p)?,
        None => config.thresholds,
    };
    let corpus = read_corpus(&args.corpus)?;
    let params = read_params(&args.params)?;
    let generator = make_generator(&config.generator, args.generator, &corpus, ifl_config.seed)?;

    let results = run_batch(&corpus, generator.as_ref(), &params, &thresholds, &ifl_config);
    let mut runs = Vec::new();
    let mut failures = BTreeMap::new();
    for (record, result) in corpus.iter().zip(results) {
        match result {
            Ok(run) => runs.push(run),
            Err(e) => {
                log::error!("question {}: {e}", record.id);
                failures.insert(record.id.clone(), e.to_string());
            }
        }
    }

    write_run_log(&args.out, &runs).with_context(|| format!("cannot write run log {}", args.out.display()))?;
    let back = read_run_log(&args.out).with_context(|| format!("re-reading {}", args.out.display()))?;
    ensure!(back.len() == runs.len(), "run log {} is incomplete", args.out.display());

    let manifest = RunManifest {
        config: ifl_config,
        thresholds,
        generator_model: generator.model_id(),
        critic: format!("linear:{}", args.params.display()),
        corpus: Some(args.corpus.display().to_string()),
        run_log: args.out.display().to_string(),
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        questions: corpus.len(),
        completed: runs.len(),
        failures,
        wall_time_ms: RunManifest::wall_times(&runs),
    };
    let manifest_file = args.manifest.clone().unwrap_or_else(|| manifest_path(&args.out));
    write_json(&manifest_file, &manifest)?;
    let text = std::fs::read_to_string(&manifest_file)?;
    let _: RunManifest = serde_json::from_str(&text).context("manifest did not round-trip")?;

    let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
    for run in &runs {
        *reasons.entry(format!("{:?}", run.stop_reason)).or_default() += 1;
    }
    println!(
        "{} of {} questions completed; stop reasons {:?}; log {}",
        runs.len(),
        corpus.len(),
        reasons,
        args.out.display()
    );
    if !manifest.failures.is_empty() {
        bail!(
            "{} question(s) failed at the base generation; see {}",
            manifest.failures.len(),
            manifest_file.display()
        );
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ItemLine {
    iteration: usize,
    #[serde(flatten)]
    metrics: ItemMetrics,
}

pub fn report(
    runs_path: &Path,
    out: &Path,
    corpus: Option<&Path>,
    config: Option<&Path>,
    items_out: Option<&Path>,
    references: ReferenceSource,
) -> Result<()> {
    let config = FileConfig::load(config)?;
    let runs = read_run_log(runs_path).with_context(|| format!("run log {}", runs_path.display()))?;
    let corpus_path = match corpus {
        Some(p) => p.to_path_buf(),
        None => {
            let mpath = manifest_path(runs_path);
            let text = std::fs::read_to_string(&mpath)
                .with_context(|| format!("no --corpus given and cannot read manifest {}", mpath.display()))?;
            let manifest: RunManifest = serde_json::from_str(&text)
                .with_context(|| format!("schema violation in manifest {}", mpath.display()))?;
            PathBuf::from(
                manifest
                    .corpus
                    .ok_or_else(|| anyhow!("manifest names no corpus; pass --corpus"))?,
            )
        }
    };
    let corpus = read_corpus(&corpus_path)?;
    let references = match references {
        ReferenceSource::Gold => default_references(&corpus),
        ReferenceSource::Docs => corpus
            .iter()
            .flat_map(|r| r.docs.iter().map(|d| d.body.clone()))
            .collect(),
    };
    let embedder = config.embedder.build()?;
    let settings = EvalSettings {
        judge: &LexicalJudge::default(),
        embedder: embedder.as_ref(),
        references,
        mauve: config.mauve,
    };
    let table = aggregate_report(&runs, &corpus, &settings)?;
    write_text(out, &(table.to_json() + "\n"))?;
    let back: IflReport = serde_json::from_str(&std::fs::read_to_string(out)?)
        .with_context(|| format!("report {} did not round-trip", out.display()))?;
    ensure!(back.columns == REPORT_COLUMNS, "report columns are wrong");
    ensure!(back.rows.len() == table.rows.len(), "report rows are incomplete");

    if let Some(path) = items_out {
        let lines: Vec<ItemLine> = table
            .items
            .iter()
            .enumerate()
            .flat_map(|(iteration, items)| {
                items
                    .iter()
                    .cloned()
                    .map(move |metrics| ItemLine { iteration, metrics })
            })
            .collect();
        write_jsonl(path, &lines)?;
        let back: Vec<ItemLine> = read_jsonl(path)?;
        ensure!(
            back.len() == lines.len(),
            "item metrics {} are incomplete",
            path.display()
        );
    }
    print!("{}", table.render_text());
    Ok(())
}

pub fn gen_synthetic(questions: usize, seed: u64, out: &Path) -> Result<()> {
    ensure!(questions >= 4, "the synthetic corpus needs at least 4 questions");
    let corpus = synthetic_corpus(questions, seed);
    write_jsonl(out, &corpus)?;
    let back: Vec<CorpusRecord> = read_jsonl(out).with_context(|| format!("re-reading {}", out.display()))?;
    ensure!(back == corpus, "corpus {} did not round-trip", out.display());
    println!("wrote {questions} synthetic questions to {}", out.display());
    Ok(())
}
