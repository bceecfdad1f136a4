use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use triage_core::annotations::{import_annotations, to_gold_labels, AnnotationRow, CorpusIndex};
use triage_core::corpus::{load_corpus, segment_bytes, store_transcript};
use triage_core::evaluation::{agreement_report, evaluate, ReviewOutcome};
use triage_core::jsonl;
use triage_core::passages::{attach_scores, derive_gold_passages, extract_predicted_passages};
use triage_core::pipeline::aggregate::{load_theme_scores, store_score_table};
use triage_core::pipeline::{build_windows, export_training_corpus, score_windows, write_export, LexiconScorer, Scorer};
use triage_core::reference::{gate_file_path, gate_sentences, load_gate_flags, store_gate_flags};
use triage_core::triage::{build_queue, read_queue, write_queue, TranscriptEvidence};
use triage_core::{
    BuiltinResolver, GateFlags, GoldLabelSet, PipelineConfig, Resolver, ReviewDesk, ReviewQueue, ScoreTable, Theme,
    Transcript,
};
use triage_gateway::{HttpResolver, HttpScorer};

use crate::*;

struct Ctx {
    cfg: PipelineConfig,
    state: PathBuf,
}

impl Ctx {
    fn or(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.state.join(default))
    }
    fn corpus(&self, given: &Option<PathBuf>) -> PathBuf {
        self.or(given, "corpus")
    }
    fn scores(&self, given: &Option<PathBuf>) -> PathBuf {
        self.or(given, "scores")
    }
    fn gold(&self, given: &Option<PathBuf>) -> PathBuf {
        self.or(given, "gold.jsonl")
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn theme(code: &str) -> Result<Theme> {
    Ok(code.parse()?)
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let ctx = Ctx {
        cfg: load_config(cli.config.as_deref())?,
        state: cli.state_dir,
    };
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Annotations(AnnotationsCommand::Import(a)) => import(&ctx, a),
        Command::Score(a) => score(&ctx, a),
        Command::Gate(a) => gate(&ctx, a),
        Command::Extract(a) => extract(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::ExportTrain(a) => export_train(&ctx, a),
        Command::Queue(a) => queue(&ctx, a),
        Command::Agreement(a) => agreement(a),
        Command::Decisions(DecisionsCommand::Export(a)) => decisions_export(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
    }
}

fn ingest(ctx: &Ctx, a: IngestArgs) -> Result<ExitCode> {
    let raw = std::fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let mut t = segment_bytes(&raw, &a.id, &a.aliases)?;
    if t.defendant_aliases.is_empty() {
        tracing::warn!(id = %a.id, "no defendant aliases; gating will fail for this transcript");
    }
    t.source_meta.insert("source_file".into(), serde_json::json!(a.input.display().to_string()));
    let out = ctx.corpus(&a.out);
    store_transcript(&t, &out)?;
    println!("{}: {} sentences", t.transcript_id, t.len());
    Ok(ExitCode::SUCCESS)
}

fn corpus_index(dir: &Path) -> Result<(Vec<Transcript>, CorpusIndex)> {
    let ts = load_corpus(dir).with_context(|| format!("loading corpus {}", dir.display()))?;
    let idx = ts.iter().collect();
    Ok((ts, idx))
}

fn import(ctx: &Ctx, a: ImportArgs) -> Result<ExitCode> {
    let (_, idx) = corpus_index(&ctx.corpus(&a.corpus))?;
    let (accepted, errors) = import_annotations(&a.input, &idx)?;
    let out = a.out.clone().unwrap_or_else(|| ctx.gold(&None));
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let rows: Vec<AnnotationRow> = accepted.iter().map(AnnotationRow::from).collect();
    jsonl::write_file(&out, &rows)?;
    for e in &errors {
        eprintln!("{}: {e}", a.input.display());
    }
    println!("{} annotations accepted, {} rejected", accepted.len(), errors.len());
    Ok(if errors.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

/// Gold labels from an annotation file; any invalid row is an error.
fn load_gold(path: &Path, idx: &CorpusIndex) -> Result<BTreeMap<String, GoldLabelSet>> {
    let (accepted, errors) = import_annotations(path, idx)?;
    if let Some(e) = errors.first() {
        bail!("{}: {} invalid rows, first: {e}", path.display(), errors.len());
    }
    Ok(to_gold_labels(&accepted))
}

fn http_url(rest: &str) -> String {
    if rest.starts_with("//") {
        format!("http:{rest}")
    } else if rest.starts_with("http://") || rest.starts_with("https://") {
        rest.to_string()
    } else {
        format!("http://{rest}")
    }
}

fn scorer(spec: &str) -> Result<Box<dyn Scorer>> {
    if let Some(file) = spec.strip_prefix("lexicon:") {
        return Ok(Box::new(LexiconScorer::from_file(Path::new(file))?));
    }
    if let Some(rest) = spec.strip_prefix("http:") {
        return Ok(Box::new(HttpScorer::new(&http_url(rest))));
    }
    bail!("scorer must be lexicon:<file> or http:<url>, got {spec:?}")
}

fn score(ctx: &Ctx, a: ScoreArgs) -> Result<ExitCode> {
    let theme = theme(&a.theme)?;
    let scorer = scorer(&a.scorer)?;
    let out = ctx.scores(&a.out);
    let (ts, _) = corpus_index(&ctx.corpus(&a.corpus))?;
    for t in &ts {
        let windows = build_windows(t, &ctx.cfg);
        let ws = score_windows::<f64>(&windows, theme, scorer.as_ref())
            .with_context(|| format!("scoring {}", t.transcript_id))?;
        let table = ScoreTable::build(t.transcript_id.clone(), theme, ws, t.len(), &ctx.cfg, scorer.meta())?;
        store_score_table(&table, &out)?;
        let above = table.sentence_scores.iter().filter(|&&s| s > ctx.cfg.group_threshold).count();
        println!("{} {}: {} windows, {} sentences above {}", t.transcript_id, theme, windows.len(), above, ctx.cfg.group_threshold);
    }
    Ok(ExitCode::SUCCESS)
}

fn resolver(spec: &str, names: Option<&Path>) -> Result<Box<dyn Resolver>> {
    if spec == "builtin" {
        let r = match names {
            Some(p) => BuiltinResolver::from_name_file(p)?,
            None => BuiltinResolver::default(),
        };
        return Ok(Box::new(r));
    }
    if let Some(rest) = spec.strip_prefix("http:") {
        return Ok(Box::new(HttpResolver::new(&http_url(rest))));
    }
    bail!("resolver must be builtin or http:<url>, got {spec:?}")
}

fn themes_present(scores: &Path, given: Option<&str>) -> Result<Vec<Theme>> {
    match given {
        Some(code) => Ok(vec![theme(code)?]),
        None => Ok(Theme::ALL.into_iter().filter(|t| scores.join(t.code()).is_dir()).collect()),
    }
}

fn gate(ctx: &Ctx, a: GateArgs) -> Result<ExitCode> {
    let scores = ctx.scores(&a.scores);
    let resolver = resolver(&a.resolver, a.names.as_deref())?;
    let (ts, _) = corpus_index(&ctx.corpus(&a.corpus))?;
    let by_id: BTreeMap<&str, &Transcript> = ts.iter().map(|t| (t.transcript_id.as_str(), t)).collect();
    for theme in themes_present(&scores, a.theme.as_deref())? {
        for table in load_theme_scores(&scores, theme)? {
            let t = by_id
                .get(table.transcript_id.as_str())
                .ok_or_else(|| anyhow!("scores for {} have no transcript in the corpus", table.transcript_id))?;
            let flags = gate_sentences(t, &table.sentence_scores, &ctx.cfg, resolver.as_ref())
                .with_context(|| format!("gating {} {theme}", t.transcript_id))?;
            store_gate_flags(&flags, &gate_file_path(&scores, theme, &t.transcript_id))?;
            let checked = flags.checked().count();
            let passed = flags.statuses.iter().filter(|s| s.passes()).count();
            println!("{} {theme}: {checked} checked, {passed} mention the defendant", t.transcript_id);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn flags_for(scores: &Path, theme: Theme, table: &ScoreTable) -> Result<GateFlags> {
    let path = gate_file_path(scores, theme, &table.transcript_id);
    if !path.exists() {
        bail!("{} has no gate results for {theme}; run `triage gate` first", table.transcript_id);
    }
    let flags = load_gate_flags(&path)?;
    if flags.statuses.len() != table.len() {
        bail!("{}: gate results cover {} sentences, scores cover {}", path.display(), flags.statuses.len(), table.len());
    }
    Ok(flags)
}

fn extract(ctx: &Ctx, a: ExtractArgs) -> Result<ExitCode> {
    let theme = theme(&a.theme)?;
    let scores = ctx.scores(&a.scores);
    let out = ctx.or(&a.out, &format!("passages/{}.jsonl", theme.code()));
    let mut all = Vec::new();
    for table in load_theme_scores(&scores, theme)? {
        let flags = flags_for(&scores, theme, &table)?;
        let ps = extract_predicted_passages(&table, &flags, &ctx.cfg);
        println!("{} {theme}: {} passages", table.transcript_id, ps.len());
        all.extend(ps);
    }
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    jsonl::write_file(&out, &all)?;
    Ok(ExitCode::SUCCESS)
}

fn eval(ctx: &Ctx, a: EvalArgs) -> Result<ExitCode> {
    let theme = theme(&a.theme)?;
    let scores = ctx.scores(&a.scores);
    let (_, idx) = corpus_index(&ctx.corpus(&a.corpus))?;
    let gold = load_gold(&ctx.gold(&a.gold), &idx)?;
    let out = ctx.or(&a.out, "metrics.jsonl");
    let mut reports = Vec::new();
    for table in load_theme_scores(&scores, theme)? {
        let flags = flags_for(&scores, theme, &table)?;
        let predicted = extract_predicted_passages(&table, &flags, &ctx.cfg);
        let g = gold.get(&table.transcript_id).cloned().unwrap_or_else(|| GoldLabelSet::new(&table.transcript_id));
        let r = evaluate(&table, &predicted, &g, &ctx.cfg)?;
        let show = |x: Option<f64>| x.map_or("absent".to_string(), |v| format!("{v:.4}"));
        println!(
            "{} {theme}: precision {} top-{} {} recall {}",
            r.transcript_id,
            show(r.passage_precision),
            r.top_k,
            show(r.top_k_precision),
            show(r.sentence_recall)
        );
        reports.push(r);
    }
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    jsonl::write_file(&out, &reports)?;
    Ok(ExitCode::SUCCESS)
}

fn export_train(ctx: &Ctx, a: ExportArgs) -> Result<ExitCode> {
    let theme = theme(&a.theme)?;
    let cfg = PipelineConfig {
        rng_seed: a.seed.unwrap_or(ctx.cfg.rng_seed),
        ..ctx.cfg.clone()
    };
    let (ts, idx) = corpus_index(&ctx.corpus(&a.corpus))?;
    let gold = load_gold(&ctx.gold(&a.gold), &idx)?;
    for t in &ts {
        if !gold.contains_key(&t.transcript_id) {
            tracing::warn!(transcript = %t.transcript_id, "no gold annotations; treated as all negative");
        }
    }
    let export = export_training_corpus(&ts, &gold, theme, &cfg);
    let out = ctx.or(&a.out, &format!("export/{}", theme.code()));
    write_export(&export, &out)?;
    for m in &export.meta {
        println!(
            "{}: {} positive, {} of {} negatives kept{}",
            m.transcript_id,
            m.positives,
            m.negatives_kept,
            m.negatives_available,
            m.warning.as_deref().map(|w| format!(" ({w})")).unwrap_or_default()
        );
    }
    println!("{} examples, {} folds -> {}", export.examples.len(), export.folds.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn queue(ctx: &Ctx, a: QueueArgs) -> Result<ExitCode> {
    let theme = theme(&a.theme)?;
    let cfg = PipelineConfig {
        rng_seed: a.seed.unwrap_or(ctx.cfg.rng_seed),
        ..ctx.cfg.clone()
    };
    let scores = ctx.scores(&a.scores);
    let (_, idx) = corpus_index(&ctx.corpus(&a.corpus))?;
    let gold = load_gold(&ctx.gold(&a.gold), &idx)?;
    let tables = load_theme_scores(&scores, theme)?;
    let mut parts = Vec::new();
    for table in &tables {
        let flags = flags_for(&scores, theme, table)?;
        let predicted = extract_predicted_passages(table, &flags, &cfg);
        let g = gold.get(&table.transcript_id).cloned().unwrap_or_else(|| GoldLabelSet::new(&table.transcript_id));
        let mut gold_passages = derive_gold_passages(&g, theme);
        attach_scores(&mut gold_passages, table, Some(&flags));
        parts.push((predicted, gold_passages, g));
    }
    let evidence: Vec<TranscriptEvidence<'_, f64>> = tables
        .iter()
        .zip(&parts)
        .map(|(table, (predicted, gold_passages, g))| TranscriptEvidence {
            transcript_id: &table.transcript_id,
            sentence_count: table.len(),
            predicted,
            gold_passages,
            gold: g,
            table,
        })
        .collect();
    let mut metas = Vec::new();
    for t in &tables {
        if !metas.contains(&t.scorer_meta) {
            metas.push(t.scorer_meta.clone());
        }
    }
    let q = build_queue(&evidence, &cfg, theme, metas);
    let out = ctx.or(&a.out, &format!("queues/{}.jsonl", q.queue_id));
    write_queue(&q, &out)?;
    for n in &q.provenance.notes {
        eprintln!("note: {n}");
    }
    println!("{}: {} items -> {}", q.queue_id, q.items.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn agreement(a: AgreementArgs) -> Result<ExitCode> {
    let records: Vec<ReviewOutcome> = jsonl::read_file(&a.records)?;
    let themes: Vec<Theme> = match a.theme.as_deref() {
        Some(code) => vec![theme(code)?],
        None => Theme::ALL.into_iter().filter(|t| records.iter().any(|r| r.theme == *t)).collect(),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for t in themes {
        let report = agreement_report::<f64>(&records, t)?;
        writeln!(out, "{}", serde_json::to_string(&report)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn load_queues(state: &Path) -> Result<Vec<ReviewQueue>> {
    let dir = state.join("queues");
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(&dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e).with_context(|| format!("reading {}", dir.display())),
    };
    paths.sort();
    paths
        .iter()
        .map(|p| read_queue(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn decisions_export(ctx: &Ctx, a: DecisionsExportArgs) -> Result<ExitCode> {
    let queues = load_queues(&ctx.state)?;
    let log = ctx.state.join("decisions.jsonl");
    if !log.exists() {
        bail!("no decision log at {}", log.display());
    }
    let desk = ReviewDesk::open(queues.iter().flat_map(|q| q.items.iter()), &log)?;
    let lines: Vec<String> = if a.all {
        desk.all_records().iter().map(serde_json::to_string).collect::<Result<_, _>>()?
    } else {
        desk.outcomes().iter().map(serde_json::to_string).collect::<Result<_, _>>()?
    };
    let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
    match &a.out {
        Some(p) => {
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, body)?;
            eprintln!("{} records -> {}", lines.len(), p.display());
        }
        None => print!("{body}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(ctx: &Ctx, a: ServeArgs) -> Result<ExitCode> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("invalid host or port")?;
    let corpus = ctx.corpus(&a.corpus);
    std::fs::create_dir_all(&ctx.state)?;
    let server = triage_gateway::serve(ctx.cfg.clone(), &corpus, &ctx.state, addr)?;
    eprintln!("review service listening on {}", server.url());
    server.wait()?;
    Ok(ExitCode::SUCCESS)
}
