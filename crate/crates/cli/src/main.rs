mod config;

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use world2vec::embed::{train, Annotator, EmbeddingModel, TokenKind, TrainConfig, Variant};
use world2vec::eval::{evaluate_task, judged_ndcg, parse_judgments, score_by_grade, write_judgments};
use world2vec::geo::{
    build_poi_index, parse_poi_file, parse_woeid_table, write_woeid_table, LocationResolver, WoeidTable,
    DEFAULT_POI_THRESHOLD_M,
};
use world2vec::retrieval::{
    cold_start_lookup, compose_query_vector, knn, neighbor_keyword_report, AdIndex, Anchor, RetrievalError,
    RetrievalTask,
};
use world2vec::session::{
    count_query_frequencies, filter_sessions, parse_session_log, tail_histogram, write_session_log, Session,
    DEFAULT_MAX_QUERIES,
};
use world2vec::synth::{generate, SynthConfig};
use world2vec::tagger::{
    build_extraction_tokens, parse_conll, parse_gazetteer, parse_lexicon, train_tagger, write_conll,
    write_gazetteer, write_lexicon, Gazetteer, Lexicon, QueryParser, TagReport, TaggerModel,
};

/// Bad arguments or an invalid flag combination; exits with status 1.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Location-aware session embeddings for query-to-ad retrieval.
#[derive(Parser, Debug)]
#[command(name = "world2vec", version, about)]
struct Cli {
    /// Defaults file of `key = value` lines (TOML accepted); keys are flag
    /// names, `[subcommand]` sections apply to one subcommand, flags override.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus: sessions, tagging corpus, judgments and dictionaries.
    Synth(SynthArgs),
    /// Train an embedding model from a session log.
    Train(TrainArgs),
    /// Tag queries and print their extraction sets as TSV.
    Tag(TagArgs),
    /// Build the ad index of a model.
    Index(IndexArgs),
    /// Print the top-K ads for one query as `rank<TAB>ad<TAB>cosine`.
    Retrieve(RetrieveArgs),
    /// Evaluate retrieval tasks on held-out sessions.
    Eval(EvalArgs),
    /// Corpus and model reports.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Number of cities (at most 24).
    #[arg(long, default_value_t = 20)]
    locations: usize,
    /// Number of subjects (at most 24).
    #[arg(long, default_value_t = 20)]
    subjects: usize,
    /// Planted ads per (subject, city) pair.
    #[arg(long, default_value_t = 1)]
    ads_per_pair: usize,
    /// Training sessions.
    #[arg(long, default_value_t = 50_000)]
    sessions: usize,
    /// Test sessions.
    #[arg(long, default_value_t = 5_000)]
    test_sessions: usize,
    /// Probability that a query is an implicit local query.
    #[arg(long, default_value_t = 0.4)]
    p_implicit: f64,
    /// Probability that a query is an explicit local query.
    #[arg(long, default_value_t = 0.4)]
    p_explicit: f64,
    /// Probability that a click goes to a random ad.
    #[arg(long, default_value_t = 0.2)]
    click_noise: f64,
    /// Share of test local queries using qualifiers unseen in training.
    #[arg(long, default_value_t = 0.3)]
    p_fresh: f64,
    /// Random seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug, Default)]
struct LocationArgs {
    /// Woeid hierarchy TSV (`id<TAB>level<TAB>parent`).
    #[arg(long, value_name = "FILE")]
    woeids: Option<PathBuf>,
    /// POI polygon file (`poi_id<TAB>name<TAB>lat,lon;...`).
    #[arg(long, value_name = "FILE")]
    pois: Option<PathBuf>,
    /// Use POIs instead of woeids as user locations.
    #[arg(long)]
    poi_mode: bool,
    /// Geofence distance in meters for POI assignment.
    #[arg(long, default_value_t = DEFAULT_POI_THRESHOLD_M)]
    poi_threshold: f64,
}

#[derive(Args, Debug, Default)]
struct ParserArgs {
    /// Saved tagger model (JSON).
    #[arg(long, value_name = "FILE", conflicts_with = "conll")]
    tagger: Option<PathBuf>,
    /// BIO-annotated corpus to train the tagger from.
    #[arg(long, value_name = "FILE")]
    conll: Option<PathBuf>,
    /// Tagger training epochs when training from `--conll`.
    #[arg(long, default_value_t = 10)]
    tagger_epochs: usize,
    /// Qualifier, attribute and exclusion phrases.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Location phrases to woeids.
    #[arg(long, value_name = "FILE")]
    gazetteer: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Model variant.
    #[arg(long, value_enum)]
    variant: VariantArg,
    /// Session log.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Model output path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Embedding dimension.
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Context window on each side.
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Sampled negatives per positive pair.
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    /// Passes over the corpus.
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Initial learning rate.
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    /// Final learning rate of the linear decay.
    #[arg(long, default_value_t = 1e-4)]
    lr_final: f64,
    /// Drop tokens seen fewer times.
    #[arg(long, default_value_t = 2)]
    min_count: u64,
    /// Frequent-token subsampling threshold.
    #[arg(long)]
    subsample: Option<f64>,
    /// Exponent of the negative sampling distribution.
    #[arg(long, default_value_t = 0.75)]
    power: f64,
    /// Do not use skipped ad views as negatives.
    #[arg(long)]
    no_implicit_negatives: bool,
    /// Drop sessions with more queries than this.
    #[arg(long, default_value_t = DEFAULT_MAX_QUERIES)]
    max_queries: usize,
    /// Random seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Training threads; 1 is bit-reproducible.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    location: LocationArgs,
    #[command(flatten)]
    parser: ParserArgs,
}

#[derive(Args, Debug)]
struct TagArgs {
    /// Query to tag; repeatable.
    #[arg(long)]
    query: Vec<String>,
    /// File with one query per line.
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
    /// Write the trained tagger here.
    #[arg(long, value_name = "FILE")]
    save_tagger: Option<PathBuf>,
    /// Annotated corpus to report per-tag precision and recall on.
    #[arg(long, value_name = "FILE")]
    heldout: Option<PathBuf>,
    /// Woeid hierarchy, used to ignore state-level locations.
    #[arg(long, value_name = "FILE")]
    woeids: Option<PathBuf>,
    #[command(flatten)]
    parser: ParserArgs,
}

#[derive(Args, Debug)]
struct IndexArgs {
    /// Model file.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Index output path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    /// Model file.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Prebuilt ad index; built from the model when absent.
    #[arg(long, value_name = "FILE")]
    index: Option<PathBuf>,
    /// Retrieval task: q2ad, q+l, frag_qsl, frag_sl, frag_s+l or frag_qtsl.
    #[arg(long, default_value = "q2ad", value_parser = parse_task)]
    task: RetrievalTask,
    /// Query text.
    #[arg(long)]
    query: String,
    /// Location woeid for q+l and fragment tasks.
    #[arg(long)]
    woeid: Option<String>,
    /// Number of ads to return.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    #[command(flatten)]
    parser: ParserArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Table,
    Tsv,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Model file.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Test session log.
    #[arg(long, value_name = "FILE")]
    test: PathBuf,
    /// Graded judgments (`query<TAB>ad<TAB>grade`).
    #[arg(long, value_name = "FILE")]
    judgments: Option<PathBuf>,
    /// Comma-separated tasks; defaults to q2ad,q+l plus the fragment tasks
    /// for lw2v_crf_plus models.
    #[arg(long, value_delimiter = ',', value_parser = parse_task)]
    tasks: Vec<RetrievalTask>,
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,10")]
    ks: Vec<usize>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Drop sessions with more queries than this.
    #[arg(long, default_value_t = DEFAULT_MAX_QUERIES)]
    max_queries: usize,
    #[command(flatten)]
    location: LocationArgs,
    #[command(flatten)]
    parser: ParserArgs,
}

#[derive(Subcommand, Debug)]
enum ReportCommand {
    /// Query-volume histogram by query frequency.
    Tail(TailArgs),
    /// Most frequent words among the queries nearest to an anchor.
    Keywords(KeywordArgs),
}

#[derive(Args, Debug)]
struct TailArgs {
    /// Session log.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
}

#[derive(Args, Debug)]
struct KeywordArgs {
    /// Model file.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Anchor token as KIND:token, e.g. LOC:woeid_2459115 or QUERY:pizza.
    #[arg(long)]
    anchor: String,
    /// Nearest queries to collect.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Words to print.
    #[arg(long, default_value_t = 20)]
    top: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    S2v,
    Gw2v,
    Lw2v,
    #[value(name = "lw2v_plus")]
    Lw2vPlus,
    #[value(name = "lw2v_crf_plus")]
    Lw2vCrfPlus,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::S2v => Variant::S2v,
            VariantArg::Gw2v => Variant::Gw2v,
            VariantArg::Lw2v => Variant::Lw2v,
            VariantArg::Lw2vPlus => Variant::Lw2vPlus,
            VariantArg::Lw2vCrfPlus => Variant::Lw2vCrfPlus,
        }
    }
}

fn parse_task(s: &str) -> Result<RetrievalTask, String> {
    s.parse()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn read_sessions(path: &Path) -> Result<Vec<Session>> {
    parse_session_log(open(path)?).with_context(|| format!("reading sessions from {}", path.display()))
}

fn read_woeids(path: Option<&Path>) -> Result<Option<WoeidTable>> {
    path.map(|p| parse_woeid_table(open(p)?).with_context(|| format!("reading woeids from {}", p.display())))
        .transpose()
}

fn read_model(path: &Path) -> Result<EmbeddingModel> {
    EmbeddingModel::load(open(path)?).with_context(|| format!("reading model {}", path.display()))
}

fn resolver(args: &LocationArgs) -> Result<LocationResolver> {
    let pois = match &args.pois {
        Some(p) => {
            let polygons = parse_poi_file(open(p)?).with_context(|| format!("reading POIs from {}", p.display()))?;
            Some(build_poi_index(polygons)?)
        }
        None => None,
    };
    if args.poi_mode && pois.is_none() {
        return Err(usage("--poi-mode needs --pois"));
    }
    let mut r = LocationResolver::new(read_woeids(args.woeids.as_deref())?, pois, args.poi_mode);
    r.threshold_m = args.poi_threshold;
    Ok(r)
}

/// Builds the query parser when a tagger source is given.
fn query_parser(args: &ParserArgs, woeids: Option<WoeidTable>) -> Result<Option<QueryParser>> {
    let tagger = match (&args.tagger, &args.conll) {
        (Some(path), _) => TaggerModel::load(open(path)?).with_context(|| format!("reading tagger {}", path.display()))?,
        (None, Some(path)) => {
            let corpus = parse_conll(open(path)?).with_context(|| format!("reading {}", path.display()))?;
            if args.tagger_epochs == 0 {
                return Err(usage("--tagger-epochs must be at least 1"));
            }
            let (model, report) = train_tagger(&corpus, args.tagger_epochs)?;
            log::info!("tagger training accuracy {:.4}", report.training_accuracy);
            model
        }
        (None, None) => return Ok(None),
    };
    let lexicon = match &args.lexicon {
        Some(p) => parse_lexicon(open(p)?).with_context(|| format!("reading lexicon {}", p.display()))?,
        None => Lexicon::default(),
    };
    let gazetteer = match &args.gazetteer {
        Some(p) => parse_gazetteer(open(p)?).with_context(|| format!("reading gazetteer {}", p.display()))?,
        None => Gazetteer::default(),
    };
    let mut parser = QueryParser::new(tagger, lexicon, gazetteer);
    if let Some(w) = woeids {
        parser = parser.with_woeids(w);
    }
    Ok(Some(parser))
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        n_locations: args.locations,
        n_subjects: args.subjects,
        n_ads_per_pair: args.ads_per_pair,
        n_sessions: args.sessions,
        n_test_sessions: args.test_sessions,
        p_implicit: args.p_implicit,
        p_explicit: args.p_explicit,
        click_noise: args.click_noise,
        p_fresh: args.p_fresh,
        seed: args.seed,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let corpus = generate(&config)?;
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let write = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut w = create(&path)?;
        f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
        Ok(())
    };
    write("train.tsv", &|w| write_session_log(w, &corpus.train))?;
    write("test.tsv", &|w| write_session_log(w, &corpus.test))?;
    write("truth.tsv", &|w| corpus.truth.write_tsv(w))?;
    write("tagging.conll", &|w| write_conll(w, &corpus.tagging))?;
    write("tagging_heldout.conll", &|w| write_conll(w, &corpus.tagging_heldout))?;
    write("judgments.tsv", &|w| write_judgments(w, &corpus.judgments))?;
    write("woeids.tsv", &|w| write_woeid_table(w, &corpus.woeids))?;
    write("lexicon.tsv", &|w| write_lexicon(w, &corpus.lexicon))?;
    write("gazetteer.tsv", &|w| write_gazetteer(w, &corpus.gazetteer))?;
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let variant = Variant::from(args.variant);
    let config = TrainConfig {
        dim: args.dim,
        window: args.window,
        negatives: args.negatives,
        epochs: args.epochs,
        lr_initial: args.lr,
        lr_final: args.lr_final,
        min_count: args.min_count,
        seed: args.seed,
        poi_mode: args.location.poi_mode,
        implicit_negatives: !args.no_implicit_negatives,
        subsample: args.subsample,
        power: args.power,
        workers: args.workers,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let resolver = resolver(&args.location)?;
    let parser = query_parser(&args.parser, resolver.woeids.clone())?;
    if variant == Variant::Lw2vCrfPlus && parser.is_none() {
        return Err(usage("lw2v_crf_plus needs --tagger or --conll"));
    }
    let sessions = filter_sessions(read_sessions(&args.input)?, args.max_queries);
    log::info!("{} sessions after filtering", sessions.len());
    let annotated = Annotator::new(resolver, parser).annotate_all(&sessions);
    let model = train(&annotated, &config, variant)?;
    log::info!("vocabulary of {} tokens", model.vocab.len());
    let mut w = create(&args.out)?;
    model.save(&mut w).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn run_tag(args: TagArgs) -> Result<()> {
    let woeids = read_woeids(args.woeids.as_deref())?;
    let parser = query_parser(&args.parser, woeids)?.ok_or_else(|| usage("tag needs --tagger or --conll"))?;
    if let Some(path) = &args.save_tagger {
        let mut w = create(path)?;
        parser.tagger.save(&mut w)?;
        w.flush()?;
    }
    let mut queries = args.query.clone();
    if let Some(path) = &args.input {
        for line in open(path)?.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                queries.push(line);
            }
        }
    }
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    if !queries.is_empty() {
        writeln!(out, "query\tintent\tsubject\tlocation\tqualifier\tqualifier_type\tattributes\tfragments")?;
    }
    let dash = |s: Option<String>| s.unwrap_or_else(|| "-".into());
    for q in &queries {
        let ext = parser.parse(q);
        let fragments: Vec<String> = build_extraction_tokens(&ext).iter().map(|f| f.to_string()).collect();
        writeln!(
            out,
            "{q}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            parser.intent(q).as_str(),
            dash(ext.subject.clone()),
            dash(ext.location_woeid.clone()),
            dash(ext.qualifier.clone()),
            dash(ext.qualifier_type.map(|t| t.to_string())),
            if ext.attributes.is_empty() { "-".into() } else { ext.attributes.join(",") },
            if fragments.is_empty() { "-".into() } else { fragments.join(" | ") },
        )?;
    }
    if let Some(path) = &args.heldout {
        let corpus = parse_conll(open(path)?).with_context(|| format!("reading {}", path.display()))?;
        let report = TagReport::evaluate(&parser.tagger, &corpus);
        write!(out, "{}", report.to_table())?;
        writeln!(out, "token accuracy\t{:.3}", report.token_accuracy)?;
    }
    if queries.is_empty() && args.heldout.is_none() && args.save_tagger.is_none() {
        return Err(usage("tag needs --query, --in, --heldout or --save-tagger"));
    }
    out.flush()?;
    Ok(())
}

fn run_index(args: IndexArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let index = AdIndex::build(&model);
    if index.is_empty() {
        return Err(anyhow!("model {} has no ad vectors", args.model.display()));
    }
    let mut w = create(&args.out)?;
    index.save(&mut w).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn run_retrieve(args: RetrieveArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let index = match &args.index {
        Some(p) => AdIndex::load(open(p)?).map_err(|e| anyhow!("reading index {}: {e}", p.display()))?,
        None => AdIndex::build(&model),
    };
    if args.task == RetrievalTask::QPlusL2ad && args.woeid.is_none() {
        return Err(usage("task q+l needs --woeid"));
    }
    let parser = query_parser(&args.parser, None)?;
    if args.task.fragment_form().is_some() && parser.is_none() {
        return Err(usage(format!("task {} needs --tagger or --conll", args.task)));
    }
    let fragments = parser.map(|p| {
        let mut ext = p.parse(&args.query);
        if let Some(w) = &args.woeid {
            ext.location_woeid = Some(w.clone());
        }
        build_extraction_tokens(&ext)
    });
    let vector = match compose_query_vector(&model, &args.query, args.woeid.as_deref(), fragments.as_deref(), args.task) {
        Ok(v) => v,
        Err(RetrievalError::TokenNotFound { token, .. }) => match fragments.as_deref() {
            Some(f) => {
                let (form, v) = cold_start_lookup(&model, f)
                    .with_context(|| format!("{token:?} is not in the model and no fragment matched"))?;
                log::info!("{token:?} not in the model; using fragment form {form:?}");
                v
            }
            None => return Err(anyhow!("{token:?} is not in the model")),
        },
        Err(e) => return Err(e.into()),
    };
    let hits = knn(&index, &vector, args.k as usize)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for (rank, (ad, cos)) in hits.iter().enumerate() {
        writeln!(out, "{}\t{ad}\t{cos:.6}", rank + 1)?;
    }
    out.flush()?;
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    if args.ks.is_empty() || args.ks.contains(&0) {
        return Err(usage("--ks must list positive cutoffs"));
    }
    let model = read_model(&args.model)?;
    let index = AdIndex::build(&model);
    let resolver = resolver(&args.location)?;
    let parser = query_parser(&args.parser, resolver.woeids.clone())?;
    let tasks = if args.tasks.is_empty() {
        let mut t = vec![RetrievalTask::Q2ad, RetrievalTask::QPlusL2ad];
        if model.variant == Variant::Lw2vCrfPlus {
            t.extend(RetrievalTask::ALL.into_iter().filter(|t| t.fragment_form().is_some()));
        }
        t
    } else {
        args.tasks.clone()
    };
    let sessions = filter_sessions(read_sessions(&args.test)?, args.max_queries);
    let annotated = Annotator::new(resolver, parser).annotate_all(&sessions);
    let judgments = match &args.judgments {
        Some(p) => Some(parse_judgments(open(p)?).with_context(|| format!("reading judgments {}", p.display()))?),
        None => None,
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for (i, &task) in tasks.iter().enumerate() {
        let mut report = evaluate_task(&model, &index, &annotated, task, &args.ks);
        // judged scores depend only on query and ad vectors; print them once
        if let (Some(j), 0) = (&judgments, i) {
            let k = args.ks.iter().copied().max().unwrap_or(10);
            report.ndcg = Some(judged_ndcg(&model, j, k));
            report.grades = Some(score_by_grade(&model, j));
        }
        match args.format {
            Format::Table => {
                if i > 0 {
                    writeln!(out)?;
                }
                write!(out, "{}", report.to_table())?;
            }
            Format::Tsv => {
                let tsv = report.to_tsv();
                let body = if i == 0 { tsv.as_str() } else { tsv.split_once('\n').map_or("", |x| x.1) };
                write!(out, "{body}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn run_tail(args: TailArgs) -> Result<()> {
    let sessions = read_sessions(&args.input)?;
    let buckets = tail_histogram(&count_query_frequencies(&sessions));
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "occurrences\tdistinct_queries\tvolume\tvolume_share")?;
    for b in buckets {
        writeln!(out, "{}\t{}\t{}\t{:.4}", b.label, b.distinct_queries, b.volume, b.volume_share)?;
    }
    out.flush()?;
    Ok(())
}

fn run_keywords(args: KeywordArgs) -> Result<()> {
    let (kind, token) = args
        .anchor
        .split_once(':')
        .ok_or_else(|| usage("--anchor must look like KIND:token"))?;
    let kind: TokenKind = kind.to_uppercase().parse().map_err(usage)?;
    let model = read_model(&args.model)?;
    let words = neighbor_keyword_report(&model, Anchor::Token(kind, token), args.n, args.top)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for (w, c) in words {
        writeln!(out, "{w}\t{c}")?;
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => run_synth(a),
        Command::Train(a) => run_train(a),
        Command::Tag(a) => run_tag(a),
        Command::Index(a) => run_index(a),
        Command::Retrieve(a) => run_retrieve(a),
        Command::Eval(a) => run_eval(a),
        Command::Report(ReportCommand::Tail(a)) => run_tail(a),
        Command::Report(ReportCommand::Keywords(a)) => run_keywords(a),
    }
}

fn parse_args(mut args: Vec<OsString>) -> Result<Cli, clap::Error> {
    if let Some(path) = config::config_path(&args) {
        match config::load(Path::new(&path)) {
            Ok(file) => args = config::merge(&Cli::command(), args, &file),
            Err(e) => {
                return Err(Cli::command().error(clap::error::ErrorKind::Io, format!("{e:#}")));
            }
        }
    }
    Cli::try_parse_from(args)
}

fn main() -> ExitCode {
    let cli = match parse_args(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
