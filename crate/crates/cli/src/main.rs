mod manifest;

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use datakit::analysis;
use datakit::augment::{self, Lexicon};
use datakit::corpus::{self, Dataset, Format};
use datakit::curriculum::{self, CurriculumParams, ScheduleKind};
use datakit::difficulty::{self, ComplexityKind, CorrectnessLog, DifficultyScores, EmbeddingTable};
use datakit::generate::{self, GenSpec, SplitResult, SplitSizes};
use datakit::{Grammar, GrammarConfig};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn data(e: impl Display) -> Self {
        CliError::Data(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "datakit", version, about = "Generate, augment, schedule and analyse SCAN-style datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a dataset from a grammar.
    Generate(GenerateArgs),
    /// Build a train/dev/test split.
    #[command(subcommand)]
    Split(SplitCommand),
    /// Truncate every input to at most half its length.
    Truncate(TruncateArgs),
    /// Primitive mutation, AugZero copies, or downsampling of augmented data.
    Augment(AugmentArgs),
    /// Induce a source/target lexicon from a dataset.
    Lexicon(LexiconArgs),
    /// Score example difficulty.
    Score(ScoreArgs),
    /// Select subsets by difficulty.
    #[command(subcommand)]
    Select(SelectCommand),
    /// Build a repetition curriculum schedule.
    Schedule(ScheduleArgs),
    /// Dataset statistics as JSON.
    Stats(StatsArgs),
    /// Check that split partitions share no (input, output) pair.
    Audit(AuditArgs),
    /// Project token embeddings on their first two principal components.
    Pca(PcaArgs),
}

#[derive(Args, Debug, Serialize)]
struct GrammarArg {
    /// Grammar config JSON file, or a builtin: scan-star, scan.
    #[arg(long, default_value = "scan-star")]
    grammar: String,
}

impl GrammarArg {
    fn load(&self) -> Result<Grammar> {
        let config = match self.grammar.as_str() {
            "scan-star" => GrammarConfig::scan_star(),
            "scan" | "scan-legacy" => GrammarConfig::scan_legacy(),
            path => GrammarConfig::load(Path::new(path)).map_err(CliError::data)?,
        };
        Grammar::new(config).map_err(CliError::data)
    }

    fn input(&self) -> Option<&Path> {
        let p = Path::new(&self.grammar);
        p.is_file().then_some(p)
    }
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grammar: GrammarArg,
    #[arg(long)]
    size: usize,
    /// Exclusive lower bound on input length.
    #[arg(long, default_value_t = 0)]
    min_len: usize,
    /// Inclusive upper bound on input length.
    #[arg(long)]
    max_len: usize,
    /// Maximum distinct primitives per example.
    #[arg(long)]
    max_prims: Option<usize>,
    #[arg(long)]
    max_conjuncts: Option<usize>,
    /// Keep duplicate inputs.
    #[arg(long)]
    allow_duplicates: bool,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Subcommand, Debug)]
enum SplitCommand {
    /// Train on lengths <= L, test on L < length <= 2L.
    Length(LengthSplitArgs),
    /// Hold out one primitive except as a bare command.
    Primitive(PrimitiveSplitArgs),
    /// Move every example containing a token pattern to test.
    Pattern(PatternSplitArgs),
}

#[derive(Args, Debug, Serialize)]
struct SplitOut {
    /// Output directory for train/dev/test files.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value = "jsonl")]
    format: Format,
}

#[derive(Args, Debug, Serialize)]
struct LengthSplitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grammar: GrammarArg,
    #[arg(long = "max-len", short = 'L')]
    max_len: usize,
    #[arg(long)]
    train: usize,
    #[arg(long, default_value_t = 0)]
    dev: usize,
    #[arg(long)]
    test: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    out: SplitOut,
}

#[derive(Args, Debug, Serialize)]
struct PrimitiveSplitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grammar: GrammarArg,
    #[arg(long)]
    held_out: String,
    /// Train-side size, including the bare command and the dev carve-out.
    #[arg(long)]
    size: usize,
    #[arg(long)]
    test_size: usize,
    #[arg(long, default_value_t = 0)]
    min_len: usize,
    #[arg(long)]
    max_len: usize,
    #[arg(long)]
    max_prims: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    out: SplitOut,
}

#[derive(Args, Debug, Serialize)]
struct PatternSplitArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Space-separated token pattern, e.g. "around right".
    #[arg(long)]
    pattern: String,
    #[arg(long, default_value_t = generate::DEFAULT_DEV_RATIO)]
    dev_ratio: f64,
    #[command(flatten)]
    #[serde(flatten)]
    out: SplitOut,
}

#[derive(Args, Debug, Serialize)]
struct TruncateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grammar: GrammarArg,
    #[arg(short, long)]
    input: PathBuf,
    /// Apply truncation this many times.
    #[arg(long, default_value_t = 1)]
    times: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum AugmentMode {
    Mutate,
    Augzero,
    Downsample,
}

#[derive(Args, Debug, Serialize)]
struct AugmentArgs {
    #[arg(long, value_enum)]
    mode: AugmentMode,
    /// K for mutation, number of copies for AugZero.
    #[arg(short)]
    k: Option<usize>,
    /// Lexicon TSV for mutation; induced from the input when absent.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Total size after downsampling.
    #[arg(long)]
    target: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct LexiconArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Exclusion report (JSONL); defaults to <output>.exclusions.jsonl.
    #[arg(long)]
    exclusions: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Metric {
    InputLength,
    UniquePrimitives,
    Prototype,
    Learning,
}

#[derive(Args, Debug, Serialize)]
struct ScoreArgs {
    #[arg(long, value_enum)]
    metric: Metric,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Example embeddings TSV; without it a bag-of-tokens fallback is used.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(short, default_value_t = difficulty::DEFAULT_CLUSTERS)]
    k: usize,
    #[arg(long, default_value_t = difficulty::DEFAULT_INITS)]
    n_init: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Correctness logs (JSONL), one per training seed.
    #[arg(long, num_args = 1..)]
    logs: Vec<PathBuf>,
    #[arg(long, default_value_t = difficulty::DEFAULT_WINDOW)]
    window: usize,
    /// Checkpoint interval for logs without a header line.
    #[arg(long)]
    interval: Option<u64>,
    /// Total steps for logs without a header line.
    #[arg(long)]
    total_steps: Option<u64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand, Debug)]
enum SelectCommand {
    /// Examples in the score quantile [lo, hi).
    Quantile(QuantileArgs),
    /// Mix two datasets at a given ratio.
    Mix(MixArgs),
}

#[derive(Args, Debug, Serialize)]
struct QuantileArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    lo: f64,
    #[arg(long)]
    hi: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct MixArgs {
    #[arg(short = 'a', long)]
    first: PathBuf,
    #[arg(short = 'b', long)]
    second: PathBuf,
    /// Fraction of the result drawn from the first dataset.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long)]
    size: usize,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    None,
    Example,
    Primitive,
}

impl From<KindArg> for ScheduleKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::None => ScheduleKind::None,
            KindArg::Example => ScheduleKind::Example,
            KindArg::Primitive => ScheduleKind::Primitive,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ScheduleArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    total_steps: u64,
    #[arg(long = "init", default_value_t = 0.2)]
    init_frac: f64,
    #[arg(long = "hold", default_value_t = 0.2)]
    hold_frac: f64,
    #[arg(long = "full", default_value_t = 0.8)]
    full_frac: f64,
    #[arg(long, default_value_t = 500)]
    granularity: u64,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct StatsArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Also report input-side frequency of these tokens.
    #[arg(long)]
    token: Vec<String>,
    /// Report path; printed to stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct AuditArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    test: PathBuf,
    /// Exit with status 2 when any overlap is found.
    #[arg(long)]
    strict: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct PcaArgs {
    /// Token embedding matrix TSV.
    #[arg(long)]
    matrix: PathBuf,
    /// Tokens to project.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    tokens: Vec<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn load(path: &Path) -> Result<Dataset> {
    corpus::load_dataset(path, Format::from_path(path)).map_err(CliError::data)
}

fn save(dataset: &Dataset, path: &Path, format: Option<Format>) -> Result<()> {
    corpus::save_dataset(dataset, path, format.unwrap_or_else(|| Format::from_path(path))).map_err(CliError::data)
}

fn load_lexicon(path: &Path) -> Result<Lexicon> {
    Lexicon::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::data)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn record<P: Serialize>(command: &str, params: &P, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    let path = manifest::write(command, params, inputs, outputs).map_err(CliError::data)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::data)?;
    text.push('\n');
    match output {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes()).map_err(CliError::data)?;
            w.flush().map_err(CliError::data)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require<T>(value: Option<T>, flag: &str, mode: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Usage(format!("{mode} requires {flag}")))
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let grammar = args.grammar.load()?;
    let spec = GenSpec {
        max_unique_primitives_per_example: args.max_prims,
        max_conjuncts: args.max_conjuncts,
        dedupe: !args.allow_duplicates,
        ..GenSpec::new(args.size, args.min_len, args.max_len, args.seed)
    };
    let dataset = generate::generate_dataset(&grammar, &spec).map_err(CliError::data)?;
    save(&dataset, &args.output, args.format)?;
    let inputs: Vec<&Path> = args.grammar.input().into_iter().collect();
    record("generate", args, &inputs, &[&args.output])
}

#[derive(Serialize)]
struct SplitFiles<'a, P: Serialize> {
    train: String,
    dev: String,
    test: String,
    spec: &'a P,
}

fn write_split<P: Serialize>(command: &str, split: &SplitResult, out: &SplitOut, params: &P, inputs: &[&Path]) -> Result<()> {
    let ext = match out.format {
        Format::Jsonl => "jsonl",
        Format::Tsv => "tsv",
        Format::Scan => "txt",
    };
    let paths: Vec<PathBuf> = ["train", "dev", "test"]
        .iter()
        .map(|name| out.output.join(format!("{name}.{ext}")))
        .collect();
    for (part, path) in [&split.train, &split.dev, &split.test].into_iter().zip(&paths) {
        save(part, path, Some(out.format))?;
    }
    let violations = analysis::split_overlap_check(split);
    if !violations.is_empty() {
        log::warn!("{} (input, output) pairs appear in more than one partition", violations.len());
    }
    let split_json = out.output.join("split.json");
    write_json(
        &SplitFiles {
            train: paths[0].display().to_string(),
            dev: paths[1].display().to_string(),
            test: paths[2].display().to_string(),
            spec: params,
        },
        Some(&split_json),
    )?;
    let mut outputs: Vec<&Path> = vec![&split_json];
    outputs.extend(paths.iter().map(PathBuf::as_path));
    record(command, params, inputs, &outputs)
}

fn split(cmd: &SplitCommand) -> Result<()> {
    match cmd {
        SplitCommand::Length(args) => {
            let grammar = args.grammar.load()?;
            let sizes = SplitSizes {
                train: args.train,
                dev: args.dev,
                test: args.test,
            };
            let split = generate::make_length_split(&grammar, args.max_len, sizes, args.seed).map_err(CliError::data)?;
            let inputs: Vec<&Path> = args.grammar.input().into_iter().collect();
            write_split("split length", &split, &args.out, args, &inputs)
        }
        SplitCommand::Primitive(args) => {
            let grammar = args.grammar.load()?;
            let spec = GenSpec {
                max_unique_primitives_per_example: args.max_prims,
                ..GenSpec::new(args.size, args.min_len, args.max_len, args.seed)
            };
            let split = generate::make_primitive_holdout_split(&grammar, &spec, &args.held_out, args.test_size)
                .map_err(CliError::data)?;
            let inputs: Vec<&Path> = args.grammar.input().into_iter().collect();
            write_split("split primitive", &split, &args.out, args, &inputs)
        }
        SplitCommand::Pattern(args) => {
            let dataset = load(&args.input)?;
            let pattern: Vec<&str> = args.pattern.split_whitespace().collect();
            if pattern.is_empty() {
                return Err(CliError::Usage("--pattern must contain at least one token".into()));
            }
            let split = generate::make_pattern_holdout_split(&dataset, &pattern, args.dev_ratio).map_err(CliError::data)?;
            write_split("split pattern", &split, &args.out, args, &[&args.input])
        }
    }
}

fn truncate(args: &TruncateArgs) -> Result<()> {
    let grammar = args.grammar.load()?;
    let mut dataset = load(&args.input)?;
    for _ in 0..args.times {
        dataset = generate::truncate_half(&dataset, &grammar).map_err(CliError::data)?;
    }
    save(&dataset, &args.output, None)?;
    let mut inputs: Vec<&Path> = vec![&args.input];
    inputs.extend(args.grammar.input());
    record("truncate", args, &inputs, &[&args.output])
}

fn augment(args: &AugmentArgs) -> Result<()> {
    let dataset = load(&args.input)?;
    let mut inputs: Vec<&Path> = vec![&args.input];
    let out = match args.mode {
        AugmentMode::Mutate => {
            let k = require(args.k, "-k", "--mode mutate")?;
            let seed = require(args.seed, "--seed", "--mode mutate")?;
            let lexicon = match &args.lexicon {
                Some(path) => {
                    inputs.push(path);
                    load_lexicon(path)?
                }
                None => augment::induce_lexicon(&dataset).lexicon,
            };
            let result = augment::mutate_primitives(&dataset, &lexicon, k, seed).map_err(CliError::data)?;
            if !result.underfilled.is_empty() {
                log::warn!("{} examples produced fewer than {} variants", result.underfilled.len(), k - 1);
            }
            result.dataset
        }
        AugmentMode::Augzero => {
            let k = require(args.k, "-k", "--mode augzero")?;
            augment::aug_zero(&dataset, k).map_err(CliError::data)?
        }
        AugmentMode::Downsample => {
            let target = require(args.target, "--target", "--mode downsample")?;
            let seed = require(args.seed, "--seed", "--mode downsample")?;
            augment::downsample_augmented(&dataset, target, seed).map_err(CliError::data)?
        }
    };
    save(&out, &args.output, None)?;
    record("augment", args, &inputs, &[&args.output])
}

fn lexicon(args: &LexiconArgs) -> Result<()> {
    let dataset = load(&args.input)?;
    let induced = augment::induce_lexicon(&dataset);
    let mut w = create(&args.output)?;
    induced.lexicon.write_tsv(&mut w).map_err(CliError::data)?;
    drop(w);
    let exclusions = args.exclusions.clone().unwrap_or_else(|| {
        let mut name = args.output.as_os_str().to_owned();
        name.push(".exclusions.jsonl");
        PathBuf::from(name)
    });
    let mut w = create(&exclusions)?;
    induced.write_exclusions_jsonl(&mut w).map_err(CliError::data)?;
    drop(w);
    log::info!(
        "{} pairs, {} ambiguous groups excluded",
        induced.lexicon.len(),
        induced.exclusions.len()
    );
    record("lexicon", args, &[&args.input], &[&args.output, &exclusions])
}

fn score(args: &ScoreArgs) -> Result<()> {
    let dataset = load(&args.input)?;
    let mut inputs: Vec<&Path> = vec![&args.input];
    let scores: DifficultyScores = match args.metric {
        Metric::InputLength | Metric::UniquePrimitives => {
            let kind = match args.metric {
                Metric::InputLength => ComplexityKind::InputLength,
                _ => ComplexityKind::UniquePrimitives,
            };
            let lexicon = match &args.lexicon {
                Some(path) => {
                    inputs.push(path);
                    Some(load_lexicon(path)?)
                }
                None => None,
            };
            if kind == ComplexityKind::UniquePrimitives && lexicon.is_none() {
                return Err(CliError::Usage("--metric unique-primitives requires --lexicon".into()));
            }
            difficulty::score_complexity(&dataset, kind, lexicon.as_ref()).map_err(CliError::data)?
        }
        Metric::Prototype => {
            let seed = require(args.seed, "--seed", "--metric prototype")?;
            let table = match &args.embeddings {
                Some(path) => {
                    inputs.push(path);
                    EmbeddingTable::load(path).map_err(CliError::data)?
                }
                None => {
                    log::warn!("no --embeddings given; using the bag-of-tokens fallback embedding");
                    difficulty::bag_of_tokens_embedding(&dataset)
                }
            };
            let missing = dataset.ids().filter(|id| table.position(id).is_none()).count();
            if missing > 0 || table.len() != dataset.len() {
                return Err(CliError::Data(format!(
                    "embeddings do not match the dataset ({missing} ids without a vector, {} rows for {} examples)",
                    table.len(),
                    dataset.len()
                )));
            }
            difficulty::score_prototype(&table, args.k, args.n_init, seed).map_err(CliError::data)?
        }
        Metric::Learning => {
            if args.logs.is_empty() {
                return Err(CliError::Usage("--metric learning requires --logs".into()));
            }
            let defaults = match (args.interval, args.total_steps) {
                (Some(i), Some(t)) => Some((i, t)),
                (None, None) => None,
                _ => return Err(CliError::Usage("--interval and --total-steps go together".into())),
            };
            let logs: Vec<CorrectnessLog> = args
                .logs
                .iter()
                .map(|p| CorrectnessLog::load(p, defaults).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))))
                .collect::<Result<_>>()?;
            inputs.extend(args.logs.iter().map(PathBuf::as_path));
            difficulty::score_learning(&dataset, &logs, args.window).map_err(CliError::data)?
        }
    };
    let mut w = create(&args.output)?;
    scores.write_tsv(&mut w).map_err(CliError::data)?;
    drop(w);
    record("score", args, &inputs, &[&args.output])
}

fn select(cmd: &SelectCommand) -> Result<()> {
    match cmd {
        SelectCommand::Quantile(args) => {
            let dataset = load(&args.input)?;
            let scores = DifficultyScores::load(&args.scores).map_err(CliError::data)?;
            let subset = difficulty::select_quantile(&dataset, &scores, args.lo, args.hi).map_err(|e| match e {
                difficulty::DifficultyError::InvalidArgument(m) => CliError::Usage(m),
                e => CliError::data(e),
            })?;
            save(&subset, &args.output, None)?;
            record("select quantile", args, &[&args.input, &args.scores], &[&args.output])
        }
        SelectCommand::Mix(args) => {
            let a = load(&args.first)?;
            let b = load(&args.second)?;
            let mixed = difficulty::mix_subsets(&a, &b, args.ratio, args.size, args.seed).map_err(CliError::data)?;
            save(&mixed, &args.output, None)?;
            record("select mix", args, &[&args.first, &args.second], &[&args.output])
        }
    }
}

fn schedule(args: &ScheduleArgs) -> Result<()> {
    let dataset = load(&args.input)?;
    let mut inputs: Vec<&Path> = vec![&args.input];
    let lexicon = match &args.lexicon {
        Some(path) => {
            inputs.push(path);
            Some(load_lexicon(path)?)
        }
        None => None,
    };
    let params = CurriculumParams {
        init_frac: args.init_frac,
        hold_frac: args.hold_frac,
        full_frac: args.full_frac,
        total_steps: args.total_steps,
        granularity_steps: args.granularity,
    };
    let schedule = curriculum::build_repetition_schedule(&dataset, args.kind.into(), lexicon.as_ref(), &params, args.seed)
        .map_err(|e| match e {
            curriculum::CurriculumError::InvalidParams(m) => CliError::Usage(m),
            curriculum::CurriculumError::MissingLexicon => CliError::Usage("--kind primitive requires --lexicon".into()),
            e => CliError::data(e),
        })?;
    let mut w = create(&args.output)?;
    schedule.write_jsonl(&mut w).map_err(CliError::data)?;
    drop(w);
    record("schedule", args, &inputs, &[&args.output])
}

#[derive(Serialize)]
struct StatsOutput {
    #[serde(flatten)]
    stats: analysis::StatsReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    frequencies: Vec<analysis::FrequencyReport>,
}

fn stats(args: &StatsArgs) -> Result<()> {
    let dataset = load(&args.input)?;
    let mut inputs: Vec<&Path> = vec![&args.input];
    let lexicon = match &args.lexicon {
        Some(path) => {
            inputs.push(path);
            Some(load_lexicon(path)?)
        }
        None => None,
    };
    let report = StatsOutput {
        stats: analysis::dataset_stats(&dataset, lexicon.as_ref()),
        frequencies: args.token.iter().map(|t| analysis::frequency_report(&dataset, t)).collect(),
    };
    write_json(&report, args.output.as_deref())?;
    match &args.output {
        Some(out) => record("stats", args, &inputs, &[out]),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct AuditReport {
    clean: bool,
    violations: Vec<analysis::OverlapViolation>,
}

fn audit(args: &AuditArgs) -> Result<()> {
    let split = SplitResult {
        train: load(&args.train)?,
        dev: match &args.dev {
            Some(p) => load(p)?,
            None => Dataset::empty(),
        },
        test: load(&args.test)?,
    };
    let violations = analysis::split_overlap_check(&split);
    let report = AuditReport {
        clean: violations.is_empty(),
        violations,
    };
    write_json(&report, args.output.as_deref())?;
    if let Some(out) = &args.output {
        let mut inputs: Vec<&Path> = vec![&args.train, &args.test];
        inputs.extend(args.dev.as_deref());
        record("audit", args, &inputs, &[out])?;
    }
    if args.strict && !report.clean {
        return Err(CliError::Data(format!(
            "{} pairs shared across partitions",
            report.violations.len()
        )));
    }
    Ok(())
}

fn pca(args: &PcaArgs) -> Result<()> {
    if args.tokens.is_empty() {
        return Err(CliError::Usage("--tokens needs at least one token".into()));
    }
    let matrix = EmbeddingTable::load(&args.matrix).map_err(CliError::data)?;
    let result = analysis::pca_project(&matrix, &args.tokens).map_err(CliError::data)?;
    write_json(&result, args.output.as_deref())?;
    match &args.output {
        Some(out) => record("pca", args, &[&args.matrix], &[out]),
        None => Ok(()),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("DATAKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("DATAKIT_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(CliError::data)
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Split(c) => split(c),
        Command::Truncate(a) => truncate(a),
        Command::Augment(a) => augment(a),
        Command::Lexicon(a) => lexicon(a),
        Command::Score(a) => score(a),
        Command::Select(c) => select(c),
        Command::Schedule(a) => schedule(a),
        Command::Stats(a) => stats(a),
        Command::Audit(a) => audit(a),
        Command::Pca(a) => pca(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
