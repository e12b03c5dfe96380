use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Arg, ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use chemner::corpus::{
    corpus_stats, parse_conll, parse_conll_untagged, parse_offset_annotations, tokenize_words, write_conll,
    CorpusStats, Sentence, TagScheme, DEFAULT_DOC_ID,
};
use chemner::embeddings::PrecomputedEmbeddings;
use chemner::evaluation::{evaluate, export_attention, MatchMode};
use chemner::training::{train, Checkpoint, EmbeddingSource, EpochLog, Model, TrainConfig, TrainOptions};
use chemner::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_DIVERGENCE: u8 = 4;

/// (key, flag, description) for every configuration key.
const CONFIG_FLAGS: &[(&str, &str, &str)] = &[
    ("lr", "lr", "Learning rate"),
    ("dropout", "dropout", "Dropout rate on the BiLSTM input and output"),
    ("embedding_dim", "embedding-dim", "Token embedding width"),
    (
        "enc_hidden_dim",
        "enc-hidden-dim",
        "BiLSTM output width, 2 x lstm-dim (derived when only lstm-dim is given)",
    ),
    ("lstm_dim", "lstm-dim", "Hidden units per LSTM direction"),
    ("key_dim", "key-dim", "Attention key width per head"),
    ("val_dim", "val-dim", "Attention value width per head"),
    ("num_heads", "num-heads", "Attention heads"),
    ("weight_decay", "weight-decay", "Decoupled weight decay"),
    ("clip", "clip", "Gradient clipping threshold"),
    ("epochs", "epochs", "Maximum training epochs"),
    ("batch_size", "batch-size", "Sentences per optimizer step"),
    ("seed", "seed", "Random seed for initialization, shuffling and dropout"),
    (
        "patience",
        "patience",
        "Epochs without dev improvement before stopping (0 disables)",
    ),
    (
        "attention_fusion",
        "attention-fusion",
        "How attention joins the BiLSTM states: replace, residual or none",
    ),
    (
        "crf_constraints",
        "crf-constraints",
        "Forbid transitions the tag scheme rules out (true/false)",
    ),
    (
        "embedding_source",
        "embedding-source",
        "trained or precomputed (needs --precomputed)",
    ),
    (
        "freeze_embeddings",
        "freeze-embeddings",
        "Keep embedding tables and encoder fixed (true/false)",
    ),
    (
        "encoder_blocks",
        "encoder-blocks",
        "Encoder blocks above the embedding tables",
    ),
    (
        "ff_dim",
        "ff-dim",
        "Encoder feed-forward width (0 means 4 x embedding-dim)",
    ),
    ("max_len", "max-len", "Longest sentence the position table covers"),
    ("forget_bias", "forget-bias", "Initial LSTM forget-gate bias"),
    ("optimizer", "optimizer", "adam or sgd"),
    ("clip_mode", "clip-mode", "global (norm) or elementwise"),
    (
        "min_count",
        "min-count",
        "Minimum training count for a token to enter the vocabulary",
    ),
];

/// Configuration overrides in command-line order. Each key is accepted as
/// `--some-key` and `--some_key`.
#[derive(Debug, Clone, Default)]
struct ConfigFlags(Vec<(&'static str, String)>);

impl FromArgMatches for ConfigFlags {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut flags = ConfigFlags::default();
        flags.update_from_arg_matches(m)?;
        Ok(flags)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        for &(key, _, _) in CONFIG_FLAGS {
            if let Some(v) = m.get_one::<String>(key) {
                self.0.retain(|(k, _)| *k != key);
                self.0.push((key, v.clone()));
            }
        }
        Ok(())
    }
}

impl Args for ConfigFlags {
    fn augment_args(cmd: clap::Command) -> clap::Command {
        let defaults = TrainConfig::default();
        let mut cmd = cmd.next_help_heading("Model and training options (override --config)");
        for &(key, flag, help) in CONFIG_FLAGS {
            let default = defaults.get(key).expect("listed key");
            let mut arg = Arg::new(key)
                .long(flag)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .overrides_with(key)
                .value_parser(clap::value_parser!(String))
                .help(format!("{help} [default: {default}]"));
            if flag != key {
                arg = arg.alias(key);
            }
            cmd = cmd.arg(arg);
        }
        cmd
    }

    fn augment_args_for_update(cmd: clap::Command) -> clap::Command {
        Self::augment_args(cmd)
    }
}

#[derive(Parser)]
#[command(
    name = "chemner",
    version,
    about = "Chemical named entity recognition with embeddings, a BiLSTM, multi-head attention and a CRF"
)]
struct Cli {
    /// Suppress progress output on stderr
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert offset annotations (text TSV + annotation TSV) to CoNLL
    Convert {
        /// doc_id<TAB>title<TAB>abstract per line
        #[arg(long)]
        text: PathBuf,
        /// doc_id<TAB>T|A<TAB>start<TAB>end<TAB>surface<TAB>class per line
        #[arg(long)]
        annotations: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write corpus statistics as JSON
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Train a model and write the best checkpoint
    Train {
        /// Tagged CoNLL training file
        #[arg(long)]
        train: PathBuf,
        /// Tagged CoNLL dev file used for model selection (defaults to the training file)
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Checkpoint path
        #[arg(short, long)]
        output: PathBuf,
        /// key=value configuration file; flags win over it
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the per-epoch log here
        #[arg(long)]
        log: Option<PathBuf>,
        /// Precomputed vectors (SLEB) for embedding-source=precomputed
        #[arg(long)]
        precomputed: Option<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Tag sentences with a trained model
    Tag {
        #[arg(short, long)]
        model: PathBuf,
        /// CoNLL input (tag column optional), or plain text with --raw
        #[arg(short, long)]
        input: PathBuf,
        /// Tagged CoNLL output (stdout when omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write decoded mentions as doc_id<TAB>sentence<TAB>start<TAB>end<TAB>surface<TAB>class
        #[arg(long)]
        mentions: Option<PathBuf>,
        /// Read one sentence per line of plain text
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        precomputed: Option<PathBuf>,
    },
    /// Score predicted CoNLL against gold CoNLL
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predicted: PathBuf,
        /// Label for the first table row
        #[arg(long, default_value = "model")]
        name: String,
        /// Also write the report as key=value lines
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Count overlapping same-class mentions as matches
        #[arg(long)]
        overlap: bool,
    },
    /// Export per-head attention weights for one sentence as JSON and SVG
    InspectAttention {
        #[arg(short, long)]
        model: PathBuf,
        /// Sentence text, tokenized like --raw input
        #[arg(long, conflicts_with = "input")]
        sentence: Option<String>,
        /// CoNLL file to take the sentence from
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Sentence position within --input
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Output stem; writes <stem>.json and <stem>.svg
        #[arg(short, long)]
        output: PathBuf,
        /// Heads to render, e.g. 0,2 (all by default)
        #[arg(long, value_delimiter = ',')]
        heads: Option<Vec<usize>>,
        #[arg(long)]
        precomputed: Option<PathBuf>,
    },
    /// Print corpus statistics
    Stats {
        /// Tagged CoNLL file
        #[arg(short, long, conflicts_with_all = ["text", "annotations"])]
        input: Option<PathBuf>,
        #[arg(long, requires = "annotations")]
        text: Option<PathBuf>,
        #[arg(long, requires = "text")]
        annotations: Option<PathBuf>,
        /// Print JSON instead of key=value lines
        #[arg(long)]
        json: bool,
    },
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Lib(e) => e.kind(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Lib(Error::Config(_)) => EXIT_USAGE,
            Failure::Lib(Error::Divergence { .. }) => EXIT_DIVERGENCE,
            Failure::Lib(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    Ok(fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

fn write(path: &Path, content: &str) -> CliResult {
    Ok(fs::write(path, content).map_err(|e| Error::io(path, e))?)
}

fn warn(quiet: bool, msg: &str) {
    if !quiet {
        eprintln!("warning: {msg}");
    }
}

fn stats_lines(stats: &CorpusStats) -> String {
    let mut out = format!(
        "documents={}\ndocuments_with_mentions={}\nsentences={}\ntokens={}\nmentions={}\nrepairs={}\n",
        stats.documents, stats.documents_with_mentions, stats.sentences, stats.tokens, stats.mentions, stats.repairs
    );
    for (class, n) in &stats.per_class {
        out.push_str(&format!("class.{class}={n}\n"));
    }
    out
}

fn cmd_convert(text: &Path, annotations: &Path, output: &Path, stats_path: Option<&Path>, quiet: bool) -> CliResult {
    let scheme = TagScheme::chemdner();
    let corpus = parse_offset_annotations(&read(text)?, &read(annotations)?, &scheme)?;
    if corpus.mentions.is_empty() {
        warn(quiet, "annotation file has no mentions; every token is tagged O");
    }
    write(output, &write_conll(&corpus.sentences, &scheme))?;
    let stats = corpus_stats(&corpus.sentences, &scheme);
    if let Some(p) = stats_path {
        write(p, &stats.to_json())?;
    }
    print!("{}", stats_lines(&stats));
    println!("annotated_mentions={}", corpus.mentions.len());
    println!("retokenized_mentions={}", corpus.retokenized);
    Ok(())
}

fn cmd_stats(input: Option<&Path>, text: Option<&Path>, annotations: Option<&Path>, json: bool) -> CliResult {
    let scheme = TagScheme::chemdner();
    let sentences = match (input, text, annotations) {
        (Some(p), _, _) => parse_conll(&read(p)?, &scheme)?,
        (None, Some(t), Some(a)) => parse_offset_annotations(&read(t)?, &read(a)?, &scheme)?.sentences,
        _ => {
            return Err(Failure::Usage(
                "stats needs --input or --text with --annotations".into(),
            ))
        }
    };
    let stats = corpus_stats(&sentences, &scheme);
    if json {
        println!("{}", stats.to_json());
    } else {
        print!("{}", stats_lines(&stats));
    }
    Ok(())
}

/// Keys assigned by a `key=value` file, normalized to underscores.
fn keys_in_config_file(input: &str) -> BTreeSet<String> {
    input
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, _)| k.trim().replace('-', "_"))
        .collect()
}

fn build_config(config_path: Option<&Path>, flags: &ConfigFlags) -> CliResult<TrainConfig> {
    let mut config = TrainConfig::default();
    let mut given = BTreeSet::new();
    if let Some(p) = config_path {
        let text = read(p)?;
        config.apply_kv(&text)?;
        given.extend(keys_in_config_file(&text));
    }
    for (key, value) in &flags.0 {
        config.set(key, value)?;
        given.insert(key.to_string());
    }
    let has = |k: &str| given.contains(k);
    if has("lstm_dim") && !has("enc_hidden_dim") {
        config.enc_hidden_dim = 2 * config.lstm_dim;
    } else if has("enc_hidden_dim") && !has("lstm_dim") && config.enc_hidden_dim % 2 == 0 {
        config.lstm_dim = config.enc_hidden_dim / 2;
    }
    config.validate()?;
    Ok(config)
}

fn load_precomputed(path: Option<&Path>) -> CliResult<Option<PrecomputedEmbeddings>> {
    Ok(match path {
        Some(p) => Some(PrecomputedEmbeddings::load(p)?),
        None => None,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    train_path: &Path,
    dev_path: Option<&Path>,
    output: &Path,
    config_path: Option<&Path>,
    log_path: Option<&Path>,
    precomputed: Option<&Path>,
    flags: &ConfigFlags,
    quiet: bool,
) -> CliResult {
    let config = build_config(config_path, flags)?;
    let precomputed = load_precomputed(precomputed)?;
    if config.embedding_source == EmbeddingSource::Precomputed && precomputed.is_none() {
        return Err(Failure::Usage(
            "embedding-source=precomputed requires --precomputed".into(),
        ));
    }
    let scheme = TagScheme::chemdner();
    let train_set = parse_conll(&read(train_path)?, &scheme)?;
    let dev_set = match dev_path {
        Some(p) => parse_conll(&read(p)?, &scheme)?,
        None => Vec::new(),
    };

    let mut log_file = match log_path {
        Some(p) => Some((p, fs::File::create(p).map_err(|e| Error::io(p, e))?)),
        None => None,
    };
    let mut log_error = None;
    let mut on_epoch = |entry: &EpochLog| {
        if !quiet {
            eprintln!("{entry}");
        }
        if let Some((p, f)) = log_file.as_mut() {
            if let Err(e) = writeln!(f, "{entry}") {
                log_error.get_or_insert(Error::io(*p, e));
            }
        }
    };
    let outcome = train(
        &train_set,
        &dev_set,
        &scheme,
        &config,
        TrainOptions {
            precomputed,
            on_epoch: Some(&mut on_epoch),
        },
    )?;
    if let Some(e) = log_error {
        return Err(e.into());
    }
    outcome.best.save(output)?;
    println!(
        "best_epoch={} dev_f={:.2} epochs_run={} checkpoint={}",
        outcome.best.epoch,
        outcome.best.dev_f,
        outcome.log.len(),
        output.display()
    );
    Ok(())
}

fn load_model(path: &Path, precomputed: Option<&Path>) -> CliResult<Model> {
    let mut model = Checkpoint::load(path)?.model;
    if let Some(p) = load_precomputed(precomputed)? {
        model.attach_precomputed(p)?;
    }
    Ok(model)
}

fn raw_sentences(text: &str) -> Vec<Sentence> {
    text.lines()
        .map(tokenize_words)
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, tokens)| {
            let n = tokens.len();
            Sentence::from_tokens(DEFAULT_DOC_ID, i, tokens, vec![0; n])
        })
        .collect()
}

fn cmd_tag(
    model_path: &Path,
    input: &Path,
    output: Option<&Path>,
    mentions_path: Option<&Path>,
    raw: bool,
    precomputed: Option<&Path>,
) -> CliResult {
    let model = load_model(model_path, precomputed)?;
    let text = read(input)?;
    let sentences = if raw {
        raw_sentences(&text)
    } else {
        parse_conll_untagged(&text, &model.scheme)?
    };
    let tagged = model.tag_all(&sentences)?;
    let conll = write_conll(&tagged, &model.scheme);
    match output {
        Some(p) => write(p, &conll)?,
        None => print!("{conll}"),
    }
    if let Some(p) = mentions_path {
        let mut out = String::new();
        for s in &tagged {
            for m in s.mentions(&model.scheme).0 {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    m.doc_id, s.index, m.start_char, m.end_char, m.surface, m.class
                ));
            }
        }
        write(p, &out)?;
    }
    Ok(())
}

fn cmd_eval(gold: &Path, predicted: &Path, name: &str, output: Option<&Path>, overlap: bool) -> CliResult {
    let scheme = TagScheme::chemdner();
    let gold = parse_conll(&read(gold)?, &scheme)?;
    let predicted = parse_conll(&read(predicted)?, &scheme)?;
    let mode = if overlap { MatchMode::Overlap } else { MatchMode::Exact };
    let report = evaluate(&gold, &predicted, &scheme, mode)?;
    print!("{}", report.to_table(name, &scheme));
    if let Some(p) = output {
        write(p, &report.to_key_values(&scheme))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_inspect_attention(
    model_path: &Path,
    sentence: Option<&str>,
    input: Option<&Path>,
    index: usize,
    output: &Path,
    heads: Option<&[usize]>,
    precomputed: Option<&Path>,
) -> CliResult {
    let model = load_model(model_path, precomputed)?;
    let s = match (sentence, input) {
        (Some(text), _) => raw_sentences(text)
            .into_iter()
            .next()
            .ok_or_else(|| Failure::Usage("--sentence has no tokens".into()))?,
        (None, Some(p)) => {
            let all = parse_conll_untagged(&read(p)?, &model.scheme)?;
            let len = all.len();
            all.into_iter().nth(index).ok_or(Error::Index {
                what: "input sentences",
                index,
                len,
            })?
        }
        (None, None) => return Err(Failure::Usage("inspect-attention needs --sentence or --input".into())),
    };
    if let Some(hs) = heads {
        let n = model.config.num_heads;
        if let Some(&bad) = hs.iter().find(|&&h| h >= n) {
            return Err(Failure::Usage(format!(
                "head {bad} out of range, the model has {n} heads"
            )));
        }
    }
    let (json, svg) = export_attention(&model, &s, output, heads)?;
    println!("json={}", json.display());
    println!("svg={}", svg.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let quiet = cli.quiet;
    match cli.command {
        Command::Convert {
            text,
            annotations,
            output,
            stats,
        } => cmd_convert(&text, &annotations, &output, stats.as_deref(), quiet),
        Command::Train {
            train,
            dev,
            output,
            config,
            log,
            precomputed,
            flags,
        } => cmd_train(
            &train,
            dev.as_deref(),
            &output,
            config.as_deref(),
            log.as_deref(),
            precomputed.as_deref(),
            &flags,
            quiet,
        ),
        Command::Tag {
            model,
            input,
            output,
            mentions,
            raw,
            precomputed,
        } => cmd_tag(
            &model,
            &input,
            output.as_deref(),
            mentions.as_deref(),
            raw,
            precomputed.as_deref(),
        ),
        Command::Eval {
            gold,
            predicted,
            name,
            output,
            overlap,
        } => cmd_eval(&gold, &predicted, &name, output.as_deref(), overlap),
        Command::InspectAttention {
            model,
            sentence,
            input,
            index,
            output,
            heads,
            precomputed,
        } => cmd_inspect_attention(
            &model,
            sentence.as_deref(),
            input.as_deref(),
            index,
            &output,
            heads.as_deref(),
            precomputed.as_deref(),
        ),
        Command::Stats {
            input,
            text,
            annotations,
            json,
        } => cmd_stats(input.as_deref(), text.as_deref(), annotations.as_deref(), json),
    }
}

fn defaults_help() -> String {
    let d = TrainConfig::default();
    let mut out = String::from("Model defaults (see `chemner train --help`):\n");
    for key in [
        "lr",
        "dropout",
        "embedding_dim",
        "enc_hidden_dim",
        "lstm_dim",
        "key_dim",
        "val_dim",
        "num_heads",
        "weight_decay",
        "clip",
    ] {
        out.push_str(&format!(
            "  --{:<16} {}\n",
            key.replace('_', "-"),
            d.get(key).expect("listed key")
        ));
    }
    out.push_str("\nExit codes: 0 success, 2 usage, 3 data, 4 numeric divergence.");
    out
}

fn report(f: &Failure) -> ExitCode {
    let code = f.exit_code();
    let msg = serde_json::to_string(&f.message()).expect("string serializes");
    eprintln!("error: kind={} exit={} message={}", f.kind(), code, msg);
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cmd = Cli::command().after_help(defaults_help());
    let matches = match cmd.try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    ExitCode::from(EXIT_USAGE)
                }
                _ => {
                    let text = e.to_string();
                    let first = text.lines().next().unwrap_or("invalid arguments");
                    report(&Failure::Usage(first.trim_start_matches("error: ").to_string()))
                }
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return report(&Failure::Usage(e.to_string())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}
