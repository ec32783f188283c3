//! The `lexnorm` command line.
//!
//! Exit codes: 0 success, 1 a check that ran but failed, 2 bad input data,
//! 3 backend failure, 64 usage error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use lexnorm_core::augment::{corrupt_corpus, NoiseSpec};
use lexnorm_core::baselines::LexiconBuilder;
use lexnorm_core::pipeline::{evaluate_with, PipelineError};
use lexnorm_core::seq2seq::gradcheck;
use lexnorm_core::seq2seq::{train, Dims, TrainConfig};
use lexnorm_core::{parse_corpus, to_sentence_pairs, AlignConfig, Corpus};

use crate::desk::{self, DeskConfig};
use crate::formats::{
    atomic_write, read_lexicon, read_pairs, report_json, report_table, write_checkpoint,
    write_lexicon, write_pairs,
};
use crate::remote::RemoteConfig;
use crate::selector::{self, BuildError, BuildOptions, Selector, REMOTE_URL_ENV};

#[derive(Parser, Debug)]
#[command(name = "lexnorm", version, about = "Lexical normalization toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Compare and look up words case-insensitively (default).
    #[arg(long, global = true, overrides_with = "no_fold_case")]
    pub fold_case: bool,
    /// Compare and look up words exactly.
    #[arg(long, global = true, overrides_with = "fold_case")]
    pub no_fold_case: bool,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Keep only these languages (repeatable).
    #[arg(long = "lang", global = true, value_name = "CODE")]
    pub langs: Vec<String>,
}

impl Global {
    pub fn fold(&self) -> bool {
        !self.no_fold_case
    }

    fn keeps(&self, lang: &str) -> bool {
        self.langs.is_empty() || self.langs.iter().any(|l| l == lang)
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Export corpora as sentence-pair JSON lines.
    Convert {
        /// Corpus as LANG=PATH (repeatable).
        #[arg(long = "corpus", required = true, value_name = "LANG=PATH")]
        corpora: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build or inspect a replacement lexicon.
    Lexicon {
        #[command(subcommand)]
        action: LexiconCmd,
    },
    /// Corrupt clean sentences (one per line) into sentence pairs.
    Augment {
        /// Comma-separated CHANNEL=RATE list, applied in order.
        #[arg(long)]
        channels: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Language code written into every pair.
        #[arg(long, default_value = "und")]
        input_lang: String,
    },
    /// Train the character-level seq2seq model and write a checkpoint.
    TrainToy(TrainArgs),
    /// Finite-difference check of the model gradients on a small random model.
    Gradcheck {
        #[arg(long, default_value_t = 6)]
        vocab: usize,
        #[arg(long, default_value_t = 2)]
        embed_dim: usize,
        #[arg(long, default_value_t = 3)]
        hidden_dim: usize,
        #[arg(long, default_value_t = 3)]
        sequences: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Normalize sentences (one per line) with a backend.
    Normalize {
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a backend against gold corpora.
    Evaluate {
        #[command(flatten)]
        backend: BackendArgs,
        /// Corpus as LANG=PATH (repeatable).
        #[arg(long = "corpus", required = true, value_name = "LANG=PATH")]
        corpora: Vec<String>,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the synthetic bilingual train/decode/align/score experiment.
    Desk {
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        max_epochs: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
pub enum LexiconCmd {
    /// Count raw-to-norm pairs of the given corpora.
    Build {
        #[arg(long = "corpus", required = true, value_name = "LANG=PATH")]
        corpora: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a lexicon in canonical order.
    Dump {
        #[arg(long)]
        lexicon: PathBuf,
        /// Print only the most frequent normalization of each form.
        #[arg(long)]
        heads: bool,
    },
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 30)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lr_decay: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden_dim: usize,
}

#[derive(Args, Debug)]
pub struct BackendArgs {
    /// lai, mfr:LEXICON, toy:CHECKPOINT or remote[:URL].
    #[arg(long)]
    pub backend: Option<String>,
    /// Seconds per remote attempt.
    #[arg(long, default_value_t = 30.0)]
    pub remote_timeout: f64,
    #[arg(long, default_value_t = 3)]
    pub remote_retries: u32,
    #[arg(long, default_value_t = 4)]
    pub remote_max_in_flight: usize,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    CheckFailed(String),
    Data(String),
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Usage(_) => 64,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m)
            | CliError::CheckFailed(m)
            | CliError::Data(m)
            | CliError::Backend(m) => f.write_str(m),
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => atomic_write(p, text.as_bytes())
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}

/// Splits `LANG=PATH`.
pub fn parse_corpus_arg(arg: &str) -> Result<(String, PathBuf)> {
    match arg.split_once('=') {
        Some((lang, path)) if !lang.is_empty() && !path.is_empty() => {
            Ok((lang.into(), path.into()))
        }
        _ => Err(CliError::Usage(format!(
            "corpus {arg:?} is not of the form LANG=PATH"
        ))),
    }
}

fn load_corpora(args: &[String], g: &Global) -> Result<Vec<Corpus>> {
    let mut out = Vec::new();
    for a in args {
        let (lang, path) = parse_corpus_arg(a)?;
        if !g.keeps(&lang) {
            continue;
        }
        let text = read_text(&path)?;
        let corpus = parse_corpus(&text, &lang)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            .with_source(path.display().to_string());
        out.push(corpus);
    }
    Ok(out)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect())
}

fn build_backend(
    args: &BackendArgs,
    g: &Global,
) -> Result<(Selector, Box<dyn lexnorm_core::backend::Normalizer>)> {
    let env_url = std::env::var(REMOTE_URL_ENV).ok();
    let sel = match &args.backend {
        Some(s) => s
            .parse::<Selector>()
            .map_err(|e| CliError::Usage(e.to_string()))?,
        None => Selector::default_from(env_url.clone()),
    };
    if !(args.remote_timeout > 0.0 && args.remote_timeout.is_finite()) {
        return Err(CliError::Usage("--remote-timeout must be positive".into()));
    }
    let remote = RemoteConfig {
        timeout: Duration::from_secs_f64(args.remote_timeout),
        retries: args.remote_retries,
        max_in_flight: args.remote_max_in_flight,
        ..RemoteConfig::new("http://unset")
    };
    let opts = BuildOptions {
        fold_case: g.fold(),
        env_url,
        remote,
    };
    let backend = selector::build(&sel, &opts).map_err(|e| match e {
        BuildError::Io { .. } | BuildError::Format { .. } => CliError::Data(e.to_string()),
        BuildError::MissingRemoteUrl | BuildError::Remote(_) => CliError::Usage(e.to_string()),
    })?;
    Ok((sel, backend))
}

fn pipeline_err(e: PipelineError) -> CliError {
    match e {
        PipelineError::Metric(_) => CliError::Data(e.to_string()),
        _ => CliError::Backend(e.to_string()),
    }
}

fn run_command(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let g = cli.global;
    match cli.command {
        Command::Convert { corpora, out } => {
            let corpora = load_corpora(&corpora, &g)?;
            let pairs: Vec<_> = corpora.iter().flat_map(to_sentence_pairs).collect();
            write_output(out.as_deref(), &write_pairs(&pairs), stdout)
        }
        Command::Lexicon { action } => match action {
            LexiconCmd::Build { corpora, out } => {
                let mut b = LexiconBuilder::new(g.fold());
                for c in load_corpora(&corpora, &g)? {
                    b.add_corpus(&c);
                }
                write_output(out.as_deref(), &write_lexicon(&b.build()), stdout)
            }
            LexiconCmd::Dump { lexicon, heads } => {
                let lex = read_lexicon(&read_text(&lexicon)?, g.fold())
                    .map_err(|e| CliError::Data(format!("{}: {e}", lexicon.display())))?;
                let text = if heads {
                    let mut seen = BTreeSet::new();
                    lex.iter()
                        .filter(|(raw, _)| seen.insert(raw.to_string()))
                        .map(|(raw, c)| format!("{raw}\t{}\n", c.norm))
                        .collect()
                } else {
                    write_lexicon(&lex)
                };
                write_output(None, &text, stdout)
            }
        },
        Command::Augment {
            channels,
            input,
            out,
            input_lang,
        } => {
            let spec =
                NoiseSpec::parse(&channels, g.seed).map_err(|e| CliError::Usage(e.to_string()))?;
            let lines: Vec<(String, String)> = read_lines(&input)?
                .into_iter()
                .filter(|l| !l.is_empty())
                .map(|l| (input_lang.clone(), l))
                .collect();
            write_output(
                out.as_deref(),
                &write_pairs(&corrupt_corpus(&lines, &spec)),
                stdout,
            )
        }
        Command::TrainToy(a) => {
            let load = |p: &Path| -> Result<Vec<_>> {
                let pairs = read_pairs(&read_text(p)?)
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                Ok(pairs.into_iter().filter(|p| g.keeps(&p.lang)).collect())
            };
            let cfg = TrainConfig {
                learning_rate: a.lr,
                batch_size: a.batch_size,
                max_epochs: a.max_epochs,
                patience: a.patience,
                clip_norm: a.clip_norm,
                lr_decay: a.lr_decay,
                dropout: a.dropout,
                seed: g.seed,
                embed_dim: a.embed_dim,
                hidden_dim: a.hidden_dim,
            };
            let trained = train(&load(&a.train)?, &load(&a.dev)?, &cfg).map_err(|e| match e {
                lexnorm_core::seq2seq::Seq2SeqError::InvalidConfig(_) => {
                    CliError::Usage(e.to_string())
                }
                _ => CliError::Data(e.to_string()),
            })?;
            let mut log = String::new();
            for h in &trained.history {
                log.push_str(&format!(
                    "epoch {:>3}  loss {:.6}  dev_acc {:.6}  dev_char_acc {:.6}\n",
                    h.epoch, h.train_loss, h.dev_accuracy, h.dev_char_accuracy
                ));
            }
            log.push_str(&format!("best epoch {}\n", trained.best_epoch));
            atomic_write(&a.out, write_checkpoint(&trained.model).as_bytes())
                .map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))?;
            write_output(None, &log, stdout)
        }
        Command::Gradcheck {
            vocab,
            embed_dim,
            hidden_dim,
            sequences,
            tolerance,
        } => {
            if vocab < 5 || embed_dim == 0 || hidden_dim == 0 || sequences == 0 {
                return Err(CliError::Usage(
                    "gradcheck needs --vocab >= 5 and positive dimensions and sequences".into(),
                ));
            }
            let dims = Dims {
                vocab,
                embed: embed_dim,
                hidden: hidden_dim,
            };
            let (params, batch) = gradcheck::random_problem(dims, sequences, g.seed);
            let r = gradcheck::check(&params, &batch).map_err(|e| CliError::Data(e.to_string()))?;
            let line = format!(
                "parameters {}  max relative error {:.3e}  at {}\n",
                r.n_params, r.max_rel_err, r.worst_index
            );
            write_output(None, &line, stdout)?;
            if r.max_rel_err < tolerance {
                Ok(())
            } else {
                Err(CliError::CheckFailed(format!(
                    "max relative error {:.3e} is not below {tolerance:e}",
                    r.max_rel_err
                )))
            }
        }
        Command::Normalize {
            backend,
            input,
            out,
        } => {
            let lang = match g.langs.as_slice() {
                [l] => l.clone(),
                _ => return Err(CliError::Usage("normalize needs exactly one --lang".into())),
            };
            let (_, backend) = build_backend(&backend, &g)?;
            let lines = read_lines(&input)?;
            let outputs = if lines.is_empty() {
                Vec::new()
            } else {
                backend
                    .normalize_batch(&lang, &lines)
                    .map_err(|e| CliError::Backend(e.to_string()))?
            };
            let text: String = outputs.iter().map(|s| format!("{s}\n")).collect();
            write_output(out.as_deref(), &text, stdout)
        }
        Command::Evaluate {
            backend,
            corpora,
            report,
        } => {
            let corpora = load_corpora(&corpora, &g)?;
            let (sel, backend) = build_backend(&backend, &g)?;
            let result = evaluate_with(
                backend.as_ref(),
                &corpora,
                &AlignConfig {
                    fold_case: g.fold(),
                    ..AlignConfig::default()
                },
                g.fold(),
            )
            .map_err(pipeline_err)?;
            let json = report_json(&result, &sel.to_string(), g.fold());
            if let Some(p) = &report {
                atomic_write(p, json.as_bytes())
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            }
            write_output(None, &format!("{}\n{json}", report_table(&result)), stdout)
        }
        Command::Desk { report, max_epochs } => {
            let mut cfg = DeskConfig::with_seed(g.seed);
            if let Some(e) = max_epochs {
                cfg.train.max_epochs = e;
            }
            let outcome = desk::run(&cfg).map_err(|e| CliError::Data(e.to_string()))?;
            let json = desk::report_json(&outcome);
            if let Some(p) = &report {
                atomic_write(p, json.as_bytes())
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            }
            let mut text = String::new();
            for (name, r) in [
                ("lai", &outcome.lai),
                ("mfr", &outcome.mfr),
                ("toy", &outcome.toy),
            ] {
                text.push_str(&format!("== {name}\n{}", report_table(r)));
            }
            text.push_str(&format!("best epoch {}\n", outcome.best_epoch));
            write_output(None, &text, stdout)
        }
    }
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `stdout` and diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match run_command(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "lexnorm: {e}");
            e.exit_code()
        }
    }
}

pub fn main_with_env() -> ExitCode {
    let code = run(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    ExitCode::from(code)
}
