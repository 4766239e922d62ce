//! Command-line front end: `train`, `segment`, `parse`, `eval`, `bench` and
//! `synth`. Exit status is 0 on success, 1 on usage errors and 2 on data
//! errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{benchmark_speed, BenchTarget};
use crate::corpus::{format_corpus, read_corpus, CorpusOptions, Sentence};
use crate::error::{Error, Result};
use crate::eval::{
    confusion_matrix_segmented, parseval_segmented, report_line, segmentation_prf, REPORT_HEADER,
};
use crate::inference::{predict_pipeline, Segmentation, Task};
use crate::model::Model;
use crate::relations::RelationInventory;
use crate::synth::{generate_synthetic_corpus, SynthConfig};
use crate::training::{self, TrainConfig};

pub const SEED_ENV: &str = "RSTPTR_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "rstptr",
    version,
    about = "Pointer-network RST discourse segmenter and parser"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write its checkpoint.
    Train(TrainArgs),
    /// Predict EDU boundaries.
    Segment(SegmentArgs),
    /// Predict discourse trees.
    Parse(ParseArgs),
    /// Score predictions against gold annotations.
    Eval(EvalArgs),
    /// Measure end-to-end parsing throughput.
    Bench(BenchArgs),
    /// Write a synthetic annotated corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    mode: Option<String>,
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Held-out corpus for model selection instead of a random split.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Per-epoch log as tab-separated values.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Any config key, e.g. `--set hidden_size=32`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("segmentation").required(true).args(["gold_seg", "auto_seg"]))]
struct ParseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Parse the EDUs given in the input.
    #[arg(long)]
    gold_seg: bool,
    /// Segment first, then parse the predicted EDUs.
    #[arg(long)]
    auto_seg: bool,
    /// Separately trained segmenter for `--auto-seg`.
    #[arg(long, requires = "auto_seg")]
    seg_model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EvalTask {
    Seg,
    Parse,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    task: EvalTask,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Also print the relation confusion matrix.
    #[arg(long)]
    confusion: bool,
    /// Relation inventory file, one name per line.
    #[arg(long)]
    relations: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["model", "command"]))]
struct BenchArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// External command line to time instead, split on whitespace; `{input}`
    /// is replaced by the input path.
    #[arg(long, allow_hyphen_values = true)]
    command: Option<String>,
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    min_edus: Option<usize>,
    #[arg(long)]
    max_edus: Option<usize>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

/// Runs one invocation; `args` includes the program name.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    let seed_env = std::env::var(SEED_ENV).ok();
    let result = match cli.command {
        Command::Train(a) => train(a, seed_env.as_deref(), stderr),
        Command::Segment(a) => segment(a, stdout),
        Command::Parse(a) => parse(a, stdout),
        Command::Eval(a) => eval(a, stdout),
        Command::Bench(a) => bench(a, stdout),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            1
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io(Path::new("<stdout>"), e)),
    }
}

fn train(
    a: TrainArgs,
    seed_env: Option<&str>,
    stderr: &mut dyn Write,
) -> std::result::Result<(), Failure> {
    let mut config = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed_env {
        config.seed = s
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={s} is not an unsigned integer")))?;
    }
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        config
            .set(k, v)
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(m) = &a.mode {
        config.mode = m
            .parse()
            .map_err(|e: Error| Failure::Usage(e.to_string()))?;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    config.check().map_err(|e| Failure::Usage(e.to_string()))?;
    let inventory = match &config.relations {
        Some(p) => RelationInventory::load(p)?,
        None => RelationInventory::default(),
    };
    let opts = CorpusOptions {
        inventory,
        binarize: false,
    };
    let corpus = read_corpus(&a.corpus, &opts)?;
    let quiet = a.quiet;
    let mut progress = |r: &training::EpochRecord| {
        if !quiet {
            let _ = writeln!(
                stderr,
                "epoch {} loss {:.4} dev {:.4} ({:.1}s)",
                r.epoch, r.total, r.dev_score, r.seconds
            );
        }
    };
    let (model, log) = match &a.dev {
        Some(dev_path) => {
            let dev = read_corpus(dev_path, &opts)?;
            training::check_annotations(&corpus, config.mode, None)?;
            training::check_annotations(&dev, config.mode, None)?;
            let mut model = training::init_model(&corpus, &config)?;
            let log = training::fit(&mut model, &corpus, &dev, &config, &mut progress)?;
            (model, log)
        }
        None => {
            let o = training::train_with_progress(&corpus, &config, &mut progress)?;
            (o.model, o.log)
        }
    };
    model.save(&a.out)?;
    if let Some(p) = &a.log {
        log.write(p)?;
    }
    Ok(())
}

fn read_for(model: &Model, path: &Path) -> Result<Vec<Sentence>> {
    read_corpus(
        path,
        &CorpusOptions {
            inventory: model.labels().inventory().clone(),
            binarize: false,
        },
    )
}

fn segment(a: SegmentArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let model = Model::load(&a.model)?;
    let input = read_for(&model, &a.input)?;
    let pred = model.predict_sentences(&input, Task::Segment, a.threads)?;
    emit(&format_corpus(&pred), a.out.as_deref(), stdout)?;
    Ok(())
}

fn parse(a: ParseArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let model = Model::load(&a.model)?;
    let input = read_for(&model, &a.input)?;
    let analyses = match (&a.seg_model, a.gold_seg) {
        (Some(seg), _) => predict_pipeline(&Model::load(seg)?, &model, &input, a.threads)?,
        (None, true) => model.predict(&input, Task::Parse(Segmentation::Gold), a.threads)?,
        (None, false) => model.predict(&input, Task::Parse(Segmentation::Auto), a.threads)?,
    };
    let pred: Vec<Sentence> = input
        .iter()
        .zip(analyses)
        .map(|(s, p)| Sentence {
            tokens: s.tokens.clone(),
            edu_ends: p.edu_ends,
            gold_tree: p.tree,
        })
        .collect();
    emit(&format_corpus(&pred), a.out.as_deref(), stdout)?;
    Ok(())
}

fn eval(a: EvalArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let opts = CorpusOptions {
        inventory: match &a.relations {
            Some(p) => RelationInventory::load(p)?,
            None => RelationInventory::default(),
        },
        binarize: false,
    };
    let pred = read_corpus(&a.pred, &opts)?;
    let gold = read_corpus(&a.gold, &opts)?;
    if pred.len() != gold.len() {
        return Err(Error::Eval(format!(
            "{} has {} sentences but {} has {}",
            a.pred.display(),
            pred.len(),
            a.gold.display(),
            gold.len()
        ))
        .into());
    }
    for (i, (p, g)) in pred.iter().zip(&gold).enumerate() {
        if p.tokens.len() != g.tokens.len() {
            return Err(Error::Eval(format!(
                "sentence {}: {} tokens predicted vs {} gold",
                i + 1,
                p.tokens.len(),
                g.tokens.len()
            ))
            .into());
        }
    }
    let mut text = format!("{REPORT_HEADER}\n");
    match a.task {
        EvalTask::Seg => {
            let pe: Vec<Vec<usize>> = pred.iter().map(|s| s.edu_ends.clone()).collect();
            let ge: Vec<Vec<usize>> = gold.iter().map(|s| s.edu_ends.clone()).collect();
            text.push_str(&report_line("Segmentation", &segmentation_prf(&pe, &ge)?));
            text.push('\n');
        }
        EvalTask::Parse => {
            let trees = |c: &[Sentence], path: &Path| -> Result<()> {
                match c.iter().position(|s| s.gold_tree.is_none()) {
                    Some(i) => Err(Error::Annotation(format!(
                        "{}: sentence {} has no TREE line",
                        path.display(),
                        i + 1
                    ))),
                    None => Ok(()),
                }
            };
            trees(&pred, &a.pred)?;
            trees(&gold, &a.gold)?;
            let p: Vec<_> = pred
                .iter()
                .map(|s| {
                    (
                        s.gold_tree.as_ref().expect("checked"),
                        s.edu_ends.as_slice(),
                    )
                })
                .collect();
            let g: Vec<_> = gold
                .iter()
                .map(|s| {
                    (
                        s.gold_tree.as_ref().expect("checked"),
                        s.edu_ends.as_slice(),
                    )
                })
                .collect();
            let report = parseval_segmented(&p, &g)?;
            report.check_ordering()?;
            for (task, prf) in report.rows() {
                text.push_str(&report_line(task, &prf));
                text.push('\n');
            }
            if a.confusion {
                text.push('\n');
                text.push_str(&confusion_matrix_segmented(&p, &g)?.to_tsv());
            }
        }
    }
    emit(&text, None, stdout)?;
    Ok(())
}

fn bench(a: BenchArgs, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let report = match (&a.model, &a.command) {
        (Some(m), _) => {
            let input = read_corpus(&a.input, &CorpusOptions::default())?;
            benchmark_speed(BenchTarget::Checkpoint(m), &input)?
        }
        (None, Some(cmd)) => {
            let input = read_corpus(&a.input, &CorpusOptions::default())?;
            let words: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            let (program, args) = words
                .split_first()
                .ok_or_else(|| Failure::Usage("--command needs a program".into()))?;
            benchmark_speed(
                BenchTarget::Command {
                    program,
                    args,
                    input: &a.input,
                },
                &input,
            )?
        }
        (None, None) => return Err(Failure::Usage("bench needs --model or --command".into())),
    };
    emit(&report.to_tsv(), None, stdout)?;
    Ok(())
}

fn synth(a: SynthArgs) -> std::result::Result<(), Failure> {
    let mut config = SynthConfig::default();
    if let Some(n) = a.min_edus {
        config.min_edus = n;
    }
    if let Some(n) = a.max_edus {
        config.max_edus = n;
    }
    if config.min_edus == 0 || config.min_edus > config.max_edus {
        return Err(Failure::Usage(format!(
            "EDU range {}..={} is empty",
            config.min_edus, config.max_edus
        )));
    }
    let corpus = generate_synthetic_corpus(a.seed, a.count, &config);
    emit(&format_corpus(&corpus), Some(&a.out), &mut std::io::sink())?;
    Ok(())
}
