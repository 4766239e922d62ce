//! Wall-clock throughput of end-to-end parsing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Instant;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::inference::{Segmentation, Task};
use crate::model::Model;

/// What to time.
#[derive(Debug, Clone, Copy)]
pub enum BenchTarget<'a> {
    /// Load the checkpoint, then segment and parse every sentence. Loading is
    /// part of each timed run.
    Checkpoint(&'a Path),
    /// An already loaded model.
    Loaded(&'a Model),
    /// An external program; `{input}` in `args` is replaced by the corpus path.
    Command {
        program: &'a str,
        args: &'a [String],
        input: &'a Path,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub edus: usize,
    pub sentences: usize,
    pub median_seconds: f64,
}

impl Bucket {
    pub fn seconds_per_sentence(&self) -> f64 {
        self.median_seconds / self.sentences as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub sentences: usize,
    pub run_seconds: Vec<f64>,
    pub median_seconds: f64,
    /// Timing of the sentences grouped by gold EDU count; empty for commands.
    pub buckets: Vec<Bucket>,
}

impl BenchReport {
    pub fn sentences_per_second(&self) -> f64 {
        self.sentences as f64 / self.median_seconds.max(f64::MIN_POSITIVE)
    }

    pub fn bucket(&self, edus: usize) -> Option<&Bucket> {
        self.buckets.iter().find(|b| b.edus == edus)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sentences\t{}", self.sentences);
        for (i, s) in self.run_seconds.iter().enumerate() {
            let _ = writeln!(out, "run{}_seconds\t{s:.6}", i + 1);
        }
        let _ = writeln!(out, "median_seconds\t{:.6}", self.median_seconds);
        let _ = writeln!(
            out,
            "sentences_per_second\t{:.3}",
            self.sentences_per_second()
        );
        if !self.buckets.is_empty() {
            out.push_str("edus\tsentences\tmedian_seconds\tseconds_per_sentence\n");
            for b in &self.buckets {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{:.6}\t{:.6}",
                    b.edus,
                    b.sentences,
                    b.median_seconds,
                    b.seconds_per_sentence()
                );
            }
        }
        out
    }
}

pub const RUNS: usize = 3;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn time<T>(f: impl FnOnce() -> Result<T>) -> Result<f64> {
    let t = Instant::now();
    f()?;
    Ok(t.elapsed().as_secs_f64())
}

fn run_command(program: &str, args: &[String], input: &Path) -> Result<()> {
    let input_s = input.display().to_string();
    let args: Vec<String> = args
        .iter()
        .map(|a| a.replace("{input}", &input_s))
        .collect();
    let status = Command::new(program)
        .args(&args)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map_err(|e| Error::io(Path::new(program), e))?;
    if status.success() {
        Ok(())
    } else {
        Err(Error::Eval(format!(
            "benchmark command `{program}` exited with {status}"
        )))
    }
}

/// Median-of-three timing of `target` over `sentences` on one thread.
pub fn benchmark_speed(target: BenchTarget, sentences: &[Sentence]) -> Result<BenchReport> {
    if sentences.is_empty() {
        return Err(Error::Eval("benchmark needs at least one sentence".into()));
    }
    let task = Task::Parse(Segmentation::Auto);
    let mut run_seconds = Vec::with_capacity(RUNS);
    let mut loaded: Option<Model> = None;
    for _ in 0..RUNS {
        let secs = match target {
            BenchTarget::Checkpoint(path) => time(|| {
                let m = Model::load(path)?;
                m.predict(sentences, task, 1)?;
                loaded = Some(m);
                Ok(())
            })?,
            BenchTarget::Loaded(m) => time(|| m.predict(sentences, task, 1))?,
            BenchTarget::Command {
                program,
                args,
                input,
            } => time(|| run_command(program, args, input))?,
        };
        run_seconds.push(secs);
    }
    let model = match target {
        BenchTarget::Checkpoint(_) => loaded.as_ref(),
        BenchTarget::Loaded(m) => Some(m),
        BenchTarget::Command { .. } => None,
    };
    let mut buckets = Vec::new();
    if let Some(m) = model {
        let mut groups: BTreeMap<usize, Vec<Sentence>> = BTreeMap::new();
        for s in sentences {
            groups.entry(s.edu_count()).or_default().push(s.clone());
        }
        for (edus, group) in groups {
            let runs = (0..RUNS)
                .map(|_| time(|| m.predict(&group, task, 1)))
                .collect::<Result<Vec<f64>>>()?;
            buckets.push(Bucket {
                edus,
                sentences: group.len(),
                median_seconds: median(runs),
            });
        }
    }
    Ok(BenchReport {
        sentences: sentences.len(),
        median_seconds: median(run_seconds.clone()),
        run_seconds,
        buckets,
    })
}
