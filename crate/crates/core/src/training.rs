//! Batched teacher-forced training for segmenter, parser and joint modes.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rstptr_autodiff::{AdamConfig, AdamState, Grads, ParamStore, Tape, Var};

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::eval::{parseval, parseval_segmented, segmentation_prf, EvalReport, Prf};
use crate::inference::{Segmentation, Task};
use crate::model::{Architecture, Model, ModelConfig};
use crate::nn::{encode_batch, Dropout, Graph};
use crate::parser::parser_losses;
use crate::relations::RelationInventory;
use crate::segmenter::segmentation_losses;
use crate::vocab::{StaticEmbeddings, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Segmenter,
    Parser,
    Joint,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Segmenter => "segmenter",
            Mode::Parser => "parser",
            Mode::Joint => "joint",
        }
    }

    fn segments(self) -> bool {
        matches!(self, Mode::Segmenter | Mode::Joint)
    }

    fn parses(self) -> bool {
        matches!(self, Mode::Parser | Mode::Joint)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "segmenter" | "seg" => Ok(Mode::Segmenter),
            "parser" | "parse" => Ok(Mode::Parser),
            "joint" => Ok(Mode::Joint),
            _ => Err(Error::Config(format!(
                "unknown mode `{s}` (segmenter, parser, joint)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub model: ModelConfig,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub dev_fraction: f64,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    /// Rescale gradients whose global norm exceeds this.
    pub max_grad_norm: Option<f64>,
    /// Stop as soon as the dev score reaches this value. The default of 1.0
    /// only skips epochs that could not replace the retained checkpoint.
    pub stop_at: Option<f64>,
    pub embeddings: Option<PathBuf>,
    pub relations: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::Joint,
            model: ModelConfig::default(),
            batch_size: 80,
            learning_rate: 1e-3,
            l2_lambda: 1e-5,
            epochs: 100,
            seed: 1,
            dev_fraction: 0.1,
            patience: 10,
            max_grad_norm: None,
            stop_at: Some(1.0),
            embeddings: None,
            relations: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid boolean `{value}` for `{key}`"
        ))),
    }
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] = &[
        "mode",
        "batch_size",
        "dropout",
        "embedding_dim",
        "hidden_size",
        "encoder_layers",
        "decoder_layers",
        "classifier_dim",
        "learning_rate",
        "l2_lambda",
        "epochs",
        "seed",
        "dev_fraction",
        "patience",
        "max_grad_norm",
        "stop_at",
        "lowercase",
        "separate_nuclearity",
        "embeddings",
        "relations",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "mode" => self.mode = v.parse()?,
            "batch_size" => self.batch_size = parse_value(key, v)?,
            "dropout" => self.model.dropout = parse_value(key, v)?,
            "embedding_dim" => self.model.embedding_dim = parse_value(key, v)?,
            "hidden_size" => self.model.hidden_size = parse_value(key, v)?,
            "encoder_layers" => self.model.encoder_layers = parse_value(key, v)?,
            "decoder_layers" => self.model.decoder_layers = parse_value(key, v)?,
            "classifier_dim" => self.model.classifier_dim = parse_value(key, v)?,
            "learning_rate" => self.learning_rate = parse_value(key, v)?,
            "l2_lambda" => self.l2_lambda = parse_value(key, v)?,
            "epochs" => self.epochs = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "dev_fraction" => self.dev_fraction = parse_value(key, v)?,
            "patience" => self.patience = parse_value(key, v)?,
            "max_grad_norm" => {
                self.max_grad_norm = match v {
                    "none" | "off" => None,
                    _ => Some(parse_value(key, v)?),
                }
            }
            "stop_at" => {
                self.stop_at = match v {
                    "none" | "off" => None,
                    _ => Some(parse_value(key, v)?),
                }
            }
            "lowercase" => self.model.lowercase = parse_bool(key, v)?,
            "separate_nuclearity" => self.model.separate_nuclearity = parse_bool(key, v)?,
            "embeddings" => self.embeddings = Some(PathBuf::from(v)),
            "relations" => self.relations = Some(PathBuf::from(v)),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Corpus {
                path: source.to_string(),
                line: ln + 1,
                message: "expected `key = value`".into(),
            })?;
            self.set(k, v).map_err(|e| Error::Corpus {
                path: source.to_string(),
                line: ln + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = TrainConfig::default();
        c.apply_text(&text, &path.display().to_string())?;
        Ok(c)
    }

    pub fn check(&self) -> Result<()> {
        self.model.check()?;
        if self.batch_size == 0 || self.epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch_size, epochs and patience must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.l2_lambda >= 0.0) {
            return Err(Error::Config(
                "learning_rate must be positive, l2_lambda non-negative".into(),
            ));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(Error::Config(format!(
                "dev_fraction {} not in (0, 1)",
                self.dev_fraction
            )));
        }
        if self.max_grad_norm.is_some_and(|n| !(n > 0.0)) {
            return Err(Error::Config("max_grad_norm must be positive".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        let path = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string());
        let mut out = format!(
            "mode = {}\nbatch_size = {}\ndropout = {}\nembedding_dim = {}\nhidden_size = {}\n\
             encoder_layers = {}\ndecoder_layers = {}\nclassifier_dim = {}\nlearning_rate = {}\n\
             l2_lambda = {}\nepochs = {}\nseed = {}\ndev_fraction = {}\npatience = {}\n\
             max_grad_norm = {}\nstop_at = {}\nlowercase = {}\nseparate_nuclearity = {}\n",
            self.mode,
            self.batch_size,
            self.model.dropout,
            self.model.embedding_dim,
            self.model.hidden_size,
            self.model.encoder_layers,
            self.model.decoder_layers,
            self.model.classifier_dim,
            self.learning_rate,
            self.l2_lambda,
            self.epochs,
            self.seed,
            self.dev_fraction,
            self.patience,
            opt(self.max_grad_norm),
            opt(self.stop_at),
            self.model.lowercase,
            self.model.separate_nuclearity,
        );
        if let Some(p) = path(&self.embeddings) {
            let _ = writeln!(out, "embeddings = {p}");
        }
        if let Some(p) = path(&self.relations) {
            let _ = writeln!(out, "relations = {p}");
        }
        out
    }
}

/// Shuffled partition of `0..n` into batches; the order depends only on
/// `seed` and `epoch`.
pub fn batch_sentences(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    idx.shuffle(&mut rng);
    idx.chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

/// Batch loss graph. Each component is the per-sentence sum over decisions,
/// averaged over the batch.
#[derive(Debug, Clone)]
pub struct Objective {
    pub total: Var,
    pub segmentation: Option<Var>,
    pub structure: Option<Var>,
    pub labels: Option<Var>,
    /// Summed components of each sentence, `1 x 1` each.
    pub per_sentence: Vec<Var>,
}

fn mean_of(tape: &mut Tape, parts: &[Var]) -> Var {
    let all = tape.concat_rows(parts);
    let s = tape.sum(all);
    tape.scale(s, 1.0 / parts.len() as f64)
}

/// Records the teacher-forced training loss of `batch` on `tape`.
pub fn batch_objective(
    tape: &mut Tape,
    store: &ParamStore,
    arch: &Architecture,
    batch: &[&Sentence],
    mode: Mode,
    dropout: Option<Dropout>,
) -> Result<Objective> {
    if batch.is_empty() {
        return Err(Error::Sentence("empty batch".into()));
    }
    let mut g = match dropout {
        Some(d) => Graph::training(tape, store, arch, d),
        None => Graph::new(tape, store, arch),
    };
    let ids: Vec<Vec<usize>> = batch.iter().map(|s| arch.vocab.encode(&s.tokens)).collect();
    let enc = encode_batch(&mut g, &ids)?;
    let ends: Vec<&[usize]> = batch.iter().map(|s| s.edu_ends.as_slice()).collect();
    let mut components: Vec<Vec<Var>> = Vec::new();
    let mut obj = Objective {
        total: enc.top,
        segmentation: None,
        structure: None,
        labels: None,
        per_sentence: Vec::new(),
    };
    if mode.segments() {
        let seg = segmentation_losses(&mut g, &enc, &ends)?;
        obj.segmentation = Some(mean_of(g.tape, &seg));
        components.push(seg);
    }
    if mode.parses() {
        let trees = batch
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.gold_tree.as_ref().ok_or_else(|| {
                    Error::Annotation(format!("batch sentence {} has no tree", i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (structure, labels) = parser_losses(&mut g, &enc, &ends, &trees)?;
        obj.structure = Some(mean_of(g.tape, &structure));
        obj.labels = Some(mean_of(g.tape, &labels));
        components.push(structure);
        components.push(labels);
    }
    obj.per_sentence = (0..batch.len())
        .map(|s| {
            let parts: Vec<Var> = components.iter().map(|c| c[s]).collect();
            let col = g.tape.concat_rows(&parts);
            g.tape.sum(col)
        })
        .collect();
    let means: Vec<Var> = [obj.segmentation, obj.structure, obj.labels]
        .into_iter()
        .flatten()
        .collect();
    let col = g.tape.concat_rows(&means);
    obj.total = g.tape.sum(col);
    Ok(obj)
}

/// `lambda / 2 * sum(theta^2)` over trainable parameters.
pub fn l2_penalty(store: &ParamStore, lambda: f64) -> f64 {
    0.5 * lambda * store.trainable_sum_squares()
}

fn add_l2_gradient(grads: &mut Grads, store: &ParamStore, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for (id, _, t) in store.iter() {
        if t.requires_grad {
            for (g, v) in grads.get_mut(id).iter_mut().zip(t.data()) {
                *g += lambda * v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub segmentation_loss: f64,
    pub structure_loss: f64,
    pub label_loss: f64,
    pub l2: f64,
    pub total: f64,
    pub dev_segmentation_f1: f64,
    pub dev_span_f1: f64,
    pub dev_nuclearity_f1: f64,
    pub dev_relation_f1: f64,
    pub dev_score: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainLog {
    pub const HEADER: &'static str = "epoch\tL_SEG\tL_s\tL_l\tL2\ttotal\tdev_seg_f1\tdev_span_f1\tdev_nuc_f1\tdev_rel_f1\tdev_score\tseconds";

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.2}",
                r.epoch,
                r.segmentation_loss,
                r.structure_loss,
                r.label_loss,
                r.l2,
                r.total,
                r.dev_segmentation_f1,
                r.dev_span_f1,
                r.dev_nuclearity_f1,
                r.dev_relation_f1,
                r.dev_score,
                r.seconds
            );
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Scores used for model selection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DevScores {
    pub segmentation: Prf,
    pub parse: EvalReport,
}

/// Segmentation and parse scores of `model` on annotated sentences. Joint
/// mode parses predicted EDUs and compares token spans; parser mode uses
/// gold EDUs.
pub fn evaluate(model: &Model, sentences: &[Sentence], mode: Mode) -> Result<DevScores> {
    let mut out = DevScores::default();
    let gold_ends: Vec<Vec<usize>> = sentences.iter().map(|s| s.edu_ends.clone()).collect();
    let task = match mode {
        Mode::Segmenter => Task::Segment,
        Mode::Parser => Task::Parse(Segmentation::Gold),
        Mode::Joint => Task::Parse(Segmentation::Auto),
    };
    let pred = model.predict(sentences, task, 1)?;
    if mode.segments() {
        let pe: Vec<Vec<usize>> = pred.iter().map(|a| a.edu_ends.clone()).collect();
        out.segmentation = segmentation_prf(&pe, &gold_ends)?;
    }
    if mode.parses() {
        let gold_trees: Vec<_> = sentences
            .iter()
            .map(|s| {
                s.gold_tree
                    .as_ref()
                    .ok_or_else(|| Error::Annotation("sentence without tree".into()))
            })
            .collect::<Result<_>>()?;
        out.parse = if mode == Mode::Parser {
            let pt: Vec<_> = pred.iter().map(|a| a.tree.clone().expect("tree")).collect();
            let gt: Vec<_> = gold_trees.into_iter().cloned().collect();
            parseval(&pt, &gt)?
        } else {
            let p: Vec<_> = pred
                .iter()
                .map(|a| (a.tree.as_ref().expect("tree"), a.edu_ends.as_slice()))
                .collect();
            let g: Vec<_> = gold_trees
                .iter()
                .zip(&gold_ends)
                .map(|(t, e)| (*t, e.as_slice()))
                .collect();
            parseval_segmented(&p, &g)?
        };
        out.parse.check_ordering()?;
    }
    Ok(out)
}

impl DevScores {
    pub fn selection_score(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Segmenter => self.segmentation.f1(),
            Mode::Parser | Mode::Joint => self.parse.relation.f1(),
        }
    }
}

/// Checks that every sentence carries what `mode` trains on.
pub fn check_annotations(corpus: &[Sentence], mode: Mode, model: Option<&Model>) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::Annotation("empty training corpus".into()));
    }
    for (i, s) in corpus.iter().enumerate() {
        s.check()
            .map_err(|e| Error::Annotation(format!("sentence {}: {e}", i + 1)))?;
        if mode.parses() {
            let tree = s.gold_tree.as_ref().ok_or_else(|| {
                Error::Annotation(format!(
                    "sentence {} has no TREE line, which {mode} training requires",
                    i + 1
                ))
            })?;
            if let Some(m) = model {
                for n in tree.internal_nodes() {
                    if m.labels().index_of(n.label).is_none() {
                        return Err(Error::Annotation(format!(
                            "sentence {}: label {} is not in the label set",
                            i + 1,
                            n.label
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Shuffles once with `seed` and holds out `round(fraction * n)` sentences
/// (at least one when there are two or more).
pub fn split_dev(corpus: &[Sentence], fraction: f64, seed: u64) -> (Vec<Sentence>, Vec<Sentence>) {
    let n = corpus.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let dev_n = if n < 2 {
        0
    } else {
        ((fraction * n as f64).round() as usize).clamp(1, n - 1)
    };
    let dev = idx[..dev_n].iter().map(|&i| corpus[i].clone()).collect();
    let train = idx[dev_n..].iter().map(|&i| corpus[i].clone()).collect();
    (train, dev)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainLog,
    pub train_size: usize,
    pub dev_size: usize,
}

/// Builds a fresh model for `train` per `config`.
pub fn init_model(train: &[Sentence], config: &TrainConfig) -> Result<Model> {
    let inventory = match &config.relations {
        Some(p) => RelationInventory::load(p)?,
        None => RelationInventory::default(),
    };
    match &config.embeddings {
        Some(p) => {
            let e = StaticEmbeddings::load(p)?;
            Model::with_static_embeddings(config.model.clone(), &e, inventory, config.seed)
        }
        None => {
            let vocab = Vocab::build(train, config.model.lowercase);
            Model::new(config.model.clone(), vocab, inventory, config.seed)
        }
    }
}

/// Splits off a dev set, initializes a model and trains it.
pub fn train(corpus: &[Sentence], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(corpus, config, |_| {})
}

pub fn train_with_progress(
    corpus: &[Sentence],
    config: &TrainConfig,
    progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.check()?;
    check_annotations(corpus, config.mode, None)?;
    let (train_set, dev_set) = split_dev(corpus, config.dev_fraction, config.seed);
    let mut model = init_model(&train_set, config)?;
    check_annotations(corpus, config.mode, Some(&model))?;
    let log = fit(&mut model, &train_set, &dev_set, config, progress)?;
    Ok(TrainOutcome {
        model,
        log,
        train_size: train_set.len(),
        dev_size: dev_set.len(),
    })
}

/// Trains `model` in place, keeping the parameters of the best dev epoch.
/// An empty dev set selects on the training set. Training ends after
/// `patience` epochs without improvement or once the dev score reaches
/// `stop_at`.
pub fn fit(
    model: &mut Model,
    train: &[Sentence],
    dev: &[Sentence],
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainLog> {
    config.check()?;
    check_annotations(train, config.mode, Some(model))?;
    let dev = if dev.is_empty() { train } else { dev };
    let mut adam = AdamState::new(
        &model.store,
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5EED));
    let mut log = TrainLog::default();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut since_best = 0;
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut rec = EpochRecord {
            epoch,
            ..EpochRecord::default()
        };
        let batches = batch_sentences(train.len(), config.batch_size, config.seed, epoch);
        for batch in &batches {
            let sentences: Vec<&Sentence> = batch.iter().map(|&i| &train[i]).collect();
            let mut tape = Tape::new();
            let obj = batch_objective(
                &mut tape,
                &model.store,
                &model.arch,
                &sentences,
                config.mode,
                Some(Dropout {
                    rate: config.model.dropout,
                    rng: &mut dropout_rng,
                }),
            )?;
            let value = |v: Option<Var>| v.map_or(0.0, |v| tape.scalar(v));
            let l2 = l2_penalty(&model.store, config.l2_lambda);
            rec.segmentation_loss += value(obj.segmentation);
            rec.structure_loss += value(obj.structure);
            rec.label_loss += value(obj.labels);
            rec.l2 += l2;
            rec.total += tape.scalar(obj.total) + l2;
            tape.backward(obj.total);
            let mut grads = tape.param_grads(&model.store);
            drop(tape);
            add_l2_gradient(&mut grads, &model.store, config.l2_lambda);
            if let Some(max) = config.max_grad_norm {
                let norm = grads.norm();
                if norm > max {
                    grads.scale(max / norm);
                }
            }
            adam.step(&mut model.store, &grads)?;
        }
        let nb = batches.len() as f64;
        for v in [
            &mut rec.segmentation_loss,
            &mut rec.structure_loss,
            &mut rec.label_loss,
            &mut rec.l2,
            &mut rec.total,
        ] {
            *v /= nb;
        }
        let scores = evaluate(model, dev, config.mode)?;
        rec.dev_segmentation_f1 = scores.segmentation.f1();
        rec.dev_span_f1 = scores.parse.span.f1();
        rec.dev_nuclearity_f1 = scores.parse.nuclearity.f1();
        rec.dev_relation_f1 = scores.parse.relation.f1();
        rec.dev_score = scores.selection_score(config.mode);
        rec.seconds = started.elapsed().as_secs_f64();
        progress(&rec);
        log.epochs.push(rec);
        if best.as_ref().is_none_or(|(b, _)| rec.dev_score > *b) {
            best = Some((rec.dev_score, model.store.clone()));
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= config.patience || config.stop_at.is_some_and(|s| rec.dev_score >= s) {
            break;
        }
    }
    if let Some((_, store)) = best {
        model.store = store;
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_partition_the_corpus() {
        let b = batch_sentences(10, 80, 1, 1);
        assert_eq!(b.len(), 1);
        let b = batch_sentences(10, 3, 1, 2);
        assert_eq!(b.len(), 4);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(batch_sentences(10, 3, 1, 2), b);
        assert_ne!(batch_sentences(10, 3, 1, 3), b);
    }

    #[test]
    fn config_text_round_trip_and_errors() {
        let mut c = TrainConfig::default();
        c.apply_text(
            "mode = parser\nbatch_size=4 # small\n\nmax_grad_norm = 5\n",
            "cfg",
        )
        .unwrap();
        assert_eq!(c.mode, Mode::Parser);
        assert_eq!(c.batch_size, 4);
        assert_eq!(c.max_grad_norm, Some(5.0));
        let mut d = TrainConfig::default();
        d.apply_text(&c.to_text(), "cfg").unwrap();
        assert_eq!(c, d);
        let e = TrainConfig::default()
            .apply_text("a = 1", "cfg")
            .unwrap_err();
        assert!(e.to_string().contains("cfg:1"), "{e}");
        assert!(TrainConfig::default()
            .apply_text("epochs = x", "cfg")
            .is_err());
        let bad = TrainConfig {
            dev_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.check().is_err());
    }

    #[test]
    fn dev_split_is_deterministic() {
        let corpus = crate::synth::generate_synthetic_corpus(1, 20, &Default::default());
        let (t1, d1) = split_dev(&corpus, 0.1, 5);
        let (t2, d2) = split_dev(&corpus, 0.1, 5);
        assert_eq!((t1.len(), d1.len()), (18, 2));
        assert_eq!((t1, d1), (t2, d2));
    }

    #[test]
    fn mode_mismatch_is_reported_before_training() {
        let mut corpus = crate::synth::generate_synthetic_corpus(1, 3, &Default::default());
        corpus[1].gold_tree = None;
        let config = TrainConfig {
            mode: Mode::Parser,
            ..TrainConfig::default()
        };
        let e = train(&corpus, &config).unwrap_err();
        assert!(e.to_string().contains("sentence 2"), "{e}");
        assert!(check_annotations(&corpus, Mode::Segmenter, None).is_ok());
    }
}
