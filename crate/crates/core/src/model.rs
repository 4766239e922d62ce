//! Model configuration, parameter layout, initialization and checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rstptr_autodiff::{decode_checkpoint, encode_checkpoint, ParamId, ParamStore, Tensor};

use crate::error::{Error, Result};
use crate::relations::{LabelSet, Nuclearity, RelationInventory, RelationLabel};
use crate::vocab::{StaticEmbeddings, Vocab};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    /// Per-direction encoder width; decoders run at twice this size so
    /// their states can be dotted with encoder outputs.
    pub hidden_size: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    /// Width `d` of the classifier's ELU features.
    pub classifier_dim: usize,
    pub dropout: f64,
    pub lowercase: bool,
    /// Separate relation and nuclearity heads whose log-scores add up,
    /// instead of one joint head.
    pub separate_nuclearity: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embedding_dim: 64,
            hidden_size: 64,
            encoder_layers: 6,
            decoder_layers: 6,
            classifier_dim: 64,
            dropout: 0.2,
            lowercase: false,
            separate_nuclearity: false,
        }
    }
}

impl ModelConfig {
    pub fn decoder_size(&self) -> usize {
        2 * self.hidden_size
    }

    pub fn check(&self) -> Result<()> {
        let sizes = [
            ("embedding_dim", self.embedding_dim),
            ("hidden_size", self.hidden_size),
            ("encoder_layers", self.encoder_layers),
            ("decoder_layers", self.decoder_layers),
            ("classifier_dim", self.classifier_dim),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} not in [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    fn to_meta(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("embedding_dim", self.embedding_dim as f64),
            ("hidden_size", self.hidden_size as f64),
            ("encoder_layers", self.encoder_layers as f64),
            ("decoder_layers", self.decoder_layers as f64),
            ("classifier_dim", self.classifier_dim as f64),
            ("dropout", self.dropout),
            ("lowercase", self.lowercase as u8 as f64),
            ("separate_nuclearity", self.separate_nuclearity as u8 as f64),
        ]
    }

    fn from_meta(meta: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str| {
            meta.get(k)
                .copied()
                .ok_or_else(|| Error::Model(format!("checkpoint lacks meta/{k}")))
        };
        let c = ModelConfig {
            embedding_dim: get("embedding_dim")? as usize,
            hidden_size: get("hidden_size")? as usize,
            encoder_layers: get("encoder_layers")? as usize,
            decoder_layers: get("decoder_layers")? as usize,
            classifier_dim: get("classifier_dim")? as usize,
            dropout: get("dropout")?,
            lowercase: get("lowercase")? != 0.0,
            separate_nuclearity: get("separate_nuclearity")? != 0.0,
        };
        c.check()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruIds {
    pub w_input: ParamId,
    pub b_input: ParamId,
    pub w_hidden: ParamId,
    pub b_hidden: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderIds {
    pub layers: Vec<GruIds>,
    /// Linear maps from encoder final forward states to initial states.
    pub init_w: Vec<ParamId>,
    pub init_b: Vec<ParamId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiaffineIds {
    pub u1: ParamId,
    pub u2: ParamId,
    /// `d x (d * R)`; column `b * R + r` holds `W[., b, r]`.
    pub w_kj: ParamId,
    pub w_k: ParamId,
    pub w_j: ParamId,
    pub bias: ParamId,
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamIds {
    pub embedding: ParamId,
    /// `[forward, backward]` per layer.
    pub encoder: Vec<[GruIds; 2]>,
    pub segmenter: DecoderIds,
    pub parser: DecoderIds,
    pub null_parent: ParamId,
    pub null_sibling: ParamId,
    pub classifier: BiaffineIds,
    pub nuclearity: Option<BiaffineIds>,
}

/// Everything but the parameter values: sizes, vocabulary, label space and
/// where each parameter lives in the store.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub labels: LabelSet,
    pub ids: ParamIds,
    pub static_embeddings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub store: ParamStore,
}

struct Init<'a> {
    store: ParamStore,
    rng: &'a mut ChaCha8Rng,
}

impl Init<'_> {
    fn uniform(&mut self, name: String, rows: usize, cols: usize, fan_in: usize) -> ParamId {
        let bound = (1.0 / fan_in as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| self.rng.gen_range(-bound..=bound))
            .collect();
        self.store
            .insert(name, Tensor::new(vec![rows, cols], data).expect("dims"))
            .expect("unique parameter name")
    }

    fn gru(&mut self, prefix: &str, input: usize, hidden: usize) -> GruIds {
        GruIds {
            w_input: self.uniform(format!("{prefix}/w_input"), input, 3 * hidden, input),
            b_input: self.uniform(format!("{prefix}/b_input"), 1, 3 * hidden, input),
            w_hidden: self.uniform(format!("{prefix}/w_hidden"), hidden, 3 * hidden, hidden),
            b_hidden: self.uniform(format!("{prefix}/b_hidden"), 1, 3 * hidden, hidden),
        }
    }

    fn decoder(&mut self, prefix: &str, c: &ModelConfig) -> DecoderIds {
        let dsz = c.decoder_size();
        let mut d = DecoderIds {
            layers: Vec::new(),
            init_w: Vec::new(),
            init_b: Vec::new(),
        };
        for l in 0..c.decoder_layers {
            d.layers.push(self.gru(&format!("{prefix}/l{l}"), dsz, dsz));
            let h = c.hidden_size;
            d.init_w
                .push(self.uniform(format!("{prefix}/init{l}/w"), h, dsz, h));
            d.init_b
                .push(self.uniform(format!("{prefix}/init{l}/b"), 1, dsz, h));
        }
        d
    }

    fn biaffine(&mut self, prefix: &str, input: usize, d: usize, r: usize) -> BiaffineIds {
        BiaffineIds {
            u1: self.uniform(format!("{prefix}/u1"), input, d, input),
            u2: self.uniform(format!("{prefix}/u2"), input, d, input),
            w_kj: self.uniform(format!("{prefix}/w_kj"), d, d * r, d),
            w_k: self.uniform(format!("{prefix}/w_k"), d, r, d),
            w_j: self.uniform(format!("{prefix}/w_j"), d, r, d),
            bias: self.uniform(format!("{prefix}/bias"), 1, r, d),
            outputs: r,
        }
    }
}

/// Fixed indicator matrices mapping (relation scores, nuclearity scores) to
/// joint label scores for the two-head variant: `R x L` and `3 x L`.
pub(crate) fn head_maps(labels: &LabelSet) -> (Vec<f64>, Vec<f64>) {
    let l = labels.len();
    let r = labels.relation_count();
    let mut rel = vec![0.0; r * l];
    let mut nuc = vec![0.0; 3 * l];
    for (c, label) in labels.labels().iter().enumerate() {
        let ri = labels
            .inventory()
            .index_of(&label.relation)
            .expect("label relation");
        rel[ri * l + c] = 1.0;
        nuc[label.nuclearity.index() * l + c] = 1.0;
    }
    (rel, nuc)
}

impl Model {
    /// Randomly initialized model; each weight is uniform in
    /// `[-sqrt(1/fan_in), sqrt(1/fan_in)]`.
    pub fn new(
        config: ModelConfig,
        vocab: Vocab,
        inventory: RelationInventory,
        seed: u64,
    ) -> Result<Model> {
        Model::build(config, vocab, inventory, None, seed)
    }

    /// Model whose embedding table comes from a static file and stays frozen.
    pub fn with_static_embeddings(
        config: ModelConfig,
        embeddings: &StaticEmbeddings,
        inventory: RelationInventory,
        seed: u64,
    ) -> Result<Model> {
        if embeddings.dim != config.embedding_dim {
            return Err(Error::Config(format!(
                "embedding file has dimension {}, config expects {}",
                embeddings.dim, config.embedding_dim
            )));
        }
        let (vocab, matrix) = embeddings.table(config.lowercase);
        Model::build(config, vocab, inventory, Some(matrix), seed)
    }

    fn build(
        config: ModelConfig,
        vocab: Vocab,
        inventory: RelationInventory,
        static_matrix: Option<Vec<f64>>,
        seed: u64,
    ) -> Result<Model> {
        config.check()?;
        let labels = LabelSet::new(inventory);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = Init {
            store: ParamStore::new(),
            rng: &mut rng,
        };
        let (e, h) = (config.embedding_dim, config.hidden_size);
        let embedding = init.uniform("embedding".into(), vocab.len(), e, 1);
        let static_embeddings = static_matrix.is_some();
        if let Some(m) = static_matrix {
            let t = init.store.get_mut(embedding);
            t.data_mut().copy_from_slice(&m);
            t.requires_grad = false;
        }
        let encoder = (0..config.encoder_layers)
            .map(|l| {
                let input = if l == 0 { e } else { 2 * h };
                [
                    init.gru(&format!("encoder/l{l}/fwd"), input, h),
                    init.gru(&format!("encoder/l{l}/bwd"), input, h),
                ]
            })
            .collect();
        let segmenter = init.decoder("segmenter", &config);
        let parser = init.decoder("parser", &config);
        let dsz = config.decoder_size();
        let null_parent = init.uniform("parser/null_parent".into(), 1, dsz, 1);
        let null_sibling = init.uniform("parser/null_sibling".into(), 1, dsz, 1);
        let d = config.classifier_dim;
        let (classifier, nuclearity) = if config.separate_nuclearity {
            (
                init.biaffine("classifier", dsz, d, labels.relation_count()),
                Some(init.biaffine("nuclearity", dsz, d, Nuclearity::ALL.len())),
            )
        } else {
            (init.biaffine("classifier", dsz, d, labels.len()), None)
        };
        let ids = ParamIds {
            embedding,
            encoder,
            segmenter,
            parser,
            null_parent,
            null_sibling,
            classifier,
            nuclearity,
        };
        Ok(Model {
            store: init.store,
            arch: Architecture {
                config,
                vocab,
                labels,
                ids,
                static_embeddings,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.arch.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.arch.vocab
    }

    pub fn labels(&self) -> &LabelSet {
        &self.arch.labels
    }

    pub fn parameter_count(&self) -> usize {
        self.store.iter().map(|(_, _, t)| t.len()).sum()
    }

    fn checkpoint_entries(&self) -> Vec<(String, Tensor)> {
        let mut out: Vec<(String, Tensor)> = self
            .config()
            .to_meta()
            .into_iter()
            .map(|(k, v)| (format!("meta/{k}"), Tensor::scalar(v)))
            .collect();
        out.push((
            "meta/static_embeddings".into(),
            Tensor::scalar(self.arch.static_embeddings as u8 as f64),
        ));
        let inv = self.labels().inventory();
        for (i, name) in inv.names().enumerate() {
            out.push((format!("relation/{name}"), Tensor::scalar(i as f64)));
        }
        for (i, l) in self.labels().labels().iter().enumerate() {
            out.push((
                format!("label/{}:{}", l.relation, l.nuclearity),
                Tensor::scalar(i as f64),
            ));
        }
        for (i, tok) in self.vocab().tokens().iter().enumerate() {
            out.push((format!("vocab/{tok}"), Tensor::scalar(i as f64)));
        }
        for (_, name, t) in self.store.iter() {
            out.push((name.to_string(), t.clone()));
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_checkpoint(&self.checkpoint_entries())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let entries = decode_checkpoint(bytes)?;
        let mut meta = BTreeMap::new();
        let mut relations: Vec<(usize, String)> = Vec::new();
        let mut labels: Vec<(usize, RelationLabel)> = Vec::new();
        let mut vocab: Vec<(usize, String)> = Vec::new();
        let mut params = Vec::new();
        for (name, t) in entries {
            let idx = || t.data().first().copied().unwrap_or(-1.0) as usize;
            if let Some(k) = name.strip_prefix("meta/") {
                meta.insert(k.to_string(), t.data()[0]);
            } else if let Some(r) = name.strip_prefix("relation/") {
                relations.push((idx(), r.to_string()));
            } else if let Some(l) = name.strip_prefix("label/") {
                let (rel, nuc) = l
                    .rsplit_once(':')
                    .ok_or_else(|| Error::Model(format!("bad label entry `{l}`")))?;
                let nuc: Nuclearity = nuc
                    .parse()
                    .map_err(|_| Error::Model(format!("bad nuclearity in `{l}`")))?;
                labels.push((idx(), RelationLabel::new(rel, nuc)));
            } else if let Some(tok) = name.strip_prefix("vocab/") {
                vocab.push((idx(), tok.to_string()));
            } else {
                params.push((name, t));
            }
        }
        let config = ModelConfig::from_meta(&meta)?;
        relations.sort();
        labels.sort_by_key(|(i, _)| *i);
        vocab.sort();
        let mut inv_text = String::new();
        for (_, r) in &relations {
            inv_text.push_str(r);
            let allowed: Vec<_> = labels
                .iter()
                .filter(|(_, l)| &l.relation == r)
                .map(|(_, l)| l.nuclearity.as_str())
                .collect();
            if allowed.is_empty() {
                return Err(Error::Model(format!("relation `{r}` has no labels")));
            }
            inv_text.push(' ');
            inv_text.push_str(&allowed.join(" "));
            inv_text.push('\n');
        }
        let inventory = RelationInventory::parse(&inv_text)?;
        let vocab_tokens: Vec<String> = vocab.into_iter().skip(1).map(|(_, t)| t).collect();
        let vocab = Vocab::from_tokens(vocab_tokens, config.lowercase);
        let mut model = Model::new(config, vocab, inventory, 0)?;
        let stored: Vec<_> = model.labels().labels().to_vec();
        if stored != labels.into_iter().map(|(_, l)| l).collect::<Vec<_>>() {
            return Err(Error::Model(
                "label table does not match its inventory".into(),
            ));
        }
        if params.len() != model.store.len() {
            return Err(Error::Model(format!(
                "checkpoint has {} parameters, configuration expects {}",
                params.len(),
                model.store.len()
            )));
        }
        for (name, t) in params {
            let id = model
                .store
                .id(&name)
                .map_err(|_| Error::Model(format!("unexpected parameter `{name}`")))?;
            let slot = model.store.get_mut(id);
            if slot.shape() != t.shape() {
                return Err(Error::Model(format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            slot.data_mut().copy_from_slice(t.data());
        }
        if meta.get("static_embeddings").copied().unwrap_or(0.0) != 0.0 {
            model.arch.static_embeddings = true;
            model.store.get_mut(model.arch.ids.embedding).requires_grad = false;
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Model> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Model::from_bytes(&bytes).map_err(|e| match e {
            Error::Autodiff(inner) => Error::Model(format!("{}: {inner}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_config() -> ModelConfig {
        ModelConfig {
            embedding_dim: 3,
            hidden_size: 2,
            encoder_layers: 2,
            decoder_layers: 2,
            classifier_dim: 2,
            dropout: 0.0,
            lowercase: false,
            separate_nuclearity: false,
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let vocab = Vocab::from_tokens(["a", "b", "vocab/odd:name"], false);
        let inv = RelationInventory::parse("Joint NN\nElaboration NS SN\n").unwrap();
        let m = Model::new(tiny_config(), vocab, inv, 5).unwrap();
        let bytes = m.to_bytes();
        let back = Model::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
        assert!(Model::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn default_label_space_and_init_bounds() {
        let vocab = Vocab::from_tokens(["x"], false);
        let m = Model::new(
            ModelConfig::default(),
            vocab,
            RelationInventory::default(),
            1,
        )
        .unwrap();
        assert_eq!(m.arch.ids.classifier.outputs, 54);
        let w = m.store.get(m.arch.ids.encoder[1][0].w_input);
        assert_eq!(w.shape(), &[128, 192]);
        let bound = (1.0f64 / 128.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn initialization_depends_only_on_seed() {
        let v = Vocab::from_tokens(["x"], false);
        let a = Model::new(tiny_config(), v.clone(), RelationInventory::default(), 3).unwrap();
        let b = Model::new(tiny_config(), v.clone(), RelationInventory::default(), 3).unwrap();
        let c = Model::new(tiny_config(), v, RelationInventory::default(), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
