#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rstptr::vocab::Vocab;
use rstptr::{
    DiscourseTree, Model, ModelConfig, Nuclearity, RelationInventory, RelationLabel, Sentence,
};

pub const WORDS: usize = 12;

pub fn inventory(n: usize) -> RelationInventory {
    let all = RelationInventory::default();
    let names: Vec<&str> = all.names().take(n).collect();
    RelationInventory::from_names(&names).unwrap()
}

pub fn tiny_config() -> ModelConfig {
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

pub fn word(i: usize) -> String {
    format!("t{i}")
}

pub fn tiny_vocab() -> Vocab {
    Vocab::from_tokens((0..WORDS).map(word), false)
}

pub fn model_with(config: ModelConfig, relations: usize, seed: u64) -> Model {
    Model::new(config, tiny_vocab(), inventory(relations), seed).unwrap()
}

pub fn tiny_model(seed: u64) -> Model {
    model_with(tiny_config(), 3, seed)
}

pub fn random_label(rng: &mut ChaCha8Rng, inv: &RelationInventory) -> RelationLabel {
    let rel = inv.name(rng.gen_range(0..inv.len()));
    RelationLabel::new(rel, Nuclearity::ALL[rng.gen_range(0..3)])
}

/// Random binary tree over leaves `lo..=hi` with uniformly drawn splits.
pub fn random_tree(
    rng: &mut ChaCha8Rng,
    lo: usize,
    hi: usize,
    inv: &RelationInventory,
) -> DiscourseTree {
    if lo == hi {
        return DiscourseTree::leaf(lo);
    }
    let k = rng.gen_range(lo..hi);
    let label = random_label(rng, inv);
    let left = random_tree(rng, lo, k, inv);
    let right = random_tree(rng, k + 1, hi, inv);
    DiscourseTree::node(label.nuclearity, &label.relation, left, right)
}

/// `m` EDUs of 1 to 3 vocabulary tokens with a random gold tree.
pub fn random_sentence(rng: &mut ChaCha8Rng, m: usize, inv: &RelationInventory) -> Sentence {
    let mut tokens = Vec::new();
    let mut ends = Vec::new();
    for _ in 0..m {
        for _ in 0..rng.gen_range(1..=3) {
            tokens.push(word(rng.gen_range(0..WORDS)));
        }
        ends.push(tokens.len());
    }
    let tree = random_tree(rng, 1, m, inv);
    Sentence::new(tokens, ends, Some(tree)).unwrap()
}

/// Label of the node spanning exactly `i..=j`, found by descending from the
/// root.
pub fn node_at(tree: &DiscourseTree, i: usize, j: usize) -> Option<RelationLabel> {
    match tree {
        DiscourseTree::Leaf(_) => None,
        DiscourseTree::Node { label, left, right } => {
            let (lo, hi) = (tree.first_leaf(), tree.last_leaf());
            if (lo, hi) == (i, j) {
                Some(label.clone())
            } else if j <= left.last_leaf() {
                node_at(left, i, j)
            } else if i >= right.first_leaf() {
                node_at(right, i, j)
            } else {
                None
            }
        }
    }
}

/// Matched counts (span, nuclearity, relation) from every `(i, j)` pair.
pub fn brute_force(pred: &[DiscourseTree], gold: &[DiscourseTree]) -> [usize; 3] {
    let mut counts = [0; 3];
    for (p, g) in pred.iter().zip(gold) {
        let m = g.leaf_count();
        for i in 1..=m {
            for j in i + 1..=m {
                if let (Some(a), Some(b)) = (node_at(p, i, j), node_at(g, i, j)) {
                    counts[0] += 1;
                    if a.nuclearity == b.nuclearity {
                        counts[1] += 1;
                        if a.relation == b.relation {
                            counts[2] += 1;
                        }
                    }
                }
            }
        }
    }
    counts
}
