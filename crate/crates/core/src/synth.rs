//! Synthetic treebank generator.
//!
//! Each sentence is a random binary tree over 1..=m EDUs. Surface tokens make
//! the structure recoverable:
//! - every EDU but the last ends with `|dN|`, where `N` is the depth of the
//!   tree node splitting right after it; the last EDU ends with `|.|`;
//! - EDU `q >= 2` starts with `<Rel-NUC>`, the label of the node splitting
//!   between EDUs `q - 1` and `q` (the first EDU of that node's right child);
//! - remaining positions are filler tokens `w000`, `w001`, ...

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Sentence;
use crate::relations::{RelationInventory, RelationLabel};
use crate::tree::DiscourseTree;

pub const FINAL_BOUNDARY: &str = "|.|";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub min_edus: usize,
    pub max_edus: usize,
    /// At least 2, leaving room for the cue and the boundary token.
    pub min_edu_tokens: usize,
    pub max_edu_tokens: usize,
    pub filler_vocab: usize,
    pub inventory: RelationInventory,
    /// Relative weights for NS, SN, NN.
    pub nuclearity_weights: [f64; 3],
    /// Relative weight per inventory relation; `None` is uniform.
    pub relation_weights: Option<Vec<f64>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            min_edus: 1,
            max_edus: 10,
            min_edu_tokens: 2,
            max_edu_tokens: 8,
            filler_vocab: 200,
            inventory: RelationInventory::default(),
            nuclearity_weights: [0.5, 0.25, 0.25],
            relation_weights: None,
        }
    }
}

impl SynthConfig {
    /// Valid labels with their normalized sampling probabilities.
    pub fn label_distribution(&self) -> Vec<(RelationLabel, f64)> {
        let labels = self.inventory.labels();
        let weights: Vec<f64> = labels
            .iter()
            .map(|l| {
                let r = self
                    .inventory
                    .index_of(&l.relation)
                    .expect("inventory label");
                let rw = self.relation_weights.as_ref().map_or(1.0, |w| w[r]);
                rw * self.nuclearity_weights[l.nuclearity.index()]
            })
            .collect();
        let total: f64 = weights.iter().sum();
        labels
            .into_iter()
            .zip(weights.into_iter().map(|w| w / total))
            .collect()
    }

    fn check(&self) {
        assert!(
            1 <= self.min_edus && self.min_edus <= self.max_edus,
            "EDU count range"
        );
        assert!(
            2 <= self.min_edu_tokens && self.min_edu_tokens <= self.max_edu_tokens,
            "EDU length range"
        );
        assert!(self.filler_vocab > 0, "filler vocabulary");
        if let Some(w) = &self.relation_weights {
            assert_eq!(w.len(), self.inventory.len(), "one weight per relation");
        }
    }
}

pub fn boundary_token(depth: usize) -> String {
    format!("|d{depth}|")
}

pub fn cue_token(label: &RelationLabel) -> String {
    format!("<{label}>")
}

pub fn filler_token(i: usize) -> String {
    format!("w{i:03}")
}

fn random_tree<R: Rng>(
    rng: &mut R,
    start: usize,
    end: usize,
    labels: &[RelationLabel],
    sampler: &WeightedIndex<f64>,
) -> DiscourseTree {
    if start == end {
        return DiscourseTree::Leaf(start);
    }
    let split = rng.gen_range(start..end);
    let label = labels[sampler.sample(rng)].clone();
    let left = random_tree(rng, start, split, labels, sampler);
    let right = random_tree(rng, split + 1, end, labels, sampler);
    DiscourseTree::Node {
        label,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// For each gap `k` (between EDU k and k+1, 1-based) the depth and label of
/// the node that splits there.
fn gap_info(tree: &DiscourseTree, m: usize) -> Vec<(usize, RelationLabel)> {
    fn walk(t: &DiscourseTree, depth: usize, out: &mut Vec<Option<(usize, RelationLabel)>>) {
        if let DiscourseTree::Node { label, left, right } = t {
            out[left.last_leaf()] = Some((depth, label.clone()));
            walk(left, depth + 1, out);
            walk(right, depth + 1, out);
        }
    }
    let mut out = vec![None; m];
    walk(tree, 0, &mut out);
    out.into_iter()
        .skip(1)
        .map(|g| g.expect("every gap is split once"))
        .collect()
}

/// Deterministic corpus of `count` sentences.
pub fn generate_synthetic_corpus(seed: u64, count: usize, config: &SynthConfig) -> Vec<Sentence> {
    config.check();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = config.label_distribution();
    let labels: Vec<RelationLabel> = dist.iter().map(|(l, _)| l.clone()).collect();
    let sampler = WeightedIndex::new(dist.iter().map(|(_, w)| *w)).expect("positive label weights");
    (0..count)
        .map(|_| {
            let m = rng.gen_range(config.min_edus..=config.max_edus);
            let tree = random_tree(&mut rng, 1, m, &labels, &sampler);
            let gaps = gap_info(&tree, m);
            let mut tokens = Vec::new();
            let mut edu_ends = Vec::with_capacity(m);
            for q in 1..=m {
                let len = rng.gen_range(config.min_edu_tokens..=config.max_edu_tokens);
                let mut edu = Vec::with_capacity(len);
                if q >= 2 {
                    edu.push(cue_token(&gaps[q - 2].1));
                }
                while edu.len() < len - 1 {
                    edu.push(filler_token(rng.gen_range(0..config.filler_vocab)));
                }
                edu.push(if q < m {
                    boundary_token(gaps[q - 1].0)
                } else {
                    FINAL_BOUNDARY.to_string()
                });
                tokens.extend(edu);
                edu_ends.push(tokens.len());
            }
            Sentence {
                tokens,
                edu_ends,
                gold_tree: Some(tree),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relations::Nuclearity;
    use crate::tree::validate_tree;
    use std::collections::HashMap;

    #[test]
    fn deterministic_per_seed() {
        let c = SynthConfig::default();
        assert_eq!(
            generate_synthetic_corpus(7, 1, &c),
            generate_synthetic_corpus(7, 1, &c)
        );
        assert_ne!(
            generate_synthetic_corpus(7, 5, &c),
            generate_synthetic_corpus(8, 5, &c)
        );
    }

    #[test]
    fn every_sentence_is_valid() {
        let c = SynthConfig::default();
        for s in generate_synthetic_corpus(1, 1000, &c) {
            s.check().unwrap();
            let m = s.edu_count();
            assert!((1..=10).contains(&m));
            for k in 1..=m {
                assert!((2..=8).contains(&s.edu_tokens(k).len()));
            }
            assert!(validate_tree(s.gold_tree.as_ref().unwrap(), m).is_empty());
        }
    }

    #[test]
    fn cues_mark_labels_and_boundaries() {
        let c = SynthConfig::default();
        for s in generate_synthetic_corpus(3, 50, &c) {
            let tree = s.gold_tree.as_ref().unwrap();
            for node in tree.internal_nodes() {
                assert_eq!(s.edu_tokens(node.split + 1)[0], cue_token(node.label));
                assert!(s.tokens[s.edu_ends[node.split - 1] - 1].starts_with("|d"));
            }
            assert_eq!(s.tokens.last().unwrap(), FINAL_BOUNDARY);
        }
    }

    #[test]
    fn label_frequencies_follow_weights() {
        let c = SynthConfig::default();
        let mut counts: HashMap<RelationLabel, usize> = HashMap::new();
        let mut total = 0usize;
        for s in generate_synthetic_corpus(11, 10_000, &c) {
            for node in s.gold_tree.as_ref().unwrap().internal_nodes() {
                *counts.entry(node.label.clone()).or_default() += 1;
                total += 1;
            }
        }
        // frequency oracle: expected share is relation share times nuclearity share
        for rel in c.inventory.names() {
            for n in Nuclearity::ALL {
                let expect = (1.0 / 18.0) * c.nuclearity_weights[n.index()];
                let got = counts
                    .get(&RelationLabel::new(rel, n))
                    .copied()
                    .unwrap_or(0) as f64
                    / total as f64;
                assert!((got - expect).abs() < 0.02, "{rel}-{n}: {got} vs {expect}");
            }
        }
    }
}
