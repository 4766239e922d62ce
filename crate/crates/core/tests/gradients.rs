mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstptr::model::Architecture;
use rstptr::nn::{encode_batch, Graph};
use rstptr::parser::{label_logits, parser_losses};
use rstptr::segmenter::segmentation_losses;
use rstptr::training::{batch_objective, Mode};
use rstptr::{Model, ModelConfig, Sentence};
use rstptr_autodiff::{check_gradients, GradCheckOptions, GradCheckReport, ParamStore, Tape, Var};

fn check(model: &Model, mut loss: impl FnMut(&mut Graph) -> Var) -> GradCheckReport {
    let mut store = model.store.clone();
    let arch: Architecture = model.arch.clone();
    let report = check_gradients(
        &mut store,
        |tape: &mut Tape, store: &ParamStore| {
            let mut g = Graph::new(tape, store, &arch);
            loss(&mut g)
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.entries_checked > 0);
    assert!(report.passed(), "{report:?}");
    report
}

fn sentences(seed: u64, sizes: &[usize]) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv = inventory(3);
    sizes
        .iter()
        .map(|&m| random_sentence(&mut rng, m, &inv))
        .collect()
}

fn ids(model: &Model, batch: &[Sentence]) -> Vec<Vec<usize>> {
    batch
        .iter()
        .map(|s| model.vocab().encode(&s.tokens))
        .collect()
}

#[test]
fn encoder_states() {
    let model = tiny_model(1);
    let batch = sentences(1, &[3, 1, 2]);
    let ids = ids(&model, &batch);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let total: usize = batch.iter().map(|s| s.len()).sum();
    let weights: Vec<f64> = (0..total * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    check(&model, |g| {
        let enc = encode_batch(g, &ids).unwrap();
        let w = g.tape.constant(total, 4, weights.clone());
        let p = g.tape.mul(enc.top, w);
        g.tape.sum(p)
    });
}

#[test]
fn segmentation_loss() {
    let model = tiny_model(2);
    let batch = sentences(2, &[3, 1, 4]);
    let ids = ids(&model, &batch);
    let ends: Vec<&[usize]> = batch.iter().map(|s| s.edu_ends.as_slice()).collect();
    check(&model, |g| {
        let enc = encode_batch(g, &ids).unwrap();
        let l = segmentation_losses(g, &enc, &ends).unwrap();
        let all = g.tape.concat_rows(&l);
        g.tape.sum(all)
    });
}

fn parser_check(sizes: &[usize], structure: bool, seed: u64) {
    let model = tiny_model(seed);
    let batch = sentences(seed, sizes);
    let ids = ids(&model, &batch);
    let ends: Vec<&[usize]> = batch.iter().map(|s| s.edu_ends.as_slice()).collect();
    let trees: Vec<_> = batch
        .iter()
        .map(|s| s.gold_tree.as_ref().unwrap())
        .collect();
    check(&model, |g| {
        let enc = encode_batch(g, &ids).unwrap();
        let (s, l) = parser_losses(g, &enc, &ends, &trees).unwrap();
        let all = g.tape.concat_rows(if structure { &s } else { &l });
        g.tape.sum(all)
    });
}

#[test]
fn parser_structure_loss() {
    parser_check(&[5, 3, 2], true, 3);
}

#[test]
fn parser_label_loss() {
    parser_check(&[5, 3, 2], false, 4);
}

#[test]
fn five_edu_parser_losses() {
    parser_check(&[5], true, 5);
    parser_check(&[5], false, 5);
}

#[test]
fn joint_objective_with_dropout_free_batch() {
    let model = tiny_model(6);
    let batch = sentences(6, &[3, 2]);
    let refs: Vec<&Sentence> = batch.iter().collect();
    let mut store = model.store.clone();
    let report = check_gradients(
        &mut store,
        |tape: &mut Tape, store: &ParamStore| {
            batch_objective(tape, store, &model.arch, &refs, Mode::Joint, None)
                .unwrap()
                .total
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{report:?}");
}

fn classifier_check(separate_nuclearity: bool) {
    let config = ModelConfig {
        separate_nuclearity,
        ..tiny_config()
    };
    let model = model_with(config, 3, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 3;
    let d = model.config().decoder_size();
    let left: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let right: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let l = model.labels().len();
    let weights: Vec<f64> = (0..n * l).map(|_| rng.gen_range(-1.0..1.0)).collect();
    check(&model, |g| {
        let a = g.tape.constant(n, d, left.clone());
        let b = g.tape.constant(n, d, right.clone());
        let s = label_logits(g, a, b);
        let w = g.tape.constant(n, l, weights.clone());
        let p = g.tape.mul(s, w);
        g.tape.sum(p)
    });
}

#[test]
fn classifier_scores() {
    classifier_check(false);
}

#[test]
fn classifier_scores_with_nuclearity_head() {
    classifier_check(true);
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[test]
fn classifier_matches_scalar_oracle() {
    let model = tiny_model(8);
    let ids = model.arch.ids.classifier;
    let get = |id| model.store.get(id).data().to_vec();
    let (u1, u2, w, wk, wj, bias) = (
        get(ids.u1),
        get(ids.u2),
        get(ids.w_kj),
        get(ids.w_k),
        get(ids.w_j),
        get(ids.bias),
    );
    let d = model.config().decoder_size();
    let c = model.config().classifier_dim;
    let r = ids.outputs;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ek: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ej: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let proj = |e: &[f64], u: &[f64]| -> Vec<f64> {
        (0..c)
            .map(|a| elu((0..d).map(|i| e[i] * u[i * c + a]).sum()))
            .collect()
    };
    let (ck, cj) = (proj(&ek, &u1), proj(&ej, &u2));
    let mut tape = Tape::new();
    let mut g = Graph::new(&mut tape, &model.store, &model.arch);
    let a = g.tape.constant(1, d, ek.clone());
    let b = g.tape.constant(1, d, ej.clone());
    let s = label_logits(&mut g, a, b);
    let got = tape.value(s).to_vec();
    assert_eq!(got.len(), r);
    for (k, &v) in got.iter().enumerate() {
        let mut want = bias[k];
        for x in 0..c {
            for y in 0..c {
                want += ck[x] * w[x * (c * r) + y * r + k] * cj[y];
            }
            want += ck[x] * wk[x * r + k] + cj[x] * wj[x * r + k];
        }
        assert!((v - want).abs() < 1e-12, "label {k}: {v} vs {want}");
    }
}
