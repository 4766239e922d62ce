mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rstptr::corpus::{format_corpus, parse_corpus, read_corpus, write_corpus, CorpusOptions};
use rstptr::synth::generate_synthetic_corpus;
use rstptr::tree::{parse_tree, TreeError};
use rstptr::{Error, Model, RelationInventory};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn trees_round_trip(seed in any::<u64>(), m in 1usize..=30) {
        let inv = RelationInventory::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, 1, m, &inv);
        let text = tree.to_text();
        let back = parse_tree(&text, &inv).unwrap();
        prop_assert_eq!(&back, &tree);
        prop_assert_eq!(back.to_text(), text);
    }
}

#[test]
fn condition_tree_text() {
    let inv = RelationInventory::default();
    let text = "(NS Condition (SN Attribution [1] [2]) (NN Temporal [3] [4]))";
    let t = parse_tree(text, &inv).unwrap();
    assert_eq!(t.to_string(), text);
    assert_eq!(t.leaf_count(), 4);
}

#[test]
fn malformed_trees_report_distinct_errors() {
    let inv = RelationInventory::default();
    let cases: [(&str, fn(&TreeError) -> bool); 7] = [
        ("(NS Condition [1] [3])", |e| {
            matches!(e, TreeError::NonContiguous { .. })
        }),
        ("(NS Frobnicate [1] [2])", |e| {
            matches!(e, TreeError::UnknownRelation { .. })
        }),
        ("(NN Joint [1] [2] [3])", |e| {
            matches!(e, TreeError::NonBinary { children: 3, .. })
        }),
        ("(NN Joint [1] [2]", |e| {
            matches!(e, TreeError::Syntax { .. })
        }),
        ("(XY Joint [1] [2])", |e| {
            matches!(e, TreeError::Syntax { .. })
        }),
        ("(NN Joint [1] (SN Joint [2]))", |e| {
            matches!(e, TreeError::NonBinary { children: 1, .. })
        }),
        ("(NN Joint [1] [2]) [3]", |e| {
            matches!(e, TreeError::Syntax { .. })
        }),
    ];
    for (text, ok) in cases {
        let e = parse_tree(text, &inv).unwrap_err();
        assert!(ok(&e), "{text:?} gave {e:?}");
    }
}

#[test]
fn corpus_round_trip_through_file() {
    let corpus = generate_synthetic_corpus(3, 50, &Default::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    write_corpus(&path, &corpus).unwrap();
    let back = read_corpus(&path, &CorpusOptions::default()).unwrap();
    assert_eq!(back, corpus);
    assert_eq!(
        format_corpus(&back),
        std::fs::read_to_string(&path).unwrap()
    );
}

#[test]
fn corpus_errors_carry_line_numbers() {
    let opts = CorpusOptions::default();
    let good = "TOKENS\ta\tb\tc\nEDUS\t1 3\nTREE\t(NS Joint [1] [2])\n\n";
    assert_eq!(parse_corpus(good, "x", &opts).unwrap().len(), 1);
    let cases = [
        ("TOKENS\ta\tb\nEDUS\t1\n", 2),
        ("TOKENS\ta\tb\nEDUS\t2 1\n", 2),
        ("TOKENS\ta\tb\nEDUS\t1 2\nTREE\t(NS Joint [1] [2] [3])\n", 3),
        ("TOKENS\ta\tb\nEDUS\t1 2\nTREE\t[1]\n", 3),
        (&format!("{good}TOKENS\ta\nTREE\t[1]\n"), 6),
        (&format!("{good}EDUS\t1\n"), 5),
        ("TOKENS\ta\tb\nEDUS\t1 x\n", 2),
    ];
    for (text, line) in cases {
        match parse_corpus(text, "in.txt", &opts) {
            Err(Error::Corpus { path, line: l, .. }) => {
                assert_eq!((path.as_str(), l), ("in.txt", line), "{text:?}");
            }
            other => panic!("{text:?}: {other:?}"),
        }
    }
    let missing = read_corpus(std::path::Path::new("/nonexistent/c.txt"), &opts).unwrap_err();
    assert!(missing.to_string().contains("/nonexistent/c.txt"));
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let model = tiny_model(12);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    model.save(&path).unwrap();
    let back = Model::load(&path).unwrap();
    assert_eq!(back.to_bytes(), model.to_bytes());
    assert_eq!(back.arch, model.arch);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = random_sentence(&mut rng, 6, &inventory(3));
    assert_eq!(
        back.parse(&s.tokens, &s.edu_ends).unwrap(),
        model.parse(&s.tokens, &s.edu_ends).unwrap()
    );
    let mut bytes = model.to_bytes();
    bytes.truncate(bytes.len() / 2);
    assert!(Model::from_bytes(&bytes).is_err());
}
