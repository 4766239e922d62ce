//! Segments and parses raw token sequences with a trained checkpoint, both
//! end to end and with given EDU boundaries.
//!
//! cargo run --release --example train_joint -- joint.ckpt
//! cargo run --release --example analyze -- joint.ckpt

use std::path::Path;

use rstptr::synth::{generate_synthetic_corpus, SynthConfig};
use rstptr::{Model, Segmentation, Task};

fn main() -> rstptr::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "joint.ckpt".into());
    let model = Model::load(Path::new(&path))?;
    let held_out = generate_synthetic_corpus(999, 3, &SynthConfig::default());

    let mut single = Vec::new();
    for s in &held_out {
        println!("tokens: {}", s.tokens.join(" "));
        let (ends, tree) = model.parse_end_to_end(&s.tokens)?;
        single.push((ends.clone(), tree.clone()));
        println!("  predicted EDUs {ends:?} (gold {:?})", s.edu_ends);
        println!("  predicted tree {tree}");
        if let Some(gold) = &s.gold_tree {
            println!("  gold tree      {gold}");
        }
        let (given, trace) = model.parse_traced(&s.tokens, &s.edu_ends)?;
        println!(
            "  with gold EDUs {given}  [{} pointer decisions, {} label calls]",
            trace.pointer_decisions, trace.classifier_calls
        );
    }

    let batch = model.predict(&held_out, Task::Parse(Segmentation::Auto), 2)?;
    let agree = batch
        .iter()
        .zip(&single)
        .all(|(a, (ends, tree))| &a.edu_ends == ends && a.tree.as_ref() == Some(tree));
    println!("batched prediction agrees with one-at-a-time: {agree}");
    Ok(())
}
