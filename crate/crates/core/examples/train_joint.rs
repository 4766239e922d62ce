//! Trains a small joint segmenter-parser on synthetic data and saves it.
//!
//! cargo run --release --example train_joint -- [out.ckpt]

use rstptr::synth::{generate_synthetic_corpus, SynthConfig};
use rstptr::training::{train_with_progress, Mode, TrainConfig};

fn main() -> rstptr::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "joint.ckpt".into());
    let corpus = generate_synthetic_corpus(1, 1000, &SynthConfig::default());
    let config = TrainConfig {
        mode: Mode::Joint,
        epochs: 20,
        batch_size: 20,
        learning_rate: 2e-3,
        ..TrainConfig::default()
    };
    println!("{}", rstptr::training::TrainLog::HEADER);
    let outcome = train_with_progress(&corpus, &config, |r| {
        println!(
            "{}\tseg {:.3}\tstruct {:.3}\tlabel {:.3}\tdev seg F1 {:.3}\tdev rel F1 {:.3}\t{:.1}s",
            r.epoch,
            r.segmentation_loss,
            r.structure_loss,
            r.label_loss,
            r.dev_segmentation_f1,
            r.dev_relation_f1,
            r.seconds
        );
    })?;
    println!(
        "best epoch {} of {}; {} parameters",
        outcome.log.best_epoch,
        outcome.log.epochs.len(),
        outcome.model.parameter_count()
    );
    outcome.model.save(std::path::Path::new(&out))?;
    println!("saved {out}");
    Ok(())
}
