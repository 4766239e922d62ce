//! Finite-difference check of the full joint objective on a small model.

use rstptr::synth::{generate_synthetic_corpus, SynthConfig};
use rstptr::training::{batch_objective, Mode};
use rstptr::vocab::Vocab;
use rstptr::{Model, ModelConfig, RelationInventory, Sentence};
use rstptr_autodiff::{check_gradients, GradCheckOptions, ParamStore, Tape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inventory =
        RelationInventory::from_names(&["Elaboration", "Attribution", "Condition", "Joint"])?;
    let synth = SynthConfig {
        min_edus: 2,
        max_edus: 4,
        inventory: inventory.clone(),
        ..SynthConfig::default()
    };
    let batch = generate_synthetic_corpus(3, 2, &synth);
    let config = ModelConfig {
        embedding_dim: 4,
        hidden_size: 3,
        classifier_dim: 3,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let vocab = Vocab::build(&batch, false);
    let model = Model::new(config, vocab, inventory, 3)?;
    let refs: Vec<&Sentence> = batch.iter().collect();

    for mode in [Mode::Segmenter, Mode::Parser, Mode::Joint] {
        let mut store = model.store.clone();
        let report = check_gradients(
            &mut store,
            |tape: &mut Tape, store: &ParamStore| {
                batch_objective(tape, store, &model.arch, &refs, mode, None)
                    .unwrap()
                    .total
            },
            // Roundoff on a summed batch loss is near 1e-10.
            &GradCheckOptions {
                step: 1e-4,
                max_entries_per_param: Some(20),
                ..GradCheckOptions::default()
            },
        )?;
        println!(
            "{:>9}: {} entries, max relative error {:.2e} ({})",
            mode.as_str(),
            report.entries_checked,
            report.max_relative_error,
            if report.passed() { "ok" } else { "FAILED" }
        );
        if let Some(w) = &report.worst {
            println!(
                "{:>11}worst {}[{}]: {:.6e} vs {:.6e}",
                "", w.param, w.index, w.analytic, w.numeric
            );
        }
    }
    Ok(())
}
