//! Times end-to-end parsing per EDU-count bucket to show how decoding cost
//! grows with sentence length.

use rstptr::bench::{benchmark_speed, BenchTarget};
use rstptr::synth::{generate_synthetic_corpus, SynthConfig};
use rstptr::vocab::Vocab;
use rstptr::{Model, ModelConfig, RelationInventory};

fn main() -> rstptr::Result<()> {
    let mut sentences = Vec::new();
    for (i, m) in [5, 10, 20, 40].into_iter().enumerate() {
        let config = SynthConfig {
            min_edus: m,
            max_edus: m,
            ..SynthConfig::default()
        };
        sentences.extend(generate_synthetic_corpus(i as u64, 5, &config));
    }
    let model = Model::new(
        ModelConfig::default(),
        Vocab::build(&sentences, false),
        RelationInventory::default(),
        1,
    )?;
    let report = benchmark_speed(BenchTarget::Loaded(&model), &sentences)?;
    print!("{}", report.to_tsv());
    Ok(())
}
