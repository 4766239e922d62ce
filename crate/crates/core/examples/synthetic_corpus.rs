//! Generates a synthetic corpus, writes it in the corpus text format and
//! reports the label distribution.
//!
//! cargo run --example synthetic_corpus -- [count] [out.txt]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rstptr::corpus::{format_sentence, write_corpus};
use rstptr::synth::{generate_synthetic_corpus, SynthConfig};

fn main() -> rstptr::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let out = args.next().map(PathBuf::from);

    let config = SynthConfig::default();
    let corpus = generate_synthetic_corpus(42, count, &config);

    let mut first = String::new();
    format_sentence(&corpus[0], &mut first);
    println!("{first}");

    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut edus = 0;
    for s in &corpus {
        edus += s.edu_count();
        if let Some(tree) = &s.gold_tree {
            for node in tree.internal_nodes() {
                *seen.entry(node.label.to_string()).or_default() += 1;
            }
        }
    }
    println!(
        "{count} sentences, {:.2} EDUs on average",
        edus as f64 / count as f64
    );
    let total: usize = seen.values().sum();
    let mut rows: Vec<_> = seen.into_iter().collect();
    rows.sort_by_key(|r| std::cmp::Reverse(r.1));
    for (label, n) in rows.iter().take(10) {
        println!("{label:>24} {:.3}", *n as f64 / total as f64);
    }

    if let Some(path) = out {
        write_corpus(&path, &corpus)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
