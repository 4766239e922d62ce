//! Reads a bracketed discourse tree, walks its constituents and scores it
//! against a right-branching baseline.

use rstptr::eval::{constituents, parseval};
use rstptr::tree::{parse_tree, validate_tree};
use rstptr::{DiscourseTree, Nuclearity, RelationInventory, RelationLabel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inventory = RelationInventory::default();
    let gold = parse_tree(
        "(NS Condition (SN Attribution [1] [2]) (NN Temporal [3] [4]))",
        &inventory,
    )?;
    println!("gold: {gold}");
    for c in constituents(&gold, None) {
        println!("  {c:?}");
    }
    assert!(validate_tree(&gold, 4).is_empty());

    let baseline =
        DiscourseTree::right_branching(4, &RelationLabel::new("Elaboration", Nuclearity::NS));
    println!("baseline: {baseline}");
    let report = parseval(&[baseline], &[gold])?;
    for (name, prf) in report.rows() {
        println!(
            "{name:>12} F1 {:.4} ({}/{})",
            prf.f1(),
            prf.matched,
            prf.gold
        );
    }

    for bad in [
        "(NS Condition [1] [3])",
        "(NN Joint [1] [2] [3])",
        "(NS Frobnicate [1] [2])",
    ] {
        println!("{bad}: {}", parse_tree(bad, &inventory).unwrap_err());
    }
    Ok(())
}
