//! Scores predicted trees against gold with micro-averaged constituent F1,
//! prints a relation confusion matrix and compares two systems with a paired
//! t-test.

use rstptr::eval::{
    confusion_matrix, paired_t_test, parseval, report_line, segmentation_prf, REPORT_HEADER,
};
use rstptr::tree::parse_tree;
use rstptr::RelationInventory;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inv = RelationInventory::default();
    let read = |texts: &[&str]| {
        texts
            .iter()
            .map(|t| parse_tree(t, &inv))
            .collect::<Result<Vec<_>, _>>()
    };
    let gold = read(&[
        "(NS Condition (SN Attribution [1] [2]) (NN Temporal [3] [4]))",
        "(NS Elaboration [1] (NS Explanation [2] [3]))",
    ])?;
    let pred = read(&[
        "(NS Condition (SN Attribution [1] [2]) (NN Joint [3] [4]))",
        "(NS Elaboration (NN Joint [1] [2]) [3])",
    ])?;

    let report = parseval(&pred, &gold)?;
    report.check_ordering()?;
    println!("{REPORT_HEADER}");
    for (name, prf) in report.rows() {
        println!("{}", report_line(name, &prf));
    }

    let seg = segmentation_prf(&[vec![2, 8]], &[vec![2, 6, 8]])?;
    println!("{}", report_line("Segmentation", &seg));

    println!();
    print!("{}", confusion_matrix(&pred, &gold)?.to_tsv());

    let joint = [0.912, 0.905, 0.921, 0.899, 0.915];
    let pipeline = [0.901, 0.903, 0.910, 0.897, 0.908];
    let t = paired_t_test(&joint, &pipeline)?;
    println!("\npaired t = {:.3}, p = {:.4}", t.t, t.p);
    Ok(())
}
