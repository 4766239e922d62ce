//! Segmentation and RST-Parseval scoring, relation confusion matrices and
//! the paired t-test.
//!
//! Constituents are the internal nodes of a tree, the sentence-spanning root
//! included; leaves are not scored. Scores are micro-averaged: counts are
//! pooled over the corpus before precision and recall are taken.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::edu_token_range;
use crate::error::{Error, Result};
use crate::relations::Nuclearity;
use crate::tree::DiscourseTree;

/// Pooled match counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Prf {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Prf {
    pub fn precision(&self) -> f64 {
        ratio(self.matched, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.matched, self.gold)
    }

    /// Harmonic mean of precision and recall, 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn add(&mut self, other: Prf) {
        self.matched += other.matched;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Boundary scores over EDU-final token indices, excluding each sentence's
/// final token.
pub fn segmentation_prf(pred: &[Vec<usize>], gold: &[Vec<usize>]) -> Result<Prf> {
    if pred.len() != gold.len() {
        return Err(Error::Eval(format!(
            "{} predicted sentences vs {} gold sentences",
            pred.len(),
            gold.len()
        )));
    }
    let mut out = Prf::default();
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.last() != g.last() {
            return Err(Error::Eval(format!(
                "sentence {}: predicted and gold token counts differ ({:?} vs {:?})",
                i + 1,
                p.last(),
                g.last()
            )));
        }
        let internal = |v: &Vec<usize>| -> BTreeSet<usize> {
            v[..v.len().saturating_sub(1)].iter().copied().collect()
        };
        let (ps, gs) = (internal(p), internal(g));
        out.add(Prf {
            matched: ps.intersection(&gs).count(),
            predicted: ps.len(),
            gold: gs.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constituent {
    /// Inclusive bounds: EDU indices, or token indices when segmentations
    /// were supplied.
    pub span: (usize, usize),
    pub nuclearity: Nuclearity,
    pub relation: String,
}

/// Internal-node constituents of `tree`; with `edu_ends` the spans are
/// mapped to token ranges.
pub fn constituents(tree: &DiscourseTree, edu_ends: Option<&[usize]>) -> Vec<Constituent> {
    tree.internal_nodes()
        .into_iter()
        .map(|n| {
            let span = match edu_ends {
                None => (n.span.start, n.span.end),
                Some(ends) => (
                    edu_token_range(ends, n.span.start).0,
                    edu_token_range(ends, n.span.end).1,
                ),
            };
            Constituent {
                span,
                nuclearity: n.label.nuclearity,
                relation: n.label.relation.clone(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalReport {
    pub span: Prf,
    pub nuclearity: Prf,
    pub relation: Prf,
    pub sentences: usize,
}

impl EvalReport {
    /// Relation F1 <= Nuclearity F1 <= Span F1.
    pub fn check_ordering(&self) -> Result<()> {
        let (s, n, r) = (self.span.f1(), self.nuclearity.f1(), self.relation.f1());
        if r <= n && n <= s {
            Ok(())
        } else {
            Err(Error::Eval(format!(
                "metric ordering violated: Span {s}, Nuclearity {n}, Relation {r}"
            )))
        }
    }

    pub fn rows(&self) -> [(&'static str, Prf); 3] {
        [
            ("Span", self.span),
            ("Nuclearity", self.nuclearity),
            ("Relation", self.relation),
        ]
    }
}

pub const REPORT_HEADER: &str = "task\tP\tR\tF1\tmatched\tpred\tgold";

pub fn report_line(task: &str, prf: &Prf) -> String {
    format!(
        "{task}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
        prf.precision(),
        prf.recall(),
        prf.f1(),
        prf.matched,
        prf.predicted,
        prf.gold
    )
}

/// Scores aligned constituent sets.
pub fn score_constituents(
    pred: &[Vec<Constituent>],
    gold: &[Vec<Constituent>],
) -> Result<EvalReport> {
    if pred.len() != gold.len() {
        return Err(Error::Eval(format!(
            "{} predicted trees vs {} gold trees",
            pred.len(),
            gold.len()
        )));
    }
    let mut r = EvalReport {
        sentences: pred.len(),
        ..EvalReport::default()
    };
    for (p, g) in pred.iter().zip(gold) {
        let gold_by_span: HashMap<(usize, usize), &Constituent> =
            g.iter().map(|c| (c.span, c)).collect();
        let mut counts = [0usize; 3];
        for c in p {
            if let Some(gc) = gold_by_span.get(&c.span) {
                counts[0] += 1;
                if gc.nuclearity == c.nuclearity {
                    counts[1] += 1;
                    if gc.relation == c.relation {
                        counts[2] += 1;
                    }
                }
            }
        }
        for (prf, matched) in [&mut r.span, &mut r.nuclearity, &mut r.relation]
            .into_iter()
            .zip(counts)
        {
            prf.add(Prf {
                matched,
                predicted: p.len(),
                gold: g.len(),
            });
        }
    }
    Ok(r)
}

/// Span, Nuclearity and Relation scores of trees over the same EDUs.
pub fn parseval(pred: &[DiscourseTree], gold: &[DiscourseTree]) -> Result<EvalReport> {
    if pred.len() != gold.len() {
        return Err(Error::Eval(format!(
            "{} predicted trees vs {} gold trees",
            pred.len(),
            gold.len()
        )));
    }
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.leaf_count() != g.leaf_count() {
            return Err(Error::Eval(format!(
                "sentence {}: predicted tree has {} EDUs, gold has {}",
                i + 1,
                p.leaf_count(),
                g.leaf_count()
            )));
        }
    }
    let pc: Vec<_> = pred.iter().map(|t| constituents(t, None)).collect();
    let gc: Vec<_> = gold.iter().map(|t| constituents(t, None)).collect();
    score_constituents(&pc, &gc)
}

/// Parseval over token spans, for trees built on possibly different
/// segmentations of the same sentences.
pub fn parseval_segmented(
    pred: &[(&DiscourseTree, &[usize])],
    gold: &[(&DiscourseTree, &[usize])],
) -> Result<EvalReport> {
    let (pc, gc) = segmented_constituents(pred, gold)?;
    score_constituents(&pc, &gc)
}

type ConstituentLists = (Vec<Vec<Constituent>>, Vec<Vec<Constituent>>);

fn segmented_constituents(
    pred: &[(&DiscourseTree, &[usize])],
    gold: &[(&DiscourseTree, &[usize])],
) -> Result<ConstituentLists> {
    if pred.len() != gold.len() {
        return Err(Error::Eval(format!(
            "{} predicted trees vs {} gold trees",
            pred.len(),
            gold.len()
        )));
    }
    let mut pc = Vec::with_capacity(pred.len());
    let mut gc = Vec::with_capacity(gold.len());
    for (i, ((pt, pe), (gt, ge))) in pred.iter().zip(gold).enumerate() {
        if pe.last() != ge.last() {
            return Err(Error::Eval(format!(
                "sentence {}: token counts differ ({:?} vs {:?})",
                i + 1,
                pe.last(),
                ge.last()
            )));
        }
        for (t, e, who) in [(pt, pe, "predicted"), (gt, ge, "gold")] {
            if t.leaf_count() != e.len() {
                return Err(Error::Eval(format!(
                    "sentence {}: {who} tree has {} EDUs but {} segments",
                    i + 1,
                    t.leaf_count(),
                    e.len()
                )));
            }
        }
        pc.push(constituents(pt, Some(pe)));
        gc.push(constituents(gt, Some(ge)));
    }
    Ok((pc, gc))
}

/// Counts keyed by (gold relation, predicted relation) over constituents
/// whose spans match; nuclearity is ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub relations: Vec<String>,
    /// `counts[gold][pred]`, indexed like `relations`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    fn from_constituents(pred: &[Vec<Constituent>], gold: &[Vec<Constituent>]) -> Self {
        let mut pairs: Vec<(&str, &str)> = Vec::new();
        let mut names = BTreeSet::new();
        for (p, g) in pred.iter().zip(gold) {
            let by_span: HashMap<(usize, usize), &Constituent> =
                p.iter().map(|c| (c.span, c)).collect();
            for gc in g {
                if let Some(pc) = by_span.get(&gc.span) {
                    pairs.push((&gc.relation, &pc.relation));
                    names.insert(gc.relation.clone());
                    names.insert(pc.relation.clone());
                }
            }
        }
        let relations: Vec<String> = names.into_iter().collect();
        let index: HashMap<&str, usize> = relations
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut counts = vec![vec![0; relations.len()]; relations.len()];
        for (g, p) in pairs {
            counts[index[g]][index[p]] += 1;
        }
        ConfusionMatrix { relations, counts }
    }

    pub fn get(&self, gold: &str, pred: &str) -> usize {
        let i = self.relations.iter().position(|r| r == gold);
        let j = self.relations.iter().position(|r| r == pred);
        match (i, j) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Tab-separated matrix; rows are gold relations, columns predicted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for r in &self.relations {
            let _ = write!(out, "\t{r}");
        }
        out.push('\n');
        for (r, row) in self.relations.iter().zip(&self.counts) {
            out.push_str(r);
            for c in row {
                let _ = write!(out, "\t{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion_matrix(pred: &[DiscourseTree], gold: &[DiscourseTree]) -> Result<ConfusionMatrix> {
    if pred.len() != gold.len() {
        return Err(Error::Eval(format!(
            "{} predicted trees vs {} gold trees",
            pred.len(),
            gold.len()
        )));
    }
    let pc: Vec<_> = pred.iter().map(|t| constituents(t, None)).collect();
    let gc: Vec<_> = gold.iter().map(|t| constituents(t, None)).collect();
    Ok(ConfusionMatrix::from_constituents(&pc, &gc))
}

pub fn confusion_matrix_segmented(
    pred: &[(&DiscourseTree, &[usize])],
    gold: &[(&DiscourseTree, &[usize])],
) -> Result<ConfusionMatrix> {
    let (pc, gc) = segmented_constituents(pred, gold)?;
    Ok(ConfusionMatrix::from_constituents(&pc, &gc))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: usize,
}

/// Paired t-test on per-item differences `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Eval(format!(
            "paired samples of {} and {} items",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Eval("paired t-test needs at least two items".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = n - 1;
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / df as f64;
    if d.iter().all(|&x| x == 0.0) {
        return Ok(TTest { t: 0.0, p: 1.0, df });
    }
    if var == 0.0 {
        return Ok(TTest {
            t: mean.signum() * f64::INFINITY,
            p: 0.0,
            df,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, p, df })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relations::Nuclearity::*;
    use crate::relations::RelationLabel;

    fn condition_tree(temporal: &str) -> DiscourseTree {
        DiscourseTree::node(
            NS,
            "Condition",
            DiscourseTree::node(
                SN,
                "Attribution",
                DiscourseTree::leaf(1),
                DiscourseTree::leaf(2),
            ),
            DiscourseTree::node(NN, temporal, DiscourseTree::leaf(3), DiscourseTree::leaf(4)),
        )
    }

    #[test]
    fn f1_conventions() {
        assert_eq!(Prf::default().f1(), 0.0);
        let p = Prf {
            matched: 1,
            predicted: 1,
            gold: 2,
        };
        assert!((p.f1() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn segmentation_examples() {
        let s = segmentation_prf(&[vec![2, 6, 9]], &[vec![2, 6, 9]]).unwrap();
        assert_eq!(s.f1(), 1.0);
        let s = segmentation_prf(&[vec![2, 9]], &[vec![2, 6, 9]]).unwrap();
        assert_eq!((s.precision(), s.recall()), (1.0, 0.5));
        assert!((s.f1() - 2.0 / 3.0).abs() < 1e-15);
        let s = segmentation_prf(&[vec![5]], &[vec![5]]).unwrap();
        assert_eq!(s, Prf::default());
        assert!(segmentation_prf(&[vec![5]], &[]).is_err());
    }

    #[test]
    fn parseval_examples() {
        let gold = condition_tree("Temporal");
        let r = parseval(std::slice::from_ref(&gold), std::slice::from_ref(&gold)).unwrap();
        assert_eq!([r.span.f1(), r.nuclearity.f1(), r.relation.f1()], [1.0; 3]);
        let r = parseval(&[condition_tree("Joint")], std::slice::from_ref(&gold)).unwrap();
        assert_eq!((r.span.f1(), r.nuclearity.f1()), (1.0, 1.0));
        assert!((r.relation.f1() - 2.0 / 3.0).abs() < 1e-15);
        let rb = DiscourseTree::right_branching(4, &RelationLabel::new("Joint", NN));
        let r = parseval(&[rb], std::slice::from_ref(&gold)).unwrap();
        assert_eq!(r.span.matched, 2);
        assert!((r.span.f1() - 2.0 / 3.0).abs() < 1e-15);
        r.check_ordering().unwrap();
        assert!(parseval(&[DiscourseTree::leaf(1)], &[gold]).is_err());
    }

    #[test]
    fn token_level_spans_propagate_segmentation_errors() {
        let gold = condition_tree("Temporal");
        let ends = [2usize, 4, 6, 8];
        let r = parseval_segmented(&[(&gold, &ends)], &[(&gold, &ends)]).unwrap();
        assert_eq!(r.relation.f1(), 1.0);
        let inner_only = [1usize, 4, 6, 8];
        let r = parseval_segmented(&[(&gold, &inner_only)], &[(&gold, &ends)]).unwrap();
        assert_eq!(r.span.matched, 3);
        let shifted = [2usize, 3, 6, 8];
        let r = parseval_segmented(&[(&gold, &shifted)], &[(&gold, &ends)]).unwrap();
        assert_eq!(r.span.matched, 1);
    }

    #[test]
    fn confusion_examples() {
        let gold = condition_tree("Temporal");
        let m = confusion_matrix(std::slice::from_ref(&gold), std::slice::from_ref(&gold)).unwrap();
        for (i, row) in m.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                assert_eq!(c > 0, i == j);
            }
        }
        let m = confusion_matrix(&[condition_tree("Joint")], &[gold]).unwrap();
        assert_eq!(m.get("Temporal", "Joint"), 1);
        assert_eq!(m.total(), 3);
        assert!(m
            .to_tsv()
            .starts_with("gold\\pred\tAttribution\tCondition\tJoint\tTemporal\n"));
    }

    #[test]
    fn t_test_conventions_and_values() {
        let a = [0.5, 0.7, 0.9];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let r = paired_t_test(&[2.0, 2.0, 2.0, 2.0], &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(r.t.is_infinite() && r.p < 1e-12);
        // mean 1, sample sd sqrt(2.5), t = 1 / sqrt(2.5 / 5) = sqrt(2)
        let r = paired_t_test(&[1.0, -1.0, 2.0, 0.0, 3.0], &[0.0; 5]).unwrap();
        assert!((r.t - 2f64.sqrt()).abs() < 1e-12, "{}", r.t);
        assert!((r.p - 0.230200).abs() < 1e-4, "{}", r.p);
        assert_eq!(r.df, 4);
        assert!(paired_t_test(&[1.0], &[2.0]).is_err());
    }
}
