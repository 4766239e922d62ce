//! Top-down pointer-network parser over EDU spans.
//!
//! A stack holds spans of three or more EDUs. Popping a span fuses its
//! parent, itself and its left sibling, feeds the fused vector to the
//! decoder and points at a split `k`; the bi-affine classifier then labels
//! the node from the last-EDU representations of both children. Two-EDU
//! children are labeled at once, longer ones are pushed right then left so
//! the leftmost subtree is expanded first.

use std::collections::HashMap;

use rstptr_autodiff::Var;

use crate::error::{Error, Result};
use crate::model::{head_maps, BiaffineIds};
use crate::nn::{argmax_masked, run_decoder, DecoderState, Encoded, Graph, Packing};
use crate::relations::RelationLabel;
use crate::tree::{DiscourseTree, EduSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackEntry {
    pub span: EduSpan,
    /// Last EDU of the parent span; `None` at the root.
    pub parent: Option<usize>,
    /// Last EDU of the left sibling; `None` for left children and the root.
    pub sibling: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseTrace {
    /// Spans in the order they were popped.
    pub popped: Vec<EduSpan>,
    pub pointer_decisions: usize,
    pub classifier_calls: usize,
    pub max_stack_depth: usize,
    /// Split-candidate scores computed over all pointer decisions.
    pub score_evaluations: usize,
}

/// Callbacks driving the stack algorithm: choose a split for a popped span,
/// label a node given its split.
pub trait Decider {
    fn point(&mut self, entry: &StackEntry) -> Result<usize>;
    fn label(&mut self, span: EduSpan, split: usize) -> Result<()>;
}

/// Runs the depth-first decoding loop over `m` EDUs.
pub fn drive(m: usize, decider: &mut dyn Decider) -> Result<ParseTrace> {
    let mut trace = ParseTrace::default();
    if m == 0 {
        return Err(Error::Sentence("cannot parse zero EDUs".into()));
    }
    if m == 1 {
        return Ok(trace);
    }
    if m == 2 {
        decider.label(EduSpan::new(1, 2), 1)?;
        trace.classifier_calls = 1;
        return Ok(trace);
    }
    let mut stack = vec![StackEntry {
        span: EduSpan::new(1, m),
        parent: None,
        sibling: None,
    }];
    trace.max_stack_depth = 1;
    while let Some(entry) = stack.pop() {
        let EduSpan { start: i, end: j } = entry.span;
        trace.popped.push(entry.span);
        let k = decider.point(&entry)?;
        if !(i..j).contains(&k) {
            return Err(Error::Model(format!("split {k} outside {}", entry.span)));
        }
        trace.pointer_decisions += 1;
        trace.score_evaluations += j - i;
        decider.label(entry.span, k)?;
        trace.classifier_calls += 1;
        let left = EduSpan::new(i, k);
        let right = EduSpan::new(k + 1, j);
        for child in [left, right] {
            if child.len() == 2 {
                decider.label(child, child.start)?;
                trace.classifier_calls += 1;
            }
        }
        if right.len() >= 3 {
            stack.push(StackEntry {
                span: right,
                parent: Some(j),
                sibling: Some(k),
            });
        }
        if left.len() >= 3 {
            stack.push(StackEntry {
                span: left,
                parent: Some(j),
                sibling: None,
            });
        }
        trace.max_stack_depth = trace.max_stack_depth.max(stack.len());
    }
    Ok(trace)
}

/// Builds the tree over `1..=m` from per-span decisions.
pub fn assemble(
    m: usize,
    nodes: &HashMap<EduSpan, (usize, RelationLabel)>,
) -> Result<DiscourseTree> {
    fn build(
        span: EduSpan,
        nodes: &HashMap<EduSpan, (usize, RelationLabel)>,
    ) -> Result<DiscourseTree> {
        if span.len() == 1 {
            return Ok(DiscourseTree::Leaf(span.start));
        }
        let (k, label) = nodes
            .get(&span)
            .ok_or_else(|| Error::Model(format!("no decision for span {span}")))?;
        Ok(DiscourseTree::Node {
            label: label.clone(),
            left: Box::new(build(EduSpan::new(span.start, *k), nodes)?),
            right: Box::new(build(EduSpan::new(k + 1, span.end), nodes)?),
        })
    }
    build(EduSpan::new(1, m), nodes)
}

/// Teacher-forcing plan of one gold tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldSchedule {
    /// Pointer steps in decoding order with their gold split.
    pub steps: Vec<(StackEntry, usize)>,
    /// `(split k, span end j, label)` for every internal node.
    pub nodes: Vec<(usize, usize, RelationLabel)>,
}

struct GoldDecider<'a> {
    nodes: HashMap<EduSpan, (usize, &'a RelationLabel)>,
    plan: GoldSchedule,
}

impl Decider for GoldDecider<'_> {
    fn point(&mut self, entry: &StackEntry) -> Result<usize> {
        let k = self.nodes[&entry.span].0;
        self.plan.steps.push((*entry, k));
        Ok(k)
    }

    fn label(&mut self, span: EduSpan, split: usize) -> Result<()> {
        let label = self.nodes[&span].1.clone();
        self.plan.nodes.push((split, span.end, label));
        Ok(())
    }
}

pub fn gold_schedule(tree: &DiscourseTree) -> Result<GoldSchedule> {
    let m = tree.leaf_count();
    let nodes = tree
        .internal_nodes()
        .into_iter()
        .map(|n| (n.span, (n.split, n.label)))
        .collect();
    let mut d = GoldDecider {
        nodes,
        plan: GoldSchedule::default(),
    };
    drive(m, &mut d)?;
    Ok(d.plan)
}

fn biaffine(g: &mut Graph, ids: &BiaffineIds, left: Var, right: Var) -> Var {
    let u1 = g.param(ids.u1);
    let u2 = g.param(ids.u2);
    let w_kj = g.param(ids.w_kj);
    let w_k = g.param(ids.w_k);
    let w_j = g.param(ids.w_j);
    let bias = g.param(ids.bias);
    let t = &mut *g.tape;
    let lk = t.matmul(left, u1);
    let ck = t.elu(lk);
    let lj = t.matmul(right, u2);
    let cj = t.elu(lj);
    let z = t.matmul(ck, w_kj);
    let bilinear = t.group_dot(z, cj, ids.outputs);
    let a = t.matmul(ck, w_k);
    let b = t.matmul(cj, w_j);
    let s = t.add(bilinear, a);
    let s = t.add(s, b);
    t.add_row(s, bias)
}

/// Unnormalized label scores for row-aligned `(e_k, e_j)` pairs, `N x L`.
pub fn label_logits(g: &mut Graph, left: Var, right: Var) -> Var {
    let classifier = g.arch.ids.classifier;
    let main = biaffine(g, &classifier, left, right);
    match g.arch.ids.nuclearity {
        None => main,
        Some(nuc_ids) => {
            let nuc = biaffine(g, &nuc_ids, left, right);
            let (rel_map, nuc_map) = head_maps(&g.arch.labels);
            let l = g.arch.labels.len();
            let rm = g.tape.constant(classifier.outputs, l, rel_map);
            let nm = g.tape.constant(3, l, nuc_map);
            let a = g.tape.matmul(main, rm);
            let b = g.tape.matmul(nuc, nm);
            g.tape.add(a, b)
        }
    }
}

/// Teacher-forced structure and label losses of every sentence:
/// `(L_s, L_l)` per sentence, each a `1 x 1` variable.
pub fn parser_losses(
    g: &mut Graph,
    enc: &Encoded,
    edu_ends: &[&[usize]],
    trees: &[&DiscourseTree],
) -> Result<(Vec<Var>, Vec<Var>)> {
    let b = enc.pack.sequences();
    if edu_ends.len() != b || trees.len() != b {
        return Err(Error::Sentence(format!(
            "{} segmentations and {} trees for {b} sentences",
            edu_ends.len(),
            trees.len()
        )));
    }
    let mut edu_rows = Vec::new();
    let mut e_off = Vec::with_capacity(b);
    for (s, ends) in edu_ends.iter().enumerate() {
        crate::corpus::check_edu_ends(ends, enc.pack.length(s))?;
        let m = ends.len();
        if trees[s].leaf_count() != m {
            return Err(Error::Sentence(format!(
                "tree over {} EDUs for a sentence with {m}",
                trees[s].leaf_count()
            )));
        }
        e_off.push(edu_rows.len());
        edu_rows.extend(ends.iter().map(|&e| enc.pack.row(s, e - 1)));
    }
    let total_m = edu_rows.len();
    let e_all = g.tape.gather_rows(enc.top, &edu_rows);
    let schedules = trees
        .iter()
        .map(|t| gold_schedule(t))
        .collect::<Result<Vec<_>>>()?;

    // pointer network
    let np = g.param(g.arch.ids.null_parent);
    let ns = g.param(g.arch.ids.null_sibling);
    let src = g.tape.concat_rows(&[e_all, np, ns]);
    let (null_p, null_s) = (total_m, total_m + 1);
    let mut p_rows = Vec::with_capacity(b);
    let mut c_rows = Vec::with_capacity(b);
    let mut s_rows = Vec::with_capacity(b);
    for (s, plan) in schedules.iter().enumerate() {
        let o = e_off[s];
        p_rows.push(
            plan.steps
                .iter()
                .map(|(e, _)| e.parent.map_or(null_p, |p| o + p - 1))
                .collect::<Vec<_>>(),
        );
        c_rows.push(
            plan.steps
                .iter()
                .map(|(e, _)| o + e.span.end - 1)
                .collect::<Vec<_>>(),
        );
        s_rows.push(
            plan.steps
                .iter()
                .map(|(e, _)| e.sibling.map_or(null_s, |x| o + x - 1))
                .collect::<Vec<_>>(),
        );
    }
    let lengths: Vec<usize> = schedules.iter().map(|p| p.steps.len()).collect();
    let pack = Packing::new(&lengths);
    let mut structure = Vec::with_capacity(b);
    if pack.total() > 0 {
        let pv = g.tape.gather_rows(src, &pack.pack(&p_rows));
        let cv = g.tape.gather_rows(src, &pack.pack(&c_rows));
        let sv = g.tape.gather_rows(src, &pack.pack(&s_rows));
        let fused = g.tape.fuse3(pv, cv, sv);
        let identity: Vec<usize> = (0..b).collect();
        let ids = g.arch.ids.parser.clone();
        let d = run_decoder(g, &ids, enc, &pack, &identity, fused);
        let d_sm = g.tape.gather_rows(d, &pack.sequence_major());
        let mut d_off = 0;
        for (s, plan) in schedules.iter().enumerate() {
            let t = plan.steps.len();
            if t == 0 {
                structure.push(g.tape.zeros(1, 1));
                continue;
            }
            let m = edu_ends[s].len();
            let ds = g.tape.slice_rows(d_sm, d_off, t);
            let es = g.tape.slice_rows(e_all, e_off[s], m);
            let scores = g.tape.matmul_bt(ds, es);
            let mut mask = vec![false; t * m];
            for (r, (entry, _)) in plan.steps.iter().enumerate() {
                mask[r * m + entry.span.start - 1..r * m + entry.span.end - 1].fill(true);
            }
            let targets: Vec<usize> = plan.steps.iter().map(|(_, k)| k - 1).collect();
            let nll = g.tape.nll_rows(scores, Some(&mask), &targets)?;
            structure.push(g.tape.sum(nll));
            d_off += t;
        }
    } else {
        for _ in 0..b {
            structure.push(g.tape.zeros(1, 1));
        }
    }

    // relation classifier
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut targets = Vec::new();
    for (s, plan) in schedules.iter().enumerate() {
        for (k, j, label) in &plan.nodes {
            left.push(e_off[s] + k - 1);
            right.push(e_off[s] + j - 1);
            targets.push(g.arch.labels.index_of(label).ok_or_else(|| {
                Error::Annotation(format!("label {label} is outside the model's label set"))
            })?);
        }
    }
    let mut labels = Vec::with_capacity(b);
    if targets.is_empty() {
        for _ in 0..b {
            labels.push(g.tape.zeros(1, 1));
        }
    } else {
        let lv = g.tape.gather_rows(e_all, &left);
        let rv = g.tape.gather_rows(e_all, &right);
        let logits = label_logits(g, lv, rv);
        let nll = g.tape.nll_rows(logits, None, &targets)?;
        let mut off = 0;
        for plan in &schedules {
            let n = plan.nodes.len();
            if n == 0 {
                labels.push(g.tape.zeros(1, 1));
            } else {
                let part = g.tape.slice_rows(nll, off, n);
                labels.push(g.tape.sum(part));
                off += n;
            }
        }
    }
    Ok((structure, labels))
}

struct GreedyDecider<'g, 'a> {
    g: &'g mut Graph<'a>,
    enc: &'g Encoded,
    seq: usize,
    edus: Var,
    state: Option<DecoderState>,
    nodes: HashMap<EduSpan, (usize, RelationLabel)>,
}

impl GreedyDecider<'_, '_> {
    fn edu(&mut self, k: usize) -> Var {
        self.g.tape.slice_rows(self.edus, k - 1, 1)
    }
}

impl Decider for GreedyDecider<'_, '_> {
    fn point(&mut self, entry: &StackEntry) -> Result<usize> {
        let ids = self.g.arch.ids.parser.clone();
        if self.state.is_none() {
            self.state = Some(DecoderState::new(self.g, &ids, self.enc, self.seq));
        }
        let p = match entry.parent {
            Some(p) => self.edu(p),
            None => self.g.param(self.g.arch.ids.null_parent),
        };
        let s = match entry.sibling {
            Some(x) => self.edu(x),
            None => self.g.param(self.g.arch.ids.null_sibling),
        };
        let e = self.edu(entry.span.end);
        let fused = self.g.tape.fuse3(p, e, s);
        let top = self
            .state
            .as_mut()
            .expect("initialized")
            .step(self.g, &ids, fused);
        let (i, j) = (entry.span.start, entry.span.end);
        let candidates = self.g.tape.slice_rows(self.edus, i - 1, j - i);
        let scores = self.g.tape.matmul_bt(top, candidates);
        let k = argmax_masked(self.g.tape.value(scores), |_| true).expect("candidates");
        Ok(i + k)
    }

    fn label(&mut self, span: EduSpan, split: usize) -> Result<()> {
        let l = self.edu(split);
        let r = self.edu(span.end);
        let logits = label_logits(self.g, l, r);
        let best = argmax_masked(self.g.tape.value(logits), |_| true).expect("labels");
        let label = self.g.arch.labels.label(best).clone();
        self.nodes.insert(span, (split, label));
        Ok(())
    }
}

/// Greedy top-down parse of encoder sequence `seq` segmented by `edu_ends`.
pub fn parse_greedy(
    g: &mut Graph,
    enc: &Encoded,
    seq: usize,
    edu_ends: &[usize],
) -> Result<(DiscourseTree, ParseTrace)> {
    crate::corpus::check_edu_ends(edu_ends, enc.pack.length(seq))?;
    let rows: Vec<usize> = edu_ends.iter().map(|&e| enc.pack.row(seq, e - 1)).collect();
    let edus = g.tape.gather_rows(enc.top, &rows);
    let m = edu_ends.len();
    let mut d = GreedyDecider {
        g,
        enc,
        seq,
        edus,
        state: None,
        nodes: HashMap::new(),
    };
    let trace = drive(m, &mut d)?;
    let tree = assemble(m, &d.nodes)?;
    Ok((tree, trace))
}
