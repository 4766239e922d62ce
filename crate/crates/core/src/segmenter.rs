//! Pointer-network segmenter: the decoder is fed the encoder state of the
//! first token of the current segment and points at that segment's last
//! token, among the positions not yet covered.

use rstptr_autodiff::Var;

use crate::error::{Error, Result};
use crate::nn::{argmax_masked, run_decoder, DecoderState, Encoded, Graph, Packing};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SegmentTrace {
    pub pointer_decisions: usize,
    /// Dot-product scores computed over all decisions.
    pub score_evaluations: usize,
}

/// Teacher-forced pointing loss `-sum_j log P(y_j)` of every sentence,
/// including the final decision that selects the last token. `gold[s]` holds
/// the 1-based EDU-final token indices of encoder sequence `s`.
pub fn segmentation_losses(g: &mut Graph, enc: &Encoded, gold: &[&[usize]]) -> Result<Vec<Var>> {
    let b = enc.pack.sequences();
    if gold.len() != b {
        return Err(Error::Sentence(format!(
            "{} boundary lists for {b} sentences",
            gold.len()
        )));
    }
    for (s, ends) in gold.iter().enumerate() {
        crate::corpus::check_edu_ends(ends, enc.pack.length(s))?;
    }
    let starts: Vec<Vec<usize>> = gold
        .iter()
        .map(|ends| {
            std::iter::once(1)
                .chain(ends[..ends.len() - 1].iter().map(|e| e + 1))
                .collect()
        })
        .collect();
    let input_rows: Vec<Vec<usize>> = starts
        .iter()
        .enumerate()
        .map(|(s, st)| st.iter().map(|&p| enc.pack.row(s, p - 1)).collect())
        .collect();
    let lengths: Vec<usize> = gold.iter().map(|e| e.len()).collect();
    let pack = Packing::new(&lengths);
    let inputs = g.tape.gather_rows(enc.top, &pack.pack(&input_rows));
    let identity: Vec<usize> = (0..b).collect();
    let ids = g.arch.ids.segmenter.clone();
    let d = run_decoder(g, &ids, enc, &pack, &identity, inputs);
    let d_sm = g.tape.gather_rows(d, &pack.sequence_major());
    let h_sm = g.tape.gather_rows(enc.top, &enc.pack.sequence_major());
    let (mut d_off, mut h_off) = (0, 0);
    let mut out = Vec::with_capacity(b);
    for s in 0..b {
        let n = enc.pack.length(s);
        let j = lengths[s];
        let ds = g.tape.slice_rows(d_sm, d_off, j);
        let hs = g.tape.slice_rows(h_sm, h_off, n);
        let scores = g.tape.matmul_bt(ds, hs);
        let mut mask = vec![false; j * n];
        for (r, &st) in starts[s].iter().enumerate() {
            mask[r * n + st - 1..(r + 1) * n].fill(true);
        }
        let targets: Vec<usize> = gold[s].iter().map(|e| e - 1).collect();
        let nll = g.tape.nll_rows(scores, Some(&mask), &targets)?;
        out.push(g.tape.sum(nll));
        d_off += j;
        h_off += n;
    }
    Ok(out)
}

/// Greedy segmentation of encoder sequence `seq`; the result always ends
/// with the token count.
pub fn segment_greedy(g: &mut Graph, enc: &Encoded, seq: usize) -> (Vec<usize>, SegmentTrace) {
    let n = enc.pack.length(seq);
    let rows: Vec<usize> = enc.pack.rows_of(seq).collect();
    let h = g.tape.gather_rows(enc.top, &rows);
    let ids = g.arch.ids.segmenter.clone();
    let mut state = DecoderState::new(g, &ids, enc, seq);
    let mut trace = SegmentTrace::default();
    let mut ends = Vec::new();
    let mut start = 1;
    loop {
        let x = g.tape.slice_rows(h, start - 1, 1);
        let top = state.step(g, &ids, x);
        let candidates = g.tape.slice_rows(h, start - 1, n - start + 1);
        let scores = g.tape.matmul_bt(top, candidates);
        let k = argmax_masked(g.tape.value(scores), |_| true).expect("non-empty candidates");
        trace.pointer_decisions += 1;
        trace.score_evaluations += n - start + 1;
        let end = start + k;
        ends.push(end);
        if end == n {
            break;
        }
        start = end + 1;
    }
    (ends, trace)
}
