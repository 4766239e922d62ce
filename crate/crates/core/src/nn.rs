//! Batched recurrent building blocks over the autodiff tape.
//!
//! Variable-length sequences are packed time-major: sequences are sorted by
//! decreasing length and step `t` holds one row for every sequence longer
//! than `t`, so no compute is spent on padding.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rstptr_autodiff::{gru_step, ParamId, ParamStore, Tape, Var};

use crate::error::{Error, Result};
use crate::model::{Architecture, DecoderIds, GruIds};

pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

/// A tape plus the parameters and layout it reads from.
pub struct Graph<'a> {
    pub tape: &'a mut Tape,
    pub store: &'a ParamStore,
    pub arch: &'a Architecture,
    dropout: Option<Dropout<'a>>,
}

impl<'a> Graph<'a> {
    pub fn new(tape: &'a mut Tape, store: &'a ParamStore, arch: &'a Architecture) -> Self {
        Graph {
            tape,
            store,
            arch,
            dropout: None,
        }
    }

    /// Graph with inverted dropout active.
    pub fn training(
        tape: &'a mut Tape,
        store: &'a ParamStore,
        arch: &'a Architecture,
        dropout: Dropout<'a>,
    ) -> Self {
        Graph {
            tape,
            store,
            arch,
            dropout: Some(dropout),
        }
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.tape.param(self.store, id)
    }

    pub fn dropout(&mut self, v: Var) -> Var {
        let Some(d) = self.dropout.as_mut() else {
            return v;
        };
        if d.rate <= 0.0 {
            return v;
        }
        let keep = 1.0 - d.rate;
        let n = self.tape.value(v).len();
        let mask = (0..n)
            .map(|_| {
                if d.rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        self.tape.mul_const(v, mask)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packing {
    lengths: Vec<usize>,
    order: Vec<usize>,
    rank: Vec<usize>,
    batch_sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl Packing {
    pub fn new(lengths: &[usize]) -> Self {
        let mut order: Vec<usize> = (0..lengths.len()).collect();
        order.sort_by(|&a, &b| lengths[b].cmp(&lengths[a]));
        let mut rank = vec![0; lengths.len()];
        for (p, &s) in order.iter().enumerate() {
            rank[s] = p;
        }
        let steps = lengths.iter().copied().max().unwrap_or(0);
        let batch_sizes: Vec<usize> = (0..steps)
            .map(|t| lengths.iter().filter(|&&l| l > t).count())
            .collect();
        let mut offsets = Vec::with_capacity(steps);
        let mut acc = 0;
        for &b in &batch_sizes {
            offsets.push(acc);
            acc += b;
        }
        Packing {
            lengths: lengths.to_vec(),
            order,
            rank,
            batch_sizes,
            offsets,
        }
    }

    pub fn sequences(&self) -> usize {
        self.lengths.len()
    }

    pub fn length(&self, seq: usize) -> usize {
        self.lengths[seq]
    }

    pub fn steps(&self) -> usize {
        self.batch_sizes.len()
    }

    pub fn total(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// Sequence indices sorted by decreasing length.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Packed row of step `t` of sequence `seq`.
    pub fn row(&self, seq: usize, t: usize) -> usize {
        debug_assert!(t < self.lengths[seq]);
        self.offsets[t] + self.rank[seq]
    }

    /// Packed rows of one sequence in step order.
    pub fn rows_of(&self, seq: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.lengths[seq]).map(move |t| self.row(seq, t))
    }

    /// Packed rows of every sequence, sequence after sequence.
    pub fn sequence_major(&self) -> Vec<usize> {
        (0..self.sequences())
            .flat_map(|s| self.rows_of(s))
            .collect()
    }

    /// Maps every packed row to the row holding the same sequence at the
    /// mirrored step; applying it twice is the identity.
    pub fn reversal(&self) -> Vec<usize> {
        let mut perm = vec![0; self.total()];
        for s in 0..self.sequences() {
            let n = self.lengths[s];
            for t in 0..n {
                perm[self.row(s, t)] = self.row(s, n - 1 - t);
            }
        }
        perm
    }

    /// Packed rows, in time-major order, of values given per sequence.
    pub fn pack<T: Copy>(&self, per_seq: &[Vec<T>]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.total());
        for (t, &b) in self.batch_sizes.iter().enumerate() {
            for &s in &self.order[..b] {
                out.push(per_seq[s][t]);
            }
        }
        out
    }
}

/// One GRU layer over packed rows `x`; `h0` has a row per sequence in
/// sorted order (at least as many as are active at step 0).
pub fn run_gru(g: &mut Graph, pack: &Packing, x: Var, h0: Option<Var>, ids: &GruIds) -> Var {
    let w_in = g.param(ids.w_input);
    let b_in = g.param(ids.b_input);
    let w_h = g.param(ids.w_hidden);
    let b_h = g.param(ids.b_hidden);
    let hidden = g.tape.cols(w_h) / 3;
    let tape = &mut *g.tape;
    let xw = tape.matmul(x, w_in);
    let gx = tape.add_row(xw, b_in);
    let mut outputs = Vec::with_capacity(pack.steps());
    let mut prev = match h0 {
        Some(h) => h,
        None => tape.zeros(pack.batch_sizes.first().copied().unwrap_or(0), hidden),
    };
    for t in 0..pack.steps() {
        let b = pack.batch_sizes[t];
        let h = tape.slice_rows(prev, 0, b);
        let gx_t = tape.slice_rows(gx, pack.offsets[t], b);
        let hw = tape.matmul(h, w_h);
        let gh = tape.add_row(hw, b_h);
        prev = tape.gru_gates(gx_t, gh, h);
        outputs.push(prev);
    }
    tape.concat_rows(&outputs)
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub pack: Packing,
    /// Packed `total x 2h` top-layer states `[forward; backward]`.
    pub top: Var,
    /// Packed forward-direction states of every layer.
    pub forward: Vec<Var>,
}

impl Encoded {
    /// Row of the last forward state of `seq` in each `forward` matrix.
    pub fn final_row(&self, seq: usize) -> usize {
        self.pack.row(seq, self.pack.length(seq) - 1)
    }
}

/// Embeds and encodes a batch of token-id sequences with the stacked BiGRU.
pub fn encode_batch(g: &mut Graph, token_ids: &[Vec<usize>]) -> Result<Encoded> {
    if token_ids.is_empty() || token_ids.iter().any(Vec::is_empty) {
        return Err(Error::Sentence(
            "cannot encode an empty token sequence".into(),
        ));
    }
    let lengths: Vec<usize> = token_ids.iter().map(Vec::len).collect();
    let pack = Packing::new(&lengths);
    let ids = g.arch.ids.encoder.clone();
    let emb = g.param(g.arch.ids.embedding);
    let rows = pack.pack(token_ids);
    let mut x = g.tape.gather_rows(emb, &rows);
    let reversal = pack.reversal();
    let mut forward = Vec::with_capacity(ids.len());
    for (l, [fwd, bwd]) in ids.iter().enumerate() {
        if l > 0 {
            x = g.dropout(x);
        }
        let f = run_gru(g, &pack, x, None, fwd);
        let xr = g.tape.gather_rows(x, &reversal);
        let br = run_gru(g, &pack, xr, None, bwd);
        let b = g.tape.gather_rows(br, &reversal);
        forward.push(f);
        x = g.tape.concat_cols(&[f, b]);
    }
    Ok(Encoded {
        pack,
        top: x,
        forward,
    })
}

fn source_layer(decoder_layer: usize, encoder_layers: usize) -> usize {
    decoder_layer.min(encoder_layers - 1)
}

/// Initial decoder states for sequences whose encoder final rows are `rows`.
pub fn decoder_init(g: &mut Graph, dec: &DecoderIds, enc: &Encoded, rows: &[usize]) -> Vec<Var> {
    let enc_layers = enc.forward.len();
    (0..dec.layers.len())
        .map(|l| {
            let w = g.param(dec.init_w[l]);
            let b = g.param(dec.init_b[l]);
            let src = g
                .tape
                .gather_rows(enc.forward[source_layer(l, enc_layers)], rows);
            let lin = g.tape.matmul(src, w);
            g.tape.add_row(lin, b)
        })
        .collect()
}

/// Teacher-forced stacked decoder over packed inputs. Decoder sequence `s`
/// is initialized from encoder sequence `encoder_seq[s]`.
pub fn run_decoder(
    g: &mut Graph,
    dec: &DecoderIds,
    enc: &Encoded,
    pack: &Packing,
    encoder_seq: &[usize],
    inputs: Var,
) -> Var {
    let active = pack.batch_sizes.first().copied().unwrap_or(0);
    let rows: Vec<usize> = pack.order()[..active]
        .iter()
        .map(|&s| enc.final_row(encoder_seq[s]))
        .collect();
    let init = decoder_init(g, dec, enc, &rows);
    let mut x = inputs;
    for (l, ids) in dec.layers.iter().enumerate() {
        if l > 0 {
            x = g.dropout(x);
        }
        x = run_gru(g, pack, x, Some(init[l]), ids);
    }
    x
}

/// Stepwise decoder state for greedy decoding of one sequence.
pub struct DecoderState {
    layers: Vec<Var>,
}

impl DecoderState {
    pub fn new(g: &mut Graph, dec: &DecoderIds, enc: &Encoded, seq: usize) -> Self {
        let layers = decoder_init(g, dec, enc, &[enc.final_row(seq)]);
        DecoderState { layers }
    }

    /// Feeds one `1 x D` input and returns the new top-layer state.
    pub fn step(&mut self, g: &mut Graph, dec: &DecoderIds, input: Var) -> Var {
        let mut x = input;
        for (l, ids) in dec.layers.iter().enumerate() {
            if l > 0 {
                x = g.dropout(x);
            }
            let w_in = g.param(ids.w_input);
            let b_in = g.param(ids.b_input);
            let w_h = g.param(ids.w_hidden);
            let b_h = g.param(ids.b_hidden);
            x = gru_step(g.tape, x, self.layers[l], w_in, b_in, w_h, b_h);
            self.layers[l] = x;
        }
        x
    }
}

/// First index of the maximum over `valid` positions.
pub fn argmax_masked(scores: &[f64], valid: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if valid(i) && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}
