//! Reverse-mode tape over row-major `f64` matrices.
//!
//! Every op appends one node whose inputs already live on the tape, so node
//! order is a topological order and the backward pass is a single reverse
//! sweep. Vectors are 1-row matrices.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::params::{Grads, ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul {
        a: Var,
        b: Var,
        ta: bool,
        tb: bool,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Elu(Var),
    MulConst(Var, Vec<f64>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    GatherRows(Var, Vec<usize>),
    SoftmaxRows(Var),
    NllRows {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
    Sum(Var),
    SumRows(Var),
    GruGates {
        gx: Var,
        gh: Var,
        h: Var,
        cache: Vec<f64>,
    },
    Fuse3 {
        p: Var,
        e: Var,
        s: Var,
        attn: Vec<f64>,
    },
    GroupDot {
        z: Var,
        c: Var,
        groups: usize,
    },
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    grads: Vec<Vec<f64>>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn elu_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// `c = beta * c + op(a) * op(b)` with arbitrary strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    (rsc, csc): (usize, usize),
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c.iter_mut() {
            *v *= beta;
        }
        return;
    }
    debug_assert!((m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!((m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: the debug assertions above spell out the bounds every caller
    // establishes from the operand dimensions.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Logical dims and strides of a stored `rows x cols` matrix, optionally transposed.
fn view(rows: usize, cols: usize, transposed: bool) -> (usize, usize, (usize, usize)) {
    if transposed {
        (cols, rows, (1, cols))
    } else {
        (rows, cols, (cols, 1))
    }
}

fn softmax_masked_row(
    logits: &[f64],
    mask: Option<&[bool]>,
    out: &mut [f64],
    row: usize,
) -> Result<f64> {
    let valid = |c: usize| mask.is_none_or(|m| m[c]);
    let mut max = f64::NEG_INFINITY;
    for (c, &v) in logits.iter().enumerate() {
        if valid(c) && v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptyDomain { row });
    }
    let mut total = 0.0;
    for (c, &v) in logits.iter().enumerate() {
        out[c] = if valid(c) { (v - max).exp() } else { 0.0 };
        total += out[c];
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    // log-sum-exp
    Ok(max + total.ln())
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        assert_eq!(rows * cols, value.len(), "constant dims");
        self.push(rows, cols, value, Op::Leaf)
    }

    pub fn row(&mut self, value: &[f64]) -> Var {
        self.constant(1, value.len(), value.to_vec())
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(rows, cols, vec![0.0; rows * cols])
    }

    pub fn tensor(&mut self, t: &Tensor) -> Var {
        let (r, c) = t.matrix_dims();
        self.constant(r, c, t.data().to_vec())
    }

    /// Leaf for a stored parameter. Repeated calls return the same node so
    /// gradients from every use accumulate in one place.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let t = store.get(id);
        let (r, c) = t.matrix_dims();
        let v = self.push(r, c, t.data().to_vec(), Op::Param);
        self.params.insert(id, v);
        v
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn rows(&self, v: Var) -> usize {
        self.nodes[v.0].rows
    }

    pub fn cols(&self, v: Var) -> usize {
        self.nodes[v.0].cols
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn row_values(&self, v: Var, r: usize) -> &[f64] {
        let n = &self.nodes[v.0];
        &n.value[r * n.cols..(r + 1) * n.cols]
    }

    // ---- linear algebra ----

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, false)
    }

    /// `a * b^T`
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, false, b, true)
    }

    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Var {
        let (ar, ac) = self.dims(a);
        let (br, bc) = self.dims(b);
        let (m, k, sa) = view(ar, ac, ta);
        let (k2, n, sb) = view(br, bc, tb);
        assert_eq!(k, k2, "matmul inner dims {m}x{k} * {k2}x{n}");
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            &self.nodes[a.0].value,
            sa,
            &self.nodes[b.0].value,
            sb,
            &mut out,
            (n, 1),
            0.0,
        );
        self.push(m, n, out, Op::MatMul { a, b, ta, tb })
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (r, c) = self.dims(a);
        assert_eq!((r, c), self.dims(b), "elementwise dims");
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(r, c, value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a 1-row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (r, c) = self.dims(a);
        assert_eq!(self.dims(bias), (1, c), "add_row bias dims");
        let bv = &self.nodes[bias.0].value;
        let value = self.nodes[a.0]
            .value
            .chunks(c.max(1))
            .flat_map(|row| row.iter().zip(bv).map(|(x, y)| x + y))
            .collect();
        self.push(r, c, value, Op::AddRow(a, bias))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let (r, c) = self.dims(a);
        let value = self.nodes[a.0].value.iter().map(|x| x * factor).collect();
        self.push(r, c, value, Op::Scale(a, factor))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (r, c) = self.dims(a);
        let value = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        self.push(r, c, value, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        self.map(a, elu_scalar, Op::Elu(a))
    }

    /// Elementwise product with a constant (used for dropout masks).
    pub fn mul_const(&mut self, a: Var, factors: Vec<f64>) -> Var {
        let (r, c) = self.dims(a);
        assert_eq!(factors.len(), r * c, "mul_const dims");
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&factors)
            .map(|(x, f)| x * f)
            .collect();
        self.push(r, c, value, Op::MulConst(a, factors))
    }

    // ---- structure ----

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.rows(parts[0]);
        assert!(
            parts.iter().all(|&p| self.rows(p) == rows),
            "concat_cols rows"
        );
        let cols: usize = parts.iter().map(|&p| self.cols(p)).sum();
        let mut value = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                value.extend_from_slice(self.row_values(p, r));
            }
        }
        self.push(rows, cols, value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let (r, c) = self.dims(a);
        assert!(start + len <= c, "slice_cols out of range");
        let src = &self.nodes[a.0].value;
        let mut value = Vec::with_capacity(r * len);
        for row in 0..r {
            value.extend_from_slice(&src[row * c + start..row * c + start + len]);
        }
        self.push(r, len, value, Op::SliceCols(a, start))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.cols(parts[0]);
        assert!(
            parts.iter().all(|&p| self.cols(p) == cols),
            "concat_rows cols"
        );
        let rows: usize = parts.iter().map(|&p| self.rows(p)).sum();
        let mut value = Vec::with_capacity(rows * cols);
        for &p in parts {
            value.extend_from_slice(&self.nodes[p.0].value);
        }
        self.push(rows, cols, value, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let (r, c) = self.dims(a);
        assert!(start + len <= r, "slice_rows out of range");
        if start == 0 && len == r {
            return a;
        }
        let value = self.nodes[a.0].value[start * c..(start + len) * c].to_vec();
        self.push(len, c, value, Op::SliceRows(a, start))
    }

    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Var {
        let (r, c) = self.dims(a);
        let src = &self.nodes[a.0].value;
        let mut value = Vec::with_capacity(index.len() * c);
        for &i in index {
            assert!(i < r, "gather_rows index {i} >= {r}");
            value.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        self.push(index.len(), c, value, Op::GatherRows(a, index.to_vec()))
    }

    // ---- reductions and probability ----

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let mut value = vec![0.0; c];
        for row in self.nodes[a.0].value.chunks(c.max(1)).take(r) {
            for (o, x) in value.iter_mut().zip(row) {
                *o += x;
            }
        }
        self.push(1, c, value, Op::SumRows(a))
    }

    /// Row-wise softmax. Masked entries (`false`) get probability exactly 0.
    pub fn softmax_rows(&mut self, a: Var, mask: Option<Vec<bool>>) -> Result<Var> {
        let (r, c) = self.dims(a);
        if let Some(m) = &mask {
            if m.len() != r * c {
                return Err(Error::Shape(format!("mask of {} for {r}x{c}", m.len())));
            }
        }
        let mut value = vec![0.0; r * c];
        {
            let src = &self.nodes[a.0].value;
            for row in 0..r {
                let rm = mask.as_ref().map(|m| &m[row * c..(row + 1) * c]);
                softmax_masked_row(
                    &src[row * c..(row + 1) * c],
                    rm,
                    &mut value[row * c..(row + 1) * c],
                    row,
                )?;
            }
        }
        Ok(self.push(r, c, value, Op::SoftmaxRows(a)))
    }

    /// Per-row negative log-likelihood of `targets` under a (masked) softmax
    /// of `logits`. Returns an `rows x 1` column.
    pub fn nll_rows(
        &mut self,
        logits: Var,
        mask: Option<&[bool]>,
        targets: &[usize],
    ) -> Result<Var> {
        let (r, c) = self.dims(logits);
        if targets.len() != r {
            return Err(Error::Shape(format!(
                "{} targets for {r} rows",
                targets.len()
            )));
        }
        if let Some(m) = mask {
            if m.len() != r * c {
                return Err(Error::Shape(format!("mask of {} for {r}x{c}", m.len())));
            }
        }
        let mut probs = vec![0.0; r * c];
        let mut out = vec![0.0; r];
        let src = &self.nodes[logits.0].value;
        for row in 0..r {
            let rm = mask.map(|m| &m[row * c..(row + 1) * c]);
            let t = targets[row];
            if t >= c || rm.is_some_and(|m| !m[t]) {
                return Err(Error::InvalidTarget { row, target: t });
            }
            let lse = softmax_masked_row(
                &src[row * c..(row + 1) * c],
                rm,
                &mut probs[row * c..(row + 1) * c],
                row,
            )?;
            out[row] = lse - src[row * c + t];
        }
        Ok(self.push(
            r,
            1,
            out,
            Op::NllRows {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    // ---- fused model ops ----

    /// GRU gating given pre-activations `gx = x W + b_x`, `gh = h U + b_h`
    /// (each `rows x 3h`, gate order reset, update, candidate) and the
    /// previous state `h`. Returns `(1 - z) * n + z * h`.
    pub fn gru_gates(&mut self, gx: Var, gh: Var, h: Var) -> Var {
        let (rows, hd) = self.dims(h);
        assert_eq!(self.dims(gx), (rows, 3 * hd), "gru gx dims");
        assert_eq!(self.dims(gh), (rows, 3 * hd), "gru gh dims");
        let gxv = &self.nodes[gx.0].value;
        let ghv = &self.nodes[gh.0].value;
        let hv = &self.nodes[h.0].value;
        let mut cache = vec![0.0; rows * 3 * hd];
        let mut out = vec![0.0; rows * hd];
        for row in 0..rows {
            let x = &gxv[row * 3 * hd..(row + 1) * 3 * hd];
            let g = &ghv[row * 3 * hd..(row + 1) * 3 * hd];
            let cr = &mut cache[row * 3 * hd..(row + 1) * 3 * hd];
            for u in 0..hd {
                let r = sigmoid(x[u] + g[u]);
                let z = sigmoid(x[hd + u] + g[hd + u]);
                let n = (x[2 * hd + u] + r * g[2 * hd + u]).tanh();
                cr[u] = r;
                cr[hd + u] = z;
                cr[2 * hd + u] = n;
                let hp = hv[row * hd + u];
                out[row * hd + u] = n + z * (hp - n);
            }
        }
        self.push(rows, hd, out, Op::GruGates { gx, gh, h, cache })
    }

    /// Partial-tree fusion: for each row `t`, `M = [p_t; e_t; s_t]`,
    /// `A = softmax(M M^T) M` (row softmax), output is the sum of `A`'s rows.
    pub fn fuse3(&mut self, p: Var, e: Var, s: Var) -> Var {
        let (rows, d) = self.dims(e);
        assert_eq!(self.dims(p), (rows, d), "fuse3 parent dims");
        assert_eq!(self.dims(s), (rows, d), "fuse3 sibling dims");
        let mut attn = vec![0.0; rows * 9];
        let mut out = vec![0.0; rows * d];
        for t in 0..rows {
            let m = [
                &self.nodes[p.0].value[t * d..(t + 1) * d],
                &self.nodes[e.0].value[t * d..(t + 1) * d],
                &self.nodes[s.0].value[t * d..(t + 1) * d],
            ];
            let a = &mut attn[t * 9..(t + 1) * 9];
            for r in 0..3 {
                let mut g = [0.0; 3];
                for c in 0..3 {
                    g[c] = m[r].iter().zip(m[c]).map(|(x, y)| x * y).sum();
                }
                softmax_masked_row(&g, None, &mut a[r * 3..r * 3 + 3], r)
                    .expect("unmasked softmax");
            }
            let o = &mut out[t * d..(t + 1) * d];
            for c in 0..3 {
                let w = a[c] + a[3 + c] + a[6 + c];
                for (ov, mv) in o.iter_mut().zip(m[c]) {
                    *ov += w * mv;
                }
            }
        }
        self.push(rows, d, out, Op::Fuse3 { p, e, s, attn })
    }

    /// `out[n, r] = sum_b z[n, b * groups + r] * c[n, b]`; with
    /// `z = c_left W` for `W` laid out `d x (d * groups)` this is the
    /// bilinear term of a bi-affine scorer.
    pub fn group_dot(&mut self, z: Var, c: Var, groups: usize) -> Var {
        let (rows, d) = self.dims(c);
        assert_eq!(self.dims(z), (rows, d * groups), "group_dot dims");
        let zv = &self.nodes[z.0].value;
        let cv = &self.nodes[c.0].value;
        let mut out = vec![0.0; rows * groups];
        for n in 0..rows {
            let zr = &zv[n * d * groups..(n + 1) * d * groups];
            let o = &mut out[n * groups..(n + 1) * groups];
            for (b, &cb) in cv[n * d..(n + 1) * d].iter().enumerate() {
                for (ov, zz) in o.iter_mut().zip(&zr[b * groups..(b + 1) * groups]) {
                    *ov += zz * cb;
                }
            }
        }
        self.push(rows, groups, out, Op::GroupDot { z, c, groups })
    }

    // ---- backward ----

    /// Backpropagates from `root`, seeding its gradient with ones. Gradients
    /// are kept for leaves and parameters only.
    pub fn backward(&mut self, root: Var) {
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        grads[root.0] = vec![1.0; self.nodes[root.0].value.len()];
        for i in (0..=root.0).rev() {
            if grads[i].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            self.backprop_node(i, &g, &mut grads);
            if matches!(self.nodes[i].op, Op::Leaf | Op::Param) {
                grads[i] = g;
            }
        }
        self.grads = grads;
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads
            .get(v.0)
            .filter(|g| !g.is_empty())
            .map(Vec::as_slice)
    }

    /// Collects parameter gradients from the last backward pass.
    pub fn param_grads(&self, store: &ParamStore) -> Grads {
        let mut out = Grads::zeros_like(store);
        for (&id, &v) in &self.params {
            if let Some(g) = self.grad(v) {
                out.set(id.index(), g.to_vec());
            }
        }
        out
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Vec<f64>]) {
        let nodes = &self.nodes;
        let node = &nodes[i];
        let acc = |grads: &mut [Vec<f64>], v: Var| -> usize {
            if grads[v.0].is_empty() {
                grads[v.0] = vec![0.0; nodes[v.0].value.len()];
            }
            v.0
        };
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul { a, b, ta, tb } => {
                let (ar, ac) = (nodes[a.0].rows, nodes[a.0].cols);
                let (br, bc) = (nodes[b.0].rows, nodes[b.0].cols);
                let (m, k, sa) = view(ar, ac, *ta);
                let (_, n, sb) = view(br, bc, *tb);
                // d op(a) = g * op(b)^T
                let ia = acc(grads, *a);
                let dst = if *ta { (1, ac) } else { (ac, 1) };
                gemm(
                    m,
                    n,
                    k,
                    g,
                    (n, 1),
                    &nodes[b.0].value,
                    (sb.1, sb.0),
                    &mut grads[ia],
                    dst,
                    1.0,
                );
                // d op(b) = op(a)^T * g
                let ib = acc(grads, *b);
                let dst = if *tb { (1, bc) } else { (bc, 1) };
                gemm(
                    k,
                    m,
                    n,
                    &nodes[a.0].value,
                    (sa.1, sa.0),
                    g,
                    (n, 1),
                    &mut grads[ib],
                    dst,
                    1.0,
                );
            }
            Op::Add(a, b) => {
                let ia = acc(grads, *a);
                add_into(&mut grads[ia], g);
                let ib = acc(grads, *b);
                add_into(&mut grads[ib], g);
            }
            Op::Sub(a, b) => {
                let ia = acc(grads, *a);
                add_into(&mut grads[ia], g);
                let ib = acc(grads, *b);
                for (d, x) in grads[ib].iter_mut().zip(g) {
                    *d -= x;
                }
            }
            Op::Mul(a, b) => {
                let ia = acc(grads, *a);
                for ((d, x), y) in grads[ia].iter_mut().zip(g).zip(&nodes[b.0].value) {
                    *d += x * y;
                }
                let ib = acc(grads, *b);
                for ((d, x), y) in grads[ib].iter_mut().zip(g).zip(&nodes[a.0].value) {
                    *d += x * y;
                }
            }
            Op::AddRow(a, bias) => {
                let ia = acc(grads, *a);
                add_into(&mut grads[ia], g);
                let c = node.cols;
                let ib = acc(grads, *bias);
                for row in g.chunks(c.max(1)) {
                    add_into(&mut grads[ib], row);
                }
            }
            Op::Scale(a, f) => {
                let ia = acc(grads, *a);
                for (d, x) in grads[ia].iter_mut().zip(g) {
                    *d += f * x;
                }
            }
            Op::Sigmoid(a) => {
                let ia = acc(grads, *a);
                for ((d, x), y) in grads[ia].iter_mut().zip(g).zip(&node.value) {
                    *d += x * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                let ia = acc(grads, *a);
                for ((d, x), y) in grads[ia].iter_mut().zip(g).zip(&node.value) {
                    *d += x * (1.0 - y * y);
                }
            }
            Op::Elu(a) => {
                let ia = acc(grads, *a);
                for (((d, x), y), inp) in grads[ia]
                    .iter_mut()
                    .zip(g)
                    .zip(&node.value)
                    .zip(&nodes[a.0].value)
                {
                    *d += if *inp >= 0.0 { *x } else { x * (y + 1.0) };
                }
            }
            Op::MulConst(a, f) => {
                let ia = acc(grads, *a);
                for ((d, x), y) in grads[ia].iter_mut().zip(g).zip(f) {
                    *d += x * y;
                }
            }
            Op::ConcatCols(parts) => {
                let rows = node.rows;
                let mut offset = 0;
                for &p in parts {
                    let pc = nodes[p.0].cols;
                    let ip = acc(grads, p);
                    for r in 0..rows {
                        let src = &g[r * node.cols + offset..r * node.cols + offset + pc];
                        add_into(&mut grads[ip][r * pc..(r + 1) * pc], src);
                    }
                    offset += pc;
                }
            }
            Op::SliceCols(a, start) => {
                let ac = nodes[a.0].cols;
                let ia = acc(grads, *a);
                for r in 0..node.rows {
                    add_into(
                        &mut grads[ia][r * ac + start..r * ac + start + node.cols],
                        &g[r * node.cols..(r + 1) * node.cols],
                    );
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = nodes[p.0].value.len();
                    let ip = acc(grads, p);
                    add_into(&mut grads[ip], &g[offset..offset + n]);
                    offset += n;
                }
            }
            Op::SliceRows(a, start) => {
                let c = node.cols;
                let ia = acc(grads, *a);
                add_into(&mut grads[ia][start * c..start * c + g.len()], g);
            }
            Op::GatherRows(a, index) => {
                let c = node.cols;
                let ia = acc(grads, *a);
                for (r, &src) in index.iter().enumerate() {
                    add_into(
                        &mut grads[ia][src * c..(src + 1) * c],
                        &g[r * c..(r + 1) * c],
                    );
                }
            }
            Op::SoftmaxRows(a) => {
                let c = node.cols;
                let ia = acc(grads, *a);
                for r in 0..node.rows {
                    let p = &node.value[r * c..(r + 1) * c];
                    let gr = &g[r * c..(r + 1) * c];
                    let dot: f64 = p.iter().zip(gr).map(|(x, y)| x * y).sum();
                    for ((d, pv), gv) in grads[ia][r * c..(r + 1) * c].iter_mut().zip(p).zip(gr) {
                        *d += pv * (gv - dot);
                    }
                }
            }
            Op::NllRows {
                logits,
                targets,
                probs,
            } => {
                let c = nodes[logits.0].cols;
                let ia = acc(grads, *logits);
                for (r, &t) in targets.iter().enumerate() {
                    let d = &mut grads[ia][r * c..(r + 1) * c];
                    for (dv, pv) in d.iter_mut().zip(&probs[r * c..(r + 1) * c]) {
                        *dv += g[r] * pv;
                    }
                    d[t] -= g[r];
                }
            }
            Op::Sum(a) => {
                let ia = acc(grads, *a);
                for d in grads[ia].iter_mut() {
                    *d += g[0];
                }
            }
            Op::SumRows(a) => {
                let c = node.cols;
                let ia = acc(grads, *a);
                for row in grads[ia].chunks_mut(c.max(1)) {
                    add_into(row, g);
                }
            }
            Op::GruGates { gx, gh, h, cache } => {
                let hd = node.cols;
                let rows = node.rows;
                let hv = &nodes[h.0].value;
                let ghv = &nodes[gh.0].value;
                let mut dgx = vec![0.0; rows * 3 * hd];
                let mut dgh = vec![0.0; rows * 3 * hd];
                let mut dh = vec![0.0; rows * hd];
                for row in 0..rows {
                    let cr = &cache[row * 3 * hd..(row + 1) * 3 * hd];
                    let ghr = &ghv[row * 3 * hd..(row + 1) * 3 * hd];
                    for u in 0..hd {
                        let (r, z, n) = (cr[u], cr[hd + u], cr[2 * hd + u]);
                        let go = g[row * hd + u];
                        let hp = hv[row * hd + u];
                        let dn = go * (1.0 - z);
                        let dz = go * (hp - n);
                        dh[row * hd + u] = go * z;
                        let dpre_n = dn * (1.0 - n * n);
                        let dr = dpre_n * ghr[2 * hd + u];
                        let dpre_r = dr * r * (1.0 - r);
                        let dpre_z = dz * z * (1.0 - z);
                        let base = row * 3 * hd;
                        dgx[base + u] = dpre_r;
                        dgh[base + u] = dpre_r;
                        dgx[base + hd + u] = dpre_z;
                        dgh[base + hd + u] = dpre_z;
                        dgx[base + 2 * hd + u] = dpre_n;
                        dgh[base + 2 * hd + u] = dpre_n * r;
                    }
                }
                let i = acc(grads, *gx);
                add_into(&mut grads[i], &dgx);
                let i = acc(grads, *gh);
                add_into(&mut grads[i], &dgh);
                let i = acc(grads, *h);
                add_into(&mut grads[i], &dh);
            }
            Op::Fuse3 { p, e, s, attn } => {
                let d = node.cols;
                let vars = [*p, *e, *s];
                let mut dm = [
                    vec![0.0; node.value.len()],
                    vec![0.0; node.value.len()],
                    vec![0.0; node.value.len()],
                ];
                for t in 0..node.rows {
                    let m: Vec<&[f64]> = vars
                        .iter()
                        .map(|v| &nodes[v.0].value[t * d..(t + 1) * d])
                        .collect();
                    let a = &attn[t * 9..(t + 1) * 9];
                    let gt = &g[t * d..(t + 1) * d];
                    let mut w = [0.0; 3];
                    let mut dw = [0.0; 3];
                    for c in 0..3 {
                        w[c] = a[c] + a[3 + c] + a[6 + c];
                        dw[c] = gt.iter().zip(m[c]).map(|(x, y)| x * y).sum();
                    }
                    let mut dg = [[0.0; 3]; 3];
                    for r in 0..3 {
                        let mean: f64 = (0..3).map(|c| a[r * 3 + c] * dw[c]).sum();
                        for c in 0..3 {
                            dg[r][c] = a[r * 3 + c] * (dw[c] - mean);
                        }
                    }
                    for c in 0..3 {
                        let out = &mut dm[c][t * d..(t + 1) * d];
                        for (o, x) in out.iter_mut().zip(gt) {
                            *o += w[c] * x;
                        }
                        for r in 0..3 {
                            let coef = dg[r][c] + dg[c][r];
                            for (o, x) in out.iter_mut().zip(m[r]) {
                                *o += coef * x;
                            }
                        }
                    }
                }
                for (v, dv) in vars.iter().zip(&dm) {
                    let i = acc(grads, *v);
                    add_into(&mut grads[i], dv);
                }
            }
            Op::GroupDot { z, c, groups } => {
                let d = nodes[c.0].cols;
                let zv = &nodes[z.0].value;
                let cv = &nodes[c.0].value;
                let iz = acc(grads, *z);
                for n in 0..node.rows {
                    let gr = &g[n * groups..(n + 1) * groups];
                    for b in 0..d {
                        let cb = cv[n * d + b];
                        let dz = &mut grads[iz][n * d * groups + b * groups..][..*groups];
                        for (dv, gv) in dz.iter_mut().zip(gr) {
                            *dv += gv * cb;
                        }
                    }
                }
                let ic = acc(grads, *c);
                for n in 0..node.rows {
                    let gr = &g[n * groups..(n + 1) * groups];
                    for b in 0..d {
                        let zr = &zv[n * d * groups + b * groups..][..*groups];
                        grads[ic][n * d + b] += zr.iter().zip(gr).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
