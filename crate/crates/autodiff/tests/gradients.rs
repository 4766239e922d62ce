use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstptr_autodiff::{
    check_gradients, gru_cell, masked_softmax, GradCheckOptions, GruCellParams, ParamStore, Tape,
    Tensor,
};

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::new(shape, data).unwrap()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar GRU step, written element by element.
fn gru_reference(x: &[f64], h: &[f64], p: &GruCellParams) -> Vec<f64> {
    let hs = h.len();
    let wi = p.w_input.data();
    let wh = p.w_hidden.data();
    let bi = p.b_input.data();
    let bh = p.b_hidden.data();
    let pre = |gate: usize, u: usize| -> (f64, f64) {
        let col = gate * hs + u;
        let mut a = bi[col];
        for (k, xv) in x.iter().enumerate() {
            a += xv * wi[k * 3 * hs + col];
        }
        let mut b = bh[col];
        for (k, hv) in h.iter().enumerate() {
            b += hv * wh[k * 3 * hs + col];
        }
        (a, b)
    };
    (0..hs)
        .map(|u| {
            let (xr, hr) = pre(0, u);
            let (xz, hz) = pre(1, u);
            let (xn, hn) = pre(2, u);
            let r = sig(xr + hr);
            let z = sig(xz + hz);
            let n = (xn + r * hn).tanh();
            (1.0 - z) * n + z * h[u]
        })
        .collect()
}

fn random_gru(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> GruCellParams {
    GruCellParams {
        w_input: random_tensor(rng, vec![input, 3 * hidden], 0.8),
        b_input: random_tensor(rng, vec![3 * hidden], 0.5),
        w_hidden: random_tensor(rng, vec![hidden, 3 * hidden], 0.8),
        b_hidden: random_tensor(rng, vec![3 * hidden], 0.5),
    }
}

#[test]
fn gru_cell_matches_scalar_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let p = random_gru(&mut rng, 4, 4);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = gru_cell(&x, &h, &p).unwrap();
        let want = gru_reference(&x, &h, &p);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            assert!(a.abs() < 1.0);
        }
    }
}

#[test]
fn gru_cell_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_gru(&mut rng, 4, 4);
    let mut store = ParamStore::new();
    let wi = store.insert("w_input", p.w_input).unwrap();
    let bi = store.insert("b_input", p.b_input).unwrap();
    let wh = store.insert("w_hidden", p.w_hidden).unwrap();
    let bh = store.insert("b_hidden", p.b_hidden).unwrap();
    let x = store
        .insert("x", random_tensor(&mut rng, vec![2, 4], 1.0))
        .unwrap();
    let h = store
        .insert("h", random_tensor(&mut rng, vec![2, 4], 0.9))
        .unwrap();
    let probe = random_tensor(&mut rng, vec![2, 4], 1.0);
    let report = check_gradients(
        &mut store,
        |tape, s| {
            let vars = [wi, bi, wh, bh, x, h].map(|id| tape.param(s, id));
            let out = rstptr_autodiff::gru_step(
                tape, vars[4], vars[5], vars[0], vars[1], vars[2], vars[3],
            );
            let c = tape.tensor(&probe);
            let prod = tape.mul(out, c);
            tape.sum(prod)
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn softmax_cross_entropy_composite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let logits = store
        .insert("logits", random_tensor(&mut rng, vec![1, 5], 2.0))
        .unwrap();
    let report = check_gradients(
        &mut store,
        |tape, s| {
            let l = tape.param(s, logits);
            let nll = tape.nll_rows(l, None, &[3]).unwrap();
            tape.sum(nll)
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.max_relative_error < 1e-6, "{report:?}");
}

#[test]
fn masked_pointer_loss_and_softmax_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut store = ParamStore::new();
    let scores = store
        .insert("scores", random_tensor(&mut rng, vec![3, 4], 2.0))
        .unwrap();
    let mask = vec![
        true, true, true, true, //
        false, true, true, true, //
        false, false, true, true,
    ];
    let probe = random_tensor(&mut rng, vec![3, 4], 1.0);
    let report = check_gradients(
        &mut store,
        |tape, s| {
            let v = tape.param(s, scores);
            let nll = tape.nll_rows(v, Some(&mask), &[0, 2, 3]).unwrap();
            let p = tape.softmax_rows(v, Some(mask.clone())).unwrap();
            let c = tape.tensor(&probe);
            let weighted = tape.mul(p, c);
            let a = tape.sum(nll);
            let b = tape.sum(weighted);
            tape.add(a, b)
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{report:?}");
}

/// Explicit 3x3 self-attention: rows of softmax(M M^T) M, summed.
fn fuse_reference(p: &[f64], e: &[f64], s: &[f64]) -> Vec<f64> {
    let m = [p, e, s];
    let d = p.len();
    let mut out = vec![0.0; d];
    for r in 0..3 {
        let g: Vec<f64> = (0..3)
            .map(|c| (0..d).map(|k| m[r][k] * m[c][k]).sum::<f64>())
            .collect();
        let z: f64 = g.iter().map(|v| v.exp()).sum();
        for c in 0..3 {
            let a = g[c].exp() / z;
            for k in 0..d {
                out[k] += a * m[c][k];
            }
        }
    }
    out
}

#[test]
fn fusion_identical_rows_triples_the_vector() {
    let v = [0.3, -1.2, 2.0];
    let mut tape = Tape::new();
    let a = tape.row(&v);
    let out = tape.fuse3(a, a, a);
    for (o, x) in tape.value(out).iter().zip(v) {
        assert!((o - 3.0 * x).abs() < 1e-12);
    }
}

#[test]
fn fusion_matches_small_matrix_oracle() {
    let cases: [[[f64; 3]; 3]; 2] = [
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        [[0.5, -0.2, 1.0], [0.1, 0.9, -0.4], [-0.7, 0.3, 0.2]],
    ];
    for [p, e, s] in cases {
        let mut tape = Tape::new();
        let (pv, ev, sv) = (tape.row(&p), tape.row(&e), tape.row(&s));
        let out = tape.fuse3(pv, ev, sv);
        let want = fuse_reference(&p, &e, &s);
        for (a, b) in tape.value(out).iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
    // orthonormal rows: every column weight is (e + 2) / (e + 2) = 1
    let mut tape = Tape::new();
    let rows = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].map(|r| tape.row(&r));
    let out = tape.fuse3(rows[0], rows[1], rows[2]);
    for v in tape.value(out) {
        assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fusion_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut store = ParamStore::new();
    let ids = ["p", "e", "s"].map(|n| {
        store
            .insert(n, random_tensor(&mut rng, vec![3, 4], 1.0))
            .unwrap()
    });
    let probe = random_tensor(&mut rng, vec![3, 4], 1.0);
    let report = check_gradients(
        &mut store,
        |tape, st| {
            let v = ids.map(|id| tape.param(st, id));
            let out = tape.fuse3(v[0], v[1], v[2]);
            let c = tape.tensor(&probe);
            let prod = tape.mul(out, c);
            tape.sum(prod)
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn structural_and_elementwise_ops_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    let a = store
        .insert("a", random_tensor(&mut rng, vec![4, 3], 1.0))
        .unwrap();
    let b = store
        .insert("b", random_tensor(&mut rng, vec![3, 5], 1.0))
        .unwrap();
    let c = store
        .insert("c", random_tensor(&mut rng, vec![2, 5], 1.0))
        .unwrap();
    let bias = store
        .insert("bias", random_tensor(&mut rng, vec![5], 1.0))
        .unwrap();
    let w = store
        .insert("w", random_tensor(&mut rng, vec![2, 2 * 3], 1.0))
        .unwrap();
    let report = check_gradients(
        &mut store,
        |tape, s| {
            let (a, b, c, bias, w) = (
                tape.param(s, a),
                tape.param(s, b),
                tape.param(s, c),
                tape.param(s, bias),
                tape.param(s, w),
            );
            let ab = tape.matmul(a, b); // 4x5
            let abb = tape.add_row(ab, bias);
            let t = tape.tanh(abb);
            let cb = tape.matmul_bt(c, t); // 2x4
            let ta = tape.matmul_t(a, true, a, false); // 3x3
            let e = tape.elu(cb);
            let sg = tape.sigmoid(ta);
            let g = tape.gather_rows(t, &[3, 0, 0, 2]);
            let sl = tape.slice_cols(g, 1, 3);
            let sr = tape.slice_rows(sl, 1, 2);
            let cc = tape.concat_cols(&[sr, e]); // 2x7
            let cr = tape.concat_rows(&[cc, cc]);
            let sub = tape.sub(cr, cr);
            let prod = tape.mul(cr, cr);
            let sum1 = tape.sum_rows(prod);
            let scaled = tape.scale(sum1, 0.5);
            let dropped =
                tape.mul_const(sg, vec![1.25, 0.0, 1.25, 1.25, 1.25, 0.0, 0.0, 1.25, 1.25]);
            let left = tape.slice_cols(e, 0, 2);
            let z = tape.matmul(left, w); // 2x6
            let right = tape.slice_cols(e, 2, 2);
            let gd = tape.group_dot(z, right, 3);
            let parts = [
                tape.sum(scaled),
                tape.sum(dropped),
                tape.sum(sub),
                tape.sum(gd),
            ];
            let x = tape.add(parts[0], parts[1]);
            let y = tape.add(parts[2], parts[3]);
            tape.add(x, y)
        },
        &GradCheckOptions::default(),
    )
    .unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn dropout_mask_has_unit_expectation() {
    // inverted dropout: keep with prob 1 - p and scale by 1 / (1 - p)
    let p = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 200_000;
    let mask: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < p {
                0.0
            } else {
                1.0 / (1.0 - p)
            }
        })
        .collect();
    let mut tape = Tape::new();
    let x = tape.constant(1, n, vec![1.0; n]);
    let y = tape.mul_const(x, mask);
    let mean = tape.value(y).iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
}

proptest! {
    #[test]
    fn masked_softmax_is_a_distribution(
        entries in prop::collection::vec((-50.0f64..50.0, any::<bool>()), 1..20)
    ) {
        let mut mask: Vec<bool> = entries.iter().map(|e| e.1).collect();
        mask[0] = true;
        let scores: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let p = masked_softmax(&scores, &mask).unwrap();
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for (v, m) in p.iter().zip(&mask) {
            prop_assert!(*v >= 0.0);
            if !m { prop_assert_eq!(*v, 0.0); }
        }
    }
}
