//! Primitive building blocks shared by the encoder and both decoders.

use crate::error::{Error, Result};
use crate::tape::{elu_scalar, Tape, Var};
use crate::tensor::Tensor;

/// Softmax restricted to `valid` positions; masked positions are exactly 0.
pub fn masked_softmax(scores: &[f64], valid: &[bool]) -> Result<Vec<f64>> {
    if scores.len() != valid.len() {
        return Err(Error::Shape(format!(
            "{} scores with {} mask entries",
            scores.len(),
            valid.len()
        )));
    }
    let mut tape = Tape::new();
    let s = tape.row(scores);
    let p = tape.softmax_rows(s, Some(valid.to_vec()))?;
    Ok(tape.value(p).to_vec())
}

pub fn elu(x: f64) -> f64 {
    elu_scalar(x)
}

/// Weights of one GRU cell. Gate order in the `3h` axis: reset, update,
/// candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCellParams {
    /// `input x 3h`
    pub w_input: Tensor,
    /// `1 x 3h`
    pub b_input: Tensor,
    /// `h x 3h`
    pub w_hidden: Tensor,
    /// `1 x 3h`
    pub b_hidden: Tensor,
}

impl GruCellParams {
    pub fn hidden_size(&self) -> usize {
        self.w_hidden.matrix_dims().0
    }

    pub fn input_size(&self) -> usize {
        self.w_input.matrix_dims().0
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden_size();
        let (_, wc) = self.w_input.matrix_dims();
        let ok = wc == 3 * h
            && self.w_hidden.matrix_dims() == (h, 3 * h)
            && self.b_input.len() == 3 * h
            && self.b_hidden.len() == 3 * h;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "inconsistent GRU parameters for hidden size {h}"
            )))
        }
    }
}

/// One GRU step on the tape for a batch of rows:
/// `r = s(x Wr + h Ur)`, `z = s(x Wz + h Uz)`, `n = tanh(x Wn + r * (h Un))`,
/// `h' = (1 - z) * n + z * h` (biases folded into each product).
pub fn gru_step(
    tape: &mut Tape,
    x: Var,
    h: Var,
    w_input: Var,
    b_input: Var,
    w_hidden: Var,
    b_hidden: Var,
) -> Var {
    let xw = tape.matmul(x, w_input);
    let gx = tape.add_row(xw, b_input);
    let hw = tape.matmul(h, w_hidden);
    let gh = tape.add_row(hw, b_hidden);
    tape.gru_gates(gx, gh, h)
}

/// Single GRU cell update on plain vectors.
pub fn gru_cell(input: &[f64], prev_state: &[f64], params: &GruCellParams) -> Result<Vec<f64>> {
    params.check()?;
    let h = params.hidden_size();
    if input.len() != params.input_size() || prev_state.len() != h {
        return Err(Error::Shape(format!(
            "GRU cell expects input {} and state {}, got {} and {}",
            params.input_size(),
            h,
            input.len(),
            prev_state.len()
        )));
    }
    let mut tape = Tape::new();
    let x = tape.row(input);
    let s = tape.row(prev_state);
    let wi = tape.tensor(&params.w_input);
    let bi = tape.tensor(&params.b_input);
    let wh = tape.tensor(&params.w_hidden);
    let bh = tape.tensor(&params.b_hidden);
    let out = gru_step(&mut tape, x, s, wi, bi, wh, bh);
    Ok(tape.value(out).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_softmax_uniform_on_equal_scores() {
        let p = masked_softmax(&[0.0, 0.0, 0.0], &[true; 3]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn masked_softmax_single_valid_position() {
        let p = masked_softmax(&[9.2, 5.0], &[true, false]).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn masked_softmax_all_masked_is_error() {
        let err = masked_softmax(&[1.0, 2.0], &[false, false]).unwrap_err();
        assert!(matches!(err, Error::EmptyDomain { .. }));
    }

    #[test]
    fn masked_softmax_matches_direct_normalization() {
        // exp(k) / (e + e^2 + e^3), evaluated independently
        let e = std::f64::consts::E;
        let z = e + e * e + e * e * e;
        let want = [e / z, e * e / z, e * e * e / z];
        let p = masked_softmax(&[1.0, 2.0, 3.0], &[true; 3]).unwrap();
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p[0] - 0.09003).abs() < 1e-5);
        assert!((p[1] - 0.24473).abs() < 1e-5);
        assert!((p[2] - 0.66524).abs() < 1e-5);
    }

    #[test]
    fn elu_values() {
        assert_eq!(elu(0.0), 0.0);
        assert_eq!(elu(2.5), 2.5);
        assert!((elu(-1.0) - (-0.632_120_558_828_557_7)).abs() < 1e-6);
    }

    #[test]
    fn gru_cell_zero_everything_is_zero() {
        let p = GruCellParams {
            w_input: Tensor::zeros(vec![3, 6]),
            b_input: Tensor::zeros(vec![6]),
            w_hidden: Tensor::zeros(vec![2, 6]),
            b_hidden: Tensor::zeros(vec![6]),
        };
        let out = gru_cell(&[0.0; 3], &[0.0; 2], &p).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn gru_cell_dimension_mismatch() {
        let p = GruCellParams {
            w_input: Tensor::zeros(vec![3, 6]),
            b_input: Tensor::zeros(vec![6]),
            w_hidden: Tensor::zeros(vec![2, 6]),
            b_hidden: Tensor::zeros(vec![6]),
        };
        assert!(matches!(
            gru_cell(&[0.0; 4], &[0.0; 2], &p),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            gru_cell(&[0.0; 3], &[0.0; 3], &p),
            Err(Error::Shape(_))
        ));
    }
}
