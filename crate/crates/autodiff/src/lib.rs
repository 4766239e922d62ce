//! Small dense `f64` compute kernel for training recurrent pointer networks:
//! a reverse-mode [`Tape`], the activation and attention primitives the
//! models need, finite-difference gradient checking, [`AdamState`], and a
//! flat binary checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod ops;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, write_checkpoint};
pub use error::{Error, Result};
pub use gradcheck::{check_gradients, GradCheckOptions, GradCheckReport};
pub use ops::{elu, gru_cell, gru_step, masked_softmax, GruCellParams};
pub use params::{Grads, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
