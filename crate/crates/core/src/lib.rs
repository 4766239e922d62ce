//! Sentence-level discourse analysis with pointer networks: a segmenter that
//! finds elementary discourse unit (EDU) boundaries and a top-down parser
//! that builds labeled RST trees, sharing one BiGRU encoder.

pub mod bench;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod inference;
pub mod model;
pub mod nn;
pub mod parser;
pub mod relations;
pub mod segmenter;
pub mod synth;
pub mod training;
pub mod tree;
pub mod vocab;

pub use corpus::Sentence;
pub use error::{Error, Result};
pub use inference::{Analysis, Segmentation, Task};
pub use model::{Model, ModelConfig};
pub use relations::{LabelSet, Nuclearity, RelationInventory, RelationLabel};
pub use training::{Mode, TrainConfig};
pub use tree::{DiscourseTree, EduSpan};
