//! Compression of real-valued embeddings into binary Hamming codes.
//!
//! A [`CompressorModel`] encodes a `d`-dimensional embedding through two
//! dense layers into `b` pairwise softmax assignments; thresholding each
//! pair gives a `b`-bit [`BinaryCode`]. A linear decoder sums one codebook
//! column per pair to reconstruct the input, and the model is trained to
//! minimize that reconstruction error. Codes are then compared with
//! popcount Hamming distance for retrieval, similarity scoring and k-NN
//! classification.
//!
//! ```
//! use hamming_embed::{synthetic, train, TrainConfig};
//!
//! let (data, _, _) = synthetic::planted(8, 4, 64, 1).unwrap();
//! let cfg = TrainConfig { learning_rate: 1e-2, max_epochs: 20, ..Default::default() };
//! let (model, history) = train(&data, 8, 4, &cfg).unwrap();
//! assert_eq!(history.epochs_run, 20);
//!
//! let code = model.encode_code(&data.vector(0)).unwrap();
//! assert_eq!(code.nbits(), 4);
//! ```
//!
//! The guide in `book/` walks through each stage with runnable snippets.

pub mod code;
pub mod compressor;
pub mod embedding;
pub mod error;
pub mod io;
pub mod metrics;
pub mod records;
pub mod rng;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use code::{hamming, memory_report, pack_bits, BinaryCode, CodeIndex, MemoryReport, Neighbor};
pub use compressor::{
    binarize, decode, encode, encode_logits, encode_with_noise, expand_code, gumbel_softmax, sample_gumbel,
    CompressorModel, ForwardTrace, SoftAssignments,
};
pub use embedding::EmbeddingSet;
pub use error::{Error, Result};
pub use metrics::{
    avg_abs_correlation, avg_abs_correlation_codes, classification_error, cosine, eval_similarity, knn_classify,
    median_binarize, pearson, spearman, CorrelationReport, ScoredPair, ScoredPairSet,
};
pub use records::RecordMeta;
pub use rng::Rng;
pub use tensor::{Matrix, ScalarMap, Vector};
pub use training::{
    adam_step, backward, init_model, reconstruction_loss, train, AdamState, Gradients, StopReason, TrainConfig,
    TrainHistory,
};

// Compile and run the guide's code blocks as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/compressor.md")]
    mod compressor {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/codes.md")]
    mod codes {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
