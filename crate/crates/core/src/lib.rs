//! Machine learning over automation-engineering code.
//!
//! The crate covers three tasks on corpora of Arduino sketches and PLC (SCL)
//! function blocks:
//!
//! * **code classification**: lex and extract feature channels
//!   ([`featex`]), embed them with tf-idf or paragraph vectors ([`embed`]) and
//!   train a multinomial logistic regression ([`classify`]);
//! * **code search**: exact cosine k-nearest-neighbour retrieval over document
//!   embeddings ([`search`]);
//! * **hardware completion**: score missing component categories of a partial
//!   hardware configuration with an exact Bayesian network or a shallow
//!   autoencoder and evaluate with leave-one-out precision@k ([`hwrec`]).
//!
//! [`pipeline`] glues the stages together into the end-to-end runs used by the
//! CLI and the assistant service, and [`model_io`] defines the binary model
//! container every trained model is saved in.
//!
//! The runnable programs under `examples/` walk through each capability.

pub mod classify;
pub mod corpus;
pub mod embed;
pub mod featex;
pub mod hwrec;
pub mod model_io;
pub mod pipeline;
pub mod search;
pub mod util;

pub use classify::{EvalReport, LogRegModel};
pub use corpus::{CodeDocument, Corpus, Dialect, HardwareConfig, Level, SplitSpec, Taxonomy};
pub use embed::{Doc2VecModel, Doc2VecParams, DocVector, TfIdfModel};
pub use featex::{Channel, FeatureBundle, FeatureSetSpec};
pub use hwrec::{AutoencoderModel, BayesNet, PAtKReport};
pub use search::{Neighbor, SearchIndex};
