//! Topic-guided diversity sampling for stance detection corpora, a small
//! contrastive head trainer over frozen embeddings, and imbalance
//! diagnostics for comparing a subset against its source corpus.

pub mod corpus;
pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod pipeline;
pub mod sampler;
pub mod synthetic;
pub mod topic;
pub mod trainer;

pub use corpus::{Corpus, Document, StanceLabel};
pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
pub use sampler::{sample_topic_efficient, AvgMode, SampledSubset, SamplerConfig};
pub use topic::{fit_spherical_kmeans, TopicClustering};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
