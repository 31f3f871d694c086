//! Hierarchical binary visual vocabularies for bag-of-words place recognition.
//!
//! Three ways to grow the tree are provided: k-majority at every node (the DBoW2
//! baseline), BRB-KMeans at every node, and the global real-valued flow where descriptors
//! are relaxed to reals once at the root, clustered with ordinary k-means all the way
//! down, and thresholded back to binary only to produce node centroids. Trained
//! vocabularies can be written in the ORB-SLAM text format and exercised through BoW
//! scoring, an inverted-index database, and quantization/retrieval reports.

pub mod bow;
pub mod clustering;
pub mod descriptor;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod vocabulary;

pub use bow::{score_l1, transform, BowVector, Match, QueryResult, RetrievalDatabase};
pub use clustering::{
    brb_kmeans, kmajority, kmeanspp_seed, lloyd_real, ClusterConfig, ClusterResult,
};
pub use descriptor::{
    binarize, euclidean_sq, hamming, majority_centroid, real_mean, realize, BinaryDescriptor,
    DescriptorSet, RealDescriptor,
};
pub use error::{Error, FormatError, Result};
pub use evaluation::{
    compare_strategies, quantization_report, retrieval_report, synth_sequence, QuantReport,
    RetrievalReport, SynthConfig, SynthSequence,
};
pub use vocabulary::{
    small_node_rule, train, train_with_members, Strategy, TrainConfig, TrainedVocabulary,
    VocabNode, Vocabulary, WordHit,
};
