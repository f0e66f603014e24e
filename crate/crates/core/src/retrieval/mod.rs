//! Cosine ranking, Top-k accuracy and one-to-one (assignment) retrieval.

mod evaluate;
mod hungarian;
mod similarity;

pub use evaluate::{
    evaluate_retrieval, protocol_accuracies, retrieval_similarity, Protocol, RetrievalMetrics,
    HUNGARIAN_TOPK_RULE,
};
pub use hungarian::{hungarian_assign, hungarian_rounds, hungarian_top_k, Assignment};
pub use similarity::{cosine_matrix, top_k_accuracy, SimilarityMatrix};
