//! Closed-form regularized matrix factorization and the gauge freedom that
//! makes cosine similarity of learned embeddings arbitrary.

pub mod analysis;
pub mod error;
pub mod io;
pub mod matrix;
pub mod remedies;
pub mod rescale;
pub mod similarity;
pub mod solvers;
pub mod synthgen;

pub use error::{Error, Result};
pub use matrix::{cosine_of_rows, normalize_rows, svd, DataMatrix, RowNormalizer, SvdFactors};
pub use solvers::{
    gradient_descent_oracle, objective1_loss, objective2_loss, predicted_scores, solve,
    solve_objective1, solve_objective2, EmbeddingPair, Objective, OracleConfig,
};
pub use analysis::{
    audit_full_rank, cluster_contrast, compare_configurations, default_plan, AuditReport,
    ClusterContrast, Comparison, FullRankReport, PlanEntry,
};
pub use remedies::{backprojected_item_cosine, backprojected_user_cosine, standardize, Standardization};
pub use rescale::{
    apply_rotation, apply_scaling, named_scaling, random_rotation, random_scaling, DiagonalScaling,
    RotationMatrix, ScalingFamily,
};
pub use similarity::{Metric, SimilarityKind, SimilarityMatrix};
