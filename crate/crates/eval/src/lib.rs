//! Verification scoring and evaluation for footstep biometrics.
//!
//! Scores live in [0, 1] and a claim is accepted when `score >= threshold`.
//! Rates are reported as percentages.

pub mod embedding;
pub mod io;
pub mod metrics;
pub mod overlap;
pub mod scores;
pub mod submission;

#[cfg(test)]
mod testutil;

pub use embedding::{
    claim_score, cohort_normalize, cohort_scores, cosine_similarity, logistic, match_score, z_norm, Embedding,
    Normalization, ReferenceGallery, ScoringError, Side, SubjectId, REFERENCES_PER_SIDE,
};
pub use metrics::{
    compute_eer, det_curve, eer_from_curve, evaluate, fmr100, stratified_eer, DetPoint, Eer, Fmr100, GroupBy,
    MetricsReport, StratifiedEer, StratumEer, FMR100_MIN_IMPOSTORS,
};
pub use overlap::{misclassification_overlap, misclassified, OverlapReport, PairOverlap, Region};
pub use scores::{
    accepts, accuracy_from_rates, rates_at_threshold, Label, MetricError, ProbeId, Rates, ScoreRecord, ScoreSet,
};
pub use submission::{parse_submission, Submission, SubmissionError, SubmissionFile, SUBMISSION_SCORES};
