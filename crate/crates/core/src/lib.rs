//! Author profiling from tweets: corpus handling, a from-scratch GRU tweet
//! classifier, confidence-thresholded tweet-to-user aggregation, majority
//! vote ensembling, and per-task / joint accuracy.
//!
//! The recurrent network is generic over its float type (see [`Scalar`]);
//! the aliases below fix it to `f64` or `f32`.

pub mod aggregation;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod gru;
pub mod metrics;
pub mod predictions;
pub mod rng;
pub mod scalar;
pub mod synthetic;
pub mod textprep;

pub use aggregation::{
    aggregate_users, calibrate_threshold, user_majority, CalibrationResult, ThresholdGrid,
};
pub use corpus::{
    label_space, load_corpus, merge_corpora, save_corpus, split_by_user, LabelSpace, LabeledCorpus,
    Task, TweetRecord, UserProfile,
};
pub use ensemble::majority_vote;
pub use error::{Error, Result};
pub use metrics::{evaluate, joint_accuracy, task_accuracy, Accuracy, EvalReport};
pub use predictions::{
    read_predictions, read_user_predictions, write_predictions, write_user_predictions,
    PredictionSet, TweetPrediction, UserPredictionSet,
};
pub use scalar::Scalar;
pub use textprep::{build_vocab, encode, tokenize, EncodedSequence, Vocabulary};

pub type GruParamsF64 = gru::GruParams<f64>;
pub type GruParamsF32 = gru::GruParams<f32>;
pub type AdamStateF64 = gru::AdamState<f64>;
pub type AdamStateF32 = gru::AdamState<f32>;
pub type CheckpointF64 = gru::Checkpoint<f64>;
pub type CheckpointF32 = gru::Checkpoint<f32>;
pub type TrainOutcomeF64 = gru::TrainOutcome<f64>;
pub type TrainOutcomeF32 = gru::TrainOutcome<f32>;
