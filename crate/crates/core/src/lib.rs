//! Words-as-classifiers grounding engine.
//!
//! Every word is its own logistic classifier over a small, color-free
//! feature vector. Word responses compose multiplicatively into a
//! distribution over candidate objects, which drives a partially observable
//! "fetch" game: the agent moves between inspection stations, sees at most
//! two objects at a time, and has to commit to a referent, possibly before
//! it has seen every candidate.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! session service live in the `wac` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod arena;
pub mod classifier;
pub mod compose;
pub mod curriculum;
pub mod episode;
pub mod error;
pub mod features;
pub mod lexicon;
pub mod rng;
pub mod speaker;

pub use arena::{build_arena, AgentState, Advance, Arena, ArenaConfig, FramedFeatures, ObjectSpec, Percept, SeenObject, Shape, ShapeChoice, SimObject, StationCount};
pub use classifier::{Example, TrainConfig, WordClassifier, BUFFER_CAPACITY};
pub use compose::{resolve, score_candidates, tokenize, CandidateDistribution, CandidateEntry, Decision, Resolution, Thresholds, Utterance};
pub use curriculum::{draw_scene, run_curriculum, CurriculumPlan, CurriculumSpec, EpisodeRecord, Metrics, WindowAccuracy, WordAccuracy, WordCounts};
pub use episode::{
    replay, run_episode, CommitRecord, Episode, EpisodeLedger, EpisodeResult, EpisodeSettings, Feedback, FeedbackSource, LedgerEvent,
    Mode, OracleFeedback, StepOutcome, TokenDelta,
};
pub use error::{Error, Result};
pub use features::{Feature, FeatureVector, Frame, ObjectId, Pose, FEATURE_DIM};
pub use lexicon::{merge_lexicons, normalize_token, Lexicon, SCHEMA_VERSION};
pub use speaker::{generate, label_check, Comparison, GenerateOptions, GeneratedExpression, Grammar, Predicate};
