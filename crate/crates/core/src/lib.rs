//! Finding the last appearance of a personal object in a day of egocentric
//! images.
//!
//! The pipeline encodes images as weighted bags of visual words, ranks a day
//! by cosine similarity to a multi-image query, splits the ranking into
//! candidates and discards with a threshold, and reorders both groups by time
//! (optionally interleaving temporal runs). Rankings are scored with the mean
//! reciprocal rank of the first relevant image, averaged over days.

pub mod codebook;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod filter;
pub mod format;
pub mod pipeline;
pub mod ranker;
pub mod rerank;
pub mod synth;
pub mod trainer;

pub use codebook::{assign, train_codebook, AssignmentMap, Codebook, LocalFeatureMap};
pub use config::RunConfig;
pub use corpus::{BBox, Corpus, DayPartition, ImageRecord, QueryItem, QuerySet, RelevanceJudgments};
pub use encoder::{encode, encode_query, BowVector, QueryMode, SaliencyMap, TargetMode, WeightMask};
pub use error::{Error, Result};
pub use eval::{amrr, baseline_ranking, mrr_day, reciprocal_rank, EvalReport};
pub use experiment::{run_matrix, MatrixOptions, MatrixReport, ThresholdPolicy};
pub use filter::{nndr, tvss, CandidatePartition, FilterConfig, FilterMethod};
pub use pipeline::{Dataset, ScoreCache, Strategy};
pub use ranker::{build_index, score_all, IndexEntry, InvertedIndex, Scored, ScoredRanking};
pub use rerank::{interleave, time_sort, FinalRanking, Label, Rerank};
pub use synth::{generate, PresetOptions, SynthCorpus, SynthSpec};
pub use trainer::{sweep, SweepResult};
