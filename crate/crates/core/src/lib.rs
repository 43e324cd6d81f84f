//! Evaluation of binary hash codes under bucket search (hash lookup).
//!
//! The pipeline is: pack codes ([`codes`]), optionally derive them with
//! random-hyperplane LSH ([`lsh`]) or the planted-center generator
//! ([`synth`]), index them ([`index`]), collect per-query Hamming-shell
//! histograms, and score them ([`metrics`]). Probe counts follow the
//! combinatorial cost model in [`cost`].

pub mod codes;
pub mod cost;
pub mod error;
pub mod index;
pub mod lsh;
pub mod metrics;
pub mod synth;

pub use codes::{
    different_extension, ground_truth_from_labels, hamming_distance, same_extension, BinaryCode,
    CodeSet, GroundTruth, Labels, NeighborSet, MAX_CODE_LEN,
};
pub use cost::ProbeSchedule;
pub use error::{Error, Result};
pub use index::{
    bucket_search, build_index, empty_shell_counts, enumerate_shell, shell_histogram,
    EmptyBinRule, HistogramPath, InvertedIndex, ProbeStats, SearchParams, ShellHistogram,
};
pub use lsh::{FeatureMatrix, LshModel};
pub use metrics::{evaluate, oracle_metrics, EvalOptions, EvalReport, MetricCurve, RaapMode, TiePolicy};
pub use synth::{compare_strategies, generate_mshift, MShiftConfig};
