//! Nonasymptotic rate bounds for short packets when the receiver must detect
//! a packet before decoding it, evaluated for the binary-input AWGN channel.
//!
//! * [`np_testing`] evaluates Neyman–Pearson α/β functions from LLR samples.
//! * [`channel`] defines the channel, its LLR statistics and samplers.
//! * [`bounds`] computes joint and preamble-based achievability and converse
//!   bounds and the genie-aided references.
//! * [`oracle_sim`] runs the threshold decoder on explicit random codebooks.
//! * [`sweep`] drives rate-curve sweeps and validation runs from config files.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod exec;
pub mod np_testing;
pub mod numeric;
pub mod oracle_sim;
pub mod rng;
pub mod sweep;

pub use bounds::{BoundFlag, BoundKind, BoundResult, McConfig, TargetProbabilities};
pub use channel::{ChannelSpec, Measure, Statistic};
pub use error::{Error, Result};
pub use np_testing::{LlrSampleSet, NeymanPearson, NpConfig, ProbEstimate, Side, TestPoint};
