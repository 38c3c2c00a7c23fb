//! Network-guided tree search over schedule coefficients.
//!
//! A policy network proposes priors over the next coefficient and a value
//! network scores partial schedules. Both read the partial schedule and the
//! instance's clause matrix, so one pair of networks can serve a whole
//! family of instances with the same `(n, m)`.
//!
//! The pieces:
//!
//! - [`nn`]: dense layers with hand-written backpropagation.
//! - [`network`]: the policy/value pair, its loss and checkpoints.
//! - [`search`]: the PUCT tree and self-play episodes.
//! - [`pretrain`]: supervised samples from already-solved instances.
//! - [`solve`]: alternating self-play and training on one instance.

pub mod network;
pub mod nn;
pub mod pretrain;
pub mod search;
pub mod solve;

pub use network::{Loss, NetworkShape, PolicyValueNet, QzState, TrainingSample};
pub use pretrain::{build_pretrain_dataset, pretrain, PretrainSample};
pub use search::{
    puct_score, self_play_episode, EpisodeRecord, EpisodeStep, PuctNode, PuctTree, QueryEvent,
    QzTask, SelfPlayConfig,
};
pub use solve::{solve_instance, QzConfig, QzOutcome, RoundLog};
