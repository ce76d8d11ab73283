//! Offline trajectory storage, JSON Lines persistence and minibatch
//! sampling with hindsight relabelling and goal swapping.

mod dataset;
mod sampler;
mod transition;

pub use dataset::{generate_dataset, OfflineDataset, Source, Trajectory, DATASET_PATHS};
pub use sampler::{relabel_hindsight, sample_batch, AugTag, GoalSource, MiniBatch, SamplerConfig};
pub use transition::{swap_goal, Transition};
