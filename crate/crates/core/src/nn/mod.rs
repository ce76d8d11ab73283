//! Fixed-topology multilayer perceptrons with exact reverse-mode gradients,
//! Adam updates and Polyak target blending.

mod adam;
pub mod checkpoint;
mod mlp;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use mlp::{polyak_blend, GradBundle, Mlp, OutputActivation, Tape};
