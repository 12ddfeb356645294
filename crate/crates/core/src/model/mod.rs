//! Model configuration and parameters, the block and stacked forward pass,
//! adjacency construction, loss, and checkpointing.

mod checkpoint;
mod config;
mod correlation;
mod forward;
mod state;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC, VERSION};
pub use config::{AdjacencyMode, ModeSelection, ModelConfig, Projector, Variant};
pub use correlation::pearson_adjacency;
pub use forward::{embed, forward, forward_on_tape, latent_correlation, loss, tggc_block, BoundParams, ForwardVars};
pub use state::{filter_matrix, ModelState};
