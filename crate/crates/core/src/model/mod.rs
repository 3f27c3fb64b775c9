//! Network graphs for the full-rate and low-complexity detectors.

pub mod config;
pub mod forward;
pub mod params;
pub mod store;

pub use config::{Architecture, ConvSpec, LcResampleConfig, ModelConfig, SrSadConfig};
pub use forward::{bigru_forward, gru_cell_step, NetTrace};
pub use params::{BiGruBlock, Conv1d, GruDirection, GruLayerParams, Linear, NetworkParams, TensorSpec};
pub use store::{load_weights, save_weights, srsad_forward, srsad_lc_forward, WeightStore};
