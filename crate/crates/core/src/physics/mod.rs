//! Ground-truth simulators: white-noise-driven oscillators, a cantilever beam
//! under impulse load, and a temperature-driven displacement series.

mod beam;
mod bridge;
mod sdof;

pub use beam::{beam_mode_shapes, beam_roots, simulate_beam, BeamModes, BeamResponse, BeamSpec};
pub use bridge::{synth_bridge_series, synth_bridge_series_with, BridgeParams, BridgeSeries};
pub use sdof::{simulate_sdof, SdofSystem};

use std::collections::BTreeMap;

use nalgebra::DMatrix;

/// Sampled output of a simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Strictly increasing sample times (s).
    pub times: Vec<f64>,
    /// One row per time, one column per output location.
    pub values: DMatrix<f64>,
    /// Generating parameters.
    pub meta: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}
