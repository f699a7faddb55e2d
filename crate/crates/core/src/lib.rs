//! Path integral graph networks: MET-matrix convolution and pooling, classical
//! centrality measures, and the point-pattern graph dataset generator.

pub mod autograd;
pub mod centrality;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod graph;
pub mod layers;
pub mod met;
pub mod pointpattern;
pub mod trainer;

pub use error::{PanError, Result};
