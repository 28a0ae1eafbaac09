//! Event-camera optical flow on a simulated neurosynaptic crossbar fabric.
//!
//! Sensor events enter through an AER relay layer, pass a refractory input
//! stage, and drive four direction-selective (DS) neurons per pixel. Each DS
//! neuron bursts until the neighbouring pixel in its preferred direction
//! fires, so burst lengths encode per-axis transit times, which
//! [`decode`] turns into normal-flow vectors.
//!
//! ```no_run
//! use spikeflow::pipeline::{run_pipeline, PipelineConfig};
//!
//! let run = run_pipeline(&PipelineConfig::spiral()).unwrap();
//! println!("mean angular error {:.2} deg", run.report.mean_abs_angular_error_deg);
//! ```

pub mod aer;
pub mod corenet;
pub mod decode;
pub mod eval;
pub mod events;
pub mod neuron;
pub mod pipeline;
pub mod render;
pub mod scalar;
pub mod stimulus;

pub use corenet::{compile_flow_network, simulate, validate, Tiling};
pub use events::{Event, Polarity, SensorGeometry};
pub use scalar::{Potential, Real};

pub type Pipe = stimulus::PipeModel<f64>;
pub type Spiral = stimulus::SpiralModel<f64>;
pub type Flow = decode::FlowEstimate<f64>;
pub type Report = eval::EvalReport<f64>;
pub type Network = corenet::NetworkSpec<i32>;
pub type Neuron = neuron::NeuronConfig<i32>;
