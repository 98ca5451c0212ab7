//! Network definitions, the clock-driven simulator, and monitors.

mod def;
mod monitor;
mod sim;

pub use def::{
    read_connection_csv, ConfigError, ConnectionRow, Connectivity, GeneratorDef, GeneratorKind, MantissaDist,
    MonitorDef, MonitorVariable, NetworkDef, NeuronGroupDef, Phase, PlasticityDef, RandomConnectivity, RunConfig,
    SynapseGroupDef, ValidationError,
};
pub use monitor::{MonitorRecord, MonitorSource, Sample};
pub use sim::{bernoulli_generator, EngineError, RateError, Simulation, SourceRef, SpikeEvent};
