//! Experiment harness certifying that deep orthogonal factorizations and
//! their shallow products follow the same Riemannian descent trajectory.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{
    BuiltLoss, DepthConstruction, ExperimentConfig, ExperimentKind, LossKind, LossSpec,
    RetractionKind,
};
pub use experiments::{run, run_convergence, run_depth_independence, run_equivalence, run_flow_comparison};
pub use report::{CellParams, CellReport, FlowSummary, Report};
