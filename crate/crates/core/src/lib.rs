//! Learning-based static state estimation for distribution grids whose
//! real-time measurements alone leave the state unobservable.

pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod experiment;
pub mod grid;
pub mod learners;
pub mod measurement;
pub mod pipelines;
pub mod scenario;

pub use error::{Error, Result};
pub use estimator::{un, wls, SolveReport, SolverOptions, WlsProblem};
pub use evaluation::{Magnitude, MethodReport, ResidualStats};
pub use experiment::{Benchmark, RunConfig, SweepCell};
pub use grid::{build_admittance, parse_case, AdmittanceMatrix, Network, IEEE33_CASE};
pub use learners::{fit_linear, knn_predict, FeatureMode, LinearModel};
pub use measurement::{
    default_plan, eval_h, eval_jacobian, MeasurementPlan, Placement, PowerOutputs, StateVector,
};
pub use nalgebra;
pub use pipelines::{EstimateSet, Method};
pub use scenario::{build_dataset, Dataset, VariabilityScenario};
