//! Gaussian-process surrogates and weighted bi-objective Bayesian
//! optimization for choosing electrode manufacturing parameters.
//!
//! The numerical core is generic over [`scalar::Scalar`]; the aliases below
//! fix it to `f64`, which is what the pipeline and command-line tool use.

pub mod bayes_opt;
pub mod cell_sim;
pub mod config;
pub mod dataset;
pub mod doe;
pub mod electrode;
pub mod error;
pub mod gp;
pub mod io;
pub mod linalg;
pub mod objective;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod validation;

pub use config::PipelineConfig;
pub use error::{Error, Result};

pub type ManufacturingParams = electrode::ManufacturingParams<f64>;
pub type ElectrodeProperties = electrode::ElectrodeProperties<f64>;
pub type PropertyModelConfig = electrode::PropertyModelConfig<f64>;
pub type ParameterBounds = doe::ParameterBounds<f64>;
pub type DesignOfExperiments = doe::DesignOfExperiments<f64>;
pub type SimConfig = cell_sim::SimConfig<f64>;
pub type DischargeResult = cell_sim::DischargeResult<f64>;
pub type Dataset = dataset::Dataset<f64>;
pub type GpConfig = gp::GpConfig<f64>;
pub type GpModel = gp::GpModel<f64>;
pub type KernelSpec = gp::KernelSpec<f64>;
pub type FitnessScaler = objective::FitnessScaler<f64>;
pub type WeightScheme = objective::WeightScheme<f64>;
pub type Scenario = objective::Scenario<f64>;
pub type ObjectiveSpec = objective::ObjectiveSpec<f64>;
pub type BoConfig = bayes_opt::BoConfig<f64>;
pub type BoResult = bayes_opt::BoResult<f64>;
