pub mod config;
pub mod dt;
pub mod engine;
pub mod experiment;
pub mod model;
pub mod money;
pub mod optimizer;
pub mod par;
pub mod predictor;
pub mod strategies;
pub mod workload;
