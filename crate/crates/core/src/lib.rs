//! Deterministic single-process federated-learning simulator.
//!
//! The server scores every client's locally trained model on a held-out
//! validation set against weighted objectives (accuracy and the statistical
//! parity / equality of opportunity gaps) and aggregates with weights
//! proportional to those scores, optionally through cumulative geometric
//! rank rewards. FedAvg, q-FedSGD, q-FedAvg and agnostic FL are included as
//! reference strategies.
//!
//! The numeric core is generic over [`Real`]; the aliases below fix it to
//! `f64`, which the experiment harness uses throughout.

pub mod baselines;
pub mod data;
mod error;
pub mod fedval;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod report;
mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::{sigmoid, Real};

pub type Dataset = data::TabularDataset<f64>;
pub type Params = model::ModelParams<f64>;
pub type Client = data::ClientProfile<f64>;
pub type Objectives = metrics::ObjectiveSpec<f64>;
pub type Report = report::RoundReport<f64>;

pub type Dataset32 = data::TabularDataset<f32>;
pub type Params32 = model::ModelParams<f32>;
