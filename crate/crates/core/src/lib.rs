//! Design-based estimation of facility-level methane inventories from
//! aerial survey passes.

pub mod cli;
pub mod design;
pub mod error;
pub mod estimators;
pub mod frame;
pub mod manifest;
pub mod measurement_mc;
pub mod oracle;
pub mod planner;
pub mod pod_model;
pub mod report;
pub mod simlab;
pub mod sum;
pub mod units;

pub use error::{Error, Result};
