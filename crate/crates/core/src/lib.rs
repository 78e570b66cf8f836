pub mod chart;
pub mod config;
pub mod curve;
pub mod error;
pub mod expr;
pub mod export;
pub mod flow;
pub mod interp;
pub mod mesh;
pub mod jacobi;
pub mod metric2d;
pub mod ode;
pub mod pipeline;
pub mod quad;
pub mod section;
pub mod spaceform;

pub use error::{Result, TubeError};
