//! Mixed-formulation physics-informed neural networks for 2-D heterogeneous
//! elasticity and steady-state diffusion, with a Q1 finite-element reference
//! solver for verification.

pub mod autodiff;
pub mod config;
pub mod domain;
pub mod error;
pub mod fem;
pub mod field;
pub mod loss;
pub mod network;
pub mod ode;
pub mod optimizer;
pub mod pinn;
pub mod pipeline;

pub use error::{Error, Result};
