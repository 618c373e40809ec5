//! Exact derivatives: forward-mode duals for spatial derivatives and a
//! reverse-mode tape for gradients with respect to network parameters.

mod dual;
mod real;
mod tape;

pub use dual::{dual_tanh, Dual2};
pub use real::{mean, sum, Real};
pub use tape::{tape_gradient, NodeId, Op, Tape, Var};

use std::ops::{Deref, DerefMut};

/// Flat vector of trainable parameters (or a gradient over them).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(n: usize) -> Self {
        ParamVector(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}
