//! Loss assembly for the elastic and thermal problems.
//!
//! Every integral is a collocation mean times the measure of its point set
//! (domain area or edge length). Per-point samples are built from network
//! output duals; all functions are generic over [`Real`] so the same code
//! evaluates plain values and records onto a tape.

pub mod elastic;
pub mod thermal;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{mean, Real};
use crate::domain::{CollocationSet, Edge};
use crate::error::{Error, Result};
use crate::network::LossTerm;

/// How the energy term is built from the energy functional.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyForm {
    /// Absolute value of internal energy against boundary work, as a single
    /// global MAE term.
    #[default]
    Literal,
    /// The total potential itself (internal energy minus Neumann work);
    /// may be negative.
    SignedPotential,
}

impl FromStr for EnergyForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(EnergyForm::Literal),
            "signed_potential" => Ok(EnergyForm::SignedPotential),
            other => Err(Error::config(format!("unknown energy form {other:?}"))),
        }
    }
}

impl fmt::Display for EnergyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyForm::Literal => "literal",
            EnergyForm::SignedPotential => "signed_potential",
        })
    }
}

/// Value of each loss term; inactive terms are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown<T> {
    pub ef: T,
    pub dbc: T,
    pub cnc: T,
    pub sf: T,
    pub nbc: T,
}

impl<T: Real> LossBreakdown<T> {
    pub fn zero() -> Self {
        LossBreakdown {
            ef: T::zero(),
            dbc: T::zero(),
            cnc: T::zero(),
            sf: T::zero(),
            nbc: T::zero(),
        }
    }

    /// Equal-weight sum of all terms.
    pub fn total(&self) -> T {
        self.ef + self.dbc + self.cnc + self.sf + self.nbc
    }

    pub fn get(&self, term: LossTerm) -> T {
        match term {
            LossTerm::EnergyForm => self.ef,
            LossTerm::Dirichlet => self.dbc,
            LossTerm::Connection => self.cnc,
            LossTerm::StrongForm => self.sf,
            LossTerm::Neumann => self.nbc,
        }
    }

    pub fn values(&self) -> LossBreakdown<f64> {
        LossBreakdown {
            ef: self.ef.value(),
            dbc: self.dbc.value(),
            cnc: self.cnc.value(),
            sf: self.sf.value(),
            nbc: self.nbc.value(),
        }
    }
}

impl LossBreakdown<f64> {
    pub fn as_array(&self) -> [f64; 5] {
        [self.ef, self.dbc, self.cnc, self.sf, self.nbc]
    }
}

pub(crate) fn check_len(set: &CollocationSet, n: usize) -> Result<()> {
    if set.len() != n {
        return Err(Error::structural(format!(
            "{n} samples for a collocation set of {} points",
            set.len()
        )));
    }
    Ok(())
}

pub(crate) fn nonempty_edge(set: &CollocationSet, e: Edge) -> Result<Range<usize>> {
    let r = set.edge(e);
    if r.is_empty() {
        return Err(Error::config(format!("{e:?} edge carries a condition but has no points")));
    }
    Ok(r)
}

pub(crate) fn nonempty_interior(set: &CollocationSet) -> Result<Range<usize>> {
    if set.n_interior() == 0 {
        return Err(Error::config("no interior collocation points"));
    }
    Ok(set.interior())
}

/// Mean of `f` over an index range.
pub(crate) fn mean_over<T: Real>(range: Range<usize>, f: impl Fn(usize) -> T) -> T {
    mean(range.map(f))
}
