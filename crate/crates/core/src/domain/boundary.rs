use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Edge::Left => [-1.0, 0.0],
            Edge::Right => [1.0, 0.0],
            Edge::Bottom => [0.0, -1.0],
            Edge::Top => [0.0, 1.0],
        }
    }

    /// Length of the edge on an `lx x ly` rectangle.
    pub fn length(self, lx: f64, ly: f64) -> f64 {
        match self {
            Edge::Left | Edge::Right => ly,
            Edge::Bottom | Edge::Top => lx,
        }
    }

    /// Point at arc parameter `t` in `[0, 1]`.
    pub fn point(self, t: f64, lx: f64, ly: f64) -> [f64; 2] {
        match self {
            Edge::Left => [0.0, t * ly],
            Edge::Right => [lx, t * ly],
            Edge::Bottom => [t * lx, 0.0],
            Edge::Top => [t * lx, ly],
        }
    }
}

/// Condition on one field component along an edge: a prescribed value, or a
/// prescribed normal flux / traction component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Dirichlet(f64),
    Neumann(f64),
}

impl Condition {
    pub fn dirichlet(&self) -> Option<f64> {
        match *self {
            Condition::Dirichlet(v) => Some(v),
            Condition::Neumann(_) => None,
        }
    }

    pub fn neumann(&self) -> Option<f64> {
        match *self {
            Condition::Neumann(v) => Some(v),
            Condition::Dirichlet(_) => None,
        }
    }
}

/// Per-edge conditions, one per field component (`[x, y]` displacement
/// components for elasticity, `[T]` for diffusion).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub left: Vec<Condition>,
    pub right: Vec<Condition>,
    pub bottom: Vec<Condition>,
    pub top: Vec<Condition>,
}

impl BoundarySpec {
    /// Tension test: left edge clamped, right edge pulled by `ux` with zero
    /// tangential traction, top and bottom traction free.
    pub fn tension(ux: f64) -> Self {
        use Condition::*;
        BoundarySpec {
            left: vec![Dirichlet(0.0), Dirichlet(0.0)],
            right: vec![Dirichlet(ux), Neumann(0.0)],
            bottom: vec![Neumann(0.0), Neumann(0.0)],
            top: vec![Neumann(0.0), Neumann(0.0)],
        }
    }

    /// Left edge clamped, right edge displaced by `(ux, uy)`, top and bottom
    /// traction free.
    pub fn mixed_dirichlet(ux: f64, uy: f64) -> Self {
        use Condition::*;
        BoundarySpec {
            left: vec![Dirichlet(0.0), Dirichlet(0.0)],
            right: vec![Dirichlet(ux), Dirichlet(uy)],
            bottom: vec![Neumann(0.0), Neumann(0.0)],
            top: vec![Neumann(0.0), Neumann(0.0)],
        }
    }

    /// Fixed temperatures on the left and right edges, insulated top and
    /// bottom.
    pub fn thermal(t_left: f64, t_right: f64) -> Self {
        use Condition::*;
        BoundarySpec {
            left: vec![Dirichlet(t_left)],
            right: vec![Dirichlet(t_right)],
            bottom: vec![Neumann(0.0)],
            top: vec![Neumann(0.0)],
        }
    }

    pub fn edge(&self, e: Edge) -> &[Condition] {
        match e {
            Edge::Left => &self.left,
            Edge::Right => &self.right,
            Edge::Bottom => &self.bottom,
            Edge::Top => &self.top,
        }
    }

    pub fn components(&self) -> usize {
        self.left.len()
    }

    /// Every edge must carry exactly `components` conditions.
    pub fn validate(&self, components: usize) -> Result<()> {
        for e in Edge::ALL {
            let n = self.edge(e).len();
            if n != components {
                return Err(Error::config(format!(
                    "{e:?} edge has {n} conditions, expected {components}"
                )));
            }
            if self
                .edge(e)
                .iter()
                .any(|c| !matches!(c, Condition::Dirichlet(v) | Condition::Neumann(v) if v.is_finite()))
            {
                return Err(Error::config(format!("{e:?} edge has a non-finite value")));
            }
        }
        Ok(())
    }

    pub fn has_dirichlet(&self, e: Edge) -> bool {
        self.edge(e).iter().any(|c| c.dirichlet().is_some())
    }

    pub fn has_neumann(&self, e: Edge) -> bool {
        self.edge(e).iter().any(|c| c.neumann().is_some())
    }
}
