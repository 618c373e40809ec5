//! Geometry, materials, boundary conditions and collocation points.

mod boundary;
mod collocation;
mod material;
mod phase_map;

pub use boundary::{BoundarySpec, Condition, Edge};
pub use collocation::{eval_grid, refine_near_interface, sample_collocation, CollocationSet, SampleSpec, Strategy};
pub use material::{material_at_point, Material, MaterialTable};
pub use phase_map::{point_segment_distance, PhaseMap};
