//! Feed-forward networks and the model variants built from them.

mod batch;
mod mlp;
mod variant;

pub use batch::{
    BackwardScratch, BatchTrace, DerivOrder, CH_VALUE, CH_X, CH_XX, CH_XY, CH_Y, CH_YY,
};
pub use mlp::{init_params, param_count, reset_second_order_passes, second_order_passes, Mlp};
pub use variant::{
    assemble_variant, LossTerm, Model, NetworkShape, OutputSlot, Problem, Quantity, Variant,
};
