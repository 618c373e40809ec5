//! Wiring of models, collocation sets and loss assembly into a trainable
//! objective, plus field evaluation of a trained model.
//!
//! Each epoch runs every network once over all collocation points in batch
//! mode. The per-point losses are then recorded on a scalar tape whose
//! leaves are the network output channels; the tape's leaf adjoints are fed
//! back through the batched layers to obtain parameter gradients.

use crate::autodiff::{Dual2, Real, Tape};
use crate::domain::{material_at_point, BoundarySpec, CollocationSet, MaterialTable, PhaseMap};
use crate::error::{Error, Result};
use crate::field::{FieldGrid, Provenance};
use crate::loss::elastic::{self, ElasticPoint};
use crate::loss::thermal::{self, ThermalPoint};
use crate::loss::{EnergyForm, LossBreakdown};
use crate::network::{
    BackwardScratch, BatchTrace, DerivOrder, Model, Problem, Quantity, CH_VALUE, CH_X, CH_XX, CH_XY, CH_Y, CH_YY,
};
use crate::optimizer::{train, Objective, TrainConfig, TrainOutcome};

/// Deformed-configuration magnification for the exported `x_def`, `y_def`.
pub const DEFORMATION_SCALE: f64 = 10.0;

/// Derivative order each network is run with: second order only for nets
/// carrying a primary quantity of a variant that needs it.
pub fn net_orders(model: &Model) -> Vec<DerivOrder> {
    let mut orders = vec![DerivOrder::First; model.nets.len()];
    if model.deriv_order() == DerivOrder::Second {
        for slot in &model.slots {
            if model.problem.primary_quantities().contains(&slot.quantity) {
                orders[slot.net] = DerivOrder::Second;
            }
        }
    }
    orders
}

fn run_nets(model: &Model, points: &[[f64; 2]], orders: &[DerivOrder], traces: &mut Vec<BatchTrace>) -> Result<()> {
    traces.resize_with(model.nets.len(), BatchTrace::default);
    for ((net, &order), trace) in model.nets.iter().zip(orders).zip(traces.iter_mut()) {
        net.forward_batch_into(points, order, trace)?;
    }
    Ok(())
}

/// Duals of every output slot at every point, `[slot][point]`. `leaf` turns
/// each raw channel value into a scalar and is called in slot, point,
/// channel order.
fn slot_duals<T: Real>(
    model: &Model,
    traces: &[BatchTrace],
    n: usize,
    mut leaf: impl FnMut(f64) -> T,
) -> Vec<Vec<Dual2<T>>> {
    model
        .slots
        .iter()
        .map(|slot| {
            let tr = &traces[slot.net];
            let o = slot.output;
            let second = tr.order() == DerivOrder::Second;
            (0..n)
                .map(|b| {
                    let v = leaf(tr.output_at(o, CH_VALUE, b));
                    let dx = leaf(tr.output_at(o, CH_X, b));
                    let dy = leaf(tr.output_at(o, CH_Y, b));
                    let h = second.then(|| {
                        [
                            leaf(tr.output_at(o, CH_XX, b)),
                            leaf(tr.output_at(o, CH_XY, b)),
                            leaf(tr.output_at(o, CH_YY, b)),
                        ]
                    });
                    Dual2::from_parts(v, [dx, dy], h)
                })
                .collect()
        })
        .collect()
}

fn slot_index(model: &Model, q: Quantity) -> Option<usize> {
    model.slots.iter().position(|s| s.quantity == q)
}

fn required(model: &Model, q: Quantity) -> Result<usize> {
    slot_index(model, q).ok_or_else(|| Error::structural(format!("model has no {} output", q.name())))
}

fn elastic_points<T: Real>(model: &Model, duals: &[Vec<Dual2<T>>], b: usize) -> Result<ElasticPoint<T>> {
    let ux = required(model, Quantity::Ux)?;
    let uy = required(model, Quantity::Uy)?;
    let sigma = match (
        slot_index(model, Quantity::SigmaX),
        slot_index(model, Quantity::SigmaY),
        slot_index(model, Quantity::SigmaXY),
    ) {
        (Some(a), Some(c), Some(d)) => Some([duals[a][b], duals[c][b], duals[d][b]]),
        _ => None,
    };
    Ok(ElasticPoint {
        u: [duals[ux][b], duals[uy][b]],
        sigma,
    })
}

fn thermal_points<T: Real>(model: &Model, duals: &[Vec<Dual2<T>>], b: usize) -> Result<ThermalPoint<T>> {
    let t = required(model, Quantity::T)?;
    let q = match (slot_index(model, Quantity::Qx), slot_index(model, Quantity::Qy)) {
        (Some(a), Some(c)) => Some([duals[a][b], duals[c][b]]),
        _ => None,
    };
    Ok(ThermalPoint { t: duals[t][b], q })
}

fn assemble_losses<T: Real>(
    model: &Model,
    set: &CollocationSet,
    bcs: &BoundarySpec,
    form: EnergyForm,
    duals: &[Vec<Dual2<T>>],
) -> Result<LossBreakdown<T>> {
    let mats = set.materials();
    match model.problem {
        Problem::Elastic => {
            let samples = (0..set.len())
                .map(|b| Ok(elastic::elastic_sample(&elastic_points(model, duals, b)?, &mats[b])))
                .collect::<Result<Vec<_>>>()?;
            elastic::total_loss(model.variant, set, bcs, &samples, form)
        }
        Problem::Thermal => {
            let samples = (0..set.len())
                .map(|b| Ok(thermal::thermal_sample(&thermal_points(model, duals, b)?, &mats[b])))
                .collect::<Result<Vec<_>>>()?;
            thermal::total_loss(model.variant, set, bcs, &samples, form)
        }
    }
}

/// Loss breakdown of `model` on `set` without recording gradients.
pub fn losses_at(
    model: &Model,
    set: &CollocationSet,
    bcs: &BoundarySpec,
    form: EnergyForm,
) -> Result<LossBreakdown<f64>> {
    let orders = net_orders(model);
    let mut traces = Vec::new();
    run_nets(model, set.points(), &orders, &mut traces)?;
    let duals = slot_duals(model, &traces, set.len(), |v| v);
    assemble_losses(model, set, bcs, form, &duals)
}

/// Training objective for one model on one collocation set.
pub struct PinnObjective<'a> {
    model: Model,
    set: &'a CollocationSet,
    bcs: &'a BoundarySpec,
    form: EnergyForm,
    orders: Vec<DerivOrder>,
    traces: Vec<BatchTrace>,
    scratch: BackwardScratch,
    tape: Tape,
    adjoints: Vec<f64>,
    leaf_adjoints: Vec<f64>,
    output_adjoints: Vec<Vec<f64>>,
}

impl<'a> PinnObjective<'a> {
    pub fn new(model: Model, set: &'a CollocationSet, bcs: &'a BoundarySpec, form: EnergyForm) -> Result<Self> {
        let components = match model.problem {
            Problem::Elastic => 2,
            Problem::Thermal => 1,
        };
        bcs.validate(components)?;
        let orders = net_orders(&model);
        Ok(PinnObjective {
            model,
            set,
            bcs,
            form,
            orders,
            traces: Vec::new(),
            scratch: BackwardScratch::default(),
            tape: Tape::new(),
            adjoints: Vec::new(),
            leaf_adjoints: Vec::new(),
            output_adjoints: Vec::new(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }
}

impl Objective for PinnObjective<'_> {
    fn num_params(&self) -> usize {
        self.model.num_params()
    }

    fn evaluate(&mut self, params: &[f64], grad: &mut [f64]) -> Result<LossBreakdown<f64>> {
        self.model.set_params(params)?;
        let n = self.set.len();
        run_nets(&self.model, self.set.points(), &self.orders, &mut self.traces)?;
        self.tape.clear();
        let tape = &self.tape;
        let duals = slot_duals(&self.model, &self.traces, n, |v| tape.var(v));
        let losses = assemble_losses(&self.model, self.set, self.bcs, self.form, &duals)?;
        let total = losses.total();
        let values = losses.values();
        drop(duals);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let Some(root) = total.node() else {
            return Ok(values);
        };
        self.tape.backward_into(root, &mut self.adjoints)?;
        self.tape.variable_adjoints(&self.adjoints, &mut self.leaf_adjoints);

        // scatter leaf adjoints (slot, point, channel order) into the
        // per-net output blocks (output, channel, point order)
        self.output_adjoints.resize_with(self.model.nets.len(), Vec::new);
        for (net, (trace, adj)) in self
            .model
            .nets
            .iter()
            .zip(self.traces.iter().zip(self.output_adjoints.iter_mut()))
        {
            adj.clear();
            adj.resize(net.output_dim() * trace.channels() * n, 0.0);
        }
        let mut k = 0;
        for slot in &self.model.slots {
            let c_n = self.traces[slot.net].channels();
            let adj = &mut self.output_adjoints[slot.net];
            for b in 0..n {
                for c in 0..c_n {
                    adj[(slot.output * c_n + c) * n + b] = self.leaf_adjoints[k];
                    k += 1;
                }
            }
        }
        let offsets = self.model.param_offsets();
        for (i, net) in self.model.nets.iter().enumerate() {
            let g = &mut grad[offsets[i]..offsets[i] + net.num_params()];
            net.backward_batch(&self.traces[i], &self.output_adjoints[i], g, &mut self.scratch)?;
        }
        Ok(values)
    }
}

/// Trains `model` in place and returns the outcome (with the final
/// parameters also written into `model`).
pub fn train_pinn(
    model: &mut Model,
    set: &CollocationSet,
    bcs: &BoundarySpec,
    form: EnergyForm,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    let mut objective = PinnObjective::new(model.clone(), set, bcs, form)?;
    let outcome = train(&mut objective, model.params(), config, seed)?;
    model.set_params(&outcome.params)?;
    Ok(outcome)
}

/// Evaluates the model on the `nx x ny` lattice `points` (x fastest).
///
/// Mechanical grids hold `u_x, u_y, sigma_x, sigma_y, sigma_xy` (stress
/// heads when the variant has them, otherwise stress derived from `u`),
/// the `u`-derived stresses `sigma_*_u`, and the magnified deformed
/// coordinates `x_def, y_def`. Thermal grids hold `T, q_x, q_y` and the
/// derived fluxes `q_x_T, q_y_T`.
pub fn evaluate_pinn(
    model: &Model,
    map: &PhaseMap,
    table: &MaterialTable,
    points: &[[f64; 2]],
    nx: usize,
    ny: usize,
) -> Result<FieldGrid> {
    let orders = vec![DerivOrder::First; model.nets.len()];
    let mut traces = Vec::new();
    run_nets(model, points, &orders, &mut traces)?;
    let duals = slot_duals(model, &traces, points.len(), |v| v);
    let mut grid = FieldGrid::new(nx, ny, points.to_vec(), Provenance::Pinn)?;
    let mats = points
        .iter()
        .map(|&p| material_at_point(map, table, p))
        .collect::<Result<Vec<_>>>()?;
    match model.problem {
        Problem::Elastic => {
            let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(points.len()); 10];
            for (b, (p, m)) in points.iter().zip(&mats).enumerate() {
                let s = elastic::elastic_sample(&elastic_points(model, &duals, b)?, m);
                let shown = s.stress_heads.unwrap_or(s.stress);
                let row = [
                    s.u[0],
                    s.u[1],
                    shown[0],
                    shown[1],
                    shown[2],
                    s.stress[0],
                    s.stress[1],
                    s.stress[2],
                    p[0] + DEFORMATION_SCALE * s.u[0],
                    p[1] + DEFORMATION_SCALE * s.u[1],
                ];
                for (c, v) in cols.iter_mut().zip(row) {
                    c.push(v);
                }
            }
            for (name, c) in ELASTIC_COLUMNS.iter().zip(cols) {
                grid.push_column(name, c)?;
            }
        }
        Problem::Thermal => {
            let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(points.len()); 5];
            for (b, m) in mats.iter().enumerate() {
                let s = thermal::thermal_sample(&thermal_points(model, &duals, b)?, m);
                let shown = s.flux_heads.unwrap_or(s.flux);
                for (c, v) in cols.iter_mut().zip([s.t, shown[0], shown[1], s.flux[0], s.flux[1]]) {
                    c.push(v);
                }
            }
            for (name, c) in THERMAL_COLUMNS.iter().zip(cols) {
                grid.push_column(name, c)?;
            }
        }
    }
    Ok(grid)
}

pub const ELASTIC_COLUMNS: [&str; 10] = [
    "u_x", "u_y", "sigma_x", "sigma_y", "sigma_xy", "sigma_x_u", "sigma_y_u", "sigma_xy_u", "x_def", "y_def",
];

pub const THERMAL_COLUMNS: [&str; 5] = ["T", "q_x", "q_y", "q_x_T", "q_y_T"];
