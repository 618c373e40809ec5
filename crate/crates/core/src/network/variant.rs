use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::DerivOrder;
use super::mlp::{init_params, Mlp};
use crate::autodiff::ParamVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Elastic,
    Thermal,
}

impl Problem {
    /// Output quantities of the fully mixed model, in output order.
    pub fn mixed_quantities(self) -> &'static [Quantity] {
        match self {
            Problem::Elastic => &[
                Quantity::Ux,
                Quantity::Uy,
                Quantity::SigmaX,
                Quantity::SigmaY,
                Quantity::SigmaXY,
            ],
            Problem::Thermal => &[Quantity::T, Quantity::Qx, Quantity::Qy],
        }
    }

    /// Primary-variable quantities only.
    pub fn primary_quantities(self) -> &'static [Quantity] {
        match self {
            Problem::Elastic => &[Quantity::Ux, Quantity::Uy],
            Problem::Thermal => &[Quantity::T],
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Elastic => "elastic",
            Problem::Thermal => "thermal",
        })
    }
}

/// Network architectures compared for the mixed formulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Primary outputs, strong form (second derivatives), separate nets.
    A,
    /// Primary outputs, energy form, separate nets.
    B,
    /// Primary and flux outputs from one combined net, all loss terms.
    C,
    /// Primary and flux outputs, strong form only, separate nets.
    D,
    /// Primary and flux outputs, strong and energy form, separate nets.
    E,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::A, Variant::B, Variant::C, Variant::D, Variant::E];

    pub fn has_flux_heads(self) -> bool {
        matches!(self, Variant::C | Variant::D | Variant::E)
    }

    pub fn deriv_order(self) -> DerivOrder {
        match self {
            Variant::A | Variant::D => DerivOrder::Second,
            _ => DerivOrder::First,
        }
    }

    pub fn loss_terms(self) -> &'static [LossTerm] {
        use LossTerm::*;
        match self {
            Variant::A => &[Dirichlet, StrongForm, Neumann],
            // Neumann data enters through the boundary work of the energy term.
            Variant::B => &[EnergyForm, Dirichlet],
            Variant::C | Variant::E => &[EnergyForm, Dirichlet, Connection, StrongForm, Neumann],
            Variant::D => &[Dirichlet, Connection, StrongForm, Neumann],
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Variant::A),
            "B" | "b" => Ok(Variant::B),
            "C" | "c" => Ok(Variant::C),
            "D" | "d" => Ok(Variant::D),
            "E" | "e" => Ok(Variant::E),
            other => Err(Error::structural(format!("unknown model variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossTerm {
    EnergyForm,
    Dirichlet,
    Connection,
    StrongForm,
    Neumann,
}

/// Physical quantity produced by a network output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    Ux,
    Uy,
    SigmaX,
    SigmaY,
    SigmaXY,
    T,
    Qx,
    Qy,
}

impl Quantity {
    pub const COUNT: usize = 8;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Ux => "u_x",
            Quantity::Uy => "u_y",
            Quantity::SigmaX => "sigma_x",
            Quantity::SigmaY => "sigma_y",
            Quantity::SigmaXY => "sigma_xy",
            Quantity::T => "T",
            Quantity::Qx => "q_x",
            Quantity::Qy => "q_y",
        }
    }
}

/// Where a quantity comes from: output `output` of network `net`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputSlot {
    pub quantity: Quantity,
    pub net: usize,
    pub output: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub hidden_layers: usize,
    pub neurons: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            hidden_layers: 5,
            neurons: 40,
        }
    }
}

impl NetworkShape {
    pub fn layer_sizes(&self, inputs: usize, outputs: usize) -> Vec<usize> {
        let mut sizes = vec![inputs];
        sizes.extend(std::iter::repeat_n(self.neurons, self.hidden_layers));
        sizes.push(outputs);
        sizes
    }
}

/// The set of networks realizing one variant for one problem, plus the loss
/// terms it minimizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub problem: Problem,
    pub variant: Variant,
    pub nets: Vec<Mlp>,
    pub slots: Vec<OutputSlot>,
}

pub fn assemble_variant(
    variant: Variant,
    problem: Problem,
    shape: NetworkShape,
    seed: u64,
) -> Result<Model> {
    let quantities: &[Quantity] = if variant.has_flux_heads() {
        problem.mixed_quantities()
    } else {
        problem.primary_quantities()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nets = Vec::new();
    let mut slots = Vec::new();
    if variant == Variant::C {
        let sizes = shape.layer_sizes(2, quantities.len());
        nets.push(init_params(&sizes, rng.random())?);
        for (i, &q) in quantities.iter().enumerate() {
            slots.push(OutputSlot {
                quantity: q,
                net: 0,
                output: i,
            });
        }
    } else {
        let sizes = shape.layer_sizes(2, 1);
        for (i, &q) in quantities.iter().enumerate() {
            nets.push(init_params(&sizes, rng.random())?);
            slots.push(OutputSlot {
                quantity: q,
                net: i,
                output: 0,
            });
        }
    }
    Ok(Model {
        problem,
        variant,
        nets,
        slots,
    })
}

impl Model {
    pub fn loss_terms(&self) -> &'static [LossTerm] {
        self.variant.loss_terms()
    }

    pub fn deriv_order(&self) -> DerivOrder {
        self.variant.deriv_order()
    }

    pub fn slot(&self, q: Quantity) -> Option<OutputSlot> {
        self.slots.iter().copied().find(|s| s.quantity == q)
    }

    pub fn num_params(&self) -> usize {
        self.nets.iter().map(|n| n.num_params()).sum()
    }

    /// Offset of each network's block inside the concatenated vector.
    pub fn param_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.nets.len());
        let mut acc = 0;
        for n in &self.nets {
            offsets.push(acc);
            acc += n.num_params();
        }
        offsets
    }

    pub fn params(&self) -> ParamVector {
        ParamVector(
            self.nets
                .iter()
                .flat_map(|n| n.params().iter().copied())
                .collect(),
        )
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::structural(format!(
                "model has {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut offset = 0;
        for net in &mut self.nets {
            let n = net.num_params();
            net.params_mut().copy_from_slice(&params[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Text snapshot of every network, preceded by a model header.
    pub fn to_snapshot(&self) -> String {
        let mut out = format!(
            "mixpinn-model {} {} {}\n",
            self.problem,
            self.variant,
            self.nets.len()
        );
        for net in &self.nets {
            out.push_str(&net.to_snapshot());
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::structural("empty model snapshot"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "mixpinn-model" {
            return Err(Error::structural(format!("bad model header: {header}")));
        }
        let problem = match parts[1] {
            "elastic" => Problem::Elastic,
            "thermal" => Problem::Thermal,
            other => return Err(Error::structural(format!("unknown problem {other}"))),
        };
        let variant: Variant = parts[2].parse()?;
        let count: usize = parts[3]
            .parse()
            .map_err(|_| Error::structural("bad network count"))?;
        let mut model = assemble_variant(variant, problem, NetworkShape { hidden_layers: 1, neurons: 1 }, 0)?;
        if model.nets.len() != count {
            return Err(Error::structural(format!(
                "variant {variant} uses {} networks, snapshot has {count}",
                model.nets.len()
            )));
        }
        for net in &mut model.nets {
            let read = Mlp::read_snapshot(&mut lines)?;
            if read.output_dim() != net.output_dim() || read.input_dim() != net.input_dim() {
                return Err(Error::structural("snapshot network shape does not match variant"));
            }
            *net = read;
        }
        Ok(model)
    }
}
