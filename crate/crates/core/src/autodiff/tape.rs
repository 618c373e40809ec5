//! Scalar reverse-mode tape.
//!
//! Every arithmetic operation on a [`Var`] appends one node holding the op
//! code, up to two input indices and the local partial derivatives. The tape
//! is append-only, so a backward sweep never mutates recorded state and can be
//! replayed any number of times.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use super::{ParamVector, Real};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Variable,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,
    Shift,
    Tanh,
    Sin,
    Cos,
    Exp,
    Abs,
}

impl Op {
    fn arity(self) -> usize {
        match self {
            Op::Variable => 0,
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    args: [u32; 2],
    partials: [f64; 2],
}

/// Identifies a node on a particular tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId {
    tape: u64,
    index: u32,
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    values: Vec<f64>,
    variables: Vec<u32>,
}

pub struct Tape {
    id: u64,
    inner: RefCell<TapeInner>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.borrow();
        f.debug_struct("Tape")
            .field("id", &self.id)
            .field("nodes", &inner.nodes.len())
            .field("variables", &inner.variables.len())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            inner: RefCell::new(TapeInner::default()),
        }
    }

    pub fn with_capacity(nodes: usize) -> Self {
        let tape = Self::new();
        {
            let mut inner = tape.inner.borrow_mut();
            inner.nodes.reserve(nodes);
            inner.values.reserve(nodes);
        }
        tape
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_variables(&self) -> usize {
        self.inner.borrow().variables.len()
    }

    /// Drop all recorded nodes but keep the allocation. Requires that no
    /// `Var` borrowing this tape is alive.
    pub fn clear(&mut self) {
        let inner = self.inner.get_mut();
        inner.nodes.clear();
        inner.values.clear();
        inner.variables.clear();
        self.id = NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed);
    }

    /// Register an independent variable. Gradients are reported for
    /// variables in registration order.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(Op::Variable, [0, 0], [0.0, 0.0], value);
        self.inner.borrow_mut().variables.push(index);
        Var {
            tape: Some(self),
            index,
            value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    fn push(&self, op: Op, args: [u32; 2], partials: [f64; 2], value: f64) -> u32 {
        let mut inner = self.inner.borrow_mut();
        let index = inner.nodes.len();
        assert!(index < u32::MAX as usize, "tape overflow");
        inner.nodes.push(Node { op, args, partials });
        inner.values.push(value);
        index as u32
    }

    /// Gradient of `loss` with respect to every registered variable.
    ///
    /// Constants (values that never touched a tape) have an all-zero
    /// gradient. A variable recorded on a different tape is an error.
    pub fn gradient(&self, loss: &Var<'_>) -> Result<ParamVector> {
        match loss.node() {
            None => Ok(ParamVector(vec![0.0; self.num_variables()])),
            Some(id) => self.gradient_of(id),
        }
    }

    pub fn gradient_of(&self, loss: NodeId) -> Result<ParamVector> {
        let mut adjoints = Vec::new();
        self.backward_into(loss, &mut adjoints)?;
        let inner = self.inner.borrow();
        Ok(ParamVector(
            inner
                .variables
                .iter()
                .map(|&i| adjoints[i as usize])
                .collect(),
        ))
    }

    /// Reverse sweep writing adjoints of every node into `adjoints`, which is
    /// resized and reused by the caller between epochs.
    pub fn backward_into(&self, loss: NodeId, adjoints: &mut Vec<f64>) -> Result<()> {
        let inner = self.inner.borrow();
        if loss.tape != self.id {
            return Err(Error::structural("loss node was recorded on another tape"));
        }
        let root = loss.index as usize;
        if root >= inner.nodes.len() {
            return Err(Error::structural(format!(
                "loss node {root} is not on the tape ({} nodes)",
                inner.nodes.len()
            )));
        }
        adjoints.clear();
        adjoints.resize(inner.nodes.len(), 0.0);
        adjoints[root] = 1.0;
        for i in (0..=root).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            let node = &inner.nodes[i];
            for k in 0..node.op.arity() {
                adjoints[node.args[k] as usize] += node.partials[k] * a;
            }
        }
        Ok(())
    }

    /// Adjoints for the registered variables given a full adjoint buffer.
    pub fn variable_adjoints(&self, adjoints: &[f64], out: &mut Vec<f64>) {
        let inner = self.inner.borrow();
        out.clear();
        out.extend(inner.variables.iter().map(|&i| adjoints[i as usize]));
    }

    pub fn value_of(&self, id: NodeId) -> Option<f64> {
        if id.tape != self.id {
            return None;
        }
        self.inner.borrow().values.get(id.index as usize).copied()
    }
}

/// Free function form of [`Tape::gradient_of`].
pub fn tape_gradient(loss: NodeId, tape: &Tape) -> Result<ParamVector> {
    tape.gradient_of(loss)
}

/// A scalar that is either a plain constant or a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    index: u32,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var(#{} = {})", self.index, self.value),
            None => write!(f, "Const({})", self.value),
        }
    }
}

impl<'t> Var<'t> {
    pub fn node(&self) -> Option<NodeId> {
        self.tape.map(|t| NodeId {
            tape: t.id,
            index: self.index,
        })
    }

    fn unary(self, op: Op, partial: f64, value: f64) -> Self {
        match self.tape {
            None => Var::constant(value),
            Some(t) => Var {
                tape: Some(t),
                index: t.push(op, [self.index, 0], [partial, 0.0], value),
                value,
            },
        }
    }

    fn binary(self, o: Self, op: Op, partials: [f64; 2], value: f64) -> Self {
        match (self.tape, o.tape) {
            (None, None) => Var::constant(value),
            (Some(t), None) => Var {
                tape: Some(t),
                index: t.push(op, [self.index, 0], [partials[0], 0.0], value),
                value,
            }
            .retag_unary(),
            (None, Some(t)) => Var {
                tape: Some(t),
                index: t.push(op, [o.index, 0], [partials[1], 0.0], value),
                value,
            }
            .retag_unary(),
            (Some(t), Some(u)) => {
                debug_assert!(std::ptr::eq(t, u), "mixing variables from two tapes");
                Var {
                    tape: Some(t),
                    index: t.push(op, [self.index, o.index], partials, value),
                    value,
                }
            }
        }
    }

    // A binary op with one constant operand is stored as a one-input node.
    fn retag_unary(self) -> Self {
        if let Some(t) = self.tape {
            let mut inner = t.inner.borrow_mut();
            let node = &mut inner.nodes[self.index as usize];
            node.op = match node.op {
                Op::Add | Op::Sub => Op::Shift,
                _ => Op::Scale,
            };
        }
        self
    }
}

impl Real for Var<'_> {
    fn constant(value: f64) -> Self {
        Var {
            tape: None,
            index: 0,
            value,
        }
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(Op::Tanh, 1.0 - t * t, t)
    }

    fn sin(self) -> Self {
        self.unary(Op::Sin, self.value.cos(), self.value.sin())
    }

    fn cos(self) -> Self {
        self.unary(Op::Cos, -self.value.sin(), self.value.cos())
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(Op::Exp, e, e)
    }

    fn abs(self) -> Self {
        // subgradient 0 at the kink
        let s = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(Op::Abs, s, self.value.abs())
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, Op::Add, [1.0, 1.0], self.value + o.value)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, Op::Sub, [1.0, -1.0], self.value - o.value)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, Op::Mul, [o.value, self.value], self.value * o.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.value;
        self.binary(
            o,
            Op::Div,
            [inv, -self.value * inv * inv],
            self.value * inv,
        )
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(Op::Neg, -1.0, -self.value)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        self.unary(Op::Shift, 1.0, self.value + c)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        self.unary(Op::Shift, 1.0, self.value - c)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.unary(Op::Scale, c, self.value * c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        self.unary(Op::Scale, 1.0 / c, self.value / c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_sum_of_squares_gives_identity_gradient() {
        let tape = Tape::new();
        let theta = [0.3, -1.2, 2.5, 0.0];
        let vars = tape.vars(&theta);
        let loss = crate::autodiff::sum(vars.iter().map(|&v| v * v)) * 0.5;
        let g = tape.gradient(&loss).unwrap();
        assert_eq!(g.as_slice(), &theta);
    }

    #[test]
    fn tanh_affine_matches_finite_difference() {
        let f = |w: f64, b: f64| (w * 1.0 + b).tanh();
        let tape = Tape::new();
        let w = tape.var(0.3);
        let b = tape.var(0.1);
        let loss = (w * 1.0 + b).tanh();
        let g = tape.gradient(&loss).unwrap();
        let h = 1e-5;
        let fd_w = (f(0.3 + h, 0.1) - f(0.3 - h, 0.1)) / (2.0 * h);
        assert!(((g[0] - fd_w) / fd_w).abs() <= 1e-6);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let tape = Tape::new();
        let _ = tape.vars(&[1.0, 2.0]);
        let loss = Var::constant(3.0) * 2.0 + 1.0;
        let g = tape.gradient(&loss).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn unreachable_variables_get_exact_zero() {
        let tape = Tape::new();
        let v = tape.vars(&[1.0, 2.0, 3.0]);
        let loss = v[0] * v[2];
        let g = tape.gradient(&loss).unwrap();
        assert_eq!(g.as_slice(), &[3.0, 0.0, 1.0]);
    }

    #[test]
    fn foreign_node_is_rejected() {
        let a = Tape::new();
        let b = Tape::new();
        let x = a.var(1.0);
        let y = x * x;
        assert!(matches!(
            b.gradient(&y),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn backward_is_repeatable() {
        let tape = Tape::new();
        let v = tape.vars(&[0.7, -0.4]);
        let loss = (v[0] * v[1]).sin() + (v[0] / v[1]).exp() - v[1].abs();
        let g1 = tape.gradient(&loss).unwrap();
        let g2 = tape.gradient(&loss).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn mixed_constant_operands_record_single_input_nodes() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let c = Var::constant(5.0);
        let y = c * x;
        assert_eq!(y.value(), 10.0);
        let inner = tape.inner.borrow();
        assert_eq!(inner.nodes.last().unwrap().op, Op::Scale);
        drop(inner);
        assert_eq!(tape.gradient(&y).unwrap().as_slice(), &[5.0]);
    }
}
