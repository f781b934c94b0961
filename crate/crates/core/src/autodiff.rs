//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every primitive operation performed on [`Var`]
//! handles during the forward pass; [`Tape::backward`] then sweeps the
//! recorded nodes once in reverse to accumulate adjoints. Local partial
//! derivatives are computed at record time, so the backward pass is a
//! single fused multiply-add per edge.
//!
//! The [`Real`] trait abstracts over `f64` and `Var`, letting the market
//! impact functions, the hedging account and the policy network be written
//! once and run either as plain arithmetic (evaluation, baselines) or as a
//! recorded computation (training).
//!
//! Dense layers go through [`Real::dot_affine`], which the tape records as
//! one fused node per output unit instead of hundreds of scalar nodes.
//! Indicator values (`gt_zero`) record a zero partial: they are constants
//! to the backward pass.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

/// Scalar abstraction shared by plain `f64` arithmetic and taped [`Var`]s.
///
/// `constant` mints a constant in the same context as `self` (for a `Var`,
/// a fresh leaf on the same tape). Kinked primitives use the subgradient 0
/// at the kink; `gt_zero` is the 0/1 comparison indicator and carries zero
/// derivative everywhere.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(self) -> f64;
    fn constant(self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    /// `self` raised to a constant exponent.
    fn powc(self, exponent: f64) -> Self;
    /// `max(0, self)`.
    fn pos_part(self) -> Self;
    /// `max(0, -self)`.
    fn neg_part(self) -> Self;
    /// Indicator `1` if `self > 0`, else `0`; not differentiable, recorded
    /// with zero partials.
    fn gt_zero(self) -> Self;
    /// `sum_i weights[i] * inputs[i] + bias`, fused into a single tape node.
    fn dot_affine(weights: &[Self], inputs: &[Self], bias: Self) -> Self;
}

impl Real for f64 {
    fn value(self) -> f64 {
        self
    }
    fn constant(self, c: f64) -> Self {
        c
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn powc(self, exponent: f64) -> Self {
        self.powf(exponent)
    }
    fn pos_part(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    fn neg_part(self) -> Self {
        if self < 0.0 {
            -self
        } else {
            0.0
        }
    }
    fn gt_zero(self) -> Self {
        if self > 0.0 {
            1.0
        } else {
            0.0
        }
    }
    fn dot_affine(weights: &[Self], inputs: &[Self], bias: Self) -> Self {
        debug_assert_eq!(weights.len(), inputs.len());
        let mut acc = bias;
        for (w, x) in weights.iter().zip(inputs) {
            acc += w * x;
        }
        acc
    }
}

#[derive(Clone, Copy)]
enum Node {
    Leaf,
    /// Smooth unary op with precomputed local partial.
    Unary { arg: u32, partial: f64 },
    /// `pos_part` / `neg_part`: same backward rule as `Unary`, tagged so
    /// tests can locate kink arguments.
    Kink { arg: u32, partial: f64 },
    Binary {
        lhs: u32,
        rhs: u32,
        dlhs: f64,
        drhs: f64,
    },
    /// Fused `dot(w, x) + b`. `ids_at` points into the aux index buffer at
    /// `len` weight ids followed by `len` input ids.
    Affine { ids_at: u32, len: u32, bias: u32 },
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    vals: Vec<f64>,
    adj: Vec<f64>,
    aux: Vec<u32>,
}

/// Records primitive operations for reverse-mode differentiation.
///
/// Values live on the tape; [`Var`] handles are copyable indices into it.
/// A tape can be [`clear`](Tape::clear)ed and reused between iterations to
/// keep its allocations.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<TapeInner>,
}

#[derive(Debug, Error)]
pub enum GradientError {
    #[error("loss is not finite: {0}")]
    NonFiniteLoss(f64),
    #[error("non-finite adjoint for parameter {index}: {value}")]
    NonFiniteAdjoint { index: usize, value: f64 },
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded values.
    pub fn len(&self) -> usize {
        self.inner.borrow().vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops all recorded nodes but keeps allocations for reuse.
    pub fn clear(&self) {
        let mut t = self.inner.borrow_mut();
        t.nodes.clear();
        t.vals.clear();
        t.adj.clear();
        t.aux.clear();
    }

    fn push(&self, node: Node, value: f64) -> u32 {
        let mut t = self.inner.borrow_mut();
        let id = t.vals.len();
        assert!(id < u32::MAX as usize, "tape overflow");
        t.nodes.push(node);
        t.vals.push(value);
        id as u32
    }

    /// Creates an independent leaf variable.
    pub fn leaf(&self, value: f64) -> Var<'_> {
        Var {
            tape: self,
            id: self.push(Node::Leaf, value),
        }
    }

    /// Pushes one leaf per entry of `values`, in order.
    pub fn leaves(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.leaf(v)).collect()
    }

    fn value_of(&self, id: u32) -> f64 {
        self.inner.borrow().vals[id as usize]
    }

    fn unary(&self, arg: Var<'_>, value: f64, partial: f64) -> Var<'_> {
        Var {
            tape: self,
            id: self.push(
                Node::Unary {
                    arg: arg.id,
                    partial,
                },
                value,
            ),
        }
    }

    fn kink(&self, arg: Var<'_>, value: f64, partial: f64) -> Var<'_> {
        Var {
            tape: self,
            id: self.push(
                Node::Kink {
                    arg: arg.id,
                    partial,
                },
                value,
            ),
        }
    }

    fn binary(&self, lhs: Var<'_>, rhs: Var<'_>, value: f64, dlhs: f64, drhs: f64) -> Var<'_> {
        Var {
            tape: self,
            id: self.push(
                Node::Binary {
                    lhs: lhs.id,
                    rhs: rhs.id,
                    dlhs,
                    drhs,
                },
                value,
            ),
        }
    }

    /// Runs the reverse sweep from `output`, leaving adjoints readable via
    /// [`Tape::adjoint`].
    pub fn backward(&self, output: Var<'_>) {
        let mut t = self.inner.borrow_mut();
        let n = t.vals.len();
        t.adj.clear();
        t.adj.resize(n, 0.0);
        t.adj[output.id as usize] = 1.0;

        // Split borrows: nodes/aux are read-only during the sweep.
        let TapeInner {
            nodes, vals, adj, aux,
        } = &mut *t;

        for i in (0..=output.id as usize).rev() {
            let grad_out = adj[i];
            if grad_out == 0.0 {
                continue;
            }
            match nodes[i] {
                Node::Leaf => {}
                Node::Unary { arg, partial } | Node::Kink { arg, partial } => {
                    adj[arg as usize] += partial * grad_out;
                }
                Node::Binary {
                    lhs,
                    rhs,
                    dlhs,
                    drhs,
                } => {
                    adj[lhs as usize] += dlhs * grad_out;
                    adj[rhs as usize] += drhs * grad_out;
                }
                Node::Affine { ids_at, len, bias } => {
                    adj[bias as usize] += grad_out;
                    let at = ids_at as usize;
                    let len = len as usize;
                    let (ws, xs) = aux[at..at + 2 * len].split_at(len);
                    for (&w, &x) in ws.iter().zip(xs) {
                        adj[w as usize] += grad_out * vals[x as usize];
                        adj[x as usize] += grad_out * vals[w as usize];
                    }
                }
            }
        }
    }

    /// Adjoint of `var` after a [`Tape::backward`] call.
    pub fn adjoint(&self, var: Var<'_>) -> f64 {
        self.inner.borrow().adj[var.id as usize]
    }

    /// Arguments of every recorded `pos_part`/`neg_part` node. Gradient
    /// checks use this to verify the episode stays away from kinks.
    pub fn kink_arguments(&self) -> Vec<f64> {
        let t = self.inner.borrow();
        t.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Kink { arg, .. } => Some(t.vals[*arg as usize]),
                _ => None,
            })
            .collect()
    }
}

/// Differentiates `loss` with respect to `params`, verifying finiteness of
/// both the loss and every requested adjoint.
pub fn gradient(tape: &Tape, loss: Var<'_>, params: &[Var<'_>]) -> Result<Vec<f64>, GradientError> {
    let loss_value = loss.value();
    if !loss_value.is_finite() {
        return Err(GradientError::NonFiniteLoss(loss_value));
    }
    tape.backward(loss);
    let grad: Vec<f64> = params.iter().map(|&p| tape.adjoint(p)).collect();
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(GradientError::NonFiniteAdjoint {
            index,
            value: grad[index],
        });
    }
    Ok(grad)
}

/// A value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: u32,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}={}", self.id, self.value())
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self::Output {
        let v = self.value() + rhs.value();
        self.tape.binary(self, rhs, v, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self::Output {
        let v = self.value() - rhs.value();
        self.tape.binary(self, rhs, v, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self::Output {
        let (a, b) = (self.value(), rhs.value());
        self.tape.binary(self, rhs, a * b, b, a)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self::Output {
        let (a, b) = (self.value(), rhs.value());
        self.tape.binary(self, rhs, a / b, 1.0 / b, -a / (b * b))
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self::Output {
        let v = -self.value();
        self.tape.unary(self, v, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Self::Output {
        self.tape.unary(self, self.value() + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Self::Output {
        self.tape.unary(self, self.value() - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Self::Output {
        self.tape.unary(self, self.value() * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, c: f64) -> Self::Output {
        self.tape.unary(self, self.value() / c, 1.0 / c)
    }
}

impl<'t> Real for Var<'t> {
    fn value(self) -> f64 {
        self.tape.value_of(self.id)
    }

    fn constant(self, c: f64) -> Self {
        self.tape.leaf(c)
    }

    fn exp(self) -> Self {
        let v = self.value().exp();
        self.tape.unary(self, v, v)
    }

    fn ln(self) -> Self {
        let a = self.value();
        self.tape.unary(self, a.ln(), 1.0 / a)
    }

    fn sqrt(self) -> Self {
        let v = self.value().sqrt();
        self.tape.unary(self, v, 0.5 / v)
    }

    fn tanh(self) -> Self {
        let v = self.value().tanh();
        self.tape.unary(self, v, 1.0 - v * v)
    }

    fn powc(self, exponent: f64) -> Self {
        let a = self.value();
        self.tape
            .unary(self, a.powf(exponent), exponent * a.powf(exponent - 1.0))
    }

    fn pos_part(self) -> Self {
        let a = self.value();
        // Subgradient 0 at the kink.
        let (v, p) = if a > 0.0 { (a, 1.0) } else { (0.0, 0.0) };
        self.tape.kink(self, v, p)
    }

    fn neg_part(self) -> Self {
        let a = self.value();
        let (v, p) = if a < 0.0 { (-a, -1.0) } else { (0.0, 0.0) };
        self.tape.kink(self, v, p)
    }

    fn gt_zero(self) -> Self {
        let v = if self.value() > 0.0 { 1.0 } else { 0.0 };
        self.tape.unary(self, v, 0.0)
    }

    fn dot_affine(weights: &[Self], inputs: &[Self], bias: Self) -> Self {
        assert_eq!(weights.len(), inputs.len());
        let tape = bias.tape;
        let value = {
            let t = tape.inner.borrow();
            let mut acc = t.vals[bias.id as usize];
            for (w, x) in weights.iter().zip(inputs) {
                acc += t.vals[w.id as usize] * t.vals[x.id as usize];
            }
            acc
        };
        let mut t = tape.inner.borrow_mut();
        let ids_at = t.aux.len();
        assert!(ids_at + 2 * weights.len() < u32::MAX as usize, "tape overflow");
        t.aux.extend(weights.iter().map(|w| w.id));
        t.aux.extend(inputs.iter().map(|x| x.id));
        let id = t.vals.len();
        assert!(id < u32::MAX as usize, "tape overflow");
        t.nodes.push(Node::Affine {
            ids_at: ids_at as u32,
            len: weights.len() as u32,
            bias: bias.id,
        });
        t.vals.push(value);
        Var {
            tape,
            id: id as u32,
        }
    }
}
