//! Reverse-mode automatic differentiation on a Wengert-list tape.
//!
//! [`Tape`] records every scalar operation; [`Var`] is a lightweight handle
//! (index + cached value) into the tape. Calling [`Var::grad`] runs a single
//! backward sweep and yields the derivative of that variable with respect to
//! every tape variable.
//!
//! The [`Scalar`] trait abstracts over plain `f64` and `Var`, so the same
//! density and network code evaluates values (f64) or records the graph
//! (Var) depending on instantiation.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy)]
struct Node {
    parents: [usize; 2],
    weights: [f64; 2],
}

/// Operation recorder. One tape per backward pass; cheap to create per batch.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, parents: [usize; 2], weights: [f64; 2]) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len();
        nodes.push(Node { parents, weights });
        index
    }

    /// New leaf variable (a parameter or input the backward pass tracks).
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = {
            let len = self.len();
            self.push([len, len], [0.0, 0.0])
        };
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// A constant, recorded as a leaf whose adjoint is simply never used.
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.var(value)
    }
}

/// Handle to one scalar on a [`Tape`]. Copyable; all arithmetic records nodes.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var[{}]={}", self.index, self.value)
    }
}

impl<'t> Var<'t> {
    pub fn value(self) -> f64 {
        self.value
    }

    fn unary(self, weight: f64, value: f64) -> Var<'t> {
        let index = self.tape.push([self.index, self.index], [weight, 0.0]);
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    fn binary(self, other: Var<'t>, w_self: f64, w_other: f64, value: f64) -> Var<'t> {
        let index = self
            .tape
            .push([self.index, other.index], [w_self, w_other]);
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.value.exp();
        self.unary(e, e)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(1.0 / self.value, self.value.ln())
    }

    /// Numerically stable `ln(1 + exp(x))`; derivative is the logistic sigmoid.
    pub fn softplus(self) -> Var<'t> {
        let x = self.value;
        let value = x.max(0.0) + (-x.abs()).exp().ln_1p();
        let sigmoid = if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        };
        self.unary(sigmoid, value)
    }

    /// Clamp against constant bounds; gradient is zero outside `[lo, hi]`.
    pub fn clamped(self, lo: f64, hi: f64) -> Var<'t> {
        let inside = self.value >= lo && self.value <= hi;
        self.unary(
            if inside { 1.0 } else { 0.0 },
            self.value.clamp(lo, hi),
        )
    }

    /// Backward sweep seeded at this variable.
    pub fn grad(self) -> Grads {
        let nodes = self.tape.nodes.borrow();
        let mut adjoints = vec![0.0; nodes.len()];
        adjoints[self.index] = 1.0;
        for i in (0..=self.index).rev() {
            let adj = adjoints[i];
            if adj == 0.0 {
                continue;
            }
            let node = nodes[i];
            adjoints[node.parents[0]] += node.weights[0] * adj;
            adjoints[node.parents[1]] += node.weights[1] * adj;
        }
        // Leaves point at themselves, so the loop above adds w*adj = 0 to
        // their own slot; the stored adjoint is already correct.
        Grads { adjoints }
    }
}

/// Adjoints from one backward sweep.
pub struct Grads {
    adjoints: Vec<f64>,
}

impl Grads {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adjoints[v.index]
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, 1.0, 1.0, self.value + rhs.value)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, 1.0, -1.0, self.value - rhs.value)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, rhs.value, self.value, self.value * rhs.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let inv = 1.0 / rhs.value;
        self.binary(rhs, inv, -self.value * inv * inv, self.value / rhs.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-1.0, -self.value)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(1.0, self.value + rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(1.0, self.value - rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(rhs, self.value * rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.unary(1.0 / rhs, self.value / rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(-1.0, self - rhs.value)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

/// Scalar abstraction shared by the plain-`f64` and the tape-recording paths.
///
/// `Lift` carries whatever context creating a constant needs: nothing for
/// `f64`, the tape for [`Var`].
pub trait Scalar:
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
    type Lift: Copy;

    fn lift(ctx: Self::Lift, value: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn softplus(self) -> Self;
    fn clamped(self, lo: f64, hi: f64) -> Self;
}

impl Scalar for f64 {
    type Lift = ();

    fn lift(_: (), value: f64) -> f64 {
        value
    }

    fn value(self) -> f64 {
        self
    }

    fn exp(self) -> f64 {
        f64::exp(self)
    }

    fn ln(self) -> f64 {
        f64::ln(self)
    }

    fn softplus(self) -> f64 {
        self.max(0.0) + (-self.abs()).exp().ln_1p()
    }

    fn clamped(self, lo: f64, hi: f64) -> f64 {
        self.clamp(lo, hi)
    }
}

impl<'t> Scalar for Var<'t> {
    type Lift = &'t Tape;

    fn lift(tape: &'t Tape, value: f64) -> Var<'t> {
        tape.constant(value)
    }

    fn value(self) -> f64 {
        Var::value(self)
    }

    fn exp(self) -> Var<'t> {
        Var::exp(self)
    }

    fn ln(self) -> Var<'t> {
        Var::ln(self)
    }

    fn softplus(self) -> Var<'t> {
        Var::softplus(self)
    }

    fn clamped(self, lo: f64, hi: f64) -> Var<'t> {
        Var::clamped(self, lo, hi)
    }
}

/// Sum a nonempty iterator of scalars without needing a zero element.
pub(crate) fn sum<S: Scalar>(mut iter: impl Iterator<Item = S>) -> S {
    let first = iter.next().expect("sum over empty iterator");
    iter.fold(first, |acc, v| acc + v)
}
