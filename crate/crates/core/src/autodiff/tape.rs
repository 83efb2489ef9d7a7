use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [usize; 2],
    partials: [f64; 2],
}

/// Append-only record of primitive operations.
///
/// Nodes are pushed in evaluation order, so the node list is already a
/// topological order and the reverse sweep is a single backwards pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
    val: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("idx", &self.idx).field("val", &self.val).finish()
    }
}

/// Adjoints of every node with respect to one output.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adjoints.get(v.idx).copied().unwrap_or(0.0)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { nodes: RefCell::new(Vec::with_capacity(n)) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops all recorded nodes. Outstanding `Var`s become meaningless.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    /// Registers a leaf.
    pub fn var(&self, val: f64) -> Var<'_> {
        let idx = self.push(Node { parents: [NO_PARENT; 2], partials: [0.0; 2] });
        Var { tape: self, idx, val }
    }

    fn push(&self, node: Node) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    fn unary(&self, a: &Var<'_>, val: f64, da: f64) -> Var<'_> {
        let idx = self.push(Node { parents: [a.idx, NO_PARENT], partials: [da, 0.0] });
        Var { tape: self, idx, val }
    }

    fn binary(&self, a: &Var<'_>, b: &Var<'_>, val: f64, da: f64, db: f64) -> Var<'_> {
        let idx = self.push(Node { parents: [a.idx, b.idx], partials: [da, db] });
        Var { tape: self, idx, val }
    }

    /// Reverse sweep from `out`; each node is visited once.
    pub fn gradient(&self, out: Var<'_>) -> Gradients {
        assert!(std::ptr::eq(self, out.tape), "output belongs to another tape");
        let nodes = self.nodes.borrow();
        let mut adjoints = vec![0.0; out.idx + 1];
        adjoints[out.idx] = 1.0;
        for i in (0..=out.idx).rev() {
            let adj = adjoints[i];
            if adj == 0.0 {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != NO_PARENT {
                    adjoints[p] += adj * node.partials[k];
                }
            }
        }
        Gradients { adjoints }
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.val
    }

    pub fn index(&self) -> usize {
        self.idx
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self::Output {
        self.tape.binary(&self, &rhs, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self::Output {
        self.tape.binary(&self, &rhs, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self::Output {
        self.tape.binary(&self, &rhs, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self::Output {
        let q = self.val / rhs.val;
        self.tape.binary(&self, &rhs, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self::Output {
        self.tape.unary(&self, -self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Self::Output {
        self.tape.unary(&self, self.val + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Self::Output {
        self.tape.unary(&self, self.val - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Self::Output {
        self.tape.unary(&self, self.val * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Self::Output {
        self.tape.unary(&self, self.val / rhs, 1.0 / rhs)
    }
}

impl Scalar for Var<'_> {
    fn value(&self) -> f64 {
        self.val
    }

    fn tanh(self) -> Self {
        let th = self.val.tanh();
        self.tape.unary(&self, th, 1.0 - th * th)
    }

    fn relu(self) -> Self {
        if self.val > 0.0 {
            self.tape.unary(&self, self.val, 1.0)
        } else {
            self.tape.unary(&self, 0.0, 0.0)
        }
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.tape.unary(&self, e, e)
    }

    fn ln(self) -> Self {
        self.tape.unary(&self, self.val.ln(), 1.0 / self.val)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotient_rule() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = tape.var(2.0);
        let z = x / y - x * 0.5 + (-y);
        let g = tape.gradient(z);
        assert_eq!(z.value(), 1.5 - 1.5 - 2.0);
        assert!((g.wrt(x) - (0.5 - 0.5)).abs() < 1e-15);
        assert!((g.wrt(y) - (-3.0 / 4.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn relu_kink_uses_zero_subgradient() {
        let tape = Tape::new();
        let x = tape.var(0.0);
        let y = x.relu();
        assert_eq!(tape.gradient(y).wrt(x), 0.0);
    }

    #[test]
    fn repeated_use_accumulates() {
        let tape = Tape::new();
        let x = tape.var(1.5);
        let y = x * x * x + x;
        let g = tape.gradient(y);
        assert!((g.wrt(x) - (3.0 * 1.5 * 1.5 + 1.0)).abs() < 1e-14);
    }
}
