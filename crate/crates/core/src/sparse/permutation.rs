use crate::error::{Error, Result};

/// How a permutation was produced. Only informational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationKind {
    Identity,
    Reverse,
    FillReducing,
    Composite,
}

/// A permutation `Π` of `0..p` stored as `order`, with `(Π x)[k] = x[order[k]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    order: Vec<usize>,
    kind: PermutationKind,
}

impl Permutation {
    pub fn new(order: Vec<usize>, kind: PermutationKind) -> Result<Self> {
        let p = order.len();
        let mut seen = vec![false; p];
        for &o in &order {
            if o >= p {
                return Err(Error::InvalidPermutation(format!(
                    "index {o} out of range for length {p}"
                )));
            }
            if std::mem::replace(&mut seen[o], true) {
                return Err(Error::InvalidPermutation(format!("index {o} repeated")));
            }
        }
        Ok(Self { order, kind })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            order: (0..p).collect(),
            kind: PermutationKind::Identity,
        }
    }

    pub fn reverse(p: usize) -> Self {
        Self {
            order: (0..p).rev().collect(),
            kind: PermutationKind::Reverse,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn kind(&self) -> PermutationKind {
        self.kind
    }

    /// The inverse permutation: `inverse().order()[order[k]] == k`.
    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.order.len()];
        for (k, &o) in self.order.iter().enumerate() {
            inv[o] = k;
        }
        Self {
            order: inv,
            kind: self.kind,
        }
    }

    /// `b` applied after `self` on already permuted vectors:
    /// `c.apply(x) == b.apply(&self.apply(x))`.
    pub fn then(&self, b: &Permutation) -> Result<Self> {
        if b.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "permutation composition",
                expected: self.len(),
                found: b.len(),
            });
        }
        let order = b.order.iter().map(|&k| self.order[k]).collect();
        Ok(Self {
            order,
            kind: PermutationKind::Composite,
        })
    }

    /// `Π x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&o| x[o]).collect()
    }

    /// `Πᵀ y`, undoing [`apply`](Self::apply).
    pub fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; y.len()];
        for (k, &o) in self.order.iter().enumerate() {
            x[o] = y[k];
        }
        x
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(k, &o)| k == o)
    }
}
