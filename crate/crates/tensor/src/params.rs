use std::collections::BTreeMap;

use crate::graph::{Gradients, Graph, Var};
use crate::tensor::Tensor;
use crate::TensorError;

/// Numeric precision of stored parameters. Only double precision is
/// implemented; the tag is carried so stored files can say what they hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
}

impl Precision {
    pub fn tag(self) -> u8 {
        match self {
            Precision::F64 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        (tag == 1).then_some(Precision::F64)
    }
}

/// Named tensors with fixed shapes, iterated in name order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    tensors: BTreeMap<String, Tensor>,
    precision: Precision,
}

impl Default for ParameterStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParameterStore {
    pub fn new() -> Self {
        Self {
            tensors: BTreeMap::new(),
            precision: Precision::F64,
        }
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), TensorError> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(TensorError::DuplicateName(name));
        }
        if !tensor.is_finite() {
            return Err(TensorError::NonFinite(name));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    /// Replaces the values of an existing tensor; the shape must not change.
    pub fn set(&mut self, name: &str, tensor: Tensor) -> Result<(), TensorError> {
        let slot = self
            .tensors
            .get_mut(name)
            .ok_or_else(|| TensorError::UnknownName(name.to_string()))?;
        if slot.shape() != tensor.shape() {
            return Err(TensorError::ShapeChange {
                name: name.to_string(),
                old: slot.shape().to_vec(),
                new: tensor.shape().to_vec(),
            });
        }
        *slot = tensor;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalars held.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Zero-valued store with the same names and shapes.
    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
            precision: self.precision,
        }
    }

    /// Copies every tensor whose name starts with `prefix` into a new store.
    pub fn subset(&self, prefix: &str) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .filter(|(k, _)| k.starts_with(prefix))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            precision: self.precision,
        }
    }

    /// Every tensor's bytes, concatenated in name order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.numel() * 8);
        for t in self.tensors.values() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// A [`ParameterStore`] placed on a [`Graph`] for one forward pass.
pub struct Bound<'g> {
    vars: BTreeMap<String, Var<'g>>,
}

impl<'g> Bound<'g> {
    /// Binds every tensor as a trainable leaf when `trainable`, else as a
    /// constant that gradients never reach.
    pub fn new(graph: &'g Graph, store: &ParameterStore, trainable: bool) -> Self {
        let vars = store
            .iter()
            .map(|(name, t)| {
                let v = if trainable {
                    graph.param(t.clone())
                } else {
                    graph.constant(t.clone())
                };
                (name.to_string(), v)
            })
            .collect();
        Self { vars }
    }

    /// Wraps variables that were bound elsewhere.
    pub fn from_vars(vars: BTreeMap<String, Var<'g>>) -> Self {
        Self { vars }
    }

    /// Adds the variables of `other`, replacing any of the same name.
    pub fn extend(&mut self, other: Bound<'g>) {
        self.vars.extend(other.vars);
    }

    /// Variable bound for `name`. Panics when the store lacks it, since
    /// network code only asks for names it created.
    pub fn get(&self, name: &str) -> Var<'g> {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` is not bound"))
    }

    pub fn try_get(&self, name: &str) -> Option<Var<'g>> {
        self.vars.get(name).copied()
    }

    /// Gradients for every bound tensor, zeros where none arrived.
    pub fn gradients(&self, grads: &Gradients) -> BTreeMap<String, Tensor> {
        self.vars
            .iter()
            .map(|(name, v)| (name.clone(), grads.get_or_zeros(*v)))
            .collect()
    }
}
