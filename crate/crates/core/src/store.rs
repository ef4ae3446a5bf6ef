//! Flat container of named tensors; the unit of checkpointing and of the
//! optimizer's parameter vector.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Frozen tensors are carried along but never updated by training.
    pub trainable: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>, trainable: bool) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            trainable,
        })
    }

    pub fn scalar(value: f64, trainable: bool) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
            trainable,
        }
    }

    pub fn vector(data: Vec<f64>, trainable: bool) -> Self {
        Self {
            shape: vec![data.len()],
            data,
            trainable,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<(String, Tensor)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces `name`, keeping first-insertion order.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some((_, t)) => *t = tensor,
            None => self.entries.push((name, tensor)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    }

    pub fn require_scalar(&self, name: &str) -> Result<f64> {
        let t = self.require(name)?;
        match t.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::Checkpoint(format!(
                "tensor `{name}` should be scalar, has {} values",
                t.data.len()
            ))),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of trainable scalars.
    pub fn trainable_len(&self) -> usize {
        self.entries
            .iter()
            .filter(|(_, t)| t.trainable)
            .map(|(_, t)| t.data.len())
            .sum()
    }

    /// Trainable values concatenated in store order.
    pub fn flat_trainable(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|(_, t)| t.trainable)
            .flat_map(|(_, t)| t.data.iter().copied())
            .collect()
    }

    pub fn set_flat_trainable(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.trainable_len() {
            return Err(Error::Shape(format!(
                "store holds {} trainable values, got {}",
                self.trainable_len(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for (_, t) in self.entries.iter_mut().filter(|(_, t)| t.trainable) {
            let n = t.data.len();
            t.data.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}
