use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

/// Ordered, named parameter tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    entries: Vec<(String, Tensor)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        debug_assert!(self.index_of(&name).is_none(), "duplicate parameter {name}");
        self.entries.push((name, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index_of(name).map(move |i| &mut self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Registers every tensor on `g` as a trainable leaf.
    pub fn bind(&self, g: &mut Graph) -> Result<BoundParams> {
        let vars = self
            .entries
            .iter()
            .map(|(_, t)| g.param(t.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundParams {
            names: self.entries.iter().map(|(n, _)| n.clone()).collect(),
            vars,
        })
    }
}

impl ParamStore {
    /// Pairs existing graph nodes with this store's names, e.g. to
    /// differentiate a forward pass with respect to externally created
    /// leaves. Shapes must match the stored tensors.
    pub fn bind_vars(&self, g: &Graph, vars: &[Var]) -> Result<BoundParams> {
        if vars.len() != self.entries.len() {
            return Err(Error::shape(
                "bind_vars",
                format!("{} nodes for {} parameters", vars.len(), self.entries.len()),
            ));
        }
        for ((name, t), &v) in self.entries.iter().zip(vars) {
            if g.shape(v) != t.shape() {
                return Err(Error::shape(
                    "bind_vars",
                    format!("node {:?} for parameter `{name}` {:?}", g.shape(v), t.shape()),
                ));
            }
        }
        Ok(BoundParams {
            names: self.entries.iter().map(|(n, _)| n.clone()).collect(),
            vars: vars.to_vec(),
        })
    }
}

/// Graph handles for a [`ParamStore`], in store order.
#[derive(Debug, Clone)]
pub struct BoundParams {
    names: Vec<String>,
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}
