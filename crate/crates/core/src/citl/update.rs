//! Output-weight update rules applied after a node is accepted, selected
//! by name at runtime.

use std::collections::BTreeMap;

use super::state::{global_weights_citl, GrowthState, NodeOutputs, Penalties};
use crate::error::{Error, Result};

pub trait WeightUpdate: Send + Sync {
    fn name(&self) -> &'static str;

    /// Appends `node` to `state` and sets output weights.
    fn append(&self, state: &mut GrowthState, node: &NodeOutputs, pen: &Penalties) -> Result<()>;
}

/// Re-solves every output weight against the full objective.
#[derive(Debug, Default, Clone, Copy)]
pub struct GlobalUpdate;

impl WeightUpdate for GlobalUpdate {
    fn name(&self) -> &'static str {
        "global"
    }

    fn append(&self, state: &mut GrowthState, node: &NodeOutputs, pen: &Penalties) -> Result<()> {
        state.push_outputs(node)?;
        let t_tl = state.t_tl.clone();
        let beta = global_weights_citl(state, &t_tl, pen)?;
        state.set_weights(beta)
    }
}

/// Sets only the new node's weight in closed form; earlier weights stay fixed.
#[derive(Debug, Default, Clone, Copy)]
pub struct IncrementalUpdate;

impl WeightUpdate for IncrementalUpdate {
    fn name(&self) -> &'static str {
        "incremental"
    }

    fn append(&self, state: &mut GrowthState, node: &NodeOutputs, pen: &Penalties) -> Result<()> {
        let w = state.analyze(&node.h_tl, &node.h_tu, &node.h_t, pen)?.weights(pen);
        state.append_with_weights(node, &w)
    }
}

pub struct UpdateRegistry {
    rules: BTreeMap<&'static str, Box<dyn WeightUpdate>>,
}

impl UpdateRegistry {
    pub fn empty() -> Self {
        UpdateRegistry {
            rules: BTreeMap::new(),
        }
    }

    /// Registry holding `global` and `incremental`.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(GlobalUpdate));
        r.register(Box::new(IncrementalUpdate));
        r
    }

    pub fn register(&mut self, rule: Box<dyn WeightUpdate>) {
        self.rules.insert(rule.name(), rule);
    }

    pub fn get(&self, name: &str) -> Result<&dyn WeightUpdate> {
        self.rules.get(name).map(|b| b.as_ref()).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown weight mode {name:?} (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.rules.keys().copied().collect()
    }
}

impl Default for UpdateRegistry {
    fn default() -> Self {
        Self::standard()
    }
}
