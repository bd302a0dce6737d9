use serde::{Deserialize, Serialize};

/// Component counts: ‖A‖, ‖AN‖, ‖SN‖, ‖C‖.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub authorities: u64,
    pub authorization_nodes: u64,
    pub service_nodes: u64,
    pub consumers: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingAction {
    AddAuthority,
    RemoveAuthority,
    AddAuthorizationNode,
    RemoveAuthorizationNode,
    AddServiceNode,
    RemoveServiceNode,
    AddConsumer,
    RemoveConsumer,
    RevokeValidity,
    RecoverAuthorizationNode,
    RecoverServiceNode,
}

/// Counters for one scaling action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCost {
    pub action: ScalingAction,
    /// Messages sent to single components, key deliveries included.
    pub messages: u64,
    /// The subset of `messages` that carry key material.
    pub key_messages: u64,
    pub keying_ops: u64,
    /// ‖v‖: consumers re-keyed because they held a revoked attribute.
    pub v_partition: u64,
    pub before: Census,
    pub after: Census,
}

/// Counts effort per scaling action. Counters reset at `begin`.
#[derive(Debug, Clone, Default)]
pub struct ScalingLedger {
    open: Option<ActionCost>,
    history: Vec<ActionCost>,
}

impl ScalingLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn begin(&mut self, action: ScalingAction, census: Census) {
        debug_assert!(self.open.is_none(), "nested scaling action");
        self.open = Some(ActionCost {
            action,
            messages: 0,
            key_messages: 0,
            keying_ops: 0,
            v_partition: 0,
            before: census,
            after: census,
        });
    }

    fn cur(&mut self) -> Option<&mut ActionCost> {
        self.open.as_mut()
    }

    pub fn messages(&mut self, n: u64) {
        if let Some(c) = self.cur() {
            c.messages += n;
        }
    }

    pub fn key_messages(&mut self, n: u64) {
        if let Some(c) = self.cur() {
            c.messages += n;
            c.key_messages += n;
        }
    }

    pub fn keying_ops(&mut self, n: u64) {
        if let Some(c) = self.cur() {
            c.keying_ops += n;
        }
    }

    pub fn partition(&mut self, holders: u64) {
        if let Some(c) = self.cur() {
            c.v_partition += holders;
        }
    }

    pub fn end(&mut self, census: Census) -> Option<ActionCost> {
        let mut c = self.open.take()?;
        c.after = census;
        self.history.push(c.clone());
        Some(c)
    }

    /// Drops an action that failed part way.
    pub fn abandon(&mut self) {
        self.open = None;
    }

    pub fn history(&self) -> &[ActionCost] {
        &self.history
    }

    pub fn last(&self) -> Option<&ActionCost> {
        self.history.last()
    }
}
