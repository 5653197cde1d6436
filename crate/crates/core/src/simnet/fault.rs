use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::ids::{ChainId, GatewayId, NodeId, Tick};
use crate::scenario::{FaultEntry, FaultKindSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultError {
    #[error("unknown fault target: {0}")]
    UnknownTarget(String),
}

/// Which deliveries a partition drops.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Cut {
    /// Every chain in the set is cut off from everything outside it.
    Chains(BTreeSet<ChainId>),
    /// Individual links, unordered.
    Links(BTreeSet<(ChainId, ChainId)>),
}

impl Cut {
    pub fn severs(&self, a: &ChainId, b: &ChainId) -> bool {
        match self {
            Cut::Chains(s) => s.contains(a) != s.contains(b),
            Cut::Links(l) => l.contains(&ordered(a, b)),
        }
    }

    pub fn isolates(&self, c: &ChainId) -> bool {
        matches!(self, Cut::Chains(s) if s.contains(c))
    }
}

fn ordered(a: &ChainId, b: &ChainId) -> (ChainId, ChainId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum FaultKind {
    Partition(Cut),
    NodeCrash(NodeId),
    GatewayCrash(GatewayId),
    Heal(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FaultSpec {
    pub id: String,
    pub kind: FaultKind,
    pub at_tick: Tick,
    pub until_tick: Option<Tick>,
}

pub fn parse_node(s: &str) -> Option<NodeId> {
    let (c, i) = s.split_once("/n")?;
    Some(NodeId { chain: ChainId::new(c), index: i.parse().ok()? })
}

pub fn parse_gateway(s: &str) -> Option<GatewayId> {
    let (c, i) = s.split_once("/g")?;
    Some(GatewayId::new(ChainId::new(c), i.parse().ok()?))
}

impl FaultSpec {
    pub fn from_entry(e: &FaultEntry) -> Result<Self, FaultError> {
        let unknown = |what: &str| FaultError::UnknownTarget(format!("{}: {what}", e.id));
        let kind = match e.kind {
            FaultKindSpec::Partition if !e.chains.is_empty() => Cut::Chains(e.chains.iter().map(|c| ChainId::new(c.clone())).collect()).into(),
            FaultKindSpec::Partition => {
                Cut::Links(e.links.iter().map(|[a, b]| ordered(&ChainId::new(a.clone()), &ChainId::new(b.clone()))).collect()).into()
            }
            FaultKindSpec::NodeCrash => FaultKind::NodeCrash(e.node.as_deref().and_then(parse_node).ok_or_else(|| unknown("node"))?),
            FaultKindSpec::GatewayCrash => FaultKind::GatewayCrash(e.gateway.as_deref().and_then(parse_gateway).ok_or_else(|| unknown("gateway"))?),
            FaultKindSpec::Heal => FaultKind::Heal(e.target.clone().ok_or_else(|| unknown("target"))?),
        };
        Ok(FaultSpec { id: e.id.clone(), kind, at_tick: e.at, until_tick: e.until })
    }
}

impl From<Cut> for FaultKind {
    fn from(c: Cut) -> Self {
        FaultKind::Partition(c)
    }
}

/// Position in the global event order.
pub type Stamp = (Tick, u64);

/// Active faults plus the full partition history, which the delivery audit
/// checks the log against.
#[derive(Clone, Debug, Default)]
pub struct FaultState {
    active: BTreeMap<String, FaultKind>,
    injected: BTreeSet<String>,
    history: Vec<(Cut, Stamp, Option<Stamp>)>,
    history_index: BTreeMap<String, usize>,
}

impl FaultState {
    pub fn activate(&mut self, spec: &FaultSpec, now: Stamp) {
        if let FaultKind::Partition(cut) = &spec.kind {
            self.history_index.insert(spec.id.clone(), self.history.len());
            self.history.push((cut.clone(), now, None));
        }
        self.injected.insert(spec.id.clone());
        self.active.insert(spec.id.clone(), spec.kind.clone());
    }

    /// Deactivates `target`. Healing an already healed fault is a no-op;
    /// healing one never injected is an error.
    pub fn heal(&mut self, target: &str, now: Stamp) -> Result<Option<FaultKind>, FaultError> {
        if !self.injected.contains(target) {
            return Err(FaultError::UnknownTarget(target.to_owned()));
        }
        let k = self.active.remove(target);
        if let (Some(FaultKind::Partition(_)), Some(i)) = (&k, self.history_index.get(target)) {
            self.history[*i].2 = Some(now);
        }
        Ok(k)
    }

    pub fn link_cut(&self, a: &ChainId, b: &ChainId) -> bool {
        self.active.values().any(|k| matches!(k, FaultKind::Partition(c) if c.severs(a, b)))
    }

    pub fn isolated(&self, c: &ChainId) -> bool {
        self.active.values().any(|k| matches!(k, FaultKind::Partition(cut) if cut.isolates(c)))
    }

    pub fn node_down(&self, n: &NodeId) -> bool {
        self.active.values().any(|k| matches!(k, FaultKind::NodeCrash(x) if x == n))
    }

    pub fn gateway_down(&self, g: &GatewayId) -> bool {
        self.active.values().any(|k| matches!(k, FaultKind::GatewayCrash(x) if x == g))
    }

    /// Whether some partition severed `a`-`b` at event position `at`.
    pub fn was_cut(&self, a: &ChainId, b: &ChainId, at: Stamp) -> bool {
        self.history.iter().any(|(c, from, to)| *from <= at && to.is_none_or(|t| at < t) && c.severs(a, b))
    }
}
