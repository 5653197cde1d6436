//! Blockchain autonomous systems.
//!
//! A chain is a set of consensus nodes behind boundary gateways, an
//! append-only ledger, a four-flag permission regime and a consensus
//! abstraction reduced to two numbers: the quorum fraction and the
//! confirmation latency in ticks. Forks are not modelled.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{AuthoritativePointer, CrossId, MaskTable};
use crate::ids::{AppId, ChainId, Digest, GatewayId, IdempotencyKey, LocalRef, NodeId, Tick, TransferId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("permission denied")]
    PermissionDenied,
    #[error("semantic type mismatch: chain records {chain}, unit is {unit}")]
    SemanticMismatch { chain: SemanticType, unit: SemanticType },
    #[error("chain unreachable")]
    Unreachable,
    #[error("not found")]
    NotFound,
    #[error("invalid transfer unit: {0}")]
    InvalidUnit(&'static str),
    #[error("invalid permission regime: node permissioning requires consensus permissioning")]
    InvalidRegime,
    #[error("invalid chain parameters: {0}")]
    InvalidParameters(&'static str),
    #[error("entry {0} already carries a mark")]
    AlreadyMarked(LocalRef),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemanticType {
    Payments,
    AssetRegistry,
    GenericRecord,
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SemanticType::Payments => "payments",
            SemanticType::AssetRegistry => "asset-registry",
            SemanticType::GenericRecord => "generic-record",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Directionality {
    Uni,
    Bi,
}

/// Four independent permissioning flags. Node permissioning subsumes
/// consensus permissioning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermissionRegime {
    #[serde(default)]
    pub node_permissioned: bool,
    #[serde(default)]
    pub consensus_permissioned: bool,
    #[serde(default)]
    pub user_write_permissioned: bool,
    #[serde(default)]
    pub user_read_permissioned: bool,
}

impl PermissionRegime {
    pub fn new(node: bool, consensus: bool, write: bool, read: bool) -> Result<Self, ChainError> {
        let r = PermissionRegime {
            node_permissioned: node,
            consensus_permissioned: consensus,
            user_write_permissioned: write,
            user_read_permissioned: read,
        };
        r.validate()?;
        Ok(r)
    }

    /// Fully private deployment: every flag set.
    pub fn private() -> Self {
        PermissionRegime {
            node_permissioned: true,
            consensus_permissioned: true,
            user_write_permissioned: true,
            user_read_permissioned: true,
        }
    }

    pub fn open() -> Self {
        PermissionRegime::default()
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if self.node_permissioned && !self.consensus_permissioned {
            return Err(ChainError::InvalidRegime);
        }
        Ok(())
    }

    /// Nodes of a chain that does not permission node membership are anonymous.
    pub fn nodes_anonymous(&self) -> bool {
        !self.node_permissioned
    }
}

/// The datagram-equivalent of a transaction: what an originator hands to any chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferUnit {
    pub payload_digest: Digest,
    pub directionality: Directionality,
    pub intended_peer: Option<AppId>,
    pub semantic_type: SemanticType,
    pub idempotency_key: IdempotencyKey,
}

impl TransferUnit {
    pub fn uni(payload: &[u8], semantic_type: SemanticType, key: impl Into<String>) -> Self {
        TransferUnit {
            payload_digest: Digest::of(payload),
            directionality: Directionality::Uni,
            intended_peer: None,
            semantic_type,
            idempotency_key: IdempotencyKey::new(key),
        }
    }

    pub fn bi(payload: &[u8], semantic_type: SemanticType, key: impl Into<String>, peer: AppId) -> Self {
        TransferUnit {
            payload_digest: Digest::of(payload),
            directionality: Directionality::Bi,
            intended_peer: Some(peer),
            semantic_type,
            idempotency_key: IdempotencyKey::new(key),
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        match (self.directionality, &self.intended_peer) {
            (Directionality::Bi, None) => Err(ChainError::InvalidUnit("bi-directional unit without intended peer")),
            (Directionality::Uni, Some(_)) => Err(ChainError::InvalidUnit("uni-directional unit names a peer")),
            _ => Ok(()),
        }
    }

    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.payload_digest.0);
        out.push(self.directionality as u8);
        push_str(out, self.intended_peer.as_ref().map(|a| a.as_str()).unwrap_or(""));
        push_str(out, &self.semantic_type.to_string());
        push_str(out, self.idempotency_key.as_str());
    }
}

/// What a ledger entry records beyond the raw unit. Gateway bookkeeping
/// (locks, transferred asset records, attestations) lives on the same
/// append-only ledger as application data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EntryRecord {
    Data,
    Lock { asset: CrossId, asset_ref: LocalRef, transfer: TransferId },
    Release { asset: CrossId, asset_ref: LocalRef, transfer: TransferId },
    AssetRecord { asset: CrossId, transfer: TransferId, beneficiary: AppId, from: ChainId },
    Attestation { asset: CrossId, claim_digest: Digest, signers: Vec<GatewayId> },
}

impl EntryRecord {
    pub fn label(&self) -> &'static str {
        match self {
            EntryRecord::Data => "data",
            EntryRecord::Lock { .. } => "lock",
            EntryRecord::Release { .. } => "release",
            EntryRecord::AssetRecord { .. } => "asset-record",
            EntryRecord::Attestation { .. } => "attestation",
        }
    }

    fn encode(&self, out: &mut Vec<u8>) {
        push_str(out, self.label());
        match self {
            EntryRecord::Data => {}
            EntryRecord::Lock { asset, asset_ref, transfer } | EntryRecord::Release { asset, asset_ref, transfer } => {
                push_str(out, &asset.to_string());
                push_str(out, &asset_ref.to_string());
                push_str(out, transfer.as_str());
            }
            EntryRecord::AssetRecord { asset, transfer, beneficiary, from } => {
                push_str(out, &asset.to_string());
                push_str(out, transfer.as_str());
                push_str(out, beneficiary.as_str());
                push_str(out, from.as_str());
            }
            EntryRecord::Attestation { asset, claim_digest, signers } => {
                push_str(out, &asset.to_string());
                out.extend_from_slice(&claim_digest.0);
                for s in signers {
                    push_str(out, &s.to_string());
                }
            }
        }
    }
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub local_ref: LocalRef,
    pub unit: TransferUnit,
    pub record: EntryRecord,
    pub submitted_tick: Tick,
    pub confirmed_tick: Tick,
    pub confirming_nodes: BTreeSet<NodeId>,
}

impl LedgerEntry {
    pub fn digest(&self) -> Digest {
        let mut buf = Vec::with_capacity(128);
        push_str(&mut buf, &self.local_ref.to_string());
        self.unit.encode(&mut buf);
        self.record.encode(&mut buf);
        buf.extend_from_slice(&self.submitted_tick.to_be_bytes());
        buf.extend_from_slice(&self.confirmed_tick.to_be_bytes());
        for n in &self.confirming_nodes {
            push_str(&mut buf, &n.to_string());
        }
        Digest::of(&buf)
    }
}

/// Marks are compensating annotations on entries; entries themselves are never rewritten.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mark", rename_all = "kebab-case")]
pub enum Mark {
    Pointer(AuthoritativePointer),
    Void { transfer: TransferId },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
    marks: BTreeMap<LocalRef, Mark>,
    #[serde(skip)]
    by_ref: BTreeMap<LocalRef, usize>,
    #[serde(skip)]
    by_key: BTreeMap<IdempotencyKey, usize>,
}

impl Ledger {
    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn marks(&self) -> &BTreeMap<LocalRef, Mark> {
        &self.marks
    }

    pub fn get(&self, r: &LocalRef) -> Option<&LedgerEntry> {
        self.by_ref.get(r).map(|&i| &self.entries[i])
    }

    pub fn mark_of(&self, r: &LocalRef) -> Option<&Mark> {
        self.marks.get(r)
    }

    pub fn find_by_key(&self, key: &IdempotencyKey) -> Option<&LedgerEntry> {
        self.by_key.get(key).map(|&i| &self.entries[i])
    }

    fn append(&mut self, entry: LedgerEntry) {
        let i = self.entries.len();
        self.by_ref.insert(entry.local_ref.clone(), i);
        self.by_key.entry(entry.unit.idempotency_key.clone()).or_insert(i);
        self.entries.push(entry);
    }

    /// Adds a mark to an entry. Each entry may be marked at most once.
    pub fn mark(&mut self, r: &LocalRef, mark: Mark) -> Result<(), ChainError> {
        if !self.by_ref.contains_key(r) {
            return Err(ChainError::NotFound);
        }
        if self.marks.contains_key(r) {
            return Err(ChainError::AlreadyMarked(r.clone()));
        }
        self.marks.insert(r.clone(), mark);
        Ok(())
    }

    /// Digest over the first `n` entries, used by the append-only audit.
    pub fn prefix_digest(&self, n: usize) -> Digest {
        let digests: Vec<[u8; 32]> = self.entries[..n.min(self.entries.len())].iter().map(|e| e.digest().0).collect();
        Digest::of_parts(digests.iter().map(|d| d.as_slice()))
    }
}

/// Opaque capability token checked against a chain's access table.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Credential(pub String);

impl Credential {
    pub fn none() -> Self {
        Credential(String::new())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rights {
    pub read: bool,
    pub write: bool,
}

#[derive(Clone, Debug, Default)]
pub struct AccessTable {
    tokens: BTreeMap<String, (AppId, Rights)>,
}

impl AccessTable {
    /// Issues a capability for `app`. Tokens are deterministic so replays match.
    pub fn issue(&mut self, chain: &ChainId, app: &AppId, rights: Rights) -> Credential {
        let token = format!("cap-{}-{}-{}", chain, app, self.tokens.len());
        self.tokens.insert(token.clone(), (app.clone(), rights));
        Credential(token)
    }

    pub fn lookup(&self, cred: &Credential) -> Option<&(AppId, Rights)> {
        self.tokens.get(&cred.0)
    }

    pub fn can_write(&self, cred: &Credential) -> bool {
        self.lookup(cred).is_some_and(|(_, r)| r.write)
    }

    pub fn can_read(&self, cred: &Credential) -> bool {
        self.lookup(cred).is_some_and(|(_, r)| r.read)
    }

    pub fn app_can_read(&self, app: &AppId) -> bool {
        self.tokens.values().any(|(a, r)| a == app && r.read)
    }

    pub fn revoke_app(&mut self, app: &AppId) {
        self.tokens.retain(|_, (a, _)| a != app);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingReceipt {
    pub chain_id: ChainId,
    pub local_ref: LocalRef,
    pub idempotency_key: IdempotencyKey,
    /// True when the key was already known and no new unit was queued.
    pub deduplicated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct PendingUnit {
    local_ref: LocalRef,
    unit: TransferUnit,
    record: EntryRecord,
    submitted_tick: Tick,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainStatus {
    pub live_node_count: usize,
    /// False for node-anonymous chains, where the count is an advertised lower bound.
    pub live_count_exact: bool,
    pub pending_count: usize,
    pub mean_confirm_latency: f64,
    pub reachable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LedgerQuery {
    Local(LocalRef),
    Cross(CrossId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LedgerView {
    pub entry: LedgerEntry,
    pub mark: Option<Mark>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainConfig {
    pub id: ChainId,
    /// Hierarchical dot-separated label path, e.g. `trade.bc1`.
    pub path: String,
    pub semantic_type: SemanticType,
    pub regime: PermissionRegime,
    pub node_count: u32,
    pub quorum: Ratio<u64>,
    pub confirm_latency: Tick,
    pub denomination: Option<String>,
}

#[derive(Clone, Debug)]
pub struct BlockchainSystem {
    id: ChainId,
    path: String,
    semantic_type: SemanticType,
    regime: PermissionRegime,
    quorum: Ratio<u64>,
    confirm_latency: Tick,
    denomination: Option<String>,
    nodes: BTreeMap<NodeId, bool>,
    gateways: BTreeSet<GatewayId>,
    ledger: Ledger,
    pending: Vec<PendingUnit>,
    next_seq: u64,
    pub access: AccessTable,
    pub masks: MaskTable,
}

impl BlockchainSystem {
    pub fn new(cfg: ChainConfig) -> Result<Self, ChainError> {
        cfg.regime.validate()?;
        if cfg.node_count == 0 {
            return Err(ChainError::InvalidParameters("chain needs at least one node"));
        }
        let zero = Ratio::from_integer(0);
        if cfg.quorum <= zero || cfg.quorum > Ratio::from_integer(1) {
            return Err(ChainError::InvalidParameters("quorum fraction must lie in (0, 1]"));
        }
        if cfg.confirm_latency == 0 {
            return Err(ChainError::InvalidParameters("confirmation latency must be positive"));
        }
        let nodes = (0..cfg.node_count)
            .map(|i| (NodeId { chain: cfg.id.clone(), index: i }, true))
            .collect();
        Ok(BlockchainSystem {
            id: cfg.id,
            path: cfg.path,
            semantic_type: cfg.semantic_type,
            regime: cfg.regime,
            quorum: cfg.quorum,
            confirm_latency: cfg.confirm_latency,
            denomination: cfg.denomination,
            nodes,
            gateways: BTreeSet::new(),
            ledger: Ledger::default(),
            pending: Vec::new(),
            next_seq: 0,
            access: AccessTable::default(),
            masks: MaskTable::default(),
        })
    }

    pub fn id(&self) -> &ChainId {
        &self.id
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn semantic_type(&self) -> SemanticType {
        self.semantic_type
    }

    pub fn regime(&self) -> &PermissionRegime {
        &self.regime
    }

    pub fn quorum(&self) -> Ratio<u64> {
        self.quorum
    }

    pub fn confirm_latency(&self) -> Tick {
        self.confirm_latency
    }

    pub fn denomination(&self) -> Option<&str> {
        self.denomination.as_deref()
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, bool)> {
        self.nodes.iter().map(|(n, l)| (n, *l))
    }

    pub fn gateways(&self) -> &BTreeSet<GatewayId> {
        &self.gateways
    }

    pub fn register_gateway(&mut self, gw: GatewayId) -> Result<(), ChainError> {
        if gw.chain != self.id {
            return Err(ChainError::InvalidParameters("gateway belongs to another chain"));
        }
        self.gateways.insert(gw);
        Ok(())
    }

    pub fn live_node_count(&self) -> usize {
        self.nodes.values().filter(|l| **l).count()
    }

    /// Confirmations needed, counted against the whole registered population.
    pub fn quorum_size(&self) -> usize {
        let total = self.nodes.len() as u64;
        (self.quorum * Ratio::from_integer(total)).ceil().to_integer() as usize
    }

    pub fn set_node_live(&mut self, node: &NodeId, live: bool) -> Result<(), ChainError> {
        match self.nodes.get_mut(node) {
            Some(l) => {
                *l = live;
                Ok(())
            }
            None => Err(ChainError::NotFound),
        }
    }

    pub fn has_node(&self, node: &NodeId) -> bool {
        self.nodes.contains_key(node)
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn is_pending(&self, r: &LocalRef) -> bool {
        self.pending.iter().any(|p| &p.local_ref == r)
    }

    /// Application submission. Reachability across the simulated network is
    /// checked by the caller; a chain with every node down is unreachable here.
    pub fn submit(&mut self, unit: TransferUnit, credential: &Credential, now: Tick) -> Result<PendingReceipt, ChainError> {
        if self.regime.user_write_permissioned && !self.access.can_write(credential) {
            return Err(ChainError::PermissionDenied);
        }
        if self.live_node_count() == 0 {
            return Err(ChainError::Unreachable);
        }
        self.enqueue(unit, EntryRecord::Data, now)
    }

    /// Submission by one of this chain's own gateways. Gateways are
    /// intra-domain writers and bypass the user write check.
    pub fn submit_record(&mut self, unit: TransferUnit, record: EntryRecord, now: Tick) -> Result<PendingReceipt, ChainError> {
        self.enqueue(unit, record, now)
    }

    fn enqueue(&mut self, unit: TransferUnit, record: EntryRecord, now: Tick) -> Result<PendingReceipt, ChainError> {
        unit.validate()?;
        if unit.semantic_type != self.semantic_type {
            return Err(ChainError::SemanticMismatch { chain: self.semantic_type, unit: unit.semantic_type });
        }
        let key = unit.idempotency_key.clone();
        let existing = self
            .ledger
            .find_by_key(&key)
            .map(|e| e.local_ref.clone())
            .or_else(|| self.pending.iter().find(|p| p.unit.idempotency_key == key).map(|p| p.local_ref.clone()));
        if let Some(local_ref) = existing {
            return Ok(PendingReceipt { chain_id: self.id.clone(), local_ref, idempotency_key: key, deduplicated: true });
        }
        let local_ref = LocalRef { chain: self.id.clone(), seq: self.next_seq };
        self.next_seq += 1;
        self.pending.push(PendingUnit { local_ref: local_ref.clone(), unit, record, submitted_tick: now });
        Ok(PendingReceipt { chain_id: self.id.clone(), local_ref, idempotency_key: key, deduplicated: false })
    }

    /// Earliest tick at which a consensus round could confirm something, given
    /// the current live population.
    pub fn next_confirm_tick(&self) -> Option<Tick> {
        if self.live_node_count() < self.quorum_size() {
            return None;
        }
        self.pending.iter().map(|p| p.submitted_tick + self.confirm_latency).min()
    }

    /// One consensus round. Every pending unit old enough is confirmed, in
    /// submission order, provided the live population meets the quorum.
    pub fn advance_consensus(&mut self, now: Tick) -> Vec<LedgerEntry> {
        if self.pending.is_empty() || self.live_node_count() < self.quorum_size() {
            return Vec::new();
        }
        let live: BTreeSet<NodeId> = self.nodes.iter().filter(|(_, l)| **l).map(|(n, _)| n.clone()).collect();
        let latency = self.confirm_latency;
        let (ready, waiting): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.pending).into_iter().partition(|p| now >= p.submitted_tick + latency);
        self.pending = waiting;
        let mut confirmed = Vec::with_capacity(ready.len());
        for p in ready {
            let entry = LedgerEntry {
                local_ref: p.local_ref,
                unit: p.unit,
                record: p.record,
                submitted_tick: p.submitted_tick,
                confirmed_tick: now,
                confirming_nodes: live.clone(),
            };
            self.ledger.append(entry.clone());
            confirmed.push(entry);
        }
        confirmed
    }

    fn resolve_query(&self, query: &LedgerQuery) -> Result<LocalRef, ChainError> {
        match query {
            LedgerQuery::Local(r) => Ok(r.clone()),
            LedgerQuery::Cross(id) => self.masks.local_of(id).cloned().ok_or(ChainError::NotFound),
        }
    }

    pub fn read_ledger(&self, query: &LedgerQuery, credential: &Credential) -> Result<LedgerView, ChainError> {
        if self.regime.user_read_permissioned && !self.access.can_read(credential) {
            return Err(ChainError::PermissionDenied);
        }
        self.read_unchecked(query)
    }

    /// Read on behalf of a gateway that has already validated a delegation.
    pub(crate) fn read_unchecked(&self, query: &LedgerQuery) -> Result<LedgerView, ChainError> {
        let r = self.resolve_query(query)?;
        if r.chain != self.id {
            return Err(ChainError::NotFound);
        }
        let entry = self.ledger.get(&r).ok_or(ChainError::NotFound)?.clone();
        let mark = self.ledger.mark_of(&r).cloned();
        Ok(LedgerView { entry, mark })
    }

    pub fn mark(&mut self, r: &LocalRef, mark: Mark) -> Result<(), ChainError> {
        self.ledger.mark(r, mark)
    }

    pub fn probe_status(&self, reachable: bool) -> Result<ChainStatus, ChainError> {
        if !reachable {
            return Err(ChainError::Unreachable);
        }
        let live = self.live_node_count();
        let (live_node_count, exact) = if self.regime.nodes_anonymous() {
            // Anonymous populations cannot be censused; the most recent
            // confirmation is evidence that at least that many nodes took part.
            let evidenced = self.ledger.entries().last().map(|e| e.confirming_nodes.len()).unwrap_or(0);
            (evidenced.min(live), false)
        } else {
            (live, true)
        };
        let entries = self.ledger.entries();
        let mean_confirm_latency = if entries.is_empty() {
            self.confirm_latency as f64
        } else {
            let total: u64 = entries.iter().map(|e| e.confirmed_tick - e.submitted_tick).sum();
            total as f64 / entries.len() as f64
        };
        Ok(ChainStatus {
            live_node_count,
            live_count_exact: exact,
            pending_count: self.pending.len(),
            mean_confirm_latency,
            reachable: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cfg(id: &str, nodes: u32, latency: Tick) -> ChainConfig {
        ChainConfig {
            id: ChainId::new(id),
            path: format!("test.{}", id.to_lowercase()),
            semantic_type: SemanticType::AssetRegistry,
            regime: PermissionRegime::private(),
            node_count: nodes,
            quorum: Ratio::new(2, 3),
            confirm_latency: latency,
            denomination: None,
        }
    }

    fn writer(chain: &mut BlockchainSystem) -> Credential {
        let id = chain.id().clone();
        chain.access.issue(&id, &AppId::new("X"), Rights { read: true, write: true })
    }

    fn node(chain: &str, i: u32) -> NodeId {
        NodeId { chain: ChainId::new(chain), index: i }
    }

    #[test]
    fn regime_rejects_node_without_consensus_permissioning() {
        assert_eq!(PermissionRegime::new(true, false, false, false), Err(ChainError::InvalidRegime));
        assert!(PermissionRegime::new(false, true, false, false).is_ok());
    }

    #[test]
    fn unit_directionality_invariant() {
        let mut u = TransferUnit::uni(b"x", SemanticType::Payments, "k");
        assert!(u.validate().is_ok());
        u.directionality = Directionality::Bi;
        assert!(u.validate().is_err());
        let b = TransferUnit::bi(b"x", SemanticType::Payments, "k", AppId::new("Y"));
        assert!(b.validate().is_ok());
    }

    #[test]
    fn submit_returns_receipt() {
        let mut bc1 = BlockchainSystem::new(cfg("BC1", 4, 3)).unwrap();
        let cred = writer(&mut bc1);
        let r = bc1.submit(TransferUnit::uni(b"u1", SemanticType::AssetRegistry, "u1"), &cred, 0).unwrap();
        assert_eq!(r.chain_id, ChainId::new("BC1"));
        assert!(!r.deduplicated);
        assert_eq!(bc1.pending_count(), 1);
    }

    #[test]
    fn write_permissioned_chain_denies_missing_credential() {
        let mut bc1 = BlockchainSystem::new(cfg("BC1", 4, 3)).unwrap();
        let err = bc1.submit(TransferUnit::uni(b"u1", SemanticType::AssetRegistry, "u1"), &Credential::none(), 0);
        assert_eq!(err, Err(ChainError::PermissionDenied));
    }

    #[test]
    fn semantic_gating() {
        let mut bc1 = BlockchainSystem::new(cfg("BC1", 4, 3)).unwrap();
        let cred = writer(&mut bc1);
        let err = bc1.submit(TransferUnit::uni(b"u1", SemanticType::Payments, "u1"), &cred, 0).unwrap_err();
        assert!(matches!(err, ChainError::SemanticMismatch { .. }));
    }

    #[test]
    fn resubmission_after_confirmation_is_deduplicated() {
        let mut bc1 = BlockchainSystem::new(cfg("BC1", 4, 3)).unwrap();
        let cred = writer(&mut bc1);
        let unit = TransferUnit::uni(b"u1", SemanticType::AssetRegistry, "u1");
        let first = bc1.submit(unit.clone(), &cred, 0).unwrap();
        assert_eq!(bc1.advance_consensus(3).len(), 1);
        let before: Vec<LedgerEntry> = bc1.ledger().entries().to_vec();
        let second = bc1.submit(unit, &cred, 4).unwrap();
        assert!(bc1.advance_consensus(7).is_empty());
        let after: Vec<LedgerEntry> = bc1.ledger().entries().to_vec();
        assert_eq!(first.local_ref, second.local_ref);
        assert!(second.deduplicated);
        assert_eq!(before, after);
        assert_eq!(bc1.pending_count(), 0);
    }

    #[test]
    fn healthy_quorum_confirms_at_latency() {
        let mut bc1 = BlockchainSystem::new(cfg("BC1", 4, 3)).unwrap();
        let cred = writer(&mut bc1);
        bc1.submit(TransferUnit::uni(b"u1", SemanticType::AssetRegistry, "u1"), &cred, 0).unwrap();
        assert!(bc1.advance_consensus(2).is_empty());
        let c = bc1.advance_consensus(3);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].confirming_nodes.len(), 4);
        assert_eq!(c[0].confirmed_tick, 3);
    }

    #[test]
    fn quorum_is_counted_against_total_population() {
        let mut bc1 = BlockchainSystem::new(cfg("BC1", 4, 3)).unwrap();
        let cred = writer(&mut bc1);
        assert_eq!(bc1.quorum_size(), 3);
        for i in 1..4 {
            bc1.set_node_live(&node("BC1", i), false).unwrap();
        }
        bc1.submit(TransferUnit::uni(b"u1", SemanticType::AssetRegistry, "u1"), &cred, 0).unwrap();
        for t in 0..100 {
            assert!(bc1.advance_consensus(t).is_empty());
        }
        assert_eq!(bc1.pending_count(), 1);
    }

    #[test]
    fn all_nodes_down_is_unreachable() {
        let mut bc1 = BlockchainSystem::new(cfg("BC1", 2, 3)).unwrap();
        let cred = writer(&mut bc1);
        bc1.set_node_live(&node("BC1", 0), false).unwrap();
        bc1.set_node_live(&node("BC1", 1), false).unwrap();
        let err = bc1.submit(TransferUnit::uni(b"u1", SemanticType::AssetRegistry, "u1"), &cred, 0);
        assert_eq!(err, Err(ChainError::Unreachable));
    }

    #[test]
    fn read_requires_credential_when_read_permissioned() {
        let mut bc1 = BlockchainSystem::new(cfg("BC1", 4, 3)).unwrap();
        let cred = writer(&mut bc1);
        let r = bc1.submit(TransferUnit::uni(b"u1", SemanticType::AssetRegistry, "u1"), &cred, 0).unwrap();
        bc1.advance_consensus(3);
        let q = LedgerQuery::Local(r.local_ref.clone());
        assert_eq!(bc1.read_ledger(&q, &cred).unwrap().entry.local_ref, r.local_ref);
        assert_eq!(bc1.read_ledger(&q, &Credential("forged".into())), Err(ChainError::PermissionDenied));
        let foreign = LedgerQuery::Local(LocalRef { chain: ChainId::new("BC2"), seq: 0 });
        assert_eq!(bc1.read_ledger(&foreign, &cred), Err(ChainError::NotFound));
    }

    #[test]
    fn marks_are_set_at_most_once() {
        let mut bc1 = BlockchainSystem::new(cfg("BC1", 4, 3)).unwrap();
        let cred = writer(&mut bc1);
        let r = bc1.submit(TransferUnit::uni(b"u1", SemanticType::AssetRegistry, "u1"), &cred, 0).unwrap();
        bc1.advance_consensus(3);
        bc1.mark(&r.local_ref, Mark::Void { transfer: TransferId::new("t") }).unwrap();
        assert!(matches!(
            bc1.mark(&r.local_ref, Mark::Void { transfer: TransferId::new("t") }),
            Err(ChainError::AlreadyMarked(_))
        ));
    }

    #[test]
    fn probe_counts_pending_units() {
        let mut bc1 = BlockchainSystem::new(cfg("BC1", 4, 3)).unwrap();
        let cred = writer(&mut bc1);
        let s = bc1.probe_status(true).unwrap();
        assert_eq!((s.live_node_count, s.pending_count, s.reachable), (4, 0, true));
        assert_eq!(s.mean_confirm_latency, 3.0);
        bc1.submit(TransferUnit::uni(b"a", SemanticType::AssetRegistry, "a"), &cred, 0).unwrap();
        bc1.submit(TransferUnit::uni(b"b", SemanticType::AssetRegistry, "b"), &cred, 0).unwrap();
        assert_eq!(bc1.probe_status(true).unwrap().pending_count, 2);
        assert_eq!(bc1.probe_status(false), Err(ChainError::Unreachable));
    }

    #[test]
    fn anonymous_chain_reports_lower_bound() {
        let mut c = cfg("P", 5, 1);
        c.regime = PermissionRegime::open();
        let mut p = BlockchainSystem::new(c).unwrap();
        let s = p.probe_status(true).unwrap();
        assert!(!s.live_count_exact);
        assert_eq!(s.live_node_count, 0);
        p.submit(TransferUnit::uni(b"a", SemanticType::AssetRegistry, "a"), &Credential::none(), 0).unwrap();
        p.advance_consensus(1);
        assert_eq!(p.probe_status(true).unwrap().live_node_count, 5);
    }
}
