//! Gateways: the only non-anonymous boundary entities of a chain.
//!
//! A gateway advertises reachability without topology, serves delegated
//! reads, co-signs threshold attestations ("vouches") for confirmations on
//! its home ledger and mediates cross-domain asset transfers.
//!
//! Signatures use an abstract deterministic scheme: a signature is the
//! SHA-256 of the signer's key handle and the claim bytes. It has no
//! cryptographic strength but preserves tamper detection and signer binding.

mod peering;
mod transfer;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::chain::{BlockchainSystem, ChainError, EntryRecord, LedgerQuery, LedgerView, PendingReceipt, TransferUnit};
use crate::identity::{CrossId, Resolver};
use crate::ids::{AppId, ChainId, Digest, GatewayId, Tick};

pub use peering::{AgreementId, PeeringAgreement, PeeringBook};
pub use transfer::{
    CrossDomainTransfer, Effect, GatewayMessage, Interop, MessageBody, TimerKind, TransferEvent, TransferRequest, TransferState,
    Transition,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("entry for the identifier is not confirmed")]
    NotConfirmed,
    #[error("insufficient live gateways: {live} live, {needed} needed")]
    InsufficientGateways { live: usize, needed: usize },
    #[error("delegation grant expired")]
    GrantExpired,
    #[error("delegation grant does not cover this request")]
    GrantMismatch,
    #[error("permission denied")]
    PermissionDenied,
    #[error("not found")]
    NotFound,
    #[error("gateway is down")]
    GatewayDown,
    #[error("no active peering agreement covers this transfer")]
    NoPeering,
    #[error("asset is not authoritative on the source chain")]
    NotAuthoritativeHere,
    #[error("asset is locked by transfer {0}")]
    AssetBusy(String),
    #[error("no live gateways on {0}")]
    NoLiveGateways(ChainId),
    #[error("destination chain does not record {0}")]
    SemanticMismatch(String),
    #[error("an identical agreement is already active")]
    DuplicateAgreement,
    #[error("invalid agreement: {0}")]
    InvalidAgreement(&'static str),
    #[error("unknown chain {0}")]
    UnknownChain(ChainId),
    #[error("unknown gateway {0}")]
    UnknownGateway(GatewayId),
    #[error("invalid grant: {0}")]
    InvalidGrant(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Gateway {
    pub gateway_id: GatewayId,
    pub home_chain: ChainId,
    #[serde(skip)]
    signing_key: Digest,
    pub live: bool,
}

/// Directory of every gateway: home chain, key handle and liveness.
#[derive(Clone, Debug, Default)]
pub struct GatewayRegistry {
    gateways: BTreeMap<GatewayId, Gateway>,
    thresholds: BTreeMap<ChainId, usize>,
}

impl GatewayRegistry {
    /// Registers `count` gateways for `chain`. `threshold` defaults to a strict
    /// majority of the chain's gateways.
    pub fn register_chain(&mut self, chain: &mut BlockchainSystem, count: u32, threshold: Option<usize>, key_seed: u64) -> Vec<GatewayId> {
        let id = chain.id().clone();
        let ids: Vec<GatewayId> = (0..count).map(|i| GatewayId::new(id.clone(), i)).collect();
        for gid in &ids {
            let key = Digest::of_parts([b"gateway-key".as_slice(), &key_seed.to_be_bytes(), gid.to_string().as_bytes()]);
            self.gateways.insert(gid.clone(), Gateway { gateway_id: gid.clone(), home_chain: id.clone(), signing_key: key, live: true });
            chain.register_gateway(gid.clone()).expect("gateway id carries its chain");
        }
        self.thresholds.insert(id, threshold.unwrap_or(count as usize / 2 + 1));
        ids
    }

    pub fn get(&self, gid: &GatewayId) -> Option<&Gateway> {
        self.gateways.get(gid)
    }

    pub fn all(&self) -> impl Iterator<Item = &Gateway> {
        self.gateways.values()
    }

    pub fn on_chain<'a>(&'a self, chain: &'a ChainId) -> impl Iterator<Item = &'a Gateway> + 'a {
        self.gateways.values().filter(move |g| &g.home_chain == chain)
    }

    /// Live gateways of a chain in ascending id order.
    pub fn live_on(&self, chain: &ChainId) -> Vec<GatewayId> {
        self.on_chain(chain).filter(|g| g.live).map(|g| g.gateway_id.clone()).collect()
    }

    pub fn is_live(&self, gid: &GatewayId) -> bool {
        self.gateways.get(gid).is_some_and(|g| g.live)
    }

    pub fn set_live(&mut self, gid: &GatewayId, live: bool) -> Result<(), GatewayError> {
        let g = self.gateways.get_mut(gid).ok_or_else(|| GatewayError::UnknownGateway(gid.clone()))?;
        g.live = live;
        Ok(())
    }

    pub fn threshold(&self, chain: &ChainId) -> usize {
        self.thresholds.get(chain).copied().unwrap_or(1)
    }

    fn key(&self, gid: &GatewayId) -> Option<&Digest> {
        self.gateways.get(gid).map(|g| &g.signing_key)
    }

    /// Signs claim bytes on behalf of a gateway. Returns `None` for unknown ids.
    pub fn sign(&self, gid: &GatewayId, claim_bytes: &[u8]) -> Option<Digest> {
        self.key(gid).map(|k| signature(k, claim_bytes))
    }
}

fn signature(key: &Digest, claim_bytes: &[u8]) -> Digest {
    Digest::of_parts([key.0.as_slice(), claim_bytes])
}

/// The statement a set of gateways vouches for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Claim {
    pub chain_id: ChainId,
    pub cross_id: CrossId,
    pub confirmed: bool,
    pub proof_digest: Digest,
}

impl Claim {
    /// Canonical length-prefixed encoding; signatures cover exactly these bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(96);
        for part in [self.chain_id.as_str().as_bytes(), self.cross_id.to_string().as_bytes()] {
            out.extend_from_slice(&(part.len() as u32).to_be_bytes());
            out.extend_from_slice(part);
        }
        out.push(self.confirmed as u8);
        out.extend_from_slice(&self.proof_digest.0);
        out
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.to_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VouchAttestation {
    pub claim: Claim,
    pub signatures: Vec<(GatewayId, Digest)>,
    pub threshold_k: usize,
    pub issued_tick: Tick,
}

impl VouchAttestation {
    /// Bit-exact serialization: length-prefixed claim bytes, then the
    /// threshold, issue tick and signer list.
    pub fn encode(&self) -> Vec<u8> {
        let claim = self.claim.to_bytes();
        let mut out = Vec::with_capacity(claim.len() + 64 * self.signatures.len());
        out.extend_from_slice(&(claim.len() as u32).to_be_bytes());
        out.extend_from_slice(&claim);
        out.extend_from_slice(&(self.threshold_k as u32).to_be_bytes());
        out.extend_from_slice(&self.issued_tick.to_be_bytes());
        out.extend_from_slice(&(self.signatures.len() as u32).to_be_bytes());
        for (gid, sig) in &self.signatures {
            let name = gid.to_string();
            out.extend_from_slice(&(name.len() as u32).to_be_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&sig.0);
        }
        out
    }

    pub fn signers(&self) -> Vec<GatewayId> {
        self.signatures.iter().map(|(g, _)| g.clone()).collect()
    }
}

/// Pure check any external party can run: the threshold is met by distinct
/// signers registered to the claimed chain, and every signature covers the
/// claim bytes. Signers may since have crashed.
pub fn verify_attestation(att: &VouchAttestation, registry: &GatewayRegistry) -> bool {
    if att.threshold_k == 0 {
        return false;
    }
    let bytes = att.claim.to_bytes();
    let mut distinct = BTreeSet::new();
    for (gid, sig) in &att.signatures {
        let Some(gw) = registry.get(gid) else { return false };
        if gw.home_chain != att.claim.chain_id || signature(&gw.signing_key, &bytes) != *sig {
            return false;
        }
        distinct.insert(gid);
    }
    distinct.len() >= att.threshold_k
}

/// Latest confirmed entry that concerns `id` on this chain: the masked entry
/// itself, a lock on it or a transferred asset record.
fn latest_evidence(chain: &BlockchainSystem, id: &CrossId) -> Option<Digest> {
    let masked = chain.masks.local_of(id)?;
    chain
        .ledger()
        .entries()
        .iter()
        .rev()
        .find(|e| match &e.record {
            EntryRecord::Data => &e.local_ref == masked,
            EntryRecord::Lock { asset, .. } | EntryRecord::AssetRecord { asset, .. } => asset == id,
            _ => false,
        })
        .map(|e| e.digest())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vouched {
    pub attestation: VouchAttestation,
    /// Receipt for the attestation record queued on the chain's own ledger.
    pub record: PendingReceipt,
}

/// Collects signatures from every live gateway of `chain` over a claim that
/// the entry for `id` is confirmed, and records the attestation on the
/// chain's ledger (it lands there once consensus confirms it).
pub fn vouch(
    chain: &mut BlockchainSystem,
    registry: &GatewayRegistry,
    id: &CrossId,
    threshold_k: usize,
    now: Tick,
) -> Result<Vouched, GatewayError> {
    let proof_digest = latest_evidence(chain, id).ok_or(GatewayError::NotConfirmed)?;
    let live = registry.live_on(chain.id());
    let needed = threshold_k.max(1);
    if live.len() < needed {
        return Err(GatewayError::InsufficientGateways { live: live.len(), needed });
    }
    let claim = Claim { chain_id: chain.id().clone(), cross_id: id.clone(), confirmed: true, proof_digest };
    let bytes = claim.to_bytes();
    let signatures: Vec<(GatewayId, Digest)> =
        live.iter().map(|g| (g.clone(), registry.sign(g, &bytes).expect("live gateway is registered"))).collect();
    let claim_digest = claim.digest();
    let attestation = VouchAttestation { claim, signatures, threshold_k: needed, issued_tick: now };
    let unit = TransferUnit::uni(&attestation.encode(), chain.semantic_type(), format!("att:{}:{}", chain.id(), claim_digest.short()));
    let record = chain
        .submit_record(unit, EntryRecord::Attestation { asset: id.clone(), claim_digest, signers: attestation.signers() }, now)
        .map_err(|_| GatewayError::NotConfirmed)?;
    Ok(Vouched { attestation, record })
}

/// Topology-free statement that assets behind a chain can be referenced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReachabilityAdvertisement {
    pub chain_id: ChainId,
    pub reachable_assets: BTreeSet<String>,
    pub gateway_endpoints: Vec<GatewayId>,
    pub issued_tick: Tick,
}

impl ReachabilityAdvertisement {
    pub fn transcript(&self) -> String {
        let assets: Vec<&str> = self.reachable_assets.iter().map(String::as_str).collect();
        let gws: Vec<String> = self.gateway_endpoints.iter().map(ToString::to_string).collect();
        format!("chain={} assets={} gateways={}", self.chain_id, assets.join(","), gws.join(","))
    }
}

/// A dead gateway advertises nothing.
pub fn advertise(gid: &GatewayId, registry: &GatewayRegistry, resolver: &Resolver, now: Tick) -> Option<ReachabilityAdvertisement> {
    let gw = registry.get(gid).filter(|g| g.live)?;
    Some(ReachabilityAdvertisement {
        chain_id: gw.home_chain.clone(),
        reachable_assets: resolver.assets_homed_on(&gw.home_chain).map(CrossId::prefix).collect(),
        gateway_endpoints: registry.live_on(&gw.home_chain),
        issued_tick: now,
    })
}

/// Authorization from an application with read rights on the target's home
/// chain, allowing another application to read one identifier through a gateway.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DelegationGrant {
    pub grant_id: String,
    pub grantor: AppId,
    pub grantee: AppId,
    pub target: CrossId,
    pub issued_tick: Tick,
    pub expiry_tick: Tick,
}

impl DelegationGrant {
    pub fn new(
        grant_id: impl Into<String>,
        grantor: AppId,
        grantee: AppId,
        target: CrossId,
        issued_tick: Tick,
        expiry_tick: Tick,
    ) -> Result<Self, GatewayError> {
        if expiry_tick <= issued_tick {
            return Err(GatewayError::InvalidGrant("expiry must follow issue"));
        }
        Ok(DelegationGrant { grant_id: grant_id.into(), grantor, grantee, target, issued_tick, expiry_tick })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MediatedView {
    pub view: LedgerView,
    pub attestation: VouchAttestation,
}

/// Serves a read of `id` to `requester` on the strength of `grant`. The
/// grantor's own read privilege is re-checked at call time.
#[allow(clippy::too_many_arguments)]
pub fn mediated_read(
    gid: &GatewayId,
    registry: &GatewayRegistry,
    resolver: &Resolver,
    chain: &BlockchainSystem,
    grant: &DelegationGrant,
    id: &CrossId,
    requester: &AppId,
    now: Tick,
) -> Result<MediatedView, GatewayError> {
    let gw = registry.get(gid).ok_or_else(|| GatewayError::UnknownGateway(gid.clone()))?;
    if !gw.live {
        return Err(GatewayError::GatewayDown);
    }
    if gw.home_chain != *chain.id() {
        return Err(GatewayError::NotAuthoritativeHere);
    }
    let home = resolver.home_of(id).ok_or(GatewayError::NotFound)?;
    if home.home_chain != gw.home_chain {
        return Err(GatewayError::NotAuthoritativeHere);
    }
    if &grant.grantee != requester || &grant.target != id {
        return Err(GatewayError::GrantMismatch);
    }
    if now >= grant.expiry_tick {
        return Err(GatewayError::GrantExpired);
    }
    if chain.regime().user_read_permissioned && !chain.access.app_can_read(&grant.grantor) {
        return Err(GatewayError::PermissionDenied);
    }
    let view = chain.read_unchecked(&LedgerQuery::Cross(id.clone())).map_err(|e| match e {
        ChainError::PermissionDenied => GatewayError::PermissionDenied,
        _ => GatewayError::NotFound,
    })?;
    let claim = Claim { chain_id: chain.id().clone(), cross_id: id.clone(), confirmed: true, proof_digest: view.entry.digest() };
    let sig = registry.sign(gid, &claim.to_bytes()).expect("registered gateway");
    Ok(MediatedView { view, attestation: VouchAttestation { claim, signatures: vec![(gid.clone(), sig)], threshold_k: 1, issued_tick: now } })
}
