//! Cross-domain identifiers, masking and authoritative resolution.
//!
//! Every ledger entry that is exposed outside its chain gets a [`CrossId`]:
//! a hierarchical chain path plus a 16-byte suffix drawn from the seeded RNG,
//! so the suffix carries no information about the private [`LocalRef`].
//! The [`Resolver`] answers which chain is currently authoritative for an
//! identifier and hands out only gateway endpoints.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::chain::BlockchainSystem;
use crate::gateway::{verify_attestation, GatewayRegistry, VouchAttestation};
use crate::ids::{ChainId, GatewayId, LocalRef, Tick};

pub const SUFFIX_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("identifier not found")]
    NotFound,
    #[error("every gateway of the home chain is down")]
    Unreachable,
    #[error("invalid proof: {0}")]
    InvalidProof(&'static str),
    #[error("stale authority: asset is homed on {current}")]
    StaleAuthority { current: ChainId },
    #[error("malformed identifier: {0}")]
    Malformed(String),
    #[error("mask conflict for {0}")]
    MaskConflict(String),
    #[error("chain path {0} is already registered")]
    DuplicatePath(String),
}

/// Externally visible identifier: `chain.path:hexsuffix`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CrossId {
    chain_path: String,
    suffix: [u8; SUFFIX_LEN],
}

impl CrossId {
    pub fn new(chain_path: impl Into<String>, suffix: [u8; SUFFIX_LEN]) -> Self {
        CrossId { chain_path: chain_path.into(), suffix }
    }

    pub fn random(chain_path: &str, rng: &mut impl RngCore) -> Self {
        let mut suffix = [0u8; SUFFIX_LEN];
        rng.fill_bytes(&mut suffix);
        CrossId::new(chain_path, suffix)
    }

    pub fn chain_path(&self) -> &str {
        &self.chain_path
    }

    pub fn suffix(&self) -> &[u8; SUFFIX_LEN] {
        &self.suffix
    }

    /// Routing-style prefix: the chain path and the leading 8 suffix bytes.
    pub fn prefix(&self) -> String {
        format!("{}:{}", self.chain_path, hex::encode(&self.suffix[..8]))
    }
}

impl fmt::Display for CrossId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chain_path, hex::encode(self.suffix))
    }
}

impl fmt::Debug for CrossId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CrossId({self})")
    }
}

impl FromStr for CrossId {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (path, hexpart) = s.rsplit_once(':').ok_or_else(|| IdentityError::Malformed(s.to_owned()))?;
        if path.is_empty() || path.split('.').any(str::is_empty) {
            return Err(IdentityError::Malformed(s.to_owned()));
        }
        let bytes = hex::decode(hexpart).map_err(|_| IdentityError::Malformed(s.to_owned()))?;
        let suffix: [u8; SUFFIX_LEN] = bytes.try_into().map_err(|_| IdentityError::Malformed(s.to_owned()))?;
        Ok(CrossId::new(path, suffix))
    }
}

impl Serialize for CrossId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CrossId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MaskEntry {
    pub cross_id: CrossId,
    pub chain_id: ChainId,
    pub local_ref: LocalRef,
}

/// Per-chain bijection between private references and cross-domain identifiers.
#[derive(Clone, Debug, Default)]
pub struct MaskTable {
    by_local: BTreeMap<LocalRef, CrossId>,
    by_cross: BTreeMap<CrossId, LocalRef>,
}

impl MaskTable {
    pub fn local_of(&self, id: &CrossId) -> Option<&LocalRef> {
        self.by_cross.get(id)
    }

    pub fn cross_of(&self, r: &LocalRef) -> Option<&CrossId> {
        self.by_local.get(r)
    }

    pub fn len(&self) -> usize {
        self.by_cross.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_cross.is_empty()
    }

    pub fn insert(&mut self, id: CrossId, r: LocalRef) -> Result<(), IdentityError> {
        match (self.by_cross.get(&id), self.by_local.get(&r)) {
            (None, None) => {
                self.by_cross.insert(id.clone(), r.clone());
                self.by_local.insert(r, id);
                Ok(())
            }
            (Some(existing), _) if existing == &r => Ok(()),
            _ => Err(IdentityError::MaskConflict(id.to_string())),
        }
    }

    /// Points `id` at a new local entry, dropping its previous mapping. Used
    /// when an asset returns to a chain it once left.
    pub fn rebind(&mut self, id: CrossId, r: LocalRef) -> Result<(), IdentityError> {
        if let Some(other) = self.by_local.get(&r) {
            if other != &id {
                return Err(IdentityError::MaskConflict(id.to_string()));
            }
        }
        if let Some(old) = self.by_cross.remove(&id) {
            self.by_local.remove(&old);
        }
        self.by_cross.insert(id.clone(), r.clone());
        self.by_local.insert(r, id);
        Ok(())
    }

    pub fn entries<'a>(&'a self, chain: &'a ChainId) -> impl Iterator<Item = MaskEntry> + 'a {
        self.by_cross.iter().map(move |(c, l)| MaskEntry { cross_id: c.clone(), chain_id: chain.clone(), local_ref: l.clone() })
    }

    /// Both directions agree and every mapping is one-to-one.
    pub fn is_bijective(&self) -> bool {
        self.by_cross.len() == self.by_local.len()
            && self.by_cross.iter().all(|(c, l)| self.by_local.get(l) == Some(c))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthoritativePointer {
    pub asset_id: CrossId,
    pub home_chain: ChainId,
    pub forwarded_from: Option<ChainId>,
    pub rebind_tick: Tick,
}

/// Answer to a resolution query. Deliberately carries no local reference
/// and no node address.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub asset: CrossId,
    pub home_chain: ChainId,
    pub gateways: Vec<GatewayId>,
}

impl Resolution {
    /// The wire form of the answer, as an external party would observe it.
    pub fn transcript(&self) -> String {
        let gws: Vec<String> = self.gateways.iter().map(ToString::to_string).collect();
        format!("asset={} home={} gateways={}", self.asset, self.home_chain, gws.join(","))
    }
}

/// Global resolution registry. Rebinds are serialized here.
#[derive(Clone, Debug, Default)]
pub struct Resolver {
    paths: BTreeMap<String, ChainId>,
    homes: BTreeMap<CrossId, AuthoritativePointer>,
    history: BTreeMap<CrossId, Vec<AuthoritativePointer>>,
}

impl Resolver {
    pub fn register_chain(&mut self, path: &str, chain: &ChainId) -> Result<(), IdentityError> {
        if self.paths.contains_key(path) {
            return Err(IdentityError::DuplicatePath(path.to_owned()));
        }
        self.paths.insert(path.to_owned(), chain.clone());
        Ok(())
    }

    pub fn chain_for_path(&self, path: &str) -> Option<&ChainId> {
        self.paths.get(path)
    }

    /// Assigns (or returns the existing) cross-domain identifier for a
    /// confirmed entry and registers the minting chain as its home.
    pub fn mint_cross_id(
        &mut self,
        chain: &mut BlockchainSystem,
        local_ref: &LocalRef,
        rng: &mut impl RngCore,
        now: Tick,
    ) -> Result<CrossId, IdentityError> {
        if let Some(existing) = chain.masks.cross_of(local_ref) {
            return Ok(existing.clone());
        }
        if local_ref.chain != *chain.id() || chain.ledger().get(local_ref).is_none() {
            return Err(IdentityError::NotFound);
        }
        let id = loop {
            let candidate = CrossId::random(chain.path(), rng);
            if !self.homes.contains_key(&candidate) {
                break candidate;
            }
        };
        chain.masks.insert(id.clone(), local_ref.clone())?;
        let pointer = AuthoritativePointer { asset_id: id.clone(), home_chain: chain.id().clone(), forwarded_from: None, rebind_tick: now };
        self.history.insert(id.clone(), vec![pointer.clone()]);
        self.homes.insert(id.clone(), pointer);
        Ok(id)
    }

    pub fn home_of(&self, id: &CrossId) -> Option<&AuthoritativePointer> {
        self.homes.get(id)
    }

    pub fn assets(&self) -> impl Iterator<Item = &AuthoritativePointer> {
        self.homes.values()
    }

    pub fn assets_homed_on<'a>(&'a self, chain: &'a ChainId) -> impl Iterator<Item = &'a CrossId> + 'a {
        self.homes.values().filter(move |p| &p.home_chain == chain).map(|p| &p.asset_id)
    }

    pub fn history(&self, id: &CrossId) -> &[AuthoritativePointer] {
        self.history.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn resolve(&self, id: &CrossId, registry: &GatewayRegistry) -> Result<Resolution, IdentityError> {
        let p = self.homes.get(id).ok_or(IdentityError::NotFound)?;
        let gateways = registry.live_on(&p.home_chain);
        if gateways.is_empty() {
            return Err(IdentityError::Unreachable);
        }
        Ok(Resolution { asset: id.clone(), home_chain: p.home_chain.clone(), gateways })
    }

    /// Moves authority for `asset` from `from` to `to`. The proof is the pair
    /// (source attestation, destination attestation); both must verify, be
    /// signed by the right chain's gateways at that chain's threshold and
    /// claim a confirmed entry for this asset.
    pub fn rebind_authority(
        &mut self,
        asset: &CrossId,
        from: &ChainId,
        to: &ChainId,
        proof: (&VouchAttestation, &VouchAttestation),
        registry: &GatewayRegistry,
        now: Tick,
    ) -> Result<AuthoritativePointer, IdentityError> {
        let current = self.homes.get(asset).ok_or(IdentityError::NotFound)?;
        if &current.home_chain != from {
            return Err(IdentityError::StaleAuthority { current: current.home_chain.clone() });
        }
        for (att, chain) in [(proof.0, from), (proof.1, to)] {
            if &att.claim.chain_id != chain {
                return Err(IdentityError::InvalidProof("attestation names the wrong chain"));
            }
            if &att.claim.cross_id != asset {
                return Err(IdentityError::InvalidProof("attestation names another asset"));
            }
            if !att.claim.confirmed {
                return Err(IdentityError::InvalidProof("attestation does not claim confirmation"));
            }
            if att.threshold_k < registry.threshold(chain) {
                return Err(IdentityError::InvalidProof("attestation threshold below chain policy"));
            }
            if !verify_attestation(att, registry) {
                return Err(IdentityError::InvalidProof("signature check failed"));
            }
        }
        let pointer = AuthoritativePointer {
            asset_id: asset.clone(),
            home_chain: to.clone(),
            forwarded_from: Some(from.clone()),
            rebind_tick: now,
        };
        self.homes.insert(asset.clone(), pointer.clone());
        self.history.entry(asset.clone()).or_default().push(pointer.clone());
        Ok(pointer)
    }

    /// Following `forwarded_from` back through the history walks strictly
    /// towards the first mint: every step names the previous home, time never
    /// runs backwards and the walk ends at an entry with no predecessor.
    pub fn forward_chain_acyclic(&self, id: &CrossId) -> bool {
        let hist = self.history(id);
        hist.first().is_none_or(|p| p.forwarded_from.is_none())
            && hist.windows(2).all(|w| {
                w[1].forwarded_from.as_ref() == Some(&w[0].home_chain) && w[1].rebind_tick >= w[0].rebind_tick
            })
            && hist.last().map(|p| &p.home_chain) == self.homes.get(id).map(|p| &p.home_chain)
    }

    /// Stable text dump: one line per asset with its full forward history.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, p) in &self.homes {
            let hist: Vec<String> = self.history(id).iter().map(|h| format!("{}@{}", h.home_chain, h.rebind_tick)).collect();
            out.push_str(&format!("{} home={} history={}\n", id, p.home_chain, hist.join(">")));
        }
        out
    }
}
