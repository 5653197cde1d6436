//! Gateway-mediated cross-domain asset transfer.
//!
//! Four phases, each closed by a confirmation on one of the two ledgers:
//!
//! 1. the source gateway records a lock on the asset entry (`SOURCE_LOCKED`),
//! 2. the destination gateway records the asset for the beneficiary (`DEST_RECORDED`),
//! 3. both gateway sets vouch for their confirmation and record the
//!    attestation on their own ledger (`VOUCHED`),
//! 4. the source ledger is marked with a pointer to the destination and the
//!    resolver is rebound using both attestations (`FINALIZED`).
//!
//! Reaching the deadline, or losing every gateway on one side, aborts: the
//! lock is released and a confirmed destination record is voided. Neither
//! chain can read the other; all cross-chain knowledge travels in gateway
//! messages, which the simulator may delay or drop.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{verify_attestation, vouch, GatewayError, GatewayRegistry, PeeringBook, VouchAttestation};
use crate::chain::{BlockchainSystem, ChainConfig, EntryRecord, LedgerEntry, Mark, TransferUnit};
use crate::identity::{AuthoritativePointer, CrossId, Resolver};
use crate::ids::{AppId, ChainId, GatewayId, LocalRef, Tick, TransferId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransferState {
    Initiated,
    SourceLocked,
    DestRecorded,
    Vouched,
    Finalized,
    Aborted,
}

impl TransferState {
    pub fn is_terminal(self) -> bool {
        matches!(self, TransferState::Finalized | TransferState::Aborted)
    }

    /// Legal successor states.
    pub fn can_move_to(self, next: TransferState) -> bool {
        use TransferState::*;
        match (self, next) {
            (Initiated, SourceLocked) | (SourceLocked, DestRecorded) | (DestRecorded, Vouched) | (Vouched, Finalized) => true,
            (s, Aborted) => !s.is_terminal(),
            _ => false,
        }
    }
}

impl fmt::Display for TransferState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferState::Initiated => "INITIATED",
            TransferState::SourceLocked => "SOURCE_LOCKED",
            TransferState::DestRecorded => "DEST_RECORDED",
            TransferState::Vouched => "VOUCHED",
            TransferState::Finalized => "FINALIZED",
            TransferState::Aborted => "ABORTED",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub tick: Tick,
    pub from: TransferState,
    pub to: TransferState,
    pub gateway: GatewayId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CrossDomainTransfer {
    pub transfer_id: TransferId,
    pub asset: CrossId,
    pub source_chain: ChainId,
    pub dest_chain: ChainId,
    pub beneficiary: AppId,
    pub state: TransferState,
    pub started_tick: Tick,
    pub deadline_tick: Tick,
    pub source_attestation: Option<VouchAttestation>,
    pub dest_attestation: Option<VouchAttestation>,
    pub paired_gateways: (GatewayId, GatewayId),
    pub fee: u64,
    pub asset_ref: LocalRef,
    pub lock_ref: Option<LocalRef>,
    pub dest_ref: Option<LocalRef>,
    pub transitions: Vec<Transition>,
    pub abort_reason: Option<String>,
    #[serde(skip)]
    progress: Progress,
}

/// Facts each side has learned so far.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Progress {
    lock_confirmed: bool,
    notice_received: bool,
    dest_confirmed: bool,
    dest_att_ref: Option<LocalRef>,
    dest_att_confirmed: bool,
    dest_vouch_sent: bool,
    dest_vouch_received: bool,
    source_att_ref: Option<LocalRef>,
    source_att_confirmed: bool,
    kick_pending: bool,
}

impl CrossDomainTransfer {
    pub fn attestations(&self) -> impl Iterator<Item = &VouchAttestation> {
        self.source_attestation.iter().chain(self.dest_attestation.iter())
    }

    pub fn final_tick(&self) -> Option<Tick> {
        self.state.is_terminal().then(|| self.transitions.last().map(|t| t.tick)).flatten()
    }

    /// `tick transfer_id old->new gateway` lines.
    pub fn transition_log(&self) -> Vec<String> {
        self.transitions.iter().map(|t| format!("{} {} {}->{} {}", t.tick, self.transfer_id, t.from, t.to, t.gateway)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum MessageBody {
    LockNotice,
    DestVouch(VouchAttestation),
    Finalized,
}

impl MessageBody {
    pub fn label(&self) -> &'static str {
        match self {
            MessageBody::LockNotice => "lock-notice",
            MessageBody::DestVouch(_) => "dest-vouch",
            MessageBody::Finalized => "finalized",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GatewayMessage {
    pub transfer: TransferId,
    pub from: GatewayId,
    pub to: GatewayId,
    pub body: MessageBody,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum TimerKind {
    /// Re-attempt the current phase: resend the last message or retry a vouch.
    Kick,
    Deadline,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransferEvent {
    Timer(TimerKind),
    Confirmed(LocalRef),
    Delivered(GatewayMessage),
    GatewayCrashed(GatewayId),
}

/// Side effects requested by the protocol; the simulator schedules and logs them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Effect {
    Send(GatewayMessage),
    Timer { transfer: TransferId, kind: TimerKind, delay: Tick },
    Submitted { chain: ChainId, local_ref: LocalRef, what: &'static str, transfer: TransferId },
    Transition { transfer: TransferId, transition: Transition },
    Repaired { transfer: TransferId, old: GatewayId, new: GatewayId },
    Marked { chain: ChainId, local_ref: LocalRef, mark: String },
    Rebound(AuthoritativePointer),
    Vouched { transfer: TransferId, chain: ChainId, signers: usize },
    Note { transfer: TransferId, detail: String },
}

#[derive(Clone, Debug)]
pub struct TransferRequest {
    pub transfer_id: TransferId,
    pub asset: CrossId,
    pub source: ChainId,
    pub dest: ChainId,
    pub beneficiary: AppId,
    pub deadline_ticks: Tick,
    /// Explicit gateway pairing; lowest-id live gateways when absent.
    pub pairing: Option<(GatewayId, GatewayId)>,
}

/// All state the gateway layer mediates: chains, gateway directory,
/// resolver, peering book and the transfers in flight.
#[derive(Clone, Debug)]
pub struct Interop {
    pub chains: BTreeMap<ChainId, BlockchainSystem>,
    pub registry: GatewayRegistry,
    pub resolver: Resolver,
    pub peering: PeeringBook,
    transfers: BTreeMap<TransferId, CrossDomainTransfer>,
    locks: BTreeMap<CrossId, TransferId>,
    pub resend_interval: Tick,
}

impl Default for Interop {
    fn default() -> Self {
        Interop {
            chains: BTreeMap::new(),
            registry: GatewayRegistry::default(),
            resolver: Resolver::default(),
            peering: PeeringBook::default(),
            transfers: BTreeMap::new(),
            locks: BTreeMap::new(),
            resend_interval: 4,
        }
    }
}

impl Interop {
    /// Registers a chain, its gateways and its path with the resolver.
    pub fn add_chain(&mut self, cfg: ChainConfig, gateways: u32, threshold: Option<usize>, key_seed: u64) -> Result<Vec<GatewayId>, GatewayError> {
        if self.chains.contains_key(&cfg.id) {
            return Err(GatewayError::InvalidAgreement("duplicate chain id"));
        }
        let mut chain = BlockchainSystem::new(cfg).map_err(|_| GatewayError::InvalidAgreement("invalid chain parameters"))?;
        self.resolver
            .register_chain(chain.path(), chain.id())
            .map_err(|_| GatewayError::InvalidAgreement("duplicate chain path"))?;
        let ids = self.registry.register_chain(&mut chain, gateways, threshold, key_seed);
        self.chains.insert(chain.id().clone(), chain);
        Ok(ids)
    }

    pub fn chain(&self, id: &ChainId) -> Option<&BlockchainSystem> {
        self.chains.get(id)
    }

    pub fn transfer(&self, id: &TransferId) -> Option<&CrossDomainTransfer> {
        self.transfers.get(id)
    }

    pub fn transfers(&self) -> impl Iterator<Item = &CrossDomainTransfer> {
        self.transfers.values()
    }

    pub fn lock_holder(&self, asset: &CrossId) -> Option<&TransferId> {
        self.locks.get(asset)
    }

    pub fn initiate_transfer(&mut self, req: TransferRequest, now: Tick) -> Result<Vec<Effect>, GatewayError> {
        let source = self.chains.get(&req.source).ok_or_else(|| GatewayError::UnknownChain(req.source.clone()))?;
        let dest = self.chains.get(&req.dest).ok_or_else(|| GatewayError::UnknownChain(req.dest.clone()))?;
        if self.transfers.contains_key(&req.transfer_id) {
            return Err(GatewayError::InvalidAgreement("transfer id already used"));
        }
        let home = self.resolver.home_of(&req.asset).ok_or(GatewayError::NotFound)?;
        if home.home_chain != req.source {
            return Err(GatewayError::NotAuthoritativeHere);
        }
        let asset_ref = source.masks.local_of(&req.asset).cloned().ok_or(GatewayError::NotAuthoritativeHere)?;
        let semantic = source.ledger().get(&asset_ref).ok_or(GatewayError::NotFound)?.unit.semantic_type;
        let agreement = self.peering.covering(&req.source, &req.dest, semantic).ok_or(GatewayError::NoPeering)?;
        if dest.semantic_type() != semantic {
            return Err(GatewayError::SemanticMismatch(semantic.to_string()));
        }
        if let Some(holder) = self.locks.get(&req.asset) {
            return Err(GatewayError::AssetBusy(holder.to_string()));
        }
        let paired = match req.pairing {
            Some((s, d)) => {
                for (g, chain) in [(&s, &req.source), (&d, &req.dest)] {
                    if &g.chain != chain || !self.registry.is_live(g) {
                        return Err(GatewayError::NoLiveGateways(chain.clone()));
                    }
                }
                (s, d)
            }
            None => {
                let s = self.registry.live_on(&req.source).into_iter().next().ok_or_else(|| GatewayError::NoLiveGateways(req.source.clone()))?;
                let d = self.registry.live_on(&req.dest).into_iter().next().ok_or_else(|| GatewayError::NoLiveGateways(req.dest.clone()))?;
                (s, d)
            }
        };
        let fee = agreement.fee_per_transfer;
        let t = CrossDomainTransfer {
            transfer_id: req.transfer_id.clone(),
            asset: req.asset.clone(),
            source_chain: req.source,
            dest_chain: req.dest,
            beneficiary: req.beneficiary,
            state: TransferState::Initiated,
            started_tick: now,
            deadline_tick: now + req.deadline_ticks,
            source_attestation: None,
            dest_attestation: None,
            paired_gateways: paired,
            fee,
            asset_ref,
            lock_ref: None,
            dest_ref: None,
            transitions: Vec::new(),
            abort_reason: None,
            progress: Progress { kick_pending: true, ..Progress::default() },
        };
        self.locks.insert(req.asset, req.transfer_id.clone());
        self.transfers.insert(req.transfer_id.clone(), t);
        Ok(vec![
            Effect::Timer { transfer: req.transfer_id.clone(), kind: TimerKind::Kick, delay: 0 },
            Effect::Timer { transfer: req.transfer_id, kind: TimerKind::Deadline, delay: req.deadline_ticks },
        ])
    }

    /// Drives one transfer with one event. Failures surface as `ABORTED`,
    /// never as an error to the caller.
    pub fn step_transfer(&mut self, id: &TransferId, event: TransferEvent, now: Tick) -> Vec<Effect> {
        let mut fx = Vec::new();
        let Some(t) = self.transfers.get_mut(id) else { return fx };
        if t.state.is_terminal() {
            return fx;
        }
        let deadline_hit = now > t.deadline_tick || (event == TransferEvent::Timer(TimerKind::Deadline) && now >= t.deadline_tick);
        if deadline_hit {
            self.abort(id, now, "deadline passed", &mut fx);
            return fx;
        }
        let mut resend = false;
        match event {
            TransferEvent::Timer(TimerKind::Kick) => {
                t.progress.kick_pending = false;
                resend = true;
            }
            TransferEvent::Timer(TimerKind::Deadline) => {}
            TransferEvent::Confirmed(r) => {
                let p = &mut t.progress;
                if t.lock_ref.as_ref() == Some(&r) {
                    p.lock_confirmed = true;
                } else if t.dest_ref.as_ref() == Some(&r) {
                    p.dest_confirmed = true;
                } else if p.dest_att_ref.as_ref() == Some(&r) {
                    p.dest_att_confirmed = true;
                } else if p.source_att_ref.as_ref() == Some(&r) {
                    p.source_att_confirmed = true;
                }
            }
            TransferEvent::Delivered(msg) => match msg.body {
                MessageBody::LockNotice if msg.to.chain == t.dest_chain => t.progress.notice_received = true,
                MessageBody::DestVouch(att) if msg.to.chain == t.source_chain => {
                    let ok = att.claim.chain_id == t.dest_chain
                        && att.claim.cross_id == t.asset
                        && att.claim.confirmed
                        && att.threshold_k >= self.registry.threshold(&t.dest_chain)
                        && verify_attestation(&att, &self.registry);
                    if ok {
                        t.dest_attestation = Some(att);
                        t.progress.dest_vouch_received = true;
                    } else {
                        fx.push(Effect::Note { transfer: id.clone(), detail: "rejected-dest-vouch".into() });
                    }
                }
                _ => {}
            },
            TransferEvent::GatewayCrashed(g) => {
                if !self.repair(id, &g, now, &mut fx) {
                    return fx;
                }
            }
        }
        self.drive(id, now, resend, &mut fx);
        fx
    }

    /// Replaces a crashed paired gateway by the lowest-id live gateway on the
    /// same side, or aborts when that side has none. Returns false on abort.
    fn repair(&mut self, id: &TransferId, crashed: &GatewayId, now: Tick, fx: &mut Vec<Effect>) -> bool {
        let t = &self.transfers[id];
        let side = if &t.paired_gateways.0 == crashed {
            0
        } else if &t.paired_gateways.1 == crashed {
            1
        } else {
            return true;
        };
        let chain = if side == 0 { t.source_chain.clone() } else { t.dest_chain.clone() };
        match self.registry.live_on(&chain).into_iter().next() {
            Some(new) => {
                let t = self.transfers.get_mut(id).expect("present");
                if side == 0 {
                    t.paired_gateways.0 = new.clone();
                } else {
                    t.paired_gateways.1 = new.clone();
                }
                fx.push(Effect::Repaired { transfer: id.clone(), old: crashed.clone(), new });
                true
            }
            None => {
                self.abort(id, now, "paired gateway crashed with no live replacement", fx);
                false
            }
        }
    }

    fn transition(&mut self, id: &TransferId, to: TransferState, gateway: GatewayId, now: Tick, fx: &mut Vec<Effect>) {
        let t = self.transfers.get_mut(id).expect("present");
        debug_assert!(t.state.can_move_to(to), "{} -> {}", t.state, to);
        let tr = Transition { tick: now, from: t.state, to, gateway };
        t.state = to;
        t.transitions.push(tr.clone());
        fx.push(Effect::Transition { transfer: id.clone(), transition: tr });
    }

    fn ensure_kick(&mut self, id: &TransferId, fx: &mut Vec<Effect>) {
        let interval = self.resend_interval;
        let t = self.transfers.get_mut(id).expect("present");
        if !t.progress.kick_pending && !t.state.is_terminal() {
            t.progress.kick_pending = true;
            fx.push(Effect::Timer { transfer: id.clone(), kind: TimerKind::Kick, delay: interval });
        }
    }

    fn drive(&mut self, id: &TransferId, now: Tick, resend: bool, fx: &mut Vec<Effect>) {
        loop {
            let before = self.transfers[id].state;
            self.drive_once(id, now, resend, fx);
            let after = self.transfers[id].state;
            if before == after || after.is_terminal() {
                break;
            }
        }
        self.ensure_kick(id, fx);
    }

    fn drive_once(&mut self, id: &TransferId, now: Tick, resend: bool, fx: &mut Vec<Effect>) {
        let t = self.transfers[id].clone();
        let (src_gw, dst_gw) = t.paired_gateways.clone();
        match t.state {
            TransferState::Initiated => {
                if t.lock_ref.is_none() {
                    let unit = TransferUnit::uni(
                        format!("lock:{}:{}", t.transfer_id, t.asset).as_bytes(),
                        self.chains[&t.source_chain].semantic_type(),
                        format!("xfer:{}:lock", t.transfer_id),
                    );
                    let record = EntryRecord::Lock { asset: t.asset.clone(), asset_ref: t.asset_ref.clone(), transfer: id.clone() };
                    let chain = self.chains.get_mut(&t.source_chain).expect("source chain");
                    match chain.submit_record(unit, record, now) {
                        Ok(r) => {
                            fx.push(Effect::Submitted { chain: t.source_chain.clone(), local_ref: r.local_ref.clone(), what: "lock", transfer: id.clone() });
                            self.transfers.get_mut(id).expect("present").lock_ref = Some(r.local_ref);
                        }
                        Err(e) => fx.push(Effect::Note { transfer: id.clone(), detail: format!("lock-submit-failed:{e}") }),
                    }
                } else if t.progress.lock_confirmed {
                    self.transition(id, TransferState::SourceLocked, src_gw.clone(), now, fx);
                    self.send(id, src_gw, dst_gw, MessageBody::LockNotice, fx);
                }
            }
            TransferState::SourceLocked => {
                if t.progress.notice_received && t.dest_ref.is_none() {
                    let unit = TransferUnit::bi(
                        format!("record:{}:{}", t.transfer_id, t.asset).as_bytes(),
                        self.chains[&t.dest_chain].semantic_type(),
                        format!("xfer:{}:record", t.transfer_id),
                        t.beneficiary.clone(),
                    );
                    let record = EntryRecord::AssetRecord {
                        asset: t.asset.clone(),
                        transfer: id.clone(),
                        beneficiary: t.beneficiary.clone(),
                        from: t.source_chain.clone(),
                    };
                    let chain = self.chains.get_mut(&t.dest_chain).expect("dest chain");
                    match chain.submit_record(unit, record, now) {
                        Ok(r) => {
                            fx.push(Effect::Submitted { chain: t.dest_chain.clone(), local_ref: r.local_ref.clone(), what: "asset-record", transfer: id.clone() });
                            self.transfers.get_mut(id).expect("present").dest_ref = Some(r.local_ref);
                        }
                        Err(e) => fx.push(Effect::Note { transfer: id.clone(), detail: format!("record-submit-failed:{e}") }),
                    }
                } else if t.progress.dest_confirmed {
                    let dest_ref = t.dest_ref.clone().expect("confirmed implies submitted");
                    let chain = self.chains.get_mut(&t.dest_chain).expect("dest chain");
                    if let Err(e) = chain.masks.rebind(t.asset.clone(), dest_ref) {
                        fx.push(Effect::Note { transfer: id.clone(), detail: format!("mask-failed:{e}") });
                        return;
                    }
                    self.transition(id, TransferState::DestRecorded, dst_gw, now, fx);
                } else if !t.progress.notice_received && resend {
                    self.send(id, src_gw, dst_gw, MessageBody::LockNotice, fx);
                }
            }
            TransferState::DestRecorded => {
                // Destination side: vouch, record the attestation, then ship it.
                if t.dest_attestation.is_none() && t.progress.dest_att_ref.is_none() {
                    self.try_vouch(id, &t.dest_chain, now, true, fx);
                } else if t.progress.dest_att_confirmed && !t.progress.dest_vouch_received && (!t.progress.dest_vouch_sent || resend) {
                    let att = self.transfers[id].dest_attestation.clone().expect("vouched");
                    self.transfers.get_mut(id).expect("present").progress.dest_vouch_sent = true;
                    self.send(id, dst_gw, src_gw.clone(), MessageBody::DestVouch(att), fx);
                }
                // Source side, once the destination's attestation has arrived.
                let t = self.transfers[id].clone();
                if t.progress.dest_vouch_received {
                    if t.source_attestation.is_none() {
                        self.try_vouch(id, &t.source_chain, now, false, fx);
                    } else if t.progress.source_att_confirmed {
                        self.transition(id, TransferState::Vouched, src_gw, now, fx);
                    }
                }
            }
            TransferState::Vouched => self.finalize(id, now, fx),
            TransferState::Finalized | TransferState::Aborted => {}
        }
    }

    fn try_vouch(&mut self, id: &TransferId, chain_id: &ChainId, now: Tick, dest_side: bool, fx: &mut Vec<Effect>) {
        let asset = self.transfers[id].asset.clone();
        let k = self.registry.threshold(chain_id);
        let chain = self.chains.get_mut(chain_id).expect("chain");
        match vouch(chain, &self.registry, &asset, k, now) {
            Ok(v) => {
                fx.push(Effect::Vouched { transfer: id.clone(), chain: chain_id.clone(), signers: v.attestation.signatures.len() });
                fx.push(Effect::Submitted { chain: chain_id.clone(), local_ref: v.record.local_ref.clone(), what: "attestation", transfer: id.clone() });
                let already = chain.ledger().get(&v.record.local_ref).is_some();
                let t = self.transfers.get_mut(id).expect("present");
                if dest_side {
                    t.dest_attestation = Some(v.attestation);
                    t.progress.dest_att_ref = Some(v.record.local_ref);
                    t.progress.dest_att_confirmed = already;
                } else {
                    t.source_attestation = Some(v.attestation);
                    t.progress.source_att_ref = Some(v.record.local_ref);
                    t.progress.source_att_confirmed = already;
                }
            }
            Err(e) => fx.push(Effect::Note { transfer: id.clone(), detail: format!("vouch-failed:{chain_id}:{e}") }),
        }
    }

    fn finalize(&mut self, id: &TransferId, now: Tick, fx: &mut Vec<Effect>) {
        let t = self.transfers[id].clone();
        let (Some(src_att), Some(dst_att)) = (&t.source_attestation, &t.dest_attestation) else {
            self.abort(id, now, "vouched without both attestations", fx);
            return;
        };
        let pointer = match self.resolver.rebind_authority(&t.asset, &t.source_chain, &t.dest_chain, (src_att, dst_att), &self.registry, now) {
            Ok(p) => p,
            Err(e) => {
                self.abort(id, now, &format!("rebind refused: {e}"), fx);
                return;
            }
        };
        let source = self.chains.get_mut(&t.source_chain).expect("source chain");
        if let Err(e) = source.mark(&t.asset_ref, Mark::Pointer(pointer.clone())) {
            fx.push(Effect::Note { transfer: id.clone(), detail: format!("mark-failed:{e}") });
        } else {
            fx.push(Effect::Marked { chain: t.source_chain.clone(), local_ref: t.asset_ref.clone(), mark: format!("pointer->{}", t.dest_chain) });
        }
        fx.push(Effect::Rebound(pointer));
        self.locks.remove(&t.asset);
        self.peering.record_fee(&t.source_chain, &t.dest_chain, t.fee);
        self.transition(id, TransferState::Finalized, t.paired_gateways.0.clone(), now, fx);
        self.send(id, t.paired_gateways.0.clone(), t.paired_gateways.1.clone(), MessageBody::Finalized, fx);
    }

    fn abort(&mut self, id: &TransferId, now: Tick, reason: &str, fx: &mut Vec<Effect>) {
        let t = self.transfers[id].clone();
        if t.state.is_terminal() {
            return;
        }
        if self.locks.get(&t.asset) == Some(id) {
            self.locks.remove(&t.asset);
        }
        if t.lock_ref.is_some() {
            let unit = TransferUnit::uni(
                format!("release:{}:{}", t.transfer_id, t.asset).as_bytes(),
                self.chains[&t.source_chain].semantic_type(),
                format!("xfer:{}:release", t.transfer_id),
            );
            let record = EntryRecord::Release { asset: t.asset.clone(), asset_ref: t.asset_ref.clone(), transfer: id.clone() };
            if let Ok(r) = self.chains.get_mut(&t.source_chain).expect("source").submit_record(unit, record, now) {
                fx.push(Effect::Submitted { chain: t.source_chain.clone(), local_ref: r.local_ref, what: "release", transfer: id.clone() });
            }
        }
        if let Some(dest_ref) = &t.dest_ref {
            self.void_dest_record(id, &t.dest_chain, dest_ref, fx);
        }
        let tt = self.transfers.get_mut(id).expect("present");
        tt.abort_reason = Some(reason.to_owned());
        fx.push(Effect::Note { transfer: id.clone(), detail: format!("abort:{}", reason.replace(' ', "-")) });
        self.transition(id, TransferState::Aborted, t.paired_gateways.0.clone(), now, fx);
    }

    fn void_dest_record(&mut self, id: &TransferId, chain_id: &ChainId, dest_ref: &LocalRef, fx: &mut Vec<Effect>) {
        let chain = self.chains.get_mut(chain_id).expect("dest");
        if chain.ledger().get(dest_ref).is_some() && chain.ledger().mark_of(dest_ref).is_none() {
            chain.mark(dest_ref, Mark::Void { transfer: id.clone() }).expect("confirmed and unmarked");
            fx.push(Effect::Marked { chain: chain_id.clone(), local_ref: dest_ref.clone(), mark: "void".into() });
        }
    }

    /// Routes a freshly confirmed entry to the transfer it belongs to.
    pub fn on_confirmed(&mut self, chain: &ChainId, entry: &LedgerEntry, now: Tick) -> Vec<Effect> {
        let owner = match &entry.record {
            EntryRecord::Lock { transfer, .. } | EntryRecord::AssetRecord { transfer, .. } => Some(transfer.clone()),
            EntryRecord::Attestation { .. } => self
                .transfers
                .values()
                .find(|t| {
                    t.progress.dest_att_ref.as_ref() == Some(&entry.local_ref) || t.progress.source_att_ref.as_ref() == Some(&entry.local_ref)
                })
                .map(|t| t.transfer_id.clone()),
            _ => None,
        };
        let Some(id) = owner else { return Vec::new() };
        let Some(t) = self.transfers.get(&id) else { return Vec::new() };
        if t.state == TransferState::Aborted {
            // A destination record that lands after an abort is voided on arrival.
            let mut fx = Vec::new();
            if matches!(entry.record, EntryRecord::AssetRecord { .. }) && &t.dest_chain == chain {
                self.void_dest_record(&id, chain, &entry.local_ref, &mut fx);
            }
            return fx;
        }
        self.step_transfer(&id, TransferEvent::Confirmed(entry.local_ref.clone()), now)
    }

    pub fn on_gateway_crash(&mut self, gid: &GatewayId, now: Tick) -> Vec<Effect> {
        let affected: Vec<TransferId> = self
            .transfers
            .values()
            .filter(|t| !t.state.is_terminal() && (&t.paired_gateways.0 == gid || &t.paired_gateways.1 == gid))
            .map(|t| t.transfer_id.clone())
            .collect();
        affected.into_iter().flat_map(|id| self.step_transfer(&id, TransferEvent::GatewayCrashed(gid.clone()), now)).collect()
    }

    fn send(&self, id: &TransferId, from: GatewayId, to: GatewayId, body: MessageBody, fx: &mut Vec<Effect>) {
        fx.push(Effect::Send(GatewayMessage { transfer: id.clone(), from, to, body }));
    }

    /// Chains whose ledger currently backs authority for `asset`: an unmarked
    /// confirmed entry masked to the asset whose provenance is either the
    /// original mint or a finalized transfer.
    pub fn ledger_claims(&self, asset: &CrossId) -> Vec<ChainId> {
        self.chains
            .values()
            .filter(|c| {
                let Some(r) = c.masks.local_of(asset) else { return false };
                let Some(e) = c.ledger().get(r) else { return false };
                if c.ledger().mark_of(r).is_some() {
                    return false;
                }
                match &e.record {
                    EntryRecord::AssetRecord { transfer, .. } => {
                        self.transfers.get(transfer).is_some_and(|t| t.state == TransferState::Finalized)
                    }
                    _ => true,
                }
            })
            .map(|c| c.id().clone())
            .collect()
    }
}
