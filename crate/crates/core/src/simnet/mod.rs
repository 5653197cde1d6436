//! Deterministic discrete-event simulation.
//!
//! Time is an integer tick. At each tick every chain first runs one
//! consensus round (in chain-id order), expired payment reservations are
//! released, and then the events due at that tick execute in `(tick, seq)`
//! order. Events scheduled with delay 0 run later in the same tick. Idle
//! ticks are skipped. A single seeded ChaCha stream is consumed in execution
//! order, so a `(scenario, seed)` pair always yields the same log bytes.
//!
//! Global invariants are audited after every executed event.

mod audit;
mod fault;
mod log;
mod queue;
mod report;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use audit::{leaks_internal, AuditResult, Auditor, AUDIT_NAMES};
pub use fault::{parse_gateway, parse_node, Cut, FaultError, FaultKind, FaultSpec, FaultState, Stamp};
pub use log::{kv, EventLog, LogRecord};
pub use queue::EventQueue;
pub use report::{AppTxnOutcome, PaymentOutcome, ProbeRecord, ReadRecord, RunReport, TransferOutcome};

use crate::chain::{BlockchainSystem, ChainError, Credential, LedgerEntry, LedgerQuery, PendingReceipt, Rights, TransferUnit};
use crate::gateway::{advertise, mediated_read, DelegationGrant, Effect, GatewayError, GatewayMessage, Interop, TimerKind, TransferEvent, TransferRequest};
use crate::identity::CrossId;
use crate::ids::{AppId, ChainId, LocalRef, PathId, Tick, TransferId};
use crate::scenario::{ScenarioConfig, ValidationError};
use crate::survivor::{AppTransaction, AttemptTimer, SubTxn, SubmitPort, Survivor, SurvivorEffect};
use crate::valuenet::{parse_amount, Connector, ValueNet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("scenario invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    ScenarioInvalid(Vec<ValidationError>),
}

/// Event kinds as they appear in the log.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimKind {
    Deliver,
    Timer,
    Fault,
    Probe,
}

#[derive(Clone, Debug)]
pub enum Payload {
    Deliver(GatewayMessage),
    TransferTimer(TransferId, TimerKind),
    AppTimer(AttemptTimer),
    Mint(usize),
    StartTransfer(usize),
    StartAppTxn(usize),
    StartPayment(usize),
    SettlePath { payment: String, path: PathId },
    ReleasePath { payment: String, path: PathId },
    Inject(FaultSpec),
    AutoHeal(String),
    Probe(usize),
    Read(usize),
    Resolve(usize),
    Advert(usize),
}

impl Payload {
    pub fn kind(&self) -> SimKind {
        match self {
            Payload::Deliver(_) => SimKind::Deliver,
            Payload::Inject(_) | Payload::AutoHeal(_) => SimKind::Fault,
            Payload::Probe(_) | Payload::Read(_) | Payload::Resolve(_) | Payload::Advert(_) => SimKind::Probe,
            _ => SimKind::Timer,
        }
    }
}

/// Application submissions: zero network latency, lost when the target
/// chain is isolated by a partition.
struct AppPort<'a> {
    chains: &'a mut BTreeMap<ChainId, BlockchainSystem>,
    faults: &'a FaultState,
    credentials: &'a BTreeMap<(AppId, ChainId), Credential>,
    app: AppId,
}

impl SubmitPort for AppPort<'_> {
    fn submit(&mut self, chain: &ChainId, unit: &TransferUnit, now: Tick) -> Result<Option<PendingReceipt>, ChainError> {
        if self.faults.isolated(chain) {
            return Ok(None);
        }
        let cred = self.credentials.get(&(self.app.clone(), chain.clone())).cloned().unwrap_or_else(Credential::none);
        let c = self.chains.get_mut(chain).ok_or(ChainError::NotFound)?;
        c.submit(unit.clone(), &cred, now).map(Some)
    }

    fn confirm_latency(&self, chain: &ChainId) -> Option<Tick> {
        self.chains.get(chain).map(|c| c.confirm_latency())
    }
}

pub struct World {
    pub cfg: ScenarioConfig,
    pub seed: u64,
    pub now: Tick,
    last_tick: Option<Tick>,
    seq: u64,
    queue: EventQueue<Payload>,
    pub log: EventLog,
    rng: ChaCha8Rng,
    pub interop: Interop,
    pub valuenet: ValueNet,
    pub survivor: Survivor,
    pub faults: FaultState,
    credentials: BTreeMap<(AppId, ChainId), Credential>,
    /// Asset name to minted identifier.
    pub assets: BTreeMap<String, CrossId>,
    pending_mints: BTreeMap<LocalRef, String>,
    pub transfer_rejections: BTreeMap<String, String>,
    pub payments: BTreeMap<String, PaymentOutcome>,
    pub probes: Vec<ProbeRecord>,
    pub reads: Vec<ReadRecord>,
    /// Everything an outside party observed from adverts and resolutions.
    pub transcripts: Vec<String>,
    pub errors: Vec<String>,
    pub auditor: Auditor,
    pub events_executed: u64,
    pub quiescent: bool,
}

impl World {
    pub fn new(cfg: ScenarioConfig, seed: u64) -> Result<Self, SimError> {
        cfg.validate().map_err(SimError::ScenarioInvalid)?;
        let invalid = |field: String, message: String| SimError::ScenarioInvalid(vec![ValidationError { field, message }]);
        let mut interop = Interop::default();
        if let Some(r) = cfg.resend_interval {
            interop.resend_interval = r;
        }
        let mut valuenet = ValueNet::new();
        if let Some(ttl) = cfg.reservation_ttl {
            valuenet.reservation_ttl = ttl;
        }
        for (i, c) in cfg.chains.iter().enumerate() {
            let cc = c.to_config().expect("validated");
            interop
                .add_chain(cc, c.gateways, c.threshold, c.key_seed)
                .map_err(|e| invalid(format!("chains[{i}]"), e.to_string()))?;
            if let Some(d) = &c.denomination {
                valuenet.add_chain(ChainId::new(c.id.clone()), d.clone());
            }
        }
        for (i, k) in cfg.connectors.iter().enumerate() {
            let reserves = k.reserves.iter().map(|(d, a)| (d.clone(), parse_amount(a).expect("validated"))).collect();
            let rates = k.rates.iter().map(|r| ((r.from.clone(), r.to.clone()), parse_amount(&r.rate).expect("validated"))).collect();
            let conn = Connector::new(k.id.clone(), k.chains.iter().map(|c| ChainId::new(c.clone())), reserves, rates)
                .and_then(|c| valuenet.add_connector(c))
                .map_err(|e| invalid(format!("connectors[{i}]"), e.to_string()));
            conn?;
        }
        let mut credentials = BTreeMap::new();
        for a in &cfg.apps {
            let (app, chain) = (AppId::new(a.id.clone()), ChainId::new(a.chain.clone()));
            let c = interop.chains.get_mut(&chain).expect("validated");
            let cred = c.access.issue(&chain, &app, Rights { read: a.read, write: a.write });
            credentials.insert((app, chain), cred);
        }
        for (i, p) in cfg.peering.iter().enumerate() {
            interop
                .peering
                .establish(
                    p.parties.iter().map(|c| ChainId::new(c.clone())).collect(),
                    p.open,
                    p.semantics.iter().copied().collect(),
                    p.protocols.iter().cloned().collect(),
                    p.fee,
                )
                .map_err(|e| invalid(format!("peering[{i}]"), e.to_string()))?;
        }

        let mut w = World {
            cfg: cfg.clone(),
            seed,
            now: 0,
            last_tick: None,
            seq: 0,
            queue: EventQueue::default(),
            log: EventLog::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            interop,
            valuenet,
            survivor: Survivor::default(),
            faults: FaultState::default(),
            credentials,
            assets: BTreeMap::new(),
            pending_mints: BTreeMap::new(),
            transfer_rejections: BTreeMap::new(),
            payments: BTreeMap::new(),
            probes: Vec::new(),
            reads: Vec::new(),
            transcripts: Vec::new(),
            errors: Vec::new(),
            auditor: Auditor::default(),
            events_executed: 0,
            quiescent: false,
        };
        // Faults first, so a fault at tick t is in force for workloads at t.
        for f in &cfg.faults {
            let spec = FaultSpec::from_entry(f).map_err(|e| invalid(format!("faults.{}", f.id), e.to_string()))?;
            w.schedule(Payload::Inject(spec), f.at);
        }
        for (i, a) in cfg.assets.iter().enumerate() {
            w.schedule(Payload::Mint(i), a.at);
        }
        for (i, t) in cfg.transfers.iter().enumerate() {
            w.schedule(Payload::StartTransfer(i), t.start);
        }
        for (i, a) in cfg.app_txns.iter().enumerate() {
            w.schedule(Payload::StartAppTxn(i), a.start);
        }
        for (i, p) in cfg.payments.iter().enumerate() {
            w.schedule(Payload::StartPayment(i), p.start);
        }
        for (i, p) in cfg.probes.iter().enumerate() {
            w.schedule(Payload::Probe(i), p.at);
        }
        for (i, r) in cfg.reads.iter().enumerate() {
            w.schedule(Payload::Read(i), r.at);
        }
        for (i, r) in cfg.resolves.iter().enumerate() {
            w.schedule(Payload::Resolve(i), r.at);
        }
        for (i, a) in cfg.adverts.iter().enumerate() {
            w.schedule(Payload::Advert(i), a.at);
        }
        Ok(w)
    }

    fn next_seq(&mut self) -> u64 {
        let s = self.seq;
        self.seq += 1;
        s
    }

    /// Queues `event` at `now + delay` behind everything already queued for that tick.
    pub fn schedule(&mut self, event: Payload, delay: Tick) {
        let seq = self.next_seq();
        self.queue.push(self.now + delay, seq, event);
    }

    fn record(&mut self, seq: Option<u64>, kind: &'static str, subject: impl ToString, detail: String) {
        let seq = seq.unwrap_or_else(|| self.next_seq());
        self.log.push(LogRecord { tick: self.now, seq, kind, subject: subject.to_string(), detail });
    }

    fn note(&mut self, kind: &'static str, subject: impl ToString, detail: String) {
        self.record(None, kind, subject, detail);
    }

    /// Earliest tick at which anything can happen.
    fn next_tick(&self) -> Option<Tick> {
        let floor = self.last_tick.map_or(0, |t| t + 1);
        let internal = self
            .interop
            .chains
            .values()
            .filter_map(BlockchainSystem::next_confirm_tick)
            .chain(self.valuenet.next_expiry())
            .min()
            .map(|t| t.max(floor));
        match (self.queue.peek_tick(), internal) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Runs to quiescence or the horizon, then applies the whole-log audits.
    pub fn run(&mut self) {
        self.run_until(self.cfg.horizon);
        self.finish();
    }

    /// Executes every tick up to and including `limit` (capped at the
    /// horizon). Returns false once nothing is left to do before the cap.
    pub fn run_until(&mut self, limit: Tick) -> bool {
        let limit = limit.min(self.cfg.horizon);
        loop {
            let Some(t) = self.next_tick() else {
                self.quiescent = true;
                return false;
            };
            if t > limit {
                return t <= self.cfg.horizon;
            }
            self.step_tick(t);
        }
    }

    /// Whole-log audits; call once after the last tick.
    pub fn finish(&mut self) {
        let mut aud = std::mem::take(&mut self.auditor);
        aud.audit_log(&self.log, &self.faults);
        aud.audit_state(self);
        self.auditor = aud;
    }

    fn step_tick(&mut self, t: Tick) {
        self.now = t;
        self.last_tick = Some(t);
        let ids: Vec<ChainId> = self.interop.chains.keys().cloned().collect();
        let mut appended = false;
        for id in ids {
            let entries = self.interop.chains.get_mut(&id).expect("known").advance_consensus(t);
            for e in entries {
                appended = true;
                self.on_append(&id, &e);
            }
        }
        if appended {
            self.audit();
        }
        for path in self.valuenet.expire(t) {
            let payment = self.payment_of(&path);
            if let Some(p) = self.payments.get_mut(&payment) {
                p.state = "RELEASED".into();
            }
            self.note("path", &path, kv(&[("op", &"expired"), ("payment", &payment)]));
        }
        while let Some((_, seq, ev)) = self.queue.pop_due(t) {
            self.events_executed += 1;
            self.execute(seq, ev);
            self.audit();
        }
    }

    fn audit(&mut self) {
        let mut aud = std::mem::take(&mut self.auditor);
        aud.audit_state(self);
        self.auditor = aud;
    }

    fn payment_of(&self, path: &PathId) -> String {
        self.payments.iter().find(|(_, p)| p.path.as_ref() == Some(path)).map(|(k, _)| k.clone()).unwrap_or_default()
    }

    fn on_append(&mut self, chain: &ChainId, e: &LedgerEntry) {
        self.note(
            "append",
            chain,
            kv(&[("ref", &e.local_ref), ("record", &e.record.label()), ("key", &e.unit.idempotency_key), ("nodes", &e.confirming_nodes.len())]),
        );
        if let Some(name) = self.pending_mints.remove(&e.local_ref) {
            let c = self.interop.chains.get_mut(chain).expect("known");
            match self.interop.resolver.mint_cross_id(c, &e.local_ref, &mut self.rng, self.now) {
                Ok(id) => {
                    self.note("resolver", &id, kv(&[("op", &"mint"), ("asset", &name), ("home", chain)]));
                    self.assets.insert(name, id);
                }
                Err(err) => self.note("resolver", &name, kv(&[("op", &"mint-failed"), ("reason", &dashed(&err.to_string()))])),
            }
        }
        let fx = self.interop.on_confirmed(chain, e, self.now);
        self.apply_transfer_effects(fx);
        let fx = self.survivor.on_confirmed(chain, e, self.now);
        self.apply_survivor_effects(fx);
    }

    fn execute(&mut self, seq: u64, ev: Payload) {
        match ev {
            Payload::Deliver(msg) => self.deliver(seq, msg),
            Payload::TransferTimer(id, kind) => {
                let k = match kind {
                    TimerKind::Kick => "kick",
                    TimerKind::Deadline => "deadline",
                };
                self.record(Some(seq), "timer", &id, kv(&[("timer", &k)]));
                let fx = self.interop.step_transfer(&id, TransferEvent::Timer(kind), self.now);
                self.apply_transfer_effects(fx);
            }
            Payload::AppTimer(timer) => {
                self.record(Some(seq), "timer", &timer.app_txn, kv(&[("sub", &timer.sub_txn), ("attempt", &timer.attempt)]));
                let app = self.app_of(&timer.app_txn);
                let mut port = AppPort { chains: &mut self.interop.chains, faults: &self.faults, credentials: &self.credentials, app };
                let fx = self.survivor.on_timer(&timer, &mut port, self.now);
                self.apply_survivor_effects(fx);
            }
            Payload::Mint(i) => {
                let a = self.cfg.assets[i].clone();
                let chain = ChainId::new(a.chain.clone());
                let c = self.interop.chains.get_mut(&chain).expect("validated");
                let unit = TransferUnit::uni(format!("asset:{}", a.name).as_bytes(), c.semantic_type(), format!("asset:{}", a.name));
                match c.submit_record(unit, crate::chain::EntryRecord::Data, self.now) {
                    Ok(r) => {
                        self.record(Some(seq), "submit", &chain, kv(&[("what", &"asset"), ("asset", &a.name), ("ref", &r.local_ref)]));
                        self.pending_mints.insert(r.local_ref, a.name);
                    }
                    Err(e) => self.record(Some(seq), "submit", &chain, kv(&[("what", &"asset"), ("asset", &a.name), ("error", &dashed(&e.to_string()))])),
                }
            }
            Payload::StartTransfer(i) => self.start_transfer(seq, i),
            Payload::StartAppTxn(i) => self.start_app_txn(seq, i),
            Payload::StartPayment(i) => self.start_payment(seq, i),
            Payload::SettlePath { payment, path } => {
                let r = self.valuenet.settle_path(&path, self.now);
                let (state, detail) = match &r {
                    Ok(p) => ("SETTLED".to_owned(), kv(&[("op", &"settled"), ("payment", &payment), ("delivered", &crate::valuenet::fmt_amount(&p.amount_delivered()))])),
                    Err(e) => ("RELEASED".to_owned(), kv(&[("op", &"settle-failed"), ("payment", &payment), ("reason", &dashed(&e.to_string()))])),
                };
                if let Some(p) = self.payments.get_mut(&payment) {
                    if r.is_ok() || p.state == "RESERVED" {
                        p.state = state;
                    }
                }
                self.record(Some(seq), "path", &path, detail);
            }
            Payload::ReleasePath { payment, path } => {
                let r = self.valuenet.release_path(&path);
                if r.is_ok() {
                    if let Some(p) = self.payments.get_mut(&payment) {
                        p.state = "RELEASED".into();
                    }
                }
                let op = if r.is_ok() { "released" } else { "release-failed" };
                self.record(Some(seq), "path", &path, kv(&[("op", &op), ("payment", &payment)]));
            }
            Payload::Inject(spec) => self.inject(seq, spec),
            Payload::AutoHeal(target) => self.heal(seq, &target, "expired"),
            Payload::Probe(i) => self.probe(seq, i),
            Payload::Read(i) => self.read(seq, i),
            Payload::Resolve(i) => self.resolve(seq, i),
            Payload::Advert(i) => self.advert(seq, i),
        }
    }

    fn app_of(&self, app_txn: &str) -> AppId {
        self.cfg.app_txns.iter().find(|a| a.id == app_txn).map(|a| AppId::new(a.app.clone())).unwrap_or_else(|| AppId::new(""))
    }

    fn deliver(&mut self, seq: u64, msg: GatewayMessage) {
        let (a, b) = (&msg.from.chain, &msg.to.chain);
        let detail = |extra: Option<&str>| {
            let mut d = kv(&[("msg", &msg.body.label()), ("from", &msg.from), ("to", &msg.to)]);
            if let Some(r) = extra {
                d.push_str(&format!(" reason={r}"));
            }
            d
        };
        if a != b && self.faults.link_cut(a, b) {
            self.record(Some(seq), "drop", &msg.transfer, detail(Some("partition")));
            return;
        }
        if !self.interop.registry.is_live(&msg.to) {
            self.record(Some(seq), "drop", &msg.transfer, detail(Some("gateway-down")));
            return;
        }
        self.record(Some(seq), "deliver", &msg.transfer, detail(None));
        let id = msg.transfer.clone();
        let fx = self.interop.step_transfer(&id, TransferEvent::Delivered(msg), self.now);
        self.apply_transfer_effects(fx);
    }

    fn apply_transfer_effects(&mut self, fx: Vec<Effect>) {
        for e in fx {
            match e {
                Effect::Send(msg) => {
                    if !self.interop.registry.is_live(&msg.from) {
                        self.note("drop", &msg.transfer, kv(&[("msg", &msg.body.label()), ("from", &msg.from), ("to", &msg.to), ("reason", &"sender-down")]));
                        continue;
                    }
                    let mut delay = self.cfg.network.intra_chain_latency;
                    if msg.from.chain != msg.to.chain {
                        delay = self.cfg.network.inter_chain_latency;
                        if self.cfg.network.jitter > 0 {
                            delay += self.rng.gen_range(0..=self.cfg.network.jitter);
                        }
                    }
                    self.note("send", &msg.transfer, kv(&[("msg", &msg.body.label()), ("from", &msg.from), ("to", &msg.to), ("delay", &delay)]));
                    self.schedule(Payload::Deliver(msg), delay);
                }
                Effect::Timer { transfer, kind, delay } => self.schedule(Payload::TransferTimer(transfer, kind), delay),
                Effect::Submitted { chain, local_ref, what, transfer } => {
                    self.note("submit", &chain, kv(&[("what", &what), ("transfer", &transfer), ("ref", &local_ref)]))
                }
                Effect::Transition { transfer, transition } => self.note(
                    "transition",
                    &transfer,
                    kv(&[("from", &transition.from), ("to", &transition.to), ("gateway", &transition.gateway)]),
                ),
                Effect::Repaired { transfer, old, new } => self.note("repair", &transfer, kv(&[("old", &old), ("new", &new)])),
                Effect::Marked { chain, local_ref, mark } => self.note("mark", &chain, kv(&[("ref", &local_ref), ("mark", &mark)])),
                Effect::Rebound(p) => {
                    let from = p.forwarded_from.as_ref().map(ToString::to_string).unwrap_or_default();
                    self.note("resolver", &p.asset_id, kv(&[("op", &"rebind"), ("home", &p.home_chain), ("from", &from)]))
                }
                Effect::Vouched { transfer, chain, signers } => self.note("vouch", &transfer, kv(&[("chain", &chain), ("signers", &signers)])),
                Effect::Note { transfer, detail } => self.note("note", &transfer, detail),
            }
        }
    }

    fn apply_survivor_effects(&mut self, fx: Vec<SurvivorEffect>) {
        for e in fx {
            match e {
                SurvivorEffect::Timer(t) => {
                    let d = t.delay;
                    self.schedule(Payload::AppTimer(t), d);
                }
                SurvivorEffect::Attempted { app_txn, sub_txn, chain, outcome } => {
                    self.note("attempt", &app_txn, kv(&[("sub", &sub_txn), ("chain", &chain), ("result", &outcome)]))
                }
                SurvivorEffect::SubConfirmed { app_txn, sub_txn, chain, local_ref, duplicate } => self.note(
                    "app",
                    &app_txn,
                    kv(&[("op", &"sub-confirmed"), ("sub", &sub_txn), ("chain", &chain), ("ref", &local_ref), ("duplicate", &duplicate)]),
                ),
                SurvivorEffect::TimedOut { app_txn, sub_txn, chain } => {
                    self.note("app", &app_txn, kv(&[("op", &"timeout"), ("sub", &sub_txn), ("chain", &chain)]))
                }
                SurvivorEffect::StateChanged { app_txn, state } => self.note("app", &app_txn, kv(&[("op", &"state"), ("state", &state)])),
            }
        }
    }

    fn start_transfer(&mut self, seq: u64, i: usize) {
        let t = self.cfg.transfers[i].clone();
        let Some(asset) = self.assets.get(&t.asset).cloned() else {
            self.transfer_rejections.insert(t.id.clone(), "asset-not-minted".into());
            self.record(Some(seq), "transfer", &t.id, kv(&[("op", &"rejected"), ("reason", &"asset-not-minted")]));
            return;
        };
        let pairing = t.pairing.as_ref().map(|[s, d]| (parse_gateway(s).expect("validated"), parse_gateway(d).expect("validated")));
        let req = TransferRequest {
            transfer_id: TransferId::new(t.id.clone()),
            asset: asset.clone(),
            source: ChainId::new(t.from.clone()),
            dest: ChainId::new(t.to.clone()),
            beneficiary: AppId::new(t.beneficiary.clone()),
            deadline_ticks: t.deadline,
            pairing,
        };
        let _ = self.initiate_inner(Some(seq), req);
    }

    /// Starts a transfer outside the scenario schedule, at the current tick.
    pub fn initiate_transfer(&mut self, req: TransferRequest) -> Result<(), GatewayError> {
        self.initiate_inner(None, req)
    }

    fn initiate_inner(&mut self, seq: Option<u64>, req: TransferRequest) -> Result<(), GatewayError> {
        let id = req.transfer_id.clone();
        let (asset, from, to) = (req.asset.clone(), req.source.clone(), req.dest.clone());
        match self.interop.initiate_transfer(req, self.now) {
            Ok(fx) => {
                let pair = self.interop.transfer(&id).map(|x| format!("{},{}", x.paired_gateways.0, x.paired_gateways.1)).unwrap_or_default();
                self.record(seq, "transfer", &id, kv(&[("op", &"initiate"), ("asset", &asset), ("from", &from), ("to", &to), ("pair", &pair)]));
                self.apply_transfer_effects(fx);
                Ok(())
            }
            Err(e) => {
                let reason = dashed(&e.to_string());
                self.record(seq, "transfer", &id, kv(&[("op", &"rejected"), ("reason", &reason)]));
                self.transfer_rejections.insert(id.to_string(), reason);
                Err(e)
            }
        }
    }

    fn start_app_txn(&mut self, seq: u64, i: usize) {
        let spec = self.cfg.app_txns[i].clone();
        let subs = spec
            .sub_txns
            .iter()
            .map(|s| {
                SubTxn::new(
                    TransferUnit::uni(s.payload.as_bytes(), s.semantic_type, s.key.clone()),
                    s.candidates.iter().map(|c| ChainId::new(c.clone())).collect(),
                    s.timeout,
                )
            })
            .collect();
        self.record(Some(seq), "app", &spec.id, kv(&[("op", &"submit"), ("subs", &spec.sub_txns.len())]));
        let mut port = AppPort { chains: &mut self.interop.chains, faults: &self.faults, credentials: &self.credentials, app: AppId::new(spec.app.clone()) };
        match self.survivor.submit_app_txn(AppTransaction::new(spec.id.clone(), subs), &mut port, self.now) {
            Ok((_, fx)) => self.apply_survivor_effects(fx),
            Err(e) => {
                self.errors.push(format!("{}: {e}", spec.id));
                self.note("app", &spec.id, kv(&[("op", &"rejected"), ("reason", &dashed(&e.to_string()))]));
            }
        }
    }

    fn start_payment(&mut self, seq: u64, i: usize) {
        let p = self.cfg.payments[i].clone();
        let amount = parse_amount(&p.amount).expect("validated");
        let before = self.valuenet.reservations();
        let (from, to) = (ChainId::new(p.from.clone()), ChainId::new(p.to.clone()));
        match self.valuenet.build_path(&from, &to, &amount, self.now) {
            Ok(path) => {
                let route: Vec<String> = path.connectors().iter().map(ToString::to_string).collect();
                self.record(
                    Some(seq),
                    "path",
                    &path.path_id,
                    kv(&[
                        ("op", &"reserved"),
                        ("payment", &p.id),
                        ("route", &route.join(",")),
                        ("out", &crate::valuenet::fmt_amount(&path.amount_delivered())),
                    ]),
                );
                self.payments.insert(
                    p.id.clone(),
                    PaymentOutcome { state: "RESERVED".into(), path: Some(path.path_id.clone()), route, delivered: crate::valuenet::fmt_amount(&path.amount_delivered()), reason: None },
                );
                if let Some(d) = p.settle_after {
                    self.schedule(Payload::SettlePath { payment: p.id.clone(), path: path.path_id.clone() }, d);
                } else if let Some(d) = p.release_after {
                    self.schedule(Payload::ReleasePath { payment: p.id.clone(), path: path.path_id }, d);
                }
            }
            Err(e) => {
                let reason = dashed(&e.to_string());
                self.record(Some(seq), "path", &p.id, kv(&[("op", &"rejected"), ("reason", &reason)]));
                let after = self.valuenet.reservations();
                self.auditor.check_reservation_atomicity(self.now, &before, &after);
                self.payments.insert(p.id, PaymentOutcome { state: "REJECTED".into(), path: None, route: Vec::new(), delivered: "0".into(), reason: Some(reason) });
            }
        }
    }

    fn inject(&mut self, seq: u64, spec: FaultSpec) {
        if let FaultKind::Heal(target) = &spec.kind {
            let target = target.clone();
            self.heal(seq, &target, &spec.id);
            return;
        }
        if let Err(e) = self.check_target(&spec.kind) {
            self.errors.push(e.to_string());
            self.record(Some(seq), "fault", &spec.id, kv(&[("op", &"error"), ("reason", &dashed(&e.to_string()))]));
            return;
        }
        self.faults.activate(&spec, (self.now, seq));
        let until = spec.until_tick.map(|u| u.to_string()).unwrap_or_else(|| "-".into());
        let what = describe(&spec.kind);
        self.record(Some(seq), "fault", &spec.id, format!("op=inject {what} until={until}"));
        match &spec.kind {
            FaultKind::NodeCrash(n) => {
                self.interop.chains.get_mut(&n.chain).expect("checked").set_node_live(n, false).expect("checked");
            }
            FaultKind::GatewayCrash(g) => {
                self.interop.registry.set_live(g, false).expect("checked");
                let fx = self.interop.on_gateway_crash(g, self.now);
                self.apply_transfer_effects(fx);
            }
            FaultKind::Partition(_) | FaultKind::Heal(_) => {}
        }
        if let Some(u) = spec.until_tick {
            self.schedule(Payload::AutoHeal(spec.id.clone()), u - self.now.min(u));
        }
    }

    fn check_target(&self, kind: &FaultKind) -> Result<(), FaultError> {
        let ok = match kind {
            FaultKind::Partition(Cut::Chains(s)) => s.iter().all(|c| self.interop.chains.contains_key(c)),
            FaultKind::Partition(Cut::Links(l)) => l.iter().all(|(a, b)| self.interop.chains.contains_key(a) && self.interop.chains.contains_key(b)),
            FaultKind::NodeCrash(n) => self.interop.chains.get(&n.chain).is_some_and(|c| c.has_node(n)),
            FaultKind::GatewayCrash(g) => self.interop.registry.get(g).is_some(),
            FaultKind::Heal(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(FaultError::UnknownTarget(describe(kind)))
        }
    }

    fn heal(&mut self, seq: u64, target: &str, by: &str) {
        match self.faults.heal(target, (self.now, seq)) {
            Err(e) => {
                self.errors.push(e.to_string());
                self.record(Some(seq), "fault", target, kv(&[("op", &"heal-error"), ("by", &by), ("reason", &dashed(&e.to_string()))]));
            }
            Ok(None) => self.record(Some(seq), "fault", target, kv(&[("op", &"heal-noop"), ("by", &by)])),
            Ok(Some(kind)) => {
                self.record(Some(seq), "fault", target, kv(&[("op", &"heal"), ("by", &by)]));
                match kind {
                    FaultKind::NodeCrash(n) if !self.faults.node_down(&n) => {
                        self.interop.chains.get_mut(&n.chain).expect("known").set_node_live(&n, true).expect("known");
                    }
                    FaultKind::GatewayCrash(g) if !self.faults.gateway_down(&g) => {
                        self.interop.registry.set_live(&g, true).expect("known");
                    }
                    _ => {}
                }
            }
        }
    }

    fn probe(&mut self, seq: u64, i: usize) {
        let chain = ChainId::new(self.cfg.probes[i].chain.clone());
        let reachable = !self.faults.isolated(&chain);
        let status = self.interop.chains[&chain].probe_status(reachable);
        let detail = match &status {
            Ok(s) => format!(
                "status=ok live={} exact={} pending={} latency={:.2}",
                s.live_node_count, s.live_count_exact, s.pending_count, s.mean_confirm_latency
            ),
            Err(e) => format!("status={}", dashed(&e.to_string())),
        };
        self.record(Some(seq), "probe", &chain, detail);
        let (status, error) = match status {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        };
        self.probes.push(ProbeRecord { chain, tick: self.now, status, error });
    }

    fn read(&mut self, seq: u64, i: usize) {
        let spec = self.cfg.reads[i].clone();
        let chain_id = ChainId::new(spec.chain.clone());
        let app = AppId::new(spec.app.clone());
        let result: Result<LocalRef, String> = (|| {
            let id = self.assets.get(&spec.asset).cloned().ok_or("not-found")?;
            if self.faults.isolated(&chain_id) {
                return Err("unreachable".to_owned());
            }
            let chain = &self.interop.chains[&chain_id];
            match &spec.grant {
                None => {
                    let cred = self.credentials.get(&(app.clone(), chain_id.clone())).cloned().unwrap_or_else(Credential::none);
                    chain.read_ledger(&LedgerQuery::Cross(id), &cred).map(|v| v.entry.local_ref).map_err(|e| dashed(&e.to_string()))
                }
                Some(g) => {
                    let grant = DelegationGrant::new(format!("grant-{i}"), AppId::new(g.grantor.clone()), app.clone(), id.clone(), g.issued, g.expiry)
                        .map_err(|e| dashed(&e.to_string()))?;
                    let gw = self.interop.registry.live_on(&chain_id).into_iter().next().ok_or("gateway-down")?;
                    mediated_read(&gw, &self.interop.registry, &self.interop.resolver, chain, &grant, &id, &app, self.now)
                        .map(|v| v.view.entry.local_ref)
                        .map_err(|e| dashed(&e.to_string()))
                }
            }
        })();
        let mode = if spec.grant.is_some() { "delegated" } else { "direct" };
        let outcome = match &result {
            Ok(_) => "ok".to_owned(),
            Err(e) => e.clone(),
        };
        self.record(Some(seq), "read", &app, kv(&[("chain", &chain_id), ("asset", &spec.asset), ("mode", &mode), ("result", &outcome)]));
        self.reads.push(ReadRecord { app: spec.app, chain: chain_id, asset: spec.asset, mode: mode.into(), tick: self.now, ok: result.is_ok(), result: outcome });
    }

    fn resolve(&mut self, seq: u64, i: usize) {
        let name = self.cfg.resolves[i].asset.clone();
        let Some(id) = self.assets.get(&name).cloned() else {
            self.record(Some(seq), "resolve", &name, kv(&[("result", &"not-found")]));
            return;
        };
        let home_isolated = self.interop.resolver.home_of(&id).is_some_and(|p| self.faults.isolated(&p.home_chain));
        let r = if home_isolated {
            Err("unreachable".to_owned())
        } else {
            self.interop.resolver.resolve(&id, &self.interop.registry).map_err(|e| dashed(&e.to_string()))
        };
        match r {
            Ok(res) => {
                let t = res.transcript();
                self.record(Some(seq), "resolve", &id, kv(&[("result", &"ok"), ("home", &res.home_chain)]));
                self.transcripts.push(t);
            }
            Err(e) => self.record(Some(seq), "resolve", &id, kv(&[("result", &e)])),
        }
    }

    fn advert(&mut self, seq: u64, i: usize) {
        let chains: Vec<ChainId> = match &self.cfg.adverts[i].chain {
            Some(c) => vec![ChainId::new(c.clone())],
            None => self.interop.chains.keys().cloned().collect(),
        };
        self.record(Some(seq), "advert", "all", kv(&[("chains", &chains.len())]));
        for c in chains {
            for g in self.interop.registry.live_on(&c) {
                if let Some(ad) = advertise(&g, &self.interop.registry, &self.interop.resolver, self.now) {
                    self.note("advert", &g, kv(&[("assets", &ad.reachable_assets.len())]));
                    self.transcripts.push(ad.transcript());
                }
            }
        }
    }

    pub fn resolver_dump(&self) -> String {
        self.interop.resolver.dump()
    }

    pub fn report(&self) -> RunReport {
        RunReport::build(self)
    }
}

fn dashed(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join("-")
}

fn describe(kind: &FaultKind) -> String {
    match kind {
        FaultKind::Partition(Cut::Chains(s)) => format!("kind=partition chains={}", s.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")),
        FaultKind::Partition(Cut::Links(l)) => {
            format!("kind=partition links={}", l.iter().map(|(a, b)| format!("{a}-{b}")).collect::<Vec<_>>().join(","))
        }
        FaultKind::NodeCrash(n) => format!("kind=node-crash node={n}"),
        FaultKind::GatewayCrash(g) => format!("kind=gateway-crash gateway={g}"),
        FaultKind::Heal(t) => format!("kind=heal target={t}"),
    }
}

/// Complete result of one run.
pub struct RunResult {
    pub world: World,
    pub log: String,
    pub report: RunReport,
    pub resolver_dump: String,
}

/// Validates `scenario`, runs it with `seed` and collects the artifacts.
pub fn run(scenario: &ScenarioConfig, seed: u64) -> Result<RunResult, SimError> {
    let mut w = World::new(scenario.clone(), seed)?;
    w.run();
    let log = w.log.render();
    let report = w.report();
    let resolver_dump = w.resolver_dump();
    Ok(RunResult { world: w, log, report, resolver_dump })
}
