//! Global invariant checks, run after every executed event and once more
//! over the finished log.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::fault::FaultState;
use super::log::EventLog;
use super::World;
use crate::ids::{ChainId, ConnectorId, Digest, Tick};
use crate::survivor::AppState;
use crate::valuenet::Reservation;

/// Every audit, in report order.
pub const AUDIT_NAMES: [&str; 14] = [
    "single-authority",
    "no-lost-asset",
    "mask-bijective",
    "forward-acyclic",
    "append-only",
    "quorum-sound",
    "semantic-gating",
    "connector-non-negative",
    "connector-conservation",
    "reservation-atomicity",
    "opacity",
    "no-cross-partition-delivery",
    "clock-monotonic",
    "app-outcome-consistent",
];

/// Only the first few violations of each audit are kept verbatim.
const KEEP: usize = 8;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AuditResult {
    pub name: &'static str,
    pub checks: u64,
    pub violation_count: u64,
    pub violations: Vec<String>,
}

impl AuditResult {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

#[derive(Clone, Debug)]
pub struct Auditor {
    results: BTreeMap<&'static str, AuditResult>,
    ledger_heads: BTreeMap<ChainId, (usize, Digest)>,
    transcripts_seen: usize,
}

impl Default for Auditor {
    fn default() -> Self {
        Auditor {
            results: AUDIT_NAMES.iter().map(|n| (*n, AuditResult { name: n, ..AuditResult::default() })).collect(),
            ledger_heads: BTreeMap::new(),
            transcripts_seen: 0,
        }
    }
}

impl Auditor {
    fn check(&mut self, name: &'static str, ok: bool, what: impl FnOnce() -> String) {
        let r = self.results.get_mut(name).expect("registered audit");
        r.checks += 1;
        if !ok {
            r.violation_count += 1;
            if r.violations.len() < KEEP {
                r.violations.push(what());
            }
        }
    }

    pub fn results(&self) -> Vec<AuditResult> {
        AUDIT_NAMES.iter().map(|n| self.results[n].clone()).collect()
    }

    pub fn result(&self, name: &str) -> Option<&AuditResult> {
        self.results.get(name)
    }

    pub fn all_passed(&self) -> bool {
        self.results.values().all(AuditResult::passed)
    }

    /// A failed path build must leave every reservation exactly as it was.
    pub fn check_reservation_atomicity(&mut self, now: Tick, before: &[(ConnectorId, Reservation)], after: &[(ConnectorId, Reservation)]) {
        self.check("reservation-atomicity", before == after, || format!("tick {now}: rejected build changed reservations"));
    }

    pub(super) fn audit_state(&mut self, w: &World) {
        let now = w.now;
        let interop = &w.interop;

        for p in interop.resolver.assets() {
            let id = &p.asset_id;
            let claims = interop.ledger_claims(id);
            self.check("single-authority", claims.len() <= 1, || format!("tick {now}: {id} claimed by {claims:?}"));
            let ok = claims.len() == 1 && claims[0] == p.home_chain;
            self.check("no-lost-asset", ok, || format!("tick {now}: {id} home {} but ledger claims {claims:?}", p.home_chain));
            self.check("forward-acyclic", interop.resolver.forward_chain_acyclic(id), || format!("tick {now}: {id} forward chain broken"));
        }

        for (cid, c) in &interop.chains {
            self.check("mask-bijective", c.masks.is_bijective(), || format!("tick {now}: {cid} mask table not bijective"));
            let ledger = c.ledger();
            let (old_len, old_digest) = self.ledger_heads.get(cid).cloned().unwrap_or((0, ledger.prefix_digest(0)));
            let intact = ledger.len() >= old_len && ledger.prefix_digest(old_len) == old_digest;
            self.check("append-only", intact, || format!("tick {now}: {cid} ledger prefix of {old_len} rewritten"));
            let quorum = c.quorum_size();
            for e in &ledger.entries()[old_len.min(ledger.len())..] {
                let n = e.confirming_nodes.len();
                self.check("quorum-sound", n >= quorum, || format!("tick {now}: {} confirmed by {n} < {quorum}", e.local_ref));
            }
            self.ledger_heads.insert(cid.clone(), (ledger.len(), ledger.prefix_digest(ledger.len())));
        }

        for t in interop.transfers() {
            let sem = interop.chains[&t.source_chain].semantic_type();
            let covered = interop.peering.covering(&t.source_chain, &t.dest_chain, sem).is_some();
            self.check("semantic-gating", covered, || format!("{} crosses {}->{} without covering agreement", t.transfer_id, t.source_chain, t.dest_chain));
        }

        let vn = &w.valuenet;
        let r = vn.audit_non_negative();
        self.check("connector-non-negative", r.is_ok(), || format!("tick {now}: {}", r.clone().unwrap_err()));
        let r = vn.audit_conservation();
        self.check("connector-conservation", r.is_ok(), || format!("tick {now}: {}", r.clone().unwrap_err()));
        let r = vn.audit_reservations();
        self.check("reservation-atomicity", r.is_ok(), || format!("tick {now}: {}", r.clone().unwrap_err()));

        for t in &w.transcripts[self.transcripts_seen..] {
            let leaks = leaks_internal(t);
            self.check("opacity", !leaks, || format!("tick {now}: internal detail in `{t}`"));
        }
        self.transcripts_seen = w.transcripts.len();

        for txn in w.survivor.txns() {
            let all = txn.sub_txns.iter().all(|s| s.is_confirmed());
            let ok = match txn.state {
                AppState::Confirmed => all && txn.final_tick.is_some(),
                AppState::Pending => !all && txn.final_tick.is_none(),
                AppState::Failed => txn.final_tick.is_some(),
            };
            self.check("app-outcome-consistent", ok, || format!("tick {now}: {} is {} with all-confirmed={all}", txn.app_txn_id, txn.state));
        }
    }

    /// Whole-log checks: no delivery across an active cut and a
    /// non-decreasing clock with unique sequence numbers.
    pub(super) fn audit_log(&mut self, log: &EventLog, faults: &FaultState) {
        let mut last: Tick = 0;
        let mut seqs = BTreeSet::new();
        for r in log.records() {
            let (tick, seq) = (r.tick, r.seq);
            self.check("clock-monotonic", tick >= last && seqs.insert(seq), || format!("record {tick}/{seq} out of order"));
            last = last.max(tick);
            if r.kind == "deliver" {
                let (a, b) = (field_chain(&r.detail, "from"), field_chain(&r.detail, "to"));
                let ok = match (&a, &b) {
                    (Some(a), Some(b)) => a == b || !faults.was_cut(a, b, (tick, seq)),
                    _ => false,
                };
                self.check("no-cross-partition-delivery", ok, || format!("{r}"));
            }
        }
    }
}

/// Node identities (`CHAIN/nK`) and local references (`CHAIN#K`) must not
/// appear in anything shown outside a chain.
pub fn leaks_internal(text: &str) -> bool {
    text.contains('#') || text.as_bytes().windows(3).any(|w| w[0] == b'/' && w[1] == b'n' && w[2].is_ascii_digit())
}

fn field_chain(detail: &str, key: &str) -> Option<ChainId> {
    detail
        .split(' ')
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .and_then(|v| v.split('/').next())
        .map(ChainId::new)
}
