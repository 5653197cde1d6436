//! Machine-readable run summary. Every collection is ordered, so the JSON
//! rendering is byte-stable for a given run.

use std::collections::BTreeMap;

use serde::Serialize;

use super::audit::AuditResult;
use super::World;
use crate::chain::ChainStatus;
use crate::ids::{ChainId, PathId, Tick};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferOutcome {
    pub state: String,
    pub final_tick: Option<Tick>,
    pub source_gateway: String,
    pub dest_gateway: String,
    pub fee: u64,
    pub abort_reason: Option<String>,
    pub transitions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AppTxnOutcome {
    pub state: String,
    pub final_tick: Option<Tick>,
    /// `(chain, local ref)` per sub-transaction, first confirmation only.
    pub confirmed_on: Vec<Option<String>>,
    pub duplicates: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PaymentOutcome {
    pub state: String,
    pub path: Option<PathId>,
    pub route: Vec<String>,
    pub delivered: String,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub chain: ChainId,
    pub tick: Tick,
    pub status: Option<ChainStatus>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReadRecord {
    pub app: String,
    pub chain: ChainId,
    pub asset: String,
    pub mode: String,
    pub tick: Tick,
    pub ok: bool,
    pub result: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub final_tick: Tick,
    pub quiescent: bool,
    pub events_executed: u64,
    pub log_records: usize,
    pub ledgers: BTreeMap<ChainId, usize>,
    pub assets: BTreeMap<String, String>,
    pub transfers: BTreeMap<String, TransferOutcome>,
    pub transfer_rejections: BTreeMap<String, String>,
    pub app_txns: BTreeMap<String, AppTxnOutcome>,
    pub payments: BTreeMap<String, PaymentOutcome>,
    pub fees: BTreeMap<String, u64>,
    pub probes: Vec<ProbeRecord>,
    pub reads: Vec<ReadRecord>,
    pub audits: Vec<AuditResult>,
    pub errors: Vec<String>,
}

impl RunReport {
    pub(super) fn build(w: &World) -> Self {
        let transfers = w
            .interop
            .transfers()
            .map(|t| {
                (
                    t.transfer_id.to_string(),
                    TransferOutcome {
                        state: t.state.to_string(),
                        final_tick: t.final_tick(),
                        source_gateway: t.paired_gateways.0.to_string(),
                        dest_gateway: t.paired_gateways.1.to_string(),
                        fee: t.fee,
                        abort_reason: t.abort_reason.clone(),
                        transitions: t.transition_log(),
                    },
                )
            })
            .collect();
        let app_txns = w
            .survivor
            .txns()
            .map(|t| {
                let duplicates = w.survivor.poll_duplicates(&t.app_txn_id).map(|d| d.len()).unwrap_or(0);
                let confirmed_on = t.sub_txns.iter().map(|s| s.confirmations.first().map(|(c, r, _)| format!("{c} {r}"))).collect();
                (t.app_txn_id.to_string(), AppTxnOutcome { state: t.state.to_string(), final_tick: t.final_tick, confirmed_on, duplicates })
            })
            .collect();
        RunReport {
            scenario: w.cfg.name.clone(),
            seed: w.seed,
            final_tick: w.now,
            quiescent: w.quiescent,
            events_executed: w.events_executed,
            log_records: w.log.len(),
            ledgers: w.interop.chains.iter().map(|(id, c)| (id.clone(), c.ledger().len())).collect(),
            assets: w.assets.iter().map(|(n, id)| (n.clone(), id.to_string())).collect(),
            transfers,
            transfer_rejections: w.transfer_rejections.clone(),
            app_txns,
            payments: w.payments.clone(),
            fees: w.interop.peering.tallies().iter().map(|((a, b), f)| (format!("{a}-{b}"), *f)).collect(),
            probes: w.probes.clone(),
            reads: w.reads.clone(),
            audits: w.auditor.results(),
            errors: w.errors.clone(),
        }
    }

    /// Every audit held and no scenario error was raised.
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.audits.iter().all(AuditResult::passed)
    }

    pub fn audit(&self, name: &str) -> Option<&AuditResult> {
        self.audits.iter().find(|a| a.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
