//! Application transactions that survive the loss of individual chains.
//!
//! Each sub-transaction is sent to its first candidate chain. If no
//! confirmation arrives within the per-chain timeout the same bytes go to the
//! next candidate; earlier submissions are left alone, so one logical unit
//! may end up confirmed on several chains. Those duplicates are reported, not
//! reconciled.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::chain::{ChainError, LedgerEntry, PendingReceipt, TransferUnit};
use crate::ids::{ChainId, IdempotencyKey, LocalRef, Tick};

pub type AppTxnId = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SurvivorError {
    #[error("sub-transaction {0} has no candidate chains")]
    EmptyCandidates(usize),
    #[error("app transaction {0} already submitted")]
    Duplicate(AppTxnId),
    #[error("unknown app transaction {0}")]
    Unknown(AppTxnId),
    #[error("app transaction {0} is not terminal")]
    NotTerminal(AppTxnId),
}

/// How the simulator hands a unit to a chain. `Ok(None)` means the
/// submission was lost in transit.
pub trait SubmitPort {
    fn submit(&mut self, chain: &ChainId, unit: &TransferUnit, now: Tick) -> Result<Option<PendingReceipt>, ChainError>;
    fn confirm_latency(&self, chain: &ChainId) -> Option<Tick>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AppState {
    Pending,
    Confirmed,
    Failed,
}

impl fmt::Display for AppState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AppState::Pending => "PENDING",
            AppState::Confirmed => "CONFIRMED",
            AppState::Failed => "FAILED",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "result", content = "detail")]
pub enum AttemptOutcome {
    Pending,
    Confirmed,
    TimedOut,
    Lost,
    Rejected(String),
}

impl fmt::Display for AttemptOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttemptOutcome::Pending => f.write_str("pending"),
            AttemptOutcome::Confirmed => f.write_str("confirmed"),
            AttemptOutcome::TimedOut => f.write_str("timed-out"),
            AttemptOutcome::Lost => f.write_str("lost"),
            AttemptOutcome::Rejected(e) => write!(f, "rejected:{e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Attempt {
    pub chain: ChainId,
    pub submitted_tick: Tick,
    pub outcome: AttemptOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubTxn {
    pub unit: TransferUnit,
    pub candidate_chains: Vec<ChainId>,
    /// Falls back to three times the candidate's confirmation latency.
    pub per_chain_timeout: Option<Tick>,
    pub attempts: Vec<Attempt>,
    /// In confirmation order.
    pub confirmations: Vec<(ChainId, LocalRef, Tick)>,
}

impl SubTxn {
    pub fn new(unit: TransferUnit, candidates: Vec<ChainId>, timeout: Option<Tick>) -> Self {
        SubTxn { unit, candidate_chains: candidates, per_chain_timeout: timeout, attempts: Vec::new(), confirmations: Vec::new() }
    }

    pub fn is_confirmed(&self) -> bool {
        !self.confirmations.is_empty()
    }

    fn exhausted(&self) -> bool {
        !self.is_confirmed()
            && self.attempts.len() == self.candidate_chains.len()
            && self.attempts.iter().all(|a| a.outcome != AttemptOutcome::Pending)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AppTransaction {
    pub app_txn_id: AppTxnId,
    pub sub_txns: Vec<SubTxn>,
    pub state: AppState,
    pub started_tick: Tick,
    pub final_tick: Option<Tick>,
}

impl AppTransaction {
    pub fn new(id: impl Into<String>, sub_txns: Vec<SubTxn>) -> Self {
        AppTransaction { app_txn_id: id.into(), sub_txns, state: AppState::Pending, started_tick: 0, final_tick: None }
    }
}

/// What the application sees: no chain identities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AppOutcome {
    pub app_txn_id: AppTxnId,
    pub state: AppState,
    pub final_tick: Option<Tick>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Duplicate {
    pub sub_txn: usize,
    pub chain: ChainId,
    pub local_ref: LocalRef,
    pub confirmed_tick: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttemptTimer {
    pub app_txn: AppTxnId,
    pub sub_txn: usize,
    pub attempt: usize,
    pub delay: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SurvivorEffect {
    Timer(AttemptTimer),
    Attempted { app_txn: AppTxnId, sub_txn: usize, chain: ChainId, outcome: AttemptOutcome },
    SubConfirmed { app_txn: AppTxnId, sub_txn: usize, chain: ChainId, local_ref: LocalRef, duplicate: bool },
    TimedOut { app_txn: AppTxnId, sub_txn: usize, chain: ChainId },
    StateChanged { app_txn: AppTxnId, state: AppState },
}

#[derive(Clone, Debug, Default)]
pub struct Survivor {
    txns: BTreeMap<AppTxnId, AppTransaction>,
    by_key: BTreeMap<IdempotencyKey, (AppTxnId, usize)>,
}

impl Survivor {
    pub fn txn(&self, id: &str) -> Option<&AppTransaction> {
        self.txns.get(id)
    }

    pub fn txns(&self) -> impl Iterator<Item = &AppTransaction> {
        self.txns.values()
    }

    pub fn outcome(&self, id: &str) -> Option<AppOutcome> {
        self.txns.get(id).map(|t| AppOutcome { app_txn_id: t.app_txn_id.clone(), state: t.state, final_tick: t.final_tick })
    }

    pub fn submit_app_txn(&mut self, mut txn: AppTransaction, port: &mut dyn SubmitPort, now: Tick) -> Result<(AppTxnId, Vec<SurvivorEffect>), SurvivorError> {
        if let Some(i) = txn.sub_txns.iter().position(|s| s.candidate_chains.is_empty()) {
            return Err(SurvivorError::EmptyCandidates(i));
        }
        if self.txns.contains_key(&txn.app_txn_id) {
            return Err(SurvivorError::Duplicate(txn.app_txn_id));
        }
        let id = txn.app_txn_id.clone();
        txn.started_tick = now;
        for (i, s) in txn.sub_txns.iter().enumerate() {
            self.by_key.insert(s.unit.idempotency_key.clone(), (id.clone(), i));
        }
        let n = txn.sub_txns.len();
        self.txns.insert(id.clone(), txn);
        let mut fx = Vec::new();
        for i in 0..n {
            self.attempt_next(&id, i, port, now, &mut fx);
        }
        self.refresh(&id, now, &mut fx);
        Ok((id, fx))
    }

    /// Submits to the next untried candidate. Rejected or lost submissions
    /// still count as an attempt; a rejection moves on immediately.
    fn attempt_next(&mut self, id: &str, sub: usize, port: &mut dyn SubmitPort, now: Tick, fx: &mut Vec<SurvivorEffect>) {
        loop {
            let s = &self.txns[id].sub_txns[sub];
            let Some(chain) = s.candidate_chains.get(s.attempts.len()).cloned() else { return };
            let unit = s.unit.clone();
            let timeout = s.per_chain_timeout.unwrap_or_else(|| 3 * port.confirm_latency(&chain).unwrap_or(1));
            let outcome = match port.submit(&chain, &unit, now) {
                Ok(Some(_)) => AttemptOutcome::Pending,
                Ok(None) => AttemptOutcome::Lost,
                Err(e) => AttemptOutcome::Rejected(e.to_string().replace(' ', "-")),
            };
            fx.push(SurvivorEffect::Attempted { app_txn: id.to_owned(), sub_txn: sub, chain: chain.clone(), outcome: outcome.clone() });
            // A lost submission looks like a slow chain to the application.
            let rejected = matches!(outcome, AttemptOutcome::Rejected(_));
            let stored = if rejected { outcome } else { AttemptOutcome::Pending };
            let s = &mut self.txns.get_mut(id).expect("present").sub_txns[sub];
            s.attempts.push(Attempt { chain, submitted_tick: now, outcome: stored });
            if rejected {
                continue;
            }
            let attempt = s.attempts.len() - 1;
            fx.push(SurvivorEffect::Timer(AttemptTimer { app_txn: id.to_owned(), sub_txn: sub, attempt, delay: timeout }));
            return;
        }
    }

    pub fn on_timer(&mut self, timer: &AttemptTimer, port: &mut dyn SubmitPort, now: Tick) -> Vec<SurvivorEffect> {
        let mut fx = Vec::new();
        let Some(t) = self.txns.get_mut(&timer.app_txn) else { return fx };
        if t.state != AppState::Pending {
            return fx;
        }
        let s = &mut t.sub_txns[timer.sub_txn];
        if s.is_confirmed() || s.attempts.len() != timer.attempt + 1 {
            return fx;
        }
        let a = &mut s.attempts[timer.attempt];
        a.outcome = AttemptOutcome::TimedOut;
        fx.push(SurvivorEffect::TimedOut { app_txn: timer.app_txn.clone(), sub_txn: timer.sub_txn, chain: a.chain.clone() });
        self.attempt_next(&timer.app_txn, timer.sub_txn, port, now, &mut fx);
        self.refresh(&timer.app_txn, now, &mut fx);
        fx
    }

    /// Records a confirmation of any tracked unit, including late ones on
    /// chains that were already abandoned.
    pub fn on_confirmed(&mut self, chain: &ChainId, entry: &LedgerEntry, now: Tick) -> Vec<SurvivorEffect> {
        let mut fx = Vec::new();
        let Some((id, sub)) = self.by_key.get(&entry.unit.idempotency_key).cloned() else { return fx };
        let s = &mut self.txns.get_mut(&id).expect("indexed").sub_txns[sub];
        if s.confirmations.iter().any(|(c, r, _)| c == chain && r == &entry.local_ref) {
            return fx;
        }
        let duplicate = s.is_confirmed();
        s.confirmations.push((chain.clone(), entry.local_ref.clone(), now));
        if let Some(a) = s.attempts.iter_mut().rev().find(|a| &a.chain == chain) {
            a.outcome = AttemptOutcome::Confirmed;
        }
        fx.push(SurvivorEffect::SubConfirmed { app_txn: id.clone(), sub_txn: sub, chain: chain.clone(), local_ref: entry.local_ref.clone(), duplicate });
        self.refresh(&id, now, &mut fx);
        fx
    }

    fn refresh(&mut self, id: &str, now: Tick, fx: &mut Vec<SurvivorEffect>) {
        let t = self.txns.get_mut(id).expect("present");
        if t.state != AppState::Pending {
            return;
        }
        let next = if t.sub_txns.iter().all(SubTxn::is_confirmed) {
            AppState::Confirmed
        } else if t.sub_txns.iter().any(SubTxn::exhausted) {
            AppState::Failed
        } else {
            return;
        };
        t.state = next;
        t.final_tick = Some(now);
        fx.push(SurvivorEffect::StateChanged { app_txn: id.to_owned(), state: next });
    }

    /// Every confirmation beyond the first, per sub-transaction.
    pub fn poll_duplicates(&self, id: &str) -> Result<Vec<Duplicate>, SurvivorError> {
        let t = self.txns.get(id).ok_or_else(|| SurvivorError::Unknown(id.to_owned()))?;
        if t.state == AppState::Pending {
            return Err(SurvivorError::NotTerminal(id.to_owned()));
        }
        Ok(t.sub_txns
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                s.confirmations.iter().skip(1).map(move |(c, r, tick)| Duplicate {
                    sub_txn: i,
                    chain: c.clone(),
                    local_ref: r.clone(),
                    confirmed_tick: *tick,
                })
            })
            .collect())
    }
}
