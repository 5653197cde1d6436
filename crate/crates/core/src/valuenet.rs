//! Connector network moving value between currency chains.
//!
//! A connector sits between two or more chains, converts between their
//! denominations at fixed rates and holds a reserve of each. A payment path is
//! reserved end to end before any value moves; an overloaded connector rejects
//! the reservation and nothing is held anywhere.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::ids::{ChainId, ConnectorId, PathId, Tick};

pub type Amount = BigRational;

pub const DEFAULT_RESERVATION_TTL: Tick = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("no connector route from {from} to {to}")]
    NoRoute { from: ChainId, to: ChainId },
    #[error("connector {0} lacks free reserves")]
    Overloaded(ConnectorId),
    #[error("path reservation expired")]
    PathExpired,
    #[error("path already settled or released")]
    AlreadyTerminal,
    #[error("unknown path {0}")]
    UnknownPath(PathId),
    #[error("unknown chain {0}")]
    UnknownChain(ChainId),
    #[error("invalid connector: {0}")]
    InvalidConnector(String),
    #[error("invalid amount: {0}")]
    InvalidAmount(String),
}

/// Parses `3`, `5/4` or `1.25` exactly.
pub fn parse_amount(s: &str) -> Result<Amount, ValueError> {
    let s = s.trim();
    let bad = || ValueError::InvalidAmount(s.to_owned());
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = BigInt::from_str(&format!("{int}{frac}")).map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(BigRational::new(digits, scale));
    }
    BigRational::from_str(s).map_err(|_| bad())
}

/// `p/q` in lowest terms, or `p` for integers.
pub fn fmt_amount(a: &Amount) -> String {
    if a.is_integer() {
        a.numer().to_string()
    } else {
        format!("{}/{}", a.numer(), a.denom())
    }
}

fn ser_amount<S: Serializer>(a: &Amount, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_amount(a))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Reservation {
    pub path_id: PathId,
    pub denom_in: String,
    pub denom_out: String,
    #[serde(serialize_with = "ser_amount")]
    pub amount_out: Amount,
    pub expiry_tick: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Connector {
    pub connector_id: ConnectorId,
    pub adjacent_chains: BTreeSet<ChainId>,
    pub reserves: BTreeMap<String, Amount>,
    /// `amount_out = amount_in * rate`.
    pub rates: BTreeMap<(String, String), Amount>,
    pub reservations: Vec<Reservation>,
}

impl Connector {
    pub fn new(
        id: impl Into<String>,
        chains: impl IntoIterator<Item = ChainId>,
        reserves: BTreeMap<String, Amount>,
        rates: BTreeMap<(String, String), Amount>,
    ) -> Result<Self, ValueError> {
        let id = ConnectorId::new(id);
        let adjacent_chains: BTreeSet<ChainId> = chains.into_iter().collect();
        if adjacent_chains.len() < 2 {
            return Err(ValueError::InvalidConnector(format!("{id} needs two adjacent chains")));
        }
        if reserves.values().any(|r| r.is_negative()) {
            return Err(ValueError::InvalidConnector(format!("{id} has a negative reserve")));
        }
        if rates.values().any(|r| !r.is_positive()) {
            return Err(ValueError::InvalidConnector(format!("{id} has a non-positive rate")));
        }
        Ok(Connector { connector_id: id, adjacent_chains, reserves, rates, reservations: Vec::new() })
    }

    pub fn reserve_of(&self, denom: &str) -> Amount {
        self.reserves.get(denom).cloned().unwrap_or_else(Amount::zero)
    }

    pub fn reserved(&self, denom: &str) -> Amount {
        self.reservations.iter().filter(|r| r.denom_out == denom).map(|r| r.amount_out.clone()).sum()
    }

    pub fn free(&self, denom: &str) -> Amount {
        self.reserve_of(denom) - self.reserved(denom)
    }

    fn converts(&self, din: &str, dout: &str) -> Option<&Amount> {
        self.rates.get(&(din.to_owned(), dout.to_owned()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PathState {
    Reserved,
    Settled,
    Released,
}

impl fmt::Display for PathState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathState::Reserved => "RESERVED",
            PathState::Settled => "SETTLED",
            PathState::Released => "RELEASED",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Hop {
    pub connector: ConnectorId,
    pub chain_in: ChainId,
    pub chain_out: ChainId,
    pub denom_in: String,
    pub denom_out: String,
    #[serde(serialize_with = "ser_amount")]
    pub amount_in: Amount,
    #[serde(serialize_with = "ser_amount")]
    pub amount_out: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PaymentPath {
    pub path_id: PathId,
    pub hops: Vec<Hop>,
    pub sender_chain: ChainId,
    pub receiver_chain: ChainId,
    pub state: PathState,
    pub expiry_tick: Tick,
}

impl PaymentPath {
    pub fn amount_delivered(&self) -> Amount {
        self.hops.last().map(|h| h.amount_out.clone()).unwrap_or_else(Amount::zero)
    }

    pub fn connectors(&self) -> Vec<&ConnectorId> {
        self.hops.iter().map(|h| &h.connector).collect()
    }
}

/// Connectors, their chains' denominations and every path built so far.
#[derive(Clone, Debug)]
pub struct ValueNet {
    denominations: BTreeMap<ChainId, String>,
    connectors: BTreeMap<ConnectorId, Connector>,
    initial: BTreeMap<ConnectorId, BTreeMap<String, Amount>>,
    paths: BTreeMap<PathId, PaymentPath>,
    credits: BTreeMap<(ChainId, String), Amount>,
    next_path: u64,
    pub reservation_ttl: Tick,
}

impl Default for ValueNet {
    fn default() -> Self {
        ValueNet {
            denominations: BTreeMap::new(),
            connectors: BTreeMap::new(),
            initial: BTreeMap::new(),
            paths: BTreeMap::new(),
            credits: BTreeMap::new(),
            next_path: 0,
            reservation_ttl: DEFAULT_RESERVATION_TTL,
        }
    }
}

impl ValueNet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_chain(&mut self, chain: ChainId, denomination: impl Into<String>) {
        self.denominations.insert(chain, denomination.into());
    }

    pub fn denomination(&self, chain: &ChainId) -> Option<&str> {
        self.denominations.get(chain).map(String::as_str)
    }

    pub fn add_connector(&mut self, c: Connector) -> Result<(), ValueError> {
        if self.connectors.contains_key(&c.connector_id) {
            return Err(ValueError::InvalidConnector(format!("duplicate connector {}", c.connector_id)));
        }
        if let Some(ch) = c.adjacent_chains.iter().find(|ch| !self.denominations.contains_key(*ch)) {
            return Err(ValueError::UnknownChain(ch.clone()));
        }
        self.initial.insert(c.connector_id.clone(), c.reserves.clone());
        self.connectors.insert(c.connector_id.clone(), c);
        Ok(())
    }

    pub fn connector(&self, id: &ConnectorId) -> Option<&Connector> {
        self.connectors.get(id)
    }

    pub fn connectors(&self) -> impl Iterator<Item = &Connector> {
        self.connectors.values()
    }

    pub fn path(&self, id: &PathId) -> Option<&PaymentPath> {
        self.paths.get(id)
    }

    pub fn paths(&self) -> impl Iterator<Item = &PaymentPath> {
        self.paths.values()
    }

    pub fn credits(&self) -> &BTreeMap<(ChainId, String), Amount> {
        &self.credits
    }

    /// All reservations held anywhere, as `(connector, reservation)`.
    pub fn reservations(&self) -> Vec<(ConnectorId, Reservation)> {
        self.connectors
            .values()
            .flat_map(|c| c.reservations.iter().map(move |r| (c.connector_id.clone(), r.clone())))
            .collect()
    }

    /// Connector-level edges `(connector, from, to)` usable for a hop.
    fn edges_from(&self, chain: &ChainId) -> Vec<(ConnectorId, ChainId)> {
        let Some(din) = self.denominations.get(chain) else { return Vec::new() };
        let mut out = Vec::new();
        for c in self.connectors.values().filter(|c| c.adjacent_chains.contains(chain)) {
            for next in c.adjacent_chains.iter().filter(|n| *n != chain) {
                if c.converts(din, &self.denominations[next]).is_some() {
                    out.push((c.connector_id.clone(), next.clone()));
                }
            }
        }
        out
    }

    /// Fewest-hop route; among equals the lexicographically smallest sequence
    /// of connector ids. The best route to a chain at depth d extends the best
    /// route to some chain at depth d-1, so one layered pass suffices.
    pub fn route(&self, from: &ChainId, to: &ChainId) -> Option<Vec<(ConnectorId, ChainId, ChainId)>> {
        if from == to {
            return None;
        }
        let mut best: BTreeMap<ChainId, Vec<(ConnectorId, ChainId, ChainId)>> = BTreeMap::new();
        best.insert(from.clone(), Vec::new());
        let mut frontier = VecDeque::from([from.clone()]);
        while !frontier.is_empty() && !best.contains_key(to) {
            let mut layer: BTreeMap<ChainId, Vec<(ConnectorId, ChainId, ChainId)>> = BTreeMap::new();
            for u in frontier.drain(..) {
                for (c, v) in self.edges_from(&u) {
                    if best.contains_key(&v) {
                        continue;
                    }
                    let mut cand = best[&u].clone();
                    cand.push((c, u.clone(), v.clone()));
                    let key = |p: &Vec<(ConnectorId, ChainId, ChainId)>| p.iter().map(|h| h.0.clone()).collect::<Vec<_>>();
                    match layer.get(&v) {
                        Some(cur) if key(cur) <= key(&cand) => {}
                        _ => {
                            layer.insert(v, cand);
                        }
                    }
                }
            }
            frontier.extend(layer.keys().cloned());
            best.extend(layer);
        }
        best.remove(to)
    }

    /// Reserves `amount` of the sender's denomination along the best route.
    /// Either every hop holds its reservation or none does.
    pub fn build_path(&mut self, sender: &ChainId, receiver: &ChainId, amount: &Amount, now: Tick) -> Result<PaymentPath, ValueError> {
        if !amount.is_positive() {
            return Err(ValueError::InvalidAmount(fmt_amount(amount)));
        }
        for c in [sender, receiver] {
            if !self.denominations.contains_key(c) {
                return Err(ValueError::UnknownChain(c.clone()));
            }
        }
        let route = self.route(sender, receiver).ok_or_else(|| ValueError::NoRoute { from: sender.clone(), to: receiver.clone() })?;
        let path_id = PathId::new(format!("P{}", self.next_path));
        let expiry_tick = now + self.reservation_ttl;
        let mut hops = Vec::with_capacity(route.len());
        let mut amount_in = amount.clone();
        for (cid, cin, cout) in route {
            let denom_in = self.denominations[&cin].clone();
            let denom_out = self.denominations[&cout].clone();
            let rate = self.connectors[&cid].converts(&denom_in, &denom_out).expect("route uses advertised rates");
            let amount_out = &amount_in * rate;
            hops.push(Hop { connector: cid, chain_in: cin, chain_out: cout, denom_in, denom_out, amount_in, amount_out: amount_out.clone() });
            amount_in = amount_out;
        }
        for (i, h) in hops.iter().enumerate() {
            let c = self.connectors.get_mut(&h.connector).expect("known connector");
            if c.free(&h.denom_out) < h.amount_out {
                for prior in &hops[..i] {
                    self.connectors.get_mut(&prior.connector).expect("known").reservations.retain(|r| r.path_id != path_id);
                }
                return Err(ValueError::Overloaded(h.connector.clone()));
            }
            c.reservations.push(Reservation {
                path_id: path_id.clone(),
                denom_in: h.denom_in.clone(),
                denom_out: h.denom_out.clone(),
                amount_out: h.amount_out.clone(),
                expiry_tick,
            });
        }
        self.next_path += 1;
        let path = PaymentPath {
            path_id: path_id.clone(),
            hops,
            sender_chain: sender.clone(),
            receiver_chain: receiver.clone(),
            state: PathState::Reserved,
            expiry_tick,
        };
        self.paths.insert(path_id, path.clone());
        Ok(path)
    }

    fn drop_reservations(&mut self, path: &PaymentPath) {
        for h in &path.hops {
            if let Some(c) = self.connectors.get_mut(&h.connector) {
                c.reservations.retain(|r| r.path_id != path.path_id);
            }
        }
    }

    fn reserved_path(&self, id: &PathId) -> Result<&PaymentPath, ValueError> {
        let p = self.paths.get(id).ok_or_else(|| ValueError::UnknownPath(id.clone()))?;
        if p.state != PathState::Reserved {
            return Err(ValueError::AlreadyTerminal);
        }
        Ok(p)
    }

    /// Gross settlement of one path: each connector takes in `amount_in` and
    /// pays out `amount_out`; the receiver chain is credited the final amount.
    pub fn settle_path(&mut self, id: &PathId, now: Tick) -> Result<PaymentPath, ValueError> {
        let p = self.reserved_path(id)?.clone();
        if now >= p.expiry_tick {
            self.release_path(id)?;
            return Err(ValueError::PathExpired);
        }
        self.drop_reservations(&p);
        for h in &p.hops {
            let c = self.connectors.get_mut(&h.connector).expect("known");
            *c.reserves.entry(h.denom_in.clone()).or_insert_with(Amount::zero) += &h.amount_in;
            *c.reserves.entry(h.denom_out.clone()).or_insert_with(Amount::zero) -= &h.amount_out;
        }
        let last = p.hops.last().expect("non-empty route");
        *self.credits.entry((p.receiver_chain.clone(), last.denom_out.clone())).or_insert_with(Amount::zero) += &last.amount_out;
        let path = self.paths.get_mut(id).expect("present");
        path.state = PathState::Settled;
        Ok(path.clone())
    }

    pub fn release_path(&mut self, id: &PathId) -> Result<PaymentPath, ValueError> {
        let p = self.reserved_path(id)?.clone();
        self.drop_reservations(&p);
        let path = self.paths.get_mut(id).expect("present");
        path.state = PathState::Released;
        Ok(path.clone())
    }

    pub fn next_expiry(&self) -> Option<Tick> {
        self.paths.values().filter(|p| p.state == PathState::Reserved).map(|p| p.expiry_tick).min()
    }

    /// Releases every reserved path whose expiry has been reached.
    pub fn expire(&mut self, now: Tick) -> Vec<PathId> {
        let due: Vec<PathId> =
            self.paths.values().filter(|p| p.state == PathState::Reserved && now >= p.expiry_tick).map(|p| p.path_id.clone()).collect();
        for id in &due {
            self.release_path(id).expect("reserved");
        }
        due
    }

    /// Reserve change per connector and denomination must equal the signed
    /// sum of settled hop amounts.
    pub fn audit_conservation(&self) -> Result<(), String> {
        let mut expected = self.initial.clone();
        for p in self.paths.values().filter(|p| p.state == PathState::Settled) {
            for h in &p.hops {
                let e = expected.get_mut(&h.connector).expect("known");
                *e.entry(h.denom_in.clone()).or_insert_with(Amount::zero) += &h.amount_in;
                *e.entry(h.denom_out.clone()).or_insert_with(Amount::zero) -= &h.amount_out;
            }
        }
        for (id, c) in &self.connectors {
            let exp = &expected[id];
            let denoms: BTreeSet<&String> = exp.keys().chain(c.reserves.keys()).collect();
            for d in denoms {
                let want = exp.get(d).cloned().unwrap_or_else(Amount::zero);
                if c.reserve_of(d) != want {
                    return Err(format!("{id} {d}: reserve {} expected {}", fmt_amount(&c.reserve_of(d)), fmt_amount(&want)));
                }
            }
        }
        Ok(())
    }

    /// No reserve below zero and no denomination over-reserved.
    pub fn audit_non_negative(&self) -> Result<(), String> {
        for c in self.connectors.values() {
            for (d, r) in &c.reserves {
                if r.is_negative() {
                    return Err(format!("{} {d}: negative reserve", c.connector_id));
                }
                if c.reserved(d) > *r {
                    return Err(format!("{} {d}: reserved beyond balance", c.connector_id));
                }
            }
            if c.reservations.iter().any(|r| !r.amount_out.is_positive()) {
                return Err(format!("{}: empty reservation", c.connector_id));
            }
        }
        Ok(())
    }

    /// Only reserved paths may hold reservations, one per hop.
    pub fn audit_reservations(&self) -> Result<(), String> {
        for (cid, r) in self.reservations() {
            match self.paths.get(&r.path_id) {
                Some(p) if p.state == PathState::Reserved && p.hops.iter().any(|h| h.connector == cid) => {}
                _ => return Err(format!("{cid}: stray reservation for {}", r.path_id)),
            }
        }
        Ok(())
    }
}
