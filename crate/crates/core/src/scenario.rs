//! Declarative scenario files (TOML).
//!
//! Field names follow the domain types. Loading either yields a config whose
//! cross-references all resolve, or every validation error at once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainConfig, PermissionRegime, SemanticType};
use crate::ids::{ChainId, Tick};
use crate::valuenet::parse_amount;

pub const DEFAULT_INTER_CHAIN_LATENCY: Tick = 2;
pub const DEFAULT_INTRA_CHAIN_LATENCY: Tick = 1;
pub const DEFAULT_TRANSFER_DEADLINE: Tick = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub inter_chain_latency: Tick,
    pub intra_chain_latency: Tick,
    /// Extra ticks, drawn uniformly from `0..=jitter`, on each inter-chain hop.
    pub jitter: Tick,
    /// Reserved; only 0 is accepted.
    pub loss_rate: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            inter_chain_latency: DEFAULT_INTER_CHAIN_LATENCY,
            intra_chain_latency: DEFAULT_INTRA_CHAIN_LATENCY,
            jitter: 0,
            loss_rate: 0.0,
        }
    }
}

/// `"private"`, `"open"` or an explicit flag table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegimeSpec {
    Preset(String),
    Flags(PermissionRegime),
}

impl RegimeSpec {
    pub fn resolve(&self) -> Option<PermissionRegime> {
        match self {
            RegimeSpec::Preset(p) if p == "private" => Some(PermissionRegime::private()),
            RegimeSpec::Preset(p) if p == "open" => Some(PermissionRegime::open()),
            RegimeSpec::Preset(_) => None,
            RegimeSpec::Flags(f) => f.validate().ok().map(|_| *f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub id: String,
    /// Resolver namespace; defaults to the lower-cased id.
    #[serde(default)]
    pub path: Option<String>,
    pub semantic_type: SemanticType,
    pub regime: RegimeSpec,
    pub nodes: u32,
    #[serde(default = "default_quorum")]
    pub quorum: String,
    pub latency: Tick,
    #[serde(default = "default_gateways")]
    pub gateways: u32,
    /// Vouching threshold; majority of gateways when absent.
    #[serde(default)]
    pub threshold: Option<usize>,
    #[serde(default)]
    pub denomination: Option<String>,
    #[serde(default)]
    pub key_seed: u64,
}

fn default_quorum() -> String {
    "2/3".into()
}

fn default_gateways() -> u32 {
    3
}

impl ChainSpec {
    pub fn quorum_ratio(&self) -> Option<Ratio<u64>> {
        let (n, d) = self.quorum.split_once('/')?;
        let (n, d): (u64, u64) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
        (d > 0 && n > 0 && n <= d).then(|| Ratio::new(n, d))
    }

    pub fn to_config(&self) -> Option<ChainConfig> {
        Some(ChainConfig {
            id: ChainId::new(self.id.clone()),
            path: self.path.clone().unwrap_or_else(|| self.id.to_lowercase()),
            semantic_type: self.semantic_type,
            regime: self.regime.resolve()?,
            node_count: self.nodes,
            quorum: self.quorum_ratio()?,
            confirm_latency: self.latency,
            denomination: self.denomination.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppSpec {
    pub id: String,
    pub chain: String,
    #[serde(default)]
    pub read: bool,
    #[serde(default)]
    pub write: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeeringSpec {
    #[serde(default)]
    pub parties: Vec<String>,
    #[serde(default)]
    pub open: bool,
    pub semantics: Vec<SemanticType>,
    #[serde(default)]
    pub protocols: Vec<String>,
    #[serde(default)]
    pub fee: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetSpec {
    pub name: String,
    pub chain: String,
    #[serde(default)]
    pub at: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub id: String,
    pub asset: String,
    pub from: String,
    pub to: String,
    pub beneficiary: String,
    pub start: Tick,
    #[serde(default = "default_deadline")]
    pub deadline: Tick,
    /// Explicit `[source_gateway, dest_gateway]`, e.g. `["BC1/g2", "BC2/g0"]`.
    #[serde(default)]
    pub pairing: Option<[String; 2]>,
}

fn default_deadline() -> Tick {
    DEFAULT_TRANSFER_DEADLINE
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubTxnSpec {
    pub payload: String,
    pub semantic_type: SemanticType,
    pub key: String,
    pub candidates: Vec<String>,
    #[serde(default)]
    pub timeout: Option<Tick>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppTxnSpec {
    pub id: String,
    pub app: String,
    #[serde(default)]
    pub start: Tick,
    pub sub_txns: Vec<SubTxnSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    pub from: String,
    pub to: String,
    pub rate: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectorSpec {
    pub id: String,
    pub chains: Vec<String>,
    #[serde(default)]
    pub reserves: BTreeMap<String, String>,
    #[serde(default)]
    pub rates: Vec<RateSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaymentSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub amount: String,
    pub start: Tick,
    /// Ticks after reservation at which the path settles; left to expire when absent.
    #[serde(default)]
    pub settle_after: Option<Tick>,
    /// Ticks after reservation at which the path is released instead.
    #[serde(default)]
    pub release_after: Option<Tick>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKindSpec {
    Partition,
    NodeCrash,
    GatewayCrash,
    Heal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    pub id: String,
    pub kind: FaultKindSpec,
    pub at: Tick,
    #[serde(default)]
    pub until: Option<Tick>,
    /// Partition: chains cut off from everything outside the set.
    #[serde(default)]
    pub chains: Vec<String>,
    /// Partition: individual chain-to-chain links.
    #[serde(default)]
    pub links: Vec<[String; 2]>,
    #[serde(default)]
    pub node: Option<String>,
    #[serde(default)]
    pub gateway: Option<String>,
    /// Heal: id of the fault to undo.
    #[serde(default)]
    pub target: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub chain: String,
    pub at: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrantSpec {
    pub grantor: String,
    #[serde(default)]
    pub issued: Tick,
    pub expiry: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadSpec {
    pub app: String,
    pub chain: String,
    pub asset: String,
    pub at: Tick,
    #[serde(default)]
    pub grant: Option<GrantSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveSpec {
    pub asset: String,
    pub at: Tick,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvertSpec {
    /// Every chain when absent.
    #[serde(default)]
    pub chain: Option<String>,
    pub at: Tick,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub horizon: Tick,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub resend_interval: Option<Tick>,
    #[serde(default)]
    pub reservation_ttl: Option<Tick>,
    #[serde(default)]
    pub chains: Vec<ChainSpec>,
    #[serde(default)]
    pub apps: Vec<AppSpec>,
    #[serde(default)]
    pub peering: Vec<PeeringSpec>,
    #[serde(default)]
    pub assets: Vec<AssetSpec>,
    #[serde(default)]
    pub transfers: Vec<TransferSpec>,
    #[serde(default)]
    pub app_txns: Vec<AppTxnSpec>,
    #[serde(default)]
    pub connectors: Vec<ConnectorSpec>,
    #[serde(default)]
    pub payments: Vec<PaymentSpec>,
    #[serde(default)]
    pub faults: Vec<FaultEntry>,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
    #[serde(default)]
    pub reads: Vec<ReadSpec>,
    #[serde(default)]
    pub resolves: Vec<ResolveSpec>,
    #[serde(default)]
    pub adverts: Vec<AdvertSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{} validation error(s):\n{}", .0.len(), .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ValidationError>),
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, LoadError> {
        if text.trim().is_empty() {
            return Err(LoadError::Parse { line: 1, column: 1, message: "empty scenario".into() });
        }
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
            LoadError::Parse { line, column, message: e.message().to_owned() }
        })
    }

    /// Parses and validates.
    pub fn load_str(text: &str) -> Result<Self, LoadError> {
        let cfg = Self::parse(text)?;
        cfg.validate().map_err(LoadError::Invalid)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::load_str(&text)?;
        if cfg.name.is_empty() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn chain(&self, id: &str) -> Option<&ChainSpec> {
        self.chains.iter().find(|c| c.id == id)
    }

    /// Every problem found, in field order.
    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        let mut errs = Vec::new();
        let mut err = |field: String, message: &str| errs.push(ValidationError { field, message: message.to_owned() });

        if self.horizon == 0 {
            err("horizon".into(), "must be positive");
        }
        if self.network.loss_rate != 0.0 {
            err("network.loss_rate".into(), "reserved; only 0 is supported");
        }
        if self.network.inter_chain_latency == 0 {
            err("network.inter_chain_latency".into(), "must be positive");
        }
        if self.resend_interval == Some(0) {
            err("resend_interval".into(), "must be positive");
        }
        if self.reservation_ttl == Some(0) {
            err("reservation_ttl".into(), "must be positive");
        }

        let mut chain_ids = BTreeSet::new();
        let mut paths = BTreeSet::new();
        for (i, c) in self.chains.iter().enumerate() {
            let f = |s: &str| format!("chains[{i}].{s}");
            if !chain_ids.insert(c.id.as_str()) {
                err(f("id"), "duplicate chain id");
            }
            if c.id.is_empty() || c.id.contains(['/', '#', ' ']) {
                err(f("id"), "must be non-empty without '/', '#' or spaces");
            }
            if !paths.insert(c.path.clone().unwrap_or_else(|| c.id.to_lowercase())) {
                err(f("path"), "duplicate resolver path");
            }
            if c.regime.resolve().is_none() {
                err(f("regime"), "unknown preset or node permissioning without consensus permissioning");
            }
            if c.nodes == 0 {
                err(f("nodes"), "must be positive");
            }
            if c.quorum_ratio().is_none() {
                err(f("quorum"), "must be a fraction n/d with 0 < n <= d");
            }
            if c.latency == 0 {
                err(f("latency"), "must be positive");
            }
            if c.gateways == 0 {
                err(f("gateways"), "must be positive");
            }
            match c.threshold {
                Some(0) => err(f("threshold"), "attestation threshold must be at least 1"),
                Some(k) if k > c.gateways as usize => err(f("threshold"), "exceeds gateway count"),
                _ => {}
            }
            if c.semantic_type == SemanticType::Payments && c.denomination.is_none() && self.connectors.iter().any(|k| k.chains.contains(&c.id)) {
                err(f("denomination"), "chains joined by connectors need a denomination");
            }
        }
        let known = |id: &str| chain_ids.contains(id);

        let mut apps = BTreeSet::new();
        for (i, a) in self.apps.iter().enumerate() {
            if !known(&a.chain) {
                err(format!("apps[{i}].chain"), "unknown chain");
            }
            apps.insert(a.id.as_str());
        }

        for (i, p) in self.peering.iter().enumerate() {
            for (j, c) in p.parties.iter().enumerate() {
                if !known(c) {
                    err(format!("peering[{i}].parties[{j}]"), "unknown chain");
                }
            }
            if !p.open && p.parties.iter().collect::<BTreeSet<_>>().len() < 2 {
                err(format!("peering[{i}].parties"), "a closed agreement needs two distinct parties");
            }
            if p.semantics.is_empty() {
                err(format!("peering[{i}].semantics"), "must not be empty");
            }
        }

        let mut assets = BTreeSet::new();
        for (i, a) in self.assets.iter().enumerate() {
            if !assets.insert(a.name.as_str()) {
                err(format!("assets[{i}].name"), "duplicate asset");
            }
            if !known(&a.chain) {
                err(format!("assets[{i}].chain"), "unknown chain");
            }
        }

        let mut workload = BTreeSet::new();
        for (i, t) in self.transfers.iter().enumerate() {
            let f = |s: &str| format!("transfers[{i}].{s}");
            if !workload.insert(t.id.as_str()) {
                err(f("id"), "duplicate workload id");
            }
            if !assets.contains(t.asset.as_str()) {
                err(f("asset"), "unknown asset");
            }
            for (name, c) in [("from", &t.from), ("to", &t.to)] {
                if !known(c) {
                    err(f(name), "unknown chain");
                }
            }
            if t.from == t.to {
                err(f("to"), "source and destination must differ");
            }
            if t.deadline == 0 {
                err(f("deadline"), "must be positive");
            }
            if let Some([s, d]) = &t.pairing {
                if !self.gateway_exists(s, &t.from) {
                    err(f("pairing[0]"), "not a gateway of the source chain");
                }
                if !self.gateway_exists(d, &t.to) {
                    err(f("pairing[1]"), "not a gateway of the destination chain");
                }
            }
        }

        for (i, a) in self.app_txns.iter().enumerate() {
            if !workload.insert(a.id.as_str()) {
                err(format!("app_txns[{i}].id"), "duplicate workload id");
            }
            if !apps.contains(a.app.as_str()) {
                err(format!("app_txns[{i}].app"), "unknown application");
            }
            if a.sub_txns.is_empty() {
                err(format!("app_txns[{i}].sub_txns"), "must not be empty");
            }
            for (j, s) in a.sub_txns.iter().enumerate() {
                let f = |x: &str| format!("app_txns[{i}].sub_txns[{j}].{x}");
                if s.candidates.is_empty() {
                    err(f("candidates"), "must not be empty");
                }
                if s.key.is_empty() {
                    err(f("key"), "must not be empty");
                }
                if s.timeout == Some(0) {
                    err(f("timeout"), "must be positive");
                }
                for (k, c) in s.candidates.iter().enumerate() {
                    match self.chain(c) {
                        None => err(f(&format!("candidates[{k}]")), "unknown chain"),
                        Some(ch) if ch.semantic_type != s.semantic_type => err(f(&format!("candidates[{k}]")), "semantic type differs from the sub-transaction"),
                        _ => {}
                    }
                }
            }
        }

        let mut connectors = BTreeSet::new();
        for (i, c) in self.connectors.iter().enumerate() {
            let f = |s: &str| format!("connectors[{i}].{s}");
            if !connectors.insert(c.id.as_str()) {
                err(f("id"), "duplicate connector");
            }
            if c.chains.iter().collect::<BTreeSet<_>>().len() < 2 {
                err(f("chains"), "needs two distinct adjacent chains");
            }
            for (j, ch) in c.chains.iter().enumerate() {
                if !known(ch) {
                    err(f(&format!("chains[{j}]")), "unknown chain");
                }
            }
            let denoms: BTreeSet<&str> = c.chains.iter().filter_map(|ch| self.chain(ch)?.denomination.as_deref()).collect();
            for (d, amount) in &c.reserves {
                match parse_amount(amount) {
                    Ok(a) if a >= num_rational::BigRational::from_integer(0.into()) => {}
                    _ => err(f(&format!("reserves.{d}")), "must be a non-negative amount"),
                }
                if !denoms.contains(d.as_str()) {
                    err(f(&format!("reserves.{d}")), "not the denomination of an adjacent chain");
                }
            }
            for (j, r) in c.rates.iter().enumerate() {
                match parse_amount(&r.rate) {
                    Ok(a) if a > num_rational::BigRational::from_integer(0.into()) => {}
                    _ => err(f(&format!("rates[{j}].rate")), "must be a positive amount"),
                }
                if !denoms.contains(r.from.as_str()) || !denoms.contains(r.to.as_str()) {
                    err(f(&format!("rates[{j}]")), "denominations must belong to adjacent chains");
                }
            }
        }

        for (i, p) in self.payments.iter().enumerate() {
            let f = |s: &str| format!("payments[{i}].{s}");
            if !workload.insert(p.id.as_str()) {
                err(f("id"), "duplicate workload id");
            }
            for (name, c) in [("from", &p.from), ("to", &p.to)] {
                match self.chain(c) {
                    None => err(f(name), "unknown chain"),
                    Some(ch) if ch.denomination.is_none() => err(f(name), "chain has no denomination"),
                    _ => {}
                }
            }
            if !matches!(parse_amount(&p.amount), Ok(a) if a > num_rational::BigRational::from_integer(0.into())) {
                err(f("amount"), "must be a positive amount");
            }
            if p.settle_after.is_some() && p.release_after.is_some() {
                err(f("release_after"), "a path either settles or is released");
            }
        }

        let mut fault_ids = BTreeMap::new();
        for (i, fl) in self.faults.iter().enumerate() {
            let f = |s: &str| format!("faults[{i}].{s}");
            if fault_ids.insert(fl.id.as_str(), (fl.kind, fl.at)).is_some() {
                err(f("id"), "duplicate fault id");
            }
            if let Some(u) = fl.until {
                if u < fl.at {
                    err(f("until"), "must not precede at");
                }
                if fl.kind == FaultKindSpec::Heal {
                    err(f("until"), "a heal cannot expire");
                }
            }
            match fl.kind {
                FaultKindSpec::Partition => {
                    if fl.chains.is_empty() == fl.links.is_empty() {
                        err(f("chains"), "a partition names either chains or links");
                    }
                    for (j, c) in fl.chains.iter().enumerate() {
                        if !known(c) {
                            err(f(&format!("chains[{j}]")), "unknown chain");
                        }
                    }
                    for (j, [a, b]) in fl.links.iter().enumerate() {
                        if !known(a) || !known(b) || a == b {
                            err(f(&format!("links[{j}]")), "must join two distinct known chains");
                        }
                    }
                }
                FaultKindSpec::NodeCrash => {
                    if !fl.node.as_deref().is_some_and(|n| self.node_exists(n)) {
                        err(f("node"), "unknown node");
                    }
                }
                FaultKindSpec::GatewayCrash => {
                    if !fl.gateway.as_deref().is_some_and(|g| g.split_once('/').is_some_and(|(c, _)| self.gateway_exists(g, c))) {
                        err(f("gateway"), "unknown gateway");
                    }
                }
                FaultKindSpec::Heal => {}
            }
        }
        for (i, fl) in self.faults.iter().enumerate().filter(|(_, f)| f.kind == FaultKindSpec::Heal) {
            match fl.target.as_deref().and_then(|t| fault_ids.get(t)) {
                None => err(format!("faults[{i}].target"), "must name a declared fault"),
                Some((FaultKindSpec::Heal, _)) => err(format!("faults[{i}].target"), "cannot heal a heal"),
                Some((_, at)) if *at > fl.at => err(format!("faults[{i}].target"), "heals a fault not yet injected"),
                _ => {}
            }
        }

        for (i, p) in self.probes.iter().enumerate() {
            if !known(&p.chain) {
                err(format!("probes[{i}].chain"), "unknown chain");
            }
        }
        for (i, r) in self.reads.iter().enumerate() {
            if !known(&r.chain) {
                err(format!("reads[{i}].chain"), "unknown chain");
            }
            if !assets.contains(r.asset.as_str()) {
                err(format!("reads[{i}].asset"), "unknown asset");
            }
            if let Some(g) = &r.grant {
                if g.expiry <= g.issued {
                    err(format!("reads[{i}].grant.expiry"), "must be after issued");
                }
            }
        }
        for (i, r) in self.resolves.iter().enumerate() {
            if !assets.contains(r.asset.as_str()) {
                err(format!("resolves[{i}].asset"), "unknown asset");
            }
        }
        for (i, a) in self.adverts.iter().enumerate() {
            if a.chain.as_deref().is_some_and(|c| !known(c)) {
                err(format!("adverts[{i}].chain"), "unknown chain");
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    fn node_exists(&self, node: &str) -> bool {
        let Some((chain, idx)) = node.split_once("/n") else { return false };
        let Ok(i) = idx.parse::<u32>() else { return false };
        self.chain(chain).is_some_and(|c| i < c.nodes)
    }

    fn gateway_exists(&self, gw: &str, chain: &str) -> bool {
        let Some((c, idx)) = gw.split_once("/g") else { return false };
        let Ok(i) = idx.parse::<u32>() else { return false };
        c == chain && self.chain(c).is_some_and(|c| i < c.gateways)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, column)
}

/// Two private asset-registry chains with three gateways each (threshold
/// 2), ten assets and ten concurrent transfers, under a random schedule of
/// partitions, node crashes and gateway crashes drawn from `seed`.
pub fn random_fault_scenario(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_fa17);
    let chain = |id: &str| ChainSpec {
        id: id.into(),
        path: None,
        semantic_type: SemanticType::AssetRegistry,
        regime: RegimeSpec::Preset("private".into()),
        nodes: 4,
        quorum: "2/3".into(),
        latency: 2,
        gateways: 3,
        threshold: Some(2),
        denomination: None,
        key_seed: 0,
    };
    let ids = ["BC1", "BC2"];
    let mut cfg = ScenarioConfig {
        name: format!("random_faults_{seed}"),
        seed,
        horizon: 160,
        chains: ids.iter().map(|c| chain(c)).collect(),
        peering: vec![PeeringSpec {
            parties: ids.iter().map(|s| s.to_string()).collect(),
            open: false,
            semantics: vec![SemanticType::AssetRegistry],
            protocols: Vec::new(),
            fee: 1,
        }],
        network: NetworkConfig { jitter: rng.gen_range(0..=2), ..NetworkConfig::default() },
        ..ScenarioConfig::default()
    };
    for i in 0..10 {
        let home = ids[i % 2];
        cfg.assets.push(AssetSpec { name: format!("a{i}"), chain: home.into(), at: 0 });
        cfg.transfers.push(TransferSpec {
            id: format!("T{i}"),
            asset: format!("a{i}"),
            from: home.into(),
            to: ids[1 - i % 2].into(),
            beneficiary: "Y".into(),
            start: rng.gen_range(3..=12),
            deadline: rng.gen_range(20..=60),
            pairing: None,
        });
    }
    let faults = rng.gen_range(1..=5);
    for f in 0..faults {
        let at = rng.gen_range(1..=40);
        let until = rng.gen_bool(0.7).then(|| at + rng.gen_range(1..=30));
        let c = ids[rng.gen_range(0..2)];
        let mut entry = FaultEntry {
            id: format!("f{f}"),
            kind: FaultKindSpec::Partition,
            at,
            until,
            chains: Vec::new(),
            links: Vec::new(),
            node: None,
            gateway: None,
            target: None,
        };
        match rng.gen_range(0..4) {
            0 => entry.chains = vec![c.into()],
            1 => entry.links = vec![["BC1".into(), "BC2".into()]],
            2 => {
                entry.kind = FaultKindSpec::NodeCrash;
                entry.node = Some(format!("{c}/n{}", rng.gen_range(0..4)));
            }
            _ => {
                entry.kind = FaultKindSpec::GatewayCrash;
                entry.gateway = Some(format!("{c}/g{}", rng.gen_range(0..3)));
            }
        }
        cfg.faults.push(entry);
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
horizon = 10
[[chains]]
id = "BC1"
semantic_type = "payments"
regime = "open"
nodes = 3
latency = 2
"#;

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(ScenarioConfig::load_str(""), Err(LoadError::Parse { .. })));
        assert!(matches!(ScenarioConfig::load_str("  \n"), Err(LoadError::Parse { .. })));
    }

    #[test]
    fn parse_error_reports_line() {
        let text = format!("{MINIMAL}\nbogus_field = 1\n");
        match ScenarioConfig::load_str(&text) {
            Err(LoadError::Parse { line, message, .. }) => {
                assert!(line >= 1);
                assert!(message.contains("bogus_field"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_is_valid() {
        let cfg = ScenarioConfig::load_str(MINIMAL).unwrap();
        assert_eq!(cfg.network, NetworkConfig::default());
        assert_eq!(cfg.chains[0].to_config().unwrap().path, "bc1");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = format!(
            "{MINIMAL}\n[[chains]]\nid = \"BC2\"\nsemantic_type = \"payments\"\nregime = \"open\"\nnodes = 3\nlatency = 0\nthreshold = 0\n\
             [[apps]]\nid = \"X\"\nchain = \"BC1\"\n\
             [[app_txns]]\nid = \"A\"\napp = \"X\"\n[[app_txns.sub_txns]]\npayload = \"p\"\nsemantic_type = \"payments\"\nkey = \"k\"\ncandidates = [\"BC1\", \"BC9\"]\n"
        );
        let Err(LoadError::Invalid(errs)) = ScenarioConfig::load_str(&text) else { panic!() };
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, vec!["chains[1].latency", "chains[1].threshold", "app_txns[0].sub_txns[0].candidates[1]"]);
    }

    #[test]
    fn heal_must_follow_its_target() {
        let text = format!(
            "{MINIMAL}\n[[faults]]\nid = \"h\"\nkind = \"heal\"\nat = 1\ntarget = \"p\"\n[[faults]]\nid = \"p\"\nkind = \"partition\"\nat = 5\nchains = [\"BC1\"]\n"
        );
        let Err(LoadError::Invalid(errs)) = ScenarioConfig::load_str(&text) else { panic!() };
        assert_eq!(errs[0].field, "faults[0].target");
    }

    #[test]
    fn random_scenarios_validate_and_roundtrip() {
        for seed in 0..50 {
            let cfg = random_fault_scenario(seed);
            cfg.validate().unwrap();
            assert_eq!(cfg.transfers.len(), 10);
            assert_eq!(ScenarioConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        }
    }
}
