#![allow(dead_code)]

use std::path::PathBuf;

use interchain_core::scenario::ScenarioConfig;

pub const BUNDLED: [&str; 5] = ["fig2_fallback", "fig4_transfer", "ilp_path", "gateway_crash", "abort_partition"];

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn bundled(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&scenarios_dir().join(format!("{name}.toml"))).unwrap()
}

pub fn golden(name: &str, ext: &str) -> String {
    std::fs::read_to_string(scenarios_dir().join("golden").join(format!("{name}.{ext}"))).unwrap()
}

/// Minimal two-chain asset-registry setup in TOML, for tests to extend.
pub fn two_chain_base(horizon: u64, threshold: usize) -> String {
    format!(
        r#"
name = "t"
horizon = {horizon}
[[chains]]
id = "BC1"
semantic_type = "asset-registry"
regime = "private"
nodes = 4
latency = 2
threshold = {threshold}
[[chains]]
id = "BC2"
semantic_type = "asset-registry"
regime = "private"
nodes = 4
latency = 2
threshold = {threshold}
[[peering]]
parties = ["BC1", "BC2"]
semantics = ["asset-registry"]
fee = 1
[[assets]]
name = "a"
chain = "BC1"
at = 0
[[transfers]]
id = "T1"
asset = "a"
from = "BC1"
to = "BC2"
beneficiary = "Y"
start = 3
deadline = 40
"#
    )
}
