//! Scripted runs with hand-derived schedules.

mod common;

use common::{bundled, two_chain_base};
use interchain_core::chain::EntryRecord;
use interchain_core::gateway::{GatewayError, TransferRequest, TransferState};
use interchain_core::ids::{AppId, ChainId, TransferId};
use interchain_core::scenario::{random_fault_scenario, ScenarioConfig};
use interchain_core::simnet::{run, World};

fn ch(s: &str) -> ChainId {
    ChainId::new(s)
}

const ONE_CHAIN: &str = r#"
name = "one"
horizon = 40
[[chains]]
id = "BC1"
semantic_type = "payments"
regime = "open"
nodes = 4
latency = 3
[[apps]]
id = "X"
chain = "BC1"
write = true
[[app_txns]]
id = "A"
app = "X"
start = 0
[[app_txns.sub_txns]]
payload = "p"
semantic_type = "payments"
key = "k"
candidates = ["BC1"]
timeout = 30
"#;

fn crash_two(at: u64, until: Option<u64>) -> String {
    let until = until.map(|u| format!("until = {u}\n")).unwrap_or_default();
    format!(
        "{ONE_CHAIN}[[faults]]\nid = \"c0\"\nkind = \"node-crash\"\nat = {at}\n{until}node = \"BC1/n0\"\n\
         [[faults]]\nid = \"c1\"\nkind = \"node-crash\"\nat = {at}\n{until}node = \"BC1/n1\"\n"
    )
}

#[test]
fn crash_after_confirmation_does_not_disturb_it() {
    // Submitted at 0 with latency 3: the round at tick 3 confirms with all 4
    // nodes, before the crashes at tick 5.
    let cfg = ScenarioConfig::load_str(&crash_two(5, None)).unwrap();
    let w = run(&cfg, 1).unwrap().world;
    let e = &w.interop.chains[&ch("BC1")].ledger().entries()[0];
    assert_eq!((e.confirmed_tick, e.confirming_nodes.len()), (3, 4));
    assert_eq!(w.survivor.outcome("A").unwrap().final_tick, Some(3));
}

#[test]
fn quorum_loss_stalls_until_heal() {
    // 2 of 4 live is below ceil(2/3 * 4) = 3. The heal executes at tick 9
    // after that tick's consensus round, so the unit confirms at tick 10.
    let cfg = ScenarioConfig::load_str(&crash_two(1, Some(9))).unwrap();
    let w = run(&cfg, 1).unwrap().world;
    let e = &w.interop.chains[&ch("BC1")].ledger().entries()[0];
    assert_eq!((e.confirmed_tick, e.confirming_nodes.len()), (10, 4));
    assert!(w.auditor.all_passed());
}

#[test]
fn timer_scheduled_from_an_event_fires_exactly_its_delay_later() {
    let text = ONE_CHAIN.replace("start = 0", "start = 2").replace("timeout = 30", "timeout = 5")
        + "[[faults]]\nid = \"p\"\nkind = \"partition\"\nat = 0\nchains = [\"BC1\"]\n";
    let r = run(&ScenarioConfig::load_str(&text).unwrap(), 1).unwrap();
    let submit = r.world.log.of_kind("app").find(|l| l.detail.starts_with("op=submit")).unwrap();
    let timer = r.world.log.of_kind("timer").next().unwrap();
    assert_eq!(timer.tick - submit.tick, 5);
}

#[test]
fn empty_scenario_is_quiescent_at_zero() {
    let r = run(&ScenarioConfig::load_str("horizon = 10\n").unwrap(), 0).unwrap();
    assert_eq!(r.log, "");
    assert!(r.report.quiescent);
    assert_eq!(r.report.final_tick, 0);
}

#[test]
fn seeds_with_jitter_diverge_and_both_pass() {
    let mut cfg = bundled("fig4_transfer");
    cfg.network.jitter = 3;
    let (a, b) = (run(&cfg, 42).unwrap(), run(&cfg, 43).unwrap());
    assert_ne!(a.log, b.log);
    assert!(a.report.passed() && b.report.passed());
    assert_eq!(a.report.transfers["T1"].state, "FINALIZED");
}

#[test]
fn dest_partition_before_recording_aborts_and_releases() {
    let text = two_chain_base(120, 2) + "[[faults]]\nid = \"p\"\nkind = \"partition\"\nat = 4\nuntil = 60\nchains = [\"BC2\"]\n";
    let r = run(&ScenarioConfig::load_str(&text).unwrap(), 1).unwrap();
    let w = &r.world;
    let t = w.interop.transfer(&TransferId::new("T1")).unwrap();
    assert_eq!(t.state, TransferState::Aborted);
    assert!(!t.transitions.iter().any(|x| x.to == TransferState::DestRecorded));
    let asset = &w.assets["a"];
    assert_eq!(w.interop.resolver.home_of(asset).unwrap().home_chain, ch("BC1"));
    assert_eq!(w.interop.ledger_claims(asset), vec![ch("BC1")]);
    assert!(w.interop.lock_holder(asset).is_none());
    let bc1 = w.interop.chains[&ch("BC1")].ledger();
    assert_eq!(bc1.entries().iter().filter(|e| matches!(e.record, EntryRecord::Release { .. })).count(), 1);
    assert!(r.report.passed());
}

#[test]
fn revoking_peering_mid_transfer_lets_it_finish_but_blocks_the_next() {
    let cfg = ScenarioConfig::load_str(&two_chain_base(120, 2)).unwrap();
    let mut w = World::new(cfg, 1).unwrap();
    w.run_until(6);
    let id = TransferId::new("T1");
    let state = w.interop.transfer(&id).unwrap().state;
    assert!(!state.is_terminal() && state != TransferState::Initiated, "{state}");
    w.interop.peering.revoke(0).unwrap();
    w.run();
    assert_eq!(w.interop.transfer(&id).unwrap().state, TransferState::Finalized);
    let again = TransferRequest {
        transfer_id: TransferId::new("T2"),
        asset: w.assets["a"].clone(),
        source: ch("BC2"),
        dest: ch("BC1"),
        beneficiary: AppId::new("X"),
        deadline_ticks: 40,
        pairing: None,
    };
    assert_eq!(w.initiate_transfer(again), Err(GatewayError::NoPeering));
}

#[test]
fn healed_chain_confirms_late_and_is_reported_as_duplicate() {
    // BC1 loses quorum until 30. Attempt on BC1 at 1 pends; timeout at 11
    // moves to BC2 (latency 4) which confirms at 15. BC1's heal runs after
    // the tick-30 round, so the original unit lands at 31.
    let text = r#"
name = "dup"
horizon = 80
[[chains]]
id = "BC1"
semantic_type = "payments"
regime = "open"
nodes = 4
latency = 2
[[chains]]
id = "BC2"
semantic_type = "payments"
regime = "open"
nodes = 4
latency = 4
[[apps]]
id = "X"
chain = "BC1"
write = true
[[apps]]
id = "X"
chain = "BC2"
write = true
[[app_txns]]
id = "A"
app = "X"
start = 1
[[app_txns.sub_txns]]
payload = "p"
semantic_type = "payments"
key = "dup-key"
candidates = ["BC1", "BC2"]
timeout = 10
[[faults]]
id = "n0"
kind = "node-crash"
at = 0
until = 30
node = "BC1/n0"
[[faults]]
id = "n1"
kind = "node-crash"
at = 0
until = 30
node = "BC1/n1"
"#;
    let r = run(&ScenarioConfig::load_str(text).unwrap(), 1).unwrap();
    let w = &r.world;
    // Cross-chain ledger scan for the idempotency key.
    let hits: Vec<(ChainId, u64)> = w
        .interop
        .chains
        .iter()
        .flat_map(|(id, c)| c.ledger().entries().iter().filter(|e| e.unit.idempotency_key.as_str() == "dup-key").map(move |e| (id.clone(), e.confirmed_tick)))
        .collect();
    assert_eq!(hits, vec![(ch("BC1"), 31), (ch("BC2"), 15)]);
    let out = w.survivor.outcome("A").unwrap();
    assert_eq!(out.final_tick, Some(15));
    let dups = w.survivor.poll_duplicates("A").unwrap();
    assert_eq!(dups.len(), 1);
    assert_eq!((dups[0].chain.clone(), dups[0].confirmed_tick), (ch("BC1"), 31));
    assert_eq!(r.report.app_txns["A"].duplicates, 1);
    assert!(r.report.passed());
}

#[test]
fn heal_of_undeclared_fault_is_rejected_up_front() {
    let mut cfg = ScenarioConfig::load_str(&two_chain_base(60, 2)).unwrap();
    cfg.faults.push(interchain_core::scenario::FaultEntry {
        id: "h".into(),
        kind: interchain_core::scenario::FaultKindSpec::Heal,
        at: 5,
        until: None,
        chains: vec![],
        links: vec![],
        node: None,
        gateway: None,
        target: Some("ghost".into()),
    });
    assert!(run(&cfg, 1).is_err());
}

#[test]
fn valuenet_is_external_to_chain_ledgers() {
    for seed in 0..10 {
        let plain = random_fault_scenario(seed);
        let mut with_value = plain.clone();
        for (c, d) in with_value.chains.iter_mut().zip(["usd", "eur"]) {
            c.denomination = Some(d.into());
        }
        with_value.connectors.push(interchain_core::scenario::ConnectorSpec {
            id: "K".into(),
            chains: vec!["BC1".into(), "BC2".into()],
            reserves: [("usd".to_string(), "100".to_string()), ("eur".to_string(), "100".to_string())].into(),
            rates: vec![interchain_core::scenario::RateSpec { from: "usd".into(), to: "eur".into(), rate: "1".into() }],
        });
        let a = run(&plain, seed).unwrap().world;
        let b = run(&with_value, seed).unwrap().world;
        for (id, c) in &a.interop.chains {
            let other = b.interop.chains[id].ledger();
            assert_eq!(c.ledger().entries(), other.entries(), "seed {seed} chain {id}");
            assert_eq!(c.ledger().marks(), other.marks(), "seed {seed} chain {id}");
        }
    }
}
