//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its own PASS/FAIL line; the process fails if any criterion does.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use common::{bundled, BUNDLED};
use interchain_core::batch::run_seeds;
use interchain_core::chain::{EntryRecord, Mark};
use interchain_core::gateway::{verify_attestation, TransferState};
use interchain_core::ids::{ChainId, ConnectorId, PathId, TransferId};
use interchain_core::runner::{replay_diff, LogDiff};
use interchain_core::scenario::{random_fault_scenario, FaultEntry, FaultKindSpec};

use interchain_core::simnet::{leaks_internal, run};
use interchain_core::valuenet::{Amount, Connector, ValueNet};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn ch(s: &str) -> ChainId {
    ChainId::new(s)
}

/// The app transaction falls back from the partitioned chain and confirms
/// on the second candidate at tick 14 after exactly two attempts.
fn fallback_confirms() -> Check {
    let r = run(&bundled("fig2_fallback"), 0).map_err(|e| e.to_string())?;
    let t = r.world.survivor.txn("A1").ok_or("A1 missing")?;
    let sub = &t.sub_txns[0];
    ensure(t.state.to_string() == "CONFIRMED", || format!("state {}", t.state))?;
    ensure(t.final_tick == Some(14), || format!("final tick {:?}", t.final_tick))?;
    ensure(sub.attempts.len() == 2, || format!("{} attempts", sub.attempts.len()))?;
    ensure(sub.confirmations.first().map(|c| &c.0) == Some(&ch("BC2")), || format!("confirmed on {:?}", sub.confirmations))?;
    Ok("CONFIRMED on BC2 at tick 14 after 2 attempts".into())
}

/// The vouched transfer finalizes, the resolver points at the destination,
/// and the source ledger keeps the lock, a pointer mark and an attestation.
fn vouched_transfer_finalizes() -> Check {
    let r = run(&bundled("fig4_transfer"), 7).map_err(|e| e.to_string())?;
    let w = &r.world;
    let t = w.interop.transfer(&TransferId::new("T1")).ok_or("T1 missing")?;
    ensure(t.state == TransferState::Finalized, || format!("state {}", t.state))?;
    let home = &w.interop.resolver.home_of(&t.asset).ok_or("asset unresolved")?.home_chain;
    ensure(*home == ch("BC2"), || format!("resolves to {home}"))?;
    let bc1 = w.interop.chain(&ch("BC1")).unwrap().ledger();
    let lock = bc1.entries().iter().any(|e| matches!(&e.record, EntryRecord::Lock { asset, .. } if *asset == t.asset));
    ensure(lock, || "no lock entry on BC1".into())?;
    let pointer = matches!(bc1.mark_of(&t.asset_ref), Some(Mark::Pointer(p)) if p.home_chain == ch("BC2"));
    ensure(pointer, || format!("asset entry mark {:?}", bc1.mark_of(&t.asset_ref)))?;
    let att = bc1.entries().iter().any(|e| matches!(&e.record, EntryRecord::Attestation { asset, .. } if *asset == t.asset));
    ensure(att, || "no attestation entry on BC1".into())?;
    for (side, a) in [("source", &t.source_attestation), ("dest", &t.dest_attestation)] {
        let ok = a.as_ref().is_some_and(|a| verify_attestation(a, &w.interop.registry));
        ensure(ok, || format!("{side} attestation missing or invalid"))?;
    }
    Ok("FINALIZED, resolves to BC2, lock + pointer + attestation on BC1, both attestations verify".into())
}

/// Across 500 random fault schedules an asset never has two authoritative
/// homes and is never left with none.
fn safety_under_random_faults() -> Check {
    let seeds: Vec<u64> = (0..500).collect();
    let rs = run_seeds(random_fault_scenario, &seeds).map_err(|e| e.to_string())?;
    let bad: Vec<_> = rs
        .iter()
        .filter(|s| s.failed_audits.iter().any(|a| *a == "single-authority" || *a == "no-lost-asset"))
        .map(|s| s.seed)
        .collect();
    ensure(bad.is_empty(), || format!("violations on seeds {bad:?}"))?;
    let transfers: usize = rs.iter().map(|s| s.transfer_states.len()).sum();
    Ok(format!("500/500 seeds clean over {transfers} transfers"))
}

/// Direct read from a foreign chain is refused; a valid delegation succeeds;
/// an expired one is refused for expiry.
fn delegated_reads() -> Check {
    let r = run(&bundled("fig4_transfer"), 7).map_err(|e| e.to_string())?;
    let got: Vec<(&str, bool, &str)> = r.report.reads.iter().map(|x| (x.mode.as_str(), x.ok, x.result.as_str())).collect();
    let want = vec![("direct", false, "permission-denied"), ("delegated", true, "ok"), ("delegated", false, "delegation-grant-expired")];
    ensure(got == want, || format!("reads {got:?}"))?;
    Ok("denied / ok / expired".into())
}

fn random_net(rng: &mut ChaCha8Rng) -> ValueNet {
    let chains = ["A", "B", "C", "D"];
    let mut net = ValueNet::new();
    net.reservation_ttl = rng.gen_range(2..8);
    for (i, c) in chains.iter().enumerate() {
        net.add_chain(ch(c), format!("d{i}"));
    }
    for k in 0..rng.gen_range(2..6) {
        let i = rng.gen_range(0..chains.len());
        let j = (i + rng.gen_range(1..chains.len())) % chains.len();
        let mut rates = BTreeMap::new();
        rates.insert((format!("d{i}"), format!("d{j}")), Amount::new(rng.gen_range(1..5i64).into(), rng.gen_range(1..5i64).into()));
        if rng.gen_bool(0.5) {
            rates.insert((format!("d{j}"), format!("d{i}")), Amount::new(rng.gen_range(1..5i64).into(), rng.gen_range(1..5i64).into()));
        }
        let reserves = [i, j].iter().map(|d| (format!("d{d}"), Amount::from_integer(rng.gen_range(0..50i64).into()))).collect();
        net.add_connector(Connector::new(format!("k{k}"), [ch(chains[i]), ch(chains[j])], reserves, rates).unwrap()).unwrap();
    }
    net
}

/// Random reserve/settle/release/expire sequences: a failed build leaves no
/// residue, every reservation belongs to a live path, and reserves always
/// equal the initial book moved by exactly the settled hop amounts.
fn reservation_atomicity() -> Check {
    let (mut builds, mut failed, mut settled) = (0, 0, 0);
    for seq in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seq);
        let mut net = random_net(&mut rng);
        let mut expected: BTreeMap<ConnectorId, BTreeMap<String, Amount>> =
            net.connectors().map(|c| (c.connector_id.clone(), c.reserves.clone())).collect();
        let mut paths: Vec<PathId> = Vec::new();
        let mut now = 0;
        for _ in 0..60 {
            match rng.gen_range(0..8) {
                0..=3 => {
                    let (a, b) = (rng.gen_range(0..4), rng.gen_range(0..4));
                    if a == b {
                        continue;
                    }
                    let amt = Amount::new(rng.gen_range(1..40i64).into(), rng.gen_range(1..4i64).into());
                    let before = net.reservations();
                    builds += 1;
                    match net.build_path(&ch(["A", "B", "C", "D"][a]), &ch(["A", "B", "C", "D"][b]), &amt, now) {
                        Ok(p) => paths.push(p.path_id),
                        Err(_) => {
                            failed += 1;
                            ensure(before == net.reservations(), || format!("sequence {seq}: failed build left residue"))?;
                        }
                    }
                }
                4 | 5 if !paths.is_empty() => {
                    let id = paths[rng.gen_range(0..paths.len())].clone();
                    if let Ok(p) = net.settle_path(&id, now) {
                        settled += 1;
                        for h in &p.hops {
                            let e = expected.get_mut(&h.connector).unwrap();
                            *e.entry(h.denom_in.clone()).or_insert_with(Amount::zero) += &h.amount_in;
                            *e.entry(h.denom_out.clone()).or_insert_with(Amount::zero) -= &h.amount_out;
                        }
                    }
                }
                6 if !paths.is_empty() => {
                    let id = paths[rng.gen_range(0..paths.len())].clone();
                    let _ = net.release_path(&id);
                }
                _ => {
                    now += rng.gen_range(1..4);
                    net.expire(now);
                }
            }
            for (cid, r) in net.reservations() {
                let live = net.path(&r.path_id).is_some_and(|p| p.state.to_string() == "RESERVED");
                ensure(live, || format!("sequence {seq}: {cid} holds a reservation for finished path {}", r.path_id))?;
            }
            for c in net.connectors() {
                for (d, want) in &expected[&c.connector_id] {
                    ensure(c.reserve_of(d) == *want, || format!("sequence {seq}: {} {d} is {} not {want}", c.connector_id, c.reserve_of(d)))?;
                    ensure(!c.reserve_of(d).is_negative(), || format!("sequence {seq}: negative reserve"))?;
                }
            }
        }
    }
    Ok(format!("200 sequences, {builds} builds ({failed} rejected), {settled} settlements"))
}

/// Two runs of each bundled scenario with the same seed produce
/// byte-identical logs and reports.
fn determinism() -> Check {
    for name in BUNDLED {
        let cfg = bundled(name);
        let (a, b) = (run(&cfg, cfg.seed).map_err(|e| e.to_string())?, run(&cfg, cfg.seed).map_err(|e| e.to_string())?);
        let diff = replay_diff(&a.log, &b.log);
        ensure(diff == LogDiff::Identical, || format!("{name}: {diff:?}"))?;
        ensure(a.report.to_json() == b.report.to_json(), || format!("{name}: reports differ"))?;
    }
    Ok(format!("{} scenarios replay identically", BUNDLED.len()))
}

/// Nothing shown outside a chain names a node or a chain-local reference.
fn opacity() -> Check {
    let mut n = 0;
    for name in BUNDLED {
        let cfg = bundled(name);
        let r = run(&cfg, cfg.seed).map_err(|e| e.to_string())?;
        for t in &r.world.transcripts {
            n += 1;
            ensure(!leaks_internal(t), || format!("{name}: `{t}`"))?;
        }
    }
    ensure(n > 0, || "no transcripts captured".into())?;
    Ok(format!("{n} external transcripts clean"))
}

fn crash(id: &str, gw: &str, at: u64) -> FaultEntry {
    FaultEntry {
        id: id.into(),
        kind: FaultKindSpec::GatewayCrash,
        at,
        until: None,
        chains: vec![],
        links: vec![],
        node: None,
        gateway: Some(gw.into()),
        target: None,
    }
}

/// With a 2-of-3 threshold, one source gateway crash mid-transfer is
/// survived; two leave too few signers, so the transfer aborts and the
/// asset stays at the source.
fn threshold_resilience() -> Check {
    let base = bundled("gateway_crash");
    let one = run(&base, base.seed).map_err(|e| e.to_string())?;
    let t = one.world.interop.transfer(&TransferId::new("T1")).unwrap();
    ensure(t.state == TransferState::Finalized, || format!("one crash: {}", t.state))?;

    let mut two = base.clone();
    two.faults = vec![crash("g0-down", "BC1/g0", 6), crash("g1-down", "BC1/g1", 6)];
    let r = run(&two, base.seed).map_err(|e| e.to_string())?;
    let w = &r.world;
    let t = w.interop.transfer(&TransferId::new("T1")).unwrap();
    ensure(t.state == TransferState::Aborted, || format!("two crashes: {}", t.state))?;
    ensure(w.interop.resolver.home_of(&t.asset).unwrap().home_chain == ch("BC1"), || "two crashes: home moved".into())?;
    ensure(w.interop.ledger_claims(&t.asset) == vec![ch("BC1")], || format!("two crashes: claims {:?}", w.interop.ledger_claims(&t.asset)))?;
    ensure(r.report.passed(), || "two crashes: audits failed".into())?;
    Ok("one crash FINALIZED; two crashes ABORTED with authority on BC1".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 survivable fallback", fallback_confirms),
        ("2 vouched transfer", vouched_transfer_finalizes),
        ("3 single authority under faults", safety_under_random_faults),
        ("4 delegated read", delegated_reads),
        ("5 reservation atomicity", reservation_atomicity),
        ("6 deterministic replay", determinism),
        ("7 opacity", opacity),
        ("8 threshold resilience", threshold_resilience),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("criterion {name}: PASS ({detail}; {secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why}; {secs:.2}s)");
            }
        }
    }
    println!("acceptance: {}/8 passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
