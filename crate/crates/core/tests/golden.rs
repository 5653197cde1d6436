mod common;

use common::{bundled, golden, BUNDLED};
use interchain_core::simnet::run;

#[test]
fn bundled_scenarios_match_committed_goldens() {
    for name in BUNDLED {
        let cfg = bundled(name);
        let r = run(&cfg, cfg.seed).unwrap();
        assert!(r.report.passed(), "{name}: {:#?}", r.report.audits);
        assert_eq!(r.log, golden(name, "log"), "{name}: log drifted from golden");
        assert_eq!(r.report.to_json(), golden(name, "report"), "{name}: report drifted from golden");
    }
}

#[test]
fn every_declared_workload_item_has_one_outcome() {
    for name in BUNDLED {
        let cfg = bundled(name);
        let rep = run(&cfg, cfg.seed).unwrap().report;
        for t in &cfg.transfers {
            let n = rep.transfers.contains_key(&t.id) as usize + rep.transfer_rejections.contains_key(&t.id) as usize;
            assert_eq!(n, 1, "{name}: transfer {}", t.id);
        }
        for a in &cfg.app_txns {
            assert!(rep.app_txns.contains_key(&a.id), "{name}: app txn {}", a.id);
        }
        for p in &cfg.payments {
            assert!(rep.payments.contains_key(&p.id), "{name}: payment {}", p.id);
        }
        assert_eq!(rep.probes.len(), cfg.probes.len());
        assert_eq!(rep.reads.len(), cfg.reads.len());
    }
}
