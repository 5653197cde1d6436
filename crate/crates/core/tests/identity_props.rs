//! Identifier minting over many seeded samples.

use std::collections::BTreeSet;

use interchain_core::chain::{BlockchainSystem, ChainConfig, PermissionRegime, Rights, SemanticType, TransferUnit};
use interchain_core::identity::Resolver;
use interchain_core::ids::{AppId, ChainId};
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MINTS: u64 = 1000;

fn common_window(a: &[u8], b: &[u8], w: usize) -> bool {
    a.windows(w).any(|x| b.windows(w).any(|y| x == y))
}

#[test]
fn minted_suffixes_are_opaque_distinct_and_uniform() {
    let id = ChainId::new("BC1");
    let mut chain = BlockchainSystem::new(ChainConfig {
        id: id.clone(),
        path: "trade.bc1".into(),
        semantic_type: SemanticType::AssetRegistry,
        regime: PermissionRegime::private(),
        node_count: 4,
        quorum: Ratio::new(2, 3),
        confirm_latency: 1,
        denomination: None,
    })
    .unwrap();
    let cred = chain.access.issue(&id, &AppId::new("X"), Rights { read: true, write: true });
    let refs: Vec<_> = (0..MINTS)
        .map(|i| chain.submit(TransferUnit::uni(&i.to_be_bytes(), SemanticType::AssetRegistry, format!("u{i}")), &cred, 0).unwrap().local_ref)
        .collect();
    chain.advance_consensus(1);
    let mut resolver = Resolver::default();
    resolver.register_chain("trade.bc1", &id).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let mut seen = BTreeSet::new();
    let mut counts = [0u64; 256];
    for r in &refs {
        let cid = resolver.mint_cross_id(&mut chain, r, &mut rng, 2).unwrap();
        let suffix = cid.suffix();
        // Every encoding of the local reference an observer might know.
        let encodings = [r.to_string().into_bytes(), r.seq.to_be_bytes().to_vec(), r.seq.to_le_bytes().to_vec()];
        for enc in &encodings {
            assert!(!common_window(suffix, enc, 4), "{cid} shares 4 bytes with {r}");
        }
        assert!(!cid.to_string().contains(&r.to_string()));
        assert!(seen.insert(*suffix), "suffix collision");
        for b in suffix {
            counts[*b as usize] += 1;
        }
    }
    assert!(chain.masks.is_bijective());
    assert_eq!(chain.masks.len() as u64, MINTS);

    // Pearson chi-square over byte values, 255 degrees of freedom. The
    // 0.1% critical value is about 330.
    let n = (MINTS * 16) as f64;
    let e = n / 256.0;
    let chi2: f64 = counts.iter().map(|c| (*c as f64 - e).powi(2) / e).sum();
    assert!(chi2 < 330.0, "chi2 = {chi2}");
}
