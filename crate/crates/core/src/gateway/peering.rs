use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::GatewayError;
use crate::chain::SemanticType;
use crate::ids::ChainId;

pub type AgreementId = u32;

/// Compatibility and fee contract gating cross-domain transfers. Two parties
/// make a bilateral agreement, more make a multilateral one; an open
/// agreement with no listed parties is a public exchange covering every chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PeeringAgreement {
    pub id: AgreementId,
    pub parties: BTreeSet<ChainId>,
    pub open: bool,
    pub compatible_semantics: BTreeSet<SemanticType>,
    pub protocols: BTreeSet<String>,
    pub fee_per_transfer: u64,
    pub active: bool,
}

impl PeeringAgreement {
    pub fn covers(&self, a: &ChainId, b: &ChainId, semantic: SemanticType) -> bool {
        let members = (self.open && self.parties.is_empty()) || (self.parties.contains(a) && self.parties.contains(b));
        self.active && a != b && members && self.compatible_semantics.contains(&semantic)
    }
}

#[derive(Clone, Debug, Default)]
pub struct PeeringBook {
    agreements: Vec<PeeringAgreement>,
    tallies: BTreeMap<(ChainId, ChainId), u64>,
}

fn pair(a: &ChainId, b: &ChainId) -> (ChainId, ChainId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

impl PeeringBook {
    pub fn establish(
        &mut self,
        parties: BTreeSet<ChainId>,
        open: bool,
        semantics: BTreeSet<SemanticType>,
        protocols: BTreeSet<String>,
        fee: u64,
    ) -> Result<AgreementId, GatewayError> {
        if parties.len() < 2 && !open {
            return Err(GatewayError::InvalidAgreement("a closed agreement needs two distinct parties"));
        }
        if semantics.is_empty() {
            return Err(GatewayError::InvalidAgreement("no compatible semantics"));
        }
        if self.agreements.iter().any(|a| a.active && a.parties == parties && a.open == open) {
            return Err(GatewayError::DuplicateAgreement);
        }
        let id = self.agreements.len() as AgreementId;
        self.agreements.push(PeeringAgreement {
            id,
            parties,
            open,
            compatible_semantics: semantics,
            protocols,
            fee_per_transfer: fee,
            active: true,
        });
        Ok(id)
    }

    /// Blocks new initiations; transfers already in flight run to completion.
    pub fn revoke(&mut self, id: AgreementId) -> Result<(), GatewayError> {
        let a = self.agreements.get_mut(id as usize).ok_or(GatewayError::NoPeering)?;
        a.active = false;
        Ok(())
    }

    pub fn get(&self, id: AgreementId) -> Option<&PeeringAgreement> {
        self.agreements.get(id as usize)
    }

    pub fn agreements(&self) -> &[PeeringAgreement] {
        &self.agreements
    }

    /// Lowest-numbered active agreement covering the pair.
    pub fn covering(&self, a: &ChainId, b: &ChainId, semantic: SemanticType) -> Option<&PeeringAgreement> {
        self.agreements.iter().find(|ag| ag.covers(a, b, semantic))
    }

    /// Chains a given chain currently peers with, in id order.
    pub fn peers_of(&self, chain: &ChainId, all: &[ChainId]) -> Vec<ChainId> {
        all.iter()
            .filter(|c| *c != chain)
            .filter(|c| {
                self.agreements.iter().any(|ag| {
                    ag.active && ((ag.open && ag.parties.is_empty()) || (ag.parties.contains(chain) && ag.parties.contains(*c)))
                })
            })
            .cloned()
            .collect()
    }

    pub fn record_fee(&mut self, a: &ChainId, b: &ChainId, fee: u64) {
        *self.tallies.entry(pair(a, b)).or_default() += fee;
    }

    pub fn tally(&self, a: &ChainId, b: &ChainId) -> u64 {
        self.tallies.get(&pair(a, b)).copied().unwrap_or(0)
    }

    pub fn tallies(&self) -> &BTreeMap<(ChainId, ChainId), u64> {
        &self.tallies
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[&str]) -> BTreeSet<ChainId> {
        ids.iter().map(|s| ChainId::new(*s)).collect()
    }

    #[test]
    fn bilateral_agreement_gates_semantics() {
        let mut book = PeeringBook::default();
        book.establish(set(&["BC1", "BC2"]), false, [SemanticType::AssetRegistry].into(), BTreeSet::new(), 2).unwrap();
        let (a, b) = (ChainId::new("BC1"), ChainId::new("BC2"));
        assert!(book.covering(&a, &b, SemanticType::AssetRegistry).is_some());
        assert!(book.covering(&b, &a, SemanticType::AssetRegistry).is_some());
        assert!(book.covering(&a, &b, SemanticType::Payments).is_none());
        assert!(book.covering(&a, &ChainId::new("BC3"), SemanticType::AssetRegistry).is_none());
    }

    #[test]
    fn duplicate_and_revoke() {
        let mut book = PeeringBook::default();
        let id = book.establish(set(&["BC1", "BC2"]), false, [SemanticType::AssetRegistry].into(), BTreeSet::new(), 0).unwrap();
        assert_eq!(
            book.establish(set(&["BC1", "BC2"]), false, [SemanticType::Payments].into(), BTreeSet::new(), 0),
            Err(GatewayError::DuplicateAgreement)
        );
        book.revoke(id).unwrap();
        assert!(book.covering(&ChainId::new("BC1"), &ChainId::new("BC2"), SemanticType::AssetRegistry).is_none());
        assert!(book.establish(set(&["BC1", "BC2"]), false, [SemanticType::Payments].into(), BTreeSet::new(), 0).is_ok());
    }

    #[test]
    fn closed_agreement_needs_two_parties() {
        let mut book = PeeringBook::default();
        assert!(book.establish(set(&["BC1"]), false, [SemanticType::Payments].into(), BTreeSet::new(), 0).is_err());
        let open = book.establish(BTreeSet::new(), true, [SemanticType::Payments].into(), BTreeSet::new(), 0).unwrap();
        assert!(book.get(open).unwrap().covers(&ChainId::new("A"), &ChainId::new("Z"), SemanticType::Payments));
    }

    #[test]
    fn multilateral_covers_every_member_pair() {
        let mut book = PeeringBook::default();
        book.establish(set(&["A", "B", "C"]), false, [SemanticType::GenericRecord].into(), BTreeSet::new(), 1).unwrap();
        let all = [ChainId::new("A"), ChainId::new("B"), ChainId::new("C"), ChainId::new("D")];
        assert_eq!(book.peers_of(&all[0], &all), vec![all[1].clone(), all[2].clone()]);
    }

    #[test]
    fn fee_tally_is_per_unordered_pair() {
        let mut book = PeeringBook::default();
        let (a, b) = (ChainId::new("BC1"), ChainId::new("BC2"));
        for _ in 0..3 {
            book.record_fee(&a, &b, 2);
        }
        assert_eq!(book.tally(&b, &a), 6);
    }
}
