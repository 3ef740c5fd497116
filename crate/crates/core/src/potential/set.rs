use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::model::VarId;

use super::{union_scope, Potential};

/// The pure policies a potential was built from, as `decision -> index`
/// into that decision's pure-policy enumeration.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provenance(BTreeMap<VarId, usize>);

impl Provenance {
    pub fn empty() -> Self {
        Provenance(BTreeMap::new())
    }

    pub fn single(decision: VarId, policy: usize) -> Self {
        Provenance(BTreeMap::from([(decision, policy)]))
    }

    pub fn get(&self, decision: VarId) -> Option<usize> {
        self.0.get(&decision).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.0.iter().map(|(&d, &p)| (d, p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Union of two provenances, `None` if they pick different policies for
    /// the same decision.
    pub fn union(&self, other: &Provenance) -> Option<Provenance> {
        let mut out = self.0.clone();
        for (&d, &p) in &other.0 {
            match out.insert(d, p) {
                Some(prev) if prev != p => return None,
                _ => {}
            }
        }
        Some(Provenance(out))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub potential: Potential,
    pub provenance: Provenance,
}

/// A set of potentials over one scope, each tagged with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSet {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    members: Vec<Member>,
}

impl PotentialSet {
    /// Members must share `scope`. Exact duplicates (same provenance and
    /// bitwise-equal values) are dropped, keeping the first.
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, members: Vec<Member>) -> Result<Self> {
        if let Some(m) = members.iter().find(|m| m.potential.scope() != scope.as_slice() || m.potential.cards() != cards.as_slice()) {
            return Err(Error::InvalidPotential(format!(
                "member over {:?} in a set over {:?}",
                m.potential.scope(),
                scope
            )));
        }
        let mut seen = HashSet::new();
        let members = members
            .into_iter()
            .filter(|m| {
                let bits: Vec<u64> = m.potential.values().iter().map(|v| v.to_bits()).collect();
                seen.insert((m.provenance.clone(), bits))
            })
            .collect();
        Ok(PotentialSet { scope, cards, members })
    }

    /// Members assumed distinct and in scope.
    pub(crate) fn from_distinct(scope: Vec<VarId>, cards: Vec<usize>, members: Vec<Member>) -> Self {
        debug_assert!(members.iter().all(|m| m.potential.scope() == scope.as_slice()));
        PotentialSet { scope, cards, members }
    }

    pub fn singleton(potential: Potential) -> Self {
        PotentialSet {
            scope: potential.scope().to_vec(),
            cards: potential.cards().to_vec(),
            members: vec![Member { potential, provenance: Provenance::empty() }],
        }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn into_members(self) -> Vec<Member> {
        self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Number of joint assignments of the scope.
    pub fn num_assignments(&self) -> usize {
        self.cards.iter().product()
    }
}

/// `COMBINE(K_1, ..., K_n)`: every product taking one member from each set,
/// with the union of their provenances. Products whose factors disagree on a
/// decision's policy are skipped. The first set varies slowest.
pub fn combine_sets(sets: &[PotentialSet]) -> Result<PotentialSet> {
    let mut scope = Vec::new();
    let mut cards = Vec::new();
    for s in sets {
        (scope, cards) = union_scope(&scope, &cards, &s.scope, &s.cards)?;
    }
    let mut acc = vec![Member { potential: Potential::scalar(1.0), provenance: Provenance::empty() }];
    for s in sets {
        let mut next = Vec::with_capacity(acc.len() * s.len());
        for a in &acc {
            for b in &s.members {
                let Some(provenance) = a.provenance.union(&b.provenance) else { continue };
                next.push(Member { potential: a.potential.multiply(&b.potential)?, provenance });
            }
        }
        acc = next;
    }
    // broadcast to the full scope (only matters when some set is scalar-only)
    let unit = Potential::unit(&scope.iter().copied().zip(cards.iter().copied()).collect::<Vec<_>>());
    let members = acc
        .into_iter()
        .map(|m| {
            let potential = if m.potential.scope() == scope.as_slice() { m.potential } else { m.potential.multiply(&unit)? };
            Ok(Member { potential, provenance: m.provenance })
        })
        .collect::<Result<Vec<_>>>()?;
    PotentialSet::new(scope, cards, members)
}

/// `SUMOUT(K, Z)`, member by member; provenance carries over.
pub fn sum_out_set(k: &PotentialSet, vars: &[VarId]) -> Result<PotentialSet> {
    let missing: Vec<VarId> = vars.iter().copied().filter(|v| k.scope.binary_search(v).is_err()).collect();
    if !missing.is_empty() {
        return Err(Error::NotInScope(missing));
    }
    let keep: Vec<usize> = (0..k.scope.len()).filter(|&i| !vars.contains(&k.scope[i])).collect();
    let scope = keep.iter().map(|&i| k.scope[i]).collect();
    let cards = keep.iter().map(|&i| k.cards[i]).collect();
    let members = k
        .members
        .iter()
        .map(|m| Ok(Member { potential: m.potential.sum_out(vars)?, provenance: m.provenance.clone() }))
        .collect::<Result<Vec<_>>>()?;
    Ok(PotentialSet::from_distinct(scope, cards, members))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(vars: &[(usize, usize)], values: &[f64], prov: Provenance) -> Member {
        Member {
            potential: Potential::new(
                vars.iter().map(|&(v, _)| VarId(v)).collect(),
                vars.iter().map(|&(_, c)| c).collect(),
                values.to_vec(),
            )
            .unwrap(),
            provenance: prov,
        }
    }

    fn set(vars: &[(usize, usize)], rows: &[(&[f64], Provenance)]) -> PotentialSet {
        PotentialSet::new(
            vars.iter().map(|&(v, _)| VarId(v)).collect(),
            vars.iter().map(|&(_, c)| c).collect(),
            rows.iter().map(|(v, p)| member(vars, v, p.clone())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn combine_two_singletons() {
        let a = set(&[(0, 2)], &[(&[0.5, 0.5], Provenance::empty())]);
        let b = set(&[(1, 2)], &[(&[0.2, 0.8], Provenance::single(VarId(1), 3))]);
        let c = combine_sets(&[a, b]).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.members()[0].potential.values(), &[0.1, 0.1, 0.4, 0.4]);
        assert_eq!(c.members()[0].provenance, Provenance::single(VarId(1), 3));
    }

    #[test]
    fn combine_is_a_cartesian_product() {
        let d0 = VarId(7);
        let d1 = VarId(8);
        let a = set(&[(0, 2)], &[(&[1.0, 0.0], Provenance::single(d0, 0)), (&[0.0, 1.0], Provenance::single(d0, 1))]);
        let b = set(
            &[(1, 2)],
            &[
                (&[1.0, 0.0], Provenance::single(d1, 0)),
                (&[0.0, 1.0], Provenance::single(d1, 1)),
                (&[0.5, 0.5], Provenance::single(d1, 2)),
            ],
        );
        let c = combine_sets(&[a, b]).unwrap();
        assert_eq!(c.len(), 6);
        // first set slowest
        assert_eq!(c.members()[1].provenance.get(d0), Some(0));
        assert_eq!(c.members()[1].provenance.get(d1), Some(1));
        assert_eq!(c.members()[3].provenance.get(d0), Some(1));
    }

    #[test]
    fn combine_with_unit_is_identity() {
        let a = set(&[(0, 2)], &[(&[0.3, 0.9], Provenance::single(VarId(4), 1))]);
        let unit = PotentialSet::singleton(Potential::unit(&[(VarId(0), 2)]));
        let c = combine_sets(&[a.clone(), unit]).unwrap();
        assert_eq!(c, a);
        assert_eq!(combine_sets(&[]).unwrap().members()[0].potential.as_scalar(), Some(1.0));
    }

    #[test]
    fn conflicting_provenance_is_skipped() {
        let a = set(&[(0, 2)], &[(&[1.0, 1.0], Provenance::single(VarId(9), 0))]);
        let b = set(&[(0, 2)], &[(&[1.0, 1.0], Provenance::single(VarId(9), 1))]);
        assert!(combine_sets(&[a, b]).unwrap().is_empty());
    }

    #[test]
    fn duplicates_are_dropped() {
        let s = set(&[(0, 2)], &[(&[1.0, 0.5], Provenance::empty()), (&[1.0, 0.5], Provenance::empty())]);
        assert_eq!(s.len(), 1);
        let s = set(&[(0, 2)], &[(&[1.0, 0.5], Provenance::empty()), (&[1.0, 0.5], Provenance::single(VarId(1), 0))]);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn sum_out_set_lifts() {
        let s = set(&[(0, 2), (1, 2)], &[
            (&[0.1, 0.2, 0.3, 0.4], Provenance::single(VarId(5), 0)),
            (&[0.4, 0.3, 0.2, 0.1], Provenance::single(VarId(5), 1)),
            (&[0.25, 0.25, 0.25, 0.25], Provenance::single(VarId(5), 2)),
        ]);
        let all = sum_out_set(&s, &[VarId(0), VarId(1)]).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.members().iter().all(|m| (m.potential.as_scalar().unwrap() - 1.0).abs() < 1e-15));
        assert_eq!(all.members()[1].provenance, Provenance::single(VarId(5), 1));
        assert_eq!(sum_out_set(&s, &[]).unwrap(), s);
        let one = set(&[(0, 2)], &[(&[0.5, 0.25], Provenance::empty())]);
        assert_eq!(sum_out_set(&one, &[VarId(0)]).unwrap().members()[0].potential.as_scalar(), Some(0.75));
        assert!(sum_out_set(&one, &[VarId(3)]).is_err());
    }
}
