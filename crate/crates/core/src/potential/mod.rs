//! Nonnegative tables over discrete variables and sets of them.
//!
//! A potential's scope is sorted by variable id and its table is indexed
//! mixed-radix with the first scope variable fastest.

mod covering;
mod set;

use crate::error::{Error, Result};
use crate::model::VarId;

pub use covering::{covering, floor_log, CoveringStats, Signature, ZERO_SIGNATURE};
pub use set::{combine_sets, sum_out_set, Member, PotentialSet, Provenance};

#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Potential {
    /// `scope` must be strictly increasing and `values` as long as the
    /// product of `cards`, with every entry finite and nonnegative.
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::InvalidPotential("scope and cardinalities differ in length".into()));
        }
        if scope.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPotential("scope must be strictly increasing".into()));
        }
        let size: usize = cards.iter().product();
        if values.len() != size {
            return Err(Error::InvalidPotential(format!("{} entries for {} assignments", values.len(), size)));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidPotential(format!("entry {v} is not finite and nonnegative")));
        }
        Ok(Potential { scope, cards, values })
    }

    /// Builds a potential from a table whose variables are listed in
    /// `order` (first fastest), permuting it into canonical scope order.
    pub fn from_table(order: &[VarId], cards: &[usize], table: &[f64]) -> Result<Self> {
        let mut perm: Vec<usize> = (0..order.len()).collect();
        perm.sort_by_key(|&k| order[k]);
        let scope: Vec<VarId> = perm.iter().map(|&k| order[k]).collect();
        let out_cards: Vec<usize> = perm.iter().map(|&k| cards[k]).collect();
        let size: usize = cards.iter().product();
        if table.len() != size {
            return Err(Error::InvalidPotential(format!("{} entries for {} assignments", table.len(), size)));
        }
        // stride of each listed variable inside the canonical layout
        let mut canon_stride = vec![0; order.len()];
        let mut acc = 1;
        for &k in &perm {
            canon_stride[k] = acc;
            acc *= cards[k];
        }
        let mut values = vec![0.0; size];
        let mut digits = vec![0usize; order.len()];
        let mut target = 0usize;
        for &v in table {
            values[target] = v;
            for k in 0..digits.len() {
                digits[k] += 1;
                target += canon_stride[k];
                if digits[k] < cards[k] {
                    break;
                }
                target -= canon_stride[k] * cards[k];
                digits[k] = 0;
            }
        }
        Potential::new(scope, out_cards, values)
    }

    pub fn scalar(value: f64) -> Self {
        Potential { scope: Vec::new(), cards: Vec::new(), values: vec![value] }
    }

    /// The all-ones potential `1(X)`.
    pub fn unit(scope: &[(VarId, usize)]) -> Self {
        let mut s = scope.to_vec();
        s.sort_by_key(|&(v, _)| v);
        s.dedup_by_key(|&mut (v, _)| v);
        let size = s.iter().map(|&(_, c)| c).product();
        Potential { scope: s.iter().map(|&(v, _)| v).collect(), cards: s.iter().map(|&(_, c)| c).collect(), values: vec![1.0; size] }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The single entry of a potential with empty scope.
    pub fn as_scalar(&self) -> Option<f64> {
        self.scope.is_empty().then(|| self.values[0])
    }

    pub fn cardinality_of(&self, v: VarId) -> Option<usize> {
        self.scope.binary_search(&v).ok().map(|k| self.cards[k])
    }

    /// Entry at the assignment given in scope order.
    pub fn get(&self, assignment: &[usize]) -> f64 {
        let mut idx = 0;
        let mut stride = 1;
        for (a, c) in assignment.iter().zip(&self.cards) {
            idx += a * stride;
            stride *= c;
        }
        self.values[idx]
    }

    /// Pointwise product over the union of the scopes.
    pub fn multiply(&self, other: &Potential) -> Result<Potential> {
        let (scope, cards) = union_scope(&self.scope, &self.cards, &other.scope, &other.cards)?;
        let sa = strides_within(&scope, &self.scope, &self.cards);
        let sb = strides_within(&scope, &other.scope, &other.cards);
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut digits = vec![0usize; scope.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            for k in 0..digits.len() {
                digits[k] += 1;
                ia += sa[k];
                ib += sb[k];
                if digits[k] < cards[k] {
                    break;
                }
                ia -= sa[k] * cards[k];
                ib -= sb[k] * cards[k];
                digits[k] = 0;
            }
        }
        Ok(Potential { scope, cards, values })
    }

    /// Sums out the variables in `vars`, which must all be in the scope.
    pub fn sum_out(&self, vars: &[VarId]) -> Result<Potential> {
        let missing: Vec<VarId> = vars.iter().copied().filter(|v| self.scope.binary_search(v).is_err()).collect();
        if !missing.is_empty() {
            return Err(Error::NotInScope(missing));
        }
        let keep: Vec<usize> = (0..self.scope.len()).filter(|&k| !vars.contains(&self.scope[k])).collect();
        let scope: Vec<VarId> = keep.iter().map(|&k| self.scope[k]).collect();
        let cards: Vec<usize> = keep.iter().map(|&k| self.cards[k]).collect();
        let strides = strides_within(&self.scope, &scope, &cards);
        let mut values = vec![0.0; cards.iter().product()];
        let mut digits = vec![0usize; self.scope.len()];
        let mut target = 0usize;
        for &v in &self.values {
            values[target] += v;
            for k in 0..digits.len() {
                digits[k] += 1;
                target += strides[k];
                if digits[k] < self.cards[k] {
                    break;
                }
                target -= strides[k] * self.cards[k];
                digits[k] = 0;
            }
        }
        Ok(Potential { scope, cards, values })
    }

    /// Smallest strictly positive entry.
    pub fn min_positive(&self) -> Option<f64> {
        self.values.iter().copied().filter(|&v| v > 0.0).min_by(f64::total_cmp)
    }

    /// `self <= factor * other` pointwise, up to a relative slack.
    pub fn dominated_by(&self, other: &Potential, factor: f64, slack: f64) -> bool {
        self.scope == other.scope
            && self.values.iter().zip(&other.values).all(|(&p, &q)| p <= factor * q * (1.0 + slack))
    }
}

/// Sorted union of two scopes, checking shared cardinalities.
pub(crate) fn union_scope(
    a: &[VarId],
    ca: &[usize],
    b: &[VarId],
    cb: &[usize],
) -> Result<(Vec<VarId>, Vec<usize>)> {
    let (mut i, mut j) = (0, 0);
    let mut scope = Vec::with_capacity(a.len() + b.len());
    let mut cards = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            scope.push(a[i]);
            cards.push(ca[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            scope.push(b[j]);
            cards.push(cb[j]);
            j += 1;
        } else {
            if ca[i] != cb[j] {
                return Err(Error::CardinalityMismatch { var: a[i], left: ca[i], right: cb[j] });
            }
            scope.push(a[i]);
            cards.push(ca[i]);
            i += 1;
            j += 1;
        }
    }
    Ok((scope, cards))
}

/// For each variable of `outer`, its stride in a table over `inner`
/// (0 when absent). `inner` must be a subset of `outer`.
pub(crate) fn strides_within(outer: &[VarId], inner: &[VarId], inner_cards: &[usize]) -> Vec<usize> {
    let mut inner_strides = Vec::with_capacity(inner.len());
    let mut acc = 1;
    for &c in inner_cards {
        inner_strides.push(acc);
        acc *= c;
    }
    outer
        .iter()
        .map(|v| inner.binary_search(v).map(|k| inner_strides[k]).unwrap_or(0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pot(vars: &[(usize, usize)], values: &[f64]) -> Potential {
        Potential::new(
            vars.iter().map(|&(v, _)| VarId(v)).collect(),
            vars.iter().map(|&(_, c)| c).collect(),
            values.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn unit_potentials() {
        assert_eq!(Potential::unit(&[(VarId(0), 2)]).values(), &[1.0, 1.0]);
        assert_eq!(Potential::unit(&[]).as_scalar(), Some(1.0));
        let u = Potential::unit(&[(VarId(1), 3), (VarId(0), 2)]);
        assert_eq!(u.values(), &[1.0; 6]);
        assert_eq!(u.scope(), &[VarId(0), VarId(1)]);
    }

    #[test]
    fn multiply_examples() {
        let p = pot(&[(0, 2), (1, 2)], &[0.2, 0.3, 0.1, 0.4]);
        let unit = Potential::unit(&[(VarId(0), 2), (VarId(1), 2)]);
        assert_eq!(p.multiply(&unit).unwrap(), p);
        assert_eq!(Potential::scalar(2.0).multiply(&Potential::scalar(3.0)).unwrap().as_scalar(), Some(6.0));
        let a = pot(&[(0, 2)], &[0.4, 0.6]);
        let b = pot(&[(0, 2)], &[0.5, 0.5]);
        assert_eq!(a.multiply(&b).unwrap().values(), &[0.2, 0.3]);
    }

    #[test]
    fn multiply_broadcasts() {
        let a = pot(&[(0, 2)], &[1.0, 2.0]);
        let b = pot(&[(1, 3)], &[10.0, 20.0, 30.0]);
        let ab = a.multiply(&b).unwrap();
        assert_eq!(ab.scope(), &[VarId(0), VarId(1)]);
        assert_eq!(ab.values(), &[10.0, 20.0, 20.0, 40.0, 30.0, 60.0]);
        assert_eq!(ab.get(&[1, 2]), 60.0);
    }

    #[test]
    fn multiply_rejects_cardinality_clash() {
        let a = pot(&[(0, 2)], &[1.0, 2.0]);
        let b = pot(&[(0, 3)], &[1.0, 2.0, 3.0]);
        assert!(matches!(a.multiply(&b), Err(Error::CardinalityMismatch { .. })));
    }

    #[test]
    fn sum_out_examples() {
        let p = pot(&[(0, 2), (1, 2)], &[0.2, 0.3, 0.1, 0.4]);
        let m = p.sum_out(&[VarId(1)]).unwrap();
        assert!((m.values()[0] - 0.3).abs() < 1e-15 && (m.values()[1] - 0.7).abs() < 1e-15);
        let m = p.sum_out(&[VarId(0)]).unwrap();
        assert!((m.values()[0] - 0.5).abs() < 1e-15 && (m.values()[1] - 0.5).abs() < 1e-15);
        assert_eq!(p.sum_out(&[]).unwrap(), p);
        // a CPT P(A|B) summed over both variables gives |B|
        let cpt = pot(&[(0, 2), (1, 2)], &[0.9, 0.1, 0.3, 0.7]);
        assert!((cpt.sum_out(&[VarId(0)]).unwrap().values().iter().all(|&v| (v - 1.0).abs() < 1e-15)));
        assert_eq!(p.sum_out(&[VarId(5)]), Err(Error::NotInScope(vec![VarId(5)])));
    }

    #[test]
    fn from_table_permutes() {
        // listed as (B, A) with B fastest
        let t = Potential::from_table(&[VarId(1), VarId(0)], &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.scope(), &[VarId(0), VarId(1)]);
        for a in 0..3 {
            for b in 0..2 {
                assert_eq!(t.get(&[a, b]), (1 + b + 2 * a) as f64);
            }
        }
    }

    #[test]
    fn rejects_negative_entries() {
        assert!(Potential::new(vec![VarId(0)], vec![2], vec![1.0, -0.5]).is_err());
        assert!(Potential::new(vec![VarId(1), VarId(0)], vec![1, 1], vec![1.0]).is_err());
    }

    fn arb_potential(vars: Vec<(usize, usize)>) -> impl Strategy<Value = Potential> {
        let size: usize = vars.iter().map(|&(_, c)| c).product();
        proptest::collection::vec(0.0f64..2.0, size).prop_map(move |vals| pot(&vars, &vals))
    }

    proptest! {
        #[test]
        fn multiplication_commutes(p in arb_potential(vec![(0, 2), (2, 3)]), q in arb_potential(vec![(1, 2), (2, 3)])) {
            let pq = p.multiply(&q).unwrap();
            let qp = q.multiply(&p).unwrap();
            prop_assert_eq!(pq, qp);
        }

        #[test]
        fn sum_out_distributes(p in arb_potential(vec![(0, 2), (1, 3)]), q in arb_potential(vec![(1, 3), (2, 2), (3, 2)])) {
            let z = [VarId(2), VarId(3)];
            let lhs = p.multiply(&q).unwrap().sum_out(&z).unwrap();
            let rhs = p.multiply(&q.sum_out(&z).unwrap()).unwrap();
            prop_assert_eq!(lhs.scope(), rhs.scope());
            for (a, b) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn multiplication_associates(
            p in arb_potential(vec![(0, 2)]),
            q in arb_potential(vec![(0, 2), (1, 2)]),
            r in arb_potential(vec![(1, 2), (2, 3)]),
        ) {
            let left = p.multiply(&q).unwrap().multiply(&r).unwrap();
            let right = p.multiply(&q.multiply(&r).unwrap()).unwrap();
            for (a, b) in left.values().iter().zip(right.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
