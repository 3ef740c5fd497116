use std::collections::HashSet;

use crate::error::{Error, Result};

use super::{PotentialSet, Potential};

/// Signature entry for a zero value. Kept apart from `⌊log_α 1⌋ = 0` so that
/// a member with value 1 is never represented by one with value 0.
pub const ZERO_SIGNATURE: i64 = i64::MIN;

/// Quotients this close to an integer snap to it.
const SNAP: f64 = 1e-12;

pub type Signature = Vec<i64>;

/// `⌊log_α x⌋` for `x > 0`, snapping near-integer quotients so that values on
/// a bucket boundary land in the same bucket regardless of rounding.
pub fn floor_log(x: f64, alpha: f64) -> i64 {
    let q = x.ln() / alpha.ln();
    let r = q.round();
    if (q - r).abs() < SNAP {
        r as i64
    } else {
        q.floor() as i64
    }
}

fn signature(p: &Potential, alpha: f64) -> Signature {
    p.values().iter().map(|&v| if v > 0.0 { floor_log(v, alpha) } else { ZERO_SIGNATURE }).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoveringStats {
    pub alpha: f64,
    pub input_size: usize,
    pub output_size: usize,
    /// Number of assignments of the scope, `η`.
    pub assignments: usize,
    /// Smallest strictly positive entry over the input, `t`.
    pub min_positive: Option<f64>,
    pub max_entry: f64,
    pub has_zero: bool,
}

impl CoveringStats {
    /// `(1 - ⌊log_α t⌋)^η`, the size bound for inputs with entries in `(0, 1]`.
    pub fn bound(&self) -> Option<f64> {
        self.min_positive.map(|t| (1.0 - floor_log(t, self.alpha) as f64).powi(self.assignments as i32))
    }

    /// `(2 - ⌊log_α t⌋)^η`, the bound once zero entries get their own signature.
    pub fn bound_with_zero(&self) -> Option<f64> {
        self.min_positive.map(|t| (2.0 - floor_log(t, self.alpha) as f64).powi(self.assignments as i32))
    }

    /// Whether the input satisfies the hypotheses of [`Self::bound`].
    pub fn bound_applies(&self) -> bool {
        self.min_positive.is_some() && !self.has_zero && self.max_entry <= 1.0
    }
}

/// α-covering of `k`: keeps the first member of every distinct signature
/// `y -> ⌊log_α P(y)⌋`. Members sharing a signature are within a factor `α`
/// of each other pointwise, so every dropped member is covered by a kept one.
pub fn covering(k: &PotentialSet, alpha: f64) -> Result<(PotentialSet, CoveringStats)> {
    if alpha.is_nan() || alpha <= 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidAlpha(alpha));
    }
    let mut seen: HashSet<Signature> = HashSet::with_capacity(k.len());
    let mut kept = Vec::new();
    let mut min_positive: Option<f64> = None;
    let mut max_entry: f64 = 0.0;
    let mut has_zero = false;
    for m in k.members() {
        for &v in m.potential.values() {
            if v > 0.0 {
                min_positive = Some(min_positive.map_or(v, |t| t.min(v)));
            } else {
                has_zero = true;
            }
            max_entry = max_entry.max(v);
        }
        if seen.insert(signature(&m.potential, alpha)) {
            kept.push(m.clone());
        }
    }
    let stats = CoveringStats {
        alpha,
        input_size: k.len(),
        output_size: kept.len(),
        assignments: k.num_assignments(),
        min_positive,
        max_entry,
        has_zero,
    };
    Ok((PotentialSet::from_distinct(k.scope().to_vec(), k.cards().to_vec(), kept), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarId;
    use crate::potential::{Member, Provenance};
    use proptest::prelude::*;

    fn set_of(rows: &[Vec<f64>]) -> PotentialSet {
        let n = rows.first().map_or(1, Vec::len);
        PotentialSet::new(
            vec![VarId(0)],
            vec![n],
            rows.iter()
                .enumerate()
                .map(|(i, r)| Member {
                    potential: Potential::new(vec![VarId(0)], vec![n], r.clone()).unwrap(),
                    provenance: Provenance::single(VarId(1), i),
                })
                .collect(),
        )
        .unwrap()
    }

    fn is_covering(k: &PotentialSet, kk: &PotentialSet, alpha: f64) -> bool {
        k.members()
            .iter()
            .all(|p| kk.members().iter().any(|q| p.potential.dominated_by(&q.potential, alpha, 1e-12)))
    }

    #[test]
    fn keeps_first_of_each_bucket() {
        let k = set_of(&[vec![1.0, 0.5], vec![0.6, 0.3], vec![0.7, 0.35]]);
        let sigs: Vec<Signature> = k.members().iter().map(|m| signature(&m.potential, 2.0)).collect();
        assert_eq!(sigs, vec![vec![0, -1], vec![-1, -2], vec![-1, -2]]);
        let (kk, stats) = covering(&k, 2.0).unwrap();
        assert_eq!(kk.members(), &k.members()[..2]);
        assert!(is_covering(&k, &kk, 2.0));
        assert_eq!((stats.input_size, stats.output_size, stats.assignments), (3, 2, 2));
        assert_eq!(stats.min_positive, Some(0.3));
        // t = 0.3, ⌊log2 0.3⌋ = -2 -> (1 + 2)^2
        assert_eq!(stats.bound(), Some(9.0));
        assert!(stats.bound_applies());
    }

    #[test]
    fn singleton_survives() {
        let k = set_of(&[vec![0.2, 0.9]]);
        assert_eq!(covering(&k, 1.5).unwrap().0, k);
    }

    #[test]
    fn zero_is_its_own_bucket() {
        let k = set_of(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        for alpha in [1.01, 2.0, 1e6] {
            let (kk, stats) = covering(&k, alpha).unwrap();
            assert_eq!(kk.len(), 2);
            assert!(stats.has_zero && !stats.bound_applies());
        }
        // mapping a zero to bucket 0 would merge these and lose the covering
        let k = set_of(&[vec![0.0], vec![1.0]]);
        assert_eq!(covering(&k, 2.0).unwrap().0.len(), 2);
    }

    #[test]
    fn rejects_small_alpha() {
        let k = set_of(&[vec![0.5]]);
        assert_eq!(covering(&k, 1.0).unwrap_err(), Error::InvalidAlpha(1.0));
        assert!(covering(&k, 0.5).is_err());
        assert!(covering(&k, f64::NAN).is_err());
    }

    #[test]
    fn floor_log_snaps_at_boundaries() {
        assert_eq!(floor_log(1.0, 2.0), 0);
        assert_eq!(floor_log(0.5, 2.0), -1);
        assert_eq!(floor_log(0.25, 2.0), -2);
        assert_eq!(floor_log(0.26, 2.0), -2);
        let alpha: f64 = 1.05;
        assert_eq!(floor_log(alpha.powi(-7), alpha), -7);
        assert_eq!(floor_log(alpha.powi(13), alpha), 13);
    }

    #[test]
    fn size_is_not_monotone_in_alpha() {
        // the bucket grids of different alphas do not nest
        let k = set_of(&[vec![1.16], vec![1.17]]);
        let fine = 1.0 + 0.5 / 6.0;
        let coarse = 1.0 + 1.0 / 6.0;
        assert_eq!(covering(&k, fine).unwrap().0.len(), 1);
        assert_eq!(covering(&k, coarse).unwrap().0.len(), 2);
    }

    proptest! {
        #[test]
        fn covering_property_and_bound(
            rows in proptest::collection::vec(proptest::collection::vec(prop_oneof![Just(0.0), 1e-3f64..=1.0], 3), 1..200),
            alpha in 1.001f64..3.0,
        ) {
            let k = set_of(&rows);
            let (kk, stats) = covering(&k, alpha).unwrap();
            prop_assert!(is_covering(&k, &kk, alpha));
            prop_assert!(kk.members().iter().all(|m| k.members().contains(m)));
            prop_assert!(kk.len() as f64 <= stats.bound_with_zero().unwrap_or(1.0));
            if stats.bound_applies() {
                prop_assert!(kk.len() as f64 <= stats.bound().unwrap());
            }
        }
    }
}
