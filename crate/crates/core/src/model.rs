//! Core domain types: ideal lotteries, preference profiles, random matchings,
//! and the object classification they induce, together with the l1 metric,
//! same-sidedness, and the same-sided welfare identity.
//!
//! An instance is always square: n agents divide the chances of n objects.
//! Each agent reports an ideal lottery (their single most-preferred
//! distribution over objects); an outcome is a bistochastic matrix of chances.
//! An object whose column of ideals sums above 1 is in excess demand, below 1
//! in excess supply, exactly 1 unanimous. A matching is same-sided when every
//! agent sits weakly below their ideal on excess-demand objects, weakly above
//! on excess-supply objects, and exactly at it on unanimous objects; for
//! same-sided matchings the l1 distance to the ideal collapses to twice the
//! excess-demand deficit.

use std::collections::BTreeSet;
use std::fmt;

use num::{One, Signed};

use crate::error::{Error, Result};
use crate::rational::{format_rational, Rational};

/// An agent's single most-preferred distribution over objects.
///
/// Invariants: every share is nonnegative and the shares sum to exactly 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdealLottery {
    shares: Vec<Rational>,
}

impl IdealLottery {
    pub fn new(shares: Vec<Rational>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::EmptyInstance);
        }
        for (a, s) in shares.iter().enumerate() {
            if s.is_negative() {
                return Err(Error::NegativeShare {
                    who: format!("object {a}"),
                    value: format_rational(s),
                });
            }
        }
        let sum: Rational = shares.iter().sum();
        if !sum.is_one() {
            return Err(Error::BadSum {
                what: "lottery".into(),
                who: "agent".into(),
                sum: format_rational(&sum),
                expected: "1/1".into(),
            });
        }
        Ok(Self { shares })
    }

    /// Builds `parts/den` shares from integer grid coordinates.
    pub fn from_grid(parts: &[u64], den: u64) -> Result<Self> {
        let shares = parts
            .iter()
            .map(|&p| Rational::new((p as i64).into(), (den as i64).into()))
            .collect();
        Self::new(shares)
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn share(&self, object: usize) -> &Rational {
        &self.shares[object]
    }

    pub fn shares(&self) -> &[Rational] {
        &self.shares
    }
}

impl fmt::Display for IdealLottery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.shares.iter().map(format_rational).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// A preference profile: one ideal lottery per agent over the same objects.
///
/// Invariant: the instance is square, n agents and n objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    lotteries: Vec<IdealLottery>,
}

impl Profile {
    pub fn new(lotteries: Vec<IdealLottery>) -> Result<Self> {
        if lotteries.is_empty() {
            return Err(Error::EmptyInstance);
        }
        let n = lotteries.len();
        for l in &lotteries {
            if l.len() != n {
                return Err(Error::NotSquare {
                    agents: n,
                    objects: l.len(),
                });
            }
        }
        Ok(Self { lotteries })
    }

    /// Builds a profile from integer grid rows over a common denominator.
    pub fn from_grid(rows: &[&[u64]], den: u64) -> Result<Self> {
        let lotteries = rows
            .iter()
            .map(|r| IdealLottery::from_grid(r, den))
            .collect::<Result<Vec<_>>>()?;
        Self::new(lotteries)
    }

    pub fn n(&self) -> usize {
        self.lotteries.len()
    }

    pub fn lottery(&self, agent: usize) -> &IdealLottery {
        &self.lotteries[agent]
    }

    pub fn lotteries(&self) -> &[IdealLottery] {
        &self.lotteries
    }

    /// The column of ideals for one object, across agents.
    pub fn column(&self, object: usize) -> Vec<Rational> {
        self.lotteries
            .iter()
            .map(|l| l.share(object).clone())
            .collect()
    }

    /// A copy of the profile with agent `i`'s lottery replaced.
    pub fn with_lottery(&self, agent: usize, lottery: IdealLottery) -> Result<Self> {
        if lottery.len() != self.n() {
            return Err(Error::LengthMismatch {
                left: lottery.len(),
                right: self.n(),
            });
        }
        let mut lotteries = self.lotteries.clone();
        lotteries[agent] = lottery;
        Ok(Self { lotteries })
    }

    /// Relabels agents: agent `i`'s lottery moves to position `perm[i]`.
    pub fn permute_agents(&self, perm: &Permutation) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::LengthMismatch {
                left: perm.len(),
                right: self.n(),
            });
        }
        let mut lotteries = self.lotteries.clone();
        for (i, l) in self.lotteries.iter().enumerate() {
            lotteries[perm.image(i)] = l.clone();
        }
        Ok(Self { lotteries })
    }
}

/// A random matching: an n-by-n bistochastic matrix of chances.
/// Row i is agent i's allocation, column a is the division of object a.
///
/// Invariants: all entries nonnegative, every row and every column sums to
/// exactly 1 (agent and object feasibility).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomMatching {
    chances: Vec<Vec<Rational>>,
}

impl RandomMatching {
    pub fn new(chances: Vec<Vec<Rational>>) -> Result<Self> {
        if chances.is_empty() {
            return Err(Error::EmptyInstance);
        }
        let n = chances.len();
        for (i, row) in chances.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    agents: n,
                    objects: row.len(),
                });
            }
            for (a, v) in row.iter().enumerate() {
                if v.is_negative() {
                    return Err(Error::NotBistochastic {
                        detail: format!(
                            "entry ({i}, {a}) is negative: {}",
                            format_rational(v)
                        ),
                    });
                }
            }
            let sum: Rational = row.iter().sum();
            if !sum.is_one() {
                return Err(Error::NotBistochastic {
                    detail: format!("row {i} sums to {}", format_rational(&sum)),
                });
            }
        }
        for a in 0..n {
            let sum: Rational = chances.iter().map(|row| row[a].clone()).sum();
            if !sum.is_one() {
                return Err(Error::NotBistochastic {
                    detail: format!("column {a} sums to {}", format_rational(&sum)),
                });
            }
        }
        Ok(Self { chances })
    }

    /// Builds a matching from integer grid rows over a common denominator.
    pub fn from_grid(rows: &[&[u64]], den: u64) -> Result<Self> {
        let chances = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&p| Rational::new((p as i64).into(), (den as i64).into()))
                    .collect()
            })
            .collect();
        Self::new(chances)
    }

    pub fn n(&self) -> usize {
        self.chances.len()
    }

    pub fn entry(&self, agent: usize, object: usize) -> &Rational {
        &self.chances[agent][object]
    }

    pub fn row(&self, agent: usize) -> &[Rational] {
        &self.chances[agent]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.chances
    }

    pub fn column(&self, object: usize) -> Vec<Rational> {
        self.chances.iter().map(|row| row[object].clone()).collect()
    }
}

impl fmt::Display for RandomMatching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.chances {
            let parts: Vec<String> = row.iter().map(format_rational).collect();
            writeln!(f, "[{}]", parts.join(", "))?;
        }
        Ok(())
    }
}

/// Checks bistochasticity of a raw matrix without constructing a
/// [`RandomMatching`]: square, nonnegative, exact row and column sums of 1.
pub fn validate_matching(rows: &[Vec<Rational>]) -> bool {
    if rows.is_empty() {
        return false;
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return false;
    }
    if rows.iter().flatten().any(|v| v.is_negative()) {
        return false;
    }
    let one = Rational::one();
    for row in rows {
        if row.iter().sum::<Rational>() != one {
            return false;
        }
    }
    for a in 0..n {
        if rows.iter().map(|r| r[a].clone()).sum::<Rational>() != one {
            return false;
        }
    }
    true
}

/// Partition of the objects by the sign of their column sums of ideals:
/// excess demand (> 1), excess supply (< 1), unanimous (= 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectClassification {
    pub ed: BTreeSet<usize>,
    pub es: BTreeSet<usize>,
    pub un: BTreeSet<usize>,
}

impl ObjectClassification {
    pub fn kind(&self, object: usize) -> ObjectKind {
        if self.ed.contains(&object) {
            ObjectKind::ExcessDemand
        } else if self.es.contains(&object) {
            ObjectKind::ExcessSupply
        } else {
            ObjectKind::Unanimous
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    ExcessDemand,
    ExcessSupply,
    Unanimous,
}

/// Classifies every object by its exact column sum of ideals.
pub fn classify_objects(profile: &Profile) -> ObjectClassification {
    let n = profile.n();
    let one = Rational::one();
    let mut ed = BTreeSet::new();
    let mut es = BTreeSet::new();
    let mut un = BTreeSet::new();
    for a in 0..n {
        let sum: Rational = profile.lotteries().iter().map(|l| l.share(a)).sum();
        if sum > one {
            ed.insert(a);
        } else if sum < one {
            es.insert(a);
        } else {
            un.insert(a);
        }
    }
    ObjectClassification { ed, es, un }
}

/// The l1 distance between two share vectors of equal length.
pub fn l1_distance(p: &[Rational], q: &[Rational]) -> Result<Rational> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// True iff the matching lies weakly on the peak's side everywhere: at or
/// below the ideal on every excess-demand object, at or above on every
/// excess-supply object, exactly at it on every unanimous object.
pub fn is_same_sided(profile: &Profile, matching: &RandomMatching) -> bool {
    same_sided_violation(profile, matching).is_none()
}

/// First (agent, object) pair violating same-sidedness, if any.
pub fn same_sided_violation(
    profile: &Profile,
    matching: &RandomMatching,
) -> Option<(usize, usize)> {
    let n = profile.n();
    if matching.n() != n {
        return Some((0, 0));
    }
    let class = classify_objects(profile);
    for a in 0..n {
        let kind = class.kind(a);
        for i in 0..n {
            let ideal = profile.lottery(i).share(a);
            let got = matching.entry(i, a);
            let bad = match kind {
                ObjectKind::ExcessDemand => got > ideal,
                ObjectKind::ExcessSupply => got < ideal,
                ObjectKind::Unanimous => got != ideal,
            };
            if bad {
                return Some((i, a));
            }
        }
    }
    None
}

/// Welfare of agent `i` under a same-sided matching, computed as twice the
/// excess-demand deficit. Equals the l1 distance to the agent's ideal; the
/// identity holds only for same-sided matchings, so other inputs are
/// rejected.
pub fn sameside_welfare(
    profile: &Profile,
    matching: &RandomMatching,
    agent: usize,
) -> Result<Rational> {
    if let Some((i, a)) = same_sided_violation(profile, matching) {
        return Err(Error::NotSameSided {
            detail: format!("agent {i}, object {a}"),
        });
    }
    let class = classify_objects(profile);
    let two = Rational::from_integer(2.into());
    let deficit: Rational = class
        .ed
        .iter()
        .map(|&a| profile.lottery(agent).share(a) - matching.entry(agent, a))
        .sum();
    Ok(two * deficit)
}

/// Per-agent l1 distances from each agent's ideal to their allocation row.
pub fn distance_vector(profile: &Profile, matching: &RandomMatching) -> Result<Vec<Rational>> {
    (0..profile.n())
        .map(|i| l1_distance(profile.lottery(i).shares(), matching.row(i)))
        .collect()
}

/// True iff `l` lies coordinate-wise in the closed box spanned by `a` and
/// `b`: each `l[x]` is between `a[x]` and `b[x]` in either order.
pub fn is_between(l: &[Rational], a: &[Rational], b: &[Rational]) -> bool {
    l.len() == a.len()
        && l.len() == b.len()
        && l.iter().zip(a).zip(b).all(|((l, a), b)| {
            if a <= b {
                a <= l && l <= b
            } else {
                b <= l && l <= a
            }
        })
}

/// A bijection on agent indices; `image(i)` is where agent `i` is sent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        if n == 0 {
            return Err(Error::EmptyInstance);
        }
        let mut seen = vec![false; n];
        for &v in &mapping {
            if v >= n || seen[v] {
                return Err(Error::BadSequence {
                    n,
                    detail: format!("{mapping:?}"),
                });
            }
            seen[v] = true;
        }
        Ok(Self { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mapping: (0..n).collect(),
        }
    }

    /// Swaps two agents, fixing everyone else.
    pub fn transposition(n: usize, i: usize, j: usize) -> Result<Self> {
        let mut mapping: Vec<usize> = (0..n).collect();
        if i >= n || j >= n {
            return Err(Error::BadSequence {
                n,
                detail: format!("transposition ({i}, {j})"),
            });
        }
        mapping.swap(i, j);
        Ok(Self { mapping })
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn image(&self, i: usize) -> usize {
        self.mapping[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.mapping
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    pub(crate) fn example1() -> Profile {
        Profile::from_grid(&[&[6, 2, 2], &[5, 4, 1], &[2, 0, 8]], 10).unwrap()
    }

    fn example1_urc() -> RandomMatching {
        RandomMatching::from_grid(&[&[4, 4, 2], &[4, 5, 1], &[2, 1, 7]], 10).unwrap()
    }

    #[test]
    fn l1_matches_printed_values() {
        // d(c_2, p_2) = d(c_2, p'_2) = 1/5 in the non-bossiness example.
        let c2 = IdealLottery::from_grid(&[7, 2, 1], 10).unwrap();
        let p2 = [rat(6, 10), rat(2, 10), rat(2, 10)];
        assert_eq!(l1_distance(c2.shares(), &p2).unwrap(), rat(1, 5));

        let e1 = IdealLottery::new(vec![rat(2, 3), rat(1, 3), rat(0, 1)]).unwrap();
        let third = [rat(1, 3), rat(1, 3), rat(1, 3)];
        assert_eq!(l1_distance(e1.shares(), &third).unwrap(), rat(2, 3));

        assert_eq!(l1_distance(&third, &third).unwrap(), rat(0, 1));
    }

    #[test]
    fn l1_rejects_length_mismatch() {
        assert!(matches!(
            l1_distance(&[rat(1, 1)], &[rat(1, 2), rat(1, 2)]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn classification_of_example1() {
        let class = classify_objects(&example1());
        assert_eq!(class.ed, BTreeSet::from([0, 2]));
        assert_eq!(class.es, BTreeSet::from([1]));
        assert!(class.un.is_empty());
    }

    #[test]
    fn classification_uniform_profile_is_unanimous() {
        let p = Profile::new(vec![
            IdealLottery::new(vec![rat(1, 3), rat(1, 3), rat(1, 3)]).unwrap();
            3
        ])
        .unwrap();
        let class = classify_objects(&p);
        assert_eq!(class.un, BTreeSet::from([0, 1, 2]));
        assert!(class.ed.is_empty() && class.es.is_empty());
    }

    #[test]
    fn classification_of_symmetric_profile() {
        let p = Profile::from_grid(&[&[4, 4, 2], &[4, 4, 2], &[4, 4, 2]], 10).unwrap();
        let class = classify_objects(&p);
        assert_eq!(class.ed, BTreeSet::from([0, 1]));
        assert_eq!(class.es, BTreeSet::from([2]));
    }

    #[test]
    fn same_sidedness_of_example1() {
        let c = example1();
        assert!(is_same_sided(&c, &example1_urc()));

        // Equal division puts 1/3 > 1/5 on excess-demand object a for agent 3.
        let third = RandomMatching::new(vec![vec![rat(1, 3); 3]; 3]).unwrap();
        assert!(!is_same_sided(&c, &third));
    }

    #[test]
    fn unanimous_profile_forces_equality() {
        let p = Profile::from_grid(&[&[10, 0, 0], &[0, 10, 0], &[0, 0, 10]], 10).unwrap();
        let not_peaks =
            RandomMatching::from_grid(&[&[0, 10, 0], &[10, 0, 0], &[0, 0, 10]], 10).unwrap();
        assert!(!is_same_sided(&p, &not_peaks));
        let peaks = RandomMatching::from_grid(&[&[10, 0, 0], &[0, 10, 0], &[0, 0, 10]], 10).unwrap();
        assert!(is_same_sided(&p, &peaks));
    }

    #[test]
    fn welfare_formula_on_example1() {
        let c = example1();
        let p = example1_urc();
        // Agent 1: 2 * ((0.6 - 0.4) + (0.2 - 0.2)) = 2/5.
        assert_eq!(sameside_welfare(&c, &p, 0).unwrap(), rat(2, 5));
        for i in 0..3 {
            assert_eq!(
                sameside_welfare(&c, &p, i).unwrap(),
                l1_distance(c.lottery(i).shares(), p.row(i)).unwrap()
            );
        }
    }

    #[test]
    fn welfare_zero_at_peak() {
        let p = Profile::from_grid(&[&[4, 4, 2], &[4, 4, 2], &[4, 4, 2]], 10).unwrap();
        let m = RandomMatching::from_grid(
            &[&[4, 4, 2], &[4, 4, 2], &[2, 2, 6]],
            10,
        )
        .unwrap();
        assert!(is_same_sided(&p, &m));
        assert_eq!(sameside_welfare(&p, &m, 0).unwrap(), rat(0, 1));
    }

    #[test]
    fn welfare_rejects_non_same_sided() {
        let c = example1();
        let third = RandomMatching::new(vec![vec![rat(1, 3); 3]; 3]).unwrap();
        assert!(matches!(
            sameside_welfare(&c, &third, 0),
            Err(Error::NotSameSided { .. })
        ));
    }

    #[test]
    fn validate_matching_cases() {
        let id = vec![
            vec![rat(1, 1), rat(0, 1)],
            vec![rat(0, 1), rat(1, 1)],
        ];
        assert!(validate_matching(&id));
        assert!(validate_matching(example1_urc().rows()));
        let short_row = vec![
            vec![rat(9, 10), rat(0, 1)],
            vec![rat(1, 10), rat(1, 1)],
        ];
        assert!(!validate_matching(&short_row));
    }

    #[test]
    fn lottery_invariants_enforced() {
        assert!(IdealLottery::new(vec![rat(1, 2), rat(1, 4)]).is_err());
        assert!(IdealLottery::new(vec![rat(3, 2), rat(-1, 2)]).is_err());
        assert!(RandomMatching::new(vec![
            vec![rat(1, 2), rat(1, 2)],
            vec![rat(1, 2), rat(1, 4)],
        ])
        .is_err());
        assert!(Profile::new(vec![
            IdealLottery::new(vec![rat(1, 2), rat(1, 2)]).unwrap(),
        ])
        .is_err());
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![1, 0, 2]).is_ok());
        assert!(Permutation::new(vec![1, 1, 2]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
    }

    mod properties {
        use super::*;
        use crate::mechanisms::{urc, Sequence};
        use crate::profiles::{random_profile, random_profile_rng, stream_rng};
        use num::Zero;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn l1_is_a_metric_on_the_simplex(
                n in 1usize..5,
                den in 1u64..11,
                s1 in 0u64..300,
                s2 in 0u64..300,
                s3 in 0u64..300,
            ) {
                let p = random_profile(n, den, s1).lottery(0).shares().to_vec();
                let q = random_profile(n, den, s2).lottery(0).shares().to_vec();
                let r = random_profile(n, den, s3).lottery(0).shares().to_vec();
                let dpq = l1_distance(&p, &q).unwrap();
                prop_assert!(!dpq.is_negative());
                prop_assert_eq!(dpq.clone(), l1_distance(&q, &p).unwrap());
                prop_assert_eq!(dpq.is_zero(), p == q);
                let dpr = l1_distance(&p, &r).unwrap();
                let drq = l1_distance(&r, &q).unwrap();
                prop_assert!(dpq <= dpr + drq);
            }

            #[test]
            fn classification_partitions_the_objects(n in 1usize..6, den in 1u64..13, seed in 0u64..300) {
                let profile = random_profile(n, den, seed);
                let class = classify_objects(&profile);
                let mut seen = vec![0u8; n];
                for &a in class.ed.iter().chain(&class.es).chain(&class.un) {
                    seen[a] += 1;
                }
                prop_assert!(seen.iter().all(|&c| c == 1));
            }

            #[test]
            fn same_sided_welfare_equals_the_distance(n in 2usize..5, den in 1u64..11, seed in 0u64..300) {
                let mut rng = stream_rng(seed, 0x57, 0);
                let profile = random_profile_rng(n, den, &mut rng);
                let matching =
                    urc(&profile, &Sequence::identity(n), &Sequence::identity(n)).unwrap();
                for i in 0..n {
                    let direct =
                        l1_distance(profile.lottery(i).shares(), matching.row(i)).unwrap();
                    prop_assert_eq!(sameside_welfare(&profile, &matching, i).unwrap(), direct);
                }
            }
        }
    }
}
