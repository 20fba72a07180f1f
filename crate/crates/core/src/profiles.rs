//! Seeded generation of profiles, matchings, deviations, and sequences on the
//! rational grid with denominator `D`.
//!
//! Everything here is deterministic given its seed, and every generated value
//! satisfies the domain invariants by construction (and is re-validated by
//! the constructors it goes through). Grid restriction keeps misreport
//! enumeration finite and witnesses human-readable.

use std::collections::BTreeSet;

use num::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mechanisms::Sequence;
use crate::model::{classify_objects, is_between, IdealLottery, Profile, RandomMatching};
use crate::rational::{rat, Rational};

/// RNG for one generation stream, mixed from a campaign seed, a stream tag,
/// and a sample index so that samples can be evaluated in any order.
pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(seed ^ stream.wrapping_mul(0x9e37)) ^ index))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// All compositions of `total` into `parts` nonnegative ordered summands.
pub fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(parts);
    fn recurse(total: u64, parts: usize, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts == 1 {
            current.push(total);
            out.push(current.clone());
            current.pop();
            return;
        }
        for first in 0..=total {
            current.push(first);
            recurse(total - first, parts - 1, current, out);
            current.pop();
        }
    }
    if parts > 0 {
        recurse(total, parts, &mut current, &mut out);
    }
    out
}

/// Number of compositions of `total` into `parts` summands, saturating.
pub fn composition_count(total: u64, parts: usize) -> u64 {
    // C(total + parts - 1, parts - 1)
    if parts == 0 {
        return 0;
    }
    let mut result: u128 = 1;
    let k = (parts - 1) as u128;
    let n = total as u128 + k;
    for i in 1..=k {
        result = result.saturating_mul(n - k + i) / i;
        if result > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    result as u64
}

/// Compositions of `total` into `caps.len()` summands with per-slot caps.
pub fn bounded_compositions(total: u64, caps: &[u64]) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(caps.len());
    fn recurse(total: u64, caps: &[u64], current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if caps.len() == 1 {
            if total <= caps[0] {
                current.push(total);
                out.push(current.clone());
                current.pop();
            }
            return;
        }
        let tail: u64 = caps[1..].iter().sum();
        let lo = total.saturating_sub(tail);
        let hi = caps[0].min(total);
        for first in lo..=hi {
            current.push(first);
            recurse(total - first, &caps[1..], current, out);
            current.pop();
        }
    }
    if !caps.is_empty() {
        recurse(total, caps, &mut current, &mut out);
    }
    out
}

/// One uniformly random composition of `total` into `parts` summands, via a
/// uniform bar placement among `total + parts - 1` slots.
pub fn random_composition<R: Rng>(total: u64, parts: usize, rng: &mut R) -> Vec<u64> {
    assert!(parts > 0);
    if parts == 1 {
        return vec![total];
    }
    let slots = total + parts as u64 - 1;
    let bars = sample_distinct(slots, parts - 1, rng);
    let mut parts_out = Vec::with_capacity(parts);
    let mut prev: i64 = -1;
    for &b in &bars {
        parts_out.push((b as i64 - prev - 1) as u64);
        prev = b as i64;
    }
    parts_out.push((slots as i64 - 1 - prev) as u64);
    parts_out
}

/// Floyd's algorithm: `k` distinct values from `0..m`, sorted.
fn sample_distinct<R: Rng>(m: u64, k: usize, rng: &mut R) -> Vec<u64> {
    let mut chosen = BTreeSet::new();
    for j in (m - k as u64)..m {
        let t = rng.gen_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

/// One profile with every lottery drawn uniformly from the compositions of
/// `den` into `n` parts. Deterministic given the seed.
pub fn random_profile(n: usize, den: u64, seed: u64) -> Profile {
    random_profile_rng(n, den, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_profile_rng<R: Rng>(n: usize, den: u64, rng: &mut R) -> Profile {
    assert!(n > 0 && den > 0);
    let lotteries = (0..n)
        .map(|_| {
            let parts = random_composition(den, n, rng);
            IdealLottery::from_grid(&parts, den).expect("grid compositions sum to one")
        })
        .collect();
    Profile::new(lotteries).expect("square by construction")
}

/// One uniformly random ideal lottery on the grid.
pub fn random_lottery_rng<R: Rng>(n: usize, den: u64, rng: &mut R) -> IdealLottery {
    IdealLottery::from_grid(&random_composition(den, n, rng), den)
        .expect("grid compositions sum to one")
}

/// A random bistochastic matrix on the grid: rows drawn uniformly among the
/// completions that respect the remaining column capacities, last row forced.
pub fn random_grid_matching_rng<R: Rng>(n: usize, den: u64, rng: &mut R) -> RandomMatching {
    let mut caps = vec![den; n];
    let mut rows: Vec<Vec<u64>> = Vec::with_capacity(n);
    for i in 0..n {
        if i + 1 == n {
            rows.push(caps.clone());
            break;
        }
        let options = bounded_compositions(den, &caps);
        let row = options[rng.gen_range(0..options.len())].clone();
        for (c, r) in caps.iter_mut().zip(&row) {
            *c -= r;
        }
        rows.push(row);
    }
    let refs: Vec<&[u64]> = rows.iter().map(|r| r.as_slice()).collect();
    RandomMatching::from_grid(&refs, den).expect("capacity bookkeeping keeps the matrix bistochastic")
}

/// A uniformly random visiting order.
pub fn random_sequence_rng<R: Rng>(n: usize, rng: &mut R) -> Sequence {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    Sequence::new(order).expect("shuffle of 0..n is a permutation")
}

/// A uniformly random permutation of agents.
pub fn random_permutation_rng<R: Rng>(n: usize, rng: &mut R) -> crate::model::Permutation {
    crate::model::Permutation::new(random_sequence_rng(n, rng).as_slice().to_vec())
        .expect("shuffle of 0..n is a permutation")
}

/// A lottery inside the box spanned by an ideal and an allocation row,
/// summing to 1: built by moving mass from coordinates where the allocation
/// sits above the ideal toward coordinates where it sits below. Occasionally
/// returns an endpoint exactly, which exercises the knife edges. Membership
/// is re-validated before returning; when no interior move is possible the
/// ideal itself is returned.
pub fn between_sample(ideal: &IdealLottery, row: &[Rational], seed: u64) -> IdealLottery {
    between_sample_rng(ideal, row, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn between_sample_rng<R: Rng>(
    ideal: &IdealLottery,
    row: &[Rational],
    rng: &mut R,
) -> IdealLottery {
    let n = ideal.len();
    assert_eq!(n, row.len());
    match rng.gen_range(0..8u32) {
        0 => return ideal.clone(),
        1 => {
            if let Ok(l) = IdealLottery::new(row.to_vec()) {
                return l;
            }
        }
        _ => {}
    }
    let lo: Vec<Rational> = (0..n)
        .map(|a| ideal.share(a).min(&row[a]).clone())
        .collect();
    let hi: Vec<Rational> = (0..n)
        .map(|a| ideal.share(a).max(&row[a]).clone())
        .collect();
    let mut l: Vec<Rational> = ideal.shares().to_vec();
    let fractions = [rat(1, 4), rat(1, 2), rat(3, 4), rat(1, 1)];
    for _ in 0..2 * n {
        let down: Vec<usize> = (0..n).filter(|&a| l[a] > lo[a]).collect();
        let up: Vec<usize> = (0..n).filter(|&a| l[a] < hi[a]).collect();
        if down.is_empty() || up.is_empty() {
            break;
        }
        let from = down[rng.gen_range(0..down.len())];
        let to = up[rng.gen_range(0..up.len())];
        if from == to {
            continue;
        }
        let room_down = &l[from] - &lo[from];
        let room_up = &hi[to] - &l[to];
        let max_move = room_down.min(room_up);
        let delta = max_move * &fractions[rng.gen_range(0..fractions.len())];
        l[from] -= &delta;
        l[to] += &delta;
    }
    if !is_between(&l, ideal.shares(), row) {
        return ideal.clone();
    }
    match IdealLottery::new(l) {
        Ok(l) => l,
        Err(_) => ideal.clone(),
    }
}

/// A deviation for agent `i` satisfying the replacement-monotonicity
/// premises: ideals weakly lowered on every excess-demand object, the freed
/// mass moved onto excess-supply objects, and the excess-demand set verified
/// unchanged. Returns the agent's own lottery when there is nothing to move,
/// and `None` only if the verification fails.
pub fn rm_perturbation(profile: &Profile, agent: usize, seed: u64) -> Option<IdealLottery> {
    rm_perturbation_rng(profile, agent, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn rm_perturbation_rng<R: Rng>(
    profile: &Profile,
    agent: usize,
    rng: &mut R,
) -> Option<IdealLottery> {
    let class = classify_objects(profile);
    if class.ed.is_empty() {
        return Some(profile.lottery(agent).clone());
    }
    let one = Rational::one();
    let mut shares: Vec<Rational> = profile.lottery(agent).shares().to_vec();
    // Strictly below 1 keeps every lowered column in excess demand.
    let fractions = [rat(0, 1), rat(1, 4), rat(1, 2), rat(3, 4)];
    let mut freed = Rational::zero();
    for &a in &class.ed {
        let col_sum: Rational = profile.column(a).iter().sum();
        let slack = &col_sum - &one;
        let cap = shares[a].clone().min(slack);
        let f = &fractions[rng.gen_range(0..fractions.len())];
        let delta = cap * f;
        shares[a] -= &delta;
        freed += delta;
    }
    if !freed.is_zero() {
        let mut es: Vec<usize> = class.es.iter().copied().collect();
        for i in (1..es.len()).rev() {
            es.swap(i, rng.gen_range(0..=i));
        }
        for a in es {
            if freed.is_zero() {
                break;
            }
            let col_sum: Rational = profile.column(a).iter().sum();
            let headroom = &one - &col_sum;
            let add = headroom.min(freed.clone());
            shares[a] += &add;
            freed -= add;
        }
        if !freed.is_zero() {
            return None;
        }
    }
    let lottery = IdealLottery::new(shares).ok()?;
    let deviated = profile.with_lottery(agent, lottery.clone()).ok()?;
    let new_class = classify_objects(&deviated);
    let lowered_ok = class
        .ed
        .iter()
        .all(|&a| lottery.share(a) <= profile.lottery(agent).share(a));
    if new_class.ed == class.ed && lowered_ok {
        Some(lottery)
    } else {
        None
    }
}

/// A deviation that pins agent `i`'s ideals on every excess-demand object and
/// reshuffles only the rest of the mass. Useful for driving the non-vacuous
/// branch of the non-bossiness check.
pub fn nb_perturbation_rng<R: Rng>(
    profile: &Profile,
    agent: usize,
    den: u64,
    rng: &mut R,
) -> Option<IdealLottery> {
    let n = profile.n();
    let class = classify_objects(profile);
    let free: Vec<usize> = (0..n).filter(|a| !class.ed.contains(a)).collect();
    if free.is_empty() {
        return Some(profile.lottery(agent).clone());
    }
    let loose: Rational = free
        .iter()
        .map(|&a| profile.lottery(agent).share(a))
        .sum();
    // Redistribute the non-excess-demand mass at grid resolution.
    let steps = (loose.clone() * rat(den as i64, 1)).to_integer();
    let steps: u64 = match steps.try_into() {
        Ok(v) => v,
        Err(_) => return None,
    };
    if loose != rat(steps as i64, den as i64) {
        return None; // the loose mass is off-grid, keep the profile as is
    }
    let parts = random_composition(steps, free.len(), rng);
    let mut shares = profile.lottery(agent).shares().to_vec();
    for (&a, &p) in free.iter().zip(&parts) {
        shares[a] = rat(p as i64, den as i64);
    }
    IdealLottery::new(shares).ok()
}
