//! The single-commodity uniform rule: exact water-filling over one divisible
//! supply among agents with single-peaked preferences.
//!
//! In excess demand (peaks sum to at least the supply) every agent receives
//! `min(peak, level)` for the common cap `level` that makes the shares sum to
//! the supply; in excess supply every agent receives `max(peak, floor)` for
//! the common floor. Both bounds are found by an exact breakpoint scan over
//! the sorted peaks, never by numeric root finding.

use num::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{format_rational, Rational};

/// Peaks for one divisible commodity plus the supply to divide (1 for a
/// lottery column). Peaks must be nonnegative; they may exceed the supply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeakVector {
    pub peaks: Vec<Rational>,
    pub supply: Rational,
}

impl PeakVector {
    /// Peaks with unit supply.
    pub fn unit(peaks: Vec<Rational>) -> Result<Self> {
        Self::with_supply(peaks, Rational::from_integer(1.into()))
    }

    pub fn with_supply(peaks: Vec<Rational>, supply: Rational) -> Result<Self> {
        if peaks.is_empty() {
            return Err(Error::EmptyInstance);
        }
        if !supply.is_positive() {
            return Err(Error::NonPositiveSupply {
                supply: format_rational(&supply),
            });
        }
        if let Some(p) = peaks.iter().find(|p| p.is_negative()) {
            return Err(Error::NegativeShare {
                who: "peak".into(),
                value: format_rational(p),
            });
        }
        Ok(Self { peaks, supply })
    }
}

/// Divides the supply among the peaks: the unique profile of shares capped at
/// a common level (excess demand) or floored at a common level (excess
/// supply) that sums exactly to the supply. At exact balance both branches
/// return the peaks unchanged.
pub fn uniform_rule(v: &PeakVector) -> Result<Vec<Rational>> {
    let total: Rational = v.peaks.iter().sum();
    if total >= v.supply {
        let level = demand_level(&v.peaks, &v.supply);
        Ok(v.peaks
            .iter()
            .map(|p| if *p < level { p.clone() } else { level.clone() })
            .collect())
    } else {
        let level = supply_level(&v.peaks, &v.supply);
        Ok(v.peaks
            .iter()
            .map(|p| if *p > level { p.clone() } else { level.clone() })
            .collect())
    }
}

/// Solves sum_i min(peak_i, level) = supply, assuming sum of peaks >= supply.
///
/// With peaks sorted ascending, if exactly the first k peaks stay below the
/// level then level = (supply - prefix_k) / (n - k); scan k until the level
/// lands in the bracket [peak_k, peak_{k+1}].
fn demand_level(peaks: &[Rational], supply: &Rational) -> Rational {
    let n = peaks.len();
    let mut sorted = peaks.to_vec();
    sorted.sort();
    let mut prefix = Rational::zero();
    for k in 0..n {
        let remaining = (n - k) as i64;
        let level = (supply - &prefix) / Rational::from_integer(remaining.into());
        let lower_ok = k == 0 || sorted[k - 1] <= level;
        if lower_ok && level <= sorted[k] {
            return level;
        }
        prefix += &sorted[k];
    }
    // Peaks sum to exactly the supply: every agent keeps their peak and any
    // level at or above the largest peak solves the equation.
    sorted[n - 1].clone()
}

/// Solves sum_i max(peak_i, level) = supply, assuming sum of peaks < supply.
fn supply_level(peaks: &[Rational], supply: &Rational) -> Rational {
    let n = peaks.len();
    let mut sorted = peaks.to_vec();
    sorted.sort();
    // Exactly the first k sorted peaks are raised to the level.
    let mut suffix: Rational = sorted.iter().sum();
    for k in 1..=n {
        suffix -= &sorted[k - 1];
        let level = (supply - &suffix) / Rational::from_integer((k as i64).into());
        if sorted[k - 1] <= level && (k == n || level <= sorted[k]) {
            return level;
        }
    }
    unreachable!("no floor bracket found; peaks must sum below the supply")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use num::One;
    use proptest::prelude::*;

    fn peaks(parts: &[i64], den: i64) -> Vec<Rational> {
        parts.iter().map(|&p| rat(p, den)).collect()
    }

    /// Iterative equal-split oracle: hand out `supply / |active|` rounds,
    /// settling agents whose peaks fall on the wrong side of the equal share,
    /// until the rest split the remainder evenly.
    fn equal_split_oracle(v: &PeakVector) -> Vec<Rational> {
        let n = v.peaks.len();
        let total: Rational = v.peaks.iter().sum();
        let excess_demand = total >= v.supply;
        let mut shares = vec![Rational::zero(); n];
        let mut active: Vec<usize> = (0..n).collect();
        let mut remaining = v.supply.clone();
        loop {
            let equal = &remaining / Rational::from_integer((active.len() as i64).into());
            let wrong: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&i| {
                    if excess_demand {
                        v.peaks[i] <= equal
                    } else {
                        v.peaks[i] >= equal
                    }
                })
                .collect();
            if wrong.is_empty() {
                for i in active {
                    shares[i] = equal.clone();
                }
                return shares;
            }
            for &i in &wrong {
                shares[i] = v.peaks[i].clone();
                remaining -= &v.peaks[i];
            }
            active.retain(|i| !wrong.contains(i));
            if active.is_empty() {
                return shares;
            }
        }
    }

    #[test]
    fn example1_columns() {
        let a = PeakVector::unit(peaks(&[6, 5, 2], 10)).unwrap();
        assert_eq!(uniform_rule(&a).unwrap(), peaks(&[4, 4, 2], 10));

        let c = PeakVector::unit(peaks(&[2, 1, 8], 10)).unwrap();
        assert_eq!(uniform_rule(&c).unwrap(), peaks(&[2, 1, 7], 10));
    }

    #[test]
    fn balanced_peaks_unchanged() {
        let v = PeakVector::unit(peaks(&[3, 5, 2], 10)).unwrap();
        assert_eq!(uniform_rule(&v).unwrap(), v.peaks);
    }

    #[test]
    fn excess_supply_floors() {
        let v = PeakVector::unit(peaks(&[2, 1, 3], 10)).unwrap();
        assert_eq!(
            uniform_rule(&v).unwrap(),
            vec![rat(1, 3), rat(1, 3), rat(1, 3)]
        );
        // Mixed case: one peak stays above the floor.
        let v = PeakVector::unit(peaks(&[2, 4, 0], 10)).unwrap();
        assert_eq!(
            uniform_rule(&v).unwrap(),
            vec![rat(3, 10), rat(4, 10), rat(3, 10)]
        );
    }

    #[test]
    fn supply_beyond_one_unit() {
        // Proxy-object division with supply 2: peaks (0.8, 0.6, 1.0).
        let v = PeakVector::with_supply(peaks(&[8, 6, 10], 10), rat(2, 1)).unwrap();
        assert_eq!(uniform_rule(&v).unwrap(), peaks(&[7, 6, 7], 10));
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(PeakVector::unit(vec![]).is_err());
        assert!(PeakVector::with_supply(vec![rat(1, 2)], rat(0, 1)).is_err());
        assert!(PeakVector::unit(vec![rat(-1, 2), rat(3, 2)]).is_err());
    }

    #[test]
    fn capped_agents_share_the_common_level() {
        let v = PeakVector::unit(peaks(&[9, 7, 1], 10)).unwrap();
        let shares = uniform_rule(&v).unwrap();
        // Agents 0 and 1 are rationed; both must land on the same level.
        assert_eq!(shares[0], shares[1]);
        assert_eq!(shares[2], rat(1, 10));
        assert_eq!(shares.iter().sum::<Rational>(), Rational::one());
    }

    fn grid_peaks() -> impl Strategy<Value = (Vec<Rational>, Rational)> {
        (1usize..6, 1u64..13).prop_flat_map(|(n, den)| {
            (
                prop::collection::vec(0u64..=den, n),
                Just(den),
                1u64..=den,
            )
                .prop_map(move |(parts, den, sup)| {
                    (
                        parts
                            .iter()
                            .map(|&p| rat(p as i64, den as i64))
                            .collect::<Vec<_>>(),
                        rat(sup as i64, den as i64),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn shares_sum_to_supply_and_stay_on_peak_side((peaks, supply) in grid_peaks()) {
            let v = PeakVector::with_supply(peaks.clone(), supply.clone()).unwrap();
            let shares = uniform_rule(&v).unwrap();
            prop_assert_eq!(shares.iter().sum::<Rational>(), supply.clone());
            let total: Rational = peaks.iter().sum();
            for (share, peak) in shares.iter().zip(&peaks) {
                prop_assert!(!share.is_negative());
                if total >= supply {
                    prop_assert!(share <= peak);
                } else {
                    prop_assert!(share >= peak);
                }
            }
            // Equal treatment of the rationed: every agent not at their peak
            // sits on the same common bound.
            let bounds: Vec<&Rational> = shares
                .iter()
                .zip(&peaks)
                .filter(|(s, p)| s != p)
                .map(|(s, _)| s)
                .collect();
            for pair in bounds.windows(2) {
                prop_assert_eq!(pair[0], pair[1]);
            }
        }

        #[test]
        fn agrees_with_equal_split_oracle((peaks, supply) in grid_peaks()) {
            let v = PeakVector::with_supply(peaks, supply).unwrap();
            prop_assert_eq!(uniform_rule(&v).unwrap(), equal_split_oracle(&v));
        }

        #[test]
        fn no_grid_misreport_improves(
            (peaks, supply) in grid_peaks(),
            reporter in 0usize..6,
        ) {
            // Every misreport on the 1/12 grid, for one agent per instance.
            let n = peaks.len();
            let i = reporter % n;
            let v = PeakVector::with_supply(peaks.clone(), supply.clone()).unwrap();
            let honest = uniform_rule(&v).unwrap();
            let honest_gap = (&honest[i] - &peaks[i]).abs();

            for misreport in 0..=12u64 {
                let mut lied = peaks.clone();
                lied[i] = rat(misreport as i64, 12);
                let lv = PeakVector::with_supply(lied, supply.clone()).unwrap();
                let outcome = uniform_rule(&lv).unwrap();
                let lied_gap = (&outcome[i] - &peaks[i]).abs();
                prop_assert!(lied_gap >= honest_gap);
            }
        }
    }
}
