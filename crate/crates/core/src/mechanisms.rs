//! Mechanisms for dividing chances: the two-phase uniform-rule family, serial
//! dictatorship and proportional variants sharing its second phase, equal
//! division, and the three-agent counterexample mechanisms used to separate
//! the axioms.
//!
//! Every mechanism here maps a preference profile to a bistochastic matching.
//! The two-phase ones first fix each excess-demand column (by the uniform
//! rule, serial extraction, or proportional split) and give every agent their
//! ideal elsewhere, then top the buckets up from the leftover excess-supply
//! tanks by a sequenced transportation fill.

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{classify_objects, IdealLottery, Profile, RandomMatching};
use crate::rational::{format_rational, rat, Rational};
use crate::uniform::{uniform_rule, PeakVector};

/// A visiting order over agent indices (or object indices); a bijection on
/// `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequence(Vec<usize>);

impl Sequence {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n == 0 {
            return Err(Error::EmptyInstance);
        }
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || seen[v] {
                return Err(Error::BadSequence {
                    n,
                    detail: format!("{order:?}"),
                });
            }
            seen[v] = true;
        }
        Ok(Self(order))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Intermediate phase-1 state: the amount of each object already in each
/// bucket, what remains in each object's tank, and each bucket's free
/// capacity.
///
/// Feasibility invariant: the total slack left in tanks equals the total free
/// capacity of buckets, which is what guarantees the fill phase can complete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialFill {
    w: Vec<Vec<Rational>>,
    tank_remaining: Vec<Rational>,
    bucket_free: Vec<Rational>,
}

impl PartialFill {
    /// Builds the state from a raw n-by-n fill matrix, deriving tank and
    /// bucket slack and checking feasibility.
    pub fn new(w: Vec<Vec<Rational>>) -> Result<Self> {
        let n = w.len();
        if n == 0 {
            return Err(Error::EmptyInstance);
        }
        let one = Rational::one();
        let mut bucket_free = Vec::with_capacity(n);
        for (i, row) in w.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    agents: n,
                    objects: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| v.is_negative()) {
                return Err(Error::SlackImbalance {
                    detail: format!("negative fill {} in bucket {i}", format_rational(v)),
                });
            }
            let used: Rational = row.iter().sum();
            if used > one {
                return Err(Error::SlackImbalance {
                    detail: format!("bucket {i} overfilled to {}", format_rational(&used)),
                });
            }
            bucket_free.push(&one - used);
        }
        let mut tank_remaining = Vec::with_capacity(n);
        for a in 0..n {
            let used: Rational = w.iter().map(|row| row[a].clone()).sum();
            if used > one {
                return Err(Error::SlackImbalance {
                    detail: format!("tank {a} over-drained to {}", format_rational(&used)),
                });
            }
            tank_remaining.push(&one - used);
        }
        let tanks: Rational = tank_remaining.iter().sum();
        let buckets: Rational = bucket_free.iter().sum();
        if tanks != buckets {
            return Err(Error::SlackImbalance {
                detail: format!(
                    "tank slack {} != bucket slack {}",
                    format_rational(&tanks),
                    format_rational(&buckets)
                ),
            });
        }
        Ok(Self {
            w,
            tank_remaining,
            bucket_free,
        })
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn fill(&self, agent: usize, object: usize) -> &Rational {
        &self.w[agent][object]
    }

    pub fn tank_remaining(&self, object: usize) -> &Rational {
        &self.tank_remaining[object]
    }

    pub fn bucket_free(&self, agent: usize) -> &Rational {
        &self.bucket_free[agent]
    }

    pub fn column(&self, object: usize) -> Vec<Rational> {
        self.w.iter().map(|row| row[object].clone()).collect()
    }
}

/// Phase 1 of the uniform-rule mechanism: every excess-demand column is
/// divided by the uniform rule, every other column is set at the ideals.
/// Excess-demand and unanimous tanks come out exactly empty.
pub fn urc_phase1(profile: &Profile) -> PartialFill {
    let n = profile.n();
    let class = classify_objects(profile);
    let mut w = vec![vec![Rational::zero(); n]; n];
    for a in 0..n {
        let column = profile.column(a);
        let shares = if class.ed.contains(&a) {
            let v = PeakVector::unit(column).expect("profile columns are valid peak vectors");
            uniform_rule(&v).expect("uniform rule succeeds on nonempty columns")
        } else {
            column
        };
        for (i, s) in shares.into_iter().enumerate() {
            w[i][a] = s;
        }
    }
    PartialFill::new(w).expect("phase-1 output conserves slack")
}

/// Phase 1 of serial dictatorship: agents in sequence order extract, from
/// what remains of every object, the amount closest to their ideal.
pub fn sdc_phase1(profile: &Profile, alpha: &Sequence) -> Result<PartialFill> {
    let n = profile.n();
    check_sequence(alpha, n)?;
    let mut w = vec![vec![Rational::zero(); n]; n];
    let mut remaining = vec![Rational::one(); n];
    for &agent in alpha.as_slice() {
        for a in 0..n {
            let ideal = profile.lottery(agent).share(a);
            let take = if *ideal < remaining[a] {
                ideal.clone()
            } else {
                remaining[a].clone()
            };
            remaining[a] -= &take;
            w[agent][a] = take;
        }
    }
    PartialFill::new(w)
}

/// Phase 1 of the proportional mechanism: excess-demand columns split in
/// proportion to the ideals, every other column at the ideals.
pub fn pdc_phase1(profile: &Profile) -> PartialFill {
    let n = profile.n();
    let class = classify_objects(profile);
    let mut w = vec![vec![Rational::zero(); n]; n];
    for a in 0..n {
        let column = profile.column(a);
        let total: Rational = column.iter().sum();
        for (i, ideal) in column.into_iter().enumerate() {
            w[i][a] = if class.ed.contains(&a) {
                ideal / &total
            } else {
                ideal
            };
        }
    }
    PartialFill::new(w).expect("phase-1 output conserves slack")
}

/// Phase 2: walk the buckets in `alpha` order and the tanks in `beta` order,
/// each step pouring the minimum of the current bucket's free capacity and
/// the current tank's remaining liquid, advancing whichever runs out (both,
/// when they run out together). Every entry only increases. Terminates with
/// all buckets full and, by slack conservation, all tanks empty.
pub fn phase2_fill(
    state: PartialFill,
    alpha: &Sequence,
    beta: &Sequence,
) -> Result<RandomMatching> {
    let n = state.n();
    check_sequence(alpha, n)?;
    check_sequence(beta, n)?;
    let PartialFill {
        mut w,
        mut tank_remaining,
        mut bucket_free,
    } = state;
    let mut t = 0;
    let mut s = 0;
    loop {
        while t < n && bucket_free[alpha.as_slice()[t]].is_zero() {
            t += 1;
        }
        while s < n && tank_remaining[beta.as_slice()[s]].is_zero() {
            s += 1;
        }
        if t == n || s == n {
            break;
        }
        let agent = alpha.as_slice()[t];
        let object = beta.as_slice()[s];
        let pour = if bucket_free[agent] < tank_remaining[object] {
            bucket_free[agent].clone()
        } else {
            tank_remaining[object].clone()
        };
        w[agent][object] += &pour;
        bucket_free[agent] -= &pour;
        tank_remaining[object] -= &pour;
    }
    RandomMatching::new(w)
}

/// Two-phase uniform-rule mechanism: uniform rule on excess-demand columns,
/// then the sequenced fill. On every excess-demand object the output column
/// equals the uniform rule of the profile column.
pub fn urc(profile: &Profile, alpha: &Sequence, beta: &Sequence) -> Result<RandomMatching> {
    phase2_fill(urc_phase1(profile), alpha, beta)
}

/// Serial dictatorship for dividing chances, then the sequenced fill.
pub fn sdc(profile: &Profile, alpha: &Sequence, beta: &Sequence) -> Result<RandomMatching> {
    phase2_fill(sdc_phase1(profile, alpha)?, alpha, beta)
}

/// Proportional division of chances, then the sequenced fill.
pub fn pdc(profile: &Profile, alpha: &Sequence, beta: &Sequence) -> Result<RandomMatching> {
    phase2_fill(pdc_phase1(profile), alpha, beta)
}

/// Gives every agent 1/n of every object regardless of the profile.
pub fn equal_division(profile: &Profile) -> RandomMatching {
    let n = profile.n();
    let share = Rational::new(1.into(), (n as i64).into());
    RandomMatching::new(vec![vec![share; n]; n]).expect("constant 1/n matrix is bistochastic")
}

fn check_sequence(seq: &Sequence, n: usize) -> Result<()> {
    if seq.len() != n {
        return Err(Error::LengthMismatch {
            left: seq.len(),
            right: n,
        });
    }
    Ok(())
}

fn require_three_agents(profile: &Profile, mechanism: &str) -> Result<()> {
    if profile.n() != 3 {
        return Err(Error::UnsupportedInstance {
            detail: format!("{mechanism} is defined for 3 agents, got {}", profile.n()),
        });
    }
    Ok(())
}

/// Three-agent mechanism that hands agent 1 their reported ideal, then runs
/// serial dictatorship over agents 2 and 3 on the remaining supplies and
/// tops up with the sequenced fill. Agents 2 and 3 are served in that order
/// unless agent 1 reports the uniform lottery, in which case the order
/// reverses. Strategy proof, efficient and non-bossy, but the order flip
/// makes it fail replacement monotonicity.
pub fn except_mechanism(profile: &Profile) -> Result<RandomMatching> {
    require_three_agents(profile, "except")?;
    let n = 3;
    let third = rat(1, 3);
    let uniform = (0..n).all(|a| *profile.lottery(0).share(a) == third);
    let serial: [usize; 2] = if uniform { [2, 1] } else { [1, 2] };

    let mut w = vec![vec![Rational::zero(); n]; n];
    let mut remaining = vec![Rational::one(); n];
    for a in 0..n {
        let ideal = profile.lottery(0).share(a).clone();
        remaining[a] -= &ideal;
        w[0][a] = ideal;
    }
    for &agent in &serial {
        for a in 0..n {
            let ideal = profile.lottery(agent).share(a);
            let take = if *ideal < remaining[a] {
                ideal.clone()
            } else {
                remaining[a].clone()
            };
            remaining[a] -= &take;
            w[agent][a] = take;
        }
    }
    let alpha = Sequence::new(vec![0, serial[0], serial[1]])?;
    let beta = Sequence::identity(n);
    phase2_fill(PartialFill::new(w)?, &alpha, &beta)
}

/// Three-agent mechanism returning one of two fixed permutation matrices,
/// chosen only by whether the excess-demand set is exactly the first object.
/// Replacement monotonic for free (the outcome depends only on the
/// excess-demand set) but bossy: an agent can flip the branch for the others
/// while keeping their own row fixed.
pub fn me_mechanism(profile: &Profile) -> Result<RandomMatching> {
    require_three_agents(profile, "me")?;
    let class = classify_objects(profile);
    let ed_is_first = class.ed.len() == 1 && class.ed.contains(&0);
    let rows: [&[u64]; 3] = if ed_is_first {
        [&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]
    } else {
        [&[0, 1, 0], &[1, 0, 0], &[0, 0, 1]]
    };
    RandomMatching::from_grid(&rows, 1)
}

/// The profile at which [`meu_mechanism`] deviates from the uniform-rule
/// mechanism.
pub fn meu_special_profile() -> Profile {
    Profile::new(vec![
        IdealLottery::new(vec![rat(2, 3), rat(1, 3), rat(0, 1)]).unwrap(),
        IdealLottery::new(vec![rat(1, 3), rat(2, 3), rat(0, 1)]).unwrap(),
        IdealLottery::new(vec![rat(1, 3), rat(1, 3), rat(1, 3)]).unwrap(),
    ])
    .unwrap()
}

/// The hand-set matching [`meu_mechanism`] returns at the special profile.
pub fn meu_special_matching() -> RandomMatching {
    RandomMatching::new(vec![
        vec![rat(2, 3), rat(0, 1), rat(1, 3)],
        vec![rat(0, 1), rat(2, 3), rat(1, 3)],
        vec![rat(1, 3), rat(1, 3), rat(1, 3)],
    ])
    .unwrap()
}

/// Three-agent mechanism equal to the identity-sequenced uniform-rule
/// mechanism everywhere except at one special profile, where it returns a
/// hand-set matching with the same per-agent distances. Welfare equivalent
/// to the uniform-rule mechanism yet not strategy proof.
pub fn meu_mechanism(profile: &Profile) -> Result<RandomMatching> {
    require_three_agents(profile, "meu")?;
    if *profile == meu_special_profile() {
        return Ok(meu_special_matching());
    }
    urc(profile, &Sequence::identity(3), &Sequence::identity(3))
}

/// Names one of the seven mechanisms together with its sequence parameters.
/// Sequences default to identity; the three-agent counterexample mechanisms
/// take none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MechanismKind {
    #[serde(rename = "urc")]
    Urc,
    #[serde(rename = "sdc")]
    Sdc,
    #[serde(rename = "pdc")]
    Pdc,
    #[serde(rename = "equal")]
    EqualDivision,
    #[serde(rename = "except")]
    Except,
    #[serde(rename = "me")]
    Me,
    #[serde(rename = "meu")]
    Meu,
}

impl MechanismKind {
    pub fn cli_id(&self) -> &'static str {
        match self {
            MechanismKind::Urc => "urc",
            MechanismKind::Sdc => "sdc",
            MechanismKind::Pdc => "pdc",
            MechanismKind::EqualDivision => "equal",
            MechanismKind::Except => "except",
            MechanismKind::Me => "me",
            MechanismKind::Meu => "meu",
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "urc" => Ok(MechanismKind::Urc),
            "sdc" => Ok(MechanismKind::Sdc),
            "pdc" => Ok(MechanismKind::Pdc),
            "equal" | "equal-division" | "ed" => Ok(MechanismKind::EqualDivision),
            "except" => Ok(MechanismKind::Except),
            "me" => Ok(MechanismKind::Me),
            "meu" => Ok(MechanismKind::Meu),
            other => Err(Error::UnknownMechanism(other.into())),
        }
    }

    fn takes_sequences(&self) -> bool {
        matches!(
            self,
            MechanismKind::Urc | MechanismKind::Sdc | MechanismKind::Pdc
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismId {
    pub kind: MechanismKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Sequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Sequence>,
}

impl MechanismId {
    pub fn new(kind: MechanismKind) -> Self {
        Self {
            kind,
            alpha: None,
            beta: None,
        }
    }

    pub fn with_sequences(kind: MechanismKind, alpha: Sequence, beta: Sequence) -> Result<Self> {
        if !kind.takes_sequences() {
            return Err(Error::UnsupportedInstance {
                detail: format!("{} does not take sequence parameters", kind.cli_id()),
            });
        }
        Ok(Self {
            kind,
            alpha: Some(alpha),
            beta: Some(beta),
        })
    }

    /// Runs the mechanism on a profile.
    pub fn apply(&self, profile: &Profile) -> Result<RandomMatching> {
        let n = profile.n();
        if !self.kind.takes_sequences() && (self.alpha.is_some() || self.beta.is_some()) {
            return Err(Error::UnsupportedInstance {
                detail: format!("{} does not take sequence parameters", self.kind.cli_id()),
            });
        }
        let alpha = self.alpha.clone().unwrap_or_else(|| Sequence::identity(n));
        let beta = self.beta.clone().unwrap_or_else(|| Sequence::identity(n));
        match self.kind {
            MechanismKind::Urc => urc(profile, &alpha, &beta),
            MechanismKind::Sdc => sdc(profile, &alpha, &beta),
            MechanismKind::Pdc => pdc(profile, &alpha, &beta),
            MechanismKind::EqualDivision => Ok(equal_division(profile)),
            MechanismKind::Except => except_mechanism(profile),
            MechanismKind::Me => me_mechanism(profile),
            MechanismKind::Meu => meu_mechanism(profile),
        }
    }

    /// Human-readable id including sequences, e.g. `urc[a=2,0,1;b=0,1,2]`.
    pub fn display_id(&self) -> String {
        let mut out = self.kind.cli_id().to_string();
        if self.alpha.is_some() || self.beta.is_some() {
            let fmt = |s: &Option<Sequence>| match s {
                Some(s) => s
                    .as_slice()
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                None => "id".into(),
            };
            out.push_str(&format!("[a={};b={}]", fmt(&self.alpha), fmt(&self.beta)));
        }
        out
    }
}
