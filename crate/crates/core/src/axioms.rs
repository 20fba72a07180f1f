//! Verification and falsification of the mechanism axioms: strategy
//! proofness, efficiency, replacement monotonicity, non-bossiness,
//! in-betweenness, anonymity, envy freeness, and welfare equivalence.
//!
//! Efficiency and envy freeness are decidable per (profile, matching) and are
//! checked exactly. The universally quantified axioms are attacked by seeded
//! falsification over grid profiles and structured deviations; a Pass there
//! is budget-relative ("no counterexample found"), while every Fail carries a
//! witness that re-verifies under independent exact recomputation.

use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;

use num::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::{
    equal_division_on_example1, pdc_manipulation_fixture, sdc_asymmetry_fixture,
};
use crate::mechanisms::{MechanismId, MechanismKind};
use crate::model::{
    classify_objects, distance_vector, is_between, is_same_sided, l1_distance, IdealLottery,
    Permutation, Profile, RandomMatching,
};
use crate::profiles::{
    between_sample_rng, composition_count, compositions, nb_perturbation_rng, random_lottery_rng,
    random_profile_rng, rm_perturbation_rng, stream_rng,
};
use crate::rational::{rational_opt_vec_string, Rational};

/// The checkable properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "sp")]
    StrategyProof,
    #[serde(rename = "eff")]
    Efficient,
    #[serde(rename = "rm")]
    ReplacementMonotonic,
    #[serde(rename = "nb")]
    NonBossy,
    #[serde(rename = "ib")]
    InBetween,
    #[serde(rename = "ano")]
    Anonymous,
    #[serde(rename = "ef")]
    EnvyFree,
    #[serde(rename = "we")]
    WelfareEquivalent,
}

impl Property {
    pub fn cli_id(&self) -> &'static str {
        match self {
            Property::StrategyProof => "sp",
            Property::Efficient => "eff",
            Property::ReplacementMonotonic => "rm",
            Property::NonBossy => "nb",
            Property::InBetween => "ib",
            Property::Anonymous => "ano",
            Property::EnvyFree => "ef",
            Property::WelfareEquivalent => "we",
        }
    }

    pub fn short_label(&self) -> &'static str {
        match self {
            Property::StrategyProof => "SP",
            Property::Efficient => "PF",
            Property::ReplacementMonotonic => "RM",
            Property::NonBossy => "NB",
            Property::InBetween => "IB",
            Property::Anonymous => "ANO",
            Property::EnvyFree => "EF",
            Property::WelfareEquivalent => "WE",
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        match id {
            "sp" => Ok(Property::StrategyProof),
            "eff" | "pf" => Ok(Property::Efficient),
            "rm" => Ok(Property::ReplacementMonotonic),
            "nb" => Ok(Property::NonBossy),
            "ib" => Ok(Property::InBetween),
            "ano" => Ok(Property::Anonymous),
            "ef" => Ok(Property::EnvyFree),
            "we" => Ok(Property::WelfareEquivalent),
            other => Err(Error::UnknownProperty(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictResult {
    Pass,
    Fail,
    Inconclusive,
}

/// A counterexample record. Every field needed to replay the failure is
/// embedded: the profile, the deviation (misreport or permutation), both
/// matchings, and the per-agent distances measured against the original
/// ideals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub versus: Option<MechanismId>,
    pub profile: Profile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misreport: Option<IdealLottery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<RandomMatching>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviated_matching: Option<RandomMatching>,
    #[serde(
        default,
        with = "rational_opt_vec_string",
        skip_serializing_if = "Option::is_none"
    )]
    pub distances: Option<Vec<Rational>>,
    #[serde(
        default,
        with = "rational_opt_vec_string",
        skip_serializing_if = "Option::is_none"
    )]
    pub deviated_distances: Option<Vec<Rational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envy: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominator: Option<RandomMatching>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<u64>,
    #[serde(default)]
    pub note: String,
}

impl Witness {
    fn new(profile: Profile) -> Self {
        Self {
            mechanism: None,
            versus: None,
            profile,
            agent: None,
            misreport: None,
            permutation: None,
            matching: None,
            deviated_matching: None,
            distances: None,
            deviated_distances: None,
            envy: None,
            dominator: None,
            sample: None,
            note: String::new(),
        }
    }
}

/// Outcome of one property check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomVerdict {
    pub property: Property,
    pub result: VerdictResult,
    /// Samples accounted for: everything evaluated on a Pass, the failing
    /// sample's index + 1 on a Fail. Zero for single-instance checks.
    pub samples: u64,
    /// True when a Pass only means "no counterexample found within budget".
    pub budget_relative: bool,
    pub note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl AxiomVerdict {
    fn pass(property: Property, note: impl Into<String>) -> Self {
        Self {
            property,
            result: VerdictResult::Pass,
            samples: 0,
            budget_relative: false,
            note: note.into(),
            witness: None,
        }
    }

    fn pass_budget(property: Property, samples: u64, note: impl Into<String>) -> Self {
        Self {
            property,
            result: VerdictResult::Pass,
            samples,
            budget_relative: true,
            note: note.into(),
            witness: None,
        }
    }

    fn fail(property: Property, witness: Witness) -> Self {
        Self {
            property,
            result: VerdictResult::Fail,
            samples: 0,
            budget_relative: false,
            note: String::new(),
            witness: Some(witness),
        }
    }

    fn inconclusive(property: Property, note: impl Into<String>) -> Self {
        Self {
            property,
            result: VerdictResult::Inconclusive,
            samples: 0,
            budget_relative: false,
            note: note.into(),
            witness: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.result == VerdictResult::Pass
    }
}

// ---------------------------------------------------------------------------
// Efficiency: decidable through same-sidedness, with two independent oracles.
// ---------------------------------------------------------------------------

/// Efficiency check for one (profile, matching) pair. Decided by
/// same-sidedness; a Fail carries the dominating same-sided matching built by
/// [`improve_to_same_sided`].
pub fn check_efficiency(profile: &Profile, matching: &RandomMatching) -> AxiomVerdict {
    if is_same_sided(profile, matching) {
        return AxiomVerdict::pass(Property::Efficient, "matching is same-sided");
    }
    let dominator = improve_to_same_sided(profile, matching);
    let mut w = Witness::new(profile.clone());
    w.matching = Some(matching.clone());
    w.distances = distance_vector(profile, matching).ok();
    w.deviated_distances = distance_vector(profile, &dominator).ok();
    w.dominator = Some(dominator);
    w.note = "matching is not same-sided; the attached matching strictly dominates it".into();
    let verdict = AxiomVerdict::fail(Property::Efficient, w);
    debug_assert!(verify_witness(Property::Efficient, verdict.witness.as_ref().unwrap()));
    verdict
}

/// Repairs a matching into a same-sided one that weakly improves every agent
/// and strictly improves at least one (when the input is not already
/// same-sided). Each round finds an object with one agent below and one agent
/// above their ideal and shifts mass around a 2x2 cycle; the shift size is
/// the largest that keeps every entry on the correct side, so some bound goes
/// tight each round and the total deviation strictly decreases, which
/// guarantees termination on exact rationals.
pub fn improve_to_same_sided(profile: &Profile, matching: &RandomMatching) -> RandomMatching {
    let n = profile.n();
    let mut rows: Vec<Vec<Rational>> = matching.rows().to_vec();
    loop {
        let current = RandomMatching::new(rows.clone()).expect("transfers preserve bistochasticity");
        if is_same_sided(profile, &current) {
            return current;
        }
        let (b0, i, j) = find_transfer_triple(profile, &rows)
            .expect("a non-same-sided matching always has a transfer triple");
        // Object where agent i holds more than their ideal; one exists
        // because row sums match the ideal's total.
        let b1 = (0..n)
            .find(|&b| rows[i][b] > *profile.lottery(i).share(b))
            .expect("an under-served agent holds surplus somewhere");
        let cap_j_b1 = if rows[j][b1] < *profile.lottery(j).share(b1) {
            profile.lottery(j).share(b1).clone()
        } else {
            Rational::one()
        };
        let mut eps = profile.lottery(i).share(b0) - &rows[i][b0];
        eps = eps.min(&rows[j][b0] - profile.lottery(j).share(b0));
        eps = eps.min(&rows[i][b1] - profile.lottery(i).share(b1));
        eps = eps.min(cap_j_b1 - &rows[j][b1]);
        assert!(eps.is_positive(), "transfer size must be positive");
        rows[i][b0] += &eps;
        rows[i][b1] -= &eps;
        rows[j][b0] -= &eps;
        rows[j][b1] += &eps;
    }
}

fn find_transfer_triple(profile: &Profile, rows: &[Vec<Rational>]) -> Option<(usize, usize, usize)> {
    let n = profile.n();
    for b in 0..n {
        let mut below = None;
        let mut above = None;
        for i in 0..n {
            let ideal = profile.lottery(i).share(b);
            if rows[i][b] < *ideal && below.is_none() {
                below = Some(i);
            } else if rows[i][b] > *ideal && above.is_none() {
                above = Some(i);
            }
        }
        if let (Some(i), Some(j)) = (below, above) {
            return Some((b, i, j));
        }
    }
    None
}

/// Exhaustive dominance oracle on the `1/den` grid: returns some bistochastic
/// grid matrix that strictly lottery-dominates `matching`, if one exists.
/// Only `n <= 3` is supported; larger enumerations exceed the budget.
pub fn brute_force_dominance(
    profile: &Profile,
    matching: &RandomMatching,
    den: u64,
) -> Result<Option<RandomMatching>> {
    let n = profile.n();
    if n > 3 || composition_count(den, n) > 5_000 {
        return Err(Error::BudgetExceeded {
            detail: format!("grid enumeration for n={n}, den={den} is out of budget"),
        });
    }
    let base = distance_vector(profile, matching)?;
    let mut result = None;
    enumerate_grid_matchings(n, den, &mut |rows: &[Vec<u64>]| {
        if result.is_some() {
            return;
        }
        let refs: Vec<&[u64]> = rows.iter().map(|r| r.as_slice()).collect();
        let candidate =
            RandomMatching::from_grid(&refs, den).expect("enumerated matrices are bistochastic");
        let mut strict = false;
        for (i, old) in base.iter().enumerate() {
            let d = l1_distance(profile.lottery(i).shares(), candidate.row(i))
                .expect("dimensions agree");
            if d > *old {
                return;
            }
            if d < *old {
                strict = true;
            }
        }
        if strict {
            result = Some(candidate);
        }
    });
    Ok(result)
}

/// Calls `visit` with every bistochastic matrix with entries in `{0..den}/den`.
pub fn enumerate_grid_matchings(n: usize, den: u64, visit: &mut dyn FnMut(&[Vec<u64>])) {
    let mut rows: Vec<Vec<u64>> = Vec::with_capacity(n);
    let mut caps = vec![den; n];
    fn recurse(
        n: usize,
        den: u64,
        rows: &mut Vec<Vec<u64>>,
        caps: &mut Vec<u64>,
        visit: &mut dyn FnMut(&[Vec<u64>]),
    ) {
        if rows.len() + 1 == n {
            rows.push(caps.clone());
            visit(rows);
            rows.pop();
            return;
        }
        for row in crate::profiles::bounded_compositions(den, caps) {
            for (c, r) in caps.iter_mut().zip(&row) {
                *c -= r;
            }
            rows.push(row.clone());
            recurse(n, den, rows, caps, visit);
            rows.pop();
            for (c, r) in caps.iter_mut().zip(&row) {
                *c += r;
            }
        }
    }
    if n > 0 {
        recurse(n, den, &mut rows, &mut caps, visit);
    }
}

// ---------------------------------------------------------------------------
// Per-instance checks for the quantified axioms.
// ---------------------------------------------------------------------------

fn run_pair(
    mechanism: &MechanismId,
    profile: &Profile,
    agent: usize,
    misreport: &IdealLottery,
) -> Result<(RandomMatching, RandomMatching, Profile)> {
    let truthful = mechanism.apply(profile)?;
    let deviated_profile = profile.with_lottery(agent, misreport.clone())?;
    let deviated = mechanism.apply(&deviated_profile)?;
    Ok((truthful, deviated, deviated_profile))
}

/// Replacement monotonicity for one deviation. Premises: the excess-demand
/// set is unchanged and the deviator weakly lowers every excess-demand ideal;
/// a deviation violating them is Inconclusive (skipped). Under the premises,
/// if the deviator is not better off then nobody else may be worse off.
pub fn check_replacement_monotonicity(
    mechanism: &MechanismId,
    profile: &Profile,
    agent: usize,
    misreport: &IdealLottery,
) -> Result<AxiomVerdict> {
    let class = classify_objects(profile);
    let deviated_profile = profile.with_lottery(agent, misreport.clone())?;
    let lowered = class
        .ed
        .iter()
        .all(|&a| misreport.share(a) <= profile.lottery(agent).share(a));
    if classify_objects(&deviated_profile).ed != class.ed || !lowered {
        return Ok(AxiomVerdict::inconclusive(
            Property::ReplacementMonotonic,
            "deviation does not satisfy the premises",
        ));
    }
    let truthful = mechanism.apply(profile)?;
    let deviated = mechanism.apply(&deviated_profile)?;
    let before = distance_vector(profile, &truthful)?;
    let after = distance_vector(profile, &deviated)?;
    if before[agent] > after[agent] {
        return Ok(AxiomVerdict::pass(
            Property::ReplacementMonotonic,
            "deviator strictly gains; premise of the implication is false",
        ));
    }
    for j in 0..profile.n() {
        if j != agent && after[j] > before[j] {
            let mut w = Witness::new(profile.clone());
            w.mechanism = Some(mechanism.clone());
            w.agent = Some(agent);
            w.misreport = Some(misreport.clone());
            w.matching = Some(truthful);
            w.deviated_matching = Some(deviated);
            w.distances = Some(before);
            w.deviated_distances = Some(after);
            w.note = format!("agent {j} is worse off although the deviator did not gain");
            return Ok(AxiomVerdict::fail(Property::ReplacementMonotonic, w));
        }
    }
    Ok(AxiomVerdict::pass(
        Property::ReplacementMonotonic,
        "no other agent is worse off",
    ))
}

/// Non-bossiness (excess-demand form) for one deviation: if the deviator's
/// own allocation on every excess-demand object is unchanged, everyone's
/// must be.
pub fn check_non_bossiness(
    mechanism: &MechanismId,
    profile: &Profile,
    agent: usize,
    misreport: &IdealLottery,
) -> Result<AxiomVerdict> {
    let class = classify_objects(profile);
    let (truthful, deviated, _) = run_pair(mechanism, profile, agent, misreport)?;
    let own_unchanged = class
        .ed
        .iter()
        .all(|&a| truthful.entry(agent, a) == deviated.entry(agent, a));
    if !own_unchanged {
        return Ok(AxiomVerdict::pass(
            Property::NonBossy,
            "deviator's own excess-demand allocation changed; premise is false",
        ));
    }
    for j in 0..profile.n() {
        if j == agent {
            continue;
        }
        if let Some(&a) = class
            .ed
            .iter()
            .find(|&&a| truthful.entry(j, a) != deviated.entry(j, a))
        {
            let mut w = Witness::new(profile.clone());
            w.mechanism = Some(mechanism.clone());
            w.agent = Some(agent);
            w.misreport = Some(misreport.clone());
            w.matching = Some(truthful);
            w.deviated_matching = Some(deviated);
            w.note = format!(
                "agent {j}'s allocation of excess-demand object {a} moved while the deviator's was fixed"
            );
            return Ok(AxiomVerdict::fail(Property::NonBossy, w));
        }
    }
    Ok(AxiomVerdict::pass(
        Property::NonBossy,
        "all excess-demand allocations unchanged",
    ))
}

/// In-betweenness for one deviation. Premise: the misreport lies in the box
/// spanned by the ideal and the truthful allocation (Inconclusive otherwise).
/// Then allocations must respond monotonically on every coordinate the
/// deviator actually moved: lowering an ideal must not raise the allocation,
/// raising it must not lower the allocation. Coordinates reported unchanged
/// impose no constraint; the fill phase may legitimately shift them.
pub fn check_in_betweenness(
    mechanism: &MechanismId,
    profile: &Profile,
    agent: usize,
    misreport: &IdealLottery,
) -> Result<AxiomVerdict> {
    let truthful = mechanism.apply(profile)?;
    if !is_between(
        misreport.shares(),
        profile.lottery(agent).shares(),
        truthful.row(agent),
    ) {
        return Ok(AxiomVerdict::inconclusive(
            Property::InBetween,
            "misreport is not between the ideal and the allocation",
        ));
    }
    let deviated_profile = profile.with_lottery(agent, misreport.clone())?;
    let deviated = mechanism.apply(&deviated_profile)?;
    for a in 0..profile.n() {
        let ideal = profile.lottery(agent).share(a);
        let reported = misreport.share(a);
        let before = truthful.entry(agent, a);
        let after = deviated.entry(agent, a);
        let violated = (reported < ideal && after > before) || (reported > ideal && after < before);
        if violated {
            let mut w = Witness::new(profile.clone());
            w.mechanism = Some(mechanism.clone());
            w.agent = Some(agent);
            w.misreport = Some(misreport.clone());
            w.matching = Some(truthful);
            w.deviated_matching = Some(deviated);
            w.note = format!("allocation of object {a} moved against the reported direction");
            return Ok(AxiomVerdict::fail(Property::InBetween, w));
        }
    }
    Ok(AxiomVerdict::pass(
        Property::InBetween,
        "allocation responds monotonically",
    ))
}

/// Anonymity for one permutation: relabelling the agents must leave every
/// agent's welfare (distance to their own ideal) unchanged.
pub fn check_anonymity(
    mechanism: &MechanismId,
    profile: &Profile,
    relabel: &Permutation,
) -> Result<AxiomVerdict> {
    let permuted = profile.permute_agents(relabel)?;
    let base = mechanism.apply(profile)?;
    let moved = mechanism.apply(&permuted)?;
    let before = distance_vector(profile, &base)?;
    let after = distance_vector(&permuted, &moved)?;
    for i in 0..profile.n() {
        if before[i] != after[relabel.image(i)] {
            let mut w = Witness::new(profile.clone());
            w.mechanism = Some(mechanism.clone());
            w.agent = Some(i);
            w.permutation = Some(relabel.as_slice().to_vec());
            w.matching = Some(base);
            w.deviated_matching = Some(moved);
            w.distances = Some(before);
            w.deviated_distances = Some(after);
            w.note = format!("agent {i}'s welfare changes under relabelling");
            return Ok(AxiomVerdict::fail(Property::Anonymous, w));
        }
    }
    Ok(AxiomVerdict::pass(
        Property::Anonymous,
        "welfare is invariant under the relabelling",
    ))
}

/// Envy freeness of one matching: every agent weakly prefers their own row
/// to every other agent's row.
pub fn check_envy_freeness(profile: &Profile, matching: &RandomMatching) -> AxiomVerdict {
    let n = profile.n();
    for i in 0..n {
        let own = l1_distance(profile.lottery(i).shares(), matching.row(i))
            .expect("dimensions agree");
        for j in 0..n {
            let other = l1_distance(profile.lottery(i).shares(), matching.row(j))
                .expect("dimensions agree");
            if other < own {
                let mut w = Witness::new(profile.clone());
                w.matching = Some(matching.clone());
                w.envy = Some((i, j));
                w.distances = distance_vector(profile, matching).ok();
                w.note = format!("agent {i} strictly prefers agent {j}'s allocation");
                return AxiomVerdict::fail(Property::EnvyFree, w);
            }
        }
    }
    AxiomVerdict::pass(Property::EnvyFree, "no agent envies another")
}

/// Welfare equivalence of two mechanisms at one profile: identical per-agent
/// distances.
pub fn check_welfare_equivalence(
    first: &MechanismId,
    second: &MechanismId,
    profile: &Profile,
) -> Result<AxiomVerdict> {
    let a = first.apply(profile)?;
    let b = second.apply(profile)?;
    let da = distance_vector(profile, &a)?;
    let db = distance_vector(profile, &b)?;
    if let Some(i) = (0..profile.n()).find(|&i| da[i] != db[i]) {
        let mut w = Witness::new(profile.clone());
        w.mechanism = Some(first.clone());
        w.versus = Some(second.clone());
        w.agent = Some(i);
        w.matching = Some(a);
        w.deviated_matching = Some(b);
        w.distances = Some(da);
        w.deviated_distances = Some(db);
        w.note = format!("agent {i} has different welfare under the two mechanisms");
        return Ok(AxiomVerdict::fail(Property::WelfareEquivalent, w));
    }
    Ok(AxiomVerdict::pass(
        Property::WelfareEquivalent,
        "per-agent distances agree",
    ))
}

// ---------------------------------------------------------------------------
// Witness re-verification.
// ---------------------------------------------------------------------------

/// Recomputes a Fail witness from scratch and confirms it still demonstrates
/// the violation. Used by the falsifiers before emitting a verdict and by the
/// CLI to replay stored witnesses.
pub fn verify_witness(property: Property, witness: &Witness) -> bool {
    match property {
        Property::StrategyProof => (|| {
            let m = witness.mechanism.as_ref()?;
            let agent = witness.agent?;
            let misreport = witness.misreport.as_ref()?;
            let (truthful, deviated, _) = run_pair(m, &witness.profile, agent, misreport).ok()?;
            let ideal = witness.profile.lottery(agent).shares();
            let before = l1_distance(ideal, truthful.row(agent)).ok()?;
            let after = l1_distance(ideal, deviated.row(agent)).ok()?;
            Some(after < before)
        })()
        .unwrap_or(false),
        Property::Efficient => (|| {
            let checked = witness.matching.as_ref()?;
            let dominator = witness.dominator.as_ref()?;
            if is_same_sided(&witness.profile, checked) {
                return Some(false);
            }
            if !is_same_sided(&witness.profile, dominator) {
                return Some(false);
            }
            let before = distance_vector(&witness.profile, checked).ok()?;
            let after = distance_vector(&witness.profile, dominator).ok()?;
            let weak = before.iter().zip(&after).all(|(b, a)| a <= b);
            let strict = before.iter().zip(&after).any(|(b, a)| a < b);
            Some(weak && strict)
        })()
        .unwrap_or(false),
        Property::ReplacementMonotonic => (|| {
            let m = witness.mechanism.as_ref()?;
            let agent = witness.agent?;
            let misreport = witness.misreport.as_ref()?;
            let verdict = check_replacement_monotonicity(m, &witness.profile, agent, misreport).ok()?;
            Some(verdict.result == VerdictResult::Fail)
        })()
        .unwrap_or(false),
        Property::NonBossy => (|| {
            let m = witness.mechanism.as_ref()?;
            let agent = witness.agent?;
            let misreport = witness.misreport.as_ref()?;
            let verdict = check_non_bossiness(m, &witness.profile, agent, misreport).ok()?;
            Some(verdict.result == VerdictResult::Fail)
        })()
        .unwrap_or(false),
        Property::InBetween => (|| {
            let m = witness.mechanism.as_ref()?;
            let agent = witness.agent?;
            let misreport = witness.misreport.as_ref()?;
            let verdict = check_in_betweenness(m, &witness.profile, agent, misreport).ok()?;
            Some(verdict.result == VerdictResult::Fail)
        })()
        .unwrap_or(false),
        Property::Anonymous => (|| {
            let m = witness.mechanism.as_ref()?;
            let perm = Permutation::new(witness.permutation.clone()?).ok()?;
            let verdict = check_anonymity(m, &witness.profile, &perm).ok()?;
            Some(verdict.result == VerdictResult::Fail)
        })()
        .unwrap_or(false),
        Property::EnvyFree => (|| {
            let matching = match (&witness.mechanism, &witness.matching) {
                (Some(m), _) => m.apply(&witness.profile).ok()?,
                (None, Some(p)) => p.clone(),
                (None, None) => return None,
            };
            let verdict = check_envy_freeness(&witness.profile, &matching);
            Some(verdict.result == VerdictResult::Fail)
        })()
        .unwrap_or(false),
        Property::WelfareEquivalent => (|| {
            let m1 = witness.mechanism.as_ref()?;
            let m2 = witness.versus.as_ref()?;
            let verdict = check_welfare_equivalence(m1, m2, &witness.profile).ok()?;
            Some(verdict.result == VerdictResult::Fail)
        })()
        .unwrap_or(false),
    }
}

// ---------------------------------------------------------------------------
// Seeded falsification campaigns.
// ---------------------------------------------------------------------------

/// Budget and seed for one falsification campaign. Identical configs produce
/// identical verdicts and witnesses, regardless of `jobs`. Denominators of at
/// least `n` are recommended so that non-degenerate profiles exist.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub n: usize,
    pub denominator: u64,
    pub samples: u64,
    pub seed: u64,
    pub misreport_budget: u64,
    pub jobs: usize,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            n: 3,
            denominator: 6,
            samples: 500,
            seed: 7,
            misreport_budget: 64,
            jobs: 1,
        }
    }
}

impl FuzzConfig {
    /// Parses the CLI form `n=3,D=6,samples=500,seed=7[,misreports=64][,jobs=4]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for pair in text.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(|| Error::Parse {
                at: format!("fuzz config {pair:?}"),
                detail: "expected key=value".into(),
            })?;
            let value = value.trim();
            let parse_u64 = |what: &str| -> Result<u64> {
                value.parse().map_err(|_| Error::Parse {
                    at: format!("fuzz config key {what:?}"),
                    detail: format!("invalid number {value:?}"),
                })
            };
            match key.trim() {
                "n" => cfg.n = parse_u64("n")? as usize,
                "D" | "d" | "den" | "denominator" => cfg.denominator = parse_u64("D")?,
                "samples" => cfg.samples = parse_u64("samples")?,
                "seed" => cfg.seed = parse_u64("seed")?,
                "misreports" | "budget" | "misreport_budget" => {
                    cfg.misreport_budget = parse_u64("misreports")?
                }
                "jobs" => cfg.jobs = parse_u64("jobs")? as usize,
                other => {
                    return Err(Error::Parse {
                        at: format!("fuzz config key {other:?}"),
                        detail: "unknown key".into(),
                    })
                }
            }
        }
        if cfg.n == 0 || cfg.denominator == 0 {
            return Err(Error::Parse {
                at: "fuzz config".into(),
                detail: "n and D must be positive".into(),
            });
        }
        Ok(cfg)
    }
}

enum SampleResult {
    Clean,
    Skip,
    Fail(Witness),
}

struct SearchOutcome {
    evaluated: u64,
    skipped: u64,
    first_fail: Option<(u64, Witness)>,
}

/// Evaluates `samples` independent sample indices, possibly in parallel, and
/// returns the lowest-index failure. Each index is evaluated from its own
/// seeded stream, so the outcome does not depend on scheduling.
fn search_samples<F>(samples: u64, jobs: usize, eval: F) -> SearchOutcome
where
    F: Fn(u64) -> SampleResult + Sync,
{
    let jobs = jobs.clamp(1, 64);
    if jobs == 1 || samples < 32 {
        let mut evaluated = 0;
        let mut skipped = 0;
        for idx in 0..samples {
            match eval(idx) {
                SampleResult::Clean => evaluated += 1,
                SampleResult::Skip => skipped += 1,
                SampleResult::Fail(w) => {
                    return SearchOutcome {
                        evaluated: evaluated + 1,
                        skipped,
                        first_fail: Some((idx, w)),
                    }
                }
            }
        }
        return SearchOutcome {
            evaluated,
            skipped,
            first_fail: None,
        };
    }
    let best = AtomicU64::new(u64::MAX);
    let eval_ref = &eval;
    let best_ref = &best;
    let outcomes: Vec<SearchOutcome> = thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|t| {
                scope.spawn(move || {
                    let mut evaluated = 0;
                    let mut skipped = 0;
                    let mut first_fail = None;
                    let mut idx = t as u64;
                    while idx < samples {
                        if best_ref.load(Ordering::Relaxed) < idx {
                            break;
                        }
                        match eval_ref(idx) {
                            SampleResult::Clean => evaluated += 1,
                            SampleResult::Skip => skipped += 1,
                            SampleResult::Fail(w) => {
                                evaluated += 1;
                                best_ref.fetch_min(idx, Ordering::Relaxed);
                                first_fail = Some((idx, w));
                                break;
                            }
                        }
                        idx += jobs as u64;
                    }
                    SearchOutcome {
                        evaluated,
                        skipped,
                        first_fail,
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut merged = SearchOutcome {
        evaluated: 0,
        skipped: 0,
        first_fail: None,
    };
    for o in outcomes {
        merged.evaluated += o.evaluated;
        merged.skipped += o.skipped;
        match (&merged.first_fail, o.first_fail) {
            (None, Some(f)) => merged.first_fail = Some(f),
            (Some((best_idx, _)), Some((idx, w))) if idx < *best_idx => {
                merged.first_fail = Some((idx, w))
            }
            _ => {}
        }
    }
    merged
}

fn campaign_verdict(
    property: Property,
    outcome: SearchOutcome,
    samples: u64,
    skipped_note: &str,
) -> AxiomVerdict {
    match outcome.first_fail {
        Some((idx, mut witness)) => {
            witness.sample = Some(idx);
            assert!(
                verify_witness(property, &witness),
                "internal error: witness for {property:?} does not re-verify"
            );
            let mut v = AxiomVerdict::fail(property, witness);
            v.samples = idx + 1;
            v.note = format!("counterexample at sample {idx}");
            v
        }
        None if outcome.evaluated == 0 => AxiomVerdict::inconclusive(
            property,
            format!("no sample was evaluated ({skipped_note}: {})", outcome.skipped),
        ),
        None => {
            let mut v = AxiomVerdict::pass_budget(
                property,
                samples,
                format!(
                    "no counterexample in {} evaluated samples ({skipped_note}: {})",
                    outcome.evaluated, outcome.skipped
                ),
            );
            v.samples = samples;
            v
        }
    }
}

const STREAM_SP: u64 = 0x5350;
const STREAM_EFF: u64 = 0x4546;
const STREAM_RM: u64 = 0x524d;
const STREAM_NB: u64 = 0x4e42;
const STREAM_IB: u64 = 0x4942;
const STREAM_ANO: u64 = 0x414e;
const STREAM_EF: u64 = 0x4556;
const STREAM_WE: u64 = 0x5745;

// One deviation round against one profile, per property. The fuzz campaigns
// draw a fresh profile per sample and run one round; the per-profile checks
// run many rounds against the same profile.

fn sp_attack<R: Rng>(
    mechanism: &MechanismId,
    profile: &Profile,
    den: u64,
    budget: u64,
    rng: &mut R,
) -> SampleResult {
    let truthful = match mechanism.apply(profile) {
        Ok(m) => m,
        Err(_) => return SampleResult::Skip,
    };
    for agent in 0..profile.n() {
        let ideal = profile.lottery(agent).shares();
        let before = l1_distance(ideal, truthful.row(agent)).expect("dimensions agree");
        if before.is_zero() {
            continue;
        }
        let misreports = misreports_for(profile, agent, truthful.row(agent), den, budget, rng);
        for misreport in misreports {
            let deviated_profile = profile
                .with_lottery(agent, misreport.clone())
                .expect("same length");
            let deviated = match mechanism.apply(&deviated_profile) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let after = l1_distance(ideal, deviated.row(agent)).expect("dimensions agree");
            if after < before {
                let mut w = Witness::new(profile.clone());
                w.mechanism = Some(mechanism.clone());
                w.agent = Some(agent);
                w.misreport = Some(misreport);
                w.matching = Some(truthful.clone());
                w.deviated_matching = Some(deviated);
                w.distances = distance_vector(profile, &truthful).ok();
                w.note = "misreport strictly reduces the deviator's distance".into();
                return SampleResult::Fail(w);
            }
        }
    }
    SampleResult::Clean
}

fn eff_attack(mechanism: &MechanismId, profile: &Profile) -> SampleResult {
    let matching = match mechanism.apply(profile) {
        Ok(m) => m,
        Err(_) => return SampleResult::Skip,
    };
    let verdict = check_efficiency(profile, &matching);
    match verdict.result {
        VerdictResult::Fail => SampleResult::Fail(attach(verdict, mechanism)),
        _ => SampleResult::Clean,
    }
}

fn rm_attack<R: Rng>(mechanism: &MechanismId, profile: &Profile, rng: &mut R) -> SampleResult {
    let mut tried = false;
    for agent in 0..profile.n() {
        for _ in 0..3 {
            let Some(misreport) = rm_perturbation_rng(profile, agent, rng) else {
                continue;
            };
            match check_replacement_monotonicity(mechanism, profile, agent, &misreport) {
                Ok(v) if v.result == VerdictResult::Fail => {
                    return SampleResult::Fail(v.witness.expect("fail has witness"))
                }
                Ok(v) if v.result == VerdictResult::Pass => tried = true,
                Ok(_) => {}
                Err(_) => return SampleResult::Skip,
            }
        }
    }
    if tried {
        SampleResult::Clean
    } else {
        SampleResult::Skip
    }
}

fn nb_attack<R: Rng>(
    mechanism: &MechanismId,
    profile: &Profile,
    den: u64,
    rng: &mut R,
) -> SampleResult {
    for agent in 0..profile.n() {
        let mut candidates = Vec::new();
        if let Some(l) = nb_perturbation_rng(profile, agent, den, rng) {
            candidates.push(l);
        }
        if let Some(l) = rm_perturbation_rng(profile, agent, rng) {
            candidates.push(l);
        }
        candidates.push(random_lottery_rng(profile.n(), den, rng));
        for misreport in candidates {
            match check_non_bossiness(mechanism, profile, agent, &misreport) {
                Ok(v) if v.result == VerdictResult::Fail => {
                    return SampleResult::Fail(v.witness.expect("fail has witness"))
                }
                Ok(_) => {}
                Err(_) => return SampleResult::Skip,
            }
        }
    }
    SampleResult::Clean
}

fn ib_attack<R: Rng>(mechanism: &MechanismId, profile: &Profile, rng: &mut R) -> SampleResult {
    let truthful = match mechanism.apply(profile) {
        Ok(m) => m,
        Err(_) => return SampleResult::Skip,
    };
    let mut tried = false;
    for agent in 0..profile.n() {
        for _ in 0..3 {
            let misreport = between_sample_rng(profile.lottery(agent), truthful.row(agent), rng);
            match check_in_betweenness(mechanism, profile, agent, &misreport) {
                Ok(v) if v.result == VerdictResult::Fail => {
                    return SampleResult::Fail(v.witness.expect("fail has witness"))
                }
                Ok(v) if v.result == VerdictResult::Pass => tried = true,
                Ok(_) => {}
                Err(_) => return SampleResult::Skip,
            }
        }
    }
    if tried {
        SampleResult::Clean
    } else {
        SampleResult::Skip
    }
}

fn ano_attack<R: Rng>(mechanism: &MechanismId, profile: &Profile, rng: &mut R) -> SampleResult {
    let n = profile.n();
    let mut perms: Vec<Permutation> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            perms.push(Permutation::transposition(n, i, j).expect("valid transposition"));
        }
    }
    perms.push(crate::profiles::random_permutation_rng(n, rng));
    for perm in perms {
        match check_anonymity(mechanism, profile, &perm) {
            Ok(v) if v.result == VerdictResult::Fail => {
                return SampleResult::Fail(v.witness.expect("fail has witness"))
            }
            Ok(_) => {}
            Err(_) => return SampleResult::Skip,
        }
    }
    SampleResult::Clean
}

fn ef_attack(mechanism: &MechanismId, profile: &Profile) -> SampleResult {
    let matching = match mechanism.apply(profile) {
        Ok(m) => m,
        Err(_) => return SampleResult::Skip,
    };
    let verdict = check_envy_freeness(profile, &matching);
    match verdict.result {
        VerdictResult::Fail => SampleResult::Fail(attach(verdict, mechanism)),
        _ => SampleResult::Clean,
    }
}

/// All misreports tried for one agent in one sample: the full grid when it
/// fits the budget, otherwise a structured family (unit vectors, the other
/// agents' lotteries, box samples toward the outcome, premise-respecting
/// perturbations, random grid lotteries).
fn misreports_for<R: Rng>(
    profile: &Profile,
    agent: usize,
    outcome_row: &[Rational],
    den: u64,
    budget: u64,
    rng: &mut R,
) -> Vec<IdealLottery> {
    let n = profile.n();
    let mut out: Vec<IdealLottery> = Vec::new();
    if composition_count(den, n) <= budget {
        for parts in compositions(den, n) {
            out.push(IdealLottery::from_grid(&parts, den).expect("grid lottery"));
        }
        return out;
    }
    let push = |l: IdealLottery, out: &mut Vec<IdealLottery>| {
        if !out.contains(&l) {
            out.push(l);
        }
    };
    for a in 0..n {
        let mut parts = vec![0u64; n];
        parts[a] = den;
        push(IdealLottery::from_grid(&parts, den).expect("unit lottery"), &mut out);
    }
    for j in 0..n {
        if j != agent {
            push(profile.lottery(j).clone(), &mut out);
        }
    }
    for _ in 0..2 {
        push(between_sample_rng(profile.lottery(agent), outcome_row, rng), &mut out);
    }
    if let Some(l) = rm_perturbation_rng(profile, agent, rng) {
        push(l, &mut out);
    }
    while (out.len() as u64) < budget {
        push(random_lottery_rng(n, den, rng), &mut out);
    }
    out.truncate(budget as usize);
    out
}

/// Strategy-proofness falsifier: samples profiles and hunts for a misreport
/// that strictly reduces the deviating agent's distance to their true ideal.
pub fn falsify_strategy_proofness(mechanism: &MechanismId, cfg: &FuzzConfig) -> AxiomVerdict {
    falsify_property(mechanism, Property::StrategyProof, cfg)
}

/// Generic campaign for one property of one mechanism: fresh profile per
/// sample, one deviation round each.
pub fn falsify_property(
    mechanism: &MechanismId,
    property: Property,
    cfg: &FuzzConfig,
) -> AxiomVerdict {
    if property == Property::WelfareEquivalent {
        return AxiomVerdict::inconclusive(
            Property::WelfareEquivalent,
            "welfare equivalence needs two mechanisms; use falsify_welfare_equivalence",
        );
    }
    let eval = |idx: u64| -> SampleResult {
        let mut rng = stream_rng(cfg.seed, property_stream(property), idx);
        let profile = random_profile_rng(cfg.n, cfg.denominator, &mut rng);
        attack(mechanism, property, &profile, cfg, &mut rng)
    };
    let outcome = search_samples(cfg.samples, cfg.jobs, eval);
    campaign_verdict(property, outcome, cfg.samples, skip_note(property))
}

/// One property of one mechanism against one fixed profile: deviation rounds
/// instead of fresh profiles. Efficiency and envy freeness are decided by a
/// single exact check; the quantified properties stay budget-relative.
pub fn check_property_on_profile(
    mechanism: &MechanismId,
    property: Property,
    profile: &Profile,
    cfg: &FuzzConfig,
) -> AxiomVerdict {
    if property == Property::WelfareEquivalent {
        return AxiomVerdict::inconclusive(
            Property::WelfareEquivalent,
            "welfare equivalence needs two mechanisms",
        );
    }
    match property {
        Property::Efficient | Property::EnvyFree => {
            let matching = match mechanism.apply(profile) {
                Ok(m) => m,
                Err(e) => return AxiomVerdict::inconclusive(property, e.to_string()),
            };
            let mut verdict = if property == Property::Efficient {
                check_efficiency(profile, &matching)
            } else {
                check_envy_freeness(profile, &matching)
            };
            if let Some(w) = verdict.witness.as_mut() {
                w.mechanism = Some(mechanism.clone());
                assert!(
                    verify_witness(property, w),
                    "internal error: witness for {property:?} does not re-verify"
                );
            }
            verdict
        }
        _ => {
            let rounds = cfg.samples.max(1);
            let eval = |idx: u64| -> SampleResult {
                let mut rng = stream_rng(cfg.seed, property_stream(property) ^ 0xF1, idx);
                attack(mechanism, property, profile, cfg, &mut rng)
            };
            let outcome = search_samples(rounds, cfg.jobs, eval);
            let mut verdict = campaign_verdict(property, outcome, rounds, skip_note(property));
            if verdict.result == VerdictResult::Pass {
                verdict.note = format!("{} (single profile)", verdict.note);
            }
            verdict
        }
    }
}

fn attack<R: Rng>(
    mechanism: &MechanismId,
    property: Property,
    profile: &Profile,
    cfg: &FuzzConfig,
    rng: &mut R,
) -> SampleResult {
    match property {
        Property::StrategyProof => {
            sp_attack(mechanism, profile, cfg.denominator, cfg.misreport_budget, rng)
        }
        Property::Efficient => eff_attack(mechanism, profile),
        Property::ReplacementMonotonic => rm_attack(mechanism, profile, rng),
        Property::NonBossy => nb_attack(mechanism, profile, cfg.denominator, rng),
        Property::InBetween => ib_attack(mechanism, profile, rng),
        Property::Anonymous => ano_attack(mechanism, profile, rng),
        Property::EnvyFree => ef_attack(mechanism, profile),
        Property::WelfareEquivalent => SampleResult::Skip,
    }
}

fn property_stream(property: Property) -> u64 {
    match property {
        Property::StrategyProof => STREAM_SP,
        Property::Efficient => STREAM_EFF,
        Property::ReplacementMonotonic => STREAM_RM,
        Property::NonBossy => STREAM_NB,
        Property::InBetween => STREAM_IB,
        Property::Anonymous => STREAM_ANO,
        Property::EnvyFree => STREAM_EF,
        Property::WelfareEquivalent => STREAM_WE,
    }
}

fn skip_note(property: Property) -> &'static str {
    match property {
        Property::ReplacementMonotonic | Property::InBetween => "premise-less samples",
        _ => "unsupported samples",
    }
}

fn attach(verdict: AxiomVerdict, mechanism: &MechanismId) -> Witness {
    let mut w = verdict.witness.expect("fail has witness");
    w.mechanism = Some(mechanism.clone());
    w
}

/// Welfare-equivalence falsifier over sampled profiles.
pub fn falsify_welfare_equivalence(
    first: &MechanismId,
    second: &MechanismId,
    cfg: &FuzzConfig,
) -> AxiomVerdict {
    let eval = |idx: u64| -> SampleResult {
        let mut rng = stream_rng(cfg.seed, STREAM_WE, idx);
        let profile = random_profile_rng(cfg.n, cfg.denominator, &mut rng);
        match check_welfare_equivalence(first, second, &profile) {
            Ok(v) if v.result == VerdictResult::Fail => {
                SampleResult::Fail(v.witness.expect("fail has witness"))
            }
            Ok(_) => SampleResult::Clean,
            Err(_) => SampleResult::Skip,
        }
    };
    let outcome = search_samples(cfg.samples, cfg.jobs, eval);
    campaign_verdict(
        Property::WelfareEquivalent,
        outcome,
        cfg.samples,
        "unsupported samples",
    )
}

// ---------------------------------------------------------------------------
// The four-mechanism property table.
// ---------------------------------------------------------------------------

pub const TABLE1_MECHANISMS: [MechanismKind; 4] = [
    MechanismKind::Urc,
    MechanismKind::Sdc,
    MechanismKind::Pdc,
    MechanismKind::EqualDivision,
];

pub const TABLE1_PROPERTIES: [Property; 7] = [
    Property::StrategyProof,
    Property::Efficient,
    Property::ReplacementMonotonic,
    Property::NonBossy,
    Property::InBetween,
    Property::Anonymous,
    Property::EnvyFree,
];

/// The published pattern: which mechanism satisfies which property.
pub fn expected_table1_pass(mechanism: &MechanismKind, property: Property) -> bool {
    !matches!(
        (mechanism, property),
        (MechanismKind::Sdc, Property::Anonymous)
            | (MechanismKind::Sdc, Property::EnvyFree)
            | (MechanismKind::Pdc, Property::StrategyProof)
            | (MechanismKind::Pdc, Property::EnvyFree)
            | (MechanismKind::EqualDivision, Property::Efficient)
    )
}

/// Known counterexample for an expected-fail cell, checked before fuzzing so
/// the table's crosses are deterministic and independently replayable.
fn pinned_counterexample(mechanism: &MechanismKind, property: Property) -> Option<AxiomVerdict> {
    let id = MechanismId::new(mechanism.clone());
    match (mechanism, property) {
        (MechanismKind::Sdc, Property::Anonymous) => {
            let profile = sdc_asymmetry_fixture();
            let swap = Permutation::transposition(3, 0, 1).expect("three agents");
            check_anonymity(&id, &profile, &swap).ok()
        }
        (MechanismKind::Sdc, Property::EnvyFree) => {
            let profile = sdc_asymmetry_fixture();
            let matching = id.apply(&profile).ok()?;
            let mut verdict = check_envy_freeness(&profile, &matching);
            if let Some(w) = verdict.witness.as_mut() {
                w.mechanism = Some(id.clone());
            }
            Some(verdict)
        }
        (MechanismKind::Pdc, Property::StrategyProof) => {
            let (profile, agent, misreport) = pdc_manipulation_fixture();
            let truthful = id.apply(&profile).ok()?;
            let deviated_profile = profile.with_lottery(agent, misreport.clone()).ok()?;
            let deviated = id.apply(&deviated_profile).ok()?;
            let ideal = profile.lottery(agent).shares();
            let before = l1_distance(ideal, truthful.row(agent)).ok()?;
            let after = l1_distance(ideal, deviated.row(agent)).ok()?;
            if after >= before {
                return None;
            }
            let mut w = Witness::new(profile.clone());
            w.mechanism = Some(id.clone());
            w.agent = Some(agent);
            w.misreport = Some(misreport);
            w.matching = Some(truthful);
            w.deviated_matching = Some(deviated);
            w.note = "exaggerating the over-demanded object pays off".into();
            Some(AxiomVerdict::fail(Property::StrategyProof, w))
        }
        (MechanismKind::Pdc, Property::EnvyFree) => {
            let profile = crate::fixtures::load_fixture(crate::fixtures::FixtureId::PdcEnvy).profile;
            let matching = id.apply(&profile).ok()?;
            let mut verdict = check_envy_freeness(&profile, &matching);
            if let Some(w) = verdict.witness.as_mut() {
                w.mechanism = Some(id.clone());
            }
            Some(verdict)
        }
        (MechanismKind::EqualDivision, Property::Efficient) => {
            let (profile, matching) = equal_division_on_example1();
            let mut verdict = check_efficiency(&profile, &matching);
            if let Some(w) = verdict.witness.as_mut() {
                w.mechanism = Some(id.clone());
            }
            Some(verdict)
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table1Cell {
    pub mechanism: MechanismKind,
    pub property: Property,
    pub verdict: AxiomVerdict,
    pub expected_pass: bool,
}

impl Table1Cell {
    /// Whether the computed verdict agrees with the published pattern.
    pub fn matches_expected(&self) -> bool {
        match self.verdict.result {
            VerdictResult::Pass => self.expected_pass,
            VerdictResult::Fail => !self.expected_pass,
            VerdictResult::Inconclusive => false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table1 {
    pub config: FuzzConfig,
    pub cells: Vec<Table1Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Table1Outcome {
    /// Every cell matches the published pattern.
    Match,
    /// Some cell contradicts it (a Pass where a Fail is published or vice
    /// versa).
    Mismatch(Vec<(MechanismKind, Property)>),
    /// No contradiction, but some cells are inconclusive (e.g. zero budget).
    Inconclusive(Vec<(MechanismKind, Property)>),
}

impl Table1 {
    pub fn outcome(&self) -> Table1Outcome {
        let mut mismatched = Vec::new();
        let mut inconclusive = Vec::new();
        for cell in &self.cells {
            match cell.verdict.result {
                VerdictResult::Inconclusive => {
                    inconclusive.push((cell.mechanism.clone(), cell.property))
                }
                _ if !cell.matches_expected() => {
                    mismatched.push((cell.mechanism.clone(), cell.property))
                }
                _ => {}
            }
        }
        if !mismatched.is_empty() {
            Table1Outcome::Mismatch(mismatched)
        } else if !inconclusive.is_empty() {
            Table1Outcome::Inconclusive(inconclusive)
        } else {
            Table1Outcome::Match
        }
    }
}

/// Runs the full four-mechanism, seven-property falsification table.
/// Expected failures are backed by pinned counterexamples first and fuzz
/// otherwise; expected passes get the whole sample budget.
pub fn run_table1(cfg: &FuzzConfig) -> Table1 {
    let mut cells = Vec::with_capacity(TABLE1_MECHANISMS.len() * TABLE1_PROPERTIES.len());
    for (mi, mechanism) in TABLE1_MECHANISMS.iter().enumerate() {
        for (pi, &property) in TABLE1_PROPERTIES.iter().enumerate() {
            let expected_pass = expected_table1_pass(mechanism, property);
            let pinned = if expected_pass {
                None
            } else {
                pinned_counterexample(mechanism, property)
                    .filter(|v| v.result == VerdictResult::Fail)
            };
            let verdict = match pinned {
                Some(mut v) => {
                    assert!(
                        verify_witness(property, v.witness.as_ref().expect("fail has witness")),
                        "internal error: pinned witness does not re-verify"
                    );
                    v.note = "pinned counterexample".into();
                    v
                }
                None => {
                    let cell_cfg = FuzzConfig {
                        seed: cfg
                            .seed
                            .wrapping_add((mi as u64 + 1).wrapping_mul(1000) + pi as u64),
                        ..cfg.clone()
                    };
                    falsify_property(&MechanismId::new(mechanism.clone()), property, &cell_cfg)
                }
            };
            cells.push(Table1Cell {
                mechanism: mechanism.clone(),
                property,
                verdict,
                expected_pass,
            });
        }
    }
    Table1 {
        config: cfg.clone(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{equal_division, meu_mechanism, Sequence};
    use crate::rational::rat;

    fn example1() -> Profile {
        Profile::from_grid(&[&[6, 2, 2], &[5, 4, 1], &[2, 0, 8]], 10).unwrap()
    }

    fn urc_id() -> MechanismId {
        MechanismId::new(MechanismKind::Urc)
    }

    #[test]
    fn efficiency_passes_on_golden_run_and_fails_on_equal_division() {
        let c = example1();
        let m = urc_id().apply(&c).unwrap();
        assert!(check_efficiency(&c, &m).passed());

        let eq = equal_division(&c);
        let verdict = check_efficiency(&c, &eq);
        assert_eq!(verdict.result, VerdictResult::Fail);
        let w = verdict.witness.unwrap();
        assert!(verify_witness(Property::Efficient, &w));
    }

    #[test]
    fn efficiency_passes_on_unanimous_peaks() {
        let c = Profile::from_grid(&[&[5, 5, 0], &[5, 0, 5], &[0, 5, 5]], 10).unwrap();
        let m = urc_id().apply(&c).unwrap();
        assert!(check_efficiency(&c, &m).passed());
    }

    #[test]
    fn improvement_fixes_the_two_by_two_swap() {
        let c = Profile::from_grid(&[&[1, 0], &[0, 1]], 1).unwrap();
        let p = RandomMatching::from_grid(&[&[0, 1], &[1, 0]], 1).unwrap();
        let q = improve_to_same_sided(&c, &p);
        let id = RandomMatching::from_grid(&[&[1, 0], &[0, 1]], 1).unwrap();
        assert_eq!(q, id);
        // Same-sided inputs come back unchanged.
        assert_eq!(improve_to_same_sided(&c, &id), id);
    }

    #[test]
    fn improvement_dominates_equal_division() {
        let c = example1();
        let eq = equal_division(&c);
        let q = improve_to_same_sided(&c, &eq);
        assert!(is_same_sided(&c, &q));
        let before = distance_vector(&c, &eq).unwrap();
        let after = distance_vector(&c, &q).unwrap();
        assert!(before.iter().zip(&after).all(|(b, a)| a <= b));
        assert!(before.iter().zip(&after).any(|(b, a)| a < b));
    }

    #[test]
    fn brute_force_agrees_with_same_sidedness_on_small_grids() {
        // Same-sided: no dominator even among all grid matchings.
        let c = example1();
        let m = urc_id().apply(&c).unwrap();
        assert!(brute_force_dominance(&c, &m, 10).unwrap().is_none());

        // Not same-sided: equal division is dominated by some grid matching.
        let eq = equal_division(&c);
        let dominator = brute_force_dominance(&c, &eq, 10).unwrap().unwrap();
        let before = distance_vector(&c, &eq).unwrap();
        let after = distance_vector(&c, &dominator).unwrap();
        assert!(before.iter().zip(&after).all(|(b, a)| a <= b));
        assert!(before.iter().zip(&after).any(|(b, a)| a < b));

        // Trivial single-agent instance.
        let solo = Profile::from_grid(&[&[1]], 1).unwrap();
        let one = RandomMatching::from_grid(&[&[1]], 1).unwrap();
        assert!(brute_force_dominance(&solo, &one, 4).unwrap().is_none());
    }

    #[test]
    fn brute_force_rejects_large_instances() {
        let c = random_profile_rng(4, 4, &mut stream_rng(1, 2, 3));
        let m = urc_id().apply(&c).unwrap();
        assert!(matches!(
            brute_force_dominance(&c, &m, 4),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn replacement_monotonicity_fails_for_the_order_flipping_mechanism() {
        let c = Profile::from_grid(&[&[4, 4, 2], &[4, 4, 2], &[4, 4, 2]], 10).unwrap();
        let uniform = IdealLottery::new(vec![rat(1, 3); 3]).unwrap();
        let id = MechanismId::new(MechanismKind::Except);
        let verdict = check_replacement_monotonicity(&id, &c, 0, &uniform).unwrap();
        assert_eq!(verdict.result, VerdictResult::Fail);
        assert!(verify_witness(
            Property::ReplacementMonotonic,
            verdict.witness.as_ref().unwrap()
        ));
    }

    #[test]
    fn replacement_monotonicity_holds_for_fixed_assignment_and_urc_fixture() {
        // The fixed-assignment mechanism depends only on the excess-demand
        // set, which the premises freeze.
        let c = Profile::from_grid(&[&[6, 2, 2], &[6, 2, 2], &[6, 2, 2]], 10).unwrap();
        let me = MechanismId::new(MechanismKind::Me);
        let misreport = IdealLottery::from_grid(&[5, 3, 2], 10).unwrap();
        let verdict = check_replacement_monotonicity(&me, &c, 1, &misreport).unwrap();
        assert_eq!(verdict.result, VerdictResult::Pass);

        let urc_verdict =
            check_replacement_monotonicity(&urc_id(), &example1(), 0, &IdealLottery::from_grid(&[5, 3, 2], 10).unwrap())
                .unwrap();
        assert_ne!(urc_verdict.result, VerdictResult::Fail);
    }

    #[test]
    fn non_bossiness_fails_for_fixed_assignment() {
        // Excess demand starts as exactly the first object; agent 3 flips the
        // set without moving their own constant allocation.
        let c = Profile::from_grid(&[&[6, 2, 2], &[6, 2, 2], &[6, 2, 2]], 10).unwrap();
        let misreport = IdealLottery::from_grid(&[0, 8, 2], 10).unwrap();
        let me = MechanismId::new(MechanismKind::Me);
        let verdict = check_non_bossiness(&me, &c, 2, &misreport).unwrap();
        assert_eq!(verdict.result, VerdictResult::Fail);
        assert!(verify_witness(Property::NonBossy, verdict.witness.as_ref().unwrap()));
    }

    #[test]
    fn non_bossiness_vacuous_when_own_allocation_moves() {
        // The misreport changes the deviator's own excess-demand allocation,
        // so the premise fails and the verdict is a vacuous pass.
        let c = Profile::from_grid(&[&[3, 5, 2], &[7, 2, 1], &[1, 4, 5]], 10).unwrap();
        let misreport = IdealLottery::from_grid(&[7, 3, 0], 10).unwrap();
        let verdict = check_non_bossiness(&urc_id(), &c, 1, &misreport).unwrap();
        assert_eq!(verdict.result, VerdictResult::Pass);

        // Identity misreport trivially passes.
        let same = c.lottery(1).clone();
        let verdict = check_non_bossiness(&urc_id(), &c, 1, &same).unwrap();
        assert_eq!(verdict.result, VerdictResult::Pass);
    }

    #[test]
    fn in_betweenness_keeps_urc_allocation_fixed() {
        let c = example1();
        let m = urc_id().apply(&c).unwrap();
        // Midpoint of the box for agent 1.
        let mid = IdealLottery::new(vec![rat(1, 2), rat(3, 10), rat(1, 5)]).unwrap();
        let verdict = check_in_betweenness(&urc_id(), &c, 0, &mid).unwrap();
        assert_eq!(verdict.result, VerdictResult::Pass);
        let deviated = c.with_lottery(0, mid).unwrap();
        assert_eq!(urc_id().apply(&deviated).unwrap().row(0), m.row(0));

        // Endpoints.
        for endpoint in [
            c.lottery(0).clone(),
            IdealLottery::new(m.row(0).to_vec()).unwrap(),
        ] {
            let verdict = check_in_betweenness(&urc_id(), &c, 0, &endpoint).unwrap();
            assert_eq!(verdict.result, VerdictResult::Pass);
        }

        // Out-of-box misreports are inconclusive.
        let outside = IdealLottery::from_grid(&[0, 0, 10], 10).unwrap();
        let verdict = check_in_betweenness(&urc_id(), &c, 0, &outside).unwrap();
        assert_eq!(verdict.result, VerdictResult::Inconclusive);
    }

    #[test]
    fn anonymity_holds_for_urc_and_fails_for_serial_dictatorship() {
        let c = example1();
        let swap = Permutation::transposition(3, 0, 1).unwrap();
        let verdict = check_anonymity(&urc_id(), &c, &swap).unwrap();
        assert_eq!(verdict.result, VerdictResult::Pass);
        let identity = Permutation::identity(3);
        assert!(check_anonymity(&urc_id(), &c, &identity).unwrap().passed());

        let sdc = MechanismId::new(MechanismKind::Sdc);
        let fixture = sdc_asymmetry_fixture();
        let verdict = check_anonymity(&sdc, &fixture, &swap).unwrap();
        assert_eq!(verdict.result, VerdictResult::Fail);
        assert!(verify_witness(Property::Anonymous, verdict.witness.as_ref().unwrap()));
    }

    #[test]
    fn envy_freeness_cases() {
        let c = example1();
        let m = urc_id().apply(&c).unwrap();
        assert!(check_envy_freeness(&c, &m).passed());

        let solo = Profile::from_grid(&[&[1]], 1).unwrap();
        let one = RandomMatching::from_grid(&[&[1]], 1).unwrap();
        assert!(check_envy_freeness(&solo, &one).passed());

        let envy_profile =
            crate::fixtures::load_fixture(crate::fixtures::FixtureId::PdcEnvy).profile;
        let pdc = MechanismId::new(MechanismKind::Pdc);
        let matching = pdc.apply(&envy_profile).unwrap();
        let verdict = check_envy_freeness(&envy_profile, &matching);
        assert_eq!(verdict.result, VerdictResult::Fail);
        assert_eq!(verdict.witness.unwrap().envy, Some((3, 0)));
    }

    #[test]
    fn welfare_equivalence_cases() {
        let e = crate::mechanisms::meu_special_profile();
        let meu = MechanismId::new(MechanismKind::Meu);
        assert!(check_welfare_equivalence(&meu, &urc_id(), &e).unwrap().passed());
        let d = distance_vector(&e, &meu_mechanism(&e).unwrap()).unwrap();
        assert_eq!(d, vec![rat(2, 3), rat(2, 3), rat(0, 1)]);

        let sdc = MechanismId::new(MechanismKind::Sdc);
        let verdict = check_welfare_equivalence(&sdc, &urc_id(), &example1()).unwrap();
        assert_eq!(verdict.result, VerdictResult::Fail);
        assert!(verify_witness(
            Property::WelfareEquivalent,
            verdict.witness.as_ref().unwrap()
        ));
    }

    #[test]
    fn urc_sequence_variants_are_welfare_equivalent_under_fuzz() {
        let forward = MechanismId::with_sequences(
            MechanismKind::Urc,
            Sequence::new(vec![0, 1, 2]).unwrap(),
            Sequence::new(vec![0, 1, 2]).unwrap(),
        )
        .unwrap();
        let reversed = MechanismId::with_sequences(
            MechanismKind::Urc,
            Sequence::new(vec![2, 1, 0]).unwrap(),
            Sequence::new(vec![2, 1, 0]).unwrap(),
        )
        .unwrap();
        let cfg = FuzzConfig {
            samples: 150,
            ..FuzzConfig::default()
        };
        let verdict = falsify_welfare_equivalence(&forward, &reversed, &cfg);
        assert_eq!(verdict.result, VerdictResult::Pass);
    }

    #[test]
    fn sp_falsifier_finds_the_proportional_manipulation() {
        let cfg = FuzzConfig {
            n: 2,
            denominator: 10,
            samples: 200,
            seed: 3,
            misreport_budget: 80,
            jobs: 1,
        };
        let verdict = falsify_strategy_proofness(&MechanismId::new(MechanismKind::Pdc), &cfg);
        assert_eq!(verdict.result, VerdictResult::Fail);
        assert!(verify_witness(Property::StrategyProof, verdict.witness.as_ref().unwrap()));
    }

    #[test]
    fn sp_falsifier_finds_the_patched_mechanism_manipulation() {
        // The manipulable profile differs from the special one in a single
        // lottery, which the "other agents' lotteries" move reaches.
        let e = crate::mechanisms::meu_special_profile();
        let c1 = IdealLottery::new(vec![rat(2, 3), rat(0, 1), rat(1, 3)]).unwrap();
        let c = e.with_lottery(0, c1).unwrap();
        let meu = MechanismId::new(MechanismKind::Meu);
        let truthful = meu.apply(&c).unwrap();
        let before = l1_distance(c.lottery(0).shares(), truthful.row(0)).unwrap();
        let lied = meu.apply(&e).unwrap();
        let after = l1_distance(c.lottery(0).shares(), lied.row(0)).unwrap();
        assert!(after < before);

        let mut w = Witness::new(c);
        w.mechanism = Some(meu);
        w.agent = Some(0);
        w.misreport = Some(e.lottery(0).clone());
        assert!(verify_witness(Property::StrategyProof, &w));
    }

    #[test]
    fn me_mechanism_is_replacement_monotonic_under_fuzz() {
        let cfg = FuzzConfig {
            samples: 60,
            ..FuzzConfig::default()
        };
        let verdict = falsify_property(
            &MechanismId::new(MechanismKind::Me),
            Property::ReplacementMonotonic,
            &cfg,
        );
        assert_ne!(verdict.result, VerdictResult::Fail);
    }

    #[test]
    fn fuzz_campaigns_are_deterministic() {
        let cfg = FuzzConfig {
            samples: 40,
            ..FuzzConfig::default()
        };
        let a = falsify_property(&MechanismId::new(MechanismKind::Sdc), Property::EnvyFree, &cfg);
        let b = falsify_property(&MechanismId::new(MechanismKind::Sdc), Property::EnvyFree, &cfg);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn parallel_jobs_do_not_change_the_verdict() {
        let base = FuzzConfig {
            samples: 120,
            ..FuzzConfig::default()
        };
        let par = FuzzConfig { jobs: 4, ..base.clone() };
        let sdc = MechanismId::new(MechanismKind::Sdc);
        let a = falsify_property(&sdc, Property::EnvyFree, &base);
        let b = falsify_property(&sdc, Property::EnvyFree, &par);
        assert_eq!(a.result, b.result);
        assert_eq!(
            a.witness.map(|w| serde_json::to_string(&w).unwrap()),
            b.witness.map(|w| serde_json::to_string(&w).unwrap())
        );
    }

    #[test]
    fn fuzz_config_parses_cli_form() {
        let cfg = FuzzConfig::parse("n=3,D=6,samples=500,seed=7").unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.denominator, 6);
        assert_eq!(cfg.samples, 500);
        assert_eq!(cfg.seed, 7);
        assert!(FuzzConfig::parse("bogus=1").is_err());
        assert!(FuzzConfig::parse("n=0").is_err());
    }

    #[test]
    fn zero_budget_table_is_inconclusive_except_pinned_fails() {
        let cfg = FuzzConfig {
            samples: 0,
            ..FuzzConfig::default()
        };
        let table = run_table1(&cfg);
        for cell in &table.cells {
            if cell.expected_pass {
                assert_eq!(cell.verdict.result, VerdictResult::Inconclusive);
            } else {
                assert_eq!(cell.verdict.result, VerdictResult::Fail);
                assert!(cell.verdict.witness.is_some());
            }
        }
        assert!(matches!(table.outcome(), Table1Outcome::Inconclusive(_)));
    }

    #[test]
    fn fixed_assignment_me_check_is_skipped_outside_three_agents() {
        let cfg = FuzzConfig {
            n: 4,
            samples: 5,
            ..FuzzConfig::default()
        };
        let verdict = falsify_property(&MechanismId::new(MechanismKind::Me), Property::EnvyFree, &cfg);
        assert_eq!(verdict.result, VerdictResult::Inconclusive);
    }
}
