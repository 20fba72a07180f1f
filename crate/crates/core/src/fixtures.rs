//! Built-in benchmark instances with their expected outcomes, and a
//! reproduction harness that recomputes each one and reports a field-level
//! diff.
//!
//! Each fixture pins exact rational values: golden matchings for the two-phase
//! mechanisms, the welfare non-bossiness pair, the replacement-monotonicity
//! and envy failures, the strategy-proofness failure of the patched mechanism,
//! the infeasibility of running the uniform rule per object, and the
//! impossibility of any efficient rule that reads only excess-supply ideals.

use std::collections::BTreeSet;

use num::{One, Zero};

use crate::error::{Error, Result};
use crate::json::default_object_names;
use crate::mechanisms::{
    equal_division, except_mechanism, meu_mechanism, meu_special_matching, meu_special_profile,
    sdc, urc, urc_phase1, Sequence,
};
use crate::model::{
    classify_objects, distance_vector, l1_distance, IdealLottery, Profile, RandomMatching,
};
use crate::rational::{format_rational, rat, Rational};
use crate::uniform::{uniform_rule, PeakVector};

/// Identifies one built-in instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureId {
    /// Three-agent golden run of the two-phase uniform-rule mechanism.
    Example1,
    /// Serial dictatorship on the same profile.
    SdcExample,
    /// Welfare non-bossiness failure pair for the uniform-rule mechanism.
    NonBossyA2,
    /// Running the uniform rule per object violates agent feasibility.
    GurInfeasible,
    /// The patched mechanism: welfare equivalent but not strategy proof.
    ProfileE,
    /// Replacement-monotonicity failure of the order-flipping mechanism.
    ExceptRm,
    /// Four-agent proportional division where the small agent envies.
    PdcEnvy,
    /// No efficient rule can depend only on excess-supply ideals.
    EsImpossible,
}

impl FixtureId {
    pub const ALL: [FixtureId; 8] = [
        FixtureId::Example1,
        FixtureId::SdcExample,
        FixtureId::NonBossyA2,
        FixtureId::GurInfeasible,
        FixtureId::ProfileE,
        FixtureId::ExceptRm,
        FixtureId::PdcEnvy,
        FixtureId::EsImpossible,
    ];

    pub fn cli_id(&self) -> &'static str {
        match self {
            FixtureId::Example1 => "example1",
            FixtureId::SdcExample => "sdc-example",
            FixtureId::NonBossyA2 => "nonbossy-a2",
            FixtureId::GurInfeasible => "gur-infeasible",
            FixtureId::ProfileE => "profile-e",
            FixtureId::ExceptRm => "except-rm",
            FixtureId::PdcEnvy => "pdc-envy",
            FixtureId::EsImpossible => "es-impossible",
        }
    }

    pub fn parse(id: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.cli_id() == id)
            .ok_or_else(|| Error::UnknownFixture(id.into()))
    }
}

/// A fixture's profile plus the expected matching when one is pinned.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub id: FixtureId,
    pub profile: Profile,
    pub expected_matching: Option<RandomMatching>,
    pub description: &'static str,
}

fn example1_profile() -> Profile {
    Profile::from_grid(&[&[6, 2, 2], &[5, 4, 1], &[2, 0, 8]], 10).unwrap()
}

fn nonbossy_profile() -> Profile {
    Profile::from_grid(&[&[3, 5, 2], &[7, 2, 1], &[1, 4, 5]], 10).unwrap()
}

fn gur_profile() -> Profile {
    Profile::from_grid(&[&[2, 6, 2], &[4, 6, 0], &[0, 2, 8]], 10).unwrap()
}

fn except_profile() -> Profile {
    Profile::from_grid(&[&[4, 4, 2], &[4, 4, 2], &[4, 4, 2]], 10).unwrap()
}

fn pdc_envy_profile() -> Profile {
    Profile::from_grid(&[&[6, 0, 0, 0], &[6, 0, 0, 0], &[6, 0, 0, 0], &[2, 3, 1, 0]], 6).unwrap()
}

fn es_impossible_profile() -> Profile {
    Profile::from_grid(&[&[0, 2, 0], &[0, 0, 2], &[0, 1, 1]], 2).unwrap()
}

/// The profile in which only agent `j` demands object b (which is unanimous)
/// and everyone puts nothing on object a (which is in excess supply).
fn es_witness_profile(j: usize) -> Profile {
    let rows: Vec<Vec<u64>> = (0..3)
        .map(|i| if i == j { vec![0, 1, 0] } else { vec![0, 0, 1] })
        .collect();
    let refs: Vec<&[u64]> = rows.iter().map(|r| r.as_slice()).collect();
    Profile::from_grid(&refs, 1).unwrap()
}

pub fn load_fixture(id: FixtureId) -> Fixture {
    match id {
        FixtureId::Example1 => Fixture {
            id,
            profile: example1_profile(),
            expected_matching: Some(
                RandomMatching::from_grid(&[&[4, 4, 2], &[4, 5, 1], &[2, 1, 7]], 10).unwrap(),
            ),
            description: "golden two-phase uniform-rule run",
        },
        FixtureId::SdcExample => Fixture {
            id,
            profile: example1_profile(),
            expected_matching: Some(
                RandomMatching::from_grid(&[&[6, 2, 2], &[4, 5, 1], &[0, 3, 7]], 10).unwrap(),
            ),
            description: "golden serial-dictatorship run",
        },
        FixtureId::NonBossyA2 => Fixture {
            id,
            profile: nonbossy_profile(),
            expected_matching: Some(
                RandomMatching::from_grid(&[&[3, 4, 3], &[6, 2, 2], &[1, 4, 5]], 10).unwrap(),
            ),
            description: "welfare non-bossiness failure pair",
        },
        FixtureId::GurInfeasible => Fixture {
            id,
            profile: gur_profile(),
            expected_matching: None,
            description: "per-object uniform rule violates agent feasibility",
        },
        FixtureId::ProfileE => Fixture {
            id,
            profile: meu_special_profile(),
            expected_matching: Some(meu_special_matching()),
            description: "welfare-equivalent but manipulable patched mechanism",
        },
        FixtureId::ExceptRm => Fixture {
            id,
            profile: except_profile(),
            expected_matching: None,
            description: "replacement-monotonicity failure of the order-flipping mechanism",
        },
        FixtureId::PdcEnvy => Fixture {
            id,
            profile: pdc_envy_profile(),
            expected_matching: None,
            description: "proportional division where the small agent envies",
        },
        FixtureId::EsImpossible => Fixture {
            id,
            profile: es_impossible_profile(),
            expected_matching: None,
            description: "no efficient rule reads only excess-supply ideals",
        },
    }
}

/// One recomputed field compared against its pinned value.
#[derive(Debug, Clone)]
pub struct ReproCheck {
    pub field: String,
    pub expected: String,
    pub actual: String,
    pub ok: bool,
}

impl ReproCheck {
    fn new(field: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        let expected = expected.into();
        let actual = actual.into();
        let ok = expected == actual;
        Self {
            field: field.into(),
            expected,
            actual,
            ok,
        }
    }
}

/// Structural diff of a fixture's recomputation against its pinned values.
#[derive(Debug, Clone)]
pub struct ReproReport {
    pub fixture: &'static str,
    pub checks: Vec<ReproCheck>,
}

impl ReproReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

fn fmt_row(row: &[Rational]) -> String {
    let parts: Vec<String> = row.iter().map(format_rational).collect();
    format!("({})", parts.join(", "))
}

fn fmt_object_set(set: &BTreeSet<usize>, n: usize) -> String {
    let names = default_object_names(n);
    let parts: Vec<&str> = set.iter().map(|&a| names[a].as_str()).collect();
    format!("{{{}}}", parts.join(", "))
}

fn matching_checks(checks: &mut Vec<ReproCheck>, label: &str, want: &RandomMatching, got: &RandomMatching) {
    for i in 0..want.n() {
        checks.push(ReproCheck::new(
            format!("{label}, agent {}", i + 1),
            fmt_row(want.row(i)),
            fmt_row(got.row(i)),
        ));
    }
}

/// Recomputes the fixture and diffs every pinned field.
pub fn reproduce(id: FixtureId) -> ReproReport {
    match id {
        FixtureId::Example1 => repro_example1(),
        FixtureId::SdcExample => repro_sdc_example(),
        FixtureId::NonBossyA2 => repro_nonbossy(),
        FixtureId::GurInfeasible => repro_gur(),
        FixtureId::ProfileE => repro_profile_e(),
        FixtureId::ExceptRm => repro_except(),
        FixtureId::PdcEnvy => repro_pdc_envy(),
        FixtureId::EsImpossible => repro_es_impossible(),
    }
}

fn repro_example1() -> ReproReport {
    let c = example1_profile();
    let mut checks = Vec::new();
    let class = classify_objects(&c);
    checks.push(ReproCheck::new(
        "excess-demand set",
        "{a, c}",
        fmt_object_set(&class.ed, 3),
    ));
    let state = urc_phase1(&c);
    for (object, want) in [(0usize, [4i64, 4, 2]), (2, [2, 1, 7]), (1, [2, 4, 0])] {
        let want: Vec<Rational> = want.iter().map(|&x| rat(x, 10)).collect();
        checks.push(ReproCheck::new(
            format!("phase-1 column {}", default_object_names(3)[object]),
            fmt_row(&want),
            fmt_row(&state.column(object)),
        ));
    }
    let got = urc(&c, &Sequence::identity(3), &Sequence::identity(3)).unwrap();
    let want = load_fixture(FixtureId::Example1).expected_matching.unwrap();
    matching_checks(&mut checks, "final matching", &want, &got);
    ReproReport {
        fixture: "example1",
        checks,
    }
}

fn repro_sdc_example() -> ReproReport {
    let c = example1_profile();
    let mut checks = Vec::new();
    let got = sdc(&c, &Sequence::identity(3), &Sequence::identity(3)).unwrap();
    let want = load_fixture(FixtureId::SdcExample).expected_matching.unwrap();
    matching_checks(&mut checks, "final matching", &want, &got);
    ReproReport {
        fixture: "sdc-example",
        checks,
    }
}

fn repro_nonbossy() -> ReproReport {
    let c = nonbossy_profile();
    let alpha = Sequence::identity(3);
    let beta = Sequence::identity(3);
    let mut checks = Vec::new();

    let truthful = urc(&c, &alpha, &beta).unwrap();
    let want = load_fixture(FixtureId::NonBossyA2).expected_matching.unwrap();
    matching_checks(&mut checks, "truthful matching", &want, &truthful);

    let misreport = IdealLottery::from_grid(&[7, 3, 0], 10).unwrap();
    let deviated = c.with_lottery(1, misreport).unwrap();
    let shifted = urc(&deviated, &alpha, &beta).unwrap();
    let want2 =
        RandomMatching::from_grid(&[&[30, 35, 35], &[60, 30, 10], &[10, 35, 55]], 100).unwrap();
    matching_checks(&mut checks, "misreport matching", &want2, &shifted);

    let d2 = l1_distance(c.lottery(1).shares(), truthful.row(1)).unwrap();
    let d2p = l1_distance(c.lottery(1).shares(), shifted.row(1)).unwrap();
    checks.push(ReproCheck::new("agent 2 distance, truthful", "1/5", format_rational(&d2)));
    checks.push(ReproCheck::new("agent 2 distance, misreport", "1/5", format_rational(&d2p)));
    let d3 = l1_distance(c.lottery(2).shares(), truthful.row(2)).unwrap();
    let d3p = l1_distance(c.lottery(2).shares(), shifted.row(2)).unwrap();
    checks.push(ReproCheck::new("agent 3 distance, truthful", "0/1", format_rational(&d3)));
    checks.push(ReproCheck::new("agent 3 distance, misreport", "1/10", format_rational(&d3p)));
    checks.push(ReproCheck::new(
        "agent 3 welfare changed while agent 2's did not",
        "true",
        (d2 == d2p && d3 != d3p).to_string(),
    ));
    ReproReport {
        fixture: "nonbossy-a2",
        checks,
    }
}

fn repro_gur() -> ReproReport {
    let c = gur_profile();
    let mut checks = Vec::new();
    let col_a = uniform_rule(&PeakVector::unit(c.column(0)).unwrap()).unwrap();
    let col_c = uniform_rule(&PeakVector::unit(c.column(2)).unwrap()).unwrap();
    checks.push(ReproCheck::new(
        "per-object uniform rule, column a",
        "(3/10, 2/5, 3/10)",
        fmt_row(&col_a),
    ));
    checks.push(ReproCheck::new(
        "per-object uniform rule, column c",
        "(1/5, 0/1, 4/5)",
        fmt_row(&col_c),
    ));
    let agent3 = &col_a[2] + &col_c[2];
    checks.push(ReproCheck::new(
        "agent 3 total on objects a and c",
        "11/10",
        format_rational(&agent3),
    ));
    checks.push(ReproCheck::new(
        "agent feasibility violated (total > 1)",
        "true",
        (agent3 > Rational::one()).to_string(),
    ));
    ReproReport {
        fixture: "gur-infeasible",
        checks,
    }
}

fn repro_profile_e() -> ReproReport {
    let e = meu_special_profile();
    let mut checks = Vec::new();
    let patched = meu_mechanism(&e).unwrap();
    matching_checks(&mut checks, "patched matching", &meu_special_matching(), &patched);

    let base = urc(&e, &Sequence::identity(3), &Sequence::identity(3)).unwrap();
    let third: Vec<Rational> = vec![rat(1, 3); 3];
    for i in 0..3 {
        checks.push(ReproCheck::new(
            format!("uniform-rule matching, agent {}", i + 1),
            fmt_row(&third),
            fmt_row(base.row(i)),
        ));
    }
    let d_patched = distance_vector(&e, &patched).unwrap();
    let d_base = distance_vector(&e, &base).unwrap();
    let want = ["2/3", "2/3", "0/1"];
    for i in 0..3 {
        checks.push(ReproCheck::new(
            format!("agent {} distance, both mechanisms", i + 1),
            format!("{} and {}", want[i], want[i]),
            format!(
                "{} and {}",
                format_rational(&d_patched[i]),
                format_rational(&d_base[i])
            ),
        ));
    }

    // Truthful report of (2/3, 0, 1/3) is strictly beaten by claiming the
    // special profile's first lottery.
    let c1 = IdealLottery::new(vec![rat(2, 3), rat(0, 1), rat(1, 3)]).unwrap();
    let c = e.with_lottery(0, c1.clone()).unwrap();
    let honest = meu_mechanism(&c).unwrap();
    let honest_d = l1_distance(c1.shares(), honest.row(0)).unwrap();
    let lying_d = l1_distance(c1.shares(), meu_mechanism(&e).unwrap().row(0)).unwrap();
    checks.push(ReproCheck::new("truthful distance at neighbor profile", "2/3", format_rational(&honest_d)));
    checks.push(ReproCheck::new("misreport distance at neighbor profile", "0/1", format_rational(&lying_d)));
    checks.push(ReproCheck::new(
        "misreport strictly improves (strategy proofness fails)",
        "true",
        (lying_d < honest_d).to_string(),
    ));
    ReproReport {
        fixture: "profile-e",
        checks,
    }
}

fn repro_except() -> ReproReport {
    let c = except_profile();
    let mut checks = Vec::new();
    let truthful = except_mechanism(&c).unwrap();
    checks.push(ReproCheck::new(
        "agent 1 allocation, truthful",
        "(2/5, 2/5, 1/5)",
        fmt_row(truthful.row(0)),
    ));
    let uniform = IdealLottery::new(vec![rat(1, 3); 3]).unwrap();
    let deviated = c.with_lottery(0, uniform).unwrap();
    let class = classify_objects(&c);
    let class2 = classify_objects(&deviated);
    checks.push(ReproCheck::new(
        "excess-demand set preserved by the deviation",
        "{a, b} and {a, b}",
        format!(
            "{} and {}",
            fmt_object_set(&class.ed, 3),
            fmt_object_set(&class2.ed, 3)
        ),
    ));
    let shifted = except_mechanism(&deviated).unwrap();
    checks.push(ReproCheck::new(
        "agent 1 allocation, deviated",
        "(1/3, 1/3, 1/3)",
        fmt_row(shifted.row(0)),
    ));
    let d1 = l1_distance(c.lottery(0).shares(), truthful.row(0)).unwrap();
    let d1p = l1_distance(c.lottery(0).shares(), shifted.row(0)).unwrap();
    checks.push(ReproCheck::new(
        "deviating agent does not gain",
        "true",
        (d1 <= d1p).to_string(),
    ));
    let d2 = l1_distance(c.lottery(1).shares(), truthful.row(1)).unwrap();
    let d2p = l1_distance(c.lottery(1).shares(), shifted.row(1)).unwrap();
    checks.push(ReproCheck::new("agent 2 distance, truthful", "0/1", format_rational(&d2)));
    checks.push(ReproCheck::new("agent 2 distance, deviated", "8/15", format_rational(&d2p)));
    checks.push(ReproCheck::new(
        "agent 2 is hurt (replacement monotonicity fails)",
        "true",
        (d2p > d2).to_string(),
    ));
    ReproReport {
        fixture: "except-rm",
        checks,
    }
}

fn repro_pdc_envy() -> ReproReport {
    let c = pdc_envy_profile();
    let mut checks = Vec::new();
    let m = crate::mechanisms::pdc(&c, &Sequence::identity(4), &Sequence::identity(4)).unwrap();
    checks.push(ReproCheck::new(
        "proportional division of column a",
        "(3/10, 3/10, 3/10, 1/10)",
        fmt_row(&m.column(0)),
    ));
    let own = l1_distance(c.lottery(3).shares(), m.row(3)).unwrap();
    let other = l1_distance(c.lottery(3).shares(), m.row(0)).unwrap();
    checks.push(ReproCheck::new("agent 4 distance to own row", "7/15", format_rational(&own)));
    checks.push(ReproCheck::new("agent 4 distance to agent 1's row", "1/15", format_rational(&other)));
    checks.push(ReproCheck::new(
        "agent 4 envies agent 1 (envy freeness fails)",
        "true",
        (other < own).to_string(),
    ));
    ReproReport {
        fixture: "pdc-envy",
        checks,
    }
}

fn repro_es_impossible() -> ReproReport {
    let mut checks = Vec::new();
    let x = es_impossible_profile();
    let class_x = classify_objects(&x);
    checks.push(ReproCheck::new(
        "excess-supply set of the common profile",
        "{a}",
        fmt_object_set(&class_x.es, 3),
    ));
    // Any efficient rule that reads only excess-supply ideals is forced, on
    // each witness profile, to give agent j exactly their ideal (object b is
    // unanimous there), hence nothing of object a; transporting that to the
    // common profile forces the whole column of object a to zero.
    let mut forced_column = Vec::new();
    for j in 0..3 {
        let z = es_witness_profile(j);
        let class = classify_objects(&z);
        checks.push(ReproCheck::new(
            format!("witness profile {} excess-supply set", j + 1),
            "{a}",
            fmt_object_set(&class.es, 3),
        ));
        checks.push(ReproCheck::new(
            format!("witness profile {} has object b unanimous", j + 1),
            "true",
            class.un.contains(&1).to_string(),
        ));
        checks.push(ReproCheck::new(
            format!("profiles agree on object a (witness {})", j + 1),
            "true",
            (0..3)
                .all(|i| z.lottery(i).share(0) == x.lottery(i).share(0))
                .to_string(),
        ));
        forced_column.push(z.lottery(j).share(0).clone());
    }
    let total: Rational = forced_column.iter().sum();
    checks.push(ReproCheck::new(
        "forced division of object a",
        "(0/1, 0/1, 0/1)",
        fmt_row(&forced_column),
    ));
    checks.push(ReproCheck::new(
        "object feasibility violated (column sums to 0, not 1)",
        "true",
        (total != Rational::one() && total.is_zero()).to_string(),
    ));
    ReproReport {
        fixture: "es-impossible",
        checks,
    }
}

/// Equal division of the golden profile, used as the pinned inefficiency
/// witness.
pub fn equal_division_on_example1() -> (Profile, RandomMatching) {
    let c = example1_profile();
    let m = equal_division(&c);
    (c, m)
}

/// Profile where two identical agents straddle one over-demanded object;
/// serial dictatorship then treats them differently, which breaks anonymity
/// and creates envy.
pub fn sdc_asymmetry_fixture() -> Profile {
    Profile::from_grid(&[&[2, 0, 0], &[2, 0, 0], &[0, 1, 1]], 2).unwrap()
}

/// Two-agent profile where proportional division rewards exaggeration.
pub fn pdc_manipulation_fixture() -> (Profile, usize, IdealLottery) {
    let profile = Profile::from_grid(&[&[9, 1], &[9, 1]], 10).unwrap();
    let misreport = IdealLottery::from_grid(&[1, 0], 1).unwrap();
    (profile, 0, misreport)
}
