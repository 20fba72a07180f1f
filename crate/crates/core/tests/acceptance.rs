//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Every tolerance is exact (rational equality); run with `--nocapture` to
//! see the lines for passing criteria too.

use std::time::{Duration, Instant};

use chance_split::axioms::{
    brute_force_dominance, improve_to_same_sided, run_table1, verify_witness, FuzzConfig,
    Table1Outcome, VerdictResult,
};
use chance_split::mechanisms::{
    meu_mechanism, meu_special_profile, pdc, sdc, urc, Sequence,
};
use chance_split::model::{
    classify_objects, distance_vector, is_same_sided, l1_distance, IdealLottery, Profile,
    RandomMatching,
};
use chance_split::profiles::{
    between_sample_rng, compositions, random_grid_matching_rng, random_profile_rng,
    random_sequence_rng, stream_rng,
};
use chance_split::rational::{rat, Rational};
use chance_split::uniform::{uniform_rule, PeakVector};

fn criterion<F>(num: u32, name: &str, run: F)
where
    F: FnOnce() -> Result<String, String>,
{
    match run() {
        Ok(detail) => println!("criterion {num} PASS - {name} ({detail})"),
        Err(msg) => {
            println!("criterion {num} FAIL - {name}: {msg}");
            panic!("criterion {num} failed: {msg}");
        }
    }
}

fn example1() -> Profile {
    Profile::from_grid(&[&[6, 2, 2], &[5, 4, 1], &[2, 0, 8]], 10).unwrap()
}

fn identity3() -> (Sequence, Sequence) {
    (Sequence::identity(3), Sequence::identity(3))
}

#[test]
fn criterion_01_golden_urc_example() {
    criterion(1, "golden two-phase uniform-rule run", || {
        let c = example1();
        let (alpha, beta) = identity3();
        let want = RandomMatching::from_grid(&[&[4, 4, 2], &[4, 5, 1], &[2, 1, 7]], 10)
            .map_err(|e| e.to_string())?;
        let got = urc(&c, &alpha, &beta).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("matching differs:\n{got}"));
        }
        // Warm up, then take the best of 20 timed runs.
        let mut best = Duration::MAX;
        for _ in 0..20 {
            let start = Instant::now();
            let _ = urc(&c, &alpha, &beta).map_err(|e| e.to_string())?;
            best = best.min(start.elapsed());
        }
        if best >= Duration::from_millis(1) {
            return Err(format!("runtime {best:?} is not below 1 ms"));
        }
        Ok(format!("exact match, best runtime {best:?}"))
    });
}

#[test]
fn criterion_02_golden_sdc_example() {
    criterion(2, "golden serial-dictatorship run", || {
        let c = example1();
        let (alpha, beta) = identity3();
        let want = RandomMatching::from_grid(&[&[6, 2, 2], &[4, 5, 1], &[0, 3, 7]], 10)
            .map_err(|e| e.to_string())?;
        let got = sdc(&c, &alpha, &beta).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("matching differs:\n{got}"));
        }
        Ok("exact match".into())
    });
}

#[test]
fn criterion_03_welfare_non_bossiness_pair() {
    criterion(3, "misreport pair shifts a bystander's welfare only", || {
        let c = Profile::from_grid(&[&[3, 5, 2], &[7, 2, 1], &[1, 4, 5]], 10)
            .map_err(|e| e.to_string())?;
        let (alpha, beta) = identity3();
        let want = RandomMatching::from_grid(&[&[3, 4, 3], &[6, 2, 2], &[1, 4, 5]], 10)
            .map_err(|e| e.to_string())?;
        let got = urc(&c, &alpha, &beta).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("truthful matching differs:\n{got}"));
        }
        let misreport = IdealLottery::from_grid(&[7, 3, 0], 10).map_err(|e| e.to_string())?;
        let deviated = c.with_lottery(1, misreport).map_err(|e| e.to_string())?;
        let want2 = RandomMatching::from_grid(&[&[30, 35, 35], &[60, 30, 10], &[10, 35, 55]], 100)
            .map_err(|e| e.to_string())?;
        let got2 = urc(&deviated, &alpha, &beta).map_err(|e| e.to_string())?;
        if got2 != want2 {
            return Err(format!("misreport matching differs:\n{got2}"));
        }
        let d2 = l1_distance(c.lottery(1).shares(), got.row(1)).map_err(|e| e.to_string())?;
        let d2p = l1_distance(c.lottery(1).shares(), got2.row(1)).map_err(|e| e.to_string())?;
        if d2 != rat(1, 5) || d2p != rat(1, 5) {
            return Err("deviator's distance is not 1/5 in both runs".into());
        }
        let d3 = l1_distance(c.lottery(2).shares(), got.row(2)).map_err(|e| e.to_string())?;
        let d3p = l1_distance(c.lottery(2).shares(), got2.row(2)).map_err(|e| e.to_string())?;
        if d3 == d3p {
            return Err("bystander's distance did not change".into());
        }
        Ok(format!(
            "deviator fixed at 1/5, bystander moves {} -> {}",
            d3, d3p
        ))
    });
}

#[test]
fn criterion_04_patched_mechanism_equivalence_and_manipulation() {
    criterion(4, "patched mechanism: equal welfare, manipulable", || {
        let e = meu_special_profile();
        let (alpha, beta) = identity3();
        let want = vec![rat(2, 3), rat(2, 3), rat(0, 1)];
        let patched = meu_mechanism(&e).map_err(|e| e.to_string())?;
        let base = urc(&e, &alpha, &beta).map_err(|e| e.to_string())?;
        let d_patched = distance_vector(&e, &patched).map_err(|e| e.to_string())?;
        let d_base = distance_vector(&e, &base).map_err(|e| e.to_string())?;
        if d_patched != want || d_base != want {
            return Err("per-agent distances are not (2/3, 2/3, 0)".into());
        }
        let c1 = IdealLottery::new(vec![rat(2, 3), rat(0, 1), rat(1, 3)]).map_err(|e| e.to_string())?;
        let c = e.with_lottery(0, c1.clone()).map_err(|e| e.to_string())?;
        let honest = meu_mechanism(&c).map_err(|e| e.to_string())?;
        let honest_d = l1_distance(c1.shares(), honest.row(0)).map_err(|e| e.to_string())?;
        let lying = meu_mechanism(&e).map_err(|e| e.to_string())?;
        let lying_d = l1_distance(c1.shares(), lying.row(0)).map_err(|e| e.to_string())?;
        if lying_d >= honest_d {
            return Err("misreport does not strictly improve the deviator".into());
        }
        Ok(format!("distances (2/3, 2/3, 0); manipulation {honest_d} -> {lying_d}"))
    });
}

#[test]
fn criterion_05_property_table_reproduction() {
    criterion(5, "four-mechanism property table matches the published pattern", || {
        let jobs = std::thread::available_parallelism()
            .map(|p| p.get())
            .unwrap_or(1)
            .min(8);
        let cfg = FuzzConfig {
            n: 3,
            denominator: 6,
            samples: 500,
            seed: 7,
            misreport_budget: 64,
            jobs,
        };
        let start = Instant::now();
        let table = run_table1(&cfg);
        let elapsed = start.elapsed();
        if elapsed > Duration::from_secs(300) {
            return Err(format!("table run took {elapsed:?}, above the 5 minute budget"));
        }
        match table.outcome() {
            Table1Outcome::Match => {}
            other => return Err(format!("pattern mismatch: {other:?}")),
        }
        for cell in &table.cells {
            if cell.verdict.result == VerdictResult::Fail {
                let witness = cell
                    .verdict
                    .witness
                    .as_ref()
                    .ok_or_else(|| "fail cell without witness".to_string())?;
                if !verify_witness(cell.property, witness) {
                    return Err(format!(
                        "witness for {:?}/{:?} does not re-verify",
                        cell.mechanism, cell.property
                    ));
                }
                // Replayable: survives a JSON round trip and still verifies.
                let json = serde_json::to_string(witness).map_err(|e| e.to_string())?;
                let back: chance_split::axioms::Witness =
                    serde_json::from_str(&json).map_err(|e| e.to_string())?;
                if !verify_witness(cell.property, &back) {
                    return Err("witness does not re-verify after JSON round trip".into());
                }
            }
        }
        Ok(format!("28 cells match in {elapsed:?} with {} samples/cell", cfg.samples))
    });
}

#[test]
fn criterion_06_dominance_oracle_equivalence() {
    criterion(6, "same-sidedness decides dominance on small grids", || {
        // Exhaustive sweep: every 2-agent profile and matching on the 1/4 grid.
        let mut checked = 0u64;
        let lotteries: Vec<IdealLottery> = compositions(4, 2)
            .into_iter()
            .map(|p| IdealLottery::from_grid(&p, 4).unwrap())
            .collect();
        let mut matchings = Vec::new();
        chance_split::axioms::enumerate_grid_matchings(2, 4, &mut |rows| {
            let refs: Vec<&[u64]> = rows.iter().map(|r| r.as_slice()).collect();
            matchings.push(RandomMatching::from_grid(&refs, 4).unwrap());
        });
        for l1_ in &lotteries {
            for l2 in &lotteries {
                let profile =
                    Profile::new(vec![l1_.clone(), l2.clone()]).map_err(|e| e.to_string())?;
                for matching in &matchings {
                    check_dominance_instance(&profile, matching, 4)?;
                    checked += 1;
                }
            }
        }
        // Random sweep: 3-agent instances on the 1/5 grid.
        for i in 0..200u64 {
            let mut rng = stream_rng(600, 0xACC6, i);
            let profile = random_profile_rng(3, 5, &mut rng);
            let matching = random_grid_matching_rng(3, 5, &mut rng);
            check_dominance_instance(&profile, &matching, 5)?;
            checked += 1;
        }
        Ok(format!("{checked} instances, oracle and classifier agree"))
    });
}

fn check_dominance_instance(
    profile: &Profile,
    matching: &RandomMatching,
    den: u64,
) -> Result<(), String> {
    let same_sided = is_same_sided(profile, matching);
    let dominator = brute_force_dominance(profile, matching, den).map_err(|e| e.to_string())?;
    if same_sided && dominator.is_some() {
        return Err(format!("same-sided matching dominated on the grid:\n{matching}"));
    }
    if !same_sided {
        if dominator.is_none() {
            return Err(format!("no grid dominator found for non-same-sided:\n{matching}"));
        }
        let improved = improve_to_same_sided(profile, matching);
        if !is_same_sided(profile, &improved) {
            return Err("improvement procedure did not reach same-sidedness".into());
        }
        let before = distance_vector(profile, matching).map_err(|e| e.to_string())?;
        let after = distance_vector(profile, &improved).map_err(|e| e.to_string())?;
        if !before.iter().zip(&after).all(|(b, a)| a <= b)
            || !before.iter().zip(&after).any(|(b, a)| a < b)
        {
            return Err("improvement procedure does not strictly dominate".into());
        }
    }
    Ok(())
}

/// Shared fuzz corpus for the sequence/welfare criteria: 1000 profiles with
/// 2..=5 agents on grids up to 1/12, each with two random sequence pairs.
fn corpus() -> Vec<(Profile, Sequence, Sequence, Sequence, Sequence)> {
    let dens = [4u64, 6, 10, 12];
    (0..1000u64)
        .map(|i| {
            let mut rng = stream_rng(77, 0xC0 + (i % 7), i);
            let n = 2 + (i % 4) as usize;
            let den = dens[(i / 4) as usize % dens.len()];
            let profile = random_profile_rng(n, den, &mut rng);
            let a1 = random_sequence_rng(n, &mut rng);
            let b1 = random_sequence_rng(n, &mut rng);
            let a2 = random_sequence_rng(n, &mut rng);
            let b2 = random_sequence_rng(n, &mut rng);
            (profile, a1, b1, a2, b2)
        })
        .collect()
}

#[test]
fn criterion_07_sequence_independent_welfare() {
    criterion(7, "welfare does not depend on the fill sequences", || {
        let mut checked = 0u64;
        for (profile, a1, b1, a2, b2) in corpus() {
            let first = urc(&profile, &a1, &b1).map_err(|e| e.to_string())?;
            let second = urc(&profile, &a2, &b2).map_err(|e| e.to_string())?;
            let d1 = distance_vector(&profile, &first).map_err(|e| e.to_string())?;
            let d2 = distance_vector(&profile, &second).map_err(|e| e.to_string())?;
            if d1 != d2 {
                return Err(format!(
                    "distances differ between sequence pairs on profile {profile:?}"
                ));
            }
            checked += 1;
        }
        Ok(format!("{checked} profiles, per-agent distances identical"))
    });
}

#[test]
fn criterion_08_excess_demand_columns_follow_the_uniform_rule() {
    criterion(8, "every excess-demand column equals the uniform rule", || {
        let mut columns = 0u64;
        for (profile, a1, b1, _, _) in corpus() {
            let matching = urc(&profile, &a1, &b1).map_err(|e| e.to_string())?;
            let class = classify_objects(&profile);
            for &a in &class.ed {
                let v = PeakVector::unit(profile.column(a)).map_err(|e| e.to_string())?;
                let want = uniform_rule(&v).map_err(|e| e.to_string())?;
                if matching.column(a) != want {
                    return Err(format!("column {a} deviates from the uniform rule"));
                }
                columns += 1;
            }
        }
        Ok(format!("{columns} excess-demand columns, all exact"))
    });
}

#[test]
fn criterion_09_between_deviation_leaves_allocation_fixed() {
    criterion(9, "deviating inside the ideal-allocation box changes nothing", || {
        let mut checked = 0u64;
        for (i, (profile, a1, b1, _, _)) in corpus().into_iter().enumerate() {
            let n = profile.n();
            let agent = i % n;
            let truthful = urc(&profile, &a1, &b1).map_err(|e| e.to_string())?;
            let mut rng = stream_rng(78, 0xBE, i as u64);
            let misreport = between_sample_rng(profile.lottery(agent), truthful.row(agent), &mut rng);
            let deviated_profile = profile
                .with_lottery(agent, misreport)
                .map_err(|e| e.to_string())?;
            let deviated = urc(&deviated_profile, &a1, &b1).map_err(|e| e.to_string())?;
            if deviated.row(agent) != truthful.row(agent) {
                return Err(format!(
                    "deviator's allocation moved for profile {profile:?}, agent {agent}"
                ));
            }
            let class = classify_objects(&profile);
            for &a in &class.ed {
                for j in 0..n {
                    if deviated.entry(j, a) != truthful.entry(j, a) {
                        return Err(format!(
                            "agent {j}'s excess-demand allocation moved on object {a}"
                        ));
                    }
                }
            }
            checked += 1;
        }
        Ok(format!("{checked} (profile, agent, deviation) triples unchanged"))
    });
}

#[test]
fn criterion_10_same_sided_welfare_identity() {
    criterion(10, "twice the demand deficit equals the distance equals twice the supply surplus", || {
        let two = rat(2, 1);
        let mut checked = 0u64;
        for (profile, a1, b1, _, _) in corpus() {
            let class = classify_objects(&profile);
            let outputs = vec![
                urc(&profile, &a1, &b1).map_err(|e| e.to_string())?,
                sdc(&profile, &a1, &b1).map_err(|e| e.to_string())?,
                pdc(&profile, &a1, &b1).map_err(|e| e.to_string())?,
            ];
            for matching in outputs {
                for i in 0..profile.n() {
                    let ideal = profile.lottery(i);
                    let direct =
                        l1_distance(ideal.shares(), matching.row(i)).map_err(|e| e.to_string())?;
                    let demand_side: Rational = class
                        .ed
                        .iter()
                        .map(|&a| ideal.share(a) - matching.entry(i, a))
                        .sum();
                    let supply_side: Rational = class
                        .es
                        .iter()
                        .map(|&a| matching.entry(i, a) - ideal.share(a))
                        .sum();
                    if &two * &demand_side != direct || &two * &supply_side != direct {
                        return Err(format!(
                            "identity fails for agent {i} on profile {profile:?}"
                        ));
                    }
                    checked += 1;
                }
            }
        }
        Ok(format!("{checked} agent-distance identities, all exact"))
    });
}
