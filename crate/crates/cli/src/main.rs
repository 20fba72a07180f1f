//! Command-line surface: run mechanisms on profile files, check axioms,
//! fuzz for counterexamples, reproduce the built-in benchmark instances,
//! generate random profiles, and render the four-mechanism property table.
//!
//! Exit codes are a stable contract: 0 pass/success, 1 fail (witness or diff
//! printed), 2 parse or invariant error, 3 unsupported instance,
//! 4 inconclusive.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chance_split::axioms::{
    check_property_on_profile, check_welfare_equivalence, falsify_property,
    falsify_welfare_equivalence, run_table1, verify_witness, AxiomVerdict, FuzzConfig, Property,
    Table1, Table1Outcome, VerdictResult, Witness, TABLE1_PROPERTIES,
};
use chance_split::error::Error;
use chance_split::fixtures::{load_fixture, reproduce, FixtureId};
use chance_split::json::{
    parse_profile, serialize_matching, serialize_profile, NamedMatching, NamedProfile,
};
use chance_split::mechanisms::{MechanismId, MechanismKind, Sequence};
use chance_split::model::distance_vector;
use chance_split::profiles::random_profile;
use chance_split::rational::format_rational;

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_UNSUPPORTED: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "chance-split",
    version,
    about = "Mechanisms and axiom checkers for dividing matching chances with exact rational arithmetic"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SequenceArgs {
    /// Agent visiting order for the fill phase, comma-separated 0-based
    /// indices, e.g. 0,1,2 (defaults to identity).
    #[arg(long)]
    alpha: Option<String>,
    /// Object visiting order for the fill phase (defaults to identity).
    #[arg(long)]
    beta: Option<String>,
}

#[derive(Args, Clone)]
struct BudgetArgs {
    /// Agent count for generated profiles.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Grid denominator D: generated values are multiples of 1/D.
    #[arg(long, default_value_t = 6)]
    den: u64,
    /// Number of samples (or deviation rounds on a fixed profile).
    #[arg(long, default_value_t = 500)]
    samples: u64,
    /// Campaign seed; identical seeds give identical output.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Misreports tried per agent and sample.
    #[arg(long, default_value_t = 64)]
    misreports: u64,
    /// Worker threads (default: CHANCE_SPLIT_JOBS or 1). Does not change
    /// verdicts.
    #[arg(long)]
    jobs: Option<usize>,
}

impl BudgetArgs {
    fn to_config(&self) -> FuzzConfig {
        FuzzConfig {
            n: self.n,
            denominator: self.den,
            samples: self.samples,
            seed: self.seed,
            misreport_budget: self.misreports,
            jobs: self.jobs.unwrap_or_else(default_jobs),
        }
    }
}

fn default_jobs() -> usize {
    std::env::var("CHANCE_SPLIT_JOBS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
}

#[derive(Subcommand)]
enum Command {
    /// Run a mechanism on a profile file and print the matching plus the
    /// per-agent distance table.
    Run {
        /// One of: urc, sdc, pdc, equal, except, me, meu.
        mechanism: String,
        /// Profile JSON file.
        profile: PathBuf,
        #[command(flatten)]
        sequences: SequenceArgs,
        /// Emit a single JSON object instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Check one property of a mechanism, on a profile file, over a fuzz
    /// budget, or by replaying a stored witness.
    Check {
        /// One of: sp, eff (alias pf), rm, nb, ib, ano, ef, we.
        property: String,
        /// Mechanism id; may be omitted when replaying a witness.
        mechanism: Option<String>,
        /// Profile JSON file (single-instance mode).
        profile: Option<PathBuf>,
        /// Second mechanism for welfare equivalence.
        #[arg(long)]
        versus: Option<String>,
        /// Fuzz budget, e.g. n=3,D=6,samples=500,seed=7.
        #[arg(long)]
        fuzz: Option<String>,
        /// Replay a stored witness JSON file and re-verify it.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[command(flatten)]
        sequences: SequenceArgs,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Falsification campaign over all checkable properties of one mechanism.
    Fuzz {
        mechanism: String,
        #[command(flatten)]
        sequences: SequenceArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Comma-separated property ids (default: sp,eff,rm,nb,ib,ano,ef).
        #[arg(long)]
        properties: Option<String>,
    },
    /// Recompute a built-in instance and diff it against its pinned values.
    Repro {
        /// One of: example1, sdc-example, nonbossy-a2, gur-infeasible,
        /// profile-e, except-rm, pdc-envy, es-impossible.
        fixture: String,
    },
    /// Generate random profiles (or dump a fixture profile) as JSON.
    Gen {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        den: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Number of profiles; more than one prints compact JSON lines.
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Dump this fixture's profile instead of sampling.
        #[arg(long)]
        fixture: Option<String>,
    },
    /// Run the four-mechanism property table and compare it against the
    /// published pattern.
    Table1 {
        #[command(flatten)]
        budget: BudgetArgs,
        /// Emit the full table with witnesses as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes instead of panicking on
    // the next write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::UnsupportedInstance { .. } => EXIT_UNSUPPORTED,
        _ => EXIT_PARSE,
    }
}

fn parse_sequence(text: &str, n: usize) -> Result<Sequence, Error> {
    let order = text
        .split(',')
        .map(|p| {
            p.trim().parse::<usize>().map_err(|_| Error::Parse {
                at: format!("sequence {text:?}"),
                detail: format!("invalid index {p:?}"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let seq = Sequence::new(order)?;
    if seq.len() != n {
        return Err(Error::BadSequence {
            n,
            detail: format!("{text:?} has length {}", seq.len()),
        });
    }
    Ok(seq)
}

fn mechanism_id(
    kind_text: &str,
    sequences: &SequenceArgs,
    n: usize,
) -> Result<MechanismId, Error> {
    let kind = MechanismKind::parse(kind_text)?;
    let mut id = MechanismId::new(kind.clone());
    if sequences.alpha.is_some() || sequences.beta.is_some() {
        let alpha = match &sequences.alpha {
            Some(a) => parse_sequence(a, n)?,
            None => Sequence::identity(n),
        };
        let beta = match &sequences.beta {
            Some(b) => parse_sequence(b, n)?,
            None => Sequence::identity(n),
        };
        id = MechanismId::with_sequences(kind, alpha, beta)?;
    }
    Ok(id)
}

fn read_profile(path: &PathBuf) -> Result<NamedProfile, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        at: path.display().to_string(),
        detail: e.to_string(),
    })?;
    parse_profile(&text)
}

fn dispatch(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run {
            mechanism,
            profile,
            sequences,
            json,
        } => cmd_run(&mechanism, &profile, &sequences, json),
        Command::Check {
            property,
            mechanism,
            profile,
            versus,
            fuzz,
            witness,
            sequences,
            jobs,
        } => cmd_check(
            &property, mechanism, profile, versus, fuzz, witness, &sequences, jobs,
        ),
        Command::Fuzz {
            mechanism,
            sequences,
            budget,
            properties,
        } => cmd_fuzz(&mechanism, &sequences, &budget, properties),
        Command::Repro { fixture } => cmd_repro(&fixture),
        Command::Gen {
            n,
            den,
            seed,
            count,
            fixture,
        } => cmd_gen(n, den, seed, count, fixture),
        Command::Table1 { budget, json } => cmd_table1(&budget, json),
    }
}

fn cmd_run(
    mechanism: &str,
    profile_path: &PathBuf,
    sequences: &SequenceArgs,
    json: bool,
) -> Result<u8, Error> {
    let named = read_profile(profile_path)?;
    let id = mechanism_id(mechanism, sequences, named.profile.n())?;
    let matching = id.apply(&named.profile)?;
    let distances = distance_vector(&named.profile, &matching)?;
    let out = NamedMatching {
        matching,
        agents: named.agents.clone(),
        objects: named.objects.clone(),
    };
    if json {
        let doc = serde_json::json!({
            "mechanism": id.display_id(),
            "matching": serde_json::from_str::<serde_json::Value>(&serialize_matching(&out))
                .expect("serialized matching is valid JSON"),
            "distances": distances.iter().map(format_rational).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("valid JSON"));
    } else {
        println!("{}", serialize_matching(&out));
        println!();
        println!("distance to ideal lottery:");
        for (name, d) in named.agents.iter().zip(&distances) {
            println!("  agent {name}: {}", format_rational(d));
        }
    }
    Ok(EXIT_PASS)
}

fn verdict_exit(verdict: &AxiomVerdict) -> u8 {
    match verdict.result {
        VerdictResult::Pass => EXIT_PASS,
        VerdictResult::Fail => EXIT_FAIL,
        VerdictResult::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn print_verdict(verdict: &AxiomVerdict) {
    println!(
        "{}",
        serde_json::to_string_pretty(verdict).expect("verdict serializes")
    );
}

#[allow(clippy::too_many_arguments)]
fn cmd_check(
    property: &str,
    mechanism: Option<String>,
    profile: Option<PathBuf>,
    versus: Option<String>,
    fuzz: Option<String>,
    witness: Option<PathBuf>,
    sequences: &SequenceArgs,
    jobs: Option<usize>,
) -> Result<u8, Error> {
    let property = Property::parse(property)?;

    if let Some(witness_path) = witness {
        let text = fs::read_to_string(&witness_path).map_err(|e| Error::Parse {
            at: witness_path.display().to_string(),
            detail: e.to_string(),
        })?;
        let witness: Witness = serde_json::from_str(&text).map_err(|e| Error::Parse {
            at: witness_path.display().to_string(),
            detail: e.to_string(),
        })?;
        return if verify_witness(property, &witness) {
            println!(
                "witness re-verifies: the {} violation is reproducible",
                property.cli_id()
            );
            Ok(EXIT_PASS)
        } else {
            println!(
                "witness does NOT re-verify as a {} violation",
                property.cli_id()
            );
            Ok(EXIT_FAIL)
        };
    }

    let mechanism = mechanism.ok_or_else(|| Error::Parse {
        at: "check".into(),
        detail: "a mechanism id is required unless --witness is given".into(),
    })?;

    let mut cfg = match &fuzz {
        Some(text) => FuzzConfig::parse(text)?,
        None => FuzzConfig {
            samples: 64,
            ..FuzzConfig::default()
        },
    };
    if let Some(jobs) = jobs {
        cfg.jobs = jobs;
    } else if fuzz.as_deref().map(|f| !f.contains("jobs")).unwrap_or(true) {
        cfg.jobs = default_jobs();
    }

    let verdict = if let Some(profile_path) = profile {
        let named = read_profile(&profile_path)?;
        let id = mechanism_id(&mechanism, sequences, named.profile.n())?;
        if property == Property::WelfareEquivalent {
            let other = versus.ok_or_else(|| Error::Parse {
                at: "check we".into(),
                detail: "--versus <mechanism> is required for welfare equivalence".into(),
            })?;
            let other_id = mechanism_id(&other, sequences, named.profile.n())?;
            check_welfare_equivalence(&id, &other_id, &named.profile)?
        } else {
            check_property_on_profile(&id, property, &named.profile, &cfg)
        }
    } else {
        let id = mechanism_id(&mechanism, sequences, cfg.n)?;
        if property == Property::WelfareEquivalent {
            let other = versus.ok_or_else(|| Error::Parse {
                at: "check we".into(),
                detail: "--versus <mechanism> is required for welfare equivalence".into(),
            })?;
            let other_id = mechanism_id(&other, sequences, cfg.n)?;
            falsify_welfare_equivalence(&id, &other_id, &cfg)
        } else {
            falsify_property(&id, property, &cfg)
        }
    };
    print_verdict(&verdict);
    Ok(verdict_exit(&verdict))
}

fn cmd_fuzz(
    mechanism: &str,
    sequences: &SequenceArgs,
    budget: &BudgetArgs,
    properties: Option<String>,
) -> Result<u8, Error> {
    let cfg = budget.to_config();
    let id = mechanism_id(mechanism, sequences, cfg.n)?;
    let properties: Vec<Property> = match properties {
        Some(list) => list
            .split(',')
            .map(|p| Property::parse(p.trim()))
            .collect::<Result<Vec<_>, _>>()?,
        None => TABLE1_PROPERTIES.to_vec(),
    };
    let mut any_fail = false;
    let mut any_inconclusive = false;
    for property in properties {
        let verdict = falsify_property(&id, property, &cfg);
        let tag = match verdict.result {
            VerdictResult::Pass => "pass",
            VerdictResult::Fail => "FAIL",
            VerdictResult::Inconclusive => "inconclusive",
        };
        println!(
            "{:<4} {:<12} {}",
            property.short_label(),
            tag,
            verdict.note
        );
        if verdict.result == VerdictResult::Fail {
            any_fail = true;
            if let Some(w) = &verdict.witness {
                println!(
                    "{}",
                    serde_json::to_string_pretty(w).expect("witness serializes")
                );
            }
        }
        if verdict.result == VerdictResult::Inconclusive {
            any_inconclusive = true;
        }
    }
    Ok(if any_fail {
        EXIT_FAIL
    } else if any_inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_PASS
    })
}

fn cmd_repro(fixture: &str) -> Result<u8, Error> {
    let id = FixtureId::parse(fixture)?;
    let report = reproduce(id);
    println!("fixture {}:", report.fixture);
    for check in &report.checks {
        if check.ok {
            println!("  ok       {}: {}", check.field, check.actual);
        } else {
            println!(
                "  MISMATCH {}: expected {}, got {}",
                check.field, check.expected, check.actual
            );
        }
    }
    if report.ok() {
        println!("all {} fields match", report.checks.len());
        Ok(EXIT_PASS)
    } else {
        Ok(EXIT_FAIL)
    }
}

fn cmd_gen(
    n: usize,
    den: u64,
    seed: u64,
    count: u64,
    fixture: Option<String>,
) -> Result<u8, Error> {
    if let Some(fixture) = fixture {
        let id = FixtureId::parse(&fixture)?;
        let named = NamedProfile::with_default_names(load_fixture(id).profile);
        println!("{}", serialize_profile(&named));
        return Ok(EXIT_PASS);
    }
    if n == 0 || den == 0 {
        return Err(Error::Parse {
            at: "gen".into(),
            detail: "n and den must be positive".into(),
        });
    }
    for i in 0..count {
        let named = NamedProfile::with_default_names(random_profile(n, den, seed.wrapping_add(i)));
        if count == 1 {
            println!("{}", serialize_profile(&named));
        } else {
            let compact: serde_json::Value = serde_json::from_str(&serialize_profile(&named))
                .expect("serialized profile is valid JSON");
            println!("{compact}");
        }
    }
    Ok(EXIT_PASS)
}

fn render_table(table: &Table1) -> String {
    let mut out = String::new();
    out.push_str("mechanism  ");
    for p in TABLE1_PROPERTIES {
        out.push_str(&format!("{:<5}", p.short_label()));
    }
    out.push('\n');
    for kind in chance_split::axioms::TABLE1_MECHANISMS {
        out.push_str(&format!("{:<11}", kind.cli_id()));
        for p in TABLE1_PROPERTIES {
            let cell = table
                .cells
                .iter()
                .find(|c| c.mechanism == kind && c.property == p)
                .expect("table has every cell");
            let glyph = match cell.verdict.result {
                VerdictResult::Pass => "\u{2713}",
                VerdictResult::Fail => "\u{2717}",
                VerdictResult::Inconclusive => "?",
            };
            out.push_str(&format!("{glyph:<5}"));
        }
        out.push('\n');
    }
    out
}

fn cmd_table1(budget: &BudgetArgs, json: bool) -> Result<u8, Error> {
    let cfg = budget.to_config();
    let table = run_table1(&cfg);
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&table).expect("table serializes")
        );
    } else {
        print!("{}", render_table(&table));
    }
    match table.outcome() {
        Table1Outcome::Match => {
            println!("pattern matches the published table");
            Ok(EXIT_PASS)
        }
        Table1Outcome::Mismatch(cells) => {
            for (mech, prop) in cells {
                println!(
                    "MISMATCH: {} / {} contradicts the published table",
                    mech.cli_id(),
                    prop.short_label()
                );
            }
            Ok(EXIT_FAIL)
        }
        Table1Outcome::Inconclusive(cells) => {
            for (mech, prop) in cells {
                println!(
                    "inconclusive: {} / {} (insufficient budget)",
                    mech.cli_id(),
                    prop.short_label()
                );
            }
            Ok(EXIT_INCONCLUSIVE)
        }
    }
}
