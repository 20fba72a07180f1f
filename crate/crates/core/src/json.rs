//! JSON interchange for profiles and matchings.
//!
//! Both share one shape:
//!
//! ```json
//! {"agents": ["1", "2", "3"],
//!  "objects": ["a", "b", "c"],
//!  "rows": [["3/5", "1/5", "1/5"], ...]}
//! ```
//!
//! Rows follow the declared name order; every value is a rational in reduced
//! `"num/den"` form (integers and exact decimals are accepted on input and
//! normalize on the way through). Parsing validates the domain invariants and
//! reports the offending agent and object by name.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{IdealLottery, Profile, RandomMatching};
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawTable {
    agents: Vec<String>,
    objects: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// A profile together with the display names used in its JSON form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedProfile {
    pub profile: Profile,
    pub agents: Vec<String>,
    pub objects: Vec<String>,
}

impl NamedProfile {
    pub fn with_default_names(profile: Profile) -> Self {
        let n = profile.n();
        Self {
            agents: default_agent_names(n),
            objects: default_object_names(n),
            profile,
        }
    }
}

/// A matching together with the display names used in its JSON form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedMatching {
    pub matching: RandomMatching,
    pub agents: Vec<String>,
    pub objects: Vec<String>,
}

impl NamedMatching {
    pub fn with_default_names(matching: RandomMatching) -> Self {
        let n = matching.n();
        Self {
            agents: default_agent_names(n),
            objects: default_object_names(n),
            matching,
        }
    }
}

/// `"1", "2", ...`
pub fn default_agent_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// `"a", "b", ... "z"`, then `"o27", "o28", ...`
pub fn default_object_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if i < 26 {
                ((b'a' + i as u8) as char).to_string()
            } else {
                format!("o{}", i + 1)
            }
        })
        .collect()
}

fn parse_table(text: &str) -> Result<(RawTable, Vec<Vec<Rational>>)> {
    let raw: RawTable = serde_json::from_str(text).map_err(|e| Error::Parse {
        at: format!("line {}, column {}", e.line(), e.column()),
        detail: e.to_string(),
    })?;
    let n_agents = raw.agents.len();
    let n_objects = raw.objects.len();
    if n_agents == 0 || n_objects == 0 {
        return Err(Error::Parse {
            at: "agents/objects".into(),
            detail: "at least one agent and one object are required".into(),
        });
    }
    if n_agents != n_objects {
        return Err(Error::NotSquare {
            agents: n_agents,
            objects: n_objects,
        });
    }
    if raw.rows.len() != n_agents {
        return Err(Error::Parse {
            at: "rows".into(),
            detail: format!("expected {} rows, found {}", n_agents, raw.rows.len()),
        });
    }
    let mut values = Vec::with_capacity(n_agents);
    for (i, row) in raw.rows.iter().enumerate() {
        if row.len() != n_objects {
            return Err(Error::Parse {
                at: format!("rows[{i}] (agent {:?})", raw.agents[i]),
                detail: format!("expected {} entries, found {}", n_objects, row.len()),
            });
        }
        let mut parsed = Vec::with_capacity(n_objects);
        for (a, cell) in row.iter().enumerate() {
            let r = parse_rational(cell).map_err(|detail| Error::Parse {
                at: format!(
                    "rows[{i}][{a}] (agent {:?}, object {:?})",
                    raw.agents[i], raw.objects[a]
                ),
                detail,
            })?;
            parsed.push(r);
        }
        values.push(parsed);
    }
    Ok((raw, values))
}

/// Parses a profile, rejecting rows that are not lotteries and naming the
/// offending agent.
pub fn parse_profile(text: &str) -> Result<NamedProfile> {
    let (raw, values) = parse_table(text)?;
    let mut lotteries = Vec::with_capacity(values.len());
    for (i, row) in values.into_iter().enumerate() {
        let lottery = IdealLottery::new(row).map_err(|e| match e {
            Error::BadSum { sum, expected, .. } => Error::BadSum {
                what: "lottery".into(),
                who: format!("agent {:?}", raw.agents[i]),
                sum,
                expected,
            },
            Error::NegativeShare { who, value } => Error::NegativeShare {
                who: format!("agent {:?}, {}", raw.agents[i], who),
                value,
            },
            other => other,
        })?;
        lotteries.push(lottery);
    }
    Ok(NamedProfile {
        profile: Profile::new(lotteries)?,
        agents: raw.agents,
        objects: raw.objects,
    })
}

/// Parses a matching, rejecting non-bistochastic matrices.
pub fn parse_matching(text: &str) -> Result<NamedMatching> {
    let (raw, values) = parse_table(text)?;
    Ok(NamedMatching {
        matching: RandomMatching::new(values)?,
        agents: raw.agents,
        objects: raw.objects,
    })
}

fn table_json(agents: &[String], objects: &[String], rows: Vec<Vec<String>>) -> String {
    let raw = RawTable {
        agents: agents.to_vec(),
        objects: objects.to_vec(),
        rows,
    };
    serde_json::to_string_pretty(&raw).expect("table serialization cannot fail")
}

pub fn serialize_profile(p: &NamedProfile) -> String {
    let rows = p
        .profile
        .lotteries()
        .iter()
        .map(|l| l.shares().iter().map(format_rational).collect())
        .collect();
    table_json(&p.agents, &p.objects, rows)
}

pub fn serialize_matching(m: &NamedMatching) -> String {
    let rows = m
        .matching
        .rows()
        .iter()
        .map(|r| r.iter().map(format_rational).collect())
        .collect();
    table_json(&m.agents, &m.objects, rows)
}

impl Serialize for Profile {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let named = NamedProfile::with_default_names(self.clone());
        let rows: Vec<Vec<String>> = self
            .lotteries()
            .iter()
            .map(|l| l.shares().iter().map(format_rational).collect())
            .collect();
        RawTable {
            agents: named.agents,
            objects: named.objects,
            rows,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Profile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTable::deserialize(d)?;
        let text = serde_json::to_string(&raw).map_err(D::Error::custom);
        parse_profile(&text?)
            .map(|p| p.profile)
            .map_err(D::Error::custom)
    }
}

impl Serialize for RandomMatching {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let named = NamedMatching::with_default_names(self.clone());
        let rows: Vec<Vec<String>> = self
            .rows()
            .iter()
            .map(|r| r.iter().map(format_rational).collect())
            .collect();
        RawTable {
            agents: named.agents,
            objects: named.objects,
            rows,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RandomMatching {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTable::deserialize(d)?;
        let text = serde_json::to_string(&raw).map_err(D::Error::custom);
        parse_matching(&text?)
            .map(|m| m.matching)
            .map_err(D::Error::custom)
    }
}

impl Serialize for IdealLottery {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.shares().iter().map(format_rational))
    }
}

impl<'de> Deserialize<'de> for IdealLottery {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        let shares = raw
            .iter()
            .map(|s| parse_rational(s).map_err(D::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        IdealLottery::new(shares).map_err(D::Error::custom)
    }
}
