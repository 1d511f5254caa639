//! Plain-text documents describing MDPs and scenario runs.
//!
//! ```text
//! # comments run to the end of the line
//! [mdp]
//! n_states = 3
//! n_actions = 2
//! discount = 0.9
//!
//! [transition]          # one section per (s, a) row
//! s = 0
//! a = 1
//! next = 1:0.5, 2:0.5   # s':p pairs; repeated s' are summed
//!
//! [reward]
//! kind = goal           # or: kind = table
//! goal = 2              # or: values = 0, 0, 1
//!
//! [scenario]
//! id = played_out
//! seed = 7
//! ```
//!
//! Sections other than `transition` appear at most once, keys at most once
//! per section, and unknown sections or keys are rejected with their line.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mdp::{MdpSpec, TabularMdp, TransitionRow};
use crate::reward::RewardModel;

const SECTIONS: &[&str] = &["mdp", "transition", "reward", "scenario"];

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(Error::config(e.line, format!("unknown key `{}` in [{}]", e.key, self.name))),
            None => Ok(()),
        }
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key).map(|e| parse_value(e)).transpose()
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?
            .ok_or_else(|| Error::config(self.line, format!("[{}] is missing `{key}`", self.name)))
    }

    /// Comma-separated list.
    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.get(key) else { return Ok(None) };
        if e.value.trim().is_empty() {
            return Ok(Some(Vec::new()));
        }
        e.value
            .split(',')
            .map(|item| {
                item.trim()
                    .parse()
                    .map_err(|_| Error::config(e.line, format!("cannot parse `{}` in `{}`", item.trim(), e.key)))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Line of `key`, or of the section header when absent.
    pub fn line_of(&self, key: &str) -> usize {
        self.get(key).map_or(self.line, |e| e.line)
    }
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| Error::config(e.line, format!("cannot parse value `{}` for `{}`", e.value, e.key)))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(line, "unterminated section header"))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::config(line, format!("unknown section [{name}]")));
                }
                if name != "transition" && sections.iter().any(|s| s.name == name) {
                    return Err(Error::config(line, format!("section [{name}] given twice")));
                }
                sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("expected `key = value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(Error::config(line, "empty key"));
            }
            let section = sections
                .last_mut()
                .ok_or_else(|| Error::config(line, "entry before any section header"))?;
            if section.get(key).is_some() {
                return Err(Error::config(line, format!("key `{key}` given twice in [{}]", section.name)));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(Self { sections })
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn sections_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.name == name)
    }

    pub fn has_mdp(&self) -> bool {
        self.section("mdp").is_some() || self.section("transition").is_some() || self.section("reward").is_some()
    }
}

/// An MDP and optional reward read from a [`Document`].
#[derive(Debug, Clone, PartialEq)]
pub struct MdpDocument {
    pub spec: MdpSpec,
    pub mdp: TabularMdp,
    pub reward: Option<RewardModel>,
}

pub fn parse_mdp_document(text: &str) -> Result<MdpDocument> {
    let doc = Document::parse(text)?;
    if let Some(s) = doc.section("scenario") {
        return Err(Error::config(s.line, "unexpected [scenario] section in an MDP document"));
    }
    mdp_from_document(&doc)
}

/// Reads the `[mdp]`, `[transition]` and `[reward]` sections.
pub fn mdp_from_document(doc: &Document) -> Result<MdpDocument> {
    let head = doc
        .section("mdp")
        .ok_or_else(|| Error::config(1, "missing [mdp] section"))?;
    head.check_keys(&["n_states", "n_actions", "discount"])?;
    let mut spec = MdpSpec::new(head.require("n_states")?, head.require("n_actions")?, head.require("discount")?);
    if spec.n_states == 0 || spec.n_actions == 0 {
        return Err(Error::config(head.line, "n_states and n_actions must be positive"));
    }

    let mut row_lines = Vec::new();
    for sec in doc.sections_named("transition") {
        sec.check_keys(&["s", "a", "next"])?;
        let next_entry = sec
            .get("next")
            .ok_or_else(|| Error::config(sec.line, "[transition] is missing `next`"))?;
        spec.rows.push(TransitionRow {
            state: sec.require("s")?,
            action: sec.require("a")?,
            next: parse_next(next_entry)?,
        });
        row_lines.push(sec.line);
    }

    let mdp = spec.build().map_err(|e| {
        let line = match &e {
            Error::NonStochasticRow { state, action, .. }
            | Error::BadProbability { state, action, .. }
            | Error::DuplicateRow { state, action } => spec
                .rows
                .iter()
                .position(|r| r.state == *state && r.action == *action)
                .map_or(head.line, |i| row_lines[i]),
            Error::IndexOutOfRange { .. } => row_lines.first().copied().unwrap_or(head.line),
            _ => head.line,
        };
        Error::config(line, e.to_string())
    })?;

    let reward = doc.section("reward").map(|sec| reward_from_section(sec, spec.n_states)).transpose()?;
    Ok(MdpDocument { spec, mdp, reward })
}

fn parse_next(e: &Entry) -> Result<Vec<(usize, f64)>> {
    e.value
        .split(',')
        .map(|pair| {
            let bad = || Error::config(e.line, format!("expected `state:probability`, found `{}`", pair.trim()));
            let (s, p) = pair.split_once(':').ok_or_else(bad)?;
            Ok((s.trim().parse().map_err(|_| bad())?, p.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn reward_from_section(sec: &Section, n_states: usize) -> Result<RewardModel> {
    let kind: String = sec.require("kind")?;
    let at = |key: &str| sec.line_of(key);
    match kind.as_str() {
        "goal" => {
            sec.check_keys(&["kind", "goal"])?;
            RewardModel::goal_indicator(n_states, sec.require("goal")?).map_err(|e| Error::config(at("goal"), e.to_string()))
        }
        "table" => {
            sec.check_keys(&["kind", "values"])?;
            let values = sec
                .parse_list::<f64>("values")?
                .ok_or_else(|| Error::config(sec.line, "[reward] is missing `values`"))?;
            if values.len() != n_states {
                return Err(Error::config(
                    at("values"),
                    format!("expected {n_states} reward values, found {}", values.len()),
                ));
            }
            RewardModel::table(values).map_err(|e| Error::config(at("values"), e.to_string()))
        }
        other => Err(Error::config(at("kind"), format!("unknown reward kind `{other}`"))),
    }
}
