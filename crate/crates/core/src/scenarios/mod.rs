//! Executable behavioral scenarios with config ingestion and CSV reports.
//!
//! Every scenario reads a [`ScenarioConfig`], produces a [`ScenarioReport`]
//! of numeric metric rows, and evaluates a named expectation over those rows.

mod increasing_sequences;
mod information_choice;
mod played_out;
mod task_selection;

use std::fmt;
use std::io;
use std::path::PathBuf;
use std::str::FromStr;

use crate::config::{mdp_from_document, Document, MdpDocument, Section};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::mdp::TabularMdp;

pub use increasing_sequences::{sequence_fixture, EstimateVariant, SequenceParams};
pub use information_choice::{information_fixture, BiasPattern, InfoChoiceParams, InformationFixture};
pub use played_out::PlayedOutParams;
pub use task_selection::{GoalStatus, TaskSelectionParams};

/// Orderings must clear this margin to count as strict.
pub const SIGN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    PlayedOut,
    IncreasingSequences,
    InformationChoice,
    TaskSelection,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [
        ScenarioId::PlayedOut,
        ScenarioId::IncreasingSequences,
        ScenarioId::InformationChoice,
        ScenarioId::TaskSelection,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioId::PlayedOut => "played_out",
            ScenarioId::IncreasingSequences => "increasing_sequences",
            ScenarioId::InformationChoice => "information_choice",
            ScenarioId::TaskSelection => "task_selection",
        }
    }

    pub fn summary(&self) -> &'static str {
        match self {
            ScenarioId::PlayedOut => "a single mastered goal loses its expected prediction error",
            ScenarioId::IncreasingSequences => "rising versus falling reward sequences with equal totals",
            ScenarioId::InformationChoice => "informative versus uninformative cues under biased estimates",
            ScenarioId::TaskSelection => "goal choice among mastered, fresh and overestimated goals",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioParams {
    PlayedOut(PlayedOutParams),
    IncreasingSequences(SequenceParams),
    InformationChoice(InfoChoiceParams),
    TaskSelection(TaskSelectionParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub id: ScenarioId,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub params: ScenarioParams,
}

const COMMON_KEYS: &[&str] = &["id", "seed", "output"];

fn keys_with(extra: &[&'static str]) -> Vec<&'static str> {
    COMMON_KEYS.iter().chain(extra).copied().collect()
}

impl ScenarioConfig {
    /// Built-in parameters for `id`.
    pub fn default_for(id: ScenarioId, seed: u64) -> Self {
        let params = match id {
            ScenarioId::PlayedOut => ScenarioParams::PlayedOut(PlayedOutParams::default()),
            ScenarioId::IncreasingSequences => ScenarioParams::IncreasingSequences(SequenceParams::default()),
            ScenarioId::InformationChoice => ScenarioParams::InformationChoice(InfoChoiceParams::default()),
            ScenarioId::TaskSelection => ScenarioParams::TaskSelection(TaskSelectionParams::default()),
        };
        Self {
            id,
            seed,
            output: None,
            params,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        let sec = doc
            .section("scenario")
            .ok_or_else(|| Error::config(1, "missing [scenario] section"))?;
        let id: ScenarioId = {
            let e = sec
                .get("id")
                .ok_or_else(|| Error::config(sec.line, "[scenario] is missing `id`"))?;
            e.value.parse().map_err(|m: String| Error::config(e.line, m))?
        };
        let seed: u64 = sec.require("seed")?;
        let output = sec.get("output").map(|e| PathBuf::from(&e.value));
        let mdp = if doc.has_mdp() { Some(mdp_from_document(&doc)?) } else { None };
        let reject_world = |mdp: &Option<MdpDocument>| -> Result<()> {
            match (mdp, doc.section("mdp")) {
                (Some(_), Some(head)) => Err(Error::config(head.line, format!("scenario `{id}` builds its own MDP"))),
                _ => Ok(()),
            }
        };
        let params = match id {
            ScenarioId::PlayedOut => {
                sec.check_keys(&keys_with(PlayedOutParams::KEYS))?;
                ScenarioParams::PlayedOut(PlayedOutParams::from_section(sec, mdp)?)
            }
            ScenarioId::IncreasingSequences => {
                reject_world(&mdp)?;
                sec.check_keys(&keys_with(SequenceParams::KEYS))?;
                ScenarioParams::IncreasingSequences(SequenceParams::from_section(sec)?)
            }
            ScenarioId::InformationChoice => {
                reject_world(&mdp)?;
                sec.check_keys(&keys_with(InfoChoiceParams::KEYS))?;
                ScenarioParams::InformationChoice(InfoChoiceParams::from_section(sec)?)
            }
            ScenarioId::TaskSelection => {
                sec.check_keys(&keys_with(TaskSelectionParams::KEYS))?;
                ScenarioParams::TaskSelection(TaskSelectionParams::from_section(sec, mdp)?)
            }
        };
        Ok(Self { id, seed, output, params })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// The MDP a goal-based scenario runs in.
#[derive(Debug, Clone, PartialEq)]
pub enum World {
    /// Deterministic corridor with actions stay / left / right.
    Corridor { length: usize, discount: f64 },
    /// MDP given by the config's `[mdp]` and `[transition]` sections.
    Custom(TabularMdp),
}

impl World {
    pub const KEYS: &'static [&'static str] = &["corridor_length", "discount"];

    pub fn build(&self) -> Result<TabularMdp> {
        match self {
            World::Corridor { length, discount } => fixtures::corridor(*length, *discount),
            World::Custom(mdp) => Ok(mdp.clone()),
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            World::Corridor { length, .. } => *length,
            World::Custom(mdp) => mdp.n_states(),
        }
    }

    pub(crate) fn from_section(sec: &Section, mdp: Option<MdpDocument>, default: World) -> Result<Self> {
        if let Some(doc) = mdp {
            if let Some(e) = Self::KEYS.iter().find_map(|k| sec.get(k)) {
                return Err(Error::config(e.line, format!("`{}` conflicts with the [mdp] section", e.key)));
            }
            return Ok(World::Custom(doc.mdp));
        }
        let World::Corridor { length, discount } = default else {
            return Ok(default);
        };
        let length: usize = sec.parse_or("corridor_length", length)?;
        let discount: f64 = sec.parse_or("discount", discount)?;
        if length < 2 {
            return Err(range_error(sec, "corridor_length", "must be at least 2"));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(range_error(sec, "discount", "must lie in [0, 1)"));
        }
        Ok(World::Corridor { length, discount })
    }
}

/// Runs the scenario named by `config`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport> {
    let report = match &config.params {
        ScenarioParams::PlayedOut(p) => played_out::run(p, config.seed)?,
        ScenarioParams::IncreasingSequences(p) => increasing_sequences::run(p)?,
        ScenarioParams::InformationChoice(p) => information_choice::run(p)?,
        ScenarioParams::TaskSelection(p) => task_selection::run(p)?,
    };
    debug_assert_eq!(report.id, config.id);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub id: ScenarioId,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Name of the predicate evaluated over `rows`.
    pub expectation: String,
    pub passed: bool,
    /// Which oracle produced the metrics.
    pub provenance: String,
}

impl ScenarioReport {
    pub(crate) fn new(id: ScenarioId, columns: &[&str], rows: Vec<Vec<f64>>, provenance: &str) -> Result<Self> {
        for row in &rows {
            if row.len() != columns.len() {
                return Err(Error::DimensionMismatch {
                    what: "report row",
                    expected: columns.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("report metric"));
            }
        }
        Ok(Self {
            id,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
            expectation: String::new(),
            passed: false,
            provenance: provenance.to_string(),
        })
    }

    pub(crate) fn expect(mut self, name: &str, passed: bool) -> Self {
        self.expectation = name.to_string();
        self.passed = passed;
        self
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Header row plus one line per metric row, LF-terminated, reals in
    /// shortest round-trip decimal form.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let io_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(io_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(f64::to_string)).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Header and numeric rows of a report CSV.
pub fn read_report_csv<R: io::Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let io_err = |e: csv::Error| Error::Io(e.to_string());
    let columns = r.headers().map_err(io_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        let row = rec
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| Error::config(i + 2, format!("cannot parse metric `{cell}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((columns, rows))
}

pub(crate) fn parse_choice<T>(sec: &Section, key: &str, default: T, options: &[(&str, T)]) -> Result<T>
where
    T: Copy,
{
    let Some(e) = sec.get(key) else { return Ok(default) };
    options
        .iter()
        .find(|(name, _)| *name == e.value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            Error::config(e.line, format!("`{}` must be one of {}", key, names.join(", ")))
        })
}

pub(crate) fn range_error(sec: &Section, key: &str, message: &str) -> Error {
    Error::config(sec.line_of(key), format!("`{key}` {message}"))
}
