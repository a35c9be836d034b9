use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::Strategy;
use crate::error::{Error, Result};
use crate::trimming::{CaseName, CaseParams};

/// Largest supported spline degree.
pub const MAX_DEGREE: usize = 6;

/// One strategy or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategySelection {
    All,
    Reference,
    Wq,
    Hybrid,
    Dwq,
}

impl StrategySelection {
    pub fn strategies(self) -> Vec<Strategy> {
        match self {
            StrategySelection::All => Strategy::ALL.to_vec(),
            StrategySelection::Reference => vec![Strategy::Reference],
            StrategySelection::Wq => vec![Strategy::Wq],
            StrategySelection::Hybrid => vec![Strategy::Hybrid],
            StrategySelection::Dwq => vec![Strategy::Dwq],
        }
    }
}

impl FromStr for StrategySelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(StrategySelection::All);
        }
        Ok(match s.parse::<Strategy>()? {
            Strategy::Reference => StrategySelection::Reference,
            Strategy::Wq => StrategySelection::Wq,
            Strategy::Hybrid => StrategySelection::Hybrid,
            Strategy::Dwq => StrategySelection::Dwq,
        })
    }
}

impl fmt::Display for StrategySelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StrategySelection::All => "all",
            StrategySelection::Reference => "reference",
            StrategySelection::Wq => "wq",
            StrategySelection::Hybrid => "hybrid",
            StrategySelection::Dwq => "dwq",
        };
        f.write_str(s)
    }
}

/// Everything an experiment run needs. Fields missing from a JSON file take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cases: Vec<CaseName>,
    pub strategy: StrategySelection,
    pub degrees: Vec<usize>,
    /// Elements per side.
    pub meshes: Vec<usize>,
    pub out: PathBuf,
    pub parallel: bool,
    /// Seeds the interleaving order of timing repetitions.
    pub seed: u64,
    /// Timing repetitions after one warm-up run.
    pub repetitions: usize,
    /// Also write quadrature rules and cut-cell points.
    pub dump_rules: bool,
    pub params: CaseParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cases: CaseName::ALL.to_vec(),
            strategy: StrategySelection::All,
            degrees: (1..=MAX_DEGREE).collect(),
            meshes: vec![5, 10, 20, 40],
            out: PathBuf::from("out"),
            parallel: false,
            seed: 0,
            repetitions: 5,
            dump_rules: false,
            params: CaseParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(Error::Config("no case selected".into()));
        }
        if self.degrees.is_empty() || self.degrees.iter().any(|&p| p == 0 || p > MAX_DEGREE) {
            return Err(Error::Config(format!("degrees must be non-empty and within 1..={MAX_DEGREE}")));
        }
        if self.meshes.is_empty() || self.meshes.contains(&0) {
            return Err(Error::Config("meshes must be non-empty and positive".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("at least one timing repetition is needed".into()));
        }
        Ok(())
    }

    /// Largest mesh of the list.
    pub fn finest_mesh(&self) -> usize {
        self.meshes.iter().copied().max().unwrap_or(1)
    }
}

/// Parses `1..6`, `1..=6`, `3` or `1,2,4`.
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse list {s:?}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    if let Some((a, b)) = s.split_once("..") {
        let (lo, hi) = (num(a)?, num(b.trim_start_matches('='))?);
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect()
}

/// Parses `all` or a comma-separated list of case names.
pub fn parse_cases(s: &str) -> Result<Vec<CaseName>> {
    if s == "all" {
        return Ok(CaseName::ALL.to_vec());
    }
    s.split(',').map(|t| t.trim().parse()).collect()
}
