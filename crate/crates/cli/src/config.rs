use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Serialize, Serializer};

use crate::error::CliError;

pub const DEFAULT_REPLICATES: usize = 10_000;
pub const DEFAULT_EVENTS: u64 = 1_000_000;

/// The seven `(N, n)` rows and five traffic levels of the reference table.
pub const TABLE_CELLS: [(u32, u32); 7] = [
    (10, 5),
    (40, 5),
    (40, 10),
    (80, 5),
    (80, 20),
    (100, 5),
    (100, 25),
];
pub const TABLE_RHOS: [f64; 5] = [0.01, 0.02, 0.05, 0.10, 0.50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Chain,
    Simulate,
    Fpt,
    Sweep,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Chain => "chain",
            CommandKind::Simulate => "simulate",
            CommandKind::Fpt => "fpt",
            CommandKind::Sweep => "sweep",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            CommandKind::Chain => &["n_prices", "cutoff", "exact", "output", "format"],
            CommandKind::Simulate => &[
                "n_prices", "cutoff", "rho", "mu", "events", "burn_in", "opening", "seed",
                "output", "format",
            ],
            CommandKind::Fpt => &[
                "n_prices",
                "cutoff",
                "rho",
                "mu",
                "replicates",
                "seed",
                "event_cap",
                "bins",
                "permutations",
                "output",
                "format",
            ],
            CommandKind::Sweep => &[
                "cells",
                "rho",
                "mu",
                "replicates",
                "seed",
                "event_cap",
                "output",
                "format",
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// CSV tables plus run.json
    #[default]
    Csv,
    /// run.json only
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

/// One `(N, n)` grid of a sweep, written `N:n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub n_prices: u32,
    pub cutoff: u32,
}

impl FromStr for GridCell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("expected N:n, got {s:?}"))?;
        let parse = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("{x:?}: {e}"));
        Ok(GridCell {
            n_prices: parse(a)?,
            cutoff: parse(b)?,
        })
    }
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.n_prices, self.cutoff)
    }
}

impl Serialize for GridCell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Flags shared by all subcommands; each subcommand accepts the subset it uses.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Read settings from a `key = value` file; flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Number of prices N on the grid 1..=N
    #[arg(short = 'N', long = "n-prices", value_name = "N")]
    pub n_prices: Option<u32>,
    /// Cut-off n: width of the limit-order placement interval
    #[arg(short = 'n', long, value_name = "n")]
    pub cutoff: Option<u32>,
    /// Traffic intensity lambda/mu (comma-separated list for fpt and sweep)
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    /// Market-order rate per side [default: 1]
    #[arg(long)]
    pub mu: Option<f64>,
    /// State-changing order arrivals to simulate [default: 1000000]
    #[arg(long)]
    pub events: Option<u64>,
    /// Leading arrivals whose trades are discarded [default: events / 10]
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Independent replicates per parameter set [default: 10000]
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: out]
    #[arg(short, long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the transition matrix as exact fractions
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub exact: Option<bool>,
    /// Opening price [default: floor((N + 1) / 2)]
    #[arg(long)]
    pub opening: Option<u32>,
    /// Arrival cap per first-passage run; capped runs are reported as censored [default: 1000000000]
    #[arg(long)]
    pub event_cap: Option<u64>,
    /// Histogram bins for log T [default: Freedman-Diaconis]
    #[arg(long)]
    pub bins: Option<usize>,
    /// Permutations for the KS p-value [default: 10000]
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Sweep grid as N:n pairs [default: the seven reference rows]
    #[arg(long, value_delimiter = ',')]
    pub cells: Option<Vec<GridCell>>,
}

/// Fully resolved settings of one run, echoed into run.json.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n_prices: Option<u32>,
    #[serde(rename = "n", skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<u32>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<GridCell>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rho: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opening: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event_cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    pub output: PathBuf,
    pub format: Format,
}

impl ExperimentConfig {
    pub fn grid(&self) -> (u32, u32) {
        (
            self.n_prices.expect("resolved for this command"),
            self.cutoff.expect("resolved for this command"),
        )
    }

    pub fn mu(&self) -> f64 {
        self.mu.expect("resolved for this command")
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("resolved for this command")
    }

    pub fn replicates(&self) -> usize {
        self.replicates.expect("resolved for this command")
    }
}

/// Raw `key = value` settings from a config file.
struct FileSettings {
    path: PathBuf,
    values: BTreeMap<String, (String, usize)>,
}

const KNOWN_KEYS: [&str; 16] = [
    "n_prices",
    "cutoff",
    "rho",
    "mu",
    "events",
    "burn_in",
    "replicates",
    "seed",
    "output",
    "format",
    "exact",
    "opening",
    "event_cap",
    "bins",
    "permutations",
    "cells",
];

fn canonical_key(key: &str) -> String {
    match key {
        "N" => "n_prices".to_string(),
        "n" => "cutoff".to_string(),
        k => k.replace('-', "_"),
    }
}

impl FileSettings {
    fn empty() -> Self {
        Self {
            path: PathBuf::new(),
            values: BTreeMap::new(),
        }
    }

    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let where_ = format!("{}:{}", path.display(), i + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{where_}: expected `key = value`")))?;
            let key = canonical_key(key.trim());
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::config(
                    &key,
                    format!("unknown setting at {where_}"),
                ));
            }
            if values
                .insert(key.clone(), (value.trim().to_string(), i + 1))
                .is_some()
            {
                return Err(CliError::config(&key, format!("set twice ({where_})")));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            values,
        })
    }
}

/// Merges flags over file settings, remembering which keys were given.
struct Merge {
    file: FileSettings,
    given: BTreeSet<&'static str>,
}

impl Merge {
    fn parse<T: FromStr>(&self, key: &str, raw: &str, line: usize) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        raw.parse().map_err(|e| {
            CliError::config(
                key,
                format!(
                    "{}:{line}: cannot parse {raw:?}: {e}",
                    self.file.path.display()
                ),
            )
        })
    }

    fn one<T: FromStr>(&mut self, key: &'static str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            self.given.insert(key);
            return Ok(flag);
        }
        let Some((raw, line)) = self.file.values.get(key).cloned() else {
            return Ok(None);
        };
        self.given.insert(key);
        self.parse(key, &raw, line).map(Some)
    }

    fn list<T: FromStr>(
        &mut self,
        key: &'static str,
        flag: Option<Vec<T>>,
    ) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            self.given.insert(key);
            return Ok(flag);
        }
        let Some((raw, line)) = self.file.values.get(key).cloned() else {
            return Ok(None);
        };
        self.given.insert(key);
        raw.split(',')
            .map(|x| self.parse(key, x.trim(), line))
            .collect::<Result<_, _>>()
            .map(Some)
    }
}

fn required<T>(key: &str, value: Option<T>) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::config(key, "required"))
}

fn positive(key: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(CliError::config(
            key,
            format!("must be finite and positive, got {x}"),
        ))
    }
}

fn at_least<T: PartialOrd + fmt::Display>(key: &str, x: T, min: T) -> Result<T, CliError> {
    if x >= min {
        Ok(x)
    } else {
        Err(CliError::config(
            key,
            format!("must be at least {min}, got {x}"),
        ))
    }
}

/// Resolves flags and the optional config file into a validated configuration.
pub fn resolve(command: CommandKind, flags: Flags) -> Result<ExperimentConfig, CliError> {
    let file = match &flags.config {
        Some(path) => FileSettings::load(path)?,
        None => FileSettings::empty(),
    };
    let mut m = Merge {
        file,
        given: BTreeSet::new(),
    };
    let n_prices = m.one("n_prices", flags.n_prices)?;
    let cutoff = m.one("cutoff", flags.cutoff)?;
    let rho = m.list("rho", flags.rho)?;
    let mu = m.one("mu", flags.mu)?;
    let events = m.one("events", flags.events)?;
    let burn_in = m.one("burn_in", flags.burn_in)?;
    let replicates = m.one("replicates", flags.replicates)?;
    let seed = m.one("seed", flags.seed)?;
    let output = m.one("output", flags.output)?;
    let format = m.one("format", flags.format)?;
    let exact = m.one("exact", flags.exact)?;
    let opening = m.one("opening", flags.opening)?;
    let event_cap = m.one("event_cap", flags.event_cap)?;
    let bins = m.one("bins", flags.bins)?;
    let permutations = m.one("permutations", flags.permutations)?;
    let cells = m.list("cells", flags.cells)?;

    if let Some(key) = m.given.iter().find(|k| !command.keys().contains(k)) {
        return Err(CliError::config(
            key,
            format!("does not apply to `{}`", command.name()),
        ));
    }

    let mut cfg = ExperimentConfig {
        command,
        n_prices: None,
        cutoff: None,
        cells: Vec::new(),
        rho: Vec::new(),
        mu: None,
        events: None,
        burn_in: None,
        opening: None,
        replicates: None,
        seed: None,
        event_cap: None,
        bins: None,
        permutations: None,
        exact: None,
        output: output.unwrap_or_else(|| PathBuf::from("out")),
        format: format.unwrap_or_default(),
    };

    if command != CommandKind::Sweep {
        cfg.n_prices = Some(at_least("N", required("N", n_prices)?, 2)?);
        cfg.cutoff = Some(at_least("n", required("n", cutoff)?, 1)?);
    }
    if command != CommandKind::Chain {
        cfg.mu = Some(positive("mu", mu.unwrap_or(1.0))?);
        cfg.seed = Some(seed.unwrap_or(0));
    }
    let rho_list = |default: Option<Vec<f64>>| -> Result<Vec<f64>, CliError> {
        let list = rho
            .clone()
            .or(default)
            .ok_or_else(|| CliError::config("rho", "required"))?;
        if list.is_empty() {
            return Err(CliError::config("rho", "empty list"));
        }
        list.into_iter().map(|r| positive("rho", r)).collect()
    };

    match command {
        CommandKind::Chain => {
            cfg.exact = Some(exact.unwrap_or(false));
        }
        CommandKind::Simulate => {
            cfg.rho = rho_list(None)?;
            if cfg.rho.len() != 1 {
                return Err(CliError::config("rho", "simulate takes a single value"));
            }
            let events = at_least("events", events.unwrap_or(DEFAULT_EVENTS), 1)?;
            let burn_in = burn_in.unwrap_or(events / 10);
            if burn_in >= events {
                return Err(CliError::config(
                    "burn_in",
                    format!("must be below events ({burn_in} >= {events})"),
                ));
            }
            let (n_prices, _) = cfg.grid();
            let opening = opening.unwrap_or(n_prices.div_ceil(2));
            if !(1..=n_prices).contains(&opening) {
                return Err(CliError::config(
                    "opening",
                    format!("must lie in 1..={n_prices}, got {opening}"),
                ));
            }
            cfg.events = Some(events);
            cfg.burn_in = Some(burn_in);
            cfg.opening = Some(opening);
        }
        CommandKind::Fpt => {
            cfg.rho = rho_list(None)?;
            at_least("N", cfg.grid().0, 3)?;
            cfg.replicates = Some(at_least(
                "replicates",
                replicates.unwrap_or(DEFAULT_REPLICATES),
                1,
            )?);
            cfg.event_cap = Some(at_least(
                "event_cap",
                event_cap.unwrap_or(cda_core::simulator::DEFAULT_EVENT_CAP),
                1,
            )?);
            cfg.bins = bins.map(|b| at_least("bins", b, 1)).transpose()?;
            cfg.permutations = Some(at_least(
                "permutations",
                permutations.unwrap_or(DEFAULT_REPLICATES),
                1,
            )?);
        }
        CommandKind::Sweep => {
            cfg.rho = rho_list(Some(TABLE_RHOS.to_vec()))?;
            cfg.cells = cells.unwrap_or_else(|| {
                TABLE_CELLS
                    .iter()
                    .map(|&(n_prices, cutoff)| GridCell { n_prices, cutoff })
                    .collect()
            });
            if cfg.cells.is_empty() {
                return Err(CliError::config("cells", "empty list"));
            }
            cfg.replicates = Some(at_least(
                "replicates",
                replicates.unwrap_or(DEFAULT_REPLICATES),
                1,
            )?);
            cfg.event_cap = Some(at_least(
                "event_cap",
                event_cap.unwrap_or(cda_core::simulator::DEFAULT_EVENT_CAP),
                1,
            )?);
        }
    }
    Ok(cfg)
}
