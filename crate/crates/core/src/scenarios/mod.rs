//! Foraging and flocking case studies, built from a [`ScenarioConfig`].
//!
//! | `scenario`              | substrate            | model                  |
//! |-------------------------|----------------------|------------------------|
//! | `foraging_broadcast`    | message network      | [`BroadcastForaging`]  |
//! | `foraging_scel`         | tuple space          | [`ScelModel`]          |
//! | `foraging_ispl`         | interpreted system   | [`SystemSpec`]         |
//! | `flocking_vstig`        | virtual stigmergy    | [`StigFlocking`]       |
//! | `flocking_voter`        | direct broadcast     | [`VoterFlocking`]      |
//! | `flocking_ispl`         | interpreted system   | [`SystemSpec`]         |
//! | `flocking_scel_lamport` | tuple space          | [`ScelModel`]          |
//! | `ispl`                  | interpreted system   | loaded from `spec`     |

mod broadcast;
mod ispl;
mod scel;
mod voter;
mod vstig;

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use broadcast::{foraging_broadcast, BroadcastForaging, BroadcastState, Forager};
pub use ispl::{flocking_ispl, flocking_ispl_text, foraging_ispl, foraging_ispl_text};
pub use scel::{flocking_scel_lamport, foraging_scel, position, ScelKind, ScelModel, ScelState};
pub use voter::{flocking_voter, Voter, VoterFlocking, VoterState};
pub use vstig::{flocking_vstig, StigAgent, StigFlocking, StigState};

use crate::interp::{IsplError, SystemSpec};
use crate::kernel::Pos;
use crate::world::{Arena, Topology, WorldError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Ispl(#[from] IsplError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ForagingBroadcast,
    ForagingScel,
    ForagingIspl,
    FlockingVstig,
    #[default]
    FlockingVoter,
    FlockingIspl,
    FlockingScelLamport,
    Ispl,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ForagingBroadcast => "foraging_broadcast",
            ScenarioKind::ForagingScel => "foraging_scel",
            ScenarioKind::ForagingIspl => "foraging_ispl",
            ScenarioKind::FlockingVstig => "flocking_vstig",
            ScenarioKind::FlockingVoter => "flocking_voter",
            ScenarioKind::FlockingIspl => "flocking_ispl",
            ScenarioKind::FlockingScelLamport => "flocking_scel_lamport",
            ScenarioKind::Ispl => "ispl",
        }
    }
}

/// Who can hear whom in the message-passing flocking scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Network {
    #[default]
    Complete,
    Ring,
    Line,
    /// Agents within `comm_range` of each other, at send time.
    Range,
}

/// Every knob of every scenario. Unused knobs are ignored by scenarios that
/// do not read them; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub width: i32,
    pub height: i32,
    pub topology: Topology,
    /// Robots, foragers or flocking agents.
    pub agents: usize,
    /// Start cells of the agents, `[x, y]`; agent `i` uses entry `i`.
    /// Missing entries get a default cell (interpreted systems: free).
    pub positions: Vec<[i32; 2]>,
    /// Food item cells; must be distinct.
    pub items: Vec<[i32; 2]>,
    /// Interpreted foraging with free item positions: number of items.
    pub item_count: Option<usize>,
    pub comm_range: i64,
    pub sense_range: i64,
    /// Sensor range of tuple-space foragers (`range` attribute).
    pub forager_range: i64,
    pub queue_capacity: usize,
    pub walk: bool,
    pub network: Network,
    pub angle_step: u16,
    /// Rotation threshold in degrees; defaults to `angle_step`.
    pub threshold: Option<u16>,
    /// Same starting heading for every agent instead of the per-agent seed.
    pub initial_direction: Option<u16>,
    pub period: u32,
    pub zealots: Vec<u32>,
    pub key: String,
    /// Interpreted-system description file for `scenario = "ispl"`.
    pub spec: Option<PathBuf>,
    pub seed: u64,
    pub max_ticks: u64,
    pub runs: usize,
    pub budget: usize,
    pub workers: usize,
    pub formula: Option<String>,
    pub proposition: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: ScenarioKind::default(),
            width: 10,
            height: 10,
            topology: Topology::Bounded,
            agents: 2,
            positions: Vec::new(),
            items: Vec::new(),
            item_count: None,
            comm_range: 1,
            sense_range: 0,
            forager_range: 1,
            queue_capacity: 4,
            walk: true,
            network: Network::Complete,
            angle_step: 45,
            threshold: None,
            initial_direction: None,
            period: 20,
            zealots: Vec::new(),
            key: "direction".into(),
            spec: None,
            seed: 0,
            max_ticks: 1000,
            runs: 100,
            budget: 10_000_000,
            workers: 1,
            formula: None,
            proposition: None,
        }
    }
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioConfig { scenario: kind, ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Self::from_toml_with(text, &[])
    }

    /// Parses a config and applies `key=value` overrides on top. Values are
    /// read as TOML (`width=4`, `items=[[2,2]]`), falling back to a plain
    /// string (`scenario=flocking_ispl`).
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let Some((k, v)) = o.split_once('=') else {
                return Err(ConfigError::Parse(format!("override `{o}` is not key=value")));
            };
            let value = format!("v = {v}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(v.to_string()));
            table.insert(k.trim().to_string(), value);
        }
        table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    pub fn arena(&self) -> Result<Arena, ConfigError> {
        Ok(Arena::new(self.width, self.height, self.topology)?)
    }

    pub fn step(&self) -> Result<u16, ConfigError> {
        if self.angle_step == 0 || 360 % self.angle_step != 0 {
            return invalid(format!("angle_step {} must divide 360", self.angle_step));
        }
        Ok(self.angle_step)
    }

    fn threshold(&self) -> u16 {
        self.threshold.unwrap_or(self.angle_step)
    }

    fn item_cells(&self, arena: &Arena) -> Result<Vec<Pos>, ConfigError> {
        let cells = self.items.iter().map(|&[x, y]| arena.check(Pos::new(x, y))).collect::<Result<Vec<_>, _>>()?;
        for (i, p) in cells.iter().enumerate() {
            if cells[..i].contains(p) {
                return invalid(format!("two items share cell {p}"));
            }
        }
        Ok(cells)
    }

    /// Start cell of agent `i`: configured, or spread over the corners and
    /// then row by row.
    fn agent_cell(&self, arena: &Arena, i: usize) -> Result<Pos, ConfigError> {
        if let Some(&[x, y]) = self.positions.get(i) {
            return Ok(arena.check(Pos::new(x, y))?);
        }
        let (w, h) = (arena.width(), arena.height());
        let corners = [Pos::new(1, 1), Pos::new(w, h), Pos::new(1, h), Pos::new(w, 1)];
        if i < corners.len() {
            return Ok(corners[i]);
        }
        let k = (i - corners.len()) as i32 % (w * h);
        Ok(Pos::new(1 + k % w, 1 + k / w))
    }

    fn require_agents(&self, min: usize) -> Result<(), ConfigError> {
        if self.agents < min {
            return invalid(format!("{} needs at least {min} agent(s)", self.scenario.name()));
        }
        Ok(())
    }
}

/// Heading of agent `id` drawn from a generator seeded with `id * id`,
/// quantised to `step` degrees.
pub fn seeded_heading(id: u32, step: u16) -> u16 {
    let mut r = crate::engine::rng(u64::from(id) * u64::from(id));
    r.gen_range(0..360 / step) * step
}

/// Undirected neighbour lists for the fixed networks; `Range` is resolved
/// by the caller from positions.
fn fixed_links(n: usize, network: Network) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    j != i
                        && match network {
                            Network::Complete | Network::Range => true,
                            Network::Ring => (i + 1) % n == j || (j + 1) % n == i,
                            Network::Line => i.abs_diff(j) == 1,
                        }
                })
                .collect()
        })
        .collect()
}

/// A built scenario. Use [`dispatch!`](crate::dispatch) to run engine
/// operations on whichever model it holds.
#[derive(Clone, Debug)]
pub enum Scenario {
    Interpreted(SystemSpec),
    Broadcast(BroadcastForaging),
    Scel(ScelModel),
    Stigmergy(StigFlocking),
    Voter(VoterFlocking),
}

/// Evaluates `$body` with `$m` bound to the model inside a [`Scenario`].
#[macro_export]
macro_rules! dispatch {
    ($scenario:expr, $m:ident => $body:expr) => {
        match $scenario {
            $crate::scenarios::Scenario::Interpreted($m) => $body,
            $crate::scenarios::Scenario::Broadcast($m) => $body,
            $crate::scenarios::Scenario::Scel($m) => $body,
            $crate::scenarios::Scenario::Stigmergy($m) => $body,
            $crate::scenarios::Scenario::Voter($m) => $body,
        }
    };
}

/// Builds the scenario named by `cfg.scenario`. For `ispl` the description
/// is read from `cfg.spec`.
pub fn build(cfg: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    cfg.arena()?;
    Ok(match cfg.scenario {
        ScenarioKind::ForagingBroadcast => Scenario::Broadcast(foraging_broadcast(cfg)?),
        ScenarioKind::ForagingScel => Scenario::Scel(foraging_scel(cfg)?),
        ScenarioKind::ForagingIspl => Scenario::Interpreted(foraging_ispl(cfg)?),
        ScenarioKind::FlockingVstig => Scenario::Stigmergy(flocking_vstig(cfg)?),
        ScenarioKind::FlockingVoter => Scenario::Voter(flocking_voter(cfg)?),
        ScenarioKind::FlockingIspl => Scenario::Interpreted(flocking_ispl(cfg)?),
        ScenarioKind::FlockingScelLamport => Scenario::Scel(flocking_scel_lamport(cfg)?),
        ScenarioKind::Ispl => {
            let Some(path) = &cfg.spec else {
                return invalid("scenario `ispl` needs `spec = \"file.ispl\"`");
            };
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
            Scenario::Interpreted(SystemSpec::parse(&text)?)
        }
    })
}
