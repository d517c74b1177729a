//! Topology, traffic and failure generation, and replication orchestration.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;

use crate::config::{ScenarioConfig, SinkPlacement};
use crate::engine::{NodeId, RngStream, StreamPurpose};
use crate::error::{Error, Result};
use crate::metrics::RunMetrics;
use crate::network::{Phases, RunOutput, Simulation};
use crate::phys::{is_neighbor, Position};

const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub positions: Vec<Position>,
    pub sink: NodeId,
    /// Neighbors at the default transmit power, ascending by id.
    pub neighbors: Vec<Vec<NodeId>>,
    /// Whether a neighbor path to the sink exists.
    pub connected: Vec<bool>,
}

impl Topology {
    pub fn from_positions(positions: Vec<Position>, sink: NodeId, cfg: &ScenarioConfig) -> Self {
        let n = positions.len();
        let neighbors: Vec<Vec<NodeId>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && is_neighbor(&positions[i], &positions[j], &cfg.radio))
                    .collect()
            })
            .collect();
        let mut connected = vec![false; n];
        let mut frontier = VecDeque::from([sink]);
        connected[sink] = true;
        while let Some(i) = frontier.pop_front() {
            for &j in &neighbors[i] {
                if !connected[j] {
                    connected[j] = true;
                    frontier.push_back(j);
                }
            }
        }
        Topology { positions, sink, neighbors, connected }
    }

    pub fn is_connected(&self) -> bool {
        self.connected.iter().all(|&c| c)
    }

    pub fn mean_degree(&self) -> f64 {
        let total: usize = self.neighbors.iter().map(Vec::len).sum();
        total as f64 / self.neighbors.len() as f64
    }

    /// Nearest non-sink node to `at`, ties to the lower id.
    pub fn nearest_sensor(&self, at: &Position) -> Option<NodeId> {
        (0..self.positions.len())
            .filter(|&i| i != self.sink)
            .min_by(|&a, &b| {
                self.positions[a]
                    .distance(at)
                    .total_cmp(&self.positions[b].distance(at))
                    .then(a.cmp(&b))
            })
    }
}

/// Node 0 is the sink; the others are placed uniformly at random.
pub fn generate_topology(cfg: &ScenarioConfig, seed: u64) -> Topology {
    let sc = &cfg.scenario;
    let mut rng = RngStream::global(seed, StreamPurpose::Topology).rng();
    let sink = match sc.sink {
        SinkPlacement::Corner => Position::new(0.0, 0.0),
        SinkPlacement::Center => Position::new(sc.width / 2.0, sc.height / 2.0),
    };
    let mut positions = vec![sink];
    while positions.len() < sc.node_count {
        let mut p = Position::new(rng.gen::<f64>() * sc.width, rng.gen::<f64>() * sc.height);
        if sc.min_separation > 0.0 {
            for _ in 0..PLACEMENT_ATTEMPTS {
                if positions.iter().all(|q| q.distance(&p) >= sc.min_separation) {
                    break;
                }
                p = Position::new(rng.gen::<f64>() * sc.width, rng.gen::<f64>() * sc.height);
            }
        }
        positions.push(p);
    }
    Topology::from_positions(positions, 0, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficEvent {
    pub position: Position,
    pub trigger_ms: f64,
    /// Nearest sensor to the event at generation time.
    pub source: NodeId,
}

/// One message per event; the total is uniform on
/// `[messages_min, messages_max]` and trigger times are uniform over the data
/// phase. Events are returned in trigger order.
pub fn generate_traffic(cfg: &ScenarioConfig, topo: &Topology, seed: u64) -> Vec<TrafficEvent> {
    let sc = &cfg.scenario;
    let phases = Phases::of(cfg);
    let mut rng = RngStream::global(seed, StreamPurpose::Traffic).rng();
    let total = rng.gen_range(sc.messages_min..=sc.messages_max);
    let mut events: Vec<TrafficEvent> = (0..total)
        .map(|_| {
            let position = Position::new(rng.gen::<f64>() * sc.width, rng.gen::<f64>() * sc.height);
            let trigger_ms = phases.data_start + rng.gen::<f64>() * sc.data_phase_ms;
            let source = topo.nearest_sensor(&position).expect("at least one sensor");
            TrafficEvent { position, trigger_ms, source }
        })
        .collect();
    events.sort_by(|a, b| a.trigger_ms.total_cmp(&b.trigger_ms));
    events
}

/// One Bernoulli(`p_f`) failure draw.
pub fn apply_failure<R: Rng + ?Sized>(p_f: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() < p_f
}

pub fn run_seed(cfg: &ScenarioConfig, run_index: u32) -> u64 {
    cfg.scenario.base_seed ^ u64::from(run_index)
}

pub fn run_replication(cfg: &ScenarioConfig, run_index: u32) -> Result<RunMetrics> {
    Ok(run_replication_with(cfg, run_index, "", false)?.metrics)
}

/// Full replication with an explicit cell parameter label and optional
/// event/decision traces.
pub fn run_replication_with(cfg: &ScenarioConfig, run_index: u32, param: &str, trace: bool) -> Result<RunOutput> {
    cfg.validate()?;
    let seed = run_seed(cfg, run_index);
    let topo = generate_topology(cfg, seed);
    let traffic = generate_traffic(cfg, &topo, seed);
    Simulation::new(cfg, run_index, seed, param, &topo, &traffic, trace).run(seed)
}

/// One experiment cell: a configuration and the label of its extra
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub config: ScenarioConfig,
    pub param: String,
}

/// Run every replication of every cell on `jobs` threads (0 = all cores).
/// Results are ordered by cell, then run index.
pub fn run_cells(cells: &[Cell], jobs: usize) -> Result<Vec<RunMetrics>> {
    let tasks: Vec<(&Cell, u32)> = cells
        .iter()
        .flat_map(|c| (0..c.config.scenario.replications).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Fault(e.to_string()))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|(c, r)| Ok(run_replication_with(&c.config, *r, &c.param, false)?.metrics))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl Axis {
    /// Parse `key=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Axis> {
        let (key, vals) = crate::config::split_assignment(spec)?;
        let values: Vec<String> =
            vals.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
        if values.is_empty() {
            return Err(Error::config(key, "empty sweep axis"));
        }
        Ok(Axis { key: key.to_string(), values })
    }
}

fn is_cell_column(cfg: &ScenarioConfig, key: &str) -> Result<bool> {
    let (sec, field) = cfg.resolve_key(key)?;
    Ok(sec == "scenario" && (field == "protocol" || field == "p_f"))
}

/// Cross product of the axes over `base`. Axes other than protocol and
/// `p_f` become the cell's parameter label.
pub fn expand_cells(base: &ScenarioConfig, base_param: &str, axes: &[Axis]) -> Result<Vec<Cell>> {
    let mut cells = vec![Cell { config: base.clone(), param: base_param.to_string() }];
    for axis in axes {
        if axis.values.is_empty() {
            return Err(Error::config(&axis.key, "empty sweep axis"));
        }
        let labelled = !is_cell_column(base, &axis.key)?;
        let mut next = Vec::with_capacity(cells.len() * axis.values.len());
        for cell in &cells {
            for v in &axis.values {
                let mut config = cell.config.clone();
                config.apply_override(&axis.key, v)?;
                let param = if labelled {
                    join_param(&cell.param, &format!("{}={}", axis.key, v))
                } else {
                    cell.param.clone()
                };
                next.push(Cell { config, param });
            }
        }
        cells = next;
    }
    Ok(cells)
}

/// Label for `--set` overrides that are not protocol or `p_f`.
pub fn param_label<S: AsRef<str>>(cfg: &ScenarioConfig, overrides: &[S]) -> Result<String> {
    let mut label = String::new();
    for o in overrides {
        let (k, v) = crate::config::split_assignment(o.as_ref())?;
        if !is_cell_column(cfg, k)? {
            label = join_param(&label, &format!("{k}={v}"));
        }
    }
    Ok(label)
}

fn join_param(a: &str, b: &str) -> String {
    if a.is_empty() {
        b.to_string()
    } else {
        format!("{a};{b}")
    }
}
