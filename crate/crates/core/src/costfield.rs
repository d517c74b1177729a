//! Sink-rooted cost field setup and neighborhood-density estimation.
//!
//! The sink floods an ADV carrying `Q = 0`. A node adopts `Q_p + L` whenever
//! that beats its current cost and arms a timer proportional to its cost;
//! the cheapest nodes therefore advertise first and each node advertises
//! exactly once. During the same flood every node records who it heard,
//! which later yields its neighbor count `N_i` and, after one extra round
//! of count advertisements, the discrepancy `Δ(i)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{NodeId, SimTime};

/// Pathloss from advertised transmit power and measured receive power.
pub fn link_cost(tx_power_dbm: f64, rx_power_dbm: f64) -> f64 {
    tx_power_dbm - rx_power_dbm
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvPacket {
    pub cost: f64,
    pub tx_power_dbm: f64,
    pub delta_bounds: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    pub link_cost: f64,
    /// Cost the neighbor advertised.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdvOutcome {
    /// No improvement.
    Unchanged,
    /// Cost improved and the (re)armed ADV timer fires at `fire_at`.
    Armed { fire_at: SimTime, generation: u32 },
    /// Cost improved after this node already advertised.
    ImprovedSilently,
}

#[derive(Debug, Clone)]
pub struct CostState {
    pub q: f64,
    pub adv_sent: bool,
    pub pending_adv: Option<SimTime>,
    /// Incremented on every re-arm; stale timer events carry an older value.
    pub timer_generation: u32,
    pub neighbors: BTreeMap<NodeId, NeighborEntry>,
    pub neighbor_counts: BTreeMap<NodeId, u32>,
    pub delta: Option<f64>,
    pub delta_bounds: Option<(f64, f64)>,
}

impl Default for CostState {
    fn default() -> Self {
        Self::new()
    }
}

impl CostState {
    pub fn new() -> Self {
        CostState {
            q: f64::INFINITY,
            adv_sent: false,
            pending_adv: None,
            timer_generation: 0,
            neighbors: BTreeMap::new(),
            neighbor_counts: BTreeMap::new(),
            delta: None,
            delta_bounds: None,
        }
    }

    pub fn sink() -> Self {
        CostState { q: 0.0, ..Self::new() }
    }

    pub fn neighbor_count(&self) -> u32 {
        self.neighbors.len() as u32
    }

    /// Process a decoded ADV from `from`.
    ///
    /// The ADV timer is anchored at `setup_start`: it fires at
    /// `setup_start + beta · Q`, or immediately if that instant has passed.
    pub fn handle_adv(
        &mut self,
        from: NodeId,
        adv: &AdvPacket,
        rx_power_dbm: f64,
        now: SimTime,
        setup_start: SimTime,
        beta_ms_per_cost: f64,
    ) -> AdvOutcome {
        let l = link_cost(adv.tx_power_dbm, rx_power_dbm);
        self.neighbors.insert(from, NeighborEntry { link_cost: l, cost: adv.cost });
        if self.delta_bounds.is_none() {
            self.delta_bounds = adv.delta_bounds;
        }
        let candidate = adv.cost + l;
        if !(candidate < self.q) {
            return AdvOutcome::Unchanged;
        }
        self.q = candidate;
        if self.adv_sent {
            return AdvOutcome::ImprovedSilently;
        }
        let anchored = setup_start.as_ms() + beta_ms_per_cost * candidate.max(0.0);
        let fire_at = SimTime::from_ms(anchored.max(now.as_ms()));
        self.timer_generation += 1;
        self.pending_adv = Some(fire_at);
        AdvOutcome::Armed { fire_at, generation: self.timer_generation }
    }

    /// Consume the ADV timer. Returns the packet to broadcast, or `None` for
    /// a stale timer or a node that already advertised.
    pub fn fire_adv_timer(&mut self, generation: u32, tx_power_dbm: f64) -> Option<AdvPacket> {
        if self.adv_sent || generation != self.timer_generation || self.pending_adv.is_none() {
            return None;
        }
        self.pending_adv = None;
        self.adv_sent = true;
        Some(self.own_adv(tx_power_dbm))
    }

    pub fn own_adv(&self, tx_power_dbm: f64) -> AdvPacket {
        AdvPacket { cost: self.q, tx_power_dbm, delta_bounds: self.delta_bounds }
    }

    /// Store a neighbor's advertised count. Counts from nodes that are not in
    /// the neighbor table are ignored.
    pub fn record_neighbor_count(&mut self, from: NodeId, count: u32) -> bool {
        if self.neighbors.contains_key(&from) {
            self.neighbor_counts.insert(from, count);
            self.delta = None;
            true
        } else {
            false
        }
    }

    /// `Δ(i)` over the counts received so far, cached until the next count.
    pub fn delta(&mut self) -> f64 {
        if let Some(d) = self.delta {
            return d;
        }
        let d = compute_delta(self.neighbor_count(), self.neighbor_counts.values().copied());
        self.delta = Some(d);
        d
    }

    /// Forget the field so a new sink-initiated round can rebuild it.
    pub fn begin_refresh(&mut self, is_sink: bool) {
        *self = if is_sink { Self::sink() } else { Self::new() };
    }

    /// Smallest advertised link costs among neighbors whose cost is below
    /// this node's, ascending.
    pub fn downhill_link_costs(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .neighbors
            .values()
            .filter(|n| n.cost < self.q)
            .map(|n| n.link_cost)
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn all_link_costs(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.neighbors.values().map(|n| n.link_cost).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Average neighborhood discrepancy `Σ_j (N_i − N_j) / N_i`.
///
/// Neighbors whose count was never received contribute nothing while still
/// counting in `N_i`. A node without neighbors gets 0.
pub fn compute_delta<I: IntoIterator<Item = u32>>(own_count: u32, received: I) -> f64 {
    if own_count == 0 {
        return 0.0;
    }
    let ni = f64::from(own_count);
    let sum: f64 = received.into_iter().map(|nj| ni - f64::from(nj)).sum();
    sum / ni
}

/// Exact `(Δ_min, Δ_max)` over a topology given each node's true neighbor
/// list.
pub fn exact_delta_bounds(neighbors: &[Vec<NodeId>]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for list in neighbors {
        let d = compute_delta(
            list.len() as u32,
            list.iter().map(|&j| neighbors[j].len() as u32),
        );
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo >= hi {
        // Degenerate (uniform) layout: keep a non-empty interval.
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostFieldParams {
    /// ADV timer slope, milliseconds per cost unit.
    pub beta_adv_ms: f64,
    /// Time at which the ADV flood is considered settled and the neighbor
    /// count round begins.
    pub settle_ms: f64,
    /// Count advertisements are spread uniformly over this window.
    pub count_window_ms: f64,
    /// Use the fixed bounds below instead of the exact ones from the sink.
    pub fixed_delta_bounds: bool,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl Default for CostFieldParams {
    fn default() -> Self {
        CostFieldParams {
            beta_adv_ms: 2.0,
            settle_ms: 2_000.0,
            count_window_ms: 2_000.0,
            fixed_delta_bounds: false,
            delta_min: -60.0,
            delta_max: 40.0,
        }
    }
}

impl CostFieldParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.beta_adv_ms >= 0.0) {
            return Err("costfield.beta_adv_ms must be >= 0".into());
        }
        if !(self.delta_min < self.delta_max) {
            return Err("costfield.delta_min must be < costfield.delta_max".into());
        }
        if !(self.settle_ms >= 0.0 && self.count_window_ms >= 0.0) {
            return Err("costfield timings must be non-negative".into());
        }
        Ok(())
    }
}
