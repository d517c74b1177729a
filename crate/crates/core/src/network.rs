//! One replication: node state, the radio channel and event handling.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{FailureSide, ScenarioConfig};
use crate::costfield::{exact_delta_bounds, link_cost, AdvOutcome, AdvPacket, CostState};
use crate::engine::{Engine, Event, EventKind, EventTrace, NodeId, RngStream, SimTime, StreamPurpose};
use crate::error::Result;
use crate::mac::{ChannelView, SeenSet};
use crate::metrics::{Recorder, RunMetrics};
use crate::phys::{decode, received_power_dbm, Arrival, PacketKind, Position};
use crate::policies::{
    eligible, f_erfc, grab_decide, p_grab_decide, p_ld, u_grab_decide, up_grab_decide, Battery,
    DataPacket, Decision, DecisionRecord, EnergyUse, GrabDecision, Protocol, UGrabState, UpGrabState,
};
use crate::scenario::{apply_failure, Topology, TrafficEvent};

/// Arrivals this far below the noise floor are not tracked as interference.
const INTERFERENCE_CUTOFF_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Body {
    Adv(AdvPacket),
    Count(u32),
    Data(DataPacket),
}

impl Body {
    pub fn kind(&self) -> PacketKind {
        match self {
            Body::Adv(_) => PacketKind::Adv,
            Body::Count(_) => PacketKind::NeighborCount,
            Body::Data(_) => PacketKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub body: Body,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    None,
    AdvTimer(u32),
    CountTimer,
    StallCheck,
    Inject(usize),
    TxEnd(usize),
}

#[derive(Debug, Clone)]
struct OnAir {
    sender: NodeId,
    frame: Frame,
    start: SimTime,
    end: SimTime,
}

struct Node {
    cost: CostState,
    battery: Battery,
    seen: SeenSet,
    channel: ChannelView,
    own_tx: Vec<(SimTime, SimTime)>,
    queue: VecDeque<Frame>,
    mac_busy: bool,
    deferrals: u32,
    mac_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    failure_rng: ChaCha8Rng,
    ugrab: UGrabState,
    upgrab: UpGrabState,
}

impl Node {
    fn alive(&self) -> bool {
        !self.battery.is_dead()
    }
}

/// Per-node view after a run, for the topology dump.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub id: NodeId,
    pub position: Position,
    pub q: f64,
    pub neighbor_count: u32,
    pub delta: f64,
    pub remaining_nj: u64,
}

impl NodeSummary {
    pub const HEADER: &'static str = "node,x,y,Q,N_i,delta";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.id, self.position.x, self.position.y, self.q, self.neighbor_count, self.delta
        )
    }
}

pub struct RunOutput {
    pub metrics: RunMetrics,
    pub nodes: Vec<NodeSummary>,
    pub events: Option<EventTrace>,
    pub decisions: Option<Vec<DecisionRecord>>,
}

/// Phase boundaries of a replication, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phases {
    pub setup_start: f64,
    pub count_start: f64,
    pub data_start: f64,
    pub data_end: f64,
    pub end: f64,
}

impl Phases {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        let count_start = cfg.costfield.settle_ms;
        let data_start = count_start + cfg.costfield.count_window_ms;
        let data_end = data_start + cfg.scenario.data_phase_ms;
        Phases { setup_start: 0.0, count_start, data_start, data_end, end: data_end + cfg.scenario.drain_ms }
    }
}

pub struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    run: u32,
    param: String,
    topo: &'a Topology,
    traffic: &'a [TrafficEvent],
    /// `(node, distance)` of every node close enough to matter as interference.
    hearers: Vec<Vec<(NodeId, f64)>>,
    nodes: Vec<Node>,
    engine: Engine<Payload>,
    on_air: Vec<OnAir>,
    recorder: Recorder,
    phases: Phases,
    delta_bounds: (f64, f64),
    max_airtime: f64,
    events: Option<EventTrace>,
    decisions: Option<Vec<DecisionRecord>>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        cfg: &'a ScenarioConfig,
        run: u32,
        seed: u64,
        param: &str,
        topo: &'a Topology,
        traffic: &'a [TrafficEvent],
        trace: bool,
    ) -> Self {
        let n = topo.positions.len();
        let radio = &cfg.radio;
        let cutoff = radio.noise_floor_dbm - INTERFERENCE_CUTOFF_DB;
        let hearers = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (j, topo.positions[i].distance(&topo.positions[j])))
                    .filter(|&(_, d)| received_power_dbm(radio.tx_power_dbm, d, radio.alpha_exp) > cutoff)
                    .collect()
            })
            .collect();
        let delta_bounds = if cfg.costfield.fixed_delta_bounds {
            (cfg.costfield.delta_min, cfg.costfield.delta_max)
        } else {
            exact_delta_bounds(&topo.neighbors)
        };
        let initial = cfg.energy.initial_nj();
        let nodes = (0..n)
            .map(|i| {
                let stream = |p| RngStream::new(seed, i as u64, p).rng();
                let is_sink = i == topo.sink;
                Node {
                    cost: if is_sink { CostState::sink() } else { CostState::new() },
                    battery: if is_sink && cfg.energy.sink_mains_powered {
                        Battery::mains(initial)
                    } else {
                        Battery::new(initial)
                    },
                    seen: SeenSet::default(),
                    channel: ChannelView::new(i),
                    own_tx: Vec::new(),
                    queue: VecDeque::new(),
                    mac_busy: false,
                    deferrals: 0,
                    mac_rng: stream(StreamPurpose::Mac),
                    policy_rng: stream(StreamPurpose::Policy),
                    failure_rng: stream(StreamPurpose::Failure),
                    ugrab: UGrabState::new(&cfg.ugrab),
                    upgrab: UpGrabState {
                        literal: cfg.ugrab.k_rule_literal,
                        ..UpGrabState::new(cfg.pgrab.k.round() as u32, cfg.ugrab.k_max)
                    },
                }
            })
            .collect();
        let max_airtime = [PacketKind::Adv, PacketKind::NeighborCount, PacketKind::Data]
            .iter()
            .map(|k| radio.airtime_ms(*k))
            .fold(0.0, f64::max);
        Simulation {
            cfg,
            run,
            param: param.to_string(),
            topo,
            traffic,
            hearers,
            nodes,
            engine: Engine::new(),
            on_air: Vec::new(),
            recorder: Recorder::default(),
            phases: Phases::of(cfg),
            delta_bounds,
            max_airtime,
            events: trace.then(EventTrace::default),
            decisions: trace.then(Vec::new),
        }
    }

    fn protocol(&self) -> Protocol {
        self.cfg.scenario.protocol
    }

    fn seed_events(&mut self, seed: u64) {
        let sink = self.topo.sink;
        let setup = SimTime::from_ms(self.phases.setup_start);
        {
            let s = &mut self.nodes[sink];
            s.cost.delta_bounds = Some(self.delta_bounds);
            s.cost.adv_sent = true;
            let adv = s.cost.own_adv(self.cfg.radio.tx_power_dbm);
            self.enqueue(sink, Frame { body: Body::Adv(adv), tx_power_dbm: self.cfg.radio.tx_power_dbm }, setup);
        }
        if self.protocol().uses_density() {
            // leave room for the longest MAC delay so counts finish before data
            let mac = &self.cfg.mac;
            let guard = f64::from(mac.max_deferrals + 1) * mac.backoff_max_ms
                + self.cfg.radio.airtime_ms(PacketKind::NeighborCount);
            let span = (self.cfg.costfield.count_window_ms - guard).max(0.0);
            for i in 0..self.nodes.len() {
                let mut rng = RngStream::new(seed, i as u64, StreamPurpose::Setup).rng();
                let at = self.phases.count_start + rng.gen::<f64>() * span;
                self.engine.schedule(SimTime::from_ms(at), EventKind::TimerFire, i, Payload::CountTimer);
            }
        }
        for (idx, ev) in self.traffic.iter().enumerate() {
            let at = SimTime::from_ms(ev.trigger_ms);
            self.engine.schedule(at, EventKind::MsgInjection, ev.source, Payload::Inject(idx));
        }
        if self.protocol().uses_congestion() && !self.traffic.is_empty() {
            let period = self.stall_period();
            let first = self.phases.data_start + period;
            if first <= self.phases.end {
                self.engine.schedule(SimTime::from_ms(first), EventKind::TimerFire, sink, Payload::StallCheck);
            }
        }
    }

    fn stall_period(&self) -> f64 {
        let mean_gap = self.cfg.scenario.data_phase_ms / self.traffic.len().max(1) as f64;
        self.cfg.ugrab.check_period_factor * mean_gap
    }

    /// Run to completion and close the metrics.
    pub fn run(mut self, seed: u64) -> Result<RunOutput> {
        self.seed_events(seed);
        let end = SimTime::from_ms(self.phases.end);
        while let Some(ev) = self.engine.pop_until(end) {
            self.handle(ev);
        }
        self.finish()
    }

    fn finish(mut self) -> Result<RunOutput> {
        let sink = self.topo.sink;
        let batteries: Vec<&Battery> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| *i != sink || !n.battery.is_mains())
            .map(|(_, n)| &n.battery)
            .collect();
        let connected = self.nodes.iter().filter(|n| n.cost.q.is_finite()).count() as u32;
        let metrics = self.recorder.finalize(
            self.run,
            self.cfg.scenario.protocol,
            self.cfg.scenario.p_f,
            &self.param,
            &batteries,
            connected,
        )?;
        let nodes = self
            .nodes
            .iter_mut()
            .enumerate()
            .map(|(i, n)| NodeSummary {
                id: i,
                position: self.topo.positions[i],
                q: n.cost.q,
                neighbor_count: n.cost.neighbor_count(),
                delta: n.cost.delta(),
                remaining_nj: n.battery.remaining_nj(),
            })
            .collect();
        Ok(RunOutput { metrics, nodes, events: self.events, decisions: self.decisions })
    }

    fn trace(&mut self, ev: &Event<Payload>, detail: String) {
        if let Some(t) = self.events.as_mut() {
            t.record(ev.fire_at, ev.seq, ev.kind, ev.target, &detail);
        }
    }

    fn handle(&mut self, ev: Event<Payload>) {
        let now = ev.fire_at;
        match (ev.kind, ev.payload) {
            (EventKind::TxStart, _) => self.tx_start(&ev, now),
            (EventKind::TxEnd, Payload::TxEnd(id)) => self.tx_end(&ev, id, now),
            (EventKind::TimerFire, Payload::AdvTimer(generation)) => {
                let node = ev.target;
                let power = self.cfg.radio.tx_power_dbm;
                let adv = self.nodes[node].cost.fire_adv_timer(generation, power);
                self.trace(&ev, format!("adv_timer gen={generation} fired={}", adv.is_some()));
                if let Some(adv) = adv {
                    self.enqueue(node, Frame { body: Body::Adv(adv), tx_power_dbm: power }, now);
                }
            }
            (EventKind::TimerFire, Payload::CountTimer) => {
                let node = ev.target;
                let count = self.nodes[node].cost.neighbor_count();
                self.trace(&ev, format!("count_timer n={count}"));
                let f = Frame { body: Body::Count(count), tx_power_dbm: self.cfg.radio.tx_power_dbm };
                self.enqueue(node, f, now);
            }
            (EventKind::TimerFire, Payload::StallCheck) => self.stall_check(&ev, now),
            (EventKind::MsgInjection, Payload::Inject(idx)) => self.inject(&ev, idx, now),
            (kind, payload) => unreachable!("event {kind:?} with payload {payload:?}"),
        }
    }

    fn enqueue(&mut self, node: NodeId, frame: Frame, now: SimTime) {
        self.nodes[node].queue.push_back(frame);
        self.kick_mac(node, now);
    }

    /// Start the backoff for the head of the queue if the MAC is idle.
    fn kick_mac(&mut self, node: NodeId, now: SimTime) {
        let n = &mut self.nodes[node];
        if n.mac_busy || n.queue.is_empty() {
            return;
        }
        n.mac_busy = true;
        let backoff = self.cfg.mac.draw_backoff(&mut n.mac_rng);
        self.engine.schedule(now.after(backoff), EventKind::TxStart, node, Payload::None);
    }

    fn tx_start(&mut self, ev: &Event<Payload>, now: SimTime) {
        let sender = ev.target;
        if self.nodes[sender].alive() {
            let sensed = self.nodes[sender].channel.sense(now, &self.cfg.radio);
            let n = &mut self.nodes[sender];
            if self.cfg.mac.should_defer(sensed, n.deferrals) {
                n.deferrals += 1;
                let backoff = self.cfg.mac.draw_backoff(&mut n.mac_rng);
                self.engine.schedule(now.after(backoff), EventKind::TxStart, sender, Payload::None);
                self.trace(ev, format!("defer busy={sensed}"));
                return;
            }
        }
        self.nodes[sender].deferrals = 0;
        let frame = self.nodes[sender].queue.pop_front().expect("TxStart without a queued frame");
        let kind = frame.body.kind();
        if !self.nodes[sender].alive() {
            self.recorder.suppressed += 1;
            self.trace(ev, format!("suppressed {kind:?}"));
            self.nodes[sender].mac_busy = false;
            self.kick_mac(sender, now);
            return;
        }
        let airtime = self.cfg.radio.airtime_ms(kind);
        let taken = self.nodes[sender].battery.consume(&self.cfg.energy, EnergyUse::Tx, airtime, frame.tx_power_dbm);
        self.recorder.energy_debited_nj += taken;
        match kind {
            PacketKind::Adv => self.recorder.adv_total += 1,
            PacketKind::NeighborCount => self.recorder.count_total += 1,
            PacketKind::Data => self.recorder.forwarded_total += 1,
        }
        let end = now.after(airtime);
        let id = self.on_air.len();
        self.on_air.push(OnAir { sender, frame, start: now, end });
        let horizon = now.as_ms() - self.max_airtime;
        let cutoff = self.cfg.radio.noise_floor_dbm - INTERFERENCE_CUTOFF_DB;
        for &(h, d) in &self.hearers[sender] {
            let rx_dbm = received_power_dbm(frame.tx_power_dbm, d, self.cfg.radio.alpha_exp);
            if rx_dbm <= cutoff {
                continue;
            }
            let ch = &mut self.nodes[h].channel.active;
            ch.retain(|(_, a)| a.end.as_ms() >= horizon);
            ch.push((sender, Arrival { start: now, end, rx_dbm }));
        }
        let own = &mut self.nodes[sender].own_tx;
        own.retain(|(_, e)| e.as_ms() >= horizon);
        own.push((now, end));
        let msg = match &frame.body {
            Body::Data(p) => format!(" msg={}/{}", p.id.0, p.id.1),
            _ => String::new(),
        };
        self.trace(ev, format!("{kind:?} power={:.3} end={end}{msg}", frame.tx_power_dbm));
        self.engine.schedule(end, EventKind::TxEnd, sender, Payload::TxEnd(id));
    }

    fn tx_end(&mut self, ev: &Event<Payload>, id: usize, now: SimTime) {
        let tx = self.on_air[id].clone();
        self.trace(ev, format!("{:?}", tx.frame.body.kind()));
        self.nodes[tx.sender].mac_busy = false;
        self.kick_mac(tx.sender, now);
        let radio = &self.cfg.radio;
        let receivers: Vec<(NodeId, f64)> = self.hearers[tx.sender]
            .iter()
            .map(|&(h, d)| (h, received_power_dbm(tx.frame.tx_power_dbm, d, radio.alpha_exp)))
            .filter(|&(_, rx)| rx > radio.sensitivity_dbm)
            .collect();
        for (h, rx_dbm) in receivers {
            let node = &self.nodes[h];
            if !node.alive() {
                continue;
            }
            let wanted = Arrival { start: tx.start, end: tx.end, rx_dbm };
            let half_duplex = node.own_tx.iter().any(|&(s, e)| s < tx.end && e > tx.start);
            let ok = !half_duplex && {
                let interferers: Vec<Arrival> = node
                    .channel
                    .active
                    .iter()
                    .filter(|(s, a)| !(*s == tx.sender && a.start == tx.start))
                    .map(|(_, a)| *a)
                    .collect();
                decode(&wanted, &interferers, radio)
            };
            if !ok {
                if matches!(tx.frame.body, Body::Adv(_)) {
                    self.recorder.adv_losses += 1;
                }
                continue;
            }
            self.receive(h, &tx, rx_dbm, now);
        }
    }

    fn charge_rx(&mut self, node: NodeId, kind: PacketKind) {
        let airtime = self.cfg.radio.airtime_ms(kind);
        let taken = self.nodes[node].battery.consume(&self.cfg.energy, EnergyUse::Rx, airtime, 0.0);
        self.recorder.energy_debited_nj += taken;
    }

    fn receive(&mut self, h: NodeId, tx: &OnAir, rx_dbm: f64, now: SimTime) {
        match tx.frame.body {
            Body::Adv(adv) => {
                self.charge_rx(h, PacketKind::Adv);
                let setup = SimTime::from_ms(self.phases.setup_start);
                let beta = self.cfg.costfield.beta_adv_ms;
                let out = self.nodes[h].cost.handle_adv(tx.sender, &adv, rx_dbm, now, setup, beta);
                if let AdvOutcome::Armed { fire_at, generation } = out {
                    self.engine.schedule(fire_at, EventKind::TimerFire, h, Payload::AdvTimer(generation));
                }
            }
            Body::Count(c) => {
                self.charge_rx(h, PacketKind::NeighborCount);
                self.nodes[h].cost.record_neighbor_count(tx.sender, c);
            }
            Body::Data(pkt) => self.receive_data(h, tx, pkt, rx_dbm, now),
        }
    }

    fn receive_data(&mut self, h: NodeId, tx: &OnAir, pkt: DataPacket, rx_dbm: f64, now: SimTime) {
        if h == self.topo.sink {
            self.charge_rx(h, PacketKind::Data);
            self.recorder.record_delivery(pkt.id, now);
            return;
        }
        let p_f = self.cfg.scenario.p_f;
        if self.cfg.scenario.failure_side == FailureSide::Rx && apply_failure(p_f, &mut self.nodes[h].failure_rng) {
            return;
        }
        self.charge_rx(h, PacketKind::Data);
        let protocol = self.protocol();
        let own_q = self.nodes[h].cost.q;
        if protocol.uses_congestion() {
            self.nodes[h].ugrab.observe(pkt.cost, own_q);
        }
        let is_eligible = eligible(own_q, false, &self.nodes[h].seen, &pkt);
        let incoming = DataPacket { consumed: pkt.consumed + link_cost(tx.frame.tx_power_dbm, rx_dbm), ..pkt };
        let mut record = DecisionRecord {
            time_ms: now.as_ms(),
            node: h,
            policy: protocol,
            eligible: is_eligible,
            action: Decision::Drop,
            p_fw: None,
            c_n: None,
            alpha_n: None,
            r_n: None,
        };
        let mut tx_power = self.cfg.radio.tx_power_dbm;
        if is_eligible {
            let (action, power) = self.decide(h, &incoming, now, &mut record);
            record.action = action;
            tx_power = power;
        }
        let forwards = record.action.forwards();
        if let Some(d) = self.decisions.as_mut() {
            d.push(record);
        }
        if !forwards {
            return;
        }
        if self.cfg.scenario.failure_side == FailureSide::Tx && apply_failure(p_f, &mut self.nodes[h].failure_rng) {
            return;
        }
        self.nodes[h].seen.insert(pkt.id);
        let out = DataPacket { cost: own_q, ..incoming };
        self.enqueue(h, Frame { body: Body::Data(out), tx_power_dbm: tx_power }, now);
    }

    fn bounds_of(&self, node: NodeId) -> (f64, f64) {
        if self.cfg.costfield.fixed_delta_bounds {
            (self.cfg.costfield.delta_min, self.cfg.costfield.delta_max)
        } else {
            self.nodes[node]
                .cost
                .delta_bounds
                .unwrap_or((self.cfg.costfield.delta_min, self.cfg.costfield.delta_max))
        }
    }

    /// Policy decision for an eligible relay. Returns the action and the
    /// transmit power to use.
    fn decide(&mut self, h: NodeId, pkt: &DataPacket, now: SimTime, rec: &mut DecisionRecord) -> (Decision, f64) {
        let radio = &self.cfg.radio;
        let default_power = radio.tx_power_dbm;
        match self.protocol() {
            Protocol::Bgb => (Decision::Forward, default_power),
            Protocol::Grab => {
                let n = &self.nodes[h];
                let targets = if self.cfg.grab.downhill_targets {
                    n.cost.downhill_link_costs()
                } else {
                    n.cost.all_link_costs()
                };
                let g = grab_decide(&self.cfg.grab, pkt, n.cost.q, &targets, radio.sensitivity_dbm, default_power);
                let power = match g {
                    GrabDecision::Wide { tx_power_dbm } | GrabDecision::Narrow { tx_power_dbm } => tx_power_dbm,
                    GrabDecision::Drop => default_power,
                };
                (g.decision(), power)
            }
            Protocol::PGrab => {
                let bounds = self.bounds_of(h);
                let k = self.cfg.pgrab.k;
                let n = &mut self.nodes[h];
                let p_ia = f_erfc(n.cost.delta(), k, bounds);
                let (d, p_fw) = p_grab_decide(p_ia, p_ld(&n.battery), &mut n.policy_rng);
                rec.p_fw = Some(p_fw);
                (d, default_power)
            }
            Protocol::UGrab => {
                let c_n = self.nodes[h].channel.sense(now, radio);
                let congested = self.cfg.mac.is_congested(c_n);
                let n = &mut self.nodes[h];
                let r_n = n.battery.consumed_ratio();
                let d = u_grab_decide(n.ugrab.alpha_n, r_n, congested, &mut n.policy_rng);
                rec.c_n = Some(c_n);
                rec.alpha_n = Some(n.ugrab.alpha_n);
                rec.r_n = Some(r_n);
                (d, default_power)
            }
            Protocol::UpGrab => {
                let c_n = self.nodes[h].channel.sense(now, radio);
                let congested = self.cfg.mac.is_congested(c_n);
                let bounds = self.bounds_of(h);
                let n = &mut self.nodes[h];
                let delta = n.cost.delta();
                let r_n = n.battery.consumed_ratio();
                let alpha_n = n.ugrab.alpha_n;
                let (d, p_ia) =
                    up_grab_decide(&mut n.upgrab, delta, bounds, alpha_n, r_n, congested, &mut n.policy_rng);
                rec.p_fw = Some(p_ia);
                rec.c_n = Some(c_n);
                rec.alpha_n = Some(alpha_n);
                rec.r_n = Some(r_n);
                (d, default_power)
            }
        }
    }

    fn stall_check(&mut self, ev: &Event<Payload>, now: SimTime) {
        let (hi, lo) = (self.cfg.ugrab.theta_high, self.cfg.ugrab.theta_low);
        let sink = self.topo.sink;
        let mut steps = 0;
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if i == sink || !n.alive() {
                continue;
            }
            let r_n = n.battery.consumed_ratio();
            if n.ugrab.periodic_check(r_n, hi, lo) {
                steps += 1;
            }
        }
        self.trace(ev, format!("stall_check steps={steps}"));
        let next = now.as_ms() + self.stall_period();
        if next <= self.phases.end {
            self.engine.schedule(SimTime::from_ms(next), EventKind::TimerFire, sink, Payload::StallCheck);
        }
    }

    fn inject(&mut self, ev: &Event<Payload>, idx: usize, now: SimTime) {
        let event = self.traffic[idx];
        let source = if self.nodes[event.source].alive() {
            Some(event.source)
        } else {
            self.nearest_alive_sensor(&event.position)
        };
        let id = (event.source, idx as u32);
        self.recorder.record_injection(id, now);
        let Some(src) = source else {
            self.trace(ev, format!("msg={idx} no live source"));
            return;
        };
        self.trace(ev, format!("msg={idx} source={src}"));
        let q = self.nodes[src].cost.q;
        let radio = &self.cfg.radio;
        let mut power = radio.tx_power_dbm;
        let pkt = if self.protocol() == Protocol::Grab {
            let pkt = DataPacket::with_credit(id, q, self.cfg.grab.f_alpha);
            let n = &self.nodes[src];
            let targets = if self.cfg.grab.downhill_targets {
                n.cost.downhill_link_costs()
            } else {
                n.cost.all_link_costs()
            };
            if let GrabDecision::Wide { tx_power_dbm } | GrabDecision::Narrow { tx_power_dbm } =
                grab_decide(&self.cfg.grab, &pkt, q, &targets, radio.sensitivity_dbm, radio.tx_power_dbm)
            {
                power = tx_power_dbm;
            }
            pkt
        } else {
            DataPacket::new(id, q)
        };
        self.nodes[src].seen.insert(id);
        self.enqueue(src, Frame { body: Body::Data(pkt), tx_power_dbm: power }, now);
    }

    fn nearest_alive_sensor(&self, at: &Position) -> Option<NodeId> {
        (0..self.nodes.len())
            .filter(|&i| i != self.topo.sink && self.nodes[i].alive())
            .min_by(|&a, &b| {
                let da = self.topo.positions[a].distance(at);
                let db = self.topo.positions[b].distance(at);
                da.total_cmp(&db).then(a.cmp(&b))
            })
    }
}
