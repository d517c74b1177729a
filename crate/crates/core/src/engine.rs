//! Deterministic discrete-event core.
//!
//! The queue is a min-heap keyed by `(fire_at, seq)`. Sequence numbers are
//! assigned at insertion, so events scheduled for the same instant are
//! dequeued in the order they were scheduled. Together with per-purpose
//! random streams this makes a replication a pure function of its seed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Virtual time in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    /// Panics on negative or non-finite input.
    pub fn from_ms(ms: f64) -> Self {
        assert!(ms.is_finite() && ms >= 0.0, "invalid simulation time {ms}");
        SimTime(ms)
    }

    pub fn as_ms(self) -> f64 {
        self.0
    }

    pub fn after(self, delay_ms: f64) -> Self {
        SimTime::from_ms(self.0 + delay_ms.max(0.0))
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    TxStart,
    TxEnd,
    TimerFire,
    MsgInjection,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::TxStart => "tx_start",
            EventKind::TxEnd => "tx_end",
            EventKind::TimerFire => "timer",
            EventKind::MsgInjection => "inject",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub kind: EventKind,
    pub target: NodeId,
    pub payload: P,
}

// Heap entry with the ordering reversed so `BinaryHeap` pops the earliest.
struct Queued<P>(Event<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .fire_at
            .cmp(&self.0.fire_at)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

/// Virtual clock plus pending-event queue.
pub struct Engine<P> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Queued<P>>,
    processed: u64,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Enqueue an event and return its sequence number.
    ///
    /// Scheduling before the current clock is a programming error and panics.
    pub fn schedule(&mut self, fire_at: SimTime, kind: EventKind, target: NodeId, payload: P) -> u64 {
        assert!(
            fire_at >= self.now,
            "event scheduled in the past: {} < {}",
            fire_at,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued(Event {
            fire_at,
            seq,
            kind,
            target,
            payload,
        }));
        seq
    }

    pub fn schedule_in(&mut self, delay_ms: f64, kind: EventKind, target: NodeId, payload: P) -> u64 {
        let at = self.now.after(delay_ms);
        self.schedule(at, kind, target, payload)
    }

    /// Dequeue the next event if it fires no later than `max_time`,
    /// advancing the clock to its timestamp.
    pub fn pop_until(&mut self, max_time: SimTime) -> Option<Event<P>> {
        match self.queue.peek() {
            Some(Queued(ev)) if ev.fire_at <= max_time => {}
            _ => return None,
        }
        let Queued(ev) = self.queue.pop()?;
        debug_assert!(ev.fire_at >= self.now);
        self.now = ev.fire_at;
        self.processed += 1;
        Some(ev)
    }

    /// Process events in `(fire_at, seq)` order until the queue is empty or
    /// the next event lies beyond `max_time`. Returns the final clock.
    pub fn run_until_idle<F>(&mut self, max_time: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Engine<P>, Event<P>),
    {
        while let Some(ev) = self.pop_until(max_time) {
            handler(self, ev);
        }
        self.now
    }
}

/// Tag distinguishing independent random streams of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    Topology,
    Traffic,
    Mac,
    Policy,
    Failure,
    Setup,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Topology => 1,
            StreamPurpose::Traffic => 2,
            StreamPurpose::Mac => 3,
            StreamPurpose::Policy => 4,
            StreamPurpose::Failure => 5,
            StreamPurpose::Setup => 6,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identity of a random stream: `(run seed, node, purpose)`.
///
/// Identical ids give identical draw sequences. Distinct ids are hashed to
/// unrelated ChaCha seeds, so the number of draws made from one stream never
/// shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub node: u64,
    pub purpose: StreamPurpose,
}

impl RngStream {
    pub fn new(seed: u64, node: u64, purpose: StreamPurpose) -> Self {
        RngStream { seed, node, purpose }
    }

    /// Stream not bound to a node (topology, traffic).
    pub fn global(seed: u64, purpose: StreamPurpose) -> Self {
        Self::new(seed, u64::MAX, purpose)
    }

    pub fn derived_seed(&self) -> u64 {
        let a = splitmix64(self.seed);
        let b = splitmix64(a ^ self.node.wrapping_mul(0xd6e8_feb8_6659_fd93));
        splitmix64(b ^ self.purpose.tag().wrapping_mul(0xa076_1d64_78bd_642f))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.derived_seed())
    }
}

/// Plain-text event log, one `time,seq,kind,node,detail` line per event.
#[derive(Debug, Default, Clone)]
pub struct EventTrace {
    lines: Vec<String>,
}

impl EventTrace {
    pub const HEADER: &'static str = "time,seq,kind,node,detail";

    pub fn record(&mut self, time: SimTime, seq: u64, kind: EventKind, node: NodeId, detail: &str) {
        self.lines
            .push(format!("{},{},{},{},{}", time, seq, kind.as_str(), node, detail));
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for l in &self.lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    }
}
