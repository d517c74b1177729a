//! Basic CSMA without acknowledgements.
//!
//! A node draws one uniform backoff per packet and transmits when it
//! expires. There is no carrier re-check, no retransmission and no ACK.
//! Congestion is estimated by counting the transmissions a node currently
//! hears above sensitivity.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{NodeId, SimTime};
use crate::phys::{above_sensitivity, Arrival, RadioParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacParams {
    pub backoff_min_ms: f64,
    pub backoff_max_ms: f64,
    /// Congestion limit `c`: the channel counts as congested when at least
    /// this many transmissions are heard.
    pub congestion_limit: u32,
    /// Sense the carrier when the backoff expires and redraw it while the
    /// channel is busy.
    pub carrier_sense: bool,
    /// Busy-channel deferrals before the frame is sent regardless.
    pub max_deferrals: u32,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            backoff_min_ms: 0.0,
            backoff_max_ms: 20.0,
            congestion_limit: 1,
            carrier_sense: true,
            max_deferrals: 16,
        }
    }
}

impl MacParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.backoff_min_ms >= 0.0 && self.backoff_min_ms <= self.backoff_max_ms) {
            return Err("mac: need 0 <= backoff_min_ms <= backoff_max_ms".into());
        }
        if self.congestion_limit < 1 {
            return Err("mac.congestion_limit must be >= 1".into());
        }
        Ok(())
    }

    /// Uniform backoff in `[backoff_min, backoff_max]`.
    pub fn draw_backoff<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.backoff_max_ms <= self.backoff_min_ms {
            return self.backoff_min_ms;
        }
        rng.gen_range(self.backoff_min_ms..=self.backoff_max_ms)
    }

    pub fn is_congested(&self, sensed: u32) -> bool {
        sensed >= self.congestion_limit
    }

    /// Whether a node whose backoff just expired should back off again.
    pub fn should_defer(&self, sensed: u32, deferrals_so_far: u32) -> bool {
        self.carrier_sense && sensed > 0 && deferrals_so_far < self.max_deferrals
    }
}

/// What one node currently hears on the channel.
#[derive(Debug, Clone, Default)]
pub struct ChannelView {
    pub node: NodeId,
    /// `(sender, arrival)` for every transmission on air at this node.
    pub active: Vec<(NodeId, Arrival)>,
}

impl ChannelView {
    pub fn new(node: NodeId) -> Self {
        ChannelView { node, active: Vec::new() }
    }

    /// Sensed congestion `c_n` at time `t`: distinct transmissions on air and
    /// above sensitivity.
    pub fn sense(&self, t: SimTime, params: &RadioParams) -> u32 {
        self.active
            .iter()
            .filter(|(sender, a)| {
                *sender != self.node
                    && a.start <= t
                    && t < a.end
                    && above_sensitivity(a.rx_dbm, params)
            })
            .count() as u32
    }
}

/// Whether two transmissions starting at `u1`, `u2` with equal airtime
/// share any instant on air.
pub fn windows_overlap(u1: f64, u2: f64, airtime: f64) -> bool {
    (u1 - u2).abs() < airtime
}

/// Identity of one data message: `(source node, per-source sequence)`.
pub type MessageId = (NodeId, u32);

/// Short-term memory of messages a node has already broadcast.
#[derive(Debug, Clone, Default)]
pub struct SeenSet {
    ids: HashSet<MessageId>,
}

impl SeenSet {
    pub fn contains(&self, id: &MessageId) -> bool {
        self.ids.contains(id)
    }

    /// Returns false if the id was already present.
    pub fn insert(&mut self, id: MessageId) -> bool {
        self.ids.insert(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RngStream;
    use crate::engine::StreamPurpose;

    fn arr(s: f64, e: f64, db: f64) -> Arrival {
        Arrival { start: SimTime::from_ms(s), end: SimTime::from_ms(e), rx_dbm: db }
    }

    #[test]
    fn deferral_rule() {
        let mut p = MacParams::default();
        assert!(!p.should_defer(0, 0));
        assert!(p.should_defer(1, 0));
        assert!(!p.should_defer(1, p.max_deferrals));
        p.carrier_sense = false;
        assert!(!p.should_defer(3, 0));
    }

    #[test]
    fn silent_channel_senses_zero() {
        let v = ChannelView::new(0);
        assert_eq!(v.sense(SimTime::from_ms(1.0), &RadioParams::default()), 0);
    }

    #[test]
    fn sense_counts_active_in_range_transmissions() {
        let p = RadioParams::default();
        let mut v = ChannelView::new(0);
        v.active.push((1, arr(0.0, 10.0, -30.0)));
        assert_eq!(v.sense(SimTime::from_ms(5.0), &p), 1);
        v.active.push((2, arr(4.0, 12.0, -35.0)));
        assert_eq!(v.sense(SimTime::from_ms(5.0), &p), 2);
        // below sensitivity, or not on air at t
        v.active.push((3, arr(0.0, 10.0, p.sensitivity_dbm - 1.0)));
        v.active.push((4, arr(6.0, 10.0, -30.0)));
        assert_eq!(v.sense(SimTime::from_ms(5.0), &p), 2);
        // the ended transmission is not counted at its end instant
        assert_eq!(v.sense(SimTime::from_ms(10.0), &p), 1);
    }

    #[test]
    fn zero_window_backoff_is_immediate() {
        let m = MacParams { backoff_min_ms: 0.0, backoff_max_ms: 0.0, congestion_limit: 1, ..MacParams::default() };
        let mut rng = RngStream::new(1, 0, StreamPurpose::Mac).rng();
        assert_eq!(m.draw_backoff(&mut rng), 0.0);
    }

    #[test]
    fn backoff_sequence_is_reproducible() {
        let m = MacParams::default();
        let s = RngStream::new(9, 5, StreamPurpose::Mac);
        let (mut a, mut b) = (s.rng(), s.rng());
        for _ in 0..50 {
            let x = m.draw_backoff(&mut a);
            assert_eq!(x, m.draw_backoff(&mut b));
            assert!((m.backoff_min_ms..=m.backoff_max_ms).contains(&x));
        }
    }

    #[test]
    fn overlap_arithmetic() {
        let airtime = 7.5;
        assert!(!windows_overlap(0.0, 8.0, airtime));
        assert!(windows_overlap(0.0, 7.0, airtime));
        assert!(!windows_overlap(3.0, 10.5, airtime));
    }

    #[test]
    fn seen_set_rejects_duplicates() {
        let mut s = SeenSet::default();
        assert!(s.insert((3, 0)));
        assert!(!s.insert((3, 0)));
        assert!(s.contains(&(3, 0)));
        assert!(!s.contains(&(3, 1)));
    }
}
