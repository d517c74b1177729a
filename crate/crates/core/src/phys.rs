//! Geometry, log-distance pathloss and SINR packet decoding.

use serde::{Deserialize, Serialize};

use crate::engine::{NodeId, SimTime};

/// Distances below this are clamped before taking the logarithm.
pub const D_MIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    Adv,
    NeighborCount,
    Data,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    /// Pathloss exponent.
    pub alpha_exp: f64,
    pub tx_power_dbm: f64,
    pub sensitivity_dbm: f64,
    pub noise_floor_dbm: f64,
    pub sinr_threshold_db: f64,
    pub bitrate_bps: f64,
    pub adv_bytes: u32,
    pub count_bytes: u32,
    pub data_bytes: u32,
    /// Test hook: every transmission above sensitivity is decoded.
    pub ideal_channel: bool,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            alpha_exp: 3.0,
            tx_power_dbm: 0.0,
            sensitivity_dbm: -60.0,
            noise_floor_dbm: -70.0,
            sinr_threshold_db: 10.0,
            bitrate_bps: 38_400.0,
            adv_bytes: 36,
            count_bytes: 36,
            data_bytes: 36,
            ideal_channel: false,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha_exp >= 2.0) {
            return Err(format!("radio.alpha_exp must be >= 2, got {}", self.alpha_exp));
        }
        if !(self.sensitivity_dbm > self.noise_floor_dbm) {
            return Err("radio.sensitivity_dbm must exceed radio.noise_floor_dbm".into());
        }
        if !(self.bitrate_bps > 0.0) {
            return Err("radio.bitrate_bps must be positive".into());
        }
        Ok(())
    }

    pub fn packet_bytes(&self, kind: PacketKind) -> u32 {
        match kind {
            PacketKind::Adv => self.adv_bytes,
            PacketKind::NeighborCount => self.count_bytes,
            PacketKind::Data => self.data_bytes,
        }
    }

    /// Airtime in milliseconds.
    pub fn airtime_ms(&self, kind: PacketKind) -> f64 {
        airtime_ms(self.packet_bytes(kind), self.bitrate_bps)
    }

    /// Largest distance at which default-power transmissions stay above
    /// sensitivity.
    pub fn nominal_range(&self) -> f64 {
        10f64.powf((self.tx_power_dbm - self.sensitivity_dbm) / (10.0 * self.alpha_exp))
    }
}

pub fn airtime_ms(bytes: u32, bitrate_bps: f64) -> f64 {
    f64::from(bytes) * 8.0 / bitrate_bps * 1000.0
}

/// `10 · α · log10(d)` with `d` clamped to [`D_MIN`].
pub fn pathloss_db(d: f64, alpha_exp: f64) -> f64 {
    let d = if d.is_nan() || d < D_MIN { D_MIN } else { d };
    10.0 * alpha_exp * d.log10()
}

pub fn received_power_dbm(tx_power_dbm: f64, d: f64, alpha_exp: f64) -> f64 {
    tx_power_dbm - pathloss_db(d, alpha_exp)
}

/// Strict: a signal exactly at sensitivity is not heard.
pub fn above_sensitivity(rx_dbm: f64, params: &RadioParams) -> bool {
    rx_dbm > params.sensitivity_dbm
}

pub fn is_neighbor(a: &Position, b: &Position, params: &RadioParams) -> bool {
    above_sensitivity(
        received_power_dbm(params.tx_power_dbm, a.distance(b), params.alpha_exp),
        params,
    )
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// One over-the-air transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub sender: NodeId,
    pub tx_power_dbm: f64,
    pub start: SimTime,
    pub end: SimTime,
}

impl Transmission {
    pub fn overlaps(&self, start: SimTime, end: SimTime) -> bool {
        self.start < end && self.end > start
    }

    pub fn is_active_at(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end
    }
}

/// A transmission as seen by one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub start: SimTime,
    pub end: SimTime,
    pub rx_dbm: f64,
}

impl Arrival {
    pub fn of(tx: &Transmission, sender: &Position, receiver: &Position, alpha_exp: f64) -> Self {
        Arrival {
            start: tx.start,
            end: tx.end,
            rx_dbm: received_power_dbm(tx.tx_power_dbm, sender.distance(receiver), alpha_exp),
        }
    }
}

/// Minimum SINR (dB) over the reception window of `wanted`.
///
/// Interference is piecewise constant between interferer start/end
/// boundaries, so evaluating every segment gives the exact minimum.
pub fn min_sinr_db(wanted: &Arrival, interferers: &[Arrival], noise_floor_dbm: f64) -> f64 {
    let overlapping: Vec<&Arrival> = interferers
        .iter()
        .filter(|i| i.start < wanted.end && i.end > wanted.start)
        .collect();
    let noise_mw = dbm_to_mw(noise_floor_dbm);
    let signal_mw = dbm_to_mw(wanted.rx_dbm);
    if overlapping.is_empty() {
        return mw_to_dbm(signal_mw / noise_mw);
    }
    let mut cuts: Vec<SimTime> = vec![wanted.start, wanted.end];
    for i in &overlapping {
        if i.start > wanted.start && i.start < wanted.end {
            cuts.push(i.start);
        }
        if i.end > wanted.start && i.end < wanted.end {
            cuts.push(i.end);
        }
    }
    cuts.sort();
    cuts.dedup();
    let mut worst = f64::INFINITY;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let interference: f64 = overlapping
            .iter()
            .filter(|i| i.start < b && i.end > a)
            .map(|i| dbm_to_mw(i.rx_dbm))
            .sum();
        let sinr = mw_to_dbm(signal_mw / (noise_mw + interference));
        worst = worst.min(sinr);
    }
    worst
}

/// True iff the wanted signal is above sensitivity and its SINR stays at or
/// above threshold for the whole reception.
pub fn decode(wanted: &Arrival, interferers: &[Arrival], params: &RadioParams) -> bool {
    if !above_sensitivity(wanted.rx_dbm, params) {
        return false;
    }
    if params.ideal_channel {
        return true;
    }
    min_sinr_db(wanted, interferers, params.noise_floor_dbm) >= params.sinr_threshold_db
}
