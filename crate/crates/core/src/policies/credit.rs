use serde::{Deserialize, Serialize};

use super::{DataPacket, Decision};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrabParams {
    /// Credit factor: the source adds `F_α · Q_S` of extra credit.
    pub f_alpha: f64,
    /// Wide broadcasts are power-adjusted to reach this many neighbors.
    pub n_n: u32,
    /// Margin above sensitivity at the targeted neighbor.
    pub power_margin_db: f64,
    /// Count only neighbors with a lower advertised cost as power targets.
    pub downhill_targets: bool,
}

impl Default for GrabParams {
    fn default() -> Self {
        GrabParams { f_alpha: 10.0, n_n: 3, power_margin_db: 1.0, downhill_targets: true }
    }
}

impl GrabParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.f_alpha >= 0.0) {
            return Err("grab.f_alpha must be >= 0".into());
        }
        if self.n_n < 1 {
            return Err("grab.n_n must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrabDecision {
    Wide { tx_power_dbm: f64 },
    Narrow { tx_power_dbm: f64 },
    Drop,
}

impl GrabDecision {
    pub fn decision(&self) -> Decision {
        match self {
            GrabDecision::Wide { .. } => Decision::ForwardWide,
            GrabDecision::Narrow { .. } => Decision::ForwardNarrow,
            GrabDecision::Drop => Decision::Drop,
        }
    }
}

/// Credit remaining after reaching this node: `budget − (consumed + Q)`.
/// `pkt.consumed` must already include the hop that delivered the packet.
pub fn slack(pkt: &DataPacket, own_cost: f64) -> f64 {
    pkt.budget - (pkt.consumed + own_cost)
}

/// Choose between a wide broadcast (power for the `N_n`-th nearest target)
/// and a narrow one (nearest target only).
///
/// `target_link_costs` are the link costs of candidate targets in ascending
/// order; output power is `sensitivity + margin + L`, capped at `max_tx_dbm`.
pub fn grab_decide(
    params: &GrabParams,
    pkt: &DataPacket,
    own_cost: f64,
    target_link_costs: &[f64],
    sensitivity_dbm: f64,
    max_tx_dbm: f64,
) -> GrabDecision {
    if target_link_costs.is_empty() {
        return GrabDecision::Drop;
    }
    let power_for = |l: f64| (sensitivity_dbm + params.power_margin_db + l).min(max_tx_dbm);
    let s = slack(pkt, own_cost);
    if s >= 0.0 && pkt.consumed <= pkt.budget {
        let idx = (params.n_n as usize).min(target_link_costs.len()) - 1;
        GrabDecision::Wide { tx_power_dbm: power_for(target_link_costs[idx]) }
    } else {
        GrabDecision::Narrow { tx_power_dbm: power_for(target_link_costs[0]) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(budget: f64, consumed: f64) -> DataPacket {
        DataPacket { id: (1, 0), cost: 100.0, budget, consumed }
    }

    #[test]
    fn no_targets_drops() {
        let p = GrabParams::default();
        assert_eq!(grab_decide(&p, &pkt(200.0, 10.0), 50.0, &[], -48.0, 0.0), GrabDecision::Drop);
    }

    #[test]
    fn enough_credit_goes_wide_to_nth_target() {
        let p = GrabParams::default();
        let d = grab_decide(&p, &pkt(200.0, 10.0), 50.0, &[20.0, 30.0, 40.0, 45.0], -48.0, 0.0);
        assert_eq!(d, GrabDecision::Wide { tx_power_dbm: -48.0 + 1.0 + 40.0 });
    }

    #[test]
    fn low_credit_goes_narrow() {
        let p = GrabParams::default();
        let d = grab_decide(&p, &pkt(100.0, 60.0), 50.0, &[20.0, 30.0, 40.0], -48.0, 0.0);
        assert_eq!(d, GrabDecision::Narrow { tx_power_dbm: -27.0 });
    }

    #[test]
    fn power_is_capped() {
        let p = GrabParams::default();
        let d = grab_decide(&p, &pkt(1e9, 0.0), 50.0, &[47.5, 47.9, 48.0], -48.0, 0.0);
        assert_eq!(d, GrabDecision::Wide { tx_power_dbm: 0.0 });
    }

    #[test]
    fn fewer_targets_than_n_n_uses_farthest() {
        let p = GrabParams::default();
        let d = grab_decide(&p, &pkt(1e9, 0.0), 50.0, &[20.0, 25.0], -48.0, 0.0);
        assert_eq!(d, GrabDecision::Wide { tx_power_dbm: -22.0 });
    }

    #[test]
    fn zero_credit_is_wide_only_on_min_cost_progression() {
        let p = GrabParams { f_alpha: 0.0, ..GrabParams::default() };
        // source cost 100, on the optimal path consumed + Q == 100
        let on_path = DataPacket::with_credit((1, 0), 100.0, 0.0);
        let on_path = DataPacket { consumed: 40.0, ..on_path };
        assert!(matches!(grab_decide(&p, &on_path, 60.0, &[10.0], -48.0, 0.0), GrabDecision::Wide { .. }));
        let detour = DataPacket { consumed: 45.0, ..on_path };
        assert!(matches!(grab_decide(&p, &detour, 60.0, &[10.0], -48.0, 0.0), GrabDecision::Narrow { .. }));
    }
}
