//! Forwarding policies for the data phase.
//!
//! Every policy shares the same eligibility gate: a node may relay a packet
//! only if its cost is strictly below the packet cost and it has not already
//! broadcast that message. What happens next depends on the protocol:
//!
//! * BGB forwards unconditionally.
//! * GRAB spends a per-packet credit and picks a wide or narrow broadcast.
//! * P-GRAB forwards with probability `P_IA · P_LD`.
//! * U-GRAB compares forwarding and energy-saving payoffs under sensed
//!   congestion.
//! * UP-GRAB is U-GRAB whose forward action fires with probability `P_IA`,
//!   with a per-node spreading factor adapted to congestion.

mod credit;
mod energy;
mod interference;
mod utility;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use credit::{grab_decide, slack, GrabDecision, GrabParams};
pub use energy::{p_ld, Battery, EnergyParams, EnergyUse};
pub use interference::{center_of, erfc, f_erfc, p_grab_decide, PGrabState};
pub use utility::{
    alpha_ladder_value, u_grab_decide, up_grab_decide, utility, UGrabParams, UGrabState,
    UpGrabState,
};

use crate::mac::{MessageId, SeenSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "BGB")]
    Bgb,
    #[serde(rename = "GRAB")]
    Grab,
    #[serde(rename = "P-GRAB")]
    PGrab,
    #[serde(rename = "U-GRAB")]
    UGrab,
    #[serde(rename = "UP-GRAB")]
    UpGrab,
}

impl Protocol {
    pub const ALL: [Protocol; 5] = [
        Protocol::Bgb,
        Protocol::Grab,
        Protocol::PGrab,
        Protocol::UGrab,
        Protocol::UpGrab,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Bgb => "BGB",
            Protocol::Grab => "GRAB",
            Protocol::PGrab => "P-GRAB",
            Protocol::UGrab => "U-GRAB",
            Protocol::UpGrab => "UP-GRAB",
        }
    }

    /// Protocols that need `Δ(i)` and therefore the neighbor-count round.
    pub fn uses_density(self) -> bool {
        matches!(self, Protocol::PGrab | Protocol::UpGrab)
    }

    pub fn uses_congestion(self) -> bool {
        matches!(self, Protocol::UGrab | Protocol::UpGrab)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "BGB" => Ok(Protocol::Bgb),
            "GRAB" => Ok(Protocol::Grab),
            "PGRAB" => Ok(Protocol::PGrab),
            "UGRAB" => Ok(Protocol::UGrab),
            "UPGRAB" => Ok(Protocol::UpGrab),
            _ => Err(format!("unknown protocol `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Forward,
    ForwardWide,
    ForwardNarrow,
    Drop,
}

impl Decision {
    pub fn forwards(self) -> bool {
        !matches!(self, Decision::Drop)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Forward => "forward",
            Decision::ForwardWide => "forward_wide",
            Decision::ForwardNarrow => "forward_narrow",
            Decision::Drop => "drop",
        }
    }
}

/// A data packet as carried over the air.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPacket {
    pub id: MessageId,
    /// Cost of the most recent forwarder.
    pub cost: f64,
    /// GRAB: total cost the packet may consume, `Q_S · (1 + F_α)`.
    pub budget: f64,
    /// GRAB: link cost spent so far.
    pub consumed: f64,
}

impl DataPacket {
    pub fn new(id: MessageId, source_cost: f64) -> Self {
        DataPacket { id, cost: source_cost, budget: f64::INFINITY, consumed: 0.0 }
    }

    pub fn with_credit(id: MessageId, source_cost: f64, f_alpha: f64) -> Self {
        DataPacket {
            id,
            cost: source_cost,
            budget: source_cost * (1.0 + f_alpha),
            consumed: 0.0,
        }
    }
}

/// Relay gate shared by all policies. The sink never relays.
pub fn eligible(own_cost: f64, is_sink: bool, seen: &SeenSet, pkt: &DataPacket) -> bool {
    !is_sink && own_cost < pkt.cost && !seen.contains(&pkt.id)
}

pub fn bgb_decide() -> Decision {
    Decision::Forward
}

/// One line of the optional per-decision trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub time_ms: f64,
    pub node: usize,
    pub policy: Protocol,
    pub eligible: bool,
    pub action: Decision,
    pub p_fw: Option<f64>,
    pub c_n: Option<u32>,
    pub alpha_n: Option<f64>,
    pub r_n: Option<f64>,
}

impl DecisionRecord {
    pub const HEADER: &'static str = "time,node,policy,eligible,action,p_fw,c_n,alpha_n,r_n";

    pub fn to_csv_line(&self) -> String {
        fn opt<T: fmt::Display>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{:.6},{},{},{},{},{},{},{},{}",
            self.time_ms,
            self.node,
            self.policy,
            self.eligible,
            self.action.as_str(),
            opt(self.p_fw),
            opt(self.c_n),
            opt(self.alpha_n),
            opt(self.r_n)
        )
    }
}
