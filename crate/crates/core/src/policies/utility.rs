//! Payoff-driven forwarding under sensed congestion.
//!
//! A relay chooses between Forward (`s = 1`) and Drop (`s = 0`):
//!
//! | action  | channel free | channel congested |
//! |---------|--------------|-------------------|
//! | Forward | `α_n`        | `α_n − 1`         |
//! | Drop    | `r_n`        | `r_n`             |
//!
//! `r_n` is the fraction of energy already spent. With a single channel
//! (`c = 1`) any sensed transmission makes Forward strictly worse than Drop,
//! so the payoffs need not be evaluated at all.
//!
//! The mixed-strategy equilibrium of this game depends on the congestion
//! probability of every neighborhood and is not computed here. Instead each
//! node raises `α_n` along `1 − x0·q^k` whenever it notices that traffic
//! reaches it from uphill but no downhill neighbor relays anything.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::interference::{center_of, f_erfc};
use super::Decision;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UGrabParams {
    pub x0: f64,
    pub q: f64,
    pub ema_lambda: f64,
    pub theta_high: f64,
    pub theta_low: f64,
    /// Stall-check period as a multiple of the mean message interarrival.
    pub check_period_factor: f64,
    /// Upper clamp for UP-GRAB's per-node spreading factor.
    pub k_max: u32,
    /// Apply the literal textual `K_i` moves (decrement below the center on
    /// congestion) instead of the moves that actually lower `P_IA`.
    pub k_rule_literal: bool,
}

impl Default for UGrabParams {
    fn default() -> Self {
        UGrabParams {
            x0: 0.75,
            q: 0.75,
            ema_lambda: 0.1,
            theta_high: 0.5,
            theta_low: 0.05,
            check_period_factor: 10.0,
            k_max: 64,
            k_rule_literal: false,
        }
    }
}

impl UGrabParams {
    pub fn validate(&self) -> Result<(), String> {
        if !((0.0..=1.0).contains(&self.x0) && (0.0..1.0).contains(&self.q)) {
            return Err("ugrab: need x0 in [0,1] and q in [0,1)".into());
        }
        if !(self.ema_lambda > 0.0 && self.ema_lambda <= 1.0) {
            return Err("ugrab.ema_lambda must be in (0,1]".into());
        }
        if self.k_max < 1 {
            return Err("ugrab.k_max must be >= 1".into());
        }
        if !(self.check_period_factor > 0.0) {
            return Err("ugrab.check_period_factor must be positive".into());
        }
        Ok(())
    }
}

/// `α_n(k) = 1 − x0 · q^k`.
pub fn alpha_ladder_value(x0: f64, q: f64, k: u32) -> f64 {
    1.0 - x0 * q.powi(k as i32)
}

pub fn utility(forward: bool, congested: bool, alpha_n: f64, r_n: f64) -> f64 {
    match (forward, congested) {
        (true, false) => alpha_n,
        (true, true) => alpha_n - 1.0,
        (false, _) => r_n,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UGrabState {
    pub alpha_n: f64,
    pub k: u32,
    pub x0: f64,
    pub q: f64,
    pub n_high: f64,
    pub n_low: f64,
    pub ema_lambda: f64,
}

impl UGrabState {
    pub fn new(params: &UGrabParams) -> Self {
        UGrabState {
            alpha_n: alpha_ladder_value(params.x0, params.q, 0),
            k: 0,
            x0: params.x0,
            q: params.q,
            n_high: 0.0,
            n_low: 0.0,
            ema_lambda: params.ema_lambda,
        }
    }

    pub fn ladder_step(&mut self) {
        self.k += 1;
        self.alpha_n = alpha_ladder_value(self.x0, self.q, self.k);
    }

    /// Fold one overheard data packet into the moving averages.
    pub fn observe(&mut self, packet_cost: f64, own_cost: f64) {
        let l = self.ema_lambda;
        if packet_cost > own_cost {
            self.n_high = (1.0 - l) * self.n_high + l;
            self.n_low *= 1.0 - l;
        } else if packet_cost < own_cost {
            self.n_low = (1.0 - l) * self.n_low + l;
            self.n_high *= 1.0 - l;
        }
    }

    /// Traffic arrives from uphill while nothing is relayed downhill.
    pub fn stalled_traffic(&self, theta_high: f64, theta_low: f64) -> bool {
        self.n_high > theta_high && self.n_low < theta_low
    }

    /// Periodic check: step the ladder if the node has stopped forwarding
    /// (`r_n ≥ α_n`) and its downhill neighbors are silent. Returns whether a
    /// step was taken.
    pub fn periodic_check(&mut self, r_n: f64, theta_high: f64, theta_low: f64) -> bool {
        if r_n >= self.alpha_n && self.stalled_traffic(theta_high, theta_low) {
            self.ladder_step();
            true
        } else {
            false
        }
    }
}

fn coin<R: Rng + ?Sized>(rng: &mut R) -> bool {
    rng.gen::<bool>()
}

/// Payoff comparison with `c = 1`: a busy channel means Drop; otherwise
/// Forward iff `α_n > r_n`, with a fair coin on ties.
pub fn u_grab_decide<R: Rng + ?Sized>(
    alpha_n: f64,
    r_n: f64,
    congested: bool,
    rng: &mut R,
) -> Decision {
    if congested {
        return Decision::Drop;
    }
    let fwd = utility(true, false, alpha_n, r_n);
    let drop = utility(false, false, alpha_n, r_n);
    if fwd > drop || (fwd == drop && coin(rng)) {
        Decision::Forward
    } else {
        Decision::Drop
    }
}

/// Per-node spreading factor for UP-GRAB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpGrabState {
    pub k_i: u32,
    pub k_max: u32,
    pub literal: bool,
}

impl UpGrabState {
    pub fn new(k: u32, k_max: u32) -> Self {
        UpGrabState { k_i: k.clamp(1, k_max), k_max, literal: false }
    }

    pub fn literal(k: u32, k_max: u32) -> Self {
        UpGrabState { literal: true, ..Self::new(k, k_max) }
    }

    /// Move `K_i` one step so that `P_IA` falls under congestion and rises on
    /// a free channel.
    ///
    /// Below the center a larger `K` pulls `P_IA` down toward ½; above the
    /// center a larger `K` lifts it toward ½. At the center `K` has no effect
    /// and is left alone. The literal rule inverts every move, which raises
    /// `P_IA` under congestion.
    pub fn adapt(&mut self, congested: bool, delta: f64, center: f64) {
        if delta == center {
            return;
        }
        let below = delta < center;
        let up = (congested == below) != self.literal;
        self.k_i = if up {
            (self.k_i + 1).min(self.k_max)
        } else {
            self.k_i.saturating_sub(1).max(1)
        };
    }
}

/// UP-GRAB: adapt `K_i`, then play the U-GRAB game where Forward means
/// "broadcast with probability `P_IA(i)`". Returns the decision and the
/// realized `P_IA`.
#[allow(clippy::too_many_arguments)]
pub fn up_grab_decide<R: Rng + ?Sized>(
    state: &mut UpGrabState,
    delta: f64,
    bounds: (f64, f64),
    alpha_n: f64,
    r_n: f64,
    congested: bool,
    rng: &mut R,
) -> (Decision, f64) {
    state.adapt(congested, delta, center_of(bounds));
    let p_ia = f_erfc(delta, f64::from(state.k_i), bounds);
    match u_grab_decide(alpha_n, r_n, congested, rng) {
        Decision::Drop => (Decision::Drop, p_ia),
        _ => {
            let u: f64 = rng.gen();
            if u < p_ia {
                (Decision::Forward, p_ia)
            } else {
                (Decision::Drop, p_ia)
            }
        }
    }
}
