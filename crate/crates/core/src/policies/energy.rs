use serde::{Deserialize, Serialize};

use crate::phys::dbm_to_mw;

/// Radio power draws and battery size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    /// Transmit draw at 0 dBm output; scales linearly with output power in mW.
    pub tx_draw_mw_at_0dbm: f64,
    pub rx_draw_mw: f64,
    pub initial_joules: f64,
    /// The sink is mains powered: never debited, excluded from statistics.
    pub sink_mains_powered: bool,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            tx_draw_mw_at_0dbm: 75.0,
            rx_draw_mw: 24.0,
            // ~215 full-power broadcasts of a 36-byte packet at 38.4 kbit/s
            initial_joules: 0.12,
            sink_mains_powered: true,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tx_draw_mw_at_0dbm >= 0.0 && self.rx_draw_mw >= 0.0) {
            return Err("energy draws must be non-negative".into());
        }
        if !(self.initial_joules > 0.0) {
            return Err("energy.initial_joules must be positive".into());
        }
        Ok(())
    }

    pub fn tx_draw_mw(&self, tx_power_dbm: f64) -> f64 {
        self.tx_draw_mw_at_0dbm * dbm_to_mw(tx_power_dbm)
    }

    pub fn initial_nj(&self) -> u64 {
        (self.initial_joules * 1e9).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyUse {
    Tx,
    Rx,
}

/// Battery with integer nanojoule accounting so per-run energy ledgers close
/// exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Battery {
    initial_nj: u64,
    remaining_nj: u64,
    broadcasts: u32,
    mains: bool,
}

impl Battery {
    pub fn new(initial_nj: u64) -> Self {
        Battery { initial_nj, remaining_nj: initial_nj, broadcasts: 0, mains: false }
    }

    pub fn mains(initial_nj: u64) -> Self {
        Battery { mains: true, ..Self::new(initial_nj) }
    }

    pub fn with_state(initial_nj: u64, remaining_nj: u64, broadcasts: u32) -> Self {
        assert!(remaining_nj <= initial_nj);
        Battery { initial_nj, remaining_nj, broadcasts, mains: false }
    }

    pub fn initial_nj(&self) -> u64 {
        self.initial_nj
    }

    pub fn remaining_nj(&self) -> u64 {
        self.remaining_nj
    }

    pub fn consumed_nj(&self) -> u64 {
        self.initial_nj - self.remaining_nj
    }

    /// `N_F`: packets broadcast so far.
    pub fn broadcasts(&self) -> u32 {
        self.broadcasts
    }

    pub fn is_mains(&self) -> bool {
        self.mains
    }

    pub fn is_dead(&self) -> bool {
        !self.mains && self.remaining_nj == 0
    }

    /// `r_n`: fraction of the initial energy already consumed.
    pub fn consumed_ratio(&self) -> f64 {
        if self.initial_nj == 0 {
            return 1.0;
        }
        self.consumed_nj() as f64 / self.initial_nj as f64
    }

    /// Debit one transmission or reception of `airtime_ms`. Returns the
    /// nanojoules actually removed (clamped at empty; 0 for mains power).
    pub fn consume(&mut self, params: &EnergyParams, kind: EnergyUse, airtime_ms: f64, tx_power_dbm: f64) -> u64 {
        let draw_mw = match kind {
            EnergyUse::Tx => params.tx_draw_mw(tx_power_dbm),
            EnergyUse::Rx => params.rx_draw_mw,
        };
        if kind == EnergyUse::Tx {
            self.broadcasts += 1;
        }
        if self.mains {
            return 0;
        }
        // mW · ms = µJ
        let want = (draw_mw * airtime_ms * 1e3).round().max(0.0) as u64;
        let taken = want.min(self.remaining_nj);
        self.remaining_nj -= taken;
        taken
    }
}

/// Probability of life duration, `1 − 1/(N_EF + 1)` with
/// `N_EF = E_remaining / E_F` and `E_F = (E_initial − E_remaining)/N_F`.
///
/// A node that has not broadcast yet gets 1; an empty battery gets 0.
pub fn p_ld(b: &Battery) -> f64 {
    if b.is_mains() {
        return 1.0;
    }
    if b.remaining_nj() == 0 {
        return 0.0;
    }
    if b.broadcasts() == 0 || b.consumed_nj() == 0 {
        return 1.0;
    }
    let e_f = b.consumed_nj() as f64 / f64::from(b.broadcasts());
    let n_ef = b.remaining_nj() as f64 / e_f;
    1.0 - 1.0 / (n_ef + 1.0)
}
