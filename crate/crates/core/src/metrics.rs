//! Per-run measurements and cross-run aggregation.

use std::collections::BTreeMap;
use std::io::Write;

use crate::engine::SimTime;
use crate::error::{Error, Result};
use crate::mac::MessageId;
use crate::policies::{Battery, Protocol};

pub const RUN_HEADER: [&str; 10] = [
    "run",
    "protocol",
    "p_f",
    "param",
    "success_ratio",
    "avg_delay_ms",
    "forwarded",
    "adv",
    "energy_pct",
    "dead_nodes",
];

/// Metric columns shared by the per-run and aggregate files, in output order.
pub const METRICS: [&str; 6] =
    ["success_ratio", "avg_delay_ms", "forwarded", "adv", "energy_pct", "dead_nodes"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub run: u32,
    pub protocol: Protocol,
    pub p_f: f64,
    /// Extra swept parameters, `key=value` joined by `;`.
    pub param: String,
    pub messages_sent: u32,
    pub messages_delivered: u32,
    pub min_delay_ms: BTreeMap<MessageId, f64>,
    /// Data broadcasts by all nodes, sources included.
    pub forwarded_total: u64,
    pub adv_total: u64,
    pub count_total: u64,
    pub energy_consumed_pct: f64,
    pub dead_nodes: u32,
    /// Transmissions cancelled because the sender's battery was empty.
    pub suppressed: u64,
    /// ADV receptions lost to interference or half-duplex.
    pub adv_losses: u64,
    /// Nodes (sink included) with a finite cost after setup.
    pub connected_nodes: u32,
    pub energy_debited_nj: u64,
}

impl RunMetrics {
    /// `None` when no message was injected.
    pub fn success_ratio(&self) -> Option<f64> {
        (self.messages_sent > 0)
            .then(|| f64::from(self.messages_delivered) / f64::from(self.messages_sent))
    }

    /// Mean of the per-message minimum delays, delivered messages only.
    pub fn avg_delay_ms(&self) -> Option<f64> {
        if self.min_delay_ms.is_empty() {
            return None;
        }
        Some(self.min_delay_ms.values().sum::<f64>() / self.min_delay_ms.len() as f64)
    }

    /// Setup-phase broadcasts: ADVs plus neighbor counts.
    pub fn setup_broadcasts(&self) -> u64 {
        self.adv_total + self.count_total
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "success_ratio" => self.success_ratio(),
            "avg_delay_ms" => self.avg_delay_ms(),
            "forwarded" => Some(self.forwarded_total as f64),
            "adv" => Some(self.setup_broadcasts() as f64),
            "energy_pct" => Some(self.energy_consumed_pct),
            "dead_nodes" => Some(f64::from(self.dead_nodes)),
            _ => None,
        }
    }

    fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.run.to_string(),
            self.protocol.to_string(),
            self.p_f.to_string(),
            self.param.clone(),
            opt(self.success_ratio()),
            opt(self.avg_delay_ms()),
            self.forwarded_total.to_string(),
            self.setup_broadcasts().to_string(),
            self.energy_consumed_pct.to_string(),
            self.dead_nodes.to_string(),
        ]
    }
}

/// Collects deliveries and counters while a replication runs.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    injected: BTreeMap<MessageId, SimTime>,
    delivered: BTreeMap<MessageId, SimTime>,
    pub forwarded_total: u64,
    pub adv_total: u64,
    pub count_total: u64,
    pub suppressed: u64,
    pub adv_losses: u64,
    pub energy_debited_nj: u64,
}

impl Recorder {
    pub fn record_injection(&mut self, id: MessageId, t: SimTime) {
        self.injected.insert(id, t);
    }

    /// Returns true for the first copy of a message to reach the sink.
    pub fn record_delivery(&mut self, id: MessageId, t: SimTime) -> bool {
        if let Some(first) = self.delivered.get(&id) {
            debug_assert!(*first <= t, "a later copy cannot arrive earlier");
            return false;
        }
        assert!(self.injected.contains_key(&id), "delivery of a message never injected");
        self.delivered.insert(id, t);
        true
    }

    pub fn min_delay_ms(&self, id: &MessageId) -> Option<f64> {
        let t = self.delivered.get(id)?;
        Some(t.as_ms() - self.injected[id].as_ms())
    }

    pub fn messages_sent(&self) -> usize {
        self.injected.len()
    }

    /// Close the run. Fails if the energy ledger does not balance.
    pub fn finalize(
        &self,
        run: u32,
        protocol: Protocol,
        p_f: f64,
        param: &str,
        sensors: &[&Battery],
        connected_nodes: u32,
    ) -> Result<RunMetrics> {
        let consumed: u64 = sensors.iter().map(|b| b.consumed_nj()).sum();
        if consumed != self.energy_debited_nj {
            return Err(Error::Fault(format!(
                "energy ledger mismatch: debited {} nJ, batteries lost {} nJ",
                self.energy_debited_nj, consumed
            )));
        }
        let pct = if sensors.is_empty() {
            0.0
        } else {
            100.0 * sensors.iter().map(|b| b.consumed_ratio()).sum::<f64>() / sensors.len() as f64
        };
        let min_delay_ms = self
            .delivered
            .keys()
            .map(|id| (*id, self.min_delay_ms(id).expect("delivered")))
            .collect();
        Ok(RunMetrics {
            run,
            protocol,
            p_f,
            param: param.to_string(),
            messages_sent: self.injected.len() as u32,
            messages_delivered: self.delivered.len() as u32,
            min_delay_ms,
            forwarded_total: self.forwarded_total,
            adv_total: self.adv_total,
            count_total: self.count_total,
            energy_consumed_pct: pct,
            dead_nodes: sensors.iter().filter(|b| b.is_dead()).count() as u32,
            suppressed: self.suppressed,
            adv_losses: self.adv_losses,
            connected_nodes,
            energy_debited_nj: self.energy_debited_nj,
        })
    }
}

/// Identifies one experiment cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub protocol: Protocol,
    pub p_f: f64,
    pub param: String,
}

impl CellKey {
    pub fn of(m: &RunMetrics) -> Self {
        CellKey { protocol: m.protocol, p_f: m.p_f, param: m.param.clone() }
    }

    pub fn label(&self) -> String {
        format!("{}|{}|{}", self.protocol, self.p_f, self.param)
    }

    pub fn cmp_stable(&self, other: &Self) -> std::cmp::Ordering {
        self.protocol
            .cmp(&other.protocol)
            .then(self.p_f.total_cmp(&other.p_f))
            .then_with(|| self.param.cmp(&other.param))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (`n − 1`), 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        if values.iter().all(|v| *v == values[0]) {
            return Some(Summary { mean: values[0], std: 0.0, n });
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Summary { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellAggregate {
    pub key: CellKey,
    pub runs: usize,
    /// One entry per name in [`METRICS`]; `None` if every run lacked it.
    pub stats: Vec<Option<Summary>>,
}

impl CellAggregate {
    /// Aggregate runs of one cell. Values are sorted before summing so the
    /// result does not depend on run order.
    pub fn from_runs(key: CellKey, runs: &[RunMetrics]) -> Self {
        let stats = METRICS
            .iter()
            .map(|name| {
                let mut v: Vec<f64> = runs.iter().filter_map(|r| r.metric(name)).collect();
                v.sort_by(f64::total_cmp);
                Summary::of(&v)
            })
            .collect();
        CellAggregate { key, runs: runs.len(), stats }
    }

    pub fn get(&self, metric: &str) -> Option<Summary> {
        let i = METRICS.iter().position(|m| *m == metric)?;
        self.stats[i]
    }

    pub fn mean(&self, metric: &str) -> f64 {
        self.get(metric).map(|s| s.mean).unwrap_or(f64::NAN)
    }
}

/// Group runs by cell, preserving first-seen cell order.
pub fn aggregate(runs: &[RunMetrics]) -> Vec<CellAggregate> {
    let mut keys: Vec<CellKey> = Vec::new();
    for r in runs {
        let k = CellKey::of(r);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|k| {
            let members: Vec<RunMetrics> =
                runs.iter().filter(|r| CellKey::of(r) == k).cloned().collect();
            CellAggregate::from_runs(k, &members)
        })
        .collect()
}

pub fn aggregate_header() -> Vec<String> {
    let mut h: Vec<String> = ["protocol", "p_f", "param", "runs"].map(String::from).to_vec();
    for m in METRICS {
        h.push(format!("{m}_mean"));
        h.push(format!("{m}_std"));
        h.push(format!("{m}_n"));
    }
    h
}

pub fn write_runs_csv<W: Write>(w: W, runs: &[RunMetrics]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RUN_HEADER)?;
    for r in runs {
        out.write_record(r.csv_record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(w: W, cells: &[CellAggregate]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(aggregate_header())?;
    for c in cells {
        let mut rec = vec![
            c.key.protocol.to_string(),
            c.key.p_f.to_string(),
            c.key.param.clone(),
            c.runs.to_string(),
        ];
        for s in &c.stats {
            match s {
                Some(s) => {
                    rec.push(s.mean.to_string());
                    rec.push(s.std.to_string());
                    rec.push(s.n.to_string());
                }
                None => rec.extend([String::new(), String::new(), "0".into()]),
            }
        }
        out.write_record(rec)?;
    }
    out.flush()?;
    Ok(())
}
