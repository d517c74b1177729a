//! Human-readable tables and long-format CSV from aggregate files.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::metrics::{aggregate_header, METRICS};
use crate::policies::Protocol;

pub const LONG_HEADER: [&str; 4] = ["cell", "metric", "mean", "std"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub protocol: Protocol,
    pub p_f: f64,
    pub param: String,
    /// `(metric, mean, std)`; absent metrics are skipped.
    pub values: Vec<(String, f64, f64)>,
}

impl ReportRow {
    pub fn cell(&self) -> String {
        format!("{}|{}|{}", self.protocol, self.p_f, self.param)
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Csv(format!("bad {what} `{field}`")))
}

fn parse_protocol(field: &str) -> Result<Protocol> {
    field.parse::<Protocol>().map_err(Error::Csv)
}

/// Parse either an aggregate CSV or a long-format CSV.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let rows = if header == LONG_HEADER {
        read_long(&mut rdr)?
    } else if header == aggregate_header() {
        read_aggregate(&mut rdr)?
    } else {
        return Err(Error::Csv("unrecognized header".into()));
    };
    Ok(sorted(rows))
}

fn read_aggregate<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut values = Vec::new();
        for (i, m) in METRICS.iter().enumerate() {
            let (mean, std) = (&rec[4 + 3 * i], &rec[5 + 3 * i]);
            if mean.is_empty() {
                continue;
            }
            values.push((m.to_string(), parse_f64(mean, "mean")?, parse_f64(std, "std")?));
        }
        rows.push(ReportRow {
            protocol: parse_protocol(&rec[0])?,
            p_f: parse_f64(&rec[1], "p_f")?,
            param: rec[2].to_string(),
            values,
        });
    }
    Ok(rows)
}

fn read_long<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<ReportRow>> {
    let mut rows: Vec<ReportRow> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut parts = rec[0].splitn(3, '|');
        let (Some(p), Some(pf), Some(param)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Csv(format!("bad cell `{}`", &rec[0])));
        };
        let protocol = parse_protocol(p)?;
        let p_f = parse_f64(pf, "p_f")?;
        let value = (rec[1].to_string(), parse_f64(&rec[2], "mean")?, parse_f64(&rec[3], "std")?);
        match rows
            .iter_mut()
            .find(|r| r.protocol == protocol && r.p_f == p_f && r.param == param)
        {
            Some(r) => r.values.push(value),
            None => rows.push(ReportRow { protocol, p_f, param: param.to_string(), values: vec![value] }),
        }
    }
    Ok(rows)
}

/// Stable order: protocol, then `p_f`, then parameter label. Metrics keep
/// their canonical order.
fn sorted(mut rows: Vec<ReportRow>) -> Vec<ReportRow> {
    let rank = |m: &str| METRICS.iter().position(|x| *x == m).unwrap_or(METRICS.len());
    for r in &mut rows {
        r.values.sort_by(|a, b| rank(&a.0).cmp(&rank(&b.0)).then_with(|| a.0.cmp(&b.0)));
    }
    rows.sort_by(|a, b| {
        a.protocol
            .cmp(&b.protocol)
            .then(a.p_f.total_cmp(&b.p_f))
            .then_with(|| natural_cmp(&a.param, &b.param))
    });
    rows
}

/// Compare labels with embedded numbers by value, so `k=2` sorts before
/// `k=16`.
fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            let is_num = |j: usize| bytes[j].is_ascii_digit() || bytes[j] == b'.';
            if i == bytes.len() || is_num(i) != is_num(start) {
                out.push((is_num(start), &s[start..i]));
                start = i;
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for (x, y) in ca.iter().zip(&cb) {
        let ord = match (x, y) {
            ((true, u), (true, v)) => match (u.parse::<f64>(), v.parse::<f64>()) {
                (Ok(p), Ok(q)) => p.total_cmp(&q),
                _ => u.cmp(v),
            },
            _ => x.1.cmp(y.1),
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

pub fn write_long<W: Write>(w: W, rows: &[ReportRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(LONG_HEADER)?;
    for r in rows {
        let cell = r.cell();
        for (m, mean, std) in &r.values {
            out.write_record([cell.as_str(), m, &mean.to_string(), &std.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn render_table(rows: &[ReportRow]) -> String {
    let mut head = format!("{:<8} {:>5} {:<16}", "protocol", "p_f", "param");
    for m in METRICS {
        let _ = write!(head, " {:>22}", m);
    }
    let mut s = head.trim_end().to_string();
    s.push('\n');
    for r in rows {
        let mut line = format!("{:<8} {:>5} {:<16}", r.protocol.to_string(), r.p_f, r.param);
        for m in METRICS {
            let cell = match r.values.iter().find(|v| v.0 == m) {
                Some((_, mean, std)) => format!("{mean:.4} ± {std:.4}"),
                None => "-".into(),
            };
            let _ = write!(line, " {:>22}", cell);
        }
        s.push_str(line.trim_end());
        s.push('\n');
    }
    s
}
