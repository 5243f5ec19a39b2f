//! Per-round trial records and their CSV form.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pricing::{realized_profit, regret_step};

/// Alert state raised by a policy's auditing pipeline on a given round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alert {
    #[default]
    None,
    Yellow,
    Red,
}

impl fmt::Display for Alert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alert::None => "none",
            Alert::Yellow => "yellow",
            Alert::Red => "red",
        })
    }
}

impl FromStr for Alert {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Alert::None),
            "yellow" => Ok(Alert::Yellow),
            "red" => Ok(Alert::Red),
            other => Err(Error::Runtime(format!("unknown alert '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    /// 0-based arm index.
    pub arm: usize,
    pub price: f64,
    pub demand: u32,
    pub profit: f64,
    pub oracle_profit: f64,
    pub cum_regret: f64,
    pub alert: Alert,
}

pub const TRACE_HEADER: [&str; 8] = [
    "t",
    "arm",
    "price",
    "demand",
    "profit",
    "oracle_profit",
    "cum_regret",
    "alert",
];

/// Sequence of rounds with running regret
/// `cum_regret(t) = Σ_{τ≤t} oracle_profit(τ) − profit(τ)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    rows: Vec<TraceRow>,
}

impl TrialTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            rows: Vec::with_capacity(n),
        }
    }

    /// Appends a round, computing realized profit and cumulative regret.
    pub fn record(
        &mut self,
        t: usize,
        arm: usize,
        price: f64,
        demand: u32,
        oracle_profit: f64,
        alert: Alert,
    ) {
        let profit = realized_profit(price, demand);
        let prev = self.rows.last().map_or(0.0, |r| r.cum_regret);
        self.rows.push(TraceRow {
            t,
            arm,
            price,
            demand,
            profit,
            oracle_profit,
            cum_regret: prev + regret_step(oracle_profit, profit),
            alert,
        });
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Cumulative regret at round `t` (1-based), or 0 before the first round.
    pub fn regret_at(&self, t: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        self.rows
            .get(t.min(self.rows.len()).saturating_sub(1))
            .map_or(0.0, |r| r.cum_regret)
    }

    pub fn arms(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(|r| r.arm)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TRACE_HEADER)?;
        for r in &self.rows {
            w.write_record(&[
                r.t.to_string(),
                (r.arm + 1).to_string(),
                r.price.to_string(),
                r.demand.to_string(),
                r.profit.to_string(),
                r.oracle_profit.to_string(),
                r.cum_regret.to_string(),
                r.alert.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(TRACE_HEADER.iter().copied()) {
            return Err(Error::parse(1, 1, "unexpected trace header"));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let field = |c: usize| -> Result<&str> {
                rec.get(c)
                    .ok_or_else(|| Error::parse(line, c + 1, "missing field"))
            };
            let num = |c: usize| -> Result<f64> {
                field(c)?
                    .parse::<f64>()
                    .map_err(|e| Error::parse(line, c + 1, e.to_string()))
            };
            let int = |c: usize| -> Result<usize> {
                field(c)?
                    .parse::<usize>()
                    .map_err(|e| Error::parse(line, c + 1, e.to_string()))
            };
            let arm = int(1)?;
            if arm == 0 {
                return Err(Error::parse(line, 2, "arm numbers are 1-based"));
            }
            rows.push(TraceRow {
                t: int(0)?,
                arm: arm - 1,
                price: num(2)?,
                demand: int(3)? as u32,
                profit: num(4)?,
                oracle_profit: num(5)?,
                cum_regret: num(6)?,
                alert: field(7)?
                    .parse()
                    .map_err(|_| Error::parse(line, 8, "bad alert value"))?,
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrialTrace {
        let mut tr = TrialTrace::new();
        tr.record(1, 0, 0.5, 7, 4.0, Alert::None);
        tr.record(2, 1, 0.9, 1, 2.0, Alert::Yellow);
        tr.record(3, 0, 0.5, 9, 4.0, Alert::Red);
        tr
    }

    #[test]
    fn cumulative_regret_is_recomputable() {
        let tr = sample();
        let oracle: f64 = tr.rows().iter().map(|r| r.oracle_profit).sum();
        let realized: f64 = tr.rows().iter().map(|r| r.profit).sum();
        assert!((tr.final_regret() - (oracle - realized)).abs() < 1e-12);
        // a lucky draw gives a negative increment
        assert!(tr.rows()[2].cum_regret < tr.rows()[1].cum_regret);
    }

    #[test]
    fn csv_round_trip_uses_one_based_arms() {
        let tr = sample();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,arm,price,demand,profit,oracle_profit,cum_regret,alert\n"));
        assert!(text.contains("\n2,2,0.9,1,0.9,2,"));
        assert!(text.contains(",yellow\n"));
        let back = TrialTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, tr);
    }
}
