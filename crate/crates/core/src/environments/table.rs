use std::io::Read;
use std::path::Path;

use rand::RngCore;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{Error, Result};
use crate::pricing::PriceGrid;

const CRITEO_CSV: &str = include_str!("../../data/criteo_demand.csv");

/// Rounds `start..=end` (1-based, inclusive) use `product`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub start: usize,
    pub end: usize,
    pub product: String,
}

/// Per-price conversion rates for several products, with a schedule saying
/// which product is on sale in which round.
#[derive(Debug, Clone)]
pub struct DemandTable {
    prices: Vec<f64>,
    products: Vec<String>,
    /// `rates[p][k]`: conversion of product `p` at `prices[k]`.
    rates: Vec<Vec<f64>>,
    schedule: Vec<ScheduleEntry>,
}

impl DemandTable {
    /// Parses a table with header `price,<product>,<product>,...`. The
    /// schedule defaults to the first product for every round.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 2 || header.get(0) != Some("price") {
            return Err(Error::parse(1, 1, "header must be price,<product>,..."));
        }
        let products: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut prices = Vec::new();
        let mut rates = vec![Vec::new(); products.len()];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != header.len() {
                return Err(Error::parse(
                    line,
                    rec.len().min(header.len()) + 1,
                    format!("expected {} fields, found {}", header.len(), rec.len()),
                ));
            }
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|e| Error::parse(line, c + 1, format!("'{field}': {e}")))?;
                if c == 0 {
                    prices.push(v);
                } else {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::parse(line, c + 1, "conversion rate outside [0, 1]"));
                    }
                    rates[c - 1].push(v);
                }
            }
        }
        if prices.is_empty() {
            return Err(Error::parse(2, 1, "table has no rows"));
        }
        if prices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("table prices must be strictly increasing"));
        }
        let first = products[0].clone();
        Ok(Self {
            prices,
            products,
            rates,
            schedule: vec![ScheduleEntry {
                start: 1,
                end: usize::MAX,
                product: first,
            }],
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    /// The shipped e-commerce table with its three-regime schedule:
    /// product B for rounds 1–2000, C for 2001–4000, A for 4001–6000.
    pub fn criteo_default() -> Result<Self> {
        Self::from_csv(CRITEO_CSV.as_bytes())?.with_schedule(Self::criteo_schedule())
    }

    pub fn criteo_schedule() -> Vec<ScheduleEntry> {
        let e = |start, end, p: &str| ScheduleEntry {
            start,
            end,
            product: p.to_owned(),
        };
        vec![
            e(1, 2000, "product_b"),
            e(2001, 4000, "product_c"),
            e(4001, 6000, "product_a"),
        ]
    }

    /// Replaces the schedule. Entries must name known products, be
    /// non-empty, and follow each other without gaps or overlap.
    pub fn with_schedule(mut self, schedule: Vec<ScheduleEntry>) -> Result<Self> {
        if schedule.is_empty() {
            return Err(Error::config("schedule needs at least one entry"));
        }
        for (i, e) in schedule.iter().enumerate() {
            if e.start == 0 || e.end < e.start {
                return Err(Error::config(format!(
                    "bad schedule range {}..={}",
                    e.start, e.end
                )));
            }
            if self.product_index(&e.product).is_none() {
                return Err(Error::config(format!("unknown product '{}'", e.product)));
            }
            if i > 0 && schedule[i - 1].end.checked_add(1) != Some(e.start) {
                return Err(Error::config("schedule entries must be contiguous"));
            }
        }
        self.schedule = schedule;
        Ok(self)
    }

    /// Fixes a single product for every round.
    pub fn single_product(self, product: &str) -> Result<Self> {
        self.with_schedule(vec![ScheduleEntry {
            start: 1,
            end: usize::MAX,
            product: product.to_owned(),
        }])
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn schedule(&self) -> &[ScheduleEntry] {
        &self.schedule
    }

    /// Grid over every table price with batch size `n`.
    pub fn grid(&self, n: u32) -> Result<PriceGrid> {
        PriceGrid::new(self.prices.clone(), n)
    }

    /// Product active in round `t`; rounds outside the schedule use the
    /// nearest entry.
    pub fn active_product(&self, t: usize) -> &str {
        let entry = self
            .schedule
            .iter()
            .find(|e| t >= e.start && t <= e.end)
            .unwrap_or_else(|| {
                if t < self.schedule[0].start {
                    &self.schedule[0]
                } else {
                    &self.schedule[self.schedule.len() - 1]
                }
            });
        &entry.product
    }

    /// Conversion rate of `product` at `price`.
    pub fn rate(&self, product: &str, price: f64) -> Result<f64> {
        let p = self
            .product_index(product)
            .ok_or_else(|| Error::Lookup(format!("unknown product '{product}'")))?;
        let k = self
            .prices
            .iter()
            .position(|q| (q - price).abs() <= 1e-9 * q.abs().max(1.0))
            .ok_or_else(|| Error::Lookup(format!("price {price} is not in the demand table")))?;
        Ok(self.rates[p][k])
    }

    fn product_index(&self, name: &str) -> Option<usize> {
        self.products.iter().position(|p| p == name)
    }
}

impl Environment for DemandTable {
    fn true_demand(&self, t: usize, price: f64) -> Result<f64> {
        self.rate(self.active_product(t), price)
    }

    fn same_market(&self, s: usize, t: usize) -> bool {
        self.active_product(s) == self.active_product(t)
    }

    fn sample_batch(
        &self,
        t: usize,
        price: f64,
        batch_size: u32,
        rng: &mut dyn RngCore,
    ) -> Result<u32> {
        let p = self.true_demand(t, price)?;
        let dist = Binomial::new(u64::from(batch_size), p)
            .map_err(|e| Error::Runtime(format!("binomial draw: {e}")))?;
        Ok(dist.sample(rng) as u32)
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self
            .schedule
            .iter()
            .map(|e| {
                if e.end == usize::MAX {
                    format!("{} from {}", e.product, e.start)
                } else {
                    format!("{} {}-{}", e.product, e.start, e.end)
                }
            })
            .collect();
        format!("demand table ({})", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::oracle_profit;

    #[test]
    fn product_b_at_150() {
        let t = DemandTable::criteo_default().unwrap();
        assert_eq!(t.rate("product_b", 150.0).unwrap(), 0.737);
        assert_eq!(t.true_demand(1, 150.0).unwrap(), 0.737);
    }

    #[test]
    fn off_table_price_is_lookup_error() {
        let t = DemandTable::criteo_default().unwrap();
        assert!(matches!(t.true_demand(1, 155.0), Err(Error::Lookup(_))));
    }

    #[test]
    fn schedule_switches_products() {
        let t = DemandTable::criteo_default().unwrap();
        assert_eq!(t.active_product(2000), "product_b");
        assert_eq!(t.active_product(2001), "product_c");
        assert_eq!(t.active_product(4001), "product_a");
        assert_eq!(t.active_product(9000), "product_a");
    }

    #[test]
    fn regime_optima() {
        let t = DemandTable::criteo_default().unwrap();
        let grid = t.grid(500).unwrap();
        let best = |round| grid.price(oracle_profit(&t, round, &grid).unwrap().0);
        assert_eq!(best(1), 150.0);
        assert_eq!(best(3000), 280.0);
        assert_eq!(best(5000), 70.0);
    }

    #[test]
    fn rows_are_monotone() {
        let t = DemandTable::criteo_default().unwrap();
        assert_eq!(t.prices().len(), 50);
        for p in t.products() {
            let row: Vec<f64> = t.prices().iter().map(|&a| t.rate(p, a).unwrap()).collect();
            assert!(row.windows(2).all(|w| w[0] >= w[1]), "{p}");
        }
    }

    #[test]
    fn malformed_csv_reports_position() {
        let err = DemandTable::from_csv("price,a\n1,0.5\n2,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, column: 2, .. }), "{err}");
        let err = DemandTable::from_csv("price,a\n1,1.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn bad_schedule_rejected() {
        let t = DemandTable::criteo_default().unwrap();
        let gap = vec![
            ScheduleEntry { start: 1, end: 10, product: "product_a".into() },
            ScheduleEntry { start: 12, end: 20, product: "product_b".into() },
        ];
        assert!(t.clone().with_schedule(gap).is_err());
        assert!(t.single_product("product_z").is_err());
    }
}
