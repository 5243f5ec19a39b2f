use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::environments::{CaseOptions, DemandTable, Environment, ScheduleEntry, SegmentPopulation};
use crate::error::{Error, Result};
use crate::pricing::PriceGrid;

/// Grid used by the segment-population cases.
pub const CASE_GRID: (f64, f64, usize, u32) = (0.01, 1.0, 20, 10);
/// Batch size of the demand-table scenario.
pub const TABLE_BATCH: u32 = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub low: f64,
    pub high: f64,
    pub k: usize,
    pub n: u32,
}

impl GridSpec {
    pub fn build(&self) -> Result<PriceGrid> {
        PriceGrid::evenly_spaced(self.low, self.high, self.k, self.n)
    }
}

/// Either a canned segment case or a demand table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSpec {
    /// Canned segment case `1..=6`.
    pub case: Option<u32>,
    pub options: CaseOptions,
    /// Demand-table CSV; `"builtin"` selects the bundled table.
    pub table: Option<PathBuf>,
    /// Product schedule for the table; the bundled schedule when absent.
    pub schedule: Option<Vec<ScheduleEntry>>,
    /// Pins the table to one product for the whole run.
    pub product: Option<String>,
}

impl EnvironmentSpec {
    pub fn case(case_id: u32) -> Self {
        Self {
            case: Some(case_id),
            ..Self::default()
        }
    }

    pub fn table(path: Option<PathBuf>) -> Self {
        Self {
            table: Some(path.unwrap_or_else(|| PathBuf::from("builtin"))),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.case, &self.table) {
            (Some(c), None) if (1..=6).contains(&c) => Ok(()),
            (Some(c), None) => Err(Error::config(format!("case must be in 1..=6, got {c}"))),
            (None, Some(_)) => Ok(()),
            (Some(_), Some(_)) => Err(Error::config(
                "environment sets both 'case' and 'table'",
            )),
            (None, None) => Err(Error::config("environment needs 'case' or 'table'")),
        }
    }

    fn load_table(&self) -> Result<DemandTable> {
        let path = self.table.as_deref().unwrap_or(Path::new("builtin"));
        let mut table = if path == Path::new("builtin") {
            DemandTable::criteo_default()?
        } else {
            DemandTable::load(path).map_err(|e| match e {
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                    Error::config(format!("demand table not found: {}", path.display()))
                }
                other => other,
            })?
        };
        if let Some(s) = &self.schedule {
            table = table.with_schedule(s.clone())?;
        }
        if let Some(p) = &self.product {
            table = table.single_product(p)?;
        }
        Ok(table)
    }

    /// Market for one trial. Segment cases draw their population from
    /// `seed`; tables are deterministic.
    pub fn build(&self, seed: u64) -> Result<Arc<dyn Environment>> {
        self.validate()?;
        match self.case {
            Some(c) => Ok(Arc::new(SegmentPopulation::for_case(c, seed, &self.options)?)),
            None => Ok(Arc::new(self.load_table()?)),
        }
    }

    /// Grid implied by the environment when the config names none.
    pub fn default_grid(&self) -> Result<PriceGrid> {
        self.validate()?;
        match self.case {
            Some(_) => {
                let (low, high, k, n) = CASE_GRID;
                PriceGrid::evenly_spaced(low, high, k, n)
            }
            None => self.load_table()?.grid(TABLE_BATCH),
        }
    }

    pub fn describe(&self) -> String {
        match (self.case, &self.table) {
            (Some(c), _) => format!("case{c}"),
            (None, Some(p)) => format!("table:{}", p.display()),
            _ => "unset".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    /// Registry key.
    pub key: String,
    /// Name used in output files and the summary; defaults to the key.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub params: toml::Table,
}

impl PolicySpec {
    pub fn new(key: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            label: None,
            params: toml::Table::new(),
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.key)
    }
}

fn default_horizon() -> usize {
    2000
}

fn default_trials() -> usize {
    10
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

/// One file fully determines an experiment, seeds included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(rename = "policy")]
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// All policies in a trial face the same customer draws.
    #[serde(default = "default_true")]
    pub common_random_numbers: bool,
}

impl ExperimentConfig {
    pub fn new(environment: EnvironmentSpec, policies: Vec<PolicySpec>) -> Self {
        Self {
            environment,
            grid: None,
            policies,
            horizon: default_horizon(),
            trials: default_trials(),
            base_seed: 0,
            out: default_out(),
            common_random_numbers: true,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::config(format!("config not found: {}", path.display()))
            }
            _ => Error::config(format!("cannot read config {}: {e}", path.display())),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        if self.trials == 0 || self.horizon == 0 {
            return Err(Error::config("trials and horizon must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("no [[policy]] entries"));
        }
        let mut labels: Vec<&str> = self.policies.iter().map(PolicySpec::label).collect();
        if let Some(bad) = labels.iter().find(|l| {
            l.is_empty() || !l.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        }) {
            return Err(Error::config(format!(
                "policy label '{bad}' must be non-empty and use only [A-Za-z0-9._-]"
            )));
        }
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(format!("duplicate policy label '{}'", w[0])));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PriceGrid> {
        match &self.grid {
            Some(g) => g.build(),
            None => self.environment.default_grid(),
        }
    }
}
