//! `acidp` command line.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{EnvironmentSpec, ExperimentConfig, PolicySpec};
use super::experiment::{run_experiment, SummaryRow};
use crate::environments::DemandTable;
use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "acidp", version, about = "Information-directed dynamic pricing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment grid described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run one canned segment-population case (1..=6).
    Case {
        #[arg(value_parser = clap::value_parser!(u32).range(1..=6))]
        id: u32,
        #[command(flatten)]
        select: Select,
        #[command(flatten)]
        common: Common,
    },
    /// Run the demand-table scenario: products B, C, A for 2000 rounds each
    /// (T = 6000, K = 50, N = 500 by default).
    Criteo {
        /// Demand-table CSV with product_a..product_c columns; the bundled
        /// table when omitted.
        #[arg(long)]
        table: Option<PathBuf>,
        #[command(flatten)]
        select: Select,
        #[command(flatten)]
        common: Common,
    },
    /// Run the property fixtures and print pass/fail.
    Validate,
}

#[derive(Debug, Args)]
struct Select {
    /// Policy key; repeat for several policies.
    #[arg(long = "policy", required = true)]
    policies: Vec<String>,
    /// Policy parameter as `[label:]key=value`; dotted keys reach nested
    /// tables (`audit.window=200`).
    #[arg(long = "param")]
    params: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Standard,
    Theta,
    Window,
    NoAudit,
}

impl VariantArg {
    fn key(self) -> &'static str {
        match self {
            VariantArg::Standard => "acidp",
            VariantArg::Theta => "acidp-theta",
            VariantArg::Window => "acidp-window",
            VariantArg::NoAudit => "acidp-noaudit",
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces every `acidp*` policy with this variant.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Drive the confidence sequence by the global round number.
    #[arg(long)]
    paper_literal_time: bool,
    /// Smooth counterfactual valuations with the largest-midpoint bandwidth.
    #[arg(long)]
    paper_literal_noise: bool,
    /// Weight injected universes 1 (yellow) and L (red) before renormalising.
    #[arg(long)]
    paper_literal_weights: bool,
    /// Write per-round audit statistics to the audit logs.
    #[arg(long)]
    verbose_audit: bool,
}

fn is_acidp(key: &str) -> bool {
    key == "acidp" || key.starts_with("acidp-")
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty());
    let Some(last) = last else {
        return Err(Error::config(format!("empty parameter name in '{path}'")));
    };
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::config(format!("'{p}' in '{path}' is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_param(policies: &mut [PolicySpec], raw: &str) -> Result<()> {
    let (target, assignment) = match raw.split_once(':') {
        Some((label, rest)) if !label.contains('=') => (Some(label), rest),
        _ => (None, raw),
    };
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("--param '{raw}' is not key=value")))?;
    let value = parse_value(value.trim());
    let mut hit = false;
    for p in policies.iter_mut() {
        if target.is_none_or(|l| l == p.label()) {
            set_path(&mut p.params, key.trim(), value.clone())?;
            hit = true;
        }
    }
    if !hit {
        return Err(Error::config(format!("--param '{raw}' matches no policy")));
    }
    Ok(())
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        for p in cfg.policies.iter_mut().filter(|p| is_acidp(&p.key)) {
            if let Some(v) = self.variant {
                if p.label.is_none() {
                    p.label = Some(v.key().to_string());
                }
                p.key = v.key().to_string();
            }
            if self.paper_literal_time {
                set_path(&mut p.params, "audit.time", "round".into())?;
            }
            if self.paper_literal_noise {
                set_path(&mut p.params, "generator.noise", "sup_midpoint".into())?;
            }
            if self.paper_literal_weights {
                set_path(&mut p.params, "weights", "literal".into())?;
            }
            if self.verbose_audit {
                set_path(&mut p.params, "verbose_audit", true.into())?;
            }
        }
        cfg.validate()
    }
}

fn canned(env: EnvironmentSpec, select: &Select, horizon: usize, out: &str) -> Result<ExperimentConfig> {
    let mut policies: Vec<PolicySpec> = select.policies.iter().map(PolicySpec::new).collect();
    for raw in &select.params {
        apply_param(&mut policies, raw)?;
    }
    let mut cfg = ExperimentConfig::new(env, policies);
    cfg.horizon = horizon;
    cfg.out = PathBuf::from(out);
    Ok(cfg)
}

fn print_summary(out: &mut dyn Write, rows: &[SummaryRow]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<16} {:>12} {:>12} {:>12} {:>12}  hyperparameters",
        "policy", "mean_regret", "std_error", "max", "min"
    )?;
    for r in rows {
        writeln!(
            out,
            "{:<16} {:>12.1} {:>12.1} {:>12.1} {:>12.1}  {}",
            r.policy, r.mean_regret, r.standard_error, r.max, r.min, r.hyperparameters
        )?;
    }
    Ok(())
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    let cfg = match cmd {
        Command::Validate => {
            let results = crate::validate::run_all();
            let mut ok = true;
            for r in &results {
                writeln!(out, "{r}")?;
                ok &= r.passed;
            }
            return Ok(if ok { EXIT_OK } else { EXIT_RUNTIME });
        }
        Command::Run { config, common } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            common.apply(&mut cfg)?;
            cfg
        }
        Command::Case { id, select, common } => {
            let mut cfg = canned(EnvironmentSpec::case(id), &select, 2000, &format!("out/case{id}"))?;
            common.apply(&mut cfg)?;
            cfg
        }
        Command::Criteo {
            table,
            select,
            common,
        } => {
            let mut env = EnvironmentSpec::table(table);
            env.schedule = Some(DemandTable::criteo_schedule());
            let mut cfg = canned(env, &select, 6000, "out/criteo")?;
            common.apply(&mut cfg)?;
            cfg
        }
    };
    let report = run_experiment(&cfg)?;
    writeln!(
        out,
        "{} | T={} trials={} seed={} -> {}",
        cfg.environment.describe(),
        cfg.horizon,
        cfg.trials,
        cfg.base_seed,
        report.out.display()
    )?;
    print_summary(out, &report.summary)?;
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "acidp: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_paths() {
        let mut ps = vec![PolicySpec::new("acidp"), PolicySpec::new("eg")];
        apply_param(&mut ps, "acidp:audit.window=200").unwrap();
        apply_param(&mut ps, "eg:epsilon=0.05").unwrap();
        let audit = ps[0].params["audit"].as_table().unwrap();
        assert_eq!(audit["window"].as_integer(), Some(200));
        assert_eq!(ps[1].params["epsilon"].as_float(), Some(0.05));
        assert!(apply_param(&mut ps, "nobody:x=1").is_err());
        assert!(apply_param(&mut ps, "justakey").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run_with(["acidp", "frobnicate"], &mut out, &mut err), EXIT_CONFIG);
        assert_eq!(run_with(["acidp", "case", "7", "--policy", "ts"], &mut out, &mut err), EXIT_CONFIG);
        assert_eq!(run_with(["acidp", "--help"], &mut out, &mut err), EXIT_OK);
    }
}
