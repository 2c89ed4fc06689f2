//! Command-line interface.
//!
//! [`run`] parses arguments, executes one command and returns the process
//! exit code: 0 on success, 1 on parse or validation errors, 2 when the
//! estimator never sustained a probe.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::explorer::{explore, plan};
use crate::optimizer::{optimize, SingleTaskCache};
use crate::replay::{render, replay_all};
use crate::scenario::{measurements_csv, model_from_toml, model_to_toml, plan_table, Scenario};
use crate::types::{Configuration, ResourceBudget, ResourceProfile};
use crate::estimator::estimate_mst;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NEVER_SUCCEEDED: i32 = 2;

pub const MODEL_FILE: &str = "model.toml";
pub const CSV_FILE: &str = "measurements.csv";
pub const PLAN_FILE: &str = "plan.txt";

#[derive(Debug, Parser)]
#[command(name = "capplan", version, about = "Capacity planning for stream processing queries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the maximum sustainable throughput of one configuration.
    Estimate {
        #[arg(long)]
        scenario: PathBuf,
        /// Per-operator parallelism in graph order, e.g. `3,6`. Defaults to one task each.
        #[arg(long, value_delimiter = ',')]
        config: Vec<u32>,
        #[arg(long, default_value_t = 4096)]
        profile: u32,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Split a slot budget across operators and measure the result.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        slots: u32,
        #[arg(long, default_value_t = 4096)]
        profile: u32,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Explore the search space, fit a capacity model and plan a target rate.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        /// Requested source rate in events per second. Defaults to the scenario's.
        #[arg(long)]
        rate: Option<f64>,
        /// Memory profile to plan for, repeatable. Defaults to the scenario's.
        #[arg(long)]
        profile: Vec<u32>,
        #[arg(long, default_value = "capplan-out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predict the capacity of a budget from a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        profile: u32,
        #[arg(long)]
        slots: u32,
    },
    /// Check published planning tables against their published models.
    ReplayTables,
}

/// Runs the CLI with `args` (program name first).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_INVALID
                }
            };
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NeverSucceeded { .. } => EXIT_NEVER_SUCCEEDED,
        _ => EXIT_INVALID,
    }
}

/// Runs a command and returns its standard output.
pub fn execute(command: Command) -> Result<String> {
    match command {
        Command::Estimate {
            scenario,
            config,
            profile,
            seed,
        } => cmd_estimate(&scenario, &config, profile, seed),
        Command::Optimize {
            scenario,
            slots,
            profile,
            seed,
        } => cmd_optimize(&scenario, slots, profile, seed),
        Command::Plan {
            scenario,
            rate,
            profile,
            out,
            seed,
        } => cmd_plan(&scenario, rate, &profile, &out, seed),
        Command::Predict {
            model,
            profile,
            slots,
        } => cmd_predict(&model, profile, slots),
        Command::ReplayTables => {
            let (text, ok) = render(&replay_all());
            if ok {
                Ok(text)
            } else {
                Err(Error::InvalidParameter(format!(
                    "published tables do not replay\n{text}"
                )))
            }
        }
    }
}

pub fn cmd_estimate(path: &Path, config: &[u32], profile_mb: u32, seed: Option<u64>) -> Result<String> {
    let s = Scenario::load(path)?;
    let graph = s.spec.graph();
    let config = if config.is_empty() {
        Configuration::single_task(graph)
    } else {
        Configuration::from_values(graph, config)?
    };
    let profile = ResourceProfile::new(profile_mb)?;
    let r = estimate_mst(&s.spec, &config, profile, &s.ce_params, seed.unwrap_or(s.seed))?;
    Ok(format!(
        "configuration    {}\nprofile_mb       {}\nmst              {:.6e}\nachieved_ratio   {:.4}\niterations       {}\nsource_saturated {}\nsimulated_s      {}\n",
        describe(&config),
        profile_mb,
        r.mst,
        r.achieved_ratio,
        r.iterations_used,
        r.source_saturated,
        r.simulated_s
    ))
}

pub fn cmd_optimize(path: &Path, slots: u32, profile_mb: u32, seed: Option<u64>) -> Result<String> {
    let s = Scenario::load(path)?;
    let profile = ResourceProfile::new(profile_mb)?;
    let budget = ResourceBudget::new(slots, profile, s.spec.graph())?;
    let cache = SingleTaskCache::new();
    let r = optimize(&s.spec, budget, &s.ce_params, &cache, false, seed.unwrap_or(s.seed))?;
    let mut text = String::from("operator      parallelism\n");
    for (op, p) in r.configuration.iter() {
        text.push_str(&format!("{:<12}  {:>11}\n", op.as_str(), p));
    }
    text.push_str(&format!(
        "predicted_rate   {:.6e}\nmst              {:.6e}\nce_runs          {}\nsimulated_s      {}\n",
        r.predicted_rate, r.mst.mst, r.ce_runs, r.simulated_s
    ));
    Ok(text)
}

/// Explores, plans and writes the model, measurement CSV and plan table
/// into `out_dir`. Returns the plan table.
pub fn cmd_plan(
    path: &Path,
    rate: Option<f64>,
    profiles: &[u32],
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<String> {
    let s = Scenario::load(path)?;
    let explicit_profiles = !profiles.is_empty();
    let rate = rate
        .or(s.plan.as_ref().map(|p| p.requested_rate))
        .ok_or_else(|| Error::InvalidParameter("--rate is required when the scenario has no [plan] section".into()))?;
    let profile_list: Vec<u32> = if !profiles.is_empty() {
        profiles.to_vec()
    } else {
        match &s.plan {
            Some(p) if !p.profiles.is_empty() => p.profiles.clone(),
            _ => s.search_space.memory_mb.clone(),
        }
    };
    let profiles = profile_list
        .iter()
        .map(|&m| ResourceProfile::new(m))
        .collect::<Result<Vec<_>>>()?;
    let slots_cap = s
        .plan
        .as_ref()
        .map_or(crate::model::DEFAULT_SLOTS_CAP, |p| p.slots_cap);

    let report = explore(
        &s.spec,
        &s.search_space,
        &s.explorer_params,
        &s.ce_params,
        seed.unwrap_or(s.seed),
    )?;
    // Default profiles without an observation are skipped, explicit ones are errors.
    let (profiles, skipped): (Vec<_>, Vec<_>) = profiles
        .into_iter()
        .partition(|p| explicit_profiles || report.points.iter().any(|x| x.memory_mb == p.memory_mb()));
    let plan = plan(&report, rate, &profiles, slots_cap)?;
    let mut table = plan_table(&plan);
    for p in skipped {
        table.push_str(&format!(
            "{:>10}  skipped: no measurement with this profile\n",
            p.memory_mb()
        ));
    }

    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    write_file(&out_dir.join(MODEL_FILE), &model_to_toml(&report.model))?;
    write_file(&out_dir.join(CSV_FILE), &measurements_csv(&report))?;
    write_file(&out_dir.join(PLAN_FILE), &table)?;
    Ok(format!(
        "{table}measurements {} (co {}, ce {}), simulated {:.0} s, stop {:?}\n",
        report.points.len(),
        report.co_calls,
        report.ce_calls,
        report.simulated_s,
        report.stop_reason
    ))
}

pub fn cmd_predict(path: &Path, profile_mb: u32, slots: u32) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let model = model_from_toml(&text)?;
    let rate = model.predict(f64::from(profile_mb), f64::from(slots));
    Ok(format!("{rate:.6e}\n"))
}

fn describe(c: &Configuration) -> String {
    c.iter()
        .map(|(op, p)| format!("{op}={p}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}
