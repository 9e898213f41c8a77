use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use constbandit::math::{self, ScheduleKind};
use constbandit::policy::PolicyConfig;
use constbandit::sim::{
    self, check_lemma_assertions, EpisodeOptions, EpisodeTrace, LemmaReport, LemmaTally, SuiteSpec,
};

use crate::config::{ExperimentConfig, InstanceSpec, OutputFormat, PolicySpec};
use crate::output;
use crate::presets;
use crate::{CliError, SEED_ENV};

pub const CSV_FILE: &str = "results.csv";
pub const JSON_FILE: &str = "report.json";
pub const AUDIT_FILE: &str = "memaudit.csv";
pub const DEFAULT_AUDIT_GRID: [usize; 5] = [2, 10, 100, 1_000, 100_000];

#[derive(Debug, Parser)]
#[command(
    name = "constbandit",
    version,
    about = "Constant-space bandit experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a suite and write CSV/JSON reports.
    Run(SuiteArgs),
    /// Check the clean-event assertions and the schedule bounds.
    Verify(VerifyArgs),
    /// Audit policy memory across arm counts.
    Memaudit(MemauditArgs),
    /// Print the regret and round bounds for an instance.
    Bounds(BoundsArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SuiteArgs {
    /// TOML experiment file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in suite (theorem3_scaling, lemma_suite, competitive_ratio, ...).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// `algorithm[:key=value,...]`; repeat for several. Replaces the file's policies.
    #[arg(long = "policy")]
    pub policies: Vec<PolicySpec>,
    /// `preset[:key=value,...]`; repeat for several. Replaces the file's instances.
    #[arg(long = "instance")]
    pub instances: Vec<InstanceSpec>,
    /// Horizons, comma separated; `1e5` style is accepted.
    #[arg(long = "T", value_delimiter = ',', value_parser = parse_count)]
    pub horizons: Vec<u64>,
    /// Seeds per cell.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    /// JSON trace fixture (one object or an array) to check instead of running a suite.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MemauditArgs {
    /// Arm counts, comma separated.
    #[arg(long = "K", value_delimiter = ',', value_parser = parse_count_usize)]
    pub k_grid: Vec<usize>,
    /// Policies to audit; all variants by default.
    #[arg(long = "policy")]
    pub policies: Vec<PolicySpec>,
    /// Directory for memaudit.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub instance: InstanceSpec,
    #[arg(long = "T", value_parser = parse_count)]
    pub horizon: u64,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Geometric)]
    pub schedule: ScheduleArg,
    /// Poly-log exponent.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ScheduleArg {
    Geometric,
    Polylog,
    AdaptiveRatio,
}

/// Recorded trace plus what produced it, for `verify --trace`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFixture {
    pub policy: PolicySpec,
    pub instance: InstanceSpec,
    pub trace: EpisodeTrace,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FixtureFile {
    One(Box<TraceFixture>),
    Many(Vec<TraceFixture>),
}

/// Integer count, also written as `1e5` or `1_000`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let s = s.trim().replace('_', "");
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

fn parse_count_usize(s: &str) -> Result<usize, String> {
    parse_count(s).and_then(|n| usize::try_from(n).map_err(|e| e.to_string()))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    execute(cli, out)
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(&args, out),
        Command::Verify(args) => cmd_verify(&args, out),
        Command::Memaudit(args) => cmd_memaudit(&args, out),
        Command::Bounds(args) => cmd_bounds(&args, out),
    }
}

impl SuiteArgs {
    fn has_suite_input(&self) -> bool {
        self.config.is_some()
            || self.preset.is_some()
            || !self.policies.is_empty()
            || !self.instances.is_empty()
    }

    /// Preset or file, then flags, then the seed environment variable.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                ExperimentConfig::from_toml(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            (None, Some(name)) => presets::preset(name)?,
            (None, None) => ExperimentConfig::default(),
        };
        if !self.policies.is_empty() {
            cfg.policies = self.policies.clone();
        }
        if !self.instances.is_empty() {
            cfg.instances = self.instances.clone();
        }
        if !self.horizons.is_empty() {
            cfg.horizon.values = self.horizons.clone();
        }
        if let Some(n) = self.seeds {
            cfg.seeds.count = n;
        }
        if let Some(dir) = &self.out {
            cfg.output.dir = dir.clone();
        }
        if let Some(format) = self.format {
            cfg.output.format = format;
        }
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seeds.base = v.trim().parse().map_err(|_| {
                CliError::Config(format!("{SEED_ENV}: `{v}` is not an unsigned integer"))
            })?;
        }
        Ok(cfg)
    }

    fn suite_spec(&self, cfg: &ExperimentConfig) -> Result<SuiteSpec, CliError> {
        let need = |empty: bool, what: &str| {
            if empty {
                Err(CliError::Config(format!(
                    "{what}: at least one entry is required"
                )))
            } else {
                Ok(())
            }
        };
        need(cfg.policies.is_empty(), "policy")?;
        need(cfg.instances.is_empty(), "instance")?;
        need(cfg.horizon.values.is_empty(), "horizon.values")?;
        if let Some(t) = cfg.horizon.values.iter().find(|&&t| t == 0) {
            return Err(CliError::Config(format!(
                "horizon.values: horizon {t} must be positive"
            )));
        }
        if cfg.seeds.count == 0 {
            return Err(CliError::Config("seeds.count: must be positive".into()));
        }
        Ok(SuiteSpec {
            policies: cfg.policy_configs()?,
            instances: cfg.instance_entries()?,
            horizons: cfg.horizon.values.clone(),
            seed_count: cfg.seeds.count,
            base_seed: cfg.seeds.base,
            jobs: self.jobs,
            options: EpisodeOptions::default(),
        })
    }
}

pub fn cmd_run(args: &SuiteArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let spec = args.suite_spec(&cfg)?;
    let outcome = sim::run_suite(&spec)?;

    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    if cfg.output.format.csv() {
        let path = dir.join(CSV_FILE);
        fs::write(&path, output::regret_csv(&outcome.reports)?).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    if cfg.output.format.json() {
        let path = dir.join(JSON_FILE);
        fs::write(&path, output::suite_json(&outcome)?).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }

    emit(out, &output::summary_table(&outcome.reports))?;
    for f in &outcome.failures {
        eprintln!(
            "cell failed: {} {} on {} at T={} (seed {}): {}",
            f.policy, f.schedule, f.instance, f.horizon, f.seed, f.error
        );
    }
    for path in written {
        emit(out, &format!("wrote {}\n", path.display()))?;
    }
    Ok(())
}

fn tally_lines(label: &str, tally: &LemmaTally) -> String {
    let mut s = format!(
        "{label}: clean event in {}/{} runs\n",
        tally.clean_runs, tally.runs
    );
    for (i, name) in LemmaReport::NAMES.iter().enumerate() {
        s.push_str(&format!(
            "  {name:<14} pass {:>4}  fail {:>4}  vacuous {:>4}\n",
            tally.pass[i], tally.fail[i], tally.vacuous[i]
        ));
    }
    s
}

fn first_failure(tally: &LemmaTally, label: &str) -> Option<String> {
    LemmaReport::NAMES
        .iter()
        .zip(&tally.first_failure)
        .find_map(|(name, f)| match f {
            Some(sim::LemmaOutcome::Fail {
                level,
                round,
                detail,
            }) => Some(format!(
                "{label}: {name} failed at level {level}, round {round}: {detail}"
            )),
            _ => None,
        })
}

fn load_fixtures(path: &Path) -> Result<Vec<TraceFixture>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: FixtureFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(match file {
        FixtureFile::One(f) => vec![*f],
        FixtureFile::Many(v) => v,
    })
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut failures = Vec::new();

    if let Some(path) = &args.trace {
        for (i, fixture) in load_fixtures(path)?.iter().enumerate() {
            let field = format!("trace[{i}]");
            let config = fixture.policy.to_config(&format!("{field}.policy"))?;
            let instance = fixture.instance.build(&format!("{field}.instance"))?;
            let report = check_lemma_assertions(&fixture.trace, &instance, &config)?;
            let mut tally = LemmaTally::default();
            tally.add(&report);
            emit(out, &tally_lines(&field, &tally))?;
            failures.extend(first_failure(&tally, &field));
        }
    } else if args.suite.has_suite_input() {
        let cfg = args.suite.resolve()?;
        let spec = args.suite.suite_spec(&cfg)?;
        for cell in sim::run_verification(&spec)? {
            let label = format!(
                "{} {} on {} at T={}",
                cell.policy, cell.schedule, cell.instance, cell.horizon
            );
            emit(out, &tally_lines(&label, &cell.tally))?;
            emit(
                out,
                &format!(
                    "  committed to an optimal arm in {}/{} runs\n",
                    cell.best_commits, cell.tally.runs
                ),
            )?;
            failures.extend(first_failure(&cell.tally, &label));
        }
    }

    let checks =
        sim::check_schedule_grid(&sim::GRID_STARTS, &sim::grid_targets(), &sim::GRID_EPSILONS)?;
    let passed = checks.iter().filter(|c| c.pass).count();
    emit(
        out,
        &format!("schedule_grid: {passed}/{} cells pass\n", checks.len()),
    )?;
    if let Some(c) = checks.iter().find(|c| !c.pass) {
        failures.push(format!(
            "schedule_grid: {} from {} to {} took {} rounds, bound {}",
            c.kind.label(),
            c.start,
            c.target,
            c.rounds,
            c.bound
        ));
    }

    if failures.is_empty() {
        emit(out, "all assertions pass\n")?;
        Ok(())
    } else {
        Err(CliError::Assertion(failures.join("\n")))
    }
}

fn default_audit_policies() -> Vec<PolicyConfig> {
    vec![
        PolicyConfig::const_space(ScheduleKind::Geometric),
        PolicyConfig::const_space(ScheduleKind::PolyLog { epsilon: 0.5 }),
        PolicyConfig::const_space(ScheduleKind::AdaptiveRatio),
        PolicyConfig::Doubling {
            schedule: ScheduleKind::Geometric,
        },
        PolicyConfig::Ucb1,
    ]
}

pub fn cmd_memaudit(args: &MemauditArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let grid = if args.k_grid.is_empty() {
        DEFAULT_AUDIT_GRID.to_vec()
    } else {
        args.k_grid.clone()
    };
    let policies = if args.policies.is_empty() {
        default_audit_policies()
    } else {
        args.policies
            .iter()
            .enumerate()
            .map(|(i, p)| p.to_config(&format!("policy[{i}]")))
            .collect::<Result<_, _>>()?
    };
    let audits = policies
        .iter()
        .map(|p| sim::memory_audit(p, &grid))
        .collect::<Result<Vec<_>, _>>()?;
    emit(out, &output::audit_table(&audits))?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let path = dir.join(AUDIT_FILE);
        fs::write(&path, output::audit_csv(&audits)?).map_err(|e| io_err(&path, e))?;
        emit(out, &format!("wrote {}\n", path.display()))?;
    }
    let varying: Vec<String> = policies
        .iter()
        .zip(&audits)
        .filter(|(p, a)| p.schedule().is_some() && !a.constant)
        .map(|(_, a)| format!("{} {}", a.policy, a.schedule))
        .collect();
    if varying.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(format!(
            "state words vary with K for: {}",
            varying.join(", ")
        )))
    }
}

pub fn cmd_bounds(args: &BoundsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let instance = args.instance.build("--instance")?;
    let kind = match args.schedule {
        ScheduleArg::Geometric => ScheduleKind::Geometric,
        ScheduleArg::Polylog => ScheduleKind::polylog(args.epsilon)
            .map_err(|e| CliError::Config(format!("--epsilon: {e}")))?,
        ScheduleArg::AdaptiveRatio => ScheduleKind::AdaptiveRatio,
    };
    let delta_min = instance.gaps().delta_min().ok_or_else(|| {
        CliError::Config(format!(
            "--instance: {}",
            constbandit::Error::DegenerateGaps
        ))
    })?;
    let regret = math::regret_bound(instance.gaps(), args.horizon, kind)?;
    let rmax = math::rmax_bound(delta_min, kind)?;
    emit(
        out,
        &format!(
            "instance      {}\nK             {}\nT             {}\nschedule      {}\nmin_gap       {}\nregret_bound  {}\nrmax_bound    {}\n",
            args.instance.label(),
            instance.k(),
            args.horizon,
            kind.label(),
            output::fmt_float(delta_min),
            output::fmt_float(regret),
            rmax
        ),
    )
}
