use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edge_aoi::analysis;
use edge_aoi::metrics::{uniform_grid, DistributionCurve};
use edge_aoi::simulator::{self, SimulationConfig, SimulationReport};
use edge_aoi::{Policy, Scenario};
use edge_aoi_cli::check::validate;
use edge_aoi_cli::manifest::{manifest_path, RunManifest};
use edge_aoi_cli::output::Table;
use edge_aoi_cli::study::{self, Metric, Parameter};
use edge_aoi_cli::{CliResult, Failure};

/// Periods of the full-length simulation protocol.
const FULL_PERIODS: u64 = 10_000_000;
const DEFAULT_PERIODS: u64 = 1_000_000;

#[derive(Parser)]
#[command(name = "edge-aoi", version, about = "Latency, AoI and PAoI of periodic clients on a preemptive edge server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML or JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the random number generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Length {
    /// Simulated periods.
    #[arg(long, default_value_t = DEFAULT_PERIODS, conflicts_with = "full")]
    periods: u64,
    /// Use the full 10^7-period protocol.
    #[arg(long)]
    full: bool,
    /// Warmup periods excluded from statistics [default: min(1000, periods/10)].
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long, default_value_t = 1)]
    replications: u32,
}

impl Length {
    fn config(&self, scenario: Scenario, policy: Policy, seed: u64) -> SimulationConfig {
        let periods = if self.full { FULL_PERIODS } else { self.periods };
        let mut config = SimulationConfig::new(scenario, policy, periods, seed);
        if let Some(w) = self.warmup {
            config.warmup_periods = w;
        }
        config.replications = self.replications;
        config
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Gps,
    Fifo,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Gps => Policy::Gps,
            PolicyArg::Fifo => Policy::Fifo,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyzeMetric {
    LatencyCdf,
    PaoiCdf,
    Aoi,
    Success,
}

#[derive(Subcommand)]
enum Command {
    /// Exact metrics of one policy.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "gps")]
        policy: PolicyArg,
        #[arg(long, value_enum)]
        metric: AnalyzeMetric,
        /// Batch number (1-based); all clients when absent.
        #[arg(long)]
        batch: Option<usize>,
        /// Grid points per period for CDFs.
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
    /// Monte Carlo simulation; `--out` names a directory.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "gps")]
        policy: PolicyArg,
        #[command(flatten)]
        length: Length,
    },
    /// Checks the analysis against a simulation; exit code 2 on failure.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "gps")]
        policy: PolicyArg,
        #[command(flatten)]
        length: Length,
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
    },
    /// Metrics over a range of one parameter, in long format.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Policies, comma separated.
        #[arg(long = "policy", value_enum, value_delimiter = ',', default_value = "gps,fifo")]
        policies: Vec<PolicyArg>,
        /// tau, mu or N.
        #[arg(long)]
        parameter: Parameter,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        /// Comma separated: aoi, success, latency, paoi-p<percentile>.
        #[arg(long, value_delimiter = ',', default_value = "aoi")]
        metrics: Vec<Metric>,
    },
    /// Fairness when client 1 drifts towards its neighbour.
    Drift {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1)]
        xi_from: f64,
        #[arg(long, default_value_t = 1.0)]
        xi_to: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 95.0)]
        percentile: f64,
        /// Period search range as multiples of the scenario period.
        #[arg(long, default_value_t = 0.25)]
        tau_min: f64,
        #[arg(long, default_value_t = 4.0)]
        tau_max: f64,
        /// Geometric grid points of the period search.
        #[arg(long, default_value_t = 61)]
        tau_steps: usize,
    },
}

fn load(path: &Path) -> CliResult<Scenario> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("{}: no such scenario file", path.display())));
    }
    Ok(Scenario::from_file(path)?)
}

fn batch_index(scenario: &Scenario, batch: Option<usize>) -> CliResult<Option<usize>> {
    match batch {
        Some(k) if k == 0 || k > scenario.batch_count() => {
            Err(Failure::Usage(format!("batch must lie in 1..={}, got {k}", scenario.batch_count())))
        }
        other => Ok(other.map(|k| k - 1)),
    }
}

/// Writes `table` to `out`, or prints it.
fn emit(table: &Table, out: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    match out {
        Some(path) => {
            table.write(path)?;
            Ok(vec![path.to_path_buf()])
        }
        None => {
            print!("{}", String::from_utf8(table.to_csv()?).expect("csv is utf-8"));
            Ok(Vec::new())
        }
    }
}

fn scalar_table(batches: usize, mut value: impl FnMut(Option<usize>) -> CliResult<f64>, only: Option<usize>) -> CliResult<Table> {
    let mut t = Table::new(&["batch", "value"]);
    let selection: Vec<Option<usize>> = match only {
        Some(b) => vec![Some(b)],
        None => (0..batches).map(Some).chain([None]).collect(),
    };
    for b in selection {
        let label = b.map_or("all".to_string(), |b| (b + 1).to_string());
        t.push(vec![label, value(b)?.to_string()]);
    }
    Ok(t)
}

fn simulate_all(config: &SimulationConfig) -> CliResult<SimulationReport> {
    config.validate()?;
    let reps: Vec<u32> = (0..config.replications).collect();
    let reports = study::parallel_map(&reps, |&r| simulator::run_replication(config, r));
    let mut merged: Option<SimulationReport> = None;
    for report in reports {
        let report = report?;
        merged = Some(match merged {
            Some(m) => m.merge(&report),
            None => report,
        });
    }
    Ok(merged.expect("at least one replication"))
}

fn empirical_curve(grid: &[f64], samples: &simulator::SampleSet) -> CliResult<DistributionCurve> {
    Ok(DistributionCurve::from_fn(grid, |x| Ok(samples.cdf_at(x)))?)
}

/// Runs a command, returning output paths and seeds for the manifest.
fn execute(command: &Command) -> CliResult<(Vec<PathBuf>, Vec<u64>)> {
    match command {
        Command::Analyze { common, policy, metric, batch, points } => {
            let scenario = load(&common.scenario)?;
            let batch = batch_index(&scenario, *batch)?;
            let a = analysis::analyze(&scenario, (*policy).into())?;
            let table = match metric {
                AnalyzeMetric::LatencyCdf => Table::curve(&a.latency_curve(batch, points.max(&1) + 1)?),
                AnalyzeMetric::PaoiCdf => Table::curve(&a.paoi_curve(batch, *points)?),
                AnalyzeMetric::Aoi => scalar_table(scenario.batch_count(), |b| study::metric_value(&a, Metric::Aoi, b), batch)?,
                AnalyzeMetric::Success => scalar_table(scenario.batch_count(), |b| study::metric_value(&a, Metric::Success, b), batch)?,
            };
            Ok((emit(&table, common.out.as_deref())?, Vec::new()))
        }
        Command::Simulate { common, policy, length } => {
            let scenario = load(&common.scenario)?;
            let policy: Policy = (*policy).into();
            let tau = scenario.period();
            let batches = scenario.batch_count();
            let report = simulate_all(&length.config(scenario, policy, common.seed))?;
            let latency = report.pooled_latency(None).expect("clients exist");
            let paoi = report.pooled_paoi(None).expect("clients exist");
            if latency.is_empty() {
                return Err(Failure::Validation("no frame was delivered".into()));
            }
            let latency_curve = empirical_curve(&uniform_grid(0.0, tau, 1001), &latency)?;
            let paoi_periods = paoi.percentile(99.99)?.div_euclid(tau) as usize + 2;
            let paoi_curve = empirical_curve(&uniform_grid(0.0, paoi_periods as f64 * tau, paoi_periods * 1000 + 1), &paoi)?;
            let mut clients = Table::new(&["client", "batch", "frames", "success_rate", "success_rate_se", "aoi", "aoi_se"]);
            for c in &report.clients {
                clients.push(vec![
                    (c.client + 1).to_string(),
                    (c.batch + 1).to_string(),
                    c.frames().to_string(),
                    c.success_rate().to_string(),
                    c.success_rate_se().to_string(),
                    c.expected_aoi().to_string(),
                    c.aoi_se().to_string(),
                ]);
            }
            let success = scalar_table(batches, |b| Ok(report.success_rate(b)), None)?;
            let aoi = scalar_table(batches, |b| Ok(report.expected_aoi(b)), None)?;
            let tables = [
                ("latency-cdf", Table::curve(&latency_curve)),
                ("paoi-cdf", Table::curve(&paoi_curve)),
                ("clients", clients),
                ("success", success),
                ("aoi", aoi),
            ];
            let mut outputs = Vec::new();
            match &common.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    for (name, table) in &tables {
                        let path = dir.join(format!("{name}_{policy}.csv"));
                        table.write(&path)?;
                        outputs.push(path);
                    }
                }
                None => {
                    emit(&tables[2].1, None)?;
                }
            }
            Ok((outputs, vec![common.seed]))
        }
        Command::Validate { common, policy, length, confidence } => {
            let scenario = load(&common.scenario)?;
            let policy: Policy = (*policy).into();
            let a = analysis::analyze(&scenario, policy)?;
            let report = simulate_all(&length.config(scenario, policy, common.seed))?;
            let v = validate(&a, &report, *confidence)?;
            for c in &v.checks {
                eprintln!(
                    "{} {} batch {}: {:.6} <= {:.6}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.batch + 1,
                    c.statistic,
                    c.threshold
                );
            }
            let outputs = emit(&v.table(), common.out.as_deref())?;
            if !v.passed() {
                let names: Vec<String> = v.failures().map(|c| format!("{} (batch {})", c.name, c.batch + 1)).collect();
                write_manifest(common, &outputs, vec![common.seed])?;
                return Err(Failure::Validation(names.join(", ")));
            }
            Ok((outputs, vec![common.seed]))
        }
        Command::Sweep { common, policies, parameter, from, to, steps, metrics } => {
            let scenario = load(&common.scenario)?;
            let values = study::linspace(*from, *to, *steps)?;
            let policies: Vec<Policy> = policies.iter().map(|&p| p.into()).collect();
            let rows = study::sweep(&scenario, *parameter, &values, metrics, &policies)?;
            let mut t = Table::new(&["parameter", "value", "policy", "metric", "result"]);
            for r in rows {
                t.push(vec![r.parameter.to_string(), r.value.to_string(), r.policy.to_string(), r.metric.to_string(), r.result.to_string()]);
            }
            Ok((emit(&t, common.out.as_deref())?, Vec::new()))
        }
        Command::Drift { common, xi_from, xi_to, steps, percentile, tau_min, tau_max, tau_steps } => {
            let scenario = load(&common.scenario)?;
            let xis = study::linspace(*xi_from, *xi_to, *steps)?;
            let grid = study::geomspace(tau_min * scenario.period(), tau_max * scenario.period(), *tau_steps)?;
            let rows = study::drift(&scenario, &xis, *percentile, &grid)?;
            let mut header = vec!["policy".to_string(), "xi".into(), "period".into()];
            header.extend((1..=scenario.n_clients()).map(|c| format!("client_{c}")));
            header.push("jfi".into());
            let mut t = Table { header, rows: Vec::new() };
            for r in rows {
                let mut row = vec![r.policy.to_string(), r.xi.to_string(), r.period.to_string()];
                row.extend(r.per_client.iter().map(f64::to_string));
                row.push(r.jain.to_string());
                t.push(row);
            }
            Ok((emit(&t, common.out.as_deref())?, Vec::new()))
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Analyze { common, .. }
        | Command::Simulate { common, .. }
        | Command::Validate { common, .. }
        | Command::Sweep { common, .. }
        | Command::Drift { common, .. } => common,
    }
}

thread_local! {
    static STARTED: Instant = Instant::now();
}

fn write_manifest(common: &Common, outputs: &[PathBuf], seeds: Vec<u64>) -> CliResult<()> {
    let Some(out) = &common.out else { return Ok(()) };
    let bytes = std::fs::read(&common.scenario)?;
    let elapsed = STARTED.with(|s| s.elapsed());
    RunManifest::new(std::env::args().collect(), &bytes, seeds, elapsed, outputs.to_vec()).write(&manifest_path(out))
}

fn main() -> ExitCode {
    STARTED.with(|_| ());
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = execute(&cli.command).and_then(|(outputs, seeds)| write_manifest(common(&cli.command), &outputs, seeds));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
