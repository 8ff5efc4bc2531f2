use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hrson_core::engine::{sweep, PreparedScenario};
use hrson_core::metrics::{aggregate_csv_bytes, runs_csv_bytes, write_file, write_reports, MetricsReport};
use hrson_core::routing::RouterKind;
use hrson_core::scenario::{load_scenario, parse_assignment, Overrides, ScenarioConfig, SweepParam, PRESET_NAMES};

/// Opportunistic-network simulator for office workers' phones.
#[derive(Parser, Debug)]
#[command(name = "hrson", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One simulation run.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for runs.csv and aggregate.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independent runs over several seeds.
    Batch {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Number of runs; seeds are base-seed, base-seed+1, ...
        /// Without it the scenario's own seed list is used.
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Batches over one parameter for each router.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// traffic, ttl, copies or homes. Defaults to the scenario's sweep.
        #[arg(long)]
        param: Option<SweepParam>,
        /// Comma-separated values, e.g. `4,8,12` or `75-100,50-75`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Comma-separated routers to compare.
        #[arg(long, value_delimiter = ',')]
        routers: Vec<RouterKind>,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Checks a scenario and prints a summary without running it.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Print the fully resolved scenario as TOML.
        #[arg(long)]
        dump: bool,
    },
    /// Lists the built-in scenarios.
    Presets,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario TOML file or preset name.
    #[arg(long, default_value = "desk2")]
    scenario: String,
    /// Rescale every node group to this total.
    #[arg(long)]
    nodes: Option<usize>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Initial copy tokens per message.
    #[arg(long)]
    copies: Option<u32>,
    /// Message lifetime in hours.
    #[arg(long)]
    ttl: Option<f64>,
    #[arg(long)]
    router: Option<RouterKind>,
    /// Any scenario key, e.g. `--set traffic.interval=[10.0,20.0]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let keys = self
            .set
            .iter()
            .map(|s| parse_assignment(s))
            .collect::<Result<Vec<_>, _>>()?;
        let overrides = Overrides {
            copies: self.copies,
            ttl_hours: self.ttl,
            router: self.router,
            nodes: self.nodes,
            duration: self.duration,
            keys,
        };
        load_scenario(&self.scenario, &overrides)
            .with_context(|| format!("loading scenario `{}`", self.scenario))
    }
}

fn seeds(cfg: &ScenarioConfig, runs: Option<u64>, base: u64) -> Result<Vec<u64>> {
    match runs {
        Some(0) => bail!("--runs must be at least 1"),
        Some(n) => Ok((base..base + n).collect()),
        None => Ok(cfg.engine.seeds.clone()),
    }
}

fn print_report(r: &MetricsReport) {
    let f = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "seed {:>4} {:<8} generated {:>6} delivered {:>6} rate {} latency {} overhead {} residency {}",
        r.seed,
        r.router,
        r.generated,
        r.delivered,
        f(r.delivery_rate),
        f(r.avg_latency),
        f(r.overhead_ratio),
        f(r.avg_buffer_time)
    );
}

fn emit(out: Option<&Path>, reports: &[MetricsReport], router: RouterKind) -> Result<()> {
    for r in reports {
        print_report(r);
    }
    let labels = [("router", router.name().to_string())];
    match out {
        Some(dir) => {
            write_reports(dir, reports, &labels)?;
            eprintln!("wrote {}", dir.display());
        }
        None => {
            let agg = hrson_core::metrics::Aggregate::from_reports(reports);
            let bytes = aggregate_csv_bytes(&["router"], &[(vec![router.name().to_string()], agg)]);
            print!("{}", String::from_utf8_lossy(&bytes));
        }
    }
    Ok(())
}

fn run_sweep(
    cfg: &ScenarioConfig,
    param: Option<SweepParam>,
    values: Vec<String>,
    routers: Vec<RouterKind>,
    seeds: &[u64],
    out: Option<&Path>,
) -> Result<()> {
    let configured = cfg.sweep.as_ref();
    let param = param
        .or(configured.map(|s| s.param))
        .context("no sweep parameter: pass --param or add a [sweep] table")?;
    let values = if values.is_empty() {
        configured
            .filter(|s| s.param == param)
            .map(|s| s.values.clone())
            .context("no sweep values: pass --values")?
    } else {
        values
    };
    let routers = if routers.is_empty() {
        configured.map_or(RouterKind::ALL.to_vec(), |s| s.routers.clone())
    } else {
        routers
    };
    let rows = sweep(cfg, param, &values, &routers, seeds)?;

    let mut agg_rows = Vec::new();
    for row in &rows {
        let mean = |m: &str| {
            row.batch
                .aggregate
                .mean(m)
                .map_or("n/a".to_string(), |x| format!("{x:.4}"))
        };
        println!(
            "{}={:<8} {:<8} rate {} latency {} overhead {} residency {}",
            param.name(),
            row.value,
            row.router.name(),
            mean("delivery_rate"),
            mean("avg_latency"),
            mean("overhead_ratio"),
            mean("avg_buffer_time")
        );
        agg_rows.push((
            vec![row.value.clone(), row.router.name().to_string()],
            row.batch.aggregate.clone(),
        ));
    }
    let aggregate = aggregate_csv_bytes(&[param.name(), "router"], &agg_rows);
    match out {
        Some(dir) => {
            let runs_dir = dir.join("runs");
            std::fs::create_dir_all(&runs_dir)
                .with_context(|| format!("creating {}", runs_dir.display()))?;
            write_file(&dir.join("aggregate.csv"), &aggregate)?;
            for row in &rows {
                let name = format!("{}_{}_{}.csv", param.name(), row.value, row.router.name());
                write_file(&runs_dir.join(name), &runs_csv_bytes(&row.batch.reports))?;
            }
            eprintln!("wrote {}", dir.display());
        }
        None => print!("{}", String::from_utf8_lossy(&aggregate)),
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, seed, out } => {
            let cfg = scenario.load()?;
            let router = cfg.routing.router;
            let report = PreparedScenario::new(cfg)?.run(seed)?;
            emit(out.as_deref(), &[report], router)
        }
        Command::Batch {
            scenario,
            runs,
            base_seed,
            out,
        } => {
            let cfg = scenario.load()?;
            let seeds = seeds(&cfg, runs, base_seed)?;
            let router = cfg.routing.router;
            let parallel = cfg.engine.parallel;
            let batch = PreparedScenario::new(cfg)?.run_batch(&seeds, parallel)?;
            emit(out.as_deref(), &batch.reports, router)
        }
        Command::Sweep {
            scenario,
            param,
            values,
            routers,
            runs,
            base_seed,
            out,
        } => {
            let cfg = scenario.load()?;
            let seeds = seeds(&cfg, runs, base_seed)?;
            run_sweep(&cfg, param, values, routers, &seeds, out.as_deref())
        }
        Command::Validate { scenario, dump } => {
            let cfg = scenario.load()?;
            if dump {
                print!("{}", cfg.to_toml()?);
            } else {
                println!(
                    "ok: {} nodes, {:.0} s, router {}, {} seeds{}",
                    cfg.node_count(),
                    cfg.engine.duration,
                    cfg.routing.router,
                    cfg.engine.seeds.len(),
                    cfg.sweep
                        .as_ref()
                        .map_or(String::new(), |s| format!(", sweep {} over {}", s.param.name(), s.values.join(",")))
                );
            }
            Ok(())
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(())
        }
    }
}
