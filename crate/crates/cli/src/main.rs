use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wct_core::certificate::{self, search_params, CertificateRow, SearchGrid, TableReport};
use wct_core::experiment::{run_experiment, solve, ExperimentConfig, ExperimentReport, InstanceSource, SolveReport};
use wct_core::generate::{gen_instance, GeneratorSpec};
use wct_core::Instance;

#[derive(Parser)]
#[command(name = "wct", version, about = "Weighted completion time on unrelated machines")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "WCT_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, short)]
    machines: usize,
    #[arg(long, short)]
    jobs: usize,
    /// Probability that a machine can process a job.
    #[arg(long, default_value_t = 1.0)]
    density: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance.
    Gen {
        #[command(flatten)]
        spec: GenArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Round one LP solution and report the assignment.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Repeat the rounding and run the statistical checks.
    Experiment {
        /// Instance file; without it an instance is generated from the seed.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        machines: usize,
        #[arg(long, default_value_t = 8)]
        jobs: usize,
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Trials for the fixed-shift checks (0 skips them).
        #[arg(long)]
        fixed_beta_trials: Option<usize>,
        #[arg(long, default_value_t = 2.0)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Check a parameter table (the bundled one by default).
    /// Exit code 0 on pass, 1 on fail, 2 on unreadable input.
    VerifyCert {
        path: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Search multipliers for one interval around a bundled row.
    SearchParams {
        #[arg(long)]
        interval: u32,
        /// Grid points on each side of the starting values.
        #[arg(long, default_value_t = 3)]
        half: usize,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 2)]
        refine_rounds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

#[derive(Serialize)]
struct SolveRow<'a> {
    seed: u64,
    rho: f64,
    beta: f64,
    cost: f64,
    lp_bound: f64,
    ratio: f64,
    assignment: &'a str,
}

fn solve_csv(rep: &SolveReport) -> Result<String> {
    let assignment: Vec<String> = rep.machine_of.iter().map(|m| m.to_string()).collect();
    to_csv(&[SolveRow {
        seed: rep.seed,
        rho: rep.rho,
        beta: rep.beta,
        cost: rep.cost,
        lp_bound: rep.lp_bound,
        ratio: rep.ratio,
        assignment: &assignment.join(";"),
    }])
}

#[derive(Serialize)]
struct MachineRow {
    machine: String,
    lp_cost: f64,
    eq6_value: f64,
    eq7_bound_mean: f64,
    empirical_mean: f64,
    half_width: f64,
    trials: usize,
}

fn experiment_csv(rep: &ExperimentReport) -> Result<String> {
    let mc = &rep.monte_carlo;
    let mut rows: Vec<MachineRow> = mc
        .machines
        .iter()
        .map(|m| MachineRow {
            machine: m.machine.to_string(),
            lp_cost: m.lp_cost,
            eq6_value: m.eq6_value,
            eq7_bound_mean: m.eq7_bound_mean,
            empirical_mean: m.empirical_wc_mean,
            half_width: m.half_width,
            trials: m.trials,
        })
        .collect();
    rows.push(MachineRow {
        machine: "all".into(),
        lp_cost: mc.lp_objective,
        eq6_value: mc.machines.iter().map(|m| m.eq6_value).sum(),
        eq7_bound_mean: mc.machines.iter().map(|m| m.eq7_bound_mean).sum(),
        empirical_mean: mc.mean_cost,
        half_width: mc.cost_half_width,
        trials: mc.trials,
    });
    to_csv(&rows)
}

#[derive(Serialize)]
struct IntervalRow {
    o: u32,
    alpha: f64,
    sub1_threshold: f64,
    worst13: f64,
    worst14: f64,
    passed: bool,
}

fn table_csv(rep: &TableReport) -> Result<String> {
    let rows: Vec<IntervalRow> = rep
        .intervals
        .iter()
        .map(|r| IntervalRow {
            o: r.o,
            alpha: r.alpha,
            sub1_threshold: r.sub1_threshold,
            worst13: r.worst13,
            worst14: r.worst14,
            passed: r.passed,
        })
        .collect();
    to_csv(&rows)
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    source: String,
    content_hash: String,
    #[serde(flatten)]
    report: &'a TableReport,
}

fn verify_cert(path: Option<PathBuf>, out: Option<PathBuf>, format: Format) -> ExitCode {
    let (source, text) = match &path {
        Some(p) => match fs::read_to_string(p) {
            Ok(t) => (p.display().to_string(), t),
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", p.display());
                return ExitCode::from(2);
            }
        },
        None => ("bundled".to_string(), certificate::TABLE1_JSON.to_string()),
    };
    let report = match certificate::parse_certificate(&text).and_then(|rows| certificate::check_table(&rows)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for v in report.violations() {
        eprintln!("violation: {v}");
    }
    let verdict = if report.passed { "PASS" } else { "FAIL" };
    eprintln!("{verdict} mean alpha {:.7}", report.mean_alpha);
    let body = match format {
        Format::Json => json(&VerifyOutput {
            source,
            content_hash: certificate::content_hash(&text),
            report: &report,
        }),
        Format::Csv => table_csv(&report),
    };
    if let Err(e) = body.and_then(|b| emit(&out, &b)) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn read_instance(path: &PathBuf) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Instance::from_json(&text)?)
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Gen { spec, seed, out } => {
            let spec = GeneratorSpec::new(spec.machines, spec.jobs).with_density(spec.density);
            emit(&out, &(gen_instance(&spec, seed)?.to_json() + "\n"))?;
        }
        Command::Solve {
            instance,
            seed,
            rho,
            out,
            format,
        } => {
            let rep = solve(&read_instance(&instance)?, seed, rho)?;
            let body = match format {
                Format::Json => json(&rep)?,
                Format::Csv => solve_csv(&rep)?,
            };
            emit(&out, &body)?;
        }
        Command::Experiment {
            instance,
            machines,
            jobs,
            density,
            seed,
            trials,
            fixed_beta_trials,
            rho,
            out,
            format,
        } => {
            let source = match instance {
                Some(p) => InstanceSource::File(p.display().to_string()),
                None => InstanceSource::Generated(GeneratorSpec::new(machines, jobs).with_density(density)),
            };
            let mut cfg = ExperimentConfig::new(source, seed, trials);
            cfg.rho = rho;
            if let Some(n) = fixed_beta_trials {
                cfg.fixed_beta_trials = n;
            }
            let rep = run_experiment(&cfg)?;
            for c in &rep.checks {
                eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let body = match format {
                Format::Json => json(&rep)?,
                Format::Csv => experiment_csv(&rep)?,
            };
            emit(&out, &body)?;
            if !rep.passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::VerifyCert { path, out, format } => return Ok(verify_cert(path, out, format)),
        Command::SearchParams {
            interval,
            half,
            step,
            refine_rounds,
            out,
        } => {
            let start: CertificateRow = certificate::table1()
                .into_iter()
                .find(|r| r.o == interval)
                .with_context(|| format!("interval {interval} out of 1..=10"))?;
            let mut grid = SearchGrid::around(&start, half, step);
            grid.refine_rounds = refine_rounds;
            let row = search_params(interval, &grid)?;
            eprintln!("interval {interval}: alpha {:.6} (table {:.6})", row.alpha, start.alpha);
            emit(&out, &json(&row)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
