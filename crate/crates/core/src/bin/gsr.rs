use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gsr_core::metrics::{evaluate_with, NumericsConfig, PerformanceReport};
use gsr_core::montecarlo::{estimate_add_k, estimate_arl, ChangePoint, SimulationPlan};
use gsr_core::optimizer::{calibrate_threshold, optimize_design, SearchConfig, DEFAULT_REL_TOL};
use gsr_core::quadrature::DEFAULT_RESOLUTION;
use gsr_core::table::{
    generate_table, write_table, CellValues, TableRow, PUBLISHED_GAMMAS, PUBLISHED_MUS,
};
use gsr_core::{xi, ChartDesign, GsrError, GsrSolver, ModelParams};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ORACLE: u8 = 4;

/// Agreement threshold for simulation z-scores.
const Z_LIMIT: f64 = 3.0;

#[derive(Parser)]
#[command(
    name = "gsr",
    version,
    about = "Headstarted Shiryaev-Roberts chart: evaluation and optimal design"
)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Numerics {
    /// Quadrature nodes on [0, A).
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    /// Relative tolerance on the ARL constraint.
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    rel_tol: f64,
}

impl Numerics {
    fn config(&self) -> NumericsConfig {
        NumericsConfig {
            resolution: self.resolution,
            ..NumericsConfig::default()
        }
    }
}

/// Either an explicit limit or an ARL target to calibrate it from.
#[derive(Args, Clone)]
struct DesignArgs {
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    /// Headstart R_0.
    #[arg(long, default_value_t = 0.0)]
    r: f64,
    /// Control limit A.
    #[arg(long, conflicts_with = "gamma", required_unless_present = "gamma")]
    limit: Option<f64>,
    /// ARL to false alarm used to calibrate A.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Limiting average exponential overshoot.
    Xi {
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Control limit meeting an ARL target at a given headstart.
    Calibrate {
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        #[command(flatten)]
        numerics: Numerics,
    },
    /// ARL, delay profile, SADD, RIADD and the lower bound of one design.
    Evaluate {
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        numerics: Numerics,
        /// `csv` emits the profile k, add_k, survival_k.
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Optimal headstart and limit for one cell.
    Optimize {
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        numerics: Numerics,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Optimal designs over a grid of shifts and ARL levels.
    Table {
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        mu: Vec<f64>,
        #[arg(long, num_args = 1..)]
        gamma: Vec<f64>,
        /// Published grid and the pinned numerics of the regression archive.
        #[arg(long)]
        paper_tables: bool,
        #[command(flatten)]
        numerics: Numerics,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Monte Carlo check of ARL and ADD_k against the integral equations.
    Simulate {
        #[command(flatten)]
        design: DesignArgs,
        /// Change-points k for ADD_k estimates.
        #[arg(long, num_args = 1.., default_values_t = vec![0u64])]
        change_point: Vec<u64>,
        #[arg(long, default_value_t = 100_000)]
        replications: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        numerics: Numerics,
    },
}

enum Failure {
    Error(GsrError),
    PartialTable(usize),
    Oracle(usize),
}

impl From<GsrError> for Failure {
    fn from(e: GsrError) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let mut buf = Vec::new();
    let outcome = run(cli.command, &mut buf);
    if let Err(e) = emit(&buf, cli.out.as_ref()) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                GsrError::Numerical { .. } => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            })
        }
        Err(Failure::PartialTable(n)) => {
            eprintln!("error: {n} cell(s) failed");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(Failure::Oracle(n)) => {
            eprintln!("error: {n} estimate(s) disagree with the integral equations beyond {Z_LIMIT} standard errors");
            ExitCode::from(EXIT_ORACLE)
        }
    }
}

fn emit(buf: &[u8], out: Option<&PathBuf>) -> io::Result<()> {
    if buf.is_empty() {
        return Ok(());
    }
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(buf)?;
            f.flush()
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(buf)?;
            stdout.flush()
        }
    }
}

fn json<T: Serialize>(value: &T, out: &mut Vec<u8>) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, value)
        .map_err(|e| GsrError::Configuration(format!("serializing output: {e}")))?;
    out.push(b'\n');
    Ok(())
}

fn csv_rows(header: &[&str], rows: Vec<Vec<String>>, out: &mut Vec<u8>) -> Result<(), Failure> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| GsrError::Configuration(format!("writing csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| GsrError::Configuration(format!("writing csv: {e}")))?;
    Ok(())
}

#[derive(Serialize)]
struct XiOutput {
    mu: f64,
    xi: f64,
    terms: usize,
    tail: f64,
}

#[derive(Serialize)]
struct CalibrationOutput {
    mu: f64,
    gamma: f64,
    r: f64,
    limit: f64,
    arl: f64,
    seed: f64,
    evaluations: usize,
    resolution: usize,
}

#[derive(Serialize)]
struct Comparison {
    quantity: String,
    estimate: f64,
    std_error: f64,
    effective_replications: u64,
    integral_equation: f64,
    z: f64,
}

#[derive(Serialize)]
struct SimulationOutput {
    mu: f64,
    r: f64,
    limit: f64,
    replications: u64,
    seed: u64,
    resolution: usize,
    estimates: Vec<Comparison>,
}

/// Resolve the design, calibrating the limit when only `gamma` is given.
fn design_and_solver(
    args: &DesignArgs,
    numerics: &Numerics,
) -> Result<(ChartDesign, GsrSolver), Failure> {
    let params = ModelParams::new(args.mu)?;
    let (limit, solver) = match (args.limit, args.gamma) {
        (Some(limit), _) => {
            ChartDesign::new(args.mu, args.r, limit)?;
            (limit, GsrSolver::new(params, limit, numerics.resolution)?)
        }
        (None, Some(gamma)) => {
            let cal = calibrate_threshold(
                &params,
                args.r,
                gamma,
                numerics.rel_tol,
                numerics.resolution,
            )?;
            (cal.limit, cal.solver)
        }
        (None, None) => unreachable!("clap requires --limit or --gamma"),
    };
    Ok((ChartDesign::new(args.mu, args.r, limit)?, solver))
}

fn report(
    args: &DesignArgs,
    numerics: &Numerics,
) -> Result<(ChartDesign, PerformanceReport), Failure> {
    let (design, solver) = design_and_solver(args, numerics)?;
    let rep = evaluate_with(&solver, design.r, &numerics.config())?;
    Ok((design, rep))
}

fn search_config(numerics: &Numerics) -> SearchConfig {
    SearchConfig {
        numerics: numerics.config(),
        rel_tol: numerics.rel_tol,
        ..SearchConfig::default()
    }
}

fn run(command: Command, out: &mut Vec<u8>) -> Result<(), Failure> {
    match command {
        Command::Xi { mu, format } => {
            let params = ModelParams::new(mu)?;
            let s = xi(&params, gsr_core::model::DEFAULT_SERIES_TOL)?;
            let o = XiOutput {
                mu: params.mu(),
                xi: s.value,
                terms: s.terms,
                tail: s.tail,
            };
            match format {
                Format::Json => json(&o, out),
                Format::Csv => csv_rows(
                    &["mu", "xi", "terms", "tail"],
                    vec![vec![
                        o.mu.to_string(),
                        o.xi.to_string(),
                        o.terms.to_string(),
                        o.tail.to_string(),
                    ]],
                    out,
                ),
            }
        }
        Command::Calibrate {
            mu,
            gamma,
            r,
            numerics,
        } => {
            let params = ModelParams::new(mu)?;
            let cal =
                calibrate_threshold(&params, r, gamma, numerics.rel_tol, numerics.resolution)?;
            json(
                &CalibrationOutput {
                    mu: params.mu(),
                    gamma,
                    r,
                    limit: cal.limit,
                    arl: cal.arl,
                    seed: cal.seed,
                    evaluations: cal.evaluations,
                    resolution: numerics.resolution,
                },
                out,
            )
        }
        Command::Evaluate {
            design,
            numerics,
            format,
        } => {
            let (_, rep) = report(&design, &numerics)?;
            match format {
                Format::Json => json(&rep, out),
                Format::Csv => {
                    let rows = rep
                        .profile
                        .add
                        .iter()
                        .zip(&rep.profile.survival)
                        .enumerate()
                        .map(|(k, (a, s))| vec![k.to_string(), a.to_string(), s.to_string()])
                        .collect();
                    csv_rows(&["k", "add_k", "survival_k"], rows, out)
                }
            }
        }
        Command::Optimize {
            mu,
            gamma,
            numerics,
            format,
        } => {
            let d = optimize_design(mu, gamma, &search_config(&numerics))?;
            match format {
                Format::Json => json(&d, out),
                Format::Csv => {
                    let row = TableRow {
                        gamma,
                        mu: d.mu,
                        values: Some(CellValues::from(&d)),
                    };
                    write_table(&[row], out).map_err(Failure::from)
                }
            }
        }
        Command::Table {
            mut mu,
            mut gamma,
            paper_tables,
            numerics,
            format,
        } => {
            let numerics = if paper_tables {
                if mu.is_empty() {
                    mu = PUBLISHED_MUS.to_vec();
                }
                if gamma.is_empty() {
                    gamma = PUBLISHED_GAMMAS.to_vec();
                }
                Numerics {
                    resolution: DEFAULT_RESOLUTION,
                    rel_tol: DEFAULT_REL_TOL,
                }
            } else {
                numerics
            };
            if mu.is_empty() || gamma.is_empty() {
                return Err(GsrError::Configuration(
                    "table needs --mu and --gamma lists, or --paper-tables".into(),
                )
                .into());
            }
            let cells = generate_table(&mu, &gamma, &search_config(&numerics));
            let failed = cells.iter().filter(|c| c.1.is_err()).count();
            for (row, res) in &cells {
                if let Err(e) = res {
                    eprintln!("cell gamma={} mu={}: {e}", row.gamma, row.mu);
                }
            }
            match format {
                Format::Csv => {
                    let rows: Vec<TableRow> = cells.into_iter().map(|c| c.0).collect();
                    write_table(&rows, &mut *out)?;
                }
                Format::Json => {
                    #[derive(Serialize)]
                    struct Cell {
                        gamma: f64,
                        mu: f64,
                        design: Option<gsr_core::DesignResult>,
                        error: Option<String>,
                    }
                    #[derive(Serialize)]
                    struct TableOutput {
                        cells: Vec<Cell>,
                    }
                    let cells = cells
                        .into_iter()
                        .map(|(row, res)| {
                            let (design, error) = match res {
                                Ok(d) => (Some(d), None),
                                Err(e) => (None, Some(e.to_string())),
                            };
                            Cell {
                                gamma: row.gamma,
                                mu: row.mu,
                                design,
                                error,
                            }
                        })
                        .collect();
                    json(&TableOutput { cells }, out)?;
                }
            }
            if failed > 0 {
                Err(Failure::PartialTable(failed))
            } else {
                Ok(())
            }
        }
        Command::Simulate {
            design,
            change_point,
            replications,
            seed,
            numerics,
        } => {
            let (d, rep) = report(&design, &numerics)?;
            let mut estimates = Vec::new();

            let plan = SimulationPlan::new(d, ChangePoint::Never, replications, seed)?;
            let est = estimate_arl(&plan)?;
            estimates.push(Comparison {
                quantity: "arl".into(),
                estimate: est.estimate,
                std_error: est.std_error,
                effective_replications: est.effective_replications,
                integral_equation: rep.arl,
                z: est.z_score(rep.arl),
            });

            let mut ks = change_point;
            ks.sort_unstable();
            ks.dedup();
            for k in ks {
                let plan = SimulationPlan::new(d, ChangePoint::At(k), replications, seed)?;
                let est = estimate_add_k(&plan)?;
                let idx = k as usize;
                let (add, surv) = if idx < rep.profile.add.len() {
                    (rep.profile.add[idx], rep.profile.survival[idx])
                } else {
                    (rep.profile.steady_state_add, 0.0)
                };
                estimates.push(Comparison {
                    quantity: format!("add_{k}"),
                    estimate: est.delay.estimate,
                    std_error: est.delay.std_error,
                    effective_replications: est.delay.effective_replications,
                    integral_equation: add,
                    z: est.delay.z_score(add),
                });
                if k > 0 && idx < rep.profile.survival.len() {
                    estimates.push(Comparison {
                        quantity: format!("survival_{k}"),
                        estimate: est.survival.estimate,
                        std_error: est.survival.std_error,
                        effective_replications: est.survival.effective_replications,
                        integral_equation: surv,
                        z: est.survival.binomial_z(surv),
                    });
                }
            }
            let disagreements = estimates
                .iter()
                .filter(|c| c.z.is_nan() || c.z.abs() >= Z_LIMIT)
                .count();
            json(
                &SimulationOutput {
                    mu: d.mu(),
                    r: d.r,
                    limit: d.limit,
                    replications,
                    seed,
                    resolution: numerics.resolution,
                    estimates,
                },
                out,
            )?;
            if disagreements > 0 {
                Err(Failure::Oracle(disagreements))
            } else {
                Ok(())
            }
        }
    }
}
