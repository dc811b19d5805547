//! Command-line front end. Parses arguments, loads configs, formats JSON
//! or CSV, and dispatches into the library; no numerics live here.
//!
//! Exit codes: 0 on success, 2 for rejected input or usage errors, 3 when
//! an iterative solver fails to converge.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::cavity_ll::{self, GridParams, LlCavitySolution};
use crate::cavity_sq::{self, SqPhResponse};
use crate::jobsize::{JobSizeDistribution, JobSizeSpec};
use crate::memory::{self, MemoryScheme, SchemeKind};
use crate::sim::{self, SimConfig};
use crate::{asymptotics, Error, Policy, Result};

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } => 3,
        _ => 2,
    }
}

#[derive(Parser)]
#[command(
    name = "memlb",
    version,
    about = "Performance analysis and simulation of SQ(d)/LL(d) load balancing with a dispatcher memory"
)]
struct Cli {
    /// Root RNG seed (simulations and reproductions).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output to this file instead of stdout; `simulate` in CSV mode
    /// appends to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Worker threads for parallel replications (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary probability that an arrival finds the memory empty.
    Pi0 {
        #[arg(long, value_parser = parse_scheme)]
        scheme: SchemeKind,
        #[arg(long)]
        d: u32,
        #[arg(long = "A")]
        a: Option<u32>,
        #[arg(long)]
        rho: f64,
    },
    /// Equilibrium metrics of one policy/scheme pair at a fixed load.
    Analyze {
        #[arg(long, value_parser = parse_policy)]
        policy: Policy,
        #[arg(long)]
        d: u32,
        #[arg(long, value_parser = parse_scheme)]
        scheme: SchemeKind,
        #[arg(long = "A")]
        a: Option<u32>,
        /// Arrival rate per server; the load is lambda times the mean size.
        #[arg(long)]
        lambda: f64,
        /// exp[:MEAN], hyperexp[:MEAN]:SCV, @file.json, or inline JSON.
        #[arg(long, default_value = "exp")]
        dist: String,
        /// Response-time points for a ccdf table (JSON output only).
        #[arg(long, value_delimiter = ',')]
        ccdf: Vec<f64>,
    },
    /// Mean response, pi0 and probe cost of every scheme over a load grid.
    Sweep {
        #[arg(long, value_parser = parse_policy, default_value = "sq")]
        policy: Policy,
        #[arg(long, default_value_t = 5)]
        d: u32,
        /// Capacity used for the bcp and ism rows.
        #[arg(long = "A", default_value_t = 4)]
        a: u32,
        /// Loads to evaluate; defaults to 0.30, 0.35, ..., 0.95.
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[arg(long, default_value = "exp")]
        dist: String,
    },
    /// Run the event-driven simulator from a JSON config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Replication seeds (distinct); omitted: streams of the root seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Also run one replication with per-event invariant checks.
        #[arg(long)]
        audit: bool,
        /// Label for the first column of CSV rows.
        #[arg(long, default_value = "custom")]
        setup: String,
    },
    /// Heavy-traffic constant lim -E[R]/ln(1-lambda) as lambda -> 1.
    Heavy {
        #[arg(long, value_parser = parse_policy)]
        policy: Policy,
        #[arg(long)]
        d: u32,
        #[arg(long, value_parser = parse_scheme)]
        scheme: SchemeKind,
        #[arg(long = "A")]
        a: Option<u32>,
        /// Loads at which to corroborate the limit with the exact mean.
        #[arg(long, value_delimiter = ',')]
        corroborate: Vec<f64>,
    },
    /// Ratio of mean waiting times of two configurations as lambda -> 0.
    Lowratio {
        #[arg(long, value_parser = parse_policy)]
        policy1: Policy,
        #[arg(long)]
        d1: u32,
        #[arg(long, value_parser = parse_scheme)]
        scheme1: SchemeKind,
        #[arg(long = "A1")]
        a1: Option<u32>,
        #[arg(long, value_parser = parse_policy)]
        policy2: Policy,
        #[arg(long)]
        d2: u32,
        #[arg(long, value_parser = parse_scheme)]
        scheme2: SchemeKind,
        #[arg(long = "A2")]
        a2: Option<u32>,
    },
    /// Regenerate the benchmark table or the scheme-comparison sweep as CSV.
    Reproduce {
        #[arg(value_parser = ["table1", "figure1"])]
        target: String,
        /// System sizes simulated for each setup.
        #[arg(long = "n-grid", value_delimiter = ',', default_values_t = [10u32, 100, 3000])]
        n_grid: Vec<u32>,
        #[arg(long, default_value_t = 10)]
        reps: u32,
        /// Emit only the analytic (cavity) rows; no simulation.
        #[arg(long)]
        analytic_only: bool,
    },
}

fn parse_policy(s: &str) -> std::result::Result<Policy, String> {
    match s.to_ascii_lowercase().as_str() {
        "sq" => Ok(Policy::Sq),
        "ll" => Ok(Policy::Ll),
        other => Err(format!("unknown policy '{other}' (expected sq or ll)")),
    }
}

fn parse_scheme(s: &str) -> std::result::Result<SchemeKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "none" => Ok(SchemeKind::None),
        "ip" => Ok(SchemeKind::Ip),
        "cp" => Ok(SchemeKind::Cp),
        "bcp" => Ok(SchemeKind::Bcp),
        "ism" => Ok(SchemeKind::Ism),
        other => Err(format!(
            "unknown scheme '{other}' (expected none, ip, cp, bcp or ism)"
        )),
    }
}

/// Builds the scheme, insisting on --A where the scheme needs a capacity.
fn build_scheme(kind: SchemeKind, d: u32, a: Option<u32>) -> Result<MemoryScheme> {
    if matches!(kind, SchemeKind::Bcp | SchemeKind::Ism) && a.is_none() {
        return Err(Error::InvalidParameter(format!(
            "{} requires --A",
            kind.name().to_uppercase()
        )));
    }
    MemoryScheme::new(kind, d, a)
}

/// Distribution shorthand: "exp", "exp:2.0", "hyperexp:3" (mean 1),
/// "hyperexp:2.0:3.0" (mean, scv), "@sizes.json", or inline JSON.
fn parse_dist(text: &str) -> Result<JobSizeDistribution> {
    let t = text.trim();
    if let Some(path) = t.strip_prefix('@') {
        let raw = fs::read_to_string(path).map_err(|e| {
            Error::InvalidParameter(format!("cannot read distribution file {path}: {e}"))
        })?;
        let spec: JobSizeSpec = serde_json::from_str(&raw).map_err(|e| {
            Error::InvalidParameter(format!("bad distribution JSON in {path}: {e}"))
        })?;
        return spec.build();
    }
    if t.starts_with('{') {
        let spec: JobSizeSpec = serde_json::from_str(t)
            .map_err(|e| Error::InvalidParameter(format!("bad distribution JSON: {e}")))?;
        return spec.build();
    }
    let parts: Vec<&str> = t.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("'{s}' is not a number in '{t}'")))
    };
    match (parts[0], parts.len()) {
        ("exp", 1) => JobSizeDistribution::exponential(1.0),
        ("exp", 2) => JobSizeDistribution::exponential(num(parts[1])?),
        ("hyperexp", 2) => JobSizeDistribution::balanced_hyperexp(1.0, num(parts[1])?),
        ("hyperexp", 3) => {
            JobSizeDistribution::balanced_hyperexp(num(parts[1])?, num(parts[2])?)
        }
        _ => Err(Error::InvalidParameter(format!(
            "unknown distribution '{t}' (expected exp[:MEAN], hyperexp[:MEAN]:SCV, @file.json or JSON)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Cavity solutions shared by analyze, sweep and reproduce
// ---------------------------------------------------------------------------

/// A solved cavity model: closed forms for exponential sizes, the numeric
/// pipelines otherwise.
enum Solved {
    SqExp {
        d: u32,
        lambda: f64,
        mu: f64,
        pi0: f64,
    },
    SqPh {
        response: SqPhResponse,
    },
    LlExp {
        d: u32,
        lambda: f64,
        mu: f64,
        pi0: f64,
    },
    LlGrid {
        sol: LlCavitySolution,
    },
}

impl Solved {
    fn mean_response(&self) -> Result<f64> {
        match self {
            Solved::SqExp { d, lambda, mu, pi0 } => {
                cavity_sq::sq_mean_response(*d, *lambda, *mu, *pi0)
            }
            Solved::SqPh { response } => Ok(response.mean()),
            Solved::LlExp { d, lambda, mu, pi0 } => {
                cavity_ll::ll_mean_response_exp(*d, *lambda, *mu, *pi0)
            }
            Solved::LlGrid { sol } => Ok(cavity_ll::ll_mean_response(sol)),
        }
    }

    fn response_ccdf(&self, w: f64) -> Result<f64> {
        match self {
            Solved::SqExp { d, lambda, mu, pi0 } => {
                cavity_sq::sq_response_ccdf(*d, *lambda, *mu, *pi0, w)
            }
            Solved::SqPh { response } => response.ccdf(w),
            Solved::LlExp { d, lambda, mu, pi0 } => {
                cavity_ll::ll_response_ccdf_exp(*d, *lambda, *mu, *pi0, w)
            }
            Solved::LlGrid { sol } => cavity_ll::ll_response_ccdf(sol, w),
        }
    }
}

fn solve_cavity(
    policy: Policy,
    scheme: &MemoryScheme,
    lambda: f64,
    dist: &JobSizeDistribution,
) -> Result<(f64, Solved)> {
    let rho = lambda * dist.mean();
    let pi0 = memory::pi0(scheme, rho)?.pi0;
    let solved = match (policy, dist) {
        (Policy::Sq, JobSizeDistribution::Exponential { rate }) => Solved::SqExp {
            d: scheme.d,
            lambda,
            mu: *rate,
            pi0,
        },
        (Policy::Sq, _) => {
            let sol = cavity_sq::sq_ph_equilibrium(scheme.d, lambda, dist, pi0)?;
            let response = cavity_sq::sq_ph_response(&sol, dist)?;
            Solved::SqPh { response }
        }
        (Policy::Ll, JobSizeDistribution::Exponential { rate }) => Solved::LlExp {
            d: scheme.d,
            lambda,
            mu: *rate,
            pi0,
        },
        (Policy::Ll, _) => {
            let sol =
                cavity_ll::ll_fixed_point(scheme.d, lambda, dist, pi0, &GridParams::default())?;
            Solved::LlGrid { sol }
        }
    };
    Ok((pi0, solved))
}

/// ISM and None probe one server at a time; the batch schemes pay d.
fn probes_one_at_a_time(kind: SchemeKind) -> bool {
    matches!(kind, SchemeKind::Ism | SchemeKind::None)
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

fn json_num(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidState(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_out(out, &text)
}

fn csv_table(header: &str, rows: &[String]) -> String {
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    text
}

/// Fixed column layout shared by `simulate` CSV rows and `reproduce table1`.
const SIM_CSV_HEADER: &str = "setup,N,policy,d,scheme,A,lambda,dist,scv,mean_response,\
stderr,pi0_emp,probes_per_arrival,messages_per_arrival,jobs_measured,seed_list";

#[allow(clippy::too_many_arguments)]
fn sim_csv_row(
    setup: &str,
    n: &str,
    policy: Policy,
    scheme: &MemoryScheme,
    lambda: f64,
    dist: &JobSizeDistribution,
    mean_response: f64,
    stderr: Option<f64>,
    pi0: f64,
    probes: f64,
    messages: Option<f64>,
    jobs: Option<u64>,
    seeds: &[u64],
) -> String {
    let a = scheme.a.map(|a| a.to_string()).unwrap_or_default();
    let stderr = stderr.map(|s| s.to_string()).unwrap_or_default();
    let messages = messages.map(|m| m.to_string()).unwrap_or_default();
    let jobs = jobs.map(|j| j.to_string()).unwrap_or_default();
    let seeds = seeds
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(";");
    format!(
        "{setup},{n},{},{},{},{a},{lambda},{},{},{mean_response},{stderr},{pi0},{probes},{messages},{jobs},{seeds}",
        policy.name(),
        scheme.d,
        scheme.scheme.name(),
        dist.family_name(),
        dist.scv(),
    )
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Pi0 { scheme, d, a, rho } => cmd_pi0(cli, *scheme, *d, *a, *rho),
        Command::Analyze {
            policy,
            d,
            scheme,
            a,
            lambda,
            dist,
            ccdf,
        } => cmd_analyze(cli, *policy, *d, *scheme, *a, *lambda, dist, ccdf),
        Command::Sweep {
            policy,
            d,
            a,
            lambdas,
            dist,
        } => cmd_sweep(cli, *policy, *d, *a, lambdas, dist),
        Command::Simulate {
            config,
            seeds,
            audit,
            setup,
        } => cmd_simulate(cli, config, seeds, *audit, setup),
        Command::Heavy {
            policy,
            d,
            scheme,
            a,
            corroborate,
        } => cmd_heavy(cli, *policy, *d, *scheme, *a, corroborate),
        Command::Lowratio {
            policy1,
            d1,
            scheme1,
            a1,
            policy2,
            d2,
            scheme2,
            a2,
        } => cmd_lowratio(
            cli, *policy1, *d1, *scheme1, *a1, *policy2, *d2, *scheme2, *a2,
        ),
        Command::Reproduce {
            target,
            n_grid,
            reps,
            analytic_only,
        } => cmd_reproduce(cli, target, n_grid, *reps, *analytic_only),
    }
}

fn cmd_pi0(cli: &Cli, kind: SchemeKind, d: u32, a: Option<u32>, rho: f64) -> Result<()> {
    let scheme = build_scheme(kind, d, a)?;
    let st = memory::pi0(&scheme, rho)?;
    match cli.format {
        OutputFormat::Json => emit_json(
            &cli.out,
            &json!({
                "scheme": scheme.scheme.name(),
                "d": scheme.d,
                "A": scheme.a,
                "rho": rho,
                "pi0": st.pi0,
                "pi": st.pi,
                "regime_note": st.regime_note,
            }),
        ),
        OutputFormat::Csv => {
            let a = scheme.a.map(|a| a.to_string()).unwrap_or_default();
            let note = st.regime_note.unwrap_or_default();
            let row = format!("{},{d},{a},{rho},{},{note}", scheme.scheme.name(), st.pi0);
            write_out(
                &cli.out,
                &csv_table("scheme,d,A,rho,pi0,regime_note", &[row]),
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    cli: &Cli,
    policy: Policy,
    d: u32,
    kind: SchemeKind,
    a: Option<u32>,
    lambda: f64,
    dist_text: &str,
    ccdf: &[f64],
) -> Result<()> {
    let scheme = build_scheme(kind, d, a)?;
    let dist = parse_dist(dist_text)?;
    let (pi0, solved) = solve_cavity(policy, &scheme, lambda, &dist)?;
    let mean = solved.mean_response()?;
    let heavy = asymptotics::heavy_traffic_limit(policy, &scheme)
        .ok()
        .map(|r| r.value);
    match cli.format {
        OutputFormat::Json => {
            let mut obj = json!({
                "policy": policy.name(),
                "d": scheme.d,
                "scheme": scheme.scheme.name(),
                "A": scheme.a,
                "lambda": lambda,
                "rho": lambda * dist.mean(),
                "dist": dist.family_name(),
                "scv": dist.scv(),
                "pi0": pi0,
                "mean_response": mean,
                "heavy_traffic_constant": heavy,
            });
            if !ccdf.is_empty() {
                let mut table = Vec::with_capacity(ccdf.len());
                for &w in ccdf {
                    table.push(json!({"w": w, "value": solved.response_ccdf(w)?}));
                }
                obj["response_ccdf"] = json!(table);
            }
            emit_json(&cli.out, &obj)
        }
        OutputFormat::Csv => {
            if !ccdf.is_empty() {
                return Err(Error::InvalidParameter(
                    "the ccdf table is only available with --format json".into(),
                ));
            }
            let a = scheme.a.map(|x| x.to_string()).unwrap_or_default();
            let heavy = heavy.map(|h| h.to_string()).unwrap_or_default();
            let row = format!(
                "{},{},{},{a},{lambda},{pi0},{mean},{heavy}",
                policy.name(),
                scheme.d,
                scheme.scheme.name(),
            );
            write_out(
                &cli.out,
                &csv_table(
                    "policy,d,scheme,A,lambda,pi0,mean_response,heavy_traffic_constant",
                    &[row],
                ),
            )
        }
    }
}

struct SweepRow {
    label: String,
    lambda: f64,
    mean_response: f64,
    pi0: f64,
    probes: f64,
}

fn sweep_rows(
    policy: Policy,
    d: u32,
    a: u32,
    lambdas: &[f64],
    dist: &JobSizeDistribution,
) -> Result<Vec<SweepRow>> {
    let schemes = [
        (SchemeKind::None, None),
        (SchemeKind::Ip, None),
        (SchemeKind::Cp, None),
        (SchemeKind::Bcp, Some(a)),
        (SchemeKind::Ism, Some(a)),
    ];
    let mut rows = Vec::with_capacity(schemes.len() * lambdas.len());
    for (kind, cap) in schemes {
        let scheme = MemoryScheme::new(kind, d, cap)?;
        let label = match cap {
            Some(a) => format!("{}:{a}", kind.name()),
            None => kind.name().to_string(),
        };
        for &lambda in lambdas {
            let rho = lambda * dist.mean();
            let (pi0, solved) = solve_cavity(policy, &scheme, lambda, dist)?;
            let probes = memory::probes_per_arrival(&scheme, rho, probes_one_at_a_time(kind))?;
            rows.push(SweepRow {
                label: label.clone(),
                lambda,
                mean_response: solved.mean_response()?,
                pi0,
                probes,
            });
        }
    }
    Ok(rows)
}

fn default_lambda_grid() -> Vec<f64> {
    // 0.30, 0.35, ..., 0.95; dividing (not multiplying by 0.05) keeps the
    // printed values exact.
    (6..=19).map(|i| (i as f64) / 20.0).collect()
}

fn cmd_sweep(
    cli: &Cli,
    policy: Policy,
    d: u32,
    a: u32,
    lambdas: &[f64],
    dist_text: &str,
) -> Result<()> {
    let dist = parse_dist(dist_text)?;
    let grid = if lambdas.is_empty() {
        default_lambda_grid()
    } else {
        lambdas.to_vec()
    };
    let rows = sweep_rows(policy, d, a, &grid, &dist)?;
    match cli.format {
        OutputFormat::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "scheme": r.label,
                        "lambda": r.lambda,
                        "mean_response": r.mean_response,
                        "pi0": r.pi0,
                        "probes_per_arrival": r.probes,
                    })
                })
                .collect();
            emit_json(&cli.out, &json!(items))
        }
        OutputFormat::Csv => {
            let lines: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{},{}",
                        r.label, r.lambda, r.mean_response, r.pi0, r.probes
                    )
                })
                .collect();
            write_out(
                &cli.out,
                &csv_table("scheme,lambda,mean_response,pi0,probes_per_arrival", &lines),
            )
        }
    }
}

/// On-disk simulator configuration.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SimConfigFile {
    #[serde(rename = "N")]
    n: u32,
    lambda: f64,
    policy: Policy,
    d: u32,
    scheme: SchemeKind,
    #[serde(rename = "A", default)]
    a: Option<u32>,
    dist: JobSizeSpec,
    #[serde(default)]
    sim_time: Option<f64>,
    #[serde(default)]
    warmup_fraction: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    replications: Option<u32>,
}

fn load_sim_config(path: &Path, seed_override: Option<u64>) -> Result<SimConfig> {
    let raw = fs::read_to_string(path).map_err(|e| {
        Error::InvalidParameter(format!("cannot read config {}: {e}", path.display()))
    })?;
    let file: SimConfigFile = serde_json::from_str(&raw)
        .map_err(|e| Error::InvalidParameter(format!("bad config {}: {e}", path.display())))?;
    let scheme = build_scheme(file.scheme, file.d, file.a)?;
    let dist = file.dist.build()?;
    let mut cfg = SimConfig::new(file.n, file.lambda, file.policy, scheme, dist);
    cfg.sim_time = file.sim_time;
    if let Some(w) = file.warmup_fraction {
        cfg.warmup_fraction = w;
    }
    if let Some(r) = file.replications {
        cfg.replications = r;
    }
    cfg.seed = seed_override.or(file.seed).unwrap_or(1);
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_simulate(cli: &Cli, config: &Path, seeds: &[u64], audit: bool, setup: &str) -> Result<()> {
    let cfg = load_sim_config(config, cli.seed)?;
    let audit_report = if audit {
        Some(sim::audit_invariants(&cfg)?)
    } else {
        None
    };
    let report = if seeds.is_empty() {
        sim::run_simulation(&cfg)?
    } else {
        sim::replicate(&cfg, seeds)?
    };
    match cli.format {
        OutputFormat::Json => {
            let mut obj = json!({ "report": report });
            if let Some(audit) = audit_report {
                obj["audit"] = json!(audit);
            }
            emit_json(&cli.out, &obj)
        }
        OutputFormat::Csv => {
            let row = sim_csv_row(
                setup,
                &cfg.n.to_string(),
                cfg.policy,
                &cfg.scheme,
                cfg.lambda,
                &cfg.dist,
                report.mean_response,
                Some(report.stderr),
                report.empirical_pi0,
                report.probes_per_arrival,
                report.messages_per_arrival,
                Some(report.jobs_measured),
                &report.seeds,
            );
            append_csv_row(&cli.out, &row)
        }
    }
}

/// Appends one fixed-layout row, writing the header first when the target
/// file is new or empty (stdout always gets the header).
fn append_csv_row(out: &Option<PathBuf>, row: &str) -> Result<()> {
    match out {
        None => {
            print!("{}", csv_table(SIM_CSV_HEADER, &[row.to_string()]));
            Ok(())
        }
        Some(path) => {
            let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
            let mut file = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| {
                    Error::InvalidParameter(format!("cannot open {}: {e}", path.display()))
                })?;
            let text = if fresh {
                csv_table(SIM_CSV_HEADER, &[row.to_string()])
            } else {
                format!("{row}\n")
            };
            file.write_all(text.as_bytes()).map_err(|e| {
                Error::InvalidParameter(format!("cannot write {}: {e}", path.display()))
            })
        }
    }
}

fn cmd_heavy(
    cli: &Cli,
    policy: Policy,
    d: u32,
    kind: SchemeKind,
    a: Option<u32>,
    corroborate: &[f64],
) -> Result<()> {
    let scheme = build_scheme(kind, d, a)?;
    let limit = asymptotics::heavy_traffic_limit(policy, &scheme)?;
    let ratios = if corroborate.is_empty() {
        Vec::new()
    } else {
        asymptotics::heavy_traffic_corroborate(policy, &scheme, corroborate)?
    };
    match cli.format {
        OutputFormat::Json => {
            let table: Vec<serde_json::Value> = corroborate
                .iter()
                .zip(&ratios)
                .map(|(l, r)| json!({"lambda": l, "ratio": r}))
                .collect();
            emit_json(
                &cli.out,
                &json!({
                    "policy": policy.name(),
                    "d": scheme.d,
                    "scheme": scheme.scheme.name(),
                    "A": scheme.a,
                    "constant": limit.value,
                    "regime": limit.regime,
                    "corroboration": table,
                }),
            )
        }
        OutputFormat::Csv => {
            let a = scheme.a.map(|x| x.to_string()).unwrap_or_default();
            let head = "policy,d,scheme,A,lambda,ratio,constant";
            let rows: Vec<String> = if corroborate.is_empty() {
                vec![format!(
                    "{},{},{},{a},,,{}",
                    policy.name(),
                    scheme.d,
                    scheme.scheme.name(),
                    limit.value
                )]
            } else {
                corroborate
                    .iter()
                    .zip(&ratios)
                    .map(|(l, r)| {
                        format!(
                            "{},{},{},{a},{l},{r},{}",
                            policy.name(),
                            scheme.d,
                            scheme.scheme.name(),
                            limit.value
                        )
                    })
                    .collect()
            };
            write_out(&cli.out, &csv_table(head, &rows))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_lowratio(
    cli: &Cli,
    policy1: Policy,
    d1: u32,
    kind1: SchemeKind,
    a1: Option<u32>,
    policy2: Policy,
    d2: u32,
    kind2: SchemeKind,
    a2: Option<u32>,
) -> Result<()> {
    let s1 = build_scheme(kind1, d1, a1)?;
    let s2 = build_scheme(kind2, d2, a2)?;
    let res = asymptotics::low_traffic_ratio(policy1, &s1, policy2, &s2)?;
    match cli.format {
        OutputFormat::Json => emit_json(
            &cli.out,
            &json!({
                "first": {"policy": policy1.name(), "d": d1, "scheme": s1.scheme.name(), "A": s1.a},
                "second": {"policy": policy2.name(), "d": d2, "scheme": s2.scheme.name(), "A": s2.a},
                "ratio": json_num(res.value),
                "regime": res.regime,
            }),
        ),
        OutputFormat::Csv => {
            let fmt_a = |a: Option<u32>| a.map(|x| x.to_string()).unwrap_or_default();
            let ratio = if res.value.is_finite() {
                res.value.to_string()
            } else {
                "inf".to_string()
            };
            let row = format!(
                "{},{d1},{},{},{},{d2},{},{},{ratio}",
                policy1.name(),
                s1.scheme.name(),
                fmt_a(a1),
                policy2.name(),
                s2.scheme.name(),
                fmt_a(a2),
            );
            write_out(
                &cli.out,
                &csv_table("policy1,d1,scheme1,A1,policy2,d2,scheme2,A2,ratio", &[row]),
            )
        }
    }
}

/// The eight benchmark setups: both policies over exponential and
/// hyperexponential sizes with each discovery scheme.
pub(crate) fn benchmark_setups(
) -> Vec<(String, Policy, u32, f64, MemoryScheme, JobSizeDistribution)> {
    let exp = JobSizeDistribution::exponential(1.0).unwrap();
    let he2 = JobSizeDistribution::balanced_hyperexp(1.0, 2.0).unwrap();
    let he3 = JobSizeDistribution::balanced_hyperexp(1.0, 3.0).unwrap();
    let mut setups = Vec::new();
    for (i, policy) in [(0, Policy::Ll), (4, Policy::Sq)] {
        setups.push((
            format!("setup{}", i + 1),
            policy,
            4,
            0.9,
            MemoryScheme::new(SchemeKind::Ip, 4, None).unwrap(),
            exp.clone(),
        ));
        setups.push((
            format!("setup{}", i + 2),
            policy,
            3,
            0.8,
            MemoryScheme::new(SchemeKind::Cp, 3, None).unwrap(),
            exp.clone(),
        ));
        setups.push((
            format!("setup{}", i + 3),
            policy,
            3,
            0.8,
            MemoryScheme::new(SchemeKind::Bcp, 3, Some(5)).unwrap(),
            he2.clone(),
        ));
        setups.push((
            format!("setup{}", i + 4),
            policy,
            2,
            0.85,
            MemoryScheme::new(SchemeKind::Ism, 2, Some(10)).unwrap(),
            he3.clone(),
        ));
    }
    setups
}

fn cmd_reproduce(
    cli: &Cli,
    target: &str,
    n_grid: &[u32],
    reps: u32,
    analytic_only: bool,
) -> Result<()> {
    let seed = cli.seed.unwrap_or(1);
    match target {
        "figure1" => {
            let dist = JobSizeDistribution::exponential(1.0).unwrap();
            let rows = sweep_rows(Policy::Sq, 5, 4, &default_lambda_grid(), &dist)?;
            let lines: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "{},{},{},{},{}",
                        r.label, r.lambda, r.mean_response, r.pi0, r.probes
                    )
                })
                .collect();
            write_out(
                &cli.out,
                &csv_table("scheme,lambda,mean_response,pi0,probes_per_arrival", &lines),
            )
        }
        "table1" => {
            let mut lines = Vec::new();
            for (name, policy, _d, lambda, scheme, dist) in benchmark_setups() {
                if !analytic_only {
                    for &n in n_grid {
                        let mut cfg = SimConfig::new(n, lambda, policy, scheme, dist.clone());
                        cfg.seed = seed;
                        cfg.replications = reps;
                        let report = sim::run_simulation(&cfg)?;
                        lines.push(sim_csv_row(
                            &name,
                            &n.to_string(),
                            policy,
                            &scheme,
                            lambda,
                            &dist,
                            report.mean_response,
                            Some(report.stderr),
                            report.empirical_pi0,
                            report.probes_per_arrival,
                            report.messages_per_arrival,
                            Some(report.jobs_measured),
                            &report.seeds,
                        ));
                    }
                }
                let rho = lambda * dist.mean();
                let (pi0, solved) = solve_cavity(policy, &scheme, lambda, &dist)?;
                let probes =
                    memory::probes_per_arrival(&scheme, rho, probes_one_at_a_time(scheme.scheme))?;
                let messages = match scheme.scheme {
                    SchemeKind::Ism => Some(memory::ism_messages_per_arrival(&scheme, rho)?),
                    _ => None,
                };
                lines.push(sim_csv_row(
                    &name,
                    "cavity",
                    policy,
                    &scheme,
                    lambda,
                    &dist,
                    solved.mean_response()?,
                    None,
                    pi0,
                    probes,
                    messages,
                    None,
                    &[],
                ));
            }
            write_out(&cli.out, &csv_table(SIM_CSV_HEADER, &lines))
        }
        _ => unreachable!("clap restricts the target values"),
    }
}
