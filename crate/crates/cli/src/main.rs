//! Command-line front end: estimation, GMM combination, group-set
//! inspection, exact probability queries, data simulation, and Monte Carlo
//! runs.
//!
//! Exit codes: 0 success, 1 input/configuration error, 2 numerical error
//! (non-convergence, singularity, enumeration limits). No command writes
//! partial output: files are written to a temp path and atomically renamed.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use panelogit_core::error::Error as CoreError;
use panelogit_core::inference::{
    arp_score_system, cox_score_system, gmm_estimate, maximize, EstimateResult,
    OptimizerOptions,
};
use panelogit_core::likelihood::{loglik_arp, loglik_beta_only, loglik_cox};
use panelogit_core::mnl::loglik_mnl;
use panelogit_core::oracle::{
    conditional_probability, mnl_conditional_probability, DgpSpec, MnlDgpSpec,
};
use panelogit_core::panel::{load_csv, write_csv, write_csv_mnl, LoadedPanel, Schema};
use panelogit_core::sets::build_group_system;
use panelogit_core::simulate::{
    format_summary_table, run_monte_carlo, simulate_panel, simulate_panel_mnl, write_replications_csv,
    write_summary_csv, Dgp, McConfig,
};
use panelogit_core::{MnlParameterVector, ParameterVector};

#[derive(Parser)]
#[command(
    name = "panelogit",
    version,
    about = "Conditional ML estimation for fixed-effects dynamic panel logit models"
)]
struct Cli {
    /// Worker threads for parallel sections (0 = all cores). Results are
    /// identical for any thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a model from a CSV panel
    Estimate(EstimateArgs),
    /// Two-step GMM combining likelihood-equation systems
    Gmm(GmmArgs),
    /// Enumerate the maximal admissible time-index groups for (T, p)
    Sets(SetsArgs),
    /// Exact probability queries against a data-generating process
    Oracle(OracleArgs),
    /// Simulate a panel dataset to CSV
    Simulate(SimulateArgs),
    /// Monte Carlo experiment: replications, summary CSV, and text table
    Mc(McArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV (columns id,t,y[,alt],x1..xK)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model family
    #[arg(long, value_parser = ["arp", "cox", "beta-only", "mnl"])]
    model: Option<String>,
    /// Autoregressive order (binary models)
    #[arg(long)]
    p: Option<usize>,
    /// Number of alternatives (mnl); checked against the data when given
    #[arg(long = "M")]
    m: Option<usize>,
    /// Gradient sup-norm convergence tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Optional JSON config; command-line flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report files (default: current directory)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// File form of the estimate/gmm options; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateFileConfig {
    data: Option<PathBuf>,
    model: Option<String>,
    p: Option<usize>,
    #[serde(rename = "M")]
    m: Option<usize>,
    tol: Option<f64>,
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GmmArgs {
    #[command(flatten)]
    estimate: EstimateArgs,
}

#[derive(Args)]
struct SetsArgs {
    /// Number of modeled periods
    #[arg(long = "T")]
    t: usize,
    /// Autoregressive order
    #[arg(long)]
    p: usize,
    /// Optional output file (JSON lines); always printed to stdout
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// JSON process + query file
    #[arg(long)]
    spec: PathBuf,
    /// Name of the query to evaluate (default: all)
    #[arg(long)]
    query: Option<String>,
    /// Optional output directory for oracle.json
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON population process ({"binary": ...} or {"multinomial": ...})
    #[arg(long)]
    config: PathBuf,
    /// Number of individuals
    #[arg(long)]
    n: usize,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (writes data.csv)
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct McArgs {
    /// JSON experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (writes replications.csv, summary.csv, summary.txt)
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// CLI-level failure with its exit classification.
enum CmdError {
    Input(String),
    Numerical(String),
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::ZeroConditioningEvent
            | CoreError::EnumerationCap { .. }
            | CoreError::DegenerateObjective
            | CoreError::NonConvergence { .. }
            | CoreError::SingularHessian
            | CoreError::RankDeficientMoments => CmdError::Numerical(e.to_string()),
            other => CmdError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CmdError {
    fn from(e: serde_json::Error) -> Self {
        CmdError::Input(e.to_string())
    }
}

type CmdResult<T> = Result<T, CmdError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // results do not depend on this; it only bounds parallelism
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let outcome = match cli.command {
        Command::Estimate(args) => cmd_estimate(args, false),
        Command::Gmm(args) => cmd_estimate(args.estimate, true),
        Command::Sets(args) => cmd_sets(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Mc(args) => cmd_mc(args),
    };
    match outcome {
        Ok(code) => code,
        Err(CmdError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CmdError::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Write `content` atomically into `dir/name`.
fn write_atomic(dir: &Path, name: &str, content: &[u8]) -> CmdResult<()> {
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content)?;
    tmp.persist(dir.join(name))
        .map_err(|e| CmdError::Input(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ParamRow {
    name: String,
    estimate: f64,
    se: f64,
    z: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    model: String,
    params: Vec<ParamRow>,
    converged: bool,
    iterations: usize,
    log_likelihood: Option<f64>,
    gradient_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_statistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_dof: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_p_value: Option<f64>,
}

fn param_rows(names: &[String], theta: &DVector<f64>, se: &DVector<f64>) -> Vec<ParamRow> {
    const Z95: f64 = 1.959963984540054; // two-sided 95% normal critical value
    names
        .iter()
        .enumerate()
        .map(|(j, name)| ParamRow {
            name: name.clone(),
            estimate: theta[j],
            se: se[j],
            z: theta[j] / se[j],
            ci_low: theta[j] - Z95 * se[j],
            ci_high: theta[j] + Z95 * se[j],
        })
        .collect()
}

fn format_report_table(report: &EstimateReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>10} {:>10} {:>8} {:>10} {:>10}\n",
        "param", "estimate", "se", "z", "ci_low", "ci_high"
    ));
    for r in &report.params {
        out.push_str(&format!(
            "{:<12} {:>10.4} {:>10.4} {:>8.4} {:>10.4} {:>10.4}\n",
            r.name, r.estimate, r.se, r.z, r.ci_low, r.ci_high
        ));
    }
    if let Some(ll) = report.log_likelihood {
        out.push_str(&format!("log-likelihood: {ll:.4}\n"));
    }
    if let (Some(j), Some(dof)) = (report.j_statistic, report.j_dof) {
        out.push_str(&format!("Hansen J: {j:.4} (dof {dof})\n"));
        if let Some(p) = report.j_p_value {
            out.push_str(&format!("J p-value: {p:.4}\n"));
        }
    }
    out.push_str(&format!(
        "converged: {} after {} iterations (gradient norm {:.4e})\n",
        report.converged, report.iterations, report.gradient_norm
    ));
    out
}

/// Merge CLI flags over the optional config file; flags win.
fn resolve_estimate_config(args: &EstimateArgs) -> CmdResult<EstimateFileConfig> {
    let mut cfg = if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        serde_json::from_str::<EstimateFileConfig>(&text)?
    } else {
        EstimateFileConfig::default()
    };
    if args.data.is_some() {
        cfg.data = args.data.clone();
    }
    if args.model.is_some() {
        cfg.model = args.model.clone();
    }
    if args.p.is_some() {
        cfg.p = args.p;
    }
    if args.m.is_some() {
        cfg.m = args.m;
    }
    if args.tol.is_some() {
        cfg.tol = args.tol;
    }
    if args.out_dir.is_some() {
        cfg.out_dir = args.out_dir.clone();
    }
    Ok(cfg)
}

fn cmd_estimate(args: EstimateArgs, gmm: bool) -> CmdResult<ExitCode> {
    let cfg = resolve_estimate_config(&args)?;
    let data = cfg
        .data
        .ok_or_else(|| CmdError::Input("--data is required".into()))?;
    let model = cfg.model.unwrap_or_else(|| "arp".to_string());
    let out_dir = cfg.out_dir.unwrap_or_else(|| PathBuf::from("."));
    let mut opts = OptimizerOptions::default();
    if let Some(tol) = cfg.tol {
        if !(tol > 0.0) {
            return Err(CmdError::Input("--tol must be positive".into()));
        }
        opts.tol = tol;
    }
    let p = cfg.p.unwrap_or(1);

    let (names, result, loglik, model_label): (Vec<String>, EstimateResult, Option<f64>, String) =
        match model.as_str() {
            "arp" | "cox" | "beta-only" => {
                let ds = match load_csv(&data, Schema::Binary, p).map_err(CmdError::from)? {
                    LoadedPanel::Binary(ds) => ds,
                    _ => unreachable!("binary schema yields a binary panel"),
                };
                match model.as_str() {
                    "arp" if gmm => {
                        if ds.k != 0 || ds.p != 1 {
                            return Err(CmdError::Input(
                                "gmm combines the AR(1) and Cox scores and needs a no-covariate AR(1) panel".into(),
                            ));
                        }
                        let gs = build_group_system(ds.t_periods, ds.p)?;
                        let systems = vec![arp_score_system(&ds, &gs), cox_score_system(&ds)];
                        let res = gmm_estimate(&systems, &DVector::zeros(1), opts)?;
                        (vec!["gamma1".into()], res, None, "gmm(arp+cox)".into())
                    }
                    "arp" => {
                        let gs = build_group_system(ds.t_periods, ds.p)?;
                        let d = ds.k + ds.p;
                        let (res, rep) = maximize(
                            |v| {
                                let pv = ParameterVector::unpack(v, ds.k, ds.p)?;
                                loglik_arp(&ds, &gs, &pv)
                            },
                            &DVector::zeros(d),
                            opts,
                        )?;
                        let mut names: Vec<String> =
                            (1..=ds.k).map(|j| format!("beta{j}")).collect();
                        names.extend((1..=ds.p).map(|d| format!("gamma{d}")));
                        (names, res, Some(rep.value), "arp".into())
                    }
                    "cox" => {
                        let (res, rep) =
                            maximize(|v| loglik_cox(&ds, v[0]), &DVector::zeros(1), opts)?;
                        (vec!["gamma1".into()], res, Some(rep.value), "cox".into())
                    }
                    _ => {
                        let (res, rep) = maximize(
                            |v| loglik_beta_only(&ds, v),
                            &DVector::zeros(ds.k),
                            opts,
                        )?;
                        let names: Vec<String> =
                            (1..=ds.k).map(|j| format!("beta{j}")).collect();
                        (names, res, Some(rep.value), "beta-only".into())
                    }
                }
            }
            "mnl" => {
                if gmm {
                    return Err(CmdError::Input("gmm does not support --model mnl".into()));
                }
                let ds = match load_csv(&data, Schema::Multinomial, 1).map_err(CmdError::from)? {
                    LoadedPanel::Multinomial(ds) => ds,
                    _ => unreachable!("multinomial schema yields a multinomial panel"),
                };
                if let Some(m) = cfg.m {
                    if m != ds.m {
                        return Err(CmdError::Input(format!(
                            "--M {m} conflicts with {} alternatives in the data",
                            ds.m
                        )));
                    }
                }
                let gs = build_group_system(ds.t_periods, 1)?;
                let d = MnlParameterVector::free_dim(ds.m, ds.k);
                let (res, rep) = maximize(
                    |v| {
                        let pv = MnlParameterVector::unpack(v, ds.m, ds.k)?;
                        loglik_mnl(&ds, &gs, &pv)
                    },
                    &DVector::zeros(d),
                    opts,
                )?;
                let mut names = Vec::new();
                for lag in 2..=ds.m {
                    for l in 2..=ds.m {
                        names.push(format!("gamma_{lag}{l}"));
                    }
                }
                for l in 2..=ds.m {
                    for j in 1..=ds.k {
                        names.push(format!("beta_{l}_{j}"));
                    }
                }
                (names, res, Some(rep.value), "mnl".into())
            }
            other => {
                return Err(CmdError::Input(format!("unknown model '{other}'")));
            }
        };

    let report = EstimateReport {
        model: model_label,
        params: param_rows(&names, &result.theta, &result.se),
        converged: result.converged,
        iterations: result.iterations,
        log_likelihood: loglik,
        gradient_norm: result.gradient_norm,
        j_statistic: result.j_statistic,
        j_dof: result.j_dof,
        j_p_value: result.j_p_value,
    };
    let json = serde_json::to_vec_pretty(&report).map_err(CmdError::from)?;
    let (json_name, txt_name) = if gmm {
        ("gmm.json", "gmm.txt")
    } else {
        ("estimate.json", "estimate.txt")
    };
    write_atomic(&out_dir, json_name, &json)?;
    write_atomic(&out_dir, txt_name, format_report_table(&report).as_bytes())?;
    print!("{}", format_report_table(&report));
    if report.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("numerical error: did not converge");
        Ok(ExitCode::from(2))
    }
}

fn cmd_sets(args: SetsArgs) -> CmdResult<ExitCode> {
    let gs = build_group_system(args.t, args.p)?;
    let mut lines = String::new();
    for g in &gs.groups {
        lines.push_str(&serde_json::to_string(&g.times).map_err(CmdError::from)?);
        lines.push('\n');
    }
    print!("{lines}");
    if let Some(dir) = args.out_dir {
        write_atomic(&dir, "sets.jsonl", lines.as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Oracle query file: a process plus named probability queries. Each query
/// asks for `Pr(event | given)` where both sides are lists of `[t, value]`
/// constraints on the outcome path.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleSpecFile {
    dgp: OracleDgp,
    queries: Vec<OracleQuery>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum OracleDgp {
    Binary(DgpSpec),
    Multinomial(MnlDgpSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleQuery {
    name: String,
    event: Vec<(i64, u8)>,
    #[serde(default)]
    given: Vec<(i64, u8)>,
}

#[derive(Debug, Serialize)]
struct OracleAnswer {
    name: String,
    probability: f64,
}

fn cmd_oracle(args: OracleArgs) -> CmdResult<ExitCode> {
    let text = fs::read_to_string(&args.spec)?;
    let spec: OracleSpecFile = serde_json::from_str(&text)?;
    let selected: Vec<&OracleQuery> = match &args.query {
        Some(name) => {
            let q = spec
                .queries
                .iter()
                .filter(|q| &q.name == name)
                .collect::<Vec<_>>();
            if q.is_empty() {
                return Err(CmdError::Input(format!("no query named '{name}'")));
            }
            q
        }
        None => spec.queries.iter().collect(),
    };
    let mut answers = Vec::new();
    for q in selected {
        let prob = match &spec.dgp {
            OracleDgp::Binary(dgp) => conditional_probability(
                dgp,
                |v| q.event.iter().all(|&(t, y)| v.at(t) == y),
                |v| q.given.iter().all(|&(t, y)| v.at(t) == y),
            )?,
            OracleDgp::Multinomial(dgp) => mnl_conditional_probability(
                dgp,
                |path| q.event.iter().all(|&(t, y)| path[t as usize] == y),
                |path| q.given.iter().all(|&(t, y)| path[t as usize] == y),
            )?,
        };
        println!("{}\t{prob:.17e}", q.name);
        answers.push(OracleAnswer {
            name: q.name.clone(),
            probability: prob,
        });
    }
    if let Some(dir) = args.out_dir {
        let json = serde_json::to_vec_pretty(&answers).map_err(CmdError::from)?;
        write_atomic(&dir, "oracle.json", &json)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult<ExitCode> {
    let text = fs::read_to_string(&args.config)?;
    let dgp: Dgp = serde_json::from_str(&text)?;
    fs::create_dir_all(&args.out_dir)?;
    let tmp = tempfile::NamedTempFile::new_in(&args.out_dir)?;
    match dgp {
        Dgp::Binary(d) => {
            let ds = simulate_panel(&d, args.n, args.seed)?;
            write_csv(&ds, tmp.path())?;
        }
        Dgp::Multinomial(d) => {
            let ds = simulate_panel_mnl(&d, args.n, args.seed)?;
            write_csv_mnl(&ds, tmp.path())?;
        }
    }
    tmp.persist(args.out_dir.join("data.csv"))
        .map_err(|e| CmdError::Input(e.to_string()))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_mc(args: McArgs) -> CmdResult<ExitCode> {
    let text = fs::read_to_string(&args.config)?;
    let cfg: McConfig = serde_json::from_str(&text)?;
    let result = run_monte_carlo(&cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    let tmp_rep = tempfile::NamedTempFile::new_in(&args.out_dir)?;
    write_replications_csv(&result.replications, tmp_rep.path())?;
    tmp_rep
        .persist(args.out_dir.join("replications.csv"))
        .map_err(|e| CmdError::Input(e.to_string()))?;
    let tmp_sum = tempfile::NamedTempFile::new_in(&args.out_dir)?;
    write_summary_csv(&result.summary, tmp_sum.path())?;
    tmp_sum
        .persist(args.out_dir.join("summary.csv"))
        .map_err(|e| CmdError::Input(e.to_string()))?;
    let table = format_summary_table(&result.summary);
    write_atomic(&args.out_dir, "summary.txt", table.as_bytes())?;
    print!("{table}");
    Ok(ExitCode::SUCCESS)
}
