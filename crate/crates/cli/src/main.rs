//! `bellkit`: validate tuples, decide locality and order, bound key rates,
//! and simulate raw-key protocols. JSON on stdout unless `--out` is given.
//!
//! Exit codes: 0 success (including negative verdicts), 2 usage or input
//! errors, 3 numerical failures.

mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bellkit_core::key_rates::{rate_report, threshold, RateReport};
use bellkit_core::local_polytope::{is_local, local_fraction};
use bellkit_core::monotones::{best_chsh, select_inputs, NuMap, SelectionStrategy};
use bellkit_core::protocol::{
    analytic_joint, correlator_of, run_protocol, run_protocol_traced, ProtocolSpec, TraceRow,
};
use bellkit_core::scenario::{make_theta_family, DistributionTuple, DEFAULT_TOL};
use bellkit_core::transforms::{check_order, OrderVerdict};
use bellkit_core::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "bellkit", version, about = "Bell nonlocality and device-independent key-rate toolkit")]
struct Cli {
    /// Feasibility / validation tolerance.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check nonnegativity, normalization and no-signaling.
    Validate { file: PathBuf },
    /// CHSH value S, best sign pattern and the monotone N.
    Chsh { file: PathBuf },
    /// Decide Bell locality with a certificate.
    Local {
        file: PathBuf,
        /// Also report the local fraction.
        #[arg(long)]
        fraction: bool,
    },
    /// Decide whether FILE can be turned into TARGET by wirings and local mixing.
    Order { file: PathBuf, target: PathBuf },
    /// Key-rate report.
    Rates { file: PathBuf },
    /// Key-rate report over the one-parameter family.
    ThetaSweep {
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
        to: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Monte Carlo run of a raw-key protocol.
    Simulate {
        file: PathBuf,
        #[arg(long, value_enum)]
        protocol: ProtocolKind,
        /// Position of the single minus sign of nu, as "x,y".
        #[arg(long, default_value = "1,1")]
        nu: String,
        #[arg(long, default_value_t = 0)]
        xi: usize,
        #[arg(long, default_value_t = 0)]
        zeta: usize,
        /// Target tuple whose order certificate drives the lemma protocol.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        x: usize,
        #[arg(long, default_value_t = 0)]
        y: usize,
        #[arg(long, default_value_t = 1_000_000)]
        rounds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write a per-round CSV trace here (small runs only).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// The value of N above which the key-rate lower bound is positive.
    Threshold,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ProtocolKind {
    MeasureAndMask,
    NuMasked,
    Lemma,
}

/// Failure of an invocation, with its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_tuple(path: &Path) -> CliResult<DistributionTuple> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    DistributionTuple::from_json(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn parse_nu(text: &str) -> CliResult<NuMap> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let parsed: Vec<usize> = parts.iter().filter_map(|p| p.parse().ok()).collect();
    if parts.len() != 2 || parsed.len() != 2 {
        return Err(Failure::Usage(format!("--nu expects \"x,y\", got {text:?}")));
    }
    Ok(NuMap::with_minus_at(parsed[0], parsed[1])?)
}

fn grid(from: f64, to: f64, steps: usize) -> CliResult<Vec<f64>> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(Failure::Usage("sweep needs finite bounds and at least one step".into()));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    Ok((0..steps).map(|i| from + (to - from) * i as f64 / (steps - 1) as f64).collect())
}

const SWEEP_HEADER: &str = "theta,S,N_tilde,I,eve_bound,dw_lower,g_of_N";

fn sweep_rows(thetas: &[f64]) -> CliResult<Vec<(f64, RateReport)>> {
    thetas.iter().map(|&t| Ok((t, rate_report(&make_theta_family(t, false))?))).collect()
}

fn trace_csv(rows: &[TraceRow]) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut out = String::from("round,k,x,y,e,u,v,a,b\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.round,
            opt(r.k.map(|k| k.to_string())),
            r.x,
            r.y,
            opt(r.e.map(|e| e.to_string())),
            r.u,
            r.v,
            r.a,
            r.b
        );
    }
    out
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> CliResult<String> {
    if !(cli.tol > 0.0 && cli.tol < 1.0) {
        return Err(Failure::Usage(format!("--tol must lie in (0, 1), got {}", cli.tol)));
    }
    match &cli.command {
        Command::Validate { file } => Ok(output::to_json(&read_tuple(file)?.validate(cli.tol))?),
        Command::Chsh { file } => {
            let p = read_tuple(file)?;
            let (restricted, alice, bob) = if p.scenario().m() == 2 && p.scenario().n() == 2 {
                (p.clone(), vec![0, 1], vec![0, 1])
            } else {
                let sel = select_inputs(&p, SelectionStrategy::MaxChsh)?;
                (sel.restricted, sel.alice, sel.bob)
            };
            let (s, nu) = best_chsh(&restricted)?;
            Ok(output::to_json(&json!({
                "S": s,
                "N_tilde": (s - 2.0).max(0.0),
                "nu": nu.table(),
                "alice_inputs": alice,
                "bob_inputs": bob,
            }))?)
        }
        Command::Local { file, fraction } => {
            let p = read_tuple(file)?;
            let mut v = serde_json::to_value(is_local(&p, cli.tol)?.to_certificate())?;
            if *fraction {
                v["local_fraction"] = json!(local_fraction(&p)?);
            }
            Ok(output::to_json(&v)?)
        }
        Command::Order { file, target } => {
            let (p, q) = (read_tuple(file)?, read_tuple(target)?);
            let v = match check_order(&p, &q, cli.tol)? {
                OrderVerdict::Feasible(cert) => json!({"feasible": true, "certificate": cert.to_file()}),
                OrderVerdict::Infeasible(w) => json!({
                    "feasible": false,
                    "witness": {
                        "bell_functional": w.bell_functional.nested(),
                        "value": w.value,
                        "max_achievable": w.max_achievable,
                        "infeasibility": w.infeasibility,
                    }
                }),
            };
            Ok(output::to_json(&v)?)
        }
        Command::Rates { file } => Ok(output::to_json(&rate_report(&read_tuple(file)?)?)?),
        Command::ThetaSweep { from, to, steps, csv } => {
            let rows = sweep_rows(&grid(*from, *to, *steps)?)?;
            if *csv {
                let mut out = format!("{SWEEP_HEADER}\n");
                for (t, r) in rows {
                    let cells = [t, r.s, r.n_tilde, r.mutual_info, r.eve_bound, r.dw_lower, r.g_of_n].map(output::cell);
                    let _ = writeln!(out, "{}", cells.join(","));
                }
                Ok(out)
            } else {
                let list: Vec<Value> = rows
                    .into_iter()
                    .map(|(t, r)| {
                        json!({
                            "theta": t, "S": r.s, "N_tilde": r.n_tilde, "I": r.mutual_info,
                            "eve_bound": r.eve_bound, "dw_lower": r.dw_lower, "g_of_N": r.g_of_n,
                        })
                    })
                    .collect();
                Ok(output::to_json(&list)?)
            }
        }
        Command::Simulate { file, protocol, nu, xi, zeta, target, x, y, rounds, seed, trace } => {
            let p = read_tuple(file)?;
            let spec = match protocol {
                ProtocolKind::MeasureAndMask => ProtocolSpec::MeasureAndMask { xi: *xi, zeta: *zeta },
                ProtocolKind::NuMasked => ProtocolSpec::NuMasked { nu: parse_nu(nu)? },
                ProtocolKind::Lemma => {
                    let path =
                        target.as_ref().ok_or_else(|| Failure::Usage("--protocol lemma needs --target".into()))?;
                    match check_order(&p, &read_tuple(path)?, cli.tol)? {
                        OrderVerdict::Feasible(certificate) => ProtocolSpec::WiringLemma { certificate, x: *x, y: *y },
                        OrderVerdict::Infeasible(_) => {
                            return Err(Failure::Usage("target is not reachable from the input tuple".into()))
                        }
                    }
                }
            };
            let result = match trace {
                Some(path) => {
                    let (result, rows) = run_protocol_traced(&p, &spec, *rounds, *seed)?;
                    write_file(path, &trace_csv(&rows))?;
                    result
                }
                None => run_protocol(&p, &spec, *rounds, *seed)?,
            };
            let exact = analytic_joint(&p, &spec)?;
            let mut v = serde_json::to_value(&result)?;
            v["analytic_joint"] = json!(exact);
            if p.scenario().is_pm1() {
                v["analytic_correlator"] = json!(correlator_of(p.scenario(), &exact));
            }
            v["tv_distance"] = json!(result.tv_distance(&exact));
            Ok(output::to_json(&v)?)
        }
        Command::Threshold => Ok(output::to_json(&json!({ "n_star": threshold() }))?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = run(&cli).and_then(|text| match &cli.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
