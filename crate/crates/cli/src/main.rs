use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use precursor_core::adversarial::{opt_det, opt_rand};
use precursor_core::experiments::{Cell, ExperimentConfig, ExperimentRegistry, NRange, Table};
use precursor_core::full_history::{emit_ilp, m2_opt};
use precursor_core::monte_carlo::MonteCarlo;
use precursor_core::numeric::format_significant;
use precursor_core::random_order::{bellman_solve, f_beta, robustness_g, threshold_success_exact};
use precursor_core::PrecursorError;

const EXACT_DIGITS: usize = 12;

#[derive(Parser)]
#[command(
    name = "precursor",
    version,
    about = "Secretary problem with a precursor signal"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a closed-form or exactly computed value.
    Exact(ExactArgs),
    /// Run a named experiment and write its table.
    Experiment(ExperimentArgs),
    /// Write the full-history ILP in LP format.
    EmitIlp(EmitIlpArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    RandomOpt,
    RandomThreshold,
    Robustness,
    AdvRand,
    AdvDet,
    M2,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha_hat: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    name: String,
    /// Horizon, or an inclusive range `a..b`.
    #[arg(long)]
    n: Option<String>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    alpha_hats: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    rhos: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    cs: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EmitIlpArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

struct Flags<'a>(&'a ExactArgs);

impl Flags<'_> {
    fn present(&self) -> Vec<(&'static str, bool)> {
        let a = self.0;
        vec![
            ("n", a.n.is_some()),
            ("alpha", a.alpha.is_some()),
            ("k", a.k.is_some()),
            ("alpha-hat", a.alpha_hat.is_some()),
            ("beta", a.beta.is_some()),
        ]
    }

    /// Rejects any flag outside `allowed`.
    fn only(&self, model: &str, allowed: &[&str]) -> anyhow::Result<()> {
        for (name, set) in self.present() {
            if set && !allowed.contains(&name) {
                return Err(usage(format!("--{name} does not apply to model {model}")));
            }
        }
        Ok(())
    }
}

fn need<T: Copy>(value: Option<T>, flag: &str, model: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| usage(format!("model {model} requires --{flag}")))
}

fn number(x: f64) -> Value {
    let rendered = format_significant(x, EXACT_DIGITS);
    serde_json::from_str(&rendered).unwrap_or(Value::String(rendered))
}

fn exact(args: &ExactArgs) -> anyhow::Result<()> {
    let flags = Flags(args);
    let name = args
        .model
        .to_possible_value()
        .expect("named")
        .get_name()
        .to_string();
    let model = name.as_str();
    let mut out = Map::new();
    out.insert("model".into(), json!(model));
    let value = match args.model {
        Model::RandomOpt | Model::AdvRand | Model::AdvDet => {
            flags.only(model, &["n", "alpha"])?;
            let n = need(args.n, "n", model)?;
            let alpha = need(args.alpha, "alpha", model)?;
            out.insert("n".into(), json!(n));
            out.insert("alpha".into(), number(alpha));
            match args.model {
                Model::RandomOpt => {
                    let sol = bellman_solve(n, alpha)?;
                    out.insert("k_n".into(), json!(sol.k_n));
                    sol.opt_n
                }
                Model::AdvRand => opt_rand(n, alpha)?,
                _ => opt_det(n, alpha)?,
            }
        }
        Model::RandomThreshold => {
            flags.only(model, &["n", "alpha", "k"])?;
            let n = need(args.n, "n", model)?;
            let alpha = need(args.alpha, "alpha", model)?;
            let k = need(args.k, "k", model)?;
            out.insert("n".into(), json!(n));
            out.insert("alpha".into(), number(alpha));
            out.insert("k".into(), json!(k));
            threshold_success_exact(n, alpha, k)?
        }
        Model::Robustness => {
            flags.only(model, &["alpha", "alpha-hat", "beta"])?;
            let alpha = need(args.alpha, "alpha", model)?;
            out.insert("alpha".into(), number(alpha));
            match (args.alpha_hat, args.beta) {
                (Some(alpha_hat), None) => {
                    out.insert("alpha_hat".into(), number(alpha_hat));
                    robustness_g(alpha, alpha_hat)?
                }
                (None, Some(beta)) => {
                    out.insert("beta".into(), number(beta));
                    f_beta(alpha, beta)?
                }
                _ => {
                    return Err(usage(
                        "model robustness takes exactly one of --alpha-hat and --beta",
                    ))
                }
            }
        }
        Model::M2 => {
            flags.only(model, &["n"])?;
            let n = need(args.n, "n", model)?;
            let sol = m2_opt(n)?;
            out.insert("n".into(), json!(n));
            out.insert("z_star".into(), json!(sol.z_star_exact().to_string()));
            sol.z_star_f64()
        }
    };
    if args.json {
        out.insert("value".into(), number(value));
        println!("{}", Value::Object(out));
    } else {
        println!("{}", format_significant(value, EXACT_DIGITS));
    }
    Ok(())
}

fn cell_json(cell: &Cell) -> Value {
    match cell {
        Cell::Float(_) => {
            let rendered = cell.render();
            serde_json::from_str(&rendered).unwrap_or(Value::String(rendered))
        }
        Cell::Int(v) => json!(v),
        Cell::Text(s) => json!(s),
    }
}

fn table_json(name: &str, table: &Table) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = table
                .header
                .iter()
                .zip(row)
                .map(|(h, c)| (h.to_string(), cell_json(c)))
                .collect();
            Value::Object(obj)
        })
        .collect();
    json!({ "experiment": name, "header": table.header, "rows": rows })
}

fn emit(out: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn experiment(args: &ExperimentArgs) -> anyhow::Result<()> {
    let registry = ExperimentRegistry::new();
    if registry.get(&args.name).is_err() {
        let known: Vec<_> = registry.names().collect();
        bail!(usage(format!(
            "unknown experiment `{}`; expected one of {}",
            args.name,
            known.join(", ")
        )));
    }
    let n = match &args.n {
        Some(text) => Some(text.parse::<NRange>().map_err(|e| usage(e.to_string()))?),
        None => None,
    };
    let cfg = ExperimentConfig {
        n,
        trials: args.trials,
        seed: args.seed,
        alpha: args.alpha,
        alphas: args.alphas.clone(),
        alpha_hats: args.alpha_hats.clone(),
        rhos: args.rhos.clone(),
        cs: args.cs.clone(),
        monte_carlo: MonteCarlo::from_env()?,
    };
    let table = registry.run(&args.name, &cfg)?;
    let text = if args.json {
        let mut s = serde_json::to_string_pretty(&table_json(&args.name, &table))?;
        s.push('\n');
        s
    } else {
        table.to_csv()
    };
    emit(args.out.as_ref(), &text)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<PrecursorError>() {
        Some(PrecursorError::Size(_)) => 3,
        Some(PrecursorError::Domain(_) | PrecursorError::Unknown { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Exact(args) => exact(args),
        Command::Experiment(args) => experiment(args),
        Command::EmitIlp(args) => emit_ilp(args.n, args.m)
            .map_err(Into::into)
            .and_then(|lp| emit(args.out.as_ref(), &lp)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
