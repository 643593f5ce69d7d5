//! Command-line frontend for the revealed price preference toolkit.
//!
//! One subcommand per pipeline stage, with file-based handoff: `patches`
//! and `types` can cache their (expensive) outputs as JSON for reuse by
//! `test`, `welfare`, and `ci`. Every report is a JSON object that
//! echoes the numeric configuration for provenance.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use revpref::afriat::{build_augmented_utility, price_preference_query};
use revpref::counterfactual::{confidence_interval, welfare_bounds, CiConfig};
use revpref::data::{load_deterministic, load_stochastic, write_stochastic};
use revpref::patches::enumerate_patches;
use revpref::relations::{check_gapp, check_garp, robustness_margin};
use revpref::simulate::{gen_mixture, gen_quasilinear, MixtureSpec, QuasilinearSpec};
use revpref::stochastic::{
    bootstrap_pvalue, compute_jn, estimate_pi, BootstrapConfig, BoundaryPolicy,
};
use revpref::types::{enumerate_types_with_cap, type_indicator, DEFAULT_TYPE_CAP};
use revpref::{OmegaSpec, PatchLayout, StochasticDataset, TypeMatrix};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "revpref",
    version,
    about = "Revealed price preference analysis: axiom checks, stochastic rationality tests, and welfare bounds"
)]
struct Cli {
    /// Worker thread cap (falls back to REVPREF_THREADS, then all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON report to this path instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// GARP and GAPP verdicts, violation witnesses, and the local
    /// robustness margin for a single-consumer panel (wide CSV)
    Check {
        /// wide CSV with header p1..pL,x1..xL (optional label column)
        #[arg(long)]
        input: PathBuf,
    },
    /// Enumerate the patches of each unit-expenditure budget plane
    Patches {
        /// price file with header period,p1..pL
        #[arg(long)]
        prices: PathBuf,
    },
    /// Enumerate GARP-consistent rational types over a patch layout
    Types {
        /// price file with header period,p1..pL
        #[arg(long)]
        prices: Option<PathBuf>,
        /// cached layout JSON from `patches`
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TYPE_CAP)]
        type_cap: usize,
        /// include the full 0/1 matrix in the report (can be large)
        #[arg(long)]
        full_matrix: bool,
    },
    /// Stochastic rationality test with a tightened bootstrap p-value
    Test {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, default_value_t = 1000)]
        replications: usize,
        /// tightening parameter; default sqrt(log N / N)
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `identity` or `diag:<file>` with one positive weight per row
        #[arg(long, default_value = "identity")]
        omega: String,
    },
    /// Partially identified welfare bounds for a pair of periods
    Welfare {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// pair of period keys (or 1-based indices), e.g. --pair 1975,1976
        #[arg(long)]
        pair: String,
        #[arg(long, default_value = "identity")]
        omega: String,
    },
    /// Confidence interval for the revealed-better-off proportion by
    /// test inversion
    Ci {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long)]
        pair: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
        #[arg(long, default_value_t = 1000)]
        replications: usize,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "identity")]
        omega: String,
    },
    /// Build the rationalizing augmented utility and evaluate it
    Eval {
        /// wide CSV with header p1..pL,x1..xL
        #[arg(long)]
        input: PathBuf,
        /// bundle to evaluate, comma separated
        #[arg(long)]
        bundle: Option<String>,
        /// expenditure paired with --bundle
        #[arg(long)]
        expenditure: Option<f64>,
    },
    /// Generate synthetic cross-sections compatible with `test`
    Simulate {
        #[arg(long, value_enum)]
        dgp: Dgp,
        #[arg(long)]
        out_choices: PathBuf,
        #[arg(long)]
        out_prices: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// households per period
        #[arg(long, default_value_t = 100)]
        households: usize,
        // quasilinear parameters
        #[arg(long, default_value_t = 3)]
        goods: usize,
        #[arg(long, default_value_t = 4)]
        periods: usize,
        #[arg(long, default_value_t = 0.5)]
        price_min: f64,
        #[arg(long, default_value_t = 2.0)]
        price_max: f64,
        #[arg(long, default_value_t = 1.0)]
        dirichlet: f64,
        // mixture parameters
        /// cached layout JSON (mixture only)
        #[arg(long)]
        layout: Option<PathBuf>,
        /// cached types JSON (mixture only)
        #[arg(long)]
        types: Option<PathBuf>,
        /// type weights, comma separated (mixture only)
        #[arg(long)]
        nu: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        expenditure_mu: f64,
        #[arg(long, default_value_t = 0.25)]
        expenditure_sigma: f64,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// choices file with header period,household,x1..xL
    #[arg(long)]
    choices: PathBuf,
    /// price file with header period,p1..pL
    #[arg(long)]
    prices: PathBuf,
    /// cached layout JSON from `patches`
    #[arg(long)]
    layout: Option<PathBuf>,
    /// cached types JSON from `types`
    #[arg(long)]
    types: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TYPE_CAP)]
    type_cap: usize,
    /// policy for choices normalizing onto another budget plane
    #[arg(long, value_enum, default_value_t = BoundaryArg::Drop)]
    boundary: BoundaryArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Drop,
    Abort,
}

impl From<BoundaryArg> for BoundaryPolicy {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Drop => BoundaryPolicy::Drop,
            BoundaryArg::Abort => BoundaryPolicy::Abort,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Dgp {
    Quasilinear,
    Mixture,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("REVPREF_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(&cli) {
        Ok(report) => {
            let rendered = serde_json::to_string_pretty(&report).expect("report serializes");
            match &cli.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, rendered + "\n") {
                        eprintln!("error: cannot write report: {e}");
                        return ExitCode::from(1);
                    }
                }
                None => println!("{rendered}"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<revpref::Error>()
                .map(|err| err.exit_code())
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Check { input } => cmd_check(input),
        Command::Patches { prices } => cmd_patches(prices),
        Command::Types {
            prices,
            layout,
            type_cap,
            full_matrix,
        } => cmd_types(prices.as_deref(), layout.as_deref(), *type_cap, *full_matrix),
        Command::Test {
            pipeline,
            replications,
            tau,
            seed,
            omega,
        } => cmd_test(pipeline, *replications, *tau, *seed, omega),
        Command::Welfare {
            pipeline,
            pair,
            omega,
        } => cmd_welfare(pipeline, pair, omega),
        Command::Ci {
            pipeline,
            pair,
            alpha,
            grid_step,
            replications,
            tau,
            seed,
            omega,
        } => cmd_ci(
            pipeline,
            pair,
            *alpha,
            *grid_step,
            *replications,
            *tau,
            *seed,
            omega,
        ),
        Command::Eval {
            input,
            bundle,
            expenditure,
        } => cmd_eval(input, bundle.as_deref(), *expenditure),
        Command::Simulate {
            dgp,
            out_choices,
            out_prices,
            seed,
            households,
            goods,
            periods,
            price_min,
            price_max,
            dirichlet,
            layout,
            types,
            nu,
            expenditure_mu,
            expenditure_sigma,
        } => cmd_simulate(SimulateArgs {
            dgp: *dgp,
            out_choices,
            out_prices,
            seed: *seed,
            households: *households,
            goods: *goods,
            periods: *periods,
            price_min: *price_min,
            price_max: *price_max,
            dirichlet: *dirichlet,
            layout: layout.as_deref(),
            types: types.as_deref(),
            nu: nu.as_deref(),
            expenditure_mu: *expenditure_mu,
            expenditure_sigma: *expenditure_sigma,
        }),
    }
}

fn witness_json(witness: &Option<revpref::CycleWitness>) -> Value {
    match witness {
        Some(w) => json!({ "sequence": w.sequence, "strict_edge_at": w.strict_edge_at }),
        None => Value::Null,
    }
}

fn cmd_check(input: &Path) -> Result<Value> {
    let data = load_deterministic(input)?;
    let garp = check_garp(&data);
    let gapp = check_gapp(&data);
    let robustness = match robustness_margin(&data) {
        Ok(m) => json!({ "min_gap": m.min_gap, "bundle_norm": m.bundle_norm }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    Ok(json!({
        "command": "check",
        "version": VERSION,
        "input": input.display().to_string(),
        "observations": data.len(),
        "goods": data.dim(),
        "garp": { "passes": garp.passes, "witness": witness_json(&garp.witness) },
        "gapp": { "passes": gapp.passes, "witness": witness_json(&gapp.witness) },
        "robustness": robustness,
    }))
}

/// Reads the period keys and price vectors of a `period,p1..pL` file.
fn load_price_file(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("period") || headers.len() < 2 {
        bail!("price file header must be period,p1..pL");
    }
    let dim = headers.len() - 1;
    let mut keys = Vec::new();
    let mut prices = Vec::new();
    for record in reader.records() {
        let record = record?;
        keys.push(record[0].to_string());
        let p: Vec<f64> = (0..dim)
            .map(|i| {
                record[i + 1]
                    .parse::<f64>()
                    .map_err(|e| anyhow!("bad price: {e}"))
            })
            .collect::<Result<_>>()?;
        prices.push(p);
    }
    Ok((keys, prices))
}

fn cmd_patches(prices_path: &Path) -> Result<Value> {
    let (keys, prices) = load_price_file(prices_path)?;
    let layout = enumerate_patches(&prices)?;
    let counts: Vec<usize> = (0..layout.budgets())
        .map(|t| layout.patch_count(t))
        .collect();
    Ok(json!({
        "command": "patches",
        "version": VERSION,
        "layout_id": layout.id(),
        "periods": keys,
        "budgets": layout.budgets(),
        "goods": layout.dim(),
        "counts": counts,
        "total_rows": layout.total_rows(),
        "duplicate_classes": layout.class_members(),
        "layout": serde_json::to_value(&layout)?,
    }))
}

fn load_layout_json(path: &Path) -> Result<PatchLayout> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)?;
    let inner = value.get("layout").cloned().unwrap_or(value);
    serde_json::from_value(inner).context("not a patch layout")
}

fn load_types_json(path: &Path) -> Result<TypeMatrix> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)?;
    let inner = value.get("types").cloned().unwrap_or(value);
    serde_json::from_value(inner).context("not a type matrix")
}

fn cmd_types(
    prices: Option<&Path>,
    layout: Option<&Path>,
    cap: usize,
    full_matrix: bool,
) -> Result<Value> {
    let layout = match (layout, prices) {
        (Some(path), _) => load_layout_json(path)?,
        (None, Some(prices_path)) => {
            let (_, prices) = load_price_file(prices_path)?;
            enumerate_patches(&prices)?
        }
        (None, None) => bail!("either --prices or --layout is required"),
    };
    let types = enumerate_types_with_cap(&layout, cap)?;
    let assignments: Vec<Vec<u16>> = (0..types.h())
        .map(|j| types.assignment(j).to_vec())
        .collect();
    let mut report = json!({
        "command": "types",
        "version": VERSION,
        "layout_id": types.layout_id(),
        "h": types.h(),
        "rows": types.rows(),
        "type_cap": cap,
        "assignments": assignments,
        "types": serde_json::to_value(&types)?,
    });
    if full_matrix {
        report["matrix"] = serde_json::to_value(types.dense())?;
    }
    Ok(report)
}

struct Pipeline {
    data: StochasticDataset,
    layout: PatchLayout,
    types: TypeMatrix,
}

fn load_pipeline(args: &PipelineArgs) -> Result<Pipeline> {
    let data = load_stochastic(&args.choices, &args.prices)?;
    let layout = match &args.layout {
        Some(path) => {
            let layout = load_layout_json(path)?;
            if layout.budgets() != data.len() {
                bail!(
                    "cached layout covers {} budgets but the data has {} periods",
                    layout.budgets(),
                    data.len()
                );
            }
            for t in 0..data.len() {
                let cached = layout.prices(t);
                let seen = &data.period(t).prices;
                if cached.len() != seen.len()
                    || cached.iter().zip(seen).any(|(a, b)| (a - b).abs() > 1e-12)
                {
                    bail!("cached layout prices disagree with the price file at period {t}");
                }
            }
            layout
        }
        None => enumerate_patches(&data.price_vectors())?,
    };
    let types = match &args.types {
        Some(path) => {
            let types = load_types_json(path)?;
            if types.layout_id() != layout.id() {
                bail!("cached type matrix was built from a different layout");
            }
            types
        }
        None => enumerate_types_with_cap(&layout, args.type_cap)?,
    };
    Ok(Pipeline {
        data,
        layout,
        types,
    })
}

fn parse_omega(spec: &str, rows: usize) -> Result<OmegaSpec> {
    if spec == "identity" {
        return Ok(OmegaSpec::Identity);
    }
    if let Some(path) = spec.strip_prefix("diag:") {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read omega file {path}"))?;
        let weights: Vec<f64> = text
            .split([',', '\n', ' '])
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| anyhow!("bad omega entry: {e}"))
            })
            .collect::<Result<_>>()?;
        if weights.len() != rows {
            bail!("omega file has {} entries, expected {rows}", weights.len());
        }
        return Ok(OmegaSpec::Diagonal(weights));
    }
    bail!("--omega must be `identity` or `diag:<file>`")
}

fn resolve_pair(data: &StochasticDataset, pair: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = pair.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        bail!("--pair must be two comma-separated period keys");
    }
    let resolve = |token: &str| -> Result<usize> {
        if let Some(idx) = data.period_index(token) {
            return Ok(idx);
        }
        if let Ok(one_based) = token.parse::<usize>() {
            if one_based >= 1 && one_based <= data.len() {
                return Ok(one_based - 1);
            }
        }
        bail!("period {token:?} not found (use a period key or 1-based index)")
    };
    let a = resolve(parts[0])?;
    let b = resolve(parts[1])?;
    if a == b {
        bail!("--pair must name two distinct periods");
    }
    Ok((a, b))
}

fn nu_support(nu: &[f64]) -> Vec<Value> {
    nu.iter()
        .enumerate()
        .filter(|(_, &w)| w > 1e-12)
        .map(|(j, &w)| json!({ "type": j, "weight": w }))
        .collect()
}

fn cmd_test(
    args: &PipelineArgs,
    replications: usize,
    tau: Option<f64>,
    seed: u64,
    omega: &str,
) -> Result<Value> {
    let pipeline = load_pipeline(args)?;
    let omega_spec = parse_omega(omega, pipeline.types.rows())?;
    let config = BootstrapConfig {
        replications,
        tau,
        omega: omega_spec,
        seed,
        boundary: args.boundary.into(),
    };
    let result = bootstrap_pvalue(&pipeline.data, &pipeline.layout, &pipeline.types, &config)?;
    Ok(json!({
        "command": "test",
        "version": VERSION,
        "layout_id": pipeline.layout.id(),
        "h": pipeline.types.h(),
        "rows": pipeline.types.rows(),
        "total_n": result.total_n,
        "j_n": result.j_n,
        "rationalizable": result.rationalizable(),
        "p_value": result.p_value,
        "replications": result.replications,
        "tau": result.tau,
        "omega": result.omega,
        "seed": result.seed,
        "nu_support": nu_support(&result.nu_hat),
        "eta_hat": result.eta_hat,
        "dropped_on_boundary": result.dropped_on_boundary,
    }))
}

fn cmd_welfare(args: &PipelineArgs, pair: &str, omega: &str) -> Result<Value> {
    let pipeline = load_pipeline(args)?;
    let (t, t_prime) = resolve_pair(&pipeline.data, pair)?;
    let omega_spec = parse_omega(omega, pipeline.types.rows())?;
    let pi = estimate_pi(&pipeline.data, &pipeline.layout, args.boundary.into())?;
    let fit = compute_jn(&pi, &pipeline.types, &omega_spec)?;
    let used_projection = !fit.rationalizable();
    let target = if used_projection {
        fit.eta_hat.clone()
    } else {
        pi.stacked.clone()
    };
    let rho = type_indicator(&pipeline.types, &pipeline.layout, t, t_prime)?;
    let reversed = type_indicator(&pipeline.types, &pipeline.layout, t_prime, t)?;
    let bounds = welfare_bounds(&target, &pipeline.types, &rho, &reversed)?;
    Ok(json!({
        "command": "welfare",
        "version": VERSION,
        "layout_id": pipeline.layout.id(),
        "pair": [t, t_prime],
        "pair_keys": [pipeline.data.period(t).key, pipeline.data.period(t_prime).key],
        "j_n": fit.j_n,
        "used_projection": used_projection,
        "lower": bounds.lower,
        "upper": bounds.upper,
        "any_rationalization_upper": bounds.any_rationalization_upper,
        "nu_at_lower": bounds.nu_at_lower,
        "nu_at_upper": bounds.nu_at_upper,
        "omega": omega,
        "dropped_on_boundary": pi.dropped_on_boundary,
    }))
}

#[allow(clippy::too_many_arguments)]
fn cmd_ci(
    args: &PipelineArgs,
    pair: &str,
    alpha: f64,
    grid_step: f64,
    replications: usize,
    tau: Option<f64>,
    seed: u64,
    omega: &str,
) -> Result<Value> {
    let pipeline = load_pipeline(args)?;
    let (t, t_prime) = resolve_pair(&pipeline.data, pair)?;
    let omega_spec = parse_omega(omega, pipeline.types.rows())?;
    let rho = type_indicator(&pipeline.types, &pipeline.layout, t, t_prime)?;
    let config = CiConfig {
        alpha,
        grid_step,
        replications,
        tau,
        omega: omega_spec,
        seed,
        boundary: args.boundary.into(),
    };
    let ci = confidence_interval(
        &pipeline.data,
        &pipeline.layout,
        &pipeline.types,
        &rho,
        &config,
    )?;
    let per_theta: Vec<Value> = ci
        .per_theta
        .iter()
        .map(|d| {
            json!({
                "theta": d.theta,
                "j_n_theta": d.j_n_theta,
                "critical_value": d.critical_value,
                "p_value": d.p_value,
                "accepted": d.accepted,
                "infeasible": d.infeasible,
            })
        })
        .collect();
    Ok(json!({
        "command": "ci",
        "version": VERSION,
        "layout_id": pipeline.layout.id(),
        "pair": [t, t_prime],
        "pair_keys": [pipeline.data.period(t).key, pipeline.data.period(t_prime).key],
        "alpha": ci.alpha,
        "grid_step": grid_step,
        "replications": ci.replications,
        "tau": ci.tau,
        "seed": ci.seed,
        "interval": ci.interval.map(|(lo, hi)| json!([lo, hi])),
        "accepted": ci.accepted,
        "estimated_bounds": ci.estimated_bounds.map(|(lo, hi)| json!([lo, hi])),
        "per_theta": per_theta,
        "omega": omega,
    }))
}

fn cmd_eval(input: &Path, bundle: Option<&str>, expenditure: Option<f64>) -> Result<Value> {
    let data = load_deterministic(input)?;
    let utility = build_augmented_utility(&data)?;
    let observations: Vec<Value> = (0..data.len())
        .map(|t| {
            let u = utility.evaluate(data.bundle(t), data.expenditure(t))?;
            Ok(json!({ "index": t, "expenditure": data.expenditure(t), "utility": u }))
        })
        .collect::<Result<_>>()?;
    // price ranking of every ordered pair, per the closed relation
    let mut rankings = Vec::new();
    for t in 0..data.len() {
        for s in 0..data.len() {
            if t != s {
                let verdict = price_preference_query(&data, t, s)?;
                rankings.push(json!({
                    "pair": [t, s],
                    "ranking": serde_json::to_value(verdict)?,
                }));
            }
        }
    }
    let query = match bundle {
        Some(text) => {
            let x: Vec<f64> = text
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| anyhow!("bad bundle entry: {e}"))
                })
                .collect::<Result<_>>()?;
            let e = expenditure.ok_or_else(|| anyhow!("--expenditure is required with --bundle"))?;
            let u = utility.evaluate(&x, e)?;
            json!({ "bundle": x, "expenditure": e, "utility": u })
        }
        None => Value::Null,
    };
    Ok(json!({
        "command": "eval",
        "version": VERSION,
        "input": input.display().to_string(),
        "budget_constant": utility.budget_constant(),
        "observations": observations,
        "price_rankings": rankings,
        "query": query,
    }))
}

struct SimulateArgs<'a> {
    dgp: Dgp,
    out_choices: &'a Path,
    out_prices: &'a Path,
    seed: u64,
    households: usize,
    goods: usize,
    periods: usize,
    price_min: f64,
    price_max: f64,
    dirichlet: f64,
    layout: Option<&'a Path>,
    types: Option<&'a Path>,
    nu: Option<&'a str>,
    expenditure_mu: f64,
    expenditure_sigma: f64,
}

fn cmd_simulate(args: SimulateArgs) -> Result<Value> {
    let data = match args.dgp {
        Dgp::Quasilinear => {
            let spec = QuasilinearSpec {
                goods: args.goods,
                periods: args.periods,
                households: args.households,
                price_range: (args.price_min, args.price_max),
                dirichlet_alpha: args.dirichlet,
                seed: args.seed,
            };
            gen_quasilinear(&spec)?.data
        }
        Dgp::Mixture => {
            let layout_path = args
                .layout
                .ok_or_else(|| anyhow!("--layout is required for the mixture DGP"))?;
            let types_path = args
                .types
                .ok_or_else(|| anyhow!("--types is required for the mixture DGP"))?;
            let nu_text = args
                .nu
                .ok_or_else(|| anyhow!("--nu is required for the mixture DGP"))?;
            let layout = load_layout_json(layout_path)?;
            let types = load_types_json(types_path)?;
            let nu_star: Vec<f64> = nu_text
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| anyhow!("bad nu entry: {e}"))
                })
                .collect::<Result<_>>()?;
            let spec = MixtureSpec {
                types: &types,
                layout: &layout,
                nu_star,
                sample_sizes: vec![args.households; layout.budgets()],
                expenditure_log_mean: args.expenditure_mu,
                expenditure_log_sd: args.expenditure_sigma,
                seed: args.seed,
            };
            gen_mixture(&spec)?
        }
    };
    let choices_file = std::fs::File::create(args.out_choices)
        .with_context(|| format!("cannot create {}", args.out_choices.display()))?;
    let prices_file = std::fs::File::create(args.out_prices)
        .with_context(|| format!("cannot create {}", args.out_prices.display()))?;
    write_stochastic(&data, choices_file, prices_file)?;
    Ok(json!({
        "command": "simulate",
        "version": VERSION,
        "dgp": match args.dgp { Dgp::Quasilinear => "quasilinear", Dgp::Mixture => "mixture" },
        "seed": args.seed,
        "periods": data.len(),
        "households_per_period": data.periods().iter().map(|p| p.choices.len()).collect::<Vec<_>>(),
        "choices_file": args.out_choices.display().to_string(),
        "prices_file": args.out_prices.display().to_string(),
    }))
}
