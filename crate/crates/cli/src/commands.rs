//! Command-line driver. Exit codes: 0 success, 1 usage error, 2 error in a
//! model or diff (syntax, structure, or a model the engine rejects).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use vpmc_core::eliminate::{make_order, solve_expected_reward, solve_reachability, OrderHeuristic, RewardFactor};
use vpmc_core::families::{bench_family, gen_oscillator, gen_zeroconf, oscillator_sweep, BenchRow, OscillatorSpec};
use vpmc_core::incremental::{apply_diff, parametric_reachability_vpmc, reconfigured_reachability, EliminationCache};
use vpmc_core::model::{preprocess, validate, Vpmc};
use vpmc_core::oracle::to_decimal;
use vpmc_core::{MetricsCounter, RatFunc, RatValuation, Rational};

use crate::document::{parse_assignment, parse_diff, parse_model, print_diff, print_vpmc, DocError};

#[derive(Parser, Debug)]
#[command(name = "vpmc", version, about = "Exact parametric Markov chain reachability with incremental re-solving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a model, report row sums that are not identically 1, and
    /// check that preprocessing succeeds.
    Validate { model: PathBuf },
    /// Print the reachability probability (or expected reward) as a
    /// canonical rational function.
    Solve {
        model: PathBuf,
        /// Print the expected reward accumulated before reaching the target.
        #[arg(long)]
        reward: bool,
        #[arg(long, value_enum, default_value_t = OrderArg::Input)]
        order: OrderArg,
    },
    /// Solve a model, then apply each diff in turn, reusing the cache.
    Incremental {
        model: PathBuf,
        #[arg(required = true)]
        diffs: Vec<PathBuf>,
        /// Also track and print expected rewards.
        #[arg(long)]
        reward: bool,
        /// Print the final cache as comment lines.
        #[arg(long)]
        emit_cache: bool,
        /// Print reuse statistics and operation counts per step.
        #[arg(long)]
        stats: bool,
    },
    /// Evaluate the solution at a parameter point.
    Eval {
        model: PathBuf,
        /// Parameter value, `name=value` with an exact value such as `1/2`.
        #[arg(short = 'p', long = "param")]
        params: Vec<String>,
        #[arg(long)]
        reward: bool,
        /// Fractional digits of the decimal approximation.
        #[arg(long, default_value_t = 10)]
        decimal: usize,
    },
    /// Benchmark sweeps; prints CSV.
    #[command(subcommand)]
    Bench(Family),
    /// Print a generated model, or with `--diff` the diff to the next step.
    Gen {
        #[command(subcommand)]
        family: Family,
        #[arg(long, global = true)]
        diff: bool,
    },
}

#[derive(Subcommand, Debug)]
enum Family {
    /// Zeroconf with n probes (gen) or n = 1..=n-max (bench).
    Zeroconf {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        #[command(flatten)]
        output: BenchOutput,
    },
    /// Synchronising oscillators with refractory length r (gen) or
    /// r = r..=r-max (bench).
    Osc {
        /// Number of nodes.
        #[arg(long = "N")]
        nodes: usize,
        /// Number of phases.
        #[arg(long = "T")]
        phases: usize,
        #[arg(long, default_value = "1/10")]
        eps: String,
        /// Coupling probability, or `symbolic` for a parameter `mu`.
        #[arg(long, default_value = "symbolic")]
        mu: String,
        #[arg(long, default_value_t = 1)]
        r: usize,
        /// Last refractory length of a sweep (default T).
        #[arg(long)]
        r_max: Option<usize>,
        #[command(flatten)]
        output: BenchOutput,
    },
}

#[derive(clap::Args, Debug)]
struct BenchOutput {
    /// Parameter point for the `value_at_probe` column, `name=value`.
    #[arg(long = "probe")]
    probe: Vec<String>,
    /// Print numbers as decimals with this many fractional digits instead
    /// of exact fractions.
    #[arg(long)]
    decimal: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OrderArg {
    Input,
    MinDegree,
}

impl From<OrderArg> for OrderHeuristic {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Input => OrderHeuristic::InputOrder,
            OrderArg::MinDegree => OrderHeuristic::MinDegree,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Document(PathBuf, DocError),
    Model(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Document(..) | Failure::Model(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Model(m) => m.clone(),
            Failure::Document(path, e) => format!("{}:{e}", path.display()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn model_error(path: &Path, e: vpmc_core::Error) -> Failure {
    Failure::Model(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_model(path: &Path) -> std::result::Result<Vpmc<RatFunc>, Failure> {
    let raw = parse_model(&read(path)?).map_err(|e| Failure::Document(path.to_path_buf(), e))?;
    preprocess(&raw).map_err(|e| model_error(path, e))
}

fn valuation(assignments: &[String]) -> std::result::Result<RatValuation, Failure> {
    let mut v = RatValuation::new();
    for a in assignments {
        let (name, value) = parse_assignment(a).map_err(Failure::Usage)?;
        v.insert(&name, value);
    }
    Ok(v)
}

fn evaluate(f: &RatFunc, params: &[String], v: &RatValuation) -> std::result::Result<Rational, Failure> {
    let point = v.point(params).map_err(Failure::Usage)?;
    f.eval(&point)
        .ok_or_else(|| Failure::Model(format!("solution is undefined at {v}")))
}

fn number(x: &Rational, decimal: Option<usize>) -> String {
    match decimal {
        Some(d) => to_decimal(x, d),
        None => x.to_string(),
    }
}

/// Runs the command line `args` (including the program name) and returns
/// the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let mut buf = String::new();
    let result = dispatch(cli.command, &mut buf);
    let _ = out.write_all(buf.as_bytes());
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut String) -> Outcome {
    match command {
        Command::Validate { model } => cmd_validate(&model, out),
        Command::Solve { model, reward, order } => cmd_solve(&model, reward, order.into(), out),
        Command::Incremental {
            model,
            diffs,
            reward,
            emit_cache,
            stats,
        } => cmd_incremental(&model, &diffs, reward, emit_cache, stats, out),
        Command::Eval {
            model,
            params,
            reward,
            decimal,
        } => cmd_eval(&model, &params, reward, decimal, out),
        Command::Bench(family) => cmd_bench(family, out),
        Command::Gen { family, diff } => cmd_gen(family, diff, out),
    }
}

fn cmd_validate(path: &Path, out: &mut String) -> Outcome {
    let raw = parse_model(&read(path)?).map_err(|e| Failure::Document(path.to_path_buf(), e))?;
    let params = raw.pmc.params().to_vec();
    let report = validate(&raw.pmc);
    for row in report.warnings() {
        let absorbing = raw.pmc.row(row.state).is_empty();
        let what = if absorbing { "absorbing state" } else { "row" };
        writeln!(
            out,
            "warning: {what} `{}` sums to {}",
            raw.pmc.name(row.state),
            row.sum.display(&params)
        )
        .unwrap();
    }
    let vpmc = preprocess(&raw).map_err(|e| model_error(path, e))?;
    writeln!(
        out,
        "ok: {} states, {} transitions as written; {} states, {} transitions, {} volatile after preprocessing",
        raw.pmc.num_states(),
        raw.pmc.num_transitions(),
        vpmc.pmc.num_states(),
        vpmc.pmc.num_transitions(),
        vpmc.volatile.len()
    )
    .unwrap();
    Ok(())
}

fn cmd_solve(path: &Path, reward: bool, heuristic: OrderHeuristic, out: &mut String) -> Outcome {
    let vpmc = load_model(path)?;
    let order = make_order(&vpmc, heuristic);
    let counter = MetricsCounter::new();
    let f = if reward {
        solve_expected_reward(&vpmc, &order, RewardFactor::ExpectedVisits, &counter)
    } else {
        solve_reachability(&vpmc, &order, &counter)
    }
    .map_err(|e| model_error(path, e))?;
    writeln!(out, "{}", f.display(vpmc.pmc.params())).unwrap();
    Ok(())
}

fn print_step(out: &mut String, step: usize, vpmc: &Vpmc<RatFunc>, value: &RatFunc, reward: &Option<RatFunc>) {
    let params = vpmc.pmc.params();
    writeln!(out, "step {step}: {}", value.display(params)).unwrap();
    if let Some(r) = reward {
        writeln!(out, "step {step} reward: {}", r.display(params)).unwrap();
    }
}

fn print_cache(out: &mut String, vpmc: &Vpmc<RatFunc>, cache: &EliminationCache<RatFunc>) {
    let pmc = &vpmc.pmc;
    let params = pmc.params();
    let name = |s| pmc.name(s).to_string();
    let order: Vec<String> = cache.order.sequence().iter().map(|&s| name(s)).collect();
    writeln!(out, "# order: {}", order.join(", ")).unwrap();
    let vol: Vec<String> = cache.volatile.iter().map(|&s| name(s)).collect();
    writeln!(out, "# volatile: {}", vol.join(", ")).unwrap();
    if cache.stale {
        writeln!(out, "# stale: the next reconfiguration is solved from scratch").unwrap();
    }
    for (a, b, w) in cache.partial.entries() {
        writeln!(out, "# partial {} -> {} : {}", name(a), name(b), w.display(params)).unwrap();
    }
    for ((e, a, b), w) in &cache.map {
        writeln!(out, "# map {} : {} -> {} : {}", name(*e), name(*a), name(*b), w.display(params)).unwrap();
    }
    for (s, w) in &cache.partial_reward {
        writeln!(out, "# partial reward {} : {}", name(*s), w.display(params)).unwrap();
    }
    for ((e, s), w) in &cache.reward_map {
        writeln!(out, "# reward map {} : {} : {}", name(*e), name(*s), w.display(params)).unwrap();
    }
}

fn cmd_incremental(
    path: &Path,
    diffs: &[PathBuf],
    with_rewards: bool,
    emit_cache: bool,
    stats: bool,
    out: &mut String,
) -> Outcome {
    let mut model = load_model(path)?;
    let counter = MetricsCounter::new();
    let order = make_order(&model, OrderHeuristic::InputOrder);
    let sol = parametric_reachability_vpmc(&model, &order, with_rewards, &counter).map_err(|e| model_error(path, e))?;
    print_step(out, 0, &model, &sol.value, &sol.reward);
    if stats {
        writeln!(out, "# ops {}", counter.snapshot()).unwrap();
    }
    let mut cache = sol.cache;
    for (k, dpath) in diffs.iter().enumerate() {
        let diff = parse_diff(&read(dpath)?, &model).map_err(|e| Failure::Document(dpath.clone(), e))?;
        let next = apply_diff(&model, &diff).map_err(|e| model_error(dpath, e))?;
        let before = counter.snapshot();
        let res = reconfigured_reachability(&model, &next, &cache, &counter).map_err(|e| model_error(dpath, e))?;
        print_step(out, k + 1, &next, &res.value, &res.reward);
        if stats {
            let s = &res.stats;
            writeln!(
                out,
                "# replayed {}, eliminated {}, flushed {}{}; ops {}",
                s.replayed.len(),
                s.eliminated.len(),
                s.flushed.len(),
                if s.fallback { ", solved from scratch" } else { "" },
                counter.snapshot() - before
            )
            .unwrap();
        }
        cache = res.cache;
        model = next;
    }
    if emit_cache {
        print_cache(out, &model, &cache);
    }
    Ok(())
}

fn cmd_eval(path: &Path, assignments: &[String], reward: bool, decimal: usize, out: &mut String) -> Outcome {
    let vpmc = load_model(path)?;
    let v = valuation(assignments)?;
    let params = vpmc.pmc.params();
    let order = make_order(&vpmc, OrderHeuristic::InputOrder);
    let counter = MetricsCounter::new();
    let f = solve_reachability(&vpmc, &order, &counter).map_err(|e| model_error(path, e))?;
    let x = evaluate(&f, params, &v)?;
    writeln!(out, "{x} ({})", to_decimal(&x, decimal)).unwrap();
    if reward {
        let g = solve_expected_reward(&vpmc, &order, RewardFactor::ExpectedVisits, &counter)
            .map_err(|e| model_error(path, e))?;
        let y = evaluate(&g, params, &v)?;
        writeln!(out, "reward {y} ({})", to_decimal(&y, decimal)).unwrap();
    }
    Ok(())
}

fn parse_rational(text: &str, what: &str) -> std::result::Result<Rational, Failure> {
    parse_assignment(&format!("{what}={text}"))
        .map(|(_, v)| v)
        .map_err(Failure::Usage)
}

fn osc_spec(nodes: usize, phases: usize, eps: &str, mu: &str, r: usize) -> std::result::Result<OscillatorSpec, Failure> {
    let spec = OscillatorSpec {
        nodes,
        phases,
        refractory: r,
        eps: parse_rational(eps, "eps")?,
        mu: if mu == "symbolic" { None } else { Some(parse_rational(mu, "mu")?) },
    };
    spec.check().map_err(Failure::Usage)?;
    Ok(spec)
}

fn write_csv(rows: &[BenchRow], params: &[String], output: &BenchOutput, out: &mut String) -> Outcome {
    let v = valuation(&output.probe)?;
    writeln!(out, "step,value_at_probe,ops_naive_cum,ops_incr_cum,ratio_percent").unwrap();
    for row in rows {
        let x = evaluate(&row.value, params, &v)?;
        writeln!(
            out,
            "{},{},{},{},{}",
            row.step,
            number(&x, output.decimal),
            row.ops_naive_cum,
            row.ops_incr_cum,
            number(&row.ratio_percent, output.decimal)
        )
        .unwrap();
    }
    Ok(())
}

fn with_default_probe(output: BenchOutput, defaults: &[&str]) -> BenchOutput {
    let mut probe: Vec<String> = defaults
        .iter()
        .filter(|d| {
            let name = d.split('=').next().unwrap_or("");
            !output.probe.iter().any(|p| p.split('=').next().map(str::trim) == Some(name))
        })
        .map(|d| d.to_string())
        .collect();
    probe.extend(output.probe);
    BenchOutput {
        probe,
        decimal: output.decimal,
    }
}

fn cmd_bench(family: Family, out: &mut String) -> Outcome {
    match family {
        Family::Zeroconf { n_max, output, .. } => {
            if n_max == 0 {
                return Err(Failure::Usage("--n-max must be at least 1".into()));
            }
            let (initial, _) = gen_zeroconf(1);
            let diffs: Vec<_> = (1..n_max).map(vpmc_core::families::zeroconf_diff).collect();
            let rows = bench_family(&initial, &diffs, 1).map_err(|e| Failure::Model(e.to_string()))?;
            let output = with_default_probe(output, &["p=1/2", "q=1/2"]);
            write_csv(&rows, initial.pmc.params(), &output, out)
        }
        Family::Osc {
            nodes,
            phases,
            eps,
            mu,
            r,
            r_max,
            output,
        } => {
            let spec = osc_spec(nodes, phases, &eps, &mu, r)?;
            let r_max = r_max.unwrap_or(phases);
            if r_max < r || r_max > phases {
                return Err(Failure::Usage(format!("--r-max must lie in {r}..={phases}")));
            }
            let (models, diffs) = oscillator_sweep(&spec).map_err(|e| Failure::Model(e.to_string()))?;
            let rows = bench_family(&models[0], &diffs[..r_max - r], r).map_err(|e| Failure::Model(e.to_string()))?;
            let output = with_default_probe(output, &["mu=1/2"]);
            write_csv(&rows, models[0].pmc.params(), &output, out)
        }
    }
}

fn cmd_gen(family: Family, diff: bool, out: &mut String) -> Outcome {
    let (model, next) = match family {
        Family::Zeroconf { n, .. } => {
            if n == 0 {
                return Err(Failure::Usage("--n must be at least 1".into()));
            }
            gen_zeroconf(n)
        }
        Family::Osc {
            nodes,
            phases,
            eps,
            mu,
            r,
            ..
        } => gen_oscillator(&osc_spec(nodes, phases, &eps, &mu, r)?).map_err(|e| Failure::Model(e.to_string()))?,
    };
    if diff {
        out.push_str(&print_diff(&next, model.pmc.params()));
    } else {
        out.push_str(&print_vpmc(&model));
    }
    Ok(())
}
