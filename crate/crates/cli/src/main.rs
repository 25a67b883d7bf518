use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use shl_core::harness::experiments::{
    run_corollary_small_b, run_kernel_check, run_l2_stability, run_linear_decay, run_psik_stability,
    run_smoothing_check, run_steady_state, run_theorem_half_l, run_theorem_mth2, RunConfig, SigmaData,
};
use shl_core::harness::io::{write_report, write_rows};
use shl_core::harness::suite::{run_suite, CRITERIA};
use shl_core::harness::{log_times, Config, Report};
use shl_core::nonlinear::InitialDataSpec;
use shl_core::semigroup::HardyFlow;
use shl_core::{compute_exponents, Error, ExponentSet, ProblemParams};

#[derive(Parser, Debug)]
#[command(name = "shl", version, about = "Decay-rate experiments near the singular steady state of u_t = Δu + u^p")]
struct Cli {
    /// Config file with [problem], [grid], [time] and [experiment] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set time.t1=1e5. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, env = "SHL_OUTPUT_DIR", default_value = "shl-output", global = true)]
    output_dir: PathBuf,
    /// Worker threads for independent runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct Problem {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args, Debug, Clone, Copy)]
struct Bump {
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    r_lo: Option<f64>,
    #[arg(long)]
    r_hi: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum DataKind {
    PowerTail,
    SigmaTail,
    Annulus,
    PsiK,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print every exponent and constant for (n, p).
    Exponents(Problem),
    /// Integrate ψ_k and compare it with v_∞.
    SteadyState {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        r_max: Option<f64>,
    },
    /// Weighted sup decay of the linear flow.
    LinearDecay {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        ell: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
    },
    /// Decay of v_∞ - u for the chosen initial gap.
    NonlinearDecay {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, value_enum, default_value = "power-tail")]
        data: DataKind,
        #[arg(long)]
        ell: Option<f64>,
        #[arg(long)]
        k: Option<f64>,
        #[command(flatten)]
        bump: Bump,
    },
    /// Growth of ‖u(t)‖_∞ for small b.
    SupnormGrowth {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        ell: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
    },
    /// L² decay of v_∞ - u for annulus data.
    L2Stability {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        bump: Bump,
    },
    /// L² decay of ψ_k - u.
    PsikStability {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        k: Option<f64>,
        #[command(flatten)]
        bump: Bump,
    },
    /// Pointwise bound of the evolved kernel column.
    KernelCheck {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// (q, r) smoothing ratio over a sweep of t.
    SmoothingCheck {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[command(flatten)]
        bump: Bump,
    },
    /// Run the acceptance suite.
    All,
}

/// Usage or configuration problems exit with 2; everything else with 1.
enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) | Error::Range(_) | Error::Admissibility(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Run(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("shl: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("shl: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("shl: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Config file, then `--set`, then named flags.
fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for s in &cli.set {
        cfg.apply_override(s)?;
    }
    Ok(cfg)
}

fn put<T: ToString>(cfg: &mut Config, key: &str, value: Option<T>) -> Result<(), Failure> {
    if let Some(v) = value {
        cfg.set(key, &v.to_string())?;
    }
    Ok(())
}

fn params(cfg: &mut Config, p: Problem) -> Result<ProblemParams, Failure> {
    put(cfg, "problem.n", p.n)?;
    put(cfg, "problem.p", p.p)?;
    Ok(ProblemParams::new(cfg.get_or("problem.n", 11u32)?, cfg.get_or("problem.p", 7.0f64)?)?)
}

/// Parameters that must also pass the Hardy condition.
fn problem(cfg: &mut Config, p: Problem) -> Result<(u32, f64, ExponentSet), Failure> {
    let params = params(cfg, p)?;
    Ok((params.n, params.p, compute_exponents(params)?))
}

fn bump(cfg: &mut Config, b: Bump) -> Result<(), Failure> {
    put(cfg, "experiment.b", b.b)?;
    put(cfg, "experiment.r_lo", b.r_lo)?;
    put(cfg, "experiment.r_hi", b.r_hi)
}

fn annulus(cfg: &Config, e: &ExponentSet, lo: f64, hi: f64) -> Result<InitialDataSpec, Failure> {
    let r_lo = cfg.get_or("experiment.r_lo", lo)?;
    let r_hi = cfg.get_or("experiment.r_hi", hi)?;
    let b = match cfg.get::<f64>("experiment.b")? {
        Some(b) => b,
        None => 0.5 * e.v_infinity(r_hi),
    };
    Ok(InitialDataSpec::annulus(b, r_lo, r_hi, e)?)
}

fn psik_data(cfg: &Config) -> Result<InitialDataSpec, Failure> {
    Ok(InitialDataSpec::psi_k_gap(
        cfg.get_or("experiment.k", 1.0)?,
        cfg.get_or("experiment.b", 0.05)?,
        cfg.get_or("experiment.r_lo", 10.0)?,
        cfg.get_or("experiment.r_hi", 20.0)?,
    )?)
}

fn ell_in_window(e: &ExponentSet, ell: f64) -> Result<(), Failure> {
    if e.in_ell_window(ell) {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "ℓ = {ell} outside (σ, n-σ) = ({:.6}, {:.6})",
            e.ell_window.0, e.ell_window.1
        )))
    }
}

/// Echoes the effective configuration, writes the files and prints a verdict line.
fn emit(cli: &Cli, cfg: &Config, reports: Vec<Report>) -> Outcome {
    let mut ok = true;
    for r in reports {
        let r = r.param("config", cfg.entries());
        let written = write_report(&cli.output_dir, &r).map_err(|e| Failure::Run(e.to_string()))?;
        let slope = r.fit.map(|f| format!(" slope {:.4}", f.slope)).unwrap_or_default();
        println!("{} {}{} -> {}", r.verdict, r.id, slope, written.report.display());
        ok &= !r.verdict.is_failure();
    }
    Ok(ok)
}

fn run(cli: &Cli) -> Outcome {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Exponents(p) => {
            let (n, pw, e) = problem(&mut cfg, *p)?;
            let text = serde_json::to_string_pretty(&e).map_err(|e| Failure::Run(e.to_string()))?;
            println!("{text}");
            std::fs::create_dir_all(&cli.output_dir).map_err(|e| Failure::Run(e.to_string()))?;
            let path = cli.output_dir.join(format!("exponents_n{n}_p{pw}.json"));
            std::fs::write(&path, text + "\n").map_err(|e| Failure::Run(e.to_string()))?;
            Ok(true)
        }
        Command::SteadyState { problem: p, k, r_max } => {
            let ProblemParams { n, p: pw, .. } = params(&mut cfg, *p)?;
            put(&mut cfg, "experiment.k", *k)?;
            put(&mut cfg, "experiment.r_max", *r_max)?;
            let k = cfg.get_or("experiment.k", 1.0)?;
            let r_max = cfg.get_or("experiment.r_max", 1e4)?;
            let (report, rows) = run_steady_state(n, pw, k, r_max)?;
            std::fs::create_dir_all(&cli.output_dir).map_err(|e| Failure::Run(e.to_string()))?;
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|(r, v)| vec![r, v]).collect();
            let path = cli.output_dir.join(format!("{}_profile.csv", report.id));
            write_rows(&path, &["r", "value"], &rows).map_err(|e| Failure::Run(e.to_string()))?;
            emit(cli, &cfg, vec![report])
        }
        Command::LinearDecay { problem: p, ell, b } => {
            let (n, pw, _) = problem(&mut cfg, *p)?;
            put(&mut cfg, "experiment.ell", *ell)?;
            put(&mut cfg, "experiment.b", *b)?;
            let rc = cfg.run_config(RunConfig::default())?;
            let r = run_linear_decay(n, pw, cfg.get_or("experiment.ell", 5.0)?, cfg.get_or("experiment.b", 0.1)?, &rc)?;
            emit(cli, &cfg, vec![r])
        }
        Command::NonlinearDecay { problem: p, data, ell, k, bump: bp } => {
            let (n, pw, e) = problem(&mut cfg, *p)?;
            put(&mut cfg, "experiment.kind", Some(format!("{data:?}")))?;
            put(&mut cfg, "experiment.ell", *ell)?;
            put(&mut cfg, "experiment.k", *k)?;
            bump(&mut cfg, *bp)?;
            let rc = cfg.run_config(RunConfig::default())?;
            let reports = match data {
                DataKind::PowerTail => {
                    let ell = cfg.get_or("experiment.ell", 5.0)?;
                    let b = cfg.get_or("experiment.b", 0.1)?;
                    if (ell - e.sigma).abs() <= 1e-12 * e.sigma {
                        vec![run_theorem_mth2(n, pw, b, SigmaData::PowerTailAtSigma, &rc)?]
                    } else {
                        ell_in_window(&e, ell)?;
                        let h = run_theorem_half_l(n, pw, ell, b, &rc)?;
                        vec![h.inner, h.outer]
                    }
                }
                DataKind::SigmaTail => {
                    vec![run_theorem_mth2(n, pw, cfg.get_or("experiment.b", 0.1)?, SigmaData::SigmaTail, &rc)?]
                }
                DataKind::Annulus => vec![run_l2_stability(n, pw, &annulus(&cfg, &e, 1.0, 2.0)?, &rc)?],
                DataKind::PsiK => vec![run_psik_stability(n, pw, &psik_data(&cfg)?, &rc)?],
            };
            emit(cli, &cfg, reports)
        }
        Command::SupnormGrowth { problem: p, ell, b } => {
            let (n, pw, e) = problem(&mut cfg, *p)?;
            put(&mut cfg, "experiment.ell", *ell)?;
            put(&mut cfg, "experiment.b", *b)?;
            let ell = cfg.get_or("experiment.ell", 5.0)?;
            if (ell - e.sigma).abs() > 1e-12 * e.sigma {
                ell_in_window(&e, ell)?;
            }
            let rc = cfg.run_config(RunConfig::growth())?;
            let r = run_corollary_small_b(n, pw, ell, cfg.get_or("experiment.b", 1e-2 * e.l)?, &rc)?;
            emit(cli, &cfg, vec![r])
        }
        Command::L2Stability { problem: p, bump: bp } => {
            let (n, pw, e) = problem(&mut cfg, *p)?;
            bump(&mut cfg, *bp)?;
            let rc = cfg.run_config(RunConfig::default())?;
            emit(cli, &cfg, vec![run_l2_stability(n, pw, &annulus(&cfg, &e, 1.0, 2.0)?, &rc)?])
        }
        Command::PsikStability { problem: p, k, bump: bp } => {
            let (n, pw, _) = problem(&mut cfg, *p)?;
            put(&mut cfg, "experiment.k", *k)?;
            bump(&mut cfg, *bp)?;
            let rc = cfg.run_config(RunConfig::default())?;
            emit(cli, &cfg, vec![run_psik_stability(n, pw, &psik_data(&cfg)?, &rc)?])
        }
        Command::KernelCheck { problem: p, rho } => {
            let (_, _, e) = problem(&mut cfg, *p)?;
            put(&mut cfg, "experiment.rho", *rho)?;
            let rc = cfg.run_config(RunConfig { window: (0.1, 100.0), samples: 7, ..RunConfig::default() })?;
            let rho = cfg.get_or("experiment.rho", 0.1)?;
            let times = log_times(rc.window.0, rc.window.1, rc.samples);
            let r = run_kernel_check(&HardyFlow::from_exponents(&e), rho, &times, &[1.0, 2.0, 4.0], &rc.setup)?;
            emit(cli, &cfg, vec![r])
        }
        Command::SmoothingCheck { problem: p, q, r, bump: bp } => {
            let (n, pw, e) = problem(&mut cfg, *p)?;
            bump(&mut cfg, *bp)?;
            let rc = cfg.run_config(RunConfig { window: (1.0, 1000.0), samples: 4, ..RunConfig::default() })?;
            let times = log_times(rc.window.0, rc.window.1, rc.samples);
            let data = annulus(&cfg, &e, 0.1, 0.2)?;
            let data = if cfg.get::<f64>("experiment.b")?.is_none() { data.with_amplitude(0.1) } else { data };
            emit(cli, &cfg, vec![run_smoothing_check(n, pw, &data, (*q, *r), &times, &rc.setup)?])
        }
        Command::All => run_all(cli, &cfg),
    }
}

fn run_all(cli: &Cli, cfg: &Config) -> Outcome {
    std::fs::create_dir_all(&cli.output_dir).map_err(|e| Failure::Run(e.to_string()))?;
    let outcomes = run_suite(&CRITERIA);
    let mut ok = true;
    let mut summary = Vec::new();
    for o in &outcomes {
        for r in &o.reports {
            write_report(&cli.output_dir, r).map_err(|e| Failure::Run(e.to_string()))?;
        }
        println!("{}", o.line());
        ok &= o.passed();
        summary.push(json!({
            "criterion": o.number,
            "title": o.title,
            "passed": o.passed(),
            "reports": o.reports.iter().map(|r| json!({"id": r.id, "verdict": r.verdict})).collect::<Vec<_>>(),
            "error": o.error,
        }));
    }
    let body = json!({ "config": cfg.entries(), "criteria": summary });
    let text = serde_json::to_string_pretty(&body).map_err(|e| Failure::Run(e.to_string()))?;
    std::fs::write(cli.output_dir.join("suite_summary.json"), text + "\n").map_err(|e| Failure::Run(e.to_string()))?;
    Ok(ok)
}
