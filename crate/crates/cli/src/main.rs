use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hyqmom::cli_harness::{
    compute_error_norm, convergence_study, emit_profile, euler_reference, limiter_log, run_metadata, run_solver,
    rusanov_reference, sample_cells, sample_profile, sci, ProblemId, ProfilePoint, RunConfig,
};
use hyqmom::kinetic_state::PrimitiveState;
use hyqmom::qmom_diagnostics::report_table;
use hyqmom::reference_solvers::positivity_fuzz;
use hyqmom::{Error, Result};

#[derive(Parser)]
#[command(name = "hyqmom", version, about = "Five-moment HyQMOM solver and verification runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem and write profile, metadata and limiter log.
    Run(RunArgs),
    /// Convergence study against the exact solution.
    Converge {
        #[command(flatten)]
        common: RunArgs,
        /// Comma-separated element counts.
        #[arg(long, value_delimiter = ',', default_value = "10,20,40,80,160,320")]
        n_list: Vec<usize>,
    },
    /// Hyperbolicity diagnostics for random Dirac quadratures.
    QmomReport {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Randomized single-step Rusanov positivity trials.
    PositivityFuzz {
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
        #[arg(long, default_value_t = 0.99)]
        cfl: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// key=value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<ProblemId>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    nelem: Option<usize>,
    /// `on` or `off` for all four limiters.
    #[arg(long)]
    limiters: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Extra key=value settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Also write a first-order Rusanov reference with this many cells (Riemann problems).
    #[arg(long)]
    reference_cells: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::new(ProblemId::Smooth, 4, 40),
        };
        let mut pairs: Vec<(&str, String)> = Vec::new();
        if let Some(p) = self.problem {
            pairs.push(("problem", p.to_string()));
        }
        if let Some(v) = self.order {
            pairs.push(("order", v.to_string()));
        }
        if let Some(v) = self.nelem {
            pairs.push(("nelem", v.to_string()));
        }
        if let Some(v) = &self.limiters {
            pairs.push(("limiters", v.clone()));
        }
        for (key, v) in [("eps", self.eps), ("cfl", self.cfl), ("a0", self.a0), ("t_final", self.t_final)] {
            if let Some(v) = v {
                pairs.push((key, v.to_string()));
            }
        }
        if let Some(d) = &self.output_dir {
            pairs.push(("output_dir", d.display().to_string()));
        }
        for (k, v) in pairs {
            cfg.set(k, &v)?;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn run(cfg: RunConfig, reference_cells: Option<usize>) -> Result<()> {
    create_dir(&cfg.output_dir)?;
    let out = run_solver(&cfg)?;
    let dir = &cfg.output_dir;
    let points = sample_profile(&out.solution, &out.mesh, 4);
    emit_profile(&points, &dir.join("profile.csv"))?;
    write_file(&dir.join("metadata.txt"), &run_metadata(&cfg, &out))?;
    let log: String = limiter_log(&out.summary).iter().map(|(k, v)| format!("{k} {v}\n")).collect();
    write_file(&dir.join("limiters.log"), &log)?;

    let spec = cfg.spec();
    let t = cfg.effective_t_final();
    if let Ok(exact) = spec.exact(cfg.effective_eps().unwrap_or(1e-4)) {
        let e = compute_error_norm(&out.solution, &out.mesh, |x| exact(t, x));
        println!("error {}", sci(e));
    }
    if let (Some(cells), Some(_)) = (reference_cells, spec.riemann_states()) {
        let reference = rusanov_reference(cfg.problem, cells, t)?;
        emit_profile(&sample_cells(&reference), &dir.join("reference.csv"))?;
    }
    // the exact Euler solution only describes the relaxed limit
    if let (true, Ok(euler)) = (spec.collisional, euler_reference(cfg.problem)) {
        let overlay: Vec<_> = points
            .iter()
            .map(|p| {
                let s = euler.sample(p.x / t.max(f64::MIN_POSITIVE));
                let rho = s.rho.max(f64::MIN_POSITIVE);
                let pr = s.p.max(f64::MIN_POSITIVE);
                ProfilePoint { x: p.x, alpha: PrimitiveState::new(s.rho, s.u, s.p, 0.0, 2.0 * pr * pr / rho) }
            })
            .collect();
        emit_profile(&overlay, &dir.join("euler_exact.csv"))?;
    }
    let m = out.summary.min_functionals;
    println!(
        "{} order {} N={} steps {} min rho {:.3e} p {:.3e} k {:.3e} ({:.2}s)",
        cfg.problem, cfg.order, cfg.n_elem, out.summary.steps, m[0], m[1], m[2], out.wall_seconds
    );
    Ok(())
}

fn converge(cfg: RunConfig, n_list: &[usize]) -> Result<()> {
    let table = convergence_study(&cfg, n_list)?;
    create_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("convergence.csv"), &table.to_csv())?;
    let text = table.to_text();
    write_file(&cfg.output_dir.join("convergence.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args.resolve().and_then(|cfg| run(cfg, args.reference_cells)),
        Command::Converge { common, n_list } => common.resolve().and_then(|cfg| converge(cfg, &n_list)),
        Command::QmomReport { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            report_table(&mut rng, &[1, 2, 3, 4], samples).and_then(|(text, ok)| {
                print!("{text}");
                if ok {
                    Ok(())
                } else {
                    Err(Error::IllConditioned("weak hyperbolicity checks failed".into()))
                }
            })
        }
        Command::PositivityFuzz { trials, cfl, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = positivity_fuzz(&mut rng, trials, cfl);
            println!("trials {} cfl {} violations {}", r.trials, cfl, r.violations);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
