use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pum_harness::{experiment_by_name, ExperimentConfig, EXPERIMENT_NAMES};
use rbf_pum::geometry::DOMAIN_NAMES;
use rbf_pum::kernels::{KERNEL_NAMES, PRECISION_NAMES};
use rbf_pum::problems::PROBLEM_NAMES;
use rbf_pum::system::{assemble, run_with, RunConfig, BACKEND_NAMES, METHOD_NAMES};

#[derive(Parser)]
#[command(name = "pum", version, about = "RBF partition-of-unity Poisson solver and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and report the error.
    Solve(SolveArgs),
    /// Run an experiment described by a key=value config file.
    Sweep {
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: the config's `out`, else ./results).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the registered domains, methods, kernels, backends and experiments.
    List,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// box, star, ball, qstar or polygon:<file>
    #[arg(long, default_value = "box")]
    domain: String,
    /// c / collocation or ls / least-squares
    #[arg(long, default_value = "ls")]
    method: String,
    #[arg(long, default_value = "u1")]
    solution: String,
    #[arg(long = "H", default_value_t = 0.4)]
    h: f64,
    #[arg(long, default_value_t = 28)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Defaults to the solution's own shape parameter.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1.5)]
    beta: f64,
    #[arg(long, default_value_t = 1000)]
    probes: usize,
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    #[arg(long, default_value = "auto")]
    backend: String,
    #[arg(long, default_value = "double-double")]
    precision: String,
    /// Also estimate the stability norm at the probes.
    #[arg(long)]
    stability: bool,
    /// Write nodal values and the operator matrix here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn solve(a: SolveArgs) -> rbf_pum::Result<()> {
    let cfg = RunConfig {
        domain: a.domain,
        problem: a.solution,
        method: a.method,
        kernel: a.kernel,
        eps: a.eps,
        box_size: a.h,
        n: a.n,
        delta: a.delta,
        beta: a.beta,
        probes: a.probes,
        spacing: None,
        backend: a.backend,
        precision: a.precision,
        stability: a.stability,
    };
    let comps = cfg.components()?;
    let rep = run_with(&comps, &cfg)?;
    println!("P={} rho={}", rep.patches, rep.radius);
    println!("method={} kernel={} N={} M={}", rep.layout.method, comps.kernel.name(), rep.nodes, rep.rows);
    println!("error_inf={:.6e}", rep.error_inf);
    println!("residual_inf={:.6e}", rep.residual_inf);
    if let (Some(o), Some(r)) = (rep.orthogonality, rep.orthogonality_rounded) {
        println!("orthogonality={o:.3e} (rounded solution {r:.3e})");
    }
    if let Some(s) = rep.stab_norm {
        println!("stability_norm={s:.6e}");
    }
    println!("max_local_condition={:.3e} ridged_patches={}", rep.max_condition, rep.ridged);
    let t = rep.timings;
    println!(
        "t_setup={:.3}s t_assemble={:.3}s t_solve={:.3}s t_evaluate={:.3}s",
        t.setup, t.assemble, t.solve, t.evaluate
    );
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("solution.csv"))?);
        let d = rep.layout.nodes.dim();
        let names = ["x", "y", "z"];
        writeln!(f, "{},u", names[..d].join(","))?;
        for (x, u) in rep.layout.nodes.iter().zip(&rep.u) {
            let coords: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{},{u}", coords.join(","))?;
        }
        let sys = assemble(&rep.layout, comps.problem.as_ref())?;
        sys.matrix
            .write_coo(std::io::BufWriter::new(std::fs::File::create(dir.join("matrix.coo"))?))?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn sweep(experiment: Option<String>, config: Option<PathBuf>, out: Option<PathBuf>) -> rbf_pum::Result<()> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::from_file(&p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = experiment {
        cfg.experiment = e;
    }
    let exp = experiment_by_name(&cfg.experiment)?;
    eprintln!("running {}: {}", exp.name(), exp.about());
    let report = exp.run(&cfg)?;
    print!("{}", report.summary());
    let dir = out.or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
    for p in report.write(&dir, cfg.timings)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep { experiment, config, out } => sweep(experiment, config, out),
        Command::List => {
            println!("domains:     {}", DOMAIN_NAMES.join(", "));
            println!("solutions:   {}", PROBLEM_NAMES.join(", "));
            println!("methods:     {}", METHOD_NAMES.join(", "));
            println!("kernels:     {}", KERNEL_NAMES.join(", "));
            println!("backends:    {}", BACKEND_NAMES.join(", "));
            println!("precisions:  {}", PRECISION_NAMES.join(", "));
            println!("experiments: {}", EXPERIMENT_NAMES.join(", "));
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
