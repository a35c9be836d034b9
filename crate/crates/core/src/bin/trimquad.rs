use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trimquad::cli::{
    dump_rules, parse_cases, parse_usize_list, run_convergence, run_mass_matrix_table, run_timings, RunConfig,
    StrategySelection,
};

#[derive(Parser)]
#[command(name = "trimquad", version, about = "Mass matrices and L2 projection on trimmed B-spline spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deviation of each fast strategy's mass matrix from element-wise Gauss.
    Mass(Opts),
    /// L2 projection convergence study with rate summary.
    Converge(Opts),
    /// Formation timings per component (medians) at the finest mesh.
    Time(Opts),
}

#[derive(Args)]
struct Opts {
    /// line, circle, corner, a comma list or all
    #[arg(long)]
    case: Option<String>,
    /// e.g. 1..6 or 1,2,4
    #[arg(long)]
    degrees: Option<String>,
    /// elements per side, e.g. 5,10,20,40
    #[arg(long)]
    meshes: Option<String>,
    /// reference, wq, hybrid, dwq or all
    #[arg(long)]
    strategy: Option<StrategySelection>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    parallel: bool,
    /// JSON run configuration; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// timing repetitions after the warm-up
    #[arg(long)]
    repetitions: Option<usize>,
    /// also write quadrature rules and cut-cell points at the finest mesh
    #[arg(long)]
    dump_rules: bool,
}

impl Opts {
    fn resolve(&self, default_meshes: &[usize]) -> trimquad::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig { meshes: default_meshes.to_vec(), ..RunConfig::default() },
        };
        if let Some(s) = &self.case {
            c.cases = parse_cases(s)?;
        }
        if let Some(s) = &self.degrees {
            c.degrees = parse_usize_list(s)?;
        }
        if let Some(s) = &self.meshes {
            c.meshes = parse_usize_list(s)?;
        }
        if let Some(s) = self.strategy {
            c.strategy = s;
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(r) = self.repetitions {
            c.repetitions = r;
        }
        c.parallel |= self.parallel;
        c.dump_rules |= self.dump_rules;
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> trimquad::Result<()> {
    let (opts, meshes): (&Opts, &[usize]) = match &cli.command {
        Command::Mass(o) => (o, &[10]),
        Command::Converge(o) => (o, &[5, 10, 20, 40]),
        Command::Time(o) => (o, &[40]),
    };
    let config = opts.resolve(meshes)?;
    std::fs::create_dir_all(&config.out)?;
    std::fs::write(config.out.join("run.json"), serde_json::to_string_pretty(&config)?)?;
    match cli.command {
        Command::Mass(_) => {
            println!("case     mesh  p   hybrid(rel)  dwq(rel)     wq(abs)");
            for r in run_mass_matrix_table(&config)? {
                println!(
                    "{:<8} {:>4} {:>2}   {:.3e}    {:.3e}    {:.3e}",
                    r.case.as_str(),
                    r.mesh,
                    r.degree,
                    r.hybrid.1,
                    r.dwq.1,
                    r.wq.0
                );
            }
        }
        Command::Converge(_) => {
            let (_, summary) = run_convergence(&config)?;
            println!("case     strategy   p  final rate  min rate  max rel diff  rates agreement");
            for s in &summary {
                let flag = |ok: bool| if ok { "PASS" } else { "FAIL" };
                println!(
                    "{:<8} {:<10} {}  {:>9.3}  {:>8.3}  {:>12.2e}  {:<5} {}",
                    s.case,
                    s.strategy.as_str(),
                    s.p,
                    s.final_rate.unwrap_or(f64::NAN),
                    s.min_rate.unwrap_or(f64::NAN),
                    s.max_rel_diff,
                    flag(s.rates_ok()),
                    flag(s.agreement_ok())
                );
            }
        }
        Command::Time(_) => {
            println!("case     strategy   p  weights    interior   cut-reg    cut-elem   total");
            for r in run_timings(&config)? {
                let t = &r.report;
                println!(
                    "{:<8} {:<10} {}  {:.3e}  {:.3e}  {:.3e}  {:.3e}  {:.3e}",
                    r.case.as_str(),
                    r.strategy.as_str(),
                    r.p,
                    t.t_weights,
                    t.t_interior,
                    t.t_cut_regular,
                    t.t_cut_elements,
                    t.t_total
                );
            }
        }
    }
    if config.dump_rules {
        dump_rules(&config)?;
    }
    println!("outputs in {}", config.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
