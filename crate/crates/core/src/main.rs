use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fracboot::arfima::{ArfimaParams, ArfimaSimulator, InnovationLaw};
use fracboot::estimators::{EstimatorSpec, Family};
use fracboot::harness::{
    emit_tables, read_series, run_design, run_design_with_threads, write_series, McDesign, Statistic, TableFormat,
    HPD_ALPHA,
};
use fracboot::pfsb::{hpd_interval, InnovationMode, IterationEngine, PfsbConfig, StoppingRule};
use fracboot::rng::Stream;
use fracboot::series::TimeSeries;
use fracboot::{Error, Result};

#[derive(Parser)]
#[command(name = "fracboot", version, about = "Bootstrap bias correction for long-memory estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate ARFIMA(1,d,0) series.
    Simulate(SimulateArgs),
    /// Estimate the memory parameter of a series.
    Estimate(EstimateArgs),
    /// Bootstrap bias correction of an estimate.
    BiasCorrect(BiasCorrectArgs),
    /// Run a Monte Carlo design.
    McRun(McRunArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, allow_hyphen_values = true)]
    d: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    phi: f64,
    /// Sample size.
    #[arg(long = "T")]
    t: usize,
    /// Number of series; more than one are written as CSV columns.
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, env = "FRACBOOT_SEED")]
    seed: u64,
    /// `gaussian` or `student-t:DOF`.
    #[arg(long, default_value = "gaussian")]
    law: InnovationLaw,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Input series, one value per line.
    #[arg(long = "in")]
    input: PathBuf,
    /// `lpr` or `splw`.
    #[arg(long)]
    family: Family,
    /// Number of even-power terms (0 to 3).
    #[arg(long = "P", default_value_t = 0)]
    p: usize,
    #[arg(long = "bandwidth-exp", default_value_t = 0.7)]
    bandwidth_exp: f64,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    est: EstimatorArgs,
}

#[derive(Args)]
struct BiasCorrectArgs {
    #[command(flatten)]
    est: EstimatorArgs,
    /// Bootstrap draws.
    #[arg(long = "B", default_value_t = 1000)]
    b: usize,
    #[arg(long, default_value = "parametric")]
    mode: InnovationMode,
    /// Iterate with the stochastic stopping rule instead of a single correction.
    #[arg(long)]
    iterate: bool,
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
    #[arg(long, env = "FRACBOOT_SEED")]
    seed: u64,
}

#[derive(Args)]
struct McRunArgs {
    /// TOML design file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Restrict the tables to these statistics (repeatable).
    #[arg(long = "statistic")]
    statistics: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::BiasCorrect(a) => bias_correct(a),
        Command::McRun(a) => mc_run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn simulate(a: SimulateArgs) -> Result<()> {
    if a.n == 0 {
        return Err(Error::InvalidParameter("--n must be at least 1".into()));
    }
    let params = ArfimaParams::new(a.d, a.phi, 1.0, a.law)?;
    let sim = ArfimaSimulator::new(params, a.t)?;
    let root = Stream::new(a.seed);
    let paths = (0..a.n)
        .map(|i| sim.simulate(&root.split(i as u64)).map(TimeSeries::into_values))
        .collect::<Result<Vec<_>>>()?;
    let mut w = output(a.out.as_deref())?;
    if a.n == 1 {
        return write_series(&paths[0], w);
    }
    let header: Vec<String> = (1..=a.n).map(|i| format!("y{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for t in 0..a.t {
        let row: Vec<String> = paths.iter().map(|p| format!("{:?}", p[t])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn load(args: &EstimatorArgs) -> Result<(TimeSeries, EstimatorSpec)> {
    let file = File::open(&args.input)
        .map_err(|e| Error::InvalidParameter(format!("cannot open {}: {e}", args.input.display())))?;
    let y = TimeSeries::new(read_series(BufReader::new(file))?)?;
    let spec = EstimatorSpec::new(args.family, args.p)?.with_bandwidth_exponent(args.bandwidth_exp)?;
    Ok((y, spec))
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let (y, spec) = load(&a.est)?;
    let r = spec.estimate(y.values())?;
    println!("estimator      {spec}");
    println!("d_hat          {:.6}", r.d_hat);
    println!("asymptotic_sd  {:.6}", r.asymptotic_sd);
    println!("N              {}", r.n);
    Ok(())
}

fn bias_correct(a: BiasCorrectArgs) -> Result<()> {
    let (y, spec) = load(&a.est)?;
    let config = PfsbConfig::new(a.mode, a.b, Stream::new(a.seed))?;
    let rule = if a.iterate { StoppingRule::Stochastic { max_iter: a.max_iter } } else { StoppingRule::Fixed(1) };
    let mut engine = IterationEngine::new(&y, &spec, config)?;
    let decision = engine.run(rule)?;
    let d_hat = engine.estimate().d_hat;
    let first = &engine.records()[0];
    let hpd = hpd_interval(&first.outcome.draws, d_hat, HPD_ALPHA.0, HPD_ALPHA.1)?;

    println!("estimator      {spec}");
    println!("d_hat          {d_hat:.6}");
    println!("bias_hat       {:.6}", first.bias);
    println!("d_tilde        {:.6}", decision.value);
    println!("hpd_95         [{:.6}, {:.6}]", hpd.0, hpd.1);
    println!("stop           {} after {} iteration(s)", decision.reason, decision.iterations);
    println!();
    println!("{:>3}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}  {:>5}", "k", "d_k", "bias_k", "crit1", "tau1", "crit2", "tau2", "order");
    for r in engine.records().iter().take(decision.iterations) {
        println!(
            "{:>3}  {:>10.6}  {:>10.6}  {:>10.6}  {:>10.6}  {:>10.6}  {:>10.6}  {:>5}",
            r.k, r.d_tilde, r.bias, r.criterion1, r.thresholds.tau1, r.criterion2, r.thresholds.tau2, r.outcome.order
        );
    }
    Ok(())
}

fn mc_run(a: McRunArgs) -> Result<()> {
    let design = McDesign::from_path(&a.config)?;
    let filter = a.statistics.iter().map(|s| s.parse::<Statistic>()).collect::<Result<Vec<_>>>()?;
    let results = match a.threads {
        Some(0) => return Err(Error::InvalidParameter("--threads must be at least 1".into())),
        Some(n) => run_design_with_threads(&design, n)?,
        None => run_design(&design)?,
    };
    fs::create_dir_all(&a.out_dir)?;
    emit_tables(&results, TableFormat::Csv, &filter, &a.out_dir.join("results.csv"))?;
    emit_tables(&results, TableFormat::Aligned, &filter, &a.out_dir.join("tables.txt"))?;

    let mut w = BufWriter::new(File::create(a.out_dir.join("summary.txt"))?);
    writeln!(w, "replications  {}", results.replications)?;
    writeln!(w, "seed          {}", results.seed)?;
    writeln!(w, "wall_time_s   {:.3}", results.elapsed.as_secs_f64())?;
    for c in &results.cells {
        writeln!(
            w,
            "cell {:>3}  T={} d={} phi={}  task_time_s={:.3}",
            c.cell.index,
            c.cell.t,
            c.cell.d,
            c.cell.phi,
            c.elapsed.as_secs_f64()
        )?;
    }
    w.flush()?;
    println!("wrote {}", a.out_dir.join("results.csv").display());
    Ok(())
}
