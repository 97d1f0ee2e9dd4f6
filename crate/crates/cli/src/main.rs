//! `phasegate` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure (no grid point converged).

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use phasegate::optics::ProgramSetting;
use phasegate::pipeline::{
    reconstruct, run_hom_scan, simulate_sweep, sweep_filter, sweep_phase, ExperimentConfig, SweepKind, SweepReport,
};
use phasegate::report::{write_hom, write_json, write_sweep, ReconstructionFile};
use phasegate::tomo::{read_dataset, write_dataset};
use phasegate::{Error, Execution};

/// Output directory used when `--out` is not given.
const OUT_DIR_ENV: &str = "PHASEGATE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "phasegate", version, about = "Programmable phase gate: simulation, tomography and calibration")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML experiment configuration; missing keys take the reference defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Use exact expected counts instead of Poisson samples.
    #[arg(long, global = true)]
    noiseless: bool,

    /// Report directory [default: $PHASEGATE_OUT_DIR or ./out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Compensation offset in radians, overriding the fitted one.
    #[arg(long, global = true, value_name = "RAD", allow_negative_numbers = true)]
    delta_phi: Option<f64>,

    /// Evaluate grid points one after another.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Phase-gate tomography over the phase grid, with offset calibration.
    SweepPhase,
    /// Partial-filter tomography over the theta grid.
    SweepFilter,
    /// HOM dip curve and visibility.
    HomScan,
    /// Reconstruct a process from a dataset file.
    Reconstruct {
        dataset: PathBuf,
        /// Ideal process to score against, e.g. `phase:0.785` or `filter:0.3927`.
        /// Defaults to the `# program=` line of the dataset.
        #[arg(long)]
        target: Option<ProgramSetting>,
    },
    /// Write the tomography datasets a sweep would reconstruct.
    Simulate {
        #[arg(long, value_enum, default_value_t = SimulateKind::Both)]
        kind: SimulateKind,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SimulateKind {
    Phase,
    Filter,
    Both,
}

/// Failure carrying its process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => 1,
            _ => 2,
        };
        Failure { code, error: e.into() }
    }
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: 1, error }
}

fn data(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

type CliResult<T> = Result<T, Failure>;

fn load_config(g: &GlobalArgs) -> CliResult<ExperimentConfig> {
    let mut config = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))
                .map_err(usage)?;
            toml::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("parsing config {}", path.display()))
                .map_err(usage)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    if g.noiseless {
        config.noiseless = true;
    }
    if let Some(d) = g.delta_phi {
        config.compensation_delta_phi = Some(d);
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(g: &GlobalArgs) -> PathBuf {
    g.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execution(g: &GlobalArgs) -> Execution {
    if g.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn print_sweep(report: &SweepReport, files: &[PathBuf]) {
    let a = &report.aggregate;
    let (label, name) = match report.kind {
        SweepKind::Phase => ("phi", "phase"),
        SweepKind::Filter => ("theta", "filter"),
    };
    println!("{name} sweep, {} points, seed {}", report.points.len(), report.config.seed);
    println!("{label:>10} {:>10} {:>10} {:>10} {:>6}", "F_raw", "F_comp", "phi_eff", "conv");
    for p in &report.points {
        let r = &p.reconstruction;
        let phi_eff = r.phi_eff.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into());
        println!(
            "{:>10.5} {:>10.5} {:>10.5} {:>10} {:>6}",
            r.program.angle(),
            r.raw_fidelity,
            p.compensated.fidelity,
            phi_eff,
            r.mle.converged
        );
    }
    println!("mean raw fidelity          {:.5}", a.mean_raw_fidelity);
    println!("mean compensated fidelity  {:.5}", a.mean_compensated_fidelity);
    println!("compensation gain          {:.5}", a.compensation_gain);
    if let Some(fit) = &a.phase_fit {
        println!("fitted slope               {:.6}", fit.slope);
        println!("fitted offset              {:.6} rad", fit.offset);
    }
    println!("offset used                {:.6} rad ({:?})", a.delta_phi_used, a.delta_phi_source);
    if a.unconverged_points > 0 {
        println!("unconverged points         {}", a.unconverged_points);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn finish_sweep(report: SweepReport, dir: &Path) -> CliResult<()> {
    let files = write_sweep(dir, &report)?;
    print_sweep(&report, &files);
    if report.all_unconverged() {
        return Err(Failure {
            code: 3,
            error: anyhow::anyhow!("MLE did not converge at any grid point"),
        });
    }
    Ok(())
}

fn cmd_reconstruct(g: &GlobalArgs, dataset: &Path, target: Option<ProgramSetting>) -> CliResult<()> {
    let config = load_config(g)?;
    let file = File::open(dataset)
        .with_context(|| format!("opening {}", dataset.display()))
        .map_err(data)?;
    let data_set = read_dataset(BufReader::new(file))
        .map_err(|e| data(anyhow::Error::new(e).context(format!("reading {}", dataset.display()))))?;
    let target = target.or(data_set.program).ok_or_else(|| {
        usage(anyhow::anyhow!(
            "no --target given and the dataset has no `# program=` line"
        ))
    })?;
    let rec = reconstruct(&data_set, target, &config.mle)?;
    let file = ReconstructionFile::new(&rec, config.compensation_delta_phi)?;

    let dir = out_dir(g);
    fs::create_dir_all(&dir).map_err(|e| Failure::from(Error::from(e)))?;
    let path = dir.join("reconstruction.json");
    write_json(&path, &file)?;

    println!("target {target}");
    println!("chi (input x output, re im):");
    for row in rec.chi.0 .0.iter() {
        let cells: Vec<String> = row.iter().map(|c| format!("{:+.6} {:+.6}i", c.re, c.im)).collect();
        println!("  {}", cells.join("  "));
    }
    println!("trace                {:.6}", rec.chi.trace());
    println!("process fidelity     {:.6}", rec.raw_fidelity);
    if let Some(f) = rec.favg_raw {
        println!("average fidelity     {f:.6}");
    }
    match rec.phi_eff {
        Some(p) => println!("phi_eff              {p:.6} rad"),
        None => println!("phi_eff              undefined"),
    }
    if let (Some(d), Some(f)) = (file.delta_phi, file.compensated_fidelity) {
        println!("compensated ({d:+.4} rad) fidelity {f:.6}");
    }
    println!(
        "MLE: {} iterations, {:?}, log-likelihood {}",
        rec.mle.iterations, rec.mle.termination, rec.mle.final_log_likelihood
    );
    println!("wrote {}", path.display());
    if !rec.mle.converged {
        return Err(Failure {
            code: 3,
            error: anyhow::anyhow!("MLE did not converge"),
        });
    }
    Ok(())
}

fn cmd_simulate(g: &GlobalArgs, kind: SimulateKind) -> CliResult<()> {
    let config = load_config(g)?;
    let dir = out_dir(g).join("datasets");
    fs::create_dir_all(&dir).map_err(|e| Failure::from(Error::from(e)))?;
    let kinds: &[SweepKind] = match kind {
        SimulateKind::Phase => &[SweepKind::Phase],
        SimulateKind::Filter => &[SweepKind::Filter],
        SimulateKind::Both => &[SweepKind::Phase, SweepKind::Filter],
    };
    for &k in kinds {
        let prefix = match k {
            SweepKind::Phase => "phase",
            SweepKind::Filter => "filter",
        };
        for (i, ds) in simulate_sweep(&config, k, execution(g))?.iter().enumerate() {
            let path = dir.join(format!("{prefix}_{i:02}.csv"));
            let mut w = BufWriter::new(File::create(&path).map_err(|e| Failure::from(Error::from(e)))?);
            write_dataset(&mut w, ds)?;
            w.flush().map_err(|e| Failure::from(Error::from(e)))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    match cli.command {
        Command::SweepPhase => {
            let config = load_config(g)?;
            finish_sweep(sweep_phase(&config, execution(g))?, &out_dir(g))
        }
        Command::SweepFilter => {
            let config = load_config(g)?;
            finish_sweep(sweep_filter(&config, execution(g))?, &out_dir(g))
        }
        Command::HomScan => {
            let config = load_config(g)?;
            let report = run_hom_scan(&config)?;
            let files = write_hom(&out_dir(g), &report)?;
            println!("model visibility     {:.6}", report.model_visibility);
            println!("measured visibility  {:.6}", report.measured_visibility);
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Reconstruct { dataset, target } => cmd_reconstruct(g, &dataset, target),
        Command::Simulate { kind } => cmd_simulate(g, kind),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
