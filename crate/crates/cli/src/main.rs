use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cnls_kam::KamError;
use cnls_kam_cli::{cmd_build, cmd_dump, cmd_iterate, cmd_load, cmd_measure, cmd_validate, exit_code, RunConfig, ValidateSource};

#[derive(Parser)]
#[command(name = "cnls-kam", version, about = "KAM iteration, resonance measure and torus validation for coupled NLS lattices")]
struct Cli {
    /// TOML configuration; built-in defaults when omitted
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// master seed, overrides the configured one
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory, overrides the configured one
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration
    Defaults,
    /// Build the NLS field and check the assumptions
    Build,
    /// Run the KAM iteration at the configured parameter points
    Iterate {
        /// start from the zero perturbation
        #[arg(long)]
        zero_seed: bool,
    },
    /// Monte-Carlo measure of the resonant parameter set
    Measure,
    /// Simulate an embedded torus and run the diagnostics
    Validate {
        /// directory written by `iterate` for one parameter point (zeta_<i>)
        #[arg(long, conflicts_with_all = ["linear", "random"])]
        embedding: Option<PathBuf>,
        /// validate the linear flow on its trivial torus
        #[arg(long)]
        linear: bool,
        /// negative control: random lattice data
        #[arg(long)]
        random: bool,
    },
    /// Write the NLS field in text form
    Dump {
        /// target file; standard output when omitted
        file: Option<PathBuf>,
    },
    /// Parse a field file and summarize it
    Load { file: PathBuf },
}

fn load_config(cli: &Cli) -> Result<RunConfig, KamError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_toml(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), KamError> {
    let mut cfg = load_config(&cli)?;
    let out = PathBuf::from(&cfg.output_dir);
    match cli.command {
        Command::Defaults => print!("{}", RunConfig::default().to_toml()),
        Command::Build => {
            let r = cmd_build(&cfg)?;
            r.outputs.write(&out)?;
            for c in &r.report.checks {
                println!("{:<10} {:<5} {:e}", c.name, if c.pass { "pass" } else { "FAIL" }, c.value);
            }
            println!("all_pass = {}", r.report.all_pass);
        }
        Command::Iterate { zero_seed } => {
            if zero_seed {
                cfg.kam.seed_field = cnls_kam_cli::config::SeedField::Zero;
            }
            let r = cmd_iterate(&cfg)?;
            r.outputs.write(&out)?;
            print!("{}", r.outputs.get("summary.csv").unwrap_or_default());
            let excluded = r.outputs.get("exclusions.csv").map(|s| s.lines().filter(|l| !l.starts_with('#')).count()).unwrap_or(1);
            if excluded > 1 {
                println!("{} parameter point(s) excluded, see exclusions.csv", excluded - 1);
            }
        }
        Command::Measure => {
            let r = cmd_measure(&cfg)?;
            r.outputs.write(&out)?;
            print!("{}", r.report.to_csv());
        }
        Command::Validate { embedding, linear, random } => {
            let source = match (embedding, linear, random) {
                (Some(d), _, _) => ValidateSource::Dir(d),
                (None, true, _) => ValidateSource::Linear,
                (None, false, true) => ValidateSource::Random,
                _ => ValidateSource::Fresh,
            };
            let r = cmd_validate(&cfg, &source)?;
            r.outputs.write(&out)?;
            print!("{}", r.outputs.get("validate.txt").unwrap_or_default());
            if !r.report.pass {
                eprintln!("validation failed");
                return Err(KamError::Numerical("torus validation failed".into()));
            }
        }
        Command::Dump { file } => {
            let text = cmd_dump(&cfg)?;
            match file {
                Some(p) => write_file(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Load { file } => {
            let s = cmd_load(&cfg, &fs::read_to_string(&file)?)?;
            println!("terms = {}", s.terms);
            println!("max_degree = {}", s.max_degree);
            println!("norm = {:e}", s.norm);
            println!("reversibility_defect = {:e}", s.reversibility_defect);
            println!("momentum_violations = {}", s.momentum_violations);
            println!("round_trip = {}", s.round_trip);
        }
    }
    Ok(())
}

fn write_file(p: &Path, text: &str) -> Result<(), KamError> {
    if let Some(parent) = p.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(p, text)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
