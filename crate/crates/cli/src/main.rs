use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use radjump_core::experiment::{self, corpus, ExperimentConfig, ProfileEntry};
use radjump_core::{FunctionalReport, ProfileLiteral, QuadratureSettings, RadialProfile};

#[derive(Parser)]
#[command(name = "radjump", version, about = "Entropy and Fisher-information jump certificates for radial densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured check and write the reports.
    Run {
        config: PathBuf,
        /// Worker thread limit.
        #[arg(long)]
        jobs: Option<usize>,
        /// CSV report path; overrides the config.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// JSON report path; overrides the config.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the standard profile corpus as JSON.
    Corpus {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a single functional of a profile.
    Eval {
        profile: PathBuf,
        #[arg(long, value_enum)]
        functional: Functional,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Functional {
    #[value(name = "h")]
    Entropy,
    #[value(name = "J")]
    Fisher,
    #[value(name = "D")]
    RelativeEntropy,
    #[value(name = "I")]
    RelativeFisher,
    #[value(name = "N")]
    EntropyPower,
}

fn write_report(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(config: &Path, jobs: Option<usize>, csv: Option<PathBuf>, json: Option<PathBuf>) -> Result<u8, String> {
    let cfg = ExperimentConfig::from_path(config).map_err(|e| format!("config error: {e}"))?;
    let report = experiment::run(&cfg, jobs).map_err(|e| format!("config error: {e}"))?;
    let base = config.parent().unwrap_or(Path::new("."));
    let resolve = |flag: Option<PathBuf>, cfg_path: &Option<String>| flag.or_else(|| cfg_path.as_ref().map(|p| base.join(p)));
    match resolve(csv, &cfg.output.csv) {
        Some(p) => write_report(&p, &report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    if let Some(p) = resolve(json, &cfg.output.json) {
        write_report(&p, &report.to_json())?;
    }
    for e in &report.errors {
        eprintln!("error: {}/{}: {}", e.profile_id, e.check, e.message);
    }
    for row in report.rows.iter().filter(|r| !r.certificate.pass) {
        let c = &row.certificate;
        eprintln!("FAIL {} {} eps={:?} margin={:.3e} tol={:.3e}", row.profile_id, c.name, c.epsilon, c.margin, c.tolerance);
    }
    eprintln!(
        "{} certificates, {} passed, {} failed, {} errors",
        report.rows.len(),
        report.passed(),
        report.failed(),
        report.errors.len()
    );
    Ok(report.exit_code() as u8)
}

fn eval(path: &Path, functional: Functional) -> Result<u8, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let lit: ProfileLiteral = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let profile = RadialProfile::from_literal(&lit, QuadratureSettings::default()).map_err(|e| e.to_string())?;
    let r = FunctionalReport::compute(&profile).map_err(|e| e.to_string())?;
    let value = match functional {
        Functional::Entropy => r.h,
        Functional::Fisher => r.j,
        Functional::RelativeEntropy => r.d,
        Functional::RelativeFisher => r.i,
        Functional::EntropyPower => r.n,
    };
    println!("{value:.17e}");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, jobs, csv, json } => run(&config, jobs, csv, json),
        Command::Corpus { seed } => {
            let entries: Vec<ProfileEntry> =
                corpus(seed).into_iter().map(|(id, profile)| ProfileEntry { id: Some(id), profile }).collect();
            println!("{}", serde_json::to_string_pretty(&entries).expect("corpus serializes"));
            Ok(0)
        }
        Command::Eval { profile, functional } => eval(&profile, functional),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
