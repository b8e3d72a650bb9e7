//! The `proxi2s` command line: `fit` a two-stage model to a CSV file or
//! `simulate` a Monte Carlo study.

mod load;
mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proximal::{ModelSpec, OutcomeLink, Procedure};
use crate::sim::{matched_config, run_study, summarize, to_csv, NaiveForm, StudyConfig, VarianceMethod};

pub use load::{load_csv, parse_csv, ColumnRoles};
pub use report::{build_report, fit_and_report, Coefficient, Diagnostics, FitReport, Interval, TreatmentEffect};

/// The bundled configuration of the binary outcome/proxy study.
pub const SS_DEFAULT_TOML: &str = include_str!("../../configs/ss_default.toml");

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "proxi2s", version, about = "Two-stage proximal causal inference with GLM links")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a two-stage model to a CSV file and write a JSON report.
    Fit(FitConfig),
    /// Run a simulation study and write CSV and JSON summaries.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitConfig {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "y")]
    pub y: String,
    #[arg(long, default_value = "a")]
    pub a: String,
    #[arg(long, default_value = "w")]
    pub w: String,
    /// Treatment confounding proxies, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "z")]
    pub z: Vec<String>,
    /// Measured covariates, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<String>,
    #[arg(long, default_value = "logit")]
    pub y_link: OutcomeLink,
    #[arg(long, default_value = "logit")]
    pub w_link: OutcomeLink,
    #[arg(long)]
    pub interactions: bool,
    #[arg(long)]
    pub restrict_symmetry: bool,
    #[arg(long, default_value = "both")]
    pub variance: VarianceMethod,
    #[arg(long, default_value_t = 300)]
    pub boot_b: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl FitConfig {
    pub fn roles(&self) -> ColumnRoles {
        ColumnRoles {
            y: self.y.clone(),
            a: self.a.clone(),
            w: self.w.clone(),
            z: self.z.clone(),
            x: self.x.clone(),
            y_link: Some(self.y_link),
            w_link: Some(self.w_link),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SimulateArgs {
    /// TOML study configuration.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Named configuration: `ss_default`, or a procedure id such as `P8` for its matched design.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub boot_b: Option<usize>,
    #[arg(long)]
    pub variance: Option<VarianceMethod>,
    #[arg(long)]
    pub naive: Option<NaiveForm>,
    /// Override the confounder effect on the outcome.
    #[arg(long)]
    pub dgp_beta_u: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

impl std::str::FromStr for NaiveForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glm" => Ok(NaiveForm::Glm),
            "linear" => Ok(NaiveForm::Linear),
            _ => Err(Error::InvalidConfig(format!("unknown naive form `{s}`"))),
        }
    }
}

/// `ss_default`, or a procedure id (`P1` ... `P15`, `P4`) for its matched design.
pub fn preset(name: &str) -> Result<StudyConfig> {
    if name == "ss_default" {
        return parse_study_config(SS_DEFAULT_TOML);
    }
    Procedure::ALL
        .iter()
        .find(|p| p.id().eq_ignore_ascii_case(name))
        .map(|&p| matched_config(p))
        .ok_or_else(|| Error::InvalidConfig(format!("unknown preset `{name}`")))
}

pub fn parse_study_config(text: &str) -> Result<StudyConfig> {
    toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("study configuration: {e}")))
}

fn exit_code(r: &Result<()>) -> i32 {
    match r {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            }
        }
    }
}

fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn fit_report(cfg: &FitConfig) -> Result<FitReport> {
    let ds = load_csv(&cfg.input, &cfg.roles())?;
    let spec = ModelSpec::with_default_terms(&ds, cfg.y_link, cfg.w_link)
        .interactions(cfg.interactions)
        .restrict_symmetry(cfg.restrict_symmetry);
    fit_and_report(&ds, &spec, cfg.variance, cfg.boot_b, cfg.seed, cfg.level)
}

/// Exit code 0 on success, 2 on data or configuration errors, 3 on numerical failure.
pub fn cmd_fit(cfg: &FitConfig) -> i32 {
    let r = fit_report(cfg).and_then(|r| {
        let json = r.to_json();
        match &cfg.out {
            Some(p) => write_file(p, &(json + "\n")),
            None => {
                println!("{json}");
                Ok(())
            }
        }
    });
    exit_code(&r)
}

/// Resolve the study configuration from `--config`/`--preset` and the overriding flags.
pub fn study_config(args: &SimulateArgs) -> Result<StudyConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            parse_study_config(&text)?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => preset("ss_default")?,
    };
    if let Some(s) = &args.sizes {
        cfg.sample_sizes = s.clone();
    }
    if let Some(r) = args.reps {
        cfg.replications = r;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(b) = args.boot_b {
        cfg.bootstrap_b = b;
    }
    if let Some(v) = args.variance {
        cfg.variance_method = v;
    }
    if let Some(n) = args.naive {
        cfg.naive = n;
    }
    if let Some(b) = args.dgp_beta_u {
        cfg.dgp.beta_u = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: &SimulateArgs) -> Result<String> {
    let cfg = study_config(args)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let report = pool.install(|| run_study(&cfg))?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io(format!("{}: {e}", args.out_dir.display())))?;
    write_file(&args.out_dir.join("sim_report.csv"), &to_csv(&report))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&args.out_dir.join("sim_report.json"), &(json + "\n"))?;
    let config = toml::to_string(&cfg).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    write_file(&args.out_dir.join("study.toml"), &config)?;
    Ok(summarize(&report))
}

/// Exit code 0 on success, 2 on configuration errors, 3 on numerical failure.
pub fn cmd_simulate(args: &SimulateArgs) -> i32 {
    let r = simulate(args).map(|table| {
        print!("{table}");
        let _ = std::io::stdout().flush();
    });
    exit_code(&r)
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => match cli.command {
            Command::Fit(cfg) => cmd_fit(&cfg),
            Command::Simulate(args) => cmd_simulate(&args),
        },
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_OK
            }
        }
    }
}
