//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hte_core::datapipe::{self, CsvOptions};
use hte_core::model::SavedModel;
use hte_core::{fit_ahte, fit_ensemble, Error, KdeModel, Result, StretchConfig};
use serde::Serialize;

use crate::config::{
    parse_config, FitConfig, GapConfig, Method, ParamStudyConfig, RateConfig, RealBenchConfig,
    SynthBenchConfig,
};
use crate::experiments;
use crate::output::{summarize, write_csv, Manifest, ResultRow};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hte", version, about = "Histogram transform ensemble experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// NHTE accuracy against sample size for several ensemble sizes.
    EnsembleGap(RunArgs),
    /// Tuned NHTE, AHTE and KDE on the synthetic densities.
    SynthBench(RunArgs),
    /// AHTE accuracy over ensemble size and min_samples_split.
    ParamStudy(RunArgs),
    /// Log-log MAE slopes of single and ensemble estimators.
    RateStudy(RunArgs),
    /// Tuned methods on a preprocessed CSV dataset.
    RealBench(RunArgs),
    /// Fit a model on a CSV file and save it as JSON.
    Fit(FitArgs),
    /// Evaluate a saved model at the rows of a CSV file.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of replications (overrides the config).
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long, default_value = "hte-out")]
    pub out_dir: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CsvArgs {
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// The first row holds data, not column names.
    #[arg(long)]
    pub no_header: bool,
}

impl CsvArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            delimiter: self.delimiter,
            header: !self.no_header,
            drop_columns: Vec::new(),
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Training CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub members: usize,
    #[arg(long, default_value_t = 10)]
    pub min_samples_split: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub s_min_exp: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub s_max_exp: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub csv: CsvArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Query CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV with one `density` per query row.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub csv: CsvArgs,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be at least 1".to_string()));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("warning: thread pool already initialized; --threads ignored");
        }
    }
    Ok(())
}

trait Seeded {
    fn seed_mut(&mut self) -> &mut u64;
    fn replications_mut(&mut self) -> &mut usize;
}

macro_rules! seeded {
    ($($t:ty),*) => {$(
        impl Seeded for $t {
            fn seed_mut(&mut self) -> &mut u64 { &mut self.seed }
            fn replications_mut(&mut self) -> &mut usize { &mut self.replications }
        }
    )*};
}

seeded!(GapConfig, SynthBenchConfig, ParamStudyConfig, RateConfig, RealBenchConfig);

fn load_config<C>(args: &RunArgs) -> Result<C>
where
    C: serde::de::DeserializeOwned + Default + Seeded,
{
    let mut cfg: C = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
            })?;
            parse_config(&text)?
        }
        None => C::default(),
    };
    if let Some(seed) = args.seed {
        *cfg.seed_mut() = seed;
    }
    if let Some(r) = args.replications {
        *cfg.replications_mut() = r;
    }
    Ok(cfg)
}

fn write_tables<C: Serialize>(
    dir: &Path,
    manifest: &mut Manifest<C>,
    rows: &[ResultRow],
    pool_tuning: bool,
) -> Result<()> {
    write_csv(&dir.join("results.csv"), rows)?;
    write_csv(&dir.join("summary.csv"), &summarize(rows, pool_tuning))?;
    manifest.outputs.splice(0..0, ["results.csv".to_string(), "summary.csv".to_string()]);
    manifest.write(dir)
}

fn run_experiment(name: &str, args: &RunArgs) -> Result<()> {
    set_threads(args.threads)?;
    let dir = &args.out_dir;
    macro_rules! prepare {
        ($cfg:ty) => {{
            let cfg: $cfg = load_config(args)?;
            cfg.validate()?;
            fs::create_dir_all(dir)?;
            let manifest = Manifest::new(name, cfg.clone(), cfg.seed, cfg.replications);
            (cfg, manifest)
        }};
    }
    match name {
        "ensemble-gap" => {
            let (cfg, mut manifest) = prepare!(GapConfig);
            let rows = experiments::run_ensemble_gap(&cfg)?;
            write_tables(dir, &mut manifest, &rows, false)
        }
        "synth-bench" => {
            let (cfg, mut manifest) = prepare!(SynthBenchConfig);
            let rows = experiments::run_synth_bench(&cfg)?;
            write_tables(dir, &mut manifest, &rows, true)
        }
        "param-study" => {
            let (cfg, mut manifest) = prepare!(ParamStudyConfig);
            let rows = experiments::run_param_study(&cfg)?;
            write_tables(dir, &mut manifest, &rows, false)
        }
        "rate-study" => {
            let (cfg, mut manifest) = prepare!(RateConfig);
            let (rows, report) = experiments::run_rate_study(&cfg)?;
            fs::write(dir.join("slopes.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            manifest.outputs.push("slopes.json".to_string());
            manifest.extra.insert("slope_gap".to_string(), serde_json::to_value(report.slope_gap)?);
            write_tables(dir, &mut manifest, &rows, false)
        }
        "real-bench" => {
            let (cfg, mut manifest) = prepare!(RealBenchConfig);
            let (rows, prepared) = experiments::run_real_bench(&cfg)?;
            let provenance: Vec<_> = prepared.iter().map(|ds| &ds.provenance).collect();
            fs::write(dir.join("provenance.json"), serde_json::to_string_pretty(&provenance)? + "\n")?;
            manifest.outputs.push("provenance.json".to_string());
            write_tables(dir, &mut manifest, &rows, true)
        }
        other => unreachable!("unknown experiment {other}"),
    }
}

fn run_fit(args: &FitArgs) -> Result<()> {
    set_threads(args.threads)?;
    let cfg = FitConfig {
        method: args.method,
        data: args.data.clone(),
        csv: args.csv.options(),
        members: args.members,
        min_samples_split: args.min_samples_split,
        s_min_exp: args.s_min_exp,
        s_max_exp: args.s_max_exp,
        seed: args.seed,
    };
    cfg.validate()?;
    let data = datapipe::load_csv(&cfg.data, &cfg.csv)?.rows;
    let model = match cfg.method {
        Method::Nhte => {
            let stretch = StretchConfig::from_data(&data, cfg.s_min_exp, cfg.s_max_exp)?;
            SavedModel::Nhte(fit_ensemble(&data, cfg.members, &stretch, cfg.seed)?)
        }
        Method::Ahte => SavedModel::Ahte(fit_ahte(&data, cfg.members, cfg.min_samples_split, cfg.seed)?),
        Method::Kde => SavedModel::Kde(KdeModel::fit(&data)?),
    };
    model.save(&args.out)
}

fn run_score(args: &ScoreArgs) -> Result<()> {
    set_threads(args.threads)?;
    let model = SavedModel::load(&args.model)?;
    let query = datapipe::load_csv(&args.data, &args.csv.options())?.rows;
    let densities = model.densities(&query)?;
    let mut writer = csv::Writer::from_path(&args.out)?;
    writer.write_record(["density"])?;
    for f in densities {
        writer.write_record([f.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::EnsembleGap(a) => run_experiment("ensemble-gap", a),
        Command::SynthBench(a) => run_experiment("synth-bench", a),
        Command::ParamStudy(a) => run_experiment("param-study", a),
        Command::RateStudy(a) => run_experiment("rate-study", a),
        Command::RealBench(a) => run_experiment("real-bench", a),
        Command::Fit(a) => run_fit(a),
        Command::Score(a) => run_score(a),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_DATA
            }
        }
    }
}
