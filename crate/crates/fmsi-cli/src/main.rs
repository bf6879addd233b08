//! `fmsi` — scalar-on-function interaction testing from the command line.
//!
//! Subcommands: `smooth` (curves only), `fit` (penalized model JSON), `test`
//! (overall interaction Wald test), `baseline` (per-CpG pairwise OLS with
//! Bonferroni), `simulate` (dump one synthetic cohort), `study` (Monte Carlo
//! harness). Results go to files or stdout; every diagnostic goes to stderr.
//! Exit codes: 0 success, 1 usage, 2 bad data, 3 numerical failure.

mod config;
mod data;
mod error;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;

use fmsi::curves::build_curve_set;
use fmsi::harness::{run_study, write_outputs, StudySpec};
use fmsi::inference::{logistic_working_residuals, pairwise_baseline, wald_interaction_test};
use fmsi::model::fit_reml;
use fmsi::simgen::{generate_dataset, CohortTemplate};
use fmsi::floatfmt::fmt_f64;
use fmsi::{SimConfig, SplineBasis};

use config::{FileConfig, Overrides, Resolved};
use data::{InputPaths, LoadedData};
use error::{CliError, Result};

const WORKERS_ENV: &str = "FMSI_WORKERS";

#[derive(Parser)]
#[command(
    name = "fmsi",
    version,
    about = "Functional methylation-SNP interaction testing",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smooth methylation samples and write the curves as long CSV.
    Smooth(SmoothArgs),
    /// Fit the penalized interaction model and write the fit as JSON.
    Fit(FitArgs),
    /// Run the overall interaction test; prints `T_D=.. df=(..,..) p=..`.
    Test(TestArgs),
    /// Pairwise per-CpG baseline around one SNP with Bonferroni correction.
    Baseline(BaselineArgs),
    /// Generate one synthetic cohort and dump it in the input CSV formats.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo study described by a config file.
    Study(StudyArgs),
}

/// The four input tables shared by `fit`, `test`, and `baseline`.
#[derive(Args)]
struct DataArgs {
    /// Long CSV `individual_id,position,level`.
    #[arg(long)]
    methylation: PathBuf,
    /// Wide CSV `individual_id,snp_1,..`.
    #[arg(long)]
    genotypes: PathBuf,
    /// CSV `snp_id,position_bp` covering every genotype column.
    #[arg(long)]
    snp_positions: PathBuf,
    /// CSV `individual_id,y[,covariates..]`.
    #[arg(long)]
    phenotype: PathBuf,
}

impl DataArgs {
    fn paths(&self) -> InputPaths<'_> {
        InputPaths {
            methylation: &self.methylation,
            genotypes: &self.genotypes,
            snp_positions: &self.snp_positions,
            phenotype: &self.phenotype,
        }
    }

    fn all(&self) -> Vec<&Path> {
        vec![
            &self.methylation,
            &self.genotypes,
            &self.snp_positions,
            &self.phenotype,
        ]
    }
}

/// Tuning knobs; flags override the `--config` file, which overrides defaults.
#[derive(Args, Default)]
struct TuneArgs {
    /// TOML file with [smoothing], [model], and [baseline] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bandwidth: distance to the k-th nearest CpG.
    #[arg(long)]
    k: Option<usize>,
    /// Bandwidth floor in base pairs.
    #[arg(long)]
    h_min: Option<f64>,
    /// Number of grid points the curves are evaluated on.
    #[arg(long)]
    grid_size: Option<usize>,
    /// Spline basis size L.
    #[arg(long)]
    basis_size: Option<usize>,
    /// Interaction weight family: exponential, gaussian, or linear.
    #[arg(long)]
    weight_form: Option<String>,
    /// Weight locality parameter rho (> 0).
    #[arg(long)]
    rho: Option<f64>,
    /// Baseline only: SNP column index, 0-based.
    #[arg(long)]
    snp_index: Option<usize>,
    /// Baseline only: window around the SNP in base pairs.
    #[arg(long)]
    window_bp: Option<f64>,
    /// Baseline only: familywise level before Bonferroni.
    #[arg(long)]
    alpha: Option<f64>,
}

impl TuneArgs {
    fn resolve(&self) -> Result<Resolved> {
        let file = FileConfig::load(self.config.as_deref())?;
        let flags = Overrides {
            k: self.k,
            h_min: self.h_min,
            grid_size: self.grid_size,
            basis_size: self.basis_size,
            weight_form: self.weight_form.clone(),
            rho: self.rho,
            snp_index: self.snp_index,
            window_bp: self.window_bp,
            alpha: self.alpha,
        };
        config::resolve(&file, &flags)
    }
}

/// Two-step handling of a 0/1 phenotype.
#[derive(Args)]
struct BinaryArgs {
    /// Treat y as binary: fit a stage-1 logistic model and analyze its
    /// working residuals.
    #[arg(long)]
    binary: bool,
    /// Comma-separated phenotype covariate names for the stage-1 logistic
    /// model (default: intercept only). Requires --binary.
    #[arg(long, value_delimiter = ',', requires = "binary")]
    stage1_covariates: Vec<String>,
}

#[derive(Args)]
struct SmoothArgs {
    /// Long CSV `individual_id,position,level`.
    #[arg(long)]
    methylation: PathBuf,
    #[command(flatten)]
    tune: TuneArgs,
    /// Output CSV of smoothed curves.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tune: TuneArgs,
    #[command(flatten)]
    binary: BinaryArgs,
    /// Output JSON file for the fitted model.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tune: TuneArgs,
    #[command(flatten)]
    binary: BinaryArgs,
    /// Optional JSON file for the full test result.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tune: TuneArgs,
    /// Output JSON summary.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV with one row per tested (SNP, CpG) pair.
    #[arg(long)]
    pairs_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML or JSON generation config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replicate index within the seed's stream.
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    /// Directory for methylation/genotypes/snp_positions/phenotype CSVs.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    /// TOML or JSON study specification.
    #[arg(long)]
    config: PathBuf,
    /// Worker count; overrides the FMSI_WORKERS variable and the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for the result JSON and CSV tables.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() {
    let code = match Cli::try_parse() {
        Ok(cli) => match run(cli.command) {
            Ok(()) => 0,
            Err(err) => {
                eprintln!("error: {err}");
                err.exit_code()
            }
        },
        Err(err) => {
            // Help and version print to stdout and exit 0; everything else is
            // a usage error on stderr.
            let code = i32::from(err.use_stderr());
            let _ = err.print();
            code
        }
    };
    std::process::exit(code);
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Smooth(args) => smooth(args),
        Command::Fit(args) => fit(args),
        Command::Test(args) => test(args),
        Command::Baseline(args) => baseline(args),
        Command::Simulate(args) => simulate(args),
        Command::Study(args) => study(args),
    }
}

fn ensure_distinct(paths: &[&Path]) -> Result<()> {
    for (i, a) in paths.iter().enumerate() {
        for b in &paths[i + 1..] {
            if a == b {
                return Err(CliError::Usage(format!(
                    "path '{}' given more than once; inputs and outputs must be distinct",
                    a.display()
                )));
            }
        }
    }
    Ok(())
}

fn write_json(path: &Path, json: String) -> Result<()> {
    std::fs::write(path, json + "\n").map_err(CliError::io(path))
}

fn load_spec_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

fn smooth(args: SmoothArgs) -> Result<()> {
    let mut paths = vec![args.methylation.as_path(), args.out.as_path()];
    if let Some(cfg) = &args.tune.config {
        paths.push(cfg);
    }
    ensure_distinct(&paths)?;
    let resolved = args.tune.resolve()?;
    let samples = data::read_methylation(&args.methylation)?;
    if samples.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no methylation rows",
            args.methylation.display()
        )));
    }
    let curves = build_curve_set(&samples, &resolved.smoothing)?;
    data::write_curves(&args.out, &curves)
}

/// Load the four tables and, under --binary, swap the phenotype for stage-1
/// logistic working residuals.
fn load_for_model(
    data_args: &DataArgs,
    resolved: &Resolved,
    binary: &BinaryArgs,
) -> Result<LoadedData> {
    let mut loaded = data::load_dataset(&data_args.paths(), &resolved.smoothing)?;
    if binary.binary {
        let w1 = stage1_matrix(&loaded, &binary.stage1_covariates)?;
        let residuals = logistic_working_residuals(&loaded.dataset.y, &w1)?;
        loaded.dataset.y = residuals;
    }
    Ok(loaded)
}

fn stage1_matrix(loaded: &LoadedData, names: &[String]) -> Result<DMatrix<f64>> {
    let index: BTreeMap<&str, usize> = loaded
        .covariate_names
        .iter()
        .enumerate()
        .map(|(j, n)| (n.as_str(), j))
        .collect();
    let n = loaded.dataset.n();
    let mut w1 = DMatrix::zeros(n, names.len());
    for (col, name) in names.iter().enumerate() {
        let Some(&j) = index.get(name.as_str()) else {
            return Err(CliError::Usage(format!(
                "unknown stage-1 covariate '{}'; phenotype file has: {}",
                name,
                if loaded.covariate_names.is_empty() {
                    "none".to_string()
                } else {
                    loaded.covariate_names.join(", ")
                }
            )));
        };
        w1.set_column(col, &loaded.dataset.w.column(j));
    }
    Ok(w1)
}

fn fitted_model(
    data_args: &DataArgs,
    tune: &TuneArgs,
    binary: &BinaryArgs,
) -> Result<fmsi::FittedModel> {
    let resolved = tune.resolve()?;
    let loaded = load_for_model(data_args, &resolved, binary)?;
    let spline = SplineBasis::new(resolved.basis_size, 3)?;
    Ok(fit_reml(&loaded.dataset, &spline, &resolved.weight_spec)?)
}

fn fit(args: FitArgs) -> Result<()> {
    let mut paths = args.data.all();
    paths.push(&args.out);
    if let Some(cfg) = &args.tune.config {
        paths.push(cfg);
    }
    ensure_distinct(&paths)?;
    let fit = fitted_model(&args.data, &args.tune, &args.binary)?;
    for warning in &fit.warnings {
        eprintln!("warning: {warning}");
    }
    write_json(&args.out, fit.to_json()?)
}

fn test(args: TestArgs) -> Result<()> {
    let mut paths = args.data.all();
    if let Some(out) = &args.out {
        paths.push(out);
    }
    if let Some(cfg) = &args.tune.config {
        paths.push(cfg);
    }
    ensure_distinct(&paths)?;
    let fit = fitted_model(&args.data, &args.tune, &args.binary)?;
    for warning in &fit.warnings {
        eprintln!("warning: {warning}");
    }
    let result = wald_interaction_test(&fit)?;
    if let Some(out) = &args.out {
        write_json(out, result.to_json()?)?;
    }
    println!(
        "T_D={} df=({},{}) p={}",
        fmt_f64(result.statistic),
        result.df1,
        result.df2,
        fmt_f64(result.p_value)
    );
    Ok(())
}

fn baseline(args: BaselineArgs) -> Result<()> {
    let mut paths = args.data.all();
    paths.push(&args.out);
    if let Some(csv) = &args.pairs_csv {
        paths.push(csv);
    }
    if let Some(cfg) = &args.tune.config {
        paths.push(cfg);
    }
    ensure_distinct(&paths)?;
    let resolved = args.tune.resolve()?;
    let loaded = data::load_dataset(&args.data.paths(), &resolved.smoothing)?;
    let cohort = data::raw_cohort(&loaded)?;
    let result = pairwise_baseline(
        &cohort,
        resolved.snp_index,
        resolved.window_bp,
        resolved.alpha,
    )?;
    write_json(&args.out, result.to_json()?)?;
    if let Some(csv_path) = &args.pairs_csv {
        let mut out = csv::Writer::from_path(csv_path)
            .map_err(|e| CliError::Data(format!("{}: {e}", csv_path.display())))?;
        out.write_record(["snp", "cpg_position", "gamma_hat", "p_value", "significant"])
            .map_err(|e| CliError::Data(format!("{}: {e}", csv_path.display())))?;
        for pair in &result.pairs {
            let snp_name = loaded
                .snp_names
                .get(pair.snp_index)
                .cloned()
                .unwrap_or_else(|| format!("snp_{}", pair.snp_index + 1));
            out.write_record([
                snp_name,
                fmt_f64(pair.cpg_position),
                fmt_f64(pair.gamma_hat),
                fmt_f64(pair.p_value),
                (pair.p_value <= result.threshold).to_string(),
            ])
            .map_err(|e| CliError::Data(format!("{}: {e}", csv_path.display())))?;
        }
        out.flush().map_err(CliError::io(csv_path))?;
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config: SimConfig = match &args.config {
        Some(path) => load_spec_file(path)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let template = CohortTemplate::new(&config)?;
    let replicate = generate_dataset(&config, &template, args.replicate)?;
    std::fs::create_dir_all(&args.out_dir).map_err(CliError::io(&args.out_dir))?;
    let file = |name: &str| args.out_dir.join(name);

    data::write_methylation(&file("methylation.csv"), &replicate.samples)?;
    let dataset = &replicate.dataset;
    data::write_genotypes(&file("genotypes.csv"), &dataset.ids, &dataset.g)?;
    let (lo, hi) = dataset.curves.scaling;
    let bp: Vec<f64> = dataset
        .snp_positions
        .iter()
        .map(|&u| lo + u * (hi - lo))
        .collect();
    data::write_snp_positions(&file("snp_positions.csv"), &bp)?;
    data::write_phenotype(&file("phenotype.csv"), &dataset.ids, &dataset.y, &dataset.w)?;
    eprintln!(
        "simulated N={} D={} into {} (seed {}, replicate {})",
        dataset.n(),
        dataset.n_snps(),
        args.out_dir.display(),
        config.seed,
        args.replicate
    );
    Ok(())
}

fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(text) => {
            let n = text.parse::<usize>().map_err(|_| {
                CliError::Usage(format!("{WORKERS_ENV}='{text}' is not a worker count"))
            })?;
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Usage(format!("{WORKERS_ENV}: {e}"))),
    }
}

fn study(args: StudyArgs) -> Result<()> {
    ensure_distinct(&[&args.config, &args.out_dir])?;
    let mut spec: StudySpec = load_spec_file(&args.config)?;
    if let Some(workers) = args.workers.or(workers_from_env()?) {
        spec.parallelism = workers;
    }
    let result = run_study(&spec)?;
    std::fs::create_dir_all(&args.out_dir).map_err(CliError::io(&args.out_dir))?;
    write_outputs(&result, &args.out_dir)?;
    eprintln!(
        "{:?} study: wrote {}",
        spec.study_kind,
        args.out_dir.display()
    );
    Ok(())
}
