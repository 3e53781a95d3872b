//! `kernelpa` — command-line front end for the PA modeling and
//! pre-distortion pipeline.
//!
//! Verbs cover the full workflow: signal generation, reference-PA
//! simulation, model fitting, contribution analysis, pruning, parametric
//! extraction and identification, prediction, metrics, pre-distorter
//! training/application, and the T/aperture hyper-parameter sweep.
//!
//! Conventions shared by all verbs:
//! - `--input` is the drive record u, `--target` the measured output record
//!   y, `--output` whatever the verb produces, `--model` a model file.
//! - Records are stored as little-endian f64 I/Q pairs (`--format bin`,
//!   default) or CSV (`--format csv`), always with a `<path>.meta` sidecar.
//! - All randomness is seeded; reruns with identical inputs are
//!   bit-identical. No verb mutates its inputs.
//! - Errors are a single `error: ...` line on stderr with a nonzero exit.
//! - `KERNELPA_THREADS` caps internal parallelism (results do not depend on
//!   the thread count).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kernelpa::config::RunConfig;
use kernelpa::dpd::{dpd_apply, dpd_train, DpdModel};
use kernelpa::io::{load_signal, save_signal, SignalFormat};
use kernelpa::metrics::{acepr_db, nmse_db};
use kernelpa::npmodel::{fit, NonParametricModel};
use kernelpa::parametric::{
    extract, identify_least_squares, to_original_domain, Domain, ParametricModel,
};
use kernelpa::refpa::{default_config, reference_pa, ReferencePaConfig};
use kernelpa::signal::{clip, generate, papr_db, ComplexSignal};

#[derive(Parser)]
#[command(
    name = "kernelpa",
    version,
    about = "Non-parametric PA behavioral modeling and digital pre-distortion"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

/// Hyper-parameter and config-file flags shared by the fitting verbs.
#[derive(Args, Debug)]
struct HyperArgs {
    /// Memory depth M (number of past samples per lag set)
    #[arg(long = "m-depth")]
    m_depth: Option<usize>,
    /// Maximum regressor subset size / polynomial half-order
    #[arg(long = "p-max")]
    p_max: Option<usize>,
    /// Number of amplitude grid points T
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    /// Kernel aperture as a fraction of the amplitude span
    #[arg(long = "aperture-frac")]
    aperture_fraction: Option<f64>,
    /// Leading fraction of the record used for estimation (rest validates)
    #[arg(long = "est-frac")]
    estimation_fraction: Option<f64>,
    /// Seed for any randomized step
    #[arg(long)]
    seed: Option<u64>,
    /// key=value file whose entries override the flags above
    #[arg(long)]
    config: Option<PathBuf>,
}

impl HyperArgs {
    /// Flag values first, then config-file entries override them.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(v) = self.m_depth {
            cfg.m_depth = v;
        }
        if let Some(v) = self.p_max {
            cfg.p_max = v;
        }
        if let Some(v) = self.grid_points {
            cfg.grid_points = v;
        }
        if let Some(v) = self.aperture_fraction {
            cfg.aperture_fraction = v;
        }
        if let Some(v) = self.estimation_fraction {
            cfg.estimation_fraction = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            cfg.apply_overrides(&text)
                .with_context(|| format!("config {}", path.display()))?;
        } else {
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct FormatArg {
    /// Record encoding for signal files
    #[arg(long, default_value = "bin")]
    format: String,
}

impl FormatArg {
    fn get(&self) -> Result<SignalFormat> {
        Ok(SignalFormat::from_name(&self.format)?)
    }
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Generate a band-limited noise-like excitation record
    Generate {
        /// Destination record path
        #[arg(long)]
        output: PathBuf,
        /// Number of samples
        #[arg(long = "n-samples", default_value_t = 20_000)]
        n_samples: usize,
        /// Sample rate in Hz
        #[arg(long = "sample-rate", default_value_t = 400e6)]
        sample_rate_hz: f64,
        /// Occupied bandwidth in Hz
        #[arg(long, default_value_t = 100e6)]
        bandwidth_hz: f64,
        /// Linear amplitude scale applied after unit-power normalization
        #[arg(long, default_value_t = 0.5)]
        drive: f64,
        /// Optional peak-to-average target in dB (clip-and-filter)
        #[arg(long = "clip-papr")]
        clip_papr_db: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Pass a drive record through the built-in reference PA
    Simulate {
        /// Drive record u
        #[arg(long)]
        input: PathBuf,
        /// Destination for the PA output record y
        #[arg(long)]
        output: PathBuf,
        /// Optional PA coefficient file (defaults to the built-in device)
        #[arg(long = "pa-config")]
        pa_config: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Fit the non-parametric model on the leading estimation split
    Fit {
        /// Drive record u
        #[arg(long)]
        input: PathBuf,
        /// Measured output record y
        #[arg(long)]
        target: PathBuf,
        /// Destination model file
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Per-basis contribution table (CSV) for a fitted model on a record pair
    Analyze {
        /// Drive record u
        #[arg(long)]
        input: PathBuf,
        /// Measured output record y
        #[arg(long)]
        target: PathBuf,
        /// Model file to analyze
        #[arg(long)]
        model: PathBuf,
        /// Destination CSV (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Deactivate subset blocks with small recorded contributions
    Prune {
        /// Model file to prune
        #[arg(long)]
        model: PathBuf,
        /// Destination for the pruned model
        #[arg(long)]
        output: PathBuf,
        /// Contribution magnitude threshold in dB
        #[arg(long = "threshold-db", default_value_t = 0.1)]
        threshold_db: f64,
    },
    /// Fit odd-order polynomials to a model's smoothed curves
    Extract {
        /// Source non-parametric model file
        #[arg(long)]
        model: PathBuf,
        /// Destination parametric model file
        #[arg(long)]
        output: PathBuf,
        /// Carrier polynomial order (odd)
        #[arg(long, default_value_t = 7)]
        order: usize,
        /// Output domain: original (deployable) or orthogonal
        #[arg(long, default_value = "original")]
        domain: String,
    },
    /// Identify a parametric structure directly by least squares
    Identify {
        /// Drive record u
        #[arg(long)]
        input: PathBuf,
        /// Measured output record y
        #[arg(long)]
        target: PathBuf,
        /// Destination parametric model file
        #[arg(long)]
        output: PathBuf,
        /// Term structure as lag:order pairs
        #[arg(long, default_value = "0:1,0:2,0:3,0:4,1:1,2:1")]
        terms: String,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Run a model file (non-parametric, parametric, or pre-distorter) on a record
    Predict {
        /// Drive record u
        #[arg(long)]
        input: PathBuf,
        /// Model file of any supported kind
        #[arg(long)]
        model: PathBuf,
        /// Destination record
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Error and spectrum metrics between records (or model vs record)
    Metrics {
        /// Reference record
        #[arg(long)]
        input: PathBuf,
        /// Measured / compared record
        #[arg(long)]
        target: PathBuf,
        /// Optional model: predicts on the trailing validation split instead
        #[arg(long)]
        model: Option<PathBuf>,
        /// Optional destination for the key=value report (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Train an inverse-learning digital pre-distorter
    DpdTrain {
        /// Drive record u
        #[arg(long)]
        input: PathBuf,
        /// Measured output record y
        #[arg(long)]
        target: PathBuf,
        /// Destination pre-distorter file
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Apply a trained pre-distorter to a drive record
    DpdApply {
        /// Drive record u
        #[arg(long)]
        input: PathBuf,
        /// Pre-distorter file
        #[arg(long)]
        model: PathBuf,
        /// Destination predistorted record
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Validation-NMSE grid over grid-point counts and aperture fractions
    Sweep {
        /// Drive record u
        #[arg(long)]
        input: PathBuf,
        /// Measured output record y
        #[arg(long)]
        target: PathBuf,
        /// Destination grid CSV (rows = T, columns = aperture)
        #[arg(long)]
        output: PathBuf,
        /// Destination long-format CSV (default: grid path with .long.csv)
        #[arg(long = "long-output")]
        long_output: Option<PathBuf>,
        /// Comma-separated grid-point counts
        #[arg(long = "t-list")]
        t_list: String,
        /// Comma-separated aperture fractions
        #[arg(long = "delta-list")]
        delta_list: String,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        format: FormatArg,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            let text = e.to_string();
            let line = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim()
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("error: {line}");
            std::process::exit(2);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("KERNELPA_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .context("KERNELPA_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.verb {
        Verb::Generate {
            output,
            n_samples,
            sample_rate_hz,
            bandwidth_hz,
            drive,
            clip_papr_db,
            seed,
            format,
        } => cmd_generate(
            &output,
            n_samples,
            sample_rate_hz,
            bandwidth_hz,
            drive,
            clip_papr_db,
            seed,
            format.get()?,
        ),
        Verb::Simulate {
            input,
            output,
            pa_config,
            format,
        } => cmd_simulate(&input, &output, pa_config.as_deref(), format.get()?),
        Verb::Fit {
            input,
            target,
            model,
            hyper,
            format,
        } => cmd_fit(&input, &target, &model, &hyper.resolve()?, format.get()?),
        Verb::Analyze {
            input,
            target,
            model,
            output,
            format,
        } => cmd_analyze(&input, &target, &model, output.as_deref(), format.get()?),
        Verb::Prune {
            model,
            output,
            threshold_db,
        } => cmd_prune(&model, &output, threshold_db),
        Verb::Extract {
            model,
            output,
            order,
            domain,
        } => cmd_extract(&model, &output, order, &domain),
        Verb::Identify {
            input,
            target,
            output,
            terms,
            format,
        } => cmd_identify(&input, &target, &output, &terms, format.get()?),
        Verb::Predict {
            input,
            model,
            output,
            format,
        } => cmd_predict(&input, &model, &output, format.get()?),
        Verb::Metrics {
            input,
            target,
            model,
            output,
            hyper,
            format,
        } => cmd_metrics(
            &input,
            &target,
            model.as_deref(),
            output.as_deref(),
            &hyper.resolve()?,
            format.get()?,
        ),
        Verb::DpdTrain {
            input,
            target,
            model,
            hyper,
            format,
        } => cmd_dpd_train(&input, &target, &model, &hyper.resolve()?, format.get()?),
        Verb::DpdApply {
            input,
            model,
            output,
            format,
        } => cmd_dpd_apply(&input, &model, &output, format.get()?),
        Verb::Sweep {
            input,
            target,
            output,
            long_output,
            t_list,
            delta_list,
            hyper,
            format,
        } => cmd_sweep(
            &input,
            &target,
            &output,
            long_output.as_deref(),
            &t_list,
            &delta_list,
            &hyper.resolve()?,
            format.get()?,
        ),
    }
}

fn load(path: &Path, format: SignalFormat) -> Result<ComplexSignal> {
    load_signal(path, format).with_context(|| format!("record {}", path.display()))
}

fn load_pair(
    input: &Path,
    target: &Path,
    format: SignalFormat,
) -> Result<(ComplexSignal, ComplexSignal)> {
    let u = load(input, format)?;
    let y = load(target, format)?;
    if u.len() != y.len() {
        bail!(
            "records disagree in length: {} has {}, {} has {}",
            input.display(),
            u.len(),
            target.display(),
            y.len()
        );
    }
    if u.sample_rate_hz() != y.sample_rate_hz() {
        bail!(
            "records disagree in sample rate: {} vs {}",
            u.sample_rate_hz(),
            y.sample_rate_hz()
        );
    }
    Ok((u, y))
}

/// Leading estimation split of an aligned record pair.
fn estimation_split(
    u: &ComplexSignal,
    y: &ComplexSignal,
    fraction: f64,
) -> Result<(ComplexSignal, ComplexSignal)> {
    let n = (u.len() as f64 * fraction).floor() as usize;
    if n < 2 {
        bail!(
            "estimation split of {} samples is too small (fraction {fraction} of {})",
            n,
            u.len()
        );
    }
    let ue = u.with_samples(
        u.samples()[..n].to_vec(),
        format!("est({})", u.label()),
    )?;
    let ye = y.with_samples(
        y.samples()[..n].to_vec(),
        format!("est({})", y.label()),
    )?;
    Ok((ue, ye))
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    output: &Path,
    n_samples: usize,
    sample_rate_hz: f64,
    bandwidth_hz: f64,
    drive: f64,
    clip_papr_db: Option<f64>,
    seed: u64,
    format: SignalFormat,
) -> Result<()> {
    if !(drive.is_finite() && drive > 0.0) {
        bail!("drive must be positive, got {drive}");
    }
    let mut s = generate(n_samples, sample_rate_hz, bandwidth_hz, seed)?;
    if let Some(target) = clip_papr_db {
        s = clip(&s, target)?;
    }
    if drive != 1.0 {
        s = s.with_samples(
            s.samples().iter().map(|v| v * drive).collect(),
            format!("{}*{drive}", s.label()),
        )?;
    }
    save_signal(output, &s, format)?;
    println!(
        "wrote {} (n_samples = {}, papr_db = {:?})",
        output.display(),
        s.len(),
        papr_db(s.samples())?
    );
    Ok(())
}

fn cmd_simulate(
    input: &Path,
    output: &Path,
    pa_config: Option<&Path>,
    format: SignalFormat,
) -> Result<()> {
    let u = load(input, format)?;
    let cfg = match pa_config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read PA config {}", path.display()))?;
            ReferencePaConfig::from_text(&text)
                .with_context(|| format!("PA config {}", path.display()))?
        }
        None => default_config(),
    };
    let y = reference_pa(&u, &cfg)?;
    save_signal(output, &y, format)?;
    println!("wrote {} (n_samples = {})", output.display(), y.len());
    Ok(())
}

fn cmd_fit(
    input: &Path,
    target: &Path,
    model_path: &Path,
    cfg: &RunConfig,
    format: SignalFormat,
) -> Result<()> {
    let (u, y) = load_pair(input, target, format)?;
    let (ue, ye) = estimation_split(&u, &y, cfg.estimation_fraction)?;
    let model = fit(
        &ue,
        &ye,
        cfg.m_depth,
        cfg.p_max,
        cfg.grid_points,
        cfg.aperture_fraction,
    )?;
    fs::write(model_path, model.to_text())?;
    println!(
        "wrote {} (training nmse_db = {:?}, active bases = {})",
        model_path.display(),
        model.training_report().total_nmse_db(),
        model.active_count()
    );
    Ok(())
}

fn read_np_model(path: &Path) -> Result<NonParametricModel> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read model {}", path.display()))?;
    Ok(NonParametricModel::from_text(&text)
        .with_context(|| format!("model {}", path.display()))?)
}

fn cmd_analyze(
    input: &Path,
    target: &Path,
    model_path: &Path,
    output: Option<&Path>,
    format: SignalFormat,
) -> Result<()> {
    let (u, y) = load_pair(input, target, format)?;
    let model = read_np_model(model_path)?;
    let report = model.contribution_table(&u, &y)?;
    let csv = report.to_csv();
    match output {
        Some(path) => {
            fs::write(path, &csv)?;
            println!("wrote {} ({} rows)", path.display(), report.rows().len());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_prune(model_path: &Path, output: &Path, threshold_db: f64) -> Result<()> {
    if threshold_db == 0.0 || !threshold_db.is_finite() {
        bail!("threshold-db must be a nonzero finite magnitude, got {threshold_db}");
    }
    let model = read_np_model(model_path)?;
    let pruned = model.prune(-threshold_db.abs())?;
    fs::write(output, pruned.to_text())?;
    println!(
        "wrote {} (active bases {} -> {})",
        output.display(),
        model.active_count(),
        pruned.active_count()
    );
    Ok(())
}

fn cmd_extract(model_path: &Path, output: &Path, order: usize, domain: &str) -> Result<()> {
    let model = read_np_model(model_path)?;
    let pm = extract(&model, order)?;
    let pm = match domain {
        "orthogonal" => pm,
        "original" => to_original_domain(&pm, &model)?,
        other => bail!("unknown domain '{other}' (expected original or orthogonal)"),
    };
    fs::write(output, pm.to_text())?;
    println!(
        "wrote {} ({} terms, domain {domain})",
        output.display(),
        pm.terms().len()
    );
    Ok(())
}

fn parse_terms(spec: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (lag, order) = part
            .split_once(':')
            .with_context(|| format!("term '{part}' must be lag:order"))?;
        out.push((
            lag.trim()
                .parse()
                .with_context(|| format!("bad lag in '{part}'"))?,
            order
                .trim()
                .parse()
                .with_context(|| format!("bad order in '{part}'"))?,
        ));
    }
    if out.is_empty() {
        bail!("term list is empty");
    }
    Ok(out)
}

fn cmd_identify(
    input: &Path,
    target: &Path,
    output: &Path,
    terms: &str,
    format: SignalFormat,
) -> Result<()> {
    let (u, y) = load_pair(input, target, format)?;
    let structure = parse_terms(terms)?;
    let pm = identify_least_squares(&structure, &u, &y)?;
    fs::write(output, pm.to_text())?;
    println!(
        "wrote {} (training nmse_db = {:?})",
        output.display(),
        pm.training_nmse_db().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_predict(input: &Path, model_path: &Path, output: &Path, format: SignalFormat) -> Result<()> {
    let u = load(input, format)?;
    let text = fs::read_to_string(model_path)
        .with_context(|| format!("cannot read model {}", model_path.display()))?;
    let first = text.lines().next().unwrap_or("").trim();
    let yhat = match first {
        "kernelpa-model v1" => NonParametricModel::from_text(&text)?.predict(&u)?,
        "kernelpa-parametric v1" => {
            let pm = ParametricModel::from_text(&text)?;
            if pm.domain() != Domain::Original {
                bail!("orthogonal-domain parametric model cannot predict alone; extract with --domain original");
            }
            pm.predict(&u)?
        }
        "kernelpa-dpd v1" => dpd_apply(&DpdModel::from_text(&text)?, &u)?,
        _ => bail!("unrecognized model file {}", model_path.display()),
    };
    save_signal(output, &yhat, format)?;
    println!("wrote {} (n_samples = {})", output.display(), yhat.len());
    Ok(())
}

fn cmd_metrics(
    input: &Path,
    target: &Path,
    model_path: Option<&Path>,
    output: Option<&Path>,
    cfg: &RunConfig,
    format: SignalFormat,
) -> Result<()> {
    let (u, y) = load_pair(input, target, format)?;
    let mut report = String::new();
    match model_path {
        None => {
            report.push_str(&format!(
                "nmse_db = {:?}\n",
                nmse_db(u.samples(), y.samples())?
            ));
            match acepr_db(u.samples(), y.samples(), u.sample_rate_hz(), u.bandwidth_hz()) {
                Ok(v) => report.push_str(&format!("acepr_db = {v:?}\n")),
                Err(_) => report.push_str("acepr_db = nan\n"),
            }
            report.push_str(&format!("papr_input_db = {:?}\n", papr_db(u.samples())?));
            report.push_str(&format!("papr_target_db = {:?}\n", papr_db(y.samples())?));
        }
        Some(path) => {
            let model = read_np_model(path)?;
            let split = (u.len() as f64 * cfg.estimation_fraction).floor() as usize;
            if split >= u.len() {
                bail!("validation split is empty (fraction {})", cfg.estimation_fraction);
            }
            let uv = u.with_samples(
                u.samples()[split..].to_vec(),
                format!("val({})", u.label()),
            )?;
            let yv = &y.samples()[split..];
            let yhat = model.predict(&uv)?;
            let reference = &yv[model.m_depth()..];
            report.push_str(&format!(
                "validation_nmse_db = {:?}\n",
                nmse_db(reference, yhat.samples())?
            ));
            match acepr_db(reference, yhat.samples(), u.sample_rate_hz(), u.bandwidth_hz()) {
                Ok(v) => report.push_str(&format!("validation_acepr_db = {v:?}\n")),
                Err(_) => report.push_str("validation_acepr_db = nan\n"),
            }
            report.push_str(&format!("validation_samples = {}\n", yhat.len()));
        }
    }
    match output {
        Some(path) => {
            fs::write(path, &report)?;
            println!("wrote {}", path.display());
        }
        None => print!("{report}"),
    }
    Ok(())
}

fn cmd_dpd_train(
    input: &Path,
    target: &Path,
    model_path: &Path,
    cfg: &RunConfig,
    format: SignalFormat,
) -> Result<()> {
    let (u, y) = load_pair(input, target, format)?;
    let dpd = dpd_train(
        &u,
        &y,
        cfg.m_depth,
        cfg.p_max,
        cfg.grid_points,
        cfg.aperture_fraction,
    )?;
    fs::write(model_path, dpd.to_text())?;
    let g0 = dpd.gain_normalization();
    println!(
        "wrote {} (g0 = {:?}+{:?}i, training nmse_db = {:?})",
        model_path.display(),
        g0.re,
        g0.im,
        dpd.inner().training_report().total_nmse_db()
    );
    Ok(())
}

fn cmd_dpd_apply(input: &Path, model_path: &Path, output: &Path, format: SignalFormat) -> Result<()> {
    let u = load(input, format)?;
    let text = fs::read_to_string(model_path)
        .with_context(|| format!("cannot read pre-distorter {}", model_path.display()))?;
    let dpd = DpdModel::from_text(&text)?;
    let d = dpd_apply(&dpd, &u)?;
    save_signal(output, &d, format)?;
    println!("wrote {} (n_samples = {})", output.display(), d.len());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(name: &str, spec: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let mut out = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(
            part.parse()
                .map_err(|e| anyhow::anyhow!("bad {name} entry '{part}': {e}"))?,
        );
    }
    if out.is_empty() {
        bail!("{name} list is empty");
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    input: &Path,
    target: &Path,
    output: &Path,
    long_output: Option<&Path>,
    t_list: &str,
    delta_list: &str,
    cfg: &RunConfig,
    format: SignalFormat,
) -> Result<()> {
    let ts: Vec<usize> = parse_list("t", t_list)?;
    let deltas: Vec<f64> = parse_list("delta", delta_list)?;
    let (u, y) = load_pair(input, target, format)?;
    let (ue, ye) = estimation_split(&u, &y, cfg.estimation_fraction)?;
    let split = ue.len();

    let mut grid = String::from("t");
    for d in &deltas {
        grid.push_str(&format!(",{d:?}"));
    }
    grid.push('\n');
    let mut long = String::from("t,delta,nmse_db\n");

    for &t in &ts {
        grid.push_str(&t.to_string());
        for &d in &deltas {
            let cell = validation_nmse_for(&ue, &ye, &u, &y, split, cfg, t, d);
            match cell {
                Some(v) => {
                    grid.push_str(&format!(",{v:?}"));
                    long.push_str(&format!("{t},{d:?},{v:?}\n"));
                }
                None => grid.push(','),
            }
        }
        grid.push('\n');
    }

    fs::write(output, &grid)?;
    let long_path = match long_output {
        Some(p) => p.to_path_buf(),
        None => output.with_extension("long.csv"),
    };
    fs::write(&long_path, &long)?;
    println!(
        "wrote {} and {} ({} cells)",
        output.display(),
        long_path.display(),
        ts.len() * deltas.len()
    );
    Ok(())
}

/// One sweep cell: fit on the estimation split, score on the validation
/// split. Any failure yields an empty cell rather than an error.
fn validation_nmse_for(
    ue: &ComplexSignal,
    ye: &ComplexSignal,
    u: &ComplexSignal,
    y: &ComplexSignal,
    split: usize,
    cfg: &RunConfig,
    t: usize,
    delta: f64,
) -> Option<f64> {
    let model = fit(ue, ye, cfg.m_depth, cfg.p_max, t, delta).ok()?;
    let uv = u
        .with_samples(u.samples()[split..].to_vec(), "val")
        .ok()?;
    let yhat = model.predict(&uv).ok()?;
    let reference = &y.samples()[split + model.m_depth()..];
    nmse_db(reference, yhat.samples()).ok()
}
