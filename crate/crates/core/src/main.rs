use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dpd_core::gmp::{effective_memory_depth, kernel_count, max_memory_lag};
use dpd_core::pa_sim::{add_noise, ilc_learn_traced, pa_forward};
use dpd_core::pipeline::{self, ExperimentConfig, Predistorter};
use dpd_core::signal::{evm_db, generate_ofdm, read_iq, write_iq, IqSignal};
use dpd_core::solver::{block_weighted_lasso, least_squares, ls_refine};
use dpd_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "dpd", version, about = "GMP predistortion with block-weighted Lasso kernel selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment config file; built-in defaults when omitted.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set dpd.max_lag=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the OFDM stimulus and write it as an IQ file.
    GenSignal {
        #[command(flatten)]
        common: Common,
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// Use the validation seed instead of the training seed.
        #[arg(long)]
        validation: bool,
    },
    /// Pass an IQ file through the configured PA.
    SimPa {
        #[command(flatten)]
        common: Common,
        #[arg(long, short = 'i')]
        input: PathBuf,
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// Skip receiver noise even if the config sets `pa.noise_snr_db`.
        #[arg(long)]
        no_noise: bool,
    },
    /// Learn the ideal predistorted signal for a stimulus by ILC.
    Ilc {
        #[command(flatten)]
        common: Common,
        /// Stimulus; generated from the config when omitted.
        #[arg(long, short = 's')]
        signal: Option<PathBuf>,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Fit a predistorter to a (stimulus, label) pair.
    Fit {
        #[command(flatten)]
        common: Common,
        method: FitMethod,
        /// Stimulus; with `--label` omitted too, both come from the config.
        #[arg(long, short = 's', requires = "label")]
        signal: Option<PathBuf>,
        #[arg(long, short = 'l', requires = "signal")]
        label: Option<PathBuf>,
        /// Standard-Lasso penalty (overrides `standard_lasso.lambda`).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Least-squares refit of a model on its own support.
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long, short = 'm')]
        model: PathBuf,
        #[arg(long, short = 's', requires = "label")]
        signal: Option<PathBuf>,
        #[arg(long, short = 'l', requires = "signal")]
        label: Option<PathBuf>,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Predistort a signal, run it through the PA and compare with a reference.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, short = 'm')]
        model: PathBuf,
        #[arg(long, short = 's')]
        signal: PathBuf,
        #[arg(long, short = 'r')]
        reference: PathBuf,
        /// Compare the predistorter output itself, without the PA.
        #[arg(long)]
        no_pa: bool,
    },
    /// Convergence and structure-selection experiment.
    Exp1 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Linearization comparison of the six methods.
    Exp2 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FitMethod {
    Ls,
    Lasso,
    Bwlasso,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for item in &common.sets {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got '{item}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn header(cfg: &ExperimentConfig) -> Vec<String> {
    vec![format!("config-hash: {}", cfg.hash())]
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Command-line paths are relative to the working directory, not the config.
fn from_cwd(p: PathBuf) -> Result<PathBuf> {
    if p.is_absolute() {
        return Ok(p);
    }
    let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
    Ok(cwd.join(p))
}

fn training_pair(cfg: &ExperimentConfig, signal: &Option<PathBuf>, label: &Option<PathBuf>) -> Result<(IqSignal, IqSignal)> {
    match (signal, label) {
        (Some(s), Some(x)) => Ok((read_iq(s)?, read_iq(x)?)),
        _ => {
            let p = pipeline::prepare(cfg)?;
            Ok((p.stimulus, p.label))
        }
    }
}

fn describe(dpd: &Predistorter) -> String {
    format!(
        "kernels={} max_l={} deepest_sample={}",
        kernel_count(&dpd.coeffs, 0.0),
        max_memory_lag(&dpd.coeffs, 0.0),
        effective_memory_depth(&dpd.coeffs, 0.0)
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSignal { common, out, validation } => {
            let cfg = load_config(&common)?;
            let oc = if validation { cfg.validation_signal_config() } else { cfg.signal.clone() };
            let s = generate_ofdm(&oc)?;
            write_iq(&s, &out)?;
            println!("wrote {} samples to {}", s.len(), out.display());
        }
        Command::SimPa { common, input, out, no_noise } => {
            let cfg = load_config(&common)?;
            let pa = cfg.load_pa()?;
            let mut y = pa_forward(&read_iq(&input)?, &pa)?;
            if let (Some(snr), false) = (cfg.pa_noise_snr_db, no_noise) {
                y = add_noise(&y, snr, cfg.seed)?;
            }
            write_iq(&y, &out)?;
            println!("wrote {} samples to {}", y.len(), out.display());
        }
        Command::Ilc { common, signal, out } => {
            let cfg = load_config(&common)?;
            let pa = cfg.load_pa()?;
            let s = match signal {
                Some(p) => read_iq(p)?,
                None => generate_ofdm(&cfg.signal)?,
            };
            let outcome = ilc_learn_traced(&s, &pa, &cfg.ilc_config(pa.smallsignal_gain))?;
            write_iq(&outcome.label, &out)?;
            for (i, e) in outcome.error_db.iter().enumerate() {
                println!("iteration={} error_db={e:.4}", i + 1);
            }
        }
        Command::Fit { common, method, signal, label, lambda, out } => {
            let cfg = load_config(&common)?;
            let (s, x) = training_pair(&cfg, &signal, &label)?;
            let (matrix, fit_label, scale) = pipeline::fit_problem(&cfg, &s, &x)?;
            let w = match method {
                FitMethod::Ls => least_squares(&matrix, &fit_label)?,
                FitMethod::Bwlasso => {
                    let schedule = cfg.schedule(matrix.structure())?;
                    block_weighted_lasso(&matrix, &fit_label, &schedule, &cfg.bcd)?.0
                }
                FitMethod::Lasso => {
                    let mut c = cfg.clone();
                    if let Some(l) = lambda {
                        c.standard_lasso.lambda = Some(l);
                    }
                    if c.standard_lasso.lambda.is_none() {
                        return Err(Error::config(
                            "fit lasso needs --lambda or a numeric standard_lasso.lambda",
                        ));
                    }
                    pipeline::standard_lasso(&c, &matrix, &fit_label, 0)?.coeffs
                }
            };
            let dpd = Predistorter::new(w, scale)?;
            write_text(&out, &dpd.to_text(&header(&cfg)))?;
            println!("{}", describe(&dpd));
        }
        Command::Refine { common, model, signal, label, out } => {
            let cfg = load_config(&common)?;
            let dpd = Predistorter::load(&model)?;
            let (s, x) = training_pair(&cfg, &signal, &label)?;
            let (matrix, fit_label, scale) = pipeline::fit_problem(&cfg, &s, &x)?;
            if matrix.structure() != dpd.coeffs.structure() {
                return Err(Error::config("model structure differs from the configured dpd structure"));
            }
            if (scale - dpd.input_scale).abs() > 1e-12 * scale {
                return Err(Error::config(format!(
                    "model was fitted at input scale {} but the data gives {scale}",
                    dpd.input_scale
                )));
            }
            let w = ls_refine(&matrix, &fit_label, &dpd.coeffs.support(0.0))?;
            let refined = Predistorter::new(w, scale)?;
            write_text(&out, &refined.to_text(&header(&cfg)))?;
            println!("{}", describe(&refined));
        }
        Command::Evaluate { common, model, signal, reference, no_pa } => {
            let cfg = load_config(&common)?;
            let dpd = Predistorter::load(&model)?;
            let s = read_iq(&signal)?;
            let r = read_iq(&reference)?;
            let mut y = dpd.apply(&s)?;
            if !no_pa {
                y = pa_forward(&y, &cfg.load_pa()?)?;
                if let Some(snr) = cfg.pa_noise_snr_db {
                    y = add_noise(&y, snr, cfg.seed)?;
                }
            }
            let m = evm_db(&y, &r)?;
            println!(
                "nmse_db={:.4} evm_db={:.4} gain_re={:.6e} gain_im={:.6e}",
                m.nmse_db, m.evm_db, m.aligned_gain.re, m.aligned_gain.im
            );
        }
        Command::Exp1 { common, output_dir } => {
            let mut cfg = load_config(&common)?;
            if let Some(d) = output_dir {
                cfg.output_dir = from_cwd(d)?;
            }
            let (e1, files) = pipeline::exp1(&cfg)?;
            print!("{}", e1.summary());
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Exp2 { common, output_dir } => {
            let mut cfg = load_config(&common)?;
            if let Some(d) = output_dir {
                cfg.output_dir = from_cwd(d)?;
            }
            let (report, files) = pipeline::exp2(&cfg)?;
            print!("{}", report.to_csv());
            for f in files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
