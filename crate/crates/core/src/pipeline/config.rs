//! Experiment configuration files.
//!
//! Line-oriented text, one `section.key = value` per line. Blank lines and
//! lines starting with `#` are ignored, every key may appear at most once,
//! and unknown keys are rejected. Keys not given keep their defaults (see
//! [`ExperimentConfig::default`]). Relative paths are resolved against the
//! directory holding the config file.
//!
//! | key | value |
//! |-----|-------|
//! | `signal.n_subcarriers`, `signal.n_active`, `signal.n_symbols`, `signal.oversampling` | positive integers |
//! | `signal.constellation` | `qpsk`, `qam16`, `qam64` |
//! | `signal.seed`, `signal.validation_seed` | u64; training and validation stimulus |
//! | `signal.target_rms`, `signal.subcarrier_spacing_hz` | positive reals |
//! | `pa.preset` | `builtin` or a path to a PA coefficient file |
//! | `pa.noise_snr_db` | `none` or dB of receiver noise on measured PA outputs |
//! | `ilc.iterations`, `ilc.learning_rate` | ILC loop length and `mu` |
//! | `ilc.target_gain` | `preset` (the PA small-signal gain) or `re,im` |
//! | `dpd.max_lag`, `dpd.max_order`, `dpd.lagging_depth`, `dpd.leading_depth` | GMP search structure `L, K, M_b, M_c` |
//! | `dpd.include_leading` | `true` / `false` |
//! | `dpd.fit_rms` | RMS the signals are rescaled to before fitting |
//! | `dpd.boundary` | `zero-pad` or `discard-warmup` |
//! | `schedule.mode` | `default`, `progressive` or `explicit` |
//! | `schedule.lambda0`, `schedule.threshold0` | linear-block values for `progressive` |
//! | `schedule.lambda`, `schedule.threshold` | `k:value,...` lists for `explicit` |
//! | `bcd.outer_iterations`, `bcd.inner_ridge_iterations`, `bcd.inner_tolerance`, `bcd.ridge_epsilon` | solver controls |
//! | `bcd.keep_best_iterate`, `bcd.cold_start` | `true` / `false` |
//! | `standard_lasso.lambda` | `matched` (search for the block-weighted kernel count) or a value |
//! | `standard_lasso.zero_threshold` | non-negative real |
//! | `standard_lasso.search_min`, `standard_lasso.search_max`, `standard_lasso.search_steps` | bisection bracket and budget |
//! | `run.seed` | u64 seed for receiver noise |
//! | `run.output_dir` | directory for experiment outputs |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gmp::{full_structure, BoundaryMode, GmpStructure};
use crate::pa_sim::{IlcConfig, PaModel};
use crate::signal::{Constellation, OfdmConfig};
use crate::solver::{default_schedule, progressive_schedule, BcdConfig, RegularizationSchedule};

#[derive(Debug, Clone, PartialEq)]
pub enum PresetSource {
    Builtin,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    /// The stock schedule, `lambda_0 = 1e-4`, `tau_0 = 0.17`.
    Default,
    /// The stock growth rule from other linear-block values.
    Progressive { lambda0: f64, threshold0: f64 },
    Explicit {
        lambda: BTreeMap<u32, f64>,
        threshold: BTreeMap<u32, f64>,
    },
}

/// GMP search structure `(L, K, M_b, include_leading, M_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpdSettings {
    pub max_lag: usize,
    pub max_order: u32,
    pub lagging_depth: usize,
    pub include_leading: bool,
    pub leading_depth: usize,
    pub fit_rms: f64,
    pub boundary: BoundaryMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlcSettings {
    pub iterations: usize,
    pub learning_rate: f64,
    /// `None` uses the PA's small-signal gain.
    pub target_gain: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardLassoSettings {
    /// `None` searches for the block-weighted kernel count.
    pub lambda: Option<f64>,
    pub zero_threshold: f64,
    pub search_min: f64,
    pub search_max: f64,
    pub search_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub signal: OfdmConfig,
    pub validation_seed: u64,
    pub pa_preset: PresetSource,
    pub pa_noise_snr_db: Option<f64>,
    pub ilc: IlcSettings,
    pub dpd: DpdSettings,
    pub schedule: ScheduleSpec,
    pub bcd: BcdConfig,
    pub standard_lasso: StandardLassoSettings,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Directory relative paths are resolved against; not serialized.
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    /// The desk-scale experiment: `L = 9, K = 7, M_b = 1` on 16384 samples
    /// of 64-QAM OFDM through the shipped PA.
    fn default() -> Self {
        ExperimentConfig {
            signal: OfdmConfig::default(),
            validation_seed: 2,
            pa_preset: PresetSource::Builtin,
            pa_noise_snr_db: None,
            ilc: IlcSettings {
                iterations: 30,
                learning_rate: 0.5,
                target_gain: None,
            },
            dpd: DpdSettings {
                max_lag: 9,
                max_order: 7,
                lagging_depth: 1,
                include_leading: false,
                leading_depth: 0,
                fit_rms: 1.0,
                boundary: BoundaryMode::ZeroPad,
            },
            schedule: ScheduleSpec::Default,
            bcd: BcdConfig::default(),
            standard_lasso: StandardLassoSettings {
                lambda: None,
                zero_threshold: 0.0,
                search_min: 1e-4,
                search_max: 1e6,
                search_steps: 20,
            },
            seed: 0,
            output_dir: PathBuf::from("out"),
            base_dir: PathBuf::from("."),
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::config(format!("{key}: '{value}' is not {what}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, what))
}

fn parse_pos_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_num(key, value, "a number")?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, value, "a positive number"))
    }
}

fn parse_nonneg_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_num(key, value, "a number")?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(bad(key, value, "a non-negative number"))
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value, "'true' or 'false'")),
    }
}

fn parse_complex(key: &str, value: &str) -> Result<Complex64> {
    let (a, b) = value.split_once(',').ok_or_else(|| bad(key, value, "'re,im'"))?;
    Ok(Complex64::new(
        parse_num(key, a.trim(), "'re,im'")?,
        parse_num(key, b.trim(), "'re,im'")?,
    ))
}

fn parse_order_map(key: &str, value: &str) -> Result<BTreeMap<u32, f64>> {
    let mut out = BTreeMap::new();
    for item in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (k, v) = item.split_once(':').ok_or_else(|| bad(key, item, "'k:value'"))?;
        let k: u32 = parse_num(key, k.trim(), "an order index")?;
        let v = parse_nonneg_f64(key, v.trim())?;
        if out.insert(k, v).is_some() {
            return Err(Error::config(format!("{key}: order k={k} given twice")));
        }
    }
    Ok(out)
}

fn format_order_map(m: &BTreeMap<u32, f64>) -> String {
    m.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(",")
}

fn boundary_name(b: BoundaryMode) -> &'static str {
    match b {
        BoundaryMode::ZeroPad => "zero-pad",
        BoundaryMode::DiscardWarmup => "discard-warmup",
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected 'section.key = value'", n + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if let Some(prev) = seen.insert(k.to_string(), n + 1) {
                return Err(Error::config(format!(
                    "line {}: key '{k}' already set on line {prev}",
                    n + 1
                )));
            }
            cfg.set(k, v)
                .map_err(|e| Error::config(format!("line {}: {}", n + 1, strip_prefix(&e))))?;
        }
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::parse(&text)
            .map_err(|e| Error::config(format!("{}: {}", path.display(), strip_prefix(&e))))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Sets one key, as if it had appeared in the file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "signal.n_subcarriers" => self.signal.n_subcarriers = parse_num(key, v, "an integer")?,
            "signal.n_active" => self.signal.n_active = parse_num(key, v, "an integer")?,
            "signal.n_symbols" => self.signal.n_symbols = parse_num(key, v, "an integer")?,
            "signal.oversampling" => self.signal.oversampling_factor = parse_num(key, v, "an integer")?,
            "signal.constellation" => self.signal.constellation = Constellation::parse(v)?,
            "signal.seed" => self.signal.seed = parse_num(key, v, "an unsigned integer")?,
            "signal.validation_seed" => self.validation_seed = parse_num(key, v, "an unsigned integer")?,
            "signal.target_rms" => self.signal.target_rms = parse_pos_f64(key, v)?,
            "signal.subcarrier_spacing_hz" => self.signal.subcarrier_spacing_hz = parse_pos_f64(key, v)?,
            "pa.preset" => {
                self.pa_preset = match v {
                    "builtin" => PresetSource::Builtin,
                    "" => return Err(bad(key, v, "a path or 'builtin'")),
                    p => PresetSource::File(PathBuf::from(p)),
                }
            }
            "pa.noise_snr_db" => {
                self.pa_noise_snr_db = match v {
                    "none" => None,
                    _ => Some(parse_num(key, v, "a number or 'none'")?),
                }
            }
            "ilc.iterations" => self.ilc.iterations = parse_num(key, v, "an integer")?,
            "ilc.learning_rate" => self.ilc.learning_rate = parse_num(key, v, "a number")?,
            "ilc.target_gain" => {
                self.ilc.target_gain = match v {
                    "preset" => None,
                    _ => Some(parse_complex(key, v)?),
                }
            }
            "dpd.max_lag" => self.dpd.max_lag = parse_num(key, v, "an integer")?,
            "dpd.max_order" => self.dpd.max_order = parse_num(key, v, "an integer")?,
            "dpd.lagging_depth" => self.dpd.lagging_depth = parse_num(key, v, "an integer")?,
            "dpd.include_leading" => self.dpd.include_leading = parse_bool(key, v)?,
            "dpd.leading_depth" => self.dpd.leading_depth = parse_num(key, v, "an integer")?,
            "dpd.fit_rms" => self.dpd.fit_rms = parse_pos_f64(key, v)?,
            "dpd.boundary" => {
                self.dpd.boundary = match v {
                    "zero-pad" => BoundaryMode::ZeroPad,
                    "discard-warmup" => BoundaryMode::DiscardWarmup,
                    _ => return Err(bad(key, v, "'zero-pad' or 'discard-warmup'")),
                }
            }
            "schedule.mode" => {
                self.schedule = match v {
                    "default" => ScheduleSpec::Default,
                    "progressive" => match &self.schedule {
                        ScheduleSpec::Progressive { .. } => self.schedule.clone(),
                        _ => ScheduleSpec::Progressive {
                            lambda0: crate::solver::DEFAULT_LAMBDA0,
                            threshold0: crate::solver::DEFAULT_THRESHOLD0,
                        },
                    },
                    "explicit" => match &self.schedule {
                        ScheduleSpec::Explicit { .. } => self.schedule.clone(),
                        _ => ScheduleSpec::Explicit {
                            lambda: BTreeMap::new(),
                            threshold: BTreeMap::new(),
                        },
                    },
                    _ => return Err(bad(key, v, "'default', 'progressive' or 'explicit'")),
                }
            }
            "schedule.lambda0" | "schedule.threshold0" => {
                let x = if key == "schedule.lambda0" {
                    parse_pos_f64(key, v)?
                } else {
                    parse_nonneg_f64(key, v)?
                };
                let ScheduleSpec::Progressive { lambda0, threshold0 } = &mut self.schedule else {
                    return Err(Error::config(format!("{key} needs 'schedule.mode = progressive' first")));
                };
                if key == "schedule.lambda0" {
                    *lambda0 = x;
                } else {
                    *threshold0 = x;
                }
            }
            "schedule.lambda" | "schedule.threshold" => {
                let m = parse_order_map(key, v)?;
                let ScheduleSpec::Explicit { lambda, threshold } = &mut self.schedule else {
                    return Err(Error::config(format!("{key} needs 'schedule.mode = explicit' first")));
                };
                if key == "schedule.lambda" {
                    *lambda = m;
                } else {
                    *threshold = m;
                }
            }
            "bcd.outer_iterations" => self.bcd.outer_iterations = parse_num(key, v, "an integer")?,
            "bcd.inner_ridge_iterations" => self.bcd.inner_ridge_iterations = parse_num(key, v, "an integer")?,
            "bcd.inner_tolerance" => self.bcd.inner_tolerance = parse_pos_f64(key, v)?,
            "bcd.ridge_epsilon" => self.bcd.ridge_epsilon = parse_pos_f64(key, v)?,
            "bcd.keep_best_iterate" => self.bcd.keep_best_iterate = parse_bool(key, v)?,
            "bcd.cold_start" => self.bcd.cold_start = parse_bool(key, v)?,
            "standard_lasso.lambda" => {
                self.standard_lasso.lambda = match v {
                    "matched" => None,
                    _ => Some(parse_pos_f64(key, v)?),
                }
            }
            "standard_lasso.zero_threshold" => self.standard_lasso.zero_threshold = parse_nonneg_f64(key, v)?,
            "standard_lasso.search_min" => self.standard_lasso.search_min = parse_pos_f64(key, v)?,
            "standard_lasso.search_max" => self.standard_lasso.search_max = parse_pos_f64(key, v)?,
            "standard_lasso.search_steps" => self.standard_lasso.search_steps = parse_num(key, v, "an integer")?,
            "run.seed" => self.seed = parse_num(key, v, "an unsigned integer")?,
            "run.output_dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(Error::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back an equal config (apart
    /// from `base_dir`).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let s = &self.signal;
        put("signal.n_subcarriers", s.n_subcarriers.to_string());
        put("signal.n_active", s.n_active.to_string());
        put("signal.n_symbols", s.n_symbols.to_string());
        put("signal.oversampling", s.oversampling_factor.to_string());
        put("signal.constellation", s.constellation.name().to_string());
        put("signal.seed", s.seed.to_string());
        put("signal.validation_seed", self.validation_seed.to_string());
        put("signal.target_rms", s.target_rms.to_string());
        put("signal.subcarrier_spacing_hz", s.subcarrier_spacing_hz.to_string());
        put(
            "pa.preset",
            match &self.pa_preset {
                PresetSource::Builtin => "builtin".to_string(),
                PresetSource::File(p) => p.display().to_string(),
            },
        );
        put(
            "pa.noise_snr_db",
            self.pa_noise_snr_db.map_or("none".to_string(), |v| v.to_string()),
        );
        put("ilc.iterations", self.ilc.iterations.to_string());
        put("ilc.learning_rate", self.ilc.learning_rate.to_string());
        put(
            "ilc.target_gain",
            self.ilc
                .target_gain
                .map_or("preset".to_string(), |g| format!("{},{}", g.re, g.im)),
        );
        let d = &self.dpd;
        put("dpd.max_lag", d.max_lag.to_string());
        put("dpd.max_order", d.max_order.to_string());
        put("dpd.lagging_depth", d.lagging_depth.to_string());
        put("dpd.include_leading", d.include_leading.to_string());
        put("dpd.leading_depth", d.leading_depth.to_string());
        put("dpd.fit_rms", d.fit_rms.to_string());
        put("dpd.boundary", boundary_name(d.boundary).to_string());
        match &self.schedule {
            ScheduleSpec::Default => put("schedule.mode", "default".into()),
            ScheduleSpec::Progressive { lambda0, threshold0 } => {
                put("schedule.mode", "progressive".into());
                put("schedule.lambda0", lambda0.to_string());
                put("schedule.threshold0", threshold0.to_string());
            }
            ScheduleSpec::Explicit { lambda, threshold } => {
                put("schedule.mode", "explicit".into());
                put("schedule.lambda", format_order_map(lambda));
                put("schedule.threshold", format_order_map(threshold));
            }
        }
        let b = &self.bcd;
        put("bcd.outer_iterations", b.outer_iterations.to_string());
        put("bcd.inner_ridge_iterations", b.inner_ridge_iterations.to_string());
        put("bcd.inner_tolerance", b.inner_tolerance.to_string());
        put("bcd.ridge_epsilon", b.ridge_epsilon.to_string());
        put("bcd.keep_best_iterate", b.keep_best_iterate.to_string());
        put("bcd.cold_start", b.cold_start.to_string());
        let l = &self.standard_lasso;
        put(
            "standard_lasso.lambda",
            l.lambda.map_or("matched".to_string(), |v| v.to_string()),
        );
        put("standard_lasso.zero_threshold", l.zero_threshold.to_string());
        put("standard_lasso.search_min", l.search_min.to_string());
        put("standard_lasso.search_max", l.search_max.to_string());
        put("standard_lasso.search_steps", l.search_steps.to_string());
        put("run.seed", self.seed.to_string());
        put("run.output_dir", self.output_dir.display().to_string());
        out
    }

    /// First 16 hex digits of the SHA-256 of [`to_text`](Self::to_text).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Checks everything that can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        self.ilc_config(Complex64::new(1.0, 0.0)).validate()?;
        self.bcd.validate()?;
        let st = self.structure()?;
        self.schedule(&st)?.check_covers(&st)?;
        let l = &self.standard_lasso;
        if !(l.search_min < l.search_max) || l.search_steps == 0 {
            return Err(Error::config(
                "standard_lasso search needs search_min < search_max and at least one step",
            ));
        }
        Ok(())
    }

    pub fn structure(&self) -> Result<GmpStructure> {
        let d = &self.dpd;
        full_structure(
            d.max_lag,
            d.max_order,
            d.lagging_depth,
            d.include_leading,
            d.leading_depth,
        )
    }

    pub fn schedule(&self, structure: &GmpStructure) -> Result<RegularizationSchedule> {
        match &self.schedule {
            ScheduleSpec::Default => default_schedule(structure),
            ScheduleSpec::Progressive { lambda0, threshold0 } => {
                progressive_schedule(structure, *lambda0, *threshold0)
            }
            ScheduleSpec::Explicit { lambda, threshold } => {
                RegularizationSchedule::new(lambda.clone(), threshold.clone())
            }
        }
    }

    pub fn load_pa(&self) -> Result<PaModel> {
        match &self.pa_preset {
            PresetSource::Builtin => Ok(PaModel::shipped()),
            PresetSource::File(p) => PaModel::load(self.resolve(p)),
        }
    }

    pub fn ilc_config(&self, pa_gain: Complex64) -> IlcConfig {
        IlcConfig {
            iterations: self.ilc.iterations,
            learning_rate: self.ilc.learning_rate,
            target_gain: self.ilc.target_gain.unwrap_or(pa_gain),
        }
    }

    pub fn validation_signal_config(&self) -> OfdmConfig {
        OfdmConfig {
            seed: self.validation_seed,
            ..self.signal.clone()
        }
    }

    /// Factor mapping the pipeline's signal scale onto the fitting scale.
    pub fn fit_scale(&self) -> f64 {
        self.dpd.fit_rms / self.signal.target_rms
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
