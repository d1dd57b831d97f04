use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::config::ExperimentConfig;
use super::dpd::Predistorter;
use crate::error::{Error, Result};
use crate::gmp::{
    build_kernel_matrix_with, effective_memory_depth, kernel_count, max_memory_lag, CoefficientVector,
    KernelMatrix,
};
use crate::pa_sim::{add_noise, ilc_learn_traced, pa_forward, PaModel};
use crate::signal::{evm_db, generate_ofdm, nmse_db, IqSignal};
use crate::solver::{
    block_weighted_lasso, fit_nmse_db, least_squares, ls_refine, BcdConfig, FitTrace, LassoProblem,
};

/// Training data shared by both experiments.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub pa: PaModel,
    /// Linearization target `G`.
    pub target_gain: Complex64,
    pub stimulus: IqSignal,
    /// ILC label `x`.
    pub label: IqSignal,
    /// ILC error per iteration, dB.
    pub ilc_error_db: Vec<f64>,
    /// `nmse_db(PA(s) / G, s)`.
    pub pa_nmse_db: f64,
    /// Scale `c` mapping the stimulus onto the fitting RMS.
    pub input_scale: f64,
    /// Kernel matrix of `c s`.
    pub matrix: KernelMatrix,
    /// `c x`.
    pub fit_label: IqSignal,
}

/// Generates the stimulus, learns the label by ILC and builds the
/// regression problem.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let pa = cfg.load_pa()?;
    let ilc = cfg.ilc_config(pa.smallsignal_gain);
    let stimulus = generate_ofdm(&cfg.signal)?;
    let y = pa_forward(&stimulus, &pa)?.scaled(ilc.target_gain.inv())?;
    let pa_nmse_db = nmse_db(&y, &stimulus)?;
    let learned = ilc_learn_traced(&stimulus, &pa, &ilc)?;
    let (matrix, fit_label, input_scale) = fit_problem(cfg, &stimulus, &learned.label)?;
    Ok(Prepared {
        pa,
        target_gain: ilc.target_gain,
        stimulus,
        label: learned.label,
        ilc_error_db: learned.error_db,
        pa_nmse_db,
        input_scale,
        matrix,
        fit_label,
    })
}

/// Regression problem for an externally supplied stimulus and label: the
/// kernel matrix of `c s`, the label `c x` and `c`.
pub fn fit_problem(
    cfg: &ExperimentConfig,
    stimulus: &IqSignal,
    label: &IqSignal,
) -> Result<(KernelMatrix, IqSignal, f64)> {
    if stimulus.len() != label.len() {
        return Err(Error::Dimension {
            expected: stimulus.len(),
            got: label.len(),
        });
    }
    let scale = cfg.dpd.fit_rms / stimulus.rms();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Degenerate("stimulus has zero power".into()));
    }
    let c = Complex64::new(scale, 0.0);
    let matrix = build_kernel_matrix_with(&stimulus.scaled(c)?, &cfg.structure()?, cfg.dpd.boundary)?;
    Ok((matrix, label.scaled(c)?, scale))
}

/// Standard Lasso at one `lambda`.
#[derive(Debug, Clone)]
pub struct LassoFit {
    pub lambda: f64,
    pub coeffs: CoefficientVector,
    /// Kernel count the search aimed for, if it was a search.
    pub target_count: Option<usize>,
    /// Whether the count landed within 10% of the target (always true for a
    /// fixed `lambda`).
    pub matched: bool,
}

/// Bisection on `log(lambda)` for a standard-Lasso solution with
/// `target` kernels. Keeps the closest count seen (first one on ties) and
/// stops early on an exact hit.
pub fn matched_count_lasso(
    problem: &LassoProblem,
    target: usize,
    zero_threshold: f64,
    bracket: (f64, f64),
    steps: usize,
    bcd: &BcdConfig,
) -> Result<LassoFit> {
    let (mut lo, mut hi) = (bracket.0.ln(), bracket.1.ln());
    let mut best: Option<(usize, f64, CoefficientVector)> = None;
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        let lambda = mid.exp();
        let w = problem.solve(lambda, zero_threshold, bcd)?;
        let count = kernel_count(&w, 0.0);
        let gap = count.abs_diff(target);
        if best.as_ref().is_none_or(|(g, _, _)| gap < *g) {
            best = Some((gap, lambda, w));
        }
        if gap == 0 {
            break;
        }
        // more kernels than wanted: penalize harder
        if count > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (gap, lambda, coeffs) = best.ok_or_else(|| Error::config("lambda search needs at least one step"))?;
    Ok(LassoFit {
        lambda,
        coeffs,
        target_count: Some(target),
        matched: gap as f64 <= 0.1 * target as f64,
    })
}

pub fn standard_lasso(cfg: &ExperimentConfig, matrix: &KernelMatrix, fit_label: &IqSignal, target: usize) -> Result<LassoFit> {
    let problem = LassoProblem::new(matrix, fit_label)?;
    let l = &cfg.standard_lasso;
    match l.lambda {
        Some(lambda) => Ok(LassoFit {
            lambda,
            coeffs: problem.solve(lambda, l.zero_threshold, &cfg.bcd)?,
            target_count: None,
            matched: true,
        }),
        None => matched_count_lasso(
            &problem,
            target,
            l.zero_threshold,
            (l.search_min, l.search_max),
            l.search_steps,
            &cfg.bcd,
        ),
    }
}

/// Structural summary of one coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelStats {
    pub kernel_count: usize,
    /// Deepest past sample touched (`l + m` for lagging kernels).
    pub depth: i64,
    pub max_lag: i64,
    /// Regression NMSE against the training label.
    pub nmse_db: f64,
}

fn stats(p: &Prepared, w: &CoefficientVector) -> Result<ModelStats> {
    Ok(ModelStats {
        kernel_count: kernel_count(w, 0.0),
        depth: effective_memory_depth(w, 0.0),
        max_lag: max_memory_lag(w, 0.0),
        nmse_db: fit_nmse_db(&p.matrix, &p.fit_label, w)?,
    })
}

#[derive(Debug, Clone)]
pub struct Experiment1 {
    pub config_hash: String,
    pub pa_nmse_db: f64,
    pub ilc_error_db: Vec<f64>,
    pub trace: FitTrace,
    pub selected: CoefficientVector,
    pub selected_stats: ModelStats,
    pub ls: CoefficientVector,
    pub ls_stats: ModelStats,
    pub lasso: LassoFit,
    pub lasso_stats: ModelStats,
    pub input_scale: f64,
}

/// Convergence and structure-selection run: block-weighted Lasso traces,
/// the full-GMP least-squares baseline and a standard Lasso at matched
/// kernel count.
pub fn run_experiment1(cfg: &ExperimentConfig) -> Result<Experiment1> {
    let p = prepare(cfg)?;
    run_experiment1_on(cfg, &p)
}

pub fn run_experiment1_on(cfg: &ExperimentConfig, p: &Prepared) -> Result<Experiment1> {
    let st = p.matrix.structure().clone();
    let schedule = cfg.schedule(&st)?;
    let (selected, trace) = block_weighted_lasso(&p.matrix, &p.fit_label, &schedule, &cfg.bcd)?;
    let ls = least_squares(&p.matrix, &p.fit_label)?;
    let lasso = standard_lasso(cfg, &p.matrix, &p.fit_label, kernel_count(&selected, 0.0))?;
    Ok(Experiment1 {
        config_hash: cfg.hash(),
        pa_nmse_db: p.pa_nmse_db,
        ilc_error_db: p.ilc_error_db.clone(),
        selected_stats: stats(p, &selected)?,
        ls_stats: stats(p, &ls)?,
        lasso_stats: stats(p, &lasso.coeffs)?,
        trace,
        selected,
        ls,
        lasso,
        input_scale: p.input_scale,
    })
}

pub const METHODS: [&str; 6] = ["no-dpd", "ls-full", "lasso-nr", "lasso-r", "bwlasso-nr", "bwlasso-r"];

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: String,
    /// Gain-aligned EVM of the PA output on the validation signal.
    pub evm_db: f64,
    /// Regression NMSE against the training label.
    pub nmse_db: f64,
    pub kernel_count: usize,
    pub depth: i64,
    pub max_lag: i64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub config_hash: String,
    pub rows: Vec<ComparisonRow>,
    /// Predistorter per row, same order.
    pub models: Vec<Predistorter>,
    pub lasso_lambda: f64,
    pub lasso_matched: bool,
}

impl ComparisonReport {
    pub fn row(&self, method: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# config-hash: {}\n", self.config_hash);
        let _ = writeln!(
            out,
            "# standard-lasso lambda = {:e} ({})",
            self.lasso_lambda,
            if self.lasso_matched { "count matched" } else { "count not matched" }
        );
        out.push_str("method,evm_db,nmse_db,kernel_count,depth,max_lag\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{},{},{}",
                r.method, r.evm_db, r.nmse_db, r.kernel_count, r.depth, r.max_lag
            );
        }
        out
    }
}

/// Linearization comparison on a validation signal with its own seed.
pub fn run_experiment2(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    let p = prepare(cfg)?;
    let e1 = run_experiment1_on(cfg, &p)?;
    run_experiment2_on(cfg, &p, &e1)
}

/// Experiment 2 reusing the fits of an experiment-1 run on the same data.
pub fn run_experiment2_on(cfg: &ExperimentConfig, p: &Prepared, e1: &Experiment1) -> Result<ComparisonReport> {
    let validation = generate_ofdm(&cfg.validation_signal_config())?;
    let refine = |w: &CoefficientVector| -> Result<CoefficientVector> {
        let support = w.support(0.0);
        if support.is_empty() {
            Ok(w.clone())
        } else {
            ls_refine(&p.matrix, &p.fit_label, &support)
        }
    };
    let coeffs = [
        Predistorter::identity(p.matrix.structure().clone())?.coeffs,
        e1.ls.clone(),
        e1.lasso.coeffs.clone(),
        refine(&e1.lasso.coeffs)?,
        e1.selected.clone(),
        refine(&e1.selected)?,
    ];
    let mut rows = Vec::with_capacity(METHODS.len());
    let mut models = Vec::with_capacity(METHODS.len());
    for (method, w) in METHODS.iter().zip(coeffs) {
        let scale = if *method == "no-dpd" { 1.0 } else { p.input_scale };
        let dpd = Predistorter::new(w, scale)?;
        let st = if *method == "no-dpd" {
            // identity in the pipeline's own scale
            let c = Complex64::new(p.input_scale, 0.0);
            let x = p.stimulus.scaled(c)?;
            ModelStats {
                kernel_count: 1,
                depth: 0,
                max_lag: 0,
                nmse_db: nmse_db(&x, &p.fit_label)?,
            }
        } else {
            stats(p, &dpd.coeffs)?
        };
        let evm = evaluate_through_pa(&dpd, &validation, &p.pa, cfg.pa_noise_snr_db, cfg.seed)?;
        rows.push(ComparisonRow {
            method: method.to_string(),
            evm_db: evm,
            nmse_db: st.nmse_db,
            kernel_count: st.kernel_count,
            depth: st.depth,
            max_lag: st.max_lag,
        });
        models.push(dpd);
    }
    Ok(ComparisonReport {
        config_hash: cfg.hash(),
        rows,
        models,
        lasso_lambda: e1.lasso.lambda,
        lasso_matched: e1.lasso.matched,
    })
}

/// Predistorts `reference`, runs the PA (plus optional receiver noise) and
/// returns the gain-aligned EVM against `reference`.
pub fn evaluate_through_pa(
    dpd: &Predistorter,
    reference: &IqSignal,
    pa: &PaModel,
    noise_snr_db: Option<f64>,
    seed: u64,
) -> Result<f64> {
    let x = dpd.apply(reference)?;
    let mut y = pa_forward(&x, pa)?;
    if let Some(snr) = noise_snr_db {
        y = add_noise(&y, snr, seed)?;
    }
    Ok(evm_db(&y, reference)?.evm_db)
}

fn header(hash: &str) -> String {
    format!("# config-hash: {hash}\n")
}

fn kernel_map_rows(out: &mut String, method: &str, iteration: usize, w: &CoefficientVector) {
    for (d, v) in w.columns().iter().zip(w.values()) {
        let m = d.m.map_or_else(|| "-".to_string(), |m| m.to_string());
        let _ = writeln!(
            out,
            "{method},{iteration},{},{},{},{m},{:e}",
            d.branch.name(),
            d.k,
            d.l,
            v.norm()
        );
    }
}

impl Experiment1 {
    /// `iteration,nmse_db,kernel_count,depth,max_lag,objective`.
    pub fn trace_csv(&self) -> String {
        let mut out = header(&self.config_hash);
        out.push_str("iteration,nmse_db,kernel_count,depth,max_lag,objective\n");
        for r in &self.trace.records {
            let _ = writeln!(
                out,
                "{},{:.6},{},{},{},{:e}",
                r.iteration,
                r.nmse_db,
                r.kernel_count,
                r.effective_memory_depth,
                max_memory_lag(&r.coefficients, 0.0),
                r.objective
            );
        }
        out
    }

    /// Long-format kernel magnitudes: every block-weighted iteration, then
    /// the matched standard Lasso and the full least-squares fit.
    pub fn kernel_maps_csv(&self) -> String {
        let mut out = header(&self.config_hash);
        out.push_str("method,iteration,branch,k,l,m,magnitude\n");
        for r in &self.trace.records {
            kernel_map_rows(&mut out, "bwlasso", r.iteration, &r.coefficients);
        }
        kernel_map_rows(&mut out, "lasso", 0, &self.lasso.coeffs);
        kernel_map_rows(&mut out, "ls", 0, &self.ls);
        out
    }

    pub fn summary(&self) -> String {
        let mut out = header(&self.config_hash);
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("pa.nmse_vs_linear_db", format!("{:.4}", self.pa_nmse_db));
        put(
            "ilc.final_nmse_db",
            format!("{:.4}", self.ilc_error_db.last().copied().unwrap_or(f64::NAN)),
        );
        put("dpd.input_scale", format!("{:e}", self.input_scale));
        for (name, s) in [("ls", &self.ls_stats), ("bwlasso", &self.selected_stats), ("lasso", &self.lasso_stats)] {
            put(&format!("{name}.kernel_count"), s.kernel_count.to_string());
            put(&format!("{name}.depth"), s.depth.to_string());
            put(&format!("{name}.max_lag"), s.max_lag.to_string());
            put(&format!("{name}.nmse_db"), format!("{:.4}", s.nmse_db));
        }
        put("bwlasso.selected_iteration", self.trace.selected_iteration.to_string());
        put("lasso.lambda", format!("{:e}", self.lasso.lambda));
        if let Some(t) = self.lasso.target_count {
            put("lasso.target_count", t.to_string());
            put(
                "lasso.match",
                if self.lasso.matched { "achieved" } else { "not achieved" }.to_string(),
            );
        }
        out
    }

    pub fn files(&self) -> Vec<(&'static str, String)> {
        let comment = vec![format!("config-hash: {}", self.config_hash)];
        let dpd = |w: &CoefficientVector| {
            Predistorter {
                coeffs: w.clone(),
                input_scale: self.input_scale,
            }
            .to_text(&comment)
        };
        vec![
            ("exp1_trace.csv", self.trace_csv()),
            ("exp1_kernel_maps.csv", self.kernel_maps_csv()),
            ("exp1_summary.txt", self.summary()),
            ("exp1_bwlasso.coef", dpd(&self.selected)),
            ("exp1_lasso.coef", dpd(&self.lasso.coeffs)),
            ("exp1_ls.coef", dpd(&self.ls)),
        ]
    }
}

impl ComparisonReport {
    pub fn files(&self) -> Vec<(String, String)> {
        let comment = vec![format!("config-hash: {}", self.config_hash)];
        let mut out = vec![("exp2_report.csv".to_string(), self.to_csv())];
        for (row, m) in self.rows.iter().zip(&self.models) {
            out.push((format!("exp2_{}.coef", row.method), m.to_text(&comment)));
        }
        out
    }
}

/// Writes `files` into `dir`; on any failure the files already written by
/// this call are removed again.
pub fn write_outputs<N: AsRef<str>>(dir: &Path, files: &[(N, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name.as_ref());
        if let Err(e) = std::fs::write(&path, body) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            let _ = std::fs::remove_file(&path);
            return Err(Error::io(path, e));
        }
        written.push(path);
    }
    Ok(written)
}

/// Runs experiment 1 and writes its outputs under the configured directory.
pub fn exp1(cfg: &ExperimentConfig) -> Result<(Experiment1, Vec<PathBuf>)> {
    let e1 = run_experiment1(cfg)?;
    let files = write_outputs(&cfg.output_path(), &e1.files())?;
    Ok((e1, files))
}

/// Runs experiment 2 and writes its outputs under the configured directory.
pub fn exp2(cfg: &ExperimentConfig) -> Result<(ComparisonReport, Vec<PathBuf>)> {
    let report = run_experiment2(cfg)?;
    let files = write_outputs(&cfg.output_path(), &report.files())?;
    Ok((report, files))
}
