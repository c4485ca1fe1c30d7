//! Config-driven rate-curve sweeps and validation runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bounds::{
    best_skew, dt_genie_from, ensemble_converse_from, joint_achievability_from, metaconverse_from,
    min_preamble_length, optimize_np_many, preamble_converse_from, BoundKind, BoundResult,
    JointStreams, McConfig, PreambleSplit, TargetProbabilities,
};
use crate::channel::{db_to_linear, ChannelSpec, Measure, Statistic};
use crate::error::{Error, Result};
use crate::exec;
use crate::np_testing::NpConfig;
use crate::oracle_sim::{validate_theorem1, DecoderConfig, ValidationReport};
use crate::rng::derive_seed;

/// Environment variable that redirects relative output paths.
pub const OUT_DIR_ENV: &str = "PKTBOUND_OUT_DIR";

/// First line of every rate-curve file.
pub const CSV_VERSION_LINE: &str = "# pktbound rate-curve v1";

/// Column header of rate-curve files.
pub const CSV_HEADER: &str = "snr_db,n,bound_kind,rate,log2M,ci_low,ci_high,p_star,n_p_star,flags";

/// Smallest accepted number of samples per statistic.
pub const MIN_SAMPLES: usize = 10_000;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn default_confidence() -> f64 {
    0.99
}

fn default_min_ess() -> f64 {
    10.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    snr_db: Vec<f64>,
    n: Vec<usize>,
    efa: f64,
    emd: f64,
    eie: f64,
    p_grid: Vec<f64>,
    bounds: Vec<String>,
    samples: usize,
    #[serde(default = "default_confidence")]
    confidence: f64,
    #[serde(default = "default_min_ess")]
    min_ess: f64,
    seed: u64,
    output: PathBuf,
}

/// Parameters of a rate-curve sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub n_list: Vec<usize>,
    pub targets: TargetProbabilities,
    pub p_grid: Vec<f64>,
    pub kinds: Vec<BoundKind>,
    pub samples: usize,
    pub confidence: f64,
    pub min_ess: f64,
    pub seed: u64,
    pub output: PathBuf,
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| config_err(e.to_string()))
}

fn check_targets(efa: f64, emd: f64, eie: f64) -> Result<TargetProbabilities> {
    TargetProbabilities::new(efa, emd, eie).map_err(|e| config_err(e.to_string()))
}

fn check_mc(samples: usize, confidence: f64, min_ess: f64) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(config_err(format!(
            "samples = {samples} below {MIN_SAMPLES}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(config_err(format!(
            "confidence = {confidence} outside (0, 1)"
        )));
    }
    if !(min_ess >= 1.0) {
        return Err(config_err(format!("min_ess = {min_ess} below 1")));
    }
    Ok(())
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawSweep = parse_toml(text)?;
        if raw.snr_db.is_empty() {
            return Err(config_err("snr_db is empty"));
        }
        if raw.n.is_empty() {
            return Err(config_err("n is empty"));
        }
        if raw.p_grid.is_empty() {
            return Err(config_err("p_grid is empty"));
        }
        if raw.bounds.is_empty() {
            return Err(config_err("bounds is empty"));
        }
        if let Some(s) = raw.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(config_err(format!("snr_db entry {s} is not finite")));
        }
        if raw.n.contains(&0) {
            return Err(config_err("blocklengths must be positive"));
        }
        if let Some(p) = raw.p_grid.iter().find(|p| !(0.5..=1.0).contains(*p)) {
            return Err(config_err(format!("p_grid entry {p} outside [0.5, 1]")));
        }
        let targets = check_targets(raw.efa, raw.emd, raw.eie)?;
        check_mc(raw.samples, raw.confidence, raw.min_ess)?;
        let mut kinds = raw
            .bounds
            .iter()
            .map(|s| {
                s.parse::<BoundKind>()
                    .map_err(|e| config_err(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        kinds.sort();
        kinds.dedup();
        let mut n_list = raw.n;
        n_list.sort_unstable();
        n_list.dedup();
        if kinds.contains(&BoundKind::PreambleAch) || kinds.contains(&BoundKind::PreambleConv) {
            if n_list[0] < 2 {
                return Err(config_err("preamble bounds need n >= 2"));
            }
        }
        Ok(Self {
            snr_db: raw.snr_db,
            n_list,
            targets,
            p_grid: raw.p_grid,
            kinds,
            samples: raw.samples,
            confidence: raw.confidence,
            min_ess: raw.min_ess,
            seed: raw.seed,
            output: raw.output,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_toml(&text)
    }

    fn mc(&self, snr_index: usize, parallel: bool) -> McConfig {
        McConfig {
            samples: self.samples,
            seed: derive_seed(self.seed, &[snr_index as u64]),
            np: NpConfig {
                confidence: self.confidence,
                min_ess: self.min_ess,
                parallel,
            },
        }
    }
}

/// One row of a rate curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub snr_db: f64,
    pub result: BoundResult,
    pub p_star: Option<f64>,
    pub n_p_star: Option<usize>,
}

/// Bound values over a grid of SNRs, blocklengths and bound kinds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateCurve {
    pub rows: Vec<RateRow>,
}

impl RateCurve {
    /// Sort rows by SNR, bound kind and blocklength.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.snr_db
                .total_cmp(&b.snr_db)
                .then(a.result.kind.cmp(&b.result.kind))
                .then(a.result.n.cmp(&b.result.n))
        });
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CSV_VERSION_LINE}");
        let _ = writeln!(s, "{CSV_HEADER}");
        for row in &self.rows {
            let r = &row.result;
            let (lo, hi) = r.rate_ci();
            let flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
            let _ = writeln!(
                s,
                "{},{},{},{:.8},{:.6},{:.8},{:.8},{},{},{}",
                row.snr_db,
                r.n,
                r.kind,
                r.rate,
                r.log2m,
                lo,
                hi,
                row.p_star.map(|p| p.to_string()).unwrap_or_default(),
                row.n_p_star.map(|p| p.to_string()).unwrap_or_default(),
                flags.join("|")
            );
        }
        s
    }

    /// Rows of one kind at one SNR, in blocklength order.
    pub fn series(&self, snr_db: f64, kind: BoundKind) -> Vec<&RateRow> {
        self.rows
            .iter()
            .filter(|r| r.snr_db == snr_db && r.result.kind == kind)
            .collect()
    }
}

struct SkewPass {
    p: f64,
    joint: Vec<Result<BoundResult>>,
    ensemble: Vec<Result<BoundResult>>,
    dt: Vec<BoundResult>,
}

/// Keep precision failures as per-point results so that one unresolved skew
/// does not abort the whole grid; anything else is fatal.
fn precision_tolerant(r: Result<BoundResult>) -> Result<Result<BoundResult>> {
    match r {
        Err(e @ Error::Precision { .. }) => Ok(Err(e)),
        Err(e) => Err(e),
        Ok(r) => Ok(Ok(r)),
    }
}

fn skew_pass(
    rho: f64,
    p: f64,
    n_list: &[usize],
    targets: &TargetProbabilities,
    mc: &McConfig,
    in_grid: bool,
    kinds: &[BoundKind],
) -> Result<SkewPass> {
    let want_joint = in_grid && kinds.contains(&BoundKind::JointAch);
    let want_ens = in_grid && kinds.contains(&BoundKind::EnsembleConv);
    let want_dt = p == 0.5 && kinds.contains(&BoundKind::DtGenie);
    let mut out = SkewPass {
        p,
        joint: Vec::new(),
        ensemble: Vec::new(),
        dt: Vec::new(),
    };
    let spec = ChannelSpec::new(rho, p, n_list[0])?;
    let mut streams = JointStreams::new(&spec, mc)?;
    for &n in n_list {
        streams.advance_to(n)?;
        let s = streams.samples()?;
        if want_joint {
            out.joint.push(precision_tolerant(joint_achievability_from(
                n, p, targets, &s, &mc.np,
            ))?);
        }
        if want_ens {
            out.ensemble.push(precision_tolerant(ensemble_converse_from(
                n, p, targets, &s, &mc.np,
            ))?);
        }
        if want_dt {
            let mut r = dt_genie_from(n, targets.eie, &s.i_joint, &mc.np)?;
            r.params.insert("p".into(), 0.5);
            out.dt.push(r);
        }
    }
    Ok(out)
}

fn converse_pass(
    rho: f64,
    n_list: &[usize],
    targets: &TargetProbabilities,
    mc: &McConfig,
    kinds: &[BoundKind],
) -> Result<Vec<RateRow>> {
    let want_meta = kinds.contains(&BoundKind::Metaconverse);
    let want_pre = kinds.contains(&BoundKind::PreambleConv);
    let n_max = *n_list.last().expect("nonempty");
    let np_min = if want_pre {
        min_preamble_length(n_max, rho, targets)?
    } else {
        None
    };
    // every data length the converse needs, with the blocklengths it serves
    let mut jobs: BTreeMap<usize, Vec<(usize, Option<usize>)>> = BTreeMap::new();
    for &n in n_list {
        if want_meta {
            jobs.entry(n).or_default().push((n, None));
        }
        if let Some(k) = np_min.filter(|&k| k < n) {
            jobs.entry(n - k).or_default().push((n, Some(k)));
        }
    }
    let mut rows = Vec::new();
    if want_pre {
        for &n in n_list {
            if np_min.is_none_or(|k| k >= n) {
                let mut r = BoundResult {
                    kind: BoundKind::PreambleConv,
                    n,
                    log2m: 0.0,
                    rate: 0.0,
                    ci: (0.0, 0.0),
                    params: BTreeMap::new(),
                    flags: vec![crate::bounds::BoundFlag::InfeasibleDetection],
                };
                r.params.insert("n_d".into(), 0.0);
                rows.push(RateRow {
                    snr_db: 0.0,
                    result: r,
                    p_star: None,
                    n_p_star: None,
                });
            }
        }
    }
    if jobs.is_empty() {
        return Ok(rows);
    }
    let half = ChannelSpec::new(rho, 0.5, 1)?;
    let mut stream = mc.stream(&half, Measure::Conditional)?;
    for (&n_d, uses) in &jobs {
        stream.advance_to(n_d)?;
        let samples = stream.samples(Statistic::I)?;
        for &(n, k) in uses {
            let row = match k {
                None => RateRow {
                    snr_db: 0.0,
                    result: metaconverse_from(n, targets.eie, &samples, &mc.np)?,
                    p_star: Some(0.5),
                    n_p_star: None,
                },
                Some(k) => RateRow {
                    snr_db: 0.0,
                    result: preamble_converse_from(
                        &PreambleSplit::new(n, k)?,
                        targets.eie,
                        &samples,
                        &mc.np,
                    )?,
                    p_star: Some(0.5),
                    n_p_star: Some(k),
                },
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

enum Task {
    Skew { snr: usize, p: f64, in_grid: bool },
    Converse { snr: usize },
    Preamble { snr: usize },
}

enum TaskOut {
    Skew(usize, SkewPass),
    Rows(usize, Vec<RateRow>),
}

/// Evaluate every requested bound. Output is identical for any thread count.
pub fn run_sweep(config: &SweepConfig) -> Result<RateCurve> {
    run_sweep_with(config, exec::PARALLEL_AVAILABLE)
}

/// [`run_sweep`] with explicit control over data parallelism.
pub fn run_sweep_with(config: &SweepConfig, parallel: bool) -> Result<RateCurve> {
    let kinds = &config.kinds;
    let mut passes: Vec<f64> = Vec::new();
    if kinds.contains(&BoundKind::JointAch) || kinds.contains(&BoundKind::EnsembleConv) {
        passes.extend(&config.p_grid);
    }
    if kinds.contains(&BoundKind::DtGenie) && !passes.contains(&0.5) {
        passes.push(0.5);
    }
    let mut tasks = Vec::new();
    for snr in 0..config.snr_db.len() {
        for &p in &passes {
            let in_grid = config.p_grid.contains(&p);
            tasks.push(Task::Skew { snr, p, in_grid });
        }
        if kinds.contains(&BoundKind::Metaconverse) || kinds.contains(&BoundKind::PreambleConv) {
            tasks.push(Task::Converse { snr });
        }
        if kinds.contains(&BoundKind::PreambleAch) {
            tasks.push(Task::Preamble { snr });
        }
    }
    let n_list = &config.n_list;
    let targets = &config.targets;
    let outputs = exec::map_indexed(tasks.len(), parallel, |t| -> Result<TaskOut> {
        match tasks[t] {
            Task::Skew { snr, p, in_grid } => {
                let rho = db_to_linear(config.snr_db[snr]);
                let mc = config.mc(snr, false);
                Ok(TaskOut::Skew(
                    snr,
                    skew_pass(rho, p, n_list, targets, &mc, in_grid, kinds)?,
                ))
            }
            Task::Converse { snr } => {
                let rho = db_to_linear(config.snr_db[snr]);
                let mc = config.mc(snr, false);
                Ok(TaskOut::Rows(
                    snr,
                    converse_pass(rho, n_list, targets, &mc, kinds)?,
                ))
            }
            Task::Preamble { snr } => {
                let rho = db_to_linear(config.snr_db[snr]);
                let mc = config.mc(snr, false);
                let rows = optimize_np_many(n_list, rho, targets, &mc)?
                    .into_iter()
                    .map(|(k, r)| RateRow {
                        snr_db: 0.0,
                        result: r,
                        p_star: Some(0.5),
                        n_p_star: k,
                    })
                    .collect();
                Ok(TaskOut::Rows(snr, rows))
            }
        }
    });

    let mut curve = RateCurve::default();
    let mut skews: Vec<Vec<SkewPass>> = (0..config.snr_db.len()).map(|_| Vec::new()).collect();
    for out in outputs {
        match out? {
            TaskOut::Skew(snr, pass) => skews[snr].push(pass),
            TaskOut::Rows(snr, rows) => curve.rows.extend(rows.into_iter().map(|mut r| {
                r.snr_db = config.snr_db[snr];
                r
            })),
        }
    }
    for (snr, passes) in skews.into_iter().enumerate() {
        let snr_db = config.snr_db[snr];
        for pass in &passes {
            for r in &pass.dt {
                curve.rows.push(RateRow {
                    snr_db,
                    result: r.clone(),
                    p_star: Some(0.5),
                    n_p_star: None,
                });
            }
        }
        let grid: Vec<&SkewPass> = passes
            .iter()
            .filter(|s| !s.joint.is_empty() || !s.ensemble.is_empty())
            .collect();
        if grid.is_empty() {
            continue;
        }
        for i in 0..n_list.len() {
            if kinds.contains(&BoundKind::JointAch) {
                let (p, r) = best_skew(grid.iter().map(|s| (s.p, &s.joint[i])))?;
                curve.rows.push(RateRow {
                    snr_db,
                    result: r,
                    p_star: Some(p),
                    n_p_star: None,
                });
                if kinds.contains(&BoundKind::EnsembleConv) {
                    // reported at the skew maximizing joint achievability
                    let s = grid
                        .iter()
                        .find(|s| s.p == p)
                        .expect("chosen skew is in the grid");
                    curve.rows.push(RateRow {
                        snr_db,
                        result: s.ensemble[i].clone()?,
                        p_star: Some(p),
                        n_p_star: None,
                    });
                }
            } else if kinds.contains(&BoundKind::EnsembleConv) {
                let (p, r) = best_skew(grid.iter().map(|s| (s.p, &s.ensemble[i])))?;
                curve.rows.push(RateRow {
                    snr_db,
                    result: r,
                    p_star: Some(p),
                    n_p_star: None,
                });
            }
        }
    }
    curve.rows.retain(|r| config.kinds.contains(&r.result.kind));
    curve.sort();
    Ok(curve)
}

/// Resolve an output path against [`OUT_DIR_ENV`] when it is relative.
pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            return PathBuf::from(dir).join(path);
        }
    }
    path.to_path_buf()
}

/// Write `contents` to `path`, creating parent directories.
pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidation {
    snr_db: f64,
    p: f64,
    n: usize,
    m: usize,
    efa: f64,
    emd: f64,
    eie: f64,
    samples: usize,
    #[serde(default = "default_confidence")]
    confidence: f64,
    #[serde(default = "default_min_ess")]
    min_ess: f64,
    codebooks: usize,
    trials: usize,
    seed: u64,
    output: PathBuf,
    #[serde(default)]
    gamma1_override: Option<f64>,
    #[serde(default)]
    gamma2_override: Option<f64>,
}

/// Parameters of a decoder validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub spec: ChannelSpec,
    pub snr_db: f64,
    pub m: usize,
    pub targets: TargetProbabilities,
    pub samples: usize,
    pub confidence: f64,
    pub min_ess: f64,
    pub codebooks: usize,
    pub trials: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub gamma1_override: Option<f64>,
    pub gamma2_override: Option<f64>,
}

impl ValidationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawValidation = parse_toml(text)?;
        if raw.trials == 0 {
            return Err(config_err("trials must be positive"));
        }
        if raw.codebooks == 0 {
            return Err(config_err("codebooks must be positive"));
        }
        if raw.m == 0 {
            return Err(config_err("m must be positive"));
        }
        if !raw.snr_db.is_finite() {
            return Err(config_err("snr_db is not finite"));
        }
        let spec = ChannelSpec::from_snr_db(raw.snr_db, raw.p, raw.n)
            .map_err(|e| config_err(e.to_string()))?;
        let targets = check_targets(raw.efa, raw.emd, raw.eie)?;
        check_mc(raw.samples, raw.confidence, raw.min_ess)?;
        for v in [raw.gamma1_override, raw.gamma2_override]
            .into_iter()
            .flatten()
        {
            if v.is_nan() {
                return Err(config_err("threshold override is NaN"));
            }
        }
        Ok(Self {
            spec,
            snr_db: raw.snr_db,
            m: raw.m,
            targets,
            samples: raw.samples,
            confidence: raw.confidence,
            min_ess: raw.min_ess,
            codebooks: raw.codebooks,
            trials: raw.trials,
            seed: raw.seed,
            output: raw.output,
            gamma1_override: raw.gamma1_override,
            gamma2_override: raw.gamma2_override,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_toml(&text)
    }
}

/// Run the decoder validation described by `config`.
pub fn run_validation(config: &ValidationConfig) -> Result<ValidationReport> {
    run_validation_with(config, exec::PARALLEL_AVAILABLE)
}

/// [`run_validation`] with explicit control over data parallelism.
pub fn run_validation_with(config: &ValidationConfig, parallel: bool) -> Result<ValidationReport> {
    let mc = McConfig {
        samples: config.samples,
        seed: config.seed,
        np: NpConfig {
            confidence: config.confidence,
            min_ess: config.min_ess,
            parallel,
        },
    };
    let override_cfg = if config.gamma1_override.is_some() || config.gamma2_override.is_some() {
        let (designed, _, _) =
            crate::oracle_sim::design_decoder(&config.spec, &config.targets, config.m, &mc)?;
        Some(DecoderConfig::new(
            config.gamma1_override.unwrap_or(designed.gamma1),
            designed.tau1,
            config.gamma2_override.unwrap_or(designed.gamma2),
            designed.tau2,
        )?)
    } else {
        None
    };
    validate_theorem1(
        &config.spec,
        &config.targets,
        config.m,
        &mc,
        config.codebooks,
        config.trials,
        override_cfg,
    )
}

/// Path of the per-codebook CSV written next to a validation report.
pub fn codebook_csv_path(report_path: &Path) -> PathBuf {
    let stem = report_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "validation".into());
    report_path.with_file_name(format!("{stem}_codebooks.csv"))
}
