//! Rate bounds: shared result types and the decoding-threshold search.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::channel::{ChannelSpec, LlrStream, Measure, Statistic};
use crate::error::{domain, Error, Result};
use crate::np_testing::{LlrSampleSet, NeymanPearson, NpConfig, ProbEstimate};
use crate::numeric::log_add_exp;
use crate::rng::derive_seed;

mod joint;
mod preamble;

pub use joint::{
    collision_term, dt_genie, dt_genie_from, ensemble_converse, ensemble_converse_from,
    joint_achievability, joint_achievability_from, metaconverse, metaconverse_from, optimize_p,
};
pub use preamble::{
    detection_tradeoff, min_preamble_length, optimize_np, optimize_np_many, preamble_achievability,
    preamble_achievability_from, preamble_converse, preamble_converse_from, DetectionTradeoff,
    PreambleSplit,
};

const LN_2: f64 = std::f64::consts::LN_2;

/// Required false-alarm, misdetection and inclusive-error probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetProbabilities {
    pub efa: f64,
    pub emd: f64,
    pub eie: f64,
}

impl TargetProbabilities {
    pub fn new(efa: f64, emd: f64, eie: f64) -> Result<Self> {
        for (name, v) in [("efa", efa), ("emd", emd), ("eie", eie)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(domain(format!("{name} = {v} outside (0, 1)")));
            }
        }
        Ok(Self { efa, emd, eie })
    }
}

/// Which bound a [`BoundResult`] holds. The declaration order is the CSV row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundKind {
    JointAch,
    EnsembleConv,
    Metaconverse,
    DtGenie,
    PreambleAch,
    PreambleConv,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::JointAch,
        BoundKind::EnsembleConv,
        BoundKind::Metaconverse,
        BoundKind::DtGenie,
        BoundKind::PreambleAch,
        BoundKind::PreambleConv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::JointAch => "joint_ach",
            BoundKind::EnsembleConv => "ensemble_conv",
            BoundKind::Metaconverse => "metaconverse",
            BoundKind::DtGenie => "dt_genie",
            BoundKind::PreambleAch => "preamble_ach",
            BoundKind::PreambleConv => "preamble_conv",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| domain(format!("unknown bound kind '{s}'")))
    }
}

/// Conditions under which a bound degenerates to zero rate or is clipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundFlag {
    /// Detection alone violates the misdetection or inclusive-error target.
    InfeasibleDetection,
    /// The converse indicator (false-alarm/misdetection compatibility) fails.
    IndicatorViolated,
    /// The bound exceeded `n` bits and was clipped to the alphabet size.
    CappedAtBlocklength,
}

impl BoundFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundFlag::InfeasibleDetection => "infeasible_detection",
            BoundFlag::IndicatorViolated => "indicator_violated",
            BoundFlag::CappedAtBlocklength => "capped",
        }
    }
}

/// A bound on `log2 M` at blocklength `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub kind: BoundKind,
    pub n: usize,
    pub log2m: f64,
    /// `log2m / n`, bits per channel use.
    pub rate: f64,
    /// Confidence interval on `log2m`.
    pub ci: (f64, f64),
    /// Free parameters at their optimizing values.
    pub params: BTreeMap<String, f64>,
    pub flags: Vec<BoundFlag>,
}

impl BoundResult {
    fn new(kind: BoundKind, n: usize, log2m: f64, ci: (f64, f64)) -> Self {
        let lo = ci.0.min(log2m);
        let hi = ci.1.max(log2m);
        Self {
            kind,
            n,
            log2m,
            rate: log2m / n as f64,
            ci: (lo, hi),
            params: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    fn zero(kind: BoundKind, n: usize, flag: BoundFlag) -> Self {
        let mut r = Self::new(kind, n, 0.0, (0.0, 0.0));
        r.flags.push(flag);
        r
    }

    fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn set_param(&mut self, key: &str, value: f64) {
        self.params.insert(key.to_string(), value);
    }

    /// Confidence interval on the rate.
    pub fn rate_ci(&self) -> (f64, f64) {
        (self.ci.0 / self.n as f64, self.ci.1 / self.n as f64)
    }

    /// Half-width of the CI on `log2m`.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci.1 - self.ci.0)
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn has_flag(&self, flag: BoundFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Monte-Carlo settings for a bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    /// Samples per statistic and measure.
    pub samples: usize,
    pub seed: u64,
    pub np: NpConfig,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            np: NpConfig::default(),
        }
    }

    /// Stream seed for `measure`. Independent of `p` and `n`, so bounds at
    /// different skews and blocklengths share random numbers.
    pub fn stream_seed(&self, measure: Measure) -> u64 {
        derive_seed(self.seed, &[measure.stream_tag()])
    }

    pub fn stream(&self, spec: &ChannelSpec, measure: Measure) -> Result<LlrStream> {
        LlrStream::new(
            spec,
            measure,
            self.samples,
            self.stream_seed(measure),
            self.np.parallel,
        )
    }
}

/// The three sample sets entering the joint bounds at one `(ρ, p, n)`.
#[derive(Debug, Clone)]
pub struct JointSamples {
    /// `r` under `P_Y` (P side).
    pub r_output: LlrSampleSet,
    /// `r` under `P_{Y|X=∅}` (Q side).
    pub r_noise: LlrSampleSet,
    /// `ı` under `P_{XY}` (P side). Shares its `y` draws with `r_output`.
    pub i_joint: LlrSampleSet,
}

/// Paired joint/noise streams producing [`JointSamples`] at increasing `n`.
#[derive(Debug, Clone)]
pub struct JointStreams {
    joint: LlrStream,
    noise: LlrStream,
}

impl JointStreams {
    pub fn new(spec: &ChannelSpec, mc: &McConfig) -> Result<Self> {
        Ok(Self {
            joint: mc.stream(spec, Measure::JointPxy)?,
            noise: mc.stream(spec, Measure::NoiseOnly)?,
        })
    }

    pub fn advance_to(&mut self, n: usize) -> Result<()> {
        self.joint.advance_to(n)?;
        self.noise.advance_to(n)
    }

    pub fn samples(&self) -> Result<JointSamples> {
        Ok(JointSamples {
            r_output: self.joint.samples(Statistic::R)?,
            r_noise: self.noise.samples(Statistic::R)?,
            i_joint: self.joint.samples(Statistic::I)?,
        })
    }
}

impl JointSamples {
    pub fn draw(spec: &ChannelSpec, mc: &McConfig) -> Result<Self> {
        let mut s = JointStreams::new(spec, mc)?;
        s.advance_to(spec.n)?;
        s.samples()
    }
}

/// `log2 M` for `ln(M - 1)`, rounded down to an integer code size and
/// clipped at `cap` bits. Returns `(floored, continuous)`.
pub(crate) fn log2_code_size(ln_m_minus_1: f64, cap: f64) -> (f64, f64) {
    let ln_m = log_add_exp(0.0, ln_m_minus_1);
    let cont = (ln_m / LN_2).min(cap);
    let floored = if cont < 52.0 {
        let m = ln_m.exp();
        // guard against 2.9999999 from rounding
        (m + 1e-9).floor().max(1.0).log2().min(cap)
    } else {
        cont
    };
    (floored, cont)
}

/// Outcome of the threshold search for the decoding part of an achievability bound.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DecodingPoint {
    pub log2m: f64,
    pub log2m_cont: f64,
    pub ci: (f64, f64),
    /// `Z = 1` iff `ı > gamma`.
    pub gamma: f64,
    pub delta: ProbEstimate,
    pub alpha: ProbEstimate,
}

fn ln_m_minus_1(ln_budget_minus_alpha: f64, ln_delta: f64) -> f64 {
    LN_2 + ln_budget_minus_alpha - ln_delta
}

/// Maximize `M` subject to `α(γ) + (M-1) δ(γ) / 2 <= budget` over the
/// thresholds `γ` on the sample grid.
///
/// `budget` is the available error probability and its standard error.
/// The CI on `log2 M` is first order in the relative errors of the budget
/// slack and of `δ` at the chosen threshold. The objective is linear
/// fractional in the randomization of a tied group, so only group
/// boundaries need to be visited. Boundaries with fewer than `min_ess`
/// draws below them are skipped except the trivial always-accept cut.
pub(crate) fn best_decoding_point(
    np: &NeymanPearson,
    budget: (f64, f64),
    cap: f64,
    min_ess: f64,
) -> Option<DecodingPoint> {
    let (b, b_sd) = budget;
    if !(b > 0.0) {
        return None;
    }
    let ln_b = b.ln();
    let mut best: Option<(usize, f64)> = None;
    let mut draws_below = 0u64;
    for k in 0..=np.groups() {
        if k > 0 {
            draws_below += np.p_draws_in_group(k - 1);
        }
        let lower = np.ln_lower(k);
        if lower >= ln_b {
            break;
        }
        if k > 0 && (draws_below as f64) < min_ess {
            continue;
        }
        let upper = np.ln_upper(k);
        if upper == f64::NEG_INFINITY {
            continue;
        }
        let slack = crate::numeric::log_sub_exp(ln_b, lower);
        let obj = ln_m_minus_1(slack, upper);
        if best.is_none_or(|(_, v)| obj > v) {
            best = Some((k, obj));
        }
    }
    let (k, obj) = best?;
    let (log2m, log2m_cont) = log2_code_size(obj, cap);
    let alpha = np.p_lower_at(k);
    let delta = np.q_upper_at(k);
    let slack = b - alpha.value;
    let rel = ((alpha.sd.powi(2) + b_sd.powi(2)) / slack.powi(2) + delta.rel_sd().powi(2)).sqrt();
    let spread = np.z() * rel;
    let lo = log2_code_size(obj - spread, cap).0;
    let hi = log2_code_size(obj + spread, cap).0;
    let gamma = if k == 0 {
        f64::NEG_INFINITY
    } else {
        np.group_value(k - 1)
    };
    Some(DecodingPoint {
        log2m,
        log2m_cont,
        ci: (lo.min(log2m), hi.max(log2m)),
        gamma,
        delta,
        alpha,
    })
}

/// Largest `log2 M` over the skews that resolved, ties toward `p = 1/2`.
/// The number of skipped skews is recorded as `p_skipped`; if none resolved
/// the first precision error is returned.
pub(crate) fn best_skew<'a>(
    results: impl Iterator<Item = (f64, &'a Result<BoundResult>)>,
) -> Result<(f64, BoundResult)> {
    let mut best: Option<(f64, &BoundResult)> = None;
    let mut first_err = None;
    let mut skipped = 0usize;
    for (p, res) in results {
        let r = match res {
            Ok(r) => r,
            Err(e) => {
                skipped += 1;
                first_err.get_or_insert_with(|| e.clone());
                continue;
            }
        };
        let better = match best {
            None => true,
            Some((bp, b)) => {
                r.log2m > b.log2m || (r.log2m == b.log2m && (p - 0.5).abs() < (bp - 0.5).abs())
            }
        };
        if better {
            best = Some((p, r));
        }
    }
    match best {
        Some((p, r)) => Ok((p, r.clone().with_param("p_skipped", skipped as f64))),
        None => Err(first_err.unwrap_or_else(|| crate::error::domain("empty p grid"))),
    }
}
