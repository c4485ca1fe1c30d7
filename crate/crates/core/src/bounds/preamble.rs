//! Detection by a known preamble followed by separate decoding of the data part.

use super::{
    best_decoding_point, BoundFlag, BoundKind, BoundResult, McConfig, TargetProbabilities,
};
use crate::channel::{ChannelSpec, Measure, Statistic};
use crate::error::{domain, Result};
use crate::np_testing::{LlrSampleSet, NeymanPearson, NpConfig, Side};
use crate::numeric::{q_func, q_inv};

use super::joint::metaconverse_from;

/// Split of `n` channel uses into an all-`+√ρ` preamble and a data part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreambleSplit {
    pub n_p: usize,
    pub n_d: usize,
}

impl PreambleSplit {
    pub fn new(n: usize, n_p: usize) -> Result<Self> {
        if n_p >= n {
            return Err(domain(format!(
                "preamble length {n_p} leaves no data symbols out of {n}"
            )));
        }
        Ok(Self { n_p, n_d: n - n_p })
    }

    pub fn n(&self) -> usize {
        self.n_p + self.n_d
    }
}

/// Operating point of the preamble correlator `ȷ` at a given false-alarm level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionTradeoff {
    pub efa: f64,
    pub emd: f64,
    /// Threshold on `ȷ`; `None` without a preamble.
    pub gamma: Option<f64>,
    /// No preamble: the detector can only guess, so `emd = 1 - efa`.
    pub degenerate: bool,
}

/// Misdetection probability of the preamble test run at false-alarm `efa`.
pub fn detection_tradeoff(n_p: usize, rho: f64, efa: f64) -> Result<DetectionTradeoff> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(domain(format!("rho = {rho} must be positive")));
    }
    if !(efa > 0.0 && efa < 1.0) {
        return Err(domain(format!("efa = {efa} outside (0, 1)")));
    }
    if n_p == 0 {
        return Ok(DetectionTradeoff {
            efa,
            emd: 1.0 - efa,
            gamma: None,
            degenerate: true,
        });
    }
    let a = n_p as f64 * rho;
    let s = a.sqrt();
    let gamma = s * q_inv(efa) - a / 2.0;
    let emd = q_func((a / 2.0 - gamma) / s);
    Ok(DetectionTradeoff {
        efa,
        emd,
        gamma: Some(gamma),
        degenerate: false,
    })
}

/// Smallest preamble below `n_max` whose misdetection meets both `emd` and
/// `eie` targets.
pub fn min_preamble_length(
    n_max: usize,
    rho: f64,
    targets: &TargetProbabilities,
) -> Result<Option<usize>> {
    for n_p in 1..n_max {
        let d = detection_tradeoff(n_p, rho, targets.efa)?;
        if d.emd <= targets.emd && d.emd < targets.eie {
            return Ok(Some(n_p));
        }
    }
    Ok(None)
}

fn data_np(i_data: &LlrSampleSet, cfg: &NpConfig) -> Result<NeymanPearson> {
    NeymanPearson::new(i_data, &LlrSampleSet::empty(Side::Q), cfg)
}

fn data_samples(rho: f64, n_d: usize, mc: &McConfig, measure: Measure) -> Result<LlrSampleSet> {
    let half = ChannelSpec::new(rho, 0.5, n_d)?;
    let mut stream = mc.stream(&half, measure)?;
    stream.advance_to(n_d)?;
    stream.samples(Statistic::I)
}

/// Achievability with preamble detection; the data part uses `p = 1/2`.
pub fn preamble_achievability(
    spec: &ChannelSpec,
    split: &PreambleSplit,
    targets: &TargetProbabilities,
    mc: &McConfig,
) -> Result<BoundResult> {
    check_split(spec, split)?;
    let i_data = data_samples(spec.rho, split.n_d, mc, Measure::JointPxy)?;
    preamble_achievability_from(
        spec.rho,
        split,
        targets,
        &data_np(&i_data, &mc.np)?,
        mc.np.min_ess,
    )
}

fn check_split(spec: &ChannelSpec, split: &PreambleSplit) -> Result<()> {
    if split.n() != spec.n || split.n_d == 0 {
        return Err(domain(format!(
            "split {}+{} does not match blocklength {}",
            split.n_p, split.n_d, spec.n
        )));
    }
    Ok(())
}

/// [`preamble_achievability`] from an estimator over `ı` on the data part.
pub fn preamble_achievability_from(
    rho: f64,
    split: &PreambleSplit,
    targets: &TargetProbabilities,
    data: &NeymanPearson,
    min_ess: f64,
) -> Result<BoundResult> {
    let n = split.n();
    let det = detection_tradeoff(split.n_p, rho, targets.efa)?;
    let base = |r: BoundResult| {
        let r = r
            .with_param("n_p", split.n_p as f64)
            .with_param("n_d", split.n_d as f64)
            .with_param("emd_achieved", det.emd);
        match det.gamma {
            Some(g) => r.with_param("gamma_preamble", g),
            None => r,
        }
    };
    if det.emd > targets.emd || det.emd >= targets.eie {
        return Ok(base(BoundResult::zero(
            BoundKind::PreambleAch,
            n,
            BoundFlag::InfeasibleDetection,
        )));
    }
    let b = (targets.eie - det.emd) / (1.0 - det.emd);
    let Some(pt) = best_decoding_point(data, (b, 0.0), split.n_d as f64, min_ess) else {
        return Ok(base(BoundResult::new(
            BoundKind::PreambleAch,
            n,
            0.0,
            (0.0, 0.0),
        )));
    };
    let mut r = base(BoundResult::new(BoundKind::PreambleAch, n, pt.log2m, pt.ci))
        .with_param("budget", b)
        .with_param("delta", pt.delta.value)
        .with_param("gamma2", pt.gamma)
        .with_param("alpha2", pt.alpha.value)
        .with_param("log2m_continuous", pt.log2m_cont);
    if pt.log2m_cont >= split.n_d as f64 {
        r.flags.push(BoundFlag::CappedAtBlocklength);
    }
    Ok(r)
}

/// Converse for preamble-based transmission: the metaconverse on the data
/// part, reported as a rate over all `n` channel uses.
pub fn preamble_converse(
    spec: &ChannelSpec,
    split: &PreambleSplit,
    eie: f64,
    mc: &McConfig,
) -> Result<BoundResult> {
    check_split(spec, split)?;
    let i_cond = data_samples(spec.rho, split.n_d, mc, Measure::Conditional)?;
    preamble_converse_from(split, eie, &i_cond, &mc.np)
}

/// [`preamble_converse`] from `ı` samples under `P_{Y|X=x}` on the data part.
pub fn preamble_converse_from(
    split: &PreambleSplit,
    eie: f64,
    i_conditional: &LlrSampleSet,
    cfg: &NpConfig,
) -> Result<BoundResult> {
    let mc = metaconverse_from(split.n_d, eie, i_conditional, cfg)?;
    let n = split.n();
    let mut r = BoundResult::new(BoundKind::PreambleConv, n, mc.log2m, mc.ci);
    r.params = mc.params;
    r.flags = mc.flags;
    r.set_param("n_p", split.n_p as f64);
    r.set_param("n_d", split.n_d as f64);
    Ok(r)
}

/// Preamble achievability maximized over the preamble length. Returns the
/// optimal `n_p`, or `None` with a zero-rate result when no length meets
/// the detection targets.
pub fn optimize_np(
    n: usize,
    rho: f64,
    targets: &TargetProbabilities,
    mc: &McConfig,
) -> Result<(Option<usize>, BoundResult)> {
    Ok(optimize_np_many(&[n], rho, targets, mc)?.remove(0))
}

/// [`optimize_np`] for several blocklengths at once, reusing each data-part
/// estimator across every `(n, n_p)` with the same `n_d`.
pub fn optimize_np_many(
    n_list: &[usize],
    rho: f64,
    targets: &TargetProbabilities,
    mc: &McConfig,
) -> Result<Vec<(Option<usize>, BoundResult)>> {
    if let Some(&n) = n_list.iter().find(|&&n| n < 2) {
        return Err(domain(format!("blocklength {n} too short for a preamble")));
    }
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    let mut best: Vec<(Option<usize>, BoundResult)> = n_list
        .iter()
        .map(|&n| {
            (
                None,
                BoundResult::zero(BoundKind::PreambleAch, n, BoundFlag::InfeasibleDetection),
            )
        })
        .collect();
    let Some(np_min) = min_preamble_length(n_max, rho, targets)? else {
        return Ok(best);
    };
    let nd_max = n_max - np_min;
    let half = ChannelSpec::new(rho, 0.5, 1)?;
    let mut stream = mc.stream(&half, Measure::JointPxy)?;
    for n_d in 1..=nd_max {
        stream.advance_to(n_d)?;
        let data = data_np(&stream.samples(Statistic::I)?, &mc.np)?;
        for (k, &n) in n_list.iter().enumerate() {
            if n < n_d + np_min {
                continue;
            }
            let split = PreambleSplit::new(n, n - n_d)?;
            let r = preamble_achievability_from(rho, &split, targets, &data, mc.np.min_ess)?;
            // later n_d means a shorter preamble, which wins ties
            if best[k].0.is_none() || r.log2m >= best[k].1.log2m {
                best[k] = (Some(split.n_p), r);
            }
        }
    }
    Ok(best)
}
