//! Joint detection/decoding achievability, the ensemble converse, and the
//! genie-aided DT and metaconverse references.

use super::{
    best_decoding_point, best_skew, log2_code_size, BoundFlag, BoundKind, BoundResult,
    JointSamples, McConfig, TargetProbabilities, LN_2,
};
use crate::channel::{ChannelSpec, Measure, Statistic};
use crate::error::{domain, Error, Result};
use crate::exec;
use crate::np_testing::{LlrSampleSet, NeymanPearson, NpConfig, ProbEstimate, Side};
use crate::numeric::log_add_exp;

/// `1 - α_{x}(P, P)` for the collision term `x = (M - 1) δ / 2`.
pub fn collision_term(m_minus_1: f64, delta: f64) -> f64 {
    (m_minus_1 * delta / 2.0).min(1.0)
}

/// Detection terms whose upper confidence limit stays below this fraction
/// of the targets they are compared with are accepted without the ESS floor.
pub const NEGLIGIBLE_FRACTION: f64 = 0.01;

fn detection_estimate(
    np: &NeymanPearson,
    what: &str,
    est: ProbEstimate,
    scale: f64,
) -> Result<ProbEstimate> {
    if est.ci_high <= NEGLIGIBLE_FRACTION * scale {
        Ok(est)
    } else {
        np.check_ess(what, est)
    }
}

fn decoding_np(i_joint: &LlrSampleSet, cfg: &NpConfig) -> Result<NeymanPearson> {
    NeymanPearson::new(i_joint, &LlrSampleSet::empty(Side::Q), cfg)
}

/// `log2 M` for a converse `M <= num / den`, with a first-order CI.
fn converse_size(num: ProbEstimate, den: ProbEstimate, n: usize, z: f64) -> (f64, (f64, f64), f64) {
    let cap = n as f64;
    if den.value == 0.0 {
        return (cap, (cap, cap), f64::INFINITY);
    }
    let ln_m = num.value.ln() - den.ln_value;
    let spread = z * (num.rel_sd().powi(2) + den.rel_sd().powi(2)).sqrt();
    let est = floor_log2(ln_m, cap);
    let ci = (
        floor_log2(ln_m - spread, cap),
        floor_log2(ln_m + spread, cap),
    );
    (est, ci, ln_m / LN_2)
}

/// `log2` of the integer part of `e^{ln_m}`, clipped at `cap` bits.
fn floor_log2(ln_m: f64, cap: f64) -> f64 {
    if ln_m <= 0.0 {
        return 0.0;
    }
    // ln(M - 1) from ln M
    let ln_m1 = ln_m + (-(-ln_m).exp()).ln_1p();
    log2_code_size(ln_m1, cap).0
}

/// Achievability for joint detection and decoding at the input skew of `spec`.
pub fn joint_achievability(
    spec: &ChannelSpec,
    targets: &TargetProbabilities,
    mc: &McConfig,
) -> Result<BoundResult> {
    let s = JointSamples::draw(spec, mc)?;
    joint_achievability_from(spec.n, spec.p, targets, &s, &mc.np)
}

/// [`joint_achievability`] on pre-drawn samples at blocklength `n`.
pub fn joint_achievability_from(
    n: usize,
    p: f64,
    targets: &TargetProbabilities,
    s: &JointSamples,
    cfg: &NpConfig,
) -> Result<BoundResult> {
    let det = NeymanPearson::new(&s.r_output, &s.r_noise, cfg)?;
    let (a, tp1) = det.alpha_unchecked(targets.efa)?;
    let a = detection_estimate(&det, "detection alpha", a, targets.emd.min(targets.eie))?;
    let base = |r: BoundResult| {
        r.with_param("p", p)
            .with_param("delta1", targets.efa)
            .with_param("gamma1", tp1.threshold)
            .with_param("tau1", tp1.randomization)
            .with_param("detection_alpha", a.value)
    };
    if a.value > targets.emd || a.value >= targets.eie {
        return Ok(base(BoundResult::zero(
            BoundKind::JointAch,
            n,
            BoundFlag::InfeasibleDetection,
        )));
    }
    let budget = (targets.eie - a.value, a.sd);
    let dec = decoding_np(&s.i_joint, cfg)?;
    let Some(pt) = best_decoding_point(&dec, budget, n as f64, cfg.min_ess) else {
        return Ok(base(BoundResult::new(
            BoundKind::JointAch,
            n,
            0.0,
            (0.0, 0.0),
        )));
    };
    let mut r = base(BoundResult::new(BoundKind::JointAch, n, pt.log2m, pt.ci))
        .with_param("budget", budget.0)
        .with_param("delta2", pt.delta.value)
        .with_param("gamma2", pt.gamma)
        .with_param("tau2", 0.0)
        .with_param("alpha2", pt.alpha.value)
        .with_param("log2m_continuous", pt.log2m_cont);
    if pt.log2m_cont >= n as f64 {
        r.flags.push(BoundFlag::CappedAtBlocklength);
    }
    Ok(r)
}

/// Converse for the random-coding ensemble with input skew `spec.p`.
pub fn ensemble_converse(
    spec: &ChannelSpec,
    targets: &TargetProbabilities,
    mc: &McConfig,
) -> Result<BoundResult> {
    let s = JointSamples::draw(spec, mc)?;
    ensemble_converse_from(spec.n, spec.p, targets, &s, &mc.np)
}

/// [`ensemble_converse`] on pre-drawn samples at blocklength `n`.
pub fn ensemble_converse_from(
    n: usize,
    p: f64,
    targets: &TargetProbabilities,
    s: &JointSamples,
    cfg: &NpConfig,
) -> Result<BoundResult> {
    // β_{1-εfa}(P_{Y|∅}, P_Y): the LLR is -r, noise draws are its P side
    let det = NeymanPearson::new(&s.r_noise.reversed(), &s.r_output.reversed(), cfg)?;
    let (b, _) = det.beta_unchecked(1.0 - targets.efa)?;
    let b = detection_estimate(&det, "detection beta", b, targets.emd)?;
    if b.value > targets.emd {
        return Ok(
            BoundResult::zero(BoundKind::EnsembleConv, n, BoundFlag::IndicatorViolated)
                .with_param("p", p)
                .with_param("detection_beta", b.value),
        );
    }
    let dec = decoding_np(&s.i_joint, cfg)?;
    let (d, tp) = dec.beta(1.0 - targets.eie)?;
    let num = ProbEstimate {
        value: 1.0 - b.value,
        ci_low: 1.0 - b.ci_high,
        ci_high: 1.0 - b.ci_low,
        ln_value: (-b.value).ln_1p(),
        ln_ci_low: (-b.ci_high).ln_1p(),
        ln_ci_high: (-b.ci_low).ln_1p(),
        ..b
    };
    let (log2m, ci, cont) = converse_size(num, d, n, dec.z());
    let mut r = BoundResult::new(BoundKind::EnsembleConv, n, log2m, ci)
        .with_param("p", p)
        .with_param("detection_beta", b.value)
        .with_param("decoding_beta", d.value)
        .with_param("gamma", tp.threshold)
        .with_param("tau", tp.randomization)
        .with_param("log2m_continuous", cont.min(n as f64));
    if cont > n as f64 {
        r.flags.push(BoundFlag::CappedAtBlocklength);
    }
    Ok(r)
}

fn check_eie(eie: f64) -> Result<()> {
    if !(eie > 0.0) {
        return Err(domain(format!("eie = {eie} must be positive")));
    }
    Ok(())
}

/// Metaconverse at the equiprobable input: `-log2 β_{1-εie}(P_{Y|X=x}, P_Y)`.
///
/// `spec.p` is ignored.
pub fn metaconverse(spec: &ChannelSpec, eie: f64, mc: &McConfig) -> Result<BoundResult> {
    check_eie(eie)?;
    let half = spec.with_p(0.5)?;
    let mut stream = mc.stream(&half, Measure::Conditional)?;
    stream.advance_to(spec.n)?;
    metaconverse_from(spec.n, eie, &stream.samples(Statistic::I)?, &mc.np)
}

/// [`metaconverse`] from `ı` samples drawn under `P_{Y|X=x}` at `p = 1/2`.
pub fn metaconverse_from(
    n: usize,
    eie: f64,
    i_conditional: &LlrSampleSet,
    cfg: &NpConfig,
) -> Result<BoundResult> {
    check_eie(eie)?;
    if eie >= 1.0 {
        let mut r = BoundResult::new(BoundKind::Metaconverse, n, n as f64, (n as f64, n as f64));
        r.flags.push(BoundFlag::CappedAtBlocklength);
        return Ok(r);
    }
    let np = decoding_np(i_conditional, cfg)?;
    let (d, tp) = np.beta(1.0 - eie)?;
    let (log2m, ci, cont) = converse_size(ProbEstimate::exact(1.0), d, n, np.z());
    let mut r = BoundResult::new(BoundKind::Metaconverse, n, log2m, ci)
        .with_param("p", 0.5)
        .with_param("beta", d.value)
        .with_param("gamma", tp.threshold)
        .with_param("tau", tp.randomization)
        .with_param("log2m_continuous", cont.min(n as f64));
    if cont > n as f64 {
        r.flags.push(BoundFlag::CappedAtBlocklength);
    }
    Ok(r)
}

/// Genie-aided DT achievability at the input skew of `spec`: the largest `M`
/// with `E[exp(-max(0, ı - ln((M-1)/2)))] <= εie`.
pub fn dt_genie(spec: &ChannelSpec, eie: f64, mc: &McConfig) -> Result<BoundResult> {
    check_eie(eie)?;
    let mut stream = mc.stream(spec, Measure::JointPxy)?;
    stream.advance_to(spec.n)?;
    let mut r = dt_genie_from(spec.n, eie, &stream.samples(Statistic::I)?, &mc.np)?;
    r.set_param("p", spec.p);
    Ok(r)
}

/// [`dt_genie`] from `ı` samples drawn under `P_{XY}`.
pub fn dt_genie_from(
    n: usize,
    eie: f64,
    i_joint: &LlrSampleSet,
    cfg: &NpConfig,
) -> Result<BoundResult> {
    check_eie(eie)?;
    let cap = n as f64;
    if eie >= 1.0 {
        let mut r = BoundResult::new(BoundKind::DtGenie, n, cap, (cap, cap));
        r.flags.push(BoundFlag::CappedAtBlocklength);
        return Ok(r);
    }
    let np = decoding_np(i_joint, cfg)?;
    let g = np.groups();
    // ln of the DT expectation at ln c = gamma
    let ln_dt = |gamma: f64| -> f64 {
        let b = np.boundary_above(gamma);
        log_add_exp(np.ln_lower(b), gamma + np.ln_upper(b))
    };
    let ln_eps = eie.ln();
    let mut lo = np.group_value(0) - 60.0;
    let mut hi = np.group_value(g - 1) + 60.0;
    if ln_dt(lo) > ln_eps {
        return Ok(BoundResult::new(BoundKind::DtGenie, n, 0.0, (0.0, 0.0)));
    }
    if ln_dt(hi) <= ln_eps {
        let mut r = BoundResult::new(BoundKind::DtGenie, n, cap, (cap, cap));
        r.flags.push(BoundFlag::CappedAtBlocklength);
        return Ok(r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ln_dt(mid) <= ln_eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            break;
        }
    }
    let gamma = lo;
    let b = np.boundary_above(gamma);
    let (ln_sd, _) = np.inversion_spread(gamma);
    // the expectation grows at rate e^γ Q̂[ı > γ] in γ
    let slope_ln = gamma + np.ln_upper(b);
    let dg = (np.z().ln() + ln_sd - slope_ln).exp();
    let dg = if dg.is_nan() { f64::INFINITY } else { dg };
    let at = |gm: f64| log2_code_size(LN_2 + gm, cap);
    let (log2m, cont) = at(gamma);
    let ci = (at(gamma - dg).0, at(gamma + dg).0);
    let mut r = BoundResult::new(BoundKind::DtGenie, n, log2m, ci)
        .with_param("gamma", gamma)
        .with_param("log2m_continuous", cont);
    if cont >= cap {
        r.flags.push(BoundFlag::CappedAtBlocklength);
    }
    Ok(r)
}

/// Joint achievability maximized over the skew grid with common random
/// numbers. Ties go to the grid point closest to `1/2`.
pub fn optimize_p(
    n: usize,
    rho: f64,
    targets: &TargetProbabilities,
    p_grid: &[f64],
    mc: &McConfig,
) -> Result<(f64, BoundResult)> {
    if p_grid.is_empty() {
        return Err(domain("empty p grid"));
    }
    let specs = p_grid
        .iter()
        .map(|&p| ChannelSpec::new(rho, p, n))
        .collect::<Result<Vec<_>>>()?;
    let inner = McConfig {
        np: NpConfig {
            parallel: false,
            ..mc.np
        },
        ..*mc
    };
    let results = exec::map_indexed(specs.len(), mc.np.parallel, |k| {
        joint_achievability(&specs[k], targets, &inner)
    });
    let results: Vec<Result<BoundResult>> = results
        .into_iter()
        .map(|r| match r {
            Err(e @ Error::Precision { .. }) => Ok(Err(e)),
            Err(e) => Err(e),
            Ok(r) => Ok(Ok(r)),
        })
        .collect::<Result<_>>()?;
    best_skew(p_grid.iter().copied().zip(&results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::np_testing::alpha_from_samples;

    #[test]
    fn collision_matches_generic_alpha_on_identical_measures() {
        let zeros = LlrSampleSet::new(vec![0.0; 50], Side::P, 1).unwrap();
        let zq = LlrSampleSet::new(vec![0.0; 50], Side::Q, 2).unwrap();
        for (m1, d) in [(3.0, 0.1), (10.0, 0.05), (1.0, 0.5), (100.0, 0.5)] {
            let x: f64 = m1 * d / 2.0;
            let generic = if x >= 1.0 {
                1.0
            } else {
                1.0 - alpha_from_samples(&zeros, &zq, x, &NpConfig::default())
                    .unwrap()
                    .0
                    .value
            };
            assert!((collision_term(m1, d) - generic).abs() < 1e-15);
        }
    }

    #[test]
    fn floor_log2_integer_sizes() {
        assert_eq!(floor_log2(0.0, 10.0), 0.0);
        assert!((floor_log2(4f64.ln(), 10.0) - 2.0).abs() < 1e-12);
        assert!((floor_log2(4.7f64.ln(), 10.0) - 2.0).abs() < 1e-12);
    }
}
