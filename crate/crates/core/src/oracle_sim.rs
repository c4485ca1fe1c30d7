//! Brute-force check of the joint achievability bound: the two-threshold
//! detector/decoder run on explicit random codebooks.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bounds::{collision_term, JointSamples, McConfig, TargetProbabilities};
use crate::channel::{ChannelSpec, SymbolLaw};
use crate::error::{domain, Result};
use crate::exec;
use crate::np_testing::{LlrSampleSet, NeymanPearson, ProbEstimate, Side};
use crate::numeric::z_for_confidence;
use crate::rng::{batch_count, batch_range, batch_rng, derive_seed};

/// `M` codewords of length `n` over `{-√ρ, +√ρ}`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    spec: ChannelSpec,
    m: usize,
    symbols: Vec<f64>,
    seed: u64,
}

impl Codebook {
    /// Draw `m` codewords with i.i.d. entries from the input law of `spec`.
    pub fn random(spec: &ChannelSpec, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(domain("codebook needs at least one codeword"));
        }
        let law = spec.symbol_law();
        let mut rng = batch_rng(seed, 0);
        let symbols = (0..m * spec.n).map(|_| law.input(rng.random())).collect();
        Ok(Self {
            spec: *spec,
            m,
            symbols,
            seed,
        })
    }

    /// Codebook from explicit rows.
    pub fn from_rows(spec: &ChannelSpec, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(domain("codebook needs at least one codeword"));
        }
        let amp = spec.amplitude();
        let mut symbols = Vec::with_capacity(rows.len() * spec.n);
        for row in rows {
            if row.len() != spec.n {
                return Err(domain(format!(
                    "codeword length {} != n = {}",
                    row.len(),
                    spec.n
                )));
            }
            if row
                .iter()
                .any(|v| (v.abs() - amp).abs() > 1e-12 * amp.max(1.0))
            {
                return Err(domain("codeword symbols must be ±√ρ"));
            }
            symbols.extend_from_slice(row);
        }
        Ok(Self {
            spec: *spec,
            m: rows.len(),
            symbols,
            seed: 0,
        })
    }

    pub fn spec(&self) -> &ChannelSpec {
        &self.spec
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn blocklength(&self) -> usize {
        self.spec.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn codeword(&self, i: usize) -> &[f64] {
        &self.symbols[i * self.spec.n..(i + 1) * self.spec.n]
    }
}

/// Thresholds of the detection test on `r` and the decoding test on `ı`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    pub gamma1: f64,
    pub tau1: f64,
    pub gamma2: f64,
    pub tau2: f64,
}

impl DecoderConfig {
    pub fn new(gamma1: f64, tau1: f64, gamma2: f64, tau2: f64) -> Result<Self> {
        if gamma1.is_nan() || gamma2.is_nan() {
            return Err(domain("decoder thresholds must not be NaN"));
        }
        if !(0.0..=1.0).contains(&tau1) || !(0.0..=1.0).contains(&tau2) {
            return Err(domain("randomization must lie in [0, 1]"));
        }
        Ok(Self {
            gamma1,
            tau1,
            gamma2,
            tau2,
        })
    }
}

/// Decoder output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Idle,
    /// Zero-based message index.
    Message(usize),
    /// A packet was detected but no codeword passed the decoding test.
    DecodingError,
}

#[inline]
fn threshold_test<R: Rng + ?Sized>(l: f64, gamma: f64, tau: f64, rng: &mut R) -> bool {
    if l > gamma {
        true
    } else if l < gamma {
        false
    } else {
        rng.random::<f64>() < tau
    }
}

fn decode_with<R: Rng + ?Sized>(
    config: &DecoderConfig,
    codebook: &Codebook,
    law: &SymbolLaw,
    y: &[f64],
    rng: &mut R,
) -> Outcome {
    let n = codebook.blocklength();
    let sum_lse: f64 = y.iter().map(|&v| law.lse(v)).sum();
    let r = sum_lse - n as f64 * law.rho / 2.0;
    if !threshold_test(r, config.gamma1, config.tau1, rng) {
        return Outcome::Idle;
    }
    for m in 0..codebook.size() {
        let dot: f64 = codebook.codeword(m).iter().zip(y).map(|(x, v)| x * v).sum();
        if threshold_test(dot - sum_lse, config.gamma2, config.tau2, rng) {
            return Outcome::Message(m);
        }
    }
    Outcome::DecodingError
}

/// Run the detector and decoder on one received block. Tied statistics are
/// resolved with uniforms drawn from `rng`.
pub fn decode<R: Rng + ?Sized>(
    config: &DecoderConfig,
    codebook: &Codebook,
    y: &[f64],
    rng: &mut R,
) -> Result<Outcome> {
    if y.len() != codebook.blocklength() {
        return Err(domain(format!(
            "received block has length {}, expected {}",
            y.len(),
            codebook.blocklength()
        )));
    }
    Ok(decode_with(
        config,
        codebook,
        &codebook.spec.symbol_law(),
        y,
        rng,
    ))
}

/// Empirical false-alarm, misdetection and inclusive-error probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalErrors {
    pub p_fa: ProbEstimate,
    pub p_md: ProbEstimate,
    pub p_ie: ProbEstimate,
    pub counts: ErrorCounts,
}

/// Raw event counts behind [`EmpiricalErrors`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub trials: u64,
    pub fa: u64,
    pub md: u64,
    pub ie: u64,
}

impl ErrorCounts {
    fn add(self, o: ErrorCounts) -> ErrorCounts {
        ErrorCounts {
            trials: self.trials + o.trials,
            fa: self.fa + o.fa,
            md: self.md + o.md,
            ie: self.ie + o.ie,
        }
    }

    pub fn estimates(&self, confidence: f64) -> EmpiricalErrors {
        let z = z_for_confidence(confidence);
        EmpiricalErrors {
            p_fa: ProbEstimate::from_counts(self.fa, self.trials, z),
            p_md: ProbEstimate::from_counts(self.md, self.trials, z),
            p_ie: ProbEstimate::from_counts(self.ie, self.trials, z),
            counts: *self,
        }
    }
}

/// Confidence level of the Wilson intervals on empirical error rates.
pub const WILSON_CONFIDENCE: f64 = 0.95;

fn count_errors(
    codebook: &Codebook,
    config: &DecoderConfig,
    trials: usize,
    seed: u64,
    parallel: bool,
) -> ErrorCounts {
    let spec = codebook.spec;
    let law = spec.symbol_law();
    let n = spec.n;
    let fa_seed = derive_seed(seed, &[1]);
    let tx_seed = derive_seed(seed, &[2]);
    let parts = exec::map_indexed(batch_count(trials), parallel, |b| {
        let mut c = ErrorCounts::default();
        let mut y = vec![0.0; n];
        let mut rng = batch_rng(fa_seed, b);
        for _ in batch_range(trials, b) {
            for v in y.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            if decode_with(config, codebook, &law, &y, &mut rng) != Outcome::Idle {
                c.fa += 1;
            }
        }
        let mut rng = batch_rng(tx_seed, b);
        for _ in batch_range(trials, b) {
            let w = rng.random_range(0..codebook.size());
            for (v, x) in y.iter_mut().zip(codebook.codeword(w)) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = x + z;
            }
            match decode_with(config, codebook, &law, &y, &mut rng) {
                Outcome::Idle => {
                    c.md += 1;
                    c.ie += 1;
                }
                Outcome::Message(m) if m == w => {}
                _ => c.ie += 1,
            }
        }
        c.trials += batch_range(trials, b).len() as u64;
        c
    });
    parts
        .into_iter()
        .fold(ErrorCounts::default(), ErrorCounts::add)
}

/// Simulate `trials` idle blocks and `trials` transmissions of a uniformly
/// chosen message through the decoder.
pub fn measure_errors(
    codebook: &Codebook,
    config: &DecoderConfig,
    trials: usize,
    seed: u64,
    parallel: bool,
) -> Result<EmpiricalErrors> {
    if trials == 0 {
        return Err(domain("trials must be positive"));
    }
    Ok(count_errors(codebook, config, trials, seed, parallel).estimates(WILSON_CONFIDENCE))
}

/// Right-hand sides of the three error constraints of the joint bound at
/// fixed thresholds, with the Monte-Carlo interval on each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPrediction {
    pub fa: ProbEstimate,
    pub md: ProbEstimate,
    pub ie: ProbEstimate,
}

/// Outcome of [`validate_theorem1`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub spec: ChannelSpec,
    pub m: usize,
    pub targets: TargetProbabilities,
    pub decoder: DecoderConfig,
    /// Decoder thresholds used in the bound (may differ from `decoder` in control runs).
    pub designed: DecoderConfig,
    pub delta1: f64,
    pub delta2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub predicted: BoundPrediction,
    pub averaged: EmpiricalErrors,
    pub per_codebook: Vec<EmpiricalErrors>,
    pub pass_fa: bool,
    pub pass_md: bool,
    pub pass_ie: bool,
    /// Codebook-averaged MD never exceeds IE.
    pub containment: bool,
}

/// Number of Wilson half-widths of slack allowed above the bound.
pub const SLACK_HALF_WIDTHS: f64 = 3.0;

fn within(emp: &ProbEstimate, bound: &ProbEstimate) -> bool {
    emp.value - SLACK_HALF_WIDTHS * emp.half_width() <= bound.ci_high
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.pass_fa && self.pass_md && self.pass_ie && self.containment
    }

    /// `key: value` rendering.
    pub fn to_text(&self) -> String {
        let verdict = |b: bool| if b { "PASS" } else { "FAIL" };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}: {v}");
        };
        kv("format", "pktbound validation v1".into());
        kv("rho", format!("{}", self.spec.rho));
        kv("p", format!("{}", self.spec.p));
        kv("n", format!("{}", self.spec.n));
        kv("m", format!("{}", self.m));
        kv("efa", format!("{}", self.targets.efa));
        kv("emd", format!("{}", self.targets.emd));
        kv("eie", format!("{}", self.targets.eie));
        kv("codebooks", format!("{}", self.per_codebook.len()));
        kv("trials", format!("{}", self.averaged.counts.trials));
        kv("delta1", format!("{:.6e}", self.delta1));
        kv("delta2", format!("{:.6e}", self.delta2));
        kv("alpha1", format!("{:.6e}", self.alpha1));
        kv("alpha2", format!("{:.6e}", self.alpha2));
        kv("gamma1", format!("{}", self.designed.gamma1));
        kv("tau1", format!("{}", self.designed.tau1));
        kv("gamma2", format!("{}", self.designed.gamma2));
        kv("tau2", format!("{}", self.designed.tau2));
        kv("decoder_gamma1", format!("{}", self.decoder.gamma1));
        kv("decoder_gamma2", format!("{}", self.decoder.gamma2));
        let rows = [
            ("fa", &self.averaged.p_fa, &self.predicted.fa, self.pass_fa),
            ("md", &self.averaged.p_md, &self.predicted.md, self.pass_md),
            ("ie", &self.averaged.p_ie, &self.predicted.ie, self.pass_ie),
        ];
        for (name, emp, bound, ok) in rows {
            kv(&format!("{name}_empirical"), format!("{:.6e}", emp.value));
            kv(
                &format!("{name}_empirical_ci"),
                format!("[{:.6e}, {:.6e}]", emp.ci_low, emp.ci_high),
            );
            kv(&format!("{name}_bound"), format!("{:.6e}", bound.value));
            kv(
                &format!("{name}_bound_ci_high"),
                format!("{:.6e}", bound.ci_high),
            );
            kv(&format!("{name}_check"), verdict(ok).into());
        }
        kv("containment_check", verdict(self.containment).into());
        kv("result", verdict(self.passed()).into());
        s
    }

    /// Per-codebook errors as CSV.
    pub fn per_codebook_csv(&self) -> String {
        let mut s = String::from("codebook,trials,fa,md,ie,p_fa,p_md,p_ie\n");
        for (k, e) in self.per_codebook.iter().enumerate() {
            let c = e.counts;
            let _ = writeln!(
                s,
                "{k},{},{},{},{},{:.6e},{:.6e},{:.6e}",
                c.trials, c.fa, c.md, c.ie, e.p_fa.value, e.p_md.value, e.p_ie.value
            );
        }
        s
    }
}

/// Detector and decoder thresholds of the joint bound for code size `m`,
/// with the predicted error probabilities.
pub fn design_decoder(
    spec: &ChannelSpec,
    targets: &TargetProbabilities,
    m: usize,
    mc: &McConfig,
) -> Result<(DecoderConfig, BoundPrediction, [f64; 4])> {
    if m == 0 {
        return Err(domain("code size must be positive"));
    }
    let s = JointSamples::draw(spec, mc)?;
    let det = NeymanPearson::new(&s.r_output, &s.r_noise, &mc.np)?;
    let (a, tp1) = det.alpha(targets.efa)?;
    let dec = NeymanPearson::new(&s.i_joint, &LlrSampleSet::empty(Side::Q), &mc.np)?;

    // decoding cut minimizing α(γ) + min(1, (M-1) δ(γ) / 2)
    let m1 = (m - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    let mut below = 0u64;
    for k in 0..=dec.groups() {
        if k > 0 {
            below += dec.p_draws_in_group(k - 1);
            if (below as f64) < mc.np.min_ess {
                continue;
            }
        }
        let v = dec.ln_lower(k).exp() + collision_term(m1, dec.ln_upper(k).exp());
        if v < best.1 {
            best = (k, v);
        }
    }
    let k = best.0;
    let gamma2 = if k == 0 {
        f64::NEG_INFINITY
    } else {
        dec.group_value(k - 1)
    };
    let alpha2 = dec.p_lower_at(k);
    let delta2 = dec.q_upper_at(k);
    let cfg = DecoderConfig::new(tp1.threshold, tp1.randomization, gamma2, 0.0)?;

    let ie = |av: f64, dv: f64, a2: f64| (av + collision_term(m1, dv) + a2).min(1.0);
    let ie_est = ProbEstimate {
        value: ie(a.value, delta2.value, alpha2.value),
        ci_low: ie(a.ci_low, delta2.ci_low, alpha2.ci_low),
        ci_high: ie(a.ci_high, delta2.ci_high, alpha2.ci_high),
        ..a
    };
    let prediction = BoundPrediction {
        fa: ProbEstimate::exact(targets.efa),
        md: a,
        ie: ie_est,
    };
    Ok((
        cfg,
        prediction,
        [targets.efa, delta2.value, a.value, alpha2.value],
    ))
}

/// Compare codebook-averaged empirical errors of the threshold decoder with
/// the joint bound's predictions at the same thresholds.
///
/// With `decoder_override` the simulated decoder uses other thresholds
/// while the prediction stays that of the designed decoder.
pub fn validate_theorem1(
    spec: &ChannelSpec,
    targets: &TargetProbabilities,
    m: usize,
    mc: &McConfig,
    n_codebooks: usize,
    trials: usize,
    decoder_override: Option<DecoderConfig>,
) -> Result<ValidationReport> {
    if n_codebooks == 0 || trials == 0 {
        return Err(domain("codebooks and trials must be positive"));
    }
    let (designed, predicted, [delta1, delta2, alpha1, alpha2]) =
        design_decoder(spec, targets, m, mc)?;
    let decoder = decoder_override.unwrap_or(designed);
    let codebooks = (0..n_codebooks)
        .map(|c| Codebook::random(spec, m, derive_seed(mc.seed, &[0xC0DE, c as u64])))
        .collect::<Result<Vec<_>>>()?;
    let counts = exec::map_indexed(n_codebooks, mc.np.parallel, |c| {
        count_errors(
            &codebooks[c],
            &decoder,
            trials,
            derive_seed(mc.seed, &[0x7E57, c as u64]),
            false,
        )
    });
    let total = counts
        .iter()
        .copied()
        .fold(ErrorCounts::default(), ErrorCounts::add);
    let averaged = total.estimates(WILSON_CONFIDENCE);
    let per_codebook = counts
        .iter()
        .map(|c| c.estimates(WILSON_CONFIDENCE))
        .collect();
    Ok(ValidationReport {
        spec: *spec,
        m,
        targets: *targets,
        decoder,
        designed,
        delta1,
        delta2,
        alpha1,
        alpha2,
        pass_fa: within(&averaged.p_fa, &predicted.fa),
        pass_md: within(&averaged.p_md, &predicted.md),
        pass_ie: within(&averaged.p_ie, &predicted.ie),
        containment: total.md <= total.ie,
        predicted,
        averaged,
        per_codebook,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> ChannelSpec {
        ChannelSpec::new(1.0, 0.5, 4).unwrap()
    }

    #[test]
    fn far_below_threshold_is_idle() {
        let cb = Codebook::random(&spec(), 2, 1).unwrap();
        let cfg = DecoderConfig::new(1e6, 0.0, 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            decode(&cfg, &cb, &[0.0; 4], &mut rng).unwrap(),
            Outcome::Idle
        );
    }

    #[test]
    fn single_codeword_decoded() {
        let s = spec();
        let cb = Codebook::random(&s, 1, 3).unwrap();
        let y: Vec<f64> = cb.codeword(0).iter().map(|x| x + 1e-3).collect();
        let cfg = DecoderConfig::new(f64::NEG_INFINITY, 0.0, -1e6, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            decode(&cfg, &cb, &y, &mut rng).unwrap(),
            Outcome::Message(0)
        );
    }

    #[test]
    fn extreme_detection_thresholds() {
        let cb = Codebook::random(&spec(), 4, 5).unwrap();
        let always = DecoderConfig::new(f64::NEG_INFINITY, 0.0, 0.0, 0.0).unwrap();
        let e = measure_errors(&cb, &always, 500, 9, false).unwrap();
        assert_eq!(e.p_md.value, 0.0);
        assert_eq!(e.p_fa.value, 1.0);
        let never = DecoderConfig::new(f64::INFINITY, 0.0, 0.0, 0.0).unwrap();
        let e = measure_errors(&cb, &never, 500, 9, false).unwrap();
        assert_eq!(e.p_fa.value, 0.0);
        assert_eq!(e.p_md.value, 1.0);
        assert_eq!(e.p_ie.value, 1.0);
    }

    #[test]
    fn parallel_and_sequential_counts_agree() {
        let cb = Codebook::random(&spec(), 4, 5).unwrap();
        let cfg = DecoderConfig::new(-1.0, 0.0, 0.5, 0.0).unwrap();
        let a = measure_errors(&cb, &cfg, 10_000, 11, false).unwrap();
        let b = measure_errors(&cb, &cfg, 10_000, 11, true).unwrap();
        assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(Codebook::random(&spec(), 0, 1).is_err());
        assert!(DecoderConfig::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
        assert!(DecoderConfig::new(0.0, 1.5, 0.0, 0.0).is_err());
        let cb = Codebook::random(&spec(), 1, 1).unwrap();
        let cfg = DecoderConfig::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(measure_errors(&cb, &cfg, 0, 1, false).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(decode(&cfg, &cb, &[0.0; 3], &mut rng).is_err());
    }
}
