//! Neyman–Pearson α/β evaluation for tests that threshold a scalar LLR.
//!
//! Given samples of `L = log dP/dQ` drawn under `P`, under `Q`, or both, the
//! estimator pools them and weights each draw with the balance heuristic
//! (`1 / (N_p e^L + N_q)` towards `Q`, `e^L / (N_p e^L + N_q)` towards `P`).
//! The result behaves like the native empirical estimate in the bulk of a
//! measure and like the change-of-measure estimate `E_P[e^{-L} 1{L > γ}]`
//! deep in its tail, with no switch between the two. All sums are kept in
//! the log domain so tails far below `f64::MIN_POSITIVE` stay representable.

use crate::error::{domain, Error, Result};
use crate::exec;
use crate::numeric::{log_add_exp, log_sub_exp, q_func, q_inv, wilson_interval, z_for_confidence};

/// Measure a set of LLR samples was drawn under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    P,
    Q,
}

impl Side {
    pub fn flipped(self) -> Side {
        match self {
            Side::P => Side::Q,
            Side::Q => Side::P,
        }
    }
}

/// Monte-Carlo draws of `L = log dP/dQ` (nats) under one of the two measures.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrSampleSet {
    values: Vec<f64>,
    drawn_under: Side,
    seed: u64,
}

impl LlrSampleSet {
    /// Wrap sample values. Non-finite values are rejected.
    pub fn new(values: Vec<f64>, drawn_under: Side, seed: u64) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite LLR sample {v}")));
        }
        Ok(Self {
            values,
            drawn_under,
            seed,
        })
    }

    pub fn empty(drawn_under: Side) -> Self {
        Self {
            values: Vec::new(),
            drawn_under,
            seed: 0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn drawn_under(&self) -> Side {
        self.drawn_under
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The same draws viewed as samples of `log dQ/dP`: values negated and
    /// the measure tag swapped.
    pub fn reversed(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
            drawn_under: self.drawn_under.flipped(),
            seed: self.seed,
        }
    }

    /// Sample mean of the importance weight towards the other measure
    /// (`e^{-L}` for P-draws, `e^{L}` for Q-draws) with a normal CI.
    /// For a correct sampler the true mean is one.
    pub fn unit_mean_check(&self, confidence: f64) -> UnitMeanCheck {
        let sign = match self.drawn_under {
            Side::P => -1.0,
            Side::Q => 1.0,
        };
        let n = self.values.len() as f64;
        let w: Vec<f64> = self.values.iter().map(|v| (sign * v).exp()).collect();
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let half = z_for_confidence(confidence) * (var / n).sqrt();
        UnitMeanCheck {
            mean,
            ci_low: mean - half,
            ci_high: mean + half,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitMeanCheck {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl UnitMeanCheck {
    pub fn contains_one(&self) -> bool {
        self.ci_low <= 1.0 && 1.0 <= self.ci_high
    }
}

/// Randomized threshold test: `Z = 1` iff `L > threshold`, and with
/// probability `randomization` when `L == threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestPoint {
    pub threshold: f64,
    pub randomization: f64,
}

impl TestPoint {
    /// Always decide `Z = 1`.
    pub const ALWAYS: TestPoint = TestPoint {
        threshold: f64::NEG_INFINITY,
        randomization: 1.0,
    };
    /// Always decide `Z = 0`.
    pub const NEVER: TestPoint = TestPoint {
        threshold: f64::INFINITY,
        randomization: 0.0,
    };

    /// Decision for an LLR value given an auxiliary uniform draw in `[0, 1)`.
    pub fn decide(&self, llr: f64, uniform: f64) -> bool {
        if llr > self.threshold {
            true
        } else if llr < self.threshold {
            false
        } else {
            uniform < self.randomization
        }
    }
}

/// A probability estimate with a confidence interval.
///
/// The `ln_*` fields carry the same numbers in natural-log form and stay
/// meaningful after the linear ones underflow to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: usize,
    pub ln_value: f64,
    pub ln_ci_low: f64,
    pub ln_ci_high: f64,
    /// Standard error of `value`.
    pub sd: f64,
    /// Kish effective sample size of the contributing weights.
    pub ess: f64,
}

impl ProbEstimate {
    /// A value known without sampling error.
    pub fn exact(value: f64) -> Self {
        let ln = value.ln();
        Self {
            value,
            ci_low: value,
            ci_high: value,
            n_samples: 0,
            ln_value: ln,
            ln_ci_low: ln,
            ln_ci_high: ln,
            sd: 0.0,
            ess: f64::INFINITY,
        }
    }

    /// Binomial proportion `k / n` with a Wilson interval at normal quantile `z`.
    pub fn from_counts(k: u64, n: u64, z: f64) -> Self {
        let value = if n == 0 { 0.0 } else { k as f64 / n as f64 };
        let (lo, hi) = wilson_interval(k, n, z);
        Self {
            value,
            ci_low: lo.min(value),
            ci_high: hi.max(value),
            n_samples: n as usize,
            ln_value: value.ln(),
            ln_ci_low: lo.min(value).ln(),
            ln_ci_high: hi.max(value).ln(),
            sd: if n == 0 {
                0.0
            } else {
                (value * (1.0 - value) / n as f64).sqrt()
            },
            ess: n as f64,
        }
    }

    fn from_log(ln_value: f64, ln_sd: f64, z: f64, n_samples: usize, ess: f64) -> Self {
        let ln_value = ln_value.min(0.0);
        let ln_half = ln_sd + z.ln();
        let ln_ci_low = log_sub_exp(ln_value, ln_half);
        let ln_ci_high = log_add_exp(ln_value, ln_half).min(0.0);
        Self {
            value: ln_value.exp(),
            ci_low: ln_ci_low.exp(),
            ci_high: ln_ci_high.exp(),
            n_samples,
            ln_value,
            ln_ci_low,
            ln_ci_high,
            sd: ln_sd.exp(),
            ess,
        }
    }

    /// Interval `ln value ± z · sd / value`, for quantities obtained by
    /// inverting an estimated threshold, whose error is multiplicative.
    fn from_log_relative(ln_value: f64, ln_sd: f64, z: f64, n_samples: usize, ess: f64) -> Self {
        let ln_value = ln_value.min(0.0);
        let rel = (ln_sd - ln_value).exp();
        let ln_ci_low = ln_value - z * rel;
        let ln_ci_high = (ln_value + z * rel).min(0.0);
        Self {
            value: ln_value.exp(),
            ci_low: ln_ci_low.exp(),
            ci_high: ln_ci_high.exp(),
            n_samples,
            ln_value,
            ln_ci_low,
            ln_ci_high,
            sd: ln_sd.exp(),
            ess,
        }
    }

    /// `sd / value`; infinite for a zero estimate with nonzero error.
    pub fn rel_sd(&self) -> f64 {
        if self.sd == 0.0 {
            0.0
        } else {
            self.sd / self.value
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// Estimator settings shared by all α/β evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NpConfig {
    /// Two-sided confidence level of reported intervals.
    pub confidence: f64,
    /// Minimum Kish effective sample size before an estimate is rejected.
    pub min_ess: f64,
    pub parallel: bool,
}

impl Default for NpConfig {
    fn default() -> Self {
        Self {
            confidence: 0.99,
            min_ess: 10.0,
            parallel: exec::PARALLEL_AVAILABLE,
        }
    }
}

/// Pooled, sorted LLR samples with cumulative balance-heuristic weights.
///
/// Boundaries are indexed `0..=groups`: the test "cut at boundary `b`"
/// decides `Z = 1` exactly for the distinct sample values with index `>= b`.
#[derive(Debug, Clone)]
pub struct NeymanPearson {
    values: Vec<f64>,
    count_p: Vec<u32>,
    count_q: Vec<u32>,
    np: usize,
    nq: usize,
    /// `lower[b] = ln P̂[Z = 0]` for the cut at boundary `b`.
    lower: Vec<f64>,
    /// `upper[b] = ln Q̂[Z = 1]` for the cut at boundary `b`.
    upper: Vec<f64>,
    identical: bool,
    z: f64,
    min_ess: f64,
}

impl NeymanPearson {
    /// Build the estimator. `p` must be drawn under P and `q` under Q;
    /// either may be empty but not both.
    pub fn new(p: &LlrSampleSet, q: &LlrSampleSet, config: &NpConfig) -> Result<Self> {
        if p.drawn_under() != Side::P || q.drawn_under() != Side::Q {
            return Err(domain("sample sets passed with the wrong measure tags"));
        }
        if p.is_empty() && q.is_empty() {
            return Err(domain("both sample sets are empty"));
        }
        if !(config.confidence > 0.0 && config.confidence < 1.0) {
            return Err(domain("confidence level must lie in (0, 1)"));
        }
        let identical = p.values().iter().chain(q.values()).all(|&v| v == 0.0);

        let mut sp = p.values().to_vec();
        let mut sq = q.values().to_vec();
        exec::sort_f64(&mut sp, config.parallel);
        exec::sort_f64(&mut sq, config.parallel);

        let mut values = Vec::with_capacity(sp.len() + sq.len());
        let mut count_p = Vec::with_capacity(sp.len() + sq.len());
        let mut count_q = Vec::with_capacity(sp.len() + sq.len());
        let (mut i, mut j) = (0, 0);
        while i < sp.len() || j < sq.len() {
            let v = match (sp.get(i), sq.get(j)) {
                (Some(&a), Some(&b)) => a.min(b),
                (Some(&a), None) => a,
                (None, Some(&b)) => b,
                (None, None) => unreachable!(),
            };
            let mut cp = 0u32;
            while i < sp.len() && sp[i] == v {
                cp += 1;
                i += 1;
            }
            let mut cq = 0u32;
            while j < sq.len() && sq[j] == v {
                cq += 1;
                j += 1;
            }
            values.push(v);
            count_p.push(cp);
            count_q.push(cq);
        }

        let mut est = Self {
            values,
            count_p,
            count_q,
            np: sp.len(),
            nq: sq.len(),
            lower: Vec::new(),
            upper: Vec::new(),
            identical,
            z: z_for_confidence(config.confidence),
            min_ess: config.min_ess,
        };
        let g = est.values.len();
        let mut lower = Vec::with_capacity(g + 1);
        let mut acc = f64::NEG_INFINITY;
        lower.push(acc);
        for k in 0..g {
            acc = log_add_exp(acc, est.ln_group_p(k));
            lower.push(acc);
        }
        let mut upper = vec![f64::NEG_INFINITY; g + 1];
        let mut acc = f64::NEG_INFINITY;
        for k in (0..g).rev() {
            acc = log_add_exp(acc, est.ln_group_q(k));
            upper[k] = acc;
        }
        est.lower = lower;
        est.upper = upper;
        Ok(est)
    }

    #[inline]
    fn ln_np(&self) -> f64 {
        (self.np as f64).ln()
    }

    #[inline]
    fn ln_nq(&self) -> f64 {
        (self.nq as f64).ln()
    }

    /// Per-draw weight towards P at LLR `l`, natural log.
    #[inline]
    fn ln_weight_p(&self, l: f64) -> f64 {
        -log_add_exp(self.ln_np(), self.ln_nq() - l)
    }

    /// Per-draw weight towards Q at LLR `l`, natural log.
    #[inline]
    fn ln_weight_q(&self, l: f64) -> f64 {
        -log_add_exp(self.ln_np() + l, self.ln_nq())
    }

    fn ln_group_p(&self, k: usize) -> f64 {
        let c = (self.count_p[k] + self.count_q[k]) as f64;
        c.ln() + self.ln_weight_p(self.values[k])
    }

    fn ln_group_q(&self, k: usize) -> f64 {
        let c = (self.count_p[k] + self.count_q[k]) as f64;
        c.ln() + self.ln_weight_q(self.values[k])
    }

    /// Number of distinct sample values.
    pub fn groups(&self) -> usize {
        self.values.len()
    }

    pub fn n_samples(&self) -> usize {
        self.np + self.nq
    }

    /// Distinct sample value at group index `k` (sorted ascending).
    pub fn group_value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// `ln P̂[Z = 0]` for the cut at boundary `b`.
    pub fn ln_lower(&self, b: usize) -> f64 {
        self.lower[b]
    }

    /// `ln Q̂[Z = 1]` for the cut at boundary `b`.
    pub fn ln_upper(&self, b: usize) -> f64 {
        self.upper[b]
    }

    /// First boundary whose cut leaves every sample with value `<= gamma` on the `Z = 0` side.
    pub fn boundary_above(&self, gamma: f64) -> usize {
        self.values.partition_point(|&v| v <= gamma)
    }

    /// Number of P-draws among the groups below boundary `b`.
    pub fn p_draws_below(&self, b: usize) -> u64 {
        self.count_p[..b].iter().map(|&c| c as u64).sum()
    }

    /// Normal quantile for the configured confidence level.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Number of P-draws in group `k`.
    pub fn p_draws_in_group(&self, k: usize) -> u64 {
        self.count_p[k] as u64
    }

    /// True when every pooled sample is exactly zero, i.e. `P = Q`.
    pub fn is_identical(&self) -> bool {
        self.identical
    }

    /// Per-stratum sums of a per-draw function given in log form, returning
    /// `(ln Σ f, ln Var)` of the pooled estimator and the Kish ESS.
    fn moments<F: Fn(f64) -> f64>(
        &self,
        range: std::ops::Range<usize>,
        ln_f: F,
    ) -> (f64, f64, f64) {
        let mut s1 = [f64::NEG_INFINITY; 2];
        let mut s2 = [f64::NEG_INFINITY; 2];
        for k in range {
            let lf = ln_f(self.values[k]);
            if lf == f64::NEG_INFINITY {
                continue;
            }
            for (s, c) in [self.count_p[k], self.count_q[k]].into_iter().enumerate() {
                if c > 0 {
                    let lc = (c as f64).ln();
                    s1[s] = log_add_exp(s1[s], lc + lf);
                    s2[s] = log_add_exp(s2[s], lc + 2.0 * lf);
                }
            }
        }
        let mut ln_var = f64::NEG_INFINITY;
        for (s, n) in [self.np, self.nq].into_iter().enumerate() {
            if n > 0 {
                let t = log_sub_exp(s2[s], 2.0 * s1[s] - (n as f64).ln());
                ln_var = log_add_exp(ln_var, t);
            }
        }
        let ln_sum = log_add_exp(s1[0], s1[1]);
        let ln_sq = log_add_exp(s2[0], s2[1]);
        let ess = if ln_sum == f64::NEG_INFINITY {
            0.0
        } else {
            (2.0 * ln_sum - ln_sq).exp()
        };
        (ln_sum, ln_var, ess)
    }

    /// `P̂[Z = 0]` for the cut at boundary `b`, with CI.
    pub fn p_lower_at(&self, b: usize) -> ProbEstimate {
        if b == 0 {
            return ProbEstimate::exact(0.0);
        }
        let (ln_sum, ln_var, ess) = self.moments(0..b, |l| self.ln_weight_p(l));
        ProbEstimate::from_log(ln_sum, 0.5 * ln_var, self.z, self.n_samples(), ess)
    }

    /// `Q̂[Z = 1]` for the cut at boundary `b`, with CI.
    pub fn q_upper_at(&self, b: usize) -> ProbEstimate {
        if b == self.groups() {
            return ProbEstimate::exact(0.0);
        }
        let (ln_sum, ln_var, ess) = self.moments(b..self.groups(), |l| self.ln_weight_q(l));
        ProbEstimate::from_log(ln_sum, 0.5 * ln_var, self.z, self.n_samples(), ess)
    }

    /// `P̂[L <= gamma]`.
    pub fn prob_p_at_most(&self, gamma: f64) -> ProbEstimate {
        self.p_lower_at(self.boundary_above(gamma))
    }

    /// `Q̂[L > gamma]`.
    pub fn prob_q_above(&self, gamma: f64) -> ProbEstimate {
        self.q_upper_at(self.boundary_above(gamma))
    }

    /// Delta-method standard deviation (log) of α̂ for a test at `gamma`,
    /// accounting for the estimated threshold. The β̂ deviation is this
    /// value minus `gamma`.
    pub(crate) fn inversion_spread(&self, gamma: f64) -> (f64, f64) {
        let (_, ln_var, ess) = self.moments(0..self.groups(), |l| {
            -(l - gamma).max(0.0) + self.ln_weight_p(l)
        });
        (0.5 * ln_var, ess)
    }

    /// Precision error unless `est` meets the effective-sample-size floor.
    pub fn check_ess(&self, what: &str, est: ProbEstimate) -> Result<ProbEstimate> {
        if est.ess < self.min_ess {
            Err(Error::Precision {
                what: what.to_string(),
                estimate: est.value,
                ci_low: est.ci_low,
                ci_high: est.ci_high,
                ess: est.ess,
                floor: self.min_ess,
            })
        } else {
            Ok(est)
        }
    }

    /// `α_β(P, Q)`: smallest `P[Z = 0]` over tests with `Q[Z = 1] <= beta`.
    pub fn alpha(&self, beta: f64) -> Result<(ProbEstimate, TestPoint)> {
        let (est, tp) = self.alpha_unchecked(beta)?;
        Ok((self.check_ess("alpha", est)?, tp))
    }

    /// [`alpha`](Self::alpha) without the effective-sample-size floor, for
    /// callers that only need an upper bound on a small α.
    pub fn alpha_unchecked(&self, beta: f64) -> Result<(ProbEstimate, TestPoint)> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(domain(format!("beta = {beta} outside (0, 1]")));
        }
        if self.identical {
            let tp = TestPoint {
                threshold: 0.0,
                randomization: beta,
            };
            return Ok((ProbEstimate::exact(1.0 - beta), tp));
        }
        let ln_beta = beta.ln();
        if beta >= 1.0 || ln_beta >= self.upper[0] {
            return Ok((ProbEstimate::exact(0.0), TestPoint::ALWAYS));
        }
        // first boundary with Q̂[Z=1] <= beta; the group just below it is randomized
        let b = self.upper.partition_point(|&u| u > ln_beta);
        let g = b - 1;
        let ln_qg = self.ln_group_q(g);
        let tau = (log_sub_exp(ln_beta, self.upper[b]) - ln_qg)
            .exp()
            .clamp(0.0, 1.0);
        let ln_alpha = log_add_exp(self.lower[g], (1.0 - tau).ln() + self.ln_group_p(g));
        let gamma = self.values[g];
        let (ln_sd, ess) = self.inversion_spread(gamma);
        let est = ProbEstimate::from_log_relative(ln_alpha, ln_sd, self.z, self.n_samples(), ess);
        let tp = TestPoint {
            threshold: gamma,
            randomization: tau,
        };
        Ok((est, tp))
    }

    /// `β_α(P, Q)`: smallest `Q[Z = 1]` over tests with `P[Z = 1] >= alpha`.
    pub fn beta(&self, alpha: f64) -> Result<(ProbEstimate, TestPoint)> {
        let (est, tp) = self.beta_unchecked(alpha)?;
        Ok((self.check_ess("beta", est)?, tp))
    }

    /// [`beta`](Self::beta) without the effective-sample-size floor.
    pub fn beta_unchecked(&self, alpha: f64) -> Result<(ProbEstimate, TestPoint)> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(domain(format!("alpha = {alpha} outside [0, 1)")));
        }
        if self.identical {
            let tp = TestPoint {
                threshold: 0.0,
                randomization: alpha,
            };
            return Ok((ProbEstimate::exact(alpha), tp));
        }
        if alpha == 0.0 {
            return Ok((ProbEstimate::exact(0.0), TestPoint::NEVER));
        }
        let ln_t = (1.0 - alpha).ln();
        let g_total = self.groups();
        if ln_t >= self.lower[g_total] {
            return Ok((ProbEstimate::exact(0.0), TestPoint::NEVER));
        }
        // first boundary with P̂[Z=0] > 1 - alpha
        let b = self.lower.partition_point(|&l| l <= ln_t);
        let g = b - 1;
        let ln_pg = self.ln_group_p(g);
        let one_minus_tau = (log_sub_exp(ln_t, self.lower[g]) - ln_pg)
            .exp()
            .clamp(0.0, 1.0);
        let tau = 1.0 - one_minus_tau;
        let ln_beta = log_add_exp(self.upper[b], tau.ln() + self.ln_group_q(g));
        let gamma = self.values[g];
        let (ln_sd_alpha, ess) = self.inversion_spread(gamma);
        let est = ProbEstimate::from_log_relative(
            ln_beta,
            ln_sd_alpha - gamma,
            self.z,
            self.n_samples(),
            ess,
        );
        let tp = TestPoint {
            threshold: gamma,
            randomization: tau,
        };
        Ok((est, tp))
    }
}

/// `α_β(P, Q)` estimated from LLR samples.
pub fn alpha_from_samples(
    p_samples: &LlrSampleSet,
    q_samples: &LlrSampleSet,
    beta: f64,
    config: &NpConfig,
) -> Result<(ProbEstimate, TestPoint)> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(format!("beta = {beta} outside (0, 1]")));
    }
    NeymanPearson::new(p_samples, q_samples, config)?.alpha(beta)
}

/// `β_α(P, Q)` estimated from LLR samples.
pub fn beta_from_samples(
    p_samples: &LlrSampleSet,
    q_samples: &LlrSampleSet,
    alpha: f64,
    config: &NpConfig,
) -> Result<(ProbEstimate, TestPoint)> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(domain(format!("alpha = {alpha} outside [0, 1)")));
    }
    NeymanPearson::new(p_samples, q_samples, config)?.beta(alpha)
}

/// `α_β(P, P) = 1 - β`.
pub fn alpha_identical(beta: f64) -> f64 {
    (1.0 - beta).clamp(0.0, 1.0)
}

/// `β_α(P, P) = α`.
pub fn beta_identical(alpha: f64) -> f64 {
    alpha.clamp(0.0, 1.0)
}

fn check_gaussian(variance: f64) -> Result<f64> {
    if variance > 0.0 && variance.is_finite() {
        Ok(variance.sqrt())
    } else {
        Err(domain(format!("variance = {variance} must be positive")))
    }
}

/// Closed-form `α_β` when the test statistic is `N(mean_p, variance)` under
/// P and `N(mean_q, variance)` under Q.
pub fn gaussian_alpha(mean_p: f64, mean_q: f64, variance: f64, beta: f64) -> Result<f64> {
    let sd = check_gaussian(variance)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(format!("beta = {beta} outside (0, 1]")));
    }
    if mean_p == mean_q {
        return Ok(alpha_identical(beta));
    }
    if beta >= 1.0 {
        return Ok(0.0);
    }
    let gamma = mean_q + sd * q_inv(beta);
    Ok(q_func((mean_p - gamma) / sd))
}

/// Closed-form `β_α` counterpart of [`gaussian_alpha`].
pub fn gaussian_beta(mean_p: f64, mean_q: f64, variance: f64, alpha: f64) -> Result<f64> {
    let sd = check_gaussian(variance)?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(domain(format!("alpha = {alpha} outside [0, 1)")));
    }
    if mean_p == mean_q {
        return Ok(beta_identical(alpha));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let gamma = mean_p - sd * q_inv(1.0 - alpha);
    Ok(q_func((gamma - mean_q) / sd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_llr_sets(mu: f64, n: usize, seed: u64) -> (LlrSampleSet, LlrSampleSet) {
        // P = N(mu, 1), Q = N(0, 1), L(x) = mu x - mu^2 / 2
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |shift: f64| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    mu * (x + shift) - mu * mu / 2.0
                })
                .collect()
        };
        let p = draw(mu);
        let q = draw(0.0);
        (
            LlrSampleSet::new(p, Side::P, seed).unwrap(),
            LlrSampleSet::new(q, Side::Q, seed).unwrap(),
        )
    }

    fn zeros(n: usize, side: Side) -> LlrSampleSet {
        LlrSampleSet::new(vec![0.0; n], side, 1).unwrap()
    }

    #[test]
    fn rejects_non_finite_samples() {
        assert!(LlrSampleSet::new(vec![1.0, f64::NAN], Side::P, 0).is_err());
        assert!(LlrSampleSet::new(vec![f64::INFINITY], Side::Q, 0).is_err());
    }

    #[test]
    fn identical_measures_are_exact() {
        let cfg = NpConfig::default();
        let (a, _) =
            alpha_from_samples(&zeros(100, Side::P), &zeros(100, Side::Q), 0.3, &cfg).unwrap();
        assert_eq!(a.value, 0.7);
        let (b, _) =
            beta_from_samples(&zeros(100, Side::P), &zeros(50, Side::Q), 0.4, &cfg).unwrap();
        assert_eq!(b.value, 0.4);
    }

    #[test]
    fn trivial_endpoints() {
        let cfg = NpConfig::default();
        let (p, q) = gaussian_llr_sets(1.0, 2000, 3);
        assert_eq!(alpha_from_samples(&p, &q, 1.0, &cfg).unwrap().0.value, 0.0);
        assert_eq!(beta_from_samples(&p, &q, 0.0, &cfg).unwrap().0.value, 0.0);
    }

    #[test]
    fn domain_errors() {
        let cfg = NpConfig::default();
        let (p, q) = gaussian_llr_sets(1.0, 100, 3);
        assert!(matches!(
            alpha_from_samples(&p, &q, 0.0, &cfg),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            alpha_from_samples(&p, &q, 1.5, &cfg),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            beta_from_samples(&p, &q, 1.0, &cfg),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            NeymanPearson::new(&q, &p, &cfg),
            Err(Error::Domain(_))
        ));
        assert!(NeymanPearson::new(
            &LlrSampleSet::empty(Side::P),
            &LlrSampleSet::empty(Side::Q),
            &cfg
        )
        .is_err());
        assert!(gaussian_alpha(0.0, 1.0, 0.0, 0.1).is_err());
        assert!(gaussian_beta(0.0, 1.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn precision_error_reports_ci() {
        let cfg = NpConfig {
            min_ess: 1e9,
            ..NpConfig::default()
        };
        let (p, q) = gaussian_llr_sets(1.0, 500, 4);
        match alpha_from_samples(&p, &q, 0.05, &cfg) {
            Err(Error::Precision {
                ci_low,
                ci_high,
                estimate,
                ..
            }) => {
                assert!(ci_low <= estimate && estimate <= ci_high);
            }
            other => panic!("expected precision error, got {other:?}"),
        }
    }

    // Oracle: P = N(1,1) vs Q = N(0,1) at beta = 0.05 gives
    // alpha = Phi(Phi^{-1}(0.95) - 1) = Phi(0.6448536).
    const GAUSS_ALPHA_005: f64 = 0.740_488_977_158_555_8;

    #[test]
    fn gaussian_pair_matches_closed_form() {
        let cfg = NpConfig::default();
        let (p, q) = gaussian_llr_sets(1.0, 200_000, 11);
        let (a, tp) = alpha_from_samples(&p, &q, 0.05, &cfg).unwrap();
        assert!(
            (a.value - GAUSS_ALPHA_005).abs() < 3.0 * a.half_width().max(1e-3),
            "{a:?}"
        );
        assert!(a.ci_low <= a.value && a.value <= a.ci_high);
        assert!((0.0..=1.0).contains(&tp.randomization));

        let (b, _) = beta_from_samples(&p, &q, 0.95, &cfg).unwrap();
        assert!(
            (b.value - GAUSS_ALPHA_005).abs() < 3.0 * b.half_width().max(1e-3),
            "{b:?}"
        );

        let exact = gaussian_alpha(0.5, -0.5, 1.0, 0.05).unwrap();
        assert!((exact - GAUSS_ALPHA_005).abs() < 1e-7);
        let exact = gaussian_beta(0.5, -0.5, 1.0, 0.95).unwrap();
        assert!((exact - GAUSS_ALPHA_005).abs() < 1e-7);
    }

    #[test]
    fn deep_tail_from_p_samples_only() {
        // beta far below 1/N is only reachable through the change of measure
        let cfg = NpConfig::default();
        let mu = 6.0;
        let (p, _) = gaussian_llr_sets(mu, 100_000, 5);
        let (b, _) = beta_from_samples(&p, &LlrSampleSet::empty(Side::Q), 0.9, &cfg).unwrap();
        let exact = gaussian_beta(mu * mu / 2.0, -mu * mu / 2.0, mu * mu, 0.9).unwrap();
        assert!(exact < 1e-5);
        assert!(
            (b.ln_value - exact.ln()).abs() < 0.1,
            "{} vs {}",
            b.value,
            exact
        );
        assert!(b.ci_low <= exact && exact <= b.ci_high);
    }

    #[test]
    fn gaussian_closed_form_examples() {
        // means ±12.5, variance 25, beta = 1e-4 -> alpha ≈ 0.1001
        let a = gaussian_alpha(12.5, -12.5, 25.0, 1e-4).unwrap();
        assert!((a - 0.100_1).abs() < 5e-4, "{a}");
        assert_eq!(gaussian_alpha(1.0, 1.0, 2.0, 0.3).unwrap(), 0.7);
        let tiny = 1e-12;
        let a = gaussian_alpha(tiny / 2.0, -tiny / 2.0, tiny, 0.5).unwrap();
        assert!((a - 0.5).abs() < 1e-5);
    }

    #[test]
    fn duality_at_sample_level() {
        let cfg = NpConfig::default();
        let (p, q) = gaussian_llr_sets(1.5, 20_000, 9);
        let np = NeymanPearson::new(&p, &q, &cfg).unwrap();
        for &beta in &[0.01, 0.1, 0.4, 0.8] {
            let (a, _) = np.alpha(beta).unwrap();
            let (b, _) = np.beta(1.0 - a.value).unwrap();
            assert!(
                (b.value - beta).abs() < 1e-9 + 3.0 * b.half_width(),
                "{beta} {b:?}"
            );
        }
    }

    #[test]
    fn ties_are_randomized() {
        let cfg = NpConfig {
            min_ess: 1.0,
            ..NpConfig::default()
        };
        // two atoms: L = ln 2 w.p. 1/2 under P, L = -ln 2 ...
        let p = LlrSampleSet::new(vec![-1.0, 1.0, 1.0, 1.0], Side::P, 0).unwrap();
        let q = LlrSampleSet::new(vec![-1.0, -1.0, -1.0, 1.0], Side::Q, 0).unwrap();
        let np = NeymanPearson::new(&p, &q, &cfg).unwrap();
        assert_eq!(np.groups(), 2);
        let (b, tp) = np.beta(0.5).unwrap();
        assert_eq!(tp.threshold, 1.0);
        assert!(tp.randomization > 0.0 && tp.randomization < 1.0);
        assert!(b.value > 0.0 && b.value < 0.5);
        assert!(tp.decide(2.0, 0.99));
        assert!(!tp.decide(0.0, 0.0));
    }

    #[test]
    fn unit_mean_of_importance_weights() {
        let (p, q) = gaussian_llr_sets(0.7, 50_000, 21);
        assert!(p.unit_mean_check(0.99).contains_one());
        assert!(q.unit_mean_check(0.99).contains_one());
        let r = p.reversed();
        assert_eq!(r.drawn_under(), Side::Q);
        assert_eq!(r.values()[0], -p.values()[0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn alpha_nonincreasing_beta_nondecreasing(seed in 0u64..1000, mu in 0.2f64..3.0) {
                let cfg = NpConfig { min_ess: 0.0, ..NpConfig::default() };
                let (p, q) = gaussian_llr_sets(mu, 2000, seed);
                let np = NeymanPearson::new(&p, &q, &cfg).unwrap();
                let grid: Vec<f64> = (1..=20).map(|k| k as f64 / 20.0).collect();
                let alphas: Vec<f64> = grid.iter().map(|&b| np.alpha(b).unwrap().0.value).collect();
                for w in alphas.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-12);
                }
                let betas: Vec<f64> = grid[..19].iter().map(|&a| np.beta(a).unwrap().0.value).collect();
                for w in betas.windows(2) {
                    prop_assert!(w[1] + 1e-12 >= w[0]);
                }
            }
        }
    }
}
