//! Binary-input AWGN channel `Y_k = X_k + N_k` with inputs `±√ρ` and the idle
//! symbol `0`, its three log-likelihood ratios and samplers for them.
//!
//! * `ı(x, y) = log dP_{Y|X=x} / dP_Y`: information density,
//! * `r(y)    = log dP_Y / dP_{Y|X=∅}`: joint detection statistic,
//! * `ȷ(x, y) = log dP_{Y|X=x} / dP_{Y|X=∅}`: preamble detection statistic.
//!
//! All three satisfy `ı = ȷ - r`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};
use crate::exec;
use crate::np_testing::{LlrSampleSet, Side};
use crate::rng::{batch_count, batch_range, batch_rng};

/// Channel input used when the transmitter is idle.
pub const IDLE_SYMBOL: f64 = 0.0;

/// Linear SNR from decibels.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// SNR, input skew and blocklength.
///
/// `p` is the probability of sending `-√ρ`; the input law puts no mass on
/// the idle symbol. Skews below one half mirror those above it under
/// `y -> -y`, so only `[1/2, 1]` is accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub rho: f64,
    pub p: f64,
    pub n: usize,
}

impl ChannelSpec {
    pub fn new(rho: f64, p: f64, n: usize) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(domain(format!("rho = {rho} must be positive")));
        }
        if !(0.5..=1.0).contains(&p) {
            return Err(domain(format!("p = {p} outside [1/2, 1]")));
        }
        if n == 0 {
            return Err(domain("blocklength must be positive"));
        }
        Ok(Self { rho, p, n })
    }

    pub fn from_snr_db(snr_db: f64, p: f64, n: usize) -> Result<Self> {
        Self::new(db_to_linear(snr_db), p, n)
    }

    pub fn amplitude(&self) -> f64 {
        self.rho.sqrt()
    }

    pub fn with_p(self, p: f64) -> Result<Self> {
        Self::new(self.rho, p, self.n)
    }

    pub fn with_n(self, n: usize) -> Result<Self> {
        Self::new(self.rho, self.p, n)
    }

    pub(crate) fn symbol_law(&self) -> SymbolLaw {
        SymbolLaw::new(self.rho, self.p)
    }
}

/// Per-symbol quantities for fixed `(ρ, p)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SymbolLaw {
    pub amp: f64,
    pub rho: f64,
    pub p: f64,
    ln_p: f64,
    ln_1mp: f64,
}

impl SymbolLaw {
    pub fn new(rho: f64, p: f64) -> Self {
        Self {
            amp: rho.sqrt(),
            rho,
            p,
            ln_p: p.ln(),
            ln_1mp: (1.0 - p).ln(),
        }
    }

    /// `log(p e^{-√ρ y} + (1-p) e^{√ρ y})` with the larger exponent factored out.
    #[inline]
    pub fn lse(&self, y: f64) -> f64 {
        let a = self.ln_p - self.amp * y;
        let b = self.ln_1mp + self.amp * y;
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        if lo == f64::NEG_INFINITY {
            hi
        } else {
            hi + (lo - hi).exp().ln_1p()
        }
    }

    #[inline]
    pub fn input(&self, uniform: f64) -> f64 {
        if uniform < self.p {
            -self.amp
        } else {
            self.amp
        }
    }
}

fn check_dims(spec: &ChannelSpec, len: usize, what: &str) -> Result<()> {
    if len != spec.n {
        return Err(domain(format!(
            "{what} has length {len}, expected n = {}",
            spec.n
        )));
    }
    Ok(())
}

fn check_codeword(spec: &ChannelSpec, x: &[f64]) -> Result<()> {
    check_dims(spec, x.len(), "x")?;
    let amp = spec.amplitude();
    let tol = 1e-12 * amp.max(1.0);
    if let Some(v) = x.iter().find(|v| (v.abs() - amp).abs() > tol) {
        return Err(domain(format!("input symbol {v} is not ±√ρ")));
    }
    Ok(())
}

/// Information density `ı(x, y)` in nats.
pub fn llr_i(spec: &ChannelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_codeword(spec, x)?;
    check_dims(spec, y.len(), "y")?;
    let law = spec.symbol_law();
    Ok(x.iter()
        .zip(y)
        .map(|(&xk, &yk)| xk * yk - law.lse(yk))
        .sum())
}

/// Detection statistic `r(y)` in nats.
pub fn llr_r(spec: &ChannelSpec, y: &[f64]) -> Result<f64> {
    check_dims(spec, y.len(), "y")?;
    let law = spec.symbol_law();
    let s: f64 = y.iter().map(|&yk| law.lse(yk)).sum();
    Ok(s - spec.n as f64 * spec.rho / 2.0)
}

/// Preamble statistic `ȷ(x, y)` in nats.
pub fn llr_j(spec: &ChannelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_codeword(spec, x)?;
    check_dims(spec, y.len(), "y")?;
    let s: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(s - spec.n as f64 * spec.rho / 2.0)
}

/// Which log-likelihood ratio to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    /// `ı(x, y)`, oriented `P_{XY}` against `P_X P_Y`.
    I,
    /// `r(y)`, oriented `P_Y` against `P_{Y|X=∅}`.
    R,
    /// `ȷ(x, y)`, oriented `P_{Y|X=x}` against `P_{Y|X=∅}`.
    J,
}

/// Measure the channel pair is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    /// `X ~ P_X`, `Y ~ P_{Y|X}`.
    JointPxy,
    /// `X ~ P_X` independent of `Y ~ P_Y`.
    ProductPxQy,
    /// `Y ~ P_Y`. Draws coincide with the `y` part of `JointPxy` for equal seeds.
    OutputPy,
    /// `Y ~ P_{Y|X=∅}`: `n` i.i.d. standard normals.
    NoiseOnly,
    /// `Y ~ P_{Y|X=x}` with `x` the all-`+√ρ` codeword.
    Conditional,
}

impl Measure {
    /// Seed tag for the random stream of this measure; `JointPxy` and
    /// `OutputPy` share one so their `y` draws coincide.
    pub fn stream_tag(self) -> u64 {
        match self {
            Measure::JointPxy | Measure::OutputPy => 1,
            Measure::ProductPxQy => 2,
            Measure::NoiseOnly => 3,
            Measure::Conditional => 4,
        }
    }
}

/// Side of the NP pair that `measure` is for `statistic`, or `None` if the
/// pair is meaningless.
pub fn orientation(statistic: Statistic, measure: Measure) -> Option<Side> {
    use Measure::*;
    match (statistic, measure) {
        (Statistic::I, JointPxy | Conditional) => Some(Side::P),
        (Statistic::I, ProductPxQy) => Some(Side::Q),
        (Statistic::R, OutputPy | JointPxy) => Some(Side::P),
        (Statistic::R, NoiseOnly) => Some(Side::Q),
        (Statistic::J, Conditional | JointPxy) => Some(Side::P),
        (Statistic::J, NoiseOnly) => Some(Side::Q),
        _ => None,
    }
}

#[derive(Debug, Clone)]
struct PathBatch {
    rng: ChaCha8Rng,
    sum_xy: Vec<f64>,
    sum_lse: Vec<f64>,
}

/// Sample paths of the running sums `Σ x_k y_k` and `Σ lse(y_k)`, extended
/// one symbol at a time.
///
/// Draws are consumed symbol-major inside each batch, so the samples at
/// blocklength `n` are the same whichever intermediate lengths were
/// visited. Sweeps over `n` therefore share random numbers, and so do
/// sweeps over `p` because the uniforms selecting inputs are drawn
/// regardless of `p`.
#[derive(Debug, Clone)]
pub struct LlrStream {
    law: SymbolLaw,
    measure: Measure,
    seed: u64,
    count: usize,
    n: usize,
    parallel: bool,
    batches: Vec<PathBatch>,
}

impl LlrStream {
    pub fn new(
        spec: &ChannelSpec,
        measure: Measure,
        count: usize,
        seed: u64,
        parallel: bool,
    ) -> Result<Self> {
        if count == 0 {
            return Err(domain("sample count must be positive"));
        }
        let batches = (0..batch_count(count))
            .map(|b| {
                let len = batch_range(count, b).len();
                PathBatch {
                    rng: batch_rng(seed, b),
                    sum_xy: vec![0.0; len],
                    sum_lse: vec![0.0; len],
                }
            })
            .collect();
        Ok(Self {
            law: spec.symbol_law(),
            measure,
            seed,
            count,
            n: 0,
            parallel,
            batches,
        })
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Extend every path to blocklength `n`.
    pub fn advance_to(&mut self, n: usize) -> Result<()> {
        if n < self.n {
            return Err(domain(format!(
                "stream already at n = {}, cannot rewind to {n}",
                self.n
            )));
        }
        let steps = n - self.n;
        if steps == 0 {
            return Ok(());
        }
        let law = self.law;
        let measure = self.measure;
        exec::for_each_mut(&mut self.batches, self.parallel, |_, batch| {
            for _ in 0..steps {
                step_batch(&law, measure, batch);
            }
        });
        self.n = n;
        Ok(())
    }

    /// Current values of `statistic` as a sample set.
    pub fn samples(&self, statistic: Statistic) -> Result<LlrSampleSet> {
        let side = orientation(statistic, self.measure).ok_or_else(|| {
            domain(format!(
                "statistic {statistic:?} is undefined under {:?}",
                self.measure
            ))
        })?;
        if self.n == 0 {
            return Err(domain("stream has not been advanced"));
        }
        let half = self.n as f64 * self.law.rho / 2.0;
        let mut values = Vec::with_capacity(self.count);
        for b in &self.batches {
            match statistic {
                Statistic::I => values.extend(b.sum_xy.iter().zip(&b.sum_lse).map(|(a, c)| a - c)),
                Statistic::R => values.extend(b.sum_lse.iter().map(|c| c - half)),
                Statistic::J => values.extend(b.sum_xy.iter().map(|a| a - half)),
            }
        }
        LlrSampleSet::new(values, side, self.seed)
    }
}

#[inline]
fn step_batch(law: &SymbolLaw, measure: Measure, batch: &mut PathBatch) {
    let rng = &mut batch.rng;
    let amp = law.amp;
    for (sxy, slse) in batch.sum_xy.iter_mut().zip(batch.sum_lse.iter_mut()) {
        let (x, y) = match measure {
            Measure::JointPxy | Measure::OutputPy => {
                let u: f64 = rng.random();
                let z: f64 = StandardNormal.sample(rng);
                let x = law.input(u);
                (x, x + z)
            }
            Measure::ProductPxQy => {
                let u: f64 = rng.random();
                let z: f64 = StandardNormal.sample(rng);
                let u2: f64 = rng.random();
                let y = law.input(u) + z;
                (law.input(u2), y)
            }
            Measure::NoiseOnly => {
                let z: f64 = StandardNormal.sample(rng);
                (amp, z)
            }
            Measure::Conditional => {
                let z: f64 = StandardNormal.sample(rng);
                (amp, amp + z)
            }
        };
        *sxy += x * y;
        *slse += law.lse(y);
    }
}

/// I.i.d. samples of `statistic` at blocklength `spec.n` under `measure`.
///
/// `ȷ` is Gaussian with variance `nρ` and mean `±nρ/2` under every measure
/// it is defined for, so it is drawn directly as a scalar.
pub fn sample_llr(
    spec: &ChannelSpec,
    statistic: Statistic,
    measure: Measure,
    count: usize,
    seed: u64,
    parallel: bool,
) -> Result<LlrSampleSet> {
    let side = orientation(statistic, measure).ok_or_else(|| {
        domain(format!(
            "statistic {statistic:?} is undefined under {measure:?}"
        ))
    })?;
    if count == 0 {
        return Err(domain("sample count must be positive"));
    }
    if statistic == Statistic::J {
        let a = spec.n as f64 * spec.rho;
        let mean = match side {
            Side::P => a / 2.0,
            Side::Q => -a / 2.0,
        };
        let sd = a.sqrt();
        let chunks = exec::map_indexed(batch_count(count), parallel, |b| {
            let mut rng = batch_rng(seed, b);
            batch_range(count, b)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean + sd * z
                })
                .collect::<Vec<f64>>()
        });
        return LlrSampleSet::new(chunks.concat(), side, seed);
    }
    let mut stream = LlrStream::new(spec, measure, count, seed, parallel)?;
    stream.advance_to(spec.n)?;
    stream.samples(statistic)
}
