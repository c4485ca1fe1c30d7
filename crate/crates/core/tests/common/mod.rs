//! Reference computations shared by the integration tests. Nothing here calls
//! into the library's estimators.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss-Hermite nodes and weights for `∫ e^{-x²} f(x) dx`.
pub fn gauss_hermite(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    let m = k.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * k as f64 + 1.0).sqrt() - 1.85575 * (2.0 * k as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (k as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..k {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * k as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[k - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[k - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[f(mean + Z)]` for standard normal `Z`.
pub fn normal_expectation(mean: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(120);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| wi * f(mean + std::f64::consts::SQRT_2 * xi))
        .sum::<f64>()
        / PI.sqrt()
}

/// `ln(p e^{-a y} + (1-p) e^{a y})`; the input is `-a` with probability `p`.
pub fn lse(a: f64, p: f64, y: f64) -> f64 {
    let (u, v) = (p.ln() - a * y, (1.0 - p).ln() + a * y);
    u.max(v) + (-(u - v).abs()).exp().ln_1p()
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Mutual information of the binary input with skew `p` in nats.
pub fn mutual_information(rho: f64, p: f64) -> f64 {
    let a = rho.sqrt();
    let term = |x: f64| normal_expectation(x, |y| x * y - lse(a, p, y));
    p * term(-a) + (1.0 - p) * term(a)
}

/// Mean of the per-symbol detection LLR under noise only.
pub fn mean_r_noise(rho: f64, p: f64) -> f64 {
    let a = rho.sqrt();
    normal_expectation(0.0, |y| lse(a, p, y)) - rho / 2.0
}

/// A pair of discrete measures on a common lattice of LLR values.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub step: f64,
    pub offset: i64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl Lattice {
    /// Per-symbol lattice: each `(value, p_mass, q_mass)` lands in its bin.
    pub fn from_points(step: f64, points: impl Iterator<Item = (f64, f64, f64)>) -> Self {
        let pts: Vec<(i64, f64, f64)> = points
            .map(|(v, pm, qm)| ((v / step).round() as i64, pm, qm))
            .collect();
        let lo = pts.iter().map(|t| t.0).min().unwrap();
        let hi = pts.iter().map(|t| t.0).max().unwrap();
        let len = (hi - lo + 1) as usize;
        let (mut p, mut q) = (vec![0.0; len], vec![0.0; len]);
        for (i, pm, qm) in pts {
            p[(i - lo) as usize] += pm;
            q[(i - lo) as usize] += qm;
        }
        let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
        p.iter_mut().for_each(|v| *v /= sp);
        q.iter_mut().for_each(|v| *v /= sq);
        Self {
            step,
            offset: lo,
            p,
            q,
        }
    }

    fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    /// Law of the sum of `n` independent copies.
    pub fn power(&self, n: usize) -> Self {
        let mut acc = self.clone();
        for _ in 1..n {
            acc = Self {
                step: self.step,
                offset: acc.offset + self.offset,
                p: Self::convolve(&acc.p, &self.p),
                q: Self::convolve(&acc.q, &self.q),
            };
        }
        acc
    }

    /// Atoms `(ln P/Q, P, Q)` sorted by decreasing likelihood ratio.
    pub fn atoms(&self) -> Vec<(f64, f64, f64)> {
        let mut v: Vec<(f64, f64, f64)> = self
            .p
            .iter()
            .zip(&self.q)
            .filter(|(&p, &q)| p > 0.0 || q > 0.0)
            .map(|(&p, &q)| ((p / q).ln(), p, q))
            .collect();
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        v
    }
}

/// Atoms of the reversed test `(Q, P)`, sorted.
pub fn swap_atoms(atoms: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64)> {
    let mut v: Vec<_> = atoms.iter().map(|&(l, p, q)| (-l, q, p)).collect();
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    v
}

/// `α_β(P, Q)` of the exact randomized Neyman-Pearson test on atoms.
pub fn np_alpha(atoms: &[(f64, f64, f64)], beta: f64) -> f64 {
    let (mut q_acc, mut p_acc) = (0.0, 0.0);
    for &(_, p, q) in atoms {
        if q_acc + q >= beta {
            let frac = if q > 0.0 { (beta - q_acc) / q } else { 1.0 };
            return (1.0 - p_acc - frac * p).max(0.0);
        }
        q_acc += q;
        p_acc += p;
    }
    0.0
}

/// `β_α(P, Q)`: smallest `Q[Z = 1]` over randomized tests with `P[Z = 1] >= alpha`.
pub fn np_beta(atoms: &[(f64, f64, f64)], alpha: f64) -> f64 {
    let need = alpha;
    let (mut q_acc, mut p_acc) = (0.0, 0.0);
    for &(_, p, q) in atoms {
        if p_acc + p >= need {
            let frac = if p > 0.0 { (need - p_acc) / p } else { 1.0 };
            return q_acc + frac * q;
        }
        q_acc += q;
        p_acc += p;
    }
    q_acc
}

/// `max 2 (b - α) / δ` over deterministic cuts, as `ln(M - 1)`.
pub fn best_ln_m_minus_1(atoms: &[(f64, f64, f64)], budget: f64) -> f64 {
    let total_p: f64 = atoms.iter().map(|a| a.1).sum();
    let (mut p_acc, mut q_acc) = (0.0, 0.0);
    let mut best = f64::NEG_INFINITY;
    for &(_, p, q) in atoms {
        p_acc += p;
        q_acc += q;
        let alpha = (total_p - p_acc).max(0.0);
        if alpha < budget && q_acc > 0.0 {
            best = best.max((2.0 * (budget - alpha) / q_acc).ln());
        }
    }
    best
}

/// Largest `ln c` with `E_P[min(1, c e^{-L})] <= eps`.
pub fn dt_ln_c(atoms: &[(f64, f64, f64)], eps: f64) -> f64 {
    let value = |g: f64| -> f64 {
        atoms
            .iter()
            .map(|&(l, p, q)| if l <= g { p } else { g.exp() * q })
            .sum()
    };
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if value(mid) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Per-symbol lattice of `r` under `P_Y` (P) and noise (Q).
pub fn detection_lattice(rho: f64, p: f64, step: f64) -> Lattice {
    let a = rho.sqrt();
    let dy = 1e-4;
    let grid = (-140_000..=140_000).map(move |k| k as f64 * dy);
    Lattice::from_points(
        step,
        grid.map(|y| {
            let py = p * std_normal_pdf(y + a) + (1.0 - p) * std_normal_pdf(y - a);
            (lse(a, p, y) - rho / 2.0, py * dy, std_normal_pdf(y) * dy)
        }),
    )
}

/// Per-symbol lattice of `ı` under `P_{XY}` (P) and `P_X P_Y` (Q).
pub fn decoding_lattice(rho: f64, p: f64, step: f64) -> Lattice {
    let a = rho.sqrt();
    let dy = 1e-4;
    let grid = (-140_000..=140_000).map(move |k| k as f64 * dy);
    Lattice::from_points(
        step,
        grid.flat_map(|y| {
            let py = p * std_normal_pdf(y + a) + (1.0 - p) * std_normal_pdf(y - a);
            [(-a, p), (a, 1.0 - p)].map(|(x, px)| {
                (x * y - lse(a, p, y), px * std_normal_pdf(y - x) * dy, px * py * dy)
            })
        }),
    )
}
