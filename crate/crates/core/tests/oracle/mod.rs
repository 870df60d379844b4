//! Reference computations that share no code with the library: log-gamma by
//! Stirling's series, densities by direct quadrature, conditional moments by
//! rejection sampling.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// `ln Gamma(x)` for x > 0: shift up with the recurrence, then Stirling.
pub fn ln_gamma(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut x = x;
    while x < 20.0 {
        shift += x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2 * (-1.0 / 360.0 + inv2 * (1.0 / 1260.0 + inv2 * (-1.0 / 1680.0 + inv2 * (1.0 / 1188.0)))));
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - shift
}

pub fn gamma_ln_pdf(x: f64, k: f64, theta: f64) -> f64 {
    (k - 1.0) * x.ln() - x / theta - ln_gamma(k) - k * theta.ln()
}

/// Tanh-sinh rule on [0, len]. `f` receives the distances to both ends so
/// integrands singular at either end keep full precision.
pub fn tanh_sinh(len: f64, levels: u32, f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 1.0 / f64::from(1u32 << levels);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    let n = (3.5 / h) as i64;
    for j in -n..=n {
        let t = j as f64 * h;
        let u = half_pi * t.sinh();
        let w = half_pi * t.cosh() / u.cosh().powi(2);
        let lo = len / (1.0 + (-2.0 * u).exp());
        let hi = len / (1.0 + (2.0 * u).exp());
        if lo <= 0.0 || hi <= 0.0 {
            continue;
        }
        sum += w * f(lo, hi);
    }
    sum * h * len / 2.0
}

/// Density at `y` of a sum of independent Gammas `(k, theta)`, by nested
/// convolution integrals.
pub fn convolution_density(y: f64, params: &[(f64, f64)], levels: u32) -> f64 {
    match params {
        [] => panic!("no components"),
        [(k, t)] => gamma_ln_pdf(y, *k, *t).exp(),
        [rest @ .., (k, t)] => tanh_sinh(y, levels, |x, rem| {
            convolution_density(x, rest, levels) * gamma_ln_pdf(rem, *k, *t).exp()
        }),
    }
}

/// Integral over the hyperplane `alpha . z = d` (positive orthant, surface
/// measure) of `exp(ln_f(z))`, for n = 2 or 3.
pub fn simplex_integral(alpha: &[f64], d: f64, levels: u32, ln_f: impl Fn(&[f64]) -> f64) -> f64 {
    let v: Vec<f64> = alpha.iter().map(|a| d / a).collect();
    match v.len() {
        2 => {
            let len = (v[0] * v[0] + v[1] * v[1]).sqrt();
            tanh_sinh(1.0, levels, |s, s_rem| ln_f(&[v[0] * s, v[1] * s_rem]).exp()) * len
        }
        3 => {
            let cross = ((v[1] * v[2]).powi(2) + (v[0] * v[2]).powi(2) + (v[0] * v[1]).powi(2)).sqrt();
            let outer = tanh_sinh(1.0, levels, |s, s_rem| {
                let inner = tanh_sinh(1.0, levels, |t, t_rem| ln_f(&[v[0] * s, v[1] * s_rem * t, v[2] * s_rem * t_rem]).exp());
                inner * s_rem
            });
            outer * cross
        }
        n => panic!("simplex_integral for n={n}"),
    }
}

/// Mean and standard error of a column.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// First and second moments of each coordinate of `X ~ prod Gamma(k, theta)`
/// given `|alpha . X - d| < band * d`, by rejection, from `accepted` draws.
pub fn rejection_moments<R: Rng>(
    alpha: &[f64],
    d: f64,
    params: &[(f64, f64)],
    band: f64,
    accepted: usize,
    rng: &mut R,
) -> (Vec<Estimate>, Vec<Estimate>) {
    let dists: Vec<Gamma<f64>> = params.iter().map(|&(k, t)| Gamma::new(k, t).unwrap()).collect();
    let n = alpha.len();
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(accepted);
    let mut x = vec![0.0; n];
    while kept.len() < accepted {
        let mut s = 0.0;
        for i in 0..n {
            x[i] = dists[i].sample(rng);
            s += alpha[i] * x[i];
        }
        if (s - d).abs() < band * d {
            kept.push(x.clone());
        }
    }
    let col = |f: &dyn Fn(&[f64]) -> f64| {
        let v: Vec<f64> = kept.iter().map(|r| f(r)).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        Estimate { mean: m, se: (var / v.len() as f64).sqrt() }
    };
    let first = (0..n).map(|i| col(&|r| r[i])).collect();
    let second = (0..n).map(|i| col(&|r| r[i] * r[i])).collect();
    (first, second)
}

/// Self-normalized importance estimate of `E[g]` with delta-method error.
pub fn weighted_estimate(values: &[f64], log_w: &[f64]) -> Estimate {
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let sw: f64 = w.iter().sum();
    let mean = w.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / sw;
    let var = w.iter().zip(values).map(|(w, v)| (w * (v - mean)).powi(2)).sum::<f64>() / (sw * sw);
    Estimate { mean, se: var.sqrt() }
}

/// Two-sided Kolmogorov-Smirnov distance of a sample against a CDF.
pub fn ks_statistic(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}
