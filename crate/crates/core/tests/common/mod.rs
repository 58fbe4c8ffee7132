//! Independent reference routines shared by the integration tests. Nothing
//! here calls the library code it is compared against.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

pub fn g(a: f64, b: f64) -> f64 {
    if a > b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

/// Double loop over every treated-control pair.
pub fn brute_u_unpaired(t: &[f64], c: &[f64]) -> f64 {
    let mut sum = 0.0;
    for &a in t {
        for &b in c {
            sum += g(a, b);
        }
    }
    sum / (t.len() * c.len()) as f64
}

pub fn brute_u_paired(post: &[f64], pre: &[f64]) -> f64 {
    let sum: f64 = post.iter().zip(pre).map(|(&a, &b)| g(a, b)).sum();
    sum / post.len() as f64
}

fn sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Bootstrap SD of Û_Y − Û_S, resampling subjects within each arm.
pub fn bootstrap_sd_unpaired<R: Rng>(
    y: (&[f64], &[f64]),
    s: (&[f64], &[f64]),
    resamples: usize,
    rng: &mut R,
) -> f64 {
    let (n1, n0) = (y.0.len(), y.1.len());
    let deltas: Vec<f64> = (0..resamples)
        .map(|_| {
            let ti: Vec<usize> = (0..n1).map(|_| rng.random_range(0..n1)).collect();
            let ci: Vec<usize> = (0..n0).map(|_| rng.random_range(0..n0)).collect();
            let pick = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
            brute_u_unpaired(&pick(y.0, &ti), &pick(y.1, &ci))
                - brute_u_unpaired(&pick(s.0, &ti), &pick(s.1, &ci))
        })
        .collect();
    sd(&deltas)
}

/// Bootstrap SD of Û_Y − Û_S, resampling units.
pub fn bootstrap_sd_paired<R: Rng>(
    y: (&[f64], &[f64]),
    s: (&[f64], &[f64]),
    resamples: usize,
    rng: &mut R,
) -> f64 {
    let n = y.0.len();
    let d: Vec<f64> = (0..n)
        .map(|i| g(y.0[i], y.1[i]) - g(s.0[i], s.1[i]))
        .collect();
    let deltas: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| d[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    sd(&deltas)
}

/// Correlated response/candidate draws: S = Y + noise, in both arms.
pub fn correlated_arms<R: Rng>(rng: &mut R, n1: usize, n0: usize, noise: f64) -> [Vec<f64>; 4] {
    let mut draw = |n: usize, mean: f64| -> (Vec<f64>, Vec<f64>) {
        let y: Vec<f64> = (0..n)
            .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let s = y
            .iter()
            .map(|v| v + noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (y, s)
    };
    let (yt, st) = draw(n1, 1.0);
    let (yc, sc) = draw(n0, 0.0);
    [yt, yc, st, sc]
}

/// Monte Carlo U for the signal model S = f(Y) + σZ with Y¹ ~ N(3, 1) and
/// Y⁰ ~ N(0, 1), where f is the identity or the cube.
pub fn mc_signal_u<R: Rng>(cube: bool, sigma: f64, draws: usize, rng: &mut R) -> f64 {
    let f = |y: f64| if cube { y * y * y } else { y };
    let mut wins = 0.0;
    for _ in 0..draws {
        let y1 = 3.0 + rng.sample::<f64, _>(StandardNormal);
        let y0: f64 = rng.sample(StandardNormal);
        let s1 = f(y1) + sigma * rng.sample::<f64, _>(StandardNormal);
        let s0 = f(y0) + sigma * rng.sample::<f64, _>(StandardNormal);
        wins += g(s1, s0);
    }
    wins / draws as f64
}

/// Step-up adjustment straight from its definition:
/// q_i = min over j with p_j ≥ p_i of min(1, scale · p_j / rank_j).
pub fn reference_step_up(raw: &[f64], scale: f64) -> Vec<f64> {
    let m = raw.len();
    let rank = |j: usize| {
        // Rank among raw values, ties broken by index.
        1 + (0..m)
            .filter(|&k| raw[k] < raw[j] || (raw[k] == raw[j] && k < j))
            .count()
    };
    (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| raw[j] >= raw[i])
                .map(|j| (scale * raw[j] / rank(j) as f64).min(1.0))
                .fold(1.0, f64::min)
        })
        .collect()
}

pub fn reference_bh(raw: &[f64]) -> Vec<f64> {
    reference_step_up(raw, raw.len() as f64)
}

pub fn reference_by(raw: &[f64]) -> Vec<f64> {
    let m = raw.len();
    let h: f64 = (1..=m).map(|k| 1.0 / k as f64).sum();
    reference_step_up(raw, m as f64 * h)
}

pub fn reference_bonferroni(raw: &[f64]) -> Vec<f64> {
    raw.iter()
        .map(|p| (p * raw.len() as f64).min(1.0))
        .collect()
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let above = (i + 1) as f64 / n - v;
            let below = v - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}
