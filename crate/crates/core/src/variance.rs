//! Standard errors of δ̂ = Û_Y − Û_S and null variances of Û.
//!
//! For independent arms, the two U statistics share subjects, so δ̂ is a
//! difference of correlated two-sample U statistics. Its variance is
//! estimated from per-subject placement values (structural components):
//!
//! ```text
//! Var(δ̂) = [v10_YY + v10_SS − 2 v10_YS] / n₁ + [v01_YY + v01_SS − 2 v01_YS] / n₀
//! ```
//!
//! where the v10 terms are sample (co)variances of treated-subject
//! placements and the v01 terms the same over control subjects. For the
//! paired design δ̂ is a plain mean of per-unit differences
//! dᵢ = G(Yᵢ¹, Yᵢ⁰) − G(Sᵢ¹, Sᵢ⁰), so Var(δ̂) = σ_d² / n.

use crate::error::{Error, Result};
use crate::rankstats::{kernel, placements, Design, PairedSample, TwoArmSample, Variable};

/// Diagnostics behind a δ̂ standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceComponents {
    Unpaired {
        /// Sample variance of the response's treated-arm placements.
        v10_yy: f64,
        v10_ss: f64,
        v10_ys: f64,
        /// Sample variance of the response's control-arm placements.
        v01_yy: f64,
        v01_ss: f64,
        v01_ys: f64,
    },
    Paired {
        /// Sample variance σ̂_d² of the per-unit differences.
        d_variance: f64,
        /// Mean difference d̄ (equal to δ̂).
        d_mean: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaVariance {
    /// Standard deviation of δ̂.
    pub sigma_delta: f64,
    pub components: VarianceComponents,
}

/// Sample sizes that determine the null variance of Û.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullSizes {
    Unpaired { n_treated: usize, n_control: usize },
    Paired { n: usize, tie_fraction: f64 },
}

impl NullSizes {
    pub fn design(&self) -> Design {
        match self {
            NullSizes::Unpaired { .. } => Design::Unpaired,
            NullSizes::Paired { .. } => Design::Paired,
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample covariance (denominator n − 1). Caller guarantees n ≥ 2.
fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    s / (x.len() - 1) as f64
}

/// Standard error of δ̂ for two independent arms, by structural components.
///
/// `y` and `s` must hold the same subjects in the same positions within
/// each arm.
pub fn delta_variance_unpaired(y: &TwoArmSample, s: &TwoArmSample) -> Result<DeltaVariance> {
    if y.n_treated() != s.n_treated() || y.n_control() != s.n_control() {
        return Err(Error::Alignment(format!(
            "response arms ({}, {}) and candidate arms ({}, {}) differ in size",
            y.n_treated(),
            y.n_control(),
            s.n_treated(),
            s.n_control()
        )));
    }
    let (n1, n0) = (y.n_treated(), y.n_control());
    if n1 < 2 || n0 < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 subjects per arm for a variance (treated {n1}, control {n0})"
        )));
    }
    let py = placements(y);
    let ps = placements(s);

    let v10_yy = sample_cov(&py.treated, &py.treated);
    let v10_ss = sample_cov(&ps.treated, &ps.treated);
    let v10_ys = sample_cov(&py.treated, &ps.treated);
    let v01_yy = sample_cov(&py.control, &py.control);
    let v01_ss = sample_cov(&ps.control, &ps.control);
    let v01_ys = sample_cov(&py.control, &ps.control);

    let var =
        (v10_yy + v10_ss - 2.0 * v10_ys) / n1 as f64 + (v01_yy + v01_ss - 2.0 * v01_ys) / n0 as f64;
    // Rounding can leave a tiny negative value when Y and S placements coincide.
    let sigma_delta = var.max(0.0).sqrt();

    Ok(DeltaVariance {
        sigma_delta,
        components: VarianceComponents::Unpaired {
            v10_yy,
            v10_ss,
            v10_ys,
            v01_yy,
            v01_ss,
            v01_ys,
        },
    })
}

/// Standard error of δ̂ for paired units: sqrt(σ̂_d² / n).
pub fn delta_variance_paired(y: &PairedSample, s: &PairedSample) -> Result<DeltaVariance> {
    if y.len() != s.len() {
        return Err(Error::Alignment(format!(
            "response has {} units but candidate has {}",
            y.len(),
            s.len()
        )));
    }
    let n = y.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 paired units for a variance, got {n}"
        )));
    }
    let d: Vec<f64> = (0..n)
        .map(|i| kernel(y.post()[i], y.pre()[i]) - kernel(s.post()[i], s.pre()[i]))
        .collect();
    let d_variance = sample_cov(&d, &d);
    Ok(DeltaVariance {
        sigma_delta: (d_variance / n as f64).sqrt(),
        components: VarianceComponents::Paired {
            d_variance,
            d_mean: mean(&d),
        },
    })
}

/// Standard error of δ̂ for a response and candidate of the same design.
pub fn delta_variance(y: &Variable, s: &Variable) -> Result<DeltaVariance> {
    match (y, s) {
        (Variable::Unpaired(y), Variable::Unpaired(s)) => delta_variance_unpaired(y, s),
        (Variable::Paired(y), Variable::Paired(s)) => delta_variance_paired(y, s),
        _ => Err(Error::Alignment(format!(
            "response is {} but candidate is {}",
            y.design().as_str(),
            s.design().as_str()
        ))),
    }
}

/// Null-variance sizes for a response variable, with π̂ taken from its own ties.
pub fn null_sizes(y: &Variable) -> NullSizes {
    match y {
        Variable::Unpaired(s) => NullSizes::Unpaired {
            n_treated: s.n_treated(),
            n_control: s.n_control(),
        },
        Variable::Paired(s) => NullSizes::Paired {
            n: s.len(),
            tie_fraction: y.u_statistic().tie_fraction,
        },
    }
}

/// Variance of Û under no treatment effect.
///
/// Unpaired: (n₀ + n₁ + 1) / (12 n₀ n₁). Paired: (1 − π̂) / (4n).
pub fn null_u_variance(sizes: NullSizes) -> Result<f64> {
    match sizes {
        NullSizes::Unpaired {
            n_treated,
            n_control,
        } => {
            if n_treated == 0 || n_control == 0 {
                return Err(Error::InvalidInput("arm sizes must be positive".into()));
            }
            let (n1, n0) = (n_treated as f64, n_control as f64);
            Ok((n0 + n1 + 1.0) / (12.0 * n0 * n1))
        }
        NullSizes::Paired { n, tie_fraction } => {
            if n == 0 {
                return Err(Error::InvalidInput("paired size must be positive".into()));
            }
            if !(0.0..=1.0).contains(&tie_fraction) {
                return Err(Error::InvalidInput(format!(
                    "tie fraction must lie in [0, 1], got {tie_fraction}"
                )));
            }
            Ok((1.0 - tie_fraction) / (4.0 * n as f64))
        }
    }
}
