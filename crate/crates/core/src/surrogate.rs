//! Single-surrogate inference: δ̂ = Û_Y − Û_S, its confidence interval,
//! the non-inferiority test of H₀: δ ≥ ε and the two one-sided test of
//! δ ∈ [−ε, ε].

use crate::error::{Error, Result};
use crate::rankstats::{normal_cdf, normal_quantile, UEstimate, Variable};
use crate::variance::{delta_variance, null_sizes, null_u_variance};

/// How the non-inferiority margin ε is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonMode {
    Fixed(f64),
    /// ε = max(0, û_Y − u*), u* being the U_S that a test on S detects with
    /// the configured power.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMode {
    /// One-sided test of H₀: δ ≥ ε.
    NonInferiority,
    /// Two one-sided tests, H₀⁽¹⁾: δ ≥ ε and H₀⁽²⁾: δ ≤ −ε.
    Tost,
}

impl TestMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMode::NonInferiority => "noninf",
            TestMode::Tost => "tost",
        }
    }
}

impl std::str::FromStr for TestMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "noninf" | "noninferiority" | "non-inferiority" => Ok(TestMode::NonInferiority),
            "tost" => Ok(TestMode::Tost),
            other => Err(Error::Configuration(format!("unknown test mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestConfig {
    alpha: f64,
    power_target: f64,
    epsilon: EpsilonMode,
    mode: TestMode,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            alpha: 0.05,
            power_target: 0.90,
            epsilon: EpsilonMode::Adaptive,
            mode: TestMode::NonInferiority,
        }
    }
}

impl TestConfig {
    pub fn new(
        alpha: f64,
        power_target: f64,
        epsilon: EpsilonMode,
        mode: TestMode,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::Configuration(format!(
                "alpha must lie in (0, 0.5), got {alpha}"
            )));
        }
        if !(power_target > 0.0 && power_target < 1.0) {
            return Err(Error::Configuration(format!(
                "power target must lie in (0, 1), got {power_target}"
            )));
        }
        if let EpsilonMode::Fixed(e) = epsilon {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::Configuration(format!(
                    "fixed epsilon must be a finite value >= 0, got {e}"
                )));
            }
        }
        Ok(TestConfig {
            alpha,
            power_target,
            epsilon,
            mode,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn power_target(&self) -> f64 {
        self.power_target
    }

    pub fn epsilon(&self) -> EpsilonMode {
        self.epsilon
    }

    pub fn mode(&self) -> TestMode {
        self.mode
    }

    pub fn with_epsilon(self, epsilon: EpsilonMode) -> Result<Self> {
        TestConfig::new(self.alpha, self.power_target, epsilon, self.mode)
    }

    pub fn with_mode(mut self, mode: TestMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateTestResult {
    pub u_y: UEstimate,
    pub u_s: UEstimate,
    pub delta: f64,
    pub sigma_delta: f64,
    pub epsilon: f64,
    /// (1−2α) two-sided interval in TOST mode, [−1, upper] otherwise.
    pub ci_lower: f64,
    pub ci_upper: f64,
    /// p-value for H₀: δ ≥ ε.
    pub p_noninf: f64,
    /// p-value for H₀: δ ≤ −ε (TOST only).
    pub p_lower: Option<f64>,
    pub p_overall: f64,
}

impl SurrogateTestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_overall < alpha
    }
}

/// u* = ½ − sqrt(null variance) · [Φ⁻¹(β) − Φ⁻¹(1−α)], with β = 1 − power.
pub fn power_boundary(cfg: &TestConfig, null_var: f64) -> Result<f64> {
    if !(null_var.is_finite() && null_var >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "null variance must be finite and >= 0, got {null_var}"
        )));
    }
    let beta = 1.0 - cfg.power_target;
    let spread = normal_quantile(beta)? - normal_quantile(1.0 - cfg.alpha)?;
    Ok(0.5 - null_var.sqrt() * spread)
}

/// Non-inferiority margin for a response whose estimated effect is `u_y_hat`.
pub fn select_epsilon(u_y_hat: f64, cfg: &TestConfig, null_var: f64) -> Result<f64> {
    match cfg.epsilon {
        EpsilonMode::Fixed(e) => Ok(e),
        EpsilonMode::Adaptive => Ok((u_y_hat - power_boundary(cfg, null_var)?).max(0.0)),
    }
}

/// Margin implied by `cfg` for response `y` (its own sizes and ties).
pub fn epsilon_for(y: &Variable, cfg: &TestConfig) -> Result<f64> {
    let u_y = y.u_statistic();
    let null_var = null_u_variance(null_sizes(y))?;
    select_epsilon(u_y.value, cfg, null_var)
}

/// Tests whether `s` is a valid trial-level surrogate for `y`.
pub fn test_single(y: &Variable, s: &Variable, cfg: &TestConfig) -> Result<SurrogateTestResult> {
    let epsilon = epsilon_for(y, cfg)?;
    test_with_margin(y, &y.u_statistic(), s, epsilon, cfg)
}

/// Same as [`test_single`] with a margin computed once by the caller.
pub fn test_with_margin(
    y: &Variable,
    u_y: &UEstimate,
    s: &Variable,
    epsilon: f64,
    cfg: &TestConfig,
) -> Result<SurrogateTestResult> {
    if y.design() != s.design() || y.shape() != s.shape() {
        return Err(Error::Alignment(format!(
            "candidate ({} {:?}) is not aligned with the response ({} {:?})",
            s.design().as_str(),
            s.shape(),
            y.design().as_str(),
            y.shape()
        )));
    }
    let u_s = s.u_statistic();
    let sigma = delta_variance(y, s)?.sigma_delta;
    Ok(assemble(*u_y, u_s, sigma, epsilon, cfg))
}

/// Builds a result from δ̂'s ingredients.
pub fn assemble(
    u_y: UEstimate,
    u_s: UEstimate,
    sigma_delta: f64,
    epsilon: f64,
    cfg: &TestConfig,
) -> SurrogateTestResult {
    let delta = u_y.value - u_s.value;
    let (p_noninf, p_lower) = one_sided_pvalues(delta, sigma_delta, epsilon);
    let z = normal_quantile(1.0 - cfg.alpha).expect("alpha validated in TestConfig");
    let half_width = z * sigma_delta;

    let (ci_lower, p_lower, p_overall) = match cfg.mode {
        TestMode::NonInferiority => (-1.0, None, p_noninf),
        TestMode::Tost => (delta - half_width, Some(p_lower), p_noninf.max(p_lower)),
    };

    SurrogateTestResult {
        u_y,
        u_s,
        delta,
        sigma_delta,
        epsilon,
        ci_lower,
        ci_upper: delta + half_width,
        p_noninf,
        p_lower,
        p_overall,
    }
}

/// p⁽¹⁾ = Φ((δ̂ − ε)/σ̂) and p⁽²⁾ = 1 − Φ((δ̂ + ε)/σ̂).
///
/// With σ̂ = 0 each becomes the indicator of its null: p⁽¹⁾ = 1 unless δ̂ < ε,
/// p⁽²⁾ = 1 unless δ̂ > −ε.
pub fn one_sided_pvalues(delta: f64, sigma: f64, epsilon: f64) -> (f64, f64) {
    if sigma > 0.0 {
        (
            normal_cdf((delta - epsilon) / sigma),
            normal_cdf(-(delta + epsilon) / sigma),
        )
    } else {
        let upper = if delta < epsilon { 0.0 } else { 1.0 };
        let lower = if delta > -epsilon { 0.0 } else { 1.0 };
        (upper, lower)
    }
}
