//! Simulated trials with known surrogate validity, and the experiments run
//! on them.
//!
//! Responses are N(3, 1) in the treated arm and N(0, 1) in the control arm.
//! Invalid candidates carry no treatment effect (U_S = ½); valid candidates
//! are the response, or its cube, plus Gaussian noise whose sd σ_valid sets
//! the candidate's strength U_S.

mod experiment;
mod mvn;

pub use experiment::{
    invalid_count, rejection_rate, run_evaluation_experiment, run_screening_experiment,
    EvaluationExperiment, EvaluationRecord, MarginRule, MetricSummary, ScreeningExperiment,
    ScreeningOutcome, ScreeningReplicate,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::pipeline::{Candidate, Dataset};
use crate::rankstats::{normal_quantile, TwoArmSample, Variable};
use mvn::CorrelatedNormal;

pub const TREATED_MEAN: f64 = 3.0;
pub const CONTROL_MEAN: f64 = 0.0;

/// Draws used when calibrating σ_valid by Monte Carlo.
pub const CALIBRATION_DRAWS: usize = 1_000_000;
pub const CALIBRATION_SEED: u64 = 0x5eed_ca11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dgp {
    /// Multivariate normal candidates; valid ones are y + noise.
    Normal,
    /// Exponential invalid candidates; valid ones are y³ + noise.
    Complex,
}

impl Dgp {
    pub fn as_str(self) -> &'static str {
        match self {
            Dgp::Normal => "normal",
            Dgp::Complex => "complex",
        }
    }
}

impl std::str::FromStr for Dgp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "1" | "dgp1" => Ok(Dgp::Normal),
            "complex" | "2" | "dgp2" => Ok(Dgp::Complex),
            other => Err(Error::Configuration(format!(
                "unknown data-generating process '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Every candidate is invalid.
    NoneValid,
    /// 10% of candidates are valid.
    TenPercentValid,
    /// An explicit number of valid candidates.
    Mixture { valid: usize },
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::NoneValid => "none_valid",
            Scenario::TenPercentValid => "ten_pct_valid",
            Scenario::Mixture { .. } => "mixture",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none_valid" | "1" | "scenario1" => Ok(Scenario::NoneValid),
            "ten_pct_valid" | "2" | "scenario2" => Ok(Scenario::TenPercentValid),
            other => Err(Error::Configuration(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpConfig {
    pub dgp: Dgp,
    pub scenario: Scenario,
    pub n_treated: usize,
    pub n_control: usize,
    pub p_total: usize,
    /// Target U_S of valid candidates, in (½, 1].
    pub target_u_s: f64,
    /// Constant added to the off-diagonal covariance of the candidates.
    pub sigma_corr: f64,
    pub seed: u64,
}

impl DgpConfig {
    /// Balanced arms of `n` subjects each, independent candidates.
    pub fn new(
        dgp: Dgp,
        scenario: Scenario,
        n: usize,
        p_total: usize,
        target_u_s: f64,
        seed: u64,
    ) -> Self {
        DgpConfig {
            dgp,
            scenario,
            n_treated: n,
            n_control: n,
            p_total,
            target_u_s,
            sigma_corr: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_total == 0 {
            return Err(Error::Configuration("need at least one candidate".into()));
        }
        if !(self.target_u_s > 0.5 && self.target_u_s <= 1.0) {
            return Err(Error::Configuration(format!(
                "target U_S must lie in (0.5, 1], got {}",
                self.target_u_s
            )));
        }
        if !(self.sigma_corr.is_finite() && self.sigma_corr >= 0.0) {
            return Err(Error::Configuration(format!(
                "sigma_corr must be finite and >= 0, got {}",
                self.sigma_corr
            )));
        }
        if self.n_treated == 0 || self.n_control == 0 {
            return Err(Error::Configuration("both arms need subjects".into()));
        }
        if let Scenario::Mixture { valid } = self.scenario {
            if valid > self.p_total {
                return Err(Error::Configuration(format!(
                    "{valid} valid candidates requested out of {}",
                    self.p_total
                )));
            }
        }
        Ok(())
    }

    /// (invalid, valid) candidate counts.
    pub fn counts(&self) -> (usize, usize) {
        let valid = match self.scenario {
            Scenario::NoneValid => 0,
            Scenario::TenPercentValid => (self.p_total as f64 * 0.1).round() as usize,
            Scenario::Mixture { valid } => valid,
        };
        (self.p_total - valid, valid)
    }
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub dataset: Dataset,
    /// `valid[j]` is true when candidate j was built from the response.
    pub valid: Vec<bool>,
    pub sigma_valid: f64,
}

/// Noise sd that gives valid candidates the requested U_S.
///
/// Normal: closed form from U_S = Φ(3 / sqrt(2 + 2σ²)). Complex: bisection on
/// a seeded Monte Carlo estimate of P(Y¹³ + e¹ > Y⁰³ + e⁰).
pub fn calibrate_sigma_valid(dgp: Dgp, target_u_s: f64) -> Result<f64> {
    calibrate_sigma_valid_with(dgp, target_u_s, CALIBRATION_SEED, CALIBRATION_DRAWS)
}

pub fn calibrate_sigma_valid_with(
    dgp: Dgp,
    target_u_s: f64,
    seed: u64,
    draws: usize,
) -> Result<f64> {
    if !(target_u_s > 0.5 && target_u_s <= 1.0) {
        return Err(Error::Configuration(format!(
            "target U_S must lie in (0.5, 1], got {target_u_s}"
        )));
    }
    if target_u_s == 1.0 {
        return Ok(0.0);
    }
    let effect = TREATED_MEAN - CONTROL_MEAN;
    match dgp {
        Dgp::Normal => {
            let ratio = effect / normal_quantile(target_u_s)?;
            Ok((ratio * ratio / 2.0 - 1.0).max(0.0).sqrt())
        }
        Dgp::Complex => calibrate_cubic(target_u_s, seed, draws),
    }
}

fn calibrate_cubic(target: f64, seed: u64, draws: usize) -> Result<f64> {
    if draws == 0 {
        return Err(Error::Configuration("calibration needs draws".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signal = Vec::with_capacity(draws);
    let mut noise = Vec::with_capacity(draws);
    for _ in 0..draws {
        let y1 = TREATED_MEAN + rng.sample::<f64, _>(StandardNormal);
        let y0 = CONTROL_MEAN + rng.sample::<f64, _>(StandardNormal);
        let e1: f64 = rng.sample(StandardNormal);
        let e0: f64 = rng.sample(StandardNormal);
        signal.push(y1.powi(3) - y0.powi(3));
        noise.push(e0 - e1);
    }
    // Same draws at every σ, so the estimate is monotone in σ.
    let u_at = |sigma: f64| {
        let wins: f64 = signal
            .iter()
            .zip(&noise)
            .map(|(&s, &e)| {
                let t = sigma * e;
                if s > t {
                    1.0
                } else if s == t {
                    0.5
                } else {
                    0.0
                }
            })
            .sum();
        wins / draws as f64
    };
    if u_at(0.0) <= target {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while u_at(hi) > target {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Domain(format!(
                "cannot bracket sigma_valid for U_S = {target}"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if u_at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 * hi.max(1.0) {
            break;
        }
    }
    let sigma = 0.5 * (lo + hi);
    let achieved = u_at(sigma);
    if (achieved - target).abs() > 0.002 {
        return Err(Error::Domain(format!(
            "calibration reached U_S = {achieved} for target {target}"
        )));
    }
    Ok(sigma)
}

/// Generates one dataset from `cfg.seed`.
pub fn generate(cfg: &DgpConfig) -> Result<SimulatedData> {
    cfg.validate()?;
    let sigma_valid = if cfg.counts().1 > 0 {
        calibrate_sigma_valid(cfg.dgp, cfg.target_u_s)?
    } else {
        0.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    generate_with(cfg, sigma_valid, &mut rng)
}

/// Generates one dataset with a precomputed σ_valid from the given stream.
/// Candidates are ordered valid first, then invalid.
pub fn generate_with<R: Rng>(
    cfg: &DgpConfig,
    sigma_valid: f64,
    rng: &mut R,
) -> Result<SimulatedData> {
    cfg.validate()?;
    let (p_invalid, p_valid) = cfg.counts();
    let (n1, n0) = (cfg.n_treated, cfg.n_control);
    let n = n1 + n0;

    let response: Vec<f64> = (0..n)
        .map(|i| {
            let mean = if i < n1 { TREATED_MEAN } else { CONTROL_MEAN };
            mean + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();

    // Column-major: columns[j][i] is candidate j for subject i.
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(cfg.p_total);

    if p_valid > 0 {
        let base: Vec<f64> = match cfg.dgp {
            Dgp::Normal => response.clone(),
            Dgp::Complex => response.iter().map(|y| y.powi(3)).collect(),
        };
        let noise = if sigma_valid > 0.0 {
            let sd = vec![sigma_valid; p_valid];
            Some(CorrelatedNormal::new(&sd, cfg.sigma_corr * sigma_valid)?)
        } else {
            None
        };
        let mut valid_cols = vec![base.clone(); p_valid];
        if let Some(noise) = noise {
            let mut draw = vec![0.0; p_valid];
            for (i, &b) in base.iter().enumerate() {
                noise.sample_into(rng, &mut draw);
                for (col, e) in valid_cols.iter_mut().zip(&draw) {
                    col[i] = b + e;
                }
            }
        }
        columns.extend(valid_cols);
    }

    if p_invalid > 0 {
        match cfg.dgp {
            Dgp::Normal => {
                let means: Vec<f64> = (0..p_invalid).map(|_| rng.random_range(0.5..2.5)).collect();
                let sds: Vec<f64> = (0..p_invalid).map(|_| rng.random_range(0.5..2.0)).collect();
                let dist = CorrelatedNormal::new(&sds, cfg.sigma_corr)?;
                let mut cols = vec![vec![0.0; n]; p_invalid];
                let mut draw = vec![0.0; p_invalid];
                for i in 0..n {
                    dist.sample_into(rng, &mut draw);
                    for (j, col) in cols.iter_mut().enumerate() {
                        col[i] = means[j] + draw[j];
                    }
                }
                columns.extend(cols);
            }
            Dgp::Complex => {
                for _ in 0..p_invalid {
                    let rate: f64 = rng.random_range(0.5..2.5);
                    let exp = Exp::new(rate).map_err(|e| Error::Domain(e.to_string()))?;
                    columns.push((0..n).map(|_| exp.sample(rng)).collect());
                }
            }
        }
    }

    let split = |v: &[f64]| -> Result<Variable> {
        Ok(Variable::Unpaired(TwoArmSample::new(
            v[..n1].to_vec(),
            v[n1..].to_vec(),
        )?))
    };
    let width = cfg.p_total.to_string().len().max(3);
    let candidates = columns
        .iter()
        .enumerate()
        .map(|(j, col)| {
            Ok(Candidate {
                name: format!("S{:0width$}", j + 1),
                values: split(col)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let subject_ids = (0..n1)
        .map(|i| format!("t{}", i + 1))
        .chain((0..n0).map(|k| format!("c{}", k + 1)))
        .collect();
    let dataset = Dataset::new(split(&response)?, candidates, subject_ids)?;

    let mut valid = vec![true; p_valid];
    valid.extend(std::iter::repeat_n(false, p_invalid));
    Ok(SimulatedData {
        dataset,
        valid,
        sigma_valid,
    })
}

/// Confusion counts and rates of one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationMetrics {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
    /// fp / max(1, fp + tn)
    pub fpr: f64,
    /// fp / max(1, fp + tp)
    pub fdp: f64,
    /// tp / max(1, tp + fn)
    pub power: f64,
}

impl SimulationMetrics {
    pub fn from_selection(valid: &[bool], selected: &[bool]) -> SimulationMetrics {
        assert_eq!(valid.len(), selected.len());
        let (mut tp, mut fp, mut tn, mut fneg) = (0, 0, 0, 0);
        for (&v, &s) in valid.iter().zip(selected) {
            match (v, s) {
                (true, true) => tp += 1,
                (true, false) => fneg += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
            }
        }
        let rate = |a: usize, b: usize| a as f64 / (a + b).max(1) as f64;
        SimulationMetrics {
            true_pos: tp,
            false_pos: fp,
            true_neg: tn,
            false_neg: fneg,
            fpr: rate(fp, tn),
            fdp: rate(fp, tp),
            power: rate(tp, fneg),
        }
    }
}
