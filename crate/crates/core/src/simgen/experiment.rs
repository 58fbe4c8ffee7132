use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{calibrate_sigma_valid, generate_with, Dgp, DgpConfig, Scenario, SimulationMetrics};
use crate::error::{Error, Result};
use crate::mtc::{adjust, Correction};
use crate::pipeline::{build_gamma, evaluate, screen};
use crate::surrogate::{EpsilonMode, TestConfig};

fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How the screening margin is chosen in each replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginRule {
    /// ε = Û_Y − ½: only candidates that beat chance are selectable.
    Boundary,
    /// Whatever the test configuration says.
    FromConfig,
}

#[derive(Debug, Clone)]
pub struct ScreeningExperiment {
    /// `dgp.seed` is the base seed; replicate r uses stream r.
    pub dgp: DgpConfig,
    pub test: TestConfig,
    pub margin: MarginRule,
    /// Selection is recorded under each of these.
    pub corrections: Vec<Correction>,
    pub n_sim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningReplicate {
    pub replicate: usize,
    pub u_y: f64,
    pub epsilon: f64,
    /// One entry per requested correction, in request order.
    pub metrics: Vec<(Correction, SimulationMetrics)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> MetricSummary {
        let n = values.len();
        if n == 0 {
            return MetricSummary {
                mean: f64::NAN,
                sd: f64::NAN,
                q05: f64::NAN,
                q25: f64::NAN,
                median: f64::NAN,
                q75: f64::NAN,
                q95: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        // Linear interpolation between order statistics.
        let q = |p: f64| {
            let h = p * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        };
        MetricSummary {
            mean,
            sd,
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningOutcome {
    pub sigma_valid: f64,
    pub replicates: Vec<ScreeningReplicate>,
}

impl ScreeningOutcome {
    fn values(&self, method: Correction, f: impl Fn(&SimulationMetrics) -> f64) -> Vec<f64> {
        self.replicates
            .iter()
            .filter_map(|r| {
                r.metrics
                    .iter()
                    .find(|(m, _)| *m == method)
                    .map(|(_, s)| f(s))
            })
            .collect()
    }

    pub fn fpr(&self, method: Correction) -> MetricSummary {
        MetricSummary::from_values(&self.values(method, |m| m.fpr))
    }

    pub fn fdp(&self, method: Correction) -> MetricSummary {
        MetricSummary::from_values(&self.values(method, |m| m.fdp))
    }

    pub fn power(&self, method: Correction) -> MetricSummary {
        MetricSummary::from_values(&self.values(method, |m| m.power))
    }
}

/// Generates `n_sim` datasets, screens each, and scores the selection
/// against the known validity labels.
pub fn run_screening_experiment(exp: &ScreeningExperiment) -> Result<ScreeningOutcome> {
    exp.dgp.validate()?;
    if exp.n_sim == 0 {
        return Err(Error::Configuration("n_sim must be at least 1".into()));
    }
    if exp.corrections.is_empty() {
        return Err(Error::Configuration("no corrections requested".into()));
    }
    if exp.dgp.n_treated < 2 || exp.dgp.n_control < 2 {
        return Err(Error::InsufficientData(
            "simulation arms need at least 2 subjects".into(),
        ));
    }
    let sigma_valid = if exp.dgp.counts().1 > 0 {
        calibrate_sigma_valid(exp.dgp.dgp, exp.dgp.target_u_s)?
    } else {
        0.0
    };

    let replicates = (0..exp.n_sim)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(exp.dgp.seed, r as u64);
            let sim = generate_with(&exp.dgp, sigma_valid, &mut rng)?;
            let cfg = match exp.margin {
                MarginRule::FromConfig => exp.test,
                MarginRule::Boundary => {
                    let u_y = sim.dataset.response().u_statistic().value;
                    exp.test
                        .with_epsilon(EpsilonMode::Fixed((u_y - 0.5).max(0.0)))?
                }
            };
            let report = screen(&sim.dataset, &cfg, Correction::None)?;
            let by_name: HashMap<&str, f64> = report
                .rows
                .iter()
                .map(|row| (row.name.as_str(), row.raw_p))
                .collect();
            let raw: Vec<f64> = sim
                .dataset
                .candidates()
                .iter()
                .map(|c| by_name[c.name.as_str()])
                .collect();
            let metrics = exp
                .corrections
                .iter()
                .map(|&method| {
                    let adjusted = adjust(&raw, method)?.adjusted;
                    let selected: Vec<bool> = adjusted.iter().map(|&q| q < cfg.alpha()).collect();
                    Ok((
                        method,
                        SimulationMetrics::from_selection(&sim.valid, &selected),
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ScreeningReplicate {
                replicate: r,
                u_y: report.u_y.value,
                epsilon: report.epsilon_used,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ScreeningOutcome {
        sigma_valid,
        replicates,
    })
}

/// Evaluation of a fixed-size surrogate set with a growing share of
/// invalid members.
#[derive(Debug, Clone)]
pub struct EvaluationExperiment {
    pub dgp: Dgp,
    pub n_treated: usize,
    pub n_control: usize,
    /// U_S of the valid members.
    pub valid_u_s: f64,
    pub set_size: usize,
    /// Fractions of the set that are invalid.
    pub rho_grid: Vec<f64>,
    pub sigma_corr: f64,
    pub n_sim: usize,
    pub test: TestConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub rho: f64,
    pub n_invalid: usize,
    pub replicate: usize,
    pub u_y: f64,
    pub u_gamma: f64,
    pub delta: f64,
    pub sigma_delta: f64,
    pub epsilon: f64,
    pub p_value: f64,
    pub rejected: bool,
}

/// ⌈ρ·k⌉, tolerant of representation error in ρ.
pub fn invalid_count(rho: f64, set_size: usize) -> usize {
    let x = rho * set_size as f64;
    ((x - 1e-9).ceil().max(0.0) as usize).min(set_size)
}

/// Fraction of records at `rho` whose test rejected.
pub fn rejection_rate(records: &[EvaluationRecord], rho: f64) -> f64 {
    let hits: Vec<bool> = records
        .iter()
        .filter(|r| (r.rho - rho).abs() < 1e-12)
        .map(|r| r.rejected)
        .collect();
    hits.iter().filter(|&&h| h).count() as f64 / hits.len().max(1) as f64
}

pub fn run_evaluation_experiment(exp: &EvaluationExperiment) -> Result<Vec<EvaluationRecord>> {
    if exp.set_size == 0 || exp.n_sim == 0 || exp.rho_grid.is_empty() {
        return Err(Error::Configuration(
            "evaluation experiment needs a set size, replicates and a rho grid".into(),
        ));
    }
    if let Some(r) = exp.rho_grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Configuration(format!(
            "rho must lie in [0, 1], got {r}"
        )));
    }
    if exp.n_treated < 2 || exp.n_control < 2 {
        return Err(Error::InsufficientData(
            "simulation arms need at least 2 subjects".into(),
        ));
    }
    let sigma_valid = calibrate_sigma_valid(exp.dgp, exp.valid_u_s)?;

    let jobs: Vec<(usize, usize)> = (0..exp.rho_grid.len())
        .flat_map(|g| (0..exp.n_sim).map(move |r| (g, r)))
        .collect();
    jobs.into_par_iter()
        .map(|(g, r)| {
            let rho = exp.rho_grid[g];
            let n_invalid = invalid_count(rho, exp.set_size);
            let dgp = DgpConfig {
                dgp: exp.dgp,
                scenario: Scenario::Mixture {
                    valid: exp.set_size - n_invalid,
                },
                n_treated: exp.n_treated,
                n_control: exp.n_control,
                p_total: exp.set_size,
                target_u_s: exp.valid_u_s,
                sigma_corr: exp.sigma_corr,
                seed: exp.seed,
            };
            let mut rng = replicate_rng(exp.seed, ((g as u64) << 32) | r as u64);
            let sim = generate_with(&dgp, sigma_valid, &mut rng)?;
            let names: Vec<String> = sim
                .dataset
                .candidates()
                .iter()
                .map(|c| c.name.clone())
                .collect();
            let weights = vec![1.0; names.len()];
            let (_, gamma) = build_gamma(&sim.dataset, &names, &weights)?;
            let t = evaluate(&sim.dataset, &gamma, &exp.test)?;
            Ok(EvaluationRecord {
                rho,
                n_invalid,
                replicate: r,
                u_y: t.u_y.value,
                u_gamma: t.u_s.value,
                delta: t.delta,
                sigma_delta: t.sigma_delta,
                epsilon: t.epsilon,
                p_value: t.p_overall,
                rejected: t.rejects(exp.test.alpha()),
            })
        })
        .collect()
}
