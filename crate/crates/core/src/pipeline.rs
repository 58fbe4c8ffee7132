//! The two-stage procedure: split subjects, screen every candidate on the
//! screening split, collapse the selected set into one weighted marker, and
//! test that marker on the held-out evaluation split.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result, StageExt};
use crate::mtc::{adjust, Correction};
use crate::rankstats::{Design, UEstimate, Variable};
use crate::surrogate::{epsilon_for, test_with_margin, SurrogateTestResult, TestConfig};

/// A named candidate surrogate aligned with the response.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub name: String,
    pub values: Variable,
}

/// Response plus candidates, all aligned subject-for-subject.
///
/// `subject_ids` lists treated subjects then control subjects for the
/// unpaired design, or one id per unit for the paired design, in the same
/// positions as every variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    response: Variable,
    candidates: Vec<Candidate>,
    subject_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        response: Variable,
        candidates: Vec<Candidate>,
        subject_ids: Vec<String>,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidInput(
                "dataset has no candidate surrogates".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(candidates.len());
        for c in &candidates {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate candidate name '{}'",
                    c.name
                )));
            }
            if c.values.design() != response.design() || c.values.shape() != response.shape() {
                return Err(Error::Alignment(format!(
                    "candidate '{}' is {} {:?} but the response is {} {:?}",
                    c.name,
                    c.values.design().as_str(),
                    c.values.shape(),
                    response.design().as_str(),
                    response.shape()
                )));
            }
        }
        let expected_ids = match response.design() {
            Design::Unpaired => response.n_observations(),
            Design::Paired => response.shape().0,
        };
        if subject_ids.len() != expected_ids {
            return Err(Error::Alignment(format!(
                "{} subject ids for {} subjects",
                subject_ids.len(),
                expected_ids
            )));
        }
        Ok(Dataset {
            response,
            candidates,
            subject_ids,
        })
    }

    pub fn design(&self) -> Design {
        self.response.design()
    }

    pub fn response(&self) -> &Variable {
        &self.response
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn candidate(&self, name: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.name == name)
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    /// (n₁, n₀) for independent arms, (n, n) for paired units.
    pub fn shape(&self) -> (usize, usize) {
        self.response.shape()
    }

    /// Restricts every variable to the given positions within each half.
    fn subset(&self, first: &[usize], second: &[usize]) -> Result<Dataset> {
        let response = self.response.subset(first, second)?;
        let candidates = self
            .candidates
            .iter()
            .map(|c| {
                Ok(Candidate {
                    name: c.name.clone(),
                    values: c.values.subset(first, second)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let subject_ids = match self.design() {
            Design::Unpaired => {
                let n1 = self.shape().0;
                first
                    .iter()
                    .map(|&i| self.subject_ids[i].clone())
                    .chain(second.iter().map(|&k| self.subject_ids[n1 + k].clone()))
                    .collect()
            }
            Design::Paired => first.iter().map(|&i| self.subject_ids[i].clone()).collect(),
        };
        Dataset::new(response, candidates, subject_ids)
    }

    pub fn with_candidates(&self, candidates: Vec<Candidate>) -> Result<Dataset> {
        Dataset::new(self.response.clone(), candidates, self.subject_ids.clone())
    }
}

fn split_count(n: usize, ratio: f64) -> usize {
    (ratio * n as f64).floor() as usize
}

fn shuffled_halves(n: usize, keep: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let (a, b) = idx.split_at(keep);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Splits subjects into disjoint screening and evaluation datasets.
///
/// floor(ratio·n) subjects go to screening, per arm for independent arms
/// and over whole units for paired data. Deterministic in `seed`.
pub fn split(data: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Configuration(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n1, n0) = data.shape();
    let infeasible = |what: &str, screen: usize, eval: usize| {
        Error::Configuration(format!(
            "split ratio {ratio} leaves {screen} screening and {eval} evaluation {what}; each needs at least 2"
        ))
    };
    match data.design() {
        Design::Unpaired => {
            let (k1, k0) = (split_count(n1, ratio), split_count(n0, ratio));
            if k1 < 2 || n1 - k1 < 2 {
                return Err(infeasible("treated subjects", k1, n1 - k1));
            }
            if k0 < 2 || n0 - k0 < 2 {
                return Err(infeasible("control subjects", k0, n0 - k0));
            }
            let (t_screen, t_eval) = shuffled_halves(n1, k1, &mut rng);
            let (c_screen, c_eval) = shuffled_halves(n0, k0, &mut rng);
            Ok((
                data.subset(&t_screen, &c_screen)?,
                data.subset(&t_eval, &c_eval)?,
            ))
        }
        Design::Paired => {
            let k = split_count(n1, ratio);
            if k < 2 || n1 - k < 2 {
                return Err(infeasible("units", k, n1 - k));
            }
            let (screen, eval) = shuffled_halves(n1, k, &mut rng);
            Ok((data.subset(&screen, &screen)?, data.subset(&eval, &eval)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub name: String,
    pub test: SurrogateTestResult,
    pub raw_p: f64,
    pub adjusted_p: f64,
    /// Constant across every observation; reported with p = 1.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningReport {
    /// Ordered by adjusted p, then |δ̂|, then name.
    pub rows: Vec<CandidateResult>,
    pub u_y: UEstimate,
    pub epsilon_used: f64,
    pub method: Correction,
    pub alpha: f64,
    /// Names with adjusted p < α, in row order.
    pub selected: Vec<String>,
    pub design: Design,
    /// Arm sizes of the data that was screened.
    pub shape: (usize, usize),
}

impl ScreeningReport {
    pub fn row(&self, name: &str) -> Option<&CandidateResult> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Tests every candidate against the response and corrects for multiplicity.
pub fn screen(data: &Dataset, cfg: &TestConfig, method: Correction) -> Result<ScreeningReport> {
    let y = data.response();
    let u_y = y.u_statistic();
    let epsilon = epsilon_for(y, cfg)?;

    let tested = data
        .candidates()
        .par_iter()
        .map(|c| {
            let test = test_with_margin(y, &u_y, &c.values, epsilon, cfg)?;
            let degenerate = c.values.is_constant();
            let raw_p = if degenerate { 1.0 } else { test.p_overall };
            Ok((test, raw_p, degenerate))
        })
        .collect::<Result<Vec<_>>>()?;

    let raw: Vec<f64> = tested.iter().map(|t| t.1).collect();
    let adjusted = adjust(&raw, method)?.adjusted;

    let mut rows: Vec<CandidateResult> = data
        .candidates()
        .iter()
        .zip(tested)
        .zip(adjusted)
        .map(
            |((c, (test, raw_p, degenerate)), adjusted_p)| CandidateResult {
                name: c.name.clone(),
                test,
                raw_p,
                adjusted_p,
                degenerate,
            },
        )
        .collect();
    rows.sort_by(|a, b| {
        a.adjusted_p
            .total_cmp(&b.adjusted_p)
            .then(a.test.delta.abs().total_cmp(&b.test.delta.abs()))
            .then_with(|| a.name.cmp(&b.name))
    });

    let selected = rows
        .iter()
        .filter(|r| r.adjusted_p < cfg.alpha())
        .map(|r| r.name.clone())
        .collect();

    Ok(ScreeningReport {
        rows,
        u_y,
        epsilon_used: epsilon,
        method,
        alpha: cfg.alpha(),
        selected,
        design: data.design(),
        shape: data.shape(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedSurrogate {
    pub members: Vec<String>,
    pub weights: Vec<f64>,
    /// Pooled moments used to standardize each member, in member order.
    pub standardization: Vec<Standardization>,
    /// Members with zero pooled sd; they contribute nothing.
    pub zero_sd_members: Vec<String>,
}

/// Smallest |δ̂| used for a weight: 1/(2n₁n₀) unpaired, 1/(4n) paired.
pub fn weight_floor(design: Design, shape: (usize, usize)) -> f64 {
    match design {
        Design::Unpaired => 1.0 / (2.0 * shape.0 as f64 * shape.1 as f64),
        Design::Paired => 1.0 / (4.0 * shape.0 as f64),
    }
}

/// Inverse-|δ̂| weights for the selected set of a screening report.
pub fn screening_weights(report: &ScreeningReport) -> Result<(Vec<String>, Vec<f64>)> {
    if report.selected.is_empty() {
        return Err(Error::NoSurrogateSelected);
    }
    let floor = weight_floor(report.design, report.shape);
    let by_name: HashMap<&str, &CandidateResult> =
        report.rows.iter().map(|r| (r.name.as_str(), r)).collect();
    let weights = report
        .selected
        .iter()
        .map(|name| {
            by_name
                .get(name.as_str())
                .map(|r| 1.0 / r.test.delta.abs().max(floor))
                .ok_or_else(|| {
                    Error::InvalidInput(format!("selected '{name}' has no screening row"))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((report.selected.clone(), weights))
}

/// Forms γ = Σ wⱼ (Sⱼ − meanⱼ)/sdⱼ over the given members of `data`, with
/// pooled moments taken from `data` itself.
pub fn build_gamma(
    data: &Dataset,
    members: &[String],
    weights: &[f64],
) -> Result<(CombinedSurrogate, Variable)> {
    if members.is_empty() {
        return Err(Error::NoSurrogateSelected);
    }
    if members.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} members but {} weights",
            members.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "weights must be positive and finite, got {w}"
        )));
    }
    let index: HashMap<&str, &Candidate> = data
        .candidates()
        .iter()
        .map(|c| (c.name.as_str(), c))
        .collect();

    let n_obs = data.response().n_observations();
    let mut gamma = vec![0.0; n_obs];
    let mut standardization = Vec::with_capacity(members.len());
    let mut zero_sd_members = Vec::new();

    for (name, &w) in members.iter().zip(weights) {
        let c = index
            .get(name.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("member '{name}' is not in the dataset")))?;
        let obs: Vec<f64> = c.values.observations().collect();
        let mean = obs.iter().sum::<f64>() / n_obs as f64;
        let ss: f64 = obs.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = if n_obs > 1 {
            (ss / (n_obs - 1) as f64).sqrt()
        } else {
            0.0
        };
        standardization.push(Standardization { mean, sd });
        if sd == 0.0 {
            zero_sd_members.push(name.clone());
            continue;
        }
        for (g, v) in gamma.iter_mut().zip(&obs) {
            *g += w * (v - mean) / sd;
        }
    }

    let (n_first, _) = data.shape();
    let (first, second) = gamma.split_at(n_first);
    let values = match data.design() {
        Design::Unpaired => Variable::Unpaired(crate::rankstats::TwoArmSample::new(
            first.to_vec(),
            second.to_vec(),
        )?),
        Design::Paired => Variable::Paired(crate::rankstats::PairedSample::new(
            first.to_vec(),
            second.to_vec(),
        )?),
    };
    Ok((
        CombinedSurrogate {
            members: members.to_vec(),
            weights: weights.to_vec(),
            standardization,
            zero_sd_members,
        },
        values,
    ))
}

/// Combines the report's selected set into one marker over `data`'s subjects.
pub fn combine(data: &Dataset, report: &ScreeningReport) -> Result<(CombinedSurrogate, Variable)> {
    let (members, weights) = screening_weights(report)?;
    build_gamma(data, &members, &weights)
}

/// Tests an aligned combined marker against the response of `eval_data`.
pub fn evaluate(
    eval_data: &Dataset,
    gamma: &Variable,
    cfg: &TestConfig,
) -> Result<SurrogateTestResult> {
    crate::surrogate::test_single(eval_data.response(), gamma, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiseResult {
    pub screening: ScreeningReport,
    pub combined: CombinedSurrogate,
    pub evaluation: SurrogateTestResult,
    pub split_seed: u64,
    pub split_ratio: f64,
    pub screening_subjects: Vec<String>,
    pub evaluation_subjects: Vec<String>,
    /// γ and the response on the evaluation split, for rank plots.
    pub gamma: Variable,
    pub evaluation_response: Variable,
}

/// Full two-stage run with one configuration for both stages.
pub fn run_rise(
    data: &Dataset,
    ratio: f64,
    seed: u64,
    cfg: &TestConfig,
    method: Correction,
) -> Result<RiseResult> {
    run_rise_with(data, ratio, seed, cfg, cfg, method)
}

/// Full two-stage run where screening and evaluation use separate test
/// configurations (e.g. a fixed screening margin with an adaptive
/// evaluation margin).
pub fn run_rise_with(
    data: &Dataset,
    ratio: f64,
    seed: u64,
    screening_cfg: &TestConfig,
    evaluation_cfg: &TestConfig,
    method: Correction,
) -> Result<RiseResult> {
    let (screening_data, evaluation_data) = split(data, ratio, seed).stage("split")?;
    let screening = screen(&screening_data, screening_cfg, method).stage("screening")?;
    let (combined, gamma) = combine(&evaluation_data, &screening).stage("combination")?;
    let evaluation = evaluate(&evaluation_data, &gamma, evaluation_cfg).stage("evaluation")?;
    Ok(RiseResult {
        screening,
        combined,
        evaluation,
        split_seed: seed,
        split_ratio: ratio,
        screening_subjects: screening_data.subject_ids().to_vec(),
        evaluation_subjects: evaluation_data.subject_ids().to_vec(),
        gamma,
        evaluation_response: evaluation_data.response().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankstats::{PairedSample, TwoArmSample};
    use crate::surrogate::{EpsilonMode, TestMode};

    fn unpaired(t: &[f64], c: &[f64]) -> Variable {
        Variable::Unpaired(TwoArmSample::new(t.to_vec(), c.to_vec()).unwrap())
    }

    fn paired(post: &[f64], pre: &[f64]) -> Variable {
        Variable::Paired(PairedSample::new(post.to_vec(), pre.to_vec()).unwrap())
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    fn paired_dataset(n: usize) -> Dataset {
        let post: Vec<f64> = (0..n).map(|i| 10.0 + (i * 7 % n) as f64).collect();
        let pre: Vec<f64> = (0..n).map(|i| (i * 3 % n) as f64).collect();
        let noise: Vec<f64> = (0..n).map(|i| ((i * 13) % 17) as f64).collect();
        let noise2: Vec<f64> = (0..n).map(|i| ((i * 11) % 19) as f64).collect();
        Dataset::new(
            paired(&post, &pre),
            vec![
                Candidate {
                    name: "copy".into(),
                    values: paired(&post, &pre),
                },
                Candidate {
                    name: "noise".into(),
                    values: paired(&noise, &noise2),
                },
            ],
            ids(n),
        )
        .unwrap()
    }

    #[test]
    fn dataset_validation() {
        let y = unpaired(&[1.0, 2.0], &[0.0, 0.5]);
        let c = |name: &str, v: Variable| Candidate {
            name: name.into(),
            values: v,
        };
        assert!(Dataset::new(y.clone(), vec![], ids(4)).is_err());
        assert!(Dataset::new(
            y.clone(),
            vec![c("a", y.clone()), c("a", y.clone())],
            ids(4)
        )
        .is_err());
        assert!(matches!(
            Dataset::new(
                y.clone(),
                vec![c("a", unpaired(&[1.0], &[0.0, 1.0, 2.0]))],
                ids(4)
            ),
            Err(Error::Alignment(_))
        ));
        assert!(matches!(
            Dataset::new(
                y.clone(),
                vec![c("a", paired(&[1.0, 2.0], &[0.0, 1.0]))],
                ids(4)
            ),
            Err(Error::Alignment(_))
        ));
        assert!(Dataset::new(y.clone(), vec![c("a", y.clone())], ids(3)).is_err());
        assert!(Dataset::new(y.clone(), vec![c("a", y)], ids(4)).is_ok());
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let data = paired_dataset(103);
        let (s, e) = split(&data, 0.75, 11).unwrap();
        assert_eq!(s.shape(), (77, 77));
        assert_eq!(e.shape(), (26, 26));
        let mut all: Vec<String> = s
            .subject_ids()
            .iter()
            .chain(e.subject_ids())
            .cloned()
            .collect();
        all.sort();
        let mut orig = data.subject_ids().to_vec();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn split_is_deterministic_and_seed_dependent() {
        let data = paired_dataset(40);
        let a = split(&data, 0.75, 5).unwrap();
        let b = split(&data, 0.75, 5).unwrap();
        assert_eq!(a, b);
        let c = split(&data, 0.75, 6).unwrap();
        assert_ne!(a.0.subject_ids(), c.0.subject_ids());
    }

    #[test]
    fn split_keeps_arm_proportions() {
        let t: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let c: Vec<f64> = (0..18).map(|i| i as f64 * 0.5).collect();
        let data = Dataset::new(
            unpaired(&t, &c),
            vec![Candidate {
                name: "x".into(),
                values: unpaired(&t, &c),
            }],
            ids(48),
        )
        .unwrap();
        let (s, e) = split(&data, 0.75, 1).unwrap();
        assert_eq!(s.shape(), (22, 13));
        assert_eq!(e.shape(), (8, 5));
        // Treated ids stay in the treated block.
        let treated: HashSet<&String> = data.subject_ids()[..30].iter().collect();
        assert!(s.subject_ids()[..22].iter().all(|id| treated.contains(id)));
        assert!(e.subject_ids()[8..].iter().all(|id| !treated.contains(id)));
    }

    #[test]
    fn split_guards() {
        let data = paired_dataset(6);
        assert!(matches!(split(&data, 0.1, 0), Err(Error::Configuration(_))));
        assert!(matches!(split(&data, 0.9, 0), Err(Error::Configuration(_))));
        assert!(split(&data, 0.0, 0).is_err());
        assert!(split(&data, 1.0, 0).is_err());
        assert!(split(&data, 0.5, 0).is_ok());
    }

    #[test]
    fn perfect_surrogate_is_selected() {
        let data = paired_dataset(30);
        let cfg = TestConfig::new(0.05, 0.9, EpsilonMode::Adaptive, TestMode::Tost).unwrap();
        let report = screen(&data, &cfg, Correction::Bonferroni).unwrap();
        assert_eq!(report.selected, vec!["copy".to_string()]);
        assert_eq!(report.rows[0].name, "copy");
        assert_eq!(report.rows[0].raw_p, 0.0);
    }

    #[test]
    fn constant_candidate_is_degenerate() {
        let y = unpaired(&[3.0, 4.0, 5.0], &[0.0, 1.0, 2.0]);
        let data = Dataset::new(
            y.clone(),
            vec![
                Candidate {
                    name: "flat".into(),
                    values: unpaired(&[1.0; 3], &[1.0; 3]),
                },
                Candidate {
                    name: "same".into(),
                    values: y,
                },
            ],
            ids(6),
        )
        .unwrap();
        let report = screen(&data, &TestConfig::default(), Correction::None).unwrap();
        let flat = report.row("flat").unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.raw_p, 1.0);
        assert_eq!(report.rows.last().unwrap().name, "flat");
    }

    #[test]
    fn weight_floor_arithmetic() {
        assert_eq!(1.0 / weight_floor(Design::Paired, (26, 26)), 104.0);
        assert_eq!(1.0 / weight_floor(Design::Unpaired, (10, 5)), 100.0);
    }

    #[test]
    fn single_member_gamma_is_scaled_standardized_column() {
        let data = paired_dataset(12);
        let (combined, gamma) = build_gamma(&data, &["noise".to_string()], &[10.0]).unwrap();
        let noise = &data.candidate("noise").unwrap().values;
        let st = combined.standardization[0];
        for (g, v) in gamma.observations().zip(noise.observations()) {
            assert!((g - 10.0 * (v - st.mean) / st.sd).abs() < 1e-12);
        }
        // Ranks are untouched by positive scaling.
        assert_eq!(gamma.u_statistic(), noise.u_statistic());
    }

    #[test]
    fn gamma_guards() {
        let data = paired_dataset(12);
        assert!(matches!(
            build_gamma(&data, &[], &[]),
            Err(Error::NoSurrogateSelected)
        ));
        assert!(build_gamma(&data, &["missing".to_string()], &[1.0]).is_err());
        assert!(build_gamma(&data, &["copy".to_string()], &[0.0]).is_err());
        assert!(build_gamma(&data, &["copy".to_string()], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_sd_member_is_flagged() {
        let y = paired(&[3.0, 4.0, 5.0], &[0.0, 1.0, 2.0]);
        let data = Dataset::new(
            y.clone(),
            vec![
                Candidate {
                    name: "flat".into(),
                    values: paired(&[2.0; 3], &[2.0; 3]),
                },
                Candidate {
                    name: "y".into(),
                    values: y,
                },
            ],
            ids(3),
        )
        .unwrap();
        let (combined, gamma) =
            build_gamma(&data, &["flat".to_string(), "y".to_string()], &[5.0, 1.0]).unwrap();
        assert_eq!(combined.zero_sd_members, vec!["flat".to_string()]);
        assert_eq!(gamma.u_statistic(), data.response().u_statistic());
    }

    #[test]
    fn combine_needs_a_selection() {
        let data = paired_dataset(20);
        let mut report = screen(&data, &TestConfig::default(), Correction::Bonferroni).unwrap();
        report.selected.clear();
        assert!(matches!(
            combine(&data, &report),
            Err(Error::NoSurrogateSelected)
        ));
    }

    #[test]
    fn rise_errors_carry_stage() {
        let data = paired_dataset(6);
        let err = run_rise(
            &data,
            0.1,
            0,
            &TestConfig::default(),
            Correction::Bonferroni,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("split:"));
        assert!(matches!(err.root(), Error::Configuration(_)));
    }
}
