//! Acceptance run: one PASS/FAIL/SKIP line per criterion, non-zero exit when
//! any criterion fails.

#[path = "../common/mod.rs"]
mod common;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rise::io::report::rank_scatter;
use rise::io::{ingest, ConfigFile, IngestSpec};
use rise::mtc::adjust;
use rise::pipeline::{run_rise_with, screen, split};
use rise::rankstats::{normal_cdf, u_statistic_paired, u_statistic_unpaired};
use rise::simgen::{
    calibrate_sigma_valid, generate, rejection_rate, run_evaluation_experiment,
    run_screening_experiment, Dgp, DgpConfig, EvaluationExperiment, MarginRule, Scenario,
    ScreeningExperiment,
};
use rise::surrogate::{assemble, test_with_margin};
use rise::variance::{delta_variance_paired, delta_variance_unpaired};
use rise::{
    Correction, Design, EpsilonMode, PairedSample, TestConfig, TestMode, TwoArmSample, UEstimate,
};

use common::*;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: &mut String) -> bool {
    let _ = write!(
        detail,
        "; {:.2}s (limit {}s)",
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    elapsed < limit
}

fn u_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for i in 0..1000 {
        let n1 = rng.random_range(1..=50);
        let n0 = rng.random_range(1..=50);
        let tied = i % 2 == 0;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if tied {
                        rng.random_range(0..5) as f64
                    } else {
                        rng.sample(StandardNormal)
                    }
                })
                .collect()
        };
        let (t, c) = (draw(n1), draw(n0));
        let fast = u_statistic_unpaired(&TwoArmSample::new(t.clone(), c.clone()).unwrap()).value;
        mismatches += (fast != brute_u_unpaired(&t, &c)) as usize;
        let m = n1.min(n0);
        let fast =
            u_statistic_paired(&PairedSample::new(t[..m].to_vec(), c[..m].to_vec()).unwrap()).value;
        mismatches += (fast != brute_u_paired(&t[..m], &c[..m])) as usize;
    }
    let mut detail = format!("{mismatches} mismatches over 1000 instances per design");
    let fast = within(start.elapsed(), Duration::from_secs(5), &mut detail);
    verdict(mismatches == 0 && fast, detail)
}

fn variance_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut agree = [0usize; 2];
    for i in 0..20 {
        let n = [20, 35, 50][i % 3];
        let [yt, yc, st, sc] = correlated_arms(&mut rng, n, n, 0.8);
        let analytic = delta_variance_unpaired(
            &TwoArmSample::new(yt.clone(), yc.clone()).unwrap(),
            &TwoArmSample::new(st.clone(), sc.clone()).unwrap(),
        )
        .unwrap()
        .sigma_delta;
        let boot = bootstrap_sd_unpaired((&yt, &yc), (&st, &sc), 2000, &mut rng);
        agree[0] += ((analytic / boot - 1.0).abs() <= 0.15) as usize;

        let analytic = delta_variance_paired(
            &PairedSample::new(yt.clone(), yc.clone()).unwrap(),
            &PairedSample::new(st.clone(), sc.clone()).unwrap(),
        )
        .unwrap()
        .sigma_delta;
        let boot = bootstrap_sd_paired((&yt, &yc), (&st, &sc), 2000, &mut rng);
        agree[1] += ((analytic / boot - 1.0).abs() <= 0.15) as usize;
    }
    let mut detail = format!(
        "within 15% of bootstrap: unpaired {}/20, paired {}/20",
        agree[0], agree[1]
    );
    let fast = within(start.elapsed(), Duration::from_secs(120), &mut detail);
    verdict(agree.iter().all(|&a| a >= 18) && fast, detail)
}

fn null_calibration() -> Verdict {
    // One invalid candidate per replicate, margin at the boundary Û_Y − ½.
    let test = TestConfig::default();
    let raw: Vec<f64> = (0..1000u64)
        .map(|r| {
            let sim = generate(&DgpConfig::new(
                Dgp::Normal,
                Scenario::NoneValid,
                50,
                1,
                0.9,
                10_000 + r,
            ))
            .unwrap();
            let y = sim.dataset.response();
            let u_y = y.u_statistic();
            let eps = (u_y.value - 0.5).max(0.0);
            let cfg = test.with_epsilon(EpsilonMode::Fixed(eps)).unwrap();
            let s = &sim.dataset.candidates()[0].values;
            test_with_margin(y, &u_y, s, eps, &cfg).unwrap().p_overall
        })
        .collect();
    let ks = ks_uniform(&raw);
    let crit = ks_critical_1pct(raw.len());
    let rate = raw.iter().filter(|&&p| p < 0.05).count() as f64 / raw.len() as f64;
    verdict(
        ks < crit && (0.035..=0.065).contains(&rate),
        format!("KS {ks:.4} (1% critical {crit:.4}), rejection rate {rate:.3}"),
    )
}

fn fpr_by_n() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [30, 50, 100] {
        let exp = ScreeningExperiment {
            dgp: DgpConfig::new(
                Dgp::Normal,
                Scenario::NoneValid,
                n,
                100,
                0.9,
                400 + n as u64,
            ),
            test: TestConfig::default(),
            margin: MarginRule::Boundary,
            corrections: vec![Correction::None],
            n_sim: 200,
        };
        let fpr = run_screening_experiment(&exp)
            .unwrap()
            .fpr(Correction::None)
            .mean;
        ok &= (0.03..=0.07).contains(&fpr);
        parts.push(format!("n={n}: {fpr:.4}"));
    }
    let mut detail = format!("mean FPR {}", parts.join(", "));
    let fast = within(start.elapsed(), Duration::from_secs(300), &mut detail);
    verdict(ok && fast, detail)
}

fn power_and_fdp() -> Verdict {
    let sweep = [0.6, 0.7, 0.8, 0.9, 0.95];
    let mut power = Vec::new();
    let mut fdp_at_09 = f64::NAN;
    for (i, &u_s) in sweep.iter().enumerate() {
        let exp = ScreeningExperiment {
            dgp: DgpConfig::new(
                Dgp::Normal,
                Scenario::TenPercentValid,
                100,
                500,
                u_s,
                500 + i as u64,
            ),
            test: TestConfig::default(),
            margin: MarginRule::Boundary,
            corrections: vec![Correction::None, Correction::BenjaminiHochberg],
            n_sim: 200,
        };
        let out = run_screening_experiment(&exp).unwrap();
        power.push(out.power(Correction::None).mean);
        if u_s == 0.9 {
            fdp_at_09 = out.fdp(Correction::BenjaminiHochberg).mean;
        }
    }
    let monotone = power.windows(2).all(|w| w[1] >= w[0]);
    let top = *power.last().unwrap();
    verdict(
        monotone && top >= 0.95 && fdp_at_09 <= 0.05,
        format!(
            "power {:?} (monotone: {monotone}), BH FDP at 0.9: {fdp_at_09:.4}",
            power
                .iter()
                .map(|p| (p * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        ),
    )
}

fn evaluation_stage() -> Verdict {
    let grid = vec![0.0, 0.2, 0.6, 1.0];
    let exp = EvaluationExperiment {
        dgp: Dgp::Normal,
        n_treated: 50,
        n_control: 50,
        valid_u_s: 0.9,
        set_size: 20,
        rho_grid: grid.clone(),
        sigma_corr: 0.0,
        n_sim: 200,
        test: TestConfig::new(0.05, 0.8, EpsilonMode::Adaptive, TestMode::NonInferiority).unwrap(),
        seed: 600,
    };
    let records = run_evaluation_experiment(&exp).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for &rho in &grid {
        let rate = rejection_rate(&records, rho);
        ok &= if rho <= 0.2 {
            rate >= 0.95
        } else {
            rate <= 0.05
        };
        parts.push(format!("rho={rho}: {rate:.3}"));
    }
    verdict(ok, format!("rejection fraction {}", parts.join(", ")))
}

fn tost_duality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counterexamples = 0;
    let u = |v: f64| UEstimate {
        value: v,
        design: Design::Unpaired,
        tie_fraction: 0.0,
    };
    for _ in 0..10_000 {
        let delta: f64 = rng.random_range(-0.6..0.6);
        let sigma: f64 = rng.random_range(1e-4..0.3);
        let eps: f64 = rng.random_range(0.0..0.5);
        let alpha: f64 = rng.random_range(0.001..0.2);
        let cfg = TestConfig::new(alpha, 0.9, EpsilonMode::Fixed(eps), TestMode::Tost).unwrap();
        let r = assemble(u(0.5 + delta / 2.0), u(0.5 - delta / 2.0), sigma, eps, &cfg);
        let inside = r.ci_lower > -eps && r.ci_upper < eps;
        counterexamples += (r.rejects(alpha) != inside) as usize;
    }
    verdict(
        counterexamples == 0,
        format!("{counterexamples} counterexamples in 10000 tuples"),
    )
}

fn correction_references() -> Verdict {
    let worked = [0.01, 0.02, 0.03, 0.04];
    let mut worst = 0.0f64;
    let mut check = |raw: &[f64]| {
        for (method, reference) in [
            (Correction::Bonferroni, reference_bonferroni(raw)),
            (Correction::BenjaminiHochberg, reference_bh(raw)),
            (Correction::BenjaminiYekutieli, reference_by(raw)),
        ] {
            let got = adjust(raw, method).unwrap().adjusted;
            for (a, b) in got.iter().zip(&reference) {
                worst = worst.max((a - b).abs());
            }
        }
    };
    check(&worked);
    let hand = [
        adjust(&worked, Correction::Bonferroni).unwrap().adjusted == [0.04, 0.08, 0.12, 0.16],
        adjust(&worked, Correction::BenjaminiHochberg)
            .unwrap()
            .adjusted
            .iter()
            .all(|q| (q - 0.04).abs() < 1e-15),
        adjust(&worked, Correction::BenjaminiYekutieli)
            .unwrap()
            .adjusted
            .iter()
            .all(|q| (q - 0.04 * 25.0 / 12.0).abs() < 1e-15),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let m = rng.random_range(1..=50);
        let raw: Vec<f64> = (0..m)
            .map(|_| match rng.random_range(0..3) {
                0 => rng.random_range(0.0..0.01),
                1 => 0.04,
                _ => rng.random_range(0.0..=1.0),
            })
            .collect();
        check(&raw);
    }
    verdict(
        worst <= 1e-15 && hand.iter().all(|&h| h),
        format!("worked example by hand: {hand:?}; max deviation over 100 vectors {worst:e}"),
    )
}

fn sampler_fidelity() -> Verdict {
    let sim = generate(&DgpConfig::new(
        Dgp::Normal,
        Scenario::NoneValid,
        1000,
        1,
        0.9,
        900,
    ))
    .unwrap();
    let u_y = sim.dataset.response().u_statistic().value;
    let target = normal_cdf(3.0 / 2f64.sqrt());
    let mut ok = (u_y - target).abs() <= 0.005;
    let mut detail = format!("U_Y {u_y:.5} vs {target:.5}");

    let mut rng = ChaCha8Rng::seed_from_u64(901);
    for dgp in [Dgp::Normal, Dgp::Complex] {
        for target in [0.6, 0.7, 0.8, 0.9, 0.95] {
            let sigma = calibrate_sigma_valid(dgp, target).unwrap();
            let est = mc_signal_u(dgp == Dgp::Complex, sigma, 1_000_000, &mut rng);
            if (est - target).abs() > 0.005 {
                ok = false;
                let _ = write!(detail, "; {dgp:?} at {target}: {est:.4}");
            }
        }
    }
    if ok {
        detail.push_str("; calibrated U_S within 0.005 at 0.6..0.95 for both generators");
    }
    verdict(ok, detail)
}

fn regression_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../regression/vaccine")
}

fn read_expected(path: &Path) -> Vec<HashMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            headers
                .iter()
                .zip(r.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn dataset_regressions() -> Verdict {
    let Some(data_dir) = std::env::var_os("RISE_REGRESSION_DATA").map(PathBuf::from) else {
        return Verdict::Skip("set RISE_REGRESSION_DATA to the vaccine data directory".into());
    };
    let dir = regression_dir();
    let conf = ConfigFile::read(&dir.join("rise.conf")).unwrap();
    let get = |k: &str| conf.raw(k).unwrap().to_string();

    let mut spec = IngestSpec::new(data_dir.join("response.csv"), Design::Paired);
    spec.candidates_path = Some(data_dir.join("candidates.csv"));
    spec.columns.subject = get("subject_column");
    spec.columns.group = get("group_column");
    spec.columns.post_label = get("post_label");
    spec.columns.pre_label = get("pre_label");
    spec.columns.response = Some(get("response_column"));
    let data = match ingest(&spec) {
        Ok(d) => d,
        Err(e) => return Verdict::Fail(format!("cannot read the data: {e}")),
    };

    let alpha: f64 = conf.get("alpha").unwrap().unwrap();
    let power: f64 = conf.get("power").unwrap().unwrap();
    let ratio: f64 = conf.get("split_ratio").unwrap().unwrap();
    let seed: u64 = conf.get("seed").unwrap().unwrap();
    let cfg = TestConfig::new(alpha, power, EpsilonMode::Adaptive, TestMode::Tost).unwrap();
    let result = match run_rise_with(&data, ratio, seed, &cfg, &cfg, Correction::Bonferroni) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("pipeline failed: {e}")),
    };
    let ev = &result.evaluation;
    let rho = rank_scatter(
        &result.evaluation_response,
        &result.gamma,
        &result.evaluation_subjects,
    )
    .spearman;
    let observed: HashMap<&str, f64> = HashMap::from([
        ("screening_subjects", result.screening_subjects.len() as f64),
        (
            "evaluation_subjects",
            result.evaluation_subjects.len() as f64,
        ),
        ("candidates", result.screening.rows.len() as f64),
        ("screening_u_y", result.screening.u_y.value),
        ("screening_epsilon", result.screening.epsilon_used),
        ("selected", result.screening.selected.len() as f64),
        ("evaluation_u_y", ev.u_y.value),
        ("evaluation_epsilon", ev.epsilon),
        ("evaluation_delta", ev.delta),
        ("evaluation_sigma", ev.sigma_delta),
        ("evaluation_ci_lower", ev.ci_lower),
        ("evaluation_ci_upper", ev.ci_upper),
        ("evaluation_p_value", ev.p_overall),
        ("spearman_rho", rho),
    ]);
    let mut misses = Vec::new();
    for row in read_expected(&dir.join("expected_summary.csv")) {
        let key = row["key"].as_str();
        let want: f64 = row["expected"].parse().unwrap();
        let tol: f64 = row["tolerance"].parse().unwrap();
        let got = observed[key];
        if (got - want).abs() > tol {
            misses.push(format!("{key} {got:.4} vs {want}"));
        }
    }

    let (screen_data, _) = split(&data, ratio, seed).unwrap();
    for row in read_expected(&dir.join("expected_sensitivity.csv")) {
        let eps: f64 = row["epsilon"].parse().unwrap();
        let want: usize = row["selected"].parse().unwrap();
        let fixed = cfg.with_epsilon(EpsilonMode::Fixed(eps)).unwrap();
        let got = screen(&screen_data, &fixed, Correction::Bonferroni)
            .unwrap()
            .selected
            .len();
        if got != want {
            misses.push(format!("selected at epsilon {eps}: {got} vs {want}"));
        }
    }

    for row in read_expected(&dir.join("expected_screening_top.csv")) {
        let name = row["name"].as_str();
        let Some(r) = result.screening.row(name) else {
            misses.push(format!("{name} missing"));
            continue;
        };
        let want: f64 = row["delta"].parse().unwrap();
        if (r.test.delta - want).abs() > 0.0005 {
            misses.push(format!("{name} delta {:.4} vs {want}", r.test.delta));
        }
    }

    verdict(
        misses.is_empty(),
        if misses.is_empty() {
            "all expected values reproduced".into()
        } else {
            misses.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("U-statistic oracle equivalence", u_oracle),
        ("variance oracle", variance_oracle),
        ("null calibration", null_calibration),
        ("FPR against n", fpr_by_n),
        ("power and FDP curves", power_and_fdp),
        ("evaluation-stage behaviour", evaluation_stage),
        ("TOST/CI duality", tost_duality),
        ("correction references", correction_references),
        ("sampler fidelity", sampler_fidelity),
        ("dataset regressions", dataset_regressions),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
