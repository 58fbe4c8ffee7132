mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind as ClapErrorKind;
use clap::Parser;

use rise::io::report::{self, ReportTable};
use rise::io::{self as rio, ConfigFile, IngestSpec};
use rise::pipeline::{self, Dataset};
use rise::simgen::{
    self, Dgp, DgpConfig, EvaluationExperiment, MarginRule, Scenario, ScreeningExperiment,
};
use rise::surrogate::{self, EpsilonMode, TestConfig, TestMode};
use rise::{Correction, Design, Error, ErrorKind, Result};

use args::*;

const CONFIG_KEYS: &[&str] = &[
    "alpha",
    "power",
    "epsilon",
    "mode",
    "correction",
    "split_ratio",
    "seed",
    "top_k",
    "design",
    "response",
    "candidates",
    "response_column",
    "subject_column",
    "group_column",
    "treated_label",
    "control_label",
    "post_label",
    "pre_label",
    "delimiter",
];

const DEFAULT_SEED: u64 = 1;
const DEFAULT_SPLIT_RATIO: f64 = 0.75;
const DEFAULT_TOP_K: usize = 10;
const DISPLAY_DIGITS: usize = 4;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            })
        }
    }
}

/// Flag values layered over an optional settings file.
struct Settings {
    file: Option<ConfigFile>,
    base: PathBuf,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Settings> {
        let file = path.map(ConfigFile::read).transpose()?;
        if let Some(f) = &file {
            f.reject_unknown(CONFIG_KEYS)?;
        }
        let base = path
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(Settings { file, base })
    }

    fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match &self.file {
            Some(f) => f.get(key),
            None => Ok(None),
        }
    }

    fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Paths from the settings file are relative to the file itself.
    fn path(&self, flag: Option<PathBuf>, key: &str) -> Result<Option<PathBuf>> {
        match flag {
            Some(p) => Ok(Some(p)),
            None => Ok(self.get::<PathBuf>(key)?.map(|p| self.base.join(p))),
        }
    }

    fn test_config(&self, args: &TestArgs, default_power: f64) -> Result<TestConfig> {
        let alpha = self.pick(args.alpha, "alpha")?.unwrap_or(0.05);
        let (epsilon, power) = match (args.epsilon, args.power) {
            // Power still matters when evaluation switches to an adaptive margin.
            (Some(e), _) => (Some(e), self.get("power")?),
            (None, Some(p)) => (None, Some(p)),
            (None, None) => {
                let e: Option<f64> = self.get("epsilon")?;
                let p: Option<f64> = self.get("power")?;
                if e.is_some() && p.is_some() {
                    return Err(Error::Configuration(
                        "settings give both epsilon and power; a fixed margin ignores power".into(),
                    ));
                }
                (e, p)
            }
        };
        let mode = match args.mode {
            Some(ModeArg::Noninf) => TestMode::NonInferiority,
            Some(ModeArg::Tost) => TestMode::Tost,
            None => self.get("mode")?.unwrap_or(TestMode::NonInferiority),
        };
        let margin = match epsilon {
            Some(e) => EpsilonMode::Fixed(e),
            None => EpsilonMode::Adaptive,
        };
        TestConfig::new(alpha, power.unwrap_or(default_power), margin, mode)
    }

    fn correction(&self, flag: Option<CorrectionArg>) -> Result<Correction> {
        Ok(match flag {
            Some(c) => correction(c),
            None => self.get("correction")?.unwrap_or(Correction::Bonferroni),
        })
    }

    fn split(&self, args: &SplitArgs) -> Result<(f64, u64)> {
        Ok((
            self.pick(args.split_ratio, "split_ratio")?
                .unwrap_or(DEFAULT_SPLIT_RATIO),
            self.pick(args.seed, "seed")?.unwrap_or(DEFAULT_SEED),
        ))
    }

    fn dataset(&self, args: &DataArgs) -> Result<Dataset> {
        let response = self
            .path(args.response.clone(), "response")?
            .ok_or_else(|| {
                Error::Configuration(
                    "no input given (--response or `response` in the settings file)".into(),
                )
            })?;
        let design = match args.design {
            Some(DesignArg::Unpaired) => Design::Unpaired,
            Some(DesignArg::Paired) => Design::Paired,
            None => self.get("design")?.unwrap_or(Design::Unpaired),
        };
        let mut spec = IngestSpec::new(response, design);
        spec.candidates_path = self.path(args.candidates.clone(), "candidates")?;
        let c = &mut spec.columns;
        c.response = self.pick(args.response_column.clone(), "response_column")?;
        if let Some(v) = self.pick(args.subject_column.clone(), "subject_column")? {
            c.subject = v;
        }
        if let Some(v) = self.pick(args.group_column.clone(), "group_column")? {
            c.group = v;
        }
        if let Some(v) = self.pick(args.treated_label.clone(), "treated_label")? {
            c.treated_label = v;
        }
        if let Some(v) = self.pick(args.control_label.clone(), "control_label")? {
            c.control_label = v;
        }
        if let Some(v) = self.pick(args.post_label.clone(), "post_label")? {
            c.post_label = v;
        }
        if let Some(v) = self.pick(args.pre_label.clone(), "pre_label")? {
            c.pre_label = v;
        }
        spec.delimiter = match args.delimiter {
            Some(DelimiterArg::Comma) => Some(b','),
            Some(DelimiterArg::Tab) => Some(b'\t'),
            None => match self.get::<String>("delimiter")?.as_deref() {
                None => None,
                Some("comma" | ",") => Some(b','),
                Some("tab" | "\\t") => Some(b'\t'),
                Some(other) => {
                    return Err(Error::Configuration(format!("unknown delimiter '{other}'")))
                }
            },
        };
        rio::ingest(&spec)
    }
}

fn correction(c: CorrectionArg) -> Correction {
    match c {
        CorrectionArg::None => Correction::None,
        CorrectionArg::Bonferroni => Correction::Bonferroni,
        CorrectionArg::Bh => Correction::BenjaminiHochberg,
        CorrectionArg::By => Correction::BenjaminiYekutieli,
    }
}

/// Writes full-precision tables under `--out` when given.
struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn new(dir: Option<PathBuf>) -> Result<Output> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Output { dir })
    }

    fn emit(&self, name: &str, table: &ReportTable) -> Result<()> {
        if let Some(dir) = &self.dir {
            let file = fs::File::create(dir.join(format!("{name}.csv")))?;
            table.write(std::io::BufWriter::new(file), b',')?;
        }
        Ok(())
    }
}

fn key_value_table(rows: &[(&str, String)]) -> ReportTable {
    let mut t = ReportTable::new(&["key", "value"]);
    t.rows = rows
        .iter()
        .map(|(k, v)| vec![k.to_string(), v.clone()])
        .collect();
    t
}

fn head(table: &ReportTable, rows: usize) -> ReportTable {
    ReportTable {
        headers: table.headers.clone(),
        rows: table.rows.iter().take(rows).cloned().collect(),
    }
}

fn run(cli: Cli) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    let out = Output::new(cli.out)?;
    match cli.command {
        Command::Test {
            data,
            test,
            candidate,
        } => {
            let cfg = settings.test_config(&test, 0.9)?;
            let ds = settings.dataset(&data)?;
            let cand = match candidate {
                Some(name) => ds
                    .candidate(&name)
                    .ok_or_else(|| Error::InvalidInput(format!("no candidate named '{name}'")))?,
                None if ds.candidates().len() == 1 => &ds.candidates()[0],
                None => {
                    return Err(Error::Configuration(format!(
                        "{} candidates in the input; choose one with --candidate",
                        ds.candidates().len()
                    )))
                }
            };
            let r = surrogate::test_single(ds.response(), &cand.values, &cfg)?;
            let table = report::evaluation_table(&[(cand.name.clone(), r)]);
            out.emit("test", &table)?;
            print!("{}", table.render(DISPLAY_DIGITS));
        }
        Command::Screen {
            data,
            test,
            correction,
        } => {
            let cfg = settings.test_config(&test, 0.9)?;
            let method = settings.correction(correction)?;
            let ds = settings.dataset(&data)?;
            let rep = pipeline::screen(&ds, &cfg, method)?;
            let table = report::screening_table(&rep);
            out.emit("screening", &table)?;
            out.emit("selected", &report::selected_table(&rep))?;
            out.emit("volcano", &report::volcano_table(&rep))?;
            println!(
                "screened {} candidates: u_y = {}, epsilon = {}, {} selected ({})",
                rep.rows.len(),
                report::format_sig(rep.u_y.value, DISPLAY_DIGITS),
                report::format_sig(rep.epsilon_used, DISPLAY_DIGITS),
                rep.selected.len(),
                method.as_str()
            );
            print!("{}", head(&table, 20).render(DISPLAY_DIGITS));
        }
        Command::Evaluate {
            data,
            test,
            weights,
        } => {
            let cfg = settings.test_config(&test, 0.9)?;
            let ds = settings.dataset(&data)?;
            let (names, w) = rio::read_weights(&weights)?;
            let (combined, gamma) = pipeline::build_gamma(&ds, &names, &w)?;
            let r = pipeline::evaluate(&ds, &gamma, &cfg)?;
            let table = report::evaluation_table(&[("gamma".to_string(), r)]);
            out.emit("evaluation", &table)?;
            out.emit("weights", &report::weights_table(&combined))?;
            print!("{}", table.render(DISPLAY_DIGITS));
        }
        Command::Rise {
            data,
            test,
            split,
            correction,
            top_k,
        } => rise(&settings, &out, &data, &test, &split, correction, top_k)?,
        Command::Simulate(args) => simulate(&settings, &out, &args)?,
        Command::Report {
            data,
            split,
            weights,
            whole,
        } => {
            let (ratio, seed) = settings.split(&split)?;
            let ds = settings.dataset(&data)?;
            let target = if whole {
                ds
            } else {
                pipeline::split(&ds, ratio, seed)?.1
            };
            let (names, w) = rio::read_weights(&weights)?;
            let (_, gamma) = pipeline::build_gamma(&target, &names, &w)?;
            let scatter = report::rank_scatter(target.response(), &gamma, target.subject_ids());
            out.emit("rank_scatter", &scatter.table)?;
            let summary = key_value_table(&[
                ("spearman_rho", scatter.spearman.to_string()),
                ("observations", scatter.table.rows.len().to_string()),
            ]);
            out.emit("rank_summary", &summary)?;
            print!("{}", summary.render(DISPLAY_DIGITS));
        }
    }
    Ok(())
}

fn rise(
    settings: &Settings,
    out: &Output,
    data: &DataArgs,
    test: &TestArgs,
    split: &SplitArgs,
    correction: Option<CorrectionArg>,
    top_k: Option<usize>,
) -> Result<()> {
    let screening_cfg = settings.test_config(test, 0.9)?;
    // A fixed margin applies to screening; evaluation keeps the adaptive one.
    let evaluation_cfg = screening_cfg.with_epsilon(EpsilonMode::Adaptive)?;
    let method = settings.correction(correction)?;
    let (ratio, seed) = settings.split(split)?;
    let top_k = settings.pick(top_k, "top_k")?.unwrap_or(DEFAULT_TOP_K);
    let ds = settings.dataset(data)?;

    let result =
        match pipeline::run_rise_with(&ds, ratio, seed, &screening_cfg, &evaluation_cfg, method) {
            Ok(r) => r,
            Err(e) => {
                if matches!(e.root(), Error::NoSurrogateSelected) {
                    let (screen_data, _) = pipeline::split(&ds, ratio, seed)?;
                    let rep = pipeline::screen(&screen_data, &screening_cfg, method)?;
                    out.emit("screening", &report::screening_table(&rep))?;
                    out.emit("selected", &report::selected_table(&rep))?;
                    out.emit("volcano", &report::volcano_table(&rep))?;
                }
                return Err(e);
            }
        };
    let rep = &result.screening;
    let screening = report::screening_table(rep);
    out.emit("screening", &screening)?;
    out.emit("selected", &report::selected_table(rep))?;
    out.emit("weights", &report::weights_table(&result.combined))?;
    out.emit("volcano", &report::volcano_table(rep))?;

    let (_, eval_data) = pipeline::split(&ds, ratio, seed)?;
    let mut rows = vec![("gamma".to_string(), result.evaluation)];
    for name in rep.selected.iter().take(top_k) {
        let cand = eval_data
            .candidate(name)
            .expect("selected from the same dataset");
        rows.push((
            name.clone(),
            surrogate::test_single(eval_data.response(), &cand.values, &evaluation_cfg)?,
        ));
    }
    let evaluation = report::evaluation_table(&rows);
    out.emit("evaluation", &evaluation)?;

    let scatter = report::rank_scatter(
        &result.evaluation_response,
        &result.gamma,
        &result.evaluation_subjects,
    );
    out.emit("rank_scatter", &scatter.table)?;

    let mut split_table = ReportTable::new(&["subject", "stage"]);
    for (ids, stage) in [
        (&result.screening_subjects, "screening"),
        (&result.evaluation_subjects, "evaluation"),
    ] {
        split_table
            .rows
            .extend(ids.iter().map(|s| vec![s.clone(), stage.to_string()]));
    }
    out.emit("split", &split_table)?;

    let ev = &result.evaluation;
    let summary = key_value_table(&[
        ("design", ds.design().as_str().to_string()),
        ("split_ratio", ratio.to_string()),
        ("seed", seed.to_string()),
        (
            "screening_subjects",
            result.screening_subjects.len().to_string(),
        ),
        (
            "evaluation_subjects",
            result.evaluation_subjects.len().to_string(),
        ),
        ("candidates", rep.rows.len().to_string()),
        ("correction", method.as_str().to_string()),
        ("screening_u_y", rep.u_y.value.to_string()),
        ("screening_epsilon", rep.epsilon_used.to_string()),
        ("selected", rep.selected.len().to_string()),
        ("evaluation_u_y", ev.u_y.value.to_string()),
        ("evaluation_u_gamma", ev.u_s.value.to_string()),
        ("evaluation_delta", ev.delta.to_string()),
        ("evaluation_sigma", ev.sigma_delta.to_string()),
        ("evaluation_ci_lower", ev.ci_lower.to_string()),
        ("evaluation_ci_upper", ev.ci_upper.to_string()),
        ("evaluation_epsilon", ev.epsilon.to_string()),
        ("evaluation_p_value", ev.p_overall.to_string()),
        ("spearman_rho", scatter.spearman.to_string()),
    ]);
    out.emit("summary", &summary)?;
    print!("{}", summary.render(DISPLAY_DIGITS));
    Ok(())
}

fn simulate(settings: &Settings, out: &Output, args: &SimulateArgs) -> Result<()> {
    let dgp = match args.dgp {
        DgpArg::Normal => Dgp::Normal,
        DgpArg::Complex => Dgp::Complex,
    };
    let seed = settings.pick(args.seed, "seed")?.unwrap_or(DEFAULT_SEED);
    match args.experiment {
        ExperimentArg::Screening => {
            let scenario = match args.scenario {
                ScenarioArg::NoneValid => Scenario::NoneValid,
                ScenarioArg::TenPctValid => Scenario::TenPercentValid,
            };
            let mut cfg = DgpConfig::new(dgp, scenario, args.n, args.p, args.u_s, seed);
            cfg.sigma_corr = args.sigma_corr;
            let exp = ScreeningExperiment {
                dgp: cfg,
                test: settings.test_config(&args.test, 0.9)?,
                margin: match args.margin {
                    MarginArg::Boundary => MarginRule::Boundary,
                    MarginArg::Test => MarginRule::FromConfig,
                },
                corrections: args.corrections.iter().map(|&c| correction(c)).collect(),
                n_sim: args.n_sim,
            };
            let outcome = simgen::run_screening_experiment(&exp)?;
            let labels = report::SimulationLabels {
                dgp: dgp.as_str().into(),
                scenario: scenario.as_str().into(),
                n: args.n,
                p: args.p,
                target_u_s: args.u_s,
                sigma_corr: args.sigma_corr,
                margin: match exp.margin {
                    MarginRule::Boundary => "boundary".into(),
                    MarginRule::FromConfig => "test".into(),
                },
            };
            out.emit(
                "simulation_replicates",
                &report::screening_replicates_table(&labels, &outcome),
            )?;
            let summary = report::screening_summary_table(&labels, &outcome);
            out.emit("simulation_summary", &summary)?;
            let brief = ReportTable {
                headers: ["correction", "metric", "mean", "q05", "median", "q95"]
                    .map(String::from)
                    .to_vec(),
                rows: summary
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            r[7].clone(),
                            r[8].clone(),
                            r[9].clone(),
                            r[11].clone(),
                            r[13].clone(),
                            r[15].clone(),
                        ]
                    })
                    .collect(),
            };
            print!("{}", brief.render(DISPLAY_DIGITS));
        }
        ExperimentArg::Evaluation => {
            let exp = EvaluationExperiment {
                dgp,
                n_treated: args.n,
                n_control: args.n,
                valid_u_s: args.u_s,
                set_size: args.set_size,
                rho_grid: args.rho.clone(),
                sigma_corr: args.sigma_corr,
                n_sim: args.n_sim,
                test: settings.test_config(&args.test, 0.8)?,
                seed,
            };
            let records = simgen::run_evaluation_experiment(&exp)?;
            out.emit(
                "evaluation_replicates",
                &report::evaluation_records_table(dgp.as_str(), &records),
            )?;
            let summary = report::rejection_table(&exp.rho_grid, &records);
            out.emit("evaluation_summary", &summary)?;
            print!("{}", summary.render(DISPLAY_DIGITS));
        }
    }
    Ok(())
}
