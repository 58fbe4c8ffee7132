//! Output tables.
//!
//! Every builder returns a [`ReportTable`] whose numeric cells hold the
//! shortest string that round-trips the f64 exactly. [`ReportTable::render`]
//! is the only place where digits are dropped.

use std::io::Write;

use crate::error::Result;
use crate::pipeline::{CombinedSurrogate, ScreeningReport};
use crate::rankstats::{Design, Variable};
use crate::simgen::{EvaluationRecord, ScreeningOutcome};
use crate::surrogate::SurrogateTestResult;

use super::ingest::csv_write_error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReportTable {
    pub fn new(headers: &[&str]) -> Self {
        ReportTable {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(out);
        w.write_record(&self.headers).map_err(csv_write_error)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_write_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_delimited(&self, delimiter: u8) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, delimiter).expect("writing to memory");
        String::from_utf8(buf).expect("cells are UTF-8")
    }

    /// Aligned plain-text rendering with numbers cut to `digits`
    /// significant digits.
    pub fn render(&self, digits: usize) -> String {
        let cells: Vec<Vec<String>> = std::iter::once(self.headers.clone())
            .chain(self.rows.iter().map(|r| {
                r.iter()
                    .map(|c| match c.parse::<f64>() {
                        Ok(x) if !c.is_empty() && !is_integer_literal(c) => format_sig(x, digits),
                        _ => c.clone(),
                    })
                    .collect()
            }))
            .collect();
        let ncol = self.headers.len();
        let widths: Vec<usize> = (0..ncol)
            .map(|j| {
                cells
                    .iter()
                    .map(|r| r.get(j).map_or(0, |c| c.chars().count()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(j, c)| format!("{c:>w$}", w = widths[j]))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn is_integer_literal(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

/// `x` to `digits` significant digits: fixed notation for magnitudes in
/// [1e-3, 1e6), scientific otherwise.
pub fn format_sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-3..6).contains(&mag) {
        let decimals = (digits as i32 - 1 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.*e}", digits - 1)
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

/// One row per candidate, ordered as screened: name, delta, ci_lower,
/// ci_upper, sigma, raw_p, adjusted_p, selected.
pub fn screening_table(report: &ScreeningReport) -> ReportTable {
    let mut t = ReportTable::new(&[
        "name",
        "delta",
        "ci_lower",
        "ci_upper",
        "sigma",
        "raw_p",
        "adjusted_p",
        "selected",
    ]);
    for r in &report.rows {
        t.rows.push(vec![
            r.name.clone(),
            num(r.test.delta),
            num(r.test.ci_lower),
            num(r.test.ci_upper),
            num(r.test.sigma_delta),
            num(r.raw_p),
            num(r.adjusted_p),
            (r.adjusted_p < report.alpha).to_string(),
        ]);
    }
    t
}

pub fn selected_table(report: &ScreeningReport) -> ReportTable {
    let mut t = ReportTable::new(&["name"]);
    t.rows = report.selected.iter().map(|n| vec![n.clone()]).collect();
    t
}

/// Member weights with the moments used to standardize each member.
pub fn weights_table(combined: &CombinedSurrogate) -> ReportTable {
    let mut t = ReportTable::new(&["name", "weight", "mean", "sd"]);
    for ((name, w), s) in combined
        .members
        .iter()
        .zip(&combined.weights)
        .zip(&combined.standardization)
    {
        t.rows
            .push(vec![name.clone(), num(*w), num(s.mean), num(s.sd)]);
    }
    t
}

/// Evaluation metrics, one row per marker.
pub fn evaluation_table(rows: &[(String, SurrogateTestResult)]) -> ReportTable {
    let mut t = ReportTable::new(&[
        "marker", "u_y", "u_s", "delta", "sigma", "ci_lower", "ci_upper", "epsilon", "p_noninf",
        "p_lower", "p_value",
    ]);
    for (name, r) in rows {
        t.rows.push(vec![
            name.clone(),
            num(r.u_y.value),
            num(r.u_s.value),
            num(r.delta),
            num(r.sigma_delta),
            num(r.ci_lower),
            num(r.ci_upper),
            num(r.epsilon),
            num(r.p_noninf),
            r.p_lower.map_or_else(|| "NA".to_string(), num),
            num(r.p_overall),
        ]);
    }
    t
}

/// δ̂ against −log10 of the adjusted p-value; p = 0 gives `inf`.
pub fn volcano_table(report: &ScreeningReport) -> ReportTable {
    let mut t = ReportTable::new(&["name", "delta", "neg_log10_adjusted_p", "selected"]);
    for r in &report.rows {
        t.rows.push(vec![
            r.name.clone(),
            num(r.test.delta),
            num(-r.adjusted_p.log10() + 0.0),
            (r.adjusted_p < report.alpha).to_string(),
        ]);
    }
    t
}

/// Midranks (1-based; ties share their average rank).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation on midranks; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    pearson(&midranks(x), &midranks(y))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankScatter {
    pub table: ReportTable,
    pub spearman: f64,
}

/// Response rank against γ rank over every observation (both arms, or
/// both timepoints).
pub fn rank_scatter(response: &Variable, gamma: &Variable, subject_ids: &[String]) -> RankScatter {
    let y: Vec<f64> = response.observations().collect();
    let g: Vec<f64> = gamma.observations().collect();
    let (ry, rg) = (midranks(&y), midranks(&g));
    let (n_first, _) = response.shape();
    let (first, second) = match response.design() {
        Design::Unpaired => ("treated", "control"),
        Design::Paired => ("post", "pre"),
    };
    let mut table = ReportTable::new(&[
        "subject",
        "group",
        "response",
        "gamma",
        "response_rank",
        "gamma_rank",
    ]);
    for i in 0..y.len() {
        let subject = match response.design() {
            Design::Unpaired => &subject_ids[i],
            Design::Paired => &subject_ids[i % n_first],
        };
        table.rows.push(vec![
            subject.clone(),
            (if i < n_first { first } else { second }).to_string(),
            num(y[i]),
            num(g[i]),
            num(ry[i]),
            num(rg[i]),
        ]);
    }
    RankScatter {
        table,
        spearman: pearson(&ry, &rg),
    }
}

/// Simulation settings echoed into every row of a long table.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLabels {
    pub dgp: String,
    pub scenario: String,
    pub n: usize,
    pub p: usize,
    pub target_u_s: f64,
    pub sigma_corr: f64,
    pub margin: String,
}

/// One row per replicate and correction.
pub fn screening_replicates_table(
    labels: &SimulationLabels,
    outcome: &ScreeningOutcome,
) -> ReportTable {
    let mut t = ReportTable::new(&[
        "dgp",
        "scenario",
        "n",
        "p",
        "target_u_s",
        "sigma_corr",
        "margin",
        "replicate",
        "correction",
        "u_y",
        "epsilon",
        "tp",
        "fp",
        "tn",
        "fn",
        "fpr",
        "fdp",
        "power",
    ]);
    for r in &outcome.replicates {
        for (method, m) in &r.metrics {
            t.rows.push(vec![
                labels.dgp.clone(),
                labels.scenario.clone(),
                labels.n.to_string(),
                labels.p.to_string(),
                num(labels.target_u_s),
                num(labels.sigma_corr),
                labels.margin.clone(),
                r.replicate.to_string(),
                method.as_str().to_string(),
                num(r.u_y),
                num(r.epsilon),
                m.true_pos.to_string(),
                m.false_pos.to_string(),
                m.true_neg.to_string(),
                m.false_neg.to_string(),
                num(m.fpr),
                num(m.fdp),
                num(m.power),
            ]);
        }
    }
    t
}

/// Mean and quantiles of FPR, FDP and power per correction.
pub fn screening_summary_table(
    labels: &SimulationLabels,
    outcome: &ScreeningOutcome,
) -> ReportTable {
    let mut t = ReportTable::new(&[
        "dgp",
        "scenario",
        "n",
        "p",
        "target_u_s",
        "sigma_corr",
        "margin",
        "correction",
        "metric",
        "mean",
        "sd",
        "q05",
        "q25",
        "median",
        "q75",
        "q95",
    ]);
    let Some(first) = outcome.replicates.first() else {
        return t;
    };
    for (method, _) in &first.metrics {
        for (metric, s) in [
            ("fpr", outcome.fpr(*method)),
            ("fdp", outcome.fdp(*method)),
            ("power", outcome.power(*method)),
        ] {
            t.rows.push(vec![
                labels.dgp.clone(),
                labels.scenario.clone(),
                labels.n.to_string(),
                labels.p.to_string(),
                num(labels.target_u_s),
                num(labels.sigma_corr),
                labels.margin.clone(),
                method.as_str().to_string(),
                metric.to_string(),
                num(s.mean),
                num(s.sd),
                num(s.q05),
                num(s.q25),
                num(s.median),
                num(s.q75),
                num(s.q95),
            ]);
        }
    }
    t
}

pub fn evaluation_records_table(dgp: &str, records: &[EvaluationRecord]) -> ReportTable {
    let mut t = ReportTable::new(&[
        "dgp",
        "rho",
        "n_invalid",
        "replicate",
        "u_y",
        "u_gamma",
        "delta",
        "sigma",
        "epsilon",
        "p_value",
        "rejected",
    ]);
    for r in records {
        t.rows.push(vec![
            dgp.to_string(),
            num(r.rho),
            r.n_invalid.to_string(),
            r.replicate.to_string(),
            num(r.u_y),
            num(r.u_gamma),
            num(r.delta),
            num(r.sigma_delta),
            num(r.epsilon),
            num(r.p_value),
            r.rejected.to_string(),
        ]);
    }
    t
}

/// Rejection rate and mean estimates per invalid fraction.
pub fn rejection_table(rho_grid: &[f64], records: &[EvaluationRecord]) -> ReportTable {
    let mut t = ReportTable::new(&[
        "rho",
        "n_invalid",
        "replicates",
        "rejection_rate",
        "mean_u_gamma",
        "mean_delta",
        "mean_epsilon",
    ]);
    for &rho in rho_grid {
        let at: Vec<&EvaluationRecord> = records.iter().filter(|r| r.rho == rho).collect();
        if at.is_empty() {
            continue;
        }
        let n = at.len() as f64;
        let mean = |f: fn(&EvaluationRecord) -> f64| at.iter().map(|r| f(r)).sum::<f64>() / n;
        t.rows.push(vec![
            num(rho),
            at[0].n_invalid.to_string(),
            at.len().to_string(),
            num(at.iter().filter(|r| r.rejected).count() as f64 / n),
            num(mean(|r| r.u_gamma)),
            num(mean(|r| r.delta)),
            num(mean(|r| r.epsilon)),
        ]);
    }
    t
}
