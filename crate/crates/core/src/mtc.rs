//! Multiple-testing corrections for screening p-values.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Correction {
    /// Raw p-values, for operating-characteristic runs.
    None,
    Bonferroni,
    /// Benjamini-Hochberg step-up.
    BenjaminiHochberg,
    /// Benjamini-Yekutieli step-up under arbitrary dependence.
    BenjaminiYekutieli,
}

impl Correction {
    pub fn as_str(self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::Bonferroni => "bonferroni",
            Correction::BenjaminiHochberg => "bh",
            Correction::BenjaminiYekutieli => "by",
        }
    }
}

impl std::str::FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "raw" | "unadjusted" => Ok(Correction::None),
            "bonferroni" => Ok(Correction::Bonferroni),
            "bh" | "fdr" | "benjamini-hochberg" => Ok(Correction::BenjaminiHochberg),
            "by" | "benjamini-yekutieli" => Ok(Correction::BenjaminiYekutieli),
            other => Err(Error::Configuration(format!(
                "unknown correction '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedPValues {
    pub method: Correction,
    pub raw: Vec<f64>,
    /// Same order as `raw`.
    pub adjusted: Vec<f64>,
}

pub fn adjust(raw: &[f64], method: Correction) -> Result<AdjustedPValues> {
    if raw.is_empty() {
        return Err(Error::InvalidInput("no p-values to adjust".into()));
    }
    if let Some(i) = raw.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidInput(format!(
            "p-value {i} is outside [0, 1]: {}",
            raw[i]
        )));
    }
    let m = raw.len() as f64;
    let adjusted = match method {
        Correction::None => raw.to_vec(),
        Correction::Bonferroni => raw.iter().map(|&p| (m * p).min(1.0)).collect(),
        Correction::BenjaminiHochberg => step_up(raw, m),
        Correction::BenjaminiYekutieli => {
            let harmonic: f64 = (1..=raw.len()).map(|k| 1.0 / k as f64).sum();
            step_up(raw, m * harmonic)
        }
    };
    Ok(AdjustedPValues {
        method,
        raw: raw.to_vec(),
        adjusted,
    })
}

/// q₍ᵢ₎ = min over j ≥ i of min(1, scale · p₍ⱼ₎ / j) on the ascending order.
fn step_up(raw: &[f64], scale: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..raw.len()).collect();
    // Stable, so tied p-values keep input order.
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));

    let mut adjusted = vec![0.0; raw.len()];
    let mut running = 1.0f64;
    for (rank0, &idx) in order.iter().enumerate().rev() {
        let q = (scale * raw[idx] / (rank0 + 1) as f64).min(1.0);
        running = running.min(q);
        // Rounding in scale·p/rank can land an ulp below p.
        adjusted[idx] = running.max(raw[idx]);
    }
    adjusted
}
