//! Pairwise rank-comparison kernels and the Mann-Whitney style U estimators
//! for independent-arm and paired designs.

mod gaussian;

pub use gaussian::{erfc, normal_cdf, normal_quantile};

use crate::error::{Error, Result};

/// Sampling design of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Design {
    /// Independent treated and control arms.
    Unpaired,
    /// Two measurements on each unit (post/pre, or matched treated/control).
    Paired,
}

impl Design {
    pub fn as_str(self) -> &'static str {
        match self {
            Design::Unpaired => "unpaired",
            Design::Paired => "paired",
        }
    }
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unpaired" | "independent" => Ok(Design::Unpaired),
            "paired" => Ok(Design::Paired),
            other => Err(Error::Configuration(format!("unknown design '{other}'"))),
        }
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!(
            "{what}[{i}] is not finite ({})",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Treated and control observations of one variable from two independent arms.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoArmSample {
    treated: Vec<f64>,
    control: Vec<f64>,
}

impl TwoArmSample {
    pub fn new(treated: Vec<f64>, control: Vec<f64>) -> Result<Self> {
        if treated.is_empty() || control.is_empty() {
            return Err(Error::InvalidInput(format!(
                "both arms need at least one observation (treated {}, control {})",
                treated.len(),
                control.len()
            )));
        }
        check_finite(&treated, "treated")?;
        check_finite(&control, "control")?;
        Ok(TwoArmSample { treated, control })
    }

    pub fn treated(&self) -> &[f64] {
        &self.treated
    }

    pub fn control(&self) -> &[f64] {
        &self.control
    }

    pub fn n_treated(&self) -> usize {
        self.treated.len()
    }

    pub fn n_control(&self) -> usize {
        self.control.len()
    }
}

/// Per-unit pairs of measurements; `post[i]` and `pre[i]` belong to unit `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    post: Vec<f64>,
    pre: Vec<f64>,
}

impl PairedSample {
    pub fn new(post: Vec<f64>, pre: Vec<f64>) -> Result<Self> {
        if post.len() != pre.len() {
            return Err(Error::InvalidInput(format!(
                "paired vectors differ in length ({} post, {} pre)",
                post.len(),
                pre.len()
            )));
        }
        if post.is_empty() {
            return Err(Error::InvalidInput("paired sample has no units".into()));
        }
        check_finite(&post, "post")?;
        check_finite(&pre, "pre")?;
        Ok(PairedSample { post, pre })
    }

    pub fn post(&self) -> &[f64] {
        &self.post
    }

    pub fn pre(&self) -> &[f64] {
        &self.pre
    }

    pub fn len(&self) -> usize {
        self.post.len()
    }

    pub fn is_empty(&self) -> bool {
        self.post.is_empty()
    }
}

/// One measured variable in either design.
#[derive(Debug, Clone, PartialEq)]
pub enum Variable {
    Unpaired(TwoArmSample),
    Paired(PairedSample),
}

impl Variable {
    pub fn design(&self) -> Design {
        match self {
            Variable::Unpaired(_) => Design::Unpaired,
            Variable::Paired(_) => Design::Paired,
        }
    }

    pub fn u_statistic(&self) -> UEstimate {
        match self {
            Variable::Unpaired(s) => u_statistic_unpaired(s),
            Variable::Paired(s) => u_statistic_paired(s),
        }
    }

    /// All observations: treated then control, or post then pre.
    pub fn observations(&self) -> impl Iterator<Item = f64> + '_ {
        let (a, b) = self.halves();
        a.iter().chain(b).copied()
    }

    /// (treated, control) or (post, pre).
    pub fn halves(&self) -> (&[f64], &[f64]) {
        match self {
            Variable::Unpaired(s) => (s.treated(), s.control()),
            Variable::Paired(s) => (s.post(), s.pre()),
        }
    }

    pub fn n_observations(&self) -> usize {
        let (a, b) = self.halves();
        a.len() + b.len()
    }

    /// Arm sizes (n₁, n₀); for paired data both equal the number of units.
    pub fn shape(&self) -> (usize, usize) {
        let (a, b) = self.halves();
        (a.len(), b.len())
    }

    /// True when every observation has the same value.
    pub fn is_constant(&self) -> bool {
        let mut obs = self.observations();
        match obs.next() {
            Some(first) => obs.all(|v| v == first),
            None => true,
        }
    }

    /// Applies `f` to every observation, keeping the layout.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Variable> {
        let (a, b) = self.halves();
        let a: Vec<f64> = a.iter().map(|&v| f(v)).collect();
        let b: Vec<f64> = b.iter().map(|&v| f(v)).collect();
        Ok(match self {
            Variable::Unpaired(_) => Variable::Unpaired(TwoArmSample::new(a, b)?),
            Variable::Paired(_) => Variable::Paired(PairedSample::new(a, b)?),
        })
    }

    /// Keeps the listed positions of each half (for paired data both lists
    /// should be the same unit indices).
    pub(crate) fn subset(&self, first: &[usize], second: &[usize]) -> Result<Variable> {
        let (a, b) = self.halves();
        let a: Vec<f64> = first.iter().map(|&i| a[i]).collect();
        let b: Vec<f64> = second.iter().map(|&i| b[i]).collect();
        Ok(match self {
            Variable::Unpaired(_) => Variable::Unpaired(TwoArmSample::new(a, b)?),
            Variable::Paired(_) => Variable::Paired(PairedSample::new(a, b)?),
        })
    }
}

/// An estimate of U = P(X¹ > X⁰) + ½ P(X¹ = X⁰).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UEstimate {
    pub value: f64,
    pub design: Design,
    /// Fraction of compared pairs that tie exactly. For the paired design
    /// this is the tie-probability estimate π̂ used by the null variance.
    pub tie_fraction: f64,
}

/// The comparison kernel G(a, b): 1 if a > b, ½ on a tie, 0 otherwise.
pub fn g_kernel(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInput(format!(
            "kernel arguments must be finite (got {a}, {b})"
        )));
    }
    Ok(kernel(a, b))
}

#[inline]
pub(crate) fn kernel(a: f64, b: f64) -> f64 {
    if a > b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Twice the number of wins of `x` against the sorted slice (ties count one),
/// and the number of ties.
#[inline]
fn doubled_wins(x: f64, sorted_other: &[f64]) -> (u64, u64) {
    let below = sorted_other.partition_point(|&v| v < x);
    let not_above = sorted_other.partition_point(|&v| v <= x);
    let ties = (not_above - below) as u64;
    (2 * below as u64 + ties, ties)
}

/// Per-subject placement values of an unpaired sample.
///
/// `treated[i]` is the mean of G(treatedᵢ, controlₖ) over the control arm and
/// `control[k]` the mean of G(treatedᵢ, controlₖ) over the treated arm. Both
/// average to Û.
#[derive(Debug, Clone)]
pub(crate) struct Placements {
    pub treated: Vec<f64>,
    pub control: Vec<f64>,
}

pub(crate) fn placements(s: &TwoArmSample) -> Placements {
    let n1 = s.n_treated() as f64;
    let n0 = s.n_control() as f64;
    let control_sorted = sorted(&s.control);
    let treated_sorted = sorted(&s.treated);
    let treated = s
        .treated
        .iter()
        .map(|&t| doubled_wins(t, &control_sorted).0 as f64 / (2.0 * n0))
        .collect();
    let control = s
        .control
        .iter()
        .map(|&c| {
            // Treated values strictly above c, plus half of the ties.
            let above = treated_sorted.len() - treated_sorted.partition_point(|&v| v <= c);
            let ties = doubled_wins(c, &treated_sorted).1 as usize;
            (2 * above + ties) as f64 / (2.0 * n1)
        })
        .collect();
    Placements { treated, control }
}

/// Two-sample estimator Û = (n₁n₀)⁻¹ Σᵢ Σₖ G(treatedᵢ, controlₖ).
///
/// Runs in O((n₁ + n₀) log n₀) by counting placements against the sorted
/// control arm; the result is exactly the double-sum value.
pub fn u_statistic_unpaired(s: &TwoArmSample) -> UEstimate {
    let control_sorted = sorted(&s.control);
    let (doubled, ties) = s
        .treated
        .iter()
        .map(|&t| doubled_wins(t, &control_sorted))
        .fold((0u64, 0u64), |(a, b), (w, t)| (a + w, b + t));
    let pairs = (s.n_treated() * s.n_control()) as f64;
    UEstimate {
        value: doubled as f64 / (2.0 * pairs),
        design: Design::Unpaired,
        tie_fraction: ties as f64 / pairs,
    }
}

/// Paired estimator Û = n⁻¹ Σᵢ G(postᵢ, preᵢ), with π̂ the fraction of tied units.
pub fn u_statistic_paired(s: &PairedSample) -> UEstimate {
    let (doubled, ties) = s
        .post
        .iter()
        .zip(&s.pre)
        .fold((0u64, 0u64), |(w, t), (&a, &b)| {
            if a > b {
                (w + 2, t)
            } else if a == b {
                (w + 1, t + 1)
            } else {
                (w, t)
            }
        });
    let n = s.len() as f64;
    UEstimate {
        value: doubled as f64 / (2.0 * n),
        design: Design::Paired,
        tie_fraction: ties as f64 / n,
    }
}
