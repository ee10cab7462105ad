//! Dispersion relations `phi`, their exponent metadata, and the predicted
//! frequency-localized decay exponents.
//!
//! A relation carries the high/low frequency homogeneity orders `m1`, `m2`
//! (from `|phi'(r)| ~ r^(m-1)`) and, when the phase has non-vanishing
//! curvature, the curvature orders `alpha1`, `alpha2` (from
//! `|phi''(r)| ~ r^(alpha-2)`). The metadata is declared, then checked
//! numerically by [`verify_hypotheses`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};

/// Default comparability constant for the `~` relations.
pub const DEFAULT_COMPARABILITY: f64 = 10.0;

/// A radial dispersion relation with closed-form derivatives.
#[derive(Clone)]
pub struct DispersionRelation {
    name: String,
    phase: Phase,
    pub m1: f64,
    pub m2: f64,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
}

#[derive(Clone)]
enum Phase {
    KleinGordon,
    Beam,
    Schrodinger4,
    Wave,
    Power(f64),
    Custom(Arc<CustomPhase>),
}

struct CustomPhase {
    phi: meval::Expr,
    dphi: meval::Expr,
    d2phi: meval::Expr,
}

thread_local! {
    static BUILTIN_FUNCTIONS: meval::Context<'static> = meval::Context::new();
}

fn eval_expr(expr: &meval::Expr, r: f64) -> f64 {
    BUILTIN_FUNCTIONS.with(|ctx| expr.eval_with_context((("r", r), ctx)).unwrap_or(f64::NAN))
}

fn parse_expr(source: &str) -> Result<meval::Expr> {
    let expr: meval::Expr = source.parse().map_err(|e: meval::Error| Error::Expression {
        expr: source.to_string(),
        reason: e.to_string(),
    })?;
    // Reject unknown variables/functions up front rather than producing NaN later.
    BUILTIN_FUNCTIONS
        .with(|ctx| expr.eval_with_context((("r", 1.0), ctx)))
        .map_err(|e| Error::Expression {
            expr: source.to_string(),
            reason: e.to_string(),
        })?;
    Ok(expr)
}

/// Config-file description of a relation: either a builtin name or a custom
/// phase given as expression strings in the variable `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RelationSpec {
    Named(String),
    Custom(CustomRelation),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomRelation {
    pub name: String,
    pub phi: String,
    pub dphi: String,
    pub d2phi: String,
    pub m1: f64,
    pub m2: f64,
    #[serde(default)]
    pub alpha1: Option<f64>,
    #[serde(default)]
    pub alpha2: Option<f64>,
}

impl RelationSpec {
    pub fn build(&self) -> Result<DispersionRelation> {
        match self {
            RelationSpec::Named(name) => DispersionRelation::builtin(name),
            RelationSpec::Custom(c) => DispersionRelation::custom(c),
        }
    }
}

impl DispersionRelation {
    /// Looks up a builtin relation: `klein_gordon`, `beam`, `schrodinger4`,
    /// `wave` or `power(m)`.
    pub fn builtin(name: &str) -> Result<Self> {
        let name = name.trim();
        let rel = match name {
            "klein_gordon" => Self::with_phase(name, Phase::KleinGordon, 1.0, 2.0, Some(-1.0), Some(2.0)),
            "beam" => Self::with_phase(name, Phase::Beam, 2.0, 4.0, Some(2.0), Some(4.0)),
            "schrodinger4" => Self::with_phase(name, Phase::Schrodinger4, 4.0, 2.0, Some(4.0), Some(2.0)),
            "wave" => Self::with_phase(name, Phase::Wave, 1.0, 1.0, None, None),
            _ => {
                let m = name
                    .strip_prefix("power(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .and_then(|m| m.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::UnknownRelation(name.to_string()))?;
                if !(m.is_finite() && m > 0.0) {
                    return Err(out_of_range("power exponent", format!("m = {m}, need m > 0")));
                }
                return Ok(Self::power(m));
            }
        };
        Ok(rel)
    }

    /// `phi(r) = r^m`, with `m1 = m2 = alpha1 = alpha2 = m`.
    pub fn power(m: f64) -> Self {
        Self::with_phase(&format!("power({m})"), Phase::Power(m), m, m, Some(m), Some(m))
    }

    pub fn custom(spec: &CustomRelation) -> Result<Self> {
        for (what, v) in [("m1", spec.m1), ("m2", spec.m2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(out_of_range(what, format!("{v}, need > 0")));
            }
        }
        let phase = CustomPhase {
            phi: parse_expr(&spec.phi)?,
            dphi: parse_expr(&spec.dphi)?,
            d2phi: parse_expr(&spec.d2phi)?,
        };
        Ok(Self::with_phase(
            &spec.name,
            Phase::Custom(Arc::new(phase)),
            spec.m1,
            spec.m2,
            spec.alpha1,
            spec.alpha2,
        ))
    }

    fn with_phase(name: &str, phase: Phase, m1: f64, m2: f64, a1: Option<f64>, a2: Option<f64>) -> Self {
        DispersionRelation {
            name: name.to_string(),
            phase,
            m1,
            m2,
            alpha1: a1,
            alpha2: a2,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn phi(&self, r: f64) -> f64 {
        match &self.phase {
            Phase::KleinGordon => (1.0 + r * r).sqrt(),
            Phase::Beam => (1.0 + r.powi(4)).sqrt(),
            Phase::Schrodinger4 => r * r + r.powi(4),
            Phase::Wave => r,
            Phase::Power(m) => r.powf(*m),
            Phase::Custom(c) => eval_expr(&c.phi, r),
        }
    }

    pub fn dphi(&self, r: f64) -> f64 {
        match &self.phase {
            Phase::KleinGordon => r / (1.0 + r * r).sqrt(),
            Phase::Beam => 2.0 * r.powi(3) / (1.0 + r.powi(4)).sqrt(),
            Phase::Schrodinger4 => 2.0 * r + 4.0 * r.powi(3),
            Phase::Wave => 1.0,
            Phase::Power(m) => m * r.powf(m - 1.0),
            Phase::Custom(c) => eval_expr(&c.dphi, r),
        }
    }

    pub fn d2phi(&self, r: f64) -> f64 {
        match &self.phase {
            Phase::KleinGordon => (1.0 + r * r).powf(-1.5),
            Phase::Beam => {
                let r2 = r * r;
                (6.0 * r2 + 2.0 * r2 * r2 * r2) / (1.0 + r2 * r2).powf(1.5)
            }
            Phase::Schrodinger4 => 2.0 + 12.0 * r * r,
            Phase::Wave => 0.0,
            Phase::Power(m) => {
                if *m == 1.0 {
                    0.0
                } else {
                    m * (m - 1.0) * r.powf(m - 2.0)
                }
            }
            Phase::Custom(c) => eval_expr(&c.d2phi, r),
        }
    }

    /// Third derivative by central differences of `d2phi` with `h = r * 1e-5`.
    pub fn d3phi(&self, r: f64) -> f64 {
        let h = r * 1e-5;
        (self.d2phi(r + h) - self.d2phi(r - h)) / (2.0 * h)
    }

    /// Value of `phi` at the zero frequency, taken as the limit `r -> 0+`.
    ///
    /// Returns `None` when the limit is not finite.
    pub fn phi_at_origin(&self) -> Option<f64> {
        let v = match &self.phase {
            Phase::KleinGordon | Phase::Beam => 1.0,
            Phase::Schrodinger4 | Phase::Wave | Phase::Power(_) => 0.0,
            Phase::Custom(c) => {
                let at0 = eval_expr(&c.phi, 0.0);
                if at0.is_finite() {
                    at0
                } else {
                    eval_expr(&c.phi, 1e-300)
                }
            }
        };
        v.is_finite().then_some(v)
    }

    /// Radial phase evaluated on a frequency vector norm `|xi|`, using the
    /// continuous limit at the origin.
    pub fn phi_radial(&self, xi_norm: f64) -> f64 {
        if xi_norm == 0.0 {
            self.phi_at_origin().unwrap_or(f64::NAN)
        } else {
            self.phi(xi_norm)
        }
    }
}

impl fmt::Debug for DispersionRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DispersionRelation")
            .field("name", &self.name)
            .field("m1", &self.m1)
            .field("m2", &self.m2)
            .field("alpha1", &self.alpha1)
            .field("alpha2", &self.alpha2)
            .finish()
    }
}

impl FromStr for DispersionRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::builtin(s)
    }
}

// ---------------------------------------------------------------------------
// Hypotheses (H1)-(H4)

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 4] = [Hypothesis::H1, Hypothesis::H2, Hypothesis::H3, Hypothesis::H4];

    fn high_frequency(self) -> bool {
        matches!(self, Hypothesis::H1 | Hypothesis::H3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisStatus {
    Pass,
    Fail,
    /// The relation declares no exponent for this hypothesis.
    NotDeclared,
}

/// Outcome of one hypothesis check.
///
/// `ratio_min`/`ratio_max` are the raw comparability ratios
/// (`|phi'|/r^(m-1)` for H1/H2, `|phi''|/r^(alpha-2)` for H3/H4). The `~`
/// relation hides a constant, and the hypotheses are invariant under
/// `phi -> lambda * phi`, so the pass decision uses the ratios normalized by
/// their geometric midpoint: pass iff the normalized range lies in
/// `[1/C, C]`, and (H1/H2) the normalized derivative bounds
/// `|phi^(a)| r^(a-m)` for `a = 2, 3` stay below `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub hypothesis: Hypothesis,
    pub status: HypothesisStatus,
    pub exponent: Option<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub normalized_min: f64,
    pub normalized_max: f64,
    /// Largest normalized upper-bound ratio over derivative orders 2 and 3.
    pub derivative_bound_max: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub relation: String,
    pub comparability: f64,
    pub records: Vec<HypothesisRecord>,
    /// `alpha1 <= m1` when H1 and H3 both pass, `alpha2 >= m2` when H2 and H4 both pass.
    pub metadata_consistent: bool,
}

impl HypothesisReport {
    pub fn record(&self, h: Hypothesis) -> &HypothesisRecord {
        self.records.iter().find(|r| r.hypothesis == h).expect("all four hypotheses are recorded")
    }

    pub fn passes(&self, h: Hypothesis) -> bool {
        self.record(h).status == HypothesisStatus::Pass
    }
}

/// Dyadic points `2^j`, `j in [j_min, j_max]`, with `per_octave - 1`
/// geometric intermediate samples between consecutive powers.
pub fn dyadic_grid(j_min: i32, j_max: i32, per_octave: usize) -> Vec<f64> {
    let per_octave = per_octave.max(1);
    let mut out = Vec::new();
    for j in j_min..j_max {
        for i in 0..per_octave {
            out.push(2f64.powf(j as f64 + i as f64 / per_octave as f64));
        }
    }
    out.push(2f64.powi(j_max));
    out
}

/// The default hypothesis grid: `2^j` for `j in [-20, 20]`, eight samples per octave.
pub fn default_hypothesis_grid() -> Vec<f64> {
    dyadic_grid(-20, 20, 8)
}

/// Numerically checks (H1)-(H4) over `r_grid` with comparability constant `c`.
pub fn verify_hypotheses(rel: &DispersionRelation, c: f64, r_grid: &[f64]) -> Result<HypothesisReport> {
    if !(c > 1.0) {
        return Err(out_of_range("comparability constant", format!("C = {c}, need C > 1")));
    }
    if r_grid.is_empty() {
        return Err(Error::InvalidSamples("empty r grid".into()));
    }
    if let Some(&bad) = r_grid.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        if bad == 0.0 {
            return Err(Error::GridTouchesOrigin);
        }
        return Err(out_of_range("grid radius", format!("r = {bad}")));
    }

    let records: Vec<HypothesisRecord> = Hypothesis::ALL
        .iter()
        .map(|&h| check_one(rel, h, c, r_grid))
        .collect();

    let pass = |h: Hypothesis| records.iter().any(|r| r.hypothesis == h && r.status == HypothesisStatus::Pass);
    let mut metadata_consistent = true;
    if let (true, true, Some(a1)) = (pass(Hypothesis::H1), pass(Hypothesis::H3), rel.alpha1) {
        metadata_consistent &= a1 <= rel.m1;
    }
    if let (true, true, Some(a2)) = (pass(Hypothesis::H2), pass(Hypothesis::H4), rel.alpha2) {
        metadata_consistent &= a2 >= rel.m2;
    }

    Ok(HypothesisReport {
        relation: rel.name().to_string(),
        comparability: c,
        records,
        metadata_consistent,
    })
}

fn check_one(rel: &DispersionRelation, h: Hypothesis, c: f64, r_grid: &[f64]) -> HypothesisRecord {
    let exponent = match h {
        Hypothesis::H1 => Some(rel.m1),
        Hypothesis::H2 => Some(rel.m2),
        Hypothesis::H3 => rel.alpha1,
        Hypothesis::H4 => rel.alpha2,
    };
    let rs: Vec<f64> = r_grid
        .iter()
        .copied()
        .filter(|&r| if h.high_frequency() { r >= 1.0 } else { r < 1.0 })
        .collect();

    let Some(e) = exponent else {
        return HypothesisRecord {
            hypothesis: h,
            status: HypothesisStatus::NotDeclared,
            exponent: None,
            ratio_min: f64::NAN,
            ratio_max: f64::NAN,
            normalized_min: f64::NAN,
            normalized_max: f64::NAN,
            derivative_bound_max: None,
            samples: rs.len(),
        };
    };

    let curvature = matches!(h, Hypothesis::H3 | Hypothesis::H4);
    let ratios: Vec<f64> = rs
        .iter()
        .map(|&r| {
            if curvature {
                rel.d2phi(r).abs() / r.powf(e - 2.0)
            } else {
                rel.dphi(r).abs() / r.powf(e - 1.0)
            }
        })
        .collect();

    let finite = !ratios.is_empty() && ratios.iter().all(|v| v.is_finite());
    let ratio_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = (ratio_min * ratio_max).sqrt();
    let (normalized_min, normalized_max) = if mid > 0.0 && mid.is_finite() {
        (ratio_min / mid, ratio_max / mid)
    } else {
        (f64::NAN, f64::NAN)
    };

    let derivative_bound_max = (!curvature).then(|| {
        rs.iter()
            .map(|&r| {
                let b2 = rel.d2phi(r).abs() / r.powf(e - 2.0);
                let b3 = rel.d3phi(r).abs() / r.powf(e - 3.0);
                b2.max(b3) / mid
            })
            .fold(0.0, f64::max)
    });

    let comparable = finite && mid > 0.0 && normalized_min >= 1.0 / c && normalized_max <= c;
    let bounded = derivative_bound_max.map_or(true, |b| b.is_finite() && b <= c);
    let status = if comparable && bounded {
        HypothesisStatus::Pass
    } else {
        HypothesisStatus::Fail
    };

    HypothesisRecord {
        hypothesis: h,
        status,
        exponent: Some(e),
        ratio_min,
        ratio_max,
        normalized_min,
        normalized_max,
        derivative_bound_max,
        samples: rs.len(),
    }
}

// ---------------------------------------------------------------------------
// Predicted exponents

/// Which of the two decay formulas is used: `A` needs only the homogeneity
/// order, `B` also uses the curvature order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    A,
    B,
}

/// `|t|^time * 2^(k * freq)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub time: f64,
    pub freq: f64,
}

/// The admissible `theta` maximizing the time decay, with its exponent pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestExponent {
    pub branch: Branch,
    pub theta: f64,
    pub pair: ExponentPair,
}

fn check_dimension(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::UnsupportedDimension(n));
    }
    Ok(())
}

fn exponents(n: usize, theta: f64, branch: Branch, m: f64, alpha: Option<f64>, regime: &str) -> Result<ExponentPair> {
    check_dimension(n)?;
    let nf = n as f64;
    match branch {
        Branch::A => {
            let max = (nf - 1.0) / 2.0;
            if !(0.0..=max).contains(&theta) {
                return Err(out_of_range("theta", format!("{theta} not in [0, {max}] for branch A")));
            }
            Ok(ExponentPair {
                time: -theta,
                freq: nf - m * theta,
            })
        }
        Branch::B => {
            let alpha = alpha.ok_or_else(|| {
                Error::Inadmissible(format!("branch B needs a declared {regime} curvature order"))
            })?;
            if !(0.0..=1.0).contains(&theta) {
                return Err(out_of_range("theta", format!("{theta} not in [0, 1] for branch B")));
            }
            let s = (nf - 1.0 + theta) / 2.0;
            Ok(ExponentPair {
                time: -s,
                freq: nf - m * s - theta * (alpha - m) / 2.0,
            })
        }
    }
}

/// High-frequency (`k >= 0`) exponents of the frequency-localized decay estimate.
pub fn predicted_high_exponents(rel: &DispersionRelation, n: usize, theta: f64, branch: Branch) -> Result<ExponentPair> {
    exponents(n, theta, branch, rel.m1, rel.alpha1, "high-frequency")
}

/// Low-frequency (`k < 0`) exponents, the mirror of the high-frequency ones with `(m2, alpha2)`.
pub fn predicted_low_exponents(rel: &DispersionRelation, n: usize, theta: f64, branch: Branch) -> Result<ExponentPair> {
    exponents(n, theta, branch, rel.m2, rel.alpha2, "low-frequency")
}

fn best(n: usize, m: f64, alpha: Option<f64>) -> Result<BestExponent> {
    check_dimension(n)?;
    let theta_a = (n as f64 - 1.0) / 2.0;
    let a = BestExponent {
        branch: Branch::A,
        theta: theta_a,
        pair: exponents(n, theta_a, Branch::A, m, alpha, "")?,
    };
    if alpha.is_some() {
        let b = BestExponent {
            branch: Branch::B,
            theta: 1.0,
            pair: exponents(n, 1.0, Branch::B, m, alpha, "")?,
        };
        if b.pair.time <= a.pair.time {
            return Ok(b);
        }
    }
    Ok(a)
}

/// Most negative high-frequency time exponent over both branches and all admissible `theta`.
pub fn best_high_exponents(rel: &DispersionRelation, n: usize) -> Result<BestExponent> {
    best(n, rel.m1, rel.alpha1)
}

/// Most negative low-frequency time exponent over both branches and all admissible `theta`.
pub fn best_low_exponents(rel: &DispersionRelation, n: usize) -> Result<BestExponent> {
    best(n, rel.m2, rel.alpha2)
}

/// Decay exponent `theta` of the summed low-frequency kernel `P_{<=0}`:
/// `min(n/m2, (n-1)/2)`, sharpened to `min(n/m2, n/2)` when `alpha2 = m2`.
pub fn predicted_lowfreq_aggregate(rel: &DispersionRelation, n: usize) -> Result<f64> {
    check_dimension(n)?;
    let nf = n as f64;
    let cap = if rel.alpha2 == Some(rel.m2) { nf / 2.0 } else { (nf - 1.0) / 2.0 };
    Ok((nf / rel.m2).min(cap))
}
