//! Exponent bookkeeping for Hardy-Littlewood-Sobolev type kernels and
//! Strichartz pairs, and bounded-ratio checks of both estimates on grids.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::decay_fit::Verdict;
use crate::dispersion::{DispersionRelation, RelationSpec};
use crate::error::{out_of_range, Error, Result};
use crate::exec::{self, Execution};
use crate::propagator::{exponent, mixed_from_values, spectrum_norm, GridField, NormSpec, Spectrum};

/// Tolerance of the equality tests in the admissibility conditions.
pub const EXPONENT_TOL: f64 = 1e-12;

/// `p'` with `1/p + 1/p' = 1`; `1 <-> inf`.
pub fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else if p == 2.0 {
        2.0
    } else {
        p / (p - 1.0)
    }
}

fn recip(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXPONENT_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Which condition admits an exponent choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    A,
    B,
    C,
    D,
}

/// Kernel `|y|^{-gamma1}` for `|y| <= 1` and `|y|^{-gamma2}` for `|y| > 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HlsKernelSpec {
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(with = "exponent")]
    pub p: f64,
    #[serde(with = "exponent")]
    pub q: f64,
    pub n: usize,
}

impl HlsKernelSpec {
    pub fn kernel(&self, y: f64) -> f64 {
        let a = y.abs();
        if a <= 1.0 {
            a.powf(-self.gamma1)
        } else {
            a.powf(-self.gamma2)
        }
    }

    /// `1 - 1/p + 1/q`.
    pub fn scaling(&self) -> f64 {
        1.0 - recip(self.p) + recip(self.q)
    }
}

/// First condition under which `f -> f * k` maps `L^p` to `L^q`:
/// (a) `0 < g1 = g2 < n`, `1 < p < q < inf`, `1 - 1/p + 1/q = g1/n`;
/// (b) `g1 < g2`, `0 < g1 < n`, same exponents with `g1`;
/// (c) `g1 < g2`, `0 < g2 < n`, same exponents with `g2`;
/// (d) `g1 < g2`, `1 <= p <= q <= inf`, `g1/n < 1 - 1/p + 1/q < g2/n`.
pub fn hls_case(spec: &HlsKernelSpec) -> Option<Case> {
    let HlsKernelSpec { gamma1: g1, gamma2: g2, p, q, n } = *spec;
    if n == 0 || !(g1.is_finite() && g2.is_finite()) || p.is_nan() || q.is_nan() {
        return None;
    }
    let nf = n as f64;
    let lhs = spec.scaling();
    let strict_pq = 1.0 < p && p < q && q.is_finite();
    if close(g1, g2) && 0.0 < g1 && g1 < nf && strict_pq && close(lhs, g1 / nf) {
        return Some(Case::A);
    }
    if g1 < g2 && !close(g1, g2) {
        if 0.0 < g1 && g1 < nf && strict_pq && close(lhs, g1 / nf) {
            return Some(Case::B);
        }
        if 0.0 < g2 && g2 < nf && strict_pq && close(lhs, g2 / nf) {
            return Some(Case::C);
        }
        if 1.0 <= p && p <= q && g1 / nf < lhs && lhs < g2 / nf {
            return Some(Case::D);
        }
    }
    None
}

pub fn hls_admissible(spec: &HlsKernelSpec) -> bool {
    hls_case(spec).is_some()
}

/// Small- and large-time decay of a group: `||U(t) f||_{B^alpha_{p,2}} <=
/// k(t) ||f||_{B^0_{p',2}}` with `k(t) = |t|^{-theta1}` for `|t| <= 1` and
/// `|t|^{-theta2}` beyond.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayProfile {
    pub theta1: f64,
    pub theta2: f64,
    pub alpha: f64,
    #[serde(with = "exponent")]
    pub p: f64,
}

impl DecayProfile {
    pub fn new(theta1: f64, theta2: f64, alpha: f64, p: f64) -> Result<Self> {
        if !(theta1 <= theta2) {
            return Err(out_of_range("decay profile", format!("theta1 = {theta1} > theta2 = {theta2}")));
        }
        Ok(DecayProfile { theta1, theta2, alpha, p })
    }
}

/// First condition under which `q` is a Strichartz time exponent for
/// `(theta1, theta2)`: (a) `0 < t1 = t2 < 1`, `q = 2/t1`; (b) `t1 < t2`,
/// `0 < t1 < 1`, `q = 2/t1`; (c) `t1 < t2`, `0 < t2 < 1`, `q = 2/t2`;
/// (d) `t1 < t2`, `2 <= q <= inf`, `t1 < 2/q < t2`.
pub fn exponent_case(q: f64, theta1: f64, theta2: f64) -> Option<Case> {
    if q.is_nan() || !(theta1.is_finite() && theta2.is_finite()) {
        return None;
    }
    let two_over_q = 2.0 * recip(q);
    if close(theta1, theta2) && 0.0 < theta1 && theta1 < 1.0 && close(two_over_q, theta1) {
        return Some(Case::A);
    }
    if theta1 < theta2 && !close(theta1, theta2) {
        if 0.0 < theta1 && theta1 < 1.0 && close(two_over_q, theta1) {
            return Some(Case::B);
        }
        if 0.0 < theta2 && theta2 < 1.0 && close(two_over_q, theta2) {
            return Some(Case::C);
        }
        if 2.0 <= q && theta1 < two_over_q && two_over_q < theta2 {
            return Some(Case::D);
        }
    }
    None
}

pub fn in_exponent_set(q: f64, theta1: f64, theta2: f64) -> bool {
    exponent_case(q, theta1, theta2).is_some()
}

/// Why each condition rejects `q`, for error messages.
pub fn exponent_set_failure(q: f64, theta1: f64, theta2: f64) -> String {
    let tq = 2.0 * recip(q);
    let a = if !close(theta1, theta2) {
        "(a) needs theta1 = theta2".to_string()
    } else if !(0.0 < theta1 && theta1 < 1.0) {
        "(a) needs 0 < theta1 < 1".to_string()
    } else {
        format!("(a) needs q = 2/theta1 = {}", 2.0 / theta1)
    };
    let ordered = theta1 < theta2 && !close(theta1, theta2);
    let b = if !ordered {
        "(b) needs theta1 < theta2".to_string()
    } else if !(0.0 < theta1 && theta1 < 1.0) {
        "(b) needs 0 < theta1 < 1".to_string()
    } else {
        format!("(b) needs q = 2/theta1 = {}", 2.0 / theta1)
    };
    let c = if !ordered {
        "(c) needs theta1 < theta2".to_string()
    } else if !(0.0 < theta2 && theta2 < 1.0) {
        "(c) needs 0 < theta2 < 1".to_string()
    } else {
        format!("(c) needs q = 2/theta2 = {}", 2.0 / theta2)
    };
    let d = if !ordered {
        "(d) needs theta1 < theta2".to_string()
    } else if q < 2.0 {
        "(d) needs q >= 2".to_string()
    } else {
        format!("(d) needs theta1 < 2/q < theta2, got 2/q = {tq}")
    };
    format!("q = {q} is outside E({theta1}, {theta2}): {a}; {b}; {c}; {d}")
}

// ---------------------------------------------------------------------------
// Convolution check

/// Parameters of the one-dimensional convolution check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HlsCheckConfig {
    pub spec: HlsKernelSpec,
    pub trials: usize,
    pub points: usize,
    pub length: f64,
    pub seed: u64,
}

impl HlsCheckConfig {
    pub fn new(spec: HlsKernelSpec) -> Self {
        HlsCheckConfig {
            spec,
            trials: 20,
            points: 4096,
            length: 64.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HlsCheck {
    pub config: HlsCheckConfig,
    pub case: Case,
    /// Max of `||f * k||_q / ||f||_p` over the trials on the base grid.
    pub max_ratio: f64,
    /// Same on the grid with twice the points.
    pub refined_max_ratio: f64,
    pub change: f64,
    pub verdict: Verdict,
}

/// Smooth test function: a sum of Gaussian atoms, defined independently of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomSum {
    atoms: Vec<(f64, f64, Complex64)>,
}

impl AtomSum {
    /// `count` atoms with centres in `[-spread, spread]` and widths in `[0.25, 1]`.
    pub fn random(rng: &mut ChaCha8Rng, count: usize, spread: f64) -> Self {
        let atoms = (0..count)
            .map(|_| {
                let c = rng.gen_range(-spread..=spread);
                let w = rng.gen_range(0.25..=1.0);
                let a = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                (c, w, a)
            })
            .collect();
        AtomSum { atoms }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.atoms
            .iter()
            .map(|&(c, w, a)| a * (-(x - c) * (x - c) / (2.0 * w * w)).exp())
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        AtomSum {
            atoms: self.atoms.iter().map(|&(c, w, a)| (c, w, a * s)).collect(),
        }
    }
}

/// Discrete linear convolution `h sum_j f_j k((i - j) h)` on the grid of `f`;
/// the singular cell uses the cell average `(h/2)^{-gamma1} / (1 - gamma1)`.
pub fn hls_convolve(spec: &HlsKernelSpec, f: &GridField) -> Result<GridField> {
    if f.n() != 1 {
        return Err(Error::UnsupportedDimension(f.n()));
    }
    if spec.gamma1 >= 1.0 {
        return Err(Error::Inadmissible(format!(
            "gamma1 = {} is not locally integrable in one dimension",
            spec.gamma1
        )));
    }
    let size = f.size();
    let h = f.spacing();
    let padded = 2 * size;
    // Kernel offsets -(size-1)..=(size-1) laid out circularly on the padded grid.
    let mut kernel = vec![Complex64::new(0.0, 0.0); padded];
    kernel[0] = Complex64::new((0.5 * h).powf(-spec.gamma1) / (1.0 - spec.gamma1), 0.0);
    for j in 1..size {
        let v = Complex64::new(spec.kernel(j as f64 * h), 0.0);
        kernel[j] = v;
        kernel[padded - j] = v;
    }
    let mut data = f.values().to_vec();
    data.resize(padded, Complex64::new(0.0, 0.0));
    let length = 2.0 * f.length();
    let kf = GridField::new(1, padded, length, kernel)?.spectrum();
    let ff = GridField::new(1, padded, length, data)?.spectrum();
    let prod: Vec<Complex64> = kf.coefficients().iter().zip(ff.coefficients()).map(|(a, b)| a * b).collect();
    // Both spectra carry one factor h and the inverse divides by the padded length.
    let conv = kf.with_coefficients(prod)?.to_field();
    f.with_values(conv.values()[..size].to_vec())
}

/// `||f * k||_q / ||f||_p`, or 0 when `f = 0`.
pub fn hls_ratio(spec: &HlsKernelSpec, f: &GridField) -> Result<f64> {
    let den = f.lp_norm(spec.p)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(hls_convolve(spec, f)?.lp_norm(spec.q)? / den)
}

/// Max ratio over seeded random atom sums, compared between two grid
/// resolutions (pass when they agree within 20%).
pub fn hls_numeric_check(cfg: &HlsCheckConfig, exec: Execution) -> Result<HlsCheck> {
    let case = hls_case(&cfg.spec).ok_or_else(|| {
        Error::Inadmissible(format!("kernel spec {:?} meets none of the conditions (a)-(d)", cfg.spec))
    })?;
    if cfg.spec.n != 1 {
        return Err(Error::UnsupportedDimension(cfg.spec.n));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidSamples("no trials".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let funcs: Vec<AtomSum> = (0..cfg.trials)
        .map(|_| AtomSum::random(&mut rng, 4, cfg.length / 8.0))
        .collect();
    let max_on = |points: usize| -> Result<f64> {
        let ratios = exec::map(exec, &funcs, |f| {
            let g = GridField::from_fn(1, points, cfg.length, |x| f.eval(x[0]))?;
            hls_ratio(&cfg.spec, &g)
        });
        ratios.into_iter().try_fold(0.0f64, |m, r| Ok(m.max(r?)))
    };
    let max_ratio = max_on(cfg.points)?;
    let refined_max_ratio = max_on(2 * cfg.points)?;
    let change = (refined_max_ratio / max_ratio - 1.0).abs();
    Ok(HlsCheck {
        config: cfg.clone(),
        case,
        max_ratio,
        refined_max_ratio,
        change,
        verdict: Verdict::from_bool(max_ratio.is_finite() && change <= 0.2),
    })
}

// ---------------------------------------------------------------------------
// Strichartz ratio

/// Parameters of the homogeneous Strichartz ratio check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrichartzConfig {
    pub relation: RelationSpec,
    pub n: usize,
    #[serde(with = "exponent")]
    pub q: f64,
    #[serde(with = "exponent")]
    pub p: f64,
    pub eta: f64,
    pub profile: DecayProfile,
    pub trials: usize,
    /// Horizons `T`; the time integral runs over `[-T, T]`.
    pub horizons: Vec<f64>,
    /// Base grid; the check also runs with twice the points.
    pub points: usize,
    pub length: f64,
    pub time_nodes: usize,
    pub seed: u64,
    /// Allowed relative spread of the max ratio across horizons and grids.
    pub stability: f64,
}

impl StrichartzConfig {
    /// `e^{i t xi^2}` in one dimension with `(q, p) = (8, 4)`, no derivative loss.
    pub fn schrodinger_1d() -> Self {
        StrichartzConfig {
            relation: RelationSpec::Named("power(2)".into()),
            n: 1,
            q: 8.0,
            p: 4.0,
            eta: 0.0,
            profile: DecayProfile {
                theta1: 0.25,
                theta2: 0.25,
                alpha: 0.0,
                p: 4.0,
            },
            trials: 50,
            horizons: vec![4.0, 8.0, 16.0],
            points: 256,
            length: 64.0,
            time_nodes: 33,
            seed: 0,
            stability: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrichartzRun {
    pub horizon: f64,
    pub points: usize,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrichartzCheck {
    pub config: StrichartzConfig,
    pub case: Case,
    pub runs: Vec<StrichartzRun>,
    /// Largest max-ratio quotient between consecutive horizons (base grid).
    pub horizon_growth: f64,
    /// Max-ratio quotient between the doubled and base grids at each horizon, worst case.
    pub grid_change: f64,
    pub note: String,
    pub verdict: Verdict,
}

/// Complex Gaussian spectral coefficients on `|xi| <= nyquist/4`.
pub fn random_band_limited(n: usize, points: usize, length: f64, rng: &mut ChaCha8Rng) -> Result<Spectrum> {
    let zero = GridField::zeros(n, points, length)?.spectrum();
    let cut = std::f64::consts::PI * points as f64 / length / 4.0;
    let xi = zero.xi_norms();
    let mut draws = Vec::with_capacity(xi.len());
    for x in xi {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        draws.push(if x <= cut { Complex64::new(re, im) } else { Complex64::default() });
    }
    zero.with_coefficients(draws)
}

/// `||U(t) h||_{L^q([-T,T]; B^{eta+alpha/2}_{p,2})} / ||h||_{H^eta}` with the
/// time norm by the trapezoid rule on `nodes` uniform nodes.
pub fn strichartz_ratio(
    rel: &DispersionRelation,
    h: &Spectrum,
    cfg: &StrichartzConfig,
    horizon: f64,
) -> Result<f64> {
    let den = spectrum_norm(h, NormSpec::Sobolev { s: cfg.eta })?;
    if den == 0.0 {
        return Ok(0.0);
    }
    let out = NormSpec::Besov {
        s: cfg.eta + 0.5 * cfg.profile.alpha,
        p: cfg.p,
        q: 2.0,
    };
    let nodes = cfg.time_nodes.max(2);
    let mut values = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let t = -horizon + 2.0 * horizon * i as f64 / (nodes - 1) as f64;
        let u = h.map(|x| Complex64::from_polar(1.0, t * rel.phi_radial(x)))?;
        values.push((t, spectrum_norm(&u, out)?));
    }
    Ok(mixed_from_values(&values, cfg.q)? / den)
}

/// Max Strichartz ratio over seeded random data for every horizon and for the
/// base and doubled grids.
pub fn strichartz_ratio_check(cfg: &StrichartzConfig, exec: Execution) -> Result<StrichartzCheck> {
    let prof = cfg.profile;
    let case = exponent_case(cfg.q, prof.theta1, prof.theta2)
        .ok_or_else(|| Error::Inadmissible(exponent_set_failure(cfg.q, prof.theta1, prof.theta2)))?;
    if prof.p != cfg.p {
        return Err(Error::Inadmissible(format!(
            "decay profile is for p = {} but the check uses p = {}",
            prof.p, cfg.p
        )));
    }
    if cfg.trials == 0 || cfg.horizons.is_empty() {
        return Err(Error::InvalidSamples("need at least one trial and one horizon".into()));
    }
    let rel = cfg.relation.build()?;
    let mut runs = Vec::new();
    for points in [cfg.points, 2 * cfg.points] {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let data: Vec<Spectrum> = (0..cfg.trials)
            .map(|_| random_band_limited(cfg.n, points, cfg.length, &mut rng))
            .collect::<Result<_>>()?;
        for &horizon in &cfg.horizons {
            let ratios = exec::map(exec, &data, |h| strichartz_ratio(&rel, h, cfg, horizon));
            let max_ratio = ratios.into_iter().try_fold(0.0f64, |m, r| Ok::<_, Error>(m.max(r?)))?;
            runs.push(StrichartzRun { horizon, points, max_ratio });
        }
    }
    let nh = cfg.horizons.len();
    let (base, fine) = runs.split_at(nh);
    let horizon_growth = base
        .windows(2)
        .map(|w| w[1].max_ratio / w[0].max_ratio)
        .fold(1.0, f64::max);
    let grid_change = base
        .iter()
        .zip(fine)
        .map(|(a, b)| (b.max_ratio / a.max_ratio - 1.0).abs())
        .fold(0.0, f64::max);
    let all: Vec<f64> = base.iter().map(|r| r.max_ratio).collect();
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(0.0, f64::max);
    let stable = hi <= (1.0 + cfg.stability) * lo && grid_change <= cfg.stability && horizon_growth < 2.0;
    Ok(StrichartzCheck {
        config: cfg.clone(),
        case,
        runs,
        horizon_growth,
        grid_change,
        note: "numeric checks are restricted to 1 < p <= q < inf".into(),
        verdict: Verdict::from_bool(stable && hi.is_finite()),
    })
}
