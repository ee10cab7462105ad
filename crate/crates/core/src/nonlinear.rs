//! Critical powers, exponent conditions and Picard iteration for the
//! semilinear Klein-Gordon and beam equations `u_tt + omega^2 u = -|u|^{1+kappa}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decay_fit::Verdict;
use crate::error::{out_of_range, Error, Result};
use crate::exec::{self, Execution};
use crate::propagator::{mixed_from_values, GridField, GridSpec, InitialData, SineGroup, Spectrum};

/// Contraction threshold on the ratios of successive increments.
pub const CONTRACTION: f64 = 0.5;
/// Iterations used by [`small_data_threshold`].
pub const THRESHOLD_ITERS: usize = 6;

/// `kappa(n) = (2 - n + sqrt(n^2 + 12 n + 4)) / (2 n)`, the positive root of
/// `n k^2 + (n - 2) k - 4 = 0`.
pub fn critical_power_kg(n: usize) -> f64 {
    let nf = n as f64;
    (2.0 - nf + (nf * nf + 12.0 * nf + 4.0).sqrt()) / (2.0 * nf)
}

/// `kappa_B(n) = (4 - n + sqrt(n^2 + 24 n + 16)) / (2 n)`, the positive root of
/// `n k^2 + (n - 4) k - 8 = 0`.
pub fn critical_power_beam(n: usize) -> f64 {
    let nf = n as f64;
    (4.0 - nf + (nf * nf + 24.0 * nf + 16.0).sqrt()) / (2.0 * nf)
}

const BOUNDARY_TOL: f64 = 1e-12;

/// One strict inequality `lhs < rhs` (or `lhs > rhs`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `lhs == rhs` to `1e-12`.
    pub critical: bool,
}

impl Inequality {
    fn less(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            holds: lhs < rhs && (lhs - rhs).abs() > BOUNDARY_TOL,
            critical: (lhs - rhs).abs() <= BOUNDARY_TOL,
        }
    }

    fn greater(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            holds: lhs > rhs && (lhs - rhs).abs() > BOUNDARY_TOL,
            critical: (lhs - rhs).abs() <= BOUNDARY_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KgConditions {
    pub n: usize,
    pub kappa: f64,
    /// `(1+k) k (n-2) / (2 (2+k)) < 1`.
    pub upper: Inequality,
    /// `(1+k) k n / (2 (2+k)) > 1`.
    pub lower: Inequality,
    /// `sigma(k) = k (n+2) / (2 (2+k)) < 1`.
    pub sigma: Inequality,
    /// `kappa(n) < k < 4/n`.
    pub in_window: bool,
    pub critical: bool,
    pub all_hold: bool,
}

pub fn kg_exponent_conditions(n: usize, kappa: f64) -> Result<KgConditions> {
    if n == 0 {
        return Err(Error::UnsupportedDimension(n));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(out_of_range("kappa", format!("{kappa} is not positive")));
    }
    let nf = n as f64;
    let d = 2.0 * (2.0 + kappa);
    let upper = Inequality::less((1.0 + kappa) * kappa * (nf - 2.0) / d, 1.0);
    let lower = Inequality::greater((1.0 + kappa) * kappa * nf / d, 1.0);
    let sigma = Inequality::less(kappa * (nf + 2.0) / d, 1.0);
    let all_hold = upper.holds && lower.holds && sigma.holds;
    Ok(KgConditions {
        n,
        kappa,
        upper,
        lower,
        sigma,
        in_window: critical_power_kg(n) < kappa && kappa < 4.0 / nf,
        critical: upper.critical || lower.critical || sigma.critical,
        all_hold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeamConditions {
    pub n: usize,
    pub kappa: f64,
    pub s: f64,
    /// `(1+k) (n k / (2 (2+k)) - s/2) < 1`.
    pub upper: Inequality,
    /// `(1+k) k n / (4 (2+k)) > 1`.
    pub lower: Inequality,
    /// `sigma(k) = n k / (2+k) - 2 / (1+k)`.
    pub sigma: f64,
    /// `s_2 = s - n k / (2 (2+k))`.
    pub s2: f64,
    /// `sigma(k) < s <= 2`.
    pub s_window: bool,
    /// `kappa_B(n) < k < 8/n`.
    pub in_window: bool,
    pub critical: bool,
    pub all_hold: bool,
}

pub fn beam_exponent_conditions(n: usize, kappa: f64, s: f64) -> Result<BeamConditions> {
    if n == 0 {
        return Err(Error::UnsupportedDimension(n));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(out_of_range("kappa", format!("{kappa} is not positive")));
    }
    let nf = n as f64;
    let half = nf * kappa / (2.0 * (2.0 + kappa));
    let upper = Inequality::less((1.0 + kappa) * (half - s / 2.0), 1.0);
    let lower = Inequality::greater((1.0 + kappa) * kappa * nf / (4.0 * (2.0 + kappa)), 1.0);
    let sigma = nf * kappa / (2.0 + kappa) - 2.0 / (1.0 + kappa);
    let s_window = sigma < s && (s - sigma).abs() > BOUNDARY_TOL && s <= 2.0;
    Ok(BeamConditions {
        n,
        kappa,
        s,
        upper,
        lower,
        sigma,
        s2: s - half,
        s_window,
        in_window: critical_power_beam(n) < kappa && kappa < 8.0 / nf,
        critical: upper.critical || lower.critical,
        all_hold: upper.holds && lower.holds && s_window,
    })
}

/// Checks on a grid of `kappa` that the three Klein-Gordon inequalities hold
/// exactly inside `(kappa(n), 4/n)`; returns the disagreeing points.
pub fn kg_window_mismatches(n: usize, kappas: &[f64]) -> Result<Vec<f64>> {
    let mut bad = Vec::new();
    for &k in kappas {
        let c = kg_exponent_conditions(n, k)?;
        if c.critical {
            continue;
        }
        if c.all_hold != c.in_window {
            bad.push(k);
        }
    }
    Ok(bad)
}

// ---------------------------------------------------------------------------
// Picard iteration

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Kg,
    Beam,
}

impl Family {
    pub fn group(self) -> SineGroup {
        match self {
            Family::Kg => SineGroup::KleinGordon,
            Family::Beam => SineGroup::Beam,
        }
    }
}

fn default_s() -> f64 {
    2.0
}

fn default_iters() -> usize {
    6
}

/// A small-data problem `u(0) = scale u0`, `u_t(0) = scale u1` on `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearProblem {
    pub family: Family,
    pub n: usize,
    pub kappa: f64,
    /// Beam regularity index `s`.
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "M_t")]
    pub steps: usize,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub data_scale: f64,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    /// `None` is zero data.
    #[serde(default)]
    pub u0: Option<InitialData>,
    #[serde(default)]
    pub u1: Option<InitialData>,
}

impl NonlinearProblem {
    /// Klein-Gordon, `n = 1`, `kappa = 3`, Gaussian `u0 = u1`, scale `1e-2` on `[0, 4]`.
    pub fn kg_1d() -> Self {
        NonlinearProblem {
            family: Family::Kg,
            n: 1,
            kappa: 3.0,
            s: 2.0,
            horizon: 4.0,
            steps: 128,
            points: 256,
            length: 40.0,
            data_scale: 1e-2,
            max_iters: 6,
            u0: Some(InitialData::gaussian(1.0)),
            u1: Some(InitialData::gaussian(1.0)),
        }
    }

    /// Beam, `n = 2`, `kappa = 3`, `s = 2` on a `128^2` grid.
    pub fn beam_2d() -> Self {
        NonlinearProblem {
            family: Family::Beam,
            n: 2,
            kappa: 3.0,
            s: 2.0,
            horizon: 1.0,
            steps: 64,
            points: 128,
            length: 16.0,
            data_scale: 1e-2,
            max_iters: 6,
            u0: Some(InitialData::gaussian(1.0)),
            u1: Some(InitialData::gaussian(1.0)),
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            points: self.points,
            length: self.length,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let h = self.horizon / self.steps as f64;
        (0..=self.steps).map(|i| i as f64 * h).collect()
    }

    /// Fails when the exponent conditions for the family do not hold.
    pub fn check_conditions(&self) -> Result<()> {
        let ok = match self.family {
            Family::Kg => kg_exponent_conditions(self.n, self.kappa)?.all_hold,
            Family::Beam => beam_exponent_conditions(self.n, self.kappa, self.s)?.all_hold,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Constraint(format!(
                "{:?} exponent conditions fail for n = {}, kappa = {}, s = {}",
                self.family, self.n, self.kappa, self.s
            )))
        }
    }

    fn sample(&self, d: &Option<InitialData>) -> Result<GridField> {
        match d {
            Some(d) => Ok(d.sample(self.n, self.points, self.length)?.scaled(self.data_scale)),
            None => GridField::zeros(self.n, self.points, self.length),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(out_of_range("T", format!("{}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(out_of_range("M_t", "0"));
        }
        if !self.data_scale.is_finite() || self.data_scale < 0.0 {
            return Err(out_of_range("data_scale", format!("{}", self.data_scale)));
        }
        Ok(())
    }
}

/// Field values at the time nodes `0, T/M, ..., T`.
pub type Trajectory = Vec<GridField>;

/// `K'(t) u0 + K(t) u1` at every time node.
pub fn linear_solution(problem: &NonlinearProblem, exec: Execution) -> Result<Trajectory> {
    let (u0, u1) = (problem.sample(&problem.u0)?, problem.sample(&problem.u1)?);
    let (a, b) = (u0.spectrum(), u1.spectrum());
    let xi = a.xi_norms();
    let g = problem.family.group();
    let times = problem.times();
    let out = exec::map(exec, &times, |&t| {
        let coeffs = a
            .coefficients()
            .iter()
            .zip(b.coefficients())
            .zip(&xi)
            .map(|((c0, c1), &x)| {
                let (cs, sn) = g.symbols(t, x);
                c0 * cs + c1 * sn
            })
            .collect();
        a.with_coefficients(coeffs).map(|s| s.to_field())
    });
    out.into_iter().collect()
}

/// `|u|^{1+kappa}` pointwise, transformed.
fn nonlinearity(u: &GridField, kappa: f64, iterate: usize) -> Result<Spectrum> {
    let mut values = Vec::with_capacity(u.values().len());
    for v in u.values() {
        let f = v.norm().powf(1.0 + kappa);
        if !f.is_finite() {
            return Err(Error::Overflow { iterate });
        }
        values.push(Complex64::new(f, 0.0));
    }
    Ok(u.with_values(values)?.spectrum())
}

/// `u_lin(t_i) - int_0^{t_i} K(t_i - tau) |u(tau)|^{1+kappa} dtau` with the
/// composite trapezoid rule on the time nodes, evaluated through cumulative
/// sums of `cos(omega tau) F` and `sin(omega tau) F`.
pub fn duhamel_map(
    problem: &NonlinearProblem,
    linear: &Trajectory,
    u: &Trajectory,
    iterate: usize,
    exec: Execution,
) -> Result<Trajectory> {
    let m = problem.steps;
    if u.len() != m + 1 || linear.len() != m + 1 {
        return Err(Error::InvalidSamples(format!("expected {} time nodes", m + 1)));
    }
    let h = problem.horizon / m as f64;
    let times = problem.times();
    let g = problem.family.group();
    let spectra: Vec<Result<Spectrum>> = exec::map(exec, u, |f| nonlinearity(f, problem.kappa, iterate));
    let spectra: Vec<Spectrum> = spectra.into_iter().collect::<Result<_>>()?;
    let xi = spectra[0].xi_norms();
    let omega: Vec<f64> = xi.iter().map(|&x| g.omega(x)).collect();
    let len = xi.len();

    // Running trapezoid sums of cos(omega tau_j) F_j and sin(omega tau_j) F_j
    // over nodes 0..i-1 with weights h/2 (node 0) and h; node i enters its own
    // row with h/2 and the running sums with h afterwards.
    let mut cum_c: Vec<Complex64> = spectra[0].coefficients().iter().map(|f| f * (0.5 * h)).collect();
    let mut cum_s = vec![Complex64::default(); len];
    let mut duhamel: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
    duhamel.push(vec![Complex64::default(); len]);
    for i in 1..=m {
        let t = times[i];
        let fi = spectra[i].coefficients();
        let mut row = Vec::with_capacity(len);
        for k in 0..len {
            let w = omega[k];
            let (s, c) = (w * t).sin_cos();
            let (ci, si) = (fi[k] * c, fi[k] * s);
            let c_sum = cum_c[k] + ci * (0.5 * h);
            let s_sum = cum_s[k] + si * (0.5 * h);
            // sin(omega (t - tau)) = sin(omega t) cos(omega tau) - cos(omega t) sin(omega tau)
            row.push((c_sum * s - s_sum * c) / w);
            cum_c[k] += ci * h;
            cum_s[k] += si * h;
        }
        duhamel.push(row);
    }
    let idx: Vec<usize> = (0..=m).collect();
    let out = exec::map(exec, &idx, |&i| {
        let d = spectra[0].with_coefficients(duhamel[i].clone())?.to_field();
        linear[i].sub(&d)
    });
    out.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PicardReport {
    pub problem: NonlinearProblem,
    /// `D_j = max_i ||u^(j)(t_i) - u^(j-1)(t_i)||_2`, `j >= 1`.
    pub increments: Vec<f64>,
    /// `rho_j = D_{j+1} / D_j` (0 when `D_j = 0`).
    pub ratios: Vec<f64>,
    /// `(int_0^T ||u^(j)||_{2+k}^{1+k} dt)^{1/(1+k)}` per iterate, `j >= 0`.
    pub mixed_norms: Vec<f64>,
    /// Three consecutive ratios `>= 1`.
    pub diverging: bool,
    pub verdict: Verdict,
}

pub struct PicardRun {
    pub iterates: Vec<Trajectory>,
    pub report: PicardReport,
}

impl PicardRun {
    pub fn last(&self) -> &Trajectory {
        self.iterates.last().expect("at least the linear iterate")
    }
}

fn max_difference(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        worst = worst.max(x.sub(y)?.lp_norm(2.0)?);
    }
    Ok(worst)
}

fn mixed_norm(problem: &NonlinearProblem, u: &Trajectory) -> Result<f64> {
    let p = 2.0 + problem.kappa;
    let values: Vec<(f64, f64)> = problem
        .times()
        .into_iter()
        .zip(u)
        .map(|(t, f)| f.lp_norm(p).map(|v| (t, v)))
        .collect::<Result<_>>()?;
    mixed_from_values(&values, 1.0 + problem.kappa)
}

/// `max_iters` Picard steps from the linear solution.
pub fn picard_iterate(problem: &NonlinearProblem, exec: Execution) -> Result<PicardRun> {
    problem.validate()?;
    problem.check_conditions()?;
    let linear = linear_solution(problem, exec)?;
    let mut iterates = vec![linear.clone()];
    let mut increments = Vec::new();
    for j in 1..=problem.max_iters {
        let next = duhamel_map(problem, &linear, &iterates[j - 1], j, exec)?;
        increments.push(max_difference(&next, &iterates[j - 1])?);
        iterates.push(next);
    }
    let ratios: Vec<f64> = increments
        .windows(2)
        .map(|w| if w[0] == 0.0 { 0.0 } else { w[1] / w[0] })
        .collect();
    let diverging = ratios.windows(3).any(|w| w.iter().all(|r| *r >= 1.0));
    let mixed_norms = iterates.iter().map(|u| mixed_norm(problem, u)).collect::<Result<_>>()?;
    let verdict = Verdict::from_bool(!ratios.is_empty() && ratios.iter().all(|r| *r < CONTRACTION));
    Ok(PicardRun {
        report: PicardReport {
            problem: problem.clone(),
            increments,
            ratios,
            mixed_norms,
            diverging,
            verdict,
        },
        iterates,
    })
}

/// `||u_M(T) - u_2M(T)||_2 / ||u_2M(T) - u_4M(T)||_2` for the last Picard
/// iterates at `M_t`, `2 M_t` and `4 M_t`.
pub fn refinement_ratio(problem: &NonlinearProblem, exec: Execution) -> Result<f64> {
    let mut finals = Vec::new();
    for f in [1, 2, 4] {
        let p = NonlinearProblem {
            steps: problem.steps * f,
            ..problem.clone()
        };
        let run = picard_iterate(&p, exec)?;
        finals.push(run.last().last().expect("time nodes").clone());
    }
    let a = finals[0].sub(&finals[1])?.lp_norm(2.0)?;
    let b = finals[1].sub(&finals[2])?.lp_norm(2.0)?;
    Ok(a / b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    /// Largest scale found to contract, if any.
    pub threshold: Option<f64>,
    /// Every `(scale, contracts)` evaluated, in order.
    pub trace: Vec<(f64, bool)>,
}

fn contracts(problem: &NonlinearProblem, scale: f64, exec: Execution) -> Result<bool> {
    let p = NonlinearProblem {
        data_scale: scale,
        max_iters: THRESHOLD_ITERS,
        ..problem.clone()
    };
    match picard_iterate(&p, exec) {
        Ok(run) => Ok(run.report.verdict.passed()),
        Err(Error::Overflow { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Bisection in `log(scale)` over `[lo, hi]` for the largest scale whose
/// ratios all stay below 1/2 over six iterations.
pub fn small_data_threshold(problem: &NonlinearProblem, lo: f64, hi: f64, steps: usize, exec: Execution) -> Result<ThresholdReport> {
    if !(lo > 0.0 && hi > lo) {
        return Err(out_of_range("scale bracket", format!("[{lo}, {hi}]")));
    }
    let mut trace = Vec::new();
    let hi_ok = contracts(problem, hi, exec)?;
    trace.push((hi, hi_ok));
    if hi_ok {
        return Ok(ThresholdReport { threshold: Some(hi), trace });
    }
    let lo_ok = contracts(problem, lo, exec)?;
    trace.push((lo, lo_ok));
    if !lo_ok {
        return Ok(ThresholdReport { threshold: None, trace });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..steps {
        let mid = (a * b).sqrt();
        let ok = contracts(problem, mid, exec)?;
        trace.push((mid, ok));
        if ok {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(ThresholdReport { threshold: Some(a), trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_powers() {
        assert!((critical_power_kg(3) - 1.0).abs() < 1e-14);
        assert!((critical_power_kg(2) - 2f64.sqrt()).abs() < 1e-14);
        assert!((critical_power_kg(1) - (1.0 + 17f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((critical_power_beam(4) - 2f64.sqrt()).abs() < 1e-14);
        assert!((critical_power_beam(2) - (1.0 + 17f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((critical_power_beam(8) - (-4.0 + 272f64.sqrt()) / 16.0).abs() < 1e-14);
        for n in 1..=8 {
            let nf = n as f64;
            let k = critical_power_kg(n);
            assert!((nf * k * k + (nf - 2.0) * k - 4.0).abs() < 1e-12);
            let k = critical_power_beam(n);
            assert!((nf * k * k + (nf - 4.0) * k - 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kg_conditions() {
        let c = kg_exponent_conditions(1, 3.0).unwrap();
        assert!((c.upper.lhs + 1.2).abs() < 1e-15 && (c.lower.lhs - 1.2).abs() < 1e-15);
        assert!((c.sigma.lhs - 0.9).abs() < 1e-15);
        assert!(c.all_hold && c.in_window);
        let c = kg_exponent_conditions(1, 2.0).unwrap();
        assert!((c.lower.lhs - 0.75).abs() < 1e-15 && !c.lower.holds && !c.all_hold);
        let c = kg_exponent_conditions(3, 1.0).unwrap();
        assert!(c.lower.critical && c.critical && !c.all_hold);
        assert!(kg_exponent_conditions(1, 0.0).is_err());
        let grid: Vec<f64> = (1..=800).map(|i| i as f64 * 0.01).collect();
        for n in 1..=8 {
            assert!(kg_window_mismatches(n, &grid).unwrap().is_empty(), "n={n}");
        }
    }

    #[test]
    fn beam_conditions() {
        let c = beam_exponent_conditions(2, 3.0, 2.0).unwrap();
        assert!((c.lower.lhs - 1.2).abs() < 1e-15 && (c.upper.lhs + 1.6).abs() < 1e-15);
        assert!((c.sigma - 0.7).abs() < 1e-15 && (c.s2 - 1.4).abs() < 1e-15);
        assert!(c.all_hold && c.in_window);
        let c = beam_exponent_conditions(2, 2.0, 2.0).unwrap();
        assert!((c.lower.lhs - 0.75).abs() < 1e-15 && !c.all_hold);
        let sigma = beam_exponent_conditions(2, 3.0, 2.0).unwrap().sigma;
        assert!(!beam_exponent_conditions(2, 3.0, sigma).unwrap().s_window);
    }

    fn small_kg() -> NonlinearProblem {
        NonlinearProblem {
            steps: 32,
            points: 128,
            ..NonlinearProblem::kg_1d()
        }
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let p = NonlinearProblem {
            u0: None,
            u1: None,
            ..small_kg()
        };
        let run = picard_iterate(&p, Execution::Sequential).unwrap();
        assert!(run.report.ratios.iter().all(|r| *r == 0.0));
        assert_eq!(run.iterates[1], run.iterates[0]);
        assert!(run.report.verdict.passed());
    }

    #[test]
    fn first_increment_is_homogeneous() {
        let d1 = |scale: f64| {
            let p = NonlinearProblem {
                data_scale: scale,
                max_iters: 1,
                ..small_kg()
            };
            picard_iterate(&p, Execution::Sequential).unwrap().report.increments[0]
        };
        let slope = (d1(1e-2) / d1(5e-3)).log2();
        assert!((slope - 4.0).abs() < 1e-9, "{slope}");
    }

    #[test]
    fn fixed_point_residual() {
        let p = small_kg();
        let run = picard_iterate(&p, Execution::Sequential).unwrap();
        let linear = linear_solution(&p, Execution::Sequential).unwrap();
        let again = duhamel_map(&p, &linear, run.last(), 99, Execution::Sequential).unwrap();
        let residual = max_difference(&again, run.last()).unwrap();
        let last = *run.report.increments.last().unwrap();
        assert!(residual <= last, "{residual} vs {last}");
        assert!(run.report.ratios.iter().all(|r| *r < CONTRACTION));
    }

    #[test]
    fn constant_data_matches_ode() {
        // Spatially constant u reduces to u'' + u = -|u|^4, u(0) = c, u'(0) = 0.
        let c = 0.5;
        let p = NonlinearProblem {
            horizon: 2.0,
            steps: 400,
            points: 8,
            length: 1.0,
            max_iters: 0,
            u0: None,
            u1: None,
            ..NonlinearProblem::kg_1d()
        };
        let times = p.times();
        let linear: Trajectory = times
            .iter()
            .map(|t| GridField::from_fn(1, 8, 1.0, |_| Complex64::new(c * t.cos(), 0.0)).unwrap())
            .collect();
        let mut u = linear.clone();
        for j in 0..30 {
            u = duhamel_map(&p, &linear, &u, j, Execution::Sequential).unwrap();
        }
        let f = |y: [f64; 2]| [y[1], -y[0] - y[0].abs().powi(4)];
        let mut y = [c, 0.0];
        let h = 1e-4;
        for _ in 0..20000 {
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let got = u.last().unwrap().values()[3];
        assert!((got.re - y[0]).abs() < 1e-5 && got.im.abs() < 1e-14, "{got} vs {}", y[0]);
    }

    #[test]
    fn inadmissible_problem_is_rejected() {
        let p = NonlinearProblem {
            kappa: 2.0,
            ..small_kg()
        };
        assert!(matches!(picard_iterate(&p, Execution::Sequential), Err(Error::Constraint(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let p = NonlinearProblem {
            data_scale: 1e80,
            ..small_kg()
        };
        assert!(matches!(picard_iterate(&p, Execution::Sequential), Err(Error::Overflow { .. })));
    }
}
