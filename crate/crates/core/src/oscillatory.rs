//! Composite Gauss-Legendre quadrature for `int a(r) e^{i p(r)} dr` on a
//! compact interval, with the panel count driven by the total phase variation.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{out_of_range, Error, Result};
use crate::exec::{self, Execution};

/// Nodes per panel.
pub const ORDER: usize = 16;
/// Panel floor.
pub const MIN_PANELS: usize = 32;
/// Samples of `|p'|` used to estimate the phase variation.
pub const VARIATION_SAMPLES: usize = 257;
/// Panel-count doublings attempted before the result is flagged.
pub const MAX_DOUBLINGS: usize = 2;

/// Panels evaluated per parallel task.
const PARALLEL_CHUNK: usize = 64;

/// Gauss-Legendre nodes and weights of order [`ORDER`] on `[-1, 1]`.
pub fn gauss_legendre() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut x = [0.0; ORDER];
        let mut w = [0.0; ORDER];
        for i in 0..n / 2 {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            if d != 0.0 {
                dp = d;
            }
            let wi = 2.0 / ((1.0 - z * z) * dp * dp);
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = wi;
            w[n - 1 - i] = wi;
        }
        (x, w)
    })
}

/// `P_n(z)` and `P_n'(z)` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Sum in a fixed balanced binary tree so the result does not depend on how
/// the terms were produced.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        len if len <= 8 => values.iter().sum(),
        len => {
            let (a, b) = values.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Panel count `max(32, 4 ceil(V / pi))` for a phase variation `V`.
pub fn panel_count(variation: f64) -> usize {
    let by_phase = 4.0 * (variation / std::f64::consts::PI).ceil();
    if by_phase.is_finite() && by_phase > MIN_PANELS as f64 {
        by_phase as usize
    } else {
        MIN_PANELS
    }
}

/// `int_lo^hi |p'(r)| dr` by the trapezoid rule on [`VARIATION_SAMPLES`] points.
pub fn phase_variation(dp: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let m = VARIATION_SAMPLES - 1;
    let h = (hi - lo) / m as f64;
    let mut s = 0.5 * (dp(lo).abs() + dp(hi).abs());
    for i in 1..m {
        s += dp(lo + i as f64 * h).abs();
    }
    s * h
}

/// Result of an oscillatory quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: Complex64,
    /// Difference between the last two panel levels.
    pub err_est: f64,
    /// False when `err_est` still exceeded the tolerance after the allowed doublings.
    pub converged: bool,
    /// Panel count of the returned value.
    pub panels: usize,
}

/// `int_{r_lo}^{r_hi} a(r) e^{i p(r)} dr` with `a` complex and `p` real.
pub struct OscillatoryIntegral<A, P, D> {
    amplitude: A,
    phase: P,
    phase_derivative: D,
    r_lo: f64,
    r_hi: f64,
    tol: f64,
    extra_variation: f64,
    exec: Execution,
}

impl<A, P, D> OscillatoryIntegral<A, P, D>
where
    A: Fn(f64) -> Complex64 + Sync,
    P: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    pub fn new(amplitude: A, phase: P, phase_derivative: D, r_lo: f64, r_hi: f64) -> Self {
        OscillatoryIntegral {
            amplitude,
            phase,
            phase_derivative,
            r_lo,
            r_hi,
            tol: 1e-10,
            extra_variation: 0.0,
            exec: Execution::default(),
        }
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Oscillation carried by the amplitude rather than the phase, e.g. the
    /// `sigma (r_hi - r_lo)` of a Bessel factor `J(r sigma)`.
    pub fn extra_variation(mut self, v: f64) -> Self {
        self.extra_variation = v;
        self
    }

    pub fn execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Estimated phase variation `V`, including the extra amplitude variation.
    pub fn variation(&self) -> f64 {
        phase_variation(&self.phase_derivative, self.r_lo, self.r_hi) + self.extra_variation
    }

    pub fn integrate(&self) -> Result<Quadrature> {
        if !(self.r_lo < self.r_hi) || !self.r_lo.is_finite() || !self.r_hi.is_finite() {
            return Err(out_of_range(
                "interval",
                format!("[{}, {}] is empty or unbounded", self.r_lo, self.r_hi),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(out_of_range("tolerance", format!("{} is not positive", self.tol)));
        }
        let variation = self.variation();
        if !variation.is_finite() {
            return Err(Error::NonFinite(self.r_lo));
        }
        let mut panels = panel_count(variation);
        let mut coarse = self.composite(panels)?;
        let mut err_est = f64::INFINITY;
        for _ in 0..MAX_DOUBLINGS {
            panels *= 2;
            let fine = self.composite(panels)?;
            err_est = (fine - coarse).norm();
            coarse = fine;
            if err_est <= self.tol {
                break;
            }
        }
        Ok(Quadrature {
            value: coarse,
            err_est,
            converged: err_est <= self.tol,
            panels,
        })
    }

    /// Fixed composite rule with `panels` equal panels.
    pub fn composite(&self, panels: usize) -> Result<Complex64> {
        let h = (self.r_hi - self.r_lo) / panels as f64;
        let chunks = panels.div_ceil(PARALLEL_CHUNK);
        let exec = if chunks > 1 { self.exec } else { Execution::Sequential };
        let ids: Vec<usize> = (0..chunks).collect();
        let sums = exec::map(exec, &ids, |&c| {
            let first = c * PARALLEL_CHUNK;
            let last = ((c + 1) * PARALLEL_CHUNK).min(panels);
            let mut out = Vec::with_capacity(last - first);
            for j in first..last {
                out.push(self.panel(self.r_lo + j as f64 * h, h)?);
            }
            Ok::<_, Error>(out)
        });
        let mut values = Vec::with_capacity(panels);
        for s in sums {
            values.extend(s?);
        }
        Ok(pairwise_sum(&values))
    }

    fn panel(&self, a: f64, h: f64) -> Result<Complex64> {
        let (x, w) = gauss_legendre();
        let half = 0.5 * h;
        let mid = a + half;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..ORDER {
            let r = mid + half * x[i];
            let f = (self.amplitude)(r) * Complex64::from_polar(1.0, (self.phase)(r));
            if !(f.re.is_finite() && f.im.is_finite()) {
                return Err(Error::NonFinite(r));
            }
            s += f * w[i];
        }
        Ok(s * half)
    }
}
