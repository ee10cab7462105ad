//! Frequency-localized propagator kernels.
//!
//! For `n = 1` the kernel at scale `k` is
//! `I_k(x) = 2^k int e^{i 2^k x xi} e^{i t phi(2^k |xi|)} psi(|xi|) dxi`,
//! and for `n >= 2` the radial kernel is
//! `II_k(s) = 2^{kn} int e^{i t phi(2^k r)} psi(r) r^{n-1} (r sigma)^{-nu} J_nu(r sigma) dr`
//! with `sigma = 2^k s` and `nu = (n-2)/2`. Both take the physical coordinate.
//!
//! Single evaluations go through [`crate::oscillatory`]. Sweeps over many
//! spatial points reuse a precomputed node plan per panel level, since the
//! phase factor `e^{i t phi}` does not depend on the spatial point.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionRelation;
use crate::error::{out_of_range, Error, Result};
use crate::exec::{self, Execution};
use crate::oscillatory::{gauss_legendre, panel_count, phase_variation, OscillatoryIntegral, ORDER};
use crate::special::{psi_bump, BesselOrder, BumpPair};

/// Support of `psi`.
const R_LO: f64 = BumpPair::PSI_SUPPORT.0;
const R_HI: f64 = BumpPair::PSI_SUPPORT.1;
const WIDTH: f64 = R_HI - R_LO;

/// Quadrature tolerance relative to the trivial bound of the kernel.
pub const RELATIVE_TOL: f64 = 1e-10;

pub const SUPPORTED_DIMENSIONS: [usize; 3] = [1, 2, 3];

fn check_dimension(n: usize) -> Result<()> {
    if SUPPORTED_DIMENSIONS.contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

/// One kernel evaluation point. `x` is the signed coordinate for `n = 1` and
/// the radius `|x|` for `n >= 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelQuery {
    pub n: usize,
    pub k: i32,
    pub t: f64,
    pub x: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSample {
    pub query: KernelQuery,
    pub value: Complex64,
    pub err_est: f64,
    pub converged: bool,
}

impl KernelSample {
    /// `2^{-kn} |kernel|`, comparable across scales.
    pub fn normalized_abs(&self) -> f64 {
        self.value.norm() * 2f64.powi(-self.query.k * self.query.n as i32)
    }
}

/// `int_0^inf psi(r) r^{n-1} dr`.
pub fn psi_moment(n: usize) -> f64 {
    static MOMENTS: OnceLock<[f64; 3]> = OnceLock::new();
    let m = MOMENTS.get_or_init(|| {
        let mut out = [0.0; 3];
        for (i, slot) in out.iter_mut().enumerate() {
            let q = OscillatoryIntegral::new(
                move |r: f64| Complex64::new(psi_bump(r) * r.powi(i as i32), 0.0),
                |_| 0.0,
                |_| 0.0,
                R_LO,
                R_HI,
            )
            .tol(1e-15)
            .execution(Execution::Sequential);
            // Fixed fine rule; psi is smooth so this is at rounding level.
            *slot = q.composite(512).expect("finite bump moments").re;
        }
        out
    });
    m[n - 1]
}

/// Explicit constant `c` with `|kernel| <= 2^{kn} c` for every `t` and `x`.
pub fn trivial_constant(n: usize) -> Result<f64> {
    check_dimension(n)?;
    Ok(if n == 1 {
        2.0 * psi_moment(1)
    } else {
        psi_moment(n) * BesselOrder::for_dimension(n)?.radial_factor_at_origin()
    })
}

pub fn trivial_bound(n: usize, k: i32) -> Result<f64> {
    Ok(2f64.powi(k * n as i32) * trivial_constant(n)?)
}

fn scale(n: usize, k: i32) -> f64 {
    2f64.powi(k * n as i32)
}

/// `I_k(x)` for `n = 1`.
pub fn eval_kernel_1d(rel: &DispersionRelation, k: i32, t: f64, x: f64) -> Result<KernelSample> {
    let sigma = 2f64.powi(k) * x;
    let tol = 0.25 * RELATIVE_TOL * trivial_constant(1)?;
    let two_k = 2f64.powi(k);
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut converged = true;
    for sign in [1.0, -1.0] {
        let q = OscillatoryIntegral::new(
            |r: f64| Complex64::new(psi_bump(r), 0.0),
            |r: f64| t * rel.phi(two_k * r) + sign * sigma * r,
            |r: f64| t * two_k * rel.dphi(two_k * r) + sign * sigma,
            R_LO,
            R_HI,
        )
        .tol(tol)
        .integrate()?;
        value += q.value;
        err += q.err_est;
        converged &= q.converged;
    }
    Ok(KernelSample {
        query: KernelQuery { n: 1, k, t, x },
        value: value * two_k,
        err_est: err * two_k,
        converged,
    })
}

/// `II_k(s)` for `n >= 2`, physical radius `s`.
pub fn eval_kernel_radial(rel: &DispersionRelation, n: usize, k: i32, t: f64, s: f64) -> Result<KernelSample> {
    if n < 2 {
        return Err(out_of_range("dimension", "radial kernel needs n >= 2"));
    }
    check_dimension(n)?;
    if !(s >= 0.0) {
        return Err(Error::NegativeRadius(s));
    }
    let two_k = 2f64.powi(k);
    let q = unit_scale_integral(
        n,
        two_k * s,
        |r| t * rel.phi(two_k * r),
        |r| t * two_k * rel.dphi(two_k * r),
    )?;
    let sc = scale(n, k);
    Ok(KernelSample {
        query: KernelQuery { n, k, t, x: s },
        value: q.value * sc,
        err_est: q.err_est * sc,
        converged: q.converged,
    })
}

/// The scale-free radial integral
/// `int e^{i p(r)} psi(r) r^{n-1} (r sigma)^{-nu} J_nu(r sigma) dr` for an arbitrary phase.
pub fn unit_scale_integral(
    n: usize,
    sigma: f64,
    phase: impl Fn(f64) -> f64 + Sync,
    phase_derivative: impl Fn(f64) -> f64 + Sync,
) -> Result<crate::oscillatory::Quadrature> {
    check_dimension(n)?;
    let order = BesselOrder::for_dimension(n)?;
    let tol = RELATIVE_TOL * trivial_constant(n)?;
    OscillatoryIntegral::new(
        move |r: f64| Complex64::new(psi_bump(r) * r.powi(n as i32 - 1) * order.radial_factor(r * sigma), 0.0),
        phase,
        phase_derivative,
        R_LO,
        R_HI,
    )
    .tol(tol)
    .extra_variation(sigma * WIDTH)
    .integrate()
}

/// Dispatches on the dimension.
pub fn eval_kernel(rel: &DispersionRelation, q: KernelQuery) -> Result<KernelSample> {
    if q.n == 1 {
        eval_kernel_1d(rel, q.k, q.t, q.x)
    } else {
        eval_kernel_radial(rel, q.n, q.k, q.t, q.x)
    }
}

/// `4 |t| max_{r in [1/2, 2]} |phi'(2^k r)|`: the physical radius beyond which
/// the kernel at scale `k` has no stationary point.
pub fn stationary_radius(rel: &DispersionRelation, k: i32, t: f64) -> f64 {
    let two_k = 2f64.powi(k);
    let m = 256;
    let mut best = 0.0f64;
    for i in 0..=m {
        let r = R_LO + WIDTH * i as f64 / m as f64;
        best = best.max(rel.dphi(two_k * r).abs());
    }
    4.0 * t.abs() * best
}

// ---------------------------------------------------------------------------
// Node plans for sweeps

/// Quadrature nodes and phase-weighted amplitudes for one `(k, panels)` pair.
struct Plan {
    nodes: Vec<f64>,
    amps: Vec<Complex64>,
}

impl Plan {
    fn build(rel: &DispersionRelation, n: usize, k: i32, t: f64, panels: usize) -> Result<Plan> {
        let (x, w) = gauss_legendre();
        let two_k = 2f64.powi(k);
        let h = WIDTH / panels as f64;
        let half = 0.5 * h;
        let mut nodes = Vec::with_capacity(panels * ORDER);
        let mut amps = Vec::with_capacity(panels * ORDER);
        for j in 0..panels {
            let mid = R_LO + (j as f64 + 0.5) * h;
            for i in 0..ORDER {
                let r = mid + half * x[i];
                let a = w[i] * half * psi_bump(r) * r.powi(n as i32 - 1);
                let amp = Complex64::from_polar(a, t * rel.phi(two_k * r));
                if !(amp.re.is_finite() && amp.im.is_finite()) {
                    return Err(Error::NonFinite(r));
                }
                if a != 0.0 {
                    nodes.push(r);
                    amps.push(amp);
                }
            }
        }
        Ok(Plan { nodes, amps })
    }

    /// Unscaled integral at rescaled radius `sigma`.
    fn eval(&self, n: usize, order: BesselOrder, sigma: f64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        if n == 1 {
            for (r, a) in self.nodes.iter().zip(&self.amps) {
                s += a * (2.0 * (r * sigma).cos());
            }
        } else {
            for (r, a) in self.nodes.iter().zip(&self.amps) {
                s += a * order.radial_factor(r * sigma);
            }
        }
        s
    }
}

/// Kernel, or sum of kernels over several scales, evaluated on many points.
struct Sweep<'a> {
    rel: &'a DispersionRelation,
    n: usize,
    t: f64,
    order: BesselOrder,
    /// Per scale: `(k, phase variation of t phi(2^k r) on the support)`.
    scales: Vec<(i32, f64)>,
    plans: BTreeMap<(i32, usize), Plan>,
    exec: Execution,
}

impl<'a> Sweep<'a> {
    fn new(rel: &'a DispersionRelation, n: usize, t: f64, ks: &[i32], exec: Execution) -> Result<Self> {
        check_dimension(n)?;
        let scales = ks
            .iter()
            .map(|&k| {
                let two_k = 2f64.powi(k);
                (k, phase_variation(|r| t * two_k * rel.dphi(two_k * r), R_LO, R_HI))
            })
            .collect();
        Ok(Sweep {
            rel,
            n,
            t,
            order: BesselOrder::for_dimension(n)?,
            scales,
            plans: BTreeMap::new(),
            exec,
        })
    }

    /// Panel level for scale `k` at physical radius `s`: the panel-count rule
    /// rounded up to a power of two so nearby points share a plan.
    fn level(&self, vt: f64, k: i32, s: f64) -> usize {
        let sigma = 2f64.powi(k) * s.abs();
        panel_count(vt + sigma * WIDTH).next_power_of_two()
    }

    fn ensure(&mut self, points: &[f64], refine: u32) -> Result<()> {
        let mut needed = Vec::new();
        for &(k, vt) in &self.scales {
            for &s in points {
                let key = (k, self.level(vt, k, s) << refine);
                if !self.plans.contains_key(&key) && !needed.contains(&key) {
                    needed.push(key);
                }
            }
        }
        let (rel, n, t) = (self.rel, self.n, self.t);
        let built = exec::map(self.exec, &needed, |&(k, panels)| Plan::build(rel, n, k, t, panels));
        for (key, plan) in needed.into_iter().zip(built) {
            self.plans.insert(key, plan?);
        }
        Ok(())
    }

    /// Physical value at `s`, using plans refined by `2^refine`.
    fn value(&self, s: f64, refine: u32) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for &(k, vt) in &self.scales {
            let plan = &self.plans[&(k, self.level(vt, k, s) << refine)];
            let mut v = plan.eval(self.n, self.order, 2f64.powi(k) * s);
            v *= if self.n == 1 { 2f64.powi(k) } else { scale(self.n, k) };
            total += v;
        }
        total
    }

    fn values(&mut self, points: &[f64], refine: u32) -> Result<Vec<Complex64>> {
        self.ensure(points, refine)?;
        let this = &*self;
        Ok(exec::map(self.exec, points, |&s| this.value(s, refine)))
    }
}

/// Spatial grid for sup-norm searches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupGrid {
    pub linear: usize,
    pub log: usize,
    pub refine: usize,
    /// Overrides the stationary radius when set.
    pub s_max: Option<f64>,
    pub exec: Execution,
}

impl Default for SupGrid {
    fn default() -> Self {
        SupGrid {
            linear: 256,
            log: 512,
            refine: 64,
            s_max: None,
            exec: Execution::default(),
        }
    }
}

impl SupGrid {
    /// `linear` points on `[0, 2]` followed by `log` geometric points on `(2, s_max]`.
    pub fn points(&self, s_max: f64) -> Result<Vec<f64>> {
        if self.linear < 2 || !(s_max.is_finite() && s_max > 0.0) {
            return Err(out_of_range(
                "sup grid",
                format!("{} linear points, s_max = {s_max}", self.linear),
            ));
        }
        let mut pts: Vec<f64> = (0..self.linear).map(|i| 2.0 * i as f64 / (self.linear - 1) as f64).collect();
        if s_max > 2.0 && self.log > 0 {
            let ratio = (s_max / 2.0).ln() / self.log as f64;
            pts.extend((1..=self.log).map(|i| 2.0 * (ratio * i as f64).exp()));
        }
        Ok(pts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupNorm {
    pub value: f64,
    pub argmax: f64,
    /// Change of the kernel at the argmax under one further panel doubling.
    pub err_est: f64,
    pub converged: bool,
    pub s_max: f64,
    pub points: usize,
}

/// Profile of the kernel on the sup grid, followed by the refined points.
#[derive(Clone, Debug)]
pub struct KernelProfile {
    pub samples: Vec<KernelSample>,
    pub sup: SupNorm,
}

fn search(
    sweep: &mut Sweep,
    grid: &SupGrid,
    s_max: f64,
    tol: f64,
    mk_query: impl Fn(f64) -> KernelQuery,
) -> Result<KernelProfile> {
    let mut points = grid.points(s_max)?;
    let mut values = sweep.values(&points, 0)?;
    let (imax, _) = argmax(&values);
    if grid.refine > 0 {
        let lo = points[imax.saturating_sub(1)];
        let hi = points[(imax + 1).min(points.len() - 1)];
        let local: Vec<f64> = (1..=grid.refine)
            .map(|i| lo + (hi - lo) * i as f64 / (grid.refine + 1) as f64)
            .collect();
        let local_values = sweep.values(&local, 0)?;
        points.extend(local);
        values.extend(local_values);
    }
    let (imax, _) = argmax(&values);
    let at = points[imax];
    let mut coarse = values[imax];
    let mut err_est = f64::INFINITY;
    for refine in 1..=2 {
        let fine = sweep.values(&[at], refine)?[0];
        err_est = (fine - coarse).norm();
        coarse = fine;
        if err_est <= tol {
            break;
        }
    }
    values[imax] = coarse;
    let samples = points
        .iter()
        .zip(&values)
        .map(|(&x, &value)| KernelSample {
            query: mk_query(x),
            value,
            err_est: if x == at { err_est } else { f64::NAN },
            converged: true,
        })
        .collect::<Vec<_>>();
    Ok(KernelProfile {
        sup: SupNorm {
            value: coarse.norm(),
            argmax: at,
            err_est,
            converged: err_est <= tol,
            s_max,
            points: points.len(),
        },
        samples,
    })
}

fn argmax(values: &[Complex64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.iter().enumerate() {
        let a = v.norm();
        if a > best.1 {
            best = (i, a);
        }
    }
    best
}

/// Kernel on the hybrid grid `[0, 2] + [2, S_max]` with one local refinement
/// around the largest value. The kernel is even in `x` for `n = 1`, so only
/// `x >= 0` is sampled.
pub fn kernel_profile(rel: &DispersionRelation, n: usize, k: i32, t: f64, grid: &SupGrid) -> Result<KernelProfile> {
    if t == 0.0 || !t.is_finite() {
        return Err(out_of_range("time", format!("sup-norm search needs finite t != 0, got {t}")));
    }
    let s_max = grid.s_max.unwrap_or_else(|| stationary_radius(rel, k, t)).max(4.0);
    let mut sweep = Sweep::new(rel, n, t, &[k], grid.exec)?;
    let tol = RELATIVE_TOL * trivial_bound(n, k)?;
    search(&mut sweep, grid, s_max, tol, |x| KernelQuery { n, k, t, x })
}

pub fn sup_norm(rel: &DispersionRelation, n: usize, k: i32, t: f64, grid: &SupGrid) -> Result<SupNorm> {
    Ok(kernel_profile(rel, n, k, t, grid)?.sup)
}

/// Lowest scale needed so that the geometric tail `sum_{j < k} 2^{jn} c` stays below `tol / 2`.
pub fn low_freq_cutoff(n: usize, tol: f64) -> Result<(i32, f64)> {
    let c = trivial_constant(n)?;
    if !(tol > 0.0) {
        return Err(out_of_range("tolerance", format!("{tol} is not positive")));
    }
    let ratio = 2f64.powi(-(n as i32));
    let mut k = 0;
    loop {
        // tail of the scales strictly below k
        let tail = c * 2f64.powi((k - 1) * n as i32) / (1.0 - ratio);
        if tail < tol / 2.0 {
            return Ok((k, tail));
        }
        k -= 1;
    }
}

/// `sum_{k <= 0} kernel_k` at one point, truncated where the trivial bound certifies the tail.
pub fn low_freq_kernel(rel: &DispersionRelation, n: usize, t: f64, x: f64, tol: f64) -> Result<KernelSample> {
    let (k_min, tail) = low_freq_cutoff(n, tol)?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = tail;
    let mut converged = true;
    for k in (k_min..=0).rev() {
        let s = eval_kernel(rel, KernelQuery { n, k, t, x })?;
        value += s.value;
        err += s.err_est;
        converged &= s.converged;
    }
    Ok(KernelSample {
        query: KernelQuery { n, k: 0, t, x },
        value,
        err_est: err,
        converged,
    })
}

/// Sup-norm of the summed low-frequency kernel. The search radius is the
/// largest stationary radius over the summed scales.
pub fn low_freq_profile(rel: &DispersionRelation, n: usize, t: f64, tol: f64, grid: &SupGrid) -> Result<KernelProfile> {
    if t == 0.0 || !t.is_finite() {
        return Err(out_of_range("time", format!("sup-norm search needs finite t != 0, got {t}")));
    }
    let (k_min, tail) = low_freq_cutoff(n, tol)?;
    let ks: Vec<i32> = (k_min..=0).rev().collect();
    let s_max = grid
        .s_max
        .unwrap_or_else(|| ks.iter().map(|&k| stationary_radius(rel, k, t)).fold(0.0, f64::max))
        .max(4.0);
    let mut sweep = Sweep::new(rel, n, t, &ks, grid.exec)?;
    let mut profile = search(&mut sweep, grid, s_max, tol / 2.0, |x| KernelQuery { n, k: 0, t, x })?;
    profile.sup.err_est += tail;
    Ok(profile)
}

pub fn low_freq_sup_norm(rel: &DispersionRelation, n: usize, t: f64, tol: f64, grid: &SupGrid) -> Result<SupNorm> {
    Ok(low_freq_profile(rel, n, t, tol, grid)?.sup)
}

/// CSV rows `n,k,t,s,re,im,abs,err_est`.
pub fn write_csv(samples: &[KernelSample], out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "n,k,t,s,re,im,abs,err_est")?;
    for s in samples {
        let q = s.query;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            q.n,
            q.k,
            q.t,
            q.x,
            s.value.re,
            s.value.im,
            s.value.norm(),
            s.err_est
        )?;
    }
    Ok(())
}
