//! Bessel functions of the first kind for the orders met in radial Fourier
//! inversion, and the smooth bump pair behind the Littlewood-Paley projectors.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;

use crate::decay_fit::Verdict;
use crate::error::{out_of_range, Error, Result};

/// Largest supported order. Orders `(n-2)/2` for `n <= 3` plus a few steps of
/// the order-raising identity are all the toolkit needs.
pub const MAX_ORDER: f64 = 4.0;

/// Radius below which integer orders use the ascending series. Above it the
/// evaluation switches to backward recurrence and then the Hankel asymptotic.
const SERIES_LIMIT: f64 = 12.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// An integer or half-integer Bessel order `nu >= -1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BesselOrder {
    twice: i32,
}

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        let twice = 2.0 * nu;
        if !(twice.fract() == 0.0 && (-0.5..=MAX_ORDER).contains(&nu)) {
            return Err(Error::UnsupportedOrder(nu));
        }
        Ok(BesselOrder { twice: twice as i32 })
    }

    /// The order `(n-2)/2` of the radial Fourier transform in dimension `n`.
    pub fn for_dimension(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::UnsupportedDimension(n));
        }
        Self::new((n as f64 - 2.0) / 2.0)
    }

    pub fn nu(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// `J_nu(r)` for `r >= 0`, without argument checks.
    pub fn eval(self, r: f64) -> f64 {
        if self.is_integer() {
            integer_order(self.twice / 2, r)
        } else {
            half_integer_order(self.twice, r)
        }
    }

    /// `z^(-nu) J_nu(z)`, continuous at `z = 0` where it equals
    /// `1 / (2^nu Gamma(nu + 1))`.
    pub fn radial_factor(self, z: f64) -> f64 {
        match self.twice {
            -1 => (2.0 / PI).sqrt() * z.cos(),
            0 => integer_order(0, z),
            1 => (2.0 / PI).sqrt() * sinc(z),
            _ => {
                if z < 1e-8 {
                    self.radial_factor_at_origin()
                } else {
                    self.eval(z) / z.powf(self.nu())
                }
            }
        }
    }

    pub fn radial_factor_at_origin(self) -> f64 {
        1.0 / (2f64.powf(self.nu()) * gamma_of_half(self.twice + 2))
    }
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// `Gamma(twice / 2)` for positive integer `twice`.
fn gamma_of_half(twice: i32) -> f64 {
    debug_assert!(twice >= 1);
    let mut g = if twice % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if twice % 2 == 0 { 1.0 } else { 0.5 };
    while 2.0 * x < twice as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// `J_nu(r)` for a supported order and `r >= 0`.
pub fn bessel_j(nu: BesselOrder, r: f64) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(Error::NegativeRadius(r));
    }
    if r == 0.0 && nu.twice < 0 {
        return Err(out_of_range("radius", "J_{-1/2} is singular at r = 0"));
    }
    Ok(nu.eval(r))
}

/// Ascending series `sum_k (-1)^k (r/2)^(2k+nu) / (k! Gamma(k+nu+1))`.
fn series(twice: i32, r: f64) -> f64 {
    let nu = twice as f64 / 2.0;
    let half = r / 2.0;
    let mut term = half.powf(nu) / gamma_of_half(twice + 2);
    let mut sum = term;
    let q = half * half;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -q / (k * (k + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && k > half {
            break;
        }
        if k > 200.0 {
            break;
        }
    }
    sum
}

fn integer_order(n: i32, r: f64) -> f64 {
    if r == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if r <= SERIES_LIMIT.max(2.0 * n as f64) {
        series(2 * n, r)
    } else if r <= ASYMPTOTIC_LIMIT {
        miller(n, r)
    } else {
        let j0 = hankel_asymptotic(0, r);
        if n == 0 {
            return j0;
        }
        let j1 = hankel_asymptotic(1, r);
        // Upward recurrence is stable for r > n.
        let (mut prev, mut cur) = (j0, j1);
        for k in 1..n {
            let next = 2.0 * k as f64 / r * cur - prev;
            prev = cur;
            cur = next;
        }
        cur
    }
}

/// Miller's backward recurrence normalized by `J_0 + 2 sum J_{2k} = 1`.
fn miller(n: i32, r: f64) -> f64 {
    let start = 2 * ((r as i32 + 40 + n) / 2);
    let (mut next, mut cur) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / r * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds the unnormalized J_{k-1}.
        let idx = k - 1;
        if idx == n {
            wanted = cur;
        }
        if idx > 0 && idx % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += cur;
    wanted / norm
}

/// Hankel asymptotic expansion for `nu` in {0, 1}, accurate to rounding for `r > 25`.
fn hankel_asymptotic(nu: i32, r: f64) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * r);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let (s, c) = r.sin_cos();
    // cos/sin of r - pi/4 without subtracting an inexact multiple of pi.
    let cos_q = (c + s) * FRAC_1_SQRT_2;
    let sin_q = (s - c) * FRAC_1_SQRT_2;
    let (cos_chi, sin_chi) = if nu == 0 { (cos_q, sin_q) } else { (sin_q, -cos_q) };
    (2.0 / (PI * r)).sqrt() * (p * cos_chi - q * sin_chi)
}

fn half_integer_order(twice: i32, r: f64) -> f64 {
    if twice >= 1 && r <= 1.0 {
        return series(twice, r);
    }
    let pref = (2.0 / (PI * r)).sqrt();
    let (s, c) = r.sin_cos();
    let jm = pref * c; // J_{-1/2}
    if twice == -1 {
        return jm;
    }
    let mut prev = jm;
    let mut cur = pref * s; // J_{1/2}
    let mut nu = 0.5;
    for _ in 0..(twice - 1) / 2 {
        let next = 2.0 * nu / r * cur - prev;
        prev = cur;
        cur = next;
        nu += 1.0;
    }
    cur
}

// ---------------------------------------------------------------------------
// Bump pair

fn mollifier_step(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth radial cutoff: `1` on `[0, 1]`, `0` on `[2, inf)`, monotone in between.
pub fn phi_bump(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = mollifier_step(2.0 - r);
        a / (a + mollifier_step(r - 1.0))
    }
}

/// `Phi(r) - Phi(2r)`, supported in `[1/2, 2]`.
pub fn psi_bump(r: f64) -> f64 {
    phi_bump(r) - phi_bump(2.0 * r)
}

/// Symbol `psi(2^-k |xi|)` of the dyadic projector at scale `k`.
pub fn lp_symbol(k: i32, xi_norm: f64) -> f64 {
    psi_bump(xi_norm * 2f64.powi(-k))
}

/// The fixed bump pair `(Phi, psi)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BumpPair;

impl BumpPair {
    /// Highest derivative order whose vanishing at the plateau edges is tested.
    pub const SMOOTHNESS_WITNESS: usize = 3;
    /// Support of `psi`.
    pub const PSI_SUPPORT: (f64, f64) = (0.5, 2.0);
    /// `int_0^inf psi(r) dr`. Equals `int Phi / 2`, and `int Phi = 3/2` because
    /// `Phi(3/2 + x) + Phi(3/2 - x) = 1`.
    pub const PSI_INTEGRAL: f64 = 0.75;

    pub fn phi(self, r: f64) -> f64 {
        phi_bump(r)
    }

    pub fn psi(self, r: f64) -> f64 {
        psi_bump(r)
    }

    pub fn lp_symbol(self, k: i32, xi_norm: f64) -> f64 {
        lp_symbol(k, xi_norm)
    }

    /// `Phi(r) + sum_{k=1..K} psi(2^-k r)`, equal to one for `r <= 2^K`.
    pub fn partition_sum(self, r: f64, levels: u32) -> f64 {
        let mut sum = phi_bump(r);
        for k in 1..=levels as i32 {
            sum += lp_symbol(k, r);
        }
        sum
    }
}

/// Bessel's integral `J_n(r) = (1/pi) int_0^pi cos(n tau - r sin tau) dtau`
/// by the trapezoid rule, which converges geometrically for this periodic
/// integrand once the node count exceeds `r`. Independent of [`bessel_j`].
pub fn bessel_integral(n: i32, r: f64) -> f64 {
    let m = (r as usize + 64) * 2;
    let h = 2.0 * PI / m as f64;
    let mut s = 0.0;
    for i in 0..m {
        let tau = i as f64 * h;
        s += (n as f64 * tau - r * tau.sin()).cos();
    }
    s / m as f64
}

/// First positive zero of `J_0`.
pub const J0_FIRST_ZERO: f64 = 2.404825557695773;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BesselSelfTest {
    pub points: usize,
    /// Against Bessel's integral for `J_0`, `J_1`.
    pub max_error_integer: f64,
    /// Against the closed forms of `J_{1/2}`, `J_{3/2}`.
    pub max_error_half: f64,
    /// `d/dr (r^-nu J_nu) + r^-nu J_{nu+1}` by central differences.
    pub max_recurrence_error: f64,
    pub first_zero_value: f64,
    pub verdict: Verdict,
}

/// Checks `J_0, J_1, J_{1/2}, J_{3/2}` on `points` log-spaced radii in
/// `[1e-6, 1e4]` to `1e-10`, the order-raising identity to `1e-6`, and the
/// first zero of `J_0` to `1e-9`.
pub fn bessel_selftest(points: usize) -> Result<BesselSelfTest> {
    if points < 2 {
        return Err(out_of_range("points", format!("{points}")));
    }
    let radii: Vec<f64> = (0..points)
        .map(|i| 10f64.powf(-6.0 + 10.0 * i as f64 / (points - 1) as f64))
        .collect();
    let mut max_error_integer = 0.0f64;
    let mut max_error_half = 0.0f64;
    for &r in &radii {
        for n in [0, 1] {
            let got = bessel_j(BesselOrder::new(n as f64)?, r)?;
            max_error_integer = max_error_integer.max((got - bessel_integral(n, r)).abs());
        }
        let c = (2.0 / (PI * r)).sqrt();
        let (sn, cs) = r.sin_cos();
        let j_half = c * sn;
        let j_three_halves = if r < 1e-2 {
            // Series: sqrt(2/(pi r)) (r^2/3 - r^4/30 + r^6/840)
            c * (r * r / 3.0 - r.powi(4) / 30.0 + r.powi(6) / 840.0)
        } else {
            c * (sn / r - cs)
        };
        max_error_half = max_error_half
            .max((bessel_j(BesselOrder::new(0.5)?, r)? - j_half).abs())
            .max((bessel_j(BesselOrder::new(1.5)?, r)? - j_three_halves).abs());
    }
    let mut max_recurrence_error = 0.0f64;
    for nu in [0.0, 0.5, 1.0, 1.5] {
        let lo = BesselOrder::new(nu)?;
        let hi = BesselOrder::new(nu + 1.0)?;
        for r in [0.5, 1.0, 2.0, 5.0, 10.0, 50.0] {
            let h = 1e-5;
            let f = |x: f64| lo.eval(x) / x.powf(nu);
            let lhs = (f(r + h) - f(r - h)) / (2.0 * h);
            max_recurrence_error = max_recurrence_error.max((lhs + hi.eval(r) / r.powf(nu)).abs());
        }
    }
    let first_zero_value = bessel_j(BesselOrder::new(0.0)?, J0_FIRST_ZERO)?;
    let ok = max_error_integer < 1e-10 && max_error_half < 1e-10 && max_recurrence_error < 1e-6 && first_zero_value.abs() < 1e-9;
    Ok(BesselSelfTest {
        points,
        max_error_integer,
        max_error_half,
        max_recurrence_error,
        first_zero_value,
        verdict: Verdict::from_bool(ok),
    })
}
