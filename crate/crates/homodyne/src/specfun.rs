//! Hermite functions, generalized Laguerre polynomials, the Wigner basis
//! functions `W_{m,n}`, their radial envelopes `l_{m,n}` and Fourier
//! transforms.
//!
//! All factorial ratios are carried in log space and the recurrences are
//! normalized so that every intermediate stays bounded up to total order
//! `m + n = 1024`; the raw Laguerre formula overflows near order 170.
//!
//! Fourier convention: throughout the crate the two-dimensional transform
//! is `F[W](u,v) = iint exp(-i(u q + v p)) W(q,p) dq dp` (no prefactor on
//! the forward transform). Under this convention
//! `F[W_{m,n}](u,v) = pi * (-i)^{m+n} W_{m,n}(u/2, v/2)`; the constant
//! [`FOURIER_WMN_SCALE`] = pi is frozen once and checked against direct
//! numeric quadrature in the tests.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Maximum polynomial order accepted by the recurrences.
pub const MAX_ORDER: usize = 1024;

/// Default cap for Hermite-function orders.
pub const DEFAULT_MAX_HERMITE: usize = 512;

/// Proportionality constant relating the crate's Fourier convention to the
/// half-argument Wigner-basis identity: `F[W_{m,n}] = FOURIER_WMN_SCALE *
/// (-i)^{m+n} W_{m,n}(u/2, p/2)`.
pub const FOURIER_WMN_SCALE: f64 = std::f64::consts::PI;

/// Index pair (m, n) of a Wigner basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisIndex {
    pub m: usize,
    pub n: usize,
}

impl BasisIndex {
    pub fn new(m: usize, n: usize) -> Self {
        Self { m, n }
    }

    /// s = sqrt(m + n + 1), the radial scale of the basis function.
    pub fn s(&self) -> f64 {
        ((self.m + self.n + 1) as f64).sqrt()
    }
}

fn check_order(requested: usize, max: usize) -> Result<()> {
    if requested > max {
        Err(Error::OrderOverflow { requested, max })
    } else {
        Ok(())
    }
}

/// Hermite function h_m(x) = (2^m m! sqrt(pi))^{-1/2} H_m(x) e^{-x^2/2}.
///
/// Evaluated by the normalized three-term recurrence
/// `h_{m+1} = x sqrt(2/(m+1)) h_m - sqrt(m/(m+1)) h_{m-1}`,
/// never by computing H_m and dividing by factorials.
pub fn hermite_fn(m: usize, x: f64) -> Result<f64> {
    check_order(m, DEFAULT_MAX_HERMITE)?;
    Ok(hermite_fn_seq(m + 1, x)[m])
}

/// All of h_0(x), ..., h_{count-1}(x) in one recurrence pass.
pub fn hermite_fn_seq(count: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(h0);
    if count == 1 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * x * h0);
    for m in 1..count - 1 {
        let mf = m as f64;
        let next = x * (2.0 / (mf + 1.0)).sqrt() * out[m] - (mf / (mf + 1.0)).sqrt() * out[m - 1];
        out.push(next);
    }
    out
}

/// Generalized Laguerre polynomial L_n^alpha(x) by the stable three-term
/// recurrence `(n+1) L_{n+1} = (2n+1+alpha-x) L_n - (n+alpha) L_{n-1}`.
pub fn laguerre(n: usize, alpha: usize, x: f64) -> Result<f64> {
    check_order(n + alpha, MAX_ORDER)?;
    let a = alpha as f64;
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Normalized Laguerre function
/// `lf_n^alpha(x) = sqrt(n!/(n+alpha)!) x^{alpha/2} e^{-x/2} L_n^alpha(x)`.
///
/// Bounded by 1 in modulus for x >= 0, which keeps every downstream
/// evaluation (Wigner basis, envelopes, pattern-function transforms) free
/// of overflow. The sequence covers n = 0..count-1 at fixed alpha.
pub fn laguerre_fn_seq(alpha: usize, x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let a = alpha as f64;
    let l0 = if x > 0.0 {
        (-0.5 * ln_factorial(alpha) + 0.5 * a * x.ln() - 0.5 * x).exp()
    } else if alpha == 0 {
        1.0
    } else {
        0.0
    };
    out.push(l0);
    if count == 1 {
        return out;
    }
    out.push((a + 1.0 - x) / (a + 1.0).sqrt() * l0);
    for n in 1..count - 1 {
        let nf = n as f64;
        let c1 = (2.0 * nf + 1.0 + a - x) / ((nf + 1.0) * (nf + 1.0 + a)).sqrt();
        let c2 = (nf * (nf + a) / ((nf + 1.0) * (nf + 1.0 + a))).sqrt();
        out.push(c1 * out[n] - c2 * out[n - 1]);
    }
    out
}

/// Single value of the normalized Laguerre function.
pub fn laguerre_fn(n: usize, alpha: usize, x: f64) -> f64 {
    laguerre_fn_seq(alpha, x, n + 1)[n]
}

/// ln(k!), exact 0 at k = 0, 1; cumulative log sums cached up to MAX_ORDER.
pub fn ln_factorial(k: usize) -> f64 {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(2 * MAX_ORDER + 2);
        t.push(0.0);
        let mut acc = 0.0;
        for i in 1..=2 * MAX_ORDER + 1 {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    });
    table[k]
}

/// Wigner basis function W_{m,n}(q, p).
///
/// For m >= n this is
/// `(-1)^m/pi sqrt(n!/m!) e^{-z^2} (sqrt(2)(ip-q))^{m-n} L_n^{m-n}(2z^2)`
/// with z^2 = q^2 + p^2, evaluated through the bounded normalized Laguerre
/// function; for m < n it returns the symmetry image W_{n,m}(q, -p).
pub fn wigner_basis(idx: BasisIndex, q: f64, p: f64) -> Complex64 {
    let (m, n, p) = if idx.m >= idx.n {
        (idx.m, idx.n, p)
    } else {
        (idx.n, idx.m, -p)
    };
    let alpha = m - n;
    let z2 = q * q + p * p;
    let radial = laguerre_fn(n, alpha, 2.0 * z2) / std::f64::consts::PI;
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    if alpha == 0 {
        return Complex64::new(sign * radial, 0.0);
    }
    // sqrt(2)(ip - q) = sqrt(2) z e^{i theta}, theta = atan2(p, -q); the
    // modulus is already inside the normalized Laguerre function.
    let theta = p.atan2(-q);
    let phase = Complex64::from_polar(1.0, alpha as f64 * theta);
    phase * sign * radial
}

/// Radial envelope l_{m,n}(z) = |W_{m,n}(q,p)| at z = sqrt(q^2+p^2).
///
/// Computed from the closed Laguerre form rather than |wigner_basis| so no
/// complex phase cancellation enters.
pub fn wigner_envelope(idx: BasisIndex, z: f64) -> f64 {
    let (m, n) = if idx.m >= idx.n {
        (idx.m, idx.n)
    } else {
        (idx.n, idx.m)
    };
    let alpha = m - n;
    laguerre_fn(n, alpha, 2.0 * z * z).abs() / std::f64::consts::PI
}

/// Upper bound of the envelope lemma: (1/pi) * min(1, e^{-(z-s)^2} for z >= s).
pub fn envelope_bound(idx: BasisIndex, z: f64) -> f64 {
    let s = idx.s();
    let e = if z >= s { (-(z - s) * (z - s)).exp() } else { 1.0 };
    e / std::f64::consts::PI
}

/// Fourier transform of W_{m,n} under the crate convention:
/// `F[W_{m,n}](u,v) = pi (-i)^{m+n} W_{m,n}(u/2, v/2)`.
pub fn wigner_basis_ft(idx: BasisIndex, u: f64, v: f64) -> Complex64 {
    let w = wigner_basis(idx, 0.5 * u, 0.5 * v);
    FOURIER_WMN_SCALE * minus_i_pow(idx.m + idx.n) * w
}

/// (-i)^k
pub fn minus_i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}
