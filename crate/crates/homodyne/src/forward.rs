//! Forward maps from a state to its Wigner function, Fourier transform,
//! quadrature distribution p_rho(x, phi), and the noise-convolved density
//! observed at detection efficiency eta.
//!
//! Phase-sign convention: expanding the Radon transform of the Wigner
//! function in the Fock basis gives
//! `p_rho(x, phi) = sum_{m,n} rho_{m,n} h_m(x) h_n(x) e^{i phi (n - m)}`,
//! fixed once by requiring agreement with the numerically evaluated Radon
//! transform of `wigner_eval` (checked in the tests) and used everywhere.

use crate::error::{Error, Result};
use crate::quad::{integrate_adaptive, pairwise_sum};
use crate::specfun::{hermite_fn_seq, laguerre_fn_seq, minus_i_pow, FOURIER_WMN_SCALE};
use crate::state::DensityMatrix;
use num_complex::Complex64;

/// Gaussian detection-noise model with efficiency eta in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseModel {
    eta: f64,
}

impl NoiseModel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must lie in (0, 1], got {eta}"),
            });
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// gamma = (1 - eta) / (4 eta); zero iff eta = 1.
    pub fn gamma(&self) -> f64 {
        (1.0 - self.eta) / (4.0 * self.eta)
    }

    /// Standard deviation of the additive noise, sqrt((1 - eta)/2).
    pub fn noise_sd(&self) -> f64 {
        ((1.0 - self.eta) / 2.0).sqrt()
    }

    /// Variance of the rescaled noise on Y/sqrt(eta): (1 - eta)/(2 eta).
    pub fn rescaled_noise_var(&self) -> f64 {
        (1.0 - self.eta) / (2.0 * self.eta)
    }

    pub fn is_noiseless(&self) -> bool {
        self.eta == 1.0
    }
}

/// Integration half-width covering the Hermite mass of a dim-d state.
pub fn x_support(dim: usize) -> f64 {
    (2.0 * dim as f64 + 1.0).sqrt() + 6.0
}

/// Wigner function W_rho(q, p) = Re sum rho_{m,n} W_{m,n}(q, p).
///
/// The Hermitian pairing makes the imaginary part vanish; the residual is
/// asserted below 1e-10 as an internal consistency check.
pub fn wigner_eval(rho: &DensityMatrix, q: f64, p: f64) -> Result<f64> {
    let d = rho.dim();
    let z2 = q * q + p * p;
    let x = 2.0 * z2;
    let theta = p.atan2(-q);
    let e_itheta = Complex64::from_polar(1.0, theta);
    let inv_pi = 1.0 / std::f64::consts::PI;

    let mut acc = Complex64::new(0.0, 0.0);
    let mut phase = Complex64::new(1.0, 0.0);
    for alpha in 0..d {
        let seq = laguerre_fn_seq(alpha, x, d - alpha);
        for (n, lf) in seq.iter().enumerate() {
            let m = n + alpha;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let w_mn = phase * (sign * lf * inv_pi);
            if alpha == 0 {
                acc += rho.entry(n, n) * w_mn;
            } else {
                let t = rho.entry(m, n) * w_mn;
                acc += t + t.conj();
            }
        }
        phase *= e_itheta;
    }
    if acc.im.abs() >= 1e-10 {
        return Err(Error::Inconsistent(format!(
            "imaginary residual {} in Wigner evaluation",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// Fourier transform of the state's Wigner function under the crate
/// convention, via F[W_{m,n}](w) = pi (-i)^{m+n} W_{m,n}(w/2).
pub fn wigner_ft_eval(rho: &DensityMatrix, u: f64, v: f64) -> Complex64 {
    let d = rho.dim();
    let (qh, ph) = (0.5 * u, 0.5 * v);
    let z2 = qh * qh + ph * ph;
    let x = 2.0 * z2;
    let theta = ph.atan2(-qh);
    let e_itheta = Complex64::from_polar(1.0, theta);
    let inv_pi = 1.0 / std::f64::consts::PI;

    let mut acc = Complex64::new(0.0, 0.0);
    let mut phase = Complex64::new(1.0, 0.0);
    for alpha in 0..d {
        let seq = laguerre_fn_seq(alpha, x, d - alpha);
        for (n, lf) in seq.iter().enumerate() {
            let m = n + alpha;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let w_mn = phase * (sign * lf * inv_pi);
            // rho_{m,n} W~_{m,n} + rho_{n,m} W~_{n,m} = (-i)^{m+n} * 2 Re(rho_{m,n} w_mn)
            let pair_re = if alpha == 0 {
                rho.entry(n, n).re * w_mn.re
            } else {
                let t = rho.entry(m, n) * w_mn;
                t.re + t.re
            };
            acc += minus_i_pow(m + n) * (FOURIER_WMN_SCALE * pair_re);
        }
        phase *= e_itheta;
    }
    acc
}

fn check_phase(phi: f64) -> Result<()> {
    if !(0.0..=std::f64::consts::PI).contains(&phi) {
        return Err(Error::PhaseOutOfRange(phi));
    }
    Ok(())
}

/// Quadrature distribution p_rho(x, phi), the Radon transform of W_rho.
///
/// Computed through the Fock-basis bilinear form; negative round-off above
/// -1e-10 is clipped to zero, anything lower is an internal error.
pub fn quadrature_density(rho: &DensityMatrix, x: f64, phi: f64) -> Result<f64> {
    check_phase(phi)?;
    let h = hermite_fn_seq(rho.dim(), x);
    quadrature_density_with_hermite(rho, &h, phi)
}

/// Same as [`quadrature_density`] with precomputed Hermite values (hot
/// loops evaluate many angles at a fixed x).
pub fn quadrature_density_with_hermite(
    rho: &DensityMatrix,
    h: &[f64],
    phi: f64,
) -> Result<f64> {
    let d = rho.dim();
    debug_assert_eq!(h.len(), d);
    let e_miphi = Complex64::from_polar(1.0, -phi);
    let mut val = 0.0;
    for n in 0..d {
        val += rho.entry(n, n).re * h[n] * h[n];
    }
    let mut phase = Complex64::new(1.0, 0.0);
    for alpha in 1..d {
        phase *= e_miphi; // e^{-i alpha phi}
        let mut cross = Complex64::new(0.0, 0.0);
        for n in 0..d - alpha {
            cross += rho.entry(n + alpha, n) * (h[n + alpha] * h[n]);
        }
        val += 2.0 * (phase * cross).re;
    }
    if val < -1e-10 {
        return Err(Error::Inconsistent(format!(
            "quadrature density {val} below round-off floor at x={x:?}, phi={phi}",
            x = h.first()
        )));
    }
    Ok(val.max(0.0))
}

/// Density of the noisy observation Y given Phi = phi:
/// `(1/sqrt(eta)) p_rho(./sqrt(eta), phi) * N_eta` evaluated at y, by
/// adaptive Gauss quadrature of the convolution integral. Exact
/// pass-through to [`quadrature_density`] at eta = 1.
pub fn noisy_density(rho: &DensityMatrix, noise: &NoiseModel, y: f64, phi: f64) -> Result<f64> {
    check_phase(phi)?;
    if noise.is_noiseless() {
        return quadrature_density(rho, y, phi);
    }
    let eta = noise.eta();
    let var = (1.0 - eta) / 2.0;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    let half = x_support(rho.dim()).max(12.0);
    let mut err = None;
    let val = integrate_adaptive(
        |x| {
            let p = match quadrature_density(rho, x, phi) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            };
            let dev = y - eta.sqrt() * x;
            p * norm * (-0.5 * dev * dev / var).exp()
        },
        -half,
        half,
        8,
        1e-9,
        0.0,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(val),
    }
}

/// Report of the angle-integrated boundedness check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AngleBoundReport {
    /// sup_x of int_0^pi p_rho(x, phi) dphi
    pub sup_clean: f64,
    /// sup_x of int_0^pi (p_rho(., phi) * NN_eta)(x) dphi
    pub sup_noisy: f64,
    pub min_clean: f64,
    pub min_noisy: f64,
    pub grid_halfwidth: f64,
    pub grid_step: f64,
}

/// Verifies on an x-grid that the angle-integrated densities are bounded
/// and nonnegative; NN_eta is the Gaussian noise of the rescaled model
/// Y/sqrt(eta) with variance (1-eta)/(2 eta).
pub fn angle_integrated_bound_check(
    rho: &DensityMatrix,
    noise: &NoiseModel,
) -> Result<AngleBoundReport> {
    let d = rho.dim();
    let angles = (4 * d).max(64);
    let half = x_support(d);
    let step = 0.05;
    // angle integral of p at fixed x: uniform grid is exact for the
    // trigonometric polynomial of degree < angles
    let angle_integral = |x: f64| -> Result<f64> {
        let h = hermite_fn_seq(d, x);
        let mut parts = Vec::with_capacity(angles);
        for a in 0..angles {
            let phi = (a as f64 + 0.5) * std::f64::consts::PI / angles as f64;
            parts.push(quadrature_density_with_hermite(rho, &h, phi)?);
        }
        Ok(pairwise_sum(&parts) * std::f64::consts::PI / angles as f64)
    };

    // tabulate g on a wide grid, then convolve once (Fubini)
    let n_tab = (2.0 * half / step).ceil() as usize + 1;
    let mut g = Vec::with_capacity(n_tab);
    for i in 0..n_tab {
        g.push(angle_integral(-half + i as f64 * step)?);
    }

    let mut sup_clean = f64::NEG_INFINITY;
    let mut min_clean = f64::INFINITY;
    for &v in &g {
        sup_clean = sup_clean.max(v);
        min_clean = min_clean.min(v);
    }

    let (sup_noisy, min_noisy) = if noise.is_noiseless() {
        (sup_clean, min_clean)
    } else {
        let var = noise.rescaled_noise_var();
        let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
        let mut sup = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        let scan_half = half + 3.0 * var.sqrt();
        let mut x = -scan_half;
        while x <= scan_half {
            // trapezoid over the tabulated g
            let mut conv = 0.0;
            for (i, &gv) in g.iter().enumerate() {
                let t = -half + i as f64 * step;
                let w = if i == 0 || i == n_tab - 1 { 0.5 } else { 1.0 };
                let dev = x - t;
                conv += w * gv * norm * (-0.5 * dev * dev / var).exp() * step;
            }
            sup = sup.max(conv);
            min = min.min(conv);
            x += step;
        }
        (sup, min)
    };

    Ok(AngleBoundReport {
        sup_clean,
        sup_noisy,
        min_clean,
        min_noisy,
        grid_halfwidth: half,
        grid_step: step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_panels, integrate_panels_c};
    use crate::state::{make_state, StateKind};
    use approx::assert_abs_diff_eq;

    fn vacuum() -> DensityMatrix {
        make_state(StateKind::Fock(0), 4).unwrap()
    }

    #[test]
    fn noise_model_invariants() {
        assert!(NoiseModel::new(0.0).is_err());
        assert!(NoiseModel::new(1.1).is_err());
        let m = NoiseModel::new(1.0).unwrap();
        assert_eq!(m.gamma(), 0.0);
        assert_eq!(m.noise_sd(), 0.0);
        let m = NoiseModel::new(0.4).unwrap();
        assert_abs_diff_eq!(m.gamma(), 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(m.noise_sd(), 0.3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn wigner_examples() {
        let w = wigner_eval(&vacuum(), 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(w, (-1.0f64).exp() / std::f64::consts::PI, epsilon = 1e-13);
        let f1 = make_state(StateKind::Fock(1), 4).unwrap();
        assert_abs_diff_eq!(
            wigner_eval(&f1, 0.0, 0.0).unwrap(),
            -1.0 / std::f64::consts::PI,
            epsilon = 1e-13
        );
    }

    #[test]
    fn wigner_uniform_bound() {
        let states = [
            make_state(StateKind::Coherent(Complex64::new(0.5, 0.2)), 12).unwrap(),
            make_state(StateKind::Thermal(0.5), 20).unwrap(),
            make_state(StateKind::Fock(3), 6).unwrap(),
        ];
        for s in &states {
            for i in 0..25 {
                let q = -3.0 + 0.25 * i as f64;
                for j in 0..25 {
                    let p = -3.0 + 0.25 * j as f64;
                    let w = wigner_eval(s, q, p).unwrap();
                    assert!(w.abs() <= 1.0 / std::f64::consts::PI + 1e-10);
                }
            }
        }
    }

    #[test]
    fn wigner_integral_is_one() {
        // iint W = 1 within 1e-6 over a disc of radius 12 (polar quadrature)
        for s in [
            vacuum(),
            make_state(StateKind::Coherent(Complex64::new(0.5, 0.0)), 12).unwrap(),
            make_state(StateKind::Fock(2), 6).unwrap(),
        ] {
            let integral = integrate_panels(
                |r| {
                    let ang = integrate_panels(
                        |th| wigner_eval(&s, r * th.cos(), r * th.sin()).unwrap(),
                        0.0,
                        2.0 * std::f64::consts::PI,
                        8,
                    );
                    ang * r
                },
                0.0,
                12.0,
                24,
            );
            assert!(
                (integral - 1.0).abs() < 1e-6,
                "state {}: integral {integral}",
                s.label()
            );
        }
    }

    #[test]
    fn quadrature_density_examples() {
        let vac = vacuum();
        // p(0, phi) = h_0(0)^2 = 1/sqrt(pi), independent of phi
        for &phi in &[0.0, 0.7, 1.9, std::f64::consts::PI] {
            assert_abs_diff_eq!(
                quadrature_density(&vac, 0.0, phi).unwrap(),
                1.0 / std::f64::consts::PI.sqrt(),
                epsilon = 1e-13
            );
            assert_abs_diff_eq!(
                quadrature_density(&vac, 1.3, phi).unwrap(),
                quadrature_density(&vac, 1.3, 0.0).unwrap(),
                epsilon = 1e-14
            );
        }
        assert!(quadrature_density(&vac, 0.0, -0.1).is_err());
        assert!(quadrature_density(&vac, 0.0, 3.2).is_err());
    }

    #[test]
    fn quadrature_density_normalized() {
        let states = [
            make_state(StateKind::Coherent(Complex64::new(0.5, 0.3)), 12).unwrap(),
            make_state(StateKind::Fock(2), 6).unwrap(),
        ];
        for s in &states {
            for &phi in &[0.0, 0.9, 2.5] {
                let integral = integrate_panels(
                    |x| quadrature_density(s, x, phi).unwrap(),
                    -12.0,
                    12.0,
                    24,
                );
                assert!(
                    (integral - (1.0 - s.trace_deficit())).abs() < 1e-8,
                    "normalization failed for {} at phi={phi}: {integral}",
                    s.label()
                );
            }
        }
    }

    #[test]
    fn radon_consistency() {
        // p_rho(x, phi) matches the Radon transform of wigner_eval within
        // 1e-6 for dim <= 6 states (independent quadrature oracle)
        let states = [
            make_state(StateKind::Fock(2), 6).unwrap(),
            make_state(StateKind::Coherent(Complex64::new(0.4, 0.3)), 6).unwrap(),
        ];
        for s in &states {
            for &x in &[-1.2f64, 0.0, 0.8] {
                for &phi in &[0.3f64, 1.2, 2.8] {
                    let radon = integrate_panels(
                        |t| {
                            wigner_eval(
                                s,
                                x * phi.cos() - t * phi.sin(),
                                x * phi.sin() + t * phi.cos(),
                            )
                            .unwrap()
                        },
                        -11.0,
                        11.0,
                        22,
                    );
                    let direct = quadrature_density(s, x, phi).unwrap();
                    assert!(
                        (radon - direct).abs() < 1e-6,
                        "radon mismatch for {} at ({x},{phi}): {radon} vs {direct}",
                        s.label()
                    );
                }
            }
        }
    }

    #[test]
    fn noisy_density_vacuum_invariant_in_eta() {
        // Gaussian algebra: vacuum Y has variance 1/2 regardless of eta
        let vac = vacuum();
        for &eta in &[0.3, 0.7, 0.9] {
            let noise = NoiseModel::new(eta).unwrap();
            for &y in &[0.0, 0.6, -1.4] {
                let v = noisy_density(&vac, &noise, y, 1.0).unwrap();
                assert_abs_diff_eq!(
                    v,
                    (-y * y).exp() / std::f64::consts::PI.sqrt(),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn noisy_density_eta_one_passthrough() {
        let s = make_state(StateKind::Fock(1), 4).unwrap();
        let noise = NoiseModel::new(1.0).unwrap();
        for &y in &[0.0, 0.5, -2.0] {
            assert_eq!(
                noisy_density(&s, &noise, y, 0.4).unwrap(),
                quadrature_density(&s, y, 0.4).unwrap()
            );
        }
    }

    #[test]
    fn noisy_density_fourier_relation() {
        // F_1[p^eta](t) = F_1[p](t sqrt(eta)) e^{-(1-eta) t^2 / 4} for
        // fock(1), eta = 0.7, via two independent quadratures
        let s = make_state(StateKind::Fock(1), 4).unwrap();
        let noise = NoiseModel::new(0.7).unwrap();
        let phi = 0.9;
        let eta = 0.7f64;
        for &t in &[0.5, 1.0, 2.0, 3.5] {
            let lhs = integrate_panels_c(
                |y| {
                    Complex64::from_polar(1.0, t * y)
                        * noisy_density(&s, &noise, y, phi).unwrap()
                },
                -13.0,
                13.0,
                26,
            );
            let rhs = integrate_panels_c(
                |x| {
                    Complex64::from_polar(1.0, t * eta.sqrt() * x)
                        * quadrature_density(&s, x, phi).unwrap()
                },
                -13.0,
                13.0,
                26,
            ) * (-(1.0 - eta) * t * t / 4.0).exp();
            assert!(
                (lhs - rhs).norm() < 1e-6,
                "fourier relation failed at t={t}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn wigner_ft_matches_quadrature() {
        let s = make_state(StateKind::Coherent(Complex64::new(0.5, 0.0)), 10).unwrap();
        for &(u, v) in &[(0.0, 0.0), (1.0, 0.5), (2.5, -1.0)] {
            let direct = integrate_panels_c(
                |q| {
                    integrate_panels_c(
                        |p| {
                            Complex64::from_polar(1.0, -(u * q + v * p))
                                * wigner_eval(&s, q, p).unwrap()
                        },
                        -9.0,
                        9.0,
                        18,
                    )
                },
                -9.0,
                9.0,
                18,
            );
            let fast = wigner_ft_eval(&s, u, v);
            assert!(
                (fast - direct).norm() < 1e-6,
                "W~ mismatch at ({u},{v}): {fast} vs {direct}"
            );
        }
        // vacuum closed form e^{-|w|^2/4}
        let vac = vacuum();
        let f = wigner_ft_eval(&vac, 1.2, -0.7);
        let expect = (-(1.2f64 * 1.2 + 0.49) / 4.0).exp();
        assert_abs_diff_eq!(f.re, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(f.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn angle_integrated_bounds() {
        // vacuum: int_0^pi p dphi = pi e^{-x^2}/sqrt(pi), sup = sqrt(pi)
        let vac = vacuum();
        let noise = NoiseModel::new(0.8).unwrap();
        let rep = angle_integrated_bound_check(&vac, &noise).unwrap();
        assert_abs_diff_eq!(rep.sup_clean, std::f64::consts::PI.sqrt(), epsilon = 1e-10);
        assert!(rep.min_clean >= 0.0);
        assert!(rep.min_noisy >= 0.0);
        assert!(rep.sup_noisy.is_finite());
        // coherent(0.5) at eta = 0.8: bounds finite, integrands nonnegative
        let coh = make_state(StateKind::Coherent(Complex64::new(0.5, 0.0)), 12).unwrap();
        let rep = angle_integrated_bound_check(&coh, &noise).unwrap();
        assert!(rep.sup_clean.is_finite() && rep.sup_noisy.is_finite());
        assert!(rep.min_clean >= 0.0 && rep.min_noisy >= 0.0);
    }

    #[test]
    fn vacuum_decay_bound_r2() {
        // fock(0) in R(1, 2): |W| <= A(z) e^{-z^2/4} for z past a small z0
        let vac = vacuum();
        let beta = 0.25;
        let mut z = 1.0;
        while z <= 12.0 {
            let w = wigner_eval(&vac, z, 0.0).unwrap().abs();
            // A(z) >= 1/pi for the r=2 proposition's constant
            let a = (1.0 / std::f64::consts::PI)
                * (1.0 / (1.0 - (-1.0f64).exp()).powi(2)
                    + 2.0 * 1.0f64.exp() / (1.0 * (2.0f64).powi(2)) * z * z);
            assert!(w <= a * (-beta * z * z).exp() + 1e-12, "z={z}");
            z += 0.25;
        }
    }
}
