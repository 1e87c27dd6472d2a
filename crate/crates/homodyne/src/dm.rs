//! Density-matrix estimation from noisy homodyne data: the empirical
//! pattern-function projection estimator, regime-dependent parameter
//! selection solving the optimal-tuning equations, and projection of raw
//! estimates onto the physical state space.
//!
//! The estimator averages `G_{j,k}(Y_l/sqrt(eta), Phi_l)` with
//! `G_{j,k}(x, phi) = f^{(regime)}_{j,k}(x) e^{+i(j-k) phi}`; the phase
//! sign is the one under which the angular average reproduces rho_{j,k}
//! (checked by the biorthogonality and unbiasedness tests).

use crate::error::{Error, Result};
use crate::forward::NoiseModel;
use crate::pattern::{PatternTable, Regime};
use crate::quad::pairwise_sum_c;
use crate::sampler::Dataset;
use crate::state::{DensityMatrix, StateClass};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

/// Selected estimator parameters: the index cutoff N (estimate all
/// j + k < N) and, in the severe-noise regime, the spectral cutoff delta.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DmTuning {
    /// Rounded cutoff, max(1, floor(n_exact)).
    pub n_coeff: usize,
    /// Spectral cutoff; present exactly when eta <= 1/2.
    pub delta: Option<f64>,
    /// Real-valued solution of the tuning equation before rounding.
    pub n_exact: f64,
    /// 1/delta before any feasibility adjustment.
    pub inv_delta_exact: Option<f64>,
    /// Residuals of the defining equations at the pre-rounding solution.
    pub residuals: Vec<f64>,
}

impl DmTuning {
    /// Explicit tuning, bypassing selection.
    pub fn explicit(n_coeff: usize, delta: Option<f64>) -> Result<Self> {
        if n_coeff == 0 {
            return Err(Error::InvalidParameter {
                name: "N",
                reason: "must be at least 1".into(),
            });
        }
        if let Some(d) = delta {
            if !(d > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "delta",
                    reason: format!("must be positive, got {d}"),
                });
            }
        }
        Ok(Self {
            n_coeff,
            delta,
            n_exact: n_coeff as f64,
            inv_delta_exact: delta.map(|d| 1.0 / d),
            residuals: vec![],
        })
    }

    pub fn regime(&self, noise: &NoiseModel) -> Result<Regime> {
        Regime::for_noise(noise, self.delta)
    }
}

fn check_n(n: f64) -> Result<(f64, f64)> {
    if !(n >= 3.0) {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need n >= 3 for log log n, got {n}"),
        });
    }
    Ok((n.ln(), n.ln().ln()))
}

/// Bisection on a bracketing interval; assumes f(lo) and f(hi) differ in
/// sign. Converges to ~1e-15 relative in the abscissa.
fn bisect(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Theory-driven selection of (N, delta) for sample size n.
///
/// eta = 1: N = (log n / 2B)^{2/r}. 1/2 < eta < 1: the closed r = 2 form,
/// or the solution of `8 gamma N + 2 B N^{r/2} = log n` for r < 2.
/// eta <= 1/2: the optimal-tuning 2x2 system, reduced by eliminating one
/// unknown through the difference of its two lines (which pins
/// `2 gamma / delta^2 + <bias exponent> = log n - (log log n)^2`) and
/// solving the remainder by safeguarded bisection; both residuals are
/// reported at the pre-rounding solution.
pub fn select_tuning(n: f64, noise: &NoiseModel, cls: &StateClass) -> Result<DmTuning> {
    let (ln_n, lln_n) = check_n(n)?;
    let eta = noise.eta();
    let gamma = noise.gamma();
    let b = cls.b;
    let r = cls.r;

    if eta == 1.0 {
        let n_exact = (ln_n / (2.0 * b)).powf(2.0 / r);
        return Ok(DmTuning {
            n_coeff: round_n(n_exact),
            delta: None,
            n_exact,
            inv_delta_exact: None,
            residuals: vec![0.0],
        });
    }

    if eta > 0.5 {
        let n_exact = if r == 2.0 {
            ln_n / (2.0 * (4.0 * gamma + b)) * (1.0 + (2.0 / 3.0) * lln_n / ln_n)
        } else {
            // 8 gamma N + 2 B N^{r/2} = log n, increasing in N
            let hi = ln_n / (8.0 * gamma) + 1.0;
            bisect(0.0, hi, |x| {
                8.0 * gamma * x + 2.0 * b * x.powf(r / 2.0) - ln_n
            })
        };
        let residual = if r == 2.0 {
            0.0
        } else {
            8.0 * gamma * n_exact + 2.0 * b * n_exact.powf(r / 2.0) - ln_n
        };
        return Ok(DmTuning {
            n_coeff: round_n(n_exact),
            delta: None,
            n_exact,
            inv_delta_exact: None,
            residuals: vec![residual],
        });
    }

    // severe noise: solve the system for (N, u) with u = 1/delta
    let beta = cls.beta;
    let ll2 = lln_n * lln_n;
    let gap = ln_n - ll2;
    if r < 2.0 && gap <= 0.0 {
        return Err(Error::NoBracket {
            what: "tuning system (log n below (log log n)^2)".into(),
            lo: 0.0,
            hi: gap,
        });
    }

    let (n_exact, u) = if r < 2.0 {
        // difference of the two system lines:
        //   2 gamma u^2 + 2 B N^{r/2} = gap  =>  N(u)
        let n_of_u = |u: f64| -> f64 {
            let v = (gap - 2.0 * gamma * u * u) / (2.0 * b);
            v.max(0.0).powf(2.0 / r)
        };
        // remaining (second) system line; it has two zero crossings and
        // the theorem's branch is the upper one, where the cutoff exceeds
        // 2 sqrt(N) -- bracket it by scanning down from u_max
        let line2 = |u: f64| -> f64 {
            let nn = n_of_u(u);
            2.0 * beta * (u / 2.0).powf(r) + 0.5 * (u - 2.0 * nn.sqrt()).powi(2)
                - 2.0 * b * nn.powf(r / 2.0)
                - ll2
        };
        let u_max = (gap / (2.0 * gamma)).sqrt();
        let mut hi = u_max;
        let mut lo = None;
        let steps = 400;
        for i in 1..=steps {
            let cand = u_max * (1.0 - i as f64 / steps as f64);
            if cand <= 0.0 {
                break;
            }
            if line2(cand) < 0.0 {
                lo = Some(cand);
                break;
            }
            hi = cand;
        }
        let lo = lo.ok_or(Error::NoBracket {
            what: "strong-noise tuning (r < 2)".into(),
            lo: 0.0,
            hi: u_max,
        })?;
        let u = bisect(lo, hi, line2);
        (n_of_u(u), u)
    } else {
        // r = 2 system; the second line has RHS 0, so the difference reads
        // 2 gamma u^2 + 2 B N + (4/3) log N = log n  =>  N(u)
        let n_of_u = |u: f64| -> f64 {
            let rhs = ln_n - 2.0 * gamma * u * u;
            let mut hi = (rhs.abs() / (2.0 * b)).max(1.0);
            while 2.0 * b * hi + (4.0 / 3.0) * hi.ln() < rhs {
                hi *= 2.0;
            }
            bisect(1e-12, hi, |x| 2.0 * b * x + (4.0 / 3.0) * x.ln() - rhs)
        };
        // strictly increasing in u (N(u) decreases), single root
        let line2 = |u: f64| -> f64 {
            let nn = n_of_u(u);
            beta * u * u / 2.0 + 0.5 * (u - 2.0 * nn.sqrt()).powi(2)
                - 2.0 * b * nn
                - 3.0 * nn.ln()
        };
        let u_max = (ln_n / (2.0 * gamma)).sqrt() - 1e-9;
        let (flo, fhi) = (line2(1e-6), line2(u_max));
        if flo.signum() == fhi.signum() {
            return Err(Error::NoBracket {
                what: "strong-noise tuning (r = 2)".into(),
                lo: 1e-6,
                hi: u_max,
            });
        }
        let u = bisect(1e-6, u_max, line2);
        (n_of_u(u), u)
    };

    // residuals of both original lines at the pre-rounding solution
    let (res1, res2) = if r < 2.0 {
        let common = 2.0 * beta * (u / 2.0).powf(r) + 0.5 * (u - 2.0 * n_exact.sqrt()).powi(2);
        (
            common + 2.0 * gamma * u * u - ln_n,
            common - 2.0 * b * n_exact.powf(r / 2.0) - ll2,
        )
    } else {
        let sq = 0.5 * (u - 2.0 * n_exact.sqrt()).powi(2);
        (
            (beta + 4.0 * gamma) * u * u / 2.0 + sq - (5.0 / 3.0) * n_exact.ln() - ln_n,
            beta * u * u / 2.0 + sq - 2.0 * b * n_exact - 3.0 * n_exact.ln(),
        )
    };

    let n_coeff = round_n(n_exact);
    // the theorem needs 1/delta >= 2 sqrt(N); rounding N up to 1 at tiny n
    // can violate it, so clamp the cutoff frequency upward if required
    let inv_delta = u.max(2.0 * (n_coeff as f64).sqrt());
    Ok(DmTuning {
        n_coeff,
        delta: Some(1.0 / inv_delta),
        n_exact,
        inv_delta_exact: Some(u),
        residuals: vec![res1, res2],
    })
}

fn round_n(n_exact: f64) -> usize {
    (n_exact.floor() as usize).max(1)
}

/// Empirical pattern-function estimate of the density matrix.
///
/// Returns a raw (Hermitian by construction, possibly non-positive,
/// trace != 1) matrix of dimension `tuning.n_coeff` with entries
/// j + k >= N zeroed. The per-record sum is chunked deterministically and
/// tree-reduced, so the result is thread-count independent.
pub fn estimate_dm(
    data: &Dataset,
    tuning: &DmTuning,
    table: &PatternTable,
) -> Result<DensityMatrix> {
    if data.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let noise = NoiseModel::new(data.eta)?;
    let regime = tuning.regime(&noise)?;
    if regime != table.regime() {
        return Err(Error::RegimeMismatch(format!(
            "table regime {:?} does not match data/tuning regime {:?}",
            table.regime(),
            regime
        )));
    }
    let n_coeff = tuning.n_coeff;
    if n_coeff > table.n_max() {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: format!("tuning N {} exceeds table N {}", n_coeff, table.n_max()),
        });
    }

    // pairs j >= k with j + k < N, in a fixed order
    let mut pairs = Vec::new();
    for t in 0..n_coeff {
        for k in 0..=t / 2 {
            pairs.push((t - k, k));
        }
    }
    let sqrt_eta = data.eta.sqrt();

    const CHUNK: usize = 4096;
    let partials: Vec<Vec<Complex64>> = data
        .records
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![Complex64::new(0.0, 0.0); pairs.len()];
            let mut phases = vec![Complex64::new(1.0, 0.0); n_coeff.max(1)];
            for rec in chunk {
                let u = rec.y / sqrt_eta;
                let e_iphi = Complex64::from_polar(1.0, rec.phi);
                for a in 1..n_coeff {
                    phases[a] = phases[a - 1] * e_iphi;
                }
                for (idx, &(j, k)) in pairs.iter().enumerate() {
                    let f = table.lookup(j, k, u);
                    acc[idx] += phases[j - k] * f;
                }
            }
            acc
        })
        .collect();

    // deterministic tree reduction over chunk partials
    let mut totals = vec![Complex64::new(0.0, 0.0); pairs.len()];
    for (idx, total) in totals.iter_mut().enumerate() {
        let column: Vec<Complex64> = partials.iter().map(|p| p[idx]).collect();
        *total = pairwise_sum_c(&column) / data.records.len() as f64;
    }

    let mut lower = vec![Complex64::new(0.0, 0.0); n_coeff * n_coeff];
    for (idx, &(j, k)) in pairs.iter().enumerate() {
        lower[j * n_coeff + k] = totals[idx];
    }
    Ok(DensityMatrix::raw_from_lower(
        n_coeff,
        |m, n| lower[m * n_coeff + n],
        format!("estimate[{}]", data.source_state_id),
    ))
}

/// Projection of a raw Hermitian estimate onto physical states:
/// eigendecompose, clip negative eigenvalues to zero, renormalize the
/// trace to one. Returns the projected state and the L2 distance moved.
pub fn project_physical(raw: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
    let eig = nalgebra::SymmetricEigen::new(raw.to_dmatrix());
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "raw",
            reason: "no positive spectral mass to renormalize".into(),
        });
    }
    let scaled = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        clipped.len(),
        clipped.iter().map(|&l| Complex64::new(l / total, 0.0)),
    ));
    let rebuilt = &eig.eigenvectors * scaled * eig.eigenvectors.adjoint();
    let dim = raw.dim();
    let projected = DensityMatrix::raw_from_lower(
        dim,
        |m, n| rebuilt[(m, n)],
        format!("projected[{}]", raw.label()),
    );
    let moved = raw.distance_sq(&projected)?.sqrt();
    let physical = DensityMatrix::physical(
        dim,
        projected.entries().to_vec(),
        format!("projected[{}]", raw.label()),
    )?;
    Ok((physical, moved))
}
