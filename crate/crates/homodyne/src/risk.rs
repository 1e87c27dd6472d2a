//! Monte-Carlo risk benchmarking: MISE with its bias/variance
//! decomposition, rate-curve fitting, and numeric verification of the
//! decay propositions and the series-tail bound.

use crate::dm::{estimate_dm, select_tuning, DmTuning};
use crate::error::{Error, Result};
use crate::forward::{wigner_eval, wigner_ft_eval, NoiseModel};
use crate::pattern::{PatternTable, Regime};
use crate::quad::{integrate_panels, linear_fit};
use crate::sampler::sample;
use crate::state::{class_check, DensityMatrix, StateClass};
use crate::wigner::{estimate_wigner, select_wigner_tuning, GridParams, WignerTuning};
use num_complex::Complex64;
use rayon::prelude::*;

/// Which estimator a risk report concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EstimatorKind {
    Dm,
    Wigner,
}

/// One Monte-Carlo cell: fixed sample size, R replications.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RiskCell {
    pub n: usize,
    pub replications: usize,
    pub mise_mean: f64,
    pub mise_sd: f64,
    /// truncation bias (mass of the truth outside the estimated window)
    pub b1_sq: f64,
    /// regularization bias (squared distance of the replication mean)
    pub b2_sq: f64,
    /// Monte-Carlo variance across replications
    pub sigma_sq: f64,
}

/// Rate-fit summary on transformed axes.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// A full benchmarking report.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RiskReport {
    pub estimator_kind: EstimatorKind,
    pub cells: Vec<RiskCell>,
    pub rate_fit: Option<RateFit>,
}

/// Replication seeds derived deterministically from a master seed.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(rep as u64 + 1))
}

/// Configuration of a density-matrix MISE cell.
#[derive(Debug, Clone)]
pub struct DmRiskConfig {
    pub n: usize,
    pub replications: usize,
    pub noise: NoiseModel,
    pub tuning: DmTuning,
    pub master_seed: u64,
}

/// Monte-Carlo MISE of the density-matrix estimator with its exact
/// decomposition: mise_mean = b1^2 + b2^2 + sigma^2 up to rounding, since
/// the variance uses the 1/R convention.
pub fn dm_mise(truth: &DensityMatrix, cfg: &DmRiskConfig, table: &PatternTable) -> Result<RiskCell> {
    if cfg.replications < 2 {
        return Err(Error::InvalidParameter {
            name: "replications",
            reason: "need at least 2".into(),
        });
    }
    if truth.is_raw() {
        return Err(Error::InvalidParameter {
            name: "truth",
            reason: "truth must be a physical state".into(),
        });
    }
    let n_coeff = cfg.tuning.n_coeff;
    let dim = truth.dim().max(n_coeff);
    let truth_e = truth.embed(dim);

    let estimates: Result<Vec<DensityMatrix>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let data = sample(
                truth,
                &cfg.noise,
                cfg.n,
                replication_seed(cfg.master_seed, rep),
            )?;
            Ok(estimate_dm(&data, &cfg.tuning, table)?.embed(dim))
        })
        .collect();
    let estimates = estimates?;

    let mises: Vec<f64> = estimates
        .iter()
        .map(|est| est.distance_sq(&truth_e))
        .collect::<Result<_>>()?;
    let r = cfg.replications as f64;
    let mise_mean = mises.iter().sum::<f64>() / r;
    let mise_sd = (mises.iter().map(|m| (m - mise_mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();

    // decomposition over cells: truncation part from the truth alone
    let mut b1_sq = 0.0;
    for m in 0..dim {
        for n in 0..dim {
            if m + n >= n_coeff {
                b1_sq += truth_e.entry(m, n).norm_sqr();
            }
        }
    }
    let mut b2_sq = 0.0;
    let mut sigma_sq = 0.0;
    for m in 0..dim {
        for n in 0..dim {
            if m + n >= n_coeff {
                continue;
            }
            let mean = estimates
                .iter()
                .fold(Complex64::new(0.0, 0.0), |a, e| a + e.entry(m, n))
                / r;
            b2_sq += (mean - truth_e.entry(m, n)).norm_sqr();
            sigma_sq += estimates
                .iter()
                .map(|e| (e.entry(m, n) - mean).norm_sqr())
                .sum::<f64>()
                / r;
        }
    }

    Ok(RiskCell {
        n: cfg.n,
        replications: cfg.replications,
        mise_mean,
        mise_sd,
        b1_sq,
        b2_sq,
        sigma_sq,
    })
}

/// Configuration of a Wigner MISE cell.
#[derive(Debug, Clone)]
pub struct WignerRiskConfig {
    pub n: usize,
    pub replications: usize,
    pub noise: NoiseModel,
    pub tuning: WignerTuning,
    /// grid step; defaults to the estimator's h/2
    pub step: Option<f64>,
    pub master_seed: u64,
}

/// Monte-Carlo MISE of the truncated Wigner estimator. The disc-interior
/// part uses the midpoint rule on the estimator's grid; the truth's mass
/// outside the disc (the truncation term b1) is integrated in polar
/// coordinates out to where the state's Wigner function is negligible.
pub fn wigner_mise(truth: &DensityMatrix, cfg: &WignerRiskConfig) -> Result<RiskCell> {
    if cfg.replications < 2 {
        return Err(Error::InvalidParameter {
            name: "replications",
            reason: "need at least 2".into(),
        });
    }
    let grids: Result<Vec<_>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let data = sample(
                truth,
                &cfg.noise,
                cfg.n,
                replication_seed(cfg.master_seed, rep),
            )?;
            estimate_wigner(
                &data,
                &cfg.tuning,
                GridParams {
                    half_width: None,
                    step: cfg.step,
                },
            )
        })
        .collect();
    let grids = grids?;
    let proto = &grids[0];
    let nx = proto.nx;
    let cell = proto.step * proto.step;
    let s_sq = cfg.tuning.s_n * cfg.tuning.s_n;

    // truth on the same grid, disc-masked
    let truth_vals: Vec<f64> = (0..nx * nx)
        .into_par_iter()
        .map(|idx| {
            let (iy, ix) = (idx / nx, idx % nx);
            let (q, p) = (proto.node(ix), proto.node(iy));
            if q * q + p * p > s_sq {
                0.0
            } else {
                wigner_eval(truth, q, p).unwrap_or(0.0)
            }
        })
        .collect();

    let b1_sq = wigner_tail_norm_sq(truth, cfg.tuning.s_n);

    let r = cfg.replications as f64;
    let mises: Vec<f64> = grids
        .iter()
        .map(|g| {
            let inside: f64 = g
                .values
                .iter()
                .zip(&truth_vals)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                * cell;
            inside + b1_sq
        })
        .collect();
    let mise_mean = mises.iter().sum::<f64>() / r;
    let mise_sd = (mises.iter().map(|m| (m - mise_mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();

    // mean field for the decomposition
    let mut mean_vals = vec![0.0; nx * nx];
    for g in &grids {
        for (m, v) in mean_vals.iter_mut().zip(&g.values) {
            *m += v / r;
        }
    }
    let b2_sq: f64 = mean_vals
        .iter()
        .zip(&truth_vals)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * cell;
    let sigma_sq: f64 = grids
        .iter()
        .map(|g| {
            g.values
                .iter()
                .zip(&mean_vals)
                .map(|(a, m)| (a - m) * (a - m))
                .sum::<f64>()
                * cell
        })
        .sum::<f64>()
        / r;

    Ok(RiskCell {
        n: cfg.n,
        replications: cfg.replications,
        mise_mean,
        mise_sd,
        b1_sq,
        b2_sq,
        sigma_sq,
    })
}

/// ||W_rho||^2 outside the disc of radius s, by polar quadrature.
pub fn wigner_tail_norm_sq(truth: &DensityMatrix, s: f64) -> f64 {
    let outer = (s + 8.0).max(12.0);
    integrate_panels(
        |radius| {
            let ang = integrate_panels(
                |th| {
                    let w = wigner_eval(truth, radius * th.cos(), radius * th.sin()).unwrap_or(0.0);
                    w * w
                },
                0.0,
                2.0 * std::f64::consts::PI,
                8,
            );
            ang * radius
        },
        s,
        outer,
        ((outer - s) * 4.0).ceil() as usize,
    )
}

/// Report of a decay-proposition scan.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayReport {
    /// smallest scanned z from which the direct-space bound holds onward
    pub z0: f64,
    /// scanned z values violating the bound beyond z0 (empty on pass)
    pub violations: Vec<f64>,
    /// same for the Fourier-side bound at |w| = z
    pub fourier_z0: f64,
    pub fourier_violations: Vec<f64>,
    pub z_min: f64,
    pub z_max: f64,
    pub beta: f64,
}

/// Scan |W_rho| <= A(z) e^{-beta z^r} (and its Fourier-side counterpart
/// with A(z/2), beta (z/2)^r) over directions and radii; reports the
/// empirical onset z0 and any violations past it.
pub fn decay_check(truth: &DensityMatrix, cls: &StateClass) -> Result<DecayReport> {
    let rep = class_check(truth, cls);
    if !rep.member {
        return Err(Error::InvalidParameter {
            name: "truth",
            reason: format!(
                "state not in class R({}, {}): margin {} at {:?}",
                cls.b, cls.r, rep.margin, rep.worst_cell
            ),
        });
    }
    let beta = cls.beta;
    let (z_min, z_max, dz) = (0.5, 12.0, 0.1);
    let angles = 32;

    let series = class_series_sum(cls);
    let amp = |z: f64| -> f64 {
        if cls.r == 2.0 {
            // A(z) = (1/pi)(sum e^{-B(m+n)} + 2 e^B/(B (1+sqrt B)^2) z^2)
            (series + 2.0 * cls.b.exp() / (cls.b / cls.theta()) * z * z) / std::f64::consts::PI
        } else {
            // A(z) = (1/pi)(sum e^{-B(m+n)^{r/2}} + (4/(B r)) z^{4-r})
            (series + 4.0 / (cls.b * cls.r) * z.powf(4.0 - cls.r)) / std::f64::consts::PI
        }
    };

    let mut direct_viol = Vec::new();
    let mut fourier_viol = Vec::new();
    let mut z = z_min;
    while z <= z_max + 1e-12 {
        let mut max_w: f64 = 0.0;
        let mut max_wft: f64 = 0.0;
        for a in 0..angles {
            let th = a as f64 * std::f64::consts::PI * 2.0 / angles as f64;
            let (q, p) = (z * th.cos(), z * th.sin());
            max_w = max_w.max(wigner_eval(truth, q, p)?.abs());
            max_wft = max_wft.max(wigner_ft_eval(truth, q, p).norm());
        }
        if max_w > amp(z) * (-beta * z.powf(cls.r)).exp() + 1e-12 {
            direct_viol.push(z);
        }
        let half = z / 2.0;
        if max_wft > amp(half) * (-beta * half.powf(cls.r)).exp() + 1e-12 {
            fourier_viol.push(z);
        }
        z += dz;
    }

    let z0 = direct_viol.last().map_or(z_min, |v| v + dz);
    let fourier_z0 = fourier_viol.last().map_or(z_min, |v| v + dz);
    Ok(DecayReport {
        z0,
        violations: direct_viol.iter().copied().filter(|v| *v > z0).collect(),
        fourier_z0,
        fourier_violations: fourier_viol
            .iter()
            .copied()
            .filter(|v| *v > fourier_z0)
            .collect(),
        z_min,
        z_max,
        beta,
    })
}

/// Converged value of sum_{m,n} e^{-B (m+n)^{r/2}} entering A(z).
fn class_series_sum(cls: &StateClass) -> f64 {
    let mut total = 0.0;
    let mut t = 0usize;
    loop {
        let term = (t as f64 + 1.0) * (-cls.b * (t as f64).powf(cls.r / 2.0)).exp();
        total += term;
        t += 1;
        if term < 1e-16 * total.max(1.0) || t > 1_000_000 {
            return total;
        }
    }
}

/// One row of the series-tail lemma check:
/// sum_{m+n >= z} e^{-C (m+n)^nu} vs (2/(C nu)) z^{2-nu} e^{-C z^nu}.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TailCheckRow {
    pub z: f64,
    pub lhs: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Finite-sum oracle for the series-tail bound.
pub fn series_tail_check(c: f64, nu: f64, zs: &[f64]) -> Vec<TailCheckRow> {
    zs.iter()
        .map(|&z| {
            let mut lhs = 0.0;
            let mut t = z.ceil() as usize;
            loop {
                let term = (t as f64 + 1.0) * (-c * (t as f64).powf(nu)).exp();
                lhs += term;
                t += 1;
                if term < 1e-18 * lhs.max(1e-300) {
                    break;
                }
            }
            let bound = 2.0 / (c * nu) * z.powf(2.0 - nu) * (-c * z.powf(nu)).exp();
            TailCheckRow {
                z,
                lhs,
                bound,
                holds: lhs <= bound,
            }
        })
        .collect()
}

/// Predictor for rate fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RatePredictor {
    /// log n (near-parametric regimes)
    LogN,
    /// N(n)^{r/2} (intermediate rates)
    IntermediateRate,
}

/// Configuration of a rate-curve run.
#[derive(Debug, Clone)]
pub struct RateCurveConfig {
    pub ns: Vec<usize>,
    pub replications: usize,
    pub noise: NoiseModel,
    pub cls: StateClass,
    pub estimator: EstimatorKind,
    pub predictor: RatePredictor,
    pub master_seed: u64,
}

/// Auto-tuned MISE over a grid of sample sizes plus a least-squares fit of
/// log(mise) against the theory predictor.
pub fn rate_curve(truth: &DensityMatrix, cfg: &RateCurveConfig) -> Result<RiskReport> {
    if cfg.ns.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "ns",
            reason: "need at least 3 sample sizes for a rate fit".into(),
        });
    }
    let mut cells = Vec::new();
    let mut predictors = Vec::new();
    for (i, &n) in cfg.ns.iter().enumerate() {
        let cell = match cfg.estimator {
            EstimatorKind::Dm => {
                let tuning = select_tuning(n as f64, &cfg.noise, &cfg.cls)?;
                let regime = tuning.regime(&cfg.noise)?;
                let table = PatternTable::build(
                    tuning.n_coeff,
                    regime,
                    PatternTable::default_grid(tuning.n_coeff, &regime),
                )?;
                let dm_cfg = DmRiskConfig {
                    n,
                    replications: cfg.replications,
                    noise: cfg.noise,
                    tuning: tuning.clone(),
                    master_seed: replication_seed(cfg.master_seed, i * 104_729),
                };
                predictors.push(match cfg.predictor {
                    RatePredictor::LogN => (n as f64).ln(),
                    RatePredictor::IntermediateRate => tuning.n_exact.powf(cfg.cls.r / 2.0),
                });
                dm_mise(truth, &dm_cfg, &table)?
            }
            EstimatorKind::Wigner => {
                let tuning = select_wigner_tuning(n as f64, &cfg.noise, &cfg.cls)?;
                let wcfg = WignerRiskConfig {
                    n,
                    replications: cfg.replications,
                    noise: cfg.noise,
                    tuning,
                    step: Some(tuning.h),
                    master_seed: replication_seed(cfg.master_seed, i * 104_729),
                };
                predictors.push(match cfg.predictor {
                    RatePredictor::LogN => (n as f64).ln(),
                    RatePredictor::IntermediateRate => 1.0 / tuning.h.powf(cfg.cls.r),
                });
                wigner_mise(truth, &wcfg)?
            }
        };
        cells.push(cell);
    }
    let ys: Vec<f64> = cells.iter().map(|c| c.mise_mean.max(1e-300).ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&predictors, &ys);
    if !slope.is_finite() || !r_squared.is_finite() {
        return Err(Error::Inconsistent("degenerate rate fit".into()));
    }
    Ok(RiskReport {
        estimator_kind: cfg.estimator,
        cells,
        rate_fit: Some(RateFit {
            slope,
            intercept,
            r_squared,
        }),
    })
}
