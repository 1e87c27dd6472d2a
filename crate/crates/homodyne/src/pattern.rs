//! Pattern functions f_{j,k}, their noise-amplified variants f^eta and
//! cutoff-regularized variants f^{eta,delta}, evaluated by numeric inverse
//! Fourier transform and tabulated for the estimator's inner loop.
//!
//! In Fourier space the pattern function for indices j >= k is
//! `f~(t) = pi (-i)^{j-k} sign(t)^{j-k} |t| lf_k^{j-k}(t^2/2)` where `lf`
//! is the bounded normalized Laguerre function; the amplified regime
//! multiplies by `e^{gamma t^2}` (integrable only while gamma < 1/4, i.e.
//! eta > 1/2) and the cutoff regime additionally restricts to
//! `|t| <= 1/delta`. Pattern functions are symmetric in (j, k) and real;
//! f_{j,k} has the parity of j - k.

use crate::error::{Error, Result};
use crate::forward::NoiseModel;
use crate::quad::{gl64, pairwise_sum};
use crate::specfun::{laguerre_fn, minus_i_pow};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{num_complex::Complex as FftComplex, FftPlanner};
use std::io::{Read, Write};
use std::path::Path;

/// Noise regime of a pattern function.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Regime {
    /// eta = 1; the plain pattern functions.
    Noiseless,
    /// 1/2 < eta <= 1: multiply the transform by e^{gamma t^2}.
    Amplified { eta: f64 },
    /// 0 < eta <= 1/2: amplified with a hard frequency cutoff at 1/delta.
    Cutoff { eta: f64, delta: f64 },
}

impl Regime {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regime::Noiseless => Ok(()),
            Regime::Amplified { eta } => {
                if !(eta > 0.5 && eta <= 1.0) {
                    return Err(Error::RegimeMismatch(format!(
                        "amplified regime needs 1/2 < eta <= 1, got {eta}"
                    )));
                }
                let gamma = NoiseModel::new(eta)?.gamma();
                if gamma >= 0.25 {
                    return Err(Error::NonIntegrable { gamma });
                }
                Ok(())
            }
            Regime::Cutoff { eta, delta } => {
                if !(eta > 0.0 && eta <= 0.5) {
                    return Err(Error::RegimeMismatch(format!(
                        "cutoff regime needs 0 < eta <= 1/2, got {eta}"
                    )));
                }
                if !(delta > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "delta",
                        reason: format!("must be positive, got {delta}"),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            Regime::Noiseless => 0.0,
            Regime::Amplified { eta } | Regime::Cutoff { eta, .. } => (1.0 - eta) / (4.0 * eta),
        }
    }

    pub fn eta(&self) -> f64 {
        match *self {
            Regime::Noiseless => 1.0,
            Regime::Amplified { eta } | Regime::Cutoff { eta, .. } => eta,
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match *self {
            Regime::Cutoff { delta, .. } => Some(delta),
            _ => None,
        }
    }

    /// Regime matching a noise model and optional cutoff, as used by the
    /// estimator: eta = 1 -> noiseless, eta > 1/2 -> amplified, else cutoff.
    pub fn for_noise(noise: &NoiseModel, delta: Option<f64>) -> Result<Regime> {
        let eta = noise.eta();
        let regime = if eta == 1.0 {
            Regime::Noiseless
        } else if eta > 0.5 {
            Regime::Amplified { eta }
        } else {
            let delta = delta.ok_or_else(|| {
                Error::RegimeMismatch(format!("eta = {eta} <= 1/2 requires a cutoff delta"))
            })?;
            Regime::Cutoff { eta, delta }
        };
        regime.validate()?;
        Ok(regime)
    }

    /// Frequency support [0, T] of the transform envelope: the point past
    /// which the integrand is below ~1e-17 of its peak (hard 1/delta for
    /// the cutoff regime).
    fn freq_cutoff(&self, s: f64) -> f64 {
        match *self {
            Regime::Noiseless => 2.0 * s + 14.0,
            Regime::Amplified { .. } => {
                let gamma = self.gamma();
                // log-envelope gamma t^2 - (t/2 - s)^2 + log(pi (t+1));
                // walk outward until 40 nats below the in-band peak
                let peak = gamma * 4.0 * s * s + (std::f64::consts::PI * (2.0 * s + 1.0)).ln();
                let mut t = 2.0 * s;
                loop {
                    let le = gamma * t * t - (0.5 * t - s).powi(2)
                        + (std::f64::consts::PI * (t + 1.0)).ln();
                    if le < peak - 40.0 || t > 1e4 {
                        return t;
                    }
                    t += 0.5;
                }
            }
            Regime::Cutoff { delta, .. } => 1.0 / delta,
        }
    }
}

/// A pattern function specification: indices plus regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSpec {
    pub j: usize,
    pub k: usize,
    pub regime: Regime,
}

impl PatternSpec {
    pub fn new(j: usize, k: usize, regime: Regime) -> Result<Self> {
        regime.validate()?;
        Ok(Self { j, k, regime })
    }

    pub fn gamma(&self) -> f64 {
        self.regime.gamma()
    }

    fn s(&self) -> f64 {
        ((self.j + self.k + 1) as f64).sqrt()
    }
}

/// Fourier transform f~_{k,j}(t) of the noiseless pattern function,
/// evaluated with the indices sorted (f_{j,k} = f_{k,j}).
pub fn pattern_ft(j: usize, k: usize, t: f64) -> Complex64 {
    let (j, k) = if j >= k { (j, k) } else { (k, j) };
    let alpha = j - k;
    let lf = laguerre_fn(k, alpha, 0.5 * t * t);
    let sign = if alpha % 2 == 1 && t < 0.0 { -1.0 } else { 1.0 };
    minus_i_pow(alpha) * (std::f64::consts::PI * t.abs() * lf * sign)
}

/// Magnitude of the regime-weighted transform at t >= 0 (the quadrature
/// integrand), `pi t lf_k^alpha(t^2/2) e^{gamma t^2}`.
fn weighted_ft(spec: &PatternSpec, t: f64) -> f64 {
    let (j, k) = if spec.j >= spec.k {
        (spec.j, spec.k)
    } else {
        (spec.k, spec.j)
    };
    let alpha = j - k;
    let lf = laguerre_fn(k, alpha, 0.5 * t * t);
    std::f64::consts::PI * t * lf * (spec.gamma() * t * t).exp()
}

/// Evaluate f^{regime}_{j,k}(x) = (1/2pi) int f~^{regime}(t) e^{ixt} dt by
/// panel-doubled Gauss-Legendre quadrature, split at the |t| kink.
///
/// The result is real; the imaginary residual of the full complex integral
/// is asserted below 1e-9.
pub fn pattern_eval(spec: &PatternSpec, x: f64) -> Result<f64> {
    spec.regime.validate()?;
    let t_max = spec.regime.freq_cutoff(spec.s());
    // panels sized to resolve the e^{ixt} oscillation
    let mut panels = ((t_max * (1.0 + x.abs() / 4.0)) / 2.0).ceil() as usize;
    panels = panels.clamp(8, 1 << 14);
    let mut prev = pattern_eval_panels(spec, x, panels);
    for _ in 0..8 {
        panels *= 2;
        let cur = pattern_eval_panels(spec, x, panels);
        if (cur - prev).norm() <= 1e-10 * cur.norm().max(1e-12) {
            prev = cur;
            break;
        }
        prev = cur;
    }
    if prev.im.abs() >= 1e-9 {
        return Err(Error::Inconsistent(format!(
            "pattern function imaginary residual {} at x = {x}",
            prev.im
        )));
    }
    Ok(prev.re)
}

fn pattern_eval_panels(spec: &PatternSpec, x: f64, panels: usize) -> Complex64 {
    let t_max = spec.regime.freq_cutoff(spec.s());
    let alpha = spec.j.abs_diff(spec.k);
    let phase = minus_i_pow(alpha);
    let (nodes, weights) = gl64();
    let width = t_max / panels as f64;
    let mut parts = Vec::with_capacity(panels);
    for p in 0..panels {
        let half = 0.5 * width;
        let mid = p as f64 * width + half;
        let mut acc = Complex64::new(0.0, 0.0);
        for (node, w) in nodes.iter().zip(weights) {
            let t = mid + half * node;
            let g = weighted_ft(spec, t);
            // mirrored node at -t folded in analytically:
            // e^{ixt} + sign(-t)^alpha e^{-ixt}
            let e = Complex64::from_polar(1.0, x * t);
            let pair = if alpha % 2 == 0 { e + e.conj() } else { e - e.conj() };
            acc += pair * (g * w);
        }
        parts.push(acc * half);
    }
    let total: Complex64 = crate::quad::pairwise_sum_c(&parts);
    total * phase / (2.0 * std::f64::consts::PI)
}

/// L2 norm squared ||f^{regime}_{j,k}||_2^2 by Parseval on the transform.
pub fn pattern_l2_norm_sq(j: usize, k: usize, regime: Regime) -> Result<f64> {
    regime.validate()?;
    let spec = PatternSpec { j, k, regime };
    let s = spec.s();
    let (nodes, weights) = gl64();
    let int_sq = |a: f64, b: f64, panels: usize| -> f64 {
        let width = (b - a) / panels as f64;
        let mut parts = Vec::with_capacity(panels);
        for p in 0..panels {
            let half = 0.5 * width;
            let mid = a + p as f64 * width + half;
            let mut acc = 0.0;
            for (node, w) in nodes.iter().zip(weights) {
                let t = mid + half * node;
                let g = weighted_ft(&spec, t);
                acc += w * g * g;
            }
            parts.push(acc * half);
        }
        pairwise_sum(&parts)
    };
    if let Regime::Cutoff { delta, .. } = regime {
        let t_max = 1.0 / delta;
        return Ok(int_sq(0.0, t_max, (t_max.ceil() as usize).max(8)) / std::f64::consts::PI);
    }
    // integrate to the classical turning point, then extend until the true
    // tail is negligible (the envelope bound overstates it badly in the
    // amplified regime)
    let mut total = int_sq(0.0, 2.0 * s, (2.0 * s).ceil() as usize + 8);
    let mut t = 2.0 * s;
    loop {
        let add = int_sq(t, t + 2.0, 4);
        total += add;
        t += 2.0;
        if add.abs() < 1e-13 * total.abs() || t > 500.0 {
            break;
        }
    }
    Ok(total / std::f64::consts::PI)
}

/// One cumulative row of [`norm_growth_report`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct NormGrowthCell {
    pub n: usize,
    /// sum over j+k <= n of ||f||_2^2
    pub sum_l2_sq: f64,
    /// sum over j+k <= n of ||f||_inf^2
    pub sum_sup_sq: f64,
}

/// Cumulative growth of sum ||f_{j,k}||_2^2 and sum ||f_{j,k}||_inf^2 over
/// total degree, for the noiseless or amplified regime.
pub fn norm_growth_report(n_max: usize, regime: Regime) -> Result<Vec<NormGrowthCell>> {
    regime.validate()?;
    if matches!(regime, Regime::Cutoff { .. }) {
        return Err(Error::RegimeMismatch(
            "norm growth is defined for the noiseless and amplified regimes".into(),
        ));
    }
    let per_degree: Result<Vec<(f64, f64)>> = (0..=n_max)
        .into_par_iter()
        .map(|t| {
            let mut l2 = 0.0;
            let mut sup = 0.0;
            for k in 0..=t / 2 {
                let j = t - k;
                let weight = if j == k { 1.0 } else { 2.0 };
                l2 += weight * pattern_l2_norm_sq(j, k, regime)?;
                let sup_jk = pattern_sup(j, k, regime)?;
                sup += weight * sup_jk * sup_jk;
            }
            Ok((l2, sup))
        })
        .collect();
    let per_degree = per_degree?;
    let mut out = Vec::with_capacity(n_max + 1);
    let (mut acc_l2, mut acc_sup) = (0.0, 0.0);
    for (n, (l2, sup)) in per_degree.into_iter().enumerate() {
        acc_l2 += l2;
        acc_sup += sup;
        out.push(NormGrowthCell {
            n,
            sum_l2_sq: acc_l2,
            sum_sup_sq: acc_sup,
        });
    }
    Ok(out)
}

/// Sup norm of f_{j,k} estimated by FFT inversion of the transform on a
/// fine grid (reporting accuracy, not quadrature accuracy).
pub fn pattern_sup(j: usize, k: usize, regime: Regime) -> Result<f64> {
    let spec = PatternSpec::new(j, k, regime)?;
    let t_max = spec.regime.freq_cutoff(spec.s());
    let dt = (t_max / 2048.0).min(0.02);
    // oversample 4x in x by zero padding
    let m = (((2.0 * t_max / dt).ceil() as usize + 1).next_power_of_two()) * 4;
    let mut buf = vec![FftComplex::new(0.0, 0.0); m];
    let alpha = j.abs_diff(k);
    let phase = minus_i_pow(alpha);
    let imax = (t_max / dt).floor() as usize;
    for i in 0..=imax {
        let t = i as f64 * dt;
        let g = weighted_ft(&spec, t);
        let v = phase * g;
        buf[i] = FftComplex::new(v.re, v.im);
        if i > 0 {
            let sign = if alpha % 2 == 1 { -1.0 } else { 1.0 };
            buf[m - i] = FftComplex::new(sign * v.re, sign * v.im);
        }
    }
    // f(x_j) = (dt/2pi) sum_i f~(t_i) e^{+i x_j t_i}
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(m);
    fft.process(&mut buf);
    let scale = dt / (2.0 * std::f64::consts::PI);
    let mut sup = 0.0f64;
    for v in &buf {
        let mag = (v.re * v.re + v.im * v.im).sqrt() * scale;
        sup = sup.max(mag);
    }
    Ok(sup)
}

/// Grid description of a pattern-function table.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TableGrid {
    pub x_max: f64,
    pub dx: f64,
}

/// Tabulated pattern functions for all j + k < n_max, with cubic local
/// interpolation on lookup.
#[derive(Debug, Clone)]
pub struct PatternTable {
    n_max: usize,
    regime: Regime,
    grid: TableGrid,
    len: usize,
    /// rows indexed by pair_index(j, k), j >= k
    values: Vec<Vec<f64>>,
}

fn pair_index(j: usize, k: usize) -> usize {
    // enumeration by total degree t, then k = 0..t/2
    let t = j + k;
    let before: usize = (0..t).map(|d| d / 2 + 1).sum();
    before + k.min(j)
}

fn pair_count(n_max: usize) -> usize {
    (0..n_max).map(|d| d / 2 + 1).sum()
}

impl PatternTable {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn grid(&self) -> TableGrid {
        self.grid
    }

    /// Default grid for a regime: half-width 12 plus the largest index
    /// scale s, spacing fine enough that cubic interpolation of the
    /// highest frequency present stays below 1e-7.
    pub fn default_grid(n_max: usize, regime: &Regime) -> TableGrid {
        let s_max = (n_max as f64).sqrt();
        let f_max = regime.freq_cutoff(s_max);
        TableGrid {
            x_max: 12.0 + s_max,
            dx: 0.035 / f_max,
        }
    }

    /// Tabulate all pattern functions with j + k < n_max.
    pub fn build(n_max: usize, regime: Regime, grid: TableGrid) -> Result<PatternTable> {
        regime.validate()?;
        if n_max == 0 {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: "table needs at least one total degree".into(),
            });
        }
        let s_max = (n_max as f64).sqrt();
        let f_max = regime.freq_cutoff(s_max);
        // Nyquist guard with margin: dx <= pi / (4 f_max)
        if grid.dx > std::f64::consts::PI / (4.0 * f_max) {
            return Err(Error::InvalidParameter {
                name: "dx",
                reason: format!(
                    "grid spacing {} exceeds Nyquist guard {}",
                    grid.dx,
                    std::f64::consts::PI / (4.0 * f_max)
                ),
            });
        }
        let len = (2.0 * grid.x_max / grid.dx).ceil() as usize + 1;
        let pairs = pair_count(n_max);
        if pairs * len > (1 << 28) {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: format!("table would hold {} values", pairs * len),
            });
        }
        let mut keys = Vec::with_capacity(pairs);
        for t in 0..n_max {
            for k in 0..=t / 2 {
                keys.push((t - k, k));
            }
        }
        let values: Vec<Vec<f64>> = keys
            .par_iter()
            .map(|&(j, k)| tabulate_pair(j, k, regime, &grid, len))
            .collect();
        Ok(PatternTable {
            n_max,
            regime,
            grid,
            len,
            values,
        })
    }

    /// Value at a grid node (exactly the tabulated quadrature result).
    pub fn at_node(&self, j: usize, k: usize, i: usize) -> f64 {
        self.values[pair_index(j, k)][i]
    }

    pub fn node_x(&self, i: usize) -> f64 {
        -self.grid.x_max + i as f64 * self.grid.dx
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Cubic local interpolation of f_{j,k}(x); stencils clamp at the
    /// table edges (pattern functions decay polynomially there).
    pub fn lookup(&self, j: usize, k: usize, x: f64) -> f64 {
        let row = &self.values[pair_index(j, k)];
        let t = (x + self.grid.x_max) / self.grid.dx;
        let i1 = (t.floor() as isize).clamp(1, self.len as isize - 3) as usize;
        let u = t - i1 as f64;
        let w_m1 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        let w_0 = (u * u - 1.0) * (u - 2.0) / 2.0;
        let w_1 = -u * (u + 1.0) * (u - 2.0) / 2.0;
        let w_2 = u * (u * u - 1.0) / 6.0;
        w_m1 * row[i1 - 1] + w_0 * row[i1] + w_1 * row[i1 + 1] + w_2 * row[i1 + 2]
    }

    /// Write the table as a versioned little-endian binary cache.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"HQPTBL01")?;
        f.write_all(&(self.n_max as u32).to_le_bytes())?;
        let (tag, eta, delta) = match self.regime {
            Regime::Noiseless => (0u8, 1.0, 0.0),
            Regime::Amplified { eta } => (1, eta, 0.0),
            Regime::Cutoff { eta, delta } => (2, eta, delta),
        };
        f.write_all(&[tag])?;
        f.write_all(&eta.to_le_bytes())?;
        f.write_all(&delta.to_le_bytes())?;
        f.write_all(&self.grid.x_max.to_le_bytes())?;
        f.write_all(&self.grid.dx.to_le_bytes())?;
        f.write_all(&(self.len as u64).to_le_bytes())?;
        for row in &self.values {
            for v in row {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Load a cache; fails with a format error on any parameter mismatch.
    pub fn load(
        path: &Path,
        n_max: usize,
        regime: Regime,
        grid: TableGrid,
    ) -> Result<PatternTable> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != b"HQPTBL01" {
            return Err(Error::Format("bad pattern-table magic".into()));
        }
        let mut b4 = [0u8; 4];
        f.read_exact(&mut b4)?;
        let file_n = u32::from_le_bytes(b4) as usize;
        let mut tag = [0u8; 1];
        f.read_exact(&mut tag)?;
        let mut b8 = [0u8; 8];
        f.read_exact(&mut b8)?;
        let eta = f64::from_le_bytes(b8);
        f.read_exact(&mut b8)?;
        let delta = f64::from_le_bytes(b8);
        let file_regime = match tag[0] {
            0 => Regime::Noiseless,
            1 => Regime::Amplified { eta },
            2 => Regime::Cutoff { eta, delta },
            t => return Err(Error::Format(format!("unknown regime tag {t}"))),
        };
        f.read_exact(&mut b8)?;
        let x_max = f64::from_le_bytes(b8);
        f.read_exact(&mut b8)?;
        let dx = f64::from_le_bytes(b8);
        f.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        if file_n != n_max || file_regime != regime || x_max != grid.x_max || dx != grid.dx {
            return Err(Error::Format(
                "pattern-table cache parameter mismatch".into(),
            ));
        }
        let pairs = pair_count(n_max);
        let mut values = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let mut row = vec![0.0f64; len];
            let mut raw = vec![0u8; len * 8];
            f.read_exact(&mut raw)?;
            for (i, chunk) in raw.chunks_exact(8).enumerate() {
                row[i] = f64::from_le_bytes(chunk.try_into().unwrap());
            }
            values.push(row);
        }
        Ok(PatternTable {
            n_max,
            regime,
            grid,
            len,
            values,
        })
    }
}

/// Tabulate one pair by sharing the transform-side quadrature nodes across
/// all x: the integrand factorizes as g(t) * trig(x t).
fn tabulate_pair(j: usize, k: usize, regime: Regime, grid: &TableGrid, len: usize) -> Vec<f64> {
    let spec = PatternSpec { j, k, regime };
    let alpha = j.abs_diff(k);
    let t_max = regime.freq_cutoff(spec.s());
    // panel width fine enough for the largest |x| in the table
    let width = (2.0 / (1.0 + grid.x_max / 8.0)).min(1.0);
    let panels = (t_max / width).ceil() as usize;
    let (nodes, weights) = gl64();
    let mut ts = Vec::with_capacity(panels * nodes.len());
    let mut gw = Vec::with_capacity(panels * nodes.len());
    let pwidth = t_max / panels as f64;
    for p in 0..panels {
        let half = 0.5 * pwidth;
        let mid = p as f64 * pwidth + half;
        for (node, w) in nodes.iter().zip(weights) {
            let t = mid + half * node;
            ts.push(t);
            gw.push(weighted_ft(&spec, t) * w * half);
        }
    }
    // real prefactor: alpha even -> (-1)^{alpha/2} cos,
    // alpha odd -> (-1)^{(alpha-1)/2} sin
    let sign = if alpha % 2 == 0 {
        if (alpha / 2) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    } else if ((alpha - 1) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    let mut row = vec![0.0; len];
    for (i, slot) in row.iter_mut().enumerate() {
        let x = -grid.x_max + i as f64 * grid.dx;
        let mut parts = Vec::with_capacity(ts.len() / 64 + 1);
        let mut acc = 0.0;
        for (idx, (&t, &c)) in ts.iter().zip(&gw).enumerate() {
            acc += c * if alpha % 2 == 0 { (x * t).cos() } else { (x * t).sin() };
            if idx % 64 == 63 {
                parts.push(acc);
                acc = 0.0;
            }
        }
        parts.push(acc);
        *slot = sign * pairwise_sum(&parts) / std::f64::consts::PI;
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn regime_invariants() {
        assert!(Regime::Amplified { eta: 0.5 }.validate().is_err());
        assert!(Regime::Amplified { eta: 0.8 }.validate().is_ok());
        assert!(Regime::Cutoff { eta: 0.6, delta: 0.2 }.validate().is_err());
        assert!(Regime::Cutoff { eta: 0.5, delta: 0.2 }.validate().is_ok());
        assert!(Regime::Cutoff { eta: 0.4, delta: 0.0 }.validate().is_err());
        // boundary eta = 1/2 belongs to the cutoff regime
        let noise = NoiseModel::new(0.5).unwrap();
        assert!(matches!(
            Regime::for_noise(&noise, Some(0.3)).unwrap(),
            Regime::Cutoff { .. }
        ));
        assert!(Regime::for_noise(&noise, None).is_err());
    }

    #[test]
    fn pattern_ft_examples() {
        // f~_{0,0}(t) = pi |t| e^{-t^2/4}; frozen at t = 2: 2 pi e^{-1}
        let v = pattern_ft(0, 0, 2.0);
        assert_abs_diff_eq!(
            v.re,
            2.0 * std::f64::consts::PI * (-1.0f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        // |t| factor kills t = 0 for all indices
        for (j, k) in [(0, 0), (3, 1), (2, 2), (5, 0)] {
            assert_eq!(pattern_ft(j, k, 0.0).norm(), 0.0);
        }
        // symmetry in (j, k)
        let a = pattern_ft(3, 1, 1.7);
        let b = pattern_ft(1, 3, 1.7);
        assert_eq!(a, b);
    }

    #[test]
    fn pattern_ft_matches_wigner_ft_relation() {
        // f~_{k,j}(t) = pi |t| W~_{j,k}(t, 0) under the crate convention
        let (j, k) = (2usize, 1usize);
        let t = 1.3;
        let w = crate::specfun::wigner_basis_ft(crate::specfun::BasisIndex::new(j, k), t, 0.0);
        let expect = w * std::f64::consts::PI * t.abs();
        let got = pattern_ft(j, k, t);
        assert!((got - expect).norm() < 1e-8, "{got} vs {expect}");
    }

    #[test]
    fn pattern_eval_closed_forms() {
        // noiseless (0,0) at x=0: (1/2pi) int pi |t| e^{-t^2/4} dt = 2
        let spec = PatternSpec::new(0, 0, Regime::Noiseless).unwrap();
        assert_abs_diff_eq!(pattern_eval(&spec, 0.0).unwrap(), 2.0, epsilon = 1e-8);
        // cutoff eta = 1/2 (gamma = 1/4 cancels the Gaussian): 1/(2 delta^2)
        let delta = 0.25;
        let spec = PatternSpec::new(0, 0, Regime::Cutoff { eta: 0.5, delta }).unwrap();
        assert_abs_diff_eq!(
            pattern_eval(&spec, 0.0).unwrap(),
            1.0 / (2.0 * delta * delta),
            epsilon = 1e-8
        );
    }

    #[test]
    fn amplified_converges_to_noiseless() {
        let x = 0.7;
        let base = pattern_eval(&PatternSpec::new(1, 1, Regime::Noiseless).unwrap(), x).unwrap();
        let mut prev_gap = f64::INFINITY;
        for &eta in &[0.99, 0.9999, 1.0 - 1e-8] {
            let near =
                pattern_eval(&PatternSpec::new(1, 1, Regime::Amplified { eta }).unwrap(), x)
                    .unwrap();
            let gap = (near - base).abs();
            assert!(gap < prev_gap, "gap {gap} not shrinking at eta={eta}");
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-6, "final gap {prev_gap}");
    }

    #[test]
    fn pattern_parity() {
        for (j, k) in [(1usize, 0usize), (2, 0), (3, 2), (2, 2)] {
            let spec = PatternSpec::new(j, k, Regime::Noiseless).unwrap();
            let parity = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
            for &x in &[0.4, 1.1, 2.7] {
                let plus = pattern_eval(&spec, x).unwrap();
                let minus = pattern_eval(&spec, -x).unwrap();
                assert_abs_diff_eq!(minus, parity * plus, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn table_nodes_match_pattern_eval() {
        let regime = Regime::Noiseless;
        let grid = TableGrid { x_max: 6.0, dx: 0.01 };
        let table = PatternTable::build(3, regime, grid).unwrap();
        for (j, k) in [(0usize, 0usize), (1, 0), (2, 0), (1, 1)] {
            for i in [0usize, 57, 301, 600] {
                let x = table.node_x(i);
                let spec = PatternSpec::new(j, k, regime).unwrap();
                let direct = pattern_eval(&spec, x).unwrap();
                let node = table.at_node(j, k, i);
                assert!(
                    (node - direct).abs() < 1e-9,
                    "node mismatch ({j},{k}) at x={x}: {node} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn table_lookup_interpolation_error() {
        // off-node lookup error < 1e-7 at scattered x, N = 10 noiseless
        let regime = Regime::Noiseless;
        let grid = PatternTable::default_grid(10, &regime);
        let table = PatternTable::build(10, regime, grid).unwrap();
        let mut x = -11.0;
        let mut checked = 0;
        let pairs = [(0usize, 0usize), (4, 3), (9, 0), (5, 4), (2, 1)];
        while checked < 100 {
            x += 0.2243371;
            if x > 11.0 {
                x -= 22.0;
            }
            let (j, k) = pairs[checked % pairs.len()];
            let spec = PatternSpec::new(j, k, regime).unwrap();
            let direct = pattern_eval(&spec, x).unwrap();
            let interp = table.lookup(j, k, x);
            assert!(
                (interp - direct).abs() < 1e-7,
                "interp error at ({j},{k}), x={x}: {interp} vs {direct}"
            );
            checked += 1;
        }
    }

    #[test]
    fn table_symmetric_in_indices() {
        let table = PatternTable::build(
            4,
            Regime::Amplified { eta: 0.8 },
            TableGrid {
                x_max: 5.0,
                dx: 0.005,
            },
        )
        .unwrap();
        for &x in &[-3.3, 0.4, 1.9] {
            assert_eq!(table.lookup(2, 1, x), table.lookup(1, 2, x));
            assert_eq!(table.lookup(3, 0, x), table.lookup(0, 3, x));
        }
    }

    #[test]
    fn cutoff_l2_norm_monotone_in_inverse_delta() {
        // spectral cutoff: growing 1/delta only adds positive mass
        let mut prev = 0.0;
        for &inv_delta in &[2.0f64, 3.0, 4.0, 6.0] {
            let v = pattern_l2_norm_sq(
                1,
                0,
                Regime::Cutoff {
                    eta: 0.4,
                    delta: 1.0 / inv_delta,
                },
            )
            .unwrap();
            assert!(v > prev, "not monotone at 1/delta = {inv_delta}");
            prev = v;
        }
    }

    #[test]
    fn norm_growth_small_cases() {
        let cells = norm_growth_report(2, Regime::Noiseless).unwrap();
        // ||f_00||_2^2 = pi int_0^inf t^2 e^{-t^2/2} dt = pi sqrt(2 pi)/2
        let f00 = pattern_l2_norm_sq(0, 0, Regime::Noiseless).unwrap();
        let analytic = std::f64::consts::PI * (2.0 * std::f64::consts::PI).sqrt() / 2.0;
        assert_abs_diff_eq!(f00, analytic, epsilon = 1e-10);
        assert!(cells[0].sum_l2_sq > 0.0);
        assert_abs_diff_eq!(cells[0].sum_l2_sq, f00, epsilon = 1e-12);
        // sup estimate agrees with a direct grid scan at small order
        let sup_fft = pattern_sup(1, 0, Regime::Noiseless).unwrap();
        let spec = PatternSpec::new(1, 0, Regime::Noiseless).unwrap();
        let mut sup_direct = 0.0f64;
        let mut x = 0.0;
        while x <= 8.0 {
            sup_direct = sup_direct.max(pattern_eval(&spec, x).unwrap().abs());
            x += 0.01;
        }
        assert!(
            (sup_fft - sup_direct).abs() < 2e-3 * sup_direct.max(1.0),
            "sup {sup_fft} vs {sup_direct}"
        );
    }

    #[test]
    fn table_cache_roundtrip_and_invalidation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.bin");
        let regime = Regime::Cutoff { eta: 0.4, delta: 0.3 };
        let grid = TableGrid { x_max: 4.0, dx: 0.01 };
        let table = PatternTable::build(3, regime, grid).unwrap();
        table.save(&path).unwrap();
        let loaded = PatternTable::load(&path, 3, regime, grid).unwrap();
        for (j, k) in [(0usize, 0usize), (2, 0), (1, 1)] {
            for i in [0usize, 100, 799] {
                assert_eq!(table.at_node(j, k, i), loaded.at_node(j, k, i));
            }
        }
        // any parameter mismatch invalidates
        assert!(PatternTable::load(&path, 4, regime, grid).is_err());
        assert!(
            PatternTable::load(&path, 3, Regime::Cutoff { eta: 0.4, delta: 0.31 }, grid).is_err()
        );
        assert!(PatternTable::load(
            &path,
            3,
            regime,
            TableGrid { x_max: 4.0, dx: 0.02 }
        )
        .is_err());
    }
}
