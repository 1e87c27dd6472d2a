//! Synthetic i.i.d. observations (Y_l, Phi_l) from the noisy homodyne
//! model `Y = sqrt(eta) X + sqrt((1-eta)/2) xi`.
//!
//! # Reproducible stream layout
//!
//! Every record has its own counter-based random stream, so datasets are
//! bit-identical for a given `(state, n, eta, seed)` regardless of worker
//! count, and any other implementation can replay them:
//!
//! - Generator: ChaCha12. Key = 32 bytes, little-endian words
//!   `[seed_lo, seed_hi, 0xb5ad4ece, 0xda1ce2a9, 0, 0, 0, 0]` where
//!   `seed_lo/hi` split the 64-bit dataset seed; stream id = record index.
//! - Uniforms: `u = ((next_u64() >> 11) + 1) * 2^-53` in (0, 1].
//! - Normals: Box-Muller, `z = sqrt(-2 ln u1) cos(2 pi u2)`.
//! - Draw order per record: `u` for Phi = pi * u; then per rejection
//!   attempt: one uniform for the envelope component, a Box-Muller pair
//!   for the proposal, one uniform for accept/reject; after acceptance a
//!   final Box-Muller pair for the detection noise xi.
//!
//! The proposal envelope is the two-component Gaussian mixture
//! `g = (N(0,1) + N(0, (2 dim + 1)/2)) / 2` scaled by a constant `c`
//! obtained from grid maximization of `p(x|phi)/g(x)` with a 10% safety
//! margin; the wide component tracks the support of the highest Fock
//! level so the acceptance rate stays above 0.1 for every canonical state.

use crate::error::{Error, Result};
use crate::forward::{quadrature_density_with_hermite, x_support, NoiseModel};
use crate::specfun::hermite_fn_seq;
use crate::state::DensityMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// One homodyne record: quadrature value and phase.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Record {
    pub y: f64,
    pub phi: f64,
}

/// A simulated dataset with its generating parameters.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub eta: f64,
    pub seed: u64,
    pub source_state_id: String,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel::new(self.eta).expect("dataset eta validated at construction")
    }
}

/// Latent pre-noise values for the debug interface.
#[derive(Debug, Clone)]
pub struct LatentSample {
    pub dataset: Dataset,
    /// X values before the detection noise was added.
    pub xs: Vec<f64>,
    /// Overall acceptance rate of the rejection sampler.
    pub acceptance_rate: f64,
}

fn key_for(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&0xb5ad4eceu32.to_le_bytes());
    key[12..16].copy_from_slice(&0xda1ce2a9u32.to_le_bytes());
    key
}

fn record_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::from_seed(key_for(seed));
    rng.set_stream(index);
    rng
}

#[inline]
fn unit_open(rng: &mut ChaCha12Rng) -> f64 {
    // (0, 1]: never 0, so logarithms are safe
    ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
}

#[inline]
fn box_muller(rng: &mut ChaCha12Rng) -> f64 {
    let u1 = unit_open(rng);
    let u2 = unit_open(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Rejection envelope shared by all records of one run.
struct Envelope {
    scale: f64,
    wide_sd: f64,
}

impl Envelope {
    fn density(&self, x: f64) -> f64 {
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let narrow = norm * (-0.5 * x * x).exp();
        let wide = norm / self.wide_sd * (-0.5 * (x / self.wide_sd).powi(2)).exp();
        0.5 * (narrow + wide)
    }

    /// Grid maximization of p(x|phi)/g(x) with a 10% margin.
    fn fit(rho: &DensityMatrix) -> Result<Self> {
        let wide_sd = ((2.0 * rho.dim() as f64 + 1.0) / 2.0).sqrt();
        let mut env = Envelope {
            scale: 1.0,
            wide_sd,
        };
        let half = x_support(rho.dim());
        let angles = 33;
        let mut worst: f64 = 0.0;
        let nx = (2.0 * half / 0.02).ceil() as usize;
        for i in 0..=nx {
            let x = -half + 2.0 * half * i as f64 / nx as f64;
            let h = hermite_fn_seq(rho.dim(), x);
            let g = env.density(x);
            for a in 0..angles {
                let phi = (a as f64 + 0.5) * std::f64::consts::PI / angles as f64;
                let p = quadrature_density_with_hermite(rho, &h, phi)?;
                worst = worst.max(p / g);
            }
        }
        env.scale = worst * 1.1;
        Ok(env)
    }

    fn propose(&self, rng: &mut ChaCha12Rng) -> f64 {
        let component = unit_open(rng);
        let z = box_muller(rng);
        if component <= 0.5 {
            z
        } else {
            z * self.wide_sd
        }
    }
}

const MAX_ATTEMPTS_PER_RECORD: usize = 10_000;

fn draw_record(
    rho: &DensityMatrix,
    noise: &NoiseModel,
    env: &Envelope,
    seed: u64,
    index: u64,
) -> Result<(Record, f64, usize)> {
    let mut rng = record_rng(seed, index);
    let phi = std::f64::consts::PI * unit_open(&mut rng);
    let mut attempts = 0usize;
    let x = loop {
        attempts += 1;
        if attempts > MAX_ATTEMPTS_PER_RECORD {
            return Err(Error::EnvelopeFailure {
                state: rho.label().to_string(),
                rate: 1.0 / attempts as f64,
            });
        }
        let cand = env.propose(&mut rng);
        let accept_u = unit_open(&mut rng);
        let h = hermite_fn_seq(rho.dim(), cand);
        let p = quadrature_density_with_hermite(rho, &h, phi)?;
        if accept_u * env.scale * env.density(cand) <= p {
            break cand;
        }
    };
    let xi = box_muller(&mut rng);
    let y = noise.eta().sqrt() * x + noise.noise_sd() * xi;
    Ok((Record { y, phi }, x, attempts))
}

/// Draw n i.i.d. records; deterministic for fixed (state, n, eta, seed).
pub fn sample(rho: &DensityMatrix, noise: &NoiseModel, n: usize, seed: u64) -> Result<Dataset> {
    Ok(sample_with_latent(rho, noise, n, seed)?.dataset)
}

/// Like [`sample`] but also returns the latent pre-noise X values and the
/// sampler's acceptance rate.
pub fn sample_with_latent(
    rho: &DensityMatrix,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
) -> Result<LatentSample> {
    if rho.trace_deficit() >= 1e-6 {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("trace deficit {} too large to sample", rho.trace_deficit()),
        });
    }
    let env = Envelope::fit(rho)?;
    let drawn: Result<Vec<(Record, f64, usize)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| draw_record(rho, noise, &env, seed, i))
        .collect();
    let drawn = drawn?;
    let total_attempts: usize = drawn.iter().map(|(_, _, a)| a).sum();
    let rate = n as f64 / total_attempts.max(1) as f64;
    if n > 0 && rate < 1e-3 {
        return Err(Error::EnvelopeFailure {
            state: rho.label().to_string(),
            rate,
        });
    }
    let mut records = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    for (rec, x, _) in drawn {
        records.push(rec);
        xs.push(x);
    }
    Ok(LatentSample {
        dataset: Dataset {
            records,
            eta: noise.eta(),
            seed,
            source_state_id: rho.label().to_string(),
        },
        xs,
        acceptance_rate: rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_panels;
    use crate::state::{make_state, StateKind};
    use num_complex::Complex64;

    #[test]
    fn fixed_seed_is_bit_identical() {
        let rho = make_state(StateKind::Fock(1), 4).unwrap();
        let noise = NoiseModel::new(0.8).unwrap();
        let a = sample(&rho, &noise, 200, 42).unwrap();
        let b = sample(&rho, &noise, 200, 42).unwrap();
        assert_eq!(a.records, b.records);
        let c = sample(&rho, &noise, 200, 43).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn prefix_property_of_record_streams() {
        // growing n extends the dataset without changing earlier records
        let rho = make_state(StateKind::Fock(0), 4).unwrap();
        let noise = NoiseModel::new(1.0).unwrap();
        let a = sample(&rho, &noise, 50, 7).unwrap();
        let b = sample(&rho, &noise, 100, 7).unwrap();
        assert_eq!(a.records[..], b.records[..50]);
    }

    #[test]
    fn vacuum_variance_matches_law() {
        // vacuum Y is exactly N(0, 1/2) for any eta
        let rho = make_state(StateKind::Fock(0), 4).unwrap();
        let noise = NoiseModel::new(0.7).unwrap();
        let n = 100_000;
        let data = sample(&rho, &noise, n, 1).unwrap();
        let mean: f64 = data.records.iter().map(|r| r.y).sum::<f64>() / n as f64;
        let var: f64 =
            data.records.iter().map(|r| (r.y - mean) * (r.y - mean)).sum::<f64>() / n as f64;
        let se = (2.0 / n as f64).sqrt() * 0.5;
        assert!(
            (var - 0.5).abs() <= 3.0 * se,
            "var {var} outside 0.5 +/- {}",
            3.0 * se
        );
    }

    #[test]
    fn phase_is_uniform() {
        let rho = make_state(StateKind::Fock(0), 4).unwrap();
        let noise = NoiseModel::new(1.0).unwrap();
        let n = 100_000;
        let data = sample(&rho, &noise, n, 3).unwrap();
        let mut phis: Vec<f64> = data.records.iter().map(|r| r.phi).collect();
        phis.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, phi) in phis.iter().enumerate() {
            let cdf = phi / std::f64::consts::PI;
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            ks = ks.max((cdf - emp_lo).abs().max((emp_hi - cdf).abs()));
        }
        // 1% critical value oracle: 1.63/sqrt(n)
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
        assert!(data
            .records
            .iter()
            .all(|r| (0.0..=std::f64::consts::PI).contains(&r.phi)));
    }

    #[test]
    fn latent_second_moment_matches_quadrature() {
        // E[X^2] from the sampler matches the angle-mixed quadrature moment
        let rho = make_state(StateKind::Coherent(Complex64::new(0.5, 0.0)), 12).unwrap();
        let noise = NoiseModel::new(0.9).unwrap();
        let n = 60_000;
        let latent = sample_with_latent(&rho, &noise, n, 11).unwrap();
        let m2: f64 = latent.xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let angles = 64;
        let mut expect = 0.0;
        for a in 0..angles {
            let phi = (a as f64 + 0.5) * std::f64::consts::PI / angles as f64;
            expect += integrate_panels(
                |x| x * x * crate::forward::quadrature_density(&rho, x, phi).unwrap(),
                -12.0,
                12.0,
                24,
            ) / angles as f64;
        }
        // 4 standard errors of the empirical second moment
        let var_m2: f64 =
            latent.xs.iter().map(|x| (x * x - m2) * (x * x - m2)).sum::<f64>() / n as f64;
        let se = (var_m2 / n as f64).sqrt();
        assert!(
            (m2 - expect).abs() <= 4.0 * se,
            "m2 {m2} vs {expect} (4se = {})",
            4.0 * se
        );
    }

    #[test]
    fn acceptance_rate_for_canonical_states() {
        let noise = NoiseModel::new(0.9).unwrap();
        let states = [
            make_state(StateKind::Fock(0), 12).unwrap(),
            make_state(StateKind::Fock(1), 12).unwrap(),
            make_state(StateKind::Fock(5), 12).unwrap(),
            make_state(StateKind::Coherent(Complex64::new(0.5, 0.0)), 12).unwrap(),
            make_state(StateKind::Thermal(0.2), 12).unwrap(),
            make_state(
                StateKind::Mixture(vec![(0.5, StateKind::Fock(0)), (0.5, StateKind::Fock(4))]),
                12,
            )
            .unwrap(),
        ];
        for s in &states {
            let latent = sample_with_latent(s, &noise, 4000, 5).unwrap();
            assert!(
                latent.acceptance_rate >= 0.1,
                "acceptance {} too low for {}",
                latent.acceptance_rate,
                s.label()
            );
        }
    }
}
