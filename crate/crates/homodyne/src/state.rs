//! Truncated density matrices in the Fock basis, the decay class R(B, r),
//! canonical test-state factories, and matrix-space norms.

use crate::error::{Error, Result};
use crate::specfun::ln_factorial;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Tolerance on the truncation trace deficit accepted by the factories.
pub const TRACE_DEFICIT_TOL: f64 = 1e-6;

/// Eigenvalue floor for physical states.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

/// Decay class R(B, r): |rho_{m,n}| <= exp(-B (m+n)^{r/2}).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StateClass {
    pub b: f64,
    pub r: f64,
    /// beta < B entering the decay propositions: B/(1+sqrt(B))^2 when r = 2
    /// (forced), otherwise a chosen beta < B (default 0.9 B).
    pub beta: f64,
}

impl StateClass {
    pub fn new(b: f64, r: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::InvalidParameter {
                name: "B",
                reason: format!("must be positive, got {b}"),
            });
        }
        if !(r > 0.0 && r <= 2.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: format!("must lie in (0, 2], got {r}"),
            });
        }
        let beta = if r == 2.0 {
            b / (1.0 + b.sqrt()).powi(2)
        } else {
            0.9 * b
        };
        Ok(Self { b, r, beta })
    }

    /// Override the free beta < B (only meaningful for r < 2).
    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if self.r == 2.0 {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "beta is fixed to B/(1+sqrt(B))^2 when r = 2".into(),
            });
        }
        if !(beta > 0.0 && beta < self.b) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must lie in (0, B), got {beta}"),
            });
        }
        self.beta = beta;
        Ok(self)
    }

    /// theta = 1/(1+sqrt(B))^2, the r = 2 geometry constant.
    pub fn theta(&self) -> f64 {
        1.0 / (1.0 + self.b.sqrt()).powi(2)
    }

    /// The class envelope exp(-B (m+n)^{r/2}).
    pub fn bound(&self, m: usize, n: usize) -> f64 {
        (-self.b * ((m + n) as f64).powf(self.r / 2.0)).exp()
    }
}

/// State factory kinds.
#[derive(Debug, Clone)]
pub enum StateKind {
    Fock(usize),
    Coherent(Complex64),
    Thermal(f64),
    Mixture(Vec<(f64, StateKind)>),
}

impl StateKind {
    fn label(&self) -> String {
        match self {
            StateKind::Fock(k) => format!("fock({k})"),
            StateKind::Coherent(a) => format!("coherent({}{:+}i)", a.re, a.im),
            StateKind::Thermal(nb) => format!("thermal({nb})"),
            StateKind::Mixture(parts) => {
                let inner: Vec<String> =
                    parts.iter().map(|(w, k)| format!("{w}*{}", k.label())).collect();
                format!("mixture({})", inner.join(","))
            }
        }
    }
}

/// Truncated density matrix: complex Hermitian, trace within
/// [1 - 1e-6, 1] unless flagged `raw` (estimator output before projection).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<Complex64>,
    class: Option<StateClass>,
    raw: bool,
    trace_deficit: f64,
    label: String,
}

impl DensityMatrix {
    /// Build a physical state from row-major entries; verifies hermiticity
    /// exactly, trace within tolerance, and the eigenvalue floor.
    pub fn physical(dim: usize, entries: Vec<Complex64>, label: impl Into<String>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimMismatch(entries.len(), dim * dim));
        }
        let dm = Self {
            dim,
            entries,
            class: None,
            raw: false,
            trace_deficit: 0.0,
            label: label.into(),
        };
        dm.validate()
    }

    fn validate(mut self) -> Result<Self> {
        let d = self.dim;
        for m in 0..d {
            if self.entry(m, m).im != 0.0 {
                return Err(Error::Inconsistent(format!(
                    "diagonal entry ({m},{m}) not real"
                )));
            }
            for n in 0..m {
                let a = self.entry(m, n);
                let b = self.entry(n, m);
                if a.re != b.re || a.im != -b.im {
                    return Err(Error::Inconsistent(format!(
                        "hermiticity violated at ({m},{n})"
                    )));
                }
            }
        }
        let trace: f64 = (0..d).map(|m| self.entry(m, m).re).sum();
        let deficit = 1.0 - trace;
        if !(-1e-12..=TRACE_DEFICIT_TOL).contains(&deficit) {
            return Err(Error::Inconsistent(format!(
                "trace {trace} outside [1 - 1e-6, 1]"
            )));
        }
        self.trace_deficit = deficit.max(0.0);
        let min_eig = self
            .eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < EIGENVALUE_FLOOR {
            return Err(Error::Inconsistent(format!(
                "negative eigenvalue {min_eig}"
            )));
        }
        Ok(self)
    }

    /// Build a raw (possibly unphysical) Hermitian matrix from its lower
    /// triangle, filling the upper triangle by conjugation bit-exactly.
    pub fn raw_from_lower(
        dim: usize,
        lower: impl Fn(usize, usize) -> Complex64,
        label: impl Into<String>,
    ) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for m in 0..dim {
            for n in 0..=m {
                let v = lower(m, n);
                let v = if m == n { Complex64::new(v.re, 0.0) } else { v };
                entries[m * dim + n] = v;
                entries[n * dim + m] = v.conj();
            }
        }
        let trace: f64 = (0..dim).map(|m| entries[m * dim + m].re).sum();
        Self {
            dim,
            entries,
            class: None,
            raw: true,
            trace_deficit: 1.0 - trace,
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.entries[m * self.dim + n]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn is_raw(&self) -> bool {
        self.raw
    }

    pub fn trace_deficit(&self) -> f64 {
        self.trace_deficit
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn class(&self) -> Option<StateClass> {
        self.class
    }

    pub fn set_class(&mut self, class: StateClass) {
        self.class = Some(class);
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|m| self.entry(m, m).re).sum()
    }

    /// Entry with out-of-range indices reading as zero (truncation view).
    pub fn entry_or_zero(&self, m: usize, n: usize) -> Complex64 {
        if m < self.dim && n < self.dim {
            self.entry(m, n)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |m, n| self.entry(m, n))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.to_dmatrix().symmetric_eigenvalues().iter().copied().collect()
    }

    /// Hilbert-Schmidt norm squared: sum of |rho_{j,k}|^2.
    pub fn hs_norm_sq(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum()
    }

    /// L2 distance squared between two matrices, tr|a-b|^2.
    pub fn distance_sq(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum())
    }

    /// Zero-padded copy with a larger dimension.
    pub fn embed(&self, dim: usize) -> DensityMatrix {
        assert!(dim >= self.dim);
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for m in 0..self.dim {
            for n in 0..self.dim {
                entries[m * dim + n] = self.entry(m, n);
            }
        }
        DensityMatrix {
            dim,
            entries,
            class: self.class,
            raw: self.raw,
            trace_deficit: self.trace_deficit,
            label: self.label.clone(),
        }
    }
}

/// Report of a class membership check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClassReport {
    pub member: bool,
    pub worst_cell: (usize, usize),
    /// min over cells of bound - |rho_{m,n}| (negative iff not a member).
    pub margin: f64,
}

/// Check |rho_{m,n}| <= exp(-B (m+n)^{r/2}) cell by cell.
pub fn class_check(rho: &DensityMatrix, cls: &StateClass) -> ClassReport {
    let mut margin = f64::INFINITY;
    let mut worst = (0, 0);
    for m in 0..rho.dim() {
        for n in 0..rho.dim() {
            let gap = cls.bound(m, n) - rho.entry(m, n).norm();
            if gap < margin {
                margin = gap;
                worst = (m, n);
            }
        }
    }
    ClassReport {
        member: margin >= 0.0,
        worst_cell: worst,
        margin,
    }
}

/// Smallest dimension at which the factory truncation deficit drops below
/// [`TRACE_DEFICIT_TOL`].
fn required_dim(kind: &StateKind) -> usize {
    match kind {
        StateKind::Fock(k) => k + 1,
        StateKind::Coherent(a) => {
            let lam = a.norm_sqr();
            let mut term = (-lam).exp();
            let mut cum = term;
            let mut d = 1;
            while 1.0 - cum >= TRACE_DEFICIT_TOL && d < 4096 {
                term *= lam / d as f64;
                cum += term;
                d += 1;
            }
            d
        }
        StateKind::Thermal(nb) => {
            if *nb <= 0.0 {
                1
            } else {
                let q = nb / (1.0 + nb);
                (TRACE_DEFICIT_TOL.ln() / q.ln()).ceil() as usize
            }
        }
        StateKind::Mixture(parts) => parts.iter().map(|(_, k)| required_dim(k)).max().unwrap_or(1),
    }
}

/// Test-state factory. Truncation mass loss is reported as
/// `trace_deficit`, never renormalized away.
pub fn make_state(kind: StateKind, dim: usize) -> Result<DensityMatrix> {
    let need = required_dim(&kind);
    if dim < need {
        return Err(Error::InsufficientDim {
            dim,
            required: need,
            reason: format!("trace deficit of {} exceeds 1e-6", kind.label()),
        });
    }
    let label = kind.label();
    let entries = build_entries(&kind, dim)?;
    let dm = DensityMatrix {
        dim,
        entries,
        class: None,
        raw: false,
        trace_deficit: 0.0,
        label,
    };
    dm.validate()
}

fn build_entries(kind: &StateKind, dim: usize) -> Result<Vec<Complex64>> {
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    match kind {
        StateKind::Fock(k) => {
            entries[k * dim + k] = Complex64::new(1.0, 0.0);
        }
        StateKind::Coherent(a) => {
            // amplitude vector c_m = e^{-|a|^2/2} a^m / sqrt(m!)
            let mut c = Vec::with_capacity(dim);
            let scale = (-0.5 * a.norm_sqr()).exp();
            for m in 0..dim {
                let mag = (-0.5 * ln_factorial(m)).exp();
                c.push(a.powu(m as u32) * mag * scale);
            }
            for m in 0..dim {
                for n in 0..dim {
                    entries[m * dim + n] = c[m] * c[n].conj();
                }
            }
        }
        StateKind::Thermal(nb) => {
            if *nb < 0.0 {
                return Err(Error::InvalidParameter {
                    name: "mean_photons",
                    reason: format!("must be nonnegative, got {nb}"),
                });
            }
            for k in 0..dim {
                let p = nb.powi(k as i32) / (1.0 + nb).powi(k as i32 + 1);
                entries[k * dim + k] = Complex64::new(p, 0.0);
            }
        }
        StateKind::Mixture(parts) => {
            let wsum: f64 = parts.iter().map(|(w, _)| w).sum();
            if parts.iter().any(|(w, _)| *w < 0.0) || (wsum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter {
                    name: "mixture weights",
                    reason: format!("must be nonnegative and sum to 1, got sum {wsum}"),
                });
            }
            for (w, k) in parts {
                let part = build_entries(k, dim)?;
                for (e, p) in entries.iter_mut().zip(part) {
                    *e += p * *w;
                }
            }
            // exact hermitian symmetrization of accumulated roundoff
            for m in 0..dim {
                entries[m * dim + m] = Complex64::new(entries[m * dim + m].re, 0.0);
                for n in 0..m {
                    let v = entries[m * dim + n];
                    entries[n * dim + m] = v.conj();
                }
            }
        }
    }
    Ok(entries)
}
