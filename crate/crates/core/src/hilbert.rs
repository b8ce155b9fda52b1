//! Single-particle states, spectral observables and the decomposition
//! `A|ψ⟩ = Ā|ψ⟩ + ΔA|ψ⊥⟩`.
//!
//! An [`Observable`] is stored spectrally: real eigenvalues plus a unitary
//! matrix whose columns are the eigenvectors. State amplitudes live in the
//! same computational basis as that matrix; with the default identity basis
//! they are directly the eigenbasis amplitudes `b_j`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, IDENTITY_TOL, NORM_TOL};

/// Minimum eigenvalue gap accepted when diagonalizing a dense matrix.
pub const HERMITIAN_GAP_TOL: f64 = 1e-8;
/// Minimum eigenvalue gap produced by [`random_instance`].
pub const RANDOM_SPECTRUM_GAP: f64 = 1e-3;
/// Below this uncertainty the orthogonal component is reported as absent.
pub const EIGENSTATE_TOL: f64 = 1e-12;

/// A normalized pure state of one particle.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wraps amplitudes that must already be normalized within [`NORM_TOL`].
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::EmptyDimension);
        }
        let deviation = (norm_sqr(&amplitudes) - 1.0).abs();
        if deviation > NORM_TOL {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(Self { amplitudes })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::EmptyDimension);
        }
        let norm = norm_sqr(&amplitudes).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroState);
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }
}

/// A Hermitian operator with a non-degenerate real spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    eigenvalues: Vec<f64>,
    /// Columns are eigenvectors; `None` means the identity.
    basis: Option<DMatrix<Complex64>>,
}

impl Observable {
    /// Observable diagonal in the computational basis.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptyDimension);
        }
        let gap = min_gap(&eigenvalues);
        if !(gap > 0.0) {
            return Err(Error::DegenerateSpectrum {
                gap,
                threshold: 0.0,
            });
        }
        if eigenvalues.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidConfig("eigenvalues must be finite".into()));
        }
        Ok(Self {
            eigenvalues,
            basis: None,
        })
    }

    /// Observable with explicit eigenvectors (columns of `basis`).
    pub fn with_basis(eigenvalues: Vec<f64>, basis: DMatrix<Complex64>) -> Result<Self> {
        let mut obs = Self::new(eigenvalues)?;
        let d = obs.dim();
        if basis.nrows() != d || basis.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: basis.nrows().max(basis.ncols()),
            });
        }
        let deviation = unitarity_defect(&basis);
        if deviation > IDENTITY_TOL {
            return Err(Error::NonUnitaryBasis { deviation });
        }
        obs.basis = Some(basis);
        Ok(obs)
    }

    /// Diagonalizes a dense Hermitian matrix. Spectra with a gap below
    /// [`HERMITIAN_GAP_TOL`] are rejected.
    pub fn from_hermitian(matrix: &DMatrix<Complex64>) -> Result<Self> {
        let d = matrix.nrows();
        if d == 0 {
            return Err(Error::EmptyDimension);
        }
        if matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.ncols(),
            });
        }
        let deviation = (matrix - matrix.adjoint()).camax();
        if deviation > IDENTITY_TOL * matrix.camax().max(1.0) {
            return Err(Error::NonHermitian { deviation });
        }
        let eig = matrix.clone().symmetric_eigen();
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let gap = min_gap(&eigenvalues);
        if gap < HERMITIAN_GAP_TOL {
            return Err(Error::DegenerateSpectrum {
                gap,
                threshold: HERMITIAN_GAP_TOL,
            });
        }
        Self::with_basis(eigenvalues, eig.eigenvectors)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> Option<&DMatrix<Complex64>> {
        self.basis.as_ref()
    }

    pub fn min_gap(&self) -> f64 {
        min_gap(&self.eigenvalues)
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Eigenbasis coefficients `b_j = ⟨a_j|ψ⟩`.
    pub fn coefficients(&self, psi: &StateVector) -> Result<Vec<Complex64>> {
        check_dim(self.dim(), psi.dim())?;
        Ok(self.to_eigenbasis(psi.amplitudes()))
    }

    /// Born weights `|b_j|²` of `psi` in this observable's eigenbasis.
    pub fn weights(&self, psi: &StateVector) -> Result<Vec<f64>> {
        Ok(self
            .coefficients(psi)?
            .iter()
            .map(|b| b.norm_sqr())
            .collect())
    }

    /// `A|ψ⟩` in the computational basis.
    pub fn apply(&self, psi: &StateVector) -> Result<Vec<Complex64>> {
        let coeffs = self.coefficients(psi)?;
        let scaled: Vec<Complex64> = coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(b, a)| b * a)
            .collect();
        Ok(self.expand_eigenbasis(&scaled))
    }

    /// Dense matrix `V diag(α) V†`.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let diag = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(self.eigenvalues[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        match &self.basis {
            None => diag,
            Some(v) => v * diag * v.adjoint(),
        }
    }

    /// `W A W†`, keeping the spectrum.
    pub fn conjugated(&self, unitary: &DMatrix<Complex64>) -> Result<Self> {
        let basis = match &self.basis {
            None => unitary.clone(),
            Some(v) => unitary * v,
        };
        Self::with_basis(self.eigenvalues.clone(), basis)
    }

    pub(crate) fn to_eigenbasis(&self, amplitudes: &[Complex64]) -> Vec<Complex64> {
        match &self.basis {
            None => amplitudes.to_vec(),
            Some(v) => (0..self.dim())
                .map(|j| {
                    v.column(j)
                        .iter()
                        .zip(amplitudes)
                        .map(|(vij, a)| vij.conj() * a)
                        .sum()
                })
                .collect(),
        }
    }

    pub(crate) fn expand_eigenbasis(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        match &self.basis {
            None => coeffs.to_vec(),
            Some(v) => (0..self.dim())
                .map(|i| v.row(i).iter().zip(coeffs).map(|(vij, c)| vij * c).sum())
                .collect(),
        }
    }
}

/// Result of splitting `A|ψ⟩` into parts parallel and orthogonal to `|ψ⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub mean: f64,
    pub uncertainty: f64,
    /// Absent for eigenstates (`ΔA ≤ 1e-12`).
    pub perp: Option<StateVector>,
}

impl Decomposition {
    /// `‖A|ψ⟩ − Ā|ψ⟩ − ΔA|ψ⊥⟩‖`
    pub fn reconstruction_residual(&self, psi: &StateVector, a: &Observable) -> Result<f64> {
        let applied = a.apply(psi)?;
        let residual: Vec<Complex64> = applied
            .iter()
            .enumerate()
            .map(|(i, ai)| {
                let perp = self
                    .perp
                    .as_ref()
                    .map_or(Complex64::new(0.0, 0.0), |p| p.amplitudes()[i]);
                ai - psi.amplitudes()[i] * self.mean - perp * self.uncertainty
            })
            .collect();
        Ok(norm_sqr(&residual).sqrt())
    }

    /// `|⟨ψ|ψ⊥⟩|`, zero when the orthogonal part is absent.
    pub fn orthogonality(&self, psi: &StateVector) -> Result<f64> {
        match &self.perp {
            None => Ok(0.0),
            Some(p) => Ok(psi.inner(p)?.norm()),
        }
    }

    /// `ψ⊥` with its global phase chosen so that the first nonzero eigenbasis
    /// component is real and positive, together with the phase `e^{iφ}`
    /// removed: `ψ⊥ = e^{iφ} · canonical`.
    pub fn canonical_perp(&self, a: &Observable) -> Result<Option<(StateVector, Complex64)>> {
        let Some(perp) = &self.perp else {
            return Ok(None);
        };
        let coeffs = a.coefficients(perp)?;
        let phase = coeffs
            .iter()
            .find(|c| c.norm() > EIGENSTATE_TOL)
            .map_or(Complex64::new(1.0, 0.0), |c| c / c.norm());
        let rotated: Vec<Complex64> = perp.amplitudes().iter().map(|z| z / phase).collect();
        Ok(Some((StateVector::normalized(rotated)?, phase)))
    }
}

/// `Ā = Σ_j |b_j|² α_j`
pub fn expectation(psi: &StateVector, a: &Observable) -> Result<f64> {
    let weights = a.weights(psi)?;
    Ok(weighted_mean(&weights, a.eigenvalues()))
}

/// `ΔA = √⟨(A − Ā)²⟩`
pub fn uncertainty(psi: &StateVector, a: &Observable) -> Result<f64> {
    let weights = a.weights(psi)?;
    let mean = weighted_mean(&weights, a.eigenvalues());
    variance_about(&weights, a.eigenvalues(), mean).map(f64::sqrt)
}

/// Splits `A|ψ⟩ = Ā|ψ⟩ + ΔA|ψ⊥⟩` with `ΔA ≥ 0`.
///
/// `ψ⊥ = (A − Ā)|ψ⟩ / ΔA`; its phase follows the phase of `ψ`.
pub fn decompose(psi: &StateVector, a: &Observable) -> Result<Decomposition> {
    let coeffs = a.coefficients(psi)?;
    let weights: Vec<f64> = coeffs.iter().map(|b| b.norm_sqr()).collect();
    let mean = weighted_mean(&weights, a.eigenvalues());
    let uncertainty = variance_about(&weights, a.eigenvalues(), mean)?.sqrt();
    if uncertainty <= EIGENSTATE_TOL {
        return Ok(Decomposition {
            mean,
            uncertainty,
            perp: None,
        });
    }
    let perp_coeffs: Vec<Complex64> = coeffs
        .iter()
        .zip(a.eigenvalues())
        .map(|(b, alpha)| b * ((alpha - mean) / uncertainty))
        .collect();
    let perp = StateVector::normalized(a.expand_eigenbasis(&perp_coeffs))?;
    Ok(Decomposition {
        mean,
        uncertainty,
        perp: Some(perp),
    })
}

/// Deterministic random state and non-degenerate spectrum.
///
/// Amplitudes are complex Gaussian then normalized; eigenvalues are uniform
/// on `[-5, 5]`, redrawn until every pairwise gap is at least
/// [`RANDOM_SPECTRUM_GAP`]. The observable uses the identity basis.
pub fn random_instance(dim: usize, seed: u64) -> Result<(StateVector, Observable)> {
    if dim < 1 {
        return Err(Error::EmptyDimension);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = random_state(dim, &mut rng)?;
    let eigenvalues = loop {
        let candidate: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        if min_gap(&candidate) >= RANDOM_SPECTRUM_GAP {
            break candidate;
        }
    };
    Ok((psi, Observable::new(eigenvalues)?))
}

/// Complex Gaussian vector, normalized.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<StateVector> {
    let amps: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    StateVector::normalized(amps)
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            q.column_mut(j).iter_mut().for_each(|x| *x *= phase);
        }
    }
    q
}

/// `max |V†V − I|`
pub fn unitarity_defect(basis: &DMatrix<Complex64>) -> f64 {
    let d = basis.nrows();
    let gram = basis.adjoint() * basis;
    (gram - DMatrix::<Complex64>::identity(d, d)).camax()
}

pub(crate) fn inner(bra: &[Complex64], ket: &[Complex64]) -> Complex64 {
    bra.iter().zip(ket).map(|(b, k)| b.conj() * k).sum()
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// Mean normalized by the total weight.
pub(crate) fn weighted_mean(weights: &[f64], values: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    weights.iter().zip(values).map(|(w, a)| w * a).sum::<f64>() / total
}

/// Two-pass variance; the radicand is a sum of non-negative terms, so only
/// corrupted inputs (NaN, negative weights) can push it below `-1e-12`.
pub(crate) fn variance_about(weights: &[f64], values: &[f64], mean: f64) -> Result<f64> {
    let radicand: f64 = weights
        .iter()
        .zip(values)
        .map(|(w, a)| w * (a - mean).powi(2))
        .sum();
    if radicand.is_nan() || radicand < -NORM_TOL {
        return Err(Error::NegativeVariance { radicand });
    }
    Ok(radicand.max(0.0))
}

fn min_gap(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// JSON form `{"amplitudes": [[re,im],…], "eigenvalues": […], "basis": [[re,im],…]}`
/// with the optional basis stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub amplitudes: Vec<[f64; 2]>,
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<[f64; 2]>>,
}

impl InstanceJson {
    pub fn from_instance(psi: &StateVector, a: &Observable) -> Self {
        let basis = a.basis().map(|v| {
            let d = v.nrows();
            (0..d * d)
                .map(|k| {
                    let z = v[(k / d, k % d)];
                    [z.re, z.im]
                })
                .collect()
        });
        Self {
            amplitudes: psi.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
            eigenvalues: a.eigenvalues().to_vec(),
            basis,
        }
    }

    /// Builds the pair; the state must already be normalized.
    pub fn into_instance(self) -> Result<(StateVector, Observable)> {
        let d = self.eigenvalues.len();
        let psi = StateVector::new(to_complex(&self.amplitudes))?;
        check_dim(d, psi.dim())?;
        let a = match self.basis {
            None => Observable::new(self.eigenvalues)?,
            Some(flat) => {
                if flat.len() != d * d {
                    return Err(Error::DimensionMismatch {
                        expected: d * d,
                        found: flat.len(),
                    });
                }
                let entries = to_complex(&flat);
                Observable::with_basis(self.eigenvalues, DMatrix::from_row_slice(d, d, &entries))?
            }
        };
        Ok((psi, a))
    }
}

pub(crate) fn to_complex(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}
