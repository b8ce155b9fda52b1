//! Von Neumann coupling `U = exp(−i λ Q A_tot Δt)` between a product sample
//! and the pointer, with `Δt = τ/N`.
//!
//! For a fixed conjugate coordinate `q` the evolution is a product of
//! single-particle phases, so `⟨Ψ|U(q)|Ψ⟩ = χ(q)^N` with
//! `χ(q) = Σ_j |b_j|² e^{−iλqα_jΔt}`. The pointer marginal is the mixture of
//! shifted initial profiles weighted by the distribution of `A_tot`; both
//! routes are kept so they can be checked against each other.

use num_complex::Complex64;

use crate::born::ProbabilityRule;
use crate::ensemble::{self, ProductEnsemble, SumDistribution};
use crate::hilbert::{self, Observable, StateVector};
use crate::pointer::{PointerDensity, PointerGrid, PointerWavefunction, BOUNDARY_TOL};
use crate::{Error, Result};

/// Default minimum `|⟨post|Ψ⟩|` accepted by [`postselect_pointer`].
pub const DEFAULT_OVERLAP_FLOOR: f64 = 1e-3;

/// Coupling `λ`, total time budget `τ` and particle count `N`; `Δt = τ/N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementConfig {
    coupling: f64,
    tau: f64,
    count: usize,
}

impl MeasurementConfig {
    /// `coupling` may be zero (no interaction); `tau` must be positive.
    pub fn new(coupling: f64, tau: f64, count: usize) -> Result<Self> {
        if !(coupling >= 0.0) || !coupling.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "coupling must be finite and non-negative, got {coupling}"
            )));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tau must be positive, got {tau}"
            )));
        }
        if count < 1 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(Self {
            coupling,
            tau,
            count,
        })
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dt(&self) -> f64 {
        self.tau / self.count as f64
    }

    /// Same `λ` and `τ`, different `N`.
    pub fn with_count(&self, count: usize) -> Result<Self> {
        Self::new(self.coupling, self.tau, count)
    }
}

/// Exact joint state `U|Ψ⟩|Π⟩`, held as per-`q` factors plus the
/// distribution of the collective eigenvalue.
#[derive(Clone, Debug)]
pub struct JointEvolution {
    config: MeasurementConfig,
    state: StateVector,
    observable: Observable,
    weights: Vec<f64>,
    mean: f64,
    uncertainty: f64,
    chi: Vec<Complex64>,
    /// `1 − |χ(q)|²`, evaluated without cancellation.
    chi_defect: Vec<f64>,
    /// Initial pointer, momentum representation.
    pointer: PointerWavefunction,
    initial_mean: f64,
    sumdist: SumDistribution,
}

impl JointEvolution {
    pub fn config(&self) -> &MeasurementConfig {
        &self.config
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    /// Born weights `|b_j|²`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Ā`
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `ΔA`
    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn chi(&self) -> &[Complex64] {
        &self.chi
    }

    pub fn pointer(&self) -> &PointerWavefunction {
        &self.pointer
    }

    pub fn grid(&self) -> &PointerGrid {
        self.pointer.grid()
    }

    /// Mean pointer position before the interaction.
    pub fn initial_mean(&self) -> f64 {
        self.initial_mean
    }

    pub fn sum_distribution(&self) -> &SumDistribution {
        &self.sumdist
    }

    /// `Ū(q) = χ(q)^N`
    pub fn collective_factor(&self) -> Vec<Complex64> {
        let n = self.config.count as f64;
        self.chi
            .iter()
            .zip(&self.chi_defect)
            .map(|(c, defect)| {
                let modulus = (0.5 * n * (-defect).ln_1p()).exp();
                Complex64::from_polar(modulus, n * c.arg())
            })
            .collect()
    }

    /// Pointer amplitude attached to `|Ψ⟩` after the interaction:
    /// `φ(q) χ(q)^N` in the momentum representation (not normalized).
    pub fn parallel_branch(&self) -> Vec<Complex64> {
        self.pointer
            .amplitudes()
            .iter()
            .zip(self.collective_factor())
            .map(|(phi, u)| phi * u)
            .collect()
    }

    /// `∫ |φ(q)|² |χ(q)|^{2N} dq`
    pub fn parallel_weight(&self) -> f64 {
        let n = self.config.count as f64;
        self.q_average(|m| (n * (-self.chi_defect[m]).ln_1p()).exp())
    }

    /// `⟨Q²⟩` of the initial pointer.
    pub fn conjugate_second_moment(&self) -> f64 {
        let q = self.grid().momenta();
        self.q_average(|m| q[m] * q[m])
    }

    /// [`leading_order_weight`] with `⟨Q²⟩` taken from the stored pointer.
    pub fn leading_order_weight(&self) -> f64 {
        leading_order_from_parts(
            &self.config,
            self.uncertainty,
            self.conjugate_second_moment(),
        )
    }

    fn q_average(&self, f: impl Fn(usize) -> f64) -> f64 {
        let dq = self.grid().conjugate_spacing();
        self.pointer
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(m, phi)| phi.norm_sqr() * f(m))
            .sum::<f64>()
            * dq
    }

    /// Interval covered by the initial position profile (amplitude above the
    /// boundary tolerance).
    fn profile_support(&self) -> (f64, f64) {
        let pos = self.pointer.in_position();
        let xs = self.grid().positions();
        let inside: Vec<usize> = pos
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() >= BOUNDARY_TOL)
            .map(|(k, _)| k)
            .collect();
        match (inside.first(), inside.last()) {
            (Some(&lo), Some(&hi)) => (xs[lo], xs[hi]),
            _ => (self.initial_mean, self.initial_mean),
        }
    }

    fn check_shift_range(&self, low_shift: f64, high_shift: f64) -> Result<()> {
        let (lo, hi) = self.profile_support();
        let extent = self.grid().extent();
        let low = lo + low_shift;
        let high = hi + high_shift;
        if low <= -extent || high >= extent {
            return Err(Error::GridOverflow { low, high, extent });
        }
        Ok(())
    }
}

/// Builds the exact joint evolution. The pointer may be given in either
/// representation.
pub fn evolve_joint(
    ens: &ProductEnsemble,
    a: &Observable,
    cfg: &MeasurementConfig,
    w: &PointerWavefunction,
) -> Result<JointEvolution> {
    if ens.count() != cfg.count() {
        return Err(Error::CountMismatch {
            ensemble: ens.count(),
            other: cfg.count(),
        });
    }
    let weights = a.weights(ens.single())?;
    let alphas = a.eigenvalues();
    let mean = hilbert::weighted_mean(&weights, alphas);
    let uncertainty = hilbert::variance_about(&weights, alphas, mean)?.sqrt();
    let sumdist = ensemble::sum_distribution(ens, a, &ProbabilityRule::Born)?;

    let pointer = w.in_momentum();
    let initial_mean = crate::pointer::moments(&w.in_position()).0;
    let theta = cfg.coupling() * cfg.dt();
    let q = pointer.grid().momenta();
    let chi: Vec<Complex64> = q
        .iter()
        .map(|qm| {
            weights
                .iter()
                .zip(alphas)
                .map(|(wj, aj)| Complex64::from_polar(*wj, -theta * qm * aj))
                .sum()
        })
        .collect();
    // 1 − |χ|² = Σ_{j,k} w_j w_k · 2 sin²(θq(α_j − α_k)/2)
    let chi_defect: Vec<f64> = q
        .iter()
        .map(|qm| {
            let mut acc = 0.0;
            for (j, (wj, aj)) in weights.iter().zip(alphas).enumerate() {
                for (wk, ak) in weights.iter().zip(alphas).skip(j + 1) {
                    let s = (0.5 * theta * qm * (aj - ak)).sin();
                    acc += 4.0 * wj * wk * s * s;
                }
            }
            acc.clamp(0.0, 1.0)
        })
        .collect();

    Ok(JointEvolution {
        config: *cfg,
        state: ens.single().clone(),
        observable: a.clone(),
        weights,
        mean,
        uncertainty,
        chi,
        chi_defect,
        pointer,
        initial_mean,
        sumdist,
    })
}

/// Final pointer marginal `Σ_S P(S) |φ̃(π − λΔtS)|²`.
///
/// Each shifted copy is produced by a linear phase on the transformed
/// initial density, so one forward and one inverse transform suffice.
pub fn pointer_distribution_after(ev: &JointEvolution) -> Result<PointerDensity> {
    let step = ev.config.coupling() * ev.config.dt();
    ev.check_shift_range(step * ev.sumdist.min_value(), step * ev.sumdist.max_value())?;
    let multiplier: Vec<Complex64> = ev
        .grid()
        .momenta()
        .iter()
        .map(|q| ev.sumdist.characteristic(step * q))
        .collect();
    Ok(mix_initial_density(ev, &multiplier))
}

/// Same marginal computed through `χ(q)^N` instead of the enumerated
/// distribution.
pub fn pointer_distribution_factorized(ev: &JointEvolution) -> Result<PointerDensity> {
    let step = ev.config.coupling() * ev.config.dt();
    ev.check_shift_range(step * ev.sumdist.min_value(), step * ev.sumdist.max_value())?;
    Ok(mix_initial_density(ev, &ev.collective_factor()))
}

fn mix_initial_density(ev: &JointEvolution, multiplier: &[Complex64]) -> PointerDensity {
    let grid = *ev.grid();
    let rho0: Vec<Complex64> = ev
        .pointer
        .in_position()
        .density()
        .into_iter()
        .map(|p| Complex64::new(p, 0.0))
        .collect();
    let spectrum: Vec<Complex64> = grid
        .forward(&rho0)
        .iter()
        .zip(multiplier)
        .map(|(f, c)| f * c)
        .collect();
    let values = grid.inverse(&spectrum).iter().map(|z| z.re).collect();
    PointerDensity::new(grid, values)
}

/// `W = ∫ |φ(q)|² (1 − |χ(q)|^{2N}) dq`, the squared norm of the part of the
/// evolved state orthogonal to `|Ψ⟩ ⊗ (any pointer state)`.
pub fn orthogonal_weight(ev: &JointEvolution) -> f64 {
    let n = ev.config.count as f64;
    ev.q_average(|m| -(n * (-ev.chi_defect[m]).ln_1p()).exp_m1())
}

/// `⟨Q²⟩ λ² τ² ΔA² / N`.
pub fn leading_order_weight(
    ens: &ProductEnsemble,
    a: &Observable,
    cfg: &MeasurementConfig,
    sigma_q2: f64,
) -> Result<f64> {
    if ens.count() != cfg.count() {
        return Err(Error::CountMismatch {
            ensemble: ens.count(),
            other: cfg.count(),
        });
    }
    let delta = hilbert::uncertainty(ens.single(), a)?;
    Ok(leading_order_from_parts(cfg, delta, sigma_q2))
}

fn leading_order_from_parts(cfg: &MeasurementConfig, delta: f64, sigma_q2: f64) -> f64 {
    let n = cfg.count() as f64;
    let total_variance = n * delta * delta;
    sigma_q2 * cfg.coupling().powi(2) * total_variance * cfg.dt().powi(2)
}

/// `F = |∫ |φ(q)|² e^{iλqNĀΔt} χ(q)^N dq|²`: overlap of the exact evolved
/// state with the rigidly shifted approximation.
pub fn fidelity_to_shifted(ev: &JointEvolution) -> f64 {
    let shift = ev.config.coupling() * ev.config.tau() * ev.mean;
    let dq = ev.grid().conjugate_spacing();
    let q = ev.grid().momenta();
    let z: Complex64 = ev
        .pointer
        .amplitudes()
        .iter()
        .zip(ev.collective_factor())
        .zip(&q)
        .map(|((phi, u), qm)| u * Complex64::from_polar(phi.norm_sqr(), qm * shift))
        .sum::<Complex64>()
        * dq;
    z.norm_sqr().min(1.0)
}

/// `1 − F`
pub fn infidelity(ev: &JointEvolution) -> f64 {
    1.0 - fidelity_to_shifted(ev)
}

/// Product post-selection `⟨post|`.
#[derive(Clone, Debug, PartialEq)]
pub enum PostSelection {
    /// One state used for every particle.
    Uniform(StateVector),
    /// One state per particle, in particle order.
    PerParticle(Vec<StateVector>),
}

impl PostSelection {
    fn factors(&self, count: usize) -> Result<Vec<(&StateVector, usize)>> {
        match self {
            PostSelection::Uniform(s) => Ok(vec![(s, count)]),
            PostSelection::PerParticle(states) => {
                if states.len() != count {
                    return Err(Error::CountMismatch {
                        ensemble: count,
                        other: states.len(),
                    });
                }
                Ok(states.iter().map(|s| (s, 1)).collect())
            }
        }
    }
}

/// `⟨post|Ψ⟩`
pub fn postselection_overlap(ev: &JointEvolution, post: &PostSelection) -> Result<Complex64> {
    let mut overlap = Complex64::new(1.0, 0.0);
    for (s, multiplicity) in post.factors(ev.config.count)? {
        overlap *= s.inner(&ev.state)?.powi(multiplicity as i32);
    }
    Ok(overlap)
}

/// Pointer density conditioned on a successful product post-selection.
///
/// For fixed `q` each particle contributes
/// `η_i(q) = Σ_j ⟨post_i|a_j⟩ b_j e^{−iλqα_jΔt}`; the conditional pointer
/// amplitude is `φ(q) Π_i η_i(q)`, renormalized.
pub fn postselect_pointer(
    ev: &JointEvolution,
    post: &PostSelection,
    overlap_floor: f64,
) -> Result<PointerDensity> {
    let factors = post.factors(ev.config.count)?;
    let overlap = postselection_overlap(ev, post)?.norm();
    if !(overlap >= overlap_floor) {
        return Err(Error::OverlapBelowFloor {
            overlap,
            floor: overlap_floor,
        });
    }
    let b = ev.observable.coefficients(&ev.state)?;
    let alphas = ev.observable.eigenvalues();
    let theta = ev.config.coupling() * ev.config.dt();
    let q = ev.grid().momenta();

    let mut amp: Vec<Complex64> = ev.pointer.amplitudes().to_vec();
    for (s, multiplicity) in factors {
        let c = ev.observable.coefficients(s)?;
        let weights: Vec<Complex64> = c.iter().zip(&b).map(|(cj, bj)| cj.conj() * bj).collect();
        // divide by |η(0)| to keep the running product O(1)
        let scale = weights.iter().sum::<Complex64>().norm();
        for (a, qm) in amp.iter_mut().zip(&q) {
            let eta: Complex64 = weights
                .iter()
                .zip(alphas)
                .map(|(wj, aj)| wj * Complex64::from_polar(1.0, -theta * qm * aj))
                .sum::<Complex64>()
                / scale;
            *a *= if multiplicity == 1 {
                eta
            } else {
                eta.powi(multiplicity as i32)
            };
        }
    }
    let norm =
        (amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * ev.grid().conjugate_spacing()).sqrt();
    amp.iter_mut().for_each(|a| *a /= norm);
    let conditional =
        PointerWavefunction::from_raw(*ev.grid(), crate::pointer::Representation::Momentum, amp)
            .in_position();
    conditional.check_boundary().map_err(|_| {
        let (low, high) = crate::pointer::moments(&conditional);
        Error::GridOverflow {
            low: low - high.sqrt(),
            high: low + high.sqrt(),
            extent: ev.grid().extent(),
        }
    })?;
    Ok(PointerDensity::new(*ev.grid(), conditional.density()))
}
