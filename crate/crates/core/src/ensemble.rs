//! Product samples `|ψ⟩^⊗N`, the collective observable `A_tot = Σ_i A_i`,
//! and the exact distribution of its eigenvalue.
//!
//! Nothing here stores a `d^N` vector. The collective eigenvalue distribution
//! is enumerated over occupation vectors `(N_1, …, N_d)`, of which there are
//! `C(N + d − 1, d − 1)`: polynomial in `N` for fixed `d`.

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::born::ProbabilityRule;
use crate::hilbert::{self, Decomposition, Observable, StateVector};
use crate::{Error, Result};

/// Largest number of occupation vectors [`sum_distribution`] will enumerate.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;
/// Relative tolerance (times `max|α|`) for merging coincident sums.
pub const MERGE_TOL: f64 = 1e-9;

/// `N` identical, unentangled copies of one state.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductEnsemble {
    single: StateVector,
    count: usize,
}

impl ProductEnsemble {
    pub fn new(single: StateVector, count: usize) -> Result<Self> {
        if count < 1 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(Self { single, count })
    }

    pub fn single(&self) -> &StateVector {
        &self.single
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `⟨Ψ|Φ⟩` for two product states of equal size.
    pub fn overlap(&self, other: &ProductEnsemble) -> Result<Complex64> {
        if self.count != other.count {
            return Err(Error::CountMismatch {
                ensemble: self.count,
                other: other.count,
            });
        }
        Ok(self.single.inner(&other.single)?.powi(self.count as i32))
    }
}

/// `A_tot = Σ_i A_i` over `count` particles.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveObservable {
    single: Observable,
    count: usize,
}

impl CollectiveObservable {
    pub fn new(single: Observable, count: usize) -> Result<Self> {
        if count < 1 {
            return Err(Error::EmptyEnsemble);
        }
        Ok(Self { single, count })
    }

    pub fn single(&self) -> &Observable {
        &self.single
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn check(&self, ens: &ProductEnsemble) -> Result<()> {
        if self.count != ens.count {
            return Err(Error::CountMismatch {
                ensemble: ens.count,
                other: self.count,
            });
        }
        Ok(())
    }
}

/// `N · Ā`
pub fn collective_mean(ens: &ProductEnsemble, a: &CollectiveObservable) -> Result<f64> {
    a.check(ens)?;
    Ok(ens.count as f64 * hilbert::expectation(&ens.single, &a.single)?)
}

/// `√N · ΔA`
pub fn collective_uncertainty(ens: &ProductEnsemble, a: &CollectiveObservable) -> Result<f64> {
    a.check(ens)?;
    Ok((ens.count as f64).sqrt() * hilbert::uncertainty(&ens.single, &a.single)?)
}

/// The normalized state `(1/√N) Σ_r |ψ⟩^⊗(N−1) ⊗ |ψ⊥⟩_r`, kept symbolically.
#[derive(Clone, Debug, PartialEq)]
pub struct PerpendicularEnsemble {
    single: StateVector,
    perp: StateVector,
    count: usize,
    normalization: f64,
}

impl PerpendicularEnsemble {
    pub fn new(single: StateVector, perp: StateVector, count: usize) -> Result<Self> {
        if count < 1 {
            return Err(Error::EmptyEnsemble);
        }
        if single.dim() != perp.dim() {
            return Err(Error::DimensionMismatch {
                expected: single.dim(),
                found: perp.dim(),
            });
        }
        Ok(Self {
            single,
            perp,
            count,
            normalization: 1.0 / (count as f64).sqrt(),
        })
    }

    pub fn single(&self) -> &StateVector {
        &self.single
    }

    pub fn perp(&self) -> &StateVector {
        &self.perp
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Factor multiplying the unnormalized sum over `r`; the bare sum has
    /// norm `√N`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// `⟨Ψ|Ψ⊥⟩ = c · N ⟨ψ|ψ⟩^{N−1} ⟨ψ|ψ⊥⟩`
    pub fn overlap_with_product(&self) -> Complex64 {
        let n = self.count as f64;
        let psi_psi = hilbert::inner(self.single.amplitudes(), self.single.amplitudes());
        let psi_perp = hilbert::inner(self.single.amplitudes(), self.perp.amplitudes());
        psi_psi.powi(self.count as i32 - 1) * psi_perp * n * self.normalization
    }

    /// `⟨Ψ⊥|Ψ⊥⟩`: `N` diagonal terms plus `N(N−1)` cross terms `|⟨ψ|ψ⊥⟩|²`.
    pub fn self_overlap(&self) -> f64 {
        let n = self.count as f64;
        let pp = hilbert::norm_sqr(self.single.amplitudes());
        let qq = hilbert::norm_sqr(self.perp.amplitudes());
        let pq = hilbert::inner(self.single.amplitudes(), self.perp.amplitudes()).norm_sqr();
        let diagonal = n * pp.powi(self.count as i32 - 1) * qq;
        let cross = if self.count >= 2 {
            n * (n - 1.0) * pp.powi(self.count as i32 - 2) * pq
        } else {
            0.0
        };
        (diagonal + cross) * self.normalization * self.normalization
    }
}

/// `A_tot|Ψ⟩ = NĀ|Ψ⟩ + √N ΔA |Ψ⊥⟩` for a product sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleDecomposition {
    pub mean: f64,
    pub uncertainty: f64,
    /// Absent when `|ψ⟩` is an eigenstate.
    pub perp: Option<PerpendicularEnsemble>,
}

/// Lifts the single-particle decomposition to the collective observable.
pub fn ensemble_decompose(
    ens: &ProductEnsemble,
    a: &CollectiveObservable,
) -> Result<EnsembleDecomposition> {
    a.check(ens)?;
    let Decomposition {
        mean,
        uncertainty,
        perp,
    } = hilbert::decompose(&ens.single, &a.single)?;
    let n = ens.count as f64;
    let perp = perp
        .map(|p| PerpendicularEnsemble::new(ens.single.clone(), p, ens.count))
        .transpose()?;
    Ok(EnsembleDecomposition {
        mean: n * mean,
        uncertainty: n.sqrt() * uncertainty,
        perp,
    })
}

/// One distinct value of the collective eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct SumEntry {
    pub value: f64,
    pub prob: f64,
    /// Occupation vectors `(N_1, …, N_d)` whose sum `Σ N_j α_j` lands here.
    pub occupations: Vec<Vec<u32>>,
}

/// Exact probability table of `S = Σ_i α_{j_i}`, sorted by value.
#[derive(Clone, Debug, PartialEq)]
pub struct SumDistribution {
    entries: Vec<SumEntry>,
}

impl SumDistribution {
    pub fn entries(&self) -> &[SumEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_prob(&self) -> f64 {
        self.entries.iter().map(|e| e.prob).sum()
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|e| e.prob * e.value).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.entries
            .iter()
            .map(|e| e.prob * (e.value - mean).powi(2))
            .sum()
    }

    pub fn min_value(&self) -> f64 {
        self.entries.first().map_or(0.0, |e| e.value)
    }

    pub fn max_value(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.value)
    }

    /// `Σ_S P(S) e^{−i t S}`
    pub fn characteristic(&self, t: f64) -> Complex64 {
        self.entries
            .iter()
            .filter(|e| e.prob > 0.0)
            .map(|e| Complex64::from_polar(e.prob, -t * e.value))
            .sum()
    }

    /// CSV with header `value,prob`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,prob\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.value, e.prob));
        }
        out
    }
}

/// Distribution of the collective eigenvalue when each particle yields
/// outcome `j` with the probability the rule assigns to `ψ`'s eigenbasis
/// amplitudes.
pub fn sum_distribution(
    ens: &ProductEnsemble,
    a: &Observable,
    rule: &ProbabilityRule,
) -> Result<SumDistribution> {
    let coeffs = a.coefficients(&ens.single)?;
    let probs = rule.probabilities(&coeffs)?;
    distribution_from_probabilities(&probs, a.eigenvalues(), ens.count)
}

/// Multinomial enumeration over occupation vectors; probabilities in log
/// space so that `N` in the tens of thousands does not overflow.
pub fn distribution_from_probabilities(
    probs: &[f64],
    eigenvalues: &[f64],
    count: usize,
) -> Result<SumDistribution> {
    if count < 1 {
        return Err(Error::EmptyEnsemble);
    }
    if probs.len() != eigenvalues.len() {
        return Err(Error::DimensionMismatch {
            expected: eigenvalues.len(),
            found: probs.len(),
        });
    }
    let d = probs.len();
    if d == 0 {
        return Err(Error::EmptyDimension);
    }
    let required = composition_count(count, d, ENUMERATION_BUDGET);
    if required > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudget {
            required,
            budget: ENUMERATION_BUDGET,
        });
    }

    let ln_fact: Vec<f64> = (0..=count).map(|k| ln_gamma(k as f64 + 1.0)).collect();
    let ln_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();

    let mut raw: Vec<(f64, f64, Vec<u32>)> = Vec::with_capacity(required as usize);
    for occ in Compositions::new(count, d) {
        let mut log_prob = ln_fact[count];
        let mut value = 0.0;
        let mut impossible = false;
        for j in 0..d {
            let nj = occ[j] as usize;
            if nj == 0 {
                continue;
            }
            if probs[j] <= 0.0 {
                impossible = true;
            }
            log_prob += nj as f64 * ln_p[j] - ln_fact[nj];
            value += nj as f64 * eigenvalues[j];
        }
        let prob = if impossible { 0.0 } else { log_prob.exp() };
        raw.push((value, prob, occ));
    }
    raw.sort_by(|x, y| x.0.total_cmp(&y.0));

    let scale = eigenvalues.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let tol = MERGE_TOL * scale;
    let mut entries: Vec<SumEntry> = Vec::new();
    for (value, prob, occ) in raw {
        match entries.last_mut() {
            Some(last) if value - last.value <= tol => {
                last.prob += prob;
                last.occupations.push(occ);
            }
            _ => entries.push(SumEntry {
                value,
                prob,
                occupations: vec![occ],
            }),
        }
    }
    Ok(SumDistribution { entries })
}

/// `C(n + d − 1, d − 1)`, saturating just above `cap`.
pub fn composition_count(n: usize, d: usize, cap: u128) -> u128 {
    let mut count: u128 = 1;
    for i in 1..d as u128 {
        count = count * (n as u128 + i) / i;
        if count > cap {
            return cap + 1;
        }
    }
    count
}

/// All vectors of `parts` non-negative integers summing to `total`,
/// in lexicographically decreasing order starting from `(total, 0, …, 0)`.
#[derive(Clone, Debug)]
pub struct Compositions {
    current: Option<Vec<u32>>,
}

impl Compositions {
    pub fn new(total: usize, parts: usize) -> Self {
        let current = (parts > 0).then(|| {
            let mut v = vec![0; parts];
            v[0] = total as u32;
            v
        });
        Self { current }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.take()?;
        let d = out.len();
        if d >= 2 {
            if let Some(k) = (0..d - 1).rev().find(|&k| out[k] > 0) {
                let mut next = out.clone();
                let tail = next[d - 1];
                next[d - 1] = 0;
                next[k] -= 1;
                next[k + 1] = tail + 1;
                self.current = Some(next);
            }
        }
        Some(out)
    }
}
