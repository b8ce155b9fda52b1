//! Candidate probability rules and the consistency between the pointer
//! reading of the collective observable and the tally of single-particle
//! outcomes.
//!
//! The pointer shift measures `N Σ_j |b_j|² α_j`; counting `N_j` outcomes
//! gives `Σ_j N_j α_j`. A rule `p_j` is consistent when
//! `Σ_j p_j α_j = Σ_j |b_j|² α_j` for every spectrum, which pins
//! `p_j = |b_j|²`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ensemble::{composition_count, Compositions, ProductEnsemble};
use crate::hilbert::{self, Observable, StateVector};
use crate::measurement::{evolve_joint, pointer_distribution_after, MeasurementConfig};
use crate::pointer::{moments, PointerWavefunction};
use crate::{Error, Result, NORM_TOL};

/// Residual tolerance for [`uniqueness_scan`].
pub const SCAN_TOL: f64 = 1e-9;
/// Largest simplex lattice [`uniqueness_scan`] will visit.
pub const SCAN_BUDGET: u128 = 10_000_000;
/// `|z|` above which [`macro_micro_test`] reports inconsistency.
pub const Z_THRESHOLD: f64 = 4.0;

/// A map from amplitudes `b_j` to outcome probabilities `p_j`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbabilityRule {
    /// `p_j = |b_j|²`
    Born,
    /// `p_j ∝ |b_j|`
    AbsAmplitude,
    /// `p_j ∝ |b_j|⁴`
    Quartic,
    /// `p_j = 1/d`
    Uniform,
    /// Fixed vector, independent of the state.
    Custom(Vec<f64>),
}

impl ProbabilityRule {
    /// Non-Born tags used for falsification.
    pub const ALTERNATIVES: [ProbabilityRule; 3] = [
        ProbabilityRule::AbsAmplitude,
        ProbabilityRule::Quartic,
        ProbabilityRule::Uniform,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            ProbabilityRule::Born => "born",
            ProbabilityRule::AbsAmplitude => "abs_amplitude",
            ProbabilityRule::Quartic => "quartic",
            ProbabilityRule::Uniform => "uniform",
            ProbabilityRule::Custom(_) => "custom",
        }
    }

    /// Probabilities for eigenbasis amplitudes.
    pub fn probabilities(&self, amplitudes: &[Complex64]) -> Result<Vec<f64>> {
        let d = amplitudes.len();
        if d == 0 {
            return Err(Error::EmptyDimension);
        }
        let power = |k: i32| -> Vec<f64> {
            let raw: Vec<f64> = amplitudes.iter().map(|b| b.norm().powi(k)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        };
        let probs = match self {
            ProbabilityRule::Born => amplitudes.iter().map(|b| b.norm_sqr()).collect(),
            ProbabilityRule::AbsAmplitude => power(1),
            ProbabilityRule::Quartic => power(4),
            ProbabilityRule::Uniform => vec![1.0 / d as f64; d],
            ProbabilityRule::Custom(p) => {
                if p.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: p.len(),
                    });
                }
                p.clone()
            }
        };
        validate(&probs)?;
        Ok(probs)
    }
}

impl fmt::Display for ProbabilityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbabilityRule::Custom(p) => {
                let parts: Vec<String> = p.iter().map(|x| x.to_string()).collect();
                write!(f, "custom:{}", parts.join(","))
            }
            other => f.write_str(other.tag()),
        }
    }
}

impl FromStr for ProbabilityRule {
    type Err = Error;

    /// `born`, `abs_amplitude`, `quartic`, `uniform` or `custom:p1,p2,…`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "born" => Ok(ProbabilityRule::Born),
            "abs_amplitude" => Ok(ProbabilityRule::AbsAmplitude),
            "quartic" => Ok(ProbabilityRule::Quartic),
            "uniform" => Ok(ProbabilityRule::Uniform),
            other => match other.strip_prefix("custom:") {
                Some(list) => list
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidProbabilities(format!("cannot parse '{x}'")))
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(ProbabilityRule::Custom),
                None => Err(Error::InvalidConfig(format!("unknown rule '{other}'"))),
            },
        }
    }
}

fn validate(p: &[f64]) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidProbabilities(format!(
            "entry {x} is not a probability"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidProbabilities(format!(
            "entries sum to {total}"
        )));
    }
    Ok(())
}

/// Probabilities the rule assigns to `psi`, whose amplitudes are taken as
/// eigenbasis amplitudes.
pub fn apply_rule(rule: &ProbabilityRule, psi: &StateVector) -> Result<Vec<f64>> {
    rule.probabilities(psi.amplitudes())
}

/// `|Σ_j p_j α_j − Σ_j |b_j|² α_j|`
pub fn consistency_residual(
    rule: &ProbabilityRule,
    psi: &StateVector,
    a: &Observable,
) -> Result<f64> {
    let coeffs = a.coefficients(psi)?;
    let probs = rule.probabilities(&coeffs)?;
    let born: Vec<f64> = coeffs.iter().map(|b| b.norm_sqr()).collect();
    let alphas = a.eigenvalues();
    Ok((hilbert::weighted_mean(&probs, alphas) - hilbert::weighted_mean(&born, alphas)).abs())
}

/// Every lattice point of the probability simplex (resolution `grid_step`)
/// whose mean matches the Born mean within [`SCAN_TOL`] for every spectrum.
///
/// The spectra, each centered on its last entry, must span `d − 1`
/// dimensions; otherwise the linear constraints cannot isolate a single
/// point and [`Error::InsufficientSpectra`] is returned. `1/grid_step` must be
/// an integer.
pub fn uniqueness_scan(
    psi: &StateVector,
    spectra: &[Vec<f64>],
    grid_step: f64,
) -> Result<Vec<Vec<f64>>> {
    let d = psi.dim();
    for s in spectra {
        if s.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.len(),
            });
        }
    }
    let rank = centered_rank(spectra, d);
    if rank < d - 1 {
        return Err(Error::InsufficientSpectra {
            rank,
            required: d - 1,
        });
    }
    let divisions = (1.0 / grid_step).round();
    if !(grid_step > 0.0) || divisions < 1.0 || (divisions * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "grid step {grid_step} does not divide 1"
        )));
    }
    let k = divisions as usize;
    let required = composition_count(k, d, SCAN_BUDGET);
    if required > SCAN_BUDGET {
        return Err(Error::EnumerationBudget {
            required,
            budget: SCAN_BUDGET,
        });
    }

    let born: Vec<f64> = psi.amplitudes().iter().map(|b| b.norm_sqr()).collect();
    let targets: Vec<f64> = spectra
        .iter()
        .map(|s| hilbert::weighted_mean(&born, s))
        .collect();
    let hits = Compositions::new(k, d)
        .map(|occ| {
            occ.iter()
                .map(|&n| n as f64 / k as f64)
                .collect::<Vec<f64>>()
        })
        .filter(|p| {
            spectra
                .iter()
                .zip(&targets)
                .all(|(s, t)| (hilbert::weighted_mean(p, s) - t).abs() <= SCAN_TOL)
        })
        .collect();
    Ok(hits)
}

/// Rank of the matrix whose rows are `α − α_last · 1`.
fn centered_rank(spectra: &[Vec<f64>], d: usize) -> usize {
    if spectra.is_empty() || d < 2 {
        return 0;
    }
    let rows = spectra.len();
    let m = DMatrix::from_fn(rows, d - 1, |i, j| spectra[i][j] - spectra[i][d - 1]);
    let scale = m.amax().max(1.0);
    m.rank(1e-9 * scale)
}

/// Tally of single-particle outcomes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl OutcomeCounts {
    /// `Σ_j N_j α_j / N`
    pub fn mean(&self, eigenvalues: &[f64]) -> f64 {
        self.counts
            .iter()
            .zip(eigenvalues)
            .map(|(n, a)| *n as f64 * a)
            .sum::<f64>()
            / self.total as f64
    }
}

/// Multinomial draw of `count` outcomes, deterministic in `seed`.
pub fn sample_outcomes(
    rule: &ProbabilityRule,
    psi: &StateVector,
    a: &Observable,
    count: u64,
    seed: u64,
) -> Result<OutcomeCounts> {
    if count < 1 {
        return Err(Error::EmptyEnsemble);
    }
    let probs = rule.probabilities(&a.coefficients(psi)?)?;
    Ok(sample_multinomial(&probs, count, seed))
}

/// Sequential conditional binomials.
pub(crate) fn sample_multinomial(probs: &[f64], count: u64, seed: u64) -> OutcomeCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = count;
    let mut mass_left = 1.0;
    for (j, p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if j + 1 == probs.len() {
            counts[j] = remaining;
            break;
        }
        let conditional = if mass_left > 0.0 {
            (p / mass_left).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let drawn = Binomial::new(remaining, conditional)
            .expect("conditional probability lies in [0, 1]")
            .sample(&mut rng);
        counts[j] = drawn;
        remaining -= drawn;
        mass_left -= p;
    }
    OutcomeCounts {
        counts,
        total: count,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "consistent",
            Verdict::Inconsistent => "inconsistent",
        })
    }
}

/// Outcome of comparing the pointer reading with the outcome tally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroMicroReport {
    pub rule: String,
    pub macro_mean: f64,
    pub micro_mean: f64,
    pub z_score: f64,
    pub verdict: Verdict,
}

/// Reads the per-particle mean off the pointer shift (`shift / λτ`) and
/// compares it with the mean of `N` outcomes drawn under `rule`.
///
/// `z = (micro − macro) / (s/√N)` where `s` is the standard deviation of a
/// single outcome under the rule (falling back to `ΔA` when the rule is
/// deterministic). The verdict is consistent iff `|z| ≤ 4`.
pub fn macro_micro_test(
    rule: &ProbabilityRule,
    psi: &StateVector,
    a: &Observable,
    cfg: &MeasurementConfig,
    w: &PointerWavefunction,
    seed: u64,
) -> Result<MacroMicroReport> {
    if cfg.coupling() == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    let ens = ProductEnsemble::new(psi.clone(), cfg.count())?;
    let ev = evolve_joint(&ens, a, cfg, w)?;
    let density = pointer_distribution_after(&ev)?;
    let shift = density.mean() - moments(&w.in_position()).0;
    let macro_mean = shift / (cfg.coupling() * cfg.dt() * cfg.count() as f64);
    compare_with_outcomes(rule, psi, a, cfg.count() as u64, macro_mean, seed)
}

/// Micro side of [`macro_micro_test`] against a given macroscopic mean.
pub fn compare_with_outcomes(
    rule: &ProbabilityRule,
    psi: &StateVector,
    a: &Observable,
    count: u64,
    macro_mean: f64,
    seed: u64,
) -> Result<MacroMicroReport> {
    let coeffs = a.coefficients(psi)?;
    let probs = rule.probabilities(&coeffs)?;
    let alphas = a.eigenvalues();
    let counts = sample_multinomial(&probs, count, seed);
    let micro_mean = counts.mean(alphas);

    let rule_mean = hilbert::weighted_mean(&probs, alphas);
    let mut spread = hilbert::variance_about(&probs, alphas, rule_mean)?.sqrt();
    if spread == 0.0 {
        let born: Vec<f64> = coeffs.iter().map(|b| b.norm_sqr()).collect();
        let mean = hilbert::weighted_mean(&born, alphas);
        spread = hilbert::variance_about(&born, alphas, mean)?.sqrt();
    }
    let diff = micro_mean - macro_mean;
    let z_score = if spread > 0.0 {
        diff / (spread / (count as f64).sqrt())
    } else if diff.abs() <= 1e-9 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    let verdict = if z_score.abs() <= Z_THRESHOLD {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    Ok(MacroMicroReport {
        rule: rule.to_string(),
        macro_mean,
        micro_mean,
        z_score,
        verdict,
    })
}
