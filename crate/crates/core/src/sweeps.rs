//! Particle-count sweeps and log-log fits.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::born::{compare_with_outcomes, ProbabilityRule};
use crate::ensemble::ProductEnsemble;
use crate::hilbert::{self, Observable, StateVector};
use crate::measurement::{
    evolve_joint, infidelity, orthogonal_weight, pointer_distribution_after, MeasurementConfig,
};
use crate::pointer::{gaussian_init, PointerGrid, DEFAULT_EXTENT_PER_SIGMA, DEFAULT_POINTS};
use crate::{Error, Result};

/// Rows with fewer particles are emitted but left out of fits.
pub const DEFAULT_MIN_FIT_COUNT: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    OrthogonalWeight,
    Infidelity,
    PointerMean,
    PointerVariance,
    MacroMicro,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::OrthogonalWeight => "orthogonal_weight",
            Quantity::Infidelity => "infidelity",
            Quantity::PointerMean => "pointer_mean",
            Quantity::PointerVariance => "pointer_variance",
            Quantity::MacroMicro => "macro_micro",
        }
    }

    /// Table columns produced by this quantity.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Quantity::OrthogonalWeight => &["orthogonal_weight", "leading_order"],
            Quantity::Infidelity => &["infidelity"],
            Quantity::PointerMean => &["pointer_mean"],
            Quantity::PointerVariance => &["pointer_variance"],
            Quantity::MacroMicro => &["macro_mean", "micro_mean", "z_score"],
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "orthogonal_weight" => Ok(Quantity::OrthogonalWeight),
            "infidelity" => Ok(Quantity::Infidelity),
            "pointer_mean" => Ok(Quantity::PointerMean),
            "pointer_variance" => Ok(Quantity::PointerVariance),
            "macro_micro" => Ok(Quantity::MacroMicro),
            other => Err(Error::InvalidConfig(format!("unknown quantity '{other}'"))),
        }
    }
}

/// Source of the single-particle state and observable.
#[derive(Clone, Debug, PartialEq)]
pub enum InstanceSpec {
    Explicit {
        state: StateVector,
        observable: Observable,
    },
    Seeded {
        dim: usize,
        seed: u64,
    },
}

impl InstanceSpec {
    pub fn resolve(&self) -> Result<(StateVector, Observable)> {
        match self {
            InstanceSpec::Explicit { state, observable } => Ok((state.clone(), observable.clone())),
            InstanceSpec::Seeded { dim, seed } => hilbert::random_instance(*dim, *seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub instance: InstanceSpec,
    pub coupling: f64,
    pub tau: f64,
    pub sigma: f64,
    /// Half-width of the pointer grid; `None` means `20σ`.
    pub grid_extent: Option<f64>,
    pub grid_points: usize,
    pub counts: Vec<usize>,
    pub quantities: Vec<Quantity>,
    /// Rule and seed for the outcome tally of [`Quantity::MacroMicro`].
    pub rule: ProbabilityRule,
    pub seed: u64,
    pub min_fit_count: usize,
}

impl SweepPlan {
    /// Plan with unit coupling, time budget and pointer width on the default grid.
    pub fn new(instance: InstanceSpec, counts: Vec<usize>, quantities: Vec<Quantity>) -> Self {
        Self {
            instance,
            coupling: 1.0,
            tau: 1.0,
            sigma: 1.0,
            grid_extent: None,
            grid_points: DEFAULT_POINTS,
            counts,
            quantities,
            rule: ProbabilityRule::Born,
            seed: 0,
            min_fit_count: DEFAULT_MIN_FIT_COUNT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one N".into()));
        }
        if self.counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "N values must be strictly increasing".into(),
            ));
        }
        if self.counts[0] < 1 {
            return Err(Error::EmptyEnsemble);
        }
        if self.quantities.is_empty() {
            return Err(Error::InvalidConfig("no quantities requested".into()));
        }
        Ok(())
    }

    pub fn columns(&self) -> Vec<&'static str> {
        self.quantities
            .iter()
            .flat_map(|q| q.columns().iter().copied())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub count: usize,
    pub in_fit: bool,
    pub values: Vec<f64>,
}

/// One row per `N`, one column per requested output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<(usize, f64)>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| (r.count, r.values[idx])).collect())
    }

    /// CSV with header `N,<columns…>,in_fit`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("N,{},in_fit\n", self.columns.join(","));
        for row in &self.rows {
            out.push_str(&row.count.to_string());
            for v in &row.values {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(if row.in_fit { ",1\n" } else { ",0\n" });
        }
        out
    }
}

/// Evaluates every requested quantity at every `N`. Rows are computed in
/// parallel and returned in plan order.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepTable> {
    plan.validate()?;
    let (psi, a) = plan.instance.resolve()?;
    let extent = plan
        .grid_extent
        .unwrap_or(DEFAULT_EXTENT_PER_SIGMA * plan.sigma);
    let grid = PointerGrid::new(extent, plan.grid_points)?;
    let pointer = gaussian_init(grid, 0.0, plan.sigma)?;

    let rows = plan
        .counts
        .par_iter()
        .map(|&n| -> Result<SweepRow> {
            let cfg = MeasurementConfig::new(plan.coupling, plan.tau, n)?;
            let ens = ProductEnsemble::new(psi.clone(), n)?;
            let ev = evolve_joint(&ens, &a, &cfg, &pointer)?;
            let density = if plan.quantities.iter().any(|q| {
                matches!(
                    q,
                    Quantity::PointerMean | Quantity::PointerVariance | Quantity::MacroMicro
                )
            }) {
                Some(pointer_distribution_after(&ev)?)
            } else {
                None
            };
            let mut values = Vec::new();
            for q in &plan.quantities {
                match q {
                    Quantity::OrthogonalWeight => {
                        values.push(orthogonal_weight(&ev));
                        values.push(ev.leading_order_weight());
                    }
                    Quantity::Infidelity => values.push(infidelity(&ev)),
                    Quantity::PointerMean => {
                        values.push(density.as_ref().map_or(0.0, |d| d.mean()) - ev.initial_mean())
                    }
                    Quantity::PointerVariance => {
                        values.push(density.as_ref().map_or(0.0, |d| d.variance()))
                    }
                    Quantity::MacroMicro => {
                        if plan.coupling == 0.0 {
                            return Err(Error::DegenerateCoupling);
                        }
                        let shift = density.as_ref().map_or(0.0, |d| d.mean()) - ev.initial_mean();
                        let macro_mean = shift / (plan.coupling * plan.tau);
                        let report = compare_with_outcomes(
                            &plan.rule, &psi, &a, n as u64, macro_mean, plan.seed,
                        )?;
                        values.extend([report.macro_mean, report.micro_mean, report.z_score]);
                    }
                }
            }
            Ok(SweepRow {
                count: n,
                in_fit: n >= plan.min_fit_count,
                values,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepTable {
        columns: plan.columns().into_iter().map(String::from).collect(),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitPoint {
    pub count: f64,
    pub value: f64,
    pub predicted: f64,
}

/// Least-squares line through `(ln N, ln value)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub quantity: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: Vec<FitPoint>,
}

/// JSON summary `{quantity, slope, r2, n_points}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub quantity: String,
    pub slope: f64,
    pub r2: f64,
    pub n_points: usize,
}

impl FitResult {
    pub fn summary(&self) -> FitSummary {
        FitSummary {
            quantity: self.quantity.clone(),
            slope: self.slope,
            r2: self.r2,
            n_points: self.points.len(),
        }
    }
}

/// Fits one column over the rows flagged `in_fit`.
pub fn fit_power_law(table: &SweepTable, quantity: &str) -> Result<FitResult> {
    let idx = table
        .columns
        .iter()
        .position(|c| c == quantity)
        .ok_or_else(|| Error::InvalidConfig(format!("no column '{quantity}'")))?;
    let points: Vec<(usize, f64)> = table
        .rows
        .iter()
        .filter(|r| r.in_fit)
        .map(|r| (r.count, r.values[idx]))
        .collect();
    if let Some((count, value)) = points.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositiveValue {
            quantity: quantity.to_string(),
            count: *count,
            value: *value,
        });
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|(n, v)| (*n as f64, *v)).collect();
    fit_log_log(quantity, &xy)
}

/// Power-law fit `value ≈ e^{intercept} · x^{slope}` of positive pairs.
pub fn fit_log_log(quantity: &str, xy: &[(f64, f64)]) -> Result<FitResult> {
    if xy.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 points to fit {quantity}, got {}",
            xy.len()
        )));
    }
    if let Some((x, y)) = xy.iter().find(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::NonPositiveValue {
            quantity: quantity.to_string(),
            count: *x as usize,
            value: *y,
        });
    }
    let n = xy.len() as f64;
    let lx: Vec<f64> = xy.iter().map(|(x, _)| x.ln()).collect();
    let ly: Vec<f64> = xy.iter().map(|(_, y)| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("all N values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let points = xy
        .iter()
        .zip(&lx)
        .map(|((x, y), l)| FitPoint {
            count: *x,
            value: *y,
            predicted: (intercept + slope * l).exp(),
        })
        .collect();
    Ok(FitResult {
        quantity: quantity.to_string(),
        slope,
        intercept,
        r2,
        points,
    })
}
