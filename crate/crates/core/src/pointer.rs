//! One-dimensional pointer of the measuring device on a uniform grid.
//!
//! The position grid is `x_k = −L + k·h`, `h = 2L/M`. Its conjugate grid is
//! `q_m = (m − M/2)·Δq` with `Δq = 2π/(M h)`. The transform between them is
//! the discretized `φ(q) = (2π)^{-1/2} ∫ φ̃(x) e^{−iqx} dx`, normalized so
//! that `Σ|φ̃|² h = Σ|φ|² Δq`. With this sign, multiplying the conjugate
//! amplitude by `e^{−iqs}` moves the position profile by `+s`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Minimum number of grid points.
pub const MIN_POINTS: usize = 64;
/// Largest amplitude magnitude allowed on the first and last grid point.
pub const BOUNDARY_TOL: f64 = 1e-6;
/// Tolerance on `Σ|amp|² · spacing`.
pub const NORM_TOL: f64 = 1e-8;
/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 1024;
/// Default half-extent in units of the initial width.
pub const DEFAULT_EXTENT_PER_SIGMA: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointerGrid {
    extent: f64,
    points: usize,
}

impl PointerGrid {
    pub fn new(extent: f64, points: usize) -> Result<Self> {
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "extent must be positive, got {extent}"
            )));
        }
        if points < MIN_POINTS || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points must be a power of two >= {MIN_POINTS}, got {points}"
            )));
        }
        Ok(Self { extent, points })
    }

    /// `L = 20σ`, `M = 1024`.
    pub fn for_sigma(sigma: f64) -> Result<Self> {
        Self::new(DEFAULT_EXTENT_PER_SIGMA * sigma, DEFAULT_POINTS)
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.points as f64
    }

    pub fn conjugate_spacing(&self) -> f64 {
        2.0 * PI / (self.points as f64 * self.spacing())
    }

    pub fn position(&self, k: usize) -> f64 {
        -self.extent + k as f64 * self.spacing()
    }

    pub fn momentum(&self, m: usize) -> f64 {
        (m as f64 - (self.points / 2) as f64) * self.conjugate_spacing()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.position(k)).collect()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.points).map(|m| self.momentum(m)).collect()
    }

    /// Forward transform of position samples to conjugate samples.
    pub(crate) fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let m = self.points;
        let mut buf: Vec<Complex64> = values
            .iter()
            .enumerate()
            .map(|(k, v)| if k % 2 == 0 { *v } else { -v })
            .collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        // e^{i q_m L} = (−1)^{m − M/2}; M/2 is even for M ≥ 64
        let scale = self.spacing() / (2.0 * PI).sqrt();
        buf.iter()
            .enumerate()
            .map(|(j, v)| if j % 2 == 0 { v * scale } else { -v * scale })
            .collect()
    }

    /// Inverse of [`forward`](Self::forward).
    pub(crate) fn inverse(&self, values: &[Complex64]) -> Vec<Complex64> {
        let m = self.points;
        let mut buf: Vec<Complex64> = values
            .iter()
            .enumerate()
            .map(|(j, v)| if j % 2 == 0 { *v } else { -v })
            .collect();
        FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
        let scale = self.conjugate_spacing() / (2.0 * PI).sqrt();
        buf.iter()
            .enumerate()
            .map(|(k, v)| if k % 2 == 0 { v * scale } else { -v * scale })
            .collect()
    }
}

/// Which coordinate the amplitudes are sampled in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    /// The pointer coordinate `Π`.
    Position,
    /// The conjugate coordinate `Q`.
    Momentum,
}

impl Representation {
    pub fn label(self) -> &'static str {
        match self {
            Representation::Position => "position",
            Representation::Momentum => "momentum",
        }
    }

    fn toggled(self) -> Self {
        match self {
            Representation::Position => Representation::Momentum,
            Representation::Momentum => Representation::Position,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointerWavefunction {
    grid: PointerGrid,
    rep: Representation,
    amplitudes: Vec<Complex64>,
}

impl PointerWavefunction {
    /// Validates normalization and that the profile vanishes at the grid edges.
    pub fn new(grid: PointerGrid, rep: Representation, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.points() {
            return Err(Error::DimensionMismatch {
                expected: grid.points(),
                found: amplitudes.len(),
            });
        }
        let w = Self {
            grid,
            rep,
            amplitudes,
        };
        let deviation = (w.norm_sqr() - 1.0).abs();
        if deviation > NORM_TOL {
            return Err(Error::ProfileDoesNotFit(format!(
                "norm deviates from 1 by {deviation:e}"
            )));
        }
        w.check_boundary()?;
        Ok(w)
    }

    pub(crate) fn from_raw(
        grid: PointerGrid,
        rep: Representation,
        amplitudes: Vec<Complex64>,
    ) -> Self {
        Self {
            grid,
            rep,
            amplitudes,
        }
    }

    pub fn grid(&self) -> &PointerGrid {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.rep
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Grid coordinates matching the current representation.
    pub fn coordinates(&self) -> Vec<f64> {
        match self.rep {
            Representation::Position => self.grid.positions(),
            Representation::Momentum => self.grid.momenta(),
        }
    }

    pub fn cell(&self) -> f64 {
        match self.rep {
            Representation::Position => self.grid.spacing(),
            Representation::Momentum => self.grid.conjugate_spacing(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.cell()
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub(crate) fn check_boundary(&self) -> Result<()> {
        let edge = self.amplitudes[0]
            .norm()
            .max(self.amplitudes[self.amplitudes.len() - 1].norm());
        if edge >= BOUNDARY_TOL {
            return Err(Error::ProfileDoesNotFit(format!(
                "{} amplitude {edge:e} at the grid boundary",
                self.rep.label()
            )));
        }
        Ok(())
    }

    /// Same state in the position representation.
    pub fn in_position(&self) -> PointerWavefunction {
        match self.rep {
            Representation::Position => self.clone(),
            Representation::Momentum => self.to_conjugate(),
        }
    }

    /// Same state in the momentum representation.
    pub fn in_momentum(&self) -> PointerWavefunction {
        match self.rep {
            Representation::Momentum => self.clone(),
            Representation::Position => self.to_conjugate(),
        }
    }

    /// Unitary transform to the other representation.
    pub fn to_conjugate(&self) -> PointerWavefunction {
        let amplitudes = match self.rep {
            Representation::Position => self.grid.forward(&self.amplitudes),
            Representation::Momentum => self.grid.inverse(&self.amplitudes),
        };
        Self::from_raw(self.grid, self.rep.toggled(), amplitudes)
    }

    /// Translates the pointer coordinate by `s` through a linear phase in the
    /// momentum representation. The result keeps the input representation.
    pub fn shift(&self, s: f64) -> Result<PointerWavefunction> {
        let mut q = self.in_momentum();
        for (amp, qm) in q.amplitudes.iter_mut().zip(self.grid.momenta()) {
            *amp *= Complex64::from_polar(1.0, -qm * s);
        }
        let out = match self.rep {
            Representation::Momentum => q,
            Representation::Position => q.to_conjugate(),
        };
        out.in_position().check_boundary()?;
        Ok(out)
    }

    /// CSV `position,re,im` or `momentum,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},re,im\n", self.rep.label());
        for (x, a) in self.coordinates().iter().zip(&self.amplitudes) {
            out.push_str(&format!("{x},{},{}\n", a.re, a.im));
        }
        out
    }
}

/// Normalized Gaussian in the position representation with
/// `|φ̃(x)|² ∝ exp(−(x − center)² / 2σ²)`.
pub fn gaussian_init(grid: PointerGrid, center: f64, sigma: f64) -> Result<PointerWavefunction> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::ProfileDoesNotFit(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if (center.abs() + 4.0 * sigma) >= grid.extent() {
        return Err(Error::ProfileDoesNotFit(format!(
            "center {center} ± 4σ = {} leaves [−{L}, {L}]",
            4.0 * sigma,
            L = grid.extent()
        )));
    }
    let mut amps: Vec<Complex64> = grid
        .positions()
        .iter()
        .map(|x| Complex64::new((-(x - center).powi(2) / (4.0 * sigma * sigma)).exp(), 0.0))
        .collect();
    let norm = (amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.spacing()).sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    PointerWavefunction::new(grid, Representation::Position, amps)
}

/// Riemann-sum mean and variance of `|amp|²` over the current coordinate.
pub fn moments(w: &PointerWavefunction) -> (f64, f64) {
    density_moments(&w.coordinates(), &w.density(), w.cell())
}

pub(crate) fn density_moments(coords: &[f64], density: &[f64], cell: f64) -> (f64, f64) {
    let mass: f64 = density.iter().sum::<f64>() * cell;
    let mean = coords.iter().zip(density).map(|(x, p)| x * p).sum::<f64>() * cell / mass;
    let var = coords
        .iter()
        .zip(density)
        .map(|(x, p)| (x - mean).powi(2) * p)
        .sum::<f64>()
        * cell
        / mass;
    (mean, var)
}

/// Probability density over the pointer coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct PointerDensity {
    grid: PointerGrid,
    values: Vec<f64>,
}

impl PointerDensity {
    pub(crate) fn new(grid: PointerGrid, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn grid(&self) -> &PointerGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn positions(&self) -> Vec<f64> {
        self.grid.positions()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing()
    }

    pub fn mean(&self) -> f64 {
        self.moments().0
    }

    pub fn variance(&self) -> f64 {
        self.moments().1
    }

    /// `(mean, variance)`
    pub fn moments(&self) -> (f64, f64) {
        density_moments(&self.grid.positions(), &self.values, self.grid.spacing())
    }

    /// CSV `position,density`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,density\n");
        for (x, p) in self.grid.positions().iter().zip(&self.values) {
            out.push_str(&format!("{x},{p}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> PointerGrid {
        PointerGrid::new(20.0, 1024).unwrap()
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Simpson quadrature of a smooth function over [a, b].
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn grid_validation() {
        assert!(PointerGrid::new(20.0, 1000).is_err());
        assert!(PointerGrid::new(20.0, 32).is_err());
        assert!(PointerGrid::new(0.0, 1024).is_err());
        let g = grid();
        assert!((g.spacing() - 40.0 / 1024.0).abs() < 1e-15);
        assert_eq!(g.momentum(512), 0.0);
        assert_eq!(PointerGrid::for_sigma(0.5).unwrap().extent(), 10.0);
    }

    #[test]
    fn gaussian_defining_moments() {
        let w = gaussian_init(grid(), 0.0, 1.0).unwrap();
        assert!((w.norm_sqr() - 1.0).abs() < 1e-12);
        let (mean, var) = moments(&w);
        assert!(mean.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-6);

        let w = gaussian_init(grid(), 3.0, 1.0).unwrap();
        assert!((moments(&w).0 - 3.0).abs() < 1e-6);
    }

    #[test]
    fn gaussian_narrow_variance_against_quadrature() {
        let sigma = 0.5;
        // independent: Simpson integration of the continuous density
        let rho =
            |x: f64| (-x * x / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma).sqrt();
        let mass = simpson(rho, -10.0, 10.0, 20_000);
        let var = simpson(|x| x * x * rho(x), -10.0, 10.0, 20_000) / mass;
        assert!((var - 0.25).abs() < 1e-9);

        let w = gaussian_init(grid(), 0.0, sigma).unwrap();
        assert!((moments(&w).1 - var).abs() < 1e-6);
    }

    #[test]
    fn gaussian_must_fit() {
        assert!(matches!(
            gaussian_init(grid(), 17.0, 1.0),
            Err(Error::ProfileDoesNotFit(_))
        ));
        // inside ±4σ but with a fat tail at the boundary
        assert!(matches!(
            gaussian_init(grid(), 14.0, 1.0),
            Err(Error::ProfileDoesNotFit(_))
        ));
        assert!(gaussian_init(grid(), 0.0, -1.0).is_err());
    }

    #[test]
    fn conjugate_roundtrip_and_parseval() {
        let w = gaussian_init(grid(), 1.3, 0.8).unwrap();
        let q = w.to_conjugate();
        assert_eq!(q.representation(), Representation::Momentum);
        assert!((q.norm_sqr() - w.norm_sqr()).abs() < 1e-10);
        let back = q.to_conjugate();
        assert_eq!(back.representation(), Representation::Position);
        assert!(max_diff(back.amplitudes(), w.amplitudes()) < 1e-10);
    }

    #[test]
    fn conjugate_of_gaussian_is_gaussian() {
        // |φ(q)|² for a width-σ position Gaussian is exp(−2σ²q²)·√(2/π)σ:
        // a Gaussian in q with standard deviation 1/(2σ).
        for sigma in [1.0, 0.5, 2.0] {
            let w = gaussian_init(PointerGrid::for_sigma(sigma).unwrap(), 0.0, sigma).unwrap();
            let q = w.to_conjugate();
            let s_q = 1.0 / (2.0 * sigma);
            let rho_q = |x: f64| (-x * x / (2.0 * s_q * s_q)).exp() / (2.0 * PI * s_q * s_q).sqrt();
            let var_oracle = simpson(|x| x * x * rho_q(x), -20.0 * s_q, 20.0 * s_q, 20_000);
            let (mean, var) = moments(&q);
            assert!(mean.abs() < 1e-6);
            assert!(
                (var - var_oracle).abs() < 1e-6,
                "sigma {sigma}: {var} vs {var_oracle}"
            );
            for (qm, a) in q.coordinates().iter().zip(q.amplitudes()) {
                assert!((a.norm_sqr() - rho_q(*qm)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn shifted_gaussian_gains_linear_phase() {
        let w0 = gaussian_init(grid(), 0.0, 1.0).unwrap().to_conjugate();
        let w1 = gaussian_init(grid(), 2.0, 1.0).unwrap().to_conjugate();
        for ((a0, a1), q) in w0
            .amplitudes()
            .iter()
            .zip(w1.amplitudes())
            .zip(w0.coordinates())
        {
            assert!((a0.norm() - a1.norm()).abs() < 1e-10);
            let expected = a0 * Complex64::from_polar(1.0, -q * 2.0);
            assert!((a1 - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn shift_examples() {
        let w = gaussian_init(grid(), 0.0, 1.0).unwrap();
        let same = w.shift(0.0).unwrap();
        assert!(max_diff(same.amplitudes(), w.amplitudes()) < 1e-12);

        let moved = w.shift(2.5).unwrap();
        assert!((moments(&moved).0 - 2.5).abs() < 1e-8);

        let back = moved.shift(-2.5).unwrap();
        assert!(max_diff(back.amplitudes(), w.amplitudes()) < 1e-10);

        let a = w.shift(1.1).unwrap().shift(-0.4).unwrap();
        let b = w.shift(0.7).unwrap();
        assert!(max_diff(a.amplitudes(), b.amplitudes()) < 1e-9);

        assert!(matches!(w.shift(15.0), Err(Error::ProfileDoesNotFit(_))));
    }

    #[test]
    fn shift_in_momentum_representation() {
        let w = gaussian_init(grid(), 0.0, 1.0).unwrap();
        let q = w.to_conjugate().shift(1.5).unwrap();
        assert_eq!(q.representation(), Representation::Momentum);
        assert!((moments(&q.in_position()).0 - 1.5).abs() < 1e-8);
    }

    #[test]
    fn csv_labels_follow_representation() {
        let w = gaussian_init(PointerGrid::new(20.0, 64).unwrap(), 0.0, 2.0).unwrap();
        assert!(w.to_csv().starts_with("position,re,im\n"));
        assert!(w.to_conjugate().to_csv().starts_with("momentum,re,im\n"));
        assert_eq!(w.to_csv().lines().count(), 65);
    }
}
