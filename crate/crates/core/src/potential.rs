//! Radial interaction potentials, their N-dependent scalings and Fourier
//! transforms.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, QuadConfig};
use crate::radial::{ball_hat, sinc};

/// Absolute tolerance used for potential transforms.
pub const TRANSFORM_ABS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    SoftSphere { height: f64, radius: f64 },
    HardCore { radius: f64 },
    /// Piecewise-linear interpolation of `(r, V(r))` samples; repeated radii
    /// encode jumps. Zero beyond the last sample, constant below the first.
    Tabulated { r: Vec<f64>, v: Vec<f64> },
}

/// A non-negative, spherically symmetric, compactly supported potential.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPotential {
    kind: PotentialKind,
}

/// Declarative form used in run-configuration files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    SoftSphere { height: f64, radius: f64 },
    HardCore { radius: f64 },
    Tabulated { path: String },
}

impl RadialPotential {
    pub fn soft_sphere(height: f64, radius: f64) -> Result<Self> {
        if !(height >= 0.0 && height.is_finite()) {
            return Err(Error::domain(format!("soft-sphere height must be finite and >= 0, got {height}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("soft-sphere radius must be > 0, got {radius}")));
        }
        Ok(Self {
            kind: PotentialKind::SoftSphere { height, radius },
        })
    }

    /// The potential `V ≡ 0` (represented as a zero-height soft sphere).
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::SoftSphere {
                height: 0.0,
                radius: 1.0,
            },
        }
    }

    pub fn hard_core(radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("hard-core radius must be >= 0, got {radius}")));
        }
        Ok(Self {
            kind: PotentialKind::HardCore { radius },
        })
    }

    pub fn tabulated(r: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if r.len() != v.len() || r.len() < 2 {
            return Err(Error::domain("tabulated potential needs >= 2 matching (r, V) samples"));
        }
        if r[0] < 0.0 || r.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain("tabulated radii must be non-negative and non-decreasing"));
        }
        if let Some(bad) = v.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::domain(format!("tabulated potential must be finite and >= 0, found {bad}")));
        }
        if *r.last().unwrap() <= 0.0 {
            return Err(Error::domain("tabulated potential needs a positive support radius"));
        }
        Ok(Self {
            kind: PotentialKind::Tabulated { r, v },
        })
    }

    /// Read a two-column CSV of `r,V(r)`; a non-numeric first row is
    /// treated as a header.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let (mut r, mut v) = (Vec::new(), Vec::new());
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::config(format!("row {i}: expected two columns")));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    r.push(a);
                    v.push(b);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::config(format!("row {i}: could not parse numbers"))),
            }
        }
        Self::tabulated(r, v)
    }

    pub fn from_spec(spec: &PotentialSpec) -> Result<Self> {
        match spec {
            PotentialSpec::SoftSphere { height, radius } => Self::soft_sphere(*height, *radius),
            PotentialSpec::HardCore { radius } => Self::hard_core(*radius),
            PotentialSpec::Tabulated { path } => Self::from_csv(path),
        }
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn is_hard_core(&self) -> bool {
        matches!(self.kind, PotentialKind::HardCore { .. })
    }

    /// True for `V ≡ 0`.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::SoftSphere { height, .. } => *height == 0.0,
            PotentialKind::HardCore { radius } => *radius == 0.0,
            PotentialKind::Tabulated { v, .. } => v.iter().all(|x| *x == 0.0),
        }
    }

    /// `R_V`: V vanishes for `r > support_radius`.
    pub fn support_radius(&self) -> f64 {
        match &self.kind {
            PotentialKind::SoftSphere { radius, .. } => *radius,
            PotentialKind::HardCore { radius } => *radius,
            PotentialKind::Tabulated { r, .. } => *r.last().unwrap(),
        }
    }

    /// `V(r)`; `+∞` inside a hard core.
    pub fn value(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::SoftSphere { height, radius } => {
                if r <= *radius {
                    *height
                } else {
                    0.0
                }
            }
            PotentialKind::HardCore { radius } => {
                if r <= *radius {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PotentialKind::Tabulated { r: rs, v } => tabulated_value(rs, v, r),
        }
    }

    /// Radii at which V may be non-smooth; quadratures split there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            PotentialKind::SoftSphere { radius, .. } | PotentialKind::HardCore { radius } => vec![0.0, *radius],
            PotentialKind::Tabulated { r, .. } => {
                let mut b = vec![0.0];
                for &x in r {
                    if x > *b.last().unwrap() {
                        b.push(x);
                    }
                }
                b
            }
        }
    }

    /// `V̂(p) = 4π ∫₀^{R_V} r² V(r) sinc(p r) dr`.
    pub fn fourier_hat(&self, p: f64) -> Result<f64> {
        let p = p.abs();
        match &self.kind {
            PotentialKind::SoftSphere { height, radius } => Ok(height * ball_hat(*radius, p)),
            PotentialKind::HardCore { radius } => Err(Error::NonIntegrablePotential(format!(
                "hard core of radius {radius}"
            ))),
            PotentialKind::Tabulated { .. } => {
                let cfg = QuadConfig {
                    abs_tol: TRANSFORM_ABS_TOL / (4.0 * PI),
                    rel_tol: 1e-13,
                    max_intervals: 4000,
                };
                let v = integrate_pieces(|r| r * r * self.value(r) * sinc(p * r), &self.breakpoints(), &cfg)?;
                Ok(4.0 * PI * v)
            }
        }
    }
}

fn tabulated_value(rs: &[f64], v: &[f64], r: f64) -> f64 {
    let last = *rs.last().unwrap();
    if r > last {
        return 0.0;
    }
    if r <= rs[0] {
        return v[0];
    }
    // first index with rs[i] >= r
    let i = rs.partition_point(|&x| x < r);
    let (r0, r1) = (rs[i - 1], rs[i]);
    if r1 == r0 {
        return v[i];
    }
    let t = (r - r0) / (r1 - r0);
    v[i - 1] + t * (v[i] - v[i - 1])
}

/// `x ↦ N^{3β−1} V(N^β x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPotential {
    pub base: RadialPotential,
    pub particles: u64,
    pub beta: f64,
}

impl ScaledPotential {
    pub fn new(base: RadialPotential, n: u64, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("particle number must be >= 2, got {n}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::domain(format!("beta must lie in (0, 1], got {beta}")));
        }
        Ok(Self { base, particles: n, beta })
    }

    pub fn n_f64(&self) -> f64 {
        self.particles as f64
    }

    /// `N^β`, the inverse interaction length.
    pub fn scale(&self) -> f64 {
        self.n_f64().powf(self.beta)
    }

    /// `N^{3β−1}`.
    pub fn prefactor(&self) -> f64 {
        self.n_f64().powf(3.0 * self.beta - 1.0)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.prefactor() * self.base.value(self.scale() * x)
    }

    pub fn support_radius(&self) -> f64 {
        self.base.support_radius() / self.scale()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let s = self.scale();
        self.base.breakpoints().into_iter().map(|r| r / s).collect()
    }

    /// `V̂(|p|/N^β)`.
    pub fn scaled_hat(&self, p: f64) -> Result<f64> {
        self.base.fourier_hat(p.abs() / self.scale())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_sphere_zero_mode_is_ball_volume() {
        let v = RadialPotential::soft_sphere(1.0, 1.0).unwrap();
        assert!((v.fourier_hat(0.0).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((v.fourier_hat(0.0).unwrap() - 4.188_79).abs() < 1e-5);
    }

    #[test]
    fn soft_sphere_closed_form() {
        let v = RadialPotential::soft_sphere(1.0, 1.0).unwrap();
        for &p in &[0.5f64, 1.0, 3.0, 10.0, 77.0] {
            let exact = 4.0 * PI * (p.sin() - p * p.cos()) / p.powi(3);
            assert!((v.fourier_hat(p).unwrap() - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn hard_core_has_no_transform() {
        let v = RadialPotential::hard_core(1.0).unwrap();
        assert!(matches!(v.fourier_hat(1.0), Err(Error::NonIntegrablePotential(_))));
    }

    #[test]
    fn continuity_at_origin() {
        let v = RadialPotential::soft_sphere(2.0, 0.7).unwrap();
        let v0 = v.fourier_hat(0.0).unwrap();
        let v1 = v.fourier_hat(1e-8).unwrap();
        assert!(((v1 - v0) / v0).abs() < 1e-10);
        assert_eq!(v.fourier_hat(3.3).unwrap(), v.fourier_hat(-3.3).unwrap());
    }

    #[test]
    fn tabulated_interpolation_and_jumps() {
        let v = RadialPotential::tabulated(vec![0.0, 1.0, 1.0, 2.0], vec![2.0, 1.0, 3.0, 1.0]).unwrap();
        assert_eq!(v.value(0.5), 1.5);
        assert_eq!(v.value(1.5), 2.0);
        assert_eq!(v.value(2.5), 0.0);
        assert_eq!(v.support_radius(), 2.0);
        assert!(RadialPotential::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn scaled_hat_fixes_zero_mode() {
        let base = RadialPotential::soft_sphere(1.0, 1.0).unwrap();
        let s = ScaledPotential::new(base.clone(), 10_000, 0.5).unwrap();
        assert_eq!(s.scaled_hat(0.0).unwrap(), base.fourier_hat(0.0).unwrap());
        let p = 2.0 * PI * s.scale();
        assert!((s.scaled_hat(p).unwrap() - base.fourier_hat(2.0 * PI).unwrap()).abs() < 1e-15);
        assert!((s.support_radius() - 0.01).abs() < 1e-15);
    }
}
