//! s-wave scattering problems: the whole-space zero-energy equation, the
//! soft and hard-core Neumann problems on a ball, and the modified
//! divergence-form problem of the effective Hamiltonian.
//!
//! Radial problems are written for `u(r) = r f(r)`, which turns the radial
//! Laplacian into `u''`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{MomentumLattice, Shell};
use crate::ode::{self, OdeConfig, Trajectory};
use crate::potential::{RadialPotential, ScaledPotential};
use crate::quadrature::{gauss_legendre, integrate_pieces, QuadConfig};
use crate::radial::{ball_hat, cos_integral, sin_integral, sinc, trig_over_r_hat};

/// Neumann radii must stay below half the torus side.
pub const MAX_NEUMANN_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    WholeSpace,
    SoftNeumann,
    HardCoreNeumann,
    ModifiedEffective,
}

/// Closed-form ground state of the hard-core Neumann problem.
///
/// `f(r) = ℓ sin(k(r − r₀)) / (r sin x)` on `[r₀, ℓ]` with `x = k(ℓ − r₀)`
/// the first root of `tan x = x ℓ/(ℓ − r₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardCoreParams {
    pub core: f64,
    pub ell: f64,
    pub k: f64,
    pub phase: f64,
}

/// `(tan x − x)/x`, with a series near zero.
fn tan_excess(x: f64) -> f64 {
    if x < 0.1 {
        let x2 = x * x;
        x2 * (1.0 / 3.0 + x2 * (2.0 / 15.0 + x2 * (17.0 / 315.0 + x2 * (62.0 / 2835.0 + x2 * 1382.0 / 155_925.0))))
    } else {
        (x.tan() - x) / x
    }
}

impl HardCoreParams {
    pub fn new(core: f64, ell: f64) -> Result<Self> {
        if !(core >= 0.0 && core < ell) {
            return Err(Error::domain(format!("need 0 <= a/N < ell, got a/N = {core}, ell = {ell}")));
        }
        if !(ell < MAX_NEUMANN_RADIUS) {
            return Err(Error::domain(format!("ell must be < 1/2, got {ell}")));
        }
        if core == 0.0 {
            return Ok(Self {
                core,
                ell,
                k: 0.0,
                phase: 0.0,
            });
        }
        let delta = core / (ell - core);
        // (tan x − x)/x increases from 0 to ∞ on (0, π/2)
        let (mut lo, mut hi) = (0.0f64, FRAC_PI_2);
        while hi - lo > 4.0 * f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if tan_excess(mid) < delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let phase = 0.5 * (lo + hi);
        Ok(Self {
            core,
            ell,
            k: phase / (ell - core),
            phase,
        })
    }

    /// `4π ∫_lo^hi r² f(r) sinc(p r) dr` in closed form, for `lo ≥ a/N`.
    fn profile_hat(&self, lo: f64, hi: f64, p: f64) -> f64 {
        let c = self.ell / self.phase.sin();
        let (s0, c0) = (self.k * self.core).sin_cos();
        trig_over_r_hat(c * c0, -c * s0, self.k, lo, hi, p)
    }

    pub fn lambda(&self) -> f64 {
        self.k * self.k
    }

    pub fn value(&self, r: f64) -> f64 {
        if r >= self.ell || self.k == 0.0 {
            1.0
        } else if r <= self.core {
            0.0
        } else {
            self.ell * (self.k * (r - self.core)).sin() / (r * self.phase.sin())
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        if r >= self.ell || r < self.core || self.k == 0.0 {
            0.0
        } else {
            let d = self.k * (r - self.core);
            self.ell * (self.k * r * d.cos() - d.sin()) / (r * r * self.phase.sin())
        }
    }
}

#[derive(Debug, Clone)]
struct SoftProfile {
    traj: Trajectory<5>,
    core: f64,
    ell: f64,
    k: f64,
    amp_sin: f64,
    amp_cos: f64,
    /// `l / u(l)`, so that `f = norm · u / r`.
    norm: f64,
}

impl SoftProfile {
    fn u(&self, r: f64) -> f64 {
        if r <= self.core {
            self.traj.interpolate(0, r)
        } else {
            self.amp_sin * (self.k * r).sin() + self.amp_cos * (self.k * r).cos()
        }
    }

    fn value(&self, r: f64) -> f64 {
        if r >= self.ell {
            return 1.0;
        }
        if r <= 1e-9 * self.core {
            // u(r) ≈ u'(0) r
            return self.norm * self.traj.dy[0][0];
        }
        self.norm * self.u(r) / r
    }
}

#[derive(Debug, Clone)]
struct WholeProfile {
    traj: Trajectory<3>,
    support: f64,
    a: f64,
    slope: f64,
}

impl WholeProfile {
    fn value(&self, r: f64) -> f64 {
        if r >= self.support {
            1.0 - self.a / r
        } else if r <= 1e-9 * self.support {
            1.0 / self.slope
        } else {
            self.traj.interpolate(0, r) / (r * self.slope)
        }
    }
}

/// `g = f_{ℓ0} / f_ℓ` and its derivative.
#[derive(Debug, Clone, Copy)]
struct ModifiedProfile {
    inner: HardCoreParams,
    outer: HardCoreParams,
    /// `(ℓ0 sin x) / (ℓ sin x0)`.
    ratio: f64,
}

impl ModifiedProfile {
    fn new(inner: HardCoreParams, outer: HardCoreParams) -> Self {
        let ratio = outer.ell * inner.phase.sin() / (inner.ell * outer.phase.sin());
        Self { inner, outer, ratio }
    }

    /// Value below the core, the limit of the quotient at `a/N`.
    fn core_value(&self) -> f64 {
        self.ratio * self.outer.k / self.inner.k
    }

    fn value(&self, r: f64) -> f64 {
        if r >= self.outer.ell {
            1.0
        } else if r >= self.inner.ell {
            self.outer.value(r)
        } else if r <= self.inner.core {
            self.core_value()
        } else {
            let d = r - self.inner.core;
            let (k0, k) = (self.outer.k, self.inner.k);
            if k * d < 1e-6 {
                self.core_value() * (1.0 + (k * k - k0 * k0) * d * d / 6.0)
            } else {
                self.ratio * (k0 * d).sin() / (k * d).sin()
            }
        }
    }

    fn derivative(&self, r: f64) -> f64 {
        if r >= self.outer.ell || r <= self.inner.core {
            0.0
        } else if r >= self.inner.ell {
            self.outer.derivative(r)
        } else {
            let d = r - self.inner.core;
            let (k0, k) = (self.outer.k, self.inner.k);
            if k * d < 1e-4 {
                self.core_value() * (k * k - k0 * k0) * d / 3.0
            } else {
                let (s, s0) = ((k * d).sin(), (k0 * d).sin());
                self.ratio * (k0 * (k0 * d).cos() * s - k * s0 * (k * d).cos()) / (s * s)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Profile {
    One,
    HardCore(HardCoreParams),
    Soft(SoftProfile),
    Whole(WholeProfile),
    Modified(ModifiedProfile),
}

/// Finite-element solution of the modified problem, kept for diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModifiedFdRoute {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub lambda: f64,
    /// Eigenvalues on the three nested grids, coarse to fine.
    pub lambda_grids: Vec<f64>,
    pub elements_per_piece: usize,
}

/// Radial profile on `[0, ℓ]` together with its eigenvalue.
#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    pub kind: SolutionKind,
    pub grid: Vec<f64>,
    pub f: Vec<f64>,
    pub lambda: f64,
    pub ell: f64,
    pub scattering_length: Option<f64>,
    pub residuals: BTreeMap<String, f64>,
    pub fd_route: Option<ModifiedFdRoute>,
    profile: Profile,
}

/// JSON sidecar of a solution.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolutionSummary {
    pub lambda: f64,
    pub scattering_length: Option<f64>,
    pub ell: f64,
    pub kind: SolutionKind,
    pub residuals: BTreeMap<String, f64>,
}

/// Above this `|p| ℓ` the hard-core transforms switch to closed forms.
const CLOSED_FORM_PHASE: f64 = 64.0;

fn transform_config(scale: f64) -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-14 * scale,
        rel_tol: 1e-12,
        max_intervals: 20_000,
    }
}

impl ScatteringSolution {
    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            lambda: self.lambda,
            scattering_length: self.scattering_length,
            ell: self.ell,
            kind: self.kind,
            residuals: self.residuals.clone(),
        }
    }

    /// Profile value `f(r)` (or `g(r)` for the modified problem).
    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        match &self.profile {
            Profile::One => 1.0,
            Profile::HardCore(h) => h.value(r),
            Profile::Soft(s) => s.value(r),
            Profile::Whole(w) => w.value(r),
            Profile::Modified(m) => m.value(r),
        }
    }

    /// Radial derivative of the profile (closed-form kinds only).
    pub fn derivative(&self, r: f64) -> Option<f64> {
        match &self.profile {
            Profile::One => Some(0.0),
            Profile::HardCore(h) => Some(h.derivative(r)),
            Profile::Modified(m) => Some(m.derivative(r)),
            _ => None,
        }
    }

    pub fn hard_core_params(&self) -> Option<HardCoreParams> {
        match &self.profile {
            Profile::HardCore(h) => Some(*h),
            _ => None,
        }
    }

    /// Core radius `a/N` of hard-core based solutions, 0 otherwise.
    pub fn core_radius(&self) -> f64 {
        match &self.profile {
            Profile::HardCore(h) => h.core,
            Profile::Modified(m) => m.inner.core,
            _ => 0.0,
        }
    }

    /// Radii where the deviation `1 − f` is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = match &self.profile {
            Profile::One => vec![0.0, self.ell],
            Profile::HardCore(h) => vec![0.0, h.core, h.ell],
            Profile::Soft(s) => {
                let mut b: Vec<f64> = s.traj.t.clone();
                b.dedup();
                b.retain(|&t| t < s.core);
                // keep a coarse subset of the trajectory nodes as breaks
                let step = (b.len() / 16).max(1);
                let mut out: Vec<f64> = b.iter().step_by(step).copied().collect();
                out.push(s.core);
                out.push(s.ell);
                out
            }
            Profile::Whole(w) => vec![0.0, w.support],
            Profile::Modified(m) => vec![0.0, m.inner.core, m.inner.ell, m.outer.ell],
        };
        b.dedup();
        b
    }

    /// `(1 − f)^(p) = 4π ∫₀^ℓ r² (1 − f(r)) sinc(p r) dr`.
    pub fn deviation_hat(&self, p: f64) -> Result<f64> {
        if self.kind == SolutionKind::WholeSpace {
            return Err(Error::domain("the whole-space deviation 1 − f is not compactly supported"));
        }
        if matches!(self.profile, Profile::One) {
            return Ok(0.0);
        }
        let p = p.abs();
        let scale = self.ell.powi(3);
        if p * self.ell > CLOSED_FORM_PHASE {
            match &self.profile {
                Profile::HardCore(hc) if hc.k > 0.0 => return Ok(ball_hat(hc.ell, p) - hc.profile_hat(hc.core, hc.ell, p)),
                Profile::Modified(m) => {
                    let (inner, outer) = (&m.inner, &m.outer);
                    let g0 = m.core_value();
                    // 1 − g = (1 − f_ℓ0) − g0 χ_{r<a/N} − (g − f_ℓ0) χ_{a/N<r<ℓ}
                    let rest = integrate_pieces(
                        |r| {
                            let h = if r <= inner.core { g0 } else { m.value(r) - outer.value(r) };
                            r * r * h * sinc(p * r)
                        },
                        &[0.0, inner.core, inner.ell],
                        &transform_config(inner.ell.powi(3)),
                    )?;
                    return Ok(ball_hat(outer.ell, p) - outer.profile_hat(outer.core, outer.ell, p) - 4.0 * PI * rest);
                }
                _ => {}
            }
        }
        let v = integrate_pieces(
            |r| r * r * (1.0 - self.value(r)) * sinc(p * r),
            &self.breakpoints(),
            &transform_config(scale),
        )?;
        Ok(4.0 * PI * v)
    }
}

fn check_radius(ell: f64) -> Result<()> {
    if !(ell > 0.0 && ell < MAX_NEUMANN_RADIUS) {
        return Err(Error::domain(format!("Neumann radius must lie in (0, 1/2), got {ell}")));
    }
    Ok(())
}

/// Scattering length and its integral cross-check `(1/8π)∫V f`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ScatteringLength {
    pub value: f64,
    pub cross_check: Option<f64>,
}

impl ScatteringLength {
    pub fn discrepancy(&self) -> f64 {
        match self.cross_check {
            Some(c) if self.value != 0.0 => ((c - self.value) / self.value).abs(),
            Some(c) => c.abs(),
            None => 0.0,
        }
    }
}

fn zero_energy_config(support: f64) -> OdeConfig {
    OdeConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-16 * support,
        max_step: support / 64.0,
        max_steps: 2_000_000,
    }
}

/// Shoot `u'' = w u`, `u(0) = 0`, `u'(0) = 1` across `[0, support]`, with
/// `∫ r (2w) u dr` carried along.
fn zero_energy_shoot<W: Fn(f64) -> f64>(w: W, support: f64, breaks: &[f64]) -> Result<(WholeProfile, f64)> {
    let traj = ode::integrate(
        |r, y: &[f64; 3]| {
            let wr = w(r);
            [y[1], wr * y[0], 2.0 * r * wr * y[0]]
        },
        0.0,
        [0.0, 1.0, 0.0],
        support,
        breaks,
        &zero_energy_config(support),
    )?;
    let [u, du, moment] = traj.last();
    let a = support - u / du;
    let cross = 0.5 * moment / du;
    Ok((
        WholeProfile {
            traj,
            support,
            a,
            slope: du,
        },
        cross,
    ))
}

/// s-wave scattering length of `V`, from `(−Δ + V/2) f = 0`, `f → 1`.
pub fn scattering_length(v: &RadialPotential) -> Result<ScatteringLength> {
    if v.is_hard_core() {
        return Ok(ScatteringLength {
            value: v.support_radius(),
            cross_check: None,
        });
    }
    if v.is_zero() {
        return Ok(ScatteringLength {
            value: 0.0,
            cross_check: Some(0.0),
        });
    }
    let (prof, cross) = zero_energy_shoot(|r| 0.5 * v.value(r), v.support_radius(), &v.breakpoints())?;
    finish_scattering_length(prof.a, cross)
}

/// Scattering length of the scaled potential `N^{3β−1} V(N^β ·)`.
pub fn scattering_length_scaled(s: &ScaledPotential) -> Result<ScatteringLength> {
    if s.base.is_hard_core() {
        return Ok(ScatteringLength {
            value: s.support_radius(),
            cross_check: None,
        });
    }
    if s.base.is_zero() {
        return Ok(ScatteringLength {
            value: 0.0,
            cross_check: Some(0.0),
        });
    }
    let (prof, cross) = zero_energy_shoot(|r| 0.5 * s.value(r), s.support_radius(), &s.breakpoints())?;
    finish_scattering_length(prof.a, cross)
}

fn finish_scattering_length(a: f64, cross: f64) -> Result<ScatteringLength> {
    let out = ScatteringLength {
        value: a,
        cross_check: Some(cross),
    };
    if out.discrepancy() > 1e-7 {
        return Err(Error::NumericalFailure {
            message: "scattering length and (1/8π)∫Vf disagree".into(),
            residual: out.discrepancy(),
        });
    }
    Ok(out)
}

/// Whole-space zero-energy profile on `[0, 2 R_V]`, for output.
pub fn solve_whole_space(v: &RadialPotential) -> Result<ScatteringSolution> {
    let support = v.support_radius();
    let ell = 2.0 * support;
    let grid: Vec<f64> = (0..=400).map(|i| ell * i as f64 / 400.0).collect();
    if v.is_hard_core() || v.is_zero() {
        let a = if v.is_hard_core() { support } else { 0.0 };
        let f = grid.iter().map(|&r| if r <= a { 0.0 } else { 1.0 - a / r }).collect();
        return Ok(ScatteringSolution {
            kind: SolutionKind::WholeSpace,
            grid,
            f,
            lambda: 0.0,
            ell,
            scattering_length: Some(a),
            residuals: BTreeMap::new(),
            fd_route: None,
            profile: Profile::One,
        });
    }
    let (prof, cross) = zero_energy_shoot(|r| 0.5 * v.value(r), support, &v.breakpoints())?;
    let sl = finish_scattering_length(prof.a, cross)?;
    let f = grid.iter().map(|&r| prof.value(r)).collect();
    let mut residuals = BTreeMap::new();
    residuals.insert("integral_cross_check".into(), sl.discrepancy());
    Ok(ScatteringSolution {
        kind: SolutionKind::WholeSpace,
        grid,
        f,
        lambda: 0.0,
        ell,
        scattering_length: Some(sl.value),
        residuals,
        fd_route: None,
        profile: Profile::Whole(prof),
    })
}

/// Inner shooting data for one trial eigenvalue.
struct Shot {
    traj: Trajectory<5>,
    amp_sin: f64,
    amp_cos: f64,
    k: f64,
    /// `u'(l) l − u(l)`.
    boundary: f64,
}

fn shoot_soft(s: &ScaledPotential, lambda: f64, ell: f64, cfg: &OdeConfig) -> Result<Shot> {
    let core = s.support_radius();
    let breaks = s.breakpoints();
    let traj = ode::integrate(
        |r, y: &[f64; 5]| {
            let w = 0.5 * s.value(r);
            [y[1], (w - lambda) * y[0], y[1] * y[1], w * y[0] * y[0], y[0] * y[0]]
        },
        0.0,
        [0.0, 1.0, 0.0, 0.0, 0.0],
        core,
        &breaks,
        cfg,
    )?;
    let [u, du, ..] = traj.last();
    let k = lambda.sqrt();
    let (sc, cc) = ((k * core).sin(), (k * core).cos());
    let amp_sin = u * sc + du * cc / k;
    let amp_cos = u * cc - du * sc / k;
    let (sl, cl) = ((k * ell).sin(), (k * ell).cos());
    let ul = amp_sin * sl + amp_cos * cl;
    let dul = k * (amp_sin * cl - amp_cos * sl);
    Ok(Shot {
        traj,
        amp_sin,
        amp_cos,
        k,
        boundary: dul * ell - ul,
    })
}

/// Options for [`solve_soft_neumann_with`].
#[derive(Debug, Clone, Copy)]
pub struct SoftNeumannConfig {
    pub ode: OdeConfig,
    /// Steps per core radius (upper bound on the step length).
    pub steps_per_core: f64,
}

impl Default for SoftNeumannConfig {
    fn default() -> Self {
        Self {
            ode: OdeConfig {
                rel_tol: 1e-10,
                abs_tol: 1e-14,
                max_step: f64::INFINITY,
                max_steps: 1_000_000,
            },
            steps_per_core: 128.0,
        }
    }
}

/// Ground state of `(−Δ + N^{3β−1}V(N^β x)/2) f = λ f` on the ball of radius
/// `l` with `∂_r f(l) = 0`, normalized by `f(l) = 1`.
pub fn solve_soft_neumann(s: &ScaledPotential, ell: f64) -> Result<ScatteringSolution> {
    solve_soft_neumann_with(s, ell, &SoftNeumannConfig::default())
}

pub fn solve_soft_neumann_with(s: &ScaledPotential, ell: f64, cfg: &SoftNeumannConfig) -> Result<ScatteringSolution> {
    check_radius(ell)?;
    if s.base.is_hard_core() {
        return Err(Error::domain("hard-core potentials use solve_hard_core"));
    }
    let core = s.support_radius();
    if core >= ell {
        return Err(Error::domain(format!("scaled support {core} is not inside the Neumann ball {ell}")));
    }
    let grid_outer = |n: usize| (0..=n).map(move |i| ell * i as f64 / n as f64);
    if s.base.is_zero() {
        let grid: Vec<f64> = grid_outer(200).collect();
        let f = vec![1.0; grid.len()];
        return Ok(ScatteringSolution {
            kind: SolutionKind::SoftNeumann,
            grid,
            f,
            lambda: 0.0,
            ell,
            scattering_length: None,
            residuals: BTreeMap::new(),
            fd_route: None,
            profile: Profile::One,
        });
    }
    let ode_cfg = OdeConfig {
        max_step: cfg.ode.max_step.min(core / cfg.steps_per_core),
        abs_tol: cfg.ode.abs_tol * core,
        ..cfg.ode
    };
    let shoot = |lam: f64| shoot_soft(s, lam, ell, &ode_cfg);

    // bracket around the leading asymptotic 3V̂(0)/(8πN l³)
    let lead = 3.0 * s.base.fourier_hat(0.0)? / (8.0 * PI * s.n_f64() * ell.powi(3));
    let mut lo = lead / 8.0;
    let mut tries = 0;
    while shoot(lo)?.boundary <= 0.0 {
        lo /= 4.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::NumericalFailure {
                message: "could not bracket the Neumann eigenvalue from below".into(),
                residual: lo,
            });
        }
    }
    let mut hi = lo * 1.5;
    tries = 0;
    while shoot(hi)?.boundary > 0.0 {
        lo = hi;
        hi *= 1.5;
        tries += 1;
        if tries > 200 {
            return Err(Error::NumericalFailure {
                message: "could not bracket the Neumann eigenvalue from above".into(),
                residual: hi,
            });
        }
    }
    for _ in 0..200 {
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if shoot(mid)?.boundary > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let shot = shoot(lambda)?;

    let ul = shot.amp_sin * (shot.k * ell).sin() + shot.amp_cos * (shot.k * ell).cos();
    let prof = SoftProfile {
        traj: shot.traj,
        core,
        ell,
        k: shot.k,
        amp_sin: shot.amp_sin,
        amp_cos: shot.amp_cos,
        norm: ell / ul,
    };

    // quadratic form: ∫u'² − u(l)²/l + ∫W u² over ∫u²
    let [_, _, du2_in, wu2, u2_in] = prof.traj.last();
    let (a, b, k) = (prof.amp_sin, prof.amp_cos, prof.k);
    let (len, c2, s2) = (ell - core, cos_integral(2.0 * k, core, ell), sin_integral(2.0 * k, core, ell));
    let u2_out = 0.5 * (a * a + b * b) * len + 0.5 * (b * b - a * a) * c2 + a * b * s2;
    let du2_out = k * k * (0.5 * (a * a + b * b) * len + 0.5 * (a * a - b * b) * c2 - a * b * s2);
    let form = (du2_in + du2_out - ul * ul / ell + wu2) / (u2_in + u2_out);

    let mut grid: Vec<f64> = prof.traj.t.clone();
    grid.dedup();
    grid.extend((1..=256).map(|i| core + (ell - core) * i as f64 / 256.0));
    let f: Vec<f64> = grid.iter().map(|&r| prof.value(r)).collect();

    let mut residuals = BTreeMap::new();
    residuals.insert("quadratic_form_relative".into(), ((form - lambda) / lambda).abs());
    residuals.insert("neumann_slope".into(), (prof.norm * shot.boundary / (ell * ell)).abs());
    residuals.insert("bisection_width".into(), (hi - lo) / lambda);
    residuals.insert(
        "bound_violation".into(),
        f.iter().map(|&v| (v - 1.0).max(-v).max(0.0)).fold(0.0, f64::max),
    );

    Ok(ScatteringSolution {
        kind: SolutionKind::SoftNeumann,
        grid,
        f,
        lambda,
        ell,
        scattering_length: None,
        residuals,
        fd_route: None,
        profile: Profile::Soft(prof),
    })
}

/// Hard-core Neumann ground state on `a/N ≤ r ≤ ℓ`.
pub fn solve_hard_core(a: f64, n: u64, ell: f64) -> Result<ScatteringSolution> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("hard-core radius must be >= 0, got {a}")));
    }
    if n < 2 {
        return Err(Error::domain(format!("particle number must be >= 2, got {n}")));
    }
    check_radius(ell)?;
    let core = a / n as f64;
    let hc = HardCoreParams::new(core, ell)?;
    // geometric grading away from the core, where 1 − f varies on scale a/N
    let grid: Vec<f64> = if core > 0.0 {
        let mut g = vec![0.0, core];
        let m = 400;
        g.extend((1..=m).map(|i| core * (ell / core).powf(i as f64 / m as f64)));
        g
    } else {
        (0..=200).map(|i| ell * i as f64 / 200.0).collect()
    };
    let f: Vec<f64> = grid.iter().map(|&r| hc.value(r)).collect();
    let mut residuals = BTreeMap::new();
    residuals.insert("neumann_slope".into(), hc.derivative(ell * (1.0 - 1e-15)).abs());
    residuals.insert(
        "root_equation".into(),
        if core > 0.0 {
            (hc.phase.tan() - hc.k * ell).abs() / (hc.k * ell)
        } else {
            0.0
        },
    );
    Ok(ScatteringSolution {
        kind: SolutionKind::HardCoreNeumann,
        grid,
        f,
        lambda: hc.lambda(),
        ell,
        scattering_length: None,
        residuals,
        fd_route: None,
        profile: if core > 0.0 { Profile::HardCore(hc) } else { Profile::One },
    })
}

/// Symmetric tridiagonal matrix: diagonal `d`, off-diagonal `e`.
#[derive(Debug, Clone)]
struct Tridiagonal {
    d: Vec<f64>,
    e: Vec<f64>,
}

impl Tridiagonal {
    fn zeros(n: usize) -> Self {
        Self {
            d: vec![0.0; n],
            e: vec![0.0; n.saturating_sub(1)],
        }
    }

    fn add_element(&mut self, i: usize, m: [[f64; 2]; 2]) {
        self.d[i] += m[0][0];
        self.d[i + 1] += m[1][1];
        self.e[i] += m[0][1];
    }
}

/// Number of eigenvalues of the pencil `(K, M)` below `sigma` (Sylvester
/// inertia of `K − σM`).
fn sturm_count(k: &Tridiagonal, m: &Tridiagonal, sigma: f64) -> usize {
    let mut count = 0;
    let mut piv = 1.0;
    for i in 0..k.d.len() {
        let a = k.d[i] - sigma * m.d[i];
        let b = if i > 0 { k.e[i - 1] - sigma * m.e[i - 1] } else { 0.0 };
        piv = if i > 0 { a - b * b / piv } else { a };
        if piv == 0.0 {
            piv = -f64::MIN_POSITIVE;
        }
        if piv < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solve `(K − σM) x = rhs` by the Thomas algorithm.
fn shifted_solve(k: &Tridiagonal, m: &Tridiagonal, sigma: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut piv = k.d[0] - sigma * m.d[0];
    let tiny = 1e-300;
    if piv.abs() < tiny {
        piv = tiny;
    }
    x[0] = rhs[0] / piv;
    for i in 1..n {
        let b = k.e[i - 1] - sigma * m.e[i - 1];
        c[i - 1] = b / piv;
        piv = k.d[i] - sigma * m.d[i] - b * c[i - 1];
        if piv.abs() < tiny {
            piv = tiny;
        }
        x[i] = (rhs[i] - b * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

fn tri_matvec(m: &Tridiagonal, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut v = m.d[i] * x[i];
            if i > 0 {
                v += m.e[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += m.e[i] * x[i + 1];
            }
            v
        })
        .collect()
}

/// Nodes of the graded mesh: log-uniform on `[a/N, ℓ]` and on `[ℓ, ℓ0]`.
fn modified_nodes(core: f64, ell: f64, ell0: f64, per_piece: usize) -> Vec<f64> {
    let mut nodes = Vec::with_capacity(2 * per_piece + 1);
    for i in 0..per_piece {
        nodes.push(core * (ell / core).powf(i as f64 / per_piece as f64));
    }
    nodes.push(ell);
    for i in 1..per_piece {
        nodes.push(ell * (ell0 / ell).powf(i as f64 / per_piece as f64));
    }
    nodes.push(ell0);
    nodes
}

/// P1 finite elements for `−(r² f² g')' + λ_ℓ χ_ℓ r² f² g = λ̃ r² f² g`.
/// Returns the smallest eigenvalue and the eigenvector scaled to `g(ℓ0) = 1`.
fn modified_fe_level(inner: &HardCoreParams, ell0: f64, per_piece: usize) -> (Vec<f64>, f64, Vec<f64>) {
    let nodes = modified_nodes(inner.core, inner.ell, ell0, per_piece);
    let n = nodes.len();
    let (gx, gw) = gauss_legendre(8);
    let mut stiff = Tridiagonal::zeros(n);
    let mut mass = Tridiagonal::zeros(n);
    // per element: gradient weight, mass matrix, potential flag
    let mut elements = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let (a, b) = (nodes[i], nodes[i + 1]);
        let h = b - a;
        let mut w0 = 0.0;
        let mut mm = [[0.0; 2]; 2];
        for (x, w) in gx.iter().zip(&gw) {
            let r = a + 0.5 * h * (x + 1.0);
            let f = inner.value(r);
            let weight = 0.5 * h * w * r * r * f * f;
            let (p0, p1) = (0.5 * (1.0 - x), 0.5 * (1.0 + x));
            w0 += weight;
            mm[0][0] += weight * p0 * p0;
            mm[0][1] += weight * p0 * p1;
            mm[1][1] += weight * p1 * p1;
        }
        mm[1][0] = mm[0][1];
        let s = w0 / (h * h);
        let mut ke = [[s, -s], [-s, s]];
        if b <= inner.ell {
            for r in 0..2 {
                for c in 0..2 {
                    ke[r][c] += inner.lambda() * mm[r][c];
                }
            }
        }
        stiff.add_element(i, ke);
        mass.add_element(i, mm);
        elements.push((s, mm, b <= inner.ell));
    }

    // eigenvalue bracket: 0 below, Rayleigh quotient of the constant above
    let ones = vec![1.0; n];
    let hi0 = tri_matvec(&stiff, &ones).iter().sum::<f64>() / tri_matvec(&mass, &ones).iter().sum::<f64>();
    let (mut lo, mut hi) = (0.0, hi0 * (1.0 + 1e-12));
    for _ in 0..200 {
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sturm_count(&stiff, &mass, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let shift = 0.5 * (lo + hi);

    let mut x = ones;
    for _ in 0..4 {
        let rhs = tri_matvec(&mass, &x);
        x = shifted_solve(&stiff, &mass, shift * (1.0 - 1e-10), &rhs);
        let top = x[n - 1];
        x.iter_mut().for_each(|v| *v /= top);
    }
    // Rayleigh quotient summed elementwise: every term is non-negative, so
    // no cancellation between stiffness and mass
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (s, mm, potential)) in elements.iter().enumerate() {
        let (a, b) = (x[i], x[i + 1]);
        let m = mm[0][0] * a * a + 2.0 * mm[0][1] * a * b + mm[1][1] * b * b;
        num += s * (b - a) * (b - a);
        if *potential {
            num += inner.lambda() * m;
        }
        den += m;
    }
    (nodes, num / den, x)
}

/// Elements per piece on the coarsest of the three grids.
pub const MODIFIED_BASE_ELEMENTS: usize = 1000;

fn modified_fe(inner: &HardCoreParams, ell0: f64, per_piece: usize) -> ModifiedFdRoute {
    let levels: Vec<(Vec<f64>, f64, Vec<f64>)> =
        [1, 2, 4].par_iter().map(|&m| modified_fe_level(inner, ell0, per_piece * m)).collect();
    let (nodes, l1, v1) = &levels[0];
    let (_, l2, v2) = &levels[1];
    let (_, l4, v4) = &levels[2];
    // error expansion in even powers of the mesh width
    let rich = |a: f64, b: f64, c: f64| (64.0 * c - 20.0 * b + a) / 45.0;
    let values = (0..nodes.len()).map(|i| rich(v1[i], v2[2 * i], v4[4 * i])).collect();
    ModifiedFdRoute {
        nodes: nodes.clone(),
        values,
        lambda: rich(*l1, *l2, *l4),
        lambda_grids: vec![*l1, *l2, *l4],
        elements_per_piece: per_piece,
    }
}

/// Tolerance on the agreement of the two routes for `g_{ℓ0}`.
pub const MODIFIED_ROUTE_TOLERANCE: f64 = 1e-6;

/// Ground state `g_{ℓ0}` of the modified Neumann problem, by the quotient
/// identity and by a direct finite-element solve.
pub fn solve_modified(hc: &ScatteringSolution, ell0: f64) -> Result<ScatteringSolution> {
    solve_modified_with(hc, ell0, MODIFIED_BASE_ELEMENTS)
}

pub fn solve_modified_with(hc: &ScatteringSolution, ell0: f64, per_piece: usize) -> Result<ScatteringSolution> {
    if hc.kind != SolutionKind::HardCoreNeumann {
        return Err(Error::domain("solve_modified needs a hard-core Neumann solution"));
    }
    check_radius(ell0)?;
    if !(ell0 > hc.ell) {
        return Err(Error::domain(format!("need ell < ell0, got ell = {}, ell0 = {ell0}", hc.ell)));
    }
    let inner = match hc.hard_core_params() {
        Some(p) => p,
        None => {
            // a = 0: f_ℓ ≡ 1, g ≡ 1
            let grid: Vec<f64> = (0..=200).map(|i| ell0 * i as f64 / 200.0).collect();
            let f = vec![1.0; grid.len()];
            return Ok(ScatteringSolution {
                kind: SolutionKind::ModifiedEffective,
                grid,
                f,
                lambda: 0.0,
                ell: ell0,
                scattering_length: None,
                residuals: BTreeMap::new(),
                fd_route: None,
                profile: Profile::One,
            });
        }
    };
    let outer = HardCoreParams::new(inner.core, ell0)?;
    let prof = ModifiedProfile::new(inner, outer);
    let fe = modified_fe(&inner, ell0, per_piece);

    let analytic: Vec<f64> = fe.nodes.iter().map(|&r| prof.value(r)).collect();
    let pointwise = fe
        .values
        .iter()
        .zip(&analytic)
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max);
    let lambda_rel = ((fe.lambda - outer.lambda()) / outer.lambda()).abs();
    if pointwise > MODIFIED_ROUTE_TOLERANCE {
        return Err(Error::ConsistencyFailure {
            message: "finite-element g and f_ℓ0/f_ℓ disagree".into(),
            discrepancy: pointwise,
        });
    }
    let mut residuals = BTreeMap::new();
    residuals.insert("route_pointwise_relative".into(), pointwise);
    residuals.insert("route_lambda_relative".into(), lambda_rel);
    residuals.insert("lambda_ell0".into(), outer.lambda());

    let mut grid = vec![0.0];
    grid.extend(fe.nodes.iter().copied());
    let mut f = vec![prof.core_value()];
    f.extend(analytic);
    Ok(ScatteringSolution {
        kind: SolutionKind::ModifiedEffective,
        grid,
        f,
        lambda: fe.lambda,
        ell: ell0,
        scattering_length: None,
        residuals,
        fd_route: Some(fe),
        profile: Profile::Modified(prof),
    })
}

/// `η_p = −N (1 − f)^(p)` on the shells of a lattice.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorrelationKernel {
    pub source: SolutionKind,
    pub n_particles: u64,
    /// `|n|²` of each shell, ascending (`p = 2πn`).
    pub shell_n2: Vec<u64>,
    pub shell_count: Vec<u64>,
    pub values: Vec<f64>,
    /// `−N ŵ(0)`, the value used for `q = 0` in sums over `Λ*`.
    pub eta_zero: f64,
}

impl CorrelationKernel {
    /// `η` at `|n|² = n2` (`n2 = 0` gives `eta_zero`); `None` outside the cutoff.
    pub fn at_n2(&self, n2: u64) -> Option<f64> {
        if n2 == 0 {
            return Some(self.eta_zero);
        }
        self.shell_n2.binary_search(&n2).ok().map(|i| self.values[i])
    }

    pub fn at(&self, n: [i64; 3]) -> Option<f64> {
        self.at_n2(crate::lattice::norm2(n))
    }

    pub fn shells(&self) -> impl Iterator<Item = (Shell, f64)> + '_ {
        self.shell_n2
            .iter()
            .zip(&self.shell_count)
            .zip(&self.values)
            .map(|((&n2, &count), &v)| (Shell { n2, count }, v))
    }

    /// `max_p |η_p| p²`, the fitted constant of the `C/p²` bound.
    pub fn decay_constant(&self) -> f64 {
        self.shells().map(|(s, v)| v.abs() * s.p2()).fold(0.0, f64::max)
    }
}

/// Build `η_p = −N (1 − f)^(p)` over the lattice shells.
pub fn correlation_kernel(sol: &ScatteringSolution, lattice: &MomentumLattice, n: u64) -> Result<CorrelationKernel> {
    if sol.kind == SolutionKind::WholeSpace {
        return Err(Error::domain("correlation kernels need a compactly supported deviation"));
    }
    let nf = n as f64;
    let shells = lattice.shells();
    let values: Vec<f64> = shells
        .par_iter()
        .map(|s| sol.deviation_hat(s.p()).map(|w| -nf * w))
        .collect::<Result<_>>()?;
    Ok(CorrelationKernel {
        source: sol.kind,
        n_particles: n,
        shell_n2: shells.iter().map(|s| s.n2).collect(),
        shell_count: shells.iter().map(|s| s.count).collect(),
        values,
        eta_zero: -nf * sol.deviation_hat(0.0)?,
    })
}

/// `û_ℓ(p)` for `u_ℓ = 1 − f_ℓ²`.
pub fn u_ell_hat(hc: &ScatteringSolution, p: f64) -> Result<f64> {
    if hc.kind != SolutionKind::HardCoreNeumann {
        return Err(Error::domain("u_ell_hat needs a hard-core Neumann solution"));
    }
    if hc.hard_core_params().is_none() {
        return Ok(0.0);
    }
    let p = p.abs();
    let v = integrate_pieces(
        |r| {
            let f = hc.value(r);
            r * r * (1.0 - f * f) * sinc(p * r)
        },
        &hc.breakpoints(),
        &transform_config(hc.ell.powi(3)),
    )?;
    Ok(4.0 * PI * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::trig_over_r_hat;

    #[test]
    fn hard_core_root_lies_on_first_branch() {
        let h = HardCoreParams::new(1e-4, 1e-2).unwrap();
        assert!(h.phase > 0.0 && h.phase < FRAC_PI_2);
        assert!((h.phase.tan() - h.k * h.ell).abs() < 1e-12 * h.k * h.ell);
        assert!(h.derivative(h.ell).abs() < 1e-9 * h.k);
        assert_eq!(h.value(h.ell), 1.0);
    }

    #[test]
    fn hard_core_profile_bounds() {
        let sol = solve_hard_core(1.0, 10_000, 0.01).unwrap();
        assert!(sol.f.iter().all(|&v| (0.0..=1.0 + 1e-15).contains(&v)));
        assert_eq!(sol.value(0.5e-4), 0.0);
        assert_eq!(sol.value(1e-4), 0.0);
    }

    #[test]
    fn hard_core_rejects_bad_radii() {
        assert!(solve_hard_core(1.0, 100, 0.005).is_err());
        assert!(solve_hard_core(1.0, 100, 0.5).is_err());
    }

    #[test]
    fn hard_core_deviation_matches_closed_form() {
        let sol = solve_hard_core(1.0, 1000, 0.05).unwrap();
        let h = sol.hard_core_params().unwrap();
        for &p in &[0.0, 2.0 * PI, 40.0, 300.0] {
            let quad = sol.deviation_hat(p).unwrap();
            let core_ball = 4.0 * PI * crate::radial::r2_sinc_integral(0.0, h.ell, p);
            let amp = h.ell / h.phase.sin();
            let closed = core_ball
                - amp * trig_over_r_hat((h.k * h.core).cos(), -(h.k * h.core).sin(), h.k, h.core, h.ell, p);
            assert!((quad - closed).abs() < 1e-12 * h.ell.powi(3), "p = {p}: {quad} vs {closed}");
        }
    }

    #[test]
    fn whole_space_soft_sphere_against_closed_form() {
        for &kappa in &[0.1, 1.0, 10.0] {
            let v = RadialPotential::soft_sphere(kappa, 1.0).unwrap();
            let q = (kappa / 2.0f64).sqrt();
            let exact = 1.0 - (q).tanh() / q;
            let a = scattering_length(&v).unwrap();
            assert!(((a.value - exact) / exact).abs() < 1e-10);
            assert!(a.discrepancy() < 1e-9);
        }
    }

    #[test]
    fn scaled_scattering_length_scales() {
        let v = RadialPotential::soft_sphere(0.5, 1.0).unwrap();
        let s = ScaledPotential::new(v, 10_000, 0.5).unwrap();
        let a = scattering_length_scaled(&s).unwrap().value;
        // radius 10^-2, height 50
        let q = 5.0f64;
        let exact = 0.01 - (q * 0.01).tanh() / q;
        assert!(((a - exact) / exact).abs() < 1e-9);
    }

    #[test]
    fn zero_potential_neumann_is_trivial() {
        let s = ScaledPotential::new(RadialPotential::zero(), 100, 0.5).unwrap();
        let sol = solve_soft_neumann(&s, 0.3).unwrap();
        assert_eq!(sol.lambda, 0.0);
        assert!(sol.f.iter().all(|&v| v == 1.0));
        let lat = MomentumLattice::euclidean(5.0 * 2.0 * PI).unwrap();
        let k = correlation_kernel(&sol, &lat, 100).unwrap();
        assert!(k.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn soft_neumann_quadratic_form_and_bounds() {
        let s = ScaledPotential::new(RadialPotential::soft_sphere(1.0, 1.0).unwrap(), 10_000, 0.8).unwrap();
        let sol = solve_soft_neumann(&s, 0.1).unwrap();
        assert!(sol.residuals["quadratic_form_relative"] < 1e-8);
        assert!(sol.residuals["bound_violation"] < 1e-12);
        assert!((sol.value(0.1) - 1.0).abs() < 1e-13);
        assert!(sol.residuals["neumann_slope"] < 1e-6);
    }

    #[test]
    fn soft_neumann_domain_errors() {
        let s = ScaledPotential::new(RadialPotential::soft_sphere(1.0, 1.0).unwrap(), 100, 0.5).unwrap();
        assert!(matches!(solve_soft_neumann(&s, 0.5), Err(Error::Domain(_))));
        assert!(matches!(solve_soft_neumann(&s, 0.05), Err(Error::Domain(_))));
    }

    #[test]
    fn whole_space_kernel_is_rejected() {
        let v = RadialPotential::soft_sphere(1.0, 1.0).unwrap();
        let sol = solve_whole_space(&v).unwrap();
        let lat = MomentumLattice::euclidean(2.0 * PI).unwrap();
        assert!(matches!(correlation_kernel(&sol, &lat, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn u_hat_at_zero_is_positive() {
        let hc = solve_hard_core(1.0, 10_000, 0.01).unwrap();
        let u0 = u_ell_hat(&hc, 0.0).unwrap();
        let direct = integrate_pieces(
            |r| {
                let f = hc.value(r);
                4.0 * PI * r * r * (1.0 - f * f)
            },
            &[0.0, 1e-4, 0.01],
            &QuadConfig::with_abs_tol(1e-20),
        )
        .unwrap();
        assert!(u0 > 0.0);
        assert!(((u0 - direct) / direct).abs() < 1e-10);
    }

    #[test]
    fn modified_quotient_limits() {
        let hc = solve_hard_core(1.0, 10_000, 0.01).unwrap();
        let m = solve_modified_with(&hc, 0.1, 200).unwrap();
        assert_eq!(m.value(0.1), 1.0);
        assert_eq!(m.value(0.3), 1.0);
        let core = 1e-4;
        let below = m.value(0.5 * core);
        assert!(((m.value(core * (1.0 + 1e-9)) - below) / below).abs() < 1e-8);
        // the series branch meets the direct quotient
        let prof = match &m.profile {
            Profile::Modified(p) => *p,
            _ => unreachable!(),
        };
        let d = 0.999e-6 / prof.inner.k;
        let series = prof.value(core + d);
        let direct = prof.ratio * (prof.outer.k * d).sin() / (prof.inner.k * d).sin();
        assert!(((series - direct) / direct).abs() < 1e-12);
    }

    #[test]
    fn sturm_count_on_diagonal_pencil() {
        let k = Tridiagonal {
            d: vec![1.0, 2.0, 3.0],
            e: vec![0.0, 0.0],
        };
        let m = Tridiagonal {
            d: vec![1.0, 1.0, 1.0],
            e: vec![0.0, 0.0],
        };
        assert_eq!(sturm_count(&k, &m, 0.5), 0);
        assert_eq!(sturm_count(&k, &m, 2.5), 2);
        assert_eq!(sturm_count(&k, &m, 10.0), 3);
    }

    #[test]
    fn hard_core_eigenvalue_asymptotics() {
        let (a, n, ell) = (1.0, 10_000u64, 1e-2);
        let sol = solve_hard_core(a, n, ell).unwrap();
        let ratio = a / (n as f64 * ell);
        let lead = 3.0 * a / (n as f64 * ell.powi(3)) * (1.0 + 1.8 * ratio);
        assert!(((sol.lambda - lead) / lead).abs() < 10.0 * ratio * ratio);
    }

    #[test]
    fn hard_core_green_identity() {
        let sol = solve_hard_core(1.0, 1000, 0.05).unwrap();
        let h = sol.hard_core_params().unwrap();
        let cfg = QuadConfig::with_abs_tol(1e-22);
        let grad = integrate_pieces(|r| r * r * h.derivative(r).powi(2), &[h.core, h.ell], &cfg).unwrap();
        let mass = integrate_pieces(|r| r * r * h.value(r).powi(2), &[h.core, h.ell], &cfg).unwrap();
        assert!(((grad - sol.lambda * mass) / grad).abs() < 1e-10);
    }

    #[test]
    fn hard_core_eigenvalue_decreases_with_radius() {
        let lams: Vec<f64> =
            (1..=20).map(|i| solve_hard_core(1.0, 1000, 0.005 * i as f64 + 0.001).unwrap().lambda).collect();
        assert!(lams.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn hard_core_deviation_bound() {
        let (a, n) = (1.0, 10_000u64);
        let sol = solve_hard_core(a, n, 1e-2).unwrap();
        let core = a / n as f64;
        let fitted = sol
            .grid
            .iter()
            .filter(|&&r| r >= core)
            .map(|&r| (1.0 - sol.value(r)) * n as f64 * r / a)
            .fold(0.0, f64::max);
        assert!(fitted <= 2.0, "fitted constant {fitted}");
    }

    #[test]
    fn soft_neumann_leading_asymptotics() {
        let (n, beta, ell) = (10_000u64, 0.8, 0.1);
        let base = RadialPotential::soft_sphere(1.0, 1.0).unwrap();
        let v0 = base.fourier_hat(0.0).unwrap();
        let s = ScaledPotential::new(base, n, beta).unwrap();
        let sol = solve_soft_neumann(&s, ell).unwrap();
        let lead = 3.0 * v0 / (8.0 * PI * n as f64 * ell.powi(3));
        assert!(((sol.lambda - lead) / lead).abs() < 2.0 * (n as f64).powf(beta - 1.0));
    }

    #[test]
    fn soft_neumann_mesh_halving() {
        let s = ScaledPotential::new(RadialPotential::soft_sphere(1.0, 1.0).unwrap(), 10_000, 0.8).unwrap();
        let coarse = solve_soft_neumann(&s, 0.1).unwrap();
        let cfg = SoftNeumannConfig {
            steps_per_core: 256.0,
            ..SoftNeumannConfig::default()
        };
        let fine = solve_soft_neumann_with(&s, 0.1, &cfg).unwrap();
        assert!(((fine.lambda - coarse.lambda) / coarse.lambda).abs() < 1e-8);
    }

    #[test]
    fn modified_routes_agree() {
        let hc = solve_hard_core(1.0, 10_000, 1e-2).unwrap();
        let m = solve_modified(&hc, 0.1).unwrap();
        assert!(m.residuals["route_pointwise_relative"] < 1e-6);
        assert!(m.residuals["route_lambda_relative"] < 1e-8);
        let exact = solve_hard_core(1.0, 10_000, 0.1).unwrap().lambda;
        assert!(((m.lambda - exact) / exact).abs() < 1e-8);
        for &r in &[2e-4, 5e-3, 0.02, 0.07] {
            let q = solve_hard_core(1.0, 10_000, 0.1).unwrap().value(r) / hc.value(r);
            assert!(((m.value(r) - q) / q).abs() < 1e-12);
        }
    }

    #[test]
    fn modified_rejects_bad_radius() {
        let hc = solve_hard_core(1.0, 10_000, 1e-2).unwrap();
        assert!(matches!(solve_modified(&hc, 0.005), Err(Error::Domain(_))));
        let s = ScaledPotential::new(RadialPotential::soft_sphere(1.0, 1.0).unwrap(), 10_000, 0.8).unwrap();
        let soft = solve_soft_neumann(&s, 0.1).unwrap();
        assert!(solve_modified(&soft, 0.2).is_err());
    }

    #[test]
    fn hard_core_kernel_decay_and_evenness() {
        let hc = solve_hard_core(1.0, 10_000, 1e-2).unwrap();
        let lat = MomentumLattice::euclidean(2.0 * PI * 30.0).unwrap();
        let k = correlation_kernel(&hc, &lat, 10_000).unwrap();
        assert_eq!(k.at([1, 2, -3]), k.at([-1, -2, 3]));
        assert_eq!(k.at([3, 0, 0]), k.at([0, 0, -3]));
        // |η_p| p² saturates near 4πa for 1/ℓ ≪ p ≪ N/a
        for m in [30.0, 60.0, 120.0] {
            let lat = MomentumLattice::euclidean(2.0 * PI * m).unwrap();
            let c = correlation_kernel(&hc, &lat, 10_000).unwrap().decay_constant();
            assert!(c > 0.0 && c <= 8.0 * PI, "cutoff {m}: {c}");
        }
    }

    #[test]
    fn u_hat_decays_like_inverse_square() {
        let hc = solve_hard_core(1.0, 10_000, 1e-2).unwrap();
        let scaled: Vec<f64> =
            [1e3, 3e3, 1e4, 3e4].iter().map(|&p: &f64| u_ell_hat(&hc, p).unwrap().abs() * p * p).collect();
        let max = scaled.iter().cloned().fold(0.0, f64::max);
        assert!(max < 2.0 * scaled[0].max(scaled[1]));
    }

    #[test]
    fn closed_form_transforms_match_quadrature() {
        let hc = solve_hard_core(1.0, 10_000, 1e-3).unwrap();
        let m = solve_modified(&hc, 0.05).unwrap();
        let cfg = QuadConfig {
            abs_tol: 1e-22,
            rel_tol: 1e-12,
            max_intervals: 200_000,
        };
        for p in [7.0e4, 2.0e5] {
            let q = crate::radial::radial_transform(|r| 1.0 - hc.value(r), &hc.breakpoints(), p, &cfg).unwrap();
            let c = hc.deviation_hat(p).unwrap();
            assert!((c - q).abs() < 1e-8 * q.abs(), "{c} vs {q}");
        }
        for p in [2.0e3, 1.0e4] {
            let q = crate::radial::radial_transform(|r| 1.0 - m.value(r), &m.breakpoints(), p, &cfg).unwrap();
            let c = m.deviation_hat(p).unwrap();
            assert!((c - q).abs() < 1e-7 * q.abs(), "{c} vs {q}");
        }
    }
}
