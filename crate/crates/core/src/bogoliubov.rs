//! Bogoliubov kernels `η, σ, γ, F, G, τ` on the momentum lattice, the
//! constants of the quadratic expansions, and assembly of the three
//! upper bounds.
//!
//! Lattice convolutions against compactly supported functions are done in
//! real space: for `h` and `k` supported in a ball of radius `< 1/2`,
//! `Σ_{q∈Λ*} ĥ(p−q) k̂(q) = (h k)^(p)`, which is the exact value of the full
//! lattice sum. The truncated direct sums are kept for cross-checks.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::born::{self, BornConfig, BornSeries};
use crate::error::{Error, Result};
use crate::lattice::{self, Acceleration, Cutoff, MomentumLattice, Shell, SumResult, TWO_PI};
use crate::potential::{RadialPotential, ScaledPotential};
use crate::quadrature::{gauss_legendre, integrate_pieces, kahan_sum, QuadConfig};
use crate::radial::{ball_hat, divergence_hat, sinc};
use crate::scattering::{
    self, correlation_kernel, CorrelationKernel, ScatteringSolution, SolutionKind, MAX_NEUMANN_RADIUS,
};

/// Default Euclidean cutoff for kernel sets.
pub const DEFAULT_KERNEL_CUTOFF: f64 = 40.0 * TWO_PI;

const TAIL_RULE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelRegime {
    Beta { beta: f64, particles: u64, ell: f64 },
    EffectiveHc { scattering_length: f64, particles: u64, ell: f64, ell0: f64, nu: f64 },
}

/// Kernel data on one lattice shell (all maps are radial, hence even).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub n2: u64,
    pub count: u64,
    pub p2: f64,
    pub eta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub diagonal: f64,
    pub pairing: f64,
    pub tau: f64,
    pub dispersion: f64,
}

/// Continuum integrals beyond the cutoff for the sums built on a kernel set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct KernelTails {
    /// Tail of `½ Σ (−F + √(F² − G²))`.
    pub ground_energy: f64,
    /// Tail of the momentum sum inside the constant `C_N`.
    pub constant: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSet {
    pub regime: KernelRegime,
    pub cutoff: Cutoff,
    pub points: Vec<KernelPoint>,
    pub tails: KernelTails,
    /// Per-shell summand of the momentum sum in `C_N` (one lattice point).
    pub constant_summands: Vec<f64>,
}

impl KernelSet {
    /// Kernel data at `n`, or `None` outside the cutoff.
    pub fn at(&self, n: [i64; 3]) -> Option<&KernelPoint> {
        let n2 = lattice::norm2(n);
        self.points.binary_search_by_key(&n2, |k| k.n2).ok().map(|i| &self.points[i])
    }

    /// `max |τ_p| p⁴` over the lattice.
    pub fn tau_decay_constant(&self) -> f64 {
        self.points.iter().map(|k| k.tau.abs() * k.p2 * k.p2).fold(0.0, f64::max)
    }

    pub fn min_dispersion(&self) -> f64 {
        self.points.iter().map(|k| k.dispersion).fold(f64::INFINITY, f64::min)
    }
}

/// Transforms of the effective potential data on the lattice shells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectivePotentialData {
    pub n2: Vec<u64>,
    /// `V̂_ℓ(p)` for `V_ℓ = 2Nλ_ℓ χ_ℓ f_ℓ²`.
    pub v_ell_hat: Vec<f64>,
    pub v_ell_hat_zero: f64,
    /// Torus coefficients of `g_{ℓ0}`: `ĝ(0) = 1 − ∫(1 − g)`, `ĝ(p) = −(1 − g)^(p)`.
    pub g_hat: Vec<f64>,
    pub g_hat_zero: f64,
    pub u_hat: Vec<f64>,
    pub u_hat_zero: f64,
}

fn kernel_quad(scale: f64) -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-15 * scale,
        rel_tol: 1e-12,
        max_intervals: 20_000,
    }
}

/// Everything needed to evaluate the kernels at an arbitrary `|p|`.
enum Model<'a> {
    Beta {
        s: &'a ScaledPotential,
        sol: &'a ScatteringSolution,
        /// `ŵ(0)`.
        w0: f64,
        breaks: Vec<f64>,
    },
    Eff {
        hc: &'a ScatteringSolution,
        modified: &'a ScatteringSolution,
        n: f64,
        lambda: f64,
        /// `(1 − g)^(0)`.
        w0: f64,
    },
}

/// Kernel values at one momentum plus the `C_N` summand.
struct Eval {
    eta: f64,
    sigma: f64,
    gamma: f64,
    f: f64,
    g: f64,
    tau: f64,
    dispersion: f64,
    constant: f64,
}

impl Eval {
    fn ground(&self) -> f64 {
        // ½(−F + √(F² − G²)) without cancellation
        -0.5 * self.g * self.g / (self.f + self.dispersion)
    }
}

fn finish(p2: f64, eta: f64, f: f64, g: f64, constant: f64) -> Result<Eval> {
    if !(f > 0.0 && g.abs() < f) {
        return Err(Error::KernelDomain { p2, diagonal: f, pairing: g });
    }
    let dispersion = ((f - g) * (f + g)).sqrt();
    Ok(Eval {
        eta,
        sigma: eta.sinh(),
        gamma: eta.cosh(),
        f,
        g,
        tau: -0.5 * (g / f).atanh(),
        dispersion,
        constant,
    })
}

impl Model<'_> {
    /// Largest radius in the real-space data.
    fn outer_radius(&self) -> f64 {
        match self {
            Model::Beta { sol, .. } => sol.ell,
            Model::Eff { modified, .. } => modified.ell,
        }
    }

    /// Momentum beyond which every summand has started its power-law decay.
    fn decay_scale(&self) -> f64 {
        match self {
            Model::Beta { s, sol, .. } => {
                let r = s.base.support_radius();
                if r > 0.0 {
                    (s.scale() / r).max(1.0 / sol.ell)
                } else {
                    1.0 / sol.ell
                }
            }
            Model::Eff { hc, .. } => 1.0 / hc.ell,
        }
    }

    /// `from_equation` takes η from the Fourier-space scattering equation
    /// instead of the transform of the profile (β regime only).
    fn eval(&self, p: f64, p2: f64, from_equation: bool) -> Result<Eval> {
        match self {
            Model::Beta { s, sol, w0, breaks } => {
                let n = s.n_f64();
                let vhat = s.scaled_hat(p)?;
                // (V_N w)^(p) with V_N = N^{3β} V(N^β ·) = N · scaled value
                let vw = n
                    * 4.0
                    * PI
                    * integrate_pieces(
                        |r| r * r * s.value(r) * (1.0 - sol.value(r)) * sinc(p * r),
                        breaks,
                        &kernel_quad(s.support_radius().powi(3) * s.prefactor()),
                    )?;
                let eta = if from_equation {
                    // the scattering equation solved for η keeps relative accuracy at large p
                    (-0.5 * vhat + 0.5 * vw + n * sol.lambda * ball_hat(sol.ell, p)) / (p2 - sol.lambda)
                } else {
                    -n * sol.deviation_hat(p)?
                };
                // (1/N) Σ_{q≠0} V̂((p−q)/N^β) η_q
                let conv = -vw + vhat * w0;
                let (sg, cg) = (eta.sinh(), eta.cosh());
                let f = p2 * (sg * sg + cg * cg) + vhat * (sg + cg).powi(2);
                let g = 2.0 * p2 * sg * cg + vhat * (sg + cg).powi(2) + conv;
                let constant = p2 * sg * sg + vhat * (sg * sg + sg * cg) + 0.5 * eta * conv;
                finish(p2, eta, f, g, constant)
            }
            Model::Eff {
                hc,
                modified,
                n,
                lambda,
                w0,
            } => {
                let core = hc.core_radius();
                let ell = hc.ell;
                let cfg = QuadConfig {
                    abs_tol: 1e-14 * ell.powi(3),
                    ..kernel_quad(1.0)
                };
                let eta = -n * modified.deviation_hat(p)?;
                let pre = 2.0 * n * lambda * 4.0 * PI;
                let (vl, vlg) = {
                    let pieces = [core, ell];
                    let vl = pre * integrate_pieces(|r| r * r * hc.value(r).powi(2) * sinc(p * r), &pieces, &cfg)?;
                    let vlg = pre
                        * integrate_pieces(
                            |r| r * r * hc.value(r).powi(2) * modified.value(r) * sinc(p * r),
                            &pieces,
                            &cfg,
                        )?;
                    (vl, vlg)
                };
                // Σ_q p·(p+q) û(q) η_{p+q} = −N (∇·(u g' r̂))^(p)
                // |g'| ≲ λ_ℓ ℓ on [a/N, ℓ]
                let div = divergence_hat(
                    |r| {
                        let f = hc.value(r);
                        (1.0 - f * f) * modified.derivative(r).unwrap_or(0.0)
                    },
                    &[core, ell],
                    p,
                    &QuadConfig {
                        abs_tol: cfg.abs_tol * lambda * ell,
                        ..cfg
                    },
                )?;
                let kinetic = -n * div;
                // (1/N) Σ_{q≠0} V̂_ℓ(p−q) η_q = −(V_ℓ (1 − g))^(p) + V̂_ℓ(p) (1 − g)^(0)
                let conv = -(vl - vlg) + vl * w0;
                let (sg, cg) = (eta.sinh(), eta.cosh());
                let f = p2 * (sg * sg + cg * cg) + vlg * (sg + cg).powi(2);
                let g = 2.0 * p2 * sg * cg - 2.0 * kinetic + vlg * (sg + cg).powi(2);
                // the kinetic correction −Σ_q p·(p+q) û(q) η_{p+q} sums to
                // N (∇·(u g' r̂))(0) = 0 over Λ*, so it is left out of the summand
                let constant = p2 * sg * sg + vl * (sg * sg + sg * cg) + 0.5 * eta * conv;
                finish(p2, eta, f, g, constant)
            }
        }
    }

    /// Continuum tails `(1/(2π)³) ∫_{K<|p|<64 max(K, scale)}` of the
    /// ground-energy and constant summands.
    fn tails(&self, k: f64) -> Result<KernelTails> {
        let scale = self.decay_scale();
        let failure: Mutex<Option<Error>> = Mutex::new(None);
        let eval = |p: f64| -> (f64, f64) {
            match self.eval(p, p * p, true) {
                Ok(e) => (e.ground(), e.constant),
                Err(err) => {
                    failure.lock().unwrap().get_or_insert(err);
                    (0.0, 0.0)
                }
            }
        };
        let mut out = KernelTails::default();
        // chunks of ~8 periods of the fastest oscillation 2π / r_max, each
        // with a fixed Gauss rule: the summands carry round-off from
        // cancellations that adaptive refinement would chase
        let chunk = 16.0 * PI / self.outer_radius();
        let (nodes, weights) = gauss_legendre(TAIL_RULE);
        // beyond 64x the decay scale the summands fall like p^-4 per unit p
        // and the transforms are at round-off level
        let p_max = 64.0 * scale.max(k);
        let pieces = ((p_max - k) / chunk).ceil().max(1.0) as usize;
        let width = (p_max - k) / pieces as f64;
        let sums: Vec<(f64, f64)> = (0..pieces)
            .into_par_iter()
            .map(|i| {
                let mid = k + (i as f64 + 0.5) * width;
                let (mut g, mut c) = (0.0, 0.0);
                for (x, w) in nodes.iter().zip(&weights) {
                    let p = mid + 0.5 * width * x;
                    let (eg, ec) = eval(p);
                    g += w * p * p * eg;
                    c += w * p * p * ec;
                }
                (0.5 * width * g, 0.5 * width * c)
            })
            .collect();
        out.ground_energy = kahan_sum(sums.iter().map(|s| s.0)) / (2.0 * PI * PI);
        out.constant = kahan_sum(sums.iter().map(|s| s.1)) / (2.0 * PI * PI);
        if let Some(err) = failure.into_inner().unwrap() {
            return Err(err);
        }
        Ok(out)
    }
}

fn build(model: &Model, regime: KernelRegime, lattice: &MomentumLattice, eta_check: Option<&CorrelationKernel>) -> Result<KernelSet> {
    let shells = lattice.shells();
    let evals: Vec<(Shell, Eval)> = shells
        .par_iter()
        .map(|s| model.eval(s.p(), s.p2(), false).map(|e| (*s, e)))
        .collect::<Result<_>>()?;
    if let Some(kern) = eta_check {
        for (s, e) in &evals {
            match kern.at_n2(s.n2) {
                Some(v) if v == e.eta => {}
                _ => return Err(Error::config("correlation kernel does not match the lattice or solution")),
            }
        }
    }
    let tails = match lattice.cutoff() {
        Cutoff::Euclidean(k) => model.tails(k)?,
        Cutoff::Cube(_) => KernelTails::default(),
    };
    let points = evals
        .iter()
        .map(|(s, e)| KernelPoint {
            n2: s.n2,
            count: s.count,
            p2: s.p2(),
            eta: e.eta,
            sigma: e.sigma,
            gamma: e.gamma,
            diagonal: e.f,
            pairing: e.g,
            tau: e.tau,
            dispersion: e.dispersion,
        })
        .collect();
    Ok(KernelSet {
        regime,
        cutoff: lattice.cutoff(),
        points,
        tails,
        constant_summands: evals.iter().map(|(_, e)| e.constant).collect(),
    })
}

/// β-regime kernels `F_p, G_p, τ_p` from the soft Neumann solution.
pub fn kernels_beta(
    s: &ScaledPotential,
    sol: &ScatteringSolution,
    kern: &CorrelationKernel,
    lattice: &MomentumLattice,
) -> Result<KernelSet> {
    if sol.kind != SolutionKind::SoftNeumann {
        return Err(Error::domain("kernels_beta needs a soft Neumann solution"));
    }
    if kern.source != sol.kind || kern.n_particles != s.particles {
        return Err(Error::config("correlation kernel was built from a different solution"));
    }
    let model = Model::Beta {
        s,
        sol,
        w0: sol.deviation_hat(0.0)?,
        breaks: merge_breaks(&s.breakpoints(), &sol.breakpoints(), s.support_radius()),
    };
    build(
        &model,
        KernelRegime::Beta {
            beta: s.beta,
            particles: s.particles,
            ell: sol.ell,
        },
        lattice,
        Some(kern),
    )
}

fn merge_breaks(a: &[f64], b: &[f64], upto: f64) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().chain(b).copied().filter(|&x| x <= upto).collect();
    v.push(0.0);
    v.push(upto);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `C_N^{(β)}`, including the double sum `(1/2N) ΣΣ V̂((p−q)/N^β) η_p η_q`.
pub fn constant_c_n_beta(s: &ScaledPotential, kernels: &KernelSet) -> Result<f64> {
    if !matches!(kernels.regime, KernelRegime::Beta { .. }) {
        return Err(Error::domain("constant_c_n_beta needs β-regime kernels"));
    }
    let v0 = s.base.fourier_hat(0.0)?;
    Ok(0.5 * (s.n_f64() - 1.0) * v0 + momentum_sum(kernels))
}

fn momentum_sum(kernels: &KernelSet) -> f64 {
    let lattice_part = kahan_sum(kernels.points.iter().zip(&kernels.constant_summands).map(|(k, c)| k.count as f64 * c));
    lattice_part + kernels.tails.constant
}

/// `½ Σ_p (−F_p + √(F_p² − G_p²))`, with the continuum tail of the kernel set.
pub fn quadratic_ground_energy(kernels: &KernelSet) -> f64 {
    let lattice_part = kahan_sum(
        kernels
            .points
            .iter()
            .map(|k| k.count as f64 * (-0.5 * k.pairing * k.pairing / (k.diagonal + k.dispersion))),
    );
    lattice_part + kernels.tails.ground_energy
}

/// `½ (−F + √(F² − G²))` for one mode.
pub fn mode_ground_energy(diagonal: f64, pairing: f64) -> Result<f64> {
    if !(diagonal > 0.0 && pairing.abs() < diagonal) {
        return Err(Error::KernelDomain { p2: f64::NAN, diagonal, pairing });
    }
    Ok(-0.5 * pairing * pairing / (diagonal + ((diagonal - pairing) * (diagonal + pairing)).sqrt()))
}

/// Default Neumann radius `10 N^{−β}`, kept at most `0.45`.
pub fn default_ell(n: u64, beta: f64) -> f64 {
    (10.0 * (n as f64).powf(-beta)).min(0.45)
}

/// `ℓ = N^{−1+ν}`.
pub fn ell_from_nu(n: u64, nu: f64) -> f64 {
    (n as f64).powf(nu - 1.0)
}

/// Effective-Hamiltonian kernels `F^eff, G^eff, τ^eff` for a hard core of
/// radius `a` with `ℓ = N^{−1+ν}` and `ℓ0`.
pub fn kernels_eff(
    a: f64,
    n: u64,
    ell: f64,
    ell0: f64,
    lattice: &MomentumLattice,
) -> Result<(KernelSet, EffectivePotentialData)> {
    if !(a > 0.0) {
        return Err(Error::domain(format!("kernels_eff needs a > 0, got {a}")));
    }
    if !(a / (n as f64) < ell && ell < ell0 && ell0 < MAX_NEUMANN_RADIUS) {
        return Err(Error::domain(format!(
            "need a/N < ell < ell0 < 1/2, got a/N = {}, ell = {ell}, ell0 = {ell0}",
            a / n as f64
        )));
    }
    let hc = scattering::solve_hard_core(a, n, ell)?;
    let modified = scattering::solve_modified(&hc, ell0)?;
    let kern = correlation_kernel(&modified, lattice, n)?;
    let nf = n as f64;
    let model = Model::Eff {
        hc: &hc,
        modified: &modified,
        n: nf,
        lambda: hc.lambda,
        w0: modified.deviation_hat(0.0)?,
    };
    let nu = 1.0 + ell.ln() / nf.ln();
    let set = build(
        &model,
        KernelRegime::EffectiveHc {
            scattering_length: a,
            particles: n,
            ell,
            ell0,
            nu,
        },
        lattice,
        Some(&kern),
    )?;

    let core = a / nf;
    let cfg = QuadConfig {
        abs_tol: 1e-14 * ell.powi(3),
        ..kernel_quad(1.0)
    };
    let v_hat = |p: f64| -> Result<f64> {
        let v = integrate_pieces(|r| r * r * hc.value(r).powi(2) * sinc(p * r), &[core, ell], &cfg)?;
        Ok(2.0 * nf * hc.lambda * 4.0 * PI * v)
    };
    let shells = lattice.shells();
    let v_ell_hat = shells.par_iter().map(|s| v_hat(s.p())).collect::<Result<Vec<_>>>()?;
    let u_hat = shells
        .par_iter()
        .map(|s| scattering::u_ell_hat(&hc, s.p()))
        .collect::<Result<Vec<_>>>()?;
    let g_hat = set.points.iter().map(|k| k.eta / nf).collect();
    let data = EffectivePotentialData {
        n2: shells.iter().map(|s| s.n2).collect(),
        v_ell_hat,
        v_ell_hat_zero: v_hat(0.0)?,
        g_hat,
        g_hat_zero: 1.0 - modified.deviation_hat(0.0)?,
        u_hat,
        u_hat_zero: scattering::u_ell_hat(&hc, 0.0)?,
    };
    Ok((set, data))
}

/// `C_N^eff`. The kinetic correction `−Σ_p Σ_q p·(p+q) û_ℓ(q) η_{p+q}`
/// equals `N (∇·(u_ℓ g' r̂))(0) = 0`; its spherical partial sums oscillate
/// without converging, so the exact value is used.
pub fn constant_c_n_eff(kernels: &KernelSet, data: &EffectivePotentialData) -> Result<f64> {
    let n = match kernels.regime {
        KernelRegime::EffectiveHc { particles: n, .. } => n as f64,
        _ => return Err(Error::domain("constant_c_n_eff needs effective kernels")),
    };
    Ok(0.5 * (n - 1.0) * data.v_ell_hat_zero + momentum_sum(kernels))
}

/// Residual of the scattering equation written in Fourier space,
/// `p²η + ½V̂ + (1/2N) Σ_q V̂(p−q) η_q − Nλχ̂(p) − λ Σ_q χ̂(p−q) η_q`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringResidual {
    pub n2: Vec<u64>,
    /// Sums over `Λ*` with `η_0 = −N ŵ(0)`.
    pub with_zero_mode: Vec<f64>,
    /// Sums over `Λ*₊`.
    pub without_zero_mode: Vec<f64>,
}

impl ScatteringResidual {
    pub fn max_abs(&self, with_zero_mode: bool) -> f64 {
        let v = if with_zero_mode {
            &self.with_zero_mode
        } else {
            &self.without_zero_mode
        };
        v.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Residual with the convolutions summed exactly (real space).
pub fn scattering_residual(
    kern: &CorrelationKernel,
    s: &ScaledPotential,
    sol: &ScatteringSolution,
    lattice: &MomentumLattice,
) -> Result<ScatteringResidual> {
    if sol.kind != SolutionKind::SoftNeumann {
        return Err(Error::domain("scattering_residual needs a soft Neumann solution"));
    }
    let n = s.n_f64();
    let lambda = sol.lambda;
    let ell = sol.ell;
    let eta0 = kern.eta_zero;
    let breaks = merge_breaks(&s.breakpoints(), &sol.breakpoints(), s.support_radius());
    let shells = lattice.shells();
    let rows = shells
        .par_iter()
        .map(|sh| -> Result<(f64, f64)> {
            let p = sh.p();
            let eta = kern.at_n2(sh.n2).ok_or_else(|| Error::config("kernel and lattice differ"))?;
            let vhat = s.scaled_hat(p)?;
            let chi = ball_hat(ell, p);
            let vw = n
                * 4.0
                * PI
                * integrate_pieces(
                    |r| r * r * s.value(r) * (1.0 - sol.value(r)) * sinc(p * r),
                    &breaks,
                    &kernel_quad(s.support_radius().powi(3) * s.prefactor()),
                )?;
            // (1/N) Σ_{q∈Λ*} V̂ η = −(V_N w)^;  Σ_{q∈Λ*} χ̂ η = −N ŵ = η_p
            let lhs = sh.p2() * eta + 0.5 * vhat - 0.5 * vw;
            let rhs = n * lambda * chi + lambda * eta;
            let with = lhs - rhs;
            let without = (lhs - 0.5 * vhat * eta0 / n) - (rhs - lambda * chi * eta0);
            Ok((with, without))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScatteringResidual {
        n2: shells.iter().map(|s| s.n2).collect(),
        with_zero_mode: rows.iter().map(|r| r.0).collect(),
        without_zero_mode: rows.iter().map(|r| r.1).collect(),
    })
}

/// Residual with the convolutions truncated to the lattice cutoff, at one
/// representative momentum per shell up to `|n|² ≤ max_n2`.
pub fn scattering_residual_truncated(
    kern: &CorrelationKernel,
    s: &ScaledPotential,
    sol: &ScatteringSolution,
    lattice: &MomentumLattice,
    max_n2: u64,
) -> Result<ScatteringResidual> {
    let n = s.n_f64();
    let lambda = sol.lambda;
    let ell = sol.ell;
    let eta0 = kern.eta_zero;
    let points = lattice.points();
    let etas: Vec<f64> = points
        .iter()
        .map(|q| kern.at(*q).ok_or_else(|| Error::config("kernel and lattice differ")))
        .collect::<Result<_>>()?;
    let mut hat_cache: HashMap<u64, f64> = HashMap::new();
    let shells: Vec<Shell> = lattice.shells().iter().copied().filter(|sh| sh.n2 <= max_n2).collect();
    let reps: Vec<[i64; 3]> = shells.iter().map(|sh| shell_representative(sh.n2)).collect();
    // V̂ and χ̂ on every |p − q|² that occurs
    let mut needed: Vec<u64> = Vec::new();
    for r in &reps {
        for q in &points {
            needed.push(lattice::norm2([r[0] - q[0], r[1] - q[1], r[2] - q[2]]));
        }
        needed.push(lattice::norm2(*r));
    }
    needed.sort_unstable();
    needed.dedup();
    let values: Vec<(f64, f64)> = needed
        .par_iter()
        .map(|&m| {
            let p = TWO_PI * (m as f64).sqrt();
            s.scaled_hat(p).map(|v| (v, ball_hat(ell, p)))
        })
        .collect::<Result<_>>()?;
    let mut chi_cache: HashMap<u64, f64> = HashMap::new();
    for (m, (v, c)) in needed.iter().zip(values) {
        hat_cache.insert(*m, v);
        chi_cache.insert(*m, c);
    }
    let rows: Vec<(f64, f64)> = shells
        .par_iter()
        .zip(&reps)
        .map(|(sh, r)| {
            let mut conv_v = 0.0;
            let mut conv_chi = 0.0;
            for (q, eta_q) in points.iter().zip(&etas) {
                let d = lattice::norm2([r[0] - q[0], r[1] - q[1], r[2] - q[2]]);
                conv_v += hat_cache[&d] * eta_q;
                conv_chi += chi_cache[&d] * eta_q;
            }
            let eta = kern.at_n2(sh.n2).unwrap();
            let vhat = hat_cache[&sh.n2];
            let chi = chi_cache[&sh.n2];
            let lhs = sh.p2() * eta + 0.5 * vhat + conv_v / (2.0 * n);
            let rhs = n * lambda * chi + lambda * conv_chi;
            let without = lhs - rhs;
            let with = (lhs + vhat * eta0 / (2.0 * n)) - (rhs + lambda * chi * eta0);
            (with, without)
        })
        .collect();
    Ok(ScatteringResidual {
        n2: shells.iter().map(|s| s.n2).collect(),
        with_zero_mode: rows.iter().map(|r| r.0).collect(),
        without_zero_mode: rows.iter().map(|r| r.1).collect(),
    })
}

/// Some `n ∈ Z³` with `|n|² = n2` (which must be a sum of three squares).
fn shell_representative(n2: u64) -> [i64; 3] {
    let m = (n2 as f64).sqrt() as i64 + 1;
    for x in 0..=m {
        for y in 0..=x {
            let rest = n2 as i64 - x * x - y * y;
            if rest < 0 {
                break;
            }
            let z = (rest as f64).sqrt().round() as i64;
            if z * z == rest {
                return [x, y, z];
            }
        }
    }
    unreachable!("{n2} is not a sum of three squares")
}

/// Which bound to assemble.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundRegime {
    Beta { potential: RadialPotential, beta: f64, particles: u64 },
    Gp { scattering_length: f64, particles: u64 },
    HardCore { scattering_length: f64, particles: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssembleConfig {
    /// Euclidean cutoff for the Bogoliubov correction sum.
    pub correction_cutoff: f64,
    pub e_lambda_m_max: u32,
    pub e_lambda_acceleration: Acceleration,
    pub born: BornConfig,
    /// Euclidean cutoff for the Born sums (default `16 N^β / R_V`).
    pub born_cutoff: Option<f64>,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        Self {
            correction_cutoff: 400.0 * PI,
            e_lambda_m_max: 128,
            e_lambda_acceleration: Acceleration::CesaroAverage,
            born: BornConfig::default(),
            born_cutoff: None,
        }
    }
}

/// Remainder terms of the bounds, whose constants are not known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Remainder {
    pub form: String,
    pub constant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub regime: String,
    pub particles: u64,
    pub leading: f64,
    pub finite_size: f64,
    pub correction: f64,
    pub total: f64,
    /// `8π𝔞` (GP, hard core) or `8π𝔞_N^{(β)}` (β regime).
    pub eight_pi_a: f64,
    /// Parameter `A` of the correction sum.
    pub correction_parameter: f64,
    pub e_lambda: Option<f64>,
    pub constant_check: Option<f64>,
    pub correction_sum: SumResult,
    pub born: Option<BornSeries>,
    pub remainder: Remainder,
    pub diagnostics: BTreeMap<String, f64>,
}

static E_LAMBDA_CACHE: Mutex<Vec<((u32, Acceleration), f64)>> = Mutex::new(Vec::new());

/// `e_Λ`, memoized per `(M_max, acceleration)`.
pub fn cached_e_lambda(m_max: u32, acc: Acceleration) -> Result<f64> {
    if let Some(v) = E_LAMBDA_CACHE.lock().unwrap().iter().find(|(k, _)| *k == (m_max, acc)).map(|(_, v)| *v) {
        return Ok(v);
    }
    let v = lattice::e_lambda(m_max, acc)?.e_lambda;
    E_LAMBDA_CACHE.lock().unwrap().push(((m_max, acc), v));
    Ok(v)
}

/// Assemble the upper bound of the requested regime. Remainders are not
/// included in `total`.
pub fn assemble_bound(regime: &BoundRegime, cfg: &AssembleConfig) -> Result<EnergyBreakdown> {
    let corr_lattice = MomentumLattice::euclidean(cfg.correction_cutoff)?;
    match regime {
        BoundRegime::Beta { potential, beta, particles: n } => {
            let s = ScaledPotential::new(potential.clone(), *n, *beta)?;
            born::m_beta(*beta)?;
            let blat = match cfg.born_cutoff {
                Some(k) => MomentumLattice::euclidean(k)?,
                None => born::default_lattice(&s)?,
            };
            let series = born::born_scattering_length(&s, &blat, &cfg.born)?;
            let v0 = potential.fourier_hat(0.0)?;
            let sum = lattice::bogoliubov_correction_sum(v0, &corr_lattice)?;
            let leading = 0.5 * series.total * (*n as f64 - 1.0);
            let finite_size = 0.0;
            let correction = -0.5 * sum.extrapolated;
            let mut diagnostics = BTreeMap::new();
            diagnostics.insert("born_std_error".into(), series.total_std_error);
            diagnostics.insert("m_beta".into(), series.m_beta as f64);
            Ok(EnergyBreakdown {
                regime: "beta".into(),
                particles: *n,
                leading,
                finite_size,
                correction,
                total: leading + finite_size + correction,
                eight_pi_a: series.total,
                correction_parameter: v0,
                e_lambda: None,
                constant_check: None,
                correction_sum: sum,
                born: Some(series),
                remainder: Remainder {
                    form: "C N^(-alpha)".into(),
                    constant: "unknown".into(),
                },
                diagnostics,
            })
        }
        BoundRegime::Gp { scattering_length: a, particles: n } | BoundRegime::HardCore { scattering_length: a, particles: n } => {
            if !(*a >= 0.0 && a.is_finite()) {
                return Err(Error::domain(format!("scattering length must be >= 0, got {a}")));
            }
            if *n < 2 {
                return Err(Error::domain(format!("particle number must be >= 2, got {n}")));
            }
            let (tag, remainder) = match regime {
                BoundRegime::Gp { .. } => ("gp", "C N^(-1/4)"),
                _ => ("hc", "C N^(-epsilon)"),
            };
            let eight_pi_a = 8.0 * PI * a;
            let e_lambda = cached_e_lambda(cfg.e_lambda_m_max, cfg.e_lambda_acceleration)?;
            let sum = lattice::bogoliubov_correction_sum(eight_pi_a, &corr_lattice)?;
            let leading = 4.0 * PI * a * (*n as f64 - 1.0);
            let finite_size = e_lambda * a * a;
            let correction = -0.5 * sum.extrapolated;
            Ok(EnergyBreakdown {
                regime: tag.into(),
                particles: *n,
                leading,
                finite_size,
                correction,
                total: leading + finite_size + correction,
                eight_pi_a,
                correction_parameter: eight_pi_a,
                e_lambda: Some(e_lambda),
                constant_check: None,
                correction_sum: sum,
                born: None,
                remainder: Remainder {
                    form: remainder.into(),
                    constant: "unknown".into(),
                },
                diagnostics: BTreeMap::new(),
            })
        }
    }
}

/// Pieces of the constants identity relating `C_N^{(β)}` to the Born series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsIdentity {
    pub c_n: f64,
    pub ground_energy: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub born_std_error: f64,
}

/// Evaluate `C_N + ½Σ(−F + √(F²−G²))` against
/// `4π(N−1)𝔞_N − ½Σ[p² + V̂(0) − √(p⁴ + 2p²V̂(0)) − V̂(0)²/(2p²)]`.
pub fn constants_identity(
    s: &ScaledPotential,
    ell: f64,
    kernel_lattice: &MomentumLattice,
    born_lattice: &MomentumLattice,
    correction_lattice: &MomentumLattice,
    born_cfg: &BornConfig,
) -> Result<ConstantsIdentity> {
    let sol = scattering::solve_soft_neumann(s, ell)?;
    let kern = correlation_kernel(&sol, kernel_lattice, s.particles)?;
    let kernels = kernels_beta(s, &sol, &kern, kernel_lattice)?;
    let c_n = constant_c_n_beta(s, &kernels)?;
    let ground = quadratic_ground_energy(&kernels);
    let series = born::born_scattering_length(s, born_lattice, born_cfg)?;
    let v0 = s.base.fourier_hat(0.0)?;
    let corr = lattice::bogoliubov_correction_sum(v0, correction_lattice)?;
    let lhs = c_n + ground;
    let rhs = 0.5 * (s.n_f64() - 1.0) * series.total - 0.5 * corr.extrapolated;
    Ok(ConstantsIdentity {
        c_n,
        ground_energy: ground,
        lhs,
        rhs,
        residual: lhs - rhs,
        born_std_error: 0.5 * (s.n_f64() - 1.0) * series.total_std_error,
    })
}

/// Expectations of a trial state needed by the lower-bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    /// `⟨Q_N^eff⟩`.
    pub quadratic: f64,
    /// `⟨N₊⟩`.
    pub n_plus: f64,
    /// `⟨P^{(2+κ)} (N₊ + 1)⟩`.
    pub p_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCheck {
    pub pass: bool,
    pub fitted_c: f64,
    /// `C_N^eff + ⟨Q⟩ − (4π𝔞N − C(⟨N₊⟩+1) − C N^{−κ} ⟨P(N₊+1)⟩)` per state.
    pub margins: Vec<f64>,
}

/// Check `C_N^eff + ⟨Q⟩ ≥ 4π𝔞N − C(⟨N₊⟩+1) − C N^{−κ}⟨P^{(2+κ)}(N₊+1)⟩`
/// with the smallest `C ≥ 0` that works for every state; passes when that
/// `C` does not exceed `c_max`.
pub fn lower_bound_sanity(
    c_eff: f64,
    a: f64,
    n: u64,
    kappa: f64,
    states: &[StateDiagnostics],
    c_max: f64,
) -> LowerBoundCheck {
    let nf = n as f64;
    let target = 4.0 * PI * a * nf;
    let weight = |s: &StateDiagnostics| (s.n_plus + 1.0) + s.p_moment / nf.powf(kappa);
    let fitted_c = states
        .iter()
        .map(|s| (target - c_eff - s.quadratic) / weight(s))
        .fold(0.0, f64::max);
    let margins: Vec<f64> = states
        .iter()
        .map(|s| c_eff + s.quadratic - (target - fitted_c * weight(s)))
        .collect();
    LowerBoundCheck {
        pass: fitted_c.is_finite() && fitted_c <= c_max && margins.iter().all(|m| *m >= -1e-9 * target.abs().max(1.0)),
        fitted_c,
        margins,
    }
}

/// Vacuum plus single excitations `a*_p Ω` on the first `count` shells.
pub fn single_excitation_states(kernels: &KernelSet, kappa: f64, count: usize) -> Vec<StateDiagnostics> {
    let mut out = vec![StateDiagnostics {
        quadratic: 0.0,
        n_plus: 0.0,
        p_moment: 0.0,
    }];
    out.extend(kernels.points.iter().take(count).map(|k| StateDiagnostics {
        quadratic: k.diagonal,
        n_plus: 1.0,
        p_moment: 2.0 * k.p2.sqrt().powf(2.0 + kappa),
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soft_setup(n: u64, beta: f64, ell: f64) -> (ScaledPotential, ScatteringSolution) {
        let s = ScaledPotential::new(RadialPotential::soft_sphere(1.0, 1.0).unwrap(), n, beta).unwrap();
        let sol = scattering::solve_soft_neumann(&s, ell).unwrap();
        (s, sol)
    }

    #[test]
    fn free_case_kernels() {
        let s = ScaledPotential::new(RadialPotential::zero(), 100, 0.5).unwrap();
        let sol = scattering::solve_soft_neumann(&s, 0.3).unwrap();
        let lat = MomentumLattice::euclidean(8.0 * TWO_PI).unwrap();
        let kern = correlation_kernel(&sol, &lat, 100).unwrap();
        let ks = kernels_beta(&s, &sol, &kern, &lat).unwrap();
        for k in &ks.points {
            assert_eq!(k.diagonal, k.p2);
            assert_eq!(k.pairing, 0.0);
            assert_eq!(k.tau, 0.0);
            assert_eq!(k.dispersion, k.p2);
        }
        assert_eq!(quadratic_ground_energy(&ks), 0.0);
        assert_eq!(constant_c_n_beta(&s, &ks).unwrap(), 0.0);
    }

    #[test]
    fn hyperbolic_identity_and_tau_rotation() {
        let (s, sol) = soft_setup(1000, 0.5, 0.25);
        let lat = MomentumLattice::euclidean(10.0 * TWO_PI).unwrap();
        let kern = correlation_kernel(&sol, &lat, 1000).unwrap();
        let ks = kernels_beta(&s, &sol, &kern, &lat).unwrap();
        for k in &ks.points {
            assert!((k.gamma * k.gamma - k.sigma * k.sigma - 1.0).abs() < 1e-12);
            assert!(k.diagonal > 0.0 && k.pairing.abs() < k.diagonal);
            // the Bogoliubov rotation by τ removes the pairing term
            let t = 2.0 * k.tau;
            let g_rot = k.pairing * t.cosh() + k.diagonal * t.sinh();
            assert!(g_rot.abs() <= 1e-10 * k.diagonal, "p2 = {}: {g_rot}", k.p2);
        }
        assert!(ks.tau_decay_constant().is_finite());
    }

    #[test]
    fn mode_energy_closed_form() {
        assert!((2.0 * mode_ground_energy(5.0, 3.0).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(mode_ground_energy(5.0, 0.0).unwrap(), 0.0);
        assert!(matches!(mode_ground_energy(1.0, 1.0), Err(Error::KernelDomain { .. })));
    }

    #[test]
    fn shell_representatives() {
        for n2 in [1u64, 2, 3, 4, 5, 6, 9, 29, 50] {
            assert_eq!(lattice::norm2(shell_representative(n2)), n2);
        }
    }

    #[test]
    fn gp_and_hard_core_totals_agree() {
        let cfg = AssembleConfig {
            e_lambda_m_max: 64,
            correction_cutoff: 40.0 * PI,
            ..AssembleConfig::default()
        };
        let gp = assemble_bound(&BoundRegime::Gp { scattering_length: 1.0, particles: 10_000 }, &cfg).unwrap();
        let hc = assemble_bound(&BoundRegime::HardCore { scattering_length: 1.0, particles: 10_000 }, &cfg).unwrap();
        assert_eq!(gp.total, hc.total);
        assert_eq!(hc.total, hc.leading + hc.finite_size + hc.correction);
        let ratio = hc.total / (4.0 * PI * 9999.0);
        assert!((ratio - 1.0).abs() < 1e-2);
    }

    #[test]
    fn lower_bound_free_case() {
        let states = [StateDiagnostics {
            quadratic: 0.0,
            n_plus: 0.0,
            p_moment: 0.0,
        }];
        let check = lower_bound_sanity(0.0, 0.0, 100, 0.04, &states, 0.0);
        assert!(check.pass);
        assert_eq!(check.fitted_c, 0.0);
    }

    #[test]
    fn scattering_residual_vanishes_for_free_case() {
        let s = ScaledPotential::new(RadialPotential::zero(), 100, 0.5).unwrap();
        let sol = scattering::solve_soft_neumann(&s, 0.3).unwrap();
        let lat = MomentumLattice::euclidean(6.0 * TWO_PI).unwrap();
        let kern = correlation_kernel(&sol, &lat, 100).unwrap();
        let res = scattering_residual(&kern, &s, &sol, &lat).unwrap();
        assert_eq!(res.max_abs(true), 0.0);
        assert_eq!(res.max_abs(false), 0.0);
    }

    #[test]
    fn scattering_equation_holds_in_fourier_space() {
        let (s, sol) = soft_setup(1000, 0.5, 0.25);
        let lat = MomentumLattice::euclidean(12.0 * TWO_PI).unwrap();
        let kern = correlation_kernel(&sol, &lat, 1000).unwrap();
        let res = scattering_residual(&kern, &s, &sol, &lat).unwrap();
        // against the size of the individual terms, ½V̂ ≈ 2
        assert!(res.max_abs(true) < 1e-6, "{}", res.max_abs(true));
        // dropping q = 0 leaves (1/2N)V̂η_0 − λχ̂η_0, which is not zero
        assert!(res.max_abs(false) > 1e3 * res.max_abs(true));
    }

    #[test]
    fn truncated_residual_improves_with_cutoff() {
        let (s, sol) = soft_setup(100, 0.5, 0.4);
        let coarse = MomentumLattice::euclidean(6.0 * TWO_PI).unwrap();
        let fine = MomentumLattice::euclidean(12.0 * TWO_PI).unwrap();
        let r = |lat: &MomentumLattice| {
            let kern = correlation_kernel(&sol, lat, 100).unwrap();
            scattering_residual_truncated(&kern, &s, &sol, lat, 9).unwrap().max_abs(true)
        };
        let (a, b) = (r(&coarse), r(&fine));
        assert!(b <= 0.5 * a, "{a} -> {b}");
    }

    #[test]
    fn indicator_transform_at_zero() {
        let ell = 0.3;
        assert!((ball_hat(ell, 0.0) - 4.0 * PI * ell.powi(3) / 3.0).abs() < 1e-16);
    }

    #[test]
    fn real_space_convolution_matches_lattice_sum() {
        // (1/N) Σ_{q≠0} V̂(p−q) η_q against the truncated direct sum
        let (s, sol) = soft_setup(100, 0.5, 0.4);
        let w0 = sol.deviation_hat(0.0).unwrap();
        let model = Model::Beta {
            s: &s,
            sol: &sol,
            w0,
            breaks: merge_breaks(&s.breakpoints(), &sol.breakpoints(), s.support_radius()),
        };
        let n = s.n_f64();
        let e = model.eval(TWO_PI, FOUR_PI_SQ_TEST, false).unwrap();
        let vhat = s.scaled_hat(TWO_PI).unwrap();
        let conv_exact = e.g - 2.0 * FOUR_PI_SQ_TEST * e.sigma * e.gamma - vhat * (e.sigma + e.gamma).powi(2);
        let lat = MomentumLattice::euclidean(24.0 * TWO_PI).unwrap();
        let kern = correlation_kernel(&sol, &lat, 100).unwrap();
        let mut direct = 0.0;
        for q in lat.points() {
            let d = lattice::norm2([1 - q[0], -q[1], -q[2]]);
            direct += s.scaled_hat(TWO_PI * (d as f64).sqrt()).unwrap() * kern.at(q).unwrap();
        }
        direct /= n;
        assert!((direct - conv_exact).abs() < 2e-3 * conv_exact.abs(), "{direct} vs {conv_exact}");
    }

    const FOUR_PI_SQ_TEST: f64 = 4.0 * PI * PI;

    #[test]
    fn large_n_dispersion_limit() {
        // F² − G² → p⁴ + 2p²V̂(0) at the first shell
        let v = RadialPotential::soft_sphere(1.0, 1.0).unwrap();
        let v0 = v.fourier_hat(0.0).unwrap();
        let lat = MomentumLattice::euclidean(2.0 * TWO_PI).unwrap();
        let mut devs = Vec::new();
        for n in [1_000u64, 10_000, 100_000] {
            let s = ScaledPotential::new(v.clone(), n, 0.5).unwrap();
            let sol = scattering::solve_soft_neumann(&s, default_ell(n, 0.5)).unwrap();
            let kern = correlation_kernel(&sol, &lat, n).unwrap();
            let ks = kernels_beta(&s, &sol, &kern, &lat).unwrap();
            let k = &ks.points[0];
            let target = k.p2 * k.p2 + 2.0 * k.p2 * v0;
            devs.push(((k.dispersion.powi(2) - target) / target).abs());
        }
        assert!(devs[2] < devs[1] && devs[1] < devs[0], "{devs:?}");
        assert!(devs[1] < 10.0 * 1e4f64.powf(-0.5), "{devs:?}");
    }

    #[test]
    fn c_n_beta_leading_term_dominates() {
        let v = RadialPotential::soft_sphere(1.0, 1.0).unwrap();
        let v0 = v.fourier_hat(0.0).unwrap();
        let lat = MomentumLattice::euclidean(10.0 * TWO_PI).unwrap();
        let mut ratios = Vec::new();
        for n in [1_000u64, 100_000] {
            let s = ScaledPotential::new(v.clone(), n, 0.5).unwrap();
            let sol = scattering::solve_soft_neumann(&s, default_ell(n, 0.5)).unwrap();
            let kern = correlation_kernel(&sol, &lat, n).unwrap();
            let ks = kernels_beta(&s, &sol, &kern, &lat).unwrap();
            ratios.push(constant_c_n_beta(&s, &ks).unwrap() / (0.5 * n as f64 * v0));
        }
        assert!((ratios[1] - 1.0).abs() < (ratios[0] - 1.0).abs(), "{ratios:?}");
        assert!((ratios[1] - 1.0).abs() < 0.05, "{ratios:?}");
    }

    #[test]
    fn effective_potential_mass_near_eight_pi_a() {
        let lat = MomentumLattice::euclidean(4.0 * TWO_PI).unwrap();
        // a/(Nℓ) = 10⁻² here
        let (_, data) = kernels_eff(1.0, 10_000, 1e-2, 0.1, &lat).unwrap();
        let ratio = data.v_ell_hat_zero / (8.0 * PI);
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
        assert!(data.v_ell_hat_zero > 0.0);
        // the ratio approaches 1 as a/(Nℓ) = N^{−ν} shrinks
        let r = |n: u64| {
            let (_, d) = kernels_eff(1.0, n, ell_from_nu(n, 0.1), 0.1, &lat).unwrap();
            d.v_ell_hat_zero / (8.0 * PI)
        };
        let (r3, r5) = (r(1_000), r(100_000));
        assert!(r5 - 1.0 < r3 - 1.0 && r5 > 1.0, "{r3} {r5}");
    }

    #[test]
    fn effective_kernels_are_valid() {
        let lat = MomentumLattice::euclidean(DEFAULT_KERNEL_CUTOFF).unwrap();
        let n = 10_000;
        let (ks, data) = kernels_eff(1.0, n, ell_from_nu(n, 0.5), 0.1, &lat).unwrap();
        for k in &ks.points {
            assert!((k.gamma * k.gamma - k.sigma * k.sigma - 1.0).abs() < 1e-12);
            assert!(k.diagonal > 0.0 && k.pairing.abs() < k.diagonal && k.dispersion > 0.0);
            assert!(k.eta.abs() * k.p2 < 8.0 * PI);
        }
        assert!(ks.tau_decay_constant() < 1e5);
        assert_eq!(data.n2.len(), ks.points.len());
        assert!(data.u_hat.iter().all(|u| u.is_finite()));
        assert!(quadratic_ground_energy(&ks) < 0.0);
        assert!(matches!(ks.regime, KernelRegime::EffectiveHc { nu, .. } if (nu - 0.5).abs() < 1e-12));
    }

    #[test]
    fn effective_constant_offset_is_n_independent() {
        let lat = MomentumLattice::euclidean(DEFAULT_KERNEL_CUTOFF).unwrap();
        let offsets: Vec<f64> = [1_000u64, 10_000, 100_000]
            .iter()
            .map(|&n| {
                let (ks, data) = kernels_eff(1.0, n, ell_from_nu(n, 0.5), 0.1, &lat).unwrap();
                let c = constant_c_n_eff(&ks, &data).unwrap();
                assert!((c / (0.5 * (n - 1) as f64 * data.v_ell_hat_zero) - 1.0).abs() < 0.05);
                c - 4.0 * PI * n as f64
            })
            .collect();
        let fitted = offsets.iter().copied().fold(f64::MIN, f64::max);
        let spread = offsets.iter().copied().fold(f64::MIN, f64::max) - offsets.iter().copied().fold(f64::MAX, f64::min);
        assert!(fitted > 0.0 && spread < 0.1 * fitted, "{offsets:?}");
    }

    #[test]
    fn effective_rejects_bad_ordering() {
        let lat = MomentumLattice::euclidean(4.0 * TWO_PI).unwrap();
        assert!(matches!(kernels_eff(1.0, 100, 0.2, 0.1, &lat), Err(Error::Domain(_))));
        assert!(matches!(kernels_eff(1.0, 100, 0.005, 0.1, &lat), Err(Error::Domain(_))));
        assert!(matches!(kernels_eff(1.0, 100, 0.05, 0.6, &lat), Err(Error::Domain(_))));
    }

    #[test]
    fn lower_bound_on_single_excitations() {
        let lat = MomentumLattice::euclidean(10.0 * TWO_PI).unwrap();
        let n = 1_000;
        let (ks, data) = kernels_eff(1.0, n, ell_from_nu(n, 0.5), 0.1, &lat).unwrap();
        let c = constant_c_n_eff(&ks, &data).unwrap();
        let states = single_excitation_states(&ks, 0.04, 10);
        let check = lower_bound_sanity(c, 1.0, n, 0.04, &states, 1e3);
        assert!(check.pass, "{check:?}");
        // margins grow with the excitation momentum
        assert!(check.margins[10] > check.margins[1]);
    }
}
