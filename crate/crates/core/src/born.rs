//! Truncated Born series for `N` times `8π` times the scattering length of
//! `N^{3β−1} V(N^β ·)`, written as lattice sums over `Λ*₊`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{continuum_tail, norm2, Cutoff, MomentumLattice, FOUR_PI_SQ, TWO_PI};
use crate::potential::ScaledPotential;
use crate::quadrature::QuadConfig;

/// Highest order that can be requested.
pub const MAX_ORDER: u32 = 6;

/// Largest integer `m` with `m ≤ 1/(1−β) + min(1/2, β/(1−β))`.
pub fn m_beta(beta: f64) -> Result<u32> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    let bound = 1.0 / (1.0 - beta) + (0.5f64).min(beta / (1.0 - beta));
    // a bound that is an integer up to rounding counts as that integer
    Ok((bound + 1e-12).floor() as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub samples: u64,
    pub seed: u64,
    /// Independent RNG streams; fixed so results do not depend on threads.
    pub streams: u32,
    /// Absolute standard-error target; sampling doubles until it is met.
    pub std_target: Option<f64>,
    pub max_samples: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            samples: 4_000_000,
            seed: 0x00c0_ffee,
            streams: 64,
            std_target: None,
            max_samples: 256_000_000,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if let Some(t) = self.std_target {
            if !(t > 0.0) {
                return Err(Error::config(format!("std_target must be positive, got {t}")));
            }
        }
        if self.samples == 0 || self.streams == 0 {
            return Err(Error::config("samples and streams must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BornTerm {
    pub order: u32,
    pub value: f64,
    pub std_error: f64,
    /// Monte-Carlo samples used (0 for deterministic orders).
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct BornConfig {
    pub sampler: SamplerConfig,
    /// Evaluate up to this order instead of `m_β`.
    pub force_order: Option<u32>,
    /// Also estimate the first order beyond the truncation.
    pub estimate_next: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornSeries {
    pub beta: f64,
    pub particles: u64,
    pub m_beta: u32,
    pub terms: Vec<BornTerm>,
    pub total: f64,
    pub total_std_error: f64,
    pub cutoff: Cutoff,
    pub seed: u64,
    pub next_order: Option<BornTerm>,
}

/// A Euclidean cutoff `K = 16 N^β`, where `V̂(p/N^β)` has decayed.
pub fn default_lattice(s: &ScaledPotential) -> Result<MomentumLattice> {
    let k = (16.0 * s.scale() / s.base.support_radius()).max(4.0 * TWO_PI);
    MomentumLattice::euclidean(k)
}

fn hat_at(s: &ScaledPotential, n2: u64) -> Result<f64> {
    s.scaled_hat(TWO_PI * (n2 as f64).sqrt())
}

/// `k`-th order of the series.
///
/// `k = 0` is `V̂(0)`; `k = 1` is summed shell by shell with a continuum
/// tail; `k ≥ 2` is estimated by sampling the `k` lattice momenta
/// independently with probability `∝ 1/p²` inside the cutoff.
pub fn born_term(k: u32, s: &ScaledPotential, lattice: &MomentumLattice, cfg: &SamplerConfig) -> Result<BornTerm> {
    if k > MAX_ORDER {
        return Err(Error::Unsupported(format!("Born order {k} exceeds {MAX_ORDER}")));
    }
    cfg.validate()?;
    if k == 0 {
        return Ok(BornTerm {
            order: k,
            value: s.base.fourier_hat(0.0)?,
            std_error: 0.0,
            samples: 0,
        });
    }
    if s.base.is_zero() {
        s.base.fourier_hat(0.0)?;
        return Ok(BornTerm {
            order: k,
            value: 0.0,
            std_error: 0.0,
            samples: 0,
        });
    }
    if k == 1 {
        return first_order(s, lattice);
    }
    sampled_order(k, s, lattice, cfg)
}

fn first_order(s: &ScaledPotential, lattice: &MomentumLattice) -> Result<BornTerm> {
    let shells = lattice.shells();
    let parts: Vec<f64> = shells
        .par_iter()
        .map(|sh| hat_at(s, sh.n2).map(|v| sh.count as f64 * v * v / sh.p2()))
        .collect::<Result<_>>()?;
    let mut sum = crate::quadrature::kahan_sum(parts);
    if let Cutoff::Euclidean(kc) = lattice.cutoff() {
        let cfg = QuadConfig {
            abs_tol: 1e-14 * s.base.fourier_hat(0.0)?.powi(2) * s.scale(),
            rel_tol: 1e-12,
            max_intervals: 50_000,
        };
        // V̂ is cheap for closed forms; errors from quadrature-backed
        // transforms surface as NaN and are rejected below
        let tail = continuum_tail(|p| s.scaled_hat(p).map(|v| v * v / (p * p)).unwrap_or(f64::NAN), kc, &cfg)?;
        if !tail.is_finite() {
            return Err(Error::NumericalFailure {
                message: "first-order continuum tail".into(),
                residual: f64::NAN,
            });
        }
        sum += tail;
    }
    Ok(BornTerm {
        order: 1,
        value: -sum / (2.0 * s.n_f64()),
        std_error: 0.0,
        samples: 0,
    })
}

/// Exact sampler for `n ∈ Z³ \ {0}` inside a cutoff with `P(n) ∝ 1/|n|²`.
///
/// An annulus `4^j ≤ |n|² < 4^{j+1}` is picked with its exact weight, then a
/// point inside it by rejection from the bounding cube.
struct InverseSquareSampler<'a> {
    lattice: &'a MomentumLattice,
    /// Cumulative annulus weights, normalized to 1.
    cumulative: Vec<f64>,
    /// `Σ 1/p²` over the cutoff.
    z: f64,
    max_n2: u64,
    box_half: i64,
}

impl<'a> InverseSquareSampler<'a> {
    fn new(lattice: &'a MomentumLattice) -> Self {
        let max_n2 = lattice.max_n2();
        let mut weights: Vec<f64> = Vec::new();
        for sh in lattice.shells().iter() {
            let j = (63 - sh.n2.leading_zeros()) as usize / 2;
            if weights.len() <= j {
                weights.resize(j + 1, 0.0);
            }
            weights[j] += sh.count as f64 / sh.p2();
        }
        let z: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / z;
                acc
            })
            .collect();
        Self {
            lattice,
            cumulative,
            z,
            max_n2,
            box_half: (max_n2 as f64).sqrt().floor() as i64,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> [i64; 3] {
        let u: f64 = rng.gen();
        let j = self.cumulative.partition_point(|&c| c < u).min(self.cumulative.len() - 1);
        let lo = 1u64 << (2 * j);
        let hi = (lo << 2) - 1;
        let h = ((hi.min(self.max_n2) as f64).sqrt().floor() as i64).min(self.box_half).max(1);
        loop {
            let n = [rng.gen_range(-h..=h), rng.gen_range(-h..=h), rng.gen_range(-h..=h)];
            let n2 = norm2(n);
            if n2 < lo || n2 > hi || !self.lattice.contains(n) {
                continue;
            }
            if rng.gen::<f64>() * n2 as f64 <= lo as f64 {
                return n;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.count == 0 {
            return o;
        }
        if o.count == 0 {
            return self;
        }
        let n = (self.count + o.count) as f64;
        let d = o.mean - self.mean;
        Moments {
            count: self.count + o.count,
            mean: self.mean + d * o.count as f64 / n,
            m2: self.m2 + o.m2 + d * d * self.count as f64 * o.count as f64 / n,
        }
    }

    fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

fn sampled_order(k: u32, s: &ScaledPotential, lattice: &MomentumLattice, cfg: &SamplerConfig) -> Result<BornTerm> {
    let sampler = InverseSquareSampler::new(lattice);
    // surface transform errors once, before the hot loop
    s.scaled_hat(0.0)?;
    let hat = |n2: u64| hat_at(s, n2).unwrap_or(f64::NAN);
    let k = k as usize;
    let run_batch = |batch: u64, per_stream: u64| -> Moments {
        (0..cfg.streams)
            .into_par_iter()
            .map(|stream| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(batch * cfg.streams as u64 + stream as u64);
                let mut m = Moments::default();
                let mut pts = vec![[0i64; 3]; k];
                for _ in 0..per_stream {
                    for p in pts.iter_mut() {
                        *p = sampler.sample(&mut rng);
                    }
                    let mut prod = hat(norm2(pts[0])) * hat(norm2(pts[k - 1]));
                    for w in pts.windows(2) {
                        prod *= hat(norm2([w[0][0] - w[1][0], w[0][1] - w[1][1], w[0][2] - w[1][2]]));
                    }
                    m.push(prod);
                }
                m
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Moments::default(), Moments::merge)
    };

    let scale = sampler.z.powi(k as i32) * if k.is_multiple_of(2) { 1.0 } else { -1.0 } / (2.0 * s.n_f64()).powi(k as i32);
    let per_stream = cfg.samples.div_ceil(cfg.streams as u64);
    let mut moments = run_batch(0, per_stream);
    let mut batch = 1;
    if let Some(target) = cfg.std_target {
        while moments.std_error() * scale.abs() > target && moments.count < cfg.max_samples {
            // double the sample count with fresh streams
            let extra = moments.count.div_ceil(cfg.streams as u64);
            moments = moments.merge(run_batch(batch, extra));
            batch += 1;
        }
    }
    if !moments.mean.is_finite() {
        return Err(Error::NumericalFailure {
            message: format!("Born order {k} estimate is not finite"),
            residual: f64::NAN,
        });
    }
    Ok(BornTerm {
        order: k as u32,
        value: scale * moments.mean,
        std_error: scale.abs() * moments.std_error(),
        samples: moments.count,
    })
}

/// `8π𝔞_N^{(β)} = Σ_{k=0}^{m_β} terms[k]`.
pub fn born_scattering_length(s: &ScaledPotential, lattice: &MomentumLattice, cfg: &BornConfig) -> Result<BornSeries> {
    let m = m_beta(s.beta)?;
    let top = match cfg.force_order {
        Some(o) => {
            if o > m {
                log::warn!("Born order {o} exceeds m_beta = {m}; the truncation argument no longer applies");
            }
            o
        }
        None => m,
    };
    let terms = (0..=top).map(|k| born_term(k, s, lattice, &cfg.sampler)).collect::<Result<Vec<_>>>()?;
    let total = crate::quadrature::kahan_sum(terms.iter().map(|t| t.value));
    let total_std_error = terms.iter().map(|t| t.std_error * t.std_error).sum::<f64>().sqrt();
    let next_order = if cfg.estimate_next && top < MAX_ORDER {
        Some(born_term(top + 1, s, lattice, &cfg.sampler)?)
    } else {
        None
    };
    Ok(BornSeries {
        beta: s.beta,
        particles: s.particles,
        m_beta: m,
        terms,
        total,
        total_std_error,
        cutoff: lattice.cutoff(),
        seed: cfg.sampler.seed,
        next_order,
    })
}

/// `Σ_{p∈Λ*₊} 1/p²` inside the cutoff (normalization of the sampler).
pub fn inverse_square_mass(lattice: &MomentumLattice) -> f64 {
    lattice.shells().iter().map(|s| s.count as f64 / (FOUR_PI_SQ * s.n2 as f64)).sum()
}
