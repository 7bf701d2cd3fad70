//! Variational Monte Carlo for the pair-product trial state
//! `Π_{i<j} f_ℓ(x_i − x_j)` of hard-core bosons on the unit torus.

use std::f64::consts::PI;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, QuadConfig};
use crate::scattering::{solve_hard_core, HardCoreParams, ScatteringSolution};

/// Attempts allowed when placing particles at random.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;
/// Fraction of the core radius inside which `f'/f` is clamped.
pub const CORE_CLAMP: f64 = 1e-12;

/// Minimum-image displacement on the unit torus.
pub fn torus_delta(x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    let mut d = [0.0; 3];
    for k in 0..3 {
        let t = x[k] - y[k];
        d[k] = t - t.round();
    }
    d
}

pub fn torus_distance(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d = torus_delta(x, y);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn wrap(x: f64) -> f64 {
    x - x.round()
}

/// Particle positions in `[−1/2, 1/2)³`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub positions: Vec<[f64; 3]>,
}

impl Configuration {
    pub fn new(positions: Vec<[f64; 3]>) -> Self {
        let positions = positions.into_iter().map(|p| p.map(wrap)).collect();
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in 0..i {
                best = best.min(torus_distance(self.positions[i], self.positions[j]));
            }
        }
        best
    }

    /// Random sequential insertion with hard-core rejection.
    pub fn random_packing(n: usize, core: f64, rng: &mut impl Rng) -> Result<Self> {
        let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n);
        let mut attempts = 0;
        while positions.len() < n {
            attempts += 1;
            if attempts > MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::Packing(format!(
                    "placed {} of {n} particles with core {core} in {MAX_PLACEMENT_ATTEMPTS} attempts",
                    positions.len()
                )));
            }
            let x = [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
            if positions.iter().all(|&y| torus_distance(x, y) > core) {
                positions.push(x);
            }
        }
        Ok(Self { positions })
    }
}

/// The trial state for `n` particles with profile `f_ℓ`.
#[derive(Debug, Clone)]
pub struct JastrowState {
    pub solution: ScatteringSolution,
    pub particles: usize,
    pub scattering_length: f64,
    pub ell: f64,
    /// `None` when `a = 0`, where `f ≡ 1`.
    params: Option<HardCoreParams>,
}

impl JastrowState {
    pub fn new(n: usize, a: f64, ell: f64) -> Result<Self> {
        let solution = solve_hard_core(a, n as u64, ell)?;
        let params = solution.hard_core_params();
        Ok(Self {
            solution,
            particles: n,
            scattering_length: a,
            ell,
            params,
        })
    }

    pub fn core(&self) -> f64 {
        self.params.map_or(0.0, |h| h.core)
    }

    pub fn lambda(&self) -> f64 {
        self.params.map_or(0.0, |h| h.lambda())
    }

    fn log_f(&self, r: f64) -> f64 {
        match self.params {
            None => 0.0,
            Some(_) if r >= self.ell => 0.0,
            Some(h) if r <= h.core => f64::NEG_INFINITY,
            Some(h) => h.value(r).ln(),
        }
    }

    /// `f'/f`, clamped just outside the core.
    fn log_f_slope(&self, r: f64) -> f64 {
        match self.params {
            None => 0.0,
            Some(_) if r >= self.ell => 0.0,
            Some(h) => {
                let floor = h.core * (1.0 + CORE_CLAMP);
                if r < floor {
                    warn!("pair at distance {r} within the clamp band of the core {}", h.core);
                }
                let r = r.max(floor);
                h.derivative(r) / h.value(r)
            }
        }
    }

    /// Sum of `log f` over pairs containing particle `i` at position `x`.
    fn log_psi_particle(&self, config: &Configuration, i: usize, x: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for (j, &y) in config.positions.iter().enumerate() {
            if j != i {
                s += self.log_f(torus_distance(x, y));
            }
        }
        s
    }
}

/// `Σ_{i<j} log f_ℓ(|x_i − x_j|)`; `−∞` for infeasible configurations.
pub fn log_psi(state: &JastrowState, config: &Configuration) -> f64 {
    let p = &config.positions;
    let mut terms = Vec::new();
    for i in 0..p.len() {
        for j in 0..i {
            let t = state.log_f(torus_distance(p[i], p[j]));
            if t != 0.0 {
                terms.push(t);
            }
        }
    }
    sorted_sum(terms)
}

/// Sum in ascending order, so the result depends only on the multiset.
fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Per-particle sums of pair vectors, each accumulated in sorted order.
fn sorted_vector_sums(parts: Vec<Vec<[f64; 3]>>) -> Vec<[f64; 3]> {
    parts
        .into_iter()
        .map(|mut v| {
            v.sort_by(|x, y| x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1])).then(x[2].total_cmp(&y[2])));
            v.iter().fold([0.0; 3], |acc, g| [acc[0] + g[0], acc[1] + g[1], acc[2] + g[2]])
        })
        .collect()
}

/// `Σ_j |∇_{x_j} log ψ|²`, whose `|ψ|²`-average is the Dirichlet form
/// `∫ Σ_j |∇_j ψ|² / ∫ |ψ|²`.
pub fn local_kinetic(state: &JastrowState, config: &Configuration) -> f64 {
    let p = &config.positions;
    let mut parts = vec![Vec::new(); p.len()];
    for i in 0..p.len() {
        for j in 0..i {
            let d = torus_delta(p[i], p[j]);
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if r >= state.ell || state.params.is_none() {
                continue;
            }
            let c = state.log_f_slope(r) / r;
            parts[i].push(d.map(|x| c * x));
            parts[j].push(d.map(|x| -c * x));
        }
    }
    sorted_sum(sorted_vector_sums(parts).iter().map(|g| g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).collect())
}

/// `−Σ_j Δ_j ψ / ψ`. With `−Δf = λf` on `(a/N, ℓ)` and `f'(ℓ) = 0` this is
/// `2λ #{pairs within ℓ} − Σ_j (|∇_j log ψ|² − Σ_k (f'/f)²(d_jk))`, where the
/// single-pair terms that diverge at the core have cancelled.
pub fn local_energy(state: &JastrowState, config: &Configuration) -> f64 {
    let p = &config.positions;
    let mut parts = vec![Vec::new(); p.len()];
    let mut squares = vec![Vec::new(); p.len()];
    let mut close = 0usize;
    for i in 0..p.len() {
        for j in 0..i {
            let d = torus_delta(p[i], p[j]);
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if r >= state.ell || state.params.is_none() {
                continue;
            }
            close += 1;
            let slope = state.log_f_slope(r);
            let c = slope / r;
            parts[i].push(d.map(|x| c * x));
            parts[j].push(d.map(|x| -c * x));
            squares[i].push(slope * slope);
            squares[j].push(slope * slope);
        }
    }
    let cross = sorted_sum(
        sorted_vector_sums(parts)
            .iter()
            .zip(squares)
            .map(|(g, s)| g[0] * g[0] + g[1] * g[1] + g[2] * g[2] - sorted_sum(s))
            .collect(),
    );
    2.0 * state.lambda() * close as f64 - cross
}

/// Per-sample estimator of the kinetic energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// [`local_energy`]: bounded for two particles, finite variance.
    LocalEnergy,
    /// [`local_kinetic`]: non-negative, but with a `1/δ²` tail at
    /// distance `δ` from the core and infinite variance.
    Dirichlet,
}

impl Estimator {
    pub fn eval(self, state: &JastrowState, config: &Configuration) -> f64 {
        match self {
            Estimator::LocalEnergy => local_energy(state, config),
            Estimator::Dirichlet => local_kinetic(state, config),
        }
    }
}

/// `2 ∫|∇f|² / ∫_Λ f²` by radial quadrature, the exact two-particle energy.
pub fn two_body_energy(state: &JastrowState) -> Result<f64> {
    let Some(h) = state.params else {
        return Ok(0.0);
    };
    let cfg = QuadConfig::default();
    let breaks = [h.core, h.ell];
    let grad = 4.0 * PI * integrate_pieces(|r| r * r * h.derivative(r).powi(2), &breaks, &cfg)?;
    let norm = 1.0 - 4.0 * PI * h.core.powi(3) / 3.0
        + 4.0 * PI * integrate_pieces(|r| r * r * (h.value(r).powi(2) - 1.0), &breaks, &cfg)?;
    Ok(2.0 * grad / norm)
}

/// `2λ ∫_{ball ℓ} f² / ∫_Λ f²`, the same value through the eigenvalue.
pub fn two_body_energy_from_lambda(state: &JastrowState) -> Result<f64> {
    let Some(h) = state.params else {
        return Ok(0.0);
    };
    let cfg = QuadConfig::default();
    let breaks = [h.core, h.ell];
    let inside = 4.0 * PI * integrate_pieces(|r| r * r * h.value(r).powi(2), &breaks, &cfg)?;
    let norm = 1.0 - 4.0 * PI * h.ell.powi(3) / 3.0 + inside;
    Ok(2.0 * h.lambda() * inside / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Measured sweeps per chain; a sweep is `N` single-particle moves.
    pub steps: usize,
    /// Discarded sweeps used to tune the step size.
    pub warmup: usize,
    pub chains: usize,
    pub seed: u64,
    pub step_size: f64,
    pub target_acceptance: f64,
    pub estimator: Estimator,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            warmup: 2_000,
            chains: 4,
            seed: 1,
            step_size: 0.05,
            target_acceptance: 0.4,
            estimator: Estimator::LocalEnergy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub autocorrelation_time: f64,
    pub seed: u64,
    pub acceptance: f64,
    pub block_length: usize,
}

/// Mean, standard error and integrated autocorrelation time by blocking.
/// The block length is the smallest power of two that is at least five
/// autocorrelation times, keeping 16 or more blocks.
pub fn blocking(samples: &[f64]) -> (f64, f64, f64, usize) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let se = |len: usize| -> f64 {
        let blocks = n / len;
        let means: Vec<f64> = (0..blocks)
            .map(|b| samples[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
            .collect();
        let m = means.iter().sum::<f64>() / blocks as f64;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (blocks - 1) as f64;
        (var / blocks as f64).sqrt()
    };
    if n < 32 {
        return (mean, if n > 1 { se(1) } else { 0.0 }, 0.5, 1);
    }
    let base = se(1);
    let tau_at = |s: f64| if base > 0.0 { 0.5 * (s / base).powi(2) } else { 0.5 };
    let mut len = 1;
    let mut chosen = None;
    while n / len >= 16 {
        let s = se(len);
        let tau = tau_at(s);
        if len as f64 >= 5.0 * tau {
            chosen = Some((s, tau, len));
            break;
        }
        len *= 2;
    }
    let (s, tau, len) = chosen.unwrap_or_else(|| {
        let len = len / 2;
        let s = se(len);
        warn!("blocking did not reach five autocorrelation times; block length {len}");
        (s, tau_at(s), len)
    });
    (mean, s, tau, len)
}

/// One logged proposal: Metropolis acceptance probability and outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub probability: f64,
    pub accepted: bool,
}

struct Chain<'a> {
    state: &'a JastrowState,
    config: Configuration,
    rng: ChaCha8Rng,
    step: f64,
    accepted: usize,
    proposed: usize,
}

impl Chain<'_> {
    fn sweep(&mut self, log: &mut Option<&mut Vec<Proposal>>) {
        let n = self.config.len();
        for _ in 0..n {
            let i = self.rng.gen_range(0..n);
            let old = self.config.positions[i];
            let mut x = old;
            for c in x.iter_mut() {
                *c = wrap(*c + self.step * (2.0 * self.rng.gen::<f64>() - 1.0));
            }
            let delta = self.state.log_psi_particle(&self.config, i, x) - self.state.log_psi_particle(&self.config, i, old);
            let prob = (2.0 * delta).exp().min(1.0);
            let accept = prob >= 1.0 || self.rng.gen::<f64>() < prob;
            if let Some(l) = log.as_deref_mut() {
                l.push(Proposal {
                    probability: prob,
                    accepted: accept,
                });
            }
            self.proposed += 1;
            if accept {
                self.accepted += 1;
                self.config.positions[i] = x;
            }
        }
    }
}

fn run_chain(state: &JastrowState, cfg: &McConfig, stream: u64, mut log: Option<&mut Vec<Proposal>>) -> Result<(Vec<f64>, f64)> {
    if !(cfg.step_size > 0.0) {
        return Err(Error::domain(format!("step size must be > 0, got {}", cfg.step_size)));
    }
    if state.particles < 2 {
        return Err(Error::domain("need at least two particles"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let config = Configuration::random_packing(state.particles, state.core(), &mut rng)?;
    let mut chain = Chain {
        state,
        config,
        rng,
        step: cfg.step_size.min(0.5),
        accepted: 0,
        proposed: 0,
    };
    // tune the step towards the target acceptance in windows of 20 sweeps
    let window = 20;
    for w in 0..cfg.warmup.div_ceil(window) {
        chain.accepted = 0;
        chain.proposed = 0;
        for _ in 0..window.min(cfg.warmup - w * window) {
            chain.sweep(&mut None);
        }
        let rate = chain.accepted as f64 / chain.proposed.max(1) as f64;
        chain.step = (chain.step * (rate / cfg.target_acceptance).clamp(0.5, 2.0)).min(0.5);
    }
    chain.accepted = 0;
    chain.proposed = 0;
    let mut samples = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        chain.sweep(&mut log);
        samples.push(cfg.estimator.eval(state, &chain.config));
    }
    let rate = chain.accepted as f64 / chain.proposed.max(1) as f64;
    if !(0.1..=0.9).contains(&rate) {
        warn!("acceptance rate {rate:.3} outside [0.1, 0.9]; adjust the step size or warm-up length");
    }
    Ok((samples, rate))
}

fn estimate(samples: &[f64], seed: u64, acceptance: f64) -> McEstimate {
    let (mean, std_error, tau, block) = blocking(samples);
    McEstimate {
        mean,
        std_error,
        samples: samples.len(),
        autocorrelation_time: tau,
        seed,
        acceptance,
        block_length: block,
    }
}

/// Independent chains with streams `0..chains` of the seed, merged by
/// sample-weighted averaging.
pub fn metropolis_run(state: &JastrowState, cfg: &McConfig) -> Result<McEstimate> {
    if cfg.chains == 0 || cfg.steps < 2 {
        return Err(Error::config("need at least one chain and two measured sweeps"));
    }
    let per_chain: Vec<McEstimate> = (0..cfg.chains as u64)
        .into_par_iter()
        .map(|c| run_chain(state, cfg, c, None).map(|(s, rate)| estimate(&s, cfg.seed, rate)))
        .collect::<Result<_>>()?;
    Ok(merge(&per_chain))
}

/// Single chain with the proposal log, for detailed-balance checks.
pub fn metropolis_logged(state: &JastrowState, cfg: &McConfig) -> Result<(McEstimate, Vec<Proposal>)> {
    let mut log = Vec::new();
    let (samples, rate) = run_chain(state, cfg, 0, Some(&mut log))?;
    Ok((estimate(&samples, cfg.seed, rate), log))
}

/// Pooled estimate of independent chains.
pub fn merge(chains: &[McEstimate]) -> McEstimate {
    let total: usize = chains.iter().map(|c| c.samples).sum();
    let w = |c: &McEstimate| c.samples as f64 / total as f64;
    McEstimate {
        mean: chains.iter().map(|c| w(c) * c.mean).sum(),
        std_error: chains.iter().map(|c| (w(c) * c.std_error).powi(2)).sum::<f64>().sqrt(),
        samples: total,
        autocorrelation_time: chains.iter().map(|c| w(c) * c.autocorrelation_time).sum(),
        seed: chains[0].seed,
        acceptance: chains.iter().map(|c| w(c) * c.acceptance).sum(),
        block_length: chains.iter().map(|c| c.block_length).max().unwrap_or(1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub ell: f64,
    pub energy: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFit {
    /// Constant offset; absorbs the `O(a)` finite-size shift.
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub r_squared: f64,
    /// Minimizer `(c₁ / (2 c₂ N))^{1/3}` of the fitted curve, if both
    /// coefficients are positive.
    pub ell_min: Option<f64>,
    pub energy_min: Option<f64>,
    pub leading: f64,
}

/// Weighted least-squares fit of `E(ℓ) − 4π a N = c₀ + c₁/ℓ + c₂ N ℓ²`.
pub fn fit_tradeoff(rows: &[ScanRow], n: usize, a: f64) -> Result<ScanFit> {
    if rows.len() < 4 {
        return Err(Error::config("the trade-off fit needs at least four points"));
    }
    let leading = 4.0 * PI * a * n as f64;
    let nf = n as f64;
    let weight = |r: &ScanRow| 1.0 / r.std_error.max(1e-12 * r.energy.abs().max(1.0));
    let design = DMatrix::from_fn(rows.len(), 3, |i, j| {
        let l = rows[i].ell;
        weight(&rows[i]) * [1.0, 1.0 / l, nf * l * l][j]
    });
    let rhs = DVector::from_fn(rows.len(), |i, _| weight(&rows[i]) * (rows[i].energy - leading));
    let svd = design.clone().svd(true, true);
    let c = svd.solve(&rhs, 1e-12).map_err(|m| Error::NumericalFailure {
        message: format!("trade-off fit: {m}"),
        residual: f64::NAN,
    })?;
    let (c0, c1, c2) = (c[0], c[1], c[2]);
    let resid = &design * &c - &rhs;
    let wsum: f64 = rows.iter().map(|r| weight(r).powi(2)).sum();
    let ybar = rows.iter().map(|r| weight(r).powi(2) * (r.energy - leading)).sum::<f64>() / wsum;
    let ss_tot: f64 = rows.iter().map(|r| (weight(r) * (r.energy - leading - ybar)).powi(2)).sum();
    let (ell_min, energy_min) = if c1 > 0.0 && c2 > 0.0 {
        let l = (c1 / (2.0 * c2 * nf)).cbrt();
        (Some(l), Some(leading + c0 + c1 / l + c2 * nf * l * l))
    } else {
        (None, None)
    };
    Ok(ScanFit {
        c0,
        c1,
        c2,
        r_squared: if ss_tot > 0.0 { 1.0 - resid.norm_squared() / ss_tot } else { 1.0 },
        ell_min,
        energy_min,
        leading,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllScan {
    pub particles: usize,
    pub scattering_length: f64,
    pub rows: Vec<ScanRow>,
    pub fit: ScanFit,
}

/// Energies across `ells`, each with seed `cfg.seed + index`, and the
/// trade-off fit.
pub fn ell_scan(n: usize, a: f64, ells: &[f64], cfg: &McConfig) -> Result<EllScan> {
    let core = a / n as f64;
    for &l in ells {
        if !(l > core && l < 0.5) {
            return Err(Error::domain(format!("ell = {l} outside (a/N, 1/2)")));
        }
    }
    let rows = ells
        .iter()
        .enumerate()
        .map(|(i, &ell)| {
            let state = JastrowState::new(n, a, ell)?;
            let c = McConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..*cfg
            };
            let e = metropolis_run(&state, &c)?;
            Ok(ScanRow {
                ell,
                energy: e.mean,
                std_error: e.std_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_tradeoff(&rows, n, a)?;
    Ok(EllScan { particles: n, scattering_length: a, rows, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(seed: u64) -> McConfig {
        McConfig {
            steps: 4000,
            warmup: 400,
            chains: 2,
            seed,
            ..McConfig::default()
        }
    }

    #[test]
    fn torus_metric() {
        assert!((torus_distance([0.45, 0.0, 0.0], [-0.45, 0.0, 0.0]) - 0.1).abs() < 1e-15);
        assert_eq!(torus_distance([0.1, 0.2, 0.3], [0.1, 0.2, 0.3]), 0.0);
        let c = Configuration::new(vec![[0.7, -0.6, 0.2]]);
        assert!(c.positions[0].iter().all(|x| (-0.5..0.5).contains(x)));
    }

    #[test]
    fn log_psi_cases() {
        let st = JastrowState::new(2, 0.1, 0.2).unwrap();
        let far = Configuration::new(vec![[0.0; 3], [0.3, 0.0, 0.0]]);
        assert_eq!(log_psi(&st, &far), 0.0);
        assert_eq!(local_kinetic(&st, &far), 0.0);
        let near = Configuration::new(vec![[0.0; 3], [0.1, 0.0, 0.0]]);
        let h = st.solution.hard_core_params().unwrap();
        assert_eq!(log_psi(&st, &near), h.value(0.1).ln());
        let inside = Configuration::new(vec![[0.0; 3], [0.01, 0.0, 0.0]]);
        assert_eq!(log_psi(&st, &inside), f64::NEG_INFINITY);
        let slope = h.derivative(0.1) / h.value(0.1);
        assert!((local_kinetic(&st, &near) - 2.0 * slope * slope).abs() < 1e-12);
    }

    #[test]
    fn symmetries_are_exact() {
        let st = JastrowState::new(6, 0.3, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = Configuration::random_packing(6, st.core(), &mut rng).unwrap();
        let mut rev = c.clone();
        rev.positions.reverse();
        assert_eq!(log_psi(&st, &c), log_psi(&st, &rev));
        assert_eq!(local_kinetic(&st, &c), local_kinetic(&st, &rev));
        assert_eq!(local_energy(&st, &c), local_energy(&st, &rev));
        // shifts by multiples of 1/4 are exact in binary
        let shifted = Configuration::new(c.positions.iter().map(|p| p.map(|x| x + 0.25)).collect());
        let lp = log_psi(&st, &c);
        assert!((log_psi(&st, &shifted) - lp).abs() <= 1e-12 * lp.abs().max(1.0));
    }

    #[test]
    fn dirichlet_identity_for_profile() {
        for (a, n, ell) in [(0.1, 2, 0.2), (1.0, 100, 0.05), (0.5, 50, 0.3)] {
            let st = JastrowState::new(n, a, ell).unwrap();
            let e1 = two_body_energy(&st).unwrap();
            let e2 = two_body_energy_from_lambda(&st).unwrap();
            assert!((e1 - e2).abs() < 1e-9 * e2, "{e1} {e2}");
        }
    }

    #[test]
    fn local_energy_against_laplacian() {
        let st = JastrowState::new(3, 0.2, 0.3).unwrap();
        let lam = st.lambda();
        let pair = Configuration::new(vec![[0.0; 3], [0.1, 0.05, 0.0]]);
        let two = JastrowState::new(2, 0.2, 0.3).unwrap();
        assert!((local_energy(&two, &pair) - 2.0 * two.lambda()).abs() < 1e-9 * two.lambda());
        let apart = Configuration::new(vec![[0.0; 3], [0.4, 0.0, 0.0]]);
        assert_eq!(local_energy(&two, &apart), 0.0);
        // −Σ Δψ/ψ by central differences on ψ itself
        let c = Configuration::new(vec![[0.0; 3], [0.12, 0.05, 0.0], [0.05, 0.16, 0.04]]);
        let psi = |c: &Configuration| log_psi(&st, c).exp();
        let h = 1e-4;
        let mut lap = 0.0;
        for i in 0..3 {
            for k in 0..3 {
                let mut up = c.clone();
                let mut down = c.clone();
                up.positions[i][k] += h;
                down.positions[i][k] -= h;
                lap += (psi(&up) - 2.0 * psi(&c) + psi(&down)) / (h * h);
            }
        }
        let fd = -lap / psi(&c);
        let e = local_energy(&st, &c);
        assert!((e - fd).abs() < 1e-5 * lam, "{e} vs {fd}");
    }

    #[test]
    fn free_case_is_zero() {
        let st = JastrowState::new(5, 0.0, 0.2).unwrap();
        let e = metropolis_run(&st, &quick(1)).unwrap();
        assert_eq!((e.mean, e.std_error), (0.0, 0.0));
    }

    #[test]
    fn deterministic_single_chain() {
        let st = JastrowState::new(4, 0.4, 0.2).unwrap();
        let cfg = McConfig { chains: 1, ..quick(11) };
        let (a, la) = metropolis_logged(&st, &cfg).unwrap();
        let (b, lb) = metropolis_logged(&st, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn packing_failure() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(Configuration::random_packing(20, 0.9, &mut rng), Err(Error::Packing(_))));
    }

    #[test]
    fn detailed_balance_statistics() {
        let st = JastrowState::new(3, 0.3, 0.3).unwrap();
        let (_, log) = metropolis_logged(&st, &McConfig { chains: 1, ..quick(5) }).unwrap();
        // bin proposals by acceptance probability; accepted fraction must
        // match the mean probability in each bin
        let mut chi2 = 0.0;
        let mut dof = 0;
        for b in 0..10 {
            let (lo, hi) = (b as f64 / 10.0, (b + 1) as f64 / 10.0);
            let bin: Vec<&Proposal> = log.iter().filter(|p| p.probability >= lo && p.probability < hi).collect();
            if bin.len() < 50 {
                continue;
            }
            let expected: f64 = bin.iter().map(|p| p.probability).sum();
            let var: f64 = bin.iter().map(|p| p.probability * (1.0 - p.probability)).sum();
            let observed = bin.iter().filter(|p| p.accepted).count() as f64;
            if var > 0.0 {
                chi2 += (observed - expected).powi(2) / var;
                dof += 1;
            }
        }
        assert!(log.iter().filter(|p| p.probability == 1.0).all(|p| p.accepted));
        assert!(dof >= 3 && chi2 < dof as f64 + 5.0 * (2.0 * dof as f64).sqrt(), "{chi2} {dof}");
    }

    #[test]
    fn blocking_on_iid_and_correlated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let iid: Vec<f64> = (0..4096).map(|_| rng.gen::<f64>()).collect();
        let (m, se, tau, _) = blocking(&iid);
        assert!((m - 0.5).abs() < 4.0 * se);
        assert!((se - (1.0 / 12.0f64 / 4096.0).sqrt()).abs() < 0.3 * se);
        assert!(tau < 1.5);
        // AR(1) with coefficient 0.9 has τ_int = ½(1 + 0.9)/(1 − 0.9) = 9.5
        let mut x = 0.0;
        let ar: Vec<f64> = (0..1 << 16)
            .map(|_| {
                x = 0.9 * x + rng.gen::<f64>() - 0.5;
                x
            })
            .collect();
        let (_, _, tau, len) = blocking(&ar);
        assert!(tau > 5.0 && tau < 14.0, "{tau}");
        assert!(len as f64 >= 5.0 * tau);
    }

    #[test]
    fn two_particle_estimate_matches_quadrature() {
        let st = JastrowState::new(2, 0.1, 0.2).unwrap();
        let exact = two_body_energy_from_lambda(&st).unwrap();
        let e = metropolis_run(&st, &McConfig { steps: 20_000, ..quick(21) }).unwrap();
        assert!((e.mean - exact).abs() < 4.0 * e.std_error, "{e:?} vs {exact}");
    }

    #[test]
    fn fit_recovers_exact_curve() {
        let (n, a) = (50, 0.5);
        let rows: Vec<ScanRow> = [0.05, 0.1, 0.2, 0.3, 0.4]
            .iter()
            .map(|&ell| ScanRow {
                ell,
                energy: 4.0 * PI * a * n as f64 - 5.0 + 2.0 / ell + 3.0 * n as f64 * ell * ell,
                std_error: 0.1,
            })
            .collect();
        let fit = fit_tradeoff(&rows, n, a).unwrap();
        assert!((fit.c0 + 5.0).abs() < 1e-9 && (fit.c1 - 2.0).abs() < 1e-9 && (fit.c2 - 3.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let l = fit.ell_min.unwrap();
        assert!((l - (2.0 / (6.0 * 50.0f64)).cbrt()).abs() < 1e-9);
    }
}
