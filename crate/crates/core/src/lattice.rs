//! Momentum lattices `2πZ³` and `Z³`, radial shell sums, the Bogoliubov
//! correction sum and the finite-size constant `e_Λ`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, kahan_sum, KahanSum, QuadConfig};

pub const TWO_PI: f64 = 2.0 * PI;
pub const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Cutoff {
    /// `|p| ≤ K` with `p ∈ 2πZ³`.
    Euclidean(f64),
    /// `max_i |n_i| ≤ M` with `n ∈ Z³`.
    Cube(u32),
}

/// Points `n ∈ Z³` sharing the same `|n|²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shell {
    pub n2: u64,
    pub count: u64,
}

impl Shell {
    /// `|p|²` for `p = 2πn`.
    pub fn p2(&self) -> f64 {
        FOUR_PI_SQ * self.n2 as f64
    }

    pub fn p(&self) -> f64 {
        TWO_PI * (self.n2 as f64).sqrt()
    }
}

/// The nonzero lattice `Λ*₊ = 2πZ³ \ {0}` truncated by a cutoff.
#[derive(Debug, Clone)]
pub struct MomentumLattice {
    cutoff: Cutoff,
    shells: OnceLock<Arc<Vec<Shell>>>,
}

impl PartialEq for MomentumLattice {
    fn eq(&self, other: &Self) -> bool {
        self.cutoff == other.cutoff
    }
}

impl MomentumLattice {
    pub fn euclidean(k: f64) -> Result<Self> {
        if !(k >= TWO_PI && k.is_finite()) {
            return Err(Error::config(format!("Euclidean cutoff must be >= 2π, got {k}")));
        }
        Ok(Self {
            cutoff: Cutoff::Euclidean(k),
            shells: OnceLock::new(),
        })
    }

    pub fn cube(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("cube cutoff must be >= 1"));
        }
        Ok(Self {
            cutoff: Cutoff::Cube(m),
            shells: OnceLock::new(),
        })
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    /// Largest `|n|²` inside the cutoff.
    pub fn max_n2(&self) -> u64 {
        match self.cutoff {
            Cutoff::Euclidean(k) => {
                let r = k / TWO_PI;
                let mut m = (r * r).floor() as u64;
                // guard against rounding right at the boundary
                while ((m + 1) as f64).sqrt() * TWO_PI <= k {
                    m += 1;
                }
                while m > 0 && (m as f64).sqrt() * TWO_PI > k {
                    m -= 1;
                }
                m
            }
            Cutoff::Cube(m) => 3 * (m as u64) * (m as u64),
        }
    }

    /// Radius of the cutoff in momentum units (the Euclidean `K`, or the
    /// radius of the sphere inscribed in the cube).
    pub fn radius(&self) -> f64 {
        match self.cutoff {
            Cutoff::Euclidean(k) => k,
            Cutoff::Cube(m) => TWO_PI * m as f64,
        }
    }

    /// Bounding box half-width in integer units.
    fn box_half_width(&self) -> i64 {
        match self.cutoff {
            Cutoff::Euclidean(_) => (self.max_n2() as f64).sqrt().floor() as i64,
            Cutoff::Cube(m) => m as i64,
        }
    }

    pub fn contains(&self, n: [i64; 3]) -> bool {
        if n == [0, 0, 0] {
            return false;
        }
        match self.cutoff {
            Cutoff::Euclidean(_) => norm2(n) <= self.max_n2(),
            Cutoff::Cube(m) => n.iter().all(|c| c.unsigned_abs() <= m as u64),
        }
    }

    /// Every nonzero `n` inside the cutoff, in lexicographic order.
    pub fn points(&self) -> Vec<[i64; 3]> {
        let h = self.box_half_width();
        let mut out = Vec::new();
        for x in -h..=h {
            for y in -h..=h {
                for z in -h..=h {
                    let n = [x, y, z];
                    if self.contains(n) {
                        out.push(n);
                    }
                }
            }
        }
        out
    }

    /// Number of lattice points, counted through the shells.
    pub fn len(&self) -> u64 {
        self.shells().iter().map(|s| s.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Occupied shells in ascending `|n|²` (computed once per lattice).
    pub fn shells(&self) -> Arc<Vec<Shell>> {
        self.shells.get_or_init(|| Arc::new(self.compute_shells())).clone()
    }

    fn compute_shells(&self) -> Vec<Shell> {
        match self.cutoff {
            Cutoff::Euclidean(_) => {
                let counts = r3_counts(self.max_n2());
                counts
                    .iter()
                    .enumerate()
                    .skip(1)
                    .filter(|(_, c)| **c > 0)
                    .map(|(n2, &count)| Shell { n2: n2 as u64, count })
                    .collect()
            }
            Cutoff::Cube(m) => {
                let mut counts = vec![0u64; self.max_n2() as usize + 1];
                let m = m as i64;
                for x in -m..=m {
                    for y in -m..=m {
                        for z in -m..=m {
                            counts[norm2([x, y, z]) as usize] += 1;
                        }
                    }
                }
                counts[0] = 0;
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c > 0)
                    .map(|(n2, &count)| Shell { n2: n2 as u64, count })
                    .collect()
            }
        }
    }

    /// `Σ_{p ∈ Λ*₊, cutoff} h(|p|²)` for a radial summand, shell by shell.
    ///
    /// Shell values are evaluated in parallel and combined in ascending
    /// order, so the result does not depend on the thread count.
    pub fn radial_sum<F: Fn(f64) -> f64 + Sync>(&self, h: F) -> f64 {
        let shells = self.shells();
        let parts: Vec<f64> = shells.par_iter().map(|s| s.count as f64 * h(s.p2())).collect();
        kahan_sum(parts)
    }
}

/// Continuum estimate `(1/(2π)³) ∫_{|p|>k} h(|p|) d³p` of the part of a
/// lattice sum beyond a Euclidean cutoff `k`.
///
/// Integrated in `t = k/|p| ∈ (0, 1]`, so `h` must decay faster than `|p|^{-3}`.
pub fn continuum_tail<F: Fn(f64) -> f64>(h: F, k: f64, cfg: &QuadConfig) -> Result<f64> {
    let v = integrate(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            let p = k / t;
            p * p * h(p) * k / (t * t)
        },
        0.0,
        1.0,
        cfg,
    )?
    .value;
    Ok(v / (2.0 * PI * PI))
}

pub fn norm2(n: [i64; 3]) -> u64 {
    (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as u64
}

/// `r3(k)`: number of `n ∈ Z³` with `|n|² = k`, for `k ≤ max`.
pub fn r3_counts(max: u64) -> Vec<u64> {
    let max = max as usize;
    let mut r2 = vec![0u64; max + 1];
    let h = (max as f64).sqrt() as i64 + 1;
    for x in -h..=h {
        for y in -h..=h {
            let k = (x * x + y * y) as usize;
            if k <= max {
                r2[k] += 1;
            }
        }
    }
    let mut r3 = r2.clone();
    for z in 1..=h {
        let z2 = (z * z) as usize;
        if z2 > max {
            break;
        }
        // ±z contribute equally
        for k in 0..=(max - z2) {
            r3[k + z2] += 2 * r2[k];
        }
    }
    r3
}

/// Partial sums of a lattice series at a schedule of cutoffs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SumResult {
    /// Raw partial sum at the largest cutoff.
    pub value: f64,
    /// Cutoff parameter of each partial sum.
    pub cutoffs: Vec<f64>,
    /// Raw partial sums at increasing cutoffs.
    pub cutoff_sequence: Vec<f64>,
    /// Tail-corrected or accelerated versions of `cutoff_sequence`.
    pub accelerated: Vec<f64>,
    pub extrapolated: f64,
    pub error_estimate: f64,
}

/// `p² + A − √(p⁴ + 2Ap²) − A²/(2p²)` written without cancellation.
pub fn correction_summand(a: f64, p2: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let d = (p2 * p2 + 2.0 * a * p2).sqrt();
    -a * a * a * (3.0 * p2 + d) / (2.0 * p2 * (p2 + a + d) * (p2 + d))
}

/// Continuum estimate of `Σ_{|p|>K}` of [`correction_summand`] on `2πZ³`,
/// from the large-momentum expansion of the summand.
pub fn correction_tail(a: f64, k: f64) -> f64 {
    // summand ~ Σ_j c_j / p^{2j}; ∫_K^∞ p² p^{−2j} dp = K^{3−2j}/(2j−3)
    let c = [-a.powi(3) / 2.0, 5.0 * a.powi(4) / 8.0, -7.0 * a.powi(5) / 8.0];
    let mut s = 0.0;
    for (i, cj) in c.iter().enumerate() {
        let j = (i + 2) as i32;
        s += cj * k.powi(3 - 2 * j) / (2 * j - 3) as f64;
    }
    s / (2.0 * PI * PI)
}

/// `Σ_{p∈Λ*₊} [p² + A − √(p⁴+2Ap²) − A²/(2p²)]` over a Euclidean cutoff,
/// with the analytic tail appended.
///
/// Partial sums are reported at `K, K/2, K/4, ...` (down to `4π`).
pub fn bogoliubov_correction_sum(a: f64, lattice: &MomentumLattice) -> Result<SumResult> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("A must be finite and >= 0, got {a}")));
    }
    let k_max = match lattice.cutoff() {
        Cutoff::Euclidean(k) => k,
        Cutoff::Cube(_) => return Err(Error::config("the correction sum uses a Euclidean cutoff")),
    };
    let mut cutoffs = vec![k_max];
    while cutoffs.last().unwrap() / 2.0 >= 2.0 * TWO_PI && cutoffs.len() < 8 {
        cutoffs.push(cutoffs.last().unwrap() / 2.0);
    }
    cutoffs.reverse();

    let shells = lattice.shells();
    let terms: Vec<f64> = shells.par_iter().map(|s| s.count as f64 * correction_summand(a, s.p2())).collect();

    let mut raw = Vec::with_capacity(cutoffs.len());
    let mut acc = KahanSum::new();
    let mut i = 0;
    for &k in &cutoffs {
        let n2_max = MomentumLattice::euclidean(k)?.max_n2();
        while i < shells.len() && shells[i].n2 <= n2_max {
            acc.add(terms[i]);
            i += 1;
        }
        raw.push(acc.value());
    }
    let corrected: Vec<f64> = raw.iter().zip(&cutoffs).map(|(s, &k)| s + correction_tail(a, k)).collect();
    let value = *raw.last().unwrap();
    let extrapolated = *corrected.last().unwrap();
    let drift = if corrected.len() > 1 {
        (corrected[corrected.len() - 1] - corrected[corrected.len() - 2]).abs()
    } else {
        0.0
    };
    Ok(SumResult {
        value,
        cutoffs,
        cutoff_sequence: raw,
        accelerated: corrected,
        extrapolated,
        error_estimate: (value - extrapolated).abs().max(drift),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceleration {
    None,
    #[serde(alias = "cesaro")]
    CesaroAverage,
    Richardson,
}

/// Cube partial sums and the resulting finite-size constant.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ELambda {
    pub sums: SumResult,
    pub acceleration: Acceleration,
    /// `2 − extrapolated`.
    pub e_lambda: f64,
    /// `|acc(M_max) − acc(M_max − 4)|` of the accelerated sequence.
    pub stability: f64,
}

/// Width of the moving window, matched to the `2π` period in `M` of the
/// face contributions.
const AVERAGE_WINDOW: f64 = 4.0 * PI;
const AVERAGE_ORDER: usize = 3;

/// `S_M = Σ_{n∈Z³\{0}, max|n_i|≤M} cos|n| / |n|²` for `M = 1..=m_max`.
pub fn cube_partial_sums(m_max: u32) -> Vec<f64> {
    let m_max = m_max as usize;
    let top = 3 * m_max * m_max;
    let table: Vec<f64> = (0..=top)
        .map(|k| if k == 0 { 0.0 } else { (k as f64).sqrt().cos() / k as f64 })
        .collect();
    // contribution of the cube surface max|n_i| = m, from the closed octant
    // with multiplicity 2^(number of nonzero coordinates)
    let layers: Vec<f64> = (1..=m_max)
        .into_par_iter()
        .map(|m| {
            let mut acc = KahanSum::new();
            for a in 0..=m {
                for b in 0..=m {
                    let mut visit = |c: usize| {
                        let w = [a, b, c].iter().filter(|x| **x > 0).count();
                        acc.add((1u32 << w) as f64 * table[a * a + b * b + c * c]);
                    };
                    if a == m || b == m {
                        (0..=m).for_each(&mut visit);
                    } else {
                        visit(m);
                    }
                }
            }
            acc.value()
        })
        .collect();
    let mut out = Vec::with_capacity(m_max);
    let mut acc = KahanSum::new();
    for l in layers {
        acc.add(l);
        out.push(acc.value());
    }
    out
}

/// Moving average over a window of (possibly fractional) length `w`: the
/// oldest sample gets the fractional weight. Output `i` ends at input
/// `i + offset`.
fn moving_average(x: &[f64], w: f64) -> (Vec<f64>, usize) {
    let n = w.floor() as usize;
    let frac = w - n as f64;
    let mut weights = vec![1.0; n];
    if frac > 0.0 {
        weights.insert(0, frac);
    }
    let total: f64 = weights.iter().sum();
    let span = weights.len();
    if x.len() < span {
        return (Vec::new(), span - 1);
    }
    let out = (0..=x.len() - span)
        .map(|i| kahan_sum(weights.iter().zip(&x[i..i + span]).map(|(w, v)| w * v)) / total)
        .collect();
    (out, span - 1)
}

/// `e_Λ = 2 − lim_M S_M` from cube partial sums up to `m_max`.
pub fn e_lambda(m_max: u32, acceleration: Acceleration) -> Result<ELambda> {
    if m_max < 8 {
        return Err(Error::config(format!("e_lambda needs M_max >= 8, got {m_max}")));
    }
    let raw = cube_partial_sums(m_max);
    let cutoffs: Vec<f64> = (1..=m_max).map(|m| m as f64).collect();
    let value = *raw.last().unwrap();

    // accelerated[i] is aligned with cutoffs[i]; entries the filter cannot
    // reach yet are NaN
    let accelerated: Vec<f64> = match acceleration {
        Acceleration::None => raw.clone(),
        Acceleration::CesaroAverage => {
            let (mut a, mut offset) = (raw.clone(), 0);
            for _ in 0..AVERAGE_ORDER {
                let (b, o) = moving_average(&a, AVERAGE_WINDOW);
                a = b;
                offset += o;
            }
            pad_front(a, offset)
        }
        Acceleration::Richardson => {
            // single period average, then eliminate a 1/M trend between M/2 and M
            let (a, offset) = moving_average(&raw, 2.0 * PI);
            let avg = pad_front(a, offset);
            (0..avg.len())
                .map(|i| {
                    let m = i + 1;
                    let half = m / 2;
                    if half == 0 || avg[half - 1].is_nan() || avg[i].is_nan() {
                        f64::NAN
                    } else {
                        let (m, h) = (m as f64, half as f64);
                        (m * avg[i] - h * avg[half - 1]) / (m - h)
                    }
                })
                .collect()
        }
    };
    let extrapolated = *accelerated.last().unwrap();
    if extrapolated.is_nan() {
        return Err(Error::config(format!("M_max = {m_max} is too small for the requested acceleration")));
    }
    let back = accelerated[accelerated.len() - 5];
    let stability = if back.is_nan() { f64::INFINITY } else { (extrapolated - back).abs() };
    let error_estimate = (value - extrapolated).abs().max(if stability.is_finite() { stability } else { 0.0 });
    Ok(ELambda {
        sums: SumResult {
            value,
            cutoffs,
            cutoff_sequence: raw,
            accelerated,
            extrapolated,
            error_estimate,
        },
        acceleration,
        e_lambda: 2.0 - extrapolated,
        stability,
    })
}

fn pad_front(v: Vec<f64>, offset: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; offset];
    out.extend(v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuum_tail_of_power_law() {
        let k = 40.0;
        let v = continuum_tail(|p| p.powi(-4), k, &QuadConfig::default()).unwrap();
        assert!((v - 1.0 / (2.0 * PI * PI * k)).abs() < 1e-15);
    }

    #[test]
    fn shells_match_triple_loop() {
        for k in [TWO_PI, 3.0 * TWO_PI, 7.3 * TWO_PI] {
            let lat = MomentumLattice::euclidean(k).unwrap();
            assert_eq!(lat.len(), lat.points().len() as u64);
        }
        let cube = MomentumLattice::cube(3).unwrap();
        assert_eq!(cube.len(), 7 * 7 * 7 - 1);
        assert_eq!(cube.points().len(), 342);
    }

    #[test]
    fn small_r3_values() {
        let r = r3_counts(9);
        assert_eq!(&r[..], &[1, 6, 12, 8, 6, 24, 24, 0, 12, 30]);
    }

    #[test]
    fn lattice_excludes_zero_and_is_symmetric() {
        let lat = MomentumLattice::euclidean(4.0 * TWO_PI).unwrap();
        let pts = lat.points();
        assert!(!pts.contains(&[0, 0, 0]));
        for p in &pts {
            assert!(lat.contains([-p[0], -p[1], -p[2]]));
        }
    }

    #[test]
    fn boundary_shell_is_included() {
        let lat = MomentumLattice::euclidean(TWO_PI * 5.0).unwrap();
        assert_eq!(lat.max_n2(), 25);
    }

    #[test]
    fn zero_coupling_sum_vanishes() {
        let lat = MomentumLattice::euclidean(20.0 * TWO_PI).unwrap();
        let r = bogoliubov_correction_sum(0.0, &lat).unwrap();
        assert_eq!(r.extrapolated, 0.0);
        assert_eq!(r.value, 0.0);
        assert!(bogoliubov_correction_sum(-1.0, &lat).is_err());
    }

    #[test]
    fn safe_summand_matches_raw_form_where_raw_is_accurate() {
        let a = 8.0 * PI;
        for &p2 in &[1.0, 10.0, 39.0, 100.0] {
            let raw = p2 + a - (p2 * p2 + 2.0 * a * p2).sqrt() - a * a / (2.0 * p2);
            assert!((correction_summand(a, p2) - raw).abs() < 1e-11 * raw.abs().max(1.0));
        }
    }

    #[test]
    fn summand_tends_to_quartic_tail() {
        for &a in &[0.5, 1.0, 8.0 * PI, 100.0] {
            let p = 20.0 * f64::max(1.0, a.sqrt());
            let lead = -a.powi(3) / (2.0 * p.powi(4));
            let r = correction_summand(a, p * p) / lead;
            assert!((r - 1.0).abs() < 0.05, "A = {a}: ratio {r}");
        }
    }

    #[test]
    fn error_estimate_covers_extrapolation_step() {
        let lat = MomentumLattice::euclidean(64.0 * TWO_PI).unwrap();
        let r = bogoliubov_correction_sum(8.0 * PI, &lat).unwrap();
        assert!(r.error_estimate >= (r.value - r.extrapolated).abs());
        assert_eq!(r.cutoffs.len(), r.cutoff_sequence.len());
        assert!(r.cutoffs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn e_lambda_rejects_small_cutoff() {
        assert!(matches!(e_lambda(7, Acceleration::None), Err(Error::Config(_))));
    }

    #[test]
    fn cube_sums_match_direct_loop() {
        let s = cube_partial_sums(6);
        for m in 1..=6i64 {
            let mut direct = 0.0;
            for x in -m..=m {
                for y in -m..=m {
                    for z in -m..=m {
                        let k = norm2([x, y, z]);
                        if k > 0 {
                            direct += (k as f64).sqrt().cos() / k as f64;
                        }
                    }
                }
            }
            assert!((s[m as usize - 1] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn fractional_window_average() {
        let (a, off) = moving_average(&[1.0, 2.0, 3.0, 4.0], 2.5);
        assert_eq!(off, 2);
        assert!((a[0] - (0.5 * 1.0 + 2.0 + 3.0) / 2.5).abs() < 1e-15);
        assert_eq!(a.len(), 2);
    }
}
