//! Adaptive Dormand-Prince 5(4) integration for small fixed-size systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step length (keeps the recorded trajectory dense
    /// enough for Hermite interpolation).
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

/// Accepted states `(t_i, y_i, y'_i)` of one integration.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; D]>,
    pub dy: Vec<[f64; D]>,
}

impl<const D: usize> Trajectory<D> {
    pub fn last(&self) -> [f64; D] {
        *self.y.last().expect("non-empty trajectory")
    }

    /// Cubic Hermite interpolation of component `c` at `t`.
    pub fn interpolate(&self, c: usize, t: f64) -> f64 {
        self.interpolate_with_derivative(c, t).0
    }

    pub fn interpolate_with_derivative(&self, c: usize, t: f64) -> (f64, f64) {
        let n = self.t.len();
        let i = self.t.partition_point(|&x| x < t).clamp(1, n - 1);
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (y0, y1) = (self.y[i - 1][c], self.y[i][c]);
        let (m0, m1) = (self.dy[i - 1][c] * h, self.dy[i][c] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        let dv = ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * y1 + (3.0 * s2 - 2.0 * s) * m1) / h;
        (v, dv)
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const D: usize>(y: &[f64; D], terms: &[(f64, &[f64; D])], h: f64) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0` to `t1 > t0`, recording every
/// accepted step. `breaks` are interior points the integrator must land on
/// (discontinuities of the right-hand side).
pub fn integrate<const D: usize, F>(f: F, t0: f64, y0: [f64; D], t1: f64, breaks: &[f64], cfg: &OdeConfig) -> Result<Trajectory<D>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let mut stops: Vec<f64> = breaks.iter().copied().filter(|&b| b > t0 && b < t1).collect();
    stops.sort_by(f64::total_cmp);
    stops.push(t1);

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut traj = Trajectory {
        t: vec![t],
        y: vec![y],
        dy: vec![k1],
    };
    let span = t1 - t0;
    let mut h = (span * 1e-3).min(cfg.max_step);
    let mut steps = 0usize;

    for &stop in &stops {
        // the right-hand side may jump at a break: restart from its right limit
        // (recorded twice so interpolation on either side sees the right slope)
        if t > t0 {
            k1 = f(t + 4.0 * f64::EPSILON * t.abs(), &y);
            traj.t.push(t);
            traj.y.push(y);
            traj.dy.push(k1);
        }
        while t < stop {
            steps += 1;
            if steps > cfg.max_steps {
                return Err(Error::NumericalFailure {
                    message: "ODE integration exceeded the step budget".into(),
                    residual: (stop - t) / span,
                });
            }
            let mut last = false;
            if t + h >= stop {
                h = stop - t;
                last = true;
            }
            let k2 = f(t + C2 * h, &axpy(&y, &[(A21, &k1)], h));
            let k3 = f(t + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
            let k4 = f(t + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
            let k5 = f(t + C5 * h, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
            let k6 = f(t + h, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
            let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
            let k7 = f(t + h, &y_new);
            let mut err: f64 = 0.0;
            for i in 0..D {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            if err <= 1.0 || h.abs() < 1e-14 * span {
                t = if last { stop } else { t + h };
                y = y_new;
                k1 = k7;
                traj.t.push(t);
                traj.y.push(y);
                traj.dy.push(k7);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * fac).min(cfg.max_step);
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
            if !h.is_finite() || h <= 0.0 {
                return Err(Error::NumericalFailure {
                    message: "ODE step size collapsed".into(),
                    residual: err,
                });
            }
        }
    }
    Ok(traj)
}
