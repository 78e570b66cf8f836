//! Explicit Dormand-Prince 5(4) integrator with dense output.
//!
//! The driver controls the step size from the embedded 4th order error
//! estimate. Each accepted step carries a quartic interpolant so events can
//! be located inside a step without re-integration, and a fixed-step entry
//! point allows landing exactly on an event time at full accuracy.

use crate::error::{Result, TubeError};

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
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// Difference between the 5th and 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Weights of the dense-output correction term.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Quartic interpolant over one accepted step.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn contains(&self, t: f64) -> bool {
        let theta = (t - self.t0) / self.h;
        (-1e-12..=1.0 + 1e-12).contains(&theta)
    }

    /// Solution at t0 + theta * h for theta in [0, 1].
    pub fn eval_theta(&self, theta: f64, out: &mut [f64]) {
        let th1 = 1.0 - theta;
        for i in 0..out.len() {
            out[i] = self.r[0][i]
                + theta
                    * (self.r[1][i]
                        + th1 * (self.r[2][i] + theta * (self.r[3][i] + th1 * self.r[4][i])));
        }
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        self.eval_theta((t - self.t0) / self.h, out);
    }
}

/// One raw Dormand-Prince step of size h from (t, y).
///
/// `k` must hold 7 slices of the state dimension with `k[0] = f(t, y)` on
/// entry; on exit `k[6] = f(t + h, y1)` (the first-same-as-last stage) and
/// `y1` holds the 5th order solution. Returns nothing extra; the caller reads
/// the error from [`error_norm`].
fn stages<F>(f: &mut F, t: f64, y: &[f64], h: f64, k: &mut [Vec<f64>; 7], y1: &mut [f64])
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut ytmp = vec![0.0; n];
    for i in 0..n {
        ytmp[i] = y[i] + h * A21 * k[0][i];
    }
    let (k0, rest) = k.split_at_mut(1);
    let (k1s, rest) = rest.split_at_mut(1);
    f(t + C2 * h, &ytmp, &mut k1s[0]);
    for i in 0..n {
        ytmp[i] = y[i] + h * (A31 * k0[0][i] + A32 * k1s[0][i]);
    }
    let (k2s, rest) = rest.split_at_mut(1);
    f(t + C3 * h, &ytmp, &mut k2s[0]);
    for i in 0..n {
        ytmp[i] = y[i] + h * (A41 * k0[0][i] + A42 * k1s[0][i] + A43 * k2s[0][i]);
    }
    let (k3s, rest) = rest.split_at_mut(1);
    f(t + C4 * h, &ytmp, &mut k3s[0]);
    for i in 0..n {
        ytmp[i] =
            y[i] + h * (A51 * k0[0][i] + A52 * k1s[0][i] + A53 * k2s[0][i] + A54 * k3s[0][i]);
    }
    let (k4s, rest) = rest.split_at_mut(1);
    f(t + C5 * h, &ytmp, &mut k4s[0]);
    for i in 0..n {
        ytmp[i] = y[i]
            + h * (A61 * k0[0][i]
                + A62 * k1s[0][i]
                + A63 * k2s[0][i]
                + A64 * k3s[0][i]
                + A65 * k4s[0][i]);
    }
    let (k5s, k6s) = rest.split_at_mut(1);
    f(t + h, &ytmp, &mut k5s[0]);
    for i in 0..n {
        y1[i] = y[i]
            + h * (B1 * k0[0][i]
                + B3 * k2s[0][i]
                + B4 * k3s[0][i]
                + B5 * k4s[0][i]
                + B6 * k5s[0][i]);
    }
    f(t + h, y1, &mut k6s[0]);
}

fn error_norm(k: &[Vec<f64>; 7], h: f64, y: &[f64], y1: &[f64], atol: f64, rtol: f64) -> f64 {
    let n = y.len();
    let mut acc = 0.0;
    for i in 0..n {
        let e = h
            * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                + E7 * k[6][i]);
        let sc = atol + rtol * y[i].abs().max(y1[i].abs());
        acc += (e / sc) * (e / sc);
    }
    (acc / n as f64).sqrt()
}

fn dense_from_stages(t: f64, h: f64, y: &[f64], y1: &[f64], k: &[Vec<f64>; 7]) -> DenseStep {
    let n = y.len();
    let mut r = [
        y.to_vec(),
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    ];
    for i in 0..n {
        let ydiff = y1[i] - y[i];
        let bspl = h * k[0][i] - ydiff;
        r[1][i] = ydiff;
        r[2][i] = bspl;
        r[3][i] = ydiff - h * k[6][i] - bspl;
        r[4][i] = h
            * (D1 * k[0][i]
                + D3 * k[2][i]
                + D4 * k[3][i]
                + D5 * k[4][i]
                + D6 * k[5][i]
                + D7 * k[6][i]);
    }
    DenseStep { t0: t, h, r }
}

/// One fixed step of size h; returns the solution at t0 + h and its
/// derivative there. Used to land exactly on event times.
pub fn fixed_step<F>(f: &mut F, t0: f64, y0: &[f64], h: f64) -> (Vec<f64>, Vec<f64>)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    f(t0, y0, &mut k[0]);
    let mut y1 = vec![0.0; n];
    stages(f, t0, y0, h, &mut k, &mut y1);
    let [_, _, _, _, _, _, k7] = k;
    (y1, k7)
}

/// Adaptive Dormand-Prince 5(4) driver.
#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|; 0 disables the cap.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 { rtol: 1e-10, atol: 1e-12, h_max: 0.0, max_steps: 50_000_000 }
    }
}

impl Dopri5 {
    pub fn with_tol(rtol: f64, atol: f64) -> Self {
        Dopri5 { rtol, atol, ..Default::default() }
    }

    /// Integrate from (t0, y0) to t_end, invoking `sink` after each accepted
    /// step. If the sink returns false, integration halts and the state at
    /// the end of that step is returned.
    pub fn integrate<F, S>(&self, mut f: F, t0: f64, y0: &[f64], t_end: f64, mut sink: S) -> Result<Vec<f64>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        S: FnMut(&DenseStep, &[f64]) -> bool,
    {
        let n = y0.len();
        let mut y = y0.to_vec();
        if t_end == t0 {
            return Ok(y);
        }
        let dir = (t_end - t0).signum();
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
        f(t0, &y, &mut k[0]);
        let mut t = t0;
        let mut h = self.initial_step(&mut f, t0, &y, &k[0], t_end);
        if self.h_max > 0.0 {
            h = h.clamp(-self.h_max, self.h_max);
        }
        let mut y1 = vec![0.0; n];
        let mut facmax = 5.0;
        let mut steps = 0usize;
        loop {
            if steps >= self.max_steps {
                return Err(TubeError::StepFailure {
                    reason: format!("step budget {} exhausted at t = {t}", self.max_steps),
                });
            }
            steps += 1;
            let mut last = false;
            if (t + h - t_end) * dir >= 0.0 {
                h = t_end - t;
                last = true;
            }
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(TubeError::StepFailure {
                    reason: format!("step size underflow at t = {t}"),
                });
            }
            stages(&mut f, t, &y, h, &mut k, &mut y1);
            let err = error_norm(&k, h, &y, &y1, self.atol, self.rtol);
            if err <= 1.0 {
                let step = dense_from_stages(t, h, &y, &y1, &k);
                let keep_going = sink(&step, &y1);
                t += h;
                y.copy_from_slice(&y1);
                let (head, tail) = k.split_at_mut(6);
                head[0].copy_from_slice(&tail[0]);
                if !keep_going {
                    return Ok(y);
                }
                if last {
                    return Ok(y);
                }
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, facmax);
                h *= fac;
                if self.h_max > 0.0 {
                    h = h.clamp(-self.h_max, self.h_max);
                }
                facmax = 5.0;
            } else {
                // A non-finite error estimate (NaN in the right-hand side)
                // gets the maximum shrink so the failure surfaces as a step
                // size underflow instead of a spin.
                let fac = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
                } else {
                    0.2
                };
                h *= fac;
                facmax = 1.0;
            }
        }
    }

    /// Integrate to t_end and return only the final state.
    pub fn solve<F>(&self, f: F, t0: f64, y0: &[f64], t_end: f64) -> Result<Vec<f64>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        self.integrate(f, t0, y0, t_end, |_, _| true)
    }

    /// Integrate to t_end and return every accepted step's interpolant.
    pub fn solve_dense<F>(&self, f: F, t0: f64, y0: &[f64], t_end: f64) -> Result<(Vec<DenseStep>, Vec<f64>)>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let mut steps = Vec::new();
        let y = self.integrate(f, t0, y0, t_end, |step, _| {
            steps.push(step.clone());
            true
        })?;
        Ok((steps, y))
    }

    fn initial_step<F>(&self, f: &mut F, t0: f64, y0: &[f64], f0: &[f64], t_end: f64) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y0.len();
        let dir = (t_end - t0).signum();
        let span = (t_end - t0).abs();
        let sc: Vec<f64> = y0.iter().map(|&v| self.atol + self.rtol * v.abs()).collect();
        let rms = |v: &[f64]| -> f64 {
            let s: f64 = v.iter().zip(&sc).map(|(&a, &s)| (a / s) * (a / s)).sum();
            (s / n as f64).sqrt()
        };
        let d0 = rms(y0);
        let d1 = rms(f0);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span);
        let mut y1 = vec![0.0; n];
        for i in 0..n {
            y1[i] = y0[i] + dir * h0 * f0[i];
        }
        let mut f1 = vec![0.0; n];
        f(t0 + dir * h0, &y1, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(&a, &b)| a - b).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        dir * (100.0 * h0).min(h1).min(span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_exponential_growth() {
        let solver = Dopri5::with_tol(1e-12, 1e-14);
        let y = solver.solve(|_, y, dy| dy[0] = y[0], 0.0, &[1.0], 1.0).unwrap();
        assert_relative_eq!(y[0], std::f64::consts::E, max_relative = 1e-11);
    }

    #[test]
    fn harmonic_oscillator_stays_accurate_over_many_periods() {
        let solver = Dopri5::with_tol(1e-11, 1e-13);
        let t_end = 100.0 * std::f64::consts::PI;
        let y = solver
            .solve(
                |_, y, dy| {
                    dy[0] = y[1];
                    dy[1] = -y[0];
                },
                0.0,
                &[1.0, 0.0],
                t_end,
            )
            .unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-7);
        assert!(y[1].abs() < 1e-7);
    }

    #[test]
    fn dense_output_matches_analytic_solution_inside_steps() {
        let solver = Dopri5::with_tol(1e-10, 1e-12);
        let mut worst: f64 = 0.0;
        solver
            .integrate(
                |t, _, dy| dy[0] = t.cos(),
                0.0,
                &[0.0],
                20.0,
                |step, _| {
                    let mut out = [0.0];
                    for j in 0..=16 {
                        let theta = j as f64 / 16.0;
                        step.eval_theta(theta, &mut out);
                        let t = step.t0 + theta * step.h;
                        worst = worst.max((out[0] - t.sin()).abs());
                    }
                    true
                },
            )
            .unwrap();
        assert!(worst < 1e-8, "dense output error {worst:.3e}");
    }

    #[test]
    fn nan_in_rhs_surfaces_as_step_failure() {
        let solver = Dopri5::default();
        let out = solver.solve(
            |t, _, dy| dy[0] = if t < 0.5 { 1.0 } else { f64::NAN },
            0.0,
            &[0.0],
            1.0,
        );
        assert!(matches!(out, Err(TubeError::StepFailure { .. })));
    }

    #[test]
    fn fixed_step_has_fifth_order_local_error() {
        // One step of the Riccati-like equation y' = y^2 + t, y(0) = 0.3;
        // halving h should cut the local error by about 2^6 = 64.
        let mut f = |t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0] + t;
        let reference = Dopri5::with_tol(1e-13, 1e-15)
            .solve(&mut f, 0.0, &[0.3], 0.4)
            .unwrap()[0];
        let coarse = {
            let (y, _) = fixed_step(&mut f, 0.0, &[0.3], 0.4);
            (y[0] - reference).abs()
        };
        let fine = {
            let (y, _) = fixed_step(&mut f, 0.0, &[0.3], 0.2);
            let (y, _) = fixed_step(&mut f, 0.2, &y, 0.2);
            (y[0] - reference).abs()
        };
        let ratio = coarse / fine;
        assert!(
            (20.0..200.0).contains(&ratio),
            "expected ~2^5..2^6 error drop, got ratio {ratio:.1}"
        );
    }

    #[test]
    fn integrates_backwards() {
        let solver = Dopri5::with_tol(1e-12, 1e-14);
        let y = solver.solve(|_, y, dy| dy[0] = y[0], 1.0, &[std::f64::consts::E], 0.0).unwrap();
        assert_relative_eq!(y[0], 1.0, max_relative = 1e-11);
    }

    #[test]
    fn sink_can_halt_early() {
        let solver = Dopri5::default();
        let y = solver
            .integrate(
                |_, y, dy| dy[0] = y[0],
                0.0,
                &[1.0],
                10.0,
                |step, _| step.t1() < 1.0,
            )
            .unwrap();
        assert!(y[0] < std::f64::consts::E.powi(2));
    }
}
