//! Radial geodesics, parallel-transported frames, and Jacobi propagation on
//! arbitrary charts, plus tube metrics sampled from Jacobi inner products
//! and a certificate that the curvature data seen by a tube does not vary
//! along the base curve.

use std::sync::Arc;

use rayon::prelude::*;

use crate::chart::ChartMetric;
use crate::curve::{FrenetData, ParamCurve};
use crate::error::{Result, TubeError};
use crate::metric2d::{InducedMetric2D, JetFn, MetricJet};
use crate::ode::Dopri5;
use crate::spaceform::{ScalarFn, TubeProfile};

/// State index layout: position 3, velocity 3, frame rows 9, Jacobi values
/// 6, Jacobi derivatives 6, and 3 spare slots reserved for diagnostics.
const DIM: usize = 30;
const JAC: usize = 15;
const JACD: usize = 21;

const UNIT_SPEED_TOL: f64 = 1e-9;

/// Snapshot of the transported data at one radius along a radial geodesic.
#[derive(Clone, Copy, Debug)]
pub struct RadialState {
    pub rho: f64,
    /// Chart coordinates of the geodesic point.
    pub x: [f64; 3],
    /// Chart components of the unit radial velocity.
    pub xdot: [f64; 3],
    /// Rows are the parallel-transported frame vectors in chart components.
    pub frame: [[f64; 3]; 3],
    /// t_s, n_s, b_s, t_psi, n_psi, b_psi followed by their rho-derivatives.
    pub jacobi: [f64; 12],
}

impl RadialState {
    /// Components of the arc-length Jacobi field in the transported frame.
    pub fn j_s(&self) -> [f64; 3] {
        [self.jacobi[0], self.jacobi[1], self.jacobi[2]]
    }

    /// Components of the angular Jacobi field in the transported frame.
    pub fn j_psi(&self) -> [f64; 3] {
        [self.jacobi[3], self.jacobi[4], self.jacobi[5]]
    }

    fn from_vec(rho: f64, y: &[f64]) -> Self {
        let mut frame = [[0.0; 3]; 3];
        for a in 0..3 {
            for i in 0..3 {
                frame[a][i] = y[6 + 3 * a + i];
            }
        }
        let mut jacobi = [0.0; 12];
        jacobi.copy_from_slice(&y[JAC..JAC + 12]);
        RadialState {
            rho,
            x: [y[0], y[1], y[2]],
            xdot: [y[3], y[4], y[5]],
            frame,
            jacobi,
        }
    }
}

fn initial_vec(start: &FrenetData, psi: f64) -> [f64; DIM] {
    let (sp, cp) = psi.sin_cos();
    let mut y = [0.0; DIM];
    y[0..3].copy_from_slice(&start.x);
    for i in 0..3 {
        y[3 + i] = cp * start.n_vec[i] + sp * start.b_vec[i];
        y[6 + i] = start.t_vec[i];
        y[9 + i] = start.n_vec[i];
        y[12 + i] = start.b_vec[i];
    }
    // J_s starts as the unit tangent and rotates at the curvature rates;
    // J_psi starts at zero with unit angular speed in the normal plane.
    y[JAC] = 1.0;
    y[JACD] = -start.k1 * cp;
    y[JACD + 1] = -start.k2 * sp;
    y[JACD + 2] = start.k2 * cp;
    y[JACD + 4] = -sp;
    y[JACD + 5] = cp;
    y
}

/// Geodesic + parallel transport + Jacobi right-hand side. Failures (for
/// example leaving the chart domain during a trial stage) are parked in
/// `fault` and the derivative is poisoned with NaN so the driver backs off.
fn radial_rhs(
    chart: &ChartMetric,
    with_jacobi: bool,
    y: &[f64],
    dy: &mut [f64],
    fault: &mut Option<TubeError>,
) {
    let x = [y[0], y[1], y[2]];
    let filled = (|| -> Result<()> {
        let gamma = chart.christoffel_at(&x)?;
        let v = [y[3], y[4], y[5]];
        dy[0..3].copy_from_slice(&v);
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    acc += gamma[i][j][k] * v[j] * v[k];
                }
            }
            dy[3 + i] = -acc;
        }
        for a in 0..3 {
            let e = &y[6 + 3 * a..9 + 3 * a];
            for i in 0..3 {
                let mut acc = 0.0;
                for j in 0..3 {
                    for k in 0..3 {
                        acc += gamma[i][j][k] * v[j] * e[k];
                    }
                }
                dy[6 + 3 * a + i] = -acc;
            }
        }
        if with_jacobi {
            // Coupling matrix A_ab = <R(e_b, v)v, e_a> in the transported
            // frame; the Jacobi components obey c_a'' = -A_ab c_b.
            let riem = chart.riemann_at(&x)?;
            let mut a_mat = [[0.0; 3]; 3];
            for a in 0..3 {
                let ea = &y[6 + 3 * a..9 + 3 * a];
                for b in 0..3 {
                    let eb = &y[6 + 3 * b..9 + 3 * b];
                    let mut acc = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            for k in 0..3 {
                                for l in 0..3 {
                                    acc += riem.down[i][j][k][l] * ea[i] * v[j] * eb[k] * v[l];
                                }
                            }
                        }
                    }
                    a_mat[a][b] = acc;
                }
            }
            for c in 0..6 {
                dy[JAC + c] = y[JACD + c];
            }
            for block in 0..2 {
                for a in 0..3 {
                    let mut acc = 0.0;
                    for b in 0..3 {
                        acc += a_mat[a][b] * y[JAC + 3 * block + b];
                    }
                    dy[JACD + 3 * block + a] = -acc;
                }
            }
        } else {
            for c in 0..12 {
                dy[JAC + c] = 0.0;
            }
        }
        dy[27] = 0.0;
        dy[28] = 0.0;
        dy[29] = 0.0;
        Ok(())
    })();
    if let Err(e) = filled {
        if fault.is_none() {
            *fault = Some(e);
        }
        dy.fill(f64::NAN);
    }
}

fn check_unit_speed(chart: &ChartMetric, state: &RadialState) -> Result<()> {
    let sigma = chart.norm(&state.x, &state.xdot)?;
    if (sigma - 1.0).abs() > UNIT_SPEED_TOL {
        return Err(TubeError::StepFailure {
            reason: format!(
                "unit speed drifted to {sigma:.12} at rho = {:.6}",
                state.rho
            ),
        });
    }
    Ok(())
}

fn run_radial(
    chart: &ChartMetric,
    start: &FrenetData,
    psi: f64,
    rhos: &[f64],
    with_jacobi: bool,
    solver: &Dopri5,
) -> Result<Vec<RadialState>> {
    if rhos.windows(2).any(|w| w[1] <= w[0]) || rhos.first().is_some_and(|&r| r < 0.0) {
        return Err(TubeError::Config(
            "radial sample radii must be nonnegative and strictly increasing".into(),
        ));
    }
    let y0 = initial_vec(start, psi);
    let mut out = Vec::with_capacity(rhos.len());
    let mut idx = 0;
    while idx < rhos.len() && rhos[idx] == 0.0 {
        out.push(RadialState::from_vec(0.0, &y0));
        idx += 1;
    }
    if idx == rhos.len() {
        return Ok(out);
    }
    let rho_end = *rhos.last().unwrap();
    let mut fault: Option<TubeError> = None;
    let mut buf = vec![0.0; DIM];
    let res = solver.integrate(
        |_t, y, dy| radial_rhs(chart, with_jacobi, y, dy, &mut fault),
        0.0,
        &y0,
        rho_end,
        |step, _| {
            let hi = step.t1() + 1e-12 * rho_end.max(1.0);
            while idx < rhos.len() && rhos[idx] <= hi {
                step.eval(rhos[idx], &mut buf);
                out.push(RadialState::from_vec(rhos[idx], &buf));
                idx += 1;
            }
            true
        },
    );
    match res {
        Ok(_) => {}
        Err(e) => return Err(fault.take().unwrap_or(e)),
    }
    for state in &out {
        chart.check_domain(&state.x)?;
        check_unit_speed(chart, state)?;
    }
    Ok(out)
}

/// Integrate the radial geodesic and frame transport out to `rho_max`,
/// sampling the state at the given radii (nonnegative, increasing). With
/// `with_jacobi` the Jacobi blocks are propagated too, otherwise they are
/// left at zero.
pub fn radial_states(
    chart: &ChartMetric,
    start: &FrenetData,
    psi: f64,
    rhos: &[f64],
    with_jacobi: bool,
) -> Result<Vec<RadialState>> {
    run_radial(chart, start, psi, rhos, with_jacobi, &Dopri5::default())
}

/// Radial geodesic from the frame point of `start` in the normal-plane
/// direction cos(psi) N + sin(psi) B, reported at every accepted integrator
/// step. Jacobi slots in the returned states are zero.
pub fn radial_geodesic(
    chart: &ChartMetric,
    start: &FrenetData,
    psi: f64,
    rho_max: f64,
) -> Result<Vec<RadialState>> {
    if rho_max < 0.0 {
        return Err(TubeError::Config(format!("rho_max must be nonnegative, got {rho_max}")));
    }
    let y0 = initial_vec(start, psi);
    let mut out = vec![RadialState::from_vec(0.0, &y0)];
    if rho_max == 0.0 {
        return Ok(out);
    }
    let solver = Dopri5::default();
    let mut fault: Option<TubeError> = None;
    let res = solver.integrate(
        |_t, y, dy| radial_rhs(chart, false, y, dy, &mut fault),
        0.0,
        &y0,
        rho_max,
        |step, y1| {
            out.push(RadialState::from_vec(step.t1(), y1));
            true
        },
    );
    match res {
        Ok(_) => {}
        Err(e) => return Err(fault.take().unwrap_or(e)),
    }
    for state in &out {
        chart.check_domain(&state.x)?;
        check_unit_speed(chart, state)?;
    }
    Ok(out)
}

/// Transported frame and both Jacobi fields at radius rho0.
pub fn transport_frame_and_jacobi(
    chart: &ChartMetric,
    start: &FrenetData,
    psi: f64,
    rho0: f64,
) -> Result<RadialState> {
    let states = radial_states(chart, start, psi, &[rho0], true)?;
    Ok(states[0])
}

/// Induced tube metric sampled from Jacobi inner products on an
/// n_s x n_psi grid and fitted with periodic bicubic splines. The curve's
/// s-range is treated as one period of the sampling grid.
///
/// With the polar profile data r(psi), phi(psi), the surface point of grid
/// node (i, j) is exp(r(psi_j) (cos phi N + sin phi B)) at gamma(s_i), so
/// E = <J_s, J_s>, F = phi' <J_s, J_phi>, G = r'^2 + phi'^2 <J_phi, J_phi>
/// (J_s is g-orthogonal to the radial velocity, and <J_phi, gamma'> = 0).
pub fn tube_metric_numeric(
    curve: &ParamCurve,
    profile: &TubeProfile,
    grid: (usize, usize),
) -> Result<InducedMetric2D> {
    let (n_s, n_psi) = grid;
    if n_s < 4 || n_psi < 4 {
        return Err(TubeError::Config(format!(
            "tube sampling grid must be at least 4x4, got {n_s}x{n_psi}"
        )));
    }
    let chart = &curve.chart;
    let table = curve.arclength_reparam(n_s.max(64))?;
    let total = table.total;
    let frames: Vec<FrenetData> = (0..n_s)
        .map(|i| curve.frame_at(&table, total * i as f64 / n_s as f64, 1e-8))
        .collect::<Result<_>>()?;
    let polar: Vec<[f64; 7]> = (0..n_psi)
        .map(|j| profile.polar_jet(std::f64::consts::TAU * j as f64 / n_psi as f64))
        .collect();
    let solver = Dopri5::default();
    let samples: Vec<(f64, f64, f64)> = (0..n_s * n_psi)
        .into_par_iter()
        .map(|node| -> Result<(f64, f64, f64)> {
            let (i, j) = (node / n_psi, node % n_psi);
            let [r, rp, _, cosphi, sinphi, phip, _] = polar[j];
            let phi = sinphi.atan2(cosphi);
            let state = run_radial(chart, &frames[i], phi, &[r], true, &solver)?
                .pop()
                .expect("one radial sample requested");
            let js = state.j_s();
            let jp = state.j_psi();
            let e = js[0] * js[0] + js[1] * js[1] + js[2] * js[2];
            let f = phip * (js[0] * jp[0] + js[1] * jp[1] + js[2] * jp[2]);
            let g = rp * rp + phip * phip * (jp[0] * jp[0] + jp[1] * jp[1] + jp[2] * jp[2]);
            Ok((e, f, g))
        })
        .collect::<Result<_>>()?;
    let e: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let f: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let g: Vec<f64> = samples.iter().map(|s| s.2).collect();
    Ok(InducedMetric2D::from_samples(total, n_s, n_psi, &e, &f, &g)?.with_meta(vec![
        ("chart".into(), chart.describe()),
        ("curve".into(), curve.name.clone()),
        ("profile".into(), profile.describe()),
        ("rtol".into(), format!("{:e}", solver.rtol)),
        ("atol".into(), format!("{:e}", solver.atol)),
    ]))
}

/// Induced tube metric for spines whose curvature environment does not vary
/// along the curve (see [`s_independence_certificate`]): one row of Jacobi
/// inner products is sampled at n_psi angles with a tight solver and
/// projected onto a trigonometric series, so the jet is smooth in psi and
/// has identically zero s-derivatives. A control row sampled at an
/// incommensurate arc length guards the assumption; tubes whose
/// coefficients genuinely vary in s belong to [`tube_metric_numeric`].
pub fn tube_metric_profile(
    curve: &ParamCurve,
    profile: &TubeProfile,
    n_psi: usize,
) -> Result<InducedMetric2D> {
    if n_psi < 16 {
        return Err(TubeError::Config(format!(
            "profile sampling needs at least 16 angles, got {n_psi}"
        )));
    }
    let chart = &curve.chart;
    let table = curve.arclength_reparam(64)?;
    let total = table.total;
    let polar: Vec<[f64; 7]> = (0..n_psi)
        .map(|j| profile.polar_jet(std::f64::consts::TAU * j as f64 / n_psi as f64))
        .collect();
    let solver = Dopri5::with_tol(1e-12, 1e-14);
    let row = |s0: f64| -> Result<Vec<(f64, f64, f64)>> {
        let frame = curve.frame_at(&table, s0, 1e-8)?;
        (0..n_psi)
            .into_par_iter()
            .map(|j| -> Result<(f64, f64, f64)> {
                let [r, rp, _, cosphi, sinphi, phip, _] = polar[j];
                let phi = sinphi.atan2(cosphi);
                let state = run_radial(chart, &frame, phi, &[r], true, &solver)?
                    .pop()
                    .expect("one radial sample requested");
                let js = state.j_s();
                let jp = state.j_psi();
                let e = js[0] * js[0] + js[1] * js[1] + js[2] * js[2];
                let f = phip * (js[0] * jp[0] + js[1] * jp[1] + js[2] * jp[2]);
                let g = rp * rp + phip * phip * (jp[0] * jp[0] + jp[1] * jp[1] + jp[2] * jp[2]);
                Ok((e, f, g))
            })
            .collect()
    };
    let base = row(0.0)?;
    // Golden-ratio fraction of the length: no resonance with closed spines.
    let control = row(total * 0.381_966_011_250_105)?;
    let mut spread: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for (a, b) in base.iter().zip(&control) {
        spread = spread.max((a.0 - b.0).abs()).max((a.1 - b.1).abs()).max((a.2 - b.2).abs());
        scale = scale.max(a.0.abs()).max(a.2.abs());
    }
    if spread > 1e-8 * scale {
        return Err(TubeError::Config(format!(
            "tube coefficients vary along the curve (spread {spread:.3e}); use tube_metric_numeric"
        )));
    }
    let tau = std::f64::consts::TAU;
    let e_fn = ScalarFn::periodic_fit(&base.iter().map(|t| t.0).collect::<Vec<_>>(), tau)?;
    let f_fn = ScalarFn::periodic_fit(&base.iter().map(|t| t.1).collect::<Vec<_>>(), tau)?;
    let g_fn = ScalarFn::periodic_fit(&base.iter().map(|t| t.2).collect::<Vec<_>>(), tau)?;
    let jet: JetFn = Arc::new(move |_s, psi| MetricJet {
        e: e_fn.eval(psi),
        f: f_fn.eval(psi),
        g: g_fn.eval(psi),
        de_dpsi: e_fn.deriv(psi),
        df_dpsi: f_fn.deriv(psi),
        dg_dpsi: g_fn.deriv(psi),
        ..Default::default()
    });
    let metric = InducedMetric2D::closed_form(jet, total, true).with_meta(vec![
        ("chart".into(), chart.describe()),
        ("curve".into(), curve.name.clone()),
        ("profile".into(), profile.describe()),
        ("backend".into(), format!("profile-fit({n_psi})")),
    ]);
    metric.validate_grid(4, 512)?;
    Ok(metric)
}

/// Evidence that curvature data along radial geodesics is the same at every
/// point of the base curve.
#[derive(Clone, Debug)]
pub struct SIndependenceReport {
    /// Per-sample estimates of the largest |d(sectional curvature)/ds| over
    /// the transported coordinate planes of paired radial geodesics.
    pub curvature_rate_samples: Vec<f64>,
    pub max_curvature_rate: f64,
    /// Largest coordinate-profile deviation between paired geodesics, taken
    /// over the coordinates that the curvature actually depends on.
    pub max_profile_deviation: f64,
    /// Indices of chart coordinates the sectional curvatures depend on.
    pub curvature_coordinates: Vec<usize>,
    pub tolerance: f64,
    pub verdict: bool,
}

fn coord_plane_curvatures(chart: &ChartMetric, x: &[f64; 3]) -> Result<[f64; 3]> {
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    Ok([
        chart.sectional_curvature(x, &axes[0], &axes[1])?,
        chart.sectional_curvature(x, &axes[0], &axes[2])?,
        chart.sectional_curvature(x, &axes[1], &axes[2])?,
    ])
}

/// Chart coordinates whose variation changes some sectional curvature,
/// detected by central differences at the probe points. Space forms have
/// none by construction.
fn curvature_coordinates(chart: &ChartMetric, probes: &[[f64; 3]]) -> Result<Vec<usize>> {
    if chart.space_form_k0().is_some() {
        return Ok(Vec::new());
    }
    let mut flagged = [false; 3];
    for p in probes {
        let base = coord_plane_curvatures(chart, p)?;
        for c in 0..3 {
            let h = 1e-3 * p[c].abs().max(1.0);
            for sgn in [-1.0, 1.0] {
                let mut q = *p;
                q[c] += sgn * h;
                if chart.check_domain(&q).is_err() {
                    continue;
                }
                let kq = coord_plane_curvatures(chart, &q)?;
                if (0..3).any(|m| (kq[m] - base[m]).abs() / h > 1e-4) {
                    flagged[c] = true;
                }
            }
        }
    }
    Ok((0..3).filter(|&c| flagged[c]).collect())
}

/// Launch paired radial geodesics from arc lengths s and s + delta
/// (delta = 1e-3 of the curve length) at `samples` spread-out (s, psi)
/// combinations and compare both the curvature-carrying coordinate profiles
/// and the sectional curvatures of the transported planes.
pub fn s_independence_certificate(
    curve: &ParamCurve,
    rho0: f64,
    samples: usize,
    tolerance: f64,
) -> Result<SIndependenceReport> {
    if samples == 0 {
        return Err(TubeError::Config("certificate needs at least one sample".into()));
    }
    let chart = &curve.chart;
    let table = curve.arclength_reparam(128)?;
    let total = table.total;
    let delta = 1e-3 * total;
    let probes: Vec<[f64; 3]> = (0..4)
        .map(|k| {
            let t = curve.t_range.0 + curve.period() * (0.125 + 0.25 * k as f64);
            curve.pos(t)
        })
        .collect();
    let coords = curvature_coordinates(chart, &probes)?;
    let solver = Dopri5::with_tol(1e-12, 1e-14);
    let rhos: Vec<f64> = (1..=16).map(|m| rho0 * m as f64 / 16.0).collect();
    let span = if curve.closed { total } else { total - delta };
    let mut rate_samples = Vec::with_capacity(samples);
    let mut profile_dev: f64 = 0.0;
    for k in 0..samples {
        let s0 = span * k as f64 / samples as f64;
        let psi = std::f64::consts::TAU * ((k as f64) * 0.618_033_988_749_894_9).fract();
        let fa = curve.frame_at(&table, s0, 1e-8)?;
        let fb = curve.frame_at(&table, s0 + delta, 1e-8)?;
        let sa = run_radial(chart, &fa, psi, &rhos, false, &solver)?;
        let sb = run_radial(chart, &fb, psi, &rhos, false, &solver)?;
        let mut worst_rate: f64 = 0.0;
        for (a, b) in sa.iter().zip(&sb) {
            for &c in &coords {
                profile_dev = profile_dev.max((a.x[c] - b.x[c]).abs());
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                let ka = chart.sectional_curvature(&a.x, &a.frame[p], &a.frame[q])?;
                let kb = chart.sectional_curvature(&b.x, &b.frame[p], &b.frame[q])?;
                worst_rate = worst_rate.max((kb - ka).abs() / delta);
            }
        }
        rate_samples.push(worst_rate);
    }
    let max_rate = rate_samples.iter().cloned().fold(0.0, f64::max);
    Ok(SIndependenceReport {
        curvature_rate_samples: rate_samples,
        max_curvature_rate: max_rate,
        max_profile_deviation: profile_dev,
        curvature_coordinates: coords,
        tolerance,
        verdict: max_rate < tolerance && profile_dev < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaceform::{circular_tube_metric, ScalarFn, SpaceFormTag};
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};

    fn frame_of(curve: &ParamCurve, s: f64) -> FrenetData {
        let table = curve.arclength_reparam(64).unwrap();
        curve.frame_at(&table, s, 1e-8).unwrap()
    }

    #[test]
    fn euclidean_radial_geodesics_are_straight_lines() {
        let curve = ParamCurve::circle(2.0).unwrap();
        let start = frame_of(&curve, 1.3);
        let psi = 0.8;
        let states = radial_geodesic(&curve.chart, &start, psi, 2.0).unwrap();
        assert!(states.len() > 2);
        let (sp, cp) = psi.sin_cos();
        for st in &states {
            for i in 0..3 {
                let want = start.x[i] + st.rho * (cp * start.n_vec[i] + sp * start.b_vec[i]);
                assert_relative_eq!(st.x[i], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn flat_jacobi_components_are_affine_and_match_tube_formula() {
        let curve = ParamCurve::helix(1.0, 1.0).unwrap(); // k1 = k2 = 1/2
        let start = frame_of(&curve, 0.9);
        let psi = 2.1;
        for &rho in &[0.3, 0.6, 1.2] {
            let st = transport_frame_and_jacobi(&curve.chart, &start, psi, rho).unwrap();
            let (sp, cp) = psi.sin_cos();
            let expect = [
                1.0 - start.k1 * rho * cp,
                -start.k2 * rho * sp,
                start.k2 * rho * cp,
                0.0,
                -rho * sp,
                rho * cp,
            ];
            for (c, want) in st.jacobi[..6].iter().zip(expect) {
                assert_relative_eq!(*c, want, epsilon = 1e-10);
            }
        }
        // Affinity: the second difference over equally spaced radii vanishes.
        let states = radial_states(&curve.chart, &start, psi, &[0.4, 0.8, 1.2], true).unwrap();
        for c in 0..6 {
            let second = states[2].jacobi[c] - 2.0 * states[1].jacobi[c] + states[0].jacobi[c];
            assert!(second.abs() < 1e-10, "component {c} not affine: {second:.3e}");
        }
    }

    #[test]
    fn sphere_chart_jacobi_matches_space_form_closed_form() {
        let curve = ParamCurve::hopf(5.0, 2.0, PI / 4.0).unwrap();
        let start = frame_of(&curve, 0.0);
        let rho0 = 0.2;
        let oracle = circular_tube_metric(
            SpaceFormTag::SPHERICAL,
            ScalarFn::constant(start.k1),
            ScalarFn::constant(start.k2),
            rho0,
            TAU,
        )
        .unwrap();
        for &psi in &[0.0, 0.7, 2.4, 4.9] {
            let st = transport_frame_and_jacobi(&curve.chart, &start, psi, rho0).unwrap();
            let js = st.j_s();
            let jp = st.j_psi();
            let e = js.iter().map(|v| v * v).sum::<f64>();
            let f = js.iter().zip(&jp).map(|(a, b)| a * b).sum::<f64>();
            let g = jp.iter().map(|v| v * v).sum::<f64>();
            let (eo, fo, go) = oracle.coeffs(0.0, psi);
            assert_relative_eq!(e, eo, epsilon = 1e-6);
            assert_relative_eq!(f, fo, epsilon = 1e-6);
            assert_relative_eq!(g, go, epsilon = 1e-6);
            // On a space form the angular Jacobi field has no tangential
            // component at all.
            assert!(st.jacobi[3].abs() < 1e-9, "t_psi = {}", st.jacobi[3]);
        }
    }

    #[test]
    fn sphere_radial_geodesic_reaches_conjugate_point() {
        let curve = ParamCurve::hopf(5.0, 2.0, PI / 4.0).unwrap();
        let start = frame_of(&curve, 2.0);
        let rhos = [0.5, PI / 2.0, 2.5, PI];
        let states = radial_states(&curve.chart, &start, 0.7, &rhos, true).unwrap();
        for st in &states {
            let jp = st.j_psi();
            let norm = (jp[0] * jp[0] + jp[1] * jp[1] + jp[2] * jp[2]).sqrt();
            assert_relative_eq!(norm, st.rho.sin(), epsilon = 1e-7);
        }
    }

    #[test]
    fn transported_frame_stays_orthonormal_and_velocity_stays_in_plane() {
        let curve = ParamCurve::ellipsoid_knot(1.0, 1.5, 3.0, 2.0, PI / 4.0).unwrap();
        let start = frame_of(&curve, 5.0);
        let psi = 1.1;
        let states =
            radial_states(&curve.chart, &start, psi, &[0.1, 0.2, 0.3], true).unwrap();
        let chart = &curve.chart;
        let (sp, cp) = psi.sin_cos();
        for st in &states {
            for a in 0..3 {
                for b in a..3 {
                    let want = if a == b { 1.0 } else { 0.0 };
                    let got = chart.inner(&st.x, &st.frame[a], &st.frame[b]).unwrap();
                    assert!(
                        (got - want).abs() < 1e-9,
                        "gram[{a}][{b}] = {got} at rho {}",
                        st.rho
                    );
                }
            }
            for i in 0..3 {
                let recon = cp * st.frame[1][i] + sp * st.frame[2][i];
                assert!((st.xdot[i] - recon).abs() < 1e-9);
            }
            // The tangential component of the angular Jacobi field starts
            // with two vanishing derivatives but picks up a third-order
            // contribution through the off-diagonal Ricci term
            // Ric(J_psi', T) of this chart, so it grows like rho^3 rather
            // than staying at zero.
            assert!(
                st.jacobi[3].abs() < 0.05 * st.rho.powi(3),
                "t_psi = {} at rho {}",
                st.jacobi[3],
                st.rho
            );
        }
        // The cubic growth is genuine curvature coupling, not integrator
        // noise.
        assert!(states[2].jacobi[3].abs() > 1e-6);
    }

    #[test]
    fn jacobi_fields_match_finite_difference_geodesics() {
        // Independent oracle: differentiate whole radial geodesics with
        // respect to psi and s by central differences and project onto the
        // transported frame. This cross-checks the curvature coupling
        // without using the Riemann contraction at all.
        let curve = ParamCurve::ellipsoid_knot(1.0, 1.5, 3.0, 2.0, PI / 4.0).unwrap();
        let table = curve.arclength_reparam(64).unwrap();
        let chart = &curve.chart;
        let (s0, psi, rho) = (2.0, 1.1, 0.3);
        let center = curve.frame_at(&table, s0, 1e-8).unwrap();
        let st = transport_frame_and_jacobi(chart, &center, psi, rho).unwrap();
        let h = 1e-4;
        let endpoint = |fr: &FrenetData, ang: f64| -> [f64; 3] {
            radial_states(chart, fr, ang, &[rho], false).unwrap()[0].x
        };
        let project = |jfd: [f64; 3]| -> [f64; 3] {
            let mut out = [0.0; 3];
            for (a, slot) in out.iter_mut().enumerate() {
                *slot = chart.inner(&st.x, &jfd, &st.frame[a]).unwrap();
            }
            out
        };
        let diff = |xp: [f64; 3], xm: [f64; 3]| {
            [
                (xp[0] - xm[0]) / (2.0 * h),
                (xp[1] - xm[1]) / (2.0 * h),
                (xp[2] - xm[2]) / (2.0 * h),
            ]
        };
        let jpsi_fd = project(diff(endpoint(&center, psi + h), endpoint(&center, psi - h)));
        for (got, want) in st.j_psi().iter().zip(jpsi_fd) {
            assert_relative_eq!(*got, want, epsilon = 1e-6);
        }
        let fp = curve.frame_at(&table, s0 + h, 1e-8).unwrap();
        let fm = curve.frame_at(&table, s0 - h, 1e-8).unwrap();
        let js_fd = project(diff(endpoint(&fp, psi), endpoint(&fm, psi)));
        for (got, want) in st.j_s().iter().zip(js_fd) {
            assert_relative_eq!(*got, want, epsilon = 1e-6);
        }
    }

    #[test]
    fn knot_radial_profiles_do_not_depend_on_the_start_point() {
        let curve = ParamCurve::ellipsoid_knot(1.0, 1.5, 3.0, 2.0, PI / 4.0).unwrap();
        let table = curve.arclength_reparam(64).unwrap();
        let rhos: Vec<f64> = (1..=10).map(|m| 0.03 * m as f64).collect();
        let fa = curve.frame_at(&table, 0.0, 1e-8).unwrap();
        let fb = curve.frame_at(&table, 1.0, 1e-8).unwrap();
        let sa = radial_states(&curve.chart, &fa, 0.7, &rhos, false).unwrap();
        let sb = radial_states(&curve.chart, &fb, 0.7, &rhos, false).unwrap();
        for (a, b) in sa.iter().zip(&sb) {
            assert!((a.x[0] - b.x[0]).abs() < 1e-9, "eta profiles differ");
            for i in 0..3 {
                assert!((a.xdot[i] - b.xdot[i]).abs() < 1e-9, "velocity profiles differ");
            }
        }
    }

    #[test]
    fn small_radius_angular_response_is_unit() {
        let curve = ParamCurve::ellipsoid_knot(1.0, 1.5, 3.0, 2.0, PI / 4.0).unwrap();
        let start = frame_of(&curve, 2.0);
        let rho0 = 1e-4;
        let st = transport_frame_and_jacobi(&curve.chart, &start, 0.3, rho0).unwrap();
        let jp = st.j_psi();
        let g = jp.iter().map(|v| v * v).sum::<f64>();
        assert_relative_eq!(g / (rho0 * rho0), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn torus_tube_metric_matches_closed_form() {
        let curve = ParamCurve::circle(2.0).unwrap();
        let profile = TubeProfile::circular(1.0).unwrap();
        let m = tube_metric_numeric(&curve, &profile, (32, 32)).unwrap();
        assert!(m.s_independent);
        assert_relative_eq!(m.s_period, 4.0 * PI, epsilon = 1e-10);
        for j in 0..32 {
            let psi = TAU * j as f64 / 32.0;
            let (e, f, g) = m.coeffs(0.0, psi);
            assert_relative_eq!(e, (1.0 - 0.5 * psi.cos()).powi(2), epsilon = 1e-8);
            assert!(f.abs() < 1e-8);
            assert_relative_eq!(g, 1.0, epsilon = 1e-8);
        }
        // Off-node values go through the spline fit.
        let (e, _, _) = m.coeffs(1.234, 0.4321);
        assert_relative_eq!(e, (1.0 - 0.5 * 0.4321f64.cos()).powi(2), epsilon = 1e-4);
    }

    #[test]
    fn sphere_tube_metric_matches_closed_form_on_grid() {
        let curve = ParamCurve::hopf(5.0, 2.0, PI / 4.0).unwrap();
        let start = frame_of(&curve, 0.0);
        let profile = TubeProfile::circular(0.2).unwrap();
        let m = tube_metric_numeric(&curve, &profile, (16, 16)).unwrap();
        let oracle = circular_tube_metric(
            SpaceFormTag::SPHERICAL,
            ScalarFn::constant(start.k1),
            ScalarFn::constant(start.k2),
            0.2,
            m.s_period,
        )
        .unwrap();
        assert!(m.s_independent);
        for j in 0..16 {
            let psi = TAU * j as f64 / 16.0;
            let (e, f, g) = m.coeffs(0.0, psi);
            let (eo, fo, go) = oracle.coeffs(0.0, psi);
            assert_relative_eq!(e, eo, epsilon = 1e-6);
            assert_relative_eq!(f, fo, epsilon = 1e-6);
            assert_relative_eq!(g, go, epsilon = 1e-6);
        }
    }

    #[test]
    fn knot_tube_metric_is_s_independent() {
        let curve = ParamCurve::ellipsoid_knot(1.0, 1.5, 3.0, 2.0, PI / 4.0).unwrap();
        let profile = TubeProfile::circular(0.2).unwrap();
        let m = tube_metric_numeric(&curve, &profile, (16, 16)).unwrap();
        assert!(m.s_independent, "sample spread {}", m.s_sample_spread);
        assert!(m.s_sample_spread < 1e-8);
    }

    #[test]
    fn profile_fit_metric_matches_closed_form_on_the_sphere_tube() {
        let curve = ParamCurve::hopf(5.0, 2.0, PI / 4.0).unwrap();
        let start = frame_of(&curve, 0.0);
        let profile = TubeProfile::circular(0.2).unwrap();
        let m = tube_metric_profile(&curve, &profile, 64).unwrap();
        let oracle = circular_tube_metric(
            SpaceFormTag::SPHERICAL,
            ScalarFn::constant(start.k1),
            ScalarFn::constant(start.k2),
            0.2,
            m.s_period,
        )
        .unwrap();
        assert!(m.s_independent);
        for k in 0..40 {
            let psi = TAU * (k as f64 * 0.377).fract();
            let a = m.jet(1.7, psi);
            let b = oracle.jet(1.7, psi);
            assert_relative_eq!(a.e, b.e, epsilon = 1e-9);
            assert_relative_eq!(a.f, b.f, epsilon = 1e-9);
            assert_relative_eq!(a.g, b.g, epsilon = 1e-9);
            assert_relative_eq!(a.de_dpsi, b.de_dpsi, epsilon = 1e-8);
            assert_eq!(a.de_ds, 0.0);
        }
    }

    #[test]
    fn profile_fit_agrees_with_grid_sampling_on_the_knot_tube() {
        let curve = ParamCurve::ellipsoid_knot(1.0, 1.5, 3.0, 2.0, PI / 4.0).unwrap();
        let profile = TubeProfile::circular(0.3).unwrap();
        let fit = tube_metric_profile(&curve, &profile, 64).unwrap();
        let grid = tube_metric_numeric(&curve, &profile, (8, 64)).unwrap();
        assert!(fit.s_independent);
        for j in 0..64 {
            let psi = TAU * j as f64 / 64.0;
            let (e, f, g) = fit.coeffs(0.0, psi);
            let (eo, fo, go) = grid.coeffs(0.0, psi);
            assert_relative_eq!(e, eo, epsilon = 1e-8);
            assert_relative_eq!(f, fo, epsilon = 1e-8);
            assert_relative_eq!(g, go, epsilon = 1e-8);
        }
    }

    #[test]
    fn profile_fit_rejects_tubes_that_vary_along_the_curve() {
        let curve = ParamCurve::ellipse(2.0, 2.5).unwrap();
        let profile = TubeProfile::circular(1.0).unwrap();
        let err = tube_metric_profile(&curve, &profile, 32).unwrap_err();
        assert!(matches!(err, TubeError::Config(_)));
        assert!(err.to_string().contains("vary along the curve"), "{err}");
    }

    #[test]
    fn oversized_tube_folds_without_going_indefinite() {
        // An immersed tube's first fundamental form stays positive
        // semidefinite even past the fold radius: E = (1 - k1 rho cos psi)^2
        // only touches zero on the fold line, so the node degeneracy check
        // can fire only when a grid node lands exactly there. The closed-form
        // constructor rejects such radii analytically; the sampled one keeps
        // the fold.
        let curve = ParamCurve::circle(2.0).unwrap();
        let profile = TubeProfile::circular(2.5).unwrap(); // k1 rho0 = 1.25
        let m = tube_metric_numeric(&curve, &profile, (16, 32)).unwrap();
        let mut min_e = f64::MAX;
        for j in 0..512 {
            let psi = TAU * j as f64 / 512.0;
            min_e = min_e.min(m.coeffs(0.0, psi).0);
        }
        assert!(min_e < 1e-3, "expected a fold dip, min E = {min_e:.3e}");
    }

    #[test]
    fn certificate_accepts_flat_space_and_the_knot() {
        let flat = ParamCurve::circle(2.0).unwrap();
        let report = s_independence_certificate(&flat, 0.5, 3, 1e-7).unwrap();
        assert!(report.verdict, "flat report: {report:?}");
        assert!(report.curvature_coordinates.is_empty());

        let knot = ParamCurve::ellipsoid_knot(1.0, 1.5, 3.0, 2.0, PI / 4.0).unwrap();
        let report = s_independence_certificate(&knot, 0.2, 3, 1e-7).unwrap();
        assert!(report.verdict, "knot report: {report:?}");
        assert_eq!(report.curvature_coordinates, vec![0]);
    }

    #[test]
    fn certificate_rejects_a_curve_with_varying_latitude() {
        use std::sync::Arc;
        let chart = ChartMetric::ellipsoid3(1.0, 1.5).unwrap();
        let curve = ParamCurve::new(
            chart,
            Arc::new(|t: f64| [PI / 4.0 + 0.2 * t.sin(), 3.0 * t, 2.0 * t]),
            Arc::new(|t: f64| [0.2 * t.cos(), 3.0, 2.0]),
            (0.0, TAU),
            true,
        )
        .unwrap();
        let report = s_independence_certificate(&curve, 0.1, 3, 1e-7).unwrap();
        assert!(!report.verdict);
        assert!(report.max_curvature_rate > 1e-4 || report.max_profile_deviation > 1e-4);
    }

    #[test]
    fn leaving_the_chart_domain_is_reported() {
        // A radial geodesic in the half-space model aimed straight down hits
        // z = 0 in finite coordinate but infinite metric length; aim along a
        // horocycle-ish direction with a long reach instead and check that
        // exceeding the domain errors rather than spinning.
        let chart = ChartMetric::ellipsoid3(1.0, 1.5).unwrap();
        let curve = ParamCurve::ellipsoid_knot(1.0, 1.5, 3.0, 2.0, PI / 4.0).unwrap();
        let start = frame_of(&curve, 0.0);
        // psi = 0 points along +eta; far enough to cross eta = pi/2.
        let out = radial_geodesic(&chart, &start, 0.0, 3.0);
        match out {
            Err(TubeError::LeftChartDomain { .. }) | Err(TubeError::StepFailure { .. }) => {}
            other => panic!("expected domain exit, got {other:?}"),
        }
    }
}
