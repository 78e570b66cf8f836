//! Poincare sections of the tube geodesic flow: the ellipse-tube metric,
//! crossing detection on the plane s = 0 mod L, and per-orbit regularity
//! scoring.
//!
//! A section point is an upward (p_s > 0) intersection of an orbit with the
//! hyperplane s = 0 mod L, recorded in the (psi, p_psi) plane. For an
//! integrable flow the points of one orbit fall on a closed curve; the
//! regularity score fits such a curve and reports the RMS misfit.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::curve::ParamCurve;
use crate::error::{Result, TubeError};
use crate::flow::{hamilton_rhs, DET_FLOOR};
use crate::metric2d::InducedMetric2D;
use crate::ode::Dopri5;
use crate::spaceform::{circular_tube_metric, ScalarFn, SpaceFormTag};

/// Default classification threshold as a fraction of the momentum scale.
pub const REGULAR_THRESHOLD_FRACTION: f64 = 1e-3;

/// Default Fourier order of the fitted orbit curve.
pub const DEFAULT_FOURIER_ORDER: usize = 24;

/// Planar curvature of the ellipse (a cos t, b sin t).
fn ellipse_kappa(a: f64, b: f64, t: f64) -> f64 {
    let w = a * a * t.sin().powi(2) + b * b * t.cos().powi(2);
    a * b / (w * w.sqrt())
}

/// Induced metric of the circular tube of radius rho0 about the ellipse with
/// the given semi-axes: E = (1 - k1(s) rho0 cos psi)^2, F = 0, G = rho0^2,
/// with k1 the ellipse's arc-length curvature and s-period the perimeter.
///
/// k1(s) is represented by a Fourier series projected once at construction;
/// the series converges geometrically because the curvature is analytic and
/// periodic in s, so the flow sees a smooth closed-form metric.
pub fn ellipse_tube_metric(a_semi: f64, b_semi: f64, rho0: f64) -> Result<InducedMetric2D> {
    if !(a_semi > 0.0) || !(b_semi > 0.0) || !(rho0 > 0.0) {
        return Err(TubeError::Config(format!(
            "ellipse tube needs positive a, b, rho0; got {a_semi}, {b_semi}, {rho0}"
        )));
    }
    // Curvature extremes of the ellipse sit on the axes.
    let k1_max = (a_semi / (b_semi * b_semi)).max(b_semi / (a_semi * a_semi));
    if rho0 * k1_max >= 1.0 {
        return Err(TubeError::TubeDegenerate { s: 0.0, psi: 0.0, det: 0.0 });
    }
    let curve = ParamCurve::ellipse(a_semi, b_semi)?;
    let name = curve.name.clone();
    let table = curve.arclength_reparam(1024)?;
    let total = table.total;
    // Project kappa(t(s)) on a Fourier basis; uniform sampling is
    // spectrally accurate for periodic integrands.
    let n = 4096usize;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let s = total * i as f64 / n as f64;
            ellipse_kappa(a_semi, b_semi, table.t_of_s(s))
        })
        .collect();
    let k1 = ScalarFn::periodic_fit(&samples, total)?;
    let metric = circular_tube_metric(SpaceFormTag::FLAT, k1, ScalarFn::constant(0.0), rho0, total)?;
    Ok(metric.with_meta(vec![
        ("curve".to_string(), name),
        ("profile".to_string(), format!("circular(rho0={rho0})")),
    ]))
}

/// Where and how often to cut the flow.
#[derive(Clone, Debug)]
pub struct SectionConfig {
    /// Crossings are recorded at s = 0 mod section_period.
    pub section_period: f64,
    /// Required sign of p_s at a recorded crossing (+1 for upward).
    pub direction: f64,
    /// Crossings recorded per seed.
    pub n_crossings: usize,
    /// (psi0, p_psi0) at s = 0; p_s > 0 is fixed by H = 1/2.
    pub seeds: Vec<(f64, f64)>,
    /// Bound on |s mod L| at a reported crossing.
    pub crossing_tol: f64,
    /// Flow integration tolerance.
    pub tol: f64,
}

impl SectionConfig {
    pub fn new(section_period: f64, n_crossings: usize, seeds: Vec<(f64, f64)>) -> Self {
        SectionConfig {
            section_period,
            direction: 1.0,
            n_crossings,
            seeds,
            crossing_tol: 1e-10,
            tol: 1e-12,
        }
    }

    /// Stock seed grid: psi0 = 0, p_psi0 in {-0.9, -0.7, ..., 0.9}.
    pub fn stock_seed_grid() -> Vec<(f64, f64)> {
        (0..10).map(|i| (0.0, -0.9 + 0.2 * i as f64)).collect()
    }

    /// Seeds hugging the separatrix of the circular-tube limit, which
    /// passes through the unstable inner equator (psi = 0, p_psi = 0).
    pub fn near_separatrix_seeds() -> Vec<(f64, f64)> {
        vec![(TAU - 0.05, 0.02), (TAU - 0.05, -0.02), (TAU - 0.05, 0.05), (TAU - 0.05, -0.05)]
    }
}

/// One recorded crossing of the section plane.
#[derive(Clone, Copy, Debug)]
pub struct SectionPoint {
    /// psi at the crossing, reduced mod 2 pi.
    pub psi: f64,
    pub p_psi: f64,
    /// p_s at the crossing; sign matches the configured direction.
    pub p_s: f64,
    /// Hamiltonian at the crossing.
    pub h: f64,
    /// Flow parameter of the crossing.
    pub tau: f64,
    /// |s - kL| left after crossing refinement.
    pub s_residual: f64,
    pub seed_index: usize,
    pub crossing_index: usize,
}

/// Section points of all seeds plus per-seed failure notes.
#[derive(Clone, Debug)]
pub struct SectionRun {
    /// Seed-major, crossing-minor order.
    pub points: Vec<SectionPoint>,
    /// (seed_index, reason) for seeds that stopped before n_crossings;
    /// their recorded points remain in `points`.
    pub failures: Vec<(usize, String)>,
}

/// Positive-direction p_s with H = 1/2 at (s=0, psi0) given p_psi0.
fn solve_seed_ps(metric: &InducedMetric2D, psi0: f64, p_psi0: f64, direction: f64) -> Result<f64> {
    let (e, f, g) = metric.coeffs(0.0, psi0);
    let det = e * g - f * f;
    if det <= DET_FLOOR {
        return Err(TubeError::DegenerateMetric { point: [0.0, psi0, 0.0] });
    }
    // H = 1/2 is a quadratic in p_s with inverse-metric coefficients.
    let (gss, gsp, gpp) = (g / det, -f / det, e / det);
    let b = gsp * p_psi0;
    let c = gpp * p_psi0 * p_psi0 - 1.0;
    let disc = b * b - gss * c;
    if disc < 0.0 {
        return Err(TubeError::SeedInfeasible { psi0, p_psi0 });
    }
    let root = if direction >= 0.0 { (-b + disc.sqrt()) / gss } else { (-b - disc.sqrt()) / gss };
    if root * direction <= 0.0 {
        return Err(TubeError::SeedInfeasible { psi0, p_psi0 });
    }
    Ok(root)
}

fn sdot_at(metric: &InducedMetric2D, y: &[f64]) -> f64 {
    let (e, f, g) = metric.coeffs(y[0], y[1]);
    let det = e * g - f * f;
    (g * y[2] - f * y[3]) / det
}

/// Locate s(tau) = level inside a bracketing dense step by safeguarded
/// Newton on the interpolant, to |s - level| < tol.
fn refine_crossing(
    metric: &InducedMetric2D,
    step: &crate::ode::DenseStep,
    mut lo: f64,
    mut hi: f64,
    level: f64,
    tol: f64,
    y: &mut [f64],
) -> Option<f64> {
    step.eval(lo, y);
    let mut flo = y[0] - level;
    step.eval(hi, y);
    let fhi = y[0] - level;
    if flo == 0.0 {
        step.eval(lo, y);
        return Some(lo);
    }
    if flo * fhi > 0.0 {
        return None;
    }
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..80 {
        step.eval(tau, y);
        let ft = y[0] - level;
        if ft.abs() < tol {
            return Some(tau);
        }
        if flo * ft <= 0.0 {
            hi = tau;
        } else {
            lo = tau;
            flo = ft;
        }
        let sd = sdot_at(metric, y);
        let newton = tau - ft / sd;
        tau = if sd.is_finite() && sd != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < f64::EPSILON * tau.abs().max(1.0) {
            break;
        }
    }
    step.eval(tau, y);
    if (y[0] - level).abs() < tol {
        Some(tau)
    } else {
        None
    }
}

fn section_one_seed(
    metric: &InducedMetric2D,
    config: &SectionConfig,
    seed_index: usize,
    psi0: f64,
    p_psi0: f64,
    ps0: f64,
) -> (Vec<SectionPoint>, Option<String>) {
    let ell = config.section_period;
    let solver = Dopri5 {
        rtol: 0.1 * config.tol,
        atol: 1e-3 * config.tol,
        ..Dopri5::default()
    };
    let budget = 50.0 * ell * (config.n_crossings + 4) as f64;
    let mut points: Vec<SectionPoint> = Vec::with_capacity(config.n_crossings);
    let mut fault: Option<TubeError> = None;
    let mut y_cross = vec![0.0; 4];
    let mut last_tau = 0.0f64;
    let y0 = [0.0, psi0, ps0, p_psi0];
    let run = solver.integrate(
        |_t, y, dy| {
            if let Err(err) = hamilton_rhs(metric, y, dy) {
                if fault.is_none() {
                    fault = Some(err);
                }
                dy.fill(f64::NAN);
            }
        },
        0.0,
        &y0,
        budget,
        |step, _y_end| {
            // Scan the step in eighths for sign changes of s - kL; steps are
            // short so each subinterval holds at most one crossing.
            let mut sa = {
                step.eval_theta(0.0, &mut y_cross);
                y_cross[0]
            };
            let mut ta = step.t0;
            for part in 1..=8 {
                let tb = step.t0 + step.h * part as f64 / 8.0;
                step.eval(tb, &mut y_cross);
                let sb = y_cross[0];
                let (klo, khi) = if sa <= sb {
                    ((sa / ell).ceil() as i64, (sb / ell).floor() as i64)
                } else {
                    ((sb / ell).ceil() as i64, (sa / ell).floor() as i64)
                };
                for k in klo..=khi {
                    let level = k as f64 * ell;
                    if let Some(tau) = refine_crossing(
                        metric,
                        step,
                        ta,
                        tb,
                        level,
                        config.crossing_tol,
                        &mut y_cross,
                    ) {
                        // Skip the seed's own tau = 0 touch of the plane and
                        // re-detections on subinterval boundaries.
                        if tau <= 1e-12 || tau - last_tau < 1e-9 {
                            continue;
                        }
                        last_tau = tau;
                        if y_cross[2] * config.direction > 0.0 {
                            let (e, f, g) = metric.coeffs(y_cross[0], y_cross[1]);
                            let det = e * g - f * f;
                            let h = 0.5
                                * (g * y_cross[2] * y_cross[2] - 2.0 * f * y_cross[2] * y_cross[3]
                                    + e * y_cross[3] * y_cross[3])
                                / det;
                            points.push(SectionPoint {
                                psi: y_cross[1].rem_euclid(TAU),
                                p_psi: y_cross[3],
                                p_s: y_cross[2],
                                h,
                                tau,
                                s_residual: (y_cross[0] - level).abs(),
                                seed_index,
                                crossing_index: points.len(),
                            });
                            if points.len() >= config.n_crossings {
                                return false;
                            }
                        }
                    }
                }
                sa = sb;
                ta = tb;
            }
            true
        },
    );
    let note = if let Some(err) = fault {
        Some(err.to_string())
    } else if let Err(err) = run {
        Some(err.to_string())
    } else if points.len() < config.n_crossings {
        Some(format!(
            "budget {budget:.1} exhausted after {} of {} crossings",
            points.len(),
            config.n_crossings
        ))
    } else {
        None
    };
    (points, note)
}

/// Record the Poincare section of every configured seed.
///
/// Seeds run concurrently; output is seed-major, crossing-minor and
/// independent of the thread schedule. A seed whose integration fails keeps
/// its recorded points and contributes a failure note.
pub fn section(metric: &InducedMetric2D, config: &SectionConfig) -> Result<SectionRun> {
    if config.n_crossings == 0 {
        return Err(TubeError::Config("n_crossings must be at least 1".to_string()));
    }
    if !(config.section_period > 0.0) {
        return Err(TubeError::Config(format!(
            "section_period must be positive, got {}",
            config.section_period
        )));
    }
    // Seed feasibility is a config error and fails the whole call.
    let mut seeds_ps = Vec::with_capacity(config.seeds.len());
    for &(psi0, p_psi0) in &config.seeds {
        seeds_ps.push(solve_seed_ps(metric, psi0, p_psi0, config.direction)?);
    }
    let per_seed: Vec<(Vec<SectionPoint>, Option<String>)> = config
        .seeds
        .par_iter()
        .zip(seeds_ps.par_iter())
        .enumerate()
        .map(|(i, (&(psi0, p_psi0), &ps0))| {
            section_one_seed(metric, config, i, psi0, p_psi0, ps0)
        })
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (i, (pts, note)) in per_seed.into_iter().enumerate() {
        points.extend(pts);
        if let Some(reason) = note {
            failures.push((i, reason));
        }
    }
    Ok(SectionRun { points, failures })
}

impl SectionRun {
    /// Write crossings as CSV with '#'-prefixed header lines.
    pub fn to_csv(&self, path: &Path, meta: &[(String, String)]) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| TubeError::io(path.display().to_string(), e))?;
        let mut out = std::io::BufWriter::new(file);
        let werr = |e: std::io::Error| TubeError::io(path.display().to_string(), e);
        for (k, v) in meta {
            writeln!(out, "# {k}: {v}").map_err(werr)?;
        }
        for (seed, reason) in &self.failures {
            writeln!(out, "# partial seed {seed}: {reason}").map_err(werr)?;
        }
        writeln!(out, "seed_index,crossing_index,psi,p_psi,p_s,H").map_err(werr)?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
                p.seed_index, p.crossing_index, p.psi, p.p_psi, p.p_s, p.h
            )
            .map_err(werr)?;
        }
        Ok(())
    }
}

/// Verdict on one orbit's section points.
#[derive(Clone, Copy, Debug)]
pub struct OrbitRegularity {
    pub seed_index: usize,
    /// RMS misfit of the points against a fitted smooth closed curve.
    pub residual: f64,
    /// Classification threshold the verdict used.
    pub threshold: f64,
    /// True when residual < threshold.
    pub regular: bool,
}

/// Least-squares Fourier fit values = c0 + sum_m (a_m cos m ang + b_m sin m ang)
/// evaluated back at the sample angles; returns the fitted values.
fn fourier_fit(angles: &[f64], values: &[f64], order: usize) -> Vec<f64> {
    let n = angles.len();
    let order = order.min((n - 1) / 4);
    let cols = 2 * order + 1;
    let mut a = DMatrix::zeros(n, cols);
    for (i, &ang) in angles.iter().enumerate() {
        a[(i, 0)] = 1.0;
        for m in 1..=order {
            a[(i, 2 * m - 1)] = (m as f64 * ang).cos();
            a[(i, 2 * m)] = (m as f64 * ang).sin();
        }
    }
    let rhs = DVector::from_column_slice(values);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(cols));
    let fitted = a * coef;
    fitted.as_slice().to_vec()
}

/// Fit one orbit and return its RMS misfit in momentum units.
fn orbit_residual(psi: &[f64], p: &[f64], order: usize) -> f64 {
    let n = psi.len() as f64;
    let mean_p: f64 = p.iter().sum::<f64>() / n;
    // Circular mean of psi respects the 2 pi wrap.
    let (cbar, sbar) = psi
        .iter()
        .fold((0.0, 0.0), |(c, s), &v| (c + v.cos(), s + v.sin()));
    let mean_psi = sbar.atan2(cbar);
    let dev_psi: Vec<f64> = psi
        .iter()
        .map(|&v| {
            let mut d = v - mean_psi;
            while d > std::f64::consts::PI {
                d -= TAU;
            }
            while d < -std::f64::consts::PI {
                d += TAU;
            }
            d
        })
        .collect();
    let dev_p: Vec<f64> = p.iter().map(|&v| v - mean_p).collect();
    let sd = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    let (sig_psi, sig_p) = (sd(&dev_psi).max(1e-12), sd(&dev_p).max(1e-12));
    if sd(&dev_psi) < 1e-12 && sd(&dev_p) < 1e-12 {
        return 0.0;
    }
    // Ring test in whitened coordinates: a closed oval keeps a hole around
    // its centroid, a graph-type orbit passes through it.
    let radii: Vec<f64> = dev_psi
        .iter()
        .zip(&dev_p)
        .map(|(&u, &v)| ((u / sig_psi).powi(2) + (v / sig_p).powi(2)).sqrt())
        .collect();
    let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = radii.iter().cloned().fold(0.0f64, f64::max);
    if r_min > 0.25 * r_max {
        // Oval: order by whitened polar angle, Fourier-fit the radius, and
        // convert the radial misfit back to momentum units.
        let angles: Vec<f64> = dev_psi
            .iter()
            .zip(&dev_p)
            .map(|(&u, &v)| (v / sig_p).atan2(u / sig_psi))
            .collect();
        let fitted = fourier_fit(&angles, &radii, order);
        let mut acc = 0.0;
        for i in 0..radii.len() {
            let dr = radii[i] - fitted[i];
            let ang = angles[i];
            // Physical length of a unit radial move at this angle.
            let conv = ((sig_psi * ang.cos()).powi(2) + (sig_p * ang.sin()).powi(2)).sqrt();
            acc += (dr * conv).powi(2);
        }
        (acc / n).sqrt()
    } else {
        // Graph over psi: fit p_psi(psi). The vertical misfit bounds the
        // orthogonal one from above, which keeps the score conservative.
        let fitted = fourier_fit(psi, p, order);
        let mut acc = 0.0;
        for i in 0..p.len() {
            acc += (p[i] - fitted[i]).powi(2);
        }
        (acc / n).sqrt()
    }
}

/// Score every orbit in a run: fit a smooth closed curve per seed and
/// classify by RMS misfit against 1e-3 of the momentum scale.
pub fn regularity_score(points: &[SectionPoint], order: usize) -> Result<Vec<OrbitRegularity>> {
    if points.is_empty() {
        return Err(TubeError::InsufficientPoints { got: 0, need: 50 });
    }
    let max_seed = points.iter().map(|p| p.seed_index).max().unwrap_or(0);
    let momentum_scale = points
        .iter()
        .map(|p| p.p_psi.abs())
        .fold(0.0f64, f64::max)
        .max(1e-6);
    let threshold = REGULAR_THRESHOLD_FRACTION * momentum_scale;
    let mut out = Vec::new();
    for seed in 0..=max_seed {
        let psi: Vec<f64> = points.iter().filter(|p| p.seed_index == seed).map(|p| p.psi).collect();
        if psi.is_empty() {
            continue;
        }
        if psi.len() < 50 {
            return Err(TubeError::InsufficientPoints { got: psi.len(), need: 50 });
        }
        let p: Vec<f64> =
            points.iter().filter(|p| p.seed_index == seed).map(|p| p.p_psi).collect();
        let residual = orbit_residual(&psi, &p, order);
        out.push(OrbitRegularity { seed_index: seed, residual, threshold, regular: residual < threshold });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn torus_tube() -> InducedMetric2D {
        ellipse_tube_metric(2.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn circle_limit_reproduces_torus_metric() {
        let m = torus_tube();
        assert!(m.s_independent);
        assert!((m.s_period - 4.0 * PI).abs() < 1e-9, "perimeter {}", m.s_period);
        for (s, psi) in [(0.0, 0.0), (3.0, 1.1), (7.7, 4.0), (12.0, 6.0)] {
            let (e, f, g) = m.coeffs(s, psi);
            let want = (1.0 - 0.5 * psi.cos()).powi(2);
            assert!((e - want).abs() < 1e-12, "E at ({s},{psi}): {e} vs {want}");
            assert!(f.abs() < 1e-12);
            assert!((g - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_curvature_hits_axis_extremes() {
        let m = ellipse_tube_metric(2.0, 2.5, 1.0).unwrap();
        assert!(!m.s_independent);
        assert!((m.s_period - 14.180833944487243).abs() < 1e-9, "perimeter {}", m.s_period);
        // s = 0 is the semi-major axis end: k1 = a/b^2 = 0.32.
        let (e, _, _) = m.coeffs(0.0, 0.0);
        assert!((e - (1.0 - 0.32f64).powi(2)).abs() < 1e-10, "E(0,0) = {e}");
        // Quarter perimeter is the semi-minor axis end: k1 = b/a^2 = 0.625.
        let (e, _, _) = m.coeffs(m.s_period / 4.0, 0.0);
        assert!((e - (1.0 - 0.625f64).powi(2)).abs() < 1e-10, "E(L/4,0) = {e}");
        // The stored derivative matches a central difference.
        let jet = m.jet(1.7, 0.0);
        let h = 1e-5;
        let (ep, _, _) = m.coeffs(1.7 + h, 0.0);
        let (em, _, _) = m.coeffs(1.7 - h, 0.0);
        let fd = (ep - em) / (2.0 * h);
        assert!((jet.de_ds - fd).abs() < 1e-7, "dE/ds {} vs fd {}", jet.de_ds, fd);
    }

    #[test]
    fn oversized_tube_is_rejected() {
        let err = ellipse_tube_metric(2.0, 2.0, 2.0).unwrap_err();
        assert!(matches!(err, TubeError::TubeDegenerate { .. }), "{err}");
        let err = ellipse_tube_metric(2.0, 2.5, 1.6).unwrap_err();
        assert!(matches!(err, TubeError::TubeDegenerate { .. }), "{err}");
    }

    #[test]
    fn flat_cylinder_crossings_are_rigid() {
        let m = circular_tube_metric(
            SpaceFormTag::FLAT,
            ScalarFn::constant(0.0),
            ScalarFn::constant(0.0),
            1.0,
            TAU,
        )
        .unwrap();
        let config = SectionConfig::new(TAU, 50, vec![(1.0, 0.3)]);
        let run = section(&m, &config).unwrap();
        assert!(run.failures.is_empty(), "{:?}", run.failures);
        assert_eq!(run.points.len(), 50);
        let advance =
            (run.points[1].psi - run.points[0].psi).rem_euclid(TAU);
        for w in run.points.windows(2) {
            assert!((w[1].p_psi - 0.3).abs() < 1e-10, "p_psi {}", w[1].p_psi);
            let da = (w[1].psi - w[0].psi).rem_euclid(TAU);
            assert!((da - advance).abs() < 1e-8, "advance {da} vs {advance}");
            assert!(w[1].tau > w[0].tau);
        }
    }

    #[test]
    fn torus_crossings_sit_on_the_plane_with_conserved_integrals() {
        let m = torus_tube();
        let mut config =
            SectionConfig::new(m.s_period, 100, vec![(0.0, 0.9), (0.0, -0.3)]);
        config.tol = 1e-12;
        let run = section(&m, &config).unwrap();
        assert!(run.failures.is_empty(), "{:?}", run.failures);
        assert_eq!(run.points.len(), 200);
        for p in &run.points {
            assert!(p.s_residual < 1e-10, "s residual {}", p.s_residual);
            assert!((p.h - 0.5).abs() < 1e-9, "H = {}", p.h);
            assert!(p.p_s > 0.0);
        }
        // p_s is the Noether integral of the ignorable coordinate.
        for seed in 0..2 {
            let ps: Vec<f64> = run
                .points
                .iter()
                .filter(|p| p.seed_index == seed)
                .map(|p| p.p_s)
                .collect();
            for v in &ps {
                assert!((v - ps[0]).abs() < 1e-9, "p_s drift {}", v - ps[0]);
            }
        }
    }

    #[test]
    fn infeasible_seed_is_a_hard_error() {
        let m = torus_tube();
        let config = SectionConfig::new(m.s_period, 10, vec![(0.0, 1.2)]);
        let err = section(&m, &config).unwrap_err();
        assert!(matches!(err, TubeError::SeedInfeasible { .. }), "{err}");
    }

    #[test]
    fn synthetic_oval_and_graph_fit_to_machine_precision() {
        // Points exactly on an ellipse around (pi, 0).
        let mut pts = Vec::new();
        for i in 0..300 {
            let th = TAU * i as f64 / 300.0 + 0.37;
            pts.push(SectionPoint {
                psi: PI + 0.3 * th.cos(),
                p_psi: 0.4 * th.sin(),
                p_s: 1.0,
                h: 0.5,
                tau: i as f64,
                s_residual: 0.0,
                seed_index: 0,
                crossing_index: i,
            });
        }
        // Points exactly on a smooth graph p_psi(psi).
        for i in 0..300 {
            let psi = TAU * ((i as f64 * 0.381966) % 1.0);
            pts.push(SectionPoint {
                psi,
                p_psi: 0.5 + 0.1 * (2.0 * psi).sin(),
                p_s: 1.0,
                h: 0.5,
                tau: i as f64,
                s_residual: 0.0,
                seed_index: 1,
                crossing_index: i,
            });
        }
        let scores = regularity_score(&pts, DEFAULT_FOURIER_ORDER).unwrap();
        assert_eq!(scores.len(), 2);
        for sc in &scores {
            assert!(sc.residual < 1e-10, "seed {} residual {}", sc.seed_index, sc.residual);
            assert!(sc.regular);
        }
    }

    #[test]
    fn too_few_points_error() {
        let pts: Vec<SectionPoint> = (0..30)
            .map(|i| SectionPoint {
                psi: i as f64 * 0.2,
                p_psi: 0.1,
                p_s: 1.0,
                h: 0.5,
                tau: i as f64,
                s_residual: 0.0,
                seed_index: 0,
                crossing_index: i,
            })
            .collect();
        let err = regularity_score(&pts, 8).unwrap_err();
        assert!(matches!(err, TubeError::InsufficientPoints { got: 30, need: 50 }), "{err}");
    }

    #[test]
    fn torus_orbits_score_regular() {
        let m = torus_tube();
        let seeds = vec![(0.0, 0.9), (0.0, -0.7), (0.0, 0.3), (0.0, -0.1)];
        let mut config = SectionConfig::new(m.s_period, 120, seeds);
        config.tol = 1e-11;
        let run = section(&m, &config).unwrap();
        assert!(run.failures.is_empty(), "{:?}", run.failures);
        let scores = regularity_score(&run.points, DEFAULT_FOURIER_ORDER).unwrap();
        for sc in &scores {
            assert!(
                sc.residual < 1e-3,
                "seed {} residual {} (threshold {})",
                sc.seed_index,
                sc.residual,
                sc.threshold
            );
            assert!(sc.regular);
        }
    }

    #[test]
    fn ellipse_tube_drifts_ps_and_scrambles_near_separatrix_orbits() {
        let m = ellipse_tube_metric(2.0, 2.5, 1.0).unwrap();
        let mut seeds = vec![(0.0, 0.5)];
        seeds.extend(SectionConfig::near_separatrix_seeds());
        let mut config = SectionConfig::new(m.s_period, 400, seeds);
        config.tol = 1e-11;
        let run = section(&m, &config).unwrap();
        assert!(run.failures.is_empty(), "{:?}", run.failures);
        // Generic orbit: the s-dependence breaks the Noether integral.
        let generic: Vec<f64> = run
            .points
            .iter()
            .filter(|p| p.seed_index == 0)
            .map(|p| p.p_s)
            .collect();
        let drift = generic
            .iter()
            .map(|v| (v - generic[0]).abs())
            .fold(0.0f64, f64::max);
        assert!(drift > 1e-3, "p_s drift only {drift}");
        let scores = regularity_score(&run.points, DEFAULT_FOURIER_ORDER).unwrap();
        let worst = scores[1..]
            .iter()
            .map(|sc| sc.residual)
            .fold(0.0f64, f64::max);
        let threshold = scores[0].threshold;
        assert!(
            worst > 10.0 * threshold,
            "near-separatrix residuals too small: worst {worst}, threshold {threshold}"
        );
    }

    #[test]
    fn identical_configs_give_identical_output() {
        let m = torus_tube();
        let mut config = SectionConfig::new(m.s_period, 40, vec![(0.0, 0.6), (0.0, -0.4)]);
        config.tol = 1e-10;
        let a = section(&m, &config).unwrap();
        let b = section(&m, &config).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (x, y) in a.points.iter().zip(&b.points) {
            assert_eq!(x.psi.to_bits(), y.psi.to_bits());
            assert_eq!(x.p_psi.to_bits(), y.p_psi.to_bits());
            assert_eq!(x.seed_index, y.seed_index);
            assert_eq!(x.crossing_index, y.crossing_index);
        }
    }

    #[test]
    fn section_csv_lists_every_crossing() {
        let m = torus_tube();
        let config = SectionConfig::new(m.s_period, 30, vec![(0.0, 0.5)]);
        let run = section(&m, &config).unwrap();
        let path = std::env::temp_dir().join("tubeflow_section_test.csv");
        run.to_csv(&path, &[("kind".to_string(), "poincare".to_string())]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert!(text.starts_with("# kind: poincare"));
        assert!(text.contains("seed_index,crossing_index,psi,p_psi,p_s,H"));
        let rows = text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("seed")).count();
        assert_eq!(rows, 30);
    }
}
