//! Parametric curves in a chart: arc-length reparameterization, covariant
//! Frenet frames, and the curvature scalars k1, k2.

use std::sync::Arc;

use crate::chart::{ChartMetric, Gamma3};
use crate::error::{Result, TubeError};
use crate::quad;

pub type PointFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;
pub type FrameFn = Arc<dyn Fn(f64) -> ([f64; 3], [f64; 3], [f64; 3]) + Send + Sync>;

/// Frenet frame and curvature scalars at one arc-length position.
#[derive(Clone, Copy, Debug)]
pub struct FrenetData {
    pub s: f64,
    /// Base point in chart coordinates.
    pub x: [f64; 3],
    pub t_vec: [f64; 3],
    pub n_vec: [f64; 3],
    pub b_vec: [f64; 3],
    pub k1: f64,
    pub k2: f64,
}

/// A regular parametric curve in a chart.
#[derive(Clone)]
pub struct ParamCurve {
    pub chart: ChartMetric,
    pos: PointFn,
    vel: PointFn,
    acc: Option<PointFn>,
    /// Analytic orthonormal frame (T, N, B) for curves whose frame is known
    /// in closed form; remains valid where the strict Frenet frame
    /// degenerates (k1 = 0).
    adapted: Option<FrameFn>,
    pub t_range: (f64, f64),
    pub closed: bool,
    /// Short label echoed into output headers.
    pub name: String,
}

impl std::fmt::Debug for ParamCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParamCurve")
            .field("name", &self.name)
            .field("chart", &self.chart.describe())
            .field("t_range", &self.t_range)
            .field("closed", &self.closed)
            .field("adapted", &self.adapted.is_some())
            .finish()
    }
}

const CLOSURE_TOL: f64 = 1e-12;

impl ParamCurve {
    pub fn new(
        chart: ChartMetric,
        pos: PointFn,
        vel: PointFn,
        t_range: (f64, f64),
        closed: bool,
    ) -> Result<Self> {
        if closed {
            let a = pos(t_range.0);
            let b = pos(t_range.1);
            if !points_equivalent(&chart, &a, &b, CLOSURE_TOL) {
                return Err(TubeError::Config(format!(
                    "curve marked closed but endpoints differ: {a:?} vs {b:?}"
                )));
            }
        }
        Ok(ParamCurve {
            chart,
            pos,
            vel,
            acc: None,
            adapted: None,
            t_range,
            closed,
            name: "custom".into(),
        })
    }

    pub fn with_acc(mut self, acc: PointFn) -> Self {
        self.acc = Some(acc);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_adapted_frame(mut self, frame: FrameFn) -> Self {
        self.adapted = Some(frame);
        self
    }

    pub fn has_adapted_frame(&self) -> bool {
        self.adapted.is_some()
    }

    pub fn period(&self) -> f64 {
        self.t_range.1 - self.t_range.0
    }

    pub fn pos(&self, t: f64) -> [f64; 3] {
        (self.pos)(t)
    }

    pub fn vel(&self, t: f64) -> [f64; 3] {
        (self.vel)(t)
    }

    /// Coordinate second derivative, finite-differenced if not supplied.
    pub fn acc(&self, t: f64) -> [f64; 3] {
        match &self.acc {
            Some(a) => a(t),
            None => {
                let h = 1e-6 * t.abs().max(1.0);
                let vp = (self.vel)(t + h);
                let vm = (self.vel)(t - h);
                [
                    (vp[0] - vm[0]) / (2.0 * h),
                    (vp[1] - vm[1]) / (2.0 * h),
                    (vp[2] - vm[2]) / (2.0 * h),
                ]
            }
        }
    }

    pub fn speed(&self, t: f64) -> Result<f64> {
        let x = self.pos(t);
        let v = self.vel(t);
        let sigma = self.chart.norm(&x, &v)?;
        if sigma < 1e-12 {
            return Err(TubeError::IrregularCurve { t, speed: sigma });
        }
        Ok(sigma)
    }

    // ----- catalog -----

    /// Circle of the given radius in the z = 0 plane of Euclidean 3-space.
    pub fn circle(radius: f64) -> Result<Self> {
        let r = radius;
        let c = ParamCurve::new(
            ChartMetric::euclidean3(),
            Arc::new(move |t: f64| [r * t.cos(), r * t.sin(), 0.0]),
            Arc::new(move |t: f64| [-r * t.sin(), r * t.cos(), 0.0]),
            (0.0, std::f64::consts::TAU),
            true,
        )?;
        Ok(c.with_acc(Arc::new(move |t: f64| [-r * t.cos(), -r * t.sin(), 0.0]))
            .with_name(format!("circle(r={radius})")))
    }

    /// Helix (a cos t, a sin t, c t) in Euclidean 3-space.
    pub fn helix(a: f64, c: f64) -> Result<Self> {
        let curve = ParamCurve::new(
            ChartMetric::euclidean3(),
            Arc::new(move |t: f64| [a * t.cos(), a * t.sin(), c * t]),
            Arc::new(move |t: f64| [-a * t.sin(), a * t.cos(), c]),
            (0.0, std::f64::consts::TAU),
            false,
        )?;
        Ok(curve
            .with_acc(Arc::new(move |t: f64| [-a * t.cos(), -a * t.sin(), 0.0]))
            .with_name(format!("helix(a={a}, c={c})")))
    }

    /// Ellipse (a cos t, b sin t, 0) in Euclidean 3-space.
    pub fn ellipse(a_semi: f64, b_semi: f64) -> Result<Self> {
        let (a, b) = (a_semi, b_semi);
        let c = ParamCurve::new(
            ChartMetric::euclidean3(),
            Arc::new(move |t: f64| [a * t.cos(), b * t.sin(), 0.0]),
            Arc::new(move |t: f64| [-a * t.sin(), b * t.cos(), 0.0]),
            (0.0, std::f64::consts::TAU),
            true,
        )?;
        Ok(c.with_acc(Arc::new(move |t: f64| [-a * t.cos(), -b * t.sin(), 0.0]))
            .with_name(format!("ellipse(a={a}, b={b})")))
    }

    /// Constant-curvature curve (eta0, alpha t, beta t) on the unit 3-sphere
    /// in Hopf coordinates; closed over t in [0, 2 pi] for integer windings.
    pub fn hopf(alpha: f64, beta: f64, eta0: f64) -> Result<Self> {
        Ok(Self::homogeneous_winding(ChartMetric::sphere3_hopf(), 1.0, 1.0, alpha, beta, eta0)?
            .with_name(format!("hopf(alpha={alpha}, beta={beta}, eta0={eta0})")))
    }

    /// Constant-curvature curve (eta0, alpha t, beta t) on the degenerate
    /// 3-ellipsoid with axes (a, a, b, b).
    pub fn ellipsoid_knot(a: f64, b: f64, alpha: f64, beta: f64, eta0: f64) -> Result<Self> {
        Ok(Self::homogeneous_winding(ChartMetric::ellipsoid3(a, b)?, a, b, alpha, beta, eta0)?
            .with_name(format!(
                "ellipsoid_knot(a={a}, b={b}, alpha={alpha}, beta={beta}, eta0={eta0})"
            )))
    }

    fn homogeneous_winding(
        chart: ChartMetric,
        a: f64,
        b: f64,
        alpha: f64,
        beta: f64,
        eta0: f64,
    ) -> Result<Self> {
        let closed = (alpha - alpha.round()).abs() < 1e-12 && (beta - beta.round()).abs() < 1e-12;
        let curve = ParamCurve::new(
            chart.clone(),
            Arc::new(move |t: f64| [eta0, alpha * t, beta * t]),
            Arc::new(move |_| [0.0, alpha, beta]),
            (0.0, std::f64::consts::TAU),
            closed,
        )?
        .with_acc(Arc::new(|_| [0.0; 3]));
        // T = (0, alpha, beta)/p and N = (1/q, 0, 0) are orthonormal and
        // constant in chart components along the curve; B completes the
        // right-handed triple through the chart volume form.
        let (se, ce) = eta0.sin_cos();
        let p = (a * a * alpha * alpha * se * se + b * b * beta * beta * ce * ce).sqrt();
        let q = (a * a * ce * ce + b * b * se * se).sqrt();
        let t_vec = [0.0, alpha / p, beta / p];
        let n_vec = [1.0 / q, 0.0, 0.0];
        let b_vec = chart.cross(&[eta0, 0.0, 0.0], &t_vec, &n_vec)?;
        let frame: FrameFn = Arc::new(move |_| (t_vec, n_vec, b_vec));
        Ok(curve.with_adapted_frame(frame))
    }

    // ----- arc length -----

    /// Tabulate arc length against the curve parameter.
    pub fn arclength_reparam(&self, n_samples: usize) -> Result<ArcLengthTable> {
        if n_samples < 16 {
            return Err(TubeError::Config(format!(
                "arc-length table needs at least 16 samples, got {n_samples}"
            )));
        }
        let (t0, t1) = self.t_range;
        let n = n_samples;
        let dt = (t1 - t0) / n as f64;
        let mut t = Vec::with_capacity(n + 1);
        let mut sigma = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let ti = t0 + i as f64 * dt;
            t.push(ti);
            sigma.push(self.speed(ti)?);
            if i > 0 {
                // Also guard the midpoint against an unseen zero of speed.
                self.speed(ti - 0.5 * dt)?;
            }
        }
        let (nodes, weights) = quad::gauss_legendre(15);
        let mut s = vec![0.0; n + 1];
        let mut speed_fn = |u: f64| self.speed(u).unwrap_or(f64::NAN);
        for i in 1..=n {
            let seg = quad::fixed_gl(&mut speed_fn, t[i - 1], t[i], &nodes, &weights);
            s[i] = s[i - 1] + seg;
        }
        // Independent total by adaptive quadrature pins the cumulative sum.
        let total = quad::integrate(|u| self.speed(u).unwrap_or(f64::NAN), t0, t1, 1e-12)?;
        if !total.is_finite() || (total - s[n]).abs() > 1e-9 * total.abs().max(1.0) {
            return Err(TubeError::StepFailure {
                reason: format!("arc-length quadratures disagree: {} vs {}", s[n], total),
            });
        }
        s[n] = total;
        let me = self.clone();
        Ok(ArcLengthTable {
            t,
            s,
            sigma,
            total,
            closed: self.closed,
            speed: Arc::new(move |u| me.speed(u).unwrap_or(f64::NAN)),
        })
    }

    // ----- frames -----

    /// Covariant acceleration Dv/dt = a^i + Γ^i_jk v^j v^k.
    fn covariant_accel(&self, t: f64, gamma: &Gamma3) -> [f64; 3] {
        let v = self.vel(t);
        let a = self.acc(t);
        let mut out = a;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i] += gamma[i][j][k] * v[j] * v[k];
                }
            }
        }
        out
    }

    /// Unit tangent, its covariant s-derivative, and the speed at t.
    fn tangent_jet(&self, t: f64) -> Result<([f64; 3], [f64; 3], f64)> {
        let x = self.pos(t);
        let v = self.vel(t);
        let m = self.chart.metric_at(&x)?;
        let gdot = |u: &[f64; 3], w: &[f64; 3]| {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += m.g[(i, j)] * u[i] * w[j];
                }
            }
            acc
        };
        let sigma = gdot(&v, &v).sqrt();
        if sigma < 1e-12 {
            return Err(TubeError::IrregularCurve { t, speed: sigma });
        }
        let gamma = self.chart.christoffel_at(&x)?;
        let dv = self.covariant_accel(t, &gamma);
        // D(v/sigma)/dt, then divide by sigma for the s-derivative.
        let dsigma = gdot(&dv, &v) / sigma;
        let mut dt_ds = [0.0; 3];
        let mut t_vec = [0.0; 3];
        for i in 0..3 {
            t_vec[i] = v[i] / sigma;
            dt_ds[i] = (dv[i] / sigma - v[i] * dsigma / (sigma * sigma)) / sigma;
        }
        Ok((t_vec, dt_ds, sigma))
    }

    /// Principal normal with the geodesic curvature k1 = |DT/ds| at t.
    fn normal_at(&self, t: f64, k1_min: f64) -> Result<([f64; 3], f64)> {
        let x = self.pos(t);
        let (_, dt_ds, _) = self.tangent_jet(t)?;
        let k1 = self.chart.norm(&x, &dt_ds)?;
        if k1 < k1_min {
            let table_s = t; // reported in parameter units; s not known here
            return Err(TubeError::VanishingCurvature { s: table_s, k1, k1_min });
        }
        Ok(([dt_ds[0] / k1, dt_ds[1] / k1, dt_ds[2] / k1], k1))
    }

    /// Covariant s-derivative of a chart-component field W(t) along the
    /// curve, by a 5-point stencil in t.
    fn covariant_deriv_field<W>(&self, t: f64, w: W) -> Result<[f64; 3]>
    where
        W: Fn(f64) -> Result<[f64; 3]>,
    {
        let h = 1e-4 * t.abs().max(1.0);
        let wm2 = w(t - 2.0 * h)?;
        let wm1 = w(t - h)?;
        let wp1 = w(t + h)?;
        let wp2 = w(t + 2.0 * h)?;
        let x = self.pos(t);
        let v = self.vel(t);
        let gamma = self.chart.christoffel_at(&x)?;
        let w0 = w(t)?;
        let sigma = self.speed(t)?;
        let mut out = [0.0; 3];
        for i in 0..3 {
            let dwdt = (wm2[i] - 8.0 * wm1[i] + 8.0 * wp1[i] - wp2[i]) / (12.0 * h);
            let mut corr = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    corr += gamma[i][j][k] * v[j] * w0[k];
                }
            }
            out[i] = (dwdt + corr) / sigma;
        }
        Ok(out)
    }

    fn frenet_at_t(&self, t: f64, s: f64, k1_min: f64) -> Result<FrenetData> {
        let x = self.pos(t);
        let (t_vec, _, _) = self.tangent_jet(t)?;
        let (n_vec, k1) = self.normal_at(t, k1_min).map_err(|e| match e {
            TubeError::VanishingCurvature { k1, k1_min, .. } => {
                TubeError::VanishingCurvature { s, k1, k1_min }
            }
            other => other,
        })?;
        let b_vec = self.chart.cross(&x, &t_vec, &n_vec)?;
        let dn_ds = self.covariant_deriv_field(t, |u| Ok(self.normal_at(u, k1_min)?.0))?;
        let k2 = self.chart.inner(&x, &dn_ds, &b_vec)?;
        Ok(FrenetData { s, x, t_vec, n_vec, b_vec, k1, k2 })
    }

    /// Strict Frenet frame at the given arc-length positions.
    ///
    /// Errors with "vanishing geodesic curvature" wherever k1 < k1_min,
    /// since N is undefined there.
    pub fn frenet_evolve(
        &self,
        table: &ArcLengthTable,
        s_values: &[f64],
        k1_min: f64,
    ) -> Result<Vec<FrenetData>> {
        s_values
            .iter()
            .map(|&s| self.frenet_at_t(table.t_of_s(s), s, k1_min))
            .collect()
    }

    /// Curvature scalars at a single arc-length position.
    pub fn curvature_scalars(&self, table: &ArcLengthTable, s: f64, k1_min: f64) -> Result<(f64, f64)> {
        let d = self.frenet_at_t(table.t_of_s(s), s, k1_min)?;
        Ok((d.k1, d.k2))
    }

    /// Magnitude of the geodesic curvature |DT/ds| without requiring a
    /// well-defined normal; total where frenet_evolve errors out.
    pub fn geodesic_curvature_mag(&self, table: &ArcLengthTable, s: f64) -> Result<f64> {
        let t = table.t_of_s(s);
        let x = self.pos(t);
        let (_, dt_ds, _) = self.tangent_jet(t)?;
        self.chart.norm(&x, &dt_ds)
    }

    /// Frame data from the curve's adapted analytic frame, with signed
    /// scalars k1 = <DT/ds, N> and k2 = <DN/ds, B> evaluated numerically.
    pub fn adapted_frame_data(&self, table: &ArcLengthTable, s: f64) -> Result<FrenetData> {
        let frame = self
            .adapted
            .as_ref()
            .ok_or_else(|| TubeError::Config("curve has no adapted analytic frame".into()))?
            .clone();
        let t = table.t_of_s(s);
        let x = self.pos(t);
        let (t_vec, n_vec, b_vec) = frame(t);
        let (_, dt_ds, _) = self.tangent_jet(t)?;
        let k1 = self.chart.inner(&x, &dt_ds, &n_vec)?;
        let dn_ds = self.covariant_deriv_field(t, |u| Ok(frame(u).1))?;
        let k2 = self.chart.inner(&x, &dn_ds, &b_vec)?;
        Ok(FrenetData { s, x, t_vec, n_vec, b_vec, k1, k2 })
    }

    /// Frame for tube construction: the adapted frame when available
    /// (remains valid at k1 = 0), otherwise the strict Frenet frame.
    pub fn frame_at(&self, table: &ArcLengthTable, s: f64, k1_min: f64) -> Result<FrenetData> {
        if self.adapted.is_some() {
            self.adapted_frame_data(table, s)
        } else {
            self.frenet_at_t(table.t_of_s(s), s, k1_min)
        }
    }

    /// Check whether k1 and k2 are constant along the curve.
    pub fn constancy_check(
        &self,
        table: &ArcLengthTable,
        n_samples: usize,
        tol: f64,
        k1_min: f64,
    ) -> Result<(bool, f64)> {
        let l = table.total;
        let s_values: Vec<f64> = (0..n_samples).map(|i| l * i as f64 / n_samples as f64).collect();
        let frames = self.frenet_evolve(table, &s_values, k1_min)?;
        let (k10, k20) = (frames[0].k1, frames[0].k2);
        let mut max_dev: f64 = 0.0;
        for f in &frames {
            max_dev = max_dev.max((f.k1 - k10).abs()).max((f.k2 - k20).abs());
        }
        Ok((max_dev < tol, max_dev))
    }
}

fn points_equivalent(chart: &ChartMetric, a: &[f64; 3], b: &[f64; 3], tol: f64) -> bool {
    let names = chart.coord_names();
    (0..3).all(|i| {
        let d = (a[i] - b[i]).abs();
        if names[i] == "theta" || names[i] == "phi" {
            // Angular coordinates identify points modulo 2 pi.
            let w = (a[i] - b[i]).rem_euclid(std::f64::consts::TAU);
            w.min(std::f64::consts::TAU - w) < tol
        } else {
            d < tol
        }
    })
}

/// Monotone map between curve parameter and arc length.
pub struct ArcLengthTable {
    t: Vec<f64>,
    s: Vec<f64>,
    sigma: Vec<f64>,
    pub total: f64,
    closed: bool,
    speed: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ArcLengthTable {
    /// Arc length at parameter t (measured from the range start).
    pub fn s_of_t(&self, t: f64) -> f64 {
        let (nodes, weights) = quad::gauss_legendre(15);
        let i = self.locate_t(t);
        let mut f = |u: f64| (self.speed)(u);
        self.s[i] + quad::fixed_gl(&mut f, self.t[i], t, &nodes, &weights)
    }

    fn locate_t(&self, t: f64) -> usize {
        match self.t.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1).min(self.t.len() - 2),
        }
    }

    /// Parameter at arc length s; wraps modulo the total length for closed
    /// curves.
    pub fn t_of_s(&self, s: f64) -> f64 {
        let s = if self.closed { s.rem_euclid(self.total) } else { s };
        let n = self.s.len() - 1;
        // Bracket by binary search on the cumulative table.
        let mut i = match self.s.binary_search_by(|probe| probe.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i >= n {
            i = n - 1;
        }
        // Cubic Hermite initial guess for t(s) on [s_i, s_{i+1}] using
        // dt/ds = 1/sigma at the endpoints.
        let (s0, s1) = (self.s[i], self.s[i + 1]);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let ds = s1 - s0;
        let u = ((s - s0) / ds).clamp(0.0, 1.0);
        let m0 = ds / self.sigma[i];
        let m1 = ds / self.sigma[i + 1];
        let u2 = u * u;
        let u3 = u2 * u;
        let mut t = t0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + m0 * (u3 - 2.0 * u2 + u)
            + t1 * (-2.0 * u3 + 3.0 * u2)
            + m1 * (u3 - u2);
        // Newton polish on s(t) - s = 0 with local fixed-order quadrature.
        let (nodes, weights) = quad::gauss_legendre(15);
        for _ in 0..4 {
            let mut f = |x: f64| (self.speed)(x);
            let resid = self.s[i] + quad::fixed_gl(&mut f, self.t[i], t, &nodes, &weights) - s;
            let sp = (self.speed)(t);
            if !resid.is_finite() || !sp.is_finite() || sp <= 0.0 {
                break;
            }
            let dt = resid / sp;
            t -= dt;
            if dt.abs() < 1e-13 * t.abs().max(1.0) {
                break;
            }
        }
        t
    }
}
