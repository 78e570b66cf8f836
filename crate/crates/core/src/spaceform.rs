//! Closed-form Jacobi propagation in space forms and the induced metrics of
//! circular and generalized tubes about constant-curvature curves.

use std::sync::Arc;

use crate::error::{Result, TubeError};
use crate::metric2d::{InducedMetric2D, JetFn, MetricJet};

/// Curvature sign of a space form, K0 in {-1, 0, +1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceFormTag(i8);

/// Radial scale functions F, G evaluated at one radius.
#[derive(Clone, Copy, Debug)]
pub struct SpaceFormScale {
    pub f0: f64,
    pub g0: f64,
}

impl SpaceFormTag {
    pub fn new(k0: i32) -> Result<Self> {
        match k0 {
            -1 | 0 | 1 => Ok(SpaceFormTag(k0 as i8)),
            _ => Err(TubeError::Config(format!("space form curvature must be -1, 0, or 1, got {k0}"))),
        }
    }

    pub const FLAT: SpaceFormTag = SpaceFormTag(0);
    pub const SPHERICAL: SpaceFormTag = SpaceFormTag(1);
    pub const HYPERBOLIC: SpaceFormTag = SpaceFormTag(-1);

    pub fn k0(&self) -> f64 {
        self.0 as f64
    }

    /// F(rho), G(rho): the solutions of y'' + K0 y = 0 with (F, F')(0) =
    /// (1, 0) and (G, G')(0) = (0, 1).
    pub fn scales(&self, rho: f64) -> SpaceFormScale {
        match self.0 {
            1 => SpaceFormScale { f0: rho.cos(), g0: rho.sin() },
            0 => SpaceFormScale { f0: 1.0, g0: rho },
            _ => SpaceFormScale { f0: rho.cosh(), g0: rho.sinh() },
        }
    }
}

/// Evaluate the space-form Jacobi field at radius rho.
///
/// Components are expressed in a frame parallel along the radial geodesic
/// whose direction is `gamma_dir`; J0 and J1 are the initial value and
/// initial derivative. The radial part grows affinely and the orthogonal
/// part is scaled by (F, G).
pub fn spaceform_jacobi(
    k0: SpaceFormTag,
    rho: f64,
    j0: &[f64; 3],
    j1: &[f64; 3],
    gamma_dir: &[f64; 3],
) -> [f64; 3] {
    let norm = (gamma_dir[0] * gamma_dir[0]
        + gamma_dir[1] * gamma_dir[1]
        + gamma_dir[2] * gamma_dir[2])
        .sqrt();
    let d = [gamma_dir[0] / norm, gamma_dir[1] / norm, gamma_dir[2] / norm];
    let dot = |u: &[f64; 3]| u[0] * d[0] + u[1] * d[1] + u[2] * d[2];
    let (a0, a1) = (dot(j0), dot(j1));
    let sc = k0.scales(rho);
    let mut out = [0.0; 3];
    for i in 0..3 {
        let perp0 = j0[i] - a0 * d[i];
        let perp1 = j1[i] - a1 * d[i];
        out[i] = (a0 + rho * a1) * d[i] + sc.f0 * perp0 + sc.g0 * perp1;
    }
    out
}

/// Scalar function of arc length with an optional analytic derivative.
#[derive(Clone)]
pub struct ScalarFn {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl ScalarFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn { f: Arc::new(f), df: None }
    }

    pub fn with_derivative(mut self, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(df));
        self
    }

    pub fn constant(v: f64) -> Self {
        ScalarFn { f: Arc::new(move |_| v), df: Some(Arc::new(|_| 0.0)) }
    }

    /// Projection of uniformly spaced samples over one period onto a
    /// truncated Fourier series, with the tail cut at 1e-14 of the sample
    /// scale. Uniform sampling is spectrally accurate for smooth periodic
    /// data, and the series carries an exact derivative.
    pub fn periodic_fit(samples: &[f64], period: f64) -> Result<Self> {
        let n = samples.len();
        if n < 16 || !(period > 0.0) {
            return Err(TubeError::Config(format!(
                "periodic fit needs at least 16 samples and a positive period, got {n} and {period}"
            )));
        }
        let scale: f64 = samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let m_max = (n / 4).min(64);
        let mut cos_c = vec![0.0f64; m_max + 1];
        let mut sin_c = vec![0.0f64; m_max + 1];
        cos_c[0] = samples.iter().sum::<f64>() / n as f64;
        for m in 1..=m_max {
            let (mut ac, mut as_) = (0.0f64, 0.0f64);
            for (i, &v) in samples.iter().enumerate() {
                let ang = std::f64::consts::TAU * ((m * i) % n) as f64 / n as f64;
                ac += v * ang.cos();
                as_ += v * ang.sin();
            }
            cos_c[m] = 2.0 * ac / n as f64;
            sin_c[m] = 2.0 * as_ / n as f64;
        }
        let mut keep = 0usize;
        for m in 1..=m_max {
            if cos_c[m].abs().max(sin_c[m].abs()) > 1e-14 * scale {
                keep = m;
            }
        }
        cos_c.truncate(keep + 1);
        sin_c.truncate(keep + 1);
        let om = std::f64::consts::TAU / period;
        let (ck, sk) = (cos_c.clone(), sin_c.clone());
        Ok(ScalarFn::new(move |s: f64| {
            let mut acc = ck[0];
            for m in 1..ck.len() {
                let ang = om * m as f64 * s;
                acc += ck[m] * ang.cos() + sk[m] * ang.sin();
            }
            acc
        })
        .with_derivative(move |s: f64| {
            let mut acc = 0.0;
            for m in 1..cos_c.len() {
                let w = om * m as f64;
                let ang = w * s;
                acc += w * (sin_c[m] * ang.cos() - cos_c[m] * ang.sin());
            }
            acc
        }))
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match &self.df {
            Some(df) => df(s),
            None => {
                let h = 1e-6 * s.abs().max(1.0);
                ((self.f)(s + h) - (self.f)(s - h)) / (2.0 * h)
            }
        }
    }

    fn max_abs_over(&self, period: f64, n: usize) -> f64 {
        (0..n).fold(0.0f64, |m, i| m.max(self.eval(period * i as f64 / n as f64).abs()))
    }

    fn is_constant_over(&self, period: f64, n: usize) -> bool {
        let v0 = self.eval(0.0);
        (0..n).all(|i| (self.eval(period * i as f64 / n as f64) - v0).abs() < 1e-12)
    }
}

/// Cross-section profile of a tube: radius rho0 times the closed plane
/// curve (f(psi), g(psi)).
#[derive(Clone, Debug)]
pub struct TubeProfile {
    pub rho0: f64,
    pub circular: bool,
    // Truncated Fourier series so derivatives are exact:
    // f = sum f_cos[k] cos(k psi) + f_sin[k] sin(k psi), likewise g.
    f_cos: Vec<f64>,
    f_sin: Vec<f64>,
    g_cos: Vec<f64>,
    g_sin: Vec<f64>,
}

fn fourier_eval(cos_c: &[f64], sin_c: &[f64], psi: f64, order: u32) -> f64 {
    let mut acc = 0.0;
    for (k, &c) in cos_c.iter().enumerate() {
        let kf = k as f64;
        let angle = kf * psi;
        acc += match order {
            0 => c * angle.cos(),
            1 => -c * kf * angle.sin(),
            _ => -c * kf * kf * angle.cos(),
        };
    }
    for (k, &s) in sin_c.iter().enumerate() {
        let kf = k as f64;
        let angle = kf * psi;
        acc += match order {
            0 => s * angle.sin(),
            1 => s * kf * angle.cos(),
            _ => -s * kf * kf * angle.sin(),
        };
    }
    acc
}

impl TubeProfile {
    pub fn circular(rho0: f64) -> Result<Self> {
        if rho0 <= 0.0 {
            return Err(TubeError::Config(format!("tube radius must be positive, got {rho0}")));
        }
        Ok(TubeProfile {
            rho0,
            circular: true,
            f_cos: vec![0.0, 1.0],
            f_sin: vec![],
            g_cos: vec![],
            g_sin: vec![0.0, 1.0],
        })
    }

    /// Profile from truncated Fourier series for f and g (index = harmonic).
    pub fn fourier(
        rho0: f64,
        f_cos: Vec<f64>,
        f_sin: Vec<f64>,
        g_cos: Vec<f64>,
        g_sin: Vec<f64>,
    ) -> Result<Self> {
        if rho0 <= 0.0 {
            return Err(TubeError::Config(format!("tube radius must be positive, got {rho0}")));
        }
        let p = TubeProfile { rho0, circular: false, f_cos, f_sin, g_cos, g_sin };
        p.validate_simple(512)?;
        Ok(p)
    }

    /// Short label echoed into output headers.
    pub fn describe(&self) -> String {
        if self.circular {
            format!("circular(rho0={})", self.rho0)
        } else {
            let h = self
                .f_cos
                .len()
                .max(self.f_sin.len())
                .max(self.g_cos.len())
                .max(self.g_sin.len())
                .saturating_sub(1);
            format!("fourier(rho0={}, harmonics={h})", self.rho0)
        }
    }

    pub fn f(&self, psi: f64) -> f64 {
        fourier_eval(&self.f_cos, &self.f_sin, psi, 0)
    }

    pub fn g(&self, psi: f64) -> f64 {
        fourier_eval(&self.g_cos, &self.g_sin, psi, 0)
    }

    /// (f, f', f'', g, g', g'') at psi.
    pub fn jet(&self, psi: f64) -> [f64; 6] {
        [
            fourier_eval(&self.f_cos, &self.f_sin, psi, 0),
            fourier_eval(&self.f_cos, &self.f_sin, psi, 1),
            fourier_eval(&self.f_cos, &self.f_sin, psi, 2),
            fourier_eval(&self.g_cos, &self.g_sin, psi, 0),
            fourier_eval(&self.g_cos, &self.g_sin, psi, 1),
            fourier_eval(&self.g_cos, &self.g_sin, psi, 2),
        ]
    }

    /// Polar data of the profile at psi:
    /// (r, r', r'', cos phi, sin phi, phi', phi'') with r = rho0 sqrt(f^2+g^2).
    pub fn polar_jet(&self, psi: f64) -> [f64; 7] {
        let [f, fp, fpp, g, gp, gpp] = self.jet(psi);
        let w2 = f * f + g * g;
        let w = w2.sqrt();
        let r = self.rho0 * w;
        let wdot = (f * fp + g * gp) / w;
        let rp = self.rho0 * wdot;
        let rpp = self.rho0 * ((fp * fp + f * fpp + gp * gp + g * gpp) / w - wdot * wdot / w);
        let cosphi = f / w;
        let sinphi = g / w;
        let cross = f * gp - g * fp;
        let phip = cross / w2;
        let phipp = (f * gpp - g * fpp) / w2 - 2.0 * cross * (f * fp + g * gp) / (w2 * w2);
        [r, rp, rpp, cosphi, sinphi, phip, phipp]
    }

    /// Reject profiles that pass through the origin or self-intersect,
    /// checked on an n-point polygonal approximation.
    fn validate_simple(&self, n: usize) -> Result<()> {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let psi = std::f64::consts::TAU * i as f64 / n as f64;
                (self.f(psi), self.g(psi))
            })
            .collect();
        for (i, &(x, y)) in pts.iter().enumerate() {
            if (x * x + y * y).sqrt() < 1e-9 {
                return Err(TubeError::ProfileNotSimple {
                    reason: format!("profile passes through the origin near sample {i}"),
                });
            }
        }
        let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
        for i in 0..n {
            let (a, b) = seg(i);
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue; // adjacent across the seam
                }
                let (c, d) = seg(j);
                if segments_cross(a, b, c, d) {
                    return Err(TubeError::ProfileNotSimple {
                        reason: format!("profile self-intersects between samples {i} and {j}"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    };
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Induced metric of the circular tube of radius rho0 about a curve with
/// curvature scalars k1(s), k2(s) in the space form K0:
/// E = (F0 - k1 G0 cos psi)^2 + k2^2 G0^2, F = k2 G0^2, G = G0^2.
pub fn circular_tube_metric(
    k0: SpaceFormTag,
    k1: ScalarFn,
    k2: ScalarFn,
    rho0: f64,
    s_period: f64,
) -> Result<InducedMetric2D> {
    let sc = k0.scales(rho0);
    // Positivity of E requires |k1| G0 < F0 (E vanishes where
    // cos psi = F0 / (k1 G0), which a grid check can miss).
    let k1_max = k1.max_abs_over(s_period, 256);
    if k1_max * sc.g0 >= sc.f0 {
        return Err(TubeError::TubeDegenerate {
            s: 0.0,
            psi: 0.0,
            det: (sc.f0 - k1_max * sc.g0) * sc.g0 * sc.g0,
        });
    }
    let s_independent =
        k1.is_constant_over(s_period, 128) && k2.is_constant_over(s_period, 128);
    let (k1c, k2c) = (k1.clone(), k2.clone());
    let jet: JetFn = Arc::new(move |s, psi: f64| {
        let (sp, cp) = psi.sin_cos();
        let v1 = k1c.eval(s);
        let v2 = k2c.eval(s);
        let d1 = k1c.deriv(s);
        let d2 = k2c.deriv(s);
        let base = sc.f0 - v1 * sc.g0 * cp;
        MetricJet {
            e: base * base + v2 * v2 * sc.g0 * sc.g0,
            f: v2 * sc.g0 * sc.g0,
            g: sc.g0 * sc.g0,
            de_ds: -2.0 * base * d1 * sc.g0 * cp + 2.0 * v2 * d2 * sc.g0 * sc.g0,
            de_dpsi: 2.0 * base * v1 * sc.g0 * sp,
            df_ds: d2 * sc.g0 * sc.g0,
            df_dpsi: 0.0,
            dg_ds: 0.0,
            dg_dpsi: 0.0,
        }
    });
    let metric = InducedMetric2D::closed_form(jet, s_period, s_independent);
    metric.validate_grid(64, 64)?;
    Ok(metric)
}

/// Induced metric of the generalized tube with cross-section profile
/// (rho0 f(psi), rho0 g(psi)) in the normal plane.
///
/// Derived from the space-form Jacobi solution: with r(psi) the polar
/// radius, phi(psi) the polar angle, and F_r = F(r), G_r = G(r),
/// E = (F_r - k1 G_r cos phi)^2 + k2^2 G_r^2,
/// F = k2 phi' G_r^2,
/// G = r'^2 + phi'^2 G_r^2.
/// Setting f = cos, g = sin recovers the circular tube exactly.
pub fn generalized_tube_metric(
    k0: SpaceFormTag,
    k1: ScalarFn,
    k2: ScalarFn,
    profile: &TubeProfile,
    s_period: f64,
) -> Result<InducedMetric2D> {
    let s_independent =
        k1.is_constant_over(s_period, 128) && k2.is_constant_over(s_period, 128);
    let prof = profile.clone();
    let kk0 = k0.k0();
    let jet: JetFn = Arc::new(move |s, psi| {
        let [r, rp, rpp, cosphi, sinphi, phip, phipp] = prof.polar_jet(psi);
        let sc = k0.scales(r);
        let (fr, gr) = (sc.f0, sc.g0);
        // d F_r / d psi = -K0 G_r r', d G_r / d psi = F_r r'.
        let dfr = -kk0 * gr * rp;
        let dgr = fr * rp;
        let v1 = k1.eval(s);
        let v2 = k2.eval(s);
        let d1 = k1.deriv(s);
        let d2 = k2.deriv(s);
        let base = fr - v1 * gr * cosphi;
        let dbase_dpsi = dfr - v1 * (dgr * cosphi - gr * sinphi * phip);
        MetricJet {
            e: base * base + v2 * v2 * gr * gr,
            f: v2 * phip * gr * gr,
            g: rp * rp + phip * phip * gr * gr,
            de_ds: -2.0 * base * d1 * gr * cosphi + 2.0 * v2 * d2 * gr * gr,
            de_dpsi: 2.0 * base * dbase_dpsi + 2.0 * v2 * v2 * gr * dgr,
            df_ds: d2 * phip * gr * gr,
            df_dpsi: v2 * (phipp * gr * gr + 2.0 * phip * gr * dgr),
            dg_ds: 0.0,
            dg_dpsi: 2.0 * rp * rpp + 2.0 * phip * phipp * gr * gr + 2.0 * phip * phip * gr * dgr,
        }
    });
    let metric = InducedMetric2D::closed_form(jet, s_period, s_independent);
    metric.validate_grid(64, 64)?;
    Ok(metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn scale_functions_match_curvature_table() {
        let s = SpaceFormTag::SPHERICAL.scales(0.2);
        assert_relative_eq!(s.f0, 0.2f64.cos(), epsilon = 1e-15);
        assert_relative_eq!(s.g0, 0.2f64.sin(), epsilon = 1e-15);
        let f = SpaceFormTag::FLAT.scales(0.7);
        assert_eq!((f.f0, f.g0), (1.0, 0.7));
        let h = SpaceFormTag::HYPERBOLIC.scales(1.0);
        assert_relative_eq!(h.f0, 1.0f64.cosh(), epsilon = 1e-15);
        assert_relative_eq!(h.g0, 1.0f64.sinh(), epsilon = 1e-15);
        assert!(SpaceFormTag::new(2).is_err());
    }

    #[test]
    fn jacobi_solution_matches_scale_table() {
        let d = [1.0, 0.0, 0.0];
        // Flat space, pure derivative data: linear spreading.
        let j = spaceform_jacobi(SpaceFormTag::FLAT, 3.0, &[0.0; 3], &[0.0, 2.0, 0.0], &d);
        assert_relative_eq!(j[1], 6.0, epsilon = 1e-15);
        // Sphere: G(0.2) = sin 0.2.
        let j = spaceform_jacobi(SpaceFormTag::SPHERICAL, 0.2, &[0.0; 3], &[0.0, 1.0, 0.0], &d);
        assert_relative_eq!(j[1], 0.19866933079506122, epsilon = 1e-15);
        // Hyperbolic: F(1) = cosh 1.
        let j = spaceform_jacobi(SpaceFormTag::HYPERBOLIC, 1.0, &[0.0, 1.0, 0.0], &[0.0; 3], &d);
        assert_relative_eq!(j[1], 1.5430806348152437, epsilon = 1e-15);
        // Radial part is affine regardless of curvature.
        let j = spaceform_jacobi(SpaceFormTag::SPHERICAL, 0.4, &[0.5, 0.0, 0.0], &[0.25, 0.0, 0.0], &d);
        assert_relative_eq!(j[0], 0.5 + 0.4 * 0.25, epsilon = 1e-15);
    }

    #[test]
    fn jacobi_satisfies_deviation_equation() {
        let d = {
            let raw = [0.3f64, -0.5, 0.81];
            let n = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
            [raw[0] / n, raw[1] / n, raw[2] / n]
        };
        let j0 = [0.2, 0.7, -0.1];
        let j1 = [-0.4, 0.3, 0.9];
        let h = 1e-4;
        for tag in [SpaceFormTag::SPHERICAL, SpaceFormTag::FLAT, SpaceFormTag::HYPERBOLIC] {
            for &rho in &[0.3, 0.9, 1.7] {
                let jm = spaceform_jacobi(tag, rho - h, &j0, &j1, &d);
                let jc = spaceform_jacobi(tag, rho, &j0, &j1, &d);
                let jp = spaceform_jacobi(tag, rho + h, &j0, &j1, &d);
                let dotd = jc[0] * d[0] + jc[1] * d[1] + jc[2] * d[2];
                for i in 0..3 {
                    let second = (jp[i] - 2.0 * jc[i] + jm[i]) / (h * h);
                    let perp = jc[i] - dotd * d[i];
                    assert!(
                        (second + tag.k0() * perp).abs() < 1e-6,
                        "deviation residual for K0={} rho={rho}",
                        tag.k0()
                    );
                }
            }
        }
    }

    #[test]
    fn flat_circular_tube_is_the_classical_line_element() {
        // Torus: circle of radius 2, tube radius 1.
        let m = circular_tube_metric(
            SpaceFormTag::FLAT,
            ScalarFn::constant(0.5),
            ScalarFn::constant(0.0),
            1.0,
            4.0 * PI,
        )
        .unwrap();
        assert!(m.s_independent);
        for k in 0..50 {
            let psi = TAU * k as f64 / 50.0;
            let (e, f, g) = m.coeffs(1.3, psi);
            assert_relative_eq!(e, (1.0 - 0.5 * psi.cos()).powi(2), epsilon = 1e-14);
            assert_eq!(f, 0.0);
            assert_eq!(g, 1.0);
        }
    }

    #[test]
    fn flat_tube_with_torsion_matches_formula_at_random_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let k1v: f64 = rng.gen_range(-0.8..0.8);
            let k2v: f64 = rng.gen_range(-1.0..1.0);
            let rho0: f64 = rng.gen_range(0.05..1.0);
            if k1v.abs() * rho0 >= 0.999 {
                continue;
            }
            let m = match circular_tube_metric(
                SpaceFormTag::FLAT,
                ScalarFn::constant(k1v),
                ScalarFn::constant(k2v),
                rho0,
                TAU,
            ) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let s: f64 = rng.gen_range(0.0..TAU);
            let psi: f64 = rng.gen_range(0.0..TAU);
            let (e, f, g) = m.coeffs(s, psi);
            let want_e = (1.0 - k1v * rho0 * psi.cos()).powi(2) + k2v * k2v * rho0 * rho0;
            assert_relative_eq!(e, want_e, epsilon = 1e-12);
            assert_relative_eq!(f, k2v * rho0 * rho0, epsilon = 1e-12);
            assert_relative_eq!(g, rho0 * rho0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spherical_scales_enter_the_tube_metric() {
        let m = circular_tube_metric(
            SpaceFormTag::SPHERICAL,
            ScalarFn::constant(21.0 / 29.0),
            ScalarFn::constant(20.0 / 29.0),
            0.2,
            TAU,
        )
        .unwrap();
        let (f0, g0) = (0.2f64.cos(), 0.2f64.sin());
        let (e, f, g) = m.coeffs(0.0, PI / 3.0);
        let base = f0 - (21.0 / 29.0) * g0 * (PI / 3.0).cos();
        assert_relative_eq!(e, base * base + (20.0f64 / 29.0).powi(2) * g0 * g0, epsilon = 1e-14);
        assert_relative_eq!(f, (20.0 / 29.0) * g0 * g0, epsilon = 1e-14);
        assert_relative_eq!(g, g0 * g0, epsilon = 1e-14);
    }

    #[test]
    fn oversized_tube_is_degenerate() {
        // k1 rho0 = 1 kills E at psi = 0.
        assert!(matches!(
            circular_tube_metric(
                SpaceFormTag::FLAT,
                ScalarFn::constant(0.5),
                ScalarFn::constant(0.0),
                2.0,
                TAU
            ),
            Err(TubeError::TubeDegenerate { .. })
        ));
    }

    #[test]
    fn circular_profile_reduces_generalized_to_circular() {
        let prof = TubeProfile::circular(0.2).unwrap();
        for tag in [SpaceFormTag::SPHERICAL, SpaceFormTag::FLAT, SpaceFormTag::HYPERBOLIC] {
            let gen = generalized_tube_metric(
                tag,
                ScalarFn::constant(0.3),
                ScalarFn::constant(0.7),
                &prof,
                TAU,
            )
            .unwrap();
            let circ =
                circular_tube_metric(tag, ScalarFn::constant(0.3), ScalarFn::constant(0.7), 0.2, TAU)
                    .unwrap();
            for k in 0..60 {
                let s = 0.11 * k as f64;
                let psi = TAU * (k as f64 * 0.37).fract();
                let a = gen.jet(s, psi);
                let b = circ.jet(s, psi);
                assert_relative_eq!(a.e, b.e, epsilon = 1e-12);
                assert_relative_eq!(a.f, b.f, epsilon = 1e-12);
                assert_relative_eq!(a.g, b.g, epsilon = 1e-12);
                assert_relative_eq!(a.de_dpsi, b.de_dpsi, epsilon = 1e-12);
                assert_relative_eq!(a.df_dpsi, b.df_dpsi, epsilon = 1e-12);
                assert_relative_eq!(a.dg_dpsi, b.dg_dpsi, epsilon = 1e-12);
            }
        }
    }

    fn trefoil_profile(rho0: f64) -> TubeProfile {
        // (1 + 0.3 cos 3 psi) (cos psi, sin psi) expanded into harmonics.
        TubeProfile::fourier(
            rho0,
            vec![0.0, 1.0, 0.15, 0.0, 0.15],
            vec![],
            vec![],
            vec![0.0, 1.0, -0.15, 0.0, 0.15],
        )
        .unwrap()
    }

    #[test]
    fn trefoil_profile_expansion_matches_product_form() {
        let p = trefoil_profile(1.0);
        for k in 0..40 {
            let psi = TAU * k as f64 / 40.0;
            let bump = 1.0 + 0.3 * (3.0 * psi).cos();
            assert_relative_eq!(p.f(psi), bump * psi.cos(), epsilon = 1e-14);
            assert_relative_eq!(p.g(psi), bump * psi.sin(), epsilon = 1e-14);
        }
    }

    #[test]
    fn geodesic_tube_over_profile_is_a_flat_cylinder() {
        let prof = trefoil_profile(0.2);
        let m = generalized_tube_metric(
            SpaceFormTag::FLAT,
            ScalarFn::constant(0.0),
            ScalarFn::constant(0.0),
            &prof,
            TAU,
        )
        .unwrap();
        for k in 0..50 {
            let psi = TAU * k as f64 / 50.0;
            let (e, f, g) = m.coeffs(0.4, psi);
            let [_, fp, _, _, gp, _] = prof.jet(psi);
            assert_relative_eq!(e, 1.0, epsilon = 1e-13);
            assert!(f.abs() < 1e-15);
            assert_relative_eq!(g, 0.04 * (fp * fp + gp * gp), epsilon = 1e-12);
        }
    }

    #[test]
    fn generalized_tube_on_sphere_is_s_independent() {
        let prof = trefoil_profile(0.2);
        let m = generalized_tube_metric(
            SpaceFormTag::SPHERICAL,
            ScalarFn::constant(21.0 / 29.0),
            ScalarFn::constant(20.0 / 29.0),
            &prof,
            TAU * (14.5f64).sqrt(),
        )
        .unwrap();
        assert!(m.s_independent);
        assert!(m.max_s_derivative(64, 64) < 1e-10);
        m.validate_grid(64, 64).unwrap();
    }

    #[test]
    fn varying_curvature_clears_the_s_independent_flag() {
        let m = circular_tube_metric(
            SpaceFormTag::FLAT,
            ScalarFn::new(|s: f64| 0.3 + 0.1 * s.sin()),
            ScalarFn::constant(0.0),
            0.5,
            TAU,
        )
        .unwrap();
        assert!(!m.s_independent);
    }

    #[test]
    fn small_radius_recovers_arc_length_element() {
        let m = circular_tube_metric(
            SpaceFormTag::SPHERICAL,
            ScalarFn::constant(0.7),
            ScalarFn::constant(0.7),
            1e-6,
            TAU,
        )
        .unwrap();
        let (e, _, _) = m.coeffs(0.3, 1.0);
        assert_relative_eq!(e, 1.0, epsilon = 1e-5);
    }

    #[test]
    fn profiles_through_origin_or_self_crossing_are_rejected() {
        // Cardioid pinches down to r = 0 at psi = pi.
        let through_origin = TubeProfile::fourier(
            1.0,
            vec![1.0, 1.0],
            vec![],
            vec![],
            vec![0.0, 1.0],
        );
        match through_origin {
            Err(TubeError::ProfileNotSimple { .. }) => {}
            other => panic!("expected profile rejection, got {other:?}"),
        }
        let p = |f_cos: Vec<f64>, g_sin: Vec<f64>, g_cos: Vec<f64>| {
            TubeProfile::fourier(1.0, f_cos, vec![], g_cos, g_sin)
        };
        // A two-lobed curve offset from the origin self-intersects away
        // from r = 0.
        let crossing = p(vec![0.0, 0.3, 1.0], vec![0.0, 0.3, 1.0], vec![]);
        match crossing {
            Err(TubeError::ProfileNotSimple { .. }) => {}
            Ok(_) => panic!("expected self-intersection rejection"),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
