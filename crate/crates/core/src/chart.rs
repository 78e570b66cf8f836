//! Coordinate charts on 3-manifolds: metric, Christoffel symbols, Riemann
//! tensor, and sectional curvature.
//!
//! Built-in charts carry hand-coded Christoffels and their first
//! derivatives; the Riemann tensor is assembled from those. User-supplied
//! metrics are differentiated by central finite differences.

use std::sync::Arc;

use nalgebra::Matrix3;

use crate::error::{Result, TubeError};
use crate::expr::Expr;

/// Christoffel symbols indexed as `gamma[i][j][k]` = Γ^i_jk.
pub type Gamma3 = [[[f64; 3]; 3]; 3];
/// Rank-4 tensor indexed as `r[i][j][k][l]`.
pub type Riemann3 = [[[[f64; 3]; 3]; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChristoffelMode {
    Analytic,
    FiniteDifference,
}

/// A vector attached to a chart point.
#[derive(Clone, Copy, Debug)]
pub struct TangentVector {
    pub base: [f64; 3],
    pub components: [f64; 3],
}

impl TangentVector {
    pub fn norm(&self, chart: &ChartMetric) -> Result<f64> {
        Ok(chart.inner(&self.base, &self.components, &self.components)?.sqrt())
    }
}

#[derive(Clone, Debug)]
struct UserMetric {
    coords: [String; 3],
    // Upper triangle (i <= j); the metric is mirrored from these.
    comps: [[Option<Expr>; 3]; 3],
}

#[derive(Clone, Debug)]
enum ChartKind {
    Euclidean3,
    Sphere3Hopf,
    Hyperbolic3HalfSpace,
    Ellipsoid3 { a: f64, b: f64 },
    User(Arc<UserMetric>),
}

/// A coordinate chart with its metric tensor.
#[derive(Clone, Debug)]
pub struct ChartMetric {
    kind: ChartKind,
    pub mode: ChristoffelMode,
}

/// Metric and its inverse at one point.
#[derive(Clone, Copy, Debug)]
pub struct MetricAt {
    pub g: Matrix3<f64>,
    pub g_inv: Matrix3<f64>,
}

/// Riemann tensor at one point, as R^i_jkl and fully lowered R_ijkl.
#[derive(Clone, Debug)]
pub struct RiemannAt {
    pub up: Riemann3,
    pub down: Riemann3,
}

const ETA_MARGIN: f64 = 1e-9;

impl ChartMetric {
    pub fn euclidean3() -> Self {
        ChartMetric { kind: ChartKind::Euclidean3, mode: ChristoffelMode::Analytic }
    }

    /// Unit 3-sphere in Hopf-style coordinates (eta, theta, phi) with
    /// g = diag(1, sin^2 eta, cos^2 eta) and eta in the open interval
    /// (0, pi/2).
    pub fn sphere3_hopf() -> Self {
        ChartMetric { kind: ChartKind::Sphere3Hopf, mode: ChristoffelMode::Analytic }
    }

    /// Hyperbolic 3-space in upper half-space coordinates (x, y, z > 0) with
    /// g = z^-2 * identity.
    pub fn hyperbolic3_halfspace() -> Self {
        ChartMetric { kind: ChartKind::Hyperbolic3HalfSpace, mode: ChristoffelMode::Analytic }
    }

    /// Degenerate 3-ellipsoid (two axes a, one pair b) in coordinates
    /// (eta, theta, phi) with g = diag(a^2 cos^2 + b^2 sin^2, a^2 sin^2,
    /// b^2 cos^2) of eta.
    pub fn ellipsoid3(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(TubeError::Config(format!("ellipsoid axes must be positive, got a={a}, b={b}")));
        }
        Ok(ChartMetric { kind: ChartKind::Ellipsoid3 { a, b }, mode: ChristoffelMode::Analytic })
    }

    /// Metric from symbolic component expressions in the named coordinates.
    /// `entries` holds the upper triangle as (i, j, expression text) with
    /// i <= j; missing off-diagonal entries are zero. Differentiation is
    /// always by finite differences.
    pub fn from_expressions(coords: [&str; 3], entries: &[(usize, usize, &str)]) -> Result<Self> {
        let names: Vec<&str> = coords.to_vec();
        let mut comps: [[Option<Expr>; 3]; 3] = Default::default();
        for &(i, j, text) in entries {
            if i > 2 || j > 2 || i > j {
                return Err(TubeError::Config(format!(
                    "metric component index ({},{}) out of range or below the diagonal",
                    i + 1,
                    j + 1
                )));
            }
            comps[i][j] = Some(Expr::parse(text, &names)?);
        }
        for d in 0..3 {
            if comps[d][d].is_none() {
                return Err(TubeError::Config(format!("missing diagonal metric component g{}{}", d + 1, d + 1)));
            }
        }
        let user = UserMetric {
            coords: [coords[0].to_string(), coords[1].to_string(), coords[2].to_string()],
            comps,
        };
        Ok(ChartMetric { kind: ChartKind::User(Arc::new(user)), mode: ChristoffelMode::FiniteDifference })
    }

    pub fn with_mode(mut self, mode: ChristoffelMode) -> Result<Self> {
        if matches!(self.kind, ChartKind::User(_)) && mode == ChristoffelMode::Analytic {
            return Err(TubeError::Config(
                "analytic christoffel_mode is only available for built-in charts".into(),
            ));
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        3
    }

    /// Curvature constant for charts that are space forms.
    pub fn space_form_k0(&self) -> Option<f64> {
        match self.kind {
            ChartKind::Euclidean3 => Some(0.0),
            ChartKind::Sphere3Hopf => Some(1.0),
            ChartKind::Hyperbolic3HalfSpace => Some(-1.0),
            ChartKind::Ellipsoid3 { a, b } if a == b => Some(1.0 / (a * a)),
            _ => None,
        }
    }

    /// Short label echoed into output headers.
    pub fn describe(&self) -> String {
        match &self.kind {
            ChartKind::Euclidean3 => "euclidean3".into(),
            ChartKind::Sphere3Hopf => "sphere3_hopf".into(),
            ChartKind::Hyperbolic3HalfSpace => "hyperbolic3_halfspace".into(),
            ChartKind::Ellipsoid3 { a, b } => format!("ellipsoid3(a={a}, b={b})"),
            ChartKind::User(u) => {
                format!("user({}, {}, {})", u.coords[0], u.coords[1], u.coords[2])
            }
        }
    }

    pub fn coord_names(&self) -> [&str; 3] {
        match &self.kind {
            ChartKind::Euclidean3 | ChartKind::Hyperbolic3HalfSpace => ["x", "y", "z"],
            ChartKind::Sphere3Hopf | ChartKind::Ellipsoid3 { .. } => ["eta", "theta", "phi"],
            ChartKind::User(u) => [&u.coords[0], &u.coords[1], &u.coords[2]],
        }
    }

    pub fn check_domain(&self, x: &[f64; 3]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(TubeError::LeftChartDomain { point: *x });
        }
        match self.kind {
            ChartKind::Sphere3Hopf | ChartKind::Ellipsoid3 { .. } => {
                let eta = x[0];
                if eta <= ETA_MARGIN || eta >= std::f64::consts::FRAC_PI_2 - ETA_MARGIN {
                    return Err(TubeError::LeftChartDomain { point: *x });
                }
            }
            ChartKind::Hyperbolic3HalfSpace => {
                if x[2] <= 1e-12 {
                    return Err(TubeError::LeftChartDomain { point: *x });
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn metric_raw(&self, x: &[f64; 3]) -> Result<Matrix3<f64>> {
        self.check_domain(x)?;
        let g = match &self.kind {
            ChartKind::Euclidean3 => Matrix3::identity(),
            ChartKind::Sphere3Hopf => {
                let (s, c) = x[0].sin_cos();
                Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, s * s, c * c))
            }
            ChartKind::Hyperbolic3HalfSpace => {
                let w = 1.0 / (x[2] * x[2]);
                Matrix3::from_diagonal(&nalgebra::Vector3::new(w, w, w))
            }
            ChartKind::Ellipsoid3 { a, b } => {
                let (s, c) = x[0].sin_cos();
                Matrix3::from_diagonal(&nalgebra::Vector3::new(
                    a * a * c * c + b * b * s * s,
                    a * a * s * s,
                    b * b * c * c,
                ))
            }
            ChartKind::User(u) => {
                let mut g = Matrix3::zeros();
                for i in 0..3 {
                    for j in i..3 {
                        let v = u.comps[i][j].as_ref().map_or(0.0, |e| e.eval(x));
                        g[(i, j)] = v;
                        g[(j, i)] = v;
                    }
                }
                g
            }
        };
        let scale = g.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
        for i in 0..3 {
            for j in 0..3 {
                if !g[(i, j)].is_finite() {
                    return Err(TubeError::DegenerateMetric { point: *x });
                }
                if (g[(i, j)] - g[(j, i)]).abs() > 1e-14 * scale {
                    return Err(TubeError::DegenerateMetric { point: *x });
                }
            }
        }
        Ok(g)
    }

    /// Metric tensor and its inverse at x.
    ///
    /// Positive definiteness is verified by Cholesky factorization; the
    /// reconstruction g * g^-1 is checked against the identity to 1e-12.
    pub fn metric_at(&self, x: &[f64; 3]) -> Result<MetricAt> {
        let g = self.metric_raw(x)?;
        let chol = nalgebra::Cholesky::new(g).ok_or(TubeError::DegenerateMetric { point: *x })?;
        let g_inv = chol.inverse();
        let resid = (g * g_inv - Matrix3::identity())
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        if resid > 1e-12 {
            return Err(TubeError::DegenerateMetric { point: *x });
        }
        Ok(MetricAt { g, g_inv })
    }

    /// Metric inner product of two tangent vectors at x.
    pub fn inner(&self, x: &[f64; 3], u: &[f64; 3], v: &[f64; 3]) -> Result<f64> {
        let g = self.metric_at(x)?.g;
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += g[(i, j)] * u[i] * v[j];
            }
        }
        Ok(acc)
    }

    pub fn norm(&self, x: &[f64; 3], u: &[f64; 3]) -> Result<f64> {
        Ok(self.inner(x, u, u)?.sqrt())
    }

    /// Metric cross product (u x v)^i = g^im sqrt(det g) eps_mjk u^j v^k,
    /// which completes two orthonormal vectors to an oriented orthonormal
    /// triple.
    pub fn cross(&self, x: &[f64; 3], u: &[f64; 3], v: &[f64; 3]) -> Result<[f64; 3]> {
        let m = self.metric_at(x)?;
        let vol = m.g.determinant().max(0.0).sqrt();
        let raw = [
            vol * (u[1] * v[2] - u[2] * v[1]),
            vol * (u[2] * v[0] - u[0] * v[2]),
            vol * (u[0] * v[1] - u[1] * v[0]),
        ];
        let mut out = [0.0; 3];
        for i in 0..3 {
            for mi in 0..3 {
                out[i] += m.g_inv[(i, mi)] * raw[mi];
            }
        }
        Ok(out)
    }

    /// Christoffel symbols Γ^i_jk at x, exactly symmetric in (j, k).
    pub fn christoffel_at(&self, x: &[f64; 3]) -> Result<Gamma3> {
        if self.mode == ChristoffelMode::FiniteDifference {
            return self.christoffel_fd(x);
        }
        self.check_domain(x)?;
        let mut gamma: Gamma3 = [[[0.0; 3]; 3]; 3];
        match self.kind {
            ChartKind::Euclidean3 => {}
            ChartKind::Sphere3Hopf => fill_ellipsoid_gamma(&mut gamma, x[0], 1.0, 1.0),
            ChartKind::Ellipsoid3 { a, b } => fill_ellipsoid_gamma(&mut gamma, x[0], a, b),
            ChartKind::Hyperbolic3HalfSpace => {
                let iz = 1.0 / x[2];
                gamma[0][0][2] = -iz;
                gamma[0][2][0] = -iz;
                gamma[1][1][2] = -iz;
                gamma[1][2][1] = -iz;
                gamma[2][2][2] = -iz;
                gamma[2][0][0] = iz;
                gamma[2][1][1] = iz;
            }
            ChartKind::User(_) => unreachable!("user charts always use finite differences"),
        }
        Ok(gamma)
    }

    fn christoffel_fd(&self, x: &[f64; 3]) -> Result<Gamma3> {
        let g_inv = self.metric_at(x)?.g_inv;
        // dg[d] = d g / d x_d by central differences.
        let mut dg = [Matrix3::zeros(); 3];
        for d in 0..3 {
            let h = 1e-5 * x[d].abs().max(1.0);
            let mut xp = *x;
            let mut xm = *x;
            xp[d] += h;
            xm[d] -= h;
            dg[d] = (self.metric_raw(&xp)? - self.metric_raw(&xm)?) / (2.0 * h);
        }
        let mut gamma: Gamma3 = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in j..3 {
                    let mut acc = 0.0;
                    for m in 0..3 {
                        acc += g_inv[(i, m)] * (dg[j][(m, k)] + dg[k][(m, j)] - dg[m][(j, k)]);
                    }
                    let v = 0.5 * acc;
                    gamma[i][j][k] = v;
                    gamma[i][k][j] = v;
                }
            }
        }
        Ok(gamma)
    }

    /// First partial derivatives of the Christoffels:
    /// `out[d][i][j][k]` = ∂_d Γ^i_jk.
    fn gamma_partials(&self, x: &[f64; 3]) -> Result<Riemann3> {
        let mut dgamma: Riemann3 = [[[[0.0; 3]; 3]; 3]; 3];
        if self.mode == ChristoffelMode::FiniteDifference {
            for d in 0..3 {
                let h = 1e-4 * x[d].abs().max(1.0);
                let mut xp = *x;
                let mut xm = *x;
                xp[d] += h;
                xm[d] -= h;
                let gp = self.christoffel_fd(&xp)?;
                let gm = self.christoffel_fd(&xm)?;
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            dgamma[d][i][j][k] = (gp[i][j][k] - gm[i][j][k]) / (2.0 * h);
                        }
                    }
                }
            }
            return Ok(dgamma);
        }
        self.check_domain(x)?;
        match self.kind {
            ChartKind::Euclidean3 => {}
            ChartKind::Sphere3Hopf => fill_ellipsoid_dgamma(&mut dgamma, x[0], 1.0, 1.0),
            ChartKind::Ellipsoid3 { a, b } => fill_ellipsoid_dgamma(&mut dgamma, x[0], a, b),
            ChartKind::Hyperbolic3HalfSpace => {
                let iz2 = 1.0 / (x[2] * x[2]);
                dgamma[2][0][0][2] = iz2;
                dgamma[2][0][2][0] = iz2;
                dgamma[2][1][1][2] = iz2;
                dgamma[2][1][2][1] = iz2;
                dgamma[2][2][2][2] = iz2;
                dgamma[2][2][0][0] = -iz2;
                dgamma[2][2][1][1] = -iz2;
            }
            ChartKind::User(_) => unreachable!("user charts always use finite differences"),
        }
        Ok(dgamma)
    }

    /// Riemann tensor at x with the convention
    /// R^i_jkl = ∂_k Γ^i_lj − ∂_l Γ^i_kj + Γ^i_km Γ^m_lj − Γ^i_lm Γ^m_kj,
    /// for which the unit 3-sphere has sectional curvature +1.
    pub fn riemann_at(&self, x: &[f64; 3]) -> Result<RiemannAt> {
        let gamma = self.christoffel_at(x)?;
        let dgamma = self.gamma_partials(x)?;
        let g = self.metric_at(x)?.g;
        let mut up: Riemann3 = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let mut v = dgamma[k][i][l][j] - dgamma[l][i][k][j];
                        for m in 0..3 {
                            v += gamma[i][k][m] * gamma[m][l][j] - gamma[i][l][m] * gamma[m][k][j];
                        }
                        up[i][j][k][l] = v;
                    }
                }
            }
        }
        let mut down: Riemann3 = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let mut v = 0.0;
                        for m in 0..3 {
                            v += g[(i, m)] * up[m][j][k][l];
                        }
                        down[i][j][k][l] = v;
                    }
                }
            }
        }
        Ok(RiemannAt { up, down })
    }

    /// Sectional curvature of the plane spanned by u and v at x.
    pub fn sectional_curvature(&self, x: &[f64; 3], u: &[f64; 3], v: &[f64; 3]) -> Result<f64> {
        let m = self.metric_at(x)?;
        let pair = |a: &[f64; 3], b: &[f64; 3]| {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += m.g[(i, j)] * a[i] * b[j];
                }
            }
            acc
        };
        let gram = pair(u, u) * pair(v, v) - pair(u, v) * pair(u, v);
        if gram < 1e-12 {
            return Err(TubeError::DegeneratePlane { gram_det: gram });
        }
        let down = self.riemann_at(x)?.down;
        let mut num = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        num += down[i][j][k][l] * u[i] * v[j] * u[k] * v[l];
                    }
                }
            }
        }
        Ok(num / gram)
    }
}

/// Christoffels of g = diag(g1, g2, g3)(eta) for the degenerate ellipsoid
/// family; a = b = 1 is the round 3-sphere.
fn fill_ellipsoid_gamma(gamma: &mut Gamma3, eta: f64, a: f64, b: f64) {
    let s2 = (2.0 * eta).sin();
    let (s, c) = eta.sin_cos();
    let g1 = a * a * c * c + b * b * s * s;
    let g1p = (b * b - a * a) * s2;
    let g2p = a * a * s2;
    let g3p = -b * b * s2;
    gamma[0][0][0] = g1p / (2.0 * g1);
    gamma[0][1][1] = -g2p / (2.0 * g1);
    gamma[0][2][2] = -g3p / (2.0 * g1);
    let cot = c / s;
    let tan = s / c;
    gamma[1][0][1] = cot;
    gamma[1][1][0] = cot;
    gamma[2][0][2] = -tan;
    gamma[2][2][0] = -tan;
}

fn fill_ellipsoid_dgamma(dgamma: &mut Riemann3, eta: f64, a: f64, b: f64) {
    let (s2, c2) = (2.0 * eta).sin_cos();
    let (s, c) = eta.sin_cos();
    let g1 = a * a * c * c + b * b * s * s;
    let g1p = (b * b - a * a) * s2;
    let g1pp = 2.0 * (b * b - a * a) * c2;
    let g2p = a * a * s2;
    let g2pp = 2.0 * a * a * c2;
    let g3p = -b * b * s2;
    let g3pp = -2.0 * b * b * c2;
    dgamma[0][0][0][0] = g1pp / (2.0 * g1) - g1p * g1p / (2.0 * g1 * g1);
    dgamma[0][0][1][1] = -g2pp / (2.0 * g1) + g2p * g1p / (2.0 * g1 * g1);
    dgamma[0][0][2][2] = -g3pp / (2.0 * g1) + g3p * g1p / (2.0 * g1 * g1);
    let dcot = -1.0 / (s * s);
    let dtan = -1.0 / (c * c);
    dgamma[0][1][0][1] = dcot;
    dgamma[0][1][1][0] = dcot;
    dgamma[0][2][0][2] = dtan;
    dgamma[0][2][2][0] = dtan;
}
