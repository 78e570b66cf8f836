//! First fundamental form of a tube surface over (s, psi), with first
//! partial derivatives, grid validation, and CSV round-tripping.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Result, TubeError};
use crate::interp::PeriodicSpline2;

/// Metric coefficients and their first partials at one point.
#[derive(Clone, Copy, Debug, Default)]
pub struct MetricJet {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub de_ds: f64,
    pub de_dpsi: f64,
    pub df_ds: f64,
    pub df_dpsi: f64,
    pub dg_ds: f64,
    pub dg_dpsi: f64,
}

impl MetricJet {
    pub fn det(&self) -> f64 {
        self.e * self.g - self.f * self.f
    }
}

pub type JetFn = Arc<dyn Fn(f64, f64) -> MetricJet + Send + Sync>;

#[derive(Clone)]
enum Backend {
    ClosedForm(JetFn),
    Sampled { e: PeriodicSpline2, f: PeriodicSpline2, g: PeriodicSpline2 },
}

/// Induced 2D metric of a tube, periodic in psi (and in s for closed
/// curves).
#[derive(Clone)]
pub struct InducedMetric2D {
    backend: Backend,
    pub s_period: f64,
    pub psi_period: f64,
    pub s_independent: bool,
    /// Largest coefficient variation across s rows of the sample grid;
    /// zero for closed-form metrics flagged s-independent.
    pub s_sample_spread: f64,
    /// Key-value description echoed into output headers.
    pub meta: Vec<(String, String)>,
}

impl std::fmt::Debug for InducedMetric2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InducedMetric2D")
            .field(
                "backend",
                &match self.backend {
                    Backend::ClosedForm(_) => "closed-form",
                    Backend::Sampled { .. } => "sampled",
                },
            )
            .field("s_period", &self.s_period)
            .field("psi_period", &self.psi_period)
            .field("s_independent", &self.s_independent)
            .field("meta", &self.meta)
            .finish()
    }
}

impl InducedMetric2D {
    pub fn closed_form(jet: JetFn, s_period: f64, s_independent: bool) -> Self {
        InducedMetric2D {
            backend: Backend::ClosedForm(jet),
            s_period,
            psi_period: std::f64::consts::TAU,
            s_independent,
            s_sample_spread: 0.0,
            meta: Vec::new(),
        }
    }

    /// Build from samples on the uniform grid s_i = i * s_period / n_s,
    /// psi_j = j * 2 pi / n_psi (no duplicated seam), stored row-major in s.
    pub fn from_samples(
        s_period: f64,
        n_s: usize,
        n_psi: usize,
        e_vals: &[f64],
        f_vals: &[f64],
        g_vals: &[f64],
    ) -> Result<Self> {
        let ds = s_period / n_s as f64;
        let dpsi = std::f64::consts::TAU / n_psi as f64;
        for (i, &ev) in e_vals.iter().enumerate() {
            let det = ev * g_vals[i] - f_vals[i] * f_vals[i];
            if det <= 0.0 || ev <= 0.0 || g_vals[i] <= 0.0 {
                let s = (i / n_psi) as f64 * ds;
                let psi = (i % n_psi) as f64 * dpsi;
                return Err(TubeError::TubeDegenerate { s, psi, det });
            }
        }
        let fit = |vals: &[f64]| PeriodicSpline2::fit(0.0, ds, n_s, 0.0, dpsi, n_psi, vals);
        let e = fit(e_vals)?;
        let f = fit(f_vals)?;
        let g = fit(g_vals)?;
        // Sampled s-independence: coefficient spread across s rows.
        let mut spread: f64 = 0.0;
        for j in 0..n_psi {
            for vals in [e_vals, f_vals, g_vals] {
                let first = vals[j];
                for i in 1..n_s {
                    spread = spread.max((vals[i * n_psi + j] - first).abs());
                }
            }
        }
        Ok(InducedMetric2D {
            backend: Backend::Sampled { e, f, g },
            s_period,
            psi_period: std::f64::consts::TAU,
            s_independent: spread < 1e-8,
            s_sample_spread: spread,
            meta: Vec::new(),
        })
    }

    pub fn with_meta(mut self, meta: Vec<(String, String)>) -> Self {
        self.meta = meta;
        self
    }

    pub fn jet(&self, s: f64, psi: f64) -> MetricJet {
        match &self.backend {
            Backend::ClosedForm(f) => f(s, psi),
            Backend::Sampled { e, f, g } => MetricJet {
                e: e.value(s, psi),
                f: f.value(s, psi),
                g: g.value(s, psi),
                de_ds: e.deriv_x(s, psi),
                de_dpsi: e.deriv_y(s, psi),
                df_ds: f.deriv_x(s, psi),
                df_dpsi: f.deriv_y(s, psi),
                dg_ds: g.deriv_x(s, psi),
                dg_dpsi: g.deriv_y(s, psi),
            },
        }
    }

    pub fn coeffs(&self, s: f64, psi: f64) -> (f64, f64, f64) {
        let j = self.jet(s, psi);
        (j.e, j.f, j.g)
    }

    /// Verify E > 0, G > 0, EG - F^2 > 0 on an n_s x n_psi grid.
    pub fn validate_grid(&self, n_s: usize, n_psi: usize) -> Result<()> {
        for i in 0..n_s {
            let s = self.s_period * i as f64 / n_s as f64;
            for j in 0..n_psi {
                let psi = self.psi_period * j as f64 / n_psi as f64;
                let m = self.jet(s, psi);
                if m.e <= 0.0 || m.g <= 0.0 || m.det() <= 0.0 {
                    return Err(TubeError::TubeDegenerate { s, psi, det: m.det() });
                }
            }
        }
        Ok(())
    }

    /// Largest |d/ds| of any coefficient over a grid.
    pub fn max_s_derivative(&self, n_s: usize, n_psi: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..n_s {
            let s = self.s_period * i as f64 / n_s as f64;
            for j in 0..n_psi {
                let psi = self.psi_period * j as f64 / n_psi as f64;
                let m = self.jet(s, psi);
                worst = worst.max(m.de_ds.abs()).max(m.df_ds.abs()).max(m.dg_ds.abs());
            }
        }
        worst
    }

    /// Write grid samples as CSV with '#'-prefixed header lines echoing the
    /// metric's metadata.
    pub fn to_csv(&self, path: &std::path::Path, n_s: usize, n_psi: usize) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| TubeError::io(path.display().to_string(), e))?;
        let mut out = std::io::BufWriter::new(file);
        let werr = |e: std::io::Error| TubeError::io(path.display().to_string(), e);
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}").map_err(werr)?;
        }
        writeln!(out, "# s_period: {:.17e}", self.s_period).map_err(werr)?;
        writeln!(out, "# grid: {n_s} {n_psi}").map_err(werr)?;
        writeln!(out, "# s_independent: {}", self.s_independent).map_err(werr)?;
        writeln!(out, "s,psi,E,F,G").map_err(werr)?;
        for i in 0..n_s {
            let s = self.s_period * i as f64 / n_s as f64;
            for j in 0..n_psi {
                let psi = self.psi_period * j as f64 / n_psi as f64;
                let m = self.jet(s, psi);
                writeln!(out, "{s:.17e},{psi:.17e},{:.17e},{:.17e},{:.17e}", m.e, m.f, m.g)
                    .map_err(werr)?;
            }
        }
        Ok(())
    }

    /// Rebuild a sampled metric from a CSV written by [`to_csv`].
    pub fn from_csv(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| TubeError::io(path.display().to_string(), e))?;
        let reader = std::io::BufReader::new(file);
        let mut meta = Vec::new();
        let mut s_period = None;
        let mut grid = None;
        let mut rows: Vec<[f64; 5]> = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|e| TubeError::io(path.display().to_string(), e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some((k, v)) = rest.split_once(':') {
                    let (k, v) = (k.trim(), v.trim());
                    match k {
                        "s_period" => {
                            s_period = Some(v.parse::<f64>().map_err(|_| {
                                TubeError::Config(format!("bad s_period `{v}` in {}", path.display()))
                            })?)
                        }
                        "grid" => {
                            let mut it = v.split_whitespace();
                            let ns = it.next().and_then(|x| x.parse::<usize>().ok());
                            let np = it.next().and_then(|x| x.parse::<usize>().ok());
                            match (ns, np) {
                                (Some(a), Some(b)) => grid = Some((a, b)),
                                _ => {
                                    return Err(TubeError::Config(format!(
                                        "bad grid line `{v}` in {}",
                                        path.display()
                                    )))
                                }
                            }
                        }
                        _ => meta.push((k.to_string(), v.to_string())),
                    }
                }
                continue;
            }
            if line.starts_with('s') {
                continue; // column header
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|tok| tok.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| {
                    TubeError::Config(format!("bad data row `{line}` in {}", path.display()))
                })?;
            if vals.len() != 5 {
                return Err(TubeError::Config(format!(
                    "expected 5 columns, got {} in {}",
                    vals.len(),
                    path.display()
                )));
            }
            rows.push([vals[0], vals[1], vals[2], vals[3], vals[4]]);
        }
        let (n_s, n_psi) =
            grid.ok_or_else(|| TubeError::Config(format!("missing grid header in {}", path.display())))?;
        let s_period = s_period
            .ok_or_else(|| TubeError::Config(format!("missing s_period header in {}", path.display())))?;
        if rows.len() != n_s * n_psi {
            return Err(TubeError::Config(format!(
                "expected {} rows, got {} in {}",
                n_s * n_psi,
                rows.len(),
                path.display()
            )));
        }
        let e: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let f: Vec<f64> = rows.iter().map(|r| r[3]).collect();
        let g: Vec<f64> = rows.iter().map(|r| r[4]).collect();
        Ok(Self::from_samples(s_period, n_s, n_psi, &e, &f, &g)?.with_meta(meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn torus_like() -> InducedMetric2D {
        let jet: JetFn = Arc::new(|_s, psi: f64| {
            let e = (1.0 - 0.5 * psi.cos()).powi(2);
            MetricJet {
                e,
                f: 0.0,
                g: 1.0,
                de_dpsi: 2.0 * (1.0 - 0.5 * psi.cos()) * 0.5 * psi.sin(),
                ..Default::default()
            }
        });
        InducedMetric2D::closed_form(jet, 4.0 * std::f64::consts::PI, true)
    }

    #[test]
    fn sampled_backend_matches_generator() {
        let (n_s, n_psi) = (96, 96);
        let l = 4.0 * std::f64::consts::PI;
        let gen = torus_like();
        let mut e = Vec::new();
        let mut f = Vec::new();
        let mut g = Vec::new();
        for i in 0..n_s {
            let s = l * i as f64 / n_s as f64;
            for j in 0..n_psi {
                let psi = TAU * j as f64 / n_psi as f64;
                let m = gen.jet(s, psi);
                e.push(m.e);
                f.push(m.f);
                g.push(m.g);
            }
        }
        let sampled = InducedMetric2D::from_samples(l, n_s, n_psi, &e, &f, &g).unwrap();
        assert!(sampled.s_independent);
        for k in 0..40 {
            let s = l * (k as f64 * 0.171).fract();
            let psi = TAU * (k as f64 * 0.377).fract();
            let a = gen.jet(s, psi);
            let b = sampled.jet(s, psi);
            assert_relative_eq!(a.e, b.e, epsilon = 1e-6);
            assert_relative_eq!(a.de_dpsi, b.de_dpsi, epsilon = 1e-4);
        }
    }

    #[test]
    fn degenerate_samples_are_rejected() {
        let e = vec![1.0; 16];
        let f = vec![2.0; 16]; // F^2 > EG
        let g = vec![1.0; 16];
        assert!(matches!(
            InducedMetric2D::from_samples(1.0, 4, 4, &e, &f, &g),
            Err(TubeError::TubeDegenerate { .. })
        ));
    }

    #[test]
    fn csv_roundtrip_preserves_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metric.csv");
        let gen = torus_like().with_meta(vec![("curve".into(), "circle(2)".into())]);
        gen.to_csv(&path, 64, 64).unwrap();
        let back = InducedMetric2D::from_csv(&path).unwrap();
        assert_relative_eq!(back.s_period, gen.s_period, epsilon = 1e-15);
        assert!(back.s_independent);
        assert_eq!(back.meta.iter().find(|(k, _)| k == "curve").unwrap().1, "circle(2)");
        for k in 0..25 {
            let s = gen.s_period * (k as f64 * 0.31).fract();
            let psi = TAU * (k as f64 * 0.73).fract();
            let (ea, _, ga) = gen.coeffs(s, psi);
            let (eb, _, gb) = back.coeffs(s, psi);
            assert_relative_eq!(ea, eb, epsilon = 1e-6);
            assert_relative_eq!(ga, gb, epsilon = 1e-9);
        }
    }

    #[test]
    fn grid_validation_flags_degeneracy() {
        let jet: JetFn = Arc::new(|_s, psi: f64| MetricJet {
            e: (1.0 - 1.2 * psi.cos()).powi(2) - 0.1,
            f: 0.0,
            g: 1.0,
            ..Default::default()
        });
        let m = InducedMetric2D::closed_form(jet, TAU, true);
        assert!(matches!(m.validate_grid(64, 64), Err(TubeError::TubeDegenerate { .. })));
    }
}
