//! Experiment configuration: a strict TOML schema mapped onto the library's
//! charts, curves, and profiles.
//!
//! Unknown keys are rejected at parse time and validation errors name the
//! offending key, so a typo cannot silently change an experiment. The full
//! config is echoed into every output header; stripping the "config: "
//! prefix from those lines recovers a TOML file that replays the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chart::ChartMetric;
use crate::curve::ParamCurve;
use crate::error::{Result, TubeError};
use crate::spaceform::TubeProfile;

fn cfg_err(msg: impl Into<String>) -> TubeError {
    TubeError::Config(msg.into())
}

fn need<T: Copy>(v: Option<T>, key: &str, kind: &str) -> Result<T> {
    v.ok_or_else(|| cfg_err(format!("{key} is required for kind = \"{kind}\"")))
}

fn forbid(absent: &[(&str, bool)], table: &str, kind: &str) -> Result<()> {
    for (name, present) in absent {
        if *present {
            return Err(cfg_err(format!(
                "{table}.{name} does not apply to {table}.kind = \"{kind}\""
            )));
        }
    }
    Ok(())
}

/// Top-level experiment description. Section tables are optional; each
/// pipeline demands the ones it needs and rejects contradictions.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Pipeline selector: frenet | tube-metric | geodesic | poincare |
    /// mesh | certify-s-independence.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldSpec>,
    pub curve: CurveSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

/// Chart selection. Catalog curves fix their own chart; when this table is
/// present it must agree, except that a user metric may reinterpret the
/// coordinate formulas of the Euclidean catalog curves.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    /// euclidean3 | sphere3_hopf | hyperbolic3_halfspace | ellipsoid3 | user.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Coordinate names of a user chart, e.g. ["u", "v", "w"].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<[String; 3]>,
    /// Upper-triangle metric components of a user chart as expressions in
    /// the named coordinates; missing off-diagonal entries are zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g11: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g12: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g13: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g22: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g23: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g33: Option<String>,
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<ChartMetric> {
        let user_keys = [
            ("coords", self.coords.is_some()),
            ("g11", self.g11.is_some()),
            ("g12", self.g12.is_some()),
            ("g13", self.g13.is_some()),
            ("g22", self.g22.is_some()),
            ("g23", self.g23.is_some()),
            ("g33", self.g33.is_some()),
        ];
        let axis_keys = [("a", self.a.is_some()), ("b", self.b.is_some())];
        match self.kind.as_str() {
            "euclidean3" => {
                forbid(&axis_keys, "manifold", "euclidean3")?;
                forbid(&user_keys, "manifold", "euclidean3")?;
                Ok(ChartMetric::euclidean3())
            }
            "sphere3_hopf" => {
                forbid(&axis_keys, "manifold", "sphere3_hopf")?;
                forbid(&user_keys, "manifold", "sphere3_hopf")?;
                Ok(ChartMetric::sphere3_hopf())
            }
            "hyperbolic3_halfspace" => {
                forbid(&axis_keys, "manifold", "hyperbolic3_halfspace")?;
                forbid(&user_keys, "manifold", "hyperbolic3_halfspace")?;
                Ok(ChartMetric::hyperbolic3_halfspace())
            }
            "ellipsoid3" | "ellipsoid3_degenerate" => {
                forbid(&user_keys, "manifold", "ellipsoid3")?;
                let a = need(self.a, "manifold.a", "ellipsoid3")?;
                let b = need(self.b, "manifold.b", "ellipsoid3")?;
                ChartMetric::ellipsoid3(a, b)
            }
            "user" => {
                forbid(&axis_keys, "manifold", "user")?;
                let coords = self
                    .coords
                    .as_ref()
                    .ok_or_else(|| cfg_err("manifold.coords is required for kind = \"user\""))?;
                for (key, comp) in [("g11", &self.g11), ("g22", &self.g22), ("g33", &self.g33)] {
                    if comp.is_none() {
                        return Err(cfg_err(format!(
                            "manifold.{key} is required for kind = \"user\""
                        )));
                    }
                }
                let mut entries: Vec<(usize, usize, &str)> = Vec::new();
                for (i, j, comp) in [
                    (0usize, 0usize, &self.g11),
                    (0, 1, &self.g12),
                    (0, 2, &self.g13),
                    (1, 1, &self.g22),
                    (1, 2, &self.g23),
                    (2, 2, &self.g33),
                ] {
                    if let Some(text) = comp {
                        entries.push((i, j, text.as_str()));
                    }
                }
                ChartMetric::from_expressions(
                    [coords[0].as_str(), coords[1].as_str(), coords[2].as_str()],
                    &entries,
                )
            }
            other => Err(cfg_err(format!(
                "manifold.kind: unknown chart \"{other}\" (expected euclidean3 | sphere3_hopf | \
                 hyperbolic3_halfspace | ellipsoid3 | user)"
            ))),
        }
    }
}

/// Base-curve selection from the built-in catalog.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    /// circle | helix | ellipse | hopf | ellipsoid_knot.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_semi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_semi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta0: Option<f64>,
    /// Frenet frames error out where the geodesic curvature drops below
    /// this floor (default 1e-8).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k1_min: Option<f64>,
}

impl CurveSpec {
    pub fn k1_min(&self) -> f64 {
        self.k1_min.unwrap_or(1e-8)
    }

    /// Normalized kind string.
    pub fn canonical_kind(&self) -> Result<&'static str> {
        match self.kind.as_str() {
            "circle" => Ok("circle"),
            "helix" => Ok("helix"),
            "ellipse" => Ok("ellipse"),
            "hopf" | "hopf_curve" => Ok("hopf"),
            "ellipsoid_knot" | "ellipsoid_curve" => Ok("ellipsoid_knot"),
            other => Err(cfg_err(format!(
                "curve.kind: unknown curve \"{other}\" (expected circle | helix | ellipse | \
                 hopf | ellipsoid_knot)"
            ))),
        }
    }

    pub fn build(&self) -> Result<ParamCurve> {
        let kind = self.canonical_kind()?;
        match kind {
            "circle" => {
                forbid(
                    &[
                        ("a", self.a.is_some()),
                        ("b", self.b.is_some()),
                        ("c", self.c.is_some()),
                        ("a_semi", self.a_semi.is_some()),
                        ("b_semi", self.b_semi.is_some()),
                        ("alpha", self.alpha.is_some()),
                        ("beta", self.beta.is_some()),
                        ("eta0", self.eta0.is_some()),
                    ],
                    "curve",
                    kind,
                )?;
                ParamCurve::circle(need(self.radius, "curve.radius", kind)?)
            }
            "helix" => {
                forbid(
                    &[
                        ("radius", self.radius.is_some()),
                        ("b", self.b.is_some()),
                        ("a_semi", self.a_semi.is_some()),
                        ("b_semi", self.b_semi.is_some()),
                        ("alpha", self.alpha.is_some()),
                        ("beta", self.beta.is_some()),
                        ("eta0", self.eta0.is_some()),
                    ],
                    "curve",
                    kind,
                )?;
                ParamCurve::helix(
                    need(self.a, "curve.a", kind)?,
                    need(self.c, "curve.c", kind)?,
                )
            }
            "ellipse" => {
                forbid(
                    &[
                        ("radius", self.radius.is_some()),
                        ("a", self.a.is_some()),
                        ("b", self.b.is_some()),
                        ("c", self.c.is_some()),
                        ("alpha", self.alpha.is_some()),
                        ("beta", self.beta.is_some()),
                        ("eta0", self.eta0.is_some()),
                    ],
                    "curve",
                    kind,
                )?;
                ParamCurve::ellipse(
                    need(self.a_semi, "curve.a_semi", kind)?,
                    need(self.b_semi, "curve.b_semi", kind)?,
                )
            }
            "hopf" => {
                forbid(
                    &[
                        ("radius", self.radius.is_some()),
                        ("a", self.a.is_some()),
                        ("b", self.b.is_some()),
                        ("c", self.c.is_some()),
                        ("a_semi", self.a_semi.is_some()),
                        ("b_semi", self.b_semi.is_some()),
                    ],
                    "curve",
                    kind,
                )?;
                ParamCurve::hopf(
                    need(self.alpha, "curve.alpha", kind)?,
                    need(self.beta, "curve.beta", kind)?,
                    need(self.eta0, "curve.eta0", kind)?,
                )
            }
            "ellipsoid_knot" => {
                forbid(
                    &[
                        ("radius", self.radius.is_some()),
                        ("c", self.c.is_some()),
                        ("a_semi", self.a_semi.is_some()),
                        ("b_semi", self.b_semi.is_some()),
                    ],
                    "curve",
                    kind,
                )?;
                ParamCurve::ellipsoid_knot(
                    need(self.a, "curve.a", kind)?,
                    need(self.b, "curve.b", kind)?,
                    need(self.alpha, "curve.alpha", kind)?,
                    need(self.beta, "curve.beta", kind)?,
                    need(self.eta0, "curve.eta0", kind)?,
                )
            }
            _ => unreachable!(),
        }
    }
}

/// Tube cross-section selection.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    /// circular | fourier.
    pub kind: String,
    pub rho0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_cos: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_sin: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_cos: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_sin: Option<Vec<f64>>,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<TubeProfile> {
        match self.kind.as_str() {
            "circular" => {
                forbid(
                    &[
                        ("f_cos", self.f_cos.is_some()),
                        ("f_sin", self.f_sin.is_some()),
                        ("g_cos", self.g_cos.is_some()),
                        ("g_sin", self.g_sin.is_some()),
                    ],
                    "profile",
                    "circular",
                )?;
                TubeProfile::circular(self.rho0)
            }
            "fourier" => TubeProfile::fourier(
                self.rho0,
                self.f_cos.clone().unwrap_or_default(),
                self.f_sin.clone().unwrap_or_default(),
                self.g_cos.clone().unwrap_or_default(),
                self.g_sin.clone().unwrap_or_default(),
            ),
            other => Err(cfg_err(format!(
                "profile.kind: unknown profile \"{other}\" (expected circular | fourier)"
            ))),
        }
    }
}

/// Which induced-metric backend the flow pipelines use.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    /// closed-form (default) | sampled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    /// Cross-check the two backends on the sampling grid and report the
    /// largest coefficient deviation in the summary.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_psi: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    /// Arc length of each geodesic run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Energy-drift target; the step controller runs tighter than this.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    /// Unit-speed seeds as [s0, psi0, launch_angle] triples; the angle is
    /// measured in the orthonormal frame of the metric at (s0, psi0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<[f64; 3]>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_crossings: Option<usize>,
    /// Explicit (psi0, p_psi0) seeds on the section plane s = 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<[f64; 2]>>,
    /// Append the stock seed grid psi0 = 0, p_psi0 in {-0.9, ..., 0.9}.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_grid: Option<bool>,
    /// Append the four seeds next to the circular-limit separatrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub near_separatrix: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossing_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Required sign of p_s at recorded crossings (+1 or -1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<f64>,
    /// Order of the Fourier curve fitted per orbit for the regularity score.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fourier_order: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    /// Number of (s, psi) probe pairs along the curve.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    /// Stereographically project mesh vertices from the unit-sphere chart
    /// to Euclidean coordinates (defaults to true on sphere3_hopf).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub project_s3: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TubeError::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| cfg_err(format!("config parse error: {e}")))?;
        cfg.canonical_kind()?;
        cfg.curve.canonical_kind()?;
        Ok(cfg)
    }

    /// Normalized pipeline name.
    pub fn canonical_kind(&self) -> Result<&'static str> {
        match self.kind.as_str() {
            "frenet" => Ok("frenet"),
            "tube-metric" | "tube_metric" => Ok("tube-metric"),
            "geodesic" => Ok("geodesic"),
            "poincare" => Ok("poincare"),
            "mesh" => Ok("mesh"),
            "certify" | "certify-s-independence" => Ok("certify-s-independence"),
            other => Err(cfg_err(format!(
                "kind: unknown pipeline \"{other}\" (expected frenet | tube-metric | geodesic | \
                 poincare | mesh | certify-s-independence)"
            ))),
        }
    }

    /// Curve with the configured chart attached. A [manifold] table must
    /// match the catalog curve's native chart; the one exception is a user
    /// metric, which may reinterpret the coordinate formulas of the
    /// Euclidean curves (circle, helix, ellipse).
    pub fn build_curve(&self) -> Result<ParamCurve> {
        let mut curve = self.curve.build()?;
        if let Some(m) = &self.manifold {
            let chart = m.build()?;
            let native = curve.chart.describe();
            let given = chart.describe();
            if given != native {
                let euclidean_formulas =
                    matches!(self.curve.canonical_kind()?, "circle" | "helix" | "ellipse");
                if euclidean_formulas && m.kind == "user" {
                    curve.chart = chart;
                } else {
                    return Err(cfg_err(format!(
                        "manifold.kind: \"{given}\" conflicts with curve.kind = \"{}\" (native \
                         chart {native}); omit [manifold] or make them match",
                        self.curve.kind
                    )));
                }
            }
        }
        Ok(curve)
    }

    pub fn build_profile(&self) -> Result<TubeProfile> {
        self.profile
            .as_ref()
            .ok_or_else(|| {
                cfg_err(format!(
                    "[profile] table is required for kind = \"{}\"",
                    self.kind
                ))
            })?
            .build()
    }

    pub fn metric_backend(&self) -> Result<&str> {
        let backend = self
            .metric
            .as_ref()
            .and_then(|m| m.backend.as_deref())
            .unwrap_or("closed-form");
        match backend {
            "closed-form" | "sampled" | "profile-fit" => Ok(backend),
            other => Err(cfg_err(format!(
                "metric.backend: unknown backend \"{other}\" (expected closed-form | sampled | profile-fit)"
            ))),
        }
    }

    pub fn compare_backends(&self) -> bool {
        self.metric.as_ref().and_then(|m| m.compare).unwrap_or(false)
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        let g = self.grid.as_ref();
        (
            g.and_then(|g| g.n_s).unwrap_or(64),
            g.and_then(|g| g.n_psi).unwrap_or(64),
        )
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(
            self.output
                .as_ref()
                .and_then(|o| o.dir.as_deref())
                .unwrap_or("out"),
        )
    }

    pub fn prefix(&self) -> String {
        if let Some(p) = self.output.as_ref().and_then(|o| o.prefix.as_deref()) {
            return p.to_string();
        }
        match self.canonical_kind().unwrap_or("run") {
            "tube-metric" => "metric".to_string(),
            "certify-s-independence" => "certify".to_string(),
            "poincare" => "section".to_string(),
            k => k.to_string(),
        }
    }

    /// Config reproduced line by line for output headers.
    pub fn echo_meta(&self) -> Vec<(String, String)> {
        let text = toml::to_string(self)
            .unwrap_or_else(|e| format!("unserializable-config = \"{e}\""));
        text.lines()
            .map(|l| ("config".to_string(), l.to_string()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const POINCARE_TOML: &str = r#"
kind = "poincare"

[curve]
kind = "ellipse"
a_semi = 2.0
b_semi = 2.5

[profile]
kind = "circular"
rho0 = 0.5

[section]
n_crossings = 400
seed_grid = true
near_separatrix = true
"#;

    #[test]
    fn parses_a_complete_poincare_config() {
        let cfg = ExperimentConfig::from_toml(POINCARE_TOML).unwrap();
        assert_eq!(cfg.canonical_kind().unwrap(), "poincare");
        let curve = cfg.build_curve().unwrap();
        assert_eq!(curve.name, "ellipse(a=2, b=2.5)");
        let profile = cfg.build_profile().unwrap();
        assert_eq!(profile.rho0, 0.5);
        assert!(profile.circular);
        assert_eq!(cfg.grid_dims(), (64, 64));
        assert_eq!(cfg.prefix(), "section");
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let bad = POINCARE_TOML.replace("a_semi", "a_semni");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("a_semni"), "error should name the bad key: {msg}");
    }

    #[test]
    fn unknown_kind_is_rejected_with_choices() {
        let bad = POINCARE_TOML.replace("\"poincare\"", "\"poincaire\"");
        let msg = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("poincaire") && msg.contains("certify-s-independence"), "{msg}");
    }

    #[test]
    fn missing_and_foreign_curve_parameters_are_named() {
        let missing = POINCARE_TOML.replace("a_semi = 2.0\n", "");
        let msg = ExperimentConfig::from_toml(&missing)
            .unwrap()
            .build_curve()
            .unwrap_err()
            .to_string();
        assert!(msg.contains("curve.a_semi"), "{msg}");

        let foreign = POINCARE_TOML.replace("a_semi = 2.0", "a_semi = 2.0\nalpha = 5.0");
        let msg = ExperimentConfig::from_toml(&foreign)
            .unwrap()
            .build_curve()
            .unwrap_err()
            .to_string();
        assert!(msg.contains("curve.alpha"), "{msg}");
    }

    #[test]
    fn manifold_table_must_match_catalog_chart() {
        let cfg = ExperimentConfig::from_toml(
            r#"
kind = "mesh"

[manifold]
kind = "sphere3_hopf"

[curve]
kind = "hopf"
alpha = 5.0
beta = 2.0
eta0 = 0.7853981633974483

[profile]
kind = "circular"
rho0 = 0.2
"#,
        )
        .unwrap();
        assert_eq!(cfg.build_curve().unwrap().chart.describe(), "sphere3_hopf");

        let clash = ExperimentConfig::from_toml(
            r#"
kind = "frenet"

[manifold]
kind = "euclidean3"

[curve]
kind = "hopf"
alpha = 5.0
beta = 2.0
eta0 = 0.7853981633974483
"#,
        )
        .unwrap();
        let msg = clash.build_curve().unwrap_err().to_string();
        assert!(msg.contains("conflicts with curve.kind"), "{msg}");
    }

    #[test]
    fn user_metric_overrides_chart_of_coordinate_curves() {
        let cfg = ExperimentConfig::from_toml(
            r#"
kind = "frenet"

[manifold]
kind = "user"
coords = ["x", "y", "z"]
g11 = "1"
g22 = "1"
g33 = "1"

[curve]
kind = "circle"
radius = 2.0
"#,
        )
        .unwrap();
        let curve = cfg.build_curve().unwrap();
        assert_eq!(curve.chart.describe(), "user(x, y, z)");
        // Flat metric in disguise: the circle's curvature must come out 1/R.
        let table = curve.arclength_reparam(64).unwrap();
        let (k1, k2) = curve.curvature_scalars(&table, 1.0, 1e-8).unwrap();
        assert!((k1 - 0.5).abs() < 1e-6, "k1 = {k1}");
        assert!(k2.abs() < 1e-6, "k2 = {k2}");
    }

    #[test]
    fn user_metric_requires_diagonal_components() {
        let cfg = ExperimentConfig::from_toml(
            r#"
kind = "frenet"

[manifold]
kind = "user"
coords = ["x", "y", "z"]
g11 = "1"
g22 = "1"

[curve]
kind = "circle"
radius = 2.0
"#,
        )
        .unwrap();
        let msg = cfg.build_curve().unwrap_err().to_string();
        assert!(msg.contains("manifold.g33"), "{msg}");
    }

    #[test]
    fn echo_meta_round_trips_the_config() {
        let cfg = ExperimentConfig::from_toml(POINCARE_TOML).unwrap();
        let echoed: String = cfg
            .echo_meta()
            .iter()
            .map(|(_, v)| format!("{v}\n"))
            .collect();
        let back = ExperimentConfig::from_toml(&echoed).unwrap();
        assert_eq!(back.kind, cfg.kind);
        assert_eq!(back.curve.a_semi, cfg.curve.a_semi);
        assert_eq!(
            back.section.as_ref().unwrap().n_crossings,
            cfg.section.as_ref().unwrap().n_crossings
        );
    }
}
