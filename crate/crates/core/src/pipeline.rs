//! Experiment pipelines behind the command-line runner: build the
//! configured geometry, run the requested computation, write artifacts,
//! and collect a printable summary.

use std::path::PathBuf;

use crate::config::ExperimentConfig;
use crate::curve::ParamCurve;
use crate::error::{Result, TubeError};
use crate::export::{write_csv, write_obj, write_svg_scatter};
use crate::flow::{integrate_batch, integrate_capped, unit_speed_seed};
use crate::jacobi::{s_independence_certificate, tube_metric_numeric, tube_metric_profile};
use crate::mesh::{project_mesh_s3, sample_tube_mesh};
use crate::metric2d::InducedMetric2D;
use crate::section::{regularity_score, section, SectionConfig, DEFAULT_FOURIER_ORDER};
use crate::spaceform::{
    circular_tube_metric, generalized_tube_metric, ScalarFn, SpaceFormTag, TubeProfile,
};

fn cfg_err(msg: impl Into<String>) -> TubeError {
    TubeError::Config(msg.into())
}

/// What a pipeline run produced: files on disk plus the summary table.
#[derive(Debug)]
pub struct RunSummary {
    pub kind: String,
    pub artifacts: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl RunSummary {
    fn new(kind: &str) -> Self {
        RunSummary { kind: kind.to_string(), artifacts: Vec::new(), lines: Vec::new() }
    }

    fn push(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    fn artifact(&mut self, path: PathBuf) {
        self.lines.push(format!("wrote {}", path.display()));
        self.artifacts.push(path);
    }

    pub fn render(&self) -> String {
        let mut out = format!("pipeline: {}\n", self.kind);
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

/// Dispatch on the configured pipeline kind and run it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    let out_dir = config.out_dir();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| TubeError::io(out_dir.display().to_string(), e))?;
    match config.canonical_kind()? {
        "frenet" => run_frenet(config),
        "tube-metric" => run_tube_metric(config),
        "geodesic" => run_geodesic(config),
        "poincare" => run_poincare(config),
        "mesh" => run_mesh(config),
        "certify-s-independence" => run_certify(config),
        _ => unreachable!(),
    }
}

/// Curvature samples as a scalar function of arc length. Constant data
/// short-circuits to an exact constant; varying data on a closed curve is
/// projected onto a Fourier series; varying data on an open curve has no
/// period to fit on and is rejected.
fn curvature_scalar_fn(values: &[f64], total: f64, closed: bool, label: &str) -> Result<ScalarFn> {
    let scale = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if scale < 1e-8 {
        return Ok(ScalarFn::constant(0.0));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let dev = values.iter().fold(0.0f64, |m, &v| m.max((v - mean).abs()));
    if dev <= 1e-9 * scale.max(1.0) {
        return Ok(ScalarFn::constant(mean));
    }
    if closed {
        return ScalarFn::periodic_fit(values, total);
    }
    Err(cfg_err(format!(
        "metric.backend = \"closed-form\" needs constant curvature scalars on an open curve, \
         but {label} varies by {dev:.3e}; use backend = \"sampled\""
    )))
}

/// Closed-form space-form tube metric about a catalog curve.
fn closed_form_metric(
    curve: &ParamCurve,
    profile: &TubeProfile,
    k1_min: f64,
) -> Result<InducedMetric2D> {
    let k0 = curve.chart.space_form_k0().ok_or_else(|| {
        cfg_err(format!(
            "metric.backend = \"closed-form\" needs a space-form chart, got {}; use backend = \
             \"sampled\"",
            curve.chart.describe()
        ))
    })?;
    if (k0 - k0.round()).abs() > 1e-12 || k0.round().abs() > 1.0 {
        return Err(cfg_err(format!(
            "metric.backend = \"closed-form\" needs a unit-curvature space form (K0 in \
             {{-1, 0, 1}}), got K0 = {k0}; use backend = \"sampled\""
        )));
    }
    let tag = SpaceFormTag::new(k0.round() as i32)?;
    let table = curve.arclength_reparam(1024)?;
    let total = table.total;
    let n = 2048usize;
    let mut k1s = Vec::with_capacity(n);
    let mut k2s = Vec::with_capacity(n);
    for i in 0..n {
        let d = curve.frame_at(&table, total * i as f64 / n as f64, k1_min)?;
        k1s.push(d.k1);
        k2s.push(d.k2);
    }
    let k1 = curvature_scalar_fn(&k1s, total, curve.closed, "k1")?;
    let k2 = curvature_scalar_fn(&k2s, total, curve.closed, "k2")?;
    let metric = if profile.circular {
        circular_tube_metric(tag, k1, k2, profile.rho0, total)?
    } else {
        generalized_tube_metric(tag, k1, k2, profile, total)?
    };
    Ok(metric.with_meta(vec![
        ("chart".to_string(), curve.chart.describe()),
        ("curve".to_string(), curve.name.clone()),
        ("profile".to_string(), profile.describe()),
        ("backend".to_string(), "closed-form".to_string()),
    ]))
}

/// Induced tube metric with the configured backend.
fn build_metric(
    config: &ExperimentConfig,
    curve: &ParamCurve,
    profile: &TubeProfile,
) -> Result<InducedMetric2D> {
    match config.metric_backend()? {
        "closed-form" => closed_form_metric(curve, profile, config.curve.k1_min()),
        "sampled" => {
            let mut m = tube_metric_numeric(curve, profile, config.grid_dims())?;
            m.meta.push(("backend".to_string(), "sampled".to_string()));
            Ok(m)
        }
        "profile-fit" => tube_metric_profile(curve, profile, config.grid_dims().1),
        _ => unreachable!(),
    }
}

/// Largest |E|, |F|, |G| deviation between two metrics on a shared grid.
fn metric_deviation(
    a: &InducedMetric2D,
    b: &InducedMetric2D,
    n_s: usize,
    n_psi: usize,
) -> (f64, f64, f64) {
    let mut d = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..n_s {
        let s = a.s_period * i as f64 / n_s as f64;
        for j in 0..n_psi {
            let psi = std::f64::consts::TAU * j as f64 / n_psi as f64;
            let (ea, fa, ga) = a.coeffs(s, psi);
            let (eb, fb, gb) = b.coeffs(s, psi);
            d.0 = d.0.max((ea - eb).abs());
            d.1 = d.1.max((fa - fb).abs());
            d.2 = d.2.max((ga - gb).abs());
        }
    }
    d
}

fn run_frenet(config: &ExperimentConfig) -> Result<RunSummary> {
    let curve = config.build_curve()?;
    let (n_s, _) = config.grid_dims();
    if n_s < 2 {
        return Err(cfg_err(format!("grid.n_s must be at least 2, got {n_s}")));
    }
    let table = curve.arclength_reparam(n_s.max(64))?;
    let total = table.total;
    let denom = if curve.closed { n_s } else { n_s - 1 };
    let k1_min = config.curve.k1_min();
    let mut rows = Vec::with_capacity(n_s);
    let mut defect: f64 = 0.0;
    let (mut k1_lo, mut k1_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut k2_lo, mut k2_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n_s {
        let s = total * i as f64 / denom as f64;
        let d = curve.frame_at(&table, s, k1_min)?;
        let vecs = [d.t_vec, d.n_vec, d.b_vec];
        for a in 0..3 {
            for b in a..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                let got = curve.chart.inner(&d.x, &vecs[a], &vecs[b])?;
                defect = defect.max((got - want).abs());
            }
        }
        k1_lo = k1_lo.min(d.k1);
        k1_hi = k1_hi.max(d.k1);
        k2_lo = k2_lo.min(d.k2);
        k2_hi = k2_hi.max(d.k2);
        let mut row = vec![s];
        row.extend_from_slice(&d.x);
        row.extend_from_slice(&d.t_vec);
        row.extend_from_slice(&d.n_vec);
        row.extend_from_slice(&d.b_vec);
        row.push(d.k1);
        row.push(d.k2);
        rows.push(row);
    }
    let mut meta = config.echo_meta();
    meta.push(("chart".to_string(), curve.chart.describe()));
    meta.push(("curve".to_string(), curve.name.clone()));
    meta.push((
        "frame".to_string(),
        if curve.has_adapted_frame() { "adapted".to_string() } else { "frenet".to_string() },
    ));
    let path = config.out_dir().join(format!("{}.csv", config.prefix()));
    write_csv(
        &path,
        &meta,
        &[
            "s", "x1", "x2", "x3", "t1", "t2", "t3", "n1", "n2", "n3", "b1", "b2", "b3", "k1",
            "k2",
        ],
        &rows,
    )?;
    let mut summary = RunSummary::new("frenet");
    summary.push(format!("curve: {} in {}", curve.name, curve.chart.describe()));
    summary.push(format!("arc length: {total:.12}"));
    summary.push(format!(
        "frames: {n_s} ({})",
        if curve.has_adapted_frame() { "adapted" } else { "frenet" }
    ));
    summary.push(format!("max orthonormality defect: {defect:.3e}"));
    summary.push(format!("k1 range: [{k1_lo:.12}, {k1_hi:.12}]"));
    summary.push(format!("k2 range: [{k2_lo:.12}, {k2_hi:.12}]"));
    summary.push(format!(
        "constant scalars: {}",
        (k1_hi - k1_lo).abs().max((k2_hi - k2_lo).abs()) < 1e-9
    ));
    summary.artifact(path);
    Ok(summary)
}

fn run_tube_metric(config: &ExperimentConfig) -> Result<RunSummary> {
    let curve = config.build_curve()?;
    let profile = config.build_profile()?;
    let mut metric = build_metric(config, &curve, &profile)?;
    let (n_s, n_psi) = config.grid_dims();
    let mut min_det = f64::INFINITY;
    for i in 0..n_s {
        let s = metric.s_period * i as f64 / n_s as f64;
        for j in 0..n_psi {
            let psi = std::f64::consts::TAU * j as f64 / n_psi as f64;
            let (e, f, g) = metric.coeffs(s, psi);
            min_det = min_det.min(e * g - f * f);
        }
    }
    let mut summary = RunSummary::new("tube-metric");
    summary.push(format!("curve: {} in {}", curve.name, curve.chart.describe()));
    summary.push(format!("profile: {}", profile.describe()));
    summary.push(format!("backend: {}", config.metric_backend()?));
    summary.push(format!("s period: {:.12}", metric.s_period));
    summary.push(format!("s independent: {}", metric.s_independent));
    summary.push(format!("min det over {n_s}x{n_psi} grid: {min_det:.6e}"));
    if config.compare_backends() {
        let other = match config.metric_backend()? {
            "closed-form" => tube_metric_numeric(&curve, &profile, (n_s, n_psi))?,
            _ => closed_form_metric(&curve, &profile, config.curve.k1_min())?,
        };
        let (de, df, dg) = metric_deviation(&metric, &other, n_s, n_psi);
        summary.push(format!(
            "backend cross-check max |dE|, |dF|, |dG|: {de:.3e}, {df:.3e}, {dg:.3e}"
        ));
    }
    let mut meta = config.echo_meta();
    meta.append(&mut metric.meta);
    metric.meta = meta;
    let path = config.out_dir().join(format!("{}.csv", config.prefix()));
    metric.to_csv(&path, n_s, n_psi)?;
    summary.artifact(path);
    Ok(summary)
}

fn run_geodesic(config: &ExperimentConfig) -> Result<RunSummary> {
    let curve = config.build_curve()?;
    let profile = config.build_profile()?;
    let metric = build_metric(config, &curve, &profile)?;
    let flow = config.flow.as_ref();
    let length = flow.and_then(|f| f.length).unwrap_or(100.0);
    let tol = flow.and_then(|f| f.tol).unwrap_or(1e-10);
    let max_step = flow.and_then(|f| f.max_step).unwrap_or(0.0);
    let seed_specs = flow
        .and_then(|f| f.seeds.clone())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| cfg_err("flow.seeds is required for kind = \"geodesic\""))?;
    let seeds = seed_specs
        .iter()
        .map(|&[s0, psi0, angle]| unit_speed_seed(&metric, [s0, psi0], angle))
        .collect::<Result<Vec<_>>>()?;
    let trajectories = if max_step > 0.0 {
        seeds
            .iter()
            .map(|s| integrate_capped(&metric, s, length, tol, max_step))
            .collect::<Result<Vec<_>>>()?
    } else {
        integrate_batch(&metric, &seeds, length, tol)
            .into_iter()
            .collect::<Result<Vec<_>>>()?
    };
    let mut summary = RunSummary::new("geodesic");
    summary.push(format!("curve: {} in {}", curve.name, curve.chart.describe()));
    summary.push(format!("profile: {}", profile.describe()));
    summary.push(format!("backend: {}", config.metric_backend()?));
    summary.push(format!("length: {length}  tol: {tol:.1e}"));
    for (i, traj) in trajectories.iter().enumerate() {
        let mut meta = config.echo_meta();
        meta.push((
            "seed".to_string(),
            format!(
                "s0={} psi0={} angle={}",
                seed_specs[i][0], seed_specs[i][1], seed_specs[i][2]
            ),
        ));
        let path = config.out_dir().join(format!("{}_{i}.csv", config.prefix()));
        traj.to_csv(&path, &meta)?;
        summary.push(format!(
            "seed {i:2}: {:5} states  max |H - H0| = {:.3e}  max |p_s - p_s0| = {:.3e}",
            traj.states.len(),
            traj.max_h_drift,
            traj.max_ps_drift
        ));
        summary.artifact(path);
    }
    Ok(summary)
}

fn run_poincare(config: &ExperimentConfig) -> Result<RunSummary> {
    let curve = config.build_curve()?;
    let profile = config.build_profile()?;
    let metric = build_metric(config, &curve, &profile)?;
    let spec = config.section.as_ref();
    let mut seeds: Vec<(f64, f64)> = spec
        .and_then(|s| s.seeds.as_ref())
        .map(|v| v.iter().map(|&[a, b]| (a, b)).collect())
        .unwrap_or_default();
    let want_grid = spec.and_then(|s| s.seed_grid).unwrap_or(seeds.is_empty());
    if want_grid {
        seeds.extend(SectionConfig::stock_seed_grid());
    }
    if spec.and_then(|s| s.near_separatrix).unwrap_or(false) {
        seeds.extend(SectionConfig::near_separatrix_seeds());
    }
    if seeds.is_empty() {
        return Err(cfg_err(
            "section.seeds is empty and both seed grids are disabled; nothing to run",
        ));
    }
    let n_crossings = spec.and_then(|s| s.n_crossings).unwrap_or(400);
    let mut sc = SectionConfig::new(metric.s_period, n_crossings, seeds);
    if let Some(s) = spec {
        if let Some(v) = s.direction {
            sc.direction = v;
        }
        if let Some(v) = s.crossing_tol {
            sc.crossing_tol = v;
        }
        if let Some(v) = s.tol {
            sc.tol = v;
        }
    }
    let run = section(&metric, &sc)?;
    let mut summary = RunSummary::new("poincare");
    summary.push(format!("curve: {} in {}", curve.name, curve.chart.describe()));
    summary.push(format!("profile: {}", profile.describe()));
    summary.push(format!("backend: {}", config.metric_backend()?));
    summary.push(format!(
        "seeds: {}  crossings per seed: {}  flow tol: {:.1e}",
        sc.seeds.len(),
        n_crossings,
        sc.tol
    ));
    let mut meta = config.echo_meta();
    for (i, (psi0, p_psi0)) in sc.seeds.iter().enumerate() {
        meta.push(("seed".to_string(), format!("{i}: psi0={psi0} p_psi0={p_psi0}")));
    }
    let csv_path = config.out_dir().join(format!("{}.csv", config.prefix()));
    run.to_csv(&csv_path, &meta)?;
    let svg_path = config.out_dir().join(format!("{}.svg", config.prefix()));
    write_svg_scatter(&run.points, &svg_path, &meta)?;
    for (seed, reason) in &run.failures {
        summary.push(format!("seed {seed:2}: partial run: {reason}"));
    }
    if run.failures.is_empty() && n_crossings >= 50 {
        let order = spec.and_then(|s| s.fourier_order).unwrap_or(DEFAULT_FOURIER_ORDER);
        for r in regularity_score(&run.points, order)? {
            summary.push(format!(
                "seed {:2}: residual {:.3e}  threshold {:.3e}  {}",
                r.seed_index,
                r.residual,
                r.threshold,
                if r.regular { "regular" } else { "irregular" }
            ));
        }
    } else {
        summary.push(format!(
            "regularity scoring skipped ({} partial seeds, {} crossings < 50)",
            run.failures.len(),
            n_crossings
        ));
    }
    summary.artifact(csv_path);
    summary.artifact(svg_path);
    Ok(summary)
}

fn run_mesh(config: &ExperimentConfig) -> Result<RunSummary> {
    let curve = config.build_curve()?;
    let profile = config.build_profile()?;
    let (n_s, n_psi) = config.grid_dims();
    let mesh = sample_tube_mesh(&curve, &profile, n_s, n_psi)?;
    let on_hopf_chart = curve.chart.describe() == "sphere3_hopf";
    let project = config
        .output
        .as_ref()
        .and_then(|o| o.project_s3)
        .unwrap_or(on_hopf_chart);
    if project && !on_hopf_chart {
        return Err(cfg_err(format!(
            "output.project_s3 applies only to the sphere3_hopf chart, not {}",
            curve.chart.describe()
        )));
    }
    let mut summary = RunSummary::new("mesh");
    summary.push(format!("curve: {} in {}", curve.name, curve.chart.describe()));
    summary.push(format!("profile: {}", profile.describe()));
    summary.push(format!(
        "grid: {n_s}x{n_psi}  vertices: {}  triangles: {}",
        mesh.vertices.len(),
        2 * mesh.quads().len()
    ));
    let mut meta = config.echo_meta();
    meta.push(("chart".to_string(), curve.chart.describe()));
    meta.push(("curve".to_string(), curve.name.clone()));
    meta.push(("profile".to_string(), profile.describe()));
    let final_mesh = if project {
        let (projected, warnings) = project_mesh_s3(&mesh)?;
        summary.push(format!(
            "stereographic projection: {} vertices near the pole",
            warnings.len()
        ));
        for w in &warnings {
            summary.push(format!("warning: {w}"));
        }
        meta.push(("projection".to_string(), "stereographic from (0,0,0,1)".to_string()));
        projected
    } else {
        mesh
    };
    let path = config.out_dir().join(format!("{}.obj", config.prefix()));
    write_obj(&final_mesh, &path, &meta)?;
    summary.artifact(path);
    Ok(summary)
}

fn run_certify(config: &ExperimentConfig) -> Result<RunSummary> {
    let curve = config.build_curve()?;
    let profile = config.build_profile()?;
    let spec = config.certify.as_ref();
    let samples = spec.and_then(|c| c.samples).unwrap_or(8);
    let tolerance = spec.and_then(|c| c.tolerance).unwrap_or(1e-7);
    let report = s_independence_certificate(&curve, profile.rho0, samples, tolerance)?;
    let mut summary = RunSummary::new("certify-s-independence");
    summary.push(format!("curve: {} in {}", curve.name, curve.chart.describe()));
    summary.push(format!("radius: {}  samples: {samples}  tolerance: {tolerance:.1e}", profile.rho0));
    summary.push(format!(
        "curvature-carrying coordinates: {:?}",
        report.curvature_coordinates
    ));
    summary.push(format!("max curvature rate along s: {:.3e}", report.max_curvature_rate));
    summary.push(format!("max profile deviation: {:.3e}", report.max_profile_deviation));
    summary.push(format!("verdict: {}", report.verdict));
    let mut meta = config.echo_meta();
    meta.push(("verdict".to_string(), report.verdict.to_string()));
    meta.push(("tolerance".to_string(), format!("{tolerance:e}")));
    let rows: Vec<Vec<f64>> = report
        .curvature_rate_samples
        .iter()
        .enumerate()
        .map(|(i, &r)| vec![i as f64, r])
        .collect();
    let path = config.out_dir().join(format!("{}.csv", config.prefix()));
    write_csv(&path, &meta, &["sample_index", "curvature_rate"], &rows)?;
    summary.artifact(path);
    Ok(summary)
}
