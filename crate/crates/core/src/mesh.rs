//! Tube surface meshes: vertices are endpoints of radial geodesics from the
//! spine curve, one per (s, psi) grid node, kept in chart coordinates so a
//! projection step can map them afterwards (e.g. the 3-sphere chart to R^3).

use rayon::prelude::*;

use crate::chart::ChartMetric;
use crate::curve::{FrenetData, ParamCurve};
use crate::error::{Result, TubeError};
use crate::jacobi::radial_states;
use crate::spaceform::TubeProfile;

/// Structured quad mesh over the (s, psi) grid.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    /// Row-major over (i, j): vertex(i, j) = vertices[i * n_psi + j].
    pub vertices: Vec<[f64; 3]>,
    pub n_s: usize,
    pub n_psi: usize,
    /// Rows wrap around in s (closed spine curve).
    pub closed_s: bool,
    /// Columns wrap around in psi (always true for tube profiles).
    pub closed_psi: bool,
}

impl SurfaceMesh {
    pub fn vertex(&self, i: usize, j: usize) -> [f64; 3] {
        self.vertices[i * self.n_psi + j]
    }

    /// Quad faces as vertex indices, wrapping per the closure flags.
    pub fn quads(&self) -> Vec<[usize; 4]> {
        let rows = if self.closed_s { self.n_s } else { self.n_s - 1 };
        let cols = if self.closed_psi { self.n_psi } else { self.n_psi - 1 };
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let i1 = (i + 1) % self.n_s;
            for j in 0..cols {
                let j1 = (j + 1) % self.n_psi;
                out.push([
                    i * self.n_psi + j,
                    i1 * self.n_psi + j,
                    i1 * self.n_psi + j1,
                    i * self.n_psi + j1,
                ]);
            }
        }
        out
    }

    /// Every face index valid by construction; verify finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.vertices.len() != self.n_s * self.n_psi {
            return Err(TubeError::Config(format!(
                "mesh holds {} vertices for a {}x{} grid",
                self.vertices.len(),
                self.n_s,
                self.n_psi
            )));
        }
        for (k, v) in self.vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(TubeError::StepFailure {
                    reason: format!("non-finite mesh vertex {k}: {v:?}"),
                });
            }
        }
        Ok(())
    }
}

/// Mesh the tube of `profile` about `curve` on an n_s x n_psi grid.
///
/// Vertex (i, j) is the endpoint of the radial geodesic leaving the spine at
/// arc length s_i in the normal-plane direction phi(psi_j), integrated to
/// radius r(psi_j). Grid must be at least 8x8.
pub fn sample_tube_mesh(
    curve: &ParamCurve,
    profile: &TubeProfile,
    n_s: usize,
    n_psi: usize,
) -> Result<SurfaceMesh> {
    if n_s < 8 || n_psi < 8 {
        return Err(TubeError::Config(format!("mesh grid must be at least 8x8, got {n_s}x{n_psi}")));
    }
    let table = curve.arclength_reparam(n_s.max(64))?;
    let span = table.total;
    let denom = if curve.closed { n_s as f64 } else { (n_s - 1) as f64 };
    let s_values: Vec<f64> = (0..n_s).map(|i| span * i as f64 / denom).collect();
    let frames = curve.frenet_evolve(&table, &s_values, 1e-8)?;
    mesh_from_frames(&curve.chart, &frames, profile, n_psi, curve.closed)
}

/// Mesh the tube about explicitly given frames (one grid row per frame).
/// This also serves spines with vanishing curvature, where a parallel frame
/// must be supplied by the caller.
pub fn mesh_from_frames(
    chart: &ChartMetric,
    frames: &[FrenetData],
    profile: &TubeProfile,
    n_psi: usize,
    closed_s: bool,
) -> Result<SurfaceMesh> {
    let n_s = frames.len();
    if n_s < 2 || n_psi < 8 {
        return Err(TubeError::Config(format!(
            "mesh needs at least 2 frames and 8 psi samples, got {n_s} and {n_psi}"
        )));
    }
    let polar: Vec<(f64, f64)> = (0..n_psi)
        .map(|j| {
            let psi = std::f64::consts::TAU * j as f64 / n_psi as f64;
            let pj = profile.polar_jet(psi);
            (pj[0], pj[4].atan2(pj[3]))
        })
        .collect();
    let vertices: Vec<[f64; 3]> = (0..n_s * n_psi)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n_psi, idx % n_psi);
            let (r, phi) = polar[j];
            let states = radial_states(chart, &frames[i], phi, &[r], false)?;
            Ok(states[0].x)
        })
        .collect::<Result<_>>()?;
    let mesh = SurfaceMesh { vertices, n_s, n_psi, closed_s, closed_psi: true };
    mesh.validate()?;
    Ok(mesh)
}

/// Embedding of the 3-sphere chart point (eta, theta, phi) in R^4.
pub fn embed_hopf(p: [f64; 3]) -> [f64; 4] {
    let [eta, theta, phi] = p;
    [
        eta.sin() * theta.cos(),
        eta.sin() * theta.sin(),
        eta.cos() * phi.cos(),
        eta.cos() * phi.sin(),
    ]
}

/// Stereographic image in R^3 of the chart point (eta, theta, phi), from
/// the pole (0, 0, 0, 1).
pub fn embed_and_project_s3(p: [f64; 3]) -> Result<[f64; 3]> {
    let x = embed_hopf(p);
    let gap = 1.0 - x[3];
    if gap.abs() < 1e-9 {
        return Err(TubeError::PoleSingularity { gap: gap.abs() });
    }
    Ok([x[0] / gap, x[1] / gap, x[2] / gap])
}

/// Project every vertex of a 3-sphere chart mesh stereographically.
///
/// Vertices closer to the pole than 1e-3 produce warnings; closer than 1e-9
/// is an error.
pub fn project_mesh_s3(mesh: &SurfaceMesh) -> Result<(SurfaceMesh, Vec<String>)> {
    let mut vertices = Vec::with_capacity(mesh.vertices.len());
    let mut warnings = Vec::new();
    for (k, &v) in mesh.vertices.iter().enumerate() {
        let gap = (1.0 - embed_hopf(v)[3]).abs();
        if gap < 1e-3 {
            warnings.push(format!("vertex {k} is {gap:.3e} from the projection pole"));
        }
        vertices.push(embed_and_project_s3(v)?);
    }
    let out = SurfaceMesh { vertices, ..*mesh };
    out.validate()?;
    Ok((out, warnings))
}
