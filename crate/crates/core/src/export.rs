//! File emission: OBJ meshes, SVG section scatters, and generic CSV tables.
//! Every format opens with '#'-style comment lines echoing the generating
//! configuration so a run can be reproduced from its own output.

use std::io::Write;
use std::path::Path;

use crate::error::{Result, TubeError};
use crate::mesh::SurfaceMesh;
use crate::section::SectionPoint;

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file =
        std::fs::File::create(path).map_err(|e| TubeError::io(path.display().to_string(), e))?;
    Ok(std::io::BufWriter::new(file))
}

/// Wavefront OBJ with quads split into triangle pairs. Header comments echo
/// the metadata.
pub fn write_obj(mesh: &SurfaceMesh, path: &Path, meta: &[(String, String)]) -> Result<()> {
    mesh.validate()?;
    let mut out = create(path)?;
    let werr = |e: std::io::Error| TubeError::io(path.display().to_string(), e);
    for (k, v) in meta {
        writeln!(out, "# {k}: {v}").map_err(werr)?;
    }
    writeln!(out, "# grid: {} {}", mesh.n_s, mesh.n_psi).map_err(werr)?;
    for v in &mesh.vertices {
        writeln!(out, "v {:.12} {:.12} {:.12}", v[0], v[1], v[2]).map_err(werr)?;
    }
    for q in mesh.quads() {
        // OBJ indices are 1-based.
        writeln!(out, "f {} {} {}", q[0] + 1, q[1] + 1, q[2] + 1).map_err(werr)?;
        writeln!(out, "f {} {} {}", q[0] + 1, q[2] + 1, q[3] + 1).map_err(werr)?;
    }
    Ok(())
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 600.0;
const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"];

/// Map (psi, p_psi) to viewport pixels: psi in (0, 2 pi) spans the width,
/// p_psi in (-1, 1) the height, so (pi, 0) is the exact center.
fn svg_xy(psi: f64, p_psi: f64) -> (f64, f64) {
    (SVG_W * psi / std::f64::consts::TAU, SVG_H * (1.0 - p_psi) / 2.0)
}

/// SVG 1.1 scatter of section points, one color per seed. An empty point
/// list still yields a valid document with the axes frame.
pub fn write_svg_scatter(
    points: &[SectionPoint],
    path: &Path,
    meta: &[(String, String)],
) -> Result<()> {
    let mut out = create(path)?;
    let werr = |e: std::io::Error| TubeError::io(path.display().to_string(), e);
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).map_err(werr)?;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    )
    .map_err(werr)?;
    for (k, v) in meta {
        writeln!(out, "<!-- {k}: {v} -->").map_err(werr)?;
    }
    writeln!(
        out,
        r##"<rect x="0.5" y="0.5" width="{}" height="{}" fill="white" stroke="#333"/>"##,
        SVG_W - 1.0,
        SVG_H - 1.0
    )
    .map_err(werr)?;
    // Axis guides: psi = pi vertical, p_psi = 0 horizontal.
    writeln!(
        out,
        r##"<line x1="0" y1="{mid_y}" x2="{SVG_W}" y2="{mid_y}" stroke="#ccc"/>"##,
        mid_y = SVG_H / 2.0
    )
    .map_err(werr)?;
    writeln!(
        out,
        r##"<line x1="{mid_x}" y1="0" x2="{mid_x}" y2="{SVG_H}" stroke="#ccc"/>"##,
        mid_x = SVG_W / 2.0
    )
    .map_err(werr)?;
    writeln!(
        out,
        r##"<text x="4" y="{}" font-size="12" fill="#333">psi: 0 to 2pi, p_psi: -1 to 1</text>"##,
        SVG_H - 6.0
    )
    .map_err(werr)?;
    for p in points {
        let (x, y) = svg_xy(p.psi, p.p_psi);
        if !x.is_finite() || !y.is_finite() {
            return Err(TubeError::StepFailure {
                reason: format!("non-finite section point ({}, {})", p.psi, p.p_psi),
            });
        }
        writeln!(
            out,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="1.2" fill="{}"/>"#,
            PALETTE[p.seed_index % PALETTE.len()]
        )
        .map_err(werr)?;
    }
    writeln!(out, "</svg>").map_err(werr)?;
    Ok(())
}

/// Generic CSV table with '#'-prefixed header lines.
pub fn write_csv(
    path: &Path,
    meta: &[(String, String)],
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut out = create(path)?;
    let werr = |e: std::io::Error| TubeError::io(path.display().to_string(), e);
    for (k, v) in meta {
        writeln!(out, "# {k}: {v}").map_err(werr)?;
    }
    writeln!(out, "{}", columns.join(",")).map_err(werr)?;
    for row in rows {
        if row.len() != columns.len() {
            return Err(TubeError::Config(format!(
                "csv row has {} fields for {} columns",
                row.len(),
                columns.len()
            )));
        }
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(werr)?;
    }
    Ok(())
}
