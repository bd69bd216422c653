//! Element skewness and aggregate quality statistics.

use std::io::{Read, Write};

use rayon::prelude::*;

use super::frame::ElementEdgeFrame;
use super::{Mesh, MeshError, Vec3};

/// Skewness of one element in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Skewness {
    pub value: f64,
    /// Set when an edge has zero length; `value` is then 1.
    pub degenerate: bool,
}

/// Skewness from the extreme included angles of a frame.
///
/// The 24 angles are the three pairwise angles between the edges meeting at
/// each of the 8 nodes.
pub fn frame_skewness(frame: &ElementEdgeFrame) -> Skewness {
    let scale = frame.max_edge_length();
    let tiny = 1e-14 * scale;
    let mut theta_min = f64::INFINITY;
    let mut theta_max = f64::NEG_INFINITY;
    for node in 0..8 {
        let short = (0..3).any(|d| !(frame.outward(node, d).norm() > tiny));
        let angles = if short { None } else { frame.node_angles(node) };
        let Some(angles) = angles else {
            return Skewness {
                value: 1.0,
                degenerate: true,
            };
        };
        for a in angles {
            theta_min = theta_min.min(a.to_degrees());
            theta_max = theta_max.max(a.to_degrees());
        }
    }
    let value = ((theta_max - 90.0) / 90.0)
        .max((90.0 - theta_min) / 90.0)
        .clamp(0.0, 1.0);
    Skewness {
        value,
        degenerate: false,
    }
}

pub fn element_skewness(mesh: &Mesh, e: usize) -> Result<Skewness, MeshError> {
    Ok(frame_skewness(&super::frame::element_edge_frame(mesh, e)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementQuality {
    pub element: usize,
    pub skewness: f64,
    /// Mean length of the four edges in each direction.
    pub mean_edge: [f64; 3],
    pub degenerate: bool,
    pub inverted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityStats {
    pub count: usize,
    pub min_skewness: f64,
    pub max_skewness: f64,
    pub mean_skewness: f64,
    pub min_edge: f64,
    pub max_edge: f64,
    pub mean_edge: f64,
    pub degenerate: usize,
    pub inverted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QualitySummary {
    /// The region filter selected no element.
    EmptyRegion,
    Stats(QualityStats),
}

impl QualitySummary {
    pub fn stats(&self) -> Option<&QualityStats> {
        match self {
            QualitySummary::EmptyRegion => None,
            QualitySummary::Stats(s) => Some(s),
        }
    }
}

impl std::fmt::Display for QualitySummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QualitySummary::EmptyRegion => write!(f, "empty region: no element selected"),
            QualitySummary::Stats(s) => write!(
                f,
                "elements={} skewness min={:.6} max={:.6} mean={:.6} edge min={:.6e} max={:.6e} mean={:.6e} degenerate={} inverted={}",
                s.count,
                s.min_skewness,
                s.max_skewness,
                s.mean_skewness,
                s.min_edge,
                s.max_edge,
                s.mean_edge,
                s.degenerate,
                s.inverted
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    /// Per-element rows for the elements passing the filter, in element order.
    pub elements: Vec<ElementQuality>,
    pub summary: QualitySummary,
}

fn element_quality(mesh: &Mesh, e: usize) -> (ElementQuality, [f64; 2]) {
    let frame = ElementEdgeFrame::from_coords(&mesh.element_coords(e));
    let skew = frame_skewness(&frame);
    let lengths = frame.edges.map(|dir| dir.map(|v| v.norm()));
    let mean_edge = lengths.map(|l| l.iter().sum::<f64>() / 4.0);
    let flat = lengths.iter().flatten();
    let lo = flat.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = flat.copied().fold(0.0, f64::max);
    let inverted = frame.corner_jacobians().iter().any(|&j| j <= 0.0);
    (
        ElementQuality {
            element: e,
            skewness: skew.value,
            mean_edge,
            degenerate: skew.degenerate,
            inverted,
        },
        [lo, hi],
    )
}

/// Quality report over the elements whose centroid passes `filter`.
pub fn quality_report(mesh: &Mesh, filter: Option<&(dyn Fn(&Vec3) -> bool + Sync)>) -> QualityReport {
    let rows: Vec<(ElementQuality, [f64; 2])> = (0..mesh.num_elements())
        .into_par_iter()
        .filter(|&e| filter.map_or(true, |f| f(&mesh.element_centroid(e))))
        .map(|e| element_quality(mesh, e))
        .collect();
    if rows.is_empty() {
        return QualityReport {
            elements: Vec::new(),
            summary: QualitySummary::EmptyRegion,
        };
    }
    let n = rows.len() as f64;
    let stats = QualityStats {
        count: rows.len(),
        min_skewness: rows.iter().map(|r| r.0.skewness).fold(f64::INFINITY, f64::min),
        max_skewness: rows.iter().map(|r| r.0.skewness).fold(0.0, f64::max),
        mean_skewness: rows.iter().map(|r| r.0.skewness).sum::<f64>() / n,
        min_edge: rows.iter().map(|r| r.1[0]).fold(f64::INFINITY, f64::min),
        max_edge: rows.iter().map(|r| r.1[1]).fold(0.0, f64::max),
        mean_edge: rows.iter().map(|r| r.0.mean_edge.iter().sum::<f64>()).sum::<f64>() / (3.0 * n),
        degenerate: rows.iter().filter(|r| r.0.degenerate).count(),
        inverted: rows.iter().filter(|r| r.0.inverted).count(),
    };
    QualityReport {
        elements: rows.into_iter().map(|r| r.0).collect(),
        summary: QualitySummary::Stats(stats),
    }
}

const CSV_HEADER: [&str; 7] = [
    "element", "skewness", "edge1", "edge2", "edge3", "degenerate", "inverted",
];

impl QualityReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for r in &self.elements {
            out.write_record([
                r.element.to_string(),
                format!("{:?}", r.skewness),
                format!("{:?}", r.mean_edge[0]),
                format!("{:?}", r.mean_edge[1]),
                format!("{:?}", r.mean_edge[2]),
                (r.degenerate as u8).to_string(),
                (r.inverted as u8).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads per-element rows written by [`QualityReport::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Vec<ElementQuality>, MeshError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let bad = |msg: String| MeshError::Parse { line: i + 2, msg };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != CSV_HEADER.len() {
                return Err(bad(format!("expected {} columns", CSV_HEADER.len())));
            }
            let f = |k: usize| rec[k].trim().parse::<f64>().map_err(|e| bad(e.to_string()));
            rows.push(ElementQuality {
                element: rec[0].trim().parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                skewness: f(1)?,
                mean_edge: [f(2)?, f(3)?, f(4)?],
                degenerate: &rec[5] == "1",
                inverted: &rec[6] == "1",
            });
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::unit_cube;
    use crate::mesh::topology::NODE_PARAM;

    fn element_from(f: impl Fn([f64; 3]) -> Vec3) -> Mesh {
        let nodes = NODE_PARAM
            .iter()
            .map(|p| f([p[0] as f64, p[1] as f64, p[2] as f64]))
            .collect();
        Mesh::from_elements(nodes, vec![[0, 1, 2, 3, 4, 5, 6, 7]]).unwrap()
    }

    #[test]
    fn cube_has_zero_skewness() {
        let s = element_skewness(&unit_cube(), 0).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(!s.degenerate);
    }

    #[test]
    fn forty_five_degree_parallelepiped() {
        // x-edges along (1,0,0), y-edges along (1,1,0): included angles 45/135 degrees.
        let mesh = element_from(|[a, b, c]| Vec3::new(a + b, b, c));
        let s = element_skewness(&mesh, 0).unwrap();
        assert!((s.value - 0.5).abs() < 1e-12, "{}", s.value);
    }

    #[test]
    fn collapsing_element_approaches_one() {
        let mut last = 0.0;
        for eps in [1e-1, 1e-2, 1e-4, 1e-8] {
            let mesh = element_from(|[a, b, c]| Vec3::new(a + b, eps * b, c));
            let s = element_skewness(&mesh, 0).unwrap().value;
            assert!(s > last);
            last = s;
        }
        assert!(last > 1.0 - 1e-7);
    }

    #[test]
    fn zero_edge_flags_degenerate() {
        let mut mesh = unit_cube();
        mesh.nodes[1] = mesh.nodes[0];
        let s = element_skewness(&mesh, 0).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.value, 1.0);
    }

    #[test]
    fn report_max_semantics_and_empty_region() {
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        for e in 0..3 {
            let base = nodes.len();
            let shear = if e == 1 { 0.3 } else { 0.0 };
            for p in NODE_PARAM {
                let (a, b, c) = (p[0] as f64, p[1] as f64, p[2] as f64);
                nodes.push(Vec3::new(a + shear * b + 3.0 * e as f64, b, c));
            }
            elements.push(std::array::from_fn(|k| base + k));
        }
        let mesh = Mesh::from_elements(nodes, elements).unwrap();
        let report = quality_report(&mesh, None);
        let stats = report.summary.stats().unwrap();
        let s1 = element_skewness(&mesh, 1).unwrap().value;
        assert_eq!(stats.max_skewness, s1);
        assert_eq!(stats.min_skewness, 0.0);
        let none = |_: &Vec3| false;
        let empty = quality_report(&mesh, Some(&none));
        assert_eq!(empty.summary, QualitySummary::EmptyRegion);
        assert!(empty.summary.to_string().contains("empty region"));
    }

    #[test]
    fn regular_grid_report() {
        let mesh = crate::demo::regular_grid([3, 2, 2], [1.0, 1.0, 1.0]);
        let report = quality_report(&mesh, None);
        let stats = report.summary.stats().unwrap();
        assert_eq!(stats.max_skewness, 0.0);
        for r in &report.elements {
            assert_eq!(r.mean_edge, [1.0; 3]);
        }
    }

    #[test]
    fn csv_round_trip() {
        let mesh = element_from(|[a, b, c]| Vec3::new(a + 0.2 * b, b, 1.5 * c));
        let report = quality_report(&mesh, None);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let rows = QualityReport::read_csv(buf.as_slice()).unwrap();
        assert_eq!(rows, report.elements);
    }
}
