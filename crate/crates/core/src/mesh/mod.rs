//! Interval and triangular P1 meshes for the two scenario families.
//!
//! The anti-plane shear domain is the square `(0,2a)^2` with a slit along
//! `{a} x (3a/2, 2a)` and a circular hole. Slit nodes are duplicated so a
//! nodal field can jump across the slit; the slit tip is shared.

mod antiplane;
mod deform;
mod interval;
mod locate;
mod probe;

pub use antiplane::{build_antiplane_mesh, AntiplaneMeshSpec, RefineRegion};
pub use deform::{deform_hole_boundary, MAX_BLEND_COMPRESSION};
pub use interval::{build_interval_mesh, IntervalMesh};
pub use locate::PointLocator;
pub use probe::{build_line_probe, LineProbe, ProbeSample};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("deformation error: {0}")]
    Deformation(String),
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("triangle {triangle} has non-positive signed area {area:e}")]
    Inverted { triangle: usize, area: f64 },
}

/// Boundary role of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeMarker {
    Free,
    DirMinus,
    DirPlus,
    Hole,
    SlitLeft,
    SlitRight,
}

/// Nominal geometry of the anti-plane shear specimen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntiplaneGeometry {
    /// Half of the side length of the square.
    pub a: f64,
    pub hole_center: Point,
    /// Nominal hole radius `R`.
    pub radius: f64,
    /// Slit abscissa.
    pub slit_x: f64,
    /// Ordinate of the slit tip; the slit runs from here up to `y = 2a`.
    pub slit_tip_y: f64,
}

impl Default for AntiplaneGeometry {
    fn default() -> Self {
        Self::with_scale(1.0)
    }
}

impl AntiplaneGeometry {
    pub fn with_scale(a: f64) -> Self {
        Self {
            a,
            hole_center: [0.3 * a, 0.3 * a],
            radius: 0.2 * a,
            slit_x: a,
            slit_tip_y: 1.5 * a,
        }
    }

    pub fn side(&self) -> f64 {
        2.0 * self.a
    }

    pub fn slit_tip(&self) -> Point {
        [self.slit_x, self.slit_tip_y]
    }

    /// Node coincidence tolerance.
    pub fn tolerance(&self) -> f64 {
        1e-9 * self.a
    }

    pub(crate) fn validate(&self) -> Result<(), MeshError> {
        let side = self.side();
        let [cx, cy] = self.hole_center;
        let r = self.radius;
        if !(self.a > 0.0) || !(r > 0.0) {
            return Err(MeshError::InvalidArgument(format!(
                "scale a={} and radius R={} must be positive",
                self.a, r
            )));
        }
        if cx - r <= 0.0 || cy - r <= 0.0 || cx + r >= side || cy + r >= side {
            return Err(MeshError::Geometry(format!(
                "hole (center ({cx}, {cy}), R={r}) intersects the outer boundary"
            )));
        }
        if !(self.slit_x > 0.0 && self.slit_x < side) || !(self.slit_tip_y > 0.0 && self.slit_tip_y < side) {
            return Err(MeshError::Geometry("slit tip must lie inside the square".into()));
        }
        let d = distance_to_segment(self.hole_center, self.slit_tip(), [self.slit_x, side]);
        if d <= r {
            return Err(MeshError::Geometry(format!(
                "hole intersects the slit (distance {d} <= R={r})"
            )));
        }
        Ok(())
    }
}

/// P1 triangulation of the anti-plane shear domain.
#[derive(Clone, Debug)]
pub struct TriMesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    markers: Vec<NodeMarker>,
    geometry: AntiplaneGeometry,
    h_min: f64,
    h_max: f64,
}

impl TriMesh {
    /// Assembles a mesh from raw parts, orienting every triangle
    /// counterclockwise. Degenerate triangles are rejected.
    pub fn new(
        nodes: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        markers: Vec<NodeMarker>,
        geometry: AntiplaneGeometry,
        h_min: f64,
        h_max: f64,
    ) -> Result<Self, MeshError> {
        if markers.len() != nodes.len() {
            return Err(MeshError::InvalidArgument(format!(
                "{} markers for {} nodes",
                markers.len(),
                nodes.len()
            )));
        }
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&i| i >= nodes.len()) {
                return Err(MeshError::InvalidArgument(format!("triangle {t} references a missing node")));
            }
            let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if area < 0.0 {
                tri.swap(1, 2);
            } else if area == 0.0 {
                return Err(MeshError::Inverted { triangle: t, area });
            }
        }
        Ok(Self {
            nodes,
            triangles,
            markers,
            geometry,
            h_min,
            h_max,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn markers(&self) -> &[NodeMarker] {
        &self.markers
    }

    pub fn geometry(&self) -> &AntiplaneGeometry {
        &self.geometry
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn min_signed_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.signed_area(t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Unique undirected edges, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]])
            .map(|[a, b]| if a < b { [a, b] } else { [b, a] })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Euler characteristic `V - E + F` over triangles.
    pub fn euler_characteristic(&self) -> i64 {
        self.nodes.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Sorted neighbour lists along mesh edges.
    pub fn node_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for [a, b] in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn nodes_with_marker(&self, marker: NodeMarker) -> impl Iterator<Item = usize> + '_ {
        self.markers
            .iter()
            .enumerate()
            .filter(move |(_, m)| **m == marker)
            .map(|(i, _)| i)
    }

    /// Index of the (shared) slit tip node.
    pub fn slit_tip_node(&self) -> Option<usize> {
        let tip = self.geometry.slit_tip();
        let tol = 1e-6 * self.geometry.a;
        self.nodes
            .iter()
            .position(|p| (p[0] - tip[0]).abs() <= tol && (p[1] - tip[1]).abs() <= tol)
    }

    /// Nodes on the outer square boundary.
    pub fn is_outer_boundary(&self, i: usize) -> bool {
        let side = self.geometry.side();
        let tol = 1e-6 * self.geometry.a;
        let [x, y] = self.nodes[i];
        x <= tol || y <= tol || x >= side - tol || y >= side - tol
    }

    /// Hole boundary as a closed polygon ordered by polar angle.
    pub fn hole_polygon(&self) -> Vec<Point> {
        let c = self.geometry.hole_center;
        let mut pts: Vec<(f64, Point)> = self
            .nodes_with_marker(NodeMarker::Hole)
            .map(|i| {
                let p = self.nodes[i];
                ((p[1] - c[1]).atan2(p[0] - c[0]), p)
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.into_iter().map(|(_, p)| p).collect()
    }

    /// Largest edge length over triangles whose centroid satisfies `pred`.
    pub fn max_edge_length_where(&self, pred: impl Fn(Point) -> bool) -> f64 {
        let mut worst: f64 = 0.0;
        for (t, tri) in self.triangles.iter().enumerate() {
            if !pred(self.centroid(t)) {
                continue;
            }
            for k in 0..3 {
                let (p, q) = (self.nodes[tri[k]], self.nodes[tri[(k + 1) % 3]]);
                worst = worst.max(dist(p, q));
            }
        }
        worst
    }

    pub(crate) fn with_nodes(&self, nodes: Vec<Point>) -> Self {
        Self {
            nodes,
            ..self.clone()
        }
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn dist(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

pub(crate) fn distance_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

/// Even-odd point-in-polygon test.
pub(crate) fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi[1] > p[1]) != (pj[1] > p[1]) {
            let x = pj[0] + (p[1] - pj[1]) / (pi[1] - pj[1]) * (pi[0] - pj[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to a closed polygon's edges.
pub(crate) fn distance_to_polygon(p: Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| distance_to_segment(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}
