use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::{
    dist, distance_to_segment, point_in_polygon, signed_area, AntiplaneGeometry, MeshError, NodeMarker, Point,
    TriMesh,
};

/// Where the mesh is refined to `h_min`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RefineRegion {
    /// The whole domain (uniform mesh at `h_min`).
    Uniform,
    /// Band of the given width around the segment slit tip -> hole center,
    /// plus an annulus of the same width around the hole.
    Band { width: f64 },
    /// Axis-aligned block.
    Block { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
}

impl RefineRegion {
    /// Distance from `p` to the region (zero inside).
    pub fn distance(&self, geometry: &AntiplaneGeometry, p: Point) -> f64 {
        match *self {
            RefineRegion::Uniform => 0.0,
            RefineRegion::Band { width } => {
                let seg = distance_to_segment(p, geometry.slit_tip(), geometry.hole_center) - 0.5 * width;
                let ring = dist(p, geometry.hole_center) - geometry.radius - width;
                seg.min(ring).max(0.0)
            }
            RefineRegion::Block {
                x_min,
                x_max,
                y_min,
                y_max,
            } => {
                let dx = (x_min - p[0]).max(p[0] - x_max).max(0.0);
                let dy = (y_min - p[1]).max(p[1] - y_max).max(0.0);
                dx.hypot(dy)
            }
        }
    }

    pub fn contains(&self, geometry: &AntiplaneGeometry, p: Point) -> bool {
        self.distance(geometry, p) == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntiplaneMeshSpec {
    pub geometry: AntiplaneGeometry,
    pub h_min: f64,
    pub h_max: f64,
    pub refine: RefineRegion,
    /// Growth rate of the target size away from the refined region.
    #[serde(default = "default_grading")]
    pub grading: f64,
    /// Amplitude of the deterministic lattice jitter, relative to `h_min`.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing_passes: usize,
}

fn default_grading() -> f64 {
    0.3
}

fn default_jitter() -> f64 {
    0.2
}

fn default_smoothing() -> usize {
    3
}

impl AntiplaneMeshSpec {
    /// Band-refined mesh with the usual band width of `6 l`.
    pub fn band(geometry: AntiplaneGeometry, length_scale: f64, h_min: f64, h_max: f64) -> Self {
        Self {
            geometry,
            h_min,
            h_max,
            refine: RefineRegion::Band {
                width: 6.0 * length_scale,
            },
            grading: default_grading(),
            jitter: default_jitter(),
            smoothing_passes: default_smoothing(),
        }
    }

    /// Target element size at `p`.
    pub fn size_at(&self, p: Point) -> f64 {
        let d = self.refine.distance(&self.geometry, p);
        (self.h_min + self.grading * d).min(self.h_max)
    }
}

/// Builds the slit-and-hole triangulation.
///
/// Boundary curves are sampled by equidistributing `1/h`; interior points
/// come from a jittered equilateral lattice at `h_min`, greedily thinned to
/// the local target size. The point set is triangulated with the slit and
/// the hole polygon as constraints, hole triangles are dropped, slit nodes
/// are split and free interior nodes receive Laplacian smoothing.
pub fn build_antiplane_mesh(spec: &AntiplaneMeshSpec) -> Result<TriMesh, MeshError> {
    let g = spec.geometry;
    g.validate()?;
    if !(spec.h_min > 0.0) || spec.h_min > spec.h_max {
        return Err(MeshError::InvalidArgument(format!(
            "need 0 < h_min <= h_max, got ({}, {})",
            spec.h_min, spec.h_max
        )));
    }
    let side = g.side();
    let tol = g.tolerance();
    let size = |p: Point| spec.size_at(p);

    let mut points: Vec<Point> = Vec::new();
    let push = |points: &mut Vec<Point>, p: Point| -> usize {
        if let Some(i) = points.iter().position(|q| dist(*q, p) <= tol) {
            i
        } else {
            points.push(p);
            points.len() - 1
        }
    };

    // Outer boundary, counterclockwise, with the slit mouth as a vertex.
    let corners = [[0.0, 0.0], [side, 0.0], [side, side], [g.slit_x, side], [0.0, side]];
    for k in 0..corners.len() {
        let (p0, p1) = (corners[k], corners[(k + 1) % corners.len()]);
        for p in sample_curve(|t| lerp(p0, p1, t), dist(p0, p1), &size) {
            push(&mut points, p);
        }
    }

    // Slit, tip last so the chain is ordered top -> tip.
    let mouth = [g.slit_x, side];
    let tip = g.slit_tip();
    let slit_chain: Vec<usize> = sample_curve(|t| lerp(mouth, tip, t), dist(mouth, tip), &size)
        .into_iter()
        .map(|p| push(&mut points, p))
        .collect();

    // Hole polygon.
    let c = g.hole_center;
    let r = g.radius;
    let circumference = std::f64::consts::TAU * r;
    let mut hole_pts = sample_curve(
        |t| {
            let phi = std::f64::consts::TAU * t;
            [c[0] + r * phi.cos(), c[1] + r * phi.sin()]
        },
        circumference,
        &size,
    );
    hole_pts.pop(); // closed curve: last sample repeats the first
    if hole_pts.len() < 8 {
        let n = 8;
        hole_pts = (0..n)
            .map(|k| {
                let phi = std::f64::consts::TAU * k as f64 / n as f64;
                [c[0] + r * phi.cos(), c[1] + r * phi.sin()]
            })
            .collect();
    }
    let hole_chain: Vec<usize> = hole_pts.iter().map(|&p| push(&mut points, p)).collect();
    let n_constrained = points.len();

    // Interior candidates.
    let mut candidates = lattice_candidates(spec);
    candidates.retain(|&p| {
        let h = size(p);
        let margin = 0.5 * h;
        p[0] > margin
            && p[1] > margin
            && p[0] < side - margin
            && p[1] < side - margin
            && distance_to_segment(p, mouth, tip) > margin
            && dist(p, c) > r + margin
    });
    candidates.sort_by(|a, b| size(*a).total_cmp(&size(*b)));

    let mut grid = SpatialHash::new(spec.h_min);
    for (i, p) in points.iter().enumerate() {
        grid.insert(*p, i);
    }
    for p in candidates {
        let radius = 0.8 * size(p);
        if !grid.any_within(p, radius, &points) {
            let i = points.len();
            points.push(p);
            grid.insert(p, i);
        }
    }

    // Constrained Delaunay triangulation.
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handle_to_node: HashMap<usize, usize> = HashMap::with_capacity(points.len());
    let mut handles = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let h = cdt
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| MeshError::Triangulation(format!("{e:?}")))?;
        if handle_to_node.insert(h.index(), i).is_some() {
            return Err(MeshError::Triangulation(format!("duplicate vertex at {:?}", p)));
        }
        handles.push(h);
    }
    for w in slit_chain.windows(2) {
        cdt.add_constraint(handles[w[0]], handles[w[1]]);
    }
    for k in 0..hole_chain.len() {
        let (a, b) = (hole_chain[k], hole_chain[(k + 1) % hole_chain.len()]);
        cdt.add_constraint(handles[a], handles[b]);
    }
    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(2 * points.len());
    for face in cdt.inner_faces() {
        let v = face.vertices();
        let tri = [
            handle_to_node[&v[0].fix().index()],
            handle_to_node[&v[1].fix().index()],
            handle_to_node[&v[2].fix().index()],
        ];
        let cen = centroid(&points, tri);
        if point_in_polygon(cen, &hole_pts) {
            continue;
        }
        let mut tri = tri;
        if signed_area(points[tri[0]], points[tri[1]], points[tri[2]]) < 0.0 {
            tri.swap(1, 2);
        }
        triangles.push(tri);
    }
    // Deterministic element order independent of the triangulation's internals.
    triangles.sort_by(|a, b| {
        let (ca, cb) = (centroid(&points, *a), centroid(&points, *b));
        ca[1].total_cmp(&cb[1]).then(ca[0].total_cmp(&cb[0]))
    });

    // Markers before the slit split.
    let mut markers = vec![NodeMarker::Free; points.len()];
    for &i in &hole_chain {
        markers[i] = NodeMarker::Hole;
    }
    for (i, p) in points.iter().enumerate() {
        if p[1] >= side - tol {
            if p[0] < g.slit_x - tol {
                markers[i] = NodeMarker::DirMinus;
            } else if p[0] > g.slit_x + tol {
                markers[i] = NodeMarker::DirPlus;
            }
        }
    }

    let mut fixed = vec![false; points.len()];
    for (i, p) in points.iter().enumerate() {
        fixed[i] = i < n_constrained
            || p[0] <= tol
            || p[1] <= tol
            || p[0] >= side - tol
            || p[1] >= side - tol;
    }
    laplacian_smoothing(&mut points, &triangles, &fixed, spec.smoothing_passes);

    // Split the slit: every slit node except the tip gets a twin on the right.
    let tip_node = *slit_chain.last().expect("slit has at least two nodes");
    for &i in &slit_chain {
        if i == tip_node {
            continue;
        }
        let twin = points.len();
        points.push(points[i]);
        markers[i] = NodeMarker::SlitLeft;
        markers.push(NodeMarker::SlitRight);
        for tri in triangles.iter_mut() {
            if tri.contains(&i) && centroid_x(&points, *tri) > g.slit_x {
                for v in tri.iter_mut() {
                    if *v == i {
                        *v = twin;
                    }
                }
            }
        }
    }

    let mesh = TriMesh::new(points, triangles, markers, g, spec.h_min, spec.h_max)?;
    let (t, area) = (0..mesh.triangles().len())
        .map(|t| (t, mesh.signed_area(t)))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    if area <= 0.0 {
        return Err(MeshError::Inverted { triangle: t, area });
    }
    Ok(mesh)
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn centroid(points: &[Point], tri: [usize; 3]) -> Point {
    let (a, b, c) = (points[tri[0]], points[tri[1]], points[tri[2]]);
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

fn centroid_x(points: &[Point], tri: [usize; 3]) -> f64 {
    centroid(points, tri)[0]
}

/// Samples a parametrized curve `t in [0,1]` so that the spacing follows the
/// size function: node `k` sits where the integral of `1/h` reaches `k/n`.
/// Both endpoints are included.
fn sample_curve(curve: impl Fn(f64) -> Point, length: f64, size: &impl Fn(Point) -> f64) -> Vec<Point> {
    const FINE: usize = 512;
    let mut cumulative = Vec::with_capacity(FINE + 1);
    cumulative.push(0.0);
    let ds = length / FINE as f64;
    for k in 0..FINE {
        let mid = curve((k as f64 + 0.5) / FINE as f64);
        let last = *cumulative.last().unwrap();
        cumulative.push(last + ds / size(mid));
    }
    let total = cumulative[FINE];
    let n = (total.round() as usize).max(1);
    let mut out = Vec::with_capacity(n + 1);
    out.push(curve(0.0));
    let mut k = 0;
    for i in 1..n {
        let target = total * i as f64 / n as f64;
        while cumulative[k + 1] < target {
            k += 1;
        }
        let frac = (target - cumulative[k]) / (cumulative[k + 1] - cumulative[k]);
        out.push(curve((k as f64 + frac) / FINE as f64));
    }
    out.push(curve(1.0));
    out
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_unit(i: i64, j: i64, salt: u64) -> f64 {
    let h = splitmix((i as u64).wrapping_mul(0x1000_0000_01B3) ^ splitmix(j as u64 ^ salt));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64) - 0.5
}

fn lattice_candidates(spec: &AntiplaneMeshSpec) -> Vec<Point> {
    let side = spec.geometry.side();
    let h = spec.h_min;
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = (side / dy).ceil() as i64;
    let cols = (side / h).ceil() as i64 + 1;
    let amp = spec.jitter * h;
    let mut out = Vec::with_capacity((rows * cols) as usize);
    for j in 0..=rows {
        let shift = if j % 2 == 1 { 0.5 * h } else { 0.0 };
        for i in 0..=cols {
            let x = i as f64 * h + shift + amp * hash_unit(i, j, 1);
            let y = j as f64 * dy + amp * hash_unit(i, j, 2);
            out.push([x, y]);
        }
    }
    out
}

struct SpatialHash {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialHash {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point, i: usize) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(i);
    }

    fn any_within(&self, p: Point, radius: f64, points: &[Point]) -> bool {
        let reach = (radius / self.cell).ceil() as i64;
        let (ki, kj) = self.key(p);
        for di in -reach..=reach {
            for dj in -reach..=reach {
                if let Some(bucket) = self.buckets.get(&(ki + di, kj + dj)) {
                    if bucket.iter().any(|&q| dist(points[q], p) < radius) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn laplacian_smoothing(points: &mut [Point], triangles: &[[usize; 3]], fixed: &[bool], passes: usize) {
    let n = points.len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            incident[tri[k]].push(t);
            for l in 0..3 {
                if l != k {
                    neighbors[tri[k]].push(tri[l]);
                }
            }
        }
    }
    for list in neighbors.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    for _ in 0..passes {
        for i in 0..n {
            if fixed[i] || neighbors[i].is_empty() {
                continue;
            }
            let m = neighbors[i].len() as f64;
            let (sx, sy) = neighbors[i]
                .iter()
                .fold((0.0, 0.0), |(sx, sy), &j| (sx + points[j][0], sy + points[j][1]));
            let old = points[i];
            points[i] = [sx / m, sy / m];
            let valid = incident[i].iter().all(|&t| {
                let tri = triangles[t];
                signed_area(points[tri[0]], points[tri[1]], points[tri[2]]) > 0.0
            });
            if !valid {
                points[i] = old;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_spec() -> AntiplaneMeshSpec {
        AntiplaneMeshSpec::band(AntiplaneGeometry::default(), 0.04, 0.02, 0.04)
    }

    #[test]
    fn curve_sampling_includes_endpoints() {
        let pts = sample_curve(|t| [t, 0.0], 1.0, &|_| 0.1);
        assert_eq!(pts.len(), 11);
        assert_eq!(pts[0], [0.0, 0.0]);
        assert_eq!(pts[10], [1.0, 0.0]);
    }

    #[test]
    fn band_region_distance() {
        let g = AntiplaneGeometry::default();
        let band = RefineRegion::Band { width: 0.24 };
        assert!(band.contains(&g, g.slit_tip()));
        assert!(band.contains(&g, [0.3, 0.55]));
        assert!(!band.contains(&g, [1.9, 0.1]));
    }

    #[test]
    fn desk_mesh_invariants() {
        let spec = desk_spec();
        let mesh = build_antiplane_mesh(&spec).unwrap();
        let g = *mesh.geometry();
        assert!(mesh.min_signed_area() > 0.0);
        // annulus with a slit cut from the boundary
        assert_eq!(mesh.euler_characteristic(), 0);
        // no triangle in the hole
        for t in 0..mesh.triangles().len() {
            assert!(dist(mesh.centroid(t), g.hole_center) > g.radius * 0.9);
        }
        // hole nodes on the curve
        for i in mesh.nodes_with_marker(NodeMarker::Hole) {
            assert!((dist(mesh.nodes()[i], g.hole_center) - g.radius).abs() < 1.5 * spec.h_min);
        }
        let left = mesh.nodes_with_marker(NodeMarker::SlitLeft).count();
        let right = mesh.nodes_with_marker(NodeMarker::SlitRight).count();
        assert!(left >= 2);
        assert_eq!(left, right);
        assert!(mesh.slit_tip_node().is_some());
        let inside = mesh.max_edge_length_where(|p| spec.refine.contains(&g, p));
        assert!(inside <= 2.0 * spec.h_min, "max edge in band {inside}");
        let outside = mesh.max_edge_length_where(|_| true);
        assert!(outside <= 2.0 * spec.h_max, "max edge {outside}");
    }

    #[test]
    fn slit_sides_are_disconnected() {
        let mesh = build_antiplane_mesh(&desk_spec()).unwrap();
        let g = *mesh.geometry();
        let nodes = mesh.nodes();
        for tri in mesh.triangles() {
            let cx = (nodes[tri[0]][0] + nodes[tri[1]][0] + nodes[tri[2]][0]) / 3.0;
            for &v in tri {
                match mesh.markers()[v] {
                    NodeMarker::SlitLeft => assert!(cx < g.slit_x),
                    NodeMarker::SlitRight => assert!(cx > g.slit_x),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn uniform_mesh_is_finer_everywhere() {
        let mut spec = desk_spec();
        spec.h_min = 0.04;
        spec.h_max = 0.08;
        spec.refine = RefineRegion::Uniform;
        let mesh = build_antiplane_mesh(&spec).unwrap();
        assert!(mesh.min_signed_area() > 0.0);
        assert_eq!(mesh.euler_characteristic(), 0);
        assert!(mesh.max_edge_length_where(|_| true) <= 2.0 * spec.h_min);
    }

    #[test]
    fn deterministic() {
        let a = build_antiplane_mesh(&desk_spec()).unwrap();
        let b = build_antiplane_mesh(&desk_spec()).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_eq!(a.triangles(), b.triangles());
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut spec = desk_spec();
        spec.geometry.hole_center = [0.1, 0.3];
        assert!(matches!(build_antiplane_mesh(&spec), Err(MeshError::Geometry(_))));
        let mut spec = desk_spec();
        spec.geometry.hole_center = [1.0, 1.3];
        assert!(matches!(build_antiplane_mesh(&spec), Err(MeshError::Geometry(_))));
        let mut spec = desk_spec();
        spec.h_min = 0.05;
        assert!(matches!(build_antiplane_mesh(&spec), Err(MeshError::InvalidArgument(_))));
    }
}
