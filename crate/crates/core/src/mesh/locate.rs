use super::{Point, TriMesh};

const INSIDE_TOL: f64 = 1e-10;

/// Bucket grid over triangle bounding boxes for point location.
#[derive(Clone, Debug)]
pub struct PointLocator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &TriMesh) -> Self {
        let nodes = mesh.nodes();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let n_tri = mesh.triangles().len().max(1);
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let cell = extent / (n_tri as f64).sqrt().max(1.0);
        let nx = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let (mut blo, mut bhi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &v in tri {
                for k in 0..2 {
                    blo[k] = blo[k].min(nodes[v][k]);
                    bhi[k] = bhi[k].max(nodes[v][k]);
                }
            }
            let (i0, j0) = Self::index(lo, cell, nx, ny, blo);
            let (i1, j1) = Self::index(lo, cell, nx, ny, bhi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self {
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn index(origin: Point, cell: f64, nx: usize, ny: usize, p: Point) -> (usize, usize) {
        let i = ((p[0] - origin[0]) / cell).floor().clamp(0.0, (nx - 1) as f64) as usize;
        let j = ((p[1] - origin[1]) / cell).floor().clamp(0.0, (ny - 1) as f64) as usize;
        (i, j)
    }

    /// Containing triangle (lowest index on shared edges) and barycentric
    /// coordinates, or `None` outside the mesh.
    pub fn locate(&self, mesh: &TriMesh, p: Point) -> Option<(usize, [f64; 3])> {
        let fx = (p[0] - self.origin[0]) / self.cell;
        let fy = (p[1] - self.origin[1]) / self.cell;
        if fx < -1e-9 || fy < -1e-9 || fx > self.nx as f64 + 1e-9 || fy > self.ny as f64 + 1e-9 {
            return None;
        }
        let (i, j) = Self::index(self.origin, self.cell, self.nx, self.ny, p);
        self.buckets[j * self.nx + i]
            .iter()
            .filter_map(|&t| barycentric(mesh, t, p).map(|b| (t, b)))
            .min_by_key(|(t, _)| *t)
    }
}

/// Barycentric coordinates of `p` in triangle `t` if it lies inside.
pub(crate) fn barycentric(mesh: &TriMesh, t: usize, p: Point) -> Option<[f64; 3]> {
    let [a, b, c] = mesh.triangles()[t];
    let nodes = mesh.nodes();
    let (p0, p1, p2) = (nodes[a], nodes[b], nodes[c]);
    let e1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let e2 = [p2[0] - p0[0], p2[1] - p0[1]];
    let d = [p[0] - p0[0], p[1] - p0[1]];
    let det = e1[0] * e2[1] - e2[0] * e1[1];
    let l1 = (d[0] * e2[1] - e2[0] * d[1]) / det;
    let l2 = (e1[0] * d[1] - d[0] * e1[1]) / det;
    let l0 = 1.0 - l1 - l2;
    if l0 >= -INSIDE_TOL && l1 >= -INSIDE_TOL && l2 >= -INSIDE_TOL {
        Some([l0, l1, l2])
    } else {
        None
    }
}
