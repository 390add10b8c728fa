use std::sync::Arc;

use super::sparse::CsrPattern;
use crate::mesh::{IntervalMesh, TriMesh};

/// Precomputed P1 element data. Intervals use two of the three slots.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub nodes: [usize; 3],
    pub n: usize,
    /// Length or area.
    pub measure: f64,
    /// Constant gradients of the nodal basis functions.
    pub grads: [[f64; 2]; 3],
}

impl Element {
    /// Basis function value at the centroid.
    pub fn centroid_weight(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn centroid_value(&self, field: &[f64]) -> f64 {
        self.nodes[..self.n].iter().map(|&i| field[i]).sum::<f64>() / self.n as f64
    }

    pub fn gradient(&self, field: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for k in 0..self.n {
            let v = field[self.nodes[k]];
            g[0] += v * self.grads[k][0];
            g[1] += v * self.grads[k][1];
        }
        g
    }
}

/// Element data plus the shared sparsity pattern and per-element slot maps.
#[derive(Clone, Debug)]
pub struct P1Geometry {
    n_nodes: usize,
    elements: Vec<Element>,
    pattern: Arc<CsrPattern>,
    slots: Vec<[usize; 9]>,
}

impl P1Geometry {
    pub fn from_interval(mesh: &IntervalMesh) -> Self {
        let x = mesh.nodes();
        let elements = mesh
            .cells()
            .map(|[a, b]| {
                let h = x[b] - x[a];
                Element {
                    nodes: [a, b, 0],
                    n: 2,
                    measure: h,
                    grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]],
                }
            })
            .collect();
        Self::from_elements(mesh.n_nodes(), elements)
    }

    pub fn from_trimesh(mesh: &TriMesh) -> Self {
        let p = mesh.nodes();
        let elements = mesh
            .triangles()
            .iter()
            .map(|&tri| {
                let [a, b, c] = tri.map(|i| p[i]);
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                let grads = [
                    [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
                    [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
                    [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
                ];
                Element {
                    nodes: tri,
                    n: 3,
                    measure: 0.5 * det,
                    grads,
                }
            })
            .collect();
        Self::from_elements(mesh.n_nodes(), elements)
    }

    pub fn from_elements(n_nodes: usize, elements: Vec<Element>) -> Self {
        let pattern = CsrPattern::from_elements(n_nodes, &elements);
        let slots = elements
            .iter()
            .map(|e| {
                let mut s = [usize::MAX; 9];
                for a in 0..e.n {
                    for b in 0..e.n {
                        s[a * 3 + b] = pattern.position(e.nodes[a], e.nodes[b]).expect("pattern covers elements");
                    }
                }
                s
            })
            .collect();
        Self {
            n_nodes,
            elements,
            pattern: Arc::new(pattern),
            slots,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub(crate) fn slots(&self, e: usize) -> &[usize; 9] {
        &self.slots[e]
    }

    /// True when every element is an interval with consecutive nodes, so
    /// system matrices are tridiagonal.
    pub fn is_chain(&self) -> bool {
        self.elements
            .iter()
            .enumerate()
            .all(|(k, e)| e.n == 2 && e.nodes[0] == k && e.nodes[1] == k + 1)
    }

    /// Lumped nodal weights `sum_T |T| / n`.
    pub fn nodal_measure(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_nodes];
        for e in &self.elements {
            for &i in &e.nodes[..e.n] {
                m[i] += e.measure / e.n as f64;
            }
        }
        m
    }

    pub fn total_measure(&self) -> f64 {
        self.elements.iter().map(|e| e.measure).sum()
    }
}
