use super::MeshError;

/// Uniform P1 grid on `[0, L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalMesh {
    nodes: Vec<f64>,
    length: f64,
}

impl IntervalMesh {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn cells(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        (0..self.n_cells()).map(|i| [i, i + 1])
    }

    pub fn spacing(&self, cell: usize) -> f64 {
        self.nodes[cell + 1] - self.nodes[cell]
    }
}

pub fn build_interval_mesh(length: f64, n_cells: usize) -> Result<IntervalMesh, MeshError> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(MeshError::InvalidArgument(format!("length must be positive, got {length}")));
    }
    if n_cells == 0 {
        return Err(MeshError::InvalidArgument("at least one cell is required".into()));
    }
    let h = length / n_cells as f64;
    let mut nodes: Vec<f64> = (0..=n_cells).map(|i| i as f64 * h).collect();
    // pin the far end exactly
    nodes[n_cells] = length;
    Ok(IntervalMesh { nodes, length })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_mesh() {
        let m = build_interval_mesh(1.0, 1).unwrap();
        assert_eq!(m.nodes(), &[0.0, 1.0]);
    }

    #[test]
    fn bar_grid_has_1001_nodes() {
        let m = build_interval_mesh(6.0, 1000).unwrap();
        assert_eq!(m.n_nodes(), 1001);
        for c in 0..m.n_cells() {
            assert!((m.spacing(c) - 0.006).abs() < 1e-12);
        }
        assert_eq!(m.nodes()[1000], 6.0);
    }

    #[test]
    fn five_cells() {
        let m = build_interval_mesh(6.0, 5).unwrap();
        let expected = [0.0, 1.2, 2.4, 3.6, 4.8, 6.0];
        for (a, b) in m.nodes().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(m.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_interval_mesh(0.0, 3).is_err());
        assert!(build_interval_mesh(-1.0, 3).is_err());
        assert!(build_interval_mesh(1.0, 0).is_err());
    }
}
