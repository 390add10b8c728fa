use super::{MeshError, Point, PointLocator, TriMesh};

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSample {
    pub s: f64,
    pub point: Point,
    /// Containing triangle and barycentric coordinates; `None` outside the
    /// domain (including the hole).
    pub location: Option<(usize, [f64; 3])>,
}

/// Sampled segment `p + s u`, `s in [0, 1]`, resolved on one mesh.
#[derive(Clone, Debug)]
pub struct LineProbe {
    pub anchor: Point,
    pub direction: Point,
    pub samples: Vec<ProbeSample>,
}

impl LineProbe {
    /// Interpolates a nodal field at every sample.
    pub fn evaluate(&self, mesh: &TriMesh, field: &[f64]) -> Vec<Option<f64>> {
        self.samples
            .iter()
            .map(|sample| {
                sample.location.map(|(t, bary)| {
                    let tri = mesh.triangles()[t];
                    (0..3).map(|k| bary[k] * field[tri[k]]).sum()
                })
            })
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.samples.len() - 1) as f64
    }
}

pub fn build_line_probe(mesh: &TriMesh, anchor: Point, direction: Point, n_samples: usize) -> Result<LineProbe, MeshError> {
    if n_samples < 2 {
        return Err(MeshError::InvalidArgument(format!("a probe needs at least 2 samples, got {n_samples}")));
    }
    let locator = PointLocator::new(mesh);
    let samples: Vec<ProbeSample> = (0..n_samples)
        .map(|k| {
            let s = k as f64 / (n_samples - 1) as f64;
            let point = [anchor[0] + s * direction[0], anchor[1] + s * direction[1]];
            ProbeSample {
                s,
                point,
                location: locator.locate(mesh, point),
            }
        })
        .collect();
    if samples.iter().all(|s| s.location.is_none()) {
        return Err(MeshError::InvalidArgument("probe line lies entirely outside the domain".into()));
    }
    Ok(LineProbe {
        anchor,
        direction,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_antiplane_mesh, AntiplaneGeometry, AntiplaneMeshSpec};

    fn mesh() -> TriMesh {
        let spec = AntiplaneMeshSpec::band(AntiplaneGeometry::default(), 0.04, 0.04, 0.08);
        build_antiplane_mesh(&spec).unwrap()
    }

    #[test]
    fn figure_line_endpoints_are_located() {
        let m = mesh();
        let probe = build_line_probe(&m, [0.0, 1.0], [1.5, -1.0], 2).unwrap();
        assert_eq!(probe.samples[0].point, [0.0, 1.0]);
        assert_eq!(probe.samples[1].point, [1.5, 0.0]);
        assert!(probe.samples.iter().all(|s| s.location.is_some()));
    }

    #[test]
    fn sample_on_node_has_unit_barycentrics() {
        let m = mesh();
        let node = m.nodes()[m.nodes().len() / 3];
        let probe = build_line_probe(&m, node, [0.0, 0.0], 2).unwrap();
        let (_, b) = probe.samples[0].location.unwrap();
        let mut sorted = b;
        sorted.sort_by(f64::total_cmp);
        assert!(sorted[0].abs() < 1e-12 && sorted[1].abs() < 1e-12);
        assert!((sorted[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_field_is_reproduced() {
        let m = mesh();
        let field: Vec<f64> = m.nodes().iter().map(|p| p[0] + p[1]).collect();
        let probe = build_line_probe(&m, [0.0, 1.0], [1.5, -1.0], 101).unwrap();
        for (sample, value) in probe.samples.iter().zip(probe.evaluate(&m, &field)) {
            let v = value.unwrap();
            assert!((v - (sample.point[0] + sample.point[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_samples_are_flagged() {
        let m = mesh();
        // crosses the hole
        let probe = build_line_probe(&m, [0.0, 0.3], [0.6, 0.0], 61).unwrap();
        let mid = &probe.samples[30];
        assert!(mid.location.is_none());
        assert!(probe.samples[0].location.is_some());
        assert!(build_line_probe(&m, [3.0, 3.0], [1.0, 0.0], 5).is_err());
        assert!(build_line_probe(&m, [0.0, 0.0], [1.0, 0.0], 1).is_err());
    }
}
