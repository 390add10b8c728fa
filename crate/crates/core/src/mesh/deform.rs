use super::{MeshError, NodeMarker, TriMesh};

/// Largest admissible ratio of radial offset to local blend length.
pub const MAX_BLEND_COMPRESSION: f64 = 0.8;

/// Distance from `c` along the unit direction `u` to the boundary of the
/// square `[0, side]^2`.
fn ray_exit(c: [f64; 2], u: [f64; 2], side: f64) -> f64 {
    (0..2)
        .filter(|&k| u[k] != 0.0)
        .map(|k| if u[k] > 0.0 { (side - c[k]) / u[k] } else { -c[k] / u[k] })
        .fold(f64::INFINITY, f64::min)
}

/// Moves hole nodes radially onto `r = radius_fn(phi)` and blends the
/// offset `d(phi)` linearly to zero along each ray:
/// `r -> r + d(phi) (1 - (r - R) / L(phi))` for `R <= r <= R + L(phi)`,
/// where `L(phi)` is `blend_width` capped by the distance from the hole to
/// the outer boundary along the ray. The radial map is monotone whenever
/// `|d| < L`, and the outer boundary never moves. A zero offset leaves a
/// node untouched, so `radius_fn == R` returns a bitwise copy of the input.
pub fn deform_hole_boundary(
    mesh: &TriMesh,
    radius_fn: impl Fn(f64) -> f64,
    blend_width: f64,
) -> Result<TriMesh, MeshError> {
    let g = mesh.geometry();
    let (c, r0, side) = (g.hole_center, g.radius, g.side());
    if !(blend_width > 0.0) {
        return Err(MeshError::InvalidArgument(format!("blend width must be positive, got {blend_width}")));
    }
    let blend_length = |u: [f64; 2]| blend_width.min(ray_exit(c, u, side) - r0);
    const CHECKS: usize = 720;
    for k in 0..CHECKS {
        let phi = std::f64::consts::TAU * k as f64 / CHECKS as f64 - std::f64::consts::PI;
        let r = radius_fn(phi);
        if !(r > 0.0) {
            return Err(MeshError::InvalidArgument(format!("radius {r} at angle {phi} is not positive")));
        }
        let length = blend_length([phi.cos(), phi.sin()]);
        if (r - r0).abs() >= MAX_BLEND_COMPRESSION * length {
            return Err(MeshError::InvalidArgument(format!(
                "radial offset {} at angle {phi} exceeds {MAX_BLEND_COMPRESSION} of the blend length {length}",
                r - r0
            )));
        }
    }

    let mut nodes = mesh.nodes().to_vec();
    for (i, p) in nodes.iter_mut().enumerate() {
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        let r = dx.hypot(dy);
        if r >= r0 + blend_width || r == 0.0 {
            continue;
        }
        let phi = dy.atan2(dx);
        let offset = radius_fn(phi) - r0;
        if offset == 0.0 {
            continue;
        }
        let u = [dx / r, dy / r];
        let step = if mesh.markers()[i] == NodeMarker::Hole {
            r0 + offset - r
        } else {
            let w = 1.0 - (r - r0) / blend_length(u);
            if w <= 0.0 {
                continue;
            }
            offset * w.min(1.0)
        };
        p[0] += step * u[0];
        p[1] += step * u[1];
    }

    let out = mesh.with_nodes(nodes);
    for t in 0..out.triangles().len() {
        let area = out.signed_area(t);
        if area <= 0.0 {
            return Err(MeshError::Deformation(format!(
                "triangle {t} inverted (signed area {area:e}); reduce the perturbation or refine"
            )));
        }
    }
    Ok(out)
}
