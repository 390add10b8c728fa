use std::sync::OnceLock;

use proptest::prelude::*;
use stochastic_fracture::analysis::*;
use stochastic_fracture::mesh::*;

/// Allowed deviation of a KDE's trapezoid mass from 1.
const KDE_MASS_TOL: f64 = 0.02;
/// Allowed L1 gap between the mixture of conditionals and the pooled density.
const RECOMBINATION_TOL: f64 = 0.05;
/// Allowed gap between KDE window mass and relative frequency.
const WINDOW_MASS_TOL: f64 = 0.01;

fn mesh() -> &'static TriMesh {
    static MESH: OnceLock<TriMesh> = OnceLock::new();
    MESH.get_or_init(|| {
        build_antiplane_mesh(&AntiplaneMeshSpec::band(AntiplaneGeometry::default(), 0.04, 0.02, 0.04)).unwrap()
    })
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((p[0] - a[0] - t * dx).powi(2) + (p[1] - a[1] - t * dy).powi(2)).sqrt()
}

/// Synthetic crack path of each class with damage in `[0.95, 1]` on the
/// path and `[0, 0.8]` elsewhere.
fn crack_field(class: CrackClass, noise: &[f64]) -> Vec<f64> {
    let m = mesh();
    let c = m.geometry().hole_center;
    let tip = m.geometry().slit_tip();
    let on_path = |p: Point| match class {
        CrackClass::Type1 => (p[0] - tip[0]).abs() <= 0.04 && p[1] <= tip[1] + 1e-9,
        CrackClass::Type2 => segment_distance(p, tip, c) <= 0.04 || segment_distance(p, c, [c[0], 0.0]) <= 0.04,
        _ => segment_distance(p, tip, c) <= 0.04 || segment_distance(p, c, [0.0, c[1]]) <= 0.04,
    };
    m.nodes()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let r = noise[i % noise.len()];
            if on_path(*p) {
                0.95 + 0.05 * r
            } else {
                0.8 * r
            }
        })
        .collect()
}

fn l1_gap(a: &Density1D, b: &[f64]) -> f64 {
    a.grid
        .windows(2)
        .enumerate()
        .map(|(k, x)| 0.5 * (x[1] - x[0]) * ((a.density[k] - b[k]).abs() + (a.density[k + 1] - b[k + 1]).abs()))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn classification_is_stable_under_small_scaling(
        which in 0usize..3,
        c in 0.95f64..1.05,
        noise in prop::collection::vec(0.0f64..1.0, 97),
    ) {
        let class = CrackClass::CLASSIFIED[which];
        let alpha = crack_field(class, &noise);
        let params = ClassifierParams::default();
        prop_assert_eq!(classify_crack_2d(&alpha, mesh(), &params).unwrap(), class);
        let scaled: Vec<f64> = alpha.iter().map(|a| a * c).collect();
        prop_assert_eq!(classify_crack_2d(&scaled, mesh(), &params).unwrap(), class);
    }

    #[test]
    fn kde_is_normalized(
        samples in prop::collection::vec(0.1f64..0.9, 1..200),
        bandwidth in prop::option::of(0.005f64..0.2),
    ) {
        let d = kde_1d(&samples, bandwidth, (0.0, 1.0), KDE_GRID_POINTS).unwrap();
        prop_assert!(d.density.iter().all(|v| *v >= 0.0));
        prop_assert!((d.integral() - 1.0).abs() <= KDE_MASS_TOL);
    }

    #[test]
    fn equal_conditionals_return_the_priors(
        raw in prop::collection::vec(0.0f64..1.0, 2..6),
        f in 0.01f64..10.0,
    ) {
        let sum: f64 = raw.iter().sum();
        prop_assume!(sum > 1e-6);
        let priors: Vec<f64> = raw.iter().map(|r| r / sum).collect();
        let post = bayes_condition(&priors, &vec![f; priors.len()], f, 0.3).unwrap();
        prop_assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in post.iter().zip(&priors) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn certain_prior_stays_certain(conds in prop::collection::vec(0.01f64..10.0, 3), total in 0.01f64..10.0) {
        let post = bayes_condition(&[1.0, 0.0, 0.0], &conds, total, 0.5).unwrap();
        prop_assert_eq!(post, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn conditional_densities_recombine(
        samples in prop::collection::vec((0.05f64..0.95, 0usize..3), 10..120),
    ) {
        let pooled: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let h = silverman_bandwidth(&pooled).max(1e-3);
        let total = kde_1d(&pooled, Some(h), (0.0, 1.0), KDE_GRID_POINTS).unwrap();
        let mut mixture = vec![0.0; KDE_GRID_POINTS];
        for label in 0..3 {
            let group: Vec<f64> = samples.iter().filter(|s| s.1 == label).map(|s| s.0).collect();
            if group.is_empty() {
                continue;
            }
            let p = group.len() as f64 / samples.len() as f64;
            let f = kde_1d(&group, Some(h), (0.0, 1.0), KDE_GRID_POINTS).unwrap();
            mixture.iter_mut().zip(&f.density).for_each(|(m, v)| *m += p * v);
        }
        prop_assert!(l1_gap(&total, &mixture) < RECOMBINATION_TOL);
    }

    #[test]
    fn histogram_counts_every_sample_in_range(samples in prop::collection::vec(-0.2f64..1.2, 0..300), bins in 1usize..50) {
        let counts = histogram(&samples, bins, (0.0, 1.0)).unwrap();
        let inside = samples.iter().filter(|s| (0.0..=1.0).contains(*s)).count();
        prop_assert_eq!(counts.iter().sum::<usize>(), inside);
    }
}

#[test]
fn narrow_kde_matches_window_frequencies() {
    // 30% of the samples near 1, the rest near 4
    let samples: Vec<f64> = (0..1000)
        .map(|k| {
            let jitter = 0.02 * ((k * 37 % 101) as f64 / 100.0 - 0.5);
            if k % 10 < 3 {
                1.0 + jitter
            } else {
                4.0 + jitter
            }
        })
        .collect();
    let d = kde_1d(&samples, Some(0.01), (0.0, 6.0), 4096).unwrap();
    assert!((d.mass_between(0.5, 1.5) - 0.3).abs() < WINDOW_MASS_TOL);
    assert!((d.mass_between(3.5, 4.5) - 0.7).abs() < WINDOW_MASS_TOL);
}
