use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wheelforge_core::depthsynth::DepthMap;
use wheelforge_core::mesh::{box_mesh, sphere_mesh, TriMesh, Vec3};
use wheelforge_core::metrics3d::*;

fn map(values: Vec<f64>, valid: Vec<bool>, w: usize) -> DepthMap {
    let h = values.len() / w;
    DepthMap { width: w, height: h, values, valid, mm_per_pixel: 1.0 }
}

#[test]
fn identical_depths_are_perfect() {
    let d = map((0..64).map(|i| 10.0 + i as f64).collect(), vec![true; 64], 8);
    let r = depth_errors(&d, &d).unwrap();
    assert_eq!((r.rmse, r.absrel, r.delta_125, r.valid_pixels), (0.0, 0.0, 1.0, 64));
}

#[test]
fn constant_offset_arithmetic() {
    let gt = map(vec![1.0; 16], vec![true; 16], 4);
    let pred = map(vec![1.3; 16], vec![true; 16], 4);
    let r = depth_errors(&pred, &gt).unwrap();
    assert!((r.rmse - 0.3).abs() < 1e-12);
    assert!((r.absrel - 0.3).abs() < 1e-12);
    assert_eq!(r.delta_125, 0.0);
}

#[test]
fn random_pair_matches_pixel_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 40 * 30;
    let gt = map((0..n).map(|_| 1.0 + rng.random::<f64>() * 9.0).collect(), (0..n).map(|_| rng.random::<f64>() < 0.8).collect(), 40);
    let pred = map((0..n).map(|_| 1.0 + rng.random::<f64>() * 9.0).collect(), (0..n).map(|_| rng.random::<f64>() < 0.8).collect(), 40);
    let r = depth_errors(&pred, &gt).unwrap();
    let (mut sq, mut rel, mut ok, mut m) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        if gt.valid[i] && pred.valid[i] {
            let (p, g) = (pred.values[i], gt.values[i]);
            sq += (p - g).powi(2);
            rel += (p - g).abs() / g;
            if p / g < 1.25 && g / p < 1.25 {
                ok += 1.0;
            }
            m += 1.0;
        }
    }
    assert_eq!(r.valid_pixels as f64, m);
    assert!((r.rmse - (sq / m).sqrt()).abs() < 1e-12);
    assert!((r.absrel - rel / m).abs() < 1e-12);
    assert!((r.delta_125 - ok / m).abs() < 1e-12);
}

#[test]
fn depth_error_failures() {
    let a = map(vec![1.0; 4], vec![true, true, false, false], 2);
    let b = map(vec![1.0; 4], vec![false, false, true, true], 2);
    assert_eq!(depth_errors(&a, &b).unwrap_err(), MetricsError::NoOverlap);
    let z = map(vec![0.0; 4], vec![true; 4], 2);
    assert!(matches!(depth_errors(&a, &z), Err(MetricsError::NonPositiveGroundTruth(_))));
    let c = map(vec![1.0; 6], vec![true; 6], 3);
    assert!(matches!(depth_errors(&a, &c), Err(MetricsError::DimensionMismatch(..))));
}

#[test]
fn iou_of_simple_solids() {
    let a = box_mesh([0.0; 3], [1.0; 3]);
    assert_eq!(mesh_iou(&a, &a, 0.02).unwrap(), 1.0);
    let far = box_mesh([3.0, 0.0, 0.0], [4.0, 1.0, 1.0]);
    assert_eq!(mesh_iou(&a, &far, 0.05).unwrap(), 0.0);
    let shifted = box_mesh([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]);
    let iou = mesh_iou(&a, &shifted, 0.02).unwrap();
    assert!((iou - 1.0 / 3.0).abs() <= 0.02, "{iou}");
    assert_eq!(iou, mesh_iou(&shifted, &a, 0.02).unwrap());
    let open = a.with_triangles(&(1..a.triangles.len()).collect::<Vec<_>>());
    assert_eq!(mesh_iou(&open, &a, 0.1).unwrap_err(), MetricsError::NotWatertight);
}

fn square(z: f64) -> TriMesh {
    TriMesh::new(vec![[0.0, 0.0, z], [1.0, 0.0, z], [1.0, 1.0, z], [0.0, 1.0, z]], vec![[0, 1, 2], [0, 2, 3]])
}

#[test]
fn parallel_squares_approach_twice_gap_squared() {
    let h = 0.1;
    let cd = chamfer(&square(0.0), &square(h), 10_000, 3).unwrap();
    assert!((cd - 2.0 * h * h).abs() / (2.0 * h * h) < 0.05, "{cd}");
}

#[test]
fn self_chamfer_and_resampling_bound() {
    let m = sphere_mesh([0.0; 3], 1.0, 4);
    assert_eq!(chamfer(&m, &m, 2000, 1).unwrap(), 0.0);
    let p = sample_surface(&m, 2000, 1).unwrap();
    let q = sample_surface(&m, 2000, 2).unwrap();
    let spacing = p
        .iter()
        .enumerate()
        .map(|(i, a)| {
            p.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / p.len() as f64;
    let cd = chamfer_points(&p, &q).unwrap();
    assert!(cd > 0.0 && cd <= (2.0 * spacing).powi(2), "{cd} vs {spacing}");
}

#[test]
fn chamfer_scales_quadratically_and_is_symmetric() {
    let a = sphere_mesh([0.0; 3], 1.0, 3);
    let b = box_mesh([-0.5, -0.6, -0.7], [0.9, 0.8, 0.7]);
    let scale = |m: &TriMesh, s: f64| TriMesh::new(m.vertices.iter().map(|v| v.map(|x| x * s)).collect(), m.triangles.clone());
    let base = chamfer(&a, &b, 3000, 4).unwrap();
    let big = chamfer(&scale(&a, 2.5), &scale(&b, 2.5), 3000, 4).unwrap();
    assert!((big - 6.25 * base).abs() < 1e-9 * big);
    assert_eq!(base, chamfer(&b, &a, 3000, 4).unwrap());
}

fn rigid(m: &TriMesh, angle: f64, t: Vec3) -> TriMesh {
    let (s, c) = angle.sin_cos();
    let v = m.vertices.iter().map(|p| [c * p[0] - s * p[1] + t[0], s * p[0] + c * p[1] + t[1], p[2] + t[2]]).collect();
    TriMesh::new(v, m.triangles.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn iou_is_symmetric_and_bounded(dx in -1.5f64..1.5, dy in -1.5f64..1.5, sz in 0.3f64..1.2) {
        let a = box_mesh([0.0; 3], [1.0; 3]);
        let b = box_mesh([dx, dy, 0.1], [dx + sz, dy + sz, 0.1 + sz]);
        let ab = mesh_iou(&a, &b, 0.05).unwrap();
        prop_assert_eq!(ab, mesh_iou(&b, &a, 0.05).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn chamfer_is_rigid_invariant(angle in 0.0f64..6.28, tx in -5.0f64..5.0, tz in -5.0f64..5.0) {
        let a = sphere_mesh([0.0; 3], 1.0, 2);
        let b = box_mesh([-0.4, -0.5, -0.6], [0.7, 0.6, 0.5]);
        let base = chamfer(&a, &b, 500, 9).unwrap();
        let moved = chamfer(&rigid(&a, angle, [tx, 1.0, tz]), &rigid(&b, angle, [tx, 1.0, tz]), 500, 9).unwrap();
        prop_assert!((base - moved).abs() < 1e-9);
    }
}
