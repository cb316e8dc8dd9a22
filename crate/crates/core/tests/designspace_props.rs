use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wheelforge_core::depthsynth::synthesize_depth;
use wheelforge_core::designspace::*;
use wheelforge_core::raster::Raster8;
use wheelforge_core::reference::SpokeStyle;
use wheelforge_core::topo::{replicate_segment, SegmentSetup};
use wheelforge_core::wheel::RimTemplate;

fn fv(rows: Vec<Vec<f64>>) -> Vec<FeatureVector> {
    rows.into_iter().enumerate().map(|(i, values)| FeatureVector { design_id: i, values }).collect()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

#[test]
fn constant_disc_features_are_uniform() {
    let t = RimTemplate::default();
    let mut mask = Raster8::new(128, 128);
    mask.data.iter_mut().for_each(|v| *v = 255);
    let mut d = synthesize_depth(&mask, &t).unwrap();
    d.values.iter_mut().for_each(|v| *v = 40.0);
    let f = depth_features(&d, 16);
    assert_eq!(f.len(), 256);
    assert!(f.iter().all(|&v| v == 0.0 || v == 1.0));
    assert!(f.iter().filter(|&&v| v == 1.0).count() > 150);
    assert_eq!(f, depth_features(&d.clone(), 16));
}

#[test]
fn four_fold_content_survives_quarter_turn() {
    let t = RimTemplate { n_bolts: 4, ..RimTemplate::default() };
    let setup = SegmentSetup::default();
    let mask = replicate_segment(&SpokeStyle::default().rasterize(&setup), setup.nx, setup.ny, 4, 256, &t);
    let a = depth_features(&synthesize_depth(&mask, &t).unwrap(), 16);
    let b = depth_features(&synthesize_depth(&mask.rotated90(), &t).unwrap(), 16);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn rank_two_data_is_reconstructed() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
    let v: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
    let rows: Vec<Vec<f64>> = (0..15)
        .map(|_| {
            let (a, b) = (rng.random::<f64>() * 4.0, rng.random::<f64>() - 2.0);
            (0..20).map(|j| 3.0 + a * u[j] + b * v[j]).collect()
        })
        .collect();
    let red = reduce_2d(&fv(rows.clone())).unwrap();
    assert!(!red.rank_deficient);
    for (e, row) in red.embeddings.iter().zip(&rows) {
        let back = red.reconstruct(e.x, e.y);
        for (x, y) in back.iter().zip(row) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn duplicated_rows_embed_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base: Vec<Vec<f64>> = (0..10).map(|_| (0..8).map(|_| rng.random()).collect()).collect();
    let mut rows = base.clone();
    rows.extend(base);
    let red = reduce_2d(&fv(rows)).unwrap();
    for i in 0..10 {
        assert_eq!(red.embeddings[i].point(), red.embeddings[i + 10].point());
    }
}

#[test]
fn projected_variance_matches_covariance_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..256).map(|_| rng.random::<f64>()).collect()).collect();
    let red = reduce_2d(&fv(rows.clone())).unwrap();
    let n = rows.len();
    let mean: Vec<f64> = (0..256).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    // the n x n Gram matrix shares the nonzero spectrum of the covariance
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| (0..256).map(|j| (rows[a][j] - mean[j]) * (rows[b][j] - mean[j])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect();
    let ev = jacobi_eigenvalues(gram);
    let var = |f: &dyn Fn(&Embedding2D) -> f64| red.embeddings.iter().map(|e| f(e).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((var(&|e| e.x) - ev[0]).abs() < 1e-9 * ev[0]);
    assert!((var(&|e| e.y) - ev[1]).abs() < 1e-9 * ev[0]);
    assert!((red.variances[0] - ev[0]).abs() < 1e-9 * ev[0]);
    let mean_x: f64 = red.embeddings.iter().map(|e| e.x).sum::<f64>() / n as f64;
    assert!(mean_x.abs() < 1e-9);
    for c in &red.components {
        let lead = c.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
        assert!(lead > 0.0);
    }
}

#[test]
fn collinear_data_is_rank_deficient() {
    let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64, 1.0]).collect();
    let red = reduce_2d(&fv(rows)).unwrap();
    assert!(red.rank_deficient);
    assert!(red.embeddings.iter().all(|e| e.y == 0.0));
    assert!(reduce_2d(&fv(vec![vec![1.0], vec![2.0]])).is_err());
}

fn blobs(seed: u64, centres: &[[f64; 2]], per: usize, spread: f64) -> (Vec<[f64; 2]>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..per {
            pts.push([centre[0] + spread * (rng.random::<f64>() - 0.5), centre[1] + spread * (rng.random::<f64>() - 0.5)]);
            truth.push(c);
        }
    }
    (pts, truth)
}

#[test]
fn separated_blobs_are_recovered() {
    let (pts, truth) = blobs(4, &[[0.0, 0.0], [100.0, 50.0]], 40, 2.0);
    let km = kmeans(&pts, 2, 11).unwrap();
    let map = km.labels[0];
    for (l, t) in km.labels.iter().zip(&truth) {
        assert_eq!(*l == map, *t == 0);
    }
    let q = cluster_quality(&pts, &km.labels).unwrap();
    assert!(q.silhouette > 0.9);
    assert_eq!(km, kmeans(&pts, 2, 11).unwrap());
}

#[test]
fn quality_indices_match_definitions() {
    let (pts, truth) = blobs(5, &[[0.0, 0.0], [3.0, 1.0], [1.0, 4.0]], 20, 3.0);
    let q = cluster_quality(&pts, &truth).unwrap();
    let n = pts.len();
    let k = 3;
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let members: Vec<Vec<usize>> = (0..k).map(|c| (0..n).filter(|&i| truth[i] == c).collect()).collect();
    let centroid = |c: usize| {
        let m = &members[c];
        [m.iter().map(|&i| pts[i][0]).sum::<f64>() / m.len() as f64, m.iter().map(|&i| pts[i][1]).sum::<f64>() / m.len() as f64]
    };
    let mut sil = 0.0;
    for i in 0..n {
        let own = truth[i];
        let a = members[own].iter().filter(|&&j| j != i).map(|&j| dist(pts[i], pts[j])).sum::<f64>() / (members[own].len() - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| members[c].iter().map(|&j| dist(pts[i], pts[j])).sum::<f64>() / members[c].len() as f64)
            .fold(f64::INFINITY, f64::min);
        sil += (b - a) / a.max(b);
    }
    sil /= n as f64;
    let s: Vec<f64> = (0..k).map(|c| members[c].iter().map(|&i| dist(pts[i], centroid(c))).sum::<f64>() / members[c].len() as f64).collect();
    let dbi = (0..k)
        .map(|i| (0..k).filter(|&j| j != i).map(|j| (s[i] + s[j]) / dist(centroid(i), centroid(j))).fold(0.0, f64::max))
        .sum::<f64>()
        / k as f64;
    let g = [pts.iter().map(|p| p[0]).sum::<f64>() / n as f64, pts.iter().map(|p| p[1]).sum::<f64>() / n as f64];
    let bss: f64 = (0..k).map(|c| members[c].len() as f64 * dist(centroid(c), g).powi(2)).sum();
    let wss: f64 = (0..n).map(|i| dist(pts[i], centroid(truth[i])).powi(2)).sum();
    let ch = (bss / (k - 1) as f64) / (wss / (n - k) as f64);
    assert!((q.silhouette - sil).abs() < 1e-9);
    assert!((q.davies_bouldin - dbi).abs() < 1e-9);
    assert!((q.calinski_harabasz - ch).abs() < 1e-9 * ch);
}

fn grid_embeddings() -> Vec<Embedding2D> {
    (0..100).map(|i| Embedding2D { design_id: i, x: (i % 10) as f64, y: (i / 10) as f64 }).collect()
}

#[test]
fn lhs_points_stratify_each_axis() {
    let e = grid_embeddings();
    let s = lhs_sample(&e, 10, 7).unwrap();
    for a in 0..2 {
        let mut bins: Vec<usize> = s.lhs_points.iter().map(|p| ((p[a] / 9.0) * 10.0).floor().min(9.0) as usize).collect();
        bins.sort_unstable();
        assert_eq!(bins, (0..10).collect::<Vec<_>>());
    }
    let mut ids = s.design_ids.clone();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), 10);
}

#[test]
fn single_lhs_draw_picks_nearest_design() {
    let e = grid_embeddings();
    let s = lhs_sample(&e, 1, 3).unwrap();
    let q = s.lhs_points[0];
    let best = e
        .iter()
        .min_by(|a, b| {
            let da = (a.x - q[0]).powi(2) + (a.y - q[1]).powi(2);
            let db = (b.x - q[0]).powi(2) + (b.y - q[1]).powi(2);
            da.total_cmp(&db).then(a.design_id.cmp(&b.design_id))
        })
        .unwrap();
    assert_eq!(s.design_ids, vec![best.design_id]);
    assert_eq!(
        lhs_sample(&e, 101, 0).unwrap_err(),
        DesignSpaceError::InsufficientDesigns { wanted: 101, available: 100 }
    );
}

#[test]
fn diversity_matches_pairwise_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let v: Vec<Vec<f64>> = (0..30).map(|_| (0..5).map(|_| rng.random::<f64>() * 10.0).collect()).collect();
    let d = diversity(&v, 30, 0).unwrap();
    for i in 0..30 {
        let mut s = 0.0;
        for j in 0..30 {
            if i != j {
                s += v[i].iter().zip(&v[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            }
        }
        assert!((d.scores[i] - s / 29.0).abs() < 1e-12);
    }
    let same = diversity(&vec![vec![1.0, 2.0]; 5], 5, 0).unwrap();
    assert!(same.scores.iter().all(|&s| s == 0.0));
    let sub = diversity(&v, 10, 42).unwrap();
    assert_eq!(sub.subset.len(), 10);
    assert_eq!(sub, diversity(&v, 10, 42).unwrap());
}

proptest! {
    #[test]
    fn lhs_is_stratified(n in 1usize..40, seed in 0u64..1000) {
        let e: Vec<Embedding2D> = (0..60).map(|i| Embedding2D { design_id: i, x: (i * 7 % 60) as f64, y: (i * 13 % 60) as f64 * 0.5 }).collect();
        let s = lhs_sample(&e, n, seed).unwrap();
        let (w, h) = (59.0, 29.5);
        for (a, ext) in [(0, w), (1, h)] {
            let mut bins: Vec<usize> = s.lhs_points.iter().map(|p| ((p[a] / ext) * n as f64).floor().min(n as f64 - 1.0) as usize).collect();
            bins.sort_unstable();
            prop_assert_eq!(bins, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn diversity_is_translation_invariant_and_scales(
        pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 2..12),
        shift in prop::collection::vec(-5.0f64..5.0, 3),
        alpha in -3.0f64..3.0,
    ) {
        let base = diversity(&pts, pts.len(), 0).unwrap();
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|a| alpha * a).collect()).collect();
        let m = diversity(&moved, pts.len(), 0).unwrap();
        let s = diversity(&scaled, pts.len(), 0).unwrap();
        for i in 0..pts.len() {
            prop_assert!((m.scores[i] - base.scores[i]).abs() < 1e-9);
            prop_assert!((s.scores[i] - alpha.abs() * base.scores[i]).abs() < 1e-9);
            prop_assert!(base.scores[i] >= 0.0);
        }
    }

    #[test]
    fn kmeans_is_deterministic_and_covers_clusters(seed in 0u64..500, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<[f64; 2]> = (0..25).map(|_| [rng.random::<f64>(), (rng.random::<f64>() * 3.0).floor()]).collect();
        let a = kmeans(&pts, k, seed).unwrap();
        prop_assert_eq!(&a, &kmeans(&pts, k, seed).unwrap());
        for c in 0..k {
            prop_assert!(a.labels.contains(&c));
        }
    }
}
