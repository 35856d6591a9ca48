mod common;

use common::*;
use proptest::prelude::*;
use quadrecon::candidates::*;
use quadrecon::dataset::{ShapeKind, ShapeSpec};
use quadrecon::geom::Vec3;
use quadrecon::mesh::face_key;
use quadrecon::Cloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_surface(n: usize, seed: u64) -> Cloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| {
            let (x, y): (f64, f64) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
            Vec3::new(x, y, 0.3 * (0.5 * x).sin() * (0.4 * y).cos())
        })
        .collect();
    Cloud::new(pts).unwrap()
}

#[test]
fn knn_matches_all_pairs_oracle() {
    let cloud = random_surface(200, 1);
    let g = knn_graph(&cloud, 12).unwrap();
    let want = brute_knn(&cloud, 12);
    for (i, w) in want.iter().enumerate() {
        assert_eq!(g.neighbors(i), w.as_slice(), "point {i}");
    }
}

#[test]
fn knn_breaks_ties_by_index() {
    // Unit grid: four neighbours at distance 1 for an interior point.
    let spec = ShapeSpec::new(ShapeKind::PlaneGrid, 10, 10).with_noise(0.0);
    let (_, cloud) = fixture_cloud(&spec);
    let g = knn_graph(&cloud, 4).unwrap();
    assert_eq!(g.neighbors(55), &[45, 54, 56, 65]);
    assert_eq!(brute_knn(&cloud, 8), (0..100).map(|i| knn_graph(&cloud, 8).unwrap().neighbors(i).to_vec()).collect::<Vec<_>>());
}

#[test]
fn proposals_match_brute_force_on_random_surface() {
    let cloud = random_surface(200, 2);
    let cfg = CandidateConfig::default();
    let g = knn_graph(&cloud, cfg.k).unwrap();
    assert_eq!(propose_candidates(&cloud, &g, &cfg), brute_candidates(&cloud, &g, &cfg));
}

#[test]
fn proposals_match_brute_force_on_fixtures() {
    for spec in small_fixtures() {
        let (_, cloud) = fixture_cloud(&spec);
        assert!(cloud.len() <= 200, "{spec:?}");
        let cfg = CandidateConfig::default();
        let g = knn_graph(&cloud, cfg.k).unwrap();
        let got = propose_candidates(&cloud, &g, &cfg);
        assert_eq!(got, brute_candidates(&cloud, &g, &cfg), "{spec:?}");
        assert!(got.len() <= cfg.max_per_point * cloud.len());
    }
}

#[test]
fn grid_interior_point_sees_its_four_quads() {
    let spec = ShapeSpec::new(ShapeKind::PlaneGrid, 10, 10).with_noise(0.0);
    let (mesh, cloud) = fixture_cloud(&spec);
    let cfg = CandidateConfig::default();
    let g = knn_graph(&cloud, cfg.k).unwrap();
    let cands = propose_candidates(&cloud, &g, &cfg);
    for p in [11, 44, 55, 78] {
        let mine: Vec<_> = cands.iter().filter(|c| c.center == p).map(|c| face_key(&c.ring)).collect();
        let truth: Vec<_> = mesh.faces.iter().filter(|f| f.contains(&p)).map(face_key).collect();
        assert_eq!(truth.len(), 4);
        for t in truth {
            assert!(mine.contains(&t), "point {p} misses {t:?}");
        }
    }
}

#[test]
fn emitted_candidates_pass_and_are_deterministic() {
    let spec = ShapeSpec::new(ShapeKind::Torus, 12, 7).with_seed(9).with_jitter(0.05);
    let (_, cloud) = fixture_cloud(&spec);
    let cfg = CandidateConfig::default();
    let g = knn_graph(&cloud, cfg.k).unwrap();
    let a = propose_candidates(&cloud, &g, &cfg);
    let b = propose_candidates(&cloud, &knn_graph(&cloud, cfg.k).unwrap(), &cfg);
    assert_eq!(a, b);
    for c in &a {
        assert_eq!(c.ring[0], c.center);
        let nb = g.neighbors(c.center);
        assert!(c.ring[1..].iter().all(|v| nb.contains(v)));
        let pts = c.points(&cloud).unwrap();
        assert!(geometric_filter(&pts, &cfg.thresholds).passed());
    }
    // Ordered by centre, then by rank within a centre.
    for w in a.windows(2) {
        assert!(w[0].center < w[1].center || (w[0].center == w[1].center && rank_cmp(&w[0], &w[1]).is_le()));
    }
}

#[test]
fn too_few_points_asks_to_lower_k() {
    let cloud = random_surface(5, 3);
    let err = knn_graph(&cloud, 5).unwrap_err().to_string();
    assert!(err.contains("lower k"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn filter_decisions_are_scale_free(c in prop::array::uniform12(-2.0f64..2.0), s in 0.01f64..100.0) {
        let q = [0, 1, 2, 3].map(|i| Vec3::new(c[3 * i], c[3 * i + 1], c[3 * i + 2]));
        let th = FilterThresholds::default();
        let scaled = q.map(|p| p * s);
        let a = geometric_filter(&q, &th);
        let b = geometric_filter(&scaled, &th);
        prop_assert_eq!(std::mem::discriminant(&a), std::mem::discriminant(&b));
    }

    #[test]
    fn order_ccw_gives_simple_polygon(c in prop::array::uniform8(-1.0f64..1.0)) {
        let pts = [0, 1, 2, 3].map(|i| (i, Vec3::new(c[2 * i], c[2 * i + 1], 0.0)));
        if let Some(ring) = order_ccw(pts, Vec3::new(0.0, 0.0, 1.0)) {
            prop_assert_eq!(ring[0], 0);
            let p = ring.map(|i| pts[i].1);
            // Opposite edges of a simple quad do not cross.
            for (a, b) in [(0usize, 2usize), (1, 3)] {
                prop_assert!(!segments_cross(p[a], p[(a + 1) % 4], p[b], p[(b + 1) % 4]));
            }
        }
    }
}

fn segments_cross(a: Vec3<f64>, b: Vec3<f64>, c: Vec3<f64>, d: Vec3<f64>) -> bool {
    let orient = |p: Vec3<f64>, q: Vec3<f64>, r: Vec3<f64>| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let (d1, d2) = (orient(a, b, c), orient(a, b, d));
    let (d3, d4) = (orient(c, d, a), orient(c, d, b));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}
