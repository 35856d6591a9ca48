use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use quadrecon::dataset::{synth_quad_mesh, ShapeKind, ShapeSpec};
use quadrecon::geom::Vec3;
use quadrecon::mesh::{edge_stats_of_faces, face_key, manifold_watertight_scores, Quad};
use quadrecon::postprocess::*;
use quadrecon::Mesh;

fn grid(n: usize) -> Mesh {
    synth_quad_mesh(&ShapeSpec::new(ShapeKind::PlaneGrid, n, n)).unwrap()
}

fn watertight(faces: &[Quad]) -> f64 {
    manifold_watertight_scores(&edge_stats_of_faces(faces).unwrap()).1
}

fn keys(faces: &[Quad]) -> HashSet<Quad> {
    faces.iter().map(face_key).collect()
}

/// Every edge used by two faces is traversed once in each direction.
fn consistently_oriented(faces: &[Quad]) -> bool {
    let mut dir: HashMap<(usize, usize), usize> = HashMap::new();
    for f in faces {
        for i in 0..4 {
            *dir.entry((f[i], f[(i + 1) % 4])).or_default() += 1;
        }
    }
    dir.values().all(|&c| c == 1)
}

#[test]
fn score_table() {
    assert_eq!(face_score(0, 0), 1);
    assert_eq!(face_score(1, 0), 2);
    assert_eq!(face_score(0, 1), 11);
    assert_eq!(face_score(2, 1), 33);
    assert_eq!(face_score(4, 4), 205);
}

/// A face standing up from the shared edge of two flat faces.
fn stacked_fixture() -> Mesh {
    let mut m = grid(3);
    let up = |p: Vec3<f64>| p + Vec3::new(0.0, 0.0, 1.0);
    let (a, b) = (1, 4);
    let (pa, pb) = (up(m.vertices[a]), up(m.vertices[b]));
    m.vertices.push(pb);
    m.vertices.push(pa);
    m.faces.push([a, b, 9, 10]);
    m
}

#[test]
fn stacked_face_removed_first_and_alone() {
    let m = stacked_fixture();
    let scores = face_scores(&m);
    assert_eq!(scores[4].score, 44);
    assert_eq!(scores[0].score, 33);
    let (out, removed) = prune_nonmanifold_report(&m, PruneRule::Overlap);
    assert_eq!(removed, vec![4]);
    assert_eq!(keys(&out.faces), keys(&grid(3).faces));
    assert!(face_scores(&out).iter().all(|s| s.e_n == 0));
}

#[test]
fn literal_rule_erodes_open_grid() {
    // Grid corners score 3, so the literal rule keeps deleting.
    let (out, _) = prune_nonmanifold_report(&stacked_fixture(), PruneRule::Literal);
    assert!(out.faces.is_empty());
}

#[test]
fn duplicate_over_hole_removed_once() {
    let g = grid(5);
    let hole = 5;
    let mut faces = g.faces.clone();
    let f = faces.remove(hole);
    faces.push(f);
    faces.push([f[2], f[1], f[0], f[3]]);
    let m = Mesh {
        vertices: g.vertices.clone(),
        faces,
    };
    let (out, removed) = prune_nonmanifold_report(&m, PruneRule::Overlap);
    assert_eq!(removed.len(), 1);
    assert_eq!(keys(&out.faces), keys(&g.faces));
    let s = edge_stats_of_faces(&out.faces).unwrap();
    assert_eq!(s.non_manifold(), 0);
}

#[test]
fn clean_meshes_untouched() {
    for spec in [
        ShapeSpec::new(ShapeKind::CubeShell, 3, 0),
        ShapeSpec::new(ShapeKind::Torus, 10, 6),
        ShapeSpec::new(ShapeKind::Cylinder, 10, 4),
        ShapeSpec::new(ShapeKind::PlaneGrid, 6, 4),
    ] {
        let m: Mesh = synth_quad_mesh(&spec).unwrap();
        assert_eq!(prune_nonmanifold(&m), m);
        assert_eq!(fill_holes(&m, 25.0, 10), m);
    }
}

#[test]
fn single_quad_hole_restored() {
    let g = grid(5);
    let mut m = g.clone();
    m.faces.remove(5);
    let before = watertight(&m.faces);
    let (out, report) = fill_holes_report(&m, 25.0, 10);
    assert_eq!(report.fills.len(), 1);
    assert_eq!(report.fills[0].pattern, HolePattern::Quad);
    assert_eq!(keys(&out.faces), keys(&g.faces));
    assert!(watertight(&out.faces) > before);
    assert!((watertight(&out.faces) - watertight(&g.faces)).abs() < 1e-15);
    assert!(consistently_oriented(&out.faces));
}

#[test]
fn cube_missing_face_closes() {
    let c: Mesh = synth_quad_mesh(&ShapeSpec::new(ShapeKind::CubeShell, 2, 0)).unwrap();
    let mut m = c.clone();
    m.faces.remove(7);
    let out = fill_holes(&m, 25.0, 10);
    assert_eq!(watertight(&out.faces), 1.0);
    assert!(consistently_oriented(&out.faces));
}

#[test]
fn domino_and_l_holes_filled_in_two_passes() {
    let g = grid(7);
    // Faces are row-major with 6 per row.
    for hole in [vec![8, 9], vec![8, 14], vec![8, 9, 15], vec![14, 15, 16, 22]] {
        let mut m = g.clone();
        m.faces = g.faces.iter().enumerate().filter(|(i, _)| !hole.contains(i)).map(|(_, f)| *f).collect();
        let (out, report) = fill_holes_report(&m, 25.0, 10);
        assert!(report.passes <= 2, "{hole:?}: {} passes", report.passes);
        assert_eq!(keys(&out.faces), keys(&g.faces), "{hole:?}");
        assert_eq!(out.vertices.len(), g.vertices.len());
        assert!(consistently_oriented(&out.faces));
        assert!(report.fills.iter().any(|f| f.pattern == HolePattern::ThreeEdges));
    }
}

#[test]
fn missing_corner_uses_new_vertex() {
    let g = grid(4);
    let mut m = g.clone();
    m.faces.remove(0);
    let (out, report) = fill_holes_report(&m, 25.0, 10);
    assert_eq!(report.fills.len(), 1);
    let fill = &report.fills[0];
    assert_eq!(fill.pattern, HolePattern::Corner);
    let nv = fill.new_vertex.unwrap();
    assert_eq!(nv, g.vertices.len());
    assert!((out.vertices[nv] - g.vertices[0]).norm() < 1e-12);
    assert!(watertight(&out.faces) > watertight(&m.faces));
    assert!(consistently_oriented(&out.faces));
}

#[test]
fn cylinder_rim_left_open() {
    let c: Mesh = synth_quad_mesh(&ShapeSpec::new(ShapeKind::Cylinder, 12, 5)).unwrap();
    let angles = hole_angles(&c);
    for v in (0..12).chain(48..60) {
        assert!((angles[v] - 180.0).abs() < 1e-9, "vertex {v}: {}", angles[v]);
    }
    let (out, report) = fill_holes_report(&c, 25.0, 10);
    assert!(report.fills.is_empty());
    assert_eq!(out, c);
}

/// Grid with random faces dropped, duplicated (reoriented) or stacked.
fn corrupt(n: usize, ops: &[(u8, usize)]) -> Mesh {
    let g = grid(n);
    let mut faces = g.faces.clone();
    let mut vertices = g.vertices.clone();
    for &(op, i) in ops {
        let f = g.faces[i % g.faces.len()];
        match op % 3 {
            0 => faces.retain(|x| face_key(x) != face_key(&f)),
            1 => faces.push([f[1], f[2], f[3], f[0]]),
            _ => {
                let base = vertices.len();
                let lift = Vec3::new(0.1, -0.2, 0.7);
                vertices.push(vertices[f[2]] + lift);
                vertices.push(vertices[f[3]] + lift);
                faces.push([f[2], f[3], base + 1, base]);
            }
        }
    }
    Mesh { vertices, faces }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prune_then_fill_invariants(ops in prop::collection::vec((0u8..3, 0usize..64), 1..8)) {
        let m = corrupt(6, &ops);
        let (pruned, removed) = prune_nonmanifold_report(&m, PruneRule::Overlap);
        prop_assert_eq!(edge_stats_of_faces(&pruned.faces).unwrap().non_manifold(), 0);
        prop_assert_eq!(pruned.faces.len() + removed.len(), m.faces.len());
        // Repeated vertex sets go first; replay the rest, each of which
        // scored above 2 when it went.
        let mut seen = HashSet::new();
        let dups: Vec<usize> = (0..m.faces.len()).filter(|&i| !seen.insert(face_key(&m.faces[i]))).collect();
        prop_assert_eq!(&removed[..dups.len()], &dups[..]);
        let mut alive: Vec<Quad> = m.faces.clone();
        let mut idx: Vec<usize> = (0..m.faces.len()).collect();
        for &d in dups.iter().rev() {
            alive.remove(d);
            idx.remove(d);
        }
        for r in &removed[dups.len()..] {
            let pos = idx.iter().position(|i| i == r).unwrap();
            let cur = Mesh { vertices: m.vertices.clone(), faces: alive.clone() };
            prop_assert!(face_scores(&cur)[pos].score > 2);
            alive.remove(pos);
            idx.remove(pos);
        }
        let before = watertight(&pruned.faces);
        let filled = fill_holes(&pruned, 25.0, 10);
        prop_assert!(watertight(&filled.faces) >= before);
        prop_assert_eq!(edge_stats_of_faces(&filled.faces).unwrap().non_manifold(), 0);
        prop_assert_eq!(keys(&filled.faces).len(), filled.faces.len());
    }
}

