#![allow(dead_code)]

use quadrecon::candidates::{local_normal, make_candidate, CandidateConfig, NeighborGraph};
use quadrecon::dataset::class_weight;
use quadrecon::learner::{compound_loss, loss_and_logit_grad, LossConfig, ModelParams, SampleInputs};
use quadrecon::dataset::{inject_noise, synth_quad_mesh, ShapeKind, ShapeSpec};
use quadrecon::geom::Vec3;
use quadrecon::{Candidate, Cloud, Mesh};

pub type Rot = [[f64; 3]; 3];

/// Rotation from Euler angles (z, y, x).
pub fn rotation(a: f64, b: f64, c: f64) -> Rot {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    let rz = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
    let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cc, -sc], [0.0, sc, cc]];
    mul(mul(rz, ry), rx)
}

fn mul(a: Rot, b: Rot) -> Rot {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

pub fn rotate(r: &Rot, p: Vec3<f64>) -> Vec3<f64> {
    Vec3::new(
        r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z,
        r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z,
        r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z,
    )
}

/// Every shape kind at sizes that stay at or under 200 points with noise.
pub fn small_fixtures() -> Vec<ShapeSpec> {
    let mut v = Vec::new();
    for (i, (kind, u, w)) in [
        (ShapeKind::PlaneGrid, 10, 10),
        (ShapeKind::PlaneGrid, 13, 7),
        (ShapeKind::WavyGrid, 12, 12),
        (ShapeKind::Cylinder, 12, 8),
        (ShapeKind::Torus, 14, 8),
        (ShapeKind::Torus, 10, 6),
        (ShapeKind::CubeShell, 5, 0),
        (ShapeKind::CubeShell, 3, 0),
    ]
    .into_iter()
    .enumerate()
    {
        v.push(ShapeSpec::new(kind, u, w).with_seed(i as u64).with_jitter(0.05));
        v.push(ShapeSpec::new(kind, u, w).with_seed(50 + i as u64).with_noise(0.0));
    }
    v
}

pub fn fixture_cloud(spec: &ShapeSpec) -> (Mesh, Cloud) {
    let m: Mesh = synth_quad_mesh(spec).unwrap();
    let c = inject_noise(&m, spec).unwrap();
    (m, c)
}

/// All-pairs k-NN: sort every other point by (distance, index).
pub fn brute_knn(cloud: &Cloud, k: usize) -> Vec<Vec<usize>> {
    (0..cloud.len())
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..cloud.len())
                .filter(|&j| j != i)
                .map(|j| ((cloud.points[j] - cloud.points[i]).norm_squared(), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Every neighbour triple of every point, filtered, fully sorted by
/// (quality desc, ring asc) and cut to the per-point cap.
pub fn brute_candidates(cloud: &Cloud, graph: &NeighborGraph, cfg: &CandidateConfig) -> Vec<Candidate> {
    let mut out = Vec::new();
    for center in 0..cloud.len() {
        let Some(up) = local_normal(cloud, graph, center) else {
            continue;
        };
        let nb = graph.neighbors(center);
        let mut all = Vec::new();
        for a in 0..nb.len() {
            for b in 0..nb.len() {
                for c in 0..nb.len() {
                    if a < b && b < c {
                        if let Some(f) = make_candidate(cloud, center, [nb[a], nb[b], nb[c]], up, &cfg.thresholds) {
                            all.push(f);
                        }
                    }
                }
            }
        }
        all.sort_by(|x, y| y.quality.total_cmp(&x.quality).then(x.ring.cmp(&y.ring)));
        all.truncate(cfg.max_per_point);
        out.extend(all);
    }
    out
}

fn total_loss(p: &ModelParams, x: &SampleInputs, y: &[u8], w: f64, loss: &LossConfig) -> f64 {
    let (pred, _) = p.forward(x, true).unwrap();
    loss_and_logit_grad(&pred, y, w, loss).unwrap().0.total
}

fn read_block(p: &mut ModelParams, b: usize, j: usize) -> f64 {
    p.blocks_mut()[b].data[j]
}

fn write_block(p: &mut ModelParams, b: usize, j: usize, v: f64) {
    p.blocks_mut()[b].data[j] = v;
}

/// Central differences against the analytic gradient on `entries(block)`,
/// stopping a block after `per_block` kink-free comparisons; returns the
/// worst relative error, how many entries were compared and which blocks.
pub fn grad_check(
    params: &ModelParams,
    x: &SampleInputs,
    y: &[u8],
    loss: &LossConfig,
    per_block: usize,
    entries: impl Fn(usize, usize) -> Vec<usize>,
) -> (f64, usize, Vec<String>) {
    let h = 1e-5;
    let w = class_weight(y, 1.1).unwrap();
    let (_, mut grad) = compound_loss(params, x, y, w, loss).unwrap();
    let base_pattern = params.activation_pattern(x, true).unwrap();
    let mut p = params.clone();
    let names: Vec<(String, bool, usize)> = p.blocks_mut().iter().map(|b| (b.name.clone(), b.trainable, b.data.len())).collect();
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut covered = Vec::new();
    for (b, (name, trainable, len)) in names.iter().enumerate() {
        if !trainable {
            continue;
        }
        let mut done = 0;
        for j in entries(b, *len) {
            if done == per_block {
                break;
            }
            let orig = read_block(&mut p, b, j);
            write_block(&mut p, b, j, orig + h);
            let kink_plus = p.activation_pattern(x, true).unwrap() != base_pattern;
            let lp = total_loss(&p, x, y, w, loss);
            write_block(&mut p, b, j, orig - h);
            let kink_minus = p.activation_pattern(x, true).unwrap() != base_pattern;
            let lm = total_loss(&p, x, y, w, loss);
            write_block(&mut p, b, j, orig);
            if kink_plus || kink_minus {
                continue;
            }
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grad.blocks_mut()[b].data[j];
            let scale = analytic.abs().max(numeric.abs()).max(1e-3);
            let rel = (analytic - numeric).abs() / scale;
            assert!(rel < 1e-4, "{name}[{j}]: analytic {analytic:e}, numeric {numeric:e}");
            worst = worst.max(rel);
            compared += 1;
            done += 1;
        }
        if done > 0 {
            covered.push(name.clone());
        }
    }
    (worst, compared, covered)
}
