//! Candidate quadrilaterals: k-NN graph, CCW ordering, geometric filters and
//! per-point ranking.

mod io;
mod knn;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::scaled_jacobian;
use crate::geom::{canonical_sign, principal_axes, Vec3};
use crate::mesh::{corner_edges, corner_normal, PointCloud, Quad};
use crate::scalar::Real;

pub use io::{read_candidates, write_candidates};
pub use knn::{knn_graph, NeighborGraph};

/// A proposed quad: `ring[0]` is the proposing point, the ring is CCW about
/// the centre's local normal, and `quality` is its scaled Jacobian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateFace<T> {
    pub center: usize,
    pub ring: Quad,
    pub quality: T,
}

impl<T: Real> CandidateFace<T> {
    pub fn points(&self, cloud: &PointCloud<T>) -> Result<[Vec3<T>; 4]> {
        if let Some(&v) = self.ring.iter().find(|&&v| v >= cloud.len()) {
            return Err(Error::InvalidInput(format!(
                "candidate references point {v} but the cloud has {} points",
                cloud.len()
            )));
        }
        Ok(self.ring.map(|v| cloud.points[v]))
    }
}

/// Thresholds of the three geometric filters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterThresholds {
    /// Minimum shortest/longest edge ratio.
    pub min_edge_ratio: f64,
    /// Minimum corner sine.
    pub min_sine: f64,
    /// Minimum pairwise dot product of unit corner normals.
    pub min_normal_dot: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            min_edge_ratio: 0.25,
            min_sine: 0.3,
            min_normal_dot: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CandidateConfig {
    pub k: usize,
    pub max_per_point: usize,
    #[serde(flatten)]
    pub thresholds: FilterThresholds,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self {
            k: 12,
            max_per_point: 12,
            thresholds: FilterThresholds::default(),
        }
    }
}

/// Result of [`geometric_filter`]; failures report the first failing test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterOutcome {
    Pass,
    EdgeRatio(f64),
    Sine(f64),
    Coplanarity(f64),
    Degenerate,
}

impl FilterOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, FilterOutcome::Pass)
    }
}

/// Shortest over longest edge.
pub fn edge_ratio<T: Real>(face: &[Vec3<T>; 4]) -> T {
    let lens = [0, 1, 2, 3].map(|i| face[(i + 1) % 4].distance(face[i]));
    let min = lens.iter().copied().fold(T::infinity(), T::min);
    let max = lens.iter().copied().fold(T::zero(), T::max);
    min / max
}

/// Edge-ratio, corner-sine and coplanarity tests, in that order.
pub fn geometric_filter<T: Real>(face: &[Vec3<T>; 4], th: &FilterThresholds) -> FilterOutcome {
    let mut normals = [Vec3::zero(); 4];
    for (i, n) in normals.iter_mut().enumerate() {
        match corner_normal(face, i) {
            Ok(v) => *n = v,
            Err(_) => return FilterOutcome::Degenerate,
        }
    }
    let r = edge_ratio(face);
    if r < T::lit(th.min_edge_ratio) {
        return FilterOutcome::EdgeRatio(r.as_f64());
    }
    let mut min_sine = T::infinity();
    for i in 0..4 {
        let (l_in, l_out) = corner_edges(face, i);
        let s = l_in.cross(l_out).norm() / (l_in.norm() * l_out.norm());
        min_sine = min_sine.min(s);
    }
    if min_sine < T::lit(th.min_sine) {
        return FilterOutcome::Sine(min_sine.as_f64());
    }
    let mut min_dot = T::infinity();
    for i in 0..4 {
        for j in (i + 1)..4 {
            min_dot = min_dot.min(normals[i].dot(normals[j]));
        }
    }
    if min_dot < T::lit(th.min_normal_dot) {
        return FilterOutcome::Coplanarity(min_dot.as_f64());
    }
    FilterOutcome::Pass
}

/// Local surface normal at a point from PCA of itself and its neighbours,
/// with a canonical sign.
pub fn local_normal<T: Real>(cloud: &PointCloud<T>, graph: &NeighborGraph, i: usize) -> Option<Vec3<T>> {
    let mut pts = Vec::with_capacity(graph.k() + 1);
    pts.push(cloud.points[i]);
    pts.extend(graph.neighbors(i).iter().map(|&j| cloud.points[j]));
    let e = principal_axes(&pts)?;
    if e.values[0] <= T::zero() {
        return None;
    }
    Some(canonical_sign(e.vectors[2]))
}

/// Orders four points (the first is the centre) counter-clockwise about
/// `up`, starting from the centre.
///
/// Points are projected into their least-squares plane and sorted by angle
/// around their centroid. Returns `None` when the points are (nearly)
/// collinear.
pub fn order_ccw<T: Real>(pts: [(usize, Vec3<T>); 4], up: Vec3<T>) -> Option<Quad> {
    let coords = pts.map(|(_, p)| p);
    let e = principal_axes(&coords)?;
    let rel = T::degenerate_eps().sqrt();
    if e.values[0] <= T::zero() || e.values[1] <= rel * e.values[0] {
        return None;
    }
    let mut n = e.vectors[2];
    if n.dot(up) < T::zero() {
        n = -n;
    }
    let u = e.vectors[0];
    let v = n.cross(u);
    let c = Vec3::centroid(coords);
    let mut angles: [(T, usize); 4] = [0, 1, 2, 3].map(|i| {
        let d = coords[i] - c;
        (d.dot(v).atan2(d.dot(u)), i)
    });
    angles.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    let start = angles.iter().position(|&(_, i)| i == 0)?;
    Some([0, 1, 2, 3].map(|k| pts[angles[(start + k) % 4].1].0))
}

/// Ranking order: higher quality first, then lexicographically smaller ring.
pub fn rank_cmp<T: Real>(a: &CandidateFace<T>, b: &CandidateFace<T>) -> Ordering {
    b.quality
        .partial_cmp(&a.quality)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.ring.cmp(&b.ring))
}

/// Builds, filters and scores the candidate formed by `center` and three of
/// its neighbours. `None` if ordering fails or a filter rejects it.
pub fn make_candidate<T: Real>(
    cloud: &PointCloud<T>,
    center: usize,
    triple: [usize; 3],
    up: Vec3<T>,
    th: &FilterThresholds,
) -> Option<CandidateFace<T>> {
    let ids = [center, triple[0], triple[1], triple[2]];
    let ring = order_ccw(ids.map(|i| (i, cloud.points[i])), up)?;
    let face = ring.map(|i| cloud.points[i]);
    if !geometric_filter(&face, th).passed() {
        return None;
    }
    let quality = scaled_jacobian(&face).ok()?;
    Some(CandidateFace {
        center,
        ring,
        quality,
    })
}

/// Proposes up to `max_per_point` filtered candidates for every point.
///
/// Every neighbour triple is tried; survivors are kept in a bounded list
/// ordered by [`rank_cmp`]. Output is grouped by centre index, best first.
pub fn propose_candidates<T: Real>(
    cloud: &PointCloud<T>,
    graph: &NeighborGraph,
    cfg: &CandidateConfig,
) -> Vec<CandidateFace<T>> {
    let cap = cfg.max_per_point;
    let mut out = Vec::new();
    let mut best: Vec<CandidateFace<T>> = Vec::with_capacity(cap + 1);
    for center in 0..cloud.len() {
        best.clear();
        let Some(up) = local_normal(cloud, graph, center) else {
            continue;
        };
        let nb = graph.neighbors(center);
        for a in 0..nb.len() {
            for b in (a + 1)..nb.len() {
                for c in (b + 1)..nb.len() {
                    let Some(cand) = make_candidate(cloud, center, [nb[a], nb[b], nb[c]], up, &cfg.thresholds)
                    else {
                        continue;
                    };
                    if best.len() == cap && rank_cmp(&cand, &best[cap - 1]) != Ordering::Less {
                        continue;
                    }
                    let at = best.partition_point(|x| rank_cmp(x, &cand) == Ordering::Less);
                    best.insert(at, cand);
                    best.truncate(cap);
                }
            }
        }
        out.extend_from_slice(&best);
    }
    out
}
