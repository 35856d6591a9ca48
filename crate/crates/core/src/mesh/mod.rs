//! Quad mesh representation, edge-incidence bookkeeping and corner normals.

mod io;

use std::collections::{BTreeMap, HashSet};

use log::warn;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

pub use io::{read_obj, read_ply_cloud, write_obj, write_ply_cloud};

/// Input point set, optionally carrying a per-point synthetic-noise flag.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud<T> {
    pub points: Vec<Vec3<T>>,
    pub noise: Option<Vec<bool>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Vec3<T>>) -> Result<Self> {
        Self::with_noise(points, None)
    }

    pub fn with_noise(points: Vec<Vec3<T>>, noise: Option<Vec<bool>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("point {i} has a non-finite coordinate")));
        }
        if let Some(flags) = &noise {
            if flags.len() != points.len() {
                return Err(Error::Shape(format!(
                    "{} noise flags for {} points",
                    flags.len(),
                    points.len()
                )));
            }
        }
        Ok(Self { points, noise })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_noise(&self, i: usize) -> bool {
        self.noise.as_ref().is_some_and(|f| f[i])
    }

    pub fn centroid(&self) -> Vec3<T> {
        Vec3::centroid(self.points.iter().copied())
    }

    /// The points not flagged as noise.
    pub fn clean_points(&self) -> Vec<Vec3<T>> {
        self.points
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.is_noise(*i))
            .map(|(_, p)| *p)
            .collect()
    }

    /// Applies `f` to every point, keeping flags.
    pub fn map_points(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        Self {
            points: self.points.iter().map(|p| f(*p)).collect(),
            noise: self.noise.clone(),
        }
    }

    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        PointCloud {
            points: self.points.iter().map(|p| p.cast()).collect(),
            noise: self.noise.clone(),
        }
    }
}

/// A quad face: four vertex indices in cyclic order.
pub type Quad = [usize; 4];

/// Vertex array plus quad face list.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub faces: Vec<Quad>,
}

/// Sorted vertex set of a face; equal keys mean the same unordered quad.
pub fn face_key(f: &Quad) -> Quad {
    let mut k = *f;
    k.sort_unstable();
    k
}

/// Undirected edge key with the smaller index first.
#[inline]
pub fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// The four undirected edges of a face, `(v_i, v_{i+1})`.
pub fn face_edges(f: &Quad) -> [(usize, usize); 4] {
    [0, 1, 2, 3].map(|i| edge_key(f[i], f[(i + 1) % 4]))
}

impl<T: Real> QuadMesh<T> {
    /// Builds a mesh, checking every face invariant.
    pub fn new(vertices: Vec<Vec3<T>>, faces: Vec<Quad>) -> Result<Self> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
        }
    }

    /// Checks index range, distinct corners, and absence of duplicate quads.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        let mut seen = HashSet::with_capacity(self.faces.len());
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(&v) = f.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {v} but the mesh has {n} vertices"
                )));
            }
            check_distinct(fi, f)?;
            if !seen.insert(face_key(f)) {
                return Err(Error::InvalidMesh(format!("face {fi} duplicates an earlier face")));
            }
        }
        if let Some(i) = self.vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
        }
        Ok(())
    }

    pub fn face_points(&self, f: usize) -> [Vec3<T>; 4] {
        self.faces[f].map(|v| self.vertices[v])
    }

    /// Face-set equality ignoring face order and cyclic start/direction.
    pub fn same_face_set(&self, other: &Self) -> bool {
        let a: HashSet<Quad> = self.faces.iter().map(face_key).collect();
        let b: HashSet<Quad> = other.faces.iter().map(face_key).collect();
        a.len() == self.faces.len() && b.len() == other.faces.len() && a == b
    }

    pub fn cast<U: Real>(&self) -> QuadMesh<U> {
        QuadMesh {
            vertices: self.vertices.iter().map(|p| p.cast()).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Mean length over all distinct edges; zero for an empty mesh.
    pub fn mean_edge_length(&self) -> T {
        let mut edges: Vec<(usize, usize)> = self.faces.iter().flat_map(face_edges).collect();
        edges.sort_unstable();
        edges.dedup();
        if edges.is_empty() {
            return T::zero();
        }
        let total: T = edges
            .iter()
            .map(|&(a, b)| self.vertices[a].distance(self.vertices[b]))
            .sum();
        total / T::lit(edges.len() as f64)
    }
}

fn check_distinct(fi: usize, f: &Quad) -> Result<()> {
    for i in 0..4 {
        for j in (i + 1)..4 {
            if f[i] == f[j] {
                return Err(Error::DegenerateFace {
                    face: fi,
                    reason: format!("vertex {} repeated", f[i]),
                });
            }
        }
    }
    Ok(())
}

/// Quad area as the mean of its two diagonal triangulations.
///
/// Exact for planar quads; a symmetric estimate for warped ones.
pub fn quad_area<T: Real>(q: &[Vec3<T>; 4]) -> T {
    let tri = |a: Vec3<T>, b: Vec3<T>, c: Vec3<T>| (b - a).cross(c - a).norm();
    let d02 = tri(q[0], q[1], q[2]) + tri(q[0], q[2], q[3]);
    let d13 = tri(q[1], q[2], q[3]) + tri(q[1], q[3], q[0]);
    (d02 + d13) / T::lit(4.0)
}

/// Bilinear surface point at parameters `(s, t)` in `[0, 1]^2`.
pub fn bilinear<T: Real>(q: &[Vec3<T>; 4], s: T, t: T) -> Vec3<T> {
    let one = T::one();
    q[0] * ((one - s) * (one - t)) + q[1] * (s * (one - t)) + q[2] * (s * t) + q[3] * ((one - s) * t)
}

/// Per-edge face counts and the summary totals used by the topology scores.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeStats {
    pub incidence: BTreeMap<(usize, usize), usize>,
    /// Edges used by exactly one face.
    pub e1: usize,
    /// Edges used by exactly two faces.
    pub e2: usize,
    /// Distinct edges.
    pub e_all: usize,
}

impl EdgeStats {
    /// Edges used by three or more faces.
    pub fn non_manifold(&self) -> usize {
        self.e_all - self.e1 - self.e2
    }

    pub fn count(&self, a: usize, b: usize) -> usize {
        self.incidence.get(&edge_key(a, b)).copied().unwrap_or(0)
    }
}

/// Counts face incidence of every undirected edge.
pub fn edge_stats<T: Real>(mesh: &QuadMesh<T>) -> Result<EdgeStats> {
    edge_stats_of_faces(&mesh.faces)
}

/// [`edge_stats`] over a bare face list.
pub fn edge_stats_of_faces(faces: &[Quad]) -> Result<EdgeStats> {
    let mut incidence = BTreeMap::new();
    for (fi, f) in faces.iter().enumerate() {
        check_distinct(fi, f)?;
        for e in face_edges(f) {
            *incidence.entry(e).or_insert(0usize) += 1;
        }
    }
    let e1 = incidence.values().filter(|&&c| c == 1).count();
    let e2 = incidence.values().filter(|&&c| c == 2).count();
    Ok(EdgeStats {
        e_all: incidence.len(),
        incidence,
        e1,
        e2,
    })
}

/// Manifoldness `(#E1 + #E2) / #E_all` and watertightness `#E2 / #E_all`.
///
/// A mesh without edges scores `(1, 1)` and logs a warning.
pub fn manifold_watertight_scores(stats: &EdgeStats) -> (f64, f64) {
    if stats.e_all == 0 {
        warn!("topology scores requested for a mesh without edges; reporting (1, 1)");
        return (1.0, 1.0);
    }
    let all = stats.e_all as f64;
    ((stats.e1 + stats.e2) as f64 / all, stats.e2 as f64 / all)
}

/// Edge entering corner `i` (from the previous vertex) and edge leaving it.
#[inline]
pub fn corner_edges<T: Real>(face: &[Vec3<T>; 4], i: usize) -> (Vec3<T>, Vec3<T>) {
    let prev = face[(i + 3) % 4];
    let next = face[(i + 1) % 4];
    (face[i] - prev, next - face[i])
}

/// Unit normal at a corner: incoming edge × outgoing edge.
pub fn corner_normal<T: Real>(face: &[Vec3<T>; 4], corner: usize) -> Result<Vec3<T>> {
    assert!(corner < 4, "corner index {corner} out of range");
    let (l_in, l_out) = corner_edges(face, corner);
    if l_in.norm() <= T::degenerate_eps() || l_out.norm() <= T::degenerate_eps() {
        return Err(Error::Degenerate(format!("zero-length edge at corner {corner}")));
    }
    let c = l_in.cross(l_out);
    let scale = l_in.norm() * l_out.norm();
    if c.norm() <= T::degenerate_eps() * scale {
        return Err(Error::Degenerate(format!("collinear edges at corner {corner}")));
    }
    Ok(c / c.norm())
}
