use std::collections::{BTreeMap, HashMap, HashSet};

use crate::geom::Vec3;
use crate::mesh::{edge_key, face_edges, face_key, Quad, QuadMesh};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HolePattern {
    /// Four boundary edges closing one quad.
    Quad,
    /// Three boundary edges with two right-angle turns.
    ThreeEdges,
    /// Two boundary edges with one right-angle turn; adds a vertex.
    Corner,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoleFill {
    pub pattern: HolePattern,
    pub face: Quad,
    pub new_vertex: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FillReport {
    pub passes: usize,
    pub fills: Vec<HoleFill>,
}

struct State<T> {
    vertices: Vec<Vec3<T>>,
    faces: Vec<Quad>,
    keys: HashSet<Quad>,
    /// Faces on each undirected edge.
    edge_faces: HashMap<(usize, usize), Vec<usize>>,
    vertex_faces: HashMap<usize, Vec<usize>>,
}

fn corner_angle_deg<T: Real>(p: Vec3<T>, prev: Vec3<T>, next: Vec3<T>) -> f64 {
    let u = prev - p;
    let v = next - p;
    let d = u.norm().as_f64() * v.norm().as_f64();
    if d <= 0.0 {
        return 0.0;
    }
    (u.dot(v).as_f64() / d).clamp(-1.0, 1.0).acos().to_degrees()
}

impl<T: Real> State<T> {
    fn new(mesh: &QuadMesh<T>) -> Self {
        let mut s = Self {
            vertices: mesh.vertices.clone(),
            faces: Vec::with_capacity(mesh.faces.len()),
            keys: HashSet::new(),
            edge_faces: HashMap::new(),
            vertex_faces: HashMap::new(),
        };
        for f in &mesh.faces {
            s.add_face(*f);
        }
        s
    }

    fn add_face(&mut self, f: Quad) {
        let idx = self.faces.len();
        self.faces.push(f);
        self.keys.insert(face_key(&f));
        for e in face_edges(&f) {
            self.edge_faces.entry(e).or_default().push(idx);
        }
        for v in f {
            self.vertex_faces.entry(v).or_default().push(idx);
        }
    }

    fn incidence(&self, a: usize, b: usize) -> usize {
        self.edge_faces.get(&edge_key(a, b)).map_or(0, Vec::len)
    }

    /// 360 degrees minus the interior angles of the faces around `v`.
    fn hole_angle(&self, v: usize) -> f64 {
        let mut sum = 0.0;
        for &fi in self.vertex_faces.get(&v).map_or(&[][..], Vec::as_slice) {
            let f = self.faces[fi];
            let i = f.iter().position(|&x| x == v).expect("vertex in face");
            sum += corner_angle_deg(self.vertices[v], self.vertices[f[(i + 3) % 4]], self.vertices[f[(i + 1) % 4]]);
        }
        360.0 - sum
    }

    /// Whether some face traverses `a -> b`.
    fn has_directed(&self, a: usize, b: usize) -> bool {
        self.edge_faces.get(&edge_key(a, b)).is_some_and(|fs| {
            fs.iter().any(|&fi| {
                let f = self.faces[fi];
                (0..4).any(|i| f[i] == a && f[(i + 1) % 4] == b)
            })
        })
    }

    /// Orients `ring` against the face already using its first edge and
    /// checks that no edge would exceed two faces.
    fn prepare(&self, ring: Quad) -> Option<Quad> {
        let k = face_key(&ring);
        if k.windows(2).any(|w| w[0] == w[1]) || self.keys.contains(&k) {
            return None;
        }
        if face_edges(&ring).iter().any(|&(a, b)| self.incidence(a, b) >= 2) {
            return None;
        }
        if self.has_directed(ring[0], ring[1]) {
            Some([ring[3], ring[2], ring[1], ring[0]])
        } else {
            Some(ring)
        }
    }

    /// Boundary loops as vertex cycles, traced deterministically.
    fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut edges: Vec<(usize, usize)> = self
            .edge_faces
            .iter()
            .filter(|(_, fs)| fs.len() == 1)
            .map(|(&e, _)| e)
            .collect();
        edges.sort_unstable();
        for &(a, b) in &edges {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        for v in adj.values_mut() {
            v.sort_unstable();
        }
        let mut used: HashSet<(usize, usize)> = HashSet::new();
        let mut loops = Vec::new();
        for &(a, b) in &edges {
            if used.contains(&(a, b)) {
                continue;
            }
            used.insert((a, b));
            let mut seq = vec![a];
            let mut cur = b;
            let mut closed = false;
            while seq.len() <= edges.len() {
                if cur == a {
                    closed = true;
                    break;
                }
                seq.push(cur);
                let next = adj[&cur].iter().copied().find(|&n| !used.contains(&edge_key(cur, n)));
                let Some(n) = next else { break };
                used.insert(edge_key(cur, n));
                cur = n;
            }
            if closed {
                loops.push(seq);
            }
        }
        loops
    }

    fn near_right(&self, v: usize, tol: f64) -> bool {
        (self.hole_angle(v) - 90.0).abs() <= tol
    }

    /// Applies the first pattern that fits `seq`, updating it in place.
    fn fill_once(&mut self, seq: &mut Vec<usize>, tol: f64) -> Option<HoleFill> {
        let l = seq.len();
        if l == 4 {
            let ring = self.prepare([seq[0], seq[1], seq[2], seq[3]])?;
            self.add_face(ring);
            seq.clear();
            return Some(HoleFill {
                pattern: HolePattern::Quad,
                face: ring,
                new_vertex: None,
            });
        }
        if l < 5 {
            return None;
        }
        for i in 0..l {
            let (a, b, c, d) = (seq[i], seq[(i + 1) % l], seq[(i + 2) % l], seq[(i + 3) % l]);
            if !(self.near_right(b, tol) && self.near_right(c, tol)) {
                continue;
            }
            let Some(ring) = self.prepare([a, b, c, d]) else { continue };
            let closes = self.incidence(d, a) == 1;
            self.add_face(ring);
            // b and c leave the loop; an existing d-a edge splits it instead.
            if closes {
                seq.clear();
            } else {
                let (j, k) = ((i + 1) % l, (i + 2) % l);
                let mut rest: Vec<usize> = (0..l).filter(|&x| x != j && x != k).map(|x| seq[x]).collect();
                std::mem::swap(seq, &mut rest);
            }
            return Some(HoleFill {
                pattern: HolePattern::ThreeEdges,
                face: ring,
                new_vertex: None,
            });
        }
        for i in 0..l {
            let (a, b, c) = (seq[i], seq[(i + 1) % l], seq[(i + 2) % l]);
            if !self.near_right(b, tol) {
                continue;
            }
            let nv = self.vertices.len();
            let Some(ring) = self.prepare([a, b, c, nv]) else { continue };
            let p = self.vertices[a] + self.vertices[c] - self.vertices[b];
            self.vertices.push(p);
            self.add_face(ring);
            seq[(i + 1) % l] = nv;
            return Some(HoleFill {
                pattern: HolePattern::Corner,
                face: ring,
                new_vertex: Some(nv),
            });
        }
        None
    }
}

/// Per-vertex angle left open by the incident faces (360 for unused
/// vertices).
pub fn hole_angles<T: Real>(mesh: &QuadMesh<T>) -> Vec<f64> {
    let s = State::new(mesh);
    (0..mesh.vertices.len()).map(|v| s.hole_angle(v)).collect()
}

/// Greedy hole filling. Each pass traces every boundary loop and fills it
/// as far as the patterns allow; stops when a pass adds nothing or after
/// `max_passes`.
pub fn fill_holes_report<T: Real>(mesh: &QuadMesh<T>, angle_tol_deg: f64, max_passes: usize) -> (QuadMesh<T>, FillReport) {
    let mut s = State::new(mesh);
    let mut report = FillReport::default();
    for _ in 0..max_passes {
        report.passes += 1;
        let before = report.fills.len();
        for mut seq in s.boundary_loops() {
            let budget = seq.len();
            for _ in 0..budget {
                if seq.is_empty() {
                    break;
                }
                match s.fill_once(&mut seq, angle_tol_deg) {
                    Some(f) => report.fills.push(f),
                    None => break,
                }
            }
        }
        if report.fills.len() == before {
            break;
        }
    }
    let out = QuadMesh {
        vertices: s.vertices,
        faces: s.faces,
    };
    (out, report)
}

pub fn fill_holes<T: Real>(mesh: &QuadMesh<T>, angle_tol_deg: f64, max_passes: usize) -> QuadMesh<T> {
    fill_holes_report(mesh, angle_tol_deg, max_passes).0
}
