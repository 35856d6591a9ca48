//! Repair of a classified face set: score-driven removal of overlapping
//! faces, then greedy filling of small holes.

mod fill;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::mesh::{face_edges, face_key, Quad, QuadMesh};
use crate::scalar::Real;

pub use fill::{fill_holes, fill_holes_report, hole_angles, FillReport, HoleFill, HolePattern};

/// Which faces the pruning loop may delete.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneRule {
    /// Score above 2 and either touching a non-manifold edge or having at
    /// least three boundary edges. Grid corners (two boundary edges) stay.
    #[default]
    Overlap,
    /// Any face with score above 2.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostprocessConfig {
    /// Tolerance around 90 degrees for the corner patterns.
    pub angle_tol_deg: f64,
    pub max_passes: usize,
    pub skip_prune: bool,
    pub skip_fill: bool,
    pub prune_rule: PruneRule,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            angle_tol_deg: 25.0,
            max_passes: 10,
            skip_prune: false,
            skip_fill: false,
            prune_rule: PruneRule::Overlap,
        }
    }
}

/// `(E_b + 1) * (10 E_n + 1)`.
pub fn face_score(e_b: usize, e_n: usize) -> usize {
    (e_b + 1) * (10 * e_n + 1)
}

/// Boundary (incidence 1) and non-manifold (incidence >= 3) edge counts of
/// one face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceScore {
    pub e_b: usize,
    pub e_n: usize,
    pub score: usize,
}

fn score_of(face: &Quad, incidence: &HashMap<(usize, usize), usize>) -> FaceScore {
    let mut e_b = 0;
    let mut e_n = 0;
    for e in face_edges(face) {
        match incidence.get(&e).copied().unwrap_or(0) {
            1 => e_b += 1,
            c if c >= 3 => e_n += 1,
            _ => {}
        }
    }
    FaceScore {
        e_b,
        e_n,
        score: face_score(e_b, e_n),
    }
}

fn incidence_of(faces: &[Quad]) -> HashMap<(usize, usize), usize> {
    let mut inc = HashMap::new();
    for f in faces {
        for e in face_edges(f) {
            *inc.entry(e).or_insert(0) += 1;
        }
    }
    inc
}

/// Scores of every face of a mesh.
pub fn face_scores<T: Real>(mesh: &QuadMesh<T>) -> Vec<FaceScore> {
    let inc = incidence_of(&mesh.faces);
    mesh.faces.iter().map(|f| score_of(f, &inc)).collect()
}

/// Removes faces one at a time, highest score first (ties: more
/// non-manifold edges, then lower index), refreshing scores after each
/// removal. Returns the pruned mesh and the removed face indices in order.
///
/// Repeats of an earlier face's vertex set go first, whatever their score:
/// two copies can otherwise survive as a closed two-face pocket.
pub fn prune_nonmanifold_report<T: Real>(mesh: &QuadMesh<T>, rule: PruneRule) -> (QuadMesh<T>, Vec<usize>) {
    let mut alive = vec![true; mesh.faces.len()];
    let mut removed = Vec::new();
    let mut seen = HashSet::new();
    for (i, f) in mesh.faces.iter().enumerate() {
        if !seen.insert(face_key(f)) {
            alive[i] = false;
            removed.push(i);
        }
    }
    let live: Vec<Quad> = mesh.faces.iter().zip(&alive).filter(|(_, &a)| a).map(|(f, _)| *f).collect();
    let mut inc = incidence_of(&live);
    loop {
        let mut best: Option<(usize, FaceScore)> = None;
        for (i, f) in mesh.faces.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            let s = score_of(f, &inc);
            let eligible = s.score > 2
                && match rule {
                    PruneRule::Overlap => s.e_n >= 1 || s.e_b >= 3,
                    PruneRule::Literal => true,
                };
            if !eligible {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, b)) => (s.score, s.e_n) > (b.score, b.e_n),
            };
            if better {
                best = Some((i, s));
            }
        }
        let Some((i, _)) = best else { break };
        alive[i] = false;
        removed.push(i);
        for e in face_edges(&mesh.faces[i]) {
            if let Some(c) = inc.get_mut(&e) {
                *c -= 1;
            }
        }
    }
    let faces = mesh.faces.iter().zip(&alive).filter(|(_, &a)| a).map(|(f, _)| *f).collect();
    (
        QuadMesh {
            vertices: mesh.vertices.clone(),
            faces,
        },
        removed,
    )
}

pub fn prune_nonmanifold<T: Real>(mesh: &QuadMesh<T>) -> QuadMesh<T> {
    prune_nonmanifold_report(mesh, PruneRule::Overlap).0
}

/// Prune then fill, honouring the skip flags.
pub fn repair<T: Real>(mesh: &QuadMesh<T>, cfg: &PostprocessConfig) -> QuadMesh<T> {
    let pruned = if cfg.skip_prune {
        mesh.clone()
    } else {
        let (m, removed) = prune_nonmanifold_report(mesh, cfg.prune_rule);
        log::info!("pruning removed {} faces", removed.len());
        m
    };
    if cfg.skip_fill {
        return pruned;
    }
    let (filled, report) = fill_holes_report(&pruned, cfg.angle_tol_deg, cfg.max_passes);
    log::info!("hole filling added {} faces in {} passes", report.fills.len(), report.passes);
    filled
}
