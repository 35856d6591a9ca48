//! Synthetic training data: reference meshes, noisy clouds, labelled
//! candidates, and the on-disk sample bundle.

mod bundle;
mod noise;
mod synth;

use std::collections::HashSet;

use crate::candidates::{knn_graph, propose_candidates, CandidateConfig, CandidateFace};
use crate::error::{Error, Result};
use crate::mesh::{face_key, PointCloud, Quad, QuadMesh};
use crate::scalar::Real;

pub use bundle::{read_bundle, read_labels, write_bundle, write_labels, BundleManifest};
pub use noise::{inject_noise, inject_noise_detailed, noise_count, NoiseSample};
pub use synth::{synth_quad_mesh, ShapeKind, ShapeSpec};

/// Default factor applied to the negative/positive ratio.
pub const DEFAULT_WEIGHT_MULTIPLIER: f64 = 1.1;

/// A cloud, its candidates, their 0/1 labels, and the reference mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample<T> {
    pub cloud: PointCloud<T>,
    pub candidates: Vec<CandidateFace<T>>,
    pub labels: Vec<u8>,
    pub reference: QuadMesh<T>,
}

impl<T: Real> LabeledSample<T> {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

/// 1 when the candidate's vertex set equals some reference face's, else 0.
///
/// Indices at or beyond the reference vertex count are noise points and
/// never match.
pub fn label_candidates<T: Real>(candidates: &[CandidateFace<T>], reference: &QuadMesh<T>) -> Vec<u8> {
    let truth: HashSet<Quad> = reference.faces.iter().map(face_key).collect();
    let n_ref = reference.vertices.len();
    candidates
        .iter()
        .map(|c| {
            if c.ring.iter().any(|&v| v >= n_ref) {
                0
            } else {
                u8::from(truth.contains(&face_key(&c.ring)))
            }
        })
        .collect()
}

/// Positive-class weight: `multiplier * #negatives / #positives`.
pub fn class_weight(labels: &[u8], multiplier: f64) -> Result<f64> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 {
        return Err(Error::InvalidInput("no positive labels; sample unusable for training".into()));
    }
    let neg = labels.len() - pos;
    Ok(multiplier * neg as f64 / pos as f64)
}

/// Synthesises, perturbs, proposes and labels one shape.
pub fn build_sample<T: Real>(spec: &ShapeSpec, cfg: &CandidateConfig) -> Result<LabeledSample<T>> {
    let reference = synth_quad_mesh::<T>(spec)?;
    let cloud = inject_noise(&reference, spec)?;
    let graph = knn_graph(&cloud, cfg.k)?;
    let candidates = propose_candidates(&cloud, &graph, cfg);
    let labels = label_candidates(&candidates, &reference);
    Ok(LabeledSample {
        cloud,
        candidates,
        labels,
        reference,
    })
}
