//! Candidate classifier: encoders, loss, training, checkpoints and mesh
//! assembly from predictions.

mod checkpoint;
mod inputs;
pub mod layers;
mod loss;
mod model;
mod train;

use std::collections::HashSet;

use crate::candidates::{knn_graph, CandidateFace};
use crate::error::{Error, Result};
use crate::mesh::{face_key, PointCloud, QuadMesh};
use crate::scalar::Real;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use inputs::{point_inputs, prepare_inputs, DropFinfo, PointInputs, SampleInputs, POINT_BASE_WIDTH};
pub use loss::{compound_loss, loss_and_logit_grad, LossBreakdown, LossConfig, PROB_EPS};
pub use model::{gather_face_geometry, BlockMut, ForwardCache, ModelConfig, ModelParams, Prediction};
pub use train::{prepare_item, train, train_items, EpochLog, Reduction, TrainConfig, TrainItem, TrainReport};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Keeps candidates with `p1 >= threshold`, most probable first, one face
/// per vertex set. All cloud points stay as vertices.
pub fn assemble_mesh<T: Real>(cloud: &PointCloud<T>, candidates: &[CandidateFace<T>], p1: &[f64], threshold: f64) -> Result<QuadMesh<T>> {
    if p1.len() != candidates.len() {
        return Err(Error::Shape(format!("{} probabilities for {} candidates", p1.len(), candidates.len())));
    }
    let mut keep: Vec<usize> = (0..candidates.len()).filter(|&i| p1[i] >= threshold).collect();
    keep.sort_by(|&a, &b| p1[b].total_cmp(&p1[a]).then(a.cmp(&b)));
    let mut seen = HashSet::new();
    let faces: Vec<_> = keep
        .into_iter()
        .filter(|&i| seen.insert(face_key(&candidates[i].ring)))
        .map(|i| candidates[i].ring)
        .collect();
    if faces.is_empty() {
        log::warn!("no candidate reached probability {threshold}; mesh is empty");
    }
    QuadMesh::new(cloud.points.clone(), faces)
}

/// Runs the classifier in inference mode and assembles the mesh.
pub fn infer_mesh<T: Real>(
    cloud: &PointCloud<T>,
    candidates: &[CandidateFace<T>],
    params: &ModelParams,
    threshold: f64,
) -> Result<(QuadMesh<T>, Prediction)> {
    if candidates.is_empty() {
        log::warn!("no candidates; mesh is empty");
        return Ok((QuadMesh::new(cloud.points.clone(), Vec::new())?, Prediction { probs: Vec::new() }));
    }
    let graph = knn_graph(cloud, params.config.k)?;
    let inputs = prepare_inputs(cloud, &graph, candidates, &params.config.drop_finfo)?;
    let pred = params.predict(&inputs)?;
    let mesh = assemble_mesh(cloud, candidates, &pred.p1(), threshold)?;
    Ok((mesh, pred))
}
