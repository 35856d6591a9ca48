//! One configuration for every stage, and the end-to-end run.
//!
//! The configuration file is TOML with one table per stage; every key is
//! optional and falls back to the defaults below.
//!
//! ```toml
//! threshold = 0.5
//!
//! [candidates]
//! k = 12
//! max_per_point = 12
//! min_edge_ratio = 0.25
//! min_sine = 0.3
//! min_normal_dot = 0.5
//!
//! [model]          # learner::ModelConfig
//! [train]          # learner::TrainConfig
//! [postprocess]    # angle_tol_deg, max_passes, skip_prune, skip_fill, prune_rule
//! [metrics]        # chamfer_samples, seed
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::candidates::{knn_graph, propose_candidates, CandidateConfig, CandidateFace};
use crate::dataset::label_candidates;
use crate::error::{Error, Result};
use crate::learner::{infer_mesh, ModelConfig, ModelParams, Prediction, TrainConfig, DEFAULT_THRESHOLD};
use crate::mesh::{PointCloud, QuadMesh};
use crate::metrics::{evaluate, MetricsConfig, MetricsReport};
use crate::postprocess::{repair, PostprocessConfig};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Minimum class-1 probability for a candidate to enter the mesh.
    pub threshold: f64,
    pub candidates: CandidateConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub postprocess: PostprocessConfig,
    pub metrics: MetricsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            candidates: CandidateConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            postprocess: PostprocessConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

/// Everything one pipeline run produces.
#[derive(Clone, Debug)]
pub struct PipelineOutput<T> {
    pub candidates: Vec<CandidateFace<T>>,
    pub prediction: Prediction,
    /// Classified faces before repair.
    pub raw: QuadMesh<T>,
    pub mesh: QuadMesh<T>,
    pub report: MetricsReport,
}

/// A failed stage, named for diagnostics.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

fn stage<V>(name: &'static str, r: Result<V>) -> std::result::Result<V, StageError> {
    r.map_err(|source| StageError { stage: name, source })
}

/// knn, candidates, classification, assembly, repair and evaluation.
///
/// With a `reference` mesh the candidates are labelled against it and the
/// report gains precision and recall. The metrics target is the cloud's
/// clean points.
pub fn run_pipeline<T: Real>(
    cloud: &PointCloud<T>,
    params: &ModelParams,
    cfg: &PipelineConfig,
    reference: Option<&QuadMesh<T>>,
) -> std::result::Result<PipelineOutput<T>, StageError> {
    let graph = stage("knn", knn_graph(cloud, cfg.candidates.k))?;
    let candidates = propose_candidates(cloud, &graph, &cfg.candidates);
    log::info!("{} candidates from {} points", candidates.len(), cloud.len());
    let (raw, prediction) = stage("classify", infer_mesh(cloud, &candidates, params, cfg.threshold))?;
    let mesh = repair(&raw, &cfg.postprocess);
    let truth = reference.map(|r| label_candidates(&candidates, r));
    let hard: Vec<u8> = prediction.p1().iter().map(|&p| u8::from(p >= cfg.threshold)).collect();
    let report = evaluate(
        &mesh,
        &cloud.clean_points(),
        truth.as_deref().map(|t| (hard.as_slice(), t)),
        &cfg.metrics,
    );
    Ok(PipelineOutput {
        candidates,
        prediction,
        raw,
        mesh,
        report,
    })
}
