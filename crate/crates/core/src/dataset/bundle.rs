//! Sample bundle directory:
//!
//! ```text
//! <dir>/cloud.ply       ASCII PLY, x y z plus a `noise` uchar flag
//! <dir>/reference.obj   reference quad mesh (indices address the first points of the cloud)
//! <dir>/candidates.txt  candidate records, see `candidates::write_candidates`
//! <dir>/labels.txt      one 0/1 label per candidate line, same order
//! <dir>/manifest.toml   key = value summary (`BundleManifest`)
//! ```
//!
//! `candidates.txt` and `labels.txt` may be absent from bundles that only
//! hold a cloud (inputs to `candidates`/`pipeline`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabeledSample, ShapeSpec};
use crate::candidates::{read_candidates, write_candidates, CandidateConfig};
use crate::error::{Error, Result};
use crate::mesh::{read_obj, read_ply_cloud, write_obj, write_ply_cloud};
use crate::scalar::Real;

pub const BUNDLE_FORMAT: &str = "quadrecon-bundle-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub points: usize,
    pub noise_points: usize,
    pub reference_vertices: usize,
    pub reference_faces: usize,
    pub candidates: usize,
    pub positives: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_config: Option<CandidateConfig>,
}

impl BundleManifest {
    pub fn describe<T: Real>(sample: &LabeledSample<T>, shape: Option<ShapeSpec>, cfg: Option<CandidateConfig>) -> Self {
        Self {
            format: BUNDLE_FORMAT.to_string(),
            points: sample.cloud.len(),
            noise_points: (0..sample.cloud.len()).filter(|&i| sample.cloud.is_noise(i)).count(),
            reference_vertices: sample.reference.vertices.len(),
            reference_faces: sample.reference.faces.len(),
            candidates: sample.candidates.len(),
            positives: sample.positives(),
            shape,
            candidate_config: cfg,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        for l in labels {
            writeln!(w, "{l}")?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        match line.trim() {
            "" => {}
            "0" => out.push(0),
            "1" => out.push(1),
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("label must be 0 or 1, got {other:?}"),
                })
            }
        }
    }
    Ok(out)
}

/// Writes all five bundle files into `dir`, creating it if needed.
pub fn write_bundle<T: Real>(dir: impl AsRef<Path>, sample: &LabeledSample<T>, manifest: &BundleManifest) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_ply_cloud(dir.join("cloud.ply"), &sample.cloud)?;
    write_obj(dir.join("reference.obj"), &sample.reference)?;
    write_candidates(dir.join("candidates.txt"), &sample.candidates)?;
    write_labels(dir.join("labels.txt"), &sample.labels)?;
    manifest.write(&dir.join("manifest.toml"))
}

/// Reads a full bundle, checking that label and candidate counts agree.
pub fn read_bundle<T: Real>(dir: impl AsRef<Path>) -> Result<(LabeledSample<T>, BundleManifest)> {
    let dir = dir.as_ref();
    let manifest = BundleManifest::read(&dir.join("manifest.toml"))?;
    let cloud = read_ply_cloud(dir.join("cloud.ply"))?;
    let reference = read_obj(dir.join("reference.obj"))?;
    let candidates = read_candidates(dir.join("candidates.txt"))?;
    let labels = read_labels(dir.join("labels.txt"))?;
    if labels.len() != candidates.len() {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            msg: format!("{} labels for {} candidates", labels.len(), candidates.len()),
        });
    }
    Ok((
        LabeledSample {
            cloud,
            candidates,
            labels,
            reference,
        },
        manifest,
    ))
}
