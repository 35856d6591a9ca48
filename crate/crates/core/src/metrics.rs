//! Mesh quality and surface-fit metrics.

use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::scaled_jacobian;
use crate::geom::Vec3;
use crate::mesh::{bilinear, corner_edges, edge_stats, manifold_watertight_scores, quad_area, QuadMesh};
use crate::scalar::Real;

/// Longest over shortest edge of one face.
pub fn max_min_edge_ratio<T: Real>(face: &[Vec3<T>; 4]) -> Result<T> {
    let lens = [0, 1, 2, 3].map(|i| face[i].distance(face[(i + 1) % 4]));
    let mut lo = lens[0];
    let mut hi = lens[0];
    for &l in &lens[1..] {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    if lo <= T::degenerate_eps() * hi.max(T::one()) {
        return Err(Error::Degenerate("zero-length edge".into()));
    }
    Ok(hi / lo)
}

/// Mean of [`max_min_edge_ratio`] over faces.
pub fn mean_max_min_edge_ratio<T: Real>(mesh: &QuadMesh<T>) -> Result<f64> {
    mean_over_faces(mesh, |q| max_min_edge_ratio(q).map(|v| v.as_f64()))
}

/// Mean scaled Jacobian over faces.
pub fn mean_scaled_jacobian<T: Real>(mesh: &QuadMesh<T>) -> Result<f64> {
    mean_over_faces(mesh, |q| scaled_jacobian(q).map(|v| v.as_f64()))
}

fn mean_over_faces<T: Real>(mesh: &QuadMesh<T>, f: impl Fn(&[Vec3<T>; 4]) -> Result<f64>) -> Result<f64> {
    if mesh.faces.is_empty() {
        return Err(Error::InvalidInput("mesh has no faces".into()));
    }
    let mut sum = 0.0;
    for i in 0..mesh.faces.len() {
        sum += f(&mesh.face_points(i)).map_err(|e| Error::DegenerateFace {
            face: i,
            reason: e.to_string(),
        })?;
    }
    Ok(sum / mesh.faces.len() as f64)
}

/// Interior-angle deviation from 90 degrees over all corners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleDistortion {
    /// Root mean square deviation in degrees.
    pub rmse: f64,
    /// Mean squared deviation in square degrees.
    pub mse: f64,
    pub corners: usize,
    /// Corners skipped because an adjacent edge has zero length.
    pub excluded: usize,
}

pub fn interior_angle_deg<T: Real>(face: &[Vec3<T>; 4], corner: usize) -> Option<f64> {
    let (l_in, l_out) = corner_edges(face, corner);
    let a = -l_in;
    let d = a.norm().as_f64() * l_out.norm().as_f64();
    if d <= T::degenerate_eps().as_f64() {
        return None;
    }
    Some((a.dot(l_out).as_f64() / d).clamp(-1.0, 1.0).acos().to_degrees())
}

pub fn angle_distortion<T: Real>(mesh: &QuadMesh<T>) -> Result<AngleDistortion> {
    let mut sum = 0.0;
    let mut corners = 0;
    let mut excluded = 0;
    for i in 0..mesh.faces.len() {
        let q = mesh.face_points(i);
        for c in 0..4 {
            match interior_angle_deg(&q, c) {
                Some(a) => {
                    sum += (a - 90.0) * (a - 90.0);
                    corners += 1;
                }
                None => excluded += 1,
            }
        }
    }
    if excluded > 0 {
        log::warn!("angle distortion: {excluded} degenerate corners excluded");
    }
    if corners == 0 {
        return Err(Error::InvalidInput("no well-defined corners".into()));
    }
    let mse = sum / corners as f64;
    Ok(AngleDistortion {
        rmse: mse.sqrt(),
        mse,
        corners,
        excluded,
    })
}

/// Area-weighted bilinear samples on the faces of `mesh`.
pub fn sample_surface<T: Real>(mesh: &QuadMesh<T>, n: usize, seed: u64) -> Result<Vec<Vec3<f64>>> {
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|i| quad_area(&mesh.face_points(i)).as_f64()).collect();
    let pick = WeightedIndex::new(&areas).map_err(|e| Error::InvalidInput(format!("face areas: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let f = pick.sample(&mut rng);
        let s: f64 = rng.gen();
        let t: f64 = rng.gen();
        let q = mesh.face_points(f).map(|p| p.cast::<f64>());
        out.push(bilinear(&q, s, t));
    }
    Ok(out)
}

fn mean_nearest(from: &[Vec3<f64>], to: &[Vec3<f64>]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|p| to.iter().map(|q| p.distance_squared(*q)).fold(f64::INFINITY, f64::min).sqrt())
        .sum();
    total / from.len() as f64
}

/// Symmetric sum of mean nearest-neighbour distances between two point sets.
pub fn chamfer_between(a: &[Vec3<f64>], b: &[Vec3<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("chamfer distance needs two non-empty point sets".into()));
    }
    Ok(mean_nearest(a, b) + mean_nearest(b, a))
}

/// Chamfer distance between `target` and `n_samples` points drawn on the
/// mesh. An empty mesh gives `+inf`.
pub fn chamfer_distance<T: Real>(target: &[Vec3<T>], mesh: &QuadMesh<T>, n_samples: usize, seed: u64) -> Result<f64> {
    if mesh.faces.is_empty() {
        log::warn!("chamfer distance of an empty mesh is infinite");
        return Ok(f64::INFINITY);
    }
    let samples = sample_surface(mesh, n_samples, seed)?;
    let target: Vec<Vec3<f64>> = target.iter().map(|p| p.cast()).collect();
    chamfer_between(&samples, &target)
}

/// `(TP / (TP + FP), TP / (TP + FN))`, with 0 for an empty denominator.
pub fn precision_recall(predicted: &[u8], truth: &[u8]) -> Result<(f64, f64)> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predicted.len(), truth.len())));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p == 1, t == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let ratio = |num: usize, den: usize, what: &str| {
        if den == 0 {
            log::warn!("{what} undefined (no {what} denominator); reporting 0");
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    Ok((ratio(tp, tp + fp, "precision"), ratio(tp, tp + fn_, "recall")))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub chamfer_samples: usize,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            chamfer_samples: 10_000,
            seed: 0,
        }
    }
}

/// All metrics of one mesh. Fields that could not be computed are `None`
/// and explained in `warnings`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub faces: usize,
    pub mean_scaled_jacobian: Option<f64>,
    pub mean_max_min_edge_ratio: Option<f64>,
    pub angle_distortion: Option<f64>,
    pub angle_distortion_mse: Option<f64>,
    pub watertightness: Option<f64>,
    pub manifoldness: Option<f64>,
    pub chamfer_distance: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub warnings: Vec<String>,
}

fn keep<V>(slot: &mut Option<V>, warnings: &mut Vec<String>, name: &str, r: Result<V>) {
    match r {
        Ok(v) => *slot = Some(v),
        Err(e) => {
            log::warn!("{name}: {e}");
            warnings.push(format!("{name}: {e}"));
        }
    }
}

/// Computes every metric that applies; failures become warnings.
/// `labels` is `(predicted, truth)` over the candidate set.
pub fn evaluate<T: Real>(mesh: &QuadMesh<T>, target: &[Vec3<T>], labels: Option<(&[u8], &[u8])>, cfg: &MetricsConfig) -> MetricsReport {
    let mut r = MetricsReport {
        faces: mesh.faces.len(),
        ..Default::default()
    };
    let mut w = Vec::new();
    keep(&mut r.mean_scaled_jacobian, &mut w, "scaled_jacobian", mean_scaled_jacobian(mesh));
    keep(&mut r.mean_max_min_edge_ratio, &mut w, "max_min_edge_ratio", mean_max_min_edge_ratio(mesh));
    let mut ad = None;
    keep(&mut ad, &mut w, "angle_distortion", angle_distortion(mesh));
    if let Some(ad) = ad {
        r.angle_distortion = Some(ad.rmse);
        r.angle_distortion_mse = Some(ad.mse);
        if ad.excluded > 0 {
            w.push(format!("angle_distortion: {} degenerate corners excluded", ad.excluded));
        }
    }
    let mut topo = None;
    keep(&mut topo, &mut w, "topology", edge_stats(mesh));
    if let Some(stats) = topo {
        if stats.e_all == 0 {
            w.push("topology: mesh has no edges".into());
        }
        let (m, wt) = manifold_watertight_scores(&stats);
        r.manifoldness = Some(m);
        r.watertightness = Some(wt);
    }
    if mesh.faces.is_empty() {
        w.push("chamfer_distance: empty mesh".into());
    }
    keep(&mut r.chamfer_distance, &mut w, "chamfer_distance", chamfer_distance(target, mesh, cfg.chamfer_samples, cfg.seed));
    if let Some((pred, truth)) = labels {
        let mut pr = None;
        keep(&mut pr, &mut w, "precision_recall", precision_recall(pred, truth));
        if let Some((p, rc)) = pr {
            r.precision = Some(p);
            r.recall = Some(rc);
        }
    }
    r.warnings = w;
    r
}

impl MetricsReport {
    fn rows(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("mean_scaled_jacobian", self.mean_scaled_jacobian),
            ("mean_max_min_edge_ratio", self.mean_max_min_edge_ratio),
            ("angle_distortion", self.angle_distortion),
            ("angle_distortion_mse", self.angle_distortion_mse),
            ("watertightness", self.watertightness),
            ("manifoldness", self.manifoldness),
            ("chamfer_distance", self.chamfer_distance),
            ("precision", self.precision),
            ("recall", self.recall),
        ]
    }

    /// `key=value` lines; missing values print as `nan`.
    pub fn to_key_values(&self) -> String {
        let mut s = format!("faces={}\n", self.faces);
        for (k, v) in self.rows() {
            s += &format!("{k}={}\n", v.unwrap_or(f64::NAN));
        }
        for w in &self.warnings {
            s += &format!("warning={w}\n");
        }
        s
    }

    /// Parses [`MetricsReport::to_key_values`] output.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut r = MetricsReport::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("bad report line {line:?}")))?;
            if k == "warning" {
                r.warnings.push(v.to_string());
                continue;
            }
            if k == "faces" {
                r.faces = v.parse().map_err(|_| Error::InvalidInput(format!("bad face count {v:?}")))?;
                continue;
            }
            let x: f64 = v.parse().map_err(|_| Error::InvalidInput(format!("bad value for {k}: {v:?}")))?;
            let x = (!x.is_nan()).then_some(x);
            let slot = match k {
                "mean_scaled_jacobian" => &mut r.mean_scaled_jacobian,
                "mean_max_min_edge_ratio" => &mut r.mean_max_min_edge_ratio,
                "angle_distortion" => &mut r.angle_distortion,
                "angle_distortion_mse" => &mut r.angle_distortion_mse,
                "watertightness" => &mut r.watertightness,
                "manifoldness" => &mut r.manifoldness,
                "chamfer_distance" => &mut r.chamfer_distance,
                "precision" => &mut r.precision,
                "recall" => &mut r.recall,
                _ => return Err(Error::InvalidInput(format!("unknown report key {k:?}"))),
            };
            *slot = x;
        }
        Ok(r)
    }

    /// Checks every present value against its documented range.
    pub fn in_range(&self) -> bool {
        let within = |v: Option<f64>, lo: f64, hi: f64| v.is_none_or(|x| x >= lo && x <= hi);
        within(self.mean_scaled_jacobian, -1.0, 1.0)
            && within(self.mean_max_min_edge_ratio, 1.0, f64::INFINITY)
            && within(self.angle_distortion, 0.0, 90.0)
            && within(self.watertightness, 0.0, 1.0)
            && within(self.manifoldness, 0.0, 1.0)
            && within(self.chamfer_distance, 0.0, f64::INFINITY)
            && within(self.precision, 0.0, 1.0)
            && within(self.recall, 0.0, 1.0)
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<26}{:>14}", "faces", self.faces)?;
        for (k, v) in self.rows() {
            match v {
                Some(x) => writeln!(f, "{k:<26}{x:>14.6}")?,
                None => writeln!(f, "{k:<26}{:>14}", "-")?,
            }
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}
