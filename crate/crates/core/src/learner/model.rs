//! Point encoder, face encoder and fused classifier with manual backprop.

use ndarray::{s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::inputs::{DropFinfo, SampleInputs, POINT_BASE_WIDTH};
use super::layers::{Activation, Dense, DenseGrad, Norm, NormGrad, Stage, StageCache, StageGrad};
use crate::error::{Error, Result};
use crate::features::FACE_INFO_WIDTH;

/// Index of the residual stage inside the face encoder.
const RESIDUAL_STAGE: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Neighbourhood size of the point encoder.
    pub k: usize,
    /// Per-point feature width `d_P`.
    pub d_point: usize,
    pub point_hidden: usize,
    /// Width of the shared per-neighbour map before pooling.
    pub neighbor_width: usize,
    /// Output widths of the face-encoder stages before and after the residual stage.
    pub face_widths: [usize; 4],
    /// Face feature width `d_F`.
    pub d_face: usize,
    pub classifier_widths: [usize; 5],
    pub leaky_slope: f64,
    /// Replace the face features by zeros.
    pub no_face_encoder: bool,
    pub drop_finfo: DropFinfo,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            k: 12,
            d_point: 64,
            point_hidden: 64,
            neighbor_width: 32,
            face_widths: [128, 128, 256, 512],
            d_face: 256,
            classifier_widths: [512, 256, 128, 64, 64],
            leaky_slope: 0.01,
            no_face_encoder: false,
            drop_finfo: DropFinfo::default(),
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    /// A narrow network for gradient checks and quick tests.
    pub fn tiny() -> Self {
        Self {
            k: 6,
            d_point: 3,
            point_hidden: 4,
            neighbor_width: 3,
            face_widths: [5, 4, 4, 3],
            d_face: 3,
            classifier_widths: [6, 5, 4, 3, 3],
            ..Self::default()
        }
    }

    pub fn classifier_input(&self) -> usize {
        4 * self.d_point + self.d_face
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [self.k, self.d_point, self.point_hidden, self.neighbor_width, self.d_face];
        if widths.iter().chain(&self.face_widths).chain(&self.classifier_widths).any(|&w| w == 0) {
            return Err(Error::InvalidInput("model widths and k must be positive".into()));
        }
        if !(self.leaky_slope.is_finite() && (0.0..1.0).contains(&self.leaky_slope)) {
            return Err(Error::InvalidInput(format!("leaky slope {} outside [0, 1)", self.leaky_slope)));
        }
        Ok(())
    }
}

/// All weights. Also used as the container for gradients, in which case the
/// normalisation running statistics are unused.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub neighbor: Dense,
    pub point_hidden: Dense,
    pub point_out: Dense,
    pub face_stages: Vec<Stage>,
    pub face_out: Dense,
    pub classifier: Vec<Stage>,
    pub logits: Dense,
}

/// One named parameter tensor, viewed as a flat slice.
pub struct BlockMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    /// False for normalisation running statistics.
    pub trainable: bool,
    pub data: &'a mut [f64],
}

/// Per-candidate class probabilities `(p0, p1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub probs: Vec<[f64; 2]>,
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn p1(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p[1]).collect()
    }

    pub fn hard_labels(&self) -> Vec<u8> {
        self.probs.iter().map(|p| u8::from(p[1] > p[0])).collect()
    }

    /// Builds a prediction from class-1 probabilities (e.g. labels).
    pub fn from_p1(p1: &[f64]) -> Self {
        Self {
            probs: p1.iter().map(|&p| [1.0 - p, p]).collect(),
        }
    }
}

pub struct PointCache {
    hpre: Array2<f64>,
    /// Winning neighbour per (point, channel) of the max-pool.
    argmax: Vec<usize>,
    concat: Array2<f64>,
    hid_pre: Array2<f64>,
    hid: Array2<f64>,
}

pub struct FaceCache {
    stages: Vec<StageCache>,
    out_in: Array2<f64>,
}

pub struct ForwardCache {
    point: PointCache,
    zp: Array2<f64>,
    face: Option<FaceCache>,
    classifier: Vec<StageCache>,
    logits_in: Array2<f64>,
    pub logits: Array2<f64>,
}

fn softmax_rows(z: &Array2<f64>) -> Vec<[f64; 2]> {
    z.rows()
        .into_iter()
        .map(|r| {
            let m = r[0].max(r[1]);
            let e0 = (r[0] - m).exp();
            let e1 = (r[1] - m).exp();
            let s = e0 + e1;
            [e0 / s, e1 / s]
        })
        .collect()
}

/// Concatenates the four ring vertices' feature rows for each candidate.
pub fn gather_face_geometry(zp: &Array2<f64>, rings: &[[usize; 4]]) -> Result<Array2<f64>> {
    let (n, d) = zp.dim();
    let mut out = Array2::zeros((rings.len(), 4 * d));
    for (m, ring) in rings.iter().enumerate() {
        for (c, &v) in ring.iter().enumerate() {
            if v >= n {
                return Err(Error::InvalidInput(format!("candidate {m} references point {v} of {n}")));
            }
            out.slice_mut(s![m, c * d..(c + 1) * d]).assign(&zp.row(v));
        }
    }
    Ok(out)
}

fn scatter_face_geometry(dzfp: &Array2<f64>, rings: &[[usize; 4]], n: usize, d: usize) -> Array2<f64> {
    let mut dzp = Array2::zeros((n, d));
    for (m, ring) in rings.iter().enumerate() {
        for (c, &v) in ring.iter().enumerate() {
            let mut row = dzp.row_mut(v);
            row += &dzfp.slice(s![m, c * d..(c + 1) * d]);
        }
    }
    dzp
}

fn dense_blocks<'a>(out: &mut Vec<BlockMut<'a>>, prefix: &str, d: &'a mut Dense) {
    let wshape = d.w.shape().to_vec();
    let bshape = d.b.shape().to_vec();
    out.push(BlockMut {
        name: format!("{prefix}.w"),
        shape: wshape,
        trainable: true,
        data: d.w.as_slice_mut().expect("standard layout"),
    });
    out.push(BlockMut {
        name: format!("{prefix}.b"),
        shape: bshape,
        trainable: true,
        data: d.b.as_slice_mut().expect("standard layout"),
    });
}

fn norm_blocks<'a>(out: &mut Vec<BlockMut<'a>>, prefix: &str, n: &'a mut Norm) {
    let w = n.gamma.len();
    let Norm {
        gamma,
        beta,
        running_mean,
        running_var,
    } = n;
    for (name, arr, trainable) in [
        ("gamma", gamma, true),
        ("beta", beta, true),
        ("running_mean", running_mean, false),
        ("running_var", running_var, false),
    ] {
        out.push(BlockMut {
            name: format!("{prefix}.{name}"),
            shape: vec![w],
            trainable,
            data: arr.as_slice_mut().expect("standard layout"),
        });
    }
}

fn set_dense(dst: &mut Dense, g: DenseGrad) {
    dst.w = g.w;
    dst.b = g.b;
}

fn set_norm(dst: &mut Norm, g: NormGrad) {
    dst.gamma = g.gamma;
    dst.beta = g.beta;
}

fn set_stage(dst: &mut Stage, g: StageGrad) {
    set_dense(&mut dst.dense, g.dense);
    set_norm(&mut dst.norm, g.norm);
}

impl ModelParams {
    /// Uniform Glorot weights, zero biases, identity normalisation.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let leaky = Activation::Leaky(config.leaky_slope);
        let neighbor = Dense::init(3, config.neighbor_width, &mut rng);
        let point_hidden = Dense::init(POINT_BASE_WIDTH + config.neighbor_width, config.point_hidden, &mut rng);
        let point_out = Dense::init(config.point_hidden, config.d_point, &mut rng);
        let fw = config.face_widths;
        let face_dims = [
            (FACE_INFO_WIDTH, fw[0]),
            (fw[0], fw[1]),
            (fw[1], fw[1]),
            (fw[1], fw[2]),
            (fw[2], fw[3]),
        ];
        let face_stages = face_dims.iter().map(|&(a, b)| Stage::init(a, b, leaky, &mut rng)).collect();
        let face_out = Dense::init(fw[3], config.d_face, &mut rng);
        let mut classifier = Vec::with_capacity(5);
        let mut width = config.classifier_input();
        for &w in &config.classifier_widths {
            classifier.push(Stage::init(width, w, Activation::Relu, &mut rng));
            width = w;
        }
        let logits = Dense::init(width, 2, &mut rng);
        Ok(Self {
            config: config.clone(),
            neighbor,
            point_hidden,
            point_out,
            face_stages,
            face_out,
            classifier,
            logits,
        })
    }

    /// Named views of every tensor, in a fixed order.
    pub fn blocks_mut(&mut self) -> Vec<BlockMut<'_>> {
        let mut out = Vec::new();
        dense_blocks(&mut out, "point.neighbor", &mut self.neighbor);
        dense_blocks(&mut out, "point.hidden", &mut self.point_hidden);
        dense_blocks(&mut out, "point.out", &mut self.point_out);
        for (i, st) in self.face_stages.iter_mut().enumerate() {
            dense_blocks(&mut out, &format!("face.stage{i}.dense"), &mut st.dense);
            norm_blocks(&mut out, &format!("face.stage{i}.norm"), &mut st.norm);
        }
        dense_blocks(&mut out, "face.out", &mut self.face_out);
        for (i, st) in self.classifier.iter_mut().enumerate() {
            dense_blocks(&mut out, &format!("classifier.stage{i}.dense"), &mut st.dense);
            norm_blocks(&mut out, &format!("classifier.stage{i}.norm"), &mut st.norm);
        }
        dense_blocks(&mut out, "classifier.logits", &mut self.logits);
        out
    }

    pub fn parameter_count(&mut self) -> usize {
        self.blocks_mut().iter().filter(|b| b.trainable).map(|b| b.data.len()).sum()
    }

    /// Same shapes, all zeros (running statistics included).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for b in z.blocks_mut() {
            b.data.fill(0.0);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        let mut c = self.clone();
        let ok = c.blocks_mut().iter().all(|b| b.data.iter().all(|v| v.is_finite()));
        ok
    }

    /// Per-point features `Z_P` (`N x d_P`).
    pub fn encode_points(&self, inputs: &SampleInputs) -> Result<Array2<f64>> {
        self.check_points(inputs)?;
        Ok(self.point_forward(inputs).0)
    }

    fn check_points(&self, inputs: &SampleInputs) -> Result<()> {
        let p = &inputs.points;
        if p.base.ncols() != POINT_BASE_WIDTH || p.offsets.ncols() != 3 || p.offsets.nrows() != p.len() * p.k {
            return Err(Error::Shape("point inputs do not match the encoder".into()));
        }
        if p.k == 0 {
            return Err(Error::InvalidInput("point encoder needs k > 0".into()));
        }
        Ok(())
    }

    fn point_forward(&self, inputs: &SampleInputs) -> (Array2<f64>, PointCache) {
        let p = &inputs.points;
        let (n, k) = (p.len(), p.k);
        let nw = self.config.neighbor_width;
        let hpre = self.neighbor.forward(&p.offsets);
        let mut concat = Array2::zeros((n, POINT_BASE_WIDTH + nw));
        concat.slice_mut(s![.., ..POINT_BASE_WIDTH]).assign(&p.base);
        let mut argmax = vec![0usize; n * nw];
        for i in 0..n {
            for c in 0..nw {
                let mut best = 0usize;
                let mut val = f64::NEG_INFINITY;
                for j in 0..k {
                    let v = hpre[[i * k + j, c]].max(0.0);
                    if v > val {
                        val = v;
                        best = j;
                    }
                }
                argmax[i * nw + c] = best;
                concat[[i, POINT_BASE_WIDTH + c]] = val;
            }
        }
        let act = Activation::Leaky(self.config.leaky_slope);
        let hid_pre = self.point_hidden.forward(&concat);
        let hid = hid_pre.mapv(|v| act.apply(v));
        let zp = self.point_out.forward(&hid);
        (
            zp,
            PointCache {
                hpre,
                argmax,
                concat,
                hid_pre,
                hid,
            },
        )
    }

    /// Face features `Z_F_F` (`M x d_F`) from descriptor rows.
    pub fn encode_faces(&self, face_info: &Array2<f64>, train: bool) -> Result<Array2<f64>> {
        if face_info.ncols() != FACE_INFO_WIDTH {
            return Err(Error::Shape(format!("face descriptors have width {}, expected {FACE_INFO_WIDTH}", face_info.ncols())));
        }
        Ok(self.face_forward(face_info, train).0)
    }

    fn face_forward(&self, face_info: &Array2<f64>, train: bool) -> (Array2<f64>, FaceCache) {
        let mut x = face_info.clone();
        let mut stages = Vec::with_capacity(self.face_stages.len());
        for (i, st) in self.face_stages.iter().enumerate() {
            if i == RESIDUAL_STAGE {
                let skip = x.clone();
                let (y, c) = st.forward(x, train);
                x = y + skip;
                stages.push(c);
            } else {
                let (y, c) = st.forward(x, train);
                x = y;
                stages.push(c);
            }
        }
        let z = self.face_out.forward(&x);
        (z, FaceCache { stages, out_in: x })
    }

    /// Probabilities from gathered point features and face features.
    pub fn classify(&self, zfp: &Array2<f64>, zff: &Array2<f64>, train: bool) -> Result<Prediction> {
        Ok(self.classify_cached(zfp, zff, train)?.0)
    }

    fn classify_cached(
        &self,
        zfp: &Array2<f64>,
        zff: &Array2<f64>,
        train: bool,
    ) -> Result<(Prediction, Vec<StageCache>, Array2<f64>, Array2<f64>)> {
        if zfp.nrows() != zff.nrows() {
            return Err(Error::Shape(format!("{} point rows vs {} face rows", zfp.nrows(), zff.nrows())));
        }
        if zfp.ncols() + zff.ncols() != self.config.classifier_input() {
            return Err(Error::Shape(format!(
                "classifier expects width {}, got {}",
                self.config.classifier_input(),
                zfp.ncols() + zff.ncols()
            )));
        }
        let mut x = ndarray::concatenate(Axis(1), &[zfp.view(), zff.view()]).map_err(|e| Error::Shape(e.to_string()))?;
        let mut caches = Vec::with_capacity(self.classifier.len());
        for st in &self.classifier {
            let (y, c) = st.forward(x, train);
            x = y;
            caches.push(c);
        }
        let logits = self.logits.forward(&x);
        let pred = Prediction {
            probs: softmax_rows(&logits),
        };
        Ok((pred, caches, x, logits))
    }

    /// Full forward pass. `train` selects batch statistics in the
    /// normalisation layers.
    pub fn forward(&self, inputs: &SampleInputs, train: bool) -> Result<(Prediction, ForwardCache)> {
        self.check_points(inputs)?;
        if inputs.face_info.nrows() != inputs.rings.len() {
            return Err(Error::Shape("descriptor rows and rings differ".into()));
        }
        let (zp, point) = self.point_forward(inputs);
        let zfp = gather_face_geometry(&zp, &inputs.rings)?;
        let m = inputs.rings.len();
        let (zff, face) = if self.config.no_face_encoder {
            (Array2::zeros((m, self.config.d_face)), None)
        } else {
            if inputs.face_info.ncols() != FACE_INFO_WIDTH {
                return Err(Error::Shape(format!("face descriptors have width {}", inputs.face_info.ncols())));
            }
            let (z, c) = self.face_forward(&inputs.face_info, train);
            (z, Some(c))
        };
        let (pred, classifier, logits_in, logits) = self.classify_cached(&zfp, &zff, train)?;
        Ok((
            pred,
            ForwardCache {
                point,
                zp,
                face,
                classifier,
                logits_in,
                logits,
            },
        ))
    }

    pub fn predict(&self, inputs: &SampleInputs) -> Result<Prediction> {
        Ok(self.forward(inputs, false)?.0)
    }

    /// Gradient of a scalar loss w.r.t. every trainable tensor, given the
    /// loss gradient w.r.t. the logits.
    pub fn backward(&self, inputs: &SampleInputs, cache: &ForwardCache, dlogits: &Array2<f64>) -> ModelParams {
        let mut g = self.zeros_like();
        let (lg, dx) = self.logits.backward(&cache.logits_in, dlogits, true);
        set_dense(&mut g.logits, lg);
        let mut dx = dx.expect("requested");
        for (i, st) in self.classifier.iter().enumerate().rev() {
            let (sg, d) = st.backward(&cache.classifier[i], &dx, true);
            set_stage(&mut g.classifier[i], sg);
            dx = d.expect("requested");
        }
        let pw = 4 * self.config.d_point;
        let dzfp = dx.slice(s![.., ..pw]).to_owned();
        if let Some(face) = &cache.face {
            let dzff = dx.slice(s![.., pw..]).to_owned();
            let (og, d) = self.face_out.backward(&face.out_in, &dzff, true);
            set_dense(&mut g.face_out, og);
            let mut d = d.expect("requested");
            for (i, st) in self.face_stages.iter().enumerate().rev() {
                let need = i > 0;
                let (sg, dprev) = st.backward(&face.stages[i], &d, need);
                set_stage(&mut g.face_stages[i], sg);
                if need {
                    let dprev = dprev.expect("requested");
                    d = if i == RESIDUAL_STAGE { dprev + &d } else { dprev };
                }
            }
        }
        let pc = &cache.point;
        let dzp = scatter_face_geometry(&dzfp, &inputs.rings, cache.zp.nrows(), self.config.d_point);
        let (og, dhid) = self.point_out.backward(&pc.hid, &dzp, true);
        set_dense(&mut g.point_out, og);
        let act = Activation::Leaky(self.config.leaky_slope);
        let mut dhid_pre = dhid.expect("requested");
        ndarray::Zip::from(&mut dhid_pre).and(&pc.hid_pre).for_each(|d, &p| *d *= act.slope(p));
        let (hg, dconcat) = self.point_hidden.backward(&pc.concat, &dhid_pre, true);
        set_dense(&mut g.point_hidden, hg);
        let dconcat = dconcat.expect("requested");
        let (n, k, nw) = (inputs.points.len(), inputs.points.k, self.config.neighbor_width);
        let mut dhpre = Array2::zeros((n * k, nw));
        for i in 0..n {
            for c in 0..nw {
                let row = i * k + pc.argmax[i * nw + c];
                if pc.hpre[[row, c]] > 0.0 {
                    dhpre[[row, c]] += dconcat[[i, POINT_BASE_WIDTH + c]];
                }
            }
        }
        let (ng, _) = self.neighbor.backward(&inputs.points.offsets, &dhpre, false);
        set_dense(&mut g.neighbor, ng);
        g
    }

    /// Folds the batch statistics of a training forward pass into the
    /// running estimates.
    pub fn update_running(&mut self, cache: &ForwardCache) {
        if let Some(face) = &cache.face {
            for (st, c) in self.face_stages.iter_mut().zip(&face.stages) {
                st.norm.update_running(&c.norm, c.pre.nrows());
            }
        }
        for (st, c) in self.classifier.iter_mut().zip(&cache.classifier) {
            st.norm.update_running(&c.norm, c.pre.nrows());
        }
    }

    /// Signature of every piecewise-linear decision taken in a forward pass:
    /// rectifier signs and max-pool winners. Finite differences are only
    /// meaningful between parameter values that share it.
    pub fn activation_pattern(&self, inputs: &SampleInputs, train: bool) -> Result<Vec<u32>> {
        let (_, cache) = self.forward(inputs, train)?;
        let mut out = Vec::new();
        let pc = &cache.point;
        out.extend(pc.hpre.iter().map(|&v| u32::from(v > 0.0)));
        out.extend(pc.argmax.iter().map(|&a| a as u32));
        out.extend(pc.hid_pre.iter().map(|&v| u32::from(v > 0.0)));
        if let Some(face) = &cache.face {
            for c in &face.stages {
                out.extend(c.pre.iter().map(|&v| u32::from(v > 0.0)));
            }
        }
        for c in &cache.classifier {
            out.extend(c.pre.iter().map(|&v| u32::from(v > 0.0)));
        }
        Ok(out)
    }
}
