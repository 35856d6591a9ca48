//! Dense, batch-normalisation and activation layers with manual backprop.
//!
//! Activations are row-per-sample matrices (`rows x features`).

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;

pub const NORM_EPS: f64 = 1e-5;
pub const NORM_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    Leaky(f64),
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Leaky(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
        }
    }

    #[inline]
    pub fn slope(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Leaky(a) => {
                if x > 0.0 {
                    1.0
                } else {
                    a
                }
            }
        }
    }

    pub fn is_piecewise(self) -> bool {
        !matches!(self, Activation::Identity)
    }
}

/// `y = x W + b` with `W` stored as `in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct DenseGrad {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    /// Uniform Glorot initialisation, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.gen_range(-limit..=limit));
        Self {
            w,
            b: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.w.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.w);
        y += &self.b;
        y
    }

    /// Returns the parameter gradient and the gradient w.r.t. the input.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, need_dx: bool) -> (DenseGrad, Option<Array2<f64>>) {
        let grad = DenseGrad {
            w: x.t().dot(dy),
            b: dy.sum_axis(Axis(0)),
        };
        let dx = need_dx.then(|| dy.dot(&self.w.t()));
        (grad, dx)
    }

    pub fn zeros_like(&self) -> DenseGrad {
        DenseGrad {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

/// Per-feature batch normalisation with running statistics for inference.
#[derive(Clone, Debug, PartialEq)]
pub struct Norm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct NormGrad {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

#[derive(Clone, Debug)]
pub struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    /// Batch statistics (training mode only).
    pub batch_mean: Option<Array1<f64>>,
    pub batch_var: Option<Array1<f64>>,
}

impl Norm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }

    pub fn forward(&self, x: &Array2<f64>, train: bool) -> (Array2<f64>, NormCache) {
        let rows = x.nrows().max(1) as f64;
        let (mean, var, batch) = if train {
            let mean = x.sum_axis(Axis(0)) / rows;
            let centered = x - &mean;
            let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / rows;
            (mean.clone(), var.clone(), Some((mean, var)))
        } else {
            (self.running_mean.clone(), self.running_var.clone(), None)
        };
        let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
        let xhat = (x - &mean) * &inv_std;
        let y = &xhat * &self.gamma + &self.beta;
        let (batch_mean, batch_var) = match batch {
            Some((m, v)) => (Some(m), Some(v)),
            None => (None, None),
        };
        (
            y,
            NormCache {
                xhat,
                inv_std,
                batch_mean,
                batch_var,
            },
        )
    }

    /// Backward pass. In training mode the batch statistics depend on the
    /// input and contribute to the input gradient.
    pub fn backward(&self, cache: &NormCache, dy: &Array2<f64>) -> (NormGrad, Array2<f64>) {
        let grad = NormGrad {
            gamma: (dy * &cache.xhat).sum_axis(Axis(0)),
            beta: dy.sum_axis(Axis(0)),
        };
        let dxhat = dy * &self.gamma;
        let dx = if cache.batch_mean.is_some() {
            let m = dy.nrows() as f64;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
            let mut dx = &dxhat * m - &sum_dxhat - &(&cache.xhat * &sum_dxhat_xhat);
            dx *= &(&cache.inv_std / m);
            dx
        } else {
            dxhat * &cache.inv_std
        };
        (grad, dx)
    }

    /// Folds one batch's statistics into the running estimates.
    pub fn update_running(&mut self, cache: &NormCache, rows: usize) {
        let (Some(mean), Some(var)) = (&cache.batch_mean, &cache.batch_var) else {
            return;
        };
        let unbias = if rows > 1 { rows as f64 / (rows - 1) as f64 } else { 1.0 };
        Zip::from(&mut self.running_mean)
            .and(mean)
            .for_each(|r, &b| *r = (1.0 - NORM_MOMENTUM) * *r + NORM_MOMENTUM * b);
        Zip::from(&mut self.running_var)
            .and(var)
            .for_each(|r, &b| *r = (1.0 - NORM_MOMENTUM) * *r + NORM_MOMENTUM * b * unbias);
    }

    pub fn zeros_like(&self) -> NormGrad {
        NormGrad {
            gamma: Array1::zeros(self.gamma.raw_dim()),
            beta: Array1::zeros(self.beta.raw_dim()),
        }
    }
}

/// Affine map, normalisation, activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub dense: Dense,
    pub norm: Norm,
    pub act: Activation,
}

#[derive(Clone, Debug)]
pub struct StageGrad {
    pub dense: DenseGrad,
    pub norm: NormGrad,
}

#[derive(Clone, Debug)]
pub struct StageCache {
    input: Array2<f64>,
    pub norm: NormCache,
    /// Normalised pre-activation.
    pub pre: Array2<f64>,
}

impl Stage {
    pub fn init(fan_in: usize, fan_out: usize, act: Activation, rng: &mut impl Rng) -> Self {
        Self {
            dense: Dense::init(fan_in, fan_out, rng),
            norm: Norm::new(fan_out),
            act,
        }
    }

    pub fn forward(&self, x: Array2<f64>, train: bool) -> (Array2<f64>, StageCache) {
        let z = self.dense.forward(&x);
        let (pre, norm) = self.norm.forward(&z, train);
        let act = self.act;
        let y = pre.mapv(|v| act.apply(v));
        (y, StageCache { input: x, norm, pre })
    }

    pub fn backward(&self, cache: &StageCache, dy: &Array2<f64>, need_dx: bool) -> (StageGrad, Option<Array2<f64>>) {
        let act = self.act;
        let mut dpre = dy.clone();
        Zip::from(&mut dpre).and(&cache.pre).for_each(|d, &p| *d *= act.slope(p));
        let (norm, dz) = self.norm.backward(&cache.norm, &dpre);
        let (dense, dx) = self.dense.backward(&cache.input, &dz, need_dx);
        (StageGrad { dense, norm }, dx)
    }

    pub fn zeros_like(&self) -> StageGrad {
        StageGrad {
            dense: self.dense.zeros_like(),
            norm: self.norm.zeros_like(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn sum_weighted(y: &Array2<f64>, r: &Array2<f64>) -> f64 {
        (y * r).sum()
    }

    #[test]
    fn norm_train_backward_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_simple_fn((7, 3), || rng.gen_range(-2.0..2.0));
        let r = Array2::from_shape_simple_fn((7, 3), || rng.gen_range(-1.0..1.0));
        let mut norm = Norm::new(3);
        norm.gamma = array![0.5, 1.5, -0.7];
        norm.beta = array![0.1, 0.0, 0.3];
        let (_, cache) = norm.forward(&x, true);
        let (_, dx) = norm.backward(&cache, &r);
        let h = 1e-6;
        for i in 0..7 {
            for j in 0..3 {
                let mut xp = x.clone();
                xp[[i, j]] += h;
                let mut xm = x.clone();
                xm[[i, j]] -= h;
                let fp = sum_weighted(&norm.forward(&xp, true).0, &r);
                let fm = sum_weighted(&norm.forward(&xm, true).0, &r);
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - dx[[i, j]]).abs() < 1e-7, "{fd} vs {}", dx[[i, j]]);
            }
        }
    }

    #[test]
    fn running_stats_converge_to_batch_stats() {
        let x = array![[1.0, 10.0], [3.0, 10.0]];
        let mut norm = Norm::new(2);
        for _ in 0..200 {
            let (_, c) = norm.forward(&x, true);
            norm.update_running(&c, 2);
        }
        // Exponential averaging from mean 0, var 1 toward mean 2, unbiased var 2 / 0.
        let left = (1.0 - NORM_MOMENTUM).powi(200);
        assert!((norm.running_mean[0] - 2.0 * (1.0 - left)).abs() < 1e-12);
        assert!((norm.running_var[0] - (left + 2.0 * (1.0 - left))).abs() < 1e-12);
        assert!((norm.running_var[1] - left).abs() < 1e-12);
    }

    #[test]
    fn leaky_and_relu() {
        assert_eq!(Activation::Relu.apply(-2.0), 0.0);
        assert_eq!(Activation::Leaky(0.1).apply(-2.0), -0.2);
        assert_eq!(Activation::Leaky(0.1).slope(-2.0), 0.1);
    }
}
