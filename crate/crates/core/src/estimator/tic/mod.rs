//! Transformer estimator: a shared encoder followed by two heads, one for
//! the drift correction and one for the offset correction.
//!
//! Per frame the input token is `[a_0/30, .., a_{S-1}/30, R_0, .., R_{S-1}]`
//! (accelerations first, rotations row-major). Each head runs one more
//! encoder block, averages over time and maps to `S` 6D rotations.

pub mod weights;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

pub use weights::{
    load_weights, save_weights, SplitMix64, Tensor, TicArch, WeightBundle, WeightFlags, ENCODER_BLOCKS, HEADS,
};

use super::{EstimateInput, EstimateOut, Estimator, SensorEstimate, Window};
use crate::error::{Error, Result};
use crate::rotmath::{mat_from_rot6d, Rot6D};

/// Accelerations are divided by this before entering the network.
pub const ACCEL_SCALE: f32 = 30.0;
pub const LN_EPS: f32 = 1e-5;

#[derive(Debug, Clone)]
struct Linear {
    w: Array2<f32>,
    b: Array1<f32>,
}

impl Linear {
    fn load(bundle: &WeightBundle, weight: &str, bias: &str) -> Result<Self> {
        let w = bundle.get(weight)?;
        let b = bundle.get(bias)?;
        Ok(Linear {
            w: Array2::from_shape_vec((w.shape[0], w.shape[1]), w.data.clone()).map_err(|e| shape_err(weight, e))?,
            b: Array1::from_vec(b.data.clone()),
        })
    }

    fn apply(&self, x: ArrayView2<f32>) -> Array2<f32> {
        x.dot(&self.w.t()) + &self.b
    }

    fn apply1(&self, x: ArrayView1<f32>) -> Array1<f32> {
        self.w.dot(&x) + &self.b
    }
}

fn shape_err(name: &str, e: ndarray::ShapeError) -> Error {
    Error::Config(format!("tensor {name:?}: {e}"))
}

#[derive(Debug, Clone)]
struct LayerNorm {
    gamma: Array1<f32>,
    beta: Array1<f32>,
}

impl LayerNorm {
    fn load(bundle: &WeightBundle, prefix: &str) -> Result<Self> {
        Ok(LayerNorm {
            gamma: Array1::from_vec(bundle.get(&format!("{prefix}.gamma"))?.data.clone()),
            beta: Array1::from_vec(bundle.get(&format!("{prefix}.beta"))?.data.clone()),
        })
    }

    fn apply(&self, x: &Array2<f32>) -> Array2<f32> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            let n = row.len() as f32;
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv);
        }
        out * &self.gamma + &self.beta
    }
}

/// Exact GELU, `0.5·x·(1 + erf(x/√2))`.
pub fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + libm::erff(x * std::f32::consts::FRAC_1_SQRT_2))
}

#[derive(Debug, Clone)]
struct Block {
    q: Linear,
    k: Linear,
    v: Linear,
    out: Linear,
    ln1: LayerNorm,
    ln2: LayerNorm,
    w1: Linear,
    w2: Linear,
    heads: usize,
}

impl Block {
    fn load(bundle: &WeightBundle, p: &str, heads: usize) -> Result<Self> {
        let attn = |m: &str| Linear::load(bundle, &format!("{p}.attn.{m}.weight"), &format!("{p}.attn.{m}.bias"));
        Ok(Block {
            q: attn("q")?,
            k: attn("k")?,
            v: attn("v")?,
            out: attn("out")?,
            ln1: LayerNorm::load(bundle, &format!("{p}.ln1"))?,
            ln2: LayerNorm::load(bundle, &format!("{p}.ln2"))?,
            w1: Linear::load(bundle, &format!("{p}.ffn.w1"), &format!("{p}.ffn.b1"))?,
            w2: Linear::load(bundle, &format!("{p}.ffn.w2"), &format!("{p}.ffn.b2"))?,
            heads,
        })
    }

    fn attention(&self, x: &Array2<f32>) -> Array2<f32> {
        let (n, d) = x.dim();
        let dh = d / self.heads;
        let q = self.q.apply(x.view());
        let k = self.k.apply(x.view());
        let v = self.v.apply(x.view());
        let scale = 1.0 / (dh as f32).sqrt();
        let mut concat = Array2::<f32>::zeros((n, d));
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            for mut row in scores.rows_mut() {
                let max = row.fold(f32::NEG_INFINITY, |m, &v| m.max(v));
                row.mapv_inplace(|v| (v - max).exp());
                let sum = row.sum();
                row /= sum;
            }
            concat.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        }
        self.out.apply(concat.view())
    }

    fn ffn(&self, x: &Array2<f32>) -> Array2<f32> {
        let h = self.w1.apply(x.view()).mapv(gelu);
        self.w2.apply(h.view())
    }

    fn forward(&self, x: Array2<f32>, pre_norm: bool) -> Array2<f32> {
        if pre_norm {
            let x = &x + &self.attention(&self.ln1.apply(&x));
            &x + &self.ffn(&self.ln2.apply(&x))
        } else {
            let x = self.ln1.apply(&(&x + &self.attention(&x)));
            self.ln2.apply(&(&x + &self.ffn(&x)))
        }
    }
}

#[derive(Debug, Clone)]
struct Head {
    block: Block,
    out: Linear,
}

impl Head {
    fn forward(&self, x: Array2<f32>, pre_norm: bool) -> Array1<f32> {
        let h = self.block.forward(x, pre_norm);
        let pooled = h.mean_axis(Axis(0)).expect("window has frames");
        self.out.apply1(pooled.view())
    }
}

/// Sinusoidal position table: `PE[t, 2i] = sin(t / 10000^(2i/d))`,
/// `PE[t, 2i+1] = cos(t / 10000^(2i/d))`.
pub fn positional_encoding(n: usize, d: usize) -> Array2<f32> {
    Array2::from_shape_fn((n, d), |(t, j)| {
        let i2 = (j - j % 2) as f64;
        let angle = t as f64 / 10000f64.powf(i2 / d as f64);
        (if j % 2 == 0 { angle.sin() } else { angle.cos() }) as f32
    })
}

/// Network input for a window, one row per frame.
pub fn window_features(window: &Window) -> Array2<f32> {
    let s = window.sensors();
    let mut x = Array2::<f32>::zeros((window.len(), s * 12));
    for (t, frame) in window.frames().iter().enumerate() {
        let mut row = x.row_mut(t);
        for (i, r) in frame.sensors.iter().enumerate() {
            for k in 0..3 {
                row[i * 3 + k] = r.accel[k] as f32 / ACCEL_SCALE;
            }
            for (k, v) in r.orientation.row_major().iter().enumerate() {
                row[s * 3 + i * 9 + k] = *v as f32;
            }
        }
    }
    x
}

/// Raw head outputs before 6D decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct TicRaw {
    pub drift: Vec<f32>,
    pub offset: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct TicModel {
    arch: TicArch,
    flags: WeightFlags,
    embed: Linear,
    encoder: Vec<Block>,
    head_d: Head,
    head_o: Head,
}

impl TicModel {
    pub fn new(bundle: &WeightBundle) -> Result<Self> {
        let arch = bundle.validate()?;
        let head = |name: &str| -> Result<Head> {
            Ok(Head {
                block: Block::load(bundle, &format!("{name}.enc"), arch.heads)?,
                out: Linear::load(bundle, &format!("{name}.out.weight"), &format!("{name}.out.bias"))?,
            })
        };
        Ok(TicModel {
            arch,
            flags: bundle.flags,
            embed: Linear::load(bundle, "embed.weight", "embed.bias")?,
            encoder: (0..weights::ENCODER_BLOCKS)
                .map(|i| Block::load(bundle, &format!("enc{i}"), arch.heads))
                .collect::<Result<_>>()?,
            head_d: head("tpm_d")?,
            head_o: head("tpm_o")?,
        })
    }

    pub fn arch(&self) -> &TicArch {
        &self.arch
    }

    pub fn flags(&self) -> WeightFlags {
        self.flags
    }

    /// Runs the network on an `n × (S·12)` feature matrix.
    pub fn forward_features(&self, x: ArrayView2<f32>) -> Result<TicRaw> {
        if x.ncols() != self.arch.input_dim() {
            return Err(Error::ShapeMismatch {
                name: "window features".into(),
                expected: vec![x.nrows(), self.arch.input_dim()],
                actual: vec![x.nrows(), x.ncols()],
            });
        }
        if x.nrows() < 2 {
            return Err(Error::Config(format!("window needs at least 2 frames, got {}", x.nrows())));
        }
        let mut h = self.embed.apply(x);
        if self.flags.positional_encoding {
            h += &positional_encoding(h.nrows(), h.ncols());
        }
        for (i, block) in self.encoder.iter().enumerate() {
            h = block.forward(h, self.flags.pre_norm);
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure(format!("non-finite activation after encoder block {i}")));
            }
        }
        let drift = self.head_d.forward(h.clone(), self.flags.pre_norm).to_vec();
        let offset = self.head_o.forward(h, self.flags.pre_norm).to_vec();
        if drift.iter().chain(&offset).any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite head output".into()));
        }
        Ok(TicRaw { drift, offset })
    }

    pub fn forward(&self, window: &Window) -> Result<EstimateOut> {
        if window.sensors() != self.arch.sensors {
            return Err(Error::ShapeMismatch {
                name: "window sensors".into(),
                expected: vec![self.arch.sensors],
                actual: vec![window.sensors()],
            });
        }
        let raw = self.forward_features(window_features(window).view())?;
        let decode = |v: &[f32]| {
            let mut a = [0.0; 6];
            for (dst, src) in a.iter_mut().zip(v) {
                *dst = *src as f64;
            }
            mat_from_rot6d(&Rot6D(a))
        };
        let sensors = raw
            .drift
            .chunks(6)
            .zip(raw.offset.chunks(6))
            .map(|(d, o)| {
                Ok(SensorEstimate {
                    delta_drift: decode(d)?,
                    delta_offset: decode(o)?,
                    ..SensorEstimate::identity()
                })
            })
            .collect::<Result<_>>()?;
        Ok(EstimateOut { sensors, iterations: 0 })
    }
}

/// Learned estimator. The window is fed as given, after the known drift and
/// offset have been removed.
#[derive(Debug, Clone)]
pub struct TicEstimator {
    model: TicModel,
}

impl TicEstimator {
    pub fn new(bundle: &WeightBundle) -> Result<Self> {
        Ok(TicEstimator {
            model: TicModel::new(bundle)?,
        })
    }

    pub fn model(&self) -> &TicModel {
        &self.model
    }
}

impl Estimator for TicEstimator {
    fn name(&self) -> &str {
        "tic"
    }

    fn estimate(&self, input: &EstimateInput<'_>) -> Result<EstimateOut> {
        self.model.forward(input.window)
    }
}

/// Convenience wrapper: validate the bundle and run one window.
pub fn tic_forward(window: &Window, weights: &WeightBundle) -> Result<EstimateOut> {
    TicModel::new(weights)?.forward(window)
}
