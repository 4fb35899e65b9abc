//! Reference computations written without the library's own helpers, used
//! as oracles by the integration and acceptance tests.

#![allow(dead_code)]

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use rand::Rng;

use tic_core::estimator::tic::{Tensor, WeightBundle};
use tic_core::estimator::Window;
use tic_core::Rotation;

/// Angle between two rotations from their Frobenius distance:
/// `‖A − B‖_F = 2√2·sin(θ/2)`. Accurate for tiny angles, unlike `acos`.
pub fn frobenius_angle_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let d = (a - b).norm() / (2.0 * 2f64.sqrt());
    (2.0 * d.min(1.0).asin()).to_degrees()
}

pub fn angle_between(a: &Rotation, b: &Rotation) -> f64 {
    frobenius_angle_deg(a.matrix(), b.matrix())
}

/// Uniformly distributed rotation via a normalized Gaussian quaternion.
pub fn haar_rotation(rng: &mut impl Rng) -> Rotation {
    let mut g = || {
        // Box–Muller
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let q = UnitQuaternion::from_quaternion(Quaternion::new(g(), g(), g(), g()));
    Rotation::from_matrix_unchecked(*q.to_rotation_matrix().matrix())
}

/// `Rz(z)·Ry(y)·Rx(x)` written out element by element (degrees).
pub fn euler_by_hand(x: f64, y: f64, z: f64) -> Matrix3<f64> {
    let (sx, cx) = x.to_radians().sin_cos();
    let (sy, cy) = y.to_radians().sin_cos();
    let (sz, cz) = z.to_radians().sin_cos();
    Matrix3::new(
        cz * cy,
        cz * sy * sx - sz * cx,
        cz * sy * cx + sz * sx,
        sz * cy,
        sz * sy * sx + cz * cx,
        sz * sy * cx - cz * sx,
        -sy,
        cy * sx,
        cy * cx,
    )
}

// ---------------------------------------------------------------------------
// Transformer forward pass, plain f64 loops.

type Mat = Vec<Vec<f64>>;

fn tensor<'a>(w: &'a WeightBundle, name: &str) -> &'a Tensor {
    w.tensors.get(name).unwrap_or_else(|| panic!("tensor {name}"))
}

/// `y = x·Wᵀ + b` with `W` stored `[out, in]` row-major.
fn linear(x: &Mat, w: &Tensor, b: &Tensor) -> Mat {
    let (out, inp) = (w.shape[0], w.shape[1]);
    x.iter()
        .map(|row| {
            (0..out)
                .map(|o| {
                    let mut acc = b.data[o] as f64;
                    for i in 0..inp {
                        acc += w.data[o * inp + i] as f64 * row[i];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn layer_norm(x: &Mat, gamma: &Tensor, beta: &Tensor) -> Mat {
    x.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            row.iter()
                .enumerate()
                .map(|(j, v)| (v - mean) / (var + 1e-5).sqrt() * gamma.data[j] as f64 + beta.data[j] as f64)
                .collect()
        })
        .collect()
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

fn attention(w: &WeightBundle, p: &str, x: &Mat, heads: usize) -> Mat {
    let lin = |m: &str| {
        linear(
            x,
            tensor(w, &format!("{p}.attn.{m}.weight")),
            tensor(w, &format!("{p}.attn.{m}.bias")),
        )
    };
    let (q, k, v) = (lin("q"), lin("k"), lin("v"));
    let n = x.len();
    let d = x[0].len();
    let dh = d / heads;
    let mut concat = vec![vec![0.0; d]; n];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..n {
            let mut scores: Vec<f64> = (0..n)
                .map(|j| (0..dh).map(|c| q[i][off + c] * k[j][off + c]).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                z += *s;
            }
            for c in 0..dh {
                concat[i][off + c] = (0..n).map(|j| scores[j] / z * v[j][off + c]).sum();
            }
        }
    }
    linear(
        &concat,
        tensor(w, &format!("{p}.attn.out.weight")),
        tensor(w, &format!("{p}.attn.out.bias")),
    )
}

fn ffn(w: &WeightBundle, p: &str, x: &Mat) -> Mat {
    let h = linear(x, tensor(w, &format!("{p}.ffn.w1")), tensor(w, &format!("{p}.ffn.b1")));
    let h: Mat = h
        .into_iter()
        .map(|r| r.into_iter().map(|v| 0.5 * v * (1.0 + libm::erf(v / 2f64.sqrt()))).collect())
        .collect();
    linear(&h, tensor(w, &format!("{p}.ffn.w2")), tensor(w, &format!("{p}.ffn.b2")))
}

fn block(w: &WeightBundle, p: &str, x: &Mat, heads: usize, pre_norm: bool) -> Mat {
    let ln = |x: &Mat, which: &str| {
        layer_norm(
            x,
            tensor(w, &format!("{p}.{which}.gamma")),
            tensor(w, &format!("{p}.{which}.beta")),
        )
    };
    if pre_norm {
        let x = add(x, &attention(w, p, &ln(x, "ln1"), heads));
        add(&x, &ffn(w, p, &ln(&x, "ln2")))
    } else {
        let x = ln(&add(x, &attention(w, p, x, heads)), "ln1");
        ln(&add(&x, &ffn(w, p, &x)), "ln2")
    }
}

/// Per frame: every sensor's acceleration / 30, then every rotation row-major.
pub fn oracle_features(window: &Window) -> Mat {
    window
        .frames()
        .iter()
        .map(|f| {
            let mut row = Vec::new();
            for r in &f.sensors {
                row.extend(r.accel.iter().map(|a| a / 30.0));
            }
            for r in &f.sensors {
                let m = r.orientation.matrix();
                for i in 0..3 {
                    for j in 0..3 {
                        row.push(m[(i, j)]);
                    }
                }
            }
            row
        })
        .collect()
}

/// Raw (drift, offset) head outputs, `S·6` values each.
pub fn oracle_forward(w: &WeightBundle, features: &Mat) -> (Vec<f64>, Vec<f64>) {
    // f32 inputs, as the network sees them
    let x: Mat = features
        .iter()
        .map(|r| r.iter().map(|v| *v as f32 as f64).collect())
        .collect();
    let mut h = linear(&x, tensor(w, "embed.weight"), tensor(w, "embed.bias"));
    let d = h[0].len();
    if w.flags.positional_encoding {
        for (t, row) in h.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let freq = 1.0 / 10000f64.powf((2 * (j / 2)) as f64 / d as f64);
                let a = t as f64 * freq;
                *v += if j % 2 == 0 { a.sin() } else { a.cos() };
            }
        }
    }
    let heads = 8;
    for i in 0..3 {
        h = block(w, &format!("enc{i}"), &h, heads, w.flags.pre_norm);
    }
    let head = |name: &str| {
        let z = block(w, &format!("{name}.enc"), &h, heads, w.flags.pre_norm);
        let n = z.len() as f64;
        let pooled: Vec<f64> = (0..d).map(|j| z.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        linear(
            &vec![pooled],
            tensor(w, &format!("{name}.out.weight")),
            tensor(w, &format!("{name}.out.bias")),
        )
        .remove(0)
    };
    (head("tpm_d"), head("tpm_o"))
}
