//! Named f32 tensors for the calibration transformer, and their file format.
//!
//! ```text
//! "TICW" | u32 version = 1 | u8 flags | u32 tensor count
//! count × { u16 name length | name (UTF-8) | u8 rank | u32 dims[rank] | f32 data }
//! ```
//!
//! All integers and floats are little-endian. Flag bit 0 enables the
//! sinusoidal positional encoding, bit 1 selects pre-norm encoder blocks.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: [u8; 4] = *b"TICW";
pub const WEIGHTS_VERSION: u32 = 1;

pub const FLAG_POSITIONAL: u8 = 0b01;
pub const FLAG_PRE_NORM: u8 = 0b10;

/// Number of attention heads in every encoder block.
pub const HEADS: usize = 8;
/// Shared encoder depth.
pub const ENCODER_BLOCKS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightFlags {
    pub positional_encoding: bool,
    pub pre_norm: bool,
}

impl Default for WeightFlags {
    fn default() -> Self {
        WeightFlags {
            positional_encoding: true,
            pre_norm: true,
        }
    }
}

impl WeightFlags {
    pub fn bits(&self) -> u8 {
        ((self.positional_encoding as u8) * FLAG_POSITIONAL) | ((self.pre_norm as u8) * FLAG_PRE_NORM)
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits & !(FLAG_POSITIONAL | FLAG_PRE_NORM) != 0 {
            return Err(Error::Config(format!("unknown weight flags {bits:#04x}")));
        }
        Ok(WeightFlags {
            positional_encoding: bits & FLAG_POSITIONAL != 0,
            pre_norm: bits & FLAG_PRE_NORM != 0,
        })
    }
}

/// Layer sizes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TicArch {
    pub sensors: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn: usize,
}

impl TicArch {
    pub fn new(sensors: usize) -> Self {
        TicArch {
            sensors,
            d_model: 256,
            heads: HEADS,
            ffn: 512,
        }
    }

    /// Per-frame feature width: S·3 accelerations then S·9 rotation entries.
    pub fn input_dim(&self) -> usize {
        self.sensors * 12
    }

    pub fn output_dim(&self) -> usize {
        self.sensors * 6
    }

    /// Every required tensor name with its shape (`[out, in]` for weights).
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (d, f) = (self.d_model, self.ffn);
        let mut v = vec![
            ("embed.weight".to_string(), vec![d, self.input_dim()]),
            ("embed.bias".to_string(), vec![d]),
        ];
        let mut block = |p: &str| {
            for m in ["q", "k", "v", "out"] {
                v.push((format!("{p}.attn.{m}.weight"), vec![d, d]));
                v.push((format!("{p}.attn.{m}.bias"), vec![d]));
            }
            for ln in ["ln1", "ln2"] {
                v.push((format!("{p}.{ln}.gamma"), vec![d]));
                v.push((format!("{p}.{ln}.beta"), vec![d]));
            }
            v.push((format!("{p}.ffn.w1"), vec![f, d]));
            v.push((format!("{p}.ffn.b1"), vec![f]));
            v.push((format!("{p}.ffn.w2"), vec![d, f]));
            v.push((format!("{p}.ffn.b2"), vec![d]));
        };
        for i in 0..ENCODER_BLOCKS {
            block(&format!("enc{i}"));
        }
        block("tpm_d.enc");
        block("tpm_o.enc");
        for h in ["tpm_d", "tpm_o"] {
            v.push((format!("{h}.out.weight"), vec![self.output_dim(), d]));
            v.push((format!("{h}.out.bias"), vec![self.output_dim()]));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                field: "tensor data",
                expected,
                actual: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }
}

/// SplitMix64 stream used for seeded weight initialization.
///
/// Each draw advances the state by `0x9E3779B97F4A7C15` and mixes it with
/// the standard SplitMix64 finalizer; the top 24 bits give a uniform value
/// `u = bits / 2^24` in [0, 1), mapped to `2u - 1` in [-1, 1).
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn next_signed(&mut self) -> f32 {
        let u = (self.next_u64() >> 40) as f32 / (1u32 << 24) as f32;
        2.0 * u - 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    pub flags: WeightFlags,
    pub tensors: BTreeMap<String, Tensor>,
}

impl WeightBundle {
    pub fn new(flags: WeightFlags) -> Self {
        WeightBundle {
            flags,
            tensors: BTreeMap::new(),
        }
    }

    /// Deterministic pseudo-random weights.
    ///
    /// Tensors are filled in lexicographic name order from one [`SplitMix64`]
    /// stream, element by element in row-major order:
    /// - `*.weight`, `*.w1`, `*.w2`: `u / sqrt(fan_in)` with `fan_in` the last dimension
    /// - `*.gamma`: `1 + 0.1·u`
    /// - `*.beta`: `0.1·u`
    /// - biases: `0.02·u`
    pub fn seeded(seed: u64, arch: &TicArch, flags: WeightFlags) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut shapes = arch.tensor_shapes();
        shapes.sort_by(|a, b| a.0.cmp(&b.0));
        let tensors = shapes
            .into_iter()
            .map(|(name, shape)| {
                let len: usize = shape.iter().product();
                let fan_in = *shape.last().unwrap_or(&1) as f32;
                let data = (0..len)
                    .map(|_| {
                        let u = rng.next_signed();
                        if name.ends_with(".weight") || name.ends_with(".w1") || name.ends_with(".w2") {
                            u / fan_in.sqrt()
                        } else if name.ends_with(".gamma") {
                            1.0 + 0.1 * u
                        } else if name.ends_with(".beta") {
                            0.1 * u
                        } else {
                            0.02 * u
                        }
                    })
                    .collect();
                (name, Tensor { shape, data })
            })
            .collect();
        WeightBundle { flags, tensors }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors.get(name).ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    /// Infers the architecture and checks every required tensor.
    pub fn validate(&self) -> Result<TicArch> {
        let embed = self.get("embed.weight")?;
        let w1 = self.get("enc0.ffn.w1")?;
        if embed.shape.len() != 2 || embed.shape[1] == 0 || embed.shape[1] % 12 != 0 || w1.shape.len() != 2 {
            return Err(Error::ShapeMismatch {
                name: "embed.weight".into(),
                expected: vec![embed.shape.first().copied().unwrap_or(0), 72],
                actual: embed.shape.clone(),
            });
        }
        let arch = TicArch {
            sensors: embed.shape[1] / 12,
            d_model: embed.shape[0],
            heads: HEADS,
            ffn: w1.shape[0],
        };
        if arch.d_model == 0 || arch.d_model % HEADS != 0 || arch.ffn == 0 {
            return Err(Error::Config(format!(
                "model width {} must be a positive multiple of {HEADS} and FFN width {} positive",
                arch.d_model, arch.ffn
            )));
        }
        for (name, shape) in arch.tensor_shapes() {
            let t = self.get(&name)?;
            if t.shape != shape {
                return Err(Error::ShapeMismatch {
                    name,
                    expected: shape,
                    actual: t.shape.clone(),
                });
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("tensor {name:?}")));
            }
        }
        Ok(arch)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&WEIGHTS_MAGIC)?;
        w.write_u32::<LittleEndian>(WEIGHTS_VERSION)?;
        w.write_u8(self.flags.bits())?;
        w.write_u32::<LittleEndian>(self.tensors.len() as u32)?;
        for (name, t) in &self.tensors {
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::Config(format!("tensor name too long: {name:?}")))?;
            let rank = u8::try_from(t.shape.len())
                .map_err(|_| Error::Config(format!("tensor {name:?} has too many dimensions")))?;
            w.write_u16::<LittleEndian>(name_len)?;
            w.write_all(name.as_bytes())?;
            w.write_u8(rank)?;
            for &d in &t.shape {
                let d = u32::try_from(d).map_err(|_| Error::Config(format!("dimension {d} too large")))?;
                w.write_u32::<LittleEndian>(d)?;
            }
            for &v in &t.data {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a weight file without checking it against the architecture.
    pub fn read_unvalidated(mut r: impl Read) -> Result<Self> {
        fn trunc(what: String) -> impl FnOnce(io::Error) -> Error {
            move |e| {
                if e.kind() == io::ErrorKind::UnexpectedEof {
                    Error::truncated(what)
                } else {
                    Error::Io(e)
                }
            }
        }
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(trunc("header".into()))?;
        if magic != WEIGHTS_MAGIC {
            return Err(Error::BadMagic {
                expected: WEIGHTS_MAGIC,
                found: magic,
            });
        }
        let version = r.read_u32::<LittleEndian>().map_err(trunc("header".into()))?;
        if version != WEIGHTS_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let flags = WeightFlags::from_bits(r.read_u8().map_err(trunc("header".into()))?)?;
        let count = r.read_u32::<LittleEndian>().map_err(trunc("header".into()))?;
        let mut bundle = WeightBundle::new(flags);
        for i in 0..count {
            let len = r.read_u16::<LittleEndian>().map_err(trunc(format!("tensor {i} name")))? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name).map_err(trunc(format!("tensor {i} name")))?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Config(format!("tensor {i} name is not UTF-8")))?;
            let rank = r.read_u8().map_err(trunc(format!("tensor {name:?}")))? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.read_u32::<LittleEndian>().map_err(trunc(format!("tensor {name:?}")))? as usize);
            }
            let mut data = vec![0f32; shape.iter().product()];
            r.read_f32_into::<LittleEndian>(&mut data)
                .map_err(trunc(format!("tensor {name:?} data")))?;
            bundle.tensors.insert(name, Tensor { shape, data });
        }
        Ok(bundle)
    }

    /// Parses and validates a weight file.
    pub fn read_from(r: impl Read) -> Result<Self> {
        let bundle = Self::read_unvalidated(r)?;
        bundle.validate()?;
        Ok(bundle)
    }
}

pub fn save_weights(bundle: &WeightBundle, path: impl AsRef<Path>) -> Result<()> {
    bundle.write_to(BufWriter::new(File::create(path)?))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightBundle> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from_open(e, path))?;
    WeightBundle::read_from(BufReader::new(file))
}
