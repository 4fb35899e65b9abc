//! Binary training-set files.
//!
//! Little-endian layout:
//!
//! ```text
//! "TICD" | u32 version = 1 | u32 sensors | u32 n | u64 count
//! count × { n·S·(9 + 3) f32 readings | S·(6 + 6) f32 labels }
//! ```
//!
//! Readings are frame-major, then sensor, each a row-major rotation followed
//! by the acceleration. Labels per sensor are drift 6D then offset 6D.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Vector3;

use super::TrainingSample;
use crate::error::{Error, Result};
use crate::estimator::Window;
use crate::rotmath::{Rot6D, Rotation};
use crate::sensor_model::{ImuFrame, SensorReading};

pub const DATASET_MAGIC: [u8; 4] = *b"TICD";
pub const DATASET_VERSION: u32 = 1;
const HEADER_LEN: u64 = 4 + 4 + 4 + 4 + 8;

/// Orthonormality tolerance when turning f32 readings back into rotations.
const F32_ROTATION_TOLERANCE: f64 = 1e-5;

/// One sample exactly as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub readings: Vec<f32>,
    pub labels: Vec<f32>,
}

impl DatasetRecord {
    pub fn from_sample(sample: &TrainingSample) -> Self {
        let w = &sample.window;
        let mut readings = Vec::with_capacity(w.len() * w.sensors() * 12);
        for f in w.frames() {
            for r in &f.sensors {
                readings.extend(r.orientation.row_major().iter().map(|&v| v as f32));
                readings.extend(r.accel.iter().map(|&v| v as f32));
            }
        }
        let mut labels = Vec::with_capacity(w.sensors() * 12);
        for (d, o) in sample.drift.iter().zip(&sample.offset) {
            labels.extend(d.0.iter().map(|&v| v as f32));
            labels.extend(o.0.iter().map(|&v| v as f32));
        }
        DatasetRecord { readings, labels }
    }

    /// Decodes into a sample; rotations are re-projected onto SO(3) and
    /// frames are numbered from 0.
    pub fn to_sample(&self, sensors: usize, n: usize) -> Result<TrainingSample> {
        check_record_shape(self, sensors, n)?;
        let frames = self
            .readings
            .chunks_exact(sensors * 12)
            .enumerate()
            .map(|(t, chunk)| {
                let readings = chunk
                    .chunks_exact(12)
                    .map(|v| {
                        let rm: Vec<f64> = v[..9].iter().map(|&x| x as f64).collect();
                        let r = Rotation::from_row_major(&rm, F32_ROTATION_TOLERANCE)?;
                        Ok(SensorReading::new(r, Vector3::new(v[9] as f64, v[10] as f64, v[11] as f64)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ImuFrame::new(t as u64, readings))
            })
            .collect::<Result<Vec<_>>>()?;
        let six = |v: &[f32]| Rot6D(std::array::from_fn(|i| v[i] as f64));
        let (drift, offset) = self.labels.chunks_exact(12).map(|c| (six(&c[..6]), six(&c[6..]))).unzip();
        Ok(TrainingSample {
            window: Window::new(frames)?,
            drift,
            offset,
        })
    }
}

fn check_record_shape(rec: &DatasetRecord, sensors: usize, n: usize) -> Result<()> {
    if rec.readings.len() != n * sensors * 12 {
        return Err(Error::LengthMismatch {
            field: "record readings",
            expected: n * sensors * 12,
            actual: rec.readings.len(),
        });
    }
    if rec.labels.len() != sensors * 12 {
        return Err(Error::LengthMismatch {
            field: "record labels",
            expected: sensors * 12,
            actual: rec.labels.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sensors: usize,
    pub n: usize,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn new(sensors: usize, n: usize) -> Self {
        Dataset {
            sensors,
            n,
            records: Vec::new(),
        }
    }

    pub fn from_samples(sensors: usize, n: usize, samples: &[TrainingSample]) -> Result<Self> {
        let records = samples.iter().map(DatasetRecord::from_sample).collect::<Vec<_>>();
        for r in &records {
            check_record_shape(r, sensors, n)?;
        }
        Ok(Dataset { sensors, n, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Appends records to a dataset file and fixes up the count on `finish`.
pub struct DatasetWriter<W: Write + Seek> {
    out: W,
    sensors: usize,
    n: usize,
    count: u64,
}

impl DatasetWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, sensors: usize, n: usize) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), sensors, n)
    }
}

impl<W: Write + Seek> DatasetWriter<W> {
    pub fn new(mut out: W, sensors: usize, n: usize) -> Result<Self> {
        let dim = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit the file format")))
        };
        out.write_all(&DATASET_MAGIC)?;
        out.write_u32::<LittleEndian>(DATASET_VERSION)?;
        out.write_u32::<LittleEndian>(dim(sensors, "sensor count")?)?;
        out.write_u32::<LittleEndian>(dim(n, "window length")?)?;
        out.write_u64::<LittleEndian>(0)?;
        Ok(DatasetWriter {
            out,
            sensors,
            n,
            count: 0,
        })
    }

    pub fn write_record(&mut self, rec: &DatasetRecord) -> Result<()> {
        check_record_shape(rec, self.sensors, self.n)?;
        if rec.readings.iter().chain(&rec.labels).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("record {}", self.count)));
        }
        for &v in rec.readings.iter().chain(&rec.labels) {
            self.out.write_f32::<LittleEndian>(v)?;
        }
        self.count += 1;
        Ok(())
    }

    pub fn write_sample(&mut self, sample: &TrainingSample) -> Result<()> {
        self.write_record(&DatasetRecord::from_sample(sample))
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Writes the final count into the header and returns the sink.
    pub fn finish(mut self) -> Result<W> {
        self.out.seek(SeekFrom::Start(HEADER_LEN - 8))?;
        self.out.write_u64::<LittleEndian>(self.count)?;
        self.out.seek(SeekFrom::End(0))?;
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_dataset_to<W: Write + Seek>(out: W, ds: &Dataset) -> Result<W> {
    let mut w = DatasetWriter::new(out, ds.sensors, ds.n)?;
    for r in &ds.records {
        w.write_record(r)?;
    }
    w.finish()
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    write_dataset_to(BufWriter::new(File::create(path)?), ds)?;
    Ok(())
}

fn eof_as_truncated(what: impl Into<String>) -> impl FnOnce(io::Error) -> Error {
    let what = what.into();
    move |e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::truncated(what)
        } else {
            Error::Io(e)
        }
    }
}

pub fn read_dataset_from(mut r: impl Read) -> Result<Dataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(eof_as_truncated("header"))?;
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic {
            expected: DATASET_MAGIC,
            found: magic,
        });
    }
    let version = r.read_u32::<LittleEndian>().map_err(eof_as_truncated("header"))?;
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let sensors = r.read_u32::<LittleEndian>().map_err(eof_as_truncated("header"))? as usize;
    let n = r.read_u32::<LittleEndian>().map_err(eof_as_truncated("header"))? as usize;
    let count = r.read_u64::<LittleEndian>().map_err(eof_as_truncated("header"))?;

    let reading_len = n * sensors * 12;
    let label_len = sensors * 12;
    let mut records = Vec::new();
    for i in 0..count {
        let mut read_block = |len: usize, what: &str| -> Result<Vec<f32>> {
            let mut v = vec![0f32; len];
            r.read_f32_into::<LittleEndian>(&mut v)
                .map_err(eof_as_truncated(format!("record {i} ({what})")))?;
            if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("record {i}, {what} value {pos}")));
            }
            Ok(v)
        };
        let readings = read_block(reading_len, "readings")?;
        let labels = read_block(label_len, "labels")?;
        records.push(DatasetRecord { readings, labels });
    }
    Ok(Dataset { sensors, n, records })
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from_open(e, path))?;
    read_dataset_from(BufReader::new(file))
}
