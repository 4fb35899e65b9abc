//! Motion sources and the key=value schedule shorthand accepted on the command line.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use tic_core::synth::{gen_motion, load_motion};
use tic_core::{MotionSequence, MotionSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum MotionSource {
    Active,
    Static,
    File(PathBuf),
}

impl std::str::FromStr for MotionSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gen:active" => Ok(MotionSource::Active),
            "gen:static" => Ok(MotionSource::Static),
            _ if s.starts_with("gen:") => Err(format!("unknown generator {s:?}; expected gen:active or gen:static")),
            _ => Ok(MotionSource::File(PathBuf::from(s))),
        }
    }
}

impl MotionSource {
    /// Generated sources produce `frames` frames at `rate_hz`; files are read as is.
    pub fn load(&self, frames: usize, rate_hz: f64, seed: u64) -> Result<MotionSequence> {
        let spec = |s: MotionSpec| MotionSpec { rate_hz, ..s };
        Ok(match self {
            MotionSource::Active => gen_motion(&spec(MotionSpec::active(frames)), seed)?,
            MotionSource::Static => gen_motion(&spec(MotionSpec::still(frames)), seed)?,
            MotionSource::File(p) => load_motion(p, rate_hz).with_context(|| format!("reading {}", p.display()))?,
        })
    }
}

/// Rewrites `ramp:`/`step:`/`const:` shorthand entries into the schedule grammar;
/// other entries pass through unchanged.
///
/// ```text
/// ramp:sensor=3,axis=y,rate=0.07[,start=0][,param=drift]
/// step:sensor=nonroot,t=10,x=0,y=25,z=0[,param=offset]
/// const:sensor=all,x=5,y=0,z=0
/// ```
pub fn expand_schedule(text: &str) -> Result<String> {
    let mut out = Vec::new();
    for entry in text.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let Some((kind, rest)) = entry.split_once(':') else {
            out.push(entry.to_string());
            continue;
        };
        if !matches!(kind, "ramp" | "step" | "const") {
            out.push(entry.to_string());
            continue;
        }
        let mut kv = std::collections::BTreeMap::new();
        for pair in rest.split(',').map(str::trim) {
            let (k, v) = pair
                .split_once('=')
                .with_context(|| format!("schedule entry {entry:?}: expected key=value, got {pair:?}"))?;
            if kv.insert(k.trim(), v.trim()).is_some() {
                bail!("schedule entry {entry:?}: duplicate key {k:?}");
            }
        }
        let mut take = |k: &str, default: Option<&'static str>| -> Result<String> {
            match kv.remove(k) {
                Some(v) => Ok(v.to_string()),
                None => default
                    .map(str::to_string)
                    .with_context(|| format!("schedule entry {entry:?}: missing {k}")),
            }
        };
        let sensor = take("sensor", None)?;
        let param = take("param", Some("drift"))?;
        let body = match kind {
            "ramp" => format!("ramp({},{},{})", take("axis", None)?, take("rate", None)?, take("start", Some("0"))?),
            "step" => format!("step({},{},{},{})", take("t", None)?, take("x", Some("0"))?, take("y", Some("0"))?, take("z", Some("0"))?),
            _ => format!("const({},{},{})", take("x", Some("0"))?, take("y", Some("0"))?, take("z", Some("0"))?),
        };
        if let Some(k) = kv.keys().next() {
            bail!("schedule entry {entry:?}: unknown key {k:?}");
        }
        out.push(format!("{sensor}.{param}={body}"));
    }
    Ok(out.join("; "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthand_expands() {
        assert_eq!(
            expand_schedule("ramp:sensor=3,axis=y,rate=0.07").unwrap(),
            "3.drift=ramp(y,0.07,0)"
        );
        assert_eq!(
            expand_schedule("step:sensor=nonroot,t=10,y=25,param=offset; identity").unwrap(),
            "nonroot.offset=step(10,0,25,0); identity"
        );
        assert_eq!(expand_schedule("1.drift=const(1,2,3)").unwrap(), "1.drift=const(1,2,3)");
        assert!(expand_schedule("ramp:sensor=3,axis=y").is_err());
        assert!(expand_schedule("ramp:sensor=3,axis=y,rate=1,speed=2").is_err());
    }

    #[test]
    fn motion_sources() {
        assert_eq!("gen:active".parse::<MotionSource>().unwrap(), MotionSource::Active);
        assert!("gen:walk".parse::<MotionSource>().is_err());
        assert_eq!(
            "m.jsonl".parse::<MotionSource>().unwrap(),
            MotionSource::File(PathBuf::from("m.jsonl"))
        );
    }
}
