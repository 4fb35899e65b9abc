//! Ground-truth drift and offset trajectories for simulation.
//!
//! Each (sensor, parameter) pair has a track of contiguous time segments.
//! A segment is either constant or a ramp about a fixed axis. The text form
//! is a `;`-separated list of entries:
//!
//! ```text
//! identity
//! <sensors>.<param>=const(<x>,<y>,<z>)
//! <sensors>.<param>=step(<t_s>,<x>,<y>,<z>)
//! <sensors>.<param>=ramp(<axis>,<deg_per_s>[,<start_s>])
//! ```
//!
//! `<sensors>` is an index, `all` or `nonroot`; `<param>` is `drift` or
//! `offset`; angles are XYZ Euler degrees; `<axis>` is `x`, `y` or `z`.
//! A step holds identity before `t_s`; a ramp holds identity before `start_s`.
//! Unmentioned pairs stay at identity.

use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::rotmath::{EulerXYZ, Rotation};
use crate::sensor_model::{CalibState, SensorCalib};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Drift,
    Offset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Index(usize),
    All,
    NonRoot,
}

impl Selector {
    fn sensors(&self, count: usize, root: usize) -> Result<Vec<usize>> {
        match *self {
            Selector::Index(i) if i < count => Ok(vec![i]),
            Selector::Index(i) => Err(Error::Schedule(format!("sensor {i} out of range for {count} sensors"))),
            Selector::All => Ok((0..count).collect()),
            Selector::NonRoot => Ok((0..count).filter(|&s| s != root).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Term {
    Const(Rotation),
    /// `about_axis(axis, rate·(t − segment start)) · base`.
    Ramp {
        base: Rotation,
        axis: Vector3<f64>,
        deg_per_s: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub term: Term,
}

impl Segment {
    pub fn new(start_s: f64, end_s: f64, term: Term) -> Self {
        Segment { start_s, end_s, term }
    }

    fn eval(&self, t: f64) -> Rotation {
        match self.term {
            Term::Const(r) => r,
            Term::Ramp { base, axis, deg_per_s } => Rotation::about_axis(&axis, deg_per_s * (t - self.start_s)) * base,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Track(Vec<Segment>);

impl Track {
    fn identity() -> Self {
        Track(vec![Segment::new(0.0, f64::INFINITY, Term::Const(Rotation::identity()))])
    }

    fn at(&self, t: f64) -> Option<Rotation> {
        self.0.iter().find(|s| t >= s.start_s && t < s.end_s).map(|s| s.eval(t))
    }

    /// First uncovered instant in `[0, duration]`, if any.
    fn gap(&self, duration: f64) -> Option<f64> {
        let mut covered = 0.0;
        let mut segs = self.0.clone();
        segs.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        for s in &segs {
            if covered > duration {
                return None;
            }
            if s.start_s > covered {
                return Some(covered);
            }
            covered = f64::max(covered, s.end_s);
        }
        (covered <= duration).then_some(covered)
    }
}

/// Per-sensor drift and offset as functions of time.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSchedule {
    drift: Vec<Track>,
    offset: Vec<Track>,
    root: usize,
}

impl DriftSchedule {
    pub fn identity(sensors: usize, root: usize) -> Self {
        DriftSchedule {
            drift: vec![Track::identity(); sensors],
            offset: vec![Track::identity(); sensors],
            root,
        }
    }

    pub fn sensors(&self) -> usize {
        self.drift.len()
    }

    /// Replaces the track of the selected sensors with explicit segments.
    pub fn set(&mut self, sel: Selector, param: Param, segments: Vec<Segment>) -> Result<&mut Self> {
        for s in &segments {
            if !(s.start_s >= 0.0 && s.end_s > s.start_s) || s.start_s.is_nan() {
                return Err(Error::Schedule(format!(
                    "segment [{}, {}) is empty or negative",
                    s.start_s, s.end_s
                )));
            }
        }
        for s in sel.sensors(self.sensors(), self.root)? {
            let track = match param {
                Param::Drift => &mut self.drift[s],
                Param::Offset => &mut self.offset[s],
            };
            *track = Track(segments.clone());
        }
        Ok(self)
    }

    /// Identity before `at_s`, `value` from then on.
    pub fn step(&mut self, sel: Selector, param: Param, at_s: f64, value: Rotation) -> Result<&mut Self> {
        let mut segs = vec![Segment::new(at_s.max(0.0), f64::INFINITY, Term::Const(value))];
        if at_s > 0.0 {
            segs.insert(0, Segment::new(0.0, at_s, Term::Const(Rotation::identity())));
        }
        self.set(sel, param, segs)
    }

    pub fn ramp(&mut self, sel: Selector, param: Param, axis: Vector3<f64>, deg_per_s: f64, start_s: f64) -> Result<&mut Self> {
        let term = Term::Ramp {
            base: Rotation::identity(),
            axis,
            deg_per_s,
        };
        let mut segs = vec![Segment::new(start_s.max(0.0), f64::INFINITY, term)];
        if start_s > 0.0 {
            segs.insert(0, Segment::new(0.0, start_s, Term::Const(Rotation::identity())));
        }
        self.set(sel, param, segs)
    }

    /// Errors if any track leaves part of `[0, duration_s]` uncovered.
    pub fn check_covers(&self, duration_s: f64) -> Result<()> {
        for (name, tracks) in [("drift", &self.drift), ("offset", &self.offset)] {
            for (s, track) in tracks.iter().enumerate() {
                if let Some(t) = track.gap(duration_s) {
                    return Err(Error::Schedule(format!("sensor {s} {name} is undefined at t={t} s")));
                }
            }
        }
        Ok(())
    }

    pub fn at(&self, t_s: f64) -> Result<Vec<SensorCalib>> {
        self.drift
            .iter()
            .zip(&self.offset)
            .enumerate()
            .map(|(s, (d, o))| {
                let undefined = || Error::Schedule(format!("sensor {s} is undefined at t={t_s} s"));
                Ok(SensorCalib::new(d.at(t_s).ok_or_else(undefined)?, o.at(t_s).ok_or_else(undefined)?))
            })
            .collect()
    }

    pub fn state_at(&self, t_s: f64) -> Result<CalibState> {
        Ok(CalibState::from_params(self.at(t_s)?))
    }

    /// Parses the text form for `sensors` sensors with root `root`.
    pub fn parse(text: &str, sensors: usize, root: usize) -> Result<Self> {
        let mut sched = DriftSchedule::identity(sensors, root);
        let mut seen: Vec<(usize, Param)> = Vec::new();
        for entry in text.split(';').map(str::trim).filter(|e| !e.is_empty()) {
            if entry == "identity" {
                continue;
            }
            let bad = |msg: &str| Error::Schedule(format!("{entry:?}: {msg}"));
            let (lhs, rhs) = entry.split_once('=').ok_or_else(|| bad("expected <sensors>.<param>=<term>"))?;
            let (sel, param) = lhs.trim().split_once('.').ok_or_else(|| bad("expected <sensors>.<param>"))?;
            let sel = match sel.trim() {
                "all" => Selector::All,
                "nonroot" => Selector::NonRoot,
                s => Selector::Index(s.parse().map_err(|_| bad("sensor must be an index, all or nonroot"))?),
            };
            let param = match param.trim() {
                "drift" => Param::Drift,
                "offset" => Param::Offset,
                _ => return Err(bad("parameter must be drift or offset")),
            };
            for s in sel.sensors(sensors, root)? {
                if seen.contains(&(s, param)) {
                    return Err(bad(&format!("sensor {s} is scheduled twice")));
                }
                seen.push((s, param));
            }

            let rhs = rhs.trim();
            let (name, args) = rhs
                .strip_suffix(')')
                .and_then(|r| r.split_once('('))
                .ok_or_else(|| bad("expected <term>(<args>)"))?;
            let args: Vec<&str> = args.split(',').map(str::trim).collect();
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(&format!("{s:?} is not a number")))
            };
            let euler = |a: &[&str]| -> Result<Rotation> {
                let e = EulerXYZ::new(num(a[0])?, num(a[1])?, num(a[2])?);
                if !e.in_range() {
                    return Err(bad("Euler angles out of range"));
                }
                Ok(e.to_rotation())
            };
            match (name.trim(), args.len()) {
                ("const", 3) => {
                    sched.step(sel, param, 0.0, euler(&args)?)?;
                }
                ("step", 4) => {
                    let at = num(args[0])?;
                    if at < 0.0 {
                        return Err(bad("step time must be >= 0"));
                    }
                    sched.step(sel, param, at, euler(&args[1..])?)?;
                }
                ("ramp", 2) | ("ramp", 3) => {
                    let axis = match args[0] {
                        "x" => Vector3::x(),
                        "y" => Vector3::y(),
                        "z" => Vector3::z(),
                        _ => return Err(bad("ramp axis must be x, y or z")),
                    };
                    let start = if args.len() == 3 { num(args[2])? } else { 0.0 };
                    if start < 0.0 {
                        return Err(bad("ramp start must be >= 0"));
                    }
                    sched.ramp(sel, param, axis, num(args[1])?, start)?;
                }
                _ => return Err(bad("unknown term or wrong argument count")),
            }
        }
        Ok(sched)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::Drift => "drift",
            Param::Offset => "offset",
        })
    }
}
