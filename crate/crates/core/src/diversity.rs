//! Rotation diversity: how many cells of a 15° Euler-angle grid a sequence of
//! orientations visits, and the per-sensor threshold that gates calibration
//! updates on it.

use crate::error::{Error, Result};
use crate::rotmath::{euler_from_mat, EulerXYZ, Rotation};

pub const BIN_DEG: f64 = 15.0;
pub const BINS_X: usize = 24;
pub const BINS_Y: usize = 12;
pub const BINS_Z: usize = 24;
pub const GRID_CELLS: usize = BINS_X * BINS_Y * BINS_Z;

/// Default thresholds in sensor layout order.
pub const DEFAULT_THRESHOLDS: [usize; 6] = [30, 50, 30, 30, 25, 15];

pub type Cell = (usize, usize, usize);

fn bin(angle: f64, lower: f64, bins: usize) -> usize {
    let idx = ((angle - lower) / BIN_DEG).floor();
    if idx <= 0.0 {
        0
    } else {
        (idx as usize).min(bins - 1)
    }
}

/// Grid cell of a rotation; bins are lower-inclusive and the top edge is
/// clamped into the last bin.
pub fn euler_cell(r: &Rotation) -> Cell {
    cell_of_euler(&euler_from_mat(r))
}

/// Grid cell of a set of Euler angles (degrees).
pub fn cell_of_euler(e: &EulerXYZ) -> Cell {
    (
        bin(e.x, -180.0, BINS_X),
        bin(e.y, -90.0, BINS_Y),
        bin(e.z, -180.0, BINS_Z),
    )
}

fn flat(cell: Cell) -> usize {
    (cell.0 * BINS_Y + cell.1) * BINS_Z + cell.2
}

/// Occupancy counts over the 24×12×24 grid.
#[derive(Clone)]
pub struct EulerGrid {
    counts: Vec<u32>,
    occupied: usize,
    total: usize,
}

impl Default for EulerGrid {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for EulerGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EulerGrid")
            .field("occupied", &self.occupied)
            .field("total", &self.total)
            .finish()
    }
}

impl EulerGrid {
    pub fn new() -> Self {
        EulerGrid {
            counts: vec![0; GRID_CELLS],
            occupied: 0,
            total: 0,
        }
    }

    pub fn add(&mut self, r: &Rotation) {
        let c = &mut self.counts[flat(euler_cell(r))];
        if *c == 0 {
            self.occupied += 1;
        }
        *c += 1;
        self.total += 1;
    }

    pub fn count(&self, cell: Cell) -> u32 {
        self.counts[flat(cell)]
    }

    /// Number of occupied cells.
    pub fn diversity(&self) -> usize {
        self.occupied
    }

    /// Number of rotations accumulated.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn clear(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.occupied = 0;
        self.total = 0;
    }
}

/// Number of distinct grid cells visited by `seq`.
pub fn rotation_diversity<'a, I>(seq: I) -> Result<usize>
where
    I: IntoIterator<Item = &'a Rotation>,
{
    let mut grid = EulerGrid::new();
    for r in seq {
        grid.add(r);
    }
    if grid.total() == 0 {
        return Err(Error::EmptySequence);
    }
    Ok(grid.diversity())
}

/// Per-sensor rotation diversity thresholds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerConfig {
    pub thresholds: Vec<usize>,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        TriggerConfig {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

impl TriggerConfig {
    pub fn new(thresholds: Vec<usize>) -> Result<Self> {
        if thresholds.iter().any(|&t| t < 1) {
            return Err(Error::Config("trigger thresholds must be >= 1".into()));
        }
        Ok(TriggerConfig { thresholds })
    }

    pub fn uniform(sensors: usize, threshold: usize) -> Result<Self> {
        Self::new(vec![threshold; sensors])
    }

    /// A trigger that never fires.
    pub fn disabled(sensors: usize) -> Self {
        TriggerConfig {
            thresholds: vec![usize::MAX; sensors],
        }
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// `rd > T_R[sensor]`.
pub fn should_update(rd: usize, sensor: usize, cfg: &TriggerConfig) -> Result<bool> {
    let threshold = cfg.thresholds.get(sensor).ok_or(Error::SensorOutOfRange {
        index: sensor,
        sensors: cfg.len(),
    })?;
    Ok(rd > *threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotmath::mat_from_euler;

    #[test]
    fn cell_examples() {
        assert_eq!(euler_cell(&Rotation::identity()), (12, 6, 12));
        assert_eq!(cell_of_euler(&EulerXYZ::new(180.0, 90.0, 180.0)), (23, 11, 23));
        assert_eq!(cell_of_euler(&EulerXYZ::new(-180.0, -90.0, -180.0)), (0, 0, 0));
        assert_eq!(bin(14.999, 0.0, BINS_X), 0);
        assert_eq!(bin(15.0, 0.0, BINS_X), 1);
        // y = -90 is gimbal-locked; x is pinned to 0, so only y and z are checked.
        let c = euler_cell(&mat_from_euler(EulerXYZ::new(0.0, -90.0, -180.0)));
        assert_eq!(c.1, 0);
    }

    #[test]
    fn diversity_examples() {
        let id = vec![Rotation::identity(); 256];
        assert_eq!(rotation_diversity(&id).unwrap(), 1);

        let two = [Rotation::rx(0.0), Rotation::rx(20.0), Rotation::rx(0.0)];
        assert_eq!(euler_cell(&two[0]), (12, 6, 12));
        assert_eq!(euler_cell(&two[1]), (13, 6, 12));
        assert_eq!(rotation_diversity(&two).unwrap(), 2);

        let empty: Vec<Rotation> = Vec::new();
        assert!(matches!(rotation_diversity(&empty), Err(Error::EmptySequence)));
    }

    #[test]
    fn grid_counts_track_total() {
        let mut g = EulerGrid::new();
        g.add(&Rotation::identity());
        g.add(&Rotation::identity());
        g.add(&Rotation::rz(40.0));
        assert_eq!(g.total(), 3);
        assert_eq!(g.diversity(), 2);
        assert_eq!(g.count((12, 6, 12)), 2);
        g.clear();
        assert_eq!((g.total(), g.diversity()), (0, 0));
    }

    #[test]
    fn trigger_is_strict() {
        let cfg = TriggerConfig::default();
        assert!(!should_update(30, 0, &cfg).unwrap());
        assert!(should_update(31, 0, &cfg).unwrap());
        assert!(should_update(16, 5, &cfg).unwrap());
        assert!(!should_update(15, 5, &cfg).unwrap());
        assert!(should_update(1, 6, &cfg).is_err());
        assert!(!should_update(GRID_CELLS, 0, &TriggerConfig::disabled(6)).unwrap());
        assert!(TriggerConfig::new(vec![0, 3]).is_err());
    }
}
