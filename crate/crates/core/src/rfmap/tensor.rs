use std::io::{Read, Write};

use rayon::prelude::*;

use super::{antenna_gain, path_loss, GridSpec, RadioEnvironment};
use crate::error::{Error, Result};
use crate::objectives::{Configuration, POWER_MAX_DBM, POWER_MIN_DBM};

/// Downtilt settings covered by the precomputed tensor, in degrees.
pub const DEFAULT_DOWNTILTS: [u32; 11] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

const MAGIC: &[u8; 8] = b"CCOTENS\0";
const VERSION: u32 = 1;

/// Received power per sector, downtilt and grid cell at the reference
/// transmit power.
///
/// Values are laid out `[sector][downtilt][row][col]`. A linear-milliwatt
/// copy is kept alongside the dBm values so objective evaluation never calls
/// `powf` per cell.
#[derive(Clone, Debug)]
pub struct CoverageTensor {
    grid: GridSpec,
    downtilts: Vec<u32>,
    seed: u64,
    reference_power_dbm: f64,
    sectors: usize,
    rsrp_dbm: Vec<f64>,
    linear_mw: Vec<f64>,
}

impl CoverageTensor {
    /// Builds a tensor from raw values in `[sector][downtilt][row][col]` order.
    pub fn from_parts(
        grid: GridSpec,
        downtilts: Vec<u32>,
        seed: u64,
        reference_power_dbm: f64,
        sectors: usize,
        rsrp_dbm: Vec<f64>,
    ) -> Result<Self> {
        grid.validate()?;
        if sectors == 0 || downtilts.is_empty() {
            return Err(Error::InvalidArgument("tensor needs at least one sector and one downtilt".into()));
        }
        let expected = sectors * downtilts.len() * grid.cells();
        if rsrp_dbm.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "tensor has {} values, expected {expected}",
                rsrp_dbm.len()
            )));
        }
        if let Some(bad) = rsrp_dbm.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite RSRP value {bad}")));
        }
        let linear_mw = rsrp_dbm.par_iter().map(|&v| dbm_to_mw(v)).collect();
        Ok(Self { grid, downtilts, seed, reference_power_dbm, sectors, rsrp_dbm, linear_mw })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn downtilts(&self) -> &[u32] {
        &self.downtilts
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn reference_power_dbm(&self) -> f64 {
        self.reference_power_dbm
    }

    pub fn sectors(&self) -> usize {
        self.sectors
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    /// `[sectors, downtilts, rows, cols]`.
    pub fn dims(&self) -> [usize; 4] {
        [self.sectors, self.downtilts.len(), self.grid.rows(), self.grid.cols()]
    }

    pub fn values(&self) -> &[f64] {
        &self.rsrp_dbm
    }

    pub fn tilt_index(&self, downtilt_deg: u32) -> Option<usize> {
        self.downtilts.iter().position(|&t| t == downtilt_deg)
    }

    fn offset(&self, sector: usize, tilt_idx: usize) -> usize {
        (sector * self.downtilts.len() + tilt_idx) * self.cells()
    }

    /// One coverage map (dBm at reference power).
    pub fn slice(&self, sector: usize, tilt_idx: usize) -> &[f64] {
        let start = self.offset(sector, tilt_idx);
        &self.rsrp_dbm[start..start + self.cells()]
    }

    pub(crate) fn linear_slice(&self, sector: usize, tilt_idx: usize) -> &[f64] {
        let start = self.offset(sector, tilt_idx);
        &self.linear_mw[start..start + self.cells()]
    }

    /// Writes the little-endian binary layout: an 8-byte magic, a header of
    /// dimensions and metadata, then every value as `f32` in row-major order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let [s, t, rows, cols] = self.dims();
        let mut header = Vec::with_capacity(64 + 4 * t);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&VERSION.to_le_bytes());
        for dim in [s, t, rows, cols] {
            let dim = u32::try_from(dim).map_err(|_| Error::TensorFormat(format!("dimension {dim} overflows u32")))?;
            header.extend_from_slice(&dim.to_le_bytes());
        }
        for v in [self.grid.width_m, self.grid.height_m, self.grid.resolution_m] {
            header.extend_from_slice(&v.to_le_bytes());
        }
        header.extend_from_slice(&self.seed.to_le_bytes());
        header.extend_from_slice(&self.reference_power_dbm.to_le_bytes());
        for &tilt in &self.downtilts {
            header.extend_from_slice(&tilt.to_le_bytes());
        }
        w.write_all(&header)?;
        let mut payload = Vec::with_capacity(self.rsrp_dbm.len() * 4);
        for &v in &self.rsrp_dbm {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&payload)?;
        Ok(())
    }

    /// Reads a tensor written by [`write_to`](Self::write_to). Any length
    /// mismatch between header and payload is rejected.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::TensorFormat("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::TensorFormat(format!("unsupported version {version}")));
        }
        let (s, t, rows, cols) = (cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize);
        let grid = GridSpec { width_m: cur.f64()?, height_m: cur.f64()?, resolution_m: cur.f64()? };
        let seed = cur.u64()?;
        let reference_power_dbm = cur.f64()?;
        let downtilts = (0..t).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
        grid.validate().map_err(|e| Error::TensorFormat(e.to_string()))?;
        if grid.rows() != rows || grid.cols() != cols {
            return Err(Error::TensorFormat("grid spec disagrees with stored dimensions".into()));
        }
        let count = s
            .checked_mul(t)
            .and_then(|v| v.checked_mul(rows))
            .and_then(|v| v.checked_mul(cols))
            .ok_or_else(|| Error::TensorFormat("dimension overflow".into()))?;
        let payload_len = count.checked_mul(4).ok_or_else(|| Error::TensorFormat("dimension overflow".into()))?;
        let remaining = bytes.len() - cur.pos;
        if remaining != payload_len {
            return Err(Error::TensorFormat(format!(
                "payload is {remaining} bytes, header requires {payload_len}"
            )));
        }
        let values = cur.bytes[cur.pos..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::from_parts(grid, downtilts, seed, reference_power_dbm, s, values)
            .map_err(|e| Error::TensorFormat(e.to_string()))
    }

    /// Same tensor with every value rounded through `f32`, matching what a
    /// write/read round trip produces.
    pub fn quantized(&self) -> Self {
        let values = self.rsrp_dbm.iter().map(|&v| v as f32 as f64).collect();
        Self::from_parts(self.grid, self.downtilts.clone(), self.seed, self.reference_power_dbm, self.sectors, values)
            .expect("quantizing a valid tensor keeps it valid")
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::TensorFormat("truncated header".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub(crate) fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Evaluates every sector at every downtilt in [`DEFAULT_DOWNTILTS`].
pub fn precompute_coverage(env: &RadioEnvironment) -> CoverageTensor {
    let spec = env.spec();
    let grid = spec.grid;
    let (rows, cols) = (grid.rows(), grid.cols());
    let tilts = DEFAULT_DOWNTILTS.to_vec();
    let sectors = spec.antennas.len();

    let slices: Vec<Vec<f64>> = (0..sectors * tilts.len())
        .into_par_iter()
        .map(|k| {
            let (sector, tilt) = (k / tilts.len(), tilts[k % tilts.len()] as f64);
            let antenna = &spec.antennas[sector];
            let shadow = env.shadowing(sector);
            let [ax, ay, az] = antenna.position;
            let dh = az - spec.rx_height_m;
            let base = spec.reference_power_dbm + spec.link.offset_db();
            let mut out = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    let (x, y) = grid.cell_center(r, c);
                    let (dx, dy) = (x - ax, y - ay);
                    let d2 = dx.hypot(dy);
                    let bearing = dx.atan2(dy).to_degrees();
                    let elevation = dh.atan2(d2).to_degrees();
                    let gain = antenna_gain(antenna, bearing - antenna.azimuth_deg, elevation, tilt);
                    let loss = path_loss(d2.hypot(dh), &spec.pathloss);
                    out.push(base + gain - loss + shadow[r * cols + c]);
                }
            }
            out
        })
        .collect();

    CoverageTensor::from_parts(grid, tilts, spec.seed, spec.reference_power_dbm, sectors, slices.concat())
        .expect("precomputed tensor dimensions are consistent")
}

/// Per-sector RSRP maps (dBm) over a common grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RsrpStack {
    pub rows: usize,
    pub cols: usize,
    pub maps: Vec<Vec<f64>>,
}

impl RsrpStack {
    pub fn new(rows: usize, cols: usize, maps: Vec<Vec<f64>>) -> Result<Self> {
        if maps.iter().any(|m| m.len() != rows * cols) {
            return Err(Error::InvalidArgument("all sector maps must cover the grid".into()));
        }
        Ok(Self { rows, cols, maps })
    }

    pub fn sectors(&self) -> usize {
        self.maps.len()
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }
}

/// Selects each sector's downtilt slice and shifts it by the sector's power
/// offset from the reference power.
pub fn apply_configuration(tensor: &CoverageTensor, config: &Configuration) -> Result<RsrpStack> {
    let plan = tensor_plan(tensor, config)?;
    let maps = plan
        .iter()
        .enumerate()
        .map(|(sector, &(tilt_idx, offset))| tensor.slice(sector, tilt_idx).iter().map(|v| v + offset).collect())
        .collect();
    Ok(RsrpStack { rows: tensor.grid.rows(), cols: tensor.grid.cols(), maps })
}

/// Resolves `(tilt index, power offset dB)` per sector, validating the configuration.
pub(crate) fn tensor_plan(tensor: &CoverageTensor, config: &Configuration) -> Result<Vec<(usize, f64)>> {
    if config.len() != tensor.sectors {
        return Err(Error::InvalidConfiguration(format!(
            "configuration has {} sectors, tensor has {}",
            config.len(),
            tensor.sectors
        )));
    }
    config
        .settings()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if !(POWER_MIN_DBM..=POWER_MAX_DBM).contains(&s.power_dbm) {
                return Err(Error::InvalidConfiguration(format!("sector {i} power {} dBm out of range", s.power_dbm)));
            }
            let idx = tensor.tilt_index(s.downtilt_deg).ok_or_else(|| {
                Error::InvalidConfiguration(format!("sector {i} downtilt {} not in tensor", s.downtilt_deg))
            })?;
            Ok((idx, s.power_dbm - tensor.reference_power_dbm))
        })
        .collect()
}
