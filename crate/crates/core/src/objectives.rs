//! Serving-sector attachment, interference and the two coverage objectives.
//!
//! Both objectives are sums over grid cells of a logistic function centred on
//! a threshold, so they behave like soft counts of badly covered cells:
//!
//! * under-coverage: `sigma((gamma_w - r_serving) / T)`
//! * over-coverage: `sigma((I - r_serving + gamma_o) / T)`, where `I` is the
//!   non-serving power summed in milliwatts and expressed in dBm.
//!
//! Both are minimized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rfmap::{apply_configuration, CoverageTensor, RsrpStack};

pub const POWER_MIN_DBM: f64 = 30.0;
pub const POWER_MAX_DBM: f64 = 50.0;
pub const MAX_DOWNTILT_DEG: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorSetting {
    pub downtilt_deg: u32,
    pub power_dbm: f64,
}

/// Joint downtilt and transmit power for every sector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    settings: Vec<SectorSetting>,
}

impl Configuration {
    pub fn new(settings: Vec<SectorSetting>) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::InvalidConfiguration("no sectors".into()));
        }
        for (i, s) in settings.iter().enumerate() {
            if s.downtilt_deg > MAX_DOWNTILT_DEG {
                return Err(Error::InvalidConfiguration(format!("sector {i} downtilt {} > 10", s.downtilt_deg)));
            }
            if !(POWER_MIN_DBM..=POWER_MAX_DBM).contains(&s.power_dbm) {
                return Err(Error::InvalidConfiguration(format!(
                    "sector {i} power {} dBm outside [30, 50]",
                    s.power_dbm
                )));
            }
        }
        Ok(Self { settings })
    }

    /// Every sector at the same downtilt and power.
    pub fn uniform(sectors: usize, downtilt_deg: u32, power_dbm: f64) -> Result<Self> {
        Self::new(vec![SectorSetting { downtilt_deg, power_dbm }; sectors])
    }

    pub fn settings(&self) -> &[SectorSetting] {
        &self.settings
    }

    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    /// Unit-cube encoding: all downtilts (`tilt / 10`) followed by all powers
    /// (`(p - 30) / 20`).
    pub fn to_unit(&self) -> Vec<f64> {
        let tilts = self.settings.iter().map(|s| s.downtilt_deg as f64 / MAX_DOWNTILT_DEG as f64);
        let powers = self.settings.iter().map(|s| (s.power_dbm - POWER_MIN_DBM) / (POWER_MAX_DBM - POWER_MIN_DBM));
        tilts.chain(powers).collect()
    }

    /// Inverse of [`to_unit`](Self::to_unit). Coordinates are clamped to
    /// `[0, 1]` and downtilts rounded half-up to whole degrees.
    pub fn from_unit(u: &[f64]) -> Result<Self> {
        if u.is_empty() || !u.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("unit vector length {} is not 2 x sectors", u.len())));
        }
        let n = u.len() / 2;
        let settings = (0..n)
            .map(|i| {
                let t = u[i].clamp(0.0, 1.0);
                let p = u[n + i].clamp(0.0, 1.0);
                SectorSetting {
                    downtilt_deg: (t * MAX_DOWNTILT_DEG as f64 + 0.5).floor() as u32,
                    power_dbm: POWER_MIN_DBM + p * (POWER_MAX_DBM - POWER_MIN_DBM),
                }
            })
            .collect();
        Self::new(settings)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub gamma_w_dbm: f64,
    pub gamma_o_db: f64,
    pub sigmoid_temperature_db: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { gamma_w_dbm: -110.0, gamma_o_db: 6.0, sigmoid_temperature_db: 1.0 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigmoid_temperature_db > 0.0) {
            return Err(Error::InvalidArgument("sigmoid temperature must be positive".into()));
        }
        if !self.gamma_w_dbm.is_finite() || !self.gamma_o_db.is_finite() {
            return Err(Error::InvalidArgument("thresholds must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttachmentGrid {
    pub serving: Vec<usize>,
    pub serving_rsrp_dbm: Vec<f64>,
}

/// Objective values for one configuration. Both objectives are minimized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePair {
    pub under_cov: f64,
    pub over_cov: f64,
    pub under_pct: f64,
    pub over_pct: f64,
    pub cells: usize,
}

impl ObjectivePair {
    /// `(under, over)` divided by the cell count, each in `[0, 1]`.
    pub fn normalized(&self) -> [f64; 2] {
        let n = self.cells as f64;
        [self.under_cov / n, self.over_cov / n]
    }
}

/// One black-box evaluation as recorded by every optimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub config: Configuration,
    pub objectives: ObjectivePair,
    /// Scalarization weight of the run that produced it, if any.
    pub lambda: Option<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-cell strongest sector; ties go to the lowest index.
pub fn attach(stack: &RsrpStack) -> Result<AttachmentGrid> {
    let first = stack.maps.first().ok_or_else(|| Error::InvalidArgument("empty RSRP stack".into()))?;
    let mut serving = vec![0usize; first.len()];
    let mut best = first.clone();
    for (s, map) in stack.maps.iter().enumerate().skip(1) {
        for (cell, &v) in map.iter().enumerate() {
            if v > best[cell] {
                best[cell] = v;
                serving[cell] = s;
            }
        }
    }
    Ok(AttachmentGrid { serving, serving_rsrp_dbm: best })
}

fn require_interferers(stack: &RsrpStack) -> Result<()> {
    if stack.sectors() < 2 {
        return Err(Error::InvalidArgument("interference needs at least two sectors".into()));
    }
    Ok(())
}

/// Non-serving power per cell, summed in milliwatts and returned in dBm.
pub fn interference_db(stack: &RsrpStack, attachment: &AttachmentGrid) -> Result<Vec<f64>> {
    require_interferers(stack)?;
    let mut total = vec![0.0f64; stack.cells()];
    for (s, map) in stack.maps.iter().enumerate() {
        for (cell, &v) in map.iter().enumerate() {
            if attachment.serving[cell] != s {
                total[cell] += 10f64.powf(v / 10.0);
            }
        }
    }
    Ok(total.into_iter().map(|mw| 10.0 * mw.log10()).collect())
}

pub fn under_coverage(attachment: &AttachmentGrid, thresholds: &Thresholds) -> f64 {
    let t = thresholds.sigmoid_temperature_db;
    attachment.serving_rsrp_dbm.iter().map(|&r| sigmoid((thresholds.gamma_w_dbm - r) / t)).sum()
}

pub fn over_coverage(stack: &RsrpStack, attachment: &AttachmentGrid, thresholds: &Thresholds) -> Result<f64> {
    let interference = interference_db(stack, attachment)?;
    let t = thresholds.sigmoid_temperature_db;
    Ok(interference
        .iter()
        .zip(&attachment.serving_rsrp_dbm)
        .map(|(&i, &r)| sigmoid((i - r + thresholds.gamma_o_db) / t))
        .sum())
}

/// Hard-threshold fractions `(under, over)`; a cell may count in both.
pub fn coverage_percentages(
    stack: &RsrpStack,
    attachment: &AttachmentGrid,
    thresholds: &Thresholds,
) -> Result<(f64, f64)> {
    let interference = interference_db(stack, attachment)?;
    let n = attachment.serving_rsrp_dbm.len() as f64;
    let under = attachment.serving_rsrp_dbm.iter().filter(|&&r| r < thresholds.gamma_w_dbm).count();
    let over = interference
        .iter()
        .zip(&attachment.serving_rsrp_dbm)
        .filter(|(&i, &r)| i - r + thresholds.gamma_o_db > 0.0)
        .count();
    Ok((under as f64 / n, over as f64 / n))
}

/// Hard-threshold class of every cell, as drawn in coverage rasters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellClass {
    pub under: bool,
    pub over: bool,
}

pub fn classify_cells(stack: &RsrpStack, thresholds: &Thresholds) -> Result<Vec<CellClass>> {
    let attachment = attach(stack)?;
    let interference = interference_db(stack, &attachment)?;
    Ok(interference
        .iter()
        .zip(&attachment.serving_rsrp_dbm)
        .map(|(&i, &r)| CellClass { under: r < thresholds.gamma_w_dbm, over: i - r + thresholds.gamma_o_db > 0.0 })
        .collect())
}

/// `lambda * under + (1 - lambda) * over`.
pub fn scalarize(pair: &ObjectivePair, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(lambda * pair.under_cov + (1.0 - lambda) * pair.over_cov)
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// Objectives of the stack produced by [`apply_configuration`], computed
/// through the modular path. Used as the reference for [`evaluate`].
pub fn evaluate_stack(stack: &RsrpStack, thresholds: &Thresholds) -> Result<ObjectivePair> {
    thresholds.validate()?;
    let attachment = attach(stack)?;
    let under_cov = under_coverage(&attachment, thresholds);
    let over_cov = over_coverage(stack, &attachment, thresholds)?;
    let (under_pct, over_pct) = coverage_percentages(stack, &attachment, thresholds)?;
    Ok(ObjectivePair { under_cov, over_cov, under_pct, over_pct, cells: stack.cells() })
}

/// The black-box objective every optimizer calls.
///
/// Fuses configuration, attachment and both objectives into one pass over
/// the grid and reads interference from the tensor's milliwatt cache.
pub fn evaluate(config: &Configuration, tensor: &CoverageTensor, thresholds: &Thresholds) -> Result<ObjectivePair> {
    thresholds.validate()?;
    let plan = crate::rfmap::tensor_plan(tensor, config)?;
    if plan.len() < 2 {
        return Err(Error::InvalidArgument("interference needs at least two sectors".into()));
    }
    let dbm: Vec<&[f64]> = plan.iter().enumerate().map(|(s, &(t, _))| tensor.slice(s, t)).collect();
    let mw: Vec<&[f64]> = plan.iter().enumerate().map(|(s, &(t, _))| tensor.linear_slice(s, t)).collect();
    let offsets: Vec<f64> = plan.iter().map(|&(_, o)| o).collect();
    let gains: Vec<f64> = offsets.iter().map(|o| 10f64.powf(o / 10.0)).collect();

    let Thresholds { gamma_w_dbm, gamma_o_db, sigmoid_temperature_db: temp } = *thresholds;
    let cells = tensor.cells();
    let (mut under_cov, mut over_cov) = (0.0, 0.0);
    let (mut under_n, mut over_n) = (0usize, 0usize);
    for cell in 0..cells {
        let mut serving = 0;
        let mut r = dbm[0][cell] + offsets[0];
        for s in 1..dbm.len() {
            let v = dbm[s][cell] + offsets[s];
            if v > r {
                r = v;
                serving = s;
            }
        }
        let mut interference_mw = 0.0;
        for s in 0..mw.len() {
            if s != serving {
                interference_mw += mw[s][cell] * gains[s];
            }
        }
        let margin = 10.0 * interference_mw.log10() - r + gamma_o_db;
        under_cov += sigmoid((gamma_w_dbm - r) / temp);
        over_cov += sigmoid(margin / temp);
        under_n += (r < gamma_w_dbm) as usize;
        over_n += (margin > 0.0) as usize;
    }
    Ok(ObjectivePair {
        under_cov,
        over_cov,
        under_pct: under_n as f64 / cells as f64,
        over_pct: over_n as f64 / cells as f64,
        cells,
    })
}

/// Same as [`evaluate`] but through [`apply_configuration`] and the modular
/// functions.
pub fn evaluate_modular(config: &Configuration, tensor: &CoverageTensor, thresholds: &Thresholds) -> Result<ObjectivePair> {
    evaluate_stack(&apply_configuration(tensor, config)?, thresholds)
}
