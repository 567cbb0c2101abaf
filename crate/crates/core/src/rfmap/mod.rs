//! Synthetic RF environment and per-sector coverage precomputation.
//!
//! The environment is a log-distance path-loss model, a two-plane sector
//! antenna pattern, and an independent spatially correlated shadowing field per
//! sector. Everything is a deterministic function of the layout and the seed,
//! so a [`CoverageTensor`] can be rebuilt bit-for-bit from a small text
//! description.

mod antenna;
mod shadowing;
mod tensor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use antenna::antenna_gain;
pub use shadowing::shadowing_field;
pub(crate) use tensor::tensor_plan;
pub use tensor::{apply_configuration, precompute_coverage, CoverageTensor, RsrpStack, DEFAULT_DOWNTILTS};

/// Receiver height above ground used for elevation and 3-D distance.
pub const DEFAULT_RX_HEIGHT_M: f64 = 1.5;

/// Rectangular analysis area split into square cells.
///
/// Row 0 is the northern edge; column 0 the western edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub resolution_m: f64,
}

impl GridSpec {
    pub fn new(width_m: f64, height_m: f64, resolution_m: f64) -> Result<Self> {
        let grid = Self { width_m, height_m, resolution_m };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution_m > 0.0) || !(self.width_m > 0.0) || !(self.height_m > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be positive, got {} x {} at {} m",
                self.width_m, self.height_m, self.resolution_m
            )));
        }
        for (name, extent) in [("width", self.width_m), ("height", self.height_m)] {
            let cells = extent / self.resolution_m;
            if (cells - cells.round()).abs() > 1e-9 || cells.round() < 1.0 {
                return Err(Error::InvalidGrid(format!(
                    "{name} {extent} m is not a whole number of {} m cells",
                    self.resolution_m
                )));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        (self.height_m / self.resolution_m).round() as usize
    }

    pub fn cols(&self) -> usize {
        (self.width_m / self.resolution_m).round() as usize
    }

    pub fn cells(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Ground coordinates (x east, y north) of a cell centre.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let x = (col as f64 + 0.5) * self.resolution_m;
        let y = self.height_m - (row as f64 + 0.5) * self.resolution_m;
        (x, y)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { width_m: 1200.0, height_m: 1200.0, resolution_m: 10.0 }
    }
}

/// Sector pattern parameters shared by every antenna of a layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternParams {
    pub max_gain_dbi: f64,
    pub h_beamwidth_deg: f64,
    pub v_beamwidth_deg: f64,
    /// Maximum total attenuation `A_m`.
    pub front_back_ratio_db: f64,
    /// Vertical side-lobe attenuation limit.
    pub sla_v_db: f64,
}

impl Default for PatternParams {
    fn default() -> Self {
        Self {
            max_gain_dbi: 15.0,
            h_beamwidth_deg: 65.0,
            v_beamwidth_deg: 10.0,
            front_back_ratio_db: 30.0,
            sla_v_db: 30.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorAntenna {
    pub site_id: usize,
    /// (x, y, z) in metres; z is the mast height.
    pub position: [f64; 3],
    /// Boresight bearing, clockwise from north.
    pub azimuth_deg: f64,
    pub max_gain_dbi: f64,
    pub h_beamwidth_deg: f64,
    pub v_beamwidth_deg: f64,
    pub front_back_ratio_db: f64,
    pub sla_v_db: f64,
}

/// Log-distance path loss `pl0 + 10 n log10(d / d0)`, clamped below `d_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossParams {
    pub pl0_db: f64,
    pub exponent: f64,
    pub d0_m: f64,
    pub d_min_m: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self { pl0_db: 32.4, exponent: 3.76, d0_m: 1.0, d_min_m: 10.0 }
    }
}

pub fn path_loss(d_m: f64, params: &PathLossParams) -> f64 {
    let d = d_m.max(params.d_min_m);
    params.pl0_db + 10.0 * params.exponent * (d / params.d0_m).log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadowingParams {
    pub sigma_db: f64,
    pub decorrelation_m: f64,
}

impl Default for ShadowingParams {
    fn default() -> Self {
        Self { sigma_db: 8.0, decorrelation_m: 50.0 }
    }
}

/// One base station: position, mast height and the three sector bearings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub height_m: f64,
    pub azimuths_deg: [f64; 3],
}

/// Everything needed to build a [`RadioEnvironment`] except the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub sites: Vec<SiteSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub pattern: PatternParams,
    #[serde(default)]
    pub pathloss: PathLossParams,
    #[serde(default)]
    pub shadowing: ShadowingParams,
    #[serde(default = "default_reference_power")]
    pub reference_power_dbm: f64,
    #[serde(default = "default_rx_height")]
    pub rx_height_m: f64,
    #[serde(default)]
    pub link: LinkBudget,
}

fn default_reference_power() -> f64 {
    40.0
}

fn default_rx_height() -> f64 {
    DEFAULT_RX_HEIGHT_M
}

impl Default for LayoutConfig {
    /// Five three-sector sites on a 1.2 km square: four near the corners on
    /// 25-30 m masts and a low 20 m site in the upper-right quadrant.
    fn default() -> Self {
        let site = |x_m, y_m, height_m, azimuths_deg| SiteSpec { x_m, y_m, height_m, azimuths_deg };
        Self {
            sites: vec![
                site(180.0, 170.0, 28.0, [30.0, 150.0, 270.0]),
                site(1010.0, 210.0, 25.0, [90.0, 210.0, 330.0]),
                site(200.0, 1000.0, 30.0, [0.0, 120.0, 240.0]),
                site(1020.0, 1010.0, 27.0, [60.0, 180.0, 300.0]),
                site(780.0, 760.0, 20.0, [45.0, 165.0, 285.0]),
            ],
            grid: GridSpec::default(),
            pattern: PatternParams::default(),
            pathloss: PathLossParams::default(),
            shadowing: ShadowingParams::default(),
            reference_power_dbm: default_reference_power(),
            rx_height_m: DEFAULT_RX_HEIGHT_M,
            link: LinkBudget::default(),
        }
    }
}

/// Terms of the link budget outside path loss and antenna gain.
///
/// RSRP is the power of a single reference-signal resource element, so the
/// sector transmit power is spread over `subcarriers` before it reaches the
/// receiver. `clutter_loss_db` is a flat loss for buildings and vegetation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkBudget {
    pub subcarriers: u32,
    pub clutter_loss_db: f64,
}

impl LinkBudget {
    /// Constant added to every RSRP value, in dB.
    pub fn offset_db(&self) -> f64 {
        -10.0 * (self.subcarriers.max(1) as f64).log10() - self.clutter_loss_db
    }
}

impl Default for LinkBudget {
    /// 20 MHz LTE carrier (100 resource blocks of 12 subcarriers).
    fn default() -> Self {
        Self { subcarriers: 1200, clutter_loss_db: 6.0 }
    }
}

/// Serializable description of an environment. The shadowing fields are not
/// stored; they are regenerated from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub seed: u64,
    pub reference_power_dbm: f64,
    pub rx_height_m: f64,
    pub grid: GridSpec,
    pub pathloss: PathLossParams,
    pub shadowing: ShadowingParams,
    #[serde(default)]
    pub link: LinkBudget,
    pub antennas: Vec<SectorAntenna>,
}

#[derive(Clone, Debug)]
pub struct RadioEnvironment {
    spec: EnvironmentSpec,
    shadowing_db: Vec<Vec<f64>>,
}

impl RadioEnvironment {
    /// Validates the description and generates one shadowing field per sector.
    pub fn from_spec(spec: EnvironmentSpec) -> Result<Self> {
        spec.grid.validate()?;
        validate_antennas(&spec.antennas, spec.rx_height_m)?;
        let shadowing_db = (0..spec.antennas.len())
            .map(|sector| {
                shadowing_field(
                    &spec.grid,
                    spec.shadowing.sigma_db,
                    spec.shadowing.decorrelation_m,
                    spec.seed,
                    sector as u64,
                )
            })
            .collect();
        Ok(Self { spec, shadowing_db })
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn grid(&self) -> &GridSpec {
        &self.spec.grid
    }

    pub fn antennas(&self) -> &[SectorAntenna] {
        &self.spec.antennas
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn reference_power_dbm(&self) -> f64 {
        self.spec.reference_power_dbm
    }

    /// Row-major shadowing field (dB) for one sector.
    pub fn shadowing(&self, sector: usize) -> &[f64] {
        &self.shadowing_db[sector]
    }
}

/// Expands a site layout into sector antennas and generates the shadowing.
pub fn generate_environment(layout: &LayoutConfig, seed: u64) -> Result<RadioEnvironment> {
    layout.grid.validate()?;
    if layout.sites.is_empty() {
        return Err(Error::InvalidLayout("layout has no sites".into()));
    }
    for (i, a) in layout.sites.iter().enumerate() {
        for (j, b) in layout.sites.iter().enumerate().skip(i + 1) {
            if (a.x_m - b.x_m).hypot(a.y_m - b.y_m) == 0.0 {
                return Err(Error::InvalidLayout(format!("sites {i} and {j} share a position")));
            }
        }
    }
    let p = layout.pattern;
    let antennas = layout
        .sites
        .iter()
        .enumerate()
        .flat_map(|(site_id, site)| {
            site.azimuths_deg.iter().map(move |&az| SectorAntenna {
                site_id,
                position: [site.x_m, site.y_m, site.height_m],
                azimuth_deg: az.rem_euclid(360.0),
                max_gain_dbi: p.max_gain_dbi,
                h_beamwidth_deg: p.h_beamwidth_deg,
                v_beamwidth_deg: p.v_beamwidth_deg,
                front_back_ratio_db: p.front_back_ratio_db,
                sla_v_db: p.sla_v_db,
            })
        })
        .collect();
    RadioEnvironment::from_spec(EnvironmentSpec {
        seed,
        reference_power_dbm: layout.reference_power_dbm,
        rx_height_m: layout.rx_height_m,
        grid: layout.grid,
        pathloss: layout.pathloss,
        shadowing: layout.shadowing,
        link: layout.link,
        antennas,
    })
}

fn validate_antennas(antennas: &[SectorAntenna], rx_height_m: f64) -> Result<()> {
    if antennas.is_empty() {
        return Err(Error::InvalidLayout("no antennas".into()));
    }
    for (i, a) in antennas.iter().enumerate() {
        if !(a.position[2] > 0.0) || a.position[2] <= rx_height_m {
            return Err(Error::InvalidLayout(format!(
                "antenna {i} height {} m must exceed the receiver height {rx_height_m} m",
                a.position[2]
            )));
        }
        if !(a.h_beamwidth_deg > 0.0 && a.v_beamwidth_deg > 0.0) {
            return Err(Error::InvalidLayout(format!("antenna {i} has a non-positive beamwidth")));
        }
    }
    let mut by_site: Vec<Vec<&SectorAntenna>> = Vec::new();
    for a in antennas {
        if by_site.len() <= a.site_id {
            by_site.resize_with(a.site_id + 1, Vec::new);
        }
        by_site[a.site_id].push(a);
    }
    for (site, sectors) in by_site.iter().enumerate() {
        if sectors.len() != 3 {
            return Err(Error::InvalidLayout(format!(
                "site {site} has {} sectors, expected 3",
                sectors.len()
            )));
        }
        for (i, a) in sectors.iter().enumerate() {
            for b in &sectors[i + 1..] {
                let sep = (a.azimuth_deg - b.azimuth_deg).rem_euclid(360.0);
                if (sep - 120.0).abs() > 1e-6 && (sep - 240.0).abs() > 1e-6 {
                    return Err(Error::InvalidLayout(format!(
                        "site {site} azimuths {} and {} are not 120 degrees apart",
                        a.azimuth_deg, b.azimuth_deg
                    )));
                }
            }
        }
    }
    Ok(())
}
