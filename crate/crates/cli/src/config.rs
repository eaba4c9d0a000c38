//! Run configuration: one TOML file with an optional block per command.
//! Unknown keys are rejected everywhere so that a typo in a parameter name
//! fails loudly instead of silently falling back to a default.

use std::collections::BTreeMap;
use std::path::PathBuf;

use gendim::dynamics::{FieldId, FlowSpec};
use gendim::mfa::{NeighborIndex, RadiusGrid};
use gendim::poincare::{Direction, SectionSpec};
use gendim::synth::{Side, SingularDensitySpec};
use gendim::{Error, PointCloud, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub simulate: SimulateConfig,
    pub section: SectionConfig,
    pub dq: DqConfig,
    pub suspension_test: SuspensionTestConfig,
    pub singular_test: SingularTestConfig,
    pub lorenz_check: LorenzCheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            simulate: SimulateConfig::default(),
            section: SectionConfig::default(),
            dq: DqConfig::default(),
            suspension_test: SuspensionTestConfig::default(),
            singular_test: SingularTestConfig::default(),
            lorenz_check: LorenzCheckConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    RosslerOriginal,
    RosslerShifted,
    RosslerTilde,
    LorenzClassical,
    /// `(-y, x, 0)`: unit-speed rotation, every orbit returns after 2π.
    Circle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub field: FlowKind,
    /// Overrides of the default parameters (a = b = 0.1, c = 18 for Rössler;
    /// σ = 10, ρ = 28, β = 8/3 for Lorenz).
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Start point; defaults to a seeded perturbation of the relevant
    /// unstable fixed point.
    #[serde(default)]
    pub initial: Option<[f64; 3]>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            field: FlowKind::RosslerShifted,
            params: BTreeMap::new(),
            initial: None,
        }
    }
}

impl FlowConfig {
    fn core_id(&self) -> Option<FieldId> {
        match self.field {
            FlowKind::RosslerOriginal => Some(FieldId::RosslerOriginal),
            FlowKind::RosslerShifted => Some(FieldId::RosslerShifted),
            FlowKind::RosslerTilde => Some(FieldId::RosslerTilde),
            FlowKind::LorenzClassical => Some(FieldId::LorenzClassical),
            FlowKind::Circle => None,
        }
    }

    /// Core flow spec with defaults filled in; `None` for the circle.
    pub fn flow_spec(&self) -> Result<Option<FlowSpec>> {
        let Some(id) = self.core_id() else {
            if let Some(name) = self.params.keys().next() {
                return Err(Error::Config(format!(
                    "the circle flow takes no parameters (got `{name}`)"
                )));
            }
            return Ok(None);
        };
        let mut spec = if id.is_rossler() {
            FlowSpec::rossler(id, 0.1, 0.1, 18.0)
        } else {
            FlowSpec::lorenz()
        };
        for (name, value) in &self.params {
            if !spec.params.contains_key(name) {
                return Err(Error::Config(format!(
                    "unknown parameter `{name}` for {}; expected one of {:?}",
                    id.name(),
                    spec.params.keys().collect::<Vec<_>>()
                )));
            }
            spec.params.insert(name.clone(), *value);
        }
        spec.resolve()?;
        Ok(Some(spec))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationConfig {
    pub h: f64,
    /// Integrated time after the transient.
    pub duration: f64,
    pub transient: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            h: 1e-3,
            duration: 1e3,
            transient: 500.0,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("step h = {} must be positive", self.h)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration = {} must be positive", self.duration)));
        }
        if !(self.transient >= 0.0 && self.transient.is_finite()) {
            return Err(Error::Config(format!(
                "transient = {} must be nonnegative",
                self.transient
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub flow: FlowConfig,
    pub integration: IntegrationConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub coordinate_index: usize,
    pub level: f64,
    pub direction: Direction,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        let s = SectionSpec::x_zero_increasing();
        Self {
            coordinate_index: s.coordinate_index,
            level: s.level,
            direction: s.direction,
        }
    }
}

impl SurfaceConfig {
    pub fn spec(&self) -> SectionSpec {
        SectionSpec {
            coordinate_index: self.coordinate_index,
            level: self.level,
            direction: self.direction,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectionConfig {
    pub flow: FlowConfig,
    pub integration: IntegrationConfig,
    pub surface: SurfaceConfig,
    /// Second step size; when set the run is repeated and the thickness
    /// ratio `thickness(h_compare) / thickness(h)` is reported.
    pub h_compare: Option<f64>,
    /// Fit a unimodal map to the first section coordinate and report its
    /// critical point, Lyapunov exponent, Schwarzian scan and case.
    pub fit_map: bool,
    pub lyapunov_iterates: usize,
    pub lyapunov_seeds: usize,
}

impl Default for SectionConfig {
    fn default() -> Self {
        Self {
            flow: FlowConfig::default(),
            integration: IntegrationConfig {
                h: 1e-3,
                duration: 2e4,
                transient: 500.0,
            },
            surface: SurfaceConfig::default(),
            h_compare: None,
            fit_map: false,
            lyapunov_iterates: 100_000,
            lyapunov_seeds: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    /// 24 radii per decade over 2.5 decades below a tenth of the extent.
    Default {},
    Geometric {
        r_max: f64,
        r_min: f64,
        per_decade: usize,
    },
    /// From `r_max` (default a tenth of the extent) down to where the
    /// median neighbour count reaches `min_count`.
    CountFloored {
        r_max: Option<f64>,
        min_count: u64,
        per_decade: usize,
    },
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::Default {}
    }
}

impl GridConfig {
    pub fn build(&self, cloud: &PointCloud, index: &NeighborIndex, theiler: usize) -> Result<RadiusGrid> {
        match *self {
            GridConfig::Default {} => RadiusGrid::for_cloud(cloud),
            GridConfig::Geometric {
                r_max,
                r_min,
                per_decade,
            } => RadiusGrid::geometric(r_max, r_min, per_decade),
            GridConfig::CountFloored {
                r_max,
                min_count,
                per_decade,
            } => {
                let r_max = r_max.unwrap_or(0.1 * cloud.extent());
                RadiusGrid::count_floored(index, r_max, min_count, theiler, per_decade)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// By file extension: `.json` is JSON, anything else CSV.
    #[default]
    Auto,
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqConfig {
    pub input: Option<PathBuf>,
    pub input_format: InputFormat,
    /// CSV header names to keep (e.g. `["y"]` for a section coordinate);
    /// all columns by default.
    pub columns: Option<Vec<String>>,
    /// Keep every `stride`-th row.
    pub stride: usize,
    pub q: Vec<f64>,
    pub theiler: usize,
    pub grid: GridConfig,
}

impl Default for DqConfig {
    fn default() -> Self {
        Self {
            input: None,
            input_format: InputFormat::Auto,
            columns: None,
            stride: 1,
            q: vec![-2.0, 0.0, 1.0, 2.0, 4.0],
            theiler: 0,
            grid: GridConfig::Default {},
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuspensionTestConfig {
    pub p: f64,
    pub depth: u32,
    pub n_samples: usize,
    /// Base cloud size as a multiple of `n_samples`.
    pub base_factor: usize,
    pub q: Vec<f64>,
    pub tolerance: f64,
    pub theiler: usize,
    pub grid: GridConfig,
}

impl Default for SuspensionTestConfig {
    fn default() -> Self {
        Self {
            p: 0.3,
            depth: 24,
            n_samples: 200_000,
            base_factor: 10,
            q: vec![0.0, 2.0, 4.0],
            tolerance: 0.1,
            theiler: 1,
            grid: GridConfig::Default {},
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularityConfig {
    pub x: f64,
    pub alpha: f64,
    pub side: Side,
    pub psi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingularTestConfig {
    pub interval: [f64; 2],
    pub psi0: f64,
    pub singularities: Vec<SingularityConfig>,
    pub n_samples: usize,
    pub q: Vec<f64>,
    pub tolerance: f64,
    pub negative_q_tolerance: f64,
    pub uniform_tolerance: f64,
    pub theiler: usize,
    pub grid: GridConfig,
    pub flow_n_samples: usize,
    pub flow_q: Vec<f64>,
    pub flow_tolerance: f64,
    pub flow_q0_tolerance: f64,
    pub flow_grid: GridConfig,
}

impl Default for SingularTestConfig {
    fn default() -> Self {
        Self {
            interval: [0.0, 1.0],
            psi0: 1.0,
            singularities: vec![SingularityConfig {
                x: 0.0,
                alpha: 0.5,
                side: Side::RightOfXk,
                psi: 0.5,
            }],
            n_samples: 200_000,
            q: vec![-2.0, 0.5, 2.0, 4.0],
            tolerance: 0.07,
            negative_q_tolerance: 0.12,
            uniform_tolerance: 0.05,
            theiler: 1,
            grid: GridConfig::CountFloored {
                r_max: Some(1e-3),
                min_count: 20,
                per_decade: 24,
            },
            flow_n_samples: 400_000,
            flow_q: vec![0.0, 2.0, 4.0],
            flow_tolerance: 0.12,
            flow_q0_tolerance: 0.1,
            flow_grid: GridConfig::Default {},
        }
    }
}

impl SingularTestConfig {
    pub fn density_spec(&self) -> Result<SingularDensitySpec> {
        let mut spec = SingularDensitySpec::uniform(self.interval[0], self.interval[1]);
        spec.psi0 = self.psi0;
        for s in &self.singularities {
            spec = spec.with_singularity(s.x, s.alpha, s.side, s.psi);
        }
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LorenzCheckConfig {
    pub params: BTreeMap<String, f64>,
    pub integration: IntegrationConfig,
    /// Keep every `stride`-th state of the flow orbit.
    pub stride: usize,
    pub n_centers: usize,
    pub theiler: usize,
    pub grid: GridConfig,
    pub section_duration: f64,
    pub surface: SurfaceConfig,
    pub local_min_mean: f64,
    pub local_low_threshold: f64,
    pub local_low_max_fraction: f64,
    pub dq_min: f64,
    pub d1_difference_tolerance: f64,
}

impl Default for LorenzCheckConfig {
    fn default() -> Self {
        Self {
            params: BTreeMap::new(),
            integration: IntegrationConfig {
                h: 0.005,
                duration: 1e4,
                transient: 100.0,
            },
            stride: 20,
            n_centers: 200,
            theiler: gendim::mfa::ORBIT_THEILER,
            grid: GridConfig::CountFloored {
                r_max: None,
                min_count: 20,
                per_decade: 24,
            },
            section_duration: 1e5,
            surface: SurfaceConfig {
                coordinate_index: 2,
                level: 27.0,
                direction: Direction::Decreasing,
            },
            local_min_mean: 1.9,
            local_low_threshold: 1.75,
            local_low_max_fraction: 0.05,
            dq_min: 1.9,
            d1_difference_tolerance: 0.15,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.suspension_test.q, vec![0.0, 2.0, 4.0]);
        assert_eq!(cfg.dq.grid, GridConfig::Default {});
    }

    #[test]
    fn grid_blocks_are_tagged() {
        let cfg = RunConfig::from_toml("[dq]\ngrid = { kind = \"count_floored\", min_count = 10, per_decade = 12 }\n")
            .unwrap();
        assert_eq!(
            cfg.dq.grid,
            GridConfig::CountFloored {
                r_max: None,
                min_count: 10,
                per_decade: 12
            }
        );
        assert!(RunConfig::from_toml("[dq]\ngrid = { kind = \"default\", r_max = 1.0 }\n").is_err());
    }

    #[test]
    fn flow_parameters_are_checked() {
        let mut flow = FlowConfig::default();
        flow.params.insert("c".into(), 14.0);
        assert_eq!(flow.flow_spec().unwrap().unwrap().params["c"], 14.0);
        flow.params.insert("rho".into(), 1.0);
        assert!(matches!(flow.flow_spec(), Err(Error::Config(_))));
        let circle = FlowConfig {
            field: FlowKind::Circle,
            ..FlowConfig::default()
        };
        assert!(circle.flow_spec().unwrap().is_none());
    }

    #[test]
    fn invalid_singular_density_is_a_config_error() {
        let mut cfg = SingularTestConfig::default();
        cfg.singularities[0].alpha = 1.5;
        assert!(matches!(cfg.density_spec(), Err(Error::Config(_))));
    }

    #[test]
    fn integration_block_is_validated() {
        let bad = IntegrationConfig {
            h: 0.0,
            ..IntegrationConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(IntegrationConfig::default().validate().is_ok());
    }
}
