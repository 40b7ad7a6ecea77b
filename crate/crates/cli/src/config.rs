//! Run configuration files and their resolution into model parameters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use timeorder_core::dispersion::{build_setup, PhaseMatchTriple, Polarization, SellmeierData, Wave};
use timeorder_core::model::{from_physical, matching_gamma};
use timeorder_core::oracle::Stepper;
use timeorder_core::{Error, GaussianConfig, PhysicalSetup, QuadratureSpec, Result};

/// Environment variable naming a directory that holds `sellmeier.json`.
pub const DATA_DIR_ENV: &str = "TIMEORDER_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Points per axis and half-width in units of the J1 decay length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    pub span_sigmas: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: 201, span_sigmas: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FcTarget {
    Modes,
    #[default]
    Coupling,
    SolveEps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcSpec {
    #[serde(default)]
    pub target: FcTarget,
    /// Highest mode index (modes, coupling) or the mode to convert (solve_eps).
    #[serde(default = "default_fc_n")]
    pub n: usize,
}

fn default_fc_n() -> usize {
    8
}

impl Default for FcSpec {
    fn default() -> Self {
        FcSpec { target: FcTarget::default(), n: default_fc_n() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    #[default]
    Quadrature,
    Propagator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default)]
    pub which: OracleKind,
    /// Detuning points for the quadrature oracle; a default set of five
    /// points scaled to the J1 decay length is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Bin width; defaults to 2·span(2σ)/bins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    #[serde(default = "default_max_pairs")]
    pub max_pairs: usize,
    #[serde(default = "default_stepper")]
    pub stepper: Stepper,
    #[serde(default = "default_step_tol")]
    pub step_tol: f64,
}

fn default_eps_list() -> Vec<f64> {
    vec![0.02, 0.01, 0.005]
}
fn default_bins() -> usize {
    6
}
fn default_max_pairs() -> usize {
    2
}
fn default_stepper() -> Stepper {
    Stepper::Magnus4
}
fn default_step_tol() -> f64 {
    1e-10
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            which: OracleKind::default(),
            points: None,
            eps_list: default_eps_list(),
            bins: default_bins(),
            bin_width: None,
            max_pairs: default_max_pairs(),
            stepper: default_stepper(),
            step_tol: default_step_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedTriple {
    Table1,
}

/// A three-wave triple: a named reference, three explicit waves, or the pump
/// and one daughter with λ_b completed by energy conservation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TripleSpec {
    Named(NamedTriple),
    Explicit(PhaseMatchTriple),
    PumpAndA { pump: Wave, a: Wave, b_polarization: Polarization },
}

impl TripleSpec {
    pub fn resolve(&self) -> Result<PhaseMatchTriple> {
        match *self {
            TripleSpec::Named(NamedTriple::Table1) => Ok(PhaseMatchTriple::table1()),
            TripleSpec::Explicit(t) => {
                t.validate()?;
                Ok(t)
            }
            TripleSpec::PumpAndA { pump, a, b_polarization } => {
                PhaseMatchTriple::from_pump_and_a(pump, a, b_polarization)
            }
        }
    }
}

/// Bulk description: either explicit SI parameters, or a triple plus crystal
/// length, pulse duration and coupling with group velocities from Sellmeier
/// data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup: Option<PhysicalSetup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<TripleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Defaults to the sinc/Gaussian half-maximum matching constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Sellmeier JSON file; overrides the data directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<PathBuf>,
    /// Seconds per model time unit.
    #[serde(default = "default_time_unit")]
    pub time_unit_s: f64,
}

fn default_time_unit() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalBlock>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub fc: FcSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
}

/// Model parameters after resolving the physical block.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    /// Dimensionless model in `time_unit_s`.
    pub config: GaussianConfig,
    pub time_unit_s: f64,
    pub setup: Option<PhysicalSetup>,
    pub triple: Option<PhaseMatchTriple>,
    pub data: Option<SellmeierData>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.gaussian, &self.physical) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig("give either a gaussian or a physical block, not both".into()))
            }
            (None, None) => return Err(Error::InvalidConfig("a gaussian or a physical block is required".into())),
            _ => {}
        }
        if self.grid.points < 2 {
            return Err(Error::InvalidConfig(format!("grid needs at least 2 points, got {}", self.grid.points)));
        }
        if !(self.grid.span_sigmas > 0.0 && self.grid.span_sigmas.is_finite()) {
            return Err(Error::InvalidConfig(format!("grid span must be positive, got {}", self.grid.span_sigmas)));
        }
        self.quadrature.validate()?;
        if let Some(p) = &self.physical {
            if !(p.time_unit_s > 0.0 && p.time_unit_s.is_finite()) {
                return Err(Error::InvalidConfig(format!("time_unit_s must be positive, got {}", p.time_unit_s)));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything except the output block.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSpec::default();
        let bytes = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Sellmeier data from, in order: the config's media file, the
    /// directory in `data_dir`, the built-in table.
    pub fn sellmeier(&self, data_dir: Option<&Path>) -> Result<SellmeierData> {
        if let Some(path) = self.physical.as_ref().and_then(|p| p.media.as_ref()) {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
            return SellmeierData::from_json(&text);
        }
        match data_dir {
            Some(dir) => SellmeierData::load_dir(dir),
            None => Ok(SellmeierData::builtin()),
        }
    }

    pub fn resolve(&self, data_dir: Option<&Path>) -> Result<Resolved> {
        self.validate()?;
        if let Some(g) = &self.gaussian {
            g.validate()?;
            return Ok(Resolved { config: *g, time_unit_s: 1.0, setup: None, triple: None, data: None });
        }
        let p = self.physical.as_ref().expect("validated");
        let (setup, triple, data) = match (&p.setup, &p.triple) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig("physical block takes either setup or triple, not both".into()))
            }
            (Some(s), None) => (*s, None, None),
            (None, Some(t)) => {
                let triple = t.resolve()?;
                let data = self.sellmeier(data_dir)?;
                let need = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| Error::InvalidConfig(format!("physical block with a triple needs {name}")))
                };
                let setup = build_setup(
                    &data,
                    &triple,
                    need(p.length_m, "length_m")?,
                    need(p.tau_s, "tau_s")?,
                    need(p.epsilon, "epsilon")?,
                    p.gamma.unwrap_or_else(matching_gamma),
                )?;
                (setup, Some(triple), Some(data))
            }
            (None, None) => return Err(Error::InvalidConfig("physical block needs setup or triple".into())),
        };
        let config = from_physical(&setup)?.in_time_unit(p.time_unit_s);
        config.validate()?;
        Ok(Resolved { config, time_unit_s: p.time_unit_s, setup: Some(setup), triple, data })
    }
}
