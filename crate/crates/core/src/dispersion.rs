//! Sellmeier dispersion of MgO-doped lithium niobate, group velocities,
//! quasi-phase-matching period, and construction of a [`PhysicalSetup`].
//!
//! Wavelengths are in micrometres; velocities in m/s; angular frequencies in
//! rad/s.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CentralFrequencies, PhysicalSetup, Process};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Schema version understood by [`SellmeierData::from_json`].
pub const SCHEMA_VERSION: u32 = 1;

/// File name looked up by [`SellmeierData::load_dir`].
pub const DATA_FILE_NAME: &str = "sellmeier.json";

const DEFAULT_DATA: &str = include_str!("../data/sellmeier.json");

/// Reference temperature of the coefficient set, °C.
const REFERENCE_TEMPERATURE: f64 = 24.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Ordinary,
    Extraordinary,
}

/// Coefficients of
/// n² = a1 + b1f + (a2 + b2f)/(λ² − (a3 + b3f)²) + (a4 + b4f)/(λ² − a5²) − a6λ²,
/// with f = (T − 24.5)(T + 570.82) and λ in μm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellmeierMedium {
    pub name: String,
    pub polarization: Polarization,
    pub formula: String,
    pub coefficients: SellmeierCoefficients,
    pub temperature_c: f64,
    pub valid_range_um: (f64, f64),
    pub source: String,
}

/// Terms of n²(λ) at the stored temperature: n² = c0 + p/(λ² − q²) + r/(λ² − t²) − a6λ².
struct Terms {
    c0: f64,
    p: f64,
    q2: f64,
    r: f64,
    t2: f64,
    a6: f64,
}

impl SellmeierMedium {
    fn terms(&self) -> Terms {
        let c = &self.coefficients;
        let t = self.temperature_c;
        let f = (t - REFERENCE_TEMPERATURE) * (t + 570.82);
        let q = c.a3 + c.b3 * f;
        Terms { c0: c.a1 + c.b1 * f, p: c.a2 + c.b2 * f, q2: q * q, r: c.a4 + c.b4 * f, t2: c.a5 * c.a5, a6: c.a6 }
    }

    fn check_range(&self, lambda: f64) -> Result<()> {
        let (lo, hi) = self.valid_range_um;
        if !(lambda >= lo && lambda <= hi) {
            return Err(Error::OutOfRange {
                medium: format!("{} ({:?})", self.name, self.polarization),
                lambda_um: lambda,
                min_um: lo,
                max_um: hi,
            });
        }
        Ok(())
    }

    fn n_squared(&self, lambda: f64) -> f64 {
        let t = self.terms();
        let l2 = lambda * lambda;
        t.c0 + t.p / (l2 - t.q2) + t.r / (l2 - t.t2) - t.a6 * l2
    }

    fn d_n_squared(&self, lambda: f64) -> f64 {
        let t = self.terms();
        let l2 = lambda * lambda;
        -2.0 * lambda * (t.p / (l2 - t.q2).powi(2) + t.r / (l2 - t.t2).powi(2) + t.a6)
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.valid_range_um;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Data(format!("{}: invalid range {:?}", self.name, self.valid_range_um)));
        }
        if self.formula != "gayer2008" {
            return Err(Error::Data(format!("{}: unknown formula '{}'", self.name, self.formula)));
        }
        // The poles at λ = q and λ = a5 must lie outside the window, and n² > 1 inside.
        let t = self.terms();
        for pole in [t.q2.sqrt(), t.t2.sqrt()] {
            if pole >= lo && pole <= hi {
                return Err(Error::Data(format!("{}: pole at {pole} μm inside the valid range", self.name)));
            }
        }
        for k in 0..=400 {
            let l = lo + (hi - lo) * k as f64 / 400.0;
            let n2 = self.n_squared(l);
            if !(n2 > 1.0) {
                return Err(Error::Data(format!("{}: n² = {n2} ≤ 1 at {l} μm", self.name)));
            }
        }
        Ok(())
    }
}

/// n(λ).
pub fn refractive_index(medium: &SellmeierMedium, lambda_um: f64) -> Result<f64> {
    medium.check_range(lambda_um)?;
    Ok(medium.n_squared(lambda_um).sqrt())
}

/// dn/dλ in μm⁻¹, from the analytic derivative of the Sellmeier form.
pub fn refractive_index_derivative(medium: &SellmeierMedium, lambda_um: f64) -> Result<f64> {
    let n = refractive_index(medium, lambda_um)?;
    Ok(medium.d_n_squared(lambda_um) / (2.0 * n))
}

/// Group index n − λ·dn/dλ.
pub fn group_index(medium: &SellmeierMedium, lambda_um: f64) -> Result<f64> {
    let (lo, hi) = medium.valid_range_um;
    if !(lambda_um > lo && lambda_um < hi) {
        return Err(Error::OutOfRange {
            medium: format!("{} ({:?})", medium.name, medium.polarization),
            lambda_um,
            min_um: lo,
            max_um: hi,
        });
    }
    let n = refractive_index(medium, lambda_um)?;
    Ok(n - lambda_um * refractive_index_derivative(medium, lambda_um)?)
}

/// Group velocity c/(n − λ·dn/dλ) in m/s.
pub fn group_velocity(medium: &SellmeierMedium, lambda_um: f64) -> Result<f64> {
    Ok(SPEED_OF_LIGHT / group_index(medium, lambda_um)?)
}

/// Angular frequency 2πc/λ in rad/s.
pub fn angular_frequency(lambda_um: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (lambda_um * 1e-6)
}

#[derive(Debug, Deserialize)]
struct DataFile {
    schema_version: u32,
    media: Vec<SellmeierMedium>,
}

/// Validated set of dispersion media.
#[derive(Debug, Clone, PartialEq)]
pub struct SellmeierData {
    pub media: Vec<SellmeierMedium>,
}

impl SellmeierData {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: DataFile = serde_json::from_str(text).map_err(|e| Error::Data(format!("dispersion data: {e}")))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "dispersion data schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        if file.media.is_empty() {
            return Err(Error::Data("dispersion data lists no media".into()));
        }
        for m in &file.media {
            m.validate()?;
        }
        Ok(SellmeierData { media: file.media })
    }

    /// The coefficient set compiled into the library.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_DATA).expect("bundled dispersion data is valid")
    }

    /// Reads `sellmeier.json` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let path = dir.join(DATA_FILE_NAME);
        let text =
            std::fs::read_to_string(&path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// First medium with the given polarization.
    pub fn medium(&self, pol: Polarization) -> Result<&SellmeierMedium> {
        self.media
            .iter()
            .find(|m| m.polarization == pol)
            .ok_or_else(|| Error::Data(format!("no medium with {pol:?} polarization")))
    }
}

/// One field of a three-wave interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub lambda_um: f64,
    pub polarization: Polarization,
}

/// Pump p → a + b, with 1/λ_p = 1/λ_a + 1/λ_b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchTriple {
    pub pump: Wave,
    pub a: Wave,
    pub b: Wave,
}

impl PhaseMatchTriple {
    /// Validates energy conservation to 1e-6 relative.
    pub fn new(pump: Wave, a: Wave, b: Wave) -> Result<Self> {
        let t = PhaseMatchTriple { pump, a, b };
        t.validate()?;
        Ok(t)
    }

    /// Completes the triple with λ_b = 1/(1/λ_p − 1/λ_a).
    pub fn from_pump_and_a(pump: Wave, a: Wave, pol_b: Polarization) -> Result<Self> {
        let inv = 1.0 / pump.lambda_um - 1.0 / a.lambda_um;
        if !(inv > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "λ_a = {} μm must exceed λ_p = {} μm",
                a.lambda_um, pump.lambda_um
            )));
        }
        Self::new(pump, a, Wave { lambda_um: 1.0 / inv, polarization: pol_b })
    }

    /// e(0.9418 μm) → o(1.4824 μm) + e(λ_b), type-II in MgO:PPLN.
    pub fn table1() -> Self {
        Self::from_pump_and_a(
            Wave { lambda_um: 0.9418, polarization: Polarization::Extraordinary },
            Wave { lambda_um: 1.4824, polarization: Polarization::Ordinary },
            Polarization::Extraordinary,
        )
        .expect("reference triple is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for w in [self.pump, self.a, self.b] {
            if !(w.lambda_um > 0.0 && w.lambda_um.is_finite()) {
                return Err(Error::InvalidConfig(format!("wavelength {} μm is not positive", w.lambda_um)));
            }
        }
        let lhs = 1.0 / self.pump.lambda_um;
        let rhs = 1.0 / self.a.lambda_um + 1.0 / self.b.lambda_um;
        if ((lhs - rhs) / lhs).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "energy conservation violated: 1/λ_p = {lhs}, 1/λ_a + 1/λ_b = {rhs} μm⁻¹"
            )));
        }
        Ok(())
    }

    pub fn central_frequencies(&self) -> CentralFrequencies {
        CentralFrequencies {
            a: angular_frequency(self.a.lambda_um),
            b: angular_frequency(self.b.lambda_um),
            p: angular_frequency(self.pump.lambda_um),
        }
    }
}

/// Λ = 1/|n_p/λ_p − n_a/λ_a − n_b/λ_b| in μm.
pub fn poling_period(data: &SellmeierData, triple: &PhaseMatchTriple) -> Result<f64> {
    triple.validate()?;
    let k = |w: Wave| -> Result<f64> { Ok(refractive_index(data.medium(w.polarization)?, w.lambda_um)? / w.lambda_um) };
    let mismatch = k(triple.pump)? - k(triple.a)? - k(triple.b)?;
    if mismatch == 0.0 {
        return Err(Error::InfinitePeriod);
    }
    Ok(1.0 / mismatch.abs())
}

/// Bulk parameters for a crystal of length `length_m`, with group velocities
/// from the dispersion data and central frequencies from the triple.
pub fn build_setup(
    data: &SellmeierData,
    triple: &PhaseMatchTriple,
    length_m: f64,
    tau_s: f64,
    epsilon: f64,
    gamma: f64,
) -> Result<PhysicalSetup> {
    triple.validate()?;
    let v = |w: Wave| group_velocity(data.medium(w.polarization)?, w.lambda_um);
    let setup = PhysicalSetup {
        length: length_m,
        gamma,
        v_a: v(triple.a)?,
        v_b: v(triple.b)?,
        v_p: v(triple.pump)?,
        tau: tau_s,
        epsilon,
        central_frequencies: Some(triple.central_frequencies()),
        process: Process::Spdc,
    };
    setup.validate()?;
    Ok(setup)
}
