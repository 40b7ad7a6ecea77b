//! Model configuration and the derived scalars and matrices that every closed
//! form is written in.
//!
//! Times and frequencies are in a base unit chosen by the caller (for example
//! picoseconds and rad/ps); all formulas are homogeneous in time·frequency.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance of the energy-conservation check on central frequencies.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Process {
    #[default]
    Spdc,
    Sfwm,
    Fc,
}

/// Absolute central frequencies (rad per time unit).
///
/// For SFWM `p` is twice the pump frequency, so SPDC and SFWM share the check
/// `a + b = p`; for frequency conversion `b - a = p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralFrequencies {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianConfig {
    pub tau: f64,
    pub s_a: f64,
    pub s_b: f64,
    pub s_p: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central_frequencies: Option<CentralFrequencies>,
    #[serde(default)]
    pub process: Process,
}

impl GaussianConfig {
    pub fn new(tau: f64, s_a: f64, s_b: f64, s_p: f64, epsilon: f64) -> Result<Self> {
        let cfg = GaussianConfig { tau, s_a, s_b, s_p, epsilon, central_frequencies: None, process: Process::Spdc };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a config from the walk-off parameters η_a = s_p − s_a and
    /// η_b = s_p − s_b. Only the η's enter the closed forms; s_p is placed at
    /// τ above the largest of (η_a, η_b, 0) so that every slope is positive.
    pub fn from_walkoffs(tau: f64, eta_a: f64, eta_b: f64, epsilon: f64) -> Result<Self> {
        let s_p = eta_a.max(eta_b).max(0.0) + tau;
        Self::new(tau, s_p - eta_a, s_p - eta_b, s_p, epsilon)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_process(mut self, process: Process) -> Self {
        self.process = process;
        self
    }

    pub fn with_central_frequencies(mut self, c: CentralFrequencies) -> Result<Self> {
        self.central_frequencies = Some(c);
        self.validate()?;
        Ok(self)
    }

    /// Re-expresses the config in a new time unit of `unit` old units
    /// (e.g. `unit = 1e-12` turns seconds into picoseconds).
    pub fn in_time_unit(&self, unit: f64) -> Self {
        let mut out = *self;
        out.tau /= unit;
        out.s_a /= unit;
        out.s_b /= unit;
        out.s_p /= unit;
        out.central_frequencies =
            self.central_frequencies.map(|c| CentralFrequencies { a: c.a * unit, b: c.b * unit, p: c.p * unit });
        out
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.tau, self.s_a, self.s_b, self.s_p, self.epsilon].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("non-finite model scalar".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        for (name, s) in [("s_a", self.s_a), ("s_b", self.s_b), ("s_p", self.s_p)] {
            if s <= 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {s}")));
            }
        }
        if self.epsilon < 0.0 {
            return Err(Error::InvalidConfig(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        if let Some(c) = self.central_frequencies {
            let (lhs, rhs) = match self.process {
                Process::Spdc | Process::Sfwm => (c.a + c.b, c.p),
                Process::Fc => (c.b - c.a, c.p),
            };
            let scale = c.a.abs().max(c.b.abs()).max(c.p.abs());
            if (lhs - rhs).abs() > ENERGY_TOLERANCE * scale {
                return Err(Error::InvalidConfig(format!(
                    "central frequencies violate energy conservation for {:?}: {lhs} vs {rhs}",
                    self.process
                )));
            }
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        derive_params(self)
    }
}

/// Derived scalars and matrices. Carries τ so that downstream formulas need
/// only the params and ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub tau: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub eta_ab: f64,
    pub mu2: f64,
    pub mua2: f64,
    pub mub2: f64,
    pub r4: f64,
    pub r2: f64,
    pub m4: f64,
    pub cal_n4: f64,
    pub cal_n2: f64,
    pub matrix_n: Matrix2<f64>,
    pub matrix_q: Matrix2<f64>,
    pub matrix_m: Matrix2<f64>,
    pub matrix_w: Matrix2<f64>,
}

impl DerivedParams {
    pub fn mu_a(&self) -> f64 {
        self.mua2.sqrt()
    }

    pub fn mu_b(&self) -> f64 {
        self.mub2.sqrt()
    }

    /// det N = μ_a²μ_b² − μ⁴, evaluated in the cancellation-free form τ²η_ab².
    pub fn det_n(&self) -> f64 {
        self.tau * self.tau * self.eta_ab * self.eta_ab
    }

    /// R⁴ in the form 4μ_a²μ_b² − μ⁴ (the stored value uses 4η_ab²τ² + 3μ⁴).
    pub fn r4_alt(&self) -> f64 {
        4.0 * self.mua2 * self.mub2 - self.mu2 * self.mu2
    }

    /// The same model with modes a and b exchanged.
    pub fn swapped(&self) -> DerivedParams {
        from_walkoffs(self.tau, self.eta_b, self.eta_a)
    }
}

pub fn derive_params(config: &GaussianConfig) -> Result<DerivedParams> {
    config.validate()?;
    let p = from_walkoffs(config.tau, config.s_p - config.s_a, config.s_p - config.s_b);
    let det_direct = p.mua2 * p.mub2 - p.mu2 * p.mu2;
    if det_direct < -1e-12 * p.mua2 * p.mub2 || !p.r2.is_finite() {
        return Err(Error::DegenerateModel(format!("mu_a^2 mu_b^2 - mu^4 = {det_direct} is negative")));
    }
    Ok(p)
}

fn from_walkoffs(tau: f64, eta_a: f64, eta_b: f64) -> DerivedParams {
    let t2 = tau * tau;
    let eta_ab = eta_a - eta_b;
    let mu2 = t2 + eta_a * eta_b;
    let mua2 = t2 + eta_a * eta_a;
    let mub2 = t2 + eta_b * eta_b;
    let mu4 = mu2 * mu2;
    let x = t2 * eta_ab * eta_ab;
    let r4 = 4.0 * x + 3.0 * mu4;
    let m4 = 4.0 * x + mu4;
    let cal_n4 = mu4 + 2.0 * x;
    let mu6 = mu4 * mu2;
    DerivedParams {
        tau,
        eta_a,
        eta_b,
        eta_ab,
        mu2,
        mua2,
        mub2,
        r4,
        r2: r4.sqrt(),
        m4,
        cal_n4,
        cal_n2: cal_n4.sqrt(),
        matrix_n: Matrix2::new(mua2, mu2, mu2, mub2),
        matrix_q: Matrix2::new(m4 * mua2, mu6, mu6, m4 * mub2),
        matrix_m: Matrix2::new(2.0 * mua2, mu2, mu2, 2.0 * mub2),
        matrix_w: Matrix2::new(2.0 * mua2, -mu2, -mu2, 2.0 * mub2),
    }
}

/// Bulk parameters of a crystal experiment in consistent units (SI by default:
/// metres, metres per second, seconds, rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSetup {
    pub length: f64,
    pub gamma: f64,
    pub v_a: f64,
    pub v_b: f64,
    pub v_p: f64,
    pub tau: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central_frequencies: Option<CentralFrequencies>,
    #[serde(default)]
    pub process: Process,
}

impl PhysicalSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidConfig(format!("length must be positive, got {}", self.length)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {}", self.gamma)));
        }
        for (name, v) in [("v_a", self.v_a), ("v_b", self.v_b), ("v_p", self.v_p)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn slope(&self, v: f64) -> f64 {
        self.gamma.sqrt() * self.length / (2.0 * v)
    }
}

/// s_i = √γ·L/(2 v_i); τ, ε and the central frequencies pass through.
pub fn from_physical(setup: &PhysicalSetup) -> Result<GaussianConfig> {
    setup.validate()?;
    let cfg = GaussianConfig {
        tau: setup.tau,
        s_a: setup.slope(setup.v_a),
        s_b: setup.slope(setup.v_b),
        s_p: setup.slope(setup.v_p),
        epsilon: setup.epsilon,
        central_frequencies: setup.central_frequencies,
        process: setup.process,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Root x of sin(x)/x = 1/2 on (0, π), by bisection.
pub fn sinc_half_maximum() -> f64 {
    let f = |x: f64| x.sin() / x - 0.5;
    let (mut lo, mut hi) = (1e-3, std::f64::consts::PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// γ such that exp(−γx²) and sinc(x) share their half-maximum point.
pub fn matching_gamma() -> f64 {
    let x = sinc_half_maximum();
    std::f64::consts::LN_2 / (x * x)
}
