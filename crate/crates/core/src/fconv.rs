//! Frequency-conversion pieces: the second-order kernel G2, dressing of a
//! seed photon, its figure of merit ρ, and the multimode beam-splitter
//! decomposition (g_j, A_j, B_j) of the first-order conversion kernel.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsa::{check_grid, j1, Detuning};
use crate::metrics::schmidt_analytic;
use crate::model::DerivedParams;
use crate::quad::{integrate, QuadratureSpec};
use crate::specfun::{dawson, gauss_erfi, hermite_function};

/// Highest mode index served by [`fc_mode`].
pub const FC_MODE_MAX_INDEX: usize = 32;

fn g2_generic(eps: f64, tau: f64, mu_self: f64, mu_other: f64, eta: f64, w: f64, wp: f64) -> Result<f64> {
    let x_plus = tau * eta * (wp + w) / (std::f64::consts::SQRT_2 * mu_other);
    let x_minus = (w - wp) * mu_self / std::f64::consts::SQRT_2;
    let g = gauss_erfi(x_minus * x_minus + x_plus * x_plus, x_plus)?;
    Ok(eps * eps * (PI / 2.0).sqrt() * tau * tau / mu_other * g)
}

/// G2^a(δω_a, δω_a′) = ε²√(π/2)(τ²/μ_b)e^{−x₋²−x₊²}erfi(x₊).
///
/// Real and symmetric in its two arguments.
pub fn g2(params: &DerivedParams, eps: f64, w: f64, w_prime: f64) -> Result<f64> {
    g2_generic(eps, params.tau, params.mu_a(), params.mu_b(), -params.eta_ab, w, w_prime)
}

/// G2^b, obtained from G2^a by exchanging a and b.
pub fn g2_b(params: &DerivedParams, eps: f64, w: f64, w_prime: f64) -> Result<f64> {
    g2_generic(eps, params.tau, params.mu_b(), params.mu_a(), params.eta_ab, w, w_prime)
}

/// Tabulated seed amplitude f_a on an increasing detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSamples {
    pub omega: Vec<f64>,
    pub values: Vec<Complex64>,
}

/// Seed f_a(δω) = ν·exp(−τ_a²δω²), or tabulated samples when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedProfile {
    pub nu: Complex64,
    pub tau_a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<SeedSamples>,
}

impl SeedProfile {
    pub fn gaussian(nu: Complex64, tau_a: f64) -> Self {
        SeedProfile { nu, tau_a, samples: None }
    }

    pub fn value(&self, w: f64) -> Complex64 {
        self.nu * (-self.tau_a * self.tau_a * w * w).exp()
    }
}

/// δf_a(δω) = −2πi∫dω′ f_a(ω′)G2(δω, ω′) on each grid point.
///
/// Gaussian seeds are integrated adaptively over the overlap of the seed and
/// the x₋ envelope of G2; tabulated seeds with the trapezoidal rule.
pub fn dressed_seed(
    params: &DerivedParams,
    eps: f64,
    seed: &SeedProfile,
    grid: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<Complex64>> {
    check_grid(grid, "grid")?;
    quad.validate()?;
    let minus_two_pi_i = Complex64::new(0.0, -2.0 * PI);
    if let Some(s) = &seed.samples {
        check_grid(&s.omega, "seed grid")?;
        if s.omega.len() != s.values.len() {
            return Err(Error::InvalidConfig("seed samples and grid differ in length".into()));
        }
        return grid
            .iter()
            .map(|&w| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..s.omega.len() - 1 {
                    let h = s.omega[k + 1] - s.omega[k];
                    let l = s.values[k] * g2(params, eps, w, s.omega[k])?;
                    let r = s.values[k + 1] * g2(params, eps, w, s.omega[k + 1])?;
                    acc += 0.5 * h * (l + r);
                }
                Ok(minus_two_pi_i * acc)
            })
            .collect();
    }
    if !(seed.tau_a > 0.0) {
        return Err(Error::InvalidConfig("seed duration tau_a must be positive".into()));
    }
    // e^{−45} ≈ 3e-20 relative cut-offs on both factors.
    let half_width_g = (90.0f64).sqrt() / params.mu_a();
    let half_width_f = (45.0f64).sqrt() / seed.tau_a;
    let scale = eps * eps * params.tau * params.tau / params.cal_n2.max(f64::MIN_POSITIVE);
    let spec = QuadratureSpec { abs_tol: quad.abs_tol * scale, ..*quad };
    grid.iter()
        .map(|&w| {
            let lo = (w - half_width_g).max(-half_width_f);
            let hi = (w + half_width_g).min(half_width_f);
            if lo >= hi {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let mut failure = None;
            let r = integrate(
                |wp| match g2(params, eps, w, wp) {
                    Ok(g) => (-seed.tau_a * seed.tau_a * wp * wp).exp() * g,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                },
                lo,
                hi,
                &spec,
                "omega_a'",
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(minus_two_pi_i * seed.nu * r.value)
        })
        .collect()
}

fn seed_q(params: &DerivedParams, w: f64) -> f64 {
    std::f64::consts::SQRT_2 * w * params.eta_ab * params.tau * params.mu_a() / params.cal_n2
}

/// Broadband-seed limit of [`dressed_seed`]:
/// δf = 2πi·ε²ν(πτ²/𝒩²)·e^{−q²}erfi(q), q = √2δω_aη_abτμ_a/𝒩².
///
/// This is the exact integral of G2 against a constant seed.
pub fn dressed_seed_closed(params: &DerivedParams, eps: f64, nu: Complex64, w: f64) -> Complex64 {
    if params.cal_n2 == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let q = seed_q(params, w);
    let h = 2.0 / PI.sqrt() * dawson(q);
    Complex64::new(0.0, 2.0 * PI) * nu * (eps * eps * PI * params.tau * params.tau / params.cal_n2 * h)
}

/// Maximiser q* and maximum ξ of e^{−q²}erfi(q) = (2/√π)D(q).
///
/// Stationarity is D′(q) = 1 − 2qD(q) = 0, bracketed on [0.5, 1.5] and solved
/// by bisection.
pub fn xi_maximizer() -> (f64, f64) {
    let g = |q: f64| 1.0 - 2.0 * q * dawson(q);
    let (mut lo, mut hi) = (0.5, 1.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    (q, 2.0 / PI.sqrt() * dawson(q))
}

/// ξ ≈ 0.610503, the maximum of e^{−q²}erfi(q).
pub fn xi_constant() -> f64 {
    xi_maximizer().1
}

/// ρ = max|δf_a|/max|f_a| for a broadband seed, = 2π²ξε²τ²/𝒩².
pub fn rho(params: &DerivedParams, eps: f64) -> f64 {
    if params.cal_n2 == 0.0 {
        return 0.0;
    }
    2.0 * PI * PI * xi_constant() * eps * eps * params.tau * params.tau / params.cal_n2
}

/// First-order conversion kernel J̃1(δω_a, δω_b) = J1(−δω_a, δω_b).
pub fn fc_kernel_j1(params: &DerivedParams, eps: f64, u: Detuning) -> f64 {
    j1(params, eps, Detuning::new(-u.d_omega_a, u.d_omega_b))
}

/// Schmidt structure of the conversion kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcModeSpec {
    pub s: f64,
    pub schmidt: f64,
    pub theta0: f64,
}

impl FcModeSpec {
    pub fn new(params: &DerivedParams, eps: f64) -> Result<Self> {
        let sn = schmidt_analytic(params);
        if sn.divergent {
            return Err(Error::DegenerateModel(
                "Schmidt number of the conversion kernel is infinite (eta_ab = 0)".into(),
            ));
        }
        let big_s = sn.value;
        let s = ((big_s - 1.0) / (big_s + 1.0)).max(0.0).sqrt();
        let theta0 = 2.0 * PI * eps * params.tau / (2.0 * params.mu_a() * params.mu_b()).sqrt();
        Ok(FcModeSpec { s, schmidt: big_s, theta0 })
    }

    /// g_j = θ₀√(1+s²)s^j.
    pub fn coupling(&self, j: usize) -> f64 {
        let sj = if j == 0 { 1.0 } else { self.s.powi(j as i32) };
        self.theta0 * (1.0 + self.s * self.s).sqrt() * sj
    }
}

pub fn fc_coupling(params: &DerivedParams, eps: f64, j: usize) -> Result<f64> {
    Ok(FcModeSpec::new(params, eps)?.coupling(j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeSide {
    A,
    B,
}

/// Mode function A_j (or B_j) sampled on `grid`.
///
/// A_j(ω) ∝ H_j(−μ_aω/√(S/2))e^{−μ_a²ω²/S}, B_j the same with +μ_b, both unit
/// normalised in L². Evaluated through the orthonormal Hermite recurrence.
pub fn fc_mode(params: &DerivedParams, j: usize, side: ModeSide, grid: &[f64]) -> Result<Vec<f64>> {
    if j > FC_MODE_MAX_INDEX {
        return Err(Error::InvalidConfig(format!("mode index {j} above {FC_MODE_MAX_INDEX}")));
    }
    check_grid(grid, "grid")?;
    let sn = schmidt_analytic(params);
    if sn.divergent {
        return Err(Error::DegenerateModel("Schmidt number is infinite".into()));
    }
    let (mu, sign) = match side {
        ModeSide::A => (params.mu_a(), -1.0),
        ModeSide::B => (params.mu_b(), 1.0),
    };
    let c = mu / (sn.value / 2.0).sqrt();
    let norm = c.sqrt();
    let vals: Vec<f64> = grid.iter().map(|&w| norm * hermite_function(j, sign * c * w)).collect();
    let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let edge = vals[0].abs().max(vals[vals.len() - 1].abs());
    if grid.len() < 2 || edge > 1e-8 * peak {
        return Err(Error::GridTooNarrow(format!(
            "mode {j} has boundary magnitude {:.2e} of its peak; widen the grid beyond ±{:.3}",
            edge / peak.max(f64::MIN_POSITIVE),
            6.0 * sn.value.sqrt() / mu
        )));
    }
    Ok(vals)
}

/// ε at which g_n = π/2 (complete conversion of mode n).
pub fn solve_epsilon_for_full_conversion(params: &DerivedParams, n: usize) -> Result<f64> {
    let g = FcModeSpec::new(params, 1.0)?.coupling(n);
    if g == 0.0 {
        return Err(Error::Unreachable { mode: n });
    }
    Ok(PI / 2.0 / g)
}
