//! Entanglement (Schmidt number) and time-ordering figures of merit.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsa::ComplexKernel;
use crate::model::{DerivedParams, PhysicalSetup};

/// Closed-form Schmidt number; `value` is +∞ with `divergent` set when
/// μ_a²μ_b² = μ⁴.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchmidtNumber {
    pub value: f64,
    pub divergent: bool,
}

/// S = μ_aμ_b/√(μ_a²μ_b² − μ⁴).
///
/// The radicand equals τ²η_ab², so S = √(1 + μ⁴/(τ²η_ab²)), which is exactly
/// 1 when μ = 0.
pub fn schmidt_analytic(params: &DerivedParams) -> SchmidtNumber {
    let det = params.det_n();
    if !(det > 0.0) {
        return SchmidtNumber { value: f64::INFINITY, divergent: true };
    }
    let s = (1.0 + params.mu2 * params.mu2 / det).sqrt();
    if s.is_finite() {
        SchmidtNumber { value: s, divergent: false }
    } else {
        SchmidtNumber { value: f64::INFINITY, divergent: true }
    }
}

/// Schmidt decomposition of a sampled kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtReport {
    pub schmidt_number: f64,
    /// Singular values of the quadrature-weighted kernel, nonincreasing.
    pub singular_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_value: Option<f64>,
}

/// Trapezoid cell widths of a strictly increasing grid.
fn cell_widths(g: &[f64]) -> Vec<f64> {
    let n = g.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let lo = if i == 0 { g[0] } else { 0.5 * (g[i - 1] + g[i]) };
            let hi = if i == n - 1 { g[n - 1] } else { 0.5 * (g[i] + g[i + 1]) };
            hi - lo
        })
        .collect()
}

fn boundary_ratio(m: &DMatrix<f64>) -> f64 {
    let (r, c) = (m.nrows(), m.ncols());
    let peak = m.iter().fold(0.0f64, |a, v| a.max(*v));
    let mut edge = 0.0f64;
    for i in 0..r {
        edge = edge.max(m[(i, 0)]).max(m[(i, c - 1)]);
    }
    for j in 0..c {
        edge = edge.max(m[(0, j)]).max(m[(r - 1, j)]);
    }
    if peak > 0.0 {
        edge / peak
    } else {
        0.0
    }
}

/// Singular values of K·√(Δω_aΔω_b) and their inverse participation ratio
/// S = (Σσ²)²/Σσ⁴.
///
/// Fails with `GridTooNarrow` when the kernel magnitude on the grid boundary
/// exceeds 1e-8 of its peak.
pub fn schmidt_numeric(kernel: &ComplexKernel) -> Result<SchmidtReport> {
    let mags = kernel.values.map(|v| v.norm());
    let ratio = boundary_ratio(&mags);
    if ratio > 1e-8 {
        return Err(Error::GridTooNarrow(format!("kernel boundary magnitude is {ratio:.2e} of its peak (limit 1e-8)")));
    }
    let wa = cell_widths(&kernel.grid_a);
    let wb = cell_widths(&kernel.grid_b);
    let real = kernel.values.iter().all(|v| v.im == 0.0);
    let mut sv: Vec<f64> = if real {
        let m = DMatrix::from_fn(wa.len(), wb.len(), |i, j| kernel.values[(i, j)].re * (wa[i] * wb[j]).sqrt());
        m.singular_values().iter().copied().collect()
    } else {
        let m = DMatrix::from_fn(wa.len(), wb.len(), |i, j| kernel.values[(i, j)] * (wa[i] * wb[j]).sqrt());
        m.singular_values().iter().copied().collect()
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    let s2: f64 = sv.iter().map(|s| s * s).sum();
    let s4: f64 = sv.iter().map(|s| s.powi(4)).sum();
    if !(s4 > 0.0) {
        return Err(Error::DegenerateModel("kernel is identically zero".into()));
    }
    Ok(SchmidtReport { schmidt_number: s2 * s2 / s4, singular_values: sv, analytic_value: None })
}

/// τ²/R², at most 1/√3.
pub fn tau2_over_r2(params: &DerivedParams) -> f64 {
    params.tau * params.tau / params.r2
}

/// r ≤ 2π²ε²τ²/R².
pub fn fom_r_bound(params: &DerivedParams, eps: f64) -> f64 {
    2.0 * PI * PI * eps * eps * tau2_over_r2(params)
}

fn argmax_on_boundary(m: &DMatrix<f64>) -> bool {
    let (r, c) = (m.nrows(), m.ncols());
    let mut best = (0, 0);
    for j in 0..c {
        for i in 0..r {
            if m[(i, j)].abs() > m[best].abs() {
                best = (i, j);
            }
        }
    }
    r > 2 && c > 2 && (best.0 == 0 || best.0 == r - 1 || best.1 == 0 || best.1 == c - 1)
}

/// r = max|J3|/max|J1| over co-registered grids.
///
/// Only grid points are searched, so the estimate approaches the continuous
/// maximum from below as the grid is refined.
pub fn fom_r_measured(j1_grid: &DMatrix<f64>, j3_grid: &DMatrix<f64>) -> Result<f64> {
    if j1_grid.shape() != j3_grid.shape() || j1_grid.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "J1 grid {:?} and J3 grid {:?} are not co-registered",
            j1_grid.shape(),
            j3_grid.shape()
        )));
    }
    let m1 = j1_grid.amax();
    let m3 = j3_grid.amax();
    if !(m1 > 0.0) {
        return Err(Error::DegenerateModel("J1 vanishes on the grid".into()));
    }
    if m3 == 0.0 {
        return Ok(0.0);
    }
    for (name, g) in [("J1", j1_grid), ("J3", j3_grid)] {
        if argmax_on_boundary(g) {
            return Err(Error::GridTooNarrow(format!("the maximum of |{name}| lies on the grid boundary")));
        }
    }
    Ok(m3 / m1)
}

/// Time scales of walk-off and transit for the two generated fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopropagationTimes {
    /// v_pτ/|v_a − v_p|; +∞ when v_a = v_p.
    pub walkoff_time_a: f64,
    pub walkoff_time_b: f64,
    /// L/v_a.
    pub transit_time_a: f64,
    pub transit_time_b: f64,
    pub infinite_walkoff_a: bool,
    pub infinite_walkoff_b: bool,
    /// walkoff/((√γ/2)·transit) per mode; 1 is the separability condition
    /// η_a = −η_b = τ read mode by mode.
    pub condition_ratio_a: f64,
    pub condition_ratio_b: f64,
}

pub fn copropagation_times(setup: &PhysicalSetup) -> Result<CopropagationTimes> {
    setup.validate()?;
    let walk = |v: f64| {
        let d = (v - setup.v_p).abs();
        if d == 0.0 {
            f64::INFINITY
        } else {
            setup.v_p * setup.tau / d
        }
    };
    let (wa, wb) = (walk(setup.v_a), walk(setup.v_b));
    let (ta, tb) = (setup.length / setup.v_a, setup.length / setup.v_b);
    let half_root_gamma = setup.gamma.sqrt() / 2.0;
    Ok(CopropagationTimes {
        walkoff_time_a: wa,
        walkoff_time_b: wb,
        transit_time_a: ta,
        transit_time_b: tb,
        infinite_walkoff_a: wa.is_infinite(),
        infinite_walkoff_b: wb.is_infinite(),
        condition_ratio_a: wa / (half_root_gamma * ta),
        condition_ratio_b: wb / (half_root_gamma * tb),
    })
}
