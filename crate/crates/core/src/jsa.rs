//! Joint spectral amplitude: the first-order term J1, the third-order
//! time-ordering corrections J3 (real) and K3 (imaginary), and grid sampling.
//!
//! All arguments are detunings from the central frequencies.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DerivedParams;
use crate::quad::{gauss_legendre, integrate_half_line, QuadratureSpec};
use crate::specfun::gauss_erfi;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Detuning {
    pub d_omega_a: f64,
    pub d_omega_b: f64,
}

impl Detuning {
    pub fn new(d_omega_a: f64, d_omega_b: f64) -> Self {
        Detuning { d_omega_a, d_omega_b }
    }

    pub fn swapped(self) -> Self {
        Detuning::new(self.d_omega_b, self.d_omega_a)
    }

    fn at(self, e: Error) -> Error {
        Error::AtPoint { d_omega_a: self.d_omega_a, d_omega_b: self.d_omega_b, source: Box::new(e) }
    }
}

pub(crate) fn quad_form(m: &Matrix2<f64>, u: Detuning) -> f64 {
    let (a, b) = (u.d_omega_a, u.d_omega_b);
    m[(0, 0)] * a * a + 2.0 * m[(0, 1)] * a * b + m[(1, 1)] * b * b
}

/// A complex two-argument amplitude sampled on a rectangular detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexKernel {
    pub grid_a: Vec<f64>,
    pub grid_b: Vec<f64>,
    /// `values[(i, j)]` is the kernel at `(grid_a[i], grid_b[j])`.
    pub values: DMatrix<Complex64>,
    pub normalization_note: String,
}

impl ComplexKernel {
    pub fn new(
        grid_a: Vec<f64>,
        grid_b: Vec<f64>,
        values: DMatrix<Complex64>,
        normalization_note: impl Into<String>,
    ) -> Result<Self> {
        check_grid(&grid_a, "grid_a")?;
        check_grid(&grid_b, "grid_b")?;
        if values.nrows() != grid_a.len() || values.ncols() != grid_b.len() {
            return Err(Error::InvalidConfig(format!(
                "kernel is {}x{} but grids are {}x{}",
                values.nrows(),
                values.ncols(),
                grid_a.len(),
                grid_b.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidConfig("kernel has non-finite values".into()));
        }
        Ok(ComplexKernel { grid_a, grid_b, values, normalization_note: normalization_note.into() })
    }

    /// Samples a real function of two detunings.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid_a: Vec<f64>, grid_b: Vec<f64>, note: &str, f: F) -> Result<Self> {
        let values = DMatrix::from_fn(grid_a.len(), grid_b.len(), |i, j| Complex64::new(f(grid_a[i], grid_b[j]), 0.0));
        ComplexKernel::new(grid_a, grid_b, values, note)
    }
}

pub(crate) fn check_grid(g: &[f64], name: &str) -> Result<()> {
    if g.is_empty() {
        return Err(Error::InvalidConfig(format!("{name} is empty")));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} has non-finite entries")));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(format!("{name} is not strictly increasing")));
    }
    Ok(())
}

/// `n` evenly spaced points on [−span, span].
pub fn linspace(span: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64).collect()
}

/// Half-width of the default plotting grid: `sigmas/√λ_min(N)`.
///
/// When N is singular (η_ab = 0) J1 does not decay along one direction; the
/// largest eigenvalue is used instead.
pub fn default_span(params: &DerivedParams, sigmas: f64) -> f64 {
    let eig = SymmetricEigen::new(params.matrix_n).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let lambda = if lo > 1e-12 * hi { lo } else { hi };
    sigmas / lambda.sqrt()
}

/// J1 = −(ετ/√π)·exp(−uNuᵀ).
pub fn j1(params: &DerivedParams, eps: f64, u: Detuning) -> f64 {
    -(eps * params.tau / PI.sqrt()) * (-quad_form(&params.matrix_n, u)).exp()
}

/// V at the grid centre in closed form (continuous through μ² = 0).
pub fn v_center(params: &DerivedParams) -> f64 {
    let r2 = params.r2;
    if params.mu2 > 0.0 {
        (r2 / params.mu2).atan() / (2.0 * r2)
    } else if params.mu2 < 0.0 {
        (PI + (r2 / params.mu2).atan()) / (2.0 * r2)
    } else {
        PI / (4.0 * r2)
    }
}

fn oscillation_wavenumber(params: &DerivedParams) -> f64 {
    4.0 * params.tau * params.eta_ab / 3f64.sqrt()
}

/// ∫₀^∞∫₀^∞ dp dq e^{−(p,q)M(p,q)ᵀ} cos(4τη_ab(δω_a q + δω_b p)/√3).
///
/// Nested adaptive Gauss–Kronrod on half-lines mapped to (0, 1). `abs_tol` is
/// taken relative to the natural scale 1/R² of the integral.
pub fn v_integral(params: &DerivedParams, u: Detuning, quad: &QuadratureSpec) -> Result<f64> {
    quad.validate()?;
    let m = params.matrix_m;
    let k = oscillation_wavenumber(params);
    let (ka, kb) = (k * u.d_omega_a, k * u.d_omega_b);
    let scale_p = 1.0 / m[(0, 0)].sqrt();
    let scale_q = 1.0 / m[(1, 1)].sqrt();
    let outer = QuadratureSpec { abs_tol: quad.abs_tol / params.r2, ..*quad };
    let inner = QuadratureSpec {
        rel_tol: 0.1 * quad.rel_tol,
        abs_tol: 0.1 * quad.abs_tol / params.r2 / scale_p,
        max_nodes: quad.max_nodes,
    };
    let mut failure: Option<Error> = None;
    let result = integrate_half_line(
        |p| {
            if failure.is_some() {
                return 0.0;
            }
            let a = m[(0, 0)] * p * p;
            let b = 2.0 * m[(0, 1)] * p;
            let phase_p = kb * p;
            match integrate_half_line(
                |q| (-(a + b * q + m[(1, 1)] * q * q)).exp() * (ka * q + phase_p).cos(),
                scale_q,
                &inner,
                "q",
            ) {
                Ok(r) => r.value,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        scale_p,
        &outer,
        "p",
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(result?.value)
}

/// W(u) = (2π^{3/2}ε³τ³/(3R²))·e^{−uQuᵀ/R⁴}.
pub fn w_term(params: &DerivedParams, eps: f64, u: Detuning) -> f64 {
    let t = params.tau;
    2.0 * PI.powf(1.5) * (eps * t).powi(3) / (3.0 * params.r2) * (-quad_form(&params.matrix_q, u) / params.r4).exp()
}

/// Z(u) = 4√π τ³ε³·e^{−uNuᵀ/3}.
pub fn z_term(params: &DerivedParams, eps: f64, u: Detuning) -> f64 {
    4.0 * PI.sqrt() * (eps * params.tau).powi(3) * (-quad_form(&params.matrix_n, u) / 3.0).exp()
}

// e^{−uNuᵀ/3} below this annihilates any V (and W ≤ it), so J3 = 0.
const NEGLIGIBLE_GAUSSIAN: f64 = 1e-300;

/// J3 = W − Z·V with V from [`v_integral`].
pub fn j3(params: &DerivedParams, eps: f64, u: Detuning, quad: &QuadratureSpec) -> Result<f64> {
    // W and Z·V cancel identically when η_ab = 0.
    if params.eta_ab == 0.0 || (-quad_form(&params.matrix_n, u) / 3.0).exp() < NEGLIGIBLE_GAUSSIAN {
        return Ok(0.0);
    }
    let v = v_integral(params, u, quad).map_err(|e| u.at(e))?;
    Ok(w_term(params, eps, u) - z_term(params, eps, u) * v)
}

/// K3 = −ε³π^{3/2}(τ³/R²)·e^{−uQuᵀ/R⁴}·(erfi(y_ab) + erfi(y_ba)).
pub fn k3(params: &DerivedParams, eps: f64, u: Detuning) -> Result<f64> {
    let t = params.tau;
    let (a, b) = (u.d_omega_a, u.d_omega_b);
    let c = (2.0f64 / 3.0).sqrt() * t / params.r2;
    let y_ab = c * (-params.eta_ab) * (2.0 * a * params.mua2 - b * params.mu2) / params.mu_a();
    let y_ba = c * params.eta_ab * (2.0 * b * params.mub2 - a * params.mu2) / params.mu_b();
    let e = quad_form(&params.matrix_q, u) / params.r4;
    let s = gauss_erfi(e, y_ab).map_err(|err| u.at(err))? + gauss_erfi(e, y_ba).map_err(|err| u.at(err))?;
    Ok(-eps.powi(3) * PI.powf(1.5) * t.powi(3) / params.r2 * s)
}

/// J = J1 + J3 − i·K3, truncated at third order.
pub fn jsa_total(params: &DerivedParams, eps: f64, u: Detuning, quad: &QuadratureSpec) -> Result<Complex64> {
    Ok(Complex64::new(j1(params, eps, u) + j3(params, eps, u, quad)?, -k3(params, eps, u)?))
}

/// |J3| ≤ 2π^{3/2}ε³τ³/R².
pub fn j3_bound(params: &DerivedParams, eps: f64) -> f64 {
    2.0 * PI.powf(1.5) * (eps * params.tau).powi(3) / params.r2
}

/// Fixed tensor-product Gauss–Legendre rule for V, shared by every point of a
/// grid so that the grid values are bit-stable and cheap.
///
/// The quarter plane is truncated at radius ρ with λ_min(M)ρ² = 42 (the
/// discarded mass is below e^{−42} of the total) and split into equal panels;
/// the panel count doubles until V changes by less than the tolerance at the
/// most oscillatory points of the detuning window.
#[derive(Debug, Clone)]
pub struct VRule {
    k: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    /// weights[(iq, ip)] including e^{−(p,q)M(p,q)ᵀ}
    weights: DMatrix<f64>,
}

const V_RULE_ORDER: usize = 16;
const V_RULE_MAX_PANELS: usize = 128;

impl VRule {
    fn with_panels(params: &DerivedParams, panels: usize) -> VRule {
        let m = params.matrix_m;
        let lam = SymmetricEigen::new(m).eigenvalues.min();
        let rho = (42.0 / lam).sqrt();
        let (x, w) = gauss_legendre(V_RULE_ORDER);
        let h = rho / panels as f64;
        let mut nodes = Vec::with_capacity(panels * V_RULE_ORDER);
        let mut wts = Vec::with_capacity(panels * V_RULE_ORDER);
        for k in 0..panels {
            let c = (k as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(c + 0.5 * h * xi);
                wts.push(0.5 * h * wi);
            }
        }
        let n = nodes.len();
        let weights = DMatrix::from_fn(n, n, |iq, ip| {
            let (p, q) = (nodes[ip], nodes[iq]);
            wts[ip] * wts[iq] * (-(m[(0, 0)] * p * p + 2.0 * m[(0, 1)] * p * q + m[(1, 1)] * q * q)).exp()
        });
        VRule { k: oscillation_wavenumber(params), p: nodes.clone(), q: nodes, weights }
    }

    /// Builds a rule accurate over |δω_a| ≤ max_a, |δω_b| ≤ max_b.
    pub fn new(params: &DerivedParams, max_a: f64, max_b: f64, quad: &QuadratureSpec) -> Result<VRule> {
        quad.validate()?;
        let probes = [
            Detuning::new(0.0, 0.0),
            Detuning::new(max_a, max_b),
            Detuning::new(max_a, -max_b),
            Detuning::new(max_a, 0.0),
            Detuning::new(0.0, max_b),
        ];
        let tol = (quad.abs_tol / params.r2).max(quad.rel_tol * v_center(params));
        let mut panels = 2;
        let mut rule = VRule::with_panels(params, panels);
        let mut prev: Vec<f64> = probes.iter().map(|u| rule.eval(*u)).collect();
        loop {
            panels *= 2;
            let next_rule = VRule::with_panels(params, panels);
            let next: Vec<f64> = probes.iter().map(|u| next_rule.eval(*u)).collect();
            let change = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            rule = next_rule;
            prev = next;
            if change <= tol {
                return Ok(rule);
            }
            if panels >= V_RULE_MAX_PANELS || rule.p.len().pow(2) > quad.max_nodes.max(1 << 20) {
                return Err(Error::QuadratureFailure {
                    axis: "p,q (fixed rule)".into(),
                    estimate: change,
                    evaluations: rule.p.len().pow(2),
                });
            }
        }
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.p.len()
    }

    pub fn eval(&self, u: Detuning) -> f64 {
        let (cq, sq) = self.trig(&self.q, u.d_omega_a);
        let (cp, sp) = self.trig(&self.p, u.d_omega_b);
        let wc = &self.weights * cp;
        let ws = &self.weights * sp;
        cq.dot(&wc) - sq.dot(&ws)
    }

    fn trig(&self, nodes: &[f64], w: f64) -> (nalgebra::DVector<f64>, nalgebra::DVector<f64>) {
        let kw = self.k * w;
        let c = nalgebra::DVector::from_iterator(nodes.len(), nodes.iter().map(|x| (kw * x).cos()));
        let s = nalgebra::DVector::from_iterator(nodes.len(), nodes.iter().map(|x| (kw * x).sin()));
        (c, s)
    }

    /// V on a full grid: `out[(i, j)] = V(grid_a[i], grid_b[j])`.
    pub fn eval_grid(&self, grid_a: &[f64], grid_b: &[f64]) -> DMatrix<f64> {
        let cols: Vec<(nalgebra::DVector<f64>, nalgebra::DVector<f64>)> = grid_b
            .iter()
            .map(|&b| {
                let (cp, sp) = self.trig(&self.p, b);
                (&self.weights * cp, &self.weights * sp)
            })
            .collect();
        let rows: Vec<Vec<f64>> = grid_a
            .par_iter()
            .map(|&a| {
                let (cq, sq) = self.trig(&self.q, a);
                cols.iter().map(|(wc, ws)| cq.dot(wc) - sq.dot(ws)).collect()
            })
            .collect();
        DMatrix::from_fn(grid_a.len(), grid_b.len(), |i, j| rows[i][j])
    }
}

/// The three real components of the truncated JSA on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JsaComponents {
    pub grid_a: Vec<f64>,
    pub grid_b: Vec<f64>,
    pub j1: DMatrix<f64>,
    pub j3: DMatrix<f64>,
    pub k3: DMatrix<f64>,
}

impl JsaComponents {
    pub fn total(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.j1.nrows(), self.j1.ncols(), |i, j| {
            Complex64::new(self.j1[(i, j)] + self.j3[(i, j)], -self.k3[(i, j)])
        })
    }
}

/// J1, J3 and K3 on a grid. J3 uses one [`VRule`] for the whole window.
pub fn jsa_components(
    params: &DerivedParams,
    eps: f64,
    grid_a: &[f64],
    grid_b: &[f64],
    quad: &QuadratureSpec,
) -> Result<JsaComponents> {
    check_grid(grid_a, "grid_a")?;
    check_grid(grid_b, "grid_b")?;
    let max_a = grid_a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let max_b = grid_b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rule = VRule::new(params, max_a, max_b, quad)?;
    let v = rule.eval_grid(grid_a, grid_b);
    let (na, nb) = (grid_a.len(), grid_b.len());
    let mut j1m = DMatrix::zeros(na, nb);
    let mut j3m = DMatrix::zeros(na, nb);
    let mut k3m = DMatrix::zeros(na, nb);
    for i in 0..na {
        for j in 0..nb {
            let u = Detuning::new(grid_a[i], grid_b[j]);
            j1m[(i, j)] = j1(params, eps, u);
            j3m[(i, j)] = if params.eta_ab == 0.0 || (-quad_form(&params.matrix_n, u) / 3.0).exp() < NEGLIGIBLE_GAUSSIAN
            {
                0.0
            } else {
                w_term(params, eps, u) - z_term(params, eps, u) * v[(i, j)]
            };
            k3m[(i, j)] = k3(params, eps, u)?;
        }
    }
    Ok(JsaComponents { grid_a: grid_a.to_vec(), grid_b: grid_b.to_vec(), j1: j1m, j3: j3m, k3: k3m })
}

/// J1 + J3 − iK3 sampled on a grid.
pub fn jsa_grid(
    params: &DerivedParams,
    eps: f64,
    grid_a: &[f64],
    grid_b: &[f64],
    quad: &QuadratureSpec,
) -> Result<ComplexKernel> {
    let c = jsa_components(params, eps, grid_a, grid_b, quad)?;
    ComplexKernel::new(
        c.grid_a.clone(),
        c.grid_b.clone(),
        c.total(),
        "J1 + J3 - i K3 (third-order truncation), no extra prefactors",
    )
}
