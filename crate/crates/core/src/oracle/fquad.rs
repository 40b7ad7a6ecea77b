//! Direct quadrature of the third-order Magnus integral built from the
//! pump-integrated F-function, independent of the closed-form reductions.

use std::f64::consts::PI;

use nalgebra::{Cholesky, Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jsa::Detuning;
use crate::model::GaussianConfig;
use crate::quad::{integrate_half_line, QuadratureSpec};

/// Gauss–Hermite order of the cross-check rule for the complete axes.
#[cfg(test)]
const HERMITE_NODES: usize = 64;

fn exponent(cfg: &GaussianConfig, wa: f64, wb: f64, t: f64) -> Complex64 {
    let d = cfg.s_p * cfg.s_p + cfg.tau * cfg.tau;
    let s = cfg.s_a * wa + cfg.s_b * wb;
    let z = Complex64::new(-2.0 * cfg.s_p * s, t);
    z * z / (4.0 * d) + Complex64::new(-s * s, t * (wa + wb))
}

fn prefactor(cfg: &GaussianConfig) -> f64 {
    -cfg.epsilon * cfg.tau / (cfg.s_p * cfg.s_p + cfg.tau * cfg.tau).sqrt()
}

/// F(δω_a, δω_b, t) = −ετ/√(s_p²+τ²)·exp((−2s_pS + it)²/(4(s_p²+τ²)) + it(δω_a+δω_b) − S²),
/// S = s_aδω_a + s_bδω_b.
pub fn f_function(cfg: &GaussianConfig, d_omega_a: f64, d_omega_b: f64, t: f64) -> Complex64 {
    prefactor(cfg) * exponent(cfg, d_omega_a, d_omega_b, t).exp()
}

/// Exponent of F(a,d,q+2r+s)·F(c,b,q−r−2s)·F(c,d,−q+r−s) without prefactors,
/// as a function of x = (q, c, d).
fn triple_exponent(cfg: &GaussianConfig, u: Detuning, r: f64, s: f64, x: &Vector3<f64>) -> Complex64 {
    let (q, c, d) = (x[0], x[1], x[2]);
    exponent(cfg, u.d_omega_a, d, q + 2.0 * r + s)
        + exponent(cfg, c, u.d_omega_b, q - r - 2.0 * s)
        + exponent(cfg, c, d, -q + r - s)
}

/// ½xᵀHx + gᵀx + e0, extracted by exact central differences of a quadratic.
struct Quadratic {
    h: Matrix3<Complex64>,
    g: Vector3<Complex64>,
    e0: Complex64,
}

fn extract_quadratic<F: Fn(&Vector3<f64>) -> Complex64>(e: F) -> Quadratic {
    let unit = |i: usize| Vector3::from_fn(|k, _| if k == i { 1.0 } else { 0.0 });
    let e0 = e(&Vector3::zeros());
    let mut g = Vector3::zeros();
    let mut h = Matrix3::zeros();
    for i in 0..3 {
        let (p, m) = (e(&unit(i)), e(&(-unit(i))));
        g[i] = (p - m) / 2.0;
        h[(i, i)] = p - 2.0 * e0 + m;
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let pp = e(&(unit(i) + unit(j)));
            let v = pp - e0 - g[i] - g[j] - 0.5 * (h[(i, i)] + h[(j, j)]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Quadratic { h, g, e0 }
}

/// Whitening of the constant quadratic part, shared by all (r, s).
struct InnerRule {
    h: Matrix3<Complex64>,
    p: Matrix3<f64>,
    q: Matrix3<f64>,
    /// √2·L⁻ᵀV: maps the diagonal coordinates w to y = x − x0.
    map: Matrix3<f64>,
    jacobian: f64,
    lambda: Vector3<f64>,
    #[cfg(test)]
    nodes: Vec<f64>,
    #[cfg(test)]
    weights: Vec<f64>,
}

impl InnerRule {
    fn new(h: &Matrix3<Complex64>) -> Result<Self> {
        let p = -h.map(|z| z.re);
        let q = h.map(|z| z.im);
        let chol = Cholesky::new(p)
            .ok_or_else(|| Error::DegenerateModel("F-product is not Gaussian-decaying in (q, ω_c, ω_d)".into()))?;
        let l = chol.l();
        let linv = l.try_inverse().expect("Cholesky factor is invertible");
        let b = linv * q * linv.transpose();
        let b = 0.5 * (b + b.transpose());
        let eig = SymmetricEigen::new(b);
        let map = 2f64.sqrt() * linv.transpose() * eig.eigenvectors;
        #[cfg(test)]
        let (nodes, weights) = crate::quad::gauss_hermite(HERMITE_NODES);
        Ok(InnerRule {
            h: *h,
            p,
            q,
            jacobian: map.determinant().abs(),
            map,
            lambda: eig.eigenvalues,
            #[cfg(test)]
            nodes,
            #[cfg(test)]
            weights,
        })
    }

    /// ∫e^{−aw² + iκw}dw, a = 1 − iλ, recentred on the complex saddle
    /// w* = iκ/(2a), where the integrand is exactly Gaussian:
    /// √(π/a)·e^{−κ²/(4a)} on the principal branch (Re a > 0).
    ///
    /// Recentring on the real axis only leaves e^{iκw} with κ growing like
    /// the half-line variables, and the result is then a tiny remainder of
    /// heavy cancellation that no fixed rule resolves.
    fn axis(lambda: f64, kappa: f64) -> Complex64 {
        let a = Complex64::new(1.0, -lambda);
        (PI / a).sqrt() * (-kappa * kappa / (4.0 * a)).exp()
    }

    /// Same factor by Gauss–Hermite on the line w = v/√a, real recentring
    /// only; accurate while |κ| is moderate.
    #[cfg(test)]
    fn axis_hermite(&self, lambda: f64, kappa: f64) -> Complex64 {
        let a = Complex64::new(1.0, -lambda);
        let ra = a.sqrt();
        let k = Complex64::new(0.0, kappa) / ra;
        let sum: Complex64 = self.nodes.iter().zip(&self.weights).map(|(&v, &w)| w * (k * v).exp()).sum();
        sum / ra
    }

    /// ∫d³x exp(½xᵀHx + gᵀx + e0) with H fixed by the rule.
    fn integrate(&self, g: &Vector3<Complex64>, e0: Complex64) -> Complex64 {
        let h = &self.h;
        let gr = g.map(|z| z.re);
        let gi = g.map(|z| z.im);
        let x0 = self.p.lu().solve(&gr).expect("P is positive definite");
        let x0c = x0.map(|v| Complex64::new(v, 0.0));
        let constant = 0.5 * (x0c.transpose() * h * x0c)[0] + (g.transpose() * x0c)[0] + e0;
        // Linear term after recentring is purely imaginary: i(Im g + Q x0).
        let lin = gi + self.q * x0;
        let kappa = self.map.transpose() * lin;
        let mut prod = Complex64::new(self.jacobian, 0.0);
        for k in 0..3 {
            prod *= Self::axis(self.lambda[k], kappa[k]);
        }
        prod * constant.exp()
    }
}

/// J3 from the five-dimensional triple-F integral:
/// J3 = −(3/4π)∫dq dω_c dω_d (∫₀^∞dr∫_{−∞}^0 ds − 2∫₀^∞dr∫₀^∞ds)F·F·F + c.c.
///
/// The F-product is Gaussian in (q, ω_c, ω_d). Its quadratic form is read
/// off numerically, whitened by the Cholesky factor of its real part and
/// diagonalised, so the complete integral splits into three complex
/// Gaussian factors. The half-lines r, s use nested adaptive Gauss–Kronrod.
pub fn oracle_j3(cfg: &GaussianConfig, u: Detuning, quad: &QuadratureSpec) -> Result<f64> {
    cfg.validate()?;
    quad.validate()?;
    if cfg.epsilon == 0.0 {
        return Ok(0.0);
    }
    let h = extract_quadratic(|x| triple_exponent(cfg, u, 0.0, 0.0, x)).h;
    let rule = InnerRule::new(&h)?;
    let pref = Complex64::new(prefactor(cfg).powi(3), 0.0);
    let inner = |r: f64, s: f64| -> f64 {
        let qd = extract_quadratic(|x| triple_exponent(cfg, u, r, s, x));
        2.0 * (pref * rule.integrate(&qd.g, qd.e0)).re
    };
    let scale = (cfg.s_p * cfg.s_p + cfg.tau * cfg.tau).sqrt();
    // Absolute tolerance relative to the size of the ε³τ³-scaled integrand.
    let spec_outer = QuadratureSpec { abs_tol: quad.abs_tol * pref.norm().max(f64::MIN_POSITIVE), ..*quad };
    let spec_inner = QuadratureSpec { abs_tol: spec_outer.abs_tol * 1e-2, rel_tol: quad.rel_tol * 1e-2, ..*quad };
    let mut failure: Option<Error> = None;
    let mut half_plane = |sign: f64, axis: &'static str| -> Result<f64> {
        let res = integrate_half_line(
            |r| {
                if failure.is_some() {
                    return 0.0;
                }
                match integrate_half_line(|s| inner(r, sign * s), scale, &spec_inner, "s") {
                    Ok(v) => v.value,
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            scale,
            &spec_outer,
            axis,
        );
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(res?.value)
    };
    let a1 = half_plane(-1.0, "r (s < 0)")?;
    let a2 = half_plane(1.0, "r (s > 0)")?;
    Ok(-3.0 / (4.0 * PI) * (a1 - 2.0 * a2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jsa::{j1, j3};
    use crate::quad::integrate;
    use approx::assert_relative_eq;

    fn cfg(tau: f64, sa: f64, sb: f64, sp: f64, eps: f64) -> GaussianConfig {
        GaussianConfig::new(tau, sa, sb, sp, eps).unwrap()
    }

    #[test]
    fn f_basics() {
        let c = cfg(1.0, 1.0, 2.0, 3.0, 0.5);
        let f0 = f_function(&c, 0.0, 0.0, 0.0);
        assert_relative_eq!(f0.re, -0.5 / 10f64.sqrt(), max_relative = 1e-15);
        assert_eq!(f0.im, 0.0);
        let mut seed = 0x2545f4914f6cdd1du64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 6.0 - 3.0
        };
        for _ in 0..100 {
            let (a, b, t) = (next(), next(), next() * 3.0);
            let x = f_function(&c, a, b, t);
            let y = f_function(&c, a, b, -t);
            assert!((x - y.conj()).norm() <= 1e-15 * x.norm());
        }
    }

    #[test]
    fn time_integral_of_f_is_two_pi_j1() {
        let c = cfg(0.8, 1.3, 0.4, 2.1, 0.3);
        let p = c.derive().unwrap();
        let spec = QuadratureSpec { rel_tol: 1e-12, abs_tol: 1e-15, max_nodes: 100_000 };
        for (a, b) in [(0.0, 0.0), (0.4, -0.7), (-1.0, 0.2)] {
            let re = integrate(|t| f_function(&c, a, b, t).re, -60.0, 60.0, &spec, "t").unwrap().value;
            let im = integrate(|t| f_function(&c, a, b, t).im, -60.0, 60.0, &spec, "t").unwrap().value;
            let expect = 2.0 * PI * j1(&p, c.epsilon, Detuning::new(a, b));
            assert!((re - expect).abs() < 1e-12, "{re} {expect}");
            assert!(im.abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_extraction_is_exact() {
        let c = cfg(1.0, 1.0, 2.0, 3.0, 1.0);
        let u = Detuning::new(0.3, -0.2);
        let qd = extract_quadratic(|x| triple_exponent(&c, u, 0.7, -0.4, x));
        let x = Vector3::new(0.3, -1.1, 0.8);
        let xc = x.map(|v| Complex64::new(v, 0.0));
        let model = 0.5 * (xc.transpose() * qd.h * xc)[0] + (qd.g.transpose() * xc)[0] + qd.e0;
        let direct = triple_exponent(&c, u, 0.7, -0.4, &x);
        assert!((model - direct).norm() < 1e-12 * (1.0 + direct.norm()));
    }

    #[test]
    fn inner_rule_matches_complex_gaussian_formula() {
        // ∫exp(½xᵀHx + gᵀx) = (2π)^{3/2}/√det(−H)·exp(½gᵀ(−H)⁻¹g) on the
        // principal branch, which is valid here by continuity from Im H = 0.
        let c = cfg(1.0, 1.0, 2.0, 3.0, 1.0);
        let u = Detuning::new(0.3, -0.2);
        for (r, s) in [(0.0, 0.0), (0.5, -0.3), (1.5, 0.8)] {
            let qd = extract_quadratic(|x| triple_exponent(&c, u, r, s, x));
            let rule = InnerRule::new(&qd.h).unwrap();
            let num = rule.integrate(&qd.g, qd.e0);
            let lu = (-qd.h).lu();
            let det = lu.determinant();
            let quad_term = 0.5 * (qd.g.transpose() * lu.solve(&qd.g).unwrap())[0];
            // Branch of √det followed along −(Re H + iθ Im H), θ: 0 → 1.
            let mut root = Complex64::new(1.0, 0.0);
            for k in 0..=200 {
                let th = k as f64 / 200.0;
                let d = (-qd.h.map(|z| Complex64::new(z.re, th * z.im))).lu().determinant().sqrt();
                root = if k == 0 || (d - root).norm() <= (d + root).norm() { d } else { -d };
            }
            assert!((root * root - det).norm() < 1e-9 * det.norm());
            let acc = (2.0 * PI).powf(1.5) / root * (quad_term + qd.e0).exp();
            assert!((num - acc).norm() < 1e-11 * acc.norm(), "{num} {acc}");
        }
    }

    #[test]
    fn hermite_rule_agrees_for_moderate_oscillation() {
        let c = cfg(1.0, 1.0, 2.0, 3.0, 1.0);
        let u = Detuning::new(0.3, -0.2);
        let qd = extract_quadratic(|x| triple_exponent(&c, u, 0.0, 0.0, x));
        let rule = InnerRule::new(&qd.h).unwrap();
        for &(lambda, kappa) in &[(0.0, 0.0), (0.3, 1.5), (-0.8, 4.0), (1.2, -6.0)] {
            let exact = InnerRule::axis(lambda, kappa);
            let gh = rule.axis_hermite(lambda, kappa);
            assert!((exact - gh).norm() < 1e-12, "{lambda} {kappa} {exact} {gh}");
        }
        // Large κ: the fixed real-line rule loses everything to cancellation.
        let exact = InnerRule::axis(0.0, 40.0);
        assert!(exact.norm() < 1e-150);
        assert!((rule.axis_hermite(0.0, 40.0) - exact).norm() > 1e-6);
    }

    #[test]
    fn matches_closed_form_j3() {
        let q = QuadratureSpec { rel_tol: 1e-9, abs_tol: 1e-12, max_nodes: 400_000 };
        let c = cfg(1.0, 1.0, 2.0, 3.0, 1.0);
        let v = oracle_j3(&c, Detuning::default(), &q).unwrap();
        assert_relative_eq!(v, -0.0187075212084854, max_relative = 1e-6);
        let w = oracle_j3(&c, Detuning::new(0.3, -0.2), &q).unwrap();
        assert_relative_eq!(w, -0.044314728385455804, max_relative = 1e-6);
        let p = c.derive().unwrap();
        let jq = QuadratureSpec { rel_tol: 1e-11, abs_tol: 1e-14, max_nodes: 1_000_000 };
        assert_relative_eq!(v, j3(&p, 1.0, Detuning::default(), &jq).unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn vanishes_and_scales() {
        let q = QuadratureSpec { rel_tol: 1e-7, abs_tol: 1e-10, max_nodes: 200_000 };
        // η_ab = 0: s_a = s_b.
        let flat = cfg(1.0, 1.5, 1.5, 2.5, 1.0);
        assert!(oracle_j3(&flat, Detuning::new(0.2, 0.1), &q).unwrap().abs() < 1e-9);
        let c1 = cfg(1.0, 2.0, 0.5, 1.5, 1.0);
        let c2 = cfg(1.0, 2.0, 0.5, 1.5, 2.0);
        let u = Detuning::new(0.1, 0.2);
        let a = oracle_j3(&c1, u, &q).unwrap();
        let b = oracle_j3(&c2, u, &q).unwrap();
        assert_relative_eq!(b, 8.0 * a, max_relative = 1e-12);
        assert_eq!(oracle_j3(&c1.with_epsilon(0.0), u, &q).unwrap(), 0.0);
    }
}
