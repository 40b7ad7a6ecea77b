//! Truncated Fock-space propagation of the pair-generation Hamiltonian,
//! compared against the analytic factorised unitary.
//!
//! Frequencies are discretised into equal bins of width Δ centred on zero
//! detuning; a bin operator carries the kernel value times Δ.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fconv::{g2, g2_b};
use crate::jsa::jsa_components;
use crate::model::GaussianConfig;
use crate::oracle::fquad::f_function;
use crate::quad::QuadratureSpec;

/// Largest supported pair count.
pub const MAX_PAIRS_LIMIT: usize = 3;

type Occupation = (Vec<u16>, Vec<u16>);

#[derive(Debug, Clone, Copy, PartialEq)]
struct PairMove {
    from: u32,
    to: u32,
    bin: u32,
    coef: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HopMove {
    from: u32,
    to: u32,
    target: u16,
    source: u16,
    coef: f64,
}

/// Identity of a basis, used to refuse comparisons across bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSignature {
    pub n_bins_a: usize,
    pub n_bins_b: usize,
    pub max_pairs: usize,
    pub seed: bool,
    pub width_bits: u64,
}

/// States with n_b ≤ max_pairs photon pairs (plus one extra a-photon in the
/// seed sector), as sorted bin multisets.
#[derive(Debug, Clone)]
pub struct FockBasis {
    pub omega_a: Vec<f64>,
    pub omega_b: Vec<f64>,
    pub width: f64,
    pub max_pairs: usize,
    pub seed: bool,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
    pair_moves: Vec<PairMove>,
    hop_a: Vec<HopMove>,
    hop_b: Vec<HopMove>,
}

fn multisets(n_bins: usize, size: usize) -> Vec<Vec<u16>> {
    fn rec(n: usize, size: usize, start: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for b in start..n {
            cur.push(b as u16);
            rec(n, size, b, cur, out);
            cur.pop();
        }
    }
    let mut out = vec![];
    rec(n_bins, size, 0, &mut Vec::with_capacity(size), &mut out);
    out
}

fn count(v: &[u16], bin: u16) -> usize {
    v.iter().filter(|&&x| x == bin).count()
}

fn inserted(v: &[u16], bin: u16) -> Vec<u16> {
    let mut w = v.to_vec();
    let pos = w.partition_point(|&x| x <= bin);
    w.insert(pos, bin);
    w
}

fn removed(v: &[u16], bin: u16) -> Vec<u16> {
    let mut w = v.to_vec();
    let pos = w.iter().position(|&x| x == bin).expect("bin is occupied");
    w.remove(pos);
    w
}

/// Bin centres (i − (n−1)/2)·width.
pub fn bin_centres(n: usize, width: f64) -> Vec<f64> {
    (0..n).map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * width).collect()
}

impl FockBasis {
    pub fn new(n_bins_a: usize, n_bins_b: usize, width: f64, max_pairs: usize, seed: bool) -> Result<Self> {
        if n_bins_a == 0 || n_bins_b == 0 || n_bins_a > u16::MAX as usize || n_bins_b > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!("bin counts {n_bins_a}x{n_bins_b} out of range")));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidConfig(format!("bin width must be positive, got {width}")));
        }
        if max_pairs > MAX_PAIRS_LIMIT {
            return Err(Error::InvalidConfig(format!("max_pairs {max_pairs} above {MAX_PAIRS_LIMIT}")));
        }
        let extra = usize::from(seed);
        let mut states = vec![];
        for p in 0..=max_pairs {
            let sa = multisets(n_bins_a, p + extra);
            let sb = multisets(n_bins_b, p);
            for a in &sa {
                for b in &sb {
                    states.push((a.clone(), b.clone()));
                }
            }
        }
        let index: HashMap<Occupation, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut pair_moves = vec![];
        let mut hop_a = vec![];
        let mut hop_b = vec![];
        for (k, (a, b)) in states.iter().enumerate() {
            if b.len() < max_pairs {
                for i in 0..n_bins_a as u16 {
                    for j in 0..n_bins_b as u16 {
                        let na = count(a, i) + 1;
                        let nb = count(b, j) + 1;
                        let t = index[&(inserted(a, i), inserted(b, j))];
                        pair_moves.push(PairMove {
                            from: k as u32,
                            to: t as u32,
                            bin: (i as usize * n_bins_b + j as usize) as u32,
                            coef: ((na * nb) as f64).sqrt(),
                        });
                    }
                }
            }
            let hops = |occ: &[u16], n_bins: usize, other: &[u16], on_a: bool, out: &mut Vec<HopMove>| {
                let mut sources: Vec<u16> = occ.to_vec();
                sources.dedup();
                for &src in &sources {
                    let n_src = count(occ, src);
                    let rest = removed(occ, src);
                    for tgt in 0..n_bins as u16 {
                        let n_tgt = count(&rest, tgt) + 1;
                        let new = inserted(&rest, tgt);
                        let key = if on_a { (new, other.to_vec()) } else { (other.to_vec(), new) };
                        out.push(HopMove {
                            from: k as u32,
                            to: index[&key] as u32,
                            target: tgt,
                            source: src,
                            coef: ((n_src * n_tgt) as f64).sqrt(),
                        });
                    }
                }
            };
            hops(a, n_bins_a, b, true, &mut hop_a);
            hops(b, n_bins_b, a, false, &mut hop_b);
        }
        Ok(FockBasis {
            omega_a: bin_centres(n_bins_a, width),
            omega_b: bin_centres(n_bins_b, width),
            width,
            max_pairs,
            seed,
            states,
            index,
            pair_moves,
            hop_a,
            hop_b,
        })
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn n_bins_a(&self) -> usize {
        self.omega_a.len()
    }

    pub fn n_bins_b(&self) -> usize {
        self.omega_b.len()
    }

    pub fn signature(&self) -> BasisSignature {
        BasisSignature {
            n_bins_a: self.n_bins_a(),
            n_bins_b: self.n_bins_b(),
            max_pairs: self.max_pairs,
            seed: self.seed,
            width_bits: self.width.to_bits(),
        }
    }

    /// Basis position of the state with the given occupied bins.
    pub fn position(&self, a_bins: &[u16], b_bins: &[u16]) -> Option<usize> {
        let mut a = a_bins.to_vec();
        let mut b = b_bins.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        self.index.get(&(a, b)).copied()
    }

    /// Occupied bins of basis state `k`.
    pub fn occupation(&self, k: usize) -> (&[u16], &[u16]) {
        let (a, b) = &self.states[k];
        (a, b)
    }

    pub fn vacuum(&self) -> Result<FockState> {
        if self.seed {
            return Err(Error::BasisMismatch("the seed sector has no vacuum".into()));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); self.dimension()];
        v[0] = Complex64::new(1.0, 0.0);
        Ok(FockState { amplitudes: v, signature: self.signature() })
    }

    /// Single a-photon with per-bin amplitudes `profile` (not renormalised).
    pub fn seed_state(&self, profile: &[Complex64]) -> Result<FockState> {
        if !self.seed {
            return Err(Error::BasisMismatch("basis has no seed sector".into()));
        }
        if profile.len() != self.n_bins_a() {
            return Err(Error::BasisMismatch(format!(
                "seed profile has {} bins, basis has {}",
                profile.len(),
                self.n_bins_a()
            )));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); self.dimension()];
        for (i, &f) in profile.iter().enumerate() {
            v[self.position(&[i as u16], &[]).expect("single-photon state exists")] = f;
        }
        Ok(FockState { amplitudes: v, signature: self.signature() })
    }
}

/// Amplitudes over a [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    pub amplitudes: Vec<Complex64>,
    pub signature: BasisSignature,
}

impl FockState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Euclidean distance between amplitude vectors over the same basis.
pub fn compare_states(x: &FockState, y: &FockState) -> Result<f64> {
    if x.signature != y.signature || x.amplitudes.len() != y.amplitudes.len() {
        return Err(Error::BasisMismatch(format!("{:?} vs {:?}", x.signature, y.signature)));
    }
    Ok(x.amplitudes.iter().zip(&y.amplitudes).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
}

/// Anti-Hermitian generator X = Σ(c_ij a_i†b_j† − c_ij* a_ib_j) + Σh^a_ij a_i†a_j + Σh^b_ij b_i†b_j
/// on the truncated space, with h^a, h^b anti-Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    /// Row-major over (a-bin, b-bin).
    pub pair: Vec<Complex64>,
    pub hop_a: Option<DMatrix<Complex64>>,
    pub hop_b: Option<DMatrix<Complex64>>,
}

impl Generator {
    pub fn zero(basis: &FockBasis) -> Self {
        Generator {
            pair: vec![Complex64::new(0.0, 0.0); basis.n_bins_a() * basis.n_bins_b()],
            hop_a: None,
            hop_b: None,
        }
    }

    pub fn apply(&self, basis: &FockBasis, y: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for m in &basis.pair_moves {
            let c = self.pair[m.bin as usize] * m.coef;
            out[m.to as usize] += c * y[m.from as usize];
            out[m.from as usize] -= c.conj() * y[m.to as usize];
        }
        for (h, moves) in [(&self.hop_a, &basis.hop_a), (&self.hop_b, &basis.hop_b)] {
            if let Some(h) = h {
                for m in moves.iter() {
                    out[m.to as usize] += h[(m.target as usize, m.source as usize)] * m.coef * y[m.from as usize];
                }
            }
        }
    }

    /// Upper bound on the induced 1-norm (equal to the ∞-norm here).
    fn norm_bound(&self, basis: &FockBasis) -> f64 {
        let mut col = vec![0.0; basis.dimension()];
        for m in &basis.pair_moves {
            let c = self.pair[m.bin as usize].norm() * m.coef;
            col[m.from as usize] += c;
            col[m.to as usize] += c;
        }
        for (h, moves) in [(&self.hop_a, &basis.hop_a), (&self.hop_b, &basis.hop_b)] {
            if let Some(h) = h {
                for m in moves.iter() {
                    col[m.from as usize] += h[(m.target as usize, m.source as usize)].norm() * m.coef;
                }
            }
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.pair.iter().all(|z| *z == Complex64::new(0.0, 0.0))
            && self.hop_a.as_ref().is_none_or(|h| h.iter().all(|z| *z == Complex64::new(0.0, 0.0)))
            && self.hop_b.as_ref().is_none_or(|h| h.iter().all(|z| *z == Complex64::new(0.0, 0.0)))
    }

    /// Dense matrix of the generator (small bases only).
    pub fn to_dense(&self, basis: &FockBasis) -> DMatrix<Complex64> {
        let n = basis.dimension();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            e[k] = Complex64::new(1.0, 0.0);
            self.apply(basis, &e, &mut out);
            m.set_column(k, &nalgebra::DVector::from_column_slice(&out));
            e[k] = Complex64::new(0.0, 0.0);
        }
        m
    }
}

/// Tolerance of the truncated Taylor series in [`expm_action`].
pub const EXPM_TOLERANCE: f64 = 1e-15;

/// e^X y by scaling into substeps of norm ≤ 1/2 and summing the Taylor series
/// until a term falls below [`EXPM_TOLERANCE`] relative to the result.
pub fn expm_action(gen: &Generator, basis: &FockBasis, y: &[Complex64]) -> Vec<Complex64> {
    let bound = gen.norm_bound(basis);
    if bound == 0.0 {
        return y.to_vec();
    }
    let substeps = (2.0 * bound).ceil().max(1.0) as usize;
    let scale = 1.0 / substeps as f64;
    let mut cur = y.to_vec();
    let mut term = vec![Complex64::new(0.0, 0.0); y.len()];
    let mut next = vec![Complex64::new(0.0, 0.0); y.len()];
    for _ in 0..substeps {
        term.copy_from_slice(&cur);
        let mut acc = cur.clone();
        let acc_norm = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for k in 1..60 {
            gen.apply(basis, &term, &mut next);
            let f = scale / k as f64;
            let mut tn = 0.0;
            for (t, n) in term.iter_mut().zip(&next) {
                *t = n * f;
                tn += t.norm_sqr();
            }
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if tn.sqrt() <= EXPM_TOLERANCE * acc_norm {
                break;
            }
        }
        cur = acc;
    }
    cur
}

/// Which kernel corrections enter the analytic unitary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorTerms {
    /// J1 in the squeezer.
    pub j1: bool,
    /// J3 − iK3 in the squeezer.
    pub third_order: bool,
    /// G2 in the frequency-conversion factor.
    pub g2: bool,
}

impl GeneratorTerms {
    pub const FULL: GeneratorTerms = GeneratorTerms { j1: true, third_order: true, g2: true };
    pub const FIRST_ORDER: GeneratorTerms = GeneratorTerms { j1: true, third_order: false, g2: false };
}

impl Default for GeneratorTerms {
    fn default() -> Self {
        Self::FULL
    }
}

/// Squeezing generator −2πiΣ(J1 + J3 − iK3)Δ a†b† + h.c. and conversion
/// generator −2πiΣG2Δ c†c (for c = a and b) on `basis`.
pub fn build_generators(
    cfg: &GaussianConfig,
    basis: &FockBasis,
    terms: GeneratorTerms,
    quad: &QuadratureSpec,
) -> Result<(Generator, Generator)> {
    let params = cfg.derive()?;
    let eps = cfg.epsilon;
    let (na, nb) = (basis.n_bins_a(), basis.n_bins_b());
    let mut squeeze = Generator::zero(basis);
    let mut fc = Generator::zero(basis);
    if eps == 0.0 {
        return Ok((squeeze, fc));
    }
    let minus_two_pi_i = Complex64::new(0.0, -2.0 * PI);
    if terms.j1 || terms.third_order {
        let c = jsa_components(&params, eps, &basis.omega_a, &basis.omega_b, quad)?;
        for i in 0..na {
            for j in 0..nb {
                let mut v = Complex64::new(0.0, 0.0);
                if terms.j1 {
                    v += c.j1[(i, j)];
                }
                if terms.third_order {
                    v += Complex64::new(c.j3[(i, j)], -c.k3[(i, j)]);
                }
                squeeze.pair[i * nb + j] = minus_two_pi_i * v * basis.width;
            }
        }
    }
    if terms.g2 {
        let mut ha = DMatrix::zeros(na, na);
        for i in 0..na {
            for j in 0..na {
                ha[(i, j)] = minus_two_pi_i * g2(&params, eps, basis.omega_a[i], basis.omega_a[j])? * basis.width;
            }
        }
        let mut hb = DMatrix::zeros(nb, nb);
        for i in 0..nb {
            for j in 0..nb {
                hb[(i, j)] = minus_two_pi_i * g2_b(&params, eps, basis.omega_b[i], basis.omega_b[j])? * basis.width;
            }
        }
        fc.hop_a = Some(ha);
        fc.hop_b = Some(hb);
    }
    Ok((squeeze, fc))
}

/// Û_sq·Û_fc applied to `initial` (conversion factor first).
pub fn apply_analytic_factorization(
    cfg: &GaussianConfig,
    basis: &FockBasis,
    initial: &FockState,
    terms: GeneratorTerms,
    quad: &QuadratureSpec,
) -> Result<FockState> {
    if initial.signature != basis.signature() {
        return Err(Error::BasisMismatch("initial state belongs to another basis".into()));
    }
    let (squeeze, fc) = build_generators(cfg, basis, terms, quad)?;
    let after_fc = expm_action(&fc, basis, &initial.amplitudes);
    Ok(FockState { amplitudes: expm_action(&squeeze, basis, &after_fc), signature: initial.signature })
}

/// One-step rule of the time-ordered product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepper {
    /// e^{−iH(t_mid)dt}; second order.
    #[default]
    Midpoint,
    /// Commutator-free fourth-order Magnus rule: two exponentials of linear
    /// combinations of H at the Gauss–Legendre points.
    Magnus4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Integration window; defaults to [`default_t_span`].
    pub t_span: Option<(f64, f64)>,
    pub min_steps: usize,
    pub max_steps: usize,
    /// Converged once doubling the step count moves the state by less.
    pub tol: f64,
    pub stepper: Stepper,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions { t_span: None, min_steps: 64, max_steps: 1 << 22, tol: 1e-8, stepper: Stepper::Midpoint }
    }
}

/// Result of a converged propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub state: FockState,
    pub steps: usize,
    /// Distance to the run with half the steps.
    pub change: f64,
}

/// Symmetric window ±T covering the pump and phase-matching support, where
/// |F| has fallen below 1e-8 of its peak along t.
pub fn default_t_span(cfg: &GaussianConfig) -> (f64, f64) {
    let eta_a = cfg.s_p - cfg.s_a;
    let eta_b = cfg.s_p - cfg.s_b;
    let d = cfg.s_p * cfg.s_p + cfg.tau * cfg.tau;
    let t = (8.0 * cfg.tau.max(cfg.s_p).max(eta_a.abs()).max(eta_b.abs())).max(2.0 * (d * 1e8f64.ln()).sqrt());
    (-t, t)
}

fn pair_coefficients(cfg: &GaussianConfig, basis: &FockBasis, t: f64, factor: Complex64, out: &mut [Complex64]) {
    let nb = basis.n_bins_b();
    for (i, &wa) in basis.omega_a.iter().enumerate() {
        for (j, &wb) in basis.omega_b.iter().enumerate() {
            out[i * nb + j] = factor * f_function(cfg, wa, wb, t) * basis.width;
        }
    }
}

/// Ordered product of `n_steps` one-step propagators of
/// H(t) = ΣF(ω_i, ω_j, t)Δ a_i†b_j† + h.c. over `t_span`.
pub fn propagate_fixed(
    cfg: &GaussianConfig,
    basis: &FockBasis,
    initial: &FockState,
    t_span: (f64, f64),
    n_steps: usize,
    stepper: Stepper,
) -> Result<FockState> {
    if initial.signature != basis.signature() {
        return Err(Error::BasisMismatch("initial state belongs to another basis".into()));
    }
    if n_steps == 0 || !(t_span.1 > t_span.0) {
        return Err(Error::InvalidConfig(format!("invalid time grid {t_span:?} with {n_steps} steps")));
    }
    let mut y = initial.amplitudes.clone();
    if cfg.epsilon == 0.0 {
        return Ok(initial.clone());
    }
    let dt = (t_span.1 - t_span.0) / n_steps as f64;
    let mut gen = Generator::zero(basis);
    let mut second = Generator::zero(basis);
    let minus_i_dt = Complex64::new(0.0, -dt);
    let r3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - r3 / 6.0, 0.5 + r3 / 6.0);
    let (a1, a2) = ((3.0 - 2.0 * r3) / 12.0, (3.0 + 2.0 * r3) / 12.0);
    for k in 0..n_steps {
        let t0 = t_span.0 + k as f64 * dt;
        match stepper {
            Stepper::Midpoint => {
                pair_coefficients(cfg, basis, t0 + 0.5 * dt, minus_i_dt, &mut gen.pair);
                y = expm_action(&gen, basis, &y);
            }
            Stepper::Magnus4 => {
                pair_coefficients(cfg, basis, t0 + c1 * dt, minus_i_dt, &mut gen.pair);
                pair_coefficients(cfg, basis, t0 + c2 * dt, minus_i_dt, &mut second.pair);
                // The earlier factor weights H(t1) with the larger coefficient.
                let first: Vec<Complex64> = gen.pair.iter().zip(&second.pair).map(|(p, q)| a2 * p + a1 * q).collect();
                let last: Vec<Complex64> = gen.pair.iter().zip(&second.pair).map(|(p, q)| a1 * p + a2 * q).collect();
                let g1 = Generator { pair: first, hop_a: None, hop_b: None };
                let g2 = Generator { pair: last, hop_a: None, hop_b: None };
                y = expm_action(&g1, basis, &y);
                y = expm_action(&g2, basis, &y);
            }
        }
    }
    Ok(FockState { amplitudes: y, signature: initial.signature })
}

/// Time-ordered evolution of `initial`, doubling the step count until the
/// state moves by less than `options.tol`.
pub fn propagate_time_ordered(
    cfg: &GaussianConfig,
    basis: &FockBasis,
    initial: &FockState,
    options: &PropagationOptions,
) -> Result<Propagation> {
    cfg.validate()?;
    if !(options.tol > 0.0) || options.min_steps == 0 || options.max_steps < options.min_steps {
        return Err(Error::InvalidConfig(format!("invalid propagation options {options:?}")));
    }
    let span = options.t_span.unwrap_or_else(|| default_t_span(cfg));
    if cfg.epsilon == 0.0 {
        return Ok(Propagation { state: initial.clone(), steps: 0, change: 0.0 });
    }
    let mut steps = options.min_steps;
    let mut prev = propagate_fixed(cfg, basis, initial, span, steps, options.stepper)?;
    let mut prev_change = f64::NAN;
    loop {
        steps *= 2;
        if steps > options.max_steps {
            return Err(Error::NotConverged { steps: steps / 2, change: prev_change, ratio: f64::NAN });
        }
        let cur = propagate_fixed(cfg, basis, initial, span, steps, options.stepper)?;
        let change = compare_states(&cur, &prev)?;
        if change < options.tol {
            return Ok(Propagation { state: cur, steps, change });
        }
        if steps * 2 > options.max_steps {
            return Err(Error::NotConverged { steps, change, ratio: prev_change / change });
        }
        prev_change = change;
        prev = cur;
    }
}
