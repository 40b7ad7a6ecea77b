//! The subcommands, as functions from a run configuration to an artifact.

use std::path::Path;

use serde_json::{json, Value};
use timeorder_core::dispersion::{
    angular_frequency, group_index, group_velocity, poling_period, refractive_index, PhaseMatchTriple, SellmeierData,
    Wave,
};
use timeorder_core::fconv::{fc_mode, rho, solve_epsilon_for_full_conversion, FcModeSpec, ModeSide};
use timeorder_core::jsa::{default_span, j1, j3, jsa_components, linspace};
use timeorder_core::metrics::{
    copropagation_times, fom_r_bound, fom_r_measured, schmidt_analytic, schmidt_numeric, tau2_over_r2,
};
use timeorder_core::model::from_physical;
use timeorder_core::oracle::{
    apply_analytic_factorization, compare_states, oracle_j3, propagate_time_ordered, FockBasis, GeneratorTerms,
    PropagationOptions,
};
use timeorder_core::{ComplexKernel, DerivedParams, Detuning, Error, GaussianConfig};

use crate::config::{FcTarget, Format, OracleKind, Resolved, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{csv_table, merge, provenance, Artifact};

/// Published PPLN reference values: (quantity, wave, printed value, tolerance).
pub const TABLE1_REFERENCE: [(&str, &str, f64, f64); 6] = [
    ("refractive_index", "pump", 2.15541, 5e-5),
    ("refractive_index", "a", 2.21112, 5e-5),
    ("refractive_index", "b", 2.10269, 5e-5),
    ("group_index", "pump", 2.20054, 1e-4),
    ("group_index", "a", 2.26276, 1e-4),
    ("group_index", "b", 2.17833, 1e-4),
];
pub const TABLE1_POLING_PERIOD_UM: (f64, f64) = (58.25, 0.05);

/// Maximum orthonormality defect accepted for emitted FC modes.
pub const MODE_ORTHONORMALITY_TOL: f64 = 1e-6;

fn format_or(run: &RunConfig, default: Format) -> Format {
    run.output.format.unwrap_or(default)
}

fn require_json(run: &RunConfig, command: &str) -> CliResult<()> {
    match run.output.format {
        Some(Format::Csv) => Err(CliError::Usage(format!("{command} writes JSON only"))),
        _ => Ok(()),
    }
}

pub fn derived_json(p: &DerivedParams) -> Value {
    json!({
        "tau": p.tau,
        "eta_a": p.eta_a,
        "eta_b": p.eta_b,
        "eta_ab": p.eta_ab,
        "mu2": p.mu2,
        "mua2": p.mua2,
        "mub2": p.mub2,
        "r2": p.r2,
        "r4": p.r4,
        "m4": p.m4,
        "cal_n2": p.cal_n2,
        "cal_n4": p.cal_n4,
        "det_n": p.det_n(),
    })
}

fn model_json(r: &Resolved, p: &DerivedParams) -> Value {
    json!({
        "time_unit_s": r.time_unit_s,
        "model": r.config,
        "derived": derived_json(p),
    })
}

fn error_json(e: &Error) -> Value {
    json!({"error": {"kind": e.kind(), "message": e.to_string()}})
}

fn grid(run: &RunConfig, p: &DerivedParams) -> Vec<f64> {
    linspace(default_span(p, run.grid.span_sigmas), run.grid.points)
}

/// J1/(ετ), J3/(ε³τ), K3/(ε³τ) on a square grid. The components are
/// evaluated at ε = 1, where they equal the normalised values times τ.
pub fn cmd_jsa(run: &RunConfig, data_dir: Option<&Path>) -> CliResult<Artifact> {
    let r = run.resolve(data_dir)?;
    let p = r.config.derive()?;
    let g = grid(run, &p);
    let c = jsa_components(&p, 1.0, &g, &g, &run.quadrature)?;
    let tau = p.tau;
    let n = g.len();
    let columns = ["d_omega_a", "d_omega_b", "j1_norm", "j3_norm", "k3_norm"];
    let mut rows = Vec::with_capacity(n * n);
    let mut peak = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let row = vec![g[i], g[j], c.j1[(i, j)] / tau, c.j3[(i, j)] / tau, c.k3[(i, j)] / tau];
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Overflow(format!("non-finite JSA value at ({}, {})", g[i], g[j])).into());
            }
            peak = peak.max(row[2].abs());
            rows.push(row);
        }
    }
    let meta = merge(
        provenance("jsa", run),
        json!({
            "columns": columns,
            "normalization": "j1_norm = J1/(eps tau), j3_norm = J3/(eps^3 tau), k3_norm = K3/(eps^3 tau); detunings in rad per model time unit",
            "grid_points": n,
            "span": g[n - 1],
            "peak_abs_j1_norm": peak,
        }),
    );
    let meta = merge(meta, model_json(&r, &p));
    match format_or(run, Format::Csv) {
        Format::Csv => {
            let header: Vec<String> = columns.iter().map(|s| s.to_string()).collect();
            Ok(Artifact::csv(csv_table(&header, rows)?, meta))
        }
        Format::Json => {
            let cols: Vec<Vec<f64>> = (0..columns.len()).map(|k| rows.iter().map(|r| r[k]).collect()).collect();
            let data: serde_json::Map<String, Value> =
                columns.iter().zip(cols).map(|(name, col)| (name.to_string(), json!(col))).collect();
            Ok(Artifact::json(&merge(meta, json!({"data": data}))))
        }
    }
}

/// Schmidt numbers, separability ratio, figures of merit, ρ and (for
/// physical configs) co-propagation times.
pub fn cmd_metrics(run: &RunConfig, data_dir: Option<&Path>) -> CliResult<Artifact> {
    require_json(run, "metrics")?;
    let r = run.resolve(data_dir)?;
    let p = r.config.derive()?;
    let eps = r.config.epsilon;
    let g = grid(run, &p);
    let analytic = schmidt_analytic(&p);
    let numeric = ComplexKernel::from_fn(g.clone(), g.clone(), "J1", |a, b| j1(&p, 1.0, Detuning::new(a, b)))
        .and_then(|k| schmidt_numeric(&k));
    let numeric = match numeric {
        Ok(rep) => json!({
            "value": rep.schmidt_number,
            "leading_singular_values": rep.singular_values.iter().take(16).collect::<Vec<_>>(),
            "grid_points": g.len(),
            "span": g[g.len() - 1],
        }),
        Err(e) => error_json(&e),
    };
    let measured = jsa_components(&p, eps, &g, &g, &run.quadrature).and_then(|c| {
        if eps == 0.0 {
            Ok(0.0)
        } else {
            fom_r_measured(&c.j1, &c.j3)
        }
    });
    let measured = match measured {
        Ok(v) => json!(v),
        Err(e) => error_json(&e),
    };
    let rho_value = if p.cal_n2 > 0.0 { json!(rho(&p, eps)) } else { Value::Null };
    let coprop = match &r.setup {
        Some(s) => serde_json::to_value(copropagation_times(s)?).expect("serialisable"),
        None => Value::Null,
    };
    let report = merge(
        provenance("metrics", run),
        json!({
            "schema": "timeorder.metrics/1",
            "schmidt_analytic": {"value": analytic.value, "divergent": analytic.divergent},
            "schmidt_numeric": numeric,
            "tau2_over_r2": tau2_over_r2(&p),
            "fom_r_bound": fom_r_bound(&p, eps),
            "fom_r_measured": measured,
            "rho": rho_value,
            "copropagation": coprop,
        }),
    );
    Ok(Artifact::json(&merge(report, model_json(&r, &p))))
}

/// Trapezoid Gram-matrix defect max|⟨f_i, f_j⟩ − δ_ij| of sampled modes.
pub fn orthonormality_defect(grid: &[f64], modes: &[Vec<f64>]) -> f64 {
    let n = grid.len();
    let w: Vec<f64> = (0..n)
        .map(|k| {
            let lo = if k == 0 { grid[0] } else { 0.5 * (grid[k - 1] + grid[k]) };
            let hi = if k == n - 1 { grid[n - 1] } else { 0.5 * (grid[k] + grid[k + 1]) };
            hi - lo
        })
        .collect();
    let mut worst = 0.0f64;
    for (i, a) in modes.iter().enumerate() {
        for (j, b) in modes.iter().enumerate() {
            let dot: f64 = (0..n).map(|k| w[k] * a[k] * b[k]).sum();
            worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

/// Conversion modes, coupling table, or the ε that fully converts mode n.
pub fn cmd_fc(run: &RunConfig, data_dir: Option<&Path>) -> CliResult<Artifact> {
    let r = run.resolve(data_dir)?;
    let p = r.config.derive()?;
    let eps = r.config.epsilon;
    let n = run.fc.n;
    let base = merge(provenance("fc", run), model_json(&r, &p));
    match run.fc.target {
        FcTarget::SolveEps => {
            require_json(run, "fc solve_eps")?;
            let e = solve_epsilon_for_full_conversion(&p, n)?;
            let spec = FcModeSpec::new(&p, e)?;
            let g = spec.coupling(n);
            Ok(Artifact::json(&merge(
                base,
                json!({"target": "solve_eps", "mode": n, "epsilon": e, "coupling": g, "efficiency": g.sin().powi(2)}),
            )))
        }
        FcTarget::Coupling => {
            require_json(run, "fc coupling")?;
            let spec = FcModeSpec::new(&p, eps)?;
            let table: Vec<Value> = (0..=n)
                .map(|j| {
                    let g = spec.coupling(j);
                    json!({"j": j, "g": g, "efficiency": g.sin().powi(2)})
                })
                .collect();
            Ok(Artifact::json(&merge(
                base,
                json!({
                    "target": "coupling",
                    "ratio_s": spec.s,
                    "schmidt": spec.schmidt,
                    "theta0": spec.theta0,
                    "couplings": table,
                }),
            )))
        }
        FcTarget::Modes => {
            let g = grid(run, &p);
            let mut header = vec!["d_omega".to_string()];
            let mut cols = vec![];
            for (side, name) in [(ModeSide::A, "a"), (ModeSide::B, "b")] {
                let mut modes = vec![];
                for j in 0..=n {
                    header.push(format!("{name}_{j}"));
                    modes.push(fc_mode(&p, j, side, &g)?);
                }
                let defect = orthonormality_defect(&g, &modes);
                if defect > MODE_ORTHONORMALITY_TOL {
                    return Err(Error::GridTooNarrow(format!(
                        "{name}-modes up to {n} are orthonormal only to {defect:.2e} on this grid; increase points or span"
                    ))
                    .into());
                }
                cols.extend(modes);
            }
            let rows = (0..g.len()).map(|k| std::iter::once(g[k]).chain(cols.iter().map(|c| c[k])).collect());
            let meta = merge(
                base,
                json!({"target": "modes", "columns": header, "orthonormality_tolerance": MODE_ORTHONORMALITY_TOL}),
            );
            match format_or(run, Format::Csv) {
                Format::Csv => Ok(Artifact::csv(csv_table(&header, rows)?, meta)),
                Format::Json => Err(CliError::Usage("fc modes writes CSV only".into())),
            }
        }
    }
}

fn default_points(p: &DerivedParams) -> Vec<[f64; 2]> {
    let s = default_span(p, 1.0);
    vec![[0.0, 0.0], [s, 0.0], [0.0, s], [s, -s], [-0.5 * s, 0.7 * s]]
}

fn relative_deviation(reference: f64, value: f64) -> f64 {
    if reference == value {
        0.0
    } else {
        ((value - reference) / reference).abs()
    }
}

/// Analytic J3 against the direct quadrature, or the factorised unitary
/// against time-ordered propagation over a list of ε.
pub fn cmd_oracle(run: &RunConfig, data_dir: Option<&Path>) -> CliResult<(Artifact, bool)> {
    require_json(run, "oracle")?;
    let r = run.resolve(data_dir)?;
    let p = r.config.derive()?;
    let o = &run.oracle;
    let mut failed = false;
    let body = match o.which {
        OracleKind::Quadrature => {
            let points = o.points.clone().unwrap_or_else(|| default_points(&p));
            let rows: Vec<Value> = points
                .iter()
                .map(|&[a, b]| {
                    let u = Detuning::new(a, b);
                    let res = j3(&p, r.config.epsilon, u, &run.quadrature)
                        .and_then(|an| Ok((an, oracle_j3(&r.config, u, &run.quadrature)?)));
                    match res {
                        Ok((an, or)) => json!({
                            "d_omega_a": a, "d_omega_b": b, "analytic": an, "oracle": or,
                            "relative_deviation": relative_deviation(or, an),
                        }),
                        Err(e) => {
                            failed = true;
                            merge(json!({"d_omega_a": a, "d_omega_b": b}), error_json(&e))
                        }
                    }
                })
                .collect();
            json!({"which": "quadrature", "points": rows})
        }
        OracleKind::Propagator => {
            let width = o.bin_width.unwrap_or_else(|| 2.0 * default_span(&p, 2.0) / o.bins as f64);
            let basis = FockBasis::new(o.bins, o.bins, width, o.max_pairs, false)?;
            let vacuum = basis.vacuum()?;
            let opts = PropagationOptions { tol: o.step_tol, stepper: o.stepper, ..Default::default() };
            let mut distances: Vec<Option<(f64, f64)>> = vec![];
            let mut rows: Vec<Value> = vec![];
            for &eps in &o.eps_list {
                let cfg: GaussianConfig = r.config.with_epsilon(eps);
                let res = propagate_time_ordered(&cfg, &basis, &vacuum, &opts).and_then(|prop| {
                    let full =
                        apply_analytic_factorization(&cfg, &basis, &vacuum, GeneratorTerms::FULL, &run.quadrature)?;
                    let first = apply_analytic_factorization(
                        &cfg,
                        &basis,
                        &vacuum,
                        GeneratorTerms::FIRST_ORDER,
                        &run.quadrature,
                    )?;
                    Ok((
                        compare_states(&prop.state, &full)?,
                        compare_states(&prop.state, &first)?,
                        prop.steps,
                        prop.state.norm(),
                    ))
                });
                match res {
                    Ok((d, d1, steps, norm)) => {
                        distances.push(Some((d, d1)));
                        rows.push(json!({
                            "epsilon": eps, "distance": d, "distance_first_order": d1,
                            "steps": steps, "norm_defect": (norm - 1.0).abs(),
                        }));
                    }
                    Err(e) => {
                        failed = true;
                        distances.push(None);
                        rows.push(merge(json!({"epsilon": eps}), error_json(&e)));
                    }
                }
            }
            let ratios: Vec<Value> = distances
                .windows(2)
                .zip(o.eps_list.windows(2))
                .map(|(d, e)| match (d[0], d[1]) {
                    (Some((a, a1)), Some((b, b1))) => json!({
                        "from": e[0], "to": e[1], "ratio": a / b, "ratio_first_order": a1 / b1,
                    }),
                    _ => json!({"from": e[0], "to": e[1], "ratio": null, "ratio_first_order": null}),
                })
                .collect();
            json!({
                "which": "propagator",
                "bins": o.bins, "bin_width": width, "max_pairs": o.max_pairs,
                "dimension": basis.dimension(),
                "runs": rows, "ratios": ratios,
            })
        }
    };
    let report = merge(merge(provenance("oracle", run), model_json(&r, &p)), body);
    Ok((Artifact::json(&report), failed))
}

fn wave_json(data: &SellmeierData, role: &str, w: Wave) -> CliResult<Value> {
    let m = data.medium(w.polarization)?;
    Ok(json!({
        "role": role,
        "lambda_um": w.lambda_um,
        "polarization": w.polarization,
        "refractive_index": refractive_index(m, w.lambda_um)?,
        "group_index": group_index(m, w.lambda_um)?,
        "group_velocity_m_per_s": group_velocity(m, w.lambda_um)?,
        "angular_frequency_rad_per_s": angular_frequency(w.lambda_um),
    }))
}

/// Indices, group velocities, poling period and (with crystal parameters)
/// the derived model, compared with the published reference values when the
/// triple is the reference one.
pub fn cmd_dispersion(run: &RunConfig, data_dir: Option<&Path>) -> CliResult<Artifact> {
    require_json(run, "dispersion")?;
    run.validate()?;
    let phys = run
        .physical
        .as_ref()
        .ok_or_else(|| CliError::Usage("dispersion needs a physical block with a triple".into()))?;
    let triple = phys
        .triple
        .as_ref()
        .ok_or_else(|| CliError::Usage("dispersion needs a physical block with a triple".into()))?
        .resolve()?;
    let data = run.sellmeier(data_dir)?;
    let waves = [("pump", triple.pump), ("a", triple.a), ("b", triple.b)];
    let wave_rows: Vec<Value> = waves.iter().map(|&(role, w)| wave_json(&data, role, w)).collect::<CliResult<_>>()?;
    let period = poling_period(&data, &triple)?;
    let energy_error = ((1.0 / triple.pump.lambda_um - 1.0 / triple.a.lambda_um - 1.0 / triple.b.lambda_um)
        * triple.pump.lambda_um)
        .abs();
    let mut body = json!({
        "schema": "timeorder.dispersion/1",
        "triple": triple,
        "energy_conservation": {"relative_error": energy_error, "tolerance": 1e-6, "passed": energy_error <= 1e-6},
        "waves": wave_rows,
        "poling_period_um": period,
    });
    if phys.length_m.is_some() && phys.tau_s.is_some() && phys.epsilon.is_some() {
        let r = run.resolve(data_dir)?;
        let setup = r.setup.expect("triple resolves to a setup");
        let seconds = from_physical(&setup)?;
        body["setup"] = json!({
            "physical": setup,
            "s_seconds": {"s_a": seconds.s_a, "s_b": seconds.s_b, "s_p": seconds.s_p},
            "model": r.config,
            "time_unit_s": r.time_unit_s,
        });
    }
    if triple == PhaseMatchTriple::table1() {
        let lookup = |quantity: &str, role: &str| -> f64 {
            let row = waves.iter().position(|&(r, _)| r == role).expect("known role");
            wave_rows[row][quantity].as_f64().expect("numeric field")
        };
        let mut rows: Vec<Value> = TABLE1_REFERENCE
            .iter()
            .map(|&(q, role, reference, tol)| {
                let computed = lookup(q, role);
                json!({"quantity": q, "wave": role, "reference": reference, "computed": computed,
                       "delta": computed - reference, "tolerance": tol, "within_tolerance": (computed - reference).abs() <= tol})
            })
            .collect();
        let (reference, tol) = TABLE1_POLING_PERIOD_UM;
        rows.push(json!({"quantity": "poling_period_um", "wave": null, "reference": reference, "computed": period,
                         "delta": period - reference, "tolerance": tol, "within_tolerance": (period - reference).abs() <= tol}));
        body["table1_comparison"] = json!(rows);
    }
    Ok(Artifact::json(&merge(provenance("dispersion", run), body)))
}
