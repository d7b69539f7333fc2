//! One function per analysis command. Each takes a validated config and
//! returns the payload of its report.

use igeoflow_core::complexity::{
    closed_minus_numeric_offset, complexity_constants, complexity_curve, volume_numeric_factorized,
    DECAY_WINDOW,
};
use igeoflow_core::embedding::{
    analytic_report, correlation_from_partials, induced_coefficients, pullback_metric_oracle,
    EmbeddingSpec,
};
use igeoflow_core::geodesics::{
    closed_form_residual, compare_with_closed_form, default_initial_state, hypothesis_bound,
    hypothesis_ratio, integrate_geodesic,
};
use igeoflow_core::jacobi::{
    asymptotic_components, attenuation_embedded, attenuation_report, growth_window, jacobi_run,
    AsymptoticForm, ConvergenceDeviation, EmbeddedAttenuation, JacobiConstants, JacobiPairState,
    JacobiState,
};
use igeoflow_core::manifold::{
    christoffels_asymptotic, diagonalize, riemann_1212_asymptotic, riemann_1212_printed,
    scalar_curvature,
};
use igeoflow_core::CoordinateFrame;

use crate::config::{invalid, Command, EmbeddingConfig, RunConfig, TabulatedConstraint};
use crate::error::CliResult;
use crate::report::{indexed, Cell, Payload, Table};

pub fn run_command(command: Command, config: &RunConfig) -> CliResult<Payload> {
    match command {
        Command::Curvature => cmd_curvature(config),
        Command::Geodesic => cmd_geodesic(config),
        Command::Complexity => cmd_complexity(config),
        Command::Jacobi => cmd_jacobi(config),
        Command::Embed => cmd_embed(config),
        Command::Sweep => crate::sweep::cmd_sweep(config, None),
        Command::Verify => Err(invalid("verify is not a payload command")),
    }
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn cmd_curvature(config: &RunConfig) -> CliResult<Payload> {
    let params = &config.params;
    let mut p = Payload::default();
    let scalar = scalar_curvature(&params.r)?;
    p.set("l", params.l());
    p.set("scalar_curvature", scalar);
    p.set("uncorrelated_limit", -(params.l() as f64));

    let mut symbols = Table::new(
        "christoffel",
        strings(&[
            "pair",
            "r",
            "sigma_tilde",
            "gamma1_12",
            "gamma2_11",
            "gamma2_22",
            "riemann_1212",
            "riemann_1212_printed",
        ]),
    );
    let mut pairs = Table::new(
        "pairs",
        strings(&[
            "pair",
            "r",
            "scalar_contribution",
            "alpha_minus",
            "alpha_plus",
            "a0",
            "a1",
        ]),
    );
    for (k, &r) in params.r.iter().enumerate() {
        for &st in &config.sigma_tilde {
            let c = christoffels_asymptotic(r, st)?;
            symbols.push(vec![
                (k + 1).into(),
                r.into(),
                st.into(),
                c.gamma1_12.into(),
                c.gamma2_11.into(),
                c.gamma2_22.into(),
                riemann_1212_asymptotic(r, st)?.into(),
                riemann_1212_printed(r, st)?.into(),
            ]);
        }
        let d = diagonalize(r)?;
        pairs.push(vec![
            (k + 1).into(),
            r.into(),
            scalar_curvature(&[r])?.into(),
            d.alpha_minus.into(),
            d.alpha_plus.into(),
            d.a0.into(),
            d.a1.into(),
        ]);
    }
    p.tables = vec![symbols, pairs];
    Ok(p)
}

pub fn cmd_geodesic(config: &RunConfig) -> CliResult<Payload> {
    let params = &config.params;
    let l = params.l();
    let grid = config.grid(Command::Geodesic);
    let init = default_initial_state(params, CoordinateFrame::Primed, grid[0])?;
    let traj = integrate_geodesic(
        params,
        CoordinateFrame::Primed,
        &init,
        &grid,
        &config.tolerances,
    )?;
    let original = traj.convert(CoordinateFrame::Original)?;
    let fit_from = grid[0] + 0.1 * (grid[grid.len() - 1] - grid[0]);
    let hyp = hypothesis_ratio(&traj, fit_from)?;
    let cmp = compare_with_closed_form(&traj)?;

    let mut columns = vec!["tau".to_string()];
    for k in 1..=l {
        columns.push(format!("mu_p_{k}"));
        columns.push(format!("sigma_p_{k}"));
    }
    for k in 1..=l {
        columns.push(format!("mu_{k}"));
        columns.push(format!("sigma_{k}"));
    }
    columns.extend(indexed("residual", l));
    columns.extend(indexed("ratio", l));
    let mut table = Table::new("trajectory", columns);
    let mut max_residual: f64 = 0.0;
    for (i, &t) in traj.tau.iter().enumerate() {
        let mut row: Vec<Cell> = vec![t.into()];
        for s in &traj.states[i].pairs {
            row.push(s.mu.into());
            row.push(s.sigma.into());
        }
        for s in &original.states[i].pairs {
            row.push(s.mu.into());
            row.push(s.sigma.into());
        }
        for k in 0..l {
            let res = closed_form_residual(t, params.pair(k), CoordinateFrame::Primed)?;
            max_residual = max_residual.max(res);
            row.push(res.into());
        }
        for k in 0..l {
            row.push(hyp.ratio[k][i].into());
        }
        table.push(row);
    }

    let mut p = Payload::default();
    p.set("l", l);
    p.set("frame", "primed");
    p.set("accepted_steps", traj.accepted_steps);
    p.set("rejected_steps", traj.rejected_steps);
    p.set("max_residual", max_residual);
    p.set("pointwise_error", cmp.pointwise);
    p.set("span_scaled_error", cmp.span_scaled);
    p.set("hypothesis_bound", hypothesis_bound());
    for k in 0..l {
        p.set(&format!("decay_rate_{}", k + 1), hyp.decay_rate(k));
    }
    p.set("hypothesis_satisfied", hyp.satisfied);
    for (k, f) in hyp.fits.iter().enumerate() {
        if f.is_none() {
            p.warnings.push(format!(
                "pair {}: too few points to fit the ratio decay",
                k + 1
            ));
        }
    }
    p.tables = vec![table];
    Ok(p)
}

pub fn cmd_complexity(config: &RunConfig) -> CliResult<Payload> {
    let params = &config.params;
    let l = params.l();
    let tau = config.grid(Command::Complexity);
    let tol = &config.tolerances;
    let curve = complexity_curve(params, &tau, tol)?;

    let mut table = Table::new(
        "curve",
        strings(&[
            "tau",
            "v_closed",
            "v_numeric",
            "v_factorized",
            "s_closed",
            "s_numeric",
            "s_factorized",
            "saturation",
        ]),
    );
    for (i, &t) in tau.iter().enumerate() {
        let vf = volume_numeric_factorized(t, params, tol)?;
        table.push(vec![
            t.into(),
            curve.v_closed[i].into(),
            curve.v_numeric[i].into(),
            vf.into(),
            curve.s_closed[i].into(),
            curve.s_numeric[i].into(),
            (vf > 0.0).then(|| vf.ln()).into(),
            curve.saturation.into(),
        ]);
    }

    let mut constants = Table::new(
        "constants",
        strings(&[
            "pair", "r", "lambda", "xi", "sigma", "lambda1", "lambda2", "bracket", "offset",
        ]),
    );
    let mut p = Payload::default();
    p.set("l", l);
    p.set("saturation", curve.saturation);
    p.set("decay_exponent", curve.fitted_decay.map(|f| f.exponent));
    p.set("decay_fit_points", curve.fitted_decay.map(|f| f.points));
    p.set("decay_window", DECAY_WINDOW);
    p.set("v_closed_final", curve.v_closed[tau.len() - 1]);
    p.set("v_numeric_final", curve.v_numeric[tau.len() - 1]);
    for (k, pair) in params.pairs().enumerate() {
        let c = complexity_constants(pair)?;
        let offset = closed_minus_numeric_offset(pair)?;
        constants.push(vec![
            (k + 1).into(),
            pair.r.into(),
            pair.lambda.into(),
            pair.xi.into(),
            c.sigma.into(),
            c.lambda1.into(),
            c.lambda2.into(),
            c.bracket.into(),
            offset.into(),
        ]);
        p.set(&format!("sigma_{}", k + 1), c.sigma);
        p.set(&format!("lambda1_{}", k + 1), c.lambda1);
        p.set(&format!("lambda2_{}", k + 1), c.lambda2);
    }
    p.warnings = curve.warnings;
    p.tables = vec![table, constants];
    Ok(p)
}

fn deviation_cells(d: Option<&ConvergenceDeviation>) -> [Cell; 2] {
    match d {
        Some(d) => [d.j1.into(), d.j2.into()],
        None => [Cell::Null, Cell::Null],
    }
}

pub fn cmd_jacobi(config: &RunConfig) -> CliResult<Payload> {
    let params = &config.params;
    let l = params.l();
    let grid = config.grid(Command::Jacobi);
    let pairs = match &config.initial {
        Some(v) => v.iter().map(|a| JacobiPairState::from_slice(a)).collect(),
        None => vec![JacobiPairState::default(); l],
    };
    let init = JacobiState::new(CoordinateFrame::Tilde, pairs)?;
    let run = jacobi_run(params, &init, &grid, &config.tolerances)?;

    let mut columns = vec!["tau".to_string()];
    for name in ["j1", "j2", "j1_dot", "j2_dot", "j1_asym", "j2_asym"] {
        columns.extend(indexed(name, l));
    }
    columns.extend(strings(&[
        "intensity_tilde",
        "intensity_tilde_asymptotic",
        "intensity_original",
        "intensity_original_asymptotic",
    ]));
    let mut solution = Table::new("solution", columns);
    for (i, &t) in run.solution.tau.iter().enumerate() {
        let s = &run.solution.states[i];
        let mut row: Vec<Cell> = vec![t.into()];
        row.extend(s.pairs.iter().map(|q| Cell::from(q.j1)));
        row.extend(s.pairs.iter().map(|q| Cell::from(q.j2)));
        row.extend(s.pairs.iter().map(|q| Cell::from(q.j1_dot)));
        row.extend(s.pairs.iter().map(|q| Cell::from(q.j2_dot)));
        let asym: Vec<(f64, f64)> = (0..l)
            .map(|k| {
                asymptotic_components(
                    t,
                    &run.constants[k],
                    params.lambda[k],
                    AsymptoticForm::DoubleRoot,
                )
            })
            .collect();
        row.extend(asym.iter().map(|a| Cell::from(a.0)));
        row.extend(asym.iter().map(|a| Cell::from(a.1)));
        row.push(run.intensity_tilde[i].into());
        row.push(run.intensity_tilde_asymptotic[i].into());
        row.push(run.intensity_original[i].into());
        row.push(run.intensity_original_asymptotic[i].into());
        solution.push(row);
    }

    let mut constants = Table::new(
        "constants",
        strings(&[
            "pair",
            "form",
            "c0",
            "c1",
            "c2",
            "c3",
            "deviation_j1",
            "deviation_j2",
        ]),
    );
    let forms: [(&str, &[JacobiConstants], &[ConvergenceDeviation]); 2] = [
        ("double_root", &run.constants, &run.deviation),
        ("printed", &run.constants_printed, &run.deviation_printed),
    ];
    for (name, cs, ds) in forms {
        for k in 0..l {
            let c = cs[k];
            let mut row: Vec<Cell> = vec![
                (k + 1).into(),
                name.into(),
                c.c0.into(),
                c.c1.into(),
                c.c2.into(),
                c.c3.into(),
            ];
            row.extend(deviation_cells(ds.get(k)));
            constants.push(row);
        }
    }

    let r_grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let att = attenuation_report(&r_grid)?;
    let mut attenuation = Table::new(
        "attenuation",
        strings(&[
            "r",
            "tilde",
            "tilde_printed",
            "embedded",
            "embedded_quadratic",
            "embedded_direct",
            "ratio",
            "ratio_quadratic",
        ]),
    );
    for i in 0..r_grid.len() {
        attenuation.push(vec![
            att.r[i].into(),
            att.tilde[i].into(),
            att.tilde_printed[i].into(),
            att.embedded[i].into(),
            att.embedded_quadratic[i].into(),
            att.embedded_direct[i].into(),
            att.ratio[i].into(),
            att.ratio_quadratic[i].into(),
        ]);
    }
    let mut maxima = Table::new("maxima", strings(&["factor", "argmax", "max"]));
    for (name, m) in [
        ("tilde", att.tilde_max),
        ("tilde_printed", att.tilde_printed_max),
        ("embedded", att.embedded_max),
        ("embedded_quadratic", att.embedded_quadratic_max),
        ("embedded_direct", att.embedded_direct_max),
    ] {
        maxima.push(vec![name.into(), m.argmax.into(), m.max.into()]);
    }

    let mut p = Payload::default();
    p.set("l", l);
    p.set("expected_rate", run.expected_rate);
    p.set("growth_window", growth_window(params));
    p.set("growth_rate_tilde", run.growth_tilde.map(|f| f.exponent));
    p.set(
        "growth_rate_original",
        run.growth_original.map(|f| f.exponent),
    );
    let worst = |ds: &[ConvergenceDeviation]| {
        ds.iter()
            .map(|d| d.max())
            .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))))
    };
    p.set("max_deviation", worst(&run.deviation));
    p.set("max_deviation_printed", worst(&run.deviation_printed));
    p.set("tilde_argmax", att.tilde_max.argmax);
    p.set("tilde_max", att.tilde_max.max);
    p.set("sup_ratio", att.sup_ratio);
    p.set("sup_ratio_quadratic", att.sup_ratio_quadratic);
    p.set("ratio_bound", att.ratio_bound);
    p.set("ratio_within_bound", att.ratio_within_bound);
    p.set(
        "ratio_quadratic_within_bound",
        att.ratio_quadratic_within_bound,
    );
    p.set("quoted_a_max", att.quoted_a_max);
    p.set("quoted_a_argmax", att.quoted_a_argmax);
    p.set("quoted_claim_reproduced", att.quoted_claim_reproduced);
    for (k, &r) in params.r.iter().enumerate() {
        let a = attenuation_embedded(r, EmbeddedAttenuation::Published)?;
        p.set(&format!("embedded_ratio_{}", k + 1), a.sqrt());
    }
    if run.growth_tilde.is_none() || run.growth_original.is_none() {
        p.warnings
            .push("growth fit window not covered by the grid".to_string());
    }
    p.warnings.extend(run.warnings);
    p.tables = vec![solution, constants, attenuation, maxima];
    Ok(p)
}

const EMBED_COLUMNS: [&str; 10] = [
    "mu",
    "sigma",
    "d_mu",
    "d_sigma",
    "a_mumu",
    "a_musigma",
    "a_sigmasigma",
    "r_analytic",
    "r_oracle",
    "delta",
];

pub fn cmd_embed(config: &RunConfig) -> CliResult<Payload> {
    let e = config.embedding.as_ref().ok_or_else(|| {
        invalid("embed needs an `embedding` section with `linear` or `tabulated`")
    })?;
    match (&e.linear, &e.tabulated) {
        (Some(a), _) => embed_linear(*a, e),
        (None, Some(t)) => embed_tabulated(t, e),
        (None, None) => Err(invalid("embedding needs `linear` or `tabulated`")),
    }
}

fn embed_linear(a: [f64; 2], e: &EmbeddingConfig) -> CliResult<Payload> {
    let spec = EmbeddingSpec::linear(a[0], a[1])?;
    let analytic = analytic_report(&spec)
        .ok_or_else(|| invalid("linear constraint has no analytic report"))?;
    let oracle = pullback_metric_oracle(&spec, (e.point[0], e.point[1]), e.h)?;
    let delta = (analytic.r - oracle.r).abs();
    let mut table = Table::new("embedding", strings(&EMBED_COLUMNS));
    table.push(vec![
        e.point[0].into(),
        e.point[1].into(),
        a[0].into(),
        a[1].into(),
        analytic.a_mumu.into(),
        analytic.a_musigma.into(),
        analytic.a_sigmasigma.into(),
        analytic.r.into(),
        oracle.r.into(),
        delta.into(),
    ]);
    let mut p = Payload::default();
    p.set("kind", "linear");
    p.set("r_analytic", analytic.r);
    p.set("r_oracle", oracle.r);
    p.set("delta", delta);
    p.set("local", oracle.local);
    p.set("nonzero", analytic.r != 0.0);
    p.tables = vec![table];
    Ok(p)
}

/// Partials at interior nodes from central differences; a node whose
/// one-sided slopes disagree by more than `kink_tol (1 + |slope|)` is
/// rejected as non-differentiable.
fn embed_tabulated(t: &TabulatedConstraint, e: &EmbeddingConfig) -> CliResult<Payload> {
    let mut table = Table::new("embedding", strings(&EMBED_COLUMNS));
    let (mut r_min, mut r_max, mut max_delta) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    let slopes = |x: &[f64], f: &dyn Fn(usize) -> f64, i: usize| {
        let (hb, hf) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        let back = (f(i) - f(i - 1)) / hb;
        let fwd = (f(i + 1) - f(i)) / hf;
        // second-order on a non-uniform grid
        let central = (hb * fwd + hf * back) / (hb + hf);
        (back, fwd, central)
    };
    for i in 1..t.mu.len() - 1 {
        for j in 1..t.sigma.len() - 1 {
            let (mb, mf, mc) = slopes(&t.mu, &|ii| t.values[ii][j], i);
            let (sb, sf, sc) = slopes(&t.sigma, &|jj| t.values[i][jj], j);
            for (b, f, c) in [(mb, mf, mc), (sb, sf, sc)] {
                if (f - b).abs() > e.kink_tol * (1.0 + c.abs()) {
                    return Err(invalid(format!(
                        "non-differentiable constraint samples at (mu, sigma) = ({}, {}): one-sided slopes {b} and {f}",
                        t.mu[i], t.sigma[j]
                    )));
                }
            }
            let (amm, ams, ass) = induced_coefficients(mc, sc)?;
            let r = correlation_from_partials(mc, sc)?;
            let delta = (correlation_from_partials(mf, sf)? - r)
                .abs()
                .max((correlation_from_partials(mb, sb)? - r).abs());
            r_min = r_min.min(r);
            r_max = r_max.max(r);
            max_delta = max_delta.max(delta);
            table.push(vec![
                t.mu[i].into(),
                t.sigma[j].into(),
                mc.into(),
                sc.into(),
                amm.into(),
                ams.into(),
                ass.into(),
                r.into(),
                Cell::Null,
                delta.into(),
            ]);
        }
    }
    let mut p = Payload::default();
    p.set("kind", "tabulated");
    p.set("nodes", table.rows.len());
    p.set("r_min", r_min);
    p.set("r_max", r_max);
    p.set("delta", max_delta);
    p.set("local", r_max - r_min > 1e-12);
    p.tables = vec![table];
    Ok(p)
}
