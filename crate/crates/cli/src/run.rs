//! Experiment pipelines: dispatch a validated configuration to the engine
//! and collect named tables plus consistency checks.

use anyhow::anyhow;

use dimersim_core::fock::{
    annihilation, current_operator, kinetic_operator, number_operator, DimerParams, FockBasis,
    OperatorMatrix, Site,
};
use dimersim_core::greens::{
    build_greens_set, default_frequency_grid, linspace, spectral_series, stationary_current,
    sum_rules, GfSectors, GreensSet, SumRuleReport, DEFAULT_WEIGHT_PRUNE,
};
use dimersim_core::liouvillian::build_blocks;
use dimersim_core::semiclassical::{
    critical_ratio, integrate_sc, oscillation_period, turning_point, Period,
};
use dimersim_core::spectral::{
    default_fit_window, diagonalize_block, diagonalize_blocks, evolve, late_decay_rate,
    steady_state, time_averaged_imbalance, DecayFit, DensityMatrix, SpectralDecomposition,
};
use dimersim_core::{par, DimerError};

use crate::config::ExperimentConfig;
use crate::emit::{CheckLine, ResultSet, Table};

/// Failures split by exit code: bad input vs engine trouble.
#[derive(Debug)]
pub enum RunError {
    Validation(anyhow::Error),
    Engine(anyhow::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(e) => write!(f, "invalid configuration: {e:#}"),
            RunError::Engine(e) => write!(f, "engine error: {e:#}"),
        }
    }
}

fn engine_err(context: &str) -> impl Fn(DimerError) -> RunError + '_ {
    move |e| RunError::Engine(anyhow!("{context}: {e}"))
}

pub type RunResult = std::result::Result<ResultSet, RunError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Dynamics,
    Steady,
    Greens,
    Semiclassical,
    Sweep,
    Check,
}

pub fn run(mode: Mode, config: &ExperimentConfig) -> RunResult {
    config.validate().map_err(RunError::Validation)?;
    let start = std::time::Instant::now();
    let mut results = match mode {
        Mode::Dynamics => run_dynamics(config)?,
        Mode::Steady => run_steady(config)?,
        Mode::Greens => run_greens(config)?,
        Mode::Semiclassical => run_semiclassical(config)?,
        Mode::Sweep => run_sweep(config)?,
        Mode::Check => run_check(config)?,
    };
    results.metadata.wall_time_s = start.elapsed().as_secs_f64();
    Ok(results)
}

struct QuantumSetup {
    params: DimerParams,
    basis: FockBasis,
    decomps: Vec<SpectralDecomposition>,
}

fn quantum_setup(
    config: &ExperimentConfig,
    sectors: &[i64],
) -> std::result::Result<QuantumSetup, RunError> {
    let params = config.dimer_params().map_err(RunError::Validation)?;
    let basis =
        FockBasis::enumerate(config.system.cutoff).map_err(engine_err("basis enumeration"))?;
    let blocks =
        build_blocks(&basis, &params, sectors).map_err(engine_err("Lindbladian assembly"))?;
    let decomps = diagonalize_blocks(&blocks).map_err(engine_err("diagonalization"))?;
    Ok(QuantumSetup {
        params,
        basis,
        decomps,
    })
}

fn spectral_checks(results: &mut ResultSet, decomps: &[SpectralDecomposition]) {
    for d in decomps {
        let c = d.condition();
        results.push_check(CheckLine::new(
            format!("biorthogonality_residual_nu{}", d.nu()),
            c.max_biorth_residual,
            1e-8,
        ));
        results.push_check(CheckLine::new(
            format!("max_eigenvalue_real_part_nu{}", d.nu()),
            c.max_real_part.max(0.0),
            1e-10,
        ));
    }
}

fn steady_observable_table(
    basis: &FockBasis,
    params: &DimerParams,
    rho: &DensityMatrix,
) -> (Table, f64, f64) {
    let n_l = rho.expectation(&number_operator(basis, Site::L)).re;
    let n_r = rho.expectation(&number_operator(basis, Site::R)).re;
    let kinetic = rho.expectation(&kinetic_operator(basis, params.j)).re;
    let current = rho.expectation(&current_operator(basis, params.j)).re;
    let table = Table::new("steady_observables")
        .float_column("n_L", vec![n_l])
        .float_column("n_R", vec![n_r])
        .float_column("Z", vec![n_l - n_r])
        .float_column("N", vec![n_l + n_r])
        .float_column("kinetic_energy", vec![kinetic])
        .float_column("current", vec![current])
        .float_column(
            "current_rate_formula",
            vec![stationary_current(params, n_l, n_r)],
        );
    (table, n_l, n_r)
}

fn density_checks(results: &mut ResultSet, rho: &DensityMatrix) {
    results.push_check(CheckLine::new(
        "steady_state_trace_deviation",
        (rho.trace() - num_complex::Complex64::new(1.0, 0.0)).norm(),
        1e-10,
    ));
    results.push_check(CheckLine::new(
        "steady_state_hermiticity",
        rho.hermiticity_residual(),
        1e-10,
    ));
    results.push_check(CheckLine::new(
        "steady_state_min_eigenvalue",
        rho.min_eigenvalue().min(0.0),
        1e-8,
    ));
}

fn run_dynamics(config: &ExperimentConfig) -> RunResult {
    let setup = quantum_setup(config, &[0])?;
    let decomp = &setup.decomps[0];
    let rho0 = DensityMatrix::from_fock_state(
        &setup.basis,
        config.initial_state.n_l,
        config.initial_state.n_r,
    )
    .map_err(engine_err("initial state"))?;
    let times = config.time_grid.build().map_err(RunError::Validation)?;
    let times = if times[0] == 0.0 {
        times
    } else {
        // evolve needs the initial point for Z0-relative metrics
        let mut t = vec![0.0];
        t.extend(times);
        t
    };
    let traj = evolve(decomp, &setup.basis, &rho0, &times).map_err(engine_err("time evolution"))?;

    let mut results = ResultSet::new("dynamics", config);
    spectral_checks(&mut results, &setup.decomps);

    results.push_table(
        Table::new("trajectory")
            .float_column("t", traj.times.clone())
            .float_column("n_L", traj.n_l.clone())
            .float_column("n_R", traj.n_r.clone())
            .float_column("Z", traj.z.clone())
            .float_column("N", traj.n_total.clone()),
    );

    let t_end = *traj.times.last().unwrap();
    let (avg_from, avg_to) = (
        config.dynamics.average_from,
        config.dynamics.average_to.min(t_end),
    );
    let z_avg = time_averaged_imbalance(&traj, avg_from, avg_to)
        .map_err(|e| RunError::Validation(anyhow!("dynamics.average window: {e}")))?;

    let (fit_rate, fit_status) = match config.dynamics.fit.as_str() {
        "none" => (f64::NAN, "skipped".to_string()),
        kind => {
            let method = if kind == "envelope" {
                DecayFit::Envelope
            } else {
                DecayFit::LogSlope
            };
            let (t0, t1) = default_fit_window(&traj);
            match late_decay_rate(&traj, t0, t1, method) {
                Ok(rate) => (rate, "ok".to_string()),
                Err(e) => (f64::NAN, e.to_string()),
            }
        }
    };
    results.push_table(
        Table::new("dynamics_metrics")
            .float_column("time_averaged_Z", vec![z_avg])
            .float_column("average_from", vec![avg_from])
            .float_column("average_to", vec![avg_to])
            .float_column("late_decay_rate", vec![fit_rate])
            .str_column("fit_status", vec![fit_status]),
    );
    Ok(results)
}

fn run_steady(config: &ExperimentConfig) -> RunResult {
    let setup = quantum_setup(config, &[0])?;
    let rho = steady_state(&setup.decomps[0], &setup.basis)
        .map_err(engine_err("steady-state extraction"))?;

    let mut results = ResultSet::new("steady", config);
    spectral_checks(&mut results, &setup.decomps);
    density_checks(&mut results, &rho);

    let (table, _, _) = steady_observable_table(&setup.basis, &setup.params, &rho);
    results.push_table(table);

    // diagonal populations
    let mut col_nl = Vec::new();
    let mut col_nr = Vec::new();
    let mut col_p = Vec::new();
    for (k, &(n_l, n_r)) in setup.basis.states().iter().enumerate() {
        col_nl.push(n_l as f64);
        col_nr.push(n_r as f64);
        col_p.push(rho.mat()[(k, k)].re);
    }
    results.push_table(
        Table::new("populations")
            .float_column("n_L", col_nl)
            .float_column("n_R", col_nr)
            .float_column("p", col_p),
    );
    Ok(results)
}

/// Edge-shell population of one mode, which controls how far the truncated
/// ladder algebra sits from the untruncated sum rules.
fn edge_population(basis: &FockBasis, rho: &DensityMatrix, site: Site) -> f64 {
    let cutoff = basis.cutoff();
    basis
        .states()
        .iter()
        .enumerate()
        .filter(|(_, &(n_l, n_r))| match site {
            Site::L => n_l == cutoff,
            Site::R => n_r == cutoff,
        })
        .map(|(k, _)| rho.mat()[(k, k)].re)
        .sum()
}

fn sum_rule_checks(
    results: &mut ResultSet,
    basis: &FockBasis,
    params: &DimerParams,
    rho: &DensityMatrix,
    report: &SumRuleReport,
) {
    let shells = (basis.cutoff() + 1) as f64;
    let edge_l = edge_population(basis, rho, Site::L);
    let edge_r = edge_population(basis, rho, Site::R);

    // identities of the truncated ladder algebra, exact up to solver error
    results.push_check(CheckLine::new(
        "norm_L_vs_truncated_commutator",
        report.norm_l - (1.0 - shells * edge_l),
        1e-8,
    ));
    results.push_check(CheckLine::new(
        "norm_R_vs_truncated_commutator",
        report.norm_r - (1.0 - shells * edge_r),
        1e-8,
    ));
    results.push_check(CheckLine::new(
        "occupation_L_identity",
        report.occupation_l - (report.direct_occupation_l - 0.5 * shells * edge_l),
        1e-6,
    ));
    results.push_check(CheckLine::new(
        "occupation_R_identity",
        report.occupation_r - (report.direct_occupation_r - 0.5 * shells * edge_r),
        1e-6,
    ));
    results.push_check(CheckLine::new(
        "kinetic_identity",
        report.kinetic - report.direct_kinetic,
        1e-6,
    ));
    results.push_check(CheckLine::new(
        "current_integral_vs_direct",
        report.current - report.direct_current,
        1e-6,
    ));
    // rate balance including the trunc correction of the pump ladder
    let corrected_rate =
        report.current_rate_formula - shells * (params.pump_l * edge_l - params.pump_r * edge_r);
    results.push_check(CheckLine::new(
        "current_vs_corrected_rate_formula",
        report.current - corrected_rate,
        1e-6,
    ));
    if params.is_symmetric() {
        results.push_check(CheckLine::new(
            "symmetric_current_zero",
            report.current,
            1e-8,
        ));
    }
}

fn sum_rule_table(report: &SumRuleReport) -> Table {
    Table::new("sum_rules")
        .float_column("norm_L", vec![report.norm_l])
        .float_column("norm_R", vec![report.norm_r])
        .float_column("occupation_L", vec![report.occupation_l])
        .float_column("occupation_R", vec![report.occupation_r])
        .float_column("kinetic", vec![report.kinetic])
        .float_column("current", vec![report.current])
        .float_column("current_rate_formula", vec![report.current_rate_formula])
        .float_column("direct_occupation_L", vec![report.direct_occupation_l])
        .float_column("direct_occupation_R", vec![report.direct_occupation_r])
        .float_column("direct_kinetic", vec![report.direct_kinetic])
        .float_column("direct_current", vec![report.direct_current])
}

struct GreensComputation {
    report: SumRuleReport,
    series_table: Table,
}

fn compute_greens(
    config: &ExperimentConfig,
    setup: &QuantumSetup,
    results: Option<&mut ResultSet>,
) -> std::result::Result<GreensComputation, RunError> {
    let rho = steady_state(&setup.decomps[0], &setup.basis)
        .map_err(engine_err("steady-state extraction"))?;
    let sectors = GfSectors::new(&setup.decomps[1], &setup.decomps[2])
        .map_err(engine_err("sector selection"))?;
    let set: GreensSet = build_greens_set(&sectors, &setup.basis, &rho, DEFAULT_WEIGHT_PRUNE)
        .map_err(engine_err("pole-sum assembly"))?;
    let report = sum_rules(&set, &setup.basis, &setup.params, &rho);

    let n_mean = 0.5 * (report.direct_occupation_l + report.direct_occupation_r);
    let grid = match (
        config.frequency_grid.omega_min,
        config.frequency_grid.omega_max,
    ) {
        (Some(lo), Some(hi)) if lo < hi => linspace(lo, hi, config.frequency_grid.n_points),
        (None, None) => {
            let default = default_frequency_grid(&setup.params, n_mean);
            if config.frequency_grid.n_points == default.len() {
                default
            } else {
                linspace(
                    default[0],
                    *default.last().unwrap(),
                    config.frequency_grid.n_points,
                )
            }
        }
        _ => {
            return Err(RunError::Validation(anyhow!(
                "frequency_grid.omega_min/omega_max must both be set (min < max) or both left out"
            )))
        }
    };

    let series_ll = spectral_series(&set.ret_ll, &set.kel_ll, &grid);
    let series_rr = spectral_series(&set.ret_rr, &set.kel_rr, &grid);
    let c_lr = set.kel_lr.evaluate_grid(&grid);
    let series_table = Table::new("greens")
        .float_column("omega", grid.clone())
        .float_column("A_L", series_ll.a_ij)
        .float_column("A_R", series_rr.a_ij)
        .float_column(
            "ReC_LR",
            c_lr.iter()
                .map(|g| {
                    (num_complex::Complex64::new(0.0, 1.0) * g / (2.0 * std::f64::consts::PI)).re
                })
                .collect(),
        )
        .float_column(
            "ImC_LR",
            c_lr.iter()
                .map(|g| {
                    (num_complex::Complex64::new(0.0, 1.0) * g / (2.0 * std::f64::consts::PI)).im
                })
                .collect(),
        );

    if let Some(results) = results {
        density_checks(results, &rho);
        sum_rule_checks(results, &setup.basis, &setup.params, &rho, &report);
    }
    Ok(GreensComputation {
        report,
        series_table,
    })
}

fn run_greens(config: &ExperimentConfig) -> RunResult {
    let setup = quantum_setup(config, &[0, 1, -1])?;
    let mut results = ResultSet::new("greens", config);
    spectral_checks(&mut results, &setup.decomps);
    let computed = compute_greens(config, &setup, Some(&mut results))?;
    results.push_table(computed.series_table);
    results.push_table(sum_rule_table(&computed.report));
    Ok(results)
}

fn run_semiclassical(config: &ExperimentConfig) -> RunResult {
    let params = config.sc_params().map_err(RunError::Validation)?;
    let state0 = config.semiclassical.state().map_err(RunError::Validation)?;
    let sc = &config.semiclassical;
    if sc.t_end <= 0.0 || sc.n_points < 2 {
        return Err(RunError::Validation(anyhow!(
            "semiclassical.t_end must be positive and n_points at least 2"
        )));
    }
    let traj = integrate_sc(&state0, &params, sc.t_end)
        .map_err(engine_err("semiclassical integration"))?;

    let mut results = ResultSet::new("semiclassical", config);
    let samples = traj.sample(sc.n_points);
    results.push_table(
        Table::new("sc_trajectory")
            .float_column("t", samples.iter().map(|s| s.0).collect())
            .float_column("N", samples.iter().map(|s| s.1).collect())
            .float_column("Z", samples.iter().map(|s| s.2).collect())
            .float_column("phi", samples.iter().map(|s| s.3).collect()),
    );

    let t_cross = traj.crossing_time().unwrap_or(f64::INFINITY);
    let window = sc.average_window.min(sc.t_end);
    let z_avg = traj
        .time_averaged_imbalance(window)
        .map_err(|e| RunError::Validation(anyhow!("semiclassical.average_window: {e}")))?;
    let j_over_u = if config.system.u != 0.0 {
        config.system.j / config.system.u
    } else {
        f64::INFINITY
    };
    let ratio = critical_ratio(sc.n0, sc.z0).map_err(|e| RunError::Validation(anyhow!("{e}")))?;
    let z1_sq =
        turning_point(sc.n0, sc.z0, j_over_u).map_err(|e| RunError::Validation(anyhow!("{e}")))?;
    let period = if params.is_closed() && config.system.u > 0.0 && sc.z0 != 0.0 {
        match oscillation_period(sc.n0, sc.z0, j_over_u, config.system.u) {
            Ok(Period::Finite(t)) => t,
            Ok(Period::Infinite) => f64::INFINITY,
            Err(_) => f64::NAN,
        }
    } else {
        f64::NAN
    };
    results.push_table(
        Table::new("sc_metrics")
            .float_column("t_cross", vec![t_cross])
            .float_column("time_averaged_Z", vec![z_avg])
            .float_column("average_window", vec![window])
            .float_column("critical_ratio", vec![ratio])
            .float_column("turning_point_Z1_squared", vec![z1_sq])
            .float_column("closed_period", vec![period]),
    );

    if params.is_closed() {
        use dimersim_core::semiclassical::closed_energy;
        let e0 = closed_energy(&state0, &params);
        let scale = e0.abs().max(1e-12);
        let mut max_de = 0.0f64;
        let mut max_dn = 0.0f64;
        for (_, n, z, phi) in traj.sample(512) {
            let s = dimersim_core::semiclassical::SCState { n, z, phi };
            max_de = max_de.max((closed_energy(&s, &params) - e0).abs() / scale);
            max_dn = max_dn.max((n - sc.n0).abs() / sc.n0.max(1e-12));
        }
        results.push_check(CheckLine::new("closed_energy_drift", max_de, 1e-8));
        results.push_check(CheckLine::new("closed_number_drift", max_dn, 1e-8));
    }
    Ok(results)
}

fn run_sweep(config: &ExperimentConfig) -> RunResult {
    config.validate_sweep().map_err(RunError::Validation)?;
    let mut results = ResultSet::new("sweep", config);

    struct PointOutcome {
        summary: Vec<(String, f64)>,
        series: Vec<Table>,
        status: String,
    }

    let outcomes: Vec<PointOutcome> = par::par_map(&config.sweep.values, |&value| {
        let mut point_config = config.clone();
        if let Err(e) = point_config.set(&config.sweep.parameter, &format!("{value}")) {
            return PointOutcome {
                summary: Vec::new(),
                series: Vec::new(),
                status: format!("set failed: {e}"),
            };
        }
        let target = match config.sweep.target.as_str() {
            "dynamics" => Mode::Dynamics,
            "steady" => Mode::Steady,
            "greens" => Mode::Greens,
            _ => Mode::Semiclassical,
        };
        match run(target, &point_config) {
            Ok(point) => {
                let mut summary = Vec::new();
                for table in &point.tables {
                    // one-row metric tables fan into the summary
                    if point_summary_table(target, &table.name) && table.n_rows() == 1 {
                        for col in &table.columns {
                            if let crate::emit::ColumnData::Float(v) = &col.data {
                                summary.push((col.name.clone(), v[0]));
                            }
                        }
                    }
                }
                let series = if config.sweep.emit_series {
                    point.tables
                } else {
                    Vec::new()
                };
                PointOutcome {
                    summary,
                    series,
                    status: "ok".into(),
                }
            }
            Err(e) => PointOutcome {
                summary: Vec::new(),
                series: Vec::new(),
                status: e.to_string(),
            },
        }
    });

    // merge in sweep order: the union of summary columns, NaN where missing
    let mut column_names: Vec<String> = Vec::new();
    for outcome in &outcomes {
        for (name, _) in &outcome.summary {
            if !column_names.contains(name) {
                column_names.push(name.clone());
            }
        }
    }
    let mut table = Table::new("sweep_summary")
        .float_column("value", config.sweep.values.clone())
        .str_column(
            "status",
            outcomes.iter().map(|o| o.status.clone()).collect(),
        );
    for name in &column_names {
        let data: Vec<f64> = outcomes
            .iter()
            .map(|o| {
                o.summary
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| *v)
                    .unwrap_or(f64::NAN)
            })
            .collect();
        table = table.float_column(name.clone(), data);
    }
    results.push_table(table);

    for (k, outcome) in outcomes.into_iter().enumerate() {
        for mut series in outcome.series {
            series.name = format!("point{k:03}_{}", series.name);
            results.push_table(series);
        }
    }
    Ok(results)
}

fn point_summary_table(target: Mode, table_name: &str) -> bool {
    matches!(
        (target, table_name),
        (Mode::Dynamics, "dynamics_metrics")
            | (Mode::Steady, "steady_observables")
            | (Mode::Greens, "sum_rules")
            | (Mode::Semiclassical, "sc_metrics")
    )
}

/// The standing invariant suite: fast, fixed-size configurations probing
/// every layer of the engine. Any failed line makes the command exit 3.
fn run_check(config: &ExperimentConfig) -> RunResult {
    use dimersim_core::elliptic::elliptic_k;
    use dimersim_core::liouvillian::lindbladian_superop;
    use dimersim_core::spectral::evolve_direct;

    let mut results = ResultSet::new("check", config);

    // trace preservation and spectral stability
    {
        let basis = FockBasis::enumerate(3).map_err(engine_err("check basis"))?;
        let params = DimerParams::new(1.0, 0.1, 0.05, 3e-2, 2e-2, 1e-2, 5e-3)
            .map_err(|e| RunError::Engine(anyhow!("{e}")))?;
        let sop = lindbladian_superop(&basis, &params).map_err(engine_err("check Lindbladian"))?;
        results.push_check(CheckLine::new(
            "trace_preservation_residual",
            sop.identity_left_residual(),
            1e-11,
        ));
        let blocks =
            build_blocks(&basis, &params, &[0, 1, -1]).map_err(engine_err("check blocks"))?;
        let decomps = diagonalize_blocks(&blocks).map_err(engine_err("check eigensolve"))?;
        spectral_checks(&mut results, &decomps);

        // completeness of the bi-normalized basis
        let d0 = &decomps[0];
        let resolution = d0.right() * d0.left();
        let mut max = 0.0f64;
        for r in 0..d0.size() {
            for c in 0..d0.size() {
                let expected = if r == c { 1.0 } else { 0.0 };
                max = max
                    .max((resolution[(r, c)] - num_complex::Complex64::new(expected, 0.0)).norm());
            }
        }
        results.push_check(CheckLine::new("completeness_residual", max, 1e-6));

        // sector conjugation
        let (plus, minus) = (&decomps[1], &decomps[2]);
        let mut a: Vec<_> = plus.eigenvalues().to_vec();
        let mut b: Vec<_> = minus.eigenvalues().iter().map(|l| l.conj()).collect();
        let key = |z: &num_complex::Complex64| (z.re, z.im);
        a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        b.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        let max_pair = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        results.push_check(CheckLine::new(
            "sector_conjugation_residual",
            max_pair,
            1e-9,
        ));
    }

    // steady state: geometric law and Hamiltonian independence
    {
        let basis = FockBasis::enumerate(6).map_err(engine_err("check basis"))?;
        let u = 0.1;
        let mk = |j_over_u: f64| -> std::result::Result<DensityMatrix, RunError> {
            let p = DimerParams::symmetric(1.0, u, j_over_u * u, 3e-2, 1e-2)
                .map_err(|e| RunError::Engine(anyhow!("{e}")))?;
            let blocks = build_blocks(&basis, &p, &[0]).map_err(engine_err("check blocks"))?;
            let d = diagonalize_block(&blocks[0]).map_err(engine_err("check eigensolve"))?;
            steady_state(&d, &basis).map_err(engine_err("check steady state"))
        };
        let rho_a = mk(0.1)?;
        let rho_b = mk(1.5)?;
        density_checks(&mut results, &rho_a);
        results.push_check(CheckLine::new(
            "steady_state_hamiltonian_independence",
            rho_a.trace_distance(&rho_b),
            1e-8,
        ));

        let q: f64 = 1e-2 / 3e-2;
        let mut max_dev = 0.0f64;
        for (k, &(n_l, n_r)) in basis.states().iter().enumerate() {
            if n_l + n_r > 2 * basis.cutoff() - 2 || n_l >= basis.cutoff() {
                continue;
            }
            let up = basis.index_of(n_l + 1, n_r).unwrap();
            let ratio = rho_a.mat()[(up, up)].re / rho_a.mat()[(k, k)].re;
            max_dev = max_dev.max((ratio - q).abs() / q);
        }
        results.push_check(CheckLine::new("geometric_population_law", max_dev, 1e-6));
    }

    // spectral evolution against direct integration
    {
        let basis = FockBasis::enumerate(4).map_err(engine_err("check basis"))?;
        let u = 0.1;
        let params = DimerParams::symmetric(1.0, u, 0.5 * u, 3e-2, 1e-2)
            .map_err(|e| RunError::Engine(anyhow!("{e}")))?;
        let blocks = build_blocks(&basis, &params, &[0]).map_err(engine_err("check blocks"))?;
        let d = diagonalize_block(&blocks[0]).map_err(engine_err("check eigensolve"))?;
        let rho0 = DensityMatrix::from_fock_state(&basis, 2, 1)
            .map_err(|e| RunError::Engine(anyhow!("{e}")))?;
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.75).collect();
        let spectral = evolve(&d, &basis, &rho0, &times).map_err(engine_err("check evolution"))?;
        let sop = lindbladian_superop(&basis, &params).map_err(engine_err("check Lindbladian"))?;
        let direct = evolve_direct(&sop, &basis, &rho0, &times, 1e-9)
            .map_err(engine_err("check direct integration"))?;
        let max_dz = spectral
            .z
            .iter()
            .zip(&direct.trajectory.z)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        results.push_check(CheckLine::new("spectral_vs_direct_evolution", max_dz, 1e-6));
        results.push_check(CheckLine::new(
            "direct_trace_preservation",
            direct.max_trace_deviation,
            1e-9,
        ));
        results.push_check(CheckLine::new(
            "direct_hermiticity",
            direct.max_hermiticity_residual,
            1e-9,
        ));
    }

    // Green's functions against the quadratic closed forms
    {
        let (gl, gr_rate, pl, pr) = (5.5e-3, 4.6e-3, 5e-4, 4e-4);
        let params = DimerParams::new(1.0, 0.0, 0.15, gl, gr_rate, pl, pr)
            .map_err(|e| RunError::Engine(anyhow!("{e}")))?;
        let basis = FockBasis::enumerate(8).map_err(engine_err("check basis"))?;
        let blocks =
            build_blocks(&basis, &params, &[0, 1, -1]).map_err(engine_err("check blocks"))?;
        let decomps = diagonalize_blocks(&blocks).map_err(engine_err("check eigensolve"))?;
        let rho = steady_state(&decomps[0], &basis).map_err(engine_err("check steady state"))?;
        let sectors = GfSectors::new(&decomps[1], &decomps[2])
            .map_err(|e| RunError::Engine(anyhow!("{e}")))?;
        let set = build_greens_set(&sectors, &basis, &rho, DEFAULT_WEIGHT_PRUNE)
            .map_err(engine_err("check pole sums"))?;

        let oracle = dimersim_core::u0::U0Params::from_rates(1.0, 1.0, gl, pl, gr_rate, pr)
            .map_err(|e| RunError::Engine(anyhow!("{e}")))?;
        let grid = linspace(1.0 - 0.75, 1.0 + 0.75, 101);
        let mut max_da = 0.0f64;
        for &w in &grid {
            let (gr_exact, _) = dimersim_core::u0::coupled_gf(&oracle, 0.15, w, Site::L);
            let a_exact = -gr_exact.im / std::f64::consts::PI;
            let a_engine = -set.ret_ll.evaluate(w).im / std::f64::consts::PI;
            max_da = max_da.max((a_engine - a_exact).abs());
        }
        results.push_check(CheckLine::new(
            "u0_spectral_function_vs_closed_form",
            max_da,
            1e-3,
        ));

        let report = sum_rules(&set, &basis, &params, &rho);
        sum_rule_checks(&mut results, &basis, &params, &rho, &report);
    }

    // semiclassical analytics
    {
        use dimersim_core::semiclassical::{closed_energy, SCParams, SCState};
        results.push_check(CheckLine::new(
            "critical_ratio_4_2",
            critical_ratio(4.0, 2.0).map_err(|e| RunError::Engine(anyhow!("{e}")))? - 3.7320508,
            1e-6,
        ));
        results.push_check(CheckLine::new(
            "elliptic_k_half",
            elliptic_k(0.5) - 1.8540746773013719,
            1e-12,
        ));
        let u = 0.1;
        let p = SCParams::closed(u, 2.0 * u).map_err(|e| RunError::Engine(anyhow!("{e}")))?;
        let s0 = SCState::new(3.0, 1.0, 0.0).map_err(|e| RunError::Engine(anyhow!("{e}")))?;
        let traj = integrate_sc(&s0, &p, 400.0).map_err(engine_err("check semiclassical"))?;
        let e0 = closed_energy(&s0, &p);
        let mut max_de = 0.0f64;
        for (_, n, z, phi) in traj.sample(256) {
            let s = SCState { n, z, phi };
            max_de = max_de.max((closed_energy(&s, &p) - e0).abs() / e0.abs());
        }
        results.push_check(CheckLine::new("sc_energy_conservation", max_de, 1e-8));

        let analytic = oscillation_period(3.0, 1.0, 2.0, u)
            .map_err(|e| RunError::Engine(anyhow!("{e}")))?
            .finite()
            .unwrap_or(f64::NAN);
        let measured = traj.measured_period().unwrap_or(f64::NAN);
        results.push_check(CheckLine::new(
            "sc_period_analytic_vs_measured",
            (measured - analytic) / analytic,
            1e-4,
        ));
    }

    // ladder operators
    {
        let basis = FockBasis::enumerate(4).map_err(engine_err("check basis"))?;
        for site in [Site::L, Site::R] {
            let a = annihilation(&basis, site);
            let n = number_operator(&basis, site);
            let residual = a.dagger().matmul(&a).max_abs_diff(&n);
            results.push_check(CheckLine::new(
                format!("number_operator_identity_{site:?}"),
                residual,
                1e-13,
            ));
        }
        let _ = OperatorMatrix::identity(basis.dim());
    }

    Ok(results)
}
