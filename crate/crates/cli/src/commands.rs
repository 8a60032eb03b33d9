//! The five subcommands: validate, propagate, montecarlo, compare, spectrum.
//! Library modules stay I/O-free; everything that touches the filesystem
//! lives here.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use chaos_ns::mc::EnsembleStats;
use chaos_ns::noise::{path_from_chaos, ChaosCoordinates, NoiseModel, TimeBasis};
use chaos_ns::propagator::DiagRow;
use chaos_ns::rng::seeded_rng;
use chaos_ns::snsf;
use chaos_ns::validate::{run_invariant_suite, FaultInjection};

use crate::config::{ExperimentConfig, FieldSpec, NamedField};
use crate::error::CliError;
use crate::report::{format_float, CsvTable, RunReport, Verdict};

pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
}

impl RunContext {
    fn prepare(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn effective_seed(cfg: &ExperimentConfig, ctx: &RunContext) -> u64 {
    ctx.seed_override.unwrap_or(cfg.mc.seed)
}

/// Soft runtime budget for the invariant suite, seconds.
const VALIDATE_BUDGET_S: u64 = 120;

/// Run the invariant suite; returns (exit code, JSON for stdout).
pub fn cmd_validate() -> (i32, String) {
    let start = std::time::Instant::now();
    let results = run_invariant_suite(FaultInjection::None);
    let elapsed = start.elapsed().as_secs();
    if elapsed > VALIDATE_BUDGET_S {
        eprintln!(
            "warning: invariant suite took {elapsed} s, above the {VALIDATE_BUDGET_S} s budget"
        );
    }
    let pass = results.iter().all(|r| r.pass);
    let first_failure = results.iter().find(|r| !r.pass).map(|r| r.name.clone());
    let json = json!({
        "pass": pass,
        "first_failure": first_failure,
        "checks": results.iter().map(|r| json!({
            "name": r.name,
            "pass": r.pass,
            "detail": r.detail,
        })).collect::<Vec<_>>(),
    });
    (
        if pass { 0 } else { 1 },
        serde_json::to_string_pretty(&json).expect("serializes"),
    )
}

fn diag_csv(diags: &[DiagRow], stride: usize) -> CsvTable {
    let mut table = CsvTable::new(vec![
        "t_seconds",
        "mean_energy_l2sq",
        "chaos_second_moment_l2sq",
        "max_divergence",
        "cfl_estimate",
    ]);
    let last = diags.len() - 1;
    for (step, d) in diags.iter().enumerate() {
        if step % stride == 0 || step == last {
            table.push(vec![
                d.t,
                d.mean_energy,
                d.chaos_energy,
                d.max_divergence,
                d.cfl,
            ]);
        }
    }
    table
}

fn stats_csv(stats: &EnsembleStats) -> CsvTable {
    let mut table = CsvTable::new(vec![
        "t_seconds",
        "mean_energy_l2sq",
        "energy_se_l2sq",
        "mean_dissipation_h1sq_dt",
        "dissipation_se_h1sq_dt",
    ]);
    for (i, &t) in stats.times.iter().enumerate() {
        table.push(vec![
            t,
            stats.mean_energy[i],
            stats.energy_se[i],
            stats.mean_dissipation[i],
            stats.dissipation_se[i],
        ]);
    }
    table
}

fn is_zero(spec: &FieldSpec) -> bool {
    matches!(spec, FieldSpec::Named(NamedField::Zero))
}

fn taylor_green_config(cfg: &ExperimentConfig) -> bool {
    matches!(cfg.forcing.u0, FieldSpec::Named(NamedField::TaylorGreen))
        && is_zero(&cfg.forcing.f)
        && is_zero(&cfg.forcing.g)
        && is_zero(&cfg.forcing.h)
        && cfg.physics.c0 == 0.0
        && cfg.physics.b == [0.0, 0.0]
}

/// Closed-form Taylor-Green decay verdict when the configuration is the
/// deterministic vortex.
fn tg_verdict(cfg: &ExperimentConfig, e0: f64, e_final: f64) -> Option<Verdict> {
    if !taylor_green_config(cfg) {
        return None;
    }
    let expected = e0 * (-4.0 * cfg.physics.nu * cfg.time.t_end).exp();
    let rel = (e_final - expected).abs() / expected;
    Some(Verdict::new(
        "taylor-green decay",
        rel <= 1e-6,
        format!(
            "final energy {} vs closed form {} (relative error {:.3e}, tolerance 1e-6)",
            format_float(e_final),
            format_float(expected),
            rel
        ),
    ))
}

pub fn cmd_propagate(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<RunReport, CliError> {
    ctx.prepare()?;
    let grid = cfg.build_grid()?;
    let noise = Arc::new(cfg.build_noise(&grid)?);
    let system = cfg.build_propagator(&grid, Arc::clone(&noise), cfg.chaos.p)?;
    let u0 = cfg.build_field(&grid, &cfg.forcing.u0, "u0")?;
    let state = system.initial_state(&u0);
    let (final_state, diags) = system
        .integrate(&state, cfg.time.t_end)
        .map_err(CliError::from_solver)?;

    let table = diag_csv(&diags, cfg.time.output_stride);
    table.write(&ctx.path("chaos_series.csv"))?;

    let mut report = RunReport::new(&cfg.canonical_json());
    report.series.push("chaos_series.csv".into());
    let e0 = diags[0].mean_energy;
    let e_final = final_state.mean().energy();
    report.insert_summary("initial_mean_energy", json!(e0));
    report.insert_summary("final_mean_energy", json!(e_final));
    report.insert_summary("final_second_moment", json!(final_state.second_moment()));
    report.insert_summary("chaos_indices", json!(system.index_set().len()));
    report.insert_summary("noise_channels", json!(noise.n_w()));
    if let Some(v) = tg_verdict(cfg, diags[0].mean_energy, e_final) {
        report.verdicts.push(v);
    }

    if cfg.flags.write_snapshots {
        let dir = ctx.path("snapshots");
        fs::create_dir_all(&dir)?;
        for (pos, field) in final_state.coeffs().iter().enumerate() {
            let file = fs::File::create(dir.join(format!("alpha_{pos:04}.snsf")))?;
            snsf::write_field_snapshot(file, field).map_err(CliError::from_solver)?;
        }
    }

    report.write(&ctx.path("report.json"))?;
    Ok(report)
}

/// One-sided energy-balance check: mean energy plus 2 nu times the recorded
/// dissipation stays below the initial energy plus the forcing budget.
fn energy_balance_verdict(
    cfg: &ExperimentConfig,
    stats: &EnsembleStats,
    f_norm: f64,
    g_sq_sum: f64,
    tol: f64,
) -> Verdict {
    let nu = cfg.physics.nu;
    let e0 = stats.mean_energy[0];
    let mut worst: f64 = f64::MIN;
    let mut budget = e0;
    let mut prev_t = stats.times[0];
    for i in 0..stats.times.len() {
        if i > 0 {
            let dt = stats.times[i] - prev_t;
            // Left-endpoint bound: 2 sqrt(E) |f|_2 + sum_k |g_k|_2^2.
            budget += dt * (2.0 * stats.mean_energy[i - 1].sqrt() * f_norm + g_sq_sum);
            prev_t = stats.times[i];
        }
        let lhs = stats.mean_energy[i] + 2.0 * nu * stats.mean_dissipation[i];
        worst = worst.max(lhs - budget);
    }
    let scale = e0.max(1e-300);
    Verdict::new(
        "energy balance",
        worst <= tol * scale,
        format!(
            "sup_t [E|u|^2 + 2 nu E dissipation - budget] = {:.3e} (tolerance {:.1e} relative to E0 = {})",
            worst,
            tol,
            format_float(e0)
        ),
    )
}

/// Closed-form variance verdict for the linear additive configuration.
fn linear_additive_verdict(
    cfg: &ExperimentConfig,
    grid: &chaos_ns::grid::Grid,
    noise: &NoiseModel,
    stats: &EnsembleStats,
) -> Option<Verdict> {
    if cfg.flags.convection || cfg.physics.c0 != 0.0 {
        return None;
    }
    let FieldSpec::Modes { modes } = &cfg.forcing.g else {
        return None;
    };
    if modes.len() != 1 {
        return None;
    }
    let k = modes[0].k;
    let g_field = noise.modes().last()?.g.as_ref()?;
    let g_proj = g_field.leray_project();
    let gsq: f64 = (0..2).map(|l| g_proj.coeff(k, l).norm_sqr()).sum();
    let scale = grid.wavenumber_scale();
    let ksq = (k[0] * k[0] + k[1] * k[1]) as f64 * scale * scale;
    let lambda = cfg.physics.nu * ksq;
    let t_end = cfg.time.t_end;
    let expected = gsq * (1.0 - (-2.0 * lambda * t_end).exp()) / (2.0 * lambda);

    let last = stats.times.len() - 1;
    let (i, j) = wrap_index(grid.n(), k);
    let mean_sq = stats.mean_coeff_sq[last][[i, j]];
    let mean_field = &stats.mean_field[last];
    let mean_abs2: f64 = (0..2).map(|l| mean_field.coeff(k, l).norm_sqr()).sum();
    let variance = (mean_sq - mean_abs2).max(0.0);
    // Relative standard error of a variance estimate, about sqrt(2 / M).
    let se = expected * (2.0 / stats.paths.max(2) as f64).sqrt();
    let pass = (variance - expected).abs() <= 3.0 * se;
    Some(Verdict::new(
        "linear-additive variance",
        pass,
        format!(
            "mode ({},{}) variance {} vs closed form {} (3 SE = {:.3e})",
            k[0],
            k[1],
            format_float(variance),
            format_float(expected),
            3.0 * se
        ),
    ))
}

fn wrap_index(n: usize, k: [i64; 2]) -> (usize, usize) {
    let n = n as i64;
    (
        (((k[0] % n) + n) % n) as usize,
        (((k[1] % n) + n) % n) as usize,
    )
}

pub fn cmd_montecarlo(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<RunReport, CliError> {
    ctx.prepare()?;
    let grid = cfg.build_grid()?;
    let noise = Arc::new(cfg.build_noise(&grid)?);
    let mc = cfg.build_mc(&grid, Arc::clone(&noise), effective_seed(cfg, ctx))?;
    let u0 = cfg.build_field(&grid, &cfg.forcing.u0, "u0")?;
    let stats = mc.run_ensemble(&u0).map_err(CliError::from_solver)?;

    stats_csv(&stats).write(&ctx.path("mc_series.csv"))?;

    let mut report = RunReport::new(&cfg.canonical_json());
    report.series.push("mc_series.csv".into());
    let last = stats.times.len() - 1;
    report.insert_summary("paths", json!(stats.paths));
    report.insert_summary("initial_mean_energy", json!(stats.mean_energy[0]));
    report.insert_summary("final_mean_energy", json!(stats.mean_energy[last]));
    report.insert_summary("final_energy_se", json!(stats.energy_se[last]));
    report.insert_summary(
        "final_mean_dissipation",
        json!(stats.mean_dissipation[last]),
    );
    report.insert_summary("degenerate_se", json!(stats.degenerate_se));
    if stats.degenerate_se {
        report
            .verdicts
            .push(Verdict::new(
                "standard errors",
                true,
                "single-path run: standard errors are zero by convention".into(),
            ));
    }

    let forcing = cfg.build_forcing(&grid)?;
    let f_norm = forcing.f.as_ref().map_or(0.0, |f| f.norms().l2);
    let g_sq_sum: f64 = noise
        .modes()
        .iter()
        .filter_map(|m| m.g.as_ref())
        .map(|g| g.norms().l2.powi(2))
        .sum();
    report.verdicts.push(energy_balance_verdict(
        cfg,
        &stats,
        f_norm,
        g_sq_sum,
        cfg.compare.energy_balance_rel_tol,
    ));
    if let Some(v) = tg_verdict(cfg, stats.mean_energy[0], stats.mean_energy[last]) {
        report.verdicts.push(v);
    }
    if let Some(v) = linear_additive_verdict(cfg, &grid, &noise, &stats) {
        report.verdicts.push(v);
    }

    if cfg.flags.write_snapshots {
        let dir = ctx.path("snapshots");
        fs::create_dir_all(&dir)?;
        let file = fs::File::create(dir.join("mean_final.snsf"))?;
        snsf::write_field_snapshot(file, &stats.mean_field[last])
            .map_err(CliError::from_solver)?;
    }

    report.write(&ctx.path("report.json"))?;
    Ok(report)
}

pub fn cmd_compare(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<RunReport, CliError> {
    ctx.prepare()?;
    let grid = cfg.build_grid()?;
    let noise = Arc::new(cfg.build_noise(&grid)?);
    let seed = effective_seed(cfg, ctx);
    let u0 = cfg.build_field(&grid, &cfg.forcing.u0, "u0")?;

    // Chaos side at the configured order.
    let system = cfg.build_propagator(&grid, Arc::clone(&noise), cfg.chaos.p)?;
    let (chaos_final, diags) = system
        .integrate(&system.initial_state(&u0), cfg.time.t_end)
        .map_err(CliError::from_solver)?;
    diag_csv(&diags, cfg.time.output_stride).write(&ctx.path("chaos_series.csv"))?;

    // Monte Carlo side.
    let mc = cfg.build_mc(&grid, Arc::clone(&noise), seed)?;
    let stats = mc.run_ensemble(&u0).map_err(CliError::from_solver)?;
    stats_csv(&stats).write(&ctx.path("mc_series.csv"))?;
    let last = stats.times.len() - 1;

    let mut report = RunReport::new(&cfg.canonical_json());
    report.series.push("chaos_series.csv".into());
    report.series.push("mc_series.csv".into());

    // (a) Mean-field agreement against the Monte Carlo standard error.
    let mean_dist = chaos_final.mean().sub(&stats.mean_field[last]).norms().l2;
    let mean_se = stats.mean_field_se_l2(last);
    let mean_scale = chaos_final.mean().norms().l2;
    let mean_bound = cfg.compare.mean_se_factor * mean_se + 1e-12 * mean_scale.max(1.0);
    report.verdicts.push(Verdict::new(
        "mean agreement",
        mean_dist <= mean_bound,
        format!(
            "|chaos mean - MC mean|_2 = {:.6e}, bound {:.6e} ({} SE of {:.6e})",
            mean_dist, mean_bound, cfg.compare.mean_se_factor, mean_se
        ),
    ));
    report.insert_summary("mean_distance_l2", json!(mean_dist));
    report.insert_summary("mean_se_l2", json!(mean_se));

    // (b) Second-moment agreement within SE plus a truncation margin.
    let chaos_sm = chaos_final.second_moment();
    let mc_sm = stats.mean_energy[last];
    let sm_se = stats.energy_se[last];
    let sm_bound = cfg.compare.second_moment_se_factor * sm_se
        + cfg.compare.second_moment_rel_margin * chaos_sm.abs()
        + 1e-12 * chaos_sm.abs().max(1.0);
    report.verdicts.push(Verdict::new(
        "second-moment agreement",
        (chaos_sm - mc_sm).abs() <= sm_bound,
        format!(
            "|chaos E|u|^2 - MC E|u|^2| = {:.6e} (chaos {}, MC {} +- {:.3e}), bound {:.6e}",
            (chaos_sm - mc_sm).abs(),
            format_float(chaos_sm),
            format_float(mc_sm),
            sm_se,
            sm_bound
        ),
    ));
    report.insert_summary("chaos_second_moment", json!(chaos_sm));
    report.insert_summary("mc_second_moment", json!(mc_sm));
    report.insert_summary("mc_second_moment_se", json!(sm_se));

    // (c) Pathwise study: reconstruction vs driven paths across orders.
    let basis = TimeBasis::new(cfg.time.t_end, cfg.chaos.n_t).map_err(CliError::from_solver)?;
    let refine = cfg.compare.pathwise_driven_refine;
    let driven_cfg = {
        let mut c = cfg.clone();
        c.time.dt = cfg.time.dt / refine as f64;
        c.time.output_stride = ((cfg.time.t_end / c.time.dt).round() as usize).max(1);
        c.mc.paths = 1;
        c.build_mc(&grid, Arc::clone(&noise), seed)?
    };

    let mut xi_rng = seeded_rng(seed ^ 0x517c_c1b7_2722_0a95);
    let xis: Vec<ChaosCoordinates> = (0..cfg.compare.pathwise_xi_count)
        .map(|_| ChaosCoordinates::sample(cfg.chaos.n_t, noise.n_w() as u32, &mut xi_rng))
        .collect();

    let mut driven_finals = Vec::with_capacity(xis.len());
    for xi in &xis {
        let basis_ref = basis.clone();
        let xi_ref = xi.clone();
        let traj = driven_cfg
            .simulate_driven(&u0, move |t| {
                path_from_chaos(&xi_ref, &basis_ref, t.min(basis_ref.horizon()))
                    .expect("inside horizon")
            })
            .map_err(CliError::from_solver)?;
        driven_finals.push(traj.final_field);
    }

    let mut pathwise = CsvTable::new(vec!["order_p", "xi_index", "rel_l2_error"]);
    let mut medians = Vec::new();
    for &p in &cfg.compare.pathwise_orders {
        let system_p = cfg.build_propagator(&grid, Arc::clone(&noise), p)?;
        let (state_p, _) = system_p
            .integrate(&system_p.initial_state(&u0), cfg.time.t_end)
            .map_err(CliError::from_solver)?;
        let mut errors = Vec::with_capacity(xis.len());
        for (idx, xi) in xis.iter().enumerate() {
            let recon = state_p.reconstruct(xi).map_err(CliError::from_solver)?;
            let denom = driven_finals[idx].norms().l2.max(1e-300);
            let err = recon.sub(&driven_finals[idx]).norms().l2 / denom;
            pathwise.push(vec![p as f64, idx as f64, err]);
            errors.push(err);
        }
        errors.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let median = if errors.len() % 2 == 1 {
            errors[errors.len() / 2]
        } else {
            0.5 * (errors[errors.len() / 2 - 1] + errors[errors.len() / 2])
        };
        medians.push((p, median));
    }
    pathwise.write(&ctx.path("pathwise.csv"))?;
    report.series.push("pathwise.csv".into());

    let strictly_decreasing = medians.windows(2).all(|w| w[1].1 < w[0].1);
    report.verdicts.push(Verdict::new(
        "pathwise refinement",
        strictly_decreasing,
        format!(
            "median relative L2 error by order: {}",
            medians
                .iter()
                .map(|(p, m)| format!("P{p}: {m:.6e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ));
    report.insert_summary(
        "pathwise_medians",
        json!(medians
            .iter()
            .map(|(p, m)| json!({"order": p, "median_rel_error": m}))
            .collect::<Vec<_>>()),
    );

    report.write(&ctx.path("report.json"))?;
    Ok(report)
}

pub fn cmd_spectrum(cfg: &ExperimentConfig, ctx: &RunContext) -> Result<RunReport, CliError> {
    ctx.prepare()?;
    let grid = cfg.build_grid()?;
    let noise = Arc::new(cfg.build_noise(&grid)?);

    let mut spectrum = CsvTable::new(vec!["m1", "m2", "abs_m", "trace_c_hat"]);
    if cfg.physics.c0 > 0.0 {
        for m in chaos_ns::noise::lattice_representatives(cfg.physics.k_noise) {
            let tensor =
                chaos_ns::noise::spectrum_tensor([m[0] as f64, m[1] as f64], cfg.physics.c0, cfg.physics.kappa)
                    .map_err(CliError::from_solver)?;
            let abs_m = ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt();
            spectrum.push(vec![
                m[0] as f64,
                m[1] as f64,
                abs_m,
                tensor[0][0] + tensor[1][1],
            ]);
        }
    }
    spectrum.write(&ctx.path("spectrum.csv"))?;

    let mut modes = CsvTable::new(vec!["channel", "m1", "m2", "phase_cos0_sin1", "amplitude"]);
    for (k, mode) in noise.modes().iter().enumerate() {
        if let (Some(m), Some(phase)) = (mode.wavevector, mode.phase) {
            modes.push(vec![
                k as f64,
                m[0] as f64,
                m[1] as f64,
                match phase {
                    chaos_ns::noise::Phase::Cos => 0.0,
                    chaos_ns::noise::Phase::Sin => 1.0,
                },
                mode.amplitude,
            ]);
        }
    }
    modes.write(&ctx.path("modes.csv"))?;

    let ito = noise.ito_correction();
    // Symmetric by construction; positive semidefinite iff trace and
    // determinant are nonnegative.
    let trace = ito[0][0] + ito[1][1];
    let det = ito[0][0] * ito[1][1] - ito[0][1] * ito[1][0];
    let symmetric = (ito[0][1] - ito[1][0]).abs() <= 1e-15 * trace.abs().max(1e-300);
    let psd = symmetric && trace >= -1e-15 && det >= -1e-15 * trace * trace;

    let transport_count = noise.modes().iter().filter(|m| m.sigma.is_some()).count();
    let expected = if cfg.physics.c0 > 0.0 {
        2 * chaos_ns::noise::lattice_representatives(cfg.physics.k_noise).len()
    } else {
        0
    };

    let mut report = RunReport::new(&cfg.canonical_json());
    report.series.push("spectrum.csv".into());
    report.series.push("modes.csv".into());
    report.insert_summary(
        "ito_correction",
        json!([[ito[0][0], ito[0][1]], [ito[1][0], ito[1][1]]]),
    );
    report.insert_summary(
        "covariance_at_zero",
        json!([
            [2.0 * ito[0][0], 2.0 * ito[0][1]],
            [2.0 * ito[1][0], 2.0 * ito[1][1]]
        ]),
    );
    report.insert_summary("transport_channels", json!(transport_count));
    report.insert_summary("total_channels", json!(noise.n_w()));
    report.insert_summary(
        "normalization",
        json!("amplitudes sqrt(eta tr C-hat(m)) with eta = 2: the sum over channels of sigma sigma^T equals the truncated-lattice sum of C-hat (continuum normalization would carry the lattice cell measure instead)"),
    );
    report.verdicts.push(Verdict::new(
        "correction symmetric positive semidefinite",
        psd,
        format!("trace {trace:.6e}, determinant {det:.6e}"),
    ));
    report.verdicts.push(Verdict::new(
        "mode count",
        transport_count == expected,
        format!("{transport_count} transport fields vs expected {expected}"),
    ));

    report.write(&ctx.path("report.json"))?;
    Ok(report)
}

/// SNSF round-trip helper for the file-format contract: read a snapshot and
/// write it back byte-identically.
pub fn copy_snapshot(input: &Path, output: &Path) -> Result<(), CliError> {
    let bytes = fs::read(input)?;
    let snap = snsf::read_snapshot(bytes.as_slice()).map_err(CliError::from_solver)?;
    let file = fs::File::create(output)?;
    snsf::write_snapshot(file, &snap).map_err(CliError::from_solver)?;
    Ok(())
}

/// Build the noise model for external callers (acceptance tests).
pub fn build_noise_for(cfg: &ExperimentConfig) -> Result<(chaos_ns::grid::Grid, NoiseModel), CliError> {
    let grid = cfg.build_grid()?;
    let noise = cfg.build_noise(&grid)?;
    Ok((grid, noise))
}

/// Per-mode forced-coefficient probe used by acceptance tests: run the
/// ensemble and return the per-path final coefficient at a wavevector.
pub fn mode_probe(
    cfg: &ExperimentConfig,
    ctx: &RunContext,
    k: [i64; 2],
) -> Result<Vec<[num_complex::Complex64; 2]>, CliError> {
    let grid = cfg.build_grid()?;
    let noise = Arc::new(cfg.build_noise(&grid)?);
    let mc = cfg.build_mc(&grid, Arc::clone(&noise), effective_seed(cfg, ctx))?;
    let u0 = cfg.build_field(&grid, &cfg.forcing.u0, "u0")?;
    let mut out = Vec::with_capacity(cfg.mc.paths);
    for path in 0..cfg.mc.paths {
        let traj = mc
            .simulate_path(&u0, path as u64)
            .map_err(CliError::from_solver)?;
        out.push([
            traj.final_field.coeff(k, 0),
            traj.final_field.coeff(k, 1),
        ]);
    }
    Ok(out)
}

/// Final chaos state for external callers (acceptance tests).
pub fn propagate_final(
    cfg: &ExperimentConfig,
    order: u32,
) -> Result<(chaos_ns::grid::Grid, Arc<NoiseModel>, chaos_ns::propagator::ChaosState), CliError> {
    let grid = cfg.build_grid()?;
    let noise = Arc::new(cfg.build_noise(&grid)?);
    let system = cfg.build_propagator(&grid, Arc::clone(&noise), order)?;
    let u0 = cfg.build_field(&grid, &cfg.forcing.u0, "u0")?;
    let (state, _) = system
        .integrate(&system.initial_state(&u0), cfg.time.t_end)
        .map_err(CliError::from_solver)?;
    Ok((grid, noise, state))
}
