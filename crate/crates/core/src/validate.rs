//! Named invariant checks spanning every module, run by the CLI `validate`
//! subcommand and by the mutation test that proves the suite can fail.

use std::sync::Arc;

use num::ToPrimitive;

use crate::coupling::{build_coupling_table, is_complete, phi};
use crate::error::Result;
use crate::field::{random_divfree_field, random_field, SpectralField};
use crate::grid::Grid;
use crate::kernels::Forcing;
use crate::mc::{McConfig, McParams};
use crate::multi_index::{enumerate_indices, MultiIndex};
use crate::noise::{path_from_chaos, ChaosCoordinates, NoiseModel, TimeBasis};
use crate::oracle::{pair_expectation, triple_expectation};
use crate::propagator::{
    PropagatorParams, PropagatorSystem, Scheme,
};
use crate::rng::seeded_rng;
use crate::ExecStrategy;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub elapsed_ms: u64,
}

impl CheckResult {
    fn bound(name: &str, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= tol,
            detail: format!("max deviation {value:.3e} (tolerance {tol:.1e})"),
            elapsed_ms: 0,
        }
    }

    fn flag(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
            elapsed_ms: 0,
        }
    }
}

/// Test-fixture fault injections: the suite must catch a deliberately
/// broken kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FaultInjection {
    #[default]
    None,
    /// Sign error in the Leray symbol: S becomes I + k k^T / |k|^2.
    LeraySignFlip,
}

fn leray_with_fault(v: &SpectralField, fault: FaultInjection) -> SpectralField {
    match fault {
        FaultInjection::None => v.leray_project(),
        FaultInjection::LeraySignFlip => v.add(&v.potential_project()),
    }
}

/// Run the whole suite; `fault` exists for the mutation test and must be
/// `None` in production use.
pub fn run_invariant_suite(fault: FaultInjection) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut timed = |f: &dyn Fn() -> Vec<CheckResult>| {
        let start = std::time::Instant::now();
        let mut results = f();
        let ms = start.elapsed().as_millis() as u64 / results.len().max(1) as u64;
        for r in &mut results {
            r.elapsed_ms = ms;
        }
        out.extend(results);
    };
    timed(&|| vec![wick_orthogonality()]);
    timed(&triple_product_identity);
    timed(&|| vec![phi_permutation_invariance()]);
    timed(&|| vec![decrement_identity()]);
    timed(&|| vec![enumeration_cardinality()]);
    timed(&|| vec![coupling_symmetry()]);
    timed(&|| vec![projection_idempotence(fault)]);
    timed(&|| vec![projection_complement()]);
    timed(&|| vec![projection_orthogonality()]);
    timed(&|| vec![divergence_free_projection()]);
    timed(&|| vec![convection_skew_symmetry()]);
    timed(&|| vec![ladyzhenskaya_bound()]);
    timed(&|| vec![parseval_consistency()]);
    timed(&|| vec![transform_roundtrip()]);
    timed(&|| vec![representation_symmetry()]);
    timed(&|| vec![time_basis_gram()]);
    timed(&|| vec![sigma_mode_suite()]);
    timed(&|| vec![path_covariance_refinement()]);
    timed(&propagator_suite);
    timed(&mc_suite);
    out
}

fn wick_orthogonality() -> CheckResult {
    let set = enumerate_indices(3, 2, 1).expect("small set");
    let mut worst = 0.0_f64;
    for a in set.indices() {
        for b in set.indices() {
            let fa = a.factorial().unwrap() as f64;
            let fb = b.factorial().unwrap() as f64;
            let want = if a == b { 1.0 } else { 0.0 };
            let got = pair_expectation(a, b) / (fa * fb).sqrt();
            worst = worst.max((got - want).abs());
        }
    }
    CheckResult::bound("wick orthogonality", worst, 1e-10)
}

fn triple_product_identity() -> Vec<CheckResult> {
    let set = enumerate_indices(3, 2, 1).expect("small set");
    let mut worst = 0.0_f64;
    let mut mismatches = 0usize;
    for a in set.indices() {
        for b in set.indices() {
            for c in set.indices() {
                let e = triple_expectation(a, b, c);
                let complete = is_complete(a, b, c);
                let want = if complete {
                    let w = phi(a, b, c).unwrap().to_f64().unwrap();
                    (a.factorial().unwrap() * b.factorial().unwrap() * c.factorial().unwrap())
                        as f64
                        * w
                } else {
                    0.0
                };
                worst = worst.max((e - want).abs());
                if complete != (e.abs() > 1e-7) {
                    mismatches += 1;
                }
            }
        }
    }
    vec![
        CheckResult::bound("triple product identity", worst, 1e-9),
        CheckResult::flag(
            "completeness matches oracle",
            mismatches == 0,
            format!("{mismatches} completeness/oracle disagreements"),
        ),
    ]
}

fn phi_permutation_invariance() -> CheckResult {
    let set = enumerate_indices(4, 1, 2).expect("small set");
    for a in set.indices() {
        for b in set.indices() {
            for c in set.indices() {
                if !is_complete(a, b, c) {
                    continue;
                }
                let base = phi(a, b, c).unwrap();
                let perms = [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)];
                for (x, y, z) in perms {
                    if phi(x, y, z).unwrap() != base {
                        return CheckResult::flag(
                            "phi permutation invariance",
                            false,
                            format!("permutation mismatch at {a:?} {b:?} {c:?}"),
                        );
                    }
                }
            }
        }
    }
    CheckResult::flag(
        "phi permutation invariance",
        true,
        "exact rational equality over all 6 permutations".into(),
    )
}

fn decrement_identity() -> CheckResult {
    let alpha = MultiIndex::from_entries([((1, 1), 3), ((2, 2), 2), ((1, 3), 1)]);
    let mut cur = alpha.clone();
    for _ in 0..3 {
        cur = cur.decrement(1, 1);
    }
    let ok = cur.get(1, 1) == 0
        && cur.get(2, 2) == 2
        && cur.get(1, 3) == 1
        && cur.decrement(1, 1) == cur;
    CheckResult::flag(
        "decrement identity",
        ok,
        "repeated decrement empties its slot and leaves others".into(),
    )
}

fn enumeration_cardinality() -> CheckResult {
    let binom = |n: u64, k: u64| -> u64 {
        let k = k.min(n - k);
        (0..k).fold(1u64, |acc, j| acc * (n - j) / (j + 1))
    };
    for (p, nt, nw) in [(3u32, 2u32, 2u32), (4, 1, 3), (2, 3, 3)] {
        let set = enumerate_indices(p, nt, nw).expect("small set");
        if set.len() as u64 != binom((nt * nw + p) as u64, p as u64) {
            return CheckResult::flag(
                "enumeration cardinality",
                false,
                format!("wrong count for P={p} nt={nt} nw={nw}"),
            );
        }
    }
    CheckResult::flag(
        "enumeration cardinality",
        true,
        "counts match C(n_t n_w + P, P)".into(),
    )
}

fn coupling_symmetry() -> CheckResult {
    let set = enumerate_indices(3, 1, 2).expect("small set");
    let table = build_coupling_table(&set);
    for apos in 0..set.len() {
        let row = table.row(apos);
        for e in row {
            let ok = row
                .iter()
                .any(|m| m.beta == e.gamma && m.gamma == e.beta && m.weight == e.weight);
            if !ok {
                return CheckResult::flag(
                    "coupling table symmetry",
                    false,
                    format!("missing mirror of ({}, {})", e.beta, e.gamma),
                );
            }
        }
    }
    CheckResult::flag(
        "coupling table symmetry",
        true,
        "every (beta, gamma, w) has its (gamma, beta, w) mirror".into(),
    )
}

fn projection_fixtures(n: usize) -> (Grid, Vec<SpectralField>) {
    let grid = Grid::new(n).expect("grid");
    let fields = (0..24)
        .map(|s| random_field(&grid, 1.0 + 0.1 * (s % 5) as f64, 1000 + s))
        .collect();
    (grid, fields)
}

fn projection_idempotence(fault: FaultInjection) -> CheckResult {
    let (_, fields) = projection_fixtures(32);
    let mut worst = 0.0_f64;
    for v in &fields {
        let s = leray_with_fault(v, fault);
        let ss = leray_with_fault(&s, fault);
        let g = v.potential_project();
        let gg = g.potential_project();
        let scale = v.max_abs_coeff().max(1e-300);
        worst = worst.max(ss.sub(&s).max_abs_coeff() / scale);
        worst = worst.max(gg.sub(&g).max_abs_coeff() / scale);
    }
    CheckResult::bound("projection idempotence", worst, 1e-12)
}

fn projection_complement() -> CheckResult {
    let (_, fields) = projection_fixtures(32);
    let mut worst = 0.0_f64;
    for v in &fields {
        let back = v.leray_project().add(&v.potential_project());
        worst = worst.max(back.sub(v).max_abs_coeff() / v.max_abs_coeff().max(1e-300));
    }
    CheckResult::bound("projection complement", worst, 1e-12)
}

fn projection_orthogonality() -> CheckResult {
    let (_, fields) = projection_fixtures(32);
    let mut worst = 0.0_f64;
    for pair in fields.chunks(2) {
        if pair.len() < 2 {
            break;
        }
        let (f, g) = (&pair[0], &pair[1]);
        let inner = f.potential_project().inner(&g.leray_project()).abs();
        let scale = f.norms().l2 * g.norms().l2;
        worst = worst.max(inner / scale.max(1e-300));
    }
    CheckResult::bound("projection orthogonality", worst, 1e-12)
}

fn divergence_free_projection() -> CheckResult {
    let (_, fields) = projection_fixtures(32);
    let mut worst = 0.0_f64;
    for v in &fields {
        let s = v.leray_project();
        worst = worst.max(s.divergence_deviation() / v.max_abs_coeff().max(1e-300));
    }
    CheckResult::bound("divergence-free projection", worst, 1e-10)
}

fn convection_skew_symmetry() -> CheckResult {
    let grid = Grid::new(32).expect("grid");
    let mut worst = 0.0_f64;
    for s in 0..12 {
        let u = random_divfree_field(&grid, 1.5, 2000 + s);
        let v = random_divfree_field(&grid, 1.5, 3000 + s);
        let conv = u.convect(&v).expect("u is divergence-free");
        let scale = u.norms().l2 * v.norms().h1_seminorm.powi(2);
        worst = worst.max(conv.inner(&v).abs() / scale.max(1e-300));
    }
    CheckResult::bound("convection skew-symmetry", worst, 1e-11)
}

fn ladyzhenskaya_bound() -> CheckResult {
    let grid = Grid::new(32).expect("grid");
    let mut worst_ratio = 0.0_f64;
    for s in 0..200 {
        let v = random_divfree_field(&grid, 1.0 + 0.25 * (s % 4) as f64, 4000 + s);
        let n = v.norms();
        let rhs = 2.0_f64.powf(0.25) * n.l2.sqrt() * n.h1_seminorm.sqrt();
        worst_ratio = worst_ratio.max(n.l4 / rhs);
    }
    CheckResult::flag(
        "ladyzhenskaya inequality",
        worst_ratio <= 1.0 + 1e-10,
        format!("worst |v|_4 / (2^(1/4) |v|_2^(1/2) |grad v|_2^(1/2)) = {worst_ratio:.6}"),
    )
}

fn parseval_consistency() -> CheckResult {
    let grid = Grid::new(32).expect("grid");
    let mut worst = 0.0_f64;
    for s in 0..8 {
        let v = random_field(&grid, 1.2, 5000 + s);
        let samples = v.to_grid();
        let n = grid.n();
        let cell = (grid.length() / n as f64).powi(2);
        let quad: f64 = samples
            .iter()
            .map(|c| c.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            * cell;
        let back = SpectralField::from_grid(&grid, &samples).expect("shape");
        worst = worst.max((back.norms().l2 - quad.sqrt()).abs() / quad.sqrt());
    }
    CheckResult::bound("parseval consistency", worst, 1e-12)
}

fn transform_roundtrip() -> CheckResult {
    let grid = Grid::new(32).expect("grid");
    let mut worst = 0.0_f64;
    for s in 0..8 {
        let v = random_field(&grid, 1.0, 6000 + s);
        let back = SpectralField::from_grid(&grid, &v.to_grid()).expect("shape");
        worst = worst.max(back.sub(&v).max_abs_coeff() / v.max_abs_coeff().max(1e-300));
    }
    CheckResult::bound("transform roundtrip", worst, 1e-12)
}

/// The solver pipeline must preserve hermitian symmetry and the
/// divergence-free constraint through a realistic operation chain.
fn representation_symmetry() -> CheckResult {
    let grid = Grid::new(32).expect("grid");
    let mut worst = 0.0_f64;
    for s in 0..6 {
        let u = random_divfree_field(&grid, 1.5, 7000 + s);
        let v = random_divfree_field(&grid, 1.5, 7100 + s);
        let chain = u
            .convect(&v)
            .expect("divergence-free")
            .add(&v.partial(0).leray_project())
            .mollify(grid.dealias_cutoff())
            .leray_project();
        let scale = chain.max_abs_coeff().max(1e-300);
        worst = worst.max(chain.hermitian_deviation() / scale);
        worst = worst.max(chain.divergence_deviation() / (scale * grid.n() as f64));
    }
    CheckResult::bound("representation symmetry", worst, 1e-12)
}

fn time_basis_gram() -> CheckResult {
    let basis = TimeBasis::new(0.8, 8).expect("basis");
    let gram = basis.gram_matrix();
    let mut worst = 0.0_f64;
    for a in 0..8 {
        for b in 0..8 {
            let want = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((gram[[a, b]] - want).abs());
        }
    }
    CheckResult::bound("time basis gram identity", worst, 1e-12)
}

fn sigma_mode_suite() -> CheckResult {
    let grid = Grid::new(32).expect("grid");
    let model = NoiseModel::kraichnan(&grid, 1.0, 1.0, 2).expect("model");
    let band = grid.dealias_cutoff() as i64;
    let mut detail = Vec::new();
    let mut pass = true;

    for mode in model.modes() {
        let sigma = mode.sigma.as_ref().unwrap();
        if sigma.divergence_deviation() > 1e-12 {
            pass = false;
            detail.push("divergence".to_string());
        }
        let m = mode.wavevector.unwrap();
        if m[0].abs() > band || m[1].abs() > band {
            pass = false;
            detail.push("band".to_string());
        }
    }
    let outer = model.sigma_outer_on_grid();
    let ito = model.ito_correction();
    for (slot, want) in [(0, ito[0][0]), (1, ito[0][1]), (2, ito[1][1])] {
        let mean = outer[slot].iter().sum::<f64>() / outer[slot].len() as f64;
        let dev = outer[slot]
            .iter()
            .map(|v| (v - mean).abs())
            .fold(0.0_f64, f64::max);
        if dev > 1e-10 || (0.5 * mean - want).abs() > 1e-10 {
            pass = false;
            detail.push("homogeneity".to_string());
        }
    }
    if ito[0][1].abs() > 1e-10 || (ito[0][0] - ito[1][1]).abs() > 1e-10 {
        pass = false;
        detail.push("isotropy".to_string());
    }
    CheckResult::flag(
        "kraichnan mode suite",
        pass,
        if detail.is_empty() {
            "divergence-free, band-limited, homogeneous, isotropic".into()
        } else {
            format!("failed: {}", detail.join(", "))
        },
    )
}

fn path_covariance_refinement() -> CheckResult {
    let times: Vec<f64> = (1..8).map(|j| j as f64 / 8.0).collect();
    let mut errs = Vec::new();
    for n_t in [1u32, 4, 16] {
        let basis = TimeBasis::new(1.0, n_t).expect("basis");
        let mut worst = 0.0_f64;
        for &s in &times {
            for &t in &times {
                let cov: f64 = (1..=n_t)
                    .map(|i| basis.antiderivative(i, s) * basis.antiderivative(i, t))
                    .sum();
                worst = worst.max((cov - s.min(t)).abs());
            }
        }
        errs.push(worst);
    }
    CheckResult::flag(
        "path covariance refinement",
        errs[0] > errs[1] && errs[1] > errs[2],
        format!("covariance error vs min(s,t): {errs:?}"),
    )
}

use crate::field::taylor_green;

fn propagator_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.push(linear_superposition());
    out.extend(deterministic_consistency_and_divergence());
    out.push(variance_nonnegativity());
    out.push(chaos_energy_dissipation());
    out.push(truncation_monotonicity());
    out
}

fn linear_superposition() -> CheckResult {
    let grid = Grid::new(16).expect("grid");
    let basis = TimeBasis::new(0.05, 2).expect("basis");
    let params = PropagatorParams {
        nu: 0.15,
        dt: 1e-3,
        max_order: 2,
        convection: false,
        ..Default::default()
    };

    // The system is linear in the inputs (u0, f, g) jointly once convection
    // is off, so all three must be scaled together.
    let run = |u0: &SpectralField, scale: f64| {
        let mut noise = NoiseModel::kraichnan(&grid, 0.05, 1.0, 1).expect("noise");
        let mut g1 = SpectralField::zero(&grid);
        g1.add_real_mode(
            [2, 1],
            [
                num_complex::Complex64::new(0.0, 0.3 * scale),
                num_complex::Complex64::new(0.1 * scale, 0.0),
            ],
        );
        noise.push_additive_mode(g1.leray_project());
        let mut f = SpectralField::zero(&grid);
        f.add_real_mode(
            [1, 2],
            [
                num_complex::Complex64::new(0.2 * scale, 0.0),
                num_complex::Complex64::new(0.0, -0.1 * scale),
            ],
        );
        let system = PropagatorSystem::new(
            &grid,
            Arc::new(noise),
            basis.clone(),
            Forcing {
                f: Some(f.leray_project()),
                flux: None,
            },
            params.clone(),
        )
        .expect("system");
        let state = system.initial_state(u0);
        system.integrate(&state, 0.02).expect("integrate").0
    };

    let ua = random_divfree_field(&grid, 2.0, 71);
    let ub = random_divfree_field(&grid, 2.0, 72);
    let sum_inputs = run(&ua.add(&ub), 2.0);
    let a = run(&ua, 1.0);
    let b = run(&ub, 1.0);
    let homog = run(&ua.scaled(3.0), 3.0);

    let mut worst = 0.0_f64;
    for pos in 0..sum_inputs.coeffs().len() {
        let direct = &sum_inputs.coeffs()[pos];
        let summed = a.coeffs()[pos].add(&b.coeffs()[pos]);
        let scale = direct.max_abs_coeff().max(1e-12);
        worst = worst.max(direct.sub(&summed).max_abs_coeff() / scale);
        let tripled = a.coeffs()[pos].scaled(3.0);
        let hscale = homog.coeffs()[pos].max_abs_coeff().max(1e-12);
        worst = worst.max(homog.coeffs()[pos].sub(&tripled).max_abs_coeff() / hscale);
    }
    CheckResult::bound("propagator linearity without convection", worst, 1e-12)
}

fn deterministic_consistency_and_divergence() -> Vec<CheckResult> {
    let grid = Grid::new(16).expect("grid");
    let u0 = taylor_green(&grid);
    let noise = Arc::new(NoiseModel::empty(&grid));
    let basis = TimeBasis::new(0.05, 1).expect("basis");
    let params = PropagatorParams {
        nu: 0.1,
        dt: 1e-3,
        max_order: 0,
        scheme: Scheme::Euler,
        ..Default::default()
    };
    let system = PropagatorSystem::new(
        &grid,
        Arc::clone(&noise),
        basis,
        Forcing::default(),
        params,
    )
    .expect("system");
    let (chaos_final, diags) = system
        .integrate(&system.initial_state(&u0), 0.02)
        .expect("integrate");

    let mc = McConfig::new(
        &grid,
        noise,
        Forcing::default(),
        McParams {
            nu: 0.1,
            dt: 1e-3,
            t_end: 0.02,
            paths: 1,
            output_stride: 1,
            ..Default::default()
        },
    )
    .expect("mc");
    let traj = mc.simulate_path(&u0, 0).expect("path");

    let mut bitwise = true;
    let a = chaos_final.mean();
    let b = &traj.final_field;
    for l in 0..2 {
        for (x, y) in a.component(l).iter().zip(b.component(l).iter()) {
            if x.re.to_bits() != y.re.to_bits() || x.im.to_bits() != y.im.to_bits() {
                bitwise = false;
            }
        }
    }
    let max_div = diags
        .iter()
        .map(|d| d.max_divergence)
        .fold(0.0_f64, f64::max);
    vec![
        CheckResult::flag(
            "deterministic solver consistency",
            bitwise,
            "order-0 propagator vs zero-noise path solver, bit-for-bit".into(),
        ),
        CheckResult::bound("divergence-free preservation", max_div, 1e-10),
    ]
}

fn variance_nonnegativity() -> CheckResult {
    let grid = Grid::new(16).expect("grid");
    let noise = Arc::new(NoiseModel::kraichnan(&grid, 0.2, 1.0, 1).expect("noise"));
    let basis = TimeBasis::new(0.05, 2).expect("basis");
    let system = PropagatorSystem::new(
        &grid,
        noise,
        basis,
        Forcing::default(),
        PropagatorParams {
            nu: 0.1,
            dt: 1e-3,
            max_order: 2,
            ..Default::default()
        },
    )
    .expect("system");
    let state = system.initial_state(&taylor_green(&grid));
    let (state, _) = system.integrate(&state, 0.05).expect("integrate");
    let gap = state.second_moment() - state.mean().energy();
    CheckResult::flag(
        "variance nonnegativity",
        gap >= -1e-12,
        format!("second moment minus mean energy = {gap:.3e}"),
    )
}

fn chaos_energy_dissipation() -> CheckResult {
    let grid = Grid::new(16).expect("grid");
    let noise = Arc::new(NoiseModel::kraichnan(&grid, 1e-3, 1.0, 1).expect("noise"));
    let basis = TimeBasis::new(0.03, 2).expect("basis");
    let system = PropagatorSystem::new(
        &grid,
        noise,
        basis,
        Forcing::default(),
        PropagatorParams {
            nu: 0.2,
            dt: 1e-3,
            max_order: 2,
            ..Default::default()
        },
    )
    .expect("system");
    let state = system.initial_state(&taylor_green(&grid));
    let (_, diags) = system.integrate(&state, 0.03).expect("integrate");
    let e0 = diags[0].chaos_energy;
    let mut worst = f64::MIN;
    for w in diags.windows(2) {
        worst = worst.max(w[1].chaos_energy - w[0].chaos_energy);
    }
    CheckResult::flag(
        "chaos energy dissipation",
        worst <= 1e-8 * e0.max(1.0),
        format!("largest per-step chaos-energy increase {worst:.3e}"),
    )
}

fn truncation_monotonicity() -> CheckResult {
    let grid = Grid::new(16).expect("grid");
    let full = NoiseModel::kraichnan(&grid, 0.5, 1.0, 1).expect("noise");
    let noise = Arc::new(full.truncated(2));
    let horizon = 0.03;
    let basis = TimeBasis::new(horizon, 2).expect("basis");
    let u0 = taylor_green(&grid);

    let mut rng = seeded_rng(11);
    let xi = ChaosCoordinates::sample(2, noise.n_w() as u32, &mut rng);

    // The driven reference runs at a much finer step so that the
    // order-truncation differences dominate the discretization floor.
    let mc = McConfig::new(
        &grid,
        Arc::clone(&noise),
        Forcing::default(),
        McParams {
            nu: 0.1,
            dt: 5e-5,
            t_end: horizon,
            paths: 1,
            output_stride: 600,
            ..Default::default()
        },
    )
    .expect("mc");
    let basis_for_path = basis.clone();
    let xi_path = xi.clone();
    let driven = mc
        .simulate_driven(&u0, move |t| {
            path_from_chaos(&xi_path, &basis_for_path, t).expect("in range")
        })
        .expect("driven");

    let mut errs = Vec::new();
    for p in [1u32, 2, 3] {
        let system = PropagatorSystem::new(
            &grid,
            Arc::clone(&noise),
            basis.clone(),
            Forcing::default(),
            PropagatorParams {
                nu: 0.1,
                dt: 5e-4,
                max_order: p,
                ..Default::default()
            },
        )
        .expect("system");
        let (state, _) = system
            .integrate(&system.initial_state(&u0), horizon)
            .expect("integrate");
        let recon = state.reconstruct(&xi).expect("coordinates cover set");
        let err = recon.sub(&driven.final_field).norms().l2 / driven.final_field.norms().l2;
        errs.push(err);
    }
    CheckResult::flag(
        "truncation refinement",
        errs[0] > errs[1] && errs[1] > errs[2],
        format!("pathwise errors vs order: {errs:?}"),
    )
}

fn mc_suite() -> Vec<CheckResult> {
    vec![
        mollifier_consistency(),
        ensemble_determinism(),
        pathwise_energy_monotone(),
        weak_convergence_sanity(),
    ]
}

fn mollifier_consistency() -> CheckResult {
    let grid = Grid::new(32).expect("grid");
    let noise = Arc::new(NoiseModel::empty(&grid));
    let u0 = random_divfree_field(&grid, 2.0, 91);
    let build = |cutoff: Option<usize>| {
        McConfig::new(
            &grid,
            Arc::clone(&noise),
            Forcing::default(),
            McParams {
                nu: 0.1,
                dt: 1e-3,
                t_end: 5e-3,
                paths: 1,
                output_stride: 5,
                mollifier_cutoff: cutoff,
                ..Default::default()
            },
        )
        .expect("mc")
    };
    let base = build(None).simulate_path(&u0, 0).expect("path");
    let wide = build(Some(grid.n())).simulate_path(&u0, 0).expect("path");
    let mut bitwise = true;
    for l in 0..2 {
        for (x, y) in base
            .final_field
            .component(l)
            .iter()
            .zip(wide.final_field.component(l).iter())
        {
            if x.re.to_bits() != y.re.to_bits() || x.im.to_bits() != y.im.to_bits() {
                bitwise = false;
            }
        }
    }

    // Energy neutrality of the mollified convection at every cutoff.
    let mut worst = 0.0_f64;
    for cutoff in 0..=grid.dealias_cutoff() {
        let conv = u0
            .mollify(cutoff)
            .convect(&u0)
            .expect("mollified field stays divergence-free");
        let scale = (u0.norms().l2 * u0.norms().h1_seminorm.powi(2)).max(1e-300);
        worst = worst.max(conv.inner(&u0).abs() / scale);
    }
    let pass = bitwise && worst <= 1e-11;
    CheckResult::flag(
        "mollifier consistency",
        pass,
        format!("wide cutoff bitwise: {bitwise}; worst energy-neutrality deviation {worst:.3e}"),
    )
}

fn ensemble_determinism() -> CheckResult {
    let grid = Grid::new(16).expect("grid");
    let noise = Arc::new(NoiseModel::kraichnan(&grid, 0.05, 1.0, 1).expect("noise"));
    let u0 = taylor_green(&grid);
    let mc = McConfig::new(
        &grid,
        noise,
        Forcing::default(),
        McParams {
            nu: 0.1,
            dt: 1e-3,
            t_end: 0.01,
            paths: 24,
            output_stride: 10,
            ..Default::default()
        },
    )
    .expect("mc");
    let seq = mc
        .run_ensemble_with(&u0, ExecStrategy::Sequential)
        .expect("seq");
    let default = mc.run_ensemble(&u0).expect("default");
    let mut bitwise = true;
    for (a, b) in seq.mean_field.iter().zip(&default.mean_field) {
        for l in 0..2 {
            for (x, y) in a.component(l).iter().zip(b.component(l).iter()) {
                if x.re.to_bits() != y.re.to_bits() || x.im.to_bits() != y.im.to_bits() {
                    bitwise = false;
                }
            }
        }
    }
    for (x, y) in seq.mean_energy.iter().zip(&default.mean_energy) {
        if x.to_bits() != y.to_bits() {
            bitwise = false;
        }
    }
    CheckResult::flag(
        "ensemble determinism",
        bitwise,
        "sequential and default execution agree bit-for-bit".into(),
    )
}

fn pathwise_energy_monotone() -> CheckResult {
    let grid = Grid::new(16).expect("grid");
    let noise = Arc::new(NoiseModel::kraichnan(&grid, 1e-3, 1.0, 1).expect("noise"));
    let u0 = taylor_green(&grid);
    let mc = McConfig::new(
        &grid,
        noise,
        Forcing::default(),
        McParams {
            nu: 0.2,
            dt: 1e-3,
            t_end: 0.05,
            paths: 1,
            output_stride: 1,
            ..Default::default()
        },
    )
    .expect("mc");
    let mut worst = f64::MIN;
    for path in 0..5u64 {
        let traj = mc.simulate_path(&u0, path).expect("path");
        for w in traj.energy.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    CheckResult::flag(
        "pathwise energy monotonicity",
        worst <= 1e-8,
        format!("largest per-step energy increase {worst:.3e}"),
    )
}

fn weak_convergence_sanity() -> CheckResult {
    let grid = Grid::new(16).expect("grid");
    let mut noise = NoiseModel::kraichnan(&grid, 1e-3, 1.0, 1).expect("noise");
    let mut g = SpectralField::zero(&grid);
    g.add_real_mode(
        [1, 0],
        [
            num_complex::Complex64::default(),
            num_complex::Complex64::new(0.0, -0.05),
        ],
    );
    noise.push_additive_mode(g.leray_project());
    let noise = Arc::new(noise);
    let u0 = taylor_green(&grid);
    let horizon = 0.05;
    let run = |dt: f64| {
        let mc = McConfig::new(
            &grid,
            Arc::clone(&noise),
            Forcing::default(),
            McParams {
                nu: 0.1,
                dt,
                t_end: horizon,
                paths: 400,
                output_stride: (horizon / dt).round() as usize,
                ..Default::default()
            },
        )
        .expect("mc");
        let stats = mc.run_ensemble(&u0).expect("ensemble");
        let last = stats.times.len() - 1;
        (stats.mean_energy[last], stats.energy_se[last])
    };
    let (e1, se1) = run(1e-3);
    let (e2, se2) = run(5e-4);
    let diff = (e1 - e2).abs();
    let se = (se1 * se1 + se2 * se2).sqrt();
    CheckResult::flag(
        "weak convergence sanity",
        diff < se.max(1e-12),
        format!("halving dt moved E|u|^2 by {diff:.3e}, standard error {se:.3e}"),
    )
}

/// Convenience for tests: the first failing check, if any.
pub fn first_failure(results: &[CheckResult]) -> Option<&CheckResult> {
    results.iter().find(|r| !r.pass)
}

/// Run everything and return an error message when something fails.
pub fn run_all() -> Result<Vec<CheckResult>> {
    Ok(run_invariant_suite(FaultInjection::None))
}
