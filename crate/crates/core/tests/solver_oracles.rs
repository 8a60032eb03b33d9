//! Solver-level oracles: closed-form heat decay, the Taylor-Green solution,
//! the assembled right-hand side against manual assembly, chaos moments,
//! reconstruction, the nonlinear chaos product against Monte Carlo, and
//! pressure-gradient recovery.

use std::sync::Arc;

use approx::{assert_abs_diff_eq, assert_relative_eq};
use chaos_ns::field::{random_divfree_field, taylor_green, SpectralField};
use chaos_ns::grid::Grid;
use chaos_ns::hermite::wick_eval;
use chaos_ns::kernels::{Forcing, HFields};
use chaos_ns::mc::{McConfig, McParams, UDependentForcing};
use chaos_ns::multi_index::MultiIndex;
use chaos_ns::noise::{ChaosCoordinates, NoiseModel, TimeBasis};
use chaos_ns::propagator::{
    recover_pressure_gradients, GCouplingVariant, PressureContext, PropagatorParams,
    PropagatorSystem, Scheme,
};
use chaos_ns::rng::{seeded_rng, standard_normal};
use num_complex::Complex64;

fn tg_system(grid: &Grid, nu: f64, dt: f64, scheme: Scheme) -> PropagatorSystem {
    PropagatorSystem::new(
        grid,
        Arc::new(NoiseModel::empty(grid)),
        TimeBasis::new(1.0, 1).unwrap(),
        Forcing::default(),
        PropagatorParams {
            nu,
            dt,
            max_order: 0,
            scheme,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn pure_diffusion_single_mode_decays_exactly() {
    let grid = Grid::new(16).unwrap();
    let nu = 0.37_f64;
    let dt = 2e-3_f64;
    let mut f = SpectralField::zero(&grid);
    f.add_real_mode([2, 1], [Complex64::new(0.0, -0.4), Complex64::new(0.8, 0.0)]);
    let f = f.leray_project();
    let factor = (-nu * 5.0 * dt).exp();
    // A single +/-k divergence-free pair self-advects to zero pointwise, so
    // the decay matches the closed form with or without convection.
    for scheme in [Scheme::SspRk2, Scheme::Euler] {
        let system = tg_system(&grid, nu, dt, scheme);
        let state = system.initial_state(&f);
        let (next, _) = system.integrate(&state, dt).unwrap();
        for l in 0..2 {
            let got = next.mean().coeff([2, 1], l);
            let want = f.coeff([2, 1], l) * factor;
            assert_abs_diff_eq!(got.re, want.re, epsilon = 1e-15);
            assert_abs_diff_eq!(got.im, want.im, epsilon = 1e-15);
        }
    }
}

#[test]
fn taylor_green_energy_decay_both_solvers() {
    let grid = Grid::new(32).unwrap();
    let nu = 0.1_f64;
    let dt = 1e-3_f64;
    let t_end = 0.1_f64;
    let u0 = taylor_green(&grid);
    let e0 = u0.energy();
    let decay = (-4.0 * nu * t_end).exp();

    let system = tg_system(&grid, nu, dt, Scheme::SspRk2);
    let (state, _) = system.integrate(&system.initial_state(&u0), t_end).unwrap();
    assert_relative_eq!(state.mean().energy(), e0 * decay, max_relative = 1e-9);

    let mc = McConfig::new(
        &grid,
        Arc::new(NoiseModel::empty(&grid)),
        Forcing::default(),
        McParams {
            nu,
            dt,
            t_end,
            paths: 1,
            output_stride: 100,
            ..Default::default()
        },
    )
    .unwrap();
    let traj = mc.simulate_path(&u0, 0).unwrap();
    assert_relative_eq!(
        *traj.energy.last().unwrap(),
        e0 * decay,
        max_relative = 1e-9
    );
}

#[test]
fn rhs_reduces_to_deterministic_navier_stokes() {
    let grid = Grid::new(32).unwrap();
    let nu = 0.2;
    let mut f_force = SpectralField::zero(&grid);
    f_force.add_real_mode([3, 1], [Complex64::new(0.1, 0.2), Complex64::new(0.0, -0.3)]);
    let f_force = f_force.leray_project();
    let system = PropagatorSystem::new(
        &grid,
        Arc::new(NoiseModel::empty(&grid)),
        TimeBasis::new(1.0, 1).unwrap(),
        Forcing {
            f: Some(f_force.clone()),
            flux: None,
        },
        PropagatorParams {
            nu,
            dt: 1e-3,
            max_order: 0,
            ..Default::default()
        },
    )
    .unwrap();
    let u0 = random_divfree_field(&grid, 2.5, 17);
    let state = system.initial_state(&u0);
    let rhs = system.rhs(&state, 0.0).unwrap();

    // Manual S[nu Lap u - (u.grad)u + f].
    let mut manual = u0.scaled(0.0);
    let lap = {
        let mut lap = u0.partial(0).partial(0);
        lap.add_scaled(&u0.partial(1).partial(1), 1.0);
        lap
    };
    manual.add_scaled(&lap, nu);
    manual.add_scaled(&u0.convect(&u0).unwrap(), -1.0);
    manual.add_scaled(&f_force, 1.0);
    let manual = manual.leray_project();

    let scale = manual.max_abs_coeff();
    assert!(
        rhs[0].sub(&manual).max_abs_coeff() <= 1e-11 * scale,
        "deviation {} vs scale {}",
        rhs[0].sub(&manual).max_abs_coeff(),
        scale
    );
}

#[test]
fn rhs_first_order_coefficients_are_forced_by_the_mean() {
    // Convection off, one transport mode and one additive mode: for
    // alpha = e(j,k) the right-hand side is
    // S[nu Lap u_alpha + m_j(t) ((sigma_k . grad) u_0 + g_k)].
    let grid = Grid::new(16).unwrap();
    let nu = 0.15;
    let mut noise = NoiseModel::kraichnan(&grid, 0.3, 1.0, 1).unwrap().truncated(2);
    let mut g = SpectralField::zero(&grid);
    g.add_real_mode([1, 2], [Complex64::new(0.0, 0.2), Complex64::new(0.1, 0.0)]);
    let g = g.leray_project();
    noise.push_additive_mode(g.clone());
    let noise = Arc::new(noise);
    let basis = TimeBasis::new(0.4, 2).unwrap();
    let system = PropagatorSystem::new(
        &grid,
        Arc::clone(&noise),
        basis.clone(),
        Forcing::default(),
        PropagatorParams {
            nu,
            dt: 1e-3,
            max_order: 1,
            convection: false,
            ..Default::default()
        },
    )
    .unwrap();
    let u0 = random_divfree_field(&grid, 2.0, 23);
    let state = system.initial_state(&u0);
    let t = 0.13;
    let rhs = system.rhs(&state, t).unwrap();

    let set = system.index_set();
    for (j, k, sigma_or_g) in [(1u32, 1u32, true), (2, 1, true), (1, 3, false), (2, 3, false)] {
        let alpha = MultiIndex::unit(j, k);
        let pos = set.position(&alpha).unwrap();
        let mut manual = SpectralField::zero(&grid);
        // nu Lap u_alpha vanishes: u_alpha = 0 initially.
        if sigma_or_g {
            let sigma = noise.modes()[(k - 1) as usize].sigma.as_ref().unwrap();
            manual.add_scaled(&sigma.convect(&state.mean()).unwrap(), basis.eval(j, t));
        } else {
            manual.add_scaled(&g.leray_project(), basis.eval(j, t));
        }
        let manual = manual.leray_project();
        let dev = rhs[pos].sub(&manual).max_abs_coeff();
        assert!(
            dev <= 1e-12 * manual.max_abs_coeff().max(1e-12),
            "slot ({j},{k}): deviation {dev}"
        );
    }
}

#[test]
fn nonlinear_chaos_product_matches_monte_carlo() {
    // The coupling-table evaluation of the quadratic term projected on
    // zeta_alpha must agree with a direct Monte Carlo average of
    // (u(xi) . grad) u(xi) zeta_alpha(xi) over standard normal xi.
    let grid = Grid::new(16).unwrap();
    let noise = Arc::new(NoiseModel::kraichnan(&grid, 0.2, 1.0, 1).unwrap().truncated(2));
    let basis = TimeBasis::new(1.0, 1).unwrap();
    let system = PropagatorSystem::new(
        &grid,
        Arc::clone(&noise),
        basis,
        Forcing::default(),
        PropagatorParams {
            nu: 0.1,
            dt: 1e-3,
            max_order: 2,
            ..Default::default()
        },
    )
    .unwrap();

    // A state with nontrivial coefficients at every order.
    let mut state = system.initial_state(&taylor_green(&grid));
    let n_coeffs = state.coeffs().len();
    let coeffs: Vec<SpectralField> = (0..n_coeffs)
        .map(|s| random_divfree_field(&grid, 2.5, 300 + s as u64).scaled(0.4))
        .collect();
    for (pos, c) in coeffs.iter().enumerate() {
        state.coeffs_mut()[pos] = c.clone();
    }

    // Table route: convection-only part of the right-hand side.
    let with_conv = system.rhs_explicit(&state, 0.0).unwrap().0;
    let system_off = PropagatorSystem::new(
        &grid,
        Arc::clone(&noise),
        TimeBasis::new(1.0, 1).unwrap(),
        Forcing::default(),
        PropagatorParams {
            nu: 0.1,
            dt: 1e-3,
            max_order: 2,
            convection: false,
            ..Default::default()
        },
    )
    .unwrap();
    let without_conv = system_off.rhs_explicit(&state, 0.0).unwrap().0;

    // Monte Carlo route over xi.
    let set = system.index_set();
    let n_w = noise.n_w() as u32;
    let mut rng = seeded_rng(77);
    let samples = 4000;
    let mut mc_acc: Vec<SpectralField> =
        (0..n_coeffs).map(|_| SpectralField::zero(&grid)).collect();
    for _ in 0..samples {
        let xi = ChaosCoordinates::sample(1, n_w, &mut rng);
        let u = state.reconstruct(&xi).unwrap();
        let u = u.leray_project();
        let quad = u.convect(&u).unwrap();
        for (pos, alpha) in set.indices().iter().enumerate() {
            let z = wick_eval(alpha, |i, k| xi.get(i, k)).unwrap();
            mc_acc[pos].add_scaled(&quad, z / samples as f64);
        }
    }

    // Compare -table vs MC projection (the rhs carries the minus sign), at
    // the forced Taylor-Green modes, within Monte Carlo error.
    let mut checked = 0;
    for pos in 0..n_coeffs {
        let alpha = set.get(pos);
        let fact = alpha.factorial().unwrap() as f64;
        let table = {
            let mut d = with_conv[pos].clone();
            d.add_scaled(&without_conv[pos], -1.0);
            d.scaled(-1.0) // rhs holds the negated sum
        };
        let mc = mc_acc[pos].scaled(1.0 / fact); // E[X zeta]/alpha! matches rhs normalization? no:
        let _ = mc;
        // rhs convective part for alpha is sum w (u_gamma . grad) u_beta with
        // w = alpha! Phi; the MC estimate of E[(u.grad u) zeta_alpha] equals
        // that same sum directly (projection onto the unnormalized basis).
        let mc = mc_acc[pos].clone();
        let dev = table.sub(&mc).norms().l2;
        let scale = table.norms().l2.max(1e-6);
        assert!(
            dev / scale < 0.25,
            "alpha = {alpha:?}: |table - mc| = {dev:.3e}, scale {scale:.3e}"
        );
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn chaos_energy_neutrality_of_convection() {
    // sum_alpha <nonlinear part, u_alpha> / alpha! = 0 over a closed set:
    // the antisymmetry of the advection pairing makes the triple sum cancel.
    let grid = Grid::new(16).unwrap();
    let noise = Arc::new(NoiseModel::kraichnan(&grid, 0.2, 1.0, 1).unwrap().truncated(2));
    let mk = |convection: bool| {
        PropagatorSystem::new(
            &grid,
            Arc::clone(&noise),
            TimeBasis::new(1.0, 1).unwrap(),
            Forcing::default(),
            PropagatorParams {
                nu: 0.1,
                dt: 1e-3,
                max_order: 2,
                convection,
                ..Default::default()
            },
        )
        .unwrap()
    };
    let system = mk(true);
    let system_off = mk(false);
    let mut state = system.initial_state(&taylor_green(&grid));
    for pos in 0..state.coeffs().len() {
        state.coeffs_mut()[pos] = random_divfree_field(&grid, 2.0, 400 + pos as u64);
    }
    let on = system.rhs_explicit(&state, 0.0).unwrap().0;
    let off = system_off.rhs_explicit(&state, 0.0).unwrap().0;
    let mut total = 0.0;
    let mut scale = 0.0;
    for (pos, alpha) in system.index_set().indices().iter().enumerate() {
        let fact = alpha.factorial().unwrap() as f64;
        let mut nl = on[pos].clone();
        nl.add_scaled(&off[pos], -1.0);
        total += nl.inner(&state.coeffs()[pos]) / fact;
        scale += nl.norms().l2 * state.coeffs()[pos].norms().l2 / fact;
    }
    assert!(
        total.abs() <= 1e-11 * scale.max(1e-30),
        "chaos convection energy leak: {total:.3e} (scale {scale:.3e})"
    );
}

#[test]
fn moment_examples() {
    let grid = Grid::new(16).unwrap();
    let noise = Arc::new(NoiseModel::kraichnan(&grid, 0.2, 1.0, 1).unwrap().truncated(2));
    let system = PropagatorSystem::new(
        &grid,
        noise,
        TimeBasis::new(1.0, 2).unwrap(),
        Forcing::default(),
        PropagatorParams {
            nu: 0.1,
            dt: 1e-3,
            max_order: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let u0 = taylor_green(&grid);
    let mut state = system.initial_state(&u0);
    assert_relative_eq!(state.second_moment(), u0.energy(), max_relative = 1e-13);

    // Mean zero, one first-order coefficient: second moment is its energy.
    let set_len = state.coeffs().len();
    for pos in 0..set_len {
        state.coeffs_mut()[pos] = SpectralField::zero(&grid);
    }
    let w = random_divfree_field(&grid, 2.0, 55);
    state.coeffs_mut()[1] = w.clone();
    assert!(state.mean().max_abs_coeff() == 0.0);
    assert_relative_eq!(state.second_moment(), w.energy(), max_relative = 1e-13);

    // A coefficient at alpha with alpha! = 2 contributes half its energy.
    let two = state
        .index_set()
        .indices()
        .iter()
        .position(|a| a.factorial().unwrap() == 2)
        .expect("order-2 index present");
    state.coeffs_mut()[1] = SpectralField::zero(&grid);
    state.coeffs_mut()[two] = w.clone();
    assert_relative_eq!(state.second_moment(), 0.5 * w.energy(), max_relative = 1e-13);
}

#[test]
fn reconstruction_examples() {
    let grid = Grid::new(16).unwrap();
    let noise = Arc::new(NoiseModel::kraichnan(&grid, 0.2, 1.0, 1).unwrap().truncated(2));
    let system = PropagatorSystem::new(
        &grid,
        Arc::clone(&noise),
        TimeBasis::new(1.0, 1).unwrap(),
        Forcing::default(),
        PropagatorParams {
            nu: 0.1,
            dt: 1e-3,
            max_order: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let u0 = taylor_green(&grid);
    let mut state = system.initial_state(&u0);
    let e1 = random_divfree_field(&grid, 2.0, 81);
    state.coeffs_mut()[1] = e1.clone();

    // xi = 0 keeps only the mean.
    let zero = ChaosCoordinates::zero(1, noise.n_w() as u32);
    let rec = state.reconstruct(&zero).unwrap();
    assert!(rec.sub(state.mean()).max_abs_coeff() <= 1e-14);

    // One active slot: mean + s * first-order coefficient.
    let mut xi = ChaosCoordinates::zero(1, noise.n_w() as u32);
    let slot = state.index_set().get(1).iter().next().unwrap().0;
    xi.set(slot.0, slot.1, 0.7);
    let rec = state.reconstruct(&xi).unwrap();
    let mut want = state.mean().clone();
    want.add_scaled(&e1, 0.7);
    assert!(rec.sub(&want).max_abs_coeff() <= 1e-14 * want.max_abs_coeff());

    // Monte Carlo mean of reconstructions returns the mean coefficient.
    let mut rng = seeded_rng(4242);
    let samples = 10_000;
    let mut acc = SpectralField::zero(&grid);
    for _ in 0..samples {
        let xi = ChaosCoordinates::sample(1, noise.n_w() as u32, &mut rng);
        acc.add_scaled(&state.reconstruct(&xi).unwrap(), 1.0 / samples as f64);
    }
    // Standard error of each coefficient is |e1-coeff| / sqrt(M); compare in
    // L2 against four standard errors of the field norm.
    let se = e1.norms().l2 / (samples as f64).sqrt();
    let dev = acc.sub(state.mean()).norms().l2;
    assert!(dev <= 4.0 * se, "|mean of reconstructions - mean| = {dev:.3e}, 4 SE = {:.3e}", 4.0 * se);
}

#[test]
fn pressure_gradient_examples() {
    let grid = Grid::new(32).unwrap();
    let noise = NoiseModel::empty(&grid);
    let forcing = Forcing::default();
    let ctx = PressureContext {
        nu: 0.1,
        b: None,
        forcing: &forcing,
        noise: &noise,
        h: None,
    };
    let zero = SpectralField::zero(&grid);
    let (gp, gpt) = recover_pressure_gradients(&zero, &ctx).unwrap();
    assert_eq!(gp.max_abs_coeff(), 0.0);
    assert!(gpt.is_empty());

    // Taylor-Green: grad p = G[-(u.grad)u] = -1/2 (sin 2x, sin 2y); the
    // diffusion term is divergence-free and contributes nothing to G.
    let tg = taylor_green(&grid);
    let (gp, _) = recover_pressure_gradients(&tg, &ctx).unwrap();
    let samples = gp.to_grid();
    let dx = grid.length() / 32.0;
    for i in 0..32 {
        for j in 0..32 {
            let x = i as f64 * dx;
            let y = j as f64 * dx;
            assert_abs_diff_eq!(samples[0][[i, j]], -0.5 * (2.0 * x).sin(), epsilon = 1e-12);
            assert_abs_diff_eq!(samples[1][[i, j]], -0.5 * (2.0 * y).sin(), epsilon = 1e-12);
        }
    }
    // Pure potential: S annihilates it.
    assert!(gp.leray_project().max_abs_coeff() <= 1e-14);

    // With transport noise and additive g, grad ptilde = G[(sigma.grad)u + g].
    let mut noise2 = NoiseModel::kraichnan(&grid, 0.3, 1.0, 1).unwrap().truncated(2);
    let mut g = SpectralField::zero(&grid);
    g.add_real_mode([2, 0], [Complex64::new(0.2, 0.0), Complex64::new(0.0, 0.1)]);
    noise2.push_additive_mode(g.clone());
    let ctx2 = PressureContext {
        nu: 0.1,
        b: None,
        forcing: &forcing,
        noise: &noise2,
        h: None,
    };
    let (_, gpt) = recover_pressure_gradients(&tg, &ctx2).unwrap();
    assert_eq!(gpt.len(), 3);
    for k in 0..2 {
        let sigma = noise2.modes()[k].sigma.as_ref().unwrap();
        let mut manual = sigma.convect(&tg).unwrap(); // S part
        // Reference: G[(sigma.grad)u] = (sigma.grad)u - S[(sigma.grad)u];
        // build the unprojected product through grid arithmetic.
        let sg = sigma.to_grid();
        let du = [tg.partial(0).to_grid(), tg.partial(1).to_grid()];
        let mut prod = [
            ndarray::Array2::<f64>::zeros((32, 32)),
            ndarray::Array2::<f64>::zeros((32, 32)),
        ];
        for l in 0..2 {
            for i in 0..32 {
                for j in 0..32 {
                    prod[l][[i, j]] =
                        sg[0][[i, j]] * du[0][l][[i, j]] + sg[1][[i, j]] * du[1][l][[i, j]];
                }
            }
        }
        let full = SpectralField::from_grid(&grid, &prod).unwrap().dealias();
        manual = full.sub(&manual);
        let dev = gpt[k].sub(&manual).max_abs_coeff();
        assert!(
            dev <= 1e-12 * manual.max_abs_coeff().max(1e-12),
            "mode {k}: deviation {dev}"
        );
    }
    // The additive channel's gradient is G[g].
    let dev = gpt[2].sub(&g.potential_project()).max_abs_coeff();
    assert!(dev <= 1e-13);
}

#[test]
fn state_dependent_forcing_acts_pointwise() {
    // f(t, x, u) = -c u is linear damping: a single mode decays at
    // exp(-(nu |k|^2 + c) t) up to the Euler drift error O(dt).
    let grid = Grid::new(16).unwrap();
    let nu = 0.1;
    let c = 0.8;
    let dt = 1e-4;
    let t_end = 0.05;
    let mc = McConfig::with_extensions(
        &grid,
        Arc::new(NoiseModel::empty(&grid)),
        Forcing::default(),
        None,
        UDependentForcing {
            f: Some(Arc::new(move |_t, _x, u| [-c * u[0], -c * u[1]])),
            g: None,
        },
        McParams {
            nu,
            dt,
            t_end,
            paths: 1,
            output_stride: 500,
            convection: false,
            ..Default::default()
        },
    )
    .unwrap();
    let mut u0 = SpectralField::zero(&grid);
    u0.add_real_mode([1, 1], [Complex64::new(0.3, 0.0), Complex64::new(-0.3, 0.0)]);
    let u0 = u0.leray_project();
    let traj = mc.simulate_path(&u0, 0).unwrap();
    let want = u0.energy() * (-2.0 * (nu * 2.0 + c) * t_end).exp();
    assert_relative_eq!(*traj.energy.last().unwrap(), want, max_relative = 5e-3);

    // With a clip scale far below |u|, the damping shuts off entirely.
    let mc_clipped = McConfig::with_extensions(
        &grid,
        Arc::new(NoiseModel::empty(&grid)),
        Forcing::default(),
        None,
        UDependentForcing {
            f: Some(Arc::new(move |_t, _x, u| [-c * u[0], -c * u[1]])),
            g: None,
        },
        McParams {
            nu,
            dt,
            t_end,
            paths: 1,
            output_stride: 500,
            convection: false,
            clip_scale: Some(1e-6),
            ..Default::default()
        },
    )
    .unwrap();
    let traj = mc_clipped.simulate_path(&u0, 0).unwrap();
    let want = u0.energy() * (-2.0 * nu * 2.0 * t_end).exp();
    assert_relative_eq!(*traj.energy.last().unwrap(), want, max_relative = 1e-9);
}

#[test]
fn h_coupling_term_matches_manual_assembly() {
    // Ltilde_k = G[(sigma_k . grad) u + g_k]; the term pairs component i of
    // Ltilde_k with the vector field h^{i,k} pointwise.
    let grid = Grid::new(16).unwrap();
    let n = grid.n();
    let mut noise = NoiseModel::kraichnan(&grid, 0.3, 1.0, 1).unwrap().truncated(2);
    let mut g = SpectralField::zero(&grid);
    g.add_real_mode([1, 0], [Complex64::default(), Complex64::new(0.0, -0.2)]);
    noise.push_additive_mode(g.clone());
    let n_w = noise.n_w();

    let h1 = SpectralField::from_grid(
        &grid,
        &[
            ndarray::Array2::from_elem((n, n), 0.5),
            ndarray::Array2::from_elem((n, n), -0.25),
        ],
    )
    .unwrap();
    let h = HFields {
        components: [
            (0..n_w).map(|_| h1.clone()).collect(),
            (0..n_w).map(|_| SpectralField::zero(&grid)).collect(),
        ],
    };

    let u = random_divfree_field(&grid, 2.0, 31);
    let term = chaos_ns::kernels::h_coupling_term(&u, &noise, true, &h).unwrap();

    // Manual reference from public operations: the transport product via
    // grid arithmetic (on the dealiased field, matching the kernel), the
    // potential part, then the pointwise pairing with h^1 = (0.5, -0.25).
    let ud = u.dealias();
    let du = [ud.partial(0).to_grid(), ud.partial(1).to_grid()];
    let mut manual = [
        ndarray::Array2::<f64>::zeros((n, n)),
        ndarray::Array2::<f64>::zeros((n, n)),
    ];
    for (k, mode) in noise.modes().iter().enumerate() {
        let mut xi = SpectralField::zero(&grid);
        if let Some(sigma) = &mode.sigma {
            let sg = sigma.to_grid();
            let mut prod = [
                ndarray::Array2::<f64>::zeros((n, n)),
                ndarray::Array2::<f64>::zeros((n, n)),
            ];
            for l in 0..2 {
                for i in 0..n {
                    for j in 0..n {
                        prod[l][[i, j]] =
                            sg[0][[i, j]] * du[0][l][[i, j]] + sg[1][[i, j]] * du[1][l][[i, j]];
                    }
                }
            }
            xi = SpectralField::from_grid(&grid, &prod).unwrap().dealias();
        }
        if let Some(gk) = &mode.g {
            xi.add_scaled(gk, 1.0);
        }
        let _ = k;
        let lg = xi.potential_project().to_grid();
        for i in 0..n {
            for j in 0..n {
                manual[0][[i, j]] += lg[0][[i, j]] * 0.5;
                manual[1][[i, j]] += lg[0][[i, j]] * -0.25;
            }
        }
    }
    let manual = SpectralField::from_grid(&grid, &manual).unwrap();
    let dev = term.sub(&manual).max_abs_coeff();
    assert!(
        dev <= 1e-12 * manual.max_abs_coeff().max(1e-12),
        "deviation {dev}"
    );
}

#[test]
fn g_coupling_variants_differ_only_off_the_mean() {
    let grid = Grid::new(16).unwrap();
    let mut noise = NoiseModel::kraichnan(&grid, 0.3, 1.0, 1).unwrap().truncated(2);
    let mut g = SpectralField::zero(&grid);
    // A gradient component in g is what distinguishes the variants: the
    // Ltilde coupling sees only G[g].
    g.add_real_mode([1, 1], [Complex64::new(0.1, 0.0), Complex64::new(0.2, 0.0)]);
    noise.push_additive_mode(g);
    let noise = Arc::new(noise);
    let n16 = grid.n();
    let h1 = SpectralField::from_grid(
        &grid,
        &[
            ndarray::Array2::from_elem((n16, n16), 0.4),
            ndarray::Array2::from_elem((n16, n16), 0.3),
        ],
    )
    .unwrap();
    let n_w = noise.n_w();
    let h = HFields {
        components: [
            (0..n_w).map(|_| h1.clone()).collect(),
            (0..n_w).map(|_| SpectralField::zero(&grid)).collect(),
        ],
    };
    let mk = |variant: GCouplingVariant| {
        PropagatorSystem::with_h(
            &grid,
            Arc::clone(&noise),
            TimeBasis::new(1.0, 1).unwrap(),
            Forcing::default(),
            Some(h.clone()),
            PropagatorParams {
                nu: 0.1,
                dt: 1e-3,
                max_order: 1,
                g_variant: variant,
                ..Default::default()
            },
        )
        .unwrap()
    };
    let sys_zero = mk(GCouplingVariant::GAtZeroOnly);
    let sys_all = mk(GCouplingVariant::GEverywhere);
    let mut state = sys_zero.initial_state(&taylor_green(&grid));
    for pos in 1..state.coeffs().len() {
        state.coeffs_mut()[pos] = random_divfree_field(&grid, 2.0, 600 + pos as u64).scaled(0.2);
    }
    let rz = sys_zero.rhs_explicit(&state, 0.1).unwrap().0;
    let ra = sys_all.rhs_explicit(&state, 0.1).unwrap().0;
    // Identical at the mean.
    assert!(rz[0].sub(&ra[0]).max_abs_coeff() <= 1e-14 * rz[0].max_abs_coeff());
    // Different somewhere off the mean (g contributes through Ltilde).
    let differs = (1..state.coeffs().len())
        .any(|p| rz[p].sub(&ra[p]).max_abs_coeff() > 1e-12);
    assert!(differs, "variants must be distinguishable when h and g are set");
}

#[test]
fn wiener_increment_moments_at_scale() {
    let mut rng = seeded_rng(2024);
    let n = 1_000_000usize;
    let dt = 0.25_f64;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n {
        let x = standard_normal(&mut rng) * dt.sqrt();
        sum += x;
        sumsq += x * x;
    }
    let mean = sum / n as f64;
    assert!(mean.abs() <= 4.0 * (dt / n as f64).sqrt());
    assert!((sumsq / n as f64 / dt - 1.0).abs() < 0.01);
}
