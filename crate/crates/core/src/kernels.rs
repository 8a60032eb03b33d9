//! Shared low-level pieces of both solvers.
//!
//! The Monte Carlo path step and the propagator right-hand side are built
//! from the same primitives in the same order, so configurations in which
//! the two coincide mathematically coincide bit for bit.

use ndarray::Array2;
use num_complex::Complex64;

use crate::field::{SpectralField, D};
use crate::grid::Grid;

/// Dealiased physical-space samples of a field and of its gradient.
pub struct FieldGrids {
    /// u[l](x)
    pub u: [Array2<f64>; D],
    /// du[j][l](x) = (d_j u_l)(x)
    pub du: [[Array2<f64>; D]; 2],
}

impl FieldGrids {
    pub fn new(f: &SpectralField) -> Self {
        let fd = f.dealias();
        let u = fd.to_grid();
        let du = [fd.partial(0).to_grid(), fd.partial(1).to_grid()];
        Self { u, du }
    }
}

/// acc[l] += coef * (adv_1 * d_1 target_l + adv_2 * d_2 target_l),
/// pointwise on the grid, in row-major order.
pub fn advect_into(
    acc: &mut [Array2<f64>; D],
    adv_u: &[Array2<f64>; D],
    target_du: &[[Array2<f64>; D]; 2],
    coef: f64,
) {
    for l in 0..D {
        ndarray::Zip::from(&mut acc[l])
            .and(&adv_u[0])
            .and(&target_du[0][l])
            .and(&adv_u[1])
            .and(&target_du[1][l])
            .for_each(|a, &u1, &d1, &u2, &d2| {
                *a += coef * (u1 * d1 + u2 * d2);
            });
    }
}

/// Spectral-space terms appended after the grid accumulator is transformed.
#[derive(Default)]
pub struct DriftTail<'a> {
    /// Adds b . grad(src).
    pub b_drift: Option<(&'a SpectralField, [f64; 2])>,
    /// Adds f.
    pub f: Option<&'a SpectralField>,
    /// Adds sum_j d_j f^j.
    pub flux: Option<&'a [SpectralField; 2]>,
    /// Adds c * field, in order.
    pub extra: Vec<(f64, &'a SpectralField)>,
}

/// Transform the grid accumulator, dealias, append the tail terms and apply
/// the Leray projection. The term order here is the contract both solvers
/// rely on for bitwise agreement. `None` stands for an untouched (all-zero)
/// accumulator and skips the transform; the result is bitwise the same as
/// transforming zeros.
pub fn assemble_projected(
    grid: &Grid,
    acc: Option<[Array2<f64>; D]>,
    tail: &DriftTail<'_>,
) -> crate::error::Result<SpectralField> {
    let mut w = match acc {
        Some(acc) => {
            let mut w = SpectralField::from_grid(grid, &acc)?;
            w.apply_infnorm_cutoff(grid.dealias_cutoff());
            w
        }
        None => SpectralField::zero(grid),
    };
    if let Some((src, b)) = tail.b_drift {
        w.add_directional_derivative(src, b, 1.0);
    }
    if let Some(f) = tail.f {
        w.add_scaled(f, 1.0);
    }
    if let Some(flux) = tail.flux {
        for (j, fj) in flux.iter().enumerate() {
            let d = fj.partial(j);
            w.add_scaled(&d, 1.0);
        }
    }
    for &(c, field) in &tail.extra {
        w.add_scaled(field, c);
    }
    Ok(w.leray_project())
}

/// exp(-a^{ij} kappa_i kappa_j dt) per mode, full wavevector.
pub fn diffusion_symbol(grid: &Grid, a: [[f64; 2]; 2], dt: f64) -> Array2<f64> {
    let n = grid.n();
    let scale = grid.wavenumber_scale();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let k1 = scale * grid.wavenumber(i) as f64;
        let k2 = scale * grid.wavenumber(j) as f64;
        let q = a[0][0] * k1 * k1 + (a[0][1] + a[1][0]) * k1 * k2 + a[1][1] * k2 * k2;
        (-q * dt).exp()
    })
}

/// Per-mode quadrature weight for the recorded dissipation integral
/// int_t^{t+dt} |grad u|^2 ds under pure integrating-factor decay:
/// kappa^2 (1 - exp(-2 q dt)) / (2 q), with the kappa^2 of the H1 seminorm
/// (Nyquist zeroed) and the full q of the diffusion symbol.
pub fn dissipation_weights(grid: &Grid, a: [[f64; 2]; 2], dt: f64) -> Array2<f64> {
    let n = grid.n();
    let scale = grid.wavenumber_scale();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let k1f = scale * grid.wavenumber(i) as f64;
        let k2f = scale * grid.wavenumber(j) as f64;
        let k1h = if i == n / 2 { 0.0 } else { k1f };
        let k2h = if j == n / 2 { 0.0 } else { k2f };
        let ksq_h1 = k1h * k1h + k2h * k2h;
        let q = a[0][0] * k1f * k1f + (a[0][1] + a[1][0]) * k1f * k2f + a[1][1] * k2f * k2f;
        if q <= 0.0 {
            ksq_h1 * dt
        } else {
            ksq_h1 * (1.0 - (-2.0 * q * dt).exp()) / (2.0 * q)
        }
    })
}

/// Weighted coefficient energy sum: area * sum_k w(k) |vhat(k)|^2.
pub fn weighted_energy(field: &SpectralField, weights: &Array2<f64>) -> f64 {
    let area = field.grid().length() * field.grid().length();
    let mut acc = 0.0;
    for l in 0..D {
        ndarray::Zip::from(field.component(l))
            .and(weights)
            .for_each(|z: &Complex64, &w| acc += w * z.norm_sqr());
    }
    area * acc
}

/// Advective CFL estimate dt * (max |u_1| + max |u_2|) / dx.
pub fn cfl_estimate(u_grids: &[Array2<f64>; D], dt: f64, grid: &Grid) -> f64 {
    let dx = grid.length() / grid.n() as f64;
    let m1 = u_grids[0].iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let m2 = u_grids[1].iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    dt * (m1 + m2) / dx
}

/// Deterministic forcing data shared by both solvers.
#[derive(Clone, Debug, Default)]
pub struct Forcing {
    /// Body force f.
    pub f: Option<SpectralField>,
    /// Flux-form forcing f^j, entering as sum_j d_j f^j.
    pub flux: Option<[SpectralField; 2]>,
}

/// The h^{l,j} coefficient fields pairing with the martingale pressure
/// gradient: `components[j][k]` is the vector field h^j on Y-channel k.
#[derive(Clone, Debug)]
pub struct HFields {
    pub components: [Vec<SpectralField>; 2],
}

/// sum_{j,k} Ltilde_{j,k} h^{j,k} where Ltilde = G[(sigma_k . grad) field
/// (+ g_k)], returned unprojected; the caller folds it into the S[...]
/// assembly.
pub fn h_coupling_term(
    field: &SpectralField,
    noise: &crate::noise::NoiseModel,
    include_g: bool,
    h: &HFields,
) -> crate::error::Result<SpectralField> {
    let grid = field.grid();
    let n = grid.n();
    let field_grids = FieldGrids::new(field);
    let mut term = [Array2::<f64>::zeros((n, n)), Array2::<f64>::zeros((n, n))];
    for (k, mode) in noise.modes().iter().enumerate() {
        let mut xi = SpectralField::zero(grid);
        if let Some(sigma) = &mode.sigma {
            let sg = FieldGrids::new(sigma);
            let mut acc = [Array2::zeros((n, n)), Array2::zeros((n, n))];
            advect_into(&mut acc, &sg.u, &field_grids.du, 1.0);
            xi = SpectralField::from_grid(grid, &acc)?;
            xi.apply_infnorm_cutoff(grid.dealias_cutoff());
        }
        if include_g {
            if let Some(g) = &mode.g {
                xi.add_scaled(g, 1.0);
            }
        }
        let l_grids = xi.potential_project().to_grid();
        for (j, h_j) in h.components.iter().enumerate() {
            let Some(h_jk) = h_j.get(k) else { continue };
            let h_grids = h_jk.to_grid();
            for l in 0..D {
                ndarray::Zip::from(&mut term[l])
                    .and(&l_grids[j])
                    .and(&h_grids[l])
                    .for_each(|t, &a, &b| *t += a * b);
            }
        }
    }
    SpectralField::from_grid(grid, &term)
}
