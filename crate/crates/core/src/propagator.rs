//! Deterministic propagator system for the Hermite-Fourier chaos
//! coefficients: assembly, time integration, moments, pathwise
//! reconstruction and pressure-gradient recovery.

use std::sync::Arc;

use ndarray::Array2;

use crate::coupling::build_coupling_table_with;
use crate::error::{Error, Result};
use crate::field::{SpectralField, D};
use crate::grid::Grid;
use crate::hermite::wick_eval;
use crate::kernels::{
    advect_into, assemble_projected, cfl_estimate, diffusion_symbol, dissipation_weights,
    h_coupling_term, DriftTail, FieldGrids, Forcing, HFields,
};
use crate::multi_index::{enumerate_indices, IndexSet, Slot};
use crate::noise::{check_ellipticity, ChaosCoordinates, NoiseModel, TimeBasis};
use crate::par::{maybe_par_map, ExecStrategy};

/// Time discretization of the coefficient system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Integrating-factor diffusion with a two-stage SSP Runge-Kutta step
    /// for the remaining terms.
    SspRk2,
    /// Integrating-factor diffusion with a single explicit Euler stage;
    /// the deterministic limit of the Monte Carlo path step.
    Euler,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CflPolicy {
    Error,
    Warn,
}

/// Whether g participates in the Ltilde pressure coupling for every
/// coefficient or only at the mean (the display leaves this open; both are
/// available and compared).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GCouplingVariant {
    GAtZeroOnly,
    GEverywhere,
}

/// Scalar solver controls shared by the propagator constructor.
#[derive(Clone, Debug)]
pub struct PropagatorParams {
    pub nu: f64,
    pub b: Option<[f64; 2]>,
    pub dt: f64,
    pub max_order: u32,
    pub scheme: Scheme,
    pub cfl_policy: CflPolicy,
    pub g_variant: GCouplingVariant,
    pub convection: bool,
    pub strategy: ExecStrategy,
}

impl Default for PropagatorParams {
    fn default() -> Self {
        Self {
            nu: 0.1,
            b: None,
            dt: 1e-3,
            max_order: 2,
            scheme: Scheme::SspRk2,
            cfl_policy: CflPolicy::Error,
            g_variant: GCouplingVariant::GAtZeroOnly,
            convection: true,
            strategy: ExecStrategy::default(),
        }
    }
}

/// The coefficient family {uhat_alpha} at one time.
#[derive(Clone, Debug)]
pub struct ChaosState {
    index_set: Arc<IndexSet>,
    coeffs: Vec<SpectralField>,
    pub t: f64,
}

impl ChaosState {
    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn coeffs(&self) -> &[SpectralField] {
        &self.coeffs
    }

    pub fn coeff(&self, pos: usize) -> &SpectralField {
        &self.coeffs[pos]
    }

    /// Mutable coefficient access for fixtures and tests; the layout must
    /// stay aligned with the index set.
    pub fn coeffs_mut(&mut self) -> &mut [SpectralField] {
        &mut self.coeffs
    }

    /// E u(t) = uhat_0(t): the empty-index coefficient.
    pub fn mean(&self) -> &SpectralField {
        &self.coeffs[0]
    }

    /// E |u(t)|^2 = sum_alpha |uhat_alpha|^2 / alpha!.
    pub fn second_moment(&self) -> f64 {
        self.index_set
            .indices()
            .iter()
            .zip(&self.coeffs)
            .map(|(alpha, c)| c.energy() / alpha.factorial().expect("orders capped") as f64)
            .sum()
    }

    /// Largest divergence deviation over the coefficient family.
    pub fn max_divergence_deviation(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.divergence_deviation())
            .fold(0.0, f64::max)
    }

    /// Pathwise realization sum_alpha zeta_alpha(xi) / alpha! * uhat_alpha.
    pub fn reconstruct(&self, xi: &ChaosCoordinates) -> Result<SpectralField> {
        let mut out = SpectralField::zero(self.coeffs[0].grid());
        for (alpha, c) in self.index_set.indices().iter().zip(&self.coeffs) {
            let z = wick_eval(alpha, |i, k| xi.get(i, k))?;
            let fact = alpha.factorial()? as f64;
            out.add_scaled(c, z / fact);
        }
        Ok(out)
    }
}

/// One recorded diagnostics row.
#[derive(Clone, Copy, Debug)]
pub struct DiagRow {
    pub t: f64,
    pub mean_energy: f64,
    pub chaos_energy: f64,
    pub max_divergence: f64,
    pub cfl: f64,
}

/// Assembled propagator: index set, coupling weights, noise data and the
/// precomputed stepping symbols.
pub struct PropagatorSystem {
    grid: Grid,
    index_set: Arc<IndexSet>,
    weights: Vec<Vec<(usize, usize, f64)>>,
    dec_pos: Vec<Vec<(Slot, u32, usize)>>,
    noise: Arc<NoiseModel>,
    time_basis: TimeBasis,
    forcing: Forcing,
    h: Option<HFields>,
    params: PropagatorParams,
    diffusion: [[f64; 2]; 2],
    exp_symbol: Array2<f64>,
    dissipation: Array2<f64>,
    sigma_grids: Vec<Option<[Array2<f64>; D]>>,
}

impl PropagatorSystem {
    pub fn new(
        grid: &Grid,
        noise: Arc<NoiseModel>,
        time_basis: TimeBasis,
        forcing: Forcing,
        params: PropagatorParams,
    ) -> Result<Self> {
        Self::with_h(grid, noise, time_basis, forcing, None, params)
    }

    pub fn with_h(
        grid: &Grid,
        noise: Arc<NoiseModel>,
        time_basis: TimeBasis,
        forcing: Forcing,
        h: Option<HFields>,
        params: PropagatorParams,
    ) -> Result<Self> {
        if !(params.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                params.dt
            )));
        }
        check_ellipticity(params.nu, noise.ito_correction())?;
        let index_set = Arc::new(enumerate_indices(
            params.max_order,
            time_basis.n_t(),
            noise.n_w().max(1) as u32,
        )?);
        let table = build_coupling_table_with(&index_set, params.strategy);
        let weights = table.to_f64_rows();
        let dec_pos = index_set.decrement_positions();
        let diffusion = noise.effective_diffusion(params.nu);
        let exp_symbol = diffusion_symbol(grid, diffusion, params.dt);
        let dissipation = dissipation_weights(grid, diffusion, params.dt);
        let sigma_grids = noise
            .modes()
            .iter()
            .map(|m| m.sigma.as_ref().map(|s| s.dealias().to_grid()))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            index_set,
            weights,
            dec_pos,
            noise,
            time_basis,
            forcing,
            h,
            params,
            diffusion,
            exp_symbol,
            dissipation,
            sigma_grids,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn index_set(&self) -> &Arc<IndexSet> {
        &self.index_set
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn time_basis(&self) -> &TimeBasis {
        &self.time_basis
    }

    pub fn params(&self) -> &PropagatorParams {
        &self.params
    }

    pub fn effective_diffusion(&self) -> [[f64; 2]; 2] {
        self.diffusion
    }

    pub fn dissipation_weights(&self) -> &Array2<f64> {
        &self.dissipation
    }

    /// uhat_0(0) = S(u0), all other coefficients zero.
    pub fn initial_state(&self, u0: &SpectralField) -> ChaosState {
        let mut coeffs = vec![SpectralField::zero(&self.grid); self.index_set.len()];
        coeffs[0] = u0.leray_project();
        ChaosState {
            index_set: Arc::clone(&self.index_set),
            coeffs,
            t: 0.0,
        }
    }

    fn check_state(&self, state: &ChaosState) -> Result<()> {
        if !Arc::ptr_eq(&state.index_set, &self.index_set)
            && state.index_set.truncation() != self.index_set.truncation()
        {
            return Err(Error::IndexSetMismatch);
        }
        if state.coeffs.len() != self.index_set.len() {
            return Err(Error::IndexSetMismatch);
        }
        Ok(())
    }

    /// Full right-hand side of the coefficient system, diffusion included.
    pub fn rhs(&self, state: &ChaosState, t: f64) -> Result<Vec<SpectralField>> {
        let (mut out, _) = self.rhs_explicit(state, t)?;
        let scale = self.grid.wavenumber_scale();
        let a = self.diffusion;
        for (rhs_alpha, u_alpha) in out.iter_mut().zip(&state.coeffs) {
            let mut diff = u_alpha.clone();
            let n = self.grid.n();
            for l in 0..D {
                for ((i, j), z) in diff.components_mut()[l].indexed_iter_mut() {
                    let k1 = scale * self.grid.wavenumber(i) as f64;
                    let k2 = scale * self.grid.wavenumber(j) as f64;
                    let q = a[0][0] * k1 * k1 + (a[0][1] + a[1][0]) * k1 * k2 + a[1][1] * k2 * k2;
                    let _ = n;
                    *z *= -q;
                }
            }
            rhs_alpha.add_scaled(&diff.leray_project(), 1.0);
        }
        Ok(out)
    }

    /// Everything except diffusion: the part advanced by the explicit
    /// stages. Also returns the advective CFL estimate of the stage.
    pub fn rhs_explicit(&self, state: &ChaosState, t: f64) -> Result<(Vec<SpectralField>, f64)> {
        self.check_state(state)?;
        let need_grids = self.params.convection || self.noise.has_transport();
        let grids: Vec<FieldGrids> = if need_grids {
            maybe_par_map(self.params.strategy, state.coeffs.len(), |pos| {
                FieldGrids::new(&state.coeffs[pos])
            })
        } else {
            Vec::new()
        };
        let cfl = if self.params.convection {
            grids
                .iter()
                .map(|g| cfl_estimate(&g.u, self.params.dt, &self.grid))
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        let m_vals: Vec<f64> = (1..=self.time_basis.n_t())
            .map(|i| self.time_basis.eval(i, t.min(self.time_basis.horizon())))
            .collect();

        let n = self.grid.n();
        let rows: Vec<Result<SpectralField>> =
            maybe_par_map(self.params.strategy, state.coeffs.len(), |apos| {
                let alpha = self.index_set.get(apos);
                let mut acc = [Array2::zeros((n, n)), Array2::zeros((n, n))];
                let mut acc_used = false;
                if self.params.convection {
                    for &(bpos, gpos, w) in &self.weights[apos] {
                        advect_into(&mut acc, &grids[gpos].u, &grids[bpos].du, -w);
                        acc_used = true;
                    }
                }
                for &((j, k), order, dpos) in &self.dec_pos[apos] {
                    if let Some(sg) = &self.sigma_grids[(k - 1) as usize] {
                        let coef = m_vals[(j - 1) as usize] * order as f64;
                        advect_into(&mut acc, sg, &grids[dpos].du, coef);
                        acc_used = true;
                    }
                }

                let h_term = match &self.h {
                    Some(h) => {
                        let include_g = match self.params.g_variant {
                            GCouplingVariant::GAtZeroOnly => alpha.is_empty(),
                            GCouplingVariant::GEverywhere => true,
                        };
                        Some(h_coupling_term(
                            &state.coeffs[apos],
                            &self.noise,
                            include_g,
                            h,
                        )?)
                    }
                    None => None,
                };

                let mut tail = DriftTail {
                    b_drift: self.params.b.map(|b| (&state.coeffs[apos], b)),
                    f: if alpha.is_empty() {
                        self.forcing.f.as_ref()
                    } else {
                        None
                    },
                    flux: if alpha.is_empty() {
                        self.forcing.flux.as_ref()
                    } else {
                        None
                    },
                    extra: Vec::new(),
                };
                if alpha.order() == 1 {
                    let ((j, k), _, _) = self.dec_pos[apos][0];
                    if let Some(g) = &self.noise.modes()[(k - 1) as usize].g {
                        tail.extra.push((m_vals[(j - 1) as usize], g));
                    }
                }
                if let Some(ht) = &h_term {
                    tail.extra.push((1.0, ht));
                }
                assemble_projected(&self.grid, acc_used.then_some(acc), &tail)
            });
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            out.push(r?);
        }
        Ok((out, cfl))
    }

    fn enforce_cfl(&self, cfl: f64, t: f64) -> Result<bool> {
        if cfl > 1.0 {
            match self.params.cfl_policy {
                CflPolicy::Error => return Err(Error::CflViolation { cfl, t }),
                CflPolicy::Warn => return Ok(true),
            }
        }
        Ok(false)
    }

    /// Advance one dt: exact integrating-factor diffusion composed with the
    /// configured explicit stage(s); Leray re-projection after each stage.
    pub fn step(&self, state: &ChaosState) -> Result<ChaosState> {
        let (next, _) = self.step_with_cfl(state)?;
        Ok(next)
    }

    fn step_with_cfl(&self, state: &ChaosState) -> Result<(ChaosState, f64)> {
        let dt = self.params.dt;
        let t = state.t;
        match self.params.scheme {
            Scheme::Euler => {
                let (f1, cfl) = self.rhs_explicit(state, t)?;
                self.enforce_cfl(cfl, t)?;
                let coeffs = maybe_par_map(self.params.strategy, state.coeffs.len(), |pos| {
                    let mut u = state.coeffs[pos].clone();
                    u.add_scaled(&f1[pos], dt);
                    u.mul_real_symbol(&self.exp_symbol);
                    u.leray_project()
                });
                Ok((
                    ChaosState {
                        index_set: Arc::clone(&self.index_set),
                        coeffs,
                        t: t + dt,
                    },
                    cfl,
                ))
            }
            Scheme::SspRk2 => {
                let (f1, cfl1) = self.rhs_explicit(state, t)?;
                self.enforce_cfl(cfl1, t)?;
                let stage: Vec<SpectralField> =
                    maybe_par_map(self.params.strategy, state.coeffs.len(), |pos| {
                        let mut u = state.coeffs[pos].clone();
                        u.add_scaled(&f1[pos], dt);
                        u.mul_real_symbol(&self.exp_symbol);
                        u.leray_project()
                    });
                let mid = ChaosState {
                    index_set: Arc::clone(&self.index_set),
                    coeffs: stage,
                    t: t + dt,
                };
                let (f2, cfl2) = self.rhs_explicit(&mid, t + dt)?;
                self.enforce_cfl(cfl2, t)?;
                let coeffs = maybe_par_map(self.params.strategy, state.coeffs.len(), |pos| {
                    let mut half_old = state.coeffs[pos].clone();
                    half_old.mul_real_symbol(&self.exp_symbol);
                    let mut u = mid.coeffs[pos].clone();
                    u.add_scaled(&f2[pos], dt);
                    u.add_scaled(&half_old, 1.0);
                    let u = u.scaled(0.5);
                    u.leray_project()
                });
                Ok((
                    ChaosState {
                        index_set: Arc::clone(&self.index_set),
                        coeffs,
                        t: t + dt,
                    },
                    cfl1.max(cfl2),
                ))
            }
        }
    }

    /// Integrate to `t_end` (a whole number of steps away), recording one
    /// diagnostics row per step plus the initial one.
    pub fn integrate(&self, state: &ChaosState, t_end: f64) -> Result<(ChaosState, Vec<DiagRow>)> {
        let dt = self.params.dt;
        let span = t_end - state.t;
        let steps = (span / dt).round();
        if steps < 0.0 || (span - steps * dt).abs() > 1e-9 * dt.max(1e-300) {
            return Err(Error::InvalidParameter(format!(
                "t_end - t = {span} is not a whole number of steps dt = {dt}"
            )));
        }
        let mut cur = state.clone();
        let mut diags = Vec::with_capacity(steps as usize + 1);
        diags.push(self.diag_row(&cur, 0.0));
        for s in 0..steps as u64 {
            let (next, cfl) = self.step_with_cfl(&cur)?;
            cur = next;
            cur.t = state.t + (s + 1) as f64 * dt;
            let row = self.diag_row(&cur, cfl);
            if !row.chaos_energy.is_finite() {
                return Err(Error::NumericalFailure { t: cur.t });
            }
            diags.push(row);
        }
        Ok((cur, diags))
    }

    fn diag_row(&self, state: &ChaosState, cfl: f64) -> DiagRow {
        DiagRow {
            t: state.t,
            mean_energy: state.mean().energy(),
            chaos_energy: state.second_moment(),
            max_divergence: state.max_divergence_deviation(),
            cfl,
        }
    }
}

/// Context for recovering the pressure gradients from a velocity field.
pub struct PressureContext<'a> {
    pub nu: f64,
    pub b: Option<[f64; 2]>,
    pub forcing: &'a Forcing,
    pub noise: &'a NoiseModel,
    pub h: Option<&'a HFields>,
}

/// Recover grad p (potential part of the drift) and grad ptilde per
/// Y-channel (potential part of the noise amplitude).
pub fn recover_pressure_gradients(
    u: &SpectralField,
    ctx: &PressureContext<'_>,
) -> Result<(SpectralField, Vec<SpectralField>)> {
    let grid = u.grid();
    let n = grid.n();
    let grids = FieldGrids::new(u);

    let mut grad_ptilde = Vec::with_capacity(ctx.noise.n_w());
    for mode in ctx.noise.modes() {
        let mut xi = SpectralField::zero(grid);
        if let Some(sigma) = &mode.sigma {
            let sg = FieldGrids::new(sigma);
            let mut acc = [Array2::zeros((n, n)), Array2::zeros((n, n))];
            advect_into(&mut acc, &sg.u, &grids.du, 1.0);
            xi = SpectralField::from_grid(grid, &acc)?;
            xi.apply_infnorm_cutoff(grid.dealias_cutoff());
        }
        if let Some(g) = &mode.g {
            xi.add_scaled(g, 1.0);
        }
        grad_ptilde.push(xi.potential_project());
    }

    // drift = -(u . grad) u + diffusion + f + b . grad u + h-term + d_i f^i
    let mut acc = [Array2::zeros((n, n)), Array2::zeros((n, n))];
    advect_into(&mut acc, &grids.u, &grids.du, -1.0);
    let mut w = SpectralField::from_grid(grid, &acc)?;
    w.apply_infnorm_cutoff(grid.dealias_cutoff());

    let a = {
        let mut a = ctx.noise.ito_correction();
        a[0][0] += ctx.nu;
        a[1][1] += ctx.nu;
        a
    };
    let scale = grid.wavenumber_scale();
    let mut diff = u.clone();
    for l in 0..D {
        for ((i, j), z) in diff.components_mut()[l].indexed_iter_mut() {
            let k1 = scale * grid.wavenumber(i) as f64;
            let k2 = scale * grid.wavenumber(j) as f64;
            let q = a[0][0] * k1 * k1 + (a[0][1] + a[1][0]) * k1 * k2 + a[1][1] * k2 * k2;
            *z *= -q;
        }
    }
    w.add_scaled(&diff, 1.0);
    if let Some(f) = &ctx.forcing.f {
        w.add_scaled(f, 1.0);
    }
    if let Some(b) = ctx.b {
        w.add_directional_derivative(u, b, 1.0);
    }
    if let Some(h) = ctx.h {
        let ht = h_coupling_term(u, ctx.noise, true, h)?;
        w.add_scaled(&ht, 1.0);
    }
    if let Some(flux) = &ctx.forcing.flux {
        for (j, fj) in flux.iter().enumerate() {
            let d = fj.partial(j);
            w.add_scaled(&d, 1.0);
        }
    }
    Ok((w.potential_project(), grad_ptilde))
}
