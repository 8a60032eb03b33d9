//! Monte Carlo path solver: semi-implicit Euler-Maruyama integration of the
//! Ito-form equation with mollified convection, parallel ensembles with
//! deterministic reductions, and a path-driven mode for comparison against
//! chaos reconstructions.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::{SpectralField, D};
use crate::grid::Grid;
use crate::kernels::{
    advect_into, assemble_projected, cfl_estimate, diffusion_symbol, dissipation_weights,
    h_coupling_term, weighted_energy, DriftTail, FieldGrids, Forcing, HFields,
};
use crate::noise::{check_ellipticity, wiener_increments, NoiseModel};
use crate::par::{chunked_fold, ExecStrategy};
use crate::propagator::CflPolicy;
use crate::rng::path_rng;

/// Paths per reduction block. A constant, never derived from the worker
/// count, so ensemble reductions are identical for any parallelism.
const REDUCTION_CHUNK: usize = 16;

/// Pointwise forcing callable: (t, x, u(x)) -> vector value.
pub type PointForcing = Arc<dyn Fn(f64, [f64; 2], [f64; 2]) -> [f64; 2] + Send + Sync>;

/// Optional state-dependent forcing, evaluated on the grid each step.
/// The additive-noise part `g` rides a dedicated Y-channel appended after
/// the noise model's modes.
#[derive(Clone, Default)]
pub struct UDependentForcing {
    pub f: Option<PointForcing>,
    pub g: Option<PointForcing>,
}

#[derive(Clone, Debug)]
pub struct McParams {
    pub nu: f64,
    pub b: Option<[f64; 2]>,
    pub dt: f64,
    pub t_end: f64,
    pub paths: usize,
    pub seed: u64,
    pub output_stride: usize,
    /// Mollifier cutoff for the convective velocity; `None` means the
    /// dealias band, i.e. effectively off.
    pub mollifier_cutoff: Option<usize>,
    pub cfl_policy: CflPolicy,
    pub convection: bool,
    /// Optional clipping scale for state-dependent forcing: values are
    /// damped smoothly to zero once |u| passes the scale.
    pub clip_scale: Option<f64>,
    pub record_snapshots: bool,
    pub strategy: ExecStrategy,
}

impl Default for McParams {
    fn default() -> Self {
        Self {
            nu: 0.1,
            b: None,
            dt: 1e-3,
            t_end: 0.1,
            paths: 1,
            seed: 0,
            output_stride: 10,
            mollifier_cutoff: None,
            cfl_policy: CflPolicy::Error,
            convection: true,
            clip_scale: None,
            record_snapshots: false,
            strategy: ExecStrategy::default(),
        }
    }
}

/// Assembled Monte Carlo solver configuration with precomputed symbols.
pub struct McConfig {
    grid: Grid,
    noise: Arc<NoiseModel>,
    forcing: Forcing,
    h: Option<HFields>,
    u_forcing: UDependentForcing,
    params: McParams,
    exp_symbol: Array2<f64>,
    dissipation: Array2<f64>,
    sigma_grids: Vec<Option<[Array2<f64>; D]>>,
    steps: u64,
}

/// One recorded path.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub snapshots: Option<Vec<SpectralField>>,
    pub final_field: SpectralField,
}

/// Ensemble statistics at the recorded output times.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_field: Vec<SpectralField>,
    /// Mean over paths of sum_l |uhat_l(k)|^2, per mode.
    pub mean_coeff_sq: Vec<Array2<f64>>,
    pub mean_energy: Vec<f64>,
    pub energy_se: Vec<f64>,
    pub mean_dissipation: Vec<f64>,
    pub dissipation_se: Vec<f64>,
    pub paths: usize,
    /// True when fewer than two paths were run: standard errors are zero by
    /// convention and carry no information.
    pub degenerate_se: bool,
}

impl EnsembleStats {
    /// Monte Carlo standard error of the mean field, in L2:
    /// sqrt(area * sum_k var(uhat(k)) / M).
    pub fn mean_field_se_l2(&self, at: usize) -> f64 {
        if self.degenerate_se {
            return 0.0;
        }
        let mean = &self.mean_field[at];
        let area = mean.grid().length() * mean.grid().length();
        let mut var_sum = 0.0;
        for ((i, j), &msq) in self.mean_coeff_sq[at].indexed_iter() {
            let m2 = (0..D)
                .map(|l| mean.component(l)[[i, j]].norm_sqr())
                .sum::<f64>();
            var_sum += (msq - m2).max(0.0);
        }
        (area * var_sum / self.paths as f64).sqrt()
    }

    /// E|u(t)|^2 as the mean over modes of coefficient energies (equals the
    /// mean of per-path Parseval energies).
    pub fn second_moment(&self, at: usize) -> f64 {
        let grid = self.mean_field[at].grid();
        let area = grid.length() * grid.length();
        area * self.mean_coeff_sq[at].iter().sum::<f64>()
    }
}

struct BlockAcc {
    sum_field: Vec<SpectralField>,
    sum_sq: Vec<Array2<f64>>,
    sum_e: Vec<f64>,
    sum_e2: Vec<f64>,
    sum_d: Vec<f64>,
    sum_d2: Vec<f64>,
    count: usize,
}

impl BlockAcc {
    fn new(grid: &Grid, outputs: usize) -> Self {
        let n = grid.n();
        Self {
            sum_field: vec![SpectralField::zero(grid); outputs],
            sum_sq: vec![Array2::zeros((n, n)); outputs],
            sum_e: vec![0.0; outputs],
            sum_e2: vec![0.0; outputs],
            sum_d: vec![0.0; outputs],
            sum_d2: vec![0.0; outputs],
            count: 0,
        }
    }

    fn record(&mut self, at: usize, u: &SpectralField, energy: f64, dissip: f64) {
        self.sum_field[at].add_scaled(u, 1.0);
        for l in 0..D {
            ndarray::Zip::from(&mut self.sum_sq[at])
                .and(u.component(l))
                .for_each(|s, z| *s += z.norm_sqr());
        }
        self.sum_e[at] += energy;
        self.sum_e2[at] += energy * energy;
        self.sum_d[at] += dissip;
        self.sum_d2[at] += dissip * dissip;
    }

    fn merge(mut self, other: BlockAcc) -> Self {
        for at in 0..self.sum_field.len() {
            self.sum_field[at].add_scaled(&other.sum_field[at], 1.0);
            self.sum_sq[at] += &other.sum_sq[at];
            self.sum_e[at] += other.sum_e[at];
            self.sum_e2[at] += other.sum_e2[at];
            self.sum_d[at] += other.sum_d[at];
            self.sum_d2[at] += other.sum_d2[at];
        }
        self.count += other.count;
        self
    }
}

impl McConfig {
    pub fn new(
        grid: &Grid,
        noise: Arc<NoiseModel>,
        forcing: Forcing,
        params: McParams,
    ) -> Result<Self> {
        Self::with_extensions(grid, noise, forcing, None, UDependentForcing::default(), params)
    }

    pub fn with_extensions(
        grid: &Grid,
        noise: Arc<NoiseModel>,
        forcing: Forcing,
        h: Option<HFields>,
        u_forcing: UDependentForcing,
        params: McParams,
    ) -> Result<Self> {
        if !(params.dt > 0.0) || params.paths == 0 || params.output_stride == 0 {
            return Err(Error::InvalidParameter(
                "dt > 0, paths >= 1 and output_stride >= 1 required".into(),
            ));
        }
        check_ellipticity(params.nu, noise.ito_correction())?;
        let span = params.t_end;
        let steps = (span / params.dt).round();
        if steps < 1.0 || (span - steps * params.dt).abs() > 1e-9 * params.dt {
            return Err(Error::InvalidParameter(format!(
                "t_end = {span} is not a whole number of steps dt = {}",
                params.dt
            )));
        }
        let a = noise.effective_diffusion(params.nu);
        let exp_symbol = diffusion_symbol(grid, a, params.dt);
        let dissipation = dissipation_weights(grid, a, params.dt);
        let sigma_grids = noise
            .modes()
            .iter()
            .map(|m| m.sigma.as_ref().map(|s| s.dealias().to_grid()))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            noise,
            forcing,
            h,
            u_forcing,
            params,
            exp_symbol,
            dissipation,
            sigma_grids,
            steps: steps as u64,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &McParams {
        &self.params
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn dissipation_weights(&self) -> &Array2<f64> {
        &self.dissipation
    }

    /// Y-channels: the noise model's modes plus the state-dependent
    /// additive channel when configured.
    pub fn n_channels(&self) -> usize {
        self.noise.n_w() + usize::from(self.u_forcing.g.is_some())
    }

    fn clip_factor(&self, usq: f64) -> f64 {
        match self.params.clip_scale {
            None => 1.0,
            Some(scale) => {
                let r = usq.sqrt() / scale;
                if r <= 1.0 {
                    1.0
                } else if r >= 2.0 {
                    0.0
                } else {
                    let s = r - 1.0;
                    1.0 - s * s * (3.0 - 2.0 * s)
                }
            }
        }
    }

    /// One Euler-Maruyama step in Ito form: explicit drift and noise
    /// increment composed with the exact integrating-factor diffusion, then
    /// Leray re-projection.
    pub fn step_path(&self, u: &SpectralField, t: f64, dw: &[f64]) -> Result<SpectralField> {
        self.step_core(u, t, dw, false)
    }

    fn step_core(
        &self,
        u: &SpectralField,
        t: f64,
        dw: &[f64],
        smooth_path_drift: bool,
    ) -> Result<SpectralField> {
        assert_eq!(dw.len(), self.n_channels(), "one increment per Y-channel");
        let n = self.grid.n();
        let need_grids = self.params.convection
            || self.noise.has_transport()
            || self.u_forcing.f.is_some()
            || self.u_forcing.g.is_some()
            || self.h.is_some();
        let grids = need_grids.then(|| FieldGrids::new(u));

        if self.params.convection {
            let grids = grids.as_ref().expect("grids computed above");
            let cfl = cfl_estimate(&grids.u, self.params.dt, &self.grid);
            if cfl > 1.0 && self.params.cfl_policy == CflPolicy::Error {
                return Err(Error::CflViolation { cfl, t });
            }
        }

        let mut acc = [Array2::zeros((n, n)), Array2::zeros((n, n))];
        let mut acc_used = false;
        if self.params.convection {
            let grids = grids.as_ref().expect("grids computed above");
            let band = self.grid.dealias_cutoff();
            match self.params.mollifier_cutoff {
                Some(cut) if cut < band => {
                    let mollified = FieldGrids::new(&u.mollify(cut));
                    advect_into(&mut acc, &mollified.u, &grids.du, -1.0);
                }
                _ => advect_into(&mut acc, &grids.u, &grids.du, -1.0),
            }
            acc_used = true;
        }
        if let Some(f_u) = &self.u_forcing.f {
            let grids = grids.as_ref().expect("grids computed above");
            self.add_pointwise(&mut acc, grids, t, f_u, 1.0);
            acc_used = true;
        }

        let h_term = match &self.h {
            Some(h) => Some(h_coupling_term(u, &self.noise, true, h)?),
            None => None,
        };
        let mut tail = DriftTail {
            b_drift: self.params.b.map(|b| (u, b)),
            f: self.forcing.f.as_ref(),
            flux: self.forcing.flux.as_ref(),
            extra: Vec::new(),
        };
        if let Some(ht) = &h_term {
            tail.extra.push((1.0, ht));
        }
        let wz = if smooth_path_drift && self.noise.has_transport() {
            Some(self.smooth_path_correction(grids.as_ref().expect("transport grids"))?)
        } else {
            None
        };
        if let Some(wz) = &wz {
            tail.extra.push((1.0, wz));
        }
        let drift = assemble_projected(&self.grid, acc_used.then_some(acc), &tail)?;

        let noise_field = self.noise_increment(grids.as_ref(), t, dw)?;

        let mut next = u.clone();
        next.add_scaled(&drift, self.params.dt);
        if let Some(nf) = &noise_field {
            next.add_scaled(nf, 1.0);
        }
        next.mul_real_symbol(&self.exp_symbol);
        Ok(next.leray_project())
    }

    /// Wong-Zakai drift adjustment for smooth driving paths:
    /// -1/2 sum_k (sigma_k . grad) S[(sigma_k . grad) u], returned
    /// unprojected for the caller's S[...] assembly.
    ///
    /// An Euler-Maruyama step along a smooth path carries no quadratic
    /// variation, so its dt -> 0 limit keeps the Ito-form drift: relative to
    /// the Stratonovich equation that chaos reconstructions realize pathwise,
    /// the (1/2) C d^2 part of the integrating factor must be traded for the
    /// square of the projected transport operator.
    fn smooth_path_correction(&self, grids: &FieldGrids) -> Result<SpectralField> {
        let n = self.grid.n();
        let mut total = [Array2::<f64>::zeros((n, n)), Array2::<f64>::zeros((n, n))];
        for sg in self.sigma_grids.iter().flatten() {
            let mut inner_acc = [Array2::zeros((n, n)), Array2::zeros((n, n))];
            advect_into(&mut inner_acc, sg, &grids.du, 1.0);
            let inner = assemble_projected(&self.grid, Some(inner_acc), &DriftTail::default())?;
            let inner_grids = FieldGrids::new(&inner);
            advect_into(&mut total, sg, &inner_grids.du, -0.5);
        }
        let mut w = SpectralField::from_grid(&self.grid, &total)?;
        w.apply_infnorm_cutoff(self.grid.dealias_cutoff());
        Ok(w)
    }

    /// S[(sigma_k . grad) u + g_k] dW^k summed over channels, or None when
    /// there is no noise at all.
    fn noise_increment(
        &self,
        grids: Option<&FieldGrids>,
        t: f64,
        dw: &[f64],
    ) -> Result<Option<SpectralField>> {
        let has_any =
            self.noise.has_transport() || self.noise.has_additive() || self.u_forcing.g.is_some();
        if !has_any {
            return Ok(None);
        }
        let n = self.grid.n();
        let mut acc = [Array2::zeros((n, n)), Array2::zeros((n, n))];
        let mut acc_used = false;
        if self.noise.has_transport() {
            let grids = grids.expect("grids computed for transport noise");
            let mut sigma_eff = [Array2::<f64>::zeros((n, n)), Array2::<f64>::zeros((n, n))];
            for (k, sg) in self.sigma_grids.iter().enumerate() {
                let Some(sg) = sg else { continue };
                for l in 0..D {
                    ndarray::Zip::from(&mut sigma_eff[l])
                        .and(&sg[l])
                        .for_each(|a, &v| *a += dw[k] * v);
                }
            }
            advect_into(&mut acc, &sigma_eff, &grids.du, 1.0);
            acc_used = true;
        }
        if let Some(g_u) = &self.u_forcing.g {
            let grids = grids.expect("grids computed for state-dependent forcing");
            let dw_last = dw[self.n_channels() - 1];
            self.add_pointwise(&mut acc, grids, t, g_u, dw_last);
            acc_used = true;
        }
        let mut tail = DriftTail::default();
        for (k, mode) in self.noise.modes().iter().enumerate() {
            if let Some(g) = &mode.g {
                tail.extra.push((dw[k], g));
            }
        }
        Ok(Some(assemble_projected(&self.grid, acc_used.then_some(acc), &tail)?))
    }

    fn add_pointwise(
        &self,
        acc: &mut [Array2<f64>; D],
        grids: &FieldGrids,
        t: f64,
        func: &PointForcing,
        scale: f64,
    ) {
        let n = self.grid.n();
        let dx = self.grid.length() / n as f64;
        for i in 0..n {
            for j in 0..n {
                let x = [i as f64 * dx, j as f64 * dx];
                let uval = [grids.u[0][[i, j]], grids.u[1][[i, j]]];
                let clip = self.clip_factor(uval[0] * uval[0] + uval[1] * uval[1]);
                let fval = func(t, x, uval);
                acc[0][[i, j]] += scale * clip * fval[0];
                acc[1][[i, j]] += scale * clip * fval[1];
            }
        }
    }

    fn output_steps(&self) -> Vec<u64> {
        let stride = self.params.output_stride as u64;
        let mut outs = vec![0u64];
        let mut s = stride;
        while s < self.steps {
            outs.push(s);
            s += stride;
        }
        outs.push(self.steps);
        outs
    }

    pub fn output_times(&self) -> Vec<f64> {
        self.output_steps()
            .iter()
            .map(|&s| s as f64 * self.params.dt)
            .collect()
    }

    fn run_path_with<F>(
        &self,
        u0: &SpectralField,
        increments: F,
        record: impl FnMut(usize, &SpectralField, f64, f64),
    ) -> Result<()>
    where
        F: FnMut(u64, f64) -> Vec<f64>,
    {
        self.run_path_core(u0, increments, false, record)
    }

    fn run_path_core<F>(
        &self,
        u0: &SpectralField,
        mut increments: F,
        smooth_path_drift: bool,
        mut record: impl FnMut(usize, &SpectralField, f64, f64),
    ) -> Result<()>
    where
        F: FnMut(u64, f64) -> Vec<f64>,
    {
        let outputs = self.output_steps();
        let mut u = u0.leray_project();
        let mut dissip = 0.0;
        record(0, &u, u.energy(), 0.0);
        let mut out_idx = 1;
        for s in 0..self.steps {
            let t = s as f64 * self.params.dt;
            dissip += weighted_energy(&u, &self.dissipation);
            let dw = increments(s, t);
            u = self.step_core(&u, t, &dw, smooth_path_drift)?;
            let e = u.energy();
            if !e.is_finite() {
                return Err(Error::NumericalFailure {
                    t: t + self.params.dt,
                });
            }
            if out_idx < outputs.len() && s + 1 == outputs[out_idx] {
                record(out_idx, &u, e, dissip);
                out_idx += 1;
            }
        }
        Ok(())
    }

    /// Simulate one path on its own RNG substream; deterministic in
    /// (seed, path index).
    pub fn simulate_path(&self, u0: &SpectralField, path: u64) -> Result<Trajectory> {
        let mut rng = path_rng(self.params.seed, path);
        let n_ch = self.n_channels();
        self.collect_trajectory(u0, move |_, _| {
            if n_ch == 0 {
                Vec::new()
            } else {
                wiener_increments(self.params.dt, n_ch, &mut rng)
            }
        })
    }

    /// Simulate with increments taken from a supplied path t -> W(t)
    /// (typically synthesized from chaos coordinates). W(0) must vanish.
    pub fn simulate_driven<W>(&self, u0: &SpectralField, w: W) -> Result<Trajectory>
    where
        W: Fn(f64) -> Vec<f64>,
    {
        let w0 = w(0.0);
        debug_assert!(
            w0.iter().all(|v| v.abs() < 1e-12),
            "driving path must start at zero"
        );
        let dt = self.params.dt;
        self.collect_trajectory_core(
            u0,
            move |_, t| {
                let a = w(t);
                let b = w(t + dt);
                b.iter().zip(&a).map(|(x, y)| x - y).collect()
            },
            true,
        )
    }

    fn collect_trajectory<F>(&self, u0: &SpectralField, increments: F) -> Result<Trajectory>
    where
        F: FnMut(u64, f64) -> Vec<f64>,
    {
        self.collect_trajectory_core(u0, increments, false)
    }

    fn collect_trajectory_core<F>(
        &self,
        u0: &SpectralField,
        increments: F,
        smooth_path_drift: bool,
    ) -> Result<Trajectory>
    where
        F: FnMut(u64, f64) -> Vec<f64>,
    {
        let times = self.output_times();
        let mut energy = vec![0.0; times.len()];
        let mut dissipation = vec![0.0; times.len()];
        let mut snapshots = self
            .params
            .record_snapshots
            .then(|| Vec::with_capacity(times.len()));
        let mut final_field: Option<SpectralField> = None;
        let last = times.len() - 1;
        self.run_path_core(u0, increments, smooth_path_drift, |at, u, e, d| {
            energy[at] = e;
            dissipation[at] = d;
            if let Some(snaps) = snapshots.as_mut() {
                snaps.push(u.clone());
            }
            if at == last {
                final_field = Some(u.clone());
            }
        })?;
        Ok(Trajectory {
            times,
            energy,
            dissipation,
            snapshots,
            final_field: final_field.expect("final output recorded"),
        })
    }

    /// Run the ensemble with path-indexed substreams and a fixed-order
    /// blockwise reduction: results are identical for any worker count.
    pub fn run_ensemble(&self, u0: &SpectralField) -> Result<EnsembleStats> {
        self.run_ensemble_with(u0, self.params.strategy)
    }

    pub fn run_ensemble_with(
        &self,
        u0: &SpectralField,
        strategy: ExecStrategy,
    ) -> Result<EnsembleStats> {
        let outputs = self.output_steps().len();
        let m = self.params.paths;
        let acc = chunked_fold(
            strategy,
            m,
            REDUCTION_CHUNK,
            |range| {
                let mut block = BlockAcc::new(&self.grid, outputs);
                for path in range {
                    let mut rng = path_rng(self.params.seed, path as u64);
                    let n_ch = self.n_channels();
                    let res = self.run_path_with(
                        u0,
                        |_, _| {
                            if n_ch == 0 {
                                Vec::new()
                            } else {
                                wiener_increments(self.params.dt, n_ch, &mut rng)
                            }
                        },
                        |at, u, e, d| block.record(at, u, e, d),
                    );
                    match res {
                        Ok(()) => block.count += 1,
                        Err(e) => return Err(e),
                    }
                }
                Ok(block)
            },
            |acc: Result<Option<BlockAcc>>, block: Result<BlockAcc>| match (acc, block) {
                (Ok(None), Ok(b)) => Ok(Some(b)),
                (Ok(Some(a)), Ok(b)) => Ok(Some(a.merge(b))),
                (Err(e), _) | (_, Err(e)) => Err(e),
            },
            Ok(None),
        )?;
        let acc = acc.expect("at least one path");
        let mf = 1.0 / m as f64;
        let degenerate = m < 2;
        let se = |sum: f64, sumsq: f64| {
            if degenerate {
                0.0
            } else {
                let var = ((sumsq - sum * sum * mf) / (m as f64 - 1.0)).max(0.0);
                (var * mf).sqrt()
            }
        };
        Ok(EnsembleStats {
            times: self.output_times(),
            mean_field: acc.sum_field.iter().map(|f| f.scaled(mf)).collect(),
            mean_coeff_sq: acc.sum_sq.iter().map(|a| a * mf).collect(),
            mean_energy: acc.sum_e.iter().map(|&e| e * mf).collect(),
            energy_se: acc
                .sum_e
                .iter()
                .zip(&acc.sum_e2)
                .map(|(&s, &s2)| se(s, s2))
                .collect(),
            mean_dissipation: acc.sum_d.iter().map(|&d| d * mf).collect(),
            dissipation_se: acc
                .sum_d
                .iter()
                .zip(&acc.sum_d2)
                .map(|(&s, &s2)| se(s, s2))
                .collect(),
            paths: m,
            degenerate_se: degenerate,
        })
    }
}
