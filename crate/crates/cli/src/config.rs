//! Experiment configuration: JSON schema with canonical echoing, field-spec
//! builders, and load-time validation.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use chaos_ns::field::{taylor_green, SpectralField};
use chaos_ns::grid::Grid;
use chaos_ns::kernels::{Forcing, HFields};
use chaos_ns::mc::{McConfig, McParams};
use chaos_ns::noise::{check_ellipticity, NoiseModel, TimeBasis};
use chaos_ns::propagator::{
    CflPolicy, GCouplingVariant, PropagatorParams, PropagatorSystem, Scheme,
};
use chaos_ns::snsf;

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_length() -> f64 {
    std::f64::consts::TAU
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub nu: f64,
    #[serde(default)]
    pub b: [f64; 2],
    /// Kraichnan spectrum amplitude; zero disables transport noise.
    #[serde(default)]
    pub c0: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Transport modes live on 0 < |m|_inf <= k_noise.
    #[serde(default = "default_k_noise")]
    pub k_noise: usize,
}

fn default_kappa() -> f64 {
    1.0
}

fn default_k_noise() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosSection {
    /// Total chaos order P.
    pub p: u32,
    pub n_t: u32,
    /// Must equal the number of Y-channels implied by physics + forcing.
    pub n_w: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub paths: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    pub output_stride: usize,
    #[serde(default)]
    pub scheme: SchemeSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeSpec {
    #[default]
    Ssprk2,
    Euler,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    pub u0: FieldSpec,
    #[serde(default)]
    pub f: FieldSpec,
    #[serde(default)]
    pub g: FieldSpec,
    #[serde(default)]
    pub h: FieldSpec,
}

/// A field given by name, by explicit modes, or by an SNSF snapshot file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Named(NamedField),
    Modes { modes: Vec<ModeSpec> },
    File { file: PathBuf },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Named(NamedField::Zero)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedField {
    Zero,
    TaylorGreen,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: [i64; 2],
    pub amplitude: [f64; 2],
    #[serde(default)]
    pub phase: PhaseSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseSpec {
    #[default]
    Cos,
    Sin,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagsSection {
    #[serde(default)]
    pub h_g_coupling_variant: GVariantSpec,
    /// Mollifier cutoff for the convective velocity; absent means the
    /// dealias band (effectively off).
    #[serde(default)]
    pub mollifier_cutoff: Option<usize>,
    #[serde(default)]
    pub cfl_policy: CflPolicySpec,
    #[serde(default = "default_true")]
    pub convection: bool,
    /// Write SNSF snapshots of the final fields.
    #[serde(default)]
    pub write_snapshots: bool,
}

fn default_true() -> bool {
    true
}

impl Default for FlagsSection {
    fn default() -> Self {
        Self {
            h_g_coupling_variant: GVariantSpec::default(),
            mollifier_cutoff: None,
            cfl_policy: CflPolicySpec::default(),
            convection: true,
            write_snapshots: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GVariantSpec {
    #[default]
    GAtZeroOnly,
    GEverywhere,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CflPolicySpec {
    #[default]
    Error,
    Warn,
}

/// Cross-validation tolerances; defaults match the acceptance gates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default = "default_mean_se")]
    pub mean_se_factor: f64,
    #[serde(default = "default_sm_se")]
    pub second_moment_se_factor: f64,
    #[serde(default = "default_sm_margin")]
    pub second_moment_rel_margin: f64,
    #[serde(default = "default_xi_count")]
    pub pathwise_xi_count: usize,
    #[serde(default = "default_orders")]
    pub pathwise_orders: Vec<u32>,
    /// The driven reference runs at dt / refine.
    #[serde(default = "default_refine")]
    pub pathwise_driven_refine: u32,
    /// Relative slack of the monitored energy-balance inequality.
    #[serde(default = "default_energy_tol")]
    pub energy_balance_rel_tol: f64,
}

fn default_mean_se() -> f64 {
    4.0
}
fn default_sm_se() -> f64 {
    3.0
}
fn default_sm_margin() -> f64 {
    0.05
}
fn default_xi_count() -> usize {
    20
}
fn default_orders() -> Vec<u32> {
    vec![1, 2, 3]
}
fn default_refine() -> u32 {
    4
}
fn default_energy_tol() -> f64 {
    1e-6
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            mean_se_factor: default_mean_se(),
            second_moment_se_factor: default_sm_se(),
            second_moment_rel_margin: default_sm_margin(),
            pathwise_xi_count: default_xi_count(),
            pathwise_orders: default_orders(),
            pathwise_driven_refine: default_refine(),
            energy_balance_rel_tol: default_energy_tol(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub physics: PhysicsSection,
    pub chaos: ChaosSection,
    pub mc: McSection,
    pub time: TimeSection,
    pub forcing: ForcingSection,
    #[serde(default)]
    pub flags: FlagsSection,
    #[serde(default)]
    pub compare: CompareSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::Config(format!(
                "config field `{}`: {}",
                e.path(),
                e.inner()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical echo: struct field order, pretty-printed. Loading the echo
    /// reproduces it byte for byte.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        if self.grid.n < 4 || self.grid.n % 2 != 0 {
            return err("grid.n", format!("must be even and >= 4, got {}", self.grid.n));
        }
        if !(self.grid.length > 0.0) {
            return err("grid.length", "must be positive".into());
        }
        if !(self.physics.nu > 0.0) {
            return err(
                "physics.nu",
                format!("ellipticity requires nu > 0, got {}", self.physics.nu),
            );
        }
        if self.physics.c0 < 0.0 {
            return err("physics.c0", "must be nonnegative".into());
        }
        if self.physics.c0 > 0.0 && !(self.physics.kappa > 0.0 && self.physics.kappa < 2.0) {
            return err(
                "physics.kappa",
                format!("must lie in (0, 2), got {}", self.physics.kappa),
            );
        }
        let band = (self.grid.n - 1) / 3;
        if self.physics.c0 > 0.0 && (self.physics.k_noise < 1 || self.physics.k_noise > band) {
            return err(
                "physics.k_noise",
                format!(
                    "must lie in 1..={band} (the dealiased band of n = {})",
                    self.grid.n
                ),
            );
        }
        if self.chaos.n_t < 1 {
            return err("chaos.n_t", "need at least one time mode".into());
        }
        let channels = self.expected_channels();
        if self.chaos.n_w as usize != channels {
            return err(
                "chaos.n_w",
                format!(
                    "must equal the Y-channel count implied by the config: \
                     {} transport + {} additive = {}",
                    self.transport_channels(),
                    usize::from(!matches!(self.forcing.g, FieldSpec::Named(NamedField::Zero))),
                    channels
                ),
            );
        }
        if !(self.time.dt > 0.0) {
            return err("time.dt", "must be positive".into());
        }
        let steps = self.time.t_end / self.time.dt;
        if steps < 1.0 || (steps - steps.round()).abs() > 1e-9 {
            return err(
                "time.t_end",
                format!("must be a whole number of steps dt = {}", self.time.dt),
            );
        }
        if self.time.output_stride == 0 {
            return err("time.output_stride", "must be at least 1".into());
        }
        if self.mc.paths == 0 {
            return err("mc.paths", "need at least one path".into());
        }
        for p in &self.compare.pathwise_orders {
            if *p > 6 {
                return err("compare.pathwise_orders", format!("order {p} too large"));
            }
        }
        if self.compare.pathwise_driven_refine == 0 {
            return err("compare.pathwise_driven_refine", "must be at least 1".into());
        }
        Ok(())
    }

    fn transport_channels(&self) -> usize {
        if self.physics.c0 > 0.0 {
            2 * chaos_ns::noise::lattice_representatives(self.physics.k_noise).len()
        } else {
            0
        }
    }

    fn expected_channels(&self) -> usize {
        self.transport_channels()
            + usize::from(!matches!(self.forcing.g, FieldSpec::Named(NamedField::Zero)))
    }

    pub fn build_grid(&self) -> Result<Grid, CliError> {
        Grid::with_length(self.grid.n, self.grid.length).map_err(CliError::from_solver)
    }

    /// Build a field from a spec; used for u0, f and g. The result must be
    /// mean-zero (solver configurations keep the zero mode out of play).
    pub fn build_field(&self, grid: &Grid, spec: &FieldSpec, name: &str) -> Result<SpectralField, CliError> {
        let field = match spec {
            FieldSpec::Named(NamedField::Zero) => SpectralField::zero(grid),
            FieldSpec::Named(NamedField::TaylorGreen) => taylor_green(grid),
            FieldSpec::Modes { modes } => {
                let mut f = SpectralField::zero(grid);
                for m in modes {
                    if m.k == [0, 0] {
                        return Err(CliError::Config(format!(
                            "forcing.{name}: the zero mode is not allowed (fields are mean-zero)"
                        )));
                    }
                    let amp = match m.phase {
                        PhaseSpec::Cos => [
                            Complex64::new(0.5 * m.amplitude[0], 0.0),
                            Complex64::new(0.5 * m.amplitude[1], 0.0),
                        ],
                        PhaseSpec::Sin => [
                            Complex64::new(0.0, -0.5 * m.amplitude[0]),
                            Complex64::new(0.0, -0.5 * m.amplitude[1]),
                        ],
                    };
                    f.add_real_mode(m.k, amp);
                }
                f
            }
            FieldSpec::File { file } => {
                let bytes = fs::read(file).map_err(|e| {
                    CliError::Config(format!("forcing.{name}: cannot read {}: {e}", file.display()))
                })?;
                snsf::read_field_snapshot(bytes.as_slice(), grid.length())
                    .map_err(CliError::from_solver)?
            }
        };
        let mean = field.mean_mode();
        if mean[0].norm() > 1e-12 || mean[1].norm() > 1e-12 {
            return Err(CliError::Config(format!(
                "forcing.{name}: field must be mean-zero, got mean mode ({}, {})",
                mean[0], mean[1]
            )));
        }
        Ok(field)
    }

    /// Noise model: Kraichnan transport modes when c0 > 0 plus one additive
    /// channel when g is not zero.
    pub fn build_noise(&self, grid: &Grid) -> Result<NoiseModel, CliError> {
        let mut model = if self.physics.c0 > 0.0 {
            NoiseModel::kraichnan(grid, self.physics.c0, self.physics.kappa, self.physics.k_noise)
                .map_err(CliError::from_solver)?
        } else {
            NoiseModel::empty(grid)
        };
        if !matches!(self.forcing.g, FieldSpec::Named(NamedField::Zero)) {
            let g = self.build_field(grid, &self.forcing.g, "g")?;
            model.push_additive_mode(g);
        }
        check_ellipticity(self.physics.nu, model.ito_correction()).map_err(CliError::from_solver)?;
        Ok(model)
    }

    pub fn build_forcing(&self, grid: &Grid) -> Result<Forcing, CliError> {
        let f = match &self.forcing.f {
            FieldSpec::Named(NamedField::Zero) => None,
            spec => Some(self.build_field(grid, spec, "f")?.dealias()),
        };
        Ok(Forcing { f, flux: None })
    }

    /// The h coefficient fields: a non-zero spec populates h^{1} on the
    /// first Y-channel, zeros elsewhere.
    pub fn build_h(&self, grid: &Grid, n_w: usize) -> Result<Option<HFields>, CliError> {
        match &self.forcing.h {
            FieldSpec::Named(NamedField::Zero) => Ok(None),
            spec => {
                if n_w == 0 {
                    return Err(CliError::Config(
                        "forcing.h: needs at least one Y-channel".into(),
                    ));
                }
                let h = self.build_field(grid, spec, "h")?;
                let mut comp1: Vec<SpectralField> =
                    (0..n_w).map(|_| SpectralField::zero(grid)).collect();
                comp1[0] = h;
                let comp2 = (0..n_w).map(|_| SpectralField::zero(grid)).collect();
                Ok(Some(HFields {
                    components: [comp1, comp2],
                }))
            }
        }
    }

    pub fn b_drift(&self) -> Option<[f64; 2]> {
        (self.physics.b != [0.0, 0.0]).then_some(self.physics.b)
    }

    pub fn scheme(&self) -> Scheme {
        match self.time.scheme {
            SchemeSpec::Ssprk2 => Scheme::SspRk2,
            SchemeSpec::Euler => Scheme::Euler,
        }
    }

    pub fn cfl_policy(&self) -> CflPolicy {
        match self.flags.cfl_policy {
            CflPolicySpec::Error => CflPolicy::Error,
            CflPolicySpec::Warn => CflPolicy::Warn,
        }
    }

    pub fn g_variant(&self) -> GCouplingVariant {
        match self.flags.h_g_coupling_variant {
            GVariantSpec::GAtZeroOnly => GCouplingVariant::GAtZeroOnly,
            GVariantSpec::GEverywhere => GCouplingVariant::GEverywhere,
        }
    }

    /// Assemble the propagator for a given chaos order (usually chaos.p).
    pub fn build_propagator(
        &self,
        grid: &Grid,
        noise: Arc<NoiseModel>,
        max_order: u32,
    ) -> Result<PropagatorSystem, CliError> {
        let basis = TimeBasis::new(self.time.t_end, self.chaos.n_t).map_err(CliError::from_solver)?;
        let forcing = self.build_forcing(grid)?;
        let h = self.build_h(grid, noise.n_w())?;
        PropagatorSystem::with_h(
            grid,
            noise,
            basis,
            forcing,
            h,
            PropagatorParams {
                nu: self.physics.nu,
                b: self.b_drift(),
                dt: self.time.dt,
                max_order,
                scheme: self.scheme(),
                cfl_policy: self.cfl_policy(),
                g_variant: self.g_variant(),
                convection: self.flags.convection,
                strategy: chaos_ns::ExecStrategy::default(),
            },
        )
        .map_err(CliError::from_solver)
    }

    pub fn build_mc(
        &self,
        grid: &Grid,
        noise: Arc<NoiseModel>,
        seed: u64,
    ) -> Result<McConfig, CliError> {
        let forcing = self.build_forcing(grid)?;
        let h = self.build_h(grid, noise.n_w())?;
        McConfig::with_extensions(
            grid,
            noise,
            forcing,
            h,
            Default::default(),
            McParams {
                nu: self.physics.nu,
                b: self.b_drift(),
                dt: self.time.dt,
                t_end: self.time.t_end,
                paths: self.mc.paths,
                seed,
                output_stride: self.time.output_stride,
                mollifier_cutoff: self.flags.mollifier_cutoff,
                cfl_policy: self.cfl_policy(),
                convection: self.flags.convection,
                clip_scale: None,
                record_snapshots: false,
                strategy: chaos_ns::ExecStrategy::default(),
            },
        )
        .map_err(CliError::from_solver)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke_json() -> String {
        r#"{
            "grid": {"n": 16},
            "physics": {"nu": 0.1, "c0": 0.5, "kappa": 1.0, "k_noise": 1},
            "chaos": {"p": 1, "n_t": 2, "n_w": 8},
            "mc": {"paths": 4, "seed": 7},
            "time": {"dt": 0.001, "t_end": 0.01, "output_stride": 5},
            "forcing": {"u0": "taylor-green"}
        }"#
        .to_string()
    }

    #[test]
    fn load_echo_load_is_idempotent() {
        let cfg = ExperimentConfig::from_json(&smoke_json()).unwrap();
        let echo = cfg.canonical_json();
        let cfg2 = ExperimentConfig::from_json(&echo).unwrap();
        assert_eq!(echo, cfg2.canonical_json());
    }

    #[test]
    fn unknown_fields_are_rejected_with_a_path() {
        let bad = smoke_json().replace("\"nu\": 0.1,", "\"nu\": 0.1, \"mu\": 3,");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("physics"), "message was: {msg}");
    }

    #[test]
    fn channel_count_is_cross_checked() {
        let bad = smoke_json().replace("\"n_w\": 8", "\"n_w\": 7");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(format!("{err}").contains("n_w"));
    }

    #[test]
    fn mode_spec_builds_real_fields() {
        let json = smoke_json().replace(
            r#""u0": "taylor-green""#,
            r#""u0": {"modes": [{"k": [1, 0], "amplitude": [0.0, 1.0]}]}"#,
        );
        let cfg = ExperimentConfig::from_json(&json).unwrap();
        let grid = cfg.build_grid().unwrap();
        let u0 = cfg.build_field(&grid, &cfg.forcing.u0, "u0").unwrap();
        // cos(x) in the second component.
        assert!((u0.coeff([1, 0], 1).re - 0.5).abs() < 1e-15);
        assert!(u0.hermitian_deviation() < 1e-15);
    }
}
