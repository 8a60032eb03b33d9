//! Real vector fields on the torus stored as Fourier coefficients.
//!
//! The forward transform carries 1/n^2, so coefficients are mode amplitudes
//! and Parseval reads |v|_2^2 = length^2 * sum |vhat(k)|^2. Fields are
//! immutable values in the solver sense: every operation returns a new field.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rng::{seeded_rng, standard_complex};

pub const D: usize = 2;

/// Divergence-free and Hermitian-symmetry checks accept deviations up to
/// this factor times the largest coefficient magnitude.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A real 2-component vector field, represented spectrally.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coeffs: [Array2<Complex64>; D],
    divergence_free: bool,
}

/// A real scalar field, represented spectrally.
#[derive(Clone, Debug)]
pub struct ScalarSpectralField {
    grid: Grid,
    coeffs: Array2<Complex64>,
}

/// L2 norm, H1 seminorm and L4 norm of a vector field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_seminorm: f64,
    pub l4: f64,
}

impl SpectralField {
    pub fn zero(grid: &Grid) -> Self {
        let n = grid.n();
        Self {
            grid: grid.clone(),
            coeffs: [Array2::default((n, n)), Array2::default((n, n))],
            divergence_free: true,
        }
    }

    /// Analyze physical grid samples into coefficients.
    pub fn from_grid(grid: &Grid, samples: &[Array2<f64>; D]) -> Result<Self> {
        let n = grid.n();
        for s in samples {
            if s.dim() != (n, n) {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    got: s.dim().0.max(s.dim().1),
                });
            }
        }
        let coeffs = samples.clone().map(|s| {
            let mut a = s.mapv(|x| Complex64::new(x, 0.0));
            grid.fft2_forward(&mut a);
            a
        });
        let field = Self {
            grid: grid.clone(),
            coeffs,
            divergence_free: false,
        };
        field.debug_validate();
        Ok(field)
    }

    /// Synthesize physical grid samples.
    pub fn to_grid(&self) -> [Array2<f64>; D] {
        self.coeffs.clone().map(|c| {
            let mut a = c;
            self.grid.fft2_inverse(&mut a);
            a.mapv(|z| z.re)
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, l: usize) -> &Array2<Complex64> {
        &self.coeffs[l]
    }

    pub fn divergence_free(&self) -> bool {
        self.divergence_free
    }

    /// Coefficient at a signed wavevector.
    pub fn coeff(&self, k: [i64; 2], l: usize) -> Complex64 {
        let (i, j) = self.wrap(k);
        self.coeffs[l][[i, j]]
    }

    fn wrap(&self, k: [i64; 2]) -> (usize, usize) {
        let n = self.grid.n() as i64;
        let i = ((k[0] % n) + n) % n;
        let j = ((k[1] % n) + n) % n;
        (i as usize, j as usize)
    }

    /// Add a real mode: amplitude at +k and its conjugate at -k.
    pub fn add_real_mode(&mut self, k: [i64; 2], amp: [Complex64; 2]) {
        let (i, j) = self.wrap(k);
        let (ci, cj) = self.wrap([-k[0], -k[1]]);
        for l in 0..D {
            self.coeffs[l][[i, j]] += amp[l];
            self.coeffs[l][[ci, cj]] += amp[l].conj();
        }
        self.divergence_free = false;
    }

    /// Partial derivative along an axis: multiply by i k_axis, with the
    /// Nyquist mode's derivative zeroed (the unpaired mode has no consistent
    /// odd derivative).
    pub fn partial(&self, axis: usize) -> Self {
        assert!(axis < D);
        let n = self.grid.n();
        let scale = self.grid.wavenumber_scale();
        let mut out = self.clone();
        for l in 0..D {
            for ((i, j), z) in out.coeffs[l].indexed_iter_mut() {
                let idx = if axis == 0 { i } else { j };
                let k = self.grid.wavenumber(idx);
                let kappa = if idx == n / 2 { 0.0 } else { scale * k as f64 };
                *z = Complex64::new(0.0, kappa) * *z;
            }
        }
        out.debug_validate();
        out
    }

    /// Potential (gradient) projection G: khat khat^T in Fourier space,
    /// zero on the mean mode.
    pub fn potential_project(&self) -> Self {
        self.project(false)
    }

    /// Leray (divergence-free) projection S = I - G; passes the mean mode
    /// unchanged. The output is flagged divergence-free.
    pub fn leray_project(&self) -> Self {
        self.project(true)
    }

    fn project(&self, leray: bool) -> Self {
        let mut out = self.clone();
        let n = self.grid.n();
        for i in 0..n {
            let k1 = self.grid.wavenumber(i) as f64;
            for j in 0..n {
                let k2 = self.grid.wavenumber(j) as f64;
                let ksq = k1 * k1 + k2 * k2;
                let v1 = self.coeffs[0][[i, j]];
                let v2 = self.coeffs[1][[i, j]];
                let (g1, g2) = if ksq == 0.0 {
                    (Complex64::default(), Complex64::default())
                } else {
                    let dot = (v1 * k1 + v2 * k2) / ksq;
                    (dot * k1, dot * k2)
                };
                if leray {
                    out.coeffs[0][[i, j]] = v1 - g1;
                    out.coeffs[1][[i, j]] = v2 - g2;
                } else {
                    out.coeffs[0][[i, j]] = g1;
                    out.coeffs[1][[i, j]] = g2;
                }
            }
        }
        out.divergence_free = leray;
        out.debug_validate();
        out
    }

    /// Divergence as a scalar field: sum_l i kappa_l vhat^l(k).
    ///
    /// Uses the full wavevector, Nyquist included, so that the divergence of
    /// a Leray projection vanishes identically; the `partial` operator used
    /// for physical-space products zeroes the Nyquist derivative instead.
    pub fn divergence(&self) -> ScalarSpectralField {
        let n = self.grid.n();
        let scale = self.grid.wavenumber_scale();
        let mut coeffs = Array2::default((n, n));
        for i in 0..n {
            let k1 = scale * self.grid.wavenumber(i) as f64;
            for j in 0..n {
                let k2 = scale * self.grid.wavenumber(j) as f64;
                coeffs[[i, j]] = Complex64::new(0.0, k1) * self.coeffs[0][[i, j]]
                    + Complex64::new(0.0, k2) * self.coeffs[1][[i, j]];
            }
        }
        ScalarSpectralField {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    /// Sharp spectral low-pass: zero every mode with |k|_inf > cutoff.
    /// A cutoff of n/2 or larger is the identity.
    pub fn mollify(&self, cutoff: usize) -> Self {
        let mut out = self.clone();
        out.apply_infnorm_cutoff(cutoff);
        out
    }

    /// The 2/3-rule low-pass used around every quadratic product.
    pub fn dealias(&self) -> Self {
        self.mollify(self.grid.dealias_cutoff())
    }

    pub(crate) fn apply_infnorm_cutoff(&mut self, cutoff: usize) {
        let n = self.grid.n();
        if cutoff >= n / 2 {
            return;
        }
        let c = cutoff as i64;
        for l in 0..D {
            for ((i, j), z) in self.coeffs[l].indexed_iter_mut() {
                let k1 = self.grid.wavenumber(i).abs();
                let k2 = self.grid.wavenumber(j).abs();
                if k1 > c || k2 > c {
                    *z = Complex64::default();
                }
            }
        }
    }

    /// Dealiased, Leray-projected convection S[(self . grad) v].
    ///
    /// Errors unless `self` is flagged divergence-free.
    pub fn convect(&self, v: &SpectralField) -> Result<SpectralField> {
        if !self.divergence_free {
            return Err(Error::NotDivergenceFree);
        }
        let adv = crate::kernels::FieldGrids::new(self);
        let target = crate::kernels::FieldGrids::new(v);
        let n = self.grid.n();
        let mut acc = [Array2::zeros((n, n)), Array2::zeros((n, n))];
        crate::kernels::advect_into(&mut acc, &adv.u, &target.du, 1.0);
        crate::kernels::assemble_projected(
            &self.grid,
            Some(acc),
            &crate::kernels::DriftTail::default(),
        )
    }

    /// L2 norm, H1 seminorm (via the derivative symbol) and L4 norm (by
    /// grid quadrature of |v|^4).
    pub fn norms(&self) -> Norms {
        let n = self.grid.n();
        let area = self.grid.length() * self.grid.length();
        let scale = self.grid.wavenumber_scale();

        let mut l2_sq = 0.0;
        let mut h1_sq = 0.0;
        for i in 0..n {
            let k1 = if i == n / 2 {
                0.0
            } else {
                scale * self.grid.wavenumber(i) as f64
            };
            for j in 0..n {
                let k2 = if j == n / 2 {
                    0.0
                } else {
                    scale * self.grid.wavenumber(j) as f64
                };
                let m = self.coeffs[0][[i, j]].norm_sqr() + self.coeffs[1][[i, j]].norm_sqr();
                l2_sq += m;
                h1_sq += (k1 * k1 + k2 * k2) * m;
            }
        }

        let grids = self.to_grid();
        let mut l4_acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s = grids[0][[i, j]].powi(2) + grids[1][[i, j]].powi(2);
                l4_acc += s * s;
            }
        }
        let cell = area / (n * n) as f64;

        Norms {
            l2: (area * l2_sq).sqrt(),
            h1_seminorm: (area * h1_sq).sqrt(),
            l4: (cell * l4_acc).powf(0.25),
        }
    }

    /// |v|_2^2 by Parseval.
    pub fn energy(&self) -> f64 {
        let area = self.grid.length() * self.grid.length();
        let sum: f64 = self
            .coeffs
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        area * sum
    }

    /// L2 inner product of two real fields.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert!(self.grid.compatible(&other.grid));
        let area = self.grid.length() * self.grid.length();
        let mut acc = 0.0;
        for l in 0..D {
            for (a, b) in self.coeffs[l].iter().zip(other.coeffs[l].iter()) {
                acc += (a * b.conj()).re;
            }
        }
        area * acc
    }

    pub fn mean_mode(&self) -> [Complex64; D] {
        [self.coeffs[0][[0, 0]], self.coeffs[1][[0, 0]]]
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for l in 0..D {
            out.coeffs[l].mapv_inplace(|z| z * c);
        }
        out
    }

    /// self += c * other. The flag survives only if both sides carry it.
    pub fn add_scaled(&mut self, other: &SpectralField, c: f64) {
        assert!(self.grid.compatible(&other.grid));
        for l in 0..D {
            ndarray::Zip::from(&mut self.coeffs[l])
                .and(&other.coeffs[l])
                .for_each(|a, &b| *a += b * c);
        }
        self.divergence_free &= other.divergence_free;
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    /// Multiply both components modewise by a real symbol (used for the
    /// integrating-factor diffusion step). Preserves the divergence
    /// constraint since the factor is scalar per mode.
    pub fn mul_real_symbol(&mut self, symbol: &Array2<f64>) {
        for l in 0..D {
            ndarray::Zip::from(&mut self.coeffs[l])
                .and(symbol)
                .for_each(|a, &s| *a *= s);
        }
    }

    /// Spectral drift add: self += c * (b . grad) src.
    pub fn add_directional_derivative(&mut self, src: &SpectralField, b: [f64; 2], c: f64) {
        let n = self.grid.n();
        let scale = self.grid.wavenumber_scale();
        for l in 0..D {
            for i in 0..n {
                let k1 = if i == n / 2 {
                    0.0
                } else {
                    scale * self.grid.wavenumber(i) as f64
                };
                for j in 0..n {
                    let k2 = if j == n / 2 {
                        0.0
                    } else {
                        scale * self.grid.wavenumber(j) as f64
                    };
                    let ik_dot_b = Complex64::new(0.0, b[0] * k1 + b[1] * k2);
                    self.coeffs[l][[i, j]] += ik_dot_b * src.coeffs[l][[i, j]] * c;
                }
            }
        }
        self.divergence_free = false;
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest violation of the reality constraint vhat(-k) = conj(vhat(k)).
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.grid.n();
        let mut dev: f64 = 0.0;
        for l in 0..D {
            for i in 0..n {
                let ci = self.grid.conj_index(i);
                for j in 0..n {
                    let cj = self.grid.conj_index(j);
                    let d = (self.coeffs[l][[i, j]] - self.coeffs[l][[ci, cj]].conj()).norm();
                    dev = dev.max(d);
                }
            }
        }
        dev
    }

    /// Largest modewise |kappa . vhat(k)|.
    pub fn divergence_deviation(&self) -> f64 {
        self.divergence()
            .coeffs
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn has_finite_values(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Debug-build check of the representation invariants. Fields whose
    /// largest coefficient sits at round-off level (debris of exact
    /// cancellations) are skipped: relative symmetry is meaningless there.
    pub fn debug_validate(&self) {
        #[cfg(debug_assertions)]
        {
            // Absolute floor: exact cancellations (S of a pure gradient)
            // leave round-off debris that does not scale with the result.
            let floor = 1e-15;
            let scale = self.max_abs_coeff();
            debug_assert!(
                self.hermitian_deviation() <= SYMMETRY_TOL * scale * 10.0 + floor,
                "hermitian symmetry violated: {} vs scale {}",
                self.hermitian_deviation(),
                scale
            );
            if self.divergence_free {
                let kscale = self.grid.wavenumber_scale() * self.grid.n() as f64;
                debug_assert!(
                    self.divergence_deviation() <= (SYMMETRY_TOL * scale + floor) * kscale,
                    "divergence-free flag violated: {}",
                    self.divergence_deviation()
                );
            }
        }
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Array2<Complex64>; D] {
        &mut self.coeffs
    }
}

impl ScalarSpectralField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeff(&self, k: [i64; 2]) -> Complex64 {
        let n = self.grid.n() as i64;
        let i = (((k[0] % n) + n) % n) as usize;
        let j = (((k[1] % n) + n) % n) as usize;
        self.coeffs[[i, j]]
    }

    pub fn l2_norm(&self) -> f64 {
        let area = self.grid.length() * self.grid.length();
        (area * self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// The Taylor-Green vortex (sin x cos y, -cos x sin y), the classical exact
/// solution used as a deterministic oracle. Lives on the lowest modes
/// |k_1| = |k_2| = 1 of the grid's own period.
pub fn taylor_green(grid: &Grid) -> SpectralField {
    let mut f = SpectralField::zero(grid);
    let quarter = Complex64::new(0.25, 0.0);
    let im = Complex64::new(0.0, 1.0);
    // sin x cos y = -i/4 (e^{i(x+y)} + e^{i(x-y)}) + c.c.
    f.add_real_mode([1, 1], [-im * quarter, Complex64::default()]);
    f.add_real_mode([1, -1], [-im * quarter, Complex64::default()]);
    // -cos x sin y = i/4 (e^{i(x+y)} - e^{i(x-y)}) + c.c.
    f.add_real_mode([1, 1], [Complex64::default(), im * quarter]);
    f.add_real_mode([1, -1], [Complex64::default(), -im * quarter]);
    f.leray_project()
}

/// Seeded mean-zero divergence-free random field with coefficient decay
/// (1 + |k|^2)^(-decay/2); deterministic for a fixed seed. Nyquist lines are
/// left empty.
pub fn random_divfree_field(grid: &Grid, decay_exponent: f64, seed: u64) -> SpectralField {
    random_field_impl(grid, decay_exponent, seed, true)
}

/// Seeded mean-zero random field without the divergence-free constraint.
pub fn random_field(grid: &Grid, decay_exponent: f64, seed: u64) -> SpectralField {
    random_field_impl(grid, decay_exponent, seed, false)
}

fn random_field_impl(grid: &Grid, decay_exponent: f64, seed: u64, divfree: bool) -> SpectralField {
    assert!(decay_exponent > 0.0);
    let mut rng = seeded_rng(seed);
    let mut out = SpectralField::zero(grid);
    let half = grid.n() as i64 / 2;
    let mut reps: Vec<[i64; 2]> = Vec::new();
    for k1 in 1..half {
        for k2 in (-half + 1)..half {
            reps.push([k1, k2]);
        }
    }
    for k2 in 1..half {
        reps.push([0, k2]);
    }
    for k in reps {
        let ksq = (k[0] * k[0] + k[1] * k[1]) as f64;
        let amp = (1.0 + ksq).powf(-decay_exponent / 2.0);
        if divfree {
            let c = standard_complex(&mut rng) * amp;
            let norm = ksq.sqrt();
            let perp = [-(k[1] as f64) / norm, k[0] as f64 / norm];
            out.add_real_mode(k, [c * perp[0], c * perp[1]]);
        } else {
            let c1 = standard_complex(&mut rng) * amp;
            let c2 = standard_complex(&mut rng) * amp;
            out.add_real_mode(k, [c1, c2]);
        }
    }
    out.divergence_free = divfree;
    out.debug_validate();
    out
}
