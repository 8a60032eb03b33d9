//! Truncated noise space: Kraichnan transport modes, additive forcing
//! channels, the Ito correction tensor, and the Legendre time basis with its
//! chaos coordinates.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;
use crate::quadrature::gauss_legendre;
use crate::rng::standard_normal;

/// Orthonormal shifted-Legendre basis of L2(0, T); m_1 is constant 1/sqrt(T).
#[derive(Clone, Debug)]
pub struct TimeBasis {
    horizon: f64,
    n_t: u32,
}

impl TimeBasis {
    pub fn new(horizon: f64, n_t: u32) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time horizon must be positive, got {horizon}"
            )));
        }
        if n_t == 0 {
            return Err(Error::InvalidParameter("need at least one time mode".into()));
        }
        Ok(Self { horizon, n_t })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_t(&self) -> u32 {
        self.n_t
    }

    /// m_i(t) for i in 1..=n_t.
    pub fn eval(&self, i: u32, t: f64) -> f64 {
        assert!(i >= 1 && i <= self.n_t);
        let n = (i - 1) as usize;
        let x = 2.0 * t / self.horizon - 1.0;
        ((2.0 * n as f64 + 1.0) / self.horizon).sqrt() * legendre(n, x)
    }

    /// Exact antiderivative M_i(t) = int_0^t m_i(s) ds.
    pub fn antiderivative(&self, i: u32, t: f64) -> f64 {
        assert!(i >= 1 && i <= self.n_t);
        let n = (i - 1) as usize;
        let x = 2.0 * t / self.horizon - 1.0;
        if n == 0 {
            return t / self.horizon.sqrt();
        }
        // int_{-1}^{x} P_n = (P_{n+1} - P_{n-1}) / (2n + 1), zero at x = -1.
        let nf = n as f64;
        ((2.0 * nf + 1.0) / self.horizon).sqrt() * (self.horizon / 2.0)
            * (legendre(n + 1, x) - legendre(n - 1, x))
            / (2.0 * nf + 1.0)
    }

    /// Gram matrix by Gauss-Legendre quadrature exact for the integrands.
    pub fn gram_matrix(&self) -> Array2<f64> {
        let m = self.n_t as usize + 1;
        let (nodes, weights) = gauss_legendre(m);
        let nt = self.n_t as usize;
        let mut gram = Array2::zeros((nt, nt));
        for (x, w) in nodes.iter().zip(&weights) {
            let t = 0.5 * self.horizon * (x + 1.0);
            let jac = 0.5 * self.horizon;
            for a in 0..nt {
                for b in 0..nt {
                    gram[[a, b]] +=
                        w * jac * self.eval(a as u32 + 1, t) * self.eval(b as u32 + 1, t);
                }
            }
        }
        gram
    }
}

fn legendre(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Gaussian coordinates xi_i^k on the rectangle i <= n_t, k <= n_w.
#[derive(Clone, Debug)]
pub struct ChaosCoordinates {
    n_t: u32,
    n_w: u32,
    xi: Vec<f64>,
}

impl ChaosCoordinates {
    pub fn zero(n_t: u32, n_w: u32) -> Self {
        Self {
            n_t,
            n_w,
            xi: vec![0.0; (n_t * n_w) as usize],
        }
    }

    pub fn from_vec(n_t: u32, n_w: u32, xi: Vec<f64>) -> Self {
        assert_eq!(xi.len(), (n_t * n_w) as usize);
        Self { n_t, n_w, xi }
    }

    pub fn sample<R: Rng + ?Sized>(n_t: u32, n_w: u32, rng: &mut R) -> Self {
        let xi = (0..n_t * n_w).map(|_| standard_normal(rng)).collect();
        Self { n_t, n_w, xi }
    }

    pub fn n_t(&self) -> u32 {
        self.n_t
    }

    pub fn n_w(&self) -> u32 {
        self.n_w
    }

    /// Coordinate at slot (i, k); `None` outside the rectangle.
    pub fn get(&self, i: u32, k: u32) -> Option<f64> {
        (i >= 1 && i <= self.n_t && k >= 1 && k <= self.n_w)
            .then(|| self.xi[((i - 1) * self.n_w + (k - 1)) as usize])
    }

    pub fn set(&mut self, i: u32, k: u32, value: f64) {
        assert!(i >= 1 && i <= self.n_t && k >= 1 && k <= self.n_w);
        self.xi[((i - 1) * self.n_w + (k - 1)) as usize] = value;
    }
}

/// W^k(t) = sum_i xi_i^k M_i(t): the Wiener path synthesized from chaos
/// coordinates over a time basis.
pub fn path_from_chaos(xi: &ChaosCoordinates, basis: &TimeBasis, t: f64) -> Result<Vec<f64>> {
    if !(0.0..=basis.horizon() * (1.0 + 1e-12)).contains(&t) {
        return Err(Error::TimeOutOfRange {
            t,
            horizon: basis.horizon(),
        });
    }
    assert_eq!(xi.n_t(), basis.n_t(), "coordinate rectangle must match basis");
    let mut w = vec![0.0; xi.n_w() as usize];
    for i in 1..=xi.n_t() {
        let m = basis.antiderivative(i, t);
        for (k, slot) in w.iter_mut().enumerate() {
            *slot += xi.get(i, k as u32 + 1).expect("inside rectangle") * m;
        }
    }
    Ok(w)
}

/// n_w independent N(0, dt) increments.
pub fn wiener_increments<R: Rng + ?Sized>(dt: f64, n_w: usize, rng: &mut R) -> Vec<f64> {
    assert!(dt > 0.0);
    let s = dt.sqrt();
    (0..n_w).map(|_| s * standard_normal(rng)).collect()
}

/// The Kraichnan spectrum tensor at a wavevector, d = 2:
/// C0 / (1 + |z|^2)^((2 + kappa) / 2) * (I - z z^T / |z|^2).
pub fn spectrum_tensor(z: [f64; 2], c0: f64, kappa: f64) -> Result<[[f64; 2]; 2]> {
    let zsq = z[0] * z[0] + z[1] * z[1];
    if zsq == 0.0 {
        return Err(Error::ZeroWavevector);
    }
    if !(c0 > 0.0) || !(kappa > 0.0 && kappa < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "need C0 > 0 and kappa in (0, 2), got C0 = {c0}, kappa = {kappa}"
        )));
    }
    let scale = c0 / (1.0 + zsq).powf((2.0 + kappa) / 2.0);
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let proj = if a == b { 1.0 } else { 0.0 } - z[a] * z[b] / zsq;
            out[a][b] = scale * proj;
        }
    }
    Ok(out)
}

/// Phase of a transport mode field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Cos,
    Sin,
}

/// One Y-basis channel: an optional transport field and an optional
/// deterministic additive forcing component.
#[derive(Clone, Debug)]
pub struct NoiseMode {
    pub sigma: Option<SpectralField>,
    pub g: Option<SpectralField>,
    /// Lattice wavevector of a Kraichnan mode, for the inventory.
    pub wavevector: Option<[i64; 2]>,
    pub phase: Option<Phase>,
    pub amplitude: f64,
}

/// The truncated noise space shared by both solvers.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    grid: Grid,
    modes: Vec<NoiseMode>,
    ito_correction: [[f64; 2]; 2],
}

impl NoiseModel {
    /// No noise at all.
    pub fn empty(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            modes: Vec::new(),
            ito_correction: [[0.0; 2]; 2],
        }
    }

    /// Divergence-free Kraichnan transport modes for every lattice
    /// wavevector 0 < |m|_inf <= k_noise, one cosine and one sine field per
    /// +/-m representative.
    ///
    /// Amplitudes are sqrt(eta * tr Chat(m)) with eta = 2 counting both
    /// members of each +/-m pair, so that sum_k sigma_k (x) sigma_k(x)^T
    /// equals the truncated lattice sum of Chat and is constant in x; the
    /// Ito correction is half that sum.
    pub fn kraichnan(grid: &Grid, c0: f64, kappa: f64, k_noise: usize) -> Result<Self> {
        let max = grid.dealias_cutoff();
        if k_noise < 1 || k_noise > max {
            return Err(Error::CutoffOutOfRange {
                cutoff: k_noise,
                max,
            });
        }
        let mut modes = Vec::new();
        let mut ito = [[0.0; 2]; 2];
        for m in lattice_representatives(k_noise) {
            let tensor = spectrum_tensor([m[0] as f64, m[1] as f64], c0, kappa)?;
            let trace = tensor[0][0] + tensor[1][1];
            let amp = (2.0 * trace).sqrt();
            let norm = ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt();
            let perp = [-(m[1] as f64) / norm, m[0] as f64 / norm];
            for a in 0..2 {
                for b in 0..2 {
                    ito[a][b] += 0.5 * amp * amp * perp[a] * perp[b];
                }
            }
            for phase in [Phase::Cos, Phase::Sin] {
                let mut sigma = SpectralField::zero(grid);
                let half = 0.5 * amp;
                let coeff = match phase {
                    Phase::Cos => Complex64::new(half, 0.0),
                    Phase::Sin => Complex64::new(0.0, -half),
                };
                sigma.add_real_mode(m, [coeff * perp[0], coeff * perp[1]]);
                let sigma = sigma.leray_project();
                modes.push(NoiseMode {
                    sigma: Some(sigma),
                    g: None,
                    wavevector: Some(m),
                    phase: Some(phase),
                    amplitude: amp,
                });
            }
        }
        Ok(Self {
            grid: grid.clone(),
            modes,
            ito_correction: ito,
        })
    }

    /// Append a pure additive-forcing channel (no transport part).
    pub fn push_additive_mode(&mut self, g: SpectralField) {
        assert!(self.grid.compatible(g.grid()));
        self.modes.push(NoiseMode {
            sigma: None,
            g: Some(g),
            wavevector: None,
            phase: None,
            amplitude: 0.0,
        });
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_w(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[NoiseMode] {
        &self.modes
    }

    pub fn has_transport(&self) -> bool {
        self.modes.iter().any(|m| m.sigma.is_some())
    }

    pub fn has_additive(&self) -> bool {
        self.modes.iter().any(|m| m.g.is_some())
    }

    pub fn ito_correction(&self) -> [[f64; 2]; 2] {
        self.ito_correction
    }

    /// a^{ij} = nu delta^{ij} + ito_correction^{ij}.
    pub fn effective_diffusion(&self, nu: f64) -> [[f64; 2]; 2] {
        let mut a = self.ito_correction;
        a[0][0] += nu;
        a[1][1] += nu;
        a
    }

    /// Keep only the first `count` channels, recomputing the Ito correction
    /// from the retained transport modes (each single-phase mode contributes
    /// its x-averaged outer product amp^2/4 * perp perp^T). Retaining whole
    /// cosine/sine pairs keeps the correction spatially exact.
    pub fn truncated(&self, count: usize) -> Self {
        let modes: Vec<NoiseMode> = self.modes.iter().take(count).cloned().collect();
        let mut ito = [[0.0; 2]; 2];
        for mode in &modes {
            let Some(m) = mode.wavevector else { continue };
            let norm = ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt();
            let perp = [-(m[1] as f64) / norm, m[0] as f64 / norm];
            for a in 0..2 {
                for b in 0..2 {
                    ito[a][b] += 0.25 * mode.amplitude * mode.amplitude * perp[a] * perp[b];
                }
            }
        }
        Self {
            grid: self.grid.clone(),
            modes,
            ito_correction: ito,
        }
    }

    /// Pointwise sum_k sigma_k(x) sigma_k(x)^T on the grid, as the three
    /// distinct entries (11, 12, 22). Diagnostic for the homogeneity checks.
    pub fn sigma_outer_on_grid(&self) -> [Array2<f64>; 3] {
        let n = self.grid.n();
        let mut out = [
            Array2::<f64>::zeros((n, n)),
            Array2::<f64>::zeros((n, n)),
            Array2::<f64>::zeros((n, n)),
        ];
        for mode in &self.modes {
            let Some(sigma) = &mode.sigma else { continue };
            let g = sigma.to_grid();
            ndarray::Zip::from(&mut out[0])
                .and(&g[0])
                .for_each(|o, &v| *o += v * v);
            ndarray::Zip::from(&mut out[1])
                .and(&g[0])
                .and(&g[1])
                .for_each(|o, &a, &b| *o += a * b);
            ndarray::Zip::from(&mut out[2])
                .and(&g[1])
                .for_each(|o, &v| *o += v * v);
        }
        out
    }
}

/// One representative per +/-m pair with 0 < |m|_inf <= k, in a fixed order.
pub fn lattice_representatives(k: usize) -> Vec<[i64; 2]> {
    let k = k as i64;
    let mut out = Vec::new();
    for m2 in 1..=k {
        out.push([0, m2]);
    }
    for m1 in 1..=k {
        for m2 in -k..=k {
            out.push([m1, m2]);
        }
    }
    out
}

/// (B1) check for a^{ij} = nu delta^{ij} + ito: returns the smallest
/// eigenvalue of a - ito (which is nu by construction), erring when it is
/// not positive.
pub fn check_ellipticity(nu: f64, ito_correction: [[f64; 2]; 2]) -> Result<f64> {
    let mut a = ito_correction;
    a[0][0] += nu;
    a[1][1] += nu;
    let m11 = a[0][0] - ito_correction[0][0];
    let m22 = a[1][1] - ito_correction[1][1];
    let m12 = 0.5 * (a[0][1] - ito_correction[0][1] + a[1][0] - ito_correction[1][0]);
    let tr = m11 + m22;
    let disc = ((m11 - m22).powi(2) + 4.0 * m12 * m12).sqrt();
    let delta = 0.5 * (tr - disc);
    if delta <= 0.0 {
        return Err(Error::NotElliptic { delta });
    }
    Ok(delta)
}
