//! Uniform periodic grid on the 2-D torus and its FFT plans.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Square periodic grid: `n` points per axis on a torus of the given period.
///
/// The wavevector lattice is k in {-n/2 + 1, ..., n/2} per axis; physical
/// wavevectors are (2 pi / length) k. FFT plans are shared behind `Arc`, so
/// cloning a grid is cheap and fields on clones are interoperable.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    length: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Grid {
    /// Default domain period 2 pi, under which integer lattice wavevectors
    /// are also the physical ones.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_length(n, std::f64::consts::TAU)
    }

    pub fn with_length(n: usize, length: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid size must be even and at least 4, got {n}"
            )));
        }
        if !(length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "domain period must be positive, got {length}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            length,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Signed integer wavenumber of a storage index: 0..n/2 then negative.
    #[inline]
    pub fn wavenumber(&self, idx: usize) -> i64 {
        if idx <= self.n / 2 {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    /// Scale from integer wavenumbers to physical ones: 2 pi / length.
    #[inline]
    pub fn wavenumber_scale(&self) -> f64 {
        std::f64::consts::TAU / self.length
    }

    /// Storage index of the negated wavevector component.
    #[inline]
    pub fn conj_index(&self, idx: usize) -> usize {
        (self.n - idx) % self.n
    }

    /// Largest |k|_inf kept by the 2/3 dealiasing rule. Chosen so that
    /// triple products of retained modes stay strictly below the grid
    /// aliasing wavenumber: 3 * cutoff < n.
    pub fn dealias_cutoff(&self) -> usize {
        (self.n - 1) / 3
    }

    pub fn compatible(&self, other: &Grid) -> bool {
        self.n == other.n && self.length == other.length
    }

    /// In-place 2-D forward transform with 1/n^2 normalization, so the
    /// result holds mode amplitudes: v(x) = sum_k vhat(k) exp(i k . x).
    pub(crate) fn fft2_forward(&self, a: &mut Array2<Complex64>) {
        self.fft2(a, true);
        let norm = 1.0 / (self.n * self.n) as f64;
        a.mapv_inplace(|z| z * norm);
    }

    /// In-place unnormalized 2-D inverse transform (synthesis).
    pub(crate) fn fft2_inverse(&self, a: &mut Array2<Complex64>) {
        self.fft2(a, false);
    }

    fn fft2(&self, a: &mut Array2<Complex64>, forward: bool) {
        assert_eq!(a.dim(), (self.n, self.n));
        let plan = if forward { &self.fwd } else { &self.inv };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for mut row in a.rows_mut() {
            let slice = row.as_slice_mut().expect("standard layout row");
            plan.process_with_scratch(slice, &mut scratch);
        }
        let mut col = vec![Complex64::default(); self.n];
        for j in 0..self.n {
            for i in 0..self.n {
                col[i] = a[[i, j]];
            }
            plan.process_with_scratch(&mut col, &mut scratch);
            for i in 0..self.n {
                a[[i, j]] = col[i];
            }
        }
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.compatible(other)
    }
}
