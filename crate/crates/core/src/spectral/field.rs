use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use super::grid::Grid;
use crate::error::{invalid, Error, Result};
use crate::real::Real;

type PlanCache = Mutex<HashMap<(TypeId, usize, bool), Box<dyn Any + Send + Sync>>>;

fn plan_cache() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn forward_plan<T: Real>(n: usize) -> Arc<dyn RealToComplex<T>> {
    let mut map = plan_cache().lock().expect("fft plan cache poisoned");
    map.entry((TypeId::of::<T>(), n, true))
        .or_insert_with(|| Box::new(RealFftPlanner::<T>::new().plan_fft_forward(n)))
        .downcast_ref::<Arc<dyn RealToComplex<T>>>()
        .expect("plan type matches key")
        .clone()
}

fn inverse_plan<T: Real>(n: usize) -> Arc<dyn ComplexToReal<T>> {
    let mut map = plan_cache().lock().expect("fft plan cache poisoned");
    map.entry((TypeId::of::<T>(), n, false))
        .or_insert_with(|| Box::new(RealFftPlanner::<T>::new().plan_fft_inverse(n)))
        .downcast_ref::<Arc<dyn ComplexToReal<T>>>()
        .expect("plan type matches key")
        .clone()
}

/// Forward transform normalised so that `f(x_m) = Σ_j c_j e^{iξ_j (x_m - x_0)}`.
pub(crate) fn analyse<T: Real>(samples: &[T]) -> Vec<Complex<T>> {
    let n = samples.len();
    let plan = forward_plan::<T>(n);
    let mut input = samples.to_vec();
    let mut out = plan.make_output_vec();
    plan.process(&mut input, &mut out)
        .expect("forward fft buffer sizes");
    let scale = T::one() / T::of(n as f64);
    out.iter_mut().for_each(|c| *c = *c * scale);
    out
}

/// Inverse of [`analyse`]. The imaginary parts of the DC and Nyquist bins are
/// discarded, which is the real projection of the Hermitian extension.
pub(crate) fn synthesise<T: Real>(mut coeffs: Vec<Complex<T>>) -> Vec<T> {
    let n = 2 * (coeffs.len() - 1);
    let plan = inverse_plan::<T>(n);
    coeffs[0].im = T::zero();
    coeffs[n / 2].im = T::zero();
    let mut out = plan.make_output_vec();
    plan.process(&mut coeffs, &mut out)
        .expect("inverse fft buffer sizes");
    out
}

/// Real samples on a [`Grid`] together with a lazily computed half spectrum.
/// Values are immutable; every operation returns a new function.
#[derive(Debug, Clone)]
pub struct GridFunction<T: Real> {
    grid: Grid,
    samples: Vec<T>,
    spectrum: OnceLock<Vec<Complex<T>>>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(grid: Grid, samples: Vec<T>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        Ok(Self {
            grid,
            samples,
            spectrum: OnceLock::new(),
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            samples: vec![T::zero(); grid.len()],
            spectrum: OnceLock::new(),
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let samples = grid.points().map(|x| T::of(f(x))).collect();
        Self {
            grid,
            samples,
            spectrum: OnceLock::new(),
        }
    }

    /// Builds a field from its `N/2 + 1` half-spectrum coefficients.
    pub fn from_spectrum(grid: Grid, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.bins() {
            return Err(invalid(format!(
                "expected {} spectral bins, got {}",
                grid.bins(),
                coeffs.len()
            )));
        }
        let samples = synthesise(coeffs);
        Ok(Self {
            grid,
            samples,
            spectrum: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn spectrum(&self) -> &[Complex<T>] {
        self.spectrum.get_or_init(|| analyse(&self.samples))
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
            spectrum: OnceLock::new(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            spectrum: OnceLock::new(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product. Aliasing is not removed; see [`super::dealias`].
    pub fn mul(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn mean(&self) -> T {
        self.samples.iter().copied().sum::<T>() / T::of(self.grid.len() as f64)
    }

    pub fn max_abs(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `∫ f g dx` over one period (trapezoid, exact for band-limited data).
    pub fn inner(&self, other: &Self) -> T {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let s: T = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| a * b)
            .sum();
        s * T::of(self.grid.spacing())
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    /// `2L Σ_ξ w(|ξ|) |c_ξ|²` over the full Hermitian spectrum, so that
    /// `w ≡ 1` reproduces the squared L² norm.
    pub fn weighted_energy(&self, w: impl Fn(f64) -> f64) -> f64 {
        let spec = self.spectrum();
        let total: f64 = spec
            .iter()
            .enumerate()
            .map(|(j, c)| {
                self.grid.multiplicity(j) * w(self.grid.wavenumber(j)) * c.norm_sqr().as_f64()
            })
            .sum();
        total * self.grid.period()
    }

    /// Fallible variant of [`weighted_energy`](Self::weighted_energy) for
    /// weights that may be undefined at some wavenumber.
    pub fn try_weighted_energy(&self, w: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let spec = self.spectrum();
        let mut total = 0.0;
        for (j, c) in spec.iter().enumerate() {
            let e = c.norm_sqr().as_f64();
            if e == 0.0 {
                continue;
            }
            total += self.grid.multiplicity(j) * w(self.grid.wavenumber(j))? * e;
        }
        Ok(total * self.grid.period())
    }

    /// Largest wavenumber carrying a coefficient above `tol` in modulus.
    pub fn bandwidth(&self, tol: f64) -> f64 {
        self.spectrum()
            .iter()
            .enumerate()
            .rev()
            .find(|(_, c)| c.norm().as_f64() > tol)
            .map_or(0.0, |(j, _)| self.grid.wavenumber(j))
    }

    pub fn cast<U: Real>(&self) -> GridFunction<U> {
        GridFunction {
            grid: self.grid,
            samples: self.samples.iter().map(|v| U::of(v.as_f64())).collect(),
            spectrum: OnceLock::new(),
        }
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument(
                "fields live on different grids".into(),
            ));
        }
        Ok(())
    }
}
