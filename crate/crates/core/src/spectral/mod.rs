//! Periodic grids, real fields with cached spectra, and diagonal Fourier
//! multipliers (Hilbert transform, derivatives, `|D|`, cutoffs, shifts and
//! finite differences).
//!
//! Conventions: the torus is `[-L, L)`; wavenumbers are `ξ_j = π j / L`; the
//! Hilbert transform has symbol `-i sign ξ` and `Λ = |D| = H ∂ₓ` has symbol
//! `|ξ|`. The Nyquist bin of a real field is ambiguous between `±ξ_N`, so a
//! multiplier acts there through its even part `(m(ξ_N) + m(-ξ_N)) / 2`.

mod field;
mod grid;

use std::sync::Arc;

use num_complex::{Complex, Complex64};

pub use field::GridFunction;
pub use grid::Grid;

use crate::error::{invalid, Result};
use crate::real::Real;

/// Fourier symbol `m(ξ)` with the structural tags the operators rely on.
#[derive(Clone)]
pub struct Symbol {
    eval: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    /// `m(-ξ) = conj m(ξ)`: real input gives real output.
    pub hermitian: bool,
    /// `m(0) = 0` is enforced.
    pub homogeneous: bool,
}

impl std::fmt::Debug for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Symbol")
            .field("hermitian", &self.hermitian)
            .field("homogeneous", &self.homogeneous)
            .finish_non_exhaustive()
    }
}

impl Symbol {
    pub fn new(
        eval: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
        hermitian: bool,
        homogeneous: bool,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            hermitian,
            homogeneous,
        }
    }

    /// Real even symbol `ξ ↦ w(|ξ|)`.
    pub fn radial(w: impl Fn(f64) -> f64 + Send + Sync + 'static, homogeneous: bool) -> Self {
        Self::new(
            move |xi| Complex64::new(w(xi.abs()), 0.0),
            true,
            homogeneous,
        )
    }

    pub fn hilbert() -> Self {
        Self::new(|xi| Complex64::new(0.0, -xi.signum()), true, true)
    }

    pub fn derivative(order: u32) -> Self {
        Self::new(
            move |xi| Complex64::new(0.0, xi).powu(order),
            true,
            order > 0,
        )
    }

    /// `|ξ|^s`, the symbol of `Λ^s`.
    pub fn abs_power(s: f64) -> Self {
        Self::radial(move |k| k.powf(s), s > 0.0)
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        if self.homogeneous && xi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        (self.eval)(xi)
    }

    /// Multiplier actually applied to half-spectrum bin `j` of `grid`.
    fn bin_factor(&self, grid: &Grid, j: usize) -> Complex64 {
        let xi = grid.wavenumber(j);
        if j == grid.len() / 2 {
            0.5 * (self.eval(xi) + self.eval(-xi))
        } else {
            self.eval(xi)
        }
    }
}

fn map_bins<T: Real>(f: &GridFunction<T>, factor: impl Fn(usize) -> Complex64) -> GridFunction<T> {
    let coeffs: Vec<Complex<T>> = f
        .spectrum()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let m = factor(j);
            *c * Complex::new(T::of(m.re), T::of(m.im))
        })
        .collect();
    GridFunction::from_spectrum(*f.grid(), coeffs).expect("bin count preserved")
}

/// Applies a Hermitian multiplier. Non-Hermitian symbols would produce complex
/// output and are rejected.
pub fn apply_multiplier<T: Real>(f: &GridFunction<T>, m: &Symbol) -> Result<GridFunction<T>> {
    if !m.hermitian {
        return Err(invalid("symbol does not preserve real fields"));
    }
    let grid = *f.grid();
    Ok(map_bins(f, |j| m.bin_factor(&grid, j)))
}

pub fn hilbert<T: Real>(f: &GridFunction<T>) -> GridFunction<T> {
    apply_multiplier(f, &Symbol::hilbert()).expect("hilbert symbol is hermitian")
}

pub fn derivative<T: Real>(f: &GridFunction<T>, order: u32) -> GridFunction<T> {
    apply_multiplier(f, &Symbol::derivative(order)).expect("derivative symbol is hermitian")
}

/// `Λ f = |D| f = H ∂ₓ f`.
pub fn lambda<T: Real>(f: &GridFunction<T>) -> GridFunction<T> {
    apply_multiplier(f, &Symbol::abs_power(1.0)).expect("|ξ| is hermitian")
}

/// `J_n`: keeps the modes with `|ξ| ≤ n`.
pub fn cutoff<T: Real>(f: &GridFunction<T>, n: f64) -> Result<GridFunction<T>> {
    if !(n >= 0.0) {
        return Err(invalid(format!("cutoff must be non-negative, got {n}")));
    }
    let grid = *f.grid();
    let tol = 1e-12 * n.max(1.0);
    Ok(map_bins(f, |j| {
        let keep = grid.wavenumber(j) <= n + tol;
        Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
    }))
}

/// Removes modes above two thirds of the Nyquist wavenumber.
pub fn dealias<T: Real>(f: &GridFunction<T>) -> GridFunction<T> {
    let limit = f.grid().len() / 3;
    map_bins(f, |j| {
        Complex64::new(if j <= limit { 1.0 } else { 0.0 }, 0.0)
    })
}

/// `f(x - h)` by exact spectral translation.
pub fn shift<T: Real>(f: &GridFunction<T>, h: f64) -> GridFunction<T> {
    let m = Symbol::new(move |xi| Complex64::from_polar(1.0, -xi * h), true, false);
    apply_multiplier(f, &m).expect("translation is hermitian")
}

/// `δ_h^m f`, with `δ_h f(x) = f(x) - f(x - h)`; symbol `(1 - e^{-ihξ})^m`.
pub fn finite_difference<T: Real>(f: &GridFunction<T>, h: f64, m: u32) -> Result<GridFunction<T>> {
    if m == 0 {
        return Err(invalid("finite difference order must be at least 1"));
    }
    let sym = Symbol::new(
        move |xi| (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -xi * h)).powu(m),
        true,
        true,
    );
    apply_multiplier(f, &sym)
}

/// Slope `Δ_α f = (f(x) - f(x - α)) / α`.
pub fn slope<T: Real>(f: &GridFunction<T>, alpha: f64) -> Result<GridFunction<T>> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(invalid(format!(
            "slope needs a finite non-zero step, got {alpha}"
        )));
    }
    let d = finite_difference(f, alpha, 1)?;
    Ok(d.scale(T::of(1.0 / alpha)))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn grid() -> Grid {
        Grid::new(PI, 32).unwrap()
    }

    fn max_diff(a: &GridFunction<f64>, b: &GridFunction<f64>) -> f64 {
        a.samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn hilbert_of_cos_is_sin() {
        let g = grid();
        let f = GridFunction::<f64>::from_fn(g, |x| (3.0 * x).cos());
        let expect = GridFunction::from_fn(g, |x| (3.0 * x).sin());
        assert!(max_diff(&hilbert(&f), &expect) < 1e-13);
    }

    #[test]
    fn lambda_is_hilbert_of_derivative() {
        let g = grid();
        let f = GridFunction::<f64>::from_fn(g, |x| (2.0 * x).sin() + 0.3 * (5.0 * x + 1.0).cos());
        let a = lambda(&f);
        let b = hilbert(&derivative(&f, 1));
        assert!(max_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn lambda_of_single_mode() {
        let g = Grid::with_len(64).unwrap();
        let f = GridFunction::<f64>::from_fn(g, |x| x.sin());
        let lf = lambda(&f);
        assert!(max_diff(&lf, &f) < 1e-12);
    }

    #[test]
    fn cutoff_keeps_boundary_mode() {
        let g = grid();
        let f = GridFunction::<f64>::from_fn(g, |x| x.cos() + (2.0 * x).cos() + (3.0 * x).cos());
        let j = cutoff(&f, 2.0).unwrap();
        let expect = GridFunction::from_fn(g, |x| x.cos() + (2.0 * x).cos());
        assert!(max_diff(&j, &expect) < 1e-13);
        assert!(cutoff(&f, -1.0).is_err());
    }

    #[test]
    fn shift_and_differences() {
        let g = grid();
        let f = GridFunction::<f64>::from_fn(g, |x| (2.0 * x).sin());
        let h = 0.37;
        let s = shift(&f, h);
        let expect = GridFunction::from_fn(g, |x| (2.0 * (x - h)).sin());
        assert!(max_diff(&s, &expect) < 1e-13);
        let d2 = finite_difference(&f, h, 2).unwrap();
        let expect2 = GridFunction::from_fn(g, |x| {
            (2.0 * x).sin() - 2.0 * (2.0 * (x - h)).sin() + (2.0 * (x - 2.0 * h)).sin()
        });
        assert!(max_diff(&d2, &expect2) < 1e-13);
        assert!(slope(&f, 0.0).is_err());
        assert!(finite_difference(&f, h, 0).is_err());
    }

    #[test]
    fn nyquist_mode_under_odd_symbols() {
        let g = Grid::new(PI, 8).unwrap();
        let f = GridFunction::<f64>::from_fn(g, |x| (4.0 * x).cos());
        assert!(derivative(&f, 1).max_abs() < 1e-14);
        assert!((lambda(&f).max_abs() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn parseval_weighted_energy() {
        let g = grid();
        let f = GridFunction::<f64>::from_fn(g, |x| 1.0 + 2.0 * (3.0 * x).cos() - (16.0 * x).cos());
        let e = f.weighted_energy(|_| 1.0);
        let l2 = f.l2_norm().powi(2);
        assert!((e - l2).abs() < 1e-12 * l2);
    }

    #[test]
    fn single_precision_operators() {
        let g = grid();
        let f = GridFunction::<f32>::from_fn(g, |x| (3.0 * x).cos());
        let h = hilbert(&f);
        let err = h
            .samples()
            .iter()
            .zip(g.points())
            .map(|(v, x)| (*v as f64 - (3.0 * x).sin()).abs());
        assert!(err.fold(0.0, f64::max) < 1e-5);
    }
}
