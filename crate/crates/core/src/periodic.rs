//! Calculus on `ℂⁿ`-valued `T`-periodic functions via trigonometric
//! interpolation on a uniform grid.
//!
//! A function is stored both as grid values at `t_j = jT/N` and as
//! trigonometric coefficients for the modes `k ∈ {−⌊N/2⌋, …, ⌈N/2⌉−1}`; the
//! two representations are kept in sync through the discrete Fourier
//! transform. Differentiation and time shifts act diagonally on the modes, so
//! both are exact for trigonometric polynomials resolved by the grid.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static FFT_CACHE: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let fft = FFT_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    });
    fft.process(buf);
}

/// Largest entry magnitude of a complex matrix or vector.
pub fn max_abs<R, C, S>(m: &nalgebra::Matrix<Complex64, R, C, S>) -> f64
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::Storage<Complex64, R, C>,
{
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Signed mode number of FFT bin `b` for transform length `n`.
pub fn mode_of_bin(b: usize, n: usize) -> i64 {
    if b < (n + 1) / 2 {
        b as i64
    } else {
        b as i64 - n as i64
    }
}

/// A `ℂⁿ`-valued `T`-periodic function sampled on `N` uniform grid points.
#[derive(Debug, Clone)]
pub struct PeriodicFunction {
    period: f64,
    /// `N × n` grid values, row `j` holds the vector at `t_j = jT/N`.
    values: DMatrix<Complex64>,
    /// `N × n` trigonometric coefficients in FFT bin order.
    coeffs: DMatrix<Complex64>,
}

impl PeriodicFunction {
    pub fn from_values(period: f64, values: DMatrix<Complex64>) -> Self {
        assert!(period > 0.0, "period must be positive");
        assert!(values.nrows() > 0 && values.ncols() > 0);
        let coeffs = transform(&values, false);
        Self { period, values, coeffs }
    }

    pub fn from_coeffs(period: f64, coeffs: DMatrix<Complex64>) -> Self {
        assert!(period > 0.0, "period must be positive");
        let values = transform(&coeffs, true);
        Self { period, values, coeffs }
    }

    pub fn from_fn<F>(period: f64, dim: usize, n_grid: usize, f: F) -> Self
    where
        F: Fn(f64) -> DVector<Complex64>,
    {
        let mut values = DMatrix::zeros(n_grid, dim);
        for j in 0..n_grid {
            let t = period * j as f64 / n_grid as f64;
            values.row_mut(j).tr_copy_from(&f(t));
        }
        Self::from_values(period, values)
    }

    pub fn zero(period: f64, dim: usize, n_grid: usize) -> Self {
        Self::from_values(period, DMatrix::zeros(n_grid, dim))
    }

    pub fn constant(period: f64, v: &DVector<Complex64>, n_grid: usize) -> Self {
        Self::from_fn(period, v.len(), n_grid, |_| v.clone())
    }

    /// Random trigonometric polynomial with modes `|k| ≤ kmax`; coefficient
    /// magnitudes decay like `1/(1+k²)` so derivatives stay tame.
    pub fn random_band_limited<R: Rng>(
        period: f64,
        dim: usize,
        n_grid: usize,
        kmax: i64,
        rng: &mut R,
    ) -> Self {
        let mut coeffs = DMatrix::zeros(n_grid, dim);
        for b in 0..n_grid {
            let k = mode_of_bin(b, n_grid);
            if k.abs() > kmax {
                continue;
            }
            let damp = 1.0 / (1.0 + (k * k) as f64);
            for c in 0..dim {
                let re: f64 = rng.gen_range(-1.0..1.0);
                let im: f64 = rng.gen_range(-1.0..1.0);
                coeffs[(b, c)] = Complex64::new(re, im) * damp;
            }
        }
        Self::from_coeffs(period, coeffs)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_grid(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn coeffs(&self) -> &DMatrix<Complex64> {
        &self.coeffs
    }

    pub fn grid_times(&self) -> Vec<f64> {
        let n = self.n_grid();
        (0..n).map(|j| self.period * j as f64 / n as f64).collect()
    }

    /// Trigonometric interpolant at `t` (reduced mod `T`).
    pub fn eval(&self, t: f64) -> DVector<Complex64> {
        let n = self.n_grid();
        let tau = (t / self.period).rem_euclid(1.0);
        let mut out = DVector::zeros(self.dim());
        for b in 0..n {
            let k = mode_of_bin(b, n) as f64;
            let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k * tau);
            for c in 0..self.dim() {
                out[c] += self.coeffs[(b, c)] * phase;
            }
        }
        out
    }

    /// Spectral derivative: mode `k` multiplied by `2πik/T`.
    pub fn differentiate(&self) -> Self {
        let n = self.n_grid();
        let mut coeffs = self.coeffs.clone();
        for b in 0..n {
            let k = mode_of_bin(b, n) as f64;
            let factor = Complex64::new(0.0, 2.0 * std::f64::consts::PI * k / self.period);
            for c in 0..self.dim() {
                coeffs[(b, c)] *= factor;
            }
        }
        Self::from_coeffs(self.period, coeffs)
    }

    /// The function `t ↦ q(t − τ)`, realized by per-mode phases.
    pub fn shifted(&self, tau: f64) -> Self {
        let n = self.n_grid();
        let mut coeffs = self.coeffs.clone();
        for b in 0..n {
            let k = mode_of_bin(b, n) as f64;
            let phase =
                Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k * tau / self.period);
            for c in 0..self.dim() {
                coeffs[(b, c)] *= phase;
            }
        }
        Self::from_coeffs(self.period, coeffs)
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        let mut out = self.clone();
        out.values *= a;
        out.coeffs *= a;
        out
    }

    pub fn plus(&self, other: &Self) -> Self {
        self.zip(other, 1.0.into())
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.zip(other, (-1.0).into())
    }

    fn zip(&self, other: &Self, sign: Complex64) -> Self {
        assert_eq!(self.n_grid(), other.n_grid(), "grid mismatch");
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let values = &self.values + &other.values * sign;
        let coeffs = &self.coeffs + &other.coeffs * sign;
        Self { period: self.period, values, coeffs }
    }

    /// Sup norm over the grid (max absolute entry).
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Stacked node-major vector: entry `j*n + c` is component `c` at `t_j`.
    pub fn to_stacked(&self) -> DVector<Complex64> {
        let (n_grid, dim) = (self.n_grid(), self.dim());
        let mut out = DVector::zeros(n_grid * dim);
        for j in 0..n_grid {
            for c in 0..dim {
                out[j * dim + c] = self.values[(j, c)];
            }
        }
        out
    }

    pub fn from_stacked(period: f64, dim: usize, v: &DVector<Complex64>) -> Self {
        assert_eq!(v.len() % dim, 0);
        let n_grid = v.len() / dim;
        let mut values = DMatrix::zeros(n_grid, dim);
        for j in 0..n_grid {
            for c in 0..dim {
                values[(j, c)] = v[j * dim + c];
            }
        }
        Self::from_values(period, values)
    }

    /// Re-sample on a grid of `new_n` points by mode padding/truncation.
    pub fn resample(&self, new_n: usize) -> Self {
        let n = self.n_grid();
        let mut coeffs = DMatrix::zeros(new_n, self.dim());
        for b in 0..n {
            let k = mode_of_bin(b, n);
            // Keep modes representable on the target grid.
            let lo = -((new_n / 2) as i64);
            let hi = ((new_n + 1) / 2) as i64 - 1;
            if k < lo || k > hi {
                continue;
            }
            let nb = if k >= 0 { k as usize } else { (k + new_n as i64) as usize };
            for c in 0..self.dim() {
                coeffs[(nb, c)] = self.coeffs[(b, c)];
            }
        }
        Self::from_coeffs(self.period, coeffs)
    }

    /// Extract a single component as a scalar periodic function.
    pub fn component(&self, c: usize) -> Self {
        Self::from_values(self.period, DMatrix::from_column_slice(
            self.n_grid(),
            1,
            self.values.column(c).as_slice(),
        ))
    }
}

/// Columnwise DFT (`inverse = false`: values → coefficients, normalized by
/// `1/N`; `inverse = true`: coefficients → values).
fn transform(m: &DMatrix<Complex64>, inverse: bool) -> DMatrix<Complex64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, m.ncols());
    let mut buf = vec![Complex64::default(); n];
    for c in 0..m.ncols() {
        for j in 0..n {
            buf[j] = m[(j, c)];
        }
        fft_in_place(&mut buf, inverse);
        let scale = if inverse { 1.0 } else { 1.0 / n as f64 };
        for j in 0..n {
            out[(j, c)] = buf[j] * scale;
        }
    }
    out
}

/// `N × N` matrix of the forward DFT (values → coefficients) on `n` points.
pub fn dft_matrix(n: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(n, n);
    for b in 0..n {
        for j in 0..n {
            let arg = -2.0 * std::f64::consts::PI * (b * j) as f64 / n as f64;
            m[(b, j)] = Complex64::from_polar(1.0 / n as f64, arg);
        }
    }
    m
}

/// `N × N` matrix of the inverse DFT (coefficients → values) on `n` points.
pub fn idft_matrix(n: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for b in 0..n {
            let arg = 2.0 * std::f64::consts::PI * (b * j) as f64 / n as f64;
            m[(j, b)] = Complex64::from_polar(1.0, arg);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    fn scalar_fn(period: f64, n: usize, f: impl Fn(f64) -> Complex64) -> PeriodicFunction {
        PeriodicFunction::from_fn(period, 1, n, |t| DVector::from_element(1, f(t)))
    }

    #[test]
    fn roundtrip_values_coeffs() {
        let mut rng = StdRng::seed_from_u64(7);
        let q = PeriodicFunction::random_band_limited(2.0, 3, 32, 15, &mut rng);
        let back = PeriodicFunction::from_coeffs(2.0, q.coeffs().clone());
        assert!(max_abs(&(q.values() - back.values())) < 1e-13);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let q = scalar_fn(1.0, 16, |_| Complex64::new(1.0, 0.0));
        assert!(q.differentiate().sup_norm() < 1e-14);
    }

    #[test]
    fn derivative_of_single_mode_is_exact() {
        let q = scalar_fn(1.0, 16, |t| Complex64::from_polar(1.0, TAU * t));
        let dq = q.differentiate();
        for (j, &t) in q.grid_times().iter().enumerate() {
            let expect = Complex64::new(0.0, TAU) * Complex64::from_polar(1.0, TAU * t);
            assert!((dq.values()[(j, 0)] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_symbolic_cos() {
        // q(t) = cos(4πt), q̇(t) = −4π sin(4πt) on N = 16.
        let q = scalar_fn(1.0, 16, |t| Complex64::new((2.0 * TAU * t).cos(), 0.0));
        let dq = q.differentiate();
        let mut worst = 0.0f64;
        for (j, &t) in q.grid_times().iter().enumerate() {
            let expect = Complex64::new(-2.0 * TAU * (2.0 * TAU * t).sin(), 0.0);
            worst = worst.max((dq.values()[(j, 0)] - expect).norm());
        }
        assert!(worst <= 1e-12, "worst = {worst:e}");
    }

    #[test]
    fn shift_by_zero_and_period_are_identity() {
        let mut rng = StdRng::seed_from_u64(3);
        let q = PeriodicFunction::random_band_limited(1.5, 2, 24, 10, &mut rng);
        assert!(max_abs(&(q.shifted(0.0).values() - q.values())) < 1e-14);
        assert!(max_abs(&(q.shifted(1.5).values() - q.values())) < 1e-12);
    }

    #[test]
    fn shift_single_mode_phase() {
        // q(t) = e^{2πit}, τ = 1/4: q(t − 1/4) = −i e^{2πit}.
        let q = scalar_fn(1.0, 16, |t| Complex64::from_polar(1.0, TAU * t));
        let s = q.shifted(0.25);
        for j in 0..q.n_grid() {
            let expect = Complex64::new(0.0, -1.0) * q.values()[(j, 0)];
            assert!((s.values()[(j, 0)] - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn shift_matches_reevaluation() {
        let mut rng = StdRng::seed_from_u64(11);
        let q = PeriodicFunction::random_band_limited(1.0, 2, 32, 10, &mut rng);
        let s = q.shifted(0.3);
        let mut worst = 0.0f64;
        for (j, &t) in q.grid_times().iter().enumerate() {
            let expect = q.eval(t - 0.3);
            for c in 0..2 {
                worst = worst.max((s.values()[(j, c)] - expect[c]).norm());
            }
        }
        assert!(worst <= 1e-12, "worst = {worst:e}");
    }

    #[test]
    fn eval_at_grid_points_returns_stored_values() {
        let mut rng = StdRng::seed_from_u64(5);
        let q = PeriodicFunction::random_band_limited(2.0, 1, 16, 7, &mut rng);
        for (j, &t) in q.grid_times().iter().enumerate() {
            assert!((q.eval(t)[0] - q.values()[(j, 0)]).norm() < 1e-12);
        }
    }

    #[test]
    fn eval_closed_form_sin() {
        let q = scalar_fn(1.0, 32, |t| Complex64::new((TAU * t).sin(), 0.0));
        let got = q.eval(0.125)[0];
        let expect = (std::f64::consts::PI / 4.0).sin();
        assert!((got - Complex64::new(expect, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn differentiate_and_shift_commute() {
        let mut rng = StdRng::seed_from_u64(2);
        let q = PeriodicFunction::random_band_limited(1.0, 1, 32, 10, &mut rng);
        let a = q.differentiate().shifted(0.37);
        let b = q.shifted(0.37).differentiate();
        assert!(a.minus(&b).sup_norm() <= 1e-12);
    }

    #[test]
    fn derivative_matches_central_differences_at_second_order() {
        let mut rng = StdRng::seed_from_u64(4);
        let q = PeriodicFunction::random_band_limited(1.0, 1, 32, 6, &mut rng);
        let dq = q.differentiate();
        let err_at = |h: f64| -> f64 {
            let mut worst = 0.0f64;
            for &t in &q.grid_times() {
                let fd = (q.eval(t + h)[0] - q.eval(t - h)[0]) / Complex64::from(2.0 * h);
                worst = worst.max((fd - dq.eval(t)[0]).norm());
            }
            worst
        };
        let e2 = err_at(1e-2);
        let e3 = err_at(1e-3);
        let e4 = err_at(1e-4);
        // O(h²): each decade of h buys ~two decades of accuracy.
        assert!(e3 < e2 * 1e-1, "e2={e2:e} e3={e3:e}");
        assert!(e4 < e3 * 1e-1, "e3={e3:e} e4={e4:e}");
    }

    #[test]
    fn resample_preserves_low_modes() {
        let mut rng = StdRng::seed_from_u64(9);
        let q = PeriodicFunction::random_band_limited(1.0, 2, 32, 10, &mut rng);
        let r = q.resample(64);
        for &t in &q.grid_times() {
            let a = q.eval(t);
            let b = r.eval(t);
            assert!(max_abs(&(a - b)) < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn shift_composes(t1 in -0.9f64..0.9, t2 in -0.9f64..0.9, seed in 0u64..200) {
            let mut rng = StdRng::seed_from_u64(seed);
            let q = PeriodicFunction::random_band_limited(1.0, 1, 32, 8, &mut rng);
            let a = q.shifted(t1 + t2);
            let b = q.shifted(t1).shifted(t2);
            prop_assert!(a.minus(&b).sup_norm() <= 1e-12);
        }

        #[test]
        fn eval_is_periodic(t in -3.0f64..3.0, seed in 0u64..200) {
            let mut rng = StdRng::seed_from_u64(seed);
            let q = PeriodicFunction::random_band_limited(1.0, 1, 16, 6, &mut rng);
            let a = q.eval(t);
            let b = q.eval(t + 1.0);
            prop_assert!(max_abs(&(a - b)) < 1e-10);
        }
    }
}
