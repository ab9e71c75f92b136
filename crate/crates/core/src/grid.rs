//! Tensor grid for two-variable history fields `φ(t)(θ)`.
//!
//! Time is periodic and lives on the uniform grid of [`PeriodicFunction`];
//! the history variable `θ` lives on Chebyshev–Lobatto panels. Retarded
//! problems use a single panel `[r₋, 0]`; mixed problems use two panels
//! `[r₋, 0]` and `[0, r₊]` glued at `θ = 0`, so the boundary node is always
//! present exactly once.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::periodic::PeriodicFunction;

/// One Chebyshev–Lobatto panel with barycentric weights and a spectral
/// differentiation matrix on its nodes.
#[derive(Debug, Clone)]
pub struct Panel {
    pub lo: f64,
    pub hi: f64,
    /// Index of the panel's first node in the global ascending node list.
    pub offset: usize,
    pub nodes: Vec<f64>,
    pub bary_w: Vec<f64>,
    pub diff: DMatrix<f64>,
}

impl Panel {
    fn new(lo: f64, hi: f64, m: usize, offset: usize) -> Self {
        assert!(m >= 2 && hi > lo);
        let nodes: Vec<f64> = (0..m)
            .map(|j| {
                let x = -(std::f64::consts::PI * j as f64 / (m - 1) as f64).cos();
                lo + 0.5 * (hi - lo) * (x + 1.0)
            })
            .collect();
        let bary_w: Vec<f64> = (0..m)
            .map(|j| {
                let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == m - 1 {
                    w *= 0.5;
                }
                w
            })
            .collect();
        let diff = diff_matrix(&nodes, &bary_w);
        Self { lo, hi, offset, nodes, bary_w, diff }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, theta: f64) -> bool {
        let eps = 1e-12 * (self.hi - self.lo).max(1.0);
        theta >= self.lo - eps && theta <= self.hi + eps
    }

    /// Barycentric interpolation weights at `theta`, local node indexing.
    pub fn interp_weights(&self, theta: f64) -> Vec<f64> {
        let m = self.len();
        for (j, &x) in self.nodes.iter().enumerate() {
            if (theta - x).abs() < 1e-14 * (self.hi - self.lo).max(1.0) {
                let mut w = vec![0.0; m];
                w[j] = 1.0;
                return w;
            }
        }
        let mut raw: Vec<f64> = (0..m).map(|j| self.bary_w[j] / (theta - self.nodes[j])).collect();
        let sum: f64 = raw.iter().sum();
        for w in &mut raw {
            *w /= sum;
        }
        raw
    }
}

/// Barycentric differentiation matrix for arbitrary nodes/weights.
fn diff_matrix(nodes: &[f64], w: &[f64]) -> DMatrix<f64> {
    let m = nodes.len();
    let mut d = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut row_sum = 0.0;
        for j in 0..m {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// The `θ`-grid: one or two Chebyshev–Lobatto panels covering `[r₋, r₊]`.
#[derive(Debug, Clone)]
pub struct ThetaGrid {
    nodes: Vec<f64>,
    panels: Vec<Panel>,
    zero_index: usize,
}

impl ThetaGrid {
    /// Grid on `[r_minus, r_plus]` with `m` nodes per panel. `θ = 0` must be
    /// inside the interval and becomes a grid node.
    pub fn for_interval(r_minus: f64, r_plus: f64, m: usize) -> Arc<Self> {
        assert!(r_minus <= 0.0 && r_plus >= 0.0 && r_plus > r_minus);
        assert!(m >= 4, "need at least 4 theta nodes per panel");
        if r_plus == 0.0 {
            let panel = Panel::new(r_minus, 0.0, m, 0);
            let nodes = panel.nodes.clone();
            let zero_index = m - 1;
            Arc::new(Self { nodes, panels: vec![panel], zero_index })
        } else if r_minus == 0.0 {
            let panel = Panel::new(0.0, r_plus, m, 0);
            let nodes = panel.nodes.clone();
            Arc::new(Self { nodes, panels: vec![panel], zero_index: 0 })
        } else {
            let left = Panel::new(r_minus, 0.0, m, 0);
            let right = Panel::new(0.0, r_plus, m, m - 1);
            let mut nodes = left.nodes.clone();
            nodes.extend_from_slice(&right.nodes[1..]);
            let zero_index = m - 1;
            Arc::new(Self { nodes, panels: vec![left, right], zero_index })
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    pub fn r_minus(&self) -> f64 {
        self.nodes[0]
    }

    pub fn r_plus(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    fn panel_of(&self, theta: f64) -> &Panel {
        self.panels
            .iter()
            .find(|p| p.contains(theta))
            .unwrap_or_else(|| {
                panic!("theta = {theta} outside grid [{}, {}]", self.r_minus(), self.r_plus())
            })
    }

    /// Global `(node index, weight)` pairs for interpolation at `theta`.
    pub fn interp_weights(&self, theta: f64) -> Vec<(usize, f64)> {
        let panel = self.panel_of(theta);
        panel
            .interp_weights(theta)
            .into_iter()
            .enumerate()
            .filter(|(_, w)| *w != 0.0)
            .map(|(j, w)| (panel.offset + j, w))
            .collect()
    }
}

/// A discretized two-variable field `φ(t)(θ)`, `T`-periodic in `t`, stored as
/// one periodic function per `θ`-node.
#[derive(Debug, Clone)]
pub struct HistoryField {
    grid: Arc<ThetaGrid>,
    cols: Vec<PeriodicFunction>,
}

impl HistoryField {
    pub fn new(grid: Arc<ThetaGrid>, cols: Vec<PeriodicFunction>) -> Self {
        assert_eq!(grid.len(), cols.len(), "one column per theta node");
        Self { grid, cols }
    }

    pub fn from_fn<F>(grid: Arc<ThetaGrid>, period: f64, dim: usize, n_time: usize, f: F) -> Self
    where
        F: Fn(f64, f64) -> DVector<Complex64>,
    {
        let cols = grid
            .nodes()
            .iter()
            .map(|&theta| PeriodicFunction::from_fn(period, dim, n_time, |t| f(t, theta)))
            .collect();
        Self::new(grid, cols)
    }

    pub fn zero(grid: Arc<ThetaGrid>, period: f64, dim: usize, n_time: usize) -> Self {
        let cols = (0..grid.len()).map(|_| PeriodicFunction::zero(period, dim, n_time)).collect();
        Self::new(grid, cols)
    }

    /// Random field that is band-limited in `t` and a low-degree polynomial
    /// in `θ` (used by the verification suites).
    pub fn random_smooth<R: Rng>(
        grid: Arc<ThetaGrid>,
        period: f64,
        dim: usize,
        n_time: usize,
        kmax: i64,
        deg: usize,
        rng: &mut R,
    ) -> Self {
        let span = (grid.r_plus() - grid.r_minus()).max(1.0);
        let parts: Vec<PeriodicFunction> = (0..=deg)
            .map(|_| PeriodicFunction::random_band_limited(period, dim, n_time, kmax, rng))
            .collect();
        let cols = grid
            .nodes()
            .iter()
            .map(|&theta| {
                let x = theta / span;
                let mut col = PeriodicFunction::zero(period, dim, n_time);
                let mut xp = 1.0;
                for part in &parts {
                    col = col.plus(&part.scaled(Complex64::from(xp)));
                    xp *= x;
                }
                col
            })
            .collect();
        Self::new(grid, cols)
    }

    pub fn grid(&self) -> &Arc<ThetaGrid> {
        &self.grid
    }

    pub fn cols(&self) -> &[PeriodicFunction] {
        &self.cols
    }

    pub fn col(&self, m: usize) -> &PeriodicFunction {
        &self.cols[m]
    }

    pub fn period(&self) -> f64 {
        self.cols[0].period()
    }

    pub fn dim(&self) -> usize {
        self.cols[0].dim()
    }

    pub fn n_time(&self) -> usize {
        self.cols[0].n_grid()
    }

    /// The trace `t ↦ φ(t)(0)`.
    pub fn boundary(&self) -> PeriodicFunction {
        self.cols[self.grid.zero_index()].clone()
    }

    /// Interpolated column `t ↦ φ(t)(θ)` at arbitrary `θ`.
    pub fn interp_col(&self, theta: f64) -> PeriodicFunction {
        let weights = self.grid.interp_weights(theta);
        let mut out = PeriodicFunction::zero(self.period(), self.dim(), self.n_time());
        for (idx, w) in weights {
            out = out.plus(&self.cols[idx].scaled(Complex64::from(w)));
        }
        out
    }

    pub fn eval(&self, t: f64, theta: f64) -> DVector<Complex64> {
        let weights = self.grid.interp_weights(theta);
        let mut out = DVector::zeros(self.dim());
        for (idx, w) in weights {
            out += self.cols[idx].eval(t) * Complex64::from(w);
        }
        out
    }

    /// Partial derivative in `t` (spectral, columnwise).
    pub fn d_time(&self) -> Self {
        let cols = self.cols.iter().map(|c| c.differentiate()).collect();
        Self::new(self.grid.clone(), cols)
    }

    /// Partial derivative in `θ` (Chebyshev differentiation per panel; at a
    /// shared panel node the two one-sided values are averaged).
    pub fn d_theta(&self) -> Self {
        let n_time = self.n_time();
        let dim = self.dim();
        let mut acc: Vec<DMatrix<Complex64>> =
            (0..self.grid.len()).map(|_| DMatrix::zeros(n_time, dim)).collect();
        let mut hits = vec![0usize; self.grid.len()];
        for panel in self.grid.panels() {
            let m = panel.len();
            for i in 0..m {
                let gi = panel.offset + i;
                let mut row = DMatrix::zeros(n_time, dim);
                for j in 0..m {
                    let gj = panel.offset + j;
                    let d = Complex64::from(panel.diff[(i, j)]);
                    row += self.cols[gj].values() * d;
                }
                acc[gi] += row;
                hits[gi] += 1;
            }
        }
        let cols = acc
            .into_iter()
            .zip(hits)
            .map(|(mut v, h)| {
                if h > 1 {
                    v /= Complex64::from(h as f64);
                }
                PeriodicFunction::from_values(self.period(), v)
            })
            .collect();
        Self::new(self.grid.clone(), cols)
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        let cols = self.cols.iter().map(|c| c.scaled(a)).collect();
        Self::new(self.grid.clone(), cols)
    }

    pub fn plus(&self, other: &Self) -> Self {
        let cols = self.cols.iter().zip(&other.cols).map(|(a, b)| a.plus(b)).collect();
        Self::new(self.grid.clone(), cols)
    }

    pub fn minus(&self, other: &Self) -> Self {
        let cols = self.cols.iter().zip(&other.cols).map(|(a, b)| a.minus(b)).collect();
        Self::new(self.grid.clone(), cols)
    }

    /// Sup norm over the tensor grid. For infinite-delay problems pass the
    /// state-space weight `ρ`, giving `sup e^{ρθ}|φ(t)(θ)|`.
    pub fn sup_norm(&self, rho_weight: Option<f64>) -> f64 {
        self.cols
            .iter()
            .zip(self.grid.nodes())
            .map(|(c, &theta)| {
                let w = rho_weight.map_or(1.0, |rho| (rho * theta).exp());
                c.sup_norm() * w
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn lobatto_panel_endpoints_and_order() {
        let g = ThetaGrid::for_interval(-1.0, 0.0, 9);
        assert_eq!(g.len(), 9);
        assert!((g.r_minus() + 1.0).abs() < 1e-15);
        assert!(g.r_plus().abs() < 1e-15);
        assert_eq!(g.zero_index(), 8);
        for w in g.nodes().windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn mixed_grid_contains_zero_once() {
        let g = ThetaGrid::for_interval(-1.0, 1.0, 8);
        assert_eq!(g.len(), 15);
        let zeros = g.nodes().iter().filter(|&&x| x.abs() < 1e-14).count();
        assert_eq!(zeros, 1);
        assert!((g.nodes()[g.zero_index()]).abs() < 1e-14);
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let g = ThetaGrid::for_interval(-2.0, 1.0, 10);
        let f = |x: f64| 3.0 - 2.0 * x + 0.5 * x * x * x;
        let vals: Vec<f64> = g.nodes().iter().map(|&x| f(x)).collect();
        for &theta in &[-1.7, -0.9, -0.3, 0.0, 0.4, 0.99] {
            let w = g.interp_weights(theta);
            let got: f64 = w.iter().map(|&(i, wi)| wi * vals[i]).sum();
            assert!((got - f(theta)).abs() < 1e-12, "theta={theta}");
        }
    }

    #[test]
    fn diff_matrix_differentiates_cubic() {
        let g = ThetaGrid::for_interval(-1.0, 0.0, 12);
        let p = &g.panels()[0];
        let vals = DVector::from_iterator(12, p.nodes.iter().map(|&x| x * x * x));
        let dv = &p.diff * &vals;
        for (j, &x) in p.nodes.iter().enumerate() {
            assert!((dv[j] - 3.0 * x * x).abs() < 1e-10);
        }
    }

    #[test]
    fn field_theta_derivative_is_spectral() {
        let g = ThetaGrid::for_interval(-1.0, 1.0, 16);
        let f = HistoryField::from_fn(g, 1.0, 1, 8, |t, theta| {
            DVector::from_element(
                1,
                Complex64::new((2.0 * std::f64::consts::PI * t).cos() * theta.exp(), 0.0),
            )
        });
        // d/dθ e^θ = e^θ: derivative equals the field itself.
        let d = f.d_theta();
        let diff = d.minus(&f);
        assert!(diff.sup_norm(None) < 1e-9, "got {}", diff.sup_norm(None));
    }

    #[test]
    fn field_time_derivative_matches() {
        let g = ThetaGrid::for_interval(-1.0, 0.0, 8);
        let om = 2.0 * std::f64::consts::PI;
        let f = HistoryField::from_fn(g, 1.0, 1, 16, |t, theta| {
            DVector::from_element(1, Complex64::from_polar(1.0 + theta * theta, om * t))
        });
        let dt = f.d_time();
        for (m, col) in dt.cols().iter().enumerate() {
            let theta = f.grid().nodes()[m];
            for (j, &t) in col.grid_times().iter().enumerate() {
                let expect =
                    Complex64::new(0.0, om) * Complex64::from_polar(1.0 + theta * theta, om * t);
                assert!((col.values()[(j, 0)] - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn weighted_norm_uses_exponential_weight() {
        let g = ThetaGrid::for_interval(-10.0, 0.0, 12);
        let f = HistoryField::from_fn(g, 1.0, 1, 4, |_, theta| {
            DVector::from_element(1, Complex64::new((-0.2 * theta).exp(), 0.0))
        });
        // Unweighted sup sits at theta = -10 (value e^2); with rho = 0.5 the
        // weight e^{ρθ} pushes the sup to e^{2-5} < 1, attained near θ = -10.
        assert!((f.sup_norm(None) - (2.0f64).exp()).abs() < 1e-9);
        assert!(f.sup_norm(Some(0.5)) <= 1.0 + 1e-12);
    }

    #[test]
    fn random_smooth_field_interpolates_consistently() {
        let mut rng = StdRng::seed_from_u64(1);
        let g = ThetaGrid::for_interval(-1.0, 0.0, 10);
        let f = HistoryField::random_smooth(g, 1.0, 2, 16, 4, 3, &mut rng);
        let col3 = f.interp_col(f.grid().nodes()[3]);
        assert!(col3.minus(f.col(3)).sup_norm() < 1e-13);
    }
}
