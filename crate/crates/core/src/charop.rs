//! The characteristic operator `Δ(z)` and the explicit operator calculus
//! around it.
//!
//! On `T`-periodic functions the characteristic operator of `ẋ = L(t)x_t`
//! acts as
//!
//! ```text
//! (Δ(z)q)(t) = q̇(t) + z q(t) − L(t)[θ ↦ e^{zθ} q(t+θ)],
//! ```
//!
//! and `z` is a Floquet exponent exactly when `Δ(z)` has nontrivial kernel.
//! This module provides the discretized action and matrix of `Δ(z)`, its
//! analytic `z`-derivatives, the building blocks `R(z, D₀)` and `Q(z)ι` of
//! the equivalence `diag(Δ(z), I) = F(z)(zI − Â)E(z)`, the resolvent of the
//! Floquet generator assembled from `Δ(z)⁻¹`, and a residual check of the
//! equivalence identity on the tensor grid.
//!
//! All operations are pure; assembling `Δ` at distinct `z` is safe to run
//! concurrently.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::grid::{HistoryField, ThetaGrid};
use crate::model::{FdeModel, Kind};
use crate::periodic::{dft_matrix, idft_matrix, mode_of_bin, PeriodicFunction};
use crate::quad::composite_gauss_on;
use crate::{Error, Result};

/// Margin of the half-plane check for infinite-delay models: `Δ(z)` and the
/// associated fields are only trusted for `Re(z) > −ρ` strictly.
const HALF_PLANE_MARGIN: f64 = 1e-8;

/// Reject evaluation points outside the admissible half-plane of the model.
pub fn check_half_plane(m: &FdeModel, z: Complex64) -> Result<()> {
    if m.kind == Kind::Idde {
        let rho = m.rho.expect("validated idde has rho");
        if z.re <= -rho + HALF_PLANE_MARGIN {
            return Err(Error::Domain(format!(
                "Re(z) = {} is outside the admissible half-plane Re(z) > -rho = {}",
                z.re, -rho
            )));
        }
    }
    Ok(())
}

fn check_q(m: &FdeModel, q: &PeriodicFunction) -> Result<()> {
    if q.dim() != m.dim || (q.period() - m.period).abs() > 1e-12 * m.period {
        return Err(Error::Domain(format!(
            "function has dim {} period {}, model needs dim {} period {}",
            q.dim(),
            q.period(),
            m.dim,
            m.period
        )));
    }
    Ok(())
}

/// Action of the characteristic operator: `q̇ + zq − Σ w·A(t)e^{zθ}q(t+θ)`.
pub fn delta_apply(m: &FdeModel, z: Complex64, q: &PeriodicFunction) -> Result<PeriodicFunction> {
    check_half_plane(m, z)?;
    check_q(m, q)?;
    let mut out = q.differentiate().plus(&q.scaled(z));
    out = out.minus(&functional_part(m, z, q, 0)?);
    Ok(out)
}

/// `l`-th analytic `z`-derivative of `Δ(z)` applied to `q` (`l ≥ 1`).
///
/// The `zq` term contributes `q` at `l = 1` and nothing beyond; each
/// functional atom `−A(t)e^{zθ}q(t+θ)` contributes `−θˡ A(t)e^{zθ}q(t+θ)`.
/// Coefficients are analytic in `z`; nothing is differenced numerically.
pub fn delta_derivative(
    m: &FdeModel,
    z: Complex64,
    l: usize,
    q: &PeriodicFunction,
) -> Result<PeriodicFunction> {
    if l == 0 {
        return Err(Error::Domain("derivative order 0: use delta_apply".into()));
    }
    check_half_plane(m, z)?;
    check_q(m, q)?;
    let mut out = if l == 1 {
        q.clone()
    } else {
        PeriodicFunction::zero(m.period, m.dim, q.n_grid())
    };
    out = out.minus(&functional_part(m, z, q, l)?);
    Ok(out)
}

/// `Σ_atoms w · θˡ · A(t) e^{zθ} q(t+θ)` — the delay part of `Δ^{(l)}(z)q`.
fn functional_part(
    m: &FdeModel,
    z: Complex64,
    q: &PeriodicFunction,
    l: usize,
) -> Result<PeriodicFunction> {
    let n_time = q.n_grid();
    let times = q.grid_times();
    let mut acc: DMatrix<Complex64> = DMatrix::zeros(n_time, m.dim);
    for atom in m.atoms() {
        let theta = atom.theta;
        let factor = Complex64::from(atom.weight * theta.powi(l as i32)) * (z * theta).exp();
        if factor.norm() == 0.0 {
            continue;
        }
        let shifted = q.shifted(-theta);
        for (j, &t) in times.iter().enumerate() {
            let a = atom.coeff(t, m.period);
            let mut x = DVector::zeros(m.dim);
            for c in 0..m.dim {
                x[c] = shifted.values()[(j, c)];
            }
            let y = a * x * factor;
            for c in 0..m.dim {
                acc[(j, c)] += y[c];
            }
        }
    }
    Ok(PeriodicFunction::from_values(m.period, acc))
}

/// Collocation matrix of `Δ(z)` (or of `Δ^{(l)}(z)` for `deriv_order ≥ 1`) on
/// `n_time` uniform nodes, acting on stacked node-major vectors.
#[derive(Debug, Clone)]
pub struct DeltaMatrix {
    pub z: Complex64,
    pub n_time: usize,
    pub dim: usize,
    pub period: f64,
    pub matrix: DMatrix<Complex64>,
}

impl DeltaMatrix {
    pub fn size(&self) -> usize {
        self.n_time * self.dim
    }

    pub fn apply(&self, q: &PeriodicFunction) -> PeriodicFunction {
        let v = &self.matrix * q.to_stacked();
        PeriodicFunction::from_stacked(self.period, self.dim, &v)
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let svd = nalgebra::linalg::SVD::new(self.matrix.clone(), false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv
    }

    pub fn smallest_singular_value(&self) -> f64 {
        *self.singular_values().last().unwrap()
    }

    /// Right singular vectors with `σ_i < tol_rel · σ_max`, i.e. a numerical
    /// kernel basis.
    pub fn kernel(&self, tol_rel: f64) -> Vec<DVector<Complex64>> {
        let svd = nalgebra::linalg::SVD::new(self.matrix.clone(), false, true);
        let vt = svd.v_t.as_ref().unwrap();
        let smax = svd.singular_values.max();
        let mut out = Vec::new();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s < tol_rel * smax {
                out.push(vt.row(i).adjoint());
            }
        }
        out
    }

    /// LU solve with a singularity guard.
    pub fn solve(&self, rhs: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let smin = self.smallest_singular_value();
        let threshold = 1e3 * f64::EPSILON * self.opnorm_estimate();
        if smin <= threshold {
            return Err(Error::InSpectrum { z: self.z, nearest: self.z, distance: smin });
        }
        let lu = self.matrix.clone().lu();
        lu.solve(rhs)
            .ok_or_else(|| Error::Numerics("LU solve failed on the collocation matrix".into()))
    }

    pub fn opnorm_estimate(&self) -> f64 {
        // Max absolute row sum (induced sup-norm).
        (0..self.matrix.nrows())
            .map(|i| (0..self.matrix.ncols()).map(|j| self.matrix[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Assemble the collocation matrix of `Δ(z)`.
pub fn assemble_delta(m: &FdeModel, z: Complex64, n_time: usize) -> Result<DeltaMatrix> {
    check_half_plane(m, z)?;
    let mut matrix = assemble_functional(m, z, 0, n_time);
    matrix = -matrix;
    // q̇ block: Fourier differentiation, Kronecker with the identity.
    let diff_diag: Vec<Complex64> = (0..n_time)
        .map(|b| {
            Complex64::new(
                0.0,
                2.0 * std::f64::consts::PI * mode_of_bin(b, n_time) as f64 / m.period,
            )
        })
        .collect();
    let fd = fourier_multiplier(n_time, &diff_diag);
    for j in 0..n_time {
        for jp in 0..n_time {
            for c in 0..m.dim {
                matrix[(j * m.dim + c, jp * m.dim + c)] += fd[(j, jp)];
            }
        }
    }
    for i in 0..n_time * m.dim {
        matrix[(i, i)] += z;
    }
    Ok(DeltaMatrix { z, n_time, dim: m.dim, period: m.period, matrix })
}

/// Assemble the collocation matrix of `Δ^{(l)}(z)`, `l ≥ 1`.
pub fn assemble_delta_derivative(
    m: &FdeModel,
    z: Complex64,
    l: usize,
    n_time: usize,
) -> Result<DeltaMatrix> {
    if l == 0 {
        return Err(Error::Domain("derivative order 0: use assemble_delta".into()));
    }
    check_half_plane(m, z)?;
    let mut matrix = assemble_functional(m, z, l, n_time);
    matrix = -matrix;
    if l == 1 {
        for i in 0..n_time * m.dim {
            matrix[(i, i)] += Complex64::from(1.0);
        }
    }
    Ok(DeltaMatrix { z, n_time, dim: m.dim, period: m.period, matrix })
}

/// Matrix of `Σ_atoms w θˡ A(t) e^{zθ} ·(shift by θ)` on the stacked basis.
///
/// Every atom contributes `diag_t(A(t_j)) · IDFT · diag(phase_θ) · DFT`; the
/// products are regrouped as one accumulated half-transformed block matrix
/// followed by a single multiplication with `DFT ⊗ I`, so each atom costs
/// `O(N²n²)` instead of a dense triple product (kernels contribute one atom
/// per quadrature node, so this matters).
fn assemble_functional(m: &FdeModel, z: Complex64, l: usize, n_time: usize) -> DMatrix<Complex64> {
    let n = m.dim;
    let d = n_time * n;
    let times: Vec<f64> = (0..n_time).map(|j| m.period * j as f64 / n_time as f64).collect();
    let idft = idft_matrix(n_time);

    // half[(j,c),(b,cp)] = Σ_atoms A_atom(t_j)[c,cp] · factor · phase_b · IDFT[j,b]
    let mut half: DMatrix<Complex64> = DMatrix::zeros(d, d);
    let mut any = false;
    for atom in m.atoms() {
        let theta = atom.theta;
        let factor = Complex64::from(atom.weight * theta.powi(l as i32)) * (z * theta).exp();
        if factor.norm() == 0.0 {
            continue;
        }
        any = true;
        let phases: Vec<Complex64> = (0..n_time)
            .map(|b| {
                let k = mode_of_bin(b, n_time) as f64;
                factor
                    * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k * theta / m.period)
            })
            .collect();
        let constant = atom.constant_in_time();
        let a0 = atom.coeff(times[0], m.period);
        for (j, &t) in times.iter().enumerate() {
            let a = if constant { a0.clone() } else { atom.coeff(t, m.period) };
            for b in 0..n_time {
                let s = idft[(j, b)] * phases[b];
                for c in 0..n {
                    for cp in 0..n {
                        half[(j * n + c, b * n + cp)] += a[(c, cp)] * s;
                    }
                }
            }
        }
    }
    if !any {
        return half;
    }

    // out = half · (DFT ⊗ I_n).
    let dft = dft_matrix(n_time);
    let mut kron = DMatrix::zeros(d, d);
    for b in 0..n_time {
        for jp in 0..n_time {
            let w = dft[(b, jp)];
            for c in 0..n {
                kron[(b * n + c, jp * n + c)] = w;
            }
        }
    }
    half * kron
}

/// `IDFT · diag · DFT` — the nodal matrix of a Fourier multiplier.
fn fourier_multiplier(n: usize, diag: &[Complex64]) -> DMatrix<Complex64> {
    let dft = dft_matrix(n);
    let idft = idft_matrix(n);
    let mut scaled = dft;
    for b in 0..n {
        for j in 0..n {
            scaled[(b, j)] *= diag[b];
        }
    }
    idft * scaled
}

/// `[R(z, D₀)φ](t)(θ) = ∫_θ^0 e^{z(θ−s)} φ(t+θ−s)(s) ds`, quadrature along
/// characteristics. The result vanishes at `θ = 0` and obeys
/// `‖R(z,D₀)φ‖ ≤ M_z ‖φ‖` with `M_z = (1 − e^{−h Re z})/Re z`.
pub fn r_d0_apply(m: &FdeModel, z: Complex64, phi: &HistoryField) -> Result<HistoryField> {
    check_half_plane(m, z)?;
    let grid = phi.grid().clone();
    let n_time = phi.n_time();
    let dim = phi.dim();
    let mut cols = Vec::with_capacity(grid.len());
    for (idx, &theta) in grid.nodes().iter().enumerate() {
        if idx == grid.zero_index() {
            cols.push(PeriodicFunction::zero(m.period, dim, n_time));
            continue;
        }
        let (nodes, weights) = composite_gauss_on(24, theta, 0.0, 2.0);
        let mut acc: DMatrix<Complex64> = DMatrix::zeros(n_time, dim);
        for (&s, &w) in nodes.iter().zip(&weights) {
            let delta = theta - s;
            let col = phi.interp_col(s);
            let shifted = col.shifted(-delta);
            let factor = Complex64::from(w) * (z * delta).exp();
            acc += shifted.values() * factor;
        }
        cols.push(PeriodicFunction::from_values(m.period, acc));
    }
    Ok(HistoryField::new(grid, cols))
}

/// `(Q(z)ιq)(t)(θ) = e^{zθ} q(t+θ)` on the tensor grid.
pub fn q_iota_apply(
    m: &FdeModel,
    z: Complex64,
    q: &PeriodicFunction,
    grid: &Arc<ThetaGrid>,
) -> Result<HistoryField> {
    check_half_plane(m, z)?;
    check_q(m, q)?;
    let cols = grid
        .nodes()
        .iter()
        .map(|&theta| q.shifted(-theta).scaled((z * theta).exp()))
        .collect();
    Ok(HistoryField::new(grid.clone(), cols))
}

/// `E(z)(q, φ) = (q, ψ)` with `ψ = Q(z)ιq + R(z,D₀)φ`.
pub fn e_apply(
    m: &FdeModel,
    z: Complex64,
    q: &PeriodicFunction,
    phi: &HistoryField,
) -> Result<(PeriodicFunction, HistoryField)> {
    let psi = q_iota_apply(m, z, q, phi.grid())?.plus(&r_d0_apply(m, z, phi)?);
    Ok((q.clone(), psi))
}

/// `F(z)(p, φ) = (p + L(t)[R(z,D₀)φ](t), φ)`.
pub fn f_apply(
    m: &FdeModel,
    z: Complex64,
    p: &PeriodicFunction,
    phi: &HistoryField,
) -> Result<(PeriodicFunction, HistoryField)> {
    check_q(m, p)?;
    let correction = m.apply_l_field(&r_d0_apply(m, z, phi)?)?;
    Ok((p.plus(&correction), phi.clone()))
}

/// Discrete action of `zI − Â` on a pair `(p, ψ)` with `p = Mψ` implied:
/// returns `(zp − Kψ, zψ − Dψ)` where `(Kψ)(t) = L(t)ψ(t) − d/dt[ψ(t)(0)]`
/// and `Dψ = ∂_θψ − ∂_tψ`.
pub fn zi_minus_a_hat_apply(
    m: &FdeModel,
    z: Complex64,
    p: &PeriodicFunction,
    psi: &HistoryField,
) -> Result<(PeriodicFunction, HistoryField)> {
    let k_psi = m.apply_l_field(psi)?.minus(&psi.boundary().differentiate());
    let first = p.scaled(z).minus(&k_psi);
    let d_psi = psi.d_theta().minus(&psi.d_time());
    let second = psi.scaled(z).minus(&d_psi);
    Ok((first, second))
}

/// Residual of the equivalence `diag(Δ(z), I) = F(z)(zI − Â)E(z)` applied to
/// `(q, φ)`: both sides are evaluated on the tensor grid and the max norm of
/// the difference is returned.
pub fn equivalence_check(
    m: &FdeModel,
    z: Complex64,
    q: &PeriodicFunction,
    phi: &HistoryField,
) -> Result<f64> {
    let lhs_first = delta_apply(m, z, q)?;
    let (p, psi) = e_apply(m, z, q, phi)?;
    let (mid_first, mid_second) = zi_minus_a_hat_apply(m, z, &p, &psi)?;
    let (rhs_first, rhs_second) = f_apply(m, z, &mid_first, &mid_second)?;
    let weight = m.rho_weight();
    let r1 = rhs_first.minus(&lhs_first).sup_norm();
    let r2 = rhs_second.minus(phi).sup_norm(weight);
    Ok(r1.max(r2))
}

/// Discrete action of `zI − 𝒜` on a history field, with the `θ = 0` row
/// replaced by the generator's boundary functional:
/// interior `zψ − ∂_θψ + ∂_tψ`, boundary `zψ(t)(0) − L(t)ψ(t) + d/dt ψ(t)(0)`.
pub fn zi_minus_a_apply(m: &FdeModel, z: Complex64, psi: &HistoryField) -> Result<HistoryField> {
    let d_psi = psi.d_theta().minus(&psi.d_time());
    let interior = psi.scaled(z).minus(&d_psi);
    let boundary = psi
        .boundary()
        .scaled(z)
        .minus(&m.apply_l_field(psi)?)
        .plus(&psi.boundary().differentiate());
    let zero = psi.grid().zero_index();
    let mut cols: Vec<PeriodicFunction> = interior.cols().to_vec();
    cols[zero] = boundary;
    Ok(HistoryField::new(psi.grid().clone(), cols))
}

/// Resolvent of the Floquet generator:
/// `(R(z,𝒜)φ)(t)(θ) = e^{zθ}φ_z(t+θ) + [R(z,D₀)φ](t)(θ)` with
/// `φ_z = Δ(z)^{-1} w`, `w(t) = φ(t)(0) + L(t)[R(z,D₀)φ](t)`.
pub fn resolvent_apply(m: &FdeModel, z: Complex64, phi: &HistoryField) -> Result<HistoryField> {
    check_half_plane(m, z)?;
    let rd0 = r_d0_apply(m, z, phi)?;
    let w = phi.boundary().plus(&m.apply_l_field(&rd0)?);
    let dm = assemble_delta(m, z, phi.n_time())?;
    let phi_z_vec = dm.solve(&w.to_stacked())?;
    let phi_z = PeriodicFunction::from_stacked(m.period, m.dim, &phi_z_vec);
    let translation = q_iota_apply(m, z, &phi_z, phi.grid())?;
    Ok(translation.plus(&rd0))
}

/// Sup-norm bound constant of `R(z, D₀)` on a history interval of length `h`:
/// `M_z = (1 − e^{−h·Re z})/Re z`, with the limiting value `h` at `Re z = 0`.
pub fn resolvent_d0_bound(h: f64, z: Complex64) -> f64 {
    if z.re.abs() < 1e-12 {
        h
    } else {
        (1.0 - (-h * z.re).exp()) / z.re
    }
}
